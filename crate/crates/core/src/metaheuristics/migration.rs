use crate::error::{Error, Result};
use crate::params::ParamMap;

/// Emigrants per island per migration event.
pub const MAX_EMIGRANTS: usize = 2;

/// Starvation threshold divisor.
pub const STARVATION_RATIO: f64 = 2.5;

/// Lowest-id island whose population is 0 or strictly below another
/// island's population divided by 2.5.
pub fn starvation_target(pops: &[usize]) -> Option<usize> {
    let max = *pops.iter().max()?;
    pops.iter()
        .position(|&p| p == 0 || (p as f64) < max as f64 / STARVATION_RATIO)
}

/// Counter-clockwise neighbor (decreasing id) on a unidirectional ring.
pub fn ring_route(my_id: usize, n_islands: usize) -> Option<usize> {
    (n_islands >= 2).then(|| (my_id + n_islands - 1) % n_islands)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Every other island sends to the starving one.
    Starvation,
    Ring,
    None,
}

impl Route {
    /// Reads `<prefix>immigrationroute` (`starvation`, `ring` or `none`).
    pub fn from_params(p: &ParamMap, prefix: &str, default: Route) -> Result<Self> {
        let key = format!("{prefix}immigrationroute");
        match p.string(&key) {
            Ok(s) => match s.as_str() {
                "starvation" => Ok(Self::Starvation),
                "ring" => Ok(Self::Ring),
                "none" => Ok(Self::None),
                other => Err(Error::InvalidConfig {
                    key,
                    reason: format!("unknown route `{other}`"),
                }),
            },
            Err(Error::MissingConfig(_)) => Ok(default),
            Err(e) => Err(e),
        }
    }

    /// Destination of island `my_id` given the current populations.
    pub fn destination(self, my_id: usize, pops: &[usize]) -> Option<usize> {
        if pops.len() < 2 {
            return None;
        }
        match self {
            Self::Starvation => starvation_target(pops).filter(|&t| t != my_id),
            Self::Ring => ring_route(my_id, pops.len()),
            Self::None => None,
        }
    }
}

/// Moves each island's best (lowest `fitness`) up to two members to its
/// route destination. Destinations are decided from the populations at
/// entry. Returns the number of emigrants per island.
pub fn migrate<T>(islands: &mut [&mut Vec<T>], route: Route, fitness: impl Fn(&T) -> f64) -> Vec<usize> {
    let pops: Vec<usize> = islands.iter().map(|i| i.len()).collect();
    let mut moving: Vec<(usize, Vec<T>)> = Vec::new();
    let mut sent = vec![0; islands.len()];
    for (id, island) in islands.iter_mut().enumerate() {
        let Some(dest) = route.destination(id, &pops) else { continue };
        let k = MAX_EMIGRANTS.min(island.len());
        if k == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..island.len()).collect();
        order.sort_by(|&a, &b| fitness(&island[a]).total_cmp(&fitness(&island[b])).then(a.cmp(&b)));
        let mut picked: Vec<usize> = order[..k].to_vec();
        // Remove from the back so earlier indices stay valid.
        picked.sort_unstable_by(|a, b| b.cmp(a));
        let out: Vec<T> = picked.into_iter().map(|i| island.remove(i)).collect();
        sent[id] = out.len();
        moving.push((dest, out));
    }
    for (dest, out) in moving {
        islands[dest].extend(out);
    }
    sent
}
