use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::function::Evaluator;
use crate::incumbent::{IncumbentChannel, Observer, ObserverId};

use super::descent::{Descent, Report, StopReason};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const SWEEP_TOL: f64 = 1e-12;

/// Feasible values of one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum VarDomain {
    Interval { lo: f64, hi: f64 },
    Discrete(Vec<f64>),
}

impl VarDomain {
    pub fn integers(lo: i64, hi: i64) -> Self {
        Self::Discrete((lo..=hi).map(|v| v as f64).collect())
    }

    /// Multiples of `step` inside `[lo, hi]`.
    pub fn multiples(step: f64, lo: f64, hi: f64) -> Self {
        let first = (lo / step).ceil() as i64;
        let last = (hi / step).floor() as i64;
        Self::Discrete((first..=last).map(|k| k as f64 * step).collect())
    }

    fn snap(&self, v: f64) -> f64 {
        match self {
            Self::Interval { lo, hi } => v.clamp(*lo, *hi),
            Self::Discrete(vals) => vals
                .iter()
                .copied()
                .min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()))
                .unwrap_or(v),
        }
    }

    fn validate(&self, j: usize) -> Result<()> {
        let ok = match self {
            Self::Interval { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Self::Discrete(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                key: "avd.domains".into(),
                reason: format!("coordinate {j} has an empty or non-finite domain"),
            })
        }
    }
}

/// Coordinate-order and stopping settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AvdParams {
    /// Coordinate visiting order; `None` means `0..dim`.
    pub order: Option<Vec<usize>>,
    pub max_sweeps: usize,
}

impl Default for AvdParams {
    fn default() -> Self {
        Self {
            order: None,
            max_sweeps: 1000,
        }
    }
}

/// Minimizes `phi` on `[lo, hi]` by golden-section search; returns the
/// best probe.
fn golden(mut phi: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let tol = 1e-9 * (hi - lo).max(1.0);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = phi(c)?;
    let mut fd = phi(d)?;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = phi(d)?;
        }
        for (t, ft) in [(c, fc), (d, fd)] {
            if ft < best.1 {
                best = (t, ft);
            }
        }
    }
    Ok(best)
}

/// Alternating-variables descent: cyclic one-coordinate minimization.
///
/// A coordinate move is kept only if it strictly improves the objective;
/// the run stops after a sweep that improves by less than `1e-12`.
pub fn avd_descend(
    ev: &Evaluator,
    x0: &[f64],
    f0: Option<f64>,
    domains: &[VarDomain],
    p: &AvdParams,
    report: Report<'_>,
) -> Result<Descent> {
    if domains.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            actual: domains.len(),
        });
    }
    for (j, d) in domains.iter().enumerate() {
        d.validate(j)?;
    }
    let order: Vec<usize> = match &p.order {
        Some(o) => {
            if o.iter().any(|&j| j >= x0.len()) {
                return Err(Error::InvalidConfig {
                    key: "avd.tryorder".into(),
                    reason: "coordinate index out of range".into(),
                });
            }
            o.clone()
        }
        None => (0..x0.len()).collect(),
    };
    let mut x: Vec<f64> = x0.iter().zip(domains).map(|(v, d)| d.snap(*v)).collect();
    let mut f = match f0 {
        Some(f) if x.as_slice() == x0 => f,
        _ => ev.fitness(&x)?,
    };
    report(&x, f);
    let mut sweeps = 0;
    let stop = 'outer: loop {
        if sweeps >= p.max_sweeps {
            break StopReason::IterationCap;
        }
        sweeps += 1;
        let start = f;
        for &j in &order {
            let mut y = x.clone();
            let mut phi = |v: f64| {
                y[j] = v;
                ev.fitness(&y)
            };
            let found = match &domains[j] {
                VarDomain::Interval { lo, hi } if lo < hi => golden(&mut phi, *lo, *hi),
                VarDomain::Interval { .. } => continue,
                VarDomain::Discrete(vals) => vals
                    .iter()
                    .filter(|v| **v != x[j])
                    .try_fold((x[j], f), |best, &v| {
                        let fv = phi(v)?;
                        Ok(if fv < best.1 { (v, fv) } else { best })
                    }),
            };
            match found {
                Ok((v, fv)) if fv < f => {
                    x[j] = v;
                    f = fv;
                    report(&x, f);
                }
                Ok(_) => {}
                Err(Error::BudgetExhausted { .. }) => break 'outer StopReason::BudgetExhausted,
                Err(e) => break 'outer StopReason::Aborted(e),
            }
        }
        if start - f < SWEEP_TOL {
            break StopReason::Converged;
        }
    };
    Ok(Descent {
        x,
        f,
        iterations: sweeps,
        stop,
    })
}

/// Runs AVD from each new incumbent of the channel it is attached to and
/// publishes back any improvement.
pub struct AvdObserver {
    evaluator: Evaluator,
    domains: Vec<VarDomain>,
    params: AvdParams,
    id: OnceLock<ObserverId>,
    busy: AtomicBool,
}

impl AvdObserver {
    pub fn new(evaluator: Evaluator, domains: Vec<VarDomain>, params: AvdParams) -> Self {
        Self {
            evaluator,
            domains,
            params,
            id: OnceLock::new(),
            busy: AtomicBool::new(false),
        }
    }

    /// Records the id returned by `attach`, so republication skips this
    /// observer.
    pub fn set_id(&self, id: ObserverId) {
        let _ = self.id.set(id);
    }
}

impl Observer for AvdObserver {
    fn on_incumbent(&self, channel: &IncumbentChannel, arg: &[f64], value: f64) {
        // Incumbents published while a search runs are skipped.
        if self.busy.swap(true, Ordering::SeqCst) {
            return;
        }
        if let Ok(r) = avd_descend(&self.evaluator, arg, Some(value), &self.domains, &self.params, &|_, _| {}) {
            if r.f < value {
                channel.publish_from(self.id.get().copied(), &r.x, r.f);
            }
        }
        self.busy.store(false, Ordering::SeqCst);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{EvalBudget, FnObjective};
    use crate::params::ParamMap;
    use std::sync::{Arc, Mutex};

    fn ev(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Evaluator {
        Evaluator::new(Arc::new(FnObjective::new("t", f)), ParamMap::new(), EvalBudget::unlimited())
    }

    fn boxes(d: usize, lo: f64, hi: f64) -> Vec<VarDomain> {
        vec![VarDomain::Interval { lo, hi }; d]
    }

    #[test]
    fn separable_sphere_in_one_sweep() {
        let e = ev(|x| x.iter().map(|v| v * v).sum());
        let r = avd_descend(&e, &[3.0, -7.0, 40.0], None, &boxes(3, -100.0, 100.0), &AvdParams::default(), &|_, _| {})
            .unwrap();
        assert!(r.f <= 1e-12, "{r:?}");
        // One improving sweep plus the sweep that detects convergence.
        assert!(r.iterations <= 2);
    }

    #[test]
    fn integer_domain() {
        let e = ev(|x| (x[0] - 2.3).powi(2));
        let r = avd_descend(&e, &[-5.0], None, &[VarDomain::integers(-10, 10)], &AvdParams::default(), &|_, _| {})
            .unwrap();
        assert_eq!(r.x, vec![2.0]);
        assert!((r.f - 0.09).abs() < 1e-12);
    }

    #[test]
    fn multiples_domain() {
        assert_eq!(VarDomain::multiples(0.5, -1.2, 1.0), VarDomain::Discrete(vec![-1.0, -0.5, 0.0, 0.5, 1.0]));
    }

    #[test]
    fn coupled_quadratic_converges() {
        let e = ev(|x| (x[0] + x[1]).powi(2) + (x[0] - x[1]).powi(2));
        let r = avd_descend(&e, &[1.0, 1.0], None, &boxes(2, -10.0, 10.0), &AvdParams::default(), &|_, _| {}).unwrap();
        assert!(r.x.iter().all(|v| v.abs() < 1e-6), "{r:?}");
    }

    #[test]
    fn monotone_updates() {
        let e = ev(|x| crate::benchfns::rastrigin(x));
        let seen = Mutex::new(Vec::new());
        avd_descend(
            &e,
            &[2.2, -3.1, 4.0],
            None,
            &boxes(3, -5.12, 5.12),
            &AvdParams {
                order: Some(vec![2, 0, 1]),
                ..AvdParams::default()
            },
            &|_, f| seen.lock().unwrap().push(f),
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert!(seen.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn observer_republishes_improvements() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let chan = IncumbentChannel::new("ga");
        let obs = Arc::new(AvdObserver::new(ev(f), boxes(2, -5.0, 5.0), AvdParams::default()));
        let id = chan.attach(obs.clone());
        obs.set_id(id);
        chan.publish(&[4.0, -3.0], f(&[4.0, -3.0]));
        assert!(chan.best_value() < 1e-12, "{}", chan.best_value());
    }
}
