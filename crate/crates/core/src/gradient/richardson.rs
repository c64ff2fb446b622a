use crate::error::{Error, Result};
use crate::function::Evaluator;
use crate::params::ParamMap;

/// Step used for coordinate `xj`: `h` when fixed, else `1e-5 * max(1, |xj|)`.
pub fn step(h: Option<f64>, xj: f64) -> f64 {
    h.unwrap_or(1e-5 * xj.abs().max(1.0))
}

fn component(mut f: impl FnMut(&[f64]) -> Result<f64>, x: &[f64], j: usize, h: f64) -> Result<f64> {
    let mut y = x.to_vec();
    let mut probe = |dx: f64| {
        y[j] = x[j] + dx;
        f(&y)
    };
    let p2 = probe(2.0 * h)?;
    let p1 = probe(h)?;
    let m1 = probe(-h)?;
    let m2 = probe(-2.0 * h)?;
    Ok((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h))
}

/// Five-point central difference gradient of a plain closure (no budget).
pub fn richardson_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: Option<f64>) -> Vec<f64> {
    (0..x.len())
        .map(|j| component(|y| Ok(f(y)), x, j, step(h, x[j])).expect("infallible"))
        .collect()
}

/// Fourth-order numerical gradient charged to an evaluator's budget.
///
/// Each call reserves all `4 * dim` probe evaluations up front, so a
/// gradient is either fully paid for or not computed at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimator {
    h: Option<f64>,
    threads: usize,
}

impl Default for GradientEstimator {
    fn default() -> Self {
        Self { h: None, threads: 1 }
    }
}

impl GradientEstimator {
    pub fn new(h: Option<f64>) -> Self {
        Self { h, threads: 1 }
    }

    /// Reads `grad.h` (absolute step; relative default when absent).
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let h = match p.real("grad.h") {
            Ok(h) if h > 0.0 => Some(h),
            Ok(h) => {
                return Err(Error::InvalidConfig {
                    key: "grad.h".into(),
                    reason: format!("{h} is not positive"),
                })
            }
            Err(Error::MissingConfig(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self::new(h))
    }

    /// Splits the components over `threads` scoped threads.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn evals_per_gradient(dim: usize) -> u64 {
        4 * dim as u64
    }

    pub fn gradient(&self, ev: &Evaluator, x: &[f64]) -> Result<Vec<f64>> {
        let d = x.len();
        ev.budget().try_reserve(Self::evals_per_gradient(d))?;
        let comp = |j: usize| component(|y| ev.eval_prepaid(y), x, j, step(self.h, x[j]));
        if self.threads <= 1 || d < 2 {
            return (0..d).map(comp).collect();
        }
        let chunk = d.div_ceil(self.threads);
        let mut g = vec![0.0; d];
        std::thread::scope(|s| {
            let handles: Vec<_> = g
                .chunks_mut(chunk)
                .enumerate()
                .map(|(c, out)| {
                    let comp = &comp;
                    s.spawn(move || -> Result<()> {
                        for (k, slot) in out.iter_mut().enumerate() {
                            *slot = comp(c * chunk + k)?;
                        }
                        Ok(())
                    })
                })
                .collect();
            handles
                .into_iter()
                .try_for_each(|h| h.join().expect("gradient thread panicked"))
        })?;
        Ok(g)
    }
}
