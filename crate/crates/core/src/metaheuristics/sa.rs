use std::f64::consts::E;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gradient::{multi_start, start_points, Descent, StopReason};
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng;

use super::ga::invalid;

const SA_STREAM: u64 = 0x5a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoolingSchedule {
    /// `t0 * max(0, 1 - k / horizon)`.
    Linear { t0: f64, horizon: f64 },
    /// `t0 * alpha^k`.
    Exponential { t0: f64, alpha: f64 },
    /// `t0 / ln(k + e)`.
    Boltzmann { t0: f64 },
    /// `t0 / (1 + k)`.
    Cauchy { t0: f64 },
}

impl CoolingSchedule {
    /// Reads `sa.schedule`, `sa.t0` and `sa.alpha`; `horizon` is the
    /// number of iterations per chain.
    pub fn from_params(p: &ParamMap, horizon: usize) -> Result<Self> {
        let t0 = p.real_or("sa.t0", 1000.0)?;
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(invalid("sa.t0", "must be finite and nonnegative"));
        }
        match p.string_or("sa.schedule", "linear".into())?.as_str() {
            "linear" => Ok(Self::Linear {
                t0,
                horizon: horizon.max(1) as f64,
            }),
            "exponential" => {
                let alpha = p.real_or("sa.alpha", 0.99)?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(invalid("sa.alpha", "must be in [0, 1]"));
                }
                Ok(Self::Exponential { t0, alpha })
            }
            "boltzmann" => Ok(Self::Boltzmann { t0 }),
            "cauchy" => Ok(Self::Cauchy { t0 }),
            other => Err(invalid("sa.schedule", &format!("unknown schedule `{other}`"))),
        }
    }
}

pub fn sa_temperature(s: CoolingSchedule, k: u64) -> f64 {
    let k = k as f64;
    match s {
        CoolingSchedule::Linear { t0, horizon } => t0 * (1.0 - k / horizon).max(0.0),
        CoolingSchedule::Exponential { t0, alpha } => t0 * alpha.powf(k),
        CoolingSchedule::Boltzmann { t0 } => t0 / (k + E).ln(),
        CoolingSchedule::Cauchy { t0 } => t0 / (1.0 + k),
    }
}

/// Metropolis rule for a uniform draw `u` in [0, 1).
pub fn sa_accept(delta: f64, t: f64, u: f64) -> bool {
    delta <= 0.0 || (t > 0.0 && u < (-delta / t).exp())
}

/// Multi-start simulated annealing (`sa`): `sa.starts` independent chains
/// spread over `threads`, each perturbing every coordinate uniformly by up
/// to `sa.step` of the box width.
#[derive(Debug, Default, Clone, Copy)]
pub struct SimulatedAnnealing;

struct Chain<'a> {
    ctx: &'a RunContext<'a>,
    bx: &'a SearchBox,
    schedule: CoolingSchedule,
    iters: usize,
    step: f64,
}

impl Chain<'_> {
    fn run(&self, index: usize, x0: &[f64]) -> Result<Descent> {
        let ev = &self.ctx.evaluator;
        let mut r = rng::stream(self.ctx.seed, &[SA_STREAM, index as u64]);
        let mut x = x0.to_vec();
        let mut f = ev.fitness(&x)?;
        self.ctx.report(&x, f);
        let (mut best_x, mut best_f) = (x.clone(), f);
        for k in 0..self.iters {
            let mut y: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(j, v)| v + self.step * self.bx.width(j) * (2.0 * r.random::<f64>() - 1.0))
                .collect();
            self.bx.clamp(&mut y);
            let fy = match ev.fitness(&y) {
                Ok(v) => v,
                Err(Error::BudgetExhausted { .. }) => break,
                Err(e) => return Err(e),
            };
            self.ctx.report(&y, fy);
            let t = sa_temperature(self.schedule, k as u64);
            if sa_accept(fy - f, t, r.random()) {
                x = y;
                f = fy;
                if f < best_f {
                    best_f = f;
                    best_x = x.clone();
                }
            }
        }
        Ok(Descent {
            x: best_x,
            f: best_f,
            iterations: self.iters,
            stop: StopReason::IterationCap,
        })
    }
}

fn iterations(p: &ParamMap) -> Result<usize> {
    match p.count("sa.iters") {
        Ok(k) => Ok(k),
        Err(Error::MissingConfig(_)) => {
            let budget = p.count("budget").map_err(|e| match e {
                Error::MissingConfig(_) => Error::MissingConfig("sa.iters (or budget)".into()),
                e => e,
            })?;
            let starts = p.count_or("sa.starts", 1)?.max(1);
            Ok((budget / starts).saturating_sub(1).max(1))
        }
        Err(e) => Err(e),
    }
}

impl Algorithm for SimulatedAnnealing {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        CoolingSchedule::from_params(p, iterations(p)?)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let p = ctx.params;
        let bx = SearchBox::from_params(p, "")?;
        let iters = iterations(p)?;
        let chain = Chain {
            ctx,
            bx: &bx,
            schedule: CoolingSchedule::from_params(p, iters)?,
            iters,
            step: p.real_or("sa.step", 0.1)?,
        };
        let starts = start_points(p, &bx, ctx.seed, "sa.")?;
        let threads = p.count_or("threads", 1)?.max(1);
        let index = |x0: &[f64]| starts.iter().position(|s| std::ptr::eq(s.as_slice(), x0)).expect("own start");
        for o in multi_start(&starts, threads, |x0| chain.run(index(x0), x0)) {
            match o {
                Ok(_) | Err(Error::BudgetExhausted { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::FnObjective;
    use crate::optimizer::Optimizer;
    use std::sync::Arc;

    #[test]
    fn schedules() {
        let lin = CoolingSchedule::Linear { t0: 1000.0, horizon: 100.0 };
        assert_eq!(sa_temperature(lin, 100), 0.0);
        assert_eq!(sa_temperature(lin, 150), 0.0);
        assert_eq!(sa_temperature(lin, 50), 500.0);
        assert_eq!(sa_temperature(CoolingSchedule::Cauchy { t0: 1000.0 }, 9), 100.0);
        for s in [
            lin,
            CoolingSchedule::Exponential { t0: 1000.0, alpha: 0.9 },
            CoolingSchedule::Boltzmann { t0: 1000.0 },
            CoolingSchedule::Cauchy { t0: 1000.0 },
        ] {
            assert_eq!(sa_temperature(s, 0), 1000.0);
            let ts: Vec<f64> = (0..300).map(|k| sa_temperature(s, k)).collect();
            assert!(ts.windows(2).all(|w| w[1] <= w[0] && w[1] >= 0.0));
        }
    }

    #[test]
    fn metropolis_rule() {
        assert!(sa_accept(-1.0, 0.0, 0.999));
        assert!(sa_accept(-1.0, 5.0, 0.999));
        assert!(!sa_accept(1.0, 0.0, 0.0));
        let mut r = rng::stream(2024, &[]);
        let n = 10_000;
        let hits = (0..n).filter(|_| sa_accept(1.0, 1.0, r.random())).count();
        let p = hits as f64 / n as f64;
        assert!((p - (-1.0f64).exp()).abs() <= 0.02, "{p}");
    }

    #[test]
    fn chains_use_whole_budget_and_improve() {
        let o = Optimizer::new(SimulatedAnnealing);
        o.set_params(
            ParamMap::new()
                .with("dim", 3)
                .with("box.lo", -5.0)
                .with("box.hi", 5.0)
                .with("sa.t0", 1.0)
                .with("sa.starts", 4)
                .with("threads", 2)
                .with("budget", 4000),
        )
        .unwrap();
        let r = o
            .minimize(Arc::new(FnObjective::new("s", |x: &[f64]| x.iter().map(|v| v * v).sum())))
            .unwrap();
        assert_eq!(r.evals_used, 4000);
        assert!(r.value < 0.1, "{}", r.value);
    }
}
