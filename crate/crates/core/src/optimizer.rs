//! The optimizer contract: configure with a [`ParamMap`], then minimize.
//!
//! Common keys read by every algorithm:
//!
//! | key | type | meaning |
//! |-----|------|---------|
//! | `dim` | int | problem dimension |
//! | `box.lo`, `box.hi` | real or vec | search box |
//! | `seed` | int | master seed (default 0) |
//! | `budget` | int | evaluation cap (default unlimited) |

use std::sync::{Arc, Mutex};

use rand::Rng;

use crate::error::{Error, Result};
use crate::function::{EvalBudget, Evaluator, ObjectiveFunction};
use crate::incumbent::{Incumbent, IncumbentChannel};
use crate::params::ParamMap;
use crate::vector::DenseVector;

/// Best argument and value of a run, plus evaluations spent.
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub arg: DenseVector,
    pub value: f64,
    pub evals_used: u64,
}

/// Axis-aligned box constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidConfig {
                key: "dim".into(),
                reason: "dimension must be at least 1".into(),
            });
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::InvalidConfig {
                    key: "box".into(),
                    reason: format!("coordinate {i}: [{l}, {h}] is not a finite interval"),
                });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Reads `dim`, `box.lo`, `box.hi` (or `<prefix>box.lo/.hi` when present).
    pub fn from_params(p: &ParamMap, prefix: &str) -> Result<Self> {
        let dim = p.count("dim")?;
        let key = |k: &str| {
            let scoped = format!("{prefix}{k}");
            if p.contains(&scoped) {
                scoped
            } else {
                k.to_owned()
            }
        };
        Self::new(p.bound(&key("box.lo"), dim)?, p.bound(&key("box.hi"), dim)?)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.random_range(l..=h) })
            .collect()
    }
}

/// Per-run state handed to an [`Algorithm`].
pub struct RunContext<'a> {
    pub evaluator: Evaluator,
    pub params: &'a ParamMap,
    pub seed: u64,
    channel: &'a IncumbentChannel,
    best: Mutex<Option<Incumbent>>,
}

impl<'a> RunContext<'a> {
    pub fn new(evaluator: Evaluator, params: &'a ParamMap, channel: &'a IncumbentChannel) -> Result<Self> {
        let seed = params.int_or("seed", 0)? as u64;
        Ok(Self {
            evaluator,
            params,
            seed,
            channel,
            best: Mutex::new(None),
        })
    }

    pub fn channel(&self) -> &IncumbentChannel {
        self.channel
    }

    /// Records a candidate; improvements are published on the channel.
    pub fn report(&self, arg: &[f64], value: f64) {
        if !value.is_finite() {
            return;
        }
        {
            let mut best = self.best.lock().unwrap();
            if best.as_ref().is_some_and(|b| value >= b.value) {
                return;
            }
            *best = Some(Incumbent {
                arg: arg.to_vec(),
                value,
            });
        }
        self.channel.publish(arg, value);
    }

    pub fn best(&self) -> Option<Incumbent> {
        self.best.lock().unwrap().clone()
    }

    pub fn best_value(&self) -> f64 {
        self.best.lock().unwrap().as_ref().map_or(f64::INFINITY, |b| b.value)
    }
}

/// One optimization method. Implementations report every candidate they
/// evaluate through [`RunContext::report`]; the wrapper turns the best
/// reported point into the [`OptResult`].
pub trait Algorithm: Send + Sync {
    fn name(&self) -> &'static str;

    /// Fails early on missing or ill-typed keys.
    fn validate(&self, _params: &ParamMap) -> Result<()> {
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()>;
}

/// Object-safe optimizer interface used by the harness.
pub trait Minimizer: Send + Sync {
    fn name(&self) -> &str;
    fn set_params(&self, params: ParamMap) -> Result<()>;
    fn minimize(&self, f: Arc<dyn ObjectiveFunction>) -> Result<OptResult>;
    fn channel(&self) -> &Arc<IncumbentChannel>;
}

#[derive(Default)]
struct Slot {
    params: Option<ParamMap>,
    running: bool,
}

/// Wraps an [`Algorithm`] with parameter management, budget accounting and
/// incumbent publication.
pub struct Optimizer<A> {
    algo: A,
    slot: Mutex<Slot>,
    channel: Arc<IncumbentChannel>,
}

impl<A: Algorithm> Optimizer<A> {
    pub fn new(algo: A) -> Self {
        let channel = Arc::new(IncumbentChannel::new(algo.name()));
        Self {
            algo,
            slot: Mutex::new(Slot::default()),
            channel,
        }
    }

    pub fn algorithm(&self) -> &A {
        &self.algo
    }

    pub fn set_params(&self, params: ParamMap) -> Result<()> {
        let mut slot = self.slot.lock().unwrap();
        if slot.running {
            return Err(Error::OptimizerBusy);
        }
        slot.params = Some(params);
        Ok(())
    }

    pub fn minimize(&self, f: Arc<dyn ObjectiveFunction>) -> Result<OptResult> {
        let params = {
            let mut slot = self.slot.lock().unwrap();
            if slot.running {
                return Err(Error::OptimizerBusy);
            }
            let p = slot
                .params
                .clone()
                .ok_or_else(|| Error::MissingConfig("params (set_params not called)".into()))?;
            slot.running = true;
            p
        };
        let _guard = RunningGuard(&self.slot);
        self.algo.validate(&params)?;
        let budget = match params.int("budget") {
            Ok(b) if b > 0 => EvalBudget::new(b as u64),
            Ok(b) => {
                return Err(Error::InvalidConfig {
                    key: "budget".into(),
                    reason: format!("{b} is not positive"),
                })
            }
            Err(Error::MissingConfig(_)) => EvalBudget::unlimited(),
            Err(e) => return Err(e),
        };
        let evaluator = Evaluator::new(f, params.clone(), budget.clone());
        let ctx = RunContext::new(evaluator, &params, &self.channel)?;
        match self.algo.run(&ctx) {
            Ok(()) | Err(Error::BudgetExhausted { .. }) => {}
            Err(e) => return Err(e),
        }
        let best = ctx.best().ok_or(Error::BudgetExhausted {
            limit: budget.limit(),
        })?;
        Ok(OptResult {
            arg: DenseVector::new(best.arg)?,
            value: best.value,
            evals_used: budget.used(),
        })
    }
}

impl<A: Algorithm> Minimizer for Optimizer<A> {
    fn name(&self) -> &str {
        self.algo.name()
    }

    fn set_params(&self, params: ParamMap) -> Result<()> {
        Optimizer::set_params(self, params)
    }

    fn minimize(&self, f: Arc<dyn ObjectiveFunction>) -> Result<OptResult> {
        Optimizer::minimize(self, f)
    }

    fn channel(&self) -> &Arc<IncumbentChannel> {
        &self.channel
    }
}

struct RunningGuard<'a>(&'a Mutex<Slot>);

impl Drop for RunningGuard<'_> {
    fn drop(&mut self) {
        if let Ok(mut slot) = self.0.lock() {
            slot.running = false;
        }
    }
}
