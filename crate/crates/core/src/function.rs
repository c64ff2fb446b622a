//! Objective functions, evaluation budgets and the checked evaluation path.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::ParamMap;
use crate::vector::DenseVector;

/// A pure real-valued function of a real vector and a parameter map.
///
/// Implementations must be deterministic: the same `(x, params)` always
/// yields the same bits.
pub trait ObjectiveFunction: Send + Sync {
    fn name(&self) -> &str;

    /// Fixed dimension, if the function only accepts one.
    fn dim(&self) -> Option<usize> {
        None
    }

    fn eval(&self, x: &[f64], params: &ParamMap) -> f64;
}

/// Adapter turning a closure into an [`ObjectiveFunction`].
pub struct FnObjective<F> {
    name: String,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> ObjectiveFunction for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, x: &[f64], _params: &ParamMap) -> f64 {
        (self.f)(x)
    }
}

/// Wraps a function and counts every call that reaches it.
pub struct Counted {
    inner: Arc<dyn ObjectiveFunction>,
    calls: AtomicU64,
}

impl Counted {
    pub fn new(inner: Arc<dyn ObjectiveFunction>) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ObjectiveFunction for Counted {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> Option<usize> {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64], params: &ParamMap) -> f64 {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.eval(x, params)
    }
}

#[derive(Debug)]
struct BudgetInner {
    limit: u64,
    used: AtomicU64,
}

/// Shared evaluation counter with an exact cap.
///
/// Reservation is check-then-increment in one atomic step, so concurrent
/// evaluators can never overshoot the limit.
#[derive(Debug, Clone)]
pub struct EvalBudget {
    inner: Arc<BudgetInner>,
}

impl EvalBudget {
    pub fn new(limit: u64) -> Self {
        Self {
            inner: Arc::new(BudgetInner {
                limit,
                used: AtomicU64::new(0),
            }),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn limit(&self) -> u64 {
        self.inner.limit
    }

    pub fn used(&self) -> u64 {
        self.inner.used.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> u64 {
        self.inner.limit - self.used()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    /// Reserves exactly `n` evaluations or none at all.
    pub fn try_reserve(&self, n: u64) -> Result<()> {
        let limit = self.inner.limit;
        self.inner
            .used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| {
                (limit - u >= n).then_some(u + n)
            })
            .map(|_| ())
            .map_err(|_| Error::BudgetExhausted { limit })
    }

    /// Reserves as many of `n` evaluations as remain; returns the count.
    pub fn reserve_up_to(&self, n: u64) -> u64 {
        let limit = self.inner.limit;
        match self
            .inner
            .used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| {
                (u < limit).then(|| u + n.min(limit - u))
            }) {
            Ok(prev) => n.min(limit - prev),
            Err(_) => 0,
        }
    }
}

/// A function bound to its parameters and budget; the single path through
/// which optimizers evaluate candidates.
#[derive(Clone)]
pub struct Evaluator {
    function: Arc<dyn ObjectiveFunction>,
    params: Arc<ParamMap>,
    budget: EvalBudget,
}

impl Evaluator {
    pub fn new(function: Arc<dyn ObjectiveFunction>, params: ParamMap, budget: EvalBudget) -> Self {
        Self {
            function,
            params: Arc::new(params),
            budget,
        }
    }

    pub fn function(&self) -> &Arc<dyn ObjectiveFunction> {
        &self.function
    }

    pub fn params(&self) -> &ParamMap {
        &self.params
    }

    pub fn budget(&self) -> &EvalBudget {
        &self.budget
    }

    /// Charges one evaluation and evaluates `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_arg(x)?;
        self.budget.try_reserve(1)?;
        self.finish(x)
    }

    /// Evaluates `x` against evaluations the caller already reserved.
    pub fn eval_prepaid(&self, x: &[f64]) -> Result<f64> {
        self.check_arg(x)?;
        self.finish(x)
    }

    /// Like [`eval`](Self::eval), but maps a non-finite result to `+inf`
    /// so population methods can treat the candidate as infeasible.
    pub fn fitness(&self, x: &[f64]) -> Result<f64> {
        as_fitness(self.eval(x))
    }

    pub fn fitness_prepaid(&self, x: &[f64]) -> Result<f64> {
        as_fitness(self.eval_prepaid(x))
    }

    fn check_arg(&self, x: &[f64]) -> Result<()> {
        if let Some(expected) = self.function.dim() {
            if expected != x.len() {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: x.len(),
                });
            }
        }
        if let Some(index) = x.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteArgument { index });
        }
        Ok(())
    }

    fn finish(&self, x: &[f64]) -> Result<f64> {
        let v = self.function.eval(x, &self.params);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteResult {
                function: self.function.name().to_owned(),
            })
        }
    }
}

fn as_fitness(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::NonFiniteResult { .. }) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Evaluates `f(x)` under `budget`, charging exactly one evaluation.
pub fn evaluate(
    f: &Arc<dyn ObjectiveFunction>,
    x: &DenseVector,
    params: &ParamMap,
    budget: &EvalBudget,
) -> Result<f64> {
    Evaluator::new(Arc::clone(f), params.clone(), budget.clone()).eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> Arc<dyn ObjectiveFunction> {
        Arc::new(FnObjective::new("sphere", |x: &[f64]| x.iter().map(|v| v * v).sum()))
    }

    #[test]
    fn evaluate_charges_exactly_one() {
        let b = EvalBudget::new(3);
        let x = DenseVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(evaluate(&sphere(), &x, &ParamMap::new(), &b).unwrap(), 0.0);
        assert_eq!(b.used(), 1);
    }

    #[test]
    fn exhausted_budget_refuses() {
        let b = EvalBudget::new(1);
        let x = DenseVector::new(vec![1.0, 2.0]).unwrap();
        evaluate(&sphere(), &x, &ParamMap::new(), &b).unwrap();
        assert_eq!(
            evaluate(&sphere(), &x, &ParamMap::new(), &b),
            Err(Error::BudgetExhausted { limit: 1 })
        );
        assert_eq!(b.used(), 1);
    }

    #[test]
    fn non_finite_result_is_an_error() {
        let f: Arc<dyn ObjectiveFunction> = Arc::new(FnObjective::new("nan", |_: &[f64]| f64::NAN));
        let e = Evaluator::new(f, ParamMap::new(), EvalBudget::unlimited());
        assert!(matches!(e.eval(&[1.0]), Err(Error::NonFiniteResult { .. })));
        assert_eq!(e.fitness(&[1.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn reserve_up_to_is_partial() {
        let b = EvalBudget::new(10);
        assert_eq!(b.reserve_up_to(7), 7);
        assert_eq!(b.reserve_up_to(7), 3);
        assert_eq!(b.reserve_up_to(7), 0);
        assert!(b.try_reserve(1).is_err());
    }

    #[test]
    fn concurrent_reservations_never_overshoot() {
        let b = EvalBudget::new(10_000);
        let counted = Arc::new(Counted::new(sphere()));
        let ev = Evaluator::new(counted.clone(), ParamMap::new(), b.clone());
        std::thread::scope(|s| {
            for _ in 0..8 {
                let ev = ev.clone();
                s.spawn(move || while ev.eval(&[1.0]).is_ok() {});
            }
        });
        assert_eq!(b.used(), 10_000);
        assert_eq!(counted.calls(), 10_000);
    }
}
