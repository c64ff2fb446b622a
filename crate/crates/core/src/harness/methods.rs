use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::{EvalBudget, Evaluator};
use crate::gradient::{AlternatingVariables, ConjugateGradient, SteepestDescent};
use crate::metaheuristics::{
    BasinHopping, DifferentialEvolution, EvolutionaryAlgorithm, Firefly, GeneticAlgorithm, MonteCarlo,
    ParticleSwarm, SimulatedAnnealing,
};
use crate::optimizer::{Algorithm, Minimizer, Optimizer, RunContext};
use crate::params::ParamMap;

use super::config::parse_config;

pub const PRESETS_TEXT: &str = include_str!("presets.cfg");

/// Every method name the harness accepts, metaheuristics first.
pub const METHODS: [&str; 17] = [
    "ga", "sa", "ea", "de", "ps", "fa", "mc", "bh", "asd", "avd", "fcg", "pcg", "gafcg", "eafcg", "safcg",
    "defcg", "psfcg",
];

/// Methods whose runs restart from random points until the budget is spent.
const RESTARTING: [&str; 4] = ["asd", "avd", "fcg", "pcg"];

pub fn is_method(name: &str) -> bool {
    METHODS.contains(&name)
}

/// The shipped preset file.
pub fn presets() -> ParamMap {
    parse_config(PRESETS_TEXT).expect("shipped presets parse")
}

/// Preset keys plus the restart count of the local methods for `budget`
/// evaluations in `dim` dimensions.
pub fn profile(method: &str, dim: usize, budget: u64) -> Result<ParamMap> {
    if !is_method(method) {
        return Err(Error::UnknownMethod(method.into()));
    }
    let mut p = presets();
    p.remove("presets.version");
    let starts = (budget / (4 * dim.max(1) as u64)).max(1) as i64;
    for m in RESTARTING {
        p.set(&format!("{m}.starts"), starts);
    }
    Ok(p)
}

fn algorithm(name: &str) -> Result<Box<dyn Algorithm>> {
    Ok(match name {
        "ga" => Box::new(GeneticAlgorithm),
        "sa" => Box::new(SimulatedAnnealing),
        "ea" => Box::new(EvolutionaryAlgorithm),
        "de" => Box::new(DifferentialEvolution),
        "ps" => Box::new(ParticleSwarm),
        "fa" => Box::new(Firefly),
        "mc" => Box::new(MonteCarlo),
        "bh" => Box::new(BasinHopping),
        "asd" => Box::new(SteepestDescent),
        "avd" => Box::new(AlternatingVariables),
        "fcg" => Box::new(ConjugateGradient::new()),
        "pcg" => Box::new(ConjugateGradient::polak_ribiere()),
        _ => match name.strip_suffix("fcg").filter(|m| ["ga", "ea", "sa", "de", "ps"].contains(m)) {
            Some(m) => Box::new(Hybrid::new(algorithm(m)?, name)),
            None => return Err(Error::UnknownMethod(name.into())),
        },
    })
}

struct Boxed(Box<dyn Algorithm>);

impl Algorithm for Boxed {
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        self.0.validate(p)
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        self.0.run(ctx)
    }
}

/// A fresh optimizer for `name`.
pub fn minimizer(name: &str) -> Result<Box<dyn Minimizer>> {
    Ok(Box::new(Optimizer::new(Boxed(algorithm(name)?))))
}

/// A metaheuristic followed by Fletcher-Reeves conjugate gradient started
/// from its best point. The metaheuristic gets `ceil(budget / 2)`
/// evaluations; the descent gets what is left, restarting from random
/// points once the first descent converges.
pub struct Hybrid {
    meta: Box<dyn Algorithm>,
    name: &'static str,
}

impl Hybrid {
    pub fn new(meta: Box<dyn Algorithm>, name: &str) -> Self {
        let name = METHODS.iter().copied().find(|m| *m == name).unwrap_or("hybrid");
        Self { meta, name }
    }

    fn budget(p: &ParamMap) -> Result<u64> {
        match p.int("budget") {
            Ok(b) if b > 0 => Ok(b as u64),
            Ok(b) => Err(Error::InvalidConfig {
                key: "budget".into(),
                reason: format!("{b} is not positive"),
            }),
            Err(e) => Err(e),
        }
    }
}

/// `(metaheuristic share, descent share)` of `budget`.
pub fn hybrid_split(budget: u64) -> (u64, u64) {
    let meta = budget.div_ceil(2);
    (meta, budget - meta)
}

impl Algorithm for Hybrid {
    fn name(&self) -> &'static str {
        self.name
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        Self::budget(p)?;
        self.meta.validate(p)?;
        ConjugateGradient::new().validate(p)
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let total = Self::budget(ctx.params)?;
        let f = Arc::clone(ctx.evaluator.function());
        let dim = ctx.params.count("dim").unwrap_or(1).max(1) as u64;

        let (meta_share, _) = hybrid_split(total);
        let meta_params = ctx.params.clone().with("budget", meta_share as i64);
        let meta_ev = Evaluator::new(Arc::clone(&f), meta_params.clone(), EvalBudget::new(meta_share));
        let meta_ctx = RunContext::new(meta_ev.clone(), &meta_params, ctx.channel())?;
        let meta_out = self.meta.run(&meta_ctx);
        ctx.evaluator.budget().reserve_up_to(meta_ev.budget().used());
        match meta_out {
            Ok(()) | Err(Error::BudgetExhausted { .. }) => {}
            Err(e) => return Err(e),
        }
        let Some(best) = meta_ctx.best() else {
            return Ok(());
        };
        ctx.report(&best.arg, best.value);

        let rest = ctx.evaluator.budget().remaining();
        if rest == 0 {
            return Ok(());
        }
        let cg_params = ctx
            .params
            .clone()
            .with("budget", rest as i64)
            .with("x0", best.arg.clone())
            .with("fcg.starts", (rest / (4 * dim)).max(1) as i64);
        let cg_ev = Evaluator::new(f, cg_params.clone(), EvalBudget::new(rest));
        let cg_ctx = RunContext::new(cg_ev.clone(), &cg_params, ctx.channel())?;
        let cg_out = ConjugateGradient::new().run(&cg_ctx);
        ctx.evaluator.budget().reserve_up_to(cg_ev.budget().used());
        if let Some(b) = cg_ctx.best() {
            ctx.report(&b.arg, b.value);
        }
        match cg_out {
            Ok(()) | Err(Error::BudgetExhausted { .. }) => Ok(()),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{Counted, FnObjective, ObjectiveFunction};

    #[test]
    fn presets_parse_and_are_versioned() {
        let p = presets();
        assert_eq!(p.int("presets.version").unwrap(), 1);
        assert_eq!(p.real("de.w").unwrap(), 4.0);
        assert!((p.real("fa.l").unwrap() - 1.0 / 200f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn every_method_builds() {
        for m in METHODS {
            assert_eq!(minimizer(m).unwrap().name(), m);
        }
        assert!(matches!(minimizer("xx"), Err(Error::UnknownMethod(_))));
        assert!(matches!(minimizer("mcfcg"), Err(Error::UnknownMethod(_))));
    }

    #[test]
    fn split_halves() {
        assert_eq!(hybrid_split(10), (5, 5));
        assert_eq!(hybrid_split(11), (6, 5));
        assert_eq!(hybrid_split(1), (1, 0));
    }

    #[test]
    fn hybrid_spends_budget_in_two_stages() {
        let sphere: Arc<dyn ObjectiveFunction> =
            Arc::new(FnObjective::new("sphere", |x: &[f64]| x.iter().map(|v| v * v).sum()));
        for (m, budget) in [("gafcg", 4000i64), ("defcg", 3001), ("safcg", 2000)] {
            let counted = Arc::new(Counted::new(Arc::clone(&sphere)));
            let mut p = profile(m, 4, budget as u64).unwrap();
            p.merge(
                &ParamMap::new()
                    .with("dim", 4)
                    .with("box.lo", -10.0)
                    .with("box.hi", 10.0)
                    .with("budget", budget)
                    .with("ga.popsize", 20)
                    .with("de.pop", 20),
            );
            let o = minimizer(m).unwrap();
            o.set_params(p).unwrap();
            let r = o.minimize(counted.clone()).unwrap();
            assert_eq!(counted.calls(), r.evals_used, "{m}");
            assert!(r.evals_used <= budget as u64, "{m}");
            assert!(budget as u64 - r.evals_used <= 4 * 4, "{m} used {}", r.evals_used);
            assert!(r.value < 1e-6, "{m} {}", r.value);
        }
    }
}
