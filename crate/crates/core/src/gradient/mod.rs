//! Derivative-based local search with numerical gradients.
//!
//! Keys: `asd.rho/.beta/.gamma/.gtol/.maxiter/.starts`,
//! `fcg.rho/.sigma/.t1/.t2/.t3/.redrate/.gtol/.maxiter/.update/.starts`,
//! `avd.tryorder/.step/.maxsweeps`, `grad.h`, plus the common `x0`
//! (first start point) and `threads`.

mod avd;
mod descent;
mod linesearch;
mod richardson;

pub use avd::{avd_descend, AvdObserver, AvdParams, VarDomain};
pub use descent::{
    asd_descend, cg_descend, multi_start, AsdParams, CgParams, CgUpdate, Descent, Report, StopReason,
};
pub use linesearch::{
    armijo_step, wolfe_search, ArmijoParams, LineFunction, Step, WolfeParams, ARMIJO_MAX_BACKTRACKS,
};
pub use richardson::{richardson_gradient, step as richardson_step, GradientEstimator};

use crate::error::{Error, Result};
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng;

const START_STREAM: u64 = 0x57a7;

/// Start points: `x0` (when given) followed by uniform draws from the box,
/// `<prefix>starts` points in total.
pub fn start_points(p: &ParamMap, bx: &SearchBox, seed: u64, prefix: &str) -> Result<Vec<Vec<f64>>> {
    let n = p.count_or(&format!("{prefix}starts"), 1)?.max(1);
    let mut out = Vec::with_capacity(n);
    if p.contains("x0") {
        let mut x0 = p.vector("x0")?.to_vec();
        if x0.len() != bx.dim() {
            return Err(Error::DimensionMismatch {
                expected: bx.dim(),
                actual: x0.len(),
            });
        }
        bx.clamp(&mut x0);
        out.push(x0);
    }
    let mut i = 0u64;
    while out.len() < n {
        out.push(bx.sample(&mut rng::stream(seed, &[START_STREAM, i])));
        i += 1;
    }
    Ok(out)
}

fn run_starts(
    ctx: &RunContext<'_>,
    prefix: &str,
    descend: impl Fn(&[f64], &GradientEstimator, &SearchBox) -> Result<Descent> + Sync,
) -> Result<()> {
    let bx = SearchBox::from_params(ctx.params, "")?;
    let starts = start_points(ctx.params, &bx, ctx.seed, prefix)?;
    let threads = ctx.params.count_or("threads", 1)?.max(1);
    // Spare threads go to gradient components when there are few starts.
    let est = GradientEstimator::from_params(ctx.params)?.with_threads(threads / starts.len().min(threads));
    let outcomes = multi_start(&starts, threads, |x0| descend(x0, &est, &bx));
    for o in outcomes {
        match o {
            Ok(_) | Err(Error::BudgetExhausted { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Multi-start steepest descent with Armijo steps (`asd`).
#[derive(Debug, Default, Clone, Copy)]
pub struct SteepestDescent;

impl Algorithm for SteepestDescent {
    fn name(&self) -> &'static str {
        "asd"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        AsdParams::from_params(p)?;
        GradientEstimator::from_params(p)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let ap = AsdParams::from_params(ctx.params)?;
        let report = |x: &[f64], f: f64| ctx.report(x, f);
        run_starts(ctx, "asd.", |x0, est, bx| {
            asd_descend(&ctx.evaluator, est, x0, None, Some(bx), &ap, &report)
        })
    }
}

/// Multi-start nonlinear conjugate gradient (`fcg`, or `pcg` for the
/// Polak-Ribiere update).
#[derive(Debug, Clone, Copy)]
pub struct ConjugateGradient {
    update: Option<CgUpdate>,
}

impl ConjugateGradient {
    /// Update read from `fcg.update` (default Fletcher-Reeves).
    pub fn new() -> Self {
        Self { update: None }
    }

    /// Polak-Ribiere regardless of `fcg.update`.
    pub fn polak_ribiere() -> Self {
        Self {
            update: Some(CgUpdate::PolakRibiere),
        }
    }

    fn params(&self, p: &ParamMap) -> Result<CgParams> {
        let mut cp = CgParams::from_params(p)?;
        if let Some(u) = self.update {
            cp.update = u;
        }
        Ok(cp)
    }
}

impl Default for ConjugateGradient {
    fn default() -> Self {
        Self::new()
    }
}

impl Algorithm for ConjugateGradient {
    fn name(&self) -> &'static str {
        match self.update {
            Some(CgUpdate::PolakRibiere) => "pcg",
            _ => "fcg",
        }
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        self.params(p)?;
        GradientEstimator::from_params(p)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let cp = self.params(ctx.params)?;
        let report = |x: &[f64], f: f64| ctx.report(x, f);
        run_starts(ctx, "fcg.", |x0, est, bx| {
            cg_descend(&ctx.evaluator, est, x0, None, Some(bx), &cp, &report)
        })
    }
}

/// Alternating-variables descent (`avd`). Coordinates are continuous on
/// the box unless `avd.step` (real or vec, 0 = continuous) makes them
/// multiples of a step.
#[derive(Debug, Default, Clone, Copy)]
pub struct AlternatingVariables;

impl AlternatingVariables {
    pub fn domains(p: &ParamMap, bx: &SearchBox) -> Result<Vec<VarDomain>> {
        let steps = if p.contains("avd.step") {
            p.bound("avd.step", bx.dim())?
        } else {
            vec![0.0; bx.dim()]
        };
        (0..bx.dim())
            .map(|j| {
                let (lo, hi) = (bx.lo()[j], bx.hi()[j]);
                match steps[j] {
                    s if s == 0.0 => Ok(VarDomain::Interval { lo, hi }),
                    s if s > 0.0 => Ok(VarDomain::multiples(s, lo, hi)),
                    s => Err(Error::InvalidConfig {
                        key: "avd.step".into(),
                        reason: format!("{s} is negative"),
                    }),
                }
            })
            .collect()
    }

    pub fn params(p: &ParamMap) -> Result<AvdParams> {
        let order = match p.vector("avd.tryorder") {
            Ok(v) => Some(
                v.iter()
                    .map(|&j| {
                        if j >= 0.0 && j.fract() == 0.0 {
                            Ok(j as usize)
                        } else {
                            Err(Error::InvalidConfig {
                                key: "avd.tryorder".into(),
                                reason: format!("{j} is not a coordinate index"),
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            Err(Error::MissingConfig(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(AvdParams {
            order,
            max_sweeps: p.count_or("avd.maxsweeps", AvdParams::default().max_sweeps)?,
        })
    }
}

impl Algorithm for AlternatingVariables {
    fn name(&self) -> &'static str {
        "avd"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        let bx = SearchBox::from_params(p, "")?;
        Self::domains(p, &bx)?;
        Self::params(p)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let bx = SearchBox::from_params(ctx.params, "")?;
        let domains = Self::domains(ctx.params, &bx)?;
        let ap = Self::params(ctx.params)?;
        let starts = start_points(ctx.params, &bx, ctx.seed, "avd.")?;
        let threads = ctx.params.count_or("threads", 1)?.max(1);
        let report = |x: &[f64], f: f64| ctx.report(x, f);
        for o in multi_start(&starts, threads, |x0| {
            avd_descend(&ctx.evaluator, x0, None, &domains, &ap, &report)
        }) {
            match o {
                Ok(_) | Err(Error::BudgetExhausted { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}
