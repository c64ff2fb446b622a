use rand::Rng;

use crate::error::Result;
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng::{self, StreamRng};

use super::ea::Candidate;
use super::evaluator::PopulationEvaluator;
use super::ga::invalid;
use super::island::{run_islands, IslandModel, IslandSettings};
use super::migration::Route;

const FA_STREAM: u64 = 0xfa;

/// Attraction of `x` toward each brighter firefly, with distances measured
/// on the positions at the start of the generation, plus one random-walk
/// term `alpha * l * (u - 0.5)` per coordinate. The result is clamped to
/// `[lo, hi]`.
pub fn fa_move(
    x: &[f64],
    brighter: &[&[f64]],
    beta0: f64,
    gamma: f64,
    alpha: f64,
    l: f64,
    u: &[f64],
    bx: &SearchBox,
) -> Vec<f64> {
    let mut out = x.to_vec();
    for y in brighter {
        let r2: f64 = x.iter().zip(*y).map(|(a, b)| (a - b) * (a - b)).sum();
        let beta = beta0 * (-gamma * r2).exp();
        for ((o, a), b) in out.iter_mut().zip(x).zip(*y) {
            *o += beta * (b - a);
        }
    }
    for (o, uj) in out.iter_mut().zip(u) {
        *o += alpha * l * (uj - 0.5);
    }
    bx.clamp(&mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaParams {
    pub popsize: usize,
    pub beta0: f64,
    pub gamma: f64,
    pub delta: f64,
    pub l: f64,
    pub alpha: f64,
}

impl FaParams {
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let gamma = p.real_or("fa.gamma", 200.0)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("fa.gamma", "must be positive"));
        }
        let r = Self {
            popsize: p.count_or("fa.popsize", 50)?,
            beta0: p.real_or("fa.beta", 1.0)?,
            gamma,
            delta: p.real_or("fa.delta", 0.97)?,
            l: p.real_or("fa.l", 1.0 / gamma.sqrt())?,
            alpha: p.real_or("fa.alpha", 1.0)?,
        };
        if r.popsize == 0 {
            return Err(invalid("fa.popsize", "must be positive"));
        }
        if ![r.beta0, r.delta, r.l, r.alpha].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(invalid("fa.beta", "beta, delta, l and alpha must be finite and nonnegative"));
        }
        Ok(r)
    }
}

pub struct FaIsland {
    pub flies: Vec<Candidate>,
    pub alpha: f64,
    rng: StreamRng,
}

/// Firefly algorithm (`fa`): every firefly moves toward all brighter ones
/// with attractiveness `beta0 * exp(-gamma * r^2)`; the random-walk weight
/// decays by `fa.delta` each generation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Firefly;

struct Model {
    fp: FaParams,
    bx: SearchBox,
    seed: u64,
}

impl IslandModel for Model {
    type Member = Candidate;
    type Island = FaIsland;

    fn init(&self, id: usize, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<FaIsland> {
        let mut rng = rng::stream(self.seed, &[FA_STREAM, id as u64]);
        let xs: Vec<Vec<f64>> = (0..self.fp.popsize).map(|_| self.bx.sample(&mut rng)).collect();
        let fs = pe.evaluate(&xs)?;
        let flies = xs
            .into_iter()
            .zip(fs)
            .map(|(x, f)| {
                ctx.report(&x, f);
                Candidate { x, f }
            })
            .collect();
        Ok(FaIsland {
            flies,
            alpha: self.fp.alpha,
            rng,
        })
    }

    fn step(&self, isl: &mut FaIsland, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<()> {
        let d = self.bx.dim();
        let fp = &self.fp;
        let moved: Vec<Vec<f64>> = (0..isl.flies.len())
            .map(|i| {
                let me = &isl.flies[i];
                let brighter: Vec<&[f64]> = isl
                    .flies
                    .iter()
                    .filter(|o| o.f < me.f)
                    .map(|o| o.x.as_slice())
                    .collect();
                let u: Vec<f64> = (0..d).map(|_| isl.rng.random()).collect();
                fa_move(&me.x, &brighter, fp.beta0, fp.gamma, isl.alpha, fp.l, &u, &self.bx)
            })
            .collect();
        let fs = pe.evaluate(&moved)?;
        for ((fly, x), f) in isl.flies.iter_mut().zip(moved).zip(fs) {
            ctx.report(&x, f);
            *fly = Candidate { x, f };
        }
        isl.alpha *= fp.delta;
        Ok(())
    }

    fn members(isl: &mut FaIsland) -> &mut Vec<Candidate> {
        &mut isl.flies
    }

    fn fitness(m: &Candidate) -> f64 {
        m.f
    }
}

impl Algorithm for Firefly {
    fn name(&self) -> &'static str {
        "fa"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        FaParams::from_params(p)?;
        IslandSettings::from_params(p, "fa.", Route::Ring, 10)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let settings = IslandSettings::from_params(ctx.params, "fa.", Route::Ring, 10)?;
        let model = Model {
            fp: FaParams::from_params(ctx.params)?,
            bx: SearchBox::from_params(ctx.params, "")?,
            seed: ctx.seed,
        };
        run_islands(&model, &settings, ctx)
    }
}
