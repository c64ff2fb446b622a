use rand::Rng;

use crate::error::{Error, Result};
use crate::gradient::{asd_descend, start_points, AsdParams, GradientEstimator};
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng::{self, StreamRng};

use super::ea::Candidate;
use super::evaluator::PopulationEvaluator;
use super::ga::invalid;
use super::island::{run_islands, IslandModel, IslandSettings};
use super::migration::Route;
use super::sa::sa_accept;

const BH_STREAM: u64 = 0xb4;

/// Iteration cap of the local search after each hop.
pub const LOCAL_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct BhParams {
    pub popsize: usize,
    /// Perturbation half-width per coordinate; `None` means 10% of the box
    /// width.
    pub radius: Option<Vec<f64>>,
    pub temperature: f64,
    pub local: AsdParams,
    pub estimator: GradientEstimator,
}

impl BhParams {
    pub fn from_params(p: &ParamMap, dim: usize) -> Result<Self> {
        let radius = if p.contains("bh.radius") {
            let r = p.bound("bh.radius", dim)?;
            if r.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid("bh.radius", "must be finite and nonnegative"));
            }
            Some(r)
        } else {
            None
        };
        let mut local = AsdParams::from_params(p)?;
        local.max_iter = local.max_iter.min(LOCAL_MAX_ITER);
        let r = Self {
            popsize: p.count_or("bh.popsize", 1)?,
            radius,
            temperature: p.real_or("bh.t", 1.0)?,
            local,
            estimator: GradientEstimator::from_params(p)?,
        };
        if r.popsize == 0 {
            return Err(invalid("bh.popsize", "must be positive"));
        }
        if !(r.temperature >= 0.0) {
            return Err(invalid("bh.t", "must be nonnegative"));
        }
        Ok(r)
    }

    fn radius(&self, bx: &SearchBox, j: usize) -> f64 {
        self.radius.as_ref().map_or(0.1 * bx.width(j), |r| r[j])
    }
}

/// Uniform perturbation within `radius` per coordinate, clamped.
pub fn perturb(x: &[f64], radius: impl Fn(usize) -> f64, bx: &SearchBox, rng: &mut impl Rng) -> Vec<f64> {
    let mut y: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let r = radius(j);
            if r > 0.0 {
                v + rng.random_range(-r..=r)
            } else {
                *v
            }
        })
        .collect();
    bx.clamp(&mut y);
    y
}

pub struct BhIsland {
    /// Current local minima, one per walker.
    pub walkers: Vec<Candidate>,
    rng: StreamRng,
}

/// Basin hopping (`bh`): perturb, descend with Armijo steepest descent,
/// accept by the Metropolis rule at temperature `bh.t`. Islands of walkers
/// exchange members by starvation migration.
#[derive(Debug, Default, Clone, Copy)]
pub struct BasinHopping;

struct Model {
    bp: BhParams,
    bx: SearchBox,
    starts: Vec<Vec<f64>>,
    seed: u64,
}

impl Model {
    fn descend(&self, ctx: &RunContext<'_>, x: &[f64]) -> Result<Candidate> {
        let report = |x: &[f64], f: f64| ctx.report(x, f);
        let d = asd_descend(&ctx.evaluator, &self.bp.estimator, x, None, Some(&self.bx), &self.bp.local, &report)?;
        Ok(Candidate { x: d.x, f: d.f })
    }
}

impl IslandModel for Model {
    type Member = Candidate;
    type Island = BhIsland;

    fn init(&self, id: usize, ctx: &RunContext<'_>, _pe: &PopulationEvaluator) -> Result<BhIsland> {
        let mut rng = rng::stream(self.seed, &[BH_STREAM, id as u64]);
        let mut walkers = Vec::with_capacity(self.bp.popsize);
        for w in 0..self.bp.popsize {
            let start = match self.starts.get(id * self.bp.popsize + w) {
                Some(s) => s.clone(),
                None => self.bx.sample(&mut rng),
            };
            match self.descend(ctx, &start) {
                Ok(c) => walkers.push(c),
                Err(Error::BudgetExhausted { .. }) if !walkers.is_empty() => break,
                Err(e) => return Err(e),
            }
        }
        Ok(BhIsland { walkers, rng })
    }

    fn step(&self, isl: &mut BhIsland, ctx: &RunContext<'_>, _pe: &PopulationEvaluator) -> Result<()> {
        for i in 0..isl.walkers.len() {
            let y = perturb(&isl.walkers[i].x, |j| self.bp.radius(&self.bx, j), &self.bx, &mut isl.rng);
            let cand = self.descend(ctx, &y)?;
            let u: f64 = isl.rng.random();
            if sa_accept(cand.f - isl.walkers[i].f, self.bp.temperature, u) {
                isl.walkers[i] = cand;
            }
        }
        Ok(())
    }

    fn members(isl: &mut BhIsland) -> &mut Vec<Candidate> {
        &mut isl.walkers
    }

    fn fitness(m: &Candidate) -> f64 {
        m.f
    }
}

fn settings(p: &ParamMap) -> Result<IslandSettings> {
    IslandSettings::from_params(p, "bh.", Route::Starvation, 1)
}

impl Algorithm for BasinHopping {
    fn name(&self) -> &'static str {
        "bh"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        let bx = SearchBox::from_params(p, "")?;
        BhParams::from_params(p, bx.dim())?;
        settings(p)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let bx = SearchBox::from_params(ctx.params, "")?;
        let bp = BhParams::from_params(ctx.params, bx.dim())?;
        // Only `x0` is taken from the common start list; the rest are drawn
        // per island.
        let starts = if ctx.params.contains("x0") {
            start_points(ctx.params, &bx, ctx.seed, "bh.")?.into_iter().take(1).collect()
        } else {
            Vec::new()
        };
        let model = Model {
            bp,
            bx,
            starts,
            seed: ctx.seed,
        };
        run_islands(&model, &settings(ctx.params)?, ctx)
    }
}
