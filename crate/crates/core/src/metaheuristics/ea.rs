use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng::{self, StreamRng};

use super::evaluator::PopulationEvaluator;
use super::ga::invalid;
use super::island::{run_islands, IslandModel, IslandSettings};
use super::migration::Route;

const EA_STREAM: u64 = 0xea;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EaParams {
    pub mu: usize,
    pub lambda: usize,
    /// Absolute mutation standard deviation; `None` means 5% of each
    /// coordinate's box width.
    pub sigma: Option<f64>,
}

impl EaParams {
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let sigma = if p.contains("ea.sigma") {
            Some(p.real("ea.sigma")?)
        } else {
            None
        };
        let r = Self {
            mu: p.count_or("ea.mu", 10)?,
            lambda: p.count_or("ea.lambda", 20)?,
            sigma,
        };
        if r.mu == 0 || r.lambda == 0 {
            return Err(invalid("ea.mu", "mu and lambda must be positive"));
        }
        if r.sigma.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
            return Err(invalid("ea.sigma", "must be finite and nonnegative"));
        }
        Ok(r)
    }

    fn sd(&self, bx: &SearchBox, j: usize) -> f64 {
        self.sigma.unwrap_or(0.05 * bx.width(j))
    }
}

/// Keeps the `mu` lowest of `pool` after dropping exact duplicates of an
/// earlier entry; ties keep the earlier entry, so parents win over equal
/// offspring.
pub fn truncate_best(pool: Vec<Candidate>, mu: usize) -> Vec<Candidate> {
    let mut pool = pool.into_iter().fold(Vec::<Candidate>::new(), |mut acc, c| {
        if !acc.iter().any(|a| a.x == c.x) {
            acc.push(c);
        }
        acc
    });
    pool.sort_by(|a, b| a.f.total_cmp(&b.f));
    pool.truncate(mu);
    pool
}

pub struct EaIsland {
    pub members: Vec<Candidate>,
    rng: StreamRng,
}

/// (mu + lambda) evolution strategy with Gaussian mutation (`ea`), one
/// island per thread on a ring.
#[derive(Debug, Default, Clone, Copy)]
pub struct EvolutionaryAlgorithm;

struct Model {
    ep: EaParams,
    bx: SearchBox,
    seed: u64,
}

impl IslandModel for Model {
    type Member = Candidate;
    type Island = EaIsland;

    fn init(&self, id: usize, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<EaIsland> {
        let mut rng = rng::stream(self.seed, &[EA_STREAM, id as u64]);
        let xs: Vec<Vec<f64>> = (0..self.ep.mu).map(|_| self.bx.sample(&mut rng)).collect();
        let fs = pe.evaluate(&xs)?;
        let members = xs
            .into_iter()
            .zip(fs)
            .map(|(x, f)| {
                ctx.report(&x, f);
                Candidate { x, f }
            })
            .collect();
        Ok(EaIsland { members, rng })
    }

    fn step(&self, isl: &mut EaIsland, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<()> {
        if isl.members.is_empty() {
            return Ok(());
        }
        let kids: Vec<Vec<f64>> = (0..self.ep.lambda)
            .map(|_| {
                let parent = &isl.members[isl.rng.random_range(0..isl.members.len())];
                let mut x: Vec<f64> = parent
                    .x
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let sd = self.ep.sd(&self.bx, j);
                        if sd > 0.0 {
                            v + Normal::new(0.0, sd).expect("positive sd").sample(&mut isl.rng)
                        } else {
                            v
                        }
                    })
                    .collect();
                self.bx.clamp(&mut x);
                x
            })
            .collect();
        let fs = pe.evaluate(&kids)?;
        let mut pool = std::mem::take(&mut isl.members);
        for (x, f) in kids.into_iter().zip(fs) {
            ctx.report(&x, f);
            pool.push(Candidate { x, f });
        }
        isl.members = truncate_best(pool, self.ep.mu);
        Ok(())
    }

    fn members(isl: &mut EaIsland) -> &mut Vec<Candidate> {
        &mut isl.members
    }

    fn fitness(m: &Candidate) -> f64 {
        m.f
    }
}

impl Algorithm for EvolutionaryAlgorithm {
    fn name(&self) -> &'static str {
        "ea"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        EaParams::from_params(p)?;
        IslandSettings::from_params(p, "ea.", Route::Ring, 10)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let settings = IslandSettings::from_params(ctx.params, "ea.", Route::Ring, 10)?;
        let model = Model {
            ep: EaParams::from_params(ctx.params)?,
            bx: SearchBox::from_params(ctx.params, "")?,
            seed: ctx.seed,
        };
        run_islands(&model, &settings, ctx)
    }
}
