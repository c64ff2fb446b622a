use rand::Rng;

use crate::error::Result;
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng::{self, StreamRng};

use super::evaluator::PopulationEvaluator;
use super::ga::invalid;
use super::island::{argmin, run_islands, IslandModel, IslandSettings};
use super::migration::Route;

const PSO_STREAM: u64 = 0x50;

/// `w*v + fp*r1*(pbest - x) + fg*r2*(gbest - x)`, componentwise.
#[allow(clippy::too_many_arguments)]
pub fn pso_velocity(
    v: &[f64],
    x: &[f64],
    pbest: &[f64],
    gbest: &[f64],
    w: f64,
    fp: f64,
    fg: f64,
    r1: &[f64],
    r2: &[f64],
) -> Vec<f64> {
    (0..v.len())
        .map(|j| w * v[j] + fp * r1[j] * (pbest[j] - x[j]) + fg * r2[j] * (gbest[j] - x[j]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub f: f64,
    pub best_x: Vec<f64>,
    pub best_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoParams {
    pub popsize: usize,
    pub w: f64,
    pub fp: f64,
    pub fg: f64,
    /// Initial speed bound as a fraction of the box width.
    pub vinit: f64,
}

impl PsoParams {
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let r = Self {
            popsize: p.count_or("ps.popsize", 10)?,
            w: p.real_or("ps.w", 0.6)?,
            fp: p.real_or("ps.fp", 1.0)?,
            fg: p.real_or("ps.fg", 1.0)?,
            vinit: p.real_or("ps.vinit", 0.1)?,
        };
        if r.popsize == 0 {
            return Err(invalid("ps.popsize", "must be positive"));
        }
        if ![r.w, r.fp, r.fg, r.vinit].iter().all(|v| v.is_finite()) || r.vinit < 0.0 {
            return Err(invalid("ps.w", "w, fp, fg and vinit must be finite, vinit nonnegative"));
        }
        Ok(r)
    }
}

pub struct PsoIsland {
    pub particles: Vec<Particle>,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    rng: StreamRng,
}

impl PsoIsland {
    fn refresh_best(&mut self) {
        if let Some(i) = argmin(self.particles.iter().map(|p| p.best_f)) {
            if self.particles[i].best_f < self.best_f || self.best_x.is_empty() {
                self.best_f = self.particles[i].best_f;
                self.best_x = self.particles[i].best_x.clone();
            }
        }
    }
}

/// Island-model particle swarm (`ps`); islands pass their best particles
/// along a one-way ring every `ps.migrationperiod` generations.
#[derive(Debug, Default, Clone, Copy)]
pub struct ParticleSwarm;

struct Model {
    pp: PsoParams,
    bx: SearchBox,
    seed: u64,
}

impl IslandModel for Model {
    type Member = Particle;
    type Island = PsoIsland;

    fn init(&self, id: usize, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<PsoIsland> {
        let mut rng = rng::stream(self.seed, &[PSO_STREAM, id as u64]);
        let xs: Vec<Vec<f64>> = (0..self.pp.popsize).map(|_| self.bx.sample(&mut rng)).collect();
        let fs = pe.evaluate(&xs)?;
        let particles = xs
            .into_iter()
            .zip(fs)
            .map(|(x, f)| {
                ctx.report(&x, f);
                let v = (0..x.len())
                    .map(|j| self.pp.vinit * self.bx.width(j) * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                Particle {
                    best_x: x.clone(),
                    best_f: f,
                    x,
                    v,
                    f,
                }
            })
            .collect();
        let mut isl = PsoIsland {
            particles,
            best_x: Vec::new(),
            best_f: f64::INFINITY,
            rng,
        };
        isl.refresh_best();
        Ok(isl)
    }

    fn step(&self, isl: &mut PsoIsland, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<()> {
        if isl.particles.is_empty() {
            return Ok(());
        }
        let d = self.bx.dim();
        let pp = &self.pp;
        let moved: Vec<(Vec<f64>, Vec<f64>)> = isl
            .particles
            .iter()
            .map(|p| {
                let r1: Vec<f64> = (0..d).map(|_| isl.rng.random()).collect();
                let r2: Vec<f64> = (0..d).map(|_| isl.rng.random()).collect();
                let v = pso_velocity(&p.v, &p.x, &p.best_x, &isl.best_x, pp.w, pp.fp, pp.fg, &r1, &r2);
                let mut x: Vec<f64> = p.x.iter().zip(&v).map(|(a, b)| a + b).collect();
                self.bx.clamp(&mut x);
                (x, v)
            })
            .collect();
        let xs: Vec<Vec<f64>> = moved.iter().map(|(x, _)| x.clone()).collect();
        let fs = pe.evaluate(&xs)?;
        // Only the funded prefix moves.
        for ((p, (x, v)), f) in isl.particles.iter_mut().zip(moved).zip(fs) {
            ctx.report(&x, f);
            if f < p.best_f {
                p.best_f = f;
                p.best_x = x.clone();
            }
            p.x = x;
            p.v = v;
            p.f = f;
        }
        isl.refresh_best();
        Ok(())
    }

    fn members(isl: &mut PsoIsland) -> &mut Vec<Particle> {
        &mut isl.particles
    }

    fn fitness(p: &Particle) -> f64 {
        p.best_f
    }

    fn after_migration(&self, isl: &mut PsoIsland) {
        isl.refresh_best();
    }
}

impl Algorithm for ParticleSwarm {
    fn name(&self) -> &'static str {
        "ps"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        PsoParams::from_params(p)?;
        IslandSettings::from_params(p, "ps.", Route::Ring, 10)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let settings = IslandSettings::from_params(ctx.params, "ps.", Route::Ring, 10)?;
        let model = Model {
            pp: PsoParams::from_params(ctx.params)?,
            bx: SearchBox::from_params(ctx.params, "")?,
            seed: ctx.seed,
        };
        run_islands(&model, &settings, ctx)
    }
}
