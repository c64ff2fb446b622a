use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng::{self, StreamRng};

use super::evaluator::PopulationEvaluator;
use super::island::{argmin, run_islands, IslandModel, IslandSettings};
use super::migration::Route;

const GA_STREAM: u64 = 0x6a;

/// Roulette weight offset, so the worst feasible member keeps a nonzero
/// chance.
pub const ROULETTE_EPS: f64 = 1e-12;

/// Minimization weights `max_f - f_i + eps`. Infeasible (non-finite)
/// members get 0; if nothing is feasible every weight is 1.
pub fn roulette_weights(fs: &[f64]) -> Vec<f64> {
    let max = fs.iter().copied().filter(|f| f.is_finite()).max_by(f64::total_cmp);
    match max {
        None => vec![1.0; fs.len()],
        Some(m) => fs
            .iter()
            .map(|&f| if f.is_finite() { m - f + ROULETTE_EPS } else { 0.0 })
            .collect(),
    }
}

/// Fitness-proportional sampling over fixed weights.
#[derive(Debug, Clone)]
pub struct Roulette {
    cumulative: Vec<f64>,
}

impl Roulette {
    pub fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0 && acc.is_finite()) {
            cumulative = (1..=weights.len()).map(|i| i as f64).collect();
        }
        Self { cumulative }
    }

    pub fn pick(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("nonempty roulette");
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Age limit drawn at birth: `max(1, round(N(mean, var)))`.
pub fn draw_age_limit(mean: f64, var: f64, rng: &mut impl Rng) -> u64 {
    let v = if var > 0.0 {
        Normal::new(mean, var.sqrt()).map_or(mean, |n| n.sample(rng))
    } else {
        mean
    };
    if v.is_nan() {
        return 1;
    }
    v.round().clamp(1.0, u64::MAX as f64) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub fitness: f64,
    pub birth: u64,
    pub age_limit: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaParams {
    pub popsize: usize,
    pub xover_prob: f64,
    pub mut_prob: f64,
    /// Mutation standard deviation as a fraction of each coordinate's
    /// box width.
    pub mut_sigma: f64,
    pub age_mean: f64,
    pub age_var: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            popsize: 100,
            xover_prob: 0.7,
            mut_prob: 0.1,
            mut_sigma: 0.1,
            age_mean: 1e9,
            age_var: 0.0,
        }
    }
}

impl GaParams {
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let d = Self::default();
        let r = Self {
            popsize: p.count_or("ga.popsize", d.popsize)?,
            xover_prob: p.real_or("ga.xoverprob", d.xover_prob)?,
            mut_prob: p.real_or("ga.mutprob", d.mut_prob)?,
            mut_sigma: p.real_or("ga.mutsigma", d.mut_sigma)?,
            age_mean: p.real_or("ga.agelimit.mean", d.age_mean)?,
            age_var: p.real_or("ga.agelimit.var", d.age_var)?,
        };
        if r.popsize == 0 {
            return Err(invalid("ga.popsize", "must be positive"));
        }
        for (k, v) in [("ga.xoverprob", r.xover_prob), ("ga.mutprob", r.mut_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(k, "must be a probability"));
            }
        }
        if !(r.mut_sigma >= 0.0 && r.age_var >= 0.0 && r.age_mean.is_finite()) {
            return Err(invalid("ga.mutsigma", "sigma, age mean and variance must be finite and nonnegative"));
        }
        Ok(r)
    }
}

pub(crate) fn invalid(key: &str, reason: &str) -> Error {
    Error::InvalidConfig {
        key: key.into(),
        reason: reason.into(),
    }
}

/// One-point crossover; with `d < 2` the first parent is copied.
pub fn one_point_crossover(a: &[f64], b: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    if a.len() < 2 {
        return a.to_vec();
    }
    let cut = rng.random_range(1..a.len());
    a[..cut].iter().chain(&b[cut..]).copied().collect()
}

pub struct GaIsland {
    pub id: usize,
    pub members: Vec<Individual>,
    /// Generations completed.
    pub generation: u64,
    rng: StreamRng,
    n_islands: usize,
}

impl GaIsland {
    fn fresh(&mut self, gp: &GaParams, bx: &SearchBox, n: usize, pe: &PopulationEvaluator, ctx: &RunContext<'_>) -> Result<()> {
        let xs: Vec<Vec<f64>> = (0..n).map(|_| bx.sample(&mut self.rng)).collect();
        let fs = pe.evaluate(&xs)?;
        for (x, f) in xs.into_iter().zip(fs) {
            ctx.report(&x, f);
            let age_limit = draw_age_limit(gp.age_mean, gp.age_var, &mut self.rng);
            self.members.push(Individual {
                x,
                fitness: f,
                birth: self.generation,
                age_limit,
            });
        }
        Ok(())
    }
}

/// Removes members older than their age limit; returns how many left.
pub fn apply_aging(members: &mut Vec<Individual>, generation: u64) -> usize {
    let before = members.len();
    members.retain(|m| generation - m.birth <= m.age_limit);
    before - members.len()
}

/// Island-model genetic algorithm (`ga`): elitist, roulette-wheel parent
/// selection, one-point crossover, per-allele Gaussian mutation, aging and
/// starvation migration.
#[derive(Debug, Default, Clone, Copy)]
pub struct GeneticAlgorithm;

struct Model {
    gp: GaParams,
    bx: SearchBox,
    n_islands: usize,
    seed: u64,
}

impl IslandModel for Model {
    type Member = Individual;
    type Island = GaIsland;

    fn init(&self, id: usize, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<GaIsland> {
        let mut isl = GaIsland {
            id,
            members: Vec::with_capacity(self.gp.popsize),
            generation: 0,
            rng: rng::stream(self.seed, &[GA_STREAM, id as u64]),
            n_islands: self.n_islands,
        };
        isl.fresh(&self.gp, &self.bx, self.gp.popsize, pe, ctx)?;
        Ok(isl)
    }

    fn step(&self, isl: &mut GaIsland, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<()> {
        let gp = &self.gp;
        if isl.members.is_empty() {
            isl.generation += 1;
            // A lone island has nobody to refill it.
            if isl.n_islands == 1 {
                isl.fresh(gp, &self.bx, gp.popsize, pe, ctx)?;
            }
            return Ok(());
        }
        let fs: Vec<f64> = isl.members.iter().map(|m| m.fitness).collect();
        let elite = argmin(fs.iter().copied()).expect("nonempty");
        let wheel = Roulette::new(&roulette_weights(&fs));
        let n_off = isl.members.len() - 1;
        let mut kids = Vec::with_capacity(n_off);
        for _ in 0..n_off {
            let a = &isl.members[wheel.pick(&mut isl.rng)].x;
            let b = &isl.members[wheel.pick(&mut isl.rng)].x;
            let mut child = if isl.rng.random::<f64>() < gp.xover_prob {
                one_point_crossover(a, b, &mut isl.rng)
            } else {
                a.clone()
            };
            for (j, v) in child.iter_mut().enumerate() {
                if isl.rng.random::<f64>() < gp.mut_prob {
                    let sd = gp.mut_sigma * self.bx.width(j);
                    if sd > 0.0 {
                        *v += Normal::new(0.0, sd).expect("positive sd").sample(&mut isl.rng);
                    }
                }
            }
            self.bx.clamp(&mut child);
            kids.push(child);
        }
        let kid_fs = if kids.is_empty() { Vec::new() } else { pe.evaluate(&kids)? };
        isl.generation += 1;
        let mut next = Vec::with_capacity(isl.members.len());
        next.push(isl.members.swap_remove(elite));
        for (x, f) in kids.into_iter().zip(kid_fs) {
            ctx.report(&x, f);
            let age_limit = draw_age_limit(gp.age_mean, gp.age_var, &mut isl.rng);
            next.push(Individual {
                x,
                fitness: f,
                birth: isl.generation,
                age_limit,
            });
        }
        apply_aging(&mut next, isl.generation);
        if next.is_empty() {
            log::debug!("{}", Error::DegeneratePopulation(isl.id));
        }
        isl.members = next;
        Ok(())
    }

    fn members(isl: &mut GaIsland) -> &mut Vec<Individual> {
        &mut isl.members
    }

    fn fitness(m: &Individual) -> f64 {
        m.fitness
    }
}

impl Algorithm for GeneticAlgorithm {
    fn name(&self) -> &'static str {
        "ga"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        GaParams::from_params(p)?;
        IslandSettings::from_params(p, "ga.", Route::Starvation, 1)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let settings = IslandSettings::from_params(ctx.params, "ga.", Route::Starvation, 1)?;
        let model = Model {
            gp: GaParams::from_params(ctx.params)?,
            bx: SearchBox::from_params(ctx.params, "")?,
            n_islands: settings.islands,
            seed: ctx.seed,
        };
        run_islands(&model, &settings, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{FnObjective, ObjectiveFunction};
    use crate::optimizer::Optimizer;
    use std::sync::Arc;

    #[test]
    fn roulette_frequencies_follow_weights() {
        let wheel = Roulette::new(&[3.0, 1.0]);
        let mut r = rng::stream(7, &[1]);
        let n = 10_000;
        let hits = (0..n).filter(|_| wheel.pick(&mut r) == 0).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.75).abs() <= 0.03, "{p}");
    }

    #[test]
    fn equal_fitness_is_uniform() {
        let w = roulette_weights(&[2.0; 4]);
        assert!(w.iter().all(|&x| x == ROULETTE_EPS));
        let wheel = Roulette::new(&w);
        let mut r = rng::stream(8, &[]);
        let mut counts = [0usize; 4];
        for _ in 0..8000 {
            counts[wheel.pick(&mut r)] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 - 2000.0).abs() < 200.0), "{counts:?}");
    }

    #[test]
    fn minimization_transform() {
        let w = roulette_weights(&[1.0, 3.0, f64::INFINITY]);
        assert_eq!(w, vec![2.0 + ROULETTE_EPS, ROULETTE_EPS, 0.0]);
        assert_eq!(roulette_weights(&[f64::INFINITY; 2]), vec![1.0, 1.0]);
    }

    #[test]
    fn age_limits() {
        let mut r = rng::stream(1, &[]);
        assert_eq!(draw_age_limit(1e9, 0.0, &mut r), 1_000_000_000);
        assert_eq!(draw_age_limit(-5.0, 0.0, &mut r), 1);
        let xs: Vec<u64> = (0..2000).map(|_| draw_age_limit(10.0, 4.0, &mut r)).collect();
        let mean = xs.iter().sum::<u64>() as f64 / xs.len() as f64;
        assert!((mean - 10.0).abs() < 0.2, "{mean}");
        assert!(xs.iter().all(|&a| a >= 1));
    }

    #[test]
    fn aging_removes_only_expired() {
        let ind = |birth, age_limit| Individual {
            x: vec![],
            fitness: 0.0,
            birth,
            age_limit,
        };
        let mut m = vec![ind(0, 3), ind(1, 3), ind(0, 4)];
        assert_eq!(apply_aging(&mut m, 4), 1);
        assert_eq!(m, vec![ind(1, 3), ind(0, 4)]);
    }

    #[test]
    fn crossover_takes_prefix_and_suffix() {
        let mut r = rng::stream(3, &[]);
        for _ in 0..50 {
            let c = one_point_crossover(&[0.0; 5], &[1.0; 5], &mut r);
            let cut = c.iter().position(|&v| v == 1.0).unwrap();
            assert!((1..5).contains(&cut));
            assert!(c[cut..].iter().all(|&v| v == 1.0));
        }
        assert_eq!(one_point_crossover(&[4.0], &[5.0], &mut r), vec![4.0]);
    }

    fn sphere() -> Arc<dyn ObjectiveFunction> {
        Arc::new(FnObjective::new("sphere", |x: &[f64]| x.iter().map(|v| v * v).sum()))
    }

    fn base() -> ParamMap {
        ParamMap::new()
            .with("dim", 5)
            .with("box.lo", -5.0)
            .with("box.hi", 5.0)
            .with("seed", 11)
    }

    #[test]
    fn constant_population_without_aging_or_migration() {
        let model = Model {
            gp: GaParams {
                popsize: 30,
                ..GaParams::default()
            },
            bx: SearchBox::uniform(3, -1.0, 1.0).unwrap(),
            n_islands: 1,
            seed: 5,
        };
        let p = ParamMap::new();
        let chan = crate::incumbent::IncumbentChannel::new("t");
        let ev = crate::function::Evaluator::new(sphere(), p.clone(), crate::function::EvalBudget::unlimited());
        let ctx = RunContext::new(ev.clone(), &p, &chan).unwrap();
        let pe = PopulationEvaluator::local(ev);
        let mut isl = model.init(0, &ctx, &pe).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..40 {
            model.step(&mut isl, &ctx, &pe).unwrap();
            assert_eq!(isl.members.len(), 30);
            let b = isl.members.iter().map(|m| m.fitness).fold(f64::INFINITY, f64::min);
            assert!(b <= best);
            best = b;
            assert!(isl.members.iter().all(|m| model.bx.contains(&m.x)));
        }
    }

    #[test]
    fn lifetimes_never_exceed_limits() {
        let model = Model {
            gp: GaParams {
                popsize: 20,
                age_mean: 3.0,
                age_var: 1.0,
                ..GaParams::default()
            },
            bx: SearchBox::uniform(2, -1.0, 1.0).unwrap(),
            n_islands: 1,
            seed: 9,
        };
        let p = ParamMap::new();
        let chan = crate::incumbent::IncumbentChannel::new("t");
        let ev = crate::function::Evaluator::new(sphere(), p.clone(), crate::function::EvalBudget::unlimited());
        let ctx = RunContext::new(ev.clone(), &p, &chan).unwrap();
        let pe = PopulationEvaluator::local(ev);
        let mut isl = model.init(0, &ctx, &pe).unwrap();
        for _ in 0..30 {
            model.step(&mut isl, &ctx, &pe).unwrap();
            assert!(isl.members.iter().all(|m| isl.generation - m.birth <= m.age_limit));
        }
    }

    #[test]
    fn multi_island_run_within_budget() {
        let o = Optimizer::new(GeneticAlgorithm);
        o.set_params(base().with("budget", 3000).with("ga.islands", 3).with("ga.popsize", 20))
            .unwrap();
        let r = o.minimize(sphere()).unwrap();
        assert!(r.evals_used <= 3000);
        assert!(r.value < 1.0, "{}", r.value);
    }

    #[test]
    fn needs_gens_or_budget() {
        let o = Optimizer::new(GeneticAlgorithm);
        o.set_params(base()).unwrap();
        assert!(matches!(o.minimize(sphere()), Err(Error::MissingConfig(_))));
    }
}
