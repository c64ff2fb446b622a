//! Population metaheuristics with one thread per island.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `ga.islands`, `ga.popsize`, `ga.gens` | 1, 100, - | islands, members per island, generations |
//! | `ga.xoverprob`, `ga.mutprob`, `ga.mutsigma` | 0.7, 0.1, 0.1 | one-point crossover and per-allele mutation (sigma relative to box width) |
//! | `ga.agelimit.mean`, `ga.agelimit.var` | 1e9, 0 | Gaussian age limit drawn at birth |
//! | `<alg>.immigrationroute` | per method | `starvation`, `ring` or `none` |
//! | `<alg>.migrationperiod` | 1 (ga, bh), 10 | generations between migrations |
//! | `de.pop`, `de.gens`, `de.w`, `de.pc` | 100, -, 0.5, 0.8 | |
//! | `de.variant` | `rand1bin` | or `best1bin` |
//! | `de.nondeterminismok` | false | skip the generation barriers |
//! | `ps.popsize`, `ps.w`, `ps.fp`, `ps.fg`, `ps.vinit` | 10, 0.6, 1, 1, 0.1 | |
//! | `sa.schedule`, `sa.t0`, `sa.alpha`, `sa.iters`, `sa.step`, `sa.starts` | linear, 1000, 0.99, budget, 0.1, 1 | |
//! | `ea.mu`, `ea.lambda`, `ea.sigma` | 10, 20, 5% of width | |
//! | `fa.popsize`, `fa.beta`, `fa.gamma`, `fa.delta`, `fa.l`, `fa.alpha` | 50, 1, 200, 0.97, 1/sqrt(gamma), 1 | |
//! | `bh.popsize`, `bh.radius`, `bh.t` | 1, 10% of width, 1 | |
//! | `mc.samples`, `mc.box.lo`, `mc.box.hi` | budget, `box.*` | |
//! | `dist.server.host`, `dist.server.port` | -, 7890 | evaluate populations on a server |
//! | `threads` | 1 | DE slices, SA chains, MC blocks |
//!
//! Without `<alg>.gens` a run continues until the budget is spent.

mod bh;
mod de;
mod ea;
mod evaluator;
mod fa;
mod ga;
mod island;
mod mc;
mod migration;
mod pso;
mod sa;

pub use bh::{perturb, BasinHopping, BhParams, LOCAL_MAX_ITER};
pub use de::{binomial_crossover, de_donor, pick_three, DeParams, DeVariant, DifferentialEvolution};
pub use ea::{truncate_best, Candidate, EaParams, EvolutionaryAlgorithm};
pub use evaluator::PopulationEvaluator;
pub use fa::{fa_move, FaParams, Firefly};
pub use ga::{
    apply_aging, draw_age_limit, one_point_crossover, roulette_weights, GaParams, GeneticAlgorithm, Individual,
    Roulette, ROULETTE_EPS,
};
pub use mc::{block_points, MonteCarlo, BLOCK};
pub use migration::{migrate, ring_route, starvation_target, Route, MAX_EMIGRANTS, STARVATION_RATIO};
pub use pso::{pso_velocity, ParticleSwarm, Particle, PsoParams};
pub use sa::{sa_accept, sa_temperature, CoolingSchedule, SimulatedAnnealing};
