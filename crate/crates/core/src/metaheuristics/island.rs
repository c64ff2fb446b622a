use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::exec_local::CyclicBarrier;
use crate::optimizer::RunContext;
use crate::params::ParamMap;

use super::evaluator::PopulationEvaluator;
use super::migration::{migrate, Route};

/// One island-model algorithm: how to seed an island, advance it one
/// generation, and expose its members for migration.
pub(crate) trait IslandModel: Sync {
    type Member: Send;
    type Island: Send;

    fn init(&self, id: usize, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<Self::Island>;

    /// One generation; `BudgetExhausted` ends the run after the current
    /// generation of every island.
    fn step(&self, island: &mut Self::Island, ctx: &RunContext<'_>, pe: &PopulationEvaluator) -> Result<()>;

    fn members(island: &mut Self::Island) -> &mut Vec<Self::Member>;

    fn fitness(m: &Self::Member) -> f64;

    /// Called after migration changed the island's members.
    fn after_migration(&self, _island: &mut Self::Island) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct IslandSettings {
    pub islands: usize,
    pub generations: Option<usize>,
    pub route: Route,
    /// Generations between migrations.
    pub period: usize,
}

impl IslandSettings {
    /// Reads `<prefix>islands`, `<prefix>gens`, `<prefix>immigrationroute`
    /// and `<prefix>migrationperiod`.
    pub fn from_params(p: &ParamMap, prefix: &str, route: Route, period: usize) -> Result<Self> {
        let k = |s: &str| format!("{prefix}{s}");
        let islands = p.count_or(&k("islands"), 1)?;
        if islands == 0 {
            return Err(Error::InvalidConfig {
                key: k("islands"),
                reason: "need at least one island".into(),
            });
        }
        let generations = match p.count(&k("gens")) {
            Ok(g) => Some(g),
            Err(Error::MissingConfig(_)) => None,
            Err(e) => return Err(e),
        };
        if generations.is_none() && !p.contains("budget") {
            return Err(Error::MissingConfig(format!("{} (or budget)", k("gens"))));
        }
        let period = p.count_or(&k("migrationperiod"), period)?.max(1);
        Ok(Self {
            islands,
            generations,
            route: Route::from_params(p, prefix, route)?,
            period,
        })
    }
}

/// Runs one thread per island. Generations end at a barrier; the last
/// thread to arrive migrates while the others wait at a second barrier.
pub(crate) fn run_islands<M: IslandModel>(model: &M, s: &IslandSettings, ctx: &RunContext<'_>) -> Result<()> {
    let pe = PopulationEvaluator::from_context(ctx)?;
    let slots: Vec<Mutex<Option<M::Island>>> = (0..s.islands).map(|_| Mutex::new(None)).collect();
    let barrier = CyclicBarrier::new(s.islands);
    let stop = AtomicBool::new(false);
    // Latched by the leader between the two barriers; `stop` itself may be
    // set by a fast thread's next step before a slow one has looked.
    let halt = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    let fail = |e: Error| {
        if !matches!(e, Error::BudgetExhausted { .. }) {
            failure.lock().unwrap().get_or_insert(e);
        }
        stop.store(true, Ordering::SeqCst);
    };
    let guarded = |f: &mut dyn FnMut() -> Result<()>| match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(_) => Err(Error::InvalidConfig {
            key: "island".into(),
            reason: "island thread panicked".into(),
        }),
    };

    std::thread::scope(|scope| {
        for id in 0..s.islands {
            let (slots, barrier, stop, halt, fail, guarded, pe) = (&slots, &barrier, &stop, &halt, &fail, &guarded, &pe);
            scope.spawn(move || {
                if let Err(e) = guarded(&mut || {
                    *slots[id].lock().unwrap() = Some(model.init(id, ctx, pe)?);
                    Ok(())
                }) {
                    fail(e);
                }
                let mut generation = 0usize;
                loop {
                    if s.generations.is_some_and(|g| generation >= g) {
                        stop.store(true, Ordering::SeqCst);
                    }
                    if !stop.load(Ordering::SeqCst) {
                        let r = guarded(&mut || match slots[id].lock().unwrap().as_mut() {
                            Some(island) => model.step(island, ctx, pe),
                            None => Ok(()),
                        });
                        if let Err(e) = r {
                            fail(e);
                        }
                    }
                    generation += 1;
                    let Ok(w) = barrier.wait() else { return };
                    if w.is_leader && stop.load(Ordering::SeqCst) {
                        halt.store(true, Ordering::SeqCst);
                    }
                    if w.is_leader && !halt.load(Ordering::SeqCst) && s.islands > 1 && generation % s.period == 0 {
                        let mut guards: Vec<_> = slots.iter().map(|m| m.lock().unwrap()).collect();
                        if guards.iter().all(|g| g.is_some()) {
                            let mut islands: Vec<&mut M::Island> =
                                guards.iter_mut().map(|g| g.as_mut().expect("checked")).collect();
                            let mut members: Vec<&mut Vec<M::Member>> =
                                islands.iter_mut().map(|i| M::members(i)).collect();
                            migrate(&mut members, s.route, M::fitness);
                            for i in islands {
                                model.after_migration(i);
                            }
                        }
                    }
                    if barrier.wait().is_err() || halt.load(Ordering::SeqCst) {
                        return;
                    }
                }
            });
        }
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Index of the lowest value; ties go to the lowest index.
pub(crate) fn argmin(fs: impl IntoIterator<Item = f64>) -> Option<usize> {
    fs.into_iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}
