use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec_local::CyclicBarrier;
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng::{self, StreamRng};

use super::evaluator::PopulationEvaluator;
use super::ga::invalid;
use super::island::argmin;

const DE_STREAM: u64 = 0xde;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeVariant {
    Rand1Bin,
    Best1Bin,
}

impl DeVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rand1bin" | "rand/1/bin" => Ok(Self::Rand1Bin),
            "best1bin" | "best/1/bin" => Ok(Self::Best1Bin),
            other => Err(invalid("de.variant", &format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeParams {
    pub pop: usize,
    pub generations: Option<usize>,
    pub w: f64,
    pub pc: f64,
    pub variant: DeVariant,
    pub nondeterminism_ok: bool,
    pub threads: usize,
}

impl DeParams {
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let pop = p.count_or("de.pop", 100)?;
        if pop < 4 {
            return Err(invalid("de.pop", "population must be at least 4"));
        }
        let generations = match p.count("de.gens") {
            Ok(g) => Some(g),
            Err(Error::MissingConfig(_)) if p.contains("budget") => None,
            Err(Error::MissingConfig(_)) => return Err(Error::MissingConfig("de.gens (or budget)".into())),
            Err(e) => return Err(e),
        };
        let w = p.real_or("de.w", 0.5)?;
        let pc = p.real_or("de.pc", 0.8)?;
        if !w.is_finite() {
            return Err(invalid("de.w", "must be finite"));
        }
        if !(0.0..=1.0).contains(&pc) {
            return Err(invalid("de.pc", "must be a probability"));
        }
        Ok(Self {
            pop,
            generations,
            w,
            pc,
            variant: DeVariant::parse(&p.string_or("de.variant", "rand1bin".into())?)?,
            nondeterminism_ok: p.boolean_or("de.nondeterminismok", false)?,
            threads: p.count_or("threads", 1)?.clamp(1, pop),
        })
    }
}

/// `base + w * (b - c)`.
pub fn de_donor(base: &[f64], b: &[f64], c: &[f64], w: f64) -> Vec<f64> {
    base.iter()
        .zip(b.iter().zip(c))
        .map(|(x, (y, z))| x + w * (y - z))
        .collect()
}

/// Takes `donor[j]` with probability `pc` and always at `j_rand`.
pub fn binomial_crossover(x: &[f64], donor: &[f64], pc: f64, j_rand: usize, rng: &mut impl Rng) -> Vec<f64> {
    x.iter()
        .zip(donor)
        .enumerate()
        .map(|(j, (&xj, &vj))| {
            // Draw for every j so the stream position is independent of j_rand.
            let u: f64 = rng.random();
            if j == j_rand || u < pc {
                vj
            } else {
                xj
            }
        })
        .collect()
}

/// Three distinct indices in `0..n`, all different from `i`.
pub fn pick_three(n: usize, i: usize, rng: &mut impl Rng) -> [usize; 3] {
    assert!(n >= 4);
    let mut out = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let r = rng.random_range(0..n);
        if r != i && !out[..k].contains(&r) {
            out[k] = r;
            k += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Member {
    x: Vec<f64>,
    f: f64,
}

fn trial(
    pop: &[Member],
    i: usize,
    best: usize,
    dp: &DeParams,
    bx: &SearchBox,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let [a, b, c] = pick_three(pop.len(), i, rng);
    let base = match dp.variant {
        DeVariant::Rand1Bin => a,
        DeVariant::Best1Bin => best,
    };
    let donor = de_donor(&pop[base].x, &pop[b].x, &pop[c].x, dp.w);
    let j_rand = rng.random_range(0..bx.dim());
    let mut u = binomial_crossover(&pop[i].x, &donor, dp.pc, j_rand, rng);
    bx.clamp(&mut u);
    u
}

/// Contiguous slice of `0..n` owned by thread `t` of `threads`.
fn slice_of(n: usize, threads: usize, t: usize) -> std::ops::Range<usize> {
    let base = n / threads;
    let extra = n % threads;
    let start = t * base + t.min(extra);
    start..start + base + usize::from(t < extra)
}

fn panicked() -> Error {
    invalid("threads", "DE worker thread panicked")
}

/// Differential evolution (`de`), DE/rand/1/bin or DE/best/1/bin, with the
/// population split into one contiguous slice per thread.
///
/// Unless `de.nondeterminismok` is set, threads meet at a barrier before
/// reading the population and again after writing their replacements, so
/// the result does not depend on the thread count.
#[derive(Debug, Default, Clone, Copy)]
pub struct DifferentialEvolution;

impl Algorithm for DifferentialEvolution {
    fn name(&self) -> &'static str {
        "de"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "")?;
        DeParams::from_params(p)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let dp = DeParams::from_params(ctx.params)?;
        let bx = SearchBox::from_params(ctx.params, "")?;
        let pe = PopulationEvaluator::from_context(ctx)?;
        let xs: Vec<Vec<f64>> = (0..dp.pop)
            .map(|i| bx.sample(&mut rng::stream(ctx.seed, &[DE_STREAM, 0, i as u64])))
            .collect();
        let fs = pe.evaluate(&xs)?;
        // An underfunded start leaves a smaller population.
        let pop: Vec<Member> = xs.into_iter().zip(fs).map(|(x, f)| Member { x, f }).collect();
        let best = argmin(pop.iter().map(|m| m.f)).expect("nonempty");
        ctx.report(&pop[best].x, pop[best].f);
        if pop.len() < 4 || dp.generations == Some(0) {
            return Ok(());
        }
        let threads = dp.threads.min(pop.len());
        if dp.nondeterminism_ok {
            run_free(ctx, &dp, &bx, &pe, pop, threads)
        } else {
            run_synchronized(ctx, &dp, &bx, &pe, pop, threads)
        }
    }
}

fn run_synchronized(
    ctx: &RunContext<'_>,
    dp: &DeParams,
    bx: &SearchBox,
    pe: &PopulationEvaluator,
    pop: Vec<Member>,
    threads: usize,
) -> Result<()> {
    let n = pop.len();
    let budget = pe.evaluator().budget();
    let best0 = argmin(pop.iter().map(|m| m.f)).expect("nonempty");
    let shared = RwLock::new(pop);
    let barrier = CyclicBarrier::new(threads);
    let best = AtomicUsize::new(best0);
    let funded = AtomicUsize::new(budget.reserve_up_to(n as u64) as usize);
    let failed = AtomicBool::new(false);
    // Written only by the leader between the last two barriers.
    let halt = AtomicBool::new(funded.load(Ordering::SeqCst) == 0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let fail = |e: Error| {
        failure.lock().unwrap().get_or_insert(e);
        failed.store(true, Ordering::SeqCst);
    };

    std::thread::scope(|s| {
        for t in 0..threads {
            let (shared, barrier, best, funded, failed, halt, fail) =
                (&shared, &barrier, &best, &funded, &failed, &halt, &fail);
            s.spawn(move || {
                let mine = slice_of(n, threads, t);
                let mut generation = 0u64;
                while !halt.load(Ordering::SeqCst) {
                    let k = funded.load(Ordering::SeqCst);
                    let idx: Vec<usize> = mine.clone().filter(|&i| i < k).collect();
                    let work = catch_unwind(AssertUnwindSafe(|| -> Result<Vec<f64>> {
                        let pop = shared.read().unwrap();
                        let b = best.load(Ordering::SeqCst);
                        let us: Vec<Vec<f64>> = idx
                            .iter()
                            .map(|&i| {
                                let mut r = rng::stream(ctx.seed, &[DE_STREAM, 1, generation, i as u64]);
                                trial(&pop, i, b, dp, bx, &mut r)
                            })
                            .collect();
                        drop(pop);
                        let fs = pe.evaluate_prepaid(&us)?;
                        Ok(us.into_iter().zip(fs).flat_map(|(u, f)| u.into_iter().chain([f])).collect())
                    }));
                    let packed = match work {
                        Ok(Ok(v)) => Some(v),
                        Ok(Err(e)) => {
                            fail(e);
                            None
                        }
                        Err(_) => {
                            fail(panicked());
                            None
                        }
                    };
                    if barrier.wait().is_err() {
                        return;
                    }
                    if let Some(packed) = packed {
                        let mut pop = shared.write().unwrap();
                        for (&i, chunk) in idx.iter().zip(packed.chunks(bx.dim() + 1)) {
                            let (u, f) = chunk.split_at(bx.dim());
                            if f[0] <= pop[i].f {
                                pop[i] = Member { x: u.to_vec(), f: f[0] };
                            }
                        }
                    }
                    let Ok(w) = barrier.wait() else { return };
                    generation += 1;
                    if w.is_leader {
                        let pop = shared.read().unwrap();
                        let b = argmin(pop.iter().map(|m| m.f)).expect("nonempty");
                        best.store(b, Ordering::SeqCst);
                        ctx.report(&pop[b].x, pop[b].f);
                        let done = dp.generations.is_some_and(|g| generation >= g as u64);
                        let k = if done || failed.load(Ordering::SeqCst) {
                            0
                        } else {
                            budget.reserve_up_to(n as u64) as usize
                        };
                        funded.store(k, Ordering::SeqCst);
                        if k == 0 {
                            halt.store(true, Ordering::SeqCst);
                        }
                    }
                    if barrier.wait().is_err() {
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

/// Barrier-free variant: every thread runs its own generation count over
/// its slice and reads whatever the other threads have written so far.
fn run_free(
    ctx: &RunContext<'_>,
    dp: &DeParams,
    bx: &SearchBox,
    pe: &PopulationEvaluator,
    pop: Vec<Member>,
    threads: usize,
) -> Result<()> {
    let n = pop.len();
    let best0 = argmin(pop.iter().map(|m| m.f)).expect("nonempty");
    let members: Vec<RwLock<Member>> = pop.into_iter().map(RwLock::new).collect();
    let best = AtomicUsize::new(best0);
    let best_f = AtomicU64::new(members[best0].read().unwrap().f.to_bits());
    let best_lock = Mutex::new(());
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    std::thread::scope(|s| {
        for t in 0..threads {
            let (members, best, best_f, best_lock, stop, failure) =
                (&members, &best, &best_f, &best_lock, &stop, &failure);
            s.spawn(move || {
                let mut r = rng::stream(ctx.seed, &[DE_STREAM, 2, t as u64]);
                let mut generation = 0usize;
                let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<()> {
                    while !stop.load(Ordering::Relaxed) && dp.generations.is_none_or(|g| generation < g) {
                        for i in slice_of(n, threads, t) {
                            let view: Vec<Member> = members.iter().map(|m| m.read().unwrap().clone()).collect();
                            let u = trial(&view, i, best.load(Ordering::Relaxed), dp, bx, &mut r);
                            let f = pe.evaluate(std::slice::from_ref(&u))?[0];
                            let mut m = members[i].write().unwrap();
                            if f <= m.f {
                                *m = Member { x: u, f };
                                drop(m);
                                let _g = best_lock.lock().unwrap();
                                if f < f64::from_bits(best_f.load(Ordering::SeqCst)) {
                                    best_f.store(f.to_bits(), Ordering::SeqCst);
                                    best.store(i, Ordering::SeqCst);
                                    ctx.report(&members[i].read().unwrap().x, f);
                                }
                            }
                        }
                        generation += 1;
                    }
                    Ok(())
                }));
                let err = match outcome {
                    Ok(Ok(())) => return,
                    Ok(Err(Error::BudgetExhausted { .. })) => None,
                    Ok(Err(e)) => Some(e),
                    Err(_) => Some(panicked()),
                };
                stop.store(true, Ordering::SeqCst);
                if let Some(e) = err {
                    failure.lock().unwrap().get_or_insert(e);
                }
            });
        }
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
