use std::cmp::Ordering as CmpOrdering;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::exec_local::Accumulator;
use crate::optimizer::{Algorithm, RunContext, SearchBox};
use crate::params::ParamMap;
use crate::rng;

use super::evaluator::PopulationEvaluator;

const MC_STREAM: u64 = 0x3c;

/// Samples drawn from one random stream.
pub const BLOCK: u64 = 1024;

/// `(value, sample index, point)`.
type Sample = (f64, u64, Vec<f64>);

fn order(a: &Sample, b: &Sample) -> CmpOrdering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn best_sample() -> Accumulator<Sample> {
    Accumulator::new((f64::INFINITY, u64::MAX, Vec::new()), |a: &Sample, b: &Sample| {
        if order(b, a) == CmpOrdering::Less {
            b.clone()
        } else {
            a.clone()
        }
    })
    .with_canonical_order(order)
}

/// The `BLOCK` points of block `b`; sample `i` of the run is point
/// `i % BLOCK` of block `i / BLOCK` whatever the thread count.
pub fn block_points(seed: u64, b: u64, n: usize, bx: &SearchBox) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, &[MC_STREAM, b]);
    (0..n).map(|_| bx.sample(&mut r)).collect()
}

/// Pure random search (`mc`): uniform samples from the box (`mc.box.lo`/
/// `mc.box.hi` when given), `mc.samples` of them or the whole budget.
#[derive(Debug, Default, Clone, Copy)]
pub struct MonteCarlo;

fn sample_count(p: &ParamMap) -> Result<u64> {
    match (p.count("mc.samples"), p.count("budget")) {
        (Ok(n), Ok(b)) => Ok(n.min(b) as u64),
        (Ok(n), _) => Ok(n as u64),
        (Err(Error::MissingConfig(_)), Ok(b)) => Ok(b as u64),
        (Err(Error::MissingConfig(_)), Err(Error::MissingConfig(_))) => {
            Err(Error::MissingConfig("mc.samples (or budget)".into()))
        }
        (Err(e), _) => Err(e),
    }
}

impl Algorithm for MonteCarlo {
    fn name(&self) -> &'static str {
        "mc"
    }

    fn validate(&self, p: &ParamMap) -> Result<()> {
        SearchBox::from_params(p, "mc.")?;
        sample_count(p)?;
        Ok(())
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<()> {
        let bx = SearchBox::from_params(ctx.params, "mc.")?;
        let n = sample_count(ctx.params)?;
        let threads = ctx.params.count_or("threads", 1)?.max(1);
        let pe = PopulationEvaluator::from_context(ctx)?;
        // Reserved up front so the evaluated set does not depend on timing.
        let n = ctx.evaluator.budget().reserve_up_to(n);
        let blocks = n.div_ceil(BLOCK);
        let next = AtomicU64::new(0);
        let acc = best_sample();
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        std::thread::scope(|s| {
            for _ in 0..threads.min(blocks.max(1) as usize) {
                s.spawn(|| loop {
                    let b = next.fetch_add(1, Ordering::SeqCst);
                    if b >= blocks || failure.lock().unwrap().is_some() {
                        break;
                    }
                    let len = BLOCK.min(n - b * BLOCK) as usize;
                    let xs = block_points(ctx.seed, b, len, &bx);
                    match pe.evaluate_prepaid(&xs) {
                        Ok(fs) => {
                            let k = argmin_block(&fs);
                            acc.contribute((fs[k], b * BLOCK + k as u64, xs[k].clone()));
                        }
                        Err(e) => {
                            failure.lock().unwrap().get_or_insert(e);
                        }
                    }
                });
            }
        });
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        let (f, _, x) = acc.value();
        if !x.is_empty() {
            ctx.report(&x, f);
        }
        Ok(())
    }
}

fn argmin_block(fs: &[f64]) -> usize {
    super::island::argmin(fs.iter().copied()).expect("nonempty block")
}
