//! In-process execution: a fixed-size batch thread pool, a cyclic barrier
//! and a reduction accumulator.

mod accumulator;
mod barrier;
mod pool;

pub use accumulator::Accumulator;
pub use barrier::{BarrierWait, CyclicBarrier};
pub use pool::{current_worker, BatchExecutor, ExecError, FailedResult, FnTask, Task, ThreadCommand};
