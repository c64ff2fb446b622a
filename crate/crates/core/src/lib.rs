//! Parallel and distributed global optimization of box-constrained
//! real-valued functions.

pub mod benchfns;
pub mod codec;
pub mod error;
pub mod exec_dist;
pub mod exec_local;
pub mod function;
pub mod gradient;
pub mod harness;
pub mod incumbent;
pub mod metaheuristics;
pub mod optimizer;
pub mod params;
pub mod rng;
pub mod stats;
pub mod vector;

pub use error::{Error, Result};
pub use function::{evaluate, Counted, EvalBudget, Evaluator, FnObjective, ObjectiveFunction};
pub use incumbent::{Incumbent, IncumbentChannel, Observer, ObserverId};
pub use optimizer::{Algorithm, Minimizer, OptResult, Optimizer, RunContext, SearchBox};
pub use params::{ParamMap, ParamValue};
pub use vector::{DenseVector, SparseVector};
