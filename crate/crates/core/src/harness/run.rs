use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use crate::benchfns::{self, ShiftSpec};
use crate::error::Result;
use crate::function::ObjectiveFunction;
use crate::params::ParamMap;

use super::config::RunConfig;
use super::methods;

/// Components of the best argument shown on the `ARG` line.
pub const ARG_SHOWN: usize = 8;

/// The full parameter map of one run: presets, then the user's keys, then
/// `dim`, `seed` and `budget`. The function's standard box fills in when
/// `box.lo`/`box.hi` are absent, and a shifted function's shift vector is
/// written out so remote workers evaluate the same function.
pub fn effective_params(cfg: &RunConfig, seed: u64) -> Result<ParamMap> {
    let mut p = methods::profile(&cfg.method, cfg.dim, cfg.budget)?;
    p.merge(&cfg.params);
    p.set("dim", cfg.dim as i64);
    p.set("seed", seed as i64);
    p.set("budget", cfg.budget as i64);
    let (lo, hi) = benchfns::default_box(&cfg.function, cfg.dim)?;
    if !p.contains("box.lo") {
        p.set("box.lo", lo);
    }
    if !p.contains("box.hi") {
        p.set("box.hi", hi);
    }
    if cfg.function == "rosenbrock_shifted" {
        ShiftSpec::from_params(&p, cfg.dim)?.write_params(&mut p);
    }
    Ok(p)
}

pub fn build_function(cfg: &RunConfig, p: &ParamMap) -> Result<Arc<dyn ObjectiveFunction>> {
    benchfns::build(&cfg.function, cfg.dim, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: String,
    pub function: String,
    pub dim: usize,
    pub seed: u64,
    pub value: f64,
    pub arg: Vec<f64>,
    pub evals: u64,
    pub seconds: f64,
}

impl RunReport {
    /// `RESULT,<method>,<function>,<D>,<seed>,<value>,<evals>,<seconds>`.
    pub fn result_line(&self) -> String {
        format!(
            "RESULT,{},{},{},{},{:?},{},{:.3}",
            self.method, self.function, self.dim, self.seed, self.value, self.evals, self.seconds
        )
    }

    /// `ARG,<x1>;<x2>;...`, cut after [`ARG_SHOWN`] components.
    pub fn arg_line(&self) -> String {
        let mut s = String::from("ARG,");
        let shown: Vec<String> = self.arg.iter().take(ARG_SHOWN).map(|v| format!("{v:?}")).collect();
        s.push_str(&shown.join(";"));
        if self.arg.len() > ARG_SHOWN {
            let _ = write!(s, ";...({} total)", self.arg.len());
        }
        s
    }
}

/// One run with `seed`. Timing covers only the minimization.
pub fn run_once(cfg: &RunConfig, seed: u64) -> Result<RunReport> {
    run_with(cfg, seed, &ParamMap::new())
}

/// As [`run_once`] with `extra` keys applied last.
pub fn run_with(cfg: &RunConfig, seed: u64, extra: &ParamMap) -> Result<RunReport> {
    let mut p = effective_params(cfg, seed)?;
    p.merge(extra);
    let f = build_function(cfg, &p)?;
    let m = methods::minimizer(&cfg.method)?;
    m.set_params(p)?;
    let t = Instant::now();
    let r = m.minimize(f)?;
    let seconds = t.elapsed().as_secs_f64();
    Ok(RunReport {
        method: cfg.method.clone(),
        function: cfg.function.clone(),
        dim: cfg.dim,
        seed,
        value: r.value,
        arg: r.arg.as_slice().to_vec(),
        evals: r.evals_used,
        seconds,
    })
}

/// `cfg.reps` runs with seeds `cfg.seed`, `cfg.seed + 1`, ...
pub fn run_reps(cfg: &RunConfig) -> Result<Vec<RunReport>> {
    (0..cfg.reps as u64).map(|r| run_once(cfg, cfg.seed + r)).collect()
}
