use crate::error::{Error, Result};
use crate::params::ParamMap;

use super::config::RunConfig;
use super::run::run_with;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupRow {
    pub threads: usize,
    pub seconds: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

/// Rows from `(threads, seconds)` pairs; the first pair is the 1-thread
/// reference.
pub fn speedup_rows(times: &[(usize, f64)]) -> Result<Vec<SpeedupRow>> {
    let Some(&(1, t1)) = times.first() else {
        return Err(Error::InvalidConfig {
            key: "threads".into(),
            reason: "thread list must start at 1".into(),
        });
    };
    Ok(times
        .iter()
        .map(|&(n, t)| {
            let speedup = t1 / t;
            SpeedupRow {
                threads: n,
                seconds: t,
                speedup,
                efficiency: speedup / n as f64,
            }
        })
        .collect())
}

/// Runs `cfg` once per thread count with the same seed and unsynchronized
/// generations.
pub fn run_speedup(cfg: &RunConfig, threads: &[usize]) -> Result<Vec<SpeedupRow>> {
    if threads.first() != Some(&1) || threads.contains(&0) {
        return speedup_rows(&[]);
    }
    let mut times = Vec::with_capacity(threads.len());
    for &n in threads {
        let extra = ParamMap::new()
            .with("threads", n as i64)
            .with("de.nondeterminismok", true);
        let r = run_with(cfg, cfg.seed, &extra)?;
        log::info!("speedup run: {} threads, {:.3}s, value {:?}", n, r.seconds, r.value);
        times.push((n, r.seconds));
    }
    speedup_rows(&times)
}

pub fn speedup_lines(rows: &[SpeedupRow]) -> Vec<String> {
    rows.iter()
        .map(|r| format!("SPEEDUP,{},{:.3},{:.2},{:.2}", r.threads, r.seconds, r.speedup, r.efficiency))
        .collect()
}

pub fn speedup_table(rows: &[SpeedupRow]) -> String {
    let mut s = format!("{:>7}  {:>11}  {:>7}  {:>10}\n", "Threads", "Time (secs)", "Speedup", "Efficiency");
    for r in rows {
        s.push_str(&format!(
            "{:>7}  {:>11.1}  {:>7.2}  {:>10.2}\n",
            r.threads, r.seconds, r.speedup, r.efficiency
        ));
    }
    s
}
