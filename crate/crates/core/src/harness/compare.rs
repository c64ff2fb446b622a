use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::benchfns;
use crate::error::Error;
use crate::params::ParamMap;
use crate::stats::{pairwise_matrix, MethodResult, PairwiseCell};

use super::config::RunConfig;
use super::methods;
use super::run::run_once;
use super::HarnessError;

/// The ten-function suite used for method comparisons.
pub fn desk_suite() -> Vec<String> {
    benchfns::ENTRIES.iter().map(|e| e.name.to_owned()).collect()
}

/// `desk`, or a comma-separated list of registered function names.
pub fn suite(spec: &str) -> Result<Vec<String>, HarnessError> {
    if spec == "desk" {
        return Ok(desk_suite());
    }
    spec.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            if benchfns::is_registered(s) {
                Ok(s.to_owned())
            } else {
                Err(Error::UnknownFunction(s.to_owned()).into())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub functions: Vec<String>,
    pub methods: Vec<String>,
    pub dim: usize,
    /// Defaults to 1000 per dimension.
    pub budget: Option<u64>,
    pub reps: usize,
    /// Repetition `r` of every method uses seed `seed + r`.
    pub seed: u64,
    /// Runs executed concurrently.
    pub jobs: usize,
    pub alpha: f64,
    /// Keys applied to every run on top of the presets.
    pub overrides: ParamMap,
}

impl CompareSpec {
    pub fn new(functions: Vec<String>, methods: Vec<String>) -> Self {
        Self {
            functions,
            methods,
            dim: 50,
            budget: None,
            reps: 10,
            seed: 0,
            jobs: 1,
            alpha: 0.05,
            overrides: ParamMap::new(),
        }
    }

    fn check(&self) -> Result<(), HarnessError> {
        if self.methods.len() < 2 {
            return Err(invalid("methods", "need at least two methods"));
        }
        if let Some(m) = self.methods.iter().find(|m| !methods::is_method(m)) {
            return Err(Error::UnknownMethod(m.clone()).into());
        }
        if self.functions.is_empty() {
            return Err(invalid("suite", "no functions"));
        }
        if let Some(f) = self.functions.iter().find(|f| !benchfns::is_registered(f)) {
            return Err(Error::UnknownFunction(f.clone()).into());
        }
        if self.reps == 0 || self.dim == 0 || self.budget == Some(0) {
            return Err(invalid("reps", "reps, dim and budget must be positive"));
        }
        Ok(())
    }
}

fn invalid(key: &str, reason: &str) -> HarnessError {
    Error::InvalidConfig {
        key: key.into(),
        reason: reason.into(),
    }
    .into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub methods: Vec<String>,
    pub functions: Vec<String>,
    /// `values[m][f][r]`: best value of method `m` on function `f` in
    /// repetition `r`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub results: Vec<MethodResult>,
    pub cells: Vec<(usize, usize, PairwiseCell)>,
}

impl CompareReport {
    pub fn cell(&self, a: &str, b: &str) -> Option<&PairwiseCell> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        self.cells.iter().find(|(x, y, _)| (*x, *y) == (i, j) || (*x, *y) == (j, i)).map(|c| &c.2)
    }

    /// `MEAN,<method>,<function>,<mean>` lines followed by
    /// `MATRIX,<a>,<b>,<winner>,<tags>` lines, tags joined by `;`.
    pub fn csv_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.results {
            for (f, m) in self.functions.iter().zip(&r.means) {
                out.push(format!("MEAN,{},{},{:?}", r.method, f, m));
            }
        }
        for (i, j, c) in &self.cells {
            out.push(format!(
                "MATRIX,{},{},{},{}",
                self.methods[*i],
                self.methods[*j],
                c.winner.as_deref().unwrap_or("tie"),
                c.tags().join(";")
            ));
        }
        out
    }

    /// Upper-triangular text matrix: rows are all methods but the last,
    /// columns all but the first.
    pub fn table(&self) -> String {
        let k = self.methods.len();
        let mut grid = vec![vec![String::new(); k]; k];
        for (i, j, c) in &self.cells {
            grid[*i][*j] = c.to_string();
        }
        let w = self
            .methods
            .iter()
            .map(String::len)
            .chain(grid.iter().flatten().map(String::len))
            .max()
            .unwrap_or(0);
        let mut s = format!("{:w$}", "");
        for m in &self.methods[1..] {
            s.push_str(&format!("  {m:w$}"));
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        for i in 0..k - 1 {
            s.push_str(&format!("{:w$}", self.methods[i]));
            for cell in &grid[i][1..] {
                s.push_str(&format!("  {cell:w$}"));
            }
            s.truncate(s.trim_end().len());
            s.push('\n');
        }
        s
    }
}

/// Runs every (method, function, repetition) cell, averages per function
/// and builds the pairwise matrix.
pub fn compare(spec: &CompareSpec) -> Result<CompareReport, HarnessError> {
    spec.check()?;
    let (nm, nf, nr) = (spec.methods.len(), spec.functions.len(), spec.reps);
    let budget = spec.budget.unwrap_or(1000 * spec.dim as u64);
    let total = nm * nf * nr;
    let slots: Mutex<Vec<f64>> = Mutex::new(vec![f64::NAN; total]);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let work = || loop {
        let k = next.fetch_add(1, Ordering::SeqCst);
        if k >= total || failure.lock().unwrap().is_some() {
            break;
        }
        let (m, f, r) = (k / (nf * nr), (k / nr) % nf, k % nr);
        let cfg = RunConfig {
            function: spec.functions[f].clone(),
            dim: spec.dim,
            method: spec.methods[m].clone(),
            params: spec.overrides.clone(),
            seed: spec.seed,
            budget,
            reps: nr,
        };
        match run_once(&cfg, spec.seed + r as u64) {
            Ok(rep) => {
                log::debug!("{}", rep.result_line());
                slots.lock().unwrap()[k] = rep.value;
            }
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
            }
        }
    };
    std::thread::scope(|s| {
        for _ in 1..spec.jobs.clamp(1, total) {
            s.spawn(work);
        }
        work();
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e.into());
    }
    let flat = slots.into_inner().unwrap();
    let values: Vec<Vec<Vec<f64>>> = (0..nm)
        .map(|m| (0..nf).map(|f| flat[(m * nf + f) * nr..(m * nf + f + 1) * nr].to_vec()).collect())
        .collect();
    let results: Vec<MethodResult> = spec
        .methods
        .iter()
        .zip(&values)
        .map(|(m, per_f)| MethodResult::new(m.clone(), per_f.iter().map(|v| v.iter().sum::<f64>() / nr as f64).collect()))
        .collect();
    let cells = pairwise_matrix(&results, spec.alpha)?;
    Ok(CompareReport {
        methods: spec.methods.clone(),
        functions: spec.functions.clone(),
        values,
        results,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::compare_pair;

    fn small(methods: &[&str]) -> CompareSpec {
        let mut s = CompareSpec::new(
            vec!["sphere".into(), "rastrigin".into(), "ackley".into()],
            methods.iter().map(|m| m.to_string()).collect(),
        );
        s.dim = 3;
        s.budget = Some(300);
        s.reps = 2;
        s
    }

    #[test]
    fn self_comparison_is_all_ties() {
        let r = compare(&small(&["mc", "mc"])).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].2.winner, None);
        assert!(r.cells[0].2.significant.is_empty());
        assert!(r.csv_lines().contains(&"MATRIX,mc,mc,tie,".to_owned()));
    }

    #[test]
    fn layout_follows_method_order() {
        let mut s = small(&["mc", "de", "ps"]);
        s.jobs = 3;
        let r = compare(&s).unwrap();
        let pairs: Vec<(usize, usize)> = r.cells.iter().map(|c| (c.0, c.1)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        let matrix: Vec<String> = r.csv_lines().into_iter().filter(|l| l.starts_with("MATRIX")).collect();
        assert!(matrix[0].starts_with("MATRIX,mc,de,"));
        assert!(matrix[2].starts_with("MATRIX,de,ps,"));
        for (i, j, c) in &r.cells {
            assert_eq!(c, &compare_pair(&r.results[*i], &r.results[*j], 0.05).unwrap());
        }
        let t = r.table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("de") && lines[0].contains("ps") && !lines[0].contains("mc"));
        assert!(lines[1].starts_with("mc"));
        assert!(lines[2].starts_with("de"));
    }

    #[test]
    fn parallel_cells_match_serial() {
        let a = compare(&small(&["mc", "ga"])).unwrap();
        let mut s = small(&["mc", "ga"]);
        s.jobs = 4;
        let b = compare(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            compare(&small(&["mc", "zz"])),
            Err(HarnessError::Run(Error::UnknownMethod(_)))
        ));
        assert!(matches!(suite("sphere,nope"), Err(HarnessError::Run(Error::UnknownFunction(_)))));
        assert_eq!(compare(&small(&["mc"])).unwrap_err().exit_code(), 2);
        assert_eq!(suite("desk").unwrap().len(), 10);
    }
}
