use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::function::Evaluator;
use crate::optimizer::SearchBox;
use crate::params::ParamMap;

use super::linesearch::{armijo_step, wolfe_search, ArmijoParams, LineFunction, WolfeParams};
use super::richardson::GradientEstimator;

/// Callback receiving every improved point of a descent.
pub type Report<'a> = &'a (dyn Fn(&[f64], f64) + Sync);

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Converged,
    IterationCap,
    BudgetExhausted,
    LineSearchFailed,
    Aborted(Error),
}

/// Outcome of one local descent.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn start_value(ev: &Evaluator, x0: &[f64], f0: Option<f64>) -> Result<f64> {
    match f0 {
        Some(f) => Ok(f),
        None => ev.eval(x0),
    }
}

fn stop_for(e: Error) -> StopReason {
    match e {
        Error::BudgetExhausted { .. } => StopReason::BudgetExhausted,
        Error::LineSearchFailed(_) | Error::NotDescentDirection(_) => StopReason::LineSearchFailed,
        other => StopReason::Aborted(other),
    }
}

/// Points `x + t d`, projected onto the box when one is given.
struct Ray<'a> {
    ev: &'a Evaluator,
    est: &'a GradientEstimator,
    x: &'a [f64],
    d: &'a [f64],
    bx: Option<&'a SearchBox>,
    grad_at: Option<(f64, Vec<f64>)>,
}

impl<'a> Ray<'a> {
    fn point(&self, t: f64) -> Vec<f64> {
        let mut y: Vec<f64> = self.x.iter().zip(self.d).map(|(x, d)| x + t * d).collect();
        if let Some(b) = self.bx {
            b.clamp(&mut y);
        }
        y
    }

    fn gradient(&mut self, t: f64) -> Result<Vec<f64>> {
        match &self.grad_at {
            Some((tc, g)) if *tc == t => Ok(g.clone()),
            _ => {
                let g = self.est.gradient(self.ev, &self.point(t))?;
                self.grad_at = Some((t, g.clone()));
                Ok(g)
            }
        }
    }
}

impl LineFunction for Ray<'_> {
    fn value(&mut self, t: f64) -> Result<f64> {
        self.ev.eval(&self.point(t))
    }

    fn slope(&mut self, t: f64) -> Result<f64> {
        let g = self.gradient(t)?;
        Ok(dot(&g, self.d))
    }
}

/// Steepest-descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsdParams {
    pub armijo: ArmijoParams,
    pub gtol: f64,
    pub max_iter: usize,
}

impl Default for AsdParams {
    fn default() -> Self {
        Self {
            armijo: ArmijoParams::default(),
            gtol: 1e-6,
            max_iter: 100_000,
        }
    }
}

impl AsdParams {
    /// Reads `asd.rho/.beta/.gamma/.gtol/.maxiter`.
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            armijo: ArmijoParams::from_params(p, "asd.")?,
            gtol: p.real_or("asd.gtol", d.gtol)?,
            max_iter: p.count_or("asd.maxiter", d.max_iter)?,
        })
    }
}

/// Steepest descent with Armijo steps from `x0`.
///
/// Fails only when `x0` itself cannot be evaluated; later budget exhaustion
/// ends the descent with the best point so far.
pub fn asd_descend(
    ev: &Evaluator,
    est: &GradientEstimator,
    x0: &[f64],
    f0: Option<f64>,
    bx: Option<&SearchBox>,
    p: &AsdParams,
    report: Report<'_>,
) -> Result<Descent> {
    let mut x = x0.to_vec();
    let mut f = start_value(ev, &x, f0)?;
    report(&x, f);
    let mut iterations = 0;
    let stop = loop {
        if iterations >= p.max_iter {
            break StopReason::IterationCap;
        }
        let g = match est.gradient(ev, &x) {
            Ok(g) => g,
            Err(e) => break stop_for(e),
        };
        if norm_inf(&g) <= p.gtol {
            break StopReason::Converged;
        }
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut ray = Ray {
            ev,
            est,
            x: &x,
            d: &d,
            bx,
            grad_at: None,
        };
        let step = match armijo_step(|t| ray.value(t), f, dot(&g, &d), &p.armijo) {
            Ok(s) => s,
            Err(e) => break stop_for(e),
        };
        let nx = ray.point(step.t);
        iterations += 1;
        if step.f < f {
            x = nx;
            f = step.f;
            report(&x, f);
        } else {
            break StopReason::LineSearchFailed;
        }
    };
    Ok(Descent {
        x,
        f,
        iterations,
        stop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgUpdate {
    FletcherReeves,
    PolakRibiere,
}

impl CgUpdate {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fr" => Ok(Self::FletcherReeves),
            "pr" => Ok(Self::PolakRibiere),
            other => Err(Error::InvalidConfig {
                key: "fcg.update".into(),
                reason: format!("`{other}` is not fr or pr"),
            }),
        }
    }

    /// Direction weight; PR uses the nonnegative clamp.
    pub fn beta(self, g_new: &[f64], g_old: &[f64]) -> f64 {
        let denom = dot(g_old, g_old);
        match self {
            Self::FletcherReeves => dot(g_new, g_new) / denom,
            Self::PolakRibiere => {
                let num: f64 = g_new.iter().zip(g_old).map(|(a, b)| a * (a - b)).sum();
                (num / denom).max(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgParams {
    pub wolfe: WolfeParams,
    pub update: CgUpdate,
    pub gtol: f64,
    pub max_iter: usize,
}

impl Default for CgParams {
    fn default() -> Self {
        Self {
            wolfe: WolfeParams::default(),
            update: CgUpdate::FletcherReeves,
            gtol: 1e-6,
            max_iter: 100_000,
        }
    }
}

impl CgParams {
    /// Reads `fcg.rho/.sigma/.t1/.t2/.t3/.redrate/.gtol/.maxiter/.update`.
    pub fn from_params(p: &ParamMap) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            wolfe: WolfeParams::from_params(p, "fcg.")?,
            update: match p.string("fcg.update") {
                Ok(s) => CgUpdate::parse(&s)?,
                Err(Error::MissingConfig(_)) => d.update,
                Err(e) => return Err(e),
            },
            gtol: p.real_or("fcg.gtol", d.gtol)?,
            max_iter: p.count_or("fcg.maxiter", d.max_iter)?,
        })
    }
}

/// Nonlinear conjugate gradient with a strong-Wolfe line search.
///
/// Restarts along `-g` every `dim` iterations and whenever the direction
/// is not a descent direction. A failed line search is retried once along
/// `-g` before the descent stops.
pub fn cg_descend(
    ev: &Evaluator,
    est: &GradientEstimator,
    x0: &[f64],
    f0: Option<f64>,
    bx: Option<&SearchBox>,
    p: &CgParams,
    report: Report<'_>,
) -> Result<Descent> {
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut f = start_value(ev, &x, f0)?;
    report(&x, f);
    let mut iterations = 0;
    let mut g = match est.gradient(ev, &x) {
        Ok(g) => g,
        Err(e) => {
            return Ok(Descent {
                x,
                f,
                iterations,
                stop: stop_for(e),
            })
        }
    };
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut since_restart = 0;
    let mut prev_f: Option<f64> = None;
    let stop = loop {
        if norm_inf(&g) <= p.gtol {
            break StopReason::Converged;
        }
        if iterations >= p.max_iter {
            break StopReason::IterationCap;
        }
        let mut slope = dot(&g, &d);
        let mut steepest = since_restart == 0;
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            since_restart = 0;
            steepest = true;
        }
        let t0 = match prev_f {
            Some(pf) => {
                let t = 2.02 * (f - pf) / slope;
                if t.is_finite() && t > 0.0 {
                    t.min(1.0)
                } else {
                    1.0
                }
            }
            None => (1.0 / norm_inf(&g)).min(1.0),
        };
        let attempt = {
            let mut ray = Ray {
                ev,
                est,
                x: &x,
                d: &d,
                bx,
                grad_at: None,
            };
            wolfe_search(&mut ray, f, slope, t0, &p.wolfe).and_then(|s| {
                let g_new = ray.gradient(s.t)?;
                Ok((ray.point(s.t), s.f, g_new))
            })
        };
        let (nx, nf, ng) = match attempt {
            Ok(v) => v,
            Err(Error::LineSearchFailed(_)) if !steepest => {
                d = g.iter().map(|v| -v).collect();
                since_restart = 0;
                continue;
            }
            Err(e) => break stop_for(e),
        };
        iterations += 1;
        if !(nf < f) {
            break StopReason::LineSearchFailed;
        }
        prev_f = Some(f);
        let beta = p.update.beta(&ng, &g);
        x = nx;
        f = nf;
        g = ng;
        report(&x, f);
        since_restart += 1;
        if since_restart >= dim || !beta.is_finite() {
            d = g.iter().map(|v| -v).collect();
            since_restart = 0;
        } else {
            d = g.iter().zip(&d).map(|(gi, di)| -gi + beta * di).collect();
        }
    };
    Ok(Descent {
        x,
        f,
        iterations,
        stop,
    })
}

/// Runs `descend` from every start on up to `threads` scoped threads and
/// returns the outcomes in start order.
pub fn multi_start<F>(starts: &[Vec<f64>], threads: usize, descend: F) -> Vec<Result<Descent>>
where
    F: Fn(&[f64]) -> Result<Descent> + Sync,
{
    let next = AtomicUsize::new(0);
    let out: Vec<Mutex<Option<Result<Descent>>>> = starts.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, starts.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= starts.len() {
                    break;
                }
                *out[i].lock().unwrap() = Some(descend(&starts[i]));
            });
        }
    });
    out.into_iter()
        .map(|m| m.into_inner().unwrap().expect("every start ran"))
        .collect()
}
