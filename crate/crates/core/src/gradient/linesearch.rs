use crate::error::{Error, Result};
use crate::params::ParamMap;

pub const ARMIJO_MAX_BACKTRACKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub rho: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            beta: 0.8,
            gamma: 1.0,
        }
    }
}

impl ArmijoParams {
    /// Reads `<prefix>rho`, `<prefix>beta`, `<prefix>gamma`.
    pub fn from_params(p: &ParamMap, prefix: &str) -> Result<Self> {
        let d = Self::default();
        let s = Self {
            rho: p.real_or(&format!("{prefix}rho"), d.rho)?,
            beta: p.real_or(&format!("{prefix}beta"), d.beta)?,
            gamma: p.real_or(&format!("{prefix}gamma"), d.gamma)?,
        };
        unit_open(prefix, "rho", s.rho)?;
        unit_open(prefix, "beta", s.beta)?;
        positive(prefix, "gamma", s.gamma)?;
        Ok(s)
    }
}

fn unit_open(prefix: &str, k: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig {
            key: format!("{prefix}{k}"),
            reason: format!("{v} is outside (0, 1)"),
        })
    }
}

fn positive(prefix: &str, k: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig {
            key: format!("{prefix}{k}"),
            reason: format!("{v} is not positive"),
        })
    }
}

/// Accepted step of a line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: f64,
    pub f: f64,
}

/// Backtracking: the first `t = gamma * beta^m` with
/// `phi(t) <= f0 + rho * t * slope`.
///
/// `phi` returns the objective along the search direction. Non-finite
/// values count as rejections.
pub fn armijo_step(
    mut phi: impl FnMut(f64) -> Result<f64>,
    f0: f64,
    slope: f64,
    p: &ArmijoParams,
) -> Result<Step> {
    if !(slope < 0.0) {
        return Err(Error::NotDescentDirection(slope));
    }
    let mut t = p.gamma;
    for _ in 0..=ARMIJO_MAX_BACKTRACKS {
        let ft = finite_or_inf(phi(t))?;
        if ft <= f0 + p.rho * t * slope {
            return Ok(Step { t, f: ft });
        }
        t *= p.beta;
    }
    Err(Error::LineSearchFailed(ARMIJO_MAX_BACKTRACKS + 1))
}

fn finite_or_inf(v: Result<f64>) -> Result<f64> {
    match v {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(Error::NonFiniteResult { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Parameters of the bracketing/sectioning search.
///
/// `sigma` is the strong-Wolfe curvature constant; `t1` caps how far one
/// bracketing step may extrapolate (as a multiple of the previous step
/// increase) and `redrate` is the minimum such factor plus one, so the
/// bracket grows at least geometrically. `t2` and `t3` keep sectioning
/// trial points away from the bracket ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub rho: f64,
    pub sigma: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub redrate: f64,
    pub max_trials: usize,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 0.9,
            t1: 9.0,
            t2: 0.1,
            t3: 0.5,
            redrate: 2.0,
            max_trials: 60,
        }
    }
}

impl WolfeParams {
    /// Reads `<prefix>{rho,sigma,t1,t2,t3,redrate}`.
    pub fn from_params(p: &ParamMap, prefix: &str) -> Result<Self> {
        let d = Self::default();
        let k = |n: &str| format!("{prefix}{n}");
        let s = Self {
            rho: p.real_or(&k("rho"), d.rho)?,
            sigma: p.real_or(&k("sigma"), d.sigma)?,
            t1: p.real_or(&k("t1"), d.t1)?,
            t2: p.real_or(&k("t2"), d.t2)?,
            t3: p.real_or(&k("t3"), d.t3)?,
            redrate: p.real_or(&k("redrate"), d.redrate)?,
            max_trials: d.max_trials,
        };
        s.validate(prefix)?;
        Ok(s)
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        unit_open(prefix, "rho", self.rho)?;
        unit_open(prefix, "sigma", self.sigma)?;
        unit_open(prefix, "t2", self.t2)?;
        unit_open(prefix, "t3", self.t3)?;
        if self.rho >= self.sigma {
            return Err(Error::InvalidConfig {
                key: format!("{prefix}sigma"),
                reason: format!("rho {} must be below sigma {}", self.rho, self.sigma),
            });
        }
        if self.t2 + self.t3 >= 1.0 {
            return Err(Error::InvalidConfig {
                key: format!("{prefix}t3"),
                reason: "t2 + t3 must be below 1".into(),
            });
        }
        if !(self.redrate > 1.0 && self.t1 >= self.redrate - 1.0) {
            return Err(Error::InvalidConfig {
                key: format!("{prefix}redrate"),
                reason: format!("need redrate > 1 and t1 >= redrate - 1 (t1 {}, redrate {})", self.t1, self.redrate),
            });
        }
        Ok(())
    }
}

/// Objective restricted to a search line.
pub trait LineFunction {
    fn value(&mut self, t: f64) -> Result<f64>;
    fn slope(&mut self, t: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy)]
struct Pt {
    t: f64,
    f: f64,
    d: Option<f64>,
}

/// Minimizer of the cubic (or quadratic, when `b.d` is unknown) matching
/// the values and slopes at `a` and `b`.
fn interpolate(a: Pt, b: Pt) -> f64 {
    let da = a.d.expect("left point carries a slope");
    match b.d {
        Some(db) => {
            let d1 = da + db - 3.0 * (a.f - b.f) / (a.t - b.t);
            let disc = d1 * d1 - da * db;
            if disc < 0.0 {
                return f64::NAN;
            }
            let d2 = (b.t - a.t).signum() * disc.sqrt();
            b.t - (b.t - a.t) * (db + d2 - d1) / (db - da + 2.0 * d2)
        }
        None => {
            let w = b.t - a.t;
            let curv = b.f - a.f - da * w;
            if curv <= 0.0 {
                return f64::NAN;
            }
            a.t - da * w * w / (2.0 * curv)
        }
    }
}

fn pick(z: f64, lo: f64, hi: f64) -> f64 {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if z.is_finite() {
        z.clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    }
}

/// Bracketing/sectioning search for a step satisfying the strong Wolfe
/// conditions, starting from trial step `t0`.
pub fn wolfe_search(
    phi: &mut impl LineFunction,
    f0: f64,
    slope0: f64,
    t0: f64,
    p: &WolfeParams,
) -> Result<Step> {
    if !(slope0 < 0.0) {
        return Err(Error::NotDescentDirection(slope0));
    }
    let armijo = |t: f64, f: f64| f <= f0 + p.rho * t * slope0;
    let curvature = |d: f64| d.abs() <= -p.sigma * slope0;
    let mut trials = 0;
    let mut prev = Pt {
        t: 0.0,
        f: f0,
        d: Some(slope0),
    };
    let mut t = t0;
    let (mut lo, mut hi) = loop {
        if trials >= p.max_trials {
            return Err(Error::LineSearchFailed(trials));
        }
        trials += 1;
        let f = finite_or_inf(phi.value(t))?;
        if !armijo(t, f) || f >= prev.f {
            break (prev, Pt { t, f, d: None });
        }
        let d = phi.slope(t)?;
        if curvature(d) {
            return Ok(Step { t, f });
        }
        let cur = Pt { t, f, d: Some(d) };
        if d >= 0.0 {
            break (cur, prev);
        }
        let inc = t - prev.t;
        let next = pick(interpolate(prev, cur), t + (p.redrate - 1.0) * inc, t + p.t1 * inc);
        prev = cur;
        t = next;
    };
    loop {
        let w = hi.t - lo.t;
        if trials >= p.max_trials || w.abs() <= f64::EPSILON * lo.t.abs().max(1e-300) {
            return if lo.t > 0.0 {
                Ok(Step { t: lo.t, f: lo.f })
            } else {
                Err(Error::LineSearchFailed(trials))
            };
        }
        trials += 1;
        let t = pick(interpolate(lo, hi), lo.t + p.t2 * w, hi.t - p.t3 * w);
        let f = finite_or_inf(phi.value(t))?;
        if !armijo(t, f) || f >= lo.f {
            hi = Pt { t, f, d: None };
            continue;
        }
        let d = phi.slope(t)?;
        if curvature(d) {
            return Ok(Step { t, f });
        }
        let cur = Pt { t, f, d: Some(d) };
        if (hi.t - lo.t) * d >= 0.0 {
            hi = lo;
        }
        lo = cur;
    }
}
