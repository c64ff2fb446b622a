//! Benchmark functions with their standard boxes and known optima.
//!
//! | name | box | minimum |
//! |------|-----|---------|
//! | `sphere` | [-100, 100] | 0 at 0 |
//! | `ackley` | [-32.768, 32.768] | 0 at 0 |
//! | `rastrigin` | [-5.12, 5.12] | 0 at 0 |
//! | `rosenbrock` | [-100, 100] | 0 at 1 |
//! | `rosenbrock_shifted` | [-100, 100] | `shift.bias` at `shift.o` |
//! | `dropwave` | [-5.12, 5.12] | -1 at 0 |
//! | `schwefel` | [-500, 500] | ~1.27e-5 D at 420.9687... |
//! | `griewank` | [-600, 600] | 0 at 0 |
//! | `trid` | [-D^2, D^2] | -D(D+4)(D-1)/6 at i(D+1-i) |
//! | `michalewicz` | [0, pi] | unknown, bounded below by -D |
//! | `weierstrass` | [-0.5, 0.5] | 0 at 0 |

use std::f64::consts::{E, PI};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::function::ObjectiveFunction;
use crate::params::{ParamMap, ParamValue};
use crate::rng;

pub const NAMES: [&str; 11] = [
    "sphere",
    "ackley",
    "rastrigin",
    "rosenbrock",
    "rosenbrock_shifted",
    "dropwave",
    "schwefel",
    "griewank",
    "trid",
    "michalewicz",
    "weierstrass",
];

pub const SCHWEFEL_ARGMIN: f64 = 420.968_746_359_982;
const SCHWEFEL_OFFSET: f64 = 418.9829;
const SHIFT_BOX: f64 = 100.0;
pub const DEFAULT_SHIFT_BIAS: f64 = 390.0;
const SHIFT_STREAM: u64 = 0x5817_f7;

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let a = w[1] - w[0] * w[0];
            let b = 1.0 - w[0];
            100.0 * a * a + b * b
        })
        .sum()
}

pub fn dropwave(x: &[f64]) -> f64 {
    let r2 = sphere(x);
    -(1.0 + (12.0 * r2.sqrt()).cos()) / (0.5 * r2 + 2.0)
}

pub fn schwefel(x: &[f64]) -> f64 {
    SCHWEFEL_OFFSET * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

pub fn griewank(x: &[f64]) -> f64 {
    let s = sphere(x) / 4000.0;
    let p: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    1.0 + s - p
}

pub fn trid(x: &[f64]) -> f64 {
    let a: f64 = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
    let b: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    a - b
}

pub fn michalewicz(x: &[f64]) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(20))
        .sum::<f64>()
}

const W_A: f64 = 0.5;
const W_B: f64 = 3.0;
const W_KMAX: i32 = 20;

pub fn weierstrass(x: &[f64]) -> f64 {
    let term = |z: f64| -> f64 {
        (0..=W_KMAX)
            .map(|k| W_A.powi(k) * (2.0 * PI * W_B.powi(k) * z).cos())
            .sum()
    };
    let body: f64 = x.iter().map(|v| term(v + 0.5)).sum();
    body - x.len() as f64 * term(0.5)
}

/// Shift vector and bias of the shifted Rosenbrock function.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    pub o: Vec<f64>,
    pub bias: f64,
}

impl ShiftSpec {
    /// Draws `o` uniformly inside the central 90% of [-100, 100]^dim.
    pub fn random(seed: u64, dim: usize, bias: f64) -> Self {
        let mut r = rng::stream(seed, &[SHIFT_STREAM]);
        let half = 0.9 * SHIFT_BOX;
        let o = (0..dim).map(|_| r.random_range(-half..=half)).collect();
        Self { o, bias }
    }

    /// Reads `shift.o` and `shift.bias`; without `shift.o` the vector is
    /// drawn from `shift.seed` (default 0) for dimension `dim`.
    pub fn from_params(p: &ParamMap, dim: usize) -> Result<Self> {
        let bias = p.real_or("shift.bias", DEFAULT_SHIFT_BIAS)?;
        if p.contains("shift.o") {
            let o = p.vector("shift.o")?.to_vec();
            if o.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: o.len(),
                });
            }
            Ok(Self { o, bias })
        } else {
            Ok(Self::random(p.int_or("shift.seed", 0)? as u64, dim, bias))
        }
    }

    pub fn write_params(&self, p: &mut ParamMap) {
        p.set("shift.o", ParamValue::Vec(self.o.clone()));
        p.set("shift.bias", self.bias);
    }
}

pub fn shifted_rosenbrock(x: &[f64], spec: &ShiftSpec) -> Result<f64> {
    if x.len() != spec.o.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.o.len(),
            actual: x.len(),
        });
    }
    let z: Vec<f64> = x.iter().zip(&spec.o).map(|(v, o)| v - o + 1.0).collect();
    Ok(rosenbrock(&z) + spec.bias)
}

/// Registered function as an [`ObjectiveFunction`].
#[derive(Debug, Clone, Copy)]
pub struct Benchmark {
    name: &'static str,
    f: fn(&[f64]) -> f64,
}

impl ObjectiveFunction for Benchmark {
    fn name(&self) -> &str {
        self.name
    }

    fn eval(&self, x: &[f64], _params: &ParamMap) -> f64 {
        (self.f)(x)
    }
}

/// Shifted Rosenbrock bound to one [`ShiftSpec`].
#[derive(Debug, Clone)]
pub struct ShiftedRosenbrock {
    spec: ShiftSpec,
}

impl ShiftedRosenbrock {
    pub fn new(spec: ShiftSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &ShiftSpec {
        &self.spec
    }
}

impl ObjectiveFunction for ShiftedRosenbrock {
    fn name(&self) -> &str {
        "rosenbrock_shifted"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.spec.o.len())
    }

    fn eval(&self, x: &[f64], _params: &ParamMap) -> f64 {
        shifted_rosenbrock(x, &self.spec).unwrap_or(f64::NAN)
    }
}

/// Registry metadata for one function.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkEntry {
    pub name: &'static str,
    f: fn(&[f64]) -> f64,
    min_dim: usize,
    pub differentiable: bool,
}

impl BenchmarkEntry {
    pub fn min_dim(&self) -> usize {
        self.min_dim
    }

    pub fn function(&self) -> Benchmark {
        Benchmark {
            name: self.name,
            f: self.f,
        }
    }

    pub fn default_box(&self, dim: usize) -> (f64, f64) {
        default_box_of(self.name, dim).expect("registered")
    }

    pub fn known_minimizer(&self, dim: usize) -> Option<Vec<f64>> {
        match self.name {
            "sphere" | "ackley" | "rastrigin" | "dropwave" | "griewank" | "weierstrass" => Some(vec![0.0; dim]),
            "rosenbrock" => Some(vec![1.0; dim]),
            "schwefel" => Some(vec![SCHWEFEL_ARGMIN; dim]),
            "trid" => Some((1..=dim).map(|i| (i * (dim + 1 - i)) as f64).collect()),
            _ => None,
        }
    }

    pub fn known_min(&self, dim: usize) -> Option<f64> {
        let d = dim as f64;
        match self.name {
            "sphere" | "ackley" | "rastrigin" | "rosenbrock" | "griewank" | "weierstrass" => Some(0.0),
            "dropwave" => Some(-1.0),
            "schwefel" => Some(d * (SCHWEFEL_OFFSET - SCHWEFEL_ARGMIN * SCHWEFEL_ARGMIN.sqrt().sin())),
            "trid" => Some(-d * (d + 4.0) * (d - 1.0) / 6.0),
            _ => None,
        }
    }

    /// Lower bound on the function, when one is known.
    pub fn lower_bound(&self, dim: usize) -> Option<f64> {
        match self.name {
            "michalewicz" => Some(-(dim as f64)),
            _ => self.known_min(dim),
        }
    }
}

macro_rules! entry {
    ($name:literal, $f:expr, $min_dim:expr, $diff:expr) => {
        BenchmarkEntry {
            name: $name,
            f: $f,
            min_dim: $min_dim,
            differentiable: $diff,
        }
    };
}

/// Fixed-spec functions (everything except `rosenbrock_shifted`).
pub const ENTRIES: [BenchmarkEntry; 10] = [
    entry!("sphere", sphere, 1, true),
    entry!("ackley", ackley, 2, true),
    entry!("rastrigin", rastrigin, 1, true),
    entry!("rosenbrock", rosenbrock, 2, true),
    entry!("dropwave", dropwave, 2, true),
    entry!("schwefel", schwefel, 1, false),
    entry!("griewank", griewank, 2, true),
    entry!("trid", trid, 2, true),
    entry!("michalewicz", michalewicz, 1, true),
    entry!("weierstrass", weierstrass, 1, true),
];

pub fn entry(name: &str) -> Result<&'static BenchmarkEntry> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownFunction(name.to_owned()))
}

pub fn is_registered(name: &str) -> bool {
    NAMES.contains(&name)
}

/// Standard box `(lo, hi)` applied to every coordinate.
pub fn default_box(name: &str, dim: usize) -> Result<(f64, f64)> {
    default_box_of(name, dim).ok_or_else(|| Error::UnknownFunction(name.to_owned()))
}

fn default_box_of(name: &str, dim: usize) -> Option<(f64, f64)> {
    let d2 = (dim * dim) as f64;
    Some(match name {
        "sphere" | "rosenbrock" | "rosenbrock_shifted" => (-100.0, 100.0),
        "ackley" => (-32.768, 32.768),
        "rastrigin" | "dropwave" => (-5.12, 5.12),
        "schwefel" => (-500.0, 500.0),
        "griewank" => (-600.0, 600.0),
        "trid" => (-d2, d2),
        "michalewicz" => (0.0, PI),
        "weierstrass" => (-0.5, 0.5),
        _ => return None,
    })
}

/// Builds the named function. `rosenbrock_shifted` takes its shift from
/// `params` (see [`ShiftSpec::from_params`]) and needs `dim`.
pub fn build(name: &str, dim: usize, params: &ParamMap) -> Result<Arc<dyn ObjectiveFunction>> {
    if name == "rosenbrock_shifted" {
        return Ok(Arc::new(ShiftedRosenbrock::new(ShiftSpec::from_params(params, dim)?)));
    }
    Ok(Arc::new(entry(name)?.function()))
}

pub fn eval_benchmark(name: &str, x: &[f64]) -> Result<f64> {
    if name == "rosenbrock_shifted" {
        check_dim(2, x.len())?;
        let spec = ShiftSpec::from_params(&ParamMap::new(), x.len())?;
        return shifted_rosenbrock(x, &spec);
    }
    let e = entry(name)?;
    check_dim(e.min_dim, x.len())?;
    Ok((e.f)(x))
}

fn check_dim(min: usize, actual: usize) -> Result<()> {
    if actual < min {
        Err(Error::DimensionMismatch { expected: min, actual })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spot_values() {
        assert_eq!(sphere(&[0.0; 3]), 0.0);
        assert!(ackley(&[0.0; 5]).abs() < 1e-15);
        assert_eq!(dropwave(&[0.0, 0.0]), -1.0);
        assert_eq!(trid(&[3.0, 4.0, 3.0]), -7.0);
        assert!(schwefel(&[420.9687, 420.9687]).abs() <= 1e-3);
        assert_eq!(rosenbrock(&[1.0; 4]), 0.0);
    }

    #[test]
    fn schwefel_constants_match_high_precision() {
        // 50-digit root of sin(sqrt x) + sqrt(x)/2 cos(sqrt x) = 0 and the
        // resulting per-coordinate minimum.
        assert!((SCHWEFEL_ARGMIN - 420.968_746_359_982_027_311_8).abs() < 1e-12);
        let per_coord = entry("schwefel").unwrap().known_min(1).unwrap();
        assert!((per_coord - 1.272_756_629_372_521_4e-5).abs() < 1e-12);
    }

    #[test]
    fn known_minima_certify() {
        for e in &ENTRIES {
            for d in [2, 10, 50] {
                if let (Some(x), Some(m)) = (e.known_minimizer(d), e.known_min(d)) {
                    let v = eval_benchmark(e.name, &x).unwrap();
                    assert!((v - m).abs() <= 1e-9, "{} D={d}: {v} vs {m}", e.name);
                }
            }
        }
    }

    #[test]
    fn trid_closed_form() {
        for d in [3usize, 5, 10] {
            let x: Vec<f64> = (1..=d).map(|i| (i * (d + 1 - i)) as f64).collect();
            let df = d as f64;
            assert_eq!(trid(&x), -df * (df + 4.0) * (df - 1.0) / 6.0);
        }
    }

    #[test]
    fn minimizers_are_local_minima() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for e in &ENTRIES {
            let d = 10;
            let Some(x) = e.known_minimizer(d) else { continue };
            let f0 = (e.f)(&x);
            for _ in 0..100 {
                let mut u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = sphere(&u).sqrt();
                u.iter_mut().for_each(|v| *v *= 1e-4 / n);
                let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
                assert!((e.f)(&y) >= f0, "{}", e.name);
            }
        }
    }

    #[test]
    fn michalewicz_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..PI)).collect();
            assert!(michalewicz(&x) >= -5.0);
        }
    }

    #[test]
    fn finite_and_pure_on_default_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for e in &ENTRIES {
            let d = 7;
            let (lo, hi) = e.default_box(d);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
                let a = (e.f)(&x);
                assert!(a.is_finite(), "{}", e.name);
                assert_eq!(a.to_bits(), (e.f)(&x).to_bits());
            }
        }
    }

    #[test]
    fn shifted_optimum_is_bias() {
        for s in 0..100 {
            let spec = ShiftSpec::random(s, 10, 390.0);
            assert!(spec.o.iter().all(|v| v.abs() <= 90.0));
            assert_eq!(shifted_rosenbrock(&spec.o, &spec).unwrap(), 390.0);
        }
        let ones = ShiftSpec { o: vec![1.0; 4], bias: 0.0 };
        assert_eq!(shifted_rosenbrock(&[1.0; 4], &ones).unwrap(), 0.0);
    }

    #[test]
    fn unit_shift_reduces_to_plain() {
        let spec = ShiftSpec { o: vec![1.0; 6], bias: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            // Dyadic points keep x - 1 + 1 exact.
            let x: Vec<f64> = (0..6)
                .map(|_| rng.random_range(-102_400i32..102_400) as f64 / 1024.0)
                .collect();
            assert_eq!(shifted_rosenbrock(&x, &spec).unwrap(), rosenbrock(&x));
        }
    }

    #[test]
    fn shift_from_params() {
        let mut p = ParamMap::new();
        let spec = ShiftSpec { o: vec![2.0, 3.0], bias: 1.5 };
        spec.write_params(&mut p);
        assert_eq!(ShiftSpec::from_params(&p, 2).unwrap(), spec);
        assert!(matches!(
            ShiftSpec::from_params(&p, 3),
            Err(Error::DimensionMismatch { .. })
        ));
        let f = build("rosenbrock_shifted", 2, &p).unwrap();
        assert_eq!(f.eval(&[2.0, 3.0], &p), 1.5);
        assert_eq!(f.dim(), Some(2));
    }

    #[test]
    fn errors() {
        assert!(matches!(eval_benchmark("nope", &[1.0]), Err(Error::UnknownFunction(_))));
        assert!(matches!(
            eval_benchmark("rosenbrock", &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(default_box("nope", 2).is_err());
        assert_eq!(default_box("rosenbrock_shifted", 1000).unwrap(), (-100.0, 100.0));
        assert_eq!(default_box("michalewicz", 3).unwrap(), (0.0, PI));
        assert_eq!(default_box("trid", 4).unwrap(), (-16.0, 16.0));
    }
}
