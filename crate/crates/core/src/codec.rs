//! Genotype/argument conversion.
//!
//! Search operators act on a genotype; the objective function sees the
//! argument produced by a codec.

/// Converts between an algorithm's genotype `G` and a function argument.
pub trait GenotypeCodec<G>: Send + Sync {
    fn to_argument(&self, genotype: &G) -> Vec<f64>;
    fn to_genotype(&self, argument: &[f64]) -> G;
}

/// The genotype is the argument.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl GenotypeCodec<Vec<f64>> for IdentityCodec {
    fn to_argument(&self, genotype: &Vec<f64>) -> Vec<f64> {
        genotype.clone()
    }

    fn to_genotype(&self, argument: &[f64]) -> Vec<f64> {
        argument.to_vec()
    }
}

/// Single-precision genotype for a double-precision function. Round-trips
/// exactly for arguments representable as `f32`.
#[derive(Debug, Clone, Copy, Default)]
pub struct F32Codec;

impl GenotypeCodec<Vec<f32>> for F32Codec {
    fn to_argument(&self, genotype: &Vec<f32>) -> Vec<f64> {
        genotype.iter().map(|&g| f64::from(g)).collect()
    }

    fn to_genotype(&self, argument: &[f64]) -> Vec<f32> {
        argument.iter().map(|&a| a as f32).collect()
    }
}

/// Integer-lattice genotype: the argument is `origin + step * k`.
#[derive(Debug, Clone)]
pub struct LatticeCodec {
    pub origin: f64,
    pub step: f64,
}

impl GenotypeCodec<Vec<i64>> for LatticeCodec {
    fn to_argument(&self, genotype: &Vec<i64>) -> Vec<f64> {
        genotype
            .iter()
            .map(|&k| self.origin + self.step * k as f64)
            .collect()
    }

    fn to_genotype(&self, argument: &[f64]) -> Vec<i64> {
        argument
            .iter()
            .map(|&a| ((a - self.origin) / self.step).round() as i64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn f32_codec_round_trips_f32_arguments(v in proptest::collection::vec(-1e30f32..1e30, 1..16)) {
            let arg: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
            let c = F32Codec;
            prop_assert_eq!(c.to_argument(&c.to_genotype(&arg)), arg);
        }

        #[test]
        fn lattice_codec_round_trips_lattice_points(k in proptest::collection::vec(-1000i64..1000, 1..16)) {
            let c = LatticeCodec { origin: -3.0, step: 0.25 };
            let arg = c.to_argument(&k);
            prop_assert_eq!(c.to_argument(&c.to_genotype(&arg)), arg);
        }
    }
}
