//! Scalar abstraction for the model math.
//!
//! Everything numeric in the cell, losses, optimizer, and sampler is generic
//! over [`Scalar`], so the same code runs in `f32` or `f64`. Training and the
//! checkpoint format use `f64` (see the crate-root aliases).

use num_traits::{Float, NumAssignOps};
use rand::distributions::uniform::SampleUniform;

/// Floating-point scalar usable by the model: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssignOps + SampleUniform + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Cast an `f64` constant (hyperparameter, literal) into the working scalar.
#[inline]
pub fn cast<T: Scalar>(v: f64) -> T {
    T::from(v).expect("f64 constant representable in scalar type")
}

/// SplitMix64 mixing step. Bijective on `u64`, so distinct inputs always
/// yield distinct child seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cast_roundtrips_simple_constants() {
        assert_eq!(cast::<f64>(0.005), 0.005);
        assert_eq!(cast::<f32>(0.5), 0.5f32);
    }

    #[test]
    fn mix64_is_injective_on_a_window() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u64 {
            assert!(seen.insert(mix64(i)));
        }
    }
}
