//! Branch-free `exp` for non-positive arguments.
//!
//! Kernel evaluation only ever exponentiates `-0.5 * d` with `d >= 0`, so the
//! overflow half of the range is not needed. The body is plain arithmetic and
//! bit manipulation, which lets the compiler vectorize loops over slices.
//! Accuracy is within a few ulp of `f64::exp` for normal results.

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
// 1.5 * 2^52: adding it rounds to the nearest integer held in the low mantissa bits.
const ROUND_SHIFT: f64 = 6_755_399_441_055_744.0;
// Below this the true result rounds to zero.
const MIN_ARG: f64 = -746.0;
const EXP_BIAS: i64 = 600;
const TWO_POW_NEG_BIAS: f64 = f64::from_bits(((1023 - EXP_BIAS) as u64) << 52);

// Taylor coefficients 1/k!, k = 2..=12; |r| <= ln(2)/2 keeps the truncation below 2e-16.
const C2: f64 = 1.0 / 2.0;
const C3: f64 = 1.0 / 6.0;
const C4: f64 = 1.0 / 24.0;
const C5: f64 = 1.0 / 120.0;
const C6: f64 = 1.0 / 720.0;
const C7: f64 = 1.0 / 5040.0;
const C8: f64 = 1.0 / 40320.0;
const C9: f64 = 1.0 / 362_880.0;
const C10: f64 = 1.0 / 3_628_800.0;
const C11: f64 = 1.0 / 39_916_800.0;
const C12: f64 = 1.0 / 479_001_600.0;

#[cfg(target_feature = "fma")]
#[inline(always)]
fn fma(a: f64, b: f64, c: f64) -> f64 {
    a.mul_add(b, c)
}

// Without hardware FMA, `mul_add` is a slow library call.
#[cfg(not(target_feature = "fma"))]
#[inline(always)]
fn fma(a: f64, b: f64, c: f64) -> f64 {
    a * b + c
}

/// `e^x` for `x <= 0`. Positive inputs are not supported (they are clamped by
/// callers that compute squared distances).
#[inline(always)]
pub fn exp_nonpositive(x: f64) -> f64 {
    let x = x.max(MIN_ARG);
    let shifted = x * LOG2_E + ROUND_SHIFT;
    let n = shifted - ROUND_SHIFT;
    let n_int = (shifted.to_bits() as i64).wrapping_sub(ROUND_SHIFT.to_bits() as i64);
    let r = (x - n * LN2_HI) - n * LN2_LO;

    // Estrin's scheme: a shallow dependency tree instead of one long chain.
    let r2 = r * r;
    let r4 = r2 * r2;
    let s0 = fma(fma(C3, r, C2), r2, 1.0 + r);
    let s1 = fma(C7, r, C6);
    let s1 = fma(s1, r2, fma(C5, r, C4));
    let s2 = fma(C12, r2, fma(C11, r, C10));
    let s2 = fma(s2, r2, fma(C9, r, C8));
    let p = fma(fma(s2, r4, s1), r4, s0);

    // 2^(n + BIAS) is always normal for n in [-1077, 0]; the exact factor
    // 2^-BIAS brings subnormal results down without a data-dependent branch.
    let scale = f64::from_bits(((n_int + 1023 + EXP_BIAS) as u64) << 52);
    p * scale * TWO_POW_NEG_BIAS
}

/// In-place `v[i] = scale * exp(v[i])` over a slice of non-positive values.
#[inline]
pub(crate) fn scaled_exp_in_place(values: &mut [f64], scale: f64) {
    for v in values.iter_mut() {
        *v = scale * exp_nonpositive(*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn exact_points() {
        assert_eq!(exp_nonpositive(0.0), 1.0);
        assert!(rel_err(exp_nonpositive(-1.0), std::f64::consts::E.recip()) < 1e-15);
        assert!(rel_err(exp_nonpositive(-std::f64::consts::LN_2), 0.5) < 1e-15);
    }

    #[test]
    fn far_tail_underflows_to_zero() {
        assert_eq!(exp_nonpositive(-1e6), 0.0);
        assert_eq!(exp_nonpositive(-800.0), 0.0);
        assert_eq!(exp_nonpositive(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn subnormal_range_tracks_std() {
        for &x in &[-709.0, -720.5, -740.0, -744.0] {
            let a = exp_nonpositive(x);
            let b = x.exp();
            assert!(
                a > 0.0 && (a - b).abs() <= b * 1e-6 + 1e-322,
                "{x}: {a} vs {b}"
            );
        }
    }

    proptest! {
        #[test]
        fn matches_std_exp(x in -708.0f64..=0.0) {
            prop_assert!(rel_err(exp_nonpositive(x), x.exp()) < 4e-16);
        }

        #[test]
        fn matches_std_exp_near_zero(x in -5.0f64..=0.0) {
            prop_assert!(rel_err(exp_nonpositive(x), x.exp()) < 4e-16);
        }
    }
}
