//! Standard normal helpers shared by kernels, null models and generators.

use statrs::function::erf::erfc_inv;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * exp_nonpositive(-0.5 * x * x)
}

/// `exp(z)` for `z <= 0`, within a few ulp of `f64::exp`.
///
/// Branch-free so loops over it vectorize: `z = k ln2 + r` with `|r| <= ln2 / 2`,
/// then a degree-13 Taylor polynomial for `exp(r)` and an exponent-field
/// scale by `2^k`. Returns 0 below `-708` and NaN for NaN.
#[inline]
pub fn exp_nonpositive(z: f64) -> f64 {
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let zc = if z < -708.0 { -708.0 } else { z };
    let shifted = zc * std::f64::consts::LOG2_E + SHIFTER;
    let k = shifted - SHIFTER;
    let r = (zc - k * LN2_HI) - k * LN2_LO;
    // Taylor coefficients 1/n!, n = 0..=13, combined by Estrin's scheme.
    const C: [f64; 14] = [
        1.0,
        1.0,
        0.5,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5_040.0,
        1.0 / 40_320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let q = |n: usize| C[n] + C[n + 1] * r;
    let lo = (q(0) + q(2) * r2) + (q(4) + q(6) * r2) * r4;
    let hi = (q(8) + q(10) * r2) + q(12) * r4;
    let p = lo + hi * r8;
    let ki = (shifted.to_bits() as i64).wrapping_sub(SHIFTER.to_bits() as i64);
    let scale = f64::from_bits((ki.wrapping_add(1023) << 52) as u64);
    if z < -708.0 {
        0.0
    } else {
        p * scale
    }
}

pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - cdf(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// Writes `pdf((x - center) * inv_h)` for every `x` in `xs` to `out`.
///
/// Uses AVX-512 or AVX2 when the CPU has them. Fused multiply-add stays disabled, so
/// both paths round identically and give bit-identical results.
pub fn pdf_scaled_into(out: &mut [f64], xs: &[f64], center: f64, inv_h: f64) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU feature was detected at runtime.
            unsafe { pdf_scaled_avx512(out, xs, center, inv_h) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected at runtime.
            unsafe { pdf_scaled_avx2(out, xs, center, inv_h) };
            return;
        }
    }
    pdf_scaled_generic(out, xs, center, inv_h);
}

#[inline(always)]
fn pdf_scaled_generic(out: &mut [f64], xs: &[f64], center: f64, inv_h: f64) {
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = pdf((x - center) * inv_h);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn pdf_scaled_avx2(out: &mut [f64], xs: &[f64], center: f64, inv_h: f64) {
    pdf_scaled_generic(out, xs, center, inv_h);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn pdf_scaled_avx512(out: &mut [f64], xs: &[f64], center: f64, inv_h: f64) {
    pdf_scaled_generic(out, xs, center, inv_h);
}

/// Inverse CDF on the open interval (0, 1).
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Gaussian smoothing kernel `K_h(x) = phi(x / h) / h`.
#[inline]
pub fn kernel(x: f64, h: f64) -> f64 {
    pdf(x / h) / h
}
