//! Scalar special functions used throughout the crate: the Gaussian tail
//! probability, the binary entropy function, and standard/conditional normal
//! densities.
//!
//! Public entry points validate their domains and return [`Error`] on
//! violations; the crate-internal `*_raw` variants skip validation for use in
//! quadrature inner loops where inputs are finite by construction.

use crate::error::{Error, Result};

/// 1/sqrt(2*pi), the normalization of the standard normal density.
pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_68;

/// Gaussian tail probability Q(z) = P(Z > z) for Z ~ N(0,1).
///
/// Computed as erfc(z/sqrt(2))/2 for numerical stability in the far tail
/// (a naive 1 - CDF cancels catastrophically beyond z ~ 8).
///
/// # Errors
/// Returns [`Error::NonFinite`] if `z` is NaN or infinite.
pub fn q_func(z: f64) -> Result<f64> {
    ensure_finite("z", z)?;
    Ok(q_raw(z))
}

#[inline]
pub(crate) fn q_raw(z: f64) -> f64 {
    0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Binary entropy h(p) = -p log2 p - (1-p) log2(1-p), with h(0) = h(1) = 0.
///
/// # Errors
/// Returns [`Error::InvalidParam`] if `p` is outside [0, 1] or not finite.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParam(format!(
            "binary_entropy needs p in [0, 1], got {p}"
        )));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Standard normal density at `x`.
///
/// # Errors
/// Returns [`Error::NonFinite`] if `x` is NaN or infinite.
pub fn normal_pdf(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(normal_pdf_raw(x))
}

#[inline]
pub(crate) fn normal_pdf_raw(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Conditional density of V given U = u for a *standard* bivariate normal
/// pair with correlation `r`:
///
/// ```text
/// phi(v | u) = exp(-(v - r u)^2 / (2 (1 - r^2))) / sqrt(2 pi (1 - r^2))
/// ```
///
/// Callers working with non-unit scales standardize the arguments and divide
/// by the relevant sigma themselves.
///
/// # Errors
/// [`Error::DegenerateCorrelation`] if |r| >= 1, [`Error::NonFinite`] for
/// non-finite `v`/`u`.
pub fn cond_pdf(v: f64, u: f64, r: f64) -> Result<f64> {
    ensure_finite("v", v)?;
    ensure_finite("u", u)?;
    if !r.is_finite() || r.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation(r));
    }
    Ok(cond_pdf_raw(v, u, r))
}

#[inline]
pub(crate) fn cond_pdf_raw(v: f64, u: f64, r: f64) -> f64 {
    let one_m_r2 = 1.0 - r * r;
    let d = v - r * u;
    INV_SQRT_2PI / one_m_r2.sqrt() * (-0.5 * d * d / one_m_r2).exp()
}

fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { name, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn q_func_matches_high_precision_reference() {
        // Reference values computed with 40-digit arithmetic.
        assert_abs_diff_eq!(q_func(0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            q_func(1.0).unwrap(),
            0.158_655_253_931_457_05,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            q_func(5.0).unwrap(),
            2.866_515_718_791_939e-7,
            epsilon = 1e-18
        );
    }

    #[test]
    fn q_func_complement_identity() {
        for &z in &[0.3, 1.7, 4.2] {
            let s = q_func(z).unwrap() + q_func(-z).unwrap();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn q_func_monotone_bounded_on_random_inputs() {
        // Strictly decreasing and inside (0,1) on a deterministic pseudo-random
        // sample of ordered pairs. The band is [-8, 8]: beyond it the value is
        // within half an ulp of an endpoint and correctly saturates in f64.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let a: f64 = rng.random_range(-8.0..8.0);
            let b: f64 = rng.random_range(-8.0..8.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let qlo = q_func(lo).unwrap();
            let qhi = q_func(hi).unwrap();
            assert!(qlo > 0.0 && qlo < 1.0, "Q({lo}) = {qlo} outside (0,1)");
            if lo < hi {
                assert!(qlo > qhi, "Q not decreasing: Q({lo}) <= Q({hi})");
            }
        }
        // Far-tail saturation is exact, not an error.
        assert_eq!(q_func(-9.0).unwrap(), 1.0);
        assert_eq!(q_func(50.0).unwrap(), 0.0);
    }

    #[test]
    fn q_func_rejects_non_finite() {
        assert!(q_func(f64::NAN).is_err());
        assert!(q_func(f64::INFINITY).is_err());
    }

    #[test]
    fn binary_entropy_reference_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        // h(0.158655) from the 40-digit oracle.
        assert_abs_diff_eq!(
            binary_entropy(0.158_655).unwrap(),
            0.631_082_156_242_511_3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn binary_entropy_symmetry_and_domain() {
        for &p in &[0.01, 0.2, 0.37, 0.49] {
            let a = binary_entropy(p).unwrap();
            let b = binary_entropy(1.0 - p).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            assert!(a > 0.0 && a < 1.0);
        }
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn normal_pdf_peak_and_symmetry() {
        assert_abs_diff_eq!(
            normal_pdf(0.0).unwrap(),
            0.398_942_280_401_432_68,
            epsilon = 1e-15
        );
        for &x in &[0.5, 1.3, 3.0] {
            assert_abs_diff_eq!(
                normal_pdf(x).unwrap(),
                normal_pdf(-x).unwrap(),
                epsilon = 0.0
            );
        }
        assert!(normal_pdf(f64::INFINITY).is_err());
    }

    #[test]
    fn cond_pdf_reduces_to_marginal_at_r_zero() {
        for &(v, u) in &[(0.3, -1.2), (1.5, 0.4), (-2.0, 2.0)] {
            assert_abs_diff_eq!(
                cond_pdf(v, u, 0.0).unwrap(),
                normal_pdf(v).unwrap(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn cond_pdf_rejects_degenerate_correlation() {
        assert!(cond_pdf(0.0, 0.0, 1.0).is_err());
        assert!(cond_pdf(0.0, 0.0, -1.0).is_err());
        assert!(cond_pdf(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn cond_pdf_integrates_to_one_over_wide_grid() {
        // Trapezoid over [-8, 8] with 4001 nodes; the conditional for |u| <= 3
        // and |r| <= 0.95 has essentially all mass inside.
        let n = 4001;
        let h = 8.0;
        let d = 2.0 * h / (n - 1) as f64;
        for &(u, r) in &[(0.0, 0.0), (2.0, 0.6), (-3.0, 0.95), (3.0, -0.8)] {
            let mut total = 0.0;
            for i in 0..n {
                let v = -h + i as f64 * d;
                let w = if i == 0 || i == n - 1 { 0.5 * d } else { d };
                total += w * cond_pdf(v, u, r).unwrap();
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
    }
}
