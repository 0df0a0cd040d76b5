//! First-order Bessel functions by Maclaurin series.
//!
//! The kernels only ever need `I₁(z)/z` and `J₁(z)/z` for `z² = λ(x² − y²) ≤ λ`,
//! so a power series in `z²` is both exact enough and free of the `0/0` at
//! `z = 0`.

const MAX_TERMS: usize = 400;
const REL_TOL: f64 = 1e-16;

/// `Σ_m s^m (z²/4)^m / (m! (m+1)!)` with `s = ±1`, halved. This is `I₁(z)/z`
/// for `s = +1` and `J₁(z)/z` for `s = -1`.
fn first_order_ratio(z2: f64, sign: f64) -> f64 {
    let q = 0.25 * z2;
    let mut term = 0.5;
    let mut sum = term;
    for m in 0..MAX_TERMS {
        let mf = m as f64;
        term *= sign * q / ((mf + 1.0) * (mf + 2.0));
        sum += term;
        if term.abs() < REL_TOL * sum.abs() {
            break;
        }
    }
    sum
}

/// `I₁(z)/z` as a function of `z²`; tends to 1/2 at the origin.
pub fn i1_over_z(z2: f64) -> f64 {
    first_order_ratio(z2, 1.0)
}

/// `J₁(z)/z` as a function of `z²`; tends to 1/2 at the origin.
pub fn j1_over_z(z2: f64) -> f64 {
    first_order_ratio(z2, -1.0)
}

/// Modified Bessel function of the first kind, order one.
pub fn bessel_i1(z: f64) -> f64 {
    z * i1_over_z(z * z)
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(z: f64) -> f64 {
    z * j1_over_z(z * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun tables 9.1 / 9.8
        assert_relative_eq!(bessel_j1(1.0), 0.440_050_585_744_933_5, max_relative = 1e-14);
        assert_relative_eq!(bessel_j1(2.0), 0.576_724_807_756_873_4, max_relative = 1e-14);
        assert_relative_eq!(bessel_i1(1.0), 0.565_159_103_992_485, max_relative = 1e-14);
        assert_relative_eq!(bessel_i1(3.0), 3.953_370_217_402_609, max_relative = 1e-14);
    }

    #[test]
    fn ratio_limit_at_origin() {
        assert_eq!(i1_over_z(0.0), 0.5);
        assert_eq!(j1_over_z(0.0), 0.5);
        assert!((i1_over_z(1e-14) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn odd_symmetry() {
        for z in [0.3, 1.7, 3.9] {
            assert_eq!(bessel_i1(-z), -bessel_i1(z));
            assert_eq!(bessel_j1(-z), -bessel_j1(z));
        }
    }
}
