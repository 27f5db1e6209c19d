//! Standard normal distribution functions that stay accurate far into the
//! tails.
//!
//! Probabilities of intervals are handled in log space. For an interval on
//! one side of zero the mass is written as a difference of tail
//! probabilities sharing that side, e.g. for `0 ≤ u < v`
//!
//! ```text
//! Q(u) - Q(v) = Q(u) · (1 - exp(ln Q(v) - ln Q(u)))
//! ```
//!
//! which never subtracts two nearly equal numbers close to one.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::{erf, erfc};

/// Above this point `ln Q(t)` comes from the Mills-ratio continued fraction.
const CONTINUED_FRACTION_FROM: f64 = 8.0;

/// Standard normal CDF.
pub fn cdf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-t * FRAC_1_SQRT_2)
}

/// Upper tail `Q(t) = 1 - Φ(t)`.
pub fn sf(t: f64) -> f64 {
    cdf(-t)
}

/// `ln Q(t)`, finite for every finite `t`.
pub fn ln_sf(t: f64) -> f64 {
    if t == f64::INFINITY {
        f64::NEG_INFINITY
    } else if t == f64::NEG_INFINITY {
        0.0
    } else if t < 0.0 {
        (-sf(-t)).ln_1p()
    } else if t < CONTINUED_FRACTION_FROM {
        (0.5 * erfc(t * FRAC_1_SQRT_2)).ln()
    } else {
        ln_pdf(t) + mills_ratio(t).ln()
    }
}

/// `ln Φ(t)`.
pub fn ln_cdf(t: f64) -> f64 {
    ln_sf(-t)
}

fn ln_pdf(t: f64) -> f64 {
    -0.5 * t * t - 0.5 * (2.0 * PI).ln()
}

/// `Q(t) / φ(t)` for `t ≥ 8`, by backward evaluation of
/// `1 / (t + 1/(t + 2/(t + 3/(t + ...))))`.
fn mills_ratio(t: f64) -> f64 {
    let mut tail = t;
    for k in (1..=60).rev() {
        tail = t + k as f64 / tail;
    }
    1.0 / tail
}

/// `ln(Φ(v) - Φ(u))` for `u ≤ v` (either end may be infinite).
pub fn ln_interval_mass(u: f64, v: f64) -> f64 {
    if !(u < v) {
        return f64::NEG_INFINITY;
    }
    if u >= 0.0 {
        // Q(u) - Q(v)
        let lu = ln_sf(u);
        let lv = ln_sf(v);
        lu + ln_one_minus_exp(lv - lu)
    } else if v <= 0.0 {
        // Φ(v) - Φ(u)
        let lv = ln_cdf(v);
        let lu = ln_cdf(u);
        lv + ln_one_minus_exp(lu - lv)
    } else {
        // Straddles zero: (Φ(v) - 1/2) + (1/2 - Φ(u)), both terms positive.
        let upper = if v.is_infinite() { 1.0 } else { erf(v * FRAC_1_SQRT_2) };
        let lower = if u.is_infinite() { 1.0 } else { erf(-u * FRAC_1_SQRT_2) };
        (0.5 * (upper + lower)).ln()
    }
}

/// `ln(1 - e^x)` for `x ≤ 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert_relative_eq!(cdf(1.959_963_984_540_054), 0.975, max_relative = 1e-14);
        assert_relative_eq!(sf(5.0), 2.866_515_718_791_939e-7, max_relative = 1e-13);
    }

    #[test]
    fn ln_sf_is_continuous_across_branches() {
        let below = ln_sf(CONTINUED_FRACTION_FROM - 1e-9);
        let at = ln_sf(CONTINUED_FRACTION_FROM);
        assert!((below - at).abs() < 1e-7);
        // Q(8) = 6.220960574271784e-16
        assert_relative_eq!(at.exp(), 6.220_960_574_271_784e-16, max_relative = 1e-12);
    }

    #[test]
    fn ln_sf_deep_tail_is_finite() {
        // ln Q(40) ≈ -804.6084420137538
        assert_relative_eq!(ln_sf(40.0), -804.608_442_013_753_8, max_relative = 1e-13);
        assert!(ln_sf(-40.0).abs() < 1e-300);
        assert_eq!(ln_sf(f64::INFINITY), f64::NEG_INFINITY);
        assert_eq!(ln_sf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn interval_masses() {
        assert_eq!(ln_interval_mass(f64::NEG_INFINITY, f64::INFINITY), 0.0);
        assert_relative_eq!(ln_interval_mass(f64::NEG_INFINITY, 0.0).exp(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(ln_interval_mass(-1.0, 1.0).exp(), 0.682_689_492_137_085_9, max_relative = 1e-14);
        // Tiny symmetric interval: mass ≈ 2ε φ(0).
        let eps = 1e-10;
        let m = ln_interval_mass(-eps, eps).exp();
        assert_relative_eq!(m, 2.0 * eps / (2.0 * PI).sqrt(), max_relative = 1e-9);
        // Deep tails mirror each other.
        assert_relative_eq!(
            ln_interval_mass(30.0, 31.0),
            ln_interval_mass(-31.0, -30.0),
            max_relative = 1e-15
        );
        assert_eq!(ln_interval_mass(1.0, 1.0), f64::NEG_INFINITY);
    }
}
