//! Selection-adjusted p-values from the polyhedral lemma.
//!
//! For `z ~ N(μ, Σ)` observed on the event `A z ≤ b`, and a direction `η`,
//! the statistic `ηᵀz` is a normal with mean `ηᵀμ` and variance `ηᵀΣη`
//! truncated to `[V⁻, V⁺]`, where with `c = Ση / (ηᵀΣη)` and `α = A c`
//!
//! ```text
//! V⁻ = max_{j: α_j < 0} (b_j - (Az)_j) / α_j + ηᵀz
//! V⁺ = min_{j: α_j > 0} (b_j - (Az)_j) / α_j + ηᵀz
//! ```
//!
//! Evaluating that truncated CDF at `ηᵀz` with `ηᵀμ = 0` gives a pivot that
//! is uniform under the null. Here `b = 0` throughout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::screening::{ScreenState, SelectionConstraints};

/// Rows with `|α_j|` at or below this only get a feasibility check.
pub const ALPHA_ZERO_TOL: f64 = 1e-12;

/// Relative slack allowed when checking `A z ≤ 0`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Intervals narrower than this fraction of the pivot standard deviation are
/// reported as degenerate.
pub const DEGENERATE_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
}

/// Whether the truncation from the selection event is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    #[default]
    Selective,
    /// Ignore the selection: truncation interval `(−∞, +∞)`.
    Naive,
}

/// The tested contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eta {
    /// `η = e_s`.
    Index(usize),
    Vector(Vec<f64>),
}

impl Eta {
    fn to_dense(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            Eta::Index(s) => {
                if *s >= d {
                    return Err(Error::DimensionMismatch { expected: d, found: s + 1 });
                }
                let mut v = vec![0.0; d];
                v[*s] = 1.0;
                Ok(v)
            }
            Eta::Vector(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: v.len() });
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiResult {
    pub eta: Eta,
    /// `ηᵀz`.
    pub statistic: f64,
    /// `ηᵀΣη`.
    pub scale2: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    pub pivot: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub degenerate: bool,
    /// `p_value < alpha`, filled in by [`test_selected_features`].
    pub significant: Option<bool>,
}

/// CDF at `x` of `N(mu, sigma2)` truncated to `[a, b]`.
pub fn truncnorm_cdf(x: f64, mu: f64, sigma2: f64, a: f64, b: f64) -> Result<f64> {
    Ok(truncnorm_cdf_sf(x, mu, sigma2, a, b)?.0)
}

/// `(F, 1 − F)` for the truncated normal, each computed directly so neither
/// loses precision when the other is close to one.
pub fn truncnorm_cdf_sf(x: f64, mu: f64, sigma2: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::ZeroPivotScale(sigma2));
    }
    if !(a < b) {
        return Err(Error::InvalidConfig(format!(
            "truncation interval must satisfy a < b, got [{a}, {b}]"
        )));
    }
    if x.is_nan() || mu.is_nan() {
        return Err(Error::InvalidData("NaN passed to the truncated normal CDF".into()));
    }
    if x <= a {
        return Ok((0.0, 1.0));
    }
    if x >= b {
        return Ok((1.0, 0.0));
    }
    let sd = sigma2.sqrt();
    let (ta, tx, tb) = ((a - mu) / sd, (x - mu) / sd, (b - mu) / sd);
    let total = normal::ln_interval_mass(ta, tb);
    let below = (normal::ln_interval_mass(ta, tx) - total).exp();
    let above = (normal::ln_interval_mass(tx, tb) - total).exp();
    Ok((below.clamp(0.0, 1.0), above.clamp(0.0, 1.0)))
}

/// Truncation interval `[V⁻, V⁺]` of `ηᵀz` on the event `A z ≤ 0`.
pub fn truncation_interval(
    constraints: &SelectionConstraints,
    z: &[f64],
    sigma: &DMatrix<f64>,
    eta: &[f64],
) -> Result<(f64, f64)> {
    let d = z.len();
    if constraints.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: constraints.dim() });
    }
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: sigma.nrows() });
    }
    if eta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: eta.len() });
    }
    let eta_v = DVector::from_column_slice(eta);
    let sigma_eta = sigma * &eta_v;
    let scale2 = eta_v.dot(&sigma_eta);
    if !(scale2 > 0.0 && scale2.is_finite()) {
        return Err(Error::ZeroPivotScale(scale2));
    }
    let c = sigma_eta / scale2;
    let stat = eta_v.dot(&DVector::from_column_slice(z));

    let mut v_minus = f64::NEG_INFINITY;
    let mut v_plus = f64::INFINITY;
    for (j, row) in constraints.rows().iter().enumerate() {
        let az = row.apply(z);
        let tol = FEASIBILITY_TOL * z[row.selected].abs().max(z[row.unselected].abs());
        if az > tol {
            return Err(Error::InfeasibleSelection { row: j, residual: az });
        }
        let alpha = row.apply(c.as_slice());
        if alpha.abs() <= ALPHA_ZERO_TOL {
            continue;
        }
        let bound = -az / alpha + stat;
        if alpha < 0.0 {
            v_minus = v_minus.max(bound);
        } else {
            v_plus = v_plus.min(bound);
        }
    }
    // Within-tolerance slack can push an endpoint past the statistic.
    Ok((v_minus.min(stat), v_plus.max(stat)))
}

/// Selective (or naive) p-value for `ηᵀμ = 0`.
pub fn psi_pvalue(
    z: &[f64],
    sigma: &DMatrix<f64>,
    constraints: &SelectionConstraints,
    eta: Eta,
    alternative: Alternative,
    mode: InferenceMode,
) -> Result<PsiResult> {
    let d = z.len();
    let dense = eta.to_dense(d)?;
    let eta_v = DVector::from_column_slice(&dense);
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: sigma.nrows() });
    }
    let scale2 = eta_v.dot(&(sigma * &eta_v));
    let statistic = eta_v.dot(&DVector::from_column_slice(z));
    let (v_minus, v_plus) = match mode {
        InferenceMode::Selective => truncation_interval(constraints, z, sigma, &dense)?,
        InferenceMode::Naive => {
            if !(scale2 > 0.0 && scale2.is_finite()) {
                return Err(Error::ZeroPivotScale(scale2));
            }
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    };

    if v_plus - v_minus < DEGENERATE_WIDTH * scale2.sqrt() {
        return Ok(PsiResult {
            eta,
            statistic,
            scale2,
            v_minus,
            v_plus,
            pivot: 0.5,
            p_value: 1.0,
            alternative,
            degenerate: true,
            significant: None,
        });
    }

    let (pivot, upper) = truncnorm_cdf_sf(statistic, 0.0, scale2, v_minus, v_plus)?;
    let p_value = match alternative {
        Alternative::TwoSided => (2.0 * pivot.min(upper)).min(1.0),
        Alternative::Greater => upper,
    };
    Ok(PsiResult {
        eta,
        statistic,
        scale2,
        v_minus,
        v_plus,
        pivot,
        p_value,
        alternative,
        degenerate: false,
        significant: None,
    })
}

/// Tests every selected coordinate (`η = e_s`) against the full selection
/// event and marks `p < alpha` as significant. Results follow the order of
/// `state.selected()`.
pub fn test_selected_features(
    state: &ScreenState,
    alpha: f64,
    alternative: Alternative,
    mode: InferenceMode,
) -> Result<Vec<PsiResult>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let constraints = state.constraints();
    state
        .selected()
        .iter()
        .map(|&s| {
            let mut r = psi_pvalue(state.z(), state.sigma(), &constraints, Eta::Index(s), alternative, mode)?;
            r.significant = Some(r.p_value < alpha);
            Ok(r)
        })
        .collect()
}
