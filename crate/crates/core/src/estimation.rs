//! Ridge-regression machinery for the transition parameters.
//!
//! Each `(step, signal)` pair owns two [`SpdState`]s: a variance-weighted
//! regression of `V(s')` on `phi_V` (the "hat" family, which drives the
//! optimistic bonus) and an unweighted regression of `V(s')^2` on
//! `phi_{V^2}` (the "tilde" family, used only for variance estimates).
//! Inverses are maintained with Sherman-Morrison updates and periodically
//! re-derived from a Cholesky factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{CmdpError, Result};

/// Updates between forced re-factorizations of the inverse.
pub const REFACTOR_INTERVAL: usize = 64;
/// Max-norm bound on `Sigma * SigmaInv - I` before a re-factorization.
pub const DRIFT_TOL: f64 = 1e-8;

/// Ridge-regression state `Sigma = lambda I + sum x x^T / w`, `b = sum x y / w`.
#[derive(Debug, Clone)]
pub struct SpdState {
    lambda: f64,
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    bvec: DVector<f64>,
    theta: DVector<f64>,
    update_count: usize,
    refactor_count: usize,
}

impl SpdState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(CmdpError::InvalidParameter {
                name: "lambda",
                reason: format!("ridge regularizer must be positive, got {lambda}"),
            });
        }
        Ok(Self {
            lambda,
            sigma: DMatrix::identity(dim, dim) * lambda,
            sigma_inv: DMatrix::identity(dim, dim) / lambda,
            bvec: DVector::zeros(dim),
            theta: DVector::zeros(dim),
            update_count: 0,
            refactor_count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.bvec.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub fn bvec(&self) -> &DVector<f64> {
        &self.bvec
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    pub fn refactor_count(&self) -> usize {
        self.refactor_count
    }

    /// `max |Sigma * SigmaInv - I|`.
    pub fn inverse_drift(&self) -> f64 {
        let n = self.dim();
        (&self.sigma * &self.sigma_inv - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Adds the observation `(x, y)` with weight `1 / weight_sq`.
    pub fn rank1_update(&mut self, x: &DVector<f64>, y: f64, weight_sq: f64) -> Result<()> {
        if !(weight_sq > 0.0 && weight_sq.is_finite()) {
            return Err(CmdpError::InvalidParameter {
                name: "weight_sq",
                reason: format!("must be positive and finite, got {weight_sq}"),
            });
        }
        if x.len() != self.dim() {
            return Err(CmdpError::InvalidParameter {
                name: "x",
                reason: format!("length {} != dim {}", x.len(), self.dim()),
            });
        }
        let inv_x = &self.sigma_inv * x;
        let denom = 1.0 + x.dot(&inv_x) / weight_sq;
        if !(denom > 0.0) {
            return Err(CmdpError::Numerical(format!(
                "Sherman-Morrison denominator {denom} is not positive"
            )));
        }
        self.sigma.ger(1.0 / weight_sq, x, x, 1.0);
        self.bvec.axpy(y / weight_sq, x, 1.0);
        self.sigma_inv.ger(-1.0 / (weight_sq * denom), &inv_x, &inv_x, 1.0);
        self.update_count += 1;

        if self.update_count % REFACTOR_INTERVAL == 0 || self.inverse_drift() > DRIFT_TOL {
            self.refactor()?;
        }
        self.theta = &self.sigma_inv * &self.bvec;
        Ok(())
    }

    /// Re-derives the inverse from a Cholesky factorization of `Sigma`.
    pub fn refactor(&mut self) -> Result<()> {
        // keep Sigma exactly symmetric; ger accumulates identical terms on both sides
        let sym = (&self.sigma + self.sigma.transpose()) * 0.5;
        let chol = sym
            .clone()
            .cholesky()
            .ok_or_else(|| CmdpError::Numerical("Sigma lost positive definiteness".into()))?;
        self.sigma = sym;
        self.sigma_inv = chol.inverse();
        self.theta = &self.sigma_inv * &self.bvec;
        self.refactor_count += 1;
        Ok(())
    }

    /// `||x||_{SigmaInv}`.
    pub fn bonus_norm(&self, x: &DVector<f64>) -> Result<f64> {
        let quad = x.dot(&(&self.sigma_inv * x));
        if quad >= 0.0 {
            Ok(quad.sqrt())
        } else if quad > -1e-12 {
            Ok(0.0)
        } else {
            Err(CmdpError::Numerical(format!("negative quadratic form {quad}")))
        }
    }

    /// `||v||_{Sigma}`.
    pub fn sigma_norm(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.sigma * v)).max(0.0).sqrt()
    }
}

/// The three confidence radii at episode `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceRadii {
    pub k: usize,
    pub beta_hat: f64,
    pub beta_tilde: f64,
    pub beta_check: f64,
}

/// Confidence radii for the weighted estimator (`beta_hat`), the
/// second-moment estimator (`beta_tilde`) and the variance offset
/// (`beta_check`). Logarithms are natural.
pub fn radii(k: usize, dim: usize, horizon: usize, lambda: f64, delta: f64, bound: f64) -> Result<ConfidenceRadii> {
    if k == 0 {
        return Err(CmdpError::InvalidParameter {
            name: "k",
            reason: "episodes are 1-based".into(),
        });
    }
    if !(lambda > 0.0) {
        return Err(CmdpError::InvalidParameter {
            name: "lambda",
            reason: format!("must be positive, got {lambda}"),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CmdpError::InvalidParameter {
            name: "delta",
            reason: format!("must lie in (0, 1), got {delta}"),
        });
    }
    let (kf, d, hz) = (k as f64, dim as f64, horizon as f64);
    let conf_arg = 8.0 * hz * kf * kf / delta;
    if conf_arg <= 1.0 {
        return Err(CmdpError::InvalidParameter {
            name: "delta",
            reason: format!("log argument 8Hk^2/delta = {conf_arg} must exceed 1"),
        });
    }
    let log_conf = conf_arg.ln();
    let log_det = (1.0 + kf / lambda).ln();
    let log_det_sq = (1.0 + kf * hz.powi(4) / (d * lambda)).ln();
    let ridge = lambda.sqrt() * bound;

    Ok(ConfidenceRadii {
        k,
        beta_hat: 8.0 * (d * log_det * log_conf).sqrt() + 4.0 * d.sqrt() * log_conf + ridge,
        beta_tilde: 8.0 * hz * hz * (d * log_det_sq * log_conf).sqrt() + 4.0 * hz * hz * log_conf + ridge,
        beta_check: 8.0 * d * (log_det * log_conf).sqrt() + 4.0 * d.sqrt() * log_conf + ridge,
    })
}

/// Estimated conditional variance of `V(s')`:
/// `clip(<phi_{V^2}, theta~>, [0, H^2]) - clip(<phi_V, theta^>, [0, H])^2`.
/// May be negative; the floor is applied by [`sigma_bar_sq`].
pub fn variance_estimate(
    tilde: &SpdState,
    hat: &SpdState,
    phi_v: &DVector<f64>,
    phi_v2: &DVector<f64>,
    horizon: usize,
) -> f64 {
    let hz = horizon as f64;
    let second = phi_v2.dot(tilde.theta()).clamp(0.0, hz * hz);
    let first = phi_v.dot(hat.theta()).clamp(0.0, hz);
    second - first * first
}

/// Offset `E = min{H^2, beta~ * tilde_norm} + min{H^2, 2H beta_check * hat_norm}`.
pub fn offset_e(radii: &ConfidenceRadii, tilde_norm: f64, hat_norm: f64, horizon: usize) -> f64 {
    let hz = horizon as f64;
    (radii.beta_tilde * tilde_norm).min(hz * hz) + (2.0 * hz * radii.beta_check * hat_norm).min(hz * hz)
}

/// `max{H^2 / d, vbar + E}`.
pub fn sigma_bar_sq(vbar: f64, offset: f64, horizon: usize, dim: usize) -> f64 {
    let hz = horizon as f64;
    (hz * hz / dim as f64).max(vbar + offset)
}

/// Outcome of the variance-error inequality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCheck {
    pub passed: bool,
    /// `rhs - lhs`; nonnegative when the inequality holds.
    pub slack: f64,
    pub lhs: f64,
    pub rhs: f64,
}

// absolute floating-point allowance on the deterministic inequality
const VARIANCE_CHECK_TOL: f64 = 1e-9;

/// Checks `|vbar - true_var| <= min{H^2, ||phi_{V^2}||_{Sigma~^-1} ||theta~ - theta*||_{Sigma~}}
/// + min{H^2, 2H ||phi_V||_{Sigma^-1} ||theta^ - theta*||_{Sigma^}}`.
///
/// This is triangle inequality plus Cauchy-Schwarz, so it must hold
/// whenever `V` takes values in `[0, H]`; a failure is an implementation bug.
#[allow(clippy::too_many_arguments)]
pub fn proposition1_check(
    true_theta: &DVector<f64>,
    tilde: &SpdState,
    hat: &SpdState,
    phi_v: &DVector<f64>,
    phi_v2: &DVector<f64>,
    vbar: f64,
    true_var: f64,
    horizon: usize,
) -> Result<VarianceCheck> {
    let hz = horizon as f64;
    let lhs = (vbar - true_var).abs();
    let tilde_term = tilde.bonus_norm(phi_v2)? * tilde.sigma_norm(&(tilde.theta() - true_theta));
    let hat_term = 2.0 * hz * hat.bonus_norm(phi_v)? * hat.sigma_norm(&(hat.theta() - true_theta));
    let rhs = tilde_term.min(hz * hz) + hat_term.min(hz * hz);
    let slack = rhs - lhs;
    Ok(VarianceCheck {
        passed: slack >= -VARIANCE_CHECK_TOL * (1.0 + rhs),
        slack,
        lhs,
        rhs,
    })
}
