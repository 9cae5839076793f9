//! f-divergences and their convex conjugates.
//!
//! A divergence is described by a convex `f` with `f(1) = 0`; the discrete
//! divergence of `q` from `p` is `D_f(q ‖ p) = Σ_i p_i · f(q_i / p_i)`. The
//! adversarial objectives never evaluate `D_f` directly — they use the
//! variational bound through the conjugate `f*(y) = sup_x { x·y − f(x) }` —
//! but the discrete form is what the test oracles check against.
//!
//! Two divergences are supported:
//!
//! | name  | f(x)      | f*(y)        | (a, b)     |
//! |-------|-----------|--------------|------------|
//! | kl    | x·ln x    | e^(y−1)      | (1, 1/3)   |
//! | chi2  | (x−1)²    | y²/4 + y     | (1/4, 1/2) |
//!
//! The constants `(a, b)` witness the curvature bound
//! `f''(x+1) ≥ a / (1 + b·x)³` for `x ≥ −1`, which in turn gives the
//! quadratic lower bound `D_f(p ‖ q) ≥ (a/2)·‖p − q‖₁²` checked by
//! [`FDivergence::check_lower_bound`].

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which generator function `f` is in play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceKind {
    Kl,
    ChiSquared,
}

/// An f-divergence: the generator `f`, its conjugate, and the curvature
/// constants `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FDivergence {
    kind: DivergenceKind,
    a: f64,
    b: f64,
}

/// Result of the quadratic lower-bound check `D_f(p‖q) ≥ (a/2)·‖p−q‖₁²`.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundCheck {
    /// `D_f(p ‖ q)`.
    pub lhs: f64,
    /// `(a/2) · ‖p − q‖₁²`.
    pub rhs: f64,
    /// `lhs ≥ rhs − 1e-12`.
    pub holds: bool,
}

impl FDivergence {
    pub fn kl() -> Self {
        FDivergence { kind: DivergenceKind::Kl, a: 1.0, b: 1.0 / 3.0 }
    }

    pub fn chi_squared() -> Self {
        FDivergence { kind: DivergenceKind::ChiSquared, a: 0.25, b: 0.5 }
    }

    /// Parse the config-string form: `"kl"` or `"chi2"`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "kl" => Ok(Self::kl()),
            "chi2" => Ok(Self::chi_squared()),
            other => Err(Error::Config(format!(
                "unknown divergence {other:?}, expected \"kl\" or \"chi2\""
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DivergenceKind::Kl => "kl",
            DivergenceKind::ChiSquared => "chi2",
        }
    }

    pub fn kind(&self) -> DivergenceKind {
        self.kind
    }

    /// Curvature constant `a` of the quadratic lower bound.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Curvature constant `b` of the quadratic lower bound.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Evaluate `f(x)` for `x ≥ 0`. For KL, `f(0) = 0` by continuity.
    pub fn eval_f(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("f(x) needs x >= 0, got {x}")));
        }
        Ok(match self.kind {
            DivergenceKind::Kl => {
                if x == 0.0 {
                    0.0
                } else {
                    x * x.ln()
                }
            }
            DivergenceKind::ChiSquared => (x - 1.0) * (x - 1.0),
        })
    }

    /// Derivative `f'(x)` on the interior of the domain.
    ///
    /// The optimal discriminator of the variational bound is `f'(q/p)`.
    pub fn f_derivative(&self, x: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => x.ln() + 1.0,
            DivergenceKind::ChiSquared => 2.0 * (x - 1.0),
        }
    }

    /// Second derivative `f''(x)` on the interior of the domain.
    pub fn f_second_derivative(&self, x: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => 1.0 / x,
            DivergenceKind::ChiSquared => 2.0,
        }
    }

    /// Convex conjugate `f*(y) = sup_{x ≥ 0} { x·y − f(x) }` in closed form.
    ///
    /// For chi-squared, arguments below −2 are clamped to −2: the supremum
    /// over `x ≥ 0` is constant (−1) on that region, so the clamp changes
    /// nothing about the bound while keeping the training loss finite.
    pub fn conjugate(&self, y: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => (y - 1.0).exp(),
            DivergenceKind::ChiSquared => {
                let y = y.max(-2.0);
                y * y / 4.0 + y
            }
        }
    }

    /// Derivative of [`FDivergence::conjugate`] (zero in chi-squared's
    /// clamped region), used by reverse-mode training.
    pub fn conjugate_slope(&self, y: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => (y - 1.0).exp(),
            DivergenceKind::ChiSquared => {
                if y <= -2.0 {
                    0.0
                } else {
                    y / 2.0 + 1.0
                }
            }
        }
    }

    /// Discrete divergence `D_f(q ‖ p) = Σ_i p_i · f(q_i / p_i)`.
    ///
    /// Argument order is fixed as (base `p`, comparison `q`): the result is
    /// the divergence *of `q` from `p`*. Where `q` puts mass outside the
    /// support of `p` the divergence is infinite and the `+∞` sentinel is
    /// returned rather than an error.
    pub fn divergence_discrete(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        validate_distribution_pair(p, q)?;
        let mut total = 0.0;
        for (&pi, &qi) in p.iter().zip(q) {
            if pi == 0.0 {
                if qi > 0.0 {
                    return Ok(f64::INFINITY);
                }
                continue;
            }
            total += pi * self.eval_f(qi / pi)?;
        }
        // Clamp tiny negative rounding residue; D_f is nonnegative.
        Ok(if total < 0.0 && total > -1e-15 { 0.0 } else { total })
    }

    /// Check the quadratic lower bound `D_f(p ‖ q) ≥ (a/2)·‖p − q‖₁²`.
    ///
    /// Note the roles: the left side is the divergence *of `p` from `q`*,
    /// i.e. `divergence_discrete(q, p)` in this module's argument order.
    pub fn check_lower_bound(&self, p: &[f64], q: &[f64]) -> Result<LowerBoundCheck> {
        let lhs = self.divergence_discrete(q, p)?;
        let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
        let rhs = 0.5 * self.a * l1 * l1;
        Ok(LowerBoundCheck { lhs, rhs, holds: lhs >= rhs - 1e-12 })
    }
}

fn validate_distribution_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::shape(
            format!("equal lengths ({})", p.len()),
            format!("{}", q.len()),
        ));
    }
    if p.is_empty() {
        return Err(Error::Domain("empty distribution".into()));
    }
    for (label, v) in [("p", p), ("q", q)] {
        if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Domain(format!("{label} has negative or non-finite entries")));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("{label} sums to {sum}, not 1")));
        }
    }
    Ok(())
}
