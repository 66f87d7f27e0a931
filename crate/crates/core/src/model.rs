//! Model constants and claim-size distributions.
//!
//! The surplus follows `X_t = x + ∫(μ − C_s) ds − Σ Z_i + D_t` with Poisson
//! claim arrivals at intensity λ. Everything downstream needs only the claim
//! density `p`, its survival function `1 − F`, the stop-loss transform
//! `E[(Z − x)⁺]` and the tail function
//!
//! ```text
//! h(x) = λ ℓ E[(Z − x)⁺] = λ ℓ ∫ₓ^∞ (1 − F(y)) dy
//! ```
//!
//! which is the expected discounted-rate cost of the injections triggered by
//! a claim arriving at surplus `x`. All three supported families have a
//! positive, bounded, non-increasing density and a finite mean, and all
//! quantities above are available in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Economic constants of the control problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Premium income rate μ.
    pub mu: f64,
    /// Poisson claim intensity λ.
    pub lambda: f64,
    /// Discount rate r.
    pub r: f64,
    /// Cost per unit of injected capital ℓ.
    pub ell: f64,
    /// Maximal dividend rate c̄.
    pub c_bar: f64,
    /// Lowest rate of the computed ladder.
    pub c_floor: f64,
}

impl ModelParams {
    pub fn new(mu: f64, lambda: f64, r: f64, ell: f64, c_bar: f64, c_floor: f64) -> Result<Self> {
        let params = Self {
            mu,
            lambda,
            r,
            ell,
            c_bar,
            c_floor,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("r", self.r),
            ("ell", self.ell),
            ("c_bar", self.c_bar),
            ("c_floor", self.c_floor),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::validation(name, format!("must be finite, got {value}")));
            }
        }
        if self.mu <= 0.0 {
            return Err(Error::validation("mu", "income rate must be positive"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::validation("lambda", "claim intensity must be positive"));
        }
        if self.r <= 0.0 {
            return Err(Error::validation("r", "discount rate must be positive"));
        }
        if self.ell <= 1.0 {
            return Err(Error::validation(
                "ell",
                "must exceed 1: injected capital has to cost more than retained surplus",
            ));
        }
        if self.c_bar <= 0.0 || self.c_bar >= self.mu {
            return Err(Error::validation(
                "c_bar",
                format!("maximal dividend rate must lie in (0, mu) = (0, {})", self.mu),
            ));
        }
        if self.c_floor >= self.c_bar {
            return Err(Error::validation("c_floor", "must be below c_bar"));
        }
        Ok(())
    }

    /// Upper value bound `c̄ / r`.
    pub fn value_upper(&self) -> f64 {
        self.c_bar / self.r
    }

    /// Rate `ρ` of the far-field approach `c̄/r − g(x) ∼ e^{−ρx}`: the positive
    /// root of `(μ − c̄)ρ + r + λ = λ E[e^{ρZ}]`. `None` for claims without
    /// exponential moments, where the approach is slower than any exponential.
    pub fn far_field_decay(&self, claims: &ClaimDistribution) -> Option<f64> {
        let f = |rho: f64| {
            claims
                .mgf(rho)
                .map(|m| self.lambda * m - (self.mu - self.c_bar) * rho - self.r - self.lambda)
        };
        let mut hi = 1.0;
        loop {
            match f(hi) {
                Some(v) if v > 0.0 => break,
                Some(_) if hi < 1e6 => hi *= 2.0,
                Some(_) => return None,
                None => break,
            }
        }
        // f < 0 on (0, root); above the root it is positive or undefined.
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            match f(mid) {
                Some(v) if v < 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        (lo > 0.0).then_some(lo)
    }

    /// Lower value bound `(c̄ − λℓγ) / r` for surplus `x ≥ 0`.
    pub fn value_lower(&self, claims: &ClaimDistribution) -> f64 {
        (self.c_bar - self.lambda * self.ell * claims.mean()) / self.r
    }

    /// `h(x) = λ ℓ E[(Z − x)⁺]`.
    pub fn h(&self, claims: &ClaimDistribution, x: f64) -> f64 {
        self.lambda * self.ell * claims.stop_loss(x)
    }
}

/// Claim-size families with a positive, bounded, non-increasing density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimDistribution {
    /// `p(x) = e^{−x/γ} / γ`.
    Exponential { mean: f64 },
    /// Finite mixture of exponentials.
    HyperExponential { weights: Vec<f64>, means: Vec<f64> },
    /// Lomax law `p(x) = α θ^α / (x + θ)^{α+1}`, mean `θ / (α − 1)`.
    ShiftedPareto { alpha: f64, theta: f64 },
}

impl ClaimDistribution {
    pub fn exponential(mean: f64) -> Result<Self> {
        let d = ClaimDistribution::Exponential { mean };
        d.validate()?;
        Ok(d)
    }

    pub fn hyper_exponential(weights: Vec<f64>, means: Vec<f64>) -> Result<Self> {
        let d = ClaimDistribution::HyperExponential { weights, means };
        d.validate()?;
        Ok(d)
    }

    pub fn shifted_pareto(alpha: f64, theta: f64) -> Result<Self> {
        let d = ClaimDistribution::ShiftedPareto { alpha, theta };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClaimDistribution::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::validation("claims.params.mean", "must be positive and finite"));
                }
            }
            ClaimDistribution::HyperExponential { weights, means } => {
                if weights.is_empty() || weights.len() != means.len() {
                    return Err(Error::validation(
                        "claims.params",
                        "weights and means must be non-empty and of equal length",
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::validation("claims.params.weights", "weights must be positive"));
                }
                if means.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                    return Err(Error::validation("claims.params.means", "means must be positive"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::validation(
                        "claims.params.weights",
                        format!("weights must sum to 1, got {total}"),
                    ));
                }
            }
            ClaimDistribution::ShiftedPareto { alpha, theta } => {
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return Err(Error::validation(
                        "claims.params.alpha",
                        "tail index must exceed 1 for a finite mean",
                    ));
                }
                if !(theta.is_finite() && *theta > 0.0) {
                    return Err(Error::validation("claims.params.theta", "scale must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Mean claim size γ.
    pub fn mean(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { mean } => *mean,
            ClaimDistribution::HyperExponential { weights, means } => {
                weights.iter().zip(means).map(|(w, m)| w * m).sum()
            }
            ClaimDistribution::ShiftedPareto { alpha, theta } => theta / (alpha - 1.0),
        }
    }

    /// Density `p(x)`, `x ≥ 0`.
    pub fn density(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self {
            ClaimDistribution::Exponential { mean } => (-x / mean).exp() / mean,
            ClaimDistribution::HyperExponential { weights, means } => weights
                .iter()
                .zip(means)
                .map(|(w, m)| w * (-x / m).exp() / m)
                .sum(),
            ClaimDistribution::ShiftedPareto { alpha, theta } => {
                alpha / theta * (theta / (x + theta)).powf(alpha + 1.0)
            }
        }
    }

    /// Distribution function `F(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// Survival function `1 − F(x)`, computed directly to avoid cancellation.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ClaimDistribution::Exponential { mean } => (-x / mean).exp(),
            ClaimDistribution::HyperExponential { weights, means } => weights
                .iter()
                .zip(means)
                .map(|(w, m)| w * (-x / m).exp())
                .sum(),
            ClaimDistribution::ShiftedPareto { alpha, theta } => (theta / (x + theta)).powf(*alpha),
        }
    }

    /// Stop-loss transform `E[(Z − x)⁺] = ∫ₓ^∞ (1 − F(y)) dy`.
    pub fn stop_loss(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            ClaimDistribution::Exponential { mean } => mean * (-x / mean).exp(),
            ClaimDistribution::HyperExponential { weights, means } => weights
                .iter()
                .zip(means)
                .map(|(w, m)| w * m * (-x / m).exp())
                .sum(),
            ClaimDistribution::ShiftedPareto { alpha, theta } => {
                (x + theta) / (alpha - 1.0) * (theta / (x + theta)).powf(*alpha)
            }
        }
    }

    /// Draw a claim size from uniforms in `[0, 1)`.
    ///
    /// Exponential and Pareto use the inverse distribution function of `u`.
    /// The hyper-exponential mixture picks its component with `u_branch` and
    /// inverts that component's distribution function with `u`.
    pub fn sample(&self, u_branch: f64, u: f64) -> f64 {
        // 1 − u lies in (0, 1], so the logarithm is finite.
        let tail = 1.0 - u;
        match self {
            ClaimDistribution::Exponential { mean } => -mean * tail.ln(),
            ClaimDistribution::HyperExponential { weights, means } => {
                let mut acc = 0.0;
                let mut pick = means.len() - 1;
                for (k, w) in weights.iter().enumerate() {
                    acc += w;
                    if u_branch < acc {
                        pick = k;
                        break;
                    }
                }
                -means[pick] * tail.ln()
            }
            ClaimDistribution::ShiftedPareto { alpha, theta } => theta * (tail.powf(-1.0 / alpha) - 1.0),
        }
    }

    /// Moment generating function `E[e^{ρZ}]`; `None` where it diverges.
    pub fn mgf(&self, rho: f64) -> Option<f64> {
        match self {
            ClaimDistribution::Exponential { mean } => (rho * mean < 1.0).then(|| 1.0 / (1.0 - rho * mean)),
            ClaimDistribution::HyperExponential { weights, means } => means
                .iter()
                .all(|m| rho * m < 1.0)
                .then(|| weights.iter().zip(means).map(|(w, m)| w / (1.0 - rho * m)).sum()),
            ClaimDistribution::ShiftedPareto { .. } => (rho <= 0.0).then_some(1.0),
        }
    }

    /// Whether [`sample`](Self::sample) consumes the branch uniform.
    pub fn needs_branch(&self) -> bool {
        matches!(self, ClaimDistribution::HyperExponential { .. })
    }

    /// Smallest `x` with `E[(Z − x)⁺] ≤ rel · γ`, found by bisection.
    pub fn stop_loss_quantile(&self, rel: f64) -> f64 {
        let target = rel * self.mean();
        let mut hi = self.mean().max(1.0);
        while self.stop_loss(hi) > target {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.stop_loss(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ClaimDistribution::Exponential { .. } => "exponential",
            ClaimDistribution::HyperExponential { .. } => "hyper_exponential",
            ClaimDistribution::ShiftedPareto { .. } => "shifted_pareto",
        }
    }

    /// Numeric parameters in a fixed order, used for content hashing.
    pub fn numeric_fields(&self) -> Vec<f64> {
        match self {
            ClaimDistribution::Exponential { mean } => vec![*mean],
            ClaimDistribution::HyperExponential { weights, means } => {
                weights.iter().chain(means.iter()).copied().collect()
            }
            ClaimDistribution::ShiftedPareto { alpha, theta } => vec![*alpha, *theta],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_closed_forms() {
        let d = ClaimDistribution::exponential(1.0).unwrap();
        assert_abs_diff_eq!(d.density(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.density(1.0), (-1.0f64).exp(), epsilon = 1e-15);
        let d2 = ClaimDistribution::exponential(2.0).unwrap();
        assert_abs_diff_eq!(d2.cdf(2.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(d2.cdf(0.0), 0.0);
    }

    #[test]
    fn pareto_density_at_zero() {
        let d = ClaimDistribution::shifted_pareto(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(d.density(0.0), 2.0, epsilon = 1e-15);
        assert_eq!(d.cdf(0.0), 0.0);
    }

    #[test]
    fn h_examples() {
        let m = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0).unwrap();
        let d = ClaimDistribution::exponential(1.0).unwrap();
        assert_abs_diff_eq!(m.h(&d, 0.0), 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.h(&d, 1.0), 1.2 * (-1.0f64).exp(), epsilon = 1e-15);

        let m2 = ModelParams::new(2.0, 2.0, 0.1, 1.5, 1.0, 0.0).unwrap();
        let p = ClaimDistribution::shifted_pareto(3.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.mean(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m2.h(&p, 0.0), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn far_field_decay_matches_quadratic_root() {
        // For exponential claims the root equation reduces to a quadratic.
        let m = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0).unwrap();
        let d = ClaimDistribution::exponential(0.5).unwrap();
        let rho = m.far_field_decay(&d).unwrap();
        assert_abs_diff_eq!(rho, 0.45 + 0.4025f64.sqrt(), epsilon = 1e-12);

        let m2 = ModelParams::new(1.5, 1.0, 0.1, 1.5, 1.0, 0.0).unwrap();
        let d2 = ClaimDistribution::exponential(1.0).unwrap();
        assert_abs_diff_eq!(m2.far_field_decay(&d2).unwrap(), 0.56f64.sqrt() - 0.6, epsilon = 1e-12);

        let pareto = ClaimDistribution::shifted_pareto(3.0, 1.0).unwrap();
        assert!(m.far_field_decay(&pareto).is_none());
    }

    #[test]
    fn parameter_rejections() {
        assert!(matches!(
            ModelParams::new(2.0, 1.0, 0.1, 0.9, 1.0, 0.0),
            Err(Error::Validation { ref field, .. }) if field == "ell"
        ));
        assert!(matches!(
            ModelParams::new(2.0, 1.0, 0.1, 1.2, 2.0, 0.0),
            Err(Error::Validation { ref field, .. }) if field == "c_bar"
        ));
        assert!(ModelParams::new(0.0, 1.0, 0.1, 1.2, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2.0, 0.0, 0.1, 1.2, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2.0, 1.0, 0.0, 1.2, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 1.0).is_err());
        assert!(ClaimDistribution::shifted_pareto(1.0, 1.0).is_err());
        assert!(ClaimDistribution::hyper_exponential(vec![0.5, 0.4], vec![1.0, 3.0]).is_err());
        assert!(ClaimDistribution::hyper_exponential(vec![0.5], vec![1.0, 3.0]).is_err());
    }

    #[test]
    fn sampling_inverts_cdf() {
        let families = [
            ClaimDistribution::exponential(0.5).unwrap(),
            ClaimDistribution::shifted_pareto(3.0, 1.0).unwrap(),
        ];
        for d in &families {
            for &u in &[0.0, 0.1, 0.5, 0.9, 0.999] {
                let z = d.sample(0.0, u);
                assert_abs_diff_eq!(d.cdf(z), u, epsilon = 1e-12);
            }
        }
        let mix = ClaimDistribution::hyper_exponential(vec![0.5, 0.5], vec![1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(mix.sample(0.2, 0.5), -(0.5f64).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(mix.sample(0.7, 0.5), -3.0 * (0.5f64).ln(), epsilon = 1e-14);
    }

    #[test]
    fn stop_loss_quantile_brackets_target() {
        let d = ClaimDistribution::exponential(0.5).unwrap();
        let x = d.stop_loss_quantile(1e-8);
        assert!(d.stop_loss(x) <= 1e-8 * 0.5 * (1.0 + 1e-9));
        assert_abs_diff_eq!(x, 0.5 * (1e8f64).ln(), epsilon = 1e-9);
    }
}
