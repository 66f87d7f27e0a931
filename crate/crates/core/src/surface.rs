//! Value surface assembled from the ladder slices.
//!
//! `v(x, c)` is bilinear on the `(node, rung)` lattice, extended by
//! `v(0, c) + ℓx` for negative surplus and by `c̄/r` beyond `L`.

use serde::Serialize;

use crate::discretization::{interpolate, upwind_derivative, Grid};
use crate::error::{Error, Result};
use crate::ladder::{LadderSolution, RateLadder, ValueSlice};
use crate::model::ModelParams;

/// Fraction of `L` that the free boundary may occupy before a run is rejected.
pub const DOMAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub params: ModelParams,
    pub grid: Grid,
    pub ladder: RateLadder,
    pub slices: Vec<ValueSlice>,
    /// Tolerance under which two rungs count as equal.
    pub eq_tol: f64,
    pub params_hash: [u8; 32],
}

impl ValueSurface {
    pub fn from_solution(
        params: ModelParams,
        solution: &LadderSolution,
        eq_factor: f64,
        params_hash: [u8; 32],
    ) -> Self {
        let grid = solution.boundary.g.grid();
        Self {
            params,
            grid,
            ladder: solution.ladder,
            slices: solution.slices.clone(),
            eq_tol: eq_factor * solution.ladder.dc().max(grid.dx()),
            params_hash,
        }
    }

    /// Rung values, top rate first.
    pub fn rung(&self, i: usize) -> &[f64] {
        self.slices[i].values()
    }

    fn rung_value(&self, i: usize, x: f64) -> f64 {
        if x > self.grid.length() {
            return self.params.value_upper();
        }
        interpolate(self.rung(i), self.grid.dx(), x.max(0.0))
    }

    /// `v(x, c)`; rates outside `[c_floor, c̄]` give `RateOutOfRange`.
    pub fn value_at(&self, x: f64, c: f64) -> Result<f64> {
        let t = self.ladder.position(c)?;
        let i = (t.floor() as usize).min(self.ladder.steps());
        let w = t - i as f64;
        let at = |x: f64| {
            let lo = self.rung_value(i, x);
            if w > 0.0 {
                lo + w * (self.rung_value(i + 1, x) - lo)
            } else {
                lo
            }
        };
        if x < 0.0 {
            Ok(at(0.0) + self.params.ell * x)
        } else {
            Ok(at(x))
        }
    }

    /// Upwind `v_x` on rung `i`.
    pub fn slope(&self, i: usize) -> Vec<f64> {
        upwind_derivative(self.rung(i), self.grid.dx())
    }

    /// Largest ladder index `k ≤ i` (highest rate) with `v_k` equal to `v_i`
    /// at node `j`, scanning upward until the first strict decrease.
    pub fn reach(&self, j: usize, i: usize) -> usize {
        let base = self.rung(i)[j];
        let mut k = i;
        while k > 0 && base - self.rung(k - 1)[j] <= self.eq_tol {
            k -= 1;
        }
        k
    }

    /// `𝔐(x, c)` resolved on the node lattice: the largest node `x_j ≤ x`
    /// is used, and an off-ladder `c` switches only if the segment from the
    /// rung above is flat.
    pub fn equivalent_max_rate(&self, x: f64, c: f64) -> Result<f64> {
        let t = self.ladder.position(c)?;
        if x > self.grid.length() {
            return Ok(self.ladder.c_bar());
        }
        let j = if x <= 0.0 {
            0
        } else {
            ((x / self.grid.dx()).floor() as usize).min(self.grid.intervals())
        };
        let i = t.ceil() as usize;
        if (i as f64 - t).abs() > 1e-9 {
            // Off the ladder: v is linear in c between rungs i−1 and i.
            if self.rung(i)[j] - self.rung(i - 1)[j] > self.eq_tol {
                return Ok(c);
            }
        }
        Ok(self.ladder.rate(self.reach(j, i)))
    }

    pub fn rate_map(&self) -> RateMap {
        let n = self.grid.nodes();
        let rungs = self.ladder.len();
        let mut rates = Vec::with_capacity(rungs);
        for i in 0..rungs {
            rates.push((0..n).map(|j| self.ladder.rate(self.reach(j, i))).collect());
        }
        RateMap {
            xs: self.grid.xs(),
            rates: self.ladder.rates(),
            map: rates,
        }
    }

    /// `𝒳(c_i)` for every rung; see [`FreeBoundaryCurve`].
    pub fn extract_boundary(&self) -> Result<FreeBoundaryCurve> {
        let curve = self.boundary_curve();
        let limit = DOMAIN_FRACTION * self.grid.length();
        if let Some(&x_star) = curve.x_star.iter().find(|&&x| !(x <= limit)) {
            return Err(Error::DomainTooSmall { x_star, limit });
        }
        Ok(curve)
    }

    /// Boundary curve without the domain check.
    pub fn boundary_curve(&self) -> FreeBoundaryCurve {
        let mut x_star: Vec<f64> = self
            .slices
            .iter()
            .map(|s| match s.switch_mask.iter().position(|&m| m) {
                Some(j) => self.grid.x(j),
                None => f64::INFINITY,
            })
            .collect();
        // The top rung has no rung above it; report the limit from below.
        if x_star.len() > 1 {
            x_star[0] = x_star[1];
        }
        let slope_at_zero = (0..self.slices.len()).map(|i| self.slope(i)[0]).collect();
        FreeBoundaryCurve {
            rates: self.ladder.rates(),
            x_star,
            slope_at_zero,
        }
    }
}

/// Free boundary per rung. `x_star[i]` is the first switching node of rung
/// `i`, or `+∞` when the rung never meets the one above it.
#[derive(Debug, Clone, Serialize)]
pub struct FreeBoundaryCurve {
    pub rates: Vec<f64>,
    pub x_star: Vec<f64>,
    /// `v_x(0, c_i)`.
    pub slope_at_zero: Vec<f64>,
}

impl FreeBoundaryCurve {
    pub fn max_finite(&self) -> f64 {
        self.x_star.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max)
    }
}

/// `𝔐(x_j, c_i)` on the full lattice; `map[i][j]`.
#[derive(Debug, Clone, Serialize)]
pub struct RateMap {
    pub xs: Vec<f64>,
    pub rates: Vec<f64>,
    pub map: Vec<Vec<f64>>,
}
