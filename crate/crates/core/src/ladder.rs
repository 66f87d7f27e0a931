//! Regime-switching ladder on the dividend-rate axis.
//!
//! Rates are `c_i = c̄ − iΔc` for `i = 0..=n` with `Δc = (c̄ − c_floor)/n`.
//! Rung 0 is the boundary value `g`; every later rung solves the obstacle
//! problem `min{ℒ_{c_i} v_i − 𝒯v_i + h − c_i, v_i − v_{i−1}} = 0` by
//! projected sweeps, with the far-field datum `v_i(L) = c̄/r`.

use serde::{Deserialize, Serialize};

use crate::boundary::{solve_g, BoundarySolution};
use crate::discretization::{second_difference, upwind_derivative, GridFn, Operators};
use crate::error::{Error, Result};
use crate::sweep::{SolverSettings, SweepProblem};

/// Default factor `ε_eq` in the switching tolerance `ε_eq · max(Δc, dx)`.
pub const DEFAULT_EQ_FACTOR: f64 = 1e-6;

/// Uniform partition of `[c_floor, c̄]` into `n` steps, listed from the top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLadder {
    c_bar: f64,
    c_floor: f64,
    n: usize,
}

impl RateLadder {
    pub fn new(c_bar: f64, c_floor: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("ladder.n", "need at least one rung step"));
        }
        if !(c_floor < c_bar) || !c_floor.is_finite() || !c_bar.is_finite() {
            return Err(Error::validation("model.c_floor", "c_floor must lie below c_bar"));
        }
        Ok(Self { c_bar, c_floor, n })
    }

    /// Number of steps `n`; the ladder holds `n + 1` rates.
    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar
    }

    pub fn c_floor(&self) -> f64 {
        self.c_floor
    }

    pub fn dc(&self) -> f64 {
        (self.c_bar - self.c_floor) / self.n as f64
    }

    /// Rate of rung `i`; the last rung returns `c_floor` exactly.
    pub fn rate(&self, i: usize) -> f64 {
        if i == self.n {
            self.c_floor
        } else {
            self.c_bar - i as f64 * self.dc()
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.rate(i)).collect()
    }

    /// Fractional rung coordinate `(c̄ − c)/Δc`, or `RateOutOfRange`.
    pub fn position(&self, c: f64) -> Result<f64> {
        let slack = 1e-12 * (1.0 + self.c_bar.abs().max(self.c_floor.abs()));
        if !(c >= self.c_floor - slack && c <= self.c_bar + slack) {
            return Err(Error::RateOutOfRange {
                rate: c,
                lo: self.c_floor,
                hi: self.c_bar,
            });
        }
        Ok(((self.c_bar - c) / self.dc()).clamp(0.0, self.n as f64))
    }

    /// Ladder with twice as many steps over the same rate interval.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }
}

/// One rung of the ladder.
#[derive(Debug, Clone)]
pub struct ValueSlice {
    pub rate: f64,
    pub v: GridFn,
    pub v_prime: GridFn,
    /// `true` where `v_i` equals the previous rung within the switching tolerance.
    pub switch_mask: Vec<bool>,
    pub iterations: usize,
}

impl ValueSlice {
    /// Rung 0, built from the boundary solution. Its mask is all `true`.
    pub fn top(boundary: &BoundarySolution, rate: f64) -> Self {
        Self {
            rate,
            v: boundary.g.clone(),
            v_prime: boundary.g_prime.clone(),
            switch_mask: vec![true; boundary.g.values().len()],
            iterations: boundary.picard_iterations,
        }
    }

    pub fn values(&self) -> &[f64] {
        self.v.values()
    }
}

/// Settings shared by every rung solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSettings {
    pub solver: SolverSettings,
    pub eq_factor: f64,
    /// Tolerance of the complementarity post-check.
    pub check_tol: f64,
}

impl Default for LadderSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            eq_factor: DEFAULT_EQ_FACTOR,
            check_tol: 1e-8,
        }
    }
}

impl LadderSettings {
    pub fn eq_tol(&self, dc: f64, dx: f64) -> f64 {
        self.eq_factor * dc.max(dx)
    }
}

/// Switching mask of `v` against the rung below it in rate order.
pub fn switch_mask(v: &[f64], prev: &[f64], eq_tol: f64) -> Vec<bool> {
    v.iter().zip(prev).map(|(a, b)| a - b <= eq_tol).collect()
}

/// Solve one rung at `rate` against the obstacle `prev`.
pub fn solve_rung(
    prev: &ValueSlice,
    rate: f64,
    ops: &Operators,
    settings: &LadderSettings,
    dc: f64,
) -> Result<ValueSlice> {
    let p = ops.params();
    let grid = ops.grid();
    if rate > prev.rate {
        return Err(Error::validation(
            "rate",
            format!("rung rate {rate} above the previous rung {}", prev.rate),
        ));
    }
    let obstacle = prev.values();
    let problem = SweepProblem {
        ops,
        rate,
        right_value: p.value_upper(),
        obstacle: Some(obstacle),
    };
    let fixed = problem.solve(obstacle.to_vec(), &settings.solver, "rung solve")?;
    let v = fixed.values;

    let residual = ops.residual(rate, &v);
    let tol = settings.check_tol;
    for j in 0..v.len() - 1 {
        let gap = v[j] - obstacle[j];
        let worst = if gap < -tol {
            gap
        } else if residual[j] < -tol {
            residual[j]
        } else if residual[j].min(gap) > tol {
            residual[j].min(gap)
        } else {
            continue;
        };
        return Err(Error::ObstacleViolation { node: j, margin: worst });
    }

    let eq_tol = settings.eq_tol(dc, grid.dx());
    let v_prime = upwind_derivative(&v, grid.dx());
    Ok(ValueSlice {
        rate,
        switch_mask: switch_mask(&v, obstacle, eq_tol),
        v: GridFn::new(grid, v)?,
        v_prime: GridFn::new(grid, v_prime)?,
        iterations: fixed.iterations,
    })
}

/// Per-rung summary of the a-priori quantities.
#[derive(Debug, Clone, Serialize)]
pub struct RungStats {
    pub index: usize,
    pub rate: f64,
    pub iterations: usize,
    pub min_value: f64,
    pub max_value: f64,
    pub min_slope: f64,
    pub max_slope: f64,
    pub min_curvature: f64,
    pub max_curvature: f64,
    /// Range of `u_i = (v_i − v_{i−1})/Δc`; zero on rung 0.
    pub min_u: f64,
    pub max_u: f64,
    /// Range of the discrete `u_i′` on the active set `{v_{i−1} > v_{i−2}}`.
    pub min_u_slope: f64,
    pub max_u_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderDiagnostics {
    pub rungs: Vec<RungStats>,
    /// `B = 2(r+λ)(ℓ−1)/(r²(μ−c̄))`.
    pub b_constant: f64,
    /// `max (u_{i−1} − u_i − BΔc)` over nodes and rungs `i ≥ 2`.
    pub max_u_step_excess: f64,
    pub total_iterations: usize,
}

fn min_max(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// `u_i` for rung `i ≥ 1`.
pub fn rung_difference(slices: &[ValueSlice], i: usize, dc: f64) -> Vec<f64> {
    slices[i]
        .values()
        .iter()
        .zip(slices[i - 1].values())
        .map(|(a, b)| (a - b) / dc)
        .collect()
}

/// Recompute the diagnostics from the slice values and masks alone.
pub fn ladder_diagnostics(slices: &[ValueSlice], ops: &Operators, dc: f64) -> LadderDiagnostics {
    let p = ops.params();
    let dx = ops.grid().dx();
    let b_constant = 2.0 * (p.r + p.lambda) * (p.ell - 1.0) / (p.r * p.r * (p.mu - p.c_bar));
    let mut rungs = Vec::with_capacity(slices.len());
    let mut max_u_step_excess = f64::NEG_INFINITY;
    let mut prev_u: Option<Vec<f64>> = None;
    for (i, slice) in slices.iter().enumerate() {
        let v = slice.values();
        let (min_value, max_value) = min_max(v.iter().copied());
        let (min_slope, max_slope) = min_max(upwind_derivative(v, dx));
        let (min_curvature, max_curvature) = min_max(second_difference(v, dx));
        let (mut min_u, mut max_u) = (0.0, 0.0);
        let (mut min_u_slope, mut max_u_slope) = (0.0, 0.0);
        if i > 0 {
            let u = rung_difference(slices, i, dc);
            (min_u, max_u) = min_max(u.iter().copied());
            let du = upwind_derivative(&u, dx);
            let active: Vec<f64> = if i == 1 {
                du[..du.len() - 1].to_vec()
            } else {
                let (a, b) = (slices[i - 1].values(), slices[i - 2].values());
                (0..du.len() - 1).filter(|&j| a[j] > b[j] && a[j + 1] > b[j + 1]).map(|j| du[j]).collect()
            };
            if !active.is_empty() {
                (min_u_slope, max_u_slope) = min_max(active);
            }
            if let Some(pu) = &prev_u {
                if i >= 2 {
                    for (a, b) in pu.iter().zip(&u) {
                        max_u_step_excess = max_u_step_excess.max(a - b - b_constant * dc);
                    }
                }
            }
            prev_u = Some(u);
        }
        rungs.push(RungStats {
            index: i,
            rate: slice.rate,
            iterations: slice.iterations,
            min_value,
            max_value,
            min_slope,
            max_slope,
            min_curvature,
            max_curvature,
            min_u,
            max_u,
            min_u_slope,
            max_u_slope,
        });
    }
    LadderDiagnostics {
        total_iterations: rungs.iter().map(|r| r.iterations).sum(),
        rungs,
        b_constant,
        max_u_step_excess,
    }
}

/// Output of a full ladder solve.
#[derive(Debug, Clone)]
pub struct LadderSolution {
    pub boundary: BoundarySolution,
    pub ladder: RateLadder,
    pub slices: Vec<ValueSlice>,
    pub diagnostics: LadderDiagnostics,
}

/// Solve `g` and then every rung from the top down.
pub fn solve_ladder(ops: &Operators, ladder: RateLadder, settings: &LadderSettings) -> Result<LadderSolution> {
    let boundary = solve_g(ops, &settings.solver)?;
    solve_ladder_from(ops, ladder, settings, boundary)
}

/// Ladder solve reusing an existing boundary solution.
pub fn solve_ladder_from(
    ops: &Operators,
    ladder: RateLadder,
    settings: &LadderSettings,
    boundary: BoundarySolution,
) -> Result<LadderSolution> {
    if (ladder.c_bar() - ops.params().c_bar).abs() > 0.0 {
        return Err(Error::validation("ladder", "ladder top differs from model.c_bar"));
    }
    let dc = ladder.dc();
    let mut slices = Vec::with_capacity(ladder.len());
    slices.push(ValueSlice::top(&boundary, ladder.rate(0)));
    for i in 1..ladder.len() {
        let slice = solve_rung(&slices[i - 1], ladder.rate(i), ops, settings, dc).map_err(|e| Error::Rung {
            index: i,
            source: Box::new(e),
        })?;
        log::debug!("rung {i} at c = {:.6}: {} iterations", slice.rate, slice.iterations);
        slices.push(slice);
    }
    let diagnostics = ladder_diagnostics(&slices, ops, dc);
    Ok(LadderSolution {
        boundary,
        ladder,
        slices,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{ConvolutionMethod, Grid};
    use crate::model::{ClaimDistribution, ModelParams};

    fn setup(n_x: usize) -> Operators {
        let p = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0).unwrap();
        let d = ClaimDistribution::exponential(0.5).unwrap();
        Operators::new(&p, &d, Grid::new(30.0, n_x).unwrap(), ConvolutionMethod::Fft)
    }

    #[test]
    fn rates_run_from_top_to_floor() {
        let l = RateLadder::new(1.0, -1.0, 8).unwrap();
        assert_eq!(l.rate(0), 1.0);
        assert_eq!(l.rate(8), -1.0);
        assert_eq!(l.dc(), 0.25);
        assert_eq!(l.position(0.5).unwrap(), 2.0);
        assert!(matches!(l.position(1.5), Err(Error::RateOutOfRange { .. })));
        assert!(RateLadder::new(1.0, 1.0, 4).is_err());
        assert!(RateLadder::new(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn rung_at_top_rate_reproduces_g() {
        let ops = setup(400);
        let settings = LadderSettings::default();
        let g = solve_g(&ops, &settings.solver).unwrap();
        let top = ValueSlice::top(&g, 1.0);
        let again = solve_rung(&top, 1.0, &ops, &settings, 1.0 / 64.0).unwrap();
        for (a, b) in again.values().iter().zip(g.g.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(again.switch_mask.iter().all(|&m| m));
    }

    #[test]
    fn small_ladder_respects_bounds() {
        let ops = setup(400);
        let ladder = RateLadder::new(1.0, 0.0, 64).unwrap();
        let sol = solve_ladder(&ops, ladder, &LadderSettings::default()).unwrap();
        for r in &sol.diagnostics.rungs {
            assert!(r.min_value >= 4.0 - 1e-8 && r.max_value <= 10.0 + 1e-8);
            assert!(r.min_u >= -1e-6 && r.max_u <= 2.0 + 1e-6, "rung {} u in [{}, {}]", r.index, r.min_u, r.max_u);
            assert!(r.min_slope >= -1e-8 && r.max_slope <= 1.2 + 1e-8);
        }
        assert!(sol.diagnostics.max_u_step_excess <= 1e-6);
    }

    #[test]
    fn rung_above_previous_rate_is_rejected() {
        let ops = setup(128);
        let g = solve_g(&ops, &SolverSettings::default()).unwrap();
        let top = ValueSlice::top(&g, 0.5);
        assert!(solve_rung(&top, 0.75, &ops, &LadderSettings::default(), 0.25).is_err());
    }
}
