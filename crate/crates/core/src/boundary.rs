//! Value at the maximal dividend rate.
//!
//! At `c = c̄` no further ratcheting is possible and the value `g` solves the
//! linear integro-differential equation `ℒ_c̄ g − 𝒯g + h − c̄ = 0` on `ℝ⁺`,
//! with `g → c̄/r` at infinity. The far-field limit is imposed as a Dirichlet
//! datum at `x = L`.

use serde::Serialize;

use crate::discretization::{second_difference, upwind_derivative, GridFn, Operators};
use crate::error::Result;
use crate::sweep::{SolverSettings, SweepProblem};

/// Discrete `g` together with its convergence record.
#[derive(Debug, Clone)]
pub struct BoundarySolution {
    pub g: GridFn,
    pub g_prime: GridFn,
    pub picard_iterations: usize,
    pub final_update_norm: f64,
    pub update_norms: Vec<f64>,
}

/// Solve for `g` on the operators' grid.
pub fn solve_g(ops: &Operators, settings: &SolverSettings) -> Result<BoundarySolution> {
    let p = ops.params();
    let grid = ops.grid();
    let top = p.value_upper();
    let problem = SweepProblem {
        ops,
        rate: p.c_bar,
        right_value: top,
        obstacle: None,
    };
    let fixed = problem.solve(vec![top; grid.nodes()], settings, "boundary solve")?;
    let g_prime = upwind_derivative(&fixed.values, grid.dx());
    Ok(BoundarySolution {
        g: GridFn::new(grid, fixed.values)?,
        g_prime: GridFn::new(grid, g_prime)?,
        picard_iterations: fixed.iterations,
        final_update_norm: fixed.update_norms.last().copied().unwrap_or(0.0),
        update_norms: fixed.update_norms,
    })
}

/// Per-node residual and bound margins of a solved `g`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub residual: Vec<f64>,
    /// Sup-norm of the residual on nodes `0..n_x` (the Dirichlet node excluded).
    pub max_residual: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub min_slope: f64,
    pub max_slope: f64,
    /// Largest discrete second difference; concavity needs it `≤ 0`.
    pub max_curvature: f64,
    pub min_curvature: f64,
}

pub fn boundary_residual_report(solution: &BoundarySolution, ops: &Operators) -> BoundaryReport {
    let p = ops.params();
    let g = solution.g.values();
    let residual = ops.residual(p.c_bar, g);
    let interior = &residual[..residual.len() - 1];
    let max_residual = interior.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let slopes = solution.g_prime.values();
    let curvature = second_difference(g, ops.grid().dx());
    BoundaryReport {
        max_residual,
        min_value: g.iter().copied().fold(f64::INFINITY, f64::min),
        max_value: g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_slope: slopes.iter().copied().fold(f64::INFINITY, f64::min),
        max_slope: slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_curvature: curvature.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_curvature: curvature.iter().copied().fold(f64::INFINITY, f64::min),
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{ConvolutionMethod, Grid};
    use crate::model::{ClaimDistribution, ModelParams};

    fn solve(method: ConvolutionMethod) -> (BoundarySolution, BoundaryReport) {
        let p = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0).unwrap();
        let d = ClaimDistribution::exponential(0.5).unwrap();
        let ops = Operators::new(&p, &d, Grid::new(30.0, 600).unwrap(), method);
        let sol = solve_g(&ops, &SolverSettings::default()).unwrap();
        let report = boundary_residual_report(&sol, &ops);
        (sol, report)
    }

    #[test]
    fn solves_to_tolerance_within_bounds() {
        let (sol, report) = solve(ConvolutionMethod::Direct);
        assert!(report.max_residual < 1e-8, "{}", report.max_residual);
        assert!(report.min_value >= 4.0 && report.max_value <= 10.0 + 1e-12);
        assert!(report.min_slope > -1e-10 && report.max_slope < 1.2);
        assert!(report.max_curvature < 1e-10);
        assert_eq!(*sol.g.values().last().unwrap(), 10.0);
        assert!(sol.final_update_norm < 1e-10);
    }

    #[test]
    fn convolution_methods_agree() {
        let (a, _) = solve(ConvolutionMethod::Direct);
        let (b, _) = solve(ConvolutionMethod::Fft);
        let gap = a.g.values().iter().zip(b.g.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(gap < 1e-9, "{gap}");
    }
}
