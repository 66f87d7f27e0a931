//! Value at the top rate on the reference set, against the closed form
//! available for exponential claims.

use dividend_ratchet::boundary::{boundary_residual_report, solve_g};
use dividend_ratchet::discretization::{ConvolutionMethod, Grid, Operators};
use dividend_ratchet::model::{ClaimDistribution, ModelParams};
use dividend_ratchet::sweep::SolverSettings;

fn main() -> dividend_ratchet::Result<()> {
    let p = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0)?;
    let d = ClaimDistribution::exponential(0.5)?;
    // g(x) = c̄/r − A e^{−ρx} with ρ the far-field decay and A = λℓγ/(r + (μ − c̄)ρ).
    let rho = p.far_field_decay(&d).expect("light tail");
    let amp = p.lambda * p.ell * d.mean() / (p.r + (p.mu - p.c_bar) * rho);
    let exact = |x: f64| p.value_upper() - amp * (-rho * x).exp();

    for n_x in [500, 1000, 2000, 4000] {
        let ops = Operators::new(&p, &d, Grid::new(30.0, n_x)?, ConvolutionMethod::Fft);
        let sol = solve_g(&ops, &SolverSettings::default())?;
        let report = boundary_residual_report(&sol, &ops);
        println!(
            "n_x {n_x:>5}: g(0) = {:.6} (exact {:.6}), g'(0) = {:.4}, residual {:.1e}, {} iterations",
            sol.g.values()[0],
            exact(0.0),
            sol.g_prime.values()[0],
            report.max_residual,
            sol.picard_iterations
        );
    }
    Ok(())
}
