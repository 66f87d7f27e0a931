//! Monte Carlo payoff of paying the top rate from the start, against g.

use dividend_ratchet::boundary::solve_g;
use dividend_ratchet::discretization::{ConvolutionMethod, Grid, Operators};
use dividend_ratchet::model::{ClaimDistribution, ModelParams};
use dividend_ratchet::simulate::{default_horizon, estimate, McSettings, Strategy};
use dividend_ratchet::sweep::SolverSettings;

fn main() -> dividend_ratchet::Result<()> {
    let p = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0)?;
    let d = ClaimDistribution::exponential(0.5)?;
    let ops = Operators::new(&p, &d, Grid::new(30.0, 2000)?, ConvolutionMethod::Fft);
    let g = solve_g(&ops, &SolverSettings::default())?.g;
    for antithetic in [false, true] {
        let settings = McSettings {
            paths: 100_000,
            seed: 42,
            horizon: default_horizon(p.r),
            antithetic,
        };
        for x0 in [0.0, 1.0, 5.0] {
            let est = estimate(&p, &d, &Strategy::Boundary, x0, &settings)?;
            println!(
                "antithetic {antithetic:<5} x0 = {x0}: mc {:.5} ± {:.5}, g = {:.5}",
                est.mean,
                est.std_error,
                g.interpolate(x0)
            );
        }
    }
    Ok(())
}
