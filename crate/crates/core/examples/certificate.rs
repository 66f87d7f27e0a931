//! Invariant suite, refinement budget and Monte Carlo cross-check combined
//! into one certificate.

use dividend_ratchet::config::RunConfig;
use dividend_ratchet::ladder::solve_ladder;
use dividend_ratchet::surface::ValueSurface;
use dividend_ratchet::verify::{mc_cross_check, refinement_check, run_invariant_suite, Tolerances};

const CONFIG: &str = r#"
[model]
mu = 1.5
lambda = 1.0
r = 0.1
ell = 1.5
c_bar = 1.0
c_floor = 0.0

[claims]
kind = "exponential"
params = { mean = 1.0 }

[grid]
n_x = 1500
fft = true

[ladder]
n = 64

[simulation]
paths = 20000

[verify]
points = [[0.0, 0.0], [1.0, 0.5]]
constant_rates = [0.5]
"#;

fn solve(config: &RunConfig) -> dividend_ratchet::Result<ValueSurface> {
    let sol = solve_ladder(&config.operators(), config.ladder, &config.settings)?;
    Ok(ValueSurface::from_solution(config.params, &sol, config.settings.eq_factor, config.surface_hash()))
}

fn main() -> dividend_ratchet::Result<()> {
    let config = RunConfig::from_toml_str(CONFIG)?;
    let surface = solve(&config)?;
    let fine = solve(&config.refined())?;
    let refinement = refinement_check(&surface, &fine);
    println!(
        "refinement: max change {:.3e}, eps_disc {:.3e}, boundary shift {:.1} cells",
        refinement.max_difference, refinement.eps_disc, refinement.boundary_shift_cells
    );

    let mut cert = run_invariant_suite(&surface, &config.operators(), &Tolerances::default());
    cert.merge(mc_cross_check(
        &surface,
        &config.claims,
        &config.verify.points,
        &config.verify.constant_rates,
        &config.simulation,
        refinement.eps_disc,
    )?);
    for c in &cert.checks {
        println!(
            "{:<40} {} observed {:>11.3e} bound {:>11.3e}",
            c.name,
            if c.pass { "ok  " } else { "FAIL" },
            c.observed,
            c.bound
        );
    }
    println!("certificate passes: {}", cert.pass);
    Ok(())
}
