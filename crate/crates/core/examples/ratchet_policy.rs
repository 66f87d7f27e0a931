//! The ratchet feedback read off the surface, one recorded path, and its
//! payoff against fixed-rate strategies.

use dividend_ratchet::discretization::{ConvolutionMethod, Grid, Operators};
use dividend_ratchet::ladder::{solve_ladder, LadderSettings, RateLadder};
use dividend_ratchet::model::{ClaimDistribution, ModelParams};
use dividend_ratchet::simulate::{
    default_horizon, estimate, simulate_path, EventKind, McSettings, PoissonClaims, RatchetPolicy, Strategy,
};
use dividend_ratchet::surface::ValueSurface;

fn main() -> dividend_ratchet::Result<()> {
    let p = ModelParams::new(1.5, 1.0, 0.1, 1.5, 1.0, 0.0)?;
    let d = ClaimDistribution::exponential(1.0)?;
    let ops = Operators::new(&p, &d, Grid::new(120.0, 3000)?, ConvolutionMethod::Fft);
    let settings = LadderSettings::default();
    let sol = solve_ladder(&ops, RateLadder::new(p.c_bar, p.c_floor, 128)?, &settings)?;
    let surface = ValueSurface::from_solution(p, &sol, settings.eq_factor, [0; 32]);

    let policy = RatchetPolicy::from_surface(&surface, 0.0)?;
    println!("{} ratchet levels, every 16th (running max, rate):", policy.steps.len());
    for (level, rate) in policy.steps.iter().step_by(16) {
        println!("  {level:>8.4} -> {rate:.4}");
    }
    let strategy = Strategy::Ratchet(policy);

    let mut source = PoissonClaims::new(p.lambda, &d, 7, 0, false);
    let path = simulate_path(&p, &strategy, 0.0, &mut source, 40.0, true);
    let ratchets = path.events.iter().filter(|e| e.kind == EventKind::Ratchet).count();
    println!(
        "one path to t = 40: {} claims, {ratchets} ratchets, final rate {:.4}, injected {:.4}",
        path.claims, path.final_rate, path.total_injected
    );

    let mc = McSettings {
        paths: 50_000,
        seed: 42,
        horizon: default_horizon(p.r),
        antithetic: false,
    };
    println!("v(0, 0) = {:.5}", surface.value_at(0.0, 0.0)?);
    for s in [strategy, Strategy::Boundary, Strategy::Constant(0.0), Strategy::Constant(0.5)] {
        let est = estimate(&p, &d, &s, 0.0, &mc)?;
        println!("{:<14} {:.5} ± {:.5}", s.label(), est.mean, est.std_error);
    }
    Ok(())
}
