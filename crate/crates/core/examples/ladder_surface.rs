//! Solve the whole rate ladder and print per-rung diagnostics.

use std::time::Instant;

use dividend_ratchet::discretization::{ConvolutionMethod, Grid, Operators};
use dividend_ratchet::ladder::{solve_ladder, LadderSettings, RateLadder};
use dividend_ratchet::model::{ClaimDistribution, ModelParams};

fn main() -> dividend_ratchet::Result<()> {
    let p = ModelParams::new(1.5, 1.0, 0.1, 1.5, 1.0, 0.0)?;
    let d = ClaimDistribution::exponential(1.0)?;
    let ops = Operators::new(&p, &d, Grid::new(120.0, 3000)?, ConvolutionMethod::Fft);
    let started = Instant::now();
    let sol = solve_ladder(&ops, RateLadder::new(p.c_bar, p.c_floor, 128)?, &LadderSettings::default())?;
    println!("solved {} rungs in {:.2?}", sol.slices.len(), started.elapsed());
    println!("{:>8} {:>10} {:>10} {:>9} {:>9} {:>6}", "c", "v(0,c)", "v_x(0,c)", "min u", "max u", "iters");
    for r in sol.diagnostics.rungs.iter().step_by(16) {
        let s = &sol.slices[r.index];
        println!(
            "{:>8.4} {:>10.5} {:>10.5} {:>9.4} {:>9.4} {:>6}",
            r.rate,
            s.values()[0],
            s.v_prime.values()[0],
            r.min_u,
            r.max_u,
            r.iterations
        );
    }
    println!(
        "step bound B = {:.2}, worst step excess {:.2e}",
        sol.diagnostics.b_constant, sol.diagnostics.max_u_step_excess
    );
    Ok(())
}
