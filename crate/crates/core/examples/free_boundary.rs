//! Free boundary per rung and the equivalent maximum rate around it.

use dividend_ratchet::discretization::{ConvolutionMethod, Grid, Operators};
use dividend_ratchet::ladder::{solve_ladder, LadderSettings, RateLadder};
use dividend_ratchet::model::{ClaimDistribution, ModelParams};
use dividend_ratchet::surface::ValueSurface;

fn main() -> dividend_ratchet::Result<()> {
    let p = ModelParams::new(1.5, 1.0, 0.1, 1.5, 1.0, 0.0)?;
    let d = ClaimDistribution::exponential(1.0)?;
    let ops = Operators::new(&p, &d, Grid::new(120.0, 3000)?, ConvolutionMethod::Fft);
    let settings = LadderSettings::default();
    let sol = solve_ladder(&ops, RateLadder::new(p.c_bar, p.c_floor, 64)?, &settings)?;
    let surface = ValueSurface::from_solution(p, &sol, settings.eq_factor, [0; 32]);

    let curve = surface.extract_boundary()?;
    println!("{:>8} {:>10} {:>10}", "c", "x*(c)", "v_x(0,c)");
    for i in (0..curve.rates.len()).step_by(8) {
        println!("{:>8.4} {:>10.4} {:>10.4}", curve.rates[i], curve.x_star[i], curve.slope_at_zero[i]);
    }

    println!("\nequivalent maximum rate M(x, c):");
    print!("{:>6}", "x \\ c");
    let cs = [0.0, 0.25, 0.5, 0.75];
    for c in cs {
        print!("{c:>8.2}");
    }
    println!();
    for x in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5] {
        print!("{x:>6.2}");
        for c in cs {
            print!("{:>8.4}", surface.equivalent_max_rate(x, c)?);
        }
        println!();
    }
    Ok(())
}
