//! How the value at zero surplus and the free boundary react to the
//! injection cost.

use dividend_ratchet::config::RunConfig;
use dividend_ratchet::ladder::solve_ladder;
use dividend_ratchet::surface::ValueSurface;

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
"#;

fn main() -> dividend_ratchet::Result<()> {
    let base = RunConfig::from_toml_str(CONFIG)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "ell", "g(0)", "v(0,0)", "max x*");
    for ell in [1.05, 1.2, 1.5, 2.0, 3.0] {
        let config = base.with_value("model.ell", ell)?;
        let sol = solve_ladder(&config.operators(), config.ladder, &config.settings)?;
        let s = ValueSurface::from_solution(config.params, &sol, config.settings.eq_factor, [0; 32]);
        let x_star = s.boundary_curve().max_finite();
        println!("{ell:>6.2} {:>10.5} {:>10.5} {:>10.4}", s.rung(0)[0], s.value_at(0.0, 0.0)?, x_star);
    }
    Ok(())
}
