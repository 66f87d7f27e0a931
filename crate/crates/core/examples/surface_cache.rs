//! Write a solved surface to the binary cache and read it back.

use dividend_ratchet::cache::{hex, read_surface, write_surface};
use dividend_ratchet::config::RunConfig;
use dividend_ratchet::ladder::solve_ladder;
use dividend_ratchet::surface::ValueSurface;

const CONFIG: &str = r#"
[model]
mu = 2.0
lambda = 1.0
r = 0.1
ell = 1.2
c_bar = 1.0
c_floor = 0.0

[claims]
kind = "exponential"
params = { mean = 0.5 }

[grid]
L = 30.0
n_x = 2000

[ladder]
n = 64
"#;

fn main() -> dividend_ratchet::Result<()> {
    let config = RunConfig::from_toml_str(CONFIG)?;
    let hash = config.surface_hash();
    let sol = solve_ladder(&config.operators(), config.ladder, &config.settings)?;
    let surface = ValueSurface::from_solution(config.params, &sol, config.settings.eq_factor, hash);

    let dir = std::env::temp_dir().join("ratchet-cache-example");
    let path = dir.join(format!("{}.bin", hex(&hash)));
    write_surface(&path, &surface)?;
    let back = read_surface(&path, config.params, Some(hash))?;
    let same = surface
        .slices
        .iter()
        .zip(&back.slices)
        .all(|(a, b)| a.values() == b.values() && a.switch_mask == b.switch_mask);
    println!("{} ({} bytes), identical after reload: {same}", path.display(), std::fs::metadata(&path)?.len());

    let stale = config.with_value("model.ell", 1.3)?.surface_hash();
    match read_surface(&path, config.params, Some(stale)) {
        Err(e) => println!("changed configuration: {e}"),
        Ok(_) => println!("unexpected: stale cache accepted"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
