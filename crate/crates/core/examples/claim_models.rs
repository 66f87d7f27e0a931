//! Claim-size families: moments, stop-loss transform, sampling and the
//! far-field decay rate they induce.

use dividend_ratchet::model::{ClaimDistribution, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dividend_ratchet::Result<()> {
    let params = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0)?;
    let laws = [
        ClaimDistribution::exponential(0.5)?,
        ClaimDistribution::hyper_exponential(vec![0.8, 0.2], vec![0.25, 1.5])?,
        ClaimDistribution::shifted_pareto(3.0, 1.0)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:<18} {:>8} {:>10} {:>10} {:>12} {:>10}", "law", "mean", "E(Z-1)+", "h(0)", "sample mean", "decay");
    for d in &laws {
        let n = 200_000;
        let sum: f64 = (0..n).map(|_| d.sample(rng.gen(), rng.gen())).sum();
        let decay = params
            .far_field_decay(d)
            .map_or("none".to_string(), |rho| format!("{rho:.5}"));
        println!(
            "{:<18} {:>8.4} {:>10.5} {:>10.5} {:>12.4} {:>10}",
            d.kind_name(),
            d.mean(),
            d.stop_loss(1.0),
            params.h(d, 0.0),
            sum / n as f64,
            decay
        );
    }
    Ok(())
}
