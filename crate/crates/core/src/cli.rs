//! Command-line front end shared by the `ratchet` binary and the tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::boundary::{boundary_residual_report, solve_g};
use crate::cache::{hex, read_surface, write_surface};
use crate::config::{load_config, RunConfig};
use crate::error::{Error, Result};
use crate::ladder::{ladder_diagnostics, solve_ladder};
use crate::simulate::{estimate, simulate_path, McSettings, PoissonClaims, RatchetPolicy, Strategy};
use crate::surface::ValueSurface;
use crate::verify::{mc_cross_check, refinement_check, run_invariant_suite, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "ratchet", version, about = "Dividend ratcheting with capital injection: solve, inspect, simulate, verify")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "ratchet.toml")]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Ignore cached surfaces and solve again.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the top-rate value g and write boundary.csv.
    Boundary,
    /// Solve the full ladder; writes the surface cache, surface.csv and diagnostics.json.
    Solve,
    /// Write boundary_curve.csv with the free boundary per rung.
    BoundaryCurve,
    /// Write rate_map.csv with the equivalent maximum rate on the lattice.
    RateMap,
    /// Monte Carlo payoff of one strategy; writes simulate.json.
    Simulate {
        /// boundary | ratchet | constant:<rate>
        #[arg(long, default_value = "ratchet")]
        strategy: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        /// Initial rate; defaults to model.c_floor.
        #[arg(long, allow_negative_numbers = true)]
        c0: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        antithetic: bool,
        /// Also write the first N paths to paths.csv.
        #[arg(long)]
        per_path: Option<usize>,
    },
    /// Run the invariant suite and the Monte Carlo cross-check; writes certificate.json.
    Verify {
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve along one parameter axis and write sweep.csv.
    Sweep {
        /// Key such as model.ell, model.lambda, grid.n_x or ladder.n.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match dispatch(&cli, config) {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error[{}]: {e}", e.name());
    2
}

/// Execute one subcommand; `Ok(1)` signals a failed certificate.
pub fn dispatch(cli: &Cli, mut config: RunConfig) -> Result<i32> {
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    let out = config.output_dir.clone();
    fs::create_dir_all(&out)?;
    match &cli.command {
        Command::Boundary => {
            let ops = config.operators();
            let solution = solve_g(&ops, &config.settings.solver)?;
            let report = boundary_residual_report(&solution, &ops);
            let mut csv = String::from("x,g,g_prime,residual\n");
            let grid = ops.grid();
            for j in 0..grid.nodes() {
                row(
                    &mut csv,
                    &[grid.x(j), solution.g.values()[j], solution.g_prime.values()[j], report.residual[j]],
                );
            }
            write_text(&out.join("boundary.csv"), &csv)?;
            log::info!(
                "boundary: {} iterations, max residual {:.3e}",
                solution.picard_iterations,
                report.max_residual
            );
        }
        Command::Solve => {
            let surface = obtain_surface(&config, &out, cli.force)?;
            let ops = config.operators();
            write_text(&out.join("surface.csv"), &surface_csv(&surface))?;
            let diag = ladder_diagnostics(&surface.slices, &ops, surface.ladder.dc());
            write_json(&out.join("diagnostics.json"), &diag)?;
        }
        Command::BoundaryCurve => {
            let surface = obtain_surface(&config, &out, cli.force)?;
            let curve = surface.extract_boundary()?;
            let mut csv = String::from("c,x_star,v_x_at_0\n");
            for i in 0..curve.rates.len() {
                row(&mut csv, &[curve.rates[i], curve.x_star[i], curve.slope_at_zero[i]]);
            }
            write_text(&out.join("boundary_curve.csv"), &csv)?;
        }
        Command::RateMap => {
            let surface = obtain_surface(&config, &out, cli.force)?;
            let map = surface.rate_map();
            let mut csv = String::from("c,x,max_rate\n");
            for (i, line) in map.map.iter().enumerate() {
                for (j, m) in line.iter().enumerate() {
                    row(&mut csv, &[map.rates[i], map.xs[j], *m]);
                }
            }
            write_text(&out.join("rate_map.csv"), &csv)?;
        }
        Command::Simulate {
            strategy,
            x0,
            c0,
            paths,
            seed,
            horizon,
            antithetic,
            per_path,
        } => {
            let settings = McSettings {
                paths: paths.unwrap_or(config.simulation.paths),
                seed: seed.unwrap_or(config.simulation.seed),
                horizon: horizon.unwrap_or(config.simulation.horizon),
                antithetic: *antithetic || config.simulation.antithetic,
            };
            let c0 = c0.unwrap_or(config.params.c_floor);
            let (strategy, value) = parse_strategy(strategy, &config, &out, cli.force, *x0, c0)?;
            let est = estimate(&config.params, &config.claims, &strategy, *x0, &settings)?;
            write_json(&out.join("simulate.json"), &SimulateOutput { estimate: est, c0, value })?;
            if let Some(count) = per_path {
                let mut csv = String::from("path,payoff,discounted_dividends,discounted_injections,total_injected,claims,final_rate\n");
                for k in 0..(*count).min(settings.paths) as u64 {
                    let mut source = PoissonClaims::new(config.params.lambda, &config.claims, settings.seed, k, false);
                    let path = simulate_path(&config.params, &strategy, *x0, &mut source, settings.horizon, false);
                    row(
                        &mut csv,
                        &[
                            k as f64,
                            path.payoff(),
                            path.discounted_dividends,
                            path.discounted_injections,
                            path.total_injected,
                            path.claims as f64,
                            path.final_rate,
                        ],
                    );
                }
                write_text(&out.join("paths.csv"), &csv)?;
            }
        }
        Command::Verify { paths, seed } => {
            let surface = obtain_surface(&config, &out, cli.force)?;
            let ops = config.operators();
            let mut cert = run_invariant_suite(&surface, &ops, &Tolerances::default());
            let eps_disc = match config.verify.eps_disc {
                Some(eps) => eps,
                None => {
                    let refined = config.refined();
                    let fine = obtain_surface(&refined, &out, cli.force)?;
                    let r = refinement_check(&surface, &fine);
                    cert.at_most(
                        "refinement.free_boundary",
                        "the free boundary moves by at most 5 cells under refinement",
                        r.boundary_shift_cells,
                        5.0,
                    );
                    cert.note(format!(
                        "refinement: max change {:.6e}, eps_disc {:.6e}, kappa {:.6e}",
                        r.max_difference, r.eps_disc, r.kappa
                    ));
                    r.eps_disc
                }
            };
            let settings = McSettings {
                paths: paths.unwrap_or(config.simulation.paths),
                seed: seed.unwrap_or(config.simulation.seed),
                ..config.simulation
            };
            cert.merge(mc_cross_check(
                &surface,
                &config.claims,
                &config.verify.points,
                &config.verify.constant_rates,
                &settings,
                eps_disc,
            )?);
            write_json(&out.join("certificate.json"), &cert)?;
            for failed in cert.failures() {
                log::warn!("check {} failed: observed {} vs bound {}", failed.name, failed.observed, failed.bound);
            }
            return Ok(if cert.pass { 0 } else { 1 });
        }
        Command::Sweep { param, values } => {
            let mut csv = String::from("value,g_at_0,v_at_0_floor,max_free_boundary,iterations\n");
            for &value in values {
                let cfg = config.with_value(param, value)?;
                let surface = obtain_surface(&cfg, &out, cli.force)?;
                let curve = surface.boundary_curve();
                let iterations: usize = surface.slices.iter().map(|s| s.iterations).sum();
                row(
                    &mut csv,
                    &[
                        value,
                        surface.rung(0)[0],
                        surface.value_at(0.0, cfg.params.c_floor)?,
                        curve.max_finite(),
                        iterations as f64,
                    ],
                );
            }
            write_text(&out.join("sweep.csv"), &format!("# {param}\n{csv}"))?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct SimulateOutput {
    #[serde(flatten)]
    estimate: crate::simulate::PayoffEstimate,
    c0: f64,
    /// Surface value at `(x0, c0)` for the ratchet strategy.
    value: Option<f64>,
}

/// Strategy named on the command line, with the surface value at
/// `(x0, c0)` when a surface was needed to build it.
fn parse_strategy(
    text: &str,
    config: &RunConfig,
    out: &Path,
    force: bool,
    x0: f64,
    c0: f64,
) -> Result<(Strategy, Option<f64>)> {
    match text {
        "boundary" => Ok((Strategy::Boundary, None)),
        "ratchet" => {
            let surface = obtain_surface(config, out, force)?;
            let policy = RatchetPolicy::from_surface(&surface, c0)?;
            Ok((Strategy::Ratchet(policy), Some(surface.value_at(x0, c0)?)))
        }
        other => match other.strip_prefix("constant:").map(str::parse::<f64>) {
            Some(Ok(rate)) if rate <= config.params.c_bar => Ok((Strategy::Constant(rate), None)),
            Some(Ok(rate)) => Err(Error::validation("strategy", format!("constant rate {rate} exceeds c_bar"))),
            _ => Err(Error::validation(
                "strategy",
                format!("expected boundary, ratchet or constant:<rate>, got `{other}`"),
            )),
        },
    }
}

/// Cache location for a configuration inside `out`.
pub fn cache_path(config: &RunConfig, out: &Path) -> PathBuf {
    out.join("cache").join(format!("{}.bin", hex(&config.surface_hash())))
}

/// Load the surface from the cache or solve and store it.
pub fn obtain_surface(config: &RunConfig, out: &Path, force: bool) -> Result<ValueSurface> {
    let path = cache_path(config, out);
    let hash = config.surface_hash();
    if !force && path.exists() {
        match read_surface(&path, config.params, Some(hash)) {
            Ok(surface) => {
                log::info!("cache hit: {}", path.display());
                surface.extract_boundary()?;
                return Ok(surface);
            }
            Err(e) => log::warn!("ignoring cache: {e}"),
        }
    }
    let ops = config.operators();
    let started = std::time::Instant::now();
    let solution = solve_ladder(&ops, config.ladder, &config.settings)?;
    log::info!(
        "solved {} rungs on {} nodes in {:.2?} ({} sweeps)",
        config.ladder.len(),
        config.grid.nodes(),
        started.elapsed(),
        solution.diagnostics.total_iterations
    );
    let surface = ValueSurface::from_solution(config.params, &solution, config.settings.eq_factor, hash);
    surface.extract_boundary()?;
    write_surface(&path, &surface)?;
    log::info!("wrote cache: {}", path.display());
    Ok(surface)
}

/// Long-format table `c,x,v,v_x,switch` of every rung.
pub fn surface_csv(surface: &ValueSurface) -> String {
    let mut csv = String::from("c,x,v,v_x,switch\n");
    for (i, slice) in surface.slices.iter().enumerate() {
        let vx = surface.slope(i);
        for j in 0..surface.grid.nodes() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                slice.rate,
                surface.grid.x(j),
                slice.values()[j],
                vx[j],
                slice.switch_mask[j] as u8
            );
        }
    }
    csv
}

/// Append one CSV row; `f64` display is the shortest round-trip form.
fn row(csv: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            csv.push(',');
        }
        let _ = write!(csv, "{v}");
    }
    csv.push('\n');
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_text(path, &text)
}
