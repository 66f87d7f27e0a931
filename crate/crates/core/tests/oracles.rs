//! Independent oracles: closed forms for exponential claims, quadrature for
//! the claim transforms, and Monte Carlo for constant-rate strategies.

use approx::assert_abs_diff_eq;
use dividend_ratchet::boundary::solve_g;
use dividend_ratchet::discretization::{apply_i, apply_t, ConvolutionMethod, Grid, GridFn, Operators};
use dividend_ratchet::model::{ClaimDistribution, ModelParams};
use dividend_ratchet::simulate::{default_horizon, estimate, McSettings, Strategy};
use dividend_ratchet::sweep::SolverSettings;

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Simpson on `[a, b]` split at `a + 1, a + 10, a + 100, …` for long tails.
fn simpson_long(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let (mut lo, mut width) = (a, 1.0);
    while lo < b {
        let hi = (a + width).min(b);
        total += simpson(&f, lo, hi, 4000);
        lo = hi;
        width *= 10.0;
    }
    total
}

/// Value of paying the constant rate `c` forever with exponential claims of
/// mean `m`: `c/r − A e^{s x}`, with `s < 0` the negative root of
/// `(μ−c)s² + ((μ−c)/m − r − λ)s − r/m = 0` and `A = λℓm / (r − (μ−c)s)`.
fn constant_rate_value(p: &ModelParams, m: f64, c: f64, x: f64) -> f64 {
    let a = p.mu - c;
    let b = a / m - p.r - p.lambda;
    let q = -p.r / m;
    let s = (-b - (b * b - 4.0 * a * q).sqrt()) / (2.0 * a);
    let amp = p.lambda * p.ell * m / (p.r - a * s);
    c / p.r - amp * (s * x).exp()
}

fn p1() -> ModelParams {
    ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0).unwrap()
}

fn p2() -> ModelParams {
    ModelParams::new(1.5, 1.0, 0.1, 1.5, 1.0, 0.0).unwrap()
}

#[test]
fn closed_form_boundary_value_exponential_claims() {
    for (p, m, length) in [(p1(), 0.5, 30.0), (p2(), 1.0, 120.0)] {
        let d = ClaimDistribution::exponential(m).unwrap();
        let mut errors = Vec::new();
        let dx0 = length / 1000.0;
        for n_x in [1000, 2000, 4000] {
            let grid = Grid::new(length, n_x).unwrap();
            let ops = Operators::new(&p, &d, grid, ConvolutionMethod::Fft);
            let g = solve_g(&ops, &SolverSettings::default()).unwrap().g;
            // Ignore the last few cells, where the Dirichlet datum replaces the decaying tail.
            let cut = grid.length() - 10.0;
            let err = (0..grid.nodes())
                .filter(|&j| grid.x(j) <= cut)
                .map(|j| (g.values()[j] - constant_rate_value(&p, m, p.c_bar, grid.x(j))).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors[0] < 0.6 * dx0, "{errors:?}");
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..2.5).contains(&ratio), "first-order convergence expected, {errors:?}");
        }
    }
}

#[test]
fn reference_boundary_value_at_zero() {
    // g(0) for the reference set: 10 − 0.6 / (0.1 + ρ), ρ = 0.45 + √0.4025.
    let rho = 0.45 + 0.4025f64.sqrt();
    let exact = 10.0 - 0.6 / (0.1 + rho);
    assert_abs_diff_eq!(constant_rate_value(&p1(), 0.5, 1.0, 0.0), exact, epsilon = 1e-12);
    assert_eq!(p1().far_field_decay(&ClaimDistribution::exponential(0.5).unwrap()).map(|r| (r - rho).abs() < 1e-10), Some(true));
}

#[test]
fn jump_operator_on_linear_function() {
    // 𝒯x = λ E[(x − Z)⁺] = λ(x − m + m e^{−x/m}) for exponential claims.
    let p = p1();
    let m = 0.5;
    let d = ClaimDistribution::exponential(m).unwrap();
    let grid = Grid::new(20.0, 2000).unwrap();
    let t = apply_t(&p, &d, &GridFn::from_fn(grid, |x| x));
    for j in 0..grid.nodes() {
        let x = grid.x(j);
        let exact = p.lambda * (x - m + m * (-x / m).exp());
        assert!((t.values()[j] - exact).abs() < 1e-12 + 1e-4 * grid.dx(), "x = {x}");
    }
}

#[test]
fn jump_operator_against_quadrature() {
    // Smooth test function and a Pareto law, checked by Simpson quadrature.
    let p = p1();
    let d = ClaimDistribution::shifted_pareto(3.0, 2.0).unwrap();
    let f = |x: f64| (0.3 * x).sin() + 2.0;
    let grid = Grid::new(10.0, 1000).unwrap();
    let t = apply_t(&p, &d, &GridFn::from_fn(grid, f));
    for j in (0..grid.nodes()).step_by(97) {
        let x = grid.x(j);
        let inner = if x > 0.0 { simpson(|z| f(x - z) * d.density(z), 0.0, x, 2000) } else { 0.0 };
        let exact = p.lambda * (inner + f(0.0) * d.survival(x));
        assert!((t.values()[j] - exact).abs() < 1e-5, "x = {x}: {} vs {exact}", t.values()[j]);
    }
}

#[test]
fn integral_operator_on_polynomials() {
    let p = ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0).unwrap();
    let laws = [
        ClaimDistribution::exponential(1.0).unwrap(),
        ClaimDistribution::hyper_exponential(vec![0.5, 0.5], vec![0.3, 2.0]).unwrap(),
    ];
    let poly = |x: f64| 1.0 - 0.5 * x + 0.25 * x * x - 0.02 * x * x * x;
    let grid = Grid::new(4.0, 400).unwrap();
    let dx = grid.dx();
    for d in &laws {
        let i = apply_i(&p, d, &GridFn::from_fn(grid, poly));
        for j in (0..grid.nodes()).step_by(13) {
            let x = grid.x(j);
            let exact = p.lambda * if x > 0.0 { simpson(|z| poly(x - z) * d.density(z), 0.0, x, 4000) } else { 0.0 };
            // The dx² bound holds for densities with modest curvature on the grid.
            assert!((i.values()[j] - exact).abs() <= 20.0 * dx * dx + 1e-10, "{} x = {x}", d.kind_name());
        }
    }
}

#[test]
fn derivative_of_jump_operator_is_integral_of_derivative() {
    let p = p1();
    let d = ClaimDistribution::exponential(1.0).unwrap();
    let grid = Grid::new(6.0, 1200).unwrap();
    let dx = grid.dx();
    let f = |x: f64| (0.7 * x).sin() + 0.1 * x * x;
    let df = |x: f64| 0.7 * (0.7 * x).cos() + 0.2 * x;
    let t = apply_t(&p, &d, &GridFn::from_fn(grid, f));
    let i = apply_i(&p, &d, &GridFn::from_fn(grid, df));
    for j in 1..grid.nodes() - 1 {
        let central = (t.values()[j + 1] - t.values()[j - 1]) / (2.0 * dx);
        assert!((central - i.values()[j]).abs() < 5.0 * dx, "node {j}");
    }
}

#[test]
fn claim_transforms_against_quadrature() {
    let laws = [
        ClaimDistribution::exponential(0.5).unwrap(),
        ClaimDistribution::hyper_exponential(vec![0.3, 0.7], vec![2.0, 0.25]).unwrap(),
        ClaimDistribution::shifted_pareto(4.0, 3.0).unwrap(),
    ];
    for d in &laws {
        let far = d.stop_loss_quantile(1e-12) * 4.0;
        let mass = simpson_long(|z| d.density(z), 0.0, far);
        assert!((mass - 1.0).abs() < 1e-6, "{}: mass {mass}", d.kind_name());
        let mean = simpson_long(|z| d.survival(z), 0.0, far);
        assert!((mean - d.mean()).abs() < 1e-6 * d.mean().max(1.0), "{}", d.kind_name());
        for x in [0.0, 0.3, 1.0, 2.5] {
            let cdf = simpson(|z| d.density(z), 0.0, x, 2000);
            assert!((cdf - d.cdf(x)).abs() < 1e-9, "{} cdf at {x}", d.kind_name());
            let sl = simpson_long(|z| d.survival(z), x, far);
            assert!((sl - d.stop_loss(x)).abs() < 1e-6, "{} stop loss at {x}", d.kind_name());
        }
    }
}

#[test]
fn hyper_exponential_is_a_mixture() {
    let d = ClaimDistribution::hyper_exponential(vec![0.25, 0.75], vec![3.0, 0.5]).unwrap();
    let a = ClaimDistribution::exponential(3.0).unwrap();
    let b = ClaimDistribution::exponential(0.5).unwrap();
    for x in [0.0, 0.1, 1.0, 4.0, 10.0] {
        assert_abs_diff_eq!(d.cdf(x), 0.25 * a.cdf(x) + 0.75 * b.cdf(x), epsilon = 1e-15);
        assert_abs_diff_eq!(d.stop_loss(x), 0.25 * a.stop_loss(x) + 0.75 * b.stop_loss(x), epsilon = 1e-14);
    }
    // Sampling: the branch uniform picks the component.
    assert_eq!(d.sample(0.1, 0.5), a.sample(0.0, 0.5));
    assert_eq!(d.sample(0.9, 0.5), b.sample(0.0, 0.5));
}

#[test]
fn monte_carlo_matches_constant_rate_closed_form() {
    let p = p1();
    let m = 0.5;
    let d = ClaimDistribution::exponential(m).unwrap();
    let settings = McSettings {
        paths: 40_000,
        seed: 11,
        horizon: default_horizon(p.r),
        antithetic: false,
    };
    for (c, x0) in [(0.0, 0.0), (0.5, 1.0), (1.0, 0.0), (0.8, 3.0), (-0.5, 2.0)] {
        let est = estimate(&p, &d, &Strategy::Constant(c), x0, &settings).unwrap();
        let exact = constant_rate_value(&p, m, c, x0);
        assert!(
            (est.mean - exact).abs() <= 4.0 * est.std_error + est.tail_bound,
            "c = {c}, x0 = {x0}: {} ± {} vs {exact}",
            est.mean,
            est.std_error
        );
    }
}

#[test]
fn antithetic_estimate_is_consistent() {
    let p = p2();
    let d = ClaimDistribution::exponential(1.0).unwrap();
    let mut settings = McSettings {
        paths: 20_000,
        seed: 3,
        horizon: default_horizon(p.r),
        antithetic: true,
    };
    let est = estimate(&p, &d, &Strategy::Constant(0.5), 1.0, &settings).unwrap();
    let exact = constant_rate_value(&p, 1.0, 0.5, 1.0);
    assert!((est.mean - exact).abs() <= 4.0 * est.std_error + est.tail_bound);
    settings.antithetic = false;
    let plain = estimate(&p, &d, &Strategy::Constant(0.5), 1.0, &settings).unwrap();
    assert!((est.mean - plain.mean).abs() <= 4.0 * (est.std_error + plain.std_error));
}
