//! Event-driven simulation of the controlled surplus.
//!
//! Between claims the surplus moves linearly at `μ − C`, so a path is
//! advanced from event to event without time stepping. Capital is injected
//! only when a claim would push the surplus below zero, or at time zero for a
//! negative initial surplus. Under the ratchet strategy the rate is
//! `𝔐(max_{s≤t} X_s, c0)`; on the node lattice that is a step function of the
//! running maximum, so its jumps are extra events at known surplus levels.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ClaimDistribution, ModelParams};
use crate::surface::ValueSurface;

/// Default horizon `⌈10 ln 10 / r⌉`.
pub fn default_horizon(r: f64) -> f64 {
    (10.0 * std::f64::consts::LN_10 / r).ceil()
}

/// Stream of claim inter-arrival times and sizes.
pub trait ClaimSource {
    fn next_gap(&mut self) -> f64;
    fn next_claim(&mut self) -> f64;
}

/// Poisson arrivals with i.i.d. sizes, one ChaCha8 stream per path.
pub struct PoissonClaims<'a> {
    lambda: f64,
    claims: &'a ClaimDistribution,
    rng: ChaCha8Rng,
    antithetic: bool,
}

impl<'a> PoissonClaims<'a> {
    /// Stream `path` of the generator seeded with `seed`. With `antithetic`
    /// every uniform `u` is replaced by `1 − u`.
    pub fn new(lambda: f64, claims: &'a ClaimDistribution, seed: u64, path: u64, antithetic: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        Self {
            lambda,
            claims,
            rng,
            antithetic,
        }
    }

    fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        if self.antithetic {
            1.0 - u
        } else {
            u
        }
    }
}

impl ClaimSource for PoissonClaims<'_> {
    fn next_gap(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln() / self.lambda
    }

    fn next_claim(&mut self) -> f64 {
        let branch = if self.claims.needs_branch() { self.uniform() } else { 0.0 };
        let u = self.uniform();
        self.claims.sample(branch, u)
    }
}

/// Fixed list of `(gap, size)` pairs; no claims after the list runs out.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClaims {
    events: Vec<(f64, f64)>,
    next: usize,
    size: usize,
}

impl ScriptedClaims {
    pub fn new(events: Vec<(f64, f64)>) -> Self {
        Self {
            events,
            next: 0,
            size: 0,
        }
    }

    pub fn none() -> Self {
        Self::default()
    }
}

impl ClaimSource for ScriptedClaims {
    fn next_gap(&mut self) -> f64 {
        let gap = self.events.get(self.next).map_or(f64::INFINITY, |e| e.0);
        self.next += 1;
        gap
    }

    fn next_claim(&mut self) -> f64 {
        let z = self.events[self.size].1;
        self.size += 1;
        z
    }
}

/// Ratchet feedback `c ↦ 𝔐(m, c0)` as a step function of the running max.
#[derive(Debug, Clone, Serialize)]
pub struct RatchetPolicy {
    pub c0: f64,
    /// `(level, rate)`: once the running maximum reaches `level` the rate is
    /// at least `rate`. Levels increase strictly.
    pub steps: Vec<(f64, f64)>,
}

impl RatchetPolicy {
    pub fn from_surface(surface: &ValueSurface, c0: f64) -> Result<Self> {
        let mut current = surface.equivalent_max_rate(0.0, c0)?;
        let mut steps = Vec::new();
        if current > c0 {
            steps.push((0.0, current));
        }
        for j in 1..surface.grid.nodes() {
            let x = surface.grid.x(j);
            let m = surface.equivalent_max_rate(x, c0)?;
            if m > current {
                steps.push((x, m));
                current = m;
            }
        }
        let c_bar = surface.ladder.c_bar();
        if current < c_bar {
            steps.push((surface.grid.length(), c_bar));
        }
        Ok(Self { c0, steps })
    }

    /// Rate for running maximum `m`.
    pub fn rate(&self, m: f64) -> f64 {
        let k = self.steps.partition_point(|&(level, _)| level <= m);
        if k == 0 {
            self.c0
        } else {
            self.steps[k - 1].1
        }
    }

    /// First level strictly above `m` together with its rate.
    fn next_step(&self, m: f64) -> Option<(f64, f64)> {
        let k = self.steps.partition_point(|&(level, _)| level <= m);
        self.steps.get(k).copied()
    }
}

/// Dividend strategy driving a simulated path.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// Constant rate `c̄` with minimal injections.
    Boundary,
    Constant(f64),
    Ratchet(RatchetPolicy),
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Boundary => "boundary".into(),
            Strategy::Constant(c) => format!("constant:{c}"),
            Strategy::Ratchet(_) => "ratchet".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Claim,
    Ratchet,
    Horizon,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
    pub x_before: f64,
    pub x_after: f64,
    pub rate: f64,
    pub injected: f64,
}

/// One simulated path.
#[derive(Debug, Clone, Serialize)]
pub struct PathRecord {
    /// Empty unless recording was requested.
    pub events: Vec<PathEvent>,
    /// `∫₀ᵀ e^{−rt} C_t dt`.
    pub discounted_dividends: f64,
    /// `ℓ ∫₀ᵀ e^{−rt} dD_t`.
    pub discounted_injections: f64,
    pub total_injected: f64,
    pub final_rate: f64,
    pub claims: usize,
}

impl PathRecord {
    pub fn payoff(&self) -> f64 {
        self.discounted_dividends - self.discounted_injections
    }
}

/// Simulate one path on `[0, horizon]`.
pub fn simulate_path(
    params: &ModelParams,
    strategy: &Strategy,
    x0: f64,
    source: &mut impl ClaimSource,
    horizon: f64,
    record: bool,
) -> PathRecord {
    let r = params.r;
    let mut out = PathRecord {
        events: Vec::new(),
        discounted_dividends: 0.0,
        discounted_injections: 0.0,
        total_injected: 0.0,
        final_rate: 0.0,
        claims: 0,
    };
    let mut x = x0;
    if x < 0.0 {
        out.total_injected = -x;
        out.discounted_injections = params.ell * -x;
        x = 0.0;
    }
    let mut running_max = x;
    let mut rate = match strategy {
        Strategy::Boundary => params.c_bar,
        Strategy::Constant(c) => *c,
        Strategy::Ratchet(policy) => policy.rate(running_max),
    };
    let push = |out: &mut PathRecord, time, kind, x_before, x_after, rate| {
        if record {
            let injected = out.total_injected;
            out.events.push(PathEvent {
                time,
                kind,
                x_before,
                x_after,
                rate,
                injected,
            });
        }
    };
    push(&mut out, 0.0, EventKind::Start, x0, x, rate);

    let mut t = 0.0;
    let mut discount = 1.0;
    let mut next_claim = source.next_gap();
    loop {
        let drift = params.mu - rate;
        let step = match strategy {
            Strategy::Ratchet(policy) => policy.next_step(running_max),
            _ => None,
        };
        let t_step = step.map_or(f64::INFINITY, |(level, _)| t + (level - x) / drift);
        let t_next = next_claim.min(t_step).min(horizon);
        let discount_next = (-r * t_next).exp();
        out.discounted_dividends += rate * (discount - discount_next) / r;
        x += drift * (t_next - t);
        running_max = running_max.max(x);
        t = t_next;
        discount = discount_next;
        if t >= horizon {
            push(&mut out, t, EventKind::Horizon, x, x, rate);
            break;
        }
        if t == t_step {
            let (level, new_rate) = step.expect("step time implies a step");
            x = level;
            running_max = running_max.max(level);
            rate = new_rate;
            push(&mut out, t, EventKind::Ratchet, x, x, rate);
            continue;
        }
        let z = source.next_claim();
        out.claims += 1;
        let before = x;
        x -= z;
        if x < 0.0 {
            out.total_injected -= x;
            out.discounted_injections += params.ell * discount * -x;
            x = 0.0;
        }
        push(&mut out, t, EventKind::Claim, before, x, rate);
        next_claim = t + source.next_gap();
    }
    out.final_rate = rate;
    out
}

/// Boundary strategy: rate `c̄` throughout.
pub fn simulate_boundary(params: &ModelParams, x0: f64, source: &mut impl ClaimSource, horizon: f64) -> PathRecord {
    simulate_path(params, &Strategy::Boundary, x0, source, horizon, true)
}

pub fn simulate_ratchet(
    params: &ModelParams,
    policy: &RatchetPolicy,
    x0: f64,
    source: &mut impl ClaimSource,
    horizon: f64,
) -> PathRecord {
    simulate_path(params, &Strategy::Ratchet(policy.clone()), x0, source, horizon, true)
}

pub fn simulate_constant(
    params: &ModelParams,
    c: f64,
    x0: f64,
    source: &mut impl ClaimSource,
    horizon: f64,
) -> Result<PathRecord> {
    if !(c <= params.c_bar) {
        return Err(Error::validation("strategy", format!("constant rate {c} exceeds c_bar")));
    }
    Ok(simulate_path(params, &Strategy::Constant(c), x0, source, horizon, true))
}

/// Monte Carlo run settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSettings {
    pub paths: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Pair path `2k` with the mirrored uniforms of path `2k + 1`.
    pub antithetic: bool,
}

/// Discounted payoff statistics.
#[derive(Debug, Clone, Serialize)]
pub struct PayoffEstimate {
    pub strategy: String,
    pub x0: f64,
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
    pub horizon: f64,
    /// `(c̄/r) e^{−rT}`: the most the truncated tail can add.
    pub tail_bound: f64,
    pub antithetic: bool,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Estimate the expected discounted payoff of `strategy` from `x0`.
pub fn estimate(
    params: &ModelParams,
    claims: &ClaimDistribution,
    strategy: &Strategy,
    x0: f64,
    settings: &McSettings,
) -> Result<PayoffEstimate> {
    if settings.paths < 2 || (settings.antithetic && settings.paths % 2 != 0) {
        return Err(Error::validation(
            "simulation.paths",
            "need at least two paths, and an even count with antithetics",
        ));
    }
    if !(settings.horizon > 0.0 && settings.horizon.is_finite()) {
        return Err(Error::validation("simulation.horizon", "horizon must be positive and finite"));
    }
    if let Strategy::Constant(c) = strategy {
        if !(*c <= params.c_bar) {
            return Err(Error::validation("strategy", format!("constant rate {c} exceeds c_bar")));
        }
    }
    let payoff = |stream: u64, mirrored: bool| {
        let mut source = PoissonClaims::new(params.lambda, claims, settings.seed, stream, mirrored);
        simulate_path(params, strategy, x0, &mut source, settings.horizon, false).payoff()
    };
    let mut sum = CompensatedSum::default();
    let mut sum_sq = CompensatedSum::default();
    let samples = if settings.antithetic {
        let pairs = settings.paths / 2;
        for k in 0..pairs as u64 {
            let v = 0.5 * (payoff(k, false) + payoff(k, true));
            sum.add(v);
            sum_sq.add(v * v);
        }
        pairs
    } else {
        for k in 0..settings.paths as u64 {
            let v = payoff(k, false);
            sum.add(v);
            sum_sq.add(v * v);
        }
        settings.paths
    };
    let n = samples as f64;
    let mean = sum.value() / n;
    let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(PayoffEstimate {
        strategy: strategy.label(),
        x0,
        mean,
        std_error: (var / n).sqrt(),
        paths: settings.paths,
        seed: settings.seed,
        horizon: settings.horizon,
        tail_bound: params.value_upper() * (-params.r * settings.horizon).exp(),
        antithetic: settings.antithetic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(2.0, 1.0, 0.1, 1.2, 1.0, 0.0).unwrap()
    }

    #[test]
    fn no_claims_pays_the_annuity() {
        let p = params();
        let path = simulate_boundary(&p, 1.0, &mut ScriptedClaims::none(), 50.0);
        assert_eq!(path.total_injected, 0.0);
        let annuity = (1.0 - (-0.1f64 * 50.0).exp()) / 0.1;
        assert!((path.payoff() - annuity).abs() < 1e-12);
        let constant = simulate_constant(&p, 0.4, 1.0, &mut ScriptedClaims::none(), 50.0).unwrap();
        assert!((constant.payoff() - 0.4 * annuity).abs() < 1e-12);
    }

    #[test]
    fn negative_start_is_topped_up_at_time_zero() {
        let p = params();
        let path = simulate_boundary(&p, -2.0, &mut ScriptedClaims::none(), 10.0);
        assert_eq!(path.total_injected, 2.0);
        assert_eq!(path.events[0].x_after, 0.0);
        assert!((path.discounted_injections - 2.4).abs() < 1e-15);
    }

    #[test]
    fn large_claim_is_reflected_at_zero() {
        let p = params();
        let mut source = ScriptedClaims::new(vec![(1.0, 5.0)]);
        let path = simulate_boundary(&p, 0.5, &mut source, 10.0);
        let claim = path.events.iter().find(|e| e.kind == EventKind::Claim).unwrap();
        assert!((claim.x_before - 1.5).abs() < 1e-15);
        assert_eq!(claim.x_after, 0.0);
        assert!((path.total_injected - 3.5).abs() < 1e-15);
    }

    #[test]
    fn ratchet_steps_follow_the_running_max() {
        let p = params();
        let policy = RatchetPolicy {
            c0: 0.2,
            steps: vec![(1.0, 0.5), (2.0, 1.0)],
        };
        let mut source = ScriptedClaims::new(vec![(0.25, 0.3)]);
        let path = simulate_ratchet(&p, &policy, 0.5, &mut source, 20.0);
        let rates: Vec<f64> = path.events.iter().map(|e| e.rate).collect();
        assert!(rates.windows(2).all(|w| w[0] <= w[1]));
        let ratchets: Vec<&PathEvent> = path.events.iter().filter(|e| e.kind == EventKind::Ratchet).collect();
        assert_eq!(ratchets.len(), 2);
        assert_eq!(ratchets[0].x_after, 1.0);
        assert_eq!(ratchets[1].x_after, 2.0);
        // Surplus after the claim is 0.65; the first step is reached after
        // (1.0 − 0.65)/1.8 more time units.
        assert!((ratchets[0].time - (0.25 + 0.35 / 1.8)).abs() < 1e-12);
        assert_eq!(path.final_rate, 1.0);
    }

    #[test]
    fn streams_are_reproducible() {
        let d = ClaimDistribution::exponential(0.5).unwrap();
        let draw = |path| {
            let mut s = PoissonClaims::new(1.0, &d, 7, path, false);
            (s.next_gap(), s.next_claim())
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn default_horizon_value() {
        assert_eq!(default_horizon(0.1), 231.0);
    }
}
