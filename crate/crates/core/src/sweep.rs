//! Projected backward sweeps with a frozen nonlocal term.
//!
//! For a fixed `q = 𝒯v` the upwind equation at node `j`,
//! `−(μ − c)(v_{j+1} − v_j)/dx + (r + λ) v_j − q_j + h_j − c = 0`,
//! determines `v_j` from `v_{j+1}`, so one sweep from `x = L` down to `0`
//! solves the local problem exactly. With an obstacle the node value is
//! projected before the sweep moves on, which solves the local
//! complementarity problem `min{residual, v − obstacle} = 0` exactly as well.
//! The outer loop re-evaluates `𝒯v`; plain iteration contracts in sup-norm
//! with factor `λ / (r + λ)`, and Anderson mixing cuts the iteration count.

use serde::{Deserialize, Serialize};

use crate::discretization::Operators;
use crate::error::{Error, Result};

/// Outer-iteration acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Acceleration {
    /// Plain fixed-point iteration.
    None,
    /// Anderson mixing over the last `depth` iterates.
    Anderson { depth: usize },
}

impl Default for Acceleration {
    fn default() -> Self {
        Acceleration::Anderson { depth: 5 }
    }
}

/// Stopping rule and acceleration for one obstacle or boundary solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Sup-norm of the fixed-point update below which the solve stops.
    pub tol: f64,
    pub max_iterations: usize,
    pub acceleration: Acceleration,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 10_000,
            acceleration: Acceleration::default(),
        }
    }
}

/// Outcome of a fixed-point solve.
#[derive(Debug, Clone)]
pub(crate) struct FixedPoint {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub update_norms: Vec<f64>,
}

pub(crate) struct SweepProblem<'a> {
    pub ops: &'a Operators,
    pub rate: f64,
    pub right_value: f64,
    pub obstacle: Option<&'a [f64]>,
}

impl SweepProblem<'_> {
    /// One projected backward sweep given the frozen `𝒯v`.
    fn sweep(&self, tv: &[f64], out: &mut [f64]) {
        let p = self.ops.params();
        let n = out.len();
        let kappa = (p.mu - self.rate) / self.ops.grid().dx();
        let denom = kappa + p.r + p.lambda;
        let h = self.ops.h();
        out[n - 1] = self.right_value;
        for j in (0..n - 1).rev() {
            let mut v = (kappa * out[j + 1] + tv[j] - h[j] + self.rate) / denom;
            if let Some(obs) = self.obstacle {
                v = v.max(obs[j]);
            }
            out[j] = v;
        }
    }

    fn apply(&self, v: &[f64], tv: &mut [f64], out: &mut [f64]) {
        self.ops.apply_t_into(v, tv);
        self.sweep(tv, out);
    }

    pub fn solve(&self, initial: Vec<f64>, settings: &SolverSettings, stage: &str) -> Result<FixedPoint> {
        let n = initial.len();
        let mut x = initial;
        let mut gx = vec![0.0; n];
        let mut tv = vec![0.0; n];
        let mut mixer = match settings.acceleration {
            Acceleration::Anderson { depth } if depth > 0 => Some(Anderson::new(depth)),
            _ => None,
        };
        let mut update_norms = Vec::new();
        let mut best = f64::INFINITY;
        for iteration in 1..=settings.max_iterations {
            self.apply(&x, &mut tv, &mut gx);
            let residual: Vec<f64> = gx.iter().zip(&x).map(|(g, v)| g - v).collect();
            let norm = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            update_norms.push(norm);
            if !norm.is_finite() {
                break;
            }
            if norm < settings.tol {
                return Ok(FixedPoint {
                    values: gx,
                    iterations: iteration,
                    update_norms,
                });
            }
            match mixer.as_mut() {
                Some(aa) => {
                    if norm > 4.0 * best {
                        aa.reset();
                    }
                    best = best.min(norm);
                    x = aa.mix(&gx, residual);
                }
                None => std::mem::swap(&mut x, &mut gx),
            }
        }
        let p = self.ops.params();
        Err(Error::NoConvergence {
            stage: stage.to_string(),
            iterations: update_norms.len(),
            last_update: update_norms.last().copied().unwrap_or(f64::NAN),
            contraction: p.lambda / (p.r + p.lambda),
        })
    }
}

/// Anderson mixing (type II, unit damping) on a sliding window.
struct Anderson {
    depth: usize,
    prev_g: Option<Vec<f64>>,
    prev_f: Option<Vec<f64>>,
    dg: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            prev_g: None,
            prev_f: None,
            dg: Vec::new(),
            df: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.dg.clear();
        self.df.clear();
    }

    fn mix(&mut self, g: &[f64], f: Vec<f64>) -> Vec<f64> {
        if let (Some(pg), Some(pf)) = (&self.prev_g, &self.prev_f) {
            if self.dg.len() == self.depth {
                self.dg.remove(0);
                self.df.remove(0);
            }
            self.dg.push(g.iter().zip(pg).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(pf).map(|(a, b)| a - b).collect());
        }
        self.prev_g = Some(g.to_vec());
        let mut next = g.to_vec();
        if let Some(gamma) = least_squares(&self.df, &f) {
            for (coef, col) in gamma.iter().zip(&self.dg) {
                for (x, d) in next.iter_mut().zip(col) {
                    *x -= coef * d;
                }
            }
        }
        self.prev_f = Some(f);
        next
    }
}

/// `argmin_γ ‖f − Σ γ_i cols_i‖₂` by modified Gram–Schmidt, dropping
/// numerically dependent columns.
fn least_squares(cols: &[Vec<f64>], f: &[f64]) -> Option<Vec<f64>> {
    let m = cols.len();
    if m == 0 {
        return None;
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    let mut kept: Vec<usize> = Vec::with_capacity(m);
    for (k, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        let original = norm2(&v);
        for (qi, row) in q.iter().zip(kept.iter()) {
            let dot: f64 = qi.iter().zip(&v).map(|(a, b)| a * b).sum();
            r[*row][k] = dot;
            for (x, y) in v.iter_mut().zip(qi) {
                *x -= dot * y;
            }
        }
        let nv = norm2(&v);
        if !(nv > 1e-10 * original) || nv == 0.0 {
            continue;
        }
        r[k][k] = nv;
        for x in v.iter_mut() {
            *x /= nv;
        }
        q.push(v);
        kept.push(k);
    }
    if kept.is_empty() {
        return None;
    }
    let rhs: Vec<f64> = q.iter().map(|qi| qi.iter().zip(f).map(|(a, b)| a * b).sum()).collect();
    let mut gamma = vec![0.0; m];
    for (a, &k) in kept.iter().enumerate().rev() {
        let mut s = rhs[a];
        for &k2 in kept.iter().skip(a + 1) {
            s -= r[k][k2] * gamma[k2];
        }
        gamma[k] = s / r[k][k];
    }
    gamma.iter().all(|g| g.is_finite()).then_some(gamma)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
