//! Uniform surplus grid and the discrete generator pieces.
//!
//! The nonlocal operators
//!
//! ```text
//! 𝒯f(x) = λ ∫₀ˣ f(x − y) p(y) dy + λ f(0) (1 − F(x)) = λ E[f((x − Z)⁺)]
//! ℐf(x) = λ ∫₀ˣ f(x − y) p(y) dy
//! ```
//!
//! are discretized by product trapezoidal quadrature: `f` is replaced by its
//! piecewise-linear interpolant on the grid and integrated exactly against
//! the claim density. The weights are non-negative and those of 𝒯 sum to one
//! at every node, so the discrete 𝒯 maps constants to `λ·constant` exactly and
//! satisfies `𝒯f ≤ λ max f⁺`.
//!
//! On the grid the convolution is a Toeplitz sum,
//! `(ℐf)_j = λ (Σ_{m≤j} K_m f_{j−m} − A_j f_0)`, evaluated either directly or
//! through an FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClaimDistribution, ModelParams};

/// Smallest admissible number of grid intervals.
pub const MIN_INTERVALS: usize = 64;

/// Uniform grid `x_j = j · dx` on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    intervals: usize,
}

impl Grid {
    pub fn new(length: f64, intervals: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::validation("grid.L", "truncation length must be positive"));
        }
        if intervals < MIN_INTERVALS {
            return Err(Error::validation(
                "grid.n_x",
                format!("need at least {MIN_INTERVALS} intervals, got {intervals}"),
            ));
        }
        Ok(Self { length, intervals })
    }

    /// Default truncation: the smallest `L` with `h(L) ≤ 1e−8 · λℓγ`,
    /// enlarged so that `e^{−ρL} ≤ 1e−8` for the far-field decay rate `ρ`.
    pub fn default_length(params: &ModelParams, claims: &ClaimDistribution) -> f64 {
        let tail = claims.stop_loss_quantile(1e-8);
        match params.far_field_decay(claims) {
            Some(rho) => tail.max(1e8f64.ln() / rho),
            None => tail,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.intervals as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.length
        } else {
            j as f64 * self.dx()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.x(j)).collect()
    }

    /// Same length, twice the intervals.
    pub fn refined(&self) -> Self {
        Self {
            length: self.length,
            intervals: 2 * self.intervals,
        }
    }
}

/// Values of a function on every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::validation(
                "grid function",
                format!("expected {} values, got {}", grid.nodes(), values.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.nodes()).map(|j| f(grid.x(j))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.nodes()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation; clamps to the end values outside `[0, L]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        interpolate(&self.values, self.grid.dx(), x)
    }
}

pub(crate) fn interpolate(values: &[f64], dx: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    if x <= 0.0 {
        return values[0];
    }
    let s = x / dx;
    let j = s.floor() as usize;
    if j >= last {
        return values[last];
    }
    let t = s - j as f64;
    if t == 0.0 {
        values[j]
    } else {
        (1.0 - t) * values[j] + t * values[j + 1]
    }
}

/// Forward (upwind) difference quotient; the last node repeats its neighbour.
pub fn upwind_derivative(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n - 1 {
        out.push((values[j + 1] - values[j]) / dx);
    }
    let tail = out.last().copied().unwrap_or(0.0);
    out.push(tail);
    out
}

/// Central second difference on interior nodes `1..n−1`.
pub fn second_difference(values: &[f64], dx: f64) -> Vec<f64> {
    let dx2 = dx * dx;
    values
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]) / dx2)
        .collect()
}

/// Which summation backs the discrete convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    /// `O(n²)` direct summation; fixed summation order.
    #[default]
    Direct,
    /// Zero-padded FFT, `O(n log n)`.
    Fft,
}

struct FftConvolver {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_spectrum: Vec<Complex<f64>>,
}

impl FftConvolver {
    fn new(kernel: &[f64]) -> Self {
        let size = (2 * kernel.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel_spectrum = vec![Complex::new(0.0, 0.0); size];
        for (slot, &k) in kernel_spectrum.iter_mut().zip(kernel) {
            slot.re = k;
        }
        forward.process(&mut kernel_spectrum);
        Self {
            size,
            forward,
            inverse,
            kernel_spectrum,
        }
    }

    fn convolve(&self, f: &[f64], out: &mut [f64]) {
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (slot, &v) in buf.iter_mut().zip(f) {
            slot.re = v;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *b *= *k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }
}

/// Precomputed discrete operators for one model on one grid.
pub struct Operators {
    params: ModelParams,
    claims: ClaimDistribution,
    grid: Grid,
    method: ConvolutionMethod,
    /// Weight of `f_{j−k}` on cell `[x_k, x_{k+1}]`.
    cell_left: Vec<f64>,
    /// Toeplitz kernel `K_m = A_m + B_{m−1}`.
    kernel: Vec<f64>,
    survival: Vec<f64>,
    cdf: Vec<f64>,
    h: Vec<f64>,
    fft: Option<FftConvolver>,
}

impl std::fmt::Debug for Operators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Operators")
            .field("grid", &self.grid)
            .field("method", &self.method)
            .finish_non_exhaustive()
    }
}

impl Operators {
    pub fn new(
        params: &ModelParams,
        claims: &ClaimDistribution,
        grid: Grid,
        method: ConvolutionMethod,
    ) -> Self {
        let n = grid.nodes();
        let dx = grid.dx();
        let survival: Vec<f64> = (0..n).map(|j| claims.survival(grid.x(j))).collect();
        let stop_loss: Vec<f64> = (0..n).map(|j| claims.stop_loss(grid.x(j))).collect();
        let cdf = survival.iter().map(|s| 1.0 - s).collect();
        let h = stop_loss
            .iter()
            .map(|pi| params.lambda * params.ell * pi)
            .collect();

        // Cell k = [x_k, x_{k+1}], s = (y − x_k)/dx:
        //   B_k = ∫ s p dy = (π(x_k) − π(x_{k+1}) − dx S(x_{k+1})) / dx
        //   A_k = ∫ (1 − s) p dy = (S(x_k) − S(x_{k+1})) − B_k
        let mut cell_left = vec![0.0; n];
        let mut cell_right = vec![0.0; n];
        for k in 0..n - 1 {
            let mass = survival[k] - survival[k + 1];
            let b = ((stop_loss[k] - stop_loss[k + 1] - dx * survival[k + 1]) / dx).clamp(0.0, mass);
            cell_right[k] = b;
            cell_left[k] = mass - b;
        }
        // Cell n−1 extends past the grid; it only enters through the A_j f_0
        // correction at j = n−1, which never reaches it.
        let mut kernel = vec![0.0; n];
        for m in 0..n {
            kernel[m] = cell_left[m] + if m > 0 { cell_right[m - 1] } else { 0.0 };
        }
        let fft = match method {
            ConvolutionMethod::Fft => Some(FftConvolver::new(&kernel)),
            ConvolutionMethod::Direct => None,
        };
        Self {
            params: *params,
            claims: claims.clone(),
            grid,
            method,
            cell_left,
            kernel,
            survival,
            cdf,
            h,
            fft,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn claims(&self) -> &ClaimDistribution {
        &self.claims
    }

    pub fn method(&self) -> ConvolutionMethod {
        self.method
    }

    /// `h` on the grid.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// `Σ_{m≤j} K_m f_{j−m} − A_j f_0` at every node.
    fn convolution(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.grid.nodes(), "grid function length mismatch");
        match &self.fft {
            Some(fft) => fft.convolve(f, out),
            None => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = self.kernel[..=j]
                        .iter()
                        .zip(f[..=j].iter().rev())
                        .map(|(k, v)| k * v)
                        .sum();
                }
            }
        }
        let f0 = f[0];
        for (o, a) in out.iter_mut().zip(&self.cell_left) {
            *o -= a * f0;
        }
    }

    /// Discrete ℐ into a caller-owned buffer.
    pub fn apply_i_into(&self, f: &[f64], out: &mut [f64]) {
        self.convolution(f, out);
        let lambda = self.params.lambda;
        for o in out.iter_mut() {
            *o *= lambda;
        }
    }

    /// Discrete 𝒯 into a caller-owned buffer.
    pub fn apply_t_into(&self, f: &[f64], out: &mut [f64]) {
        self.convolution(f, out);
        let lambda = self.params.lambda;
        let f0 = f[0];
        for (o, s) in out.iter_mut().zip(&self.survival) {
            *o = lambda * (*o + f0 * s);
        }
    }

    pub fn apply_t(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply_t_into(f, &mut out);
        out
    }

    pub fn apply_i(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply_i_into(f, &mut out);
        out
    }

    /// `−(μ − c) f′ + (r + λ) f − 𝒯f + h − c` with the supplied derivative.
    pub fn residual_with(&self, c: f64, f: &[f64], f_prime: &[f64]) -> Vec<f64> {
        let t = self.apply_t(f);
        let ModelParams { mu, lambda, r, .. } = self.params;
        f.iter()
            .zip(f_prime)
            .zip(t.iter().zip(&self.h))
            .map(|((v, dv), (tv, h))| -(mu - c) * dv + (r + lambda) * v - tv + h - c)
            .collect()
    }

    /// Residual with the upwind derivative the solver uses.
    pub fn residual(&self, c: f64, f: &[f64]) -> Vec<f64> {
        let dv = upwind_derivative(f, self.grid.dx());
        self.residual_with(c, f, &dv)
    }
}

/// `𝒯f` for a one-off evaluation (direct summation).
pub fn apply_t(params: &ModelParams, claims: &ClaimDistribution, f: &GridFn) -> GridFn {
    let ops = Operators::new(params, claims, f.grid(), ConvolutionMethod::Direct);
    GridFn {
        grid: f.grid(),
        values: ops.apply_t(f.values()),
    }
}

/// `ℐf` for a one-off evaluation (direct summation).
pub fn apply_i(params: &ModelParams, claims: &ClaimDistribution, f: &GridFn) -> GridFn {
    let ops = Operators::new(params, claims, f.grid(), ConvolutionMethod::Direct);
    GridFn {
        grid: f.grid(),
        values: ops.apply_i(f.values()),
    }
}

/// Pointwise `−(μ − c) f′ + (r + λ) f − 𝒯f + h − c`.
pub fn residual_lc(
    params: &ModelParams,
    claims: &ClaimDistribution,
    c: f64,
    f: &GridFn,
    f_prime: &GridFn,
) -> GridFn {
    let ops = Operators::new(params, claims, f.grid(), ConvolutionMethod::Direct);
    GridFn {
        grid: f.grid(),
        values: ops.residual_with(c, f.values(), f_prime.values()),
    }
}
