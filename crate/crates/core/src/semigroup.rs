//! Grid evolution of the semigroup `e^{-νTA}` with `A = ½βB†B`.
//!
//! Fields live on a box in `(p, u = ln q)`, periodic in `p` and with
//! homogeneous Dirichlet values just outside the `u` range. With
//! `B = −i e^{-u}∂_p + 1 + β^{-1}∂_u` and the adjoint taken for
//! `dp dq = e^u dp du`,
//!
//! `A = −(β/2)e^{-2u}∂_p² − iβe^{-u}∂_p + (β−1)/2 − (2β)^{-1}(∂_u² + ∂_u)`.
//!
//! The discrete operator is assembled as `(β/2)B_h†B_h` from a discrete
//! polarization operator, so it is nonnegative and its null space is exactly
//! that of `B_h`; a stencil for `A` term by term would lift the zero modes by
//! `O(h²)`, which the long evolutions needed for the projection limit
//! amplify. `B_h` uses the central symbol `sin(k h_p)/h_p` for `−i∂_p`, so
//! every discrete Fourier mode in `p` evolves on its own under a real
//! tridiagonal operator in `u`.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{kernel, PhasePoint};

/// Largest scaled step `ν·Δt`. Crank–Nicolson is unconditionally stable for
/// the nonnegative operator; the cap keeps its damping accurate for the
/// slowly decaying modes near the bottom of the spectrum.
pub const DT_BOUND: f64 = 2.0;

/// Number of implicit Euler steps that start every evolution.
const STARTUP_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p_min: f64,
    pub p_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Nodes in `p`; the period is `p_max − p_min`.
    pub n_p: usize,
    /// Nodes in `u`, including both ends.
    pub n_u: usize,
    /// Largest step in scaled time `ν·t`.
    pub dt: f64,
    /// First step in scaled time.
    pub dt_start: f64,
    /// Ratio between consecutive steps until `dt` is reached.
    pub growth: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            p_min: -15.0,
            p_max: 15.0,
            u_min: -5.0,
            u_max: 15.0,
            n_p: 300,
            n_u: 321,
            dt: 1.0,
            dt_start: 1e-4,
            growth: 1.08,
        }
    }
}

impl GridSpec {
    pub fn h_p(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_p as f64
    }

    pub fn h_u(&self) -> f64 {
        (self.u_max - self.u_min) / (self.n_u - 1) as f64
    }

    pub fn p_at(&self, i: usize) -> f64 {
        self.p_min + i as f64 * self.h_p()
    }

    pub fn u_at(&self, j: usize) -> f64 {
        self.u_min + j as f64 * self.h_u()
    }

    pub fn len(&self) -> usize {
        self.n_p * self.n_u
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.p_min,
            self.p_max,
            self.u_min,
            self.u_max,
            self.dt,
            self.dt_start,
            self.growth,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("grid parameters must be finite".into()));
        }
        if !(self.p_max > self.p_min && self.u_max > self.u_min) {
            return Err(Error::Config("grid bounds must be increasing".into()));
        }
        if self.n_p < 8 || self.n_u < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 nodes per axis, got {}×{}",
                self.n_p, self.n_u
            )));
        }
        if !(self.dt > 0.0 && self.dt <= DT_BOUND) {
            return Err(Error::Config(format!(
                "scaled step {} outside (0, {DT_BOUND}]",
                self.dt
            )));
        }
        if !(self.dt_start > 0.0 && self.dt_start <= self.dt && self.growth >= 1.0) {
            return Err(Error::Config(
                "step schedule needs 0 < dt_start ≤ dt and growth ≥ 1".into(),
            ));
        }
        Ok(())
    }

    /// Checks that `x` lies at least `cells` nodes inside the box.
    pub fn check_contains(&self, x: &PhasePoint, cells: f64) -> Result<()> {
        let u = x.u();
        let ok_p = x.p - self.p_min >= cells * self.h_p() && self.p_max - x.p >= cells * self.h_p();
        let ok_u = u - self.u_min >= cells * self.h_u() && self.u_max - u >= cells * self.h_u();
        if ok_p && ok_u {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "point {x} is within {cells} cells of the grid boundary"
            )))
        }
    }
}

/// Complex values on the `(p, u)` nodes, stored row by row in `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
            spec,
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.n_u {
            let u = spec.u_at(j);
            for i in 0..spec.n_p {
                values.push(f(spec.p_at(i), u));
            }
        }
        Self { spec, values }
    }

    /// `⟨p,q|at⟩` sampled on the grid.
    pub fn sample_kernel(spec: GridSpec, at: &PhasePoint, beta: f64) -> Self {
        Self::from_fn(spec, |p, u| kernel(&PhasePoint { p, q: u.exp() }, at, beta))
    }

    /// Gaussian surrogate for `δ(p − p₀)δ(q − q₀)`, with standard deviation
    /// `width_cells` mesh cells along each axis, normalized for `dp dq`.
    pub fn delta(spec: GridSpec, at: &PhasePoint, width_cells: f64) -> Result<Self> {
        if !(width_cells > 0.0) {
            return domain(format!("surrogate width must be positive, got {width_cells}"));
        }
        spec.check_contains(at, (4.0 * width_cells).max(5.0))?;
        let (wp, wu) = (width_cells * spec.h_p(), width_cells * spec.h_u());
        let period = spec.p_max - spec.p_min;
        let u0 = at.u();
        let mut f = Self::from_fn(spec, |p, u| {
            let mut dp = (p - at.p).rem_euclid(period);
            if dp > 0.5 * period {
                dp -= period;
            }
            let e = -0.5 * (dp * dp / (wp * wp) + (u - u0) * (u - u0) / (wu * wu));
            Complex64::new(e.exp(), 0.0)
        });
        let mass: f64 = f.weighted_sum(|v| v.re);
        for v in &mut f.values {
            *v /= mass;
        }
        Ok(f)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.spec.n_p + i]
    }

    fn weighted_sum(&self, g: impl Fn(Complex64) -> f64) -> f64 {
        let cell = self.spec.h_p() * self.spec.h_u();
        let mut acc = 0.0;
        for (j, row) in self.values.chunks(self.spec.n_p).enumerate() {
            let w = self.spec.u_at(j).exp() * cell;
            acc += w * row.iter().map(|v| g(*v)).sum::<f64>();
        }
        acc
    }

    /// `Σ conj(f) g e^{u} h_p h_u`.
    pub fn inner(&self, other: &GridField) -> Result<Complex64> {
        if self.spec != other.spec {
            return domain("fields live on different grids");
        }
        let cell = self.spec.h_p() * self.spec.h_u();
        let n_p = self.spec.n_p;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.spec.n_u {
            let w = self.spec.u_at(j).exp() * cell;
            let row: Complex64 = (0..n_p)
                .map(|i| self.values[j * n_p + i].conj() * other.values[j * n_p + i])
                .sum();
            acc += row * w;
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.weighted_sum(|v| v.norm_sqr())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest value in the outer `strip` nodes of each axis relative to the
    /// largest value elsewhere.
    pub fn boundary_ratio(&self, strip: usize) -> f64 {
        let (n_p, n_u) = (self.spec.n_p, self.spec.n_u);
        let mut edge: f64 = 0.0;
        let mut inner: f64 = 0.0;
        for j in 0..n_u {
            for i in 0..n_p {
                let v = self.values[j * n_p + i].norm();
                let on_edge = i < strip || i + strip >= n_p || j < strip || j + strip >= n_u;
                if on_edge {
                    edge = edge.max(v);
                } else {
                    inner = inner.max(v);
                }
            }
        }
        if inner == 0.0 {
            if edge == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            edge / inner
        }
    }

    /// Four-point Lagrange interpolation in each axis (periodic in `p`).
    pub fn interpolate(&self, x: &PhasePoint) -> Complex64 {
        let s = &self.spec;
        let xp = (x.p - s.p_min) / s.h_p();
        let ip = xp.floor();
        let wp = lagrange4(xp - ip);
        let xu = (x.u() - s.u_min) / s.h_u();
        let ju = (xu.floor() as isize - 1).clamp(0, s.n_u as isize - 4);
        let wu = lagrange4(xu - ju as f64 - 1.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, wb) in wu.iter().enumerate() {
            let j = ju as usize + b;
            for (a, wa) in wp.iter().enumerate() {
                let i = (ip as isize - 1 + a as isize).rem_euclid(s.n_p as isize) as usize;
                acc += self.get(i, j) * (wa * wb);
            }
        }
        acc
    }

    /// CSV with header `p,u,re,im`, one node per line, `p` varying fastest.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "p,u,re,im")?;
        for j in 0..self.spec.n_u {
            let u = self.spec.u_at(j);
            for i in 0..self.spec.n_p {
                let v = self.get(i, j);
                writeln!(w, "{},{},{},{}", self.spec.p_at(i), u, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Weights for nodes at offsets −1, 0, 1, 2 evaluated at offset `t`.
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// The discretized `A` on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteA {
    pub beta: f64,
    pub spec: GridSpec,
}

/// Builds the discrete operator after validating the grid.
pub fn build_a(beta: f64, spec: GridSpec) -> Result<DiscreteA> {
    if !(beta > 0.0) || !beta.is_finite() {
        return domain(format!("beta must be positive, got {beta}"));
    }
    spec.validate()?;
    Ok(DiscreteA { beta, spec })
}

/// Tridiagonal `u` operator of one `p` mode.
struct ModeMatrix {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl ModeMatrix {
    fn mul(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = x.len();
        for j in 0..n {
            let mut v = self.diag[j] * x[j];
            if j > 0 {
                v += self.lower[j] * x[j - 1];
            }
            if j + 1 < n {
                v += self.upper[j] * x[j + 1];
            }
            out[j] = v;
        }
    }

    /// `(I + c M) x = rhs`, in place.
    fn solve_shifted(&self, c: f64, x: &mut [Complex64], work: &mut [f64]) {
        let n = x.len();
        let mut m = 1.0 + c * self.diag[0];
        work[0] = c * self.upper[0] / m;
        x[0] /= m;
        for j in 1..n {
            let a = c * self.lower[j];
            m = 1.0 + c * self.diag[j] - a * work[j - 1];
            work[j] = c * self.upper[j] / m;
            x[j] = (x[j] - a * x[j - 1]) / m;
        }
        for j in (0..n - 1).rev() {
            let next = x[j + 1];
            x[j] -= work[j] * next;
        }
    }
}

impl DiscreteA {
    /// `(β/2) B_h†B_h` for the `p` mode with angle `θ = k h_p`.
    ///
    /// `B_h` maps nodes to the half nodes `u_{j+½}` (including the two outside
    /// the box, where the Dirichlet ghosts enter):
    /// `(B_h f)_{j+½} = m_{j+½}(f_j + f_{j+1})/2 + (f_{j+1} − f_j)/(βh)` with
    /// `m = σ e^{-u} + 1` and `σ = sin(θ)/h_p`, the symbol of `−i∂_p`.
    /// The adjoint uses weights `e^{u}` on both node sets.
    fn mode_matrix(&self, theta: f64) -> ModeMatrix {
        let (beta, hu, n) = (self.beta, self.spec.h_u(), self.spec.n_u);
        let sigma = theta.sin() / self.spec.h_p();
        let g = 1.0 / (beta * hu);
        let (up_w, down_w) = ((0.5 * hu).exp(), (-0.5 * hu).exp());
        // Coefficients of f_j and f_{j+1} in (B_h f)_{j+½}, for j = −1..n−1.
        let half = |j: isize| {
            let u = self.spec.u_min + (j as f64 + 0.5) * hu;
            let m = sigma * (-u).exp() + 1.0;
            (0.5 * m - g, 0.5 * m + g)
        };
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let (a_up, b_up) = half(j as isize);
            let (a_dn, b_dn) = half(j as isize - 1);
            diag[j] = 0.5 * beta * (up_w * a_up * a_up + down_w * b_dn * b_dn);
            upper[j] = 0.5 * beta * up_w * a_up * b_up;
            lower[j] = 0.5 * beta * down_w * b_dn * a_dn;
        }
        ModeMatrix { lower, diag, upper }
    }

    fn theta(&self, m: usize) -> f64 {
        2.0 * std::f64::consts::PI * m as f64 / self.spec.n_p as f64
    }

    /// Applies the operator, mode by mode in `p`.
    pub fn apply(&self, f: &GridField) -> Result<GridField> {
        if f.spec != self.spec {
            return domain("field and operator live on different grids");
        }
        let n_u = self.spec.n_u;
        let mut modes = to_modes(f);
        modes.par_chunks_mut(n_u).enumerate().for_each(|(m, col)| {
            let mat = self.mode_matrix(self.theta(m));
            let input = col.to_vec();
            mat.mul(&input, col);
        });
        Ok(from_modes(modes, self.spec))
    }
}

/// Forward FFT along `p`, returned mode-major so each `u` column is contiguous.
fn to_modes(f: &GridField) -> Vec<Complex64> {
    let (n_p, n_u) = (f.spec.n_p, f.spec.n_u);
    let fft = FftPlanner::new().plan_fft_forward(n_p);
    let mut values = f.values.clone();
    fft_rows(&mut values, &fft, n_p);
    let mut modes = vec![Complex64::new(0.0, 0.0); values.len()];
    for j in 0..n_u {
        for m in 0..n_p {
            modes[m * n_u + j] = values[j * n_p + m];
        }
    }
    modes
}

fn from_modes(modes: Vec<Complex64>, spec: GridSpec) -> GridField {
    let (n_p, n_u) = (spec.n_p, spec.n_u);
    let scale = 1.0 / n_p as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); modes.len()];
    for j in 0..n_u {
        for m in 0..n_p {
            values[j * n_p + m] = modes[m * n_u + j] * scale;
        }
    }
    let fft = FftPlanner::new().plan_fft_inverse(n_p);
    fft_rows(&mut values, &fft, n_p);
    GridField { spec, values }
}

fn fft_rows(values: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, n_p: usize) {
    values.par_chunks_mut(n_p).for_each(|row| fft.process(row));
}

/// Scaled step sizes and whether each is an implicit Euler step.
fn schedule(spec: &GridSpec, total: f64) -> Vec<(f64, bool)> {
    let mut steps = Vec::new();
    let mut done = 0.0;
    let mut dt = spec.dt_start;
    while done < total * (1.0 - 1e-14) {
        let step = dt.min(total - done);
        steps.push((step, steps.len() < STARTUP_STEPS));
        done += step;
        dt = (dt * spec.growth).min(spec.dt);
    }
    steps
}

fn evolve_mode(col: &mut [Complex64], mat: &ModeMatrix, steps: &[(f64, bool)]) {
    let n = col.len();
    let mut work = vec![0.0; n];
    let mut mv = vec![Complex64::new(0.0, 0.0); n];
    for &(tau, euler) in steps {
        if euler {
            mat.solve_shifted(tau, col, &mut work);
            continue;
        }
        let h = 0.5 * tau;
        mat.mul(col, &mut mv);
        for (c, m) in col.iter_mut().zip(&mv) {
            *c -= h * m;
        }
        mat.solve_shifted(h, col, &mut work);
    }
}

/// An evolved field with its step count and boundary diagnostics.
#[derive(Debug, Clone)]
pub struct Evolved {
    pub field: GridField,
    pub steps: usize,
    pub boundary_ratio: f64,
    /// Set when the boundary strip exceeds [`BOUNDARY_TOLERANCE`] of the interior.
    pub warning: Option<String>,
}

pub const BOUNDARY_TOLERANCE: f64 = 1e-6;
const BOUNDARY_STRIP: usize = 3;

/// `e^{-νTA}` applied to `field`: Crank–Nicolson per `p` mode after
/// [`STARTUP_STEPS`] implicit Euler steps, with geometrically growing steps.
pub fn evolve(field: &GridField, a: &DiscreteA, nu: f64, t: f64) -> Result<Evolved> {
    if field.spec != a.spec {
        return domain("field and operator live on different grids");
    }
    if !(nu >= 0.0 && t >= 0.0) || !(nu * t).is_finite() {
        return domain(format!("need ν ≥ 0 and T ≥ 0, got ν = {nu}, T = {t}"));
    }
    let steps = schedule(&a.spec, nu * t);
    let out = if steps.is_empty() {
        field.clone()
    } else {
        let n_u = a.spec.n_u;
        let mut modes = to_modes(field);
        modes.par_chunks_mut(n_u).enumerate().for_each(|(m, col)| {
            evolve_mode(col, &a.mode_matrix(a.theta(m)), &steps);
        });
        from_modes(modes, a.spec)
    };
    if !out.is_finite() {
        return Err(Error::Numeric("evolution produced non-finite values".into()));
    }
    let boundary_ratio = out.boundary_ratio(BOUNDARY_STRIP);
    let warning = (boundary_ratio > BOUNDARY_TOLERANCE)
        .then(|| format!("boundary strip reaches {boundary_ratio:.2e} of the interior maximum"));
    Ok(Evolved {
        field: out,
        steps: steps.len(),
        boundary_ratio,
        warning,
    })
}

/// Standard deviation of the delta surrogate, in mesh cells.
pub const DELTA_WIDTH_CELLS: f64 = 2.0;

/// Evolved delta surrogate at `source` together with its value there.
fn evolved_delta(a: &DiscreteA, source: &PhasePoint, nu: f64, t: f64) -> Result<Evolved> {
    let delta = GridField::delta(a.spec, source, DELTA_WIDTH_CELLS)?;
    evolve(&delta, a, nu, t)
}

/// `K_ν = 1/[(e^{-νTA})δ(p)δ(q−1)]` at `(0, 1)`.
pub fn knu(beta: f64, nu: f64, t: f64, spec: GridSpec) -> Result<f64> {
    let a = build_a(beta, spec)?;
    let ev = evolved_delta(&a, &PhasePoint::ORIGIN, nu, t)?;
    knu_from(&ev.field)
}

fn knu_from(field: &GridField) -> Result<f64> {
    let v = field.interpolate(&PhasePoint::ORIGIN).re;
    if !(v > 0.0) {
        return Err(Error::Numeric(format!(
            "evolved delta at its source is {v}, not positive"
        )));
    }
    Ok(1.0 / v)
}

/// Per-`ν` rescaled values and their `1/ν` extrapolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RescaledLimit {
    pub nu_schedule: Vec<f64>,
    /// `(e^{-νTA}δ_b)(a)` per `ν`.
    pub raw: Vec<Complex64>,
    pub knu: Vec<f64>,
    pub extrapolated: Complex64,
    pub error_estimate: f64,
    /// Set when successive differences change direction, in which case
    /// `extrapolated` is the last rescaled value rather than a fit.
    pub flagged: Option<String>,
    pub boundary_ratio: f64,
}

impl RescaledLimit {
    pub fn rescaled(&self) -> Vec<Complex64> {
        self.raw.iter().zip(&self.knu).map(|(r, k)| r * k).collect()
    }
}

/// Projection limit for a single pair; see [`projection_limits`].
pub fn projection_limit(
    a: &PhasePoint,
    b: &PhasePoint,
    beta: f64,
    nu_schedule: &[f64],
    t: f64,
    spec: GridSpec,
) -> Result<RescaledLimit> {
    let mut v = projection_limits(&[(*a, *b)], beta, nu_schedule, t, spec)?;
    Ok(v.remove(0))
}

/// `K_ν (e^{-νTA}δ_b)(a)` over an increasing `ν` schedule for several pairs,
/// extrapolated affinely in `1/ν`. The reference evolution and each distinct
/// source are evolved once per `ν`.
pub fn projection_limits(
    pairs: &[(PhasePoint, PhasePoint)],
    beta: f64,
    nu_schedule: &[f64],
    t: f64,
    spec: GridSpec,
) -> Result<Vec<RescaledLimit>> {
    if nu_schedule.len() < 3 {
        return domain("projection limit needs at least 3 values of ν");
    }
    if nu_schedule.windows(2).any(|w| !(w[1] > w[0])) || !(nu_schedule[0] > 0.0) {
        return domain("ν schedule must be positive and strictly increasing");
    }
    if !(t > 0.0) {
        return domain(format!("T must be positive, got {t}"));
    }
    let op = build_a(beta, spec)?;
    for (a, _) in pairs {
        spec.check_contains(a, 5.0)?;
    }
    let mut sources: Vec<PhasePoint> = Vec::new();
    for (_, b) in pairs {
        if !sources.contains(b) {
            sources.push(*b);
        }
    }
    let mut raw = vec![Vec::new(); pairs.len()];
    let mut knus = Vec::new();
    let mut edge: f64 = 0.0;
    for &nu in nu_schedule {
        let reference = evolved_delta(&op, &PhasePoint::ORIGIN, nu, t)?;
        edge = edge.max(reference.boundary_ratio);
        knus.push(knu_from(&reference.field)?);
        for src in &sources {
            let ev = if *src == PhasePoint::ORIGIN {
                reference.clone()
            } else {
                evolved_delta(&op, src, nu, t)?
            };
            edge = edge.max(ev.boundary_ratio);
            for (k, (a, b)) in pairs.iter().enumerate() {
                if b == src {
                    raw[k].push(ev.field.interpolate(a));
                }
            }
        }
    }
    Ok(raw
        .into_iter()
        .map(|r| {
            let scaled: Vec<Complex64> = r.iter().zip(&knus).map(|(v, k)| v * k).collect();
            let (extrapolated, error_estimate, flagged) = extrapolate_inverse_nu(nu_schedule, &scaled);
            RescaledLimit {
                nu_schedule: nu_schedule.to_vec(),
                raw: r,
                knu: knus.clone(),
                extrapolated,
                error_estimate,
                flagged,
                boundary_ratio: edge,
            }
        })
        .collect())
}

/// Affine least-squares fit in `1/ν` of real and imaginary parts. The error
/// is the larger of the intercept standard error (from the fit residual) and
/// the distance between intercept and the last value.
fn extrapolate_inverse_nu(nus: &[f64], v: &[Complex64]) -> (Complex64, f64, Option<String>) {
    let last = *v.last().expect("schedule is non-empty");
    let diffs: Vec<Complex64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let floor = 1e-9 * last.norm().max(1e-300);
    let reverses = diffs
        .windows(2)
        .any(|d| d[0].norm() > floor && d[1].norm() > floor && (d[1] * d[0].conj()).re < 0.0);
    if reverses {
        let spread = v.iter().map(|x| (x - last).norm()).fold(0.0, f64::max);
        return (
            last,
            spread,
            Some("rescaled values change direction with ν; not extrapolated".into()),
        );
    }
    let fit = |part: &dyn Fn(&Complex64) -> f64| {
        let pts: Vec<(f64, f64, f64)> = nus.iter().zip(v).map(|(n, x)| (1.0 / n, part(x), 1.0)).collect();
        crate::stats::weighted_line(&pts).expect("at least three distinct abscissae")
    };
    let re = fit(&|x| x.re);
    let im = fit(&|x| x.im);
    let value = Complex64::new(re.line.intercept, im.line.intercept);
    // With unit weights the intercept variance must be rescaled by the
    // residual variance per degree of freedom.
    let dof = (v.len() - 2) as f64;
    let se = ((re.var_intercept * re.chi2 + im.var_intercept * im.chi2) / dof).sqrt();
    (value, se.max((value - last).norm()), None)
}

/// `(2πνT)^{-1/2} e^{-(x₂ − x₁)²/(2νT)}`.
pub fn toy_heat(x2: f64, x1: f64, nu: f64, t: f64) -> Result<f64> {
    let var = toy_variance(nu, t)?;
    let d = x2 - x1;
    Ok((-d * d / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
}

/// `toy_heat(x₂, x₁)/toy_heat(0, 0)`, the self-consistently rescaled kernel.
pub fn toy_selfconsistent(x2: f64, x1: f64, nu: f64, t: f64) -> Result<f64> {
    Ok(toy_heat(x2, x1, nu, t)? / toy_heat(0.0, 0.0, nu, t)?)
}

fn toy_variance(nu: f64, t: f64) -> Result<f64> {
    if !(nu > 0.0 && t > 0.0) || !(nu * t).is_finite() {
        return domain(format!("need ν > 0 and T > 0, got ν = {nu}, T = {t}"));
    }
    Ok(nu * t)
}

/// Grid value of the toy kernel next to the closed form.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ToyGrid {
    pub value: f64,
    pub exact: f64,
    pub rel_err: f64,
    pub nodes: usize,
}

/// Evolves a Gaussian of variance `(2h)²` centred at `x₁` under
/// `½B̃² = −½∂_x²` on a periodic grid of mesh `h`, exactly in time per
/// discrete Fourier mode, until its variance is `νT`, and reads it at `x₂`.
pub fn toy_heat_grid(x2: f64, x1: f64, nu: f64, t: f64, h: f64) -> Result<ToyGrid> {
    let var = toy_variance(nu, t)?;
    let s0 = 4.0 * h * h;
    if !(h > 0.0) || s0 >= var {
        return domain(format!("mesh {h} too coarse for νT = {var}"));
    }
    let half = (x2 - x1).abs() + 14.0 * var.sqrt() + 10.0 * h;
    let n = ((2.0 * half / h).ceil() as usize).next_power_of_two();
    if n > 1 << 24 {
        return Err(Error::Config(format!("toy grid would need {n} nodes")));
    }
    let x_at = |i: usize| x1 + (i as f64 - (n / 2) as f64) * h;
    let g0 = 1.0 / (2.0 * std::f64::consts::PI * s0).sqrt();
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| {
            let d = x_at(i) - x1;
            Complex64::new(g0 * (-d * d / (2.0 * s0)).exp(), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let tau = var - s0;
    for (m, v) in buf.iter_mut().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        let symbol = 2.0 * (0.5 * theta).sin().powi(2) / (h * h);
        *v *= (-tau * symbol).exp() / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let pos = (x2 - x1) / h + (n / 2) as f64;
    let i0 = pos.floor();
    let w = lagrange4(pos - i0);
    let value: f64 = w
        .iter()
        .enumerate()
        .map(|(k, wk)| wk * buf[(i0 as isize - 1 + k as isize).rem_euclid(n as isize) as usize].re)
        .sum();
    let exact = toy_heat(x2, x1, nu, t)?;
    Ok(ToyGrid {
        value,
        exact,
        rel_err: (value - exact).abs() / exact,
        nodes: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(n_p: usize, n_u: usize) -> GridSpec {
        GridSpec {
            p_min: -8.0,
            p_max: 8.0,
            u_min: -4.0,
            u_max: 4.0,
            n_p,
            n_u,
            ..GridSpec::default()
        }
    }

    fn interior_max(f: &GridField, p_lim: f64, u_lim: f64) -> f64 {
        let s = f.spec;
        let mut m: f64 = 0.0;
        for j in 0..s.n_u {
            for i in 0..s.n_p {
                if s.p_at(i).abs() <= p_lim && s.u_at(j).abs() <= u_lim {
                    m = m.max(f.get(i, j).norm());
                }
            }
        }
        m
    }

    fn random_interior(spec: GridSpec, rng: &mut ChaCha8Rng) -> GridField {
        let mut f = GridField::zeros(spec);
        for j in 2..spec.n_u - 2 {
            for i in 2..spec.n_p - 2 {
                f.values[j * spec.n_p + i] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        f
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::default().validate().is_ok());
        let bad = GridSpec {
            dt: 3.0,
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = GridSpec {
            n_p: 4,
            ..GridSpec::default()
        };
        assert!(build_a(1.0, bad).is_err());
        assert!(build_a(0.0, GridSpec::default()).is_err());
        let s = small(32, 33);
        assert!(s.check_contains(&PhasePoint::ORIGIN, 5.0).is_ok());
        assert!(s.check_contains(&PhasePoint { p: 7.9, q: 1.0 }, 5.0).is_err());
    }

    #[test]
    fn kernel_is_annihilated_at_second_order() {
        let at = PhasePoint::ORIGIN;
        let residual = |n: usize| {
            let spec = small(n, n + 1);
            let f = GridField::sample_kernel(spec, &at, 1.0);
            let r = build_a(1.0, spec).unwrap().apply(&f).unwrap();
            interior_max(&r, 2.0, 1.0)
        };
        let (coarse, fine) = (residual(64), residual(128));
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");

        let spec = small(64, 65);
        // B·1 = 1 and B†1 = 1 − 1/β, so constants are annihilated only at β = 1.
        let one = GridField::from_fn(spec, |_, _| Complex64::new(1.0, 0.0));
        let r = build_a(0.7, spec).unwrap().apply(&one).unwrap();
        assert!(interior_max(&r, 2.0, 1.0) > 0.1);
    }

    #[test]
    fn operator_is_hermitian_for_measure_weights() {
        let spec = small(32, 40);
        let a = build_a(0.7, spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_interior(spec, &mut rng);
        let g = random_interior(spec, &mut rng);
        let lhs = f.inner(&a.apply(&g).unwrap()).unwrap();
        let rhs = a.apply(&f).unwrap().inner(&g).unwrap();
        assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0));
    }

    #[test]
    fn stepping_matches_operator() {
        // One tiny step of the time stepper agrees with I − τA.
        let spec = GridSpec {
            dt_start: 1e-9,
            ..small(32, 40)
        };
        let a = build_a(1.3, spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_interior(spec, &mut rng);
        let ev = evolve(&f, &a, 1.0, 1e-9).unwrap();
        let af = a.apply(&f).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..f.values.len() {
            let want = f.values[k] - 1e-9 * af.values[k];
            worst = worst.max((ev.field.values[k] - want).norm());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn zero_time_is_identity() {
        let spec = small(16, 16);
        let a = build_a(1.0, spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_interior(spec, &mut rng);
        let ev = evolve(&f, &a, 0.0, 5.0).unwrap();
        assert_eq!(ev.field, f);
        assert_eq!(ev.steps, 0);
    }

    #[test]
    fn norm_is_non_increasing() {
        let spec = small(32, 40);
        let a = build_a(1.0, spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut f = random_interior(spec, &mut rng);
        let mut prev = f.norm_sqr();
        for _ in 0..3 {
            f = evolve(&f, &a, 1.0, 0.5).unwrap().field;
            let now = f.norm_sqr();
            assert!(now <= prev * (1.0 + 1e-10), "{now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn semigroup_property() {
        let spec = small(32, 40);
        let a = build_a(0.8, spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_interior(spec, &mut rng);
        let twice = evolve(&evolve(&f, &a, 2.0, 0.3).unwrap().field, &a, 2.0, 0.4).unwrap();
        let once = evolve(&f, &a, 2.0, 0.7).unwrap();
        let mut diff = once.field.clone();
        for (d, v) in diff.values.iter_mut().zip(&twice.field.values) {
            *d -= v;
        }
        assert!(diff.norm_sqr().sqrt() < 1e-3 * once.field.norm_sqr().sqrt());
    }

    #[test]
    fn sampled_kernel_is_nearly_stationary() {
        let spec = small(64, 65);
        let a = build_a(1.0, spec).unwrap();
        let f = GridField::sample_kernel(spec, &PhasePoint::ORIGIN, 1.0);
        let ev = evolve(&f, &a, 1.0, 0.5).unwrap();
        let mut diff = f.clone();
        for (d, v) in diff.values.iter_mut().zip(&ev.field.values) {
            *d -= v;
        }
        assert!(
            interior_max(&diff, 2.0, 1.0) < 0.02,
            "{}",
            interior_max(&diff, 2.0, 1.0)
        );
    }

    #[test]
    fn delta_is_normalized_and_interpolation_is_exact_on_cubics() {
        let spec = small(32, 41);
        let d = GridField::delta(spec, &PhasePoint::ORIGIN, 2.0).unwrap();
        let mass: f64 = d.weighted_sum(|v| v.re);
        assert!((mass - 1.0).abs() < 1e-12);
        let cubic = GridField::from_fn(spec, |_, u| Complex64::new(u * u * u - u, 0.5 * u));
        let x = PhasePoint { p: 0.37, q: 0.73f64 };
        let want = x.u().powi(3) - x.u();
        assert!((cubic.interpolate(&x).re - want).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let spec = small(8, 8);
        let f = GridField::from_fn(spec, Complex64::new);
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p,u,re,im");
        assert_eq!(lines.len(), 65);
        assert_eq!(lines[1], "-8,-4,-8,-4");
    }

    #[test]
    fn toy_examples() {
        let v = toy_heat(0.3, 0.3, 1.0, 1.0).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
        let v = toy_heat(1.0, 0.0, 0.5, 2.0).unwrap();
        assert!((v - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert_eq!(toy_selfconsistent(1.2, 1.2, 3.0, 2.0).unwrap(), 1.0);
        assert!((toy_selfconsistent(2.0, 0.0, 2.0, 2.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        for (x2, x1, nu, t) in [(0.4, -1.0, 3.0, 0.7), (2.0, 0.0, 16.0, 1.0)] {
            let rescaled = (2.0 * std::f64::consts::PI * nu * t).sqrt() * toy_heat(x2, x1, nu, t).unwrap();
            assert!((rescaled - toy_selfconsistent(x2, x1, nu, t).unwrap()).abs() < 1e-12);
        }
        assert!(toy_heat(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn toy_grid_matches_closed_form() {
        let r = toy_heat_grid(1.0, 0.0, 1.0, 1.0, 1e-2).unwrap();
        assert!(r.rel_err < 1e-4, "{r:?}");
    }
}
