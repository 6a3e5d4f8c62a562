//! Coherent-state overlaps `⟨p,q|r,s⟩` for the affine group.
//!
//! States are `|p,q⟩ = U[p,q]|η⟩` with `U[p,q] = e^{ipQ} e^{-i ln(q) D}`, so in
//! the `Q`-representation `⟨x|p,q⟩ = e^{ipx} q^{-1/2} η(x/q)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fiducial::FiducialSpec;
use crate::quad::{adaptive, half_line, HalfLineShape, QuadOptions};

/// Coherent-state label, `q > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub q: f64,
}

impl PhasePoint {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() {
            return domain(format!("label p must be finite, got {p}"));
        }
        if !(q > 0.0) || !q.is_finite() {
            return domain(format!("label q must be positive and finite, got {q}"));
        }
        Ok(Self { p, q })
    }

    /// The identity label `(0, 1)`.
    pub const ORIGIN: PhasePoint = PhasePoint { p: 0.0, q: 1.0 };

    pub fn u(&self) -> f64 {
        self.q.ln()
    }
}

impl std::fmt::Display for PhasePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.p, self.q)
    }
}

/// An overlap value tagged with the `β` it was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex64,
    pub beta: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(())
}

/// `Z = ½(q⁻¹ + s⁻¹) + ½ iβ⁻¹(p − r)`, the base of the closed-form kernel.
/// Its real part is always positive.
#[inline]
pub(crate) fn kernel_base(a: &PhasePoint, b: &PhasePoint, beta: f64) -> Complex64 {
    Complex64::new(0.5 * (1.0 / a.q + 1.0 / b.q), 0.5 * (a.p - b.p) / beta)
}

/// Closed-form overlap without argument validation.
#[inline]
pub fn kernel(a: &PhasePoint, b: &PhasePoint, beta: f64) -> Complex64 {
    let z = kernel_base(a, b, beta);
    // {(qs)^{-1/2} / Z}^{2β} on the principal branch; arg Z ∈ (−π/2, π/2).
    let log_w = Complex64::new(-0.5 * (a.q * b.q).ln(), 0.0) - z.ln();
    (log_w * (2.0 * beta)).exp()
}

/// `⟨a|b⟩` for the unit-mean fiducial vector `η_β`.
pub fn overlap_closed(a: &PhasePoint, b: &PhasePoint, beta: f64) -> Result<KernelValue> {
    check_beta(beta)?;
    Ok(KernelValue {
        value: kernel(a, b, beta),
        beta,
    })
}

/// `(qs)^{-1/2} ∫₀^∞ η(x/q) e^{-ix(p−r)} η(x/s) w(x) dx` for a general fiducial spec.
pub fn label_integral<W>(a: &PhasePoint, b: &PhasePoint, spec: &FiducialSpec, weight: W) -> Result<Complex64>
where
    W: Fn(f64) -> Complex64,
{
    let inv_sum = 1.0 / a.q + 1.0 / b.q;
    let log_n2 = 2.0 * spec.norm_const.ln() - (0.5 + spec.alpha) * (a.q * b.q).ln();
    let omega = a.p - b.p;
    let f = |x: f64| {
        let mag = (log_n2 + 2.0 * spec.alpha * x.ln() - spec.beta * inv_sum * x).exp();
        Complex64::from_polar(mag, -omega * x) * weight(x)
    };
    let shape = HalfLineShape {
        endpoint_power: 2.0 * spec.alpha,
        decay_length: 1.0 / (spec.beta * inv_sum),
        frequency: omega,
    };
    let r = half_line(&f, shape, &QuadOptions::with_tol(1e-15, 1e-12))?;
    Ok(r.value)
}

/// `∫₀^∞ conj(⟨x|a⟩) ket(x) dx` for an arbitrary ket wavefunction.
pub fn bra_integral<K>(a: &PhasePoint, spec: &FiducialSpec, ket: K, shape: HalfLineShape) -> Result<Complex64>
where
    K: Fn(f64) -> Complex64,
{
    let sq = a.q.sqrt();
    let f = |x: f64| {
        let bra = Complex64::from_polar(spec.eval(x / a.q) / sq, -a.p * x);
        bra * ket(x)
    };
    Ok(half_line(&f, shape, &QuadOptions::with_tol(1e-15, 1e-12))?.value)
}

/// Overlap by direct quadrature of the `Q`-representation integral.
pub fn overlap_quadrature(a: &PhasePoint, b: &PhasePoint, spec: &FiducialSpec) -> Result<Complex64> {
    label_integral(a, b, spec, |_| Complex64::new(1.0, 0.0))
}

/// Gram matrix `G_jk = ⟨x_j|x_k⟩`.
pub fn gram(points: &[PhasePoint], beta: f64) -> Result<DMatrix<Complex64>> {
    gram_with_limit(points, beta, DEFAULT_GRAM_MAX)
}

pub const DEFAULT_GRAM_MAX: usize = 64;

pub fn gram_with_limit(points: &[PhasePoint], beta: f64, max: usize) -> Result<DMatrix<Complex64>> {
    check_beta(beta)?;
    if points.is_empty() || points.len() > max {
        return domain(format!(
            "gram needs between 1 and {max} points, got {}",
            points.len()
        ));
    }
    let n = points.len();
    let mut g = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        g[(j, j)] = Complex64::new(1.0, 0.0);
        for k in (j + 1)..n {
            let v = kernel(&points[j], &points[k], beta);
            g[(j, k)] = v;
            g[(k, j)] = v.conj();
        }
    }
    Ok(g)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `c = 1 / {2π[1 − 1/(2β)]}`, defined only for admissible `β > 1/2`.
pub fn admissible_constant(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if beta <= 0.5 {
        return Err(Error::Inadmissible(format!(
            "no resolution-of-unity constant exists for beta = {beta} <= 1/2"
        )));
    }
    Ok(1.0 / (2.0 * std::f64::consts::PI * (1.0 - 0.5 / beta)))
}

/// The constant that actually makes `c ∫|r,s⟩⟨r,s| dr ds = 1`:
/// `1 / (2π ⟨Q^{-1}⟩) = [1 − 1/(2β)] / (2π)`.
///
/// It differs from [`admissible_constant`] by the factor `[1 − 1/(2β)]²`.
pub fn resolution_constant(beta: f64) -> Result<f64> {
    admissible_constant(beta)?;
    Ok((1.0 - 0.5 / beta) / (2.0 * std::f64::consts::PI))
}

/// Outcome of the resolution-of-unity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    Diverging,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// `c ∫⟨a|r,s⟩⟨r,s|b⟩ dr ds` at the largest cutoff (`c = 1` when `β ≤ 1/2`).
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// `|lhs − rhs|`; infinite when no constant `c` exists.
    pub residual: f64,
    /// `rhs / ∫⟨a|r,s⟩⟨r,s|b⟩ dr ds`: the constant the quadrature asks for.
    pub implied_constant: Complex64,
    /// Cumulative left side at each `s`-cutoff.
    pub cutoff_trace: Vec<(f64, Complex64)>,
    /// Least-squares slope of `log|increment|` against `log S_max`.
    pub tail_exponent: f64,
    pub verdict: Verdict,
}

/// Options for [`resolution_check_with`].
#[derive(Debug, Clone, Copy)]
pub struct ResolutionOptions {
    /// Cutoffs are `s_base · 2^k` for `k = 0..=doublings`.
    pub doublings: usize,
    pub s_base: f64,
    /// Fraction of the trace (from the end) used by the slope fit.
    pub fit_fraction: f64,
}

impl Default for ResolutionOptions {
    fn default() -> Self {
        Self {
            doublings: 60,
            s_base: 1.0,
            fit_fraction: 0.5,
        }
    }
}

pub fn resolution_check(a: &PhasePoint, b: &PhasePoint, beta: f64, tol: f64) -> Result<ResolutionReport> {
    resolution_check_with(a, b, beta, tol, &ResolutionOptions::default())
}

/// `∫ ⟨a|r,s⟩ h(r,s) ⟨r,s|b⟩ dr` over the whole line, for weights growing at
/// most like `|r|^r_growth`.
fn r_marginal<H>(a: &PhasePoint, b: &PhasePoint, s: f64, beta: f64, h: &H, r_growth: f64) -> Result<Complex64>
where
    H: Fn(f64, f64) -> f64,
{
    // The product decays like |r|^{g − 4β}; the tails are mapped to (0, 1]
    // with r = w t^{-m}, which leaves a bounded integrand when
    // m(4β − 1 − g) ≥ 2.
    let excess = 4.0 * beta - 1.0 - r_growth;
    if excess <= 0.0 {
        return Err(Error::Numeric(format!(
            "r-integral diverges for beta = {beta} with weight growth |r|^{r_growth}"
        )));
    }
    let center = 0.5 * (a.p + b.p);
    let w = beta * (1.0 / s + 1.0 / a.q.min(b.q)) + 0.5 * (a.p - b.p).abs();
    let m = (2.0 / excess).ceil().max(1.0);
    let mi = m as i32;
    let integrand = |r: f64| {
        let node = PhasePoint { p: r, q: s };
        kernel(a, &node, beta) * kernel(&node, b, beta) * h(r, s)
    };
    let opts = QuadOptions::with_tol(1e-18, 1e-11);
    let mid = adaptive(&integrand, center - w, center + w, &opts)?.value;
    let tail = |t: f64| {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let tm = t.powi(mi);
        let r = w / tm;
        let jac = m * w / (tm * t);
        (integrand(center + r) + integrand(center - r)) * jac
    };
    let tails = adaptive(&tail, 0.0, 1.0, &opts)?.value;
    Ok(mid + tails)
}

/// Cumulative `∫_{s ≤ S} ∫ ⟨a|r,s⟩ h(r,s) ⟨r,s|b⟩ dr ds` at the cutoffs
/// `S = max(q_a, q_b)·s_base·2^k`, without any measure constant.
pub fn pair_integral_trace<H>(
    a: &PhasePoint,
    b: &PhasePoint,
    beta: f64,
    h: &H,
    r_growth: f64,
    opts: &ResolutionOptions,
) -> Result<Vec<(f64, Complex64)>>
where
    H: Fn(f64, f64) -> f64,
{
    check_beta(beta)?;
    // Integrate in σ = ln s, with ds = s dσ. As s → 0 the σ-integrand
    // vanishes like s^{2β} or faster for the weights used here.
    let failure = std::cell::Cell::new(None);
    let f = |sigma: f64| -> Complex64 {
        let s = sigma.exp();
        match r_marginal(a, b, s, beta, h, r_growth) {
            Ok(v) => v * s,
            Err(e) => {
                failure.set(Some(e));
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let quad = QuadOptions::with_tol(1e-14, 1e-10);
    let s_ref = a.q.max(b.q) * opts.s_base;
    let sigma0 = s_ref.ln();
    let sigma_lo = a.q.min(b.q).ln() - 18.0 / beta - 2.0;
    let mut total = adaptive(&f, sigma_lo, sigma0, &quad)?.value;
    let mut trace = vec![(s_ref, total)];
    let step = std::f64::consts::LN_2;
    for k in 0..opts.doublings {
        let lo = sigma0 + k as f64 * step;
        total += adaptive(&f, lo, lo + step, &quad)?.value;
        trace.push(((lo + step).exp(), total));
    }
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if trace.iter().any(|(_, v)| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numeric(
            "phase-space quadrature produced non-finite values".into(),
        ));
    }
    Ok(trace)
}

pub fn resolution_check_with(
    a: &PhasePoint,
    b: &PhasePoint,
    beta: f64,
    tol: f64,
    opts: &ResolutionOptions,
) -> Result<ResolutionReport> {
    check_beta(beta)?;
    let c = admissible_constant(beta).ok();
    let scale = c.unwrap_or(1.0);
    let raw = pair_integral_trace(a, b, beta, &|_, _| 1.0, 0.0, opts)?;
    let trace: Vec<(f64, Complex64)> = raw.iter().map(|&(s, v)| (s, v * scale)).collect();
    let tail_exponent = increment_slope(&trace, opts.fit_fraction);
    let rhs = kernel(a, b, beta);
    let lhs = trace.last().map(|t| t.1).unwrap_or_default();
    let residual = if c.is_some() {
        (lhs - rhs).norm()
    } else {
        f64::INFINITY
    };
    let last_increment = {
        let n = trace.len();
        (trace[n - 1].1 - trace[n - 2].1).norm()
    };
    // Convergence of the integral is judged from the trace alone; the
    // residual against the chosen constant is reported separately.
    let cauchy = last_increment < tol * scale.max(1.0) && tail_exponent < -0.1;
    let verdict = if c.is_some() && cauchy {
        Verdict::Converged
    } else {
        Verdict::Diverging
    };
    Ok(ResolutionReport {
        lhs,
        rhs,
        residual,
        implied_constant: rhs / (lhs / scale),
        cutoff_trace: trace,
        tail_exponent,
        verdict,
    })
}

/// Slope of `ln|T(2S) − T(S)|` against `ln S` over the last `fraction` of the trace.
pub fn increment_slope(trace: &[(f64, Complex64)], fraction: f64) -> f64 {
    let pts: Vec<(f64, f64)> = trace
        .windows(2)
        .filter_map(|w| {
            let d = (w[1].1 - w[0].1).norm();
            (d > 0.0).then(|| (w[0].0.ln(), d.ln()))
        })
        .collect();
    let start = ((1.0 - fraction) * pts.len() as f64).floor() as usize;
    let fit = &pts[start.min(pts.len().saturating_sub(2))..];
    crate::stats::least_squares_line(fit).map_or(f64::NAN, |l| l.slope)
}

/// `⟨a|Q|b⟩ = i ∂_p ⟨a|b⟩ = ⟨a|b⟩ / Z`.
pub fn matrix_element_q(a: &PhasePoint, b: &PhasePoint, beta: f64) -> Result<Complex64> {
    check_beta(beta)?;
    Ok(kernel(a, b, beta) / kernel_base(a, b, beta))
}

/// `⟨a|Q|b⟩` by quadrature with the integrand weighted by `x`.
pub fn matrix_element_q_quadrature(a: &PhasePoint, b: &PhasePoint, beta: f64) -> Result<Complex64> {
    let spec = FiducialSpec::unit_mean(beta)?;
    label_integral(a, b, &spec, |x| Complex64::new(x, 0.0))
}

/// `⟨a|D|b⟩` by quadrature, applying `D` to the ket wavefunction:
/// `D⟨x|r,s⟩ = [r x − i(α + ½ − βx/s)] ⟨x|r,s⟩`.
pub fn matrix_element_d(a: &PhasePoint, b: &PhasePoint, beta: f64) -> Result<Complex64> {
    let spec = FiducialSpec::unit_mean(beta)?;
    let c = spec.alpha + 0.5;
    let (r, s) = (b.p, b.q);
    label_integral(a, b, &spec, |x| Complex64::new(r * x, -(c - beta * x / s)))
}

/// Closed form of [`matrix_element_d`]: `(r + iβ/s)⟨a|Q|b⟩ − iβ⟨a|b⟩`.
pub fn matrix_element_d_closed(a: &PhasePoint, b: &PhasePoint, beta: f64) -> Result<Complex64> {
    check_beta(beta)?;
    let k = kernel(a, b, beta);
    let q = k / kernel_base(a, b, beta);
    Ok(Complex64::new(b.p, beta / b.q) * q - Complex64::new(0.0, beta) * k)
}
