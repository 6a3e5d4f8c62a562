//! Finite-span elements of the reproducing kernel Hilbert space `C_β`.
//!
//! Elements are `ψ(p,q) = Σ_j α_j ⟨p,q|p_j,q_j⟩`. Inner products are taken
//! from the Gram matrix, which is valid for every `β > 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernel::{kernel, PhasePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanElement {
    pub beta: f64,
    pub coeffs: Vec<Complex64>,
    pub points: Vec<PhasePoint>,
}

impl SpanElement {
    pub fn new(beta: f64, coeffs: Vec<Complex64>, points: Vec<PhasePoint>) -> Result<Self> {
        if !(beta > 0.0) {
            return domain(format!("beta must be positive, got {beta}"));
        }
        if coeffs.len() != points.len() {
            return domain(format!(
                "{} coefficients for {} points",
                coeffs.len(),
                points.len()
            ));
        }
        Ok(Self { beta, coeffs, points })
    }

    /// The kernel section `⟨·|at⟩` with unit coefficient.
    pub fn kernel_at(beta: f64, at: PhasePoint) -> Result<Self> {
        Self::new(beta, vec![Complex64::new(1.0, 0.0)], vec![at])
    }

    /// `Σ |α_j|`, a bound on `|ψ|` everywhere.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn eval(&self, at: &PhasePoint) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&self.points)
            .map(|(c, x)| c * kernel(at, x, self.beta))
            .sum()
    }
}

pub fn eval_span(e: &SpanElement, at: &PhasePoint) -> Complex64 {
    e.eval(at)
}

/// `(ψ, φ) = Σ_j Σ_k conj(α_j) γ_k ⟨x_j|y_k⟩`.
pub fn inner_product(e1: &SpanElement, e2: &SpanElement) -> Result<Complex64> {
    if e1.beta != e2.beta {
        return domain(format!(
            "elements live in different spaces (beta {} vs {})",
            e1.beta, e2.beta
        ));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, x) in e1.coeffs.iter().zip(&e1.points) {
        for (g, y) in e2.coeffs.iter().zip(&e2.points) {
            acc += a.conj() * g * kernel(x, y, e1.beta);
        }
    }
    Ok(acc)
}

pub fn norm_sqr(e: &SpanElement) -> f64 {
    inner_product(e, e).map(|v| v.re).unwrap_or(f64::NAN)
}

/// Central-difference value of `Bψ` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationResidual {
    pub value: Complex64,
    pub step: f64,
    pub point: PhasePoint,
}

/// `Bψ = −i q⁻¹ ∂_p ψ + ψ + β⁻¹ q ∂_q ψ`, using the `β` attached to `e`.
pub fn polarization_residual(e: &SpanElement, at: &PhasePoint, h: f64) -> Result<PolarizationResidual> {
    polarization_residual_with(|x| e.eval(x), e.beta, at, h)
}

/// `Bψ` for an arbitrary function, with the polarization operator at `beta`.
///
/// Derivatives use central stencils in `p` and in `u = ln q`, where
/// `q ∂_q = ∂_u`.
pub fn polarization_residual_with<F>(
    psi: F,
    beta: f64,
    at: &PhasePoint,
    h: f64,
) -> Result<PolarizationResidual>
where
    F: Fn(&PhasePoint) -> Complex64,
{
    if !(h > 0.0) {
        return domain(format!("step must be positive, got {h}"));
    }
    if at.q <= 2.0 * h {
        return domain(format!("step {h} too large for q = {}", at.q));
    }
    let pp = PhasePoint { p: at.p + h, q: at.q };
    let pm = PhasePoint { p: at.p - h, q: at.q };
    let up = PhasePoint {
        p: at.p,
        q: at.q * h.exp(),
    };
    let um = PhasePoint {
        p: at.p,
        q: at.q * (-h).exp(),
    };
    let d_p = (psi(&pp) - psi(&pm)) / (2.0 * h);
    let d_u = (psi(&up) - psi(&um)) / (2.0 * h);
    let value = Complex64::new(0.0, -1.0 / at.q) * d_p + psi(at) + d_u / beta;
    Ok(PolarizationResidual {
        value,
        step: h,
        point: *at,
    })
}

/// Observed order of the residual from steps `h, h/2, h/4`.
pub fn polarization_order(e: &SpanElement, at: &PhasePoint, h: f64) -> Result<f64> {
    let r: Vec<f64> = [h, 0.5 * h, 0.25 * h]
        .iter()
        .map(|&s| polarization_residual(e, at, s).map(|r| r.value.norm()))
        .collect::<Result<_>>()?;
    Ok(0.5 * ((r[0] / r[1]).log2() + (r[1] / r[2]).log2()))
}
