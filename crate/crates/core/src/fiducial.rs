//! Fiducial vectors `η_{α,β}(x) = N x^α e^{-βx}` on the half-line `x > 0`.
//!
//! These are the minimum-uncertainty states for the affine pair `(Q, D)`.
//! The one-parameter family `α = β − 1/2` has `⟨Q⟩ = 1`, and it is the family
//! for which the coherent-state overlap has a closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::quad::{half_line, HalfLineShape, QuadOptions};

/// A member of the two-parameter fiducial family together with its
/// normalization constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiducialSpec {
    pub alpha: f64,
    pub beta: f64,
    pub norm_const: f64,
}

impl FiducialSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let norm_const = normalization_constant(alpha, beta)?;
        Ok(Self {
            alpha,
            beta,
            norm_const,
        })
    }

    /// The `⟨Q⟩ = 1` member, `α = β − 1/2`.
    pub fn unit_mean(beta: f64) -> Result<Self> {
        Self::new(beta - 0.5, beta)
    }

    /// Value of `η` at `x > 0`.
    pub fn eval(&self, x: f64) -> f64 {
        self.norm_const * x.powf(self.alpha) * (-self.beta * x).exp()
    }

    /// `x η'(x) / η(x) = α − βx`.
    pub fn log_derivative_weight(&self, x: f64) -> f64 {
        self.alpha - self.beta * x
    }

    /// `(Dη)(x) / η(x)` for `D = −(i/2)(x∂ₓ + ∂ₓx) = −i(x∂ₓ + 1/2)`.
    ///
    /// Reduces to `−iβ(1 − x)` on the unit-mean family.
    pub fn dilation_factor(&self, x: f64) -> Complex64 {
        Complex64::new(0.0, -(self.alpha + 0.5 - self.beta * x))
    }
}

fn check_params(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > -0.5) || !alpha.is_finite() {
        return domain(format!("alpha must exceed -1/2, got {alpha}"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(())
}

/// `N_{α,β}` with `N² Γ(2α+1) / (2β)^{2α+1} = 1`.
pub fn normalization_constant(alpha: f64, beta: f64) -> Result<f64> {
    check_params(alpha, beta)?;
    let a = 2.0 * alpha + 1.0;
    let ln_n2 = a * (2.0 * beta).ln() - ln_gamma(a);
    Ok((0.5 * ln_n2).exp())
}

pub fn eval_fiducial(x: f64, spec: &FiducialSpec) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("fiducial vector is defined for x > 0, got {x}"));
    }
    Ok(spec.eval(x))
}

/// How a [`MomentReport`] value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    GammaRatio,
    Quadrature,
}

/// A moment value or the divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentValue {
    Finite(f64),
    Divergent,
}

impl MomentValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            MomentValue::Finite(v) => Some(v),
            MomentValue::Divergent => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, MomentValue::Finite(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub order: i32,
    pub value: MomentValue,
    pub method: MomentMethod,
}

/// Closed form `⟨Q^k⟩ = Γ(2α+1+k) / (Γ(2α+1) (2β)^k)`, divergent unless
/// `2α + 1 + k > 0`.
pub fn moment_gamma_ratio(k: i32, spec: &FiducialSpec) -> MomentValue {
    let a = 2.0 * spec.alpha + 1.0;
    let shifted = a + k as f64;
    if shifted <= 0.0 {
        return MomentValue::Divergent;
    }
    let ln_v = ln_gamma(shifted) - ln_gamma(a) - k as f64 * (2.0 * spec.beta).ln();
    MomentValue::Finite(ln_v.exp())
}

/// `∫₀^∞ x^k η(x)² dx` by adaptive quadrature.
pub fn moment_quadrature(k: i32, spec: &FiducialSpec) -> Result<MomentValue> {
    let power = 2.0 * spec.alpha + k as f64;
    if power <= -1.0 {
        return Ok(MomentValue::Divergent);
    }
    let n2 = spec.norm_const * spec.norm_const;
    let two_beta = 2.0 * spec.beta;
    let f = |x: f64| Complex64::new(n2 * x.powf(power) * (-two_beta * x).exp(), 0.0);
    let shape = HalfLineShape {
        endpoint_power: power,
        decay_length: 1.0 / two_beta,
        frequency: 0.0,
    };
    let r = half_line(&f, shape, &QuadOptions::with_tol(1e-300, 1e-13))?;
    Ok(MomentValue::Finite(r.value.re))
}

/// `⟨Q^k⟩` for `k ≥ −1`, reported via the gamma ratio.
pub fn moment(k: i32, spec: &FiducialSpec) -> Result<MomentReport> {
    if k < -1 {
        return domain(format!("moment order must be >= -1, got {k}"));
    }
    check_params(spec.alpha, spec.beta)?;
    Ok(MomentReport {
        order: k,
        value: moment_gamma_ratio(k, spec),
        method: MomentMethod::GammaRatio,
    })
}

/// Both routes for `⟨Q^k⟩`; the second entry is the quadrature report.
pub fn moment_cross_checked(k: i32, spec: &FiducialSpec) -> Result<(MomentReport, MomentReport)> {
    let closed = moment(k, spec)?;
    let quad = MomentReport {
        order: k,
        value: moment_quadrature(k, spec)?,
        method: MomentMethod::Quadrature,
    };
    Ok((closed, quad))
}

/// Standard deviations of `Q` and `D` in the state `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spreads {
    pub mean_q: f64,
    pub delta_q: f64,
    pub mean_d: f64,
    pub delta_d: f64,
}

/// Spreads from the closed-form moments. With `Dη = −i(α + 1/2 − βx)η`,
/// `⟨D⟩ = 0` and `⟨D²⟩ = β² Var(Q)`.
pub fn spreads(spec: &FiducialSpec) -> Spreads {
    let m1 = moment_gamma_ratio(1, spec).finite().unwrap_or(f64::NAN);
    let m2 = moment_gamma_ratio(2, spec).finite().unwrap_or(f64::NAN);
    let var_q = m2 - m1 * m1;
    let c = spec.alpha + 0.5;
    // ⟨(c − βx)²⟩ = c² − 2cβ⟨Q⟩ + β²⟨Q²⟩
    let d2 = c * c - 2.0 * c * spec.beta * m1 + spec.beta * spec.beta * m2;
    let mean_d = 0.0;
    Spreads {
        mean_q: m1,
        delta_q: var_q.sqrt(),
        mean_d,
        delta_d: (d2 - mean_d * mean_d).max(0.0).sqrt(),
    }
}

/// Spreads computed by quadrature, applying `D` to `η` through
/// [`FiducialSpec::dilation_factor`].
pub fn spreads_quadrature(spec: &FiducialSpec) -> Result<Spreads> {
    let n2 = spec.norm_const * spec.norm_const;
    let p = 2.0 * spec.alpha;
    let tb = 2.0 * spec.beta;
    let shape = HalfLineShape {
        endpoint_power: p,
        decay_length: 1.0 / tb,
        frequency: 0.0,
    };
    let opts = QuadOptions::with_tol(1e-300, 1e-13);
    let weight = |x: f64| n2 * x.powf(p) * (-tb * x).exp();
    let integrate = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
        let f = |x: f64| Complex64::new(weight(x) * g(x), 0.0);
        Ok(half_line(&f, shape, &opts)?.value.re)
    };
    let m1 = integrate(&|x| x)?;
    let m2 = integrate(&|x| x * x)?;
    // ⟨η|D|η⟩ = ∫ η (Dη) and ⟨D²⟩ = ‖Dη‖² for self-adjoint D.
    let mean_d_c = {
        let f = |x: f64| spec.dilation_factor(x) * weight(x);
        half_line(&f, shape, &opts)?.value
    };
    let d2 = integrate(&|x| spec.dilation_factor(x).norm_sqr())?;
    Ok(Spreads {
        mean_q: m1,
        delta_q: (m2 - m1 * m1).sqrt(),
        mean_d: mean_d_c.re,
        delta_d: (d2 - mean_d_c.norm_sqr()).max(0.0).sqrt(),
    })
}

/// `ΔQ · ΔD`, which the uncertainty relation bounds below by `⟨Q⟩/2`.
pub fn uncertainty_product(spec: &FiducialSpec) -> f64 {
    let s = spreads(spec);
    s.delta_q * s.delta_d
}

/// True iff `⟨Q^{-1}⟩ < ∞`, i.e. iff `α > 0`.
pub fn is_admissible(spec: &FiducialSpec) -> bool {
    moment_gamma_ratio(-1, spec).is_finite()
}
