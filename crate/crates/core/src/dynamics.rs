//! Closed-form dynamics for Hamiltonians in the affine Lie algebra.
//!
//! Group elements are handled through the faithful 2×2 representation
//! `M(p, q) = [[1/q, p], [0, 1]]`, which satisfies
//! `M(g₁)M(g₂) = M(g₁g₂)` for the product `(p₁ + p₂/q₁, q₁q₂)` realized by
//! `U[p,q] = e^{ipQ} e^{-i ln(q) D}`. In this representation `iQ` maps to
//! `[[0, 1], [0, 0]]` and `−iD` to `[[−1, 0], [0, 0]]`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fiducial::FiducialSpec;
use crate::kernel::{
    bra_integral, increment_slope, kernel, matrix_element_d_closed, matrix_element_q, pair_integral_trace,
    PhasePoint, ResolutionOptions,
};
use crate::quad::{adaptive_real, HalfLineShape, QuadOptions};

/// `𝓗 = R·Q + S·D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineHamiltonian {
    /// Coefficient of `Q`.
    pub r: f64,
    /// Coefficient of `D`.
    pub s: f64,
}

impl AffineHamiltonian {
    pub const ZERO: AffineHamiltonian = AffineHamiltonian { r: 0.0, s: 0.0 };

    pub fn new(r: f64, s: f64) -> Result<Self> {
        if !r.is_finite() || !s.is_finite() {
            return domain(format!("Hamiltonian coefficients must be finite, got ({r}, {s})"));
        }
        Ok(Self { r, s })
    }
}

/// An element of the affine group in coherent-state coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub p: f64,
    pub q: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { p: 0.0, q: 1.0 };

    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() || !(q > 0.0) || !q.is_finite() {
            return domain(format!("invalid group element ({p}, {q})"));
        }
        Ok(Self { p, q })
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(1.0 / self.q, self.p, 0.0, 1.0)
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Self {
            p: m[(0, 1)],
            q: 1.0 / m[(0, 0)],
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            p: -self.p * self.q,
            q: 1.0 / self.q,
        }
    }

    /// Left action on a coherent-state label: `U[g]|x⟩ = |g·x⟩`.
    pub fn act(&self, x: &PhasePoint) -> PhasePoint {
        let g = group_compose(self, &GroupElement { p: x.p, q: x.q });
        PhasePoint { p: g.p, q: g.q }
    }
}

pub fn group_compose(g1: &GroupElement, g2: &GroupElement) -> GroupElement {
    GroupElement {
        p: g1.p + g2.p / g1.q,
        q: g1.q * g2.q,
    }
}

/// Group coordinates of `e^{-i(RQ+SD)T}`, via the matrix exponential of
/// `T·[[−S, −R], [0, 0]]`.
pub fn exp_affine(h: &AffineHamiltonian, t: f64) -> GroupElement {
    if h.s == 0.0 {
        return GroupElement { p: -h.r * t, q: 1.0 };
    }
    let gen = Matrix2::new(-h.s * t, -h.r * t, 0.0, 0.0);
    GroupElement::from_matrix(&gen.exp())
}

/// `(e^{x} − 1)/x`, with a three-term series for |x| < 1e-6.
fn expm1_ratio(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

/// `(p e^{ST} + (R/S)(e^{ST} − 1), q e^{-ST})`, i.e. `exp_affine(H,T)⁻¹ · b`.
pub fn flow_labels(b: &PhasePoint, h: &AffineHamiltonian, t: f64) -> PhasePoint {
    let st = h.s * t;
    PhasePoint {
        p: b.p * st.exp() + h.r * t * expm1_ratio(st),
        q: b.q * (-st).exp(),
    }
}

/// `⟨a|e^{-i(RQ+SD)T}|b⟩ = ⟨flow(a)|b⟩`.
pub fn propagator_affine(
    a: &PhasePoint,
    b: &PhasePoint,
    h: &AffineHamiltonian,
    t: f64,
    beta: f64,
) -> Result<Complex64> {
    if !(beta > 0.0) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(kernel(&flow_labels(a, h, t), b, beta))
}

/// Independent route: `∫ conj(ψ_a(x)) (U_g ψ_b)(x) dx` with
/// `(U_g ψ)(x) = e^{i p_g x} q_g^{-1/2} ψ(x/q_g)` and `g = exp_affine(H,T)`.
pub fn propagator_affine_quadrature(
    a: &PhasePoint,
    b: &PhasePoint,
    h: &AffineHamiltonian,
    t: f64,
    beta: f64,
) -> Result<Complex64> {
    let spec = FiducialSpec::unit_mean(beta)?;
    let g = exp_affine(h, t);
    let (sq_g, sq_b) = (g.q.sqrt(), b.q.sqrt());
    let ket = |x: f64| {
        let y = x / g.q;
        let psi_b = Complex64::from_polar(spec.eval(y / b.q) / sq_b, b.p * y);
        Complex64::from_polar(1.0 / sq_g, g.p * x) * psi_b
    };
    let shape = HalfLineShape {
        endpoint_power: 2.0 * spec.alpha,
        decay_length: 1.0 / (beta * (1.0 / a.q + 1.0 / (g.q * b.q))),
        frequency: a.p - g.p - b.p / g.q,
    };
    bra_integral(a, &spec, ket, shape)
}

/// Time-dependent coefficients `r(t)Q + s(t)D` on `[0, T]`.
pub struct TimeDependentAffine {
    pub r: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub s: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TimeDependentAffine {
    pub fn new(
        r: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            r: Box::new(r),
            s: Box::new(s),
        }
    }

    pub fn constant(h: AffineHamiltonian) -> Self {
        Self::new(move |_| h.r, move |_| h.s)
    }

    pub fn at(&self, t: f64) -> AffineHamiltonian {
        AffineHamiltonian {
            r: (self.r)(t),
            s: (self.s)(t),
        }
    }
}

fn time_integral(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let v = adaptive_real(f, lo, hi, &QuadOptions::with_tol(1e-14, 1e-13))?;
    if !v.is_finite() {
        return Err(Error::Numeric(format!(
            "integral over [{lo}, {hi}] is not finite"
        )));
    }
    Ok(v)
}

/// Running averages `(r̄(t), s̄(t))` with `t·s̄(t) = ∫₀ᵗ s` and `t·r̄(t) = ∫₀ᵗ r`.
pub fn running_means(f: &TimeDependentAffine, t: f64) -> Result<AffineHamiltonian> {
    if t == 0.0 {
        return Ok(f.at(0.0));
    }
    Ok(AffineHamiltonian {
        r: time_integral(&f.r, 0.0, t)? / t,
        s: time_integral(&f.s, 0.0, t)? / t,
    })
}

/// The constant `(R, S)` whose exponential equals the time-ordered exponential.
///
/// The dilation part is the average `S = s̄(T)`. The translation part picks
/// up the later dilations, `R (1 − e^{-ST})/S = ∫₀ᵀ r(t) e^{-∫_t^T s} dt`, so
/// `R = r̄(T)` only when `r` is constant or `s ≡ 0`.
pub fn time_ordered_flow(f: &TimeDependentAffine, t_end: f64) -> Result<AffineHamiltonian> {
    if !(t_end > 0.0) {
        return domain(format!("T must be positive, got {t_end}"));
    }
    let sigma = |t: f64| time_integral(&f.s, 0.0, t);
    let total = sigma(t_end)?;
    let s_eff = total / t_end;
    let failure = std::cell::Cell::new(None);
    let weighted = |t: f64| match sigma(t) {
        Ok(st) => (f.r)(t) * (st - total).exp(),
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let j = time_integral(&weighted, 0.0, t_end)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    // R = S J / (1 − e^{-ST}) = J / (T · e^{-ST} · expm1_ratio(ST)).
    let x = s_eff * t_end;
    let r_eff = j / (t_end * (-x).exp() * expm1_ratio(x));
    Ok(AffineHamiltonian { r: r_eff, s: s_eff })
}

/// Ordered product `Π exp_affine(H(t_k), Δt)` with later times on the left,
/// sampling each slice at its midpoint.
pub fn ordered_product(f: &TimeDependentAffine, t_end: f64, steps: usize) -> GroupElement {
    let dt = t_end / steps as f64;
    let mut m = Matrix2::identity();
    for k in 0..steps {
        let h = f.at((k as f64 + 0.5) * dt);
        m = exp_affine(&h, dt).to_matrix() * m;
    }
    GroupElement::from_matrix(&m)
}

/// Operators with closed-form diagonal coherent-state expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolOp {
    Q,
    D,
    Q2,
    D2,
    /// `(QD + DQ)/2`.
    SymQD,
}

impl std::str::FromStr for SymbolOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q" => Ok(SymbolOp::Q),
            "d" => Ok(SymbolOp::D),
            "q2" | "q^2" => Ok(SymbolOp::Q2),
            "d2" | "d^2" => Ok(SymbolOp::D2),
            "qd" | "sym-qd" | "symqd" => Ok(SymbolOp::SymQD),
            other => domain(format!("unknown operator '{other}'")),
        }
    }
}

/// `⟨p,q|op|p,q⟩` from `U†QU = qQ`, `U†DU = D + pqQ` and the fiducial moments
/// `⟨Q⟩ = 1`, `⟨Q²⟩ = (2β+1)/(2β)`, `⟨D⟩ = 0`, `⟨D²⟩ = β/2`, `⟨QD+DQ⟩ = 0`.
pub fn lower_symbol(op: SymbolOp, at: &PhasePoint, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    let (p, q) = (at.p, at.q);
    let m2 = (2.0 * beta + 1.0) / (2.0 * beta);
    Ok(match op {
        SymbolOp::Q => q,
        SymbolOp::D => p * q,
        SymbolOp::Q2 => q * q * m2,
        SymbolOp::D2 => 0.5 * beta + p * p * q * q * m2,
        SymbolOp::SymQD => p * q * q * m2,
    })
}

/// Diagonal expectation by quadrature in the `Q`-representation, with
/// `Dψ_a = [p x − i(α + ½ − βx/q)] ψ_a`.
pub fn lower_symbol_quadrature(op: SymbolOp, at: &PhasePoint, beta: f64) -> Result<f64> {
    let spec = FiducialSpec::unit_mean(beta)?;
    let c = spec.alpha + 0.5;
    let (p, q) = (at.p, at.q);
    let density = |x: f64| {
        let e = spec.eval(x / q);
        e * e / q
    };
    let d_factor = |x: f64| Complex64::new(p * x, -(c - beta * x / q));
    let g = |x: f64| -> f64 {
        match op {
            SymbolOp::Q => x,
            SymbolOp::Q2 => x * x,
            SymbolOp::D => d_factor(x).re,
            SymbolOp::D2 => d_factor(x).norm_sqr(),
            SymbolOp::SymQD => x * d_factor(x).re,
        }
    };
    let f = |x: f64| Complex64::new(density(x) * g(x), 0.0);
    let shape = HalfLineShape {
        endpoint_power: 2.0 * spec.alpha,
        decay_length: q / (2.0 * beta),
        frequency: 0.0,
    };
    Ok(
        crate::quad::half_line(&f, shape, &QuadOptions::with_tol(1e-300, 1e-12))?
            .value
            .re,
    )
}

/// Result of fitting `h(p,q) = c_R q + c_S pq` to `𝓗 = RQ + SD` through the
/// measure integral `∫⟨a|x⟩ h(x) ⟨x|b⟩ dμ(x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakSymbolReport {
    pub c_r: f64,
    pub c_s: f64,
    /// Largest `|⟨a|𝓗|b⟩ − ∫⟨a|x⟩h⟨x|b⟩dμ|` over the endpoint pairs.
    pub residual: f64,
    /// Largest fitted increment exponent of the `s`-cutoff traces.
    pub tail_exponent: f64,
    pub pairs: Vec<(PhasePoint, PhasePoint)>,
}

/// Default endpoint pairs for [`weak_symbol_check`].
pub fn default_symbol_pairs() -> Vec<(PhasePoint, PhasePoint)> {
    let p = |a: f64, b: f64| PhasePoint { p: a, q: b };
    vec![
        (p(0.0, 1.0), p(0.0, 1.0)),
        (p(0.0, 1.0), p(0.5, 1.5)),
        (p(0.3, 0.8), p(-0.4, 1.2)),
        (p(1.0, 2.0), p(0.0, 1.0)),
    ]
}

/// Fits the candidate constants by complex least squares and reports the
/// residual. Requires `β > 1/2`; a trace whose increments do not decay is
/// reported as a divergent quadrature.
pub fn weak_symbol_check(
    target: &AffineHamiltonian,
    beta: f64,
    pairs: &[(PhasePoint, PhasePoint)],
) -> Result<WeakSymbolReport> {
    let c = crate::kernel::admissible_constant(beta)?;
    let opts = ResolutionOptions {
        doublings: 50,
        ..ResolutionOptions::default()
    };
    // Columns: ∫ q |.| and ∫ pq |.| per pair, and the target values.
    let mut cols_q = Vec::new();
    let mut cols_d = Vec::new();
    let mut rhs = Vec::new();
    let mut worst_tail = f64::NEG_INFINITY;
    for (a, b) in pairs {
        let tq = pair_integral_trace(a, b, beta, &|_, s| s, 0.0, &opts)?;
        let td = pair_integral_trace(a, b, beta, &|r, s| r * s, 1.0, &opts)?;
        for t in [&tq, &td] {
            let e = increment_slope(t, 0.5);
            worst_tail = worst_tail.max(if e.is_nan() { f64::NEG_INFINITY } else { e });
        }
        cols_q.push(tq.last().unwrap().1 * c);
        cols_d.push(td.last().unwrap().1 * c);
        rhs.push(matrix_element_q(a, b, beta)? * target.r + matrix_element_d_closed(a, b, beta)? * target.s);
    }
    if worst_tail > -0.1 {
        return Err(Error::Numeric(format!(
            "measure integral of the candidate symbol diverges at beta = {beta}: \
             cutoff increments scale like S^{worst_tail:.3}"
        )));
    }
    // Real least squares on stacked real/imaginary parts.
    let mut ata = nalgebra::Matrix2::<f64>::zeros();
    let mut atb = nalgebra::Vector2::<f64>::zeros();
    for ((q, d), y) in cols_q.iter().zip(&cols_d).zip(&rhs) {
        for (xq, xd, yv) in [(q.re, d.re, y.re), (q.im, d.im, y.im)] {
            ata[(0, 0)] += xq * xq;
            ata[(0, 1)] += xq * xd;
            ata[(1, 1)] += xd * xd;
            atb[0] += xq * yv;
            atb[1] += xd * yv;
        }
    }
    ata[(1, 0)] = ata[(0, 1)];
    let (c_r, c_s) = if target.r == 0.0 && target.s == 0.0 {
        (0.0, 0.0)
    } else {
        // Drop a column that carries no target weight so the fit stays well posed.
        match (target.r != 0.0, target.s != 0.0) {
            (true, false) => (atb[0] / ata[(0, 0)], 0.0),
            (false, true) => (0.0, atb[1] / ata[(1, 1)]),
            _ => {
                let sol = ata
                    .lu()
                    .solve(&atb)
                    .ok_or_else(|| Error::Numeric("singular symbol fit".into()))?;
                (sol[0], sol[1])
            }
        }
    };
    let residual = cols_q
        .iter()
        .zip(&cols_d)
        .zip(&rhs)
        .map(|((q, d), y)| (y - q * c_r - d * c_s).norm())
        .fold(0.0, f64::max);
    Ok(WeakSymbolReport {
        c_r,
        c_s,
        residual,
        tail_exponent: worst_tail,
        pairs: pairs.to_vec(),
    })
}

/// `⟨a|(1 − iε𝓗)|b⟩`, the single-slice short-time approximation.
pub fn sliced_short_time(
    a: &PhasePoint,
    b: &PhasePoint,
    h: &AffineHamiltonian,
    eps: f64,
    beta: f64,
) -> Result<Complex64> {
    let k = crate::kernel::overlap_closed(a, b, beta)?.value;
    let hv = matrix_element_q(a, b, beta)? * h.r + matrix_element_d_closed(a, b, beta)? * h.s;
    Ok(k - Complex64::new(0.0, eps) * hv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(p: f64, q: f64) -> PhasePoint {
        PhasePoint { p, q }
    }

    fn close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
        (a.p - b.p).abs() < tol && (a.q - b.q).abs() < tol
    }

    #[test]
    fn compose_examples() {
        let g = GroupElement::new(1.5, 0.7).unwrap();
        assert_eq!(group_compose(&g, &GroupElement::IDENTITY), g);
        let r = group_compose(&GroupElement { p: 0.0, q: 2.0 }, &GroupElement { p: 4.0, q: 1.0 });
        assert!(close(&r, &GroupElement { p: 2.0, q: 2.0 }, 1e-15));
        // Matrix representation oracle.
        let m = GroupElement { p: 0.0, q: 2.0 }.to_matrix() * GroupElement { p: 4.0, q: 1.0 }.to_matrix();
        assert!(close(&GroupElement::from_matrix(&m), &r, 1e-15));
        assert!(close(
            &group_compose(&g, &g.inverse()),
            &GroupElement::IDENTITY,
            1e-15
        ));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_affine(&AffineHamiltonian::ZERO, 3.0), GroupElement::IDENTITY);
        let g = exp_affine(&AffineHamiltonian { r: 1.0, s: 0.0 }, 2.0);
        assert!(close(&g, &GroupElement { p: -2.0, q: 1.0 }, 1e-15));
        // Closed form: (−R(1 − e^{-ST})/S, e^{ST}).
        let h = AffineHamiltonian { r: 0.7, s: -1.3 };
        let g = exp_affine(&h, 0.9);
        let st = h.s * 0.9;
        let want = GroupElement {
            p: -h.r * (1.0 - (-st).exp()) / h.s,
            q: st.exp(),
        };
        assert!(close(&g, &want, 1e-13));
    }

    #[test]
    fn flow_examples() {
        let f = flow_labels(&pt(1.0, 2.0), &AffineHamiltonian { r: 0.0, s: 2f64.ln() }, 1.0);
        assert!((f.p - 2.0).abs() < 1e-14 && (f.q - 1.0).abs() < 1e-14);
        let f = flow_labels(&pt(0.0, 1.0), &AffineHamiltonian { r: 1.0, s: 1.0 }, 1.0);
        assert!((f.p - 1.718_281_828_459_045).abs() < 1e-14);
        assert!((f.q - 0.367_879_441_171_442_3).abs() < 1e-15);
        let f = flow_labels(&pt(0.4, 1.1), &AffineHamiltonian { r: 1.0, s: 0.0 }, 2.0);
        assert!((f.p - 2.4).abs() < 1e-15 && f.q == 1.1);
    }

    #[test]
    fn flow_is_inverse_exponential_action() {
        let h = AffineHamiltonian { r: -0.6, s: 0.45 };
        let b = pt(0.3, 1.7);
        let via_group = exp_affine(&h, 1.3).inverse().act(&b);
        let direct = flow_labels(&b, &h, 1.3);
        assert!((via_group.p - direct.p).abs() < 1e-13 && (via_group.q - direct.q).abs() < 1e-13);
    }

    #[test]
    fn propagator_examples() {
        let (a, b) = (pt(0.2, 0.9), pt(-0.5, 1.4));
        let v = propagator_affine(&a, &b, &AffineHamiltonian::ZERO, 1.0, 0.8).unwrap();
        assert!((v - kernel(&a, &b, 0.8)).norm() < 1e-15);

        let h = AffineHamiltonian { r: 0.0, s: 2f64.ln() };
        let o = pt(0.0, 1.0);
        let v = propagator_affine(&o, &o, &h, 1.0, 0.4).unwrap();
        let want = kernel(&pt(0.0, 2.0), &o, 0.4);
        // flow((0,1)) = (0, 1/2); ⟨0,1/2|0,1⟩ = ⟨0,2|0,1⟩ by the p=0 symmetry q ↔ 1/q.
        assert!((v - want).norm() < 1e-14);
        let quad = propagator_affine_quadrature(&o, &o, &h, 1.0, 0.4).unwrap();
        assert!((v - quad).norm() < 1e-7, "{v} vs {quad}");
    }

    #[test]
    fn unitarity_witness() {
        let a = pt(0.3, 1.2);
        let moving = AffineHamiltonian { r: 0.5, s: 0.2 };
        assert!(propagator_affine(&a, &a, &moving, 1.0, 0.7).unwrap().norm() < 1.0);
        assert!(
            (propagator_affine(&a, &a, &AffineHamiltonian::ZERO, 1.0, 0.7)
                .unwrap()
                .norm()
                - 1.0)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn time_ordered_examples() {
        let c = TimeDependentAffine::constant(AffineHamiltonian { r: 0.3, s: -0.8 });
        let h = time_ordered_flow(&c, 1.5).unwrap();
        assert!((h.r - 0.3).abs() < 1e-12 && (h.s + 0.8).abs() < 1e-12);

        let pi = std::f64::consts::PI;
        let f = TimeDependentAffine::new(|_| 0.0, move |t| (pi * t).sin());
        let h = time_ordered_flow(&f, 1.0).unwrap();
        assert!((h.s - 2.0 / pi).abs() < 1e-12 && h.r == 0.0);
        let prod = ordered_product(&f, 1.0, 10_000);
        let want = exp_affine(&AffineHamiltonian { r: 0.0, s: 2.0 / pi }, 1.0);
        assert!((prod.p - want.p).abs() < 1e-6 && (prod.q - want.q).abs() < 1e-6);

        let means = running_means(&f, 1.0).unwrap();
        assert!((means.s - h.s).abs() < 1e-12);
    }

    #[test]
    fn lower_symbol_examples() {
        let a = pt(3.0, 2.0);
        for beta in [0.3, 1.0] {
            assert!((lower_symbol(SymbolOp::Q, &a, beta).unwrap() - 2.0).abs() < 1e-15);
            assert!((lower_symbol(SymbolOp::D, &a, beta).unwrap() - 6.0).abs() < 1e-15);
        }
        let v = lower_symbol(SymbolOp::Q2, &pt(0.0, 1.3), 1.0).unwrap();
        assert!((v - 1.5 * 1.3 * 1.3).abs() < 1e-14);
        for op in [
            SymbolOp::Q,
            SymbolOp::D,
            SymbolOp::Q2,
            SymbolOp::D2,
            SymbolOp::SymQD,
        ] {
            for beta in [0.35, 1.0, 2.0] {
                let at = pt(-0.7, 1.6);
                let c = lower_symbol(op, &at, beta).unwrap();
                let q = lower_symbol_quadrature(op, &at, beta).unwrap();
                assert!(
                    (c - q).abs() < 1e-9 * c.abs().max(1.0),
                    "{op:?} beta={beta}: {c} vs {q}"
                );
            }
        }
    }

    #[test]
    fn sliced_examples() {
        let (a, b) = (pt(0.2, 0.9), pt(-0.5, 1.4));
        let h = AffineHamiltonian { r: 0.8, s: -0.4 };
        let v = sliced_short_time(&a, &b, &h, 0.0, 0.6).unwrap();
        assert_eq!(v, kernel(&a, &b, 0.6));
        let err: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&e| {
                let p = propagator_affine(&a, &b, &h, e, 0.6).unwrap();
                let s = sliced_short_time(&a, &b, &h, e, 0.6).unwrap();
                (p - s).norm() / (e * e)
            })
            .collect();
        assert!(err.iter().all(|v| *v < 10.0));
        assert!((err[0] / err[2] - 1.0).abs() < 0.05);

        let k = 1.7;
        let d = pt(0.4, 1.3);
        let v = sliced_short_time(&d, &d, &AffineHamiltonian { r: k, s: 0.0 }, 1e-3, 0.9).unwrap();
        let want = Complex64::new(1.0, -1e-3 * k * lower_symbol(SymbolOp::Q, &d, 0.9).unwrap());
        assert!((v - want).norm() < 1e-12);
    }

    #[test]
    fn weak_symbol_zero_target() {
        let r = weak_symbol_check(&AffineHamiltonian::ZERO, 2.0, &default_symbol_pairs()[..2]).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(weak_symbol_check(&AffineHamiltonian::ZERO, 0.4, &default_symbol_pairs()).is_err());
    }
}
