//! The acceptance suite: one function per criterion, each returning a report
//! with its individual checks. Used by the `acceptance` test target and by
//! `wcs selftest`.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    default_symbol_pairs, exp_affine, lower_symbol, lower_symbol_quadrature, ordered_product,
    propagator_affine, propagator_affine_quadrature, time_ordered_flow, weak_symbol_check, AffineHamiltonian,
    SymbolOp, TimeDependentAffine,
};
use crate::fiducial::{is_admissible, moment_gamma_ratio, moment_quadrature, FiducialSpec};
use crate::kernel::{
    gram, hermitian_eigenvalues, kernel, overlap_closed, overlap_quadrature, resolution_check, PhasePoint,
    Verdict,
};
use crate::pathmc::{extrapolate_nu, propagator_mc, symbol_insertion_mc, McConfig, McEstimate};
use crate::rkhs::{polarization_order, polarization_residual_with, SpanElement};
use crate::semigroup::{projection_limits, toy_heat, toy_heat_grid, toy_selfconsistent, GridSpec};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub elapsed_s: f64,
}

impl CriterionReport {
    /// `PASS  7 projection limit (12.3 s)` followed by failing checks.
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} {:>2} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_s
        );
        for c in self.checks.iter().filter(|c| !c.passed) {
            s.push_str(&format!("\n        failed: {}: {}", c.name, c.detail));
        }
        s
    }
}

/// Scale of the expensive criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Options {
    /// Smaller grids and sample counts; for smoke runs only.
    pub quick: bool,
}

struct Builder {
    id: u8,
    title: &'static str,
    checks: Vec<Check>,
    start: Instant,
}

impl Builder {
    fn new(id: u8, title: &'static str) -> Self {
        Self {
            id,
            title,
            checks: Vec::new(),
            start: Instant::now(),
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn error(&mut self, name: impl Into<String>, e: impl std::fmt::Display) {
        self.check(name, false, format!("error: {e}"));
    }

    fn runtime(&mut self, limit_s: f64) {
        let t = self.start.elapsed().as_secs_f64();
        self.check("runtime", t < limit_s, format!("{t:.1} s (limit {limit_s} s)"));
    }

    fn finish(self) -> CriterionReport {
        CriterionReport {
            id: self.id,
            title: self.title,
            passed: !self.checks.is_empty() && self.checks.iter().all(|c| c.passed),
            checks: self.checks,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        }
    }
}

fn pt(p: f64, q: f64) -> PhasePoint {
    PhasePoint { p, q }
}

fn rel(x: Complex64, exact: Complex64) -> f64 {
    (x - exact).norm() / exact.norm()
}

/// Endpoint pairs `(a, b)` for `⟨a|b⟩`.
fn route_pairs() -> Vec<(PhasePoint, PhasePoint)> {
    vec![
        (pt(0.0, 1.0), pt(0.0, 2.0)),
        (pt(0.0, 1.0), pt(0.5, 1.0)),
        (pt(0.3, 1.5), pt(-0.2, 0.8)),
    ]
}

fn concordance_pairs() -> Vec<(PhasePoint, PhasePoint)> {
    let mut v = route_pairs();
    v.push((pt(-0.5, 0.7), pt(0.4, 1.3)));
    v.push((pt(1.0, 2.0), pt(0.0, 1.0)));
    v
}

const NU_SCHEDULE: [f64; 3] = [4.0, 8.0, 16.0];

fn wide_grid(quick: bool) -> GridSpec {
    if quick {
        GridSpec::default()
    } else {
        GridSpec {
            n_p: 400,
            n_u: 400,
            ..GridSpec::default()
        }
    }
}

/// Grid-route `T` per `β`.
fn semigroup_t(beta: f64) -> f64 {
    if beta >= 1.0 {
        25.0
    } else {
        2.0
    }
}

const MC_T: f64 = 0.5;

fn mc_samples(quick: bool) -> usize {
    if quick {
        20_000
    } else {
        200_000
    }
}

pub fn kernel_exactness(_: Options) -> CriterionReport {
    let mut b = Builder::new(1, "kernel: closed form vs quadrature");
    let labels = [
        pt(0.0, 1.0),
        pt(0.7, 0.5),
        pt(-1.2, 2.0),
        pt(3.0, 1.3),
        pt(-0.4, 0.2),
    ];
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for beta in [0.3, 0.5, 1.0, 2.0, 4.0] {
        let spec = match FiducialSpec::unit_mean(beta) {
            Ok(s) => s,
            Err(e) => {
                b.error(format!("β = {beta}"), e);
                continue;
            }
        };
        for x in &labels {
            for y in &labels {
                match overlap_quadrature(x, y, &spec) {
                    Ok(v) => {
                        let d = (v - kernel(x, y, beta)).norm();
                        worst = worst.max(d);
                        ok &= d <= 1e-8;
                    }
                    Err(e) => {
                        ok = false;
                        b.error(format!("β = {beta}, {x:?}, {y:?}"), e);
                    }
                }
            }
        }
    }
    b.check(
        "125 overlaps to 1e-8",
        ok && worst <= 1e-8,
        format!("max |Δ| = {worst:.2e}"),
    );
    b.runtime(60.0);
    b.finish()
}

pub fn admissibility(_: Options) -> CriterionReport {
    let mut b = Builder::new(2, "admissibility dichotomy");
    let mut wrong = Vec::new();
    for k in 1..=80 {
        let beta = k as f64 / 20.0;
        let spec = FiducialSpec::unit_mean(beta).expect("positive beta");
        if is_admissible(&spec) != (beta > 0.5) {
            wrong.push(beta);
        }
    }
    for beta in [0.5, 0.5 + 1e-9, 0.5 - 1e-9] {
        let spec = FiducialSpec::unit_mean(beta).expect("positive beta");
        if is_admissible(&spec) != (beta > 0.5) {
            wrong.push(beta);
        }
    }
    b.check(
        "admissible iff β > 1/2",
        wrong.is_empty(),
        format!("misclassified: {wrong:?}"),
    );
    for beta in [0.6, 1.0, 2.0] {
        let spec = FiducialSpec::unit_mean(beta).expect("positive beta");
        let want = 2.0 * beta / (2.0 * beta - 1.0);
        let g = moment_gamma_ratio(-1, &spec).finite();
        let q = moment_quadrature(-1, &spec).ok().and_then(|m| m.finite());
        match (g, q) {
            (Some(g), Some(q)) => {
                let d = (g - want).abs().max((q - want).abs()) / want;
                b.check(
                    format!("⟨Q^-1⟩ at β = {beta}"),
                    d <= 1e-8,
                    format!("gamma {g}, quadrature {q}, exact {want}"),
                );
            }
            _ => b.check(
                format!("⟨Q^-1⟩ at β = {beta}"),
                false,
                format!("gamma {g:?}, quadrature {q:?}"),
            ),
        }
    }
    b.finish()
}

pub fn resolution_of_unity(_: Options) -> CriterionReport {
    let mut b = Builder::new(3, "resolution of unity");
    let (x, y) = (pt(0.0, 1.0), pt(0.5, 1.5));
    for beta in [0.75, 1.0, 2.0] {
        match resolution_check(&x, &y, beta, 1e-4) {
            Ok(r) => b.check(
                format!("residual at β = {beta}"),
                r.residual < 1e-4,
                format!(
                    "residual {:.3e}, implied c ratio {:.6}",
                    r.residual,
                    r.implied_constant.re * 2.0 * std::f64::consts::PI * (1.0 - 0.5 / beta)
                ),
            ),
            Err(e) => b.error(format!("β = {beta}"), e),
        }
    }
    for beta in [0.3, 0.4] {
        match resolution_check(&x, &y, beta, 1e-4) {
            Ok(r) => {
                let want = 1.0 - 2.0 * beta;
                let ok =
                    r.verdict == Verdict::Diverging && (r.tail_exponent - want).abs() <= 0.1 * want.abs();
                b.check(
                    format!("divergence at β = {beta}"),
                    ok,
                    format!(
                        "verdict {:?}, exponent {:.4} vs {want:.4}",
                        r.verdict, r.tail_exponent
                    ),
                );
            }
            Err(e) => b.error(format!("β = {beta}"), e),
        }
    }
    b.runtime(300.0);
    b.finish()
}

pub fn positive_definiteness(_: Options) -> CriterionReport {
    let mut b = Builder::new(4, "positive definiteness");
    for beta in [0.25f64, 0.5, 1.0, 2.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(beta.to_bits());
        let mut min_eig = f64::INFINITY;
        let mut err = None;
        for _ in 0..200 {
            let n = rng.random_range(1..=20);
            let pts: Vec<PhasePoint> = (0..n)
                .map(|_| pt(rng.random_range(-5.0..5.0), rng.random_range(-2.0f64..2.0).exp()))
                .collect();
            match gram(&pts, beta) {
                Ok(g) => {
                    let e = hermitian_eigenvalues(&g);
                    min_eig = min_eig.min(e.iter().copied().fold(f64::INFINITY, f64::min));
                }
                Err(e) => err = Some(e),
            }
        }
        match err {
            Some(e) => b.error(format!("β = {beta}"), e),
            None => b.check(
                format!("β = {beta}"),
                min_eig >= -1e-10,
                format!("min eigenvalue {min_eig:.3e}"),
            ),
        }
    }
    b.finish()
}

pub fn polarization(_: Options) -> CriterionReport {
    let mut b = Builder::new(5, "polarization");
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut orders = Vec::new();
    let mut err = None;
    for _ in 0..20 {
        let beta = rng.random_range(0.3..3.0);
        let center = pt(rng.random_range(-1.0..1.0), rng.random_range(-0.7f64..0.7).exp());
        let at = pt(rng.random_range(-1.0..1.0), rng.random_range(-0.7f64..0.7).exp());
        let e = SpanElement::kernel_at(beta, center).expect("positive beta");
        match polarization_order(&e, &at, 0.05) {
            Ok(o) => orders.push(o),
            Err(x) => err = Some(x),
        }
    }
    if let Some(e) = err {
        b.error("order", e);
    }
    let bad: Vec<f64> = orders.iter().copied().filter(|o| (o - 2.0).abs() > 0.2).collect();
    let lo = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    b.check(
        "order 2 ± 0.2 on 20 kernels",
        bad.is_empty() && orders.len() == 20,
        format!("orders in [{lo:.3}, {hi:.3}]"),
    );
    // Kernels of one β under the operator of another (β differing by 0.25).
    for (b1, b2) in [(1.0, 1.25), (0.4, 0.65), (2.0, 1.75)] {
        let k = SpanElement::kernel_at(b1, pt(0.0, 1.0)).expect("positive beta");
        let mut res = Vec::new();
        for _ in 0..20 {
            let at = pt(rng.random_range(-2.0..2.0), rng.random_range(-1.0f64..1.0).exp());
            match polarization_residual_with(|x| k.eval(x), b2, &at, 1e-3) {
                Ok(r) => res.push(r.value.norm()),
                Err(e) => b.error("cross-β witness", e),
            }
        }
        let m = crate::stats::median(&mut res);
        b.check(
            format!("cross-β witness β₁ = {b1}, β₂ = {b2}"),
            m > 1e-3,
            format!("median |B_β₂ψ| = {m:.3e}"),
        );
    }
    b.finish()
}

pub fn toy_model(_: Options) -> CriterionReport {
    let mut b = Builder::new(6, "toy model");
    let t = 1.0;
    let mut worst_grid: f64 = 0.0;
    let mut worst_route: f64 = 0.0;
    let mut worst_limit: f64 = 0.0;
    for &nu in &[1.0, 4.0, 16.0] {
        for &(x2, x1) in &[(0.0, 0.0), (1.0, 0.0), (-0.5, 1.5)] {
            match toy_heat_grid(x2, x1, nu, t, 5e-4) {
                Ok(g) => worst_grid = worst_grid.max(g.rel_err),
                Err(e) => b.error("grid", e),
            }
            let scaled =
                (2.0 * std::f64::consts::PI * nu * t).sqrt() * toy_heat(x2, x1, nu, t).unwrap_or(f64::NAN);
            let sc = toy_selfconsistent(x2, x1, nu, t).unwrap_or(f64::NAN);
            let gauss = (-(x2 - x1) * (x2 - x1) / (2.0 * nu * t)).exp();
            worst_route = worst_route.max((scaled - sc).abs());
            worst_limit = worst_limit.max((scaled - gauss).abs().max((sc - gauss).abs()));
        }
    }
    b.check(
        "grid vs Gaussian to 1e-6",
        worst_grid <= 1e-6,
        format!("max rel err {worst_grid:.2e}"),
    );
    b.check(
        "routes agree to 1e-12",
        worst_route <= 1e-12,
        format!("max |Δ| = {worst_route:.2e}"),
    );
    b.check(
        "limit e^{-Δx²/(2νT)}",
        worst_limit <= 1e-12,
        format!("max |Δ| = {worst_limit:.2e}"),
    );
    b.finish()
}

pub fn projection_limit(o: Options) -> CriterionReport {
    let mut b = Builder::new(7, "projection limit (grid route)");
    for (beta, tol, spec) in [(1.0, 0.02, wide_grid(o.quick)), (0.4, 0.05, GridSpec::default())] {
        let t = semigroup_t(beta);
        match projection_limits(&route_pairs(), beta, &NU_SCHEDULE, t, spec) {
            Ok(limits) => {
                for ((x, y), l) in route_pairs().iter().zip(&limits) {
                    let exact = kernel(x, y, beta);
                    let r = rel(l.extrapolated, exact);
                    b.check(
                        format!("β = {beta}, ⟨{x}|{y}⟩"),
                        r <= tol && l.flagged.is_none(),
                        format!(
                            "{:.5} vs {exact:.5}, rel {r:.2e} (tol {tol}), flag {:?}",
                            l.extrapolated, l.flagged
                        ),
                    );
                }
                if beta == 1.0 {
                    // Both sides carry the same e^{νT/2}, so compare the prefactors.
                    let want = 2.0 * std::f64::consts::PI * (1.0 - 0.5 / beta);
                    let ratios: Vec<f64> = limits[0].knu.iter().map(|k| k / want).collect();
                    let ok = ratios.iter().all(|r| (r - 1.0).abs() <= 0.05);
                    b.check(
                        "K_ν tracks π e^{νT/2}",
                        ok,
                        format!("K_ν / π per ν: {ratios:.3?}"),
                    );
                }
            }
            Err(e) => b.error(format!("β = {beta}"), e),
        }
    }
    b.runtime(900.0);
    b.finish()
}

fn mc_curve(
    x: &PhasePoint,
    y: &PhasePoint,
    beta: f64,
    n: usize,
    seed: u64,
) -> crate::Result<Vec<McEstimate>> {
    NU_SCHEDULE
        .iter()
        .map(|&nu| {
            let cfg = McConfig {
                beta,
                nu,
                t: MC_T,
                n_steps: None,
                n_samples: n,
                seed,
            };
            propagator_mc(x, y, &cfg, None)
        })
        .collect()
}

pub fn monte_carlo(o: Options) -> CriterionReport {
    let mut b = Builder::new(8, "Monte Carlo route");
    let n = mc_samples(o.quick);
    for beta in [0.4, 1.0] {
        for (i, (x, y)) in route_pairs().iter().enumerate() {
            let name = format!("β = {beta}, ⟨{x}|{y}⟩");
            match mc_curve(x, y, beta, n, 100 + i as u64).and_then(|c| extrapolate_nu(&c)) {
                Ok(e) => {
                    let exact = kernel(x, y, beta);
                    let r = rel(e.value, exact);
                    b.check(
                        name,
                        r <= 0.1,
                        format!("{:.5} ± {:.4} vs {exact:.5}, rel {r:.3}", e.value, e.error),
                    );
                }
                Err(e) => b.error(name, e),
            }
        }
    }
    let (x, y) = (pt(0.0, 1.0), pt(0.5, 1.5));
    let cfg = McConfig {
        beta: 0.7,
        nu: 4.0,
        t: MC_T,
        n_steps: None,
        n_samples: 10_000,
        seed: 9,
    };
    let k = 1.3;
    match (
        propagator_mc(&x, &y, &cfg, None),
        propagator_mc(&x, &y, &cfg, Some(&|_, _| k)),
    ) {
        (Ok(plain), Ok(with_h)) => {
            let d = (with_h.value - plain.value * Complex64::from_polar(1.0, -k * cfg.t)).norm();
            b.check("constant-h factorization", d <= 1e-12, format!("|Δ| = {d:.2e}"));
        }
        (Err(e), _) | (_, Err(e)) => b.error("constant-h factorization", e),
    }
    b.finish()
}

pub fn dynamics(_: Options) -> CriterionReport {
    let mut b = Builder::new(9, "affine dynamics");
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut low_beta = 0;
    for i in 0..20 {
        let beta = if i % 3 == 0 {
            rng.random_range(0.3..0.5)
        } else {
            rng.random_range(0.5..3.0)
        };
        if beta <= 0.5 {
            low_beta += 1;
        }
        let h = AffineHamiltonian {
            r: rng.random_range(-1.0..1.0),
            s: rng.random_range(-1.0..1.0),
        };
        let t = rng.random_range(0.1..2.0);
        let a = pt(rng.random_range(-1.0..1.0), rng.random_range(-0.5f64..0.5).exp());
        let c = pt(rng.random_range(-1.0..1.0), rng.random_range(-0.5f64..0.5).exp());
        match (
            propagator_affine(&a, &c, &h, t, beta),
            propagator_affine_quadrature(&a, &c, &h, t, beta),
        ) {
            (Ok(x), Ok(y)) => worst = worst.max((x - y).norm()),
            (Err(e), _) | (_, Err(e)) => b.error(format!("case {i}"), e),
        }
    }
    b.check(
        "label flow vs quadrature to 1e-7",
        worst <= 1e-7 && low_beta > 0,
        format!("max |Δ| = {worst:.2e} over 20 cases ({low_beta} with β ≤ 1/2)"),
    );
    let (a, c) = (pt(0.2, 1.1), pt(-0.3, 0.9));
    let mut jump: f64 = 0.0;
    for r in [-0.7, 0.4] {
        let at0 = propagator_affine(&a, &c, &AffineHamiltonian { r, s: 0.0 }, 1.3, 0.8).unwrap_or_default();
        for s in [1e-12, -1e-12, 1e-14] {
            let v = propagator_affine(&a, &c, &AffineHamiltonian { r, s }, 1.3, 0.8).unwrap_or_default();
            jump = jump.max((v - at0).norm());
        }
    }
    b.check("S → 0 continuity", jump <= 1e-10, format!("max |Δ| = {jump:.2e}"));
    let flows = [
        TimeDependentAffine::new(|t| t.cos(), |t| 0.5 * (2.0 * t).sin()),
        TimeDependentAffine::new(|t| 1.0 - t * t, |t| 0.3 + 0.2 * t),
    ];
    let mut worst_flow: f64 = 0.0;
    for f in &flows {
        match time_ordered_flow(f, 1.5) {
            Ok(h) => {
                let g = exp_affine(&h, 1.5);
                let prod = ordered_product(f, 1.5, 20_000);
                worst_flow = worst_flow.max((g.p - prod.p).abs().max((g.q - prod.q).abs()));
            }
            Err(e) => b.error("time-ordered flow", e),
        }
    }
    b.check(
        "time-ordered flow vs ordered product to 1e-6",
        worst_flow <= 1e-6,
        format!("max |Δ| = {worst_flow:.2e}"),
    );
    b.finish()
}

pub fn symbols(o: Options) -> CriterionReport {
    let mut b = Builder::new(10, "symbol consistency");
    let mut worst: f64 = 0.0;
    for at in [pt(3.0, 2.0), pt(-0.7, 1.6), pt(0.0, 0.3)] {
        for beta in [0.4, 1.0, 2.0] {
            for (op, want) in [(SymbolOp::Q, at.q), (SymbolOp::D, at.p * at.q)] {
                let c = lower_symbol(op, &at, beta).unwrap_or(f64::NAN);
                let q = lower_symbol_quadrature(op, &at, beta).unwrap_or(f64::NAN);
                let d = (c - want).abs().max((q - want).abs());
                worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
            }
        }
    }
    b.check(
        "lower symbols Q → q, D → pq to 1e-8",
        worst <= 1e-8,
        format!("max |Δ| = {worst:.2e}"),
    );
    for (name, h) in [
        ("Q", AffineHamiltonian { r: 1.0, s: 0.0 }),
        ("D", AffineHamiltonian { r: 0.0, s: 1.0 }),
    ] {
        match weak_symbol_check(&h, 1.0, &default_symbol_pairs()) {
            Ok(r) => b.check(
                format!("weak symbol for {name} at β = 1"),
                r.residual < 1e-3,
                format!(
                    "c_R = {:.6}, c_S = {:.6}, residual {:.2e}",
                    r.c_r, r.c_s, r.residual
                ),
            ),
            Err(e) => b.error(format!("weak symbol for {name} at β = 1"), e),
        }
    }

    let n = if o.quick { 20_000 } else { 100_000 };
    let a = pt(0.3, 1.0);
    let insertion = |s: f64, nu: f64, seed: u64| {
        let cfg = McConfig {
            beta: 1.0,
            nu,
            t: MC_T,
            n_steps: None,
            n_samples: n,
            seed,
        };
        symbol_insertion_mc(&a, &a, &cfg, &|_, q| q, s)
    };
    let curve: crate::Result<Vec<McEstimate>> = NU_SCHEDULE
        .iter()
        .map(|&nu| insertion(0.5 * MC_T, nu, 21))
        .collect();
    let detail = curve
        .as_ref()
        .map(|c| {
            c.iter()
                .map(|e| format!("ν={} {:.4}", e.nu, e.value.re))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .unwrap_or_default();
    match curve.and_then(|c| extrapolate_nu(&c)) {
        Ok(e) => {
            let r = (e.value - a.q).norm() / a.q;
            b.check(
                "MC insertion ⟨Q⟩ = q₀",
                r <= 0.1,
                format!(
                    "{:.4} ± {:.4} vs {}, rel {r:.3} ({detail})",
                    e.value, e.error, a.q
                ),
            );
        }
        Err(e) => b.check("MC insertion ⟨Q⟩ = q₀", false, format!("error: {e} ({detail})")),
    }
    let nu = *NU_SCHEDULE.last().expect("nonempty");
    let at: crate::Result<Vec<McEstimate>> = [0.25, 0.5, 0.75]
        .iter()
        .enumerate()
        .map(|(i, f)| insertion(f * MC_T, nu, 31 + i as u64))
        .collect();
    match at {
        Ok(v) => {
            let mut worst: f64 = 0.0;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    let sigma = v[i].stderr.hypot(v[j].stderr);
                    worst = worst.max((v[i].value - v[j].value).norm() / sigma);
                }
            }
            let vals: Vec<String> = v
                .iter()
                .map(|e| format!("{:.4} ± {:.4}", e.value, e.stderr))
                .collect();
            b.check(
                "insertion time independence",
                worst <= 2.0,
                format!("max {worst:.2}σ at ν = {nu}: {vals:?}"),
            );
        }
        Err(e) => b.error("insertion time independence", e),
    }
    b.finish()
}

pub fn concordance(o: Options) -> CriterionReport {
    let mut b = Builder::new(11, "three-route concordance");
    let beta = 1.0;
    let pairs = concordance_pairs();
    let grid = match projection_limits(&pairs, beta, &NU_SCHEDULE, semigroup_t(beta), wide_grid(o.quick)) {
        Ok(v) => v,
        Err(e) => {
            b.error("grid route", e);
            return b.finish();
        }
    };
    let n = mc_samples(o.quick);
    for (i, ((x, y), g)) in pairs.iter().zip(&grid).enumerate() {
        let name = format!("⟨{x}|{y}⟩");
        let closed = match overlap_closed(x, y, beta) {
            Ok(k) => k.value,
            Err(e) => {
                b.error(name, e);
                continue;
            }
        };
        let mc = match mc_curve(x, y, beta, n, 200 + i as u64).and_then(|c| extrapolate_nu(&c)) {
            Ok(e) => e.value,
            Err(e) => {
                b.error(name, e);
                continue;
            }
        };
        let (d_cg, d_cm, d_gm) = (
            rel(g.extrapolated, closed),
            rel(mc, closed),
            (g.extrapolated - mc).norm() / closed.norm(),
        );
        b.check(
            name,
            d_cg <= 0.02 && d_cm <= 0.1 && d_gm <= 0.12,
            format!("closed {closed:.5}, grid {:.5}, mc {mc:.5}; rel closed-grid {d_cg:.3}, closed-mc {d_cm:.3}, grid-mc {d_gm:.3}", g.extrapolated),
        );
    }
    b.finish()
}

/// Every criterion in order.
pub fn run_all(o: Options) -> Vec<CriterionReport> {
    vec![
        kernel_exactness(o),
        admissibility(o),
        resolution_of_unity(o),
        positive_definiteness(o),
        polarization(o),
        toy_model(o),
        projection_limit(o),
        monte_carlo(o),
        dynamics(o),
        symbols(o),
        concordance(o),
    ]
}
