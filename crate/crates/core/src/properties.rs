//! Property tests for invariants that cut across modules.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    exp_affine, flow_labels, group_compose, lower_symbol, propagator_affine, AffineHamiltonian, GroupElement,
    SymbolOp,
};
use crate::fiducial::{
    is_admissible, moment, moment_gamma_ratio, moment_quadrature, uncertainty_product, FiducialSpec,
    MomentValue,
};
use crate::kernel::{kernel, overlap_closed, PhasePoint};
use crate::pathmc::{sample_bridge, stratonovich_phase, PathLattice};
use crate::rkhs::{inner_product, norm_sqr, SpanElement};

fn point() -> impl Strategy<Value = PhasePoint> {
    (-5.0..5.0f64, -2.0..2.0f64).prop_map(|(p, u)| PhasePoint { p, q: u.exp() })
}

fn beta() -> impl Strategy<Value = f64> {
    0.2..4.0f64
}

fn group() -> impl Strategy<Value = GroupElement> {
    (-3.0..3.0f64, -1.5..1.5f64).prop_map(|(p, u)| GroupElement { p, q: u.exp() })
}

fn close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
    (a.p - b.p).abs() <= tol * (1.0 + a.p.abs()) && (a.q - b.q).abs() <= tol * a.q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fiducial_normalized_and_moments_agree(alpha in -0.45..3.0f64, beta in 0.2..4.0f64) {
        let spec = FiducialSpec::new(alpha, beta).unwrap();
        let norm = moment_quadrature(0, &spec).unwrap().finite().unwrap();
        prop_assert!((norm - 1.0).abs() < 1e-10, "norm {norm}");
        for k in -2..=3 {
            match (moment_gamma_ratio(k, &spec), moment_quadrature(k, &spec).unwrap()) {
                (MomentValue::Finite(g), MomentValue::Finite(q)) => prop_assert!((g - q).abs() <= 1e-8 * g, "k={k}: {g} vs {q}"),
                (g, q) => prop_assert_eq!(g.is_finite(), q.is_finite()),
            }
        }
    }

    #[test]
    fn minimum_uncertainty(alpha in -0.45..3.0f64, beta in 0.2..4.0f64) {
        let spec = FiducialSpec::new(alpha, beta).unwrap();
        let mean = moment(1, &spec).unwrap().value.finite().unwrap();
        prop_assert!((uncertainty_product(&spec) - 0.5 * mean).abs() < 1e-8);
    }

    #[test]
    fn admissibility_flips_at_one_half(beta in 0.01..4.0f64) {
        let spec = FiducialSpec::unit_mean(beta).unwrap();
        prop_assert_eq!(is_admissible(&spec), beta > 0.5);
    }

    #[test]
    fn kernel_hermitian_and_bounded(a in point(), b in point(), beta in beta()) {
        let ab = overlap_closed(&a, &b, beta).unwrap().value;
        let ba = overlap_closed(&b, &a, beta).unwrap().value;
        prop_assert_eq!(ab, ba.conj());
        prop_assert!(ab.norm() <= 1.0 + 1e-15);
        prop_assert!((kernel(&a, &a, beta) - 1.0).norm() < 1e-14);
    }

    /// `(qs)^β⟨p,q|r,s⟩` is holomorphic in `z = q⁻¹ + iβ⁻¹p` for fixed `(r, s)`.
    #[test]
    fn kernel_analytic_in_left_label(a in point(), b in point(), beta in beta()) {
        let f = |x: f64, y: f64| {
            let at = PhasePoint { p: beta * y, q: 1.0 / x };
            kernel(&at, &b, beta) * (at.q * b.q).powf(beta)
        };
        let (x, y) = (1.0 / a.q, a.p / beta);
        let h = 1e-4 * x;
        let dx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let dy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        let dzbar = 0.5 * (dx + Complex64::i() * dy);
        let scale = dx.norm().max(dy.norm()).max(1e-300);
        prop_assert!(dzbar.norm() <= 1e-5 * scale, "∂z̄ {dzbar} vs {scale}");
    }

    #[test]
    fn reproducing_property_and_positivity(
        pts in prop::collection::vec(point(), 1..8),
        re in prop::collection::vec(-1.0..1.0f64, 8),
        im in prop::collection::vec(-1.0..1.0f64, 8),
        at in point(),
        beta in beta(),
    ) {
        let coeffs: Vec<Complex64> = pts.iter().enumerate().map(|(i, _)| Complex64::new(re[i], im[i])).collect();
        let e = SpanElement::new(beta, coeffs, pts).unwrap();
        let probe = SpanElement::kernel_at(beta, at).unwrap();
        let v = inner_product(&probe, &e).unwrap();
        prop_assert!((v - e.eval(&at)).norm() <= 1e-12 * e.sup_bound().max(1.0));
        prop_assert!(norm_sqr(&e) >= -1e-10);
        prop_assert!(e.eval(&at).norm() <= e.sup_bound() * (1.0 + 1e-12));
    }

    #[test]
    fn group_axioms(g1 in group(), g2 in group(), g3 in group()) {
        let left = group_compose(&group_compose(&g1, &g2), &g3);
        let right = group_compose(&g1, &group_compose(&g2, &g3));
        prop_assert!(close(&left, &right, 1e-12));
        prop_assert!(close(&group_compose(&g1, &GroupElement::IDENTITY), &g1, 1e-12));
        prop_assert!(close(&group_compose(&g1, &g1.inverse()), &GroupElement::IDENTITY, 1e-12));
        let m = GroupElement::from_matrix(&(g1.to_matrix() * g2.to_matrix()));
        prop_assert!(close(&m, &group_compose(&g1, &g2), 1e-12));
    }

    #[test]
    fn one_parameter_subgroup(r in -1.0..1.0f64, s in -1.0..1.0f64, t1 in 0.0..2.0f64, t2 in 0.0..2.0f64) {
        let h = AffineHamiltonian { r, s };
        let both = group_compose(&exp_affine(&h, t1), &exp_affine(&h, t2));
        prop_assert!(close(&both, &exp_affine(&h, t1 + t2), 1e-12));
    }

    #[test]
    fn propagator_bounded_and_composes(
        a in point(), b in point(), beta in beta(),
        r in -1.0..1.0f64, s in -1.0..1.0f64, t1 in 0.0..2.0f64, t2 in 0.0..2.0f64,
    ) {
        let h = AffineHamiltonian { r, s };
        prop_assert!(propagator_affine(&a, &b, &h, t1, beta).unwrap().norm() <= 1.0 + 1e-14);
        let stepwise = flow_labels(&flow_labels(&a, &h, t1), &h, t2);
        let direct = flow_labels(&a, &h, t1 + t2);
        prop_assert!((stepwise.p - direct.p).abs() <= 1e-11 * (1.0 + direct.p.abs()));
        prop_assert!((stepwise.q - direct.q).abs() <= 1e-12 * direct.q);
    }

    #[test]
    fn lower_symbols_of_generators(a in point(), beta in beta()) {
        prop_assert!((lower_symbol(SymbolOp::Q, &a, beta).unwrap() - a.q).abs() <= 1e-14 * a.q);
        prop_assert!((lower_symbol(SymbolOp::D, &a, beta).unwrap() - a.p * a.q).abs() <= 1e-14 * (a.p * a.q).abs().max(1e-300));
    }

    /// Midpoint phase of a closed polygon is its signed area in the (p, q) plane.
    #[test]
    fn phase_of_closed_polygon_is_area(verts in prop::collection::vec((-3.0..3.0f64, 0.1..3.0f64), 3..12)) {
        let mut p: Vec<f64> = verts.iter().map(|v| v.0).collect();
        let mut q: Vec<f64> = verts.iter().map(|v| v.1).collect();
        p.push(p[0]);
        q.push(q[0]);
        let area: f64 = 0.5 * (0..verts.len()).map(|i| p[i] * q[i + 1] - p[i + 1] * q[i]).sum::<f64>();
        let path = PathLattice { times: (0..p.len()).map(|i| i as f64).collect(), p, q, nu: 1.0, beta: 1.0 };
        // −∮q dp equals the counter-clockwise area in the (p, q) plane.
        prop_assert!((stratonovich_phase(&path) - area).abs() <= 1e-12 * (1.0 + area.abs()));
    }

    #[test]
    fn bridges_pinned_with_positive_q(a in point(), b in point(), beta in 0.2..2.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (path, lw) = sample_bridge(&b, &a, beta, 4.0, 0.5, 32, &mut rng).unwrap();
        prop_assert_eq!(path.p[0], b.p);
        prop_assert_eq!(path.q[0], b.q);
        prop_assert_eq!(path.p[32], a.p);
        prop_assert!((path.q[32] - a.q).abs() <= 1e-14 * a.q);
        prop_assert!(path.q.iter().all(|&q| q > 0.0));
        prop_assert!(lw.is_finite());
    }
}
