use std::fmt::Write;
use std::str::FromStr;

use anyhow::Result;
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use wcs_core::acceptance::{self, CriterionReport, Options};
use wcs_core::dynamics::{
    default_symbol_pairs, exp_affine, flow_labels, lower_symbol, lower_symbol_quadrature, ordered_product,
    propagator_affine, propagator_affine_quadrature, time_ordered_flow, weak_symbol_check, AffineHamiltonian,
    SymbolOp, TimeDependentAffine,
};
use wcs_core::fiducial::{
    is_admissible, moment_gamma_ratio, moment_quadrature, spreads, uncertainty_product, FiducialSpec,
};
use wcs_core::kernel::{
    gram, hermitian_eigenvalues, kernel, overlap_closed, overlap_quadrature, resolution_check_with,
    ResolutionOptions,
};
use wcs_core::pathmc::{
    extrapolate_nu, propagator_mc, symbol_insertion_mc, write_convergence_csv, McConfig, McEstimate, McRecord,
};
use wcs_core::rkhs::{polarization_order, polarization_residual, polarization_residual_with, SpanElement};
use wcs_core::semigroup::{
    build_a, evolve, knu, projection_limit, toy_heat, toy_heat_grid, toy_selfconsistent, GridField, GridSpec,
    DELTA_WIDTH_CELLS,
};
use wcs_core::{Complex64, PhasePoint};

use crate::svg::{self, Series};
use crate::{usage, Output};

/// A label `p,q` with `q > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point(pub PhasePoint);

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (p, q) = s
            .split_once(',')
            .ok_or_else(|| format!("expected p,q, got {s:?}"))?;
        let p: f64 = p.trim().parse().map_err(|e| format!("bad p in {s:?}: {e}"))?;
        let q: f64 = q.trim().parse().map_err(|e| format!("bad q in {s:?}: {e}"))?;
        PhasePoint::new(p, q).map(Point).map_err(|e| e.to_string())
    }
}

fn c(v: Complex64) -> serde_json::Value {
    json!({ "re": v.re, "im": v.im })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FiducialArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Defaults to the unit-mean member `α = β − 1/2`.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-2,-1,0,1,2"
    )]
    pub orders: Vec<i32>,
}

pub fn fiducial(a: &FiducialArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    let spec = FiducialSpec::new(a.alpha.unwrap_or(a.beta - 0.5), a.beta)?;
    let moments = a
        .orders
        .iter()
        .map(|&k| {
            Ok(json!({
                "order": k,
                "gamma_ratio": moment_gamma_ratio(k, &spec),
                "quadrature": moment_quadrature(k, &spec)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Output::new(json!({
        "spec": spec,
        "admissible": is_admissible(&spec),
        "moments": moments,
        "spreads": spreads(&spec),
        "uncertainty_product": uncertainty_product(&spec),
    })))
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Point,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Point,
    /// Also evaluate the x-representation integral.
    #[arg(long)]
    pub quadrature: bool,
}

pub fn kernel_cmd(a: &KernelArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    let v = overlap_closed(&a.a.0, &a.b.0, a.beta)?.value;
    let mut r = json!({ "re": v.re, "im": v.im, "abs": v.norm() });
    if a.quadrature {
        let q = overlap_quadrature(&a.a.0, &a.b.0, &FiducialSpec::unit_mean(a.beta)?)?;
        r["quadrature"] = json!({ "re": q.re, "im": q.im, "abs_diff": (q - v).norm() });
    }
    Ok(Output::new(r))
}

#[derive(Debug, Args, Serialize)]
pub struct GramArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Labels as `p,q;p,q;...`.
    #[arg(
        long,
        value_delimiter = ';',
        allow_hyphen_values = true,
        conflicts_with = "random"
    )]
    pub points: Vec<Point>,
    /// Draw this many labels with `p ~ U[−5,5]`, `ln q ~ U[−2,2]`.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn gram_cmd(a: &GramArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    let pts: Vec<PhasePoint> = match a.random {
        Some(n) => {
            // Deterministic splitmix sequence; enough for picking test points.
            let mut s = a.seed;
            let mut next = || {
                s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
                let mut z = s;
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
                ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
            };
            (0..n)
                .map(|_| PhasePoint {
                    p: 10.0 * next() - 5.0,
                    q: (4.0 * next() - 2.0).exp(),
                })
                .collect()
        }
        None => a.points.iter().map(|p| p.0).collect(),
    };
    if pts.is_empty() {
        return Err(usage("give --points or --random"));
    }
    let g = gram(&pts, a.beta)?;
    let eig = hermitian_eigenvalues(&g);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Output::new(json!({
        "n": pts.len(),
        "points": pts,
        "eigenvalues": eig,
        "min_eigenvalue": min,
        "positive_semidefinite": min >= -1e-10,
    })))
}

#[derive(Debug, Args, Serialize)]
pub struct ResolutionArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub a: Point,
    #[arg(long, allow_hyphen_values = true, default_value = "0.5,1.5")]
    pub b: Point,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 60)]
    pub doublings: usize,
    /// Keep the full cutoff trace (JSON and CSV).
    #[arg(long)]
    pub diverge_scan: bool,
}

pub fn resolution(a: &ResolutionArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    positive("tol", a.tol)?;
    if a.doublings < 4 {
        return Err(usage("--doublings must be at least 4"));
    }
    let opts = ResolutionOptions {
        doublings: a.doublings,
        ..ResolutionOptions::default()
    };
    let r = resolution_check_with(&a.a.0, &a.b.0, a.beta, a.tol, &opts)?;
    let mut result = json!({
        "verdict": r.verdict,
        "residual": if r.residual.is_finite() { json!(r.residual) } else { json!(null) },
        "lhs": c(r.lhs),
        "rhs": c(r.rhs),
        "implied_constant": c(r.implied_constant),
        "tail_exponent": r.tail_exponent,
    });
    if a.beta <= 0.5 {
        result["expected_exponent"] = json!(1.0 - 2.0 * a.beta);
    }
    let mut out;
    if a.diverge_scan {
        result["cutoff_trace"] = json!(r
            .cutoff_trace
            .iter()
            .map(|(s, v)| json!({ "s": s, "re": v.re, "im": v.im }))
            .collect::<Vec<_>>());
        out = Output::new(result);
        let mut csv = String::from("s,re,im\n");
        for (s, v) in &r.cutoff_trace {
            let _ = writeln!(csv, "{s},{},{}", v.re, v.im);
        }
        out.csv = Some(csv);
    } else {
        out = Output::new(result);
    }
    let incr: Vec<(f64, f64)> = r
        .cutoff_trace
        .windows(2)
        .map(|w| (w[1].0.ln(), (w[1].1 - w[0].1).norm().ln()))
        .collect();
    out.svg = Some(svg::line_plot(
        &format!("cutoff increments, β = {}", a.beta),
        "ln S",
        "ln |increment|",
        &[Series {
            label: "increment".into(),
            points: incr,
        }],
    ));
    Ok(out)
}

#[derive(Debug, Args, Serialize)]
pub struct PolarizeArgs {
    /// `β` of the kernel section.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub center: Point,
    #[arg(long, allow_hyphen_values = true, default_value = "0.3,1.7")]
    pub at: Point,
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    /// `β` of the polarization operator; defaults to the kernel's.
    #[arg(long, allow_hyphen_values = true)]
    pub operator_beta: Option<f64>,
}

pub fn polarize(a: &PolarizeArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    positive("h", a.h)?;
    let e = SpanElement::kernel_at(a.beta, a.center.0)?;
    let op = a.operator_beta.unwrap_or(a.beta);
    positive("operator-beta", op)?;
    let r = if op == a.beta {
        polarization_residual(&e, &a.at.0, a.h)?
    } else {
        polarization_residual_with(|x| e.eval(x), op, &a.at.0, a.h)?
    };
    let mut result = json!({ "residual": c(r.value), "abs": r.value.norm(), "operator_beta": op });
    if op == a.beta {
        result["order"] = json!(polarization_order(&e, &a.at.0, 50.0 * a.h)?);
    }
    Ok(Output::new(result))
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// The `p` range is `[−p_half, p_half]`, periodic.
    #[arg(long, default_value_t = 15.0)]
    pub p_half: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -5.0)]
    pub u_min: f64,
    #[arg(long, default_value_t = 15.0)]
    pub u_max: f64,
    #[arg(long, default_value_t = 300)]
    pub n_p: usize,
    #[arg(long, default_value_t = 321)]
    pub n_u: usize,
    /// Largest time step in units of `1/ν`.
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
}

impl GridArgs {
    pub fn spec(&self) -> Result<GridSpec> {
        let s = GridSpec {
            p_min: -self.p_half,
            p_max: self.p_half,
            u_min: self.u_min,
            u_max: self.u_max,
            n_p: self.n_p,
            n_u: self.n_u,
            dt: self.dt,
            ..GridSpec::default()
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemigroupMode {
    /// Evolve the delta at `b` once and read it at `a`.
    Evolve,
    /// `K_ν` from the reference evolution.
    Knu,
    /// Rescaled values over `--nus` and their `1/ν` extrapolation.
    Limit,
}

#[derive(Debug, Args, Serialize)]
pub struct SemigroupArgs {
    #[arg(long, value_enum, default_value = "limit")]
    pub mode: SemigroupMode,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub a: Point,
    #[arg(long, allow_hyphen_values = true, default_value = "0,2")]
    pub b: Point,
    #[arg(long, allow_hyphen_values = true, default_value_t = 4.0)]
    pub nu: f64,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub nus: Vec<f64>,
    #[arg(long = "T", default_value_t = 25.0)]
    pub t: f64,
    #[command(flatten)]
    pub grid: GridArgs,
}

pub fn semigroup(a: &SemigroupArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    positive("T", a.t)?;
    let spec = a.grid.spec()?;
    match a.mode {
        SemigroupMode::Knu => {
            positive("nu", a.nu)?;
            Ok(Output::new(json!({ "knu": knu(a.beta, a.nu, a.t, spec)? })))
        }
        SemigroupMode::Evolve => {
            positive("nu", a.nu)?;
            spec.check_contains(&a.a.0, 5.0)?;
            let op = build_a(a.beta, spec)?;
            let ev = evolve(
                &GridField::delta(spec, &a.b.0, DELTA_WIDTH_CELLS)?,
                &op,
                a.nu,
                a.t,
            )?;
            let k = knu(a.beta, a.nu, a.t, spec)?;
            let raw = ev.field.interpolate(&a.a.0);
            let mut out = Output::new(json!({
                "raw": c(raw),
                "knu": k,
                "rescaled": c(raw * k),
                "closed_form": c(kernel(&a.a.0, &a.b.0, a.beta)),
                "steps": ev.steps,
                "boundary_ratio": ev.boundary_ratio,
                "warning": ev.warning,
            }));
            let mut csv = Vec::new();
            ev.field.write_csv(&mut csv)?;
            out.csv = Some(String::from_utf8(csv).expect("csv is utf-8"));
            let re: Vec<f64> = ev.field.values.iter().map(|v| v.re).collect();
            let (nx, ny, d) = svg::downsample(spec.n_p, spec.n_u, &re, 100);
            out.svg = Some(svg::heatmap(
                &format!("Re e^(-νTA)δ, ν = {}, T = {}", a.nu, a.t),
                nx,
                ny,
                &d,
            ));
            Ok(out)
        }
        SemigroupMode::Limit => {
            let l = projection_limit(&a.a.0, &a.b.0, a.beta, &a.nus, a.t, spec)?;
            let exact = kernel(&a.a.0, &a.b.0, a.beta);
            let rescaled = l.rescaled();
            let mut csv = String::from("nu,re,im,knu\n");
            for ((nu, v), k) in l.nu_schedule.iter().zip(&rescaled).zip(&l.knu) {
                let _ = writeln!(csv, "{nu},{},{},{k}", v.re, v.im);
            }
            let series = vec![
                Series {
                    label: "Re".into(),
                    points: l
                        .nu_schedule
                        .iter()
                        .zip(&rescaled)
                        .map(|(n, v)| (1.0 / n, v.re))
                        .collect(),
                },
                Series {
                    label: "Im".into(),
                    points: l
                        .nu_schedule
                        .iter()
                        .zip(&rescaled)
                        .map(|(n, v)| (1.0 / n, v.im))
                        .collect(),
                },
            ];
            let mut out = Output::new(json!({
                "limit": l,
                "rescaled": rescaled.iter().map(|v| c(*v)).collect::<Vec<_>>(),
                "closed_form": c(exact),
                "relative_error": (l.extrapolated - exact).norm() / exact.norm(),
            }));
            out.csv = Some(csv);
            out.svg = Some(svg::line_plot(
                "rescaled grid values",
                "1/ν",
                "K_ν e^(-νTA)δ",
                &series,
            ));
            Ok(out)
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ToyArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 4.0)]
    pub nu: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub dx: f64,
    /// Also run the grid route with this mesh.
    #[arg(long)]
    pub mesh: Option<f64>,
}

pub fn toy(a: &ToyArgs) -> Result<Output> {
    positive("nu", a.nu)?;
    positive("T", a.t)?;
    let scale = (2.0 * std::f64::consts::PI * a.nu * a.t).sqrt();
    let mut r = json!({
        "rescaled": scale * toy_heat(a.dx, 0.0, a.nu, a.t)?,
        "selfconsistent": toy_selfconsistent(a.dx, 0.0, a.nu, a.t)?,
        "closed_form": (-a.dx * a.dx / (2.0 * a.nu * a.t)).exp(),
    });
    if let Some(h) = a.mesh {
        positive("mesh", h)?;
        r["grid"] = json!(toy_heat_grid(a.dx, 0.0, a.nu, a.t, h)?);
    }
    Ok(Output::new(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum McMode {
    /// Self-normalized `⟨a|e^{-iTℋ}|b⟩`.
    Propagator,
    /// Self-normalized insertion of `h` at time `s`.
    #[value(alias = "symbol-insertion")]
    Insertion,
}

/// Real symbols accepted by `--h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Symbol {
    Q,
    Pq,
    P,
    Const(f64),
}

impl FromStr for Symbol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "q" => Ok(Symbol::Q),
            "pq" => Ok(Symbol::Pq),
            "p" => Ok(Symbol::P),
            _ => s
                .strip_prefix("const:")
                .and_then(|k| k.parse().ok())
                .map(Symbol::Const)
                .ok_or_else(|| format!("unknown symbol {s:?}; use q, pq, p or const:<k>")),
        }
    }
}

impl Symbol {
    fn eval(self, p: f64, q: f64) -> f64 {
        match self {
            Symbol::Q => q,
            Symbol::Pq => p * q,
            Symbol::P => p,
            Symbol::Const(k) => k,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct McArgs {
    #[arg(long, value_enum, default_value = "propagator")]
    pub mode: McMode,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub a: Point,
    #[arg(long, allow_hyphen_values = true, default_value = "0,2")]
    pub b: Point,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub nus: Vec<f64>,
    #[arg(long = "T", default_value_t = 0.5)]
    pub t: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Time slices; defaults to the smallest count with `δν ≤ 1/16`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Hamiltonian symbol (`propagator`) or inserted symbol (`insertion`).
    #[arg(long)]
    pub h: Option<Symbol>,
    /// Insertion time; defaults to `T/2`.
    #[arg(long)]
    pub s: Option<f64>,
}

pub fn mc(a: &McArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    positive("T", a.t)?;
    if a.samples < 2 {
        return Err(usage("--samples must be at least 2"));
    }
    let configs: Vec<McConfig> = a
        .nus
        .iter()
        .map(|&nu| McConfig {
            beta: a.beta,
            nu,
            t: a.t,
            n_steps: a.steps,
            n_samples: a.samples,
            seed: a.seed,
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let (x, y) = (a.a.0, a.b.0);
    let estimates: Vec<McEstimate> = match a.mode {
        McMode::Propagator => {
            let h = a.h.map(|s| move |p: f64, q: f64| s.eval(p, q));
            configs
                .iter()
                .map(|cfg| match &h {
                    Some(f) => propagator_mc(&x, &y, cfg, Some(f)),
                    None => propagator_mc(&x, &y, cfg, None),
                })
                .collect::<wcs_core::Result<_>>()?
        }
        McMode::Insertion => {
            let sym = a.h.ok_or_else(|| usage("insertion mode needs --h"))?;
            let s = a.s.unwrap_or(0.5 * a.t);
            configs
                .iter()
                .map(|cfg| symbol_insertion_mc(&x, &y, cfg, &|p, q| sym.eval(p, q), s))
                .collect::<wcs_core::Result<_>>()?
        }
    };
    let records: Vec<McRecord> = configs
        .iter()
        .zip(&estimates)
        .map(|(cfg, e)| McRecord::new(&x, &y, cfg, e))
        .collect();
    let mut result = json!({ "records": records });
    if estimates.len() >= 3 {
        let e = extrapolate_nu(&estimates)?;
        result["extrapolated"] =
            json!({ "re": e.value.re, "im": e.value.im, "error": e.error, "chi2_per_dof": e.chi2_per_dof });
    }
    if a.mode == McMode::Propagator && a.h.is_none() {
        result["closed_form"] = c(kernel(&x, &y, a.beta));
    }
    let mut out = Output::new(result);
    let mut csv = Vec::new();
    write_convergence_csv(&estimates, &mut csv)?;
    out.csv = Some(String::from_utf8(csv).expect("csv is utf-8"));
    let series = vec![
        Series {
            label: "Re".into(),
            points: estimates.iter().map(|e| (1.0 / e.nu, e.value.re)).collect(),
        },
        Series {
            label: "Im".into(),
            points: estimates.iter().map(|e| (1.0 / e.nu, e.value.im)).collect(),
        },
    ];
    out.svg = Some(svg::line_plot(
        "Monte Carlo estimates",
        "1/ν",
        "estimate",
        &series,
    ));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsMode {
    /// Flowed labels of `b`.
    Flow,
    /// Closed-form propagator and its quadrature oracle.
    Propagator,
    /// Lower symbols of Q, D, Q², D² and sym(QD) at `a`.
    Symbols,
    /// Time-ordered flow of polynomial `r(t)`, `s(t)`.
    Ordered,
    /// Fit of `c_R q + c_S pq` through the measure integral.
    Weak,
}

#[derive(Debug, Args, Serialize)]
pub struct DynamicsArgs {
    #[arg(long, value_enum, default_value = "flow")]
    pub mode: DynamicsMode,
    #[arg(long = "R", allow_hyphen_values = true, default_value_t = 0.0)]
    pub r: f64,
    #[arg(long = "S", allow_hyphen_values = true, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub a: Point,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub b: Point,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Coefficients `c0,c1,...` of `r(t)` for `ordered`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub r_poly: Vec<f64>,
    /// Coefficients of `s(t)` for `ordered`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub s_poly: Vec<f64>,
    /// Slices of the ordered-product oracle.
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
}

fn poly(coeffs: Vec<f64>) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    move |t| coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

pub fn dynamics(a: &DynamicsArgs) -> Result<Output> {
    positive("beta", a.beta)?;
    if !a.t.is_finite() || a.t < 0.0 {
        return Err(usage(format!("--T must be nonnegative, got {}", a.t)));
    }
    let h = AffineHamiltonian::new(a.r, a.s)?;
    Ok(Output::new(match a.mode {
        DynamicsMode::Flow => {
            let f = flow_labels(&a.b.0, &h, a.t);
            json!({ "p": f.p, "q": f.q, "group_element": exp_affine(&h, a.t) })
        }
        DynamicsMode::Propagator => {
            let v = propagator_affine(&a.a.0, &a.b.0, &h, a.t, a.beta)?;
            let q = propagator_affine_quadrature(&a.a.0, &a.b.0, &h, a.t, a.beta)?;
            json!({ "re": v.re, "im": v.im, "quadrature": c(q), "abs_diff": (v - q).norm() })
        }
        DynamicsMode::Symbols => {
            let ops = [
                SymbolOp::Q,
                SymbolOp::D,
                SymbolOp::Q2,
                SymbolOp::D2,
                SymbolOp::SymQD,
            ];
            let rows = ops
                .iter()
                .map(|&op| {
                    Ok(json!({
                        "op": op,
                        "closed_form": lower_symbol(op, &a.a.0, a.beta)?,
                        "quadrature": lower_symbol_quadrature(op, &a.a.0, a.beta)?,
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            json!({ "symbols": rows })
        }
        DynamicsMode::Ordered => {
            if a.r_poly.is_empty() && a.s_poly.is_empty() {
                return Err(usage("ordered mode needs --r-poly and/or --s-poly"));
            }
            if a.steps == 0 {
                return Err(usage("--steps must be positive"));
            }
            let f = TimeDependentAffine::new(poly(a.r_poly.clone()), poly(a.s_poly.clone()));
            let eff = time_ordered_flow(&f, a.t)?;
            let g = exp_affine(&eff, a.t);
            let prod = ordered_product(&f, a.t, a.steps);
            json!({
                "effective": eff,
                "group_element": g,
                "ordered_product": prod,
                "max_abs_diff": (g.p - prod.p).abs().max((g.q - prod.q).abs()),
            })
        }
        DynamicsMode::Weak => json!(weak_symbol_check(&h, a.beta, &default_symbol_pairs())?),
    }))
}

#[derive(Debug, Args, Serialize)]
pub struct SelftestArgs {
    /// Only the inexpensive criteria (1, 2, 4, 5, 6, 9).
    #[arg(long)]
    pub quick: bool,
}

pub fn selftest(a: &SelftestArgs) -> Result<Output> {
    let o = Options { quick: a.quick };
    let reports: Vec<CriterionReport> = if a.quick {
        let cheap: [fn(Options) -> CriterionReport; 6] = [
            acceptance::kernel_exactness,
            acceptance::admissibility,
            acceptance::positive_definiteness,
            acceptance::polarization,
            acceptance::toy_model,
            acceptance::dynamics,
        ];
        cheap.iter().map(|f| f(o)).collect()
    } else {
        acceptance::run_all(o)
    };
    for r in &reports {
        eprintln!("{}", r.line());
    }
    let failed = reports.iter().any(|r| !r.passed);
    let mut out = Output::new(json!({
        "passed": !failed,
        "criteria": reports.iter().map(|r| json!({ "id": r.id, "title": r.title, "passed": r.passed, "checks": r.checks })).collect::<Vec<_>>(),
    }));
    out.failed = failed;
    Ok(out)
}
