//! Monte Carlo for the pinned Wiener integral with the phase `e^{-i∫q dp}`.
//!
//! Paths run from `b` at `t = 0` to `a` at `t = T` on `N` uniform slices of
//! width `δ`. The discrete target is the product of slice transition
//! densities for the metric `β^{-1}q²dp² + βq^{-2}dq²` with midpoint
//! `q̄_l = ½(q_l + q_{l+1})`, integrated against `dp_l dq_l = e^{u_l}dp_l du_l`
//! at the interior nodes:
//!
//! `(2πνδ)^{-1} exp(−[β^{-1}q̄²Δp² + βΔu²]/(2νδ))` per slice.
//!
//! The proposal draws `u = ln q` as a Gaussian bridge with step variance
//! `νδ/β` and then `p` as a Gaussian bridge with step variances
//! `σ_l² = νβδ/q̄_l²`. Since the slice density factors as
//! `φ(Δu; νδ/β) φ(Δp; σ_l²) / q̄_l`, the importance weight is exactly
//!
//! `Π_{interior} e^{u_l} · Π_l q̄_l^{-1} · φ(u_a − u_b; Nνδ/β) · φ(p_a − p_b; Σσ_l²)`.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::PhasePoint;

/// Samples per independently seeded stream.
pub const CHUNK: usize = 4096;

/// Largest allowed `δν`.
pub const MAX_STEP_NU: f64 = 1.0 / 16.0;

/// A discretized path; node `l` sits at `times[l] = lT/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLattice {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub nu: f64,
    pub beta: f64,
}

impl PathLattice {
    pub fn n_steps(&self) -> usize {
        self.p.len() - 1
    }

    pub fn reversed(&self) -> PathLattice {
        let t_end = *self.times.last().unwrap_or(&0.0);
        PathLattice {
            times: self.times.iter().rev().map(|t| t_end - t).collect(),
            p: self.p.iter().rev().copied().collect(),
            q: self.q.iter().rev().copied().collect(),
            nu: self.nu,
            beta: self.beta,
        }
    }
}

/// Lattice parameters shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub beta: f64,
    pub nu: f64,
    pub t: f64,
    /// Number of slices; `None` picks the smallest `N` with `δν ≤ 1/16`.
    pub n_steps: Option<usize>,
    pub n_samples: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn steps(&self) -> usize {
        self.n_steps
            .unwrap_or_else(|| ((self.nu * self.t / MAX_STEP_NU).ceil() as usize).max(2))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.nu > 0.0 && self.t > 0.0) {
            return domain(format!(
                "need β, ν, T > 0, got β = {}, ν = {}, T = {}",
                self.beta, self.nu, self.t
            ));
        }
        let n = self.steps();
        if n < 2 {
            return domain(format!("need at least 2 slices, got {n}"));
        }
        if self.nu * self.t / n as f64 > MAX_STEP_NU * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "δν = {} exceeds 1/16; use at least {} slices",
                self.nu * self.t / n as f64,
                (self.nu * self.t / MAX_STEP_NU).ceil()
            )));
        }
        if self.n_samples == 0 {
            return domain("need at least one sample");
        }
        Ok(())
    }
}

/// Reproduction data for an estimate: stream `c` of the run is
/// `ChaCha8Rng::seed_from_u64(seed)` switched to stream `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub chunk: usize,
    pub streams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: Complex64,
    pub stderr: f64,
    pub n_samples: usize,
    pub nu: f64,
    pub seed: SeedRecord,
    /// Paths redrawn after `q` left the floating-point range.
    pub resamples: usize,
    /// False when `stderr > |value|`.
    pub reliable: bool,
}

fn ln_phi(x: f64, var: f64) -> f64 {
    -0.5 * (x * x / var + (2.0 * std::f64::consts::PI * var).ln())
}

/// Standard normals for one path: `N` for `u`, `N` for `p`.
struct Draws {
    zu: Vec<f64>,
    zp: Vec<f64>,
}

impl Draws {
    fn new(n: usize) -> Self {
        Self {
            zu: vec![0.0; n],
            zp: vec![0.0; n],
        }
    }

    fn fill(&mut self, rng: &mut ChaCha8Rng) {
        for z in self.zu.iter_mut().chain(self.zp.iter_mut()) {
            *z = rng.sample(StandardNormal);
        }
    }
}

/// Reusable buffers for one path.
struct PathBuf {
    u: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    qbar: Vec<f64>,
}

impl PathBuf {
    fn new(n: usize) -> Self {
        Self {
            u: vec![0.0; n + 1],
            p: vec![0.0; n + 1],
            q: vec![0.0; n + 1],
            qbar: vec![0.0; n],
        }
    }

    /// Builds the bridge from `from` to `to` and returns its log-weight, or
    /// `None` when some `q` under- or overflows.
    fn build(
        &mut self,
        from: &PhasePoint,
        to: &PhasePoint,
        beta: f64,
        nu: f64,
        delta: f64,
        d: &Draws,
    ) -> Option<f64> {
        let n = self.qbar.len();
        let nf = n as f64;
        let (ua, ub) = (to.u(), from.u());
        let su = (nu * delta / beta).sqrt();
        let total: f64 = d.zu.iter().sum();
        let mut s = 0.0;
        self.u[0] = ub;
        for l in 1..n {
            s += d.zu[l - 1];
            let frac = l as f64 / nf;
            self.u[l] = ub + frac * (ua - ub) + su * (s - frac * total);
        }
        self.u[n] = ua;
        let mut log_w = 0.0;
        for l in 0..=n {
            if !(self.u[l].abs() < 700.0) {
                return None;
            }
            self.q[l] = self.u[l].exp();
            if l > 0 && l < n {
                log_w += self.u[l];
            }
        }
        let mut var_sum = 0.0;
        let mut xi_sum = 0.0;
        for l in 0..n {
            let qb = 0.5 * (self.q[l] + self.q[l + 1]);
            self.qbar[l] = qb;
            log_w -= qb.ln();
            let var = nu * beta * delta / (qb * qb);
            var_sum += var;
            xi_sum += var.sqrt() * d.zp[l];
        }
        let gap = to.p - from.p;
        let shift = (xi_sum - gap) / var_sum;
        self.p[0] = from.p;
        for l in 0..n {
            let var = nu * beta * delta / (self.qbar[l] * self.qbar[l]);
            self.p[l + 1] = self.p[l] + var.sqrt() * d.zp[l] - var * shift;
        }
        self.p[n] = to.p;
        log_w += ln_phi(ua - ub, nf * nu * delta / beta) + ln_phi(gap, var_sum);
        log_w.is_finite().then_some(log_w)
    }

    fn phase(&self) -> f64 {
        -self
            .qbar
            .iter()
            .enumerate()
            .map(|(l, qb)| qb * (self.p[l + 1] - self.p[l]))
            .sum::<f64>()
    }

    fn h_sum(&self, h: &dyn Fn(f64, f64) -> f64, delta: f64) -> f64 {
        self.qbar
            .iter()
            .enumerate()
            .map(|(l, qb)| h(0.5 * (self.p[l] + self.p[l + 1]), *qb))
            .sum::<f64>()
            * delta
    }

    fn to_lattice(&self, nu: f64, beta: f64, t: f64) -> PathLattice {
        let n = self.qbar.len();
        PathLattice {
            times: (0..=n).map(|l| t * l as f64 / n as f64).collect(),
            p: self.p.clone(),
            q: self.q.clone(),
            nu,
            beta,
        }
    }
}

/// Draws one path from `from` to `to` and returns it with its log-weight.
pub fn sample_bridge<R: Rng>(
    from: &PhasePoint,
    to: &PhasePoint,
    beta: f64,
    nu: f64,
    t: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<(PathLattice, f64)> {
    if n_steps < 2 || !(nu > 0.0 && beta > 0.0 && t > 0.0) {
        return domain(format!("need N ≥ 2 and β, ν, T > 0 (N = {n_steps})"));
    }
    let delta = t / n_steps as f64;
    let mut d = Draws::new(n_steps);
    let mut buf = PathBuf::new(n_steps);
    for _ in 0..1000 {
        for z in d.zu.iter_mut().chain(d.zp.iter_mut()) {
            *z = rng.sample(StandardNormal);
        }
        if let Some(lw) = buf.build(from, to, beta, nu, delta, &d) {
            return Ok((buf.to_lattice(nu, beta, t), lw));
        }
    }
    Err(Error::Numeric("could not draw a path with finite q".into()))
}

/// `−Σ_l ½(q_{l+1} + q_l)(p_{l+1} − p_l)`.
pub fn stratonovich_phase(path: &PathLattice) -> f64 {
    -path
        .p
        .windows(2)
        .zip(path.q.windows(2))
        .map(|(p, q)| 0.5 * (q[0] + q[1]) * (p[1] - p[0]))
        .sum::<f64>()
}

/// Running sums for the ratio `ΣX/ΣY` and its delta-method error.
#[derive(Debug, Clone, Copy, Default)]
struct RatioSums {
    n: usize,
    x: Complex64,
    y: Complex64,
    xx: f64,
    yy: f64,
    xy: Complex64,
    resamples: usize,
}

impl RatioSums {
    fn push(&mut self, x: Complex64, y: Complex64) {
        self.n += 1;
        self.x += x;
        self.y += y;
        self.xx += x.norm_sqr();
        self.yy += y.norm_sqr();
        self.xy += x * y.conj();
    }

    fn merge(mut self, o: &RatioSums) -> Self {
        self.n += o.n;
        self.x += o.x;
        self.y += o.y;
        self.xx += o.xx;
        self.yy += o.yy;
        self.xy += o.xy;
        self.resamples += o.resamples;
        self
    }

    /// `R = ΣX/ΣY` with `Var R ≈ Σ|X − RY|² / (|Ȳ|² n(n−1))`.
    fn ratio(&self) -> (Complex64, f64) {
        let r = self.x / self.y;
        let n = self.n as f64;
        let ss = (self.xx + r.norm_sqr() * self.yy - 2.0 * (r.conj() * self.xy).re).max(0.0);
        let ybar = self.y / n;
        let var = if self.n > 1 {
            ss / (ybar.norm_sqr() * n * (n - 1.0))
        } else {
            f64::INFINITY
        };
        (r, var.sqrt())
    }
}

/// Runs `per_sample` over counter-seeded streams and merges in stream order.
fn run_streams<F>(cfg: &McConfig, per_sample: F) -> (RatioSums, SeedRecord)
where
    F: Fn(&mut ChaCha8Rng, &mut RatioSums) + Sync,
{
    let streams = cfg.n_samples.div_ceil(CHUNK);
    let parts: Vec<RatioSums> = (0..streams)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(cfg.n_samples - c * CHUNK);
            let mut sums = RatioSums::default();
            while sums.n < count {
                per_sample(&mut rng, &mut sums);
            }
            sums
        })
        .collect();
    let total = parts.iter().fold(RatioSums::default(), |acc, p| acc.merge(p));
    let record = SeedRecord {
        seed: cfg.seed,
        chunk: CHUNK,
        streams,
    };
    (total, record)
}

fn finish(sums: RatioSums, seed: SeedRecord, nu: f64) -> McEstimate {
    let (value, stderr) = sums.ratio();
    McEstimate {
        value,
        stderr,
        n_samples: sums.n,
        nu,
        seed,
        resamples: sums.resamples,
        reliable: stderr <= value.norm(),
    }
}

/// What a sample contributes on top of `w e^{i·phase}`.
enum Insertion<'a> {
    None,
    /// `e^{-iΣh(p̄_l, q̄_l)δ}`.
    Action(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
    /// `h(p_l, q_l)` at one node.
    Point(&'a (dyn Fn(f64, f64) -> f64 + Sync), usize),
}

fn ratio_estimate(a: &PhasePoint, b: &PhasePoint, cfg: &McConfig, ins: Insertion) -> Result<McEstimate> {
    cfg.validate()?;
    let n = cfg.steps();
    let delta = cfg.t / n as f64;
    let reference = PhasePoint::ORIGIN;
    let (sums, seed) = run_streams(cfg, |rng, sums| {
        let mut d = Draws::new(n);
        let mut target = PathBuf::new(n);
        let mut refp = PathBuf::new(n);
        loop {
            d.fill(rng);
            let lw = target.build(b, a, cfg.beta, cfg.nu, delta, &d);
            let lr = refp.build(&reference, &reference, cfg.beta, cfg.nu, delta, &d);
            if let (Some(lw), Some(lr)) = (lw, lr) {
                let mut x = Complex64::from_polar(lw.exp(), target.phase());
                match ins {
                    Insertion::None => {}
                    Insertion::Action(h) => x *= Complex64::from_polar(1.0, -target.h_sum(h, delta)),
                    Insertion::Point(h, l) => x *= h(target.p[l], target.q[l]),
                }
                let y = Complex64::from_polar(lr.exp(), refp.phase());
                sums.push(x, y);
                return;
            }
            sums.resamples += 1;
        }
    });
    if sums.y.norm() == 0.0 {
        return Err(Error::Numeric("reference estimate vanished".into()));
    }
    Ok(finish(sums, seed, cfg.nu))
}

/// Self-normalized estimate of `⟨a|b⟩` (or, with `h`, of the propagator):
/// the average of `w e^{i·phase − iΣhδ}` over bridges from `b` to `a`,
/// divided by the average of `w e^{i·phase}` over bridges `(0,1) → (0,1)`
/// drawn from the same random numbers.
pub fn propagator_mc(
    a: &PhasePoint,
    b: &PhasePoint,
    cfg: &McConfig,
    h: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
) -> Result<McEstimate> {
    let ins = match h {
        Some(h) => Insertion::Action(h),
        None => Insertion::None,
    };
    ratio_estimate(a, b, cfg, ins)
}

/// Self-normalized estimate of `K_ν ∫ e^{-i∫q dp} h(p(s), q(s)) dW^ν` with
/// the insertion at the node nearest to time `s`.
pub fn symbol_insertion_mc(
    a: &PhasePoint,
    b: &PhasePoint,
    cfg: &McConfig,
    h: &(dyn Fn(f64, f64) -> f64 + Sync),
    s: f64,
) -> Result<McEstimate> {
    cfg.validate()?;
    if !(s > 0.0 && s < cfg.t) {
        return domain(format!("insertion time {s} outside (0, {})", cfg.t));
    }
    let n = cfg.steps();
    let l = ((s / cfg.t) * n as f64).round() as usize;
    if l == 0 || l >= n {
        return domain(format!("insertion time {s} rounds to an endpoint on {n} slices"));
    }
    ratio_estimate(a, b, cfg, Insertion::Point(h, l))
}

/// Mean importance weight of bridges from `b` to `a` (no phase), i.e. the
/// discrete target mass relative to the proposal.
pub fn mean_weight(a: &PhasePoint, b: &PhasePoint, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let n = cfg.steps();
    let delta = cfg.t / n as f64;
    let (sums, seed) = run_streams(cfg, |rng, sums| {
        let mut d = Draws::new(n);
        let mut path = PathBuf::new(n);
        loop {
            d.fill(rng);
            if let Some(lw) = path.build(b, a, cfg.beta, cfg.nu, delta, &d) {
                sums.push(Complex64::new(lw.exp(), 0.0), Complex64::new(1.0, 0.0));
                return;
            }
            sums.resamples += 1;
        }
    });
    Ok(finish(sums, seed, cfg.nu))
}

/// `√(2πνT)`-free toy estimate of `∫dw^ν` for a 1-D bridge from `x1` to
/// `x2`, sampled from a bridge with step variance `inflation·νδ`.
pub fn toy_wiener_mc(x2: f64, x1: f64, cfg: &McConfig, inflation: f64) -> Result<McEstimate> {
    cfg.validate()?;
    if !(inflation > 0.5) {
        return domain(format!(
            "inflation must exceed 1/2 for finite variance, got {inflation}"
        ));
    }
    let n = cfg.steps();
    let delta = cfg.t / n as f64;
    let (v, vp) = (cfg.nu * delta, inflation * cfg.nu * delta);
    let gap = x2 - x1;
    let base = ln_phi(gap, n as f64 * vp);
    let (sums, seed) = run_streams(cfg, |rng, sums| {
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let total: f64 = z.iter().sum();
        let mut lw = base;
        let mut prev = 0.0;
        let mut s = 0.0;
        for l in 1..=n {
            s += z[l - 1];
            let frac = l as f64 / n as f64;
            let x = frac * gap + vp.sqrt() * (s - frac * total);
            let dx = x - prev;
            lw += ln_phi(dx, v) - ln_phi(dx, vp);
            prev = x;
        }
        sums.push(Complex64::new(lw.exp(), 0.0), Complex64::new(1.0, 0.0));
    });
    Ok(finish(sums, seed, cfg.nu))
}

/// Affine fit in `1/ν` weighted by `stderr^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub value: Complex64,
    pub error: f64,
    pub chi2_per_dof: f64,
}

/// The error is the propagated intercept standard error, inflated by
/// `√(χ²/dof)` when the residual exceeds the stated errors.
pub fn extrapolate_nu(estimates: &[McEstimate]) -> Result<Extrapolated> {
    let mut nus: Vec<f64> = estimates.iter().map(|e| e.nu).collect();
    nus.sort_by(f64::total_cmp);
    nus.dedup();
    if nus.len() < 3 {
        return domain("extrapolation needs at least 3 distinct ν");
    }
    if let Some(e) = estimates.iter().find(|e| !e.reliable || !(e.stderr > 0.0)) {
        return domain(format!("estimate at ν = {} is unreliable", e.nu));
    }
    let fit = |part: fn(&Complex64) -> f64| {
        let pts: Vec<(f64, f64, f64)> = estimates
            .iter()
            .map(|e| (1.0 / e.nu, part(&e.value), 1.0 / (e.stderr * e.stderr)))
            .collect();
        crate::stats::weighted_line(&pts).expect("distinct abscissae")
    };
    let re = fit(|c| c.re);
    let im = fit(|c| c.im);
    // Each part carries half the complex variance.
    let dof = 2.0 * (estimates.len() as f64 - 2.0);
    let chi2_per_dof = 2.0 * (re.chi2 + im.chi2) / dof;
    if chi2_per_dof > 10.0 {
        return Err(Error::Numeric(format!(
            "estimates inconsistent with an affine law in 1/ν (χ²/dof = {chi2_per_dof:.1})"
        )));
    }
    let var = 0.5 * (re.var_intercept + im.var_intercept);
    Ok(Extrapolated {
        value: Complex64::new(re.line.intercept, im.line.intercept),
        error: var.sqrt() * chi2_per_dof.max(1.0).sqrt(),
        chi2_per_dof,
    })
}

/// JSON artifact for one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub endpoints: [PhasePoint; 2],
    pub beta: f64,
    pub nu: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub value_re: f64,
    pub value_im: f64,
    pub stderr: f64,
    pub resamples: usize,
}

impl McRecord {
    pub fn new(a: &PhasePoint, b: &PhasePoint, cfg: &McConfig, est: &McEstimate) -> Self {
        Self {
            endpoints: [*a, *b],
            beta: cfg.beta,
            nu: cfg.nu,
            t: cfg.t,
            n: cfg.steps(),
            n_samples: est.n_samples,
            seed: est.seed.seed,
            value_re: est.value.re,
            value_im: est.value.im,
            stderr: est.stderr,
            resamples: est.resamples,
        }
    }
}

/// Convergence curve as CSV with header `nu,re,im,err`.
pub fn write_convergence_csv<W: Write>(estimates: &[McEstimate], mut w: W) -> std::io::Result<()> {
    writeln!(w, "nu,re,im,err")?;
    for e in estimates {
        writeln!(w, "{},{},{},{}", e.nu, e.value.re, e.value.im, e.stderr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(p: f64, q: f64) -> PhasePoint {
        PhasePoint { p, q }
    }

    fn lattice(p: Vec<f64>, q: Vec<f64>) -> PathLattice {
        let n = p.len();
        PathLattice {
            times: (0..n).map(|l| l as f64).collect(),
            p,
            q,
            nu: 1.0,
            beta: 1.0,
        }
    }

    #[test]
    fn phase_examples() {
        let flat = lattice(vec![0.3; 5], vec![1.0, 2.0, 0.5, 3.0, 1.0]);
        assert_eq!(stratonovich_phase(&flat), 0.0);
        let loop_path = lattice(vec![0.0, 1.0, 1.0, 0.0, 0.0], vec![1.0, 1.0, 2.0, 2.0, 1.0]);
        assert!((stratonovich_phase(&loop_path) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (path, _) = sample_bridge(&pt(0.0, 1.0), &pt(0.5, 2.0), 1.0, 4.0, 1.0, 64, &mut rng).unwrap();
        let back = stratonovich_phase(&path.reversed());
        assert!((back + stratonovich_phase(&path)).abs() < 1e-13);
    }

    #[test]
    fn bridge_is_pinned_and_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (from, to) = (pt(0.2, 0.7), pt(-1.0, 1.9));
        let (path, _) = sample_bridge(&from, &to, 0.4, 2.0, 1.0, 32, &mut rng).unwrap();
        assert_eq!((path.p[0], path.q[0]), (from.p, from.q));
        assert_eq!(path.p[32], to.p);
        assert!((path.q[32] - to.q).abs() < 1e-15);
        let (path, _) = sample_bridge(&from, &from, 1.0, 1.0, 1e-10, 16, &mut rng).unwrap();
        assert!(path.p.iter().all(|p| (p - from.p).abs() < 1e-4));
        assert!(path.q.iter().all(|q| (q - from.q).abs() < 1e-4));
    }

    #[test]
    fn quadratic_variation_matches_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (beta, nu, n) = (1.0, 1.0, 64);
        let delta = 1.0 / n as f64;
        let (mut qp, mut qu) = (0.0, 0.0);
        let reps = 400;
        for _ in 0..reps {
            let (path, _) = sample_bridge(&pt(0.0, 1.0), &pt(0.0, 1.0), beta, nu, 1.0, n, &mut rng).unwrap();
            for l in 0..n {
                let qb = 0.5 * (path.q[l] + path.q[l + 1]);
                qp += (path.p[l + 1] - path.p[l]).powi(2) * qb * qb / (nu * beta * delta);
                qu += (path.q[l + 1].ln() - path.q[l].ln()).powi(2) * beta / (nu * delta);
            }
        }
        // A bridge loses one degree of freedom out of N.
        let expect = (reps * (n - 1)) as f64;
        assert!((qp / expect - 1.0).abs() < 0.05, "{}", qp / expect);
        assert!((qu / expect - 1.0).abs() < 0.05, "{}", qu / expect);
    }

    #[test]
    fn self_normalization_is_exact_at_reference() {
        let cfg = McConfig {
            beta: 1.0,
            nu: 4.0,
            t: 0.5,
            n_steps: None,
            n_samples: 5000,
            seed: 1,
        };
        let o = PhasePoint::ORIGIN;
        let e = propagator_mc(&o, &o, &cfg, None).unwrap();
        assert!((e.value - 1.0).norm() < 1e-12);
    }

    #[test]
    fn constant_hamiltonian_factorizes() {
        let cfg = McConfig {
            beta: 0.6,
            nu: 4.0,
            t: 0.5,
            n_steps: None,
            n_samples: 3000,
            seed: 5,
        };
        let (a, b) = (pt(0.0, 1.0), pt(0.5, 1.5));
        let k = 0.8;
        let plain = propagator_mc(&a, &b, &cfg, None).unwrap();
        let with_h = propagator_mc(&a, &b, &cfg, Some(&|_, _| k)).unwrap();
        let want = plain.value * Complex64::from_polar(1.0, -k * cfg.t);
        assert!((with_h.value - want).norm() < 1e-12);
        let one = symbol_insertion_mc(&a, &b, &cfg, &|_, _| 1.0, 0.25).unwrap();
        assert!((one.value - plain.value).norm() < 1e-12);
    }

    #[test]
    fn seed_determinism_across_thread_counts() {
        let cfg = McConfig {
            beta: 1.0,
            nu: 2.0,
            t: 0.5,
            n_steps: None,
            n_samples: 3 * CHUNK + 17,
            seed: 77,
        };
        let (a, b) = (pt(0.1, 1.2), pt(-0.3, 0.9));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let e1 = one.install(|| propagator_mc(&a, &b, &cfg, None).unwrap());
        let e4 = four.install(|| propagator_mc(&a, &b, &cfg, None).unwrap());
        assert_eq!(e1, e4);
        assert_eq!(e1.n_samples, cfg.n_samples);
    }

    #[test]
    fn step_bound_enforced() {
        let cfg = McConfig {
            beta: 1.0,
            nu: 8.0,
            t: 1.0,
            n_steps: Some(64),
            n_samples: 10,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
        assert_eq!(McConfig { n_steps: None, ..cfg }.steps(), 128);
    }

    #[test]
    fn mean_weight_is_stable() {
        let o = PhasePoint::ORIGIN;
        let mut values = Vec::new();
        for seed in [1, 2] {
            let cfg = McConfig {
                beta: 1.0,
                nu: 1.0,
                t: 1.0,
                n_steps: Some(64),
                n_samples: 20_000,
                seed,
            };
            let e = mean_weight(&o, &o, &cfg).unwrap();
            assert!(e.stderr / e.value.re < 0.1);
            values.push(e);
        }
        let diff = (values[0].value - values[1].value).norm();
        assert!(diff < 4.0 * (values[0].stderr.hypot(values[1].stderr)));
    }

    fn synthetic(nu: f64, value: Complex64, stderr: f64) -> McEstimate {
        McEstimate {
            value,
            stderr,
            n_samples: 100,
            nu,
            seed: SeedRecord {
                seed: 0,
                chunk: CHUNK,
                streams: 1,
            },
            resamples: 0,
            reliable: true,
        }
    }

    #[test]
    fn extrapolation_examples() {
        let v = Complex64::new(0.7, -0.2);
        let same: Vec<_> = [4.0, 8.0, 16.0].iter().map(|&n| synthetic(n, v, 0.01)).collect();
        let r = extrapolate_nu(&same).unwrap();
        assert!((r.value - v).norm() < 1e-12);
        // Intercept standard error for abscissae 1/4, 1/8, 1/16 and equal weights.
        assert!((r.error / 0.01 - (0.08203125f64 / 0.0546875).sqrt()).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (c, d) = (Complex64::new(0.9, 0.1), Complex64::new(-0.5, 0.3));
        let noisy: Vec<_> = [4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&n| {
                let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 0.005;
                synthetic(n, c + d / n + z, 0.005 * std::f64::consts::SQRT_2)
            })
            .collect();
        let r = extrapolate_nu(&noisy).unwrap();
        assert!(
            (r.value - c).norm() < 2.0 * r.error * std::f64::consts::SQRT_2,
            "{r:?}"
        );

        let bad = vec![
            synthetic(4.0, v, 1e-4),
            synthetic(8.0, -v, 1e-4),
            synthetic(16.0, v, 1e-4),
        ];
        assert!(extrapolate_nu(&bad).is_err());
        assert!(extrapolate_nu(&same[..2]).is_err());
    }

    #[test]
    fn toy_wiener_rescaled_limit() {
        let estimates: Vec<McEstimate> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&nu| {
                let cfg = McConfig {
                    beta: 1.0,
                    nu,
                    t: 1.0,
                    n_steps: None,
                    n_samples: 20_000,
                    seed: 3,
                };
                let mut e = toy_wiener_mc(1.0, 0.0, &cfg, 1.25).unwrap();
                let s = (2.0 * std::f64::consts::PI * nu).sqrt();
                e.value *= s;
                e.stderr *= s;
                e
            })
            .collect();
        let r = extrapolate_nu(&estimates).unwrap();
        assert!((r.value.re - 1.0).abs() < 0.05, "{r:?}");
    }

    #[test]
    fn artifacts() {
        let e = synthetic(4.0, Complex64::new(0.5, 0.25), 0.01);
        let mut out = Vec::new();
        write_convergence_csv(std::slice::from_ref(&e), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "nu,re,im,err\n4,0.5,0.25,0.01\n");
        let cfg = McConfig {
            beta: 1.0,
            nu: 4.0,
            t: 0.5,
            n_steps: None,
            n_samples: 100,
            seed: 0,
        };
        let rec = McRecord::new(&PhasePoint::ORIGIN, &pt(0.0, 2.0), &cfg, &e);
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["N"], 32);
        assert_eq!(json["T"], 0.5);
        assert_eq!(json["endpoints"][1]["q"], 2.0);
    }
}
