//! The invariant rectangle `[C⁻¹z, C y]` with gradient cap `C`, the frozen
//! operator `T`, and the damped Picard driver.

use std::sync::Arc;

use serde::Serialize;

use crate::barriers::{build_barrier_set, BarrierOptions, BarrierSet};
use crate::error::{Error, Result};
use crate::estimates::{calibrate_kp, standard_problems, CalibrationReport, DEFAULT_SAFETY};
use crate::mesh::{gradient, integrate_singular, norm_sup_grad, Mesh, ScalarField};
use crate::plap::{plap_residual, plap_solve_from, Load, PlapConfig};
use crate::system::{eval_f, validate_cdt, Args, CdtReport, SystemSpec};

/// Largest rectangle constant tried by [`select_c`].
pub const C_MAX: f64 = 1_048_576.0;
/// Violations of the rectangle below this are treated as roundoff.
pub const CLAMP_TOL: f64 = 1e-10;

/// `C⁻¹ z ≤ w ≤ C y` componentwise, `‖∇w‖_∞ ≤ C`.
#[derive(Debug, Clone)]
pub struct Rectangle {
    pub c: f64,
    pub lower: [ScalarField; 2],
    pub upper: [ScalarField; 2],
    pub grad_cap: f64,
}

impl Rectangle {
    pub fn new(bs: &BarrierSet, c: f64) -> Self {
        let lower = [bs.comp[0].z.scaled(1.0 / c), bs.comp[1].z.scaled(1.0 / c)];
        let upper = [bs.comp[0].y.scaled(c), bs.comp[1].y.scaled(c)];
        Self { c, lower, upper, grad_cap: c }
    }

    pub fn midpoint(&self) -> [ScalarField; 2] {
        [0, 1].map(|i| self.lower[i].combine(0.5, &self.upper[i], 0.5))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.lower[0].mesh()
    }
}

/// Constants of the two-sided bounds on `w1^α w2^β` over the rectangle:
/// `lo C^{-(|α|+|β|)} d^{α+β} ≤ w1^α w2^β ≤ hi C^{|α|+|β|} d^{α+β}`.
pub fn envelope_constants(spec: &SystemSpec, bs: &BarrierSet, i: usize) -> (f64, f64) {
    let mut lo = 1.0;
    let mut hi = 1.0;
    for (j, e) in [spec.alpha[i], spec.beta[i]].into_iter().enumerate() {
        let (c0, c1) = (bs.comp[j].c0, bs.comp[j].c1);
        if e > 0.0 {
            lo *= c0.powf(e);
            hi *= c1.powf(e);
        } else if e < 0.0 {
            lo *= c1.powf(e);
            hi *= c0.powf(e);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub name: String,
    pub pass: bool,
    /// Smallest `(rhs - lhs) / |rhs|` over the nodes checked.
    pub margin: f64,
}

fn ineq(name: String, worst: f64) -> Inequality {
    Inequality { name, pass: worst >= 0.0, margin: worst }
}

/// The sub/supersolution inequalities at every interior node and the norm
/// closure with the computed `(∫ d^{r(α+β)})^{1/r}`, all at a given `C`.
pub fn closure_checks(spec: &SystemSpec, bs: &BarrierSet, k_p: f64, c: f64) -> Vec<Inequality> {
    let mesh = bs.comp[0].y.mesh();
    let d = mesh.dist();
    let area = mesh.measure();
    let mut out = Vec::new();
    for i in 0..2 {
        let k = i + 1;
        let (p, s) = (spec.p[i], spec.s(i));
        let (lo, hi) = envelope_constants(spec, bs, i);
        let spread = spec.alpha[i].abs() + spec.beta[i].abs();
        let growth = 2.0 * c.powf(spec.max_growth(i));
        let delta = bs.comp[i].delta;
        let (mut sub, mut sup) = (f64::INFINITY, f64::INFINITY);
        for n in mesh.interior_nodes() {
            let ds = d[n].powf(s);
            let load_z = if d[n] < delta { -1.0 } else { ds };
            let lhs = c.powf(-(p - 1.0)) * load_z;
            let rhs = spec.m[i] * lo * c.powf(-spread) * ds;
            sub = sub.min((rhs - lhs) / rhs.abs());
            let lhs = spec.big_m[i] * hi * c.powf(spread) * ds + growth;
            let rhs = c.powf(p - 1.0) * (1.0 + ds);
            sup = sup.min((rhs - lhs) / rhs);
        }
        out.push(ineq(format!("sub{k}"), sub));
        out.push(ineq(format!("super{k}"), sup));
        let ones = ScalarField::from_fn(mesh.clone(), |_| 1.0);
        let norm = match integrate_singular(spec.r[i] * s, &ones) {
            Ok(v) => {
                let mu_hat = v.powf(1.0 / spec.r[i]);
                let lhs = spec.big_m[i] * hi * c.powf(spread) * mu_hat + growth * area;
                let rhs = (c / k_p).powf(p - 1.0);
                (rhs - lhs) / rhs
            }
            Err(_) => f64::NEG_INFINITY,
        };
        out.push(ineq(format!("norm{k}"), norm));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub c: f64,
    pub checks: Vec<Inequality>,
}

/// Smallest `C` in `2, 4, …, 2^20` passing every [`closure_checks`] inequality.
pub fn select_c(spec: &SystemSpec, bs: &BarrierSet, k_p: f64) -> Result<Selection> {
    let cdt = validate_cdt(spec);
    if !cdt.pass() {
        return Err(Error::Hypothesis(format!("inadmissible exponents:\n{cdt}")));
    }
    let mut c = 2.0;
    let mut last = Vec::new();
    while c <= C_MAX {
        let checks = closure_checks(spec, bs, k_p, c);
        if checks.iter().all(|q| q.pass) {
            return Ok(Selection { c, checks });
        }
        last = checks;
        c *= 2.0;
    }
    let blocking: Vec<String> =
        last.iter().filter(|q| !q.pass).map(|q| format!("{} (margin {:.3e})", q.name, q.margin)).collect();
    Err(Error::ClosureFailure(blocking.join(", ")))
}

/// Cell-center loads `f_i(x, w1, w2, ∇w1, ∇w2)`.
pub fn frozen_loads(spec: &SystemSpec, w: [&ScalarField; 2]) -> Result<[Vec<f64>; 2]> {
    let mesh = w[0].mesh();
    for (k, f) in w.iter().enumerate() {
        if let Some(i) = mesh.interior_nodes().find(|&i| !(f.values()[i] > 0.0)) {
            return Err(Error::Domain(format!("w{} = {} at interior node {i}", k + 1, f.values()[i])));
        }
    }
    let nc = mesh.num_cells();
    let mut out = [Vec::with_capacity(nc), Vec::with_capacity(nc)];
    for c in 0..nc {
        let a = Args {
            s1: mesh.cell_average(w[0].values(), c),
            s2: mesh.cell_average(w[1].values(), c),
            xi1: mesh.cell_grad_sq(w[0].values(), c).sqrt(),
            xi2: mesh.cell_grad_sq(w[1].values(), c).sqrt(),
        };
        for (i, o) in out.iter_mut().enumerate() {
            o.push(eval_f(spec, i, &a)?);
        }
    }
    Ok(out)
}

/// `T(w) = (u, v)`: the two decoupled solves with frozen right-hand sides,
/// optionally warm-started.
pub fn apply_t(
    spec: &SystemSpec,
    w: [&ScalarField; 2],
    cfg: &[PlapConfig; 2],
    warm: Option<[&ScalarField; 2]>,
) -> Result<[ScalarField; 2]> {
    let mesh = w[0].mesh();
    let [g1, g2] = frozen_loads(spec, w)?;
    let start = |i: usize| warm.map(|w| w[i].values());
    let (a, b) = rayon::join(
        || plap_solve_from(mesh, &Load::Cells(g1), &cfg[0], start(0)),
        || plap_solve_from(mesh, &Load::Cells(g2), &cfg[1], start(1)),
    );
    Ok([a?.u, b?.u])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub in_rectangle: bool,
    pub grad_within_cap: bool,
    /// `min(w - lower)`, `min(upper - w)` over interior nodes of both components.
    pub lower_margin: f64,
    pub upper_margin: f64,
    /// `C - max_i ‖∇w_i‖_∞`.
    pub grad_margin: f64,
}

pub fn membership(rect: &Rectangle, w: [&ScalarField; 2]) -> Membership {
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    let mut grad = 0.0f64;
    for i in 0..2 {
        let (lo, hi, v) = (rect.lower[i].values(), rect.upper[i].values(), w[i].values());
        for n in rect.mesh().interior_nodes() {
            lower_margin = lower_margin.min(v[n] - lo[n]);
            upper_margin = upper_margin.min(hi[n] - v[n]);
        }
        grad = grad.max(norm_sup_grad(w[i]));
    }
    let grad_margin = rect.grad_cap - grad;
    Membership {
        in_rectangle: lower_margin >= -CLAMP_TOL && upper_margin >= -CLAMP_TOL,
        grad_within_cap: grad_margin >= 0.0,
        lower_margin,
        upper_margin,
        grad_margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Running,
    Converged,
    IterationLimit,
    LeftSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterRow {
    pub k: usize,
    /// `sup |Δw| + sup |∇Δw|` over both components.
    pub residual: f64,
    /// Membership of the undamped image `T(w^k)`.
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub grad_margin: f64,
    pub in_rectangle: bool,
    pub grad_within_cap: bool,
    /// Largest correction applied by clamping.
    pub clamp: f64,
}

#[derive(Debug, Clone)]
pub struct FixpointState {
    pub iterate: [ScalarField; 2],
    pub k: usize,
    pub history: Vec<IterRow>,
    pub in_rectangle: bool,
    pub grad_within_cap: bool,
    pub status: Status,
    /// `plap_residual` of each component against its own frozen load.
    pub certificate: Option<[f64; 2]>,
}

impl FixpointState {
    pub fn residual_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.residual).collect()
    }

    pub fn last_residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.residual)
    }
}

#[derive(Debug, Clone)]
pub struct IterateOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Stationarity tolerance of the inner solves.
    pub inner_tol: f64,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-6, max_iter: 200, inner_tol: 1e-10 }
    }
}

fn c1_distance(a: &[ScalarField; 2], b: &[ScalarField; 2]) -> f64 {
    let mut v = 0.0f64;
    let mut g = 0.0f64;
    for i in 0..2 {
        let diff = a[i].combine(1.0, &b[i], -1.0);
        v = v.max(diff.values().iter().fold(0.0, |m, x| m.max(x.abs())));
        g = g.max(norm_sup_grad(&diff));
    }
    v + g
}

/// Certificate of a converged pair: each component's residual against the
/// loads frozen at the pair itself.
pub fn certificate(spec: &SystemSpec, w: &[ScalarField; 2]) -> Result<[f64; 2]> {
    let mesh = w[0].mesh();
    let [g1, g2] = frozen_loads(spec, [&w[0], &w[1]])?;
    Ok([plap_residual(mesh, spec.p[0], &w[0], &Load::Cells(g1))?, plap_residual(mesh, spec.p[1], &w[1], &Load::Cells(g2))?])
}

/// Damped Picard iteration `w ← (1-λ) w + λ T(w)` from the rectangle midpoint.
///
/// Stops when the C¹-type step falls below `tol` and the pair's certificate
/// is at most `10 tol`; a step leaving the rectangle by more than
/// [`CLAMP_TOL`] ends the run with [`Status::LeftSet`].
pub fn iterate(spec: &SystemSpec, rect: &Rectangle, opts: &IterateOptions) -> Result<FixpointState> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Config(format!("damping {} must lie in (0, 1]", opts.damping)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let lam = opts.damping;
    let cfg = [0, 1].map(|i| PlapConfig { tol: opts.inner_tol, ..PlapConfig::new(spec.p[i]) });
    let mut w = rect.midpoint();
    let mut image: Option<[ScalarField; 2]> = None;
    let mut state = FixpointState {
        iterate: w.clone(),
        k: 0,
        history: Vec::new(),
        in_rectangle: true,
        grad_within_cap: true,
        status: Status::Running,
        certificate: None,
    };
    for k in 1..=opts.max_iter {
        let warm = image.as_ref().map(|t| [&t[0], &t[1]]);
        let t = apply_t(spec, [&w[0], &w[1]], &cfg, warm)?;
        let mem = membership(rect, [&t[0], &t[1]]);
        let mut next = [0, 1].map(|i| w[i].combine(1.0 - lam, &t[i], lam));
        let mut clamp = 0.0f64;
        for i in 0..2 {
            let (lo, hi) = (rect.lower[i].values(), rect.upper[i].values());
            for (n, x) in next[i].values_mut().iter_mut().enumerate() {
                let y = x.clamp(lo[n], hi[n]);
                clamp = clamp.max((y - *x).abs());
                *x = y;
            }
        }
        let residual = c1_distance(&next, &w);
        state.history.push(IterRow {
            k,
            residual,
            lower_margin: mem.lower_margin,
            upper_margin: mem.upper_margin,
            grad_margin: mem.grad_margin,
            in_rectangle: mem.in_rectangle,
            grad_within_cap: mem.grad_within_cap,
            clamp,
        });
        state.k = k;
        state.in_rectangle = mem.in_rectangle;
        state.grad_within_cap = mem.grad_within_cap;
        w = next;
        image = Some(t);
        if clamp > CLAMP_TOL || !mem.grad_within_cap {
            state.status = Status::LeftSet;
            break;
        }
        if residual < opts.tol {
            let cert = certificate(spec, &w)?;
            state.certificate = Some(cert);
            if cert.iter().all(|&r| r <= 10.0 * opts.tol) {
                state.status = Status::Converged;
                break;
            }
        }
    }
    if state.status == Status::Running {
        state.status = Status::IterationLimit;
        if state.certificate.is_none() {
            state.certificate = certificate(spec, &w).ok();
        }
    }
    state.iterate = w;
    Ok(state)
}

#[derive(Debug, Clone, Default)]
pub struct DriverOptions {
    pub iterate: IterateOptions,
    pub barriers: BarrierOptions,
    /// Skip calibration and use this gradient-bound constant.
    pub k_p: Option<f64>,
    pub seed: u64,
}


#[derive(Debug, Clone)]
pub struct FixpointRun {
    pub cdt: CdtReport,
    pub barriers: BarrierSet,
    pub calibration: Vec<CalibrationReport>,
    pub k_p: f64,
    pub selection: Selection,
    pub rect: Rectangle,
    pub state: FixpointState,
}

/// Full pipeline: admissibility, barriers, `k_p`, `C`, Picard iteration.
pub fn run_fixpoint(spec: &SystemSpec, mesh: &Arc<Mesh>, opts: &DriverOptions) -> Result<FixpointRun> {
    spec.check_well_formed()?;
    let cdt = validate_cdt(spec);
    if !cdt.pass() {
        return Err(Error::Hypothesis(format!("inadmissible exponents:\n{cdt}")));
    }
    let barriers = build_barrier_set(mesh, spec.p, [spec.s(0), spec.s(1)], &opts.barriers)?;
    let mut calibration = Vec::new();
    let k_p = match opts.k_p {
        Some(k) => k,
        None => {
            let mut k = 0.0f64;
            for i in 0..2 {
                if i == 1 && spec.p[1] == spec.p[0] && spec.r[1] == spec.r[0] {
                    break;
                }
                let (cal, _) = standard_problems(mesh, spec.r[i], opts.seed);
                let cfg = PlapConfig { tol: opts.iterate.inner_tol, ..PlapConfig::new(spec.p[i]) };
                let rep = calibrate_kp(mesh, &cfg, spec.r[i], &cal, DEFAULT_SAFETY, 0.0)?;
                k = k.max(rep.k_p);
                calibration.push(rep);
            }
            k
        }
    };
    let selection = select_c(spec, &barriers, k_p)?;
    let rect = Rectangle::new(&barriers, selection.c);
    let state = iterate(spec, &rect, &opts.iterate)?;
    Ok(FixpointRun { cdt, barriers, calibration, k_p, selection, rect, state })
}

/// Nodal gradient magnitudes, for reports.
pub fn grad_magnitude(f: &ScalarField) -> Vec<f64> {
    let g = gradient(f);
    (0..f.values().len()).map(|i| g.magnitude(i)).collect()
}
