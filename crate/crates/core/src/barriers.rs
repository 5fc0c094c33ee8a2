//! Comparison functions: the upper barrier `y` (load `1 + d^s`), the lower
//! barrier `z` (load `d^s` away from the boundary, `-1` in a thin layer),
//! the torsion function, and the singular barrier `-Δ_p w = w^{-γ}`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result, Trace};
use crate::mesh::{norm_sup_grad, Mesh, ScalarField};
use crate::plap::{plap_solve, plap_solve_from, Load, PlapConfig};

/// Number of times `build_z` halves the layer width before giving up.
pub const MAX_HALVINGS: usize = 6;

fn check_exponent(p: f64, s: f64) -> Result<()> {
    if s > -1.0 && s < p - 1.0 {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!("need -1 < s < p - 1, got s = {s}, p = {p}")))
    }
}

/// Interior ratios `v / d`.
fn ratios(v: &ScalarField) -> impl Iterator<Item = f64> + '_ {
    let m = v.mesh();
    m.interior_nodes().map(move |i| v.values()[i] / m.dist()[i])
}

fn ratio_range(v: &ScalarField) -> (f64, f64) {
    ratios(v).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

/// Upper barrier: solves `-Δ_p y = 1 + d^s`.
pub fn build_y(mesh: &Arc<Mesh>, cfg: &PlapConfig, s: f64) -> Result<ScalarField> {
    check_exponent(cfg.p, s)?;
    Ok(plap_solve(mesh, &Load::Weight { c0: 1.0, c1: 1.0, mu: s }, cfg)?.u)
}

/// Lower barrier with its boundary layer width. Halves `delta` until
/// `min z/d > 0` on interior nodes.
pub fn build_z(mesh: &Arc<Mesh>, cfg: &PlapConfig, s: f64, delta: f64) -> Result<(ScalarField, f64)> {
    check_exponent(cfg.p, s)?;
    let half = 0.5 * mesh.inradius();
    if !(delta > 0.0 && delta < half) {
        return Err(Error::Config(format!("layer width {delta} must lie in (0, {half})")));
    }
    let mut delta = delta;
    for _ in 0..=MAX_HALVINGS {
        let z = plap_solve(mesh, &Load::Layered { s, delta }, cfg)?.u;
        let (lo, _) = ratio_range(&z);
        if lo > 0.0 {
            return Ok((z, delta));
        }
        log::debug!("z not positive at delta = {delta:.3e} (min z/d = {lo:.3e}), halving");
        delta *= 0.5;
    }
    Err(Error::Barrier(format!("z stays nonpositive after {MAX_HALVINGS} halvings of the boundary layer")))
}

/// Torsion function `-Δ_p ŵ = 1` and its gradient bound.
pub fn build_torsion(mesh: &Arc<Mesh>, cfg: &PlapConfig) -> Result<(ScalarField, f64)> {
    let w = plap_solve(mesh, &Load::constant(1.0), cfg)?.u;
    let l = norm_sup_grad(&w);
    Ok((w, l))
}

#[derive(Debug, Clone)]
pub struct SingularBarrier {
    pub w: ScalarField,
    pub c2: f64,
    pub c3: f64,
    /// Sup-norm differences between successive outer iterates.
    pub history: Vec<f64>,
}

/// Outer-loop stopping threshold on successive sup differences.
pub const SINGULAR_TOL: f64 = 1e-8;
pub const SINGULAR_MAX_ITER: usize = 100;

/// Solves `-Δ_p w = w^{-γ}` by relaxed fixed-point iteration starting at the
/// torsion function.
///
/// The plain map `w -> S(w^{-γ})` has slope `-γ/(p-1)` along scalings of `w`;
/// the relaxation factor `1/(1 + γ/(p-1))` cancels it.
pub fn build_singular_barrier(mesh: &Arc<Mesh>, cfg: &PlapConfig, gamma: f64) -> Result<SingularBarrier> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Hypothesis(format!("singular exponent must lie in (0, 1), got {gamma}")));
    }
    let floor = 1e-4 * mesh.min_interior_dist();
    let nc = mesh.num_cells();
    let dc = mesh.cell_center_dist();
    // w ≈ (w̄ / d_c) d inside a cell, so the cell mean of w^{-γ} picks up mean(d^{-γ}) / d_c^{-γ}
    let shape: Vec<f64> = (0..nc).map(|c| mesh.cell_mean_dist_pow(c, -gamma) * dc[c].powf(gamma)).collect();
    let lambda = 1.0 / (1.0 + gamma / (cfg.p - 1.0));

    let (mut w, _) = build_torsion(mesh, cfg)?;
    let mut history = Vec::new();
    for _ in 0..SINGULAR_MAX_ITER {
        let load: Vec<f64> =
            (0..nc).map(|c| mesh.cell_average(w.values(), c).max(floor).powf(-gamma) * shape[c]).collect();
        let next = plap_solve_from(mesh, &Load::Cells(load), cfg, Some(w.values()))?.u;
        let next = w.combine(1.0 - lambda, &next, lambda);
        let diff = next.sup_diff(&w);
        history.push(diff);
        w = next;
        if diff < SINGULAR_TOL {
            let (c2, c3) = ratio_range(&w);
            return Ok(SingularBarrier { w, c2, c3, history });
        }
    }
    Err(Error::IterationLimit {
        what: "singular barrier iteration",
        iterations: SINGULAR_MAX_ITER,
        residual: *history.last().unwrap(),
        last: Some(Trace(w.into_values())),
        history: Trace(history),
    })
}

/// Barrier fields for one component.
#[derive(Debug, Clone)]
pub struct ComponentBarriers {
    pub p: f64,
    pub s: f64,
    pub y: ScalarField,
    pub z: ScalarField,
    pub w_hat: ScalarField,
    pub w_sing: Option<SingularBarrier>,
    /// Layer width actually used for `z`.
    pub delta: f64,
    /// `min z/d`, `max y/d`.
    pub c0: f64,
    pub c1: f64,
    pub l_hat: f64,
    /// `max(l_hat, max ŵ/d over d >= delta)`.
    pub l: f64,
}

#[derive(Debug, Clone)]
pub struct BarrierOptions {
    /// Layer width; default 10% of the inradius.
    pub delta: Option<f64>,
    /// Exponent of the singular barrier; `None` skips it.
    pub gamma_sing: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { delta: None, gamma_sing: None, tol: 1e-10, max_iter: 200 }
    }
}

impl BarrierOptions {
    fn plap(&self, p: f64) -> PlapConfig {
        PlapConfig { tol: self.tol, max_iter: self.max_iter, ..PlapConfig::new(p) }
    }
}

/// Midpoint of the admissible band `(max |s_i|, 1)` for the singular exponent.
pub fn default_gamma_sing(s: [f64; 2]) -> f64 {
    (s[0].abs().max(s[1].abs()) + 1.0) / 2.0
}

pub fn build_component(mesh: &Arc<Mesh>, p: f64, s: f64, opts: &BarrierOptions) -> Result<ComponentBarriers> {
    let cfg = opts.plap(p);
    let delta = opts.delta.unwrap_or(0.1 * mesh.inradius());
    let y = build_y(mesh, &cfg, s)?;
    let (z, delta) = build_z(mesh, &cfg, s, delta)?;
    let (w_hat, l_hat) = build_torsion(mesh, &cfg)?;
    let w_sing = opts.gamma_sing.map(|g| build_singular_barrier(mesh, &cfg, g)).transpose()?;
    let (c0, _) = ratio_range(&z);
    let (_, c1) = ratio_range(&y);
    let dist = mesh.dist();
    let l = mesh
        .interior_nodes()
        .filter(|&i| dist[i] >= delta)
        .map(|i| w_hat.values()[i] / dist[i])
        .fold(l_hat, f64::max);
    Ok(ComponentBarriers { p, s, y, z, w_hat, w_sing, delta, c0, c1, l_hat, l })
}

#[derive(Debug, Clone)]
pub struct BarrierSet {
    pub comp: [ComponentBarriers; 2],
    /// Common constants: `min_i c0_i`, `max_i c1_i`, and the singular-barrier
    /// squeeze constants (NaN when the singular barrier was skipped).
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub gamma_sing: Option<f64>,
}

/// Builds both components concurrently.
pub fn build_barrier_set(mesh: &Arc<Mesh>, p: [f64; 2], s: [f64; 2], opts: &BarrierOptions) -> Result<BarrierSet> {
    let (a, b) = rayon::join(|| build_component(mesh, p[0], s[0], opts), || build_component(mesh, p[1], s[1], opts));
    let comp = [a?, b?];
    let c0 = comp[0].c0.min(comp[1].c0);
    let c1 = comp[0].c1.max(comp[1].c1);
    let sing: Vec<&SingularBarrier> = comp.iter().filter_map(|c| c.w_sing.as_ref()).collect();
    let (c2, c3) = if sing.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (sing.iter().map(|w| w.c2).fold(f64::INFINITY, f64::min), sing.iter().map(|w| w.c3).fold(0.0, f64::max))
    };
    Ok(BarrierSet { comp, c0, c1, c2, c3, gamma_sing: opts.gamma_sing })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Component {
    pub min_z_d: f64,
    pub max_z_d: f64,
    pub min_y_d: f64,
    pub max_y_d: f64,
    pub z_le_y: bool,
    /// `c0 d <= z` and `y <= c1 d` with the stored constants.
    pub bounds_hold: bool,
    /// `ŵ <= L d`.
    pub torsion_bound: bool,
    /// Relative change of `(min z/d, max y/d)` against a refined set.
    pub drift: Option<(f64, f64)>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Report {
    pub components: [Lemma2Component; 2],
    pub pass: bool,
    /// Some component's ratios moved by more than 20% under refinement.
    pub suspect: bool,
}

pub const DRIFT_LIMIT: f64 = 0.2;

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn check_component(c: &ComponentBarriers, refined: Option<&ComponentBarriers>) -> Lemma2Component {
    const REL: f64 = 1e-12;
    let mesh = c.y.mesh();
    let (y, z, w, d) = (c.y.values(), c.z.values(), c.w_hat.values(), mesh.dist());
    let (min_z_d, max_z_d) = ratio_range(&c.z);
    let (min_y_d, max_y_d) = ratio_range(&c.y);
    let z_le_y = mesh.interior_nodes().all(|i| z[i] <= y[i] + REL * y[i].abs());
    let bounds_hold = mesh.interior_nodes().all(|i| c.c0 * d[i] <= z[i] * (1.0 + REL) && y[i] <= c.c1 * d[i] * (1.0 + REL));
    let torsion_bound = mesh.interior_nodes().all(|i| w[i] <= c.l * d[i] * (1.0 + REL));
    let drift = refined.map(|r| (rel_change(c.c0, r.c0), rel_change(c.c1, r.c1)));
    let pass = min_z_d > 0.0 && z_le_y && bounds_hold;
    Lemma2Component { min_z_d, max_z_d, min_y_d, max_y_d, z_le_y, bounds_hold, torsion_bound, drift, pass }
}

/// Checks `c0 d <= z <= y <= c1 d` on interior nodes; with a refined set,
/// also reports the drift of the fitted constants.
pub fn verify_lemma2(bs: &BarrierSet, refined: Option<&BarrierSet>) -> Lemma2Report {
    let components = [
        check_component(&bs.comp[0], refined.map(|r| &r.comp[0])),
        check_component(&bs.comp[1], refined.map(|r| &r.comp[1])),
    ];
    let pass = components.iter().all(|c| c.pass);
    let suspect = components.iter().any(|c| c.drift.is_some_and(|(a, b)| a > DRIFT_LIMIT || b > DRIFT_LIMIT));
    Lemma2Report { components, pass, suspect }
}
