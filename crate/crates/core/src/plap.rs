//! Dirichlet problems `-Δ_p u = g` solved by minimizing the regularized energy
//!
//! ```text
//! J(u) = Σ_cells vol · [ (1/p) ((|∇u|² + ε²)^{p/2} - ε^p) ] - <b, u>
//! ```
//!
//! where `|∇u|²` is the cell gradient of [`Mesh::cell_grad_sq`] and `b` is the
//! assembled load. For `p = 2` this is the standard 3-point / 5-point
//! Laplacian. The minimizer is found by damped Newton with Armijo
//! backtracking, starting from the rescaled `p = 2` solution.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Trace};
use crate::linalg::{dot, pcg, solve_tridiagonal, CsrMatrix};
use crate::mesh::{norm_lr_cells, Mesh, ScalarField};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlapConfig {
    pub p: f64,
    /// Gradient regularization; `None` picks `1e-6 · h_min / diam`.
    pub eps_reg: Option<f64>,
    /// Stationarity tolerance on the volume-normalized energy gradient.
    pub tol: f64,
    pub max_iter: usize,
    pub line_search_shrink: f64,
}

impl PlapConfig {
    pub fn new(p: f64) -> Self {
        Self { p, eps_reg: None, tol: 1e-9, max_iter: 200, line_search_shrink: 0.5 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::Config(format!("p must be in (1, inf), got {}", self.p)));
        }
        if let Some(e) = self.eps_reg {
            if !(e > 0.0) {
                return Err(Error::Config(format!("eps_reg must be positive, got {e}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(Error::Config("line_search_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn eps(&self, mesh: &Mesh) -> f64 {
        self.eps_reg.unwrap_or(1e-6 * mesh.min_spacing() / mesh.diameter())
    }
}

/// Right-hand side of a Dirichlet problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Load {
    /// Nodal values, integrated with lumped (nodal) quadrature.
    Nodal(Vec<f64>),
    /// Values at cell centers.
    Cells(Vec<f64>),
    /// `c0 + c1 · d(x)^mu`, evaluated as exact cell means of `d^mu`.
    Weight { c0: f64, c1: f64, mu: f64 },
    /// `d(x)^s` where `d >= delta`, `-1` in the boundary layer `d < delta`.
    Layered { s: f64, delta: f64 },
}

impl Load {
    pub fn constant(c: f64) -> Self {
        Load::Weight { c0: c, c1: 0.0, mu: 0.0 }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        match self {
            Load::Nodal(v) if v.len() != mesh.num_nodes() => {
                Err(Error::Config(format!("nodal load has {} values for {} nodes", v.len(), mesh.num_nodes())))
            }
            Load::Cells(v) if v.len() != mesh.num_cells() => {
                Err(Error::Config(format!("cell load has {} values for {} cells", v.len(), mesh.num_cells())))
            }
            Load::Weight { c1, mu, .. } if *c1 != 0.0 && !(*mu > -1.0) => Err(Error::NonIntegrableExponent { mu: *mu }),
            Load::Layered { s, .. } if !(*s > -1.0) => Err(Error::NonIntegrableExponent { mu: *s }),
            Load::Layered { delta, .. } if !(*delta > 0.0) => Err(Error::Config("boundary layer must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Cell-center values; `None` for nodal loads.
    pub fn cell_values(&self, mesh: &Mesh) -> Option<Vec<f64>> {
        let nc = mesh.num_cells();
        match self {
            Load::Nodal(_) => None,
            Load::Cells(v) => Some(v.clone()),
            Load::Weight { c0, c1, mu } => {
                Some((0..nc).map(|c| if *c1 == 0.0 { *c0 } else { c0 + c1 * mesh.cell_mean_dist_pow(c, *mu) }).collect())
            }
            Load::Layered { s, delta } => Some(
                (0..nc)
                    .map(|c| if mesh.cell_center_dist()[c] < *delta { -1.0 } else { mesh.cell_mean_dist_pow(c, *s) })
                    .collect(),
            ),
        }
    }

    /// Load vector `b_i ≈ ∫ g φ_i` over all nodes (boundary entries unused).
    pub fn assemble(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        self.validate(mesh)?;
        let mut b = vec![0.0; mesh.num_nodes()];
        match self {
            Load::Nodal(v) => {
                for i in mesh.interior_nodes() {
                    b[i] = v[i] * mesh.dual_volume();
                }
            }
            _ => {
                let cells = self.cell_values(mesh).unwrap();
                let share = mesh.cell_volume() / mesh.nodes_per_cell() as f64;
                for (c, g) in cells.iter().enumerate() {
                    for &i in mesh.cell_nodes(c) {
                        b[i] += g * share;
                    }
                }
            }
        }
        Ok(b)
    }

    /// `‖g‖_r` over the domain.
    pub fn norm_lr(&self, mesh: &Mesh, r: f64) -> Result<f64> {
        self.validate(mesh)?;
        match self {
            Load::Nodal(v) => {
                let s: f64 = v.iter().enumerate().map(|(i, x)| x.abs().powf(r) * mesh.node_weight(i)).sum();
                Ok(s.powf(1.0 / r))
            }
            Load::Cells(v) => Ok(norm_lr_cells(mesh, v, r)),
            Load::Weight { c0, c1, mu } => {
                if *c1 == 0.0 {
                    return Ok(c0.abs() * mesh.measure().powf(1.0 / r));
                }
                if !(mu * r > -1.0) {
                    return Err(Error::NonIntegrableExponent { mu: mu * r });
                }
                let nc = mesh.num_cells();
                let s: f64 = if *c0 == 0.0 {
                    (0..nc).map(|c| mesh.cell_mean_dist_pow(c, mu * r)).sum::<f64>() * c1.abs().powf(r)
                } else {
                    (0..nc)
                        .map(|c| mesh.cell_mean_dist_fn(c, (mu * r).min(0.0), |d| (c0 + c1 * d.powf(*mu)).abs().powf(r)))
                        .sum()
                };
                Ok((s * mesh.cell_volume()).powf(1.0 / r))
            }
            Load::Layered { .. } => Ok(norm_lr_cells(mesh, &self.cell_values(mesh).unwrap(), r)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct PlapSolution {
    pub u: ScalarField,
    pub history: Vec<IterRecord>,
}

impl PlapSolution {
    pub fn residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.residual)
    }
}

/// Local stiffness pattern of one cell: `s = Σ_edges w (u_a - u_b)²`.
struct CellStencil {
    per: usize,
    /// (local a, local b, weight)
    edges: Vec<(usize, usize, f64)>,
}

impl CellStencil {
    fn new(mesh: &Mesh) -> Self {
        let h = mesh.spacing();
        if mesh.dim() == 1 {
            Self { per: 2, edges: vec![(0, 1, 1.0 / (h[0] * h[0]))] }
        } else {
            let wx = 0.5 / (h[0] * h[0]);
            let wy = 0.5 / (h[1] * h[1]);
            Self { per: 4, edges: vec![(0, 1, wx), (2, 3, wx), (0, 2, wy), (1, 3, wy)] }
        }
    }

    /// Returns `s` and `q = S u` for the local values.
    fn eval(&self, local: &[f64; 4], q: &mut [f64; 4]) -> f64 {
        *q = [0.0; 4];
        let mut s = 0.0;
        for &(a, b, w) in &self.edges {
            let d = local[a] - local[b];
            s += w * d * d;
            q[a] += w * d;
            q[b] -= w * d;
        }
        s
    }
}

/// The discrete energy of one Dirichlet problem.
struct Energy<'a> {
    mesh: &'a Mesh,
    p: f64,
    eps: f64,
    b: Vec<f64>,
    stencil: CellStencil,
    /// node -> unknown index
    unknown: Vec<Option<usize>>,
    nodes: Vec<usize>,
}

impl<'a> Energy<'a> {
    fn new(mesh: &'a Mesh, p: f64, eps: f64, b: Vec<f64>) -> Self {
        let mut unknown = vec![None; mesh.num_nodes()];
        let nodes: Vec<usize> = mesh.interior_nodes().collect();
        for (k, &i) in nodes.iter().enumerate() {
            unknown[i] = Some(k);
        }
        Self { mesh, p, eps, b, stencil: CellStencil::new(mesh), unknown, nodes }
    }

    fn local(&self, u: &[f64], cell: usize) -> [f64; 4] {
        let mut l = [0.0; 4];
        for (k, &i) in self.mesh.cell_nodes(cell).iter().enumerate() {
            l[k] = u[i];
        }
        l
    }

    /// Energy and a magnitude scale for roundoff comparisons.
    fn energy(&self, u: &[f64]) -> (f64, f64) {
        let vol = self.mesh.cell_volume();
        let e2 = self.eps * self.eps;
        let ep = self.eps.powf(self.p);
        let mut q = [0.0; 4];
        let mut bulk = 0.0;
        let mut scale = 0.0;
        for c in 0..self.mesh.num_cells() {
            let s = self.stencil.eval(&self.local(u, c), &mut q);
            let t = (s + e2).powf(self.p / 2.0);
            bulk += t - ep;
            scale += t;
        }
        let load: f64 = self.nodes.iter().map(|&i| self.b[i] * u[i]).sum();
        let load_scale: f64 = self.nodes.iter().map(|&i| (self.b[i] * u[i]).abs()).sum();
        (vol * bulk / self.p - load, vol * scale / self.p + load_scale)
    }

    /// Energy gradient over all nodes (boundary entries are zero).
    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let vol = self.mesh.cell_volume();
        let e2 = self.eps * self.eps;
        let mut g = vec![0.0; u.len()];
        let mut q = [0.0; 4];
        for c in 0..self.mesh.num_cells() {
            let s = self.stencil.eval(&self.local(u, c), &mut q);
            let base = s + e2;
            if base == 0.0 {
                continue;
            }
            let kappa = vol * base.powf((self.p - 2.0) / 2.0);
            for (k, &i) in self.mesh.cell_nodes(c).iter().enumerate() {
                g[i] += kappa * q[k];
            }
        }
        for i in 0..u.len() {
            g[i] = if self.unknown[i].is_some() { g[i] - self.b[i] } else { 0.0 };
        }
        g
    }

    /// Roundoff level of the volume-normalized residual at `u`: machine
    /// epsilon times the magnitude of the terms summed into each entry.
    fn residual_floor(&self, u: &[f64]) -> f64 {
        let vol = self.mesh.cell_volume();
        let e2 = self.eps * self.eps;
        let wsum: f64 = self.stencil.edges.iter().map(|e| e.2).sum();
        let mut acc = vec![0.0; u.len()];
        let mut q = [0.0; 4];
        for c in 0..self.mesh.num_cells() {
            let l = self.local(u, c);
            let s = self.stencil.eval(&l, &mut q);
            let base = s + e2;
            if base == 0.0 {
                continue;
            }
            let umax = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let t = vol * base.powf((self.p - 2.0) / 2.0) * wsum * umax;
            for &i in self.mesh.cell_nodes(c) {
                acc[i] += t;
            }
        }
        let w = self.mesh.dual_volume();
        64.0 * f64::EPSILON * self.nodes.iter().map(|&i| (acc[i] + self.b[i].abs()) / w).fold(0.0, f64::max)
    }

    fn residual_of(&self, g: &[f64]) -> f64 {
        let w = self.mesh.dual_volume();
        self.nodes.iter().map(|&i| g[i].abs() / w).fold(0.0, f64::max)
    }

    fn pattern(&self) -> CsrMatrix {
        let mut rows = vec![Vec::new(); self.nodes.len()];
        for c in 0..self.mesh.num_cells() {
            let ids: Vec<usize> = self.mesh.cell_nodes(c).iter().filter_map(|&i| self.unknown[i]).collect();
            for &a in &ids {
                rows[a].extend_from_slice(&ids);
            }
        }
        CsrMatrix::from_pattern(rows)
    }

    fn hessian(&self, u: &[f64], h: &mut CsrMatrix) {
        h.clear();
        let vol = self.mesh.cell_volume();
        let e2 = self.eps * self.eps;
        let mut q = [0.0; 4];
        let per = self.stencil.per;
        for c in 0..self.mesh.num_cells() {
            let s = self.stencil.eval(&self.local(u, c), &mut q);
            let base = s + e2;
            let kappa = vol * base.powf((self.p - 2.0) / 2.0);
            let rank1 = (self.p - 2.0) / base;
            let nodes = self.mesh.cell_nodes(c);
            let mut local = [[0.0; 4]; 4];
            for &(a, b, w) in &self.stencil.edges {
                local[a][a] += w;
                local[b][b] += w;
                local[a][b] -= w;
                local[b][a] -= w;
            }
            for a in 0..per {
                for b in 0..per {
                    local[a][b] = kappa * (local[a][b] + rank1 * q[a] * q[b]);
                }
            }
            for a in 0..per {
                let Some(ia) = self.unknown[nodes[a]] else { continue };
                for b in 0..per {
                    let Some(ib) = self.unknown[nodes[b]] else { continue };
                    let k = h.slot(ia, ib);
                    h.vals[k] += local[a][b];
                }
            }
        }
    }

    fn linear_solve(&self, h: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        if h.is_tridiagonal() {
            solve_tridiagonal(h, rhs)
        } else {
            let mut x = vec![0.0; rhs.len()];
            pcg(h, rhs, &mut x, 1e-11, 20 * h.n + 100)?;
            Ok(x)
        }
    }
}

/// Volume-normalized residual of the discrete weak form, using the
/// unregularized flux `|∇u|^{p-2} ∇u`.
pub fn plap_residual(mesh: &Mesh, p: f64, u: &ScalarField, g: &Load) -> Result<f64> {
    let b = g.assemble(mesh)?;
    let e = Energy::new(mesh, p, 0.0, b);
    Ok(e.residual_of(&e.gradient(u.values())))
}

/// Solves `-Δ_p u = g`, `u = 0` on the boundary.
pub fn plap_solve(mesh: &Arc<Mesh>, g: &Load, cfg: &PlapConfig) -> Result<PlapSolution> {
    plap_solve_from(mesh, g, cfg, None)
}

/// As [`plap_solve`], optionally warm-started from a nodal guess.
pub fn plap_solve_from(mesh: &Arc<Mesh>, g: &Load, cfg: &PlapConfig, initial: Option<&[f64]>) -> Result<PlapSolution> {
    cfg.validate()?;
    let b = g.assemble(mesh)?;
    let eps = cfg.eps(mesh);
    let p = cfg.p;

    let mut u = match initial {
        Some(v) => {
            let mut v = v.to_vec();
            for i in 0..v.len() {
                if mesh.is_boundary(i) {
                    v[i] = 0.0;
                }
            }
            v
        }
        None => {
            let lin = Energy::new(mesh, 2.0, eps, b.clone());
            let mut h = lin.pattern();
            let zero = vec![0.0; mesh.num_nodes()];
            lin.hessian(&zero, &mut h);
            let rhs: Vec<f64> = lin.nodes.iter().map(|&i| b[i]).collect();
            let x = lin.linear_solve(&h, &rhs)?;
            let mut u = vec![0.0; mesh.num_nodes()];
            for (k, &i) in lin.nodes.iter().enumerate() {
                u[i] = x[k];
            }
            if (p - 2.0).abs() > 1.0 {
                // continuation in unit steps of p
                let mut q = 2.0;
                while (p - q).abs() > 1.0 {
                    q += (p - q).signum();
                    rescale(mesh, q, &b, &mut u);
                    let stage = Energy::new(mesh, q, eps, b.clone());
                    newton(&stage, &mut u, 1e-6_f64.max(cfg.tol), cfg.max_iter, cfg.line_search_shrink)?;
                }
            }
            rescale(mesh, p, &b, &mut u);
            if p < 2.0 {
                // the Hessian blows up where ∇u -> 0; walk eps down from the gradient scale
                let g_max = (0..mesh.num_cells()).map(|c| mesh.cell_grad_sq(&u, c)).fold(0.0, f64::max).sqrt();
                let mut e = 0.1 * g_max;
                while e > 10.0 * eps {
                    let stage = Energy::new(mesh, p, e, b.clone());
                    newton(&stage, &mut u, 1e-7_f64.max(cfg.tol), cfg.max_iter, cfg.line_search_shrink)?;
                    e *= 0.1;
                }
            }
            u
        }
    };

    let energy = Energy::new(mesh, p, eps, b);
    let history = newton(&energy, &mut u, cfg.tol, cfg.max_iter, cfg.line_search_shrink)?;
    Ok(PlapSolution { u: ScalarField::new(mesh.clone(), u)?, history })
}

/// Multiplies `u` by the `t` minimizing the homogeneous energy along `t u`.
fn rescale(mesh: &Mesh, p: f64, b: &[f64], u: &mut [f64]) {
    let vol = mesh.cell_volume();
    let a: f64 = (0..mesh.num_cells()).map(|c| mesh.cell_grad_sq(u, c).powf(p / 2.0)).sum::<f64>() * vol;
    let bu = dot(b, u);
    if a > 0.0 && bu != 0.0 && bu.is_finite() {
        let t = bu.signum() * (bu.abs() / a).powf(1.0 / (p - 1.0));
        u.iter_mut().for_each(|v| *v *= t);
    }
}

fn newton(e: &Energy, u: &mut [f64], tol: f64, max_iter: usize, shrink: f64) -> Result<Vec<IterRecord>> {
    let mut history = Vec::new();
    let mut h = e.pattern();
    let (mut j, mut scale) = e.energy(u);
    for it in 0..=max_iter {
        let g = e.gradient(u);
        let res = e.residual_of(&g);
        history.push(IterRecord { iteration: it, energy: j, residual: res });
        if res <= tol || res <= e.residual_floor(u) {
            return Ok(history);
        }
        if it == max_iter {
            break;
        }
        let gu: Vec<f64> = e.nodes.iter().map(|&i| g[i]).collect();
        e.hessian(u, &mut h);
        let neg: Vec<f64> = gu.iter().map(|v| -v).collect();
        let newton_dir = e.linear_solve(&h, &neg).ok().filter(|d| dot(d, &gu) < 0.0);
        let diag: Vec<f64> = h.diagonal().collect();
        let steepest: Vec<f64> = gu.iter().zip(&diag).map(|(g, d)| -g / d.max(f64::MIN_POSITIVE)).collect();

        let mut accepted = false;
        for dir in newton_dir.iter().chain(std::iter::once(&steepest)) {
            let slope = dot(dir, &gu);
            let mut t = 1.0;
            while t > 1e-14 {
                let mut trial = u.to_vec();
                for (k, &i) in e.nodes.iter().enumerate() {
                    trial[i] += t * dir[k];
                }
                let (jt, st) = e.energy(&trial);
                let armijo = jt <= j + 1e-4 * t * slope;
                // below roundoff the energy cannot rank iterates; use the residual
                let flat = jt - j <= 1e-13 * scale.max(st) && e.residual_of(&e.gradient(&trial)) < res;
                if armijo || flat {
                    u.copy_from_slice(&trial);
                    j = jt.min(j);
                    scale = st;
                    accepted = true;
                    break;
                }
                t *= shrink;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    let res = history.last().map_or(f64::NAN, |r| r.residual);
    Err(Error::IterationLimit {
        what: "p-Laplacian Newton solve",
        iterations: history.len().saturating_sub(1),
        residual: res,
        last: Some(Trace(u.to_vec())),
        history: Trace(history.iter().map(|r| r.residual).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn line(n: usize) -> Arc<Mesh> {
        build_mesh(1, &[(0.0, 1.0)], &[n]).unwrap()
    }

    #[test]
    fn linear_torsion_is_exact() {
        let mesh = line(257);
        let sol = plap_solve(&mesh, &Load::constant(1.0), &PlapConfig::new(2.0)).unwrap();
        let err = (0..mesh.num_nodes())
            .map(|i| {
                let x = mesh.coords(i)[0];
                (sol.u.values()[i] - x * (1.0 - x) / 2.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn cubic_torsion_matches_closed_form() {
        let mesh = line(257);
        let sol = plap_solve(&mesh, &Load::constant(1.0), &PlapConfig::new(3.0)).unwrap();
        let err = (0..mesh.num_nodes())
            .map(|i| {
                let x = mesh.coords(i)[0];
                let exact = 2.0 / 3.0 * (0.5f64.powf(1.5) - (x - 0.5).abs().powf(1.5));
                (sol.u.values()[i] - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "err {err}");
    }

    #[test]
    fn zero_load_gives_zero() {
        let mesh = line(33);
        let sol = plap_solve(&mesh, &Load::constant(0.0), &PlapConfig::new(2.0)).unwrap();
        assert!(sol.u.values().iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn residual_of_zero_field_is_the_load() {
        let mesh = line(65);
        let z = ScalarField::zeros(mesh.clone());
        let r = plap_residual(&mesh, 2.0, &z, &Load::constant(1.0)).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn residual_of_exact_linear_torsion_vanishes() {
        for n in [9, 65, 300] {
            let mesh = line(n);
            let u = ScalarField::from_fn(mesh.clone(), |x| x[0] * (1.0 - x[0]) / 2.0);
            let r = plap_residual(&mesh, 2.0, &u, &Load::constant(1.0)).unwrap();
            assert!(r < 1e-10, "n={n} r={r}");
        }
    }

    #[test]
    fn solver_meets_its_tolerance() {
        let mesh = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[21, 21]).unwrap();
        for p in [1.5, 2.0, 3.0, 4.5] {
            let cfg = PlapConfig::new(p);
            let g = Load::Weight { c0: 1.0, c1: 0.5, mu: -0.3 };
            let sol = plap_solve(&mesh, &g, &cfg).unwrap();
            let r = plap_residual(&mesh, p, &sol.u, &g).unwrap();
            assert!(sol.residual() <= cfg.tol);
            assert!(r <= 10.0 * cfg.tol, "p={p} residual {r}");
            assert!(sol.u.is_dirichlet());
        }
    }

    #[test]
    fn energy_history_is_nonincreasing() {
        let mesh = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[17, 17]).unwrap();
        for p in [1.5, 3.0, 5.0] {
            let sol = plap_solve(&mesh, &Load::constant(2.0), &PlapConfig::new(p)).unwrap();
            for w in sol.history.windows(2) {
                assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs().max(1.0), "p={p}");
            }
        }
    }

    #[test]
    fn rejects_nonintegrable_weight() {
        let mesh = line(17);
        let g = Load::Weight { c0: 0.0, c1: 1.0, mu: -1.0 };
        assert!(matches!(plap_solve(&mesh, &g, &PlapConfig::new(2.0)), Err(Error::NonIntegrableExponent { .. })));
    }

    #[test]
    fn iteration_limit_carries_last_iterate() {
        let mesh = line(65);
        let mut cfg = PlapConfig::new(4.0);
        cfg.max_iter = 1;
        cfg.tol = 1e-14;
        match plap_solve(&mesh, &Load::constant(1.0), &cfg) {
            Err(Error::IterationLimit { last: Some(v), history, .. }) => {
                assert_eq!(v.0.len(), 65);
                assert!(!history.0.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scaling_law_for_constant_loads() {
        let mesh = line(129);
        for p in [1.5, 3.0] {
            let cfg = PlapConfig::new(p).with_tol(1e-10);
            let u1 = plap_solve(&mesh, &Load::constant(1.0), &cfg).unwrap().u;
            let u3 = plap_solve(&mesh, &Load::constant(3.0), &cfg).unwrap().u;
            let f = 3f64.powf(1.0 / (p - 1.0));
            assert!(u3.sup_diff(&u1.scaled(f)) < 1e-8, "p={p}");
        }
    }
}
