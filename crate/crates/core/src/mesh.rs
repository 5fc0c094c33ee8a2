//! Structured grids on an interval or an axis-aligned rectangle.
//!
//! Nodes are numbered `i + nx * j`. Cells are the grid intervals (1D) or
//! rectangles (2D); a cell is numbered by its lower-left node. All
//! discrete operators in the crate share two gradient notions:
//!
//! * the *cell gradient*, built from the edge differences of a cell, which
//!   is what the energy and the frozen loads see;
//! * the *nodal gradient* ([`gradient`]), second-order finite differences
//!   used for sup-norms of the gradient.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    extents: Vec<(f64, f64)>,
    n: Vec<usize>,
    h: Vec<f64>,
    boundary: Vec<bool>,
    dist: Vec<f64>,
    cell_nodes: Vec<usize>,
    /// Per cell: the axis-face distance that is smallest at the cell center,
    /// as the range `(a, b)` it sweeps across the cell.
    cell_dist_range: Vec<(f64, f64)>,
    cell_center_dist: Vec<f64>,
}

impl Mesh {
    /// Builds a mesh with `n[k]` nodes along axis `k` of `extents[k]`.
    pub fn new(dim: usize, extents: &[(f64, f64)], n: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("mesh dimension must be 1 or 2, got {dim}")));
        }
        if extents.len() != dim || n.len() != dim {
            return Err(Error::Config(format!(
                "expected {dim} extents and node counts, got {} and {}",
                extents.len(),
                n.len()
            )));
        }
        for k in 0..dim {
            let (lo, hi) = extents[k];
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!("degenerate extent [{lo}, {hi}] on axis {k}")));
            }
            if n[k] < 3 {
                return Err(Error::Config(format!("axis {k} needs at least 3 nodes, got {}", n[k])));
            }
        }
        let h: Vec<f64> = (0..dim).map(|k| (extents[k].1 - extents[k].0) / (n[k] - 1) as f64).collect();
        let nx = n[0];
        let ny = if dim == 2 { n[1] } else { 1 };
        let nn = nx * ny;

        let mut boundary = vec![false; nn];
        let mut dist = vec![0.0; nn];
        for j in 0..ny {
            for i in 0..nx {
                let idx = i + nx * j;
                let on_x = i == 0 || i == nx - 1;
                let on_y = dim == 2 && (j == 0 || j == ny - 1);
                boundary[idx] = on_x || on_y;
                if boundary[idx] {
                    continue;
                }
                // grid distances are taken from the index so that boundary
                // symmetry is exact in floating point
                let mut d = axis_dist(i, nx, h[0]);
                if dim == 2 {
                    d = d.min(axis_dist(j, ny, h[1]));
                }
                dist[idx] = d;
            }
        }

        let cx = nx - 1;
        let cy = if dim == 2 { ny - 1 } else { 1 };
        let nc = cx * cy;
        let per = 1 << dim;
        let mut cell_nodes = Vec::with_capacity(nc * per);
        let mut cell_dist_range = Vec::with_capacity(nc);
        let mut cell_center_dist = Vec::with_capacity(nc);
        for j in 0..cy {
            for i in 0..cx {
                let a = i + nx * j;
                if dim == 1 {
                    cell_nodes.extend_from_slice(&[a, a + 1]);
                } else {
                    cell_nodes.extend_from_slice(&[a, a + 1, a + nx, a + nx + 1]);
                }
                // candidate (range-at-center, lo, hi) per axis face
                let mut best = face_range(i, nx, h[0]);
                if dim == 2 {
                    let fy = face_range(j, ny, h[1]);
                    if fy.0 < best.0 {
                        best = fy;
                    }
                }
                cell_center_dist.push(best.0);
                cell_dist_range.push((best.1, best.2));
            }
        }

        Ok(Self {
            dim,
            extents: extents.to_vec(),
            n: n.to_vec(),
            h,
            boundary,
            dist,
            cell_nodes,
            cell_dist_range,
            cell_center_dist,
        })
    }

    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(1, &[(lo, hi)], &[n])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        Self::new(2, &[x, y], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn min_spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn num_nodes(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_center_dist.len()
    }

    pub fn nodes_per_cell(&self) -> usize {
        1 << self.dim
    }

    pub fn nx(&self) -> usize {
        self.n[0]
    }

    pub fn ny(&self) -> usize {
        if self.dim == 2 {
            self.n[1]
        } else {
            1
        }
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    /// Distance-to-boundary at every node.
    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(|&i| !self.boundary[i])
    }

    /// Node coordinates; the second entry is 0 on 1D meshes.
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let nx = self.n[0];
        let (i, j) = (node % nx, node / nx);
        let x = self.extents[0].0 + i as f64 * self.h[0];
        let y = if self.dim == 2 { self.extents[1].0 + j as f64 * self.h[1] } else { 0.0 };
        [x, y]
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let per = self.nodes_per_cell();
        &self.cell_nodes[cell * per..(cell + 1) * per]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Volume of the dual cell of an interior node (equal to the cell volume).
    pub fn dual_volume(&self) -> f64 {
        self.cell_volume()
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let nodes = self.cell_nodes(cell);
        let a = self.coords(nodes[0]);
        let b = self.coords(*nodes.last().unwrap());
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
    }

    pub fn cell_center_dist(&self) -> &[f64] {
        &self.cell_center_dist
    }

    /// Mean of `d^mu` over a cell, integrated exactly along the direction of
    /// the nearest boundary face. Finite for `mu > -1`, including boundary
    /// cells where `d` vanishes on one face.
    pub fn cell_mean_dist_pow(&self, cell: usize, mu: f64) -> f64 {
        let (a, b) = self.cell_dist_range[cell];
        if mu == 0.0 {
            return 1.0;
        }
        let e = mu + 1.0;
        (b.powf(e) - a.powf(e)) / (e * (b - a))
    }

    /// Mean of `F(d)` over a cell for an arbitrary `F` with an integrable
    /// singularity of order at most `d^mu_lead` at the boundary.
    pub fn cell_mean_dist_fn(&self, cell: usize, mu_lead: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (a, b) = self.cell_dist_range[cell];
        if a > 0.0 || mu_lead >= 0.0 {
            return gauss_legendre(|t| f(a + (b - a) * t));
        }
        // t = s^m makes the integrand s^{m(mu+1)-1}, bounded once m(mu+1) >= 2
        let m = (2.0 / (mu_lead + 1.0)).ceil().max(1.0);
        gauss_legendre(|s| m * s.powf(m - 1.0) * f(a + (b - a) * s.powf(m)))
    }

    /// Trapezoidal quadrature weight of a node.
    pub fn node_weight(&self, node: usize) -> f64 {
        let nx = self.n[0];
        let idx = [node % nx, node / nx];
        (0..self.dim)
            .map(|k| {
                let end = idx[k] == 0 || idx[k] == self.n[k] - 1;
                if end {
                    self.h[k] / 2.0
                } else {
                    self.h[k]
                }
            })
            .product()
    }

    /// Measure of the domain.
    pub fn measure(&self) -> f64 {
        self.extents.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn diameter(&self) -> f64 {
        self.extents.iter().map(|(lo, hi)| (hi - lo).powi(2)).sum::<f64>().sqrt()
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> f64 {
        self.extents.iter().map(|(lo, hi)| (hi - lo) / 2.0).fold(f64::INFINITY, f64::min)
    }

    pub fn min_interior_dist(&self) -> f64 {
        self.interior_nodes().map(|i| self.dist[i]).fold(f64::INFINITY, f64::min)
    }

    /// Mean of the nodal values over a cell's corners.
    pub fn cell_average(&self, values: &[f64], cell: usize) -> f64 {
        let nodes = self.cell_nodes(cell);
        nodes.iter().map(|&i| values[i]).sum::<f64>() / nodes.len() as f64
    }

    /// Squared cell-gradient magnitude: the mean of the squared edge
    /// differences along each axis.
    pub fn cell_grad_sq(&self, values: &[f64], cell: usize) -> f64 {
        let c = self.cell_nodes(cell);
        if self.dim == 1 {
            let g = (values[c[1]] - values[c[0]]) / self.h[0];
            g * g
        } else {
            let (hx, hy) = (self.h[0], self.h[1]);
            let gxb = (values[c[1]] - values[c[0]]) / hx;
            let gxt = (values[c[3]] - values[c[2]]) / hx;
            let gyl = (values[c[2]] - values[c[0]]) / hy;
            let gyr = (values[c[3]] - values[c[1]]) / hy;
            0.5 * (gxb * gxb + gxt * gxt + gyl * gyl + gyr * gyr)
        }
    }
}

fn axis_dist(i: usize, n: usize, h: f64) -> f64 {
    i.min(n - 1 - i) as f64 * h
}

/// For the cell `[i, i+1]` along an axis with `n` nodes: the distance to the
/// nearer end at the cell center, and the range of that distance over the cell.
fn face_range(i: usize, n: usize, h: f64) -> (f64, f64, f64) {
    let left = (i as f64 + 0.5) * h;
    let right = ((n - 1 - i) as f64 - 0.5) * h;
    if left <= right {
        (left, i as f64 * h, (i + 1) as f64 * h)
    } else {
        let k = n - 2 - i;
        (right, k as f64 * h, (k + 1) as f64 * h)
    }
}

/// Eight-point Gauss-Legendre rule on `[0, 1]`.
fn gauss_legendre(f: impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let mut acc = 0.0;
    for k in 0..4 {
        acc += W[k] * (f(0.5 * (1.0 - X[k])) + f(0.5 * (1.0 + X[k])));
    }
    0.5 * acc
}

/// Builds a shared mesh.
pub fn build_mesh(dim: usize, extents: &[(f64, f64)], n: &[usize]) -> Result<Arc<Mesh>> {
    Mesh::new(dim, extents, n).map(Arc::new)
}

/// Nodal values of a function on a mesh.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::Config(format!(
                "field has {} values, mesh has {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.num_nodes()];
        Self { mesh, values }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..mesh.num_nodes()).map(|i| f(mesh.coords(i))).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Self { mesh: self.mesh.clone(), values }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_diff(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// True when every boundary value is exactly zero.
    pub fn is_dirichlet(&self) -> bool {
        self.mesh.boundary_mask().iter().zip(&self.values).all(|(&b, &v)| !b || v == 0.0)
    }
}

/// Per-axis nodal gradient.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub components: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn magnitude(&self, node: usize) -> f64 {
        self.components.iter().map(|c| c[node] * c[node]).sum::<f64>().sqrt()
    }

    pub fn len(&self) -> usize {
        self.components[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Centered differences inside, second-order one-sided differences on the
/// boundary of each axis.
pub fn gradient(f: &ScalarField) -> Gradient {
    let mesh = f.mesh();
    let v = f.values();
    let nx = mesh.nx();
    let ny = mesh.ny();
    let mut components = Vec::with_capacity(mesh.dim());
    for k in 0..mesh.dim() {
        let h = mesh.spacing()[k];
        let (len, stride) = if k == 0 { (nx, 1) } else { (ny, nx) };
        let mut g = vec![0.0; v.len()];
        for node in 0..v.len() {
            let pos = if k == 0 { node % nx } else { node / nx };
            g[node] = if pos == 0 {
                (-3.0 * v[node] + 4.0 * v[node + stride] - v[node + 2 * stride]) / (2.0 * h)
            } else if pos == len - 1 {
                (3.0 * v[node] - 4.0 * v[node - stride] + v[node - 2 * stride]) / (2.0 * h)
            } else {
                (v[node + stride] - v[node - stride]) / (2.0 * h)
            };
        }
        components.push(g);
    }
    Gradient { components }
}

/// Largest nodal gradient magnitude.
pub fn norm_sup_grad(f: &ScalarField) -> f64 {
    let g = gradient(f);
    (0..g.len()).map(|i| g.magnitude(i)).fold(0.0, f64::max)
}

/// Trapezoidal `L^r` norm of a nodal field.
pub fn norm_lr(f: &ScalarField, r: f64) -> f64 {
    let mesh = f.mesh();
    let s: f64 = f.values().iter().enumerate().map(|(i, v)| v.abs().powf(r) * mesh.node_weight(i)).sum();
    s.powf(1.0 / r)
}

/// `L^r` norm of cell-centered data.
pub fn norm_lr_cells(mesh: &Mesh, cells: &[f64], r: f64) -> f64 {
    let s: f64 = cells.iter().map(|v| v.abs().powf(r)).sum::<f64>() * mesh.cell_volume();
    s.powf(1.0 / r)
}

/// `∫ d^mu f` using cell-center values of `f` and the exact cell mean of `d^mu`.
pub fn integrate_singular(mu: f64, f: &ScalarField) -> Result<f64> {
    if !(mu > -1.0) {
        return Err(Error::NonIntegrableExponent { mu });
    }
    let mesh = f.mesh();
    let v = f.values();
    let s: f64 = (0..mesh.num_cells()).map(|c| mesh.cell_mean_dist_pow(c, mu) * mesh.cell_average(v, c)).sum();
    Ok(s * mesh.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn interval_distance() {
        let m = Mesh::interval(0.0, 1.0, 5).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.25, 0.0];
        for (d, e) in m.dist().iter().zip(expect) {
            close(*d, e, 1e-15);
        }
        assert_eq!(m.boundary_mask(), &[true, false, false, false, true]);
    }

    #[test]
    fn square_center_distance() {
        let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 3, 3).unwrap();
        close(m.dist()[4], 0.5, 1e-15);
        assert_eq!(m.interior_nodes().count(), 1);
    }

    #[test]
    fn rectangle_distance_is_min_of_axes() {
        let m = Mesh::rectangle((0.0, 2.0), (0.0, 1.0), 9, 5).unwrap();
        // (1.0, 0.5) is node (4, 2)
        let node = 4 + 9 * 2;
        assert_eq!(m.coords(node), [1.0, 0.5]);
        close(m.dist()[node], 0.5, 1e-15);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(Mesh::new(3, &[(0.0, 1.0); 3], &[3, 3, 3]).is_err());
        assert!(Mesh::interval(0.0, 1.0, 2).is_err());
        assert!(Mesh::interval(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn distance_is_lipschitz_and_positive_inside() {
        let m = Mesh::rectangle((0.0, 1.3), (-0.5, 0.7), 14, 11).unwrap();
        for i in 0..m.num_nodes() {
            assert_eq!(m.dist()[i] == 0.0, m.is_boundary(i));
        }
        let nx = m.nx();
        for j in 0..m.ny() {
            for i in 0..nx - 1 {
                let a = i + nx * j;
                assert!((m.dist()[a] - m.dist()[a + 1]).abs() <= m.spacing()[0] + 1e-14);
            }
        }
    }

    #[test]
    fn affine_gradient_is_exact() {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[9]).unwrap();
        let f = ScalarField::from_fn(mesh.clone(), |x| 3.0 * x[0]);
        let g = gradient(&f);
        for v in &g.components[0] {
            close(*v, 3.0, 1e-13);
        }
        let z = ScalarField::zeros(mesh);
        assert_eq!(norm_sup_grad(&z), 0.0);
    }

    #[test]
    fn quadratic_centered_gradient() {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[5]).unwrap();
        let f = ScalarField::from_fn(mesh, |x| x[0] * x[0]);
        let g = gradient(&f);
        close(g.components[0][2], 1.0, 1e-14);
        // one-sided rule is exact for quadratics too
        close(g.components[0][0], 0.0, 1e-14);
        close(g.components[0][4], 2.0, 1e-14);
    }

    #[test]
    fn sup_grad_of_torsion_profile() {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[257]).unwrap();
        let f = ScalarField::from_fn(mesh, |x| x[0] * (1.0 - x[0]) / 2.0);
        close(norm_sup_grad(&f), 0.5, 2.0 / 256.0);
    }

    #[test]
    fn lr_norms() {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[257]).unwrap();
        let one = ScalarField::from_fn(mesh.clone(), |_| 1.0);
        for r in [1.0, 2.0, 3.5] {
            close(norm_lr(&one, r), 1.0, 1e-12);
        }
        let x = ScalarField::from_fn(mesh, |x| x[0]);
        close(norm_lr(&x, 2.0), (1.0f64 / 3.0).sqrt(), 1e-3);

        let sq = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[17, 17]).unwrap();
        let two = ScalarField::from_fn(sq, |_| 2.0);
        close(norm_lr(&two, 2.0), 2.0, 1e-12);
    }

    #[test]
    fn singular_integrals() {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[513]).unwrap();
        let one = ScalarField::from_fn(mesh.clone(), |_| 1.0);
        close(integrate_singular(0.0, &one).unwrap(), 1.0, 1e-12);
        // ∫_0^1 min(x, 1-x)^{-1/2} dx = 4 (1/2)^{1/2}
        close(integrate_singular(-0.5, &one).unwrap(), 2.0 * 2f64.sqrt(), 0.01);
        assert!(matches!(integrate_singular(-1.0, &one), Err(Error::NonIntegrableExponent { .. })));
    }

    #[test]
    fn dirichlet_flag() {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[5]).unwrap();
        let f = ScalarField::from_fn(mesh.clone(), |x| x[0] * (1.0 - x[0]));
        assert!(f.is_dirichlet());
        let g = ScalarField::from_fn(mesh, |x| x[0]);
        assert!(!g.is_dirichlet());
    }
}
