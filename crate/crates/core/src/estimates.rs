//! Empirical constants behind the a priori estimates: the gradient-bound
//! constant `k_p`, Hardy-type ratios, and the energy identity of a solution.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{integrate_singular, norm_sup_grad, Mesh, ScalarField};
use crate::plap::{plap_solve, Load, PlapConfig};
use crate::system::{eval_f, validate_cdt, Args, Condition, SystemSpec};

pub const DEFAULT_SAFETY: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct Problem {
    pub id: String,
    pub load: Load,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub id: String,
    pub grad_sup: f64,
    pub load_norm: f64,
    /// `‖∇u‖_∞ / ‖g‖_r^{1/(p-1)}`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub p: f64,
    pub r: f64,
    pub k_p: f64,
    pub safety: f64,
    pub samples: Vec<Sample>,
    /// Problems whose solve failed.
    pub skipped: Vec<String>,
    /// Largest `∫ d^μ |u| / ‖∇u‖_p` over the calibration solutions.
    pub hardy_constant: f64,
    pub hardy_mu: f64,
}

fn sample(mesh: &Arc<Mesh>, p: f64, r: f64, cfg: &PlapConfig, prob: &Problem) -> Result<(Sample, ScalarField)> {
    let u = plap_solve(mesh, &prob.load, cfg)?.u;
    let load_norm = prob.load.norm_lr(mesh, r)?;
    let grad_sup = norm_sup_grad(&u);
    let ratio = if load_norm > 0.0 { grad_sup / load_norm.powf(1.0 / (p - 1.0)) } else { 0.0 };
    Ok((Sample { id: prob.id.clone(), grad_sup, load_norm, ratio }, u))
}

/// Solves every problem and sets `k_p = safety · max ratio`. Failed solves are
/// skipped with a warning.
pub fn calibrate_kp(
    mesh: &Arc<Mesh>,
    cfg: &PlapConfig,
    r: f64,
    problems: &[Problem],
    safety: f64,
    hardy_mu: f64,
) -> Result<CalibrationReport> {
    if problems.is_empty() {
        return Err(Error::Calibration("empty calibration set".into()));
    }
    if !(safety >= 1.0) {
        return Err(Error::Config(format!("safety factor {safety} must be at least 1")));
    }
    let p = cfg.p;
    let results: Vec<_> = problems.par_iter().map(|prob| (prob.id.clone(), sample(mesh, p, r, cfg, prob))).collect();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let mut hardy_constant = 0.0f64;
    for (id, res) in results {
        match res {
            Ok((s, u)) => {
                hardy_constant = hardy_constant.max(check_hardy(p, hardy_mu, &u)?);
                samples.push(s);
            }
            Err(e) => {
                log::warn!("calibration problem {id} skipped: {e}");
                skipped.push(id);
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::Calibration("every calibration solve failed".into()));
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(CalibrationReport { p, r, k_p: safety * max_ratio, safety, samples, skipped, hardy_constant, hardy_mu })
}

#[derive(Debug, Clone, Serialize)]
pub struct HoldoutResult {
    pub sample: Sample,
    /// `k_p ‖g‖_r^{1/(p-1)} - ‖∇u‖_∞`.
    pub slack: f64,
    pub ok: bool,
}

/// Checks the gradient bound with a given `k_p` on problems outside the
/// calibration set.
pub fn validate_kp(mesh: &Arc<Mesh>, cfg: &PlapConfig, r: f64, k_p: f64, problems: &[Problem]) -> Result<Vec<HoldoutResult>> {
    let p = cfg.p;
    problems
        .par_iter()
        .map(|prob| {
            let (s, _) = sample(mesh, p, r, cfg, prob)?;
            let slack = k_p * s.load_norm.powf(1.0 / (p - 1.0)) - s.grad_sup;
            Ok(HoldoutResult { sample: s, slack, ok: slack >= 0.0 })
        })
        .collect()
}

/// Smooth positive bump `a · exp(-|x - c|² / w²)` sampled at nodes.
fn bump(mesh: &Mesh, amp: f64, center: [f64; 2], width: f64) -> Load {
    let dim = mesh.dim();
    Load::Nodal(
        (0..mesh.num_nodes())
            .map(|i| {
                let x = mesh.coords(i);
                let r2: f64 = (0..dim).map(|k| (x[k] - center[k]).powi(2)).sum();
                amp * (-r2 / (width * width)).exp()
            })
            .collect(),
    )
}

fn bumps(mesh: &Mesh, tag: &str, count: usize, seed: u64) -> Vec<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = mesh.extents().to_vec();
    let scale = mesh.inradius();
    (0..count)
        .map(|k| {
            let mut c = [0.0; 2];
            for (a, (lo, hi)) in ext.iter().enumerate() {
                c[a] = lo + (hi - lo) * rng.gen_range(0.2..0.8);
            }
            let width = scale * rng.gen_range(0.2..0.6);
            let amp = 10f64.powf(rng.gen_range(-1.0..1.0));
            Problem { id: format!("{tag}-bump-{k}"), load: bump(mesh, amp, c, width) }
        })
        .collect()
}

/// Twenty calibration problems (ten `c0 + c1 d^μ` weights, ten random bumps)
/// and ten disjoint holdout problems of the same families. `r` bounds the
/// weight exponents so every load lies in `L^r`.
pub fn standard_problems(mesh: &Mesh, r: f64, seed: u64) -> (Vec<Problem>, Vec<Problem>) {
    // exponents as fractions of the admissible band (-1/r, 1]
    let lo = -1.0 / r;
    let mu = |t: f64| lo + t * (1.0 - lo);
    let weight = |tag: &str, k: usize, c0: f64, c1: f64, t: f64| Problem {
        id: format!("{tag}-weight-{k}"),
        load: Load::Weight { c0, c1, mu: mu(t) },
    };
    let mut cal = Vec::new();
    for (k, t) in [0.1, 0.3, 0.5, 0.7, 0.9].into_iter().enumerate() {
        cal.push(weight("cal", 2 * k, 0.0, 1.0, t));
        cal.push(weight("cal", 2 * k + 1, 1.0, 2.0, t));
    }
    cal.extend(bumps(mesh, "cal", 10, seed));
    let mut hold = Vec::new();
    for (k, t) in [0.2, 0.4, 0.6, 0.8, 0.95].into_iter().enumerate() {
        hold.push(weight("hold", k, 0.5, 1.0, t));
    }
    hold.extend(bumps(mesh, "hold", 5, seed ^ 0x5eed));
    (cal, hold)
}

/// `∫ d^μ |u| / ‖∇u‖_p`, with `0` for a field of zero gradient.
pub fn check_hardy(p: f64, mu: f64, u: &ScalarField) -> Result<f64> {
    let mesh = u.mesh();
    let vol = mesh.cell_volume();
    let grad: f64 = (0..mesh.num_cells()).map(|c| mesh.cell_grad_sq(u.values(), c).powf(p / 2.0)).sum::<f64>() * vol;
    let num = integrate_singular(mu, &u.map(f64::abs))?;
    if grad == 0.0 {
        return Ok(0.0);
    }
    Ok(num / grad.powf(1.0 / p))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyChainComponent {
    /// `∫ |∇u_i|^{p_i}`.
    pub grad_energy: f64,
    /// `∫ f_i(u, v, ∇u, ∇v) u_i`.
    pub load_work: f64,
    /// `M̂ (∫ d^{μ} u_i + ∫ |∇u|^{γ_i} u_i + ∫ |∇v|^{θ_i} u_i)` with `μ = α_i + β_i`.
    pub growth_bound: f64,
    /// `max(1, M_i sup u^{α_i} v^{β_i} / d^{α_i+β_i})` over cells.
    pub m_hat: f64,
    /// `∫ d^μ u_i / ‖∇u_i‖_{p_i}`.
    pub hardy_ratio: f64,
    /// `(grad_energy - load_work) / grad_energy`.
    pub identity_gap: f64,
    /// `growth_bound - load_work`; negative values are informational.
    pub growth_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyChainReport {
    pub components: [EnergyChainComponent; 2],
    pub exponent_checks: Vec<Condition>,
}

/// Discrete version of the energy identity obtained by testing each equation
/// with its own solution, with the growth bound of the right-hand side.
pub fn energy_chain_report(spec: &SystemSpec, u: &ScalarField, v: &ScalarField) -> Result<EnergyChainReport> {
    let mesh = u.mesh();
    let vol = mesh.cell_volume();
    let nc = mesh.num_cells();
    let dc = mesh.cell_center_dist();
    let fields = [u, v];
    let pw = |x: f64, e: f64| if e == 0.0 { 1.0 } else { x.powf(e) };
    let comp = |i: usize| -> Result<EnergyChainComponent> {
        let w = fields[i].values();
        let p = spec.p[i];
        let mu = spec.s(i);
        let (mut energy, mut work) = (0.0, 0.0);
        let (mut sing, mut gu, mut gv) = (0.0, 0.0, 0.0);
        let mut m_hat = 1.0f64;
        for c in 0..nc {
            let a = Args {
                s1: mesh.cell_average(u.values(), c),
                s2: mesh.cell_average(v.values(), c),
                xi1: mesh.cell_grad_sq(u.values(), c).sqrt(),
                xi2: mesh.cell_grad_sq(v.values(), c).sqrt(),
            };
            let wc = mesh.cell_average(w, c);
            energy += mesh.cell_grad_sq(w, c).powf(p / 2.0);
            work += eval_f(spec, i, &a)? * wc;
            sing += mesh.cell_mean_dist_pow(c, mu) * wc;
            gu += pw(a.xi1, spec.gamma[i]) * wc;
            gv += pw(a.xi2, spec.theta[i]) * wc;
            let core = a.s1.powf(spec.alpha[i]) * a.s2.powf(spec.beta[i]);
            m_hat = m_hat.max(spec.big_m[i] * core / dc[c].powf(mu));
        }
        let (energy, work) = (energy * vol, work * vol);
        let growth_bound = m_hat * (sing + gu + gv) * vol;
        Ok(EnergyChainComponent {
            grad_energy: energy,
            load_work: work,
            growth_bound,
            m_hat,
            hardy_ratio: check_hardy(p, mu, fields[i])?,
            identity_gap: if energy > 0.0 { (energy - work) / energy } else { 0.0 },
            growth_slack: growth_bound - work,
        })
    };
    Ok(EnergyChainReport { components: [comp(0)?, comp(1)?], exponent_checks: validate_cdt(spec).derived })
}
