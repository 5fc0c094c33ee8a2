use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::json;

use quasisys_core::barriers::{build_barrier_set, default_gamma_sing, verify_lemma2, BarrierOptions, BarrierSet};
use quasisys_core::estimates::{standard_problems, validate_kp, DEFAULT_SAFETY};
use quasisys_core::fixedpoint::{frozen_loads, DriverOptions, FixpointRun, IterateOptions};
use quasisys_core::io::{write_fields, write_table};
use quasisys_core::system::check_envelope;
use quasisys_core::{
    build_mesh, calibrate_kp, energy_chain_report, gradient, norm_sup_grad, plap_solve, run_fixpoint, validate_cdt, Error,
    Load, Mesh, PlapConfig, ScalarField, Status, SystemSpec,
};

use crate::args::{BarrierArgs, Common, FixpointArgs, SolveArgs, SweepArgs, ValidateArgs};
use crate::artifacts::{sha256_hex, Artifacts, FileDigest};
use crate::plot::{field_plot, line_plot, Series};

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Internal = 1,
    Parse = 2,
    Inadmissible = 3,
    IterationLimit = 4,
    LeftSet = 5,
    ClosureFailure = 6,
}

impl Exit {
    pub fn for_error(err: &anyhow::Error) -> Exit {
        match err.downcast_ref::<Error>() {
            Some(Error::Parse(_) | Error::Config(_)) => Exit::Parse,
            Some(Error::Hypothesis(_) | Error::SpecInvalid(_) | Error::NonIntegrableExponent { .. }) => Exit::Inadmissible,
            Some(Error::IterationLimit { .. }) => Exit::IterationLimit,
            Some(Error::ClosureFailure(_)) => Exit::ClosureFailure,
            _ => Exit::Internal,
        }
    }

    fn for_status(s: Status) -> Exit {
        match s {
            Status::Converged => Exit::Ok,
            Status::IterationLimit | Status::Running => Exit::IterationLimit,
            Status::LeftSet => Exit::LeftSet,
        }
    }
}

/// Shared state of one command invocation.
pub struct Ctx {
    pub common: Common,
    pub art: Artifacts,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub spec: Option<SystemSpec>,
    pub report: String,
}

impl Ctx {
    pub fn new(common: Common, out: &Path) -> Result<Self> {
        Ok(Self {
            common,
            art: Artifacts::create(out)?,
            params: serde_json::Map::new(),
            inputs: Vec::new(),
            spec: None,
            report: String::new(),
        })
    }

    pub fn kv(&mut self, key: &str, value: impl Display) {
        let _ = writeln!(self.report, "{key} = {value}");
    }

    fn param(&mut self, key: &str, value: serde_json::Value) {
        self.params.insert(key.to_string(), value);
    }

    fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    fn load_spec(&mut self) -> Result<SystemSpec> {
        let path = self.common.spec.clone().context("--spec is required for this command")?;
        let bytes = self.read_input(&path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse("spec is not UTF-8".into()))?;
        let spec = SystemSpec::from_toml(&text)?;
        self.spec = Some(spec.clone());
        Ok(spec)
    }

    fn mesh_for(&mut self, dim: usize, extents: &[(f64, f64)], default_n: Option<&[usize]>) -> Result<Arc<Mesh>> {
        let fallback = if dim == 1 { 257 } else { 65 };
        let n: Vec<usize> = match (&self.common.mesh_n, default_n) {
            (Some(v), _) if v.len() == 1 => vec![v[0]; dim],
            (Some(v), _) => v.clone(),
            (None, Some(v)) => v.to_vec(),
            (None, None) => vec![fallback; dim],
        };
        self.param("mesh_n", json!(n));
        Ok(build_mesh(dim, extents, &n)?)
    }

    fn spec_mesh(&mut self, spec: &SystemSpec) -> Result<Arc<Mesh>> {
        let d = spec.domain.clone();
        self.mesh_for(d.dim, &d.extents, d.n.as_deref())
    }

    fn write_fields(&mut self, rel: &str, mesh: &Mesh, fields: &[(&str, &ScalarField)]) -> Result<()> {
        let mut buf = Vec::new();
        write_fields(&mut buf, mesh, fields)?;
        self.art.write(rel, &buf)
    }

    fn write_table<S: AsRef<str>>(&mut self, rel: &str, header: &[&str], rows: Vec<Vec<S>>) -> Result<()> {
        let mut buf = Vec::new();
        write_table(&mut buf, header, rows)?;
        self.art.write(rel, &buf)
    }

    fn plot(&mut self, rel: &str, svg: String) -> Result<()> {
        if self.common.plots {
            self.art.write(rel, svg.as_bytes())?;
        }
        Ok(())
    }
}

fn parse_load(ctx: &mut Ctx, spec: &str, mesh: &Arc<Mesh>) -> Result<Load> {
    if let Some(rest) = spec.strip_prefix("weight:") {
        let v: Vec<f64> = rest
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad weight load `{spec}`: {e}")))?;
        if v.len() != 3 {
            return Err(Error::Parse(format!("weight load needs c0,c1,mu, got `{rest}`")).into());
        }
        return Ok(Load::Weight { c0: v[0], c1: v[1], mu: v[2] });
    }
    if let Some(rest) = spec.strip_prefix("csv:") {
        let (path, col) = match rest.rsplit_once(':') {
            Some((p, c)) if !c.contains('/') && !c.contains('\\') => (p, c),
            _ => (rest, "g"),
        };
        let bytes = ctx.read_input(Path::new(path))?;
        let f = quasisys_core::io::read_field(bytes.as_slice(), mesh, col)?;
        return Ok(Load::Nodal(f.into_values()));
    }
    let c: f64 = spec.trim().parse().map_err(|_| Error::Parse(format!("unrecognized load `{spec}`")))?;
    Ok(Load::constant(c))
}

fn history_plot(title: &str, ks: &[f64], res: &[f64]) -> String {
    line_plot(title, "iteration", "residual", &[Series { name: "residual", xs: ks, ys: res }], true)
}

pub fn solve(ctx: &mut Ctx, a: &SolveArgs) -> Result<Exit> {
    let mesh = ctx.mesh_for(a.dim, &vec![(0.0, 1.0); a.dim], None)?;
    let load = parse_load(ctx, &a.load, &mesh)?;
    let cfg = PlapConfig {
        eps_reg: a.eps_reg,
        tol: ctx.common.tol.unwrap_or(1e-9),
        max_iter: ctx.common.max_iter.unwrap_or(200),
        ..PlapConfig::new(a.p)
    };
    ctx.param("p", json!(a.p));
    ctx.param("load", json!(a.load));
    ctx.param("dim", json!(a.dim));
    ctx.param("tol", json!(cfg.tol));
    ctx.param("max_iter", json!(cfg.max_iter));
    ctx.param("eps_reg", json!(cfg.eps(&mesh)));
    let sol = plap_solve(&mesh, &load, &cfg)?;
    let u = &sol.u;
    let g = gradient(u);
    let gmag = ScalarField::new(mesh.clone(), (0..mesh.num_nodes()).map(|i| g.magnitude(i)).collect())?;

    ctx.kv("p", a.p);
    ctx.kv("nodes", mesh.num_nodes());
    ctx.kv("eps_reg", cfg.eps(&mesh));
    ctx.kv("iterations", sol.history.len() - 1);
    ctx.kv("residual", sol.residual());
    ctx.kv("energy", sol.history.last().unwrap().energy);
    ctx.kv("u_max", u.max());
    ctx.kv("grad_sup", norm_sup_grad(u));

    let mut cols: Vec<(&str, &ScalarField)> = vec![("u", u), ("grad", &gmag)];
    let other;
    if let Some(e2) = a.compare_eps {
        let cfg2 = PlapConfig { eps_reg: Some(e2), ..cfg.clone() };
        other = plap_solve(&mesh, &load, &cfg2)?.u;
        ctx.kv("eps_reg_2", e2);
        ctx.kv("eps_bias_sup", u.sup_diff(&other));
        cols.push(("u_eps2", &other));
    }
    ctx.write_fields("fields/u.csv", &mesh, &cols)?;
    let rows: Vec<Vec<String>> =
        sol.history.iter().map(|r| vec![r.iteration.to_string(), r.energy.to_string(), r.residual.to_string()]).collect();
    ctx.write_table("history.csv", &["iteration", "energy", "residual"], rows)?;
    ctx.plot("plots/u.svg", field_plot("solution", &mesh, &[("u", u.values())]))?;
    let ks: Vec<f64> = sol.history.iter().map(|r| r.iteration as f64).collect();
    let rs: Vec<f64> = sol.history.iter().map(|r| r.residual).collect();
    ctx.plot("plots/residual.svg", history_plot("Newton residual", &ks, &rs))?;
    Ok(Exit::Ok)
}

fn barrier_opts(ctx: &Ctx, spec: &SystemSpec, delta: Option<f64>, gamma: Option<f64>) -> BarrierOptions {
    BarrierOptions {
        delta,
        gamma_sing: Some(gamma.unwrap_or_else(|| default_gamma_sing([spec.s(0), spec.s(1)]))),
        tol: ctx.common.tol.map_or(1e-10, |t| t.min(1e-10)),
        max_iter: ctx.common.max_iter.unwrap_or(200),
    }
}

fn report_barriers(ctx: &mut Ctx, bs: &BarrierSet) {
    for (i, c) in bs.comp.iter().enumerate() {
        let k = i + 1;
        ctx.kv(&format!("delta{k}"), c.delta);
        ctx.kv(&format!("c0_{k}"), c.c0);
        ctx.kv(&format!("c1_{k}"), c.c1);
        ctx.kv(&format!("L_hat{k}"), c.l_hat);
        ctx.kv(&format!("L{k}"), c.l);
        if let Some(w) = &c.w_sing {
            ctx.kv(&format!("c2_{k}"), w.c2);
            ctx.kv(&format!("c3_{k}"), w.c3);
            ctx.kv(&format!("singular_iterations{k}"), w.history.len());
        }
    }
    ctx.kv("c0", bs.c0);
    ctx.kv("c1", bs.c1);
    ctx.kv("c2", bs.c2);
    ctx.kv("c3", bs.c3);
    if let Some(g) = bs.gamma_sing {
        ctx.kv("gamma_sing", g);
    }
}

fn refined(mesh: &Mesh) -> Result<Arc<Mesh>> {
    let n: Vec<usize> = mesh.counts().iter().map(|n| 2 * (n - 1) + 1).collect();
    Ok(build_mesh(mesh.dim(), mesh.extents(), &n)?)
}

pub fn barriers(ctx: &mut Ctx, a: &BarrierArgs) -> Result<Exit> {
    let spec = ctx.load_spec()?;
    let mesh = ctx.spec_mesh(&spec)?;
    let opts = barrier_opts(ctx, &spec, a.delta, a.gamma_sing);
    ctx.param("delta", json!(opts.delta));
    ctx.param("gamma_sing", json!(opts.gamma_sing));
    ctx.param("tol", json!(opts.tol));
    ctx.param("refine", json!(a.refine));
    let s = [spec.s(0), spec.s(1)];
    let bs = build_barrier_set(&mesh, spec.p, s, &opts)?;
    let fine = if a.refine {
        // same layer width on both levels so the constants are comparable
        let o = BarrierOptions { delta: Some(bs.comp[0].delta.min(bs.comp[1].delta)), ..opts.clone() };
        Some(build_barrier_set(&refined(&mesh)?, spec.p, s, &o)?)
    } else {
        None
    };
    report_barriers(ctx, &bs);
    let rep = verify_lemma2(&bs, fine.as_ref());
    for (i, c) in rep.components.iter().enumerate() {
        let k = i + 1;
        ctx.kv(&format!("min_z_d{k}"), c.min_z_d);
        ctx.kv(&format!("max_z_d{k}"), c.max_z_d);
        ctx.kv(&format!("min_y_d{k}"), c.min_y_d);
        ctx.kv(&format!("max_y_d{k}"), c.max_y_d);
        ctx.kv(&format!("z_le_y{k}"), c.z_le_y);
        ctx.kv(&format!("bounds_hold{k}"), c.bounds_hold);
        ctx.kv(&format!("torsion_bound{k}"), c.torsion_bound);
        if let Some((d0, d1)) = c.drift {
            ctx.kv(&format!("drift_c0_{k}"), d0);
            ctx.kv(&format!("drift_c1_{k}"), d1);
        }
    }
    ctx.kv("barrier_check_pass", rep.pass);
    ctx.kv("refinement_suspect", rep.suspect);

    let [c1, c2] = &bs.comp;
    let mut cols: Vec<(&str, &ScalarField)> =
        vec![("y1", &c1.y), ("y2", &c2.y), ("z1", &c1.z), ("z2", &c2.z), ("w_hat1", &c1.w_hat), ("w_hat2", &c2.w_hat)];
    if let (Some(a), Some(b)) = (&c1.w_sing, &c2.w_sing) {
        cols.push(("w_sing1", &a.w));
        cols.push(("w_sing2", &b.w));
    }
    ctx.write_fields("fields/barriers.csv", &mesh, &cols)?;
    if ctx.common.plots {
        for (i, c) in bs.comp.iter().enumerate() {
            let k = i + 1;
            let svg = if mesh.dim() == 1 {
                let lo: Vec<f64> = mesh.dist().iter().map(|d| c.c0 * d).collect();
                let hi: Vec<f64> = mesh.dist().iter().map(|d| c.c1 * d).collect();
                field_plot(
                    &format!("barriers, component {k}"),
                    &mesh,
                    &[("c0 d", &lo), ("z", c.z.values()), ("y", c.y.values()), ("c1 d", &hi)],
                )
            } else {
                field_plot(&format!("y{k}"), &mesh, &[("y", c.y.values())])
            };
            ctx.plot(&format!("plots/barriers{k}.svg"), svg)?;
        }
    }
    Ok(if rep.pass { Exit::Ok } else { Exit::Internal })
}

/// Writes the admissibility report; returns false when the spec is refused.
fn admissibility(ctx: &mut Ctx, spec: &SystemSpec) -> bool {
    let cdt = validate_cdt(spec);
    ctx.report.push_str(&cdt.to_string());
    ctx.kv("cdt_pass", cdt.pass());
    ctx.kv("derived_pass", cdt.derived_pass());
    cdt.pass()
}

fn driver_opts(ctx: &Ctx, k_p: Option<f64>) -> DriverOptions {
    let iterate = IterateOptions {
        damping: ctx.common.damping,
        tol: ctx.common.tol.unwrap_or(1e-6),
        max_iter: ctx.common.max_iter.unwrap_or(200),
        ..IterateOptions::default()
    };
    DriverOptions { iterate, barriers: BarrierOptions::default(), k_p, seed: ctx.common.seed }
}

/// `k_p ‖f_i(u, v, ∇u, ∇v)‖_r^{1/(p-1)} - ‖∇u_i‖_∞`, minimized over components.
fn kp_slack(spec: &SystemSpec, run: &FixpointRun) -> Result<f64> {
    let w = &run.state.iterate;
    let mesh = w[0].mesh();
    let loads = frozen_loads(spec, [&w[0], &w[1]])?;
    let mut slack = f64::INFINITY;
    for i in 0..2 {
        let norm = Load::Cells(loads[i].clone()).norm_lr(mesh, spec.r[i])?;
        slack = slack.min(run.k_p * norm.powf(1.0 / (spec.p[i] - 1.0)) - norm_sup_grad(&w[i]));
    }
    Ok(slack)
}

fn report_run(ctx: &mut Ctx, spec: &SystemSpec, run: &FixpointRun) -> Result<()> {
    let st = &run.state;
    ctx.kv("status", serde_json::to_value(st.status)?.as_str().unwrap_or("?"));
    ctx.kv("iterations", st.k);
    ctx.kv("residual", st.last_residual());
    if let Some([a, b]) = st.certificate {
        ctx.kv("certificate_u", a);
        ctx.kv("certificate_v", b);
    }
    ctx.kv("C", run.selection.c);
    ctx.kv("k_p", run.k_p);
    for q in &run.selection.checks {
        ctx.kv(&format!("closure_{}", q.name), q.margin);
    }
    ctx.kv("c0", run.barriers.c0);
    ctx.kv("c1", run.barriers.c1);
    ctx.kv("in_rectangle_all", st.history.iter().all(|r| r.in_rectangle));
    ctx.kv("grad_within_cap_all", st.history.iter().all(|r| r.grad_within_cap));
    let mesh = st.iterate[0].mesh().clone();
    let positive = mesh.interior_nodes().all(|i| st.iterate[0].values()[i] > 0.0 && st.iterate[1].values()[i] > 0.0);
    ctx.kv("interior_positive", positive);
    ctx.kv("kp_slack", kp_slack(spec, run)?);
    if st.status == Status::Converged {
        let chain = energy_chain_report(spec, &st.iterate[0], &st.iterate[1])?;
        for (i, c) in chain.components.iter().enumerate() {
            let k = i + 1;
            ctx.kv(&format!("energy{k}"), c.grad_energy);
            ctx.kv(&format!("load_work{k}"), c.load_work);
            ctx.kv(&format!("identity_gap{k}"), c.identity_gap);
            ctx.kv(&format!("growth_slack{k}"), c.growth_slack);
            ctx.kv(&format!("hardy_ratio{k}"), c.hardy_ratio);
        }
    }
    Ok(())
}

fn history_rows(run: &FixpointRun) -> Vec<Vec<String>> {
    run.state
        .history
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.residual.to_string(),
                r.lower_margin.to_string(),
                r.upper_margin.to_string(),
                r.grad_margin.to_string(),
                r.in_rectangle.to_string(),
                r.grad_within_cap.to_string(),
                r.clamp.to_string(),
            ]
        })
        .collect()
}

const HISTORY_HEADER: [&str; 8] =
    ["k", "residual", "lower_margin", "upper_margin", "grad_margin", "in_rectangle", "grad_within_cap", "clamp"];

fn write_run(ctx: &mut Ctx, run: &FixpointRun) -> Result<()> {
    let st = &run.state;
    let mesh = st.iterate[0].mesh().clone();
    ctx.write_fields("fields/solution.csv", &mesh, &[("u", &st.iterate[0]), ("v", &st.iterate[1])])?;
    let r = &run.rect;
    ctx.write_fields(
        "fields/rectangle.csv",
        &mesh,
        &[("lower_u", &r.lower[0]), ("upper_u", &r.upper[0]), ("lower_v", &r.lower[1]), ("upper_v", &r.upper[1])],
    )?;
    ctx.write_table("history.csv", &HISTORY_HEADER, history_rows(run))?;
    if ctx.common.plots {
        if mesh.dim() == 1 {
            ctx.plot(
                "plots/solution.svg",
                field_plot("fixed point", &mesh, &[("u", st.iterate[0].values()), ("v", st.iterate[1].values())]),
            )?;
        } else {
            ctx.plot("plots/u.svg", field_plot("u", &mesh, &[("u", st.iterate[0].values())]))?;
            ctx.plot("plots/v.svg", field_plot("v", &mesh, &[("v", st.iterate[1].values())]))?;
        }
        let ks: Vec<f64> = st.history.iter().map(|r| r.k as f64).collect();
        ctx.plot("plots/residual.svg", history_plot("fixed-point residual", &ks, &st.residual_history()))?;
    }
    Ok(())
}

pub fn fixpoint(ctx: &mut Ctx, a: &FixpointArgs) -> Result<Exit> {
    let spec = ctx.load_spec()?;
    let mesh = ctx.spec_mesh(&spec)?;
    let opts = driver_opts(ctx, a.k_p);
    ctx.param("damping", json!(opts.iterate.damping));
    ctx.param("tol", json!(opts.iterate.tol));
    ctx.param("max_iter", json!(opts.iterate.max_iter));
    ctx.param("k_p", json!(a.k_p));
    ctx.param("seed", json!(opts.seed));
    if !admissibility(ctx, &spec) {
        return Ok(Exit::Inadmissible);
    }
    let run = run_fixpoint(&spec, &mesh, &opts)?;
    report_run(ctx, &spec, &run)?;
    write_run(ctx, &run)?;
    Ok(Exit::for_status(run.state.status))
}

pub fn validate(ctx: &mut Ctx, a: &ValidateArgs) -> Result<Exit> {
    let spec = ctx.load_spec()?;
    let mesh = ctx.spec_mesh(&spec)?;
    ctx.param("samples", json!(a.samples));
    ctx.param("seed", json!(ctx.common.seed));
    let admissible = admissibility(ctx, &spec);
    let envelope_ok = match check_envelope(&spec, a.samples, ctx.common.seed) {
        Ok(rep) => {
            for i in 0..2 {
                ctx.kv(&format!("envelope_lower_margin{}", i + 1), rep.lower_margin[i]);
                ctx.kv(&format!("envelope_upper_margin{}", i + 1), rep.upper_margin[i]);
            }
            true
        }
        Err(e) => {
            ctx.kv("envelope_violation", e);
            false
        }
    };
    ctx.kv("envelope_pass", envelope_ok);

    let tol = ctx.common.tol.unwrap_or(1e-9);
    let mut rows = Vec::new();
    let mut seen = Vec::new();
    for i in 0..2 {
        let (p, r) = (spec.p[i], spec.r[i]);
        if seen.contains(&(p.to_bits(), r.to_bits())) {
            continue;
        }
        seen.push((p.to_bits(), r.to_bits()));
        let cfg = PlapConfig { tol, ..PlapConfig::new(p) };
        let (cal, hold) = standard_problems(&mesh, r, ctx.common.seed);
        let rep = calibrate_kp(&mesh, &cfg, r, &cal, DEFAULT_SAFETY, 0.0)?;
        let checks = validate_kp(&mesh, &cfg, r, rep.k_p, &hold)?;
        let tag = format!("p{p}_r{r}");
        ctx.kv(&format!("k_p[{tag}]"), rep.k_p);
        ctx.kv(&format!("safety[{tag}]"), rep.safety);
        ctx.kv(&format!("hardy_constant[{tag}]"), rep.hardy_constant);
        ctx.kv(&format!("calibration_samples[{tag}]"), rep.samples.len());
        ctx.kv(&format!("skipped[{tag}]"), rep.skipped.len());
        ctx.kv(&format!("holdout_pass[{tag}]"), checks.iter().all(|c| c.ok));
        for s in &rep.samples {
            rows.push(vec![
                p.to_string(),
                r.to_string(),
                "calibration".into(),
                s.id.clone(),
                s.grad_sup.to_string(),
                s.load_norm.to_string(),
                s.ratio.to_string(),
                String::new(),
            ]);
        }
        for c in &checks {
            let s = &c.sample;
            rows.push(vec![
                p.to_string(),
                r.to_string(),
                "holdout".into(),
                s.id.clone(),
                s.grad_sup.to_string(),
                s.load_norm.to_string(),
                s.ratio.to_string(),
                c.slack.to_string(),
            ]);
        }
    }
    ctx.write_table("samples.csv", &["p", "r", "set", "id", "grad_sup", "load_norm", "ratio", "slack"], rows)?;
    Ok(if admissible && envelope_ok { Exit::Ok } else { Exit::Inadmissible })
}

/// One sweep axis: a parameter name and its values.
pub fn parse_axis(s: &str) -> Result<(String, Vec<f64>)> {
    let (name, vals) = s.split_once('=').ok_or_else(|| Error::Parse(format!("grid axis `{s}` lacks `=`")))?;
    let bad = |e: &dyn Display| Error::Parse(format!("grid axis `{s}`: {e}"));
    let values: Vec<f64> = if vals.contains(':') {
        let parts: Vec<&str> = vals.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(&"expected LO:HI:COUNT").into());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|e| bad(&e))?;
        let hi: f64 = parts[1].trim().parse().map_err(|e| bad(&e))?;
        let n: usize = parts[2].trim().parse().map_err(|e| bad(&e))?;
        match n {
            0 => return Err(bad(&"count must be positive").into()),
            1 => vec![lo],
            _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        vals.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| bad(&e))).collect::<std::result::Result<_, _>>()?
    };
    SystemSpec::pure_power(1, [2.0; 2], [0.0; 2], [0.0; 2], [2.0; 2]).set_param(name.trim(), 0.0)?;
    Ok((name.trim().to_string(), values))
}

/// Fills `cols` with C, status, iterations, residual and k_p slack.
fn run_cell(
    ctx: &mut Ctx,
    spec: &SystemSpec,
    mesh: &Arc<Mesh>,
    opts: &DriverOptions,
    assignment: &[(String, f64)],
    cols: &mut [String; 5],
) -> Result<Exit> {
    for (name, v) in assignment {
        ctx.param(name, json!(v));
    }
    if !admissibility(ctx, spec) {
        cols[1] = "inadmissible".into();
        return Ok(Exit::Inadmissible);
    }
    let run = run_fixpoint(spec, mesh, opts)?;
    report_run(ctx, spec, &run)?;
    write_run(ctx, &run)?;
    cols[0] = run.selection.c.to_string();
    cols[1] = serde_json::to_value(run.state.status)?.as_str().unwrap_or_default().to_string();
    cols[2] = run.state.k.to_string();
    cols[3] = run.state.last_residual().to_string();
    cols[4] = kp_slack(spec, &run)?.to_string();
    Ok(Exit::for_status(run.state.status))
}

/// Runs one sweep cell in its own directory and returns its summary row.
/// Failures are recorded in the row; they never abort the sweep.
fn sweep_cell(
    common: &Common,
    dir: &Path,
    spec: &SystemSpec,
    mesh: &Arc<Mesh>,
    opts: &DriverOptions,
    assignment: &[(String, f64)],
) -> Vec<String> {
    let mut row: Vec<String> = assignment.iter().map(|(_, v)| v.to_string()).collect();
    let mut cols = [String::new(), String::new(), String::new(), String::new(), String::new()];
    let written = (|| -> Result<()> {
        let mut ctx = Ctx::new(common.clone(), dir)?;
        ctx.spec = Some(spec.clone());
        let exit = match run_cell(&mut ctx, spec, mesh, opts, assignment, &mut cols) {
            Ok(e) => e,
            Err(e) => {
                let exit = Exit::for_error(&e);
                ctx.kv("error", format!("{e:#}"));
                cols[1] = match exit {
                    Exit::ClosureFailure => "closure-failure",
                    Exit::IterationLimit => "iteration-limit",
                    Exit::Inadmissible => "inadmissible",
                    _ => "error",
                }
                .into();
                exit
            }
        };
        finish(ctx, "fixpoint", &[], exit)
    })();
    if let Err(e) = written {
        log::warn!("sweep cell {} not written: {e:#}", dir.display());
        if cols[1].is_empty() {
            cols[1] = "error".into();
        }
    }
    row.push(validate_cdt(spec).pass().to_string());
    row.extend(cols);
    row
}

pub fn sweep(ctx: &mut Ctx, a: &SweepArgs) -> Result<Exit> {
    let base = ctx.load_spec()?;
    let mesh = ctx.spec_mesh(&base)?;
    let axes: Vec<(String, Vec<f64>)> = a.axes.iter().map(|s| parse_axis(s)).collect::<Result<_>>()?;
    ctx.param("grid", json!(a.axes));
    let opts = driver_opts(ctx, a.k_p);
    ctx.param("damping", json!(opts.iterate.damping));
    ctx.param("tol", json!(opts.iterate.tol));
    ctx.param("max_iter", json!(opts.iterate.max_iter));

    // row-major product of the axes
    let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (name, vals) in &axes {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                vals.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((name.clone(), *v));
                    c
                })
            })
            .collect();
    }
    let root = ctx.art.root().to_path_buf();
    let common = ctx.common.clone();
    let results: Vec<Vec<String>> = cells
        .par_iter()
        .enumerate()
        .map(|(k, assign)| {
            let mut spec = base.clone();
            for (name, v) in assign {
                spec.set_param(name, *v).expect("axis names validated");
            }
            sweep_cell(&common, &root.join(format!("cells/{k:03}")), &spec, &mesh, &opts, assign)
        })
        .collect();

    let mut header: Vec<&str> = vec!["cell"];
    header.extend(axes.iter().map(|(n, _)| n.as_str()));
    header.extend(["cdt_pass", "C", "status", "iterations", "residual", "kp_slack"]);
    let rows: Vec<Vec<String>> = results
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let mut row = vec![format!("{k:03}")];
            row.extend(r);
            row
        })
        .collect();
    ctx.kv("cells", rows.len());
    ctx.write_table("sweep.csv", &header, rows)?;
    Ok(Exit::Ok)
}

/// Writes `report.txt` and the manifest.
pub fn finish(mut ctx: Ctx, command: &str, argv: &[String], exit: Exit) -> Result<()> {
    ctx.kv("exit_code", exit as i32);
    let report = std::mem::take(&mut ctx.report);
    ctx.art.write("report.txt", report.as_bytes())?;
    let manifest = crate::artifacts::Manifest {
        tool: "quasisys",
        version: env!("CARGO_PKG_VERSION"),
        core_version: quasisys_core::VERSION,
        command: command.to_string(),
        argv: argv.to_vec(),
        parameters: serde_json::Value::Object(ctx.params),
        inputs: ctx.inputs,
        spec: ctx.spec.as_ref().map(|s| s.to_toml()),
        exit_code: exit as i32,
    };
    ctx.art.finish(manifest)
}
