//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use quasisys_core::estimates::{standard_problems, DEFAULT_SAFETY};
use quasisys_core::fixedpoint::certificate;
use quasisys_core::{
    build_barrier_set, build_mesh, build_singular_barrier, calibrate_kp, check_hardy, membership, plap_solve, run_fixpoint,
    validate_cdt, validate_kp, BarrierOptions, DriverOptions, FixpointRun, IterateOptions, Load, Mesh, PlapConfig,
    ScalarField, Status, SystemSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn line(n: usize) -> Arc<Mesh> {
    build_mesh(1, &[(0.0, 1.0)], &[n + 1]).unwrap()
}

fn square(n: usize) -> Arc<Mesh> {
    build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[n + 1, n + 1]).unwrap()
}

/// Sup-norm distance after restricting `fine` to the nodes of `coarse`.
fn restricted_sup_diff(coarse: &ScalarField, fine: &ScalarField) -> f64 {
    let (cm, fm) = (coarse.mesh(), fine.mesh());
    let ratio = (fm.counts()[0] - 1) / (cm.counts()[0] - 1);
    let nx = cm.counts()[0];
    let fnx = fm.counts()[0];
    (0..cm.num_nodes())
        .map(|i| {
            let (ix, iy) = (i % nx, i / nx);
            let j = iy * ratio * fnx + ix * ratio;
            (coarse.values()[i] - fine.values()[j]).abs()
        })
        .fold(0.0, f64::max)
}

fn closed_form_solver() -> Outcome {
    let m = line(256);
    let mut worst_time = Duration::ZERO;
    let mut errs = [0.0; 2];
    for (k, p) in [2.0, 3.0].into_iter().enumerate() {
        let t = Instant::now();
        let u = plap_solve(&m, &Load::constant(1.0), &PlapConfig::new(p)).unwrap().u;
        worst_time = worst_time.max(t.elapsed());
        errs[k] = (0..m.num_nodes())
            .map(|i| {
                let x = m.coords(i)[0];
                let exact = if p == 2.0 {
                    x * (1.0 - x) / 2.0
                } else {
                    (2.0 / 3.0) * (0.5f64.powf(1.5) - (x - 0.5).abs().powf(1.5))
                };
                (u.values()[i] - exact).abs()
            })
            .fold(0.0, f64::max);
    }
    let pass = errs[0] <= 1e-8 && errs[1] <= 1e-3 && worst_time < Duration::from_secs(5);
    Outcome::new(pass, format!("p=2 err {:.2e}, p=3 err {:.2e}, slowest {:.2?}", errs[0], errs[1], worst_time))
}

fn random_cells(rng: &mut ChaCha8Rng, mesh: &Mesh) -> Vec<f64> {
    let kind = rng.gen_range(0..3);
    let mu = rng.gen_range(-0.5..0.5);
    (0..mesh.num_cells())
        .map(|c| match kind {
            0 => rng.gen_range(0.0..2.0),
            1 => {
                if rng.gen_bool(0.5) {
                    0.0
                } else {
                    rng.gen_range(0.0..4.0)
                }
            }
            _ => mesh.cell_center_dist()[c].powf(mu) * rng.gen_range(0.5..1.5),
        })
        .collect()
}

fn weak_comparison() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let meshes = [line(256), square(32)];
    let mut cases = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        for m in &meshes {
            for _ in 0..100 {
                let g1 = random_cells(&mut rng, m);
                let g2: Vec<f64> =
                    g1.iter().map(|v| if rng.gen_bool(0.3) { *v } else { v + rng.gen_range(0.0..1.0) }).collect();
                cases.push((p, m.clone(), g1, g2));
            }
        }
    }
    let worst = cases
        .par_iter()
        .map(|(p, m, g1, g2)| {
            let cfg = PlapConfig::new(*p).with_tol(1e-12);
            let u1 = plap_solve(m, &Load::Cells(g1.clone()), &cfg).unwrap().u;
            let u2 = plap_solve(m, &Load::Cells(g2.clone()), &cfg).unwrap().u;
            u1.values().iter().zip(u2.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Outcome::new(worst <= 1e-8, format!("{} pairs, max(u1 - u2) = {worst:.2e}", cases.len()))
}

fn barrier_constants() -> Outcome {
    let opts = BarrierOptions { delta: Some(0.1), ..BarrierOptions::default() };
    let mut pass = true;
    let mut worst_drift = 0.0f64;
    let mut min_c0 = f64::INFINITY;
    for s in [-0.5, 0.0, 0.5] {
        for p in [2.0, 3.0] {
            let a = build_barrier_set(&line(256), [p, p], [s, s], &opts).unwrap();
            let b = build_barrier_set(&line(512), [p, p], [s, s], &opts).unwrap();
            let rep = quasisys_core::verify_lemma2(&a, Some(&b));
            let c = &rep.components[0];
            let (d0, d1) = c.drift.unwrap();
            worst_drift = worst_drift.max(d0).max(d1);
            min_c0 = min_c0.min(a.comp[0].c0);
            pass &= c.z_le_y && a.comp[0].c0 > 0.0 && d0 < 0.2 && d1 < 0.2;
        }
    }
    Outcome::new(pass, format!("6 sets, min c0 {min_c0:.3}, worst drift {:.2}%", 100.0 * worst_drift))
}

fn singular_squeeze() -> Outcome {
    let cfg = PlapConfig::new(2.0).with_tol(1e-11);
    let coarse = build_singular_barrier(&line(512), &cfg, 0.5).unwrap();
    let fine = build_singular_barrier(&line(4096), &cfg, 0.5).unwrap();
    let err = restricted_sup_diff(&coarse.w, &fine.w);
    let m = coarse.w.mesh();
    let squeezed = m.interior_nodes().all(|i| {
        let (w, d) = (coarse.w.values()[i], m.dist()[i]);
        coarse.c2 * d <= w && w <= coarse.c3 * d
    });
    Outcome::new(
        err <= 5e-3 && squeezed && coarse.c2 > 0.0,
        format!("fine-grid err {err:.2e}, c2 {:.3}, c3 {:.3}", coarse.c2, coarse.c3),
    )
}

fn competitive_spec() -> SystemSpec {
    SystemSpec::pure_power(2, [2.0, 2.0], [-0.2, 0.25], [0.3, -0.15], [3.0, 3.0])
}

fn competitive_run(n: usize) -> FixpointRun {
    let opts = DriverOptions {
        iterate: IterateOptions { damping: 0.5, tol: 1e-6, max_iter: 200, ..Default::default() },
        ..Default::default()
    };
    run_fixpoint(&competitive_spec(), &square(n), &opts).unwrap()
}

fn rectangle_invariance(run: &FixpointRun) -> Outcome {
    let h = &run.state.history;
    let all = h.iter().all(|r| r.in_rectangle && r.grad_within_cap);
    let fin = membership(&run.rect, [&run.state.iterate[0], &run.state.iterate[1]]);
    let worst_clamp = h.iter().map(|r| r.clamp).fold(0.0, f64::max);
    Outcome::new(
        all && fin.in_rectangle && fin.grad_within_cap,
        format!("C = {}, {} iterates in set, max clamp {worst_clamp:.1e}", run.selection.c, h.len()),
    )
}

fn fixed_point_certificate(run: &FixpointRun) -> Outcome {
    let spec = competitive_spec();
    let st = &run.state;
    let cert = certificate(&spec, &st.iterate).unwrap();
    let mesh = st.iterate[0].mesh();
    let positive = mesh.interior_nodes().all(|i| st.iterate[0].values()[i] > 0.0 && st.iterate[1].values()[i] > 0.0);
    let fine = competitive_run(256);
    let fine_ok = fine.state.status == Status::Converged;
    let diff = restricted_sup_diff(&st.iterate[0], &fine.state.iterate[0])
        .max(restricted_sup_diff(&st.iterate[1], &fine.state.iterate[1]));
    let pass = st.status == Status::Converged
        && st.k <= 200
        && st.last_residual() < 1e-6
        && cert.iter().all(|&c| c <= 1e-5)
        && positive
        && fine_ok
        && diff <= 5e-3;
    Outcome::new(
        pass,
        format!(
            "{} iterations, residual {:.2e}, certificate ({:.1e}, {:.1e}), fine-grid diff {diff:.2e}",
            st.k,
            st.last_residual(),
            cert[0],
            cert[1]
        ),
    )
}

fn gradient_holdout() -> Outcome {
    let m = square(64);
    let mut pass = true;
    let mut detail = Vec::new();
    for p in [2.0, 3.0] {
        let cfg = PlapConfig::new(p);
        let (cal, hold) = standard_problems(&m, 3.0, 0);
        let rep = calibrate_kp(&m, &cfg, 3.0, &cal, DEFAULT_SAFETY, 0.0).unwrap();
        let checks = validate_kp(&m, &cfg, 3.0, rep.k_p, &hold).unwrap();
        let min_slack = checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
        pass &= cal.len() == 20 && rep.samples.len() == 20 && checks.len() == 10 && checks.iter().all(|c| c.ok);
        detail.push(format!("p={p}: k_p {:.3}, min holdout slack {min_slack:.3}", rep.k_p));
    }
    Outcome::new(pass, detail.join("; "))
}

fn admissibility_boundary() -> Outcome {
    let specs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let base = SystemSpec::from_toml(&std::fs::read_to_string(specs.join("inadmissible.toml")).unwrap()).unwrap();
    let t = (base.p[0] - 1.0) / base.r[0];
    let grid = [t - 1e-3, t - t * f64::EPSILON, t, t + t * f64::EPSILON, t + 1e-3];
    let mut flips_exactly = true;
    for g in grid {
        let mut s = base.clone();
        s.gamma[0] = g;
        flips_exactly &= validate_cdt(&s).pass() == (g < t);
    }

    let tmp = tempfile::TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_quasisys");
    let run = |args: &[&str], out: &Path| {
        Command::new(bin).args(args).arg("--out").arg(out).stderr(Stdio::null()).status().unwrap().code().unwrap()
    };
    let spec_path = specs.join("inadmissible.toml");
    let spec_arg = spec_path.to_str().unwrap();
    let refused = run(&["fixpoint", "--spec", spec_arg], &tmp.path().join("refused"));
    let axis = format!("gamma1={},{},{}", t - 1e-3, t, t + 1e-3);
    let swept = run(&["sweep", "--spec", spec_arg, "--grid", &axis], &tmp.path().join("sweep"));
    let text = std::fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap_or_default();
    let column: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap_or("")).collect();
    let sweep_ok = swept == 0 && column == ["true", "false", "false"];
    Outcome::new(
        flips_exactly && refused == 3 && sweep_ok,
        format!("threshold {t}, validator exact {flips_exactly}, fixpoint exit {refused}, sweep cdt column {column:?}"),
    )
}

fn hardy_stability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (a, b, k) = (rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(1.0..4.0));
        let field = move |x: [f64; 2]| {
            x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * (1.0 + 0.5 * a * (k * x[0]).sin() + 0.5 * b * (k * x[1]).cos())
        };
        for mu in [0.0, -0.3] {
            for p in [2.0, 3.0] {
                let ratios: Vec<f64> = [16, 32, 64]
                    .iter()
                    .map(|&n| check_hardy(p, mu, &ScalarField::from_fn(square(n), field)).unwrap())
                    .collect();
                for w in ratios.windows(2) {
                    worst = worst.max((w[1] - w[0]).abs() / w[1]);
                }
            }
        }
    }
    Outcome::new(worst < 0.1, format!("worst drift per level {:.2}%", 100.0 * worst))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let elapsed = t.elapsed();
        let pass = out.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n} {name}: {} ({}; {:.1?} of {:?})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed,
            budget
        );
    };
    let min = |m: u64| Duration::from_secs(60 * m);
    report(1, "closed-form solver accuracy", Duration::from_secs(10), &mut closed_form_solver);
    report(2, "weak comparison", min(2), &mut weak_comparison);
    report(3, "barrier constants", min(5), &mut barrier_constants);
    report(4, "singular barrier squeeze", min(2), &mut singular_squeeze);
    let mut run = None;
    report(5, "rectangle invariance", min(10), &mut || {
        let r = run.insert(competitive_run(64));
        rectangle_invariance(r)
    });
    report(6, "fixed-point certificate", min(30), &mut || fixed_point_certificate(run.as_ref().unwrap()));
    report(7, "gradient-bound holdout", min(10), &mut gradient_holdout);
    report(8, "admissibility boundary", min(1), &mut admissibility_boundary);
    report(9, "hardy ratio stability", min(2), &mut hardy_stability);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
