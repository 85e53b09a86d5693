//! Experiment orchestration: declarative configs in, CSV/JSON reports and
//! a digest manifest out. Jobs are pure and merged in parameter-key order,
//! so parallel and serial runs produce identical files.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use vortexlab_core::acceptance;
use vortexlab_core::bifurc::continue_branch;
use vortexlab_core::disk::{
    add_mode_perturbation, core_energy, find_zeros, minimize, residual_norm, spin_l2, DiskField,
    DiskGrid,
};
use vortexlab_core::io;
use vortexlab_core::radial::{entire_profile, solve_bvp};
use vortexlab_core::spectral::{
    assemble_mode_n, find_lambda_beta, ground_eigenpair, lambda_beta_single_grid, mu1_of_lambda,
    qbreve_infinity, Sector,
};

#[derive(Parser)]
#[command(name = "vortexlab", version, about = "compound-vortex laboratory")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Experiment config in the flat key = value format.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; jobs are pure, the count never changes results.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed recorded in the manifest and used for randomized test vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Verb {
    /// Radial profiles F(r; R) for a list of R.
    Profile(Common),
    /// Mode-operator ground eigenvalues over (beta, lambda, mode).
    Spectrum(Common),
    /// Critical couplings lambda_beta for a list of beta.
    LambdaBeta(Common),
    /// Disk energy minimization with boundary winding data.
    Dirichlet(Common),
    /// Core-energy extrapolation over an epsilon list.
    CoreEnergy(Common),
    /// Continuation of the non-equivariant branch.
    Branch(Common),
    /// Entire-plane quadratic form Qbreve against its closed form.
    Qbreve(Common),
    /// Run the acceptance suite.
    Verify(Common),
}

type JobFiles = Vec<(String, Vec<u8>)>;
type Job = Box<dyn FnOnce() -> Result<JobFiles, String> + Send>;

#[derive(Serialize)]
struct ManifestJob {
    key: String,
    wall_ms: u128,
    ok: bool,
}

#[derive(Serialize)]
struct ManifestFile {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    artifact_version: String,
    seed: u64,
    config: String,
    jobs: Vec<ManifestJob>,
    files: Vec<ManifestFile>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, result) = match &cli.verb {
        Verb::Profile(c) => (c, build_profile(c)),
        Verb::Spectrum(c) => (c, build_spectrum(c)),
        Verb::LambdaBeta(c) => (c, build_lambda_beta(c)),
        Verb::Dirichlet(c) => (c, build_dirichlet(c)),
        Verb::CoreEnergy(c) => (c, build_core_energy(c)),
        Verb::Branch(c) => (c, build_branch(c)),
        Verb::Qbreve(c) => (c, build_qbreve(c)),
        Verb::Verify(c) => return run_verify(c),
    };
    let (config_text, jobs) = match result {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match execute(common, config_text, jobs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}

fn load_config(common: &Common) -> Result<config::RawConfig, String> {
    match &common.config {
        None => Ok(config::RawConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            config::parse_raw(&text).map_err(|e| e.to_string())
        }
    }
}

type Built = (String, Vec<(String, Job)>);

fn fmt_key(x: f64) -> String {
    format!("{x}").replace('.', "p").replace('-', "m")
}

fn build_profile(common: &Common) -> Result<Built, String> {
    let cfg = load_config(common)?;
    cfg.check_keys(&["R", "n", "tol"]).map_err(|e| e.to_string())?;
    let rs = cfg.floats("R", Some(&[1.0, 2.0, 4.0, 8.0])).map_err(|e| e.to_string())?;
    config::validate_positive(&cfg, "R", &rs).map_err(|e| e.to_string())?;
    let n = cfg.usize_val("n", Some(256)).map_err(|e| e.to_string())?;
    let tol = cfg.float("tol", Some(1e-10)).map_err(|e| e.to_string())?;
    let mut jobs: Vec<(String, Job)> = Vec::new();
    for r in rs {
        let key = format!("R{}", fmt_key(r));
        let kc = key.clone();
        jobs.push((
            key,
            Box::new(move || {
                let profile = if r <= 10.0 {
                    solve_bvp(r, tol, n).map(|s| s.profile)
                } else {
                    entire_profile(r, tol, n.max(10 * r as usize))
                }
                .map_err(|e| format!("{kc}: {e}"))?;
                let mut buf = Vec::new();
                render(&mut buf, |p| io::write_profile_csv(p, &profile, profile.slope_b))?;
                Ok(vec![(format!("profile_{kc}.csv"), buf)])
            }),
        ));
    }
    Ok((cfg.text, jobs))
}

fn build_spectrum(common: &Common) -> Result<Built, String> {
    let cfg = load_config(common)?;
    cfg.check_keys(&["beta", "lambda", "modes", "n_cells"])
        .map_err(|e| e.to_string())?;
    let betas = cfg.floats("beta", Some(&[0.5])).map_err(|e| e.to_string())?;
    config::validate_betas(&cfg, &betas).map_err(|e| e.to_string())?;
    let lambdas = cfg
        .floats("lambda", Some(&[4.0, 16.0, 64.0]))
        .map_err(|e| e.to_string())?;
    config::validate_positive(&cfg, "lambda", &lambdas).map_err(|e| e.to_string())?;
    let modes_f = cfg.floats("modes", Some(&[0.0, 1.0, 2.0])).map_err(|e| e.to_string())?;
    let modes: Vec<usize> = modes_f.iter().map(|&m| m as usize).collect();
    let n_cells = cfg.usize_val("n_cells", Some(768)).map_err(|e| e.to_string())?;
    let mut jobs: Vec<(String, Job)> = Vec::new();
    for &beta in &betas {
        for &lambda in &lambdas {
            let key = format!("b{}_lam{}", fmt_key(beta), fmt_key(lambda));
            let kc = key.clone();
            let modes = modes.clone();
            jobs.push((
                key,
                Box::new(move || {
                    let profile = vortexlab_core::radial::profile_f_lambda(
                        lambda,
                        1e-10,
                        (4 * n_cells).max(1024),
                    )
                    .map_err(|e| format!("{kc}: {e}"))?;
                    let mut rows = Vec::new();
                    for &m in &modes {
                        for (si, sector) in [Sector::Minus, Sector::Plus].into_iter().enumerate() {
                            let op = assemble_mode_n(m, lambda, beta, &profile, sector, n_cells);
                            let eig = ground_eigenpair(&op, 1)
                                .map_err(|e| format!("{kc} mode {m}: {e}"))?;
                            rows.push(io::SpectralRow {
                                beta,
                                lambda,
                                radius: lambda.sqrt(),
                                mode: m,
                                index: si,
                                mu: eig[0].value,
                                residual: eig[0].residual,
                            });
                        }
                    }
                    let mut buf = Vec::new();
                    render(&mut buf, |p| io::write_spectral_csv(p, &rows))?;
                    Ok(vec![(format!("spectrum_{kc}.csv"), buf)])
                }),
            ));
        }
    }
    Ok((cfg.text, jobs))
}

fn build_lambda_beta(common: &Common) -> Result<Built, String> {
    let cfg = load_config(common)?;
    cfg.check_keys(&["beta", "n_cells", "rel_tol"]).map_err(|e| e.to_string())?;
    let betas = cfg
        .floats("beta", Some(&[0.25, 0.5, 0.75]))
        .map_err(|e| e.to_string())?;
    config::validate_betas(&cfg, &betas).map_err(|e| e.to_string())?;
    let n_cells = cfg.usize_val("n_cells", Some(384)).map_err(|e| e.to_string())?;
    let rel_tol = cfg.float("rel_tol", Some(1e-6)).map_err(|e| e.to_string())?;
    let mut jobs: Vec<(String, Job)> = Vec::new();
    for beta in betas {
        let key = format!("b{}", fmt_key(beta));
        let kc = key.clone();
        jobs.push((
            key,
            Box::new(move || {
                let cc = find_lambda_beta(beta, rel_tol, n_cells)
                    .map_err(|e| format!("{kc}: {e}"))?;
                let mut buf = Vec::new();
                render(&mut buf, |p| io::write_critical_coupling_json(p, &cc))?;
                Ok(vec![(format!("lambda_beta_{kc}.json"), buf)])
            }),
        ));
    }
    Ok((cfg.text, jobs))
}

fn build_dirichlet(common: &Common) -> Result<Built, String> {
    let cfg = load_config(common)?;
    cfg.check_keys(&["beta", "eps", "degrees", "n", "tol", "kick"])
        .map_err(|e| e.to_string())?;
    let beta = cfg.float("beta", Some(0.5)).map_err(|e| e.to_string())?;
    config::validate_betas(&cfg, &[beta]).map_err(|e| e.to_string())?;
    let eps = cfg.floats("eps", Some(&[0.05])).map_err(|e| e.to_string())?;
    config::validate_positive(&cfg, "eps", &eps).map_err(|e| e.to_string())?;
    let degrees = cfg.degrees("degrees", (1, 1)).map_err(|e| e.to_string())?;
    let n = cfg.usize_val("n", Some(160)).map_err(|e| e.to_string())?;
    let tol = cfg.float("tol", Some(1e-3)).map_err(|e| e.to_string())?;
    let kick = cfg.float("kick", Some(0.05)).map_err(|e| e.to_string())?;
    let mut jobs: Vec<(String, Job)> = Vec::new();
    for e in eps {
        let key = format!("eps{}", fmt_key(e));
        let kc = key.clone();
        jobs.push((
            key,
            Box::new(move || {
                let mut init = DiskField::initial(DiskGrid::unit(n, n), degrees, e, beta);
                if beta < 1.0 && degrees == (1, 1) {
                    let pair = mu1_of_lambda(1.0 / (e * e), beta, 768)
                        .map_err(|er| format!("{kc}: {er}"))?
                        .pair
                        .expect("mode-1 result carries its pair");
                    add_mode_perturbation(&mut init, &pair, kick);
                }
                let (field, report) = minimize(&init, tol, 40_000);
                let (zp, zm) = find_zeros(&field).map_err(|er| format!("{kc}: {er}"))?;
                let mut csv = Vec::new();
                render(&mut csv, |p| io::write_field_csv(p, &field))?;
                let mut side = Vec::new();
                render(&mut side, |p| io::write_field_sidecar(p, &field))?;
                let mut plot = Vec::new();
                render(&mut plot, |p| {
                    io::write_plot_script(p, &format!("field_{kc}.csv"))
                })?;
                let summary = format!(
                    "eps,energy,spin_l2,residual,iterations,n_zeros_plus,n_zeros_minus\n{},{},{},{},{},{},{}\n",
                    io::fmt_f64(e),
                    io::fmt_f64(report.energy),
                    io::fmt_f64(spin_l2(&field)),
                    io::fmt_f64(residual_norm(&field)),
                    report.iterations,
                    zp.len(),
                    zm.len()
                );
                Ok(vec![
                    (format!("field_{kc}.csv"), csv),
                    (format!("field_{kc}.json"), side),
                    (format!("field_{kc}.gp"), plot),
                    (format!("dirichlet_{kc}.csv"), summary.into_bytes()),
                ])
            }),
        ));
    }
    Ok((cfg.text, jobs))
}

fn build_core_energy(common: &Common) -> Result<Built, String> {
    let cfg = load_config(common)?;
    cfg.check_keys(&["beta", "eps", "degrees", "n", "tol"])
        .map_err(|e| e.to_string())?;
    let beta = cfg.float("beta", Some(2.0)).map_err(|e| e.to_string())?;
    config::validate_betas(&cfg, &[beta]).map_err(|e| e.to_string())?;
    let eps = cfg
        .floats("eps", Some(&[0.1, 0.05, 0.03]))
        .map_err(|e| e.to_string())?;
    config::validate_positive(&cfg, "eps", &eps).map_err(|e| e.to_string())?;
    let degrees = cfg.degrees("degrees", (1, 1)).map_err(|e| e.to_string())?;
    let n = cfg.usize_val("n", Some(160)).map_err(|e| e.to_string())?;
    let tol = cfg.float("tol", Some(1e-3)).map_err(|e| e.to_string())?;
    let key = format!("deg{}_{}_b{}", degrees.0, degrees.1, fmt_key(beta));
    let kc = key.clone();
    let job: Job = Box::new(move || {
        let pair = if beta < 1.0 && degrees == (1, 1) {
            Some(
                mu1_of_lambda(400.0, beta, 768)
                    .map_err(|e| format!("{kc}: {e}"))?
                    .pair
                    .expect("mode-1 result carries its pair"),
            )
        } else {
            None
        };
        let grid_for = |_e: f64| DiskGrid::unit(n, n);
        let est = core_energy(&grid_for, degrees, beta, &eps, tol, pair.as_ref())
            .map_err(|e| format!("{kc}: {e}"))?;
        let mut table = String::from("eps,energy\n");
        for &(e, i) in &est.samples {
            table.push_str(&format!("{},{}\n", io::fmt_f64(e), io::fmt_f64(i)));
        }
        #[derive(Serialize)]
        struct CoreOut {
            degrees: (i32, i32),
            beta: f64,
            q_extrapolated: f64,
            c1: f64,
            fit_residual: f64,
        }
        let mut json = Vec::new();
        render(&mut json, |p| {
            io::write_json(
                p,
                &CoreOut {
                    degrees: est.degrees,
                    beta: est.beta,
                    q_extrapolated: est.q_extrapolated,
                    c1: est.c1,
                    fit_residual: est.fit_residual,
                },
            )
        })?;
        Ok(vec![
            (format!("core_energy_{kc}.csv"), table.into_bytes()),
            (format!("core_energy_{kc}.json"), json),
        ])
    });
    Ok((cfg.text, vec![(key, job)]))
}

fn build_branch(common: &Common) -> Result<Built, String> {
    let cfg = load_config(common)?;
    cfg.check_keys(&["beta", "t_max", "n_steps", "n", "tol", "n_cells"])
        .map_err(|e| e.to_string())?;
    let betas = cfg.floats("beta", Some(&[0.5])).map_err(|e| e.to_string())?;
    config::validate_betas(&cfg, &betas).map_err(|e| e.to_string())?;
    let t_max = cfg.float("t_max", Some(0.24)).map_err(|e| e.to_string())?;
    let n_steps = cfg.usize_val("n_steps", Some(6)).map_err(|e| e.to_string())?;
    let n = cfg.usize_val("n", Some(64)).map_err(|e| e.to_string())?;
    let tol = cfg.float("tol", Some(1e-8)).map_err(|e| e.to_string())?;
    let n_cells = cfg.usize_val("n_cells", Some(768)).map_err(|e| e.to_string())?;
    let mut jobs: Vec<(String, Job)> = Vec::new();
    for beta in betas {
        if beta >= 1.0 {
            return Err(format!(
                "config line {}: branch requires 0 < beta < 1 (no bifurcation otherwise)",
                cfg.line_of("beta")
            ));
        }
        let key = format!("b{}", fmt_key(beta));
        let kc = key.clone();
        jobs.push((
            key,
            Box::new(move || {
                let (lb, _, _) = lambda_beta_single_grid(beta, 1e-6, n_cells)
                    .map_err(|e| format!("{kc}: {e}"))?;
                let pair = mu1_of_lambda(lb, beta, 512)
                    .map_err(|e| format!("{kc}: {e}"))?
                    .pair
                    .expect("mode-1 result carries its pair");
                let pts = continue_branch(beta, lb, &pair, DiskGrid::unit(n, n), t_max, n_steps, tol)
                    .map_err(|e| format!("{kc}: {e}"))?;
                let (phi2, _, _) = vortexlab_core::bifurc::phi_second_derivative(&pts)
                    .map_err(|e| format!("{kc}: {e}"))?;
                let mut csv = Vec::new();
                render(&mut csv, |p| io::write_branch_csv(p, &pts))?;
                let mut json = Vec::new();
                render(&mut json, |p| {
                    io::write_branch_summary_json(
                        p,
                        &io::BranchSummary {
                            beta,
                            lambda_beta: lb,
                            phi_second_derivative: phi2,
                            sign: if phi2 >= 0.0 { 1 } else { -1 },
                            n_points: pts.len(),
                        },
                    )
                })?;
                Ok(vec![
                    (format!("branch_{kc}.csv"), csv),
                    (format!("branch_{kc}.json"), json),
                ])
            }),
        ));
    }
    Ok((cfg.text, jobs))
}

fn build_qbreve(common: &Common) -> Result<Built, String> {
    let cfg = load_config(common)?;
    cfg.check_keys(&["beta", "r_max", "n"]).map_err(|e| e.to_string())?;
    let betas = cfg
        .floats("beta", Some(&[0.5, 1.0, 1.5]))
        .map_err(|e| e.to_string())?;
    config::validate_betas(&cfg, &betas).map_err(|e| e.to_string())?;
    let r_max = cfg.float("r_max", Some(40.0)).map_err(|e| e.to_string())?;
    let n = cfg.usize_val("n", Some(4000)).map_err(|e| e.to_string())?;
    let key = "qbreve".to_string();
    let job: Job = Box::new(move || {
        let prof = entire_profile(r_max, 1e-10, n).map_err(|e| format!("{e}"))?;
        let mut out = String::from("beta,form,closed\n");
        for beta in betas {
            let (form, closed) = qbreve_infinity(beta, &prof);
            out.push_str(&format!(
                "{},{},{}\n",
                io::fmt_f64(beta),
                io::fmt_f64(form),
                io::fmt_f64(closed)
            ));
        }
        Ok(vec![("qbreve.csv".to_string(), out.into_bytes())])
    });
    Ok((cfg.text, vec![(key, job)]))
}

fn run_verify(common: &Common) -> ExitCode {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = cfg.check_keys(&["criteria"]) {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let indices: Vec<usize> = match cfg.floats("criteria", Some(&[])) {
        Ok(v) if v.is_empty() => (1..=10).collect(),
        Ok(v) => v.iter().map(|&x| x as usize).collect(),
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if indices.iter().any(|&i| !(1..=10).contains(&i)) {
        eprintln!("criteria indices must be in 1..=10");
        return ExitCode::from(2);
    }
    let mut lines = String::new();
    let mut all_ok = true;
    for i in indices {
        let r = acceptance::run_criterion(i);
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        let line = format!("criterion {i:2} ({}): {verdict} — {}", r.name, r.detail);
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
        all_ok &= r.passed;
    }
    if std::fs::create_dir_all(&common.out).is_ok() {
        let _ = std::fs::write(common.out.join("verify.txt"), lines);
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

/// Run a writer that expects a path against an in-memory buffer via a
/// temporary file; keeps the io module's path-based API single-purpose.
fn render<F: FnOnce(&Path) -> std::io::Result<()>>(
    buf: &mut Vec<u8>,
    f: F,
) -> Result<(), String> {
    let dir = std::env::temp_dir();
    let name = format!(
        "vortexlab-{}-{:x}",
        std::process::id(),
        std::time::UNIX_EPOCH.elapsed().map(|d| d.as_nanos()).unwrap_or(0)
    );
    let path = dir.join(name);
    let out = f(&path)
        .and_then(|()| std::fs::read(&path))
        .map_err(|e| e.to_string())?;
    let _ = std::fs::remove_file(&path);
    *buf = out;
    Ok(())
}

fn execute(common: &Common, config_text: String, jobs: Vec<(String, Job)>) -> Result<(), String> {
    let n_jobs = jobs.len();
    let workers = common
        .jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .clamp(1, n_jobs.max(1));
    let keys: Vec<String> = jobs.iter().map(|(k, _)| k.clone()).collect();
    let slots: Vec<Mutex<Option<Job>>> = jobs
        .into_iter()
        .map(|(_, j)| Mutex::new(Some(j)))
        .collect();
    let results: Vec<Mutex<Option<(Result<JobFiles, String>, u128)>>> =
        (0..n_jobs).map(|_| Mutex::new(None)).collect();
    let counter = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = counter.fetch_add(1, Ordering::SeqCst);
                if i >= n_jobs {
                    break;
                }
                let job = slots[i].lock().unwrap().take().expect("job taken once");
                let t0 = Instant::now();
                let out = job();
                *results[i].lock().unwrap() = Some((out, t0.elapsed().as_millis()));
            });
        }
    });
    std::fs::create_dir_all(&common.out).map_err(|e| e.to_string())?;
    let mut manifest_jobs = Vec::new();
    let mut manifest_files = Vec::new();
    let mut failures = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        let (outcome, wall_ms) = results[i].lock().unwrap().take().expect("job ran");
        let ok = outcome.is_ok();
        manifest_jobs.push(ManifestJob {
            key: key.clone(),
            wall_ms,
            ok,
        });
        match outcome {
            Ok(files) => {
                for (name, bytes) in files {
                    let digest = Sha256::digest(&bytes);
                    std::fs::write(common.out.join(&name), &bytes).map_err(|e| e.to_string())?;
                    manifest_files.push(ManifestFile {
                        name,
                        sha256: format!("{digest:x}"),
                    });
                }
            }
            Err(e) => failures.push(e),
        }
    }
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: common.seed,
        config: config_text,
        jobs: manifest_jobs,
        files: manifest_files,
    };
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    std::fs::write(common.out.join("manifest.json"), body + "\n").map_err(|e| e.to_string())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures.join("\n"))
    }
}
