//! The acceptance suite: one callable check per criterion, shared by the
//! CLI `verify` verb and the integration tests. Each check returns a
//! report with a pass flag and a human-readable detail line; tolerances
//! are the contract values, resolutions are the smallest that were
//! validated to satisfy them.

use crate::bifurc::{
    continue_branch, eigenvector_structure, ground_eigen_2d, ground_eigen_2d_seeded,
    hessian_form, phi_second_derivative,
};
use crate::disk::{
    core_energy_fit, energy, find_zeros, minimize, minimize_gl, residual, spin_l2,
    symmetric_solution, add_mode_perturbation, DiskField, DiskGrid,
};
use crate::radial::{derivative_in_b, entire_profile, solve_bvp, solve_cauchy};
use crate::spectral::{
    lambda_beta_single_grid, mu1_of_lambda, muhat_monotonicity, qbreve_infinity,
};

pub struct CriterionReport {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CRITERIA: [(usize, &str); 10] = [
    (1, "shooting correctness"),
    (2, "mode-reduction equivalence"),
    (3, "positivity for beta >= 1"),
    (4, "critical coupling"),
    (5, "muhat monotonicity"),
    (6, "qbreve identity"),
    (7, "disk energetics, beta >= 1"),
    (8, "disk energetics, beta < 1"),
    (9, "bifurcation branch"),
    (10, "determinism and oracles"),
];

pub fn run_criterion(index: usize) -> CriterionReport {
    let (passed, detail) = match index {
        1 => shooting(),
        2 => mode_reduction(),
        3 => positivity(),
        4 => critical_coupling(),
        5 => muhat(),
        6 => qbreve(),
        7 => disk_beta_ge_1(),
        8 => disk_beta_lt_1(),
        9 => branch(),
        10 => determinism(),
        _ => panic!("criterion index out of range"),
    };
    CriterionReport {
        index,
        name: CRITERIA[index - 1].1,
        passed,
        detail,
    }
}

pub fn run_all() -> Vec<CriterionReport> {
    (1..=10).map(run_criterion).collect()
}

fn shooting() -> (bool, String) {
    let mut ok = true;
    let mut detail = String::new();
    let mut prev_b = f64::INFINITY;
    for r in [1.0f64, 2.0, 4.0, 8.0] {
        let sol = match solve_bvp(r, 1e-10, 256) {
            Ok(s) => s,
            Err(e) => return (false, format!("R={r}: {e}")),
        };
        let b = sol.profile.slope_b;
        let res_ok = sol.residual.abs() <= 1e-10;
        let mono_b = b < prev_b;
        prev_b = b;
        let f = &sol.profile.values;
        let nodes = sol.profile.grid.nodes();
        let n = f.len();
        let mut props = true;
        for i in 1..n - 1 {
            props &= f[i] > 0.0 && f[i] < 1.0;
            props &= f[i + 1] - f[i] >= -1e-12;
            if i >= 1 {
                let q0 = f[i] / nodes[i];
                let q1 = f[i + 1] / nodes[i + 1];
                props &= q1 - q0 <= 1e-12;
            }
        }
        ok &= res_ok && mono_b && props;
        detail.push_str(&format!(
            "R={r}: b={b:.6} |phi(R)-1|={:.1e} props={} ",
            sol.residual.abs(),
            props
        ));
    }
    (ok, detail)
}

fn mode_reduction() -> (bool, String) {
    let beta = 0.5;
    let (lb, _, _) = match lambda_beta_single_grid(beta, 1e-4, 384) {
        Ok(v) => v,
        Err(e) => return (false, format!("lambda_beta: {e}")),
    };
    let mut ok = true;
    let mut detail = String::new();
    for s in [0.5, 0.75, 1.0, 1.5, 2.0] {
        let lambda = s * lb;
        let coarse = ground_eigen_2d(lambda, beta, DiskGrid::unit(48, 48));
        let fine = ground_eigen_2d(lambda, beta, DiskGrid::unit(64, 64));
        let (m48, m64, vp, vm) = match (coarse, fine) {
            (Ok((a, _, _)), Ok((b, p, m))) => (a, b, p, m),
            _ => return (false, format!("eigensolver failed at lambda={lambda}")),
        };
        let mref = match mu1_of_lambda(lambda, beta, 1024) {
            Ok(r) => r.eigenvalue_mu,
            Err(e) => return (false, format!("reduced solve: {e}")),
        };
        // Richardson error estimate for the 64^2 value (second order)
        let gerr = (m64 - m48).abs() / ((64.0f64 / 48.0).powi(2) - 1.0);
        let bound = 3.0 * gerr.max(1e-4);
        let within = (m64 - mref).abs() <= bound;
        let mut anti_ok = true;
        if m64 < 0.0 {
            let grid = DiskGrid::unit(64, 64);
            let (anti, _) = eigenvector_structure(&grid, &vp, &vm);
            anti_ok = anti <= 1e-6;
        }
        ok &= within && anti_ok;
        detail.push_str(&format!(
            "lam={lambda:.2}: mu2d={m64:+.4} ref={mref:+.4} bound={bound:.1e} anti_ok={anti_ok} "
        ));
    }
    (ok, detail)
}

fn positivity() -> (bool, String) {
    let mut ok = true;
    let mut detail = String::new();
    for beta in [1.0, 2.0] {
        for lambda in [1.0f64, 10.0, 100.0, 1e3, 1e4] {
            let n1 = ((16.0 * lambda.sqrt()) as usize).max(768);
            let sr = match mu1_of_lambda(lambda, beta, n1) {
                Ok(r) => r,
                Err(e) => return (false, format!("reduced b={beta} lam={lambda}: {e}")),
            };
            let mu_red = sr.eigenvalue_mu;
            // The 2D discretization error at the core-localized ground mode
            // is dominated by the angular difference, scaling like
            // lambda * dtheta^2; resolve the radial core scale directly
            // (n_r ~ 16 sqrt(lambda)) and remove the angular error by
            // Richardson extrapolation across two angular resolutions.
            let n_r = ((16.0 * lambda.sqrt()) as usize).clamp(64, 1600);
            let n_t = if lambda <= 100.0 { 48 } else { 96 };
            let pair = sr.pair.as_ref().expect("mode-1 solve carries its pair");
            let mut mus = [0.0f64; 2];
            for (s, mu) in mus.iter_mut().enumerate() {
                *mu = match ground_eigen_2d_seeded(
                    lambda,
                    beta,
                    DiskGrid::unit(n_r, n_t << s),
                    pair,
                    30_000,
                    1e-6,
                ) {
                    Ok((m, _, _)) => m,
                    Err(e) => return (false, format!("2d b={beta} lam={lambda}: {e}")),
                };
            }
            let mu_2d = mus[1] + (mus[1] - mus[0]) / 3.0;
            ok &= mu_red > 0.0 && mu_2d > 0.0;
            detail.push_str(&format!(
                "b={beta} lam={lambda:.0}: mured={mu_red:+.2e} mu2d={mu_2d:+.2e} "
            ));
        }
    }
    (ok, detail)
}

fn critical_coupling() -> (bool, String) {
    let mut ok = true;
    let mut detail = String::new();
    for beta in [0.25, 0.5, 0.75] {
        let coarse = lambda_beta_single_grid(beta, 1e-6, 384);
        let fine = lambda_beta_single_grid(beta, 1e-6, 768);
        let ((lc, _, sc), (lf, bracket, sf)) = match (coarse, fine) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return (false, format!("no crossing at beta={beta}")),
        };
        let bracketed = bracket.0 < lf && lf < bracket.1;
        let slope_neg = sc < 0.0 && sf < 0.0;
        // three significant digits across the two grid levels
        let three_digits = (lf - lc).abs() / lf.abs() <= 5e-4;
        ok &= bracketed && slope_neg && three_digits;
        detail.push_str(&format!(
            "beta={beta}: lb384={lc:.5} lb768={lf:.5} slope={sf:+.3} "
        ));
    }
    (ok, detail)
}

fn muhat() -> (bool, String) {
    let rs = [1.0, 2.0, 4.0, 8.0, 16.0];
    let vals = match muhat_monotonicity(0.5, &rs, 768) {
        Ok(v) => v,
        Err(e) => return (false, format!("{e}")),
    };
    let mut ok = true;
    let mut detail = String::new();
    for w in vals.windows(2) {
        ok &= w[1].1 < w[0].1;
    }
    for (r, m) in &vals {
        detail.push_str(&format!("muhat({r})={m:+.4e} "));
    }
    (ok, detail)
}

fn qbreve() -> (bool, String) {
    let prof = match entire_profile(40.0, 1e-10, 4000) {
        Ok(p) => p,
        Err(e) => return (false, format!("{e}")),
    };
    let mut ok = true;
    let mut detail = String::new();
    let mut scale = 0.0f64;
    let mut results = Vec::new();
    for beta in [0.5f64, 1.0, 1.5] {
        let (form, closed): (f64, f64) = qbreve_infinity(beta, &prof);
        scale = scale.max(form.abs()).max(closed.abs());
        results.push((beta, form, closed));
    }
    for (beta, form, closed) in results {
        let within = if beta == 1.0 {
            // exact cancellation up to quadrature error
            form.abs() <= 0.02 * scale
        } else {
            (form - closed).abs() <= 0.02 * closed.abs()
        };
        let sign = if beta < 1.0 {
            form < 0.0
        } else if beta > 1.0 {
            form > 0.0
        } else {
            true
        };
        ok &= within && sign;
        detail.push_str(&format!("beta={beta}: Q={form:+.4} closed={closed:+.4} "));
    }
    (ok, detail)
}

const DISK_N: usize = 160;
const MIN_TOL: f64 = 1e-3;
const MIN_ITERS: usize = 40_000;

fn disk_beta_ge_1() -> (bool, String) {
    let eps = 0.05;
    let (_, i_gl, _) = minimize_gl(DiskGrid::unit(DISK_N, DISK_N), eps, MIN_TOL, MIN_ITERS);
    let init11 = DiskField::initial(DiskGrid::unit(DISK_N, DISK_N), (1, 1), eps, 2.0);
    let (f11, r11) = minimize(&init11, MIN_TOL, MIN_ITERS);
    let init10 = DiskField::initial(DiskGrid::unit(DISK_N, DISK_N), (1, 0), eps, 1.0);
    let (_f10, r10) = minimize(&init10, MIN_TOL, MIN_ITERS);
    let spin = spin_l2(&f11);
    let e11_ok = (r11.energy - i_gl).abs() <= 0.01 * i_gl;
    let spin_ok = spin <= 1e-3;
    let e10_ok = (r10.energy - 0.5 * i_gl).abs() <= 0.01 * (0.5 * i_gl);
    (
        e11_ok && spin_ok && e10_ok,
        format!(
            "I_GL={i_gl:.5} I11(b=2)={:.5} spin={spin:.1e} I10(b=1)={:.5} (half I_GL={:.5})",
            r11.energy,
            r10.energy,
            0.5 * i_gl
        ),
    )
}

fn disk_beta_lt_1() -> (bool, String) {
    let beta = 0.5;
    let eps_list = [0.1, 0.05, 0.03];
    let pair = match mu1_of_lambda(400.0, beta, 768) {
        Ok(r) => r.pair.unwrap(),
        Err(e) => return (false, format!("mode pair: {e}")),
    };
    let grid = || DiskGrid::unit(DISK_N, DISK_N);
    let cell = grid().dr;
    let mut ok = true;
    let mut detail = String::new();
    let mut spins = Vec::new();
    let mut samples11 = Vec::new();
    let mut samples10 = Vec::new();
    let mut samples_gl = Vec::new();
    for &eps in &eps_list {
        let lambda = 1.0 / (eps * eps);
        // (1,1) with the saddle-escape kick
        let mut init = DiskField::initial(grid(), (1, 1), eps, beta);
        add_mode_perturbation(&mut init, &pair, 0.05);
        let (f11, r11) = minimize(&init, MIN_TOL, MIN_ITERS);
        let u = match symmetric_solution(lambda, beta, grid()) {
            Ok(u) => u,
            Err(e) => return (false, format!("U_lambda eps={eps}: {e}")),
        };
        let e_sym = energy(&u).total;
        let below = r11.energy < e_sym;
        let spin11 = spin_l2(&f11);
        spins.push(spin11);
        samples11.push((eps, r11.energy));
        // zeros separated by more than one cell
        let (zp, zm) = match find_zeros(&f11) {
            Ok(z) => z,
            Err(e) => return (false, format!("zeros eps={eps}: {e}")),
        };
        let sep_ok = match (zp.first(), zm.first()) {
            (Some(&(ax, ay)), Some(&(bx, by))) => f64::hypot(ax - bx, ay - by) > cell,
            _ => false,
        };
        // (1,0) spin bound
        let init10 = DiskField::initial(grid(), (1, 0), eps, beta);
        let (f10, r10) = minimize(&init10, MIN_TOL, MIN_ITERS);
        let spin10 = spin_l2(&f10);
        samples10.push((eps, r10.energy));
        let spin10_ok = spin10 >= (std::f64::consts::PI / 8.0) * 0.85;
        // GL reference for the core-energy chain
        let (_, i_gl, _) = minimize_gl(grid(), eps, MIN_TOL, MIN_ITERS);
        samples_gl.push((eps, i_gl));
        ok &= below && sep_ok && spin10_ok;
        detail.push_str(&format!(
            "eps={eps}: I11={:.4}<E(U)={e_sym:.4}:{below} spin11={spin11:.3} spin10={spin10:.3} sep_ok={sep_ok} ",
            r11.energy
        ));
    }
    // spin bound and trend at the smallest eps
    let spin_floor = (std::f64::consts::PI / 4.0) * 0.85;
    ok &= spins.last().copied().unwrap_or(0.0) >= spin_floor;
    ok &= spins.windows(2).all(|w| w[1] > w[0]);
    // core-energy chain with tol = 0.1
    let q11 = core_energy_fit((1, 1), beta, samples11);
    let q10 = core_energy_fit((1, 0), beta, samples10);
    let qgl = core_energy_fit((1, 1), 2.0, samples_gl);
    match (q11, q10, qgl) {
        (Ok(a), Ok(b), Ok(c)) => {
            let tol = 0.1;
            let chain1 = a.q_extrapolated <= 2.0 * b.q_extrapolated + tol;
            let chain2 =
                2.0 * b.q_extrapolated + tol <= c.q_extrapolated - (1.0 - beta) * std::f64::consts::PI / 4.0 + tol;
            ok &= chain1 && chain2;
            detail.push_str(&format!(
                "Q11={:.4} 2*Q10={:.4} QGL-pi/8={:.4} chain={}",
                a.q_extrapolated,
                2.0 * b.q_extrapolated,
                c.q_extrapolated - (1.0 - beta) * std::f64::consts::PI / 4.0,
                chain1 && chain2
            ));
        }
        _ => {
            ok = false;
            detail.push_str("core-energy fit failed");
        }
    }
    (ok, detail)
}

fn branch() -> (bool, String) {
    let beta = 0.5;
    let (lb, _, _) = match lambda_beta_single_grid(beta, 1e-6, 768) {
        Ok(v) => v,
        Err(e) => return (false, format!("lambda_beta: {e}")),
    };
    let pair = match mu1_of_lambda(lb, beta, 512) {
        Ok(r) => r.pair.unwrap(),
        Err(e) => return (false, format!("pair: {e}")),
    };
    let grid = DiskGrid::unit(64, 64);
    let cell = grid.dr;
    let pts = match continue_branch(beta, lb, &pair, grid, 0.24, 6, 1e-8) {
        Ok(p) => p,
        Err(e) => return (false, format!("continuation: {e}")),
    };
    let mut ok = pts.len() >= 10;
    for p in &pts {
        ok &= p.newton_residual <= 1e-8;
        ok &= p.t_symmetry_residual <= 1e-8;
        let ((ax, ay), (bx, by)) = p.zeros;
        ok &= f64::hypot(ax + bx, ay + by) <= cell;
    }
    // evenness: match +-t pairs
    let mut evenness: f64 = 0.0;
    for p in &pts {
        if p.t > 0.0 {
            if let Some(q) = pts.iter().find(|q| (q.t + p.t).abs() < 1e-12) {
                evenness = evenness.max((p.lambda - q.lambda).abs() / p.lambda);
            }
        }
    }
    ok &= evenness <= 1e-6;
    // lambda(t) -> lambda_beta as t -> 0 (within grid error of the 64^2
    // discretization, a couple of percent)
    let nearest = pts
        .iter()
        .min_by(|a, b| a.t.abs().partial_cmp(&b.t.abs()).unwrap())
        .unwrap();
    ok &= (nearest.lambda - lb).abs() / lb <= 0.02;
    let fit = phi_second_derivative(&pts);
    let fit_line = match fit {
        Ok((phi2, odd, rms)) => {
            ok &= odd <= 1e-4 * phi2.abs() * 0.24;
            format!("phi''(0)={phi2:.3} odd={odd:.1e} rms={rms:.1e}")
        }
        Err(e) => {
            ok = false;
            format!("fit: {e}")
        }
    };
    (
        ok,
        format!(
            "{} points, evenness={evenness:.1e}, lam(t_min)={:.4} vs lb={lb:.4}, {fit_line}",
            pts.len(),
            nearest.lambda
        ),
    )
}

fn determinism() -> (bool, String) {
    let mut ok = true;
    let mut detail = String::new();
    // byte-identical repeated runs
    let a = solve_bvp(2.0f64, 1e-10, 128).unwrap();
    let b = solve_bvp(2.0f64, 1e-10, 128).unwrap();
    let bits_eq = a.profile.slope_b.to_bits() == b.profile.slope_b.to_bits()
        && a.profile
            .values
            .iter()
            .zip(&b.profile.values)
            .all(|(x, y)| x.to_bits() == y.to_bits());
    let e1: f64 = {
        let init = DiskField::initial(DiskGrid::unit(48, 48), (1, 1), 0.1, 2.0);
        minimize(&init, 1e-3, 5000).1.energy
    };
    let e2: f64 = {
        let init = DiskField::initial(DiskGrid::unit(48, 48), (1, 1), 0.1, 2.0);
        minimize(&init, 1e-3, 5000).1.energy
    };
    ok &= bits_eq && e1.to_bits() == e2.to_bits();
    detail.push_str(&format!("repeat_bits_eq={} ", bits_eq && e1.to_bits() == e2.to_bits()));
    // gradient vs finite differences on a deterministic perturbation
    let state = symmetric_solution(16.0f64, 0.5, DiskGrid::unit(40, 40)).unwrap();
    let g = state.grid.clone();
    let n = g.n_nodes();
    let mut php = vec![num_complex::Complex::new(0.0, 0.0); n];
    let mut phm = php.clone();
    for j in 0..g.n_r - 1 {
        for k in 0..g.n_theta {
            let i = g.idx(j, k);
            let r = g.r[j];
            let th = g.theta[k];
            php[i] = num_complex::Complex::new(r * (1.0 - r) * th.sin(), r * (1.0 - r) * (2.0 * th).cos());
            phm[i] = num_complex::Complex::new(-r * (1.0 - r), r * (1.0 - r) * th.cos());
        }
    }
    let (gp, gm) = residual(&state);
    let mut pairing = 0.0f64;
    for i in 0..n {
        let j = i / g.n_theta;
        let w = g.wr[j] * g.dtheta;
        pairing += w * (gp[i].re * php[i].re + gp[i].im * php[i].im);
        pairing += w * (gm[i].re * phm[i].re + gm[i].im * phm[i].im);
    }
    let fd = {
        let h = 1e-6;
        let mut plus = state.clone();
        let mut minus = state.clone();
        for i in 0..n {
            plus.psi_plus[i] += php[i] * h;
            plus.psi_minus[i] += phm[i] * h;
            minus.psi_plus[i] -= php[i] * h;
            minus.psi_minus[i] -= phm[i] * h;
        }
        (energy(&plus).total - energy(&minus).total) / (2.0 * h)
    };
    let grad_ok = (pairing - fd).abs() <= 1e-6 * fd.abs().max(1.0);
    ok &= grad_ok;
    detail.push_str(&format!("grad_fd_rel={:.1e} ", (pairing - fd).abs() / fd.abs().max(1.0)));
    // derivative_in_b against its finite-difference oracle
    let b0 = 0.55f64;
    let (_, dphi) = derivative_in_b(b0, 3.0, 1e-10, 256).unwrap();
    let hb = 1e-6;
    let up = solve_cauchy(b0 + hb, 3.0, 1e-12, 256).unwrap();
    let dn = solve_cauchy(b0 - hb, 3.0, 1e-12, 256).unwrap();
    let mut db_err = 0.0f64;
    for i in 0..up.phi.len() {
        let fd_i = (up.phi[i] - dn.phi[i]) / (2.0 * hb);
        db_err = db_err.max((dphi[i] - fd_i).abs());
    }
    let db_ok = db_err <= 1e-5;
    ok &= db_ok;
    detail.push_str(&format!("d/db_fd_err={db_err:.1e} "));
    // quadratic form vs Richardson quadrature oracle
    let form = hessian_form(&state, &php, &phm);
    let second = |h: f64| {
        let mut plus = state.clone();
        let mut minus = state.clone();
        for i in 0..n {
            plus.psi_plus[i] += php[i] * h;
            plus.psi_minus[i] += phm[i] * h;
            minus.psi_plus[i] -= php[i] * h;
            minus.psi_minus[i] -= phm[i] * h;
        }
        (energy(&plus).total + energy(&minus).total - 2.0 * energy(&state).total) / (h * h)
    };
    let d1 = second(2e-3);
    let d2 = second(1e-3);
    let oracle = (4.0 * d2 - d1) / 3.0;
    let form_ok = (form - oracle).abs() <= 1e-6 * oracle.abs().max(1.0);
    ok &= form_ok;
    detail.push_str(&format!(
        "form_rel={:.1e}",
        (form - oracle).abs() / oracle.abs().max(1.0)
    ));
    (ok, detail)
}
