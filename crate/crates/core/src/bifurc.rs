//! Full 2D linearization around the symmetric vortex and continuation of
//! the non-equivariant branch bifurcating at lambda_beta.
//!
//! The corrector works on the extended unknown (Psi, nu, lambda): the
//! discrete Euler-Lagrange system with a gauge multiplier nu against the
//! S^1 generator, the gauge orthogonality row, and the amplitude
//! constraint <Psi - U_lambda, W_1> = t that trades lambda for the branch
//! parameter t. T-symmetry is enforced by projection after every update.

use num_complex::Complex;

use crate::disk::{
    boundary_data, energy, find_zeros, symmetric_solution, DiskError, DiskField, DiskGrid,
};
use crate::linalg::gmres;
use crate::real::Real;
use crate::spectral::ModePair;

type C<T> = Complex<T>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum BifurcError {
    #[error("eigensolver did not converge after {0} iterations (residual {1:e})")]
    EigenNonConvergence(usize, f64),
    #[error("Newton corrector failed at t = {0}: {1}")]
    CorrectorFailure(f64, String),
    #[error("disk operation failed: {0}")]
    Disk(#[from] DiskError),
    #[error("quadratic fit residual {0:e} too large for phi''(0)")]
    FitResidual(f64),
}

/// The 2D linearized operator L_lambda as a matrix-free Hessian action at
/// the symmetric state, in the disk discretization.
pub struct LinearizedOperator2D<T: Real> {
    pub lambda: T,
    pub beta: T,
    pub state: DiskField<T>,
}

impl<T: Real> LinearizedOperator2D<T> {
    pub fn at_symmetric(lambda: T, beta: T, grid: DiskGrid<T>) -> Result<Self, BifurcError> {
        let state = symmetric_solution(lambda, beta, grid)?;
        Ok(LinearizedOperator2D { lambda, beta, state })
    }

    pub fn apply(&self, phi_p: &[C<T>], phi_m: &[C<T>], out_p: &mut [C<T>], out_m: &mut [C<T>]) {
        hessian_apply(&self.state, phi_p, phi_m, out_p, out_m);
    }
}

/// Hessian-vector product of the discrete energy at an arbitrary field:
/// the linearization L at state Psi applied to the perturbation Phi, in
/// gradient (cell-weighted) form with zero boundary rows.
pub fn hessian_apply<T: Real>(
    state: &DiskField<T>,
    phi_p: &[C<T>],
    phi_m: &[C<T>],
    out_p: &mut [C<T>],
    out_m: &mut [C<T>],
) {
    let g = &state.grid;
    for v in out_p.iter_mut().chain(out_m.iter_mut()) {
        *v = C::new(T::zero(), T::zero());
    }
    let dth = g.dtheta;
    // Laplacian (Dirichlet) part: identical to the energy gradient's
    // linear term, applied to the perturbation
    for (phi, out) in [(phi_p, &mut *out_p), (phi_m, &mut *out_m)] {
        for j in 0..g.n_r - 1 {
            let rf = g.dr * T::of_usize(j + 1);
            let c = rf / g.dr * dth;
            for k in 0..g.n_theta {
                let d = phi[g.idx(j + 1, k)] - phi[g.idx(j, k)];
                out[g.idx(j + 1, k)] = out[g.idx(j + 1, k)] + d * c;
                out[g.idx(j, k)] = out[g.idx(j, k)] - d * c;
            }
        }
        for j in 0..g.n_r {
            let c = g.wr[j] / (g.r[j] * g.r[j] * g.dtheta * g.dtheta) * dth;
            for k in 0..g.n_theta {
                let kp = (k + 1) % g.n_theta;
                let d = phi[g.idx(j, kp)] - phi[g.idx(j, k)];
                out[g.idx(j, kp)] = out[g.idx(j, kp)] + d * c;
                out[g.idx(j, k)] = out[g.idx(j, k)] - d * c;
            }
        }
    }
    // potential part: second derivative of the quartic terms
    let inv_eps2 = T::one() / (state.epsilon * state.epsilon);
    let two = T::of(2.0);
    let re_dot = |a: C<T>, b: C<T>| a.re * b.re + a.im * b.im;
    for j in 0..g.n_r {
        let w = g.wr[j] * dth;
        for k in 0..g.n_theta {
            let i = g.idx(j, k);
            let pp = state.psi_plus[i];
            let pm = state.psi_minus[i];
            let a = pp.norm_sqr();
            let b = pm.norm_sqr();
            let tot = a + b - T::one();
            let d = a - b;
            let dp_dot = re_dot(pp, phi_p[i]);
            let dm_dot = re_dot(pm, phi_m[i]);
            let dtot = two * (dp_dot + dm_dot);
            let dd = two * (dp_dot - dm_dot);
            // d/dt of (tot + beta d) psi_+ and (tot - beta d) psi_-
            let hp = phi_p[i] * (tot + state.beta * d) + pp * (dtot + state.beta * dd);
            let hm = phi_m[i] * (tot - state.beta * d) + pm * (dtot - state.beta * dd);
            out_p[i] = out_p[i] + hp * (inv_eps2 * w);
            out_m[i] = out_m[i] + hm * (inv_eps2 * w);
        }
    }
    let jb = g.n_r - 1;
    for k in 0..g.n_theta {
        let i = g.idx(jb, k);
        out_p[i] = C::new(T::zero(), T::zero());
        out_m[i] = C::new(T::zero(), T::zero());
    }
}

/// Quadratic form <L Phi, Phi> of the linearization at the state.
pub fn hessian_form<T: Real>(state: &DiskField<T>, phi_p: &[C<T>], phi_m: &[C<T>]) -> T {
    let n = state.grid.n_nodes();
    let mut hp = vec![C::new(T::zero(), T::zero()); n];
    let mut hm = hp.clone();
    hessian_apply(state, phi_p, phi_m, &mut hp, &mut hm);
    let mut s = T::zero();
    for i in 0..n {
        s = s + hp[i].re * phi_p[i].re + hp[i].im * phi_p[i].im;
        s = s + hm[i].re * phi_m[i].re + hm[i].im * phi_m[i].im;
    }
    s
}

/// Ground eigenpair of the 2D linearization at U_lambda over perturbations
/// vanishing on the boundary, by LOBPCG with a diagonal preconditioner.
pub fn ground_eigen_2d<T: Real>(
    lambda: T,
    beta: T,
    grid: DiskGrid<T>,
) -> Result<(T, Vec<C<T>>, Vec<C<T>>), BifurcError> {
    let op = LinearizedOperator2D::at_symmetric(lambda, beta, grid)?;
    ground_eigen_of_state(&op.state)
}

/// Like `ground_eigen_2d`, but seeded from the reduced-operator ground
/// pair and with a caller-chosen iteration budget; used deep in the
/// lambda range where the spectral gap is small.
pub fn ground_eigen_2d_seeded<T: Real>(
    lambda: T,
    beta: T,
    grid: DiskGrid<T>,
    pair: &ModePair<T>,
    max_iter: usize,
    tol: T,
) -> Result<(T, Vec<C<T>>, Vec<C<T>>), BifurcError> {
    let op = LinearizedOperator2D::at_symmetric(lambda, beta, grid)?;
    let (wp, wm) = lift_w1(&op.state.grid, pair);
    ground_eigen_impl(&op.state, Some((wp, wm)), max_iter, tol)
}

/// Smallest eigenvalue/eigenvector of the Hessian at an arbitrary state.
pub fn ground_eigen_of_state<T: Real>(
    state: &DiskField<T>,
) -> Result<(T, Vec<C<T>>, Vec<C<T>>), BifurcError> {
    ground_eigen_impl(state, None, 2000, T::of(1e-9))
}

fn ground_eigen_impl<T: Real>(
    state: &DiskField<T>,
    seed: Option<(Vec<C<T>>, Vec<C<T>>)>,
    max_iter: usize,
    tol: T,
) -> Result<(T, Vec<C<T>>, Vec<C<T>>), BifurcError> {
    let g = &state.grid;
    let n = g.n_nodes();
    let dth = g.dtheta;
    let mut wts = vec![T::zero(); n];
    for j in 0..g.n_r {
        for k in 0..g.n_theta {
            wts[g.idx(j, k)] = g.wr[j] * dth;
        }
    }
    let inv_eps2 = T::one() / (state.epsilon * state.epsilon);
    let two = T::of(2.0);
    let mut pre = vec![T::one(); n];
    for j in 0..g.n_r {
        let lap = two / (g.dr * g.dr) + two / (g.r[j] * g.r[j] * g.dtheta * g.dtheta);
        for k in 0..g.n_theta {
            pre[g.idx(j, k)] = wts[g.idx(j, k)] * (lap + inv_eps2);
        }
    }
    let interior = |v: &mut [C<T>]| {
        let jb = g.n_r - 1;
        for k in 0..g.n_theta {
            v[g.idx(jb, k)] = C::new(T::zero(), T::zero());
        }
    };
    // deterministic start with content in all angular modes, unless the
    // caller provides a seed vector
    let (mut xp, mut xm) = match seed {
        Some((sp, sm)) => (sp, sm),
        None => {
            let xp: Vec<C<T>> = (0..n)
                .map(|i| {
                    let j = i / g.n_theta;
                    let k = i % g.n_theta;
                    let r = g.r[j];
                    let th = g.theta[k];
                    C::new(
                        r * (T::one() - r) * (T::one() + (two * th).cos()),
                        r * (T::one() - r) * (two * th).sin(),
                    )
                })
                .collect();
            let xm: Vec<C<T>> = xp.iter().map(|&v| -v).collect();
            (xp, xm)
        }
    };
    interior(&mut xp);
    interior(&mut xm);
    let w_inner = |ap: &[C<T>], am: &[C<T>], bp: &[C<T>], bm: &[C<T>]| -> T {
        let mut s = T::zero();
        for i in 0..n {
            s = s + wts[i] * (ap[i].re * bp[i].re + ap[i].im * bp[i].im);
            s = s + wts[i] * (am[i].re * bm[i].re + am[i].im * bm[i].im);
        }
        s
    };
    let dot = |ap: &[C<T>], am: &[C<T>], bp: &[C<T>], bm: &[C<T>]| -> T {
        let mut s = T::zero();
        for i in 0..n {
            s = s + ap[i].re * bp[i].re + ap[i].im * bp[i].im;
            s = s + am[i].re * bm[i].re + am[i].im * bm[i].im;
        }
        s
    };
    let norm = w_inner(&xp, &xm, &xp, &xm).sqrt();
    for v in xp.iter_mut().chain(xm.iter_mut()) {
        *v = *v / norm;
    }
    let mut pp: Vec<C<T>> = vec![C::new(T::zero(), T::zero()); n];
    let mut pm = pp.clone();
    let mut have_p = false;
    let mut hp = pp.clone();
    let mut hm = pp.clone();
    let mut resid = T::infinity();
    for _it in 0..max_iter {
        hessian_apply(state, &xp, &xm, &mut hp, &mut hm);
        let theta = dot(&hp, &hm, &xp, &xm);
        // residual r = H x - theta W x, preconditioned search direction
        let mut rp: Vec<C<T>> = (0..n).map(|i| hp[i] - xp[i] * (theta * wts[i])).collect();
        let mut rm: Vec<C<T>> = (0..n).map(|i| hm[i] - xm[i] * (theta * wts[i])).collect();
        interior(&mut rp);
        interior(&mut rm);
        let rnorm = {
            let mut s = T::zero();
            for i in 0..n {
                s = s + (rp[i].norm_sqr() + rm[i].norm_sqr()) / wts[i];
            }
            s.sqrt()
        };
        resid = rnorm / (T::one() + theta.abs());
        if resid <= tol {
            return Ok((theta, xp, xm));
        }
        let wp: Vec<C<T>> = (0..n).map(|i| rp[i] / pre[i]).collect();
        let wm: Vec<C<T>> = (0..n).map(|i| rm[i] / pre[i]).collect();
        // Rayleigh-Ritz on span{x, w, p}
        let basis: Vec<(Vec<C<T>>, Vec<C<T>>)> = if have_p {
            vec![
                (xp.clone(), xm.clone()),
                (wp, wm),
                (pp.clone(), pm.clone()),
            ]
        } else {
            vec![(xp.clone(), xm.clone()), (wp, wm)]
        };
        let m = basis.len();
        let mut amat = vec![vec![T::zero(); m]; m];
        let mut bmat = vec![vec![T::zero(); m]; m];
        let mut h_cache: Vec<(Vec<C<T>>, Vec<C<T>>)> = Vec::with_capacity(m);
        for bvec in &basis {
            let mut tp = vec![C::new(T::zero(), T::zero()); n];
            let mut tm = tp.clone();
            hessian_apply(state, &bvec.0, &bvec.1, &mut tp, &mut tm);
            h_cache.push((tp, tm));
        }
        for a in 0..m {
            for b in 0..m {
                amat[a][b] = dot(&h_cache[a].0, &h_cache[a].1, &basis[b].0, &basis[b].1);
                bmat[a][b] = w_inner(&basis[a].0, &basis[a].1, &basis[b].0, &basis[b].1);
            }
        }
        let coef = small_generalized_ground(&amat, &bmat);
        // new x and implicit p
        let mut nxp = vec![C::new(T::zero(), T::zero()); n];
        let mut nxm = nxp.clone();
        let mut npp = nxp.clone();
        let mut npm = nxp.clone();
        for a in 0..m {
            for i in 0..n {
                nxp[i] = nxp[i] + basis[a].0[i] * coef[a];
                nxm[i] = nxm[i] + basis[a].1[i] * coef[a];
                if a >= 1 {
                    npp[i] = npp[i] + basis[a].0[i] * coef[a];
                    npm[i] = npm[i] + basis[a].1[i] * coef[a];
                }
            }
        }
        let nn = w_inner(&nxp, &nxm, &nxp, &nxm).sqrt();
        for v in nxp.iter_mut().chain(nxm.iter_mut()) {
            *v = *v / nn;
        }
        xp = nxp;
        xm = nxm;
        pp = npp;
        pm = npm;
        have_p = true;
    }
    Err(BifurcError::EigenNonConvergence(max_iter, resid.as_f64()))
}

/// Ground coefficients of the small generalized problem A c = theta B c
/// (m <= 3), by scanning the pencil via dense solves; robust for the tiny
/// Rayleigh-Ritz systems used here.
fn small_generalized_ground<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<T> {
    let m = a.len();
    // B is SPD (Gram matrix): Cholesky, transform to standard problem
    let mut l = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = b[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = s.max(T::of(1e-300)).sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let fwd = |rhs: &mut [T]| {
        for i in 0..m {
            for k in 0..i {
                rhs[i] = rhs[i] - l[i][k] * rhs[k];
            }
            rhs[i] = rhs[i] / l[i][i];
        }
    };
    let bwd = |rhs: &mut [T]| {
        for i in (0..m).rev() {
            for k in i + 1..m {
                rhs[i] = rhs[i] - l[k][i] * rhs[k];
            }
            rhs[i] = rhs[i] / l[i][i];
        }
    };
    // C = L^{-1} A L^{-T}, symmetric m x m; Jacobi eigen for m <= 3
    let mut c = vec![vec![T::zero(); m]; m];
    for j in 0..m {
        let mut col: Vec<T> = (0..m).map(|i| a[i][j]).collect();
        fwd(&mut col);
        for i in 0..m {
            c[i][j] = col[i];
        }
    }
    for i in 0..m {
        let mut row: Vec<T> = c[i].clone();
        fwd(&mut row);
        c[i] = row;
    }
    // symmetrize against round-off
    for i in 0..m {
        for j in 0..i {
            let v = (c[i][j] + c[j][i]) * T::of(0.5);
            c[i][j] = v;
            c[j][i] = v;
        }
    }
    let (vals, vecs) = jacobi_eigen(&mut c);
    let mut best = 0;
    for i in 1..m {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    let mut ground: Vec<T> = (0..m).map(|i| vecs[i][best]).collect();
    bwd(&mut ground);
    ground
}

/// Cyclic Jacobi for small symmetric matrices; returns (values, columns).
fn jacobi_eigen<T: Real>(c: &mut [Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let m = c.len();
    let mut v = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        v[i][i] = T::one();
    }
    for _ in 0..50 {
        let mut off = T::zero();
        for i in 0..m {
            for j in i + 1..m {
                off = off + c[i][j] * c[i][j];
            }
        }
        if off <= T::of(1e-28) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if c[p][q].abs() <= T::of(1e-300) {
                    continue;
                }
                let theta = (c[q][q] - c[p][p]) / (T::of(2.0) * c[p][q]);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let cos = T::one() / (t * t + T::one()).sqrt();
                let sin = t * cos;
                for i in 0..m {
                    let cip = c[i][p];
                    let ciq = c[i][q];
                    c[i][p] = cip * cos - ciq * sin;
                    c[i][q] = cip * sin + ciq * cos;
                }
                for i in 0..m {
                    let cpi = c[p][i];
                    let cqi = c[q][i];
                    c[p][i] = cpi * cos - cqi * sin;
                    c[q][i] = cpi * sin + cqi * cos;
                }
                for i in 0..m {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = vip * cos - viq * sin;
                    v[i][q] = vip * sin + viq * cos;
                }
            }
        }
    }
    ((0..m).map(|i| c[i][i]).collect(), v)
}

/// Diagnostics of the 2D ground eigenvector: antisymmetry defect
/// ||phi_+ + phi_-|| / ||Phi|| and the energy fraction of w = phi_+ outside
/// angular modes {0, 2}.
pub fn eigenvector_structure<T: Real>(
    grid: &DiskGrid<T>,
    phi_p: &[C<T>],
    phi_m: &[C<T>],
) -> (T, T) {
    let n = grid.n_nodes();
    let mut sum_sym = T::zero();
    let mut sum_all = T::zero();
    for i in 0..n {
        let j = i / grid.n_theta;
        let w = grid.wr[j] * grid.dtheta;
        sum_sym = sum_sym + w * (phi_p[i] + phi_m[i]).norm_sqr();
        sum_all = sum_all + w * (phi_p[i].norm_sqr() + phi_m[i].norm_sqr());
    }
    let anti = (sum_sym / sum_all).sqrt();
    // angular DFT of w = phi_+ per ring: fraction of mass outside {0, 2}
    let mut inside = T::zero();
    let mut total = T::zero();
    let nt = grid.n_theta;
    for j in 0..grid.n_r {
        let w = grid.wr[j] * grid.dtheta;
        for mode in 0..nt {
            let mut acc = C::new(T::zero(), T::zero());
            for k in 0..nt {
                let ang = -T::of(2.0) * T::PI() * T::of_usize(mode * k % nt) / T::of_usize(nt);
                let ph = C::new(ang.cos(), ang.sin());
                acc = acc + phi_p[grid.idx(j, k)] * ph;
            }
            let mass = w * acc.norm_sqr();
            total = total + mass;
            if mode == 0 || mode == 2 {
                inside = inside + mass;
            }
        }
    }
    let outside_frac = T::one() - inside / total;
    (anti, outside_frac)
}

// --- branch continuation -------------------------------------------------

#[derive(Debug, Clone)]
pub struct BranchPoint<T: Real> {
    pub t: T,
    pub lambda: T,
    pub field: DiskField<T>,
    pub zeros: ((T, T), (T, T)),
    pub t_symmetry_residual: T,
    pub newton_residual: T,
    pub energy: T,
    /// Ground eigenvalue of the linearization at this branch point, when
    /// the eigensolver converged.
    pub ground_mu: Option<T>,
}

/// The T-involution on a disk field: (v_+, v_-) -> (-v_-(-x), -v_+(-x)).
pub fn t_involution<T: Real>(field: &DiskField<T>) -> DiskField<T> {
    let g = &field.grid;
    let mut out = field.clone();
    let half = g.n_theta / 2;
    for j in 0..g.n_r {
        for k in 0..g.n_theta {
            let ka = (k + half) % g.n_theta;
            out.psi_plus[g.idx(j, k)] = -field.psi_minus[g.idx(j, ka)];
            out.psi_minus[g.idx(j, k)] = -field.psi_plus[g.idx(j, ka)];
        }
    }
    out
}

/// Relative defect ||T Psi - Psi|| / ||Psi|| in the disk L2 norm.
pub fn t_symmetry_residual<T: Real>(field: &DiskField<T>) -> T {
    let tf = t_involution(field);
    let g = &field.grid;
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..g.n_nodes() {
        let j = i / g.n_theta;
        let w = g.wr[j] * g.dtheta;
        num = num
            + w * ((tf.psi_plus[i] - field.psi_plus[i]).norm_sqr()
                + (tf.psi_minus[i] - field.psi_minus[i]).norm_sqr());
        den = den + w * (field.psi_plus[i].norm_sqr() + field.psi_minus[i].norm_sqr());
    }
    (num / den).sqrt()
}

fn project_t<T: Real>(field: &mut DiskField<T>) {
    let tf = t_involution(field);
    let half = T::of(0.5);
    for i in 0..field.grid.n_nodes() {
        field.psi_plus[i] = (field.psi_plus[i] + tf.psi_plus[i]) * half;
        field.psi_minus[i] = (field.psi_minus[i] + tf.psi_minus[i]) * half;
    }
}

/// W_1 lift from the reduced ground pair: w = a0(r) - a2(r) e^{2 i theta},
/// Phi = (w, -w), normalized in the disk L2 norm.
pub fn lift_w1<T: Real>(grid: &DiskGrid<T>, pair: &ModePair<T>) -> (Vec<C<T>>, Vec<C<T>>) {
    let nodes = pair.grid.nodes();
    let h = nodes[1] - nodes[0];
    let interp = |vals: &[T], r: T| -> T {
        let x = (r / grid.radius - nodes[0]) / h;
        let j = x.as_f64().floor().max(0.0) as usize;
        if j + 1 >= nodes.len() {
            return T::zero(); // a0, a2 vanish at the boundary
        }
        let frac = x - T::of_usize(j);
        vals[j] * (T::one() - frac) + vals[j + 1] * frac
    };
    let n = grid.n_nodes();
    let mut wp = vec![C::new(T::zero(), T::zero()); n];
    let mut wm = wp.clone();
    for j in 0..grid.n_r - 1 {
        let a0 = interp(&pair.a0, grid.r[j]);
        let a2 = interp(&pair.a2, grid.r[j]);
        for k in 0..grid.n_theta {
            let th2 = grid.theta[k] * T::of(2.0);
            let w = C::new(a0 - a2 * th2.cos(), -a2 * th2.sin());
            wp[grid.idx(j, k)] = w;
            wm[grid.idx(j, k)] = -w;
        }
    }
    let mut nrm = T::zero();
    for i in 0..n {
        let j = i / grid.n_theta;
        nrm = nrm + grid.wr[j] * grid.dtheta * (wp[i].norm_sqr() + wm[i].norm_sqr());
    }
    let nrm = nrm.sqrt();
    for v in wp.iter_mut().chain(wm.iter_mut()) {
        *v = *v / nrm;
    }
    (wp, wm)
}

/// Real L2 inner product of two disk perturbations.
fn l2_inner<T: Real>(
    grid: &DiskGrid<T>,
    ap: &[C<T>],
    am: &[C<T>],
    bp: &[C<T>],
    bm: &[C<T>],
) -> T {
    let mut s = T::zero();
    for i in 0..grid.n_nodes() {
        let j = i / grid.n_theta;
        let w = grid.wr[j] * grid.dtheta;
        s = s + w * (ap[i].re * bp[i].re + ap[i].im * bp[i].im);
        s = s + w * (am[i].re * bm[i].re + am[i].im * bm[i].im);
    }
    s
}

/// S^1 generator direction at the field: per component d/ds R_{e^{is}} psi
/// = d_theta psi - i psi; zero on the boundary rows (constrained nodes).
fn gauge_generator<T: Real>(field: &DiskField<T>) -> (Vec<C<T>>, Vec<C<T>>) {
    let g = &field.grid;
    let n = g.n_nodes();
    let mut cp = vec![C::new(T::zero(), T::zero()); n];
    let mut cm = cp.clone();
    let i_unit = C::new(T::zero(), T::one());
    for (psi, out) in [
        (&field.psi_plus, &mut cp),
        (&field.psi_minus, &mut cm),
    ] {
        for j in 0..g.n_r - 1 {
            for k in 0..g.n_theta {
                let kp = (k + 1) % g.n_theta;
                let km = (k + g.n_theta - 1) % g.n_theta;
                let dth = (psi[g.idx(j, kp)] - psi[g.idx(j, km)])
                    / (T::of(2.0) * g.dtheta);
                out[g.idx(j, k)] = dth - i_unit * psi[g.idx(j, k)];
            }
        }
    }
    (cp, cm)
}

/// Energy gradient in the disk discretization (cell-weighted), computed
/// through the public residual: gradient = residual * cell measure.
fn grad_of<T: Real>(field: &DiskField<T>) -> (Vec<C<T>>, Vec<C<T>>) {
    let n = field.grid.n_nodes();
    let mut gp = vec![C::new(T::zero(), T::zero()); n];
    let mut gm = gp.clone();
    crate::disk::gradient(field, &mut gp, &mut gm);
    (gp, gm)
}

struct BranchContext<T: Real> {
    grid: DiskGrid<T>,
    beta: T,
    w1p: Vec<C<T>>,
    w1m: Vec<C<T>>,
}

impl<T: Real> BranchContext<T> {
    fn symmetric(&self, lambda: T) -> Result<DiskField<T>, DiskError> {
        symmetric_solution(lambda, self.beta, self.grid.clone())
    }
}

/// Newton corrector for the extended system at fixed branch parameter t.
/// Unknowns: interior field values, the gauge multiplier nu, and lambda.
#[allow(clippy::too_many_arguments)]
fn corrector<T: Real>(
    ctx: &BranchContext<T>,
    mut field: DiskField<T>,
    mut lambda: T,
    t: T,
    tol: T,
    max_newton: usize,
) -> Result<(DiskField<T>, T, T), BifurcError> {
    let g = ctx.grid.clone();
    let n = g.n_nodes();
    let nt = g.n_theta;
    let n_int = (g.n_r - 1) * nt; // interior nodes
    let dim = 4 * n_int + 2;
    let pack = |fp: &[C<T>], fm: &[C<T>], s1: T, s2: T| -> Vec<T> {
        let mut x = vec![T::zero(); dim];
        for i in 0..n_int {
            x[4 * i] = fp[i].re;
            x[4 * i + 1] = fp[i].im;
            x[4 * i + 2] = fm[i].re;
            x[4 * i + 3] = fm[i].im;
        }
        x[dim - 2] = s1;
        x[dim - 1] = s2;
        x
    };
    let mut u_sym = ctx.symmetric(lambda)?;
    let mut newton_res = T::infinity();
    for _newton in 0..max_newton {
        field.epsilon = T::one() / lambda.sqrt();
        u_sym.epsilon = field.epsilon;
        let (gp, gm) = grad_of(&field);
        let (cp, cm) = gauge_generator(&field);
        // V = Psi - U_lambda
        let vp: Vec<C<T>> = (0..n)
            .map(|i| field.psi_plus[i] - u_sym.psi_plus[i])
            .collect();
        let vm: Vec<C<T>> = (0..n)
            .map(|i| field.psi_minus[i] - u_sym.psi_minus[i])
            .collect();
        let r_gauge = l2_inner(&g, &vp, &vm, &cp, &cm);
        let r_amp = l2_inner(&g, &vp, &vm, &ctx.w1p, &ctx.w1m) - t;
        // assemble residual vector (nu = 0 at every outer iteration: the
        // multiplier only supports the linear solve)
        let rhs_field_p = gp;
        let rhs_field_m = gm;
        let mut rvec = pack(&rhs_field_p, &rhs_field_m, r_gauge, r_amp);
        // measure the field part in the EL (cell-unweighted) metric
        let mut el_res = T::zero();
        for i in 0..n_int {
            let j = i / nt;
            let w = g.wr[j] * g.dtheta;
            for c in 0..4 {
                el_res = el_res.max(rvec[4 * i + c].abs() / w);
            }
        }
        newton_res = el_res.max(r_gauge.abs()).max(r_amp.abs());
        if newton_res <= tol {
            return Ok((field, lambda, newton_res));
        }
        // lambda-derivative of the gradient: the potential part scales
        // linearly in lambda = 1/eps^2
        let (dl_p, dl_m) = {
            let mut lin = field.clone();
            lin.epsilon = T::infinity(); // potential off
            let (lp, lm) = grad_of(&lin);
            let (fp, fm) = (&rhs_field_p, &rhs_field_m);
            let dp: Vec<C<T>> = (0..n).map(|i| (fp[i] - lp[i]) / lambda).collect();
            let dm: Vec<C<T>> = (0..n).map(|i| (fm[i] - lm[i]) / lambda).collect();
            (dp, dm)
        };
        // lambda-derivative of U_lambda for the constraint rows
        let dlam = lambda * T::of(1e-4);
        let u_hi = ctx.symmetric(lambda + dlam)?;
        let u_lo = ctx.symmetric(lambda - dlam)?;
        let dup: Vec<C<T>> = (0..n)
            .map(|i| (u_hi.psi_plus[i] - u_lo.psi_plus[i]) / (T::of(2.0) * dlam))
            .collect();
        let dum: Vec<C<T>> = (0..n)
            .map(|i| (u_hi.psi_minus[i] - u_lo.psi_minus[i]) / (T::of(2.0) * dlam))
            .collect();
        let damp_dlam = -l2_inner(&g, &dup, &dum, &ctx.w1p, &ctx.w1m);
        let dgauge_dlam = -l2_inner(&g, &dup, &dum, &cp, &cm);
        // diagonal preconditioner
        let inv_eps2 = lambda;
        let two = T::of(2.0);
        let mut pre = vec![T::one(); dim];
        for i in 0..n_int {
            let j = i / nt;
            let lap = two / (g.dr * g.dr) + two / (g.r[j] * g.r[j] * g.dtheta * g.dtheta);
            let p = g.wr[j] * g.dtheta * (lap + inv_eps2);
            for c in 0..4 {
                pre[4 * i + c] = p;
            }
        }
        let field_snapshot = field.clone();
        let apply = |x: &[T], y: &mut [T]| {
            // unpack field part into complex buffers (boundary zero)
            let mut php = vec![C::new(T::zero(), T::zero()); n];
            let mut phm = php.clone();
            for i in 0..n_int {
                php[i] = C::new(x[4 * i], x[4 * i + 1]);
                phm[i] = C::new(x[4 * i + 2], x[4 * i + 3]);
            }
            let dnu = x[dim - 2];
            let dla = x[dim - 1];
            let mut hp = vec![C::new(T::zero(), T::zero()); n];
            let mut hm = hp.clone();
            hessian_apply(&field_snapshot, &php, &phm, &mut hp, &mut hm);
            for i in 0..n_int {
                let row_p = hp[i] + cp[i] * dnu + dl_p[i] * dla;
                let row_m = hm[i] + cm[i] * dnu + dl_m[i] * dla;
                y[4 * i] = row_p.re;
                y[4 * i + 1] = row_p.im;
                y[4 * i + 2] = row_m.re;
                y[4 * i + 3] = row_m.im;
            }
            y[dim - 2] = l2_inner(&g, &php, &phm, &cp, &cm) + dgauge_dlam * dla;
            y[dim - 1] = l2_inner(&g, &php, &phm, &ctx.w1p, &ctx.w1m) + damp_dlam * dla;
        };
        let papply = |x: &[T], y: &mut [T]| {
            let xs: Vec<T> = x.iter().zip(&pre).map(|(&v, &p)| v / p).collect();
            apply(&xs, y);
        };
        for v in rvec.iter_mut() {
            *v = -*v;
        }
        let mut sol = vec![T::zero(); dim];
        let lin_res = gmres(&papply, &rvec, &mut sol, T::of(1e-10), 120, 12);
        let rhs_norm = rvec.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
        if lin_res > T::of(1e-4) * rhs_norm + T::of(1e-12) {
            return Err(BifurcError::CorrectorFailure(
                t.as_f64(),
                format!("linear solve stalled at residual {:e}", lin_res.as_f64()),
            ));
        }
        let step: Vec<T> = sol.iter().zip(&pre).map(|(&v, &p)| v / p).collect();
        for i in 0..n_int {
            field.psi_plus[i] = field.psi_plus[i] + C::new(step[4 * i], step[4 * i + 1]);
            field.psi_minus[i] = field.psi_minus[i] + C::new(step[4 * i + 2], step[4 * i + 3]);
        }
        lambda = lambda + step[dim - 1];
        project_t(&mut field);
        u_sym = ctx.symmetric(lambda)?;
    }
    if newton_res <= tol {
        Ok((field, lambda, newton_res))
    } else {
        Err(BifurcError::CorrectorFailure(
            t.as_f64(),
            format!("residual {newton_res:e} after max Newton iterations"),
        ))
    }
}

/// Solve the Dirichlet problem at fixed lambda from a given guess, with
/// the gauge bordered row but no amplitude constraint.
pub fn newton_solve<T: Real>(
    guess: &DiskField<T>,
    lambda: T,
    beta: T,
    tol: T,
) -> Result<(DiskField<T>, T), BifurcError> {
    let grid = guess.grid.clone();
    // reuse the branch corrector with the amplitude row replaced by a
    // trivial lambda-pinning row: d lambda = 0
    let g = grid.clone();
    let n = g.n_nodes();
    let nt = g.n_theta;
    let n_int = (g.n_r - 1) * nt;
    let dim = 4 * n_int + 1;
    let mut field = guess.clone();
    field.epsilon = T::one() / lambda.sqrt();
    field.beta = beta;
    let mut newton_res = T::infinity();
    for _ in 0..40 {
        let (gp, gm) = grad_of(&field);
        let (cp, cm) = gauge_generator(&field);
        let mut rvec = vec![T::zero(); dim];
        for i in 0..n_int {
            rvec[4 * i] = gp[i].re;
            rvec[4 * i + 1] = gp[i].im;
            rvec[4 * i + 2] = gm[i].re;
            rvec[4 * i + 3] = gm[i].im;
        }
        // gauge row: keep the Newton update orthogonal to the orbit
        rvec[dim - 1] = T::zero();
        let mut el_res = T::zero();
        for i in 0..n_int {
            let j = i / nt;
            let w = g.wr[j] * g.dtheta;
            for c in 0..4 {
                el_res = el_res.max(rvec[4 * i + c].abs() / w);
            }
        }
        newton_res = el_res;
        if newton_res <= tol {
            return Ok((field, newton_res));
        }
        let two = T::of(2.0);
        let mut pre = vec![T::one(); dim];
        for i in 0..n_int {
            let j = i / nt;
            let lap = two / (g.dr * g.dr) + two / (g.r[j] * g.r[j] * g.dtheta * g.dtheta);
            let p = g.wr[j] * g.dtheta * (lap + lambda);
            for c in 0..4 {
                pre[4 * i + c] = p;
            }
        }
        let snapshot = field.clone();
        let apply = |x: &[T], y: &mut [T]| {
            let mut php = vec![C::new(T::zero(), T::zero()); n];
            let mut phm = php.clone();
            for i in 0..n_int {
                php[i] = C::new(x[4 * i], x[4 * i + 1]);
                phm[i] = C::new(x[4 * i + 2], x[4 * i + 3]);
            }
            let dnu = x[dim - 1];
            let mut hp = vec![C::new(T::zero(), T::zero()); n];
            let mut hm = hp.clone();
            hessian_apply(&snapshot, &php, &phm, &mut hp, &mut hm);
            for i in 0..n_int {
                let row_p = hp[i] + cp[i] * dnu;
                let row_m = hm[i] + cm[i] * dnu;
                y[4 * i] = row_p.re;
                y[4 * i + 1] = row_p.im;
                y[4 * i + 2] = row_m.re;
                y[4 * i + 3] = row_m.im;
            }
            y[dim - 1] = l2_inner(&g, &php, &phm, &cp, &cm);
        };
        let papply = |x: &[T], y: &mut [T]| {
            let xs: Vec<T> = x.iter().zip(&pre).map(|(&v, &p)| v / p).collect();
            apply(&xs, y);
        };
        for v in rvec.iter_mut() {
            *v = -*v;
        }
        let mut sol = vec![T::zero(); dim];
        let lin_res = gmres(&papply, &rvec, &mut sol, T::of(1e-10), 120, 12);
        let rhs_norm = rvec.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
        if lin_res > T::of(1e-4) * rhs_norm + T::of(1e-12) {
            return Err(BifurcError::CorrectorFailure(
                0.0,
                format!("linear solve stalled at residual {:e}", lin_res.as_f64()),
            ));
        }
        let step: Vec<T> = sol.iter().zip(&pre).map(|(&v, &p)| v / p).collect();
        for i in 0..n_int {
            field.psi_plus[i] = field.psi_plus[i] + C::new(step[4 * i], step[4 * i + 1]);
            field.psi_minus[i] = field.psi_minus[i] + C::new(step[4 * i + 2], step[4 * i + 3]);
        }
    }
    if newton_res <= tol {
        Ok((field, newton_res))
    } else {
        Err(BifurcError::CorrectorFailure(
            0.0,
            format!("residual {newton_res:e} after max Newton iterations"),
        ))
    }
}

/// Continue the bifurcating branch over t in +-(0, t_max]; positive and
/// negative amplitudes are both computed so evenness of lambda(t) can be
/// checked. Points are ordered by t.
pub fn continue_branch<T: Real>(
    beta: T,
    lambda_beta: T,
    pair: &ModePair<T>,
    grid: DiskGrid<T>,
    t_max: T,
    n_steps: usize,
    tol: T,
) -> Result<Vec<BranchPoint<T>>, BifurcError> {
    let (w1p, w1m) = lift_w1(&grid, pair);
    let ctx = BranchContext {
        grid: grid.clone(),
        beta,
        w1p,
        w1m,
    };
    let mut points: Vec<BranchPoint<T>> = Vec::new();
    for sign in [T::one(), -T::one()] {
        let mut lambda = lambda_beta;
        let mut field = ctx.symmetric(lambda)?;
        for step_i in 1..=n_steps {
            let t = sign * t_max * T::of_usize(step_i) / T::of_usize(n_steps);
            // predictor: previous solution plus the W1 increment
            let dt = sign * t_max / T::of_usize(n_steps);
            for i in 0..grid.n_nodes() {
                field.psi_plus[i] = field.psi_plus[i] + ctx.w1p[i] * dt;
                field.psi_minus[i] = field.psi_minus[i] + ctx.w1m[i] * dt;
            }
            let (nf, nl, res) = corrector(&ctx, field.clone(), lambda, t, tol, 25)?;
            field = nf;
            lambda = nl;
            let (zp, zm) = find_zeros(&field)?;
            let z_plus = zp.first().copied().unwrap_or((T::zero(), T::zero()));
            let z_minus = zm.first().copied().unwrap_or((T::zero(), T::zero()));
            points.push(BranchPoint {
                t,
                lambda,
                field: field.clone(),
                zeros: (z_plus, z_minus),
                t_symmetry_residual: t_symmetry_residual(&field),
                newton_residual: res,
                energy: energy(&field).total,
                ground_mu: ground_eigen_of_state(&field).ok().map(|(mu, _, _)| mu),
            });
        }
    }
    points.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    Ok(points)
}

/// Fit lambda(t) = c0 + c1 t + c2 t^2 + c3 t^3 + c4 t^4 over the branch:
/// returns (phi''(0) = 2 c2, max odd coefficient magnitude, fit rms).
/// Evenness of the branch should force c1 and c3 to vanish.
pub fn phi_second_derivative<T: Real>(branch: &[BranchPoint<T>]) -> Result<(T, T, T), BifurcError> {
    assert!(branch.len() >= 6);
    let ts: Vec<T> = branch.iter().map(|p| p.t).collect();
    let ls: Vec<T> = branch.iter().map(|p| p.lambda).collect();
    let one = |_x: T| T::one();
    let lin = |x: T| x;
    let quad = |x: T| x * x;
    let cub = |x: T| x * x * x;
    let quart = |x: T| x * x * x * x;
    let basis: [&dyn Fn(T) -> T; 5] = [&one, &lin, &quad, &cub, &quart];
    let (coef, rms) = crate::linalg::least_squares(&ts, &ls, &basis);
    let lam_scale = ls.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if rms > T::of(1e-3) * lam_scale {
        return Err(BifurcError::FitResidual(rms.as_f64()));
    }
    let odd = coef[1].abs().max(coef[3].abs());
    Ok((T::of(2.0) * coef[2], odd, rms))
}

/// Boundary rings reused by callers constructing guesses.
pub fn symmetric_boundary<T: Real>(grid: &DiskGrid<T>) -> (Vec<C<T>>, Vec<C<T>>) {
    boundary_data(1, 1, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::DiskField;
    use crate::spectral::{assemble_mode1, ground_eigenpair, mode1_pair};
    use crate::radial::profile_f_lambda;

    #[test]
    fn hessian_form_matches_direct_quadrature() {
        // <L Phi, Phi> vs E''_lambda(U_lambda)[Phi] assembled independently
        let grid = DiskGrid::unit(48, 48);
        let lambda = 16.0f64;
        let beta = 0.5;
        let state = symmetric_solution(lambda, beta, grid).unwrap();
        let g = &state.grid;
        let n = g.n_nodes();
        let mut php = vec![C::new(0.0, 0.0); n];
        let mut phm = php.clone();
        for j in 0..g.n_r - 1 {
            for k in 0..g.n_theta {
                let r = g.r[j];
                let th = g.theta[k];
                let i = g.idx(j, k);
                php[i] = C::new(r * (1.0 - r) * (1.0 + th.sin()), r * (1.0 - r) * th.cos());
                phm[i] = C::new(-r * (1.0 - r) * (2.0 * th).cos(), 0.3 * r * (1.0 - r));
            }
        }
        let form = hessian_form(&state, &php, &phm);
        // oracle: E(U + h Phi) + E(U - h Phi) - 2 E(U) over h^2
        let h = 1e-4;
        let mut plus = state.clone();
        let mut minus = state.clone();
        for i in 0..n {
            plus.psi_plus[i] = state.psi_plus[i] + php[i] * h;
            plus.psi_minus[i] = state.psi_minus[i] + phm[i] * h;
            minus.psi_plus[i] = state.psi_plus[i] - php[i] * h;
            minus.psi_minus[i] = state.psi_minus[i] - phm[i] * h;
        }
        let e0 = energy(&state).total;
        let oracle = (energy(&plus).total + energy(&minus).total - 2.0 * e0) / (h * h);
        assert!(
            (form - oracle).abs() <= 1e-4 * oracle.abs().max(1.0),
            "form {form} vs oracle {oracle}"
        );
    }

    #[test]
    fn hessian_positive_for_beta_two() {
        let grid = DiskGrid::unit(32, 32);
        let state = symmetric_solution(9.0, 2.0, grid).unwrap();
        let g = &state.grid;
        let n = g.n_nodes();
        for seed in 0..5u64 {
            let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            let mut next = || {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let mut php = vec![C::new(0.0, 0.0); n];
            let mut phm = php.clone();
            for j in 0..g.n_r - 1 {
                for k in 0..g.n_theta {
                    let i = g.idx(j, k);
                    php[i] = C::new(next(), next());
                    phm[i] = C::new(next(), next());
                }
            }
            let q = hessian_form(&state, &php, &phm);
            assert!(q > 0.0, "nonpositive form {q} at seed {seed}");
        }
    }

    #[test]
    fn t_involution_fixes_symmetric_state() {
        let grid = DiskGrid::unit(32, 32);
        let state = symmetric_solution(9.0, 0.5, grid).unwrap();
        assert!(t_symmetry_residual(&state) < 1e-12);
    }

    #[test]
    fn ground_eigen_matches_reduced_operator() {
        let lambda = 20.0f64;
        let beta = 0.5;
        let (mu2d, vp, vm) = ground_eigen_2d(lambda, beta, DiskGrid::unit(64, 64)).unwrap();
        let prof = profile_f_lambda(lambda, 1e-10, 2048).unwrap();
        let op = assemble_mode1(lambda, beta, &prof, 512);
        let mu1 = ground_eigenpair(&op, 1).unwrap()[0].value;
        // both discretizations are O(h^2); 64^2 disk vs 512-cell radial
        assert!(
            (mu2d - mu1).abs() <= 0.05 * mu1.abs().max(0.5),
            "mu2d={mu2d} mu1={mu1}"
        );
        let grid = DiskGrid::unit(64, 64);
        let (anti, outside) = eigenvector_structure(&grid, &vp, &vm);
        assert!(anti <= 1e-6, "antisymmetry defect {anti}");
        assert!(outside <= 1e-4, "mode leakage {outside}");
    }

    #[test]
    fn newton_returns_to_symmetric_state_when_stable() {
        let grid = DiskGrid::unit(48, 48);
        let lambda = 25.0f64;
        let u = symmetric_solution(lambda, 2.0, grid).unwrap();
        let (solved, res) = newton_solve(&u, lambda, 2.0, 1e-8).unwrap();
        assert!(res <= 1e-8);
        // the interpolated profile is only an O(h^2) solution of the
        // discrete system; Newton should stay within that distance
        let diff = solved.sup_norm_diff(&u);
        assert!(diff <= 5e-3, "moved {diff} from the symmetric state");
        assert!(t_symmetry_residual(&solved) <= 1e-6);
    }

    #[test]
    fn mode1_pair_for_branch_is_available() {
        let prof = profile_f_lambda(18.0f64, 1e-10, 1024).unwrap();
        let op = assemble_mode1(18.0, 0.5, &prof, 256);
        let e = ground_eigenpair(&op, 1).unwrap();
        let pair = mode1_pair(&op, &e[0].vector);
        let grid = DiskGrid::unit(32, 32);
        let (wp, wm) = lift_w1(&grid, &pair);
        let mut nrm = 0.0;
        for i in 0..grid.n_nodes() {
            let j = i / grid.n_theta;
            nrm += grid.wr[j] * grid.dtheta * (wp[i].norm_sqr() + wm[i].norm_sqr());
        }
        assert!((nrm - 1.0).abs() < 1e-12);
        // T-fixed: assemble the field U + t W1 and check the T defect
        let mut f = symmetric_solution(18.0, 0.5, grid).unwrap();
        for i in 0..f.grid.n_nodes() {
            f.psi_plus[i] += wp[i] * 0.1;
            f.psi_minus[i] += wm[i] * 0.1;
        }
        assert!(t_symmetry_residual(&f) < 1e-12);
    }
}
