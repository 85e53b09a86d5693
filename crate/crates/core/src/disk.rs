//! The two-component energy on the unit disk, discretized on a polar
//! tensor grid, with a nonlinear-CG minimizer and the diagnostics used for
//! core energies, spin integrals, and vortex zeros.
//!
//! The grid puts the first radial node at half spacing, so the origin is
//! not a node and the boundary ring lands exactly on r = radius.

use num_complex::Complex;

use crate::radial::profile_f_lambda;
use crate::real::Real;
use crate::spectral::ModePair;
use crate::Tolerances;

pub type C<T> = Complex<T>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum DiskError {
    #[error("minimizer hit max_iter = {0} with residual {1:e}")]
    MaxIter(usize, f64),
    #[error("zero located on the boundary ring: invalid field")]
    BoundaryZero,
    #[error("core-energy sequence not monotone beyond fit residual at eps = {0}")]
    NonMonotone(f64),
    #[error("radial profile solve failed: {0}")]
    Profile(#[from] crate::radial::RadialError),
}

/// Polar tensor grid on the disk of the given radius. Radial nodes at
/// (j + 1/2) dr with dr = radius/(n_r - 1/2), so node n_r - 1 is exactly
/// on the boundary; angular nodes uniform on [0, 2 pi).
#[derive(Debug, Clone)]
pub struct DiskGrid<T: Real> {
    pub n_r: usize,
    pub n_theta: usize,
    pub radius: T,
    pub r: Vec<T>,
    pub theta: Vec<T>,
    /// per-ring radial cell integrals of r dr (angular factor separate)
    pub wr: Vec<T>,
    pub dr: T,
    pub dtheta: T,
}

impl<T: Real> DiskGrid<T> {
    pub fn new(radius: T, n_r: usize, n_theta: usize) -> Self {
        assert!(n_r >= 8 && n_theta >= 8);
        assert!(n_theta % 2 == 0, "n_theta must be even");
        let half = T::of(0.5);
        let dr = radius / (T::of_usize(n_r) - half);
        let r: Vec<T> = (0..n_r)
            .map(|j| dr * (T::of_usize(j) + half))
            .collect();
        let dtheta = T::of(2.0) * T::PI() / T::of_usize(n_theta);
        let theta: Vec<T> = (0..n_theta).map(|k| dtheta * T::of_usize(k)).collect();
        // cell [r_j - dr/2, r_j + dr/2], clipped to [0, radius]
        let wr: Vec<T> = (0..n_r)
            .map(|j| {
                let lo = if j == 0 { T::zero() } else { r[j] - dr * half };
                let hi = if j + 1 == n_r { radius } else { r[j] + dr * half };
                (hi * hi - lo * lo) * half
            })
            .collect();
        DiskGrid {
            n_r,
            n_theta,
            radius,
            r,
            theta,
            wr,
            dr,
            dtheta,
        }
    }

    pub fn unit(n_r: usize, n_theta: usize) -> Self {
        Self::new(T::one(), n_r, n_theta)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_r * self.n_theta
    }

    #[inline]
    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * self.n_theta + k
    }

    /// Area of the disk by the quadrature weights (exactly pi r^2).
    pub fn area(&self) -> T {
        self.wr.iter().fold(T::zero(), |s, &w| s + w) * self.dtheta * T::of_usize(self.n_theta)
    }

    /// Integral of a nodal scalar sample over the disk.
    pub fn integrate(&self, g: &[T]) -> T {
        let mut acc = T::zero();
        for j in 0..self.n_r {
            let mut ring = T::zero();
            for k in 0..self.n_theta {
                ring = ring + g[self.idx(j, k)];
            }
            acc = acc + ring * self.wr[j];
        }
        acc * self.dtheta
    }
}

/// Two-component complex field on a disk grid with its physical data.
#[derive(Debug, Clone)]
pub struct DiskField<T: Real> {
    pub grid: DiskGrid<T>,
    pub psi_plus: Vec<C<T>>,
    pub psi_minus: Vec<C<T>>,
    pub degrees: (i32, i32),
    pub epsilon: T,
    pub beta: T,
}

#[derive(Debug, Clone)]
pub struct EnergyBreakdown<T: Real> {
    pub dirichlet: T,
    pub potential_iso: T,
    pub potential_spin: T,
    pub total: T,
    pub spin_l2_scaled: T,
}

#[derive(Debug, Clone)]
pub struct CoreEnergyEstimate<T: Real> {
    pub degrees: (i32, i32),
    pub beta: T,
    pub samples: Vec<(T, T)>,
    pub q_extrapolated: T,
    pub c1: T,
    pub fit_residual: T,
}

/// Exact boundary ring (1/sqrt2)(e^{i n+ theta}, e^{i n- theta}).
pub fn boundary_data<T: Real>(
    n_plus: i32,
    n_minus: i32,
    grid: &DiskGrid<T>,
) -> (Vec<C<T>>, Vec<C<T>>) {
    let amp = T::one() / T::of(2.0).sqrt();
    let ring = |n: i32| -> Vec<C<T>> {
        grid.theta
            .iter()
            .map(|&th| {
                let ph = th * T::of(n as f64);
                C::new(amp * ph.cos(), amp * ph.sin())
            })
            .collect()
    };
    (ring(n_plus), ring(n_minus))
}

impl<T: Real> DiskField<T> {
    /// Initial field (1/sqrt2) g_eps(r) e^{i n theta} per component, with
    /// g_eps(r) = min(r/eps, 1) wherever the winding is nonzero.
    pub fn initial(
        grid: DiskGrid<T>,
        degrees: (i32, i32),
        epsilon: T,
        beta: T,
    ) -> Self {
        let (bp, bm) = boundary_data(degrees.0, degrees.1, &grid);
        let mut psi_plus = vec![C::new(T::zero(), T::zero()); grid.n_nodes()];
        let mut psi_minus = psi_plus.clone();
        for j in 0..grid.n_r {
            let g = if grid.r[j] / epsilon < T::one() {
                grid.r[j] / epsilon
            } else {
                T::one()
            };
            for k in 0..grid.n_theta {
                let i = grid.idx(j, k);
                let gp = if degrees.0 == 0 { T::one() } else { g };
                let gm = if degrees.1 == 0 { T::one() } else { g };
                psi_plus[i] = bp[k] * gp;
                psi_minus[i] = bm[k] * gm;
            }
        }
        // boundary ring exact
        let jb = grid.n_r - 1;
        for k in 0..grid.n_theta {
            let i = grid.idx(jb, k);
            psi_plus[i] = bp[k];
            psi_minus[i] = bm[k];
        }
        DiskField {
            grid,
            psi_plus,
            psi_minus,
            degrees,
            epsilon,
            beta,
        }
    }

    pub fn sup_norm_diff(&self, other: &Self) -> T {
        self.psi_plus
            .iter()
            .zip(&other.psi_plus)
            .chain(self.psi_minus.iter().zip(&other.psi_minus))
            .map(|(a, b)| (*a - *b).norm_sqr().sqrt())
            .fold(T::zero(), |m, v| m.max(v))
    }
}

/// The symmetric vortex U_lambda = (1/sqrt2) f_lambda(r) (e^{i theta}, e^{i theta}).
pub fn symmetric_solution<T: Real>(
    lambda: T,
    beta: T,
    grid: DiskGrid<T>,
) -> Result<DiskField<T>, DiskError> {
    let prof = profile_f_lambda(
        lambda,
        T::of(Tolerances::default().shooting_residual),
        (grid.n_r * 4).max(1024),
    )?;
    let epsilon = T::one() / lambda.sqrt();
    let amp = T::one() / T::of(2.0).sqrt();
    let mut field = DiskField::initial(grid, (1, 1), epsilon, beta);
    for j in 0..field.grid.n_r {
        let f = prof.eval(field.grid.r[j] / field.grid.radius);
        for k in 0..field.grid.n_theta {
            let th = field.grid.theta[k];
            let v = C::new(amp * f * th.cos(), amp * f * th.sin());
            let i = field.grid.idx(j, k);
            field.psi_plus[i] = v;
            field.psi_minus[i] = v;
        }
    }
    Ok(field)
}

// --- discrete energy -----------------------------------------------------

/// Dirichlet part of one component: sum over radial and angular links.
fn dirichlet_comp<T: Real>(grid: &DiskGrid<T>, psi: &[C<T>]) -> T {
    let half = T::of(0.5);
    let mut acc = T::zero();
    // radial links between rings j and j+1 at face radius (j+1) dr
    for j in 0..grid.n_r - 1 {
        let rf = grid.dr * T::of_usize(j + 1);
        let c = half * rf / grid.dr; // (1/2) * r_face * dr / dr^2
        let mut s = T::zero();
        for k in 0..grid.n_theta {
            s = s + (psi[grid.idx(j + 1, k)] - psi[grid.idx(j, k)]).norm_sqr();
        }
        acc = acc + c * s;
    }
    // angular links within each ring
    for j in 0..grid.n_r {
        let c = half * grid.wr[j] / (grid.r[j] * grid.r[j] * grid.dtheta * grid.dtheta);
        let mut s = T::zero();
        for k in 0..grid.n_theta {
            let kp = (k + 1) % grid.n_theta;
            s = s + (psi[grid.idx(j, kp)] - psi[grid.idx(j, k)]).norm_sqr();
        }
        acc = acc + c * s;
    }
    acc * grid.dtheta
}

/// Full energy breakdown of a two-component field.
pub fn energy<T: Real>(field: &DiskField<T>) -> EnergyBreakdown<T> {
    let g = &field.grid;
    let dirichlet = dirichlet_comp(g, &field.psi_plus) + dirichlet_comp(g, &field.psi_minus);
    let quarter = T::of(0.25);
    let inv_eps2 = T::one() / (field.epsilon * field.epsilon);
    let n = g.n_nodes();
    let mut iso = vec![T::zero(); n];
    let mut spin_term = vec![T::zero(); n];
    let mut spin2 = vec![T::zero(); n];
    for i in 0..n {
        let a = field.psi_plus[i].norm_sqr();
        let b = field.psi_minus[i].norm_sqr();
        let tot = a + b - T::one();
        iso[i] = quarter * inv_eps2 * tot * tot;
        let d = a - b;
        spin_term[i] = quarter * inv_eps2 * field.beta * d * d;
        // S = (b - a)/2
        let s = (b - a) * T::of(0.5);
        spin2[i] = inv_eps2 * s * s;
    }
    let potential_iso = g.integrate(&iso);
    let potential_spin = g.integrate(&spin_term);
    let spin_l2_scaled = g.integrate(&spin2);
    EnergyBreakdown {
        dirichlet,
        potential_iso,
        potential_spin,
        total: dirichlet + potential_iso + potential_spin,
        spin_l2_scaled,
    }
}

/// eps^{-2} integral of the spin density squared.
pub fn spin_l2<T: Real>(field: &DiskField<T>) -> T {
    energy(field).spin_l2_scaled
}

// --- gradient / residual -------------------------------------------------

/// Gradient of the discrete energy with respect to each interior nodal
/// value (complex-valued: d/d(Re) + i d/d(Im)); boundary rows zero.
pub(crate) fn gradient<T: Real>(field: &DiskField<T>, out_p: &mut [C<T>], out_m: &mut [C<T>]) {
    let g = &field.grid;
    for v in out_p.iter_mut().chain(out_m.iter_mut()) {
        *v = C::new(T::zero(), T::zero());
    }
    let dth = g.dtheta;
    // Dirichlet part: gradient of (1/2)|grad psi|^2 sums
    for (psi, out) in [(&field.psi_plus, &mut *out_p), (&field.psi_minus, &mut *out_m)] {
        for j in 0..g.n_r - 1 {
            let rf = g.dr * T::of_usize(j + 1);
            let c = rf / g.dr * dth;
            for k in 0..g.n_theta {
                let d = psi[g.idx(j + 1, k)] - psi[g.idx(j, k)];
                out[g.idx(j + 1, k)] = out[g.idx(j + 1, k)] + d * c;
                out[g.idx(j, k)] = out[g.idx(j, k)] - d * c;
            }
        }
        for j in 0..g.n_r {
            let c = g.wr[j] / (g.r[j] * g.r[j] * g.dtheta * g.dtheta) * dth;
            for k in 0..g.n_theta {
                let kp = (k + 1) % g.n_theta;
                let d = psi[g.idx(j, kp)] - psi[g.idx(j, k)];
                out[g.idx(j, kp)] = out[g.idx(j, kp)] + d * c;
                out[g.idx(j, k)] = out[g.idx(j, k)] - d * c;
            }
        }
    }
    // potential part
    let inv_eps2 = T::one() / (field.epsilon * field.epsilon);
    for j in 0..g.n_r {
        let w = g.wr[j] * dth;
        for k in 0..g.n_theta {
            let i = g.idx(j, k);
            let a = field.psi_plus[i].norm_sqr();
            let b = field.psi_minus[i].norm_sqr();
            let tot = a + b - T::one();
            let d = a - b;
            let cp = inv_eps2 * (tot + field.beta * d) * w;
            let cm = inv_eps2 * (tot - field.beta * d) * w;
            out_p[i] = out_p[i] + field.psi_plus[i] * cp;
            out_m[i] = out_m[i] + field.psi_minus[i] * cm;
        }
    }
    // boundary ring is constrained: zero those rows
    let jb = g.n_r - 1;
    for k in 0..g.n_theta {
        let i = g.idx(jb, k);
        out_p[i] = C::new(T::zero(), T::zero());
        out_m[i] = C::new(T::zero(), T::zero());
    }
}

/// Pointwise Euler-Lagrange residual: the energy gradient divided by the
/// cell measure, which approximates -Delta psi + (rhs of the system).
pub fn residual<T: Real>(field: &DiskField<T>) -> (Vec<C<T>>, Vec<C<T>>) {
    let g = &field.grid;
    let n = g.n_nodes();
    let mut gp = vec![C::new(T::zero(), T::zero()); n];
    let mut gm = gp.clone();
    gradient(field, &mut gp, &mut gm);
    for j in 0..g.n_r {
        let w = g.wr[j] * g.dtheta;
        for k in 0..g.n_theta {
            let i = g.idx(j, k);
            gp[i] = gp[i] / w;
            gm[i] = gm[i] / w;
        }
    }
    (gp, gm)
}

/// L2 norm (over the disk measure) of the Euler-Lagrange residual.
pub fn residual_norm<T: Real>(field: &DiskField<T>) -> T {
    let g = &field.grid;
    let (rp, rm) = residual(field);
    let dens: Vec<T> = (0..g.n_nodes())
        .map(|i| rp[i].norm_sqr() + rm[i].norm_sqr())
        .collect();
    g.integrate(&dens).sqrt()
}

// --- minimizer -----------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MinimizeReport<T: Real> {
    pub iterations: usize,
    pub residual: T,
    pub energy: T,
    pub converged: bool,
}

/// Preconditioned Polak-Ribiere nonlinear CG with Armijo backtracking.
/// Boundary ring stays fixed. Returns the minimized field and a report;
/// max_iter exhaustion is reported, not fatal.
pub fn minimize<T: Real>(
    initial: &DiskField<T>,
    tol: T,
    max_iter: usize,
) -> (DiskField<T>, MinimizeReport<T>) {
    let mut field = initial.clone();
    let g = field.grid.clone();
    let n = g.n_nodes();
    let dth = g.dtheta;
    // diagonal preconditioner ~ cell measure * (Laplacian diagonal + 1/eps^2)
    let inv_eps2 = T::one() / (field.epsilon * field.epsilon);
    let two = T::of(2.0);
    let mut pre = vec![T::one(); n];
    for j in 0..g.n_r {
        let lap = two / (g.dr * g.dr) + two / (g.r[j] * g.r[j] * g.dtheta * g.dtheta);
        for k in 0..g.n_theta {
            pre[g.idx(j, k)] = g.wr[j] * dth * (lap + inv_eps2);
        }
    }
    let mut gp = vec![C::new(T::zero(), T::zero()); n];
    let mut gm = gp.clone();
    gradient(&field, &mut gp, &mut gm);
    let mut dp = vec![C::new(T::zero(), T::zero()); n];
    let mut dm = dp.clone();
    let pg = |gp: &[C<T>], gm: &[C<T>], dp: &mut [C<T>], dm: &mut [C<T>]| {
        for i in 0..n {
            dp[i] = -gp[i] / pre[i];
            dm[i] = -gm[i] / pre[i];
        }
    };
    pg(&gp, &gm, &mut dp, &mut dm);
    let inner = |ap: &[C<T>], am: &[C<T>], bp: &[C<T>], bm: &[C<T>]| -> T {
        let mut s = T::zero();
        for i in 0..n {
            s = s + ap[i].re * bp[i].re + ap[i].im * bp[i].im;
            s = s + am[i].re * bm[i].re + am[i].im * bm[i].im;
        }
        s
    };
    // L2 norm of the pointwise EL residual, directly from the gradient
    let res_of = |gp: &[C<T>], gm: &[C<T>]| -> T {
        let mut s = T::zero();
        for j in 0..g.n_r {
            let w = g.wr[j] * dth;
            for k in 0..g.n_theta {
                let i = g.idx(j, k);
                s = s + (gp[i].norm_sqr() + gm[i].norm_sqr()) / w;
            }
        }
        s.sqrt()
    };
    let mut e = energy(&field).total;
    let mut gnorm2 = {
        let mut s = T::zero();
        for i in 0..n {
            s = s + (gp[i].norm_sqr() + gm[i].norm_sqr()) / pre[i];
        }
        s
    };
    let mut step = T::one();
    let mut iterations = 0usize;
    let armijo = T::of(1e-4);
    let mut converged = false;
    let mut res = res_of(&gp, &gm);
    let mut trial = field.clone();
    let mut e_marker = e;
    for it in 0..max_iter {
        iterations = it + 1;
        if res <= tol {
            converged = true;
            break;
        }
        // stagnation exit: the energy has hit its round-off floor
        if it % 200 == 199 {
            if e >= e_marker - T::of(1e-13) * (T::one() + e.abs()) {
                break;
            }
            e_marker = e;
        }
        // Armijo backtracking along (dp, dm)
        let slope = inner(&gp, &gm, &dp, &dm);
        let slope = if slope < T::zero() {
            slope
        } else {
            // reset to steepest descent if the direction went uphill
            pg(&gp, &gm, &mut dp, &mut dm);
            inner(&gp, &gm, &dp, &dm)
        };
        let mut t = step * two;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                trial.psi_plus[i] = field.psi_plus[i] + dp[i] * t;
                trial.psi_minus[i] = field.psi_minus[i] + dm[i] * t;
            }
            let et = energy(&trial).total;
            if et <= e + armijo * t * slope {
                std::mem::swap(&mut field, &mut trial);
                e = et;
                accepted = true;
                break;
            }
            t = t * T::of(0.5);
        }
        if !accepted {
            // gradient is at round-off scale for this energy
            break;
        }
        step = t;
        let (gp_old, gm_old, gnorm2_old) = (gp.clone(), gm.clone(), gnorm2);
        gradient(&field, &mut gp, &mut gm);
        gnorm2 = {
            let mut s = T::zero();
            for i in 0..n {
                s = s + (gp[i].norm_sqr() + gm[i].norm_sqr()) / pre[i];
            }
            s
        };
        // Polak-Ribiere+ with preconditioned inner products
        let mut num = T::zero();
        for i in 0..n {
            let dyp = gp[i] - gp_old[i];
            let dym = gm[i] - gm_old[i];
            num = num + (gp[i].re * dyp.re + gp[i].im * dyp.im) / pre[i];
            num = num + (gm[i].re * dym.re + gm[i].im * dym.im) / pre[i];
        }
        let beta_pr = (num / gnorm2_old).max(T::zero());
        let beta_pr = if it % 50 == 49 { T::zero() } else { beta_pr };
        for i in 0..n {
            dp[i] = -gp[i] / pre[i] + dp[i] * beta_pr;
            dm[i] = -gm[i] / pre[i] + dm[i] * beta_pr;
        }
        res = res_of(&gp, &gm);
    }
    let report = MinimizeReport {
        iterations,
        residual: res,
        energy: e,
        converged: converged || res <= tol,
    };
    (field, report)
}

/// Antipodal saddle-escape perturbation built from the reduced ground
/// pair: t (w, -w) with w = a0(r) - a2(r) e^{2 i theta}.
pub fn add_mode_perturbation<T: Real>(field: &mut DiskField<T>, pair: &ModePair<T>, t: T) {
    let g = field.grid.clone();
    let nodes = pair.grid.nodes();
    let interp = |vals: &[T], r: T| -> T {
        // linear interpolation on the staggered spectral grid
        let h = nodes[1] - nodes[0];
        let x = ((r / g.radius) - nodes[0]) / h;
        let j = x.as_f64().floor().max(0.0) as usize;
        if j + 1 >= nodes.len() {
            return vals[nodes.len() - 1];
        }
        let frac = x - T::of_usize(j);
        vals[j] * (T::one() - frac) + vals[j + 1] * frac
    };
    for j in 0..g.n_r - 1 {
        let a0 = interp(&pair.a0, g.r[j]);
        let a2 = interp(&pair.a2, g.r[j]);
        for k in 0..g.n_theta {
            let th2 = g.theta[k] * T::of(2.0);
            let w = C::new(a0 - a2 * th2.cos(), -a2 * th2.sin());
            let i = g.idx(j, k);
            field.psi_plus[i] = field.psi_plus[i] + w * t;
            field.psi_minus[i] = field.psi_minus[i] - w * t;
        }
    }
}

// --- single-component Ginzburg-Landau ------------------------------------

/// Minimize the classical one-component GL energy with boundary e^{i theta}
/// and return (minimizer, I_GL(eps)).
pub fn minimize_gl<T: Real>(
    grid: DiskGrid<T>,
    epsilon: T,
    tol: T,
    max_iter: usize,
) -> (Vec<C<T>>, T, MinimizeReport<T>) {
    // reuse the two-component machinery at beta = 0 with psi_- pinned to a
    // "vacuum" is not exact; instead use a dedicated small loop via the
    // identity E_GL(u) = E_{beta=1}((u/sqrt2, u/sqrt2)) ... which doubles
    // the potential. Simplest correct route: run the two-component
    // minimizer with both components forced equal by symmetry of the
    // discrete problem at beta = 1 and degrees (1,1): components stay
    // equal along the descent and E = I_GL by Lemma-1 style decoupling.
    let mut init = DiskField::initial(grid, (1, 1), epsilon, T::one());
    // exact equality of components at start; the beta = 1 energy of
    // (u, u)/|..| equals G(u) with u = sqrt2 psi_+
    init.beta = T::one();
    let (min_field, report) = minimize(&init, tol, max_iter);
    let sqrt2 = T::of(2.0).sqrt();
    let u: Vec<C<T>> = min_field.psi_plus.iter().map(|&v| v * sqrt2).collect();
    (u, report.energy, report)
}

// --- core energies -------------------------------------------------------

/// Minimize at each eps and fit I(eps) = (pi/2)(n+ + n-)|ln eps| + Q + c1 eps.
pub fn core_energy<T: Real>(
    grid_for: &dyn Fn(T) -> DiskGrid<T>,
    degrees: (i32, i32),
    beta: T,
    eps_list: &[T],
    tol: T,
    pair: Option<&ModePair<T>>,
) -> Result<CoreEnergyEstimate<T>, DiskError> {
    assert!(eps_list.len() >= 3, "need at least three eps samples");
    for w in eps_list.windows(2) {
        assert!(w[1] < w[0], "eps_list must be decreasing");
    }
    let mut samples = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let grid = grid_for(eps);
        assert!(
            eps >= T::of(4.0) * grid.dr,
            "eps below resolvable scale for the given grid"
        );
        let mut init = DiskField::initial(grid, degrees, eps, beta);
        if beta < T::one() && degrees == (1, 1) {
            if let Some(p) = pair {
                add_mode_perturbation(&mut init, p, T::of(0.05));
            }
        }
        let (_, report) = minimize(&init, tol, 40_000);
        samples.push((eps, report.energy));
    }
    core_energy_fit(degrees, beta, samples)
}

/// Fit precomputed (eps, energy) samples to the core-energy model.
pub fn core_energy_fit<T: Real>(
    degrees: (i32, i32),
    beta: T,
    samples: Vec<(T, T)>,
) -> Result<CoreEnergyEstimate<T>, DiskError> {
    let halfpi = T::PI() * T::of(0.5);
    let deg_sum = T::of((degrees.0 + degrees.1) as f64);
    let yshift: Vec<T> = samples
        .iter()
        .map(|&(e, i)| i - halfpi * deg_sum * (-e.ln()))
        .collect();
    let xs: Vec<T> = samples.iter().map(|&(e, _)| e).collect();
    let one = |_x: T| T::one();
    let lin = |x: T| x;
    let basis: [&dyn Fn(T) -> T; 2] = [&one, &lin];
    let (coef, fit_residual) = crate::linalg::least_squares(&xs, &yshift, &basis);
    // Cauchy-like behavior: shifted energies decrease toward the limit
    for w in yshift.windows(2) {
        if w[1] > w[0] + T::of(4.0) * fit_residual.max(T::of(1e-6)) {
            return Err(DiskError::NonMonotone(
                xs[yshift.iter().position(|&y| y == w[1]).unwrap_or(0)].as_f64(),
            ));
        }
    }
    Ok(CoreEnergyEstimate {
        degrees,
        beta,
        samples,
        q_extrapolated: coef[0],
        c1: coef[1],
        fit_residual,
    })
}

// --- zero finding --------------------------------------------------------

/// Zeros of one complex component: cells with nonzero discrete winding,
/// located to sub-cell accuracy by a local linear model.
pub fn find_zeros_component<T: Real>(
    grid: &DiskGrid<T>,
    psi: &[C<T>],
) -> Result<Vec<(T, T)>, DiskError> {
    let mut zeros = Vec::new();
    // winding around the innermost ring: a zero in the center hole
    let inner_winding = ring_winding(grid, psi, 0);
    if inner_winding != 0 {
        // linear model from the first ring: psi ~ c z near 0; estimate the
        // zero position by minimizing |psi| on a fit through ring values.
        zeros.push(center_zero_estimate(grid, psi));
    }
    for j in 0..grid.n_r - 1 {
        for k in 0..grid.n_theta {
            let kp = (k + 1) % grid.n_theta;
            let q = [
                psi[grid.idx(j, k)],
                psi[grid.idx(j + 1, k)],
                psi[grid.idx(j + 1, kp)],
                psi[grid.idx(j, kp)],
            ];
            let mut wind = T::zero();
            for m in 0..4 {
                let a = q[m];
                let b = q[(m + 1) % 4];
                let cross = a.re * b.im - a.im * b.re;
                let dot = a.re * b.re + a.im * b.im;
                wind = wind + cross.atan2(dot);
            }
            if wind.abs() > T::of(3.0) {
                // winding +-2pi around this cell
                if j + 2 == grid.n_r {
                    return Err(DiskError::BoundaryZero);
                }
                zeros.push(cell_zero_estimate(grid, psi, j, k));
            }
        }
    }
    Ok(zeros)
}

fn ring_winding<T: Real>(grid: &DiskGrid<T>, psi: &[C<T>], j: usize) -> i32 {
    let mut wind = T::zero();
    for k in 0..grid.n_theta {
        let kp = (k + 1) % grid.n_theta;
        let a = psi[grid.idx(j, k)];
        let b = psi[grid.idx(j, kp)];
        let cross = a.re * b.im - a.im * b.re;
        let dot = a.re * b.re + a.im * b.im;
        wind = wind + cross.atan2(dot);
    }
    (wind / (T::of(2.0) * T::PI())).as_f64().round() as i32
}

fn center_zero_estimate<T: Real>(grid: &DiskGrid<T>, psi: &[C<T>]) -> (T, T) {
    // fit psi ~ c0 + c1 x + c2 y over the two innermost rings and solve
    // the 2x2 linear system c1 x + c2 y = -c0 treating c's as complex
    let mut sums = [[T::zero(); 3]; 3];
    let mut rhs_re = [T::zero(); 3];
    let mut rhs_im = [T::zero(); 3];
    for j in 0..2.min(grid.n_r) {
        for k in 0..grid.n_theta {
            let x = grid.r[j] * grid.theta[k].cos();
            let y = grid.r[j] * grid.theta[k].sin();
            let basis = [T::one(), x, y];
            let v = psi[grid.idx(j, k)];
            for a in 0..3 {
                for b in 0..3 {
                    sums[a][b] = sums[a][b] + basis[a] * basis[b];
                }
                rhs_re[a] = rhs_re[a] + basis[a] * v.re;
                rhs_im[a] = rhs_im[a] + basis[a] * v.im;
            }
        }
    }
    let solve3 = |rhs: [T; 3]| -> [T; 3] {
        let mut m: Vec<Vec<T>> = (0..3).map(|i| sums[i].to_vec()).collect();
        let mut b = rhs.to_vec();
        let _ = crate::linalg::solve_dense(&mut m, &mut b);
        [b[0], b[1], b[2]]
    };
    let cre = solve3(rhs_re);
    let cim = solve3(rhs_im);
    // [cre1 cre2; cim1 cim2] [x y]^T = [-cre0, -cim0]
    let det = cre[1] * cim[2] - cre[2] * cim[1];
    if det.abs() < T::of(1e-300) {
        return (T::zero(), T::zero());
    }
    let x = (-cre[0] * cim[2] + cim[0] * cre[2]) / det;
    let y = (-cim[0] * cre[1] + cre[0] * cim[1]) / det;
    (x, y)
}

fn cell_zero_estimate<T: Real>(
    grid: &DiskGrid<T>,
    psi: &[C<T>],
    j: usize,
    k: usize,
) -> (T, T) {
    // local linear model around the cell center in Cartesian coordinates
    let kp = (k + 1) % grid.n_theta;
    let pts = [
        (j, k),
        (j + 1, k),
        (j + 1, kp),
        (j, kp),
    ];
    let mut sums = [[T::zero(); 3]; 3];
    let mut rhs_re = [T::zero(); 3];
    let mut rhs_im = [T::zero(); 3];
    for &(jj, kk) in &pts {
        let x = grid.r[jj] * grid.theta[kk].cos();
        let y = grid.r[jj] * grid.theta[kk].sin();
        let basis = [T::one(), x, y];
        let v = psi[grid.idx(jj, kk)];
        for a in 0..3 {
            for b in 0..3 {
                sums[a][b] = sums[a][b] + basis[a] * basis[b];
            }
            rhs_re[a] = rhs_re[a] + basis[a] * v.re;
            rhs_im[a] = rhs_im[a] + basis[a] * v.im;
        }
    }
    let solve3 = |rhs: [T; 3], sums: &[[T; 3]; 3]| -> [T; 3] {
        let mut m: Vec<Vec<T>> = (0..3).map(|i| sums[i].to_vec()).collect();
        let mut b = rhs.to_vec();
        let _ = crate::linalg::solve_dense(&mut m, &mut b);
        [b[0], b[1], b[2]]
    };
    let cre = solve3(rhs_re, &sums);
    let cim = solve3(rhs_im, &sums);
    let det = cre[1] * cim[2] - cre[2] * cim[1];
    if det.abs() < T::of(1e-300) {
        let x = grid.r[j] * grid.theta[k].cos();
        let y = grid.r[j] * grid.theta[k].sin();
        return (x, y);
    }
    let x = (-cre[0] * cim[2] + cim[0] * cre[2]) / det;
    let y = (-cim[0] * cre[1] + cre[0] * cim[1]) / det;
    (x, y)
}

/// Zeros of both components.
pub fn find_zeros<T: Real>(
    field: &DiskField<T>,
) -> Result<(Vec<(T, T)>, Vec<(T, T)>), DiskError> {
    Ok((
        find_zeros_component(&field.grid, &field.psi_plus)?,
        find_zeros_component(&field.grid, &field.psi_minus)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> DiskGrid<f64> {
        DiskGrid::unit(48, 48)
    }

    #[test]
    fn quadrature_sums_to_pi() {
        let g = small_grid();
        assert!((g.area() - std::f64::consts::PI).abs() < 1e-12);
        let g2 = DiskGrid::<f64>::new(0.5, 32, 64);
        assert!((g2.area() - std::f64::consts::PI * 0.25).abs() < 1e-12);
    }

    #[test]
    fn boundary_data_windings() {
        let g = small_grid();
        let (bp, bm) = boundary_data::<f64>(1, 0, &g);
        let wind = |ring: &[C<f64>]| -> f64 {
            let mut w = 0.0;
            for k in 0..g.n_theta {
                let a = ring[k];
                let b = ring[(k + 1) % g.n_theta];
                w += (a.re * b.im - a.im * b.re).atan2(a.re * b.re + a.im * b.im);
            }
            w / (2.0 * std::f64::consts::PI)
        };
        assert!((wind(&bp) - 1.0).abs() < 1e-12);
        assert!(wind(&bm).abs() < 1e-12);
        for v in &bm {
            assert!((v - C::new(1.0 / 2f64.sqrt(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn vacuum_energy_zero() {
        let g = small_grid();
        let mut f = DiskField::initial(g, (0, 0), 0.2, 0.7);
        // (0,0) initial is exactly the constant vacuum
        let e = energy(&f);
        assert!(e.total.abs() < 1e-12, "vacuum energy {}", e.total);
        assert!(e.spin_l2_scaled.abs() < 1e-14);
        // equal components => no spin terms, even after a distortion
        for v in f.psi_plus.iter_mut() {
            *v = *v * 0.9;
        }
        f.psi_minus = f.psi_plus.clone();
        let e = energy(&f);
        assert_eq!(e.potential_spin, 0.0);
        assert_eq!(e.spin_l2_scaled, 0.0);
    }

    #[test]
    fn breakdown_identity() {
        // potential_iso + potential_spin == (1/4 eps^2) int [2 sum(|psi|^2-1/2)^2 + 4(beta-1)S^2]
        let g = small_grid();
        let mut f = DiskField::initial(g, (1, 1), 0.15, 0.6);
        // distort deterministically
        for (i, v) in f.psi_plus.iter_mut().enumerate() {
            if i / f.grid.n_theta < f.grid.n_r - 1 {
                *v = *v + C::new(0.03 * ((i % 17) as f64 - 8.0) / 8.0, -0.02 * ((i % 11) as f64 - 5.0) / 5.0);
            }
        }
        let e = energy(&f);
        let inv4e2 = 0.25 / (f.epsilon * f.epsilon);
        let dens: Vec<f64> = (0..f.grid.n_nodes())
            .map(|i| {
                let a = f.psi_plus[i].norm_sqr();
                let b = f.psi_minus[i].norm_sqr();
                let s = 0.5 * (b - a);
                inv4e2 * (2.0 * ((a - 0.5).powi(2) + (b - 0.5).powi(2)) + 4.0 * (f.beta - 1.0) * s * s)
            })
            .collect();
        let alt = f.grid.integrate(&dens);
        let lhs = e.potential_iso + e.potential_spin;
        assert!(
            (lhs - alt).abs() <= 1e-10 * lhs.abs().max(1.0),
            "identity violated: {lhs} vs {alt}"
        );
        assert!((e.total - (e.dirichlet + e.potential_iso + e.potential_spin)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = DiskGrid::unit(24, 24);
        let mut f = DiskField::initial(g, (1, 1), 0.3, 0.5);
        for (i, v) in f.psi_plus.iter_mut().enumerate() {
            if i / f.grid.n_theta < f.grid.n_r - 1 {
                *v = *v + C::new(0.05 * ((i % 13) as f64 / 13.0 - 0.5), 0.04 * ((i % 7) as f64 / 7.0 - 0.5));
            }
        }
        let n = f.grid.n_nodes();
        let mut gp = vec![C::new(0.0, 0.0); n];
        let mut gm = gp.clone();
        gradient(&f, &mut gp, &mut gm);
        // random-ish test direction, zero on boundary
        let mut dirp = vec![C::new(0.0, 0.0); n];
        let mut dirm = dirp.clone();
        for i in 0..n {
            if i / f.grid.n_theta < f.grid.n_r - 1 {
                dirp[i] = C::new(((i % 5) as f64 - 2.0) / 2.0, (i % 3) as f64 - 1.0);
                dirm[i] = C::new(((i % 7) as f64 - 3.0) / 3.0, ((i % 4) as f64 - 1.5) / 1.5);
            }
        }
        let h = 1e-6;
        let mut plus = f.clone();
        let mut minus = f.clone();
        for i in 0..n {
            plus.psi_plus[i] = f.psi_plus[i] + dirp[i] * h;
            plus.psi_minus[i] = f.psi_minus[i] + dirm[i] * h;
            minus.psi_plus[i] = f.psi_plus[i] - dirp[i] * h;
            minus.psi_minus[i] = f.psi_minus[i] - dirm[i] * h;
        }
        let fd = (energy(&plus).total - energy(&minus).total) / (2.0 * h);
        let mut dot = 0.0;
        for i in 0..n {
            dot += gp[i].re * dirp[i].re + gp[i].im * dirp[i].im;
            dot += gm[i].re * dirm[i].re + gm[i].im * dirm[i].im;
        }
        assert!(
            (fd - dot).abs() <= 1e-6 * dot.abs().max(1.0),
            "gradient mismatch fd={fd} dot={dot}"
        );
    }

    #[test]
    fn symmetric_solution_diagnostics() {
        let g = DiskGrid::unit(64, 64);
        let u = symmetric_solution(25.0, 0.5, g).unwrap();
        assert_eq!(spin_l2(&u), 0.0);
        let (zp, zm) = find_zeros(&u).unwrap();
        assert_eq!(zp.len(), 1);
        assert_eq!(zm.len(), 1);
        let cell = f64::hypot(u.grid.dr, u.grid.r[0] * u.grid.dtheta);
        assert!(f64::hypot(zp[0].0, zp[0].1) < cell, "zero not at origin: {:?}", zp);
    }

    #[test]
    fn minimize_beta2_components_equal() {
        let g = DiskGrid::unit(48, 48);
        let init = DiskField::initial(g, (1, 1), 0.1, 2.0);
        let (m, report) = minimize(&init, 1e-4, 20_000);
        assert!(report.converged, "residual {}", report.residual);
        let mut sup = 0.0f64;
        for i in 0..m.grid.n_nodes() {
            sup = sup.max((m.psi_plus[i] - m.psi_minus[i]).norm());
        }
        assert!(sup <= 1e-6, "components differ by {sup}");
        // |Psi| <= 1 post-minimization
        for i in 0..m.grid.n_nodes() {
            let mag = (m.psi_plus[i].norm_sqr() + m.psi_minus[i].norm_sqr()).sqrt();
            assert!(mag <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn residual_of_symmetric_solution_refines_at_order_two() {
        let mut norms = Vec::new();
        for n in [32usize, 64, 128] {
            let g = DiskGrid::unit(n, n);
            let u = symmetric_solution(9.0, 0.5, g).unwrap();
            norms.push(residual_norm(&u));
        }
        let r1 = norms[0] / norms[1];
        let r2 = norms[1] / norms[2];
        assert!(r1 > 3.0 && r2 > 3.0, "refinement ratios {norms:?}");
    }
}
