//! Fourier-mode-reduced linearized operators around the symmetric vortex.
//!
//! The linearization decouples into angular modes; mode n acts on the
//! coefficient pair (b_{n+1}, b_{1-n}), which further splits into two real
//! sectors with couplings (p + q)^2 and (p - q)^2. Mode 1 in the (p - q)
//! sector is the operator M_lambda of the reduced stability problem, whose
//! ground eigenvalue mu_1^(1)(lambda) decides the critical coupling.

use crate::grid::RadialGrid;
use crate::linalg::{Banded, BandedLu};
use crate::radial::{profile_f_lambda, RadialProfile};
use crate::real::Real;
use crate::Tolerances;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SpectralError {
    #[error("inverse iteration did not converge after {0} sweeps")]
    NonConvergence(usize),
    #[error("operator factorization failed even after shift perturbation")]
    FactorizationFailure,
    #[error("no eigenvalue sign change for beta = {0} in lambda bracket [{1}, {2}]")]
    NoCrossing(f64, f64, f64),
    #[error("radial profile solve failed: {0}")]
    Profile(#[from] crate::radial::RadialError),
}

/// Which real sector of the complex pair: coupling (p + q)^2 or (p - q)^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Plus,
    Minus,
}

/// Discrete mode operator: generalized symmetric problem A v = mu W v in
/// the r dr inner product, on a cell-centered grid over (0, 1).
#[derive(Debug, Clone)]
pub struct ModeOperator<T: Real> {
    pub a: Banded<T>,
    pub w: Vec<T>,
    pub n_comp: usize,
    pub n_cells: usize,
    pub grid: RadialGrid<T>,
    pub mode_index: usize,
    pub sector: Sector,
}

impl<T: Real> ModeOperator<T> {
    pub fn dim(&self) -> usize {
        self.n_comp * self.n_cells
    }

    /// <u, v> in the discrete weighted inner product.
    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        self.w
            .iter()
            .zip(u.iter().zip(v))
            .map(|(&w, (&a, &b))| w * a * b)
            .fold(T::zero(), |s, x| s + x)
    }

    /// Quadratic form value <A v, v> (the form with the pi factor dropped).
    pub fn form(&self, v: &[T]) -> T {
        let mut av = vec![T::zero(); v.len()];
        self.a.mul_vec(v, &mut av);
        av.iter()
            .zip(v)
            .map(|(&a, &b)| a * b)
            .fold(T::zero(), |s, x| s + x)
    }
}

/// Real-valued ground pair (a0, a2) of M_lambda, normalized in L^2(r dr).
#[derive(Debug, Clone)]
pub struct ModePair<T: Real> {
    pub grid: RadialGrid<T>,
    pub a0: Vec<T>,
    pub a2: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct SpectralResult<T: Real> {
    pub lambda: T,
    pub beta: T,
    pub mode_index: usize,
    pub eigenvalue_mu: T,
    pub pair: Option<ModePair<T>>,
    pub solver_residual: T,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CriticalCoupling {
    pub beta: f64,
    pub lambda_beta: f64,
    pub bracket: (f64, f64),
    #[serde(rename = "slope")]
    pub eigenvalue_slope: f64,
    pub grid_levels: (usize, usize),
}

/// Angular index of a component: |m| decides the m^2/r^2 form term and
/// whether the component vanishes at the origin.
fn angular_index(n: isize) -> usize {
    n.unsigned_abs()
}

/// Assemble the sector operator for mode n: components p = b_{n+1} and
/// q = b_{1-n} (n >= 1), or the single b_1 (n = 0). The coupling term is
/// beta lambda f^2 (p +/- q)^2 per sector; for n = 0 the two sectors are
/// Re/Im of b_1 with couplings 4 beta lambda f^2 and 0.
pub fn assemble_mode_n<T: Real>(
    n: usize,
    lambda: T,
    beta: T,
    profile: &RadialProfile<T>,
    sector: Sector,
    n_cells: usize,
) -> ModeOperator<T> {
    let grid = RadialGrid::staggered(T::one(), n_cells);
    let n_comp = if n == 0 { 1 } else { 2 };
    let h = T::one() / T::of_usize(n_cells);
    let nodes = grid.nodes().to_vec();
    let f2: Vec<T> = nodes
        .iter()
        .map(|&r| {
            let f = profile.eval(r);
            f * f
        })
        .collect();
    let m_idx: Vec<usize> = if n == 0 {
        vec![1]
    } else {
        vec![angular_index(n as isize + 1), angular_index(1 - n as isize)]
    };
    let dim = n_comp * n_cells;
    let mut a = Banded::zeros(dim, n_comp, n_comp);
    let idx = |i: usize, c: usize| n_comp * i + c;
    let two = T::of(2.0);
    // gradient term per component: interior faces at r = i h plus the
    // boundary half-cell against v(1) = 0; an (optional) origin half-cell
    // against v(0) = 0 for components with angular index >= 1
    for c in 0..n_comp {
        for i in 1..n_cells {
            // face between cells i-1 and i, radius i h, length h
            let coef = T::of_usize(i) * h; // r * h / h^2 = r / h ... times h
            let coef = coef / h;
            a.add(idx(i, c), idx(i, c), coef);
            a.add(idx(i - 1, c), idx(i - 1, c), coef);
            a.add(idx(i, c), idx(i - 1, c), -coef);
            a.add(idx(i - 1, c), idx(i, c), -coef);
        }
        // boundary half cell [1 - h/2, 1]: gradient (0 - v_{n-1}) / (h/2)
        let w_half = h / two * (T::one() - h / T::of(4.0));
        let coef = w_half / (h / two) / (h / two);
        a.add(idx(n_cells - 1, c), idx(n_cells - 1, c), coef);
        if m_idx[c] >= 1 {
            // origin half cell [0, h/2]: gradient (v_0 - 0) / (h/2)
            let w0 = h * h / T::of(8.0);
            let coef = w0 / (h / two) / (h / two);
            a.add(idx(0, c), idx(0, c), coef);
        }
    }
    // potential, centrifugal and coupling terms, cell-diagonal
    let wts = grid.weights();
    for i in 0..n_cells {
        let r = nodes[i];
        let w = wts[i];
        let pot = lambda * (f2[i] - T::one());
        let couple = beta * lambda * f2[i];
        for c in 0..n_comp {
            let m = T::of_usize(m_idx[c] * m_idx[c]);
            a.add(idx(i, c), idx(i, c), w * (pot + m / (r * r)));
        }
        if n_comp == 2 {
            let s = match sector {
                Sector::Plus => T::one(),
                Sector::Minus => -T::one(),
            };
            // couple * (p + s q)^2
            a.add(idx(i, 0), idx(i, 0), w * couple);
            a.add(idx(i, 1), idx(i, 1), w * couple);
            a.add(idx(i, 0), idx(i, 1), w * couple * s);
            a.add(idx(i, 1), idx(i, 0), w * couple * s);
        } else {
            // |b_1 + conj(b_1)|^2 = 4 (Re b_1)^2: Plus sector carries it
            if sector == Sector::Plus {
                a.add(idx(i, 0), idx(i, 0), w * T::of(4.0) * couple);
            }
        }
    }
    let mut w_full = vec![T::zero(); dim];
    for i in 0..n_cells {
        for c in 0..n_comp {
            w_full[idx(i, c)] = wts[i];
        }
    }
    ModeOperator {
        a,
        w: w_full,
        n_comp,
        n_cells,
        grid,
        mode_index: n,
        sector,
    }
}

/// The reduced operator M_lambda on real pairs (a0, a2): mode 1 in the
/// (p - q)^2 sector, with p = b_2 = a2 and q = b_0 = a0.
pub fn assemble_mode1<T: Real>(
    lambda: T,
    beta: T,
    profile: &RadialProfile<T>,
    n_cells: usize,
) -> ModeOperator<T> {
    assemble_mode_n(1, lambda, beta, profile, Sector::Minus, n_cells)
}

/// One eigenpair of the generalized problem A v = mu W v.
#[derive(Debug, Clone)]
pub struct EigenPair<T: Real> {
    pub value: T,
    pub vector: Vec<T>,
    pub residual: T,
}

/// k smallest eigenpairs by shifted inverse iteration with deflation.
pub fn ground_eigenpair<T: Real>(
    op: &ModeOperator<T>,
    k: usize,
) -> Result<Vec<EigenPair<T>>, SpectralError> {
    ground_eigenpair_shifted(op, k, None)
}

/// Same, but warm-started from a caller-provided shift (e.g. the previous
/// lambda's eigenvalue along a sweep), used to seed the inertia bisection.
pub fn ground_eigenpair_shifted<T: Real>(
    op: &ModeOperator<T>,
    k: usize,
    warm_shift: Option<T>,
) -> Result<Vec<EigenPair<T>>, SpectralError> {
    let dim = op.dim();
    // Gershgorin bounds for the pencil (A, W)
    let mut lower = T::infinity();
    let mut upper = -T::infinity();
    for i in 0..dim {
        let mut off = T::zero();
        let lo = i.saturating_sub(op.a.kl());
        let hi = (i + op.a.ku()).min(dim - 1);
        for j in lo..=hi {
            if j != i {
                off = off + op.a.get(i, j).abs();
            }
        }
        lower = lower.min((op.a.get(i, i) - off) / op.w[i]);
        upper = upper.max((op.a.get(i, i) + off) / op.w[i]);
    }
    let count = |sigma: T| -> usize {
        // tiny perturbation walk in case the shift lands on an eigenvalue
        for attempt in 0..6 {
            let bump = T::of(1e-10) * T::of_usize(attempt) * (T::one() + sigma.abs());
            if let Some(c) = inertia_below(op, sigma - bump) {
                return c;
            }
        }
        inertia_below(op, sigma).unwrap_or(0)
    };
    let mut found: Vec<EigenPair<T>> = Vec::new();
    let tol = T::of(Tolerances::default().eigen_residual);
    for j in 0..k {
        // isolate mu_{j+1} by inertia bisection: count(lo) <= j < count(hi)
        let (mut lo, mut hi) = (lower, upper);
        if let Some(w) = warm_shift {
            if j == 0 && w > lower && w < upper {
                if count(w) == 0 {
                    lo = w;
                } else {
                    hi = w;
                }
            }
        }
        for _ in 0..80 {
            if (hi - lo) <= T::of(1e-8) * (T::one() + lo.abs().max(hi.abs())) {
                break;
            }
            let mid = (lo + hi) * T::of(0.5);
            if count(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // inverse iteration with fixed shift just below the target
        let shift = lo - (hi - lo) - T::of(1e-9) * (T::one() + lo.abs());
        let mut lu = factor_shifted(op, shift)?;
        let mut v: Vec<T> = (0..dim)
            .map(|i| T::one() + T::of(0.3) * T::of_usize(i % 7))
            .collect();
        w_orthogonalize(op, &mut v, &found);
        normalize(op, &mut v);
        let mut mu = T::zero();
        let mut res = T::infinity();
        let max_sweeps = 60;
        let mut converged = false;
        for sweep in 0..max_sweeps {
            let mut y: Vec<T> = v.iter().zip(&op.w).map(|(&x, &w)| w * x).collect();
            lu.solve(&mut y);
            w_orthogonalize(op, &mut y, &found);
            normalize(op, &mut y);
            v = y;
            let mut av = vec![T::zero(); dim];
            op.a.mul_vec(&v, &mut av);
            mu = dot_plain(&av, &v) / op.inner(&v, &v);
            // round-off floor of the residual is set by |A||v|, not mu v
            let mut r2 = T::zero();
            let mut s2 = T::zero();
            for i in 0..dim {
                let r = av[i] - mu * op.w[i] * v[i];
                r2 = r2 + r * r / op.w[i];
                let lo_j = i.saturating_sub(op.a.kl());
                let hi_j = (i + op.a.ku()).min(dim - 1);
                let mut abs_row = T::zero();
                for jj in lo_j..=hi_j {
                    abs_row = abs_row + op.a.get(i, jj).abs() * v[jj].abs();
                }
                s2 = s2 + abs_row * abs_row / op.w[i];
            }
            res = r2.sqrt() / s2.sqrt().max(T::one() + mu.abs());
            if res <= tol {
                converged = true;
                break;
            }
            if sweep == 10 || sweep == 30 {
                // polish the shift from the current Rayleigh quotient,
                // staying on the safe side of the bracket
                lu = factor_shifted(op, mu.min(hi).max(shift) - (hi - lo))?;
            }
        }
        if !converged {
            return Err(SpectralError::NonConvergence(max_sweeps));
        }
        found.push(EigenPair {
            value: mu,
            vector: v,
            residual: res,
        });
        found.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    }
    Ok(found)
}

/// Number of eigenvalues of the pencil (A, W) strictly below sigma, via the
/// inertia of the unpivoted symmetric banded LDL^T of A - sigma W. Returns
/// None on breakdown (a pivot too close to zero).
fn inertia_below<T: Real>(op: &ModeOperator<T>, sigma: T) -> Option<usize> {
    let n = op.dim();
    let b = op.a.kl().max(op.a.ku());
    let mut d = vec![T::zero(); n];
    // l[j - i - 1][i] holds L(j, i) for j in i+1 ..= i+b
    let mut l = vec![vec![T::zero(); n]; b];
    let mut neg = 0usize;
    for i in 0..n {
        let mut di = op.a.get(i, i) - sigma * op.w[i];
        let k0 = i.saturating_sub(b);
        for k in k0..i {
            let lik = l[i - k - 1][k];
            di = di - lik * lik * d[k];
        }
        let scale = (op.a.get(i, i).abs() + sigma.abs() * op.w[i]).max(T::of(1e-300));
        if di.abs() <= T::of(1e-14) * scale {
            return None;
        }
        if di < T::zero() {
            neg += 1;
        }
        d[i] = di;
        for j in i + 1..(i + b + 1).min(n) {
            let mut v = op.a.get(j, i);
            let k0 = j.saturating_sub(b);
            for k in k0..i {
                v = v - l[j - k - 1][k] * l[i - k - 1][k] * d[k];
            }
            l[j - i - 1][i] = v / di;
        }
    }
    Some(neg)
}

fn factor_shifted<T: Real>(
    op: &ModeOperator<T>,
    shift: T,
) -> Result<BandedLu<T>, SpectralError> {
    for attempt in 0..4 {
        let bump = T::of(1e-8) * T::of_usize(attempt) * (T::one() + shift.abs());
        let s = shift - bump;
        let mut m = op.a.clone();
        for i in 0..op.dim() {
            m.add(i, i, -s * op.w[i]);
        }
        if let Ok(lu) = m.factor() {
            return Ok(lu);
        }
    }
    Err(SpectralError::FactorizationFailure)
}

fn dot_plain<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).fold(T::zero(), |s, v| s + v)
}

fn w_orthogonalize<T: Real>(op: &ModeOperator<T>, v: &mut [T], against: &[EigenPair<T>]) {
    for _ in 0..2 {
        for e in against {
            let c = op.inner(v, &e.vector);
            for (vi, &ei) in v.iter_mut().zip(&e.vector) {
                *vi = *vi - c * ei;
            }
        }
    }
}

fn normalize<T: Real>(op: &ModeOperator<T>, v: &mut [T]) {
    let n = op.inner(v, v).sqrt();
    for vi in v.iter_mut() {
        *vi = *vi / n;
    }
}

/// Extract the (a0, a2) pair from a mode-1 eigenvector, sign-normalized so
/// a0 >= 0 and unit in the r dr norm.
pub fn mode1_pair<T: Real>(op: &ModeOperator<T>, vector: &[T]) -> ModePair<T> {
    assert_eq!(op.mode_index, 1);
    let n = op.n_cells;
    // component 0 is p = b_2 = a2, component 1 is q = b_0 = a0
    let mut a2: Vec<T> = (0..n).map(|i| vector[2 * i]).collect();
    let mut a0: Vec<T> = (0..n).map(|i| vector[2 * i + 1]).collect();
    let mass: T = op
        .grid
        .weights()
        .iter()
        .zip(a0.iter().zip(&a2))
        .map(|(&w, (&x, &y))| w * (x * x + y * y))
        .fold(T::zero(), |s, v| s + v);
    let scale = mass.sqrt();
    let sign = if a0.iter().fold(T::zero(), |s, &v| s + v) < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    for v in a0.iter_mut().chain(a2.iter_mut()) {
        *v = *v * sign / scale;
    }
    ModePair {
        grid: op.grid.clone(),
        a0,
        a2,
    }
}

/// Default radial resolution for spectral assemblies.
pub const DEFAULT_CELLS: usize = 768;

/// Ground mode-1 eigenvalue mu_1^(1)(lambda) with its eigenpair.
pub fn mu1_of_lambda<T: Real>(
    lambda: T,
    beta: T,
    n_cells: usize,
) -> Result<SpectralResult<T>, SpectralError> {
    let profile = profile_f_lambda(
        lambda,
        T::of(Tolerances::default().shooting_residual),
        profile_resolution(lambda, n_cells),
    )?;
    mu1_with_profile(lambda, beta, &profile, n_cells, None)
}

fn profile_resolution<T: Real>(lambda: T, n_cells: usize) -> usize {
    // keep the profile at least as resolved as the spectral grid, and
    // resolve the core scale 1/sqrt(lambda)
    let core = (lambda.as_f64().sqrt() * 64.0) as usize;
    n_cells.max(core).min(16384)
}

pub fn mu1_with_profile<T: Real>(
    lambda: T,
    beta: T,
    profile: &RadialProfile<T>,
    n_cells: usize,
    warm_shift: Option<T>,
) -> Result<SpectralResult<T>, SpectralError> {
    let op = assemble_mode1(lambda, beta, profile, n_cells);
    let eig = ground_eigenpair_shifted(&op, 1, warm_shift)?;
    let pair = mode1_pair(&op, &eig[0].vector);
    Ok(SpectralResult {
        lambda,
        beta,
        mode_index: 1,
        eigenvalue_mu: eig[0].value,
        pair: Some(pair),
        solver_residual: eig[0].residual,
    })
}

/// Critical coupling lambda_beta: the unique zero of mu_1^(1)(.) for
/// 0 < beta < 1, located by bisection and Richardson-extrapolated across
/// two grid levels.
pub fn find_lambda_beta<T: Real>(
    beta: T,
    rel_tol: T,
    n_cells: usize,
) -> Result<CriticalCoupling, SpectralError> {
    let coarse = lambda_beta_single_grid(beta, rel_tol, n_cells)?;
    let fine = lambda_beta_single_grid(beta, rel_tol, 2 * n_cells)?;
    // second-order discretization: Richardson with factor 1/3
    let extrap = fine.0 + (fine.0 - coarse.0) / 3.0;
    Ok(CriticalCoupling {
        beta: beta.as_f64(),
        lambda_beta: extrap,
        bracket: fine.1,
        eigenvalue_slope: fine.2,
        grid_levels: (n_cells, 2 * n_cells),
    })
}

/// Single-grid crossing search: returns (lambda_beta, bracket, slope).
pub fn lambda_beta_single_grid<T: Real>(
    beta: T,
    rel_tol: T,
    n_cells: usize,
) -> Result<(f64, (f64, f64), f64), SpectralError> {
    let mu = |lambda: T| -> Result<T, SpectralError> {
        Ok(mu1_of_lambda(lambda, beta, n_cells)?.eigenvalue_mu)
    };
    let mut lo = T::of(1e-2);
    let mut mu_lo = mu(lo)?;
    if mu_lo <= T::zero() {
        return Err(SpectralError::NoCrossing(beta.as_f64(), 1e-2, 1e-2));
    }
    let mut hi = lo;
    let mut found = false;
    while hi.as_f64() < 1e6 {
        hi = hi * T::of(4.0);
        let m = mu(hi)?;
        if m < T::zero() {
            found = true;
            break;
        }
        lo = hi;
        mu_lo = m;
    }
    if !found {
        return Err(SpectralError::NoCrossing(beta.as_f64(), 1e-2, 1e6));
    }
    let _ = mu_lo;
    while (hi - lo) > rel_tol * hi {
        let mid = (lo + hi) * T::of(0.5);
        if mu(mid)? > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lb = (lo + hi) * T::of(0.5);
    let delta = lb * T::of(1e-3);
    let slope = (mu(lb + delta)? - mu(lb - delta)?) / (T::of(2.0) * delta);
    Ok((
        lb.as_f64(),
        (lo.as_f64(), hi.as_f64()),
        slope.as_f64(),
    ))
}

/// mu-hat_1(R) = mu_1^(1)(R^2) / R^2 for each R in the list.
pub fn muhat_monotonicity<T: Real>(
    beta: T,
    r_list: &[T],
    n_cells: usize,
) -> Result<Vec<(T, T)>, SpectralError> {
    let mut out = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let lambda = r * r;
        let mu = mu1_of_lambda(lambda, beta, n_cells)?.eigenvalue_mu;
        out.push((r, mu / lambda));
    }
    Ok(out)
}

/// Evaluate the limiting quadratic form Q-breve at R = r_max on the test
/// pair A = F', B = F/r built from the entire-plane profile, together with
/// its closed-form value 8 pi (beta - 1) int F^2 A^2 r dr.
///
/// The displayed form in the source carries the coupling as 2 beta A^2;
/// the integration-by-parts identity it is compared against requires the
/// f^2 weight, 2 beta F^2 A^2, which is what we evaluate.
pub fn qbreve_infinity<T: Real>(beta: T, finf: &RadialProfile<T>) -> (T, T) {
    let nodes = finf.grid.nodes();
    let f = &finf.values;
    let n = nodes.len();
    let da = finf.derivative();
    let a: Vec<T> = da.clone(); // A = F'
    let b: Vec<T> = (0..n)
        .map(|i| {
            if i == 0 {
                finf.slope_b
            } else {
                f[i] / nodes[i]
            }
        })
        .collect();
    // A' by the same centered differencing
    let ap = diff_centered(nodes, &a);
    let bp = diff_centered(nodes, &b);
    let two = T::of(2.0);
    let integrand: Vec<T> = (0..n)
        .map(|i| {
            let centr = if i == 0 {
                T::zero() // B - A = r (F/r)' = O(r^2)
            } else {
                two / (nodes[i] * nodes[i]) * (b[i] - a[i]) * (b[i] - a[i])
            };
            ap[i] * ap[i]
                + bp[i] * bp[i]
                + centr
                + (f[i] * f[i] - T::one()) * (a[i] * a[i] + b[i] * b[i])
                + two * beta * f[i] * f[i] * a[i] * a[i]
        })
        .collect();
    let four_pi = T::of(4.0) * T::PI();
    let form = four_pi * finf.grid.integrate(&integrand);
    let closed_integrand: Vec<T> = (0..n).map(|i| f[i] * f[i] * a[i] * a[i]).collect();
    let closed = T::of(8.0) * T::PI() * (beta - T::one()) * finf.grid.integrate(&closed_integrand);
    (form, closed)
}

fn diff_centered<T: Real>(nodes: &[T], v: &[T]) -> Vec<T> {
    let n = v.len();
    let mut d = vec![T::zero(); n];
    for i in 0..n {
        if i == 0 {
            d[i] = (v[1] - v[0]) / (nodes[1] - nodes[0]);
        } else if i + 1 == n {
            d[i] = (v[i] - v[i - 1]) / (nodes[i] - nodes[i - 1]);
        } else {
            let (h0, h1) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
            d[i] = (v[i + 1] * h0 * h0 - v[i - 1] * h1 * h1 + v[i] * (h1 * h1 - h0 * h0))
                / (h0 * h1 * (h0 + h1));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::entire_profile;

    fn profile(lambda: f64, n: usize) -> RadialProfile<f64> {
        profile_f_lambda(lambda, 1e-10, n).unwrap()
    }

    #[test]
    fn operator_is_symmetric() {
        let p = profile(4.0, 256);
        let op = assemble_mode1(4.0, 0.5, &p, 128);
        let dim = op.dim();
        let mut rng = 12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for _ in 0..10 {
            let u: Vec<f64> = (0..dim).map(|_| next()).collect();
            let v: Vec<f64> = (0..dim).map(|_| next()).collect();
            let mut au = vec![0.0; dim];
            let mut av = vec![0.0; dim];
            op.a.mul_vec(&u, &mut au);
            op.a.mul_vec(&v, &mut av);
            let lhs = dot_plain(&au, &v);
            let rhs = dot_plain(&av, &u);
            let scale: f64 = dot_plain(&u, &u).sqrt() * dot_plain(&v, &v).sqrt();
            assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1.0) * lhs.abs().max(1e3));
        }
    }

    #[test]
    fn coupling_vanishes_when_components_equal() {
        // beta = 1, a0 = a2: the coupling contributes nothing relative to
        // the same form at beta = 0
        let p = profile(4.0, 256);
        let op1 = assemble_mode1(4.0, 1.0, &p, 96);
        let op0 = assemble_mode1(4.0, 0.0, &p, 96);
        let n = op1.n_cells;
        let v: Vec<f64> = (0..2 * n)
            .map(|j| {
                let r = op1.grid.nodes()[j / 2];
                r * r * (1.0 - r)
            })
            .collect();
        let q1 = op1.form(&v);
        let q0 = op0.form(&v);
        assert!((q1 - q0).abs() <= 1e-10 * q0.abs());
    }

    #[test]
    fn ground_pair_ordering_and_simplicity() {
        let p = profile(9.0, 512);
        let op = assemble_mode1(9.0, 0.5, &p, 192);
        let eigs = ground_eigenpair(&op, 2).unwrap();
        assert!(eigs[1].value > eigs[0].value + 1e-6, "ground not simple");
        let pair = mode1_pair(&op, &eigs[0].vector);
        for i in 0..pair.a0.len() {
            assert!(pair.a0[i] >= -1e-10, "a0 negative at {i}");
            assert!(pair.a2[i] >= -1e-8, "a2 negative at {i}");
            assert!(pair.a2[i] <= pair.a0[i] + 1e-8, "a2 > a0 at {i}");
        }
    }

    #[test]
    fn eigenvalue_independent_of_start_scaling() {
        let p = profile(4.0, 256);
        let op = assemble_mode1(4.0, 0.75, &p, 128);
        let e1 = ground_eigenpair(&op, 1).unwrap()[0].value;
        let e2 = ground_eigenpair_shifted(&op, 1, Some(e1)).unwrap()[0].value;
        assert!((e1 - e2).abs() <= 1e-8 * e1.abs().max(1.0));
    }

    #[test]
    fn beta_two_positive_and_small_lambda_positive() {
        let m = mu1_of_lambda(1.0, 0.5, 128).unwrap();
        assert!(m.eigenvalue_mu > 0.0);
        let m2 = mu1_of_lambda(100.0, 2.0, 128).unwrap();
        assert!(m2.eigenvalue_mu > 0.0);
    }

    #[test]
    fn mode0_imaginary_sector_positive() {
        let p = profile(1.0, 256);
        let op = assemble_mode_n(0, 1.0, 0.5, &p, Sector::Minus, 128);
        let e = ground_eigenpair(&op, 1).unwrap();
        assert!(e[0].value > 0.0, "m0-related quantity not positive");
    }

    #[test]
    fn qbreve_signs() {
        let finf = entire_profile(30.0f64, 1e-10, 3000).unwrap();
        let (f_half, c_half) = qbreve_infinity(0.5, &finf);
        assert!(f_half < 0.0 && c_half < 0.0);
        let (_, c_one) = qbreve_infinity(1.0, &finf);
        assert_eq!(c_one, 0.0);
        let (f_32, c_32) = qbreve_infinity(1.5, &finf);
        assert!(f_32 > 0.0 && c_32 > 0.0);
    }
}
