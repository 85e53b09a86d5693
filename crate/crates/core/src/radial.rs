//! The singular radial profile equation and its shooting solver.
//!
//! The degree-one profile solves
//!   -F'' - F'/r + F/r^2 = (1 - F^2) F,  F(0) = 0, F(R) = 1,
//! which is singular at the origin. Near r = 0 we run a Picard fixed point
//! for h = phi/r on |r| <= rho = min(1/2, 1/(2b)); past rho the equation is
//! regular and we step outward with an adaptive Dormand-Prince pair.

use crate::grid::RadialGrid;
use crate::real::Real;
use crate::Tolerances;

#[derive(Debug, Clone, thiserror::Error)]
pub enum RadialError {
    #[error("Picard iteration did not contract below tolerance after {0} steps")]
    PicardDiverged(usize),
    #[error("step size underflow near r = {0} (near blow-up)")]
    StepUnderflow(f64),
    #[error("shooting bracket [{0}, {1}] does not straddle the boundary value")]
    BracketFailure(f64, f64),
    #[error("profile solve did not converge: {0}")]
    NewtonFailure(String),
    #[error("solution blew up at r = {0}; no profile on the requested interval")]
    Blowup(f64),
}

/// Sampled radial solution with its shooting slope.
#[derive(Debug, Clone)]
pub struct RadialProfile<T: Real> {
    pub grid: RadialGrid<T>,
    pub values: Vec<T>,
    pub slope_b: T,
    pub domain_radius: T,
}

impl<T: Real> RadialProfile<T> {
    /// Evaluate by local 4-point Lagrange interpolation on the sample grid.
    pub fn eval(&self, r: T) -> T {
        interp4(self.grid.nodes(), &self.values, r)
    }

    /// Centered-difference derivative samples (one-sided at the ends).
    pub fn derivative(&self) -> Vec<T> {
        let nodes = self.grid.nodes();
        let v = &self.values;
        let n = v.len();
        let mut d = vec![T::zero(); n];
        for i in 0..n {
            if i == 0 {
                d[i] = self.slope_b;
            } else if i + 1 == n {
                d[i] = (v[i] - v[i - 1]) / (nodes[i] - nodes[i - 1]);
            } else {
                // three-point formula valid on nonuniform grids
                let (h0, h1) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
                d[i] = (v[i + 1] * h0 * h0 - v[i - 1] * h1 * h1
                    + v[i] * (h1 * h1 - h0 * h0))
                    / (h0 * h1 * (h0 + h1));
            }
        }
        d
    }
}

/// Result of a shooting solve of the boundary-value problem on [0, R].
#[derive(Debug, Clone)]
pub struct ShootingResult<T: Real> {
    pub profile: RadialProfile<T>,
    pub b_of_r: T,
    pub residual: T,
    pub blowup_radius: Option<T>,
}

/// Samples of the Cauchy solution phi(., b), with derivative values.
#[derive(Debug, Clone)]
pub struct CauchySample<T: Real> {
    pub nodes: Vec<T>,
    pub phi: Vec<T>,
    pub dphi: Vec<T>,
    pub blowup_radius: Option<T>,
}

const BLOWUP_THRESHOLD: f64 = 1e3;
const PICARD_MAX_ITER: usize = 60;
const PICARD_SUBGRID: usize = 1024;

/// Picard stage for h = phi/r on [0, rho]. Returns (subgrid, h values,
/// sup-distance per iteration) so callers can inspect the contraction.
pub fn picard_stage<T: Real>(b: T, rho: T, m: usize) -> Result<(Vec<T>, Vec<T>, Vec<T>), RadialError> {
    let h_step = rho / T::of_usize(m);
    let s: Vec<T> = (0..=m).map(|j| h_step * T::of_usize(j)).collect();
    let mut h = vec![b; m + 1];
    let mut diffs = Vec::new();
    let tol = T::of(1e-15) * (T::one() + b.abs());
    for _ in 0..PICARD_MAX_ITER {
        // g = (1 - s^2 h^2) h
        let g: Vec<T> = s
            .iter()
            .zip(&h)
            .map(|(&si, &hi)| (T::one() - si * si * hi * hi) * hi)
            .collect();
        let g1: Vec<T> = s.iter().zip(&g).map(|(&si, &gi)| si * gi).collect();
        let g3: Vec<T> = s
            .iter()
            .zip(&g)
            .map(|(&si, &gi)| si * si * si * gi)
            .collect();
        let i1 = cumulative(&g1, h_step);
        let i3 = cumulative(&g3, h_step);
        let mut sup = T::zero();
        let half = T::of(0.5);
        for j in 0..=m {
            let new = if j == 0 {
                b
            } else {
                b + i3[j] / (T::of(2.0) * s[j] * s[j]) - half * i1[j]
            };
            sup = sup.max((new - h[j]).abs());
            h[j] = new;
        }
        diffs.push(sup);
        if sup < tol {
            return Ok((s, h, diffs));
        }
    }
    Err(RadialError::PicardDiverged(PICARD_MAX_ITER))
}

/// Linear Picard stage for k = (d phi/d b)/r on [0, rho], given phi samples
/// on the same subgrid.
fn picard_stage_db<T: Real>(
    s: &[T],
    phi_over_r: &[T],
    h_step: T,
) -> Result<Vec<T>, RadialError> {
    let m = s.len() - 1;
    let mut k = vec![T::one(); m + 1];
    let coeff: Vec<T> = s
        .iter()
        .zip(phi_over_r)
        .map(|(&si, &hi)| {
            let phi = si * hi;
            T::one() - T::of(3.0) * phi * phi
        })
        .collect();
    let tol = T::of(1e-15);
    let half = T::of(0.5);
    for _ in 0..PICARD_MAX_ITER {
        let g1: Vec<T> = (0..=m).map(|j| s[j] * coeff[j] * k[j]).collect();
        let g3: Vec<T> = (0..=m)
            .map(|j| s[j] * s[j] * s[j] * coeff[j] * k[j])
            .collect();
        let i1 = cumulative(&g1, h_step);
        let i3 = cumulative(&g3, h_step);
        let mut sup = T::zero();
        for j in 0..=m {
            let new = if j == 0 {
                T::one()
            } else {
                T::one() + i3[j] / (T::of(2.0) * s[j] * s[j]) - half * i1[j]
            };
            sup = sup.max((new - k[j]).abs());
            k[j] = new;
        }
        if sup < tol {
            return Ok(k);
        }
    }
    Err(RadialError::PicardDiverged(PICARD_MAX_ITER))
}

/// Cumulative integral of uniformly sampled g with a three-point rule.
fn cumulative<T: Real>(g: &[T], h: T) -> Vec<T> {
    let n = g.len();
    let mut out = vec![T::zero(); n];
    if n < 3 {
        for i in 1..n {
            out[i] = out[i - 1] + h * (g[i - 1] + g[i]) * T::of(0.5);
        }
        return out;
    }
    let c = h / T::of(12.0);
    out[1] = c * (T::of(5.0) * g[0] + T::of(8.0) * g[1] - g[2]);
    for i in 1..n - 1 {
        out[i + 1] = out[i] + c * (-g[i - 1] + T::of(8.0) * g[i] + T::of(5.0) * g[i + 1]);
    }
    out
}

fn rho_for<T: Real>(b: T) -> T {
    let half = T::of(0.5);
    if b.abs() <= T::one() {
        half
    } else {
        half / b.abs()
    }
}

/// Right-hand side of the first-order system for (phi, phi') with optional
/// variational pair (h, h').
fn rhs<T: Real>(r: T, y: &[T; 4], with_var: bool) -> [T; 4] {
    let (phi, dphi) = (y[0], y[1]);
    let inv_r = T::one() / r;
    let ddphi = -dphi * inv_r + phi * inv_r * inv_r - (T::one() - phi * phi) * phi;
    let mut out = [dphi, ddphi, T::zero(), T::zero()];
    if with_var {
        let (hv, dhv) = (y[2], y[3]);
        out[2] = dhv;
        out[3] = -dhv * inv_r + hv * inv_r * inv_r
            - (T::one() - T::of(3.0) * phi * phi) * hv;
    }
    out
}

/// Adaptive Dormand-Prince 5(4) step from r0 to r1. Returns Err on blow-up
/// (with the radius reached) or step underflow.
fn integrate_to<T: Real>(
    mut r: T,
    mut y: [T; 4],
    r1: T,
    tol: T,
    with_var: bool,
) -> Result<[T; 4], (T, RadialError)> {
    let mut h = ((r1 - r) * T::of(0.05)).min(T::of(0.05));
    let hmin = (r1 - r) * T::of(1e-14) + T::of(1e-300);
    let blow = T::of(BLOWUP_THRESHOLD);
    let safety = T::of(0.9);
    // Dormand-Prince coefficients
    let a21 = T::of(1.0 / 5.0);
    let (a31, a32) = (T::of(3.0 / 40.0), T::of(9.0 / 40.0));
    let (a41, a42, a43) = (T::of(44.0 / 45.0), T::of(-56.0 / 15.0), T::of(32.0 / 9.0));
    let (a51, a52, a53, a54) = (
        T::of(19372.0 / 6561.0),
        T::of(-25360.0 / 2187.0),
        T::of(64448.0 / 6561.0),
        T::of(-212.0 / 729.0),
    );
    let (a61, a62, a63, a64, a65) = (
        T::of(9017.0 / 3168.0),
        T::of(-355.0 / 33.0),
        T::of(46732.0 / 5247.0),
        T::of(49.0 / 176.0),
        T::of(-5103.0 / 18656.0),
    );
    let (b1, b3, b4, b5, b6) = (
        T::of(35.0 / 384.0),
        T::of(500.0 / 1113.0),
        T::of(125.0 / 192.0),
        T::of(-2187.0 / 6784.0),
        T::of(11.0 / 84.0),
    );
    let (e1, e3, e4, e5, e6, e7) = (
        T::of(71.0 / 57600.0),
        T::of(-71.0 / 16695.0),
        T::of(71.0 / 1920.0),
        T::of(-17253.0 / 339200.0),
        T::of(22.0 / 525.0),
        T::of(-1.0 / 40.0),
    );
    let (c2, c3, c4, c5) = (
        T::of(0.2),
        T::of(0.3),
        T::of(0.8),
        T::of(8.0 / 9.0),
    );
    let mut steps = 0usize;
    while r < r1 {
        steps += 1;
        if steps > 1_000_000 {
            return Err((r, RadialError::StepUnderflow(r.as_f64())));
        }
        if h < hmin {
            return Err((r, RadialError::StepUnderflow(r.as_f64())));
        }
        let hs = h.min(r1 - r);
        let k1 = rhs(r, &y, with_var);
        let yt = add4(&y, &[(hs * a21, &k1)]);
        let k2 = rhs(r + c2 * hs, &yt, with_var);
        let yt = add4(&y, &[(hs * a31, &k1), (hs * a32, &k2)]);
        let k3 = rhs(r + c3 * hs, &yt, with_var);
        let yt = add4(&y, &[(hs * a41, &k1), (hs * a42, &k2), (hs * a43, &k3)]);
        let k4 = rhs(r + c4 * hs, &yt, with_var);
        let yt = add4(
            &y,
            &[(hs * a51, &k1), (hs * a52, &k2), (hs * a53, &k3), (hs * a54, &k4)],
        );
        let k5 = rhs(r + c5 * hs, &yt, with_var);
        let yt = add4(
            &y,
            &[
                (hs * a61, &k1),
                (hs * a62, &k2),
                (hs * a63, &k3),
                (hs * a64, &k4),
                (hs * a65, &k5),
            ],
        );
        let k6 = rhs(r + hs, &yt, with_var);
        let y5 = add4(
            &y,
            &[
                (hs * b1, &k1),
                (hs * b3, &k3),
                (hs * b4, &k4),
                (hs * b5, &k5),
                (hs * b6, &k6),
            ],
        );
        let k7 = rhs(r + hs, &y5, with_var);
        let err_v = add4(
            &[T::zero(); 4],
            &[
                (hs * e1, &k1),
                (hs * e3, &k3),
                (hs * e4, &k4),
                (hs * e5, &k5),
                (hs * e6, &k6),
                (hs * e7, &k7),
            ],
        );
        let scale = T::one() + y[0].abs().max(y[1].abs());
        let err = err_v
            .iter()
            .fold(T::zero(), |m, &e| m.max(e.abs()))
            / scale;
        if err <= tol {
            r = r + hs;
            y = y5;
            if y[0].abs() > blow {
                return Err((r, RadialError::Blowup(r.as_f64())));
            }
        }
        let factor = if err > T::zero() {
            safety * (tol / err).powf(T::of(0.2))
        } else {
            T::of(5.0)
        };
        h = hs * factor.max(T::of(0.2)).min(T::of(5.0));
    }
    Ok(y)
}

fn add4<T: Real>(y: &[T; 4], terms: &[(T, &[T; 4])]) -> [T; 4] {
    let mut out = *y;
    for &(c, k) in terms {
        for i in 0..4 {
            out[i] = out[i] + c * k[i];
        }
    }
    out
}

/// Integrate the Cauchy problem for slope b, sampling phi on `nodes`
/// (strictly increasing, nodes[0] = 0).
fn integrate_on_nodes<T: Real>(
    b: T,
    nodes: &[T],
    tol: T,
) -> Result<CauchySample<T>, RadialError> {
    let r_max = *nodes.last().unwrap();
    if b == T::zero() {
        return Ok(CauchySample {
            nodes: nodes.to_vec(),
            phi: vec![T::zero(); nodes.len()],
            dphi: vec![T::zero(); nodes.len()],
            blowup_radius: None,
        });
    }
    let rho = rho_for(b).min(r_max * T::of(0.5));
    let (s, hvals, _) = picard_stage(b, rho, PICARD_SUBGRID)?;
    let h_step = s[1];
    let dh_subgrid = |j: usize| -> T {
        if j == 0 {
            T::zero()
        } else if j + 1 < hvals.len() {
            (hvals[j + 1] - hvals[j - 1]) / (T::of(2.0) * h_step)
        } else {
            (hvals[j] - hvals[j - 1]) / h_step
        }
    };
    let mut out_phi = Vec::with_capacity(nodes.len());
    let mut out_dphi = Vec::with_capacity(nodes.len());
    let mut blowup = None;
    let mut i_node = 0;
    // values inside the Picard interval come from the fixed point
    while i_node < nodes.len() && nodes[i_node] <= rho {
        let r = nodes[i_node];
        let j = ((r / h_step).as_f64().round() as usize).min(s.len() - 1);
        let hr = interp4(&s, &hvals, r);
        out_phi.push(r * hr);
        out_dphi.push(hr + r * dh_subgrid(j));
        i_node += 1;
    }
    // state at rho, then step outward node to node
    let j = s.len() - 1;
    let mut y = [
        s[j] * hvals[j],
        hvals[j] + s[j] * dh_subgrid(j),
        T::zero(),
        T::zero(),
    ];
    let mut r_cur = rho;
    for i in i_node..nodes.len() {
        match integrate_to(r_cur, y, nodes[i], tol, false) {
            Ok(ynew) => {
                y = ynew;
                r_cur = nodes[i];
                out_phi.push(y[0]);
                out_dphi.push(y[1]);
            }
            Err((r_stop, RadialError::Blowup(_)))
            | Err((r_stop, RadialError::StepUnderflow(_))) => {
                blowup = Some(r_stop);
                break;
            }
            Err((_, e)) => return Err(e),
        }
    }
    let n_ok = out_phi.len();
    Ok(CauchySample {
        nodes: nodes[..n_ok].to_vec(),
        phi: out_phi,
        dphi: out_dphi,
        blowup_radius: blowup,
    })
}

fn interp4<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    debug_assert!(n >= 2);
    // locate the cell by binary search
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let start = lo.saturating_sub(1).min(n.saturating_sub(4));
    let k = (n - start).min(4);
    let xs = &xs[start..start + k];
    let ys = &ys[start..start + k];
    let mut acc = T::zero();
    for j in 0..k {
        let mut l = T::one();
        for i in 0..k {
            if i != j {
                l = l * (x - xs[i]) / (xs[j] - xs[i]);
            }
        }
        acc = acc + l * ys[j];
    }
    acc
}

/// Samples of phi(., b) on a uniform grid of n cells over [0, min(r_max, R_b)).
pub fn solve_cauchy<T: Real>(
    b: T,
    r_max: T,
    tol: T,
    n: usize,
) -> Result<CauchySample<T>, RadialError> {
    assert!(b >= T::zero() && r_max > T::zero() && tol > T::zero());
    let h = r_max / T::of_usize(n);
    let nodes: Vec<T> = (0..=n).map(|i| h * T::of_usize(i)).collect();
    integrate_on_nodes(b, &nodes, tol)
}

/// Samples of h(r) = d phi / d b on the same uniform grid as solve_cauchy.
pub fn derivative_in_b<T: Real>(
    b: T,
    r_max: T,
    tol: T,
    n: usize,
) -> Result<(Vec<T>, Vec<T>), RadialError> {
    let h = r_max / T::of_usize(n);
    let nodes: Vec<T> = (0..=n).map(|i| h * T::of_usize(i)).collect();
    let s = integrate_with_variation(b, &nodes, tol)?;
    if s.blowup_radius.is_some() {
        return Err(RadialError::Blowup(
            s.blowup_radius.unwrap().as_f64(),
        ));
    }
    Ok((s.nodes, s.var))
}

struct VarSample<T: Real> {
    nodes: Vec<T>,
    var: Vec<T>,
    blowup_radius: Option<T>,
}

fn integrate_with_variation<T: Real>(
    b: T,
    nodes: &[T],
    tol: T,
) -> Result<VarSample<T>, RadialError> {
    // replicate integrate_on_nodes but keep the variational component
    let r_max = *nodes.last().unwrap();
    let rho = rho_for(b).min(r_max * T::of(0.5));
    let (s, hvals, _) = picard_stage(b, rho, PICARD_SUBGRID)?;
    let kvals = picard_stage_db(&s, &hvals, s[1])?;
    let h_step = s[1];
    let deriv_at_end = |vals: &[T]| -> T {
        let j = vals.len() - 1;
        (vals[j] - vals[j - 1]) / h_step
    };
    let mut out_phi = Vec::new();
    let mut out_var = Vec::new();
    let mut blowup = None;
    let mut i_node = 0;
    while i_node < nodes.len() && nodes[i_node] <= rho {
        let r = nodes[i_node];
        out_phi.push(r * interp4(&s, &hvals, r));
        out_var.push(r * interp4(&s, &kvals, r));
        i_node += 1;
    }
    let rho_idx = s.len() - 1;
    let y = [
        s[rho_idx] * hvals[rho_idx],
        hvals[rho_idx] + s[rho_idx] * deriv_at_end(&hvals),
        s[rho_idx] * kvals[rho_idx],
        kvals[rho_idx] + s[rho_idx] * deriv_at_end(&kvals),
    ];
    let mut y = y;
    let mut r_cur = rho;
    for i in i_node..nodes.len() {
        match integrate_to(r_cur, y, nodes[i], tol, true) {
            Ok(ynew) => {
                y = ynew;
                r_cur = nodes[i];
                out_phi.push(y[0]);
                out_var.push(y[2]);
            }
            Err((r_stop, RadialError::Blowup(_)))
            | Err((r_stop, RadialError::StepUnderflow(_))) => {
                blowup = Some(r_stop);
                break;
            }
            Err((_, e)) => return Err(e),
        }
    }
    let n_ok = out_phi.len();
    let _ = out_phi;
    Ok(VarSample {
        nodes: nodes[..n_ok].to_vec(),
        var: out_var,
        blowup_radius: blowup,
    })
}

/// Largest R for which single shooting stays well-conditioned in f64;
/// the sensitivity of phi(R, b) to b grows like exp(sqrt(2) R).
const SHOOTING_R_MAX: f64 = 10.0;

/// Shooting solve of the boundary-value problem F(0)=0, F(R)=1 on [0, R].
pub fn solve_bvp<T: Real>(r: T, tol: T, n: usize) -> Result<ShootingResult<T>, RadialError> {
    assert!(r > T::zero());
    if r.as_f64() > SHOOTING_R_MAX {
        return collocation_bvp(r, T::one() /* plain Dirichlet */, tol, n);
    }
    let ode_tol = T::of(Tolerances::default().ode_local_error).min(tol);
    let mut lo = T::of(1e-6);
    let mut hi = T::of(2.0);
    // shoot on the same node layout as the returned profile so the reported
    // residual is the quantity the bisection actually drove to zero
    let h = r / T::of_usize(n);
    let nodes: Vec<T> = (0..=n).map(|i| h * T::of_usize(i)).collect();
    let f = |b: T| match integrate_on_nodes(b, &nodes, ode_tol) {
        Ok(s) if s.blowup_radius.is_none() && s.phi.len() == n + 1 => {
            *s.phi.last().unwrap() - T::one()
        }
        _ => T::infinity(),
    };
    let mut flo = f(lo);
    if !(flo < T::zero()) {
        lo = T::of(1e-12);
        flo = f(lo);
    }
    // small R needs b ~ 1/R: grow the top of the bracket until phi(R) > 1
    let mut fhi = f(hi);
    while !(fhi > T::zero()) && hi.as_f64() < 1e6 {
        hi = hi * T::of(2.0);
        fhi = f(hi);
    }
    if !(flo < T::zero() && fhi > T::zero()) {
        return Err(RadialError::BracketFailure(lo.as_f64(), hi.as_f64()));
    }
    let mut b = (lo + hi) * T::of(0.5);
    let mut fb = f(b);
    for _ in 0..200 {
        if fb.is_finite() && fb.abs() <= tol {
            break;
        }
        if fb > T::zero() {
            hi = b;
        } else {
            lo = b;
        }
        if (hi - lo) <= T::epsilon() * b.abs() {
            break;
        }
        b = (lo + hi) * T::of(0.5);
        fb = f(b);
    }
    let sample = solve_cauchy(b, r, ode_tol, n)?;
    let residual = (sample.phi.last().copied().unwrap_or(T::infinity()) - T::one()).abs();
    let blowup = sample.blowup_radius;
    let grid = RadialGrid::from_nodes(sample.nodes.clone());
    let profile = RadialProfile {
        grid,
        values: sample.phi,
        slope_b: b,
        domain_radius: r,
    };
    Ok(ShootingResult {
        profile,
        b_of_r: b,
        residual,
        blowup_radius: blowup,
    })
}

/// Damped-Newton collocation on a uniform grid: used where single shooting
/// is ill-conditioned (large R) and for the entire-plane profile.
fn collocation_bvp<T: Real>(
    r_max: T,
    boundary_value: T,
    tol: T,
    n: usize,
) -> Result<ShootingResult<T>, RadialError> {
    use crate::linalg::Banded;
    let n = n.max(256);
    let h = r_max / T::of_usize(n);
    let nodes: Vec<T> = (0..=n).map(|i| h * T::of_usize(i)).collect();
    // initial guess: r / sqrt(r^2 + 2), rescaled to hit the boundary value
    let mut f: Vec<T> = nodes
        .iter()
        .map(|&ri| ri / (ri * ri + T::of(2.0)).sqrt())
        .collect();
    let scale_bc = boundary_value / *f.last().unwrap();
    for v in f.iter_mut() {
        *v = *v * scale_bc;
    }
    f[0] = T::zero();
    *f.last_mut().unwrap() = boundary_value;
    let m = n - 1; // interior unknowns
    let residual = |f: &[T]| -> Vec<T> {
        let mut res = vec![T::zero(); m];
        for i in 1..n {
            let ri = nodes[i];
            let lap = (f[i + 1] - T::of(2.0) * f[i] + f[i - 1]) / (h * h)
                + (f[i + 1] - f[i - 1]) / (T::of(2.0) * h * ri);
            res[i - 1] = -lap + f[i] / (ri * ri) - (T::one() - f[i] * f[i]) * f[i];
        }
        res
    };
    let mut res = residual(&f);
    let mut rnorm = res.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    for _iter in 0..80 {
        if rnorm <= tol.max(T::of(1e-13)) {
            break;
        }
        let mut jac = Banded::<T>::zeros(m, 1, 1);
        for i in 1..n {
            let ri = nodes[i];
            let row = i - 1;
            jac.set(
                row,
                row,
                T::of(2.0) / (h * h) + T::one() / (ri * ri)
                    - (T::one() - T::of(3.0) * f[i] * f[i]),
            );
            if row > 0 {
                jac.set(row, row - 1, -T::one() / (h * h) + T::one() / (T::of(2.0) * h * ri));
            }
            if row + 1 < m {
                jac.set(row, row + 1, -T::one() / (h * h) - T::one() / (T::of(2.0) * h * ri));
            }
        }
        let lu = jac
            .factor()
            .map_err(|e| RadialError::NewtonFailure(e.to_string()))?;
        let mut step: Vec<T> = res.clone();
        lu.solve(&mut step);
        let mut damping = T::one();
        loop {
            let mut trial = f.clone();
            for i in 1..n {
                trial[i] = f[i] - damping * step[i - 1];
            }
            let tres = residual(&trial);
            let tnorm = tres.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
            if tnorm < rnorm || damping < T::of(1e-4) {
                f = trial;
                res = tres;
                rnorm = tnorm;
                break;
            }
            damping = damping * T::of(0.5);
        }
    }
    if rnorm > T::of(1e-8).max(tol) {
        return Err(RadialError::NewtonFailure(format!(
            "collocation residual {rnorm:e} above tolerance"
        )));
    }
    // slope by Richardson from the first two nodes (F/r = b + c r^2 + ...)
    let b = (T::of(4.0) * f[1] / nodes[1] - f[2] / nodes[2]) / T::of(3.0);
    let grid = RadialGrid::from_nodes(nodes);
    let profile = RadialProfile {
        grid,
        values: f,
        slope_b: b,
        domain_radius: r_max,
    };
    Ok(ShootingResult {
        profile,
        b_of_r: b,
        residual: rnorm,
        blowup_radius: None,
    })
}

/// Profile f_lambda on [0, 1]: f_lambda(r) = F(sqrt(lambda) r, sqrt(lambda)).
pub fn profile_f_lambda<T: Real>(lambda: T, tol: T, n: usize) -> Result<RadialProfile<T>, RadialError> {
    assert!(lambda > T::zero());
    let big_r = lambda.sqrt();
    let sol = solve_bvp(big_r, tol, n)?;
    let h = T::one() / T::of_usize(n);
    let nodes: Vec<T> = (0..=n).map(|i| h * T::of_usize(i)).collect();
    let mut values: Vec<T> = nodes.iter().map(|&r| sol.profile.eval(big_r * r)).collect();
    values[0] = T::zero();
    values[n] = T::one();
    Ok(RadialProfile {
        grid: RadialGrid::from_nodes(nodes),
        values,
        slope_b: sol.b_of_r * big_r,
        domain_radius: T::one(),
    })
}

/// Truncated entire-plane profile: boundary value sqrt(1 - 1/r_max^2),
/// the leading far-field balance of the equation.
pub fn entire_profile<T: Real>(r_max: T, tol: T, n: usize) -> Result<RadialProfile<T>, RadialError> {
    assert!(r_max >= T::of(20.0));
    let bc = (T::one() - T::one() / (r_max * r_max)).sqrt();
    let sol = collocation_bvp(r_max, bc, tol, n)?;
    Ok(sol.profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_slope_is_zero_solution() {
        let s = solve_cauchy(0.0f64, 3.0, 1e-10, 64).unwrap();
        assert!(s.phi.iter().all(|&v| v == 0.0));
        assert!(s.blowup_radius.is_none());
    }

    #[test]
    fn slope_recovered_near_origin() {
        for &b in &[0.3f64, 0.7, 1.9] {
            let s = solve_cauchy(b, 2.0, 1e-10, 512).unwrap();
            for i in 1..=3 {
                let ratio = s.phi[i] / s.nodes[i];
                assert!(
                    (ratio - b).abs() < 1e-4 + 0.1 * s.nodes[i] * s.nodes[i],
                    "b={b} node {i} ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn picard_contracts_by_quarter() {
        let (_, _, diffs) = picard_stage(0.8f64, 0.5, 512).unwrap();
        for w in diffs.windows(2) {
            if w[0] > 1e-13 {
                assert!(w[1] <= w[0] * 0.2501, "contraction violated: {:?}", w);
            }
        }
    }

    #[test]
    fn large_slope_blows_up() {
        let s = solve_cauchy(2.0f64, 12.0, 1e-9, 256).unwrap();
        assert!(s.blowup_radius.is_some());
    }

    #[test]
    fn bvp_r1_profile_properties() {
        let sol = solve_bvp(1.0f64, 1e-10, 256).unwrap();
        assert!(sol.residual <= 1e-10);
        let f = &sol.profile.values;
        let nodes = sol.profile.grid.nodes();
        for i in 1..f.len() - 1 {
            assert!(f[i] > 0.0 && f[i] < 1.0, "0<F<1 violated at node {i}");
            assert!(f[i + 1] >= f[i] - 1e-12, "monotonicity violated");
            let ratio_here = f[i] / nodes[i];
            let ratio_next = f[i + 1] / nodes[i + 1];
            assert!(ratio_next < ratio_here + 1e-12, "(F/r)' < 0 violated");
        }
    }

    #[test]
    fn b_decreasing_in_r() {
        let b1 = solve_bvp(1.0f64, 1e-10, 128).unwrap().b_of_r;
        let b2 = solve_bvp(2.0f64, 1e-10, 128).unwrap().b_of_r;
        let b4 = solve_bvp(4.0f64, 1e-10, 128).unwrap().b_of_r;
        assert!(b4 < b2 && b2 < b1, "b1={b1} b2={b2} b4={b4}");
    }

    #[test]
    fn derivative_in_b_positive_at_shooting_slope() {
        let sol = solve_bvp(1.0f64, 1e-10, 128).unwrap();
        let (nodes, h) = derivative_in_b(sol.b_of_r, 1.0, 1e-10, 128).unwrap();
        for i in 1..nodes.len() {
            assert!(h[i] / nodes[i] > 0.0, "h/r <= 0 at r={}", nodes[i]);
        }
        // h'(0) = 1
        assert!((h[1] / nodes[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn f_lambda_scaling() {
        let p1 = profile_f_lambda(1.0f64, 1e-10, 128).unwrap();
        let direct = solve_bvp(1.0f64, 1e-10, 128).unwrap();
        for (a, b) in p1.values.iter().zip(&direct.profile.values) {
            assert!((a - b).abs() < 1e-9);
        }
        let p4 = profile_f_lambda(4.0f64, 1e-10, 128).unwrap();
        assert_eq!(p4.values[0], 0.0);
        assert_eq!(*p4.values.last().unwrap(), 1.0);
        for (a, b) in p4.values.iter().zip(&p1.values) {
            assert!(a >= &(b - 1e-9), "f4 >= f1 pointwise violated");
        }
    }

    #[test]
    fn entire_profile_slope_matches_known_value() {
        // the degree-one Ginzburg-Landau profile has F'(0) ~ 0.58278
        let p = entire_profile(20.0f64, 1e-10, 2000).unwrap();
        assert!((p.slope_b - 0.5828).abs() < 5e-3, "slope {}", p.slope_b);
        for w in p.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }
}
