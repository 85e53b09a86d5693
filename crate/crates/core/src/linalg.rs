//! Small dense/banded linear algebra used by the eigensolvers and Newton solvers.

use crate::real::Real;

/// General banded matrix with kl sub- and ku super-diagonals.
/// Row i stores columns [i - kl, i + kl + ku]; the extra kl upper
/// diagonals hold fill-in from partial pivoting.
#[derive(Debug, Clone)]
pub struct Banded<T: Real> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: Real> Banded<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * width],
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.kl < i || j > i + self.kl + self.ku {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = T::zero();
            for j in lo..=hi {
                acc = acc + self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
    }

    /// LU factorization with partial pivoting, in place.
    pub fn factor(mut self) -> Result<BandedLu<T>, SingularMatrix> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let imax = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=imax {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(SingularMatrix { row: k });
            }
            piv[k] = p;
            if p != k {
                let jmax = (k + kl + ku).min(n - 1);
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let pivot = self.get(k, k);
            let jmax = (k + kl + ku).min(n - 1);
            for i in k + 1..=imax {
                let m = self.get(i, k) / pivot;
                self.set(i, k, m);
                if m != T::zero() {
                    for j in k + 1..=jmax {
                        let v = self.get(i, j) - m * self.get(k, j);
                        self.set(i, j, v);
                    }
                }
            }
        }
        Ok(BandedLu { mat: self, piv })
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("singular matrix at row {row}")]
pub struct SingularMatrix {
    pub row: usize,
}

#[derive(Debug, Clone)]
pub struct BandedLu<T: Real> {
    mat: Banded<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    pub fn solve(&self, b: &mut [T]) {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let ku = self.mat.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let imax = (k + kl).min(n - 1);
            for i in k + 1..=imax {
                let m = self.mat.get(i, k);
                b[i] = b[i] - m * b[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kl + ku).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=jmax {
                acc = acc - self.mat.get(k, j) * b[j];
            }
            b[k] = acc / self.mat.get(k, k);
        }
    }
}

/// Solve a small dense symmetric system by Gaussian elimination with pivoting.
pub fn solve_dense<T: Real>(a: &mut [Vec<T>], b: &mut [T]) -> Result<(), SingularMatrix> {
    let n = b.len();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i][k].abs() > a[p][k].abs() {
                p = i;
            }
        }
        if a[p][k].abs() == T::zero() {
            return Err(SingularMatrix { row: k });
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] = a[i][j] - m * a[k][j];
            }
            b[i] = b[i] - m * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc = acc - a[k][j] * b[j];
        }
        b[k] = acc / a[k][k];
    }
    Ok(())
}

/// Least-squares fit of y ~ sum_j c_j basis_j(x) by normal equations.
/// Returns (coefficients, rms residual).
pub fn least_squares<T: Real>(xs: &[T], ys: &[T], basis: &[&dyn Fn(T) -> T]) -> (Vec<T>, T) {
    let m = basis.len();
    let mut a = vec![vec![T::zero(); m]; m];
    let mut b = vec![T::zero(); m];
    for (&x, &y) in xs.iter().zip(ys) {
        let phi: Vec<T> = basis.iter().map(|f| f(x)).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] = a[i][j] + phi[i] * phi[j];
            }
            b[i] = b[i] + phi[i] * y;
        }
    }
    solve_dense(&mut a, &mut b).expect("degenerate least-squares basis");
    let mut ss = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let fit: T = basis
            .iter()
            .zip(&b)
            .map(|(f, &c)| c * f(x))
            .sum();
        ss = ss + (y - fit) * (y - fit);
    }
    let rms = (ss / T::of_usize(xs.len())).sqrt();
    (b, rms)
}

/// Abstract symmetric linear operator with a (diagonal) weighted inner product.
pub trait SymOp<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
    /// Diagonal of the weight matrix defining the inner product <x, W y>.
    fn weight(&self) -> &[T];
    /// Diagonal preconditioner estimate (defaults to identity).
    fn precond_diag(&self) -> Option<&[T]> {
        None
    }
}

pub fn wdot<T: Real>(w: &[T], x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((&a, &b), &wi)| a * b * wi)
        .sum()
}

pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn scale<T: Real>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi = *xi * alpha;
    }
}

/// Restarted GMRES for a general square operator given as a closure.
/// Returns the achieved residual norm.
pub fn gmres<T: Real, F: Fn(&[T], &mut [T])>(
    op: F,
    b: &[T],
    x: &mut [T],
    tol: T,
    restart: usize,
    max_outer: usize,
) -> T {
    let n = b.len();
    let mut r = vec![T::zero(); n];
    let bnorm = dot(b, b).sqrt().max(T::min_positive_value());
    for _ in 0..max_outer {
        op(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = dot(&r, &r).sqrt();
        if beta <= tol * bnorm {
            return beta;
        }
        let m = restart;
        let mut v: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        let mut v0 = r.clone();
        scale(T::one() / beta, &mut v0);
        v.push(v0);
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = vec![T::zero(); n];
            op(&v[k], &mut w);
            for j in 0..=k {
                let hjk = dot(&w, &v[j]);
                h[j][k] = hjk;
                axpy(-hjk, &v[j], &mut w);
            }
            let hk1 = dot(&w, &w).sqrt();
            h[k + 1][k] = hk1;
            // apply existing Givens rotations
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom > T::zero() {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            } else {
                cs[k] = T::one();
                sn[k] = T::zero();
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol * bnorm || hk1 == T::zero() {
                break;
            }
            scale(T::one() / hk1, &mut w);
            v.push(w);
        }
        // back substitution
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc = acc - h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, &yj) in y.iter().enumerate() {
            axpy(yj, &v[j], x);
        }
        if g[k_used].abs() <= tol * bnorm {
            op(x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            return dot(&r, &r).sqrt();
        }
    }
    op(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    dot(&r, &r).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_lu_solves() {
        let n = 40;
        let mut a = Banded::<f64>::zeros(n, 2, 2);
        for i in 0..n {
            a.set(i, i, 4.0 + 0.1 * i as f64);
            if i + 1 < n {
                a.set(i, i + 1, -1.3);
                a.set(i + 1, i, -0.7);
            }
            if i + 2 < n {
                a.set(i, i + 2, 0.4);
                a.set(i + 2, i, 0.2);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x_true, &mut b);
        let lu = a.factor().unwrap();
        lu.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric() {
        let n = 30;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            5.0
                        } else if j == i + 1 {
                            -2.0
                        } else if i == j + 1 {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = (0..n).map(|j| a[i][j] * x[j]).sum();
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let res = gmres(apply, &b, &mut x, 1e-12, 20, 50);
        assert!(res < 1e-10);
    }

    #[test]
    fn quadratic_fit() {
        let xs = vec![-0.2, -0.1, 0.0, 0.1, 0.2];
        let ys: Vec<f64> = xs.iter().map(|t| 3.0 - 0.5 * t * t).collect();
        let one = |_t: f64| 1.0;
        let lin = |t: f64| t;
        let quad = |t: f64| t * t;
        let (c, rms) = least_squares(
            &xs,
            &ys,
            &[&one as &dyn Fn(f64) -> f64, &lin, &quad],
        );
        assert!((c[0] - 3.0).abs() < 1e-12);
        assert!(c[1].abs() < 1e-12);
        assert!((c[2] + 0.5).abs() < 1e-10);
        assert!(rms < 1e-12);
    }
}
