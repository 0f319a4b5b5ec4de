//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Euclidean projection onto `{x : ||x||_1 <= radius}` (sort-based, O(p log p)).
pub fn project_l1_ball(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    if l1_norm(v) <= radius {
        return v.clone();
    }
    if radius <= 0.0 {
        return DVector::zeros(v.len());
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - radius) / (k as f64 + 1.0);
        if m > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    v.map(|x| x.signum() * (x.abs() - theta).max(0.0))
}

/// Symmetric eigen-decomposition with eigenvalues sorted ascending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Global minimizer of `x'Ax + 2c'x` over the unit sphere `||x||_2 = 1`, for symmetric `A`.
///
/// Uses the eigenbasis of `A` and bisection on the Lagrange multiplier, including
/// the hard case where `c` is orthogonal to the bottom eigenspace.
pub fn sphere_quadratic_min(a: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let (lam, q) = sorted_eigen(a);
    let c_hat = q.transpose() * c;
    let c_norm = c.norm();
    let lam_min = lam[0];
    let spread = (lam[n - 1] - lam_min).abs().max(1.0);
    let gap_tol = 1e-12 * spread;

    let bottom: Vec<usize> = (0..n).filter(|&i| lam[i] - lam_min <= gap_tol).collect();
    let bottom_weight: f64 = bottom.iter().map(|&i| c_hat[i] * c_hat[i]).sum::<f64>().sqrt();

    let norm_at = |mu: f64, skip_bottom: bool| -> f64 {
        (0..n)
            .filter(|i| !(skip_bottom && bottom.contains(i)))
            .map(|i| {
                let d = lam[i] - mu;
                (c_hat[i] / d).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let x_at = |mu: f64, skip_bottom: bool| -> DVector<f64> {
        let mut y = DVector::zeros(n);
        for i in 0..n {
            if skip_bottom && bottom.contains(&i) {
                continue;
            }
            y[i] = -c_hat[i] / (lam[i] - mu);
        }
        y
    };

    if c_norm == 0.0 {
        return q.column(0).into_owned();
    }

    let hard = bottom_weight <= 1e-14 * c_norm && {
        // norm of the particular solution at mu = lam_min with bottom removed
        let nb = if bottom.len() == n { 0.0 } else { norm_at(lam_min, true) };
        nb < 1.0
    };
    let y = if hard {
        let mut y = x_at(lam_min, true);
        let rest = y.norm_squared();
        y[bottom[0]] = (1.0 - rest).max(0.0).sqrt();
        y
    } else {
        // ||x(mu)|| is increasing on (-inf, lam_min); bracket the unit crossing.
        let mut lo = lam_min - c_norm - 1.0;
        let mut hi = lam_min;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid >= hi || mid <= lo {
                break;
            }
            if norm_at(mid, false) > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // lo stays strictly below lam_min, so x(lo) is finite
        let mut y = x_at(lo, false);
        let nrm = y.norm();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return q.column(0).into_owned();
        }
        y /= nrm;
        y
    };
    q * y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_projection_lands_on_sphere() {
        let v = DVector::from_vec(vec![3.0, -1.0, 0.5]);
        let p = project_l1_ball(&v, 2.0);
        assert!((l1_norm(&p) - 2.0).abs() < 1e-12);
        assert!((p[0] - 2.0).abs() < 1e-12 && p[1] == 0.0);
        let inside = DVector::from_vec(vec![0.1, 0.2]);
        assert_eq!(project_l1_ball(&inside, 1.0), inside);
    }

    #[test]
    fn sphere_min_matches_brute_force_in_2d() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let c = DVector::from_vec(vec![0.4, -0.7]);
        let x = sphere_quadratic_min(&a, &c);
        let f = |x: &DVector<f64>| (x.transpose() * &a * x)[0] + 2.0 * c.dot(x);
        let mut best = f64::INFINITY;
        for k in 0..200_000 {
            let t = k as f64 / 200_000.0 * std::f64::consts::TAU;
            let y = DVector::from_vec(vec![t.cos(), t.sin()]);
            best = best.min(f(&y));
        }
        assert!((x.norm() - 1.0).abs() < 1e-10);
        assert!(f(&x) <= best + 1e-9);
    }

    #[test]
    fn sphere_min_hard_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let c = DVector::from_vec(vec![0.0, 0.5]);
        let x = sphere_quadratic_min(&a, &c);
        // optimum: x2 = -c2/(3-1) = -0.25, x1 = sqrt(1-0.0625)
        assert!((x[1] + 0.25).abs() < 1e-9);
        assert!((x.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_min_isotropic_with_negligible_linear_term() {
        let a = DMatrix::identity(3, 3) / 3.0;
        let c = DVector::from_vec(vec![1e-35, -2e-35, 0.0]);
        let x = sphere_quadratic_min(&a, &c);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!((x.norm() - 1.0).abs() < 1e-12);
        assert!(x.dot(&c) <= 0.0);
    }
}
