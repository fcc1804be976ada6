//! Minimum-norm point of the convex hull of finitely many vectors
//! (Wolfe's algorithm).

use nalgebra::{DMatrix, DVector};

/// Minimum-norm point of `conv(points)` and its barycentric weights.
pub fn min_norm_point(points: &[DVector<f64>]) -> (DVector<f64>, Vec<f64>) {
    let m = points.len();
    assert!(m > 0, "min_norm_point needs at least one point");
    let n = points[0].len();
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    let first = (0..m).min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared())).unwrap();
    let mut support = vec![first];
    let mut lambda = vec![1.0];
    let mut x = points[first].clone();

    for _major in 0..(10 * m + 50) {
        let xx = x.norm_squared();
        let (j, xj) = (0..m)
            .map(|j| (j, x.dot(&points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        if xx - xj <= tol || support.contains(&j) {
            break;
        }
        support.push(j);
        lambda.push(0.0);

        for _minor in 0..(support.len() + 5) {
            let mu = affine_minimizer(points, &support, n);
            if mu.iter().all(|&u| u > 1e-14) {
                lambda = mu;
                break;
            }
            let mut theta = 1.0f64;
            for (l, u) in lambda.iter().zip(&mu) {
                if *u <= 1e-14 && l - u > 0.0 {
                    theta = theta.min(l / (l - u));
                }
            }
            for (l, u) in lambda.iter_mut().zip(&mu) {
                *l += theta * (u - *l);
            }
            let mut k = 0;
            while k < support.len() {
                if lambda[k] <= 1e-14 {
                    support.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
        }
        x = combine(points, &support, &lambda, n);
    }

    let mut weights = vec![0.0; m];
    for (&s, &l) in support.iter().zip(&lambda) {
        weights[s] = l;
    }
    (x, weights)
}

fn combine(points: &[DVector<f64>], support: &[usize], lambda: &[f64], n: usize) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for (&s, &l) in support.iter().zip(lambda) {
        x.axpy(l, &points[s], 1.0);
    }
    x
}

/// Weights of the minimum-norm point of the affine hull of the support.
fn affine_minimizer(points: &[DVector<f64>], support: &[usize], _n: usize) -> Vec<f64> {
    let k = support.len();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = points[support[i]].dot(&points[support[j]]);
        }
        a[(i, k)] = 1.0;
        a[(k, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k + 1);
    b[k] = 1.0;
    let sol = a.clone().lu().solve(&b).filter(|s| s.iter().all(|x| x.is_finite())).unwrap_or_else(|| {
        a.svd(true, true).solve(&b, 1e-12).unwrap_or_else(|_| {
            let mut s = DVector::zeros(k + 1);
            s.rows_mut(0, k).fill(1.0 / k as f64);
            s
        })
    });
    sol.rows(0, k).iter().copied().collect()
}
