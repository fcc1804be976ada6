//! Deterministic point sets on the unit sphere S^{n-1}.

use nalgebra::DVector;
use std::f64::consts::PI;

/// `count` deterministic, well-spread unit vectors in ℝⁿ.
///
/// Equally spaced angles for n = 2, a Fibonacci lattice for n = 3, and an
/// additive-recurrence low-discrepancy sequence mapped through Box–Muller
/// for n ≥ 4.
pub fn sphere_seeds(n: usize, count: usize) -> Vec<DVector<f64>> {
    match n {
        0 => Vec::new(),
        1 => (0..count).map(|k| DVector::from_element(1, if k % 2 == 0 { 1.0 } else { -1.0 })).collect(),
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + 0.381_966) / count as f64;
                DVector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect(),
        3 => fibonacci_sphere(count),
        _ => rd_sphere(n, count),
    }
}

pub fn fibonacci_sphere(count: usize) -> Vec<DVector<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            DVector::from_column_slice(&[r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

fn rd_sphere(n: usize, count: usize) -> Vec<DVector<f64>> {
    // Generalised golden ratio for an m-dimensional additive recurrence.
    let m = n + n % 2;
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (m as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=m).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
    (0..count)
        .map(|k| {
            let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * (k as f64 + 1.0)).fract()).collect();
            let mut x = DVector::zeros(n);
            for j in 0..m / 2 {
                let u1 = u[2 * j].max(1e-12);
                let r = (-2.0 * u1.ln()).sqrt();
                let t = 2.0 * PI * u[2 * j + 1];
                if 2 * j < n {
                    x[2 * j] = r * t.cos();
                }
                if 2 * j + 1 < n {
                    x[2 * j + 1] = r * t.sin();
                }
            }
            let norm = x.norm();
            if norm > 1e-12 {
                x / norm
            } else {
                let mut e = DVector::zeros(n);
                e[0] = 1.0;
                e
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_unit_and_deterministic() {
        for n in 1..=6 {
            let a = sphere_seeds(n, 100);
            assert_eq!(a, sphere_seeds(n, 100));
            assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn seeds_cover_the_sphere() {
        for n in 2..=4 {
            let seeds = sphere_seeds(n, 512);
            // No axis direction is far from every seed.
            for k in 0..n {
                for sign in [1.0, -1.0] {
                    let mut e = DVector::zeros(n);
                    e[k] = sign;
                    let best = seeds.iter().map(|s| s.dot(&e)).fold(-1.0, f64::max);
                    assert!(best > 0.8, "n={n} axis {k} best={best}");
                }
            }
        }
    }
}
