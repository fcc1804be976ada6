//! Generalized conics: averaged (optionally profiled) distance functions to
//! a focal set, invariant convex bodies built from group orbits, their
//! Minkowski functionals, and a quadric-fit test against ellipsoids.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::group_model::{orbit, sample_group, GroupSample, GroupSpec, Orbit};
use crate::matrix_kernel::span_basis;
use crate::minnorm::min_norm_point;
use crate::orbit_optim::{solve_maximin, solve_minimax, SolverConfig};
use crate::structure::{gaussian_directions, hull_dimension, hull_samples};

/// Cap on the number of symmetrised hull points kept in a focal set.
const MAX_FOCAL_POINTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalKind {
    FinitePoints,
    HullOfOrbit,
}

/// Focal set with its measure, frozen at construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FocalSet {
    pub kind: FocalKind,
    #[serde(with = "crate::vecser::vectors")]
    pub points: Vec<DVector<f64>>,
    /// Point weights (finite case); the hull case uses equal weights.
    pub weights: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    /// Affine dimension of the hull (hull case).
    pub hull_dim: usize,
    /// Volume of the hull in its affine span (hull case, Monte Carlo).
    pub volume: f64,
    pub volume_std_error: f64,
}

impl FocalSet {
    /// Finite focal points; `weights` defaults to the counting measure.
    pub fn finite(points: Vec<DVector<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput)?;
        let n = first.len();
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; points.len()]);
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::BadParams("focal weights must be positive".into()));
        }
        Ok(Self {
            kind: FocalKind::FinitePoints,
            points,
            weights,
            mc_samples: 0,
            seed: 0,
            hull_dim: 0,
            volume: 1.0,
            volume_std_error: 0.0,
        })
    }

    /// Frozen Monte Carlo sample of `conv(orbit)`, symmetrised by the
    /// sampled group so that the focal multiset is invariant under it.
    pub fn hull_of_orbit(orbit: &Orbit, sample: &GroupSample, mc_samples: usize, seed: u64) -> Result<Self> {
        if orbit.is_empty() {
            return Err(Error::EmptyOrbit);
        }
        let hull_dim = hull_dimension(orbit);
        let g = sample.len().max(1);
        let bases = mc_samples.div_ceil(g).clamp(1, (MAX_FOCAL_POINTS / g).max(1));
        let base_points = hull_samples(orbit, bases, seed);
        let mut points = Vec::with_capacity(bases * g);
        for u in &base_points {
            for e in &sample.elements {
                points.push(e.apply(u));
            }
        }
        let (volume, volume_std_error) = hull_volume(orbit, hull_dim, seed)?;
        let weights = vec![1.0; points.len()];
        Ok(Self {
            kind: FocalKind::HullOfOrbit,
            points,
            weights,
            mc_samples,
            seed,
            hull_dim,
            volume,
            volume_std_error,
        })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// Monte Carlo volume of `conv(orbit)` inside its affine span: uniform
/// points in the bounding box of the projected orbit, tested for hull
/// membership with a minimum-norm-point solve.
fn hull_volume(orbit: &Orbit, hull_dim: usize, seed: u64) -> Result<(f64, f64)> {
    if hull_dim == 0 {
        return Ok((1.0, 0.0));
    }
    let n = orbit.dim();
    let mean = orbit.points.iter().fold(DVector::zeros(n), |a, p| a + p) / orbit.len() as f64;
    let centered: Vec<DVector<f64>> = orbit.points.iter().map(|p| p - &mean).collect();
    let basis = span_basis(&centered, 1e-8)?;
    let stride = orbit.len().div_ceil(2048);
    let coords: Vec<DVector<f64>> = centered
        .iter()
        .step_by(stride)
        .map(|c| DVector::from_iterator(hull_dim, basis.vectors.iter().map(|b| b.dot(c))))
        .collect();
    let mut lo = DVector::from_element(hull_dim, f64::INFINITY);
    let mut hi = DVector::from_element(hull_dim, f64::NEG_INFINITY);
    for c in &coords {
        for k in 0..hull_dim {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let box_vol: f64 = (0..hull_dim).map(|k| hi[k] - lo[k]).product();
    if !(box_vol > 0.0) {
        return Err(Error::DegenerateHull { dim: hull_dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b0d_7a11);
    let trials = 2000;
    let mut inside = 0usize;
    for _ in 0..trials {
        let x = DVector::from_fn(hull_dim, |k, _| rng.random_range(lo[k]..=hi[k]));
        let shifted: Vec<DVector<f64>> = coords.iter().map(|c| c - &x).collect();
        let (mn, _) = min_norm_point(&shifted);
        if mn.norm() <= 1e-9 {
            inside += 1;
        }
    }
    if inside == 0 {
        return Err(Error::DegenerateHull { dim: hull_dim });
    }
    let frac = inside as f64 / trials as f64;
    Ok((box_vol * frac, box_vol * (frac * (1.0 - frac) / trials as f64).sqrt()))
}

/// Distance profile `u` applied before averaging.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileFunction {
    Identity,
    /// `u(t) = t` for `t ≤ m`, `t + (t−m)·exp(−1/(t−m))` beyond.
    Smoothed { m: f64 },
}

impl ProfileFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Identity => t,
            Self::Smoothed { m } => {
                if t <= m {
                    t
                } else {
                    let s = t - m;
                    t + s * (-1.0 / s).exp()
                }
            }
        }
    }
}

/// The smoothed profile with threshold `m` (negative `m` is treated as 0).
pub fn smoothing_u(m: f64) -> ProfileFunction {
    ProfileFunction::Smoothed { m: m.max(0.0) }
}

/// `Σ wᵢ u(‖x − pᵢ‖)` for finite focal sets; for hull focal sets the mean of
/// `u(‖x − y‖)` over the frozen hull sample times the hull volume.
pub fn conic_value(focal: &FocalSet, profile: &ProfileFunction, x: &DVector<f64>) -> Result<f64> {
    if x.len() != focal.dim() {
        return Err(Error::DimensionMismatch { expected: focal.dim(), got: x.len() });
    }
    Ok(raw_value(focal, profile, x.as_slice()))
}

fn raw_value(focal: &FocalSet, profile: &ProfileFunction, x: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (p, w) in focal.points.iter().zip(&focal.weights) {
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        sum += w * profile.eval(d2.sqrt());
    }
    match focal.kind {
        FocalKind::FinitePoints => sum,
        FocalKind::HullOfOrbit => sum / focal.points.len() as f64 * focal.volume,
    }
}

/// Standard error of the hull-case Monte Carlo estimate at `x`
/// (zero for finite focal sets).
pub fn conic_std_error(focal: &FocalSet, profile: &ProfileFunction, x: &DVector<f64>) -> f64 {
    if focal.kind == FocalKind::FinitePoints {
        return 0.0;
    }
    let vals: Vec<f64> = focal.points.iter().map(|p| profile.eval((p - x).norm())).collect();
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (var / m).sqrt() * focal.volume
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: Value,
    pub v: Vec<f64>,
    pub seed: u64,
    pub resolution: f64,
    pub mc_samples: usize,
}

/// `{x : f_D(x) ≤ level}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicBody {
    pub focal: FocalSet,
    pub profile: ProfileFunction,
    pub level: f64,
    /// Conic value at the anchoring point (the minimax point for built
    /// bodies, the origin for bodies assembled from parts).
    pub c0: f64,
    pub margin: f64,
    /// The level had to be raised above `c0·(1+margin)` to keep the focal
    /// set and the origin strictly inside.
    pub level_adjusted: bool,
    #[serde(with = "crate::vecser::opt_vector")]
    pub minimax_w: Option<DVector<f64>>,
    pub minimax_value: Option<f64>,
    pub provenance: Option<Provenance>,
}

impl ConicBody {
    pub fn from_parts(focal: FocalSet, profile: ProfileFunction, level: f64) -> Result<Self> {
        let c0 = raw_value(&focal, &profile, &vec![0.0; focal.dim()]);
        if !(level > c0) {
            return Err(Error::OriginOutside);
        }
        Ok(Self {
            focal,
            profile,
            level,
            c0,
            margin: level / c0.max(f64::MIN_POSITIVE) - 1.0,
            level_adjusted: false,
            minimax_w: None,
            minimax_value: None,
            provenance: None,
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        conic_value(&self.focal, &self.profile, x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BodyConfig {
    pub resolution: f64,
    pub seed: u64,
    pub mc_samples: usize,
    pub solver: SolverConfig,
}

impl BodyConfig {
    pub fn new(n: usize, resolution: f64, seed: u64) -> Self {
        Self { resolution, seed, mc_samples: 4000, solver: SolverConfig::for_dim(n) }
    }
}

/// Builds the invariant body anchored at the minimax point of `P_G(v)`:
/// focal set `conv P_G(v)`, profile smoothed at `m_v`, level `c0·(1+margin)`.
pub fn build_invariant_body(spec: &GroupSpec, v: &DVector<f64>, margin: f64, cfg: &BodyConfig) -> Result<ConicBody> {
    if !(margin > 0.0) {
        return Err(Error::BadParams(format!("margin must be positive, got {margin}")));
    }
    let sample = sample_group(spec, cfg.resolution, cfg.seed)?;
    let o = orbit(&sample, v)?;
    let cov = sample.covering_resolution;
    let r_v = solve_maximin(&o, &cfg.solver)?.value;
    if cov > 0.0 && r_v <= 3.0 * cov {
        return Err(Error::TransitiveGroup { r_v });
    }
    let mm = solve_minimax(&o, &cfg.solver)?;
    let focal = FocalSet::hull_of_orbit(&o, &sample, cfg.mc_samples, cfg.seed)?;
    let profile = smoothing_u(mm.value);
    let c0 = raw_value(&focal, &profile, mm.w.as_slice());

    let origin = vec![0.0; o.dim()];
    let f0 = raw_value(&focal, &profile, &origin);
    let focal_max = o.points.iter().map(|p| raw_value(&focal, &profile, p.as_slice())).fold(f64::NEG_INFINITY, f64::max);
    let strictly_inside = |level: f64| focal_max < level * (1.0 - 1e-6) && f0 < level * (1.0 - 1e-6);

    let mut used = margin;
    let mut level = c0 * (1.0 + used);
    let mut adjusted = false;
    let mut tries = 0;
    while !strictly_inside(level) && tries < 3 {
        used *= 2.0;
        level = c0 * (1.0 + used);
        tries += 1;
    }
    if !strictly_inside(level) {
        used = margin;
        level = (1.0 + margin) * c0.max(focal_max).max(f0);
        adjusted = true;
    }
    Ok(ConicBody {
        focal,
        profile,
        level,
        c0,
        margin: used,
        level_adjusted: adjusted,
        minimax_w: Some(mm.w),
        minimax_value: Some(mm.value),
        provenance: Some(Provenance {
            spec: spec.to_json(),
            v: v.iter().copied().collect(),
            seed: cfg.seed,
            resolution: cfg.resolution,
            mc_samples: cfg.mc_samples,
        }),
    })
}

/// Minkowski functional of the body: the `λ > 0` with `f_D(x/λ) = level`.
pub fn gauge(body: &ConicBody, x: &DVector<f64>) -> Result<f64> {
    if x.len() != body.focal.dim() {
        return Err(Error::DimensionMismatch { expected: body.focal.dim(), got: x.len() });
    }
    if x.iter().all(|c| *c == 0.0) {
        return Ok(0.0);
    }
    let at = |t: f64| -> f64 {
        let p: Vec<f64> = x.iter().map(|c| c * t).collect();
        raw_value(&body.focal, &body.profile, &p)
    };
    if at(0.0) >= body.level {
        return Err(Error::OriginOutside);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while at(hi) < body.level {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NoBracket);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) < body.level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(1.0 / (0.5 * (lo + hi)))
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipsoidFit {
    /// `max |xᵀQx − 1|` over held-out boundary points.
    pub max_residual: f64,
    /// The same on the points used for the fit.
    pub fit_residual: f64,
    #[serde(with = "crate::vecser::matrix")]
    pub q: DMatrix<f64>,
    pub boundary_points: usize,
}

/// Fits a centred quadric `xᵀQx = 1` to boundary points on two thirds of
/// the samples and reports the worst residual on the remaining third.
pub fn ellipsoid_witness(body: &ConicBody, boundary_samples: usize, seed: u64) -> Result<EllipsoidFit> {
    let n = body.focal.dim();
    let unknowns = n * (n + 1) / 2;
    let count = boundary_samples.max(3 * unknowns + 3);
    let dirs = gaussian_directions(n, count, seed);
    let mut pts = Vec::with_capacity(count);
    for d in &dirs {
        let g = gauge(body, d)?;
        pts.push(d / g);
    }
    let split = 2 * count / 3;
    let row = |x: &DVector<f64>| -> Vec<f64> {
        let mut r = Vec::with_capacity(unknowns);
        for i in 0..n {
            for j in i..n {
                r.push(if i == j { x[i] * x[i] } else { 2.0 * x[i] * x[j] });
            }
        }
        r
    };
    let a = DMatrix::from_fn(split, unknowns, |i, j| row(&pts[i])[j]);
    let b = DVector::from_element(split, 1.0);
    let sol = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::InconsistentInput(e.to_string()))?;
    let mut q = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            q[(i, j)] = sol[k];
            q[(j, i)] = sol[k];
            k += 1;
        }
    }
    let resid = |x: &DVector<f64>| ((x.transpose() * &q * x)[(0, 0)] - 1.0).abs();
    let fit_residual = pts[..split].iter().map(resid).fold(0.0, f64::max);
    let max_residual = pts[split..].iter().map(resid).fold(0.0, f64::max);
    Ok(EllipsoidFit { max_residual, fit_residual, q, boundary_points: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_model::builtin_spec;
    use serde_json::json;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn hexagon() -> Vec<DVector<f64>> {
        (0..6).map(|k| v(&[(k as f64 * PI / 3.0).cos(), (k as f64 * PI / 3.0).sin()])).collect()
    }

    #[test]
    fn conic_value_examples() {
        let id = ProfileFunction::Identity;
        let one = FocalSet::finite(vec![v(&[0.0, 0.0])], None).unwrap();
        assert!((conic_value(&one, &id, &v(&[3.0, 4.0])).unwrap() - 5.0).abs() < 1e-15);

        let two = FocalSet::finite(vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])], None).unwrap();
        for y in [0.0, 0.5, 2.0] {
            let want = 2.0 * (1.0f64 + y * y).sqrt();
            assert!((conic_value(&two, &id, &v(&[0.0, y])).unwrap() - want).abs() < 1e-14);
        }

        let hex = FocalSet::finite(hexagon(), None).unwrap();
        assert!((conic_value(&hex, &id, &v(&[0.0, 0.0])).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn profile_examples() {
        for m in [0.0, 0.7, 1.9] {
            let u = smoothing_u(m);
            assert_eq!(u.eval(m), m);
            assert_eq!(u.eval(0.0), 0.0);
            assert!((u.eval(m + 1.0) - (m + 1.0 + (-1.0f64).exp())).abs() < 1e-15);
            // Increasing and convex on a grid.
            let ts: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
            for w in ts.windows(3) {
                let (a, b, c) = (u.eval(w[0]), u.eval(w[1]), u.eval(w[2]));
                assert!(b > a && c > b);
                assert!(a + c - 2.0 * b >= -1e-12);
            }
        }
    }

    #[test]
    fn ball_gauge_is_the_norm() {
        let body =
            ConicBody::from_parts(FocalSet::finite(vec![v(&[0.0, 0.0, 0.0])], None).unwrap(), ProfileFunction::Identity, 1.0)
                .unwrap();
        for x in [v(&[1.0, 2.0, 3.0]), v(&[-0.1, 0.0, 0.0])] {
            assert!((gauge(&body, &x).unwrap() - x.norm()).abs() < 1e-12 * x.norm());
        }
        let fit = ellipsoid_witness(&body, 60, 3).unwrap();
        assert!(fit.max_residual <= 1e-8, "{}", fit.max_residual);
    }

    #[test]
    fn two_focus_ellipse_is_a_quadric() {
        let focal = FocalSet::finite(vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])], None).unwrap();
        let body = ConicBody::from_parts(focal, ProfileFunction::Identity, 3.0).unwrap();
        // Closed form: semi-axes a = 3/2, b = √(a² − 1).
        let a = 1.5f64;
        let b = (a * a - 1.0).sqrt();
        assert!((gauge(&body, &v(&[1.0, 0.0])).unwrap() - 1.0 / a).abs() < 1e-12);
        assert!((gauge(&body, &v(&[0.0, 1.0])).unwrap() - 1.0 / b).abs() < 1e-12);
        assert!(ellipsoid_witness(&body, 60, 4).unwrap().max_residual <= 1e-6);
    }

    #[test]
    fn origin_outside_is_reported() {
        let focal = FocalSet::finite(vec![v(&[3.0, 0.0])], None).unwrap();
        assert!(matches!(ConicBody::from_parts(focal, ProfileFunction::Identity, 1.0), Err(Error::OriginOutside)));
    }

    #[test]
    fn c6_body_is_invariant_and_not_an_ellipse() {
        let spec = builtin_spec("cyclic", &json!({"k": 6})).unwrap();
        let cfg = BodyConfig::new(2, 0.1, 7);
        let body = build_invariant_body(&spec, &v(&[1.0, 0.0]), 0.05, &cfg).unwrap();
        assert!(body.level > body.c0);
        let sample = sample_group(&spec, 0.1, 7).unwrap();
        for x in [v(&[0.3, 0.7]), v(&[-1.0, 0.2])] {
            let g0 = gauge(&body, &x).unwrap();
            assert!((gauge(&body, &(&x * 2.0)).unwrap() - 2.0 * g0).abs() < 1e-8);
            for g in &sample.elements {
                assert!((gauge(&body, &g.apply(&x)).unwrap() - g0).abs() < 1e-6);
            }
        }
        let near = build_invariant_body(&spec, &v(&[1.0, 0.0]), 1e-3, &cfg).unwrap();
        let fit = ellipsoid_witness(&near, 90, 5).unwrap();
        assert!(fit.max_residual > 1e-3, "{}", fit.max_residual);
    }

    #[test]
    fn identity_group_body_is_a_ball_around_v() {
        let spec = builtin_spec("trivial", &json!({"n": 2})).unwrap();
        let body = build_invariant_body(&spec, &v(&[1.0, 0.0]), 0.05, &BodyConfig::new(2, 0.1, 1)).unwrap();
        assert!(body.level_adjusted);
        // Boundary points are equidistant from v.
        let dirs = gaussian_directions(2, 20, 9);
        let radii: Vec<f64> = dirs.iter().map(|d| (d / gauge(&body, d).unwrap() - v(&[1.0, 0.0])).norm()).collect();
        let spread = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - radii.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-9);
    }

    #[test]
    fn body_json_round_trip_is_exact() {
        let spec = builtin_spec("cyclic", &json!({"k": 3})).unwrap();
        let body = build_invariant_body(&spec, &v(&[1.0, 0.0]), 0.05, &BodyConfig { mc_samples: 300, ..BodyConfig::new(2, 0.1, 2) })
            .unwrap();
        let back = ConicBody::from_json(&body.to_json().unwrap()).unwrap();
        let x = v(&[0.3, -0.4]);
        assert_eq!(gauge(&body, &x).unwrap().to_bits(), gauge(&back, &x).unwrap().to_bits());
    }
}
