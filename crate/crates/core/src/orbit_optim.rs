//! The farthest-distance function `f_v`, the nearest-distance function
//! `h_v`, and the minimax / maximin problems on the unit sphere.
//!
//! Both objectives are finite max/min of smooth functions over the sampled
//! orbit. The local solver is an ε-steepest-descent method: the direction is
//! the negated minimum-norm element of the convex hull of the tangential
//! gradients over the ε-active band, and the band shrinks whenever the
//! direction vanishes or the line search fails.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group_model::Orbit;
use crate::minnorm::min_norm_point;
use crate::seeds::sphere_seeds;
use crate::tolerances::{default_eps_active, MAX_ITER, SOLVER_TOL, TANGENT_TOL};

const EPS_START: f64 = 1e-3;
const EPS_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sup,
    Inf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Minimax,
    Maximin,
}

/// Orbit points attaining the extremal distance within `eps_active`.
#[derive(Clone, Debug, Serialize)]
pub struct ActiveSet {
    pub mode: Mode,
    /// Indices into the group sample.
    pub indices: Vec<usize>,
    /// Indices into the orbit's point list.
    pub point_indices: Vec<usize>,
    pub eps_active: f64,
    #[serde(serialize_with = "crate::vecser::vectors::serialize")]
    pub witness_points: Vec<DVector<f64>>,
    /// The extremal distance (farthest for `Sup`, nearest for `Inf`).
    pub extremal: f64,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremalResult {
    pub kind: Kind,
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub w: DVector<f64>,
    pub value: f64,
    pub active: ActiveSet,
    /// Local optimum found from each start, in start order.
    pub multistart_values: Vec<f64>,
    /// `f(−w)² + h(w)² − 4` for maximin results (antipodal consistency).
    pub antipodal_gap: Option<f64>,
    pub converged_starts: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// `None` means `default_eps_active(tol, covering_resolution)`.
    pub eps_active: Option<f64>,
    pub initial_step: f64,
}

impl SolverConfig {
    /// Default start counts: 64 for n ≤ 3, 256 for n = 4, 512 above.
    pub fn for_dim(n: usize) -> Self {
        let starts = match n {
            0..=3 => 64,
            4 => 256,
            _ => 512,
        };
        Self { starts, tol: SOLVER_TOL, max_iter: MAX_ITER, eps_active: None, initial_step: 0.5 }
    }

    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn eps_for(&self, orbit: &Orbit) -> f64 {
        self.eps_active.unwrap_or_else(|| default_eps_active(self.tol, orbit.covering_resolution))
    }
}

fn check(orbit: &Orbit, w: &DVector<f64>) -> Result<()> {
    if orbit.is_empty() {
        return Err(Error::EmptyOrbit);
    }
    if w.len() != orbit.dim() {
        return Err(Error::DimensionMismatch { expected: orbit.dim(), got: w.len() });
    }
    Ok(())
}

/// `sup_g ‖w − g v‖` over the sampled orbit.
pub fn f_sup(orbit: &Orbit, w: &DVector<f64>) -> Result<f64> {
    check(orbit, w)?;
    Ok(farthest(orbit, w).1.sqrt())
}

/// `inf_g ‖w − g v‖` over the sampled orbit.
pub fn h_inf(orbit: &Orbit, w: &DVector<f64>) -> Result<f64> {
    check(orbit, w)?;
    Ok(nearest(orbit, w).1.sqrt())
}

/// `max_g ⟨w, g v⟩`. Orbit points are unit vectors, so the maximiser is the
/// nearest point to `w`.
pub fn support_value(orbit: &Orbit, w: &DVector<f64>) -> Result<f64> {
    check(orbit, w)?;
    let (i, _) = nearest(orbit, w);
    Ok(w.dot(&orbit.points[i]))
}

fn farthest(orbit: &Orbit, w: &DVector<f64>) -> (usize, f64) {
    orbit.tree().farthest(w.as_slice()).expect("nonempty orbit")
}

fn nearest(orbit: &Orbit, w: &DVector<f64>) -> (usize, f64) {
    orbit.tree().nearest(w.as_slice()).expect("nonempty orbit")
}

/// Orbit point indices within `eps` of the extremal distance.
fn band(orbit: &Orbit, w: &DVector<f64>, mode: Mode, eps: f64) -> (Vec<usize>, f64) {
    match mode {
        Mode::Sup => {
            let f = farthest(orbit, w).1.sqrt();
            let r = f - eps;
            let idx = if r <= 0.0 { (0..orbit.len()).collect() } else { orbit.tree().beyond(w.as_slice(), r * r) };
            (idx, f)
        }
        Mode::Inf => {
            let h = nearest(orbit, w).1.sqrt();
            let r = h + eps;
            (orbit.tree().within(w.as_slice(), r * r), h)
        }
    }
}

/// Indices and witnesses attaining the extremal distance within `eps_active`.
pub fn active_set(orbit: &Orbit, w: &DVector<f64>, mode: Mode, eps_active: f64) -> Result<ActiveSet> {
    check(orbit, w)?;
    if !(eps_active > 0.0) {
        return Err(Error::BadParams(format!("eps_active must be positive, got {eps_active}")));
    }
    let (point_indices, extremal) = band(orbit, w, mode, eps_active);
    Ok(ActiveSet {
        mode,
        indices: point_indices.iter().map(|&i| orbit.element_index[i]).collect(),
        witness_points: point_indices.iter().map(|&i| orbit.points[i].clone()).collect(),
        point_indices,
        eps_active,
        extremal,
    })
}

/// One-sided derivative of `f_v²` at `w` along the tangent vector `z`:
/// `2 max ⟨w − g v, z⟩` over the `eps_active` sup band.
pub fn directional_derivative_sq(orbit: &Orbit, w: &DVector<f64>, z: &DVector<f64>, eps_active: f64) -> Result<f64> {
    check(orbit, w)?;
    check(orbit, z)?;
    let inner = w.dot(z);
    if inner.abs() > TANGENT_TOL {
        return Err(Error::NotTangent { inner });
    }
    let (idx, _) = band(orbit, w, Mode::Sup, eps_active);
    Ok(idx.iter().map(|&i| 2.0 * (w - &orbit.points[i]).dot(z)).fold(f64::NEG_INFINITY, f64::max))
}

/// Objective minimised by the local solver.
fn objective(orbit: &Orbit, w: &DVector<f64>, mode: Mode) -> f64 {
    match mode {
        Mode::Sup => farthest(orbit, w).1,
        Mode::Inf => -nearest(orbit, w).1,
    }
}

#[derive(Clone, Debug)]
struct Local {
    w: DVector<f64>,
    converged: bool,
}

fn project(w: &DVector<f64>, x: DVector<f64>) -> DVector<f64> {
    let c = w.dot(&x);
    x - w * c
}

fn local_solve(orbit: &Orbit, start: &DVector<f64>, mode: Mode, cfg: &SolverConfig) -> Local {
    let mut w = start.normalize();
    let mut value = objective(orbit, &w, mode);
    let mut eps = EPS_START;
    let mut step = cfg.initial_step;
    for _ in 0..cfg.max_iter {
        let (idx, _) = band(orbit, &w, mode, eps);
        let grads: Vec<DVector<f64>> = idx
            .iter()
            .map(|&i| {
                let p = &orbit.points[i];
                match mode {
                    Mode::Sup => project(&w, &w - p),
                    Mode::Inf => project(&w, p - &w),
                }
            })
            .collect();
        let (x, _) = min_norm_point(&grads);
        let xn = x.norm();
        if xn <= 1e-14 {
            if eps <= EPS_FLOOR {
                return Local { w, converged: true };
            }
            eps = (eps * 0.1).max(EPS_FLOOR);
            continue;
        }
        let d = -x / xn;
        let mut alpha = step;
        let mut accepted = None;
        while alpha >= cfg.tol {
            let cand = (&w + &d * alpha).normalize();
            let v = objective(orbit, &cand, mode);
            if v < value {
                accepted = Some((cand, v));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, v)) => {
                w = cand;
                value = v;
                step = (2.0 * alpha).min(1.0);
                eps = (eps * 2.0).min(EPS_START);
            }
            None => {
                if eps <= EPS_FLOOR {
                    return Local { w, converged: true };
                }
                eps = (eps * 0.1).max(EPS_FLOOR);
                step = step.max(16.0 * cfg.tol);
            }
        }
    }
    Local { w, converged: false }
}

/// Start points: the orbit's mean direction (and its antipode), the base
/// vector and its antipode, then a deterministic sphere covering.
fn starts(orbit: &Orbit, count: usize) -> Vec<DVector<f64>> {
    let n = orbit.dim();
    let mut out = Vec::with_capacity(count + 4);
    let mean = orbit.points.iter().fold(DVector::zeros(n), |acc, p| acc + p) / orbit.len() as f64;
    if mean.norm() > 1e-6 {
        out.push(mean.normalize());
        out.push(-mean.normalize());
    }
    out.push(orbit.base.clone());
    out.push(-&orbit.base);
    out.extend(sphere_seeds(n, count));
    out
}

fn solve(orbit: &Orbit, mode: Mode, cfg: &SolverConfig) -> Result<(DVector<f64>, Vec<f64>, usize)> {
    let seeds = starts(orbit, cfg.starts);
    let locals: Vec<Local> = seeds.par_iter().map(|s| local_solve(orbit, s, mode, cfg)).collect();
    let converged = locals.iter().filter(|l| l.converged).count();
    if converged == 0 {
        return Err(Error::NoConvergence { iterations: cfg.max_iter });
    }
    let values: Vec<f64> = locals
        .iter()
        .map(|l| match mode {
            Mode::Sup => farthest(orbit, &l.w).1.sqrt(),
            Mode::Inf => nearest(orbit, &l.w).1.sqrt(),
        })
        .collect();
    let best = (0..locals.len())
        .filter(|&i| locals[i].converged)
        .min_by(|&a, &b| {
            let (va, vb) = match mode {
                Mode::Sup => (values[a], values[b]),
                Mode::Inf => (-values[a], -values[b]),
            };
            va.total_cmp(&vb).then(a.cmp(&b))
        })
        .expect("at least one converged start");
    Ok((locals[best].w.clone(), values, converged))
}

/// Minimises `f_v` on the unit sphere.
pub fn solve_minimax(orbit: &Orbit, cfg: &SolverConfig) -> Result<ExtremalResult> {
    if orbit.is_empty() {
        return Err(Error::EmptyOrbit);
    }
    let eps = cfg.eps_for(orbit);
    let (w, values, converged) = if orbit.len() == 1 {
        (orbit.points[0].clone(), vec![0.0], 1)
    } else {
        solve(orbit, Mode::Sup, cfg)?
    };
    let active = active_set(orbit, &w, Mode::Sup, eps)?;
    Ok(ExtremalResult {
        kind: Kind::Minimax,
        value: active.extremal,
        w,
        active,
        multistart_values: values,
        antipodal_gap: None,
        converged_starts: converged,
    })
}

/// Maximises `h_v` on the unit sphere; the value is the Hausdorff distance
/// between the orbit and the sphere.
pub fn solve_maximin(orbit: &Orbit, cfg: &SolverConfig) -> Result<ExtremalResult> {
    if orbit.is_empty() {
        return Err(Error::EmptyOrbit);
    }
    let eps = cfg.eps_for(orbit);
    let (w, values, converged) = if orbit.len() == 1 {
        (-&orbit.points[0], vec![2.0], 1)
    } else {
        solve(orbit, Mode::Inf, cfg)?
    };
    let active = active_set(orbit, &w, Mode::Inf, eps)?;
    let f_anti = f_sup(orbit, &(-&w))?;
    Ok(ExtremalResult {
        kind: Kind::Maximin,
        antipodal_gap: Some(f_anti * f_anti + active.extremal * active.extremal - 4.0),
        value: active.extremal,
        w,
        active,
        multistart_values: values,
        converged_starts: converged,
    })
}

/// Maximin refinement from given starts only (no sphere covering). Used by
/// outer searches that already hold good candidates.
pub fn maximin_from(orbit: &Orbit, starts: &[DVector<f64>], cfg: &SolverConfig) -> Result<(DVector<f64>, f64)> {
    if orbit.is_empty() {
        return Err(Error::EmptyOrbit);
    }
    if orbit.len() == 1 {
        return Ok((-&orbit.points[0], 2.0));
    }
    let locals: Vec<Local> = starts.par_iter().map(|s| local_solve(orbit, s, Mode::Inf, cfg)).collect();
    locals
        .into_iter()
        .map(|l| {
            let h = nearest(orbit, &l.w).1.sqrt();
            (l.w, h)
        })
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.1.total_cmp(&b.1).then(ib.cmp(ia)))
        .map(|(_, r)| r)
        .ok_or(Error::EmptyInput)
}
