//! Group-level classification: irreducibility, lazy and busy orbits, flat
//! subspaces and rank, dimension bounds and the Lie algebra.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group_model::{orbit, GroupSample, GroupSpec, Orbit};
use crate::matrix_kernel::{commutator, expm_taylor, span_basis, SquareMatrix, SubspaceBasis};
use crate::minnorm::min_norm_point;
use crate::orbit_optim::{active_set, maximin_from, solve_maximin, ExtremalResult, Kind, Mode, SolverConfig};
use crate::seeds::sphere_seeds;
use crate::tolerances::{reducibility_margin, SIGMA_THRESHOLD};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Irreducible,
    Reducible,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducibilityReport {
    pub verdict: Verdict,
    pub max_r: f64,
    /// Smallest support value of a probe orbit over the direction grid: a
    /// lower bound on the inscribed radius of its hull around the origin.
    pub chebyshev_radius: f64,
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub witness_v: DVector<f64>,
    /// Probe whose orbit attains `chebyshev_radius`.
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub chebyshev_v: DVector<f64>,
    pub margin: f64,
    /// Verdict of the √2 criterion alone (`max_r ≥ √2 − margin`).
    pub sqrt2_reducible: bool,
    /// Verdict of the support criterion alone (`chebyshev_radius ≤ margin`).
    pub support_reducible: bool,
    pub probes: usize,
}

/// Probe base vectors: coordinate axes, coordinate-pair diagonals, a
/// deterministic sphere lattice and seeded Gaussian directions.
pub fn probe_vectors(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            let mut e = DVector::zeros(n);
            e[i] = SQRT2.recip();
            e[j] = SQRT2.recip();
            out.push(e);
        }
    }
    let rest = count.saturating_sub(out.len());
    let lattice = rest / 2;
    out.extend(sphere_seeds(n, lattice));
    out.extend(gaussian_directions(n, rest - lattice, seed));
    out.truncate(count);
    out
}

pub fn gaussian_directions(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm: f64 = x.norm();
        if norm > 1e-9 {
            out.push(x / norm);
        }
    }
    out
}

fn direction_grid(n: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut dirs = Vec::with_capacity(2 * n + 512);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(n);
            e[i] = s;
            dirs.push(e);
        }
    }
    dirs.extend(gaussian_directions(n, 512, seed ^ 0x5eed_d12e));
    dirs
}

/// Minimum over the direction grid of the orbit's support function.
pub fn chebyshev_radius(orbit: &Orbit, seed: u64) -> f64 {
    direction_grid(orbit.dim(), seed)
        .iter()
        .map(|d| crate::orbit_optim::support_value(orbit, d).expect("nonempty orbit"))
        .fold(f64::INFINITY, f64::min)
}

pub fn irreducibility_test(sample: &GroupSample, v_probes: usize, seed: u64) -> Result<ReducibilityReport> {
    irreducibility_test_with(sample, v_probes, seed, &SolverConfig::for_dim(sample.n))
}

pub fn irreducibility_test_with(
    sample: &GroupSample,
    v_probes: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ReducibilityReport> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let probes = probe_vectors(sample.n, v_probes.max(1), seed);
    let per_probe: Vec<(f64, f64)> = probes
        .iter()
        .map(|v| {
            let o = orbit(sample, v)?;
            let r = solve_maximin(&o, cfg)?.value;
            Ok((r, chebyshev_radius(&o, seed)))
        })
        .collect::<Result<_>>()?;
    let argmax = (0..probes.len()).max_by(|&a, &b| per_probe[a].0.total_cmp(&per_probe[b].0).then(b.cmp(&a))).unwrap();
    let argmin = (0..probes.len()).min_by(|&a, &b| per_probe[a].1.total_cmp(&per_probe[b].1).then(a.cmp(&b))).unwrap();
    let max_r = per_probe[argmax].0;
    let cheb = per_probe[argmin].1;
    let margin = reducibility_margin(sample.covering_resolution);
    let verdict = if cheb <= margin || max_r >= SQRT2 + margin {
        Verdict::Reducible
    } else if max_r >= SQRT2 - margin {
        Verdict::Inconclusive
    } else {
        Verdict::Irreducible
    };
    Ok(ReducibilityReport {
        verdict,
        max_r,
        chebyshev_radius: cheb,
        witness_v: probes[argmax].clone(),
        chebyshev_v: probes[argmin].clone(),
        margin,
        sqrt2_reducible: max_r >= SQRT2 - margin,
        support_reducible: cheb <= margin,
        probes: probes.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    /// Lazy Hausdorff distance: the largest `r_v` found.
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Busy Hausdorff distance: the smallest `r_v` found.
    pub r: f64,
    pub ratio: f64,
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub lazy_v: DVector<f64>,
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub busy_v: DVector<f64>,
    pub covering_resolution: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LazySearchConfig {
    pub probes: usize,
    /// Best probes refined by pattern search, for each of the two searches.
    pub refine: usize,
    pub inner_starts: usize,
    pub min_step: f64,
}

impl LazySearchConfig {
    pub fn for_dim(n: usize) -> Self {
        Self { probes: if n <= 3 { 64 } else { 128 }, refine: 2, inner_starts: 32, min_step: 1e-3 }
    }
}

struct RvEvaluator<'a> {
    sample: &'a GroupSample,
    cfg: &'a SolverConfig,
    seeds: Vec<DVector<f64>>,
}

impl RvEvaluator<'_> {
    fn eval(&self, v: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<(f64, DVector<f64>)> {
        let o = orbit(self.sample, v)?;
        let mut starts: Vec<DVector<f64>> = warm.into_iter().cloned().collect();
        starts.push(-v);
        starts.extend(self.seeds.iter().cloned());
        let (w, r) = maximin_from(&o, &starts, self.cfg)?;
        Ok((r, w))
    }
}

/// Searches base vectors for the extreme Hausdorff distances `R = sup r_v`
/// and `r = inf r_v`: probe, then refine the best probes by a
/// derivative-free pattern search on the sphere.
pub fn lazy_busy_search(
    spec: &GroupSpec,
    resolution: f64,
    seed: u64,
    cfg: &SolverConfig,
    search: &LazySearchConfig,
) -> Result<RatioReport> {
    let sample = crate::group_model::sample_group(spec, resolution, seed)?;
    lazy_busy_on_sample(&sample, seed, cfg, search)
}

pub fn lazy_busy_on_sample(
    sample: &GroupSample,
    seed: u64,
    cfg: &SolverConfig,
    search: &LazySearchConfig,
) -> Result<RatioReport> {
    let n = sample.n;
    let ev = RvEvaluator { sample, cfg, seeds: sphere_seeds(n, search.inner_starts) };
    let probes = probe_vectors(n, search.probes.max(1), seed);
    let values: Vec<(f64, DVector<f64>)> = probes.iter().map(|v| ev.eval(v, None)).collect::<Result<_>>()?;
    let mut evaluations = probes.len();

    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| values[b].0.total_cmp(&values[a].0).then(a.cmp(&b)));
    let mut lazy = (values[order[0]].0, probes[order[0]].clone());
    for &i in order.iter().take(search.refine) {
        let (r, v, k) = pattern_search(&ev, &probes[i], &values[i], true, search.min_step)?;
        evaluations += k;
        if r > lazy.0 {
            lazy = (r, v);
        }
    }
    let mut busy = (values[order[order.len() - 1]].0, probes[order[order.len() - 1]].clone());
    for &i in order.iter().rev().take(search.refine) {
        let (r, v, k) = pattern_search(&ev, &probes[i], &values[i], false, search.min_step)?;
        evaluations += k;
        if r < busy.0 {
            busy = (r, v);
        }
    }
    let (big_r, r) = (lazy.0, busy.0);
    Ok(RatioReport {
        big_r,
        r,
        ratio: if big_r > 0.0 { r / big_r } else { 1.0 },
        lazy_v: lazy.1,
        busy_v: busy.1,
        covering_resolution: sample.covering_resolution,
        evaluations,
    })
}

/// Compass search over an orthonormal tangent frame, halving the step when
/// no move improves.
fn pattern_search(
    ev: &RvEvaluator<'_>,
    v0: &DVector<f64>,
    start: &(f64, DVector<f64>),
    maximize: bool,
    min_step: f64,
) -> Result<(f64, DVector<f64>, usize)> {
    let n = v0.len();
    let better = |a: f64, b: f64| if maximize { a > b + 1e-12 } else { a < b - 1e-12 };
    let (mut best, mut w) = start.clone();
    let mut v = v0.clone();
    let mut step = 0.25;
    let mut evals = 0;
    while step >= min_step && evals < 400 {
        let frame = tangent_frame(&v);
        let mut moved = false;
        for t in frame.iter().take(n - 1) {
            for s in [1.0, -1.0] {
                let cand = (&v + t * (s * step)).normalize();
                let (r, wc) = ev.eval(&cand, Some(&w))?;
                evals += 1;
                if better(r, best) {
                    best = r;
                    v = cand;
                    w = wc;
                    moved = true;
                    break;
                }
            }
            if moved {
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((best, v, evals))
}

/// Orthonormal basis of the tangent space at a unit vector.
fn tangent_frame(v: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = v.len();
    let mut cols = vec![v.clone()];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        cols.push(e);
    }
    let q = DMatrix::from_columns(&cols).qr().q();
    (1..n).map(|j| q.column(j).into_owned()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatSubspace {
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub base_v: DVector<f64>,
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub maximin_w: DVector<f64>,
    pub basis: SubspaceBasis,
    pub dim: usize,
    #[serde(serialize_with = "crate::vecser::vectors::serialize")]
    pub witnesses: Vec<DVector<f64>>,
    /// `r_v` at `maximin_w` (after witness polishing, when applied).
    pub value: f64,
}

/// Span of the maximin witnesses and the maximin point.
pub fn flat_subspace(
    orbit: &Orbit,
    maximin: &ExtremalResult,
    eps_active: f64,
    sigma_threshold: f64,
) -> Result<FlatSubspace> {
    if maximin.kind != Kind::Maximin {
        return Err(Error::InconsistentInput("flat subspaces need a maximin result".into()));
    }
    if maximin.w.len() != orbit.dim() {
        return Err(Error::InconsistentInput("maximin point and orbit differ in dimension".into()));
    }
    let active = active_set(orbit, &maximin.w, Mode::Inf, eps_active)?;
    if (active.extremal - maximin.value).abs() > eps_active {
        return Err(Error::InconsistentInput("maximin result does not belong to this orbit".into()));
    }
    let mut vectors = active.witness_points.clone();
    vectors.push(maximin.w.clone());
    let basis = span_basis(&vectors, sigma_threshold)?;
    Ok(FlatSubspace {
        base_v: orbit.base.clone(),
        maximin_w: maximin.w.clone(),
        dim: basis.dim,
        basis,
        witnesses: active.witness_points,
        value: active.extremal,
    })
}

/// Moves sampled orbit points to exact local nearest points of the
/// continuous orbit by Newton steps over the Lie parameters.
struct Polisher {
    v: DVector<f64>,
    gens: Vec<DMatrix<f64>>,
    av: Vec<DVector<f64>>,
    /// `(AᵢAⱼ + AⱼAᵢ) v / 2`, row-major over (i, j).
    aav: Vec<DVector<f64>>,
}

impl Polisher {
    fn new(gens: &[SquareMatrix], v: &DVector<f64>) -> Self {
        let gens: Vec<DMatrix<f64>> = gens.iter().map(|a| a.as_matrix().clone()).collect();
        let av = gens.iter().map(|a| a * v).collect();
        let mut aav = Vec::new();
        for a in &gens {
            for b in &gens {
                aav.push((a * b + b * a) * v * 0.5);
            }
        }
        Self { v: v.clone(), gens, av, aav }
    }

    /// Locally minimises `‖g exp(X) v − w‖` over `X` in the Lie algebra.
    fn polish(&self, g: &DMatrix<f64>, w: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
        let k = self.gens.len();
        let mut g = g.clone();
        let mut p = &g * &self.v;
        let mut d = (&p - w).norm();
        for _ in 0..60 {
            let r = &p - w;
            let t: Vec<DVector<f64>> = self.av.iter().map(|a| &g * a).collect();
            let grad = DVector::from_fn(k, |i, _| t[i].dot(&r));
            if grad.amax() < 1e-15 {
                break;
            }
            let mut h = DMatrix::from_fn(k, k, |i, j| t[i].dot(&t[j]) + r.dot(&(&g * &self.aav[i * k + j])));
            let jtj = DMatrix::from_fn(k, k, |i, j| t[i].dot(&t[j]));
            let reg = 1e-12 * (jtj.trace() + 1e-300);
            for i in 0..k {
                h[(i, i)] += reg;
            }
            let x = match h.clone().cholesky() {
                Some(c) => c.solve(&(-&grad)),
                None => {
                    let mut m = jtj.clone();
                    for i in 0..k {
                        m[(i, i)] += reg.max(1e-14);
                    }
                    m.svd(true, true).solve(&(-&grad), 1e-14).unwrap_or_else(|_| DVector::zeros(k))
                }
            };
            let mut scale = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let mut xa = DMatrix::<f64>::zeros(self.v.len(), self.v.len());
                for (i, a) in self.gens.iter().enumerate() {
                    xa += a * (x[i] * scale);
                }
                let gn = &g * expm_taylor(&xa);
                let pn = &gn * &self.v;
                let dn = (&pn - w).norm();
                if dn < d || (dn <= d && scale == 1.0) {
                    moved = dn < d;
                    g = gn;
                    p = pn;
                    d = dn;
                    break;
                }
                scale *= 0.5;
            }
            if !moved || x.amax() * scale < 1e-15 {
                break;
            }
        }
        (g, p, d)
    }
}

struct Piece {
    g: DMatrix<f64>,
    p: DVector<f64>,
    d: f64,
}

fn evaluate_pieces(pol: &Polisher, pieces: &[Piece], w: &DVector<f64>) -> Vec<Piece> {
    pieces
        .par_iter()
        .map(|pc| {
            let (g, p, d) = pol.polish(&pc.g, w);
            Piece { g, p, d }
        })
        .collect()
}

fn min_d(pieces: &[Piece]) -> f64 {
    pieces.iter().map(|p| p.d).fold(f64::INFINITY, f64::min)
}

/// Maximin ascent on the continuous orbit restricted to a few polished
/// witness branches.
fn refine_on_pieces(pol: &Polisher, mut pieces: Vec<Piece>, w0: &DVector<f64>, tol: f64) -> (DVector<f64>, Vec<Piece>) {
    let mut w = w0.clone();
    pieces = evaluate_pieces(pol, &pieces, &w);
    let mut value = min_d(&pieces);
    let eps_start = 1e-4;
    let mut eps = eps_start;
    let mut step: f64 = 1e-2;
    for _ in 0..500 {
        let grads: Vec<DVector<f64>> = pieces
            .iter()
            .filter(|pc| pc.d <= value + eps)
            .map(|pc| {
                let x = &pc.p - &w;
                let c = w.dot(&x);
                x - &w * c
            })
            .collect();
        let (x, _) = min_norm_point(&grads);
        let xn = x.norm();
        let mut accepted = None;
        if xn > 1e-15 {
            let dir = -x / xn;
            let mut alpha = step;
            while alpha >= tol * 1e-3 {
                let cand = (&w + &dir * alpha).normalize();
                let cp = evaluate_pieces(pol, &pieces, &cand);
                let cv = min_d(&cp);
                if cv > value {
                    accepted = Some((cand, cp, cv, alpha));
                    break;
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some((cand, cp, cv, alpha)) => {
                w = cand;
                pieces = cp;
                value = cv;
                step = (2.0 * alpha).min(0.1);
                eps = (eps * 2.0).min(eps_start);
            }
            None => {
                if eps <= 1e-13 {
                    break;
                }
                eps *= 0.1;
            }
        }
    }
    (w, pieces)
}

/// Flat subspace with witnesses polished onto the continuous orbit.
///
/// Sampled Lie groups only approximate their orbits, so the sampled active
/// band is a cloud rather than a finite witness set. Each branch of the band
/// is polished to an exact local nearest point, the maximin point is refined
/// against these branches, and the span is taken with a tight threshold.
pub fn flat_subspace_refined(
    sample: &GroupSample,
    lie_generators: &[SquareMatrix],
    orbit: &Orbit,
    maximin: &ExtremalResult,
    cfg: &SolverConfig,
) -> Result<FlatSubspace> {
    if sample.exact || lie_generators.iter().all(|a| a.max_abs() == 0.0) {
        return flat_subspace(orbit, maximin, cfg.eps_for(orbit), SIGMA_THRESHOLD);
    }
    if maximin.kind != Kind::Maximin {
        return Err(Error::InconsistentInput("flat subspaces need a maximin result".into()));
    }
    let pol = Polisher::new(lie_generators, &orbit.base);
    let cov = orbit.covering_resolution;
    let band = active_set(orbit, &maximin.w, Mode::Inf, cfg.eps_for(orbit))?;

    // Branch representatives: greedy clustering of the band by distance to w.
    let mut order: Vec<usize> = (0..band.len()).collect();
    let dist = |i: usize| (&band.witness_points[i] - &maximin.w).norm();
    order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    let mut rho = (4.0 * cov).max(1e-6);
    let reps = loop {
        let mut reps: Vec<usize> = Vec::new();
        for &i in &order {
            if reps.iter().all(|&j| (&band.witness_points[i] - &band.witness_points[j]).norm() > rho) {
                reps.push(i);
            }
        }
        if reps.len() <= 256 {
            break reps;
        }
        rho *= 2.0;
    };
    let pieces: Vec<Piece> = reps
        .iter()
        .map(|&i| {
            let g = sample.elements[band.indices[i]].as_matrix().clone();
            let p = band.witness_points[i].clone();
            Piece { d: (&p - &maximin.w).norm(), g, p }
        })
        .collect();
    let (w, pieces) = refine_on_pieces(&pol, pieces, &maximin.w, cfg.tol);

    let value = min_d(&pieces);
    let act_tol = 1e-7;
    let mut witnesses: Vec<DVector<f64>> = Vec::new();
    for pc in pieces.iter().filter(|pc| pc.d <= value + act_tol) {
        if witnesses.iter().all(|q| (q - &pc.p).norm() > 1e-7) {
            witnesses.push(pc.p.clone());
        }
    }
    let mut vectors = witnesses.clone();
    vectors.push(w.clone());
    let basis = span_basis(&vectors, 1e-5)?;
    Ok(FlatSubspace { base_v: orbit.base.clone(), maximin_w: w, dim: basis.dim, basis, witnesses, value })
}

#[derive(Clone, Debug, Serialize)]
pub struct RankEntry {
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub v: DVector<f64>,
    pub r_v: f64,
    pub flat_dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    /// Largest flat dimension over the probes (a lower bound on the rank).
    pub rank: usize,
    pub per_v: Vec<RankEntry>,
    #[serde(serialize_with = "crate::vecser::vector::serialize")]
    pub v_star: DVector<f64>,
    pub flat_star: FlatSubspace,
}

pub fn rank(spec: &GroupSpec, v_probes: usize, resolution: f64, seed: u64, cfg: &SolverConfig) -> Result<RankReport> {
    let sample = crate::group_model::sample_group(spec, resolution, seed)?;
    rank_on_sample(&sample, &spec.lie_generators, &probe_vectors(spec.n, v_probes.max(1), seed), cfg)
}

pub fn rank_on_sample(
    sample: &GroupSample,
    lie_generators: &[SquareMatrix],
    probes: &[DVector<f64>],
    cfg: &SolverConfig,
) -> Result<RankReport> {
    let mut per_v = Vec::with_capacity(probes.len());
    let mut best: Option<(usize, FlatSubspace)> = None;
    for v in probes {
        let o = orbit(sample, v)?;
        let m = solve_maximin(&o, cfg)?;
        let flat = flat_subspace_refined(sample, lie_generators, &o, &m, cfg)?;
        per_v.push(RankEntry { v: v.clone(), r_v: m.value, flat_dim: flat.dim });
        if best.as_ref().is_none_or(|(d, _)| flat.dim > *d) {
            best = Some((flat.dim, flat));
        }
    }
    let (rank, flat_star) = best.ok_or(Error::EmptyInput)?;
    Ok(RankReport { rank, v_star: flat_star.base_v.clone(), per_v, flat_star })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundVerdict {
    Consistent,
    Violated,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DimensionBound {
    pub p: i64,
    pub verdict: BoundVerdict,
}

/// `p(k) = k² − k(n+2) + (n²+n+2)/2` and whether `d ≤ p(k)`.
pub fn dimension_bound(n: usize, k: usize, d: usize) -> Result<DimensionBound> {
    if k < 2 || k > n {
        return Err(Error::BadRank { n, k });
    }
    let (n, k) = (n as i64, k as i64);
    let p = k * k - k * (n + 2) + (n * n + n + 2) / 2;
    let verdict = if (d as i64) <= p { BoundVerdict::Consistent } else { BoundVerdict::Violated };
    Ok(DimensionBound { p, verdict })
}

fn skew_to_vec(a: &SquareMatrix) -> DVector<f64> {
    let n = a.dim();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(a.get(i, j));
        }
    }
    DVector::from_vec(out)
}

fn vec_to_skew(x: &DVector<f64>, n: usize) -> SquareMatrix {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)] = x[k];
            m[(j, i)] = -x[k];
            k += 1;
        }
    }
    SquareMatrix::new(m).expect("finite")
}

/// Dimension of the Lie algebra generated by skew-symmetric matrices.
pub fn lie_dimension(lie_generators: &[SquareMatrix]) -> Result<usize> {
    const DEPTH: usize = 8;
    let Some(first) = lie_generators.first() else {
        return Ok(0);
    };
    let n = first.dim();
    for a in lie_generators {
        if a.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.dim() });
        }
        let defect = a.skew_defect();
        if defect > crate::tolerances::SKEW_TOL {
            return Err(Error::NotSkewSymmetric { defect });
        }
    }
    let bound = n * (n - 1) / 2;
    if bound == 0 {
        return Ok(0);
    }
    let mut vecs: Vec<DVector<f64>> = lie_generators.iter().map(skew_to_vec).filter(|v| v.amax() > 0.0).collect();
    if vecs.is_empty() {
        return Ok(0);
    }
    let mut dim = span_basis(&vecs, 1e-9)?.dim;
    for _ in 0..DEPTH {
        let basis = span_basis(&vecs, 1e-9)?;
        let mats: Vec<SquareMatrix> = basis.vectors.iter().map(|x| vec_to_skew(x, n)).collect();
        let mut next = basis.vectors.clone();
        for i in 0..mats.len() {
            for j in i + 1..mats.len() {
                let c = commutator(&mats[i], &mats[j])?;
                if c.max_abs() > 1e-14 {
                    next.push(skew_to_vec(&c));
                }
            }
        }
        let new_dim = span_basis(&next, 1e-9)?.dim;
        if new_dim > bound {
            return Err(Error::BracketNotClosed { bound });
        }
        if new_dim == dim {
            return Ok(dim);
        }
        dim = new_dim;
        vecs = next;
    }
    Err(Error::BracketNotClosed { bound })
}

/// `max |⟨A w, z⟩|` over generators `A` and basis vectors `z` of `l`.
pub fn infinitesimal_flat_check(lie_generators: &[SquareMatrix], w: &DVector<f64>, l: &SubspaceBasis) -> f64 {
    let mut worst: f64 = 0.0;
    for a in lie_generators {
        let aw = a.apply(w);
        for z in &l.vectors {
            worst = worst.max(aw.dot(z).abs());
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerProductEstimate {
    /// Monte Carlo estimate of `∫ ⟨A u, B u⟩` under the normalised hull measure.
    pub gram: DMatrix<f64>,
    /// Standard error of each Gram entry.
    pub std_error: DMatrix<f64>,
    /// Affine dimension of the orbit hull.
    pub hull_dim: usize,
    pub samples: usize,
}

/// Hull points `Σ λᵢ pᵢ` with Dirichlet(1) weights over `n+1` orbit points
/// chosen at random (all points when the orbit is smaller).
pub fn hull_samples(orbit: &Orbit, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = orbit.dim();
    let m = orbit.len();
    let k = (n + 1).min(m);
    (0..count)
        .map(|_| {
            let idx: Vec<usize> =
                if m <= n + 1 { (0..m).collect() } else { rand::seq::index::sample(&mut rng, m, k).into_vec() };
            let weights: Vec<f64> = (0..idx.len()).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = weights.iter().sum();
            let mut u = DVector::zeros(n);
            for (&i, &wt) in idx.iter().zip(&weights) {
                u.axpy(wt / total, &orbit.points[i], 1.0);
            }
            u
        })
        .collect()
}

pub fn hull_dimension(orbit: &Orbit) -> usize {
    let n = orbit.dim();
    let mean = orbit.points.iter().fold(DVector::zeros(n), |a, p| a + p) / orbit.len() as f64;
    let centered: Vec<DVector<f64>> = orbit.points.iter().map(|p| p - &mean).collect();
    if centered.iter().all(|c| c.amax() < 1e-12) {
        return 0;
    }
    span_basis(&centered, 1e-8).map(|b| b.dim).unwrap_or(0)
}

/// Monte Carlo estimate of the averaged inner product on the Lie algebra.
pub fn ad_invariant_inner(
    lie_generators: &[SquareMatrix],
    orbit: &Orbit,
    mc_samples: usize,
    seed: u64,
) -> Result<InnerProductEstimate> {
    if lie_generators.is_empty() {
        return Err(Error::NoLieGenerators);
    }
    if orbit.is_empty() {
        return Err(Error::EmptyOrbit);
    }
    let hull_dim = hull_dimension(orbit);
    if hull_dim == 0 {
        return Err(Error::DegenerateHull { dim: 0 });
    }
    let us = hull_samples(orbit, mc_samples.max(2), seed);
    let k = lie_generators.len();
    let mut sum = DMatrix::<f64>::zeros(k, k);
    let mut sum2 = DMatrix::<f64>::zeros(k, k);
    for u in &us {
        let au: Vec<DVector<f64>> = lie_generators.iter().map(|a| a.apply(u)).collect();
        for i in 0..k {
            for j in 0..k {
                let x = au[i].dot(&au[j]);
                sum[(i, j)] += x;
                sum2[(i, j)] += x * x;
            }
        }
    }
    let m = us.len() as f64;
    let gram = &sum / m;
    let std_error = DMatrix::from_fn(k, k, |i, j| {
        let var = (sum2[(i, j)] / m - gram[(i, j)].powi(2)).max(0.0) * m / (m - 1.0);
        (var / m).sqrt()
    });
    Ok(InnerProductEstimate { gram, std_error, hull_dim, samples: us.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_model::{builtin_spec, rank2_d3_generators, sample_group};
    use serde_json::{json, Value};
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn dimension_bound_examples() {
        let b = dimension_bound(4, 2, 3).unwrap();
        assert_eq!((b.p, b.verdict), (3, BoundVerdict::Consistent));
        assert_eq!(dimension_bound(3, 2, 0).unwrap().p, 1);
        assert_eq!(dimension_bound(2, 2, 0).unwrap().p, 0);
        assert_eq!(dimension_bound(2, 2, 1).unwrap().verdict, BoundVerdict::Violated);
        assert!(matches!(dimension_bound(4, 1, 0), Err(Error::BadRank { .. })));
        assert!(matches!(dimension_bound(4, 5, 0), Err(Error::BadRank { .. })));
        // p(2) = p(n) = (n−1)(n−2)/2.
        for n in 2..10 {
            let q = ((n - 1) * (n - 2) / 2) as i64;
            assert_eq!(dimension_bound(n, 2, 0).unwrap().p, q);
            assert_eq!(dimension_bound(n, n, 0).unwrap().p, q);
        }
    }

    #[test]
    fn lie_dimension_examples() {
        let [m1, m2, _] = rank2_d3_generators(1.0, 1.0, 0.0, 0.0);
        assert_eq!(lie_dimension(std::slice::from_ref(&m1)).unwrap(), 1);
        assert_eq!(lie_dimension(&[m1, m2]).unwrap(), 3);
        let t = builtin_spec("torus_swap_4d", &Value::Null).unwrap();
        assert_eq!(lie_dimension(&t.lie_generators).unwrap(), 2);
        assert_eq!(lie_dimension(&[SquareMatrix::zeros(3)]).unwrap(), 0);
    }

    #[test]
    fn infinitesimal_check_examples() {
        let l = span_basis(&[v(&[0.0, 0.0, 1.0])], 1e-8).unwrap();
        assert_eq!(infinitesimal_flat_check(&[SquareMatrix::zeros(3)], &v(&[0.0, 0.0, 1.0]), &l), 0.0);
        let so3 = builtin_spec("so3_axis_fix", &Value::Null).unwrap();
        assert_eq!(infinitesimal_flat_check(&so3.lie_generators, &v(&[0.0, 0.0, 1.0]), &l), 0.0);
    }

    #[test]
    fn irreducibility_examples() {
        let sign = sample_group(
            &builtin_spec("block_reducible", &json!({"blocks": [{"size": 1, "group": "sign"}, {"size": 1}]})).unwrap(),
            0.1,
            0,
        )
        .unwrap();
        let rep = irreducibility_test(&sign, 16, 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Reducible);
        assert!(rep.max_r >= SQRT2 - 1e-6);

        let d5 = sample_group(&builtin_spec("dihedral", &json!({"k": 5})).unwrap(), 0.1, 0).unwrap();
        let rep = irreducibility_test(&d5, 32, 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Irreducible);
        // LP oracle: the regular pentagon's smallest support is cos(π/5).
        assert!((rep.chebyshev_radius - (PI / 5.0).cos()).abs() < 1e-12);
        assert_eq!(rep.sqrt2_reducible, rep.support_reducible);

        let triv = sample_group(&builtin_spec("trivial", &json!({"n": 3})).unwrap(), 0.1, 0).unwrap();
        assert_eq!(irreducibility_test(&triv, 8, 1).unwrap().verdict, Verdict::Reducible);
    }

    #[test]
    fn flat_subspace_examples() {
        let triv = sample_group(&builtin_spec("trivial", &json!({"n": 3})).unwrap(), 0.1, 0).unwrap();
        let o = orbit(&triv, &v(&[1.0, 0.0, 0.0])).unwrap();
        let cfg = SolverConfig::for_dim(3);
        let m = solve_maximin(&o, &cfg).unwrap();
        assert_eq!(flat_subspace(&o, &m, 1e-7, 1e-8).unwrap().dim, 1);

        let c4 = sample_group(&builtin_spec("cyclic", &json!({"k": 4})).unwrap(), 0.1, 0).unwrap();
        let o = orbit(&c4, &v(&[1.0, 0.0])).unwrap();
        let m = solve_maximin(&o, &SolverConfig::for_dim(2)).unwrap();
        let f = flat_subspace(&o, &m, 1e-7, 1e-8).unwrap();
        assert_eq!(f.dim, 2);
        assert_eq!(f.witnesses.len(), 2);
        assert!(f.basis.residual(&m.w) < 1e-8);

        let mut minimax = m.clone();
        minimax.kind = Kind::Minimax;
        assert!(matches!(flat_subspace(&o, &minimax, 1e-7, 1e-8), Err(Error::InconsistentInput(_))));
    }

    #[test]
    fn cyclic_rank_and_ratio() {
        for k in [3, 4, 6] {
            let spec = builtin_spec("cyclic", &json!({"k": k})).unwrap();
            let cfg = SolverConfig::for_dim(2);
            assert_eq!(rank(&spec, 8, 0.1, 1, &cfg).unwrap().rank, 2);
            let rep = lazy_busy_search(&spec, 0.1, 1, &cfg, &LazySearchConfig { probes: 8, ..LazySearchConfig::for_dim(2) })
                .unwrap();
            let expect = 2.0 * (PI / (2.0 * k as f64)).sin();
            assert!((rep.big_r - expect).abs() < 1e-7 && (rep.r - expect).abs() < 1e-7, "k={k} {rep:?}");
        }
    }

    #[test]
    fn so3_axis_fix_rank_three() {
        let spec = builtin_spec("so3_axis_fix", &Value::Null).unwrap();
        let rep = rank(&spec, 6, 0.02, 1, &SolverConfig::for_dim(3)).unwrap();
        assert_eq!(rep.rank, 3);
    }

    #[test]
    fn gram_is_symmetric_and_positive() {
        let spec = builtin_spec("torus_swap_4d", &Value::Null).unwrap();
        let s = sample_group(&spec, 2.0 * PI / 16.0, 3).unwrap();
        let a = PI / 8.0;
        let o = orbit(&s, &v(&[a.cos(), 0.0, a.sin(), 0.0])).unwrap();
        let est = ad_invariant_inner(&spec.lie_generators, &o, 2000, 5).unwrap();
        assert_eq!(est.gram[(0, 1)], est.gram[(1, 0)]);
        assert!(est.gram[(0, 0)] > 0.0 && est.gram.clone().cholesky().is_some());
        assert_eq!(est.hull_dim, 4);
    }
}
