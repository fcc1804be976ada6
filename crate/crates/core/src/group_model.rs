//! Group specifications, finite closure, sampling of compact Lie subgroups
//! of O(n), and orbits.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dedup::TolerantIndex;
use crate::error::{Error, Result};
use crate::matrix_kernel::{block_diag, commutator, expm_taylor, rotation2, SquareMatrix};
use crate::spatial::KdTree;
use crate::tolerances::{CLOSURE_CAP, LIE_SAMPLE_CAP, COMMUTE_TOL, DEDUP_TOL, ORTHO_TOL, SKEW_TOL, UNIT_TOL};

/// Unit components of the transitive groups on spheres. Kept as a name
/// registry only; none of these is implemented as a builtin.
pub const TRANSITIVE_GROUPS: &[&str] = &[
    "SO(n)",
    "U(n/2)",
    "SU(n/2)",
    "Sp(n/4)",
    "Sp(n/4)·Sp(1)",
    "Sp(n/4)·U(1)",
    "G2 (n = 7)",
    "Spin(7) (n = 8)",
    "Spin(9) (n = 16)",
];

/// Names accepted by [`builtin_spec`].
pub const BUILTINS: &[&str] = &[
    "so3_axis_fix",
    "o3_axis_fix",
    "cyclic",
    "dihedral",
    "block_reducible",
    "torus_swap_4d",
    "d1_4d",
    "rank2_d3",
    "trivial",
    "so2",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltinRef {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

/// Declarative description of a closed subgroup G ⊂ O(n).
///
/// `G⁰` is generated by `lie_generators`; `coset_reps` together with
/// `finite_generators` generate the component group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub n: usize,
    pub finite_generators: Vec<SquareMatrix>,
    pub lie_generators: Vec<SquareMatrix>,
    pub coset_reps: Vec<SquareMatrix>,
    pub builtin: Option<BuiltinRef>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    finite_generators: Vec<Vec<f64>>,
    #[serde(default)]
    lie_generators: Vec<Vec<f64>>,
    #[serde(default)]
    coset_reps: Vec<Vec<f64>>,
    #[serde(default)]
    builtin: Option<BuiltinRef>,
}

impl GroupSpec {
    pub fn new(
        n: usize,
        finite_generators: Vec<SquareMatrix>,
        lie_generators: Vec<SquareMatrix>,
        coset_reps: Vec<SquareMatrix>,
    ) -> Result<Self> {
        let coset_reps = if coset_reps.is_empty() { vec![SquareMatrix::identity(n)] } else { coset_reps };
        let spec = Self { n, finite_generators, lie_generators, coset_reps, builtin: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        let all = self.finite_generators.iter().chain(&self.lie_generators).chain(&self.coset_reps);
        for m in all {
            if m.dim() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: m.dim() });
            }
        }
        for m in self.finite_generators.iter().chain(&self.coset_reps) {
            let defect = m.orthogonality_defect();
            if defect > ORTHO_TOL {
                return Err(Error::NotOrthogonal { defect });
            }
        }
        for a in &self.lie_generators {
            let defect = a.skew_defect();
            if defect > SKEW_TOL {
                return Err(Error::NotSkewSymmetric { defect });
            }
        }
        Ok(())
    }

    /// Parses and validates the JSON group-spec format. A `builtin` entry is
    /// expanded first; explicitly listed matrices are appended to it.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text)?;
        let mut spec = match &raw.builtin {
            Some(b) => builtin_spec(&b.name, &b.params)?,
            None => {
                let n = raw.n.ok_or_else(|| Error::InvalidSpec("missing field `n`".into()))?;
                Self { n, finite_generators: vec![], lie_generators: vec![], coset_reps: vec![], builtin: None }
            }
        };
        if let Some(n) = raw.n {
            if n != spec.n {
                return Err(Error::DimensionMismatch { expected: spec.n, got: n });
            }
        }
        let n = spec.n;
        let parse = |rows: &[Vec<f64>]| -> Result<Vec<SquareMatrix>> {
            rows.iter().map(|r| SquareMatrix::from_row_major(n, r)).collect()
        };
        spec.finite_generators.extend(parse(&raw.finite_generators)?);
        spec.lie_generators.extend(parse(&raw.lie_generators)?);
        let reps = parse(&raw.coset_reps)?;
        if !reps.is_empty() {
            if raw.builtin.is_some() {
                spec.coset_reps.extend(reps);
            } else {
                spec.coset_reps = reps;
            }
        }
        if spec.coset_reps.is_empty() {
            spec.coset_reps.push(SquareMatrix::identity(n));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Value {
        let rows = |ms: &[SquareMatrix]| ms.iter().map(SquareMatrix::to_row_major).collect::<Vec<_>>();
        json!({
            "n": self.n,
            "finite_generators": rows(&self.finite_generators),
            "lie_generators": rows(&self.lie_generators),
            "coset_reps": rows(&self.coset_reps),
            "builtin": self.builtin,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.lie_generators.iter().all(|a| a.max_abs() == 0.0)
    }
}

/// Finite set of orthogonal matrices approximating a group.
#[derive(Clone, Debug)]
pub struct GroupSample {
    pub n: usize,
    pub elements: Vec<SquareMatrix>,
    /// Operator-norm distance bound from any group element to the nearest sample.
    pub covering_resolution: f64,
    /// The group is finite and `elements` lists all of it.
    pub exact: bool,
    pub resolution: Option<f64>,
    pub seed: Option<u64>,
}

impl GroupSample {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Breadth-first product closure of `generators`.
pub fn generate_finite_closure(generators: &[SquareMatrix], dedup_tol: f64, cap: usize) -> Result<GroupSample> {
    let n = generators.first().map(SquareMatrix::dim).ok_or(Error::EmptyInput)?;
    if cap == 0 {
        return Err(Error::BadParams("cap must be at least 1".into()));
    }
    for g in generators {
        if g.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.dim() });
        }
        let defect = g.orthogonality_defect();
        if defect > ORTHO_TOL {
            return Err(Error::NotOrthogonal { defect });
        }
    }
    let mut index = TolerantIndex::new(dedup_tol);
    let mut elements = vec![SquareMatrix::identity(n)];
    index.insert(&elements[0].to_row_major());
    let mut head = 0;
    while head < elements.len() {
        let e = elements[head].clone();
        head += 1;
        for g in generators {
            let p = e.matmul(g);
            if index.insert(&p.to_row_major()).1 {
                elements.push(p);
                if elements.len() > cap {
                    return Err(Error::CapExceeded { count: elements.len() });
                }
            }
        }
    }
    Ok(GroupSample { n, elements, covering_resolution: 0.0, exact: true, resolution: None, seed: None })
}

/// Samples `G = ⋃ r·G⁰` over a parameter grid of the Lie generators.
pub fn sample_lie_group(spec: &GroupSpec, resolution: f64, seed: u64) -> Result<GroupSample> {
    let gens: Vec<&SquareMatrix> = spec.lie_generators.iter().filter(|a| a.max_abs() > 0.0).collect();
    if gens.is_empty() {
        return Err(Error::NoLieGenerators);
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::BadParams(format!("resolution must be positive, got {resolution}")));
    }
    let commuting = gens
        .iter()
        .enumerate()
        .all(|(i, a)| gens[i + 1..].iter().all(|b| commutator(a, b).map(|c| c.max_abs() <= COMMUTE_TOL).unwrap_or(false)));

    let (identity_part, covering) = if commuting {
        match block_torus(&gens, resolution) {
            Some(r) => r,
            None => product_grid(&gens, resolution, None)?,
        }
    } else {
        product_grid(&gens, resolution, Some(seed))?
    };

    let mut rep_gens = spec.coset_reps.clone();
    rep_gens.extend(spec.finite_generators.iter().cloned());
    let reps = generate_finite_closure(&rep_gens, DEDUP_TOL, CLOSURE_CAP)?.elements;

    let mut index = TolerantIndex::new(DEDUP_TOL);
    let mut elements = Vec::with_capacity(reps.len() * identity_part.len() * 2);
    let mut push = |m: SquareMatrix, elements: &mut Vec<SquareMatrix>| {
        if index.insert(&m.to_row_major()).1 {
            elements.push(m);
        }
    };
    push(SquareMatrix::identity(spec.n), &mut elements);
    for r in &reps {
        let products: Vec<SquareMatrix> = identity_part.par_iter().map(|g| r.matmul(g)).collect();
        for p in products {
            push(p, &mut elements);
        }
    }
    let inverses: Vec<SquareMatrix> = elements.iter().map(SquareMatrix::transpose).collect();
    for m in inverses {
        push(m, &mut elements);
    }
    Ok(GroupSample {
        n: spec.n,
        elements,
        covering_resolution: covering,
        exact: false,
        resolution: Some(resolution),
        seed: Some(seed),
    })
}

/// Samples a group: exact closure when there are no Lie generators,
/// otherwise a Lie sample.
pub fn sample_group(spec: &GroupSpec, resolution: f64, seed: u64) -> Result<GroupSample> {
    if spec.is_finite() {
        let mut gens = spec.finite_generators.clone();
        gens.extend(spec.coset_reps.iter().cloned());
        if gens.is_empty() {
            gens.push(SquareMatrix::identity(spec.n));
        }
        generate_finite_closure(&gens, DEDUP_TOL, CLOSURE_CAP)
    } else {
        sample_lie_group(spec, resolution, seed)
    }
}

/// Commuting generators that are simultaneously block-diagonal with as many
/// independent 2×2 rotation blocks as generators parametrise a full torus;
/// sample it directly on a uniform angle grid.
fn block_torus(gens: &[&SquareMatrix], resolution: f64) -> Option<(Vec<SquareMatrix>, f64)> {
    let n = gens[0].dim();
    let (q, blocks) = common_rotation_blocks(gens)?;
    let k = gens.len();
    // Frequency matrix W (blocks × generators).
    let mut w = DMatrix::<f64>::zeros(blocks.len(), k);
    for (i, a) in gens.iter().enumerate() {
        let b = q.transpose() * a.as_matrix() * &q;
        let mut resid = b.clone();
        for (bi, &j) in blocks.iter().enumerate() {
            w[(bi, i)] = b[(j + 1, j)];
            resid[(j + 1, j)] = 0.0;
            resid[(j, j + 1)] = 0.0;
        }
        if resid.amax() > 1e-9 * a.max_abs().max(1.0) {
            return None;
        }
    }
    let active: Vec<usize> = (0..blocks.len()).filter(|&bi| w.row(bi).amax() > 1e-12).collect();
    let per_axis = grid_count(2.0 * PI / resolution);
    let step = 2.0 * PI / per_axis as f64;
    if active.len() == k {
        let sub = DMatrix::from_fn(k, k, |r, c| w[(active[r], c)]);
        if sub.clone().svd(false, false).singular_values.min() < 1e-9 * sub.amax() {
            return None;
        }
        // exp(Σθᵢ Aᵢ) = I exactly on the lattice W θ ∈ 2πℤᵏ, so the group is
        // the full torus of rotation angles on the active blocks.
        let total = per_axis.checked_pow(k as u32)?;
        if total > LIE_SAMPLE_CAP {
            return None;
        }
        let elems = (0..total)
            .into_par_iter()
            .map(|mut idx| {
                let mut m = DMatrix::<f64>::identity(n, n);
                for &bi in &active {
                    let angle = (idx % per_axis) as f64 * step;
                    idx /= per_axis;
                    let j = blocks[bi];
                    let (s, c) = angle.sin_cos();
                    m[(j, j)] = c;
                    m[(j, j + 1)] = -s;
                    m[(j + 1, j)] = s;
                    m[(j + 1, j + 1)] = c;
                }
                SquareMatrix::new(&q * m * q.transpose()).expect("finite")
            })
            .collect();
        return Some((elems, f64::max(1.0, k as f64 / 2.0) * step));
    }
    if k == 1 {
        // One-parameter subgroup with several blocks: closed when the block
        // frequencies are commensurable; the period then covers every block.
        let freqs: Vec<f64> = active.iter().map(|&bi| w[(bi, 0)].abs()).collect();
        let wmin = freqs.iter().copied().fold(f64::INFINITY, f64::min);
        let mut lcm = 1u64;
        for f in &freqs {
            let (_, den) = rational_approx(f / wmin, 64)?;
            lcm = lcm / gcd(lcm, den) * den;
        }
        let period = 2.0 * PI * lcm as f64 / wmin;
        let wmax = freqs.iter().copied().fold(0.0, f64::max);
        let count = grid_count(period * wmax / resolution);
        if count > LIE_SAMPLE_CAP {
            return None;
        }
        let dt = period / count as f64;
        let a = gens[0].as_matrix();
        let elems = (0..count)
            .into_par_iter()
            .map(|i| SquareMatrix::new(expm_taylor(&(a * (i as f64 * dt)))).expect("finite"))
            .collect();
        return Some((elems, dt * wmax));
    }
    None
}

/// `ceil(x)` with a little slack so that exact ratios like 2π/(2π/1024)
/// do not round up to an extra grid point.
fn grid_count(x: f64) -> usize {
    (x * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Continued-fraction approximation `p/q ≈ x` with `q ≤ max_den`, accepted
/// only when accurate to 1e-9.
fn rational_approx(x: f64, max_den: u64) -> Option<(u64, u64)> {
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..32 {
        let a = r.floor();
        let (h2, k2) = (a as u64 * h1 + h0, a as u64 * k1 + k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= 1e-9 * x.max(1.0) {
            return Some((h1, k1));
        }
        let frac = r - a;
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Orthogonal `Q` and the start rows of the 2×2 rotation blocks of a generic
/// combination of the commuting generators.
fn common_rotation_blocks(gens: &[&SquareMatrix]) -> Option<(DMatrix<f64>, Vec<usize>)> {
    let n = gens[0].dim();
    let mut c = DMatrix::<f64>::zeros(n, n);
    for (i, a) in gens.iter().enumerate() {
        let coeff = 1.0 + (i as f64 * 0.618_033_988_749_895).fract() * 0.731;
        c += a.as_matrix() * coeff;
    }
    let (q, t) = c.clone().try_schur(1e-14, 10_000)?.unpack();
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let mut blocks = Vec::new();
    let mut j = 0;
    while j < n {
        if j + 1 < n && t[(j + 1, j)].abs() > 1e-10 * scale {
            blocks.push(j);
            j += 2;
        } else {
            j += 1;
        }
    }
    // Normalise every block to the form ω [[0, -1], [1, 0]] with ω > 0.
    let mut q = q;
    for &j in &blocks {
        if t[(j + 1, j)] < 0.0 {
            let col = q.column(j + 1).clone_owned();
            q.set_column(j + 1, &(-col));
        }
    }
    Some((q, blocks))
}

/// Fixed-order products of one-parameter subgroups over a per-generator
/// grid, optionally followed by four times as many seeded random words.
fn product_grid(gens: &[&SquareMatrix], resolution: f64, seed: Option<u64>) -> Result<(Vec<SquareMatrix>, f64)> {
    let n = gens[0].dim();
    let mut axes: Vec<Vec<DMatrix<f64>>> = Vec::new();
    let mut periods = Vec::new();
    let mut covering: f64 = 0.0;
    for a in gens {
        let sv = a.as_matrix().clone().singular_values();
        let norm = sv.max();
        let wmin = sv.iter().copied().filter(|&s| s > 1e-9 * norm).fold(f64::INFINITY, f64::min);
        let period = 2.0 * PI / wmin;
        let count = grid_count(period * norm / resolution);
        let planned = axes.iter().map(Vec::len).product::<usize>().saturating_mul(count);
        if planned > LIE_SAMPLE_CAP {
            return Err(Error::CapExceeded { count: planned });
        }
        let dt = period / count as f64;
        covering = covering.max(dt * norm);
        periods.push(period);
        axes.push((0..count).map(|i| expm_taylor(&(a.as_matrix() * (i as f64 * dt)))).collect());
    }
    let covering = f64::max(1.0, gens.len() as f64 / 2.0) * covering;
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
    let with_words = total.saturating_mul(if seed.is_some() { 5 } else { 1 });
    if with_words > LIE_SAMPLE_CAP {
        return Err(Error::CapExceeded { count: with_words });
    }
    let mut elems: Vec<SquareMatrix> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut m = DMatrix::<f64>::identity(n, n);
            for (axis, &size) in axes.iter().zip(&sizes) {
                m *= &axis[idx % size];
                idx /= size;
            }
            SquareMatrix::new(m).expect("finite")
        })
        .collect();
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<Vec<(usize, f64)>> = (0..4 * total)
            .map(|_| {
                let len = rng.random_range(1..=4);
                (0..len)
                    .map(|_| {
                        let g = rng.random_range(0..gens.len());
                        (g, rng.random_range(0.0..periods[g]))
                    })
                    .collect()
            })
            .collect();
        let random: Vec<SquareMatrix> = words
            .par_iter()
            .map(|word| {
                let mut m = DMatrix::<f64>::identity(n, n);
                for &(g, t) in word {
                    m *= expm_taylor(&(gens[g].as_matrix() * t));
                }
                SquareMatrix::new(m).expect("finite")
            })
            .collect();
        elems.extend(random);
    }
    Ok((elems, covering))
}

/// The orbit `{g v}` of a unit vector under a group sample.
#[derive(Clone, Debug)]
pub struct Orbit {
    pub base: DVector<f64>,
    pub points: Vec<DVector<f64>>,
    pub element_index: Vec<usize>,
    pub covering_resolution: f64,
    tree: OnceLock<KdTree>,
}

impl Orbit {
    /// Orbit from explicit points; `element_index` is the identity map.
    pub fn from_points(base: DVector<f64>, points: Vec<DVector<f64>>, covering_resolution: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyOrbit);
        }
        let n = base.len();
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        let element_index = (0..points.len()).collect();
        Ok(Self { base, points, element_index, covering_resolution, tree: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tree(&self) -> &KdTree {
        self.tree.get_or_init(|| {
            let coords: Vec<f64> = self.points.iter().flat_map(|p| p.iter().copied()).collect();
            KdTree::build(&coords, self.dim())
        })
    }
}

/// Applies every sample element to `v`, merging points closer than the
/// default dedup tolerance.
pub fn orbit(sample: &GroupSample, v: &DVector<f64>) -> Result<Orbit> {
    orbit_with_tol(sample, v, DEDUP_TOL)
}

pub fn orbit_with_tol(sample: &GroupSample, v: &DVector<f64>, dedup_tol: f64) -> Result<Orbit> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if v.len() != sample.n {
        return Err(Error::DimensionMismatch { expected: sample.n, got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitVector { norm });
    }
    let images: Vec<DVector<f64>> = sample.elements.par_iter().map(|g| g.apply(v)).collect();
    let mut index = TolerantIndex::new(dedup_tol);
    let mut points = Vec::new();
    let mut element_index = Vec::new();
    for (i, p) in images.into_iter().enumerate() {
        if index.insert(p.as_slice()).1 {
            points.push(p);
            element_index.push(i);
        }
    }
    Ok(Orbit {
        base: v.clone(),
        points,
        element_index,
        covering_resolution: sample.covering_resolution,
        tree: OnceLock::new(),
    })
}

fn param_f64(params: &Value, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => v.as_f64().ok_or_else(|| Error::BadParams(format!("`{key}` must be a number"))),
        None => default.ok_or_else(|| Error::BadParams(format!("missing parameter `{key}`"))),
    }
}

fn param_usize(params: &Value, key: &str, default: Option<usize>) -> Result<usize> {
    match params.get(key) {
        Some(v) => v
            .as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| Error::BadParams(format!("`{key}` must be a non-negative integer"))),
        None => default.ok_or_else(|| Error::BadParams(format!("missing parameter `{key}`"))),
    }
}

fn param_vec(params: &Value, key: &str) -> Result<Option<Vec<f64>>> {
    match params.get(key) {
        None => Ok(None),
        Some(Value::Array(xs)) => xs
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::BadParams(format!("`{key}` must hold numbers"))))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(_) => Err(Error::BadParams(format!("`{key}` must be an array"))),
    }
}

fn j2() -> SquareMatrix {
    SquareMatrix::from_row_major(2, &[0., -1., 1., 0.]).expect("static")
}

fn diag(entries: &[f64]) -> SquareMatrix {
    SquareMatrix::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries))).expect("finite")
}

/// Embeds `m` as the diagonal block starting at `offset` of an n×n matrix,
/// padding with `fill` (identity for group elements, zero for generators).
fn embed(m: &SquareMatrix, offset: usize, n: usize, identity_fill: bool) -> SquareMatrix {
    let mut out = if identity_fill { DMatrix::identity(n, n) } else { DMatrix::zeros(n, n) };
    let k = m.dim();
    out.view_mut((offset, offset), (k, k)).copy_from(m.as_matrix());
    SquareMatrix::new(out).expect("finite")
}

/// Signed permutation matrices of the 4×4 coset list of the block-swap
/// construction, in their canonical order.
pub fn block_swap_cosets() -> Vec<SquareMatrix> {
    let rows: [[f64; 16]; 8] = [
        [1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.],
        [1., 0., 0., 0., 0., -1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.],
        [1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1.],
        [1., 0., 0., 0., 0., -1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1.],
        [0., 0., 1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 1., 0., 0.],
        [0., 0., 1., 0., 0., 0., 0., -1., 1., 0., 0., 0., 0., 1., 0., 0.],
        [0., 0., 1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., -1., 0., 0.],
        [0., 0., 1., 0., 0., 0., 0., -1., 1., 0., 0., 0., 0., -1., 0., 0.],
    ];
    rows.iter().map(|r| SquareMatrix::from_row_major(4, r).expect("static")).collect()
}

/// The three generators `M₁, M₂, M₃ = [M₁, M₂]` of the rank-2,
/// dimension-3 family in O(4).
pub fn rank2_d3_generators(x: f64, y: f64, t: f64, s: f64) -> [SquareMatrix; 3] {
    let m1 = SquareMatrix::from_row_major(4, &[0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., -1., 0.])
        .expect("static");
    let m2 = SquareMatrix::from_row_major(
        4,
        &[0., 0., x, y, 0., 0., t * x, t * y, -x, -t * x, 0., s, -y, -t * y, -s, 0.],
    )
    .expect("finite");
    let m3 = SquareMatrix::from_row_major(
        4,
        &[0., 0., y, -x, 0., 0., t * y, -t * x, -y, -t * y, 0., 0., x, t * x, 0., 0.],
    )
    .expect("finite");
    [m1, m2, m3]
}

/// Parts of one block of `block_reducible`.
struct Block {
    size: usize,
    finite: Vec<SquareMatrix>,
    lie: Vec<SquareMatrix>,
}

fn signed_permutation_generators(m: usize) -> Vec<SquareMatrix> {
    let mut gens = Vec::new();
    for i in 0..m - 1 {
        let mut p = DMatrix::<f64>::identity(m, m);
        p.swap_rows(i, i + 1);
        gens.push(SquareMatrix::new(p).expect("finite"));
    }
    let mut sign = vec![1.0; m];
    sign[0] = -1.0;
    gens.push(diag(&sign));
    gens
}

fn parse_block(entry: &Value) -> Result<Block> {
    if let Some(size) = entry.as_u64() {
        let size = size as usize;
        return match size {
            0 => Err(Error::BadParams("block size must be positive".into())),
            1 => Ok(Block { size, finite: vec![diag(&[-1.0])], lie: vec![] }),
            2 => Ok(Block { size, finite: dihedral_generators(5), lie: vec![] }),
            _ => Ok(Block { size, finite: signed_permutation_generators(size), lie: vec![] }),
        };
    }
    let size = param_usize(entry, "size", None)?;
    if size == 0 {
        return Err(Error::BadParams("block size must be positive".into()));
    }
    let kind = entry.get("group").and_then(Value::as_str).unwrap_or("trivial");
    let k = param_usize(entry, "k", Some(5))?;
    let need2 = |what: &str| {
        if size == 2 {
            Ok(())
        } else {
            Err(Error::BadParams(format!("block group `{what}` needs size 2")))
        }
    };
    match kind {
        "trivial" => Ok(Block { size, finite: vec![], lie: vec![] }),
        "sign" => {
            Ok(Block { size, finite: vec![SquareMatrix::identity(size).scale(-1.0)], lie: vec![] })
        }
        "dihedral" => {
            need2(kind)?;
            Ok(Block { size, finite: dihedral_generators(k.max(1)), lie: vec![] })
        }
        "cyclic" => {
            need2(kind)?;
            Ok(Block { size, finite: vec![rotation2(2.0 * PI / k.max(1) as f64)], lie: vec![] })
        }
        "rotation" => match size {
            2 => Ok(Block { size, finite: vec![], lie: vec![j2()] }),
            _ => {
                let mut lie = Vec::new();
                for i in 0..size {
                    for j in i + 1..size {
                        let mut a = DMatrix::<f64>::zeros(size, size);
                        a[(i, j)] = -1.0;
                        a[(j, i)] = 1.0;
                        lie.push(SquareMatrix::new(a).expect("finite"));
                    }
                }
                Ok(Block { size, finite: vec![], lie })
            }
        },
        "signed_perm" => Ok(Block { size, finite: signed_permutation_generators(size.max(2)), lie: vec![] }),
        other => Err(Error::BadParams(format!("unknown block group `{other}`"))),
    }
}

fn dihedral_generators(k: usize) -> Vec<SquareMatrix> {
    vec![rotation2(2.0 * PI / k as f64), diag(&[1.0, -1.0])]
}

fn torus_generators(omega: &[f64]) -> Vec<SquareMatrix> {
    omega
        .chunks(2)
        .map(|w| block_diag(&[j2().scale(w[0]), j2().scale(w[1])]))
        .collect()
}

/// Expands a named builtin group.
///
/// | name | params |
/// |---|---|
/// | `so3_axis_fix`, `o3_axis_fix`, `so2` | none |
/// | `cyclic`, `dihedral` | `k` |
/// | `trivial` | `n` (default 2) |
/// | `block_reducible` | `blocks`: sizes or `{size, group, k}` objects |
/// | `torus_swap_4d` | `omega` (4 reals, default `[1, √2, √3, 1]`) |
/// | `d1_4d` | `omega` (2 reals, default `[1, 2]`), `cosets` (indices 0..8) |
/// | `rank2_d3` | `x`, `y`, `t`, `s` (defaults 1, 1, 0, 0) |
pub fn builtin_spec(name: &str, params: &Value) -> Result<GroupSpec> {
    let p = if params.is_null() { &Value::Object(Default::default()) } else { params };
    let bref = Some(BuiltinRef { name: name.to_string(), params: p.clone() });
    let mut spec = match name {
        "so3_axis_fix" | "o3_axis_fix" => {
            let a = embed(&j2(), 0, 3, false);
            let mut reps = vec![SquareMatrix::identity(3)];
            if name == "o3_axis_fix" {
                reps.push(diag(&[1.0, 1.0, -1.0]));
            }
            GroupSpec { n: 3, finite_generators: vec![], lie_generators: vec![a], coset_reps: reps, builtin: None }
        }
        "so2" => GroupSpec {
            n: 2,
            finite_generators: vec![],
            lie_generators: vec![j2()],
            coset_reps: vec![SquareMatrix::identity(2)],
            builtin: None,
        },
        "trivial" => {
            let n = param_usize(p, "n", Some(2))?;
            if n == 0 {
                return Err(Error::BadParams("n must be positive".into()));
            }
            GroupSpec { n, finite_generators: vec![], lie_generators: vec![], coset_reps: vec![SquareMatrix::identity(n)], builtin: None }
        }
        "cyclic" | "dihedral" => {
            let k = param_usize(p, "k", None)?;
            if k == 0 {
                return Err(Error::BadParams("k must be at least 1".into()));
            }
            let finite = if name == "cyclic" { vec![rotation2(2.0 * PI / k as f64)] } else { dihedral_generators(k) };
            GroupSpec { n: 2, finite_generators: finite, lie_generators: vec![], coset_reps: vec![SquareMatrix::identity(2)], builtin: None }
        }
        "block_reducible" => {
            let entries = p
                .get("blocks")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::BadParams("`blocks` must be an array".into()))?;
            if entries.is_empty() {
                return Err(Error::BadParams("`blocks` must be nonempty".into()));
            }
            let blocks = entries.iter().map(parse_block).collect::<Result<Vec<_>>>()?;
            let n: usize = blocks.iter().map(|b| b.size).sum();
            let (mut finite, mut lie) = (Vec::new(), Vec::new());
            let mut off = 0;
            for b in &blocks {
                finite.extend(b.finite.iter().map(|g| embed(g, off, n, true)));
                lie.extend(b.lie.iter().map(|a| embed(a, off, n, false)));
                off += b.size;
            }
            GroupSpec { n, finite_generators: finite, lie_generators: lie, coset_reps: vec![SquareMatrix::identity(n)], builtin: None }
        }
        "torus_swap_4d" => {
            let omega = param_vec(p, "omega")?.unwrap_or_else(|| vec![1.0, 2f64.sqrt(), 3f64.sqrt(), 1.0]);
            if omega.len() != 4 {
                return Err(Error::BadParams("`omega` needs 4 values".into()));
            }
            let det = omega[0] * omega[3] - omega[1] * omega[2];
            if det.abs() < 1e-9 {
                return Err(Error::BadParams("(ω₁, ω₂) and (ω₃, ω₄) must be linearly independent".into()));
            }
            let cosets = block_swap_cosets();
            GroupSpec {
                n: 4,
                finite_generators: vec![],
                lie_generators: torus_generators(&omega),
                coset_reps: vec![cosets[0].clone(), cosets[4].clone()],
                builtin: None,
            }
        }
        "d1_4d" => {
            let omega = param_vec(p, "omega")?.unwrap_or_else(|| vec![1.0, 2.0]);
            if omega.len() != 2 || omega.iter().all(|w| *w == 0.0) {
                return Err(Error::BadParams("`omega` needs 2 values, not both zero".into()));
            }
            let a = torus_generators(&omega).remove(0);
            let all = block_swap_cosets();
            let reps = match p.get("cosets") {
                Some(Value::Array(ix)) => ix
                    .iter()
                    .map(|i| {
                        i.as_u64()
                            .and_then(|i| all.get(i as usize).cloned())
                            .ok_or_else(|| Error::BadParams("`cosets` entries must be indices 0..8".into()))
                    })
                    .collect::<Result<Vec<_>>>()?,
                Some(_) => return Err(Error::BadParams("`cosets` must be an array".into())),
                None => all
                    .iter()
                    .filter(|c| {
                        let conj = c.matmul(&a).matmul(&c.transpose());
                        conj.max_abs_diff(&a) < 1e-12 || conj.max_abs_diff(&a.scale(-1.0)) < 1e-12
                    })
                    .cloned()
                    .collect(),
            };
            GroupSpec { n: 4, finite_generators: vec![], lie_generators: vec![a], coset_reps: reps, builtin: None }
        }
        "rank2_d3" => {
            let x = param_f64(p, "x", Some(1.0))?;
            let y = param_f64(p, "y", Some(1.0))?;
            let t = param_f64(p, "t", Some(0.0))?;
            let s = param_f64(p, "s", Some(0.0))?;
            if x == 0.0 && y == 0.0 {
                return Err(Error::BadParams("x and y must not both vanish".into()));
            }
            GroupSpec {
                n: 4,
                finite_generators: vec![],
                lie_generators: rank2_d3_generators(x, y, t, s).to_vec(),
                coset_reps: vec![SquareMatrix::identity(4)],
                builtin: None,
            }
        }
        other => return Err(Error::UnknownBuiltin(other.to_string())),
    };
    spec.builtin = bref;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_closure(gens: &[SquareMatrix]) -> usize {
        // Oracle: repeatedly multiply everything by everything until stable,
        // comparing with a plain linear scan.
        let n = gens[0].dim();
        let mut set = vec![SquareMatrix::identity(n)];
        loop {
            let mut added = false;
            let snapshot = set.clone();
            for a in &snapshot {
                for g in gens {
                    let p = a.matmul(g);
                    if !set.iter().any(|q| q.max_abs_diff(&p) <= 1e-8) {
                        set.push(p);
                        added = true;
                    }
                }
            }
            if !added {
                return set.len();
            }
        }
    }

    #[test]
    fn closure_sizes() {
        let c4 = generate_finite_closure(&[rotation2(PI / 2.0)], 1e-8, 100).unwrap();
        assert_eq!(c4.len(), 4);
        assert!(c4.exact);
        let c5 = [rotation2(2.0 * PI / 5.0)];
        assert_eq!(generate_finite_closure(&c5, 1e-8, 100).unwrap().len(), brute_closure(&c5));
        let d3 = [rotation2(2.0 * PI / 3.0), diag(&[1.0, -1.0])];
        let got = generate_finite_closure(&d3, 1e-8, 100).unwrap().len();
        assert_eq!(got, 6);
        assert_eq!(got, brute_closure(&d3));
    }

    #[test]
    fn closure_is_a_fixed_point() {
        let g = generate_finite_closure(&signed_permutation_generators(3), 1e-8, 1000).unwrap();
        assert_eq!(g.len(), 48);
        let again = generate_finite_closure(&g.elements, 1e-8, 1000).unwrap();
        assert_eq!(again.len(), g.len());
        for e in &g.elements {
            assert!(g.elements.iter().any(|f| f.max_abs_diff(&e.transpose()) <= 1e-8));
        }
    }

    #[test]
    fn irrational_rotation_exceeds_cap() {
        let r = rotation2(2.0_f64.sqrt());
        assert!(matches!(generate_finite_closure(&[r], 1e-8, 500), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn circle_group_grid() {
        let spec = builtin_spec("so2", &Value::Null).unwrap();
        let s = sample_lie_group(&spec, 2.0 * PI / 1024.0, 1).unwrap();
        assert_eq!(s.len(), 1024);
        assert!(s.covering_resolution <= 2.0 * PI / 1024.0 + 1e-15);
    }

    #[test]
    fn torus_swap_sample_covers_both_cosets() {
        let spec = builtin_spec("torus_swap_4d", &Value::Null).unwrap();
        assert_eq!(spec.lie_generators.len(), 2);
        assert_eq!(commutator(&spec.lie_generators[0], &spec.lie_generators[1]).unwrap().max_abs(), 0.0);
        let s = sample_lie_group(&spec, 2.0 * PI / 16.0, 1).unwrap();
        assert_eq!(s.len(), 2 * 16 * 16);
        // exp(t A₁) for arbitrary t is within the covering radius of the sample.
        for t in [0.3, 1.7, 4.4, 11.0] {
            let g = crate::matrix_kernel::exp_skew(&spec.lie_generators[0], t).unwrap();
            let best = s.elements.iter().map(|e| e.try_sub(&g).unwrap().operator_norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= s.covering_resolution, "t={t} best={best}");
        }
    }

    #[test]
    fn sample_is_orthogonal_and_inverse_closed() {
        for (name, params) in [
            ("so3_axis_fix", Value::Null),
            ("rank2_d3", json!({"x": 1.0, "y": 0.5, "t": 0.3, "s": 0.2})),
            ("d1_4d", Value::Null),
        ] {
            let spec = builtin_spec(name, &params).unwrap();
            let s = sample_group(&spec, 0.6, 9).unwrap();
            let mut idx = TolerantIndex::new(DEDUP_TOL);
            for e in &s.elements {
                assert!(e.orthogonality_defect() <= 1e-8);
                idx.insert(&e.to_row_major());
            }
            assert!(idx.find(&SquareMatrix::identity(spec.n).to_row_major()).is_some());
            for e in &s.elements {
                assert!(idx.find(&e.transpose().to_row_major()).is_some(), "{name}");
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let spec = builtin_spec("rank2_d3", &Value::Null).unwrap();
        let a = sample_group(&spec, 0.8, 5).unwrap();
        let b = sample_group(&spec, 0.8, 5).unwrap();
        assert_eq!(a.elements, b.elements);
    }

    #[test]
    fn orbit_examples() {
        let triv = sample_group(&builtin_spec("trivial", &json!({"n": 3})).unwrap(), 0.1, 0).unwrap();
        let v = DVector::from_column_slice(&[0.6, 0.0, 0.8]);
        assert_eq!(orbit(&triv, &v).unwrap().len(), 1);

        let c4 = generate_finite_closure(&[rotation2(PI / 2.0)], 1e-8, 100).unwrap();
        let o = orbit(&c4, &DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        assert_eq!(o.len(), 4);
        for (i, p) in o.points.iter().enumerate() {
            assert!((c4.elements[o.element_index[i]].apply(&o.base) - p).amax() <= 1e-12);
        }

        let so3 = sample_group(&builtin_spec("so3_axis_fix", &Value::Null).unwrap(), 0.01, 0).unwrap();
        let pole = orbit(&so3, &DVector::from_column_slice(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(pole.len(), 1);

        assert!(matches!(
            orbit(&c4, &DVector::from_column_slice(&[2.0, 0.0])),
            Err(Error::NotUnitVector { .. })
        ));
    }

    #[test]
    fn builtin_examples() {
        let c6 = builtin_spec("cyclic", &json!({"k": 6})).unwrap();
        assert_eq!(c6.finite_generators.len(), 1);
        assert!(c6.finite_generators[0].max_abs_diff(&rotation2(PI / 3.0)) < 1e-15);

        let o3 = builtin_spec("o3_axis_fix", &Value::Null).unwrap();
        assert!(o3.coset_reps.iter().any(|r| r.max_abs_diff(&diag(&[1.0, 1.0, -1.0])) == 0.0));

        let t = builtin_spec("torus_swap_4d", &json!({"omega": [1.0, 2f64.sqrt(), 3f64.sqrt(), 1.0]})).unwrap();
        assert_eq!(t.coset_reps[1], block_swap_cosets()[4]);

        let r = builtin_spec("rank2_d3", &json!({"x": 1, "y": 1, "t": 0, "s": 0})).unwrap();
        assert_eq!(r.lie_generators.len(), 3);

        assert!(matches!(builtin_spec("spin7", &Value::Null), Err(Error::UnknownBuiltin(_))));
        assert!(matches!(builtin_spec("cyclic", &json!({})), Err(Error::BadParams(_))));
        assert!(matches!(
            builtin_spec("torus_swap_4d", &json!({"omega": [1, 2, 2, 4]})),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn d1_default_cosets_normalise_the_generator() {
        let spec = builtin_spec("d1_4d", &Value::Null).unwrap();
        assert_eq!(spec.coset_reps.len(), 2);
        let equal = builtin_spec("d1_4d", &json!({"omega": [1.0, 1.0]})).unwrap();
        assert_eq!(equal.coset_reps.len(), 4);
    }

    #[test]
    fn block_reducible_layout() {
        let spec = builtin_spec("block_reducible", &json!({"blocks": [{"size": 1, "group": "sign"}, {"size": 1}]})).unwrap();
        let s = sample_group(&spec, 0.1, 0).unwrap();
        assert_eq!(s.len(), 2);
        let spec = builtin_spec("block_reducible", &json!({"blocks": [2, 1]})).unwrap();
        assert_eq!(spec.n, 3);
        assert_eq!(sample_group(&spec, 0.1, 0).unwrap().len(), 20);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let spec = builtin_spec("dihedral", &json!({"k": 3})).unwrap();
        let text = serde_json::to_string(&spec.to_json()).unwrap();
        let back = GroupSpec::from_json_str(&text).unwrap();
        assert_eq!(back.n, 2);
        assert_eq!(sample_group(&back, 0.1, 0).unwrap().len(), 6);

        let bad = r#"{"n": 2, "finite_generators": [[2, 0, 0, 1]]}"#;
        assert!(matches!(GroupSpec::from_json_str(bad), Err(Error::NotOrthogonal { .. })));
        let bad = r#"{"n": 2, "lie_generators": [[0, 1, 1, 0]]}"#;
        assert!(matches!(GroupSpec::from_json_str(bad), Err(Error::NotSkewSymmetric { .. })));
        let bad = r#"{"n": 2, "finite_generators": [[1, 0, 0]]}"#;
        assert!(matches!(GroupSpec::from_json_str(bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rational_approximation() {
        assert_eq!(rational_approx(2.0, 64), Some((2, 1)));
        assert_eq!(rational_approx(1.5, 64), Some((3, 2)));
        assert_eq!(rational_approx(2f64.sqrt(), 64), None);
    }
}
