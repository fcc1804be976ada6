//! Static KD-tree over points of runtime dimension.
//!
//! Orbits of sampled Lie groups hold 10⁴–10⁵ points and the solvers evaluate
//! nearest and farthest distances millions of times, so both queries are
//! branch-and-bound searches over per-node bounding boxes.

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// `coords` holds `len * dim` values, point-major.
    pub fn build(coords: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && coords.len().is_multiple_of(dim));
        let len = coords.len() / dim;
        let mut tree = Self { dim, coords: coords.to_vec(), perm: (0..len).collect(), nodes: Vec::new() };
        if len > 0 {
            tree.build_node(0, len);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let d = self.dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &p in &self.perm[start..end] {
            for k in 0..d {
                let x = self.coords[p * d + k];
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo: lo.clone(), hi: hi.clone(), start, end, children: None });
        if end - start > LEAF_SIZE {
            let axis = (0..d).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
            if hi[axis] > lo[axis] {
                let mid = start + (end - start) / 2;
                let coords = &self.coords;
                self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                    coords[a * d + axis].total_cmp(&coords[b * d + axis]).then(a.cmp(&b))
                });
                let left = self.build_node(start, mid);
                let right = self.build_node(mid, end);
                self.nodes[id].children = Some((left, right));
            }
        }
        id
    }

    fn min_dist2(&self, node: &Node, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = if q[k] < node.lo[k] {
                node.lo[k] - q[k]
            } else if q[k] > node.hi[k] {
                q[k] - node.hi[k]
            } else {
                0.0
            };
            s += d * d;
        }
        s
    }

    fn max_dist2(&self, node: &Node, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = (q[k] - node.lo[k]).abs().max((node.hi[k] - q[k]).abs());
            s += d * d;
        }
        s
    }

    fn dist2(&self, i: usize, q: &[f64]) -> f64 {
        self.point(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `(index, squared distance)` of the closest point; ties go to the
    /// lowest index.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.extreme_rec(0, q, &mut best, false);
        Some(best)
    }

    /// `(index, squared distance)` of the farthest point; ties go to the
    /// lowest index.
    pub fn farthest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        self.extreme_rec(0, q, &mut best, true);
        Some(best)
    }

    fn extreme_rec(&self, id: usize, q: &[f64], best: &mut (usize, f64), far: bool) {
        let node = &self.nodes[id];
        match node.children {
            None => {
                for &p in &self.perm[node.start..node.end] {
                    let d = self.dist2(p, q);
                    let better = if far { d > best.1 } else { d < best.1 };
                    if better || (d == best.1 && p < best.0) {
                        *best = (p, d);
                    }
                }
            }
            Some((l, r)) => {
                let bound = |c: usize| {
                    if far {
                        self.max_dist2(&self.nodes[c], q)
                    } else {
                        self.min_dist2(&self.nodes[c], q)
                    }
                };
                let (bl, br) = (bound(l), bound(r));
                let order = if (far && br > bl) || (!far && br < bl) { [(r, br), (l, bl)] } else { [(l, bl), (r, br)] };
                for (c, b) in order {
                    let prune = if far { b < best.1 } else { b > best.1 };
                    if !prune {
                        self.extreme_rec(c, q, best, far);
                    }
                }
            }
        }
    }

    /// Indices with squared distance ≤ `r2`, sorted.
    pub fn within(&self, q: &[f64], r2: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.is_empty() {
            self.band_rec(0, q, r2, false, &mut out);
        }
        out.sort_unstable();
        out
    }

    /// Indices with squared distance ≥ `r2`, sorted.
    pub fn beyond(&self, q: &[f64], r2: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.is_empty() {
            self.band_rec(0, q, r2, true, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn band_rec(&self, id: usize, q: &[f64], r2: f64, far: bool, out: &mut Vec<usize>) {
        let node = &self.nodes[id];
        if far {
            if self.max_dist2(node, q) < r2 {
                return;
            }
        } else if self.min_dist2(node, q) > r2 {
            return;
        }
        match node.children {
            None => {
                for &p in &self.perm[node.start..node.end] {
                    let d = self.dist2(p, q);
                    if (far && d >= r2) || (!far && d <= r2) {
                        out.push(p);
                    }
                }
            }
            Some((l, r)) => {
                self.band_rec(l, q, r2, far, out);
                self.band_rec(r, q, r2, far, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute(coords: &[f64], dim: usize, q: &[f64], far: bool) -> (usize, f64) {
        let mut best = (usize::MAX, if far { f64::NEG_INFINITY } else { f64::INFINITY });
        for (i, p) in coords.chunks(dim).enumerate() {
            let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if (far && d > best.1) || (!far && d < best.1) {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn queries_match_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=5 {
            let coords: Vec<f64> = (0..500 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tree = KdTree::build(&coords, dim);
            for _ in 0..50 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
                assert_eq!(tree.nearest(&q).unwrap(), brute(&coords, dim, &q, false));
                assert_eq!(tree.farthest(&q).unwrap(), brute(&coords, dim, &q, true));
                let r2 = 0.3;
                let want: Vec<usize> = coords
                    .chunks(dim)
                    .enumerate()
                    .filter(|(_, p)| p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r2)
                    .map(|(i, _)| i)
                    .collect();
                assert_eq!(tree.within(&q, r2), want);
            }
        }
    }

    #[test]
    fn duplicate_points_tie_to_lowest_index() {
        let coords = vec![0.5; 2 * 40];
        let tree = KdTree::build(&coords, 2);
        assert_eq!(tree.nearest(&[0.0, 0.0]).unwrap().0, 0);
        assert_eq!(tree.farthest(&[0.0, 0.0]).unwrap().0, 0);
    }
}
