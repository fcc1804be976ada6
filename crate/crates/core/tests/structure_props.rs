//! Structural results checked on builtin groups: ratio gate, reducibility
//! coherence, lazy maximin stability and rank bounds.

use nalgebra::DVector;
use orbitforge::group_model::{builtin_spec, orbit, sample_group, GroupSample};
use orbitforge::matrix_kernel::span_basis;
use orbitforge::orbit_optim::{solve_maximin, SolverConfig};
use orbitforge::structure::{
    irreducibility_test, lazy_busy_on_sample, probe_vectors, rank_on_sample, LazySearchConfig, RankReport, Verdict,
};
use orbitforge::tolerances::SOLVER_TOL;
use serde_json::{json, Value};

fn sample(name: &str, params: Value, res: f64) -> (GroupSample, Vec<orbitforge::matrix_kernel::SquareMatrix>) {
    let spec = builtin_spec(name, &params).unwrap();
    (sample_group(&spec, res, 42).unwrap(), spec.lie_generators)
}

fn rank_of(name: &str, params: Value, res: f64, probes: usize) -> RankReport {
    let (s, lie) = sample(name, params, res);
    let cfg = SolverConfig::for_dim(s.n).with_starts(32);
    rank_on_sample(&s, &lie, &probe_vectors(s.n, probes, 42), &cfg).unwrap()
}

fn small_search(n: usize) -> LazySearchConfig {
    LazySearchConfig { probes: 24, refine: 1, inner_starts: 16, ..LazySearchConfig::for_dim(n) }
}

#[test]
fn ratio_lies_in_the_half_band() {
    for (name, params, res) in [
        ("cyclic", json!({"k": 5}), 0.1),
        ("dihedral", json!({"k": 4}), 0.1),
        ("block_reducible", json!({"blocks": [2, 1]}), 0.1),
        ("so3_axis_fix", Value::Null, 0.05),
    ] {
        let (s, _) = sample(name, params, res);
        let cfg = SolverConfig::for_dim(s.n).with_starts(16);
        let rep = lazy_busy_on_sample(&s, 42, &cfg, &small_search(s.n)).unwrap();
        assert!(rep.ratio >= 0.48 && rep.ratio <= 1.0 + 1e-9, "{name}: ratio {}", rep.ratio);
        assert!(rep.r <= rep.big_r + 1e-12);
    }
}

#[test]
fn sqrt2_verdict_agrees_with_support_test() {
    for (name, params, res, expect) in [
        ("block_reducible", json!({"blocks": [2, 1]}), 0.1, Verdict::Reducible),
        ("block_reducible", json!({"blocks": [1, 1]}), 0.1, Verdict::Reducible),
        ("dihedral", json!({"k": 5}), 0.1, Verdict::Irreducible),
        ("cyclic", json!({"k": 7}), 0.1, Verdict::Irreducible),
    ] {
        let (s, _) = sample(name, params, res);
        let rep = irreducibility_test(&s, 24, 42).unwrap();
        assert_eq!(rep.verdict, expect, "{name}");
        assert_eq!(rep.support_reducible, expect == Verdict::Reducible, "{name}");
    }
}

#[test]
fn maximin_of_lazy_vector_is_lazy() {
    for (name, params, res) in [("dihedral", json!({"k": 3}), 0.1), ("so3_axis_fix", Value::Null, 0.05)] {
        let (s, _) = sample(name, params, res);
        let cfg = SolverConfig::for_dim(s.n).with_starts(32);
        let rep = lazy_busy_on_sample(&s, 42, &cfg, &small_search(s.n)).unwrap();
        let m = solve_maximin(&orbit(&s, &rep.lazy_v).unwrap(), &cfg).unwrap();
        let w = m.w.normalize();
        let r_w = solve_maximin(&orbit(&s, &w).unwrap(), &cfg).unwrap().value;
        let slack = 2.0 * SOLVER_TOL + s.covering_resolution;
        assert!(r_w >= rep.big_r - slack, "{name}: r_w {r_w} vs R {}", rep.big_r);
    }
}

#[test]
fn nontrivial_groups_have_rank_at_least_two() {
    for (name, params) in [("cyclic", json!({"k": 5})), ("dihedral", json!({"k": 4})), ("cyclic", json!({"k": 2}))] {
        assert!(rank_of(name, params, 0.1, 6).rank >= 2, "{name}");
    }
}

#[test]
fn full_rank_needs_finite_or_reducible() {
    for (name, params) in [
        ("cyclic", json!({"k": 6})),
        ("dihedral", json!({"k": 5})),
        ("block_reducible", json!({"blocks": [2, 1]})),
        ("block_reducible", json!({"blocks": [3]})),
    ] {
        let rep = rank_of(name, params.clone(), 0.1, 8);
        if rep.rank == rep.flat_star.base_v.len() {
            let (s, _) = sample(name, params, 0.1);
            let finite = s.exact;
            let reducible = irreducibility_test(&s, 24, 42).unwrap().verdict == Verdict::Reducible;
            assert!(finite || reducible, "{name}");
        }
    }
}

#[test]
fn reducible_blocks_raise_the_rank() {
    assert!(rank_of("block_reducible", json!({"blocks": [2, 1]}), 0.1, 8).rank >= 3);
    assert!(rank_of("block_reducible", json!({"blocks": [3, 1]}), 0.1, 10).rank >= 4);
}

#[test]
fn rank_two_flats_are_synchronous() {
    for (name, params) in [("dihedral", json!({"k": 5})), ("cyclic", json!({"k": 7})), ("block_reducible", json!({"blocks": [3]}))] {
        let (s, _) = sample(name, params.clone(), 0.1);
        if irreducibility_test(&s, 24, 42).unwrap().verdict != Verdict::Irreducible {
            continue;
        }
        let rep = rank_of(name, params, 0.1, 8);
        if rep.rank != 2 {
            continue;
        }
        let l = &rep.flat_star.basis;
        for g in &s.elements {
            let mut all = l.vectors.clone();
            all.extend(l.vectors.iter().map(|x| g.apply(x)));
            let d = span_basis(&all, 1e-6).unwrap().dim;
            assert!(d == 2 || d == 4, "{name}: dim {d}");
        }
    }
}

#[test]
fn probe_vectors_are_unit() {
    for v in probe_vectors(4, 40, 1) {
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
    let p = probe_vectors(3, 3, 1);
    assert_eq!(p[0], DVector::from_column_slice(&[1.0, 0.0, 0.0]));
}
