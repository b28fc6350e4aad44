// Oracles index explicitly so they read like the formulas they check.
#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::graph::{build_csr, AdjacencyCSR};

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

fn segs(g: &AdjacencyCSR) -> Arc<EdgeSegments> {
    Arc::new(EdgeSegments::new(g))
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> AdjacencyCSR {
    let edges: Vec<_> = (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
    build_csr(&edges, n, true).unwrap()
}

#[test]
fn linear_trivial_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = random_matrix(&mut rng, 2, 2);
    let mut t = Tape::new();
    let x = t.constant(Matrix::identity(2));
    let wv = t.param(w.clone());
    let y = t.linear(x, wv, None).unwrap();
    assert_eq!(t.value(y), &w);

    let z = t.constant(Matrix::zeros(2, 2));
    let y0 = t.linear(x, z, None).unwrap();
    assert_eq!(t.value(y0), &Matrix::zeros(2, 2));

    let a = random_matrix(&mut rng, 3, 2);
    let b = random_matrix(&mut rng, 2, 2);
    let av = t.constant(a.clone());
    let bv = t.constant(b.clone());
    let p = t.matmul(av, bv).unwrap();
    assert!(t.value(p).max_abs_diff(&naive_matmul(&a, &b)) < 1e-12);

    let bad = t.constant(Matrix::zeros(3, 3));
    assert!(matches!(t.matmul(av, bad), Err(Error::Shape { .. })));
}

#[test]
fn activation_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_matrix(&mut rng, 4, 3).scale(2.0);
    for kind in [
        Activation::LeakyRelu(0.2),
        Activation::Elu,
        Activation::Tanh,
        Activation::Sigmoid,
    ] {
        let rep = grad_check(
            std::slice::from_ref(&x),
            |t, p| {
                let y = t.activation(p[0], kind);
                let w = t.constant(Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4));
                let prod = t.dropout(y, t.value(w).clone())?;
                Ok(t.sum(prod))
            },
            1e-5,
            0,
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-6, "{kind}: {}", rep.max_rel_error);
    }
}

#[test]
fn segment_softmax_cases() {
    let g = build_csr(&[(0, 1), (0, 2)], 3, true).unwrap();
    // rows: 0 -> [0,1,2], 1 -> [0,1], 2 -> [0,2]
    let seg = segs(&g);
    let mut t = Tape::new();
    let s = t.constant(Matrix::column(&[1.0, 2.0, 3.0, 5.0, 5.0, 0.3, 0.3]));
    let a = t.segment_softmax(s, &seg).unwrap();
    let v = t.value(a).as_slice();
    let expect = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219];
    for k in 0..3 {
        assert!((v[k] - expect[k]).abs() < 1e-12);
    }
    assert_eq!(&v[3..], &[0.5, 0.5, 0.5, 0.5]);

    let single = build_csr(&[], 1, true).unwrap();
    let mut t = Tape::new();
    let s = t.constant(Matrix::column(&[-7.0]));
    let a = t.segment_softmax(s, &segs(&single)).unwrap();
    assert_eq!(t.value(a).get(0, 0), 1.0);
}

#[test]
fn segment_softmax_rejects_empty_segment() {
    let g = build_csr(&[(0, 1)], 3, false).unwrap();
    let mut t = Tape::new();
    let s = t.constant(Matrix::column(&[0.0, 0.0]));
    assert!(matches!(t.segment_softmax(s, &segs(&g)), Err(Error::EmptySegment(2))));
}

fn dense_weighted_sum(seg: &EdgeSegments, alpha: &[f64], m: &Matrix) -> Matrix {
    // Dense N×E selection matrix times diag(alpha) times M.
    let n = seg.num_nodes();
    let e = seg.num_edges();
    let mut out = Matrix::zeros(n, m.cols());
    for i in 0..n {
        for k in 0..e {
            let sel = if seg.dst()[k] == i { 1.0 } else { 0.0 };
            for c in 0..m.cols() {
                out.set(i, c, out.get(i, c) + sel * alpha[k] * m.get(k, c));
            }
        }
    }
    out
}

#[test]
fn segment_weighted_sum_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // One edge per segment: pure self-loops.
    let g = build_csr(&[], 3, true).unwrap();
    let seg = segs(&g);
    let m = random_matrix(&mut rng, 3, 2);
    let mut t = Tape::new();
    let al = t.constant(Matrix::filled(3, 1, 1.0));
    let mv = t.constant(m.clone());
    let out = t.segment_weighted_sum(al, mv, &seg).unwrap();
    assert_eq!(t.value(out), &m);

    let g = random_graph(&mut rng, 4, 5);
    let seg = segs(&g);
    let e = seg.num_edges();
    let m = random_matrix(&mut rng, e, 3);
    let uniform: Vec<f64> = (0..e).map(|k| 1.0 / seg.range(seg.dst()[k]).len() as f64).collect();
    let mut t = Tape::new();
    let al = t.constant(Matrix::column(&uniform));
    let mv = t.constant(m.clone());
    let out = t.segment_weighted_sum(al, mv, &seg).unwrap();
    for i in 0..4 {
        let r = seg.range(i);
        for c in 0..3 {
            let mean = r.clone().map(|k| m.get(k, c)).sum::<f64>() / r.len() as f64;
            assert!((t.value(out).get(i, c) - mean).abs() < 1e-12);
        }
    }

    let alpha: Vec<f64> = (0..e).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut t = Tape::new();
    let al = t.constant(Matrix::column(&alpha));
    let mv = t.constant(m.clone());
    let out = t.segment_weighted_sum(al, mv, &seg).unwrap();
    assert!(t.value(out).max_abs_diff(&dense_weighted_sum(&seg, &alpha, &m)) < 1e-12);

    let mut t = Tape::new();
    let al = t.constant(Matrix::column(&alpha[1..]));
    let mv = t.constant(m);
    assert!(t.segment_weighted_sum(al, mv, &seg).is_err());
}

#[test]
fn neighbor_aggregate_equals_gathered_weighted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = random_graph(&mut rng, 7, 12);
    let seg = segs(&g);
    let x = random_matrix(&mut rng, 7, 3);
    let alpha: Vec<f64> = (0..seg.num_edges()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut t = Tape::new();
    let al = t.constant(Matrix::column(&alpha));
    let xv = t.constant(x.clone());
    let fused = t.neighbor_aggregate(al, xv, &seg).unwrap();
    let gathered = t.constant(x.select_rows(seg.src()));
    let plain = t.segment_weighted_sum(al, gathered, &seg).unwrap();
    assert!(t.value(fused).max_abs_diff(t.value(plain)) < 1e-12);
}

fn naive_ce(logits: &Matrix, labels: &[usize], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..logits.rows() {
        if !mask[i] {
            continue;
        }
        let z = logits.row(i);
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        total -= (z[labels[i]].exp() / denom).ln();
        count += 1;
    }
    total / count as f64
}

#[test]
fn cross_entropy_cases() {
    let mut t = Tape::new();
    let l = t.constant(Matrix::from_rows(&[vec![100.0, 0.0, 0.0], vec![0.0, 100.0, 0.0]]).unwrap());
    let loss = t.masked_cross_entropy(l, &[0, 1], &[true, true]).unwrap();
    assert!(t.value(loss).get(0, 0) < 1e-40);

    let u = t.constant(Matrix::zeros(4, 3));
    let loss = t
        .masked_cross_entropy(u, &[0, 1, 2, 0], &[true, false, true, true])
        .unwrap();
    assert!((t.value(loss).get(0, 0) - 3f64.ln()).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z = random_matrix(&mut rng, 5, 3).scale(3.0);
    let labels = [2, 0, 1, 1, 0];
    let mask = [true, true, false, true, true];
    let zv = t.constant(z.clone());
    let loss = t.masked_cross_entropy(zv, &labels, &mask).unwrap();
    assert!((t.value(loss).get(0, 0) - naive_ce(&z, &labels, &mask)).abs() < 1e-12);

    assert!(matches!(
        t.masked_cross_entropy(zv, &labels, &[false; 5]),
        Err(Error::EmptyMask)
    ));
}

#[test]
fn backward_trivial_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut t = Tape::new();
    let w = t.param(random_matrix(&mut rng, 3, 2));
    let s = t.sum(w);
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(w).unwrap(), &Matrix::filled(3, 2, 1.0));

    let x = random_matrix(&mut rng, 4, 3);
    let mut t = Tape::new();
    let xv = t.constant(x.clone());
    let w = t.param(random_matrix(&mut rng, 3, 2));
    let y = t.linear(xv, w, None).unwrap();
    let s = t.sum(y);
    let g = t.backward(s).unwrap();
    let expect = x.t_matmul(&Matrix::filled(4, 2, 1.0));
    assert!(g.get(w).unwrap().max_abs_diff(&expect) < 1e-12);
    assert!(g.get(xv).is_none());

    let mut t = Tape::new();
    let w = t.param(Matrix::zeros(2, 2));
    assert!(matches!(t.backward(w), Err(Error::NonScalarLoss { rows: 2, cols: 2 })));
}

#[test]
fn linear_model_gradcheck_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_matrix(&mut rng, 5, 3);
    let params = vec![random_matrix(&mut rng, 3, 2), random_matrix(&mut rng, 1, 2)];
    let rep = grad_check(
        &params,
        |t, p| {
            let xv = t.constant(x.clone());
            let y = t.linear(xv, p[0], Some(p[1]))?;
            let s = t.scale(y, 0.7);
            Ok(t.sum(s))
        },
        1e-5,
        0,
    )
    .unwrap();
    assert!(rep.max_rel_error < 1e-9, "{}", rep.max_rel_error);
}

#[test]
fn every_op_passes_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = random_graph(&mut rng, 6, 9);
    let seg = segs(&g);
    let n = 6;
    let x = random_matrix(&mut rng, n, 4);
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let mask = vec![true, false, true, true, true, false];
    let params = vec![
        random_matrix(&mut rng, 4, 3), // W
        random_matrix(&mut rng, 6, 1), // a
        random_matrix(&mut rng, 1, 3), // bias
        random_matrix(&mut rng, 3, 3), // head 2 W
    ];
    let rep = grad_check(
        &params,
        |t, p| {
            let xv = t.constant(x.clone());
            let h = t.matmul(xv, p[0])?;
            let e = t.edge_scores(h, p[1], &seg)?;
            let e = t.activation(e, Activation::LeakyRelu(0.2));
            let al = t.segment_softmax(e, &seg)?;
            let agg = t.neighbor_aggregate(al, h, &seg)?;
            let msgs = t.constant(x.select_rows(seg.src()));
            let w_msgs = t.matmul(msgs, p[0])?;
            let agg2 = t.segment_weighted_sum(al, w_msgs, &seg)?;
            let both = t.add(agg, agg2)?;
            let both = t.add_bias(both, p[2])?;
            let act = t.activation(both, Activation::Elu);
            let h2 = t.matmul(act, p[3])?;
            let cat = t.concat_cols(&[act, h2])?;
            let m = t.mean(&[act, h2])?;
            let sq = t.sum_squares(cat);
            let sq = t.scale(sq, 0.01);
            let ce = t.masked_cross_entropy(m, &labels, &mask)?;
            t.add(ce, sq)
        },
        1e-5,
        1,
    )
    .unwrap();
    assert!(rep.max_rel_error < 1e-6, "{}", rep.max_rel_error);
}

#[test]
fn identical_forward_passes_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(&mut rng, 8, 14);
    let seg = segs(&g);
    let x = random_matrix(&mut rng, 8, 3);
    let a = random_matrix(&mut rng, 6, 1);
    let run = || {
        let mut t = Tape::new();
        let xv = t.constant(x.clone());
        let av = t.constant(a.clone());
        let e = t.edge_scores(xv, av, &seg).unwrap();
        let al = t.segment_softmax(e, &seg).unwrap();
        let out = t.neighbor_aggregate(al, xv, &seg).unwrap();
        t.value(out).clone()
    };
    assert_eq!(run().as_slice(), run().as_slice());
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant(
        seed in any::<u64>(), n in 1usize..12, m in 0usize..30, shift in -50.0f64..50.0
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, m);
        let seg = segs(&g);
        let scores: Vec<f64> = (0..seg.num_edges()).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let target = rng.gen_range(0..n);
        let shifted: Vec<f64> = scores
            .iter()
            .zip(seg.dst())
            .map(|(&s, &d)| if d == target { s + shift } else { s })
            .collect();
        let mut t = Tape::new();
        let s1 = t.constant(Matrix::column(&scores));
        let s2 = t.constant(Matrix::column(&shifted));
        let a1 = t.segment_softmax(s1, &seg).unwrap();
        let a2 = t.segment_softmax(s2, &seg).unwrap();
        for i in 0..n {
            let total: f64 = seg.range(i).map(|k| t.value(a1).as_slice()[k]).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
        prop_assert!(t.value(a1).max_abs_diff(t.value(a2)) < 1e-12);
    }

    #[test]
    fn weighted_sum_matches_dense_product(seed in any::<u64>(), n in 1usize..8, m in 0usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, m);
        let seg = segs(&g);
        let e = seg.num_edges();
        let msgs = random_matrix(&mut rng, e, 3);
        let alpha: Vec<f64> = (0..e).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut t = Tape::new();
        let al = t.constant(Matrix::column(&alpha));
        let mv = t.constant(msgs.clone());
        let out = t.segment_weighted_sum(al, mv, &seg).unwrap();
        prop_assert!(t.value(out).max_abs_diff(&dense_weighted_sum(&seg, &alpha, &msgs)) < 1e-12);
    }
}

#[test]
fn gradcheck_tolerates_rounding_on_structurally_zero_gradients() {
    // Adding the same constant to every score of a softmax segment leaves the
    // weights unchanged, so the shift parameter has an exactly zero gradient
    // while the loss is large enough for its finite difference to wobble.
    let g = build_csr(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4, false).unwrap();
    let seg = segs(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Matrix::from_fn(4, 3, |_, _| rng.gen_range(1.0..3.0));
    let per_edge = Matrix::from_fn(seg.num_edges(), 1, |e, _| 1.0 + seg.src()[e] as f64);
    let params = vec![Matrix::filled(1, 1, 0.3), random_matrix(&mut rng, 3, 3)];
    let forward = |t: &mut Tape, p: &[Var]| {
        let ones = t.constant(Matrix::filled(seg.num_edges(), 1, 1.0));
        let shift = t.matmul(ones, p[0])?;
        let base = t.constant(per_edge.clone());
        let scores = t.add(base, shift)?;
        let alpha = t.segment_softmax(scores, &seg)?;
        let xv = t.constant(x.clone());
        let h = t.matmul(xv, p[1])?;
        let agg = t.neighbor_aggregate(alpha, h, &seg)?;
        let big = t.scale(agg, 40.0);
        Ok(t.sum_squares(big))
    };
    let rep = grad_check(&params, forward, 1e-5, 0).unwrap();
    assert!(rep.max_rel_error < 1e-4, "{}", rep.max_rel_error);
    assert_eq!(rep.entries_checked, 10);
    // Only the shift parameter is exempt; the nine weights are compared.
    assert_eq!(rep.entries_below_resolution, 1);
}

#[test]
fn gradcheck_still_catches_small_but_resolvable_errors() {
    let params = vec![Matrix::filled(1, 2, 0.5)];
    // The loss depends on p through a value the tape treats as constant, so the
    // analytic gradient misses a term of size 1e-6 that differences resolve.
    let rep = grad_check(
        &params,
        |t, p| {
            let hidden = t.value(p[0]).scale(1e-6);
            let c = t.constant(hidden);
            let s = t.add(p[0], c)?;
            Ok(t.sum(s))
        },
        1e-5,
        0,
    )
    .unwrap();
    assert!(
        rep.max_rel_error > 1e-7 && rep.max_rel_error < 1e-5,
        "{}",
        rep.max_rel_error
    );
    assert_eq!(rep.entries_below_resolution, 0);
    assert!(fd_resolution(1.0, 1e-5) < 1e-9);
    assert_eq!(fd_resolution(1e3, 1e-5), 1e3 * fd_resolution(1.0, 1e-5));
}
