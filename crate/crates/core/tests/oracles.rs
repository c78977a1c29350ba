//! Independent oracles: brute-force geometry, Kirchhoff determinants,
//! geometric series and quadrature refinement.

use std::collections::HashSet;

use gasket::besov::{self, abel_probe, alpha, beta_star, discrete_ebeta, DEFAULT_EPS};
use gasket::energy::{bn, cell_averages, graph_energy, CellFunction, VertexFunction};
use gasket::geometry::{self, cell_anchor, cell_vertices, DyadicPoint, EdgeKind, Word};
use gasket::good::{separation_witness, GoodFunction};
use gasket::resistance::{
    cell_graph_network, effective_resistance, pair_resistance, pair_resistance_exact,
    ResistorNetwork,
};
use gasket::scalar::{ratio, Scalar};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn u100() -> GoodFunction<BigRational> {
    GoodFunction::new(ratio(1, 1), ratio(0, 1), ratio(0, 1))
}

/// Cartesian corners of `K_w` in floating point, by direct iteration of the
/// maps on the unit triangle.
fn float_corners(w: &Word) -> [(f64, f64); 3] {
    let p = [(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)];
    p.map(|mut q| {
        for &d in w.digits().iter().rev() {
            q = ((q.0 + p[d as usize].0) / 2.0, (q.1 + p[d as usize].1) / 2.0);
        }
        q
    })
}

#[test]
fn edges_match_pairwise_intersection() {
    for n in 1..=5 {
        let words: Vec<Word> = Word::all(n).collect();
        let corners: Vec<Vec<(i64, i64)>> = words
            .iter()
            .map(|w| {
                float_corners(w)
                    .iter()
                    .map(|&(x, y)| ((x * 1e9).round() as i64, (y * 1e9).round() as i64))
                    .collect()
            })
            .collect();
        let mut brute = Vec::new();
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                if corners[i].iter().any(|c| corners[j].contains(c)) {
                    brute.push((i, j));
                }
            }
        }
        let g = geometry::graph(n).unwrap();
        assert_eq!(g.index_pairs(), brute.as_slice(), "n = {n}");
        for e in &g.edges {
            let distinct = cell_anchor(&e.w1).unwrap() != cell_anchor(&e.w2).unwrap();
            assert_eq!(e.kind == EdgeKind::TypeI, distinct);
        }
    }
}

#[test]
fn vertex_and_edge_counts_by_enumeration() {
    for n in 0..=8 {
        let distinct: HashSet<DyadicPoint> = Word::all(n).flat_map(|w| cell_vertices(&w)).collect();
        assert_eq!(distinct.len(), (3usize.pow(n as u32 + 1) + 3) / 2);
    }
    for n in 1..=8 {
        // Each incidence point of exactly two level-n cells is one edge.
        let mut seen: std::collections::HashMap<DyadicPoint, usize> = Default::default();
        for w in Word::all(n) {
            for p in cell_vertices(&w) {
                *seen.entry(p).or_default() += 1;
            }
        }
        let edges: usize = seen.values().map(|&k| k * (k - 1) / 2).sum();
        assert_eq!(edges, (3usize.pow(n as u32 + 1) - 3) / 2);
        assert_eq!(geometry::graph(n).unwrap().edges.len(), edges);
    }
}

/// Exact determinant by fraction-based Gaussian elimination.
fn det(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut d = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return BigRational::zero();
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c].clone();
        for r in c + 1..n {
            let f = m[r][c].clone() / m[c][c].clone();
            for k in c..n {
                let t = f.clone() * m[c][k].clone();
                m[r][k] -= t;
            }
        }
    }
    d
}

fn laplacian(n: usize) -> Vec<Vec<BigRational>> {
    let g = geometry::graph(n).unwrap();
    let size = g.node_count();
    let mut l = vec![vec![BigRational::zero(); size]; size];
    for &(i, j) in g.index_pairs() {
        l[i][i] += BigRational::one();
        l[j][j] += BigRational::one();
        l[i][j] -= BigRational::one();
        l[j][i] -= BigRational::one();
    }
    l
}

fn minor(l: &[Vec<BigRational>], drop: &[usize]) -> Vec<Vec<BigRational>> {
    l.iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| !drop.contains(j))
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect()
}

#[test]
fn matrix_tree_resistance_level_two() {
    // R_ab = det L^{(ab)} / det L^{(a)}.
    let l = laplacian(2);
    let (a, b) = ("00".parse::<Word>().unwrap(), "01".parse::<Word>().unwrap());
    let (ia, ib) = (a.index(), b.index());
    let oracle = det(minor(&l, &[ia, ib])) / det(minor(&l, &[ia]));
    assert_eq!(pair_resistance_exact(2, &a, &b).unwrap(), oracle);
    let numeric = pair_resistance(2, &a, &b).unwrap();
    assert!((numeric - oracle.to_f64()).abs() < 1e-12);
    let corner = det(minor(&l, &[0, 4])) / det(minor(&l, &[0]));
    assert_eq!(corner, ratio(5, 3) * ratio(5, 3) - ratio(1, 1));
}

#[test]
fn resistance_is_a_metric_on_samples() {
    let net = cell_graph_network(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let (x, y, z) = (rng.gen_range(0..27), rng.gen_range(0..27), rng.gen_range(0..27));
        let r = |a: usize, b: usize| {
            if a == b {
                0.0
            } else {
                effective_resistance(&net, a, b).unwrap()
            }
        };
        assert!((r(x, y) - r(y, x)).abs() < 1e-12);
        if x != y {
            assert!(r(x, y) > 0.0);
        }
        assert!(r(x, z) <= r(x, y) + r(y, z) + 1e-12);
    }
}

#[test]
fn shorting_lowers_and_cutting_raises_resistance() {
    let net = cell_graph_network(3).unwrap();
    let (a, b) = (0, 13);
    let base = effective_resistance(&net, a, b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (p, q) = (rng.gen_range(0..27), rng.gen_range(0..27));
        if p == q {
            continue;
        }
        let (shorted, label) = net.short(&[p, q]).unwrap();
        if label[a] != label[b] {
            assert!(effective_resistance(&shorted, label[a], label[b]).unwrap() <= base + 1e-12);
        }
        let cut = net.cut(rng.gen_range(0..net.edges().len()));
        if cut.is_connected() {
            assert!(effective_resistance(&cut, a, b).unwrap() >= base - 1e-12);
        }
    }
    let tri = ResistorNetwork::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    assert!((effective_resistance(&tri, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-14);
}

#[test]
fn good_function_energies_level_one() {
    let cf = u100().closed_form_energies(1);
    assert_eq!((cf.a, cf.b, cf.d), (ratio(8, 25), ratio(6, 5), ratio(8, 15)));
    // Averages 3/5, 1/5, 1/5 on the triangle X_1.
    let avgs = CellFunction::new(1, vec![ratio(3, 5), ratio(1, 5), ratio(1, 5)]).unwrap();
    assert_eq!(graph_energy(&avgs, &geometry::graph(1).unwrap()).unwrap(), ratio(8, 25));
    // Vertex values of V_1 by evaluating U at any address of each point.
    let u = u100();
    let vf = VertexFunction::from_fn(1, |p| {
        let w = Word::all(1)
            .chain(Word::all(2))
            .find(|w| cell_anchor(w).unwrap() == *p)
            .unwrap();
        u.evaluate(&w).unwrap()
    });
    assert_eq!(bn(&vf, 1).unwrap(), ratio(6, 5));
}

#[test]
fn exact_averages_match_fine_quadrature() {
    let u = GoodFunction::new(ratio(3, 2), ratio(-1, 1), ratio(1, 4));
    let quad = cell_averages(&u.to_f64(), 2, 12).unwrap();
    for (w, q) in Word::all(2).zip(quad.values()) {
        let exact = u.exact_cell_average(&w).unwrap().to_f64();
        assert!((exact - q).abs() < 1e-6, "{w}: {exact} vs {q}");
    }
}

/// `Σ_{n>=1} λ^n (4/3)(1 - (3/5)^n)` summed as two geometric series.
fn u100_series(beta: f64) -> f64 {
    let l = 2f64.powf(beta - beta_star());
    4.0 / 3.0 * (l / (1.0 - l) - 0.6 * l / (1.0 - 0.6 * l))
}

#[test]
fn abel_probe_matches_geometric_series() {
    let u = u100();
    let rows = abel_probe(&u, &DEFAULT_EPS, 1e-13).unwrap();
    for r in &rows {
        let oracle = r.eps * u100_series(r.beta);
        assert!(((r.value - oracle) / oracle).abs() < 1e-9);
        assert!(r.value_times_log2 <= r.sup_d);
    }
    let limit = 4.0 / 3.0 / std::f64::consts::LN_2;
    assert!((limit - 1.92359).abs() < 1e-5);
    let last = rows.last().unwrap();
    assert!(((last.value - limit) / limit).abs() < 0.02);
    // Values increase toward the limit as eps decreases.
    assert!(rows.windows(2).all(|w| w[1].value > w[0].value));
}

#[test]
fn ebeta_between_alpha_and_beta_star() {
    let u = u100();
    let mid = (alpha() + beta_star()) / 2.0;
    let s = discrete_ebeta(&u, mid, 1e-12).unwrap();
    assert!(((s.value() - u100_series(mid)) / u100_series(mid)).abs() < 1e-11);
    assert!(s.tail_bound >= 0.0);
}

#[test]
fn holder_bound_at_corners() {
    let u = u100();
    for beta in [(alpha() + beta_star()) / 2.0, beta_star()] {
        let c = besov::HolderConstant::new(beta).unwrap().c;
        let f = besov::holder_f(&u, beta);
        // |U(p_0) - U(p_1)| = 1 at distance 1.
        assert!(c * f.sqrt() >= 1.0);
    }
}

#[test]
fn separation_on_random_vertex_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 200 {
        let word = |rng: &mut ChaCha8Rng| {
            let len = rng.gen_range(1..=6);
            Word::new((0..len).map(|_| rng.gen_range(0..3u8)).collect()).unwrap()
        };
        let (x, y) = (word(&mut rng), word(&mut rng));
        if cell_anchor(&x).unwrap() == cell_anchor(&y).unwrap() {
            assert!(separation_witness(&x, &y).is_err());
            continue;
        }
        let u = separation_witness(&x, &y).unwrap();
        assert_ne!(u.evaluate(&x).unwrap(), u.evaluate(&y).unwrap());
        checked += 1;
    }
}

#[test]
fn separation_of_opposite_cells_by_u100() {
    let u = u100();
    for w in Word::all(4) {
        let v = u.evaluate(&w).unwrap();
        match w.digits()[0] {
            0 => assert!(v >= ratio(2, 5) && v <= ratio(1, 1)),
            1 => assert!(v >= ratio(0, 1) && v <= ratio(2, 5)),
            _ => {}
        }
    }
}
