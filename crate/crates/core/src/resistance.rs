//! Effective resistance on `X_n`: exact Δ-Y reduction for the corner triple
//! and grounded Laplacian solves for arbitrary pairs.

use std::collections::VecDeque;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Word};
use crate::scalar::{rational_pow, ratio, Scalar};

/// Largest network handled by the exact rational elimination.
pub const EXACT_NODE_LIMIT: usize = 50;
/// Networks up to this size use a dense Cholesky factorization.
pub const DENSE_NODE_LIMIT: usize = 729;
/// Required relative residual of every numerical solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// A network of conductances on nodes `0..nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResistorNetwork<T> {
    nodes: usize,
    edges: Vec<(usize, usize, T)>,
}

impl<T: Scalar> ResistorNetwork<T> {
    pub fn new(nodes: usize, edges: Vec<(usize, usize, T)>) -> Result<Self> {
        for (i, j, c) in &edges {
            if i == j {
                return Err(Error::Network(format!("self-loop at node {i}")));
            }
            if *i >= nodes || *j >= nodes {
                return Err(Error::Network(format!("edge ({i}, {j}) out of range")));
            }
            if *c <= T::zero() {
                return Err(Error::NonPositive(c.to_f64()));
            }
        }
        Ok(ResistorNetwork { nodes, edges })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize, T)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.nodes
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for (i, j, _) in &self.edges {
            adj[*i].push(*j);
            adj[*j].push(*i);
        }
        adj
    }

    /// Merges `group` into one node (a short circuit). Returns the new
    /// network and the relabelling of old node ids.
    pub fn short(&self, group: &[usize]) -> Result<(Self, Vec<usize>)> {
        let rep = *group
            .iter()
            .min()
            .ok_or_else(|| Error::Network("empty short group".into()))?;
        let mut label = vec![usize::MAX; self.nodes];
        let mut next = 0;
        for v in 0..self.nodes {
            if group.contains(&v) && v != rep {
                continue;
            }
            label[v] = next;
            next += 1;
        }
        for &v in group {
            label[v] = label[rep];
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|(i, j, c)| {
                let (a, b) = (label[*i], label[*j]);
                (a != b).then(|| (a, b, c.clone()))
            })
            .collect();
        Ok((ResistorNetwork { nodes: next, edges }, label))
    }

    /// Removes the edge at position `index` (a cut).
    pub fn cut(&self, index: usize) -> Self {
        let mut edges = self.edges.clone();
        edges.remove(index);
        ResistorNetwork {
            nodes: self.nodes,
            edges,
        }
    }
}

impl ResistorNetwork<f64> {
    /// CSV with header `i,j,conductance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["i", "j", "conductance"])?;
        for (i, j, c) in &self.edges {
            wtr.write_record([i.to_string(), j.to_string(), format!("{c:?}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `i,j,conductance` rows; the node count is one past the largest id.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut edges = Vec::new();
        let mut nodes = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let field = |k: usize| -> Result<&str> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse(format!("missing column {k}")))
            };
            let i: usize = field(0)?.parse().map_err(|e| Error::Parse(format!("i: {e}")))?;
            let j: usize = field(1)?.parse().map_err(|e| Error::Parse(format!("j: {e}")))?;
            let c: f64 = field(2)?
                .parse()
                .map_err(|e| Error::Parse(format!("conductance: {e}")))?;
            nodes = nodes.max(i + 1).max(j + 1);
            edges.push((i, j, c));
        }
        ResistorNetwork::new(nodes, edges)
    }
}

/// The unit-conductance network underlying `E_n`, nodes in canonical word
/// order.
pub fn cell_graph_network(n: usize) -> Result<ResistorNetwork<f64>> {
    let g = geometry::graph(n)?;
    let edges = g.index_pairs().iter().map(|&(i, j)| (i, j, 1.0)).collect();
    ResistorNetwork::new(g.node_count(), edges)
}

/// Arms of a Y-circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct StarTriple<T> {
    pub r1: T,
    pub r2: T,
    pub r3: T,
}

fn check_positive<T: Scalar>(vals: &[&T]) -> Result<()> {
    match vals.iter().find(|v| ***v <= T::zero()) {
        Some(v) => Err(Error::NonPositive(v.to_f64())),
        None => Ok(()),
    }
}

/// Δ → Y: `R_1 = R12·R31/Σ`, `R_2 = R12·R23/Σ`, `R_3 = R23·R31/Σ`.
pub fn delta_to_star<T: Scalar>(r12: &T, r23: &T, r31: &T) -> Result<StarTriple<T>> {
    check_positive(&[r12, r23, r31])?;
    let sum = r12.clone() + r23.clone() + r31.clone();
    Ok(StarTriple {
        r1: r12.clone() * r31.clone() / sum.clone(),
        r2: r12.clone() * r23.clone() / sum.clone(),
        r3: r23.clone() * r31.clone() / sum,
    })
}

/// Y → Δ, the inverse of [`delta_to_star`]; returns `(R12, R23, R31)`.
pub fn star_to_delta<T: Scalar>(star: &StarTriple<T>) -> Result<(T, T, T)> {
    let StarTriple { r1, r2, r3 } = star;
    check_positive(&[r1, r2, r3])?;
    let p = r1.clone() * r2.clone() + r2.clone() * r3.clone() + r3.clone() * r1.clone();
    Ok((p.clone() / r3.clone(), p.clone() / r1.clone(), p / r2.clone()))
}

/// Closed form `r_n = (1/2)(5/3)^n - 1/2`.
pub fn corner_resistance_closed(n: usize) -> BigRational {
    ratio(1, 2) * rational_pow(&ratio(5, 3), n) - ratio(1, 2)
}

/// Arm `r_n` of the Y equivalent to `X_n` seen from its three corner cells,
/// by repeated Δ-Y reduction.
///
/// `X_1` is a unit triangle. `X_{n+1}` is three copies of `X_n` joined by
/// unit edges; replacing each copy by its Y leaves a Δ of sides `2r_n + 1`
/// between the Y centres, whose Y arms add to the outer arm `r_n`.
/// Checked against the closed form.
pub fn corner_resistance_r(n: usize) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::InvalidLevel("corner resistance needs n >= 1".into()));
    }
    let one = BigRational::one();
    let mut r = delta_to_star(&one, &one, &one)?.r1;
    for _ in 1..n {
        let side = ratio(2, 1) * r.clone() + one.clone();
        let inner = delta_to_star(&side, &side, &side)?;
        r += inner.r1;
    }
    assert_eq!(r, corner_resistance_closed(n), "Δ-Y recursion disagrees with closed form");
    Ok(r)
}

/// Compressed sparse rows of a symmetric matrix.
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yr = s;
        });
    }

    fn diag(&self) -> Vec<f64> {
        (0..self.row_ptr.len() - 1)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&k| self.cols[k] == r)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

enum Factor {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sparse(Csr),
}

/// The Laplacian with `sink` grounded (row and column removed), factored or
/// prepared once for repeated solves.
pub struct GroundedLaplacian {
    sink: usize,
    nodes: usize,
    // dense copy kept for residual checks
    matrix: Csr,
    factor: Factor,
}

impl GroundedLaplacian {
    pub fn new(net: &ResistorNetwork<f64>, sink: usize) -> Result<Self> {
        if sink >= net.nodes {
            return Err(Error::Network(format!("node {sink} out of range")));
        }
        if !net.is_connected() {
            return Err(Error::Disconnected);
        }
        let m = net.nodes - 1;
        let reduce = |v: usize| -> Option<usize> {
            match v.cmp(&sink) {
                std::cmp::Ordering::Less => Some(v),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(v - 1),
            }
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut diag = vec![0.0; m];
        for &(i, j, c) in &net.edges {
            let (ri, rj) = (reduce(i), reduce(j));
            if let Some(a) = ri {
                diag[a] += c;
            }
            if let Some(b) = rj {
                diag[b] += c;
            }
            if let (Some(a), Some(b)) = (ri, rj) {
                rows[a].push((b, -c));
                rows[b].push((a, -c));
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (r, mut row) in rows.into_iter().enumerate() {
            row.push((r, diag[r]));
            row.sort_by_key(|e| e.0);
            // merge parallel edges
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let matrix = Csr {
            row_ptr,
            cols,
            vals,
        };
        let factor = if m <= DENSE_NODE_LIMIT {
            let mut dense = DMatrix::<f64>::zeros(m, m);
            for r in 0..m {
                for k in matrix.row_ptr[r]..matrix.row_ptr[r + 1] {
                    dense[(r, matrix.cols[k])] = matrix.vals[k];
                }
            }
            Factor::Dense(dense.cholesky().ok_or(Error::Singular)?)
        } else {
            Factor::Sparse(Csr {
                row_ptr: matrix.row_ptr.clone(),
                cols: matrix.cols.clone(),
                vals: matrix.vals.clone(),
            })
        };
        Ok(GroundedLaplacian {
            sink,
            nodes: net.nodes,
            matrix,
            factor,
        })
    }

    fn reduced_index(&self, v: usize) -> Option<usize> {
        match v.cmp(&self.sink) {
            std::cmp::Ordering::Less => Some(v),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(v - 1),
        }
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let x = match &self.factor {
            Factor::Dense(ch) => ch.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec(),
            Factor::Sparse(a) => conjugate_gradient(a, rhs)?,
        };
        let mut ax = vec![0.0; rhs.len()];
        self.matrix.mul(&x, &mut ax);
        let res: Vec<f64> = ax.iter().zip(rhs).map(|(p, q)| p - q).collect();
        let rel = norm(&res) / norm(rhs).max(f64::MIN_POSITIVE);
        if rel > RESIDUAL_TOL {
            return Err(Error::NotConverged {
                target: RESIDUAL_TOL,
                reached: rel,
            });
        }
        Ok(x)
    }

    /// Effective resistance between `source` and the grounded sink: the
    /// potential at `source` under a unit injected current.
    pub fn resistance_from(&self, source: usize) -> Result<f64> {
        if source >= self.nodes {
            return Err(Error::Network(format!("node {source} out of range")));
        }
        let Some(s) = self.reduced_index(source) else {
            return Err(Error::Network("source equals sink".into()));
        };
        let mut rhs = vec![0.0; self.nodes - 1];
        rhs[s] = 1.0;
        Ok(self.solve(&rhs)?[s])
    }
}

/// Jacobi-preconditioned conjugate gradients.
fn conjugate_gradient(a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let inv_diag: Vec<f64> = a.diag().iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    // tighter than the acceptance residual so the explicit check passes
    let target = RESIDUAL_TOL * 1e-2;
    for _ in 0..(20 * n).max(1000) {
        if norm(&r) / bnorm <= target {
            return Ok(x);
        }
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        target,
        reached: norm(&r) / bnorm,
    })
}

/// Effective resistance between nodes `a` and `b` of a floating network.
pub fn effective_resistance(net: &ResistorNetwork<f64>, a: usize, b: usize) -> Result<f64> {
    if a == b {
        return Err(Error::Network("resistance needs distinct nodes".into()));
    }
    GroundedLaplacian::new(net, b)?.resistance_from(a)
}

/// Exact effective resistance on a small rational network by Gaussian
/// elimination of the grounded Laplacian.
pub fn effective_resistance_exact(
    net: &ResistorNetwork<BigRational>,
    a: usize,
    b: usize,
) -> Result<BigRational> {
    if net.nodes > EXACT_NODE_LIMIT {
        return Err(Error::Network(format!(
            "exact mode limited to {EXACT_NODE_LIMIT} nodes"
        )));
    }
    if a == b || a >= net.nodes || b >= net.nodes {
        return Err(Error::Network("resistance needs two distinct valid nodes".into()));
    }
    if !net.is_connected() {
        return Err(Error::Disconnected);
    }
    let idx: Vec<usize> = (0..net.nodes).filter(|&v| v != b).collect();
    let pos = |v: usize| idx.iter().position(|&x| x == v);
    let m = idx.len();
    let zero = BigRational::zero();
    let mut mat = vec![vec![zero.clone(); m + 1]; m];
    for (i, j, c) in &net.edges {
        let (pi, pj) = (pos(*i), pos(*j));
        if let Some(p) = pi {
            mat[p][p] += c;
        }
        if let Some(q) = pj {
            mat[q][q] += c;
        }
        if let (Some(p), Some(q)) = (pi, pj) {
            mat[p][q] -= c;
            mat[q][p] -= c;
        }
    }
    let sa = pos(a).expect("a differs from b");
    mat[sa][m] = BigRational::one();
    for col in 0..m {
        let pivot = (col..m)
            .find(|&r| !mat[r][col].is_zero())
            .ok_or(Error::Singular)?;
        mat.swap(col, pivot);
        let p = mat[col][col].clone();
        for k in col..=m {
            mat[col][k] = &mat[col][k] / &p;
        }
        for r in 0..m {
            if r != col && !mat[r][col].is_zero() {
                let f = mat[r][col].clone();
                for k in col..=m {
                    let delta = &f * &mat[col][k];
                    mat[r][k] -= delta;
                }
            }
        }
    }
    Ok(mat[sa][m].clone())
}

/// `R_n(w1, w2)` on the unit-conductance `X_n`.
pub fn pair_resistance(n: usize, w1: &Word, w2: &Word) -> Result<f64> {
    for w in [w1, w2] {
        if w.level() != n {
            return Err(Error::LevelMismatch {
                expected: n,
                found: w.level(),
            });
        }
    }
    let net = cell_graph_network(n)?;
    effective_resistance(&net, w1.index(), w2.index())
}

/// Exact `R_n(w1, w2)` for `3^n <= 50`.
pub fn pair_resistance_exact(n: usize, w1: &Word, w2: &Word) -> Result<BigRational> {
    let g = geometry::graph(n)?;
    let one = BigRational::from_integer(BigInt::from(1));
    let edges = g
        .index_pairs()
        .iter()
        .map(|&(i, j)| (i, j, one.clone()))
        .collect();
    let net = ResistorNetwork::new(g.node_count(), edges)?;
    effective_resistance_exact(&net, w1.index(), w2.index())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub n: usize,
    pub w: String,
    pub corner: u8,
    #[serde(rename = "R")]
    pub r: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct CornerAudit {
    pub rows: Vec<AuditRow>,
    pub max_ratio: f64,
}

impl CornerAudit {
    /// CSV with header `n,w,corner,R,bound,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Exhaustive check of `R_n(w, i^n) <= (5/2)(5/3)^n` over all `w` and
/// corners `i`; pairs with `w = i^n` are skipped.
pub fn corner_bound_audit(n: usize) -> Result<CornerAudit> {
    if n == 0 {
        return Err(Error::InvalidLevel("audit needs n >= 1".into()));
    }
    let net = cell_graph_network(n)?;
    let bound = 2.5 * (5.0f64 / 3.0).powi(n as i32);
    let mut rows = Vec::new();
    for corner in 0..3u8 {
        let sink = Word::repeat(corner, n);
        let lap = GroundedLaplacian::new(&net, sink.index())?;
        let words: Vec<Word> = Word::all(n).filter(|w| *w != sink).collect();
        let rs: Vec<f64> = words
            .par_iter()
            .map(|w| lap.resistance_from(w.index()))
            .collect::<Result<_>>()?;
        for (w, r) in words.iter().zip(rs) {
            rows.push(AuditRow {
                n,
                w: w.to_string(),
                corner,
                r,
                bound,
                ratio: r / bound,
            });
        }
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(CornerAudit { rows, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_star_examples() {
        let one = ratio(1, 1);
        let s = delta_to_star(&one, &one, &one).unwrap();
        assert_eq!(s, StarTriple { r1: ratio(1, 3), r2: ratio(1, 3), r3: ratio(1, 3) });
        let two = ratio(2, 1);
        assert_eq!(delta_to_star(&two, &two, &two).unwrap().r1, ratio(2, 3));
        let (a, b, c) = (ratio(3, 7), ratio(5, 2), ratio(11, 3));
        let back = star_to_delta(&delta_to_star(&a, &b, &c).unwrap()).unwrap();
        assert_eq!(back, (a, b, c));
        assert!(matches!(
            delta_to_star(&1.0, &0.0, &1.0),
            Err(Error::NonPositive(_))
        ));
    }

    #[test]
    fn corner_resistance_examples() {
        assert_eq!(corner_resistance_r(1).unwrap(), ratio(1, 3));
        assert_eq!(corner_resistance_r(2).unwrap(), ratio(8, 9));
        assert!(corner_resistance_r(0).is_err());
    }

    #[test]
    fn simple_networks() {
        let two = ResistorNetwork::new(2, vec![(0, 1, 1.0)]).unwrap();
        assert!((effective_resistance(&two, 0, 1).unwrap() - 1.0).abs() < 1e-14);
        let tri = ResistorNetwork::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            assert!((effective_resistance(&tri, a, b).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        }
        let split = ResistorNetwork::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(
            effective_resistance(&split, 0, 3),
            Err(Error::Disconnected)
        ));
        assert!(ResistorNetwork::new(2, vec![(0, 0, 1.0)]).is_err());
        assert!(ResistorNetwork::new(2, vec![(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn exact_triangle() {
        let one = ratio(1, 1);
        let tri = ResistorNetwork::new(
            3,
            vec![(0, 1, one.clone()), (1, 2, one.clone()), (0, 2, one)],
        )
        .unwrap();
        assert_eq!(effective_resistance_exact(&tri, 0, 2).unwrap(), ratio(2, 3));
    }

    #[test]
    fn sparse_path_matches_dense() {
        // n = 7 has 2187 nodes and takes the CG route.
        let n = 7;
        let net = cell_graph_network(n).unwrap();
        let r = effective_resistance(&net, 0, Word::repeat(1, n).index()).unwrap();
        let expected = (5.0f64 / 3.0).powi(n as i32) - 1.0;
        assert!((r - expected).abs() / expected < 1e-8);
    }

    #[test]
    fn corner_audit_level_one() {
        let audit = corner_bound_audit(1).unwrap();
        assert_eq!(audit.rows.len(), 6);
        assert!((audit.max_ratio - 4.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn network_csv_round_trip() {
        let net = cell_graph_network(2).unwrap();
        let mut buf = Vec::new();
        net.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"i,j,conductance\n"));
        assert_eq!(ResistorNetwork::read_csv(buf.as_slice()).unwrap(), net);
    }

    #[test]
    fn short_and_cut() {
        let tri = ResistorNetwork::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let (shorted, label) = tri.short(&[1, 2]).unwrap();
        assert_eq!(shorted.nodes(), 2);
        let r = effective_resistance(&shorted, label[0], label[1]).unwrap();
        assert!((r - 0.5).abs() < 1e-14);
        let cut = tri.cut(2);
        assert!((effective_resistance(&cut, 0, 2).unwrap() - 2.0).abs() < 1e-14);
    }
}
