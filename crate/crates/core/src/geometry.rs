//! Words, contraction maps, vertex sets and the typed cell graph `X_n`.
//!
//! Points are held exactly: a [`DyadicPoint`] `(a, b)` stands for the plane
//! point `(a, b·√3)`, so every vertex of `V_n` has dyadic rational
//! coordinates and adjacency is decided by exact equality.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// A finite address `w_1 … w_n` over the alphabet `{0,1,2}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    digits: Vec<u8>,
}

impl Word {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(&d) = digits.iter().find(|&&d| d > 2) {
            return Err(Error::InvalidDigit(char::from(b'0' + d.min(9))));
        }
        Ok(Word { digits })
    }

    pub fn empty() -> Self {
        Word { digits: Vec::new() }
    }

    /// `i^n`, the word repeating digit `i`.
    pub fn repeat(digit: u8, n: usize) -> Self {
        assert!(digit < 3, "digit out of range");
        Word {
            digits: vec![digit; n],
        }
    }

    pub fn level(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn last(&self) -> Option<u8> {
        self.digits.last().copied()
    }

    /// `w^-`: the word with its last digit removed.
    pub fn parent(&self) -> Option<Word> {
        if self.digits.is_empty() {
            None
        } else {
            Some(Word {
                digits: self.digits[..self.digits.len() - 1].to_vec(),
            })
        }
    }

    pub fn child(&self, digit: u8) -> Word {
        assert!(digit < 3, "digit out of range");
        let mut digits = self.digits.clone();
        digits.push(digit);
        Word { digits }
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word {
            digits: self.digits[..len].to_vec(),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut digits = self.digits.clone();
        digits.extend_from_slice(&other.digits);
        Word { digits }
    }

    /// Position in the lexicographic order of `W_n`, i.e. the base-3 value.
    pub fn index(&self) -> usize {
        self.digits
            .iter()
            .fold(0usize, |acc, &d| acc * 3 + d as usize)
    }

    pub fn from_index(mut index: usize, level: usize) -> Word {
        let mut digits = vec![0u8; level];
        for slot in digits.iter_mut().rev() {
            *slot = (index % 3) as u8;
            index /= 3;
        }
        debug_assert_eq!(index, 0, "index out of range for level");
        Word { digits }
    }

    /// All words of length `level` in canonical order.
    pub fn all(level: usize) -> impl Iterator<Item = Word> {
        (0..3usize.pow(level as u32)).map(move |i| Word::from_index(i, level))
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                '2' => Ok(2),
                other => Err(Error::InvalidDigit(other)),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Word { digits })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

/// A point `(a, b·√3)` of the plane with rational `a`, `b`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct DyadicPoint {
    pub a: Rational64,
    pub b: Rational64,
}

impl DyadicPoint {
    pub fn new(a: Rational64, b: Rational64) -> Self {
        DyadicPoint { a, b }
    }

    pub fn from_ratios(a: (i64, i64), b: (i64, i64)) -> Self {
        DyadicPoint {
            a: Rational64::new(a.0, a.1),
            b: Rational64::new(b.0, b.1),
        }
    }

    /// The corners `p_0 = (0,0)`, `p_1 = (1,0)`, `p_2 = (1/2, √3/2)`.
    pub fn corner(i: u8) -> Self {
        match i {
            0 => DyadicPoint::from_ratios((0, 1), (0, 1)),
            1 => DyadicPoint::from_ratios((1, 1), (0, 1)),
            2 => DyadicPoint::from_ratios((1, 2), (1, 2)),
            _ => panic!("corner index out of range"),
        }
    }

    /// Squared Euclidean distance `(Δa)² + 3(Δb)²`, exact.
    pub fn dist_sq(&self, other: &DyadicPoint) -> Rational64 {
        let da = self.a - other.a;
        let db = self.b - other.b;
        da * da + Rational64::from_integer(3) * db * db
    }

    pub fn dist(&self, other: &DyadicPoint) -> f64 {
        self.dist_sq(other).to_f64().unwrap_or(f64::NAN).sqrt()
    }

    /// Cartesian coordinates in floating point.
    pub fn to_xy(&self) -> (f64, f64) {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        (a, b * 3f64.sqrt())
    }

    fn half_toward(&self, corner: u8) -> DyadicPoint {
        let p = DyadicPoint::corner(corner);
        let half = Rational64::new(1, 2);
        DyadicPoint {
            a: (self.a + p.a) * half,
            b: (self.b + p.b) * half,
        }
    }
}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}·√3", self.a, self.b)
    }
}

/// `f_w(p) = f_{w_1} ∘ … ∘ f_{w_n}(p)` with `f_i(x) = (x + p_i)/2`.
pub fn apply_map(w: &Word, p: &DyadicPoint) -> DyadicPoint {
    w.digits()
        .iter()
        .rev()
        .fold(*p, |acc, &d| acc.half_toward(d))
}

/// The anchor `P_w = f_{w_1 … w_{n-1}}(p_{w_n})`.
pub fn cell_anchor(w: &Word) -> Result<DyadicPoint> {
    let last = w.last().ok_or(Error::EmptyWord)?;
    let parent = w.parent().unwrap_or_default();
    Ok(apply_map(&parent, &DyadicPoint::corner(last)))
}

/// `V_w = (f_w(p_0), f_w(p_1), f_w(p_2))`.
pub fn cell_vertices(w: &Word) -> [DyadicPoint; 3] {
    [0u8, 1, 2].map(|i| apply_map(w, &DyadicPoint::corner(i)))
}

/// The vertex set `V_n`, deduplicated and sorted.
pub fn vertex_set(n: usize) -> Vec<DyadicPoint> {
    let mut current: Vec<DyadicPoint> = (0..3).map(DyadicPoint::corner).collect();
    for _ in 0..n {
        let mut next: HashSet<DyadicPoint> = HashSet::with_capacity(current.len() * 3);
        for i in 0..3u8 {
            next.extend(current.iter().map(|p| p.half_toward(i)));
        }
        current = next.into_iter().collect();
    }
    current.sort();
    current
}

/// `|V_n| = (3^{n+1} + 3)/2`.
pub fn vertex_count(n: usize) -> usize {
    (3usize.pow(n as u32 + 1) + 3) / 2
}

/// `|H_n| = (3^{n+1} - 3)/2`.
pub fn edge_count(n: usize) -> usize {
    (3usize.pow(n as u32 + 1) - 3) / 2
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub enum EdgeKind {
    TypeI,
    TypeII,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeKind::TypeI => f.write_str("I"),
            EdgeKind::TypeII => f.write_str("II"),
        }
    }
}

/// An edge of `X_n`: two cells of equal level meeting in one point.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Edge {
    pub w1: Word,
    pub w2: Word,
    pub kind: EdgeKind,
    pub shared_point: DyadicPoint,
}

/// The graph `X_n` on `W_n` with typed edges `H_n`.
#[derive(Clone, Debug)]
pub struct CellGraph {
    pub level: usize,
    pub words: Vec<Word>,
    pub edges: Vec<Edge>,
    pairs: Vec<(usize, usize)>,
}

impl CellGraph {
    /// Canonical-index pairs `(w1.index(), w2.index())`, one per edge.
    pub fn index_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn node_count(&self) -> usize {
        self.words.len()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.words.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &self.pairs {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
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
        count == n
    }

    pub fn type_counts(&self) -> (usize, usize) {
        let t1 = self
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::TypeI)
            .count();
        (t1, self.edges.len() - t1)
    }

    /// Writes the graph as CSV with header
    /// `level,w1,w2,kind,shared_a_num,shared_a_den,shared_b_num,shared_b_den`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "level",
            "w1",
            "w2",
            "kind",
            "shared_a_num",
            "shared_a_den",
            "shared_b_num",
            "shared_b_den",
        ])?;
        for e in &self.edges {
            wtr.write_record(edge_record(self.level, e))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn json_rows(&self) -> Vec<serde_json::Value> {
        self.edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "level": self.level,
                    "w1": e.w1.to_string(),
                    "w2": e.w2.to_string(),
                    "kind": e.kind.to_string(),
                    "shared_a_num": *e.shared_point.a.numer(),
                    "shared_a_den": *e.shared_point.a.denom(),
                    "shared_b_num": *e.shared_point.b.numer(),
                    "shared_b_den": *e.shared_point.b.denom(),
                })
            })
            .collect()
    }
}

fn edge_record(level: usize, e: &Edge) -> [String; 8] {
    [
        level.to_string(),
        e.w1.to_string(),
        e.w2.to_string(),
        e.kind.to_string(),
        e.shared_point.a.numer().to_string(),
        e.shared_point.a.denom().to_string(),
        e.shared_point.b.numer().to_string(),
        e.shared_point.b.denom().to_string(),
    ]
}

/// Builds `X_n`: two words are adjacent iff their cells share a vertex.
///
/// Same-level cells meet in at most one point, and that point is a vertex
/// of both, so grouping cells by their exact vertex coordinates yields
/// every edge exactly once.
pub fn build_graph(n: usize) -> Result<CellGraph> {
    if n == 0 {
        return Err(Error::InvalidLevel("cell graph needs n >= 1".into()));
    }
    let words: Vec<Word> = Word::all(n).collect();
    let mut incidence: HashMap<DyadicPoint, Vec<usize>> = HashMap::with_capacity(words.len() * 2);
    for (idx, w) in words.iter().enumerate() {
        for p in cell_vertices(w) {
            incidence.entry(p).or_default().push(idx);
        }
    }
    let mut found: Vec<(usize, usize, DyadicPoint)> = Vec::with_capacity(edge_count(n));
    for (p, cells) in &incidence {
        for (k, &i) in cells.iter().enumerate() {
            for &j in &cells[k + 1..] {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                found.push((lo, hi, *p));
            }
        }
    }
    found.sort_by_key(|x| (x.0, x.1));
    let mut edges = Vec::with_capacity(found.len());
    let mut pairs = Vec::with_capacity(found.len());
    for (i, j, p) in found {
        let (w1, w2) = (words[i].clone(), words[j].clone());
        let kind = if cell_anchor(&w1)? != cell_anchor(&w2)? {
            EdgeKind::TypeI
        } else {
            EdgeKind::TypeII
        };
        edges.push(Edge {
            w1,
            w2,
            kind,
            shared_point: p,
        });
        pairs.push((i, j));
    }
    Ok(CellGraph {
        level: n,
        words,
        edges,
        pairs,
    })
}

/// Shared, lazily built `X_n`; graphs are immutable once constructed.
pub fn graph(n: usize) -> Result<Arc<CellGraph>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CellGraph>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(g) = cache.lock().expect("graph cache poisoned").get(&n) {
        return Ok(Arc::clone(g));
    }
    let g = Arc::new(build_graph(n)?);
    cache
        .lock()
        .expect("graph cache poisoned")
        .insert(n, Arc::clone(&g));
    Ok(g)
}

/// Recovers the level-`k` type-I edge `(v1, v2)` that a type-II edge pads:
/// `w1 = v1 · j^{n-k}`, `w2 = v2 · i^{n-k}` with `i`, `j` the last digits of
/// `v1`, `v2`.
pub fn type2_origin(e: &Edge) -> Result<(usize, Edge)> {
    if e.kind != EdgeKind::TypeII {
        return Err(Error::NotTypeTwo(e.w1.to_string(), e.w2.to_string()));
    }
    let n = e.w1.level();
    if e.w2.level() != n {
        return Err(Error::LevelMismatch {
            expected: n,
            found: e.w2.level(),
        });
    }
    let (d1, d2) = (e.w1.digits(), e.w2.digits());
    let common = d1.iter().zip(d2).take_while(|(a, b)| a == b).count();
    let k = common + 1;
    if k >= n {
        return Err(Error::Network(format!(
            "({}, {}) is not a padded type-I edge",
            e.w1, e.w2
        )));
    }
    let (i, j) = (d1[k - 1], d2[k - 1]);
    let pads = d1[k..].iter().all(|&d| d == j) && d2[k..].iter().all(|&d| d == i);
    if !pads {
        return Err(Error::Network(format!(
            "({}, {}) is not a padded type-I edge",
            e.w1, e.w2
        )));
    }
    let v1 = e.w1.prefix(k);
    let v2 = e.w2.prefix(k);
    let shared = cell_anchor(&v1.child(j))?;
    Ok((
        k,
        Edge {
            w1: v1,
            w2: v2,
            kind: EdgeKind::TypeI,
            shared_point: shared,
        },
    ))
}

/// Pads a level-`k` type-I edge out to level `n`, the inverse of
/// [`type2_origin`].
pub fn pad_type1(origin: &Edge, n: usize) -> Result<Edge> {
    let k = origin.w1.level();
    let i = origin.w1.last().ok_or(Error::EmptyWord)?;
    let j = origin.w2.last().ok_or(Error::EmptyWord)?;
    let w1 = origin.w1.concat(&Word::repeat(j, n - k));
    let w2 = origin.w2.concat(&Word::repeat(i, n - k));
    let kind = if cell_anchor(&w1)? != cell_anchor(&w2)? {
        EdgeKind::TypeI
    } else {
        EdgeKind::TypeII
    };
    Ok(Edge {
        w1,
        w2,
        kind,
        shared_point: origin.shared_point,
    })
}

/// Squared-distance test used where only a float distance is needed.
pub fn is_zero_distance(p: &DyadicPoint, q: &DyadicPoint) -> bool {
    p.dist_sq(q).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn pt(a: (i64, i64), b: (i64, i64)) -> DyadicPoint {
        DyadicPoint::from_ratios(a, b)
    }

    #[test]
    fn word_index_round_trip() {
        for level in 0..5 {
            for (i, word) in Word::all(level).enumerate() {
                assert_eq!(word.index(), i);
                assert_eq!(Word::from_index(i, level), word);
            }
        }
        assert!("013".parse::<Word>().is_err());
        assert!(Word::new(vec![0, 3]).is_err());
    }

    #[test]
    fn apply_map_examples() {
        let p1 = DyadicPoint::corner(1);
        assert_eq!(apply_map(&Word::empty(), &p1), p1);
        assert_eq!(apply_map(&w("0"), &p1), pt((1, 2), (0, 1)));
        // f_2(f_1(p_0)) = f_2((1/2, 0)) = (1/2, 1/4): closed affine form
        // 2^{-n} x + Σ 2^{-i} p_{w_i}.
        let direct = {
            let mut a = Rational64::new(0, 1);
            let mut b = Rational64::new(0, 1);
            for (i, &d) in [2u8, 1].iter().enumerate() {
                let s = Rational64::new(1, 1 << (i + 1));
                a += s * DyadicPoint::corner(d).a;
                b += s * DyadicPoint::corner(d).b;
            }
            pt((*a.numer(), *a.denom()), (*b.numer(), *b.denom()))
        };
        assert_eq!(apply_map(&w("21"), &DyadicPoint::corner(0)), direct);
        assert_eq!(direct, pt((1, 2), (1, 4)));
    }

    #[test]
    fn anchors() {
        assert_eq!(cell_anchor(&w("0")).unwrap(), DyadicPoint::corner(0));
        assert_eq!(cell_anchor(&w("01")).unwrap(), pt((1, 2), (0, 1)));
        assert!(cell_anchor(&Word::empty()).is_err());
        for level in 0..4 {
            for v in Word::all(level) {
                for (i, j) in [(0u8, 1u8), (1, 2), (0, 2)] {
                    let a = cell_anchor(&v.child(i).child(j)).unwrap();
                    let b = cell_anchor(&v.child(j).child(i)).unwrap();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn cell_vertices_examples() {
        let v0: Vec<_> = (0..3).map(DyadicPoint::corner).collect();
        assert_eq!(cell_vertices(&Word::empty()).to_vec(), v0);
        assert_eq!(
            cell_vertices(&w("2")),
            [pt((1, 4), (1, 4)), pt((3, 4), (1, 4)), pt((1, 2), (1, 2))]
        );
        for level in 1..4 {
            for v in Word::all(level) {
                let anchors = [0u8, 1, 2].map(|i| cell_anchor(&v.child(i)).unwrap());
                assert_eq!(cell_vertices(&v), anchors);
            }
        }
    }

    #[test]
    fn vertex_set_sizes() {
        assert_eq!(vertex_set(0).len(), 3);
        assert_eq!(vertex_set(1).len(), 6);
        assert_eq!(vertex_set(3).len(), 42);
        for n in 0..6 {
            assert_eq!(vertex_set(n).len(), vertex_count(n));
        }
    }

    #[test]
    fn small_graphs() {
        let g1 = build_graph(1).unwrap();
        assert_eq!(g1.edges.len(), 3);
        assert_eq!(g1.type_counts(), (3, 0));
        let g2 = build_graph(2).unwrap();
        assert_eq!(g2.edges.len(), 12);
        assert_eq!(g2.type_counts(), (9, 3));
        assert!(build_graph(0).is_err());

        let g3 = build_graph(3).unwrap();
        let find = |a: &str, b: &str| {
            g3.edges
                .iter()
                .find(|e| e.w1 == w(a) && e.w2 == w(b))
                .cloned()
        };
        assert_eq!(find("000", "001").unwrap().kind, EdgeKind::TypeI);
        assert_eq!(find("001", "010").unwrap().kind, EdgeKind::TypeII);
    }

    #[test]
    fn type2_origin_examples() {
        let g3 = build_graph(3).unwrap();
        let e = g3
            .edges
            .iter()
            .find(|e| e.w1 == w("001") && e.w2 == w("010"))
            .unwrap();
        let (k, origin) = type2_origin(e).unwrap();
        assert_eq!(k, 2);
        assert_eq!((origin.w1.clone(), origin.w2.clone()), (w("00"), w("01")));
        assert_eq!(pad_type1(&origin, 3).unwrap(), *e);

        let t1 = g3.edges.iter().find(|e| e.kind == EdgeKind::TypeI).unwrap();
        assert!(matches!(type2_origin(t1), Err(Error::NotTypeTwo(..))));
    }

    #[test]
    fn graph_csv_header_and_rows() {
        let g = build_graph(2).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "level,w1,w2,kind,shared_a_num,shared_a_den,shared_b_num,shared_b_den"
        );
        assert_eq!(lines.count(), 12);
    }
}
