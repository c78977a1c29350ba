//! Discrete energies on `X_n` and the averaging operators between levels.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, cell_anchor, cell_vertices, CellGraph, DyadicPoint, Word};
use crate::scalar::{pow, Scalar};

/// A function on `W_n`, stored in canonical (lexicographic) word order.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFunction<T> {
    level: usize,
    values: Vec<T>,
}

impl<T: Scalar> CellFunction<T> {
    pub fn new(level: usize, values: Vec<T>) -> Result<Self> {
        let expected = 3usize.pow(level as u32);
        if values.len() != expected {
            return Err(Error::Length {
                level,
                expected,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(CellFunction { level, values })
    }

    pub fn constant(level: usize, c: T) -> Self {
        CellFunction {
            level,
            values: vec![c; 3usize.pow(level as u32)],
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, w: &Word) -> &T {
        &self.values[w.index()]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> CellFunction<U> {
        CellFunction {
            level: self.level,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> CellFunction<f64> {
        self.map(|v| v.to_f64())
    }

    /// CSV with header `level,word,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["level", "word", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            wtr.write_record([
                self.level.to_string(),
                Word::from_index(i, self.level).to_string(),
                format!("{:?}", v.to_f64()),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl CellFunction<f64> {
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut level = None;
        let mut rows: Vec<(usize, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let lv: usize = rec[0]
                .parse()
                .map_err(|e| Error::Parse(format!("level: {e}")))?;
            if *level.get_or_insert(lv) != lv {
                return Err(Error::Parse("mixed levels in cell function".into()));
            }
            let w: Word = rec[1].parse()?;
            if w.level() != lv {
                return Err(Error::LevelMismatch {
                    expected: lv,
                    found: w.level(),
                });
            }
            let v: f64 = rec[2]
                .parse()
                .map_err(|e| Error::Parse(format!("value: {e}")))?;
            rows.push((w.index(), v));
        }
        let level = level.ok_or_else(|| Error::Parse("empty cell function".into()))?;
        let mut values = vec![f64::NAN; 3usize.pow(level as u32)];
        for (i, v) in rows {
            values[i] = v;
        }
        CellFunction::new(level, values)
    }
}

/// A function on the vertex set `V_n`.
#[derive(Clone, Debug)]
pub struct VertexFunction<T> {
    pub level: usize,
    pub values: HashMap<DyadicPoint, T>,
}

impl<T: Scalar> VertexFunction<T> {
    pub fn from_fn(level: usize, f: impl Fn(&DyadicPoint) -> T) -> Self {
        let values = geometry::vertex_set(level)
            .into_iter()
            .map(|p| {
                let v = f(&p);
                (p, v)
            })
            .collect();
        VertexFunction { level, values }
    }

    pub fn get(&self, p: &DyadicPoint) -> Result<&T> {
        self.values
            .get(p)
            .ok_or_else(|| Error::MissingVertex(p.to_string()))
    }
}

/// Anything that can be evaluated at the vertex `P_w` of `V*`.
pub trait VertexProvider<T>: Sync {
    /// Value at the point `P_w`; `w` is non-empty.
    fn value_at(&self, w: &Word) -> T;
}

/// Adapts a closure on Cartesian coordinates into a [`VertexProvider`].
pub struct PointFn<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> VertexProvider<f64> for PointFn<F> {
    fn value_at(&self, w: &Word) -> f64 {
        let (x, y) = cell_anchor(w).expect("vertex address is non-empty").to_xy();
        (self.0)(x, y)
    }
}

fn five_thirds_pow<T: Scalar>(n: usize) -> T {
    pow(&T::from_ratio(5, 3), n)
}

/// `E_n(u,u)`: sum of squared differences over the edges of `X_n`.
pub fn graph_energy<T: Scalar>(u: &CellFunction<T>, g: &CellGraph) -> Result<T> {
    if u.level != g.level {
        return Err(Error::LevelMismatch {
            expected: g.level,
            found: u.level,
        });
    }
    let v = &u.values;
    Ok(T::sum_all(
        g.index_pairs()
            .iter()
            .map(|&(i, j)| (v[i].clone() - v[j].clone()).square()),
    ))
}

/// `G_n(u) = (5/3)^n E_n(u,u)`.
pub fn scaled_graph_energy<T: Scalar>(u: &CellFunction<T>, g: &CellGraph) -> Result<T> {
    Ok(five_thirds_pow::<T>(g.level) * graph_energy(u, g)?)
}

/// `M_{n,m}`: averages each block of `3^m` descendants down to level `n`.
pub fn mean_value<T: Scalar>(u: &CellFunction<T>, target: usize) -> Result<CellFunction<T>> {
    if target >= u.level {
        return Err(Error::InvalidLevel(format!(
            "mean value target {target} must be below level {}",
            u.level
        )));
    }
    let block = 3usize.pow((u.level - target) as u32);
    let weight = T::from_ratio(1, block as i64);
    let values = u
        .values
        .chunks(block)
        .map(|c| T::sum_all(c.iter().cloned()) * weight.clone())
        .collect();
    Ok(CellFunction {
        level: target,
        values,
    })
}

/// Level-`depth` leaf averages: each leaf gets the mean of the provider at
/// its three vertices.
pub fn leaf_averages<T: Scalar, P: VertexProvider<T> + ?Sized>(
    provider: &P,
    depth: usize,
) -> CellFunction<T> {
    let third = T::from_ratio(1, 3);
    let values: Vec<T> = (0..3usize.pow(depth as u32))
        .into_par_iter()
        .map(|i| {
            let leaf = Word::from_index(i, depth);
            let s = T::sum_all((0..3u8).map(|c| provider.value_at(&leaf.child(c))));
            s * third.clone()
        })
        .collect();
    CellFunction {
        level: depth,
        values,
    }
}

/// Quadrature for `P_n u`: refine to level `depth`, average vertex values on
/// each leaf with weight `3^{-depth}`, then take block means.
pub fn cell_averages<T: Scalar, P: VertexProvider<T> + ?Sized>(
    provider: &P,
    n: usize,
    depth: usize,
) -> Result<CellFunction<T>> {
    if depth < n {
        return Err(Error::InvalidLevel(format!(
            "quadrature depth {depth} below level {n}"
        )));
    }
    let leaves = leaf_averages(provider, depth);
    if depth == n {
        Ok(leaves)
    } else {
        mean_value(&leaves, n)
    }
}

/// `(A_n, D_n)` from the level-`n` averages `P_n u`.
pub fn an_dn<T: Scalar>(averages: &CellFunction<T>, g: &CellGraph) -> Result<(T, T)> {
    let a = graph_energy(averages, g)?;
    let d = five_thirds_pow::<T>(g.level) * a.clone();
    Ok((a, d))
}

/// `B_n(u)`: over every level-`n` cell, the squared differences on its
/// three unordered vertex pairs.
pub fn bn<T: Scalar>(u: &VertexFunction<T>, n: usize) -> Result<T> {
    let mut terms = Vec::with_capacity(3 * 3usize.pow(n as u32));
    for w in Word::all(n) {
        let [p0, p1, p2] = cell_vertices(&w);
        let (a, b, c) = (u.get(&p0)?, u.get(&p1)?, u.get(&p2)?);
        terms.push((a.clone() - b.clone()).square());
        terms.push((b.clone() - c.clone()).square());
        terms.push((a.clone() - c.clone()).square());
    }
    Ok(T::sum_all(terms))
}

/// The block of `u` under prefix `w`, reindexed at level `N - |w|`; this is
/// `P_{N-n}(u ∘ f_w)` when `u = P_N u`.
pub fn restrict<T: Scalar>(u: &CellFunction<T>, w: &Word) -> Result<CellFunction<T>> {
    if w.level() > u.level {
        return Err(Error::InvalidLevel(format!(
            "prefix of length {} exceeds level {}",
            w.level(),
            u.level
        )));
    }
    let rest = u.level - w.level();
    let block = 3usize.pow(rest as u32);
    let start = w.index() * block;
    Ok(CellFunction {
        level: rest,
        values: u.values[start..start + block].to_vec(),
    })
}

/// `G_n(M_{n,m} u) / G_{n+m}(u)` for `u` at level `n + m`.
pub fn weak_mono_ratio(u: &CellFunction<f64>, n: usize) -> Result<f64> {
    let fine = geometry::graph(u.level)?;
    let coarse = geometry::graph(n)?;
    let denom = scaled_graph_energy(u, &fine)?;
    if denom == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let num = scaled_graph_energy(&mean_value(u, n)?, &coarse)?;
    Ok(num / denom)
}

/// The sequence `A_1 … A_N`, `D_1 … D_N` with its running supremum.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyProfile {
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    pub sup_d: f64,
}

impl EnergyProfile {
    pub fn from_a(a: Vec<f64>) -> Self {
        let d: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(i, ai)| (5.0f64 / 3.0).powi(i as i32 + 1) * ai)
            .collect();
        let sup_d = d.iter().copied().fold(0.0, f64::max);
        EnergyProfile { a, d, sup_d }
    }

    /// Profile of a cell-average chain given at its finest level `N`:
    /// `P_n u = M_{n,N-n} P_N u` for every `n < N`.
    pub fn from_chain(finest: &CellFunction<f64>) -> Result<Self> {
        let top = finest.level();
        let mut a = Vec::with_capacity(top);
        for n in 1..=top {
            let avg = if n == top {
                finest.clone()
            } else {
                mean_value(finest, n)?
            };
            let g = geometry::graph(n)?;
            a.push(graph_energy(&avg, &g)?);
        }
        Ok(EnergyProfile::from_a(a))
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// CSV with header `n,A_n,D_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["n", "A_n", "D_n"])?;
        for (i, (a, d)) in self.a.iter().zip(&self.d).enumerate() {
            wtr.write_record([(i + 1).to_string(), format!("{a:?}"), format!("{d:?}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn cf(level: usize, v: &[f64]) -> CellFunction<f64> {
        CellFunction::new(level, v.to_vec()).unwrap()
    }

    #[test]
    fn graph_energy_examples() {
        let g1 = geometry::build_graph(1).unwrap();
        assert_eq!(graph_energy(&CellFunction::constant(1, 4.0), &g1).unwrap(), 0.0);
        assert_eq!(graph_energy(&cf(1, &[1.0, 0.0, 0.0]), &g1).unwrap(), 2.0);
        let g2 = geometry::build_graph(2).unwrap();
        assert!(matches!(
            graph_energy(&cf(1, &[1.0, 0.0, 0.0]), &g2),
            Err(Error::LevelMismatch { .. })
        ));
    }

    #[test]
    fn cell_function_validation() {
        assert!(CellFunction::new(1, vec![1.0, 2.0]).is_err());
        assert!(matches!(
            CellFunction::new(1, vec![1.0, f64::NAN, 0.0]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn mean_value_examples() {
        let u = cf(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = mean_value(&u, 1).unwrap();
        assert_eq!(m.values(), &[1.0 / 3.0, 0.0, 0.0]);
        assert_eq!(
            mean_value(&CellFunction::constant(3, 2.5), 1).unwrap(),
            CellFunction::constant(1, 2.5)
        );
        assert!(mean_value(&u, 2).is_err());

        let exact: CellFunction<BigRational> =
            CellFunction::new(3, (0..27).map(|i| ratio(i * i - 5, 7)).collect()).unwrap();
        let two_step = mean_value(&mean_value(&exact, 2).unwrap(), 1).unwrap();
        assert_eq!(two_step, mean_value(&exact, 1).unwrap());
    }

    #[test]
    fn restrict_blocks() {
        let u = cf(2, &[0., 1., 2., 3., 4., 5., 6., 7., 8.]);
        assert_eq!(restrict(&u, &Word::empty()).unwrap(), u);
        assert_eq!(restrict(&u, &"0".parse().unwrap()).unwrap().values(), &[0., 1., 2.]);
        assert_eq!(restrict(&u, &"21".parse().unwrap()).unwrap().values(), &[7.]);
        assert!(restrict(&u, &"000".parse().unwrap()).is_err());
    }

    #[test]
    fn bn_small_cases() {
        let u = VertexFunction::from_fn(0, |p| if *p == DyadicPoint::corner(0) { 1.0 } else { 0.0 });
        assert_eq!(bn(&u, 0).unwrap(), 2.0);
        let c = VertexFunction::from_fn(2, |_| 3.0);
        assert_eq!(bn(&c, 2).unwrap(), 0.0);
        let partial = VertexFunction::from_fn(0, |_| 1.0);
        assert!(matches!(bn(&partial, 1), Err(Error::MissingVertex(_))));
    }

    #[test]
    fn cell_averages_constant_and_consistency() {
        let c = PointFn(|_, _| 1.5);
        let avg = cell_averages(&c, 2, 4).unwrap();
        assert!(avg.values().iter().all(|&v| (v - 1.5).abs() < 1e-15));

        let f = PointFn(|x: f64, y: f64| (3.0 * x).sin() + x * y);
        let fine = cell_averages(&f, 3, 6).unwrap();
        let coarse = cell_averages(&f, 1, 6).unwrap();
        let via_mean = mean_value(&fine, 1).unwrap();
        for (a, b) in coarse.values().iter().zip(via_mean.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(cell_averages(&f, 3, 2).is_err());
    }

    #[test]
    fn weak_mono_rejects_constant() {
        let u = CellFunction::constant(3, 1.0);
        assert!(matches!(weak_mono_ratio(&u, 1), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn profile_csv() {
        let p = EnergyProfile::from_a(vec![0.3, 0.2]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,A_n,D_n\n1,0.3,"));
        assert_eq!(p.sup_d, p.d.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn cell_function_csv_round_trip() {
        let u = cf(2, &[0.5, -1.0, 2.0, 3.25, 0.0, 1e-3, 7.0, 8.0, -9.5]);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        assert_eq!(CellFunction::read_csv(buf.as_slice()).unwrap(), u);
    }
}
