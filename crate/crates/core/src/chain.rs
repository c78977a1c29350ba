//! Cell-average chains that also carry point values.
//!
//! A [`VertexChain`] is given by its values on `V_N` and is extended inside
//! every level-`N` cell by the good-function rule. Corner values and cell
//! averages are therefore known exactly at every level, and so is the whole
//! energy sequence: for `k >= 0`
//!
//! `A_{N+k} = (2/3)((3/5)^k - (3/5)^{2k}) B_N + (3/5)^{2k} A_N`,
//!
//! since the edges of `X_{N+k}` split into edges inside one level-`N` cell
//! and one edge per level-`N` edge, whose average difference shrinks by
//! `3/5` per level.

use std::collections::HashMap;

use num_rational::BigRational;
use rand::Rng;

use crate::energy::{graph_energy, mean_value, CellFunction, VertexProvider};
use crate::error::{Error, Result};
use crate::geometry::{self, apply_map, cell_vertices, DyadicPoint, Word};
use crate::good::GoodFunction;
use crate::scalar::{pow, ratio, Scalar};

#[derive(Clone, Debug)]
pub struct VertexChain<T> {
    level: usize,
    values: HashMap<DyadicPoint, T>,
}

impl<T: Scalar> VertexChain<T> {
    pub fn from_fn(level: usize, f: impl Fn(&DyadicPoint) -> T) -> Self {
        let values = geometry::vertex_set(level)
            .into_iter()
            .map(|p| {
                let v = f(&p);
                (p, v)
            })
            .collect();
        VertexChain { level, values }
    }

    pub fn from_good(u: &GoodFunction<T>) -> Self {
        let values = (0..3u8)
            .map(|i| (DyadicPoint::corner(i), u.boundary[i as usize].clone()))
            .collect();
        VertexChain { level: 0, values }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn to_f64(&self) -> VertexChain<f64> {
        VertexChain {
            level: self.level,
            values: self.values.iter().map(|(p, v)| (*p, v.to_f64())).collect(),
        }
    }

    fn lookup(&self, p: &DyadicPoint) -> T {
        self.values
            .get(p)
            .cloned()
            .expect("vertex of V_N present by construction")
    }

    /// Values at the three corners of `K_w`, for any level.
    pub fn corner_values(&self, w: &Word) -> [T; 3] {
        if w.level() <= self.level {
            cell_vertices(w).map(|p| self.lookup(&p))
        } else {
            let head = w.prefix(self.level);
            let tail = Word::new(w.digits()[self.level..].to_vec()).expect("valid digits");
            self.local(&head).cell_corners(&tail)
        }
    }

    /// The good function `u ∘ f_w` for a level-`N` cell `w`.
    fn local(&self, w: &Word) -> GoodFunction<T> {
        let [a, b, c] = cell_vertices(w).map(|p| self.lookup(&p));
        GoodFunction::new(a, b, c)
    }

    /// `P_N u`: mean of the three corners of every level-`N` cell.
    pub fn finest_averages(&self) -> CellFunction<T> {
        let third = T::from_ratio(1, 3);
        let vals = Word::all(self.level)
            .map(|w| T::sum_all(self.corner_values(&w)) * third.clone())
            .collect();
        CellFunction::new(self.level, vals).expect("3^N values")
    }

    /// `P_n u` for any `n >= 0`.
    pub fn averages(&self, n: usize) -> CellFunction<T> {
        use std::cmp::Ordering;
        match n.cmp(&self.level) {
            Ordering::Equal => self.finest_averages(),
            Ordering::Less => mean_value(&self.finest_averages(), n).expect("n < N"),
            Ordering::Greater => {
                let third = T::from_ratio(1, 3);
                let depth = n - self.level;
                let vals = Word::all(self.level)
                    .flat_map(|w| {
                        self.local(&w)
                            .corner_table(depth)
                            .into_iter()
                            .map(|c| T::sum_all(c) * third.clone())
                            .collect::<Vec<_>>()
                    })
                    .collect();
                CellFunction::new(n, vals).expect("3^n values")
            }
        }
    }

    /// `u ∘ f_i`.
    pub fn compose(&self, i: u8) -> Self {
        if self.level == 0 {
            let g = self.local(&Word::empty()).compose(i);
            return VertexChain::from_good(&g);
        }
        let level = self.level - 1;
        let fi = Word::repeat(i, 1);
        VertexChain::from_fn(level, |p| self.lookup(&apply_map(&fi, p)))
    }

    /// `B_N(u)`, the sum of `S` over the level-`N` cells.
    pub fn b_top(&self) -> T {
        T::sum_all(Word::all(self.level).map(|w| self.local(&w).s()))
    }

    /// `A_n(u)` for any `n >= 1`.
    pub fn a_n(&self, n: usize) -> Result<T> {
        if n == 0 {
            return Err(Error::InvalidLevel("A_n needs n >= 1".into()));
        }
        if n <= self.level {
            let g = geometry::graph(n)?;
            return graph_energy(&self.averages(n), &g);
        }
        let k = n - self.level;
        let t = pow(&T::from_ratio(3, 5), k);
        let a_top = if self.level == 0 {
            T::zero()
        } else {
            let g = geometry::graph(self.level)?;
            graph_energy(&self.finest_averages(), &g)?
        };
        Ok(T::from_ratio(2, 3) * (t.clone() - t.clone() * t.clone()) * self.b_top()
            + t.clone() * t * a_top)
    }

    /// `sup_n D_n(u)`: the larger of the first `N` terms and the limit
    /// `(5/3)^N (2/3) B_N`, the tail being monotone between `D_N` and it.
    pub fn sup_d(&self) -> Result<T> {
        let five_thirds = T::from_ratio(5, 3);
        let mut best = pow(&five_thirds, self.level) * T::from_ratio(2, 3) * self.b_top();
        for n in 1..=self.level {
            let d = pow(&five_thirds, n) * self.a_n(n)?;
            if d > best {
                best = d;
            }
        }
        Ok(best)
    }
}

impl VertexChain<BigRational> {
    /// Values `k/16`, `k` uniform in `-16..=16`, on `V_level`.
    pub fn random<R: Rng>(level: usize, rng: &mut R) -> Self {
        let pts = geometry::vertex_set(level);
        let values = pts
            .into_iter()
            .map(|p| (p, ratio(rng.gen_range(-16..=16), 16)))
            .collect();
        VertexChain { level, values }
    }
}

impl<T: Scalar> VertexProvider<T> for VertexChain<T> {
    fn value_at(&self, w: &Word) -> T {
        let last = w.last().expect("vertex address is non-empty") as usize;
        self.corner_values(&w.parent().unwrap_or_default())[last].clone()
    }
}
