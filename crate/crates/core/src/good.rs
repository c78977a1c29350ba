//! Good functions `U^{(x0,x1,x2)}`: the functions generated from three
//! corner values by the 1/5–2/5 extension rule.
//!
//! Everything here is exact when the scalar is `BigRational`; that is the
//! default for identities, while `f64` instances serve quadrature and
//! sampling.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use crate::energy::VertexProvider;
use crate::error::{Error, Result};
use crate::geometry::{cell_anchor, Word};
use crate::scalar::{pow, Scalar};

/// `U^{(x0,x1,x2)}`, determined by its values at `p_0, p_1, p_2`.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodFunction<T> {
    pub boundary: [T; 3],
}

/// Values at the three midpoints `(P_{w01}, P_{w12}, P_{w02})` of a cell whose
/// corners carry `a, b, c`.
pub fn extend_once<T: Scalar>(a: &T, b: &T, c: &T) -> (T, T, T) {
    let two = T::from_int(2);
    let fifth = T::from_ratio(1, 5);
    let m01 = (two.clone() * a.clone() + two.clone() * b.clone() + c.clone()) * fifth.clone();
    let m12 = (a.clone() + two.clone() * b.clone() + two.clone() * c.clone()) * fifth.clone();
    let m02 = (two.clone() * a.clone() + b.clone() + two * c.clone()) * fifth;
    (m01, m12, m02)
}

/// Corner values of child `d` of a cell with corner values `corners`.
pub fn child_corners<T: Scalar>(corners: &[T; 3], d: u8) -> [T; 3] {
    let (m01, m12, m02) = extend_once(&corners[0], &corners[1], &corners[2]);
    match d {
        0 => [corners[0].clone(), m01, m02],
        1 => [m01, corners[1].clone(), m12],
        2 => [m02, m12, corners[2].clone()],
        _ => panic!("digit out of range"),
    }
}

/// Inverts one extension step. `a` sits at the corner shared with the parent
/// (child index `case`); `b`, `c` sit at the midpoints toward parent corners
/// `case+1` and `case+2` (mod 3). Returns the parent values `x`, `y` at those
/// two corners and the value `z` at the midpoint between them.
pub fn lift_boundary<T: Scalar>(case: u8, a: &T, b: &T, c: &T) -> (T, T, T) {
    debug_assert!(case < 3);
    let third = T::from_ratio(1, 3);
    let two = T::from_int(2);
    let five = T::from_int(5);
    let ten = T::from_int(10);
    let x = (ten.clone() * b.clone() - two.clone() * a.clone() - five.clone() * c.clone())
        * third.clone();
    let y = (ten * c.clone() - two.clone() * a.clone() - five * b.clone()) * third.clone();
    let z = (two.clone() * b.clone() + two * c.clone() - a.clone()) * third;
    (x, y, z)
}

impl<T: Scalar> GoodFunction<T> {
    pub fn new(x0: T, x1: T, x2: T) -> Self {
        GoodFunction {
            boundary: [x0, x1, x2],
        }
    }

    /// `S = (x0-x1)² + (x1-x2)² + (x0-x2)²`.
    pub fn s(&self) -> T {
        let [a, b, c] = &self.boundary;
        (a.clone() - b.clone()).square()
            + (b.clone() - c.clone()).square()
            + (a.clone() - c.clone()).square()
    }

    /// Corner values `(U(f_w p_0), U(f_w p_1), U(f_w p_2))` of the cell `K_w`.
    pub fn cell_corners(&self, w: &Word) -> [T; 3] {
        w.digits()
            .iter()
            .fold(self.boundary.clone(), |acc, &d| child_corners(&acc, d))
    }

    /// `U(P_w)` for a non-empty vertex address `w`.
    pub fn evaluate(&self, w: &Word) -> Result<T> {
        let last = w.last().ok_or(Error::EmptyWord)?;
        let parent = w.parent().unwrap_or_default();
        let corners = self.cell_corners(&parent);
        Ok(corners[last as usize].clone())
    }

    /// `P_n U(w)` via the parent-cell formula `(3U_i + U_j + U_k)/5`.
    pub fn exact_cell_average(&self, w: &Word) -> Result<T> {
        let last = w.last().ok_or(Error::EmptyWord)? as usize;
        let parent = w.parent().unwrap_or_default();
        let corners = self.cell_corners(&parent);
        let total = T::sum_all(corners.iter().cloned());
        Ok((total + T::from_int(2) * corners[last].clone()) * T::from_ratio(1, 5))
    }

    /// Corner triples of all level-`n` cells in canonical order, built
    /// top-down in `O(3^n)`.
    pub fn corner_table(&self, n: usize) -> Vec<[T; 3]> {
        let mut level = vec![self.boundary.clone()];
        for _ in 0..n {
            level = level
                .iter()
                .flat_map(|c| (0..3u8).map(move |d| child_corners(c, d)))
                .collect();
        }
        level
    }

    /// `U ∘ f_i`, again a good function.
    pub fn compose(&self, i: u8) -> Self {
        GoodFunction {
            boundary: child_corners(&self.boundary, i),
        }
    }

    /// `λU + μV`.
    pub fn combine(lambda: &T, u: &Self, mu: &T, v: &Self) -> Self {
        let b = [0, 1, 2].map(|i| {
            lambda.clone() * u.boundary[i].clone() + mu.clone() * v.boundary[i].clone()
        });
        GoodFunction { boundary: b }
    }

    pub fn to_f64(&self) -> GoodFunction<f64> {
        GoodFunction {
            boundary: [0, 1, 2].map(|i| self.boundary[i].to_f64()),
        }
    }

    /// Closed forms `A_n = (2/3)[(3/5)^n - (3/5)^{2n}] S`,
    /// `B_n = (3/5)^n S` and `D_n = (5/3)^n A_n = (2/3)(1 - (3/5)^n) S`.
    pub fn closed_form_energies(&self, n: usize) -> ClosedForm<T> {
        let s = self.s();
        let t = pow(&T::from_ratio(3, 5), n);
        let two_thirds = T::from_ratio(2, 3);
        let a = two_thirds.clone() * (t.clone() - t.clone() * t.clone()) * s.clone();
        let b = t.clone() * s.clone();
        let d = two_thirds * (T::one() - t) * s;
        ClosedForm { a, b, d }
    }

    /// `sup_n D_n(U) = (2/3) S`, the monotone limit.
    pub fn sup_d(&self) -> T {
        T::from_ratio(2, 3) * self.s()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForm<T> {
    pub a: T,
    pub b: T,
    pub d: T,
}

impl<T: Scalar> VertexProvider<T> for GoodFunction<T> {
    fn value_at(&self, w: &Word) -> T {
        self.evaluate(w).expect("vertex address is non-empty")
    }
}

/// The good function whose restriction to `V_w` is `values` (in corner
/// order), obtained by lifting one level at a time up to `V_0`.
pub fn lift_to_root<T: Scalar>(w: &Word, values: [T; 3]) -> GoodFunction<T> {
    let mut vals = values;
    let mut cur = w.clone();
    while let Some(d) = cur.last() {
        let j = (d + 1) % 3;
        let k = (d + 2) % 3;
        let (x, y, _) = lift_boundary(d, &vals[d as usize], &vals[j as usize], &vals[k as usize]);
        let mut parent = vals.clone();
        parent[j as usize] = x;
        parent[k as usize] = y;
        vals = parent;
        cur = cur.parent().unwrap_or_default();
    }
    GoodFunction { boundary: vals }
}

fn pad_to(w: &Word, len: usize) -> Word {
    let last = w.last().expect("non-empty");
    w.concat(&Word::repeat(last, len - w.level()))
}

fn indicator<T: Scalar>(i: usize) -> [T; 3] {
    let mut v = [T::zero(), T::zero(), T::zero()];
    v[i] = T::one();
    v
}

/// A good function taking different values at the vertices `P_x` and `P_y`.
///
/// Both addresses are padded to a common length; the points then sit at
/// corners of two cells of equal level. Below their longest common prefix
/// `w` the candidates are the corner indicators on `V_w` (the side of `x`
/// first), each lifted to `V_0` and checked by exact evaluation.
pub fn separation_witness(x: &Word, y: &Word) -> Result<GoodFunction<BigRational>> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyWord);
    }
    if cell_anchor(x)? == cell_anchor(y)? {
        return Err(Error::IdenticalPoints);
    }
    let len = x.level().max(y.level());
    let (px, py) = (pad_to(x, len), pad_to(y, len));
    let cx = px.parent().unwrap_or_default();
    let cy = py.parent().unwrap_or_default();
    let common = cx
        .digits()
        .iter()
        .zip(cy.digits())
        .take_while(|(a, b)| a == b)
        .count();
    let w = cx.prefix(common);
    let order: Vec<usize> = if cx == cy {
        vec![px.last().expect("non-empty") as usize]
    } else {
        let first = cx.digits()[common] as usize;
        vec![first, (first + 1) % 3, (first + 2) % 3]
    };
    for i in order {
        let u = lift_to_root(&w, indicator::<BigRational>(i));
        if u.evaluate(x)? != u.evaluate(y)? {
            return Ok(u);
        }
    }
    Err(Error::NoSeparation)
}

fn rational_json(r: &BigRational) -> Value {
    let to_json = |b: &BigInt| -> Value {
        i64::try_from(b.clone())
            .map(Value::from)
            .unwrap_or_else(|_| Value::String(b.to_string()))
    };
    json!([to_json(r.numer()), to_json(r.denom())])
}

fn rational_from_json(v: &Value) -> Result<BigRational> {
    let parse = |x: &Value| -> Result<BigInt> {
        match x {
            Value::Number(n) => n
                .as_i64()
                .map(BigInt::from)
                .ok_or_else(|| Error::Parse(format!("not an integer: {n}"))),
            Value::String(s) => s
                .parse::<BigInt>()
                .map_err(|e| Error::Parse(e.to_string())),
            other => Err(Error::Parse(format!("expected integer, found {other}"))),
        }
    };
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse("expected [numerator, denominator]".into()))?;
    let den = parse(&pair[1])?;
    if den == BigInt::from(0) {
        return Err(Error::Parse("zero denominator".into()));
    }
    Ok(BigRational::new(parse(&pair[0])?, den))
}

impl GoodFunction<BigRational> {
    /// `{"x0":[num,den],"x1":[num,den],"x2":[num,den]}`.
    pub fn to_json(&self) -> Value {
        json!({
            "x0": rational_json(&self.boundary[0]),
            "x1": rational_json(&self.boundary[1]),
            "x2": rational_json(&self.boundary[2]),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let get = |k: &str| -> Result<BigRational> {
            rational_from_json(v.get(k).ok_or_else(|| Error::Parse(format!("missing {k}")))?)
        };
        Ok(GoodFunction::new(get("x0")?, get("x1")?, get("x2")?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn u100() -> GoodFunction<BigRational> {
        GoodFunction::new(ratio(1, 1), ratio(0, 1), ratio(0, 1))
    }

    #[test]
    fn extend_once_examples() {
        let one = ratio(1, 1);
        assert_eq!(extend_once(&one, &one, &one), (one.clone(), one.clone(), one.clone()));
        let zero = ratio(0, 1);
        let (m01, m12, m02) = extend_once(&one, &zero, &zero);
        assert_eq!((m01, m12, m02), (ratio(2, 5), ratio(1, 5), ratio(2, 5)));
        let (a, b, c) = (ratio(3, 7), ratio(-2, 3), ratio(5, 1));
        let (p, q, r) = extend_once(&a, &b, &c);
        assert_eq!(p + q + r, a + b + c);
    }

    #[test]
    fn evaluate_examples() {
        let u = u100();
        assert_eq!(u.evaluate(&w("0")).unwrap(), ratio(1, 1));
        assert_eq!(u.evaluate(&w("01")).unwrap(), ratio(2, 5));
        assert_eq!(u.evaluate(&w("01")).unwrap(), u.evaluate(&w("10")).unwrap());
        assert!(u.evaluate(&Word::empty()).is_err());
    }

    #[test]
    fn aliases_agree_exactly() {
        let u = GoodFunction::new(ratio(3, 2), ratio(-1, 7), ratio(2, 9));
        for level in 0..5 {
            for v in Word::all(level) {
                for (i, j) in [(0u8, 1u8), (1, 2), (0, 2)] {
                    let a = u.evaluate(&v.child(i).child(j)).unwrap();
                    let b = u.evaluate(&v.child(j).child(i)).unwrap();
                    assert_eq!(a, b);
                }
                for i in 0..3u8 {
                    assert_eq!(
                        u.evaluate(&v.child(i).child(i)).unwrap(),
                        u.evaluate(&v.child(i)).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn exact_cell_average_examples() {
        let u = u100();
        assert_eq!(u.exact_cell_average(&w("0")).unwrap(), ratio(3, 5));
        assert_eq!(u.exact_cell_average(&w("1")).unwrap(), ratio(1, 5));
        let c = GoodFunction::new(ratio(4, 3), ratio(4, 3), ratio(4, 3));
        assert_eq!(c.exact_cell_average(&w("120")).unwrap(), ratio(4, 3));
        // Matches the mean of the cell's own corners.
        for v in Word::all(3) {
            let corners = u.cell_corners(&v);
            let mean = (corners[0].clone() + corners[1].clone() + corners[2].clone()) * ratio(1, 3);
            assert_eq!(u.exact_cell_average(&v).unwrap(), mean);
        }
    }

    #[test]
    fn closed_form_examples() {
        let cf = u100().closed_form_energies(1);
        assert_eq!(cf.a, ratio(8, 25));
        assert_eq!(cf.b, ratio(6, 5));
        assert_eq!(cf.d, ratio(8, 15));
        let zero = GoodFunction::new(ratio(2, 1), ratio(2, 1), ratio(2, 1)).closed_form_energies(4);
        assert_eq!((zero.a, zero.b, zero.d), (ratio(0, 1), ratio(0, 1), ratio(0, 1)));
        assert_eq!(u100().sup_d(), ratio(4, 3));
    }

    #[test]
    fn lift_examples() {
        let (x, y, z) = lift_boundary(0, &ratio(1, 1), &ratio(0, 1), &ratio(0, 1));
        assert_eq!((x, y, z), (ratio(-2, 3), ratio(-2, 3), ratio(-1, 3)));
        let c = ratio(7, 4);
        assert_eq!(lift_boundary(2, &c, &c, &c), (c.clone(), c.clone(), c.clone()));
    }

    #[test]
    fn lift_round_trip_every_case() {
        let vals = [ratio(1, 3), ratio(-4, 5), ratio(9, 2)];
        for d in 0..3u8 {
            let j = ((d + 1) % 3) as usize;
            let k = ((d + 2) % 3) as usize;
            let (x, y, z) = lift_boundary(d, &vals[d as usize], &vals[j], &vals[k]);
            let mut parent = vals.clone();
            parent[j] = x;
            parent[k] = y;
            assert_eq!(child_corners(&parent, d), vals);
            let (m01, m12, m02) = extend_once(&parent[0], &parent[1], &parent[2]);
            let mid_jk = match (j.min(k), j.max(k)) {
                (0, 1) => m01,
                (1, 2) => m12,
                _ => m02,
            };
            assert_eq!(mid_jk, z);
        }
    }

    #[test]
    fn lift_to_root_restricts_correctly() {
        let target = w("2011");
        let vals = [ratio(1, 2), ratio(3, 1), ratio(-5, 6)];
        let u = lift_to_root(&target, vals.clone());
        assert_eq!(u.cell_corners(&target), vals);
    }

    #[test]
    fn separation_examples() {
        assert!(matches!(
            separation_witness(&w("01"), &w("10")),
            Err(Error::IdenticalPoints)
        ));
        let u = u100();
        // x in K_0 \ K_1, y in K_1 \ K_0
        let x = u.evaluate(&w("0020")).unwrap();
        let y = u.evaluate(&w("1121")).unwrap();
        assert!(x >= ratio(2, 5) && x <= ratio(1, 1));
        assert!(y >= ratio(0, 1) && y < ratio(2, 5));
        let s = separation_witness(&w("0020"), &w("1121")).unwrap();
        assert_ne!(s.evaluate(&w("0020")).unwrap(), s.evaluate(&w("1121")).unwrap());
        // Two corners of one deep cell.
        let s = separation_witness(&w("21010"), &w("21012")).unwrap();
        assert_ne!(s.evaluate(&w("21010")).unwrap(), s.evaluate(&w("21012")).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let u = GoodFunction::new(ratio(1, 3), ratio(-2, 5), ratio(7, 1));
        let v = u.to_json();
        assert_eq!(v["x0"], json!([1, 3]));
        assert_eq!(GoodFunction::from_json(&v).unwrap(), u);
        assert!(GoodFunction::from_json(&json!({"x0": [1, 0], "x1": [0, 1], "x2": [0, 1]})).is_err());
    }
}
