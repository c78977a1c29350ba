//! Besov-type seminorms, the β-indexed energy series and its Abel-summation
//! probe toward `β* = log 5 / log 2`, Hölder audits, and the `Ē^{(n)}`
//! sandwich of the main energy.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::VertexChain;
use crate::energy::{graph_energy, mean_value, restrict, scaled_graph_energy, CellFunction, EnergyProfile};
use crate::error::{Error, Result};
use crate::geometry::{self, cell_anchor, DyadicPoint, Word};
use crate::good::GoodFunction;
use crate::scalar::{compensated_sum, pow, Scalar};

/// Weak-monotonicity constant.
pub const WEAK_MONO_C: f64 = 36.0;
/// Default `ε = β* - β` grid of the Abel probe.
pub const DEFAULT_EPS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
/// Upper limit on pair terms of the double-integral quadrature.
pub const MAX_PAIR_TERMS: usize = 60_000_000;
const MAX_SERIES_TERMS: usize = 50_000_000;

/// Hausdorff dimension `α = log 3 / log 2`.
pub fn alpha() -> f64 {
    3f64.ln() / 2f64.ln()
}

/// Walk dimension `β* = log 5 / log 2`.
pub fn beta_star() -> f64 {
    5f64.ln() / 2f64.ln()
}

/// A sequence `D_1, D_2, …`, possibly infinite, with an optional exact
/// supremum.
pub trait EnergySource {
    /// `D_n` for `n >= 1`, or `None` past the available depth.
    fn d_n(&self, n: usize) -> Option<f64>;
    /// `sup_n D_n` when known in closed form.
    fn sup_d(&self) -> Option<f64>;
}

impl<T: Scalar> EnergySource for GoodFunction<T> {
    fn d_n(&self, n: usize) -> Option<f64> {
        let s = self.s().to_f64();
        Some(2.0 / 3.0 * (1.0 - 0.6f64.powi(n as i32)) * s)
    }
    fn sup_d(&self) -> Option<f64> {
        Some(GoodFunction::sup_d(self).to_f64())
    }
}

impl EnergySource for EnergyProfile {
    fn d_n(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.d.get(i).copied())
    }
    fn sup_d(&self) -> Option<f64> {
        None
    }
}

/// The energy sequence of a [`VertexChain`], precomputed for O(1) access.
#[derive(Clone, Debug)]
pub struct ChainProfile {
    level: usize,
    head: Vec<f64>,
    a_top: f64,
    b_top: f64,
    sup: f64,
}

impl ChainProfile {
    pub fn new<T: Scalar>(u: &VertexChain<T>) -> Result<Self> {
        let level = u.level();
        let head = (1..=level)
            .map(|n| Ok((5.0f64 / 3.0).powi(n as i32) * u.a_n(n)?.to_f64()))
            .collect::<Result<Vec<f64>>>()?;
        let a_top = if level == 0 {
            0.0
        } else {
            u.a_n(level)?.to_f64()
        };
        Ok(ChainProfile {
            level,
            head,
            a_top,
            b_top: u.b_top().to_f64(),
            sup: u.sup_d()?.to_f64(),
        })
    }
}

impl EnergySource for ChainProfile {
    fn d_n(&self, n: usize) -> Option<f64> {
        if n == 0 {
            return None;
        }
        if n <= self.level {
            return Some(self.head[n - 1]);
        }
        let t = 0.6f64.powi((n - self.level) as i32);
        let scale = (5.0f64 / 3.0).powi(self.level as i32);
        Some(scale * (2.0 / 3.0 * (1.0 - t) * self.b_top + t * self.a_top))
    }
    fn sup_d(&self) -> Option<f64> {
        Some(self.sup)
    }
}

/// Truncated evaluation of `𝓔_β = Σ_n 2^{(β-β*)n} D_n`.
#[derive(Clone, Debug)]
pub struct BetaSeries {
    pub alpha: f64,
    pub beta_star: f64,
    pub beta: f64,
    /// Partial sums after each included term.
    pub terms: Vec<f64>,
    /// Bound on the omitted tail at the final truncation.
    pub tail_bound: f64,
    /// Majorant of `D_n` used by the tail bound.
    pub majorant: f64,
    pub observed_sup: f64,
}

impl BetaSeries {
    pub fn value(&self) -> f64 {
        self.terms.last().copied().unwrap_or(0.0)
    }
}

/// Sums `Σ 2^{(β-β*)n} D_n` until the geometric tail
/// `M·λ^{N+1}/(1-λ)`, `λ = 2^{β-β*}`, drops below `rel_tol` times the partial
/// sum. `M` is the exact supremum when the source has one, otherwise
/// `36·max_{n<=N} D_n`.
pub fn discrete_ebeta<S: EnergySource + ?Sized>(
    source: &S,
    beta: f64,
    rel_tol: f64,
) -> Result<BetaSeries> {
    let (a, bs) = (alpha(), beta_star());
    if !(beta > a && beta < bs) {
        return Err(Error::BetaOutOfRange {
            beta,
            lo: a,
            hi: bs,
        });
    }
    let lambda = 2f64.powf(beta - bs);
    let mut terms = Vec::new();
    let mut partial = 0.0;
    let mut comp = 0.0;
    let mut weight = 1.0;
    let mut observed: f64 = 0.0;
    for n in 1..=MAX_SERIES_TERMS {
        let Some(d) = source.d_n(n) else {
            return Err(Error::NonConvergent(n - 1));
        };
        weight *= lambda;
        observed = observed.max(d);
        // Neumaier step
        let x = weight * d;
        let t = partial + x;
        if partial.abs() >= x.abs() {
            comp += (partial - t) + x;
        } else {
            comp += (x - t) + partial;
        }
        partial = t;
        let total = partial + comp;
        terms.push(total);
        let majorant = source.sup_d().unwrap_or(WEAK_MONO_C * observed);
        let tail = majorant * weight * lambda / (1.0 - lambda);
        if majorant == 0.0 || (total > 0.0 && tail < rel_tol * total) {
            return Ok(BetaSeries {
                alpha: a,
                beta_star: bs,
                beta,
                terms,
                tail_bound: tail,
                majorant,
                observed_sup: observed,
            });
        }
    }
    Err(Error::NonConvergent(MAX_SERIES_TERMS))
}

/// First `count` partial sums at any `β`, including `β >= β*` where the
/// series diverges for nonconstant data.
pub fn partial_sums<S: EnergySource + ?Sized>(source: &S, beta: f64, count: usize) -> Vec<f64> {
    let lambda = 2f64.powf(beta - beta_star());
    let mut out = Vec::with_capacity(count);
    let mut acc = 0.0;
    let mut w = 1.0;
    for n in 1..=count {
        let Some(d) = source.d_n(n) else { break };
        w *= lambda;
        acc += w * d;
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub beta: f64,
    pub eps: f64,
    pub value: f64,
    pub value_times_log2: f64,
    #[serde(rename = "supD")]
    pub sup_d: f64,
    pub verdict: String,
}

/// `(β* - β)·𝓔_β` at `β = β* - ε` for each `ε`, with the upper Abel bound
/// `value·log 2 <= sup_n D_n·(1 + 1e-9)` as verdict.
pub fn abel_probe<S: EnergySource + ?Sized>(
    source: &S,
    eps_list: &[f64],
    rel_tol: f64,
) -> Result<Vec<ProbeRow>> {
    let bs = beta_star();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if eps <= 0.0 {
            return Err(Error::InvalidLevel(format!("eps must be positive, got {eps}")));
        }
        let beta = bs - eps;
        let series = discrete_ebeta(source, beta, rel_tol)?;
        let value = eps * series.value();
        let sup_d = source.sup_d().unwrap_or(series.observed_sup);
        let scaled = value * std::f64::consts::LN_2;
        let pass = scaled <= sup_d * (1.0 + 1e-9);
        rows.push(ProbeRow {
            beta,
            eps,
            value,
            value_times_log2: scaled,
            sup_d,
            verdict: if pass { "pass" } else { "fail" }.into(),
        });
    }
    Ok(rows)
}

/// CSV with header `beta,eps,value,value_times_log2,supD,verdict`.
pub fn write_probe_csv<W: Write>(rows: &[ProbeRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Hölder constant `c(β)` for `|u(x)-u(y)| <= c √F(u) |x-y|^{(β-α)/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderConstant {
    pub beta: f64,
    pub c: f64,
}

impl HolderConstant {
    pub fn new(beta: f64) -> Result<Self> {
        let a = alpha();
        if beta <= a {
            return Err(Error::BetaOutOfRange {
                beta,
                lo: a,
                hi: f64::INFINITY,
            });
        }
        let h = (beta - a) / 2.0;
        let q = 2f64.powf(h);
        let c = (2.0 / 3f64.sqrt()).powf(h) * (2.0 * 2f64.sqrt() / 3.0 * q / (q - 1.0) + q);
        Ok(HolderConstant { beta, c })
    }
}

/// `F(U) = sup_n 2^{(β-α)n} A_n(U)` from the closed form of `A_n`.
pub fn holder_f<T: Scalar>(u: &GoodFunction<T>, beta: f64) -> f64 {
    let s = u.s().to_f64();
    let q = 2f64.powf(beta - alpha());
    let mut best: f64 = 0.0;
    let mut qn = 1.0;
    let mut tn = 1.0;
    for _ in 1..=4000 {
        qn *= q;
        tn *= 0.6;
        let term = qn * 2.0 / 3.0 * (tn - tn * tn) * s;
        if !term.is_finite() {
            break;
        }
        best = best.max(term);
    }
    best
}

#[derive(Clone, Debug)]
pub struct HolderAudit {
    pub constant: HolderConstant,
    pub f_value: f64,
    pub pairs: usize,
    pub max_ratio: f64,
}

/// Samples `pair_count` pairs of distinct vertices `P_x`, `P_y` with
/// `1 <= |x|, |y| <= max_level` and returns the largest
/// `|U(x)-U(y)| / (c √F |x-y|^{(β-α)/2})`.
pub fn holder_audit<T: Scalar>(
    u: &GoodFunction<T>,
    beta: f64,
    pair_count: usize,
    max_level: usize,
    seed: u64,
) -> Result<HolderAudit> {
    let constant = HolderConstant::new(beta)?;
    let f_value = holder_f(u, beta);
    let uf = u.to_f64();
    let expo = (beta - alpha()) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_word = |rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(1..=max_level);
        Word::new((0..len).map(|_| rng.gen_range(0..3u8)).collect()).expect("digits < 3")
    };
    let mut max_ratio: f64 = 0.0;
    let mut pairs = 0;
    while pairs < pair_count {
        let (x, y) = (random_word(&mut rng), random_word(&mut rng));
        let (px, py) = (cell_anchor(&x)?, cell_anchor(&y)?);
        if px == py {
            continue;
        }
        pairs += 1;
        let diff = (uf.evaluate(&x)? - uf.evaluate(&y)?).abs();
        if diff == 0.0 {
            continue;
        }
        let bound = constant.c * f_value.sqrt() * px.dist(&py).powf(expo);
        max_ratio = max_ratio.max(diff / bound);
    }
    Ok(HolderAudit {
        constant,
        f_value,
        pairs,
        max_ratio,
    })
}

/// Squared distances between level-`m` and level-`(m+1)` cell anchors,
/// binned exactly, with the accumulated `(ū_v - ū_w)²·ν⊗ν` mass per bin.
///
/// Pairs of level-`m` cells with distinct anchors contribute at level `m`;
/// pairs whose anchors coincide (in particular `v = w`) are replaced by
/// their level-`(m+1)` child pairs.
#[derive(Clone, Debug)]
pub struct PairQuadrature {
    pub depth: usize,
    /// `2^{m+1}`: anchor coordinates times this are integers.
    scale: f64,
    /// `(|Δ|²·scale², mass)` in increasing key order.
    bins: Vec<(u64, f64)>,
}

fn integer_anchors(level: usize, scale: i64) -> Result<Vec<(i64, i64)>> {
    Word::all(level)
        .map(|w| {
            let p: DyadicPoint = cell_anchor(&w)?;
            let a = p.a * scale;
            let b = p.b * scale;
            debug_assert!(a.is_integer() && b.is_integer());
            Ok((a.to_integer(), b.to_integer()))
        })
        .collect()
}

impl PairQuadrature {
    /// Builds the bins from leaf averages at `depth + 1`.
    pub fn new(fine: &CellFunction<f64>) -> Result<Self> {
        let depth = fine
            .level()
            .checked_sub(1)
            .filter(|d| *d >= 1)
            .ok_or_else(|| Error::InvalidLevel("pair quadrature needs leaves at level >= 2".into()))?;
        let cells = 3usize.pow(depth as u32);
        if cells * cells + 9 * cells * 3 > MAX_PAIR_TERMS {
            return Err(Error::Budget(cells * cells));
        }
        let coarse = mean_value(fine, depth)?;
        let scale = 1i64 << (depth + 1);
        let anc_m = integer_anchors(depth, scale)?;
        let anc_f = integer_anchors(depth + 1, scale)?;
        let um = coarse.values();
        let uf = fine.values();
        let w_m = 1.0 / (cells as f64 * cells as f64);
        let w_f = w_m / 81.0;
        let key = |p: (i64, i64), q: (i64, i64)| -> u64 {
            let da = p.0 - q.0;
            let db = p.1 - q.1;
            (da * da + 3 * db * db) as u64
        };
        // Keys are bounded by 7/4 scale², so mass is accumulated in dense
        // per-chunk arrays and the chunks are added in a fixed order.
        let key_count = (7 * scale * scale / 4 + 1) as usize;
        let chunk = 16usize;
        let chunk_count = cells.div_ceil(chunk);
        let mut dense = vec![0.0f64; key_count];
        let batch = rayon::current_num_threads().max(1) * 2;
        for first in (0..chunk_count).step_by(batch) {
            let parts: Vec<Vec<f64>> = (first..(first + batch).min(chunk_count))
                .into_par_iter()
                .map(|c| {
                    let mut local = vec![0.0f64; key_count];
                    for v in c * chunk..((c + 1) * chunk).min(cells) {
                        for w in 0..cells {
                            let k = key(anc_m[v], anc_m[w]);
                            if k > 0 {
                                let d = um[v] - um[w];
                                local[k as usize] += d * d * w_m;
                                continue;
                            }
                            for i in 0..3 {
                                for j in 0..3 {
                                    let (cv, cw) = (3 * v + i, 3 * w + j);
                                    let kc = key(anc_f[cv], anc_f[cw]);
                                    if kc > 0 {
                                        let d = uf[cv] - uf[cw];
                                        local[kc as usize] += d * d * w_f;
                                    }
                                }
                            }
                        }
                    }
                    local
                })
                .collect();
            for part in parts {
                for (acc, x) in dense.iter_mut().zip(part) {
                    *acc += x;
                }
            }
        }
        let bins = dense
            .into_iter()
            .enumerate()
            .filter(|&(_, m)| m != 0.0)
            .map(|(k, m)| (k as u64, m))
            .collect();
        Ok(PairQuadrature {
            depth,
            scale: scale as f64,
            bins,
        })
    }

    fn distance(&self, key: u64) -> f64 {
        (key as f64).sqrt() / self.scale
    }

    /// `𝔈_β ≈ Σ (ū_v - ū_w)² / d(v,w)^{α+β} · ν(K_v)ν(K_w)`.
    pub fn double_integral(&self, beta: f64) -> f64 {
        let s = alpha() + beta;
        compensated_sum(
            self.bins
                .iter()
                .map(|&(k, m)| m / self.distance(k).powf(s)),
        )
    }

    /// `∫∫_{d < 2^{-n}} (u(x)-u(y))²` for `n = 1..=n_max`.
    pub fn near_diagonal_mass(&self, n_max: usize) -> Vec<f64> {
        (1..=n_max)
            .map(|n| {
                let r = 0.5f64.powi(n as i32);
                compensated_sum(
                    self.bins
                        .iter()
                        .filter(|&&(k, _)| self.distance(k) < r)
                        .map(|&(_, m)| m),
                )
            })
            .collect()
    }

    /// Metric Besov seminorms from the same bins.
    pub fn besov(&self, beta: f64, n_max: usize) -> Result<BesovSeminorms> {
        if n_max > self.depth {
            return Err(Error::InvalidLevel(format!(
                "N_max {n_max} exceeds quadrature depth {}",
                self.depth
            )));
        }
        let s = alpha() + beta;
        let terms: Vec<f64> = self
            .near_diagonal_mass(n_max)
            .into_iter()
            .enumerate()
            .map(|(i, q)| 2f64.powf(s * (i + 1) as f64) * q)
            .collect();
        let b22 = compensated_sum(terms.iter().copied());
        let b2inf = terms.iter().copied().fold(0.0, f64::max);
        Ok(BesovSeminorms { terms, b22, b2inf })
    }
}

/// `λ/(1-λ)` with `λ = 2^{β-β*}`: the sum of a geometric tail relative to
/// its last resolved term.
pub fn tail_weight(beta: f64) -> f64 {
    let l = 2f64.powf(beta - beta_star());
    l / (1.0 - l)
}

impl PairQuadrature {
    /// `[u]_{B^{2,2}}` from the scales `n <= depth - 2`, whose near-diagonal
    /// masses are resolved by the grid, plus the geometric tail
    /// `t_{depth-2}·λ/(1-λ)`.
    pub fn besov_completed(&self, beta: f64) -> Result<f64> {
        if self.depth < 3 {
            return Err(Error::InvalidLevel(format!(
                "completed seminorm needs depth >= 3, got {}",
                self.depth
            )));
        }
        let s = self.besov(beta, self.depth - 2)?;
        let last = *s.terms.last().expect("depth - 2 >= 1 terms");
        Ok(s.b22 + last * tail_weight(beta))
    }
}

/// `𝔈_β` from quadratures at depths `m - 1` and `m`, with the unresolved
/// small scales completed geometrically: `Q_m + (Q_m - Q_{m-1})·λ/(1-λ)`.
pub fn completed_double_integral(
    coarse: &PairQuadrature,
    fine: &PairQuadrature,
    beta: f64,
) -> Result<f64> {
    if fine.depth != coarse.depth + 1 {
        return Err(Error::LevelMismatch {
            expected: coarse.depth + 1,
            found: fine.depth,
        });
    }
    let (qc, qf) = (coarse.double_integral(beta), fine.double_integral(beta));
    Ok(qf + (qf - qc) * tail_weight(beta))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BesovSeminorms {
    /// `2^{(α+β)n} ∫∫_{d<2^{-n}} (u(x)-u(y))²` per scale.
    pub terms: Vec<f64>,
    pub b22: f64,
    pub b2inf: f64,
}

/// `𝔈_β` by pair quadrature at `depth` (leaves refined to `depth + 1`).
pub fn double_integral_ebeta<P>(provider: &P, beta: f64, depth: usize) -> Result<f64>
where
    P: crate::energy::VertexProvider<f64> + ?Sized,
{
    let fine = crate::energy::leaf_averages(provider, depth + 1);
    Ok(PairQuadrature::new(&fine)?.double_integral(beta))
}

/// `([u]_{B^{2,2}}, [u]_{B^{2,∞}})` truncated at `n_max` scales.
pub fn metric_besov_seminorms<P>(
    provider: &P,
    beta: f64,
    depth: usize,
    n_max: usize,
) -> Result<BesovSeminorms>
where
    P: crate::energy::VertexProvider<f64> + ?Sized,
{
    if n_max > depth {
        return Err(Error::InvalidLevel(format!(
            "N_max {n_max} exceeds quadrature depth {depth}"
        )));
    }
    let fine = crate::energy::leaf_averages(provider, depth + 1);
    PairQuadrature::new(&fine)?.besov(beta, n_max)
}

/// Functions known through corner values and cell averages at every level.
pub trait CellData<T: Scalar>: Sized {
    /// `(corner values, P_n u(w))` for every `w ∈ W_n` in canonical order.
    fn cells(&self, n: usize) -> Vec<([T; 3], T)>;
    /// `u ∘ f_i`.
    fn compose(&self, i: u8) -> Self;
}

fn with_means<T: Scalar>(corners: Vec<[T; 3]>) -> Vec<([T; 3], T)> {
    let third = T::from_ratio(1, 3);
    corners
        .into_iter()
        .map(|c| {
            let mean = T::sum_all(c.iter().cloned()) * third.clone();
            (c, mean)
        })
        .collect()
}

/// The cell average of a good function is the mean of the cell's corners.
impl<T: Scalar> CellData<T> for GoodFunction<T> {
    fn cells(&self, n: usize) -> Vec<([T; 3], T)> {
        with_means(self.corner_table(n))
    }
    fn compose(&self, i: u8) -> Self {
        GoodFunction::compose(self, i)
    }
}

impl<T: Scalar> CellData<T> for VertexChain<T> {
    fn cells(&self, n: usize) -> Vec<([T; 3], T)> {
        if n <= self.level() {
            let avgs = self.averages(n);
            return Word::all(n)
                .zip(avgs.values().iter().cloned())
                .map(|(w, a)| (self.corner_values(&w), a))
                .collect();
        }
        let depth = n - self.level();
        with_means(
            Word::all(self.level())
                .flat_map(|w| {
                    let [a, b, c] = self.corner_values(&w);
                    GoodFunction::new(a, b, c).corner_table(depth)
                })
                .collect(),
        )
    }
    fn compose(&self, i: u8) -> Self {
        VertexChain::compose(self, i)
    }
}

/// `Ē^{(n)}(u) = (5/3)^n Σ_{w ∈ W_n} Σ_i (u(f_w p_i) - ∫ u∘f_w)²`.
pub fn hat_energy<T: Scalar, U: CellData<T>>(u: &U, n: usize) -> T {
    let sum = T::sum_all(u.cells(n).into_iter().flat_map(|(corners, avg)| {
        corners.into_iter().map(move |c| (c - avg.clone()).square())
    }));
    pow(&T::from_ratio(5, 3), n) * sum
}

/// `D_n(u)` from the same cell data.
pub fn d_from_cells<T: Scalar, U: CellData<T>>(u: &U, n: usize) -> Result<T> {
    let avgs: Vec<T> = u.cells(n).into_iter().map(|(_, a)| a).collect();
    let g = geometry::graph(n)?;
    scaled_graph_energy(&CellFunction::new(n, avgs)?, &g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichRow {
    pub n: usize,
    pub d: f64,
    pub hat: f64,
    pub cesaro: f64,
    pub upper_rhs: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// For `n = 1..=n_max`: `D_n <= 6 Ē^{(n)}` and
/// `Ē^{(n)} <= 3c²·36·sup_k D_k` with `c = c(β*)`, plus the Cesàro means
/// `(1/n) Σ_{l<=n} Ē^{(l)}`.
pub fn hat_energy_sandwich<T: Scalar, U: CellData<T>>(
    u: &U,
    n_max: usize,
    sup_d: f64,
) -> Result<Vec<SandwichRow>> {
    let c = HolderConstant::new(beta_star())?.c;
    let upper_rhs = 3.0 * c * c * WEAK_MONO_C * sup_d;
    let mut rows = Vec::with_capacity(n_max);
    let mut running = 0.0;
    for n in 1..=n_max {
        let hat = hat_energy(u, n);
        let d = d_from_cells(u, n)?;
        let hat_f = hat.to_f64();
        running += hat_f;
        rows.push(SandwichRow {
            n,
            d: d.to_f64(),
            hat: hat_f,
            cesaro: running / n as f64,
            upper_rhs,
            lower_ok: d <= T::from_int(6) * hat,
            upper_ok: hat_f <= upper_rhs,
        });
    }
    Ok(rows)
}

/// `Ē^{(n+1)}(u)` and `(5/3) Σ_i Ē^{(n)}(u∘f_i)`, equal by self-similarity.
pub fn hat_energy_self_similar<T: Scalar, U: CellData<T>>(u: &U, n: usize) -> (T, T) {
    let lhs = hat_energy(u, n + 1);
    let rhs = T::from_ratio(5, 3) * T::sum_all((0..3u8).map(|i| hat_energy(&u.compose(i), n)));
    (lhs, rhs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompAudit {
    /// `D_{n+k}(u)`.
    pub total: f64,
    /// `(5/3)^n Σ_{w ∈ W_n} D_k(u∘f_w)`.
    pub intra: f64,
    pub slack: f64,
    /// `(5/3)^{n+k}` times the squared differences across level-`n` cells.
    pub interface: f64,
}

/// Splits `D_{n+k}` into the copies `u∘f_w`, `w ∈ W_n`, and the edges that
/// join distinct level-`n` cells.
pub fn self_similar_decomp_audit(u: &CellFunction<f64>, n: usize, k: usize) -> Result<DecompAudit> {
    if u.level() != n + k {
        return Err(Error::LevelMismatch {
            expected: n + k,
            found: u.level(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidLevel("k must be >= 1".into()));
    }
    let g = geometry::graph(n + k)?;
    let total = scaled_graph_energy(u, &g)?;
    let gk = geometry::graph(k)?;
    let inner: Vec<f64> = Word::all(n)
        .map(|w| graph_energy(&restrict(u, &w)?, &gk))
        .collect::<Result<_>>()?;
    let intra = (5.0f64 / 3.0).powi((n + k) as i32) * compensated_sum(inner);
    let block = 3usize.pow(k as u32);
    let v = u.values();
    let across = compensated_sum(
        g.index_pairs()
            .iter()
            .filter(|&&(i, j)| i / block != j / block)
            .map(|&(i, j)| (v[i] - v[j]).powi(2)),
    );
    Ok(DecompAudit {
        total,
        intra,
        slack: total - intra,
        interface: (5.0f64 / 3.0).powi((n + k) as i32) * across,
    })
}

/// Largest `max_{m<=n} D_m / D_n` over the profile: weak monotonicity with
/// constant 36 says this never exceeds 36.
pub fn weak_mono_corollary(profile: &[f64]) -> Option<f64> {
    let mut running: f64 = 0.0;
    let mut worst: Option<f64> = None;
    for &d in profile {
        running = running.max(d);
        if d > 0.0 {
            let r = running / d;
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
        }
    }
    worst
}
