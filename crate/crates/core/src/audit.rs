//! The ten acceptance checks, shared by `gasket audit-all` and the
//! `acceptance` test target.

use std::io::Write;
use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::besov::{
    self, abel_probe, alpha, beta_star, discrete_ebeta, hat_energy_sandwich, hat_energy_self_similar,
    holder_audit, completed_double_integral, ChainProfile, PairQuadrature, DEFAULT_EPS,
};
use crate::chain::VertexChain;
use crate::energy::{bn, graph_energy, leaf_averages, weak_mono_ratio, CellFunction, VertexFunction};
use crate::error::Result;
use crate::geometry::{self, cell_vertices, vertex_count, edge_count, Word};
use crate::good::GoodFunction;
use crate::resistance::{corner_bound_audit, corner_resistance_closed, corner_resistance_r, pair_resistance};
use crate::scalar::{pow, ratio, Scalar};

/// Relative tolerance of the numerical corner resistance.
pub const RESISTANCE_TOL: f64 = 1e-8;
/// Allowed distance of the probe at `ε = 1e-3` from `(4/3)/ln 2`.
pub const PROBE_TOL: f64 = 0.02;
/// Allowed drift of equivalence ratios when the quadrature depth grows by one.
pub const BRACKET_DRIFT: f64 = 0.20;

/// One row of the audit CSV `check,n,lhs,rhs,ratio,pass`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRecord {
    pub check: String,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl AuditRecord {
    fn new(check: &str, n: usize, lhs: f64, rhs: f64, pass: bool) -> Self {
        let ratio = if rhs != 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        AuditRecord {
            check: check.into(),
            n,
            lhs,
            rhs,
            ratio,
            pass,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    pub seconds: f64,
    pub records: Vec<AuditRecord>,
}

impl CheckResult {
    /// `[PASS|FAIL] id name: summary`, without timing so that reports are
    /// reproducible.
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.summary
        )
    }
}

/// Write every record of `results` as audit CSV.
pub fn write_records_csv<W: Write>(results: &[CheckResult], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in results {
        for rec in &r.records {
            wtr.serialize(rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct AuditConfig {
    /// Largest level of the exhaustive corner-bound audit.
    pub level: usize,
    /// Base quadrature depth `m` of the equivalence brackets.
    pub depth: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            level: 6,
            depth: 6,
            seed: 2024,
        }
    }
}

fn timed(
    id: usize,
    name: &'static str,
    f: impl FnOnce() -> Result<(bool, String, Vec<AuditRecord>)>,
) -> Result<CheckResult> {
    let start = Instant::now();
    let (pass, summary, records) = f()?;
    Ok(CheckResult {
        id,
        name,
        pass,
        summary,
        seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Exact `r_n` from the Δ-Y recursion against `(5/3)^n/2 - 1/2`, `n <= 16`.
pub fn check_corner_recursion() -> Result<CheckResult> {
    timed(1, "corner resistance recursion", || {
        let mut records = Vec::new();
        for n in 1..=16 {
            let r = corner_resistance_r(n)?;
            let closed = corner_resistance_closed(n);
            let ok = r == closed;
            records.push(AuditRecord::new("corner_recursion", n, r.to_f64(), closed.to_f64(), ok));
        }
        let pass = records.iter().all(|r| r.pass);
        Ok((pass, "exact equality for n = 1..16".into(), records))
    })
}

/// `R_n(0^n, 1^n) = (5/3)^n - 1` by Laplacian solves, `n <= 7`.
pub fn check_corner_numeric() -> Result<CheckResult> {
    timed(2, "numerical corner resistance", || {
        let mut records = Vec::new();
        let mut worst: f64 = 0.0;
        for n in 1..=7 {
            let r = pair_resistance(n, &Word::repeat(0, n), &Word::repeat(1, n))?;
            let exact = (5.0f64 / 3.0).powi(n as i32) - 1.0;
            let e = rel_err(r, exact);
            worst = worst.max(e);
            records.push(AuditRecord::new("corner_numeric", n, r, exact, e <= RESISTANCE_TOL));
        }
        let pass = records.iter().all(|r| r.pass);
        Ok((pass, format!("max relative error {worst:.2e} (tol {RESISTANCE_TOL:e})"), records))
    })
}

fn random_rational<R: Rng>(rng: &mut R) -> BigRational {
    ratio(rng.gen_range(-20..=20), rng.gen_range(1..=7))
}

/// Brute-force `A_n`, `B_n`, `D_n` of a good function in exact arithmetic.
pub fn brute_force_energies(u: &GoodFunction<BigRational>, n: usize) -> Result<[BigRational; 3]> {
    let g = geometry::graph(n)?;
    // P_n U(wd) = (3U(P_{wd}) + U(P_{wj}) + U(P_{wk}))/5 from the parent corners.
    let fifth = ratio(1, 5);
    let avgs = u
        .corner_table(n - 1)
        .into_iter()
        .flat_map(|c| {
            let total = BigRational::sum_all(c.iter().cloned());
            let fifth = fifth.clone();
            (0..3).map(move |d| (total.clone() + ratio(2, 1) * c[d].clone()) * fifth.clone())
        })
        .collect();
    let a = graph_energy(&CellFunction::new(n, avgs)?, &g)?;
    let mut vf = VertexFunction {
        level: n,
        values: Default::default(),
    };
    for (w, corners) in Word::all(n).zip(u.corner_table(n)) {
        for (p, v) in cell_vertices(&w).into_iter().zip(corners) {
            vf.values.insert(p, v);
        }
    }
    let b = bn(&vf, n)?;
    let d = pow(&ratio(5, 3), n) * a.clone();
    Ok([a, b, d])
}

/// Closed-form good-function energies for `n <= 8` and 21 boundary triples.
pub fn check_good_energies(seed: u64) -> Result<CheckResult> {
    timed(3, "good-function energies", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut suite = vec![GoodFunction::new(ratio(1, 1), ratio(0, 1), ratio(0, 1))];
        for _ in 0..20 {
            suite.push(GoodFunction::new(
                random_rational(&mut rng),
                random_rational(&mut rng),
                random_rational(&mut rng),
            ));
        }
        let mut records = Vec::new();
        let mut mismatches = 0;
        for n in 1..=8 {
            let brute = suite
                .par_iter()
                .map(|u| brute_force_energies(u, n))
                .collect::<Result<Vec<_>>>()?;
            let mut all = true;
            for (u, [a, b, d]) in suite.iter().zip(&brute) {
                let cf = u.closed_form_energies(n);
                if *a != cf.a || *b != cf.b || *d != cf.d {
                    all = false;
                    mismatches += 1;
                }
            }
            records.push(AuditRecord::new(
                "good_energies",
                n,
                brute[0][0].to_f64(),
                suite[0].closed_form_energies(n).a.to_f64(),
                all,
            ));
        }
        Ok((
            mismatches == 0,
            format!("{} triples x 8 levels, {mismatches} mismatches", suite.len()),
            records,
        ))
    })
}

/// `G_n(M_{n,m} u) <= 36 G_{n+m}(u)` for 1000 random `u` per `(n, m)`.
pub fn check_weak_monotonicity(seed: u64) -> Result<CheckResult> {
    timed(4, "weak monotonicity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::new();
        let mut worst: f64 = 0.0;
        let mut violations = 0;
        for n in 1..=4 {
            for m in 1..=4 {
                let level = n + m;
                let mut max_ratio: f64 = 0.0;
                for _ in 0..1000 {
                    let vals = (0..3usize.pow(level as u32))
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect();
                    let r = weak_mono_ratio(&CellFunction::new(level, vals)?, n)?;
                    if r > besov::WEAK_MONO_C {
                        violations += 1;
                    }
                    max_ratio = max_ratio.max(r);
                }
                worst = worst.max(max_ratio);
                records.push(AuditRecord::new(
                    &format!("weak_mono_m{m}"),
                    n,
                    max_ratio,
                    besov::WEAK_MONO_C,
                    max_ratio <= besov::WEAK_MONO_C,
                ));
            }
        }
        Ok((
            violations == 0,
            format!("16000 samples, {violations} violations, max ratio {worst:.4}"),
            records,
        ))
    })
}

/// `R_n(w, i^n) <= (5/2)(5/3)^n` for all `w`, `i`, `n <= level`.
pub fn check_corner_bound(level: usize) -> Result<CheckResult> {
    timed(5, "corner resistance bound", || {
        let mut records = Vec::new();
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for n in 1..=level {
            let audit = corner_bound_audit(n)?;
            count += audit.rows.len();
            worst = worst.max(audit.max_ratio);
            let bound = 2.5 * (5.0f64 / 3.0).powi(n as i32);
            records.push(AuditRecord::new(
                "corner_bound",
                n,
                audit.max_ratio * bound,
                bound,
                audit.max_ratio <= 1.0,
            ));
        }
        let pass = records.iter().all(|r| r.pass);
        Ok((pass, format!("{count} pairs, max R/bound {worst:.4}"), records))
    })
}

/// `(4/3)/ln 2`, the Abel limit of `D_n(U^{(1,0,0)}) -> 4/3` after scaling.
pub fn probe_limit() -> f64 {
    4.0 / 3.0 / std::f64::consts::LN_2
}

/// Abel probe for `U^{(1,0,0)}`.
pub fn check_abel_probe() -> Result<CheckResult> {
    timed(6, "Abel probe", || {
        let u = GoodFunction::new(1.0, 0.0, 0.0);
        let rows = abel_probe(&u, &DEFAULT_EPS, 1e-12)?;
        let limit = probe_limit();
        let mut records = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            records.push(AuditRecord::new(
                "abel_upper",
                i,
                r.value_times_log2,
                r.sup_d,
                r.verdict == "pass",
            ));
        }
        let last = rows.last().expect("non-empty grid");
        let err = rel_err(last.value, limit);
        records.push(AuditRecord::new("abel_limit", rows.len() - 1, last.value, limit, err <= PROBE_TOL));
        let pass = records.iter().all(|r| r.pass);
        Ok((
            pass,
            format!(
                "value {:.5} at eps {:e} vs {:.5} ({:.3}% off)",
                last.value,
                last.eps,
                limit,
                100.0 * err
            ),
            records,
        ))
    })
}

/// Hölder ratios for `U^{(1,0,0)}` at `β = (α+β*)/2` and `β*`.
pub fn check_holder(seed: u64) -> Result<CheckResult> {
    timed(7, "Hölder continuity", || {
        let u = GoodFunction::new(ratio(1, 1), ratio(0, 1), ratio(0, 1));
        let mut records = Vec::new();
        let mut parts = Vec::new();
        for (i, beta) in [(alpha() + beta_star()) / 2.0, beta_star()].into_iter().enumerate() {
            let a = holder_audit(&u, beta, 10_000, 8, seed.wrapping_add(i as u64))?;
            parts.push(format!("beta {beta:.4}: c {:.4}, max ratio {:.4}", a.constant.c, a.max_ratio));
            records.push(AuditRecord::new("holder", i, a.max_ratio, 1.0, a.max_ratio <= 1.0));
        }
        let pass = records.iter().all(|r| r.pass);
        Ok((pass, parts.join("; "), records))
    })
}

fn sandwich_records<U: besov::CellData<BigRational>>(
    u: &U,
    sup_d: &BigRational,
    label: &str,
    records: &mut Vec<AuditRecord>,
) -> Result<(bool, f64, f64)> {
    let rows = hat_energy_sandwich(u, 6, sup_d.to_f64())?;
    let mut ok = true;
    let (mut lower, mut upper): (f64, f64) = (0.0, 0.0);
    for r in &rows {
        ok &= r.lower_ok && r.upper_ok;
        if r.hat > 0.0 {
            lower = lower.max(r.d / (6.0 * r.hat));
        }
        upper = upper.max(r.hat / r.upper_rhs);
    }
    let mut exact = true;
    for n in 0..=5 {
        let (l, r) = hat_energy_self_similar(u, n);
        exact &= l == r;
    }
    ok &= exact;
    if !label.is_empty() {
        for r in &rows {
            records.push(AuditRecord::new(&format!("{label}_lower"), r.n, r.d, 6.0 * r.hat, r.lower_ok));
            records.push(AuditRecord::new(&format!("{label}_upper"), r.n, r.hat, r.upper_rhs, r.upper_ok));
        }
    }
    Ok((ok, lower, upper))
}

/// `D_n <= 6 Ē^{(n)}` and `Ē^{(n)} <= 3c²·36·sup D` for good functions and 100 random
/// chains, `n <= 6`, and the exact self-similar identity.
pub fn check_sandwich(seed: u64) -> Result<CheckResult> {
    timed(8, "energy sandwich", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::new();
        let mut failures = 0;
        let (mut lo, mut hi): (f64, f64) = (0.0, 0.0);
        let mut goods = vec![GoodFunction::new(ratio(1, 1), ratio(0, 1), ratio(0, 1))];
        for _ in 0..4 {
            goods.push(GoodFunction::new(
                random_rational(&mut rng),
                random_rational(&mut rng),
                random_rational(&mut rng),
            ));
        }
        let chains: Vec<_> = (0..100)
            .map(|k| VertexChain::random(1 + k % 3, &mut rng))
            .collect();
        let good_rows = goods
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let mut recs = Vec::new();
                let label = if i == 0 { "sandwich_U100" } else { "" };
                let out = sandwich_records(g, &g.sup_d(), label, &mut recs)?;
                Ok((out, recs))
            })
            .collect::<Result<Vec<_>>>()?;
        let chain_rows = chains
            .par_iter()
            .enumerate()
            .map(|(k, u)| {
                let mut recs = Vec::new();
                let label = if k == 0 { "sandwich_chain" } else { "" };
                let out = sandwich_records(u, &u.sup_d()?, label, &mut recs)?;
                Ok((out, recs))
            })
            .collect::<Result<Vec<_>>>()?;
        for ((ok, l, h), recs) in good_rows.into_iter().chain(chain_rows) {
            failures += usize::from(!ok);
            lo = lo.max(l);
            hi = hi.max(h);
            records.extend(recs);
        }
        Ok((
            failures == 0,
            format!(
                "{} functions, {failures} failures; max D/(6Ē) {lo:.4}, max Ē/bound {hi:.2e}",
                goods.len() + 100
            ),
            records,
        ))
    })
}

/// Vertex and edge counts of the constructed graphs for `n <= 8`.
pub fn check_counts() -> Result<CheckResult> {
    timed(9, "vertex and edge counts", || {
        let mut records = Vec::new();
        for n in 1..=8 {
            let v = geometry::vertex_set(n).len();
            let h = geometry::graph(n)?.edges.len();
            records.push(AuditRecord::new("vertices", n, v as f64, vertex_count(n) as f64, v == vertex_count(n)));
            records.push(AuditRecord::new("edges", n, h as f64, edge_count(n) as f64, h == edge_count(n)));
        }
        let pass = records.iter().all(|r| r.pass);
        Ok((pass, "|V_n| and |H_n| for n = 1..8".into(), records))
    })
}

/// The ten-function suite of the equivalence brackets.
pub fn bracket_suite(seed: u64) -> Vec<VertexChain<BigRational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = vec![
        VertexChain::from_good(&GoodFunction::new(ratio(1, 1), ratio(0, 1), ratio(0, 1))),
        VertexChain::from_good(&GoodFunction::new(ratio(0, 1), ratio(1, 1), ratio(-1, 1))),
    ];
    while suite.len() < 10 {
        let u = VertexChain::random(1 + suite.len() % 2, &mut rng);
        if u.b_top() > ratio(0, 1) {
            suite.push(u);
        }
    }
    suite
}

/// The `β` grid of the brackets: `α + f(β* - α)`.
pub fn bracket_betas() -> [f64; 5] {
    [0.1, 0.3, 0.5, 0.7, 0.9].map(|f| alpha() + f * (beta_star() - alpha()))
}

/// Ratios `(𝔈/𝓔, B/𝓔, B/𝔈)` over the grid from the completed estimators
/// at depth `quads[1].depth`, `quads[0]` being one level coarser.
fn bracket_ratios(quads: &[PairQuadrature], series: &[f64]) -> Result<Vec<[f64; 3]>> {
    bracket_betas()
        .iter()
        .zip(series)
        .map(|(&beta, &e)| {
            let q = completed_double_integral(&quads[0], &quads[1], beta)?;
            let b = quads[1].besov_completed(beta)?;
            Ok([q / e, b / e, b / q])
        })
        .collect()
}

/// Equivalence brackets among `𝓔_β`, `𝔈_β` and `[u]_{B^{2,2}}` over the
/// suite and `β` grid, with depth `m` and `m + 1` drift at most 20%. Both
/// quadratures use their geometric tail completion; without it the
/// truncation error decays only like `2^{(β-β*)m}`.
pub fn check_brackets(seed: u64, depth: usize) -> Result<CheckResult> {
    timed(10, "equivalence brackets", || {
        if depth < 3 {
            return Err(crate::error::Error::InvalidLevel(format!(
                "bracket depth must be >= 3, got {depth}"
            )));
        }
        let mut records = Vec::new();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [0.0f64; 3];
        let mut worst_drift: f64 = 0.0;
        for u in bracket_suite(seed) {
            let profile = ChainProfile::new(&u)?;
            let series = bracket_betas()
                .iter()
                .map(|&b| Ok(discrete_ebeta(&profile, b, 1e-10)?.value()))
                .collect::<Result<Vec<f64>>>()?;
            let uf = u.to_f64();
            let quads = (depth - 1..=depth + 1)
                .map(|m| PairQuadrature::new(&leaf_averages(&uf, m + 1)))
                .collect::<Result<Vec<_>>>()?;
            let coarse = bracket_ratios(&quads[..2], &series)?;
            let fine = bracket_ratios(&quads[1..], &series)?;
            for (bi, (c, f)) in coarse.iter().zip(&fine).enumerate() {
                for k in 0..3 {
                    lo[k] = lo[k].min(c[k].min(f[k]));
                    hi[k] = hi[k].max(c[k].max(f[k]));
                    let drift = (f[k] / c[k] - 1.0).abs();
                    worst_drift = worst_drift.max(drift);
                    let ok = f[k].is_finite() && f[k] > 0.0 && drift <= BRACKET_DRIFT;
                    records.push(AuditRecord::new(
                        ["quad_over_series", "besov_over_series", "besov_over_quad"][k],
                        bi,
                        f[k],
                        c[k],
                        ok,
                    ));
                }
            }
        }
        let pass = records.iter().all(|r| r.pass);
        Ok((
            pass,
            format!(
                "brackets Q/E [{:.3}, {:.3}], B/E [{:.3}, {:.3}], B/Q [{:.3}, {:.3}]; max drift {:.1}% (m = {depth}, {})",
                lo[0],
                hi[0],
                lo[1],
                hi[1],
                lo[2],
                hi[2],
                100.0 * worst_drift,
                depth + 1
            ),
            records,
        ))
    })
}

/// Runs every check in order.
pub fn run_all(cfg: &AuditConfig) -> Result<Vec<CheckResult>> {
    Ok(vec![
        check_corner_recursion()?,
        check_corner_numeric()?,
        check_good_energies(cfg.seed)?,
        check_weak_monotonicity(cfg.seed)?,
        check_corner_bound(cfg.level)?,
        check_abel_probe()?,
        check_holder(cfg.seed)?,
        check_sandwich(cfg.seed)?,
        check_counts()?,
        check_brackets(cfg.seed, cfg.depth)?,
    ])
}
