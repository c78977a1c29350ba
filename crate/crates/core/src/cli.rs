//! Command-line front end: `gasket <command> [flags]`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::FromPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::audit::{self, AuditConfig};
use crate::besov::{
    self, abel_probe, completed_double_integral, discrete_ebeta, ChainProfile, EnergySource, PairQuadrature,
};
use crate::chain::VertexChain;
use crate::energy::{cell_averages, graph_energy, leaf_averages, CellFunction};
use crate::error::{Error, Result};
use crate::geometry::{self, Word};
use crate::good::GoodFunction;
use crate::resistance::{corner_bound_audit, corner_resistance_r, pair_resistance};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "gasket", version, about = "Energies, resistances and Besov-type forms on the Sierpiński gasket")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "csv", global = true)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Largest admissible level.
    #[arg(long, default_value_t = 8, global = true)]
    pub max_level: usize,
    #[command(subcommand)]
    pub command: Command,
}

/// The function whose energies are computed.
#[derive(Debug, Args)]
pub struct Source {
    /// Good function with boundary values `x0,x1,x2` (integers, `p/q` or decimals).
    #[arg(long, value_parser = parse_good, conflicts_with = "chain")]
    pub good: Option<GoodFunction<BigRational>>,
    /// Random piecewise-harmonic function with values on `V_k`.
    #[arg(long, value_name = "K")]
    pub chain: Option<usize>,
    /// Seed for `--chain`.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Edge list of the cell graph `X_n`.
    Graph {
        #[arg(long)]
        level: usize,
    },
    /// Corner resistances up to `--level`, or the corner-bound audit at that level.
    Resistance {
        #[arg(long)]
        level: usize,
        /// Audit `R_n(w, i^n)` against `(5/2)(5/3)^n` for every `w` and `i`.
        #[arg(long)]
        audit: bool,
    },
    /// `A_n` and `D_n` for `n = 1..=level`.
    Energy {
        #[arg(long)]
        level: usize,
        /// Use leaf quadrature at this depth instead of exact averages.
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        source: Source,
    },
    /// Abel probe `(β* - β)·𝓔_β` at `β = β* - ε`.
    Gamma {
        /// Comma-separated `ε` values.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[command(flatten)]
        source: Source,
    },
    /// `𝓔_β`, the double integral and the metric Besov seminorms.
    Besov {
        /// Comma-separated `β` values.
        #[arg(long, value_delimiter = ',')]
        beta: Vec<f64>,
        /// Quadrature depth `m`.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[command(flatten)]
        source: Source,
    },
    /// Every acceptance check, with a pass/fail line each.
    AuditAll {
        #[arg(long, default_value_t = 6)]
        level: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn parse_value(s: &str) -> std::result::Result<BigRational, String> {
    let s = s.trim();
    BigRational::from_str(s)
        .ok()
        .or_else(|| s.parse::<f64>().ok().and_then(BigRational::from_f64))
        .ok_or_else(|| format!("invalid number `{s}`"))
}

pub fn parse_good(s: &str) -> std::result::Result<GoodFunction<BigRational>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x0,x1,x2, got `{s}`"));
    }
    let v = parts
        .iter()
        .map(|p| parse_value(p))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(GoodFunction::new(v[0].clone(), v[1].clone(), v[2].clone()))
}

enum Function {
    Good(GoodFunction<BigRational>),
    Chain(VertexChain<BigRational>),
}

impl Source {
    fn build(&self, max_level: usize) -> Result<Function> {
        match (&self.good, self.chain) {
            (_, Some(k)) => {
                check_level(k, max_level)?;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok(Function::Chain(VertexChain::random(k, &mut rng)))
            }
            (Some(g), None) => Ok(Function::Good(g.clone())),
            (None, None) => Ok(Function::Good(parse_good("1,0,0").expect("literal"))),
        }
    }
}

impl Function {
    fn profile(&self) -> Result<Box<dyn EnergySource>> {
        Ok(match self {
            Function::Good(g) => Box::new(g.to_f64()),
            Function::Chain(c) => Box::new(ChainProfile::new(c)?),
        })
    }

    fn leaves(&self, depth: usize) -> CellFunction<f64> {
        match self {
            Function::Good(g) => leaf_averages(&g.to_f64(), depth),
            Function::Chain(c) => leaf_averages(&c.to_f64(), depth),
        }
    }
}

fn check_level(n: usize, max_level: usize) -> Result<()> {
    if n == 0 || n > max_level {
        return Err(Error::InvalidLevel(format!(
            "level {n} outside 1..={max_level} (raise --max-level to override)"
        )));
    }
    Ok(())
}

fn emit<R: Serialize>(rows: &[R], format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(out);
            for r in rows {
                wtr.serialize(r)?;
            }
            wtr.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ResistanceRow {
    n: usize,
    r_n: f64,
    #[serde(rename = "R")]
    r: f64,
    exact: f64,
    rel_err: f64,
}

#[derive(Serialize)]
struct EnergyRow {
    n: usize,
    #[serde(rename = "A_n")]
    a: f64,
    #[serde(rename = "D_n")]
    d: f64,
}

#[derive(Serialize)]
struct BesovRow {
    beta: f64,
    series: f64,
    double_integral: f64,
    b22: f64,
    b2inf: f64,
    double_integral_completed: Option<f64>,
    b22_completed: Option<f64>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    id: usize,
    name: &'a str,
    pass: bool,
    summary: &'a str,
}

fn exact_energies(f: &Function, level: usize) -> Result<Vec<EnergyRow>> {
    (1..=level)
        .map(|n| {
            let a = match f {
                Function::Good(g) => {
                    let g_n = geometry::graph(n)?;
                    let avgs = Word::all(n)
                        .map(|w| g.exact_cell_average(&w))
                        .collect::<Result<Vec<_>>>()?;
                    graph_energy(&CellFunction::new(n, avgs)?, &g_n)?
                }
                Function::Chain(c) => c.a_n(n)?,
            }
            .to_f64();
            Ok(EnergyRow {
                n,
                a,
                d: (5.0f64 / 3.0).powi(n as i32) * a,
            })
        })
        .collect()
}

fn quadrature_energies(f: &Function, level: usize, depth: usize) -> Result<Vec<EnergyRow>> {
    (1..=level)
        .map(|n| {
            let avgs = match f {
                Function::Good(g) => cell_averages(&g.to_f64(), n, depth)?,
                Function::Chain(c) => cell_averages(&c.to_f64(), n, depth)?,
            };
            let g = geometry::graph(n)?;
            let a = graph_energy(&avgs, &g)?;
            Ok(EnergyRow {
                n,
                a,
                d: (5.0f64 / 3.0).powi(n as i32) * a,
            })
        })
        .collect()
}

/// Runs one parsed command, writing to `out`; returns the exit status.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let fmt = cli.format;
    match &cli.command {
        Command::Graph { level } => {
            check_level(*level, cli.max_level)?;
            let g = geometry::graph(*level)?;
            match fmt {
                Format::Csv => g.write_csv(out)?,
                Format::Json => {
                    serde_json::to_writer_pretty(&mut *out, &g.json_rows())?;
                    writeln!(out)?;
                }
            }
        }
        Command::Resistance { level, audit } => {
            check_level(*level, cli.max_level)?;
            if *audit {
                let report = corner_bound_audit(*level)?;
                emit(&report.rows, fmt, out)?;
                return Ok(i32::from(report.max_ratio > 1.0));
            }
            let rows = (1..=*level)
                .map(|n| {
                    let r = pair_resistance(n, &Word::repeat(0, n), &Word::repeat(1, n))?;
                    let exact = (5.0f64 / 3.0).powi(n as i32) - 1.0;
                    Ok(ResistanceRow {
                        n,
                        r_n: corner_resistance_r(n)?.to_f64(),
                        r,
                        exact,
                        rel_err: ((r - exact) / exact).abs(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(&rows, fmt, out)?;
        }
        Command::Energy {
            level,
            depth,
            source,
        } => {
            check_level(*level, cli.max_level)?;
            let f = source.build(cli.max_level)?;
            let rows = match depth {
                Some(m) => {
                    if *m < *level || *m > cli.max_level + 4 {
                        return Err(Error::InvalidLevel(format!(
                            "depth {m} must lie in {level}..={}",
                            cli.max_level + 4
                        )));
                    }
                    quadrature_energies(&f, *level, *m)?
                }
                None => exact_energies(&f, *level)?,
            };
            emit(&rows, fmt, out)?;
        }
        Command::Gamma { eps, source } => {
            let f = source.build(cli.max_level)?;
            let grid: Vec<f64> = if eps.is_empty() {
                besov::DEFAULT_EPS.to_vec()
            } else {
                eps.clone()
            };
            let rows = abel_probe(f.profile()?.as_ref(), &grid, 1e-12)?;
            emit(&rows, fmt, out)?;
            return Ok(i32::from(rows.iter().any(|r| r.verdict != "pass")));
        }
        Command::Besov {
            beta,
            depth,
            source,
        } => {
            if *depth < 1 || *depth > 7 {
                return Err(Error::InvalidLevel(format!("depth {depth} outside 1..=7")));
            }
            let f = source.build(cli.max_level)?;
            let grid: Vec<f64> = if beta.is_empty() {
                audit::bracket_betas().to_vec()
            } else {
                beta.clone()
            };
            let profile = f.profile()?;
            let quad = PairQuadrature::new(&f.leaves(depth + 1))?;
            let coarse = if *depth >= 3 {
                Some(PairQuadrature::new(&f.leaves(*depth))?)
            } else {
                None
            };
            let rows = grid
                .iter()
                .map(|&b| {
                    let s = quad.besov(b, *depth)?;
                    Ok(BesovRow {
                        beta: b,
                        series: discrete_ebeta(profile.as_ref(), b, 1e-10)?.value(),
                        double_integral: quad.double_integral(b),
                        b22: s.b22,
                        b2inf: s.b2inf,
                        double_integral_completed: coarse
                            .as_ref()
                            .map(|c| completed_double_integral(c, &quad, b))
                            .transpose()?,
                        b22_completed: coarse
                            .as_ref()
                            .map(|_| quad.besov_completed(b))
                            .transpose()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(&rows, fmt, out)?;
        }
        Command::AuditAll { level, depth, seed } => {
            check_level(*level, cli.max_level)?;
            let cfg = AuditConfig {
                level: *level,
                depth: *depth,
                seed: *seed,
            };
            let results = audit::run_all(&cfg)?;
            for r in &results {
                eprintln!("check {} took {:.2}s", r.id, r.seconds);
            }
            let pass = results.iter().all(|r| r.pass);
            match &cli.out {
                // Summary on stdout, records in the file.
                Some(_) => {
                    let stdout = io::stdout();
                    let mut lock = stdout.lock();
                    for r in &results {
                        writeln!(lock, "{}", r.line())?;
                    }
                    let records: Vec<_> = results.iter().flat_map(|r| r.records.clone()).collect();
                    emit(&records, fmt, out)?;
                }
                None => match fmt {
                    Format::Csv => {
                        for r in &results {
                            writeln!(out, "{}", r.line())?;
                        }
                    }
                    Format::Json => {
                        let rows: Vec<_> = results
                            .iter()
                            .map(|r| SummaryRow {
                                id: r.id,
                                name: r.name,
                                pass: r.pass,
                                summary: &r.summary,
                            })
                            .collect();
                        emit(&rows, fmt, out)?;
                    }
                },
            }
            if !pass {
                for r in results.iter().filter(|r| !r.pass) {
                    for rec in r.records.iter().filter(|x| !x.pass) {
                        eprintln!(
                            "failed: {} n={} lhs={} rhs={} ratio={}",
                            rec.check, rec.n, rec.lhs, rec.rhs, rec.ratio
                        );
                    }
                }
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidLevel(_)
            | Error::BetaOutOfRange { .. }
            | Error::Parse(_)
            | Error::InvalidDigit(_)
            | Error::Budget(_)
    )
}

/// Parses `args` and runs; returns the process exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.out {
        Some(path) => File::create(path)
            .map_err(Error::from)
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                let code = execute(&cli, &mut w)?;
                w.flush()?;
                Ok(code)
            }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            execute(&cli, &mut lock)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                2
            } else {
                1
            }
        }
    }
}
