//! Command-line front end.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use formzeros::counting::{count_zeros_exact, rep_counts, CountMethod};
use formzeros::exec::init_threads;
use formzeros::expsums::{
    classify_arc, default_delta, dirichlet_approx, normalized_s, s1, s2, t_sum, weyl_envelope, ComplexValue,
    GeneratingFunctions,
};
use formzeros::integral::{inner_integral, j_cdf, j_region, j_truncated, DEFAULT_GRID, DEFAULT_SAMPLES};
use formzeros::local::{local_density_oracle, partial_singular_series, s_local, singular_series};
use formzeros::report::{predict, verify_trend, Config, DEFAULT_PRIME_BOUND, DEFAULT_SEED, DEFAULT_TOL};
use formzeros::{Budgets, Error, Execution, FormSpec, Result};

#[derive(Parser)]
#[command(
    name = "formzeros",
    version,
    about = "Exact zero counts and main-term predictions for split forms"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Degree d of the form.
    #[arg(long, global = true)]
    d: Option<u32>,
    /// Box side P (points satisfy 1 <= x_i <= P).
    #[arg(long, global = true)]
    p: Option<u64>,
    /// Compact JSON output.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// CSV output (tabular subcommands only).
    #[arg(long, global = true)]
    csv: bool,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (falls back to FORMZEROS_THREADS).
    #[arg(long, global = true, env = "FORMZEROS_THREADS")]
    threads: Option<usize>,
    /// Run every kernel on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[arg(long, global = true)]
    budget_bruteforce: Option<u128>,
    #[arg(long, global = true)]
    budget_table: Option<u64>,
    #[arg(long, global = true)]
    budget_residue: Option<u64>,
    #[arg(long, global = true, default_value_t = DEFAULT_PRIME_BOUND)]
    prime_bound: u64,
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Monte Carlo samples for integral estimates.
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES)]
    samples: u64,
    /// Grid resolution for the CDF reduction.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Write output to FILE instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<std::path::PathBuf>,
    /// Omit wall-clock timings so output is reproducible byte for byte.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegralKind {
    Region,
    Cdf,
    Truncated,
    Inner,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesKind {
    Euler,
    Partial,
}

#[derive(Subcommand)]
enum Command {
    /// Exact number of zeros in the box.
    Count {
        #[arg(long, default_value = "convolution")]
        method: String,
    },
    /// Representation counts a(n) of f_d over the box.
    Repcounts,
    /// Complete exponential sums modulo q, or the generating functions at alpha.
    Expsum {
        #[arg(long)]
        q: Option<u64>,
        #[arg(long, default_value_t = 1)]
        a: u64,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Singular series.
    Series {
        #[arg(long, value_enum, default_value = "euler")]
        mode: SeriesKind,
        /// Largest modulus for the partial-sum mode.
        #[arg(long, default_value_t = 1000)]
        q_max: u64,
    },
    /// Solution density modulo p^L against the partial local factor.
    LocalDensity {
        #[arg(long)]
        prime: u64,
        #[arg(long, default_value_t = 1)]
        levels: u32,
    },
    /// Singular integral estimates.
    Integral {
        #[arg(long, value_enum, default_value = "region")]
        method: IntegralKind,
        #[arg(long, default_value_t = 32.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// Exact count against the main term P^{d+1} S J.
    Predict {
        #[arg(long, default_value = "convolution")]
        method: String,
        #[arg(long, default_value = "auto")]
        integral: String,
    },
    /// Relative error trend over several box sizes.
    Verify {
        /// Comma-separated ascending box sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        ps: Vec<u64>,
        #[arg(long, default_value = "convolution")]
        method: String,
        #[arg(long, default_value = "auto")]
        integral: String,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Major/minor arc classification of alpha.
    Arcs {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: Option<f64>,
    },
}

enum Output {
    Json(Value),
    Table(String, Value),
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Anomaly(format!("serialization failed: {e}")))
}

impl Global {
    fn spec(&self) -> Result<FormSpec> {
        FormSpec::new(self.d.ok_or_else(|| Error::input("--d is required"))?)
    }

    fn box_side(&self) -> Result<u64> {
        match self.p {
            Some(0) => Err(Error::input("--p must be positive")),
            Some(p) => Ok(p),
            None => Err(Error::input("--p is required")),
        }
    }

    fn budgets(&self) -> Budgets {
        let mut b = Budgets::default();
        if let Some(v) = self.budget_bruteforce {
            b.bruteforce_points = v;
        }
        if let Some(v) = self.budget_table {
            b.table_entries = v;
        }
        if let Some(v) = self.budget_residue {
            b.residue_modulus = v;
        }
        b
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn config(&self, method: &str, integral: &str) -> Result<Config> {
        Ok(Config {
            budgets: self.budgets(),
            count_method: method.parse()?,
            prime_bound: self.prime_bound,
            tol: self.tol,
            j_method: integral.parse()?,
            samples: self.samples,
            grid: self.grid,
            seed: self.seed,
            exec: self.exec(),
            timing: !self.no_timing,
            threshold: None,
        })
    }

    fn timed(&self, mut v: Value, start: Instant) -> Value {
        if !self.no_timing {
            v["seconds"] = json!(start.elapsed().as_secs_f64());
        }
        v
    }
}

fn run(cli: &Cli) -> Result<Output> {
    let g = &cli.global;
    let start = Instant::now();
    Ok(match &cli.command {
        Command::Count { method } => {
            let (spec, p) = (g.spec()?, g.box_side()?);
            let m: CountMethod = method.parse()?;
            let count = count_zeros_exact(spec, p, m, &g.budgets(), g.exec())?;
            let v = json!({"d": spec.d(), "p": p, "count": count, "method": m});
            Output::Table(
                "d,p,count\n".to_string() + &format!("{},{},{}\n", spec.d(), p, count),
                g.timed(v, start),
            )
        }
        Command::Repcounts => {
            let (spec, p) = (g.spec()?, g.box_side()?);
            let table = rep_counts(spec, p, &g.budgets(), g.exec())?;
            let mut csv = String::from("n,count\n");
            let entries: Vec<Value> = table
                .iter()
                .map(|(n, c)| {
                    csv.push_str(&format!("{n},{c}\n"));
                    json!([n, c.to_string()])
                })
                .collect();
            let v = json!({
                "d": spec.d(), "p": p, "nmax": table.nmax(),
                "total": table.total().to_string(), "entries": entries,
            });
            Output::Table(csv, g.timed(v, start))
        }
        Command::Expsum { q, a, alpha } => {
            let spec = g.spec()?;
            let budgets = g.budgets();
            if let Some(alpha) = alpha {
                let p = g.box_side()?;
                let table = rep_counts(spec, p, &budgets, g.exec())?;
                let gf = GeneratingFunctions::new(&table);
                let v = json!({
                    "d": spec.d(), "p": p, "alpha": alpha,
                    "F1": ComplexValue::from(gf.f1(*alpha)),
                    "F2": ComplexValue::from(gf.f2(*alpha)),
                    "F": ComplexValue::from(gf.f(*alpha)),
                });
                Output::Json(g.timed(v, start))
            } else {
                let q = q.ok_or_else(|| Error::input("expsum needs --q or --alpha"))?;
                let v = json!({
                    "d": spec.d(), "q": q, "a": a,
                    "S1": ComplexValue::from(s1(spec, q, *a, &budgets)?),
                    "S2": ComplexValue::from(s2(spec, q, *a)?),
                    "T": t_sum(spec, q)?.to_string(),
                    "S": ComplexValue::from(normalized_s(spec, q, &budgets, g.exec())?),
                });
                Output::Json(g.timed(v, start))
            }
        }
        Command::Series { mode, q_max } => {
            let spec = g.spec()?;
            let est = match mode {
                SeriesKind::Euler => singular_series(spec, g.prime_bound, g.tol, &g.budgets(), g.exec())?,
                SeriesKind::Partial => partial_singular_series(spec, *q_max, &g.budgets(), g.exec())?,
            };
            let mut csv = String::from("p,levels,sigma\n");
            for f in &est.factors {
                csv.push_str(&format!("{},{},{}\n", f.p, f.levels, f.sigma));
            }
            let mut v = to_value(&est)?;
            v["d"] = json!(spec.d());
            v["tail"] = json!(est.tail_bound);
            Output::Table(csv, g.timed(v, start))
        }
        Command::LocalDensity { prime, levels } => {
            let spec = g.spec()?;
            let budgets = g.budgets();
            let density = local_density_oracle(spec, *prime, *levels, &budgets)?;
            let mut partial = 1.0;
            let mut terms = Vec::new();
            for l in 1..=*levels {
                let t = s_local(spec, *prime, l, &budgets, g.exec())?;
                partial += t.value;
                terms.push(t);
            }
            let v = json!({
                "d": spec.d(), "prime": prime, "levels": levels,
                "density": density.to_string(),
                "density_value": density.to_f64(),
                "partial_factor": partial,
                "terms": terms,
            });
            Output::Json(g.timed(v, start))
        }
        Command::Integral { method, mu, gamma } => {
            let spec = g.spec()?;
            let exec = g.exec();
            let v = match method {
                IntegralKind::Region => to_value(&j_region(spec, g.samples, g.seed, exec)?)?,
                IntegralKind::Cdf => to_value(&j_cdf(spec, g.grid, exec)?)?,
                IntegralKind::Truncated => {
                    let mut v = to_value(&j_truncated(spec, *mu, g.samples, g.seed, exec)?)?;
                    v["mu"] = json!(mu);
                    v
                }
                IntegralKind::Inner => {
                    let mut v = to_value(&inner_integral(spec, *gamma, g.samples, g.seed, exec)?)?;
                    v["gamma"] = json!(gamma);
                    v
                }
            };
            let mut v = v;
            v["d"] = json!(spec.d());
            Output::Json(g.timed(v, start))
        }
        Command::Predict { method, integral } => {
            let (spec, p) = (g.spec()?, g.box_side()?);
            let report = predict(spec, p, &g.config(method, integral)?)?;
            Output::Json(to_value(&report)?)
        }
        Command::Verify {
            ps,
            method,
            integral,
            threshold,
        } => {
            let spec = g.spec()?;
            let mut config = g.config(method, integral)?;
            config.threshold = *threshold;
            let trend = verify_trend(spec, ps, &config)?;
            Output::Table(trend.to_csv()?, to_value(&trend)?)
        }
        Command::Arcs { alpha, delta } => {
            let (spec, p) = (g.spec()?, g.box_side()?);
            let delta = delta.unwrap_or_else(|| default_delta(spec.d()));
            let arc = classify_arc(spec, *alpha, p, delta)?;
            let q_max = ((p as f64).powf(f64::from(spec.d()) - delta)).floor().max(1.0) as u64;
            let approx = dirichlet_approx(alpha.min(1.0), q_max)?;
            let v = json!({
                "d": spec.d(), "p": p, "alpha": alpha, "delta": delta,
                "arc": arc, "approximation": approx,
                "weyl_envelope": weyl_envelope(p as f64, spec.d(), delta),
            });
            Output::Json(v)
        }
    })
}

fn render(g: &Global, out: Output) -> Result<String> {
    let (csv, value) = match out {
        Output::Json(v) => (None, v),
        Output::Table(c, v) => (Some(c), v),
    };
    if g.csv {
        return csv.ok_or_else(|| Error::input("--csv is not supported for this subcommand"));
    }
    let text = if g.json {
        serde_json::to_string(&value)
    } else {
        serde_json::to_string_pretty(&value)
    };
    text.map(|t| t + "\n").map_err(|e| Error::Anomaly(e.to_string()))
}

fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::input(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_threads(cli.global.threads);
    match run(&cli)
        .and_then(|o| render(&cli.global, o))
        .and_then(|t| emit(&cli.global, &t))
    {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
