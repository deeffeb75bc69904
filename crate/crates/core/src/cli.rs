//! Command-line front end. Every subcommand computes first and writes
//! afterwards from the calling thread, so output order never depends on the
//! thread pool.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::apfun::{default_u_grid, stepanov_norm, ApFunction, LpExponent};
use crate::config::{generate_fixtures, quasi_period, read_function_file, ExperimentConfig, Inequality};
use crate::error::{Error, Result};
use crate::harness::{sweep, FLAG_TAIL_INCOMPLETE};
use crate::kernels::{geometric_sine_sum_closed, geometric_sine_sum_direct, QuadratureConfig};
use crate::moduli::{best_approx_bracket, default_delta_grid, fit_modulus, omega_alpha_membership_report};
use crate::strong_means::{threshold_partial_sum, StarredSums};
use crate::summability::{generate_row, hierarchy_check, ClassReport, RowFamily};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "apsumma", version, about = "Strong summability checks for almost periodic trigonometric sums")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for `fixtures`; recorded in every output header
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Absolute quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Exit with status 3 when any result carries a non-convergence flag.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long, global = true, env = "APSUMMA_THREADS")]
    pub threads: Option<usize>,
    /// Truncation point for oscillatory kernel tails; chosen from the tolerance when absent
    #[arg(long, global = true)]
    pub tail_cutoff: Option<f64>,
    /// Quadrature panels per oscillation of the fastest exponent
    #[arg(long = "panels-per-osc", global = true)]
    pub panels_per_osc: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a function on a grid of points.
    Eval {
        #[arg(long)]
        function: PathBuf,
        /// Explicit points, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        /// Equally spaced points over one quasi-period (used when --x is absent).
        #[arg(long, default_value_t = 17)]
        points: usize,
    },
    /// Compare kernel partial sums with threshold partial sums.
    KernelCheck {
        #[arg(long)]
        function: PathBuf,
        #[arg(long, default_value_t = 32)]
        k_max: usize,
        #[arg(long, default_value_t = 17)]
        points: usize,
    },
    /// Check the closed form of the geometric sine sum against direct summation.
    IdentityCheck {
        #[arg(long, default_value_t = 0.9)]
        r_max: f64,
        /// Points per axis of the (y, z) grid.
        #[arg(long, default_value_t = 25)]
        grid: usize,
        /// Terms in the direct sum.
        #[arg(long, default_value_t = 700)]
        terms: usize,
    },
    /// Class constants of generated rows.
    Classify {
        #[arg(long)]
        family: String,
        /// Inclusive range `a..b`.
        #[arg(long, value_parser = parse_range)]
        n: (usize, usize),
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        /// Family parameter `name=value`, repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        /// Largest `m` scanned; defaults per row.
        #[arg(long)]
        m_max: Option<usize>,
    },
    /// Fitted pointwise modulus, its membership ratios and best-approximation brackets.
    Moduli {
        #[arg(long)]
        function: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 61)]
        delta_points: usize,
        #[arg(long, value_delimiter = ',')]
        sigma: Vec<f64>,
    },
    /// Ratio reports for one inequality.
    Verify {
        inequality: String,
    },
    /// Ratio reports for every inequality in the config.
    Sweep,
    /// Write the deterministic fixture corpus.
    Fixtures {
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err(format!("empty range `{s}`"));
    }
    Ok((a, b))
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().parse().map_err(|e| format!("{e}"))?))
}

/// What a subcommand produced: named text artifacts plus status.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, String)>,
    pub failed: bool,
    pub not_converged: bool,
    /// Printed to stderr.
    pub messages: Vec<String>,
}

impl Outcome {
    fn artifact(&mut self, name: &str, text: String) {
        self.artifacts.push((name.to_string(), text));
    }
}

fn quadrature(g: &GlobalOpts, base: QuadratureConfig) -> Result<QuadratureConfig> {
    let mut q = base;
    if let Some(t) = g.tol {
        q.abs_tolerance = t;
    }
    if let Some(t) = g.tail_cutoff {
        q.tail_cutoff = Some(t);
    }
    if let Some(p) = g.panels_per_osc {
        q.panels_per_oscillation = p;
    }
    q.validate()?;
    Ok(q)
}

fn header(seed: u64, q: &QuadratureConfig) -> Vec<String> {
    vec![
        format!("tol={:e}", q.abs_tolerance),
        format!("seed={seed}"),
        format!("tail_cutoff={}", q.tail_cutoff.map_or_else(|| "auto".to_string(), |t| format!("{t:e}"))),
        format!("panels_per_osc={}", q.panels_per_oscillation),
    ]
}

fn csv_text(comments: &[String], head: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut buf = Vec::new();
    for c in comments {
        writeln!(buf, "# {c}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(head)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn load_config(g: &GlobalOpts) -> Result<(ExperimentConfig, PathBuf)> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::config("", "--config is required for this subcommand"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.quadrature = quadrature(g, cfg.quadrature)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn run_sweep(g: &GlobalOpts, only: Option<Inequality>) -> Result<Outcome> {
    let (mut cfg, base) = load_config(g)?;
    if let Some(i) = only {
        cfg.inequalities = vec![i];
    }
    let functions = cfg.resolve_functions(&base)?;
    let out = sweep(&cfg, &functions)?;
    let mut comments = header(cfg.seed, &cfg.quadrature);
    comments.push(format!("c={}", cfg.c));
    comments.push(format!("n_range={}..{}", cfg.n_range.start, cfg.n_range.end));
    let mut csv = Vec::new();
    out.write_csv(&mut csv, &comments)?;
    let mut o = Outcome::default();
    let (csv_name, summary_name) = cfg
        .output
        .as_ref()
        .map_or(("ratios.csv".to_string(), "summary.json".to_string()), |s| (s.csv.clone(), s.summary.clone()));
    o.artifact(&csv_name, String::from_utf8(csv).expect("csv output is utf-8"));
    let mut summary = serde_json::to_string_pretty(&out.summary)?;
    summary.push('\n');
    o.artifact(&summary_name, summary);
    o.not_converged = out.reports.iter().any(|r| r.flags.contains(&FLAG_TAIL_INCOMPLETE));
    for (id, s) in &out.summary.inequalities {
        o.messages.push(format!(
            "{id}: {} records, max ratio {}, {} divergent groups",
            s.records,
            s.max_ratio.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}")),
            s.divergent_groups.len()
        ));
    }
    Ok(o)
}

fn function_x_grid(f: &ApFunction, points: usize) -> Vec<f64> {
    let period = quasi_period(f);
    (0..points).map(|j| j as f64 * period / points as f64).collect()
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(0);
    let mut o = Outcome::default();
    match &cli.command {
        Command::Eval { function, x, points } => {
            let f = read_function_file(function)?;
            let q = quadrature(g, QuadratureConfig::default())?;
            let xs = if x.is_empty() { function_x_grid(&f, *points) } else { x.clone() };
            let rows = f.sample(&xs).into_iter().map(|p| {
                vec![fmt(p.x), fmt(p.value.re), fmt(p.value.im), fmt(p.value.norm())]
            });
            o.artifact("eval.csv", csv_text(&header(seed, &q), &["x", "re", "im", "abs"], rows)?);
        }
        Command::KernelCheck { function, k_max, points } => {
            let f = read_function_file(function)?;
            let q = quadrature(g, QuadratureConfig::default())?;
            let sums = StarredSums::new(&f, *k_max, &q)?;
            let xs = function_x_grid(&f, *points);
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for &x in &xs {
                for k in 0..=*k_max {
                    let ks = sums.partial_sum(&f, x, k)?;
                    let direct = threshold_partial_sum(&f, x, f.alpha() * k as f64 / 2.0);
                    let diff = (ks.value - direct).norm();
                    let allowed = q.abs_tolerance + ks.tail_bound;
                    worst = worst.max(diff / allowed);
                    o.failed |= diff > allowed;
                    o.not_converged |= !ks.converged;
                    rows.push(vec![
                        fmt(x),
                        k.to_string(),
                        sums.straddling(&f, k).is_some().to_string(),
                        fmt(diff),
                        fmt(ks.tail_bound),
                        fmt(ks.quad_error),
                        ks.converged.to_string(),
                    ]);
                }
            }
            let head = ["x", "k", "adjusted", "abs_diff", "tail_bound", "quad_error", "converged"];
            o.artifact("kernel_check.csv", csv_text(&header(seed, &q), &head, rows)?);
            o.messages.push(format!(
                "{} max diff/(tol + tail_bound) = {worst:.3e}",
                if o.failed { "FAIL" } else { "PASS" }
            ));
        }
        Command::IdentityCheck { r_max, grid, terms } => {
            if !(0.0..1.0).contains(r_max) {
                return Err(Error::arg("r_max", format!("must lie in [0, 1), got {r_max}")));
            }
            if *grid < 1 {
                return Err(Error::arg("grid", "must be at least 1"));
            }
            let q = quadrature(g, QuadratureConfig::default())?;
            let mut rs: Vec<f64> = (0..).map(|j| j as f64 / 10.0).take_while(|r| r <= r_max).collect();
            if rs.last() != Some(r_max) {
                rs.push(*r_max);
            }
            let (lo, hi) = (0.05, std::f64::consts::PI - 0.05);
            let axis: Vec<f64> = (0..*grid)
                .map(|i| if *grid == 1 { lo } else { lo + (hi - lo) * i as f64 / (*grid - 1) as f64 })
                .collect();
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for &r in &rs {
                let allowed = 1e-10 + r.powi(*terms as i32) / (1.0 - r);
                let mut max_dev: f64 = 0.0;
                for &y in &axis {
                    for &z in &axis {
                        let d = (geometric_sine_sum_closed(r, y, z)? - geometric_sine_sum_direct(r, y, z, *terms)?).abs();
                        max_dev = max_dev.max(d);
                    }
                }
                worst = worst.max(max_dev);
                o.failed |= max_dev > allowed;
                rows.push(vec![fmt(r), fmt(max_dev), fmt(allowed), (max_dev <= allowed).to_string()]);
            }
            o.artifact(
                "identity_check.csv",
                csv_text(&header(seed, &q), &["r", "max_deviation", "allowed", "pass"], rows)?,
            );
            o.messages.push(format!(
                "{} max deviation {worst:.3e}",
                if o.failed { "FAIL" } else { "PASS" }
            ));
        }
        Command::Classify { family, n, c, params, m_max } => {
            let params: BTreeMap<String, f64> = params.iter().cloned().collect();
            let fam = RowFamily::from_name(family, &params)?;
            if !(*c > 1.0) || !c.is_finite() {
                return Err(Error::arg("c", format!("must be > 1, got {c}")));
            }
            let q = quadrature(g, QuadratureConfig::default())?;
            let mut rows = Vec::new();
            for n in n.0..=n.1 {
                let row = generate_row(&fam, n)?;
                let reports = hierarchy_check(&row, *c, m_max.unwrap_or_else(|| row.default_m_max()))?;
                for r in reports {
                    rows.push(r.csv_record().to_vec());
                }
            }
            let mut head = header(seed, &q);
            head.push(format!("family={}", fam.name()));
            head.push(format!("c={c}"));
            o.artifact("classify.csv", csv_text(&head, &ClassReport::csv_header(), rows)?);
        }
        Command::Moduli { function, x, delta_points, sigma } => {
            let f = read_function_file(function)?;
            let q = quadrature(g, QuadratureConfig::default())?;
            let grid = default_delta_grid(*delta_points);
            let w = fit_modulus(&f, *x, &grid)?;
            let mut head = header(seed, &q);
            head.push(format!("x={x}"));
            let w_rows = grid.iter().zip(w.values()).map(|(d, v)| vec![fmt(*d), fmt(*v)]);
            o.artifact("modulus.csv", csv_text(&head, &["delta", "w"], w_rows)?);
            let membership = omega_alpha_membership_report(&f, *x, &w, &grid, &grid)?;
            let mut buf = Vec::new();
            for c in &head {
                writeln!(buf, "# {c}")?;
            }
            membership.write_csv(&mut buf)?;
            o.artifact("membership.csv", String::from_utf8(buf).expect("csv output is utf-8"));
            o.messages.push(format!("membership max ratio {:.6e}", membership.max_ratio));
            let sigmas = if sigma.is_empty() {
                (0..=8).map(|j| f.alpha() * j as f64 / 2.0).collect()
            } else {
                sigma.clone()
            };
            let s1 = stepanov_norm(&f, LpExponent::Finite(1.0), &default_u_grid(&f))?;
            let b_rows = sigmas
                .iter()
                .map(|&s| best_approx_bracket(&f, s).map(|b| vec![fmt(s), fmt(b.lower), fmt(b.upper)]))
                .collect::<Result<Vec<_>>>()?;
            head.push(format!("s1_norm={s1:e}"));
            o.artifact("brackets.csv", csv_text(&head, &["sigma", "lower", "upper"], b_rows)?);
        }
        Command::Verify { inequality } => return run_sweep(g, Some(Inequality::parse(inequality)?)),
        Command::Sweep => return run_sweep(g, None),
        Command::Fixtures { count } => {
            let seed = g.seed.ok_or_else(|| Error::arg("seed", "--seed is required for fixtures"))?;
            let fixtures = generate_fixtures(seed, *count)?;
            for fx in &fixtures {
                let mut text = serde_json::to_string_pretty(fx)?;
                text.push('\n');
                o.artifact(&format!("{}.json", fx.id), text);
            }
        }
    }
    Ok(o)
}

fn emit(g: &GlobalOpts, o: &Outcome) -> Result<()> {
    match &g.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for (name, text) in &o.artifacts {
                let mut w = BufWriter::new(File::create(dir.join(name))?);
                w.write_all(text.as_bytes())?;
                w.flush()?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            let many = o.artifacts.len() > 1;
            for (name, text) in &o.artifacts {
                if many {
                    writeln!(w, "## {name}")?;
                }
                w.write_all(text.as_bytes())?;
            }
            w.flush()?;
        }
    }
    for m in &o.messages {
        eprintln!("{m}");
    }
    Ok(())
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::HierarchyViolation { .. } => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

/// Parses `args`, runs the subcommand and returns the process status.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INVALID),
            };
        }
    };
    if let Some(t) = cli.global.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_INVALID);
        }
        // a second build in the same process fails harmlessly
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(error_code(&e));
        }
    };
    if let Err(e) = emit(&cli.global, &outcome) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_INVALID);
    }
    if cli.global.strict && outcome.not_converged {
        eprintln!("non-convergence flags present");
        return ExitCode::from(EXIT_NOT_CONVERGED);
    }
    if outcome.failed {
        return ExitCode::from(EXIT_FAILURE);
    }
    ExitCode::SUCCESS
}
