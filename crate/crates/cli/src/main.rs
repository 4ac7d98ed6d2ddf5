use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rca_core::bonferroni::{calibrate_alpha1, AbarGrid, Alpha1Table, CalibrationConfig};
use rca_core::empirical::{ingest, run_empirical, Column, Detrend, EmpiricalConfig, EmpiricalReport};
use rca_core::experiments::{
    run_asymp_power, run_power, run_size, AsympPowerConfig, PowerConfig, ResultTable, SizeConfig, Tables, TestKind,
};
use rca_core::limitdist::{
    build_cv_table, default_a_grid, default_levels, CriticalValueTable, PathConfig, DEFAULT_FIGURE_REPS,
    DEFAULT_TABLE_REPS, DEFAULT_TABLE_STEPS,
};
use rca_core::simulate::{gen_innovations, simulate_rca, InnovationKind, InnovationSpec, RcaParams};
use rca_core::teststats::StatKind;
use serde_json::json;

const CV_FILE: &str = "cvtable.csv";
const ALPHA1_FILE: &str = "alpha1.csv";

#[derive(Parser)]
#[command(name = "rca", version, about = "Tests for coefficient randomness in local-to-unity autoregressions")]
struct Cli {
    /// Master seed for every simulation.
    #[arg(long, global = true, default_value_t = 20240601)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory holding cvtable.csv and alpha1.csv.
    #[arg(long, global = true, env = "RCA_TABLE_DIR")]
    table_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one path of the RCA(1) model.
    Simulate(SimulateArgs),
    /// Run the Bonferroni-Wald test on a column of a CSV file.
    Test(TestArgs),
    /// Finite-sample size study.
    Size(SizeArgs),
    /// Finite-sample power study.
    Power(PowerArgs),
    /// Asymptotic power curves.
    AsympPower(AsympArgs),
    /// Build a critical value table for the centered t-ratio.
    Cvtable(CvtableArgs),
    /// Simulate alpha1 values for the Bonferroni test.
    Calibrate(CalibrateArgs),
    /// Print an alpha1 table.
    Alpha1(Alpha1Args),
}

#[derive(Args)]
struct TableArgs {
    /// Critical value table (overrides the table directory).
    #[arg(long)]
    cv_table: Option<PathBuf>,
    /// Alpha1 table (overrides the table directory).
    #[arg(long)]
    alpha1_table: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    #[arg(long, default_value_t = -300.0, allow_hyphen_values = true)]
    grid_lo: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    grid_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    grid_step: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<AbarGrid> {
        Ok(AbarGrid::new(self.grid_lo, self.grid_hi, self.grid_step)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    t: usize,
    #[arg(long, conflicts_with = "a")]
    rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, conflicts_with = "c2")]
    omega2: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// `normal` or `chisq:<df>`.
    #[arg(long, default_value = "normal")]
    innovation: String,
    /// Corr(eps, v), normal innovations only.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    corr: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y0: f64,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column name or zero-based index.
    #[arg(long)]
    column: String,
    /// Take natural logs before detrending.
    #[arg(long)]
    log: bool,
    /// `linear` or `none`.
    #[arg(long, default_value = "linear")]
    detrend: String,
    #[arg(long, default_value_t = 0.05)]
    alpha2: f64,
    /// Print the full JSON report instead of the summary row.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    tables: TableArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct SizeArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [200usize, 500, 1000])]
    t: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.8, 0.9, 0.95, 0.98, 1.0, 1.01])]
    rho: Vec<f64>,
    #[arg(long, default_value = "normal")]
    innovation: String,
    #[arg(long, default_value_t = 5000)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha2: f64,
    #[arg(long, value_delimiter = ',', default_values_t = ["BonfWald".to_string()])]
    tests: Vec<String>,
    #[command(flatten)]
    tables: TableArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long, default_value_t = 200)]
    t: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.75], allow_hyphen_values = true)]
    corr: Vec<f64>,
    #[arg(long, value_delimiter = ',', conflicts_with = "c2")]
    omega2: Option<Vec<f64>>,
    /// c² grid, converted to ω² = c²/T^1.5.
    #[arg(long, value_delimiter = ',')]
    c2: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20000)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha2: f64,
    #[arg(long, value_delimiter = ',', default_values_t = ["BonfWald".to_string(), "InfeasibleWaldStar".to_string(), "LNstarKnownRho".to_string()])]
    tests: Vec<String>,
    #[arg(long)]
    size_adjust: bool,
    #[command(flatten)]
    tables: TableArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct AsympArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.0], allow_hyphen_values = true)]
    a: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0], allow_hyphen_values = true)]
    q: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])]
    c2: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = ["LN".to_string(), "Wald".to_string()])]
    kinds: Vec<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    psi: f64,
    /// σ²_ε/σ_η (1/√2 for normal ε).
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    ratio: f64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_TABLE_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_FIGURE_REPS)]
    reps: usize,
}

#[derive(Args)]
struct CvtableArgs {
    /// a grid (default: the shipped grid).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    /// Levels (default: 0.005..0.3 and 0.7..0.995 by 0.005).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TABLE_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_TABLE_REPS)]
    reps: usize,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',')]
    psi: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2000)]
    t: usize,
    #[arg(long, default_value_t = 5000)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha2: f64,
    /// Largest acceptable worst-case rejection rate.
    #[arg(long, default_value_t = 0.05)]
    target: f64,
    /// Critical value table (overrides the table directory).
    #[arg(long)]
    cv_table: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct Alpha1Args {
    /// Print the published table rather than the configured one.
    #[arg(long)]
    published: bool,
    #[arg(long)]
    alpha1_table: Option<PathBuf>,
}

fn parse_innovation(s: &str) -> Result<InnovationKind> {
    let s = s.trim().to_ascii_lowercase();
    if s == "normal" {
        return Ok(InnovationKind::Normal);
    }
    let df = s.strip_prefix("chisq").map(|r| r.trim_start_matches([':', '(']).trim_end_matches(')'));
    match df.and_then(|d| d.parse::<u32>().ok()) {
        Some(df) if df > 0 => Ok(InnovationKind::StdChiSq { df }),
        _ => bail!("unknown innovation '{s}' (expected normal or chisq:<df>)"),
    }
}

fn parse_list<T: std::str::FromStr>(items: &[String]) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    items.iter().map(|s| s.parse::<T>().with_context(|| format!("bad value '{s}'"))).collect()
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    table_dir: Option<PathBuf>,
}

impl Ctx {
    fn cv_table(&self, flag: &Option<PathBuf>) -> Result<CriticalValueTable> {
        if let Some(p) = flag {
            return CriticalValueTable::load(p).with_context(|| format!("loading {}", p.display()));
        }
        if let Some(p) = self.table_dir.as_ref().map(|d| d.join(CV_FILE)).filter(|p| p.exists()) {
            log::info!("using critical values from {}", p.display());
            return CriticalValueTable::load(&p).with_context(|| format!("loading {}", p.display()));
        }
        log::info!("using the built-in critical value table");
        Ok(CriticalValueTable::shipped())
    }

    fn alpha1_table(&self, flag: &Option<PathBuf>) -> Result<Alpha1Table> {
        if let Some(p) = flag {
            return Alpha1Table::load(p).with_context(|| format!("loading {}", p.display()));
        }
        if let Some(p) = self.table_dir.as_ref().map(|d| d.join(ALPHA1_FILE)).filter(|p| p.exists()) {
            log::info!("using alpha1 values from {}", p.display());
            return Alpha1Table::load(&p).with_context(|| format!("loading {}", p.display()));
        }
        Ok(Alpha1Table::published())
    }

    /// Writer for the command's data output.
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn write_sidecar(&self, meta: &serde_json::Value) -> Result<()> {
        if let Some(p) = &self.out {
            let mut side = p.clone().into_os_string();
            side.push(".json");
            std::fs::write(&side, serde_json::to_string_pretty(meta)?)?;
        }
        Ok(())
    }

    fn emit_results(&self, table: &ResultTable) -> Result<()> {
        match &self.out {
            Some(p) => table.save(p)?,
            None => table.write_csv(io::stdout().lock())?,
        }
        Ok(())
    }
}

fn tables_for<'a>(cv: &'a CriticalValueTable, a1: &'a Alpha1Table) -> Tables<'a> {
    Tables { cv, alpha1: a1 }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    let ctx = Ctx { seed: cli.seed, out: cli.out, table_dir: cli.table_dir };
    match cli.cmd {
        Cmd::Simulate(a) => {
            let kind = parse_innovation(&a.innovation)?;
            let spec = InnovationSpec { kind, ..InnovationSpec::normal() }.with_corr(a.corr);
            let mut params = RcaParams::new(a.t).y0(a.y0);
            params.rho = a.rho;
            params.a = a.a;
            params.omega2 = a.omega2;
            params.c2 = a.c2;
            let inn = gen_innovations(&spec, a.t, ctx.seed)?;
            let y = simulate_rca(&params, &inn.eps, &inn.v)?;
            y.write_csv(ctx.writer()?)?;
            ctx.write_sidecar(&json!({ "seed": ctx.seed, "params": params, "innovation": spec }))?;
        }
        Cmd::Test(a) => {
            let mut cfg = EmpiricalConfig::new(&a.input, a.column.parse::<Column>()?);
            cfg.take_log = a.log;
            cfg.detrend = a.detrend.parse::<Detrend>()?;
            cfg.alpha2 = a.alpha2;
            cfg.cv_table = a.tables.cv_table.clone();
            cfg.alpha1_table = a.tables.alpha1_table.clone();
            cfg.grid = a.grid.grid()?;
            let cv = ctx.cv_table(&a.tables.cv_table)?;
            let a1 = ctx.alpha1_table(&a.tables.alpha1_table)?;
            let y = ingest(&cfg).with_context(|| format!("reading {}", cfg.input_path.display()))?;
            let report = run_empirical(&y, &cfg, &cv, &a1)?;
            for note in &report.bonferroni.notes {
                log::warn!("{note}");
            }
            let mut w = ctx.writer()?;
            if a.json || ctx.out.is_some() {
                let doc = json!({ "seed": ctx.seed, "config": cfg, "report": report });
                writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
            } else {
                writeln!(w, "{}", EmpiricalReport::header())?;
                writeln!(w, "{}", report.summary_row())?;
            }
        }
        Cmd::Size(a) => {
            let cv = ctx.cv_table(&a.tables.cv_table)?;
            let a1 = ctx.alpha1_table(&a.tables.alpha1_table)?;
            let mut cfg = SizeConfig::new(a.t, a.rho, a.reps, ctx.seed);
            cfg.innovation = InnovationSpec { kind: parse_innovation(&a.innovation)?, ..InnovationSpec::normal() };
            cfg.alpha2 = a.alpha2;
            cfg.grid = a.grid.grid()?;
            cfg.tests = parse_list::<TestKind>(&a.tests)?;
            ctx.emit_results(&run_size(&cfg, tables_for(&cv, &a1))?)?;
        }
        Cmd::Power(a) => {
            let cv = ctx.cv_table(&a.tables.cv_table)?;
            let a1 = ctx.alpha1_table(&a.tables.alpha1_table)?;
            let omega2 = match (a.omega2, a.c2) {
                (Some(w), _) => w,
                (None, Some(c)) => PowerConfig::omega2_from_c2(a.t, &c),
                (None, None) => PowerConfig::omega2_from_c2(a.t, &[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 28.28]),
            };
            let mut cfg = PowerConfig::new(a.t, a.rho, a.corr, omega2, a.reps, ctx.seed);
            cfg.alpha2 = a.alpha2;
            cfg.grid = a.grid.grid()?;
            cfg.tests = parse_list::<TestKind>(&a.tests)?;
            cfg.size_adjust = a.size_adjust;
            ctx.emit_results(&run_power(&cfg, tables_for(&cv, &a1))?)?;
        }
        Cmd::AsympPower(a) => {
            let mut cfg = AsympPowerConfig::new(a.a, a.q, a.c2, parse_list::<StatKind>(&a.kinds)?, ctx.seed);
            cfg.psi = a.psi;
            cfg.ratio = a.ratio;
            cfg.level = a.level;
            cfg.steps = a.steps;
            cfg.reps = a.reps;
            ctx.emit_results(&run_asymp_power(&cfg)?)?;
        }
        Cmd::Cvtable(a) => {
            let a_grid = a.a.unwrap_or_else(default_a_grid);
            let levels = a.levels.unwrap_or_else(default_levels);
            let table = build_cv_table(&a_grid, &levels, &PathConfig::new(a.steps, a.reps, ctx.seed))?;
            let path = output_or_table_dir(&ctx, CV_FILE)?;
            table.save(&path)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Calibrate(a) => {
            let cv = ctx.cv_table(&a.cv_table)?;
            let mut cfg = CalibrationConfig::full_scale(ctx.seed);
            if let Some(p) = a.psi {
                cfg.psi_grid = p;
            }
            if let Some(g) = a.a {
                cfg.a_grid = g;
            }
            cfg.t = a.t;
            cfg.reps = a.reps;
            cfg.alpha2 = a.alpha2;
            cfg.target = a.target;
            cfg.grid = a.grid.grid()?;
            let report = calibrate_alpha1(&cfg, &cv)?;
            for (psi, (sel, rates)) in cfg.psi_grid.iter().zip(report.selected.iter().zip(&report.worst_rates)) {
                eprintln!("psi {psi:.3}: alpha1 {sel:?}, worst-case rate at smallest candidate {:.4}", rates[0]);
            }
            let table = report.table()?;
            let path = output_or_table_dir(&ctx, ALPHA1_FILE)?;
            table.save(&path)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Alpha1(a) => {
            let table = if a.published { Alpha1Table::published() } else { ctx.alpha1_table(&a.alpha1_table)? };
            match &ctx.out {
                Some(p) => table.save(p)?,
                None => table.write_csv(io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn output_or_table_dir(ctx: &Ctx, file: &str) -> Result<PathBuf> {
    if let Some(p) = &ctx.out {
        return Ok(p.clone());
    }
    match &ctx.table_dir {
        Some(d) => {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            Ok(d.join(file))
        }
        None => Ok(Path::new(file).to_path_buf()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
