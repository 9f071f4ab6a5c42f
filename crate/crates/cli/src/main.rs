use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qksd::bases::Family;
use qksd::bench::*;
use qksd::bench_config::{BenchConfig, ScalingSource};
use qksd::noise::ScanConfig;

#[derive(Parser)]
#[command(name = "qksd", version, about = "Measurement-cost benchmarks for Krylov subspace diagonalisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Overhead factor against target error for every basis family.
    Curve(RunArgs),
    /// Overhead factors over the instance set at twice the power-basis subspace error.
    Distribution(RunArgs),
    /// Cost reports of the bound equation.
    Cost(RunArgs),
    /// Necessary measurement numbers from simulated noise.
    Noise(RunArgs),
    /// Monte Carlo estimates of Gaussian-power matrix entries.
    Mc(RunArgs),
    /// Chebyshev projector composed from the Gaussian-power basis.
    Projector(RunArgs),
    /// Measurement number against target error.
    Scaling(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Curve(_) => "curve",
            Command::Distribution(_) => "distribution",
            Command::Cost(_) => "cost",
            Command::Noise(_) => "noise",
            Command::Mc(_) => "mc",
            Command::Projector(_) => "projector",
            Command::Scaling(_) => "scaling",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Curve(a)
            | Command::Distribution(a)
            | Command::Cost(a)
            | Command::Noise(a)
            | Command::Mc(a)
            | Command::Projector(a)
            | Command::Scaling(a) => a,
        }
    }
}

/// Files and diagnostics produced by one command.
#[derive(Default)]
struct Output {
    tables: Vec<(String, Vec<u8>, usize)>,
    identity_failures: usize,
    notes: Vec<String>,
    summary: Value,
}

impl Output {
    fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv flush: {e}"))?;
        self.tables.push((format!("{name}.csv"), bytes, rows.len()));
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Default target error `2ε_K(P)`; `None` with a note if the instance is not admitted.
fn target_error(pm: &PreparedModel, d: usize, out: &mut Output) -> Result<Option<f64>> {
    let adm = admit(pm, d)?;
    if !adm.admitted {
        out.notes.push(format!("skipped {}-d{d}: {}", pm.label(), adm.reason.unwrap_or_default()));
        return Ok(None);
    }
    Ok(Some(2.0 * adm.epsilon_k_p))
}

fn run_curve(cfg: &BenchConfig, pm: &PreparedModel, out: &mut Output) -> Result<()> {
    let adm = admit(pm, cfg.d)?;
    out.summary = json!({ "epsilon_k_p": adm.epsilon_k_p, "p_g": adm.p_g, "e_g": pm.e_g() });
    if !adm.admitted {
        out.notes.push(format!("skipped {}-d{}: {}", pm.label(), cfg.d, adm.reason.unwrap_or_default()));
        return out.table::<CurvePoint>("curve", &[]);
    }
    let eps = log_grid(cfg.curve.eps_min, cfg.curve.eps_max, cfg.curve.points);
    let rows = curve(pm, cfg.d, &cfg.families, &eps)?;
    out.table("curve", &rows)
}

#[derive(Serialize)]
struct AdmissionRow {
    instance: String,
    d: usize,
    epsilon_k_p: f64,
    p_g: f64,
    admitted: bool,
    reason: String,
}

fn run_distribution(cfg: &BenchConfig, out: &mut Output) -> Result<()> {
    let cache = cfg.cache_dir.as_deref().map(Path::new);
    let (records, admissions) = distribution(&cfg.distribution.sets, &cfg.families, cfg.kappa, cfg.seed, cache)?;
    out.identity_failures = records.iter().filter(|r| !r.identities_ok).count();
    let adm: Vec<AdmissionRow> = admissions
        .into_iter()
        .map(|(instance, a)| AdmissionRow {
            instance,
            d: a.d,
            epsilon_k_p: a.epsilon_k_p,
            p_g: a.p_g,
            admitted: a.admitted,
            reason: a.reason.unwrap_or_default(),
        })
        .collect();
    let summary = summarise(&records, &cfg.families);
    out.summary = json!({ "admitted": adm.iter().filter(|a| a.admitted).count(), "families": summary });
    out.table("distribution", &records)?;
    out.table("distribution_admission", &adm)?;
    out.table("distribution_summary", &summary)
}

fn run_cost(cfg: &BenchConfig, pm: &PreparedModel, out: &mut Output) -> Result<()> {
    let epsilons = if cfg.cost.epsilons.is_empty() {
        match target_error(pm, cfg.d, out)? {
            Some(e) => vec![e],
            None => return out.table::<CostRow>("cost", &[]),
        }
    } else {
        cfg.cost.epsilons.clone()
    };
    let mut rows = Vec::new();
    for &family in &cfg.families {
        match cost_rows(pm, cfg.d, &[family], &epsilons, cfg.kappa, cfg.cost.all_protocols) {
            Ok(r) => rows.extend(r),
            Err(e) => out.notes.push(format!("{family}: {e}")),
        }
    }
    out.identity_failures = rows.iter().filter(|r| !r.identities_ok).count();
    out.table("cost", &rows)
}

#[derive(Serialize)]
struct GridRow {
    family: Family,
    rule: &'static str,
    m: f64,
    successes: usize,
    trials: usize,
}

fn run_noise(cfg: &BenchConfig, pm: &PreparedModel, out: &mut Output) -> Result<()> {
    let epsilon = match cfg.noise.epsilon {
        Some(e) => e,
        None => match target_error(pm, cfg.d, out)? {
            Some(e) => e,
            None => {
                out.table::<NecessaryRecord>("noise", &[])?;
                return out.table::<GridRow>("noise_grid", &[]);
            }
        },
    };
    let n = &cfg.noise;
    let scan = ScanConfig { m_min: n.m_min, m_max: n.m_max, ratio: n.ratio, seed: cfg.seed };
    let mut rows = Vec::new();
    let mut grid = Vec::new();
    for &family in &cfg.families {
        match necessary_sweep(pm, cfg.d, &[family], epsilon, cfg.kappa, n.trials, &n.rules, scan) {
            Ok((r, details)) => {
                rows.extend(r);
                for (family, nm) in details {
                    grid.extend(nm.grid.iter().map(|g| GridRow {
                        family,
                        rule: nm.rule.name(),
                        m: g.m,
                        successes: g.successes,
                        trials: g.trials,
                    }));
                }
            }
            Err(e) => out.notes.push(format!("{family}: {e}")),
        }
    }
    out.summary = json!({ "epsilon": epsilon });
    out.table("noise", &rows)?;
    out.table("noise_grid", &grid)
}

fn run_mc(cfg: &BenchConfig, pm: &PreparedModel, out: &mut Output) -> Result<()> {
    let rows = mc_rows(pm, cfg.mc.tau, cfg.mc.shots, cfg.mc.k_max, cfg.seed)?;
    let max_dev = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let max_var = rows.iter().map(|r| r.variance_ratio).fold(0.0, f64::max);
    out.summary = json!({ "max_deviation": max_dev, "max_variance_ratio": max_var });
    out.table("mc", &rows)
}

fn run_projector(cfg: &BenchConfig, pm: &PreparedModel, out: &mut Output) -> Result<()> {
    let mut rows = Vec::new();
    for &n in &cfg.projector.degrees {
        for &ratio in &cfg.projector.ratios {
            match projector_record(pm, n, projector_tau(n, ratio)) {
                Ok(r) => rows.push(r),
                Err(e) => out.notes.push(format!("n = {n}, ratio = {ratio}: {e}")),
            }
        }
    }
    out.table("projector", &rows)
}

fn run_scaling(cfg: &BenchConfig, pm: &PreparedModel, out: &mut Output) -> Result<()> {
    let s = &cfg.scaling;
    let mut setups = Vec::new();
    for &family in &cfg.families {
        if s.dims.is_empty() {
            match largest_converged_d(pm, family, 2..=30)? {
                Some(setup) => setups.push(setup),
                None => out.notes.push(format!("{family}: no admitted d with a converged range")),
            }
        } else {
            for &d in &s.dims {
                match configure_family(family, pm, d, None) {
                    Ok(setup) => setups.push(setup),
                    Err(e) => out.notes.push(format!("{family} d = {d}: {e}")),
                }
            }
        }
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for setup in &setups {
        let result = match s.source {
            ScalingSource::Bound => scaling(setup, pm, cfg.kappa, s.points),
            ScalingSource::Simulated => {
                let scan = EmpiricalScan { kappa: cfg.kappa, trials: s.trials, points: s.points, rule: qksd::noise::EtaRule::Tabulated, ratio: s.ratio, seed: cfg.seed };
                empirical_scaling(setup, pm, scan)
            }
        };
        match result {
            Ok((r, fit)) => {
                rows.extend(r);
                fits.push(fit);
            }
            Err(e) => out.notes.push(format!("{} d = {}: {e}", setup.family, setup.spec.d)),
        }
    }
    out.table("scaling", &rows)?;
    out.table("scaling_fit", &fits)
}

fn run(command: &Command) -> Result<bool> {
    let args = command.args();
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = BenchConfig::from_json(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("thread pool")?;
    }
    let mut out = Output::default();
    let cache = cfg.cache_dir.as_deref().map(Path::new);
    let single = || prepare_model(&cfg.model, cache);
    match command {
        Command::Distribution(_) => run_distribution(&cfg, &mut out)?,
        Command::Curve(_) => run_curve(&cfg, &single()?, &mut out)?,
        Command::Cost(_) => run_cost(&cfg, &single()?, &mut out)?,
        Command::Noise(_) => run_noise(&cfg, &single()?, &mut out)?,
        Command::Mc(_) => run_mc(&cfg, &single()?, &mut out)?,
        Command::Projector(_) => run_projector(&cfg, &single()?, &mut out)?,
        Command::Scaling(_) => run_scaling(&cfg, &single()?, &mut out)?,
    }
    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    for (name, bytes, rows) in &out.tables {
        fs::write(dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        files.push(json!({ "file": name, "rows": rows, "sha256": sha256_hex(bytes) }));
    }
    let sidecar = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "config_sha256": sha256_hex(serde_json::to_string(&cfg)?.as_bytes()),
        "outputs": files,
        "identity_failures": out.identity_failures,
        "notes": out.notes,
        "summary": out.summary,
    });
    let name = format!("{}.json", command.name());
    fs::write(dir.join(&name), serde_json::to_string_pretty(&sidecar)? + "\n").with_context(|| format!("writing {name}"))?;
    for note in &out.notes {
        eprintln!("note: {note}");
    }
    if out.identity_failures > 0 {
        eprintln!("{} record(s) failed the cost identity checks", out.identity_failures);
    }
    Ok(out.identity_failures == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
