//! Command-line front end: `test`, `simulate`, `mc` and `tune`.
//!
//! Rejection is reported in the JSON payload only, never via the exit
//! code; exit 1 means the tool itself failed. A JSON config file may
//! supply any flag, with the command line taking precedence. Each file
//! output gets a sibling `<path>.manifest.json` recording how it was
//! produced; the primary payloads themselves are byte-reproducible.

use clap::{Args, Parser, Subcommand};
use lswn::bootstrap::{bootstrap_draws, bootstrap_quantile, moving_sums, resolve_pipeline};
use lswn::covstat::{gamma_hat, q_statistic};
use lswn::sim::monte_carlo_counts;
use lswn::{
    generate, run_test, Error, FunctionalPanel, Hypothesis, McReport, McRow, PanelFormat,
    Result, Setting, SimSpec, TestSettings,
};
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "lswn", version, about = "White-noise tests for locally stationary functional time series")]
struct Cli {
    /// Worker threads for parallel sections (0 = all cores). Output is
    /// identical for every value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// JSON file supplying flag defaults; command line overrides it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the white-noise test on a stored panel.
    Test(TestArgs),
    /// Draw one panel from a benchmark model.
    Simulate(SimArgs),
    /// Monte Carlo rejection rates over many replicated panels.
    Mc(McArgs),
    /// Resolve tuning parameters and emit the diagnostic curves.
    Tune(TuneArgs),
}

#[derive(Args, Clone)]
struct TuningFlags {
    /// Mean smoothing bandwidth: `auto` or a value in (0, 1/2).
    #[arg(long, default_value = "auto")]
    b: String,
    /// Local window bandwidth: `auto` or a value in (0, 1/2).
    #[arg(long, default_value = "auto")]
    tau: String,
    /// Bootstrap block length: `auto` or an integer >= 2.
    #[arg(long = "L", default_value = "auto")]
    window_l: String,
    /// Number of aggregated lags: `auto` or an integer >= 2.
    #[arg(long = "sn", default_value = "auto")]
    s_n: String,
    /// Small-lag exclusion gap: `auto` or an integer >= 1.
    #[arg(long = "Mn", default_value = "auto")]
    m_n: String,
    #[arg(long, default_value = "triangular")]
    kernel: String,
}

#[derive(Args)]
struct TestArgs {
    /// Panel file (long CSV or NDJSON, by extension).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// Bootstrap replicates B.
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    tuning: TuningFlags,
    /// Result JSON path; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for Gamma_k and trace-surface CSV dumps.
    #[arg(long)]
    dump_surfaces: Option<PathBuf>,
    /// Include the B bootstrap values in the JSON.
    #[arg(long)]
    retain_draws: bool,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    model: u8,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Grid points per curve.
    #[arg(long = "N")]
    num_grid: usize,
    /// `null` or `alt`.
    #[arg(long, default_value = "null")]
    hypothesis: String,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    /// Panel path; stdout if omitted. `.ndjson`/`.jsonl` selects NDJSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    model: u8,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long = "N", default_value_t = 50)]
    num_grid: usize,
    /// delta > 0 selects the alternative.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long)]
    reps: usize,
    /// Comma-separated nominal levels.
    #[arg(long, default_value = "0.05")]
    alpha: String,
    #[arg(long, default_value_t = 500)]
    boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    #[command(flatten)]
    tuning: TuningFlags,
    /// Report CSV path; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Flush a partial report every this many replicates.
    #[arg(long, default_value_t = 50)]
    checkpoint_every: usize,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    tuning: TuningFlags,
    /// TuningReport JSON path; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Prefix for `<prefix>_gcv_b.csv`, `<prefix>_gcv_tau.csv`,
    /// `<prefix>_mv.csv`.
    #[arg(long)]
    curves: Option<PathBuf>,
}

/// Flag defaults loadable from `--config`.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    boot: Option<usize>,
    seed: Option<u64>,
    b: Option<serde_json::Value>,
    tau: Option<serde_json::Value>,
    #[serde(rename = "L")]
    window_l: Option<serde_json::Value>,
    #[serde(rename = "sn")]
    s_n: Option<serde_json::Value>,
    #[serde(rename = "Mn")]
    m_n: Option<serde_json::Value>,
    kernel: Option<String>,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    args: Vec<String>,
    config_digest: Option<String>,
    seed: u64,
    artifacts: Vec<String>,
    wall_clock_ms: u128,
}

fn parse_setting_f64(s: &str, name: &str) -> Result<Setting<f64>> {
    if s == "auto" {
        return Ok(Setting::Auto);
    }
    s.parse::<f64>()
        .map(Setting::Fixed)
        .map_err(|_| Error::ConfigInfeasible(format!("{name} = {s:?} is neither `auto` nor a number")))
}

fn parse_setting_usize(s: &str, name: &str) -> Result<Setting<usize>> {
    if s == "auto" {
        return Ok(Setting::Auto);
    }
    s.parse::<usize>()
        .map(Setting::Fixed)
        .map_err(|_| Error::ConfigInfeasible(format!("{name} = {s:?} is neither `auto` nor an integer")))
}

/// `auto`-capable flags arrive from the config file as either a number or
/// the string "auto"; normalize to the flag syntax.
fn json_setting(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn merge_flags(flags: &mut TuningFlags, cli: &clap::parser::ArgMatches, file: &FileConfig) {
    let from_file = |cur: &mut String, id: &str, val: &Option<serde_json::Value>| {
        if let Some(v) = val {
            if cli.value_source(id) != Some(clap::parser::ValueSource::CommandLine) {
                *cur = json_setting(v);
            }
        }
    };
    from_file(&mut flags.b, "b", &file.b);
    from_file(&mut flags.tau, "tau", &file.tau);
    from_file(&mut flags.window_l, "window_l", &file.window_l);
    from_file(&mut flags.s_n, "s_n", &file.s_n);
    from_file(&mut flags.m_n, "m_n", &file.m_n);
    if let Some(k) = &file.kernel {
        if cli.value_source("kernel") != Some(clap::parser::ValueSource::CommandLine) {
            flags.kernel = k.clone();
        }
    }
}

fn settings_from(
    flags: &TuningFlags,
    alpha: Option<f64>,
    boot: Option<usize>,
    seed: Option<u64>,
    file: &FileConfig,
) -> Result<TestSettings> {
    let mut s = TestSettings {
        b: parse_setting_f64(&flags.b, "b")?,
        tau: parse_setting_f64(&flags.tau, "tau")?,
        s_n: parse_setting_usize(&flags.s_n, "sn")?,
        m_n: parse_setting_usize(&flags.m_n, "Mn")?,
        window_l: parse_setting_usize(&flags.window_l, "L")?,
        kernel: flags
            .kernel
            .parse()
            .map_err(Error::ConfigInfeasible)?,
        ..Default::default()
    };
    if let Some(a) = alpha.or(file.alpha) {
        s.alpha = a;
    }
    if let Some(b) = boot.or(file.boot) {
        s.boot_reps = b;
    }
    if let Some(sd) = seed.or(file.seed) {
        s.seed = sd;
    }
    Ok(s)
}

fn panel_format(path: &Path) -> PanelFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ndjson") | Some("jsonl") | Some("json") => PanelFormat::Ndjson,
        _ => PanelFormat::LongCsv,
    }
}

fn load_panel(path: &Path) -> Result<FunctionalPanel> {
    let f = File::open(path)?;
    FunctionalPanel::load(BufReader::new(f), panel_format(path))
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn fnv_digest(bytes: &[u8]) -> String {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{h:016x}")
}

fn write_manifest(
    output: Option<&Path>,
    subcommand: &str,
    config_digest: Option<String>,
    seed: u64,
    artifacts: &[&Path],
    started: Instant,
) -> Result<()> {
    let Some(out) = output else { return Ok(()) };
    let manifest = RunManifest {
        subcommand: subcommand.into(),
        args: std::env::args().skip(1).collect(),
        config_digest,
        seed,
        artifacts: artifacts
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        wall_clock_ms: started.elapsed().as_millis(),
    };
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest.json");
    let mut payload = serde_json::to_vec_pretty(&manifest)?;
    payload.push(b'\n');
    write_bytes(Some(Path::new(&path)), &payload)
}

fn dump_surfaces(dir: &Path, rp: &lswn::ResolvedPipeline) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let n = rp.tensor.n;
    let num_grid = rp.tensor.num_grid;
    let cfg = &rp.cfg;

    // Gamma_k(t, u) entries, long format, t at the window centers
    let mut g = BufWriter::new(File::create(dir.join("gamma_hat.csv"))?);
    writeln!(g, "t,u,k,entry,value")?;
    for w in 0..rp.tensor.n_offsets {
        let t = (rp.tensor.half + w) as f64 / n as f64;
        for j in 0..num_grid {
            let u = (j + 1) as f64 / num_grid as f64;
            for k in 1..=cfg.s_n {
                let m = gamma_hat(&rp.resid, k, t, j, cfg.tau, cfg.kernel)?;
                for (e, &v) in m.iter().enumerate() {
                    writeln!(g, "{t},{u},{k},{e},{v:.16e}")?;
                }
            }
        }
    }
    g.flush()?;

    // aggregated trace surface sum_k tr G_k(t, u)
    let mut s = BufWriter::new(File::create(dir.join("g_trace.csv"))?);
    writeln!(s, "t,u,value")?;
    let scale = n as f64 * cfg.tau * cfg.s_n as f64;
    let mut acc = vec![0.0f64; num_grid];
    for w in 0..rp.tensor.n_offsets {
        let t = (rp.tensor.half + w) as f64 / n as f64;
        rp.tensor.column_sum(w, &mut acc);
        for (j, &v) in acc.iter().enumerate() {
            let u = (j + 1) as f64 / num_grid as f64;
            writeln!(s, "{t},{u},{:.16e}", v / scale)?;
        }
    }
    s.flush()?;
    Ok(())
}

fn curve_csv<X: std::fmt::Display, Y: std::fmt::Display>(
    path: &Path,
    header: &str,
    rows: &[(X, Y)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for (x, y) in rows {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_test(args: &TestArgs, file: &FileConfig, digest: Option<String>) -> Result<()> {
    let started = Instant::now();
    let mut settings = settings_from(&args.tuning, args.alpha, args.boot, args.seed, file)?;
    settings.retain_draws = args.retain_draws;
    let panel = load_panel(&args.input)?;
    let result = run_test(&panel, &settings)?;
    let mut payload = serde_json::to_vec_pretty(&result)?;
    payload.push(b'\n');
    write_bytes(args.output.as_deref(), &payload)?;
    let mut artifacts: Vec<&Path> = args.output.iter().map(|p| p.as_path()).collect();
    if let Some(dir) = &args.dump_surfaces {
        let rp = resolve_pipeline(&panel, &settings)?;
        dump_surfaces(dir, &rp)?;
        artifacts.push(dir.as_path());
    }
    write_manifest(
        args.output.as_deref(),
        "test",
        digest,
        settings.seed,
        &artifacts,
        started,
    )
}

fn parse_hypothesis(s: &str) -> Result<Hypothesis> {
    match s {
        "null" => Ok(Hypothesis::Null),
        "alt" => Ok(Hypothesis::Alt),
        other => Err(Error::ConfigInfeasible(format!(
            "hypothesis must be `null` or `alt`, got {other:?}"
        ))),
    }
}

fn cmd_simulate(args: &SimArgs, digest: Option<String>) -> Result<()> {
    let started = Instant::now();
    let spec = SimSpec {
        model: args.model,
        hypothesis: parse_hypothesis(&args.hypothesis)?,
        n: args.n,
        p: args.p,
        num_grid: args.num_grid,
        delta: args.delta,
        seed: args.seed,
        burn_in: args.burn_in,
    };
    let panel = generate(&spec)?;
    let format = args
        .output
        .as_deref()
        .map(panel_format)
        .unwrap_or(PanelFormat::LongCsv);
    match &args.output {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            panel.save(&mut w, format)?;
            w.flush()?;
        }
        None => panel.save(io::stdout().lock(), format)?,
    }
    let artifacts: Vec<&Path> = args.output.iter().map(|p| p.as_path()).collect();
    write_manifest(
        args.output.as_deref(),
        "simulate",
        digest,
        args.seed,
        &artifacts,
        started,
    )
}

fn parse_alphas(s: &str) -> Result<Vec<f64>> {
    let alphas: std::result::Result<Vec<f64>, _> =
        s.split(',').map(|a| a.trim().parse::<f64>()).collect();
    let alphas =
        alphas.map_err(|_| Error::ConfigInfeasible(format!("bad alpha list {s:?}")))?;
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::ConfigInfeasible(format!("bad alpha list {s:?}")));
    }
    Ok(alphas)
}

fn cmd_mc(args: &McArgs, file: &FileConfig, digest: Option<String>) -> Result<()> {
    let started = Instant::now();
    let alphas = parse_alphas(&args.alpha)?;
    let mut settings = settings_from(&args.tuning, None, None, Some(args.seed), file)?;
    settings.boot_reps = args.boot;
    let hypothesis = if args.delta > 0.0 {
        Hypothesis::Alt
    } else {
        Hypothesis::Null
    };
    let spec = SimSpec {
        model: args.model,
        hypothesis,
        n: args.n,
        p: args.p,
        num_grid: args.num_grid,
        delta: args.delta,
        seed: args.seed,
        burn_in: args.burn_in,
    };
    spec.validate()?;
    if args.reps == 0 {
        return Err(Error::ConfigInfeasible("reps must be >= 1".into()));
    }

    let chunk = args.checkpoint_every.max(1);
    let mut counts = vec![0usize; alphas.len()];
    let mut done = 0usize;
    while done < args.reps {
        let end = (done + chunk).min(args.reps);
        let part = monte_carlo_counts(&spec, &settings, done, end, &alphas)?;
        for (c, d) in counts.iter_mut().zip(part) {
            *c += d;
        }
        done = end;
        // checkpoint: rewrite the report with the replicates so far
        let report = report_from(&spec, &alphas, &counts, done);
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        if args.output.is_some() || done == args.reps {
            write_bytes(args.output.as_deref(), &buf)?;
        }
    }
    let artifacts: Vec<&Path> = args.output.iter().map(|p| p.as_path()).collect();
    write_manifest(
        args.output.as_deref(),
        "mc",
        digest,
        args.seed,
        &artifacts,
        started,
    )
}

fn report_from(spec: &SimSpec, alphas: &[f64], counts: &[usize], reps: usize) -> McReport {
    let rows = alphas
        .iter()
        .zip(counts)
        .map(|(&alpha, &c)| {
            let f = c as f64 / reps as f64;
            McRow {
                model: spec.model,
                n: spec.n,
                p: spec.p,
                delta: if spec.hypothesis == Hypothesis::Null {
                    0.0
                } else {
                    spec.delta
                },
                alpha,
                reps,
                reject_rate: f,
                se: (f * (1.0 - f) / reps as f64).sqrt(),
            }
        })
        .collect();
    McReport { rows }
}

fn cmd_tune(args: &TuneArgs, file: &FileConfig, digest: Option<String>) -> Result<()> {
    let started = Instant::now();
    let settings = settings_from(&args.tuning, None, args.boot, args.seed, file)?;
    let panel = load_panel(&args.input)?;
    let rp = resolve_pipeline(&panel, &settings)?;
    let mut payload = serde_json::to_vec_pretty(&rp.report)?;
    payload.push(b'\n');
    write_bytes(args.output.as_deref(), &payload)?;
    let mut artifacts: Vec<PathBuf> = args.output.iter().cloned().collect();
    if let Some(prefix) = &args.curves {
        let with = |suffix: &str| -> PathBuf {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        let (pb, pt, pm) = (with("_gcv_b.csv"), with("_gcv_tau.csv"), with("_mv.csv"));
        curve_csv(&pb, "b,gcv", &rp.report.gcv_b_curve)?;
        curve_csv(&pt, "tau,gcv", &rp.report.gcv_tau_curve)?;
        curve_csv(&pm, "L,mv", &rp.report.mv_curve)?;
        artifacts.extend([pb, pt, pm]);
    }
    // verify the resolved configuration reproduces under the bootstrap;
    // cheap sanity pass so `tune` fails loudly on degenerate panels
    let s = moving_sums(&rp.tensor, rp.cfg.window_l)?;
    let draws = bootstrap_draws(&s, 100.max(rp.cfg.boot_reps.min(100)), rp.cfg.seed);
    let _ = bootstrap_quantile(&draws, rp.cfg.alpha);
    let _ = q_statistic(&rp.tensor);
    let artifact_refs: Vec<&Path> = artifacts.iter().map(|p| p.as_path()).collect();
    write_manifest(
        args.output.as_deref(),
        "tune",
        digest,
        settings.seed,
        &artifact_refs,
        started,
    )
}

fn run() -> Result<()> {
    let matches = <Cli as clap::CommandFactory>::command().get_matches();
    let cli = <Cli as clap::FromArgMatches>::from_arg_matches(&matches)
        .map_err(|e| Error::ConfigInfeasible(e.to_string()))?;

    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| Error::ConfigInfeasible(format!("thread pool: {e}")))?;
    }

    let (file_cfg, digest) = match &cli.config {
        Some(path) => {
            let bytes = std::fs::read(path)?;
            let cfg: FileConfig = serde_json::from_slice(&bytes)?;
            (cfg, Some(fnv_digest(&bytes)))
        }
        None => (FileConfig::default(), None),
    };

    match cli.cmd {
        Cmd::Test(mut args) => {
            let sub = matches.subcommand_matches("test").unwrap();
            merge_flags(&mut args.tuning, sub, &file_cfg);
            cmd_test(&args, &file_cfg, digest)
        }
        Cmd::Simulate(args) => cmd_simulate(&args, digest),
        Cmd::Mc(mut args) => {
            let sub = matches.subcommand_matches("mc").unwrap();
            merge_flags(&mut args.tuning, sub, &file_cfg);
            cmd_mc(&args, &file_cfg, digest)
        }
        Cmd::Tune(mut args) => {
            let sub = matches.subcommand_matches("tune").unwrap();
            merge_flags(&mut args.tuning, sub, &file_cfg);
            cmd_tune(&args, &file_cfg, digest)
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
