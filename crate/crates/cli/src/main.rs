//! `oseenlab <experiment> [config] [flags]`: runs one acceptance experiment
//! and prints `PASS|FAIL <criterion> <measured> <threshold>` per assertion.
//!
//! Exit status: 0 all passed, 1 bad input or configuration, 2 numerical
//! failure (stability, margin and the like), 3 a criterion failed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::Parser;
use oseenlab::experiments::{Experiment, Settings};

#[derive(Parser, Debug)]
#[command(name = "oseenlab", about = "Runs the oseenlab acceptance experiments")]
struct Cli {
    /// Experiment name; see --list.
    experiment: Option<String>,
    /// Flat `key = value` config file. Flags override its entries.
    config: Option<PathBuf>,
    /// Print the experiment to criterion mapping and exit.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    box_l: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hermite functions per direction for `spectrum`.
    #[arg(long)]
    basis: Option<usize>,
    /// Output directory; defaults to `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

const KEYS: [&str; 11] = [
    "grid_n", "box_l", "t0", "t_end", "dt", "alpha", "epsilon", "m", "seed", "basis", "out",
];

/// Parses `key = value` lines; `#` starts a comment.
fn parse_config(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{line}`", k + 1))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key `{key}`", k + 1);
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn value<T: std::str::FromStr>(
    flag: Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
) -> anyhow::Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| anyhow!("cannot parse `{key} = {v}`")))
        .transpose()
}

fn resolve(cli: &Cli) -> anyhow::Result<(Settings, Option<PathBuf>)> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => BTreeMap::new(),
    };
    let d = Settings::default();
    let s = Settings {
        grid_n: value(cli.grid_n, &file, "grid_n")?,
        box_l: value(cli.box_l, &file, "box_l")?,
        t0: value(cli.t0, &file, "t0")?,
        t_end: value(cli.t_end, &file, "t_end")?,
        dt: value(cli.dt, &file, "dt")?,
        alpha: value(cli.alpha, &file, "alpha")?,
        epsilon: value(cli.epsilon, &file, "epsilon")?.unwrap_or(d.epsilon),
        m: value(cli.m, &file, "m")?.unwrap_or(d.m),
        seed: value(cli.seed, &file, "seed")?.unwrap_or(d.seed),
        basis: value(cli.basis, &file, "basis")?.unwrap_or(d.basis),
    };
    let out = value(cli.out.clone(), &file, "out")?;
    Ok((s, out))
}

fn list() -> String {
    let mut text = String::new();
    for e in Experiment::ALL {
        let _ = writeln!(text, "{:<20} {}", e.name(), e.criteria().join(" "));
    }
    text
}

fn write_manifest(
    dir: &Path,
    e: Experiment,
    s: &Settings,
    resolved: &[(String, String)],
) -> anyhow::Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "experiment = {}", e.name());
    let _ = writeln!(text, "criteria = {}", e.criteria().join(" "));
    let _ = writeln!(text, "seed = {}", s.seed);
    let _ = writeln!(text, "epsilon = {}", s.epsilon);
    let _ = writeln!(text, "m = {}", s.m);
    if e == Experiment::Spectrum {
        let _ = writeln!(text, "basis = {}", s.basis);
    }
    for (k, v) in resolved {
        if !matches!(k.as_str(), "seed" | "epsilon" | "m" | "basis") {
            let _ = writeln!(text, "{k} = {v}");
        }
    }
    fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, (u8, anyhow::Error)> {
    let config_err = |e: anyhow::Error| (1u8, e);
    let name = cli
        .experiment
        .as_deref()
        .ok_or_else(|| config_err(anyhow!("no experiment given; see --list")))?;
    let e = Experiment::from_name(name)
        .ok_or_else(|| config_err(anyhow!("unknown experiment `{name}`; see --list")))?;
    let (settings, out) = resolve(cli).map_err(config_err)?;
    let dir = out.unwrap_or_else(|| Path::new("out").join(e.name()));
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(config_err)?;
    log::info!("running {} into {}", e.name(), dir.display());
    let outcome = e.run(&settings, Some(&dir)).map_err(|err| {
        let code = if err.is_numerical() { 2 } else { 1 };
        (code, anyhow!(err).context(format!("{} failed", e.name())))
    })?;
    write_manifest(&dir, e, &settings, &outcome.resolved).map_err(config_err)?;
    let mut summary = String::new();
    for c in &outcome.checks {
        println!("{c}");
        let _ = writeln!(summary, "{c}  {}", c.what);
    }
    fs::write(dir.join("summary.txt"), summary)
        .context("cannot write summary")
        .map_err(config_err)?;
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.list {
        print!("{}", list());
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
