//! Run configuration: flags, an optional key=value defaults file, and built-in fallbacks.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use ultraharm::group::{GroupDescriptor, GroupKind};
use ultraharm::suites::Suite;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Dual,
    Apply,
    Verify,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Parser, Debug, Default)]
#[command(name = "ultraharm", version, about = "Harmonic analysis on truncated p-adic Lie groups")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// abelian, heisenberg, b4 (engel4) or g52.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub p: Option<u64>,
    /// Rank of the abelian or Heisenberg group; ignored by b4 and g52.
    #[arg(long)]
    pub d: Option<usize>,
    /// Truncation level N (the grid is G/G_N).
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Exponent t of the H(t) condition.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// vt, vt-raw, sub-laplacian, dir-x3, script-l, identity, radial:<file> or symbol:<file>.
    #[arg(long)]
    pub operator: Option<String>,
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (dual, apply) or directory (verify, report).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// GridFunction JSON for apply.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Plain-text key=value file supplying defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// A usage or configuration problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub group: GroupDescriptor,
    pub alpha: Option<f64>,
    pub t: Option<f64>,
    pub samples: Option<usize>,
    pub operator: Option<String>,
    pub suite: Option<Suite>,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
}

fn parse_defaults(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut m = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
        m.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(m)
}

const KEYS: [&str; 14] = [
    "command", "group", "p", "d", "level", "alpha", "t", "samples", "operator", "suite", "seed", "format", "out", "input",
];

fn take<T: std::str::FromStr>(flag: Option<T>, defaults: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, UsageError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match defaults.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("config: bad value {v:?} for {key}"))),
    }
}

fn value_enum<T: ValueEnum>(flag: Option<T>, defaults: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, UsageError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match defaults.get(key) {
        None => Ok(None),
        Some(v) => T::from_str(v, true).map(Some).map_err(|_| usage(format!("config: bad value {v:?} for {key}"))),
    }
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<RunConfig, UsageError> {
        let defaults = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                parse_defaults(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = defaults.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(usage(format!("config: unknown key {k:?}")));
        }
        let command = value_enum(cli.command, &defaults, "command")?.ok_or_else(|| usage("missing command (dual, apply, verify or report)"))?;
        let kind: GroupKind = take(cli.group, &defaults, "group")?
            .unwrap_or_else(|| "heisenberg".into())
            .parse()
            .map_err(|e: ultraharm::Error| usage(e.to_string()))?;
        let p = take(cli.p, &defaults, "p")?.unwrap_or(3);
        let d = take(cli.d, &defaults, "d")?.unwrap_or(1);
        let level = take(cli.level, &defaults, "level")?.unwrap_or(1);
        let group = GroupDescriptor::new(kind, p, d, level).map_err(|e| usage(e.to_string()))?;
        let suite = match take::<String>(cli.suite, &defaults, "suite")? {
            Some(s) => Some(s.parse::<Suite>().map_err(|e| usage(e.to_string()))?),
            None => None,
        };
        Ok(RunConfig {
            command,
            group,
            alpha: take(cli.alpha, &defaults, "alpha")?,
            t: take(cli.t, &defaults, "t")?,
            samples: take(cli.samples, &defaults, "samples")?,
            operator: take(cli.operator, &defaults, "operator")?,
            suite,
            seed: take(cli.seed, &defaults, "seed")?.unwrap_or(0),
            format: value_enum(cli.format, &defaults, "format")?.unwrap_or(Format::Json),
            out: take(cli.out, &defaults, "out")?,
            input: take(cli.input, &defaults, "input")?,
        })
    }
}
