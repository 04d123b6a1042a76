mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use serde_json::json;
use ultraharm::dual::{export_tree, Dual};
use ultraharm::fourier::{apply_multiplier, GridFunction, Symbol};
use ultraharm::operators::{
    dir_x3_symbol, radial_calculus, script_l_symbol, sub_laplacian_symbol, vt_raw_symbol, vt_symbol, RadialProfile,
};
use ultraharm::suites::{run_suite, to_json_sig17, Suite, SuiteConfig};
use ultraharm::Error;

use config::{Cli, Command, Format, RunConfig, UsageError};

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib(Error::Pole(_) | Error::Coverage(_) | Error::NonInteger(_)) => 3,
            Failure::Lib(_) => 2,
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_err(path, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(format!("stdout: {e}"))),
    }
}

fn cmd_dual(cfg: &RunConfig) -> Result<u8, Failure> {
    let tree = export_tree(&cfg.group, cfg.group.level)?;
    let text = match cfg.format {
        Format::Dot => tree.to_dot(),
        Format::Json => {
            let doc = json!({ "group": cfg.group, "level": cfg.group.level, "irreps": tree.nodes, "edges": tree.edges });
            to_json_sig17(&doc) + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut rows = vec![vec!["id".to_string(), "params".into(), "dim".into(), "norm".into()]];
            rows.extend(
                tree.nodes
                    .iter()
                    .map(|n| vec![n.id.clone(), n.params.join(" "), n.dim.to_string(), format!("{:.16e}", n.norm)]),
            );
            for r in rows {
                w.write_record(&r).map_err(|e| Failure::Usage(e.to_string()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?).expect("csv is utf8")
        }
    };
    emit(cfg.out.as_deref(), &text)?;
    Ok(0)
}

/// Builds the named operator symbol on the dual ball of the configured level.
fn operator_symbol(cfg: &RunConfig, name: &str) -> Result<Symbol, Failure> {
    let dual = Arc::new(Dual::new(&cfg.group, cfg.group.level)?);
    let alpha = cfg.alpha.unwrap_or(1.0);
    if let Some(path) = name.strip_prefix("radial:") {
        let profile = RadialProfile::from_json(cfg.group.p, &read(Path::new(path))?)?;
        return Ok(radial_calculus(&profile, &dual)?);
    }
    if let Some(path) = name.strip_prefix("symbol:") {
        let s = Symbol::from_json(&read(Path::new(path))?)?;
        if s.group() != cfg.group || s.level() != cfg.group.level {
            return Err(Error::Mismatch(format!("symbol file is for {:?} at level {}", s.group(), s.level())).into());
        }
        return Ok(s);
    }
    Ok(match name {
        "vt" => vt_symbol(&dual, alpha)?,
        "vt-raw" => vt_raw_symbol(&dual, alpha)?,
        "sub-laplacian" => sub_laplacian_symbol(&dual, alpha)?,
        "dir-x3" => dir_x3_symbol(&dual, alpha)?,
        "script-l" => script_l_symbol(&dual, alpha)?,
        "identity" => Symbol::identity(dual),
        other => return Err(Failure::Usage(format!("unknown operator {other:?}"))),
    })
}

fn cmd_apply(cfg: &RunConfig) -> Result<u8, Failure> {
    let input = cfg.input.as_deref().ok_or_else(|| Failure::Usage("apply needs --input".into()))?;
    let f = GridFunction::from_json(&read(input)?)?;
    if f.group != cfg.group {
        return Err(Error::Mismatch(format!(
            "input is on {} p={} d={} level {}, config says {} p={} d={} level {}",
            f.group.kind, f.group.p, f.group.d, f.group.level, cfg.group.kind, cfg.group.p, cfg.group.d, cfg.group.level
        ))
        .into());
    }
    let name = cfg.operator.as_deref().ok_or_else(|| Failure::Usage("apply needs --operator".into()))?;
    let sigma = operator_symbol(cfg, name)?;
    let out = apply_multiplier(&sigma, &f)?;
    let text = match cfg.format {
        Format::Json => to_json_sig17(&out) + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let _ = w.write_record(["rank", "x", "re", "im"]);
            for (r, v) in out.values.iter().enumerate() {
                let x = out.group.unrank(r).0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
                let _ = w.write_record([r.to_string(), x, format!("{:.16e}", v.re), format!("{:.16e}", v.im)]);
            }
            String::from_utf8(w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?).expect("csv is utf8")
        }
        Format::Dot => return Err(Failure::Usage("apply writes json or csv".into())),
    };
    emit(cfg.out.as_deref(), &text)?;
    Ok(0)
}

fn suite_config(cfg: &RunConfig) -> Result<SuiteConfig, Failure> {
    let mut sc = SuiteConfig::new(cfg.group, cfg.seed);
    sc.alpha = cfg.alpha;
    sc.t = cfg.t;
    sc.samples = cfg.samples;
    if let Some(name) = &cfg.operator {
        sc.symbol = Some((name.clone(), operator_symbol(cfg, name)?));
    }
    Ok(sc)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

/// Runs one suite and writes <suite>.json and <suite>.csv into `dir`.
fn run_and_write(suite: Suite, sc: &SuiteConfig, dir: &Path) -> Result<bool, Failure> {
    let rep = run_suite(suite, sc)?;
    let json_path = dir.join(format!("{suite}.json"));
    fs::write(&json_path, rep.to_json() + "\n").map_err(|e| io_err(&json_path, e))?;
    let csv_path = dir.join(format!("{suite}.csv"));
    fs::write(&csv_path, rep.to_csv()).map_err(|e| io_err(&csv_path, e))?;
    println!("{suite}: {}", if rep.pass { "PASS" } else { "FAIL" });
    Ok(rep.pass)
}

fn cmd_verify(cfg: &RunConfig) -> Result<u8, Failure> {
    let suite = cfg.suite.ok_or_else(|| Failure::Usage("verify needs --suite".into()))?;
    let sc = suite_config(cfg)?;
    let dir = out_dir(cfg)?;
    Ok(if run_and_write(suite, &sc, &dir)? { 0 } else { 1 })
}

/// Like verify but never fails on assertions; suites that error are recorded in index.json.
fn cmd_report(cfg: &RunConfig) -> Result<u8, Failure> {
    let sc = suite_config(cfg)?;
    let dir = out_dir(cfg)?;
    let suites: Vec<Suite> = match cfg.suite {
        Some(s) => vec![s],
        None => Suite::ALL.to_vec(),
    };
    let mut index = serde_json::Map::new();
    for s in suites {
        let v = match run_and_write(s, &sc, &dir) {
            Ok(pass) => json!({ "pass": pass }),
            Err(Failure::Lib(e)) => {
                println!("{s}: ERROR {e}");
                json!({ "error": e.to_string() })
            }
            Err(other) => return Err(other),
        };
        index.insert(s.to_string(), v);
    }
    let doc = json!({ "group": cfg.group, "seed": cfg.seed, "suites": index });
    let path = dir.join("index.json");
    fs::write(&path, to_json_sig17(&doc) + "\n").map_err(|e| io_err(&path, e))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = RunConfig::resolve(cli)?;
    match cfg.command {
        Command::Dual => cmd_dual(&cfg),
        Command::Apply => cmd_apply(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::Report => cmd_report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}

