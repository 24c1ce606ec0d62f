use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{Cli, Command};

/// Bad input or usage; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

const GLOBAL_KEYS: [&str; 3] = ["jobs", "out", "out_dir"];

fn arg_id(key: &str) -> &str {
    match key {
        "A" => "big_a",
        "C" => "c_const",
        k => k,
    }
}

fn from_command_line(m: &ArgMatches, id: &str) -> bool {
    matches!(m.try_get_raw(id), Ok(Some(_))) && m.value_source(id) == Some(ValueSource::CommandLine)
}

fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => usage(format!("config {} must hold a JSON object", path.display())),
        Err(e) => usage(format!("config {}: {e}", path.display())),
    }
}

/// Values from the file replace everything not given on the command line.
fn overlay<T: Serialize + DeserializeOwned>(
    args: &T,
    sub: &ArgMatches,
    file: &Map<String, Value>,
) -> Result<T> {
    let mut value = serde_json::to_value(args)?;
    let obj = value
        .as_object_mut()
        .expect("argument structs serialize to objects");
    for (k, v) in file {
        if !from_command_line(sub, arg_id(k)) {
            obj.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(value).map_err(|e| Usage(format!("config: {e}")).into())
}

/// Parses the command line and merges in the `--config` file.
pub fn resolve(matches: &ArgMatches) -> Result<Cli> {
    let mut cli = Cli::from_arg_matches(matches)?;
    let Some(path) = cli.config.clone() else {
        return Ok(cli);
    };
    let mut file = read_config(&path)?;
    let name = cli.command.name();
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    if let Some(cmd) = file.remove("command") {
        if cmd.as_str() != Some(name) {
            return usage(format!("config is for command {cmd}, not {name:?}"));
        }
    }
    let known: BTreeSet<String> = Cli::command()
        .find_subcommand(name)
        .expect("subcommand exists")
        .get_arguments()
        .map(|a| a.get_id().to_string())
        .collect();
    for key in file.keys() {
        if !known.contains(arg_id(key)) && !GLOBAL_KEYS.contains(&key.as_str()) {
            return usage(format!("unknown config key {key:?} for {name}"));
        }
    }
    let given = |id: &str| from_command_line(matches, id) || from_command_line(sub, id);
    let take = |key: &str| -> Result<Option<Value>> {
        Ok(match file.get(key) {
            Some(v) if !given(key) => Some(v.clone()),
            _ => None,
        })
    };
    if let Some(v) = take("jobs")? {
        cli.jobs = Some(serde_json::from_value(v).map_err(|e| Usage(format!("config jobs: {e}")))?);
    }
    if let Some(v) = take("out")? {
        cli.out = Some(serde_json::from_value(v).map_err(|e| Usage(format!("config out: {e}")))?);
    }
    if let Some(v) = take("out_dir")? {
        cli.out_dir =
            Some(serde_json::from_value(v).map_err(|e| Usage(format!("config out_dir: {e}")))?);
    }
    for key in GLOBAL_KEYS {
        file.remove(key);
    }
    cli.command = match &cli.command {
        Command::Evolve(a) => Command::Evolve(overlay(a, sub, &file)?),
        Command::Betas(a) => Command::Betas(overlay(a, sub, &file)?),
        Command::Limits(a) => Command::Limits(overlay(a, sub, &file)?),
        Command::Search(a) => Command::Search(overlay(a, sub, &file)?),
        Command::Mesh(a) => Command::Mesh(overlay(a, sub, &file)?),
        Command::Verify(a) => Command::Verify(overlay(a, sub, &file)?),
        Command::Crosssection(a) => Command::Crosssection(overlay(a, sub, &file)?),
        Command::Affine(a) => Command::Affine(overlay(a, sub, &file)?),
        Command::Report(a) => Command::Report(overlay(a, sub, &file)?),
    };
    Ok(cli)
}

/// Result document: configuration, library version and payload.
pub fn envelope(command: &str, config: &impl Serialize, result: &impl Serialize) -> Result<String> {
    let doc = json!({
        "program": "slevolve",
        "version": slevolve_core::VERSION,
        "command": command,
        "config": config,
        "result": result,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Where output goes: an explicit path (inside `out_dir` when relative),
/// `out_dir/<stem>.<ext>`, or standard output.
pub fn target(
    out: Option<&Path>,
    out_dir: Option<&Path>,
    stem: &str,
    ext: &str,
) -> Option<PathBuf> {
    match (out, out_dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => Some(d.join(format!("{stem}.{ext}"))),
        (None, None) => None,
    }
}

pub fn write_output(path: Option<&Path>, text: &str, quiet: bool) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            if !quiet {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

pub fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| anyhow!(Usage(format!("cannot read {what} {}: {e}", path.display()))))
}

pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    match v {
        Some(x) => Ok(x.clone()),
        None => bail!(Usage(format!("missing --{flag}"))),
    }
}
