use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use sense_forge::harness::{self, Command, RunConfig};
use sense_forge::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Sensible adversarial training experiments.
///
/// Any further `--key value` pair overrides the configuration entry of the
/// same dotted name (`--train.c 0.5`) or one of the short aliases
/// (`--c 0.5`, `--method rat`, `--eps 0.1`).
#[derive(Debug, Parser)]
#[command(name = "sense-forge", version, about)]
struct Cli {
    /// train, attack, eval, analytic, synthetic or convcheck.
    command: String,

    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for CSVs, checkpoints and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    overrides: Vec<String>,
}

/// Splits `--key value` and `--key=value` tokens into pairs.
fn pairs(tokens: &[String]) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let key = tok
            .strip_prefix("--")
            .filter(|k| !k.is_empty())
            .ok_or_else(|| format!("expected `--key value`, found `{tok}`"))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let value = it.next().ok_or_else(|| format!("missing value for `--{key}`"))?;
                out.push((key.to_string(), value.clone()));
            }
        }
    }
    Ok(out)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SENSE_FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SENSE_FORGE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Manifest for runs that never got a valid configuration.
fn write_failure_manifest(out: &Path, command: &str, error: &str) {
    let manifest = serde_json::json!({
        "version": harness::VERSION,
        "command": command,
        "status": "config_error",
        "error": error,
        "partial": true,
        "artifacts": [],
    });
    if std::fs::create_dir_all(out).is_ok() {
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        if let Err(e) = std::fs::write(out.join("manifest.json"), text) {
            log::warn!("could not write manifest: {e}");
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, String> {
    let command: Command = cli.command.parse().map_err(|e: Error| e.to_string())?;
    let mut overrides = pairs(&cli.overrides)?;
    // Flags given after the first override land in the trailing list.
    let mut config_path = cli.config.clone();
    overrides.retain(|(k, v)| {
        if k == "config" {
            config_path = Some(PathBuf::from(v));
            false
        } else {
            true
        }
    });
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &cli.out {
        overrides.push(("out".into(), toml_escape(&out.to_string_lossy())));
    }
    RunConfig::from_file(command, config_path.as_deref(), &overrides).map_err(|e| e.to_string())
}

/// Quotes a path so the override parser keeps it a string.
fn toml_escape(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for ch in s.chars() {
        match ch {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(out) = &cli.out {
                write_failure_manifest(out, &cli.command, &e);
            }
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match harness::run(&config) {
        Ok(outcome) => {
            for path in &outcome.artifacts {
                println!("{}", path.display());
            }
            println!("{}", outcome.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
