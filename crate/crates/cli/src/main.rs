use std::process::ExitCode;

use clap::Parser;
use magspec::commands::{run, Cli};
use magspec::error::CliError;

/// Flags read from a JSON config file, inserted after the subcommand name.
fn config_flags(path: &std::path::Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let obj = value.as_object().ok_or_else(|| CliError::Config("config file must hold a JSON object".into()))?;
    let mut flags = Vec::new();
    for (k, v) in obj {
        match v {
            serde_json::Value::Bool(true) => flags.push(format!("--{k}")),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::String(s) => flags.extend([format!("--{k}"), s.clone()]),
            other => flags.extend([format!("--{k}"), other.to_string()]),
        }
    }
    Ok(flags)
}

fn threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MAGSPEC_THREADS") else { return Ok(()) };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("MAGSPEC_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    let result = (|| {
        threads()?;
        let mut args: Vec<String> = std::env::args().collect();
        let mut cli = Cli::try_parse_from(&args).map_err(|e| {
            let _ = e.print();
            CliError::Config("invalid arguments".into())
        })?;
        if let Some(path) = cli.config.clone() {
            let at = args.iter().position(|a| !a.starts_with('-') && a != &args[0]).unwrap_or(args.len());
            let extra = config_flags(&path)?;
            args.splice(at + 1..at + 1, extra);
            cli = Cli::try_parse_from(&args).map_err(|e| CliError::Config(e.to_string()))?;
        }
        run(&cli)
    })();
    match result {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
            ExitCode::SUCCESS
        }
        Err(err) => {
            if let CliError::VerifyFailed { report, .. } = &err {
                println!("{}", serde_json::to_string_pretty(report).expect("json"));
            }
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
