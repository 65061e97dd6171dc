use std::path::PathBuf;
use std::process::ExitCode;

use rfim_cli::config::Config;
use rfim_cli::experiments::{run_experiment, CliError, RunOptions, EXPERIMENTS};
use rfim_cli::selftest;

const USAGE: &str = "\
usage:
  rfim <experiment> --config <path> [--seed S] [--workers W] [--out DIR]
  rfim selftest [criterion-number]

experiments: wsm-scan, ssm-scan, gap-scan, sampler-validate, sl-report,
             coarse-report, block-gap-check, plant-demo

exit codes: 0 pass, 1 assertion failure, 2 config error
RFIM_WORKERS is the worker-count fallback when --workers is absent.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        println!("{USAGE}");
        return ExitCode::from(if args.is_empty() { 2 } else { 0 });
    }

    if args[0] == "selftest" {
        let outcomes = match args.get(1).and_then(|a| a.parse::<usize>().ok()) {
            Some(i) => match selftest::run_criterion(i) {
                Some(out) => {
                    println!("{}", out.line());
                    vec![out]
                }
                None => {
                    eprintln!("selftest criteria are numbered 1..=9");
                    return ExitCode::from(2);
                }
            },
            None => selftest::run_all(),
        };
        let failed = outcomes.iter().filter(|o| !o.pass).count();
        if failed > 0 {
            eprintln!("{failed} criterion(s) failed");
            return ExitCode::from(1);
        }
        return ExitCode::SUCCESS;
    }

    let experiment = args[0].clone();
    if !EXPERIMENTS.contains(&experiment.as_str()) {
        eprintln!("unknown experiment `{experiment}`\n{USAGE}");
        return ExitCode::from(2);
    }
    let mut config_path: Option<PathBuf> = None;
    let mut opts = RunOptions::default();
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        let value = |it: &mut std::slice::Iter<String>| -> Option<String> {
            it.next().map(|s| s.to_string())
        };
        match flag.as_str() {
            "--config" => config_path = value(&mut it).map(PathBuf::from),
            "--seed" => {
                opts.seed = match value(&mut it).and_then(|v| v.parse().ok()) {
                    Some(s) => Some(s),
                    None => {
                        eprintln!("--seed needs an integer");
                        return ExitCode::from(2);
                    }
                }
            }
            "--workers" => {
                opts.workers = match value(&mut it).and_then(|v| v.parse().ok()) {
                    Some(w) => Some(w),
                    None => {
                        eprintln!("--workers needs an integer");
                        return ExitCode::from(2);
                    }
                }
            }
            "--out" => opts.out = value(&mut it).map(PathBuf::from),
            other => {
                eprintln!("unknown flag `{other}`\n{USAGE}");
                return ExitCode::from(2);
            }
        }
    }
    let config_path = match config_path {
        Some(p) => p,
        None => {
            eprintln!("--config is required\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let config = match Config::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    // the config must name the experiment it was written for
    match config.get_str("experiment", "name") {
        Ok(name) if name == experiment => {}
        Ok(name) => {
            eprintln!("config is for `{name}`, not `{experiment}`");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    }
    match run_experiment(&config, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Assertion(m)) => {
            eprintln!("assertion failure: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}
