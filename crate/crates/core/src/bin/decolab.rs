//! Command-line experiment runner.
//!
//! Usage:
//!   decolab <validate|index|evolve|asymptotics|relaxation|classical>
//!           --config PATH [--out DIR] [--seed N] [--threads N]
//!
//! Exit codes: 0 ok, 1 config error, 2 numerical-check failure.

use decolab::config::{parse_config, ExperimentConfig, ExperimentKind};
use decolab::error::Error;
use decolab::experiment;
use std::path::PathBuf;
use std::process::ExitCode;

struct Args {
    kind: ExperimentKind,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
}

fn usage() -> ! {
    eprintln!(
        "usage: decolab <validate|index|evolve|asymptotics|relaxation|classical> \
         --config PATH [--out DIR] [--seed N] [--threads N]"
    );
    std::process::exit(1);
}

fn parse_args() -> Args {
    let mut argv = std::env::args().skip(1);
    let kind = match argv.next().as_deref().and_then(ExperimentKind::parse) {
        Some(k) => k,
        None => usage(),
    };
    let mut args = Args {
        kind,
        config: None,
        out: None,
        seed: None,
        threads: None,
    };
    while let Some(flag) = argv.next() {
        let mut value = |name: &str| -> String {
            match argv.next() {
                Some(v) => v,
                None => {
                    eprintln!("flag {name} needs a value");
                    std::process::exit(1);
                }
            }
        };
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(value("--config"))),
            "--out" => args.out = Some(PathBuf::from(value("--out"))),
            "--seed" => match value("--seed").parse() {
                Ok(s) => args.seed = Some(s),
                Err(_) => {
                    eprintln!("--seed needs an integer");
                    std::process::exit(1);
                }
            },
            "--threads" => match value("--threads").parse() {
                Ok(n) => args.threads = Some(n),
                Err(_) => {
                    eprintln!("--threads needs an integer");
                    std::process::exit(1);
                }
            },
            other => {
                eprintln!("unknown flag `{other}`");
                usage();
            }
        }
    }
    args
}

fn load_config(args: &Args) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = parse_args();
    if let Some(threads) = args.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let config = match load_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for line in decolab::io::CONVENTIONS {
        println!("convention: {line}");
    }
    match experiment::run(args.kind, &config) {
        Ok(summary) => {
            for msg in &summary.messages {
                println!("{msg}");
            }
            println!(
                "{}: {} artifact(s) in {}",
                args.kind.name(),
                summary.artifacts.len(),
                config.out_dir.display()
            );
            if summary.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("numerical checks failed");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
