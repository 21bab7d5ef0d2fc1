//! Command-line runner for the cache and pipeline simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use svm_sim::sim;

const USAGE: &str = "\
svm-sim — deterministic program cache and transaction pipeline simulator

USAGE:
    svm-sim run --config <FILE> --out <DIR> [--seed <N>] [--trace <FILE>]
    svm-sim sweep --config <FILE> --sizes <N,N,..> --out <DIR> [--seed <N>]
    svm-sim report --in <DIR>
    svm-sim gen-trace --config <FILE> --out <FILE> [--seed <N>]

COMMANDS:
    run        Run one simulation and write batches.csv, summary.csv and
               histograms.csv into the output directory. With --trace the
               workload is replayed from a trace file instead of generated.
    sweep      Run the identical workload once per cache size and write
               per-size outputs plus a combined sweep.csv.
    report     Re-aggregate summary.csv and histograms.csv from an existing
               batches.csv and print the summary.
    gen-trace  Generate a workload trace file from a config.

Flags are long-form only. --seed overrides the config's workload seed.
";

struct Args {
    flags: Vec<(String, String)>,
}

impl Args {
    fn parse(args: &[String]) -> Result<Self, String> {
        let mut flags = Vec::new();
        let mut iter = args.iter();
        while let Some(arg) = iter.next() {
            let Some(name) = arg.strip_prefix("--") else {
                return Err(format!("unexpected argument {arg:?}"));
            };
            let value = iter
                .next()
                .ok_or_else(|| format!("flag --{name} needs a value"))?;
            flags.push((name.to_string(), value.clone()));
        }
        Ok(Self { flags })
    }

    fn take(&mut self, name: &str) -> Option<String> {
        let pos = self.flags.iter().position(|(n, _)| n == name)?;
        Some(self.flags.remove(pos).1)
    }

    fn require(&mut self, name: &str) -> Result<String, String> {
        self.take(name).ok_or_else(|| format!("missing --{name}"))
    }

    fn finish(self) -> Result<(), String> {
        match self.flags.first() {
            Some((name, _)) => Err(format!("unknown flag --{name}")),
            None => Ok(()),
        }
    }
}

fn parse_seed(args: &mut Args) -> Result<Option<u64>, String> {
    match args.take("seed") {
        Some(value) => value
            .parse::<u64>()
            .map(Some)
            .map_err(|_| format!("--seed expects an integer, found {value:?}")),
        None => Ok(None),
    }
}

fn parse_sizes(value: &str) -> Result<Vec<usize>, String> {
    let sizes: Result<Vec<usize>, _> = value.split(',').map(|s| s.trim().parse()).collect();
    let sizes = sizes.map_err(|_| format!("--sizes expects integers, found {value:?}"))?;
    if sizes.is_empty() {
        return Err("--sizes must not be empty".to_string());
    }
    Ok(sizes)
}

fn run_command(command: &str, rest: &[String]) -> Result<(), String> {
    let mut args = Args::parse(rest)?;
    match command {
        "run" => {
            let config = PathBuf::from(args.require("config")?);
            let out = PathBuf::from(args.require("out")?);
            let seed = parse_seed(&mut args)?;
            let trace = args.take("trace").map(PathBuf::from);
            args.finish()?;
            let output = match trace {
                Some(trace_path) => {
                    if seed.is_some() {
                        return Err("--seed has no effect when replaying a trace".to_string());
                    }
                    sim::run_simulation_from_trace(&config, &trace_path, &out)
                        .map_err(|e| e.to_string())?
                }
                None => sim::run_simulation(&config, &out, seed).map_err(|e| e.to_string())?,
            };
            eprintln!(
                "wrote {} batches to {} (misses {}, evictions {})",
                output.store.batch_count(),
                out.display(),
                output.cache_stats.misses,
                output.cache_stats.evictions,
            );
            Ok(())
        }
        "sweep" => {
            let config = PathBuf::from(args.require("config")?);
            let sizes = parse_sizes(&args.require("sizes")?)?;
            let out = PathBuf::from(args.require("out")?);
            let seed = parse_seed(&mut args)?;
            args.finish()?;
            let report = sim::run_sweep(&config, &sizes, &out, seed).map_err(|e| e.to_string())?;
            for entry in &report.entries {
                let misses = report.mean(entry.cache_size, "misses").unwrap_or(0.0);
                let evictions = report.mean(entry.cache_size, "evictions").unwrap_or(0.0);
                eprintln!(
                    "size {}: {} batches, mean misses {:.4}, mean evictions {:.4}",
                    entry.cache_size, entry.batch_count, misses, evictions,
                );
            }
            Ok(())
        }
        "report" => {
            let dir = PathBuf::from(args.require("in")?);
            args.finish()?;
            let summary = sim::report(&dir).map_err(|e| e.to_string())?;
            print!("{summary}");
            Ok(())
        }
        "gen-trace" => {
            let config = PathBuf::from(args.require("config")?);
            let out = PathBuf::from(args.require("out")?);
            let seed = parse_seed(&mut args)?;
            args.finish()?;
            let records = sim::gen_trace_file(&config, &out, seed).map_err(|e| e.to_string())?;
            eprintln!("wrote {} records to {}", records, out.display());
            Ok(())
        }
        other => Err(format!("unknown command {other:?}")),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return ExitCode::FAILURE;
    };
    if command == "--help" || command == "help" {
        print!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    match run_command(command, &args[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            eprintln!("run `svm-sim --help` for usage");
            ExitCode::FAILURE
        }
    }
}
