//! Command-line interface: `check`, `gen`, `bench`, `dimacs` and `serve`.
//!
//! Exit codes: 0 live, 1 dead, 2 unknown, 64 usage, 65 bad instance,
//! 70 internal error, 74 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::api::{self, ApiConfig};
use crate::detector::{detect, dimacs_for_steps, Algorithm, DetectOptions, Status};
use crate::generator::{self, physical_route_count, RandomParams};
use crate::model::{parse_instance, serialize_instance, ProblemInstance};
use crate::sat::BackendKind;

pub const EXIT_LIVE: i32 = 0;
pub const EXIT_DEAD: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_BAD_INSTANCE: i32 = 65;
pub const EXIT_INTERNAL: i32 = 70;
pub const EXIT_IO: i32 = 74;

#[derive(Parser, Debug)]
#[command(name = "railock", version, about = "Railway deadlock detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether an instance is live or bound for deadlock.
    Check(CheckArgs),
    /// Write a generated instance.
    Gen {
        #[command(subcommand)]
        family: Family,
        /// Output path; standard output if omitted.
        #[arg(short = 'o', long = "output", global = true)]
        output: Option<PathBuf>,
    },
    /// Run detection on every `*.json` instance in a directory.
    Bench(BenchArgs),
    /// Write the CNF for a fixed number of steps in DIMACS format.
    Dimacs {
        instance: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        #[arg(long, default_value = "3")]
        algorithm: Algorithm,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Start the HTTP sandbox.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Detection deadline per request.
        #[arg(long, default_value_t = 10.0)]
        timeout_s: f64,
    },
}

#[derive(Args, Debug)]
struct CheckArgs {
    instance: PathBuf,
    #[arg(long, default_value = "3")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 60.0)]
    timeout_s: f64,
    /// Give up with UNKNOWN after this many steps.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Write the plan of a LIVE verdict to this file.
    #[arg(long)]
    plan_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Family {
    /// Two-track stations joined by single track.
    Ladder {
        #[arg(long)]
        stations: usize,
        #[arg(long, default_value_t = generator::LADDER_TRAIN_LEN)]
        train_len: f64,
        #[arg(long, default_value_t = generator::LADDER_TRACK_LEN)]
        track_len: f64,
    },
    /// A line of unit routes with a train at each end.
    Corridor {
        #[arg(long, default_value_t = 9)]
        routes: usize,
        /// Length of both trains unless `--right-train-len` is given.
        #[arg(long, default_value_t = 2.25)]
        train_len: f64,
        #[arg(long)]
        right_train_len: Option<f64>,
        /// Only place the left train.
        #[arg(long)]
        single: bool,
    },
    /// Main line with a siding.
    Junction,
    /// Four stations with two long and two short trains.
    FourStation,
    /// Seeded random line.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct BenchArgs {
    dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 60.0)]
    timeout_s: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize, Debug)]
struct AlgoCell {
    algorithm: Algorithm,
    status: Status,
    steps: usize,
    time_s: f64,
}

#[derive(Serialize, Debug)]
struct BenchRow {
    instance: String,
    result: String,
    n_routes: usize,
    n_trains: usize,
    runs: Vec<AlgoCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn seconds(s: f64) -> Option<Duration> {
    (s.is_finite() && s >= 0.0).then(|| Duration::from_secs_f64(s))
}

fn load(path: &Path, err: &mut dyn Write) -> Result<ProblemInstance, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
        EXIT_BAD_INSTANCE
    })?;
    parse_instance(&text).map_err(|e| {
        let _ = writeln!(err, "error: {}: {e}", path.display());
        EXIT_BAD_INSTANCE
    })
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match path {
        Some(p) => match std::fs::write(p, text) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
                EXIT_IO
            }
        },
        None => {
            let _ = writeln!(out, "{text}");
            0
        }
    }
}

/// Runs the CLI with explicit arguments and streams; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match cli.command {
        Command::Check(a) => check(a, out, err),
        Command::Gen { family, output } => gen(family, output.as_deref(), out, err),
        Command::Bench(a) => bench(a, out, err),
        Command::Dimacs {
            instance,
            steps,
            algorithm,
            output,
        } => {
            let inst = match load(&instance, err) {
                Ok(i) => i,
                Err(code) => return code,
            };
            let text = dimacs_for_steps(&inst, algorithm, steps as usize);
            write_output(output.as_deref(), text.trim_end(), out, err)
        }
        Command::Serve { addr, timeout_s } => {
            let Some(timeout) = seconds(timeout_s) else {
                let _ = writeln!(err, "error: invalid --timeout-s");
                return EXIT_USAGE;
            };
            let config = ApiConfig {
                detect_timeout: timeout,
                ..ApiConfig::default()
            };
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(api::serve(addr, config)) {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_IO
                }
            }
        }
    }
}

fn check(a: CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(timeout) = seconds(a.timeout_s) else {
        let _ = writeln!(err, "error: invalid --timeout-s");
        return EXIT_USAGE;
    };
    let inst = match load(&a.instance, err) {
        Ok(i) => i,
        Err(code) => return code,
    };
    for w in inst.warnings() {
        log::warn!("{w}");
    }
    let opts = DetectOptions {
        algorithm: a.algorithm,
        timeout: Some(timeout),
        step_cap: a.max_steps,
        backend: BackendKind::from_env(),
    };
    let v = match detect(&inst, &opts) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INTERNAL;
        }
    };
    if a.json {
        let _ = writeln!(out, "{}", serde_json::to_string(&v.to_doc()).unwrap());
    } else {
        let _ = writeln!(
            out,
            "{} steps={} time={:.3}s",
            v.status,
            v.steps_used,
            v.elapsed.as_secs_f64()
        );
    }
    if let (Some(path), Some(plan)) = (&a.plan_out, &v.plan) {
        let text = serde_json::to_string_pretty(&plan.to_doc(&inst)).unwrap();
        if let Err(e) = std::fs::write(path, text) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    match v.status {
        Status::Live => EXIT_LIVE,
        Status::Dead => EXIT_DEAD,
        Status::Unknown => EXIT_UNKNOWN,
    }
}

fn gen(family: Family, output: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let inst = match family {
        Family::Ladder {
            stations,
            train_len,
            track_len,
        } => generator::ladder(stations, train_len, track_len),
        Family::Corridor {
            routes,
            train_len,
            right_train_len,
            single,
        } => {
            let right = if single {
                None
            } else {
                Some(right_train_len.unwrap_or(train_len))
            };
            generator::corridor(routes, Some(train_len), right)
        }
        Family::Junction => Ok(generator::junction()),
        Family::FourStation => Ok(generator::four_station()),
        Family::Random { seed } => Ok(generator::random_instance(seed, RandomParams::default())),
    };
    let inst = match inst {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let code = write_output(output, &serialize_instance(&inst), out, err);
    if code == 0 {
        let _ = writeln!(
            err,
            "{} partial routes ({} physical), {} trains",
            inst.infrastructure.routes().len(),
            physical_route_count(&inst),
            inst.trains.len()
        );
    }
    code
}

fn bench_row(path: &Path, a: &BenchArgs, timeout: Duration) -> BenchRow {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut row = BenchRow {
        instance: name,
        result: "error".into(),
        n_routes: 0,
        n_trains: 0,
        runs: Vec::new(),
        error: None,
    };
    let inst = match std::fs::read_to_string(path)
        .map_err(|e| e.to_string())
        .and_then(|t| parse_instance(&t).map_err(|e| e.to_string()))
    {
        Ok(i) => i,
        Err(e) => {
            row.error = Some(e);
            return row;
        }
    };
    row.n_routes = inst.infrastructure.routes().len();
    row.n_trains = inst.trains.len();
    let mut result = Status::Unknown;
    for alg in &a.algorithms {
        let opts = DetectOptions {
            algorithm: *alg,
            timeout: Some(timeout),
            step_cap: None,
            backend: BackendKind::from_env(),
        };
        match detect(&inst, &opts) {
            Ok(v) => {
                if v.status != Status::Unknown {
                    result = v.status;
                }
                row.runs.push(AlgoCell {
                    algorithm: *alg,
                    status: v.status,
                    steps: v.steps_used,
                    time_s: v.elapsed.as_secs_f64(),
                });
            }
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        }
    }
    row.result = result.to_string();
    row
}

fn bench(a: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(timeout) = seconds(a.timeout_s) else {
        let _ = writeln!(err, "error: invalid --timeout-s");
        return EXIT_USAGE;
    };
    let entries = match std::fs::read_dir(&a.dir) {
        Ok(e) => e,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", a.dir.display());
            return EXIT_IO;
        }
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let rows: Vec<BenchRow> = paths.iter().map(|p| bench_row(p, &a, timeout)).collect();

    if a.json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&rows).unwrap());
    } else {
        let mut header = format!("{:<24} {:<8} {:>8} {:>8}", "instance", "result", "n_routes", "n_trains");
        for alg in &a.algorithms {
            header += &format!(" {:>9} {:>9}", format!("a{alg}_steps"), format!("a{alg}_time"));
        }
        let _ = writeln!(out, "{header}");
        for row in &rows {
            let mut line = format!(
                "{:<24} {:<8} {:>8} {:>8}",
                row.instance, row.result, row.n_routes, row.n_trains
            );
            for cell in &row.runs {
                let steps = match cell.status {
                    Status::Unknown => format!("{}?", cell.steps),
                    _ => cell.steps.to_string(),
                };
                line += &format!(" {:>9} {:>9.3}", steps, cell.time_s);
            }
            if let Some(e) = &row.error {
                line += &format!("  error: {e}");
            }
            let _ = writeln!(out, "{line}");
        }
    }
    if rows.iter().any(|r| r.error.is_some()) {
        1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("railock").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run_args(&[]).0, EXIT_USAGE);
        assert_eq!(run_args(&["check"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["check", "x.json", "--algorithm", "7"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["gen", "ladder", "--stations", "0"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn missing_instance_exits_65() {
        assert_eq!(run_args(&["check", "/nonexistent/x.json"]).0, EXIT_BAD_INSTANCE);
    }

    #[test]
    fn gen_to_stdout_parses() {
        let (code, out, err) = run_args(&["gen", "junction"]);
        assert_eq!(code, 0);
        assert!(parse_instance(&out).is_ok());
        assert!(err.contains("16 partial routes"));
    }
}
