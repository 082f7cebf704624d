//! Command-line front end. Exit codes: 0 success, 2 missing file or invalid
//! scenario, 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand};

use super::dot::export_dot;
use super::report::{report_csv, report_json};
use super::scenario::Scenario;
use crate::topology::{NodeId, Path, TopologyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ftswitch",
    version,
    about = "Fault-tolerant switching fabric simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Run length in ms of virtual time.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        duration: Option<u64>,
        #[arg(long, value_name = "PATH")]
        report_json: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        report_csv: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        event_log: Option<PathBuf>,
    },
    /// Check a scenario file without running it.
    Validate { file: PathBuf },
    /// Show shortest, equal-cost and backup paths between two nodes.
    Paths {
        file: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
}

enum Failure {
    Invalid(String),
    Internal(String),
}

fn load(file: &FsPath) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(file)
        .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", file.display())))?;
    Scenario::parse(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", file.display())))
}

fn write_file(path: &FsPath, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
}

fn show(path: &Path) -> String {
    let ids: Vec<&str> = path.nodes().iter().map(NodeId::as_str).collect();
    format!("{} (cost {})", ids.join(" -> "), path.cost())
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Internal(e.to_string());
    match command {
        Command::Run {
            file,
            seed,
            duration,
            report_json: json_path,
            report_csv: csv_path,
            dot,
            event_log,
        } => {
            let mut scenario = load(&file)?;
            if let Some(seed) = seed {
                scenario.config.seed = seed;
            }
            if let Some(d) = duration {
                scenario.config.duration_ms = d;
            }
            let result = scenario
                .simulation()
                .with_event_log(event_log.is_some())
                .run();
            let r = &result.report;
            writeln!(
                out,
                "{}: loss {:.1}% ({} of {} packets), mttr {}, success {:.1}% ({} of {} flows)",
                r.scenario,
                r.loss_rate_percent,
                r.lost,
                r.packets_sent,
                r.mttr_ms.map_or("n/a".to_string(), |m| format!("{m} ms")),
                r.success_rate_percent,
                r.rerouted_flows,
                r.affected_flows
            )
            .map_err(io)?;
            if let Some(p) = json_path {
                write_file(&p, &report_json(&result))?;
            }
            if let Some(p) = csv_path {
                write_file(&p, &report_csv(r))?;
            }
            if let Some(p) = dot {
                let text = export_dot(&result.final_topology, &result.node_status)
                    .map_err(|e| Failure::Internal(e.to_string()))?;
                write_file(&p, &text)?;
            }
            if let Some(p) = event_log {
                write_file(&p, result.event_log.as_deref().unwrap_or_default())?;
            }
            Ok(())
        }
        Command::Validate { file } => {
            let s = load(&file)?;
            writeln!(
                out,
                "{}: ok ({} nodes, {} links, {} flows, {} faults)",
                s.name,
                s.nodes.len(),
                s.links.len(),
                s.flows.len(),
                s.faults.len()
            )
            .map_err(io)
        }
        Command::Paths { file, from, to } => {
            let topo = load(&file)?.topology();
            let (src, dst) = (NodeId::new(from), NodeId::new(to));
            for id in [&src, &dst] {
                if topo.node(id).is_none() {
                    return Err(Failure::Invalid(format!("unknown node `{id}`")));
                }
            }
            let primary = match topo.shortest_path(&src, &dst) {
                Ok(p) => p,
                Err(TopologyError::NoPath { .. }) => {
                    return writeln!(out, "no path from {src} to {dst}").map_err(io);
                }
                Err(e) => return Err(Failure::Internal(e.to_string())),
            };
            writeln!(out, "shortest: {}", show(&primary)).map_err(io)?;
            let equal = topo
                .equal_cost_paths(&src, &dst)
                .map_err(|e| Failure::Internal(e.to_string()))?;
            writeln!(out, "equal-cost paths: {}", equal.len()).map_err(io)?;
            for p in &equal {
                writeln!(out, "  {}", show(p)).map_err(io)?;
            }
            match topo.disjoint_backup(&primary) {
                Ok(b) => writeln!(out, "backup: {}", show(&b)),
                Err(_) => writeln!(out, "backup: none"),
            }
            .map_err(io)
        }
    }
}

/// Runs the command line in `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return if code == 0 { EXIT_OK } else { EXIT_INVALID };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Internal(msg)) => {
            let _ = writeln!(err, "internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}
