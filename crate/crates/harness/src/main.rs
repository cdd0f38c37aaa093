use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ftc_core::{Engine, Norm};
use ftc_harness::apps::{generated_dataset, read_dataset, run_funccalc, run_hull, run_lse};
use ftc_harness::{compare_criteria, run_experiment, ExperimentConfig, HarnessError, Stopping, Topology};
use serde::Serialize;

/// Finite-time consensus experiments on random directed graphs.
///
/// Exit codes: 0 success, 1 configuration or input error, 2 no halt within
/// k_max, 3 invariant violation.
#[derive(Parser)]
#[command(name = "ftc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its summary.
    Run(Common),
    /// Run the radius, box and hull rules on the same instance.
    Compare(Common),
    /// Hull consensus on random per-node point sets.
    Hull {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        points_per_node: usize,
    },
    /// Least squares by consensus, one sample per node.
    Lse {
        #[command(flatten)]
        common: Common,
        /// CSV of `x,y` rows; one node per row. Generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Polynomial basis degree.
        #[arg(long, default_value_t = 2)]
        degree: u32,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
    },
    /// Every node computes a function of all node values.
    Funccalc {
        #[command(flatten)]
        common: Common,
        /// `max`, `mean` or `sum`.
        #[arg(long, default_value = "max")]
        function: String,
    },
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    match s {
        "ratio" | "push-sum" => Ok(Engine::Ratio),
        "row" => Ok(Engine::Row),
        _ => Err(format!("unknown engine `{s}`: expected ratio or row")),
    }
}

/// Flags shared by all subcommands; each one overrides the base config.
#[derive(Args)]
struct Common {
    /// Base config as JSON; flags given alongside it take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Absolute stopping threshold.
    #[arg(long, conflicts_with = "rho_relative")]
    rho: Option<f64>,
    /// Threshold as a fraction of the consensus vector's norm.
    #[arg(long)]
    rho_relative: Option<f64>,
    /// 1, 2, inf or any p >= 1.
    #[arg(long)]
    norm: Option<Norm>,
    #[arg(long, value_enum)]
    topology: Option<Topology>,
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Window length; must be at least the graph diameter.
    #[arg(long)]
    d_bound: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    stopping: Option<Stopping>,
    /// ratio or row.
    #[arg(long, value_parser = parse_engine)]
    engine: Option<Engine>,
    /// Iterations when `--stopping none`.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    bits_per_float: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        set!(nodes => n, dim => dim, seed => seed, norm => norm, topology => topology,
             edge_prob => edge_prob, k_max => k_max, stopping => stopping, engine => engine,
             steps => steps, bits_per_float => bits_per_float);
        if let Some(r) = self.rho {
            cfg.rho = r;
            cfg.rho_relative = false;
        }
        if let Some(r) = self.rho_relative {
            cfg.rho = r;
            cfg.rho_relative = true;
        }
        if self.d_bound.is_some() {
            cfg.d_bound = self.d_bound;
        }
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn write_files(dir: Option<&Path>, files: &[(&str, &str)]) -> Result<(), HarnessError> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        for (name, body) in files {
            std::fs::write(dir.join(name), body)?;
        }
    }
    Ok(())
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Run(common) => {
            let rep = run_experiment(&common.config()?)?;
            print!("{}", rep.summary_json() + "\n");
            let bad = rep.summary.violations();
            if !bad.is_empty() {
                eprintln!("checks failed: {}", bad.join(", "));
            }
            Ok(rep.summary.exit_code())
        }
        Command::Compare(common) => {
            let cmp = compare_criteria(&common.config()?)?;
            println!("rho = {:.6e}, d = {}, B = {}", cmp.rho, cmp.dim, cmp.bits_per_float);
            print!("{}", cmp.table());
            let failed = cmp.rows.iter().any(|r| r.guarantee_2rho_ok == Some(false));
            let stalled = cmp.rows.iter().any(|r| r.halt_k.is_none());
            Ok(if failed { 3 } else if stalled { 2 } else { 0 })
        }
        Command::Hull { common, points_per_node } => {
            let cfg = common.config()?;
            let rep = run_hull(&cfg, points_per_node)?;
            let summary = json(&rep.summary);
            print!("{summary}");
            println!("{}", rep.extreme_wire);
            write_files(
                cfg.out_dir.as_deref(),
                &[("hull.txt", &(rep.extreme_wire.clone() + "\n")), ("hull_trace.txt", &rep.trace), ("hull_summary.json", &summary)],
            )?;
            Ok(rep.exit_code())
        }
        Command::Lse { common, data, degree, iterations } => {
            let cfg = common.config()?;
            let samples = match &data {
                Some(p) => read_dataset(p)?,
                None => generated_dataset(cfg.n, cfg.seed),
            };
            let rep = run_lse(&cfg, &samples, degree, iterations)?;
            let summary = json(&rep.summary);
            print!("{summary}");
            write_files(
                cfg.out_dir.as_deref(),
                &[("lse_bound.csv", &rep.bound_csv), ("lse_summary.json", &summary)],
            )?;
            Ok(rep.exit_code())
        }
        Command::Funccalc { common, function } => {
            let cfg = common.config()?;
            let rep = run_funccalc(&cfg, &function)?;
            let summary = json(&rep.summary);
            print!("{summary}");
            write_files(
                cfg.out_dir.as_deref(),
                &[("funccalc.csv", &rep.csv), ("funccalc_summary.json", &summary)],
            )?;
            Ok(rep.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
