use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde_json::json;

use ltl_rl::automata::translate_fragment;
use ltl_rl::harness::{
    evaluate_checkpoint, export_plot_data, load_ldba, read_metrics_csv, run_experiment, tabular_oracle, ExperimentConfig,
    Gridworld, HarnessError,
};
use ltl_rl::learner::Checkpoint;
use ltl_rl::ltl::parse_ltl;
use ltl_rl::product::QInit;
use ltl_rl::shaping::{annotate, MagnitudePolicy, RewardParams};

#[derive(Parser)]
#[command(name = "ltl-rl", version, about = "LTL-guided actor-critic training for a car-like robot")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Translate a formula of the sequencing/avoidance fragment to HOA.
    Translate {
        ltl: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Annotate an automaton over the full alphabet and dump the result as JSON.
    Annotate {
        hoa: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate the runs described by an experiment config.
    Train {
        config: PathBuf,
        /// Train only this initialization mode.
        #[arg(long)]
        mode: Option<QInit>,
        /// Train only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of training steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Output directory [default: runs/<config name>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success rate of a checkpoint on the config's evaluation starts.
    Eval { checkpoint: PathBuf, config: PathBuf },
    /// Value-iteration oracle on a gridworld, checked against reachability.
    Oracle {
        grid: PathBuf,
        hoa: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 50.0)]
        r_g: f64,
        #[arg(long, default_value_t = -0.1, allow_negative_numbers = true)]
        r_n: f64,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        r_d: f64,
    },
    /// Smoothed normalized-return curves from metrics CSVs.
    PlotData {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        window: usize,
        /// Resample every run onto the grid stride, 2·stride, ...
        #[arg(long)]
        stride: Option<usize>,
        /// Write `<stem>_plot.csv` files here instead of printing.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(invalid)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Translate { ltl, out } => {
            let f = parse_ltl(&ltl).map_err(invalid)?;
            let a = translate_fragment(&f).map_err(invalid)?;
            emit(out.as_deref(), &a.to_hoa())
        }
        Cmd::Annotate { hoa, out } => {
            let a = annotate(&load_ldba(&hoa)?);
            let text = serde_json::to_string_pretty(&a.to_json()).map_err(runtime)? + "\n";
            emit(out.as_deref(), &text)
        }
        Cmd::Train { config, mode, seed, steps, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.modes = vec![m];
            }
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(n) = steps {
                cfg.steps = n;
            }
            let dir = out.unwrap_or_else(|| Path::new("runs").join(&cfg.name));
            let report = run_experiment(&cfg, Some(&dir))?;
            for r in &report.runs {
                println!(
                    "{} seed {}: success {:.3} ({} episodes, {} accepted)",
                    r.mode, r.seed, r.success_rate, r.episodes, r.accepted_episodes
                );
            }
            for s in &report.summary {
                println!("{} mean success {:.3}", s.mode, s.mean_success_rate);
            }
            println!("report written to {}", dir.join("report.json").display());
            Ok(())
        }
        Cmd::Eval { checkpoint, config } => {
            let ckpt = Checkpoint::from_json(&read(&checkpoint)?).map_err(invalid)?;
            let cfg = ExperimentConfig::load(&config)?;
            let (rate, n) = evaluate_checkpoint(&ckpt, &cfg)?;
            println!("{}", json!({ "success_rate": rate, "starts": n, "max_steps": cfg.eval_max_steps }));
            Ok(())
        }
        Cmd::Oracle { grid, hoa, gamma, tol, r_g, r_n, r_d } => {
            let gw = Gridworld::load(&grid).with_context(|| grid.display().to_string()).map_err(invalid)?;
            let ldba = load_ldba(&hoa)?;
            let ann = gw.annotate(&ldba).map_err(invalid)?;
            let params = RewardParams { r_g, r_n, r_d, d_max: (gw.width + gw.height) as f64 };
            params.validate(MagnitudePolicy { ratio: None }).map_err(invalid)?;
            if !(gamma > 0.0 && gamma < 1.0 && tol > 0.0) {
                return Err(invalid(anyhow!("gamma must lie in (0, 1) and tol must be positive")));
            }
            let res = tabular_oracle(&gw, &ann, &params, gamma, tol).map_err(runtime)?;
            let mismatches: Vec<_> = res
                .mismatches()
                .into_iter()
                .map(|(c, q, bits)| {
                    let (x, y) = gw.coords(c);
                    json!({ "cell": [x, y], "q": q, "v": bits })
                })
                .collect();
            let summary = json!({
                "product_states": res.valid.iter().filter(|v| **v).count(),
                "satisfied": res.count_satisfied(),
                "reachable": res.count_reachable(),
                "matches_ground_truth": mismatches.is_empty(),
                "mismatches": mismatches,
                "sweeps": res.sweeps,
            });
            println!("{}", serde_json::to_string_pretty(&summary).map_err(runtime)?);
            Ok(())
        }
        Cmd::PlotData { metrics, window, stride, out_dir } => {
            let runs = metrics
                .iter()
                .map(|p| read_metrics_csv(read(p)?.as_bytes()).with_context(|| p.display().to_string()).map_err(invalid))
                .collect::<Result<Vec<_>, _>>()?;
            let series = export_plot_data(&runs, window, stride);
            if out_dir.is_none() && series.len() == 1 {
                let mut buf = Vec::new();
                series[0].write_csv(&mut buf).map_err(runtime)?;
                return emit(None, &String::from_utf8_lossy(&buf));
            }
            for (p, s) in metrics.iter().zip(&series) {
                let dir = out_dir.clone().or_else(|| p.parent().map(Path::to_path_buf)).unwrap_or_default();
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
                let target = dir.join(format!("{stem}_plot.csv"));
                let mut buf = Vec::new();
                s.write_csv(&mut buf).map_err(runtime)?;
                emit(Some(&target), &String::from_utf8_lossy(&buf))?;
                println!("{}", target.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
