use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use lifted_filter::error::{Error, Result};
use lifted_filter::lifted::mixture_ground;
use lifted_filter::sampler::{sample_run, Trajectory};
use lifted_filter::scenario::{
    self, emit_metrics, load_observations, run_compare, run_filter, run_oracle, summarize, Format, Scenario,
    ORACLE_TOLERANCE,
};
use lifted_filter::Action;

#[derive(Parser)]
#[command(name = "lifted-filter", version, about = "Exact lifted filtering over multiset rewriting models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the lifted filter and write per-step metrics.
    Filter {
        #[command(flatten)]
        run: RunArgs,
        /// Also run the ground oracle and fail on any deviation.
        #[arg(long)]
        with_oracle: bool,
        /// Write the posterior of every step as JSON to this file.
        #[arg(long)]
        posterior: Option<PathBuf>,
    },
    /// Run only the brute-force ground filter.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run both filters and report their deviation at every step.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Simulate ground trajectories as line-delimited JSON.
    Sample {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean lifted and ground state counts, for one scenario or an agent sweep.
    Stats {
        #[arg(long, required_unless_present = "sweep_agents", conflicts_with = "sweep_agents")]
        scenario: Option<String>,
        /// Sweep the office-n scenario over 1..=N agents.
        #[arg(long)]
        sweep_agents: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or builtin:office3, builtin:office-n:<N>, builtin:alicebob-gauss.
    #[arg(long)]
    scenario: String,
    /// Replace the scenario's observation sequence with this file.
    #[arg(long)]
    observations: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Drop posterior states lighter than this.
    #[arg(long)]
    prune: Option<f64>,
    /// Split and search budget per state and step.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall time per step in the `ms` column.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn load(&self) -> Result<Scenario> {
        let mut sc = scenario::resolve(&self.scenario)?;
        if let Some(p) = &self.observations {
            sc = sc.with_observations(load_observations(p)?)?;
        }
        if let Some(p) = self.prune {
            sc.options.prune = p;
        }
        if let Some(b) = self.budget {
            sc.options.budget = b;
        }
        if let Some(s) = self.seed {
            sc.options.seed = s;
        }
        sc.options.timing |= self.timing;
        Ok(sc)
    }
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout().lock().write_all(bytes).map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn to_json<T: serde::Serialize>(v: &T, context: &str) -> Result<String> {
    serde_json::to_string(v).map_err(|source| Error::Json {
        context: context.into(),
        source,
    })
}

fn trajectory_record(t: &Trajectory, actions: &[Action]) -> serde_json::Value {
    let compounds: Vec<Vec<serde_json::Value>> = t
        .compounds
        .iter()
        .map(|k| {
            k.iter_copies()
                .map(|i| json!({"action": actions[i.action].name, "binding": i.binding}))
                .collect()
        })
        .collect();
    json!({
        "run": t.run,
        "seed": t.seed,
        "rng": t.rng,
        "states": t.states,
        "compounds": compounds,
    })
}

fn filter(run: &RunArgs, with_oracle: bool, posterior: Option<&Path>) -> Result<()> {
    let mut sc = run.load()?;
    sc.options.oracle |= with_oracle;
    sc.validate()?;
    let out = run_filter(&sc)?;
    if let Some(p) = posterior {
        let steps: Vec<serde_json::Value> = out
            .posteriors
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let states: Vec<_> = d.iter().map(|(l, w)| json!({"weight": w, "state": l.to_string()})).collect();
                json!({"step": i + 1, "states": states})
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&steps).map_err(|source| Error::Json {
            context: "posterior".into(),
            source,
        })?;
        text.push('\n');
        write_out(Some(p), text.as_bytes())?;
    }
    emit_metrics(&out.metrics, run.format, run.out.as_deref())
}

fn compare(run: &RunArgs) -> Result<bool> {
    let sc = run.load()?;
    let out = run_compare(&sc)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "max_deviation", "lifted_only", "ground_only", "n_lifted", "n_ground"])?;
    let mut ok = true;
    for (m, r) in out.metrics.iter().zip(&out.reports) {
        ok &= r.agrees(ORACLE_TOLERANCE);
        w.write_record([
            m.step.to_string(),
            format!("{:e}", r.max_deviation),
            r.lifted_only.to_string(),
            r.ground_only.to_string(),
            m.n_lifted.map_or(String::new(), |n| n.to_string()),
            r.ground_support.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_out(run.out.as_deref(), &bytes)?;
    Ok(ok)
}

fn sample(source: &str, steps: usize, runs: u64, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let sc = scenario::resolve(source)?;
    let seed = seed.unwrap_or(sc.options.seed);
    let initial = mixture_ground(&sc.initial)?;
    let trajectories: Vec<Result<Trajectory>> = (0..runs)
        .into_par_iter()
        .map(|r| sample_run(&initial, &sc.actions, steps, seed, r))
        .collect();
    let mut text = String::new();
    for t in trajectories {
        text.push_str(&to_json(&trajectory_record(&t?, &sc.actions), "trajectory")?);
        text.push('\n');
    }
    write_out(out, text.as_bytes())
}

fn stats(source: Option<&str>, sweep: Option<usize>, out: Option<&Path>, format: Format) -> Result<()> {
    let scenarios: Vec<(usize, Scenario)> = match (source, sweep) {
        (_, Some(n)) => (1..=n)
            .map(|k| scenario::bundled::office_n(k).map(|s| (k, s)))
            .collect::<Result<_>>()?,
        (Some(s), None) => {
            let sc = scenario::resolve(s)?;
            let agents = sc.initial.iter().map(|(l, _)| l.entity_count()).max().unwrap_or(0);
            vec![(agents, sc)]
        }
        (None, None) => return Err(Error::InvalidInput("give --scenario or --sweep-agents".into())),
    };
    let mut rows = Vec::new();
    for (agents, mut sc) in scenarios {
        sc.options.oracle = true;
        let run = run_filter(&sc)?;
        let Some(s) = summarize(&run.metrics) else { continue };
        rows.push(json!({
            "scenario": sc.name,
            "agents": agents,
            "mean_lifted": s.mean_lifted,
            "mean_ground": s.mean_ground,
            "ratio": s.ratio(),
        }));
    }
    let bytes = match format {
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&rows).map_err(|source| Error::Json {
                context: "stats".into(),
                source,
            })?;
            t.push('\n');
            t.into_bytes()
        }
        Format::Csv => {
            let cols = ["scenario", "agents", "mean_lifted", "mean_ground", "ratio"];
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(cols)?;
            for r in &rows {
                w.write_record(cols.map(|c| match &r[c] {
                    serde_json::Value::String(s) => s.clone(),
                    v => v.to_string(),
                }))?;
            }
            w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?
        }
    };
    write_out(out, &bytes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Filter {
            run,
            with_oracle,
            posterior,
        } => filter(run, *with_oracle, posterior.as_deref()),
        Command::Oracle { run } => run
            .load()
            .and_then(|sc| run_oracle(&sc))
            .and_then(|o| emit_metrics(&o.metrics, run.format, run.out.as_deref())),
        Command::Compare { run } => match compare(run) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("lifted and ground posteriors disagree");
                return ExitCode::from(1);
            }
            Err(e) => Err(e),
        },
        Command::Sample {
            scenario,
            steps,
            runs,
            seed,
            out,
        } => sample(scenario, *steps, *runs, *seed, out.as_deref()),
        Command::Stats {
            scenario,
            sweep_agents,
            out,
            format,
        } => stats(scenario.as_deref(), *sweep_agents, out.as_deref(), *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
