//! Command-line driver: `run` one experiment cell, `grid` a full sweep from
//! a config file, or `synth` a seeded synthetic cohort to CSV.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand};

use banditbench::agents::AgentSpec;
use banditbench::guidelines::{parse_rules, BoundRuleSet, RuleSet};
use banditbench::ingest::parse::{read_biomarkers, read_features, read_responses, write_biomarkers, write_features, write_responses};
use banditbench::ingest::synth::{synthesize_dataset, SynthSpec};
use banditbench::ingest::{Dataset, RawResponseRow};
use banditbench::rewards::RewardKind;
use banditbench::rng::RngSeed;
use banditbench::runner::gridfile::{parse_grid_file, DatasetSource};
use banditbench::runner::report::{emit_reports, emit_single_run};
use banditbench::runner::{run_grid, run_single, GridSpec, RunCell};
use banditbench::types::{ContextMode, UnitId};

#[derive(Parser)]
#[command(name = "banditbench", version, about = "Contextual-bandit benchmark for drug-response treatment assignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment cell and write its step log, activity table, and summary.
    Run {
        /// Response CSV (`unit,drug,ic50`).
        #[arg(long)]
        responses: PathBuf,
        /// Feature embedding CSV (`unit,f0,f1,...`).
        #[arg(long)]
        features: PathBuf,
        /// Biomarker flag CSV (`unit,<flag>,...`).
        #[arg(long)]
        biomarkers: PathBuf,
        /// Protocol rule file (required for guideline/both states and the guideline agent).
        #[arg(long)]
        rules: Option<PathBuf>,
        /// State representation.
        #[arg(long)]
        state: ContextMode,
        /// Reward metric.
        #[arg(long)]
        reward: RewardKind,
        /// Agent spec, e.g. `linear` or `dropout:keep=0.9`.
        #[arg(long)]
        agent: String,
        #[arg(long)]
        seed: u64,
        /// Steps to run (default: one pass over the units).
        #[arg(long)]
        horizon: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Activity table window size.
        #[arg(long, default_value_t = 50)]
        window: usize,
    },
    /// Run a full experiment grid from a key=value config file.
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for grid cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Generate a seeded synthetic cohort as the three CSV files.
    Synth {
        /// Number of units.
        #[arg(long)]
        n: usize,
        /// Number of drugs.
        #[arg(long, default_value_t = 7)]
        k: usize,
        /// Feature dimensions.
        #[arg(long, default_value_t = 20)]
        dim: usize,
        #[arg(long)]
        seed: u64,
        /// Rule file whose biomarker→drug signal is planted into the scores.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Score noise standard deviation.
        #[arg(long)]
        noise: Option<f64>,
        /// Output directory for responses.csv, features.csv, biomarkers.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_dataset(responses: &Path, features: &Path, biomarkers: &Path) -> anyhow::Result<Dataset<f64>> {
    let raw = read_responses(responses)?;
    let feats = read_features::<f64>(features)?;
    let flags = read_biomarkers(biomarkers)?;
    let assembled = Dataset::assemble(&raw, &feats, &flags)?;
    for unit in &assembled.dropped_units {
        eprintln!("warning: unit `{unit}` dropped (incomplete drug responses)");
    }
    Ok(assembled.dataset)
}

fn load_rules(path: Option<&PathBuf>) -> anyhow::Result<Option<RuleSet>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Some(parse_rules(&text).with_context(|| format!("parsing {}", p.display()))?))
        }
        None => Ok(None),
    }
}

fn bind_rules(rules: Option<&RuleSet>, dataset: &Dataset<f64>) -> anyhow::Result<Option<Arc<BoundRuleSet>>> {
    rules
        .map(|r| r.bind(dataset).map(Arc::new).map_err(anyhow::Error::from))
        .transpose()
}

fn cmd_run(
    responses: PathBuf,
    features: PathBuf,
    biomarkers: PathBuf,
    rules: Option<PathBuf>,
    state: ContextMode,
    reward: RewardKind,
    agent: String,
    seed: u64,
    horizon: Option<usize>,
    out: PathBuf,
    window: usize,
) -> anyhow::Result<()> {
    let dataset = Arc::new(load_dataset(&responses, &features, &biomarkers)?);
    let rule_set = load_rules(rules.as_ref())?;
    let bound = bind_rules(rule_set.as_ref(), &dataset)?;
    let cell = RunCell {
        mode: state,
        reward,
        agent: AgentSpec::parse(&agent)?,
        seed,
        horizon,
    };
    let output = run_single(&dataset, bound.as_ref(), &cell)?;
    let files = emit_single_run(&out, &dataset, &output, window)?;
    println!(
        "{} {} {} seed={} horizon={}: reward={} oracle={} regret={}",
        output.result.mode,
        output.result.reward_kind,
        output.result.agent,
        output.result.seed,
        output.result.horizon,
        output.result.cum_reward,
        output.result.oracle_reward,
        output.result.regret
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_grid(config: PathBuf, jobs: usize) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let grid = parse_grid_file(&text)?;

    let rule_set = load_rules(grid.rules.as_ref())?;
    let dataset = match &grid.dataset {
        DatasetSource::Paths {
            responses,
            features,
            biomarkers,
        } => Arc::new(load_dataset(responses, features, biomarkers)?),
        DatasetSource::Synth { n, k, dim, seed, noise } => {
            let mut spec = SynthSpec::new(*n, *k, *dim);
            if let Some(noise) = noise {
                spec = spec.with_noise(*noise);
            }
            let (ds, _) = synthesize_dataset::<f64>(&spec, rule_set.as_ref(), RngSeed(*seed))?;
            Arc::new(ds)
        }
    };
    let bound = bind_rules(rule_set.as_ref(), &dataset)?;

    let spec = GridSpec {
        modes: grid.modes,
        rewards: grid.rewards,
        agents: grid.agents,
        seeds: grid.seeds,
        horizon: grid.horizon,
    };
    let n_cells = spec.cells().len();
    eprintln!("running {n_cells} cells on {jobs} thread(s)");
    let results = run_grid(&dataset, bound.as_ref(), &spec, jobs);
    let failures = emit_reports(&grid.out, &dataset, &results, grid.window)?;
    println!(
        "grid complete: {} cells ok, {} failed; reports in {}",
        n_cells - failures.len(),
        failures.len(),
        grid.out.display()
    );
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &failures {
            eprintln!("cell {} failed: {}", f.label, f.error);
        }
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_synth(
    n: usize,
    k: usize,
    dim: usize,
    seed: u64,
    rules: Option<PathBuf>,
    noise: Option<f64>,
    out: PathBuf,
) -> anyhow::Result<()> {
    if n < k || k < 2 || dim == 0 {
        bail!("need n >= k >= 2 and dim >= 1 (got n={n}, k={k}, dim={dim})");
    }
    let rule_set = load_rules(rules.as_ref())?;
    let mut spec = SynthSpec::new(n, k, dim);
    if let Some(noise) = noise {
        spec = spec.with_noise(noise);
    }
    let (dataset, _) = synthesize_dataset::<f64>(&spec, rule_set.as_ref(), RngSeed(seed))?;

    std::fs::create_dir_all(&out)?;
    // Scores are ln-IC50 relative to the per-drug median, so exp(score)
    // round-trips through the response reader.
    let mut rows = Vec::with_capacity(n * k);
    for u in 0..dataset.n_units() {
        for (d, drug) in dataset.drugs().iter().enumerate() {
            rows.push(RawResponseRow {
                unit: dataset.units()[u].clone(),
                drug: drug.clone(),
                ic50: dataset.scores().score(u, d).exp(),
            });
        }
    }
    let responses_path = out.join("responses.csv");
    write_responses(&responses_path, &rows)?;
    let feature_rows: Vec<Vec<f64>> = (0..n).map(|u| dataset.feature_row(UnitId(u)).to_vec()).collect();
    let features_path = out.join("features.csv");
    write_features(&features_path, dataset.units(), &feature_rows)?;
    let flag_rows: Vec<Vec<bool>> = (0..n).map(|u| dataset.unit_flags(UnitId(u)).to_vec()).collect();
    let biomarkers_path = out.join("biomarkers.csv");
    write_biomarkers(&biomarkers_path, dataset.biomarker_keys(), dataset.units(), &flag_rows)?;

    println!(
        "synthesized {} units x {} drugs (dim {}) into {}",
        n,
        k,
        dim,
        out.display()
    );
    for p in [responses_path, features_path, biomarkers_path] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            responses,
            features,
            biomarkers,
            rules,
            state,
            reward,
            agent,
            seed,
            horizon,
            out,
            window,
        } => cmd_run(responses, features, biomarkers, rules, state, reward, agent, seed, horizon, out, window)
            .map(|()| ExitCode::SUCCESS),
        Command::Grid { config, jobs } => cmd_grid(config, jobs),
        Command::Synth {
            n,
            k,
            dim,
            seed,
            rules,
            noise,
            out,
        } => cmd_synth(n, k, dim, seed, rules, noise, out).map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
