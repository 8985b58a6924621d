use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mecdc_core::ScenarioConfig;
use mecdc_harness::export::{self, Manifest, CODE_VERSION};
use mecdc_harness::plan::{self, build_scenario, evaluate_controller, make_controller, run_cell, RunOptions};
use mecdc_harness::{matching_effectiveness_study, run_plan, ControllerKind, ExperimentPlan, ScenarioCell};
use mecdc_sac::{checkpoint, Agent, SacHyper};

#[derive(Parser)]
#[command(name = "mecdc", version, about = "UAV MEC and data-collection experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one controller on one seed, then evaluate it.
    Train(TrainArgs),
    /// Evaluate a controller, loading a checkpoint for learned ones.
    Evaluate(EvalArgs),
    /// Run a controller x scenario x seed grid.
    Sweep(SweepArgs),
    /// Compare the six association strategies under random motion.
    MatchStudy(StudyArgs),
    /// Re-run the experiment described by a manifest.
    Export(ExportArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sac_tma")]
    controller: ControllerKind,
    #[arg(long, default_value_t = 1500)]
    episodes: usize,
    #[arg(long, default_value_t = 50)]
    eval_episodes: usize,
    /// Overrides the warmup step count.
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "distance_greedy")]
    controller: ControllerKind,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    /// Checkpoint for learned controllers.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    /// MEC-user count M.
    MecUsers,
    /// Per-UAV capacity.
    Capacity,
    /// Just the given scenario.
    None,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "sac_tma,sac_tma_greedy,distance_greedy,random")]
    controller: Vec<ControllerKind>,
    #[arg(long, default_value_t = 1500)]
    episodes: usize,
    #[arg(long, default_value_t = 50)]
    eval_episodes: usize,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    sweep: Sweep,
    /// Sweep values, e.g. 15,20,25,30.
    #[arg(long, value_delimiter = ',')]
    values: Vec<usize>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 300)]
    slots: usize,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ScenarioConfig::parse(&text)?)
        }
    }
}

fn hyper(warmup: Option<usize>) -> SacHyper {
    let mut h = SacHyper::default();
    if let Some(w) = warmup {
        h.warmup_steps = w;
    }
    h
}

fn train(a: TrainArgs) -> Result<()> {
    let config = load_config(a.common.config.as_deref())?;
    if !a.controller.is_learning() {
        bail!("{} does not learn; use evaluate", a.controller);
    }
    let dir = export::cell_dir(&a.common.out_dir, "cli", a.controller, a.seed);
    export::ensure_dir(&dir)?;
    let cell = ScenarioCell {
        label: "cli".into(),
        config: config.clone(),
    };
    let h = hyper(a.warmup);
    let opts = RunOptions {
        checkpoint_every: a.checkpoint_every,
        checkpoint_dir: a.checkpoint_every.map(|_| dir.clone()),
    };
    let run = run_cell(&cell, a.controller, a.seed, a.episodes, a.eval_episodes, &h, &opts, &mut |e| {
        eprintln!(
            "episode {:5}  reward {:10.3}  r_l {:9.3}  r_d {:9.3}  r_p {:9.3}",
            e.episode, e.sum_reward, e.r_l, e.r_d, e.r_p
        );
    })?;
    if let Some(agent) = &run.agent {
        checkpoint::save(agent, &dir.join("final.bin"))?;
    }
    if let Some(c) = &run.curve {
        export::write_curve(&dir.join("curve.csv"), c)?;
    }
    export::write_metrics(&dir.join("metrics.csv"), std::slice::from_ref(&run.row))?;
    export::write_episode(&dir, &run.sample)?;
    Manifest {
        code_version: CODE_VERSION.into(),
        controllers: vec![a.controller],
        seeds: vec![a.seed],
        episodes: a.episodes,
        eval_window: a.eval_episodes,
        hyper: h,
        scenario: config,
    }
    .save(&dir.join("manifest.toml"))?;
    println!("{}", dir.display());
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let config = load_config(a.common.config.as_deref())?;
    let scenario = build_scenario(&config, a.seed)?;
    let agent: Option<Agent> = match (&a.checkpoint, a.controller.is_learning()) {
        (Some(p), true) => Some(checkpoint::load(p, a.seed)?),
        (None, true) => bail!("{} needs --checkpoint", a.controller),
        _ => None,
    };
    let mut c = make_controller(a.controller, a.seed, agent)?;
    let (row, sample) = evaluate_controller(&scenario, "cli", c.as_mut(), a.seed, a.episodes)?;
    let dir = export::cell_dir(&a.common.out_dir, "eval", a.controller, a.seed);
    export::ensure_dir(&dir)?;
    export::write_metrics(&dir.join("metrics.csv"), std::slice::from_ref(&row))?;
    export::write_episode(&dir, &sample)?;
    println!(
        "{}: reward {:.3}  energy/uav/step {:.2} J  completion {:.1}%  dc {:.1}%",
        row.controller, row.sum_reward, row.avg_energy_per_uav_step, row.completion_rate, row.dc_rate
    );
    Ok(())
}

fn write_plan(out: &Path, plan: &ExperimentPlan, manifest: &Manifest) -> Result<()> {
    export::ensure_dir(out)?;
    let r = run_plan(plan, |row| {
        eprintln!(
            "{} {} seed {}: reward {:.3}",
            row.scenario, row.controller, row.seed, row.sum_reward
        )
    })?;
    export::write_metrics(&out.join("metrics.csv"), &r.rows)?;
    export::write_aggregates(&out.join("aggregates.csv"), &r.aggregates)?;
    for (kind, scenario, seed, log) in &r.curves {
        let d = export::cell_dir(out, scenario, *kind, *seed);
        export::ensure_dir(&d)?;
        export::write_curve(&d.join("curve.csv"), log)?;
    }
    manifest.save(&out.join("manifest.toml"))?;
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let config = load_config(a.common.config.as_deref())?;
    let cells = match a.sweep {
        Sweep::MecUsers => plan::mec_user_sweep(&config, &a.values),
        Sweep::Capacity => plan::capacity_sweep(&config, &a.values),
        Sweep::None => vec![ScenarioCell {
            label: "base".into(),
            config: config.clone(),
        }],
    };
    if cells.is_empty() {
        bail!("--values is empty");
    }
    let p = ExperimentPlan {
        cells,
        controllers: a.controller.clone(),
        seeds: a.seeds.clone(),
        episodes: a.episodes,
        eval_window: a.eval_episodes,
        hyper: hyper(a.warmup),
    };
    let m = Manifest {
        code_version: CODE_VERSION.into(),
        controllers: a.controller,
        seeds: a.seeds,
        episodes: a.episodes,
        eval_window: a.eval_episodes,
        hyper: p.hyper.clone(),
        scenario: config,
    };
    write_plan(&a.common.out_dir, &p, &m)
}

fn match_study(a: StudyArgs) -> Result<()> {
    let config = load_config(a.common.config.as_deref())?;
    let r = matching_effectiveness_study(&config, a.slots, &a.seeds)?;
    let out = &a.common.out_dir;
    export::ensure_dir(out)?;
    let mut w = csv::Writer::from_path(out.join("match_study_samples.csv"))?;
    for s in &r.samples {
        w.serialize(s)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("match_study_summary.csv"))?;
    for s in &r.summaries {
        w.serialize(s)?;
        println!(
            "{:20} mean sum rate {:12.1} bit/s   {:.2e} s/slot",
            s.strategy.as_str(),
            s.mean_sum_rate,
            s.mean_seconds_per_slot
        );
    }
    w.flush()?;
    Ok(())
}

fn export_cmd(a: ExportArgs) -> Result<()> {
    let m = Manifest::load(&a.manifest)?;
    let p = ExperimentPlan {
        cells: vec![ScenarioCell {
            label: "base".into(),
            config: m.scenario.clone(),
        }],
        controllers: m.controllers.clone(),
        seeds: m.seeds.clone(),
        episodes: m.episodes,
        eval_window: m.eval_window,
        hyper: m.hyper.clone(),
    };
    write_plan(&a.out_dir, &p, &m)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train(a) => train(a),
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::MatchStudy(a) => match_study(a),
        Cmd::Export(a) => export_cmd(a),
    }
}
