//! Command-line front end: reproducible runs wiring generation,
//! training, evaluation, explanation, and sweeps.
//!
//! Settings resolve in three layers: a named preset supplies defaults, a
//! TOML config file overrides the preset, and explicit flags override
//! both. Every run writes `run_manifest.json` with the fully resolved
//! configuration, enough to replay the run exactly.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::eval::{
    extract_explanation, link_eval, sparsity_sweep, write_curve_csv, write_explanations_jsonl,
    write_link_report_jsonl, SweepConfig,
};
use crate::model::{Hyperparams, ModelParams};
use crate::numcore::subseed;
use crate::synth::{
    explanation_recall, generate, read_ground_truth, write_ground_truth, PlantedRuleConfig,
};
use crate::tempgraph::{
    chronological_split, inductive_mask, load_jodie_csv, write_jodie_csv, write_split_manifest,
    EventId, Splits, TemporalGraph,
};
use crate::trainer::{train, write_metrics_jsonl, TrainConfig};
use crate::TgibError;

#[derive(Parser)]
#[command(
    name = "tgib",
    version,
    about = "Self-explaining temporal link prediction",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic interaction stream with planted explanations
    GenSynth(GenSynthArgs),
    /// Train a model on an interaction log
    Train(TrainArgs),
    /// Report link-prediction average precision over seeds
    EvalLink(EvalLinkArgs),
    /// Rank each prediction's supporting past events
    Explain(ExplainArgs),
    /// Trace explanation fidelity across sparsity levels
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Small dimensions and a fast learning rate for laptop-scale runs
    Desk,
    /// Full-scale hyperparameters
    Paper,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    fn train_config(self) -> TrainConfig {
        match self {
            Preset::Desk => TrainConfig {
                lr: 1e-3,
                hp: Hyperparams {
                    embed_dim: 8,
                    time_dim: 8,
                    edge_feat_dim: 1,
                    hops: 2,
                    neighbor_budget: 10,
                    dropout: 0.1,
                },
                ..TrainConfig::default()
            },
            Preset::Paper => TrainConfig {
                lr: 1e-5,
                hp: Hyperparams {
                    embed_dim: 32,
                    time_dim: 32,
                    edge_feat_dim: 1,
                    hops: 2,
                    neighbor_budget: 20,
                    dropout: 0.1,
                },
                ..TrainConfig::default()
            },
        }
    }

    fn synth_config(self) -> PlantedRuleConfig {
        match self {
            Preset::Desk => PlantedRuleConfig::default(),
            Preset::Paper => PlantedRuleConfig {
                num_users: 400,
                num_hubs: 50,
                num_targets: 700,
                num_background_events: 120,
                horizon: 14000.0,
                window: 350.0,
                neighbor_budget: 20,
                ..PlantedRuleConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Transductive,
    Inductive,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Transductive => "transductive",
            Mode::Inductive => "inductive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitName {
    Val,
    Test,
}

impl SplitName {
    fn name(self) -> &'static str {
        match self {
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    fn events(self, splits: &Splits) -> &[EventId] {
        match self {
            SplitName::Val => &splits.val,
            SplitName::Test => &splits.test,
        }
    }
}

#[derive(Args)]
struct CommonOpts {
    /// TOML config file; explicit flags still win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named defaults to start from
    #[arg(long, global = true, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Where artifacts go (default: $TGIB_OUT_DIR, else ./tgib-out)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenSynthArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    num_users: Option<usize>,
    #[arg(long)]
    num_hubs: Option<usize>,
    #[arg(long)]
    num_targets: Option<usize>,
    #[arg(long)]
    num_background_events: Option<usize>,
    #[arg(long)]
    triggers_per_target: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    neighbor_budget: Option<usize>,
    #[arg(long)]
    min_retained: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Interaction log (user_id,item_id,timestamp,state_label,feat...)
    data: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long, value_enum, default_value_t = Mode::Transductive)]
    mode: Mode,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    mi_weight: Option<f64>,
    #[arg(long)]
    num_negatives: Option<usize>,
    #[arg(long)]
    mask_prior: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    temperature_decay: Option<f64>,
    #[arg(long)]
    val_every: Option<usize>,
    #[arg(long)]
    literal_negative_loss: Option<bool>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    time_dim: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    neighbor_budget: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args)]
struct EvalLinkArgs {
    data: PathBuf,
    /// Checkpoint written by `train`
    #[arg(long, value_name = "CHECKPOINT")]
    model: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long, value_enum, default_value_t = Mode::Transductive)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    split: SplitName,
    /// Negative-sampling seeds, comma separated
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args)]
struct ExplainArgs {
    data: PathBuf,
    #[arg(long, value_name = "CHECKPOINT")]
    model: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long, value_enum, default_value_t = Mode::Transductive)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    split: SplitName,
    /// Fraction of candidates to keep
    #[arg(long)]
    sparsity: Option<f64>,
    /// Explain only the first N targets (0 = all)
    #[arg(long)]
    limit: Option<usize>,
    /// Ground-truth sidecar; when given, mean recall is reported
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    data: PathBuf,
    #[arg(long, value_name = "CHECKPOINT")]
    model: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long, value_enum, default_value_t = Mode::Transductive)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    split: SplitName,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    max_sparsity: Option<f64>,
    /// Sweep only the first N targets (0 = all)
    #[arg(long)]
    limit: Option<usize>,
    /// Also sweep a random-ranking baseline and report the gap
    #[arg(long)]
    random_baseline: bool,
}

enum CliError {
    MissingFile(PathBuf),
    Tgib(TgibError),
}

impl From<TgibError> for CliError {
    fn from(e: TgibError) -> Self {
        CliError::Tgib(e)
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingFile(path.to_path_buf()))
    }
}

fn resolve_out_dir(flag: Option<PathBuf>, env: Option<OsString>) -> PathBuf {
    flag.or_else(|| env.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("tgib-out"))
}

fn io_not_found(err: &TgibError) -> bool {
    use crate::numcore::CheckpointError;
    use crate::tempgraph::GraphError;
    let kind = |e: &std::io::Error| e.kind() == std::io::ErrorKind::NotFound;
    match err {
        TgibError::Io(e) => kind(e),
        TgibError::Graph(GraphError::Io(e)) => kind(e),
        TgibError::Graph(GraphError::Csv(e)) => {
            matches!(e.kind(), csv::ErrorKind::Io(io) if kind(io))
        }
        TgibError::Checkpoint(CheckpointError::Io(e)) => kind(e),
        _ => false,
    }
}

/// Parses real argv and runs; the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point. Exit codes: 0 success, 2 usage error, 3 missing
/// file, 4 numerical divergence, 1 anything else.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(CliError::MissingFile(path)) => {
            eprintln!("error: missing file: {}", path.display());
            3
        }
        Err(CliError::Tgib(e)) => {
            eprintln!("error: {e}");
            if io_not_found(&e) {
                3
            } else if matches!(e, TgibError::Diverged { .. }) {
                4
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::GenSynth(args) => gen_synth(args),
        Command::Train(args) => run_train(args),
        Command::EvalLink(args) => run_eval_link(args),
        Command::Explain(args) => run_explain(args),
        Command::Sweep(args) => run_sweep(args),
    }
}

fn load_toml(path: &Path) -> Result<toml::Table, CliError> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).map_err(TgibError::from)?;
    text.parse::<toml::Table>()
        .map_err(|e| TgibError::Config(format!("{}: {e}", path.display())).into())
}

fn section<'a>(doc: &'a toml::Table, name: &str) -> Result<Option<&'a toml::Table>, TgibError> {
    match doc.get(name) {
        None => Ok(None),
        Some(toml::Value::Table(t)) => Ok(Some(t)),
        Some(other) => Err(TgibError::Config(format!(
            "config section [{name}] must be a table, found {}",
            other.type_str()
        ))),
    }
}

fn as_f64(section: &str, key: &str, v: &toml::Value) -> Result<f64, TgibError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(TgibError::Config(format!(
            "{section}.{key} must be a number, found {}",
            other.type_str()
        ))),
    }
}

fn as_usize(section: &str, key: &str, v: &toml::Value) -> Result<usize, TgibError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(TgibError::Config(format!(
            "{section}.{key} must be a non-negative integer, found {other}"
        ))),
    }
}

fn as_u64(section: &str, key: &str, v: &toml::Value) -> Result<u64, TgibError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(TgibError::Config(format!(
            "{section}.{key} must be a non-negative integer, found {other}"
        ))),
    }
}

fn as_bool(section: &str, key: &str, v: &toml::Value) -> Result<bool, TgibError> {
    match v {
        toml::Value::Boolean(b) => Ok(*b),
        other => Err(TgibError::Config(format!(
            "{section}.{key} must be a boolean, found {other}"
        ))),
    }
}

fn apply_train_section(cfg: &mut TrainConfig, sec: &toml::Table) -> Result<(), TgibError> {
    for (key, v) in sec {
        match key.as_str() {
            "epochs" => cfg.epochs = as_usize("train", key, v)?,
            "lr" => cfg.lr = as_f64("train", key, v)?,
            "mi_weight" => cfg.mi_weight = as_f64("train", key, v)?,
            "num_negatives" => cfg.num_negatives = as_usize("train", key, v)?,
            "mask_prior" => cfg.mask_prior = as_f64("train", key, v)?,
            "temperature" => cfg.temperature = as_f64("train", key, v)?,
            "temperature_decay" => cfg.temperature_decay = as_f64("train", key, v)?,
            "seed" => cfg.seed = as_u64("train", key, v)?,
            "literal_negative_loss" => {
                cfg.literal_negative_loss = as_bool("train", key, v)?;
            }
            "val_every" => cfg.val_every = as_usize("train", key, v)?,
            "embed_dim" => cfg.hp.embed_dim = as_usize("train", key, v)?,
            "time_dim" => cfg.hp.time_dim = as_usize("train", key, v)?,
            "hops" => cfg.hp.hops = as_usize("train", key, v)?,
            "neighbor_budget" => cfg.hp.neighbor_budget = as_usize("train", key, v)?,
            "dropout" => cfg.hp.dropout = as_f64("train", key, v)?,
            other => {
                return Err(TgibError::Config(format!("unknown config key train.{other}")));
            }
        }
    }
    Ok(())
}

fn apply_synth_section(cfg: &mut PlantedRuleConfig, sec: &toml::Table) -> Result<(), TgibError> {
    for (key, v) in sec {
        match key.as_str() {
            "num_users" => cfg.num_users = as_usize("synth", key, v)?,
            "num_hubs" => cfg.num_hubs = as_usize("synth", key, v)?,
            "num_targets" => cfg.num_targets = as_usize("synth", key, v)?,
            "num_background_events" => {
                cfg.num_background_events = as_usize("synth", key, v)?
            }
            "triggers_per_target" => cfg.triggers_per_target = as_usize("synth", key, v)?,
            "noise_rate" => cfg.noise_rate = as_f64("synth", key, v)?,
            "window" => cfg.window = as_f64("synth", key, v)?,
            "horizon" => cfg.horizon = as_f64("synth", key, v)?,
            "hops" => cfg.hops = as_usize("synth", key, v)?,
            "neighbor_budget" => cfg.neighbor_budget = as_usize("synth", key, v)?,
            "min_retained" => cfg.min_retained = as_f64("synth", key, v)?,
            "seed" => cfg.seed = as_u64("synth", key, v)?,
            other => {
                return Err(TgibError::Config(format!("unknown config key synth.{other}")));
            }
        }
    }
    Ok(())
}

fn prepare_out_dir(common: &CommonOpts) -> Result<PathBuf, TgibError> {
    let dir = resolve_out_dir(common.out_dir.clone(), std::env::var_os("TGIB_OUT_DIR"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_manifest(dir: &Path, manifest: &serde_json::Value) -> Result<(), TgibError> {
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join("run_manifest.json"), text + "\n")?;
    Ok(())
}

fn gen_synth(args: GenSynthArgs) -> Result<String, CliError> {
    let mut cfg = args.common.preset.synth_config();
    if let Some(path) = &args.common.config {
        let doc = load_toml(path)?;
        if let Some(sec) = section(&doc, "synth")? {
            apply_synth_section(&mut cfg, sec)?;
        }
    }
    macro_rules! flag {
        ($field:ident) => {
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        };
    }
    flag!(num_users);
    flag!(num_hubs);
    flag!(num_targets);
    flag!(num_background_events);
    flag!(triggers_per_target);
    flag!(noise_rate);
    flag!(window);
    flag!(horizon);
    flag!(hops);
    flag!(neighbor_budget);
    flag!(min_retained);
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }

    let dir = prepare_out_dir(&args.common)?;
    let (graph, truth, report) = generate(&cfg)?;
    let csv = dir.join("events.csv");
    write_jodie_csv(&csv, &graph).map_err(TgibError::from)?;
    write_ground_truth(dir.join("ground_truth.jsonl"), &truth)?;
    write_manifest(
        &dir,
        &serde_json::json!({
            "command": "gen-synth",
            "preset": args.common.preset.name(),
            "out_dir": dir,
            "synth": cfg,
            "report": report,
        }),
    )?;
    Ok(format!(
        "generated {} events, {} explained targets ({:.1}% retained) -> {}",
        report.num_events,
        report.num_truth_targets,
        report.retained_fraction * 100.0,
        dir.display()
    ))
}

/// Loads the log, installs zero node features at the model width, and
/// splits chronologically (masking a node subset in inductive mode).
fn load_prepared(
    data: &Path,
    embed_dim: usize,
    mode: Mode,
    seed: u64,
) -> Result<(TemporalGraph, Splits), CliError> {
    require_file(data)?;
    let (mut graph, _) = load_jodie_csv(data, true).map_err(TgibError::from)?;
    graph.ensure_node_features(embed_dim);
    let splits = chronological_split(&graph).map_err(TgibError::from)?;
    let splits = match mode {
        Mode::Transductive => splits,
        Mode::Inductive => inductive_mask(&graph, &splits, seed).map_err(TgibError::from)?,
    };
    Ok((graph, splits))
}

fn run_train(args: TrainArgs) -> Result<String, CliError> {
    let mut cfg = args.common.preset.train_config();
    if let Some(path) = &args.common.config {
        let doc = load_toml(path)?;
        if let Some(sec) = section(&doc, "train")? {
            apply_train_section(&mut cfg, sec)?;
        }
    }
    macro_rules! flag {
        ($field:ident) => {
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        };
        (hp $field:ident) => {
            if let Some(v) = args.$field {
                cfg.hp.$field = v;
            }
        };
    }
    flag!(epochs);
    flag!(lr);
    flag!(mi_weight);
    flag!(num_negatives);
    flag!(mask_prior);
    flag!(temperature);
    flag!(temperature_decay);
    flag!(val_every);
    flag!(literal_negative_loss);
    flag!(hp embed_dim);
    flag!(hp time_dim);
    flag!(hp hops);
    flag!(hp neighbor_budget);
    flag!(hp dropout);
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }

    let (graph, splits) = load_prepared(&args.data, cfg.hp.embed_dim, args.mode, cfg.seed)?;
    cfg.hp.edge_feat_dim = graph.edge_feat_dim();

    let dir = prepare_out_dir(&args.common)?;
    write_manifest(
        &dir,
        &serde_json::json!({
            "command": "train",
            "preset": args.common.preset.name(),
            "data": args.data,
            "mode": args.mode.name(),
            "out_dir": dir,
            "train": cfg,
        }),
    )?;
    let report = train(&graph, &splits, &cfg)?;
    write_metrics_jsonl(dir.join("metrics.jsonl"), &report.metrics)?;
    write_split_manifest(dir.join("split_manifest.jsonl"), &splits).map_err(TgibError::from)?;
    report.best.save(dir.join("model.tgck"))?;
    report.params.save(dir.join("model_final.tgck"))?;
    let val_note = match report.best_val_ap {
        Some(ap) => format!("best val AP {ap:.4}"),
        None => "no validation split".into(),
    };
    Ok(format!(
        "trained {} epochs on {} events, {val_note} -> {}",
        cfg.epochs,
        splits.train.len(),
        dir.display()
    ))
}

fn run_eval_link(args: EvalLinkArgs) -> Result<String, CliError> {
    let mut seeds: Vec<u64> = vec![1, 2, 3, 4, 5];
    if let Some(path) = &args.common.config {
        let doc = load_toml(path)?;
        if let Some(sec) = section(&doc, "eval")? {
            for (key, v) in sec {
                match key.as_str() {
                    "seeds" => {
                        let arr = v.as_array().ok_or_else(|| {
                            TgibError::Config("eval.seeds must be an array".into())
                        })?;
                        seeds = arr
                            .iter()
                            .map(|x| as_u64("eval", "seeds", x))
                            .collect::<Result<_, _>>()?;
                    }
                    other => {
                        return Err(TgibError::Config(format!(
                            "unknown config key eval.{other}"
                        ))
                        .into());
                    }
                }
            }
        }
    }
    if let Some(list) = args.seeds {
        seeds = list;
    }
    if seeds.is_empty() {
        return Err(TgibError::Config("seeds list is empty".into()).into());
    }

    require_file(&args.model)?;
    let params = ModelParams::load(&args.model)?;
    let split_seed = args.common.seed.unwrap_or(params_seed_default());
    let (graph, splits) = load_prepared(&args.data, params.hp.embed_dim, args.mode, split_seed)?;
    let events = args.split.events(&splits);
    let report = link_eval(&graph, &params, events, &seeds)?;

    let dir = prepare_out_dir(&args.common)?;
    write_link_report_jsonl(dir.join("link_metrics.jsonl"), &report)?;
    write_manifest(
        &dir,
        &serde_json::json!({
            "command": "eval-link",
            "preset": args.common.preset.name(),
            "data": args.data,
            "model": args.model,
            "mode": args.mode.name(),
            "split": args.split.name(),
            "seeds": seeds,
            "out_dir": dir,
            "hyperparams": params.hp,
        }),
    )?;
    Ok(format!(
        "{} AP {:.4} +/- {:.4} over {} seeds ({} events) -> {}",
        args.split.name(),
        report.mean_ap,
        report.std_ap,
        report.per_seed.len(),
        report.num_events,
        dir.display()
    ))
}

fn params_seed_default() -> u64 {
    TrainConfig::default().seed
}

fn run_explain(args: ExplainArgs) -> Result<String, CliError> {
    let mut sparsity = 0.3;
    let mut limit = 0usize;
    if let Some(path) = &args.common.config {
        let doc = load_toml(path)?;
        if let Some(sec) = section(&doc, "explain")? {
            for (key, v) in sec {
                match key.as_str() {
                    "sparsity" => sparsity = as_f64("explain", key, v)?,
                    "limit" => limit = as_usize("explain", key, v)?,
                    other => {
                        return Err(TgibError::Config(format!(
                            "unknown config key explain.{other}"
                        ))
                        .into());
                    }
                }
            }
        }
    }
    if let Some(s) = args.sparsity {
        sparsity = s;
    }
    if let Some(n) = args.limit {
        limit = n;
    }

    require_file(&args.model)?;
    let params = ModelParams::load(&args.model)?;
    let split_seed = args.common.seed.unwrap_or(params_seed_default());
    let (graph, splits) = load_prepared(&args.data, params.hp.embed_dim, args.mode, split_seed)?;
    let mut events: Vec<EventId> = args.split.events(&splits).to_vec();
    if limit > 0 {
        events.truncate(limit);
    }
    if events.is_empty() {
        return Err(TgibError::EmptySplit {
            part: "explanation targets",
        }
        .into());
    }

    let mut explanations = Vec::with_capacity(events.len());
    let mut matches = 0usize;
    for &id in &events {
        let exp = extract_explanation(&graph, &params, id, sparsity)?;
        if exp.matches_full {
            matches += 1;
        }
        explanations.push(exp);
    }
    let match_rate = matches as f64 / events.len() as f64;

    let recall_note = match &args.ground_truth {
        Some(path) => {
            require_file(path)?;
            let truth = read_ground_truth(path)?;
            let mut sum = 0.0;
            let mut counted = 0usize;
            for exp in &explanations {
                if truth.truths.contains_key(&exp.target) {
                    let ranked: Vec<EventId> =
                        exp.ranked.iter().map(|r| r.event_id).collect();
                    sum += explanation_recall(&truth, exp.target, &ranked)?;
                    counted += 1;
                }
            }
            if counted == 0 {
                ", no explained targets in ground truth".to_string()
            } else {
                format!(", mean recall {:.4} over {counted} targets", sum / counted as f64)
            }
        }
        None => String::new(),
    };

    let dir = prepare_out_dir(&args.common)?;
    write_explanations_jsonl(dir.join("explanations.jsonl"), &explanations)?;
    write_manifest(
        &dir,
        &serde_json::json!({
            "command": "explain",
            "preset": args.common.preset.name(),
            "data": args.data,
            "model": args.model,
            "mode": args.mode.name(),
            "split": args.split.name(),
            "sparsity": sparsity,
            "limit": limit,
            "ground_truth": args.ground_truth,
            "out_dir": dir,
            "hyperparams": params.hp,
        }),
    )?;
    Ok(format!(
        "explained {} events at sparsity {sparsity}, decision match {match_rate:.4}{recall_note} -> {}",
        events.len(),
        dir.display()
    ))
}

fn run_sweep(args: SweepArgs) -> Result<String, CliError> {
    let mut cfg = SweepConfig::default();
    let mut limit = 0usize;
    if let Some(path) = &args.common.config {
        let doc = load_toml(path)?;
        if let Some(sec) = section(&doc, "sweep")? {
            for (key, v) in sec {
                match key.as_str() {
                    "levels" => cfg.num_levels = as_usize("sweep", key, v)?,
                    "max_sparsity" => cfg.max_sparsity = as_f64("sweep", key, v)?,
                    "limit" => limit = as_usize("sweep", key, v)?,
                    other => {
                        return Err(TgibError::Config(format!(
                            "unknown config key sweep.{other}"
                        ))
                        .into());
                    }
                }
            }
        }
    }
    if let Some(n) = args.levels {
        cfg.num_levels = n;
    }
    if let Some(s) = args.max_sparsity {
        cfg.max_sparsity = s;
    }
    if let Some(n) = args.limit {
        limit = n;
    }

    require_file(&args.model)?;
    let params = ModelParams::load(&args.model)?;
    let seed = args.common.seed.unwrap_or(params_seed_default());
    let (graph, splits) = load_prepared(&args.data, params.hp.embed_dim, args.mode, seed)?;
    let mut events: Vec<EventId> = args.split.events(&splits).to_vec();
    if limit > 0 {
        events.truncate(limit);
    }

    let report = sparsity_sweep(&graph, &params, &events, cfg)?;
    let dir = prepare_out_dir(&args.common)?;
    write_curve_csv(dir.join("curve.csv"), &report.points)?;

    let baseline_note = if args.random_baseline {
        let random_cfg = SweepConfig {
            shuffle_seed: Some(subseed(seed, 9)),
            ..cfg
        };
        let random = sparsity_sweep(&graph, &params, &events, random_cfg)?;
        write_curve_csv(dir.join("curve_random.csv"), &random.points)?;
        format!(
            ", random baseline {:.4} (gap {:.4})",
            random.auc_normalized,
            report.auc_normalized - random.auc_normalized
        )
    } else {
        String::new()
    };

    write_manifest(
        &dir,
        &serde_json::json!({
            "command": "sweep",
            "preset": args.common.preset.name(),
            "data": args.data,
            "model": args.model,
            "mode": args.mode.name(),
            "split": args.split.name(),
            "levels": cfg.num_levels,
            "max_sparsity": cfg.max_sparsity,
            "limit": limit,
            "random_baseline": args.random_baseline,
            "seed": seed,
            "out_dir": dir,
            "hyperparams": params.hp,
        }),
    )?;
    Ok(format!(
        "swept {} levels over {} events, fidelity AUC {:.4}{baseline_note} -> {}",
        report.points.len(),
        report.num_events,
        report.auc_normalized,
        dir.display()
    ))
}
