//! Command-line front end. Every command takes a required `--seed`, writes
//! its outputs atomically, and exits 0 on success, 1 on IO or parse errors,
//! and 2 when a pipeline gives up.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::genpipe::{
    coverage, generate_scene, generate_task, judge_task, summarize_judgements, ChatClient, GenError, JudgeWeights,
    LlmMode, SceneGenConfig, TaskGenConfig, TaskRequest, PROMPT_VERSION,
};
use crate::geometry::TableBounds;
use crate::placement::{baseline_grid_layout, settle_and_check, settle_scene, DEFAULT_STABILITY_THRESHOLD};
use crate::scene_model::{parse_scene, serialize_scene, Catalog, Scene};
use crate::sensitivity::{
    fit_posterior, render_histograms, sample_posterior, summarize, Dataset, PosteriorConfig, ProposalKind,
    VariationSpace,
};
use crate::spatial_solver::SolverConfig;
use crate::task_model::{parse_task_spec, serialize_task_spec, Axis, Difficulty, EvalContext, PredicateKind, Subcategory, TaskSpec};
use crate::trajectory::{aggregate, parse_episodes, render_table, TaskBundle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PIPELINE: i32 = 2;

#[derive(Parser, Debug, Clone, PartialEq)]
#[command(name = "scenebench", version, about = "Scene and task generation, trajectory metrics and sensitivity analysis")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Live,
    Replay,
    Record,
}

impl From<ModeArg> for LlmMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Live => LlmMode::Live,
            ModeArg::Replay => LlmMode::Replay,
            ModeArg::Record => LlmMode::Record,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposalArg {
    Kde,
    Uniform,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct LlmArgs {
    #[arg(long, value_enum, default_value = "live")]
    pub llm_mode: ModeArg,
    /// Transcript directory for replay and record modes.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Model name; defaults to $LLM_MODEL, then gpt-4o.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub attempts: usize,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_bounds(s: &str) -> Result<TableBounds, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let [x0, x1, y0, y1] = v[..] else { return Err("expected x_min,x_max,y_min,y_max".into()) };
    TableBounds::new(x0, x1, y0, y1, 0.0).map_err(|e| e.to_string())
}

fn bounds_arg(b: &TableBounds) -> String {
    format!("{},{},{},{}", b.x_min, b.x_max, b.y_min, b.y_max)
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Generate a scene from a theme with the planner-solver loop.
    GenScene {
        #[arg(long)]
        theme: String,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        target_count: usize,
        /// Base collision margin in meters.
        #[arg(long)]
        margin: Option<f64>,
        /// Stability displacement threshold in meters.
        #[arg(long, default_value_t = DEFAULT_STABILITY_THRESHOLD)]
        threshold: f64,
        /// Table as x_min,x_max,y_min,y_max.
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<TableBounds>,
        /// Defaults to the output path with a .report.json extension.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Generate one task for a scene.
    GenTask {
        #[arg(long)]
        scene: PathBuf,
        /// Defaults to the scene file stem.
        #[arg(long)]
        scene_id: Option<String>,
        #[arg(long, value_parser = parse_enum::<Axis>)]
        axis: Axis,
        #[arg(long, value_parser = parse_enum::<Subcategory>)]
        subcategory: Subcategory,
        #[arg(long, value_parser = parse_enum::<Difficulty>, default_value = "simple")]
        difficulty: Difficulty,
        /// Previously generated task files.
        #[arg(long)]
        prior: Vec<PathBuf>,
        /// Objects tasks may not reference.
        #[arg(long, value_delimiter = ',')]
        forbidden: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Score task instructions against their conditions with an LLM judge.
    Judge {
        #[arg(long, required = true, num_args = 1..)]
        tasks: Vec<PathBuf>,
        /// Scene for coverage statistics.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Aggregate episode logs into success, score and motion metrics.
    Metrics {
        /// Episode log, one JSON record per line.
        #[arg(long)]
        episodes: PathBuf,
        /// Task files the episodes refer to by name.
        #[arg(long, required = true, num_args = 1..)]
        tasks: Vec<PathBuf>,
        /// Scene the tasks run in.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Also write the text table here.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Posterior over variation parameters given an outcome.
    Sensitivity {
        #[arg(long)]
        episodes: PathBuf,
        /// Variation space JSON.
        #[arg(long)]
        space: PathBuf,
        /// Condition on success (1) or failure (0).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
        outcome: u8,
        /// Posterior draws used for the summaries.
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, value_enum, default_value = "kde")]
        proposal: ProposalArg,
        /// Histogram bins per continuous dimension.
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Grid-layout baseline scene followed by the settle pass.
    Baseline {
        #[arg(long)]
        catalog: PathBuf,
        /// Catalog names, comma separated, filled row-major.
        #[arg(long, required = true, value_delimiter = ',')]
        objects: Vec<String>,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = DEFAULT_STABILITY_THRESHOLD)]
        threshold: f64,
        /// Table as x_min,x_max,y_min,y_max.
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<TableBounds>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a JSON list of argument lists concurrently.
    Batch {
        /// JSON array of argv arrays, each without the program name.
        #[arg(long)]
        manifest: PathBuf,
        /// Commands run at the same time.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
}

impl LlmArgs {
    fn push_args(&self, out: &mut Vec<String>) {
        let mode = match self.llm_mode {
            ModeArg::Live => "live",
            ModeArg::Replay => "replay",
            ModeArg::Record => "record",
        };
        out.extend(["--llm-mode".into(), mode.into(), "--attempts".into(), self.attempts.to_string()]);
        push_opt(out, "--fixtures", self.fixtures.as_ref().map(path_str));
        push_opt(out, "--model", self.model.clone());
    }

    fn client(&self) -> anyhow::Result<ChatClient> {
        ChatClient::from_env(self.llm_mode.into(), self.fixtures.as_deref(), self.model.as_deref())
            .context("configuring the LLM client")
    }
}

fn path_str(p: impl AsRef<Path>) -> String {
    p.as_ref().to_string_lossy().into_owned()
}

fn push_opt(out: &mut Vec<String>, flag: &str, v: Option<String>) {
    if let Some(v) = v {
        out.extend([flag.to_owned(), v]);
    }
}

fn enum_str<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

impl RunConfig {
    /// Arguments (without the program name) that parse back to `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut a: Vec<String> = Vec::new();
        let kv = |a: &mut Vec<String>, k: &str, v: String| a.extend([k.to_owned(), v]);
        match &self.command {
            Command::GenScene { theme, catalog, out, seed, target_count, margin, threshold, bounds, report, llm } => {
                a.push("gen-scene".into());
                kv(&mut a, "--theme", theme.clone());
                kv(&mut a, "--catalog", path_str(catalog));
                kv(&mut a, "--out", path_str(out));
                kv(&mut a, "--seed", seed.to_string());
                kv(&mut a, "--target-count", target_count.to_string());
                kv(&mut a, "--threshold", threshold.to_string());
                push_opt(&mut a, "--margin", margin.map(|m| m.to_string()));
                push_opt(&mut a, "--bounds", bounds.as_ref().map(bounds_arg));
                push_opt(&mut a, "--report", report.as_ref().map(path_str));
                llm.push_args(&mut a);
            }
            Command::GenTask { scene, scene_id, axis, subcategory, difficulty, prior, forbidden, out, seed, report, llm } => {
                a.push("gen-task".into());
                kv(&mut a, "--scene", path_str(scene));
                push_opt(&mut a, "--scene-id", scene_id.clone());
                kv(&mut a, "--axis", enum_str(axis));
                kv(&mut a, "--subcategory", enum_str(subcategory));
                kv(&mut a, "--difficulty", enum_str(difficulty));
                for p in prior {
                    kv(&mut a, "--prior", path_str(p));
                }
                if !forbidden.is_empty() {
                    kv(&mut a, "--forbidden", forbidden.join(","));
                }
                kv(&mut a, "--out", path_str(out));
                kv(&mut a, "--seed", seed.to_string());
                push_opt(&mut a, "--report", report.as_ref().map(path_str));
                llm.push_args(&mut a);
            }
            Command::Judge { tasks, scene, out, seed, llm } => {
                a.push("judge".into());
                a.push("--tasks".into());
                a.extend(tasks.iter().map(path_str));
                push_opt(&mut a, "--scene", scene.as_ref().map(path_str));
                kv(&mut a, "--out", path_str(out));
                kv(&mut a, "--seed", seed.to_string());
                llm.push_args(&mut a);
            }
            Command::Metrics { episodes, tasks, scene, out, seed, table } => {
                a.push("metrics".into());
                kv(&mut a, "--episodes", path_str(episodes));
                a.push("--tasks".into());
                a.extend(tasks.iter().map(path_str));
                kv(&mut a, "--scene", path_str(scene));
                kv(&mut a, "--out", path_str(out));
                kv(&mut a, "--seed", seed.to_string());
                push_opt(&mut a, "--table", table.as_ref().map(path_str));
            }
            Command::Sensitivity { episodes, space, outcome, samples, proposal, bins, out, seed } => {
                a.push("sensitivity".into());
                kv(&mut a, "--episodes", path_str(episodes));
                kv(&mut a, "--space", path_str(space));
                kv(&mut a, "--outcome", outcome.to_string());
                kv(&mut a, "--samples", samples.to_string());
                kv(&mut a, "--proposal", if *proposal == ProposalArg::Kde { "kde" } else { "uniform" }.into());
                kv(&mut a, "--bins", bins.to_string());
                kv(&mut a, "--out", path_str(out));
                kv(&mut a, "--seed", seed.to_string());
            }
            Command::Baseline { catalog, objects, rows, cols, threshold, bounds, out, seed, report } => {
                a.push("baseline".into());
                kv(&mut a, "--catalog", path_str(catalog));
                kv(&mut a, "--objects", objects.join(","));
                kv(&mut a, "--rows", rows.to_string());
                kv(&mut a, "--cols", cols.to_string());
                kv(&mut a, "--threshold", threshold.to_string());
                push_opt(&mut a, "--bounds", bounds.as_ref().map(bounds_arg));
                kv(&mut a, "--out", path_str(out));
                kv(&mut a, "--seed", seed.to_string());
                push_opt(&mut a, "--report", report.as_ref().map(path_str));
            }
            Command::Batch { manifest, jobs } => {
                a.push("batch".into());
                kv(&mut a, "--manifest", path_str(manifest));
                kv(&mut a, "--jobs", jobs.to_string());
            }
        }
        a
    }
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: EXIT_IO, error }
    }
}

fn pipeline(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_PIPELINE, error }
}

type CmdResult = Result<(), Failure>;

/// Writes via a temporary file in the target directory and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| anyhow!("writing {}: {}", path.display(), e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scene(path: &Path) -> anyhow::Result<Scene> {
    parse_scene(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_task(path: &Path) -> anyhow::Result<TaskSpec> {
    parse_task_spec(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_catalog(path: &Path) -> anyhow::Result<Catalog> {
    Catalog::load(path).with_context(|| format!("loading catalog {}", path.display()))
}

fn report_path(out: &Path, report: &Option<PathBuf>) -> PathBuf {
    report.clone().unwrap_or_else(|| out.with_extension("report.json"))
}

fn metadata(command: &str, seed: u64) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("command".to_owned(), command.to_owned()),
        ("seed".to_owned(), seed.to_string()),
        ("tool_version".to_owned(), env!("CARGO_PKG_VERSION").to_owned()),
    ])
}

/// Maps a generation error to its exit code, writing the report on
/// exhaustion.
fn gen_failure(e: GenError, report_out: &Path, meta: &BTreeMap<String, String>) -> Failure {
    match e {
        GenError::Exhausted(report) => {
            if let Err(w) = write_json(report_out, &serde_json::json!({"metadata": meta, "report": report})) {
                return w.into();
            }
            pipeline(anyhow!("gave up after {} attempts; last feedback: {}", report.attempts, report.feedback.last().map_or("", String::as_str)))
        }
        GenError::Judge(m) => pipeline(anyhow!(m)),
        other => anyhow::Error::new(other).into(),
    }
}

fn cmd_gen_scene(cmd: &Command) -> CmdResult {
    let Command::GenScene { theme, catalog, out, seed, target_count, margin, threshold, bounds, report, llm } = cmd else {
        unreachable!()
    };
    let catalog = load_catalog(catalog)?;
    let bounds = bounds.unwrap_or_default();
    let client = llm.client()?;
    let mut solver = SolverConfig::with_seed(*seed);
    if let Some(m) = margin {
        solver.base_margin = *m;
    }
    let cfg = SceneGenConfig {
        max_attempts: llm.attempts,
        target_count: *target_count,
        solver,
        stability_threshold: *threshold,
        ..SceneGenConfig::default()
    };
    let mut meta = metadata("gen-scene", *seed);
    meta.insert("prompt_version".into(), PROMPT_VERSION.into());
    let report_out = report_path(out, report);
    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
    let (mut scene, gen) =
        generate_scene(theme, &catalog, &bounds, &client, &cfg, &mut rng).map_err(|e| gen_failure(e, &report_out, &meta))?;
    scene.metadata.extend(meta.clone());
    write_atomic(out, &serialize_scene(&scene))?;
    write_json(&report_out, &serde_json::json!({"metadata": meta, "report": gen}))?;
    eprintln!("scene with {} objects after {} attempt(s) -> {}", scene.placements.len(), gen.attempts, out.display());
    Ok(())
}

fn cmd_gen_task(cmd: &Command) -> CmdResult {
    let Command::GenTask { scene, scene_id, axis, subcategory, difficulty, prior, forbidden, out, seed, report, llm } = cmd
    else {
        unreachable!()
    };
    let scene_doc = load_scene(scene)?;
    let scene_id = scene_id
        .clone()
        .unwrap_or_else(|| scene.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let prior: Vec<TaskSpec> = prior.iter().map(|p| load_task(p)).collect::<anyhow::Result<_>>()?;
    let client = llm.client()?;
    let cfg = TaskGenConfig {
        max_attempts: llm.attempts,
        forbidden: forbidden.iter().cloned().collect(),
        ..TaskGenConfig::default()
    };
    let request = TaskRequest { axis: *axis, subcategory: *subcategory, difficulty: *difficulty };
    let mut meta = metadata("gen-task", *seed);
    meta.insert("prompt_version".into(), PROMPT_VERSION.into());
    let report_out = report_path(out, report);
    let (mut task, gen) = generate_task(&scene_doc, &scene_id, request, &client, &prior, &cfg)
        .map_err(|e| gen_failure(e, &report_out, &meta))?;
    task.metadata.extend(meta.clone());
    write_atomic(out, &(serialize_task_spec(&task) + "\n"))?;
    write_json(&report_out, &serde_json::json!({"metadata": meta, "report": gen}))?;
    eprintln!("task '{}' after {} attempt(s) -> {}", task.name, gen.attempts, out.display());
    Ok(())
}

fn cmd_judge(cmd: &Command) -> CmdResult {
    let Command::Judge { tasks, scene, out, seed, llm } = cmd else { unreachable!() };
    let specs: Vec<TaskSpec> = tasks.iter().map(|p| load_task(p)).collect::<anyhow::Result<_>>()?;
    let client = llm.client()?;
    let weights = JudgeWeights::default();
    let mut results = Vec::new();
    let mut scores = Vec::new();
    for t in &specs {
        let s = judge_task(t, &client, weights, llm.attempts).map_err(|e| gen_failure(e, out, &BTreeMap::new()))?;
        results.push(serde_json::json!({"task": t.name, "scores": s}));
        scores.push(s);
    }
    let cov = match scene {
        Some(p) => Some(coverage(&specs, &load_scene(p)?, &PredicateKind::ALL).map_err(|e| anyhow!(e))?),
        None => None,
    };
    let mut meta = metadata("judge", *seed);
    meta.insert("prompt_version".into(), PROMPT_VERSION.into());
    meta.insert("weights".into(), "equal (1/6 each)".into());
    let summary = summarize_judgements(&scores);
    write_json(out, &serde_json::json!({"metadata": meta, "results": results, "summary": summary, "coverage": cov}))?;
    println!("{} tasks, mean alignment {:.3}, aligned {:.1}%", summary.tasks, summary.alignment, summary.aligned_pct);
    Ok(())
}

fn cmd_metrics(cmd: &Command) -> CmdResult {
    let Command::Metrics { episodes, tasks, scene, out, seed, table } = cmd else { unreachable!() };
    let eps = parse_episodes(&read(episodes)?).with_context(|| format!("parsing {}", episodes.display()))?;
    let ctx = EvalContext::from_scene(&load_scene(scene)?);
    let bundles: Vec<TaskBundle> =
        tasks.iter().map(|p| Ok(TaskBundle { spec: load_task(p)?, ctx: ctx.clone() })).collect::<anyhow::Result<_>>()?;
    let (overall, rows) = aggregate(&eps, &bundles).map_err(|e| anyhow!(e))?;
    let per_task: Vec<serde_json::Value> =
        rows.iter().map(|(name, s)| serde_json::json!({"task": name, "summary": s})).collect();
    write_json(out, &serde_json::json!({"metadata": metadata("metrics", *seed), "overall": overall, "per_task": per_task}))?;
    let mut table_rows = rows.clone();
    table_rows.push(("Overall".into(), overall));
    let text = render_table(&table_rows);
    if let Some(t) = table {
        write_atomic(t, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_sensitivity(cmd: &Command) -> CmdResult {
    let Command::Sensitivity { episodes, space, outcome, samples, proposal, bins, out, seed } = cmd else {
        unreachable!()
    };
    let eps = parse_episodes(&read(episodes)?).with_context(|| format!("parsing {}", episodes.display()))?;
    let space = VariationSpace::parse(&read(space)?).with_context(|| format!("parsing {}", space.display()))?;
    let dataset = Dataset::from_episodes(space.clone(), &eps).map_err(|e| anyhow!(e))?;
    let cfg = PosteriorConfig {
        proposal: if *proposal == ProposalArg::Kde { ProposalKind::Kde } else { ProposalKind::Uniform },
        ..PosteriorConfig::default()
    };
    let model = fit_posterior(&dataset, *outcome == 1, &cfg).map_err(|e| pipeline(anyhow!(e)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
    let draws = sample_posterior(&model, *samples, &mut rng);
    let result = summarize(&space, &model, draws);
    write_json(out, &serde_json::json!({"metadata": metadata("sensitivity", *seed), "posterior": result}))?;
    print!("{}", render_histograms(&result, *bins));
    println!("ESS {:.1} of {} records", result.ess, result.n_records);
    Ok(())
}

fn cmd_baseline(cmd: &Command) -> CmdResult {
    let Command::Baseline { catalog, objects, rows, cols, threshold, bounds, out, seed, report } = cmd else {
        unreachable!()
    };
    let catalog = load_catalog(catalog)?;
    let items = objects
        .iter()
        .map(|n| catalog.get(n).map(|e| (n.clone(), e.dims)).ok_or_else(|| anyhow!("'{n}' is not in the catalog")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let bounds = bounds.unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
    let scene = baseline_grid_layout(&items, *rows, *cols, &bounds, &mut rng).map_err(|e| pipeline(anyhow!(e)))?;
    let stability = settle_and_check(&scene, *threshold);
    let mut settled = settle_scene(&scene);
    let meta = metadata("baseline", *seed);
    settled.metadata.extend(meta.clone());
    write_atomic(out, &serialize_scene(&settled))?;
    write_json(&report_path(out, report), &serde_json::json!({"metadata": meta, "stability": stability}))?;
    eprintln!("baseline with {} objects, {} unstable -> {}", settled.placements.len(), stability.unstable.len(), out.display());
    Ok(())
}

fn cmd_batch(manifest: &Path, jobs: usize) -> CmdResult {
    let runs: Vec<Vec<String>> = serde_json::from_str(&read(manifest)?).context("manifest must be a JSON list of argument lists")?;
    let jobs = jobs.max(1);
    let mut codes = vec![EXIT_OK; runs.len()];
    for (chunk_runs, chunk_codes) in runs.chunks(jobs).zip(codes.chunks_mut(jobs)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_runs
                .iter()
                .map(|args| {
                    s.spawn(move || {
                        let argv = std::iter::once("scenebench".to_owned()).chain(args.iter().cloned());
                        match RunConfig::try_parse_from(argv) {
                            Ok(cfg) if matches!(cfg.command, Command::Batch { .. }) => {
                                eprintln!("nested batch runs are not allowed");
                                EXIT_IO
                            }
                            Ok(cfg) => execute(&cfg),
                            Err(e) => {
                                eprintln!("{e}");
                                EXIT_IO
                            }
                        }
                    })
                })
                .collect();
            for (h, c) in handles.into_iter().zip(chunk_codes.iter_mut()) {
                *c = h.join().unwrap_or(EXIT_IO);
            }
        });
    }
    for (i, c) in codes.iter().enumerate() {
        eprintln!("run {i}: exit {c}");
    }
    match codes.iter().copied().max().unwrap_or(EXIT_OK) {
        EXIT_OK => Ok(()),
        code => Err(Failure { code, error: anyhow!("{} of {} runs failed", codes.iter().filter(|c| **c != 0).count(), codes.len()) }),
    }
}

/// Runs one parsed command and returns its exit code.
pub fn execute(cfg: &RunConfig) -> i32 {
    let result = match &cfg.command {
        c @ Command::GenScene { .. } => cmd_gen_scene(c),
        c @ Command::GenTask { .. } => cmd_gen_task(c),
        c @ Command::Judge { .. } => cmd_judge(c),
        c @ Command::Metrics { .. } => cmd_metrics(c),
        c @ Command::Sensitivity { .. } => cmd_sensitivity(c),
        c @ Command::Baseline { .. } => cmd_baseline(c),
        Command::Batch { manifest, jobs } => cmd_batch(manifest, *jobs),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

/// Parses `args` (including the program name) and runs the command. Usage
/// errors exit 1; help and version exit 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => execute(&cfg),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
