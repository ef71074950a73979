use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::json;
use specseg::channel::{channel_delta, dcr_select, entropy_scores, ncr_select, std_scores};
use specseg::eval::{self, FilterCriteria};
use specseg::pipeline::{self, default_keep_m, default_keep_n};
use specseg::synth::{self, PlantedParams, SceneSpec};
use specseg::{io, FgBgConfig, InstanceConfig, KMeansParams, LabelMask, MetricKind};

use crate::budget::Budget;
use crate::error::{CliError, CliResult};
use crate::manifest::{sidecar, RunManifest};
use crate::{
    ChannelStatsArgs, Cli, Command, EvalArgs, FgbgArgs, FilterArgs, InstanceArgs, MetricBenchArgs, Preset,
    ReplayArgs, SynthArgs, Task,
};

pub fn run(command: Command, argv: &[String]) -> CliResult<()> {
    match command {
        Command::Fgbg(a) => fgbg(a, argv),
        Command::Instance(a) => instance(a, argv),
        Command::Eval(a) => evaluate(a, argv),
        Command::ChannelStats(a) => channel_stats(a, argv),
        Command::MetricBench(a) => metric_bench(a, argv),
        Command::Synth(a) => synthesize(a, argv),
        Command::Filter(a) => filter(a, argv),
        Command::Replay(a) => replay(a),
    }
}

/// Resolves an optional budget against `channels`, returning the textual
/// form for the manifest alongside the count.
fn resolve(budget: Option<Budget>, channels: usize, default: Budget) -> CliResult<(String, usize)> {
    let b = budget.unwrap_or(default);
    Ok((b.to_string(), b.resolve(channels)?))
}

fn write_json(value: &impl Serialize, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn save_label_outputs(mask: &LabelMask, dir: &Path, stem: &str) -> CliResult<()> {
    io::save_mask(mask, dir.join(format!("{stem}.npy")))?;
    if mask.max_label() <= 255 {
        io::save_mask_pgm(mask, dir.join(format!("{stem}.pgm")))?;
    }
    Ok(())
}

fn fgbg(a: FgbgArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("fgbg", argv, json!(null));
    manifest.add_input("features", &a.features)?;
    let fm = io::load_tensor(&a.features)?;
    let (m_text, keep_m) = resolve(a.m, fm.channels(), Budget::Count(default_keep_m(fm.channels())))?;
    let cfg = FgBgConfig {
        keep_m,
        bins: a.bins,
        metric: a.metric,
        normalization: a.normalization,
        post_process: a.post_process,
        threshold: a.threshold.into(),
    };
    let result = pipeline::fgbg_segment(&fm, &cfg)?;

    fs::create_dir_all(&a.out)?;
    save_label_outputs(&result.mask, &a.out, "mask")?;
    io::save_matrix(fm.height(), fm.width(), result.eigen.vector(1), a.out.join("fiedler.npy"))?;
    manifest.config = json!({ "M": m_text, "resolved": cfg, "kept_channels": result.kept_channels });
    manifest.write(&a.out.join("manifest.json"))
}

fn instance(a: InstanceArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("instance", argv, json!(null));
    manifest.add_input("features", &a.features)?;
    manifest.add_input("fg_mask", &a.fg_mask)?;
    let fm = io::load_tensor(&a.features)?;
    let fg = io::load_mask(&a.fg_mask)?;
    let c = fm.channels();
    let (m_text, keep_m) = resolve(a.m, c, Budget::Count(default_keep_m(c)))?;
    let (n_text, keep_n) = resolve(a.n, c, Budget::Count(default_keep_n(keep_m)))?;
    let cfg = InstanceConfig {
        keep_m,
        keep_n,
        bins: a.bins,
        metric: a.metric,
        normalization: a.normalization,
        k: a.k,
        eig_count: a.eig_count,
        kmeans: KMeansParams { restarts: a.restarts, max_iter: a.max_iter, tol: a.tol, seed: a.seed },
    };
    let result = pipeline::instance_segment(&fm, &fg, &cfg)?;

    fs::create_dir_all(&a.out)?;
    save_label_outputs(&result.mask, &a.out, "instances")?;
    manifest.config = json!({ "M": m_text, "N": n_text, "resolved": cfg, "kept_channels": result.kept_channels });
    manifest.write(&a.out.join("manifest.json"))
}

fn evaluate(a: EvalArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("eval", argv, json!(null));
    manifest.add_input("pred", &a.pred)?;
    manifest.add_input("gt", &a.gt)?;
    let gt = io::load_mask(&a.gt)?;
    let mut pred = io::load_mask(&a.pred)?;
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        pred = eval::align_resolution(&pred, &gt)?;
    }
    let report = match a.task {
        Task::Fgbg => eval::fgbg_report(&pred, &gt)?,
        Task::Instance => eval::instance_miou(&pred, &gt)?,
    };
    write_json(&report, &a.out)?;
    let task = match a.task {
        Task::Fgbg => "fgbg",
        Task::Instance => "instance",
    };
    manifest.config = json!({ "task": task });
    manifest.write(&sidecar(&a.out))
}

#[derive(Serialize)]
struct ChannelRow {
    channel: usize,
    entropy: f64,
    std: f64,
    ncr_rank: usize,
    dcr_rank: usize,
    delta: Option<f64>,
}

/// 1-based position of each channel after sorting by `before`.
fn ranks(scores: &[f64], before: impl Fn(f64, f64) -> std::cmp::Ordering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| before(scores[i], scores[j]).then(i.cmp(&j)));
    let mut rank = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

fn channel_stats(a: ChannelStatsArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("channel-stats", argv, json!({ "bins": a.bins }));
    manifest.add_input("features", &a.features)?;
    if let Some(gt) = &a.gt {
        manifest.add_input("gt", gt)?;
    }
    let fm = io::load_tensor(&a.features)?;
    let entropy: Vec<f64> = entropy_scores(&fm, a.bins)?.iter().map(|s| s.score).collect();
    let std: Vec<f64> = std_scores(&fm).iter().map(|s| s.score).collect();
    let ncr = ranks(&entropy, |x, y| x.total_cmp(&y));
    let dcr = ranks(&std, |x, y| y.total_cmp(&x));
    let gt = a.gt.as_ref().map(io::load_mask).transpose()?;

    let mut w = csv::Writer::from_path(&a.out)?;
    for c in 0..fm.channels() {
        let delta = gt.as_ref().map(|g| channel_delta(&fm, g, c)).transpose()?;
        w.serialize(ChannelRow { channel: c, entropy: entropy[c], std: std[c], ncr_rank: ncr[c], dcr_rank: dcr[c], delta })?;
    }
    w.flush()?;
    manifest.write(&sidecar(&a.out))
}

#[derive(Serialize)]
struct MetricRow {
    metric: MetricKind,
    intra_var: f64,
    inter_var: f64,
    mr: f64,
}

fn metric_bench(a: MetricBenchArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("metric-bench", argv, json!(null));
    manifest.add_input("features", &a.features)?;
    manifest.add_input("gt", &a.gt)?;
    let fm = io::load_tensor(&a.features)?;
    let gt = io::load_mask(&a.gt)?;
    let c = fm.channels();
    let (m_text, keep_m) = resolve(a.m, c, Budget::Count(default_keep_m(c)))?;
    let (n_text, keep_n) = resolve(a.n, c, Budget::Count(default_keep_n(keep_m)))?;
    specseg::ReductionConfig { bins: a.bins, keep_m, keep_n }.validate(c)?;
    let (stable, _) = ncr_select(&fm, keep_m, a.bins)?;
    let (reduced, _) = dcr_select(&stable, keep_n)?;
    let metrics = if a.metrics.is_empty() { MetricKind::ALL.to_vec() } else { a.metrics.clone() };

    let mut w = csv::Writer::from_path(&a.out)?;
    for &metric in &metrics {
        let v = eval::variance_components(&reduced, &gt, metric, a.samples, a.seed)?;
        w.serialize(MetricRow { metric, intra_var: v.intra, inter_var: v.inter, mr: v.ratio() })?;
    }
    w.flush()?;
    manifest.config = json!({
        "M": m_text, "N": n_text, "keep_m": keep_m, "keep_n": keep_n, "bins": a.bins,
        "metrics": metrics, "samples": a.samples, "seed": a.seed,
    });
    manifest.write(&sidecar(&a.out))
}

fn synthesize(a: SynthArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = RunManifest::new("synth", argv, json!(null));
    let spec: SceneSpec = match (&a.spec, a.preset) {
        (Some(path), _) => {
            manifest.add_input("spec", path)?;
            serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| specseg::Error::Spec(e.to_string()))?
        }
        (None, Some(preset)) => {
            let k = a.instances.unwrap_or_else(|| synth::suite_instances(a.seed));
            synth::planted_scene(&PlantedParams::default(), k, a.seed, matches!(preset, Preset::Spiked))?
        }
        (None, None) => return Err(CliError::Usage("one of --spec or --preset is required".into())),
    };
    let scene = synth::generate(&spec)?;

    fs::create_dir_all(&a.out)?;
    io::save_tensor(&scene.features, a.out.join("features.npy"))?;
    save_label_outputs(&scene.instances, &a.out, "instances")?;
    save_label_outputs(&scene.foreground, &a.out, "foreground")?;
    write_json(&spec, &a.out.join("scene.json"))?;
    manifest.config = json!({ "seed": spec.seed, "instances": spec.instances.len() });
    manifest.write(&a.out.join("manifest.json"))
}

fn filter(a: FilterArgs, argv: &[String]) -> CliResult<()> {
    let criteria = FilterCriteria { min_object_frac: a.min_frac, min_size_ratio: a.min_ratio, max_mbor: a.max_mbor };
    criteria.validate()?;
    let mut manifest = RunManifest::new("filter", argv, json!({ "criteria": criteria, "mbor": a.mbor }));
    manifest.add_input("gt", &a.gt)?;
    let gt = io::load_mask(&a.gt)?;
    let keep = eval::filter_dataset(&gt, &criteria, a.mbor);
    let areas: Vec<usize> = gt.areas().into_iter().skip(1).filter(|&x| x > 0).collect();
    let smallest = areas.iter().min().copied().unwrap_or(0);
    let largest = areas.iter().max().copied().unwrap_or(0);
    let decision = json!({
        "keep": keep,
        "instances": areas.len(),
        "min_area_frac": smallest as f64 / gt.len() as f64,
        "size_ratio": if largest == 0 { 0.0 } else { smallest as f64 / largest as f64 },
        "mbor": a.mbor,
    });
    write_json(&decision, &a.out)?;
    println!("{}", if keep { "keep" } else { "reject" });
    manifest.write(&sidecar(&a.out))
}

fn replay(a: ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    manifest.verify_inputs()?;
    let argv = match &a.out {
        Some(out) => with_out(&manifest.argv, out),
        None => manifest.argv.clone(),
    };
    let cli = Cli::try_parse_from(std::iter::once("specseg".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| CliError::Usage(format!("recorded arguments no longer parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("a manifest cannot record a replay".into()));
    }
    run(cli.command, &argv)
}

fn with_out(argv: &[String], out: &Path) -> Vec<String> {
    let mut rewritten = Vec::with_capacity(argv.len() + 2);
    let mut args = argv.iter();
    while let Some(arg) = args.next() {
        if arg == "--out" {
            args.next();
        } else if !arg.starts_with("--out=") {
            rewritten.push(arg.clone());
        }
    }
    rewritten.push("--out".into());
    rewritten.push(PathBuf::from(out).display().to_string());
    rewritten
}
