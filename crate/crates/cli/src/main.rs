mod args;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::Parser;
use rayon::prelude::*;

use args::*;
use svdres_core::degradelab::{analyze_pair, corpus_report, DominanceLabel, TaggedPair};
use svdres_core::imagestack::{apply_degradation, encode_png, synthesize_clean, DegradationKind};
use svdres_core::lindecomp::{bench_decomp, curve_to_csv, progressive_reconstruction, ProgressiveOrder};
use svdres_core::nn::{gradcheck, Component};
use svdres_core::train::{
    ablate, evaluate, format_metric, orth_drive, save_log, train_with, write_ablation, Checkpoint, EvalPair,
    EvalReport, OrthDrive, Toggles, TrainConfig,
};
use svdres_core::{Degradation, DegradationSpec, Error, Image};

/// Exit 1: the invocation is wrong. Exit 2: it was valid but failed.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn require_exists(flag: &str, p: &Path) -> Outcome {
    if !p.exists() {
        return usage(format!("{flag} {} does not exist", p.display()));
    }
    Ok(())
}

fn require_dir(flag: &str, p: &Path) -> Outcome {
    if !p.is_dir() {
        return usage(format!("{flag} {} is not a directory", p.display()));
    }
    Ok(())
}

fn thread_pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker threads")
}

fn default_params(kind: DegradationKind) -> serde_json::Value {
    match kind {
        DegradationKind::Rain => serde_json::json!({}),
        DegradationKind::GaussianNoise => serde_json::json!({ "sigma": 25.0 }),
        DegradationKind::Blur => serde_json::json!({ "kernel": "gaussian", "sigma": 2.0 }),
        DegradationKind::Haze => serde_json::json!({ "transmission": 0.5, "airlight": 0.8 }),
        DegradationKind::LowLight => serde_json::json!({ "scale": 0.3 }),
    }
}

fn degrade(a: DegradeArgs) -> Outcome {
    let kind: DegradationKind = a.kind.parse().or_else(|e: Error| usage(e.to_string()))?;
    let params = match &a.params {
        Some(s) => serde_json::from_str(s).or_else(|e| usage(format!("--params is not valid JSON: {e}")))?,
        None => default_params(kind),
    };
    let deg = Degradation::from_parts(kind, params).or_else(|e| usage(format!("--params: {e}")))?;
    if a.synth == Some(0) {
        return usage("--synth must be at least 1");
    }
    if a.synth.is_some() && a.size < 8 {
        return usage("--size must be at least 8");
    }
    if let Some(p) = &a.input {
        require_exists("--in", p)?;
    }

    let sources: Vec<(String, Option<PathBuf>)> = match (&a.input, a.synth) {
        (Some(dir), _) => io::list_pngs(dir)?
            .into_iter()
            .map(|p| (p.file_name().expect("file").to_string_lossy().into_owned(), Some(p)))
            .collect(),
        (None, Some(n)) => (0..n).map(|i| (format!("synth_{i:04}.png"), None)).collect(),
        (None, None) => unreachable!("clap requires --in or --synth"),
    };
    if sources.is_empty() {
        return Err(anyhow::anyhow!("no PNG files in {}", a.input.as_ref().expect("input").display()).into());
    }
    let pool = thread_pool(a.jobs)?;
    let results: Vec<anyhow::Result<(String, Image, Image)>> = pool.install(|| {
        sources
            .par_iter()
            .enumerate()
            .map(|(i, (name, path))| {
                let seed = a.seed.wrapping_add(i as u64);
                let clean = match path {
                    Some(p) => io::load(p)?,
                    None => synthesize_clean(a.size, a.size, 3, seed)?,
                };
                let out = apply_degradation(&clean, &DegradationSpec::new(deg.clone(), seed))
                    .with_context(|| format!("degrading {name}"))?;
                Ok((name.clone(), clean, out))
            })
            .collect()
    });
    for r in results {
        let (name, clean, out) = r?;
        io::write(&a.out.join(&name), encode_png(&out)?)?;
        if let Some(dir) = &a.clean_out {
            io::write(&dir.join(&name), encode_png(&clean)?)?;
        }
    }
    println!("wrote {} {} images to {}", sources.len(), kind, a.out.display());
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Outcome {
    require_dir("--clean", &a.clean)?;
    require_dir("--degraded", &a.degraded)?;
    let paths = io::pair_paths(&a.clean, &a.degraded, a.task.as_deref())?;
    let pool = thread_pool(a.jobs)?;
    let pairs: Vec<TaggedPair> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                Ok(TaggedPair {
                    task: p.task.clone(),
                    clean: io::load(&p.clean)?,
                    degraded: io::load(&p.degraded)?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    let report = pool.install(|| corpus_report(&pairs))?;
    io::write(&a.out, report.to_json()?)?;
    let mut tasks = Vec::new();
    report.write_task_csv(&mut tasks)?;
    io::write(&io::sibling(&a.out, "_tasks", "csv"), tasks)?;
    let mut images = Vec::new();
    report.write_image_csv(&mut images)?;
    io::write(&io::sibling(&a.out, "_images", "csv"), images)?;
    if a.svg {
        io::write(&a.out.with_extension("svg"), report.boxplot_svg())?;
    }
    for t in &report.tasks {
        let label = t.majority.map_or("tie".to_string(), |m| m.to_string());
        println!(
            "{:<16} n={:<4} err_vec={:.4} err_val={:.4} majority={} agreement={:.1}%",
            t.task,
            t.count,
            t.err_vec_swap.mean,
            t.err_val_swap.mean,
            label,
            100.0 * t.agreement
        );
    }
    Ok(())
}

fn classify(a: ClassifyArgs) -> Outcome {
    require_exists("--clean", &a.clean)?;
    require_exists("--degraded", &a.degraded)?;
    let clean = io::load(&a.clean)?;
    let degraded = io::load(&a.degraded)?;
    let stats = analyze_pair(&clean, &degraded)?;
    match DominanceLabel::from_margin(stats.margin()) {
        Ok(l) => println!("{} margin={:.6e}", l.label, l.margin),
        Err(Error::Ambiguous { margin }) => println!("Ambiguous margin={margin:.6e}"),
        Err(e) => return Err(e.into()),
    }
    println!(
        "err_vec_swap={:.6e} err_val_swap={:.6e}",
        stats.err_vec_swap, stats.err_val_swap
    );
    Ok(())
}

fn progressive(a: ProgressiveArgs) -> Outcome {
    let order: ProgressiveOrder = a.order.parse().or_else(|e: Error| usage(e.to_string()))?;
    require_exists("--in", &a.input)?;
    let img = io::load(&a.input)?;
    if a.channel >= img.channels() {
        return usage(format!(
            "--channel {} but the image has {} channels",
            a.channel,
            img.channels()
        ));
    }
    let curve = progressive_reconstruction(&img.plane(a.channel), order)?;
    let mut buf = Vec::new();
    curve_to_csv(&curve, &mut buf)?;
    io::write(&a.out, buf)?;
    println!("{} points written to {}", curve.len(), a.out.display());
    Ok(())
}

fn bench(a: BenchArgs) -> Outcome {
    if a.c == 0 || a.h < 8 || a.w < 8 || a.reps < 3 {
        return usage("--c must be positive, --h and --w at least 8, --reps at least 3");
    }
    let report = bench_decomp(a.c, a.h, a.w, a.reps, a.seed)?;
    io::write(
        &a.out,
        serde_json::to_string_pretty(&report).context("serializing report")?,
    )?;
    if let Some(p) = &a.csv {
        let mut buf = Vec::new();
        report.to_csv(&mut buf)?;
        io::write(p, buf)?;
    }
    println!(
        "svd total {:.3} ms, fft total {:.3} ms, speedup {:.1}x",
        report.svd.total_ms, report.fft.total_ms, report.speedup
    );
    Ok(())
}

fn gradcheck_cmd(a: GradcheckArgs) -> Outcome {
    let comps = Component::parse_list(&a.component).or_else(|e| usage(e.to_string()))?;
    let mut failed = Vec::new();
    for c in comps {
        let r = gradcheck(c, a.seed)?;
        println!(
            "{:<10} max_rel_error={:.3e} bound={:.0e} coords={:<4} {}",
            c.name(),
            r.max_rel_error,
            r.bound,
            r.coordinates,
            if r.passed { "PASS" } else { "FAIL" }
        );
        if !r.passed {
            failed.push(c.name());
        }
    }
    if !failed.is_empty() {
        return Err(anyhow::anyhow!("gradient check failed for {}", failed.join(", ")).into());
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> std::result::Result<TrainConfig, Failure> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            require_exists("--config", p)?;
            TrainConfig::load(p).or_else(|e| usage(e.to_string()))
        }
    }
}

fn print_eval(r: &EvalReport) {
    println!(
        "{:<16} {:>5} {:>10} {:>10} {:>8} {:>8}",
        "task", "n", "psnr_in", "psnr_out", "ssim_in", "ssim_out"
    );
    for t in r.tasks.iter().chain(std::iter::once(&r.overall)) {
        println!(
            "{:<16} {:>5} {:>10} {:>10} {:>8.4} {:>8.4}",
            t.task,
            t.count,
            format_metric(t.psnr_degraded),
            format_metric(t.psnr_restored),
            t.ssim_degraded,
            t.ssim_restored
        );
    }
}

fn train_cmd(a: TrainArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = &a.toggles {
        cfg.toggles = t.parse::<Toggles>().or_else(|e| usage(e.to_string()))?;
    }
    cfg.validate().or_else(|e| usage(e.to_string()))?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log.csv");
        PathBuf::from(p)
    });
    let every = (cfg.steps / 20).max(1);
    let out = train_with(&cfg, |s, l| {
        if (s + 1) % every == 0 {
            log::info!("step {}/{} loss {l:.5}", s + 1, cfg.steps);
        }
    })?;
    io::write(&a.out, out.checkpoint.to_bytes()?)?;
    if let Some(parent) = log_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    save_log(&out.log, &log_path)?;
    if let Some(r) = out.final_eval() {
        print_eval(r);
        println!("held-out PSNR gain {:.3} dB", r.psnr_gain());
    }
    println!(
        "checkpoint {} ({} steps), log {}",
        a.out.display(),
        cfg.steps,
        log_path.display()
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Outcome {
    require_exists("--ckpt", &a.ckpt)?;
    require_dir("--clean", &a.clean)?;
    require_dir("--degraded", &a.degraded)?;
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let pairs = io::pair_paths(&a.clean, &a.degraded, a.task.as_deref())?
        .into_iter()
        .map(|p| {
            Ok(EvalPair {
                task: p.task,
                clean: io::load(&p.clean)?,
                degraded: io::load(&p.degraded)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = evaluate(&ckpt, &pairs)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    io::write(&a.out, buf)?;
    print_eval(&report);
    Ok(())
}

fn ablate_cmd(a: AblateArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if a.orth_drive {
        if !(a.perturbation >= 0.0 && a.perturbation.is_finite()) {
            return usage("--perturbation must be finite and >= 0");
        }
        let drive = OrthDrive {
            model: cfg.model.clone(),
            steps: a.orth_steps,
            perturbation: a.perturbation,
            seed: cfg.seed,
            ..OrthDrive::default()
        };
        let r = orth_drive(&drive)?;
        io::write(&a.out, serde_json::to_string_pretty(&r).context("serializing report")?)?;
        for (i, (s, e)) in r.initial.iter().zip(&r.final_energy).enumerate() {
            println!("sveo weight {i}: off-diagonal energy {s:.3e} -> {e:.3e}");
        }
        return Ok(());
    }
    let variants = a
        .toggles
        .split(',')
        .map(|s| s.trim().parse::<Toggles>())
        .collect::<Result<Vec<_>, _>>()
        .or_else(|e| usage(e.to_string()))?;
    cfg.validate().or_else(|e| usage(e.to_string()))?;
    let rows = ablate(&cfg, &variants)?;
    let mut buf = Vec::new();
    write_ablation(&rows, &mut buf)?;
    io::write(&a.out, buf)?;
    let f = |v: Option<f64>| v.map_or("-".to_string(), format_metric);
    println!(
        "{:<24} {:>7} {:>10} {:>10} {:>9}",
        "variant", "params", "loss_last", "psnr_out", "ssim_out"
    );
    for r in &rows {
        println!(
            "{:<24} {:>7} {:>10} {:>10} {:>9}",
            r.variant,
            r.params,
            f(r.final_window_loss),
            f(r.psnr_restored),
            f(r.ssim_restored)
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Degrade(a) => degrade(a),
        Command::Analyze(a) => analyze(a),
        Command::Classify(a) => classify(a),
        Command::Progressive(a) => progressive(a),
        Command::Bench(a) => bench(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first}");
            eprintln!("run 'svdres --help' for usage");
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
