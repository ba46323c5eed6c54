use std::path::{Path, PathBuf};
use std::time::Instant;

use nprl_core::cohort::{generate_cohort, read_cohort, write_cohort};
use nprl_core::eval::{cross_validate, emit_report, fit_arm, AggregateReport, Arm, REPORT_FILE, ROC_FILE};
use nprl_core::model::{load_checkpoint, save_checkpoint, Architecture};
use nprl_core::pipeline::{
    apply_minmax, extract_dataset, fit_minmax, read_instances, select_features, stratified_kfold, write_instances, Dataset,
    NightInstance, INSTANCES_FILE,
};
use nprl_core::rng::{derive_seed, stream_rng};
use nprl_core::theory::{theory_protocol, THEORY_REPORT_FILE};
use nprl_core::train::{nprl_pretrain, strip_labels, PretrainConfig};
use nprl_core::{Error, Result};

use crate::config::RunConfig;
use crate::Command;

const COHORT_DIR: &str = "cohort";
const CONFIG_FILE: &str = "config.ini";
const EXTRACTION_FILE: &str = "extraction.txt";
const PRETRAIN_CHECKPOINT: &str = "pretrain.nprl";
const PRETRAIN_LOG: &str = "pretrain_log.csv";

struct Ctx<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    header: String,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, format!("# {}\n{body}", self.header)).map_err(|e| Error::Io { path, source: e })
    }

    fn comment(&self) -> Option<&str> {
        Some(&self.header)
    }
}

fn missing(path: &Path, producer: &str) -> Error {
    Error::Config(format!("{} not found; run `nprl {producer}` with the same config first", path.display()))
}

pub fn run(command: Command, config: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_owned(),
        source: e,
    })?;
    let ctx = Ctx {
        config,
        dir,
        header: format!("nprl run={} config={} seed={}", config.run_id(), config.hash(), config.seed),
    };
    ctx.write(CONFIG_FILE, &format!("[run]\nseed = {}\n\n{}", config.seed, config.canonical()))?;
    println!("run directory: {}", dir.display());
    match command {
        Command::Gen => gen(&ctx),
        Command::Extract => extract(&ctx),
        Command::Pretrain => pretrain(&ctx),
        Command::Train => train(&ctx),
        Command::Eval => eval(&ctx),
        Command::Theory => theory(&ctx),
        Command::All => {
            gen(&ctx)?;
            extract(&ctx)?;
            eval(&ctx)?;
            theory(&ctx)
        }
    }
}

fn gen(ctx: &Ctx) -> Result<()> {
    let records = generate_cohort(&ctx.config.generator_config()).map_err(|e| e.at_stage("gen"))?;
    write_cohort(&records, &ctx.path(COHORT_DIR), ctx.comment())?;
    println!("gen: {} patients", records.len());
    Ok(())
}

fn extract(ctx: &Ctx) -> Result<()> {
    let dir = ctx.path(COHORT_DIR);
    if !dir.is_dir() {
        return Err(missing(&dir, "gen"));
    }
    let records = read_cohort(&dir)?;
    let (dataset, stats) = extract_dataset(&records).map_err(|e| e.at_stage("extract"))?;
    let dataset = select_features(&dataset, &ctx.config.subsets)?;
    write_instances(&dataset, &ctx.path(INSTANCES_FILE), ctx.comment())?;
    ctx.write(
        EXTRACTION_FILE,
        &format!(
            "patients = {}\nseptic_patients = {}\ninstances = {}\npositives = {}\ndropped_missing = {}\ndropped_after_onset = {}\n",
            stats.patients,
            stats.septic_patients,
            stats.instances,
            stats.positives,
            stats.dropped_missing,
            stats.dropped_after_onset
        ),
    )?;
    println!(
        "extract: {} instances ({} positive) from {} patients",
        stats.instances, stats.positives, stats.patients
    );
    Ok(())
}

fn load_dataset(ctx: &Ctx) -> Result<Dataset> {
    let path = ctx.path(INSTANCES_FILE);
    if !path.is_file() {
        return Err(missing(&path, "extract"));
    }
    read_instances(&path)
}

/// Whole-dataset scaling, for the stages that have no held-out fold.
fn scaled(instances: &[NightInstance]) -> Result<Vec<NightInstance>> {
    apply_minmax(instances, &fit_minmax(instances)?)
}

fn pretrain(ctx: &Ctx) -> Result<()> {
    let dataset = load_dataset(ctx)?;
    let data = scaled(&dataset.instances)?;
    let arch = Architecture::new(ctx.config.model.clone(), &dataset.schema)?;
    let cfg = PretrainConfig {
        seed: derive_seed(ctx.config.seed, "pretrain"),
        ..ctx.config.pretrain.clone()
    };
    let (params, log) = nprl_pretrain(&strip_labels(&data), &arch, &cfg).map_err(|e| e.at_stage("pretrain"))?;
    save_checkpoint(&params, ctx.path(PRETRAIN_CHECKPOINT))?;
    log.write_csv(&ctx.path(PRETRAIN_LOG), ctx.comment())?;
    let last = log.last();
    println!(
        "pretrain: {} instances, identification accuracy {:.4}, mean |cos| {:.4}",
        data.len(),
        last.accuracy,
        last.mean_abs_cosine
    );
    Ok(())
}

fn train(ctx: &Ctx) -> Result<()> {
    let dataset = load_dataset(ctx)?;
    let data = scaled(&dataset.instances)?;
    let arch = Architecture::new(ctx.config.model.clone(), &dataset.schema)?;
    let arm = ctx.config.train_arm;
    let checkpoint = ctx.path(PRETRAIN_CHECKPOINT);
    let pretrained = if arm == Arm::Nprl && checkpoint.is_file() {
        Some(load_checkpoint(&checkpoint)?)
    } else {
        None
    };
    let fit = fit_arm(arm, &data, &[], &arch, &ctx.config.cv_config(), derive_seed(ctx.config.seed, "train"), pretrained)
        .map_err(|e| e.at_stage("train"))?;
    if let Some((params, log)) = &fit.pretrain {
        save_checkpoint(params, &checkpoint)?;
        log.write_csv(&ctx.path(PRETRAIN_LOG), ctx.comment())?;
    }
    save_checkpoint(&fit.params, ctx.path(&format!("{arm}.nprl")))?;
    fit.log.write_csv(&ctx.path(&format!("{arm}_log.csv")), ctx.comment())?;
    let last = fit.log.last();
    println!("train {arm}: final loss {:.5}, training accuracy {:.4}", last.loss, last.accuracy);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| format!("{v:.4}"))
}

fn eval(ctx: &Ctx) -> Result<()> {
    let dataset = load_dataset(ctx)?;
    let split = stratified_kfold(&dataset.instances, ctx.config.folds, derive_seed(ctx.config.seed, "split"))?;
    let cv = ctx.config.cv_config();
    let mut reports: Vec<(Arm, AggregateReport)> = Vec::new();
    for &arm in &ctx.config.arms {
        let started = Instant::now();
        let report = cross_validate(&dataset, &split, arm, &cv, derive_seed(ctx.config.seed, "cv"))?;
        println!(
            "eval {arm:<28} auroc {}  sensitivity {}  specificity {}  ({:.1}s)",
            fmt_opt(Some(report.auroc)),
            fmt_opt(report.sensitivity),
            fmt_opt(report.specificity),
            started.elapsed().as_secs_f64()
        );
        reports.push((arm, report));
    }
    emit_report(&reports, ctx.dir, ctx.comment())?;
    println!("eval: wrote {REPORT_FILE} and {ROC_FILE}");
    Ok(())
}

fn theory(ctx: &Ctx) -> Result<()> {
    use rand::seq::index::sample;

    let dataset = load_dataset(ctx)?;
    let n = dataset.instances.len();
    let take = ctx.config.theory_instances.min(n);
    let mut rng = stream_rng(derive_seed(ctx.config.seed, "theory/sample"), 0);
    let mut picked = sample(&mut rng, n, take).into_vec();
    picked.sort_unstable();
    let subset: Vec<NightInstance> = picked.iter().map(|&i| dataset.instances[i].clone()).collect();
    let data = scaled(&subset)?;
    let mut cfg = ctx.config.theory.clone();
    cfg.model.static_widths = ctx.config.model.static_widths.clone();
    let run = theory_protocol(
        &data,
        dataset.schema.temporal_dim(),
        dataset.schema.static_dim(),
        &cfg,
        derive_seed(ctx.config.seed, "theory"),
    )?;
    run.report.write(ctx.path(THEORY_REPORT_FILE), ctx.comment())?;
    run.pretrain_log.write_csv(&ctx.path("theory_pretrain_log.csv"), ctx.comment())?;
    run.finetune_log.write_csv(&ctx.path("theory_finetune_log.csv"), ctx.comment())?;
    let r = &run.report;
    println!(
        "theory: L_hat {:.4e}, gamma {:.4e}, {} violations / {} pairs, m0 {:.4}, m* {:.4}, bound_ok {}",
        r.lipschitz.l_hat, r.gamma, r.theorem.violations, r.theorem.pairs_checked, r.corollary.m0, r.corollary.m_star, r.corollary.bound_ok
    );
    Ok(())
}
