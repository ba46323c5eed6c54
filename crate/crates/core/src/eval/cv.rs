use std::fmt;
use std::str::FromStr;

use super::metrics::{auroc, confusion, mean_std, Confusion, Scored, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{replace_head, Architecture, ModelConfig, ParamSet};
use crate::pipeline::{
    apply_minmax, check_disjoint, fit_minmax_checked, resample_training, undersample_negatives, Dataset, DatasetSplit,
    NightInstance, DEFAULT_TARGET_PER_CLASS,
};
use crate::rng::derive_seed;
use crate::train::{
    finetune, nprl_pretrain, predict_scores, strip_labels, train_baseline, BalanceScheme, FinetuneConfig, LossKind,
    PretrainConfig, TrainConfig, TrainLog,
};

/// The compared training procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Baseline,
    Nprl,
    ClassBalanced,
    ClassBalancedUndersampled,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Baseline, Arm::Nprl, Arm::ClassBalanced, Arm::ClassBalancedUndersampled];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Nprl => "nprl",
            Arm::ClassBalanced => "class_balanced",
            Arm::ClassBalancedUndersampled => "class_balanced_undersampled",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown arm {s:?}")))
    }
}

/// Every knob of the cross-validation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub model: ModelConfig,
    /// Supervised settings of the baseline arm.
    pub baseline: TrainConfig,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    /// Loss of both class-balanced arms.
    pub balance: BalanceScheme,
    pub target_per_class: usize,
    pub undersample_target: usize,
    pub threshold: f64,
    pub workers: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            model: ModelConfig::default(),
            baseline: TrainConfig::default(),
            pretrain: PretrainConfig::default(),
            finetune: FinetuneConfig::default(),
            balance: BalanceScheme::EffectiveNumber { beta: 0.9999 },
            target_per_class: DEFAULT_TARGET_PER_CLASS,
            undersample_target: DEFAULT_TARGET_PER_CLASS,
            threshold: DEFAULT_THRESHOLD,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold_id: usize,
    pub scores: Vec<Scored>,
    pub counts: Confusion,
    /// Absent when the fold lacks a class.
    pub auroc: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl FoldReport {
    pub fn from_scores(fold_id: usize, scores: Vec<Scored>, threshold: f64) -> Result<Self> {
        let counts = confusion(&scores, threshold);
        let auroc = match auroc(&scores) {
            Ok(a) => Some(a),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(FoldReport {
            fold_id,
            sensitivity: counts.sensitivity(),
            specificity: counts.specificity(),
            scores,
            counts,
            auroc,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MeanStd {
    fn of(values: &[Option<f64>]) -> Self {
        let (mean, std) = mean_std(values);
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub folds: Vec<FoldReport>,
    pub counts: Confusion,
    /// AUROC of all test-fold scores pooled into one ranking.
    pub auroc: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub fold_auroc: MeanStd,
    pub fold_sensitivity: MeanStd,
    pub fold_specificity: MeanStd,
}

impl AggregateReport {
    pub fn from_folds(folds: Vec<FoldReport>) -> Result<Self> {
        let counts = folds.iter().fold(
            Confusion {
                tp: 0,
                tn: 0,
                fp: 0,
                fn_: 0,
            },
            |acc, f| acc + f.counts,
        );
        let pooled: Vec<Scored> = folds.iter().flat_map(|f| f.scores.iter().copied()).collect();
        let pick = |m: fn(&FoldReport) -> Option<f64>| folds.iter().map(m).collect::<Vec<_>>();
        Ok(AggregateReport {
            auroc: auroc(&pooled)?,
            sensitivity: counts.sensitivity(),
            specificity: counts.specificity(),
            fold_auroc: MeanStd::of(&pick(|f| f.auroc)),
            fold_sensitivity: MeanStd::of(&pick(|f| f.sensitivity)),
            fold_specificity: MeanStd::of(&pick(|f| f.specificity)),
            counts,
            folds,
        })
    }

    pub fn pooled_scores(&self) -> Vec<Scored> {
        self.folds.iter().flat_map(|f| f.scores.iter().copied()).collect()
    }

    /// Whether the pooled AUROC lies inside the range of per-fold AUROCs.
    /// Not guaranteed mathematically; reported as a sanity signal only.
    pub fn pooled_within_fold_range(&self) -> Option<bool> {
        let aucs: Option<Vec<f64>> = self.folds.iter().map(|f| f.auroc).collect();
        let aucs = aucs?;
        let lo = aucs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(self.auroc >= lo && self.auroc <= hi)
    }
}

fn pick(instances: &[NightInstance], positions: &[usize]) -> Vec<NightInstance> {
    positions.iter().map(|&i| instances[i].clone()).collect()
}

/// Parameters and logs of one trained arm.
#[derive(Debug, Clone)]
pub struct ArmFit {
    pub params: ParamSet<f64>,
    pub log: TrainLog,
    /// Instance-discrimination stage of the nprl arm.
    pub pretrain: Option<(ParamSet<f64>, TrainLog)>,
}

/// Trains one arm on (already scaled) training data. `holdout` is only used
/// to assert that no resampled training row leaks from it. The nprl arm
/// pretrains on `train` unless `pretrained` supplies the result.
pub fn fit_arm(
    arm: Arm,
    train: &[NightInstance],
    holdout: &[NightInstance],
    arch: &Architecture,
    config: &CvConfig,
    seed: u64,
    pretrained: Option<ParamSet<f64>>,
) -> Result<ArmFit> {
    let seeded = |t: &TrainConfig, tag: &str| TrainConfig {
        seed: derive_seed(seed, tag),
        ..t.clone()
    };
    let guard = |data: &[NightInstance]| check_disjoint(data, holdout);
    let fit = |(params, log)| ArmFit {
        params,
        log,
        pretrain: None,
    };
    match arm {
        Arm::Baseline => {
            let data = resample_training(train, config.target_per_class, derive_seed(seed, "resample"))?;
            guard(&data)?;
            Ok(fit(train_baseline(&data, arch, &seeded(&config.baseline, "baseline"), derive_seed(seed, "init"))?))
        }
        Arm::Nprl => {
            config.finetune.validate_against(&config.pretrain)?;
            let (pretrained, pre_log) = match pretrained {
                Some(p) => (p, None),
                None => {
                    let pre = PretrainConfig {
                        seed: derive_seed(seed, "pretrain"),
                        ..config.pretrain.clone()
                    };
                    let (p, log) = nprl_pretrain(&strip_labels(train), arch, &pre).map_err(|e| e.at_stage("pretrain"))?;
                    (p, Some(log))
                }
            };
            let theta0 = replace_head(&pretrained, 2, derive_seed(seed, "head"))?;
            let data = if config.finetune.resample {
                resample_training(train, config.target_per_class, derive_seed(seed, "resample"))?
            } else {
                train.to_vec()
            };
            guard(&data)?;
            let ft = FinetuneConfig {
                train: seeded(&config.finetune.train, "finetune"),
                ..config.finetune.clone()
            };
            let (params, log) = finetune(&data, &theta0, arch, &ft).map_err(|e| e.at_stage("finetune"))?;
            Ok(ArmFit {
                params,
                log,
                pretrain: pre_log.map(|l| (pretrained, l)),
            })
        }
        Arm::ClassBalanced | Arm::ClassBalancedUndersampled => {
            let data = if arm == Arm::ClassBalancedUndersampled {
                undersample_negatives(train, config.undersample_target, derive_seed(seed, "undersample"))?
            } else {
                train.to_vec()
            };
            guard(&data)?;
            let t = TrainConfig {
                loss: LossKind::ClassBalanced(config.balance),
                ..seeded(&config.baseline, "balanced")
            };
            Ok(fit(train_baseline(&data, arch, &t, derive_seed(seed, "init"))?))
        }
    }
}

/// Trains one arm on a fold's (already scaled) training data and scores the test fold.
pub fn run_arm(
    arm: Arm,
    train: &[NightInstance],
    test: &[NightInstance],
    arch: &Architecture,
    config: &CvConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let fit = fit_arm(arm, train, test, arch, config, seed, None)?;
    predict_scores(arch, &fit.params, test)
}

fn run_fold(
    dataset: &Dataset,
    split: &DatasetSplit,
    fold: usize,
    arm: Arm,
    arch: &Architecture,
    config: &CvConfig,
    seed: u64,
) -> Result<FoldReport> {
    let train = pick(&dataset.instances, &split.train_positions(fold));
    let test = pick(&dataset.instances, &split.test_positions(fold));
    let scaling = fit_minmax_checked(&train, &test)?;
    let train = apply_minmax(&train, &scaling)?;
    let test = apply_minmax(&test, &scaling)?;
    let fold_seed = derive_seed(seed, &format!("fold{fold}/{}", arm.name()));
    let scores = run_arm(arm, &train, &test, arch, config, fold_seed)?;
    let scored = scores.into_iter().zip(test.iter().map(|i| i.label)).collect();
    FoldReport::from_scores(fold, scored, config.threshold)
}

/// Runs one arm over every fold: scaling fitted on the training folds only,
/// arm-specific resampling, then scoring of the untouched test fold.
pub fn cross_validate(
    dataset: &Dataset,
    split: &DatasetSplit,
    arm: Arm,
    config: &CvConfig,
    seed: u64,
) -> Result<AggregateReport> {
    if split.folds.len() != dataset.instances.len() {
        return Err(Error::input("split does not cover the dataset"));
    }
    dataset.check_unique_indices()?;
    let arch = Architecture::new(config.model.clone(), &dataset.schema)?;
    let workers = config.workers.clamp(1, split.k);
    let mut results: Vec<Option<Result<FoldReport>>> = (0..split.k).map(|_| None).collect();
    if workers == 1 {
        for (f, slot) in results.iter_mut().enumerate() {
            *slot = Some(run_fold(dataset, split, f, arm, &arch, config, seed));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let collected = std::sync::Mutex::new(&mut results);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let f = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if f >= split.k {
                        break;
                    }
                    let r = run_fold(dataset, split, f, arm, &arch, config, seed);
                    collected.lock().expect("no worker panics while holding the lock")[f] = Some(r);
                });
            }
        });
    }
    let folds = results
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("cross_validate"))?;
    AggregateReport::from_folds(folds)
}
