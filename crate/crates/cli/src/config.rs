//! INI-style run configuration: `[section]` headers, `key = value` lines,
//! `#`/`;` comments. Every key has a default; unknown keys are errors.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use nprl_core::eval::{Arm, CvConfig};
use nprl_core::model::ModelConfig;
use nprl_core::train::{BalanceScheme, FinetuneConfig, FinetuneMode, PretrainConfig, TrainConfig};
use nprl_core::cohort::GeneratorConfig;
use nprl_core::theory::TheoryConfig;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<String>,
    pub workers: usize,
    pub generator: GeneratorConfig,
    pub subsets: BTreeSet<u8>,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub baseline: TrainConfig,
    pub folds: usize,
    pub arms: Vec<Arm>,
    pub train_arm: Arm,
    pub target_per_class: usize,
    pub undersample_target: usize,
    pub threshold: f64,
    pub balance: BalanceScheme,
    pub theory: TheoryConfig,
    pub theory_instances: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cv = CvConfig::default();
        RunConfig {
            seed: 0,
            out: None,
            workers: 1,
            generator: GeneratorConfig::default(),
            subsets: nprl_core::pipeline::all_subsets(),
            model: cv.model,
            pretrain: cv.pretrain,
            finetune: cv.finetune,
            baseline: cv.baseline,
            folds: nprl_core::pipeline::DEFAULT_FOLDS,
            arms: Arm::ALL.to_vec(),
            train_arm: Arm::Nprl,
            target_per_class: cv.target_per_class,
            undersample_target: cv.undersample_target,
            threshold: cv.threshold,
            balance: cv.balance,
            theory: TheoryConfig::default(),
            theory_instances: 500,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid boolean {value:?} for {key}")),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `section.key = value` setting.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let full = format!("{section}.{key}");
        let k = full.as_str();
        match k {
            "run.seed" => self.seed = parse(k, value)?,
            "run.out" => self.out = Some(value.to_owned()),
            "run.workers" => self.workers = parse(k, value)?,

            "generator.n_patients" => self.generator.n_patients = parse(k, value)?,
            "generator.sepsis_fraction" => self.generator.sepsis_fraction = parse(k, value)?,
            "generator.missing_rate" => self.generator.missing_rate = parse(k, value)?,
            "generator.onset_day_min" => self.generator.onset_day_range.0 = parse(k, value)?,
            "generator.onset_day_max" => self.generator.onset_day_range.1 = parse(k, value)?,
            "generator.los_min_days" => self.generator.los_days.0 = parse(k, value)?,
            "generator.los_max_days" => self.generator.los_days.1 = parse(k, value)?,
            "generator.drift_hours" => self.generator.drift_hours = parse(k, value)?,
            "generator.drift" => {
                let d: Vec<f64> = parse_list(k, value)?;
                self.generator.drift = d.try_into().map_err(|_| format!("{k} needs 6 comma-separated values"))?;
            }

            "features.subsets" => self.subsets = parse_list(k, value)?.into_iter().collect(),

            "model.gru_hidden" => self.model.gru_hidden = parse(k, value)?,
            "model.static_widths" => self.model.static_widths = parse_list(k, value)?,
            "model.trunk_widths" => self.model.trunk_widths = parse_list(k, value)?,
            "model.normalize_representation" => self.model.normalize_representation = parse_bool(k, value)?,

            "pretrain.epochs" => self.pretrain.epochs = parse(k, value)?,
            "pretrain.batch_size" => self.pretrain.batch_size = parse(k, value)?,
            "pretrain.learning_rate" => self.pretrain.learning_rate = parse(k, value)?,

            "finetune.mode" => {
                self.finetune.mode = match value {
                    "regularized" => FinetuneMode::Regularized { lambda: 1e-2 },
                    "projected" => FinetuneMode::Projected { gamma: 1.0 },
                    _ => return Err(format!("{k} must be regularized or projected")),
                }
            }
            "finetune.lambda" => match &mut self.finetune.mode {
                FinetuneMode::Regularized { lambda } => *lambda = parse(k, value)?,
                _ => return Err(format!("{k} only applies to mode = regularized")),
            },
            "finetune.gamma" => match &mut self.finetune.mode {
                FinetuneMode::Projected { gamma } => *gamma = parse(k, value)?,
                _ => return Err(format!("{k} only applies to mode = projected")),
            },
            "finetune.epochs" => self.finetune.train.epochs = parse(k, value)?,
            "finetune.batch_size" => self.finetune.train.batch_size = parse(k, value)?,
            "finetune.learning_rate" => self.finetune.train.learning_rate = parse(k, value)?,
            "finetune.resample" => self.finetune.resample = parse_bool(k, value)?,

            "baseline.epochs" => self.baseline.epochs = parse(k, value)?,
            "baseline.batch_size" => self.baseline.batch_size = parse(k, value)?,
            "baseline.learning_rate" => self.baseline.learning_rate = parse(k, value)?,

            "eval.folds" => self.folds = parse(k, value)?,
            "eval.arms" => {
                self.arms = value
                    .split(',')
                    .map(|a| a.trim().parse::<Arm>().map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?
            }
            "eval.train_arm" => self.train_arm = value.parse::<Arm>().map_err(|e| e.to_string())?,
            "eval.target_per_class" => self.target_per_class = parse(k, value)?,
            "eval.undersample_target" => self.undersample_target = parse(k, value)?,
            "eval.threshold" => self.threshold = parse(k, value)?,
            "eval.balance" => {
                self.balance = match value {
                    "inverse_frequency" => BalanceScheme::InverseFrequency,
                    "effective_number" => BalanceScheme::EffectiveNumber { beta: 0.9999 },
                    _ => return Err(format!("{k} must be inverse_frequency or effective_number")),
                }
            }
            "eval.beta" => match &mut self.balance {
                BalanceScheme::EffectiveNumber { beta } => *beta = parse(k, value)?,
                _ => return Err(format!("{k} only applies to balance = effective_number")),
            },

            "theory.instances" => self.theory_instances = parse(k, value)?,
            "theory.gru_hidden" => self.theory.model.gru_hidden = parse(k, value)?,
            "theory.pretrain_epochs" => self.theory.pretrain.epochs = parse(k, value)?,
            "theory.finetune_epochs" => self.theory.finetune.epochs = parse(k, value)?,
            "theory.finetune_learning_rate" => self.theory.finetune.learning_rate = parse(k, value)?,
            "theory.n_probes" => self.theory.n_probes = parse(k, value)?,
            "theory.probe_delta" => self.theory.probe_delta = parse(k, value)?,
            "theory.probe_instances" => self.theory.probe_instances = parse(k, value)?,
            "theory.safety" => self.theory.safety = parse(k, value)?,
            "theory.pairs" => self.theory.pairs = parse(k, value)?,
            "theory.tolerance" => self.theory.corollary_tolerance = parse(k, value)?,
            _ => return Err(format!("unknown setting {k}")),
        }
        Ok(())
    }

    /// Applies an `--set section.key=value` override.
    pub fn set_override(&mut self, spec: &str) -> Result<(), String> {
        let (path, value) = spec.split_once('=').ok_or_else(|| format!("override {spec:?} is not section.key=value"))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| format!("override {spec:?} is not section.key=value"))?;
        self.set(section, key, value)
    }

    pub fn parse_ini(text: &str) -> Result<Self, String> {
        let mut config = RunConfig::default();
        config.apply_ini(text)?;
        Ok(config)
    }

    pub fn apply_ini(&mut self, text: &str) -> Result<(), String> {
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let at = |msg: String| format!("line {}: {msg}", i + 1);
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| at(format!("malformed section header {line:?}")))?;
                section = Some(name.trim().to_owned());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let section = section.as_deref().ok_or_else(|| at("setting outside any section".into()))?;
            self.set(section, key.trim(), value).map_err(at)?;
        }
        Ok(())
    }

    /// Canonical rendering of every experiment setting. Seed, output root and
    /// worker count are excluded: they do not change what is computed.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let g = &self.generator;
        let mut section = |name: &str, rows: Vec<(&str, String)>| {
            let _ = writeln!(s, "[{name}]");
            for (k, v) in rows {
                let _ = writeln!(s, "{k} = {v}");
            }
            s.push('\n');
        };
        section(
            "generator",
            vec![
                ("n_patients", g.n_patients.to_string()),
                ("sepsis_fraction", g.sepsis_fraction.to_string()),
                ("missing_rate", g.missing_rate.to_string()),
                ("onset_day_min", g.onset_day_range.0.to_string()),
                ("onset_day_max", g.onset_day_range.1.to_string()),
                ("los_min_days", g.los_days.0.to_string()),
                ("los_max_days", g.los_days.1.to_string()),
                ("drift_hours", g.drift_hours.to_string()),
                ("drift", join(&g.drift)),
            ],
        );
        section("features", vec![("subsets", join(&self.subsets.iter().collect::<Vec<_>>()))]);
        let m = &self.model;
        section(
            "model",
            vec![
                ("gru_hidden", m.gru_hidden.to_string()),
                ("static_widths", join(&m.static_widths)),
                ("trunk_widths", join(&m.trunk_widths)),
                ("normalize_representation", m.normalize_representation.to_string()),
            ],
        );
        let p = &self.pretrain;
        section(
            "pretrain",
            vec![
                ("epochs", p.epochs.to_string()),
                ("batch_size", p.batch_size.to_string()),
                ("learning_rate", p.learning_rate.to_string()),
            ],
        );
        let f = &self.finetune;
        let mut ft = match f.mode {
            FinetuneMode::Regularized { lambda } => vec![("mode", "regularized".to_owned()), ("lambda", lambda.to_string())],
            FinetuneMode::Projected { gamma } => vec![("mode", "projected".to_owned()), ("gamma", gamma.to_string())],
        };
        ft.extend([
            ("epochs", f.train.epochs.to_string()),
            ("batch_size", f.train.batch_size.to_string()),
            ("learning_rate", f.train.learning_rate.to_string()),
            ("resample", f.resample.to_string()),
        ]);
        section("finetune", ft);
        let b = &self.baseline;
        section(
            "baseline",
            vec![
                ("epochs", b.epochs.to_string()),
                ("batch_size", b.batch_size.to_string()),
                ("learning_rate", b.learning_rate.to_string()),
            ],
        );
        let mut ev = vec![
            ("folds", self.folds.to_string()),
            ("arms", join(&self.arms)),
            ("train_arm", self.train_arm.to_string()),
            ("target_per_class", self.target_per_class.to_string()),
            ("undersample_target", self.undersample_target.to_string()),
            ("threshold", self.threshold.to_string()),
        ];
        match self.balance {
            BalanceScheme::InverseFrequency => ev.push(("balance", "inverse_frequency".into())),
            BalanceScheme::EffectiveNumber { beta } => {
                ev.push(("balance", "effective_number".into()));
                ev.push(("beta", beta.to_string()));
            }
        }
        section("eval", ev);
        let t = &self.theory;
        section(
            "theory",
            vec![
                ("instances", self.theory_instances.to_string()),
                ("gru_hidden", t.model.gru_hidden.to_string()),
                ("pretrain_epochs", t.pretrain.epochs.to_string()),
                ("finetune_epochs", t.finetune.epochs.to_string()),
                ("finetune_learning_rate", t.finetune.learning_rate.to_string()),
                ("n_probes", t.n_probes.to_string()),
                ("probe_delta", t.probe_delta.to_string()),
                ("probe_instances", t.probe_instances.to_string()),
                ("safety", t.safety.to_string()),
                ("pairs", t.pairs.to_string()),
                ("tolerance", t.corollary_tolerance.to_string()),
            ],
        );
        s
    }

    /// First 12 hex digits of the SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_id(&self) -> String {
        format!("{}-s{}", self.hash(), self.seed)
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            model: self.model.clone(),
            baseline: self.baseline.clone(),
            pretrain: self.pretrain.clone(),
            finetune: self.finetune.clone(),
            balance: self.balance,
            target_per_class: self.target_per_class,
            undersample_target: self.undersample_target,
            threshold: self.threshold,
            workers: self.workers,
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            seed: nprl_core::rng::derive_seed(self.seed, "generator"),
            ..self.generator.clone()
        }
    }
}
