use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{frobenius_distance, replace_head, Architecture, ModelConfig, ParamSet};
use crate::pipeline::NightInstance;
use crate::rng::derive_seed;
use crate::train::{finetune, nprl_pretrain, strip_labels, FinetuneConfig, FinetuneMode, PretrainConfig, TrainConfig, TrainLog};

use super::checks::{check_corollary1_reps, check_theorem1_reps, CorollaryCheck, PairPlan, TheoremCheck};
use super::lipschitz::{estimate_lipschitz, LipschitzEstimate};

pub const THEORY_REPORT_FILE: &str = "theory_report.txt";

/// Below this many instances every pair is checked instead of sampling.
const ENUMERATE_BELOW: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    /// `normalize_representation` is forced on by the protocol.
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    /// Loss and schedule for the projected fine-tune; the radius comes from the probe.
    pub finetune: TrainConfig,
    pub n_probes: usize,
    pub probe_delta: f64,
    /// Instances the probe maximizes over (a prefix of the input set).
    pub probe_instances: usize,
    /// γ = 1 / (8 · L_hat · safety).
    pub safety: f64,
    pub pairs: usize,
    pub corollary_tolerance: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            // the head reads the unit-norm concatenation directly
            model: ModelConfig {
                trunk_widths: vec![],
                normalize_representation: true,
                ..ModelConfig::default()
            },
            pretrain: PretrainConfig::default(),
            finetune: TrainConfig {
                learning_rate: 1e-4,
                ..TrainConfig::default()
            },
            n_probes: 16,
            probe_delta: 1e-3,
            probe_instances: 128,
            safety: 2.0,
            pairs: 10_000,
            corollary_tolerance: 0.02,
        }
    }
}

impl TheoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety >= 1.0 && self.safety.is_finite()) {
            return Err(Error::Config(format!("safety factor {} must be at least 1", self.safety)));
        }
        if self.n_probes == 0 || self.probe_instances == 0 || self.pairs == 0 {
            return Err(Error::Config("n_probes, probe_instances and pairs must be positive".into()));
        }
        if !(self.corollary_tolerance >= 0.0) {
            return Err(Error::Config("corollary tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCheckReport {
    pub lipschitz: LipschitzEstimate,
    pub safety: f64,
    pub gamma: f64,
    /// Non-head distance actually travelled by fine-tuning.
    pub final_distance: f64,
    pub pretrain_accuracy: f64,
    pub theorem: TheoremCheck,
    pub corollary: CorollaryCheck,
}

impl TheoremCheckReport {
    pub fn passed(&self) -> bool {
        self.theorem.violations == 0 && self.corollary.bound_ok
    }

    pub fn to_text(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str(
            "# L_hat is a parameter-space estimate: max ||rep(theta+D,x) - rep(theta,x)|| / ||D||_F over random\n\
             # non-head directions; the pairwise bound's statement reads it as Lipschitz in the input instead.\n",
        );
        let c = &self.corollary;
        let rows: [(&str, String); 12] = [
            ("L_hat", format!("{:.9e}", self.lipschitz.l_hat)),
            ("n_probes", self.lipschitz.n_probes.to_string()),
            ("probe_delta", format!("{:e}", self.lipschitz.delta)),
            ("safety", format!("{}", self.safety)),
            ("gamma", format!("{:.9e}", self.gamma)),
            ("final_distance", format!("{:.9e}", self.final_distance)),
            ("pretrain_accuracy", format!("{:.6}", self.pretrain_accuracy)),
            ("pairs", self.theorem.pairs_checked.to_string()),
            ("violations", self.theorem.violations.to_string()),
            ("worst_margin", format!("{:.9}", self.theorem.worst_margin)),
            ("m0", format!("{:.9}", c.m0)),
            ("m_star", format!("{:.9}", c.m_star)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "tolerance = {}", c.tolerance);
        let _ = writeln!(s, "bound_ok = {}", c.bound_ok);
        s
    }

    pub fn write(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text(comment)).map_err(|e| Error::io(path, e))
    }
}

/// Everything the protocol produced, for callers that persist artifacts.
#[derive(Debug, Clone)]
pub struct TheoryRun {
    pub report: TheoremCheckReport,
    pub theta0: ParamSet<f64>,
    pub theta_star: ParamSet<f64>,
    pub pretrain_log: TrainLog,
    pub finetune_log: TrainLog,
}

/// Pretrain with unit-norm representations, probe L_hat at the pretrained
/// point, fine-tune inside the resulting γ-ball, then check both bounds on
/// the same instances.
pub fn theory_protocol(
    instances: &[NightInstance],
    temporal_dim: usize,
    static_dim: usize,
    config: &TheoryConfig,
    seed: u64,
) -> Result<TheoryRun> {
    config.validate().map_err(|e| e.at_stage("config"))?;
    let model = ModelConfig {
        normalize_representation: true,
        head_classes: 2,
        ..config.model.clone()
    };
    let arch = Architecture::from_dims(model, temporal_dim, static_dim).map_err(|e| e.at_stage("config"))?;

    let pretrain_cfg = PretrainConfig {
        seed: derive_seed(seed, "theory/pretrain"),
        ..config.pretrain.clone()
    };
    let profiles = strip_labels(instances);
    let (pretrained, pretrain_log) = nprl_pretrain(&profiles, &arch, &pretrain_cfg).map_err(|e| e.at_stage("pretrain"))?;
    let pretrain_accuracy = pretrain_log.last().accuracy;

    let probe_set = &instances[..config.probe_instances.min(instances.len())];
    let pre_arch = arch.with_head_classes(instances.len()).map_err(|e| e.at_stage("lipschitz"))?;
    let lipschitz = estimate_lipschitz(
        &pre_arch,
        &pretrained,
        probe_set,
        config.n_probes,
        config.probe_delta,
        derive_seed(seed, "theory/probe"),
    )
    .map_err(|e| e.at_stage("lipschitz"))?;
    let gamma = 1.0 / (8.0 * lipschitz.l_hat * config.safety);

    let theta0 = replace_head(&pretrained, 2, derive_seed(seed, "theory/head")).map_err(|e| e.at_stage("finetune"))?;
    let ft = FinetuneConfig {
        mode: FinetuneMode::Projected { gamma },
        train: TrainConfig {
            seed: derive_seed(seed, "theory/finetune"),
            ..config.finetune.clone()
        },
        resample: false,
    };
    ft.validate_against(&pretrain_cfg).map_err(|e| e.at_stage("finetune"))?;
    let (theta_star, finetune_log) = finetune(instances, &theta0, &arch, &ft).map_err(|e| e.at_stage("finetune"))?;
    let final_distance = frobenius_distance(&theta0, &theta_star, true).map_err(|e| e.at_stage("finetune"))?;

    let reps = |p: &ParamSet<f64>| -> Result<Vec<Vec<f64>>> {
        Ok(arch.infer(p, instances, 256)?.into_iter().map(|o| o.representation).collect())
    };
    let r0 = reps(&theta0).map_err(|e| e.at_stage("theorem"))?;
    let r_star = reps(&theta_star).map_err(|e| e.at_stage("theorem"))?;
    let plan = if instances.len() < ENUMERATE_BELOW {
        PairPlan::All
    } else {
        PairPlan::Sample(config.pairs)
    };
    let theorem = check_theorem1_reps(&r0, &r_star, plan, derive_seed(seed, "theory/pairs")).map_err(|e| e.at_stage("theorem"))?;
    let corollary = check_corollary1_reps(&r0, &r_star, config.corollary_tolerance).map_err(|e| e.at_stage("corollary"))?;

    Ok(TheoryRun {
        report: TheoremCheckReport {
            lipschitz,
            safety: config.safety,
            gamma,
            final_distance,
            pretrain_accuracy,
            theorem,
            corollary,
        },
        theta0,
        theta_star,
        pretrain_log,
        finetune_log,
    })
}
