use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::record::{day_start, Culture, HourlyField, HourlyObservation, PatientRecord, SofaScore};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// AR(1) model for one vital: `x_t = μ + φ (x_{t-1} − μ) + ε_t`, with μ drawn per patient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VitalModel {
    pub baseline: f64,
    /// Between-patient spread of the baseline.
    pub baseline_sd: f64,
    pub ar_coef: f64,
    pub noise_sd: f64,
    pub min: f64,
    pub max: f64,
}

impl VitalModel {
    const fn new(baseline: f64, baseline_sd: f64, ar_coef: f64, noise_sd: f64, min: f64, max: f64) -> Self {
        VitalModel {
            baseline,
            baseline_sd,
            ar_coef,
            noise_sd,
            min,
            max,
        }
    }
}

/// Hourly event rates behind the cumulative exposure columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureConfig {
    pub bolus_prob: f64,
    pub bolus_litres: f64,
    pub rbc_prob: f64,
    pub vent_fraction: f64,
    pub surgery_prob: f64,
    pub surgery_hours: (f64, f64),
}

impl Default for ExposureConfig {
    fn default() -> Self {
        ExposureConfig {
            bolus_prob: 0.04,
            bolus_litres: 0.5,
            rbc_prob: 0.01,
            vent_fraction: 0.5,
            surgery_prob: 0.004,
            surgery_hours: (1.0, 6.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub sepsis_fraction: f64,
    /// Inclusive hospital-day range for planted onsets.
    pub onset_day_range: (i64, i64),
    pub missing_rate: f64,
    pub seed: u64,
    /// Indexed like [`HourlyField::VITALS`].
    pub vitals: [VitalModel; 6],
    /// Total drift reached at onset, indexed like [`HourlyField::VITALS`].
    pub drift: [f64; 6],
    pub drift_hours: u32,
    pub los_days: (u32, u32),
    pub exposures: ExposureConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_patients: 500,
            sepsis_fraction: 0.17,
            onset_day_range: (3, 14),
            missing_rate: 0.1,
            seed: 0,
            vitals: [
                VitalModel::new(85.0, 8.0, 0.8, 3.0, 30.0, 200.0),
                VitalModel::new(120.0, 10.0, 0.8, 5.0, 60.0, 220.0),
                VitalModel::new(70.0, 7.0, 0.8, 4.0, 30.0, 130.0),
                VitalModel::new(18.0, 3.0, 0.7, 1.5, 6.0, 50.0),
                VitalModel::new(37.0, 0.3, 0.85, 0.15, 34.0, 42.0),
                VitalModel::new(0.35, 0.08, 0.9, 0.03, 0.21, 1.0),
            ],
            drift: [20.0, 0.0, 0.0, 6.0, 1.2, 0.0],
            drift_hours: 24,
            los_days: (5, 20),
            exposures: ExposureConfig::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 {
            return Err(Error::input("n_patients must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.sepsis_fraction) {
            return Err(Error::Config("sepsis_fraction must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config("missing_rate must lie in [0, 1)".into()));
        }
        let (lo, hi) = self.onset_day_range;
        if lo < 2 || lo > hi {
            return Err(Error::Config(format!("bad onset_day_range {lo}..={hi}")));
        }
        let (dlo, dhi) = self.los_days;
        if dlo == 0 || dlo > dhi {
            return Err(Error::Config(format!("bad los_days {dlo}..={dhi}")));
        }
        for (v, field) in self.vitals.iter().zip(HourlyField::VITALS) {
            let ok = v.min < v.max
                && (0.0..1.0).contains(&v.ar_coef)
                && v.noise_sd >= 0.0
                && v.baseline_sd >= 0.0;
            if !ok {
                return Err(Error::Config(format!("bad AR(1) settings for {}", field.column())));
            }
        }
        let e = &self.exposures;
        let probs = [e.bolus_prob, e.rbc_prob, e.vent_fraction, e.surgery_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || e.surgery_hours.0 > e.surgery_hours.1 {
            return Err(Error::Config("bad exposure settings".into()));
        }
        Ok(())
    }

    pub fn septic_quota(&self) -> usize {
        (self.sepsis_fraction * self.n_patients as f64).round() as usize
    }
}

/// Hours between consecutive SOFA assessments.
pub const SOFA_INTERVAL_HOURS: i64 = 6;
/// Minimum time observed after a planted onset, so the ΔSOFA window is complete.
const POST_ONSET_HOURS: i64 = 72;

pub fn generate_cohort(config: &GeneratorConfig) -> Result<Vec<PatientRecord>> {
    config.validate()?;
    let n = config.n_patients;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(derive_seed(config.seed, "quota"), 0));
    let mut septic = vec![false; n];
    for &i in &order[..config.septic_quota()] {
        septic[i] = true;
    }
    let patient_seed = derive_seed(config.seed, "patient");
    let mut records: Vec<PatientRecord> = (0..n)
        .map(|i| generate_patient(config, i, septic[i], &mut stream_rng(patient_seed, i as u64)))
        .collect();
    inject_missingness(&mut records, config.missing_rate, derive_seed(config.seed, "missingness"))?;
    Ok(records)
}

/// Planted onset of a septic patient: uniform over the on-the-hour times whose
/// prediction night falls inside the onset day range.
fn draw_onset(config: &GeneratorConfig, admit_ts: NaiveDateTime, rng: &mut ChaCha8Rng) -> NaiveDateTime {
    let (lo, hi) = config.onset_day_range;
    // Onsets at or before 06:00 belong to the previous night, so start at 07:00.
    let first = day_start(admit_ts, lo) + Duration::hours(7);
    let last = day_start(admit_ts, hi) + Duration::hours(23);
    let span = (last - first).num_hours();
    first + Duration::hours(rng.random_range(0..=span))
}

fn generate_patient(config: &GeneratorConfig, index: usize, septic: bool, rng: &mut ChaCha8Rng) -> PatientRecord {
    let epoch = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let admit_ts = epoch + Duration::days(rng.random_range(0..365)) + Duration::hours(rng.random_range(0..24));
    let (dlo, dhi) = config.los_days;
    let mut los_hours = i64::from(rng.random_range(dlo * 24..=dhi * 24));
    let onset = septic.then(|| draw_onset(config, admit_ts, rng));
    if let Some(t) = onset {
        los_hours = los_hours.max((t - admit_ts).num_hours() + POST_ONSET_HOURS);
    }

    let hourly = generate_hourly(config, admit_ts, los_hours, onset, rng);
    let statics = generate_statics(septic, rng);
    let sofa = generate_sofa(admit_ts, los_hours, onset, rng);
    let cultures = generate_cultures(admit_ts, los_hours, onset, rng);
    PatientRecord {
        patient_id: format!("P{:05}", index + 1),
        admit_ts,
        los_hours: los_hours as u32,
        hourly,
        statics,
        sofa,
        cultures,
    }
}

fn generate_hourly(
    config: &GeneratorConfig,
    admit_ts: NaiveDateTime,
    los_hours: i64,
    onset: Option<NaiveDateTime>,
    rng: &mut ChaCha8Rng,
) -> Vec<HourlyObservation> {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let means: Vec<f64> = config
        .vitals
        .iter()
        .map(|v| v.baseline + v.baseline_sd * std_normal.sample(rng))
        .collect();
    let mut dev = [0.0_f64; 6];
    for (d, v) in dev.iter_mut().zip(&config.vitals) {
        // Start from the stationary distribution of the AR(1) deviation.
        *d = v.noise_sd / (1.0 - v.ar_coef * v.ar_coef).sqrt() * std_normal.sample(rng);
    }
    let e = config.exposures;
    let ventilated = rng.random_bool(e.vent_fraction);
    let mut cum = [0.0_f64; 5];
    let mut hourly = Vec::with_capacity(los_hours as usize + 1);
    for h in 0..=los_hours {
        let ts = admit_ts + Duration::hours(h);
        let ramp = match onset {
            Some(t) if config.drift_hours > 0 => {
                let to_onset = (t - ts).num_hours() as f64;
                (1.0 - to_onset / f64::from(config.drift_hours)).clamp(0.0, 1.0)
            }
            _ => 0.0,
        };
        let mut obs = HourlyObservation::empty(ts);
        for (k, field) in HourlyField::VITALS.into_iter().enumerate() {
            let v = &config.vitals[k];
            if h > 0 {
                dev[k] = v.ar_coef * dev[k] + v.noise_sd * std_normal.sample(rng);
            }
            let value = (means[k] + dev[k] + ramp * config.drift[k]).clamp(v.min, v.max);
            obs.set(field, Some(value));
        }
        if h > 0 {
            if rng.random_bool(e.bolus_prob) {
                cum[0] += e.bolus_litres;
            }
            if rng.random_bool(e.rbc_prob) {
                cum[1] += 1.0;
            }
            if ventilated {
                cum[2] += 1.0 / 24.0;
            }
            if rng.random_bool(e.surgery_prob) {
                cum[3] += 1.0;
                cum[4] += rng.random_range(e.surgery_hours.0..=e.surgery_hours.1);
            }
        }
        for (field, value) in HourlyField::CUMULATIVE.into_iter().zip(cum) {
            obs.set(field, Some(value));
        }
        hourly.push(obs);
    }
    hourly
}

fn generate_statics(septic: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = |rng: &mut ChaCha8Rng, mean: f64, sd: f64| Normal::new(mean, sd).unwrap().sample(rng);
    let coin = |rng: &mut ChaCha8Rng, p: f64| f64::from(u8::from(rng.random_bool(p)));
    // Septic admissions skew slightly sicker; the nightly vitals carry the main signal.
    let severity = if septic { 1.0 } else { 0.0 };
    let age = rng.random_range(16.0..90.0_f64).round();
    let first_sbp: f64 = n(rng, 125.0, 22.0).clamp(50.0, 220.0);
    let first_hr: f64 = n(rng, 95.0, 18.0).clamp(40.0, 180.0);
    vec![
        age,
        coin(rng, 0.7),
        f64::from(rng.random_range(0..3_u8)),
        coin(rng, 0.35),
        coin(rng, 0.3),
        first_sbp.round(),
        first_sbp / first_hr,
        n(rng, 4.0 + severity, 3.0).max(0.0),
        n(rng, 2.5 + 0.5 * severity, 1.2).max(0.3),
        f64::from(rng.random_range(0..(4 + 2 * severity as u8))),
        n(rng, 3.0 + severity, 1.5).max(0.0),
        (n(rng, 14.0 + 3.0 * severity, 6.0).round()).clamp(0.0, 71.0),
        coin(rng, 0.4 + 0.2 * severity),
        f64::from(rng.random_range(0..3_u8)),
        f64::from(rng.random_range(0..4_u8)),
    ]
}

/// Scores every six hours. Away from a planted onset the series wanders within
/// one point of the patient's baseline, so only planted onsets qualify.
fn generate_sofa(
    admit_ts: NaiveDateTime,
    los_hours: i64,
    onset: Option<NaiveDateTime>,
    rng: &mut ChaCha8Rng,
) -> Vec<SofaScore> {
    let base: u8 = rng.random_range(0..=8);
    // Baseline noise can lift the pre-onset minimum by one point, so plant at least
    // three to guarantee a two-point rise.
    let rise: u8 = rng.random_range(3..=5);
    (0..=los_hours / SOFA_INTERVAL_HOURS)
        .map(|k| {
            let ts = admit_ts + Duration::hours(k * SOFA_INTERVAL_HOURS);
            let elevated = onset.is_some_and(|t| ts > t);
            let score = base + rng.random_range(0..=1) + if elevated { rise } else { 0 };
            SofaScore { ts, score }
        })
        .collect()
}

fn generate_cultures(
    admit_ts: NaiveDateTime,
    los_hours: i64,
    onset: Option<NaiveDateTime>,
    rng: &mut ChaCha8Rng,
) -> Vec<Culture> {
    let mut cultures: Vec<Culture> = (0..rng.random_range(0..=3))
        .map(|_| Culture {
            ts: admit_ts + Duration::hours(rng.random_range(0..=los_hours)),
            positive: false,
        })
        .collect();
    // Early positive cultures fall outside the labeling days and must be ignored.
    if rng.random_bool(0.1) {
        cultures.push(Culture {
            ts: admit_ts + Duration::hours(rng.random_range(0..24)),
            positive: true,
        });
    }
    if let Some(ts) = onset {
        cultures.push(Culture { ts, positive: true });
    }
    cultures.sort_by_key(|c| (c.ts, c.positive));
    cultures
}

/// Blanks vital cells independently with probability `rate`. Cumulative cells
/// are blanked at the same rate but never on the first row, so forward filling
/// always restores a value and monotonicity survives.
pub fn inject_missingness(records: &mut [PatientRecord], rate: f64, seed: u64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("missing rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(());
    }
    for (i, record) in records.iter_mut().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        for obs in record.hourly.iter_mut().skip(1) {
            for field in HourlyField::ALL {
                if rng.random_bool(rate) {
                    obs.set(field, None);
                }
            }
        }
    }
    Ok(())
}
