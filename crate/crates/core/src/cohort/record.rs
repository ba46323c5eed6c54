use chrono::{NaiveDateTime, Timelike};

/// Hourly columns in `hourly.csv` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HourlyField {
    HeartRate,
    Sbp,
    Dbp,
    RespRate,
    Temperature,
    Fio2,
    IvBolusCum,
    RbcUnitsCum,
    VentDaysCum,
    SurgeriesCum,
    SurgeryDurationCum,
}

pub const HOURLY_FIELD_COUNT: usize = 11;

impl HourlyField {
    pub const ALL: [HourlyField; HOURLY_FIELD_COUNT] = [
        HourlyField::HeartRate,
        HourlyField::Sbp,
        HourlyField::Dbp,
        HourlyField::RespRate,
        HourlyField::Temperature,
        HourlyField::Fio2,
        HourlyField::IvBolusCum,
        HourlyField::RbcUnitsCum,
        HourlyField::VentDaysCum,
        HourlyField::SurgeriesCum,
        HourlyField::SurgeryDurationCum,
    ];

    pub const VITALS: [HourlyField; 6] = [
        HourlyField::HeartRate,
        HourlyField::Sbp,
        HourlyField::Dbp,
        HourlyField::RespRate,
        HourlyField::Temperature,
        HourlyField::Fio2,
    ];

    pub const CUMULATIVE: [HourlyField; 5] = [
        HourlyField::IvBolusCum,
        HourlyField::RbcUnitsCum,
        HourlyField::VentDaysCum,
        HourlyField::SurgeriesCum,
        HourlyField::SurgeryDurationCum,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn column(self) -> &'static str {
        match self {
            HourlyField::HeartRate => "heart_rate",
            HourlyField::Sbp => "sbp",
            HourlyField::Dbp => "dbp",
            HourlyField::RespRate => "resp_rate",
            HourlyField::Temperature => "temperature",
            HourlyField::Fio2 => "fio2",
            HourlyField::IvBolusCum => "iv_bolus_cum",
            HourlyField::RbcUnitsCum => "rbc_units_cum",
            HourlyField::VentDaysCum => "vent_days_cum",
            HourlyField::SurgeriesCum => "surgeries_cum",
            HourlyField::SurgeryDurationCum => "surgery_duration_cum",
        }
    }

    pub fn is_cumulative(self) -> bool {
        self.index() >= HourlyField::IvBolusCum.index()
    }
}

/// The fifteen admission-level features, in `patients.csv` order.
pub const STATIC_COLUMNS: [&str; 15] = [
    "age",
    "sex",
    "mechanism",
    "transferred",
    "head_injury",
    "first_sbp_ed",
    "reverse_shock_index",
    "max_base_deficit_48h",
    "max_lactate_48h",
    "rbc_units_48h",
    "crystalloid_l_48h",
    "apache2",
    "antibiotic_48h",
    "surgeries_48h",
    "ed_disposition",
];

#[derive(Debug, Clone, PartialEq)]
pub struct HourlyObservation {
    pub ts: NaiveDateTime,
    pub values: [Option<f64>; HOURLY_FIELD_COUNT],
}

impl HourlyObservation {
    pub fn empty(ts: NaiveDateTime) -> Self {
        HourlyObservation {
            ts,
            values: [None; HOURLY_FIELD_COUNT],
        }
    }

    pub fn get(&self, field: HourlyField) -> Option<f64> {
        self.values[field.index()]
    }

    pub fn set(&mut self, field: HourlyField, value: Option<f64>) {
        self.values[field.index()] = value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SofaScore {
    pub ts: NaiveDateTime,
    pub score: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Culture {
    pub ts: NaiveDateTime,
    pub positive: bool,
}

/// One synthetic admission.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub admit_ts: NaiveDateTime,
    pub los_hours: u32,
    pub hourly: Vec<HourlyObservation>,
    pub statics: Vec<f64>,
    pub sofa: Vec<SofaScore>,
    pub cultures: Vec<Culture>,
}

pub fn is_on_the_hour(ts: NaiveDateTime) -> bool {
    ts.minute() == 0 && ts.second() == 0 && ts.nanosecond() == 0
}

/// Index given to the admission calendar day. Night windows and labeling days
/// are counted from here.
pub const ADMISSION_DAY_INDEX: i64 = 1;

/// Hospital day of `ts`; the admission calendar day is [`ADMISSION_DAY_INDEX`].
pub fn hospital_day(admit_ts: NaiveDateTime, ts: NaiveDateTime) -> i64 {
    (ts.date() - admit_ts.date()).num_days() + ADMISSION_DAY_INDEX
}

/// Midnight that starts hospital day `day`.
pub fn day_start(admit_ts: NaiveDateTime, day: i64) -> NaiveDateTime {
    admit_ts.date().and_hms_opt(0, 0, 0).expect("midnight exists") + chrono::Duration::days(day - ADMISSION_DAY_INDEX)
}
