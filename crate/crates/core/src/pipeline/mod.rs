//! From raw cohort records to labeled, scaled night instances and folds.

mod clean;
mod extract;
mod io;
mod label;
mod scaling;
mod split;

pub use clean::{clean_record, derive_map, floor_hour, locf_impute, CleanRecord, TEMPORAL_COLUMNS, VITAL_COLUMNS};
pub use extract::{
    all_subsets, check_unique_indices, extract_dataset, extract_night_instances, full_schema, last_full_day,
    select_features, window_end, ClassStats, Dataset, ExtractionStats, NightInstance, Subsets, HORIZON_HOURS,
    WINDOW_END_HOUR,
};
pub use io::{parse_key_values, read_instances, schema_path, write_instances, INSTANCES_FILE};
pub use label::{derive_sepsis_labels, FIRST_NIGHT_DAY, LAST_NIGHT_DAY, SOFA_RISE, SOFA_WINDOW_HOURS};
pub use scaling::{apply_minmax, check_disjoint, fit_minmax, fit_minmax_checked, scale_value, ScalingParams, CLAMP_RANGE};
pub use split::{
    resample_training, stratified_kfold, undersample_negatives, DatasetSplit, DEFAULT_FOLDS, DEFAULT_TARGET_PER_CLASS,
};
