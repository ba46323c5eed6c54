use std::collections::HashSet;

use crate::error::{Error, Result};

/// Hourly samples per nightly window, 22:00 through 06:00 inclusive.
pub const WINDOW_LEN: usize = 9;

/// Ordered feature names for the temporal matrix columns and the static vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    temporal_names: Vec<String>,
    static_names: Vec<String>,
}

impl FeatureSchema {
    pub fn new(temporal_names: Vec<String>, static_names: Vec<String>) -> Result<Self> {
        if temporal_names.is_empty() {
            return Err(Error::input("schema needs at least one temporal feature"));
        }
        let mut seen = HashSet::new();
        for name in temporal_names.iter().chain(&static_names) {
            if !seen.insert(name.as_str()) {
                return Err(Error::input(format!("duplicate feature name {name:?}")));
            }
        }
        Ok(FeatureSchema {
            temporal_names,
            static_names,
        })
    }

    /// Anonymous schema with `t` temporal and `s` static columns.
    pub fn with_dims(t: usize, s: usize) -> Result<Self> {
        Self::new(
            (0..t).map(|i| format!("t{i}")).collect(),
            (0..s).map(|i| format!("s{i}")).collect(),
        )
    }

    pub fn temporal_names(&self) -> &[String] {
        &self.temporal_names
    }

    pub fn static_names(&self) -> &[String] {
        &self.static_names
    }

    pub fn temporal_dim(&self) -> usize {
        self.temporal_names.len()
    }

    pub fn static_dim(&self) -> usize {
        self.static_names.len()
    }

    pub fn window_len(&self) -> usize {
        WINDOW_LEN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub gru_hidden: usize,
    /// Dense widths of the static branch; the last one feeds the concatenation.
    pub static_widths: Vec<usize>,
    /// Dense relu layers between the concatenated representation and the head.
    pub trunk_widths: Vec<usize>,
    pub head_classes: usize,
    /// Scale the concatenated representation to unit L2 norm before the trunk.
    pub normalize_representation: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            gru_hidden: 256,
            static_widths: vec![16, 8, 1],
            trunk_widths: vec![64],
            head_classes: 2,
            normalize_representation: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gru_hidden == 0 {
            return Err(Error::Config("gru_hidden must be at least 1".into()));
        }
        if self.head_classes < 2 {
            return Err(Error::Config("head_classes must be at least 2".into()));
        }
        if self.static_widths.is_empty() || self.static_widths.contains(&0) {
            return Err(Error::Config("static_widths must be non-empty and positive".into()));
        }
        if self.trunk_widths.contains(&0) {
            return Err(Error::Config("trunk widths must be positive".into()));
        }
        Ok(())
    }
}
