//! Multi-modal recurrent model, parameter geometry and checkpoints.

mod checkpoint;
mod config;
mod geometry;
mod network;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC};
pub use config::{FeatureSchema, ModelConfig, WINDOW_LEN};
pub use geometry::{frobenius_distance, project_in_place, project_to_ball};
pub use network::{
    bigru_forward, bind, gru_cell, is_head, replace_head, Architecture, Batch, Bound, ForwardVars, Inference,
    ModelInput, ParamSet, DIRECTIONS, HEAD_BIAS, HEAD_PREFIX, HEAD_WEIGHT,
};

#[cfg(test)]
mod tests;
