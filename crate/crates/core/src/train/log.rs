use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Training-set evaluation after one epoch (epoch 0 is the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    /// `‖θ − θ0‖_F` over non-head tensors.
    pub frob_dist: f64,
    pub mean_cosine: f64,
    pub mean_abs_cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub wall_seconds: f64,
}

impl TrainLog {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("a log always holds the epoch-0 record")
    }

    /// Everything except wall time, which is the only nondeterministic field.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.records == other.records
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str("epoch,loss,acc,frob_dist,mean_cos,mean_abs_cos\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.loss, r.accuracy, r.frob_dist, r.mean_cosine, r.mean_abs_cosine
            ));
        }
        s
    }

    /// Writes the CSV; wall time goes in a trailing comment so the rows stay
    /// comparable across reruns.
    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let body = self.to_csv(comment) + &format!("# wall_seconds={:.3}\n", self.wall_seconds);
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Pairs sampled for the absolute cosine when full enumeration is too large.
pub const COSINE_PAIR_BUDGET: usize = 10_000;

/// Mean signed and absolute cosine similarity over distinct pairs.
///
/// The signed mean is exact via `(‖Σu‖² − Σ‖u‖²) / (n(n−1))` on unit vectors;
/// the absolute mean enumerates all pairs up to `pair_budget`, else samples.
pub fn pairwise_cosine(vectors: &[Vec<f64>], pair_budget: usize, seed: u64) -> (f64, f64) {
    let n = vectors.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let units: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter().map(|x| x / norm).collect()
            } else {
                vec![0.0; v.len()]
            }
        })
        .collect();
    let dim = units[0].len();
    let mut total = vec![0.0; dim];
    let mut self_dots = 0.0;
    for u in &units {
        for (t, x) in total.iter_mut().zip(u) {
            *t += x;
        }
        self_dots += dot(u, u);
    }
    let pairs = (n * (n - 1)) as f64;
    let signed = (dot(&total, &total) - self_dots) / pairs;

    let all_pairs = n * (n - 1) / 2;
    let abs = if all_pairs <= pair_budget {
        let mut acc = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                acc += dot(&units[i], &units[j]).abs();
            }
        }
        acc / all_pairs as f64
    } else {
        let mut rng = stream_rng(seed, 0);
        let mut acc = 0.0;
        for _ in 0..pair_budget {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            acc += dot(&units[i], &units[j]).abs();
        }
        acc / pair_budget as f64
    };
    (signed, abs)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
