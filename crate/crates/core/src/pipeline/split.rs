use rand::seq::{IndexedRandom, SliceRandom};

use super::extract::NightInstance;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Default number of cross-validation folds.
pub const DEFAULT_FOLDS: usize = 5;
/// Per-class size after resampling a training split.
pub const DEFAULT_TARGET_PER_CLASS: usize = 2600;

/// Fold id for every instance, aligned with the slice that was split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl DatasetSplit {
    pub fn test_positions(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_positions(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Shuffles each class separately and deals it round-robin across folds.
/// Negatives continue where the positives stopped, which keeps totals level.
pub fn stratified_kfold(instances: &[NightInstance], k: usize, seed: u64) -> Result<DatasetSplit> {
    if k < 2 {
        return Err(Error::input("k-fold split needs k >= 2"));
    }
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..instances.len()).partition(|&i| instances[i].label == 1);
    if pos.len() < k {
        return Err(Error::input(format!("{} positives cannot fill {k} folds", pos.len())));
    }
    pos.shuffle(&mut stream_rng(seed, 0));
    neg.shuffle(&mut stream_rng(seed, 1));
    let mut folds = vec![0; instances.len()];
    for (j, &i) in pos.iter().chain(&neg).enumerate() {
        folds[i] = j % k;
    }
    Ok(DatasetSplit { k, folds })
}

fn split_classes(train: &[NightInstance]) -> (Vec<&NightInstance>, Vec<&NightInstance>) {
    train.iter().partition(|i| i.label == 1)
}

/// Draws exactly `target` from `pool`. Without replacement when the pool is
/// large enough; otherwise the whole pool plus replacement draws for the rest.
fn draw<'a>(pool: &[&'a NightInstance], target: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<&'a NightInstance> {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    if shuffled.len() >= target {
        shuffled.truncate(target);
        return shuffled;
    }
    let extra: Vec<&NightInstance> = (shuffled.len()..target).map(|_| *pool.choose(rng).expect("non-empty")).collect();
    shuffled.extend(extra);
    shuffled
}

/// Undersamples negatives and oversamples positives (with replacement) to
/// `target_per_class` each, then shuffles.
pub fn resample_training(train: &[NightInstance], target_per_class: usize, seed: u64) -> Result<Vec<NightInstance>> {
    let (pos, neg) = split_classes(train);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::input("resampling needs both classes in the training data"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut neg_out = neg.clone();
    neg_out.shuffle(&mut rng);
    neg_out.truncate(target_per_class);
    let mut out: Vec<NightInstance> = draw(&pos, target_per_class, &mut rng)
        .into_iter()
        .chain(neg_out)
        .cloned()
        .collect();
    out.shuffle(&mut rng);
    Ok(out)
}

/// Keeps every positive and at most `target` negatives, shuffled.
pub fn undersample_negatives(train: &[NightInstance], target: usize, seed: u64) -> Result<Vec<NightInstance>> {
    let (pos, mut neg) = split_classes(train);
    if neg.is_empty() {
        return Err(Error::input("no negatives to undersample"));
    }
    let mut rng = stream_rng(seed, 0);
    neg.shuffle(&mut rng);
    neg.truncate(target);
    let mut out: Vec<NightInstance> = pos.into_iter().chain(neg).cloned().collect();
    out.shuffle(&mut rng);
    Ok(out)
}
