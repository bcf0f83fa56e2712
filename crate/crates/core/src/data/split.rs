use super::{Block, DataError, Instance, Label};
use crate::tensor::RngState;

fn check_bounds(len: usize, train_count: usize) -> Result<(), DataError> {
    if train_count == 0 || train_count >= len {
        return Err(DataError::Config(format!(
            "train count must be in 1..{len}, got {train_count}"
        )));
    }
    Ok(())
}

/// First `train_count` instances train, the rest test.
pub fn split_sequential(
    instances: &[Instance],
    train_count: usize,
) -> Result<(Vec<Instance>, Vec<Instance>), DataError> {
    check_bounds(instances.len(), train_count)?;
    let (a, b) = instances.split_at(train_count);
    Ok((a.to_vec(), b.to_vec()))
}

/// Uniformly random subset of `train_count` instances trains. Both sides
/// keep their original relative order.
pub fn split_random(
    instances: &[Instance],
    train_count: usize,
    seed: u64,
) -> Result<(Vec<Instance>, Vec<Instance>), DataError> {
    check_bounds(instances.len(), train_count)?;
    let mut order: Vec<usize> = (0..instances.len()).collect();
    RngState::new(seed).derive("split").shuffle(&mut order);
    let mut in_train = vec![false; instances.len()];
    for &i in &order[..train_count] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (inst, &t) in instances.iter().zip(&in_train) {
        if t {
            train.push(inst.clone());
        } else {
            test.push(inst.clone());
        }
    }
    Ok((train, test))
}

/// Consecutive non-overlapping blocks; a trailing partial block is kept.
/// Blocks come back labeled by [`label_blocks`].
pub fn blockify(instances: &[Instance], block_size: usize) -> Result<Vec<Block>, DataError> {
    if block_size == 0 {
        return Err(DataError::Config("block size must be at least 1".into()));
    }
    let blocks = instances
        .chunks(block_size)
        .map(|c| Block {
            instances: c.to_vec(),
            label: Label::Unknown,
        })
        .collect();
    Ok(label_blocks(blocks))
}

/// A block is anomalous iff strictly more than half its instances are.
/// Blocks containing any unknown instance label stay unknown.
pub fn label_blocks(mut blocks: Vec<Block>) -> Vec<Block> {
    for block in &mut blocks {
        block.label = if block.instances.iter().any(|i| i.label == Label::Unknown) {
            Label::Unknown
        } else {
            let anomalous = block.instances.iter().filter(|i| i.label.is_anomalous()).count();
            if 2 * anomalous > block.len() {
                Label::Anomalous
            } else {
                Label::Normal
            }
        };
    }
    blocks
}
