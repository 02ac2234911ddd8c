use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// Splits `indices` into mini-batches for one epoch. With `shuffle` the order
/// is a permutation fixed by `(seed, epoch)`; the last batch may be short.
pub fn batches(indices: &[usize], batch_size: usize, seed: u64, epoch: u64, shuffle: bool) -> Result<Vec<Vec<usize>>> {
    batches_for(purpose::BATCHES, indices, batch_size, seed, epoch, shuffle)
}

/// [`batches`] drawing its permutation from the stream of another purpose.
pub fn batches_for(
    stream: u64,
    indices: &[usize],
    batch_size: usize,
    seed: u64,
    epoch: u64,
    shuffle: bool,
) -> Result<Vec<Vec<usize>>> {
    if batch_size < 1 {
        return Err(Error::Range(format!("batch size {batch_size} must be at least 1")));
    }
    if indices.is_empty() {
        return Err(Error::Empty("no indices to batch".into()));
    }
    let mut order = indices.to_vec();
    if shuffle {
        order.shuffle(&mut rng::substream(seed, stream, epoch));
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
