use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable content hash of a matrix (shape and exact bit patterns).
pub fn matrix_hash(m: &DMatrix<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    m.shape().hash(&mut h);
    for v in m.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn dataset_hash(x: &DMatrix<f64>, y: &DVector<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    matrix_hash(x).hash(&mut h);
    for v in y.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Independent generator for `(seed, stream)`; ChaCha is counter based, so
/// streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
