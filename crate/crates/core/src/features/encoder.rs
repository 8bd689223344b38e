//! Contextual word-vector interface plus the deterministic hash fallback.
//!
//! Real pretrained encoders plug in behind [`ContextualEncoder`]; the hash
//! encoder keeps every pipeline runnable and reproducible with no model
//! files. Its vectors are seeded hashes of (subword surface, position
//! bucket), so identical tokens in the same position always map to the same
//! point and training on top of them is stable.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("encoder failure: {0}")]
    Failure(String),
    #[error("encoder produced {got} rows for {expected} tokens")]
    TokenCountMismatch { got: usize, expected: usize },
}

/// Token-level contextual vectors. Implementations pool subword pieces to
/// token granularity (mean) and must be deterministic in evaluation mode.
pub trait ContextualEncoder: Send + Sync {
    /// Stable identifier recorded in model manifests, e.g. `hash-32@v1`.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    /// One row per token.
    fn encode(&self, tokens: &[String]) -> Result<Array2<f64>, EncoderError>;
    /// Whether concurrent `encode` calls are safe; the framework serializes
    /// calls to encoders that say no.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Wraps an encoder that is not safe for concurrent `encode` calls behind a
/// lock. [`ensure_concurrent`] applies it automatically.
pub struct SerializedEncoder {
    inner: std::sync::Arc<dyn ContextualEncoder>,
    lock: std::sync::Mutex<()>,
}

impl ContextualEncoder for SerializedEncoder {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn encode(&self, tokens: &[String]) -> Result<Array2<f64>, EncoderError> {
        let _guard = self.lock.lock().expect("encoder lock poisoned");
        self.inner.encode(tokens)
    }
}

/// Returns the encoder unchanged when it allows concurrent calls, otherwise
/// a serializing wrapper around it.
pub fn ensure_concurrent(
    encoder: std::sync::Arc<dyn ContextualEncoder>,
) -> std::sync::Arc<dyn ContextualEncoder> {
    if encoder.concurrent_safe() {
        encoder
    } else {
        std::sync::Arc::new(SerializedEncoder { inner: encoder, lock: std::sync::Mutex::new(()) })
    }
}

/// Maximum position bucket; longer sentences share the last bucket.
const POSITION_BUCKETS: u64 = 16;
/// Tokens longer than this split into 4-char subword pieces.
const SUBWORD_MAX: usize = 8;
/// Relative strength of the position component against the surface hash.
const POSITION_WEIGHT: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct HashEncoder {
    dim: usize,
    seed: u64,
}

impl HashEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "encoder dim must be positive");
        HashEncoder { dim, seed }
    }

    /// WordPiece-style deterministic split: short tokens stay whole, longer
    /// ones break into 4-char pieces.
    pub fn subwords(token: &str) -> Vec<String> {
        let chars: Vec<char> = token.chars().collect();
        if chars.len() <= SUBWORD_MAX {
            return vec![token.to_string()];
        }
        chars.chunks(4).map(|c| c.iter().collect()).collect()
    }

    /// Unit-norm hash vector for one subword at one position bucket: a
    /// surface-keyed hash blended with a weaker position-keyed hash, so the
    /// same word at different positions stays in a tight cone while nearby
    /// positions remain distinguishable.
    pub fn subword_vector(&self, subword: &str, position: usize) -> Array1<f64> {
        let bucket = (position as u64).min(POSITION_BUCKETS - 1);
        let mut v = hash_stream(self.dim, fnv1a(self.seed, subword.as_bytes(), 0));
        let pos = hash_stream(self.dim, fnv1a(self.seed, b"\x00pos", bucket));
        v.scaled_add(POSITION_WEIGHT, &pos);
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            v.mapv_inplace(|x| x / norm);
        }
        v
    }
}

impl ContextualEncoder for HashEncoder {
    fn id(&self) -> String {
        format!("hash-{}@v1:{}", self.dim, self.seed)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, tokens: &[String]) -> Result<Array2<f64>, EncoderError> {
        let mut out = Array2::<f64>::zeros((tokens.len(), self.dim));
        for (i, token) in tokens.iter().enumerate() {
            let pieces = Self::subwords(&token.to_lowercase());
            let mut row = Array1::<f64>::zeros(self.dim);
            for piece in &pieces {
                row += &self.subword_vector(piece, i);
            }
            row.mapv_inplace(|x| x / pieces.len() as f64);
            out.row_mut(i).assign(&row);
        }
        Ok(out)
    }
}

/// Uniform [-1, 1) values from a seeded SplitMix64 stream.
fn hash_stream(dim: usize, key: u64) -> Array1<f64> {
    let mut state = key;
    let mut v = Array1::<f64>::zeros(dim);
    for x in v.iter_mut() {
        state = splitmix64(state);
        *x = (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0;
    }
    v
}

fn fnv1a(seed: u64, bytes: &[u8], extra: u64) -> u64 {
    let mut hash = 0xcbf29ce484222325u64 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash ^= extra;
    hash.wrapping_mul(0x100000001b3)
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn same_word_same_seed_same_vector() {
        let enc = HashEncoder::new(16, 7);
        let a = enc.encode(&toks(&["oil", "rose"])).unwrap();
        let b = enc.encode(&toks(&["oil", "rose"])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_give_different_vectors() {
        let a = HashEncoder::new(32, 1);
        let b = HashEncoder::new(32, 2);
        let words: Vec<String> = (0..100).map(|i| format!("word{i}")).collect();
        let va = a.encode(&words).unwrap();
        let vb = b.encode(&words).unwrap();
        let collisions = (0..100)
            .filter(|&i| {
                let d = (&va.row(i) - &vb.row(i)).mapv(f64::abs).sum();
                d < 1e-9
            })
            .count();
        assert!(collisions == 0, "{collisions} collisions across seeds");
    }

    #[test]
    fn short_token_rows_are_unit_norm() {
        let enc = HashEncoder::new(24, 3);
        let out = enc.encode(&toks(&["oil", "prices", "fall"])).unwrap();
        for row in out.rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn long_token_row_is_mean_of_subword_vectors() {
        let enc = HashEncoder::new(16, 5);
        let token = "supercalifrag"; // 13 chars -> 4 pieces of <=4 chars
        let pieces = HashEncoder::subwords(token);
        assert_eq!(pieces, vec!["supe", "rcal", "ifra", "g"]);
        let out = enc.encode(&toks(&[token])).unwrap();
        let mut expected = Array1::<f64>::zeros(16);
        for p in &pieces {
            expected += &enc.subword_vector(p, 0);
        }
        expected.mapv_inplace(|x| x / pieces.len() as f64);
        let diff = (&out.row(0) - &expected).mapv(f64::abs).sum();
        assert!(diff < 1e-12);
    }

    #[test]
    fn row_count_matches_token_count() {
        let enc = HashEncoder::new(16, 1);
        let out = enc.encode(&toks(&["a", "b", "c", "d", "e"])).unwrap();
        assert_eq!(out.nrows(), 5);
        assert_eq!(out.ncols(), 16);
    }

    /// Encoder that panics on overlapping encode calls unless serialized.
    struct FussyEncoder {
        busy: std::sync::atomic::AtomicBool,
        inner: HashEncoder,
    }

    impl ContextualEncoder for FussyEncoder {
        fn id(&self) -> String {
            "fussy@v1".to_string()
        }

        fn dim(&self) -> usize {
            self.inner.dim()
        }

        fn encode(&self, tokens: &[String]) -> Result<Array2<f64>, EncoderError> {
            use std::sync::atomic::Ordering;
            assert!(
                !self.busy.swap(true, Ordering::SeqCst),
                "concurrent call into a non-concurrent encoder"
            );
            std::thread::sleep(std::time::Duration::from_millis(1));
            let out = self.inner.encode(tokens);
            self.busy.store(false, Ordering::SeqCst);
            out
        }

        fn concurrent_safe(&self) -> bool {
            false
        }
    }

    #[test]
    fn non_concurrent_encoders_are_serialized() {
        let fussy = std::sync::Arc::new(FussyEncoder {
            busy: std::sync::atomic::AtomicBool::new(false),
            inner: HashEncoder::new(8, 1),
        });
        let wrapped = ensure_concurrent(fussy);
        assert_eq!(wrapped.id(), "fussy@v1");
        std::thread::scope(|scope| {
            for _ in 0..4 {
                let enc = std::sync::Arc::clone(&wrapped);
                scope.spawn(move || {
                    for _ in 0..5 {
                        enc.encode(&toks(&["oil", "rose"])).unwrap();
                    }
                });
            }
        });
        // A concurrent-safe encoder is returned as-is (same allocation).
        let safe: std::sync::Arc<dyn ContextualEncoder> =
            std::sync::Arc::new(HashEncoder::new(8, 1));
        let same = ensure_concurrent(std::sync::Arc::clone(&safe));
        assert!(std::sync::Arc::ptr_eq(&safe, &same));
    }
}
