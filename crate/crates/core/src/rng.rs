//! Seeded random engine and the shared string referential.
//!
//! All generators draw from [`SeededRng`], a ChaCha8 stream cipher RNG keyed
//! by the benchmark seed. Each pipeline stage opens its own named stream
//! (`PURPOSE_*` tags hashed into the cipher's stream counter), so regenerating
//! one artifact never shifts the draws of another: the same `(seed, purpose)`
//! always replays the same sequence regardless of what ran before it.
//!
//! Gaussian draws are the workhorse: expanded parameters come from
//! `N(avg, sigma_ratio * avg)`, and skewed key/attribute selection over a
//! range of size `n` comes from `N(n/2, n/6)` so that roughly 99.7% of the
//! mass lands inside the range before clamping.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Stream tag for expanding averaged parameters into per-table values.
pub const PURPOSE_PARAMS: &str = "params";
/// Stream tag for schema synthesis (fact-to-dimension attachment).
pub const PURPOSE_SCHEMA: &str = "schema";
/// Stream tag for tuple generation.
pub const PURPOSE_DATA: &str = "data";
/// Stream tag for workload generation.
pub const PURPOSE_WORKLOAD: &str = "workload";
/// Stream tag for refresh planning and refresh operations.
pub const PURPOSE_ETL: &str = "etl";
/// Stream tag for building the string referential pool.
pub const PURPOSE_REFERENTIAL: &str = "referential";

/// FNV-1a 64-bit hash; maps a purpose tag to a ChaCha stream number.
fn fnv64(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Rounds half-up to the nearest integer: 2.5 becomes 3, -0.2 becomes 0.
fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Deterministic random source for one pipeline stage.
#[derive(Debug, Clone)]
pub struct SeededRng {
    rng: ChaCha8Rng,
    sigma_ratio: f64,
}

impl SeededRng {
    /// Opens the `(seed, purpose)` stream.
    ///
    /// `sigma_ratio` scales the standard deviation of [`gauss_int`] and
    /// [`gauss_real`] draws relative to their mean; 0 makes them exact.
    ///
    /// [`gauss_int`]: SeededRng::gauss_int
    /// [`gauss_real`]: SeededRng::gauss_real
    pub fn new(seed: u64, purpose: &str, sigma_ratio: f64) -> Self {
        assert!(
            sigma_ratio >= 0.0 && sigma_ratio.is_finite(),
            "sigma_ratio must be a finite non-negative number"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fnv64(purpose));
        SeededRng { rng, sigma_ratio }
    }

    /// The deviation-to-mean ratio this stream applies to averaged draws.
    pub fn sigma_ratio(&self) -> f64 {
        self.sigma_ratio
    }

    /// Uniform draw in `[lo, hi)`. `lo` must be strictly below `hi`.
    pub fn uniform_float(&mut self, lo: f64, hi: f64) -> f64 {
        assert!(lo < hi, "empty uniform range [{lo}, {hi})");
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    /// Uniform integer draw in the inclusive range `[lo, hi]`.
    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty integer range [{lo}, {hi}]");
        self.rng.random_range(lo..=hi)
    }

    /// True with probability `p` (a uniform `[0, 1)` draw lands below `p`).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_float(0.0, 1.0) < p
    }

    /// Raw Gaussian draw from `N(mean, stdev)`.
    ///
    /// A zero `stdev` returns `mean` without consuming a draw.
    pub fn gauss_around(&mut self, mean: f64, stdev: f64) -> f64 {
        if stdev == 0.0 {
            return mean;
        }
        let normal = Normal::new(mean, stdev).expect("stdev must be finite and non-negative");
        normal.sample(&mut self.rng)
    }

    /// Gaussian draw centered on `avg` with deviation `sigma_ratio * avg`,
    /// unrounded. Callers clamp to their own domain.
    pub fn gauss_real(&mut self, avg: f64) -> f64 {
        self.gauss_around(avg, self.sigma_ratio * avg.abs())
    }

    /// Gaussian count draw: `N(avg, sigma_ratio * avg)` rounded half-up and
    /// raised to at least 1.
    pub fn gauss_int(&mut self, avg: f64) -> u64 {
        round_half_up(self.gauss_real(avg)).max(1) as u64
    }

    /// Skewed key draw over `[1, size]`: `N(size/2, size/6)` rounded half-up
    /// and clamped into the range, so central keys are favored and the
    /// extremes still occur via tail clamping.
    pub fn random_key(&mut self, size: u64) -> u64 {
        assert!(size > 0, "random_key needs a non-empty key range");
        let mean = size as f64 / 2.0;
        let stdev = size as f64 / 6.0;
        let raw = round_half_up(self.gauss_around(mean, stdev));
        raw.clamp(1, size as i64) as u64
    }

    /// Skewed 0-based index into a list of `len` elements; the same bell
    /// curve as [`random_key`](SeededRng::random_key), shifted down by one.
    pub fn gauss_index(&mut self, len: usize) -> usize {
        (self.random_key(len as u64) - 1) as usize
    }

    /// Uniform pick of a dimension ordinal in `[0, tot)` avoiding `exclude`.
    ///
    /// Panics if every ordinal is excluded; callers must size `exclude`
    /// below `tot`.
    pub fn random_dimension(&mut self, tot: usize, exclude: &[usize]) -> usize {
        let allowed: Vec<usize> = (0..tot).filter(|d| !exclude.contains(d)).collect();
        assert!(
            !allowed.is_empty(),
            "random_dimension has no candidates: tot={tot}, all excluded"
        );
        let pick = self.uniform_int(0, allowed.len() as u64 - 1) as usize;
        allowed[pick]
    }
}

/// Fixed pool of random strings shared by every string-valued attribute.
///
/// The pool is built once per seed from its own RNG stream; generators then
/// combine an attribute name with a pool entry (`{attr}_{entry}`) so values
/// are recognizably scoped to their column while drawing from a small,
/// repeatable vocabulary.
#[derive(Debug, Clone)]
pub struct StringReferential {
    pool: Vec<String>,
}

impl StringReferential {
    /// Number of entries in the pool.
    pub const POOL_SIZE: usize = 1000;
    /// Length of every pool entry, in characters.
    pub const STRING_LEN: usize = 20;

    /// Builds the pool for `seed` (uppercase A-Z entries).
    pub fn new(seed: u64) -> Self {
        let mut rng = SeededRng::new(seed, PURPOSE_REFERENTIAL, 0.0);
        let pool = (0..Self::POOL_SIZE)
            .map(|_| {
                (0..Self::STRING_LEN)
                    .map(|_| (b'A' + rng.uniform_int(0, 25) as u8) as char)
                    .collect()
            })
            .collect();
        StringReferential { pool }
    }

    /// Draws a value for `attr`: the attribute name, an underscore, and a
    /// uniformly picked pool entry.
    pub fn random_string(&self, rng: &mut SeededRng, attr: &str) -> String {
        let idx = rng.uniform_int(0, Self::POOL_SIZE as u64 - 1) as usize;
        format!("{attr}_{}", self.pool[idx])
    }

    /// Width in characters of any value produced for an attribute whose name
    /// is `attr_name_len` characters long.
    pub fn value_width(attr_name_len: usize) -> usize {
        attr_name_len + 1 + Self::STRING_LEN
    }
}
