//! Deterministic pseudo-random number generation.
//!
//! All stochastic operations in this crate draw from [`SplitMix64`]
//! (Sebastiano Vigna's 64-bit finalizer-based generator). The algorithm is
//! fully specified by the three constants below, so any other implementation
//! of the same recurrence reproduces our streams bit-for-bit. Independent
//! streams are derived with [`derive_seed`], which feeds tag words through
//! the same mixing function.

/// SplitMix64 generator. Non-cryptographic, 2^64 period, passes BigCrush.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform in (0, 1]; safe to pass to `ln`.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in [0, n). Rejection-sampled to avoid modulo bias.
    pub fn next_range(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_range: empty range");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform in [lo, hi].
    pub fn next_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Log-uniform in [lo, hi]; both bounds must be positive.
    pub fn next_log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (self.next_uniform(lo.ln(), hi.ln())).exp()
    }

    /// Standard normal via the basic Box-Muller transform.
    ///
    /// Uses two uniforms per draw and discards the sine branch, keeping the
    /// stream position independent of any caller state.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Choose `k` distinct indices from [0, n), uniformly, in selection order.
    /// Partial Fisher-Yates over a scratch index vector.
    pub fn choose_k(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "choose_k: k exceeds n");
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_range((n - i) as u64) as usize;
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let n = items.len();
        for i in 0..n.saturating_sub(1) {
            let j = i + self.next_range((n - i) as u64) as usize;
            items.swap(i, j);
        }
    }
}

/// Derive an independent stream seed from a master seed and tag words.
///
/// Each tag advances the state by its value plus the SplitMix64 increment and
/// applies the mixing function, so distinct tag sequences land in distinct,
/// well-separated stream positions.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix(master.wrapping_add(GOLDEN_GAMMA));
    for &t in tags {
        state = mix(state.wrapping_add(t).wrapping_add(GOLDEN_GAMMA));
    }
    state
}
