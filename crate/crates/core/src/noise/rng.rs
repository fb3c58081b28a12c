use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifies a reproducible random sequence: a master seed plus a stream index.
///
/// The same `(seed, stream_id)` always produces the same draws on every platform.
/// [`RngStream::derive`] gives child streams for independent consumers
/// (one per channel, one per injection event, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream_id: 0 }
    }

    /// Child stream `index` of this stream. Distinct indices give distinct streams.
    pub fn derive(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: splitmix64(splitmix64(self.stream_id) ^ index),
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_id);
        StreamRng {
            inner,
            spare_normal: None,
        }
    }
}

/// Generator state for one [`RngStream`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl StreamRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.inner.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Standard normal draw by the Box-Muller transform; the second value of each pair is cached.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_sequence() {
        let s = RngStream::new(42).derive(3);
        let a: Vec<u64> = (0..16)
            .map({
                let mut r = s.rng();
                move |_| r.next_u64()
            })
            .collect();
        let mut r = s.rng();
        let b: Vec<u64> = (0..16).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_streams_differ() {
        let root = RngStream::new(7);
        let mut ids: Vec<u64> = (0..1000).map(|i| root.derive(i).stream_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 1000);
        let mut a = root.derive(0).rng();
        let mut b = root.derive(1).rng();
        assert_ne!(a.next_u64(), b.next_u64());
        assert_ne!(
            RngStream::new(1).rng().next_u64(),
            RngStream::new(2).rng().next_u64()
        );
    }

    #[test]
    fn derived_streams_uncorrelated() {
        let root = RngStream::new(99);
        let mut a = root.derive(0).rng();
        let mut b = root.derive(1).rng();
        let n = 200_000;
        let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (x, y) = (a.uniform() - 0.5, b.uniform() - 0.5);
            sa += x;
            sb += y;
            sab += x * y;
        }
        let n = n as f64;
        let corr = (sab / n - sa / n * sb / n) / (1.0 / 12.0);
        assert!(corr.abs() < 0.01, "correlation {corr}");
    }

    #[test]
    fn uniform_in_unit_interval_and_below_in_range() {
        let mut r = RngStream::new(5).rng();
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut r = RngStream::new(1).rng();
        let mut v: Vec<usize> = (0..50).collect();
        r.shuffle(&mut v);
        let mut s = v.clone();
        s.sort_unstable();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
        assert_ne!(v, s);
    }
}
