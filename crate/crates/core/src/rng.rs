//! Seedable deterministic random number generation.
//!
//! The simulator must produce byte-identical output for a given seed, so it
//! carries its own generator instead of depending on an external crate whose
//! stream could change between versions. The generator is xoshiro256++
//! seeded through splitmix64, both from the public reference algorithms.

/// Stream-splitting seeder used to expand a 64-bit seed into generator state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256++ generator. 64-bit output, 256-bit state.
#[derive(Debug, Clone)]
pub struct Xoshiro256PlusPlus {
    s: [u64; 4],
}

impl Xoshiro256PlusPlus {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform double in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in [0, n). Lemire's multiply-shift rejection.
    pub fn gen_range(&mut self, n: u64) -> u64 {
        assert!(n > 0, "gen_range requires a non-empty range");
        let mut x = self.next_u64();
        let mut m = (x as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform integer in [lo, hi] inclusive.
    pub fn gen_range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty inclusive range");
        lo + self.gen_range(hi - lo + 1)
    }

    pub fn gen_bool(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Poisson-distributed count with the given mean.
    ///
    /// Knuth's multiplication method, run over chunks of the mean so the
    /// exp(-lambda) threshold never underflows. Poisson(a + b) is the sum of
    /// independent Poisson(a) and Poisson(b) draws, so chunking is exact.
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        assert!(lambda >= 0.0 && lambda.is_finite(), "invalid poisson mean");
        const CHUNK: f64 = 500.0;
        let mut remaining = lambda;
        let mut count = 0u64;
        while remaining > 0.0 {
            let chunk = remaining.min(CHUNK);
            remaining -= chunk;
            let threshold = (-chunk).exp();
            let mut product = 1.0f64;
            loop {
                product *= self.next_f64();
                if product <= threshold {
                    break;
                }
                count += 1;
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Xoshiro256PlusPlus::seed_from_u64(7);
        let mut b = Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = Xoshiro256PlusPlus::seed_from_u64(1);
        let mut b = Xoshiro256PlusPlus::seed_from_u64(2);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert!(same < 4);
    }

    #[test]
    fn f64_stays_in_unit_interval() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn gen_range_bounds_and_coverage() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let mut seen = [false; 7];
        for _ in 0..10_000 {
            let x = rng.gen_range(7);
            assert!(x < 7);
            seen[x as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn gen_range_roughly_uniform() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(13);
        let n = 4u64;
        let draws = 100_000;
        let mut counts = [0u64; 4];
        for _ in 0..draws {
            counts[rng.gen_range(n) as usize] += 1;
        }
        // 3 sigma around draws/4 for a binomial with p = 1/4
        let expected = draws as f64 / n as f64;
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - expected).abs() < 3.0 * sigma,
                "count {c} vs {expected}"
            );
        }
    }

    #[test]
    fn poisson_mean_tracks_lambda() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        for &lambda in &[0.5, 4.0, 60.0, 750.0] {
            let draws = 20_000;
            let sum: u64 = (0..draws).map(|_| rng.poisson(lambda)).sum();
            let mean = sum as f64 / draws as f64;
            let sigma = (lambda / draws as f64).sqrt();
            assert!(
                (mean - lambda).abs() < 5.0 * sigma.max(1e-3),
                "poisson mean {mean} vs lambda {lambda}"
            );
        }
    }

    #[test]
    fn poisson_zero_mean_is_zero() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(19);
        for _ in 0..100 {
            assert_eq!(rng.poisson(0.0), 0);
        }
    }
}
