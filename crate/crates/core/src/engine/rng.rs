use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// What a stream's samples are used for. Each purpose of each vehicle
/// draws from its own stream, so adding a vehicle or a sampling site never
/// shifts the samples of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Purpose {
    Interarrival = 1,
    UplinkPayload = 2,
    Instructions = 3,
    DisseminationRadius = 4,
    Mobility = 5,
    /// Free for tests and ad-hoc samplers.
    Auxiliary = 255,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub repetition: u32,
    pub vehicle: u32,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(repetition: u32, vehicle: u32, purpose: Purpose) -> Self {
        Self {
            repetition,
            vehicle,
            purpose,
        }
    }

    fn stream_id(&self) -> u64 {
        (u64::from(self.repetition) << 40) | (u64::from(self.vehicle) << 8) | self.purpose as u64
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("exponential mean must be finite and > 0, got {0}")]
    ExpMean(f64),
    #[error("uniform bounds must be finite with lo <= hi, got [{0}, {1}]")]
    UniformBounds(f64, f64),
    #[error("Poisson rate must be finite and > 0, got {0}")]
    PoissonRate(f64),
}

/// A reproducible random stream identified by `(root_seed, key)`.
///
/// Backed by ChaCha8 with the key mapped onto the cipher's stream
/// counter, so sequences are identical across platforms.
#[derive(Debug, Clone)]
pub struct RngStream {
    root_seed: u64,
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(root_seed: u64, key: StreamKey) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
        rng.set_stream(key.stream_id());
        Self {
            root_seed,
            key,
            rng,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn sample_exp(&mut self, mean: f64) -> Result<f64, SamplerError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(SamplerError::ExpMean(mean));
        }
        let exp = Exp::new(1.0 / mean).map_err(|_| SamplerError::ExpMean(mean))?;
        Ok(exp.sample(&mut self.rng))
    }

    pub fn sample_uniform(&mut self, lo: f64, hi: f64) -> Result<f64, SamplerError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SamplerError::UniformBounds(lo, hi));
        }
        if lo == hi {
            return Ok(lo);
        }
        let u: f64 = self.rng.random();
        // u in [0, 1); clamp guards rounding for wide intervals.
        Ok((lo + u * (hi - lo)).min(hi))
    }

    /// Time to the next arrival of a Poisson process of rate `rate_hz`.
    pub fn sample_poisson_interarrival(&mut self, rate_hz: f64) -> Result<f64, SamplerError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(SamplerError::PoissonRate(rate_hz));
        }
        self.sample_exp(1.0 / rate_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(vehicle: u32, purpose: Purpose) -> RngStream {
        RngStream::new(42, StreamKey::new(0, vehicle, purpose))
    }

    #[test]
    fn identical_keys_identical_samples() {
        let mut a = stream(3, Purpose::Interarrival);
        let mut b = stream(3, Purpose::Interarrival);
        for _ in 0..100 {
            assert_eq!(
                a.sample_exp(2.0).unwrap().to_bits(),
                b.sample_exp(2.0).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn distinct_keys_diverge() {
        let mut a = stream(3, Purpose::Interarrival);
        let mut b = stream(4, Purpose::Interarrival);
        let mut c = stream(3, Purpose::Instructions);
        let xa: Vec<f64> = (0..8)
            .map(|_| a.sample_uniform(0.0, 1.0).unwrap())
            .collect();
        let xb: Vec<f64> = (0..8)
            .map(|_| b.sample_uniform(0.0, 1.0).unwrap())
            .collect();
        let xc: Vec<f64> = (0..8)
            .map(|_| c.sample_uniform(0.0, 1.0).unwrap())
            .collect();
        assert_ne!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn degenerate_uniform() {
        let mut s = stream(0, Purpose::Auxiliary);
        assert_eq!(s.sample_uniform(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(s.sample_uniform(7.5, 7.5).unwrap(), 7.5);
    }

    #[test]
    fn parameter_errors() {
        let mut s = stream(0, Purpose::Auxiliary);
        assert_eq!(s.sample_exp(0.0), Err(SamplerError::ExpMean(0.0)));
        assert!(s.sample_exp(-1.0).is_err());
        assert!(s.sample_exp(f64::NAN).is_err());
        assert!(s.sample_uniform(1.0, 0.0).is_err());
        assert!(s.sample_poisson_interarrival(0.0).is_err());
    }

    #[test]
    fn samples_are_in_range() {
        let mut s = stream(0, Purpose::Auxiliary);
        for _ in 0..10_000 {
            let u = s.sample_uniform(-3.0, 5.0).unwrap();
            assert!((-3.0..=5.0).contains(&u));
            assert!(s.sample_exp(1.0).unwrap() >= 0.0);
        }
    }
}
