use crate::error::{Error, Result};
use crate::numerics::Network;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Fixed-σ Gaussian around the network mean `f(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Network,
    pub stddev: f64,
}

/// `log N(a; mean, std²)`.
pub fn gaussian_log_density(a: f64, mean: f64, std: f64) -> f64 {
    let z = a - mean;
    -z * z / (2.0 * std * std) - ((2.0 * std::f64::consts::PI).sqrt() * std).ln()
}

impl GaussianPolicy {
    pub fn new(net: Network, stddev: f64) -> Result<Self> {
        if !(stddev > 0.0) {
            return Err(Error::invalid("stddev", format!("must be positive, got {stddev}")));
        }
        Ok(Self { net, stddev })
    }

    pub fn mean(&self, state: &[f64]) -> Result<f64> {
        self.net.forward(state)
    }

    pub fn log_prob(&self, state: &[f64], action: f64) -> Result<f64> {
        if !(self.stddev > 0.0) {
            return Err(Error::invalid("stddev", "must be positive"));
        }
        Ok(gaussian_log_density(action, self.mean(state)?, self.stddev))
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<f64> {
        let z: f64 = StandardNormal.sample(rng);
        Ok(self.mean(state)? + self.stddev * z)
    }

    pub(crate) fn accumulate_grad_log_prob(&self, state: &[f64], action: f64, scale: f64, out: &mut [f64]) {
        let mean = self.net.eval(state);
        let c = scale * (action - mean) / (self.stddev * self.stddev);
        self.net.accumulate_gradient(state, c, out);
    }

    pub(crate) fn accumulate_grad_kl(
        &self,
        state: &[f64],
        ref_mean: f64,
        ref_std: f64,
        scale: f64,
        out: &mut [f64],
    ) -> f64 {
        let mean = self.net.eval(state);
        let c = scale * (mean - ref_mean) / (ref_std * ref_std);
        self.net.accumulate_gradient(state, c, out);
        (ref_std / self.stddev).ln() + (self.stddev.powi(2) + (mean - ref_mean).powi(2)) / (2.0 * ref_std * ref_std)
            - 0.5
    }
}
