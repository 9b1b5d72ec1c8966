use serde::{Deserialize, Serialize};

/// Penalty, temperature and exploration schedules over `T` rounds.
///
/// `β_t = β√T` is constant, `τ_t = βT²/(t+1)` decreases in `t`, and
/// `σ_t = σ₀·ρᵗ`. Training uses the fixed temperature unless
/// `theory_temperature` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSet {
    pub beta_base: f64,
    pub horizon: usize,
    pub sigma0: f64,
    pub sigma_decay: f64,
    pub theory_temperature: bool,
    pub fixed_temperature: f64,
}

impl Default for ScheduleSet {
    fn default() -> Self {
        Self {
            beta_base: 1.0,
            horizon: 100,
            sigma0: 1.0,
            sigma_decay: 0.995,
            theory_temperature: false,
            fixed_temperature: 1.0,
        }
    }
}

impl ScheduleSet {
    pub fn beta(&self, _t: usize) -> f64 {
        self.beta_base * (self.horizon.max(1) as f64).sqrt()
    }

    pub fn theory_tau(&self, t: usize) -> f64 {
        let big_t = self.horizon.max(1) as f64;
        self.beta_base * big_t * big_t / (t as f64 + 1.0)
    }

    pub fn tau(&self, t: usize) -> f64 {
        if self.theory_temperature {
            self.theory_tau(t)
        } else {
            self.fixed_temperature
        }
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma0 * self.sigma_decay.powi(t as i32)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta_base > 0.0) {
            return Err("schedule.beta_base must be positive".into());
        }
        if self.horizon == 0 {
            return Err("schedule.horizon must be positive".into());
        }
        if !(self.sigma0 > 0.0) || !(self.sigma_decay > 0.0 && self.sigma_decay <= 1.0) {
            return Err("schedule.sigma0 must be positive and sigma_decay in (0, 1]".into());
        }
        if !(self.fixed_temperature > 0.0) {
            return Err("schedule.fixed_temperature must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_schedules() {
        let s = ScheduleSet {
            beta_base: 0.5,
            horizon: 50,
            ..Default::default()
        };
        for t in 0..50 {
            assert!(s.theory_tau(t + 1) < s.theory_tau(t));
            assert!(s.sigma(t + 1) <= s.sigma(t));
            assert_eq!(s.beta(t), s.beta(t + 1));
        }
        assert!((s.beta(0) - 0.5 * 50f64.sqrt()).abs() < 1e-12);
        assert!((s.theory_tau(0) - 0.5 * 2500.0).abs() < 1e-9);
        assert_eq!(s.tau(3), 1.0);
    }
}
