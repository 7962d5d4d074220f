/// Per-user effective SINR and the spectral efficiency it guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrVector {
    pub gamma: Vec<f64>,
    /// log2(1 + γ) in bit/s/Hz.
    pub se: Vec<f64>,
}

impl SinrVector {
    pub fn from_gamma(gamma: Vec<f64>) -> Self {
        let se = gamma.iter().map(|g| (1.0 + g).log2()).collect();
        Self { gamma, se }
    }

    pub fn users(&self) -> usize {
        self.gamma.len()
    }

    pub fn sum_se(&self) -> f64 {
        self.se.iter().sum()
    }
}

/// `signal / denominator`, with an unreachable user (no signal) at 0 and a
/// vanishing denominator clamped to `f64::MAX`.
pub(crate) fn ratio(signal: f64, denominator: f64) -> f64 {
    if signal <= 0.0 {
        0.0
    } else if denominator <= 0.0 {
        f64::MAX
    } else {
        (signal / denominator).min(f64::MAX)
    }
}
