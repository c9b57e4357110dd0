use serde::{Deserialize, Serialize};

use super::{GpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    /// One length scale per input.
    #[default]
    Ard,
    /// A single length scale shared by all inputs.
    Isotropic,
}

/// Signal standard deviation, per-input length scales and noise standard
/// deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub signal_std: f64,
    pub length_scales: Vec<f64>,
    pub noise_std: f64,
}

impl KernelHyperparams {
    pub fn new(signal_std: f64, length_scales: Vec<f64>, noise_std: f64) -> Result<Self> {
        let h = Self {
            signal_std,
            length_scales,
            noise_std,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn isotropic(signal_std: f64, length_scale: f64, d: usize, noise_std: f64) -> Result<Self> {
        Self::new(signal_std, vec![length_scale; d], noise_std)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.signal_std) {
            return Err(GpError::Hyperparams(format!("signal std {} must be positive", self.signal_std)));
        }
        if let Some(l) = self.length_scales.iter().find(|&&l| !ok(l)) {
            return Err(GpError::Hyperparams(format!("length scale {l} must be positive")));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(GpError::Hyperparams(format!("noise std {} must be nonnegative", self.noise_std)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }
}

/// Optimisation variable: logs of signal std, length scale(s) and noise
/// std. Length `d + 2` in ARD mode and 3 in isotropic mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogParams(pub Vec<f64>);

impl LogParams {
    pub fn len_for(mode: KernelMode, d: usize) -> usize {
        match mode {
            KernelMode::Ard => d + 2,
            KernelMode::Isotropic => 3,
        }
    }

    /// `(log 1, log 1, ..., log 0.1)`.
    pub fn default_init(mode: KernelMode, d: usize) -> Self {
        let p = Self::len_for(mode, d);
        let mut v = vec![0.0; p];
        v[p - 1] = 0.1f64.ln();
        Self(v)
    }

    pub fn from_hyperparams(h: &KernelHyperparams, mode: KernelMode) -> Result<Self> {
        h.validate()?;
        if h.noise_std == 0.0 {
            return Err(GpError::Hyperparams("zero noise has no log-space representation".into()));
        }
        let mut v = vec![h.signal_std.ln()];
        match mode {
            KernelMode::Ard => v.extend(h.length_scales.iter().map(|l| l.ln())),
            KernelMode::Isotropic => {
                let first = h.length_scales.first().copied().unwrap_or(1.0);
                if h.length_scales.iter().any(|&l| l != first) {
                    return Err(GpError::Hyperparams("isotropic mode needs equal length scales".into()));
                }
                v.push(first.ln());
            }
        }
        v.push(h.noise_std.ln());
        Ok(Self(v))
    }

    pub fn to_hyperparams(&self, mode: KernelMode, d: usize) -> Result<KernelHyperparams> {
        let p = Self::len_for(mode, d);
        if self.0.len() != p {
            return Err(GpError::Dimension(format!(
                "expected {p} log parameters for {d} inputs, got {}",
                self.0.len()
            )));
        }
        let e: Vec<f64> = self.0.iter().map(|t| t.exp()).collect();
        if e.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GpError::NonFinite("hyperparameter after exponentiation"));
        }
        let length_scales = match mode {
            KernelMode::Ard => e[1..=d].to_vec(),
            KernelMode::Isotropic => vec![e[1]; d],
        };
        Ok(KernelHyperparams {
            signal_std: e[0],
            length_scales,
            noise_std: e[p - 1],
        })
    }
}
