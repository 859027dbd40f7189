use std::path::Path;

use qkc::kernel_correlation::{DEFAULT_SIGMA_SQ_2D, DEFAULT_SIGMA_SQ_3D};
use qkc::quantum_kernel::EncodingMode;
use qkc::{
    Axis, FeatureVariant, GaussianKernelParams, KernelHandle, Mode, QuantumFeatureMapConfig,
    SweepGrid, TrainingConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
    Quantum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Exact,
    Sampled,
}

/// Every tunable of every command with defaults materialised. Fields missing
/// from a config file keep their defaults; CLI flags override both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    pub threads: Option<usize>,
    pub qubits: usize,
    pub kernel: KernelKind,
    /// Gaussian bandwidth; `None` picks the 2D or 3D default from the data.
    pub sigma2: Option<f64>,
    pub variant: FeatureVariant,
    pub encoding: EncodingMode,
    pub bits: usize,
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub mode: Mode,
    pub axis: Option<Axis>,
    pub estimator: EstimatorKind,
    pub shots: u64,
    /// Uniform landscape grid size for `sweep-kc`; `None` uses bin medians.
    pub grid: Option<usize>,
    /// `bins` or `uniform:K`.
    pub sweep: String,
    pub ratios: Vec<f64>,
    pub runs: usize,
    /// Outlier spread as a fraction of the shape radius.
    pub sigma_noise: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Settings {
            seed: 0,
            threads: None,
            qubits: 4,
            kernel: KernelKind::Gaussian,
            sigma2: None,
            variant: FeatureVariant::Coyle,
            encoding: EncodingMode::Binned,
            bits: 3,
            iters: t.iterations,
            batch: t.batch_size,
            lr: t.learning_rate_init,
            decay_every: t.decay_every,
            decay_factor: t.decay_factor,
            mode: t.mode,
            axis: None,
            estimator: EstimatorKind::Exact,
            shots: 10_000,
            grid: None,
            sweep: "bins".into(),
            ratios: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
            runs: 50,
            sigma_noise: 0.3,
        }
    }
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = config else {
            return Ok(Settings::default());
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Core(qkc::Error::io(path, e)))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::BadArgs(format!("config {}: {e}", path.display())))
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            learning_rate_init: self.lr,
            decay_factor: self.decay_factor,
            decay_every: self.decay_every,
            batch_size: self.batch,
            iterations: self.iters,
            seed: self.seed,
            mode: self.mode,
            ..TrainingConfig::default()
        }
    }

    pub fn feature_map(&self) -> QuantumFeatureMapConfig {
        QuantumFeatureMapConfig {
            variant: self.variant,
            mode: self.encoding,
            bits_per_axis: self.bits,
        }
    }

    pub fn sigma_sq(&self, dim: usize) -> f64 {
        self.sigma2.unwrap_or(if dim == 3 {
            DEFAULT_SIGMA_SQ_3D
        } else {
            DEFAULT_SIGMA_SQ_2D
        })
    }

    pub fn kernel(&self, dim: usize) -> Result<KernelHandle, CliError> {
        Ok(match self.kernel {
            KernelKind::Gaussian => KernelHandle::Gaussian(
                GaussianKernelParams::with_sigma_sq(self.sigma_sq(dim)).map_err(CliError::bad)?,
            ),
            KernelKind::Quantum => KernelHandle::Quantum(self.feature_map()),
        })
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid, CliError> {
        self.sweep.parse().map_err(CliError::bad)
    }

    /// Rotation axis for `dim`-dimensional data: none in 2D, z by default in 3D.
    pub fn axis_for(&self, dim: usize) -> Result<Option<Axis>, CliError> {
        match (dim, self.axis) {
            (2, Some(_)) => Err(CliError::BadArgs("--axis only applies to 3D data".into())),
            (2, None) => Ok(None),
            (_, axis) => Ok(Some(axis.unwrap_or(Axis::Z))),
        }
    }
}
