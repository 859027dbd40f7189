//! Adam training of the Born machine against the kernel-correlation loss.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::born_machine::{
    circuit_probabilities, forward, shifted_params, AngleBinning, AngleDistribution,
    ParameterShift, DEFAULT_GAMMA,
};
use crate::error::{Error, Result};
use crate::format::num;
use crate::kernel_correlation::{KcTable, KernelHandle};
use crate::registration::{Axis, PointSet};
use crate::statevector::{sample_indices, CircuitParams, OutputDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Expectations over the full simulated distribution.
    Exact,
    /// Expectations over `batch_size` measured bitstrings per circuit.
    Sampled,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate_init: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Fixed measurement-layer angle for every qubit.
    pub gamma: f64,
    /// Record the angle distribution every this many iterations.
    pub snapshot_every: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate_init: 0.02,
            decay_factor: 0.5,
            decay_every: 50,
            batch_size: 1000,
            iterations: 200,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            seed: 0,
            mode: Mode::Exact,
            gamma: DEFAULT_GAMMA,
            snapshot_every: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate_init > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay factor must lie in (0, 1]");
        }
        if self.decay_every == 0 {
            return bad("decay interval must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        Ok(())
    }

    /// Step decay: `lr0 * factor^floor(t / every)`.
    pub fn learning_rate(&self, iteration: usize) -> f64 {
        self.learning_rate_init
            * self
                .decay_factor
                .powi((iteration / self.decay_every) as i32)
    }
}

/// Zero couplings and fields; the circuit then outputs the uniform distribution.
pub fn zero_init(n: usize) -> Result<CircuitParams> {
    CircuitParams::zeros(n, DEFAULT_GAMMA)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    pub lr: f64,
    /// Wall-clock time of the iteration; excluded from reproducibility checks.
    pub ms: f64,
    pub snapshot: Option<AngleDistribution>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainingTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Equality on everything except wall-clock timings.
    pub fn same_run(&self, other: &TrainingTrace) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.iteration == b.iteration
                    && a.loss.to_bits() == b.loss.to_bits()
                    && a.lr.to_bits() == b.lr.to_bits()
                    && a.snapshot == b.snapshot
            })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,loss,lr,ms")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.iteration,
                num(r.loss),
                num(r.lr),
                num(r.ms)
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(cfg: &TrainingConfig, size: usize) -> Self {
        Adam {
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
            m: vec![0.0; size],
            v: vec![0.0; size],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Independent stream seed for `(iteration, slot)` under a master seed.
fn stream_seed(seed: u64, iteration: usize, slot: usize) -> u64 {
    let mut z = seed
        .wrapping_add((iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((slot as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training objective with the KC values at all bin medians precomputed.
pub struct Objective {
    table: KcTable,
}

impl Objective {
    pub fn new(
        model: &PointSet,
        scene: &PointSet,
        n_qubits: usize,
        axis: Option<Axis>,
        k: &KernelHandle,
    ) -> Result<Self> {
        let binning = AngleBinning::new(n_qubits)?;
        Ok(Objective {
            table: KcTable::build(model, scene, binning, axis, k)?,
        })
    }

    pub fn from_table(table: KcTable) -> Self {
        Objective { table }
    }

    pub fn table(&self) -> &KcTable {
        &self.table
    }

    fn expectation(&self, probs: &[f64]) -> f64 {
        probs
            .iter()
            .zip(self.table.values())
            .map(|(p, v)| p * v)
            .sum()
    }

    fn batch_mean(&self, probs: Vec<f64>, batch: usize, seed: u64) -> Result<f64> {
        let n = self.table.binning().n_qubits();
        let dist = OutputDistribution::new(n, probs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = sample_indices(&dist, batch, &mut rng)?;
        Ok(xs.iter().map(|&x| self.table.values()[x]).sum::<f64>() / batch as f64)
    }

    /// Training loss at `params`. In sampled mode the batch is drawn with
    /// `seed`.
    pub fn loss(&self, params: &CircuitParams, mode: Mode, batch: usize, seed: u64) -> Result<f64> {
        let probs = circuit_probabilities(params)?;
        let mean = match mode {
            Mode::Exact => self.expectation(&probs),
            Mode::Sampled => self.batch_mean(probs, batch, seed)?,
        };
        Ok(self.table.weight() * mean)
    }

    /// Parameter-shift gradient of the loss; component `k` is
    /// `-2/(|M||S|) (E_{p+_k}[KC] - E_{p-_k}[KC])`.
    pub fn gradient(
        &self,
        params: &CircuitParams,
        mode: Mode,
        batch: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let count = params.trainable_count();
        (0..count)
            .into_par_iter()
            .map(|k| {
                let plus =
                    circuit_probabilities(&shifted_params(params, ParameterShift::plus(k))?)?;
                let minus =
                    circuit_probabilities(&shifted_params(params, ParameterShift::minus(k))?)?;
                let diff = match mode {
                    Mode::Exact => self.expectation(&plus) - self.expectation(&minus),
                    Mode::Sampled => {
                        self.batch_mean(plus, batch, stream_seed(seed, 0, 2 * k))?
                            - self.batch_mean(minus, batch, stream_seed(seed, 0, 2 * k + 1))?
                    }
                };
                Ok(self.table.weight() * diff)
            })
            .collect()
    }
}

/// Gradient of the training loss for one parameter setting (builds the KC
/// table on every call; [`train`] reuses one).
pub fn gradient(
    params: &CircuitParams,
    model: &PointSet,
    scene: &PointSet,
    axis: Option<Axis>,
    k: &KernelHandle,
    cfg: &TrainingConfig,
) -> Result<Vec<f64>> {
    if !params.is_qaoa() {
        return Err(Error::Unsupported(
            "gradient requires QAOA-mode parameters".into(),
        ));
    }
    let obj = Objective::new(model, scene, params.n_qubits(), axis, k)?;
    obj.gradient(params, cfg.mode, cfg.batch_size, cfg.seed)
}

pub struct TrainOutcome {
    pub params: CircuitParams,
    pub trace: TrainingTrace,
    pub distribution: AngleDistribution,
}

pub fn train_objective(
    obj: &Objective,
    init: &CircuitParams,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if init.n_qubits() != obj.table.binning().n_qubits() {
        return Err(Error::Shape(
            "initial parameters do not match the objective".into(),
        ));
    }
    let mut params = init.clone();
    let mut theta = params.trainable();
    let mut adam = Adam::new(cfg, theta.len());
    let mut trace = TrainingTrace::default();
    for it in 0..cfg.iterations {
        let start = Instant::now();
        let lr = cfg.learning_rate(it);
        let loss = obj.loss(
            &params,
            cfg.mode,
            cfg.batch_size,
            stream_seed(cfg.seed, it, usize::MAX - 1),
        )?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: it,
                what: "loss",
            });
        }
        let grad = obj.gradient(
            &params,
            cfg.mode,
            cfg.batch_size,
            stream_seed(cfg.seed, it, 0),
        )?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                iteration: it,
                what: "gradient",
            });
        }
        let snapshot = match cfg.snapshot_every {
            Some(every) if every > 0 && it % every == 0 => Some(forward(&params)?),
            _ => None,
        };
        adam.step(&mut theta, &grad, lr);
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged {
                iteration: it,
                what: "parameter",
            });
        }
        params.set_trainable(&theta)?;
        trace.records.push(TraceRecord {
            iteration: it,
            loss,
            lr,
            ms: start.elapsed().as_secs_f64() * 1e3,
            snapshot,
        });
    }
    let distribution = forward(&params)?;
    Ok(TrainOutcome {
        params,
        trace,
        distribution,
    })
}

/// Trains from `init` on the (translation-resolved) pair `model`, `scene`.
pub fn train(
    model: &PointSet,
    scene: &PointSet,
    init: &CircuitParams,
    cfg: &TrainingConfig,
    axis: Option<Axis>,
    k: &KernelHandle,
) -> Result<(CircuitParams, TrainingTrace)> {
    let obj = Objective::new(model, scene, init.n_qubits(), axis, k)?;
    let out = train_objective(&obj, init, cfg)?;
    Ok((out.params, out.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_correlation::GaussianKernelParams;

    fn table(values: Vec<f64>) -> Objective {
        let n = values.len().trailing_zeros() as usize;
        Objective::from_table(
            KcTable::from_values(AngleBinning::new(n).unwrap(), values, 4.0).unwrap(),
        )
    }

    #[test]
    fn defaults_and_schedule() {
        let cfg = TrainingConfig::default();
        assert_eq!(cfg.learning_rate_init, 0.02);
        assert_eq!(
            (cfg.decay_factor, cfg.decay_every, cfg.batch_size),
            (0.5, 50, 1000)
        );
        assert_eq!(
            (
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_eps,
                cfg.weight_decay
            ),
            (0.9, 0.999, 1e-8, 0.0)
        );
        assert_eq!(cfg.learning_rate(0), 0.02);
        assert_eq!(cfg.learning_rate(49), 0.02);
        assert_eq!(cfg.learning_rate(50), 0.01);
        assert_eq!(cfg.learning_rate(149), 0.005);
        assert_eq!(cfg.learning_rate(150), 0.0025);
    }

    #[test]
    fn zero_init_counts() {
        assert_eq!(zero_init(4).unwrap().trainable(), vec![0.0; 10]);
        assert_eq!(zero_init(6).unwrap().trainable(), vec![0.0; 21]);
    }

    #[test]
    fn zero_iterations_is_noop() {
        let obj = table(vec![1.0, 2.0, 3.0, 4.0]);
        let init = zero_init(2).unwrap();
        let cfg = TrainingConfig {
            iterations: 0,
            ..Default::default()
        };
        let out = train_objective(&obj, &init, &cfg).unwrap();
        assert_eq!(out.params, init);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn flat_landscape_has_zero_gradient() {
        let obj = table(vec![3.0; 16]);
        let g = obj
            .gradient(&zero_init(4).unwrap(), Mode::Exact, 1, 0)
            .unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn divergence_is_reported() {
        let obj = table(vec![f64::NAN, 1.0, 1.0, 1.0]);
        let cfg = TrainingConfig {
            iterations: 3,
            ..Default::default()
        };
        let err = train_objective(&obj, &zero_init(2).unwrap(), &cfg)
            .err()
            .unwrap();
        assert!(matches!(err, Error::Diverged { iteration: 0, .. }));
    }

    #[test]
    fn sampled_training_is_reproducible() {
        let obj = table((0..8).map(|i| (i as f64 * 0.7).sin() + 2.0).collect());
        let cfg = TrainingConfig {
            iterations: 20,
            batch_size: 50,
            seed: 17,
            mode: Mode::Sampled,
            snapshot_every: Some(5),
            ..Default::default()
        };
        let a = train_objective(&obj, &zero_init(3).unwrap(), &cfg).unwrap();
        let b = train_objective(&obj, &zero_init(3).unwrap(), &cfg).unwrap();
        assert!(a.trace.same_run(&b.trace));
        assert_eq!(a.params, b.params);
        let other = TrainingConfig { seed: 18, ..cfg };
        let c = train_objective(&obj, &zero_init(3).unwrap(), &other).unwrap();
        assert!(!a.trace.same_run(&c.trace));
    }

    #[test]
    fn bad_config_rejected() {
        let obj = table(vec![1.0; 4]);
        let cfg = TrainingConfig {
            decay_factor: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            train_objective(&obj, &zero_init(2).unwrap(), &cfg),
            Err(Error::Config(_))
        ));
        let k = KernelHandle::Gaussian(GaussianKernelParams::default());
        let p = PointSet::from_points(&[[1.0, 0.0]]).unwrap();
        let general = zero_init(2)
            .unwrap()
            .with_general_measurement(vec![0.1, 0.0], vec![0.0; 2])
            .unwrap();
        assert!(gradient(&general, &p, &p, None, &k, &TrainingConfig::default()).is_err());
    }

    #[test]
    fn trace_csv_header() {
        let trace = TrainingTrace {
            records: vec![TraceRecord {
                iteration: 0,
                loss: -1.0,
                lr: 0.02,
                ms: 0.5,
                snapshot: None,
            }],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,loss,lr,ms\n0,"));
    }
}
