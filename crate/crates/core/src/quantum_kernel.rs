//! Simulated quantum kernel `k(x, y) = |<Phi(x)|Phi(y)>|^2` with
//! `|Phi(x)> = U(x) H U(x) H |0>` and `U(x)` a diagonal layer of single- and
//! two-qubit Z phases driven by the (encoded) point.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;
use crate::registration::PointSet;
use crate::statevector::{z_eigenvalue, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureVariant {
    /// `phi_k = pi/4 x_k`, `phi_lm = (pi/4 - x_l)(pi/4 - x_m)`
    Coyle,
    /// `phi_k = x_k`, `phi_lm = (pi - x_l)(pi - x_m)`
    Havlicek,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// One qubit per coordinate, coordinates used as-is. 2D only.
    Continuous2d,
    /// Each axis quantized to `bits_per_axis` bits, MSB first.
    Binned,
}

impl std::str::FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coyle" => Ok(FeatureVariant::Coyle),
            "havlicek" => Ok(FeatureVariant::Havlicek),
            other => Err(Error::Config(format!("unknown feature map '{other}'"))),
        }
    }
}

impl std::str::FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" | "continuous2d" => Ok(EncodingMode::Continuous2d),
            "binned" => Ok(EncodingMode::Binned),
            other => Err(Error::Config(format!("unknown encoding '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumFeatureMapConfig {
    pub variant: FeatureVariant,
    pub mode: EncodingMode,
    pub bits_per_axis: usize,
}

impl Default for QuantumFeatureMapConfig {
    fn default() -> Self {
        QuantumFeatureMapConfig {
            variant: FeatureVariant::Coyle,
            mode: EncodingMode::Binned,
            bits_per_axis: 3,
        }
    }
}

impl QuantumFeatureMapConfig {
    pub fn n_qubits(&self, dim: usize) -> usize {
        match self.mode {
            EncodingMode::Continuous2d => dim,
            EncodingMode::Binned => dim * self.bits_per_axis,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self.mode {
            EncodingMode::Continuous2d if dim != 2 => Err(Error::Config(
                "continuous encoding supports 2D points only".into(),
            )),
            EncodingMode::Binned if self.bits_per_axis == 0 => {
                Err(Error::Config("bits_per_axis must be positive".into()))
            }
            _ if self.n_qubits(dim) > crate::statevector::MAX_QUBITS => {
                Err(Error::Size(self.n_qubits(dim)))
            }
            _ => Ok(()),
        }
    }
}

static CLAMPED: AtomicU64 = AtomicU64::new(0);

/// Number of binned coordinates clamped into range since process start.
pub fn clamp_warnings() -> u64 {
    CLAMPED.load(Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPoint {
    pub features: Vec<f64>,
    pub clamped: bool,
}

impl EncodedPoint {
    /// Key identifying a binned encoding (bits packed MSB first).
    fn bin_key(&self) -> u64 {
        self.features
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | (b as u64))
    }
}

pub fn encode_point(p: &[f64], cfg: &QuantumFeatureMapConfig) -> Result<EncodedPoint> {
    cfg.validate(p.len())?;
    match cfg.mode {
        EncodingMode::Continuous2d => Ok(EncodedPoint {
            features: p.to_vec(),
            clamped: false,
        }),
        EncodingMode::Binned => {
            let b = cfg.bits_per_axis;
            let cells = 1i64 << b;
            let mut clamped = false;
            let mut features = Vec::with_capacity(p.len() * b);
            for &v in p {
                let raw = (v * cells as f64).floor();
                let cell = if raw < 0.0 || raw >= cells as f64 || !raw.is_finite() {
                    clamped = true;
                    if raw < 0.0 {
                        0
                    } else {
                        cells - 1
                    }
                } else {
                    raw as i64
                };
                for bit in (0..b).rev() {
                    features.push(((cell >> bit) & 1) as f64);
                }
            }
            if clamped {
                CLAMPED.fetch_add(1, Ordering::Relaxed);
            }
            Ok(EncodedPoint { features, clamped })
        }
    }
}

/// Diagonal phase `sum_k phi_k z_k + sum_{l<m} phi_lm z_l z_m` per basis state.
fn feature_phases(x: &[f64], variant: FeatureVariant) -> Vec<f64> {
    let n = x.len();
    let (single, pair): (Vec<f64>, Vec<f64>) = match variant {
        FeatureVariant::Coyle => (
            x.iter().map(|v| FRAC_PI_4 * v).collect(),
            x.iter().map(|v| FRAC_PI_4 - v).collect(),
        ),
        FeatureVariant::Havlicek => (x.to_vec(), x.iter().map(|v| PI - v).collect()),
    };
    (0..1usize << n)
        .map(|idx| {
            let z: Vec<f64> = (0..n).map(|q| z_eigenvalue(idx, q, n)).collect();
            let mut phase: f64 = single.iter().zip(&z).map(|(p, z)| p * z).sum();
            for l in 0..n {
                for m in l + 1..n {
                    phase += pair[l] * pair[m] * z[l] * z[m];
                }
            }
            phase
        })
        .collect()
}

pub fn feature_state(x: &EncodedPoint, cfg: &QuantumFeatureMapConfig) -> Result<StateVector> {
    let n = x.features.len();
    let phases = feature_phases(&x.features, cfg.variant);
    let state = StateVector::zero_state(n)?.apply_hadamard_layer();
    let state = state
        .apply_diagonal_phase(|i| phases[i])
        .apply_hadamard_layer();
    Ok(state.apply_diagonal_phase(|i| phases[i]))
}

fn state_of(p: &[f64], cfg: &QuantumFeatureMapConfig) -> Result<StateVector> {
    feature_state(&encode_point(p, cfg)?, cfg)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "points of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

pub fn kernel_exact(x: &[f64], y: &[f64], cfg: &QuantumFeatureMapConfig) -> Result<f64> {
    check_pair(x, y)?;
    let (a, b) = (state_of(x, cfg)?, state_of(y, cfg)?);
    Ok(a.inner(&b)?.norm_sqr().min(1.0))
}

/// `U(y)^dagger U(x) |0>`, whose all-zeros amplitude is `<Phi(y)|Phi(x)>`.
pub fn overlap_circuit_state(
    x: &[f64],
    y: &[f64],
    cfg: &QuantumFeatureMapConfig,
) -> Result<StateVector> {
    check_pair(x, y)?;
    let phi_x = state_of(x, cfg)?;
    let ey = encode_point(y, cfg)?;
    let phases = feature_phases(&ey.features, cfg.variant);
    let undo = phi_x
        .apply_diagonal_phase(|i| -phases[i])
        .apply_hadamard_layer()
        .apply_diagonal_phase(|i| -phases[i])
        .apply_hadamard_layer();
    Ok(undo)
}

/// Shot-based estimator: fraction of all-zeros outcomes among `shots`
/// measurements of the overlap circuit. The count of all-zeros outcomes in
/// `shots` iid Born samples is drawn directly from its binomial law.
pub fn kernel_sampled(
    x: &[f64],
    y: &[f64],
    cfg: &QuantumFeatureMapConfig,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::EmptyBatch);
    }
    let state = overlap_circuit_state(x, y, cfg)?;
    estimate_from_zero_probability(state.amplitudes()[0].norm_sqr(), shots, seed)
}

fn estimate_from_zero_probability(p0: f64, shots: u64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = Binomial::new(shots, p0.clamp(0.0, 1.0))
        .map_err(|e| Error::Invariant(format!("binomial: {e}")))?
        .sample(&mut rng);
    Ok(hits as f64 / shots as f64)
}

/// `sum_{x in xs} sum_{y in ys} k(x, y)` with identical binned encodings
/// evaluated once.
pub fn cross_sum(xs: &PointSet, ys: &PointSet, cfg: &QuantumFeatureMapConfig) -> Result<f64> {
    fn unique_states(
        ps: &PointSet,
        cfg: &QuantumFeatureMapConfig,
    ) -> Result<Vec<(StateVector, f64)>> {
        if cfg.mode == EncodingMode::Continuous2d {
            return ps.iter().map(|p| Ok((state_of(p, cfg)?, 1.0))).collect();
        }
        let mut order: Vec<u64> = Vec::new();
        let mut groups: HashMap<u64, (EncodedPoint, f64)> = HashMap::new();
        for p in ps.iter() {
            let e = encode_point(p, cfg)?;
            let key = e.bin_key();
            groups
                .entry(key)
                .and_modify(|g| g.1 += 1.0)
                .or_insert_with(|| {
                    order.push(key);
                    (e, 1.0)
                });
        }
        order
            .iter()
            .map(|k| {
                let (e, count) = &groups[k];
                Ok((feature_state(e, cfg)?, *count))
            })
            .collect()
    }
    let a = unique_states(xs, cfg)?;
    let b = unique_states(ys, cfg)?;
    let mut total = 0.0;
    for (sa, ca) in &a {
        for (sb, cb) in &b {
            total += ca * cb * sa.inner(sb)?.norm_sqr();
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} Gram matrix",
                entries.len()
            )));
        }
        Ok(GramMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn frobenius_distance(&self, other: &GramMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,value")?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                writeln!(out, "{i},{j},{}", num(self.get(i, j)))?;
            }
        }
        Ok(())
    }

    /// `u32 rows, u32 cols` then row-major `f64`, all little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.rows as u32).to_le_bytes())?;
        out.write_all(&(self.cols as u32).to_le_bytes())?;
        for v in &self.entries {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let origin = Path::new("<gram binary>");
        let mut header = [0u8; 8];
        input
            .read_exact(&mut header)
            .map_err(|e| Error::io(origin, e))?;
        let rows = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
        let mut buf = Vec::new();
        input
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(origin, e))?;
        if buf.len() != rows * cols * 8 {
            return Err(Error::parse(
                origin,
                format!(
                    "expected {} payload bytes, got {}",
                    rows * cols * 8,
                    buf.len()
                ),
            ));
        }
        let entries = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GramMatrix::from_entries(rows, cols, entries)
    }
}

/// Seed for entry `(i, j)` derived from the base seed (splitmix64 finalizer).
fn entry_seed(seed: u64, i: usize, j: usize) -> u64 {
    let mut z = seed ^ ((i as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gram matrix between two point lists. Identical lists get a unit diagonal
/// and only their upper triangle is evaluated.
pub fn gram(
    xs: &PointSet,
    ys: &PointSet,
    cfg: &QuantumFeatureMapConfig,
    estimator: Estimator,
) -> Result<GramMatrix> {
    if xs.dim() != ys.dim() {
        return Err(Error::Shape("point sets of different dimension".into()));
    }
    let same = xs == ys;
    let (rows, cols) = (xs.len(), ys.len());
    let sx: Vec<StateVector> = xs.iter().map(|p| state_of(p, cfg)).collect::<Result<_>>()?;
    let sy: Vec<StateVector> = if same {
        sx.clone()
    } else {
        ys.iter().map(|p| state_of(p, cfg)).collect::<Result<_>>()?
    };
    let pairs: Vec<(usize, usize)> = (0..rows)
        .flat_map(|i| {
            let start = if same { i + 1 } else { 0 };
            (start..cols).map(move |j| (i, j))
        })
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| match estimator {
            Estimator::Exact => Ok(sx[i].inner(&sy[j])?.norm_sqr().min(1.0)),
            Estimator::Sampled { shots, seed } => {
                kernel_sampled(xs.point(i), ys.point(j), cfg, shots, entry_seed(seed, i, j))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut entries = vec![0.0; rows * cols];
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[i * cols + j] = v;
        if same {
            entries[j * cols + i] = v;
        }
    }
    if same {
        for i in 0..rows {
            entries[i * cols + i] = 1.0;
        }
    }
    GramMatrix::from_entries(rows, cols, entries)
}
