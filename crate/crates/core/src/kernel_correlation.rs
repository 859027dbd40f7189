//! Kernel correlation between point sets and the MMD-derived training loss.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::born_machine::{AngleBinning, AngleDistribution};
use crate::error::{Error, Result};
use crate::format::num;
use crate::quantum_kernel::{self, QuantumFeatureMapConfig};
use crate::registration::{apply_transform, Axis, CenterTarget, PointSet, RigidTransform};

pub const DEFAULT_SIGMA_SQ_2D: f64 = 0.01;
pub const DEFAULT_SIGMA_SQ_3D: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernelParams {
    pub alpha: f64,
    pub sigma_sq: f64,
}

impl GaussianKernelParams {
    pub fn new(alpha: f64, sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0) || !(alpha > 0.0) {
            return Err(Error::Config(format!(
                "Gaussian kernel needs alpha > 0 and sigma^2 > 0, got {alpha}, {sigma_sq}"
            )));
        }
        Ok(GaussianKernelParams { alpha, sigma_sq })
    }

    pub fn with_sigma_sq(sigma_sq: f64) -> Result<Self> {
        GaussianKernelParams::new(1.0, sigma_sq)
    }
}

impl Default for GaussianKernelParams {
    fn default() -> Self {
        GaussianKernelParams {
            alpha: 1.0,
            sigma_sq: DEFAULT_SIGMA_SQ_2D,
        }
    }
}

fn check_same_dim(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "points of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// `alpha * exp(-||x - y||^2 / sigma_sq)`
pub fn kc_point_pair(x: &[f64], y: &[f64], k: &GaussianKernelParams) -> Result<f64> {
    check_same_dim(x, y)?;
    Ok(gaussian(x, y, k))
}

#[inline]
fn gaussian(x: &[f64], y: &[f64], k: &GaussianKernelParams) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    k.alpha * (-d2 / k.sigma_sq).exp()
}

/// Kernel used inside the correlation: classical Gaussian or simulated quantum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelHandle {
    Gaussian(GaussianKernelParams),
    Quantum(QuantumFeatureMapConfig),
}

impl KernelHandle {
    /// Where translation-resolved sets live for this kernel, which is also the
    /// pivot of candidate rotations.
    pub fn frame(&self) -> CenterTarget {
        match self {
            KernelHandle::Gaussian(_) => CenterTarget::Origin,
            KernelHandle::Quantum(_) => CenterTarget::UnitCube,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_same_dim(x, y)?;
        match self {
            KernelHandle::Gaussian(k) => Ok(gaussian(x, y, k)),
            KernelHandle::Quantum(cfg) => quantum_kernel::kernel_exact(x, y, cfg),
        }
    }

    /// `sum_{x in xs} sum_{y in ys} k(x, y)`, summed in a fixed order.
    pub fn cross_sum(&self, xs: &PointSet, ys: &PointSet) -> Result<f64> {
        if xs.is_empty() || ys.is_empty() {
            return Err(Error::EmptyInput(
                "kernel correlation of an empty set".into(),
            ));
        }
        if xs.dim() != ys.dim() {
            return Err(Error::Shape("point sets of different dimension".into()));
        }
        match self {
            KernelHandle::Gaussian(k) => Ok(xs
                .iter()
                .map(|x| ys.iter().map(|y| gaussian(x, y, k)).sum::<f64>())
                .sum()),
            KernelHandle::Quantum(cfg) => quantum_kernel::cross_sum(xs, ys, cfg),
        }
    }
}

/// `sum_s sum_m k(T m, s)`
pub fn kc_sets(
    model: &PointSet,
    scene: &PointSet,
    transform: &RigidTransform,
    k: &KernelHandle,
) -> Result<f64> {
    if model.is_empty() || scene.is_empty() {
        return Err(Error::EmptyInput(
            "kernel correlation of an empty set".into(),
        ));
    }
    let moved = apply_transform(transform, model)?;
    k.cross_sum(&moved, scene)
}

pub fn kc_loss(
    model: &PointSet,
    scene: &PointSet,
    transform: &RigidTransform,
    k: &KernelHandle,
) -> Result<f64> {
    Ok(-kc_sets(model, scene, transform, k)?)
}

/// Biased (V-statistic) squared MMD between two sample lists.
pub fn mmd_full(p: &PointSet, q: &PointSet, k: &KernelHandle) -> Result<f64> {
    let (np, nq) = (p.len() as f64, q.len() as f64);
    let pp = k.cross_sum(p, p)? / (np * np);
    let qq = k.cross_sum(q, q)? / (nq * nq);
    let pq = k.cross_sum(p, q)? / (np * nq);
    Ok(pp + qq - 2.0 * pq)
}

/// Candidate rotation for angle `theta` in the kernel's frame.
pub fn candidate_transform(
    theta: f64,
    axis: Option<Axis>,
    dim: usize,
    k: &KernelHandle,
) -> RigidTransform {
    RigidTransform::about_pivot(theta, axis, &k.frame().point(dim))
}

/// KC value as a function of rotation angle.
#[derive(Clone, Debug, PartialEq)]
pub struct KcLandscape {
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
}

impl KcLandscape {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Indices that are strictly greater than their predecessor and not
    /// smaller than their successor, treating the grid as circular. Flat
    /// plateaus count once.
    pub fn local_maxima(&self) -> Vec<usize> {
        let n = self.values.len();
        if n < 3 {
            return Vec::new();
        }
        let v = &self.values;
        (0..n)
            .filter(|&i| {
                let prev = v[(i + n - 1) % n];
                let next = v[(i + 1) % n];
                v[i] > prev && v[i] >= next
            })
            .collect()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "angle_rad,kc_value")?;
        for (a, v) in self.angles.iter().zip(&self.values) {
            writeln!(out, "{},{}", num(*a), num(*v))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Evaluates `kc_sets` for every angle; angles must be strictly increasing.
pub fn kc_landscape(
    model: &PointSet,
    scene: &PointSet,
    angles: &[f64],
    axis: Option<Axis>,
    k: &KernelHandle,
) -> Result<KcLandscape> {
    if angles.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "landscape angles must be strictly increasing".into(),
        ));
    }
    let values = angles
        .par_iter()
        .map(|&a| {
            kc_sets(
                model,
                scene,
                &candidate_transform(a, axis, model.dim(), k),
                k,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(KcLandscape {
        angles: angles.to_vec(),
        values,
    })
}

/// `K` uniformly spaced angles `2 pi i / K`.
pub fn uniform_angles(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| std::f64::consts::TAU * i as f64 / count as f64)
        .collect()
}

/// KC evaluated once at every bin median; the angle set does not depend on
/// the circuit parameters so this is all the trainer needs from the geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct KcTable {
    binning: AngleBinning,
    values: Vec<f64>,
    pair_count: f64,
}

impl KcTable {
    pub fn build(
        model: &PointSet,
        scene: &PointSet,
        binning: AngleBinning,
        axis: Option<Axis>,
        k: &KernelHandle,
    ) -> Result<Self> {
        if model.is_empty() || scene.is_empty() {
            return Err(Error::EmptyInput(
                "kernel correlation of an empty set".into(),
            ));
        }
        let landscape = kc_landscape(model, scene, &binning.angles(), axis, k)?;
        Ok(KcTable {
            binning,
            values: landscape.values,
            pair_count: (model.len() * scene.len()) as f64,
        })
    }

    pub fn from_values(binning: AngleBinning, values: Vec<f64>, pair_count: f64) -> Result<Self> {
        if values.len() != binning.bin_count() {
            return Err(Error::Shape("one KC value per bin required".into()));
        }
        Ok(KcTable {
            binning,
            values,
            pair_count,
        })
    }

    pub fn binning(&self) -> &AngleBinning {
        &self.binning
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `-2 / (|M| |S|)`, the weight of one KC value in the loss.
    pub fn weight(&self) -> f64 {
        -2.0 / self.pair_count
    }

    pub fn landscape(&self) -> KcLandscape {
        KcLandscape {
            angles: self.binning.angles(),
            values: self.values.clone(),
        }
    }

    pub fn exact_loss(&self, probs: &[f64]) -> f64 {
        self.weight()
            * probs
                .iter()
                .zip(&self.values)
                .map(|(p, v)| p * v)
                .sum::<f64>()
    }

    pub fn sampled_loss(&self, batch: &[usize]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let total: f64 = batch.iter().map(|&x| self.values[x]).sum();
        Ok(self.weight() * total / batch.len() as f64)
    }

    /// Bins whose KC is within `rel_tol` (relative) of the maximum.
    pub fn optimal_bins(&self, rel_tol: f64) -> Vec<usize> {
        let max = self
            .values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= max - rel_tol * max.abs())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Either the exact circuit distribution or a batch of measured bin indices.
pub enum LossInput<'a> {
    Exact(&'a AngleDistribution),
    Sampled {
        binning: AngleBinning,
        batch: &'a [usize],
    },
}

/// MMD training loss with the parameter-independent self-correlation terms
/// dropped: `-2/(|M||S|) E_{x ~ p}[KC(T_x M, S)]`.
pub fn training_loss(
    model: &PointSet,
    scene: &PointSet,
    input: LossInput<'_>,
    axis: Option<Axis>,
    k: &KernelHandle,
) -> Result<f64> {
    match input {
        LossInput::Exact(dist) => {
            let table = KcTable::build(model, scene, *dist.binning(), axis, k)?;
            Ok(table.exact_loss(dist.probs()))
        }
        LossInput::Sampled { binning, batch } => {
            if batch.is_empty() {
                return Err(Error::EmptyBatch);
            }
            let table = KcTable::build(model, scene, binning, axis, k)?;
            table.sampled_loss(batch)
        }
    }
}
