//! Point sets, rigid transforms, evaluation metrics and the end-to-end
//! registration pipeline.

mod metrics;
mod pointset;
mod shapes;
mod transform;

pub use metrics::{
    alignment_error, mean_std, resolve_translation, solve_transform_given_correspondence,
    AngleRecord, CenterTarget, Centered, Correspondence, EvalReport,
};
pub use pointset::PointSet;
pub use shapes::{
    add_noise, fish_fallback, jitter, make_polygon, normalize_unit_sphere, sample_mesh, Mesh,
};
pub use transform::{
    apply_transform, orthogonality_defect, transformation_discrepancy, Axis, RigidTransform,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::born_machine::{mode_angle, AngleBinning, AngleDistribution};
use crate::error::{Error, Result};
use crate::kernel_correlation::{uniform_angles, KcTable, KernelHandle};
use crate::statevector::CircuitParams;
use crate::trainer::{train_objective, zero_init, Objective, TrainingConfig, TrainingTrace};

/// Radius of the joint model/scene cloud inside the unit cube.
pub const UNIT_CUBE_RADIUS: f64 = 0.45;

/// Model and scene moved into the kernel's frame, plus what it takes to map
/// the estimate back.
#[derive(Clone, Debug)]
pub struct Framed {
    pub model: PointSet,
    pub scene: PointSet,
    pub model_centroid: Vec<f64>,
    pub scene_centroid: Vec<f64>,
    pub scale: f64,
}

/// Centres both sets on the kernel frame target. For the unit-cube frame the
/// pair is also scaled by a common factor so it fits inside the cube.
pub fn frame_pair(model: &PointSet, scene: &PointSet, k: &KernelHandle) -> Result<Framed> {
    let target = k.frame();
    let model_centroid = model.centroid()?;
    let scene_centroid = scene.centroid()?;
    let centered = resolve_translation(model, scene, CenterTarget::Origin)?;
    let scale = match target {
        CenterTarget::Origin => 1.0,
        CenterTarget::UnitCube => {
            let origin = vec![0.0; model.dim()];
            let r = centered
                .model
                .radius_about(&origin)
                .max(centered.scene.radius_about(&origin));
            if r == 0.0 {
                return Err(Error::Degenerate(
                    "model and scene collapse to a point".into(),
                ));
            }
            UNIT_CUBE_RADIUS / r
        }
    };
    let goal = target.point(model.dim());
    Ok(Framed {
        model: centered.model.scaled(scale).translated(&goal),
        scene: centered.scene.scaled(scale).translated(&goal),
        model_centroid,
        scene_centroid,
        scale,
    })
}

/// `T x = R (x - c_m) + c_s` in the original coordinates.
pub fn transform_between_centroids(
    angle: f64,
    axis: Option<Axis>,
    model_centroid: &[f64],
    scene_centroid: &[f64],
) -> RigidTransform {
    let dim = model_centroid.len();
    let rot = RigidTransform::rotation(angle, axis, dim);
    let r = rot.matrix(dim);
    let t = (0..dim)
        .map(|i| scene_centroid[i] - (0..dim).map(|j| r[i][j] * model_centroid[j]).sum::<f64>())
        .collect();
    rot.with_translation(t)
}

#[derive(Clone, Debug)]
pub struct Registration {
    pub transform: RigidTransform,
    pub params: CircuitParams,
    pub distribution: AngleDistribution,
    pub trace: TrainingTrace,
    pub table: KcTable,
}

/// Estimates the rigid transform taking `model` onto `scene` by training a
/// Born machine from the uniform initialisation and reading its mode.
pub fn register(
    model: &PointSet,
    scene: &PointSet,
    n_qubits: usize,
    k: &KernelHandle,
    cfg: &TrainingConfig,
    axis: Option<Axis>,
) -> Result<Registration> {
    if model.dim() == 2 && axis.is_some() {
        return Err(Error::Config("rotation axis given for 2D sets".into()));
    }
    let framed = frame_pair(model, scene, k)?;
    let obj = Objective::new(&framed.model, &framed.scene, n_qubits, axis, k)?;
    let mut init = zero_init(n_qubits)?;
    if cfg.gamma != init.gamma()[0] {
        init = CircuitParams::zeros(n_qubits, cfg.gamma)?;
    }
    let out = train_objective(&obj, &init, cfg)?;
    let angle = mode_angle(&out.distribution);
    Ok(Registration {
        transform: transform_between_centroids(
            angle,
            axis,
            &framed.model_centroid,
            &framed.scene_centroid,
        ),
        params: out.params,
        distribution: out.distribution,
        trace: out.trace,
        table: obj.table().clone(),
    })
}

/// Ground-truth angles of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepGrid {
    /// The representable angles of the circuit, one per bin.
    BinMedians,
    /// `K` equally spaced angles starting at 0; most fall between bins.
    Uniform(usize),
}

impl SweepGrid {
    pub fn angles(&self, n_qubits: usize) -> Result<Vec<f64>> {
        match *self {
            SweepGrid::BinMedians => Ok(AngleBinning::new(n_qubits)?.angles()),
            SweepGrid::Uniform(0) => Err(Error::Config(
                "uniform sweep needs at least one angle".into(),
            )),
            SweepGrid::Uniform(count) => Ok(uniform_angles(count)),
        }
    }
}

impl std::str::FromStr for SweepGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bins" || s == "bin-medians" {
            return Ok(SweepGrid::BinMedians);
        }
        if let Some(count) = s.strip_prefix("uniform:") {
            let k = count
                .parse()
                .map_err(|_| Error::Config(format!("bad sweep size '{count}'")))?;
            return Ok(SweepGrid::Uniform(k));
        }
        Err(Error::Config(format!(
            "unknown sweep grid '{s}' (bins | uniform:K)"
        )))
    }
}

/// Training seed for the `index`-th job of a batch run.
pub(crate) fn job_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed
        ^ (index as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn scene_for(shape: &PointSet, angle: f64, axis: Option<Axis>) -> Result<PointSet> {
    let pivot = shape.centroid()?;
    apply_transform(&RigidTransform::about_pivot(angle, axis, &pivot), shape)
}

fn evaluate_angle(
    shape: &PointSet,
    gt: f64,
    n_qubits: usize,
    k: &KernelHandle,
    cfg: &TrainingConfig,
    axis: Option<Axis>,
) -> Result<(f64, f64, f64)> {
    let scene = scene_for(shape, gt, axis)?;
    let reg = register(shape, &scene, n_qubits, k, cfg, axis)?;
    let e = alignment_error(shape, &scene, &reg.transform)?;
    Ok((
        reg.transform.angle(),
        e,
        transformation_discrepancy(&reg.transform),
    ))
}

/// Registers `shape` against rotated copies of itself over `grid` and
/// aggregates alignment error and transformation discrepancy.
pub fn sweep_evaluate(
    shape: &PointSet,
    n_qubits: usize,
    k: &KernelHandle,
    cfg: &TrainingConfig,
    grid: SweepGrid,
    axis: Option<Axis>,
) -> Result<EvalReport> {
    if shape.is_empty() {
        return Err(Error::EmptyInput("sweep over an empty shape".into()));
    }
    let angles = grid.angles(n_qubits)?;
    let records = angles
        .par_iter()
        .enumerate()
        .map(|(i, &gt)| {
            let cfg = TrainingConfig {
                seed: job_seed(cfg.seed, i),
                ..cfg.clone()
            };
            match evaluate_angle(shape, gt, n_qubits, k, &cfg, axis) {
                Ok((est, e, e_r)) => AngleRecord {
                    gt_angle: gt,
                    est_angle: Some(est),
                    e: Some(e),
                    e_r: Some(e_r),
                    error: None,
                },
                Err(err) => AngleRecord {
                    gt_angle: gt,
                    est_angle: None,
                    e: None,
                    e_r: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    Ok(EvalReport::from_records(records))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrial {
    pub gt_angle: f64,
    pub est_angle: f64,
    pub e: f64,
}

/// One seeded outlier trial: a random bin-median rotation, `ratio` outliers
/// appended to the scene, error measured against the clean scene.
pub fn noise_trial(
    shape: &PointSet,
    n_qubits: usize,
    k: &KernelHandle,
    cfg: &TrainingConfig,
    ratio: f64,
    sigma_noise: f64,
    seed: u64,
) -> Result<NoiseTrial> {
    let binning = AngleBinning::new(n_qubits)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = binning.angle(rng.random_range(0..binning.bin_count()));
    let clean = scene_for(shape, gt, None)?;
    let noisy = add_noise(&clean, ratio, sigma_noise, rng.random())?;
    let cfg = TrainingConfig {
        seed: rng.random(),
        ..cfg.clone()
    };
    let reg = register(shape, &noisy, n_qubits, k, &cfg, None)?;
    Ok(NoiseTrial {
        gt_angle: gt,
        est_angle: reg.transform.angle(),
        e: alignment_error(shape, &clean, &reg.transform)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub ratio: f64,
    pub mean: f64,
    pub std: f64,
    pub trials: Vec<NoiseTrial>,
}

/// Mean alignment error against outlier ratio, `runs` seeded trials each.
/// `sigma_fraction` scales the outlier spread by the shape radius.
pub fn noise_curve(
    shape: &PointSet,
    n_qubits: usize,
    k: &KernelHandle,
    cfg: &TrainingConfig,
    ratios: &[f64],
    runs: usize,
    sigma_fraction: f64,
) -> Result<Vec<NoisePoint>> {
    if runs == 0 {
        return Err(Error::Config("noise curve needs at least one run".into()));
    }
    let radius = shape.radius_about(&shape.centroid()?);
    let sigma = sigma_fraction * radius;
    ratios
        .iter()
        .map(|&ratio| {
            let trials = (0..runs)
                .into_par_iter()
                .map(|r| noise_trial(shape, n_qubits, k, cfg, ratio, sigma, job_seed(cfg.seed, r)))
                .collect::<Result<Vec<_>>>()?;
            let es: Vec<f64> = trials.iter().map(|t| t.e).collect();
            let (mean, std) = mean_std(&es);
            Ok(NoisePoint {
                ratio,
                mean,
                std,
                trials,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_correlation::GaussianKernelParams;
    use crate::quantum_kernel::QuantumFeatureMapConfig;

    fn gaussian() -> KernelHandle {
        KernelHandle::Gaussian(GaussianKernelParams::default())
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("bins".parse::<SweepGrid>().unwrap(), SweepGrid::BinMedians);
        assert_eq!(
            "uniform:12".parse::<SweepGrid>().unwrap(),
            SweepGrid::Uniform(12)
        );
        assert!("uniform:x".parse::<SweepGrid>().is_err());
        assert!(SweepGrid::Uniform(0).angles(4).is_err());
        assert_eq!(SweepGrid::BinMedians.angles(4).unwrap().len(), 16);
    }

    #[test]
    fn unit_cube_frame_fits() {
        let m = make_polygon(4, 10).unwrap().translated(&[3.0, -1.0]);
        let s = m.scaled(2.0);
        let k = KernelHandle::Quantum(QuantumFeatureMapConfig::default());
        let f = frame_pair(&m, &s, &k).unwrap();
        let c = f.scene.centroid().unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
        assert!(f.scene.coords().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((f.scene.radius_about(&c) - UNIT_CUBE_RADIUS).abs() < 1e-12);
    }

    #[test]
    fn centroid_transform_maps_shifted_rotation() {
        let m = fish_fallback();
        let t_true =
            RigidTransform::about_pivot(1.1, None, &[0.3, -0.2]).with_translation(vec![2.0, 1.0]);
        let s = apply_transform(&t_true, &m).unwrap();
        let t =
            transform_between_centroids(1.1, None, &m.centroid().unwrap(), &s.centroid().unwrap());
        assert!(alignment_error(&m, &s, &t).unwrap() < 1e-12);
    }

    #[test]
    fn identical_sets_at_zero_angle() {
        let m = make_polygon(3, 5).unwrap();
        let cfg = TrainingConfig {
            iterations: 60,
            ..Default::default()
        };
        let report = sweep_evaluate(&m, 3, &gaussian(), &cfg, SweepGrid::Uniform(1), None).unwrap();
        let rec = &report.per_angle[0];
        assert_eq!(rec.gt_angle, 0.0);
        assert!(rec.error.is_none());
        assert!(report.e_r.abs() < 1e-12);
    }

    #[test]
    fn translated_scene_registers_on_bin() {
        let m = fish_fallback();
        let binning = AngleBinning::new(4).unwrap();
        let gt = binning.angle(5);
        let s = scene_for(&m, gt, None).unwrap().translated(&[0.4, -0.7]);
        let reg = register(&m, &s, 4, &gaussian(), &TrainingConfig::default(), None).unwrap();
        assert!((reg.transform.angle() - gt).abs() < 1e-12);
        assert!(alignment_error(&m, &s, &reg.transform).unwrap() < 1e-12);
    }

    #[test]
    fn axis_rejected_in_2d() {
        let m = make_polygon(4, 3).unwrap();
        let r = register(
            &m,
            &m,
            2,
            &gaussian(),
            &TrainingConfig::default(),
            Some(Axis::Z),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn noise_trials_are_seeded() {
        let m = make_polygon(5, 4).unwrap();
        let cfg = TrainingConfig {
            iterations: 30,
            ..Default::default()
        };
        let a = noise_curve(&m, 3, &gaussian(), &cfg, &[0.1], 3, 0.3).unwrap();
        let b = noise_curve(&m, 3, &gaussian(), &cfg, &[0.1], 3, 0.3).unwrap();
        assert_eq!(a, b);
        assert!(a[0].mean.is_finite());
    }
}
