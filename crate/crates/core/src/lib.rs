//! Rotation estimation for rigid point-set registration with an Ising Born
//! machine.
//!
//! A QAOA-style circuit on `n` qubits defines a distribution over `2^n`
//! rotation-angle bins. Training minimises the kernel-correlation form of the
//! MMD between the rotated model and the scene, with gradients from the
//! parameter-shift rule. The mode of the trained distribution is the estimate.
//!
//! ```
//! use qkc::{make_polygon, register, KernelHandle, GaussianKernelParams, TrainingConfig};
//! use qkc::registration::{apply_transform, RigidTransform};
//!
//! let model = make_polygon(4, 10).unwrap();
//! let scene = apply_transform(&RigidTransform::rotation(0.3, None, 2), &model).unwrap();
//! let k = KernelHandle::Gaussian(GaussianKernelParams::default());
//! let cfg = TrainingConfig { iterations: 50, ..Default::default() };
//! let reg = register(&model, &scene, 4, &k, &cfg, None).unwrap();
//! assert!(reg.distribution.probs().iter().sum::<f64>() > 0.999);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod born_machine;
pub mod error;
pub mod format;
pub mod kernel_correlation;
pub mod quantum_kernel;
pub mod registration;
pub mod statevector;
pub mod trainer;

pub use born_machine::{forward, mode_angle, AngleBinning, AngleDistribution};
pub use error::{Error, Result};
pub use kernel_correlation::{GaussianKernelParams, KcLandscape, KcTable, KernelHandle};
pub use quantum_kernel::{Estimator, FeatureVariant, GramMatrix, QuantumFeatureMapConfig};
pub use registration::{
    make_polygon, register, sweep_evaluate, Axis, EvalReport, PointSet, RigidTransform, SweepGrid,
};
pub use statevector::{BitString, CircuitParams, OutputDistribution, StateVector};
pub use trainer::{train, zero_init, Mode, TrainingConfig, TrainingTrace};
