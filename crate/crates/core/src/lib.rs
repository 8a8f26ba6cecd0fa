//! Noisy variational quantum classifiers: dense statevector and density-matrix
//! simulation, depolarizing noise, gradients, L∞ attacks, adversarial and
//! smoothing training, and certified trace-distance bounds.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.
//!
//! ```
//! use qrobust::{Classifier64, ModelConfig, NoiseSpec};
//!
//! let model = Classifier64::random(ModelConfig {
//!     n_qubits: 2,
//!     n_layers: 2,
//!     n_measured: 1,
//!     n_classes: 2,
//!     seed: 7,
//! })?;
//! let probs = model.forward(&[0.6, 0.8, 0.0, 0.0], Some(&NoiseSpec::global(0.1)))?;
//! assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! # Ok::<(), qrobust::Error>(())
//! ```

// `!(a > b)` forms are deliberate: they reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod attacks;
pub mod certify;
pub mod data;
pub mod error;
pub mod grad;
pub mod loss;
pub mod noise;
pub mod qsim;
pub mod scalar;
pub mod train;

pub use ansatz::{build_circuit, Circuit, Classifier, ModelConfig, ModelParams};
pub use attacks::{adversarial_accuracy, clean_accuracy, fgsm, pgd, AttackConfig, AttackKind, AttackTarget};
pub use certify::{
    certified_distance, certify_dataset, certify_dataset_with, epsilon_min, Certificate, CertificationReport, CertifyOptions,
    PConvention, ProbabilitySource,
};
pub use data::{Dataset, PreprocessRecipe, SplitSpec, Splits};
pub use error::{Error, ErrorCategory, Result};
pub use grad::{GradBackend, GradRequest, GradTarget};
pub use loss::Loss;
pub use noise::{KrausChannel, NoiseKind, NoisePosition, NoiseSpec};
pub use qsim::{DensityMatrix, GateOp, QuantumState, StateVector};
pub use scalar::Real;
pub use train::{Adam, TrainConfig, TrainHistory, TrainMode};

pub type StateVector64 = StateVector<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type GateOp64 = GateOp<f64>;
pub type KrausChannel64 = KrausChannel<f64>;
pub type NoiseSpec64 = NoiseSpec<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type Classifier64 = Classifier<f64>;
pub type AttackConfig64 = AttackConfig<f64>;
pub type TrainConfig64 = TrainConfig<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Certificate64 = Certificate<f64>;
