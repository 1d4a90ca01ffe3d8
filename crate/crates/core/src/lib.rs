pub mod circle;
pub mod convolution;
pub mod error;
pub mod harness;
pub mod idiv;
pub mod measure;
mod ode;
pub mod rational;
pub mod transforms;

pub use circle::{CircleGenerator, DiskGrid};
pub use error::{Error, Result};
pub use idiv::{FlowResult, LevyTriple};
pub use measure::{CircleMeasure, FiniteAtomicMeasure, Role};
pub use rational::{PartialFractions, Polynomial, RationalMap};
pub use transforms::{GridKind, TransformGrid};
