//! PCA-initialized multilayer perceptrons: the linear algebra, PCA fitting,
//! network, two-phase trainer, Shapley explanations and the numerical checks
//! of the conditioning, Lipschitz and noise-propagation properties.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod explain;
pub mod linalg;
pub mod network;
pub mod pca;
pub mod rng;
pub mod theory;
pub mod training;

pub use data::{Dataset, LabelColumn, Standardization, SyntheticKind, SyntheticParams};
pub use error::{Error, Result};
pub use linalg::{EigResult, Matrix, SvdResult};
pub use network::{Activation, Initializer, Layer, LayerSpec, Mlp};
pub use pca::{ComponentSelection, PcaModel};
pub use training::{TrainConfig, TrainOutcome, TrainRecord, Variant};
pub use explain::{Attribution, ShapConfig};
pub use theory::{TheoremId, TheoremReport};
