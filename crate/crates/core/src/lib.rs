//! Numerical toolkit for hierarchical (leader/follower) strategic
//! communication games with quadratic costs and jointly Gaussian sources.
//!
//! The transmitter commits to an encoder, the receiver best-responds with the
//! conditional mean. Every closed form in this crate is evaluated against the
//! exact second-order algebra in [`gausslin`], and [`simkit`] provides seeded
//! Monte Carlo and brute-force oracles on top of that.
//!
//! Module map:
//!
//! * [`gausslin`] – models, linear MMSE, exact cost evaluation of linear schemes
//! * [`equilibrium`] – noiseless equilibrium (encoder weight, decoder gain, costs)
//! * [`strategic_rd`] – strategic rate-distortion curve, discrete triples, Lloyd-Max codec
//! * [`noisy_channel`] – AWGN equilibrium and its capacity-matched converse
//! * [`side_info`] – receiver side information variants
//! * [`control_games`] – quadratic objectives, cross-term test, canonical solver
//! * [`figures`] – data for the three equilibrium panels
//! * [`simkit`] – sampling, empirical costs, deviation search, ACE
//! * [`verify`] – the check battery driven by `stackcomm verify`

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control_games;
pub mod equilibrium;
mod error;
pub mod figures;
pub mod gausslin;
pub mod noisy_channel;
pub mod optimize;
pub mod side_info;
pub mod simkit;
pub mod strategic_rd;
pub mod verify;

pub use control_games::{CanonicalForm, QuadraticObjective};
pub use equilibrium::EquilibriumReport;
pub use error::{Error, ModelViolation, Result};
pub use gausslin::{CostPair, JointModel, LinearScheme, SideInfoModel, SourcePairModel};
pub use noisy_channel::ChannelSpec;
pub use side_info::{SiEquilibriumReport, SiRdPoint};
pub use simkit::SimConfig;
pub use strategic_rd::{DiscreteInstance, RdPoint};
