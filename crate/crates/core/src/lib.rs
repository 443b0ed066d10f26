//! Two-layer sine and ReLU networks for modular addition.
//!
//! The crate covers the whole pipeline around the task "predict
//! `(s_1 + ... + s_m) mod p` from the bag of tokens":
//!
//! * [`data`] encodes sequences as count vectors, samples and enumerates
//!   the input domain, and reads/writes JSONL datasets.
//! * [`model`] is the two-layer MLP `V σ(Wx [+ b])` with a strict
//!   unique-argmax predictor, cross-entropy and analytic gradients.
//! * [`constructions`] builds the closed-form networks (width-2 sine,
//!   half-width sine, the `d = 2p` high-margin sine net and the ReLU
//!   spline constructions) together with their algebraic building blocks.
//! * [`optim`] provides SGD, AdamW and Muon (Newton–Schulz).
//! * [`metrics`] computes accuracies, margins, layer norms and the `Q₂`
//!   data statistic.
//! * [`verify`] turns every identity and construction guarantee into an
//!   executable [`verify::Certificate`].
//! * [`trainer`] and [`sweep`] run seeded training, length-extrapolation
//!   evaluation, weight-decay sweeps and report tables.

pub mod constructions;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod optim;
pub mod sweep;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
