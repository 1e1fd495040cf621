//! Teleportation-based continuous-variable quantum key distribution.
//!
//! Every wavefunction, density kernel and integrand in the protocol is a
//! Gaussian with a complex quadratic exponent, so the whole pipeline runs on
//! exact closed-form integrals ([`gaussian`]) with an independent adaptive
//! quadrature available for cross-checks ([`quadrature`]).
//!
//! The layers, bottom to top:
//!
//! - [`states`]: coherent and two-mode squeezed position kernels.
//! - [`teleport`]: the modified teleportation (beam splitter, Alice's
//!   homodyne outcomes, Bob's displaced output), closed-form fidelities and
//!   the optimal-settings search.
//! - [`channel`]: the beam-splitter attack / lossy line and the vacuum
//!   detection probabilities for Bob and Eve.
//! - [`keyrate`]: binary-channel mutual information, the direct
//!   reconciliation key rate and its optimizers and sweeps.
//! - [`sim`]: Monte Carlo execution of the protocol rounds and sifting.
//! - [`reference`]: the published full-loss optimal rows, embedded.
//! - [`cli`]: the `teleqkd` command-line surface and its output formats.

pub mod channel;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod keyrate;
pub mod optimize;
pub mod params;
pub mod quadrature;
pub mod reference;
pub mod sim;
pub mod states;
pub mod teleport;

pub use error::{Error, Result};
pub use gaussian::QuadraticForm;
pub use params::ProtocolParams;
pub use states::{CoherentState, TwoModeSqueezed};
pub use teleport::{Basis, BasisChoice, MeasurementOutcome, Sign, TeleportSettings};
