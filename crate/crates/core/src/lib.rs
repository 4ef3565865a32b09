//! Ground-state solitary waves of the generalized Kadomtsev–Petviashvili
//! equation with a slowly varying potential,
//!
//! ```text
//! ( -u_xx - V(εx, εy) h(u) + u + D_x⁻² u_yy )_x = 0,   (x, y) ∈ ℝ²,
//! ```
//!
//! computed pseudospectrally on a periodic box.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: grid, 2D DFT, the anisotropic energy norm, `D_x⁻¹` and
//!   the rational Fourier symbols Φ₁, Φ₂, Φ₃.
//! * [`model`]: the nonlinearity `h` and potential `V` families with
//!   hypothesis validators.
//! * [`energy`]: the functional `I_ε`, its derivative, its Riesz gradient and
//!   projection onto the Nehari manifold.
//! * [`groundstate`]: Petviashvili iteration followed by Nehari-projected
//!   gradient descent.
//! * [`concentration`]: ε-continuation sweeps and the concentration verdict.
//! * [`regularity`]: multiplier-based derivative recovery, Lᵠ norms, decay
//!   and spectral-tail diagnostics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod energy;
pub mod error;
pub mod groundstate;
pub mod model;
pub mod regularity;
pub mod spectral;

pub use concentration::{check_concentration, find_argmax, sweep, Argmax, SweepReport, SweepRow, Verdict};
pub use energy::{NehariResult, Problem};
pub use error::{Error, Result};
pub use groundstate::{petviashvili, refine_descent, solve, GroundState, SeedKind, SolverConfig};
pub use model::{Nonlinearity, Potential, PowerLaw};
pub use regularity::RegularityReport;
pub use spectral::{Field, Grid, SpectralField};
