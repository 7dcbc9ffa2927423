//! Marchenko-Pastur spectral laboratory.
//!
//! * [`mp_law`]: the limiting law, its CDF and Stieltjes transform.
//! * [`sampling`]: seeded column models with and without independent entries.
//! * [`spectra`]: eigenvalues of `n^-1 X X^T` and distances to the law.
//! * [`resolvent`]: resolvent bounds, the rank-one update and trace identities.
//! * [`conditions`]: Monte Carlo checks of quadratic-form concentration and
//!   the Lindeberg condition.

pub mod conditions;
pub mod error;
pub mod linalg;
pub mod mp_law;
pub mod quadrature;
pub mod resolvent;
pub mod sampling;
pub mod spectra;
pub mod stats;

pub use error::{Error, Result};
pub use mp_law::{ComplexPoint, MpLaw, StieltjesValue};
pub use resolvent::{BoundId, BoundReport, ResolventProbe};
pub use sampling::{ColumnModel, ModelKind, Seed};
pub use spectra::{esd, Spectrum};

pub use nalgebra;
pub use num_complex::Complex64;
