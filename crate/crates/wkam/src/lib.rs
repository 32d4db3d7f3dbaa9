//! Numerical weak KAM theory on the flat torus.
//!
//! The toolkit discretizes Tonelli Hamiltonians H(x,p) on T^d x R^d
//! (d = 1, 2) and computes the objects of weak KAM / Aubry-Mather theory by
//! min-plus dynamic programming:
//!
//! * [`model`] — Hamiltonian constructors, Tonelli validation, Poisson bracket;
//! * [`transform`] — discrete Legendre-Fenchel transforms H <-> L;
//! * [`kernel`] — one-step action kernels and the min-plus algebra that
//!   realizes both Lax-Oleinik semigroups;
//! * [`weakkam`] — Mane critical values (power iteration and the Karp
//!   minimum-mean-cycle oracle), weak KAM solutions, paired solutions,
//!   subsolution checks;
//! * [`structures`] — Peierls barriers, Aubry set approximations, Mather
//!   alpha functions over cohomology classes and their flats;
//! * [`commute`] — the verification suite for Poisson-commuting pairs
//!   (semigroup commutation, shared solutions, shared barriers and flats);
//! * [`regularize`] — alternating T+ T- smoothing of subsolutions with
//!   discrete curvature diagnostics;
//! * [`io`] — binary grid files, kernel cache, CSV exports.

pub mod commute;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod model;
pub mod registry;
pub mod regularize;
pub mod structures;
pub mod transform;
pub mod weakkam;

pub use error::{Error, Result};
pub use grid::{GridFunction, TorusGrid};
pub use kernel::{build_kernel, ActionKernel, Direction};
pub use model::{CohomologyClass, HamiltonianModel};
pub use transform::{legendre, LagrangianTable};
