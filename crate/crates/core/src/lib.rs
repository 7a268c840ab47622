//! Fluid–structure interaction with plaque growth on a fixed reference strip.
//!
//! Fluid channel below, growing viscoelastic wall above, coupled through
//! velocity/stress transmission and a permeable interface for the
//! macrophage concentration. The nonlinear problem is solved by Picard
//! iteration of linear sub-solves inside time windows.

pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod grid;
pub mod io;
pub mod kinematics;
pub mod linear;
pub mod material;
pub mod mms;
pub mod nonlinear;
pub mod odes;
pub mod spaces;
pub mod state;

pub use error::{Error, Result};
