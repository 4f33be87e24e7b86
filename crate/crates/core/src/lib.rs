//! Time-domain Galerkin boundary elements for the 3D wave equation on open screens.
//!
//! ```
//! use tdbem::assembly::{assemble_rhs, assemble_single_layer, AssemblyOptions, OperatorId, RhsId};
//! use tdbem::geometry::graded_square_mesh;
//! use tdbem::mot::{march, StepSolverConfig};
//! use tdbem::timegrid::TimeGrid;
//!
//! let mesh = graded_square_mesh(2, 2.0)?;
//! let grid = TimeGrid::new(0.1, 10)?;
//! let opts = AssemblyOptions::default();
//! let system = assemble_single_layer(&mesh, &grid, &opts)?;
//! let load = RhsId::PlaneWavePacket { k: [0.2, 0.2, 0.2] };
//! let rhs = assemble_rhs(&mesh, &grid, OperatorId::SingleLayer, &load, &opts.quadrature)?;
//! let density = march(&system, &rhs, &StepSolverConfig::default())?;
//! # Ok::<(), tdbem::Error>(())
//! ```

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod mot;
pub mod potentials;
pub mod quadrature;
pub mod sparse;
pub mod timegrid;

pub use error::{Error, Result};
