//! Exact metric geometry of the Sierpinski carpet built by gluing scaled
//! copies of the unit square.
//!
//! Points are addressed by digit words over the nine (or eight) ternary
//! cells plus a tip on the boundary square. Distances on the finite stages
//! are lattice geodesics; the carpet itself appears through its Hutchinson
//! iteration and as the solution space of finite guarded equation systems.

pub mod corecursive;
pub mod error;
pub mod gluing;
pub mod hutchinson;
pub mod lattice;
pub mod plane;
pub mod rat;
pub mod squarespace;
pub mod ternary;
pub mod verify;

pub use corecursive::{Coalgebra, Membership, Solution};
pub use error::{Error, Result};
pub use gluing::{Address, Cell, GlueTable, Variant};
pub use hutchinson::CellSet;
pub use lattice::{CornerAddress, LatticeGraph};
pub use plane::Point2;
pub use rat::Rat;
pub use squarespace::BoundaryPoint;
