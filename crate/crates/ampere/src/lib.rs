//! Convex analysis and Monge-Ampère numerics in the plane.

pub mod abreu;
pub mod convex;
pub mod dirichlet;
pub mod envelope;
pub mod error;
pub mod geom;
pub mod grid;
pub mod harnack;
pub mod io;
pub mod john;
pub mod lemmas;
pub mod linma;
pub mod mesh;
pub mod sections;
pub mod sparse;
pub mod sym2;
pub mod tol;

pub use error::{Error, Result};
pub use geom::Point;
pub use sym2::SymmetricMatrix2;
pub use tol::Tolerances;
