//! Inverse mean curvature flow of closed spacelike graphs in conformal-product
//! Lorentzian spacetimes over a flat torus, with checkers for the flow's
//! quantitative laws.

pub mod analysis;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod numerics;
pub mod par;
pub mod spacetime;

pub use error::{ImcfError, Result};
