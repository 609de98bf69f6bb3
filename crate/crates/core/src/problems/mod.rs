//! Reference energy surfaces.

pub mod ch;
pub mod periodic;
pub mod quadratic;
pub mod toy;

pub use ch::{CahnHilliard, ChGrid, ChInitial};
pub use periodic::PeriodicGrid;
pub use quadratic::{PerturbedQuadratic, Quadratic};
pub use toy::Toy2D;
