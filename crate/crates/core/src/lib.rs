pub mod classical;
pub mod groups;
pub mod linalg;
pub mod quadrature;
pub mod quantum;
pub mod sbt;
pub mod states;
