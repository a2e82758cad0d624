pub mod besov;
pub mod cutoff;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod quadrature;
pub mod recon;
pub mod singular;
