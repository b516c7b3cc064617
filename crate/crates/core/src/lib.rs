//! Birman–Schwinger analysis of weakly coupled Schrödinger operators with
//! singular measure potentials in the plane.

pub mod bskernel;
pub mod field;
pub mod measure;
pub mod numeric;
pub mod spectral;
pub mod specfun;
