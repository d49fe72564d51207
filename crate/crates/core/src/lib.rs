pub mod error;
pub mod geometry;
pub mod space;
pub mod spectra;
pub mod algebraic;
pub mod weights;
pub mod partition;
pub mod cubature;
pub mod cli;
