pub mod analytic;
pub mod angmom;
pub mod consts;
pub mod hamiltonian;
pub mod model;
pub mod spectra;
