//! Evaluation of low-cost 3D facial reconstructions against a ground-truth
//! scan: mesh and landmark I/O, surface deviation, geometric morphometrics
//! (GPA, PCA, permutation tests) and EDMA form comparison.

pub mod cli;
pub mod edma;
pub mod geomeval;
pub mod meshio;
pub mod morpho;
pub mod rng;
pub mod stats;
pub mod synthkit;
