//! All-order WKB (Dunham) quantization for one-dimensional polynomial potentials.
//!
//! * [`diffpoly`] exact differential polynomials in `Q = V - E`
//! * [`wkb_series`] the terms `T_n = S_n'` and antiderivatives of the odd terms
//! * [`potential`] polynomial potentials and turning points
//! * [`contour`] contour action integrals with branch tracking of `sqrt(Q)`
//! * [`solver`] eigenvalues from the quantization condition
//! * [`oracle`] reference eigenvalues by direct diagonalization
//! * [`cli`] the command-line front end

pub mod diffpoly;
pub mod wkb_series;
pub mod potential;
pub mod roots;
pub mod contour;
pub mod solver;
pub mod oracle;
pub mod cli;
