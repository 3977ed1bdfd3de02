//! Disk maps as truncated polynomials in `z` and `zbar`, Wirtinger
//! derivatives, the right inverse `T` of `d_bar`, polar collocation grids and
//! least-squares fitting.

mod grid;
mod poly;
mod quadrature;

pub use grid::{fit_grid, CollocationGrid, Fitter, GridValues, MAX_CONDITION};
pub use poly::{mono_count, mono_index, monomials, CoeffEntry, PolyDiskMap, PolyDiskMapFile};
pub use quadrature::{cauchy_green_quadrature, gauss_legendre};
