//! Shared fixtures for the kernel benchmarks.

use dirac_split::dirac::Scheme;
use dirac_split::field::SpectralField;
use dirac_split::preset::{self, Profile};

/// The 1D benchmark state: gaussian pair on the 1024-node line.
pub fn line_state() -> SpectralField {
    let p = preset::preset("example1", Scheme::Strang, Profile::Desk).unwrap();
    p.initial().unwrap()
}

/// The 2D benchmark state: gaussian quartet on the 128 x 128 square.
pub fn square_state() -> SpectralField {
    let p = preset::preset("example3", Scheme::Strang, Profile::Desk).unwrap();
    p.initial().unwrap()
}
