//! Energy-band projectors and the oscillatory/dispersive factorization of
//! the free flow.
//!
//! The free symbol has eigenvalues +delta(xi) and -delta(xi) with
//! delta = sqrt(1 + eps^2 |xi|^2); the projectors onto the two bands are
//! (I +- T / delta) / 2. On each band the flow splits into the scalar
//! carrier phase exp(+-i t / eps^2) times the slow dispersive phase
//! exp(+-i t D) with D = (delta - 1) / eps^2, which stays bounded as
//! eps -> 0.

use crate::dirac::{dirac_symbol, dispersion_delta, form_for_field, kinetic_symbol, Potential};
use crate::field::{apply_mode_symbol, Space, SpectralField};
use crate::linalg::ModeMatrix;
use crate::numeric::c64;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Upper,
    Lower,
}

impl Band {
    pub fn sign(self) -> f64 {
        match self {
            Band::Upper => 1.0,
            Band::Lower => -1.0,
        }
    }
}

/// Projector symbol (I +- T(xi) / delta(xi)) / 2.
pub fn projector_symbol(
    form: crate::dirac::SpinorForm,
    epsilon: f64,
    xi: [f64; 2],
    band: Band,
) -> ModeMatrix {
    let t = dirac_symbol(form, epsilon, xi);
    let delta = dispersion_delta(epsilon, xi);
    let id = ModeMatrix::identity(t.dim());
    t.scale(c64(band.sign() / delta, 0.0)).add(&id).scale(c64(0.5, 0.0))
}

/// Project a field onto one band.
pub fn project(field: &SpectralField, epsilon: f64, band: Band) -> Result<SpectralField> {
    let form = form_for_field(field)?;
    apply_mode_symbol(field, |xi| projector_symbol(form, epsilon, xi, band))
}

/// Dispersive shift D(xi) = (delta - 1) / eps^2, evaluated in the
/// cancellation-free form |xi|^2 / (delta + 1).
pub fn dispersion_shift(epsilon: f64, xi: [f64; 2]) -> f64 {
    let w = xi[0] * xi[0] + xi[1] * xi[1];
    w / (dispersion_delta(epsilon, xi) + 1.0)
}

/// Multiply each mode by exp(i t D(xi)).
pub fn apply_dispersion_phase(field: &SpectralField, epsilon: f64, t: f64) -> Result<SpectralField> {
    let form = form_for_field(field)?;
    apply_mode_symbol(field, |xi| {
        let phase = c64(0.0, t * dispersion_shift(epsilon, xi)).exp();
        ModeMatrix::identity(form.components()).scale(phase)
    })
}

/// Relative defect of the band factorization of the free flow,
/// || exp(i t T / eps^2) u - sum_+- exp(+-i t / eps^2) exp(+-i t D) P_+- u ||
/// over ||u||. The identity is exact per mode, so this measures only the
/// roundoff of assembling the phases separately; it grows with t / eps^2.
pub fn flow_decomposition_residual(field: &SpectralField, epsilon: f64, t: f64) -> Result<f64> {
    let form = form_for_field(field)?;
    let u = field.in_space(Space::Frequency);

    // kinetic_step applies exp(-i a T); a = -t/eps^2 gives the forward flow.
    let a = -t / (epsilon * epsilon);
    let lhs = apply_mode_symbol(&u, |xi| kinetic_symbol(form, epsilon, xi, a))?;

    let carrier = t / (epsilon * epsilon);
    let mut rhs = {
        let plus = project(&u, epsilon, Band::Upper)?;
        let mut plus = apply_dispersion_phase(&plus, epsilon, t)?;
        let phase = c64(0.0, carrier).exp();
        for z in plus.data_mut() {
            *z *= phase;
        }
        plus
    };
    {
        let minus = project(&u, epsilon, Band::Lower)?;
        let mut minus = apply_dispersion_phase(&minus, epsilon, -t)?;
        let phase = c64(0.0, -carrier).exp();
        for z in minus.data_mut() {
            *z *= phase;
        }
        for (r, m) in rhs.data_mut().iter_mut().zip(minus.data()) {
            *r += m;
        }
    }

    let mut diff_sq = 0.0;
    for (l, r) in lhs.data().iter().zip(rhs.data()) {
        diff_sq += (l - r).norm_sqr();
    }
    Ok((diff_sq / u.norm_sqr_sum()).sqrt())
}

/// L2 norm (with mesh weight) of the cross-band term P_+ (V . (P_- u))
/// at time t. For data concentrated in the upper band this is the size of
/// the interaction the potential induces between bands, and it shrinks
/// linearly in eps.
pub fn band_interaction_norm(
    field: &SpectralField,
    potential: &Potential,
    epsilon: f64,
    t: f64,
) -> Result<f64> {
    let lower = project(field, epsilon, Band::Lower)?;
    let mut phys = lower.in_space(Space::Physical);
    let comps = phys.components();
    let grid = phys.grid().clone();
    for node in 0..grid.node_count() {
        let v = potential.eval(t, grid.node_coords(node));
        for c in 0..comps {
            phys.data_mut()[node * comps + c] *= v;
        }
    }
    let upper = project(&phys, epsilon, Band::Upper)?;
    Ok((crate::dirac::mass(&upper)).sqrt())
}
