//! Time-splitting integrators: first-order Lie-Trotter (S1) and symmetric
//! second-order Strang (S2) compositions of the exact free flow with the
//! exact potential phase.
//!
//! One S1 step advances the potential phase over [t_n, t_n + tau] first and
//! then applies the free flow for tau. One S2 step wraps the full potential
//! phase between two half-duration free flows. The fused evolution loop
//! merges adjacent half flows so every step costs exactly one inverse and
//! one forward transform.

use crate::cache::{ReferenceCache, ReferenceSpec};
use crate::dirac::{
    apply_phase_table, form_for_field, kinetic_step, kinetic_symbol, mass, potential_phase_table,
    potential_step, Potential, Scheme, SimParams,
};
use crate::field::{apply_mode_table, mode_matrices, Space, SpectralField};
use crate::{Error, Result};
use std::time::Instant;

/// One Lie-Trotter step from time t_n.
pub fn lie_trotter_step(
    field: &SpectralField,
    potential: &Potential,
    epsilon: f64,
    tau: f64,
    t_n: f64,
) -> Result<SpectralField> {
    let kicked = potential_step(field, potential, t_n, t_n + tau);
    kinetic_step(&kicked, epsilon, tau)
}

/// One Strang step from time t_n.
pub fn strang_step(
    field: &SpectralField,
    potential: &Potential,
    epsilon: f64,
    tau: f64,
    t_n: f64,
) -> Result<SpectralField> {
    let half = kinetic_step(field, epsilon, 0.5 * tau)?;
    let kicked = potential_step(&half, potential, t_n, t_n + tau);
    kinetic_step(&kicked, epsilon, 0.5 * tau)
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Final state in physical space.
    pub field: SpectralField,
    /// Discrete mass after 0, 1, .., n steps (n + 1 entries).
    pub mass_history: Vec<f64>,
    /// max_k |mass_k - mass_0| / mass_0.
    pub mass_drift: f64,
    pub steps: usize,
    pub wall_seconds: f64,
}

fn mass_drift(history: &[f64]) -> f64 {
    let m0 = history[0];
    history
        .iter()
        .map(|m| (m - m0).abs() / m0)
        .fold(0.0f64, f64::max)
}

/// Run the full evolution with the fused transform layout (two transforms
/// per step). Mass is tracked in frequency space via the Parseval relation.
pub fn evolve(
    initial: &SpectralField,
    potential: &Potential,
    params: &SimParams,
) -> Result<EvolutionResult> {
    params.validate()?;
    let form = form_for_field(initial)?;
    if form != params.form {
        return Err(Error::Mismatch(format!(
            "params are for the {} form but the field is {}",
            params.form.as_str(),
            form.as_str()
        )));
    }
    let n = params.steps()?;
    let start = Instant::now();
    let grid = initial.grid().clone();
    let comps = initial.components();
    let eps = params.epsilon;
    let tau = params.tau;
    let freq_mass_scale = grid.cell_volume() / grid.node_count() as f64;

    let k_full = mode_matrices(&grid, |xi| kinetic_symbol(form, eps, xi, tau / (eps * eps)));
    let k_half = match params.scheme {
        Scheme::Strang => Some(mode_matrices(&grid, |xi| {
            kinetic_symbol(form, eps, xi, 0.5 * tau / (eps * eps))
        })),
        Scheme::LieTrotter => None,
    };
    // Time-independent potentials get one phase table for the whole run.
    let static_phases = potential
        .is_time_independent()
        .then(|| potential_phase_table(&grid, potential, 0.0, tau));

    let mut state = initial.in_space(Space::Frequency);
    let mut mass_history = Vec::with_capacity(n + 1);
    mass_history.push(freq_mass_scale * state.norm_sqr_sum());

    if let Some(kh) = &k_half {
        apply_mode_table(state.data_mut(), comps, kh);
    }
    for step in 0..n {
        state.to_physical();
        match &static_phases {
            Some(table) => apply_phase_table(state.data_mut(), comps, table),
            None => {
                let t_n = step as f64 * tau;
                let table = potential_phase_table(&grid, potential, t_n, t_n + tau);
                apply_phase_table(state.data_mut(), comps, &table);
            }
        }
        state.to_frequency();
        match (&k_half, step + 1 == n) {
            (Some(kh), true) => apply_mode_table(state.data_mut(), comps, kh),
            _ => apply_mode_table(state.data_mut(), comps, &k_full),
        }
        mass_history.push(freq_mass_scale * state.norm_sqr_sum());
    }
    state.to_physical();

    Ok(EvolutionResult {
        mass_drift: mass_drift(&mass_history),
        steps: n,
        wall_seconds: start.elapsed().as_secs_f64(),
        field: state,
        mass_history,
    })
}

/// Evolution composed from the public single-step operations. Semantically
/// identical to `evolve`; kept as the plain formulation the fused loop is
/// tested against.
pub fn evolve_composed(
    initial: &SpectralField,
    potential: &Potential,
    params: &SimParams,
) -> Result<EvolutionResult> {
    params.validate()?;
    let n = params.steps()?;
    let start = Instant::now();
    let mut state = initial.in_space(Space::Physical);
    let mut mass_history = Vec::with_capacity(n + 1);
    mass_history.push(mass(&state));
    for step in 0..n {
        let t_n = step as f64 * params.tau;
        state = match params.scheme {
            Scheme::LieTrotter => {
                lie_trotter_step(&state, potential, params.epsilon, params.tau, t_n)?
            }
            Scheme::Strang => strang_step(&state, potential, params.epsilon, params.tau, t_n)?,
        };
        mass_history.push(mass(&state));
    }
    state.to_physical();
    Ok(EvolutionResult {
        mass_drift: mass_drift(&mass_history),
        steps: n,
        wall_seconds: start.elapsed().as_secs_f64(),
        field: state,
        mass_history,
    })
}

/// Fine-step Strang reference ("numerical exact" solution) for the problem
/// described by `spec`, served from the cache when possible. Returns the
/// final state and whether it was loaded rather than computed.
pub fn reference_solution(
    initial: &SpectralField,
    potential: &Potential,
    spec: &ReferenceSpec,
    cache: Option<&ReferenceCache>,
    allow_compute: bool,
) -> Result<(SpectralField, bool)> {
    let compute = || -> Result<SpectralField> {
        if !allow_compute {
            return Err(Error::MissingReference { key: spec.key() });
        }
        let params = SimParams {
            form: spec.form,
            epsilon: spec.epsilon,
            tau: spec.tau_ref(),
            t_final: spec.t_final,
            scheme: Scheme::Strang,
        };
        Ok(evolve(initial, potential, &params)?.field)
    };
    match cache {
        Some(c) => c.get_or_compute(spec, compute),
        None => Ok((compute()?, false)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{self, SpinorForm};
    use crate::grid::PeriodicGrid;
    use crate::numeric::c64;
    use crate::preset;

    fn packet_1d(m: usize) -> SpectralField {
        let grid = PeriodicGrid::line(-16.0, 16.0, m).unwrap();
        SpectralField::from_fn(grid, 2, |x, c| {
            let shift = if c == 0 { 0.0 } else { 1.0 };
            c64((-0.5 * (x[0] - shift) * (x[0] - shift)).exp(), 0.0)
        })
    }

    fn params(scheme: Scheme, epsilon: f64, tau: f64, t_final: f64) -> SimParams {
        SimParams { form: SpinorForm::TwoComponent, epsilon, tau, t_final, scheme }
    }

    #[test]
    fn fused_matches_composed() {
        let initial = packet_1d(128);
        let v = preset::potential_by_id("rational-ramp").unwrap();
        for scheme in [Scheme::LieTrotter, Scheme::Strang] {
            let p = params(scheme, 0.5, 0.05, 1.0);
            let fused = evolve(&initial, &v, &p).unwrap();
            let composed = evolve_composed(&initial, &v, &p).unwrap();
            let err = dirac::relative_l2_error(&fused.field, &composed.field).unwrap();
            assert!(err < 1e-12, "{scheme}: fused vs composed {err}");
            assert_eq!(fused.steps, 20);
            assert_eq!(fused.mass_history.len(), 21);
        }
    }

    #[test]
    fn free_flow_is_exact() {
        let initial = packet_1d(128);
        let v = Potential::zero();
        for scheme in [Scheme::LieTrotter, Scheme::Strang] {
            let p = params(scheme, 0.5, 0.01, 1.0);
            let out = evolve(&initial, &v, &p).unwrap();
            let exact = kinetic_step(&initial, 0.5, 1.0).unwrap();
            let err = dirac::relative_l2_error(&out.field, &exact).unwrap();
            assert!(err < 1e-10, "{scheme}: free-flow error {err}");
        }
    }

    #[test]
    fn constant_potential_is_exact() {
        let initial = packet_1d(128);
        let v = Potential::constant(1.3);
        for scheme in [Scheme::LieTrotter, Scheme::Strang] {
            let p = params(scheme, 0.5, 0.01, 1.0);
            let out = evolve(&initial, &v, &p).unwrap();
            let mut exact = kinetic_step(&initial, 0.5, 1.0).unwrap();
            let phase = c64(0.0, -1.3 * 1.0).exp();
            for z in exact.data_mut() {
                *z *= phase;
            }
            let err = dirac::relative_l2_error(&out.field, &exact).unwrap();
            assert!(err < 1e-10, "{scheme}: constant-potential error {err}");
        }
    }

    #[test]
    fn strang_step_is_time_reversible() {
        let initial = packet_1d(128);
        let v = preset::potential_by_id("rational-ramp").unwrap();
        let mut state = initial.clone();
        let n = 10;
        for k in 0..n {
            state = strang_step(&state, &v, 0.5, 0.05, k as f64 * 0.05).unwrap();
        }
        for k in (0..n).rev() {
            state = strang_step(&state, &v, 0.5, -0.05, (k + 1) as f64 * 0.05).unwrap();
        }
        let err = dirac::relative_l2_error(&state, &initial).unwrap();
        assert!(err < 1e-11, "round-trip error {err}");
    }

    #[test]
    fn mass_conserved_over_long_run() {
        let initial = packet_1d(256);
        let v = preset::potential_by_id("rational-ramp").unwrap();
        for scheme in [Scheme::LieTrotter, Scheme::Strang] {
            let p = params(scheme, 0.25, 0.01, 10.0);
            let out = evolve(&initial, &v, &p).unwrap();
            assert!(out.mass_drift < 1e-10, "{scheme}: drift {}", out.mass_drift);
        }
    }

    #[test]
    fn strang_global_order_two() {
        // Global error against a fine Strang reference on Example-1-style
        // data; three halvings fit slopes near the classical orders.
        let initial = packet_1d(256);
        let v = preset::potential_by_id("rational-ramp").unwrap();
        let t = 1.0;
        let reference = evolve(&initial, &v, &params(Scheme::Strang, 1.0, t / 2048.0, t))
            .unwrap()
            .field;
        for (scheme, expect) in [(Scheme::LieTrotter, 1.0), (Scheme::Strang, 2.0)] {
            let mut errs = Vec::new();
            let mut taus = Vec::new();
            for k in [16usize, 32, 64, 128] {
                let out = evolve(&initial, &v, &params(scheme, 1.0, t / k as f64, t)).unwrap();
                errs.push(
                    dirac::relative_l2_error(&out.field, &reference)
                        .unwrap()
                        .ln(),
                );
                taus.push((t / k as f64).ln());
            }
            let slope = crate::numeric::lsq_slope(&taus, &errs);
            assert!(
                (slope - expect).abs() < 0.1,
                "{scheme}: fitted order {slope}, expected about {expect}"
            );
        }
    }

    #[test]
    fn two_dimensional_mass_and_consistency() {
        let grid = PeriodicGrid::square(-8.0, 8.0, 32).unwrap();
        let initial = SpectralField::from_fn(grid, 4, |x, c| {
            let (dx, dy) = match c {
                0 => (0.0, 0.0),
                1 => (1.0, 0.0),
                2 => (-1.0, -1.0),
                _ => (0.0, 1.0),
            };
            c64(
                (-0.5 * ((x[0] - dx).powi(2) + (x[1] - dy).powi(2))).exp(),
                0.0,
            )
        });
        let v = preset::potential_by_id("honeycomb").unwrap();
        let p = SimParams {
            form: SpinorForm::FourComponent,
            epsilon: 0.5,
            tau: 0.02,
            t_final: 0.5,
            scheme: Scheme::Strang,
        };
        let fused = evolve(&initial, &v, &p).unwrap();
        let composed = evolve_composed(&initial, &v, &p).unwrap();
        let err = dirac::relative_l2_error(&fused.field, &composed.field).unwrap();
        assert!(err < 1e-12, "2D fused vs composed {err}");
        assert!(fused.mass_drift < 1e-11);
    }

    // The mirrored second-order arrangement (potential halves outside, one
    // full kinetic step inside) at the coarsest resonant step on the 1D
    // ramp problem has a pinned unnormalized error of 8.08e-2. The pin
    // exercises both step factors, the time-integral handling, and the
    // reference path in one number.
    #[test]
    fn mirrored_strang_matches_pinned_coarse_error() {
        let p = crate::preset::preset("example1", Scheme::Strang, crate::preset::Profile::Desk)
            .unwrap();
        let initial = p.initial().unwrap();
        let potential = p.potential().unwrap();
        let (eps, tau) = (1.0, std::f64::consts::PI / 4.0);

        let ref_params = SimParams {
            form: p.form,
            epsilon: eps,
            tau: p.t_final / 20_000.0,
            t_final: p.t_final,
            scheme: Scheme::Strang,
        };
        let reference = evolve(&initial, &potential, &ref_params).unwrap().field;

        let n = (p.t_final / tau).round() as usize;
        let mut state = initial.clone();
        for k in 0..n {
            let t_n = k as f64 * tau;
            state = dirac::potential_step(&state, &potential, t_n, t_n + tau / 2.0);
            state = dirac::kinetic_step(&state, eps, tau).unwrap();
            state = dirac::potential_step(&state, &potential, t_n + tau / 2.0, t_n + tau);
        }

        let mut diff = state.in_space(crate::field::Space::Physical);
        let ref_phys = reference.in_space(crate::field::Space::Physical);
        for (d, r) in diff.data_mut().iter_mut().zip(ref_phys.data()) {
            *d -= r;
        }
        let e = dirac::mass(&diff).sqrt();
        let pinned = 8.08e-2;
        assert!(
            e > pinned / 2.0 && e < pinned * 2.0,
            "mirrored coarse-step error {e:.4e} vs pinned {pinned:.2e}"
        );
    }

    // The transient convergence order at the coarsest nonresonant cell
    // (eps = 1/2, between tau = 1/2 and 1/4) depends on which factor
    // leads the first-order composition: kinetic-first lands near 1.10,
    // the potential-first arrangement used by evolve() sits near 1.19.
    // Pin both so the gap stays a recorded fact rather than a surprise.
    #[test]
    fn leading_factor_shifts_the_coarse_nonresonant_transient() {
        let p = crate::preset::preset(
            "example2",
            Scheme::LieTrotter,
            crate::preset::Profile::Desk,
        )
        .unwrap();
        let initial = p.initial().unwrap();
        let potential = p.potential().unwrap();
        let eps = 0.5;

        let ref_params = SimParams {
            form: p.form,
            epsilon: eps,
            tau: p.t_final / 2048.0,
            t_final: p.t_final,
            scheme: Scheme::Strang,
        };
        let reference = evolve(&initial, &potential, &ref_params).unwrap().field;

        let mut shipped = Vec::new();
        let mut mirrored = Vec::new();
        for tau in [0.5, 0.25] {
            let params = SimParams {
                form: p.form,
                epsilon: eps,
                tau,
                t_final: p.t_final,
                scheme: Scheme::LieTrotter,
            };
            let state = evolve(&initial, &potential, &params).unwrap().field;
            shipped.push(dirac::relative_l2_error(&state, &reference).unwrap());

            let n = (p.t_final / tau).round() as usize;
            let mut state = initial.in_space(crate::field::Space::Physical);
            for k in 0..n {
                let t_n = k as f64 * tau;
                let free = dirac::kinetic_step(&state, eps, tau).unwrap();
                state = dirac::potential_step(&free, &potential, t_n, t_n + tau);
            }
            mirrored.push(dirac::relative_l2_error(&state, &reference).unwrap());
        }

        let order = |e: &[f64]| (e[0] / e[1]).ln() / 2f64.ln();
        let kin_first = order(&mirrored);
        let pot_first = order(&shipped);
        assert!(
            (kin_first - 1.10).abs() < 0.05,
            "kinetic-first transient order {kin_first:.4}, expected near 1.10"
        );
        assert!(
            (pot_first - 1.19).abs() < 0.05,
            "potential-first transient order {pot_first:.4}, expected near 1.19"
        );
    }
}
