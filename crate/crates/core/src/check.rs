//! Self-contained property suite: structural identities the solver must
//! satisfy regardless of parameters, each reduced to a single measured
//! residual against a pinned bound. The last check rebuilds one full
//! splitting step from dense matrices and an eigendecomposition, sharing
//! no code path with the spectral implementation.

use crate::band::{self, Band};
use crate::dirac::{
    dirac_symbol, kinetic_step, potential_phase_table, relative_l2_error, DiracMatrices,
    MatrixFault, Potential, Scheme, SimParams, SpinorForm,
};
use crate::field::SpectralField;
use crate::grid::PeriodicGrid;
use crate::linalg::ModeMatrix;
use crate::numeric::c64;
use crate::resonance;
use crate::split;
use crate::{Complex64, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

impl PropertyCheck {
    fn graded(name: &'static str, measured: f64, bound: f64, detail: String) -> Self {
        PropertyCheck { name, passed: measured <= bound, measured, bound, detail }
    }
}

/// Run every property. The optional fault perturbs the matrix set handed
/// to the algebra check, giving the suite a detectable failure mode; all
/// other checks always run against the standard operators.
pub fn run_property_suite(fault: Option<MatrixFault>) -> Result<Vec<PropertyCheck>> {
    Ok(vec![
        matrix_algebra(fault),
        mass_conservation()?,
        projector_identities(),
        flow_decomposition()?,
        classification_equivalence()?,
        flow_exactness()?,
        strang_reversibility()?,
        dense_oracle()?,
    ])
}

fn matrix_algebra(fault: Option<MatrixFault>) -> PropertyCheck {
    let mut worst = 0.0f64;
    let mut culprit = String::from("all identities exact");
    for form in [SpinorForm::TwoComponent, SpinorForm::FourComponent] {
        let set = DiracMatrices::with_fault(form, fault);
        for check in set.algebra_checks() {
            if check.deviation > worst {
                worst = check.deviation;
                culprit = format!("{} ({:?})", check.name, form);
            }
        }
    }
    PropertyCheck::graded("matrix-algebra", worst, 0.0, culprit)
}

fn gaussian_pair(grid: PeriodicGrid) -> SpectralField {
    SpectralField::from_fn(grid, 2, |x, c| {
        let shift = if c == 0 { 0.0 } else { 1.0 };
        c64((-(x[0] - shift) * (x[0] - shift) / 2.0).exp(), 0.0)
    })
}

fn gaussian_quartet(grid: PeriodicGrid) -> SpectralField {
    let shifts = [(0.0, 0.0), (1.0, 0.0), (-1.0, -1.0), (0.0, 1.0)];
    SpectralField::from_fn(grid, 4, |x, c| {
        let (sx, sy) = shifts[c];
        let r2 = (x[0] - sx) * (x[0] - sx) + (x[1] - sy) * (x[1] - sy);
        c64((-r2 / 2.0).exp(), 0.0)
    })
}

fn ramp_potential() -> Potential {
    Potential::time_independent("ramp", |x| (1.0 - x[0]) / (1.0 + x[0] * x[0]))
}

fn mass_conservation() -> Result<PropertyCheck> {
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    let v = ramp_potential();
    for &epsilon in &[1.0, 0.25, 0.0625] {
        for &tau in &[0.1, 0.01] {
            for scheme in [Scheme::LieTrotter, Scheme::Strang] {
                let params = SimParams {
                    form: SpinorForm::TwoComponent,
                    epsilon,
                    tau,
                    t_final: 10.0,
                    scheme,
                };
                let u0 = gaussian_pair(PeriodicGrid::line(-16.0, 16.0, 256)?);
                let run = split::evolve(&u0, &v, &params)?;
                if run.mass_drift > worst {
                    worst = run.mass_drift;
                    where_ = format!("1D {scheme} eps={epsilon} tau={tau}");
                }
            }
        }
    }
    let honeycomb = crate::preset::potential_by_id("honeycomb")?;
    for &epsilon in &[1.0, 0.25] {
        for scheme in [Scheme::LieTrotter, Scheme::Strang] {
            let params = SimParams {
                form: SpinorForm::FourComponent,
                epsilon,
                tau: 0.05,
                t_final: 2.0,
                scheme,
            };
            let u0 = gaussian_quartet(PeriodicGrid::square(-8.0, 8.0, 32)?);
            let run = split::evolve(&u0, &honeycomb, &params)?;
            if run.mass_drift > worst {
                worst = run.mass_drift;
                where_ = format!("2D {scheme} eps={epsilon}");
            }
        }
    }
    Ok(PropertyCheck::graded("mass-conservation", worst, 1e-10, where_))
}

fn projector_identities() -> PropertyCheck {
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    for form in [SpinorForm::TwoComponent, SpinorForm::FourComponent] {
        // The two-component symbol lives on a 1D frequency axis.
        let second_axis: &[f64] = match form {
            SpinorForm::TwoComponent => &[0.0],
            SpinorForm::FourComponent => &[0.0, -1.3, 6.5],
        };
        for &epsilon in &[1.0, 0.125, 0.015625] {
            for &x0 in &[0.0, 0.37, -2.9, 14.0] {
                for &x1 in second_axis {
                    let xi = [x0, x1];
                    let plus = band::projector_symbol(form, epsilon, xi, Band::Upper);
                    let minus = band::projector_symbol(form, epsilon, xi, Band::Lower);
                    let id = ModeMatrix::identity(plus.dim());
                    let t = dirac_symbol(form, epsilon, xi);
                    let delta = crate::dirac::dispersion_delta(epsilon, xi);
                    let checks = [
                        ("completeness", plus.add(&minus).max_abs_diff(&id)),
                        ("idempotence", plus.matmul(&plus).max_abs_diff(&plus)),
                        (
                            "orthogonality",
                            plus.matmul(&minus).max_abs_diff(&id.scale(c64(0.0, 0.0))),
                        ),
                        ("hermiticity", plus.adjoint().max_abs_diff(&plus)),
                        (
                            "eigen-relation",
                            t.matmul(&plus).max_abs_diff(&plus.scale(c64(delta, 0.0))),
                        ),
                    ];
                    for (name, dev) in checks {
                        if dev > worst {
                            worst = dev;
                            where_ = format!("{name} ({form:?}, eps={epsilon}, xi=({x0},{x1}))");
                        }
                    }
                }
            }
        }
    }
    PropertyCheck::graded("projector-identities", worst, 1e-12, where_)
}

fn random_field(grid: PeriodicGrid, components: usize, rng: &mut ChaCha8Rng) -> SpectralField {
    let samples: Vec<Complex64> = (0..grid.node_count() * components)
        .map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    SpectralField::from_parts(grid, components, crate::field::Space::Physical, samples)
        .expect("length matches by construction")
}

fn flow_decomposition() -> Result<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    for trial in 0..20 {
        let epsilon = rng.gen_range(0.25..1.0);
        let t = rng.gen_range(0.1..1.5);
        let u = random_field(PeriodicGrid::line(-8.0, 8.0, 64)?, 2, &mut rng);
        let r = band::flow_decomposition_residual(&u, epsilon, t)?;
        if r > worst {
            worst = r;
            where_ = format!("1D trial {trial}: eps={epsilon:.3}, t={t:.3}");
        }
    }
    let epsilon = 0.6;
    let u = random_field(PeriodicGrid::square(-4.0, 4.0, 16)?, 4, &mut rng);
    let r = band::flow_decomposition_residual(&u, epsilon, 0.8)?;
    if r > worst {
        worst = r;
        where_ = "2D case".to_string();
    }
    Ok(PropertyCheck::graded("flow-decomposition", worst, 1e-11, where_))
}

fn classification_equivalence() -> Result<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for _ in 0..10_000 {
        let tau = rng.gen_range(1e-3..2.0);
        let epsilon = rng.gen_range(0.05..1.0);
        let delta = rng.gen_range(0.01..0.5);
        let by_margin = resonance::classify(tau, epsilon, delta)?;
        // Skip the knife edge where the two formulations may legitimately
        // disagree by rounding.
        if (by_margin.margin - delta).abs() < 1e-9 {
            continue;
        }
        checked += 1;
        if resonance::classify_by_interval(tau, epsilon, delta)? != by_margin.nonresonant {
            mismatches += 1;
        }
    }
    Ok(PropertyCheck::graded(
        "classification-equivalence",
        mismatches as f64,
        0.0,
        format!("{checked} triples checked away from the threshold"),
    ))
}

fn flow_exactness() -> Result<PropertyCheck> {
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    for &epsilon in &[1.0, 0.25] {
        for scheme in [Scheme::LieTrotter, Scheme::Strang] {
            let grid = PeriodicGrid::line(-16.0, 16.0, 128)?;
            let u0 = gaussian_pair(grid);
            let t_final = 2.0;
            let params = SimParams {
                form: SpinorForm::TwoComponent,
                epsilon,
                tau: t_final / 40.0,
                t_final,
                scheme,
            };

            // Free flow: splitting is exact, the whole run is one kinetic map.
            let free = split::evolve(&u0, &Potential::zero(), &params)?;
            let exact = kinetic_step(&u0, epsilon, t_final)?;
            let e = relative_l2_error(&free.field, &exact)?;
            if e > worst {
                worst = e;
                where_ = format!("free flow, {scheme}, eps={epsilon}");
            }

            // Constant potential commutes with itself: exact up to a phase.
            let c = 1.3;
            let run = split::evolve(&u0, &Potential::constant(c), &params)?;
            let mut shifted = exact.clone();
            let phase = c64(0.0, -c * t_final).exp();
            for z in shifted.data_mut() {
                *z *= phase;
            }
            let e = relative_l2_error(&run.field, &shifted)?;
            if e > worst {
                worst = e;
                where_ = format!("constant potential, {scheme}, eps={epsilon}");
            }
        }
    }
    Ok(PropertyCheck::graded("split-flow-exactness", worst, 1e-10, where_))
}

fn strang_reversibility() -> Result<PropertyCheck> {
    let grid = PeriodicGrid::line(-16.0, 16.0, 128)?;
    let u0 = gaussian_pair(grid);
    let v = ramp_potential();
    let (epsilon, tau, k) = (0.5, 0.05, 10);
    let mut state = u0.clone();
    for step in 0..k {
        state = split::strang_step(&state, &v, epsilon, tau, step as f64 * tau)?;
    }
    for step in (0..k).rev() {
        state = split::strang_step(&state, &v, epsilon, -tau, (step as f64 + 1.0) * tau)?;
    }
    let measured = relative_l2_error(&state, &u0)?;
    Ok(PropertyCheck::graded(
        "strang-reversibility",
        measured,
        1e-11,
        format!("{k} steps forward and back, eps={epsilon}, tau={tau}"),
    ))
}

// Dense complex Hermitian eigendecomposition by cyclic Jacobi rotations.
// Row-major n x n storage; returns eigenvalues and the unitary V with
// A = V diag(w) V^H.
fn hermitian_eig(n: usize, mut a: Vec<Complex64>) -> (Vec<f64>, Vec<Complex64>) {
    let mut v = vec![c64(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = c64(1.0, 0.0);
    }
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..60 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a[p * n + q];
                let b = beta.norm();
                if b <= 1e-300 {
                    continue;
                }
                let phi = beta.arg();
                let alpha = a[p * n + p].re;
                let gamma = a[q * n + q].re;
                // tan(2 theta) = 2 b / (alpha - gamma), |theta| <= pi/4.
                let d = (alpha - gamma) / (2.0 * b);
                let t = d.signum() / (d.abs() + (d * d + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e_pos = c64(0.0, phi).exp();
                let e_neg = c64(0.0, -phi).exp();
                // Columns p, q of A and V under the right-multiplication.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * c + akq * s * e_neg;
                    a[k * n + q] = akq * c - akp * s * e_pos;
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * c + vkq * s * e_neg;
                    v[k * n + q] = vkq * c - vkp * s * e_pos;
                }
                // Rows p, q by Hermitian symmetry of the updated matrix.
                for k in 0..n {
                    a[p * n + k] = a[k * n + p].conj();
                    a[q * n + k] = a[k * n + q].conj();
                }
                a[p * n + p] = c64(alpha * c * c + 2.0 * b * c * s + gamma * s * s, 0.0);
                a[q * n + q] = c64(alpha * s * s - 2.0 * b * c * s + gamma * c * c, 0.0);
                a[p * n + q] = c64(0.0, 0.0);
                a[q * n + p] = c64(0.0, 0.0);
            }
        }
    }
    let w = (0..n).map(|i| a[i * n + i].re).collect();
    (w, v)
}

// exp(-i tau A) u for Hermitian A given densely.
fn expm_apply(n: usize, a: Vec<Complex64>, tau: f64, u: &[Complex64]) -> Vec<Complex64> {
    let (w, v) = hermitian_eig(n, a);
    // y = V^H u
    let mut y = vec![c64(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = c64(0.0, 0.0);
        for k in 0..n {
            acc += v[k * n + i].conj() * u[k];
        }
        y[i] = acc * c64(0.0, -tau * w[i]).exp();
    }
    let mut out = vec![c64(0.0, 0.0); n];
    for k in 0..n {
        let mut acc = c64(0.0, 0.0);
        for i in 0..n {
            acc += v[k * n + i] * y[i];
        }
        out[k] = acc;
    }
    out
}

// The free generator as one dense matrix over node x component space,
// assembled from plain discrete Fourier sums, nothing shared with the
// FFT path: H[(p,a),(q,b)] = (1/N) sum_k e^{i xi_k . (x_p - x_q)}
// T(xi_k)[a,b] / eps^2.
fn dense_kinetic_generator(grid: &PeriodicGrid, form: SpinorForm, epsilon: f64) -> Vec<Complex64> {
    let nodes = grid.node_count();
    let comps = form.components();
    let n = nodes * comps;
    let symbols: Vec<ModeMatrix> = (0..nodes)
        .map(|k| dirac_symbol(form, epsilon, grid.mode_wavenumbers(k)).scale(c64(1.0 / (epsilon * epsilon), 0.0)))
        .collect();
    let coords: Vec<[f64; 2]> = (0..nodes).map(|p| grid.node_coords(p)).collect();
    let mut h = vec![c64(0.0, 0.0); n * n];
    for p in 0..nodes {
        for q in 0..nodes {
            let dx = [coords[p][0] - coords[q][0], coords[p][1] - coords[q][1]];
            let mut block = ModeMatrix::identity(comps).scale(c64(0.0, 0.0));
            for (k, sym) in symbols.iter().enumerate() {
                let xi = grid.mode_wavenumbers(k);
                let phase = c64(0.0, xi[0] * dx[0] + xi[1] * dx[1]).exp();
                block = block.add(&sym.scale(phase));
            }
            for a in 0..comps {
                for b in 0..comps {
                    h[(p * comps + a) * n + (q * comps + b)] =
                        block.get(a, b) / c64(nodes as f64, 0.0);
                }
            }
        }
    }
    h
}

fn dense_oracle_case(
    grid: PeriodicGrid,
    form: SpinorForm,
    potential: &Potential,
    epsilon: f64,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let comps = form.components();
    let u = random_field(grid.clone(), comps, rng);

    // Spectral path: one first-order step.
    let stepped =
        split::lie_trotter_step(&u, potential, epsilon, tau, 0.0)?.in_space(crate::field::Space::Physical);

    // Dense path: pointwise potential phase, then the eigendecomposed
    // free propagator.
    let phases = potential_phase_table(&grid, potential, 0.0, tau);
    let mut vec_u: Vec<Complex64> = u.data().to_vec();
    for (node, &phase) in phases.iter().enumerate() {
        for c in 0..comps {
            vec_u[node * comps + c] *= phase;
        }
    }
    let n = grid.node_count() * comps;
    let h = dense_kinetic_generator(&grid, form, epsilon);
    let dense = expm_apply(n, h, tau, &vec_u);

    let dense_field =
        SpectralField::from_parts(grid, comps, crate::field::Space::Physical, dense)?;
    relative_l2_error(&stepped, &dense_field)
}

fn dense_oracle() -> Result<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let ramp = ramp_potential();
    let honeycomb = crate::preset::potential_by_id("honeycomb")?;
    let e1 = dense_oracle_case(
        PeriodicGrid::line(-4.0, 4.0, 8)?,
        SpinorForm::TwoComponent,
        &ramp,
        0.7,
        0.3,
        &mut rng,
    )?;
    let e2 = dense_oracle_case(
        PeriodicGrid::square(-2.0, 2.0, 8)?,
        SpinorForm::FourComponent,
        &honeycomb,
        0.6,
        0.25,
        &mut rng,
    )?;
    let (measured, which) = if e1 >= e2 { (e1, "1D") } else { (e2, "2D") };
    Ok(PropertyCheck::graded(
        "dense-oracle",
        measured,
        1e-10,
        format!("worst case {which}: 1D {e1:.2e}, 2D {e2:.2e}"),
    ))
}
