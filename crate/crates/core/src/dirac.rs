//! The Dirac-specific layer: spinor forms, the constant matrix sets, the
//! closed-form kinetic propagator symbol, potential phase steps, and the
//! discrete mass / error functionals.

use crate::field::{self, Space, SpectralField};
use crate::grid::PeriodicGrid;
use crate::linalg::{Mat2, Mat4, ModeMatrix};
use crate::numeric::{c64, compensated_sum, C_ZERO};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Which form of the equation is being solved: the two-component form on a
/// 1D grid or the four-component form on a 2D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinorForm {
    TwoComponent,
    FourComponent,
}

impl SpinorForm {
    pub fn components(self) -> usize {
        match self {
            SpinorForm::TwoComponent => 2,
            SpinorForm::FourComponent => 4,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            SpinorForm::TwoComponent => 1,
            SpinorForm::FourComponent => 2,
        }
    }

    pub fn for_grid(grid: &PeriodicGrid) -> SpinorForm {
        match grid.dim() {
            1 => SpinorForm::TwoComponent,
            _ => SpinorForm::FourComponent,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpinorForm::TwoComponent => "two-component",
            SpinorForm::FourComponent => "four-component",
        }
    }
}

/// Splitting scheme: first-order Lie-Trotter (S1) or the symmetric
/// second-order Strang composition (S2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    LieTrotter,
    Strang,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::LieTrotter => "s1",
            Scheme::Strang => "s2",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "lie" | "lie-trotter" => Ok(Scheme::LieTrotter),
            "s2" | "strang" => Ok(Scheme::Strang),
            other => Err(Error::Param(format!("unknown scheme {other:?} (expected s1 or s2)"))),
        }
    }
}

/// Test hook: deliberately corrupt one matrix entry so the algebra checks
/// have a failure mode to detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFault {
    /// Flip the sign of the (0,1) entry of sigma2 (or of its embedding in
    /// the second 4x4 matrix), breaking Hermiticity and anticommutation.
    Sigma2SignFlip,
}

/// The constant matrix set for the active form: sigma1, sigma2, sigma3 for
/// the two-component form; alpha1, alpha2, beta for the four-component form.
pub struct DiracMatrices {
    form: SpinorForm,
    named: Vec<(&'static str, ModeMatrix)>,
}

fn sigma_set() -> [Mat2; 3] {
    let o = C_ZERO;
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    [
        [[o, one], [one, o]],
        [[o, -i], [i, o]],
        [[one, o], [o, -one]],
    ]
}

fn alpha_beta_set() -> [Mat4; 3] {
    let [s1, s2, _s3] = sigma_set();
    let o = C_ZERO;
    let one = c64(1.0, 0.0);
    let mut a1 = [[o; 4]; 4];
    let mut a2 = [[o; 4]; 4];
    for r in 0..2 {
        for c in 0..2 {
            a1[r][c + 2] = s1[r][c];
            a1[r + 2][c] = s1[r][c];
            a2[r][c + 2] = s2[r][c];
            a2[r + 2][c] = s2[r][c];
        }
    }
    let mut b = [[o; 4]; 4];
    b[0][0] = one;
    b[1][1] = one;
    b[2][2] = -one;
    b[3][3] = -one;
    [a1, a2, b]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraCheck {
    pub name: String,
    /// Max entrywise deviation; the standard sets satisfy every identity
    /// exactly in f64, so pass means deviation == 0.
    pub deviation: f64,
}

impl DiracMatrices {
    pub fn standard(form: SpinorForm) -> Self {
        Self::with_fault(form, None)
    }

    pub fn with_fault(form: SpinorForm, fault: Option<MatrixFault>) -> Self {
        let mut named: Vec<(&'static str, ModeMatrix)> = match form {
            SpinorForm::TwoComponent => {
                let [s1, s2, s3] = sigma_set();
                vec![
                    ("sigma1", ModeMatrix::Two(s1)),
                    ("sigma2", ModeMatrix::Two(s2)),
                    ("sigma3", ModeMatrix::Two(s3)),
                ]
            }
            SpinorForm::FourComponent => {
                let [a1, a2, b] = alpha_beta_set();
                vec![
                    ("alpha1", ModeMatrix::Four(a1)),
                    ("alpha2", ModeMatrix::Four(a2)),
                    ("beta", ModeMatrix::Four(b)),
                ]
            }
        };
        if let Some(MatrixFault::Sigma2SignFlip) = fault {
            // sigma2 sits at index 1 in both sets; in the 4x4 embedding the
            // corresponding entry is (0, 3).
            let m = &mut named[1].1;
            match m {
                ModeMatrix::Two(m2) => m2[0][1] = -m2[0][1],
                ModeMatrix::Four(m4) => m4[0][3] = -m4[0][3],
            }
        }
        DiracMatrices { form, named }
    }

    pub fn form(&self) -> SpinorForm {
        self.form
    }

    pub fn get(&self, name: &str) -> Option<&ModeMatrix> {
        self.named.iter().find(|(n, _)| *n == name).map(|(_, m)| m)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.named.iter().map(|(n, _)| *n).collect()
    }

    /// Hermiticity, unit square, and pairwise anticommutation for the whole
    /// set. Deviations are exact zeros for the standard matrices.
    pub fn algebra_checks(&self) -> Vec<AlgebraCheck> {
        let n = self.named[0].1.dim();
        let id = ModeMatrix::identity(n);
        let two_id = id.scale(c64(2.0, 0.0));
        let zero = id.scale(C_ZERO);
        let mut out = Vec::new();
        for (name, m) in &self.named {
            out.push(AlgebraCheck {
                name: format!("{name} hermitian"),
                deviation: m.max_abs_diff(&m.adjoint()),
            });
            out.push(AlgebraCheck {
                name: format!("{name}^2 = I"),
                deviation: m.matmul(m).max_abs_diff(&id),
            });
        }
        for i in 0..self.named.len() {
            for j in (i + 1)..self.named.len() {
                let (na, a) = &self.named[i];
                let (nb, b) = &self.named[j];
                let anti = a.matmul(b).add(&b.matmul(a));
                out.push(AlgebraCheck {
                    name: format!("{{{na}, {nb}}} = 0"),
                    deviation: anti.max_abs_diff(&zero),
                });
            }
        }
        // Completeness of the squares: sum of A_k^2 = 3 I, equivalent to the
        // unit squares but stated on the set as a whole.
        let sum_sq = self
            .named
            .iter()
            .fold(zero, |acc, (_, m)| acc.add(&m.matmul(m)));
        out.push(AlgebraCheck {
            name: "sum of squares = 3I".into(),
            deviation: sum_sq.max_abs_diff(&two_id.add(&id)),
        });
        out
    }
}

/// Relativistic dispersion factor delta(xi) = sqrt(1 + eps^2 |xi|^2).
pub fn dispersion_delta(epsilon: f64, xi: [f64; 2]) -> f64 {
    (1.0 + epsilon * epsilon * (xi[0] * xi[0] + xi[1] * xi[1])).sqrt()
}

/// Fourier symbol of the free operator: eps (xi . alpha) + beta in the
/// four-component form, eps xi sigma1 + sigma3 in the two-component form.
/// Hermitian with eigenvalues +-delta(xi).
pub fn dirac_symbol(form: SpinorForm, epsilon: f64, xi: [f64; 2]) -> ModeMatrix {
    match form {
        SpinorForm::TwoComponent => {
            let e = c64(epsilon * xi[0], 0.0);
            let one = c64(1.0, 0.0);
            ModeMatrix::Two([[one, e], [e, -one]])
        }
        SpinorForm::FourComponent => {
            let z = c64(epsilon * xi[0], epsilon * xi[1]);
            let zb = z.conj();
            let o = C_ZERO;
            let one = c64(1.0, 0.0);
            ModeMatrix::Four([
                [one, o, o, zb],
                [o, one, z, o],
                [o, zb, -one, o],
                [z, o, o, -one],
            ])
        }
    }
}

/// Closed-form propagator symbol exp(-i a T(xi)):
/// cos(a delta) I - i sin(a delta)/delta * T(xi), using T^2 = delta^2 I.
pub fn kinetic_symbol(form: SpinorForm, epsilon: f64, xi: [f64; 2], a: f64) -> ModeMatrix {
    let delta = dispersion_delta(epsilon, xi);
    let (s, c) = (a * delta).sin_cos();
    let f = s / delta;
    match form {
        SpinorForm::TwoComponent => {
            let diag_p = c64(c, -f);
            let diag_m = c64(c, f);
            let off = c64(0.0, -f * epsilon * xi[0]);
            ModeMatrix::Two([[diag_p, off], [off, diag_m]])
        }
        SpinorForm::FourComponent => {
            let z = c64(epsilon * xi[0], epsilon * xi[1]);
            let zb = z.conj();
            let mif = c64(0.0, -f);
            let diag_p = c64(c, -f);
            let diag_m = c64(c, f);
            let o = C_ZERO;
            ModeMatrix::Four([
                [diag_p, o, o, mif * zb],
                [o, diag_p, mif * z, o],
                [o, mif * zb, diag_m, o],
                [mif * z, o, o, diag_m],
            ])
        }
    }
}

/// Apply the free flow exp(-i (tau / eps^2) T) to the field.
pub fn kinetic_step(field: &SpectralField, epsilon: f64, tau: f64) -> Result<SpectralField> {
    let form = form_for_field(field)?;
    let a = tau / (epsilon * epsilon);
    field::apply_mode_symbol(field, |xi| kinetic_symbol(form, epsilon, xi, a))
}

pub fn form_for_field(field: &SpectralField) -> Result<SpinorForm> {
    let form = SpinorForm::for_grid(field.grid());
    if form.components() != field.components() {
        return Err(Error::Mismatch(format!(
            "{}D grid expects {} components, field has {}",
            field.grid().dim(),
            form.components(),
            field.components()
        )));
    }
    Ok(form)
}

type SpaceFn = dyn Fn([f64; 2]) -> f64 + Send + Sync;
type TimeSpaceFn = dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync;
type IntegralFn = dyn Fn(f64, f64, [f64; 2]) -> f64 + Send + Sync;

#[derive(Clone)]
enum PotentialKind {
    Zero,
    Constant(f64),
    Static(Arc<SpaceFn>),
    TimeVarying {
        eval: Arc<TimeSpaceFn>,
        exact_integral: Option<Arc<IntegralFn>>,
    },
}

/// Real scalar electric potential V(t, x). Time integrals over a step are
/// exact for time-independent potentials and for time-varying ones that
/// supply a closed-form integral; otherwise a 4-node Gauss-Legendre rule is
/// used (degree-7 exactness, far below the splitting error).
#[derive(Clone)]
pub struct Potential {
    id: String,
    kind: PotentialKind,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("id", &self.id).finish()
    }
}

const GL4_NODES: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.34785484513745385,
    0.6521451548625461,
    0.6521451548625461,
    0.34785484513745385,
];

impl Potential {
    pub fn zero() -> Self {
        Potential { id: "zero".into(), kind: PotentialKind::Zero }
    }

    pub fn constant(v: f64) -> Self {
        Potential { id: format!("const:{v}"), kind: PotentialKind::Constant(v) }
    }

    pub fn time_independent(
        id: impl Into<String>,
        f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Potential { id: id.into(), kind: PotentialKind::Static(Arc::new(f)) }
    }

    pub fn time_varying(
        id: impl Into<String>,
        eval: impl Fn(f64, [f64; 2]) -> f64 + Send + Sync + 'static,
        exact_integral: Option<Arc<IntegralFn>>,
    ) -> Self {
        Potential {
            id: id.into(),
            kind: PotentialKind::TimeVarying { eval: Arc::new(eval), exact_integral },
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self.kind, PotentialKind::TimeVarying { .. })
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant(v) => *v,
            PotentialKind::Static(f) => f(x),
            PotentialKind::TimeVarying { eval, .. } => eval(t, x),
        }
    }

    /// Integral of V(., x) over [t0, t1].
    pub fn integral(&self, t0: f64, t1: f64, x: [f64; 2]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant(v) => v * (t1 - t0),
            PotentialKind::Static(f) => f(x) * (t1 - t0),
            PotentialKind::TimeVarying { eval, exact_integral } => {
                if let Some(exact) = exact_integral {
                    exact(t0, t1, x)
                } else {
                    let mid = 0.5 * (t0 + t1);
                    let half = 0.5 * (t1 - t0);
                    let mut s = 0.0;
                    for (node, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                        s += w * eval(mid + half * node, x);
                    }
                    s * half
                }
            }
        }
    }
}

/// Node-wise phase factors exp(-i integral of V over [t0, t1]).
pub fn potential_phase_table(
    grid: &PeriodicGrid,
    potential: &Potential,
    t0: f64,
    t1: f64,
) -> Vec<Complex64> {
    (0..grid.node_count())
        .map(|node| {
            let w = potential.integral(t0, t1, grid.node_coords(node));
            let (s, c) = w.sin_cos();
            c64(c, -s)
        })
        .collect()
}

pub fn apply_phase_table(data: &mut [Complex64], components: usize, table: &[Complex64]) {
    for (chunk, &phase) in data.chunks_exact_mut(components).zip(table) {
        for z in chunk {
            *z *= phase;
        }
    }
}

/// Multiply by exp(-i integral of V) node by node. Output keeps the input's
/// space tag; the transform to physical space happens internally if needed.
pub fn potential_step(
    field: &SpectralField,
    potential: &Potential,
    t0: f64,
    t1: f64,
) -> SpectralField {
    let table = potential_phase_table(field.grid(), potential, t0, t1);
    let original = field.space();
    let mut out = field.in_space(Space::Physical);
    let c = out.components();
    apply_phase_table(out.data_mut(), c, &table);
    if original == Space::Frequency {
        out.to_frequency();
    }
    out
}

/// Discrete mass: cell volume times the sum of |v|^2 over nodes and
/// components. Computable in either space via the transform's Parseval
/// relation (the frequency form divides by the mode count).
pub fn mass(field: &SpectralField) -> f64 {
    let vol = field.grid().cell_volume();
    match field.space() {
        Space::Physical => vol * field.norm_sqr_sum(),
        Space::Frequency => vol * field.norm_sqr_sum() / field.grid().node_count() as f64,
    }
}

/// Relative discrete l2 error ||a - b|| / ||b||. The mesh weight cancels in
/// the ratio; fields must share grid and component count. Mismatched spaces
/// are reconciled by converting a copy of `a`.
pub fn relative_l2_error(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    field::check_compatible(a, b)?;
    let converted;
    let a_data = if a.space() == b.space() {
        a.data()
    } else {
        converted = a.in_space(b.space());
        converted.data()
    };
    let num = compensated_sum(a_data.iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()));
    let den = compensated_sum(b.data().iter().map(|z| z.norm_sqr()));
    if den == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok((num / den).sqrt())
}

/// Parameters of one time evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub form: SpinorForm,
    pub epsilon: f64,
    pub tau: f64,
    pub t_final: f64,
    pub scheme: Scheme,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            problems.push(format!("epsilon = {} outside (0, 1]", self.epsilon));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            problems.push(format!("tau = {} must be positive and finite", self.tau));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            problems.push(format!("t_final = {} must be positive and finite", self.t_final));
        }
        if problems.is_empty() {
            self.steps().map(|_| ())
        } else {
            Err(Error::Param(problems.join("; ")))
        }
    }

    /// Number of steps; t_final must be an integer multiple of tau to within
    /// 1e-9 relative so the final time is hit exactly.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if n < 1.0 {
            return Err(Error::Param(format!(
                "tau = {} exceeds t_final = {}",
                self.tau, self.t_final
            )));
        }
        if (n * self.tau - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::Param(format!(
                "t_final/tau = {ratio} is not an integer step count"
            )));
        }
        Ok(n as usize)
    }
}
