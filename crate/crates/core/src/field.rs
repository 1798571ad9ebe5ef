//! Multi-component complex fields on periodic grids, with forward/inverse
//! Fourier transforms and per-mode matrix multipliers.
//!
//! Storage is node-major with the spinor component index fastest, both in
//! physical and in frequency space. The forward transform is unnormalized;
//! the inverse divides by the total mode count.

use crate::grid::PeriodicGrid;
use crate::linalg::ModeMatrix;
use crate::numeric::C_ZERO;
use crate::{Error, Result};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Physical,
    Frequency,
}

/// Transform plans are cached globally; they are immutable once created and
/// shared across threads.
static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = PLANNER.lock().unwrap();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: PeriodicGrid,
    components: usize,
    space: Space,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: PeriodicGrid, components: usize, space: Space) -> Self {
        let len = grid.node_count() * components;
        SpectralField { grid, components, space, data: vec![C_ZERO; len] }
    }

    /// Build a physical-space field by sampling `f(x, component)` at the nodes.
    pub fn from_fn(
        grid: PeriodicGrid,
        components: usize,
        f: impl Fn([f64; 2], usize) -> Complex64,
    ) -> Self {
        let mut field = SpectralField::zeros(grid, components, Space::Physical);
        let n = field.grid.node_count();
        for node in 0..n {
            let x = field.grid.node_coords(node);
            for c in 0..components {
                field.data[node * components + c] = f(x, c);
            }
        }
        field
    }

    /// Wrap an existing node-major, component-fastest value block.
    pub fn from_parts(
        grid: PeriodicGrid,
        components: usize,
        space: Space,
        data: Vec<Complex64>,
    ) -> crate::Result<Self> {
        let expected = grid.node_count() * components;
        if data.len() != expected {
            return Err(crate::Error::Mismatch(format!(
                "field data has {} values, grid x components needs {expected}",
                data.len()
            )));
        }
        Ok(SpectralField { grid, components, space, data })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Sum of |v|^2 over all nodes and components (no mesh weight).
    pub fn norm_sqr_sum(&self) -> f64 {
        crate::numeric::norm_sqr_sum(&self.data)
    }

    pub fn to_frequency(&mut self) {
        if self.space == Space::Frequency {
            return;
        }
        self.transform(false);
        self.space = Space::Frequency;
    }

    pub fn to_physical(&mut self) {
        if self.space == Space::Physical {
            return;
        }
        self.transform(true);
        self.space = Space::Physical;
    }

    /// Copy of self in the requested space.
    pub fn in_space(&self, space: Space) -> SpectralField {
        let mut out = self.clone();
        match space {
            Space::Physical => out.to_physical(),
            Space::Frequency => out.to_frequency(),
        }
        out
    }

    fn transform(&mut self, inverse: bool) {
        match self.grid.dim() {
            1 => self.transform_1d(inverse),
            2 => self.transform_2d(inverse),
            _ => unreachable!("grids are 1D or 2D"),
        }
        if inverse {
            let scale = 1.0 / self.grid.node_count() as f64;
            for z in &mut self.data {
                *z *= scale;
            }
        }
    }

    fn transform_1d(&mut self, inverse: bool) {
        let m = self.grid.axis(0).points;
        let c = self.components;
        let fft = plan(m, inverse);
        let mut line = vec![C_ZERO; m];
        let mut scratch = vec![C_ZERO; fft.get_inplace_scratch_len()];
        for comp in 0..c {
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = self.data[j * c + comp];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (j, &v) in line.iter().enumerate() {
                self.data[j * c + comp] = v;
            }
        }
    }

    fn transform_2d(&mut self, inverse: bool) {
        let m0 = self.grid.axis(0).points;
        let m1 = self.grid.axis(1).points;
        let c = self.components;
        let fft0 = plan(m0, inverse);
        let fft1 = plan(m1, inverse);
        let mut plane = vec![C_ZERO; m0 * m1];
        let mut col = vec![C_ZERO; m0];
        let scratch_len = fft0.get_inplace_scratch_len().max(fft1.get_inplace_scratch_len());
        let mut scratch = vec![C_ZERO; scratch_len];
        for comp in 0..c {
            for (node, slot) in plane.iter_mut().enumerate() {
                *slot = self.data[node * c + comp];
            }
            for row in plane.chunks_exact_mut(m1) {
                fft1.process_with_scratch(row, &mut scratch);
            }
            for j in 0..m1 {
                for i in 0..m0 {
                    col[i] = plane[i * m1 + j];
                }
                fft0.process_with_scratch(&mut col, &mut scratch);
                for i in 0..m0 {
                    plane[i * m1 + j] = col[i];
                }
            }
            for (node, &v) in plane.iter().enumerate() {
                self.data[node * c + comp] = v;
            }
        }
    }
}

/// Check that two fields live on the same grid with the same component count.
pub fn check_compatible(a: &SpectralField, b: &SpectralField) -> Result<()> {
    if a.grid() != b.grid() || a.components() != b.components() {
        return Err(Error::Mismatch(
            "fields differ in grid or component count".into(),
        ));
    }
    Ok(())
}

/// Evaluate `symbol` at every mode of the grid, in flat mode order.
pub fn mode_matrices(
    grid: &PeriodicGrid,
    symbol: impl Fn([f64; 2]) -> ModeMatrix,
) -> Vec<ModeMatrix> {
    (0..grid.node_count())
        .map(|flat| symbol(grid.mode_wavenumbers(flat)))
        .collect()
}

/// Apply the per-mode table to frequency-space data in place.
pub fn apply_mode_table(data: &mut [Complex64], components: usize, table: &[ModeMatrix]) {
    for (chunk, mat) in data.chunks_exact_mut(components).zip(table) {
        mat.mul_vec_inplace(chunk);
    }
}

/// Multiply the field by `symbol(xi)` mode by mode. The result is returned in
/// the space the input came in; the transform round trip happens internally
/// for physical-space input.
pub fn apply_mode_symbol(
    field: &SpectralField,
    symbol: impl Fn([f64; 2]) -> ModeMatrix,
) -> Result<SpectralField> {
    let table = mode_matrices(field.grid(), symbol);
    if let Some(m) = table.first() {
        if m.dim() != field.components() {
            return Err(Error::Mismatch(format!(
                "symbol dimension {} vs {} field components",
                m.dim(),
                field.components()
            )));
        }
    }
    let original = field.space();
    let mut out = field.in_space(Space::Frequency);
    let c = out.components;
    apply_mode_table(&mut out.data, c, &table);
    if original == Space::Physical {
        out.to_physical();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::c64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Direct O(M^2) DFT of one component, the oracle the FFT path is
    /// checked against.
    fn dft_1d(values: &[Complex64]) -> Vec<Complex64> {
        let m = values.len();
        (0..m)
            .map(|l| {
                let mut s = C_ZERO;
                for (j, &v) in values.iter().enumerate() {
                    let ang = -2.0 * PI * (l * j) as f64 / m as f64;
                    s += v * c64(ang.cos(), ang.sin());
                }
                s
            })
            .collect()
    }

    #[test]
    fn plane_wave_hits_single_bin() {
        // e^{i mu_3 x} on 16 points lands entirely in bin 3 with weight M.
        let grid = PeriodicGrid::line(-4.0, 4.0, 16).unwrap();
        let mu = grid.axis(0).wavenumber(3);
        let mut f = SpectralField::from_fn(grid, 1, |x, _| c64(0.0, mu * x[0]).exp());
        f.to_frequency();
        for l in 0..16 {
            let want = if l == 3 {
                // forward transform carries e^{-i mu a} from the offset origin
                let a = f.grid().axis(0).lo;
                c64(0.0, -mu * a).exp() * 16.0
            } else {
                C_ZERO
            };
            assert!(
                (f.data()[l] - want).norm() < 1e-10,
                "bin {l}: {} vs {want}",
                f.data()[l]
            );
        }
    }

    #[test]
    fn forward_matches_direct_dft() {
        let grid = PeriodicGrid::line(0.0, 2.0, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut f = SpectralField::zeros(grid, 2, Space::Physical);
        for z in f.data_mut() {
            *z = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let comp0: Vec<Complex64> = f.data().iter().step_by(2).copied().collect();
        let comp1: Vec<Complex64> = f.data().iter().skip(1).step_by(2).copied().collect();
        let want0 = dft_1d(&comp0);
        let want1 = dft_1d(&comp1);
        f.to_frequency();
        for l in 0..32 {
            assert!((f.data()[2 * l] - want0[l]).norm() < 1e-10);
            assert!((f.data()[2 * l + 1] - want1[l]).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_identity() {
        for (dim, comps) in [(1usize, 2usize), (2, 4)] {
            let grid = if dim == 1 {
                PeriodicGrid::line(-3.0, 5.0, 24).unwrap()
            } else {
                PeriodicGrid::square(-2.0, 2.0, 12).unwrap()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut f = SpectralField::zeros(grid, comps, Space::Physical);
            for z in f.data_mut() {
                *z = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let orig = f.clone();
            f.to_frequency();
            f.to_physical();
            let worst = f
                .data()
                .iter()
                .zip(orig.data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-12, "dim {dim}: round trip error {worst}");
        }
    }

    #[test]
    fn parseval_scaling() {
        // Unnormalized forward: sum |v_hat|^2 = N sum |v|^2.
        let grid = PeriodicGrid::square(-1.0, 3.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = SpectralField::zeros(grid, 4, Space::Physical);
        for z in f.data_mut() {
            *z = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let phys = f.norm_sqr_sum();
        f.to_frequency();
        let freq = f.norm_sqr_sum();
        let n = f.grid().node_count() as f64;
        assert!((freq - n * phys).abs() / (n * phys) < 1e-12);
    }

    #[test]
    fn mode_symbol_respects_input_space() {
        let grid = PeriodicGrid::line(-1.0, 1.0, 8).unwrap();
        let f = SpectralField::from_fn(grid, 2, |x, c| c64(x[0] + c as f64, -x[0]));
        let sym = |_xi: [f64; 2]| ModeMatrix::identity(2).scale(c64(2.0, 0.0));
        let out = apply_mode_symbol(&f, sym).unwrap();
        assert_eq!(out.space(), Space::Physical);
        for (a, b) in out.data().iter().zip(f.data()) {
            assert!((a - b * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn symbol_dimension_mismatch_rejected() {
        let grid = PeriodicGrid::line(-1.0, 1.0, 8).unwrap();
        let f = SpectralField::zeros(grid, 2, Space::Physical);
        let bad = apply_mode_symbol(&f, |_| ModeMatrix::identity(4));
        assert!(bad.is_err());
    }
}
