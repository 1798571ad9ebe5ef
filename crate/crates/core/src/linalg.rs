//! Fixed-size complex matrices for per-mode symbols (2x2 for the
//! two-component form, 4x4 for the four-component form).

use crate::numeric::{c64, C_ZERO};
use num_complex::Complex64;

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

/// A per-mode multiplier in Fourier space. The variant must match the number
/// of spinor components of the field it is applied to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeMatrix {
    Two(Mat2),
    Four(Mat4),
}

impl ModeMatrix {
    pub fn identity(n: usize) -> Self {
        match n {
            2 => {
                let mut m = [[C_ZERO; 2]; 2];
                m[0][0] = c64(1.0, 0.0);
                m[1][1] = c64(1.0, 0.0);
                ModeMatrix::Two(m)
            }
            4 => {
                let mut m = [[C_ZERO; 4]; 4];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = c64(1.0, 0.0);
                }
                ModeMatrix::Four(m)
            }
            _ => panic!("mode matrices are 2x2 or 4x4, got {n}"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModeMatrix::Two(_) => 2,
            ModeMatrix::Four(_) => 4,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        match self {
            ModeMatrix::Two(m) => m[r][c],
            ModeMatrix::Four(m) => m[r][c],
        }
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        match self {
            ModeMatrix::Two(m) => m[r][c] = v,
            ModeMatrix::Four(m) => m[r][c] = v,
        }
    }

    /// y = A x, where x and y are component slices of length dim().
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        match self {
            ModeMatrix::Two(m) => {
                let (x0, x1) = (x[0], x[1]);
                y[0] = m[0][0] * x0 + m[0][1] * x1;
                y[1] = m[1][0] * x0 + m[1][1] * x1;
            }
            ModeMatrix::Four(m) => {
                let (x0, x1, x2, x3) = (x[0], x[1], x[2], x[3]);
                for r in 0..4 {
                    y[r] = m[r][0] * x0 + m[r][1] * x1 + m[r][2] * x2 + m[r][3] * x3;
                }
            }
        }
    }

    /// In-place x = A x.
    pub fn mul_vec_inplace(&self, x: &mut [Complex64]) {
        match self {
            ModeMatrix::Two(m) => {
                let (x0, x1) = (x[0], x[1]);
                x[0] = m[0][0] * x0 + m[0][1] * x1;
                x[1] = m[1][0] * x0 + m[1][1] * x1;
            }
            ModeMatrix::Four(m) => {
                let (x0, x1, x2, x3) = (x[0], x[1], x[2], x[3]);
                for r in 0..4 {
                    x[r] = m[r][0] * x0 + m[r][1] * x1 + m[r][2] * x2 + m[r][3] * x3;
                }
            }
        }
    }

    pub fn matmul(&self, other: &ModeMatrix) -> ModeMatrix {
        let n = self.dim();
        assert_eq!(n, other.dim());
        let mut out = ModeMatrix::identity(n);
        for r in 0..n {
            for c in 0..n {
                let mut s = C_ZERO;
                for k in 0..n {
                    s += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, s);
            }
        }
        out
    }

    pub fn add(&self, other: &ModeMatrix) -> ModeMatrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ModeMatrix) -> ModeMatrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> ModeMatrix {
        let mut out = *self;
        let n = self.dim();
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(r, c) * s);
            }
        }
        out
    }

    pub fn adjoint(&self) -> ModeMatrix {
        let n = self.dim();
        let mut out = ModeMatrix::identity(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(c, r).conj());
            }
        }
        out
    }

    /// max |a_ij - b_ij| over all entries.
    pub fn max_abs_diff(&self, other: &ModeMatrix) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((self.get(r, c) - other.get(r, c)).norm());
            }
        }
        worst
    }

    fn zip_with(&self, other: &ModeMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> ModeMatrix {
        let n = self.dim();
        assert_eq!(n, other.dim());
        let mut out = ModeMatrix::identity(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, f(self.get(r, c), other.get(r, c)));
            }
        }
        out
    }
}
