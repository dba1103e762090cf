//! Minimal dense row-major matrix used for the cell parameters.

use rand::distributions::Uniform;
use rand::Rng;

use crate::num::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Entries sampled i.i.d. uniform from `[-bound, bound)`.
    pub fn sample_uniform<R: Rng>(rows: usize, cols: usize, bound: T, rng: &mut R) -> Self {
        let dist = Uniform::new(-bound, bound);
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.sample(&dist)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `out += self * x` where `x` has `cols` entries and `out` has `rows`.
    pub fn matvec_add(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x) {
                acc = acc + *a * *b;
            }
            *o += acc;
        }
    }

    /// `out += selfᵀ * x` where `x` has `rows` entries and `out` has `cols`.
    pub fn matvec_t_add(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, xr) in x.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += *a * *xr;
            }
        }
    }

    /// `out += self[:, col]` (the column selected by a one-hot input).
    pub fn col_add_into(&self, col: usize, out: &mut [T]) {
        debug_assert!(col < self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.data[r * self.cols + col];
        }
    }

    /// `self[:, col] += v` (outer product against a one-hot vector).
    pub fn add_to_col(&mut self, col: usize, v: &[T]) {
        debug_assert!(col < self.cols);
        debug_assert_eq!(v.len(), self.rows);
        for (r, x) in v.iter().enumerate() {
            self.data[r * self.cols + col] += *x;
        }
    }

    /// `self += u vᵀ`.
    pub fn add_outer(&mut self, u: &[T], v: &[T]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, ur) in u.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (o, vc) in row.iter_mut().zip(v) {
                *o += *ur * *vc;
            }
        }
    }
}
