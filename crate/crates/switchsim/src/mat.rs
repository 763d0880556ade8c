//! Dense square matrices in row-major order.
//!
//! Everything in this crate works on n x n arrays indexed by (input, output)
//! port pairs, so a single small container covers integer queue matrices,
//! 0/1 schedule matrices, and real-valued rate or projection matrices.

use std::ops::{Index, IndexMut};

/// A dense n x n matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Square<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy> Square<T> {
    /// Creates an n x n matrix with every entry set to `fill`.
    pub fn filled(n: usize, fill: T) -> Self {
        Square { n, data: vec![fill; n * n] }
    }

    /// Creates an n x n matrix from a function of (row, column).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Square { n, data }
    }

    /// Applies `f` entrywise, preserving shape.
    pub fn map<U: Copy>(&self, mut f: impl FnMut(T) -> U) -> Square<U> {
        Square { n: self.n, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

impl<T> Square<T> {
    /// Side length n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// All entries in row-major order.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Mutable view of all entries in row-major order.
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterates over ((row, column), entry) in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = ((usize, usize), &T)> {
        let n = self.n;
        self.data.iter().enumerate().map(move |(k, v)| ((k / n, k % n), v))
    }
}

impl<T> Index<(usize, usize)> for Square<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.n && j < self.n);
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Square<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.n && j < self.n);
        &mut self.data[i * self.n + j]
    }
}

impl<T: Copy, const N: usize> From<[[T; N]; N]> for Square<T> {
    fn from(rows: [[T; N]; N]) -> Self {
        Square::from_fn(N, |i, j| rows[i][j])
    }
}
