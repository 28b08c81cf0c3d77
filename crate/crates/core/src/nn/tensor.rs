use std::fmt;

use serde::{Deserialize, Serialize};

use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Shape { h, w, c }
    }

    pub const fn flat(n: usize) -> Self {
        Shape { h: 1, w: 1, c: n }
    }

    pub fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_flat(&self) -> bool {
        self.h == 1 && self.w == 1
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_flat() {
            write!(f, "{}", self.c)
        } else {
            write!(f, "{} x {} x {}", self.h, self.w, self.c)
        }
    }
}

/// Height × width × channels, row-major with channels innermost.
/// Flat vectors are `1 × 1 × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<F> {
    shape: Shape,
    data: Vec<F>,
}

impl<F: Real> Tensor3<F> {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor3 {
            shape: Shape::new(h, w, c),
            data: vec![F::zero(); h * w * c],
        }
    }

    pub fn from_vec(h: usize, w: usize, c: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), h * w * c, "tensor data length does not match {h}x{w}x{c}");
        Tensor3 {
            shape: Shape::new(h, w, c),
            data,
        }
    }

    pub fn flat(data: Vec<F>) -> Self {
        let n = data.len();
        Tensor3::from_vec(1, 1, n, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape.w + j) * self.shape.c + k
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> F {
        self.data[self.index(i, j, k)]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn reshape(self, shape: Shape) -> Self {
        assert_eq!(shape.len(), self.data.len());
        Tensor3 { shape, data: self.data }
    }

    pub fn cast<G: Real>(&self) -> Tensor3<G> {
        Tensor3 {
            shape: self.shape,
            data: self.data.iter().map(|v| G::of(v.f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
