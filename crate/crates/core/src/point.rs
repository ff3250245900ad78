use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::Real;

/// A point or vector in up to three dimensions. Unused trailing coordinates are zero.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Point<T>(pub [T; 3]);

impl<T: Real> Point<T> {
    pub fn zero() -> Self {
        Point([T::zero(); 3])
    }

    /// Builds a point from up to three coordinates.
    pub fn from_slice(c: &[T]) -> Self {
        assert!(c.len() <= 3, "at most three coordinates are supported");
        let mut p = Self::zero();
        p.0[..c.len()].copy_from_slice(c);
        p
    }

    pub fn from_f64(c: &[f64]) -> Self {
        assert!(c.len() <= 3, "at most three coordinates are supported");
        let mut p = Self::zero();
        for (dst, &src) in p.0.iter_mut().zip(c) {
            *dst = T::lit(src);
        }
        p
    }

    /// Unit vector along axis `k`.
    pub fn axis(k: usize) -> Self {
        let mut p = Self::zero();
        p.0[k] = T::one();
        p
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Self) -> T {
        (*self - *other).norm()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(*self * n.recip())
        } else {
            None
        }
    }

    /// `self + t * dir`
    #[inline]
    pub fn along(&self, dir: &Self, t: T) -> Self {
        Point([
            self.0[0] + t * dir.0[0],
            self.0[1] + t * dir.0[1],
            self.0[2] + t * dir.0[2],
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn to_f64(&self, dim: usize) -> Vec<f64> {
        self.0[..dim].iter().map(|c| c.as_f64()).collect()
    }

    pub fn cast<U: Real>(&self) -> Point<U> {
        Point([
            U::lit(self.0[0].as_f64()),
            U::lit(self.0[1].as_f64()),
            U::lit(self.0[2].as_f64()),
        ])
    }
}

impl<T: Real> Add for Point<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Point([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> AddAssign for Point<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Point<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Point([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Point<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Point([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T: Real> Mul<T> for Point<T> {
    type Output = Self;
    fn mul(self, t: T) -> Self {
        Point([self.0[0] * t, self.0[1] * t, self.0[2] * t])
    }
}

impl<T> Index<usize> for Point<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Point<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Real> fmt::Display for Point<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}
