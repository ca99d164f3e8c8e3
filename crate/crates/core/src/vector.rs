//! Small dense vector helpers for points of R^(n+1).

use std::ops::{Add, Deref, Index, Mul, Neg, Sub};

/// A point or direction in R^(n+1).
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVector(Vec<f64>);

impl AmbientVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0.iter().map(|v| v * k).collect())
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let r = self.norm();
        (r > 0.0).then(|| self.scale(1.0 / r))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for AmbientVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for AmbientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for AmbientVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Add<&AmbientVector> for &AmbientVector {
    type Output = AmbientVector;
    fn add(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&AmbientVector> for &AmbientVector {
    type Output = AmbientVector;
    fn sub(self, rhs: &AmbientVector) -> AmbientVector {
        AmbientVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &AmbientVector {
    type Output = AmbientVector;
    fn mul(self, k: f64) -> AmbientVector {
        self.scale(k)
    }
}

impl Neg for &AmbientVector {
    type Output = AmbientVector;
    fn neg(self) -> AmbientVector {
        self.scale(-1.0)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `a + k * b`
#[inline]
pub fn axpy(a: &[f64], k: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = AmbientVector::new(vec![1.0, 2.0, 2.0]);
        let b = AmbientVector::new(vec![0.0, 1.0, -1.0]);
        assert_eq!(a.norm(), 3.0);
        assert_eq!(a.dot(&b), 0.0);
        assert_eq!((&a - &b).as_slice(), &[1.0, 1.0, 3.0]);
        assert_eq!((&a + &b).as_slice(), &[1.0, 3.0, 1.0]);
        assert_eq!(a.normalized().unwrap().norm(), 1.0);
        assert!(AmbientVector::zeros(3).normalized().is_none());
        assert_eq!(axpy(&a, 2.0, &b), vec![1.0, 4.0, 0.0]);
    }
}
