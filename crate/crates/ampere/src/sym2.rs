use serde::{Deserialize, Serialize};

use crate::geom::Point;

/// Symmetric 2x2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymmetricMatrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymmetricMatrix2 {
    pub const IDENTITY: Self = Self { a11: 1.0, a12: 0.0, a22: 1.0 };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn cofactor(&self) -> Self {
        Self::new(self.a22, -self.a12, self.a11)
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Self::new(self.a22 / d, -self.a12 / d, self.a11 / d))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.a11 + self.a22);
        let r = (0.5 * (self.a11 - self.a22)).hypot(self.a12);
        (m - r, m + r)
    }

    /// Eigen decomposition: ascending eigenvalues with unit eigenvectors.
    pub fn eigen(&self) -> ([f64; 2], [Point; 2]) {
        let (l0, l1) = self.eigenvalues();
        let c0 = [l1 - self.a22, self.a12];
        let c1 = [self.a12, l1 - self.a11];
        let (n0, n1) = (c0[0].hypot(c0[1]), c1[0].hypot(c1[1]));
        let v1 = if n0.max(n1) == 0.0 {
            [1.0, 0.0]
        } else if n0 >= n1 {
            [c0[0] / n0, c0[1] / n0]
        } else {
            [c1[0] / n1, c1[1] / n1]
        };
        let v0 = [-v1[1], v1[0]];
        ([l0, l1], [v0, v1])
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        let s = self.a11.abs().max(self.a22.abs()).max(self.a12.abs()).max(1.0);
        self.eigenvalues().0 >= -tol * s
    }

    pub fn is_pd(&self, tol: f64) -> bool {
        let s = self.a11.abs().max(self.a22.abs()).max(self.a12.abs()).max(1.0);
        self.eigenvalues().0 > tol * s
    }

    pub fn apply(&self, v: Point) -> Point {
        [self.a11 * v[0] + self.a12 * v[1], self.a12 * v[0] + self.a22 * v[1]]
    }

    pub fn quad(&self, v: Point) -> f64 {
        self.a11 * v[0] * v[0] + 2.0 * self.a12 * v[0] * v[1] + self.a22 * v[1] * v[1]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a22 * s)
    }

    pub fn plus(&self, o: &Self) -> Self {
        Self::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }

    /// `tr(self * other)`.
    pub fn trace_product(&self, o: &Self) -> f64 {
        self.a11 * o.a11 + 2.0 * self.a12 * o.a12 + self.a22 * o.a22
    }

    /// Symmetric square root of a PSD matrix.
    pub fn sqrt(&self) -> Self {
        let ([l0, l1], [v0, v1]) = self.eigen();
        let (s0, s1) = (l0.max(0.0).sqrt(), l1.max(0.0).sqrt());
        Self::new(
            s0 * v0[0] * v0[0] + s1 * v1[0] * v1[0],
            s0 * v0[0] * v0[1] + s1 * v1[0] * v1[1],
            s0 * v0[1] * v0[1] + s1 * v1[1] * v1[1],
        )
    }

    pub fn as_rows(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a12, self.a22]]
    }
}
