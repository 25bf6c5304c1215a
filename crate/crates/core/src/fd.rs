//! Centered finite-difference stencils on interior grid nodes with
//! zero-Dirichlet closure (values beyond the grid are zero).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Formal accuracy of a centered stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilOrder {
    Second,
    Fourth,
    #[default]
    Sixth,
}

impl StencilOrder {
    /// Coefficients `c_m` of `f'(x) ~ sum_m c_m (f(x+mh) - f(x-mh)) / h`, `m = 1..`.
    pub fn first_derivative(self) -> &'static [f64] {
        match self {
            StencilOrder::Second => &[0.5],
            StencilOrder::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
            StencilOrder::Sixth => &[0.75, -0.15, 1.0 / 60.0],
        }
    }

    /// Coefficients `[c_0, c_1, ..]` of
    /// `f''(x) ~ (c_0 f(x) + sum_m c_m (f(x+mh) + f(x-mh))) / h^2`.
    pub fn second_derivative(self) -> &'static [f64] {
        match self {
            StencilOrder::Second => &[-2.0, 1.0],
            StencilOrder::Fourth => &[-2.5, 4.0 / 3.0, -1.0 / 12.0],
            StencilOrder::Sixth => &[-49.0 / 18.0, 1.5, -0.15, 1.0 / 90.0],
        }
    }

    /// Half-width of the stencil in nodes.
    pub fn reach(self) -> usize {
        self.first_derivative().len()
    }
}

/// Antisymmetric first-derivative matrix on `n` interior nodes.
pub fn first_derivative_matrix(n: usize, h: f64, order: StencilOrder) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    for (m, &c) in order.first_derivative().iter().enumerate() {
        let m = m + 1;
        for i in 0..n {
            if i + m < n {
                d[(i, i + m)] = c / h;
            }
            if i >= m {
                d[(i, i - m)] = -c / h;
            }
        }
    }
    d
}

/// Symmetric second-derivative matrix on `n` interior nodes.
pub fn second_derivative_matrix(n: usize, h: f64, order: StencilOrder) -> DMatrix<f64> {
    let c = order.second_derivative();
    let h2 = h * h;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = c[0] / h2;
        for (m, &cm) in c.iter().enumerate().skip(1) {
            if i + m < n {
                d[(i, i + m)] = cm / h2;
            }
            if i >= m {
                d[(i, i - m)] = cm / h2;
            }
        }
    }
    d
}

/// Polynomial `sum_k coeffs[k] x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }
}
