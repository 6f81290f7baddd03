//! Covariate-driven locality weights `W = (w_ij)`.
//!
//! Rows are always visited in ascending `j` with zero entries skipped, so a
//! block (group) matrix, a lazily evaluated kernel matrix and the equivalent
//! dense matrix produce bit-identical weighted sums.

use rayon::prelude::*;

use crate::error::{ClawError, Result};
use crate::normal;

/// Matrices above this size keep kernel weights implicit and evaluate rows on demand.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    /// Sum of absolute coordinate differences (`|x - y|` in one dimension).
    Abs,
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Dense(Vec<f64>),
    Block {
        codes: Vec<usize>,
        members: Vec<Vec<usize>>,
    },
    Kernel {
        dim: usize,
        coords: Vec<f64>,
        scale: f64,
        norm: Norm,
        truncate_below: f64,
    },
}

/// Nonnegative `m x m` weight matrix with positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    m: usize,
    repr: Repr,
}

fn distance(a: &[f64], b: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::Abs => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        Norm::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
    }
}

impl WeightMatrix {
    /// Wraps a caller-supplied row-major matrix.
    pub fn from_dense(m: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(ClawError::EmptyInput);
        }
        if entries.len() != m * m {
            return Err(ClawError::LengthMismatch {
                expected: m * m,
                actual: entries.len(),
            });
        }
        if let Some(k) = entries.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ClawError::InvalidWeights(format!(
                "entry ({}, {}) = {} is not a finite nonnegative number",
                k / m,
                k % m,
                entries[k]
            )));
        }
        if let Some(i) = (0..m).find(|&i| entries[i * m + i] <= 0.0) {
            return Err(ClawError::InvalidWeights(format!(
                "diagonal entry {i} must be positive"
            )));
        }
        Ok(Self {
            m,
            repr: Repr::Dense(entries),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Dense(e) => e[i * self.m + j],
            Repr::Block { codes, .. } => {
                if codes[i] == codes[j] {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::Kernel {
                dim,
                coords,
                scale,
                norm,
                truncate_below,
            } => {
                let row = |k: usize| &coords[k * dim..(k + 1) * dim];
                let w = normal::pdf(distance(row(i), row(j), *norm) * (1.0 / scale));
                if w >= *truncate_below {
                    w
                } else {
                    0.0
                }
            }
        }
    }

    /// Calls `f(j, w_ij)` for every nonzero entry of row `i`, ascending in `j`.
    #[inline]
    pub fn visit_row<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        match &self.repr {
            Repr::Dense(e) => {
                for (j, &w) in e[i * self.m..(i + 1) * self.m].iter().enumerate() {
                    if w != 0.0 {
                        f(j, w);
                    }
                }
            }
            Repr::Block { codes, members } => {
                for &j in &members[codes[i]] {
                    f(j, 1.0);
                }
            }
            Repr::Kernel {
                dim,
                coords,
                scale,
                norm,
                truncate_below,
            } => {
                let (mut d, mut row) = (Vec::new(), vec![0.0; self.m]);
                kernel_row(coords, *dim, i, 1.0 / scale, *norm, &mut d, &mut row);
                for (j, &w) in row.iter().enumerate() {
                    if w != 0.0 && w >= *truncate_below {
                        f(j, w);
                    }
                }
            }
        }
    }

    /// Group codes and member lists when the matrix is a block indicator.
    pub fn blocks(&self) -> Option<(&[usize], &[Vec<usize>])> {
        match &self.repr {
            Repr::Block { codes, members } => Some((codes, members)),
            _ => None,
        }
    }

    /// Row `i` with zeros included, borrowed when the matrix is stored densely.
    pub fn dense_row(&self, i: usize) -> Option<&[f64]> {
        match &self.repr {
            Repr::Dense(e) => Some(&e[i * self.m..(i + 1) * self.m]),
            _ => None,
        }
    }

    /// Writes row `i` with zeros included into `out`.
    pub fn row_into(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.m, 0.0);
        self.visit_row(i, |j, w| out[j] = w);
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let mut s = 0.0;
        self.visit_row(i, |_, w| s += w);
        s
    }

    pub fn to_dense(&self) -> Vec<f64> {
        if let Repr::Dense(e) = &self.repr {
            return e.clone();
        }
        let mut out = vec![0.0; self.m * self.m];
        for i in 0..self.m {
            self.visit_row(i, |j, w| out[i * self.m + j] = w);
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.to_dense();
        (0..self.m).all(|i| (0..i).all(|j| d[i * self.m + j] == d[j * self.m + i]))
    }

    /// Drops kernel weights below `threshold` to zero.
    pub fn with_truncation(mut self, threshold: f64) -> Self {
        match &mut self.repr {
            Repr::Dense(e) => {
                let m = self.m;
                for (k, w) in e.iter_mut().enumerate() {
                    if *w < threshold && k / m != k % m {
                        *w = 0.0;
                    }
                }
            }
            Repr::Kernel { truncate_below, .. } => *truncate_below = threshold,
            Repr::Block { .. } => {}
        }
        self
    }
}

/// Indicator weights `w_ij = 1{S_i = S_j}`.
pub fn group_weights<T: PartialEq>(labels: &[T]) -> Result<WeightMatrix> {
    if labels.is_empty() {
        return Err(ClawError::EmptyInput);
    }
    let mut reps: Vec<usize> = Vec::new();
    let mut codes = Vec::with_capacity(labels.len());
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let code = match reps.iter().position(|&r| labels[r] == *l) {
            Some(c) => c,
            None => {
                reps.push(i);
                members.push(Vec::new());
                reps.len() - 1
            }
        };
        codes.push(code);
        members[code].push(i);
    }
    Ok(WeightMatrix {
        m: labels.len(),
        repr: Repr::Block { codes, members },
    })
}

/// Gaussian locality weights `w_ij = phi(d(S_i, S_j) / scale)` over row-major
/// `coords` of dimension `dim`.
pub fn kernel_weights(coords: &[f64], dim: usize, scale: f64, norm: Norm) -> Result<WeightMatrix> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ClawError::NonPositiveScale(scale));
    }
    if dim == 0 || !coords.len().is_multiple_of(dim) {
        return Err(ClawError::DimensionMismatch(format!(
            "{} coordinates do not split into rows of {dim}",
            coords.len()
        )));
    }
    let m = coords.len() / dim;
    if m == 0 {
        return Err(ClawError::EmptyInput);
    }
    let lazy = WeightMatrix {
        m,
        repr: Repr::Kernel {
            dim,
            coords: coords.to_vec(),
            scale,
            norm,
            truncate_below: 0.0,
        },
    };
    if m > DENSE_LIMIT {
        return Ok(lazy);
    }
    // Distances are symmetric bit for bit, so full rows give w_ij == w_ji exactly.
    let mut e = vec![0.0; m * m];
    e.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let mut d = Vec::new();
        kernel_row(coords, dim, i, 1.0 / scale, norm, &mut d, row);
    });
    Ok(WeightMatrix {
        m,
        repr: Repr::Dense(e),
    })
}

/// `phi(d(S_i, S_j) * inv_scale)` for every `j`, using `dist` as scratch.
fn kernel_row(
    coords: &[f64],
    dim: usize,
    i: usize,
    inv_scale: f64,
    norm: Norm,
    dist: &mut Vec<f64>,
    out: &mut [f64],
) {
    if dim == 1 {
        // |x - y| and x - y have the same square.
        normal::pdf_scaled_into(out, coords, coords[i], inv_scale);
        return;
    }
    let si = &coords[i * dim..(i + 1) * dim];
    dist.clear();
    dist.extend(coords.chunks_exact(dim).map(|sj| distance(si, sj, norm)));
    normal::pdf_scaled_into(out, dist, 0.0, inv_scale);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phi(x: f64) -> f64 {
        (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn group_indicator_rows() {
        let w = group_weights(&["a", "a", "b"]).unwrap();
        assert_eq!(w.to_dense(), vec![1., 1., 0., 1., 1., 0., 0., 0., 1.]);
        assert!(w.is_symmetric());
    }

    #[test]
    fn single_group_is_all_ones_and_distinct_is_identity() {
        let w = group_weights(&[7, 7, 7, 7]).unwrap();
        assert!(w.to_dense().iter().all(|&x| x == 1.0));
        let w = group_weights(&[1, 2, 3]).unwrap();
        assert_eq!(w.to_dense(), vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        assert!(matches!(
            group_weights::<u8>(&[]),
            Err(ClawError::EmptyInput)
        ));
    }

    #[test]
    fn kernel_reference_values() {
        let w = kernel_weights(&[0.0, 150.0], 1, 150.0, Norm::Abs).unwrap();
        assert!((w.get(0, 0) - 0.398_942_280_4).abs() < 1e-10);
        assert!((w.get(0, 1) - 0.241_970_724_5).abs() < 1e-10);
        let w = kernel_weights(&[0.0, 10.0], 1, 1.0, Norm::Euclidean).unwrap();
        let far = w.get(0, 1);
        assert!(far > 0.0);
        assert!((far - phi(10.0)).abs() <= 1e-12 * phi(10.0));
        assert!((far - 7.69e-23).abs() < 0.01e-23);
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(
            kernel_weights(&[0.0, 1.0], 1, 0.0, Norm::Abs),
            Err(ClawError::NonPositiveScale(_))
        ));
        assert!(kernel_weights(&[0.0, 1.0, 2.0], 2, 1.0, Norm::Euclidean).is_err());
    }

    #[test]
    fn lazy_kernel_matches_dense() {
        let coords: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 5.0).collect();
        let dense = kernel_weights(&coords, 2, 1.5, Norm::Euclidean).unwrap();
        let lazy = WeightMatrix {
            m: 20,
            repr: Repr::Kernel {
                dim: 2,
                coords: coords.clone(),
                scale: 1.5,
                norm: Norm::Euclidean,
                truncate_below: 0.0,
            },
        };
        assert_eq!(dense.to_dense(), lazy.to_dense());
        for i in 0..20 {
            assert_eq!(dense.row_sum(i), lazy.row_sum(i));
        }
    }

    #[test]
    fn from_dense_validates() {
        assert!(WeightMatrix::from_dense(2, vec![1.0, 0.5, 0.5, 1.0]).is_ok());
        assert!(WeightMatrix::from_dense(2, vec![1.0, -0.5, 0.5, 1.0]).is_err());
        assert!(WeightMatrix::from_dense(2, vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(WeightMatrix::from_dense(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn truncation_keeps_diagonal() {
        let w = kernel_weights(&[0.0, 100.0], 1, 1.0, Norm::Abs)
            .unwrap()
            .with_truncation(1e-10);
        assert_eq!(w.get(0, 1), 0.0);
        assert!(w.get(1, 1) > 0.0);
    }

    proptest! {
        #[test]
        fn kernel_weights_symmetric_and_monotone(
            xs in proptest::collection::vec(-500.0f64..500.0, 2..30),
            scale in 0.5f64..200.0,
        ) {
            let w = kernel_weights(&xs, 1, scale, Norm::Abs).unwrap();
            prop_assert!(w.is_symmetric());
            let m = xs.len();
            for i in 0..m {
                prop_assert!(w.get(i, i) > 0.0);
                prop_assert!(w.row_sum(i) > 0.0);
                for j in 0..m {
                    for k in 0..m {
                        if (xs[i] - xs[j]).abs() < (xs[i] - xs[k]).abs() {
                            prop_assert!(w.get(i, j) >= w.get(i, k));
                        }
                    }
                }
            }
        }

        #[test]
        fn group_weights_are_indicators(labels in proptest::collection::vec(0u8..4, 1..25)) {
            let w = group_weights(&labels).unwrap();
            prop_assert!(w.to_dense().iter().all(|&x| x == 0.0 || x == 1.0));
            prop_assert!(w.is_symmetric());
        }
    }
}
