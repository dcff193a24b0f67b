//! Tridiagonal line solves for the implicit diffusion halves.

use rayon::prelude::*;

/// LU factors of `I - κ·L`, where `L` is the three-point Laplacian (unit
/// spacing) with mirrored-ghost Neumann closure at both ends:
///
/// ```text
/// [1+2κ  -2κ              ]
/// [ -κ  1+2κ  -κ          ]
/// [        ...            ]
/// [             -2κ  1+2κ ]
/// ```
///
/// The matrix is strictly diagonally dominant with non-positive
/// off-diagonals, so its inverse is entrywise non-negative and the solve is
/// monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannFactor {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl NeumannFactor {
    pub fn new(n: usize, kappa: f64) -> Self {
        assert!(n >= 2, "line too short");
        assert!(
            kappa >= 0.0 && kappa.is_finite(),
            "bad diffusion number {kappa}"
        );
        let diag = 1.0 + 2.0 * kappa;
        let mut lower = vec![-kappa; n];
        let mut upper = vec![-kappa; n];
        lower[0] = 0.0;
        upper[0] = -2.0 * kappa;
        lower[n - 1] = -2.0 * kappa;
        upper[n - 1] = 0.0;

        let mut upper_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for k in 0..n {
            let pivot = diag - lower[k] * prev;
            assert!(pivot > 0.0, "singular line system");
            inv_pivot[k] = 1.0 / pivot;
            prev = upper[k] * inv_pivot[k];
            upper_mod[k] = prev;
        }
        Self {
            lower,
            upper_mod,
            inv_pivot,
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Solves one contiguous line in place.
    pub fn solve(&self, line: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(line.len(), n);
        line[0] *= self.inv_pivot[0];
        for k in 1..n {
            line[k] = (line[k] - self.lower[k] * line[k - 1]) * self.inv_pivot[k];
        }
        for k in (0..n - 1).rev() {
            line[k] -= self.upper_mod[k] * line[k + 1];
        }
    }

    /// Solves every column of a row-major `len() × width` block at once.
    ///
    /// Rows are swept whole so the inner loops run over contiguous memory.
    pub fn solve_columns(&self, block: &mut [f64], width: usize) {
        let n = self.len();
        debug_assert_eq!(block.len(), n * width);
        for v in &mut block[..width] {
            *v *= self.inv_pivot[0];
        }
        for k in 1..n {
            let (done, rest) = block.split_at_mut(k * width);
            let prev = &done[(k - 1) * width..];
            let (l, p) = (self.lower[k], self.inv_pivot[k]);
            for (v, q) in rest[..width].iter_mut().zip(prev) {
                *v = (*v - l * q) * p;
            }
        }
        for k in (0..n - 1).rev() {
            let (head, tail) = block.split_at_mut((k + 1) * width);
            let next = &tail[..width];
            let u = self.upper_mod[k];
            for (v, q) in head[k * width..].iter_mut().zip(next) {
                *v -= u * q;
            }
        }
    }
}

/// Column strip width for [`solve_columns_parallel`].
const STRIP: usize = 256;

/// Solves every column of a row-major `factor.len() × width` array.
///
/// Columns are cut into fixed strips which are copied out, solved
/// independently and copied back, so the result does not depend on the
/// number of workers.
pub fn solve_columns_parallel(factor: &NeumannFactor, values: &mut [f64], width: usize) {
    let n = factor.len();
    if width <= STRIP {
        factor.solve_columns(values, width);
        return;
    }
    let strips: Vec<(usize, Vec<f64>)> = (0..width)
        .step_by(STRIP)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let w = STRIP.min(width - start);
            let mut block = Vec::with_capacity(n * w);
            for k in 0..n {
                block.extend_from_slice(&values[k * width + start..k * width + start + w]);
            }
            factor.solve_columns(&mut block, w);
            (start, block)
        })
        .collect();
    for (start, block) in strips {
        let w = block.len() / n;
        for k in 0..n {
            values[k * width + start..k * width + start + w]
                .copy_from_slice(&block[k * w..(k + 1) * w]);
        }
    }
}
