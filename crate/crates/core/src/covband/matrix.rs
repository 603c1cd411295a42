use nalgebra::DMatrix;

use super::CovError;

/// Dense symmetric matrix. Construction checks symmetry to 1e-12 relative
/// and then mirrors the upper triangle so the stored matrix is exactly
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, CovError> {
        if m.nrows() != m.ncols() {
            return Err(CovError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(CovError::Empty);
        }
        let p = m.nrows();
        let scale = m.amax();
        let mut m = m;
        for j in 0..p {
            for i in 0..p {
                if !m[(i, j)].is_finite() {
                    return Err(CovError::NonFinite { i, j });
                }
            }
        }
        for j in 0..p {
            for i in j + 1..p {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(CovError::Asymmetric { i, j });
                }
                m[(i, j)] = m[(j, i)];
            }
        }
        Ok(Self { m })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, CovError> {
        let p = rows.len();
        if p == 0 {
            return Err(CovError::Empty);
        }
        if let Some(r) = rows.iter().find(|r| r.as_ref().len() != p) {
            return Err(CovError::NotSquare { rows: p, cols: r.as_ref().len() });
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i].as_ref()[j]))
    }

    /// Symmetric Toeplitz matrix with first column `col`.
    pub fn toeplitz(col: &[f64]) -> Result<Self, CovError> {
        let p = col.len();
        if p == 0 {
            return Err(CovError::Empty);
        }
        Ok(Self { m: DMatrix::from_fn(p, p, |i, j| col[i.abs_diff(j)]) })
    }

    pub fn identity(p: usize) -> Self {
        Self { m: DMatrix::identity(p, p) }
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.m.norm()
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> Result<f64, CovError> {
        if self.order() != other.order() {
            return Err(CovError::OrderMismatch(self.order(), other.order()));
        }
        Ok((&self.m - &other.m).norm())
    }

    pub fn add_to_diagonal(&mut self, shift: f64) {
        for i in 0..self.order() {
            self.m[(i, i)] += shift;
        }
    }
}

/// Subdiagonals `s_1, …, s_{p−1}` of a `p × p` matrix, each holding both
/// mirrored entries, so `|s_m| = 2(p − m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubdiagonalView {
    p: usize,
}

impl SubdiagonalView {
    pub fn new(p: usize) -> Self {
        Self { p }
    }

    /// Number of subdiagonals, the depth of the path.
    pub fn depth(&self) -> usize {
        self.p.saturating_sub(1)
    }

    /// `sizes[m − 1] = |s_m|`.
    pub fn sizes(&self) -> Vec<usize> {
        (1..self.p).map(|m| 2 * (self.p - m)).collect()
    }

    /// `√|s_{1:m}|` for `m = 1..p−1`, the weights of the ancestor groups.
    pub fn cumulative_weights(&self) -> Vec<f64> {
        let mut acc = 0usize;
        self.sizes()
            .into_iter()
            .map(|s| {
                acc += s;
                (acc as f64).sqrt()
            })
            .collect()
    }

    /// `√|s_m|`, the weight of the descendant group rooted at `m`.
    pub fn node_weights(&self) -> Vec<f64> {
        self.sizes().into_iter().map(|s| (s as f64).sqrt()).collect()
    }

    /// `z[m − 1] = ‖S_{s_m}‖²_F`, counting both triangles.
    pub fn norms_sq(&self, s: &SymMatrix) -> Vec<f64> {
        (1..self.p)
            .map(|m| 2.0 * (0..self.p - m).map(|i| s.get(i + m, i).powi(2)).sum::<f64>())
            .collect()
    }

    /// `⟨A_{s_m}, B_{s_m}⟩` for every subdiagonal.
    pub fn inner(&self, a: &SymMatrix, b: &SymMatrix) -> Vec<f64> {
        (1..self.p)
            .map(|m| 2.0 * (0..self.p - m).map(|i| a.get(i + m, i) * b.get(i + m, i)).sum::<f64>())
            .collect()
    }

    /// Off-diagonal entries in node order: for each `m`, the pairs
    /// `(i + m, i)`, `(i, i + m)` for `i = 0..p−m`.
    pub fn gather(&self, s: &SymMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.p * self.p.saturating_sub(1));
        for m in 1..self.p {
            for i in 0..self.p - m {
                out.push(s.get(i + m, i));
                out.push(s.get(i, i + m));
            }
        }
        out
    }

    /// Inverse of [`gather`](Self::gather) with the given diagonal. Mirrored
    /// entries must agree.
    pub fn scatter(&self, diagonal: &[f64], values: &[f64]) -> Result<SymMatrix, CovError> {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diagonal));
        let mut k = 0;
        for lag in 1..self.p {
            for i in 0..self.p - lag {
                m[(i + lag, i)] = values[k];
                m[(i, i + lag)] = values[k + 1];
                k += 2;
            }
        }
        SymMatrix::new(m)
    }

    /// Keeps the diagonal and multiplies subdiagonal `m` by `scales[m − 1]`.
    pub fn apply_scales(&self, s: &SymMatrix, scales: &[f64]) -> SymMatrix {
        let mut m = s.as_matrix().clone();
        for j in 0..self.p {
            for i in j + 1..self.p {
                let c = scales[i - j - 1];
                let v = if c == 0.0 { 0.0 } else { c * m[(i, j)] };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix { m }
    }
}

/// `S = (1/n) Σ_i (x_i − x̄)(x_i − x̄)ᵀ` over the rows of `data`.
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<SymMatrix, CovError> {
    let n = data.nrows();
    if n < 2 {
        return Err(CovError::TooFewSamples(n));
    }
    let p = data.ncols();
    let mut centered = data.clone();
    for j in 0..p {
        let mean = data.column(j).sum() / n as f64;
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let mut s = DMatrix::zeros(p, p);
    for j in 0..p {
        for i in j..p {
            let v = centered.column(i).dot(&centered.column(j)) / n as f64;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SymMatrix::new(s)
}
