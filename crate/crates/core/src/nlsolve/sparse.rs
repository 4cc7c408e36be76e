//! Compressed sparse column storage with a fixed pattern and a direct
//! unsymmetric solver (faer's sparse LU with partial pivoting).
//!
//! Rows and columns are equilibrated before factorization: the saddle-point
//! systems here mix stiffness entries of order 1e5 with constraint entries
//! of order 1e-4.

use std::ops::Range;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::MatMut;

use crate::error::{DofBlock, Error, Result};

#[derive(Debug, Clone)]
pub struct SparsePattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic: SymbolicSparseColMat<usize>,
}

impl SparsePattern {
    /// Builds a square pattern from `(row, col)` entries. Every diagonal
    /// entry is stored, even if numerically zero.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut cols: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
        for (r, c) in entries {
            if r >= n || c >= n {
                return Err(Error::invalid(format!("entry ({r}, {c}) outside {n}x{n} pattern")));
            }
            cols[c].push(r);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for mut col in cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(&col);
            col_ptr.push(row_idx.len());
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr.clone(), None, row_idx.clone());
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            symbolic,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Index of entry `(row, col)` in the value array.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        self.row_idx[range.clone()]
            .binary_search(&row)
            .ok()
            .map(|k| range.start + k)
    }

    pub(crate) fn symbolic(&self) -> faer::sparse::SymbolicSparseColMatRef<'_, usize> {
        self.symbolic.as_ref()
    }

    pub fn column(&self, col: usize) -> (Range<usize>, &[usize]) {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        (range.clone(), &self.row_idx[range])
    }
}

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub pattern: Arc<SparsePattern>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` at `(row, col)`; the entry must belong to the pattern.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self
            .pattern
            .position(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (j, xj) in x.iter().enumerate() {
            let (range, rows) = self.pattern.column(j);
            for (v, &i) in self.values[range].iter().zip(rows) {
                y[i] += v * xj;
            }
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let (range, rows) = self.pattern.column(j);
                self.values[range].iter().zip(rows).map(|(v, &i)| v * x[i]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (j, _) in d.clone().iter().enumerate() {
            let (range, rows) = self.pattern.column(j);
            for (v, &i) in self.values[range].iter().zip(rows) {
                d[i][j] = *v;
            }
        }
        d
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let mut entries = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    entries.push((i, j));
                }
            }
        }
        let mut m = Self::zeros(Arc::new(SparsePattern::from_entries(n, entries)?));
        for (i, row) in a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    m.add(i, j, *v);
                }
            }
        }
        Ok(m)
    }
}

/// Labels contiguous dof ranges for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct BlockMap {
    pub blocks: Vec<(DofBlock, Range<usize>)>,
}

impl BlockMap {
    pub fn block_of(&self, dof: usize) -> Option<DofBlock> {
        self.blocks.iter().find(|(_, r)| r.contains(&dof)).map(|(b, _)| *b)
    }

    fn describe(&self, dofs: &[usize]) -> String {
        let mut counts: Vec<(DofBlock, usize)> = Vec::new();
        for &d in dofs {
            let b = self.block_of(d).unwrap_or(DofBlock::Displacement);
            match counts.iter_mut().find(|(x, _)| *x == b) {
                Some((_, c)) => *c += 1,
                None => counts.push((b, 1)),
            }
        }
        counts
            .iter()
            .map(|(b, c)| format!("{b}: {c}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Numeric factorization of an equilibrated matrix.
pub struct Factorization {
    lu: Lu<usize, f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    matrix: SparseMatrix,
    blocks: BlockMap,
}

/// Caches the symbolic analysis of a fixed pattern across refactorizations.
#[derive(Default)]
pub struct LinearSolver {
    symbolic: Option<(Arc<SparsePattern>, SymbolicLu<usize>)>,
    pub blocks: BlockMap,
}

impl LinearSolver {
    pub fn new(blocks: BlockMap) -> Self {
        Self {
            symbolic: None,
            blocks,
        }
    }

    pub fn factorize(&mut self, a: &SparseMatrix) -> Result<Factorization> {
        let n = a.dim();
        let pattern = &a.pattern;
        // row scaling by the largest entry, then column scaling of the result
        let mut row_scale = vec![0.0f64; n];
        for j in 0..n {
            let (range, rows) = pattern.column(j);
            for (v, &i) in a.values[range].iter().zip(rows) {
                row_scale[i] = row_scale[i].max(v.abs());
            }
        }
        let empty_rows: Vec<usize> = (0..n).filter(|&i| !(row_scale[i] > 0.0)).collect();
        let mut col_scale = vec![0.0f64; n];
        for (j, cs) in col_scale.iter_mut().enumerate() {
            let (range, rows) = pattern.column(j);
            for (v, &i) in a.values[range].iter().zip(rows) {
                if row_scale[i] > 0.0 {
                    *cs = cs.max((v / row_scale[i]).abs());
                }
            }
        }
        let empty_cols: Vec<usize> = (0..n).filter(|&j| !(col_scale[j] > 0.0)).collect();
        if !empty_rows.is_empty() || !empty_cols.is_empty() {
            let mut dofs = empty_rows.clone();
            dofs.extend(&empty_cols);
            return Err(Error::Singular {
                reason: format!(
                    "{} zero rows and {} zero columns ({})",
                    empty_rows.len(),
                    empty_cols.len(),
                    self.blocks.describe(&dofs)
                ),
            });
        }
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                reason: "matrix contains non-finite entries".into(),
            });
        }
        for s in row_scale.iter_mut().chain(col_scale.iter_mut()) {
            *s = 1.0 / *s;
        }
        let mut scaled = a.values.clone();
        for j in 0..n {
            let (range, rows) = pattern.column(j);
            for (v, &i) in scaled[range].iter_mut().zip(rows) {
                *v *= row_scale[i] * col_scale[j];
            }
        }

        let symbolic = match &self.symbolic {
            Some((p, s)) if Arc::ptr_eq(p, pattern) => s.clone(),
            _ => {
                let s = SymbolicLu::try_new(pattern.symbolic.as_ref()).map_err(|e| Error::Singular {
                    reason: format!("symbolic analysis failed: {e:?}"),
                })?;
                self.symbolic = Some((pattern.clone(), s.clone()));
                s
            }
        };
        let mat = SparseColMatRef::new(pattern.symbolic.as_ref(), &scaled);
        // faer panics on an exactly zero pivot instead of returning an error
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| Lu::try_new_with_symbolic(symbolic, mat)))
            .map_err(|_| Error::Singular {
                reason: "zero pivot during numeric factorization".into(),
            })?
            .map_err(|e| Error::Singular {
                reason: format!("numeric factorization failed: {e:?}"),
            })?;
        Ok(Factorization {
            lu,
            row_scale,
            col_scale,
            matrix: a.clone(),
            blocks: self.blocks.clone(),
        })
    }
}

impl Factorization {
    fn raw_solve(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        let n = b.len();
        let (pre, post) = if transpose {
            (&self.col_scale, &self.row_scale)
        } else {
            (&self.row_scale, &self.col_scale)
        };
        let mut y: Vec<f64> = b.iter().zip(pre).map(|(v, s)| v * s).collect();
        let rhs = MatMut::from_column_major_slice_mut(&mut y, n, 1);
        if transpose {
            self.lu.solve_transpose_in_place(rhs);
        } else {
            self.lu.solve_in_place(rhs);
        }
        y.iter().zip(post).map(|(v, s)| v * s).collect()
    }

    fn refine(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if b.len() != self.matrix.dim() {
            return Err(Error::invalid(format!(
                "rhs length {} does not match matrix dimension {}",
                b.len(),
                self.matrix.dim()
            )));
        }
        let apply = |x: &[f64]| {
            if transpose {
                self.matrix.matvec_transpose(x)
            } else {
                self.matrix.matvec(x)
            }
        };
        let bnorm = norm(b);
        let mut x = self.raw_solve(b, transpose);
        for _ in 0..3 {
            let ax = apply(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if !(norm(&r) > 1e-14 * bnorm) {
                break;
            }
            let dx = self.raw_solve(&r, transpose);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        }
        let bad: Vec<usize> = (0..x.len()).filter(|&i| !x[i].is_finite()).collect();
        if !bad.is_empty() {
            return Err(Error::Singular {
                reason: format!(
                    "numerically singular: {} non-finite solution entries ({})",
                    bad.len(),
                    self.blocks.describe(&bad)
                ),
            });
        }
        Ok(x)
    }

    /// Solves `A x = b` with iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.refine(b, false)
    }

    /// Solves `Aᵀ x = b` with iterative refinement.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.refine(b, true)
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot direct solve of `A x = b`.
pub fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LinearSolver::default().factorize(a)?.solve(b)
}
