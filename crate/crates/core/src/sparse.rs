//! Compressed sparse row matrices and element-wise assembly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Duplicate entries are summed; explicit zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            order.clear();
            order.extend(counts[i]..counts[i + 1]);
            order.sort_by_key(|&k| cols[k]);
            for &k in &order {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == cols[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
            symmetric: true,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Whether the matrix was built as symmetric (flag only; see [`Self::symmetry_error`]).
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn with_symmetry(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] += v;
            }
        }
        d
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(
            x.len(),
            self.ncols,
            "vector length does not match matrix columns"
        );
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c * other` on the union pattern.
    pub fn add_scaled(&self, other: &CsrMatrix, c: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::invalid("matrix dimensions differ in sum"));
        }
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                let take_a = q == bc.len() || (p < ac.len() && ac[p] <= bc[q]);
                let take_b = p == ac.len() || (q < bc.len() && bc[q] <= ac[p]);
                match (take_a, take_b) {
                    (true, true) => {
                        col_idx.push(ac[p]);
                        values.push(av[p] + c * bv[q]);
                        p += 1;
                        q += 1;
                    }
                    (true, false) => {
                        col_idx.push(ac[p]);
                        values.push(av[p]);
                        p += 1;
                    }
                    _ => {
                        col_idx.push(bc[q]);
                        values.push(c * bv[q]);
                        q += 1;
                    }
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    /// `self * diag(d) * other`; with `d = None` the plain product.
    pub fn matmul_diag(&self, d: Option<&[f64]>, other: &CsrMatrix) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::invalid("inner dimensions differ in product"));
        }
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let s = a * d.map_or(1.0, |d| d[k]);
                let (bc, bv) = other.row(k);
                for (&j, &b) in bc.iter().zip(bv) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += s * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
            .expect("indices in range")
            .with_symmetry(self.symmetric)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Precomputed sparsity pattern for element-by-element assembly; each element scatters a dense
/// `k x k` block onto fixed slots of the CSR value array.
#[derive(Debug, Clone)]
pub struct ElementAssembler {
    template: CsrMatrix,
    scatter: Vec<usize>,
    k: usize,
}

impl ElementAssembler {
    pub fn new(n: usize, k: usize, element_dofs: &[Vec<usize>]) -> Result<Self> {
        let mut t = Vec::with_capacity(element_dofs.len() * k * k);
        for dofs in element_dofs {
            if dofs.len() != k {
                return Err(Error::invalid(format!(
                    "element with {} dofs, expected {k}",
                    dofs.len()
                )));
            }
            for &a in dofs {
                for &b in dofs {
                    t.push((a, b, 0.0));
                }
            }
        }
        let template = CsrMatrix::from_triplets(n, n, &t)?.with_symmetry(true);
        let mut scatter = Vec::with_capacity(t.len());
        for dofs in element_dofs {
            for &a in dofs {
                let start = template.row_ptr[a];
                let (cols, _) = template.row(a);
                for &b in dofs {
                    scatter.push(
                        start
                            + cols
                                .binary_search(&b)
                                .expect("pattern holds every element entry"),
                    );
                }
            }
        }
        Ok(ElementAssembler {
            template,
            scatter,
            k,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.scatter.len() / (self.k * self.k)
    }

    /// `block(e, out)` writes element `e`'s row-major block into `out`.
    pub fn assemble(&self, mut block: impl FnMut(usize, &mut [f64])) -> CsrMatrix {
        let mut m = self.template.clone();
        let kk = self.k * self.k;
        let mut buf = vec![0.0; kk];
        for (e, slots) in self.scatter.chunks(kk).enumerate() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            block(e, &mut buf);
            for (&s, &v) in slots.iter().zip(&buf) {
                m.values[s] += v;
            }
        }
        m
    }
}
