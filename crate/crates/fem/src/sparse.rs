/// Square sparse matrix in compressed rows with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    /// Zero matrix with the given pattern. Rows must be sorted and unique.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern((0..n).map(|i| vec![i]).collect());
        m.vals.fill(1.0);
        m
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows = a.iter().map(|r| (0..r.len()).filter(|&j| r[j] != 0.0).collect()).collect();
        let mut m = Self::from_pattern(rows);
        for i in 0..m.n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.vals[k] = a[i][m.cols[k]];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Adds `v` at `(i, j)`; the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside the sparsity pattern"));
        self.vals[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |K_ij - K_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.vals[k] - self.get(self.cols[k], i)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on the rows and columns where `keep` maps to a new
    /// index.
    pub fn restrict(&self, keep: &[Option<usize>]) -> Self {
        let m = keep.iter().flatten().count();
        let mut row_ptr = Vec::with_capacity(m + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..self.n {
            if keep[i].is_none() {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if let Some(j) = keep[self.cols[k]] {
                    cols.push(j);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n: m, row_ptr, cols, vals }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row[self.cols[k]] = self.vals[k];
            }
        }
        a
    }
}
