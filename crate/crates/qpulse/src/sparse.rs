//! Compressed operator kernels for the master-equation right-hand side.
//!
//! Embedded ladder operators on the cascade space carry at most a few
//! nonzeros per row, so the integrator applies them in compressed sparse
//! row form rather than as dense matrices. The dense [`crate::hilbert`]
//! types remain the public contract; compression happens once at model
//! assembly.

use ndarray::Array2;
use num_complex::Complex64 as C64;

const ZERO_TOL: f64 = 0.0;

/// Compressed sparse row matrix over Complex64.
#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<C64>,
}

impl Csr {
    /// Compress a dense square matrix, dropping exact zeros.
    pub fn from_dense(m: &Array2<C64>) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "Csr::from_dense: matrix must be square");
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let z = m[[i, j]];
                if z.norm_sqr() > ZERO_TOL {
                    col.push(j as u32);
                    val.push(z);
                }
            }
            row_ptr.push(col.len());
        }
        Self { n, row_ptr, col, val }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[[i, self.col[k] as usize]] = self.val[k];
            }
        }
        m
    }

    /// Hermitian conjugate (new pattern, sorted columns).
    pub fn dagger(&self) -> Self {
        let mut triplets: Vec<(u32, u32, C64)> = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                triplets.push((self.col[k], i as u32, self.val[k].conj()));
            }
        }
        Self::from_triplets(self.n, triplets)
    }

    /// Sparse-sparse product self·other (used once at assembly time).
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut triplets = Vec::new();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k] as usize;
                let v = self.val[k];
                for k2 in other.row_ptr[j]..other.row_ptr[j + 1] {
                    triplets.push((i as u32, other.col[k2], v * other.val[k2]));
                }
            }
        }
        Self::from_triplets(self.n, triplets)
    }

    fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut rows: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut col = Vec::with_capacity(triplets.len());
        let mut val: Vec<C64> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && col.last() == Some(&c) {
                *val.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col.push(c);
                val.push(v);
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &r in &rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col, val }
    }

    /// out += coeff · (self · rho), dense row-major rho.
    pub fn spmm_acc(&self, coeff: C64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let n = self.n;
        let rho_s = rho.as_slice().expect("rho must be contiguous row-major");
        let out_s = out.as_slice_mut().expect("out must be contiguous row-major");
        for i in 0..n {
            let out_row = &mut out_s[i * n..(i + 1) * n];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k] as usize;
                let v = coeff * self.val[k];
                let rho_row = &rho_s[j * n..(j + 1) * n];
                for (o, r) in out_row.iter_mut().zip(rho_row.iter()) {
                    *o += v * r;
                }
            }
        }
    }

    /// out += coeff · (rho · self), dense row-major rho.
    pub fn rmm_acc(&self, coeff: C64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let n = self.n;
        let rho_s = rho.as_slice().expect("rho must be contiguous row-major");
        let out_s = out.as_slice_mut().expect("out must be contiguous row-major");
        // (rho·S)[i, c] += rho[i, r] · S[r, c]
        for i in 0..n {
            let rho_row = &rho_s[i * n..(i + 1) * n];
            let out_row = &mut out_s[i * n..(i + 1) * n];
            for r in 0..n {
                let x = rho_row[r];
                if x.norm_sqr() == 0.0 {
                    continue;
                }
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    out_row[self.col[k] as usize] += coeff * x * self.val[k];
                }
            }
        }
    }

    /// Tr(rho · self) in O(nnz).
    pub fn trace_with(&self, rho: &Array2<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                // (rho·S)_jj summed = Σ rho[j,i]·S[i,j]
                acc += rho[[self.col[k] as usize, i]] * self.val[k];
            }
        }
        acc
    }
}

/// Time-dependent linear combination Σ_k c_k(t)·T_k of fixed sparse terms,
/// assembled into a single CSR with the union sparsity pattern. Coefficient
/// updates cost O(total nnz).
#[derive(Debug, Clone)]
pub struct CsrCombo {
    pattern: Csr,
    /// per-term scatter: (position in pattern.val, base value)
    terms: Vec<Vec<(u32, C64)>>,
}

impl CsrCombo {
    pub fn new(terms: &[&Csr]) -> Self {
        assert!(!terms.is_empty());
        let n = terms[0].n;
        // union pattern per row
        let mut cols_per_row: Vec<Vec<u32>> = vec![Vec::new(); n];
        for t in terms {
            assert_eq!(t.n, n);
            for i in 0..n {
                for k in t.row_ptr[i]..t.row_ptr[i + 1] {
                    cols_per_row[i].push(t.col[k]);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for cols in cols_per_row.iter_mut() {
            cols.sort_unstable();
            cols.dedup();
            col.extend_from_slice(cols);
            row_ptr.push(col.len());
        }
        let val = vec![C64::new(0.0, 0.0); col.len()];
        let pattern = Csr { n, row_ptr, col, val };

        let term_maps = terms
            .iter()
            .map(|t| {
                let mut map = Vec::with_capacity(t.nnz());
                for i in 0..n {
                    for k in t.row_ptr[i]..t.row_ptr[i + 1] {
                        let start = pattern.row_ptr[i];
                        let end = pattern.row_ptr[i + 1];
                        let pos = pattern.col[start..end]
                            .binary_search(&t.col[k])
                            .expect("union pattern must contain term entry")
                            + start;
                        map.push((pos as u32, t.val[k]));
                    }
                }
                map
            })
            .collect();
        Self { pattern, terms: term_maps }
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Rebuild the combined values for the given coefficients.
    pub fn assemble(&mut self, coeffs: &[C64]) {
        assert_eq!(coeffs.len(), self.terms.len());
        self.pattern.val.fill(C64::new(0.0, 0.0));
        for (c, term) in coeffs.iter().zip(&self.terms) {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for &(pos, base) in term {
                self.pattern.val[pos as usize] += c * base;
            }
        }
    }

    pub fn csr(&self) -> &Csr {
        &self.pattern
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilation, creation, embed, SpaceLayout};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn roundtrip_and_products() {
        let layout = SpaceLayout::three_slot(2, 2, 3).unwrap();
        let a = embed(&annihilation(3).unwrap(), 2, &layout).unwrap();
        let s = Csr::from_dense(a.matrix());
        assert_eq!(s.dim(), 12);
        let back = s.to_dense();
        assert_eq!(
            back.iter()
                .zip(a.matrix().iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max),
            0.0
        );
        // dagger
        let sd = s.dagger().to_dense();
        let ad = a.dagger();
        assert_eq!(
            sd.iter()
                .zip(ad.matrix().iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max),
            0.0
        );
        // sparse-sparse product a†a
        let n = s.dagger().matmul(&s).to_dense();
        let nd = ad.matmul(&a).unwrap();
        assert!(n
            .iter()
            .zip(nd.matrix().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            < 1e-14);
    }

    #[test]
    fn spmm_matches_dense() {
        let layout = SpaceLayout::three_slot(2, 3, 2).unwrap();
        let op = embed(&creation(3).unwrap(), 1, &layout).unwrap();
        let s = Csr::from_dense(op.matrix());
        let rho = Array2::from_shape_fn((12, 12), |(i, j)| {
            c((i as f64 - 3.0) * 0.1, (j as f64) * 0.05)
        });
        let coeff = c(0.3, -0.7);

        let mut out = Array2::zeros((12, 12));
        s.spmm_acc(coeff, &rho, &mut out);
        let want = op.matrix().dot(&rho).mapv(|z| z * coeff);
        assert!(out
            .iter()
            .zip(want.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            < 1e-13);

        let mut out2 = Array2::zeros((12, 12));
        s.rmm_acc(coeff, &rho, &mut out2);
        let want2 = rho.dot(op.matrix()).mapv(|z| z * coeff);
        assert!(out2
            .iter()
            .zip(want2.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            < 1e-13);
    }

    #[test]
    fn trace_with_matches_dense() {
        let layout = SpaceLayout::three_slot(2, 2, 2).unwrap();
        let op = embed(&annihilation(2).unwrap(), 0, &layout).unwrap();
        let s = Csr::from_dense(op.matrix());
        let rho = Array2::from_shape_fn((8, 8), |(i, j)| c(0.02 * (i * 8 + j) as f64, -0.01 * i as f64));
        let direct: C64 = {
            let m = rho.dot(op.matrix());
            m.diag().iter().sum()
        };
        assert!((s.trace_with(&rho) - direct).norm() < 1e-13);
    }

    #[test]
    fn combo_assembles_linear_combination() {
        let layout = SpaceLayout::three_slot(2, 2, 2).unwrap();
        let a = Csr::from_dense(embed(&annihilation(2).unwrap(), 0, &layout).unwrap().matrix());
        let b = Csr::from_dense(embed(&annihilation(2).unwrap(), 2, &layout).unwrap().matrix());
        let mut combo = CsrCombo::new(&[&a, &b]);
        let (ca, cb) = (c(2.0, 1.0), c(0.0, -3.0));
        combo.assemble(&[ca, cb]);
        let want = a.to_dense().mapv(|z| z * ca) + b.to_dense().mapv(|z| z * cb);
        let got = combo.csr().to_dense();
        assert!(got
            .iter()
            .zip(want.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            < 1e-14);
    }
}
