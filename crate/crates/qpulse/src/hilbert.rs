//! Operator algebra on truncated tensor-product Hilbert spaces.
//!
//! The joint space of a simulation is a Kronecker product of up to three
//! slots in the fixed order (input cavity u, scatterer s, output cavity v).
//! Everything here is dense; the master-equation integrator compresses
//! operators on its own (see [`crate::sparse`]).

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tensor-product layout: slot dimensions in the fixed (u, s, v) order.
///
/// A two-slot layout (u, s) is used when no output cavity is attached,
/// e.g. for the emitter autocorrelation computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    dims: Vec<usize>,
    labels: Vec<&'static str>,
}

impl SpaceLayout {
    /// Full cascade layout [N+1, d, M+1] for slots (u, s, v).
    pub fn three_slot(n_u: usize, d: usize, n_v: usize) -> Result<Self> {
        Self::new(vec![n_u, d, n_v], vec!["u", "s", "v"])
    }

    /// Input-cavity + scatterer layout [N+1, d], no output slot.
    pub fn input_only(n_u: usize, d: usize) -> Result<Self> {
        Self::new(vec![n_u, d], vec!["u", "s"])
    }

    /// Layout from raw dimensions; slots beyond the third are labelled "x".
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        let labels = ["u", "s", "v"]
            .iter()
            .copied()
            .chain(std::iter::repeat("x"))
            .take(dims.len())
            .collect();
        Self::new(dims.to_vec(), labels)
    }

    fn new(dims: Vec<usize>, labels: Vec<&'static str>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDimension(format!(
                "every slot dimension must be >= 1, got {dims:?}"
            )));
        }
        Ok(Self { dims, labels })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[&'static str] {
        &self.labels
    }

    pub fn n_slots(&self) -> usize {
        self.dims.len()
    }

    /// Total dimension, the product of all slot dimensions.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Index of the slot with the given label.
    pub fn slot(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Row-major stride of each slot in the composite index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }
}

/// Dense complex square matrix with an explicit dimension tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    mat: Array2<C64>,
}

impl Operator {
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        let (r, c) = (mat.nrows(), mat.ncols());
        if r != c || r == 0 {
            return Err(Error::InvalidDimension(format!(
                "operator must be square and non-empty, got {r}x{c}"
            )));
        }
        Ok(Self { dim: r, mat })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("dim = 0".into()));
        }
        Ok(Self { dim, mat: Array2::zeros((dim, dim)) })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut op = Self::zeros(dim)?;
        for i in 0..dim {
            op.mat[[i, i]] = C64::new(1.0, 0.0);
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    /// Hermitian conjugate.
    pub fn dagger(&self) -> Self {
        Self { dim: self.dim, mat: self.mat.t().mapv(|z| z.conj()) }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { dim: self.dim, mat: self.mat.mapv(|x| x * z) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        Ok(Self { dim: self.dim, mat: &self.mat + &other.mat })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        Ok(Self { dim: self.dim, mat: self.mat.dot(&other.mat) })
    }

    /// Max-norm of self − other, used in tests and invariant checks.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in i..self.dim {
                if (self.mat[[i, j]] - self.mat[[j, i]].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim != other {
            return Err(Error::InvalidDimension(format!(
                "operator dimensions differ: {} vs {}",
                self.dim, other
            )));
        }
        Ok(())
    }
}

/// Annihilation operator on a dim-level oscillator: ⟨n−1|a|n⟩ = √n.
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim == 0 {
        return Err(Error::InvalidDimension("annihilation: dim = 0".into()));
    }
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::new(a)
}

/// Creation operator a†.
pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.dagger())
}

/// Number operator a†a = diag(0, 1, ..., dim−1).
pub fn number(dim: usize) -> Result<Operator> {
    let mut n = Operator::zeros(dim)?;
    for i in 0..dim {
        n.mat[[i, i]] = C64::new(i as f64, 0.0);
    }
    Ok(n)
}

/// |i⟩⟨j| on a dim-level system.
pub fn projector(dim: usize, i: usize, j: usize) -> Result<Operator> {
    if i >= dim || j >= dim {
        return Err(Error::InvalidDimension(format!(
            "projector |{i}><{j}| outside dimension {dim}"
        )));
    }
    let mut p = Operator::zeros(dim)?;
    p.mat[[i, j]] = C64::new(1.0, 0.0);
    Ok(p)
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ia in 0..ar {
        for ja in 0..ac {
            let x = a[[ia, ja]];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..br {
                for jb in 0..bc {
                    out[[ia * br + ib, ja * bc + jb]] = x * b[[ib, jb]];
                }
            }
        }
    }
    out
}

/// Embed a slot operator into the full space: I ⊗ … ⊗ op ⊗ … ⊗ I,
/// Kronecker factors in the fixed (u, s, v) slot order.
pub fn embed(op: &Operator, slot: usize, layout: &SpaceLayout) -> Result<Operator> {
    let dims = layout.dims();
    if slot >= dims.len() {
        return Err(Error::InvalidArgument(format!(
            "slot {slot} outside layout with {} slots",
            dims.len()
        )));
    }
    if op.dim() != dims[slot] {
        return Err(Error::InvalidDimension(format!(
            "operator dimension {} does not match slot {} dimension {}",
            op.dim(),
            slot,
            dims[slot]
        )));
    }
    let left: usize = dims[..slot].iter().product();
    let right: usize = dims[slot + 1..].iter().product();
    let mut m = op.matrix().clone();
    if left > 1 {
        m = kron(Operator::identity(left)?.matrix(), &m);
    }
    if right > 1 {
        m = kron(&m, Operator::identity(right)?.matrix());
    }
    Operator::new(m)
}

/// Density matrix on a tensor-product layout.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    mat: Array2<C64>,
}

impl DensityMatrix {
    /// Wrap a matrix, checking dimension and Hermiticity (tol 1e-10 max-norm).
    pub fn new(layout: SpaceLayout, mat: Array2<C64>) -> Result<Self> {
        let dim = layout.total_dim();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::InvalidDimension(format!(
                "density matrix is {}x{} but layout dimension is {dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let rho = Self { layout, mat };
        let h = rho.hermiticity_defect();
        if h > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "density matrix not Hermitian: max |rho - rho†| = {h:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Wrap without the Hermiticity check (integrator-internal states).
    pub(crate) fn new_unchecked(layout: SpaceLayout, mat: Array2<C64>) -> Self {
        Self { layout, mat }
    }

    /// Pure state ρ = |ψ⟩⟨ψ| (ψ is renormalized).
    pub fn pure(layout: SpaceLayout, psi: &[C64]) -> Result<Self> {
        let dim = layout.total_dim();
        if psi.len() != dim {
            return Err(Error::InvalidDimension(format!(
                "state vector length {} does not match layout dimension {dim}",
                psi.len()
            )));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let mut mat = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                mat[[i, j]] = psi[i] * psi[j].conj() / (norm * norm);
            }
        }
        Ok(Self { layout, mat })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<C64> {
        &mut self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().iter().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.mat.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.mat[[i, j]] - self.mat[[j, i]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// ρ ← (ρ + ρ†)/2, applied at observable-evaluation points.
    pub fn symmetrize(&mut self) {
        let n = self.mat.nrows();
        for i in 0..n {
            for j in i..n {
                let avg = 0.5 * (self.mat[[i, j]] + self.mat[[j, i]].conj());
                self.mat[[i, j]] = avg;
                self.mat[[j, i]] = avg.conj();
            }
        }
    }

    /// Divide by the trace; returns the trace found.
    pub fn renormalize(&mut self) -> C64 {
        let tr = self.trace();
        if tr.norm() > 0.0 {
            self.mat.mapv_inplace(|z| z / tr);
        }
        tr
    }

    /// Purity Tr(ρ²); real for Hermitian ρ.
    pub fn purity(&self) -> f64 {
        let n = self.mat.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.mat[[i, j]] * self.mat[[j, i]];
            }
        }
        acc.re
    }
}

/// Partial trace keeping the listed slots (ascending order enforced).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = rho.layout();
    let n_slots = layout.n_slots();
    if keep.is_empty() {
        return Err(Error::InvalidArgument("partial_trace: empty keep set".into()));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if *keep.last().unwrap() >= n_slots {
        return Err(Error::InvalidArgument(format!(
            "partial_trace: slot {} outside layout with {n_slots} slots",
            keep.last().unwrap()
        )));
    }
    let traced: Vec<usize> = (0..n_slots).filter(|s| !keep.contains(s)).collect();
    let dims = layout.dims();
    let strides = layout.strides();

    // composite index = keep-part offset + traced-part offset
    let offsets = |slots: &[usize]| -> Vec<usize> {
        let mut offs = vec![0usize];
        for &s in slots {
            let mut next = Vec::with_capacity(offs.len() * dims[s]);
            for &o in &offs {
                for k in 0..dims[s] {
                    next.push(o + k * strides[s]);
                }
            }
            offs = next;
        }
        offs
    };
    let keep_offs = offsets(&keep);
    let trace_offs = offsets(&traced);

    let dk = keep_offs.len();
    let mut out = Array2::zeros((dk, dk));
    let m = rho.matrix();
    for (i, &oi) in keep_offs.iter().enumerate() {
        for (j, &oj) in keep_offs.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &ot in &trace_offs {
                acc += m[[oi + ot, oj + ot]];
            }
            out[[i, j]] = acc;
        }
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&s| dims[s]).collect();
    let new_layout = if keep.len() == layout.n_slots() {
        layout.clone()
    } else {
        SpaceLayout::from_dims(&kept_dims)?
    };
    Ok(DensityMatrix::new_unchecked(new_layout, out))
}

/// Fock state |n⟩ amplitudes on a dim-level oscillator.
pub fn fock_state(dim: usize, n: usize) -> Result<Vec<C64>> {
    if n >= dim {
        return Err(Error::InsufficientTruncation { needed: n + 1, actual: dim });
    }
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[n] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Truncated coherent state |α⟩, renormalized on the truncated space.
pub fn coherent_state(dim: usize, alpha: C64) -> Result<Vec<C64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension("coherent_state: dim = 0".into()));
    }
    let mut v = vec![C64::new(0.0, 0.0); dim];
    // amplitude recurrence c_n = c_{n-1} · α/√n
    let mut c = C64::new(1.0, 0.0);
    v[0] = c;
    for n in 1..dim {
        c *= alpha / C64::new((n as f64).sqrt(), 0.0);
        v[n] = c;
    }
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    Ok(v)
}

/// Kronecker product of state vectors in slot order.
pub fn kron_states(parts: &[&[C64]]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for part in parts {
        let mut next = Vec::with_capacity(out.len() * part.len());
        for &o in &out {
            for &p in *part {
                next.push(o * p);
            }
        }
        out = next;
    }
    out
}

/// Tr(ρ·op).
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::InvalidDimension(format!(
            "expectation: state dimension {} vs operator dimension {}",
            rho.dim(),
            op.dim()
        )));
    }
    let r = rho.matrix();
    let o = op.matrix();
    let n = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += r[[i, j]] * o[[j, i]];
        }
    }
    Ok(acc)
}

/// Smallest eigenvalue of a Hermitian matrix (exact dense solve).
///
/// Intended for states of moderate dimension; the acceptance checks on
/// large states use [`positive_within`] instead.
pub fn min_eigenvalue(mat: &Array2<C64>) -> f64 {
    let n = mat.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| mat[[i, j]]);
    let eig = dm.symmetric_eigen();
    eig.eigenvalues.iter().fold(f64::INFINITY, |m, &x| m.min(x))
}

/// Certify λ_min(ρ) ≥ −shift by attempting a Cholesky factorization of
/// ρ + shift·I. O(n³/3), no eigensolve; works at dimensions where the
/// dense eigenproblem is too slow.
pub fn positive_within(mat: &Array2<C64>, shift: f64) -> bool {
    let n = mat.nrows();
    let mut a = mat.clone();
    for i in 0..n {
        a[[i, i]] += C64::new(shift, 0.0);
    }
    // in-place lower Cholesky; fails on a non-positive pivot
    for j in 0..n {
        let mut d = a[[j, j]].re;
        for k in 0..j {
            d -= a[[j, k]].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[[j, j]] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]].conj();
            }
            a[[i, j]] = s / d;
        }
    }
    true
}
