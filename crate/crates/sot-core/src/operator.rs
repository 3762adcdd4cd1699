//! Complex operator arithmetic with subsystem-aware tensor structure.
//!
//! An [`Operator`] is a complex square matrix carrying an ordered list of
//! subsystem dimensions. All composite indexing follows the convention
//! `|i_A, i_B> -> i_A * d_B + i_B`, i.e. the left subsystem owns the
//! slower-varying index, and every module in this crate shares it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when deciding whether an operator is Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Default tolerance for merging near-degenerate eigenvalues into one
/// eigenspace. Spectral weights of the form 2/(l_i + l_j) are unstable across
/// near-degenerate splits, so grouping happens before they are formed.
pub const DEFAULT_GROUPING_TOL: f64 = 1e-8;

pub(crate) const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ordered subsystem dimensions, with an optional direct-sum decomposition of
/// one designated subsystem into blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimsSpec {
    subsystem_dims: Vec<usize>,
    blocks: Option<BlockDecomposition>,
}

/// Direct-sum decomposition of one subsystem into contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDecomposition {
    /// Index of the decomposed subsystem within the dims list.
    pub subsystem: usize,
    /// Block sizes; they sum to the decomposed subsystem's dimension.
    pub sizes: Vec<usize>,
}

impl DimsSpec {
    /// Single-subsystem spec of dimension `d`.
    pub fn scalar(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn new(subsystem_dims: Vec<usize>) -> Result<Self> {
        if subsystem_dims.is_empty() {
            return Err(Error::InvalidDims("dims list must be non-empty".into()));
        }
        if subsystem_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDims("all subsystem dims must be >= 1".into()));
        }
        Ok(DimsSpec {
            subsystem_dims,
            blocks: None,
        })
    }

    /// Attach a direct-sum decomposition to subsystem `subsystem`.
    pub fn with_blocks(mut self, subsystem: usize, sizes: Vec<usize>) -> Result<Self> {
        if subsystem >= self.subsystem_dims.len() {
            return Err(Error::InvalidSubsystem {
                index: subsystem,
                count: self.subsystem_dims.len(),
            });
        }
        if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidDims("block sizes must be >= 1".into()));
        }
        let total: usize = sizes.iter().sum();
        if total != self.subsystem_dims[subsystem] {
            return Err(Error::InvalidDims(format!(
                "block sizes sum to {} but subsystem {} has dimension {}",
                total, subsystem, self.subsystem_dims[subsystem]
            )));
        }
        self.blocks = Some(BlockDecomposition { subsystem, sizes });
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.subsystem_dims
    }

    pub fn num_subsystems(&self) -> usize {
        self.subsystem_dims.len()
    }

    /// Total Hilbert-space dimension (product of subsystem dims).
    pub fn total_dim(&self) -> usize {
        self.subsystem_dims.iter().product()
    }

    pub fn blocks(&self) -> Option<&BlockDecomposition> {
        self.blocks.as_ref()
    }

    /// Offset of block `index` within the decomposed subsystem.
    pub fn block_offset(&self, index: usize) -> Result<usize> {
        let blocks = self
            .blocks
            .as_ref()
            .ok_or_else(|| Error::MissingBlocks("dims spec has no block decomposition".into()))?;
        if index >= blocks.sizes.len() {
            return Err(Error::InvalidBlock {
                index,
                count: blocks.sizes.len(),
            });
        }
        Ok(blocks.sizes[..index].iter().sum())
    }
}

/// Flat index of the elementary matrix |i><j| in the row-major operator basis.
pub fn vec_index(i: usize, j: usize, d: usize) -> Result<usize> {
    if i >= d || j >= d {
        return Err(Error::InvalidInput(format!(
            "basis indices ({i}, {j}) out of range for dimension {d}"
        )));
    }
    Ok(i * d + j)
}

/// Complex square matrix with subsystem structure; the universal carrier for
/// states, spacetime states, channel states, and swap gates.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<Complex64>,
    dims: DimsSpec,
}

impl Operator {
    pub fn new(mat: DMatrix<Complex64>, dims: DimsSpec) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() != dims.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix side {} does not equal product of dims {:?}",
                mat.nrows(),
                dims.dims()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteEntries);
        }
        Ok(Operator { mat, dims })
    }

    /// Build from a row-major closure over entries.
    pub fn from_fn(dims: DimsSpec, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let d = dims.total_dim();
        let mat = DMatrix::from_fn(d, d, |i, j| f(i, j));
        Operator::new(mat, dims)
    }

    pub fn zeros(dims: DimsSpec) -> Self {
        let d = dims.total_dim();
        Operator {
            mat: DMatrix::zeros(d, d),
            dims,
        }
    }

    pub fn identity(dims: DimsSpec) -> Self {
        let d = dims.total_dim();
        Operator {
            mat: DMatrix::identity(d, d),
            dims,
        }
    }

    /// Maximally mixed state 1/d on a single subsystem of dimension `d`.
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        let dims = DimsSpec::scalar(d)?;
        let mut op = Operator::identity(dims);
        op.mat
            .iter_mut()
            .for_each(|z| *z /= Complex64::new(d as f64, 0.0));
        Ok(op)
    }

    /// Projector |k><k| on a single subsystem of dimension `d`.
    pub fn basis_projector(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidInput(format!(
                "basis index {k} out of range for dimension {d}"
            )));
        }
        let mut op = Operator::zeros(DimsSpec::scalar(d)?);
        op.mat[(k, k)] = C_ONE;
        Ok(op)
    }

    /// Elementary matrix |i><j| on a single subsystem of dimension `d`.
    pub fn elementary(d: usize, i: usize, j: usize) -> Result<Self> {
        vec_index(i, j, d)?;
        let mut op = Operator::zeros(DimsSpec::scalar(d)?);
        op.mat[(i, j)] = C_ONE;
        Ok(op)
    }

    /// Rank-one projector |psi><psi| from amplitudes (normalized first).
    pub fn pure_state(amplitudes: &[Complex64]) -> Result<Self> {
        let d = amplitudes.len();
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let dims = DimsSpec::scalar(d)?;
        Operator::from_fn(dims, |i, j| amplitudes[i] * amplitudes[j].conj() / norm_sq)
    }

    pub fn mat(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_mat(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn dims(&self) -> &DimsSpec {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.mat.nrows()
    }

    /// Reinterpret the same matrix with a different subsystem split.
    pub fn with_dims(&self, dims: DimsSpec) -> Result<Self> {
        Operator::new(self.mat.clone(), dims)
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.diagonal().iter().sum()
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            mat: self.mat.adjoint(),
            dims: self.dims.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        Operator {
            mat: self.mat.transpose(),
            dims: self.dims.clone(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Operator {
            mat: self.mat.clone() * factor,
            dims: self.dims.clone(),
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Operator {
            mat: &self.mat + &other.mat,
            dims: self.dims.clone(),
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Operator {
            mat: &self.mat - &other.mat,
            dims: self.dims.clone(),
        })
    }

    /// Matrix product; dims are taken from the left factor.
    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Operator {
            mat: &self.mat * &other.mat,
            dims: self.dims.clone(),
        })
    }

    /// Jordan product (X Y + Y X) / 2.
    pub fn jordan(&self, other: &Operator) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Operator {
            mat: (&self.mat * &other.mat + &other.mat * &self.mat).scale(0.5),
            dims: self.dims.clone(),
        })
    }

    /// Commutator X Y - Y X.
    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Operator {
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
            dims: self.dims.clone(),
        })
    }

    fn check_same_shape(&self, other: &Operator) -> Result<()> {
        if self.side() != other.side() {
            return Err(Error::DimensionMismatch(format!(
                "operator sides differ: {} vs {}",
                self.side(),
                other.side()
            )));
        }
        Ok(())
    }

    /// Max-entry absolute norm; all tolerance statements in this crate use it
    /// so they stay dimension-independent.
    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-entry absolute difference against another operator.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.side(), other.side(), "max_abs_diff shape mismatch");
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let adj = self.mat.adjoint();
        self.mat
            .iter()
            .zip(adj.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Hermitian part (X + X^dag) / 2.
    pub fn hermitian_part(&self) -> Self {
        Operator {
            mat: (&self.mat + self.mat.adjoint()).scale(0.5),
            dims: self.dims.clone(),
        }
    }
}

/// Tensor (Kronecker) product. Dims are concatenated; the left factor owns the
/// slower-varying index.
pub fn kron(x: &Operator, y: &Operator) -> Operator {
    let dx = x.side();
    let dy = y.side();
    let mut dims = x.dims.dims().to_vec();
    dims.extend_from_slice(y.dims.dims());
    let mat = DMatrix::from_fn(dx * dy, dx * dy, |r, c| {
        x.mat[(r / dy, c / dy)] * y.mat[(r % dy, c % dy)]
    });
    Operator {
        mat,
        dims: DimsSpec::new(dims).expect("kron dims are valid"),
    }
}

/// Partial trace over the listed subsystems. The result keeps the remaining
/// subsystems in their original order and preserves the total trace.
pub fn partial_trace(x: &Operator, traced: &[usize]) -> Result<Operator> {
    let dims = x.dims.dims();
    let n = dims.len();
    for &t in traced {
        if t >= n {
            return Err(Error::InvalidSubsystem { index: t, count: n });
        }
    }
    let mut keep: Vec<usize> = (0..n).filter(|i| !traced.contains(i)).collect();
    keep.sort_unstable();
    let kept_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = (0..n)
        .filter(|i| traced.contains(i))
        .map(|i| dims[i])
        .collect();
    let kept_total: usize = kept_dims.iter().product::<usize>().max(1);
    let traced_total: usize = traced_dims.iter().product::<usize>().max(1);

    // Strides of each subsystem within the composite index.
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }

    let compose = |kept_multi: &[usize], traced_multi: &[usize]| -> usize {
        let mut idx = 0;
        let mut k_it = 0;
        let mut t_it = 0;
        for s in 0..n {
            if traced.contains(&s) {
                idx += traced_multi[t_it] * strides[s];
                t_it += 1;
            } else {
                idx += kept_multi[k_it] * strides[s];
                k_it += 1;
            }
        }
        idx
    };

    let unflatten = |mut flat: usize, subdims: &[usize]| -> Vec<usize> {
        let mut multi = vec![0usize; subdims.len()];
        for i in (0..subdims.len()).rev() {
            multi[i] = flat % subdims[i];
            flat /= subdims[i];
        }
        multi
    };

    let out_dims = if kept_dims.is_empty() {
        DimsSpec::new(vec![1])?
    } else {
        DimsSpec::new(kept_dims.clone())?
    };
    let mut out = DMatrix::<Complex64>::zeros(kept_total, kept_total);
    for r in 0..kept_total {
        let rm = unflatten(r, &kept_dims);
        for c in 0..kept_total {
            let cm = unflatten(c, &kept_dims);
            let mut acc = C_ZERO;
            for t in 0..traced_total {
                let tm = unflatten(t, &traced_dims);
                acc += x.mat[(compose(&rm, &tm), compose(&cm, &tm))];
            }
            out[(r, c)] = acc;
        }
    }
    Operator::new(out, out_dims)
}

/// Swap gate F = sum_ij |ij><ji| between two subsystems of dimension `d`.
/// F is Hermitian, squares to the identity, and has trace d.
pub fn swap_operator(d: usize) -> Result<Operator> {
    if d == 0 {
        return Err(Error::InvalidDims("swap dimension must be >= 1".into()));
    }
    let dims = DimsSpec::new(vec![d, d])?;
    let mut mat = DMatrix::<Complex64>::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            mat[(i * d + j, j * d + i)] = C_ONE;
        }
    }
    Operator::new(mat, dims)
}

/// Partial matrix element over one subsystem: (1 x <row|) X (1 x |col>), with
/// the bra/ket acting on subsystem `subsystem` and identities elsewhere.
/// The result lives on the remaining subsystems in original order.
pub fn partial_matrix_element(
    x: &Operator,
    subsystem: usize,
    row: usize,
    col: usize,
) -> Result<Operator> {
    let dims = x.dims.dims();
    let n = dims.len();
    if subsystem >= n {
        return Err(Error::InvalidSubsystem {
            index: subsystem,
            count: n,
        });
    }
    let dk = dims[subsystem];
    if row >= dk || col >= dk {
        return Err(Error::InvalidInput(format!(
            "bra/ket index out of range for subsystem of dimension {dk}"
        )));
    }
    let pre: usize = dims[..subsystem].iter().product();
    let post: usize = dims[subsystem + 1..].iter().product();
    let rest: Vec<usize> = dims[..subsystem]
        .iter()
        .chain(dims[subsystem + 1..].iter())
        .copied()
        .collect();
    let out_dims = if rest.is_empty() {
        DimsSpec::new(vec![1])?
    } else {
        DimsSpec::new(rest)?
    };
    let side = pre * post;
    let mut out = DMatrix::<Complex64>::zeros(side, side);
    for rp in 0..pre {
        for rq in 0..post {
            for cp in 0..pre {
                for cq in 0..post {
                    let src_r = (rp * dk + row) * post + rq;
                    let src_c = (cp * dk + col) * post + cq;
                    out[(rp * post + rq, cp * post + cq)] = x.mat[(src_r, src_c)];
                }
            }
        }
    }
    Operator::new(out, out_dims)
}

/// Embed an operator living on block `block` of the decomposed subsystem into
/// the full space, placing it at the block's contiguous index range with zeros
/// elsewhere. `spec` must be a single-subsystem spec with blocks.
pub fn embed_block(x: &Operator, spec: &DimsSpec, block: usize) -> Result<Operator> {
    let blocks = spec
        .blocks()
        .ok_or_else(|| Error::MissingBlocks("embed_block requires a block decomposition".into()))?;
    if spec.num_subsystems() != 1 {
        return Err(Error::InvalidDims(
            "embed_block expects a single-subsystem dims spec".into(),
        ));
    }
    if block >= blocks.sizes.len() {
        return Err(Error::InvalidBlock {
            index: block,
            count: blocks.sizes.len(),
        });
    }
    let size = blocks.sizes[block];
    if x.side() != size {
        return Err(Error::DimensionMismatch(format!(
            "operator side {} does not match block size {}",
            x.side(),
            size
        )));
    }
    let offset = spec.block_offset(block)?;
    let d = spec.total_dim();
    let mut mat = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..size {
        for j in 0..size {
            mat[(offset + i, offset + j)] = x.mat[(i, j)];
        }
    }
    Operator::new(mat, DimsSpec::new(vec![d])?)
}

/// Projector onto block `block` of the decomposed subsystem, as an operator on
/// the full (single-subsystem) space.
pub fn block_projector(spec: &DimsSpec, block: usize) -> Result<Operator> {
    let blocks = spec
        .blocks()
        .ok_or_else(|| Error::MissingBlocks("block_projector requires blocks".into()))?;
    let size = blocks.sizes[block];
    embed_block(&Operator::identity(DimsSpec::scalar(size)?), spec, block)
}

/// Spectral data of a Hermitian operator: grouped eigenvalues (descending) and
/// the orthogonal projectors onto the corresponding eigenspaces.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<Operator>,
    pub grouping_tol: f64,
}

impl EigenSystem {
    /// Multiplicity of each grouped eigenvalue.
    pub fn multiplicities(&self) -> Vec<usize> {
        self.projectors
            .iter()
            .map(|p| p.trace().re.round() as usize)
            .collect()
    }

    /// Reconstruct sum_i lambda_i P_i.
    pub fn reconstruct(&self) -> Operator {
        let mut acc = Operator::zeros(self.projectors[0].dims().clone());
        for (l, p) in self.eigenvalues.iter().zip(&self.projectors) {
            acc = acc
                .add(&p.scale(Complex64::new(*l, 0.0)))
                .expect("same shape");
        }
        acc
    }
}

/// Spectral decomposition of a Hermitian operator. Eigenvalues within
/// `grouping_tol` of each other are merged into a single eigenspace.
pub fn spectral_decomposition(h: &Operator, grouping_tol: f64) -> Result<EigenSystem> {
    let dev = h.hermiticity_deviation();
    if dev > HERMITICITY_TOL {
        return Err(Error::NonHermitian {
            deviation: dev,
            tolerance: HERMITICITY_TOL,
        });
    }
    let herm = h.hermitian_part();
    let eig = herm
        .mat
        .clone()
        .symmetric_eigen();
    let d = h.side();
    // Sort eigenpairs descending by eigenvalue.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut eigenvalues = Vec::new();
    let mut projectors = Vec::new();
    let mut idx = 0;
    while idx < d {
        let mut members = vec![order[idx]];
        let mut last = eig.eigenvalues[order[idx]];
        let mut sum = last;
        idx += 1;
        while idx < d && (last - eig.eigenvalues[order[idx]]).abs() <= grouping_tol {
            last = eig.eigenvalues[order[idx]];
            sum += last;
            members.push(order[idx]);
            idx += 1;
        }
        let mut proj = DMatrix::<Complex64>::zeros(d, d);
        for &m in &members {
            let v = eig.eigenvectors.column(m);
            for r in 0..d {
                for c in 0..d {
                    proj[(r, c)] += v[r] * v[c].conj();
                }
            }
        }
        eigenvalues.push(sum / members.len() as f64);
        projectors.push(Operator::new(proj, h.dims().clone())?);
    }
    Ok(EigenSystem {
        eigenvalues,
        projectors,
        grouping_tol,
    })
}

/// Hermitian PSD square root via spectral decomposition. Eigenvalues below
/// `-tol` are rejected; small negative rounding noise is clamped to zero.
pub fn psd_sqrt(rho: &Operator, tol: f64) -> Result<Operator> {
    let eig = spectral_decomposition(rho, 0.0)?;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    let mut acc = Operator::zeros(rho.dims().clone());
    for (l, p) in eig.eigenvalues.iter().zip(&eig.projectors) {
        let root = l.max(0.0).sqrt();
        acc = acc.add(&p.scale(Complex64::new(root, 0.0)))?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(entries: &[f64]) -> Operator {
        let d = entries.len();
        Operator::from_fn(DimsSpec::scalar(d).unwrap(), |i, j| {
            if i == j {
                c(entries[i], 0.0)
            } else {
                C_ZERO
            }
        })
        .unwrap()
    }

    #[test]
    fn kron_identity_case() {
        let i2 = Operator::identity(DimsSpec::scalar(2).unwrap());
        let out = kron(&i2, &i2);
        assert_eq!(out.side(), 4);
        assert_eq!(out.dims().dims(), &[2, 2]);
        let i4 = DMatrix::<Complex64>::identity(4, 4);
        assert!(out
            .mat()
            .iter()
            .zip(i4.iter())
            .all(|(a, b)| (a - b).norm() == 0.0));
    }

    #[test]
    fn kron_diagonal_arithmetic() {
        let x = diag(&[1.0, 2.0]);
        let y = diag(&[3.0, 4.0]);
        let out = kron(&x, &y);
        let expect = [3.0, 4.0, 6.0, 8.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((out.entry(k, k) - c(*e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn kron_block_placement() {
        // |0><0| (x) X places X in the top-left 2x2 block in basis order
        // |00>, |01>, |10>, |11|.
        let p0 = Operator::basis_projector(2, 0).unwrap();
        let x = Operator::from_fn(DimsSpec::scalar(2).unwrap(), |i, j| {
            if i != j {
                C_ONE
            } else {
                C_ZERO
            }
        })
        .unwrap();
        let out = kron(&p0, &x);
        assert_eq!(out.entry(0, 1), C_ONE);
        assert_eq!(out.entry(1, 0), C_ONE);
        assert_eq!(out.entry(2, 3), C_ZERO);
        assert_eq!(out.entry(0, 0), C_ZERO);
    }

    #[test]
    fn kron_associativity_exact_layout() {
        let x = diag(&[1.0, 2.0]);
        let y = Operator::pure_state(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let z = diag(&[0.5, -0.25, 3.0]);
        let a = kron(&kron(&x, &y), &z);
        let b = kron(&x, &kron(&y, &z));
        assert_eq!(a.mat(), b.mat());
    }

    #[test]
    fn partial_trace_product_state() {
        let rho = diag(&[0.25, 0.75]);
        let sigma = diag(&[0.5, 0.5]);
        let joint = kron(&rho, &sigma);
        let back = partial_trace(&joint, &[1]).unwrap();
        assert!(back.max_abs_diff(&rho) < 1e-15);
        let other = partial_trace(&joint, &[0]).unwrap();
        assert!(other.max_abs_diff(&sigma) < 1e-15);
    }

    #[test]
    fn partial_trace_of_swap_is_identity() {
        // Tr_A F for d = 2 gives the identity on the remaining factor.
        let f = swap_operator(2).unwrap();
        let out = partial_trace(&f, &[0]).unwrap();
        let i2 = Operator::identity(DimsSpec::scalar(2).unwrap());
        assert!(out.max_abs_diff(&i2) < 1e-15);
    }

    #[test]
    fn partial_trace_everything() {
        let rho = diag(&[0.25, 0.75]);
        let sigma = diag(&[0.5, 0.5]);
        let joint = kron(&rho, &sigma);
        let all = partial_trace(&joint, &[0, 1]).unwrap();
        assert_eq!(all.side(), 1);
        assert!((all.entry(0, 0) - C_ONE).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_commutes_over_disjoint_subsystems() {
        let a = diag(&[0.3, 0.7]);
        let b = diag(&[0.9, 0.1]);
        let e = diag(&[0.6, 0.4]);
        let x = kron(&kron(&a, &b), &e);
        let one = partial_trace(&partial_trace(&x, &[2]).unwrap(), &[1]).unwrap();
        let two = partial_trace(&x, &[1, 2]).unwrap();
        assert!(one.max_abs_diff(&two) < 1e-15);
    }

    #[test]
    fn swap_basics() {
        let f1 = swap_operator(1).unwrap();
        assert_eq!(f1.side(), 1);
        assert_eq!(f1.entry(0, 0), C_ONE);

        let f = swap_operator(2).unwrap();
        // Permutation exchanging basis indices 1 and 2.
        for (r, c_) in [(0usize, 0usize), (1, 2), (2, 1), (3, 3)] {
            assert_eq!(f.entry(r, c_), C_ONE);
        }
        let sq = f.matmul(&f).unwrap();
        let i4 = Operator::identity(DimsSpec::new(vec![2, 2]).unwrap());
        assert!(sq.max_abs_diff(&i4) < 1e-15);
        assert!(f.hermiticity_deviation() < 1e-15);
        assert!((f.trace() - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn swap_conjugation_exchanges_factors() {
        let rho = Operator::pure_state(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let sigma = diag(&[0.2, 0.8]);
        let f = swap_operator(2).unwrap();
        let lhs = f.matmul(&kron(&rho, &sigma)).unwrap().matmul(&f).unwrap();
        let rhs = kron(&sigma, &rho);
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn spectral_diag() {
        let h = diag(&[0.75, 0.25]);
        let eig = spectral_decomposition(&h, DEFAULT_GROUPING_TOL).unwrap();
        assert_eq!(eig.eigenvalues.len(), 2);
        assert!((eig.eigenvalues[0] - 0.75).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 0.25).abs() < 1e-12);
        let p0 = Operator::basis_projector(2, 0).unwrap();
        assert!(eig.projectors[0].max_abs_diff(&p0) < 1e-12);
    }

    #[test]
    fn spectral_degenerate_merge() {
        let h = Operator::maximally_mixed(2).unwrap();
        let eig = spectral_decomposition(&h, 1e-8).unwrap();
        assert_eq!(eig.eigenvalues.len(), 1);
        assert!((eig.eigenvalues[0] - 0.5).abs() < 1e-12);
        let i2 = Operator::identity(DimsSpec::scalar(2).unwrap());
        assert!(eig.projectors[0].max_abs_diff(&i2) < 1e-9);
    }

    #[test]
    fn spectral_pauli_x() {
        let x = Operator::from_fn(DimsSpec::scalar(2).unwrap(), |i, j| {
            if i != j {
                C_ONE
            } else {
                C_ZERO
            }
        })
        .unwrap();
        let eig = spectral_decomposition(&x, DEFAULT_GROUPING_TOL).unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] + 1.0).abs() < 1e-12);
        let plus = Operator::pure_state(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let minus = Operator::pure_state(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!(eig.projectors[0].max_abs_diff(&plus) < 1e-12);
        assert!(eig.projectors[1].max_abs_diff(&minus) < 1e-12);
    }

    #[test]
    fn spectral_rejects_non_hermitian() {
        let m = Operator::elementary(2, 0, 1).unwrap();
        assert!(matches!(
            spectral_decomposition(&m, 1e-8),
            Err(Error::NonHermitian { .. })
        ));
    }

    #[test]
    fn embed_block_examples() {
        let spec = DimsSpec::scalar(3).unwrap().with_blocks(0, vec![2, 1]).unwrap();
        let i2 = Operator::identity(DimsSpec::scalar(2).unwrap());
        let out = embed_block(&i2, &spec, 0).unwrap();
        let expect = diag(&[1.0, 1.0, 0.0]);
        assert!(out.max_abs_diff(&expect) < 1e-15);

        let spec2 = DimsSpec::scalar(3).unwrap().with_blocks(0, vec![1, 2]).unwrap();
        let pi2 = Operator::maximally_mixed(2).unwrap();
        let out2 = embed_block(&pi2, &spec2, 1).unwrap();
        let expect2 = diag(&[0.0, 0.5, 0.5]);
        assert!(out2.max_abs_diff(&expect2) < 1e-15);
    }

    #[test]
    fn embed_block_size_mismatch() {
        let spec = DimsSpec::scalar(3).unwrap().with_blocks(0, vec![2, 1]).unwrap();
        let i2 = Operator::identity(DimsSpec::scalar(2).unwrap());
        assert!(embed_block(&i2, &spec, 1).is_err());
    }

    #[test]
    fn vec_index_examples() {
        assert_eq!(vec_index(0, 0, 2).unwrap(), 0);
        assert_eq!(vec_index(0, 1, 2).unwrap(), 1);
        assert_eq!(vec_index(1, 0, 2).unwrap(), 2);
        assert!(vec_index(2, 0, 2).is_err());
    }

    #[test]
    fn partial_matrix_element_extracts_blocks() {
        let a = diag(&[1.0, 2.0]);
        let b = Operator::from_fn(DimsSpec::scalar(2).unwrap(), |i, j| {
            c((2 * i + j) as f64, 0.0)
        })
        .unwrap();
        let joint = kron(&a, &b);
        // (1 x <0|) (a x b) (1 x |1>) = b[0,1] * a
        let got = partial_matrix_element(&joint, 1, 0, 1).unwrap();
        let expect = a.scale(b.entry(0, 1));
        assert!(got.max_abs_diff(&expect) < 1e-15);
        // Contracting the first factor instead picks out a's entries.
        let got2 = partial_matrix_element(&joint, 0, 1, 1).unwrap();
        let expect2 = b.scale(a.entry(1, 1));
        assert!(got2.max_abs_diff(&expect2) < 1e-15);
    }
}
