//! Quantum channels as superoperators: construction from Kraus operators,
//! classical stochastic matrices, block dephasing, limitations to direct-sum
//! blocks, seeded random sampling, and the Jamiolkowski channel state.
//!
//! The channel state used throughout is D[E] = (id (x) E)(F) = sum_ij
//! |i><j| (x) E(|j><i|). This is the basis-dependent Jamiolkowski form, not
//! the Choi matrix sum_ij |i><j| (x) E(|i><j|); the two differ by a partial
//! transpose on the first factor. The Choi matrix appears only internally, to
//! decide complete positivity.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operator::{
    block_projector, spectral_decomposition, swap_operator, DimsSpec, Operator, C_ONE, C_ZERO,
};
use crate::superop;

/// Tolerance for the trace-preservation flag and Kraus consistency.
pub const TP_TOL: f64 = 1e-10;
/// Slack on the Kraus bound sum K^dag K <= 1; trace non-increasing maps within
/// this slack are accepted.
pub const KRAUS_BOUND_TOL: f64 = 1e-9;
/// Eigenvalue slack when testing the Choi matrix for positivity.
pub const CP_TOL: f64 = 1e-10;

/// Linear map between operator spaces stored as a superoperator matrix, with
/// computed CP/TP flags and an optional Kraus presentation. Trace
/// non-increasing maps are first-class channels (`is_tp = false`).
#[derive(Debug, Clone)]
pub struct Channel {
    superop: DMatrix<Complex64>,
    in_dims: DimsSpec,
    out_dims: DimsSpec,
    kraus: Option<Vec<DMatrix<Complex64>>>,
    is_cp: bool,
    is_tp: bool,
}

impl Channel {
    /// Build a channel from Kraus matrices (shape d_out x d_in). The map must
    /// be trace non-increasing: sum K^dag K <= 1 within [`KRAUS_BOUND_TOL`].
    pub fn from_kraus(
        ops: Vec<DMatrix<Complex64>>,
        in_dims: DimsSpec,
        out_dims: DimsSpec,
    ) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidInput("empty Kraus list".into()));
        }
        let d_in = in_dims.total_dim();
        let d_out = out_dims.total_dim();
        for k in &ops {
            if k.nrows() != d_out || k.ncols() != d_in {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator is {}x{}, expected {}x{}",
                    k.nrows(),
                    k.ncols(),
                    d_out,
                    d_in
                )));
            }
        }
        let mut gram = DMatrix::<Complex64>::zeros(d_in, d_in);
        for k in &ops {
            gram += k.adjoint() * k;
        }
        let gram_op = Operator::new(gram, DimsSpec::scalar(d_in)?)?.hermitian_part();
        let eig = spectral_decomposition(&gram_op, 0.0)?;
        let max_eig = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max_eig > 1.0 + KRAUS_BOUND_TOL {
            return Err(Error::KrausBound {
                excess: max_eig - 1.0,
            });
        }
        let identity = Operator::identity(DimsSpec::scalar(d_in)?);
        let is_tp = gram_op.max_abs_diff(&identity) <= TP_TOL;
        let mat = superop::assemble(d_in, d_out, |i, j| {
            let e_ij = rect_elementary(d_in, d_in, i, j);
            let mut acc = DMatrix::<Complex64>::zeros(d_out, d_out);
            for k in &ops {
                acc += k * &e_ij * k.adjoint();
            }
            Operator::new(acc, out_dims.clone())
        })?;
        Ok(Channel {
            superop: mat,
            in_dims,
            out_dims,
            kraus: Some(ops),
            is_cp: true,
            is_tp,
        })
    }

    /// Build a channel from an explicit superoperator matrix; the CP and TP
    /// flags are computed from it.
    pub fn from_superop(
        superop: DMatrix<Complex64>,
        in_dims: DimsSpec,
        out_dims: DimsSpec,
    ) -> Result<Self> {
        let d_in = in_dims.total_dim();
        let d_out = out_dims.total_dim();
        if superop.nrows() != d_out * d_out || superop.ncols() != d_in * d_in {
            return Err(Error::DimensionMismatch(format!(
                "superoperator shape ({}, {}) does not match dims ({}^2, {}^2)",
                superop.nrows(),
                superop.ncols(),
                d_out,
                d_in
            )));
        }
        let mut ch = Channel {
            superop,
            in_dims,
            out_dims,
            kraus: None,
            is_cp: false,
            is_tp: false,
        };
        ch.is_tp = ch.compute_is_tp();
        ch.is_cp = ch.compute_is_cp();
        Ok(ch)
    }

    /// Identity channel on the given dims.
    pub fn identity(dims: DimsSpec) -> Self {
        let d = dims.total_dim();
        Channel {
            superop: DMatrix::identity(d * d, d * d),
            in_dims: dims.clone(),
            out_dims: dims,
            kraus: Some(vec![DMatrix::identity(d, d)]),
            is_cp: true,
            is_tp: true,
        }
    }

    /// Conjugation map X -> K X K^dag for a single (not necessarily unitary)
    /// square operator; trace non-increasing whenever K^dag K <= 1.
    pub fn conjugation(k: &Operator) -> Result<Self> {
        Channel::from_kraus(
            vec![k.mat().clone()],
            DimsSpec::scalar(k.side())?,
            DimsSpec::scalar(k.side())?,
        )
    }

    /// Constant map rho -> Tr[rho] sigma.
    pub fn state_preparation(d_in: usize, sigma: &Operator) -> Result<Self> {
        let in_dims = DimsSpec::scalar(d_in)?;
        let d_out = sigma.side();
        let mat = superop::assemble(d_in, d_out, |i, j| {
            if i == j {
                Ok(sigma.clone())
            } else {
                Ok(Operator::zeros(sigma.dims().clone()))
            }
        })?;
        Channel::from_superop(mat, in_dims, sigma.dims().clone())
    }

    pub fn superop(&self) -> &DMatrix<Complex64> {
        &self.superop
    }

    pub fn in_dims(&self) -> &DimsSpec {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &DimsSpec {
        &self.out_dims
    }

    pub fn in_dim(&self) -> usize {
        self.in_dims.total_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.out_dims.total_dim()
    }

    pub fn kraus(&self) -> Option<&[DMatrix<Complex64>]> {
        self.kraus.as_deref()
    }

    pub fn is_cp(&self) -> bool {
        self.is_cp
    }

    pub fn is_tp(&self) -> bool {
        self.is_tp
    }

    fn compute_is_tp(&self) -> bool {
        let d_in = self.in_dim();
        let d_out = self.out_dim();
        let mut worst: f64 = 0.0;
        for i in 0..d_in {
            for j in 0..d_in {
                let col = self.superop.column(i * d_in + j);
                let mut tr = C_ZERO;
                for b in 0..d_out {
                    tr += col[b * d_out + b];
                }
                let expect = if i == j { C_ONE } else { C_ZERO };
                worst = worst.max((tr - expect).norm());
            }
        }
        worst <= TP_TOL
    }

    fn compute_is_cp(&self) -> bool {
        let choi = self.choi_matrix();
        if choi.hermiticity_deviation() > CP_TOL {
            return false;
        }
        match spectral_decomposition(&choi.hermitian_part(), 0.0) {
            Ok(eig) => {
                let scale = 1.0 + choi.max_abs();
                eig.eigenvalues.iter().all(|&l| l >= -CP_TOL * scale)
            }
            Err(_) => false,
        }
    }

    /// Choi matrix sum_ij |i><j| (x) E(|i><j|); positive iff the map is CP.
    pub fn choi_matrix(&self) -> Operator {
        let d_in = self.in_dim();
        let d_out = self.out_dim();
        let side = d_in * d_out;
        let mut mat = DMatrix::<Complex64>::zeros(side, side);
        for i in 0..d_in {
            for j in 0..d_in {
                let col = self.superop.column(i * d_in + j);
                for b in 0..d_out {
                    for bp in 0..d_out {
                        mat[(i * d_out + b, j * d_out + bp)] = col[b * d_out + bp];
                    }
                }
            }
        }
        Operator::new(mat, DimsSpec::new(vec![d_in, d_out]).expect("valid dims"))
            .expect("choi shape is consistent")
    }

    /// Apply the channel to an operator on the full input space.
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        if x.side() != self.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "channel expects input side {}, got {}",
                self.in_dim(),
                x.side()
            )));
        }
        superop::apply(&self.superop, x, self.out_dims.clone())
    }

    /// Apply the channel to subsystem `subsystem` of a composite operator.
    pub fn apply_to_subsystem(&self, x: &Operator, subsystem: usize) -> Result<Operator> {
        superop::apply_on_subsystem(&self.superop, x, subsystem, self.out_dims.dims())
    }

    /// Composition self . other (other acts first); the superoperator is the
    /// matrix product.
    pub fn compose(&self, other: &Channel) -> Result<Channel> {
        if other.out_dim() != self.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose: inner output {} != outer input {}",
                other.out_dim(),
                self.in_dim()
            )));
        }
        let mat = &self.superop * &other.superop;
        let kraus = match (&self.kraus, &other.kraus) {
            (Some(outer), Some(inner)) => {
                let mut prods = Vec::with_capacity(outer.len() * inner.len());
                for kf in outer {
                    for ke in inner {
                        prods.push(kf * ke);
                    }
                }
                Some(prods)
            }
            _ => None,
        };
        let mut ch = Channel {
            superop: mat,
            in_dims: other.in_dims.clone(),
            out_dims: self.out_dims.clone(),
            kraus,
            is_cp: false,
            is_tp: false,
        };
        ch.is_tp = ch.compute_is_tp();
        ch.is_cp = if self.is_cp && other.is_cp {
            true
        } else {
            ch.compute_is_cp()
        };
        Ok(ch)
    }

    /// Jamiolkowski channel state D[E] = sum_ij |i><j| (x) E(|j><i|), a
    /// bipartite operator on input (x) output. For a trace-preserving channel
    /// the partial trace over the output factor is the identity.
    pub fn jamiolkowski_state(&self) -> Result<Operator> {
        let d_in = self.in_dim();
        let d_out = self.out_dim();
        let side = d_in * d_out;
        let mut mat = DMatrix::<Complex64>::zeros(side, side);
        for i in 0..d_in {
            for j in 0..d_in {
                let col = self.superop.column(j * d_in + i); // E(|j><i|)
                for b in 0..d_out {
                    for bp in 0..d_out {
                        mat[(i * d_out + b, j * d_out + bp)] = col[b * d_out + bp];
                    }
                }
            }
        }
        Operator::new(mat, DimsSpec::new(vec![d_in, d_out])?)
    }

    /// Inverse of [`Channel::jamiolkowski_state`]: read the channel back off a
    /// bipartite operator, declaring the input dimension.
    pub fn from_jamiolkowski(j: &Operator, in_dim: usize) -> Result<Channel> {
        let side = j.side();
        if in_dim == 0 || side % in_dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "side {side} is not divisible by declared input dimension {in_dim}"
            )));
        }
        let d_out = side / in_dim;
        let mat = superop::assemble(in_dim, d_out, |p, q| {
            // E(|p><q|) sits in block (row q, col p) of the channel state.
            let mut block = DMatrix::<Complex64>::zeros(d_out, d_out);
            for b in 0..d_out {
                for bp in 0..d_out {
                    block[(b, bp)] = j.entry(q * d_out + b, p * d_out + bp);
                }
            }
            Operator::new(block, DimsSpec::scalar(d_out)?)
        })?;
        Channel::from_superop(mat, DimsSpec::scalar(in_dim)?, DimsSpec::scalar(d_out)?)
    }

    /// Classical channel from a column-stochastic matrix `p` (rows indexed by
    /// the output symbol): E(rho) = sum_{x,y} P(y|x) <x|rho|x> |y><y|.
    pub fn classical(p: &[Vec<f64>]) -> Result<Channel> {
        let d_out = p.len();
        if d_out == 0 {
            return Err(Error::NotStochastic("empty matrix".into()));
        }
        let d_in = p[0].len();
        if d_in == 0 || p.iter().any(|row| row.len() != d_in) {
            return Err(Error::NotStochastic("ragged or empty rows".into()));
        }
        for x in 0..d_in {
            let mut col_sum = 0.0;
            for row in p {
                if row[x] < -1e-12 {
                    return Err(Error::NotStochastic(format!(
                        "negative entry {} in column {x}",
                        row[x]
                    )));
                }
                col_sum += row[x];
            }
            if (col_sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotStochastic(format!(
                    "column {x} sums to {col_sum}, expected 1"
                )));
            }
        }
        let mut kraus = Vec::new();
        for x in 0..d_in {
            for (y, row) in p.iter().enumerate() {
                let w = row[x].max(0.0).sqrt();
                if w == 0.0 {
                    continue;
                }
                let mut m = DMatrix::<Complex64>::zeros(d_out, d_in);
                m[(y, x)] = Complex64::new(w, 0.0);
                kraus.push(m);
            }
        }
        Channel::from_kraus(kraus, DimsSpec::scalar(d_in)?, DimsSpec::scalar(d_out)?)
    }

    /// Block dephasing sum_i Ad_{P_i} for the direct-sum decomposition carried
    /// by `spec`; idempotent and trace preserving.
    pub fn dephasing(spec: &DimsSpec) -> Result<Channel> {
        let blocks = spec.blocks().ok_or_else(|| {
            Error::MissingBlocks("dephasing channel requires a block decomposition".into())
        })?;
        let projectors: Vec<Operator> = (0..blocks.sizes.len())
            .map(|i| block_projector(spec, i))
            .collect::<Result<_>>()?;
        Self::dephasing_with_projectors(&projectors)
    }

    /// Block dephasing for an arbitrary family of orthogonal projectors that
    /// resolve the identity.
    pub fn dephasing_with_projectors(projectors: &[Operator]) -> Result<Channel> {
        if projectors.is_empty() {
            return Err(Error::MissingBlocks("no projectors given".into()));
        }
        let dims = DimsSpec::scalar(projectors[0].side())?;
        Channel::from_kraus(
            projectors.iter().map(|p| p.mat().clone()).collect(),
            dims.clone(),
            dims,
        )
    }

    /// Limitation of the channel to block `block` of the decomposition:
    /// E . Ad_{P_block}; trace non-increasing in general.
    pub fn limitation(&self, spec: &DimsSpec, block: usize) -> Result<Channel> {
        let p = block_projector(spec, block)?;
        self.limitation_to_projector(&p)
    }

    /// Limitation E . Ad_Q for an arbitrary subspace projector Q.
    pub fn limitation_to_projector(&self, q: &Operator) -> Result<Channel> {
        if q.side() != self.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "projector side {} does not match channel input {}",
                q.side(),
                self.in_dim()
            )));
        }
        self.compose(&Channel::conjugation(q)?)
    }
}

fn rect_elementary(rows: usize, cols: usize, i: usize, j: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::zeros(rows, cols);
    m[(i, j)] = C_ONE;
    m
}

/// Hilbert-Schmidt random density matrix G G^dag / Tr[G G^dag], full rank
/// almost surely; deterministic for a fixed seed.
pub fn random_state(d: usize, seed: u64) -> Result<Operator> {
    if d == 0 {
        return Err(Error::InvalidDims("state dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = complex_gaussian(d, d, &mut rng);
    let gg = &g * g.adjoint();
    let tr: Complex64 = gg.diagonal().iter().sum();
    Operator::new(gg / tr, DimsSpec::scalar(d)?)
}

/// Random CPTP channel via a seeded Gaussian isometry V: A -> B (x) Env with
/// orthonormalized columns; E(rho) = Tr_Env[V rho V^dag]. The Kraus operators
/// are the environment slices of V.
pub fn random_channel(d_in: usize, d_out: usize, env_dim: usize, seed: u64) -> Result<Channel> {
    if d_in == 0 || d_out == 0 || env_dim == 0 {
        return Err(Error::InvalidDims("channel dimensions must be >= 1".into()));
    }
    if d_out * env_dim < d_in {
        return Err(Error::InvalidDims(format!(
            "no isometry from dimension {d_in} into {d_out} x {env_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = complex_gaussian(d_out * env_dim, d_in, &mut rng);
    let v = orthonormal_columns(g);
    let mut kraus = Vec::with_capacity(env_dim);
    for e in 0..env_dim {
        let mut k = DMatrix::<Complex64>::zeros(d_out, d_in);
        for b in 0..d_out {
            for a in 0..d_in {
                k[(b, a)] = v[(b * env_dim + e, a)];
            }
        }
        kraus.push(k);
    }
    Channel::from_kraus(kraus, DimsSpec::scalar(d_in)?, DimsSpec::scalar(d_out)?)
}

/// Haar-distributed random unitary (QR of a complex Gaussian with phase fix).
pub fn haar_unitary(d: usize, seed: u64) -> Result<Operator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = complex_gaussian(d, d, &mut rng);
    Operator::new(orthonormal_columns(g), DimsSpec::scalar(d)?)
}

fn complex_gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * inv_sqrt2, im * inv_sqrt2)
    })
}

/// Orthonormalize columns via QR, fixing phases so the result is Haar when the
/// input is Gaussian.
fn orthonormal_columns(g: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let cols = g.ncols();
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q.columns(0, cols).into_owned();
    for k in 0..cols {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            C_ONE
        };
        for i in 0..out.nrows() {
            out[(i, k)] *= phase;
        }
    }
    out
}

/// Maximally mixed output channel rho -> Tr[rho] pi_B.
pub fn depolarizing_to_mixed(d_in: usize, d_out: usize) -> Result<Channel> {
    Channel::state_preparation(d_in, &Operator::maximally_mixed(d_out)?)
}

/// The channel state of the identity channel is the swap gate.
pub fn identity_channel_state(d: usize) -> Result<Operator> {
    swap_operator(d)
}
