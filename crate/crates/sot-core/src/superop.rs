//! Superoperator plumbing: row-major vectorization, column-wise assembly of
//! linear maps between operator spaces, application to one subsystem of a
//! composite operator, Hilbert-Schmidt adjoints, and guarded inversion.
//!
//! A linear map L from operators on C^{d_in} to operators on an output space
//! of total dimension d_out is stored as a (d_out^2, d_in^2) matrix whose
//! column `vec_index(i, j, d_in)` is vec(L(|i><j|)), with vec taken row-major.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{DimsSpec, Operator, C_ZERO};

/// Row-major vectorization: vec(X)[i*d + j] = X[i, j].
pub fn vec_op(x: &Operator) -> DVector<Complex64> {
    let d = x.side();
    DVector::from_fn(d * d, |k, _| x.entry(k / d, k % d))
}

/// Inverse of [`vec_op`] onto the given dims.
pub fn unvec_op(v: &DVector<Complex64>, dims: DimsSpec) -> Result<Operator> {
    let d = dims.total_dim();
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "vector length {} does not match dims {:?}",
            v.len(),
            dims.dims()
        )));
    }
    Operator::from_fn(dims, |i, j| v[i * d + j])
}

/// Assemble the matrix of a linear map by evaluating it on the elementary
/// basis |i><j| of a `d_in`-dimensional system.
pub fn assemble(
    d_in: usize,
    out_side: usize,
    mut map: impl FnMut(usize, usize) -> Result<Operator>,
) -> Result<DMatrix<Complex64>> {
    let mut mat = DMatrix::<Complex64>::zeros(out_side * out_side, d_in * d_in);
    for i in 0..d_in {
        for j in 0..d_in {
            let col = map(i, j)?;
            if col.side() != out_side {
                return Err(Error::DimensionMismatch(format!(
                    "map output side {} does not match declared {}",
                    col.side(),
                    out_side
                )));
            }
            let v = vec_op(&col);
            mat.set_column(i * d_in + j, &v);
        }
    }
    Ok(mat)
}

/// Apply a superoperator to a whole operator.
pub fn apply(s: &DMatrix<Complex64>, x: &Operator, out_dims: DimsSpec) -> Result<Operator> {
    let d_in = x.side();
    if s.ncols() != d_in * d_in {
        return Err(Error::DimensionMismatch(format!(
            "superoperator expects input side^2 = {}, operator has side {}",
            s.ncols(),
            d_in
        )));
    }
    let out = s * vec_op(x);
    unvec_op(&out, out_dims)
}

/// Apply a linear map to subsystem `subsystem` of a composite operator. The
/// map takes operators on that subsystem to operators on `out_dims`, which
/// replace the subsystem in place (so the output may have more factors than
/// the input). All other factors are untouched.
pub fn apply_on_subsystem(
    s: &DMatrix<Complex64>,
    x: &Operator,
    subsystem: usize,
    out_dims: &[usize],
) -> Result<Operator> {
    let dims = x.dims().dims();
    let n = dims.len();
    if subsystem >= n {
        return Err(Error::InvalidSubsystem {
            index: subsystem,
            count: n,
        });
    }
    let dk = dims[subsystem];
    if s.ncols() != dk * dk {
        return Err(Error::DimensionMismatch(format!(
            "superoperator input dimension {} does not match subsystem side {}",
            s.ncols(),
            dk
        )));
    }
    let d_out: usize = out_dims.iter().product();
    if s.nrows() != d_out * d_out {
        return Err(Error::DimensionMismatch(format!(
            "superoperator output dimension {} does not match out dims {:?}",
            s.nrows(),
            out_dims
        )));
    }
    let pre: usize = dims[..subsystem].iter().product();
    let post: usize = dims[subsystem + 1..].iter().product();

    let mut new_dims: Vec<usize> = dims[..subsystem].to_vec();
    new_dims.extend_from_slice(out_dims);
    new_dims.extend_from_slice(&dims[subsystem + 1..]);

    let side = pre * d_out * post;
    let mut out = DMatrix::<Complex64>::zeros(side, side);
    for a in 0..dk {
        for ap in 0..dk {
            let col = s.column(a * dk + ap);
            // K = L(|a><a'|) as a d_out x d_out block.
            for w in 0..d_out {
                for wp in 0..d_out {
                    let kval = col[w * d_out + wp];
                    if kval == C_ZERO {
                        continue;
                    }
                    for p in 0..pre {
                        for pp in 0..pre {
                            for q in 0..post {
                                for qp in 0..post {
                                    let src_r = (p * dk + a) * post + q;
                                    let src_c = (pp * dk + ap) * post + qp;
                                    let xval = x.mat()[(src_r, src_c)];
                                    if xval == C_ZERO {
                                        continue;
                                    }
                                    let dst_r = (p * d_out + w) * post + q;
                                    let dst_c = (pp * d_out + wp) * post + qp;
                                    out[(dst_r, dst_c)] += kval * xval;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Operator::new(out, DimsSpec::new(new_dims)?)
}

/// Matrix of the Hilbert-Schmidt adjoint L^dag in the elementary basis.
pub fn hs_adjoint(s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    s.adjoint()
}

/// Matrix of L^# = dag . L^dag . dag, the conjugation of the HS adjoint by the
/// operator dagger. Requires a square superoperator (endomorphism).
pub fn sharp(s: &DMatrix<Complex64>, d: usize) -> Result<DMatrix<Complex64>> {
    if s.nrows() != d * d || s.ncols() != d * d {
        return Err(Error::DimensionMismatch(
            "sharp requires a square superoperator on one system".into(),
        ));
    }
    let adj = hs_adjoint(s);
    let dims = DimsSpec::scalar(d)?;
    assemble(d, d, |i, j| {
        // L^#(|i><j|) = (L^dag(|j><i|))^dag
        let col = adj.column(j * d + i).clone_owned();
        let inner = unvec_op(&col, dims.clone())?;
        Ok(inner.adjoint())
    })
}

/// Invert a square superoperator, rejecting ill-conditioned inputs. The
/// condition estimate is the product of Frobenius norms of the matrix and its
/// inverse.
pub fn invert(s: &DMatrix<Complex64>, condition_limit: f64) -> Result<DMatrix<Complex64>> {
    let inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularSuperop("matrix is singular".into()))?;
    let cond = frobenius(s) * frobenius(&inv);
    if cond > condition_limit {
        return Err(Error::IllConditioned {
            condition: cond,
            limit: condition_limit,
        });
    }
    Ok(inv)
}

fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Superoperator of left multiplication X -> K X.
pub fn left_mult(k: &Operator) -> Result<DMatrix<Complex64>> {
    let d = k.side();
    assemble(d, d, |i, j| k.matmul(&Operator::elementary(d, i, j)?))
}

/// Superoperator of right multiplication X -> X K.
pub fn right_mult(k: &Operator) -> Result<DMatrix<Complex64>> {
    let d = k.side();
    assemble(d, d, |i, j| Operator::elementary(d, i, j)?.matmul(k))
}

/// Maximum absolute entry difference between two superoperator matrices.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
