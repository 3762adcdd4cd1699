//! Acausal conditioning: the symmetric-bloom inverse, conditional states of
//! bipartite operators, belief propagation maps, and the round-trip identity
//! that reconstructs a bipartite state from its marginal and conditional.
//!
//! The symmetric-bloom inverse undoes M -> 1/2 {rho, M} on the support of
//! rho. Applied slice-wise to the first factor of a bipartite state it yields
//! the conditional state rho_{B|A}; contracting a state against the
//! conditional gives the belief propagation channel, whose channel state is
//! the conditional itself. Belief propagation maps need not be completely
//! positive: the maximally entangled input produces the transpose map.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::operator::{
    partial_trace, spectral_decomposition, DimsSpec, EigenSystem, Operator, DEFAULT_GROUPING_TOL,
};
use crate::star::StarProduct;
use crate::superop;

/// Relative singular cutoff: eigenvalue pairs whose sum falls below this
/// fraction of the largest eigenvalue of rho are treated as singular.
pub const SINGULAR_CUTOFF_FACTOR: f64 = 1e-10;

/// Components on singular eigenspace pairs larger than this are an error
/// rather than silently dropped.
pub const SINGULAR_COMPONENT_TOL: f64 = 1e-9;

/// Conditional state rho_{B|A} of a bipartite state together with the
/// marginal it was conditioned on.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalState {
    /// The bipartite conditional operator.
    pub operator: Operator,
    /// Marginal on the conditioning factor.
    pub marginal: Operator,
    /// Rank of the marginal at the grouping tolerance.
    pub support_dim: usize,
}

fn grouped_spectrum(rho: &Operator, grouping_tol: f64) -> Result<(EigenSystem, f64)> {
    let eig = spectral_decomposition(rho, grouping_tol)?;
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: max,
        });
    }
    Ok((eig, SINGULAR_CUTOFF_FACTOR * max))
}

/// Invert M -> 1/2 {rho, M} spectrally: with rho = sum_i l_i P_i the result
/// is sum_ij 2/(l_i + l_j) P_i sigma P_j over pairs with l_i + l_j above the
/// singular cutoff. Components of sigma connecting singular pairs raise an
/// error naming the offending eigenspace pairs.
pub fn symmetric_bloom_inverse(
    rho: &Operator,
    sigma: &Operator,
    grouping_tol: f64,
) -> Result<Operator> {
    if rho.side() != sigma.side() {
        return Err(Error::DimensionMismatch(format!(
            "rho side {} vs sigma side {}",
            rho.side(),
            sigma.side()
        )));
    }
    let (eig, cutoff) = grouped_spectrum(rho, grouping_tol)?;
    let mut out = Operator::zeros(sigma.dims().clone());
    let mut singular_pairs = Vec::new();
    for (i, (li, pi)) in eig.eigenvalues.iter().zip(&eig.projectors).enumerate() {
        for (j, (lj, pj)) in eig.eigenvalues.iter().zip(&eig.projectors).enumerate() {
            let weight = li + lj;
            let block = pi.matmul(sigma)?.matmul(pj)?;
            if weight <= cutoff {
                if block.max_abs() > SINGULAR_COMPONENT_TOL {
                    singular_pairs.push((i, j));
                }
                continue;
            }
            out = out.add(&block.scale(Complex64::new(2.0 / weight, 0.0)))?;
        }
    }
    if !singular_pairs.is_empty() {
        return Err(Error::SingularConditioning {
            detail: "sigma has components on kernel eigenspace pairs of rho".into(),
            pairs: singular_pairs,
            cutoff,
        });
    }
    Ok(out)
}

/// Conditional state of a bipartite state: apply the symmetric-bloom inverse
/// of the first marginal slice-wise on the first factor.
pub fn conditional_state(rho_ab: &Operator) -> Result<ConditionalState> {
    conditional_state_with_tol(rho_ab, DEFAULT_GROUPING_TOL)
}

pub fn conditional_state_with_tol(
    rho_ab: &Operator,
    grouping_tol: f64,
) -> Result<ConditionalState> {
    let dims = rho_ab.dims().dims();
    if dims.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "conditional state needs a bipartite operator, got dims {dims:?}"
        )));
    }
    let d_a = dims[0];
    let marginal = partial_trace(rho_ab, &[1])?;
    let (eig, cutoff) = grouped_spectrum(&marginal, grouping_tol)?;
    let support_dim: usize = eig
        .eigenvalues
        .iter()
        .zip(eig.multiplicities())
        .filter(|(l, _)| **l > cutoff)
        .map(|(_, m)| m)
        .sum();

    // Kernel-connected components of the joint state are an error; the
    // conditional is only defined on the support.
    let mut singular_pairs = Vec::new();
    for (i, (li, pi)) in eig.eigenvalues.iter().zip(&eig.projectors).enumerate() {
        for (j, (lj, pj)) in eig.eigenvalues.iter().zip(&eig.projectors).enumerate() {
            if li + lj > cutoff {
                continue;
            }
            let ident_b = Operator::identity(DimsSpec::scalar(dims[1])?);
            let left = crate::operator::kron(pi, &ident_b);
            let right = crate::operator::kron(pj, &ident_b);
            let block = left.matmul(rho_ab)?.matmul(&right)?;
            if block.max_abs() > SINGULAR_COMPONENT_TOL {
                singular_pairs.push((i, j));
            }
        }
    }
    if !singular_pairs.is_empty() {
        return Err(Error::SingularConditioning {
            detail: "the bipartite state has components on kernel eigenspace pairs of its marginal"
                .into(),
            pairs: singular_pairs,
            cutoff,
        });
    }
    let inverse_map = superop::assemble(d_a, d_a, |i, j| {
        symmetric_bloom_inverse_grouped(&eig, cutoff, &Operator::elementary(d_a, i, j)?)
    })?;
    let operator = superop::apply_on_subsystem(&inverse_map, rho_ab, 0, &[d_a])?;
    Ok(ConditionalState {
        operator,
        marginal,
        support_dim,
    })
}

fn symmetric_bloom_inverse_grouped(
    eig: &EigenSystem,
    cutoff: f64,
    sigma: &Operator,
) -> Result<Operator> {
    let mut out = Operator::zeros(sigma.dims().clone());
    for (li, pi) in eig.eigenvalues.iter().zip(&eig.projectors) {
        for (lj, pj) in eig.eigenvalues.iter().zip(&eig.projectors) {
            let weight = li + lj;
            if weight <= cutoff {
                continue;
            }
            let block = pi.matmul(sigma)?.matmul(pj)?;
            out = out.add(&block.scale(Complex64::new(2.0 / weight, 0.0)))?;
        }
    }
    Ok(out)
}

/// Belief propagation map of a bipartite state: the channel
/// sigma -> Tr_A[(sigma (x) 1) rho_{B|A}]. Trace preserving whenever the
/// conditioning marginal is full rank; not necessarily completely positive
/// (the `is_cp` flag of the returned channel records this).
pub fn belief_propagation(rho_ab: &Operator) -> Result<Channel> {
    let conditional = conditional_state(rho_ab)?;
    belief_propagation_from_conditional(&conditional)
}

pub fn belief_propagation_from_conditional(conditional: &ConditionalState) -> Result<Channel> {
    let dims = conditional.operator.dims().dims();
    let (d_a, d_b) = (dims[0], dims[1]);
    let cond = &conditional.operator;
    let mat = superop::assemble(d_a, d_b, |i, j| {
        let ident_b = Operator::identity(DimsSpec::scalar(d_b)?);
        let weighted =
            crate::operator::kron(&Operator::elementary(d_a, i, j)?, &ident_b).matmul(cond)?;
        partial_trace(&weighted, &[0])
    })?;
    Channel::from_superop(mat, DimsSpec::scalar(d_a)?, DimsSpec::scalar(d_b)?)
}

/// Round-trip deviation: reconstruct the bipartite state as the Jordan-product
/// star of its belief propagation map with its first marginal, and report the
/// max-entry distance from the original. Requires a full-rank conditioning
/// marginal; rank deficiency is reported as a singularity naming the kernel
/// eigenspaces.
pub fn roundtrip_check(rho_ab: &Operator) -> Result<f64> {
    let conditional = conditional_state(rho_ab)?;
    let d_a = rho_ab.dims().dims()[0];
    if conditional.support_dim < d_a {
        let (eig, cutoff) = grouped_spectrum(&conditional.marginal, DEFAULT_GROUPING_TOL)?;
        let pairs: Vec<(usize, usize)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| **l <= cutoff)
            .map(|(i, _)| (i, i))
            .collect();
        return Err(Error::SingularConditioning {
            detail: format!(
                "round trip requires a full-rank marginal (support {} of {})",
                conditional.support_dim, d_a
            ),
            pairs,
            cutoff,
        });
    }
    let bp = belief_propagation_from_conditional(&conditional)?;
    let rebuilt = StarProduct::fp().star(&bp, &conditional.marginal)?;
    Ok(rebuilt.max_abs_diff(rho_ab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{random_state, Channel};
    use crate::operator::kron;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(entries: &[f64]) -> Operator {
        let d = entries.len();
        Operator::from_fn(DimsSpec::scalar(d).unwrap(), |i, j| {
            if i == j {
                c(entries[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap()
    }

    fn bell_state() -> Operator {
        let amps = [
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ];
        Operator::pure_state(&amps)
            .unwrap()
            .with_dims(DimsSpec::new(vec![2, 2]).unwrap())
            .unwrap()
    }

    #[test]
    fn inverse_at_maximally_mixed_is_scaling() {
        let pi = Operator::maximally_mixed(3).unwrap();
        let sigma = random_state(3, 1).unwrap();
        let out = symmetric_bloom_inverse(&pi, &sigma, DEFAULT_GROUPING_TOL).unwrap();
        assert!(out.max_abs_diff(&sigma.scale(c(3.0, 0.0))) <= 1e-12);
    }

    #[test]
    fn inverse_matches_hand_weights() {
        let rho = diag(&[0.75, 0.25]);
        let sigma = Operator::from_fn(DimsSpec::scalar(2).unwrap(), |i, j| {
            c(1.0 + (2 * i + j) as f64, 0.5 - j as f64)
        })
        .unwrap();
        let out = symmetric_bloom_inverse(&rho, &sigma, DEFAULT_GROUPING_TOL).unwrap();
        // Weights 2/(1.5), 2/(1.0), 2/(0.5) on the spectral blocks.
        assert!((out.entry(0, 0) - sigma.entry(0, 0) / 0.75).norm() < 1e-12);
        assert!((out.entry(0, 1) - sigma.entry(0, 1) * 2.0).norm() < 1e-12);
        assert!((out.entry(1, 0) - sigma.entry(1, 0) * 2.0).norm() < 1e-12);
        assert!((out.entry(1, 1) - sigma.entry(1, 1) / 0.25).norm() < 1e-12);
    }

    #[test]
    fn inverse_undoes_jordan_multiplication() {
        for seed in 0..20u64 {
            let rho = random_state(4, seed).unwrap();
            let m = random_state(4, seed + 500).unwrap().scale(c(2.0, -0.3));
            let rendered = rho.jordan(&m).unwrap();
            let back = symmetric_bloom_inverse(&rho, &rendered, DEFAULT_GROUPING_TOL).unwrap();
            assert!(back.max_abs_diff(&m) <= 1e-9);
        }
    }

    #[test]
    fn inverse_flags_kernel_components() {
        let rho = diag(&[1.0, 0.0]);
        let sigma = Operator::identity(DimsSpec::scalar(2).unwrap());
        let err = symmetric_bloom_inverse(&rho, &sigma, DEFAULT_GROUPING_TOL);
        match err {
            Err(Error::SingularConditioning { pairs, .. }) => {
                assert!(pairs.contains(&(1, 1)));
            }
            other => panic!("expected singular conditioning, got {other:?}"),
        }
    }

    #[test]
    fn conditional_of_product_state() {
        let rho = random_state(2, 3).unwrap();
        let sigma = random_state(3, 4).unwrap();
        let joint = kron(&rho, &sigma);
        let cond = conditional_state(&joint).unwrap();
        let expect = kron(&Operator::identity(DimsSpec::scalar(2).unwrap()), &sigma);
        assert!(cond.operator.max_abs_diff(&expect) <= 1e-9);
        assert_eq!(cond.support_dim, 2);
        // The conditional's marginal over the second factor is the support
        // projector of the conditioning marginal.
        let tb = partial_trace(&cond.operator, &[1]).unwrap();
        assert!(tb.max_abs_diff(&Operator::identity(DimsSpec::scalar(2).unwrap())) <= 1e-8);
    }

    #[test]
    fn conditional_of_bell_state_is_doubled() {
        let bell = bell_state();
        let cond = conditional_state(&bell).unwrap();
        assert!(cond.operator.max_abs_diff(&bell.scale(c(2.0, 0.0))) <= 1e-10);
    }

    #[test]
    fn conditional_of_classical_correlation() {
        let mut mat = nalgebra::DMatrix::<Complex64>::zeros(4, 4);
        mat[(0, 0)] = c(0.5, 0.0);
        mat[(3, 3)] = c(0.5, 0.0);
        let joint = Operator::new(mat, DimsSpec::new(vec![2, 2]).unwrap()).unwrap();
        let cond = conditional_state(&joint).unwrap();
        let expect = diag(&[1.0, 0.0, 0.0, 1.0])
            .with_dims(DimsSpec::new(vec![2, 2]).unwrap())
            .unwrap();
        assert!(cond.operator.max_abs_diff(&expect) <= 1e-10);
    }

    #[test]
    fn belief_propagation_of_product_state_is_constant() {
        let rho = random_state(2, 7).unwrap();
        let sigma = random_state(3, 8).unwrap();
        let bp = belief_propagation(&kron(&rho, &sigma)).unwrap();
        assert!(bp.is_tp());
        let tau = random_state(2, 9).unwrap();
        assert!(bp.apply(&tau).unwrap().max_abs_diff(&sigma) <= 1e-9);
    }

    #[test]
    fn belief_propagation_of_bell_state_is_transpose() {
        let bp = belief_propagation(&bell_state()).unwrap();
        assert!(!bp.is_cp(), "transpose map must not be CP");
        assert!(bp.is_tp());
        let tau = random_state(2, 11).unwrap();
        assert!(bp.apply(&tau).unwrap().max_abs_diff(&tau.transpose()) <= 1e-10);
    }

    #[test]
    fn belief_propagation_matches_classical_conditioning() {
        // Joint p(x, y) with full-support first marginal.
        let p = [[0.1, 0.3], [0.36, 0.24]]; // rows x, cols y
        let mut joint = Operator::zeros(DimsSpec::new(vec![2, 2]).unwrap());
        for x in 0..2 {
            for y in 0..2 {
                let term = kron(
                    &Operator::basis_projector(2, x).unwrap(),
                    &Operator::basis_projector(2, y).unwrap(),
                )
                .scale(c(p[x][y], 0.0));
                joint = joint.add(&term).unwrap();
            }
        }
        let bp = belief_propagation(&joint).unwrap();
        let px = [0.4, 0.6];
        let cond = [
            vec![p[0][0] / px[0], p[1][0] / px[1]],
            vec![p[0][1] / px[0], p[1][1] / px[1]],
        ];
        let classical = Channel::classical(&cond).unwrap();
        assert!(superop::max_abs_diff(bp.superop(), classical.superop()) <= 1e-12);
    }

    #[test]
    fn channel_state_of_belief_propagation_is_the_conditional() {
        for seed in 0..10u64 {
            let joint = random_state(6, seed)
                .unwrap()
                .with_dims(DimsSpec::new(vec![2, 3]).unwrap())
                .unwrap();
            let cond = conditional_state(&joint).unwrap();
            let bp = belief_propagation_from_conditional(&cond).unwrap();
            let j = bp.jamiolkowski_state().unwrap();
            assert!(j.max_abs_diff(&cond.operator) <= 1e-9);
            assert!(bp.is_tp());
        }
    }

    #[test]
    fn roundtrip_examples() {
        let rho = random_state(2, 21).unwrap();
        let sigma = random_state(2, 22).unwrap();
        assert!(roundtrip_check(&kron(&rho, &sigma)).unwrap() <= 1e-12);
        assert!(roundtrip_check(&bell_state()).unwrap() <= 1e-10);
        for seed in 0..20u64 {
            let joint = random_state(4, seed + 100)
                .unwrap()
                .with_dims(DimsSpec::new(vec![2, 2]).unwrap())
                .unwrap();
            assert!(roundtrip_check(&joint).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn rank_deficient_marginal_is_an_error() {
        let zero = Operator::basis_projector(2, 0).unwrap();
        let sigma = random_state(2, 31).unwrap();
        let joint = kron(&zero, &sigma);
        assert!(matches!(
            conditional_state(&joint),
            Err(Error::SingularConditioning { .. })
        ));
    }
}
