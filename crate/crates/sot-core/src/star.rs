//! Star products: families of state over time functions built on a
//! time-expansion primitive.
//!
//! A star product maps a channel E: A -> B and a state rho on A to a bipartite
//! operator E * rho on A (x) B whose marginals are E(rho) and rho. Every
//! state-linear family here is driven by its time expansion rho -> id * rho on
//! A (x) A': the star with a general channel applies id (x) E to the
//! expansion, the action on a subsystem is the linear extension of
//! sigma -> E * sigma, and multi-step chains iterate that extension. The
//! Leifer-Spekkens function is the one non-state-linear family and carries a
//! direct formula instead; its subsystem action is undefined.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::operator::{
    kron, partial_matrix_element, partial_trace, psd_sqrt, swap_operator, DimsSpec, Operator,
};
use crate::superop;

/// Condition-estimate limit for the guarded superoperator inversions used by
/// the g-family construction and the state-rendering extraction.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Tolerance for the traceless-to-traceless requirement on g-family maps and
/// for the marginal conditions on perturbations.
pub const TRACELESS_TOL: f64 = 1e-10;

/// Linear map rho -> bipartite operator on two copies of the input system,
/// stored column-wise over the elementary basis. Used for the optional
/// perturbation of the mean-marginal family.
#[derive(Debug, Clone)]
pub struct BipartiteMap {
    mat: DMatrix<Complex64>,
    d: usize,
}

impl BipartiteMap {
    /// Wrap a (d^4, d^2) matrix taking vec(rho) to the vectorized bipartite
    /// output.
    pub fn new(mat: DMatrix<Complex64>, d: usize) -> Result<Self> {
        if mat.ncols() != d * d || mat.nrows() != d * d * d * d {
            return Err(Error::DimensionMismatch(format!(
                "bipartite map must be ({0}^4, {0}^2), got ({1}, {2})",
                d,
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(BipartiteMap { mat, d })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        superop::apply(&self.mat, rho, DimsSpec::new(vec![self.d, self.d])?)
    }
}

#[derive(Debug, Clone)]
pub enum StarKind {
    /// Jordan product with the channel state: 1/2 {rho (x) 1, D[E]}.
    Fp,
    /// Leifer-Spekkens: (sqrt(rho) (x) 1) D[E] (sqrt(rho) (x) 1). Not
    /// state-linear.
    Ls,
    /// State-rendering mu rho M + (1 - mu) M rho; mu = 1/2 recovers Fp,
    /// mu = 1 the right bloom, mu = 0 the left bloom.
    Bloom { mu: f64 },
    /// State-rendering 1/2 {rho, M} + i c [rho, M] for real c.
    CFam { c: f64 },
    /// State-rendering rho M + g([rho, M]) for a linear map g that preserves
    /// the traceless subspace.
    GFam { g: DMatrix<Complex64>, d: usize },
    /// g = r Ad_{|k><k|} preset of the g-family; this g does not preserve
    /// tracelessness, so the expansion routes through the inverse of
    /// Psi(rho) = rho - [rho, g#(1)], keeping the marginal laws intact.
    EtaFam { r: f64, eta_index: usize },
    /// Time expansion (Tr[rho] F + 1 (x) rho_tl + rho_tl (x) 1)/d + Xi(rho),
    /// where rho_tl is the traceless part of rho; an alternative swap-
    /// symmetric operator D may replace F/d.
    MeanMarginal {
        xi: Option<BipartiteMap>,
        d_op: Option<Operator>,
    },
    /// base star + Tr[E(rho)] Xi for a fixed bipartite Xi with vanishing
    /// partial traces.
    XiPerturbed {
        base: Box<StarProduct>,
        xi: Operator,
    },
}

/// A named star-product strategy. Values are immutable after construction and
/// all evaluations are pure.
#[derive(Debug, Clone)]
pub struct StarProduct {
    name: String,
    kind: StarKind,
}

impl StarProduct {
    pub fn fp() -> Self {
        StarProduct {
            name: "fp".into(),
            kind: StarKind::Fp,
        }
    }

    pub fn ls() -> Self {
        StarProduct {
            name: "ls".into(),
            kind: StarKind::Ls,
        }
    }

    pub fn bloom(mu: f64) -> Self {
        StarProduct {
            name: format!("bloom:{mu}"),
            kind: StarKind::Bloom { mu },
        }
    }

    /// The parameter is real by type; complex values are unrepresentable.
    pub fn cfam(c: f64) -> Self {
        StarProduct {
            name: format!("cfam:{c}"),
            kind: StarKind::CFam { c },
        }
    }

    /// General g-family from a (d^2, d^2) superoperator. `g` must map
    /// traceless operators to traceless operators; its value on the identity
    /// is normalized to zero internally since only the traceless action
    /// enters.
    pub fn gfam(g: DMatrix<Complex64>) -> Result<Self> {
        let d2 = g.ncols();
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 || g.nrows() != d2 {
            return Err(Error::DimensionMismatch(format!(
                "g must be square of side d^2, got ({}, {})",
                g.nrows(),
                g.ncols()
            )));
        }
        // Preserving tracelessness means Tr[g(E_ij)] = delta_ij * const.
        let mut t = DMatrix::<Complex64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let col = g.column(i * d + j);
                let mut tr = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    tr += col[k * d + k];
                }
                t[(i, j)] = tr;
            }
        }
        let mean: Complex64 = t.diagonal().iter().sum::<Complex64>() / (d as f64);
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j {
                    mean
                } else {
                    Complex64::new(0.0, 0.0)
                };
                dev = dev.max((t[(i, j)] - expect).norm());
            }
        }
        if dev > TRACELESS_TOL {
            return Err(Error::InvalidStarParameter(format!(
                "g does not map traceless operators to traceless operators (deviation {dev:.3e})"
            )));
        }
        let normalized = &g * traceless_projector(d);
        Ok(StarProduct {
            name: format!("gfam:d{d}"),
            kind: StarKind::GFam { g: normalized, d },
        })
    }

    /// g = r Ad_{|k><k|} preset. The parameter must lie strictly inside
    /// (0, 1) to keep the Psi map invertible.
    pub fn eta_fam(r: f64, eta_index: usize) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidStarParameter(format!(
                "eta-family parameter r must lie in (0, 1), got {r}"
            )));
        }
        Ok(StarProduct {
            name: format!("etafam:{r}:{eta_index}"),
            kind: StarKind::EtaFam { r, eta_index },
        })
    }

    pub fn mean_marginal() -> Self {
        StarProduct {
            name: "meanmarg".into(),
            kind: StarKind::MeanMarginal {
                xi: None,
                d_op: None,
            },
        }
    }

    /// Mean-marginal family with an optional perturbation Xi and an optional
    /// replacement D for F/d. Xi must vanish on the identity, have vanishing
    /// partial traces, and be swap-symmetric; D must have maximally mixed
    /// marginals.
    pub fn mean_marginal_with(xi: Option<BipartiteMap>, d_op: Option<Operator>) -> Result<Self> {
        if let Some(m) = &xi {
            let d = m.dim();
            let ident = Operator::identity(DimsSpec::scalar(d)?);
            if m.apply(&ident)?.max_abs() > TRACELESS_TOL {
                return Err(Error::InvalidStarParameter(
                    "Xi must vanish on the identity".into(),
                ));
            }
            let f = swap_operator(d)?;
            for i in 0..d {
                for j in 0..d {
                    let out = m.apply(&Operator::elementary(d, i, j)?)?;
                    let ta = partial_trace(&out, &[0])?;
                    let tb = partial_trace(&out, &[1])?;
                    if ta.max_abs() > TRACELESS_TOL || tb.max_abs() > TRACELESS_TOL {
                        return Err(Error::InvalidStarParameter(
                            "Xi must have vanishing partial traces".into(),
                        ));
                    }
                    let conj = f.matmul(&out)?.matmul(&f)?;
                    if conj.max_abs_diff(&out) > TRACELESS_TOL {
                        return Err(Error::InvalidStarParameter(
                            "Xi must be symmetric under the swap conjugation".into(),
                        ));
                    }
                }
            }
        }
        if let Some(op) = &d_op {
            if op.dims().num_subsystems() != 2 || op.dims().dims()[0] != op.dims().dims()[1] {
                return Err(Error::InvalidStarParameter(
                    "D must be bipartite on two copies of one system".into(),
                ));
            }
            let d = op.dims().dims()[0];
            let pi = Operator::maximally_mixed(d)?;
            let ta = partial_trace(op, &[0])?;
            let tb = partial_trace(op, &[1])?;
            if ta.max_abs_diff(&pi) > TRACELESS_TOL || tb.max_abs_diff(&pi) > TRACELESS_TOL {
                return Err(Error::InvalidStarParameter(
                    "D must have maximally mixed partial traces".into(),
                ));
            }
            if let Some(m) = &xi {
                if m.dim() != d {
                    return Err(Error::DimensionMismatch(
                        "Xi and D dimensions disagree".into(),
                    ));
                }
            }
        }
        let name = match (&xi, &d_op) {
            (None, None) => "meanmarg".to_string(),
            (Some(_), None) => "meanmarg:xi".to_string(),
            (None, Some(_)) => "meanmarg:d".to_string(),
            (Some(_), Some(_)) => "meanmarg:xi:d".to_string(),
        };
        Ok(StarProduct {
            name,
            kind: StarKind::MeanMarginal { xi, d_op },
        })
    }

    /// Perturb a state-linear base star by Tr[E(rho)] Xi, where both partial
    /// traces of Xi vanish; the marginal laws survive for trace-preserving
    /// channels.
    pub fn xi_perturbed(base: StarProduct, xi: Operator) -> Result<Self> {
        if !base.state_linear() {
            return Err(Error::UnsupportedStarKind {
                kind: base.name.clone(),
                operation: "xi perturbation (base must be state-linear)".into(),
            });
        }
        if xi.dims().num_subsystems() != 2 {
            return Err(Error::InvalidStarParameter(
                "Xi must be a bipartite operator".into(),
            ));
        }
        let ta = partial_trace(&xi, &[0])?;
        let tb = partial_trace(&xi, &[1])?;
        if ta.max_abs() > TRACELESS_TOL || tb.max_abs() > TRACELESS_TOL {
            return Err(Error::InvalidStarParameter(format!(
                "both partial traces of Xi must vanish (got {:.3e}, {:.3e})",
                ta.max_abs(),
                tb.max_abs()
            )));
        }
        let name = format!("xiperturbed:{}", base.name);
        Ok(StarProduct {
            name,
            kind: StarKind::XiPerturbed {
                base: Box::new(base),
                xi,
            },
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &StarKind {
        &self.kind
    }

    /// False only for the Leifer-Spekkens family.
    pub fn state_linear(&self) -> bool {
        !matches!(self.kind, StarKind::Ls)
    }

    /// Whether the family is defined for input systems of dimension `d`.
    pub fn supports_input_dim(&self, d: usize) -> bool {
        match &self.kind {
            StarKind::GFam { d: gd, .. } => *gd == d,
            StarKind::EtaFam { eta_index, .. } => *eta_index < d,
            StarKind::MeanMarginal { xi, d_op } => {
                xi.as_ref().map_or(true, |m| m.dim() == d)
                    && d_op.as_ref().map_or(true, |op| op.dims().dims()[0] == d)
            }
            StarKind::XiPerturbed { base, xi } => {
                xi.dims().dims()[0] == d && base.supports_input_dim(d)
            }
            _ => true,
        }
    }

    /// Output dimension forced by the family, if any.
    pub fn forced_output_dim(&self) -> Option<usize> {
        match &self.kind {
            StarKind::XiPerturbed { xi, .. } => Some(xi.dims().dims()[1]),
            _ => None,
        }
    }

    /// Time expansion rho -> id * rho on A (x) A'.
    pub fn time_expansion(&self, rho: &Operator) -> Result<Operator> {
        let d = rho.side();
        if !self.supports_input_dim(d) {
            return Err(Error::DimensionMismatch(format!(
                "star `{}` does not support input dimension {d}",
                self.name
            )));
        }
        match &self.kind {
            StarKind::Fp => {
                let f = swap_operator(d)?;
                let rho_i = kron(&single(rho)?, &Operator::identity(DimsSpec::scalar(d)?));
                rho_i.jordan(&f)
            }
            StarKind::Ls => {
                let sq = psd_sqrt(&single(rho)?, 1e-10)?;
                let f = swap_operator(d)?;
                let sq_i = kron(&sq, &Operator::identity(DimsSpec::scalar(d)?));
                sq_i.matmul(&f)?.matmul(&sq_i)
            }
            StarKind::Bloom { mu } => {
                let f = swap_operator(d)?;
                let rho_i = kron(&single(rho)?, &Operator::identity(DimsSpec::scalar(d)?));
                let right = rho_i.matmul(&f)?.scale(Complex64::new(*mu, 0.0));
                let left = f.matmul(&rho_i)?.scale(Complex64::new(1.0 - mu, 0.0));
                right.add(&left)
            }
            StarKind::CFam { c } => {
                let f = swap_operator(d)?;
                let rho_i = kron(&single(rho)?, &Operator::identity(DimsSpec::scalar(d)?));
                let jordan = rho_i.jordan(&f)?;
                let comm = rho_i.commutator(&f)?.scale(Complex64::new(0.0, *c));
                jordan.add(&comm)
            }
            StarKind::GFam { g, .. } => gfam_expansion(g, &single(rho)?),
            StarKind::EtaFam { r, eta_index } => {
                let g = eta_g_superop(*r, *eta_index, d);
                gfam_expansion(&g, &single(rho)?)
            }
            StarKind::MeanMarginal { xi, d_op } => {
                let rho = single(rho)?;
                let tr = rho.trace();
                let ident = Operator::identity(DimsSpec::scalar(d)?);
                let traceless = rho.sub(&ident.scale(tr / d as f64))?;
                let base = match d_op {
                    Some(op) => op.scale(tr),
                    None => swap_operator(d)?.scale(tr / d as f64),
                };
                let mixed = kron(&ident, &traceless)
                    .add(&kron(&traceless, &ident))?
                    .scale(Complex64::new(1.0 / d as f64, 0.0));
                let mut out = base.add(&mixed)?;
                if let Some(m) = xi {
                    out = out.add(&m.apply(&rho)?)?;
                }
                out.with_dims(DimsSpec::new(vec![d, d])?)
            }
            StarKind::XiPerturbed { base, xi } => {
                if xi.dims().dims() != [d, d] {
                    return Err(Error::DimensionMismatch(format!(
                        "Xi lives on dims {:?}, time expansion needs [{d}, {d}]",
                        xi.dims().dims()
                    )));
                }
                let b = base.time_expansion(rho)?;
                b.add(&xi.scale(rho.trace()))
            }
        }
    }

    /// Star product E * rho on A (x) B. For state-linear kinds this applies
    /// id (x) E to the time expansion; the Leifer-Spekkens form conjugates the
    /// channel state by sqrt(rho); the Xi-perturbed form adds Tr[E(rho)] Xi to
    /// its base. State-linear kinds accept arbitrary operator inputs (linear
    /// extension); Ls requires a positive semidefinite state.
    pub fn star(&self, e: &Channel, rho: &Operator) -> Result<Operator> {
        let d = rho.side();
        if e.in_dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} does not match state side {d}",
                e.in_dim()
            )));
        }
        if let Some(fixed) = self.forced_output_dim() {
            if e.out_dim() != fixed {
                return Err(Error::DimensionMismatch(format!(
                    "star `{}` requires channel output {fixed}, got {}",
                    self.name,
                    e.out_dim()
                )));
            }
        }
        match &self.kind {
            StarKind::Ls => {
                let j = e.jamiolkowski_state()?;
                let sq = psd_sqrt(&single(rho)?, 1e-10)?;
                let sq_i = kron(&sq, &Operator::identity(DimsSpec::scalar(e.out_dim())?));
                sq_i.matmul(&j)?.matmul(&sq_i)
            }
            StarKind::XiPerturbed { base, xi } => {
                let weight = e.apply(&single(rho)?)?.trace();
                base.star(e, rho)?.add(&xi.scale(weight))
            }
            _ => {
                let expansion = self.time_expansion(rho)?;
                e.apply_to_subsystem(&expansion, 1)
            }
        }
    }

    /// Superoperator of sigma -> E * sigma, columns over the elementary basis
    /// of the input system. Requires a state-linear kind.
    pub fn star_superop(&self, e: &Channel) -> Result<DMatrix<Complex64>> {
        self.require_state_linear("star superoperator")?;
        let d = e.in_dim();
        superop::assemble(d, d * e.out_dim(), |i, j| {
            self.star(e, &Operator::elementary(d, i, j)?)
        })
    }

    /// Action on the designated subsystem of a composite operator: the linear
    /// map (E * .) (x) id applied at `subsystem`, with the channel output
    /// factor inserted right after it. Undefined for non-state-linear kinds.
    pub fn star_on_subsystem(
        &self,
        e: &Channel,
        x: &Operator,
        subsystem: usize,
    ) -> Result<Operator> {
        self.require_state_linear("subsystem action")?;
        let dims = x.dims().dims();
        if subsystem >= dims.len() {
            return Err(Error::InvalidSubsystem {
                index: subsystem,
                count: dims.len(),
            });
        }
        let dk = dims[subsystem];
        if e.in_dim() != dk {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} does not match subsystem dimension {dk}",
                e.in_dim()
            )));
        }
        let ss = self.star_superop(e)?;
        superop::apply_on_subsystem(&ss, x, subsystem, &[dk, e.out_dim()])
    }

    /// Iterated star over a chain of channels, always acting on the latest
    /// time slice. Returns an operator on A (x) B (x) C (x) ...
    pub fn chain_star(&self, es: &[Channel], rho: &Operator) -> Result<Operator> {
        self.require_state_linear("chained star")?;
        let (first, rest) = es
            .split_first()
            .ok_or_else(|| Error::InvalidInput("empty channel chain".into()))?;
        let mut acc = self.star(first, rho)?;
        for e in rest {
            let last = acc.dims().num_subsystems() - 1;
            acc = self.star_on_subsystem(e, &acc, last)?;
        }
        Ok(acc)
    }

    /// Read the time-expansion correspondence off id * rho: the unique linear
    /// map T with id * rho = (T (x) id)(F), returned as a superoperator whose
    /// column (i, j) is vec(T(|i><j|)).
    pub fn extract_theta(&self, rho: &Operator) -> Result<DMatrix<Complex64>> {
        self.require_state_linear("state-rendering extraction")?;
        let d = rho.side();
        let x = self.time_expansion(rho)?;
        superop::assemble(d, d, |i, j| partial_matrix_element(&x, 1, j, i))
    }

    fn require_state_linear(&self, operation: &str) -> Result<()> {
        if !self.state_linear() {
            return Err(Error::UnsupportedStarKind {
                kind: self.name.clone(),
                operation: operation.into(),
            });
        }
        Ok(())
    }
}

/// Star inputs must be a single subsystem; composite-labelled states are
/// reinterpreted as one.
fn single(rho: &Operator) -> Result<Operator> {
    if rho.dims().num_subsystems() == 1 {
        Ok(rho.clone())
    } else {
        rho.with_dims(DimsSpec::scalar(rho.side())?)
    }
}

/// Projector onto traceless operators, as a superoperator:
/// X -> X - (Tr[X]/d) 1.
pub fn traceless_projector(d: usize) -> DMatrix<Complex64> {
    let mut p = DMatrix::<Complex64>::identity(d * d, d * d);
    let scale = Complex64::new(1.0 / d as f64, 0.0);
    for i in 0..d {
        for j in 0..d {
            p[(i * d + i, j * d + j)] -= scale;
        }
    }
    p
}

/// Superoperator of g = r Ad_{|k><k|}: g(X) = r <k|X|k> |k><k|.
pub fn eta_g_superop(r: f64, k: usize, d: usize) -> DMatrix<Complex64> {
    let mut g = DMatrix::<Complex64>::zeros(d * d, d * d);
    g[(k * d + k, k * d + k)] = Complex64::new(r, 0.0);
    g
}

/// Time expansion of the g-family: sum_ij Theta_rho(|i><j|) (x)
/// PsiInv(|j><i|), with Theta_rho(M) = rho M + g([rho, M]) and
/// Psi(rho) = rho - [rho, g#(1)]. When g#(1) vanishes, Psi is the identity
/// and the expansion reduces to (Theta_rho (x) id)(F).
fn gfam_expansion(g: &DMatrix<Complex64>, rho: &Operator) -> Result<Operator> {
    let d = rho.side();
    if g.ncols() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "g superoperator side {} does not match d^2 = {}",
            g.ncols(),
            d * d
        )));
    }
    let dims1 = DimsSpec::scalar(d)?;
    let ident = Operator::identity(dims1.clone());
    let k_vec = superop::sharp(g, d)? * superop::vec_op(&ident);
    let k_op = superop::unvec_op(&k_vec, dims1.clone())?;
    let psi_inv = if k_op.max_abs() <= 1e-13 {
        None
    } else {
        let psi = DMatrix::<Complex64>::identity(d * d, d * d) - superop::right_mult(&k_op)?
            + superop::left_mult(&k_op)?;
        Some(superop::invert(&psi, CONDITION_LIMIT)?)
    };
    let mut acc = Operator::zeros(DimsSpec::new(vec![d, d])?);
    for i in 0..d {
        for j in 0..d {
            let e_ij = Operator::elementary(d, i, j)?;
            let comm = rho.commutator(&e_ij)?;
            let g_comm = superop::apply(g, &comm, dims1.clone())?;
            let theta = rho.matmul(&e_ij)?.add(&g_comm)?;
            let e_ji = Operator::elementary(d, j, i)?;
            let second = match &psi_inv {
                Some(inv) => superop::apply(inv, &e_ji, dims1.clone())?,
                None => e_ji,
            };
            acc = acc.add(&kron(&theta, &second))?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{depolarizing_to_mixed, random_channel, random_state};
    use crate::operator::spectral_decomposition;

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

    fn pauli_x() -> Operator {
        Operator::from_fn(DimsSpec::scalar(2).unwrap(), |i, j| {
            if i != j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap()
    }

    fn plus_state() -> Operator {
        Operator::pure_state(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn fp_expansion_of_maximally_mixed_is_half_swap() {
        let pi = Operator::maximally_mixed(2).unwrap();
        let exp = StarProduct::fp().time_expansion(&pi).unwrap();
        let half_f = swap_operator(2).unwrap().scale(c(0.5, 0.0));
        assert!(exp.max_abs_diff(&half_f) < 1e-15);
    }

    #[test]
    fn fp_expansion_of_pure_zero_state() {
        let rho = diag(&[1.0, 0.0]);
        let exp = StarProduct::fp().time_expansion(&rho).unwrap();
        // Basis order 00, 01, 10, 11.
        assert!((exp.entry(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((exp.entry(1, 2) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((exp.entry(2, 1) - c(0.5, 0.0)).norm() < 1e-15);
        let mut rest = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                if [(0, 0), (1, 2), (2, 1)].contains(&(i, j)) {
                    continue;
                }
                rest = rest.max(exp.entry(i, j).norm());
            }
        }
        assert!(rest < 1e-15);
        let eig = spectral_decomposition(&exp, 1e-10).unwrap();
        let mut flattened = Vec::new();
        for (l, m) in eig.eigenvalues.iter().zip(eig.multiplicities()) {
            for _ in 0..m {
                flattened.push(*l);
            }
        }
        assert_eq!(flattened.len(), 4);
        // Descending order of the spectrum {1, 0.5, -0.5, 0}.
        for (a, b) in flattened.iter().zip([1.0, 0.5, 0.0, -0.5].iter()) {
            assert!((a - b).abs() <= 1e-10, "eigenvalue {a} vs {b}");
        }
    }

    #[test]
    fn bloom_one_is_right_bloom() {
        let rho = diag(&[0.3, 0.7]);
        let exp = StarProduct::bloom(1.0).time_expansion(&rho).unwrap();
        let f = swap_operator(2).unwrap();
        let expect = kron(&rho, &Operator::identity(DimsSpec::scalar(2).unwrap()))
            .matmul(&f)
            .unwrap();
        assert!(exp.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn fp_star_with_classical_channel_is_classical_joint() {
        let p = Channel::classical(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap();
        let rho = diag(&[0.25, 0.75]);
        let out = StarProduct::fp().star(&p, &rho).unwrap();
        let expect = diag(&[0.225, 0.025, 0.15, 0.6])
            .with_dims(DimsSpec::new(vec![2, 2]).unwrap())
            .unwrap();
        assert!(out.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn star_at_maximally_mixed_is_normalized_channel_state() {
        for seed in 0..5u64 {
            let e = random_channel(3, 2, 2, seed).unwrap();
            let pi = Operator::maximally_mixed(3).unwrap();
            let expect = e.jamiolkowski_state().unwrap().scale(c(1.0 / 3.0, 0.0));
            for star in [StarProduct::fp(), StarProduct::ls()] {
                let out = star.star(&e, &pi).unwrap();
                assert!(out.max_abs_diff(&expect) < 1e-12, "star {}", star.name());
            }
        }
    }

    #[test]
    fn ls_equals_fp_on_commuting_instances() {
        let p = Channel::classical(&[vec![0.6, 0.3], vec![0.4, 0.7]]).unwrap();
        let rho = diag(&[0.2, 0.8]);
        let fp = StarProduct::fp().star(&p, &rho).unwrap();
        let ls = StarProduct::ls().star(&p, &rho).unwrap();
        assert!(fp.max_abs_diff(&ls) < 1e-12);
    }

    #[test]
    fn marginals_for_every_family() {
        let families = [
            StarProduct::fp(),
            StarProduct::ls(),
            StarProduct::bloom(0.0),
            StarProduct::bloom(0.3),
            StarProduct::bloom(1.0),
            StarProduct::cfam(0.7),
            StarProduct::eta_fam(0.5, 0).unwrap(),
            StarProduct::mean_marginal(),
        ];
        for seed in 0..4u64 {
            let rho = random_state(2, seed).unwrap();
            let e = random_channel(2, 3, 2, seed + 50).unwrap();
            for star in &families {
                let out = star.star(&e, &rho).unwrap();
                let tb = partial_trace(&out, &[1]).unwrap();
                let ta = partial_trace(&out, &[0]).unwrap();
                assert!(
                    tb.max_abs_diff(&rho) <= 1e-9,
                    "state marginal for {}",
                    star.name()
                );
                assert!(
                    ta.max_abs_diff(&e.apply(&rho).unwrap()) <= 1e-9,
                    "channel marginal for {}",
                    star.name()
                );
                assert!((out.trace() - c(1.0, 0.0)).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn xi_perturbed_marginals_and_base_recovery() {
        let xx = kron(&pauli_x(), &pauli_x());
        let star = StarProduct::xi_perturbed(StarProduct::fp(), xx).unwrap();

        let zero = Operator::zeros(DimsSpec::new(vec![2, 2]).unwrap());
        let trivial = StarProduct::xi_perturbed(StarProduct::fp(), zero).unwrap();
        let rho = random_state(2, 3).unwrap();
        let e = random_channel(2, 2, 2, 4).unwrap();
        let base = StarProduct::fp().star(&e, &rho).unwrap();
        assert!(trivial.star(&e, &rho).unwrap().max_abs_diff(&base) < 1e-15);

        let out = star.star(&e, &rho).unwrap();
        let tb = partial_trace(&out, &[1]).unwrap();
        let ta = partial_trace(&out, &[0]).unwrap();
        assert!(tb.max_abs_diff(&rho) <= 1e-10);
        assert!(ta.max_abs_diff(&e.apply(&rho).unwrap()) <= 1e-10);
        assert!(out.max_abs_diff(&base) > 0.5);
    }

    #[test]
    fn xi_perturbed_breaks_expansion_decomposability() {
        let star =
            StarProduct::xi_perturbed(StarProduct::fp(), kron(&pauli_x(), &pauli_x())).unwrap();
        let rho = random_state(2, 9).unwrap();
        let spec = DimsSpec::scalar(2)
            .unwrap()
            .with_blocks(0, vec![1, 1])
            .unwrap();
        let deph = Channel::dephasing(&spec).unwrap();
        let direct = star.star(&deph, &rho).unwrap();
        let via_expansion = deph
            .apply_to_subsystem(&star.time_expansion(&rho).unwrap(), 1)
            .unwrap();
        assert!(direct.max_abs_diff(&via_expansion) > 1e-3);
    }

    #[test]
    fn xi_perturbed_rejects_bad_inputs() {
        let bad = kron(
            &Operator::basis_projector(2, 0).unwrap(),
            &Operator::basis_projector(2, 0).unwrap(),
        );
        assert!(StarProduct::xi_perturbed(StarProduct::fp(), bad).is_err());
        let xx = kron(&pauli_x(), &pauli_x());
        assert!(StarProduct::xi_perturbed(StarProduct::ls(), xx).is_err());
    }

    #[test]
    fn state_linearity_and_the_ls_witness() {
        let e = Channel::identity(DimsSpec::scalar(2).unwrap());
        let rho0 = Operator::basis_projector(2, 0).unwrap();
        let rho1 = plus_state();
        let mix = rho0
            .scale(c(0.5, 0.0))
            .add(&rho1.scale(c(0.5, 0.0)))
            .unwrap();
        for star in [
            StarProduct::fp(),
            StarProduct::bloom(0.3),
            StarProduct::cfam(0.7),
            StarProduct::eta_fam(0.5, 0).unwrap(),
            StarProduct::mean_marginal(),
        ] {
            let lhs = star.star(&e, &mix).unwrap();
            let rhs = star
                .star(&e, &rho0)
                .unwrap()
                .scale(c(0.5, 0.0))
                .add(&star.star(&e, &rho1).unwrap().scale(c(0.5, 0.0)))
                .unwrap();
            assert!(lhs.max_abs_diff(&rhs) <= 1e-9, "{} linear", star.name());
        }
        let ls = StarProduct::ls();
        let lhs = ls.star(&e, &mix).unwrap();
        let rhs = ls
            .star(&e, &rho0)
            .unwrap()
            .scale(c(0.5, 0.0))
            .add(&ls.star(&e, &rho1).unwrap().scale(c(0.5, 0.0)))
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs) > 1e-3, "ls must break linearity");
    }

    #[test]
    fn gfam_presets_match_closed_forms() {
        for mu in [0.0, 0.3, 1.0] {
            let g = traceless_projector(2) * c(mu - 1.0, 0.0);
            let gf = StarProduct::gfam(g).unwrap();
            let bloom = StarProduct::bloom(mu);
            for seed in 0..3u64 {
                let rho = random_state(2, seed).unwrap();
                let a = gf.time_expansion(&rho).unwrap();
                let b = bloom.time_expansion(&rho).unwrap();
                assert!(a.max_abs_diff(&b) <= 1e-12, "mu = {mu}");
            }
        }
        let cpar = 0.7;
        let g = traceless_projector(3) * c(-0.5, cpar);
        let gf = StarProduct::gfam(g).unwrap();
        let cf = StarProduct::cfam(cpar);
        for seed in 0..3u64 {
            let rho = random_state(3, seed).unwrap();
            let a = gf.time_expansion(&rho).unwrap();
            let b = cf.time_expansion(&rho).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-12);
        }
        let g0 = DMatrix::<Complex64>::zeros(4, 4);
        let gf0 = StarProduct::gfam(g0).unwrap();
        let rho = random_state(2, 5).unwrap();
        assert!(
            gf0.time_expansion(&rho)
                .unwrap()
                .max_abs_diff(&StarProduct::bloom(1.0).time_expansion(&rho).unwrap())
                <= 1e-12
        );
    }

    #[test]
    fn gfam_rejects_traceless_violations() {
        let g = eta_g_superop(0.5, 0, 2);
        assert!(matches!(
            StarProduct::gfam(g),
            Err(Error::InvalidStarParameter(_))
        ));
    }

    #[test]
    fn eta_fam_deviates_from_normalized_channel_state_at_pi() {
        // The eta-family expansion of the maximally mixed state is not F/d;
        // that is exactly its full-system channel-state violation. Marginals
        // still hold.
        let star = StarProduct::eta_fam(0.5, 0).unwrap();
        let pi = Operator::maximally_mixed(2).unwrap();
        let exp = star.time_expansion(&pi).unwrap();
        let half_f = swap_operator(2).unwrap().scale(c(0.5, 0.0));
        let dev = exp.max_abs_diff(&half_f);
        assert!(dev > 1e-3, "expected a visible deviation, got {dev:.3e}");
        let ta = partial_trace(&exp, &[0]).unwrap();
        let tb = partial_trace(&exp, &[1]).unwrap();
        assert!(ta.max_abs_diff(&pi) <= 1e-10);
        assert!(tb.max_abs_diff(&pi) <= 1e-10);
    }

    #[test]
    fn extract_theta_oracles() {
        // FP: Theta_rho = (left + right multiplication) / 2.
        for d in 2..=4usize {
            let rho = random_state(d, d as u64).unwrap();
            let theta = StarProduct::fp().extract_theta(&rho).unwrap();
            let oracle = (superop::left_mult(&rho).unwrap()
                + superop::right_mult(&rho).unwrap())
                * c(0.5, 0.0);
            assert!(superop::max_abs_diff(&theta, &oracle) <= 1e-10);
        }
        // Bloom(mu): mu left + (1 - mu) right.
        let mu = 0.3;
        let rho = random_state(3, 7).unwrap();
        let theta = StarProduct::bloom(mu).extract_theta(&rho).unwrap();
        let oracle = superop::left_mult(&rho).unwrap() * c(mu, 0.0)
            + superop::right_mult(&rho).unwrap() * c(1.0 - mu, 0.0);
        assert!(superop::max_abs_diff(&theta, &oracle) <= 1e-10);
        // FP at the maximally mixed state: identity / d.
        let pi = Operator::maximally_mixed(4).unwrap();
        let theta = StarProduct::fp().extract_theta(&pi).unwrap();
        let oracle = DMatrix::<Complex64>::identity(16, 16) * c(0.25, 0.0);
        assert!(superop::max_abs_diff(&theta, &oracle) <= 1e-12);
    }

    #[test]
    fn theta_reconstructs_time_expansion() {
        let families = [
            StarProduct::fp(),
            StarProduct::bloom(0.2),
            StarProduct::cfam(0.4),
            StarProduct::eta_fam(0.5, 0).unwrap(),
            StarProduct::mean_marginal(),
        ];
        for star in &families {
            let rho = random_state(3, 11).unwrap();
            let theta = star.extract_theta(&rho).unwrap();
            let f = swap_operator(3).unwrap();
            let rebuilt = superop::apply_on_subsystem(&theta, &f, 0, &[3]).unwrap();
            let exp = star.time_expansion(&rho).unwrap();
            assert!(
                rebuilt.max_abs_diff(&exp) <= 1e-10,
                "roundtrip for {}",
                star.name()
            );
        }
    }

    #[test]
    fn subsystem_action_on_product_inputs() {
        let star = StarProduct::fp();
        let e = random_channel(2, 3, 2, 21).unwrap();
        let rho = random_state(2, 22).unwrap();
        let sigma = random_state(3, 23).unwrap();
        let joint = kron(&rho, &sigma);
        let out = star.star_on_subsystem(&e, &joint, 0).unwrap();
        let expect = kron(&star.star(&e, &rho).unwrap(), &sigma);
        assert!(out.max_abs_diff(&expect) <= 1e-11);
        assert_eq!(out.dims().dims(), &[2, 3, 3]);
        let traced = partial_trace(&out, &[2]).unwrap();
        assert!(traced.max_abs_diff(&star.star(&e, &rho).unwrap()) <= 1e-11);
    }

    #[test]
    fn subsystem_action_rejects_ls() {
        let ls = StarProduct::ls();
        let e = Channel::identity(DimsSpec::scalar(2).unwrap());
        let x = kron(
            &Operator::maximally_mixed(2).unwrap(),
            &Operator::maximally_mixed(2).unwrap(),
        );
        assert!(matches!(
            ls.star_on_subsystem(&e, &x, 0),
            Err(Error::UnsupportedStarKind { .. })
        ));
    }

    #[test]
    fn classical_three_party_joint() {
        let q = [[0.1, 0.3], [0.4, 0.2]]; // q(x, z)
        let p = [vec![0.9, 0.2], vec![0.1, 0.8]]; // P(y|x)
        let mut rho_ae = Operator::zeros(DimsSpec::new(vec![2, 2]).unwrap());
        for x in 0..2 {
            for z in 0..2 {
                let term = kron(
                    &Operator::basis_projector(2, x).unwrap(),
                    &Operator::basis_projector(2, z).unwrap(),
                )
                .scale(c(q[x][z], 0.0));
                rho_ae = rho_ae.add(&term).unwrap();
            }
        }
        let ch = Channel::classical(&p).unwrap();
        let out = StarProduct::fp().star_on_subsystem(&ch, &rho_ae, 0).unwrap();
        let mut expect = Operator::zeros(DimsSpec::new(vec![2, 2, 2]).unwrap());
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let term = kron(
                        &kron(
                            &Operator::basis_projector(2, x).unwrap(),
                            &Operator::basis_projector(2, y).unwrap(),
                        ),
                        &Operator::basis_projector(2, z).unwrap(),
                    )
                    .scale(c(q[x][z] * p[y][x], 0.0));
                    expect = expect.add(&term).unwrap();
                }
            }
        }
        assert!(out.max_abs_diff(&expect) <= 1e-12);
    }

    #[test]
    fn chain_star_basics() {
        let star = StarProduct::fp();
        let rho = random_state(2, 31).unwrap();
        let e = random_channel(2, 2, 2, 32).unwrap();
        let single_chain = star.chain_star(std::slice::from_ref(&e), &rho).unwrap();
        assert!(single_chain.max_abs_diff(&star.star(&e, &rho).unwrap()) <= 1e-12);

        let id = Channel::identity(DimsSpec::scalar(2).unwrap());
        let two = star.chain_star(&[id.clone(), id.clone()], &rho).unwrap();
        let traced = partial_trace(&two, &[1]).unwrap();
        assert!(traced.max_abs_diff(&star.time_expansion(&rho).unwrap()) <= 1e-11);

        let f = random_channel(2, 3, 2, 33).unwrap();
        let g = random_channel(3, 2, 2, 34).unwrap();
        let chain = star
            .chain_star(&[e.clone(), f.clone(), g.clone()], &rho)
            .unwrap();
        let marg = partial_trace(&chain, &[1, 2]).unwrap();
        let composed = g.compose(&f).unwrap().compose(&e).unwrap();
        let expect = star.star(&composed, &rho).unwrap();
        assert!(marg.max_abs_diff(&expect) <= 1e-9);
    }

    #[test]
    fn mean_marginal_expansion_shape() {
        let star = StarProduct::mean_marginal();
        let pi = Operator::maximally_mixed(3).unwrap();
        let exp = star.time_expansion(&pi).unwrap();
        let third_f = swap_operator(3).unwrap().scale(c(1.0 / 3.0, 0.0));
        assert!(exp.max_abs_diff(&third_f) <= 1e-14);
        let rho = random_state(3, 41).unwrap();
        let e2 = star.time_expansion(&rho).unwrap();
        let f = swap_operator(3).unwrap();
        let conj = f.matmul(&e2).unwrap().matmul(&f).unwrap();
        assert!(conj.max_abs_diff(&e2) <= 1e-12);
    }

    #[test]
    fn ls_requires_psd_input() {
        let not_psd = diag(&[1.5, -0.5]);
        assert!(matches!(
            StarProduct::ls().time_expansion(&not_psd),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn bloom_half_equals_fp() {
        for seed in 0..10u64 {
            let rho = random_state(3, seed).unwrap();
            let e = random_channel(3, 2, 2, seed + 1000).unwrap();
            let a = StarProduct::bloom(0.5).star(&e, &rho).unwrap();
            let b = StarProduct::fp().star(&e, &rho).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-12);
        }
    }

    #[test]
    fn depolarizing_star_is_product() {
        let e = depolarizing_to_mixed(2, 2).unwrap();
        let rho = random_state(2, 55).unwrap();
        let out = StarProduct::fp().star(&e, &rho).unwrap();
        let expect = kron(&rho, &Operator::maximally_mixed(2).unwrap());
        assert!(out.max_abs_diff(&expect) <= 1e-12);
    }
}
