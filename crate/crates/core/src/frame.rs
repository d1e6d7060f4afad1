//! Operator families over a discretised measure and the controlled frame
//! operator `S_{CC'} = Σ_k w_k C' Λ_k* Λ_k C`.

use crate::algebra::{is_hermitian_matrix, ToleranceConfig};
use crate::error::{domain, input, Error, Result};
use crate::linalg::{self, real, CMat, CVec, ONE};
use crate::module_space::{L2Section, ModuleOperator, ModuleSpace, ModuleVector};
use crate::quadrature::{discretize_interval, MeasureDiscretization, Rule};

/// Relative tolerance for commutation hypotheses.
pub const COMMUTE_TOL: f64 = 1e-8;

/// `‖XY − YX‖ ≤ COMMUTE_TOL · max(1, ‖X‖‖Y‖)`.
pub fn commute(x: &ModuleOperator, y: &ModuleOperator) -> bool {
    commutator_deviation(x, y) <= COMMUTE_TOL
}

/// `‖XY − YX‖ / max(1, ‖X‖‖Y‖)`; infinite when the operators cannot be composed both ways.
pub fn commutator_deviation(x: &ModuleOperator, y: &ModuleOperator) -> f64 {
    if !x.is_endomorphism() || x.domain() != y.domain() || !y.is_endomorphism() {
        return f64::INFINITY;
    }
    let scale = (x.norm() * y.norm()).max(1.0);
    linalg::commutator_norm(x.matrix(), y.matrix()) / scale
}

#[derive(Debug, Clone)]
pub enum OperatorFamily {
    /// One operator per quadrature node.
    Table(Vec<ModuleOperator>),
    /// `Λ_ω = (Σ_j c_j ω^j) · base`.
    ScalarProfile { base: ModuleOperator, coeffs: Vec<f64> },
}

impl OperatorFamily {
    fn first(&self) -> Option<&ModuleOperator> {
        match self {
            OperatorFamily::Table(ops) => ops.first(),
            OperatorFamily::ScalarProfile { base, .. } => Some(base),
        }
    }

    /// `Λ_{ω_k}`.
    pub fn at(&self, k: usize, omega: f64) -> ModuleOperator {
        match self {
            OperatorFamily::Table(ops) => ops[k].clone(),
            OperatorFamily::ScalarProfile { base, coeffs } => {
                let p = coeffs.iter().rev().fold(0.0, |acc, &c| acc * omega + c);
                base.scale(p)
            }
        }
    }
}

/// A controlled K-g-frame candidate `(Λ, C, C', K)` over a finite measure.
#[derive(Debug, Clone)]
pub struct FrameInstance {
    pub space: ModuleSpace,
    pub range: ModuleSpace,
    pub measure: MeasureDiscretization,
    pub family: OperatorFamily,
    pub c: ModuleOperator,
    pub c_prime: ModuleOperator,
    pub k: Option<ModuleOperator>,
    pub tolerances: ToleranceConfig,
}

impl FrameInstance {
    /// Validates shapes, `C, C' ∈ GL⁺(H)` and that every `Λ_ω` is A-linear
    /// and adjointable.
    pub fn new(
        measure: MeasureDiscretization,
        family: OperatorFamily,
        c: ModuleOperator,
        c_prime: ModuleOperator,
        k: Option<ModuleOperator>,
        tolerances: ToleranceConfig,
    ) -> Result<Self> {
        tolerances.validate()?;
        let first = family.first().ok_or_else(|| input("operator family is empty"))?;
        let space = first.domain().clone();
        let range = first.codomain().clone();
        if let OperatorFamily::Table(ops) = &family {
            if ops.len() != measure.len() {
                return Err(input(format!(
                    "table family has {} operators for {} quadrature nodes",
                    ops.len(),
                    measure.len()
                )));
            }
            if ops.iter().any(|op| op.domain() != &space || op.codomain() != &range) {
                return Err(input("family operators act between different spaces"));
            }
        }
        for (name, op) in [("C", &c), ("Cprime", &c_prime)] {
            if op.domain() != &space || op.codomain() != &space {
                return Err(input(format!("{name} must be an operator on the frame's module")));
            }
            gl_plus_check(name, op, &tolerances)?;
        }
        if let Some(k) = &k {
            if k.domain() != &space || k.codomain() != &space {
                return Err(input("K must be an operator on the frame's module"));
            }
        }
        for (name, op) in [("C", Some(&c)), ("Cprime", Some(&c_prime)), ("K", k.as_ref())] {
            if let Some(op) = op {
                if !op.verify_a_linear().is_certified() {
                    return Err(domain(format!("{name} is not A-linear")));
                }
                op.adjoint()?;
            }
        }
        let inst = FrameInstance {
            space,
            range,
            measure,
            family,
            c,
            c_prime,
            k,
            tolerances,
        };
        for (idx, op) in inst.distinct_operators().iter().enumerate() {
            if !op.verify_a_linear().is_certified() {
                return Err(domain(format!("family operator {idx} is not A-linear")));
            }
            op.adjoint()?;
        }
        Ok(inst)
    }

    fn distinct_operators(&self) -> Vec<ModuleOperator> {
        match &self.family {
            OperatorFamily::Table(ops) => ops.clone(),
            OperatorFamily::ScalarProfile { base, .. } => vec![base.clone()],
        }
    }

    /// `Λ_{ω_k}` for every node.
    pub fn operators(&self) -> Vec<ModuleOperator> {
        self.measure
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, &(omega, _))| self.family.at(k, omega))
            .collect()
    }

    /// `K`, or the identity when the instance has none.
    pub fn k_or_identity(&self) -> ModuleOperator {
        self.k.clone().unwrap_or_else(|| ModuleOperator::identity(&self.space))
    }

    /// Copy with `C = C' = I`, i.e. the plain g-frame of the same family.
    pub fn uncontrolled(&self) -> FrameInstance {
        let id = ModuleOperator::identity(&self.space);
        FrameInstance {
            c: id.clone(),
            c_prime: id,
            ..self.clone()
        }
    }

    /// Same measure, controllers and `K` with a new per-node family.
    pub fn with_family(&self, ops: Vec<ModuleOperator>) -> Result<FrameInstance> {
        FrameInstance::new(
            self.measure.clone(),
            OperatorFamily::Table(ops),
            self.c.clone(),
            self.c_prime.clone(),
            self.k.clone(),
            self.tolerances,
        )
    }

    /// Same family with new controllers.
    pub fn with_controllers(&self, c: ModuleOperator, c_prime: ModuleOperator) -> Result<FrameInstance> {
        FrameInstance::new(
            self.measure.clone(),
            self.family.clone(),
            c,
            c_prime,
            self.k.clone(),
            self.tolerances,
        )
    }

    /// `(CC')^{1/2}`, defined when `C` and `C'` commute.
    pub fn controller_root(&self) -> Result<ModuleOperator> {
        if !commute(&self.c, &self.c_prime) {
            return Err(domain(format!(
                "C and C' do not commute (relative deviation {:.3e}); (CC')^(1/2) is undefined",
                commutator_deviation(&self.c, &self.c_prime)
            )));
        }
        let product = self.c.matrix() * self.c_prime.matrix();
        ModuleOperator::endo(&self.space, linalg::sqrt_psd_clamped(&product))
    }
}

/// Hermitian with `λ_min > tol_psd`.
pub fn gl_plus_check(name: &str, op: &ModuleOperator, cfg: &ToleranceConfig) -> Result<()> {
    let m = op.matrix();
    let scale = op.norm().max(1.0);
    if !is_hermitian_matrix(m, &ToleranceConfig { tol_h: cfg.tol_h * scale, ..*cfg }) {
        return Err(domain(format!("{name} is not self-adjoint")));
    }
    let (values, _) = linalg::eigh(m);
    let lo = values.first().copied().unwrap_or(0.0);
    if lo <= cfg.tol_psd {
        return Err(domain(format!("{name} is not positive invertible (λ_min = {lo:.3e})")));
    }
    Ok(())
}

/// Outcome of the Proposition's positivity claim for `S_{CC'}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositivityCheck {
    /// `C`, `C'` commute with each other and with every `Λ_ω*Λ_ω`.
    pub hypotheses_hold: bool,
    pub self_adjoint: bool,
    /// Evaluated only when the hypotheses hold.
    pub positive: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct FrameOperators {
    /// `S_{CC'}`.
    pub controlled: ModuleOperator,
    /// `S = Σ w_k Λ_k* Λ_k`.
    pub plain: ModuleOperator,
    pub positivity: PositivityCheck,
}

/// Assemble `S_{CC'}` and `S` by a fixed-order sum over the nodes.
pub fn assemble_frame_operator(inst: &FrameInstance) -> Result<FrameOperators> {
    let dim = inst.space.dim();
    let mut plain = CMat::zeros(dim, dim);
    let mut controlled = CMat::zeros(dim, dim);
    let mut gram_commutes = true;
    for (op, &(_, w)) in inst.operators().iter().zip(inst.measure.nodes()) {
        if w == 0.0 {
            continue;
        }
        if op.codomain() != &inst.range || op.domain() != &inst.space {
            return Err(input("family operator dimensions differ across nodes"));
        }
        let gram = op.matrix().adjoint() * op.matrix();
        let gram_op = ModuleOperator::endo(&inst.space, gram.clone())?;
        gram_commutes &= commute(&inst.c, &gram_op) && commute(&inst.c_prime, &gram_op);
        controlled += (inst.c_prime.matrix() * &gram * inst.c.matrix()).scale(w);
        plain += gram.scale(w);
    }
    let controlled = ModuleOperator::endo(&inst.space, controlled)?;
    let plain = ModuleOperator::endo(&inst.space, plain)?;
    let hypotheses_hold = gram_commutes && commute(&inst.c, &inst.c_prime);
    let cfg = &inst.tolerances;
    let scale = controlled.norm().max(1.0);
    let self_adjoint = linalg::max_abs(&(controlled.matrix() - controlled.matrix().adjoint()))
        <= cfg.tol_h.max(COMMUTE_TOL) * scale;
    let positive = hypotheses_hold.then(|| {
        let (values, _) = linalg::eigh(controlled.matrix());
        values.first().copied().unwrap_or(0.0) >= -cfg.tol_psd * scale
    });
    if positive == Some(false) || (hypotheses_hold && !self_adjoint) {
        return Err(Error::Inconsistent(
            "S_CC' fails to be positive although C, C' commute with the frame".into(),
        ));
    }
    Ok(FrameOperators {
        controlled,
        plain,
        positivity: PositivityCheck {
            hypotheses_hold,
            self_adjoint,
            positive,
        },
    })
}

fn check_section(inst: &FrameInstance, y: &L2Section) -> Result<()> {
    if y.blocks.len() != inst.measure.len() {
        return Err(input(format!(
            "section has {} blocks for {} nodes",
            y.blocks.len(),
            inst.measure.len()
        )));
    }
    if y.blocks.iter().any(|b| b.space != inst.range) {
        return Err(input("section blocks are not in the range module"));
    }
    Ok(())
}

/// `T_{CC'} y = Σ_k w_k (CC')^{1/2} Λ_k* y_k`.
pub fn synthesis_apply(inst: &FrameInstance, y: &L2Section) -> Result<ModuleVector> {
    check_section(inst, y)?;
    let root = inst.controller_root()?;
    let mut acc = CVec::zeros(inst.space.dim());
    for ((op, &(_, w)), yk) in inst.operators().iter().zip(inst.measure.nodes()).zip(&y.blocks) {
        acc += (op.matrix().adjoint() * &yk.coords).scale(w);
    }
    ModuleVector::new(&inst.space, root.matrix() * acc)
}

/// `T*_{CC'} x = {Λ_k (C'C)^{1/2} x}`.
pub fn analysis_apply(inst: &FrameInstance, x: &ModuleVector) -> Result<L2Section> {
    if x.space != inst.space {
        return Err(input("vector is not in the frame's module"));
    }
    let root = inst.controller_root()?;
    let rx = root.matrix() * &x.coords;
    let blocks = inst
        .operators()
        .iter()
        .map(|op| ModuleVector::new(&inst.range, op.matrix() * &rx))
        .collect::<Result<Vec<_>>>()?;
    let weights = inst.measure.nodes().iter().map(|n| n.1).collect();
    L2Section::new(weights, blocks)
}

/// `‖T_{CC'}‖²` as `σ_max²` of `[√w_k (CC')^{1/2} Λ_k*]_k`.
pub fn synthesis_norm_squared(inst: &FrameInstance) -> Result<f64> {
    let root = inst.controller_root()?;
    let ops = inst.operators();
    let rd = inst.range.dim();
    let mut t = CMat::zeros(inst.space.dim(), rd * ops.len());
    for (k, (op, &(_, w))) in ops.iter().zip(inst.measure.nodes()).enumerate() {
        let block = (root.matrix() * op.matrix().adjoint()).scale(w.sqrt());
        t.view_mut((0, k * rd), (inst.space.dim(), rd)).copy_from(&block);
    }
    Ok(linalg::op_norm(&t).powi(2))
}

pub const EXAMPLE_PATTERN: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 1), (1, 3)];

/// The 2×4 pattern module with entries `a, b, c, d`.
pub fn example_space() -> ModuleSpace {
    ModuleSpace::pattern(2, 4, EXAMPLE_PATTERN.to_vec()).expect("valid pattern")
}

/// The mask keeping `b`, `c` and zeroing `a`, `d`: right multiplication by `E_22`.
pub fn example_mask(space: &ModuleSpace) -> ModuleOperator {
    let mut p = CMat::zeros(4, 4);
    p[(1, 1)] = ONE;
    ModuleOperator::pattern_right_multiplication(space, &p).expect("E_22 keeps the pattern")
}

/// The pattern-module example: `Λ_ω = ω·mask`, `K = mask`, `C = αI`,
/// `C' = βI`, `Ω = [0, 1]` with Lebesgue measure.
pub fn build_paper_example(alpha: f64, beta: f64, rule: Rule, n: usize) -> Result<FrameInstance> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(input("α and β must be positive"));
    }
    let space = example_space();
    let mask = example_mask(&space);
    FrameInstance::new(
        discretize_interval(0.0, 1.0, rule, n)?,
        OperatorFamily::ScalarProfile {
            base: mask.clone(),
            coeffs: vec![0.0, 1.0],
        },
        ModuleOperator::scalar(&space, real(alpha)),
        ModuleOperator::scalar(&space, real(beta)),
        Some(mask),
        ToleranceConfig::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::module_space::{inner_product, GramTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_instance() -> FrameInstance {
        let s = ModuleSpace::free(1, 2).unwrap();
        let id = ModuleOperator::identity(&s);
        FrameInstance::new(
            MeasureDiscretization::discrete(vec![(0.0, 1.0)]).unwrap(),
            OperatorFamily::Table(vec![id.clone()]),
            id.clone(),
            id,
            None,
            ToleranceConfig::default(),
        )
        .unwrap()
    }

    fn random_table_instance(seed: u64) -> FrameInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ModuleSpace::free(2, 2).unwrap();
        let p = linalg::random_hermitian_with_spectrum(&mut rng, 4, 0.5, 2.0);
        // Λ_k = U_k g_k(P), so Λ_k*Λ_k commutes with every function of P
        let ops: Vec<_> = (0..3)
            .map(|_| {
                let u = ModuleOperator::right_multiplication(&s, &linalg::random_unitary(&mut rng, 4)).unwrap();
                let g = linalg::matrix_polynomial(&p, &[linalg::random_complex(&mut rng), linalg::random_complex(&mut rng)]);
                let g = ModuleOperator::right_multiplication(&s, &g).unwrap();
                u.compose(&g).unwrap()
            })
            .collect();
        let c = ModuleOperator::right_multiplication(&s, &p).unwrap();
        let cp = ModuleOperator::right_multiplication(&s, &(&p * &p + CMat::identity(4, 4))).unwrap();
        FrameInstance::new(
            MeasureDiscretization::discrete(vec![(0.1, 0.3), (0.5, 0.7), (0.9, 0.2)]).unwrap(),
            OperatorFamily::Table(ops),
            c,
            cp,
            None,
            ToleranceConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn identity_instance_assembles_to_identity() {
        let inst = identity_instance();
        let ops = assemble_frame_operator(&inst).unwrap();
        assert_eq!(ops.controlled, ModuleOperator::identity(&inst.space));
        assert_eq!(ops.positivity.positive, Some(true));
    }

    #[test]
    fn synthesis_and_analysis_on_identity_instance() {
        let inst = identity_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ModuleVector::new(&inst.space, linalg::random_vector(&mut rng, 4)).unwrap();
        let y = analysis_apply(&inst, &x).unwrap();
        assert!((&y.blocks[0].coords - &x.coords).norm() < 1e-14);
        let back = synthesis_apply(&inst, &y).unwrap();
        assert!((back.coords - x.coords).norm() < 1e-14);
    }

    #[test]
    fn example_integral_form_is_a_third_of_the_k_form() {
        let inst = build_paper_example(1.0, 1.0, Rule::GaussLegendre, 2).unwrap();
        let s = assemble_frame_operator(&inst).unwrap().controlled;
        let integral = GramTable::of_operator(&s).unwrap();
        let k_form = GramTable::of_gram(inst.k.as_ref().unwrap()).unwrap();
        let diff = integral.combine(&k_form, 1.0, -1.0 / 3.0).unwrap();
        assert!(diff.max_abs() < 1e-15);
    }

    #[test]
    fn example_scales_with_alpha_beta() {
        let inst = build_paper_example(2.0, 3.0, Rule::GaussLegendre, 2).unwrap();
        let s = assemble_frame_operator(&inst).unwrap().controlled;
        let integral = GramTable::of_operator(&s).unwrap();
        let k_form = GramTable::of_gram(inst.k.as_ref().unwrap()).unwrap();
        assert!(integral.combine(&k_form, 1.0, -2.0).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn example_analysis_of_e_b() {
        let (alpha, beta) = (2.0, 0.5);
        let inst = build_paper_example(alpha, beta, Rule::GaussLegendre, 3).unwrap();
        let e_b = ModuleVector::new(&inst.space, inst.space.complex_basis(1)).unwrap();
        let y = analysis_apply(&inst, &e_b).unwrap();
        for (block, &(omega, _)) in y.blocks.iter().zip(inst.measure.nodes()) {
            let mut expected = CVec::zeros(4);
            expected[1] = real(omega * (alpha * beta as f64).sqrt());
            assert!((&block.coords - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn random_instance_matches_resummation_and_adjointness() {
        let inst = random_table_instance(5);
        let ops = assemble_frame_operator(&inst).unwrap();
        // S_CC' = C' S C
        let factored = inst.c_prime.matrix() * ops.plain.matrix() * inst.c.matrix();
        assert!(linalg::max_abs(&(factored - ops.controlled.matrix())) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = ModuleVector::new(&inst.space, linalg::random_vector(&mut rng, 8)).unwrap();
        let blocks = (0..3)
            .map(|_| ModuleVector::new(&inst.range, linalg::random_vector(&mut rng, 8)).unwrap())
            .collect();
        let y = L2Section::new(inst.measure.nodes().iter().map(|n| n.1).collect(), blocks).unwrap();
        let lhs = inner_product(&synthesis_apply(&inst, &y).unwrap(), &x).unwrap();
        let rhs = y.inner(&analysis_apply(&inst, &x).unwrap()).unwrap();
        assert!((lhs.matrix() - rhs.matrix()).norm() < 1e-10);

        let tt = synthesis_apply(&inst, &analysis_apply(&inst, &x).unwrap()).unwrap();
        let sx = ops.controlled.apply(&x).unwrap();
        assert!((tt.coords - sx.coords).norm() < 1e-10);
    }

    #[test]
    fn non_commuting_controllers_refuse_synthesis() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = ModuleSpace::free(2, 1).unwrap();
        let p = linalg::random_hermitian_with_spectrum(&mut rng, 2, 0.5, 2.0);
        let q = linalg::random_hermitian_with_spectrum(&mut rng, 2, 0.5, 2.0);
        let inst = FrameInstance::new(
            MeasureDiscretization::discrete(vec![(0.0, 1.0)]).unwrap(),
            OperatorFamily::Table(vec![ModuleOperator::identity(&s)]),
            ModuleOperator::right_multiplication(&s, &p).unwrap(),
            ModuleOperator::right_multiplication(&s, &q).unwrap(),
            None,
            ToleranceConfig::default(),
        )
        .unwrap();
        let x = s.zero();
        assert!(matches!(analysis_apply(&inst, &x), Err(Error::Domain(_))));
        assert!(!assemble_frame_operator(&inst).unwrap().positivity.hypotheses_hold);
    }

    #[test]
    fn controllers_must_be_positive_invertible() {
        let s = ModuleSpace::free(1, 1).unwrap();
        let id = ModuleOperator::identity(&s);
        let err = FrameInstance::new(
            MeasureDiscretization::discrete(vec![(0.0, 1.0)]).unwrap(),
            OperatorFamily::Table(vec![id.clone()]),
            ModuleOperator::scalar(&s, real(-1.0)),
            id,
            None,
            ToleranceConfig::default(),
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn table_length_must_match_nodes() {
        let s = ModuleSpace::free(1, 1).unwrap();
        let id = ModuleOperator::identity(&s);
        let err = FrameInstance::new(
            MeasureDiscretization::discrete(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap(),
            OperatorFamily::Table(vec![id.clone()]),
            id.clone(),
            id,
            None,
            ToleranceConfig::default(),
        );
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn synthesis_norm_matches_top_eigenvalue() {
        let inst = random_table_instance(11);
        let s = assemble_frame_operator(&inst).unwrap().controlled;
        let (values, _) = linalg::eigh(s.matrix());
        let top = *values.last().unwrap();
        let t2 = synthesis_norm_squared(&inst).unwrap();
        assert!((t2 - top).abs() < 1e-9 * top);
    }
}
