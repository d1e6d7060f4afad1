//! Frame inequalities: upper and lower bound verdicts, optimal bounds and the
//! Douglas range-inclusion toolkit.
//!
//! Free modules are decided exactly by flattening to `M_{nd}(ℂ)`. Pattern
//! modules go through [`form_compare`], and their optimal bounds come from
//! the block relaxation, which is always feasible and is followed by a
//! falsification probe just past the reported value.

use serde::Serialize;

use crate::algebra::ToleranceConfig;
use crate::error::{domain, input, Result};
use crate::frame::{assemble_frame_operator, FrameInstance};
use crate::linalg::{self, CMat};
use crate::module_space::{flatten_positive_test, form_compare, GramTable, ModuleOperator};
use crate::verdict::{Status, Verdict};

/// Relative back-off applied to optimal bounds before they are fed into
/// further certifications, so that chained claims keep a positive margin.
pub const BOUND_BACKOFF: f64 = 1e-6;
/// Relative step used by the consistency and optimality probes.
pub const PROBE_STEP: f64 = 1e-3;
/// Relative size of `X` on `ker Y` above which [`genratio`] is unbounded.
const KERNEL_LEAK_TOL: f64 = 1e-7;

/// Verdict on `⟨L f, f⟩ ⪯ ⟨R f, f⟩` for every module element `f`.
pub fn compare_forms(lhs: &ModuleOperator, rhs: &ModuleOperator, cfg: &ToleranceConfig) -> Result<Verdict> {
    if lhs.domain() != rhs.domain() || !lhs.is_endomorphism() || !rhs.is_endomorphism() {
        return Err(input("forms must be defined by endomorphisms of the same module"));
    }
    if lhs.domain().is_free() {
        flatten_positive_test(&rhs.sub(lhs)?, cfg)
    } else {
        form_compare(&GramTable::of_operator(lhs)?, &GramTable::of_operator(rhs)?, cfg)
    }
}

fn check_constant(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(input(format!("bound {name} must be finite and non-negative, got {value}")));
    }
    Ok(())
}

/// `S ⪯ B·I` for an assembled frame operator.
pub fn upper_with(s: &ModuleOperator, b: f64, cfg: &ToleranceConfig) -> Result<Verdict> {
    check_constant("B", b)?;
    compare_forms(s, &ModuleOperator::identity(s.domain()).scale(b), cfg)
}

/// `A·KK* ⪯ S` for an assembled frame operator.
pub fn lower_with(s: &ModuleOperator, k: &ModuleOperator, a: f64, cfg: &ToleranceConfig) -> Result<Verdict> {
    check_constant("A", a)?;
    compare_forms(&k.compose(&k.trace_adjoint())?.scale(a), s, cfg)
}

/// Upper frame inequality `∫⟨Λ_ω C f, Λ_ω C' f⟩ ⪯ B⟨f, f⟩`.
pub fn certify_upper(inst: &FrameInstance, b: f64, cfg: &ToleranceConfig) -> Result<Verdict> {
    upper_with(&assemble_frame_operator(inst)?.controlled, b, cfg)
}

/// Lower frame inequality `A⟨K*f, K*f⟩ ⪯ ∫⟨Λ_ω C f, Λ_ω C' f⟩`.
pub fn certify_lower_k(inst: &FrameInstance, a: f64, cfg: &ToleranceConfig) -> Result<Verdict> {
    let k = inst.k.as_ref().ok_or_else(|| input("instance has no K"))?;
    lower_with(&assemble_frame_operator(inst)?.controlled, k, a, cfg)
}

/// `sup u*Xu / u*Yu` over `u` outside `ker Y`, for Hermitian `X` and PSD `Y`.
/// `None` when `X` does not vanish on `ker Y` (the ratio is unbounded).
pub fn genratio(x: &CMat, y: &CMat, rel_tol: f64) -> Option<f64> {
    let (values, vectors) = linalg::eigh(y);
    let top = values.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let cut = rel_tol * top;
    let x = linalg::hermitian_part(x);
    let x_scale = linalg::op_norm(&x).max(1.0);
    let (mut range, mut kernel) = (Vec::new(), Vec::new());
    for (j, &v) in values.iter().enumerate() {
        if v > cut {
            range.push(j);
        } else {
            kernel.push(j);
        }
    }
    if !kernel.is_empty() {
        let n = CMat::from_columns(&kernel.iter().map(|&j| vectors.column(j)).collect::<Vec<_>>());
        if linalg::op_norm(&(&x * &n)) > KERNEL_LEAK_TOL * x_scale {
            return None;
        }
    }
    if range.is_empty() {
        return Some(0.0);
    }
    let w = CMat::from_columns(
        &range
            .iter()
            .map(|&j| vectors.column(j).unscale(values[j].sqrt()))
            .collect::<Vec<_>>(),
    );
    let (ratios, _) = linalg::eigh(&(w.adjoint() * x * &w));
    ratios.last().copied()
}

/// Result of the Douglas factorisation test for `T' = T X`.
#[derive(Debug, Clone)]
pub struct DouglasResult {
    pub in_range: bool,
    /// Least `λ` with `T'T'* ⪯ λ TT*` (certified end of the bisection bracket).
    pub lambda_min: Option<f64>,
    /// Least-squares solution of `T D = T'`.
    pub d: Option<ModuleOperator>,
    pub residual: f64,
}

/// Decides `R(T') ⊆ R(T)` by solving `T X = T'` in least squares, then
/// bisects on `T'T'* ⪯ λ TT*` for the majorisation constant.
pub fn douglas_check(t: &ModuleOperator, t_prime: &ModuleOperator, cfg: &ToleranceConfig) -> Result<DouglasResult> {
    if t.codomain() != t_prime.codomain() {
        return Err(input("Douglas check needs operators with a common codomain"));
    }
    let tm = t.matrix();
    let tp = t_prime.matrix();
    let x = linalg::pinv(tm, cfg.tol_psd) * tp;
    let residual = linalg::op_norm(&(tm * &x - tp));
    let tp_norm = linalg::op_norm(tp);
    let in_range = residual <= cfg.tol_residual * tp_norm.max(1.0);
    if !in_range {
        return Ok(DouglasResult {
            in_range,
            lambda_min: None,
            d: None,
            residual,
        });
    }
    // The reduced solution `T⁺T'` has the least norm, and its squared norm is the least `λ`.
    let lambda_min = linalg::op_norm(&x).powi(2);
    let d = ModuleOperator::new(t_prime.domain(), t.domain(), x)?;
    Ok(DouglasResult {
        in_range,
        lambda_min: Some(lambda_min),
        d: Some(d),
        residual,
    })
}

/// `(m, M)` with `m·I ⪯ C ⪯ M·I`.
pub fn controller_spectral_data(c: &ModuleOperator, cfg: &ToleranceConfig) -> Result<(f64, f64)> {
    if !c.is_self_adjoint(cfg) {
        return Err(domain("controller is not self-adjoint"));
    }
    let (values, _) = linalg::eigh(c.matrix());
    let (m, big_m) = (values[0], values[values.len() - 1]);
    if m <= cfg.tol_psd {
        return Err(domain(format!("controller is not positive invertible (λ_min = {m:.3e})")));
    }
    Ok((m, big_m))
}

/// Hermitian matrix whose PSD-ness decides positivity of `f ↦ ⟨Qf, f⟩`:
/// exactly on free modules, as a sufficient condition on pattern modules.
pub fn form_matrix(q: &ModuleOperator) -> Result<CMat> {
    if q.domain().is_free() {
        Ok(linalg::hermitian_part(q.matrix()))
    } else {
        Ok(linalg::hermitian_part(&GramTable::of_operator(q)?.big_block()))
    }
}

/// Least `B` with `S ⪯ B·I` (relaxation value on pattern modules).
pub fn optimal_upper(s: &ModuleOperator, cfg: &ToleranceConfig) -> Result<f64> {
    let id = form_matrix(&ModuleOperator::identity(s.domain()))?;
    Ok(genratio(&form_matrix(s)?, &id, cfg.tol_psd).unwrap_or(f64::INFINITY).max(0.0))
}

/// Greatest `A` with `A·KK* ⪯ S`: `0` when no positive constant exists and
/// `+∞` when `K = 0`.
pub fn optimal_lower(s: &ModuleOperator, k: &ModuleOperator, cfg: &ToleranceConfig) -> Result<f64> {
    let kk = form_matrix(&k.compose(&k.trace_adjoint())?)?;
    Ok(match genratio(&kk, &form_matrix(s)?, cfg.tol_psd) {
        Some(r) if r > 0.0 => 1.0 / r,
        Some(_) => f64::INFINITY,
        None => 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameClass {
    ControlledGFrame,
    ControlledKgFrame,
    BesselOnly,
    NotBessel,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    /// Least Bessel constant against `⟨f, f⟩`.
    pub b_opt: f64,
    /// Greatest lower constant against `⟨K*f, K*f⟩`.
    pub a_opt: Option<f64>,
    /// Least upper constant against `⟨K*f, K*f⟩`.
    pub b_k: Option<f64>,
    /// Greatest lower constant against `⟨f, f⟩`.
    pub g_lower: f64,
    pub tight: bool,
    pub parseval: bool,
    pub frame_class: FrameClass,
    /// `R(K) ⊆ R(S^{1/2})`.
    pub range_inclusion: bool,
    /// Exact (free module) or relaxation-based (pattern module).
    pub exact: bool,
    pub upper_check: Status,
    pub lower_check: Option<Status>,
    pub notes: Vec<String>,
}

/// Optimal frame bounds of an instance, checked by certifying slightly
/// relaxed constants.
pub fn optimal_bounds(inst: &FrameInstance, cfg: &ToleranceConfig) -> Result<BoundsReport> {
    let s = assemble_frame_operator(inst)?.controlled;
    let k = inst.k_or_identity();
    bounds_for(&s, &k, cfg)
}

/// [`optimal_bounds`] for an already assembled `S_{CC'}` and target `K`.
pub fn bounds_for(s: &ModuleOperator, k: &ModuleOperator, cfg: &ToleranceConfig) -> Result<BoundsReport> {
    let space = s.domain();
    let kk = k.compose(&k.trace_adjoint())?;
    let identity = ModuleOperator::identity(space);
    let mut notes = Vec::new();
    let s_form = form_matrix(s)?;
    let kk_form = form_matrix(&kk)?;
    let id_form = form_matrix(&identity)?;
    let scale = linalg::op_norm(&s_form).max(1.0);
    if !s.is_self_adjoint(cfg) {
        notes.push("S_CC' is not self-adjoint; bounds describe its Hermitian part".into());
    }
    let (s_values, _) = linalg::eigh(&s_form);
    if space.is_free() && s_values[0] < -cfg.tol_falsify * scale {
        return Err(domain(format!(
            "frame operator is not positive (λ_min = {:.3e})",
            s_values[0]
        )));
    }

    let b_opt = genratio(&s_form, &id_form, cfg.tol_psd).unwrap_or(f64::INFINITY).max(0.0);
    let g_lower = genratio(&id_form, &s_form, cfg.tol_psd).map_or(0.0, |r| if r > 0.0 { 1.0 / r } else { 0.0 });

    let (a_opt, range_inclusion) = if linalg::max_abs(k.matrix()) == 0.0 {
        notes.push("K = 0: the lower inequality holds for every A, no greatest constant".into());
        (None, true)
    } else if space.is_free() {
        let root = ModuleOperator::endo(space, linalg::sqrt_psd_clamped(s.matrix()))?;
        let douglas = douglas_check(&root, k, cfg)?;
        if douglas.in_range {
            let s_pinv = linalg::pinv_hermitian(s.matrix(), cfg.tol_psd);
            let inner = k.matrix().adjoint() * s_pinv * k.matrix();
            let (values, _) = linalg::eigh(&inner);
            let top = values.last().copied().unwrap_or(0.0);
            (Some(1.0 / top), true)
        } else {
            notes.push(format!(
                "R(K) is not contained in R(S^(1/2)) (residual {:.3e}); no positive lower K-bound",
                douglas.residual
            ));
            (None, false)
        }
    } else {
        match genratio(&kk_form, &s_form, cfg.tol_psd) {
            Some(r) if r > 0.0 => (Some(1.0 / r), true),
            _ => {
                notes.push("relaxation finds no positive lower K-bound".into());
                (None, false)
            }
        }
    };
    let b_k = genratio(&s_form, &kk_form, cfg.tol_psd);

    let tight = match (a_opt, b_k) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-8 * b.max(1.0),
        _ => false,
    };
    let parseval = tight && a_opt.is_some_and(|a| (a - 1.0).abs() <= 1e-8);

    let frame_class = if !b_opt.is_finite() {
        FrameClass::NotBessel
    } else if g_lower > cfg.tol_psd * scale {
        FrameClass::ControlledGFrame
    } else if a_opt.is_some_and(|a| a > cfg.tol_psd) {
        FrameClass::ControlledKgFrame
    } else {
        FrameClass::BesselOnly
    };

    let upper_check = upper_with(s, b_opt * (1.0 + PROBE_STEP), cfg)?.status;
    let lower_check = match a_opt {
        Some(a) => Some(lower_with(s, k, a * (1.0 - PROBE_STEP), cfg)?.status),
        None => None,
    };
    if !space.is_free() {
        if !upper_with(s, b_opt * (1.0 - PROBE_STEP), cfg)?.is_falsified() {
            notes.push("B_opt is certified feasible; its optimality gap is undetermined".into());
        }
        if let Some(a) = a_opt {
            if !lower_with(s, k, a * (1.0 + PROBE_STEP), cfg)?.is_falsified() {
                notes.push("A_opt is certified feasible; its optimality gap is undetermined".into());
            }
        }
    }
    Ok(BoundsReport {
        b_opt,
        a_opt,
        b_k,
        g_lower,
        tight,
        parseval,
        frame_class,
        range_inclusion,
        exact: space.is_free(),
        upper_check,
        lower_check,
        notes,
    })
}
