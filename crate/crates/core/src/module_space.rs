//! Hilbert A-modules over `A = M_n(ℂ)` and adjointable operators between them.
//!
//! Two kinds of space are supported:
//!
//! * `Free(d)`: tuples `(x_1, …, x_d)` of algebra elements with
//!   `⟨x, y⟩ = Σ x_i y_i*` and the left action `a·x = (a x_1, …, a x_d)`.
//!   Coordinates are the `d` blocks, each `n×n` row-major.
//! * `Pattern(p, q, P)`: `p×q` complex matrices supported on the index set `P`
//!   with `⟨M, N⟩ = M N*` in `M_p(ℂ)`. Coordinates are the entries at `P` in
//!   the listed order. Left multiplication generally leaves the pattern, so
//!   such a space is treated as a complex subspace carrying an A-valued form,
//!   and A-linearity is only tested against the subalgebra that preserves it.
//!
//! In both cases `trace ⟨x, y⟩` is the Euclidean inner product of coordinate
//! vectors, so the trace-scalarised adjoint of an operator is the conjugate
//! transpose of its coordinate matrix.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{psd_verdict, AlgebraElement, ToleranceConfig};
use crate::error::{input, Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, ONE, ZERO};
use crate::verdict::{Verdict, Witness};

/// Number of random pairs used by the A-linearity and adjointness checks.
pub const RANDOM_CHECKS: usize = 50;
/// Relative tolerance of the A-linearity and adjointness checks.
pub const IDENTITY_TOL: f64 = 1e-10;
const CHECK_SEED: u64 = 0x5eed_a11e;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    Free {
        rank: usize,
    },
    /// `pattern` holds zero-based `(row, col)` positions.
    Pattern {
        rows: usize,
        cols: usize,
        pattern: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModuleSpace {
    kind: ModuleKind,
    algebra_dim: usize,
}

impl ModuleSpace {
    pub fn free(rank: usize, algebra_dim: usize) -> Result<Self> {
        if rank == 0 || algebra_dim == 0 {
            return Err(input("free module needs rank ≥ 1 and algebra_dim ≥ 1"));
        }
        Ok(ModuleSpace {
            kind: ModuleKind::Free { rank },
            algebra_dim,
        })
    }

    /// `pattern` is zero-based.
    pub fn pattern(rows: usize, cols: usize, pattern: Vec<(usize, usize)>) -> Result<Self> {
        if rows == 0 || cols == 0 || pattern.is_empty() {
            return Err(input("pattern module needs rows, cols ≥ 1 and a non-empty pattern"));
        }
        for (k, &(i, j)) in pattern.iter().enumerate() {
            if i >= rows || j >= cols {
                return Err(input(format!(
                    "pattern position ({}, {}) outside {rows}x{cols}",
                    i + 1,
                    j + 1
                )));
            }
            if pattern[..k].contains(&(i, j)) {
                return Err(input(format!("duplicate pattern position ({}, {})", i + 1, j + 1)));
            }
        }
        Ok(ModuleSpace {
            kind: ModuleKind::Pattern {
                rows,
                cols,
                pattern,
            },
            algebra_dim: rows,
        })
    }

    pub fn kind(&self) -> &ModuleKind {
        &self.kind
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    pub fn is_free(&self) -> bool {
        matches!(self.kind, ModuleKind::Free { .. })
    }

    pub fn rank(&self) -> Option<usize> {
        match self.kind {
            ModuleKind::Free { rank } => Some(rank),
            ModuleKind::Pattern { .. } => None,
        }
    }

    /// Ambient complex dimension `D`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            ModuleKind::Free { rank } => rank * self.algebra_dim * self.algebra_dim,
            ModuleKind::Pattern { pattern, .. } => pattern.len(),
        }
    }

    pub fn zero(&self) -> ModuleVector {
        ModuleVector {
            space: self.clone(),
            coords: CVec::zeros(self.dim()),
        }
    }

    /// `k`-th complex coordinate basis vector.
    pub fn complex_basis(&self, k: usize) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[k] = ONE;
        v
    }

    /// Free basis vector `e_i`: identity in block `i`, zero elsewhere.
    pub fn free_basis(&self, i: usize) -> Result<ModuleVector> {
        let rank = self
            .rank()
            .ok_or_else(|| Error::Unsupported("free basis of a pattern module".into()))?;
        if i >= rank {
            return Err(input(format!("free basis index {i} out of range")));
        }
        let n = self.algebra_dim;
        let mut coords = CVec::zeros(self.dim());
        for r in 0..n {
            coords[i * n * n + r * n + r] = ONE;
        }
        Ok(ModuleVector {
            space: self.clone(),
            coords,
        })
    }

    /// Algebra-valued components: the `d` blocks of a free vector, or the
    /// single `p×q` matrix of a pattern vector.
    pub fn components(&self, coords: &CVec) -> Vec<CMat> {
        let n = self.algebra_dim;
        match &self.kind {
            ModuleKind::Free { rank } => (0..*rank)
                .map(|i| CMat::from_fn(n, n, |r, s| coords[i * n * n + r * n + s]))
                .collect(),
            ModuleKind::Pattern {
                rows,
                cols,
                pattern,
            } => {
                let mut m = CMat::zeros(*rows, *cols);
                for (k, &(i, j)) in pattern.iter().enumerate() {
                    m[(i, j)] = coords[k];
                }
                vec![m]
            }
        }
    }

    /// A-valued inner product of coordinate vectors.
    pub fn inner_coords(&self, x: &CVec, y: &CVec) -> CMat {
        let n = self.algebra_dim;
        let mut acc = CMat::zeros(n, n);
        for (xi, yi) in self.components(x).iter().zip(self.components(y).iter()) {
            acc += xi * yi.adjoint();
        }
        acc
    }

    /// Positions `(r, s)` where an admissible algebra element may be non-zero.
    /// For free modules that is every position; for pattern modules row `s`
    /// may feed row `r` only when its support is contained in row `r`'s.
    pub fn admissible_positions(&self) -> Vec<(usize, usize)> {
        let n = self.algebra_dim;
        match &self.kind {
            ModuleKind::Free { .. } => (0..n).flat_map(|r| (0..n).map(move |s| (r, s))).collect(),
            ModuleKind::Pattern { rows, pattern, .. } => {
                let support: Vec<Vec<usize>> = (0..*rows)
                    .map(|r| pattern.iter().filter(|p| p.0 == r).map(|p| p.1).collect())
                    .collect();
                let mut out = Vec::new();
                for r in 0..*rows {
                    for s in 0..*rows {
                        if support[s].iter().all(|col| support[r].contains(col)) {
                            out.push((r, s));
                        }
                    }
                }
                out
            }
        }
    }

    /// Left action `a·x`, or `None` when the result leaves the space.
    pub fn left_action(&self, a: &CMat, x: &CVec) -> Option<CVec> {
        let n = self.algebra_dim;
        match &self.kind {
            ModuleKind::Free { rank } => {
                let mut out = CVec::zeros(self.dim());
                for (i, block) in self.components(x).iter().enumerate().take(*rank) {
                    let prod = a * block;
                    for r in 0..n {
                        for s in 0..n {
                            out[i * n * n + r * n + s] = prod[(r, s)];
                        }
                    }
                }
                Some(out)
            }
            ModuleKind::Pattern { pattern, .. } => {
                let prod = a * &self.components(x)[0];
                let scale = linalg::max_abs(&prod).max(1.0);
                let mut out = CVec::zeros(self.dim());
                for (k, &(i, j)) in pattern.iter().enumerate() {
                    out[k] = prod[(i, j)];
                }
                let mut escaped = prod.clone();
                for &(i, j) in pattern {
                    escaped[(i, j)] = ZERO;
                }
                if linalg::max_abs(&escaped) > 1e-14 * scale {
                    None
                } else {
                    Some(out)
                }
            }
        }
    }

    fn random_admissible<R: Rng>(&self, rng: &mut R) -> CMat {
        let n = self.algebra_dim;
        let mut a = CMat::zeros(n, n);
        for (r, s) in self.admissible_positions() {
            a[(r, s)] = linalg::random_complex(rng);
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleVector {
    pub space: ModuleSpace,
    pub coords: CVec,
}

impl ModuleVector {
    pub fn new(space: &ModuleSpace, coords: CVec) -> Result<Self> {
        if coords.len() != space.dim() {
            return Err(input(format!(
                "vector has {} coordinates, space needs {}",
                coords.len(),
                space.dim()
            )));
        }
        Ok(ModuleVector {
            space: space.clone(),
            coords,
        })
    }

    /// `‖x‖ = ‖⟨x, x⟩‖^{1/2}`.
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.space.inner_coords(&self.coords, &self.coords)).sqrt()
    }
}

/// `⟨x, y⟩_A`.
pub fn inner_product(x: &ModuleVector, y: &ModuleVector) -> Result<AlgebraElement> {
    if x.space != y.space {
        return Err(input("inner product of vectors from different spaces"));
    }
    AlgebraElement::new(x.space.inner_coords(&x.coords, &y.coords))
}

/// A complex-linear map between modules stored as its coordinate matrix.
/// A-linearity and adjointability are verified at runtime and cached.
#[derive(Debug, Clone)]
pub struct ModuleOperator {
    domain: ModuleSpace,
    codomain: ModuleSpace,
    matrix: CMat,
    a_linear: OnceLock<bool>,
    adjointable: OnceLock<bool>,
}

impl PartialEq for ModuleOperator {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.codomain == other.codomain && self.matrix == other.matrix
    }
}

impl ModuleOperator {
    pub fn new(domain: &ModuleSpace, codomain: &ModuleSpace, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(input(format!(
                "operator matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        if domain.algebra_dim() != codomain.algebra_dim() {
            return Err(input("domain and codomain are over different algebras"));
        }
        Ok(ModuleOperator {
            domain: domain.clone(),
            codomain: codomain.clone(),
            matrix,
            a_linear: OnceLock::new(),
            adjointable: OnceLock::new(),
        })
    }

    pub fn endo(space: &ModuleSpace, matrix: CMat) -> Result<Self> {
        Self::new(space, space, matrix)
    }

    pub fn identity(space: &ModuleSpace) -> Self {
        let d = space.dim();
        Self::endo(space, CMat::identity(d, d)).expect("square by construction")
    }

    pub fn scalar(space: &ModuleSpace, s: C64) -> Self {
        let d = space.dim();
        Self::endo(space, CMat::identity(d, d) * s).expect("square by construction")
    }

    pub fn zero(domain: &ModuleSpace, codomain: &ModuleSpace) -> Self {
        Self::new(domain, codomain, CMat::zeros(codomain.dim(), domain.dim()))
            .expect("sized by construction")
    }

    /// The A-linear map `x ↦ x·M` on `Free(d)`, where `M ∈ M_d(A)` is given
    /// as an `nd×nd` block matrix: `(x·M)_j = Σ_i x_i M_ij`.
    pub fn right_multiplication(space: &ModuleSpace, block: &CMat) -> Result<Self> {
        let d = space
            .rank()
            .ok_or_else(|| Error::Unsupported("right multiplication on a pattern module".into()))?;
        let n = space.algebra_dim();
        if block.nrows() != n * d || block.ncols() != n * d {
            return Err(input(format!(
                "block matrix must be {}x{}",
                n * d,
                n * d
            )));
        }
        let dim = space.dim();
        let mut m = CMat::zeros(dim, dim);
        // out[(j, r, c)] = Σ_{i, s} in[(i, r, s)] · M[(i, s), (j, c)]
        for j in 0..d {
            for r in 0..n {
                for col in 0..n {
                    let row = j * n * n + r * n + col;
                    for i in 0..d {
                        for s in 0..n {
                            m[(row, i * n * n + r * n + s)] = block[(i * n + s, j * n + col)];
                        }
                    }
                }
            }
        }
        Self::endo(space, m)
    }

    /// The map `M ↦ M·P` on a pattern module for a `q×q` matrix `P` that
    /// keeps the pattern.
    pub fn pattern_right_multiplication(space: &ModuleSpace, right: &CMat) -> Result<Self> {
        let ModuleKind::Pattern { cols, pattern, .. } = space.kind() else {
            return Err(Error::Unsupported("pattern right multiplication on a free module".into()));
        };
        if right.nrows() != *cols || right.ncols() != *cols {
            return Err(input("right factor has the wrong size"));
        }
        let dim = space.dim();
        let mut m = CMat::zeros(dim, dim);
        for (k, &(i, j)) in pattern.iter().enumerate() {
            let image = space.components(&space.complex_basis(k))[0].clone() * right;
            let mut escaped = image.clone();
            for (l, &(a, b)) in pattern.iter().enumerate() {
                m[(l, k)] = image[(a, b)];
                escaped[(a, b)] = ZERO;
            }
            if linalg::max_abs(&escaped) > 0.0 {
                return Err(input(format!(
                    "right factor moves entry ({}, {}) out of the pattern",
                    i + 1,
                    j + 1
                )));
            }
        }
        Self::endo(space, m)
    }

    pub fn domain(&self) -> &ModuleSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &ModuleSpace {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn is_endomorphism(&self) -> bool {
        self.domain == self.codomain
    }

    pub fn apply(&self, x: &ModuleVector) -> Result<ModuleVector> {
        if x.space != self.domain {
            return Err(input("vector is not in the operator's domain"));
        }
        Ok(ModuleVector {
            space: self.codomain.clone(),
            coords: &self.matrix * &x.coords,
        })
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &ModuleOperator) -> Result<ModuleOperator> {
        if other.codomain != self.domain {
            return Err(input("composition of incompatible operators"));
        }
        Self::new(&other.domain, &self.codomain, &self.matrix * &other.matrix)
    }

    pub fn add(&self, other: &ModuleOperator) -> Result<ModuleOperator> {
        self.same_shape(other)?;
        Self::new(&self.domain, &self.codomain, &self.matrix + &other.matrix)
    }

    pub fn sub(&self, other: &ModuleOperator) -> Result<ModuleOperator> {
        self.same_shape(other)?;
        Self::new(&self.domain, &self.codomain, &self.matrix - &other.matrix)
    }

    pub fn scale(&self, s: f64) -> ModuleOperator {
        self.map_matrix(|m| m.scale(s))
    }

    pub fn scale_complex(&self, s: C64) -> ModuleOperator {
        self.map_matrix(|m| m * s)
    }

    fn map_matrix(&self, f: impl FnOnce(&CMat) -> CMat) -> ModuleOperator {
        ModuleOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: f(&self.matrix),
            a_linear: OnceLock::new(),
            adjointable: OnceLock::new(),
        }
    }

    fn same_shape(&self, other: &ModuleOperator) -> Result<()> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(input("operators act between different spaces"));
        }
        Ok(())
    }

    /// Operator norm. On the supported modules the coordinate representation
    /// is faithful, so this is the largest singular value.
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.matrix)
    }

    /// Conjugate transpose without verifying the A-valued identity.
    pub fn trace_adjoint(&self) -> ModuleOperator {
        ModuleOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: self.matrix.adjoint(),
            a_linear: OnceLock::new(),
            adjointable: OnceLock::new(),
        }
    }

    /// `T*`, validated against `⟨Tx, y⟩ = ⟨x, T*y⟩` on random pairs.
    pub fn adjoint(&self) -> Result<ModuleOperator> {
        let star = self.trace_adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED ^ 0xad);
        let mut worst = (0.0f64, None);
        let t_norm = self.norm().max(1.0);
        for _ in 0..RANDOM_CHECKS {
            let x = linalg::random_vector(&mut rng, self.domain.dim());
            let y = linalg::random_vector(&mut rng, self.codomain.dim());
            let lhs = self.codomain.inner_coords(&(&self.matrix * &x), &y);
            let rhs = self.domain.inner_coords(&x, &(&star.matrix * &y));
            let dev = linalg::op_norm(&(&lhs - &rhs)) / (t_norm * x.norm() * y.norm()).max(1.0);
            if dev > worst.0 {
                worst = (dev, Some((x, lhs - rhs)));
            }
        }
        if worst.0 > IDENTITY_TOL {
            let (x, diff) = worst.1.expect("recorded with the deviation");
            return Err(Error::NotAdjointable {
                deviation: worst.0,
                witness: Box::new(Witness {
                    coords: x,
                    violation: Some(diff),
                    coefficient: None,
                }),
            });
        }
        let _ = self.adjointable.set(true);
        let _ = star.adjointable.set(true);
        Ok(star)
    }

    pub fn is_adjointable(&self) -> bool {
        *self.adjointable.get_or_init(|| self.adjoint().is_ok())
    }

    /// `T(a·x) = a·T(x)` on random admissible `(a, x)`.
    pub fn verify_a_linear(&self) -> Verdict {
        let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
        let t_norm = self.norm().max(1.0);
        let mut worst_dev = 0.0f64;
        let mut witness = None;
        let codomain_positions = self.codomain.admissible_positions();
        for _ in 0..RANDOM_CHECKS {
            let a = self.domain.random_admissible(&mut rng);
            let a = mask_to(&a, &codomain_positions);
            let x = linalg::random_vector(&mut rng, self.domain.dim());
            let (Some(ax), Some(atx)) = (
                self.domain.left_action(&a, &x),
                self.codomain.left_action(&a, &(&self.matrix * &x)),
            ) else {
                continue;
            };
            let diff = &self.matrix * ax - atx;
            let dev = diff.norm() / (t_norm * linalg::op_norm(&a) * x.norm()).max(1.0);
            if dev > worst_dev {
                worst_dev = dev;
                witness = Some(Witness {
                    coords: x,
                    violation: None,
                    coefficient: Some(a),
                });
            }
        }
        let ok = worst_dev <= IDENTITY_TOL;
        let _ = self.a_linear.set(ok);
        if ok {
            Verdict::certified(-worst_dev, 1.0)
        } else {
            Verdict::falsified(-worst_dev, 1.0, witness.expect("set with the deviation"))
        }
    }

    pub fn is_a_linear(&self) -> bool {
        match self.a_linear.get() {
            Some(&ok) => ok,
            None => self.verify_a_linear().is_certified(),
        }
    }

    pub fn is_self_adjoint(&self, cfg: &ToleranceConfig) -> bool {
        self.is_endomorphism()
            && linalg::max_abs(&(&self.matrix - self.matrix.adjoint())) <= cfg.tol_h * self.norm().max(1.0)
    }

    /// `nd×nd` block matrix `G_ij = ⟨T e_i, e_j⟩_A` over the free basis.
    pub fn flatten(&self) -> Result<CMat> {
        let d = self.domain.rank().filter(|_| self.is_endomorphism()).ok_or_else(|| {
            Error::Unsupported("flattening needs an endomorphism of a free module (use form_compare)".into())
        })?;
        let n = self.domain.algebra_dim();
        let mut g = CMat::zeros(n * d, n * d);
        let basis: Vec<ModuleVector> = (0..d).map(|i| self.domain.free_basis(i)).collect::<Result<_>>()?;
        for i in 0..d {
            let te = self.apply(&basis[i])?;
            for j in 0..d {
                let block = self.domain.inner_coords(&te.coords, &basis[j].coords);
                g.view_mut((i * n, j * n), (n, n)).copy_from(&block);
            }
        }
        Ok(g)
    }
}

fn mask_to(a: &CMat, positions: &[(usize, usize)]) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols());
    for &(r, s) in positions {
        out[(r, s)] = a[(r, s)];
    }
    out
}

/// Module vector `x` with `⟨Tx, x⟩ = e₁ (u* G u) e₁ᵀ` for A-linear `T`:
/// the first row of block `i` is `conj(u_i)`.
pub fn lift_flat_witness(space: &ModuleSpace, u: &CVec) -> Result<ModuleVector> {
    let d = space
        .rank()
        .ok_or_else(|| Error::Unsupported("lifting a flat witness into a pattern module".into()))?;
    let n = space.algebra_dim();
    let mut coords = CVec::zeros(space.dim());
    for i in 0..d {
        for s in 0..n {
            coords[i * n * n + s] = u[i * n + s].conj();
        }
    }
    ModuleVector::new(space, coords)
}

/// Exact positivity test for A-linear self-adjoint operators on free modules:
/// `⟨Tx, x⟩ ⪰ 0 for all x` iff the flattened block matrix is PSD.
pub fn flatten_positive_test(t: &ModuleOperator, cfg: &ToleranceConfig) -> Result<Verdict> {
    let g = t.flatten()?;
    let mut v = psd_verdict(&g, cfg);
    if let Some(w) = v.witness.take() {
        let x = lift_flat_witness(t.domain(), &w.coords)?;
        let tx = t.apply(&x)?;
        let violation = t.domain().inner_coords(&tx.coords, &x.coords);
        v.witness = Some(Witness {
            coords: x.coords,
            violation: Some(violation),
            coefficient: None,
        });
    }
    Ok(v)
}

/// Sesquilinear A-valued form tabulated on the complex coordinate basis:
/// `entries[i·D + j] = form(b_i, b_j)`.
#[derive(Debug, Clone)]
pub struct GramTable {
    space: ModuleSpace,
    entries: Vec<CMat>,
}

impl GramTable {
    pub fn from_entries(space: &ModuleSpace, entries: Vec<CMat>) -> Result<Self> {
        let d = space.dim();
        let n = space.algebra_dim();
        if entries.len() != d * d || entries.iter().any(|e| e.nrows() != n || e.ncols() != n) {
            return Err(input("Gram table size does not match the space"));
        }
        Ok(GramTable {
            space: space.clone(),
            entries,
        })
    }

    /// Table of `(x, y) ↦ ⟨Q x, y⟩_A`.
    pub fn of_operator(q: &ModuleOperator) -> Result<Self> {
        if !q.is_endomorphism() {
            return Err(input("form operator must be an endomorphism"));
        }
        let space = q.domain();
        let d = space.dim();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            let qb = q.matrix().column(i).into_owned();
            for j in 0..d {
                entries.push(space.inner_coords(&qb, &space.complex_basis(j)));
            }
        }
        Ok(GramTable {
            space: space.clone(),
            entries,
        })
    }

    /// Table of `(x, y) ↦ ⟨Kx, Ky⟩_A`, i.e. the operator `K*K`.
    pub fn of_gram(k: &ModuleOperator) -> Result<Self> {
        let space = k.domain();
        let d = space.dim();
        let images: Vec<CVec> = (0..d).map(|i| k.matrix().column(i).into_owned()).collect();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(k.codomain().inner_coords(&images[i], &images[j]));
            }
        }
        Ok(GramTable {
            space: space.clone(),
            entries,
        })
    }

    pub fn space(&self) -> &ModuleSpace {
        &self.space
    }

    pub fn entry(&self, i: usize, j: usize) -> &CMat {
        &self.entries[i * self.space.dim() + j]
    }

    pub fn combine(&self, other: &GramTable, a: f64, b: f64) -> Result<GramTable> {
        if self.space != other.space {
            return Err(input("Gram tables over different spaces"));
        }
        Ok(GramTable {
            space: self.space.clone(),
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(x, y)| x.scale(a) + y.scale(b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> GramTable {
        GramTable {
            space: self.space.clone(),
            entries: self.entries.iter().map(|e| e.scale(s)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |acc, e| acc.max(linalg::max_abs(e)))
    }

    /// `form(f, f) = Σ c_i conj(c_j) G_ij` for `f = Σ c_i b_i`.
    pub fn evaluate(&self, coords: &CVec) -> CMat {
        let d = self.space.dim();
        let n = self.space.algebra_dim();
        let mut acc = CMat::zeros(n, n);
        for i in 0..d {
            for j in 0..d {
                let w = coords[i] * coords[j].conj();
                if w != ZERO {
                    acc += self.entry(i, j) * w;
                }
            }
        }
        acc
    }

    /// `(Dn)×(Dn)` block matrix `[G_ij]`. PSD implies the form is positive.
    pub fn big_block(&self) -> CMat {
        let d = self.space.dim();
        let n = self.space.algebra_dim();
        let mut big = CMat::zeros(d * n, d * n);
        for i in 0..d {
            for j in 0..d {
                big.view_mut((i * n, j * n), (n, n)).copy_from(self.entry(i, j));
            }
        }
        big
    }

    /// Scalar `D×D` matrix `H[i][j] = v* G_ij v`; `form(f, f)` compressed to
    /// `v` equals `z* H z` with `z = conj(c)`.
    pub fn compress(&self, v: &CVec) -> CMat {
        let d = self.space.dim();
        CMat::from_fn(d, d, |i, j| (v.adjoint() * self.entry(i, j) * v)[(0, 0)])
    }
}

/// Number of seeded random compression vectors tried by the falsifier.
const SEARCH_RANDOM_STARTS: usize = 24;
const SEARCH_ROUNDS: usize = 8;

/// Three-stage decision of `Q1 ⪯ Q2` (i.e. `Q2(f, f) − Q1(f, f) ⪰ 0` for every
/// module element `f`):
///
/// 1. both tables coincide: Certified;
/// 2. the block matrix of `G2 − G1` is PSD: Certified;
/// 3. alternating search over compressions `v` and coefficients `c` for a
///    violation below `−tol_falsify`: Falsified; otherwise Undetermined.
pub fn form_compare(q1: &GramTable, q2: &GramTable, cfg: &ToleranceConfig) -> Result<Verdict> {
    if q1.space != q2.space {
        return Err(input("forms tabulated over different spaces"));
    }
    let diff = q2.combine(q1, 1.0, -1.0)?;
    let table_scale = q1.max_abs().max(q2.max_abs()).max(1.0);
    if diff.max_abs() <= cfg.tol_psd * table_scale {
        return Ok(Verdict::certified(0.0, table_scale));
    }
    let big = diff.big_block();
    let relaxed = psd_verdict(&big, cfg);
    if relaxed.is_certified() {
        return Ok(Verdict::certified(relaxed.margin, relaxed.scale));
    }
    let best = search_violation(&diff, &big);
    let scale = linalg::op_norm(&q1.evaluate(&best.coords))
        .max(linalg::op_norm(&q2.evaluate(&best.coords)))
        .max(1.0);
    if best.lambda < -cfg.tol_falsify * scale {
        let witness = Witness {
            coords: best.coords,
            violation: Some(best.violation),
            coefficient: None,
        };
        Ok(Verdict::falsified(best.lambda, scale, witness))
    } else {
        Ok(Verdict::undetermined(best.lambda.min(relaxed.margin), scale))
    }
}

struct Candidate {
    lambda: f64,
    coords: CVec,
    violation: CMat,
}

fn search_violation(diff: &GramTable, big: &CMat) -> Candidate {
    let n = diff.space.algebra_dim();
    let d = diff.space.dim();
    let mut starts: Vec<CVec> = Vec::new();
    for k in 0..n {
        let mut e = CVec::zeros(n);
        e[k] = ONE;
        starts.push(e);
        for l in (k + 1)..n {
            for phase in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
                let mut v = CVec::zeros(n);
                v[k] = ONE;
                v[l] = phase;
                starts.push(v.unscale(2f64.sqrt()));
            }
        }
    }
    // compression suggested by the relaxation's most negative direction
    let (_, vectors) = linalg::eigh(big);
    let u = vectors.column(0);
    let reshaped = CMat::from_fn(d, n, |i, s| u[i * n + s]);
    if let Some((_, _, top)) = linalg::svd_triplets(&reshaped).into_iter().next() {
        starts.push(top.map(|z| z.conj()));
        starts.push(top);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED ^ 0xf0);
    for _ in 0..SEARCH_RANDOM_STARTS {
        let v = linalg::random_vector(&mut rng, n);
        starts.push(v.normalize());
    }

    let mut best: Option<Candidate> = None;
    for start in starts {
        let mut v = start;
        for _ in 0..SEARCH_ROUNDS {
            let (_, zs) = linalg::eigh(&diff.compress(&v));
            let coords = zs.column(0).map(|z| z.conj());
            let violation = linalg::hermitian_part(&diff.evaluate(&coords));
            let (values, vs) = linalg::eigh(&violation);
            let cand = Candidate {
                lambda: values[0],
                coords,
                violation,
            };
            v = vs.column(0).into_owned();
            if best.as_ref().is_none_or(|b| cand.lambda < b.lambda) {
                best = Some(cand);
            }
        }
    }
    let best = best.expect("at least one start");
    // prefer a single coordinate vector when it violates as strongly
    for k in 0..d {
        let mut coords = CVec::zeros(d);
        coords[k] = ONE;
        let violation = linalg::hermitian_part(&diff.evaluate(&coords));
        let lambda = linalg::eigh(&violation).0[0];
        if lambda <= best.lambda + 1e-12 * best.lambda.abs() {
            return Candidate {
                lambda,
                coords,
                violation,
            };
        }
    }
    best
}

/// A finite section `{y_k}` of `l²(Ω, {K_ω})` at quadrature nodes with weights.
#[derive(Debug, Clone)]
pub struct L2Section {
    pub weights: Vec<f64>,
    pub blocks: Vec<ModuleVector>,
}

impl L2Section {
    pub fn new(weights: Vec<f64>, blocks: Vec<ModuleVector>) -> Result<Self> {
        if weights.len() != blocks.len() {
            return Err(input("one block per quadrature node is required"));
        }
        if let Some(first) = blocks.first() {
            if blocks.iter().any(|b| b.space != first.space) {
                return Err(input("all blocks must live in the same range module"));
            }
        }
        Ok(L2Section { weights, blocks })
    }

    /// `Σ_k w_k ⟨y_k, z_k⟩_A`.
    pub fn inner(&self, other: &L2Section) -> Result<AlgebraElement> {
        if self.blocks.len() != other.blocks.len() || self.weights != other.weights {
            return Err(input("sections over different discretisations"));
        }
        let n = self
            .blocks
            .first()
            .map(|b| b.space.algebra_dim())
            .ok_or_else(|| input("empty section"))?;
        let mut acc = CMat::zeros(n, n);
        for ((w, y), z) in self.weights.iter().zip(&self.blocks).zip(&other.blocks) {
            acc += inner_product(y, z)?.matrix().scale(*w);
        }
        AlgebraElement::new(acc)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(|g| g.norm().sqrt()).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real;
    use crate::verdict::Status;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn example_space() -> ModuleSpace {
        ModuleSpace::pattern(2, 4, vec![(0, 0), (0, 1), (1, 1), (1, 3)]).unwrap()
    }

    fn example_vector(a: f64, b: f64, cc: f64, d: f64) -> ModuleVector {
        let s = example_space();
        ModuleVector::new(&s, CVec::from_vec(vec![real(a), real(b), real(cc), real(d)])).unwrap()
    }

    /// Keeps `b`, `c` (column 2) and zeroes `a`, `d`.
    fn keep_bc(s: &ModuleSpace) -> ModuleOperator {
        let mut p = CMat::zeros(4, 4);
        p[(1, 1)] = ONE;
        ModuleOperator::pattern_right_multiplication(s, &p).unwrap()
    }

    #[test]
    fn free_basis_inner_product_is_identity() {
        let s = ModuleSpace::free(2, 3).unwrap();
        let e = s.free_basis(0).unwrap();
        assert_eq!(inner_product(&e, &e).unwrap(), AlgebraElement::identity(3));
        let f = s.free_basis(1).unwrap();
        assert_eq!(inner_product(&e, &f).unwrap(), AlgebraElement::zeros(3));
    }

    #[test]
    fn example_module_gram_values() {
        let m = example_vector(1.0, 2.0, 3.0, 4.0);
        let g = inner_product(&m, &m).unwrap();
        let expected = AlgebraElement::from_real_rows(&[&[5.0, 6.0], &[6.0, 25.0]]).unwrap();
        assert_eq!(g, expected);
        let k = keep_bc(&m.space);
        let km = k.adjoint().unwrap().apply(&m).unwrap();
        let g = inner_product(&km, &km).unwrap();
        let expected = AlgebraElement::from_real_rows(&[&[4.0, 6.0], &[6.0, 9.0]]).unwrap();
        assert_eq!(g, expected);
    }

    #[test]
    fn inner_product_space_mismatch() {
        let a = ModuleSpace::free(1, 2).unwrap().zero();
        let b = ModuleSpace::free(2, 2).unwrap().zero();
        assert!(inner_product(&a, &b).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let s = ModuleSpace::free(2, 2).unwrap();
        let id = ModuleOperator::identity(&s);
        assert_eq!(id.adjoint().unwrap(), id);

        // right scaling by a PSD diagonal block matrix is self-adjoint
        let diag = CMat::from_diagonal(&CVec::from_vec(vec![real(1.0), real(2.0), real(0.5), real(3.0)]));
        let t = ModuleOperator::right_multiplication(&s, &diag).unwrap();
        assert_eq!(t.adjoint().unwrap(), t);

        let e = example_space();
        let lambda = keep_bc(&e).scale(0.7);
        let star = lambda.adjoint().unwrap();
        assert!(linalg::max_abs(&(star.matrix() - lambda.matrix())) == 0.0);
    }

    #[test]
    fn left_multiplication_is_not_adjointable_nor_a_linear() {
        let s = ModuleSpace::free(1, 2).unwrap();
        let b = CMat::from_row_slice(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)]);
        let coords: Vec<CVec> = (0..4).map(|k| s.left_action(&b, &s.complex_basis(k)).unwrap()).collect();
        let m = CMat::from_columns(&coords);
        let t = ModuleOperator::endo(&s, m).unwrap();
        let v = t.verify_a_linear();
        assert_eq!(v.status, Status::Falsified);
        let w = v.witness.unwrap();
        assert!(w.coefficient.is_some());
        assert!(matches!(t.adjoint(), Err(Error::NotAdjointable { .. })));
    }

    #[test]
    fn scalar_operators_are_a_linear() {
        let s = ModuleSpace::free(2, 2).unwrap();
        assert!(ModuleOperator::identity(&s).verify_a_linear().is_certified());
        assert!(ModuleOperator::scalar(&s, real(2.5)).verify_a_linear().is_certified());
        let e = example_space();
        assert!(ModuleOperator::scalar(&e, real(3.0)).verify_a_linear().is_certified());
        assert!(keep_bc(&e).verify_a_linear().is_certified());
    }

    #[test]
    fn example_pattern_admits_only_diagonal_coefficients() {
        let mut pos = example_space().admissible_positions();
        pos.sort();
        assert_eq!(pos, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn flatten_identity_and_sign_blocks() {
        let s = ModuleSpace::free(2, 2).unwrap();
        let g = ModuleOperator::identity(&s).flatten().unwrap();
        assert_eq!(g, CMat::identity(4, 4));
        assert!(flatten_positive_test(&ModuleOperator::identity(&s), &cfg()).unwrap().is_certified());

        let block = CMat::from_diagonal(&CVec::from_vec(vec![real(1.0), real(1.0), real(-1.0), real(-1.0)]));
        let t = ModuleOperator::right_multiplication(&s, &block).unwrap();
        let v = flatten_positive_test(&t, &cfg()).unwrap();
        assert_eq!(v.status, Status::Falsified);
        let w = v.witness.unwrap();
        // witness lives in the second block
        let comps = s.components(&w.coords);
        assert!(linalg::max_abs(&comps[0]) < 1e-12);
        assert!(linalg::max_abs(&comps[1]) > 0.1);
        let viol = w.violation.unwrap();
        assert!(linalg::eigh(&viol).0[0] < -0.5);
    }

    #[test]
    fn flatten_rejects_pattern_modules() {
        let e = example_space();
        assert!(matches!(
            flatten_positive_test(&ModuleOperator::identity(&e), &cfg()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn form_compare_equal_forms() {
        let e = example_space();
        let q = GramTable::of_operator(&ModuleOperator::identity(&e)).unwrap();
        assert!(form_compare(&q, &q, &cfg()).unwrap().is_certified());
    }

    #[test]
    fn form_compare_finds_the_ad_witness() {
        let e = example_space();
        // integral form of the Example (α=β=1): (1/3)⟨K*f, K*f⟩
        let k = keep_bc(&e);
        let q2 = GramTable::of_gram(&k).unwrap().scale(1.0 / 3.0);
        let q1 = GramTable::of_operator(&ModuleOperator::identity(&e)).unwrap().scale(0.1);
        let v = form_compare(&q1, &q2, &cfg()).unwrap();
        assert_eq!(v.status, Status::Falsified);
        let w = v.witness.unwrap().coords;
        assert!(w[1].norm() < 1e-8 && w[2].norm() < 1e-8);
        assert!(w[0].norm() > 0.1 || w[3].norm() > 0.1);
    }

    #[test]
    fn form_compare_scaled_gram_is_certified() {
        let e = example_space();
        let q1 = GramTable::of_gram(&keep_bc(&e)).unwrap();
        let q2 = q1.scale(1.0 / 3.0 + 1e-3);
        let q1 = q1.scale(1.0 / 3.0);
        assert!(form_compare(&q1, &q2, &cfg()).unwrap().is_certified());
    }

    #[test]
    fn l2_inner_is_weighted_sum() {
        let s = ModuleSpace::free(1, 2).unwrap();
        let e = s.free_basis(0).unwrap();
        let y = L2Section::new(vec![0.5, 0.25], vec![e.clone(), e.clone()]).unwrap();
        let g = y.inner(&y).unwrap();
        assert_eq!(g, AlgebraElement::identity(2).scale(0.75));
        assert!(L2Section::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn pattern_validation() {
        assert!(ModuleSpace::pattern(2, 2, vec![(0, 0), (0, 0)]).is_err());
        assert!(ModuleSpace::pattern(2, 2, vec![(2, 0)]).is_err());
        assert!(ModuleSpace::free(0, 2).is_err());
    }
}
