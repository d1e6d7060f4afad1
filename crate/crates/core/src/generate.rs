//! Seeded random instances.
//!
//! The PRNG is ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`, so output
//! is identical across platforms. Free-module operators are right
//! multiplications by block matrices in `M_d(A) ≅ M_{nd}(ℂ)`, which are
//! A-linear and adjointable. Hypothesis-enforcing profiles build every
//! operator from one positive generator `P`:
//!
//! * `C = p(P)`, `C' = q(P)` with positive-coefficient polynomials;
//! * `Λ_k = g_k(P)·U_k` with unitary `U_k`, so `Λ_k*Λ_k = |g_k|²(P)`;
//! * `K` a complex polynomial in `P` kept away from singularity.
//!
//! Adversarial profiles change exactly one ingredient to break one hypothesis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::ToleranceConfig;
use crate::error::{input, Result};
use crate::frame::{build_paper_example, example_mask, FrameInstance, OperatorFamily};
use crate::instance::InstanceFile;
use crate::linalg::{self, c, real, CMat, C64};
use crate::module_space::{ModuleOperator, ModuleSpace};
use crate::quadrature::{MeasureDiscretization, Rule};
use crate::theorems::Auxiliary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    FreeCommuting,
    PatternExampleLike,
    OrthogonalRanges,
    RangeIncluded,
    NoncommutingAdversarial,
    SingularFrameAdversarial,
    KcommuteAdversarial,
    RangeExcludedAdversarial,
    NonorthogonalAdversarial,
}

impl Profile {
    pub const ALL: [Profile; 9] = [
        Profile::FreeCommuting,
        Profile::PatternExampleLike,
        Profile::OrthogonalRanges,
        Profile::RangeIncluded,
        Profile::NoncommutingAdversarial,
        Profile::SingularFrameAdversarial,
        Profile::KcommuteAdversarial,
        Profile::RangeExcludedAdversarial,
        Profile::NonorthogonalAdversarial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::FreeCommuting => "free_commuting",
            Profile::PatternExampleLike => "pattern_example_like",
            Profile::OrthogonalRanges => "orthogonal_ranges",
            Profile::RangeIncluded => "range_included",
            Profile::NoncommutingAdversarial => "noncommuting_adversarial",
            Profile::SingularFrameAdversarial => "singular_frame_adversarial",
            Profile::KcommuteAdversarial => "kcommute_adversarial",
            Profile::RangeExcludedAdversarial => "range_excluded_adversarial",
            Profile::NonorthogonalAdversarial => "nonorthogonal_adversarial",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.as_str()).collect();
            input(format!("unknown profile '{s}'; known profiles: {}", names.join(", ")))
        })
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

struct Free {
    space: ModuleSpace,
    nd: usize,
}

impl Free {
    fn new(rng: &mut ChaCha8Rng, min_nd: usize, min_rank: usize) -> Free {
        loop {
            let n = rng.random_range(1..=2usize);
            let d = rng.random_range(1..=3usize);
            if n * d >= min_nd && d >= min_rank {
                return Free {
                    space: ModuleSpace::free(d, n).expect("positive sizes"),
                    nd: n * d,
                };
            }
        }
    }

    fn op(&self, block: &CMat) -> ModuleOperator {
        ModuleOperator::right_multiplication(&self.space, block).expect("block sized to the module")
    }

    fn generator(&self, rng: &mut ChaCha8Rng) -> CMat {
        linalg::random_hermitian_with_spectrum(rng, self.nd, 0.5, 2.0)
    }
}

fn positive_poly(rng: &mut ChaCha8Rng) -> Vec<C64> {
    vec![
        real(rng.random_range(0.2..1.0)),
        real(rng.random_range(0.2..1.0)),
        real(rng.random_range(0.0..0.5)),
    ]
}

fn complex_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    let r = radius * rng.random_range(0.0..1.0f64);
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    c(r * t.cos(), r * t.sin())
}

/// Complex polynomial with `|q(λ)| ≥ 0.1` on `[0.5, 2]`.
fn invertible_poly(rng: &mut ChaCha8Rng) -> Vec<C64> {
    let lead = rng.random_range(0.5..1.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    vec![
        c(lead * phase.cos(), lead * phase.sin()),
        complex_in_disc(rng, 0.1),
        complex_in_disc(rng, 0.05),
    ]
}

/// Nodes and the commuting family `Λ_k = g_k(P) U_k` (optionally `E g_k(P) U_k`).
fn commuting_family(
    rng: &mut ChaCha8Rng,
    f: &Free,
    p: &CMat,
    left: Option<&CMat>,
) -> (MeasureDiscretization, Vec<ModuleOperator>) {
    let count = rng.random_range(2..=4usize);
    let mut nodes = Vec::with_capacity(count);
    let mut ops = Vec::with_capacity(count);
    for _ in 0..count {
        nodes.push((rng.random_range(0.0..1.0), rng.random_range(0.2..1.0)));
        let g = linalg::matrix_polynomial(
            p,
            &[real(rng.random_range(0.5..1.0)), complex_in_disc(rng, 0.2)],
        );
        let u = linalg::random_unitary(rng, f.nd);
        let block = match left {
            Some(e) => e * g * u,
            None => g * u,
        };
        ops.push(f.op(&block));
    }
    (MeasureDiscretization::discrete(nodes).expect("positive weights"), ops)
}

/// Rank-deficient block matrix of rank `nd − 1`.
fn rank_deficient(rng: &mut ChaCha8Rng, nd: usize) -> CMat {
    let mut mask = CMat::identity(nd, nd);
    mask[(nd - 1, nd - 1)] = real(0.0);
    linalg::random_matrix(rng, nd, nd) * mask * linalg::random_matrix(rng, nd, nd)
}

/// Block selector onto the blocks in `keep`.
fn selector(f: &Free, keep: &[bool]) -> CMat {
    let n = f.space.algebra_dim();
    let mut m = CMat::zeros(f.nd, f.nd);
    for (i, &k) in keep.iter().enumerate() {
        if k {
            for r in 0..n {
                m[(i * n + r, i * n + r)] = real(1.0);
            }
        }
    }
    m
}

/// Deterministic instance and auxiliary data for `(seed, profile)`.
pub fn generate(seed: u64, profile: Profile) -> Result<(FrameInstance, Auxiliary)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if profile == Profile::PatternExampleLike {
        return pattern_example_like(&mut rng);
    }
    let (min_nd, min_rank) = match profile {
        Profile::FreeCommuting => (1, 1),
        Profile::OrthogonalRanges | Profile::NonorthogonalAdversarial => (2, 2),
        _ => (2, 1),
    };
    let f = Free::new(&mut rng, min_nd, min_rank);
    let p = f.generator(&mut rng);
    let c_block = linalg::matrix_polynomial(&p, &positive_poly(&mut rng));
    let cp_block = if profile == Profile::NoncommutingAdversarial {
        let q = f.generator(&mut rng);
        linalg::matrix_polynomial(&q, &positive_poly(&mut rng))
    } else {
        linalg::matrix_polynomial(&p, &positive_poly(&mut rng))
    };
    let projection = (profile == Profile::SingularFrameAdversarial).then(|| {
        let (values, vectors) = linalg::eigh(&p);
        let half = values.len() / 2;
        linalg::spectral_map(&values, &vectors, |l| if l <= values[half.max(1) - 1] { 1.0 } else { 0.0 })
    });
    let (measure, ops) = commuting_family(&mut rng, &f, &p, projection.as_ref());
    let mut aux = Auxiliary::default();
    let k_block = match profile {
        Profile::KcommuteAdversarial => linalg::random_matrix(&mut rng, f.nd, f.nd),
        Profile::RangeIncluded | Profile::RangeExcludedAdversarial => {
            let k = rank_deficient(&mut rng, f.nd);
            let t = if profile == Profile::RangeIncluded {
                // T = K∘D is right multiplication by D·K
                linalg::random_matrix(&mut rng, f.nd, f.nd) * &k
            } else {
                linalg::random_matrix(&mut rng, f.nd, f.nd)
            };
            aux.t = Some(f.op(&t));
            k
        }
        Profile::OrthogonalRanges | Profile::NonorthogonalAdversarial => {
            let d = f.space.rank().expect("free");
            let split = rng.random_range(1..d);
            let first: Vec<bool> = (0..d).map(|i| i < split).collect();
            let second: Vec<bool> = first.iter().map(|b| !b).collect();
            // K_i = Π_i∘X_i is right multiplication by X_i·Π_i
            let k1 = linalg::random_matrix(&mut rng, f.nd, f.nd) * selector(&f, &first);
            let x2 = linalg::random_matrix(&mut rng, f.nd, f.nd);
            let k2 = if profile == Profile::OrthogonalRanges {
                x2 * selector(&f, &second)
            } else {
                x2
            };
            aux.k2 = Some(f.op(&k2));
            aux.alpha = Some(complex_in_disc(&mut rng, 1.0) + real(0.5));
            aux.beta = Some(complex_in_disc(&mut rng, 1.0) + real(0.5));
            k1
        }
        _ => linalg::matrix_polynomial(&p, &invertible_poly(&mut rng)),
    };
    let inst = FrameInstance::new(
        measure,
        OperatorFamily::Table(ops),
        f.op(&c_block),
        f.op(&cp_block),
        Some(f.op(&k_block)),
        ToleranceConfig::default(),
    )?;
    Ok((inst, aux))
}

fn pattern_example_like(rng: &mut ChaCha8Rng) -> Result<(FrameInstance, Auxiliary)> {
    let alpha = rng.random_range(0.5..3.0);
    let beta = rng.random_range(0.5..3.0);
    let base = build_paper_example(alpha, beta, Rule::GaussLegendre, 16)?;
    let coeffs = vec![
        rng.random_range(0.0..1.0),
        rng.random_range(0.2..1.0),
        rng.random_range(0.0..1.0),
    ];
    let inst = FrameInstance {
        family: OperatorFamily::ScalarProfile {
            base: example_mask(&base.space),
            coeffs,
        },
        ..base
    };
    Ok((inst, Auxiliary::default()))
}

/// File form of [`generate`].
pub fn generate_file(seed: u64, profile: Profile) -> Result<InstanceFile> {
    let (inst, aux) = generate(seed, profile)?;
    Ok(InstanceFile::from_instance(&inst, &aux))
}
