//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use modframe::algebra::ToleranceConfig;
use modframe::certify::{certify_lower_k, certify_upper, douglas_check, optimal_bounds};
use modframe::cli::{check_instance, paper_example, verify_instance};
use modframe::frame::{analysis_apply, assemble_frame_operator, build_paper_example, synthesis_apply, synthesis_norm_squared, FrameInstance};
use modframe::generate::{generate, generate_file, Profile};
use modframe::instance::InstanceFile;
use modframe::linalg::{self, CMat};
use modframe::module_space::{flatten_positive_test, inner_product, L2Section, ModuleOperator, ModuleVector};
use modframe::quadrature::Rule;
use modframe::theorems::{verify, ReportStatus, TheoremTag};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_modframe");

type Outcome = Result<String, String>;

fn cfg() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn free(seed: u64) -> FrameInstance {
    generate(seed, Profile::FreeCommuting).expect("generator").0
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_bin(args: &[&str]) -> (i32, Value, f64) {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(args)
        .env_remove("MODFRAME_TOL_SCALE")
        .output()
        .expect("binary runs");
    let secs = start.elapsed().as_secs_f64();
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), report, secs)
}

fn example_exact() -> Outcome {
    let (code, r, secs) = run_bin(&["paper-example", "--alpha", "1", "--beta", "1", "--rule", "gauss_legendre", "--n", "2"]);
    ensure(code == 0, || format!("exit code {code}"))?;
    let third = 1.0 / 3.0;
    for key in ["b_opt", "a_opt", "b_k"] {
        let v = r["bounds"][key].as_f64().ok_or(format!("{key} missing"))?;
        ensure((v - third).abs() <= 1e-12, || format!("{key} = {v}"))?;
    }
    ensure(r["bounds"]["tight"] == true, || "not tight".into())?;
    ensure(secs < 1.0, || format!("runtime {secs:.3} s"))?;
    Ok(format!("B = A_opt = B_K = 1/3 within 1e-12, {:.0} ms", secs * 1e3))
}

fn example_falsification() -> Outcome {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/paper_example.json"))
        .map_err(|e| e.to_string())?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v.as_object_mut().unwrap().remove("K");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("no_k.json");
    std::fs::write(&path, v.to_string()).map_err(|e| e.to_string())?;
    let (code, r, _) = run_bin(&["check", path.to_str().unwrap()]);
    ensure(code == 1, || format!("exit code {code}"))?;
    let mut seen = Vec::new();
    for check in r["checks"].as_array().ok_or("no checks")? {
        let Some(a) = check["name"].as_str().and_then(|n| n.strip_prefix("lower A=")) else { continue };
        ensure(check["verdict"]["status"] == "falsified", || format!("A = {a} not falsified"))?;
        let coords = check["verdict"]["witness"]["coords"].as_array().ok_or("no witness")?;
        let mag = |z: &Value| z[0].as_f64().unwrap().hypot(z[1].as_f64().unwrap());
        let total = coords.iter().map(|z| mag(z).powi(2)).sum::<f64>().sqrt();
        let bc = mag(&coords[1]).hypot(mag(&coords[2]));
        ensure(bc <= 1e-8 * total, || format!("A = {a}: ‖(b,c)‖ = {bc:e}"))?;
        seen.push(a.to_string());
    }
    ensure(seen == ["0.001", "0.01", "0.1", "1"], || format!("probes {seen:?}"))?;
    Ok("A ∈ {1e-3, 1e-2, 0.1, 1} falsified, witnesses supported on a, d; exit 1".into())
}

fn quadrature_convergence() -> Outcome {
    let third = 1.0 / 3.0;
    let mut errors = Vec::new();
    for n in [8, 16, 32, 64] {
        let inst = build_paper_example(1.0, 1.0, Rule::Trapezoid, n).map_err(|e| e.to_string())?;
        let b = optimal_bounds(&inst, &cfg()).map_err(|e| e.to_string())?.b_opt;
        errors.push((b - third).abs());
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    for r in &ratios {
        ensure((r - 4.0).abs() <= 0.3, || format!("ratios {ratios:?}"))?;
    }
    let inst = build_paper_example(1.0, 1.0, Rule::GaussLegendre, 2).map_err(|e| e.to_string())?;
    let bounds = optimal_bounds(&inst, &cfg()).map_err(|e| e.to_string())?;
    let gl = (bounds.b_opt - third).abs().max((bounds.a_opt.unwrap_or(0.0) - third).abs());
    ensure(gl <= 1e-14, || format!("Gauss-Legendre 2 error {gl:e}"))?;
    Ok(format!(
        "trapezoid ratios {:.3}, {:.3}, {:.3}; Gauss-Legendre 2 error {gl:.1e}",
        ratios[0], ratios[1], ratios[2]
    ))
}

fn adjointness() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let inst = free(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce);
        let x = ModuleVector::new(&inst.space, linalg::random_vector(&mut rng, inst.space.dim())).unwrap();
        let blocks = (0..inst.measure.len())
            .map(|_| ModuleVector::new(&inst.range, linalg::random_vector(&mut rng, inst.range.dim())).unwrap())
            .collect();
        let weights = inst.measure.nodes().iter().map(|n| n.1).collect();
        let y = L2Section::new(weights, blocks).unwrap();
        let lhs = inner_product(&synthesis_apply(&inst, &y).unwrap(), &x).unwrap();
        let rhs = y.inner(&analysis_apply(&inst, &x).unwrap()).unwrap();
        let t_norm = synthesis_norm_squared(&inst).unwrap().sqrt();
        let y_norm: f64 = y.weights.iter().zip(&y.blocks).map(|(w, b)| w * b.coords.norm_squared()).sum::<f64>().sqrt();
        let scale = (t_norm * y_norm * x.coords.norm()).max(1.0);
        let dev = linalg::max_abs(&(lhs.matrix() - rhs.matrix())) / scale;
        ensure(dev <= 1e-10, || format!("seed {seed}: ⟨Ty,x⟩ deviation {dev:e}"))?;
        worst = worst.max(dev);

        let s = assemble_frame_operator(&inst).unwrap().controlled;
        let dim = inst.space.dim();
        let mut composed = CMat::zeros(dim, dim);
        for j in 0..dim {
            let e = ModuleVector::new(&inst.space, inst.space.complex_basis(j)).unwrap();
            let col = synthesis_apply(&inst, &analysis_apply(&inst, &e).unwrap()).unwrap();
            composed.set_column(j, &col.coords);
        }
        let dev = linalg::max_abs(&(composed - s.matrix())) / s.norm().max(1.0);
        ensure(dev <= 1e-10, || format!("seed {seed}: T T* − S deviation {dev:e}"))?;
        worst = worst.max(dev);
    }
    Ok(format!("100 instances, worst relative deviation {worst:.1e}"))
}

fn frame_operator_positive() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let inst = free(seed);
        let s = assemble_frame_operator(&inst).unwrap().controlled;
        let dev = linalg::max_abs(&(s.matrix() - s.matrix().adjoint())) / s.norm().max(1.0);
        ensure(dev <= 1e-12, || format!("seed {seed}: S − S* = {dev:e}"))?;
        worst = worst.max(dev);
        let v = flatten_positive_test(&s, &cfg()).unwrap();
        ensure(v.is_certified(), || format!("seed {seed}: positivity {:?}", v.status))?;
    }
    Ok(format!("100 instances self-adjoint (worst {worst:.1e}) and certified positive"))
}

fn bessel_bounded_synthesis() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let inst = free(seed);
        let t2 = synthesis_norm_squared(&inst).unwrap();
        let b = optimal_bounds(&inst, &cfg()).unwrap().b_opt;
        let dev = (t2 - b).abs();
        ensure(dev <= 1e-6, || format!("seed {seed}: ‖T‖² = {t2}, B_opt = {b}"))?;
        worst = worst.max(dev);
    }
    Ok(format!("50 instances, worst |‖T‖² − B_opt| = {worst:.1e}"))
}

const VERIFIERS: [(TheoremTag, Profile, Profile); 10] = [
    (TheoremTag::GframeImpliesKgframe, Profile::FreeCommuting, Profile::SingularFrameAdversarial),
    (TheoremTag::BesselCompose, Profile::FreeCommuting, Profile::KcommuteAdversarial),
    (TheoremTag::LowerIffInequality, Profile::FreeCommuting, Profile::NoncommutingAdversarial),
    (TheoremTag::ComposeKAdjoint, Profile::FreeCommuting, Profile::KcommuteAdversarial),
    (TheoremTag::SingleControllerReduction, Profile::FreeCommuting, Profile::NoncommutingAdversarial),
    (TheoremTag::SqrtReduction, Profile::FreeCommuting, Profile::NoncommutingAdversarial),
    (TheoremTag::ControlledIffPlain, Profile::FreeCommuting, Profile::KcommuteAdversarial),
    (TheoremTag::RangeInclusionTransfer, Profile::RangeIncluded, Profile::RangeExcludedAdversarial),
    (TheoremTag::CombineOrthogonal, Profile::OrthogonalRanges, Profile::NonorthogonalAdversarial),
    (TheoremTag::SubalgebraCorollary, Profile::FreeCommuting, Profile::NoncommutingAdversarial),
];

fn verifier_suite() -> Outcome {
    let mut lines = Vec::new();
    for (tag, enforcing, adversarial) in VERIFIERS {
        for seed in 0..100 {
            let (inst, aux) = generate(seed, enforcing).unwrap();
            let got = verify(tag, &inst, &aux).map(|r| r.conclusion);
            ensure(matches!(got, Ok(ReportStatus::Certified)), || {
                format!("{tag} on {enforcing} seed {seed}: {got:?}")
            })?;
            let (inst, aux) = generate(seed, adversarial).unwrap();
            let got = verify(tag, &inst, &aux).map(|r| r.conclusion);
            ensure(matches!(got, Ok(ReportStatus::HypothesesNotMet)), || {
                format!("{tag} on {adversarial} seed {seed}: {got:?}")
            })?;
        }
        lines.push(format!("      {tag}: 100/100 certified on {enforcing}, 100/100 gated on {adversarial}"));
    }
    Ok(format!("10 verifiers\n{}", lines.join("\n")))
}

/// Least `B` with `certify_upper` Certified, by doubling then 40 bisection steps.
fn bisect_upper(inst: &FrameInstance) -> f64 {
    let ok = |b: f64| certify_upper(inst, b, &cfg()).unwrap().is_certified();
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Greatest `A` with `certify_lower_k` Certified.
fn bisect_lower(inst: &FrameInstance) -> f64 {
    let ok = |a: f64| certify_lower_k(inst, a, &cfg()).unwrap().is_certified();
    let (mut lo, mut hi) = (0.0, 1.0);
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let inst = free(seed);
        let nd = inst.space.dim() / inst.space.algebra_dim();
        ensure(nd * inst.space.algebra_dim() <= 12 && nd <= 6, || format!("seed {seed}: n·d = {nd}"))?;
        let bounds = optimal_bounds(&inst, &cfg()).unwrap();
        let b = bisect_upper(&inst);
        let a = bisect_lower(&inst);
        let a_opt = bounds.a_opt.ok_or(format!("seed {seed}: no A_opt"))?;
        let db = (b - bounds.b_opt).abs() / bounds.b_opt;
        let da = (a - a_opt).abs() / a_opt;
        ensure(db <= 1e-6 && da <= 1e-6, || format!("seed {seed}: B {b} vs {}, A {a} vs {a_opt}", bounds.b_opt))?;
        worst = worst.max(db).max(da);

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd0);
        let t = ModuleOperator::right_multiplication(&inst.space, &linalg::random_matrix(&mut rng, nd, nd)).unwrap();
        let tp = ModuleOperator::right_multiplication(&inst.space, &linalg::random_matrix(&mut rng, nd, nd)).unwrap();
        let x = t.matrix().clone().try_inverse().ok_or("singular T")? * tp.matrix();
        let closed = (x.adjoint() * &x).symmetric_eigen().eigenvalues.max();
        let lambda = douglas_check(&t, &tp, &cfg()).unwrap().lambda_min.ok_or("not in range")?;
        let dl = (lambda - closed).abs() / closed;
        ensure(dl <= 1e-6, || format!("seed {seed}: Douglas {lambda} vs ‖T⁻¹T'‖² = {closed}"))?;
        worst = worst.max(dl);
    }
    Ok(format!("20 instances, worst relative gap {worst:.1e}"))
}

/// Every report the suite produces, concatenated.
fn suite_transcript() -> String {
    let mut out = String::new();
    for profile in Profile::ALL {
        for seed in 0..5 {
            let file = generate_file(seed, profile).unwrap();
            out.push_str(&file.to_json());
            let loaded = InstanceFile::parse(&file.to_json(), "suite.json").unwrap();
            match check_instance(&loaded.instance, &loaded.file) {
                Ok(r) => out.push_str(&r.to_json()),
                Err(e) => out.push_str(&format!("error: {e}\n")),
            }
        }
    }
    for (tag, enforcing, adversarial) in VERIFIERS {
        for profile in [enforcing, adversarial] {
            let (inst, aux) = generate(7, profile).unwrap();
            let file = InstanceFile::from_instance(&inst, &aux);
            out.push_str(&verify_instance(tag, &inst, &aux, &file, 7).unwrap().to_json());
        }
    }
    for (alpha, beta, rule, n) in [(1.0, 1.0, Rule::GaussLegendre, 2), (2.0, 3.0, Rule::Trapezoid, 64), (3.0, 1.0, Rule::Midpoint, 16)] {
        out.push_str(&paper_example(alpha, beta, rule, n, 1.0).unwrap().to_json());
    }
    out
}

fn determinism() -> Outcome {
    let first = suite_transcript();
    let second = suite_transcript();
    ensure(first == second, || "library reports differ between runs".into())?;
    let args = ["paper-example", "--rule", "trapezoid", "--n", "32"];
    let a = Command::new(BIN).args(args).output().unwrap().stdout;
    let b = Command::new(BIN).args(args).output().unwrap().stdout;
    ensure(!a.is_empty() && a == b, || "binary reports differ between runs".into())?;
    Ok(format!("{} report bytes identical across two runs", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("example constants exact", example_exact),
        ("example falsification without K", example_falsification),
        ("quadrature convergence", quadrature_convergence),
        ("synthesis/analysis adjointness", adjointness),
        ("frame operator self-adjoint and positive", frame_operator_positive),
        ("Bessel bound equals ‖T‖²", bessel_bounded_synthesis),
        ("theorem verifier suite", verifier_suite),
        ("closed form matches bisection", oracle_equivalence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(criterion).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
