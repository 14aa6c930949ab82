//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p gff-cli --test acceptance`.

use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use gff_core::curvature::{constant_curvature, phi_model_family, random_algebraic_curvature};
use gff_core::jacobi::{
    jacobi, null_jacobi_on, null_quotient, sample_unit_vectors, spectrum, CheckOptions, UnitKind,
};
use gff_core::linalg::{inner, ScalarProduct, Vector};
use gff_core::structure::{
    canonical_structure, random_structure, sample_celestial, sample_null_congruence, validate_gff, GffStructure,
};
use gff_core::submersion::{
    make_fibration, oneill_a, r_star, remark_sectional_conditions, shift_identity_residual, theorem_equivalence_report,
    FibrationKind, FibrationModel, RemarkKind, TheoremStatus,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("structure axioms", c1_structure_axioms),
        ("space-form Jacobi anchor", c2_space_form_anchor),
        ("null-quotient soundness", c3_null_quotient),
        ("A-tensor composition law", c4_composition_law),
        ("shift identity", c5_shift_identity),
        ("curated-family spectra", c6_curated_spectra),
        ("theorem equivalence", c7_theorem),
        ("remark identities", c8_remarks),
        ("psi correspondence", c9_psi),
        ("CLI determinism", c10_determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failures += 1;
        }
        println!(
            "{} {:>2} {:<26} {} [{:.1}s]",
            if result.passed { "PASS" } else { "FAIL" },
            i + 1,
            name,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}

fn gauss(rng: &mut ChaCha8Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

fn c1_structure_axioms() -> Outcome {
    let mut max_residual = 0.0_f64;
    let (mut perturbations, mut detected) = (0usize, 0usize);
    for n in 1..=3 {
        for s in 1..=4 {
            let st = canonical_structure(n, s).unwrap();
            let report = validate_gff(&st);
            if !report.passed() {
                return outcome(false, format!("canonical({n},{s}) fails validation"));
            }
            max_residual = max_residual.max(report.max_residual());
            let m = st.dim();
            let mut trial = |candidate: GffStructure| {
                perturbations += 1;
                if !validate_gff(&candidate).passed() {
                    detected += 1;
                }
            };
            for i in 0..m {
                for j in 0..m {
                    let mut phi = st.phi().clone();
                    phi[(i, j)] += 1e-3;
                    trial(st.clone().with_phi_unchecked(phi));

                    let mut g = st.metric().components().clone();
                    g[(i, j)] += 1e-3;
                    trial(st.clone().with_metric_unchecked(ScalarProduct::new(g).unwrap()));
                }
            }
            for a in 0..s {
                for i in 0..m {
                    let mut eta = st.eta().to_vec();
                    eta[a][i] += 1e-3;
                    trial(st.clone().with_eta_unchecked(eta));
                }
            }
        }
    }
    outcome(
        max_residual < 1e-10 && detected == perturbations,
        format!("max residual {max_residual:.1e}; {detected}/{perturbations} perturbations detected"),
    )
}

fn c2_space_form_anchor() -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (k, st) in [canonical_structure(2, 3).unwrap(), random_structure(2, 2, 17).unwrap()]
        .iter()
        .enumerate()
    {
        let g = st.metric();
        let m = g.dim();
        for c in [-1.0, 0.35, 2.0] {
            let r = constant_curvature(g, c);
            for z in sample_unit_vectors(g, UnitKind::Spacelike, 100, k as u64).unwrap() {
                let sp = spectrum(&jacobi(&r, g, &z).unwrap(), 1e-6).unwrap();
                if sp.multiplicities() != vec![m - 1] {
                    return outcome(false, format!("c = {c}: spectrum {:?}", sp.pairs()));
                }
                worst = worst.max(sp.eigenvalues.iter().map(|l| (l - c).abs()).fold(0.0, f64::max));
                count += 1;
            }
        }
    }
    outcome(worst < 1e-10, format!("{count} directions, max deviation {worst:.1e}"))
}

fn c3_null_quotient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_shift = 0.0_f64;
    let mut min_gbar = f64::INFINITY;
    let structures = [canonical_structure(2, 2).unwrap(), random_structure(2, 3, 5).unwrap()];
    for (k, st) in structures.iter().enumerate() {
        let g = st.metric();
        let r = random_algebraic_curvature(g, 40 + k as u64, 1.0);
        for u in sample_null_congruence(g, &st.xi()[0], 50, k as u64).unwrap().points {
            let u = u * rng.random_range(0.5..2.0);
            let q = match null_quotient(g, &u) {
                Ok(q) => q,
                Err(e) => return outcome(false, format!("quotient failed: {e}")),
            };
            let eig = SymmetricEigen::new(q.gbar.clone()).eigenvalues;
            min_gbar = min_gbar.min(eig.min());
            let base = null_jacobi_on(&r, &q).unwrap();
            let shifts: Vec<f64> = (0..q.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let moved = null_jacobi_on(&r, &q.with_shifted_representatives(g, &shifts).unwrap()).unwrap();
            worst_shift = worst_shift.max((moved.matrix - &base.matrix).amax());
        }
    }
    outcome(
        min_gbar > 0.0 && worst_shift < 1e-10,
        format!("100 null vectors; min eig(gbar) {min_gbar:.2e}, max shift change {worst_shift:.1e}"),
    )
}

fn random_unit_horizontal(f: &FibrationModel, rng: &mut ChaCha8Rng) -> Vector {
    let v = f.horizontal.matrix() * gauss(rng, f.horizontal.dim());
    let norm = v.norm();
    v / norm
}

fn c4_composition_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    let kinds = [
        FibrationKind::PiFull,
        FibrationKind::Tau,
        FibrationKind::PiPrime,
        FibrationKind::RemarkSasaki,
    ];
    for kind in kinds {
        for trial in 0..200u64 {
            let n = 1 + (trial % 3) as usize;
            let s = if kind == FibrationKind::PiPrime { 1 } else { 2 + (trial % 3) as usize };
            let st = random_structure(n, s, 1000 * trial + kind as u64).unwrap();
            let f = make_fibration(&st, kind).unwrap();
            let x = random_unit_horizontal(&f, &mut rng);
            let y = random_unit_horizontal(&f, &mut rng);
            let g = st.metric();
            let phix = st.apply_phi(&x);
            let aa = oneill_a(&f, &x, &oneill_a(&f, &x, &y).unwrap()).unwrap();
            let expected = &phix * (-f.sigma * inner(g, &y, &phix).unwrap());
            worst = worst.max((aa - expected).amax());
        }
    }
    outcome(worst < 1e-10, format!("4 kinds x 200 draws, max residual {worst:.1e}"))
}

fn c5_shift_identity() -> Outcome {
    let kinds = [FibrationKind::PiFull, FibrationKind::Tau, FibrationKind::PiPrime];
    let (mut worst, mut leak) = (0.0_f64, 0.0_f64);
    for i in 0..200u64 {
        let kind = kinds[(i % 3) as usize];
        let n = 1 + ((i / 3) % 3) as usize;
        let s = if kind == FibrationKind::PiPrime { 1 } else { 2 + ((i / 9) % 3) as usize };
        let st = random_structure(n, s, i).unwrap();
        let f = make_fibration(&st, kind).unwrap();
        let r = random_algebraic_curvature(st.metric(), 500 + i, 1.0);
        for x in st.sample_phi_celestial(3, i).unwrap().points {
            let domain = r_star(&r, &f, &x).unwrap().domain;
            for y in domain.vectors() {
                let res = shift_identity_residual(&r, &f, &x, &y).unwrap();
                worst = worst.max(res.residual);
                leak = leak.max(res.leak);
            }
        }
    }
    let mut s2 = 0.0_f64;
    for i in 0..20u64 {
        let st = random_structure(1 + (i % 3) as usize, 2, 900 + i).unwrap();
        let f = make_fibration(&st, FibrationKind::PiFull).unwrap();
        let r = random_algebraic_curvature(st.metric(), 700 + i, 1.0);
        for x in st.sample_phi_celestial(3, i).unwrap().points {
            for y in r_star(&r, &f, &x).unwrap().domain.vectors() {
                // σ = 0: the residual is |R*_x y - h R_x y|
                s2 = s2.max(shift_identity_residual(&r, &f, &x, &y).unwrap().residual);
            }
        }
    }
    outcome(
        worst < 1e-9 && s2 < 1e-10,
        format!("200 tensors, max residual {worst:.1e} (max leak {leak:.2}); s=2 pi_full {s2:.1e}"),
    )
}

/// Independent model of the canonical structure with n = 2, s = 3 and the
/// phi-model curvature, written directly from the defining formulas.
struct Oracle {
    g: DMatrix<f64>,
    phi: DMatrix<f64>,
    a: f64,
    b: f64,
}

impl Oracle {
    fn new(a: f64, b: f64) -> Self {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 1.0]));
        let mut phi = DMatrix::zeros(7, 7);
        for j in 0..2 {
            phi[(2 + j, j)] = 1.0;
            phi[(j, 2 + j)] = -1.0;
        }
        Self { g, phi, a, b }
    }

    fn ip(&self, x: &Vector, y: &Vector) -> f64 {
        (x.transpose() * &self.g * y)[(0, 0)]
    }

    fn e(i: usize) -> Vector {
        let mut v = Vector::zeros(7);
        v[i] = 1.0;
        v
    }

    /// `R(Z, W) Y`.
    fn curv(&self, z: &Vector, w: &Vector, y: &Vector) -> Vector {
        let (pz, pw, py) = (&self.phi * z, &self.phi * w, &self.phi * y);
        (z * self.ip(y, w) - w * self.ip(y, z)) * self.a
            + (&pz * self.ip(&pw, y) - &pw * self.ip(&pz, y) - &py * (2.0 * self.ip(&pz, w))) * self.b
    }

    /// `A_x y` for the fibration whose vertical characteristic vectors are
    /// `e_{4+α}` for α in `vertical`, with the sign rule of the kind.
    fn a(&self, x: &Vector, y: &Vector, vertical: &[usize], tau: bool) -> Vector {
        let eps = [-1.0, 1.0, 1.0];
        let mut horizontal = y.clone();
        let mut out = Vector::zeros(7);
        let phix = &self.phi * x;
        for &al in vertical {
            let c = y[4 + al];
            horizontal[4 + al] = 0.0;
            let sign = if tau { -1.0 } else { -eps[al] };
            out += &phix * (sign * c);
        }
        let coeff = -self.ip(x, &(&self.phi * &horizontal));
        for &al in vertical {
            out += Self::e(4 + al) * coeff;
        }
        out
    }

    /// Eigenvalues of `op` on the span of `basis`, through its matrix.
    fn eigenvalues(&self, basis: &[Vector], op: impl Fn(&Vector) -> Vector) -> Vec<f64> {
        let k = basis.len();
        let gram = DMatrix::from_fn(k, k, |i, j| self.ip(&basis[i], &basis[j]));
        let form = DMatrix::from_fn(k, k, |i, j| self.ip(&basis[i], &op(&basis[j])));
        let m = gram.try_inverse().unwrap() * form;
        let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 10_000).expect("oracle Schur did not converge");
        let mut v: Vec<f64> = schur.complex_eigenvalues().iter().map(|c| c.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Euclidean basis of `x^⊥` inside the span of the given coordinates
    /// (x lies in the Im φ block, where g is the identity).
    fn perp_in(&self, x: &Vector, coords: &[usize]) -> Vec<Vector> {
        let mut out: Vec<Vector> = Vec::new();
        for &i in coords {
            let mut v = Self::e(i);
            v -= x * x[i];
            for o in &out {
                v -= o * o.dot(&v);
            }
            if v.norm() > 1e-6 {
                let n = v.norm();
                out.push(v / n);
            }
        }
        out
    }
}

fn compare(engine: &[f64], oracle: &[f64]) -> f64 {
    if engine.len() != oracle.len() {
        return f64::INFINITY;
    }
    engine.iter().zip(oracle).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn c6_curated_spectra() -> Outcome {
    let oracle = Oracle::new(1.0, 1.0);
    let st = canonical_structure(2, 3).unwrap();
    let g = st.metric();
    let r = phi_model_family(&st, 1.0, 1.0);
    let pi = make_fibration(&st, FibrationKind::PiFull).unwrap();
    let tau = make_fibration(&st, FibrationKind::Tau).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut d_direct, mut d_pi, mut d_tau) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut shapes_ok = true;
    for _ in 0..25 {
        let mut x = Vector::zeros(7);
        let head = gauss(&mut rng, 4);
        x.rows_mut(0, 4).copy_from(&(&head / head.norm()));

        let rx = |y: &Vector| oracle.curv(y, &x, &x);
        let direct = oracle.eigenvalues(&oracle.perp_in(&x, &[0, 1, 2, 3, 4, 5, 6]), rx);
        let e_direct = spectrum(&jacobi(&r, g, &x).unwrap(), 1e-6).unwrap();
        shapes_ok &= e_direct.matches(&[(1.0, 5), (4.0, 1)], 1e-8);
        d_direct = d_direct.max(compare(&e_direct.eigenvalues, &direct));

        // R*_x = h R_x - 3 A_x A_x
        let base = |y: &Vector, vertical: &[usize], tau: bool, keep: usize| {
            let mut h = oracle.curv(y, &x, &x);
            for i in keep..7 {
                h[i] = 0.0;
            }
            h - oracle.a(&x, &oracle.a(&x, y, vertical, tau), vertical, tau) * 3.0
        };
        let v_pi = oracle.perp_in(&x, &[0, 1, 2, 3]);
        let pi_oracle = oracle.eigenvalues(&v_pi, |y| base(y, &[0, 1, 2], false, 4));
        let e_pi = spectrum(&r_star(&r, &pi, &x).unwrap(), 1e-6).unwrap();
        shapes_ok &= e_pi.matches(&[(1.0, 2), (7.0, 1)], 1e-8);
        d_pi = d_pi.max(compare(&e_pi.eigenvalues, &pi_oracle));

        let mut v_tau = oracle.perp_in(&x, &[0, 1, 2, 3]);
        v_tau.push(Oracle::e(4));
        let tau_oracle = oracle.eigenvalues(&v_tau, |y| {
            let mut out = base(y, &[1, 2], true, 5);
            out[4] = oracle.curv(y, &x, &x)[4] - oracle.a(&x, &oracle.a(&x, y, &[1, 2], true), &[1, 2], true)[4] * 3.0;
            out
        });
        let e_tau = spectrum(&r_star(&r, &tau, &x).unwrap(), 1e-6).unwrap();
        shapes_ok &= e_tau.matches(&[(1.0, 3), (10.0, 1)], 1e-8);
        d_tau = d_tau.max(compare(&e_tau.eigenvalues, &tau_oracle));
    }
    outcome(
        shapes_ok && d_direct < 1e-8 && d_pi < 1e-8 && d_tau < 1e-8,
        format!(
            "{{(1,5),(4,1)}}, {{(1,2),(7,1)}}, tau phi x -> 10; oracle gaps {d_direct:.1e} / {d_pi:.1e} / {d_tau:.1e}"
        ),
    )
}

fn c7_theorem() -> Outcome {
    let opts = CheckOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut contract_cases = 0;
    let mut agreements = 0;
    let mut problems: Vec<String> = Vec::new();
    for i in 0..25u64 {
        let st = random_structure(1 + (i % 2) as usize, 2 + (i % 3) as usize, 70 + i).unwrap();
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let rep = theorem_equivalence_report(&phi_model_family(&st, a, b), &st, &opts).unwrap();
        contract_cases += 1;
        if rep.hypothesis_flag && rep.status == TheoremStatus::Agree {
            agreements += 1;
        } else {
            problems.push(format!("phi model {i}: {:?}", rep.status));
        }
    }
    for i in 0..25u64 {
        let st = random_structure(2 + (i % 2) as usize, 2, 170 + i).unwrap();
        let r = random_algebraic_curvature(st.metric(), 270 + i, 1.0);
        let rep = theorem_equivalence_report(&r, &st, &opts).unwrap();
        contract_cases += 1;
        if matches!(rep.status, TheoremStatus::Agree | TheoremStatus::AgreeSTwo) {
            agreements += 1;
        } else {
            problems.push(format!("random s=2 {i}: {:?}", rep.status));
        }
    }
    let mut hypothesis_false = 0;
    for i in 0..25u64 {
        let st = random_structure(1 + (i % 3) as usize, 3 + (i % 2) as usize, 370 + i).unwrap();
        let r = random_algebraic_curvature(st.metric(), 470 + i, 1.0);
        let rep = theorem_equivalence_report(&r, &st, &opts).unwrap();
        if !rep.hypothesis_flag && rep.status == TheoremStatus::HypothesisFalse {
            hypothesis_false += 1;
        } else {
            problems.push(format!("random s>=3 {i}: {:?}", rep.status));
        }
    }
    let detail = format!(
        "{agreements}/{contract_cases} contract cases agree; {hypothesis_false}/25 generic s>=3 flagged hypothesis-false{}",
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join(", ")) }
    );
    outcome(problems.is_empty(), detail)
}

fn c8_remarks() -> Outcome {
    let opts = CheckOptions {
        samples: 50,
        ..Default::default()
    };
    let mut worst = 0.0_f64;
    for (i, s) in [2usize, 3, 4].into_iter().enumerate() {
        let st = random_structure(2, s, 80 + i as u64).unwrap();
        let r = random_algebraic_curvature(st.metric(), 81 + i as u64, 1.0);
        for kind in [RemarkKind::SasakiBase, RemarkKind::LorentzSasakiBase] {
            let rep = remark_sectional_conditions(&r, &st, kind, &opts).unwrap();
            worst = worst.max(rep.max_identity_residual).max(rep.max_a_norm_residual);
        }
    }
    // instances built so that k(x, phi x) = a + 3b hits the target
    let mut targets = Vec::new();
    let mut met = true;
    for (kind, s) in [
        (RemarkKind::SasakiBase, 3),
        (RemarkKind::SasakiBase, 4),
        (RemarkKind::LorentzSasakiBase, 2),
        (RemarkKind::LorentzSasakiBase, 3),
    ] {
        let st = random_structure(2, s, 90 + s as u64).unwrap();
        let target = kind.target(s);
        let b = 0.5;
        let r = phi_model_family(&st, target - 3.0 * b, b);
        let rep = remark_sectional_conditions(&r, &st, kind, &opts).unwrap();
        met &= rep.condition_met_all && rep.identity_passed;
        targets.push(format!("{target}"));
    }
    let expected = ["1", "-2", "-4", "-7"];
    outcome(
        worst < 1e-9 && met && targets == expected,
        format!("max identity residual {worst:.1e}; targets {} met", targets.join(", ")),
    )
}

fn c9_psi() -> Outcome {
    let mut round = 0.0_f64;
    let mut null = 0.0_f64;
    for (k, st) in [canonical_structure(2, 3).unwrap(), random_structure(2, 2, 9).unwrap()]
        .iter()
        .enumerate()
    {
        let g = st.metric();
        let xi = &st.xi()[0];
        for x in sample_celestial(g, xi, 50, k as u64).unwrap().points {
            let u = st.psi_inverse(&x).unwrap();
            round = round.max((st.psi(&u).unwrap() - &x).amax());
            round = round.max((st.psi_inverse(&st.psi(&u).unwrap()).unwrap() - &u).amax());
            null = null
                .max(inner(g, &u, &u).unwrap().abs())
                .max((inner(g, &u, xi).unwrap() + 1.0).abs());
        }
    }
    outcome(
        round < 1e-12 && null < 1e-12,
        format!("100 points, round trip {round:.1e}, null/normalization {null:.1e}"),
    )
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_gffo");
    let run = |args: &[&str]| -> Vec<u8> {
        let out = Command::new(bin).args(args).current_dir(dir.path()).output().unwrap();
        out.stdout
    };
    let mut compared = 0;
    for (name, extra) in [
        ("pm.json", vec!["--family", "phi-model", "--n", "2", "--s", "3", "--a", "1", "--b", "1"]),
        ("rnd.json", vec!["--family", "random", "--n", "1", "--s", "2"]),
        ("cst.json", vec!["--family", "constant", "--n", "1", "--s", "1", "--c", "-1"]),
    ] {
        let mut args = vec!["generate", "--seed", "7", "--out"];
        args.push(name);
        args.extend(extra);
        run(&args);
        let first = std::fs::read(dir.path().join(name)).unwrap();
        run(&args);
        if std::fs::read(dir.path().join(name)).unwrap() != first {
            return outcome(false, format!("generate {name} differs"));
        }
        compared += 1;
    }
    let commands: Vec<Vec<&str>> = vec![
        vec!["validate", "pm.json", "--json"],
        vec!["check", "pm.json", "--condition", "osserman", "--samples", "16", "--json"],
        vec!["check", "pm.json", "--condition", "null-osserman", "--samples", "16", "--json"],
        vec!["check", "rnd.json", "--condition", "phi-null-osserman", "--samples", "16", "--seed", "3", "--json"],
        vec!["check", "cst.json", "--condition", "osserman", "--causal", "timelike", "--json"],
        vec!["verify-theorem", "pm.json", "--samples", "16", "--json"],
        vec!["verify-theorem", "rnd.json", "--samples", "16", "--seed", "5", "--json"],
        vec!["remarks", "pm.json", "--kind", "sasaki-base", "--samples", "16", "--json"],
        vec!["remarks", "rnd.json", "--kind", "lorentz-sasaki-base", "--json"],
        vec!["spectrum", "pm.json", "--vector", "1,0,0,0,0,0,0", "--json"],
        vec!["spectrum", "pm.json", "--vector", "1,0,0,0,1,0,0", "--json"],
    ];
    for args in &commands {
        let a = run(args);
        let b = run(args);
        if a.is_empty() || a != b {
            return outcome(false, format!("{} output differs or is empty", args.join(" ")));
        }
        compared += 1;
    }
    outcome(true, format!("{compared} commands byte-identical across two runs"))
}
