use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gff_core::curvature::{constant_curvature, phi_model_family, random_algebraic_curvature, validate_curvature};
use gff_core::io::{
    check_instance, load_instance, to_json_string, CurvatureJson, Family, Instance, InstanceJson, LoadError, Metadata,
    StructureJson,
};
use gff_core::jacobi::{
    is_null_osserman_wrt, is_osserman_at, is_phi_null_osserman_wrt, jacobi, null_jacobi, spectrum, CheckOptions,
    UnitKind,
};
use gff_core::linalg::{causal_character, CausalCharacter, Vector};
use gff_core::report::ValidationReport;
use gff_core::structure::canonical_structure;
use gff_core::submersion::{remark_sectional_conditions, theorem_equivalence_report_with, FaultInjection, RemarkKind};
use gff_core::GeomError;

const EXIT_FAIL: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_SENTINEL: u8 = 4;

#[derive(Parser)]
#[command(name = "gffo", version, about = "Jacobi spectra and Osserman-type checks for Lorentzian g.f.f-structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the structure and curvature blocks of an instance file.
    Validate {
        path: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Write a seeded instance file.
    Generate(GenerateArgs),
    /// Decide an Osserman-type condition by sampled spectra.
    Check {
        path: PathBuf,
        #[arg(long, value_enum)]
        condition: Condition,
        /// Causal character of the sampled directions (osserman only).
        #[arg(long, value_enum, default_value_t = Causal::Spacelike)]
        causal: Causal,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        out: Output,
    },
    /// Compare the three equivalent conditions of the fibration theorem.
    VerifyTheorem {
        path: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        out: Output,
        #[arg(long, hide = true, default_value_t = 0.0)]
        tamper_sigma: f64,
    },
    /// Sectional-curvature identities and necessary conditions for the base.
    Remarks {
        path: PathBuf,
        #[arg(long, value_enum)]
        kind: RemarkArg,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        out: Output,
    },
    /// Spectrum of the Jacobi operator at one vector (null vectors use the quotient).
    Spectrum {
        path: PathBuf,
        /// Comma-separated components.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        vector: Vec<f64>,
        #[arg(long = "grouping-tol", default_value_t = 1e-6)]
        grouping_tol: f64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Sampling {
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long = "grouping-tol", default_value_t = 1e-6)]
    grouping_tol: f64,
}

impl Sampling {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            samples: self.samples,
            seed: self.seed,
            tol: self.tol,
            grouping_tol: self.grouping_tol,
        }
    }
}

#[derive(Args)]
struct Output {
    /// Write the JSON report to PATH, or to standard output without a value.
    #[arg(long, num_args = 0..=1, value_name = "PATH")]
    json: Option<Option<PathBuf>>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    /// Curvature of the space form.
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    c: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    b: f64,
    /// Entry scale of the random tensor.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    name: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Constant,
    PhiModel,
    Random,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Condition {
    Osserman,
    NullOsserman,
    PhiNullOsserman,
}

#[derive(Clone, Copy, ValueEnum)]
enum Causal {
    Spacelike,
    Timelike,
}

#[derive(Clone, Copy, ValueEnum)]
enum RemarkArg {
    SasakiBase,
    LorentzSasakiBase,
}

enum CliError {
    Io(String),
    Invalid(String),
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        if e.is_validation() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

type CliResult = Result<u8, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path, out } => cmd_validate(&path, &out),
        Command::Generate(args) => cmd_generate(&args),
        Command::Check {
            path,
            condition,
            causal,
            sampling,
            out,
        } => cmd_check(&path, condition, causal, &sampling, &out),
        Command::VerifyTheorem {
            path,
            sampling,
            out,
            tamper_sigma,
        } => cmd_verify_theorem(&path, &sampling, &out, tamper_sigma),
        Command::Remarks {
            path,
            kind,
            sampling,
            out,
        } => cmd_remarks(&path, kind, &sampling, &out),
        Command::Spectrum {
            path,
            vector,
            grouping_tol,
            out,
        } => cmd_spectrum(&path, &vector, grouping_tol, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

/// Emits the JSON report. Returns true when it went to standard output, in
/// which case the text summary is suppressed.
fn emit<T: Serialize>(out: &Output, report: &T) -> Result<bool, CliError> {
    match &out.json {
        None => Ok(false),
        Some(None) => {
            print!("{}", to_json_string(report));
            Ok(true)
        }
        Some(Some(path)) => {
            write_file(path, &to_json_string(report))?;
            Ok(false)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct ValidateReport {
    name: String,
    passed: bool,
    structure: Option<ValidationReport>,
    curvature: Option<ValidationReport>,
    errors: Vec<String>,
}

fn cmd_validate(path: &Path, out: &Output) -> CliResult {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let json: InstanceJson = serde_json::from_str(&text).map_err(|e| CliError::Io(format!("malformed JSON: {e}")))?;
    let mut report = ValidateReport {
        name: json.metadata.name.clone(),
        passed: false,
        structure: None,
        curvature: None,
        errors: Vec::new(),
    };
    match json.structure.to_structure() {
        Ok(st) => {
            let sr = st.validate();
            match json.curvature.to_tensor() {
                Ok(r) if r.dim() == st.dim() => report.curvature = Some(validate_curvature(&r, st.metric())),
                Ok(r) => report.errors.push(format!("curvature dim {} != structure dim {}", r.dim(), st.dim())),
                Err(e) => report.errors.push(format!("curvature: {e}")),
            }
            report.structure = Some(sr);
        }
        Err(e) => report.errors.push(format!("structure: {e}")),
    }
    report.passed = report.errors.is_empty()
        && report.structure.as_ref().is_some_and(|r| r.passed())
        && report.curvature.as_ref().is_some_and(|r| r.passed());
    if !emit(out, &report)? {
        println!("instance {}", report.name);
        for (label, r) in [("structure", &report.structure), ("curvature", &report.curvature)] {
            if let Some(r) = r {
                for c in &r.checks {
                    println!("  {label:<9} {:<4} {:<44} {:.3e}", verdict(c.passed), c.name, c.residual);
                }
            }
        }
        for e in &report.errors {
            println!("  error: {e}");
        }
        println!("{}", verdict(report.passed));
    }
    Ok(if report.passed { 0 } else { EXIT_INVALID })
}

fn cmd_generate(args: &GenerateArgs) -> CliResult {
    let st = canonical_structure(args.n, args.s)?;
    let mut parameters = BTreeMap::new();
    parameters.insert("n".to_string(), args.n as f64);
    parameters.insert("s".to_string(), args.s as f64);
    let (family, r, label) = match args.family {
        FamilyArg::Constant => {
            parameters.insert("c".into(), args.c);
            (Family::CanonicalConstant, constant_curvature(st.metric(), args.c), "constant")
        }
        FamilyArg::PhiModel => {
            parameters.insert("a".into(), args.a);
            parameters.insert("b".into(), args.b);
            (Family::CanonicalPhiModel, phi_model_family(&st, args.a, args.b), "phi_model")
        }
        FamilyArg::Random => {
            parameters.insert("scale".into(), args.scale);
            (
                Family::CanonicalRandom,
                random_algebraic_curvature(st.metric(), args.seed, args.scale),
                "random",
            )
        }
    };
    let json = InstanceJson {
        metadata: Metadata {
            name: args
                .name
                .clone()
                .unwrap_or_else(|| format!("{label}-n{}-s{}-seed{}", args.n, args.s, args.seed)),
            seed: args.seed,
            family,
            parameters,
        },
        structure: StructureJson::from_structure(&st),
        curvature: CurvatureJson::from_tensor(&r),
    };
    // the generator must produce loadable instances
    check_instance(&json)?;
    let text = to_json_string(&json);
    match &args.out {
        Some(path) => {
            write_file(path, &text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(0)
}

#[derive(Serialize)]
struct CheckOutput<T: Serialize> {
    instance: String,
    condition: Condition,
    passed: bool,
    report: T,
}

fn cmd_check(path: &Path, condition: Condition, causal: Causal, sampling: &Sampling, out: &Output) -> CliResult {
    let inst = load_instance(path)?;
    let opts = sampling.options();
    let (r, st) = (&inst.curvature, &inst.structure);
    let (passed, to_stdout, lines) = match condition {
        Condition::Osserman => {
            let kind = match causal {
                Causal::Spacelike => UnitKind::Spacelike,
                Causal::Timelike => UnitKind::Timelike,
            };
            let rep = is_osserman_at(r, st.metric(), kind, &opts)?;
            let lines = condition_lines(&rep);
            let passed = rep.passed;
            (passed, emit(out, &wrap(&inst, condition, passed, rep))?, lines)
        }
        Condition::NullOsserman => {
            let rep = is_null_osserman_wrt(r, st.metric(), &st.xi()[0], &opts)?;
            let lines = condition_lines(&rep);
            let passed = rep.passed;
            (passed, emit(out, &wrap(&inst, condition, passed, rep))?, lines)
        }
        Condition::PhiNullOsserman => {
            let rep = is_phi_null_osserman_wrt(r, st, &opts)?;
            let mut lines = condition_lines(&rep.quotient);
            lines.extend(condition_lines(&rep.direct));
            let passed = rep.quotient.passed;
            (passed, emit(out, &wrap(&inst, condition, passed, rep))?, lines)
        }
    };
    if !to_stdout {
        println!("instance {}", inst.metadata.name);
        for l in lines {
            println!("{l}");
        }
        println!("{}", verdict(passed));
    }
    Ok(if passed { 0 } else { EXIT_FAIL })
}

fn wrap<T: Serialize>(inst: &Instance, condition: Condition, passed: bool, report: T) -> CheckOutput<T> {
    CheckOutput {
        instance: inst.metadata.name.clone(),
        condition,
        passed,
        report,
    }
}

fn condition_lines(rep: &gff_core::jacobi::ConditionReport) -> Vec<String> {
    let mut lines = vec![format!(
        "  {}: {} ({} samples, seed {})",
        rep.condition,
        verdict(rep.passed),
        rep.samples,
        rep.seed
    )];
    if let Some(reference) = &rep.reference {
        let pairs: Vec<String> = reference.pairs().iter().map(|(v, k)| format!("{v:.10} x{k}")).collect();
        lines.push(format!("    spectrum at sample 0: {}", pairs.join(", ")));
    }
    if let Some(f) = &rep.failure {
        lines.push(format!("    {f}"));
    }
    if let Some([i, j]) = rep.counterexample {
        for k in [i, j] {
            if let Some(s) = rep.per_sample[k].spectrum.as_ref() {
                let pairs: Vec<String> = s.pairs().iter().map(|(v, m)| format!("{v:.10} x{m}")).collect();
                lines.push(format!("    sample {k}: {}", pairs.join(", ")));
            }
        }
    }
    lines
}

fn cmd_verify_theorem(path: &Path, sampling: &Sampling, out: &Output, tamper_sigma: f64) -> CliResult {
    let inst = load_instance(path)?;
    let opts = sampling.options();
    let faults = FaultInjection {
        sigma_offset: tamper_sigma,
    };
    let rep = theorem_equivalence_report_with(&inst.curvature, &inst.structure, &opts, faults)?;
    if !emit(out, &rep)? {
        let v = &rep.verdicts;
        println!("instance {}", inst.metadata.name);
        println!("  (a) phi-null osserman        {}", verdict(v.phi_null_osserman));
        println!("  (b) base osserman (pi)       {}", verdict(v.base_osserman));
        println!("  (c) base null osserman (tau) {}", verdict(v.base_null_osserman));
        println!("  eigenvector hypothesis       {} (residual {:.3e})", rep.hypothesis_flag, rep.residual_maxima.hypothesis);
        println!(
            "  shift identity residual      pi {:.3e}, tau {:.3e}",
            rep.residual_maxima.shift_pi_full, rep.residual_maxima.shift_tau
        );
        println!("status: {}", serde_json::to_value(rep.status).unwrap().as_str().unwrap());
    }
    Ok(if rep.sentinel() { EXIT_SENTINEL } else { 0 })
}

fn cmd_remarks(path: &Path, kind: RemarkArg, sampling: &Sampling, out: &Output) -> CliResult {
    let inst = load_instance(path)?;
    let kind = match kind {
        RemarkArg::SasakiBase => RemarkKind::SasakiBase,
        RemarkArg::LorentzSasakiBase => RemarkKind::LorentzSasakiBase,
    };
    let rep = remark_sectional_conditions(&inst.curvature, &inst.structure, kind, &sampling.options())?;
    if !emit(out, &rep)? {
        println!("instance {}", inst.metadata.name);
        println!(
            "  identity residual {:.3e} ({})",
            rep.max_identity_residual,
            verdict(rep.identity_passed)
        );
        println!(
            "  vertical sign sum {}, target k(x, phi x) = {}: {}",
            rep.vertical_sign_sum,
            rep.target,
            if rep.condition_met_all { "met" } else { "not met" }
        );
    }
    Ok(if rep.identity_passed { 0 } else { EXIT_FAIL })
}

#[derive(Serialize)]
struct SpectrumOutput {
    instance: String,
    vector: Vec<f64>,
    causal: CausalCharacter,
    operator: &'static str,
    spectrum: gff_core::jacobi::SpectralData,
}

fn cmd_spectrum(path: &Path, vector: &[f64], grouping_tol: f64, out: &Output) -> CliResult {
    let inst = load_instance(path)?;
    let g = inst.structure.metric();
    if vector.len() != g.dim() {
        return Err(CliError::Invalid(format!(
            "vector has {} components, instance dimension is {}",
            vector.len(),
            g.dim()
        )));
    }
    let z = Vector::from_column_slice(vector);
    let causal = causal_character(g, &z);
    let (operator, op) = match causal {
        CausalCharacter::Null => ("null_quotient", null_jacobi(&inst.curvature, g, &z)?),
        CausalCharacter::Zero => return Err(GeomError::NullBase.into()),
        _ => ("classical", jacobi(&inst.curvature, g, &z)?),
    };
    let report = SpectrumOutput {
        instance: inst.metadata.name.clone(),
        vector: vector.to_vec(),
        causal,
        operator,
        spectrum: spectrum(&op, grouping_tol)?,
    };
    if !emit(out, &report)? {
        println!("instance {} ({operator} operator)", report.instance);
        for g in &report.spectrum.groups {
            println!("  {:.12}  x{}", g.value, g.multiplicity);
        }
    }
    Ok(0)
}
