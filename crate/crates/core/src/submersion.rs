//! Pointwise models of the torus-bundle projections of a Lorentzian
//! S-manifold, their closed-form O'Neill A-tensors, the base curvature
//! operator `R*` and the spectral transfer checks built on it.
//!
//! | kind            | vertical        | horizontal              | σ = Σ ε over vertical |
//! |-----------------|-----------------|-------------------------|-----------------------|
//! | `pi_full`       | ξ_1 .. ξ_s      | Im φ                    | s − 2                 |
//! | `tau`           | ξ_2 .. ξ_s      | Im φ ⊕ span ξ_1         | s − 1                 |
//! | `pi_prime`      | ξ_1 (s = 1)     | Im φ                    | −1                    |
//! | `remark_sasaki` | ξ_1 .. ξ_{s−1}  | Im φ ⊕ span ξ_s         | s − 3                 |
//!
//! On horizontal `x, y` every kind satisfies `A_x A_x y = −σ g(y, φx) φx`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::curvature::{sectional_curvature, CurvatureTensor};
use crate::error::{GeomError, Result};
use crate::jacobi::{sampled_spectra, CheckOptions, ConditionReport, JacobiOperator};
use crate::linalg::{max_abs, nullspace, orthonormal_frame, ScalarProduct, SubspaceBasis, Vector};
use crate::structure::{checks, GffStructure, STRUCTURE_TOL};

/// Tolerance on the vertical part of a vector declared horizontal,
/// relative to its size.
pub const HORIZONTAL_TOL: f64 = 1e-9;
/// Contract for the shift and remark identities.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FibrationKind {
    PiFull,
    Tau,
    PiPrime,
    RemarkSasaki,
}

impl FibrationKind {
    /// Zero-based indices of the vertical characteristic vectors.
    fn vertical_indices(self, s: usize) -> Vec<usize> {
        match self {
            FibrationKind::PiFull | FibrationKind::PiPrime => (0..s).collect(),
            FibrationKind::Tau => (1..s).collect(),
            FibrationKind::RemarkSasaki => (0..s - 1).collect(),
        }
    }

    pub fn expected_sigma(self, s: usize) -> f64 {
        let s = s as f64;
        match self {
            FibrationKind::PiFull => s - 2.0,
            FibrationKind::Tau => s - 1.0,
            FibrationKind::PiPrime => -1.0,
            FibrationKind::RemarkSasaki => s - 3.0,
        }
    }

    fn check_s(self, s: usize) -> Result<()> {
        let ok = match self {
            FibrationKind::PiPrime => s == 1,
            _ => s >= 2,
        };
        if ok {
            Ok(())
        } else {
            let need = if self == FibrationKind::PiPrime { "s = 1" } else { "s >= 2" };
            Err(GeomError::Precondition(format!("{self:?} needs {need}, got s = {s}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FibrationModel {
    pub kind: FibrationKind,
    pub structure: GffStructure,
    pub horizontal: SubspaceBasis,
    pub vertical: SubspaceBasis,
    pub vertical_indices: Vec<usize>,
    pub sigma: f64,
}

pub fn make_fibration(st: &GffStructure, kind: FibrationKind) -> Result<FibrationModel> {
    kind.check_s(st.s())?;
    if !st.is_lorentzian() {
        return Err(GeomError::Precondition(
            "fibrations need a Lorentzian structure with xi_1 timelike".into(),
        ));
    }
    let g = st.metric();
    let vertical_indices = kind.vertical_indices(st.s());
    let vertical = SubspaceBasis::new(g, &vertical_indices.iter().map(|&a| st.xi()[a].clone()).collect::<Vec<_>>())?;
    let mut hcols = st.image_basis()?.vectors();
    match kind {
        FibrationKind::Tau => hcols.push(st.xi()[0].clone()),
        FibrationKind::RemarkSasaki => hcols.push(st.xi()[st.s() - 1].clone()),
        _ => {}
    }
    let horizontal = SubspaceBasis::new(g, &hcols)?;
    if horizontal.dim() + vertical.dim() != st.dim() {
        return Err(GeomError::Structure(format!(
            "horizontal ({}) and vertical ({}) do not fill dimension {}",
            horizontal.dim(),
            vertical.dim(),
            st.dim()
        )));
    }
    let cross = horizontal.matrix().transpose() * g.components() * vertical.matrix();
    let scale = max_abs(horizontal.gram()).max(max_abs(vertical.gram())).max(1.0);
    if cross.amax() >= STRUCTURE_TOL * scale {
        return Err(GeomError::Structure(format!(
            "horizontal and vertical are not orthogonal (cross gram {:e})",
            cross.amax()
        )));
    }
    let sigma: f64 = vertical_indices.iter().map(|&a| st.epsilon()[a]).sum();
    if sigma != kind.expected_sigma(st.s()) {
        return Err(GeomError::Structure(format!(
            "vertical sign sum {sigma} differs from {} for {kind:?}",
            kind.expected_sigma(st.s())
        )));
    }
    Ok(FibrationModel {
        kind,
        structure: st.clone(),
        horizontal,
        vertical,
        vertical_indices,
        sigma,
    })
}

impl FibrationModel {
    pub fn metric(&self) -> &ScalarProduct {
        self.structure.metric()
    }

    /// Replaces σ without the consistency check. Only useful to exercise the
    /// shift-identity sentinel.
    #[doc(hidden)]
    pub fn with_sigma_unchecked(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// `Σ_{α vertical} ξ_α`.
    pub fn xi_bar(&self) -> Vector {
        let mut out = Vector::zeros(self.structure.dim());
        for &a in &self.vertical_indices {
            out += &self.structure.xi()[a];
        }
        out
    }

    /// Horizontal part and vertical coordinates (in the order of
    /// `vertical_indices`).
    pub fn split(&self, v: &Vector) -> Result<(Vector, Vector)> {
        let c = self.vertical.coordinates(self.metric(), v)?;
        let h = v - self.vertical.matrix() * &c;
        Ok((h, c))
    }

    pub fn vertical_part_norm(&self, v: &Vector) -> Result<f64> {
        let (h, _) = self.split(v)?;
        Ok((v - h).amax())
    }

    fn require_horizontal(&self, x: &Vector) -> Result<()> {
        self.metric().check_dim(x)?;
        let leak = self.vertical_part_norm(x)?;
        if leak > HORIZONTAL_TOL * x.amax().max(1.0) {
            return Err(GeomError::Precondition(format!("vector is not horizontal (vertical part {leak:e})")));
        }
        Ok(())
    }

    /// `A_x y` for horizontal `y`.
    fn a_horizontal(&self, x: &Vector, y: &Vector) -> Vector {
        let st = &self.structure;
        let g = self.metric();
        let c = match self.kind {
            FibrationKind::RemarkSasaki => g.form(y, &st.apply_phi(x)),
            _ => -g.form(x, &st.apply_phi(y)),
        };
        self.xi_bar() * c
    }

    /// `A_x ξ_α` for vertical `ξ_α`.
    fn a_vertical(&self, x: &Vector, alpha: usize) -> Vector {
        let phix = self.structure.apply_phi(x);
        match self.kind {
            FibrationKind::Tau => -phix,
            _ => phix * -self.structure.epsilon()[alpha],
        }
    }

    fn a_unchecked(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        let (h, c) = self.split(y)?;
        let mut out = self.a_horizontal(x, &h);
        for (k, &alpha) in self.vertical_indices.iter().enumerate() {
            if c[k] != 0.0 {
                out += self.a_vertical(x, alpha) * c[k];
            }
        }
        Ok(out)
    }

    /// Basis of `H ∩ {vs}^⊥`.
    fn horizontal_perp(&self, vs: &[Vector]) -> Result<SubspaceBasis> {
        let g = self.metric();
        let h = self.horizontal.matrix();
        let gh = g.components() * h;
        let rows = DMatrix::from_fn(vs.len(), h.ncols(), |i, j| gh.column(j).dot(&vs[i]));
        let coeff = nullspace(&rows, g.tolerances().rank_rel);
        SubspaceBasis::from_columns(g, h * coeff)
    }
}

/// The O'Neill tensor `A_X Y` in closed form. `X` must be horizontal; `Y` is
/// split into its horizontal and vertical parts.
pub fn oneill_a(f: &FibrationModel, x: &Vector, y: &Vector) -> Result<Vector> {
    f.require_horizontal(x)?;
    f.metric().check_dim(y)?;
    f.a_unchecked(x, y)
}

/// `g(R*_x y, z) = R(x,y,x,z) + 2 g(A_x y, A_x z) - g(A_y x, A_x z)` on the
/// columns of `domain`.
fn base_form(r: &CurvatureTensor, f: &FibrationModel, x: &Vector, domain: &SubspaceBasis) -> Result<DMatrix<f64>> {
    let g = f.metric();
    let e = domain.matrix();
    let k = r.jacobi_form(x);
    let mut form = e.transpose() * k * e;
    let ds = domain.vectors();
    let ax: Vec<Vector> = ds.iter().map(|d| f.a_unchecked(x, d)).collect::<Result<_>>()?;
    let ayx: Vec<Vector> = ds.iter().map(|d| f.a_unchecked(d, x)).collect::<Result<_>>()?;
    for i in 0..ds.len() {
        for j in 0..ds.len() {
            form[(i, j)] += 2.0 * g.form(&ax[i], &ax[j]) - g.form(&ayx[i], &ax[j]);
        }
    }
    Ok((&form + form.transpose()) * 0.5)
}

fn require_unit_spacelike(g: &ScalarProduct, x: &Vector) -> Result<()> {
    let q = g.norm_sq(x);
    if (q - 1.0).abs() > HORIZONTAL_TOL {
        return Err(GeomError::Precondition(format!("expected a unit spacelike vector, g(x,x) = {q}")));
    }
    Ok(())
}

/// The base Jacobi operator at `x` on `x^⊥ ∩ H`.
pub fn r_star(r: &CurvatureTensor, f: &FibrationModel, x: &Vector) -> Result<JacobiOperator> {
    f.require_horizontal(x)?;
    require_unit_spacelike(f.metric(), x)?;
    let domain = f.horizontal_perp(&[x.clone()])?;
    let form = base_form(r, f, x, &domain)?;
    JacobiOperator::from_form(x.clone(), domain.clone(), domain.gram().clone(), form)
}

/// Null Jacobi operator of the base at a horizontal null `u`, on
/// `(u^⊥ ∩ H) / span(u)`.
pub fn r_star_null(r: &CurvatureTensor, f: &FibrationModel, u: &Vector) -> Result<JacobiOperator> {
    f.require_horizontal(u)?;
    let g = f.metric();
    let q = g.norm_sq(u);
    if q.abs() > g.tolerances().null_abs * u.norm_squared().max(1.0) {
        return Err(GeomError::NotNull { norm: q });
    }
    // a horizontal partner with g(u, w) != 0
    let hs = f.horizontal.vectors();
    let w = hs
        .iter()
        .max_by(|a, b| g.form(a, u).abs().total_cmp(&g.form(b, u).abs()))
        .cloned()
        .ok_or(GeomError::NullBase)?;
    let reps = f.horizontal_perp(&[u.clone(), w])?;
    let gbar = reps.gram().clone();
    if gbar.nrows() > 0 {
        let min_eigenvalue = SymmetricEigen::new(gbar.clone()).eigenvalues.min();
        if !(min_eigenvalue > g.tolerances().rank_rel * max_abs(&gbar)) {
            return Err(GeomError::QuotientNotDefinite { min_eigenvalue });
        }
    }
    let form = base_form(r, f, u, &reps)?;
    JacobiOperator::from_form(u.clone(), reps, gbar, form)
}

/// Residual of `R*_x y = h R_x y + 3σ g(y, φx) φx` together with the part of
/// `R_x y` that leaves `x^⊥ ∩ H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftResidual {
    pub residual: f64,
    pub leak: f64,
}

pub fn shift_identity_residual(r: &CurvatureTensor, f: &FibrationModel, x: &Vector, y: &Vector) -> Result<ShiftResidual> {
    let st = &f.structure;
    if !st.in_phi_celestial(x, HORIZONTAL_TOL) {
        return Err(GeomError::Precondition("x is not on the phi-celestial sphere".into()));
    }
    let op = r_star(r, f, x)?;
    let dist = op.domain.distance(y);
    if dist > HORIZONTAL_TOL * y.amax().max(1.0) {
        return Err(GeomError::Precondition(format!("y is not in x^⊥ ∩ H (distance {dist:e})")));
    }
    shift_residual_in(r, f, x, y, &op)
}

fn shift_residual_in(
    r: &CurvatureTensor,
    f: &FibrationModel,
    x: &Vector,
    y: &Vector,
    op: &JacobiOperator,
) -> Result<ShiftResidual> {
    let g = f.metric();
    let dom = &op.domain;
    let e = dom.matrix();
    let yc = dom.coordinates(g, y)?;
    let r_star_y = e * (&op.matrix * &yc);
    let rx_y = g.sharp(&(r.jacobi_form(x) * y));
    let projected = dom.project(g, &rx_y)?;
    let phix = f.structure.apply_phi(x);
    let shift = &phix * (3.0 * f.sigma * g.form(y, &phix));
    Ok(ShiftResidual {
        residual: (r_star_y - &projected - shift).norm(),
        leak: (&rx_y - projected).norm(),
    })
}

/// Largest shift residual and leak over a basis of `x^⊥ ∩ H`.
pub fn shift_residuals_at(r: &CurvatureTensor, f: &FibrationModel, x: &Vector) -> Result<ShiftResidual> {
    let op = r_star(r, f, x)?;
    let mut worst = ShiftResidual { residual: 0.0, leak: 0.0 };
    for y in op.domain.vectors() {
        let s = shift_residual_in(r, f, x, &y, &op)?;
        worst.residual = worst.residual.max(s.residual);
        worst.leak = worst.leak.max(s.leak);
    }
    Ok(worst)
}

/// Sampled Osserman test of the base through `R*` (pi_full or pi_prime).
pub fn base_osserman_check(r: &CurvatureTensor, f: &FibrationModel, opts: &CheckOptions) -> Result<ConditionReport> {
    if !matches!(f.kind, FibrationKind::PiFull | FibrationKind::PiPrime) {
        return Err(GeomError::Precondition(format!("base Osserman check needs pi_full or pi_prime, got {:?}", f.kind)));
    }
    let xs = f.structure.sample_phi_celestial(opts.samples, opts.seed)?.points;
    let per_sample = sampled_spectra(&xs, opts.grouping_tol, |x| r_star(r, f, x))?;
    Ok(ConditionReport::decide("base osserman", opts, per_sample))
}

/// Null Osserman test of the tau base with respect to `ξ_1`, through the
/// quotient at `u' = ξ_1 + x`, alongside the base Jacobi spectra at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseNullReport {
    pub quotient: ConditionReport,
    pub direct: ConditionReport,
}

impl BaseNullReport {
    pub fn passed(&self) -> bool {
        self.quotient.passed
    }
}

pub fn base_null_osserman_check(r: &CurvatureTensor, f: &FibrationModel, opts: &CheckOptions) -> Result<BaseNullReport> {
    if f.kind != FibrationKind::Tau {
        return Err(GeomError::Precondition(format!("base null Osserman check needs tau, got {:?}", f.kind)));
    }
    let st = &f.structure;
    let xs = st.sample_phi_celestial(opts.samples, opts.seed)?.points;
    let us: Vec<Vector> = xs.iter().map(|x| &st.xi()[0] + x).collect();
    let quotient = sampled_spectra(&us, opts.grouping_tol, |u| r_star_null(r, f, u))?;
    let direct = sampled_spectra(&xs, opts.grouping_tol, |x| r_star(r, f, x))?;
    Ok(BaseNullReport {
        quotient: ConditionReport::decide("base null osserman (quotient)", opts, quotient),
        direct: ConditionReport::decide("base jacobi (direct)", opts, direct),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    /// φ-null Osserman at ξ_1, through `R_x` on `x^⊥`.
    pub phi_null_osserman: bool,
    /// Osserman base of the full torus fibration.
    pub base_osserman: bool,
    /// Null Osserman base of the partial fibration.
    pub base_null_osserman: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremStatus {
    /// Hypothesis holds and all three verdicts agree.
    Agree,
    /// s = 2 without the hypothesis: the first two verdicts agree.
    AgreeSTwo,
    /// s = 2 without the hypothesis and the first two verdicts differ. Seen
    /// for tensors without the S-manifold identities, e.g. at n = 1 where the
    /// base condition only involves the single plane Im φ.
    DisagreeSTwo,
    /// Hypothesis fails at s ≥ 3: verdicts are reported without a contract.
    HypothesisFalse,
    /// The contract applies and the verdicts disagree.
    Disagree,
    /// The algebraic shift identity failed.
    ShiftIdentityFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSpectra {
    pub phi_null_direct: ConditionReport,
    pub phi_null_quotient: ConditionReport,
    pub base_pi_full: ConditionReport,
    pub base_tau_quotient: ConditionReport,
    pub base_tau_direct: ConditionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualMaxima {
    pub hypothesis: f64,
    pub shift_pi_full: f64,
    pub shift_tau: f64,
    pub leak_pi_full: f64,
    pub leak_tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub seed: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremTolerances {
    pub tol: f64,
    pub grouping_tol: f64,
    pub identity_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub verdicts: Verdicts,
    pub hypothesis_flag: bool,
    pub status: TheoremStatus,
    pub per_sample_spectra: TheoremSpectra,
    pub residual_maxima: ResidualMaxima,
    pub seeds: Seeds,
    pub tolerances: TheoremTolerances,
}

impl TheoremReport {
    /// A contract violation, meaning an engine bug rather than a property of
    /// the input.
    pub fn sentinel(&self) -> bool {
        matches!(self.status, TheoremStatus::Disagree | TheoremStatus::ShiftIdentityFailed)
    }
}

/// Injected faults for exercising the sentinel.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultInjection {
    pub sigma_offset: f64,
}

/// Largest `|R_x φx - λ φx|` over the samples, with `λ` the Rayleigh quotient.
pub fn eigenvector_hypothesis_residual(r: &CurvatureTensor, st: &GffStructure, xs: &[Vector]) -> f64 {
    let g = st.metric();
    xs.iter()
        .map(|x| {
            let phix = st.apply_phi(x);
            let v = g.sharp(&(r.jacobi_form(x) * &phix));
            let lambda = g.form(&v, &phix) / g.norm_sq(&phix);
            (v - &phix * lambda).amax()
        })
        .fold(0.0, f64::max)
}

pub fn theorem_equivalence_report(r: &CurvatureTensor, st: &GffStructure, opts: &CheckOptions) -> Result<TheoremReport> {
    theorem_equivalence_report_with(r, st, opts, FaultInjection::default())
}

#[doc(hidden)]
pub fn theorem_equivalence_report_with(
    r: &CurvatureTensor,
    st: &GffStructure,
    opts: &CheckOptions,
    faults: FaultInjection,
) -> Result<TheoremReport> {
    if st.s() < 2 {
        return Err(GeomError::Precondition(format!("theorem needs s >= 2, got s = {}", st.s())));
    }
    let pi = make_fibration(st, FibrationKind::PiFull)?;
    let tau = make_fibration(st, FibrationKind::Tau)?;
    let (pi, tau) = if faults.sigma_offset != 0.0 {
        let (sp, st_) = (pi.sigma + faults.sigma_offset, tau.sigma + faults.sigma_offset);
        (pi.with_sigma_unchecked(sp), tau.with_sigma_unchecked(st_))
    } else {
        (pi, tau)
    };

    let phi_null = crate::jacobi::is_phi_null_osserman_wrt(r, st, opts)?;
    let base_pi = base_osserman_check(r, &pi, opts)?;
    let base_tau = base_null_osserman_check(r, &tau, opts)?;

    let xs = st.sample_phi_celestial(opts.samples, opts.seed)?.points;
    let hyp = eigenvector_hypothesis_residual(r, st, &xs);
    let hypothesis_flag = hyp < opts.tol * r.max_abs().max(1.0);

    let mut maxima = ResidualMaxima {
        hypothesis: hyp,
        shift_pi_full: 0.0,
        shift_tau: 0.0,
        leak_pi_full: 0.0,
        leak_tau: 0.0,
    };
    for x in &xs {
        let a = shift_residuals_at(r, &pi, x)?;
        let b = shift_residuals_at(r, &tau, x)?;
        maxima.shift_pi_full = maxima.shift_pi_full.max(a.residual);
        maxima.leak_pi_full = maxima.leak_pi_full.max(a.leak);
        maxima.shift_tau = maxima.shift_tau.max(b.residual);
        maxima.leak_tau = maxima.leak_tau.max(b.leak);
    }

    let verdicts = Verdicts {
        phi_null_osserman: phi_null.direct.passed,
        base_osserman: base_pi.passed,
        base_null_osserman: base_tau.passed(),
    };
    let all_agree = verdicts.phi_null_osserman == verdicts.base_osserman
        && verdicts.base_osserman == verdicts.base_null_osserman;
    let status = if maxima.shift_pi_full >= IDENTITY_TOL || maxima.shift_tau >= IDENTITY_TOL {
        TheoremStatus::ShiftIdentityFailed
    } else if hypothesis_flag {
        if all_agree {
            TheoremStatus::Agree
        } else {
            TheoremStatus::Disagree
        }
    } else if st.s() == 2 {
        if verdicts.phi_null_osserman == verdicts.base_osserman {
            TheoremStatus::AgreeSTwo
        } else {
            TheoremStatus::DisagreeSTwo
        }
    } else {
        TheoremStatus::HypothesisFalse
    };

    Ok(TheoremReport {
        verdicts,
        hypothesis_flag,
        status,
        per_sample_spectra: TheoremSpectra {
            phi_null_direct: phi_null.direct,
            phi_null_quotient: phi_null.quotient,
            base_pi_full: base_pi,
            base_tau_quotient: base_tau.quotient,
            base_tau_direct: base_tau.direct,
        },
        residual_maxima: maxima,
        seeds: Seeds {
            seed: opts.seed,
            samples: opts.samples,
        },
        tolerances: TheoremTolerances {
            tol: opts.tol,
            grouping_tol: opts.grouping_tol,
            identity_tol: IDENTITY_TOL,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemarkKind {
    /// Riemannian Sasaki-type base of the `remark_sasaki` fibration.
    SasakiBase,
    /// Lorentzian Sasaki-type base of `tau`.
    LorentzSasakiBase,
}

impl RemarkKind {
    pub fn fibration(self) -> FibrationKind {
        match self {
            RemarkKind::SasakiBase => FibrationKind::RemarkSasaki,
            RemarkKind::LorentzSasakiBase => FibrationKind::Tau,
        }
    }

    /// Value forced on `k(x, φx)` when the base has constant φ-sectional
    /// curvature `+1` (Sasaki) or `-1` (Lorentz–Sasaki).
    pub fn target(self, s: usize) -> f64 {
        let s = s as f64;
        match self {
            RemarkKind::SasakiBase => 1.0 - 3.0 * (s - 3.0),
            RemarkKind::LorentzSasakiBase => -1.0 - 3.0 * (s - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkSample {
    pub index: usize,
    pub vector: Vec<f64>,
    pub k: f64,
    pub k_star: f64,
    /// `g(A_x φx, A_x φx)`.
    pub a_norm: f64,
    pub identity_residual: f64,
    pub condition_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkReport {
    pub kind: RemarkKind,
    pub fibration: FibrationKind,
    pub vertical_sign_sum: f64,
    pub target: f64,
    pub identity_tol: f64,
    pub condition_tol: f64,
    pub identity_passed: bool,
    pub max_identity_residual: f64,
    /// Largest `|g(A_x φx, A_x φx) - σ|`.
    pub max_a_norm_residual: f64,
    pub condition_met_all: bool,
    pub samples: usize,
    pub seed: u64,
    pub per_sample: Vec<RemarkSample>,
}

pub fn remark_sectional_conditions(
    r: &CurvatureTensor,
    st: &GffStructure,
    kind: RemarkKind,
    opts: &CheckOptions,
) -> Result<RemarkReport> {
    let f = make_fibration(st, kind.fibration())?;
    let g = st.metric();
    let target = kind.target(st.s());
    let xs = st.sample_phi_celestial(opts.samples, opts.seed)?.points;
    let mut per_sample = Vec::with_capacity(xs.len());
    let mut max_identity_residual = 0.0_f64;
    let mut max_a_norm_residual = 0.0_f64;
    for (index, x) in xs.iter().enumerate() {
        let phix = st.apply_phi(x);
        let k = sectional_curvature(r, g, x, &phix)?;
        let plane = SubspaceBasis::from_columns(g, DMatrix::from_columns(&[phix.clone()]))?;
        let delta = g.norm_sq(x) * g.norm_sq(&phix) - g.form(x, &phix).powi(2);
        let k_star = base_form(r, &f, x, &plane)?[(0, 0)] / delta;
        let a = f.a_unchecked(x, &phix)?;
        let a_norm = g.norm_sq(&a);
        let identity_residual = (k - (k_star - 3.0 * a_norm)).abs();
        max_identity_residual = max_identity_residual.max(identity_residual);
        max_a_norm_residual = max_a_norm_residual.max((a_norm - f.sigma).abs());
        per_sample.push(RemarkSample {
            index,
            vector: x.iter().cloned().collect(),
            k,
            k_star,
            a_norm,
            identity_residual,
            condition_met: (k - target).abs() < opts.tol,
        });
    }
    Ok(RemarkReport {
        kind,
        fibration: f.kind,
        vertical_sign_sum: f.sigma,
        target,
        identity_tol: IDENTITY_TOL,
        condition_tol: opts.tol,
        identity_passed: max_identity_residual < IDENTITY_TOL && max_a_norm_residual < IDENTITY_TOL,
        max_identity_residual,
        max_a_norm_residual,
        condition_met_all: per_sample.iter().all(|s| s.condition_met),
        samples: opts.samples,
        seed: opts.seed,
        per_sample,
    })
}

/// The horizontal space as a model of the base tangent space, with the
/// induced complex (pi kinds) or framed structure (tau, remark_sasaki).
#[derive(Debug, Clone, PartialEq)]
pub struct BaseStructure {
    pub kind: FibrationKind,
    pub carrier: SubspaceBasis,
    pub metric: DMatrix<f64>,
    /// `φ` restricted to the carrier, in carrier coordinates.
    pub endomorphism: DMatrix<f64>,
    /// The induced `s = 1` structure on the carrier.
    pub framed: Option<GffStructure>,
    pub residual: f64,
}

pub fn base_structure(f: &FibrationModel) -> Result<BaseStructure> {
    let st = &f.structure;
    let g = st.metric();
    let image = orthonormal_frame(g, &st.image_basis()?)?;
    let extra = match f.kind {
        FibrationKind::Tau => Some(0),
        FibrationKind::RemarkSasaki => Some(st.s() - 1),
        _ => None,
    };
    let mut cols = image.vectors();
    if let Some(a) = extra {
        cols.push(st.xi()[a].clone());
    }
    let carrier = SubspaceBasis::from_columns(g, DMatrix::from_columns(&cols))?;
    let k = carrier.dim();
    let mut endo = DMatrix::zeros(k, k);
    let mut leak = 0.0_f64;
    for (j, c) in cols.iter().enumerate() {
        let image_vec = st.apply_phi(c);
        let coords = carrier.coordinates(g, &image_vec)?;
        leak = leak.max((carrier.matrix() * &coords - &image_vec).amax());
        endo.set_column(j, &coords);
    }
    if leak >= STRUCTURE_TOL {
        return Err(GeomError::Structure(format!("phi does not preserve the horizontal space (leak {leak:e})")));
    }
    let metric = carrier.gram().clone();
    match extra {
        None => {
            let residual = (&endo * &endo + DMatrix::identity(k, k)).amax();
            if residual >= STRUCTURE_TOL {
                return Err(GeomError::Structure(format!("J^2 = -I fails on the base (residual {residual:e})")));
            }
            Ok(BaseStructure {
                kind: f.kind,
                carrier,
                metric,
                endomorphism: endo,
                framed: None,
                residual,
            })
        }
        Some(a) => {
            let mut xi = Vector::zeros(k);
            xi[k - 1] = 1.0;
            let eta = Vector::from_iterator(k, cols.iter().map(|c| st.eta_of(a, c)));
            let framed = GffStructure::from_parts(
                st.n(),
                1,
                ScalarProduct::new(metric.clone())?,
                endo.clone(),
                vec![xi],
                vec![eta],
                vec![st.epsilon()[a]],
            )?;
            let report = framed.validate();
            let failing: Vec<String> = report
                .failing()
                .filter(|c| !(f.kind == FibrationKind::RemarkSasaki && c.name == checks::LORENTZIAN))
                .map(|c| format!("{} ({:e})", c.name, c.residual))
                .collect();
            if !failing.is_empty() {
                return Err(GeomError::Structure(format!("induced base structure fails: {}", failing.join(", "))));
            }
            let residual = report
                .checks
                .iter()
                .filter(|c| c.name != checks::LORENTZIAN)
                .map(|c| c.residual)
                .fold(0.0, f64::max);
            Ok(BaseStructure {
                kind: f.kind,
                carrier,
                metric,
                endomorphism: endo,
                framed: Some(framed),
                residual,
            })
        }
    }
}
