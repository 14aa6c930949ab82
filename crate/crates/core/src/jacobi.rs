//! Jacobi operators (classical, null-quotient, φ-null) and the sampled
//! spectral deciders for the Osserman-type conditions.
//!
//! The classical operator is `R_z(y) = R(y, z) z` on `z^⊥`; the argument
//! ordering is pinned by the space-form anchor: for constant curvature `c`
//! and unit spacelike `z` every eigenvalue equals `c`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureTensor;
use crate::error::{GeomError, Result};
use crate::linalg::{
    causal_character, general_eigenvalues, max_abs, orthogonal_complement, orthonormal_frame, CausalCharacter, ScalarProduct,
    SubspaceBasis, Vector,
};
use crate::structure::{sample_null_congruence, GffStructure};

pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_GROUPING_TOL: f64 = 1e-6;
pub const DEFAULT_CONSTANCY_TOL: f64 = 1e-8;
/// Relative size of imaginary parts tolerated in the general-eigenvalue fallback.
pub const REALNESS_TOL: f64 = 1e-6;

/// A self-adjoint endomorphism of a subspace, stored in a basis of it.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiOperator {
    pub base: Vector,
    pub domain: SubspaceBasis,
    /// Matrix of the operator in the domain basis: `gram^{-1} * form`.
    pub matrix: DMatrix<f64>,
    pub metric_on_domain: DMatrix<f64>,
    /// Bilinear form `(y, w) -> g(op(y), w)` in the domain basis.
    pub form: DMatrix<f64>,
}

impl JacobiOperator {
    /// Builds the operator from its symmetric bilinear form on `domain`.
    pub fn from_form(base: Vector, domain: SubspaceBasis, gram: DMatrix<f64>, form: DMatrix<f64>) -> Result<Self> {
        let form = (&form + form.transpose()) * 0.5;
        let matrix = gram
            .clone()
            .lu()
            .solve(&form)
            .ok_or_else(|| GeomError::Precondition("degenerate domain gram".into()))?;
        Ok(Self {
            base,
            domain,
            matrix,
            metric_on_domain: gram,
            form,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `|G M - M^T G|` in max-norm.
    pub fn self_adjointness_residual(&self) -> f64 {
        let g = &self.metric_on_domain;
        (g * &self.matrix - self.matrix.transpose() * g).amax()
    }

    /// Eigenpairs `(Λ, Q)` with `M Q = Q Λ`, available when the domain gram is
    /// positive definite.
    pub fn eigen_decomposition(&self) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let chol = Cholesky::new(self.metric_on_domain.clone())?;
        let l = chol.l();
        let l_inv = l.clone().try_inverse()?;
        let sym = &l_inv * &self.form * l_inv.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let q = l_inv.transpose() * eig.eigenvectors;
        Some((eig.eigenvalues.iter().cloned().collect(), q))
    }
}

/// One eigenvalue cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGroup {
    pub value: f64,
    pub multiplicity: usize,
    pub min: f64,
    pub max: f64,
}

/// Sorted eigenvalues grouped into multiplicities under `grouping_tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub groups: Vec<SpectralGroup>,
    pub grouping_tol: f64,
}

impl SpectralData {
    /// Consecutive sorted eigenvalues within `grouping_tol` share a group.
    pub fn from_eigenvalues(mut values: Vec<f64>, grouping_tol: f64) -> Self {
        values.sort_by(f64::total_cmp);
        let mut groups: Vec<SpectralGroup> = Vec::new();
        let mut members: Vec<f64> = Vec::new();
        let flush = |members: &mut Vec<f64>, groups: &mut Vec<SpectralGroup>| {
            if members.is_empty() {
                return;
            }
            let value = members.iter().sum::<f64>() / members.len() as f64;
            groups.push(SpectralGroup {
                value,
                multiplicity: members.len(),
                min: members[0],
                max: *members.last().unwrap(),
            });
            members.clear();
        };
        for &v in &values {
            if let Some(&last) = members.last() {
                if v - last > grouping_tol {
                    flush(&mut members, &mut groups);
                }
            }
            members.push(v);
        }
        flush(&mut members, &mut groups);
        Self {
            eigenvalues: values,
            groups,
            grouping_tol,
        }
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.multiplicity).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.value).collect()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `(value, multiplicity)` pairs.
    pub fn pairs(&self) -> Vec<(f64, usize)> {
        self.groups.iter().map(|g| (g.value, g.multiplicity)).collect()
    }

    /// Same multiplicity pattern and every group value within `tol`.
    pub fn agrees_with(&self, other: &SpectralData, tol: f64) -> bool {
        self.multiplicities() == other.multiplicities()
            && self
                .groups
                .iter()
                .zip(&other.groups)
                .all(|(a, b)| (a.value - b.value).abs() < tol)
    }

    /// Whether the spectrum matches `expected` `(value, multiplicity)` pairs to `tol`.
    pub fn matches(&self, expected: &[(f64, usize)], tol: f64) -> bool {
        self.groups.len() == expected.len()
            && self
                .groups
                .iter()
                .zip(expected)
                .all(|(g, &(v, k))| g.multiplicity == k && (g.value - v).abs() < tol)
    }
}

/// Eigenvalues of a Jacobi operator. Positive-definite domains use a
/// Cholesky-reduced symmetric eigensolver; otherwise the general eigenvalue
/// routine is used and non-real eigenvalues are reported as an error.
pub fn spectrum(op: &JacobiOperator, grouping_tol: f64) -> Result<SpectralData> {
    if op.dim() == 0 {
        return Ok(SpectralData::from_eigenvalues(Vec::new(), grouping_tol));
    }
    if let Some((values, _)) = op.eigen_decomposition() {
        return Ok(SpectralData::from_eigenvalues(values, grouping_tol));
    }
    let complex = general_eigenvalues(&op.matrix)?;
    let scale = max_abs(&op.matrix).max(1.0);
    let max_imag = complex.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    if max_imag > REALNESS_TOL * scale {
        let mut eigenvalues: Vec<(f64, f64)> = complex.iter().map(|c| (c.re, c.im)).collect();
        eigenvalues.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        return Err(GeomError::NonRealSpectrum { max_imag, eigenvalues });
    }
    Ok(SpectralData::from_eigenvalues(
        complex.iter().map(|c| c.re).collect(),
        grouping_tol,
    ))
}

/// Classical Jacobi operator `y -> R(y, z) z` on `z^⊥`.
pub fn jacobi(r: &CurvatureTensor, g: &ScalarProduct, z: &Vector) -> Result<JacobiOperator> {
    g.check_dim(z)?;
    match causal_character(g, z) {
        CausalCharacter::Null | CausalCharacter::Zero => return Err(GeomError::NullBase),
        _ => {}
    }
    let domain = orthogonal_complement(g, &[z.clone()])?;
    jacobi_on(r, g, z, &domain)
}

/// Jacobi operator of `z` expressed on an explicitly supplied domain basis.
pub fn jacobi_on(r: &CurvatureTensor, g: &ScalarProduct, z: &Vector, domain: &SubspaceBasis) -> Result<JacobiOperator> {
    if r.dim() != g.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: g.dim(),
            found: r.dim(),
        });
    }
    let k = r.jacobi_form(z);
    let e = domain.matrix();
    let form = e.transpose() * k * e;
    JacobiOperator::from_form(z.clone(), domain.clone(), domain.gram().clone(), form)
}

/// The Euclidean space `u^⊥ / span(u)` for a null `u`, represented by a
/// basis of representatives completing `u` to a basis of `u^⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullQuotient {
    pub u: Vector,
    pub rep_basis: SubspaceBasis,
    pub gbar: DMatrix<f64>,
}

impl NullQuotient {
    pub fn dim(&self) -> usize {
        self.rep_basis.dim()
    }

    /// Representatives `r_i + t_i u`. The quotient is unchanged.
    pub fn with_shifted_representatives(&self, g: &ScalarProduct, shifts: &[f64]) -> Result<Self> {
        if shifts.len() != self.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim(),
                found: shifts.len(),
            });
        }
        let mut cols = self.rep_basis.matrix().clone();
        for (i, &t) in shifts.iter().enumerate() {
            let shifted = cols.column(i) + &self.u * t;
            cols.set_column(i, &shifted);
        }
        let rep_basis = SubspaceBasis::from_columns(g, cols)?;
        let gbar = rep_basis.gram().clone();
        Ok(Self {
            u: self.u.clone(),
            rep_basis,
            gbar,
        })
    }
}

fn require_null(g: &ScalarProduct, u: &Vector) -> Result<()> {
    g.check_dim(u)?;
    match causal_character(g, u) {
        CausalCharacter::Null => Ok(()),
        CausalCharacter::Zero => Err(GeomError::NotNull { norm: 0.0 }),
        _ => Err(GeomError::NotNull { norm: g.norm_sq(u) }),
    }
}

pub fn null_quotient(g: &ScalarProduct, u: &Vector) -> Result<NullQuotient> {
    require_null(g, u)?;
    // any w with g(u, w) != 0 makes span(u, w) a nondegenerate plane whose
    // complement sits inside u^⊥ and misses u
    let gu = g.components() * u;
    let k = gu.iamax();
    let mut w = Vector::zeros(g.dim());
    w[k] = 1.0;
    let rep_basis = orthogonal_complement(g, &[u.clone(), w])?;
    let gbar = rep_basis.gram().clone();
    if gbar.nrows() > 0 {
        let eig = SymmetricEigen::new(gbar.clone());
        let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_eigenvalue > g.tolerances().rank_rel * max_abs(&gbar)) {
            return Err(GeomError::QuotientNotDefinite { min_eigenvalue });
        }
    }
    Ok(NullQuotient {
        u: u.clone(),
        rep_basis,
        gbar,
    })
}

/// `x̄ -> π(R(x, u) u)` on `ū^⊥`.
pub fn null_jacobi(r: &CurvatureTensor, g: &ScalarProduct, u: &Vector) -> Result<JacobiOperator> {
    let q = null_quotient(g, u)?;
    null_jacobi_on(r, &q)
}

pub fn null_jacobi_on(r: &CurvatureTensor, q: &NullQuotient) -> Result<JacobiOperator> {
    let k = r.jacobi_form(&q.u);
    let e = q.rep_basis.matrix();
    let form = e.transpose() * k * e;
    JacobiOperator::from_form(q.u.clone(), q.rep_basis.clone(), q.gbar.clone(), form)
}

/// Sampling and tolerance knobs shared by every decider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub grouping_tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            tol: DEFAULT_CONSTANCY_TOL,
            grouping_tol: DEFAULT_GROUPING_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Spacelike,
    Timelike,
}

/// Spectrum (or the non-real eigenvalues) observed at one sampled direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpectrum {
    pub index: usize,
    pub vector: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectralData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub non_real: Option<Vec<(f64, f64)>>,
}

/// Observed range of one eigenvalue group across all samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRange {
    pub multiplicity: usize,
    pub min: f64,
    pub max: f64,
}

/// Outcome of a sampled constancy test, with every per-sample spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub passed: bool,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub grouping_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<SpectralData>,
    pub group_ranges: Vec<GroupRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub per_sample: Vec<SampleSpectrum>,
}

impl ConditionReport {
    /// Decides constancy of the sampled spectra. Non-real samples fail.
    pub fn decide(condition: &str, opts: &CheckOptions, per_sample: Vec<SampleSpectrum>) -> Self {
        let mut report = Self {
            condition: condition.to_string(),
            passed: false,
            samples: opts.samples,
            seed: opts.seed,
            tol: opts.tol,
            grouping_tol: opts.grouping_tol,
            reference: None,
            group_ranges: Vec::new(),
            counterexample: None,
            failure: None,
            per_sample,
        };
        if let Some(bad) = report.per_sample.iter().find(|s| s.spectrum.is_none()) {
            report.failure = Some(format!("non-real spectrum at sample {}", bad.index));
            return report;
        }
        let spectra: Vec<&SpectralData> = report.per_sample.iter().filter_map(|s| s.spectrum.as_ref()).collect();
        let Some(first) = spectra.first() else {
            report.failure = Some("no samples".into());
            return report;
        };
        report.reference = Some((*first).clone());
        let pattern = first.multiplicities();
        if let Some(pos) = spectra.iter().position(|s| s.multiplicities() != pattern) {
            report.counterexample = Some([0, report.per_sample[pos].index]);
            report.failure = Some(format!(
                "multiplicity pattern {:?} at sample 0 differs from {:?} at sample {}",
                pattern,
                spectra[pos].multiplicities(),
                report.per_sample[pos].index
            ));
            return report;
        }
        let mut ranges: Vec<GroupRange> = first
            .groups
            .iter()
            .map(|g| GroupRange {
                multiplicity: g.multiplicity,
                min: g.value,
                max: g.value,
            })
            .collect();
        for s in &spectra {
            for (r, g) in ranges.iter_mut().zip(&s.groups) {
                r.min = r.min.min(g.value);
                r.max = r.max.max(g.value);
            }
        }
        let spread = ranges.iter().map(|r| r.max - r.min).fold(0.0, f64::max);
        report.group_ranges = ranges;
        if spread < opts.tol {
            report.passed = true;
        } else {
            let worst = spectra
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    let da = dev(first, a);
                    let db = dev(first, b);
                    da.total_cmp(&db)
                })
                .map(|(i, _)| i)
                .unwrap_or(0);
            report.counterexample = Some([0, report.per_sample[worst].index]);
            report.failure = Some(format!("eigenvalue spread {spread:e} exceeds tol {:e}", opts.tol));
        }
        report
    }
}

fn dev(a: &SpectralData, b: &SpectralData) -> f64 {
    a.groups
        .iter()
        .zip(&b.groups)
        .map(|(x, y)| (x.value - y.value).abs())
        .fold(0.0, f64::max)
}

/// Evaluates `spectrum(op(point))` for every point (possibly concurrently),
/// keeping sample order.
pub(crate) fn sampled_spectra<F>(points: &[Vector], grouping_tol: f64, build: F) -> Result<Vec<SampleSpectrum>>
where
    F: Fn(&Vector) -> Result<JacobiOperator> + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let op = build(p)?;
            let vector = p.iter().cloned().collect();
            match spectrum(&op, grouping_tol) {
                Ok(s) => Ok(SampleSpectrum {
                    index,
                    vector,
                    spectrum: Some(s),
                    non_real: None,
                }),
                Err(GeomError::NonRealSpectrum { eigenvalues, .. }) => Ok(SampleSpectrum {
                    index,
                    vector,
                    spectrum: None,
                    non_real: Some(eigenvalues),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Unit vectors of the requested causal kind, drawn through an orthonormal
/// frame of `g`: the complementary block is Gaussian and the block of the
/// requested kind is a uniform direction rescaled to reach norm `±1`.
pub fn sample_unit_vectors(g: &ScalarProduct, kind: UnitKind, count: usize, seed: u64) -> Result<Vec<Vector>> {
    let m = g.dim();
    let full = SubspaceBasis::from_columns(g, DMatrix::identity(m, m))?;
    let frame = orthonormal_frame(g, &full)?;
    let minus = g.signature().minus;
    let (own, other): (Vec<usize>, Vec<usize>) = match kind {
        UnitKind::Spacelike => ((minus..m).collect(), (0..minus).collect()),
        UnitKind::Timelike => ((0..minus).collect(), (minus..m).collect()),
    };
    if own.is_empty() {
        return Err(GeomError::Sampler(format!("no {kind:?} directions in signature {:?}", g.signature())));
    }
    let target = match kind {
        UnitKind::Spacelike => 1.0,
        UnitKind::Timelike => -1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Vector::from_fn(own.len(), |_, _| StandardNormal.sample(&mut rng));
        let t = Vector::from_fn(other.len(), |_, _| StandardNormal.sample(&mut rng));
        if p.norm() < 1e-8 {
            continue;
        }
        let stretch = (1.0 + t.norm_squared()).sqrt() / p.norm();
        let mut coords = Vector::zeros(m);
        for (k, &i) in own.iter().enumerate() {
            coords[i] = p[k] * stretch;
        }
        for (k, &i) in other.iter().enumerate() {
            coords[i] = t[k];
        }
        let z = frame.matrix() * coords;
        let q = g.norm_sq(&z);
        out.push(z / (q * target).sqrt());
    }
    Ok(out)
}

/// Sampled pointwise (spacelike or timelike) Osserman test.
pub fn is_osserman_at(r: &CurvatureTensor, g: &ScalarProduct, kind: UnitKind, opts: &CheckOptions) -> Result<ConditionReport> {
    let points = sample_unit_vectors(g, kind, opts.samples, opts.seed)?;
    let per_sample = sampled_spectra(&points, opts.grouping_tol, |z| jacobi(r, g, z))?;
    let name = match kind {
        UnitKind::Spacelike => "osserman (spacelike)",
        UnitKind::Timelike => "osserman (timelike)",
    };
    Ok(ConditionReport::decide(name, opts, per_sample))
}

/// Sampled null Osserman test with respect to a unit timelike `z`, over the
/// full null congruence `N(z)`.
pub fn is_null_osserman_wrt(r: &CurvatureTensor, g: &ScalarProduct, z: &Vector, opts: &CheckOptions) -> Result<ConditionReport> {
    let sample = sample_null_congruence(g, z, opts.samples, opts.seed)?;
    let per_sample = sampled_spectra(&sample.points, opts.grouping_tol, |u| null_jacobi(r, g, u))?;
    Ok(ConditionReport::decide("null osserman", opts, per_sample))
}

/// Both evaluation paths of the φ-null Osserman condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiNullReport {
    /// Spectra of the null Jacobi operators at `u = xi_1 + x`.
    pub quotient: ConditionReport,
    /// Spectra of `R_x` on `x^⊥` for `x` in the φ-celestial sphere.
    pub direct: ConditionReport,
}

impl PhiNullReport {
    pub fn paths_agree(&self) -> bool {
        self.quotient.passed == self.direct.passed
    }
}

pub fn is_phi_null_osserman_wrt(r: &CurvatureTensor, st: &GffStructure, opts: &CheckOptions) -> Result<PhiNullReport> {
    let g = st.metric();
    let xs = st.sample_phi_celestial(opts.samples, opts.seed)?.points;
    let us: Vec<Vector> = xs.iter().map(|x| &st.xi()[0] + x).collect();
    let quotient = sampled_spectra(&us, opts.grouping_tol, |u| null_jacobi(r, g, u))?;
    let direct = sampled_spectra(&xs, opts.grouping_tol, |x| jacobi(r, g, x))?;
    Ok(PhiNullReport {
        quotient: ConditionReport::decide("phi-null osserman (quotient)", opts, quotient),
        direct: ConditionReport::decide("phi-null osserman (direct)", opts, direct),
    })
}
