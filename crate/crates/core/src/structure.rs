//! Metric globally framed f-structures at a single point.
//!
//! A structure is the tuple `(phi, xi_1..xi_s, eta^1..eta^s, g)` on
//! `R^{2n+s}`. The one-forms `eta` are stored explicitly and cross-checked
//! against `g` and `xi` by [`GffStructure::validate`].

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::{
    max_abs, orthogonal_complement, orthonormal_frame, singular_values, svd, ScalarProduct, SubspaceBasis, Vector,
};
use crate::report::ValidationReport;

/// Residual threshold for every structure axiom.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Tolerance on the defining constraints of `N(z)` when checking inputs to `psi`.
pub const CONGRUENCE_TOL: f64 = 1e-10;

pub mod checks {
    pub const PHI_CUBED: &str = "phi^3+phi=0";
    pub const PHI_SQUARED: &str = "phi^2=-I+eta(x)xi";
    pub const ETA_XI: &str = "eta(xi)=delta";
    pub const COMPATIBLE: &str = "g(phiX,phiY)=g(X,Y)-sum eps eta(X)eta(Y)";
    pub const PHI_XI: &str = "phi xi=0";
    pub const ETA_PHI: &str = "eta o phi=0";
    pub const G_XI: &str = "g(X,xi)=eps eta(X)";
    pub const SKEW: &str = "g(X,phiY)=-g(phiX,Y)";
    pub const XI_GRAM: &str = "g(xi_a,xi_b)=eps_a delta";
    pub const RANK: &str = "rank(phi)=2n";
    pub const SPLITTING: &str = "Im(phi) orthogonal to ker(phi)";
    pub const TRACE: &str = "trace(phi)=0";
    pub const LORENTZIAN: &str = "lorentzian: only eps_1=-1";
}

#[derive(Debug, Clone, PartialEq)]
pub struct GffStructure {
    n: usize,
    s: usize,
    metric: ScalarProduct,
    phi: DMatrix<f64>,
    xi: Vec<Vector>,
    eta: Vec<Vector>,
    epsilon: Vec<f64>,
}

impl GffStructure {
    /// Assembles a structure after shape checks only; call [`Self::validate`]
    /// for the axioms.
    pub fn from_parts(
        n: usize,
        s: usize,
        metric: ScalarProduct,
        phi: DMatrix<f64>,
        xi: Vec<Vector>,
        eta: Vec<Vector>,
        epsilon: Vec<f64>,
    ) -> Result<Self> {
        if s == 0 {
            return Err(GeomError::Structure(
                "s = 0 (almost complex case) is not supported; at least one characteristic vector is required".into(),
            ));
        }
        let m = 2 * n + s;
        let shape = |what: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(GeomError::Structure(format!("{what}: expected {expected}, found {found}")))
            }
        };
        shape("metric dimension", m, metric.dim())?;
        shape("phi rows", m, phi.nrows())?;
        shape("phi columns", m, phi.ncols())?;
        shape("number of xi", s, xi.len())?;
        shape("number of eta", s, eta.len())?;
        shape("number of epsilon", s, epsilon.len())?;
        for v in xi.iter().chain(eta.iter()) {
            shape("xi/eta length", m, v.len())?;
        }
        if let Some(e) = epsilon.iter().find(|e| e.abs() != 1.0) {
            return Err(GeomError::Structure(format!("epsilon entries must be +-1, found {e}")));
        }
        Ok(Self {
            n,
            s,
            metric,
            phi,
            xi,
            eta,
            epsilon,
        })
    }

    /// Block model on `R^{2n+s}`: `g = I_2n + diag(-1,1,..,1)`,
    /// `phi = [[0,-I],[I,0]] + 0_s`, `xi_a = e_{2n+a}`, `eta^a = eps_a g(., xi_a)`.
    pub fn canonical(n: usize, s: usize) -> Result<Self> {
        if n == 0 || s == 0 {
            return Err(GeomError::Precondition("canonical structure needs n >= 1 and s >= 1".into()));
        }
        let m = 2 * n + s;
        let mut diag = vec![1.0; m];
        diag[2 * n] = -1.0;
        let metric = ScalarProduct::diagonal(&diag)?;
        let mut phi = DMatrix::zeros(m, m);
        for j in 0..n {
            phi[(n + j, j)] = 1.0;
            phi[(j, n + j)] = -1.0;
        }
        let epsilon: Vec<f64> = (0..s).map(|a| if a == 0 { -1.0 } else { 1.0 }).collect();
        let xi: Vec<Vector> = (0..s)
            .map(|a| {
                let mut e = Vector::zeros(m);
                e[2 * n + a] = 1.0;
                e
            })
            .collect();
        let eta: Vec<Vector> = xi
            .iter()
            .zip(&epsilon)
            .map(|(x, &eps)| metric.components() * x * eps)
            .collect();
        Self::from_parts(n, s, metric, phi, xi, eta, epsilon)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        2 * self.n + self.s
    }

    pub fn metric(&self) -> &ScalarProduct {
        &self.metric
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn xi(&self) -> &[Vector] {
        &self.xi
    }

    pub fn eta(&self) -> &[Vector] {
        &self.eta
    }

    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    pub fn apply_phi(&self, x: &Vector) -> Vector {
        &self.phi * x
    }

    /// `eta^a(x)`.
    pub fn eta_of(&self, alpha: usize, x: &Vector) -> f64 {
        self.eta[alpha].dot(x)
    }

    /// Replaces `phi` without re-checking anything. Used to build corrupted
    /// inputs for validator tests.
    pub fn with_phi_unchecked(mut self, phi: DMatrix<f64>) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_eta_unchecked(mut self, eta: Vec<Vector>) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_metric_unchecked(mut self, metric: ScalarProduct) -> Self {
        self.metric = metric;
        self
    }

    /// Moves the (first) timelike characteristic vector to position 1, keeping
    /// the relative order of the others.
    pub fn normalize_timelike_first(&mut self) {
        if let Some(pos) = self.epsilon.iter().position(|&e| e < 0.0) {
            if pos != 0 {
                let x = self.xi.remove(pos);
                self.xi.insert(0, x);
                let e = self.eta.remove(pos);
                self.eta.insert(0, e);
                let eps = self.epsilon.remove(pos);
                self.epsilon.insert(0, eps);
            }
        }
    }

    /// Exactly one negative epsilon, it is `eps_1`, and `g` is Lorentzian.
    pub fn is_lorentzian(&self) -> bool {
        self.metric.is_lorentzian()
            && self.epsilon.first() == Some(&-1.0)
            && self.epsilon.iter().skip(1).all(|&e| e == 1.0)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_gff(self)
    }

    /// `Phi(X, Y) = g(X, phi Y)`.
    pub fn fundamental_two_form(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.metric.check_dim(x)?;
        self.metric.check_dim(y)?;
        Ok(self.metric.form(x, &self.apply_phi(y)))
    }

    /// Basis of `Im(phi)` from the column space of `phi`.
    pub fn image_basis(&self) -> Result<SubspaceBasis> {
        let d = svd(&self.phi);
        let u = d.u;
        let threshold = self.metric.tolerances().rank_rel * max_abs(&self.phi).max(f64::MIN_POSITIVE);
        let cols: Vec<Vector> = d
            .s
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > threshold)
            .map(|(i, _)| u.column(i).into_owned())
            .collect();
        SubspaceBasis::new(&self.metric, &cols)
    }

    /// Orthonormal frame of `Im(phi) ∩ xi_1^perp`, the carrier of `S_phi(xi_1)`.
    pub fn phi_celestial_frame(&self) -> Result<SubspaceBasis> {
        let image = self.image_basis()?;
        // coefficients c with g(xi_1, B c) = 0
        let gx = image.matrix().tr_mul(&(self.metric.components() * &self.xi[0]));
        let row = DMatrix::from_row_slice(1, image.dim(), gx.as_slice());
        let coeff = crate::linalg::nullspace(&row, self.metric.tolerances().rank_rel);
        let carrier = SubspaceBasis::from_columns(&self.metric, image.matrix() * coeff)?;
        let frame = orthonormal_frame(&self.metric, &carrier)?;
        if frame.gram().diagonal().iter().any(|&e| e < 0.0) {
            return Err(GeomError::Sampler("Im(phi) ∩ xi_1^perp is not spacelike".into()));
        }
        Ok(frame)
    }

    /// Whether `x` lies on `S_phi(xi_1)` up to `tol`.
    pub fn in_phi_celestial(&self, x: &Vector, tol: f64) -> bool {
        let g = &self.metric;
        let image_defect = (&self.phi * (&self.phi * x) + x).amax();
        (g.norm_sq(x) - 1.0).abs() <= tol && g.form(x, &self.xi[0]).abs() <= tol && image_defect <= tol
    }

    fn require_lorentzian(&self) -> Result<()> {
        if self.is_lorentzian() {
            Ok(())
        } else {
            Err(GeomError::Precondition(
                "structure is not Lorentzian with xi_1 the timelike characteristic vector".into(),
            ))
        }
    }

    pub fn sample_phi_celestial(&self, count: usize, seed: u64) -> Result<CelestialSample> {
        if count < 1 {
            return Err(GeomError::Precondition("sample count must be at least 1".into()));
        }
        self.require_lorentzian()?;
        let frame = self.phi_celestial_frame()?;
        let points = sphere_points(&self.metric, &frame, count, seed);
        Ok(CelestialSample {
            points,
            kind: CelestialKind::SPhi,
            seed,
            count,
        })
    }

    pub fn sample_phi_null_congruence(&self, count: usize, seed: u64) -> Result<CelestialSample> {
        let mut sample = self.sample_phi_celestial(count, seed)?;
        for p in sample.points.iter_mut() {
            *p = &self.xi[0] + &*p;
        }
        sample.kind = CelestialKind::NPhi;
        Ok(sample)
    }

    /// `psi(u) = u - xi_1`, defined on `N(xi_1)`.
    pub fn psi(&self, u: &Vector) -> Result<Vector> {
        psi(&self.metric, &self.xi[0], u)
    }

    /// `psi^{-1}(x) = xi_1 + x`, defined on `S(xi_1)`.
    pub fn psi_inverse(&self, x: &Vector) -> Result<Vector> {
        psi_inverse(&self.metric, &self.xi[0], x)
    }

    /// The same structure written in the basis given by the columns of `p`:
    /// `g' = p^T g p`, `phi' = p^{-1} phi p`, `xi' = p^{-1} xi`, `eta' = p^T eta`.
    pub fn transformed(&self, p: &DMatrix<f64>) -> Result<Self> {
        let m = self.dim();
        if p.nrows() != m || p.ncols() != m {
            return Err(GeomError::DimensionMismatch {
                expected: m,
                found: p.nrows(),
            });
        }
        let lu = p.clone().lu();
        let p_inv = lu
            .try_inverse()
            .ok_or_else(|| GeomError::Precondition("change of basis is singular".into()))?;
        let g = p.transpose() * self.metric.components() * p;
        let metric = ScalarProduct::new((&g + g.transpose()) * 0.5)?;
        let phi = &p_inv * &self.phi * p;
        let xi = self.xi.iter().map(|x| &p_inv * x).collect();
        let eta = self.eta.iter().map(|e| p.transpose() * e).collect();
        Self::from_parts(self.n, self.s, metric, phi, xi, eta, self.epsilon.clone())
    }
}

pub fn canonical_structure(n: usize, s: usize) -> Result<GffStructure> {
    GffStructure::canonical(n, s)
}

/// The canonical structure seen through a random, well-conditioned change
/// of basis `I + 0.4 N` with Gaussian `N`. Deterministic per seed.
pub fn random_structure(n: usize, s: usize, seed: u64) -> Result<GffStructure> {
    let base = GffStructure::canonical(n, s)?;
    let m = base.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let noise = DMatrix::from_fn(m, m, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.4 * z
        });
        let p = DMatrix::identity(m, m) + noise;
        let sv = singular_values(&p);
        let (hi, lo) = (sv[0], sv[m - 1]);
        if lo > 0.0 && hi / lo < 20.0 {
            return base.transformed(&p);
        }
    }
}

pub fn validate_gff(st: &GffStructure) -> ValidationReport {
    use checks::*;
    let mut report = ValidationReport::new(STRUCTURE_TOL);
    let m = st.dim();
    let g = st.metric.components();
    let phi = &st.phi;
    let ident = DMatrix::<f64>::identity(m, m);

    let phi2 = phi * phi;
    report.push(PHI_CUBED, (&phi2 * phi + phi).amax());

    let mut frame_sum = DMatrix::zeros(m, m);
    let mut eps_eta = DMatrix::zeros(m, m);
    for a in 0..st.s {
        frame_sum += &st.xi[a] * st.eta[a].transpose();
        eps_eta += &st.eta[a] * st.eta[a].transpose() * st.epsilon[a];
    }
    report.push(PHI_SQUARED, (&phi2 + &ident - &frame_sum).amax());

    let eta_xi = (0..st.s)
        .flat_map(|a| (0..st.s).map(move |b| (a, b)))
        .map(|(a, b)| {
            let delta = if a == b { 1.0 } else { 0.0 };
            (st.eta[a].dot(&st.xi[b]) - delta).abs()
        })
        .fold(0.0, f64::max);
    report.push(ETA_XI, eta_xi);

    report.push(COMPATIBLE, (phi.transpose() * g * phi - g + &eps_eta).amax());

    let phi_xi = st.xi.iter().map(|x| (phi * x).amax()).fold(0.0, f64::max);
    report.push(PHI_XI, phi_xi);

    let eta_phi = st
        .eta
        .iter()
        .map(|e| (e.transpose() * phi).amax())
        .fold(0.0, f64::max);
    report.push(ETA_PHI, eta_phi);

    let g_xi = (0..st.s)
        .map(|a| (g * &st.xi[a] - &st.eta[a] * st.epsilon[a]).amax())
        .fold(0.0, f64::max);
    report.push(G_XI, g_xi);

    report.push(SKEW, (g * phi + phi.transpose() * g).amax());

    let xi_gram = (0..st.s)
        .flat_map(|a| (0..st.s).map(move |b| (a, b)))
        .map(|(a, b)| {
            let target = if a == b { st.epsilon[a] } else { 0.0 };
            (st.metric.form(&st.xi[a], &st.xi[b]) - target).abs()
        })
        .fold(0.0, f64::max);
    report.push(XI_GRAM, xi_gram);

    let sv = {
        let mut v = singular_values(phi);
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let rank_residual = if 2 * st.n > 0 && sv[2 * st.n - 1] <= STRUCTURE_TOL {
        f64::INFINITY
    } else {
        sv.get(2 * st.n).cloned().unwrap_or(0.0)
    };
    report.push(RANK, rank_residual);

    let split = st
        .xi
        .iter()
        .map(|x| (x.transpose() * g * phi).amax())
        .fold(0.0, f64::max);
    report.push(SPLITTING, split);

    report.push(TRACE, phi.trace().abs());

    report.push(LORENTZIAN, if st.is_lorentzian() { 0.0 } else { 1.0 });
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CelestialKind {
    /// `S(z)`: unit vectors in `z^perp`.
    #[serde(rename = "S_of_z")]
    SOfZ,
    /// `S_phi(xi_1) = S(xi_1) ∩ Im(phi)`.
    #[serde(rename = "S_phi")]
    SPhi,
    /// `N(z)`: null vectors with `g(u, z) = -1`.
    #[serde(rename = "N_of_z")]
    NOfZ,
    /// `N_phi(xi_1) = psi^{-1}(S_phi)`.
    #[serde(rename = "N_phi")]
    NPhi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CelestialSample {
    pub points: Vec<Vector>,
    pub kind: CelestialKind,
    pub seed: u64,
    pub count: usize,
}

/// Uniform draws on the unit sphere of a spacelike subspace, pushed through
/// its orthonormal frame and renormalized in `g`.
pub(crate) fn sphere_points(g: &ScalarProduct, frame: &SubspaceBasis, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = frame.dim();
    (0..count)
        .map(|_| loop {
            let c = Vector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let norm = c.norm();
            if norm < 1e-8 {
                continue;
            }
            let x = frame.matrix() * (c / norm);
            let q = g.norm_sq(&x);
            break x / q.sqrt();
        })
        .collect()
}

fn require_unit_timelike(g: &ScalarProduct, z: &Vector) -> Result<()> {
    g.check_dim(z)?;
    let q = g.norm_sq(z);
    if (q + 1.0).abs() > CONGRUENCE_TOL {
        return Err(GeomError::Precondition(format!("z is not unit timelike: g(z,z) = {q}")));
    }
    Ok(())
}

/// Celestial sphere `S(z)` of a unit timelike `z` (Lorentzian `g`).
pub fn sample_celestial(g: &ScalarProduct, z: &Vector, count: usize, seed: u64) -> Result<CelestialSample> {
    if count < 1 {
        return Err(GeomError::Precondition("sample count must be at least 1".into()));
    }
    require_unit_timelike(g, z)?;
    let perp = orthogonal_complement(g, &[z.clone()])?;
    let frame = orthonormal_frame(g, &perp)?;
    if frame.gram().diagonal().iter().any(|&e| e < 0.0) {
        return Err(GeomError::Sampler("z^perp is not spacelike; g is not Lorentzian".into()));
    }
    Ok(CelestialSample {
        points: sphere_points(g, &frame, count, seed),
        kind: CelestialKind::SOfZ,
        seed,
        count,
    })
}

/// Null congruence `N(z) = psi^{-1}(S(z))`.
pub fn sample_null_congruence(g: &ScalarProduct, z: &Vector, count: usize, seed: u64) -> Result<CelestialSample> {
    let mut sample = sample_celestial(g, z, count, seed)?;
    for p in sample.points.iter_mut() {
        *p = z + &*p;
    }
    sample.kind = CelestialKind::NOfZ;
    Ok(sample)
}

pub fn psi(g: &ScalarProduct, z: &Vector, u: &Vector) -> Result<Vector> {
    require_unit_timelike(g, z)?;
    g.check_dim(u)?;
    let uu = g.norm_sq(u);
    let uz = g.form(u, z);
    let mut failed = Vec::new();
    if uu.abs() > CONGRUENCE_TOL {
        failed.push(format!("g(u,u) = {uu} != 0"));
    }
    if (uz + 1.0).abs() > CONGRUENCE_TOL {
        failed.push(format!("g(u,z) = {uz} != -1"));
    }
    if !failed.is_empty() {
        return Err(GeomError::Precondition(format!("u not in N(z): {}", failed.join("; "))));
    }
    Ok(u - z)
}

pub fn psi_inverse(g: &ScalarProduct, z: &Vector, x: &Vector) -> Result<Vector> {
    require_unit_timelike(g, z)?;
    g.check_dim(x)?;
    let xx = g.norm_sq(x);
    if (xx - 1.0).abs() > CONGRUENCE_TOL {
        return Err(GeomError::Precondition(format!("x not in S(z): g(x,x) = {xx} != 1")));
    }
    let xz = g.form(x, z);
    if xz.abs() > CONGRUENCE_TOL {
        return Err(GeomError::Precondition(format!("x not in S(z): g(x,z) = {xz} != 0")));
    }
    Ok(z + x)
}
