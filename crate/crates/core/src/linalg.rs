//! Exact-signature linear algebra over indefinite scalar-product spaces.
//!
//! Vectors are plain coordinate arrays in the ambient standard basis. Every
//! subspace is carried as an explicit list of basis vectors together with the
//! restriction of the ambient form to it.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Coordinates of a tangent vector in the ambient standard basis.
pub type Vector = DVector<f64>;

/// Relative tolerance for rank and degeneracy decisions (scaled by the matrix max-norm).
pub const RANK_TOL: f64 = 1e-9;
/// Absolute tolerance on `g(x,x)` below which a non-zero vector counts as null.
pub const NULL_TOL: f64 = 1e-10;

/// Tolerances carried by a [`ScalarProduct`] and used by every operation on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank_rel: f64,
    pub null_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: RANK_TOL,
            null_abs: NULL_TOL,
        }
    }
}

/// Inertia of a symmetric form: number of positive and negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub plus: usize,
    pub minus: usize,
}

/// A nondegenerate symmetric bilinear form on `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProduct {
    components: DMatrix<f64>,
    signature: Signature,
    tol: Tolerances,
}

impl ScalarProduct {
    /// Builds a scalar product from a square matrix. The matrix is stored
    /// symmetrized; the signature is computed from its eigenvalues.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerances(matrix, Tolerances::default())
    }

    pub fn with_tolerances(matrix: DMatrix<f64>, tol: Tolerances) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(GeomError::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(GeomError::Precondition("scalar product of dimension 0".into()));
        }
        let components = (&matrix + matrix.transpose()) * 0.5;
        let scale = max_abs(&components);
        let smallest = singular_values(&components).into_iter().fold(f64::INFINITY, f64::min);
        let threshold = tol.rank_rel * scale;
        if !(smallest > threshold) {
            return Err(GeomError::DegenerateMetric {
                smallest,
                tol: threshold,
            });
        }
        let eig = SymmetricEigen::new(components.clone());
        let minus = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        let signature = Signature {
            plus: components.nrows() - minus,
            minus,
        };
        Ok(Self {
            components,
            signature,
            tol,
        })
    }

    /// Builds a scalar product and checks it against a declared signature.
    pub fn with_signature(matrix: DMatrix<f64>, declared: Signature) -> Result<Self> {
        let g = Self::new(matrix)?;
        if g.signature != declared {
            return Err(GeomError::SignatureMismatch {
                declared_plus: declared.plus,
                declared_minus: declared.minus,
                plus: g.signature.plus,
                minus: g.signature.minus,
            });
        }
        Ok(g)
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    /// Minkowski form `diag(-1, 1, ..., 1)` on `R^dim`.
    pub fn minkowski(dim: usize) -> Result<Self> {
        let mut d = vec![1.0; dim];
        if let Some(first) = d.first_mut() {
            *first = -1.0;
        }
        Self::diagonal(&d)
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn set_tolerances(&mut self, tol: Tolerances) {
        self.tol = tol;
    }

    pub fn is_lorentzian(&self) -> bool {
        self.signature.minus == 1
    }

    pub fn is_definite(&self) -> bool {
        self.signature.minus == 0
    }

    /// `x^T G y`, checked for dimensions.
    pub fn inner(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.form(x, y))
    }

    /// Unchecked evaluation of the form. Symmetric in its arguments bit for bit.
    pub(crate) fn form(&self, x: &Vector, y: &Vector) -> f64 {
        let a = x.dot(&(&self.components * y));
        let b = y.dot(&(&self.components * x));
        0.5 * (a + b)
    }

    pub(crate) fn norm_sq(&self, x: &Vector) -> f64 {
        x.dot(&(&self.components * x))
    }

    /// Raises the index of a covector: returns `v` with `g(v, .) = w`.
    pub(crate) fn sharp(&self, w: &Vector) -> Vector {
        self.components
            .clone()
            .lu()
            .solve(w)
            .expect("nondegenerate scalar product is invertible")
    }

    pub(crate) fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Gram matrix `B^T G B` of the columns of `basis`.
    pub fn gram_of(&self, basis: &DMatrix<f64>) -> DMatrix<f64> {
        let raw = basis.transpose() * &self.components * basis;
        (&raw + raw.transpose()) * 0.5
    }
}

/// Causal character of a vector with respect to a scalar product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalCharacter {
    Spacelike,
    Timelike,
    Null,
    Zero,
}

pub fn inner(g: &ScalarProduct, x: &Vector, y: &Vector) -> Result<f64> {
    g.inner(x, y)
}

pub fn causal_character(g: &ScalarProduct, x: &Vector) -> CausalCharacter {
    if x.iter().all(|&v| v == 0.0) {
        return CausalCharacter::Zero;
    }
    let q = g.norm_sq(x);
    let tol = g.tol.null_abs;
    if q > tol {
        CausalCharacter::Spacelike
    } else if q < -tol {
        CausalCharacter::Timelike
    } else {
        CausalCharacter::Null
    }
}

/// An ordered basis of a subspace together with its Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    vectors: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Builds a basis from explicit vectors, rejecting dependent lists.
    pub fn new(g: &ScalarProduct, vectors: &[Vector]) -> Result<Self> {
        for v in vectors {
            g.check_dim(v)?;
        }
        let cols = if vectors.is_empty() {
            DMatrix::zeros(g.dim(), 0)
        } else {
            DMatrix::from_columns(vectors)
        };
        Self::from_columns(g, cols)
    }

    pub fn from_columns(g: &ScalarProduct, cols: DMatrix<f64>) -> Result<Self> {
        if cols.nrows() != g.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: g.dim(),
                found: cols.nrows(),
            });
        }
        let k = cols.ncols();
        let r = rank(&cols, g.tol.rank_rel);
        if r < k {
            return Err(GeomError::DependentVectors { rank: r, count: k });
        }
        Ok(Self::from_columns_unchecked(g, cols))
    }

    pub(crate) fn from_columns_unchecked(g: &ScalarProduct, cols: DMatrix<f64>) -> Self {
        let gram = g.gram_of(&cols);
        Self {
            vectors: cols,
            gram,
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Basis vectors as the columns of an `m x k` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> Vector {
        self.vectors.column(i).into_owned()
    }

    pub fn vectors(&self) -> Vec<Vector> {
        (0..self.dim()).map(|i| self.vector(i)).collect()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Coordinates `c` of the g-orthogonal projection of `v` onto the span,
    /// i.e. the solution of `gram * c = [g(b_i, v)]`.
    pub fn coordinates(&self, g: &ScalarProduct, v: &Vector) -> Result<Vector> {
        g.check_dim(v)?;
        let rhs = self.vectors.transpose() * g.components() * v;
        self.gram
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| GeomError::Precondition("restriction of g to the subspace is degenerate".into()))
    }

    pub fn project(&self, g: &ScalarProduct, v: &Vector) -> Result<Vector> {
        Ok(&self.vectors * self.coordinates(g, v)?)
    }

    /// Euclidean distance from `v` to the span (least squares residual).
    pub fn distance(&self, v: &Vector) -> f64 {
        if self.dim() == 0 {
            return v.norm();
        }
        let d = svd(&self.vectors);
        let top = d.s.first().copied().unwrap_or(0.0);
        let mut c = Vector::zeros(self.dim());
        for (i, &sv) in d.s.iter().enumerate() {
            if sv > 1e-14 * top {
                c += d.v.column(i) * (d.u.column(i).dot(v) / sv);
            }
        }
        (v - &self.vectors * c).norm()
    }
}

/// Basis of `{y : g(y, v) = 0 for all v in vectors}`, computed as the nullspace
/// of the Gram map `y -> (g(v_i, y))_i` with SVD-grade rank decisions.
pub fn orthogonal_complement(g: &ScalarProduct, vectors: &[Vector]) -> Result<SubspaceBasis> {
    let input = SubspaceBasis::new(g, vectors)?;
    let m = g.dim();
    let k = input.dim();
    if k == 0 {
        return Ok(SubspaceBasis::from_columns_unchecked(g, DMatrix::identity(m, m)));
    }
    let map = input.matrix().transpose() * g.components();
    let null = nullspace(&map, g.tol.rank_rel);
    Ok(SubspaceBasis::from_columns_unchecked(g, null))
}

/// Indefinite Gram–Schmidt in input order. Output gram is `diag(±1)`.
pub fn orthonormalize(g: &ScalarProduct, basis: &SubspaceBasis) -> Result<SubspaceBasis> {
    let mut out: Vec<Vector> = Vec::with_capacity(basis.dim());
    let mut signs: Vec<f64> = Vec::with_capacity(basis.dim());
    for (index, v) in basis.vectors().into_iter().enumerate() {
        let mut w = v.clone();
        for (e, &eps) in out.iter().zip(&signs) {
            w -= e * (eps * g.form(e, &v));
        }
        // second pass against cancellation
        let w0 = w.clone();
        for (e, &eps) in out.iter().zip(&signs) {
            w -= e * (eps * g.form(e, &w0));
        }
        let n = g.norm_sq(&w);
        let scale = w.norm_squared().max(f64::MIN_POSITIVE) * max_abs(g.components());
        if n.abs() <= g.tol.rank_rel * scale {
            return Err(GeomError::DegeneratePivot { index, norm: n.abs() });
        }
        let eps = n.signum();
        out.push(w / n.abs().sqrt());
        signs.push(eps);
    }
    SubspaceBasis::new(g, &out)
}

/// Orthonormal frame of a nondegenerate subspace via the eigendecomposition of
/// its gram; timelike vectors come first. Unlike [`orthonormalize`] this never
/// trips over null input vectors.
pub fn orthonormal_frame(g: &ScalarProduct, basis: &SubspaceBasis) -> Result<SubspaceBasis> {
    let k = basis.dim();
    if k == 0 {
        return Ok(basis.clone());
    }
    let eig = SymmetricEigen::new(basis.gram().clone());
    let scale = max_abs(basis.gram()).max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut cols = Vec::with_capacity(k);
    for (index, &i) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        if lambda.abs() <= g.tol.rank_rel * scale {
            return Err(GeomError::DegeneratePivot {
                index,
                norm: lambda.abs(),
            });
        }
        let q = eig.eigenvectors.column(i);
        cols.push(basis.matrix() * q / lambda.abs().sqrt());
    }
    Ok(SubspaceBasis::from_columns_unchecked(g, DMatrix::from_columns(&cols)))
}

/// Full singular value decomposition `m = u diag(s) v^T`, singular values
/// in decreasing order. nalgebra's SVD occasionally returns left vectors that
/// miss the column space by 1e-3 on rank-deficient input, so faer does the work.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn svd(m: &DMatrix<f64>) -> Svd {
    let d = to_faer(m).svd().expect("SVD of a finite matrix");
    Svd {
        u: from_faer(d.U()),
        s: d.S().column_vector().iter().cloned().collect(),
        v: from_faer(d.V()),
    }
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("SVD of a finite matrix")
}

/// Eigenvalues of a general square matrix.
///
/// nalgebra's Schur iteration can stall on clustered eigenvalues, which the
/// Jacobi operators produce routinely, so this goes through faer instead.
pub fn general_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let values = a.eigenvalues().map_err(|_| GeomError::EigenSolver { dim: n })?;
    Ok(values.iter().map(|c| Complex::new(c.re, c.im)).collect())
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let threshold = rel_tol * max_abs(m);
    singular_values(m).into_iter().filter(|&s| s > threshold).count()
}

/// Orthonormal (Euclidean) basis of the right nullspace of `map` as columns.
pub(crate) fn nullspace(map: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = map.ncols();
    let rows = map.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.rows_mut(0, map.nrows()).copy_from(map);
    let threshold = rel_tol * max_abs(map);
    let d = svd(&padded);
    let cols: Vec<Vector> = d
        .s
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| d.v.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
