//! Stochastic objectives `f(x) = E_nu[F(x, nu)]` and the query-counting oracle
//! the optimizer talks to.
//!
//! Objectives are evaluated in ambient coordinates and return Euclidean
//! (sub)gradient selections; Riemannian gradients are their tangent
//! projections.

use std::fs;
use std::ops::AddAssign;
use std::path::Path;

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Mat, Point, Tangent};
use crate::rng::CounterRng;

/// One random data draw `nu` and its position in the run's draw sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleIndex {
    pub payload: DVector<f64>,
    /// 1-based, strictly increasing within one [`CountingOracle`].
    pub draw: u64,
}

pub trait StochasticObjective: Send + Sync {
    fn draw_payload(&self, rng: &mut CounterRng) -> DVector<f64>;

    /// `F(x, nu)`.
    fn value(&self, x: &Mat, nu: &DVector<f64>) -> f64;

    /// A Euclidean subgradient selection of `F(., nu)` at `x`.
    fn egrad(&self, x: &Mat, nu: &DVector<f64>) -> Mat;

    /// `f(x) = E_nu[F(x, nu)]`.
    fn full_value(&self, x: &Mat) -> f64;

    fn full_egrad(&self, x: &Mat) -> Mat;

    /// Lipschitz constant `L(nu)` of `F(., nu)` when known in closed form.
    fn lipschitz(&self, _nu: &DVector<f64>) -> Option<f64> {
        None
    }
}

/// `sgn` with `sgn(0) = 0`, the minimal-norm element of `[-1, 1]`.
fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleStats {
    pub value_queries: u64,
    pub gradient_queries: u64,
    pub samples_drawn: u64,
}

impl AddAssign for OracleStats {
    fn add_assign(&mut self, rhs: Self) {
        self.value_queries += rhs.value_queries;
        self.gradient_queries += rhs.gradient_queries;
        self.samples_drawn += rhs.samples_drawn;
    }
}

/// Per-run query surface over a shared objective. Every query is counted.
pub struct CountingOracle<'a, P: ?Sized> {
    problem: &'a P,
    stats: OracleStats,
}

impl<'a, P: StochasticObjective + ?Sized> CountingOracle<'a, P> {
    pub fn new(problem: &'a P) -> Self {
        CountingOracle {
            problem,
            stats: OracleStats::default(),
        }
    }

    pub fn problem(&self) -> &'a P {
        self.problem
    }

    pub fn stats(&self) -> OracleStats {
        self.stats
    }

    pub fn draw_sample(&mut self, rng: &mut CounterRng) -> SampleIndex {
        self.stats.samples_drawn += 1;
        SampleIndex {
            payload: self.problem.draw_payload(rng),
            draw: self.stats.samples_drawn,
        }
    }

    pub fn stochastic_value(&mut self, x: &Point, nu: &SampleIndex) -> f64 {
        self.stats.value_queries += 1;
        self.problem.value(x.coords(), &nu.payload)
    }

    /// Tangent projection of the Euclidean subgradient selection.
    pub fn stochastic_rgrad<M: Manifold + ?Sized>(
        &mut self,
        manifold: &M,
        x: &Point,
        nu: &SampleIndex,
    ) -> Result<Tangent> {
        self.stats.gradient_queries += 1;
        manifold.project_tangent(x, &self.problem.egrad(x.coords(), &nu.payload))
    }
}

/// Deterministic Riemannian subgradient selection of `f`; used for
/// diagnostics, never by the optimizer.
pub fn full_rgrad<M, P>(problem: &P, manifold: &M, x: &Point) -> Result<Tangent>
where
    M: Manifold + ?Sized,
    P: StochasticObjective + ?Sized,
{
    manifold.project_tangent(x, &problem.full_egrad(x.coords()))
}

/// Eigenvalue profile for generated covariance matrices. Values are rescaled
/// so the largest equals 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Spectrum {
    /// `lambda_i = 1 / i`.
    Harmonic,
    /// `lambda_i = i^{-alpha}`.
    Power(f64),
    Explicit(Vec<f64>),
}

impl Spectrum {
    pub fn eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        let raw: Vec<f64> = match self {
            Spectrum::Harmonic => (1..=n).map(|i| 1.0 / i as f64).collect(),
            Spectrum::Power(alpha) => (1..=n).map(|i| (i as f64).powf(-alpha)).collect(),
            Spectrum::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::config(format!(
                        "explicit spectrum has {} values for n = {n}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if raw.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::config("spectrum values must be finite and nonnegative"));
        }
        let max = raw.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return Ok(raw);
        }
        Ok(raw.into_iter().map(|l| l / max).collect())
    }
}

/// Sparse PCA: `F(X, nu) = -||X^T nu||^2 + mu ||X||_1` with `nu ~ N(0, A)`, so
/// that `f(X) = -tr(X^T A X) + mu ||X||_1`. On the sphere (`p = 1`) this is
/// `-x^T A x + mu ||x||_1`.
#[derive(Debug, Clone)]
pub struct SparsePca {
    a: Mat,
    factor: Mat,
    mu: f64,
}

impl SparsePca {
    /// Validates `A` (symmetric within 1e-12, eigenvalues >= -1e-10) and builds
    /// a factor `B` with `A = B B^T` from its eigendecomposition.
    pub fn new(a: Mat, mu: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::config("covariance matrix must be square and non-empty"));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::config(format!("l1 weight must be >= 0, got {mu}")));
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::config(format!("covariance matrix is not symmetric (max |A - A^T| = {asym:e})")));
        }
        let eig = SymmetricEigen::new(a.clone());
        let min = eig.eigenvalues.min();
        if min < -1e-10 {
            return Err(Error::config(format!(
                "covariance matrix is not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * Mat::from_diagonal(&roots);
        Ok(SparsePca { a, factor, mu })
    }

    /// `A = Q diag(lambda) Q^T` with `Q` from the QR factorization of a seeded
    /// Gaussian matrix.
    pub fn generate(n: usize, spectrum: &Spectrum, seed: u64, mu: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("dimension must be positive"));
        }
        let lambdas = spectrum.eigenvalues(n)?;
        let mut rng = CounterRng::new(seed);
        let g = Mat::from_vec(n, n, rng.normals(n * n));
        let q = g.qr().q();
        let roots = DVector::from_iterator(n, lambdas.iter().map(|l| l.sqrt()));
        let factor = q * Mat::from_diagonal(&roots);
        let a = &factor * factor.transpose();
        let a = (&a + a.transpose()) * 0.5;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::config(format!("l1 weight must be >= 0, got {mu}")));
        }
        Ok(SparsePca { a, factor, mu })
    }

    /// Reads a dense covariance matrix: first line `n`, then `n` rows of `n`
    /// comma- or whitespace-separated values. Blank lines and `#` comments are
    /// skipped.
    pub fn from_file(path: &Path, mu: f64) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let a = parse_matrix(&text, &path.display().to_string())?;
        Self::new(a, mu)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn covariance(&self) -> &Mat {
        &self.a
    }

    pub fn factor(&self) -> &Mat {
        &self.factor
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

pub(crate) fn parse_matrix(text: &str, source: &str) -> Result<Mat> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = rows
        .next()
        .ok_or_else(|| Error::parse(source, "empty matrix file"))?;
    let n: usize = header
        .parse()
        .map_err(|_| Error::parse(format!("{source}:{line}"), format!("expected dimension header, got {header:?}")))?;
    let mut data = Vec::with_capacity(n * n);
    let mut count = 0;
    for (line, l) in rows {
        let vals: Vec<f64> = l
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(format!("{source}:{line}"), format!("invalid number {s:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != n {
            return Err(Error::parse(
                format!("{source}:{line}"),
                format!("row has {} entries, expected {n}", vals.len()),
            ));
        }
        data.extend(vals);
        count += 1;
    }
    if count != n {
        return Err(Error::parse(source, format!("found {count} rows, expected {n}")));
    }
    Ok(Mat::from_row_slice(n, n, &data))
}

impl StochasticObjective for SparsePca {
    fn draw_payload(&self, rng: &mut CounterRng) -> DVector<f64> {
        let n = self.dim();
        let z = DVector::from_vec(rng.normals(n));
        &self.factor * z
    }

    fn value(&self, x: &Mat, nu: &DVector<f64>) -> f64 {
        let proj = x.tr_mul(nu);
        -proj.norm_squared() + self.mu * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn egrad(&self, x: &Mat, nu: &DVector<f64>) -> Mat {
        let proj = x.tr_mul(nu);
        let mut g = x.map(sign0) * self.mu;
        g.ger(-2.0, nu, &proj, 1.0);
        g
    }

    fn full_value(&self, x: &Mat) -> f64 {
        -(x.transpose() * &self.a * x).trace() + self.mu * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn full_egrad(&self, x: &Mat) -> Mat {
        x.map(sign0) * self.mu - (&self.a * x) * 2.0
    }

    /// `2 ||nu||^2 + mu sqrt(n p)`.
    fn lipschitz(&self, nu: &DVector<f64>) -> Option<f64> {
        Some(2.0 * nu.norm_squared() + self.mu * (self.dim() as f64).sqrt())
    }
}

/// Deterministic `F(x, nu) = <x, A x>`; the draw carries no data.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub a: Mat,
}

impl StochasticObjective for QuadraticForm {
    fn draw_payload(&self, _rng: &mut CounterRng) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn value(&self, x: &Mat, _nu: &DVector<f64>) -> f64 {
        self.full_value(x)
    }
    fn egrad(&self, x: &Mat, _nu: &DVector<f64>) -> Mat {
        self.full_egrad(x)
    }
    fn full_value(&self, x: &Mat) -> f64 {
        (x.transpose() * &self.a * x).trace()
    }
    fn full_egrad(&self, x: &Mat) -> Mat {
        (&self.a + self.a.transpose()) * x
    }
}

/// Deterministic `F(x, nu) = <c, x>`.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    pub c: Mat,
}

impl StochasticObjective for LinearObjective {
    fn draw_payload(&self, _rng: &mut CounterRng) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn value(&self, x: &Mat, _nu: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }
    fn egrad(&self, _x: &Mat, _nu: &DVector<f64>) -> Mat {
        self.c.clone()
    }
    fn full_value(&self, x: &Mat) -> f64 {
        self.c.dot(x)
    }
    fn full_egrad(&self, _x: &Mat) -> Mat {
        self.c.clone()
    }
    fn lipschitz(&self, _nu: &DVector<f64>) -> Option<f64> {
        Some(self.c.norm())
    }
}

/// `F(x, nu) = value` everywhere; gradients vanish.
#[derive(Debug, Clone, Copy)]
pub struct ConstantObjective {
    pub value: f64,
    pub shape: (usize, usize),
}

impl StochasticObjective for ConstantObjective {
    fn draw_payload(&self, _rng: &mut CounterRng) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn value(&self, _x: &Mat, _nu: &DVector<f64>) -> f64 {
        self.value
    }
    fn egrad(&self, _x: &Mat, _nu: &DVector<f64>) -> Mat {
        Mat::zeros(self.shape.0, self.shape.1)
    }
    fn full_value(&self, _x: &Mat) -> f64 {
        self.value
    }
    fn full_egrad(&self, _x: &Mat) -> Mat {
        Mat::zeros(self.shape.0, self.shape.1)
    }
    fn lipschitz(&self, _nu: &DVector<f64>) -> Option<f64> {
        Some(0.0)
    }
}
