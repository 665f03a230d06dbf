//! Finite-dimensional Gaussian integrators.
//!
//! The volume element is normalized as D(x) = det(Q/s)^(1/2) dx, which makes
//! the defining identity
//!
//!   int exp(-(pi/s) Q(x) - 2 pi i <x', x>) D(x) = exp(-pi s W(x'))
//!
//! an exact finite-dimensional theorem (W the inverse form on the dual).
//! With this normalization the Gaussian weight exp(-(pi/s)Q) D(x) is a
//! probability measure for real s, which closed-form moments, quadrature and
//! Monte Carlo all exploit. The volume element itself is translation
//! invariant: D(x + a) = D(x).

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad::QuadRule;

const PI: f64 = std::f64::consts::PI;

/// Positive quadratic form with its dual inverse and scale parameter.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    pub n: usize,
    pub q: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub s: Complex64,
}

impl GaussianSpec {
    pub fn new(q: DMatrix<f64>, s: Complex64) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: q.ncols(),
            });
        }
        if (&q - q.transpose()).amax() > 1e-12 {
            return Err(LabError::InvalidParameter("Q must be symmetric".into()));
        }
        // Re(Q/s) > 0: for Q positive definite this needs Re(s) > 0; the
        // oscillatory boundary s = i is admitted for closed forms only
        let eig = q.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig <= 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "Q must be positive definite (min eigenvalue {min_eig})"
            )));
        }
        if s.re < 0.0 || s == Complex64::default() {
            return Err(LabError::InvalidParameter(
                "scale must satisfy Re(s) >= 0, s != 0".into(),
            ));
        }
        let w = q
            .clone()
            .try_inverse()
            .ok_or_else(|| LabError::InvalidParameter("Q is not invertible".into()))?;
        let dev = ((&q * &w) - DMatrix::identity(n, n)).amax();
        if dev > 1e-12 {
            return Err(LabError::NumericalInconsistency {
                max_dev: dev,
                tol: 1e-12,
            });
        }
        Ok(GaussianSpec { n, q, w, s })
    }

    pub fn identity(n: usize, s: Complex64) -> Self {
        GaussianSpec::new(DMatrix::identity(n, n), s).expect("identity form is valid")
    }

    fn numeric_scale(&self) -> Result<f64> {
        if self.s.im != 0.0 || self.s.re <= 0.0 {
            return Err(LabError::UnsupportedMethod {
                method: "quadrature/monte_carlo".into(),
                reason: "oscillatory scale handled by closed forms only".into(),
            });
        }
        Ok(self.s.re)
    }

    /// det(Q/s)^(1/2), the volume-element normalization.
    pub fn normalization(&self) -> Complex64 {
        let det_q: f64 = self.q.clone().lu().determinant();
        let s_pow = self.s.powf(-(self.n as f64) / 2.0);
        s_pow * det_q.sqrt()
    }

    /// Covariance of the weight exp(-(pi/s)Q) D(x) for real s.
    fn covariance(&self) -> Result<DMatrix<f64>> {
        let s = self.numeric_scale()?;
        Ok(&self.w * (s / (2.0 * PI)))
    }

    /// Quadratic form value x^T Q x.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.q * x)[(0, 0)]
    }

    /// Dual form value x'^T W x'.
    pub fn dual_form(&self, xp: &DVector<f64>) -> f64 {
        (xp.transpose() * &self.w * xp)[(0, 0)]
    }
}

/// Integrands paired with the Gaussian weight (or, for `integrate_raw`,
/// integrated against the bare volume element).
#[derive(Debug, Clone)]
pub enum Integrand {
    /// exp(-2 pi i <x', x>), the defining-identity kernel
    FourierKernel { xprime: DVector<f64> },
    /// prod_i x_i^{e_i}
    Monomial { exponents: Vec<usize> },
    /// exp(-x^T P x + q . x), P symmetric with positive-definite combination
    ExpQuadLin { p: DMatrix<f64>, q: DVector<f64> },
    /// compact radial bump (1 on |x-c| <= r, 0 beyond R)
    Bump {
        center: DVector<f64>,
        r: f64,
        big_r: f64,
    },
    /// exp(-alpha pi |x - c|^2)
    ShiftedGaussian { center: DVector<f64>, alpha: f64 },
}

impl Integrand {
    fn eval(&self, x: &DVector<f64>) -> Complex64 {
        match self {
            Integrand::FourierKernel { xprime } => {
                Complex64::new(0.0, -2.0 * PI * xprime.dot(x)).exp()
            }
            Integrand::Monomial { exponents } => {
                let mut v = 1.0;
                for (i, &e) in exponents.iter().enumerate() {
                    v *= x[i].powi(e as i32);
                }
                Complex64::new(v, 0.0)
            }
            Integrand::ExpQuadLin { p, q } => {
                let quad = (x.transpose() * p * x)[(0, 0)];
                Complex64::new((-quad + q.dot(x)).exp(), 0.0)
            }
            Integrand::Bump { center, r, big_r } => {
                let d = (x - center).norm();
                let v = if d <= *r {
                    1.0
                } else if d >= *big_r {
                    0.0
                } else {
                    let t = (d - r) / (big_r - r);
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                };
                Complex64::new(v, 0.0)
            }
            Integrand::ShiftedGaussian { center, alpha } => {
                Complex64::new((-alpha * PI * (x - center).norm_squared()).exp(), 0.0)
            }
        }
    }

    /// Shift the argument: F_shifted(x) = F(x + a).
    fn shifted(&self, a: &DVector<f64>) -> Result<Integrand> {
        match self {
            Integrand::Bump { center, r, big_r } => Ok(Integrand::Bump {
                center: center - a,
                r: *r,
                big_r: *big_r,
            }),
            Integrand::ShiftedGaussian { center, alpha } => Ok(Integrand::ShiftedGaussian {
                center: center - a,
                alpha: *alpha,
            }),
            Integrand::ExpQuadLin { .. } => Err(LabError::UnsupportedMethod {
                method: "translation".into(),
                reason: "shift generally breaks absolute integrability bookkeeping".into(),
            }),
            Integrand::FourierKernel { .. } | Integrand::Monomial { .. } => {
                Err(LabError::UnsupportedMethod {
                    method: "translation".into(),
                    reason: "integrand is not absolutely integrable over R^n".into(),
                })
            }
        }
    }

    /// Box radius beyond which the integrand is negligible (raw integrals).
    fn support_radius(&self) -> Result<(DVector<f64>, f64)> {
        match self {
            Integrand::Bump { center, big_r, .. } => Ok((center.clone(), *big_r)),
            Integrand::ShiftedGaussian { center, alpha } => {
                Ok((center.clone(), 3.8 / alpha.sqrt()))
            }
            _ => Err(LabError::UnsupportedMethod {
                method: "raw integration".into(),
                reason: "integrand is not absolutely integrable over R^n".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralResult {
    pub value_re: f64,
    pub value_im: f64,
    pub error_estimate: f64,
    pub method: String,
    pub seed: Option<u64>,
}

impl IntegralResult {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.value_re, self.value_im)
    }

    fn new(value: Complex64, error: f64, method: &str, seed: Option<u64>) -> Self {
        IntegralResult {
            value_re: value.re,
            value_im: value.im,
            error_estimate: error,
            method: method.to_string(),
            seed,
        }
    }
}

fn nodes_for_dim(n: usize) -> usize {
    match n {
        0 | 1 | 2 => 48,
        3 => 24,
        4 => 16,
        5 => 12,
        6 => 10,
        _ => 8,
    }
}

/// Tensor-product Gauss-Hermite sum of F(T u) over R^n with weight e^{-|u|^2}.
fn gauss_hermite_nd(
    n: usize,
    nodes: usize,
    transform: &DMatrix<f64>,
    f: &dyn Fn(&DVector<f64>) -> Complex64,
) -> Complex64 {
    let rule = QuadRule::gauss_hermite(nodes);
    let total = nodes.pow(n as u32);
    let mut acc = Complex64::default();
    let mut u = DVector::zeros(n);
    for flat in 0..total {
        let mut idx = flat;
        let mut weight = 1.0;
        for a in 0..n {
            let i = idx % nodes;
            u[a] = rule.nodes[i];
            weight *= rule.weights[i];
            idx /= nodes;
        }
        let x = transform * &u;
        acc += f(&x) * weight;
    }
    acc
}

/// Gaussian moment E[prod x_i^{e_i}] for covariance `cov` (Isserlis pairing).
fn gaussian_moment(cov: &DMatrix<f64>, exponents: &[usize]) -> f64 {
    let mut idx = Vec::new();
    for (i, &e) in exponents.iter().enumerate() {
        for _ in 0..e {
            idx.push(i);
        }
    }
    fn pair(idx: &[usize], cov: &DMatrix<f64>) -> f64 {
        match idx.len() {
            0 => 1.0,
            l if l % 2 == 1 => 0.0,
            _ => {
                let first = idx[0];
                let mut acc = 0.0;
                for j in 1..idx.len() {
                    let mut rest: Vec<usize> = Vec::with_capacity(idx.len() - 2);
                    rest.extend_from_slice(&idx[1..j]);
                    rest.extend_from_slice(&idx[j + 1..]);
                    acc += cov[(first, idx[j])] * pair(&rest, cov);
                }
                acc
            }
        }
    }
    pair(&idx, cov)
}

/// Complex Gaussian moment for covariance c * W (analytic continuation in s).
fn gaussian_moment_complex(w: &DMatrix<f64>, scale: Complex64, exponents: &[usize]) -> Complex64 {
    let mut idx = Vec::new();
    for (i, &e) in exponents.iter().enumerate() {
        for _ in 0..e {
            idx.push(i);
        }
    }
    if idx.len() % 2 == 1 {
        return Complex64::default();
    }
    let pairs = idx.len() / 2;
    // scale^pairs * real pairing over W
    fn pair(idx: &[usize], w: &DMatrix<f64>) -> f64 {
        match idx.len() {
            0 => 1.0,
            _ => {
                let first = idx[0];
                let mut acc = 0.0;
                for j in 1..idx.len() {
                    let mut rest: Vec<usize> = Vec::with_capacity(idx.len() - 2);
                    rest.extend_from_slice(&idx[1..j]);
                    rest.extend_from_slice(&idx[j + 1..]);
                    acc += w[(first, idx[j])] * pair(&rest, w);
                }
                acc
            }
        }
    }
    scale.powu(pairs as u32) * pair(&idx, w)
}

/// Gaussian-weighted integral: int F(x) exp(-(pi/s) Q(x)) D(x).
pub fn integrate(spec: &GaussianSpec, f: &Integrand, method: Method) -> Result<IntegralResult> {
    match method {
        Method::ClosedForm => closed_form(spec, f),
        Method::Quadrature => {
            let s = spec.numeric_scale()?;
            // x = sqrt(s/pi) Q^{-1/2} u turns the weight into e^{-|u|^2};
            // the normalization collapses to pi^{-n/2}
            let eig = spec.q.clone().symmetric_eigen();
            let mut t = DMatrix::zeros(spec.n, spec.n);
            for i in 0..spec.n {
                let col = eig.eigenvectors.column(i) * (s / (PI * eig.eigenvalues[i])).sqrt();
                t.set_column(i, &col);
            }
            let t = &t * eig.eigenvectors.transpose();
            let nodes = nodes_for_dim(spec.n);
            let fine = gauss_hermite_nd(spec.n, nodes, &t, &|x| f.eval(x));
            let coarse = gauss_hermite_nd(spec.n, (3 * nodes) / 4, &t, &|x| f.eval(x));
            let scale = PI.powf(-(spec.n as f64) / 2.0);
            Ok(IntegralResult::new(
                fine * scale,
                (fine - coarse).norm() * scale,
                "quadrature",
                None,
            ))
        }
        Method::MonteCarlo { samples, seed } => {
            if spec.n > 64 {
                return Err(LabError::UnsupportedMethod {
                    method: "monte_carlo".into(),
                    reason: format!("dimension {} exceeds 64", spec.n),
                });
            }
            let cov = spec.covariance()?;
            let chol = Cholesky::new(cov).ok_or_else(|| {
                LabError::InvalidParameter("covariance is not positive definite".into())
            })?;
            let l = chol.l();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mean = Complex64::default();
            let mut m2 = 0.0f64;
            for i in 0..samples {
                let z = DVector::from_fn(spec.n, |_, _| StandardNormal.sample(&mut rng));
                let x = &l * z;
                let v = f.eval(&x);
                let delta = v - mean;
                mean += delta / (i as f64 + 1.0);
                m2 += delta.norm_sqr() * (1.0 - 1.0 / (i as f64 + 1.0));
            }
            let std_err = (m2 / (samples as f64 * (samples as f64 - 1.0))).sqrt();
            Ok(IntegralResult::new(
                mean,
                std_err,
                "monte_carlo",
                Some(seed),
            ))
        }
    }
}

fn closed_form(spec: &GaussianSpec, f: &Integrand) -> Result<IntegralResult> {
    let value = match f {
        Integrand::FourierKernel { xprime } => {
            // the defining identity
            (-spec.s * PI * spec.dual_form(xprime)).exp()
        }
        Integrand::Monomial { exponents } => {
            if exponents.len() != spec.n {
                return Err(LabError::DimensionMismatch {
                    expected: spec.n,
                    got: exponents.len(),
                });
            }
            gaussian_moment_complex(&spec.w, spec.s / (2.0 * PI), exponents)
        }
        Integrand::ExpQuadLin { p, q } => {
            // combine with the weight: total form A = (2 pi / s) Q + 2 P;
            // int e^{-x A x / 2 + q.x} dx = (2 pi)^{n/2} det(A)^{-1/2}
            //                                e^{  q^T A^{-1} q / 2 }
            let s = spec.numeric_scale()?;
            let a = &spec.q * (2.0 * PI / s) + p * 2.0;
            let a_inv = a.clone().try_inverse().ok_or(LabError::SingularMap(vec![]))?;
            let det_a: f64 = a.lu().determinant();
            if det_a <= 0.0 {
                return Err(LabError::Divergence(
                    "combined quadratic form is not positive definite".into(),
                ));
            }
            let exponent = 0.5 * (q.transpose() * &a_inv * q)[(0, 0)];
            let gauss = (2.0 * PI).powf(spec.n as f64 / 2.0) * det_a.sqrt().recip()
                * exponent.exp();
            spec.normalization() * gauss
        }
        _ => {
            return Err(LabError::UnsupportedMethod {
                method: "closed_form".into(),
                reason: "no closed form for this integrand kind".into(),
            })
        }
    };
    Ok(IntegralResult::new(value, 0.0, "closed_form", None))
}

/// Bare-volume-element integral: int F(x) D(x) (no Gaussian weight).
pub fn integrate_raw(spec: &GaussianSpec, f: &Integrand, gl_panels: usize) -> Result<IntegralResult> {
    let _ = spec.numeric_scale()?;
    if let Integrand::ShiftedGaussian { alpha, .. } = f {
        // int e^{-alpha pi |x-c|^2} dx = alpha^{-n/2}
        let value = spec.normalization() * alpha.powf(-(spec.n as f64) / 2.0);
        return Ok(IntegralResult::new(value, 0.0, "closed_form", None));
    }
    let (center, radius) = f.support_radius()?;
    let rule = QuadRule::gauss_legendre(12);
    let n = spec.n;
    let panels = gl_panels.max(4);
    let total = panels.pow(n as u32);
    let width = 2.0 * radius / panels as f64;
    let mut acc = Complex64::default();
    let mut panel_idx = vec![0usize; n];
    let mut x = DVector::zeros(n);
    for flat in 0..total {
        let mut idx = flat;
        for a in 0..n {
            panel_idx[a] = idx % panels;
            idx /= panels;
        }
        // tensor GL inside the panel
        let m = rule.nodes.len();
        let sub_total = m.pow(n as u32);
        for sub in 0..sub_total {
            let mut sidx = sub;
            let mut wgt = 1.0;
            for a in 0..n {
                let i = sidx % m;
                sidx /= m;
                let lo = center[a] - radius + panel_idx[a] as f64 * width;
                x[a] = lo + 0.5 * width * (rule.nodes[i] + 1.0);
                wgt *= 0.5 * width * rule.weights[i];
            }
            acc += f.eval(&x) * wgt;
        }
    }
    Ok(IntegralResult::new(
        acc * spec.normalization(),
        f64::NAN,
        "quadrature",
        None,
    ))
}

/// |int F(x + a) D(x) - int F(x) D(x)| for an absolutely integrable F.
/// The volume element is translation invariant, so this must vanish up to
/// quadrature error.
pub fn translation_invariance_check(
    spec: &GaussianSpec,
    f: &Integrand,
    shift: &DVector<f64>,
) -> Result<f64> {
    let base = integrate_raw(spec, f, 8)?;
    let shifted = integrate_raw(spec, &f.shifted(shift)?, 8)?;
    Ok((base.value() - shifted.value()).norm())
}

/// Diffeomorphisms with analytic derivative determinants.
#[derive(Debug, Clone)]
pub enum MapKind {
    Identity,
    Scale(f64),
    Linear(DMatrix<f64>),
    /// (x1, x2) -> (x1 + alpha x2^2, x2): volume preserving shear
    TriangularShear { alpha: f64 },
}

impl MapKind {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            MapKind::Identity => x.clone(),
            MapKind::Scale(c) => x * *c,
            MapKind::Linear(a) => a * x,
            MapKind::TriangularShear { alpha } => {
                let mut y = x.clone();
                y[0] += alpha * x[1] * x[1];
                y
            }
        }
    }

    fn jacobian_det(&self, x: &DVector<f64>, n: usize) -> f64 {
        match self {
            MapKind::Identity => 1.0,
            MapKind::Scale(c) => c.powi(n as i32),
            MapKind::Linear(a) => a.clone().lu().determinant(),
            MapKind::TriangularShear { .. } => {
                let _ = x;
                1.0
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            MapKind::Scale(c) if *c == 0.0 => Err(LabError::SingularMap(vec![0.0; n])),
            MapKind::Linear(a) => {
                if a.clone().lu().determinant().abs() < 1e-14 {
                    Err(LabError::SingularMap(vec![0.0; n]))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Deviation in the change-of-variables identity
/// int F(M(x)) |Det M'(x)| D(x) = int F(y) D(y).
pub fn change_of_variables_check(
    spec: &GaussianSpec,
    map: &MapKind,
    f: &Integrand,
    gl_panels: usize,
) -> Result<f64> {
    map.validate(spec.n)?;
    if spec.n > 4 {
        return Err(LabError::UnsupportedMethod {
            method: "change_of_variables".into(),
            reason: "quadrature check limited to n <= 4".into(),
        });
    }
    let rhs = integrate_raw(spec, f, gl_panels)?.value();

    // left side: integrate F(M(x)) |det M'| over a box that covers the
    // preimage of the support
    let (center, radius) = f.support_radius()?;
    let (pre_center, pre_radius) = match map {
        MapKind::Identity => (center.clone(), radius),
        MapKind::Scale(c) => (&center / *c, radius / c.abs()),
        MapKind::Linear(a) => {
            let inv = a.clone().try_inverse().ok_or(LabError::SingularMap(vec![]))?;
            let norm_inv = inv.norm();
            (&inv * &center, radius * norm_inv * 1.5)
        }
        MapKind::TriangularShear { alpha } => {
            // preimage: x1 = y1 - alpha y2^2 with |y - c| <= radius
            let reach = alpha.abs() * (center[1].abs() + radius).powi(2);
            (center.clone(), radius + reach)
        }
    };
    let rule = QuadRule::gauss_legendre(12);
    let n = spec.n;
    let panels = gl_panels.max(4);
    let total = panels.pow(n as u32);
    let width = 2.0 * pre_radius / panels as f64;
    let m = rule.nodes.len();
    let sub_total = m.pow(n as u32);
    let mut acc = Complex64::default();
    let mut panel_idx = vec![0usize; n];
    let mut x = DVector::zeros(n);
    for flat in 0..total {
        let mut idx = flat;
        for a in 0..n {
            panel_idx[a] = idx % panels;
            idx /= panels;
        }
        for sub in 0..sub_total {
            let mut sidx = sub;
            let mut wgt = 1.0;
            for a in 0..n {
                let i = sidx % m;
                sidx /= m;
                let lo = pre_center[a] - pre_radius + panel_idx[a] as f64 * width;
                x[a] = lo + 0.5 * width * (rule.nodes[i] + 1.0);
                wgt *= 0.5 * width * rule.weights[i];
            }
            let y = map.apply(&x);
            acc += f.eval(&y) * (map.jacobian_det(&x, n).abs() * wgt);
        }
    }
    let lhs = acc * spec.normalization();
    Ok((lhs - rhs).norm())
}

/// Product-measure check on finite grids: m(E), X-iterated and Y-iterated
/// evaluations of the same rectangle-generated set.
pub fn fubini_check(mu: &[f64], nu: &[f64], subset: &[Vec<bool>]) -> Result<(f64, f64, f64)> {
    if subset.len() != mu.len() || subset.iter().any(|row| row.len() != nu.len()) {
        return Err(LabError::DimensionMismatch {
            expected: mu.len() * nu.len(),
            got: subset.iter().map(|r| r.len()).sum(),
        });
    }
    let mut direct = 0.0;
    for (i, row) in subset.iter().enumerate() {
        for (j, &inside) in row.iter().enumerate() {
            if inside {
                direct += mu[i] * nu[j];
            }
        }
    }
    let iterated_x: f64 = subset
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let slice: f64 = row
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(j, _)| nu[j])
                .sum();
            mu[i] * slice
        })
        .sum();
    let iterated_y: f64 = (0..nu.len())
        .map(|j| {
            let slice: f64 = subset
                .iter()
                .enumerate()
                .filter(|(_, row)| row[j])
                .map(|(i, _)| mu[i])
                .sum();
            nu[j] * slice
        })
        .sum();
    Ok((direct, iterated_x, iterated_y))
}

/// Involution tensor J with J^2 = 1 and the complementary projector pair
/// P_+/- = (1 +- J)/2.
#[derive(Debug, Clone)]
pub struct JTensor {
    pub n: usize,
    pub j: DMatrix<f64>,
}

impl JTensor {
    pub fn new(j: DMatrix<f64>) -> Result<Self> {
        let n = j.nrows();
        let dev = ((&j * &j) - DMatrix::identity(n, n)).amax();
        if dev > 1e-12 {
            return Err(LabError::InvalidTensor { deviation: dev });
        }
        Ok(JTensor { n, j })
    }
}

#[derive(Debug, Clone)]
pub struct ProjectorPair {
    pub plus: DMatrix<f64>,
    pub minus: DMatrix<f64>,
    /// worst deviation over idempotence, annihilation and completeness
    pub max_identity_deviation: f64,
    pub rank_plus: usize,
    pub rank_minus: usize,
}

pub fn jtensor_projectors(j: &JTensor) -> ProjectorPair {
    let id = DMatrix::<f64>::identity(j.n, j.n);
    let plus = (&id + &j.j) * 0.5;
    let minus = (&id - &j.j) * 0.5;
    let dev = ((&plus * &plus) - &plus)
        .amax()
        .max(((&minus * &minus) - &minus).amax())
        .max((&plus * &minus).amax())
        .max(((&plus + &minus) - &id).amax());
    let rank_plus = plus.trace().round() as usize;
    let rank_minus = minus.trace().round() as usize;
    ProjectorPair {
        plus,
        minus,
        max_identity_deviation: dev,
        rank_plus,
        rank_minus,
    }
}

// ---------------------------------------------------------------------------
// gauge-orbit factorization toy
// ---------------------------------------------------------------------------

/// Gauge-invariant action S(x - y) for the two-copy toy model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyAction {
    Zero,
    /// coeff * |z|^2
    Quadratic { coeff: f64 },
    /// coeff * |z|^4
    Quartic { coeff: f64 },
}

impl ToyAction {
    fn eval(&self, z: &DVector<f64>) -> f64 {
        match self {
            ToyAction::Zero => 0.0,
            ToyAction::Quadratic { coeff } => coeff * z.norm_squared(),
            ToyAction::Quartic { coeff } => coeff * z.norm_squared().powi(2),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationResult {
    pub direct: f64,
    pub factorized: f64,
    pub gauge_fixed: f64,
    pub direct_error: f64,
    pub method: String,
}

/// The two-copy partition value
///   Z = int D(x) D(y) e^{-|x+y|^2} e^{-|x-y|^2 - S(x-y)}
/// computed three ways: directly over the 2n-dimensional space; factorized
/// through z_pm = (x +- y)/2 (Jacobian dx dy = 2^n dz_+ dz_-, arguments
/// |x +- y|^2 = 4 |z_pm|^2); and with the orbit integral delta-fixed on the
/// slice x + y = 0, times the explicit gauge-volume factor
/// int dL e^{-4|L|^2} over the orbit parameter L = z_+.
pub fn gauge_toy_factorize(
    n: usize,
    action: ToyAction,
    method: Method,
) -> Result<FactorizationResult> {
    let two_n = 2.0f64.powi(n as i32);
    match method {
        Method::Quadrature => {
            if n > 3 {
                return Err(LabError::UnsupportedMethod {
                    method: "quadrature".into(),
                    reason: "direct route limited to n <= 3".into(),
                });
            }
            // direct: 2n-dim tensor Gauss-Hermite on e^{-2|x|^2 - 2|y|^2}
            let dim = 2 * n;
            let rule = QuadRule::gauss_hermite(48);
            let m = rule.nodes.len();
            let total = m.pow(dim as u32);
            let scale = 1.0 / 2.0f64.sqrt(); // u = sqrt(2) x
            let mut direct = 0.0;
            let mut x = DVector::zeros(n);
            let mut y = DVector::zeros(n);
            for flat in 0..total {
                let mut idx = flat;
                let mut wgt = 1.0;
                for a in 0..dim {
                    let i = idx % m;
                    idx /= m;
                    let v = rule.nodes[i] * scale;
                    if a < n {
                        x[a] = v;
                    } else {
                        y[a - n] = v;
                    }
                    wgt *= rule.weights[i];
                }
                let z = &x - &y;
                direct += wgt * (-action.eval(&z)).exp();
            }
            // weights absorb e^{-2|x|^2-2|y|^2}; jacobian of u = sqrt(2)x per axis
            direct *= scale.powi(dim as i32);

            let factorized = two_n * plus_factor_quadrature(n) * minus_factor_quadrature(n, action);
            let gauge_fixed = plus_factor_quadrature(n) * slice_factor_quadrature(n, action, two_n);
            Ok(FactorizationResult {
                direct,
                factorized,
                gauge_fixed,
                direct_error: 0.0,
                method: "quadrature".into(),
            })
        }
        Method::MonteCarlo { samples, seed } => {
            // importance sampling from the full Gaussian part:
            // x, y ~ N(0, I/4) each; Z = (pi/2)^n E[e^{-S(x-y)}]
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigma = 0.5;
            let norm = (PI / 2.0).powi(n as i32);
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for i in 0..samples {
                let x = DVector::from_fn(n, |_, _| {
                    sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                });
                let y = DVector::from_fn(n, |_, _| {
                    sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                });
                let v: f64 = (-action.eval(&(&x - &y))).exp();
                let delta = v - mean;
                mean += delta / (i as f64 + 1.0);
                m2 += delta * (v - mean);
            }
            let direct = norm * mean;
            let direct_error = norm * (m2 / (samples as f64 * (samples as f64 - 1.0))).sqrt();
            let factorized =
                two_n * plus_factor_quadrature(n) * minus_factor_quadrature(n, action);
            let gauge_fixed = plus_factor_quadrature(n) * slice_factor_quadrature(n, action, two_n);
            Ok(FactorizationResult {
                direct,
                factorized,
                gauge_fixed,
                direct_error,
                method: "monte_carlo".into(),
            })
        }
        Method::ClosedForm => {
            if !matches!(action, ToyAction::Zero) {
                return Err(LabError::UnsupportedMethod {
                    method: "closed_form".into(),
                    reason: "closed form available for the free action only".into(),
                });
            }
            // Z = int e^{-2|x|^2 - 2|y|^2} = (pi/2)^n
            let z = (PI / 2.0).powi(n as i32);
            Ok(FactorizationResult {
                direct: z,
                factorized: two_n * plus_factor_quadrature(n) * minus_factor_quadrature(n, action),
                gauge_fixed: plus_factor_quadrature(n)
                    * slice_factor_quadrature(n, action, two_n),
                direct_error: 0.0,
                method: "closed_form".into(),
            })
        }
    }
}

/// int dz e^{-4|z|^2} over R^n (the gauge-orbit factor).
fn plus_factor_quadrature(n: usize) -> f64 {
    // per axis: sqrt(pi)/2
    (PI.sqrt() / 2.0).powi(n as i32)
}

/// int dz e^{-4|z|^2 - S(2z)} over R^n by Gauss-Hermite (u = 2z).
fn minus_factor_quadrature(n: usize, action: ToyAction) -> f64 {
    let rule = QuadRule::gauss_hermite(64);
    let m = rule.nodes.len();
    let total = m.pow(n as u32);
    let mut acc = 0.0;
    let mut u = DVector::zeros(n);
    for flat in 0..total {
        let mut idx = flat;
        let mut wgt = 1.0;
        for a in 0..n {
            let i = idx % m;
            idx /= m;
            u[a] = rule.nodes[i];
            wgt *= rule.weights[i];
        }
        acc += wgt * (-action.eval(&u)).exp();
    }
    acc / 2.0f64.powi(n as i32)
}

/// 2^n int dy delta-slice factor: 2^n int e^{-4|y|^2 - S(-2y)} dy.
fn slice_factor_quadrature(n: usize, action: ToyAction, two_n: f64) -> f64 {
    two_n * minus_factor_quadrature(n, action)
}

// ---------------------------------------------------------------------------
// finite gauge-model measure split
// ---------------------------------------------------------------------------

/// Finite-dimensional gauge model: field space R^N with metric g, constant
/// orbit generators K (N x gauge_dim), and a linear gauge condition X A = 0.
#[derive(Debug, Clone)]
pub struct FiniteGaugeModel {
    pub n: usize,
    pub gauge_dim: usize,
    pub generators: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub condition: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureSplitResult {
    pub lhs: f64,
    pub rhs: f64,
    pub det_q: f64,
    /// |det Q| relative to the singular-value scale of X and K; small values
    /// flag a slice nearly tangent to the orbits
    pub conditioning: f64,
    pub conditioning_warning: bool,
}

/// Verify the gauge-fixed measure factorization on a finite model: for a
/// gauge-invariant Gaussian F,
///
///   int F(A) |det Q| delta(X A) sqrt(det g) dA
///     = sqrt(det gamma~) * int_H F dsigma_g,
///
/// with Q = X K the gauge-condition response, gamma~ = K^T g K the vertical
/// metric block (its volume factor is the "gauge volume" that factors out),
/// H the g-orthogonal complement of the orbit directions and dsigma_g the
/// g-induced volume on H. Both sides are computed by quadrature.
pub fn fp_measure_split(
    model: &FiniteGaugeModel,
    weight: &DMatrix<f64>,
) -> Result<MeasureSplitResult> {
    let n = model.n;
    let g = model.gauge_dim;
    let k = &model.generators;
    let met = &model.metric;
    let x = &model.condition;

    let q = x * k; // g x g
    let det_q: f64 = q.clone().lu().determinant();
    if det_q == 0.0 {
        return Err(LabError::GaugeConditionDegenerate(
            "det(X K) = 0: the slice misses orbit directions".into(),
        ));
    }
    let svd_x = x.clone().svd(false, false);
    let svd_k = k.clone().svd(false, false);
    let scale: f64 = svd_x
        .singular_values
        .iter()
        .zip(svd_k.singular_values.iter())
        .map(|(a, b)| a * b)
        .product();
    let conditioning = det_q.abs() / scale.max(1e-300);
    let conditioning_warning = conditioning < 1e-6;

    let gamma_tilde = k.transpose() * met * k;
    let det_gamma: f64 = gamma_tilde.clone().lu().determinant();
    if det_gamma <= 0.0 {
        return Err(LabError::DegenerateOrbit(
            "vertical metric block is singular".into(),
        ));
    }
    let det_g: f64 = met.clone().lu().determinant();

    // euclidean-orthonormal bases of the two slices
    let h_basis = kernel_basis(&(k.transpose() * met))?; // horizontal: ker K^T g
    let sigma_basis = kernel_basis(x)?; // gauge slice: ker X
    if h_basis.ncols() != n - g || sigma_basis.ncols() != n - g {
        return Err(LabError::DegenerateOrbit(format!(
            "slice dimension mismatch: {} vs {}",
            h_basis.ncols(),
            sigma_basis.ncols()
        )));
    }

    let f = |a: &DVector<f64>| -> f64 { (-PI * (a.transpose() * weight * a)[(0, 0)]).exp() };

    // lhs: delta(XA) collapses to the slice ker X with co-area factor
    // det(X X^T)^{-1/2}
    let det_xxt: f64 = (x * x.transpose()).lu().determinant();
    let lhs_integral = slice_integral(&sigma_basis, &f);
    let lhs = det_g.sqrt() * det_q.abs() * det_xxt.sqrt().recip() * lhs_integral;

    // rhs: vertical volume factor times the g-volume integral over H
    let det_h_gperp: f64 = (h_basis.transpose() * met * &h_basis).lu().determinant();
    let rhs_integral = slice_integral(&h_basis, &f);
    let rhs = det_gamma.sqrt() * det_h_gperp.sqrt() * rhs_integral;

    Ok(MeasureSplitResult {
        lhs,
        rhs,
        det_q,
        conditioning,
        conditioning_warning,
    })
}

/// Euclidean-orthonormal basis of ker(M) via the symmetric projector.
fn kernel_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.ncols();
    let mmt = m * m.transpose();
    let inv = mmt
        .try_inverse()
        .ok_or_else(|| LabError::DegenerateOrbit("condition rows are dependent".into()))?;
    let proj = DMatrix::identity(n, n) - m.transpose() * inv * m;
    let eig = proj.symmetric_eigen();
    let mut cols = Vec::new();
    for i in 0..n {
        if eig.eigenvalues[i] > 0.5 {
            cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Integral of f over the subspace spanned by the orthonormal columns of b,
/// in the euclidean coordinates of that basis (tensor Gauss-Hermite, the
/// weight is supplied by f itself being Gaussian).
fn slice_integral(basis: &DMatrix<f64>, f: &dyn Fn(&DVector<f64>) -> f64) -> f64 {
    let dim = basis.ncols();
    let rule = QuadRule::gauss_legendre(48);
    let half = 6.0;
    let m = rule.nodes.len();
    let total = m.pow(dim as u32);
    let mut acc = 0.0;
    let mut c = DVector::zeros(dim);
    for flat in 0..total {
        let mut idx = flat;
        let mut wgt = 1.0;
        for a in 0..dim {
            let i = idx % m;
            idx /= m;
            c[a] = half * rule.nodes[i];
            wgt *= half * rule.weights[i];
        }
        let a_point = basis * &c;
        acc += wgt * f(&a_point);
    }
    acc
}
