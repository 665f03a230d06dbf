//! Smooth rapidly-decreasing test functions, compact-support bumps, and
//! partitions of unity subordinate to ball covers.
//!
//! Bumps are radial: identically 1 inside the inner radius, identically 0
//! outside the outer radius, with a fixed transition profile in between.
//! Plateau and zero values are exact by construction, not approximate.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fourier::{continuous_ft, Convention};
use crate::grid::{BoxDomain, Grid1};

/// Named transition profiles on [0, 1]: value 1 at t = 0, value 0 at t >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// t -> exp(1 - 1/(1 - t^2)), the standard compact-support mollifier
    /// profile rescaled to the transition shell.
    #[default]
    StdBump,
    /// Smoothstep built from exp(-1/t); C-infinity at both shell boundaries.
    Smoothstep,
}

impl Profile {
    /// Evaluate the profile at t in [0, 1].
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::StdBump => (1.0 - 1.0 / (1.0 - t * t)).exp(),
            Profile::Smoothstep => {
                let g = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
                let a = g(1.0 - t);
                a / (a + g(t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Bump,
    Gaussian,
    PuMember,
}

/// Open ball (interval in d = 1) used as a cover element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }

    /// Interval (a, b) as a one-dimensional ball.
    pub fn from_interval(a: f64, b: f64) -> Self {
        Ball {
            center: vec![0.5 * (a + b)],
            radius: 0.5 * (b - a),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        norm(x, &self.center) < self.radius
    }
}

fn norm(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
struct PuEnvelope {
    bumps: Vec<TestFunction>,
}

/// A scalar test function with exact plateau/support radii.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub dimension: usize,
    pub kind: Kind,
    pub center: Vec<f64>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub profile: Profile,
    pub tensor_rank: usize,
    /// Gaussian width (Gaussian kind only).
    width: f64,
    /// Sibling bumps (PU member kind only).
    envelope: Option<Arc<PuEnvelope>>,
    member_index: usize,
}

impl TestFunction {
    pub fn gaussian(dimension: usize, center: Vec<f64>, width: f64) -> Result<Self> {
        if width <= 0.0 {
            return Err(LabError::InvalidGeometry("gaussian width must be positive".into()));
        }
        Ok(TestFunction {
            dimension,
            kind: Kind::Gaussian,
            center,
            inner_radius: 0.0,
            outer_radius: f64::INFINITY,
            profile: Profile::StdBump,
            tensor_rank: 0,
            width,
            envelope: None,
            member_index: 0,
        })
    }

    /// Evaluate at a point of matching dimension.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        match self.kind {
            Kind::Bump => {
                let s = norm(x, &self.center);
                if s <= self.inner_radius {
                    1.0
                } else if s >= self.outer_radius {
                    0.0
                } else {
                    self.profile
                        .eval((s - self.inner_radius) / (self.outer_radius - self.inner_radius))
                }
            }
            Kind::Gaussian => {
                let s = norm(x, &self.center);
                (-std::f64::consts::PI * (s / self.width).powi(2)).exp()
            }
            Kind::PuMember => {
                let env = self.envelope.as_ref().expect("pu member carries its envelope");
                let num = env.bumps[self.member_index].evaluate(x);
                if num == 0.0 {
                    0.0
                } else {
                    let den: f64 = env.bumps.iter().map(|b| b.evaluate(x)).sum();
                    num / den
                }
            }
        }
    }

    /// Convenience for d = 1.
    pub fn eval1(&self, x: f64) -> f64 {
        self.evaluate(&[x])
    }

    /// Radial evaluation at distance `s` from the center (used for
    /// momentum-space test functions depending on p^2 only).
    pub fn eval_radial(&self, s: f64) -> f64 {
        match self.kind {
            Kind::Bump => {
                if s <= self.inner_radius {
                    1.0
                } else if s >= self.outer_radius {
                    0.0
                } else {
                    self.profile
                        .eval((s - self.inner_radius) / (self.outer_radius - self.inner_radius))
                }
            }
            Kind::Gaussian => (-std::f64::consts::PI * (s / self.width).powi(2)).exp(),
            Kind::PuMember => {
                debug_assert_eq!(self.dimension, 1);
                self.eval1(s)
            }
        }
    }

    /// Analytic radial derivative d/ds, available for bump kinds.
    pub fn radial_derivative(&self, s: f64) -> f64 {
        match self.kind {
            Kind::Bump => {
                if s <= self.inner_radius || s >= self.outer_radius {
                    0.0
                } else {
                    let span = self.outer_radius - self.inner_radius;
                    let t = (s - self.inner_radius) / span;
                    match self.profile {
                        Profile::StdBump => {
                            let d = 1.0 - t * t;
                            self.profile.eval(t) * (-2.0 * t / (d * d)) / span
                        }
                        Profile::Smoothstep => {
                            // central difference; profile derivative has no
                            // convenient closed form worth maintaining
                            let h = 1e-6;
                            (self.eval_radial(s + h) - self.eval_radial(s - h)) / (2.0 * h)
                        }
                    }
                }
            }
            Kind::Gaussian => {
                let pi = std::f64::consts::PI;
                -2.0 * pi * s / (self.width * self.width) * self.eval_radial(s)
            }
            Kind::PuMember => {
                let h = 1e-6;
                (self.eval_radial(s + h) - self.eval_radial(s - h)) / (2.0 * h)
            }
        }
    }

    /// Half-width of the effective support, measured from the center.
    pub fn support_radius(&self) -> f64 {
        match self.kind {
            Kind::Bump => self.outer_radius,
            // e^{-pi (s/w)^2} < 1e-18 beyond ~3.64 w
            Kind::Gaussian => 3.7 * self.width,
            Kind::PuMember => self
                .envelope
                .as_ref()
                .map(|e| e.bumps[self.member_index].outer_radius)
                .unwrap_or(0.0),
        }
    }
}

/// Construct a compact-support bump: identically 1 on the inner ball,
/// identically 0 outside the outer ball.
pub fn make_bump(center: Vec<f64>, r: f64, big_r: f64, profile: Profile) -> Result<TestFunction> {
    if !(r > 0.0 && big_r > r) {
        return Err(LabError::InvalidGeometry(format!(
            "need 0 < r < R, got r = {r}, R = {big_r}"
        )));
    }
    Ok(TestFunction {
        dimension: center.len(),
        kind: Kind::Bump,
        center,
        inner_radius: r,
        outer_radius: big_r,
        profile,
        tensor_rank: 0,
        width: 0.0,
        envelope: None,
        member_index: 0,
    })
}

/// A partition of unity subordinate to a ball cover of a box domain.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub members: Vec<TestFunction>,
    pub cover: Vec<Ball>,
    pub domain: BoxDomain,
}

/// Build the partition of unity f_j = b_j / sum_k b_k over the cover.
///
/// `plateau_fraction` fixes each bump's inner radius as a fraction of its
/// ball radius. The domain is scanned on `scan_points` points per axis; a
/// point where the bump sum vanishes fails with an uncovered-point error.
pub fn make_pu(
    cover: &[Ball],
    domain: &BoxDomain,
    profile: Profile,
    plateau_fraction: f64,
    scan_points: usize,
) -> Result<PartitionOfUnity> {
    if cover.is_empty() {
        return Err(LabError::InvalidGeometry("empty cover".into()));
    }
    if !(0.0 < plateau_fraction && plateau_fraction < 1.0) {
        return Err(LabError::InvalidParameter(
            "plateau_fraction must lie in (0, 1)".into(),
        ));
    }
    let dim = domain.dim();
    for ball in cover {
        if ball.center.len() != dim {
            return Err(LabError::DimensionMismatch {
                expected: dim,
                got: ball.center.len(),
            });
        }
    }
    let bumps: Vec<TestFunction> = cover
        .iter()
        .map(|b| {
            make_bump(
                b.center.clone(),
                plateau_fraction * b.radius,
                b.radius,
                profile,
            )
        })
        .collect::<Result<_>>()?;
    let envelope = Arc::new(PuEnvelope { bumps });

    // coverage scan: the denominator must stay positive on the whole domain
    scan_for_gaps(&envelope, domain, scan_points)?;

    let members = (0..cover.len())
        .map(|j| TestFunction {
            dimension: dim,
            kind: Kind::PuMember,
            center: cover[j].center.clone(),
            inner_radius: plateau_fraction * cover[j].radius,
            outer_radius: cover[j].radius,
            profile,
            tensor_rank: 0,
            width: 0.0,
            envelope: Some(envelope.clone()),
            member_index: j,
        })
        .collect();

    Ok(PartitionOfUnity {
        members,
        cover: cover.to_vec(),
        domain: domain.clone(),
    })
}

fn scan_for_gaps(env: &PuEnvelope, domain: &BoxDomain, scan_points: usize) -> Result<()> {
    let dim = domain.dim();
    let axes: Vec<Grid1> = (0..dim)
        .map(|a| Grid1::new(domain.lo[a], domain.hi[a], scan_points))
        .collect();
    let total: usize = scan_points.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for flat in 0..total {
        let mut idx = flat;
        for a in 0..dim {
            x[a] = axes[a].point(idx % scan_points);
            idx /= scan_points;
        }
        let s: f64 = env.bumps.iter().map(|b| b.evaluate(&x)).sum();
        if s == 0.0 {
            return Err(LabError::UncoveredPoint { point: x });
        }
    }
    Ok(())
}

impl PartitionOfUnity {
    /// Max deviation of sum_j f_j from 1 over a fresh scan of the domain.
    pub fn unity_deviation(&self, scan_points: usize) -> f64 {
        let dim = self.domain.dim();
        let axes: Vec<Grid1> = (0..dim)
            .map(|a| Grid1::new(self.domain.lo[a], self.domain.hi[a], scan_points))
            .collect();
        let total: usize = scan_points.pow(dim as u32);
        let mut worst = 0.0f64;
        let mut x = vec![0.0; dim];
        for flat in 0..total {
            let mut idx = flat;
            for a in 0..dim {
                x[a] = axes[a].point(idx % scan_points);
                idx /= scan_points;
            }
            let s: f64 = self.members.iter().map(|m| m.evaluate(&x)).sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }
}

/// Fourier transform of a one-dimensional test function, sampled on the
/// requested momentum grid.
///
/// The spatial sampling is chosen internally from the support; the momentum
/// grid must satisfy the Nyquist condition `dp <= pi / L` where `L` is the
/// half-support width, so that the transform is resolved by its samples.
pub fn fourier_transform(
    f: &TestFunction,
    momenta: &Grid1,
    conv: Convention,
) -> Result<Vec<Complex64>> {
    if f.dimension != 1 {
        return Err(LabError::DimensionMismatch {
            expected: 1,
            got: f.dimension,
        });
    }
    let half_width = f.support_radius();
    let required = std::f64::consts::PI / half_width;
    if momenta.step > required {
        return Err(LabError::Resolution {
            spacing: momenta.step,
            required,
        });
    }
    let c = f.center[0];
    let pad = 0.05 * half_width.max(1.0);
    // spatial resolution fine enough for the largest requested momentum
    let p_max = momenta
        .points()
        .fold(0.0f64, |m, p| m.max(p.abs()))
        .max(1.0);
    let scale = match conv {
        Convention::Angular => 1.0,
        Convention::Symmetric => 2.0 * std::f64::consts::PI,
    };
    let mut n = 1usize << 12;
    let span = 2.0 * (half_width + pad);
    while span / n as f64 > std::f64::consts::PI / (8.0 * scale * p_max) {
        n *= 2;
        if n > (1 << 22) {
            break;
        }
    }
    let grid = Grid1::new(c - half_width - pad, c + half_width + pad, n + 1);
    let vals = grid.sample(|x| f.eval1(x));
    let ps: Vec<f64> = momenta.points().collect();
    Ok(continuous_ft(&grid, &vals, &ps, conv))
}

/// Spectral modes of a field: pairs (momentum, amplitude).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralModes {
    pub modes: Vec<(f64, f64)>,
}

/// Report of the idempotence check f^n vs f for a PU member.
#[derive(Debug, Clone, Serialize)]
pub struct PuPowerReport {
    /// Points where the member equals exactly 1 or 0 and f^n == f exactly.
    pub exact_points: usize,
    /// Max |f^n - f| over transition points (expected nonzero).
    pub max_transition_deviation: f64,
    /// Max dressing difference f vs f^n over modes lying in the plateau.
    pub plateau_dressing_deviation: Option<f64>,
}

/// Check where powers of a PU member coincide with the member itself, and
/// that dressing a field whose spectrum sits in the plateau is unchanged.
pub fn pu_power_check(
    pu: &PartitionOfUnity,
    member: usize,
    n: u32,
    field: Option<&SpectralModes>,
    scan_points: usize,
) -> Result<PuPowerReport> {
    if n < 2 {
        return Err(LabError::InvalidParameter("power must be >= 2".into()));
    }
    let f = pu
        .members
        .get(member)
        .ok_or_else(|| LabError::OutOfRange(format!("member {member}")))?;
    if pu.domain.dim() != 1 {
        return Err(LabError::DimensionMismatch {
            expected: 1,
            got: pu.domain.dim(),
        });
    }
    let grid = Grid1::new(pu.domain.lo[0], pu.domain.hi[0], scan_points);
    let mut exact_points = 0usize;
    let mut max_dev = 0.0f64;
    for x in grid.points() {
        let v = f.eval1(x);
        let vn = v.powi(n as i32);
        if v == 1.0 || v == 0.0 {
            // plateau and zero regions reproduce exactly
            if vn == v {
                exact_points += 1;
            }
        } else {
            max_dev = max_dev.max((v - vn).abs());
        }
    }
    let plateau_dressing_deviation = field.map(|modes| {
        modes
            .modes
            .iter()
            .filter(|(k, _)| f.eval1(*k) == 1.0)
            .map(|(k, a)| {
                let dressed_once = a * f.eval1(*k);
                let dressed_n = a * f.eval1(*k).powi(n as i32);
                (dressed_once - dressed_n).abs()
            })
            .fold(0.0f64, f64::max)
    });
    Ok(PuPowerReport {
        exact_points,
        max_transition_deviation: max_dev,
        plateau_dressing_deviation,
    })
}

/// A rank-1 (covector-valued) test function f_mu(p) = f(|p|) c_mu.
#[derive(Debug, Clone)]
pub struct TensorTestFunction {
    pub scalar: TestFunction,
    pub coeffs: Vec<f64>,
}

/// Componentwise application of a momentum-dependent projector family to a
/// rank-1 test function, sampled at the given momenta.
pub struct ProjectedTensor {
    pub momenta: Vec<Vec<f64>>,
    /// components[i][mu] at momenta[i]
    pub components: Vec<Vec<f64>>,
}

pub fn horizontal_project(
    f: &TensorTestFunction,
    projector: impl Fn(&[f64]) -> DMatrix<f64>,
    momenta: &[Vec<f64>],
) -> Result<ProjectedTensor> {
    let m = f.coeffs.len();
    let mut components = Vec::with_capacity(momenta.len());
    for p in momenta {
        let pr = projector(p);
        if pr.ncols() != m || pr.nrows() != m {
            return Err(LabError::DimensionMismatch {
                expected: m,
                got: pr.ncols(),
            });
        }
        let pnorm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scalar = f.scalar.eval_radial(pnorm);
        let comp: Vec<f64> = (0..m)
            .map(|mu| (0..m).map(|nu| pr[(mu, nu)] * f.coeffs[nu] * scalar).sum())
            .collect();
        components.push(comp);
    }
    Ok(ProjectedTensor {
        momenta: momenta.to_vec(),
        components,
    })
}

/// Finite-difference derivative magnitudes of a 1-d test function up to
/// order k, as a numerical proxy for smoothness and rapid decrease.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    /// max |d^j f| over the grid, j = 0..=k
    pub max_abs: Vec<f64>,
    /// sup over grid of (1+|x|)^m |f(x)| for m = 0..=k (rapid decrease proxy)
    pub weighted_sup: Vec<f64>,
}

pub fn derivative_bound_report(f: &TestFunction, grid: &Grid1, order: usize) -> DerivativeReport {
    let mut layer: Vec<f64> = grid.sample(|x| f.eval1(x));
    let points: Vec<f64> = grid.points().collect();
    let mut max_abs = vec![layer.iter().fold(0.0f64, |m, v| m.max(v.abs()))];
    let mut work = layer.clone();
    for _ in 1..=order {
        let mut next = vec![0.0; work.len()];
        for i in 1..work.len() - 1 {
            next[i] = (work[i + 1] - work[i - 1]) / (2.0 * grid.step);
        }
        max_abs.push(next.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        work = next;
    }
    let weighted_sup = (0..=order)
        .map(|m| {
            points
                .iter()
                .zip(&layer)
                .map(|(x, v)| (1.0 + x.abs()).powi(m as i32) * v.abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    layer.clear();
    DerivativeReport {
        max_abs,
        weighted_sup,
    }
}

/// Serializable description of a test function (the shared JSON schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub dimension: usize,
    pub kind: Kind,
    pub center: Vec<f64>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub transition_profile: Profile,
    #[serde(default)]
    pub tensor_rank: usize,
    #[serde(default)]
    pub width: Option<f64>,
}

impl TestFunctionSpec {
    pub fn build(&self) -> Result<TestFunction> {
        match self.kind {
            Kind::Bump => {
                let mut f = make_bump(
                    self.center.clone(),
                    self.inner_radius,
                    self.outer_radius,
                    self.transition_profile,
                )?;
                f.tensor_rank = self.tensor_rank;
                Ok(f)
            }
            Kind::Gaussian => TestFunction::gaussian(
                self.dimension,
                self.center.clone(),
                self.width.ok_or_else(|| {
                    LabError::InvalidParameter("gaussian kind needs a width".into())
                })?,
            ),
            Kind::PuMember => Err(LabError::InvalidParameter(
                "PU members are built through make_pu".into(),
            )),
        }
    }
}

impl From<&TestFunction> for TestFunctionSpec {
    fn from(f: &TestFunction) -> Self {
        TestFunctionSpec {
            dimension: f.dimension,
            kind: f.kind,
            center: f.center.clone(),
            inner_radius: f.inner_radius,
            outer_radius: f.outer_radius,
            transition_profile: f.profile,
            tensor_rank: f.tensor_rank,
            width: if matches!(f.kind, Kind::Gaussian) {
                Some(f.width)
            } else {
                None
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bump_plateau_and_zero_are_exact() {
        let f = make_bump(vec![0.0], 1.0, 2.0, Profile::StdBump).unwrap();
        assert_eq!(f.eval1(0.0), 1.0);
        assert_eq!(f.eval1(0.999), 1.0);
        assert_eq!(f.eval1(2.5), 0.0);
        assert_eq!(f.eval1(-2.0), 0.0);
    }

    #[test]
    fn bump_transition_strictly_decreasing() {
        let f = make_bump(vec![0.0], 1.0, 2.0, Profile::StdBump).unwrap();
        let v = f.eval1(1.5);
        assert!(v > 0.0 && v < 1.0, "transition value {v} out of (0,1)");
        // monotone in |x| on [r, R], checked by dense sampling
        let mut prev = 1.0;
        for i in 0..=400 {
            let x = 1.0 + i as f64 * (1.0 / 400.0);
            let cur = f.eval1(x);
            assert!(cur <= prev + 1e-15, "not monotone at x = {x}");
            prev = cur;
        }
    }

    #[test]
    fn bump_rejects_bad_radii() {
        assert!(make_bump(vec![0.0], 2.0, 2.0, Profile::StdBump).is_err());
        assert!(make_bump(vec![0.0], 3.0, 2.0, Profile::StdBump).is_err());
    }

    #[test]
    fn pu_sums_to_one_and_single_chart_region_is_exact() {
        let cover = vec![Ball::from_interval(-1.0, 2.0), Ball::from_interval(1.0, 4.0)];
        let domain = BoxDomain::new(vec![0.0], vec![3.0]);
        let pu = make_pu(&cover, &domain, Profile::StdBump, 0.5, 1 << 10).unwrap();
        let s = pu.members[0].eval1(1.5) + pu.members[1].eval1(1.5);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        // x = 0 lies only in the first cover element and on its plateau
        assert_eq!(pu.members[0].eval1(0.0), 1.0);
        assert_eq!(pu.members[1].eval1(0.0), 0.0);
        assert!(pu.unity_deviation(1 << 10) < 1e-12);
    }

    #[test]
    fn pu_reports_cover_gap_with_location() {
        let cover = vec![Ball::from_interval(-1.0, 2.0), Ball::from_interval(2.5, 4.0)];
        let domain = BoxDomain::new(vec![0.0], vec![4.0]);
        match make_pu(&cover, &domain, Profile::StdBump, 0.5, 1 << 10) {
            Err(LabError::UncoveredPoint { point }) => {
                assert!(point[0] > 2.0 && point[0] < 2.5, "gap point {point:?}");
            }
            other => panic!("expected uncovered-point error, got {other:?}"),
        }
    }

    #[test]
    fn pu_power_plateau_exact_transition_reported() {
        let cover = vec![Ball::from_interval(-1.0, 2.0), Ball::from_interval(1.0, 4.0)];
        let domain = BoxDomain::new(vec![0.0], vec![3.0]);
        let pu = make_pu(&cover, &domain, Profile::StdBump, 0.5, 512).unwrap();
        let field = SpectralModes {
            modes: vec![(0.1, 1.0), (0.3, 0.5)],
        };
        let rep = pu_power_check(&pu, 0, 3, Some(&field), 512).unwrap();
        assert!(rep.exact_points > 0);
        assert!(rep.max_transition_deviation > 0.0);
        assert!(rep.plateau_dressing_deviation.unwrap() < 1e-12);
    }

    #[test]
    fn fourier_gaussian_closed_form() {
        // exp(-pi x^2) transforms to exp(-pi p^2) under the symmetric convention
        let f = TestFunction::gaussian(1, vec![0.0], 1.0).unwrap();
        let momenta = Grid1::new(-2.0, 2.0, 65);
        let ft = fourier_transform(&f, &momenta, Convention::Symmetric).unwrap();
        for (p, v) in momenta.points().zip(&ft) {
            let expect = (-std::f64::consts::PI * p * p).exp();
            assert_abs_diff_eq!(v.re, expect, epsilon = 1e-8);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fourier_reflection_symmetric_is_real_and_matches_mass() {
        let f = make_bump(vec![0.0], 1.0, 2.0, Profile::StdBump).unwrap();
        let momenta = Grid1::new(-3.0, 3.0, 129);
        let ft = fourier_transform(&f, &momenta, Convention::Angular).unwrap();
        for v in &ft {
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
        // f~(0) equals the integral of f, checked against trapezoid quadrature
        let grid = Grid1::new(-2.5, 2.5, 1 << 12);
        let mass = crate::quad::trapezoid(&grid.sample(|x| f.eval1(x)), grid.step);
        let mid = momenta.n / 2;
        assert_abs_diff_eq!(ft[mid].re, mass, epsilon = 1e-9);
    }

    #[test]
    fn fourier_rejects_underresolved_momentum_grid() {
        let f = make_bump(vec![0.0], 1.0, 2.0, Profile::StdBump).unwrap();
        // spacing 4 over support half-width 2 violates dp <= pi/2
        let momenta = Grid1::new(-8.0, 8.0, 5);
        assert!(matches!(
            fourier_transform(&f, &momenta, Convention::Angular),
            Err(LabError::Resolution { .. })
        ));
    }

    #[test]
    fn projected_tensor_idempotent_under_second_application() {
        let scalar = make_bump(vec![0.0], 1.0, 2.0, Profile::StdBump).unwrap();
        let f = TensorTestFunction {
            scalar,
            coeffs: vec![1.0, 1.0, 1.0, 1.0],
        };
        // transverse projector in euclidean signature
        let proj = |p: &[f64]| {
            let p2: f64 = p.iter().map(|x| x * x).sum();
            DMatrix::from_fn(4, 4, |i, j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                delta - p[i] * p[j] / p2
            })
        };
        let momenta = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.3, 0.4, 0.5, 0.6]];
        let once = horizontal_project(&f, proj, &momenta).unwrap();
        // apply the projector to the projected components again
        for (p, comp) in once.momenta.iter().zip(&once.components) {
            let pr = proj(p);
            for mu in 0..4 {
                let twice: f64 = (0..4).map(|nu| pr[(mu, nu)] * comp[nu]).sum();
                assert_abs_diff_eq!(twice, comp[mu], epsilon = 1e-12);
            }
        }
        // p = e_0 kills exactly the first component of a constant covector
        let first = &once.components[0];
        let scalar_val = f.scalar.eval_radial(1.0);
        assert_abs_diff_eq!(first[0], 0.0, epsilon = 1e-15);
        for mu in 1..4 {
            assert_abs_diff_eq!(first[mu], scalar_val, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivative_report_is_finite() {
        let f = make_bump(vec![0.0], 1.0, 2.0, Profile::StdBump).unwrap();
        let grid = Grid1::new(-3.0, 3.0, 1 << 10);
        let rep = derivative_bound_report(&f, &grid, 4);
        assert_eq!(rep.max_abs.len(), 5);
        assert!(rep.max_abs.iter().all(|v| v.is_finite()));
        assert!(rep.weighted_sup.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn spec_roundtrip() {
        let f = make_bump(vec![0.5], 1.0, 2.0, Profile::Smoothstep).unwrap();
        let spec = TestFunctionSpec::from(&f);
        let json = serde_json::to_string(&spec).unwrap();
        let back: TestFunctionSpec = serde_json::from_str(&json).unwrap();
        let g = back.build().unwrap();
        assert_eq!(g.eval1(1.7), f.eval1(1.7));
    }
}
