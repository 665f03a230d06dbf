//! Convolution smoothing of distributions by test functions.
//!
//! Flat-space convolutions are computed along two independent routes (direct
//! quadrature and the dual-space product) which must agree within tolerance.
//! On charted curved spaces the test function is localized, transported along
//! a Killing flow, and integrated against the chart volume factor; local
//! pieces recollect into a single global field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fourier::{dft_forward, dft_inverse, fft_frequencies};
use crate::grid::Grid1;
use crate::quad::adaptive_simpson;
use crate::testfn::TestFunction;

/// Symbolic distribution content of a sampled field. Singular tags carry
/// exact data and are convolved analytically, never as sampled spikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistributionTag {
    Regular,
    /// Dirac delta at the given coordinate.
    Delta { at: f64 },
    /// Unit step along the axis, jump at 0.
    Heaviside,
    /// Finite set of plane-wave modes a_k e^{i k x}.
    ModeSet { modes: Vec<(f64, Complex64)> },
}

/// Field samples on a uniform one-dimensional grid plus symbolic tag.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub grid: Grid1,
    pub values: Vec<Complex64>,
    pub tag: DistributionTag,
}

impl SampledField {
    pub fn regular(grid: Grid1, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.n);
        SampledField {
            grid,
            values,
            tag: DistributionTag::Regular,
        }
    }

    pub fn from_fn(grid: Grid1, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(|x| Complex64::new(f(x), 0.0)).collect();
        SampledField {
            grid,
            values,
            tag: DistributionTag::Regular,
        }
    }

    pub fn delta(grid: Grid1, at: f64) -> Self {
        SampledField {
            values: vec![Complex64::default(); grid.n],
            grid,
            tag: DistributionTag::Delta { at },
        }
    }

    pub fn heaviside(grid: Grid1) -> Self {
        SampledField {
            values: vec![Complex64::default(); grid.n],
            grid,
            tag: DistributionTag::Heaviside,
        }
    }

    pub fn mode_set(grid: Grid1, modes: Vec<(f64, Complex64)>) -> Self {
        let values = grid
            .points()
            .map(|x| {
                modes
                    .iter()
                    .map(|(k, a)| a * Complex64::new(0.0, k * x).exp())
                    .sum()
            })
            .collect();
        SampledField {
            grid,
            values,
            tag: DistributionTag::ModeSet { modes },
        }
    }
}

/// Integral of a 1-d test function over its support.
pub fn mass1d(f: &TestFunction) -> f64 {
    let c = f.center[0];
    let r = f.support_radius();
    adaptive_simpson(|x| f.eval1(x), c - r, c + r, 1e-13)
}

/// Result of a flat convolution: both routes attached.
#[derive(Debug, Clone)]
pub struct ConvolvedField {
    pub grid: Grid1,
    pub direct: Vec<Complex64>,
    pub dual: Vec<Complex64>,
    pub max_route_deviation: f64,
}

impl ConvolvedField {
    /// The direct-route samples as a regular field (for further smoothing).
    pub fn as_field(&self) -> SampledField {
        SampledField::regular(self.grid.clone(), self.direct.clone())
    }
}

/// Continuous Fourier transform of the kernel at the lattice momenta.
/// Reflection-symmetric kernels have a real transform.
fn kernel_spectrum(f: &TestFunction, freqs: &[f64]) -> Vec<f64> {
    let r = f.support_radius();
    freqs
        .iter()
        .map(|&k| kernel_spectrum_at(f, k, r))
        .collect()
}

fn kernel_spectrum_at(f: &TestFunction, k: f64, r: f64) -> f64 {
    // integrate piecewise between the profile junction radii: within a piece
    // the integrand is smooth. Slow oscillation goes to the adaptive rule
    // (which resolves the flat endpoint tails); fast oscillation uses panels
    // scaled with k so modes are resolved rather than aliased.
    let c = f.center[0];
    let ri = f.inner_radius.min(r);
    let cuts = [-r, -ri, ri, r];
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // panel count covers both the oscillation (no dyadic aliasing, which
        // defeats adaptive bisection on periodic integrands) and the flat
        // profile tails at the piece endpoints
        let cycles = k.abs() * (b - a) / (2.0 * std::f64::consts::PI);
        let panels = ((3.0 * cycles).ceil() as usize).max(24).min(8000);
        acc += crate::quad::composite_gl(a, b, panels, 16, |u| f.eval1(u + c) * (k * u).cos());
    }
    acc
}

/// Direct-route convolution value at a point: (Phi * rho)(x).
fn direct_at(field: &SampledField, f: &TestFunction, x: f64) -> Complex64 {
    let c = f.center[0];
    let r = f.support_radius();
    match &field.tag {
        DistributionTag::Regular => {
            // trapezoid over the field grid; kernel rho(y - x) is analytic
            let h = field.grid.step;
            let mut acc = Complex64::default();
            for (i, y) in field.grid.points().enumerate() {
                let w = if i == 0 || i == field.grid.n - 1 { 0.5 } else { 1.0 };
                let k = f.eval1(y - x + c);
                if k != 0.0 {
                    acc += field.values[i] * (k * w);
                }
            }
            acc * h
        }
        DistributionTag::Delta { at } => Complex64::new(f.eval1(at - x + c), 0.0),
        DistributionTag::Heaviside => {
            // int_0^inf rho(y - x) dy restricted to the kernel support
            let lo = (x - r).max(0.0);
            let hi = x + r;
            let val = if hi <= 0.0 {
                0.0
            } else {
                adaptive_simpson(|y| f.eval1(y - x + c), lo, hi, 1e-13)
            };
            Complex64::new(val, 0.0)
        }
        DistributionTag::ModeSet { modes } => {
            // int e^{iky} rho(y-x) dy = e^{ikx} rho~(k) for a symmetric kernel
            modes
                .iter()
                .map(|(k, amp)| {
                    amp * Complex64::new(0.0, k * x).exp() * kernel_spectrum_at(f, *k, r)
                })
                .sum()
        }
    }
}

/// Flat-space convolution of a tagged field with a reflection-symmetric test
/// function, computed along both routes. Fails if the routes disagree beyond
/// the larger of `tol` and the grid-resolution allowance.
pub fn convolve_flat(field: &SampledField, f: &TestFunction, tol: f64) -> Result<ConvolvedField> {
    let grid = &field.grid;
    let l = grid.step * grid.n as f64; // periodic box length for the dual route
    let freqs = fft_frequencies(grid.n, l);
    let spectrum = kernel_spectrum(f, &freqs);

    // dual-space route: multiply the field spectrum by the kernel transform
    let dual: Vec<Complex64> = match &field.tag {
        DistributionTag::Regular => {
            let mut hat: Vec<Complex64> = field.values.clone();
            dft_forward(&mut hat);
            for (h, s) in hat.iter_mut().zip(&spectrum) {
                *h *= *s;
            }
            dft_inverse(&mut hat);
            hat
        }
        DistributionTag::Delta { at } => grid
            .points()
            .map(|x| {
                freqs
                    .iter()
                    .zip(&spectrum)
                    .map(|(&k, &s)| Complex64::new(0.0, k * (x - at)).exp() * (s / l))
                    .sum()
            })
            .collect(),
        DistributionTag::Heaviside => {
            // H = 1/2 + (square wave)/2 on the periodic box; odd harmonics only
            grid.points()
                .map(|x| {
                    let mut acc = Complex64::new(0.5 * spectrum[0], 0.0);
                    for (idx, (&k, &s)) in freqs.iter().zip(&spectrum).enumerate() {
                        if idx == 0 {
                            continue;
                        }
                        let m = if idx <= grid.n / 2 {
                            idx as i64
                        } else {
                            idx as i64 - grid.n as i64
                        };
                        if m.rem_euclid(2) == 0 {
                            continue;
                        }
                        let c_m = Complex64::new(0.0, -1.0 / (std::f64::consts::PI * m as f64));
                        acc += c_m * s * Complex64::new(0.0, k * x).exp();
                    }
                    acc
                })
                .collect()
        }
        DistributionTag::ModeSet { modes } => grid
            .points()
            .map(|x| {
                modes
                    .iter()
                    .map(|(k, amp)| {
                        amp * Complex64::new(0.0, k * x).exp()
                            * kernel_spectrum_at(f, *k, f.support_radius())
                    })
                    .sum()
            })
            .collect(),
    };

    let direct: Vec<Complex64> = grid.points().map(|x| direct_at(field, f, x)).collect();

    // compare away from the periodic wrap, where both routes describe the
    // same integral
    let margin = (f.support_radius() / grid.step).ceil() as usize + 2;
    let mut max_dev = 0.0f64;
    for i in margin..grid.n.saturating_sub(margin) {
        max_dev = max_dev.max((direct[i] - dual[i]).norm());
    }
    let allowance = tol.max(route_allowance(field, grid.step));
    if max_dev > allowance {
        return Err(LabError::NumericalInconsistency {
            max_dev,
            tol: allowance,
        });
    }
    Ok(ConvolvedField {
        grid: grid.clone(),
        direct,
        dual,
        max_route_deviation: max_dev,
    })
}

/// Direct-route value at a single point.
pub fn convolve_flat_at(field: &SampledField, f: &TestFunction, x: f64) -> Complex64 {
    direct_at(field, f, x)
}

/// Expected route disagreement from grid resolution: the direct route is a
/// trapezoid sum at spacing h, the dual route a truncated Fourier series.
fn route_allowance(field: &SampledField, h: f64) -> f64 {
    match field.tag {
        DistributionTag::Regular => 10.0 * h * h,
        _ => 1e-8,
    }
}

/// Direct 2-d flat convolution at a point, for cross-checking charted routes:
/// integrates field(y) rho(|y - x|) over the kernel support on a Cartesian grid.
pub fn convolve_flat_2d_at(
    grid_x: &Grid1,
    grid_y: &Grid1,
    values: &dyn Fn(f64, f64) -> f64,
    f: &TestFunction,
    x: (f64, f64),
) -> f64 {
    let mut acc = 0.0;
    for (i, gx) in grid_x.points().enumerate() {
        let wx = if i == 0 || i == grid_x.n - 1 { 0.5 } else { 1.0 };
        for (j, gy) in grid_y.points().enumerate() {
            let wy = if j == 0 || j == grid_y.n - 1 { 0.5 } else { 1.0 };
            let d = ((gx - x.0).powi(2) + (gy - x.1).powi(2)).sqrt();
            let k = f.eval_radial(d);
            if k != 0.0 {
                acc += wx * wy * values(gx, gy) * k;
            }
        }
    }
    acc * grid_x.step * grid_y.step
}

/// Max finite-difference derivative magnitudes of grid samples, orders 0..=k.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessReport {
    pub max_derivative: Vec<f64>,
    pub step: f64,
}

pub fn smoothness_report(grid: &Grid1, values: &[f64], order: usize) -> SmoothnessReport {
    let mut work: Vec<f64> = values.to_vec();
    let mut max_derivative = vec![work.iter().fold(0.0f64, |m, v| m.max(v.abs()))];
    for _ in 1..=order {
        let mut next = vec![0.0; work.len()];
        for i in 1..work.len() - 1 {
            next[i] = (work[i + 1] - work[i - 1]) / (2.0 * grid.step);
        }
        max_derivative.push(next.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        work = next;
    }
    SmoothnessReport {
        max_derivative,
        step: grid.step,
    }
}

/// Growth of derivative bounds under grid refinement. Ratios near 1 indicate
/// a genuinely smooth field; ratios growing like 2^j flag a singular one.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementVerdict {
    pub growth: Vec<f64>,
    pub bounded: bool,
}

pub fn refinement_verdict(coarse: &SmoothnessReport, fine: &SmoothnessReport) -> RefinementVerdict {
    let growth: Vec<f64> = coarse
        .max_derivative
        .iter()
        .zip(&fine.max_derivative)
        .map(|(c, f)| if *c > 0.0 { f / c } else { 1.0 })
        .collect();
    let bounded = growth.iter().all(|g| *g < 1.5);
    RefinementVerdict { growth, bounded }
}

/// Pairwise deviations between the three derivative routes.
///
/// The finite-difference route carries O(h^2) truncation error scaled by the
/// third derivative of the smoothed field; the symbolic and kernel routes
/// are quadrature-exact and must agree much more tightly.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CommutationReport {
    pub fd_vs_symbolic: f64,
    pub fd_vs_kernel: f64,
    pub symbolic_vs_kernel: f64,
}

impl CommutationReport {
    pub fn max_pairwise(&self) -> f64 {
        self.fd_vs_symbolic
            .max(self.fd_vs_kernel)
            .max(self.symbolic_vs_kernel)
    }
}

/// Deviations between d(Phi*rho), (dPhi)*rho and Phi*(drho) on the interior
/// of the grid. Kernels are reflection symmetric, so the standard
/// convolution orientation rho(x - y) is used throughout.
pub fn derivative_commutation_check(
    field: &SampledField,
    f: &TestFunction,
) -> Result<CommutationReport> {
    let grid = &field.grid;
    let c = f.center[0];
    let r = f.support_radius();

    // route 1: finite differences of the convolved samples
    let conv: Vec<Complex64> = grid.points().map(|x| direct_at(field, f, x)).collect();

    // route 3: convolve with the analytic kernel derivative
    let with_kernel_derivative = |x: f64| -> Complex64 {
        match &field.tag {
            DistributionTag::Regular => {
                let h = grid.step;
                let mut acc = Complex64::default();
                for (i, y) in grid.points().enumerate() {
                    let w = if i == 0 || i == grid.n - 1 { 0.5 } else { 1.0 };
                    let u = x - y;
                    let du = f.radial_derivative((u - c).abs()) * (u - c).signum();
                    acc += field.values[i] * (du * w);
                }
                acc * h
            }
            DistributionTag::Delta { at } => {
                let u = x - at - c;
                Complex64::new(f.radial_derivative(u.abs()) * u.signum(), 0.0)
            }
            DistributionTag::Heaviside => Complex64::new(f.eval1(x - c), 0.0),
            DistributionTag::ModeSet { modes } => modes
                .iter()
                .map(|(k, amp)| {
                    amp * Complex64::new(0.0, *k)
                        * Complex64::new(0.0, k * x).exp()
                        * kernel_spectrum_at(f, *k, r)
                })
                .sum(),
        }
    };

    // route 2: convolve the symbolic derivative of the field
    let derivative_field_at = |x: f64| -> Complex64 {
        match &field.tag {
            DistributionTag::Regular => {
                // centered differences of the samples as the field derivative
                let h = grid.step;
                let mut acc = Complex64::default();
                for i in 1..grid.n - 1 {
                    let dy = (field.values[i + 1] - field.values[i - 1]) / (2.0 * h);
                    let y = grid.point(i);
                    let k = f.eval1(y - x + c);
                    if k != 0.0 {
                        acc += dy * k * h;
                    }
                }
                acc
            }
            DistributionTag::Delta { at } => {
                // <delta', rho(x - .)> = rho'(x - at)
                let u = x - at - c;
                Complex64::new(f.radial_derivative(u.abs()) * u.signum(), 0.0)
            }
            DistributionTag::Heaviside => Complex64::new(f.eval1(x - c), 0.0),
            DistributionTag::ModeSet { modes } => modes
                .iter()
                .map(|(k, amp)| {
                    amp * Complex64::new(0.0, *k)
                        * Complex64::new(0.0, k * x).exp()
                        * kernel_spectrum_at(f, *k, r)
                })
                .sum(),
        }
    };

    let margin = (r / grid.step).ceil() as usize + 2;
    let mut rep = CommutationReport {
        fd_vs_symbolic: 0.0,
        fd_vs_kernel: 0.0,
        symbolic_vs_kernel: 0.0,
    };
    for i in margin.max(1)..grid.n.saturating_sub(margin.max(1)) {
        let x = grid.point(i);
        let d1 = (conv[i + 1] - conv[i - 1]) / (2.0 * grid.step);
        let d2 = derivative_field_at(x);
        let d3 = with_kernel_derivative(x);
        rep.fd_vs_symbolic = rep.fd_vs_symbolic.max((d1 - d2).norm());
        rep.fd_vs_kernel = rep.fd_vs_kernel.max((d1 - d3).norm());
        rep.symbolic_vs_kernel = rep.symbolic_vs_kernel.max((d2 - d3).norm());
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// charted curved spaces
// ---------------------------------------------------------------------------

/// Chart descriptors with embeddings into flat space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    /// Full circle, coordinate theta in [0, 2 pi), embedded in R^2.
    Circle,
    /// Flat interval with identity embedding.
    FlatInterval,
    /// Flat plane in polar coordinates (r, theta); volume factor r.
    Polar,
    /// Sphere patch in colatitude/azimuth (theta, phi); volume factor sin(theta).
    SpherePatch,
}

impl Chart {
    pub fn coord_dim(&self) -> usize {
        match self {
            Chart::Circle | Chart::FlatInterval => 1,
            Chart::Polar | Chart::SpherePatch => 2,
        }
    }

    pub fn embed(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Chart::Circle => vec![y[0].cos(), y[0].sin()],
            Chart::FlatInterval => vec![y[0]],
            Chart::Polar => vec![y[0] * y[1].cos(), y[0] * y[1].sin()],
            Chart::SpherePatch => vec![
                y[0].sin() * y[1].cos(),
                y[0].sin() * y[1].sin(),
                y[0].cos(),
            ],
        }
    }

    pub fn unembed(&self, e: &[f64]) -> Vec<f64> {
        match self {
            Chart::Circle => vec![e[1].atan2(e[0]).rem_euclid(2.0 * std::f64::consts::PI)],
            Chart::FlatInterval => vec![e[0]],
            Chart::Polar => vec![(e[0] * e[0] + e[1] * e[1]).sqrt(), e[1].atan2(e[0])],
            Chart::SpherePatch => {
                let r = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
                vec![(e[2] / r).acos(), e[1].atan2(e[0])]
            }
        }
    }

    /// Geodesic distance between chart points.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Chart::Circle => {
                let mut d = (a[0] - b[0]).rem_euclid(2.0 * std::f64::consts::PI);
                if d > std::f64::consts::PI {
                    d = 2.0 * std::f64::consts::PI - d;
                }
                d
            }
            Chart::FlatInterval => (a[0] - b[0]).abs(),
            Chart::Polar => {
                let ea = self.embed(a);
                let eb = self.embed(b);
                ((ea[0] - eb[0]).powi(2) + (ea[1] - eb[1]).powi(2)).sqrt()
            }
            Chart::SpherePatch => {
                let ea = self.embed(a);
                let eb = self.embed(b);
                let dot: f64 = ea.iter().zip(&eb).map(|(x, y)| x * y).sum();
                dot.clamp(-1.0, 1.0).acos()
            }
        }
    }

    /// Metric volume factor kappa at a chart point.
    pub fn volume_factor(&self, y: &[f64]) -> f64 {
        match self {
            Chart::Circle | Chart::FlatInterval => 1.0,
            Chart::Polar => y[0],
            Chart::SpherePatch => y[0].sin(),
        }
    }
}

/// Killing-vector generators in the embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FlowGenerator {
    /// Unit-speed rotation in R^2 (circle and polar charts).
    Rotation,
    /// Constant translation of the flat chart.
    Translation { direction: Vec<f64> },
    /// Azimuthal rotation of the sphere about the z axis.
    Azimuthal,
}

impl FlowGenerator {
    fn velocity(&self, e: &[f64]) -> Vec<f64> {
        match self {
            FlowGenerator::Rotation => vec![-e[1], e[0]],
            FlowGenerator::Translation { direction } => direction.clone(),
            FlowGenerator::Azimuthal => vec![-e[1], e[0], 0.0],
        }
    }
}

/// One-parameter isometry flow, integrated by a fixed-step classical
/// fourth-order scheme in the embedding space. The step is chosen so that a
/// full revolution of the circle returns points within 1e-10.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KillingFlow {
    pub generator: FlowGenerator,
    pub step: f64,
}

impl KillingFlow {
    pub fn new(generator: FlowGenerator, step: f64) -> Self {
        KillingFlow { generator, step }
    }

    /// Flow a chart point for time t (signed), returning chart coordinates.
    pub fn transport(&self, chart: &Chart, y: &[f64], t: f64) -> Vec<f64> {
        let mut e = chart.embed(y);
        let mut remaining = t.abs();
        let sign = t.signum();
        while remaining > 1e-300 {
            let dt = sign * remaining.min(self.step);
            e = rk4_step(&self.generator, &e, dt);
            remaining -= self.step;
        }
        chart.unembed(&e)
    }

    /// Distance distortion of the flow over time t, probed on a point pair.
    /// An exact isometry gives zero; the integrator leaves O(step^4).
    pub fn metric_distortion(&self, chart: &Chart, a: &[f64], b: &[f64], t: f64) -> f64 {
        let before = chart.distance(a, b);
        let fa = self.transport(chart, a, t);
        let fb = self.transport(chart, b, t);
        (chart.distance(&fa, &fb) - before).abs()
    }

    /// Return error after one full revolution of the circle.
    pub fn revolution_error(&self) -> f64 {
        let chart = Chart::Circle;
        let start = vec![0.7];
        let back = self.transport(&chart, &start, 2.0 * std::f64::consts::PI);
        chart.distance(&start, &back)
    }
}

fn rk4_step(gen: &FlowGenerator, e: &[f64], dt: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let k1 = gen.velocity(e);
    let k2 = gen.velocity(&add(e, &k1, 0.5 * dt));
    let k3 = gen.velocity(&add(e, &k2, 0.5 * dt));
    let k4 = gen.velocity(&add(e, &k3, dt));
    e.iter()
        .enumerate()
        .map(|(i, x)| x + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// One chart of an atlas: the open set (as a coordinate box), its localizer,
/// and the localization radius r fixing the shrunken sets Omega_r, Omega_2r.
#[derive(Debug, Clone)]
pub struct AtlasChart {
    pub chart: Chart,
    /// Coordinate bounds of the open set, per axis. A circle chart spanning
    /// [0, 2 pi) has no boundary and is never shrunk.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub localizer: TestFunction,
    pub loc_radius: f64,
}

impl AtlasChart {
    fn is_full_circle(&self) -> bool {
        matches!(self.chart, Chart::Circle)
            && (self.hi[0] - self.lo[0] - 2.0 * std::f64::consts::PI).abs() < 1e-12
    }

    /// Is p inside the set shrunken by the margin (Omega_margin)?
    /// Periodic coordinate axes have no boundary and are never shrunk.
    pub fn contains_shrunken(&self, p: &[f64], margin: f64) -> bool {
        if self.is_full_circle() {
            return true;
        }
        let periodic = |axis: usize| match self.chart {
            Chart::Polar | Chart::SpherePatch => axis == 1,
            _ => false,
        };
        p.iter()
            .enumerate()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|((axis, x), (a, b))| {
                periodic(axis) || (*x >= a + margin && *x <= b - margin)
            })
    }
}

#[derive(Debug, Clone)]
pub struct ChartAtlas {
    pub charts: Vec<AtlasChart>,
}

/// Field sampled on a chart: tensor grid of chart coordinates.
#[derive(Debug, Clone)]
pub struct ChartField {
    pub chart: Chart,
    pub axes: Vec<Grid1>,
    /// row-major over the axes (first axis fastest)
    pub values: Vec<f64>,
}

impl ChartField {
    pub fn sample(chart: Chart, axes: Vec<Grid1>, f: impl Fn(&[f64]) -> f64) -> Self {
        let total: usize = axes.iter().map(|g| g.n).product();
        let mut values = Vec::with_capacity(total);
        let mut y = vec![0.0; axes.len()];
        for flat in 0..total {
            let mut idx = flat;
            for (a, g) in axes.iter().enumerate() {
                y[a] = g.point(idx % g.n);
                idx /= g.n;
            }
            values.push(f(&y));
        }
        ChartField {
            chart,
            axes,
            values,
        }
    }
}

/// Local convolution on a charted space: the localized test function is
/// transported along the flow from its anchor to the evaluation point, then
/// integrated against the field with the chart volume factor.
///
/// `anchor` is the chart point where the test function is centered and `t`
/// the flow time with flow(t, anchor) = p, supplied by the caller's geometry
/// (rotations: the angle difference; translations: the displacement).
#[allow(clippy::too_many_arguments)]
pub fn convolve_local(
    field: &ChartField,
    atlas: &ChartAtlas,
    chart_index: usize,
    f: &TestFunction,
    flow: &KillingFlow,
    anchor: &[f64],
    t: f64,
    p: &[f64],
) -> Result<f64> {
    let ac = &atlas.charts[chart_index];
    let r = f.support_radius();
    if !ac.contains_shrunken(p, 2.0 * ac.loc_radius) {
        return Err(LabError::ChartDomain { point: p.to_vec() });
    }
    // the localizer must be identically one over the test-function support
    if ac.localizer.inner_radius < r - 1e-12 {
        return Err(LabError::InvalidGeometry(format!(
            "localizer plateau {} does not cover the test-function support {r}",
            ac.localizer.inner_radius
        )));
    }

    let chart = &field.chart;
    let total: usize = field.axes.iter().map(|g| g.n).product();
    let mut acc = 0.0;
    let mut y = vec![0.0; field.axes.len()];
    let periodic_axis = |a: usize| -> bool {
        match chart {
            Chart::Circle => a == 0,
            Chart::Polar | Chart::SpherePatch => a == 1,
            Chart::FlatInterval => false,
        }
    };
    // the flow is an isometry up to integrator error, so only points within
    // the kernel support of p (plus a margin) can contribute
    let reach = 1.05 * r + 4.0 * flow.step;
    for flat in 0..total {
        let mut idx = flat;
        let mut weight = 1.0;
        for (a, g) in field.axes.iter().enumerate() {
            let i = idx % g.n;
            y[a] = g.point(i);
            idx /= g.n;
            if !periodic_axis(a) && (i == 0 || i == g.n - 1) {
                weight *= 0.5;
            }
        }
        if chart.distance(&y, p) > reach {
            continue;
        }
        // pull the integration point back along the flow
        let back = flow.transport(chart, &y, -t);
        let d_anchor = chart.distance(&back, anchor);
        let k = f.eval_radial(d_anchor);
        if k == 0.0 {
            continue;
        }
        let loc = ac
            .localizer
            .eval_radial(chart.distance(&back, &ac.localizer.center));
        acc += weight * field.values[flat] * loc * k * chart.volume_factor(&y);
    }
    let cell: f64 = field.axes.iter().map(|g| g.step).product();
    Ok(acc * cell)
}

/// Deviation between local convolutions computed with two localizer choices
/// whose plateaus both cover the transported test-function support.
#[allow(clippy::too_many_arguments)]
pub fn localizer_independence_check(
    field: &ChartField,
    atlas_a: &ChartAtlas,
    atlas_b: &ChartAtlas,
    chart_index: usize,
    f: &TestFunction,
    flow: &KillingFlow,
    anchor: &[f64],
    t: f64,
    p: &[f64],
) -> Result<f64> {
    let va = convolve_local(field, atlas_a, chart_index, f, flow, anchor, t, p)?;
    let vb = convolve_local(field, atlas_b, chart_index, f, flow, anchor, t, p)?;
    Ok((va - vb).abs())
}

/// A local piece: samples on an integer sublattice of a shared global grid.
#[derive(Debug, Clone)]
pub struct LocalPiece {
    /// index of the first sample on the global lattice
    pub offset: i64,
    pub values: Vec<f64>,
}

/// Glue compatible local pieces into a single field on the union lattice.
///
/// Pieces must agree within `tol` at shared lattice points; the output
/// restricted to any piece reproduces that piece's values at its points
/// (first-listed piece wins on overlaps, so exact overlap agreement means
/// exact reproduction for all pieces).
pub fn recollect(pieces: &[LocalPiece], lattice_step: f64, tol: f64) -> Result<(i64, Vec<f64>)> {
    if pieces.is_empty() {
        return Err(LabError::InvalidParameter("no pieces to recollect".into()));
    }
    let lo = pieces.iter().map(|p| p.offset).min().unwrap();
    let hi = pieces
        .iter()
        .map(|p| p.offset + p.values.len() as i64)
        .max()
        .unwrap();
    let mut out: Vec<Option<f64>> = vec![None; (hi - lo) as usize];

    let mut worst = 0.0f64;
    let mut worst_at = 0i64;
    for piece in pieces {
        for (j, v) in piece.values.iter().enumerate() {
            let g = (piece.offset + j as i64 - lo) as usize;
            match out[g] {
                None => out[g] = Some(*v),
                Some(existing) => {
                    let dev = (existing - v).abs();
                    if dev > worst {
                        worst = dev;
                        worst_at = piece.offset + j as i64;
                    }
                }
            }
        }
    }
    if worst > tol {
        return Err(LabError::Incompatibility {
            point: vec![worst_at as f64 * lattice_step],
            deviation: worst,
        });
    }
    if out.iter().any(|v| v.is_none()) {
        return Err(LabError::Coverage(
            "pieces do not cover a contiguous lattice range".into(),
        ));
    }
    Ok((lo, out.into_iter().map(|v| v.unwrap()).collect()))
}
