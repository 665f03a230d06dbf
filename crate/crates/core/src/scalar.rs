//! The regularized free scalar field: propagators dressed by momentum-space
//! test functions, the source generating functional, Wick n-point functions,
//! the mass-shell property of dressed mode sums, and finiteness of the
//! one-loop bubble with compact momentum support.
//!
//! Four-dimensional radial momentum integrals reduce to one-dimensional
//! integrals through the exact angular volume 2 pi^2. Real-signature
//! (oscillatory) quantities are evaluated pointwise only; every integrated
//! quantity runs in euclidean signature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::Grid1;
use crate::quad::{adaptive_simpson, composite_gl, simpson};
use crate::testfn::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Euclidean,
    Minkowski,
}

/// Propagator data: mass, pole regulator, radial momentum test function.
#[derive(Debug, Clone)]
pub struct PropagatorSpec {
    pub mass: f64,
    pub epsilon: f64,
    pub testfn: TestFunction,
    pub signature: Signature,
}

impl PropagatorSpec {
    pub fn new(mass: f64, epsilon: f64, testfn: TestFunction, signature: Signature) -> Result<Self> {
        if mass < 0.0 {
            return Err(LabError::InvalidParameter("mass must be >= 0".into()));
        }
        if signature == Signature::Minkowski && epsilon <= 0.0 {
            return Err(LabError::InvalidParameter(
                "real-signature propagators need a positive pole regulator".into(),
            ));
        }
        Ok(PropagatorSpec {
            mass,
            epsilon,
            testfn,
            signature,
        })
    }

    /// Radial dressing profile f(|p|), |p| the euclidean 4-norm.
    pub fn dressing(&self, p_norm: f64) -> f64 {
        self.testfn.eval_radial(p_norm)
    }
}

/// Dressed propagator value at a 4-momentum.
///
/// Euclidean: f^2(|p|) / (p^2 + m^2). Real signature: f^2(|p|) / (p^2 - m^2
/// + i eps) with p^2 = p0^2 - |p_vec|^2; the squared mass carries the -i eps
/// prescription, giving a negative imaginary part near the shell.
pub fn dressed_propagator(p: &[f64; 4], spec: &PropagatorSpec) -> Result<Complex64> {
    let euclid_sq: f64 = p.iter().map(|x| x * x).sum();
    let f2 = spec.dressing(euclid_sq.sqrt()).powi(2);
    match spec.signature {
        Signature::Euclidean => Ok(Complex64::new(f2 / (euclid_sq + spec.mass * spec.mass), 0.0)),
        Signature::Minkowski => {
            let p_sq = p[0] * p[0] - p[1] * p[1] - p[2] * p[2] - p[3] * p[3];
            let denom = Complex64::new(p_sq - spec.mass * spec.mass, spec.epsilon);
            if denom.norm() == 0.0 {
                return Err(LabError::Pole);
            }
            Ok(f2 / denom)
        }
    }
}

/// Radial source samples J~(r) on a uniform momentum grid (a real radial
/// source automatically satisfies the reality constraint J~(-p) = J~(p)*).
#[derive(Debug, Clone)]
pub struct RadialSource {
    pub grid: Grid1,
    pub values: Vec<f64>,
}

impl RadialSource {
    pub fn sample(grid: Grid1, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.sample(f);
        RadialSource { grid, values }
    }
}

/// log Z(J) = -1/2 * 2 pi^2 int r^3 J~(r)^2 f^2(r) / (r^2 + m^2) dr in
/// euclidean signature; Z(0) = 1 exactly.
pub fn log_generating_functional(source: &RadialSource, spec: &PropagatorSpec) -> Result<f64> {
    if spec.signature != Signature::Euclidean {
        return Err(LabError::UnsupportedMethod {
            method: "generating_functional".into(),
            reason: "integrated quantities run in euclidean signature only".into(),
        });
    }
    // the grid must resolve the transition shell of the dressing
    let shell = spec.testfn.outer_radius - spec.testfn.inner_radius;
    if shell.is_finite() && source.grid.step > shell / 8.0 {
        return Err(LabError::Resolution {
            spacing: source.grid.step,
            required: shell / 8.0,
        });
    }
    if source.grid.n % 2 == 0 {
        return Err(LabError::InvalidParameter(
            "radial grid needs an odd sample count for the composite rule".into(),
        ));
    }
    let m2 = spec.mass * spec.mass;
    let integrand: Vec<f64> = source
        .grid
        .points()
        .zip(&source.values)
        .map(|(r, &j)| {
            let f = spec.dressing(r);
            r.powi(3) * j * j * f * f / (r * r + m2)
        })
        .collect();
    let radial = simpson(&integrand, source.grid.step);
    Ok(-0.5 * 2.0 * std::f64::consts::PI.powi(2) * radial)
}

pub fn generating_functional(source: &RadialSource, spec: &PropagatorSpec) -> Result<Complex64> {
    Ok(Complex64::new(log_generating_functional(source, spec)?.exp(), 0.0))
}

/// Free-field n-point function over a finite list of 4-momenta: the Wick sum
/// over perfect pairings, each pair contributing the dressed propagator and
/// enforcing momentum conservation q_i + q_j = 0 within tolerance.
pub fn npoint_function(momenta: &[[f64; 4]], spec: &PropagatorSpec) -> Result<Complex64> {
    let n = momenta.len();
    if n % 2 == 1 {
        return Ok(Complex64::default());
    }
    let mut cov = vec![vec![Complex64::default(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let conserved = momenta[i]
                    .iter()
                    .zip(&momenta[j])
                    .all(|(a, b)| (a + b).abs() < 1e-12);
                if conserved {
                    cov[i][j] = dressed_propagator(&momenta[i], spec)?;
                }
            }
        }
    }
    fn wick(indices: &[usize], cov: &[Vec<Complex64>]) -> Complex64 {
        if indices.is_empty() {
            return Complex64::new(1.0, 0.0);
        }
        let first = indices[0];
        let mut acc = Complex64::default();
        for pos in 1..indices.len() {
            let partner = indices[pos];
            let c = cov[first][partner];
            if c != Complex64::default() {
                let rest: Vec<usize> = indices[1..]
                    .iter()
                    .filter(|&&k| k != partner)
                    .cloned()
                    .collect();
                acc += c * wick(&rest, cov);
            }
        }
        acc
    }
    let indices: Vec<usize> = (0..n).collect();
    Ok(wick(&indices, &cov))
}

/// On-shell plane-wave mode for the mass-shell residual check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShellMode {
    pub omega: f64,
    pub k: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl ShellMode {
    pub fn on_shell(k: f64, mass: f64, amplitude: f64, phase: f64) -> Self {
        ShellMode {
            omega: (k * k + mass * mass).sqrt(),
            k,
            amplitude,
            phase,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KgResidual {
    /// max |(box_h + m^2) phi| over interior grid points
    pub measured: f64,
    /// closed-form residual from the discrete dispersion relation
    pub oracle: f64,
    pub step: f64,
}

/// Apply the centered discrete wave operator + m^2 to a dressed on-shell
/// mode sum on an (t, x) grid of spacing h and report the residual.
///
/// Each mode satisfies omega^2 = k^2 + m^2; off-shell input is rejected.
/// The discrete symbol replaces omega^2 by (4/h^2) sin^2(omega h / 2) (and
/// likewise for k), so the residual is O(h^2) and exactly computable.
pub fn klein_gordon_residual(
    modes: &[ShellMode],
    spec: &PropagatorSpec,
    h: f64,
    extent: f64,
) -> Result<KgResidual> {
    let m2 = spec.mass * spec.mass;
    for mode in modes {
        let off = mode.omega * mode.omega - mode.k * mode.k - m2;
        if off.abs() > 1e-10 {
            return Err(LabError::OffShell { residual: off });
        }
    }
    let n = (extent / h).ceil() as usize + 1;
    let gt = Grid1 { start: 0.0, step: h, n };
    let gx = Grid1 { start: 0.0, step: h, n };
    // dressed amplitudes: the euclidean 2-norm of (omega, k) enters the
    // radial test function
    let dressed: Vec<(ShellMode, f64)> = modes
        .iter()
        .map(|m| {
            let p_norm = (m.omega * m.omega + m.k * m.k).sqrt();
            (*m, m.amplitude * spec.dressing(p_norm))
        })
        .collect();
    let phi = |t: f64, x: f64| -> f64 {
        dressed
            .iter()
            .map(|(m, a)| a * (m.omega * t - m.k * x + m.phase).cos())
            .sum()
    };
    let mut measured = 0.0f64;
    for it in 1..gt.n - 1 {
        let t = gt.point(it);
        for ix in 1..gx.n - 1 {
            let x = gx.point(ix);
            let d2t = (phi(t + h, x) - 2.0 * phi(t, x) + phi(t - h, x)) / (h * h);
            let d2x = (phi(t, x + h) - 2.0 * phi(t, x) + phi(t, x - h)) / (h * h);
            measured = measured.max((d2t - d2x + m2 * phi(t, x)).abs());
        }
    }
    // oracle: per-mode discrete dispersion residual, summed amplitudes
    let disc = |w: f64| 4.0 / (h * h) * (0.5 * w * h).sin().powi(2);
    let oracle: f64 = dressed
        .iter()
        .map(|(m, a)| (a * (-disc(m.omega) + disc(m.k) + m2)).abs())
        .sum();
    Ok(KgResidual {
        measured,
        oracle,
        step: h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TadpoleVerdict {
    Finite,
    Divergent,
}

#[derive(Debug, Clone, Serialize)]
pub struct TadpoleScan {
    /// (cutoff, integral value)
    pub values: Vec<(f64, f64)>,
    pub verdict: TadpoleVerdict,
    /// fitted d(log I)/d(log cutoff) over the last entries (divergent case)
    pub growth_exponent: Option<f64>,
    /// max relative variation across cutoffs beyond the dressing support
    pub stability: Option<f64>,
}

/// One-loop bubble 2 pi^2 int_0^L r^3 f^2(r) / (r^2 + m^2) dr per cutoff L.
/// With a compact dressing the value freezes once L exceeds the support;
/// with f == 1 it grows like L^2.
pub fn oneloop_tadpole(
    spec: &PropagatorSpec,
    cutoffs: &[f64],
    dressed: bool,
) -> Result<TadpoleScan> {
    if spec.signature != Signature::Euclidean {
        return Err(LabError::UnsupportedMethod {
            method: "oneloop_tadpole".into(),
            reason: "loop integrals run in euclidean signature".into(),
        });
    }
    let m2 = spec.mass * spec.mass;
    let angular = 2.0 * std::f64::consts::PI.powi(2);
    let values: Vec<(f64, f64)> = cutoffs
        .iter()
        .map(|&cutoff| {
            let integrand = |r: f64| {
                let f2 = if dressed {
                    spec.dressing(r).powi(2)
                } else {
                    1.0
                };
                r.powi(3) * f2 / (r * r + m2)
            };
            // panel count by cutoff keeps the rule sharp at all scales
            let panels = (cutoff * 8.0).ceil() as usize + 16;
            (cutoff, angular * composite_gl(0.0, cutoff, panels, 16, integrand))
        })
        .collect();

    let support = spec.testfn.outer_radius;
    if dressed && support.is_finite() {
        let beyond: Vec<&(f64, f64)> = values.iter().filter(|(c, _)| *c >= support).collect();
        let stability = if beyond.len() >= 2 {
            let base = beyond[0].1;
            Some(
                beyond
                    .iter()
                    .map(|(_, v)| (v - base).abs() / base.abs().max(1e-300))
                    .fold(0.0f64, f64::max),
            )
        } else {
            None
        };
        Ok(TadpoleScan {
            values,
            verdict: TadpoleVerdict::Finite,
            growth_exponent: None,
            stability,
        })
    } else {
        // log-log slope over the last pair of cutoffs
        let n = values.len();
        let growth = if n >= 2 {
            let (c0, v0) = values[n - 2];
            let (c1, v1) = values[n - 1];
            Some((v1 / v0).ln() / (c1 / c0).ln())
        } else {
            None
        };
        Ok(TadpoleScan {
            values,
            verdict: TadpoleVerdict::Divergent,
            growth_exponent: growth,
            stability: None,
        })
    }
}

/// Closed form of the undressed bubble: 2 pi^2 [L^2/2 - (m^2/2) ln(1 + L^2/m^2)].
pub fn undressed_tadpole_closed_form(mass: f64, cutoff: f64) -> f64 {
    let m2 = mass * mass;
    2.0 * std::f64::consts::PI.powi(2)
        * (0.5 * cutoff * cutoff - 0.5 * m2 * (1.0 + cutoff * cutoff / m2).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::QuadRule;
    use crate::testfn::{make_bump, Profile};
    use approx::assert_abs_diff_eq;

    fn radial_bump() -> TestFunction {
        // radial dressing: plateau to r = 1, support to r = 2
        make_bump(vec![0.0], 1.0, 2.0, Profile::StdBump).unwrap()
    }

    fn euclid_spec() -> PropagatorSpec {
        PropagatorSpec::new(1.0, 0.0, radial_bump(), Signature::Euclidean).unwrap()
    }

    #[test]
    fn euclidean_propagator_at_origin() {
        // p = 0, m = 1, f(0) = 1: value 1
        let d = dressed_propagator(&[0.0; 4], &euclid_spec()).unwrap();
        assert_eq!(d.re, 1.0);
        assert_eq!(d.im, 0.0);
    }

    #[test]
    fn propagator_vanishes_beyond_support() {
        let d = dressed_propagator(&[2.5, 0.0, 0.0, 0.0], &euclid_spec()).unwrap();
        assert_eq!(d.re, 0.0);
    }

    #[test]
    fn dressed_equals_undressed_on_plateau() {
        let spec = euclid_spec();
        let p = [0.3, 0.4, 0.1, 0.2]; // |p| < 1: f = 1 exactly
        let d = dressed_propagator(&p, &spec).unwrap();
        let p_sq: f64 = p.iter().map(|x| x * x).sum();
        assert_eq!(d.re, 1.0 / (p_sq + 1.0));
    }

    #[test]
    fn minkowski_near_shell_sign_matches_prescription() {
        let spec = PropagatorSpec::new(1.0, 1e-3, radial_bump(), Signature::Minkowski).unwrap();
        // slightly off shell: p0^2 - |p|^2 close to m^2
        let p = [1.05, 0.3, 0.1, 0.0];
        let d = dressed_propagator(&p, &spec).unwrap();
        assert!(d.im < 0.0, "imaginary part {} must be negative", d.im);
    }

    #[test]
    fn zero_source_gives_unit_functional() {
        let spec = euclid_spec();
        let grid = Grid1::new(0.0, 3.0, 301);
        let source = RadialSource::sample(grid, |_| 0.0);
        let z = generating_functional(&source, &spec).unwrap();
        assert_eq!(z.re, 1.0);
    }

    #[test]
    fn source_outside_dressing_support_gives_unit_functional() {
        let spec = euclid_spec();
        let grid = Grid1::new(0.0, 6.0, 601);
        // source supported at r > 2 where f vanishes identically
        let source = RadialSource::sample(grid, |r| if r > 2.5 { 1.0 } else { 0.0 });
        let z = generating_functional(&source, &spec).unwrap();
        assert_eq!(z.re, 1.0);
    }

    #[test]
    fn log_functional_matches_independent_radial_quadrature() {
        // J~ = f itself, m = 1
        let spec = euclid_spec();
        let grid = Grid1::new(0.0, 3.0, 1201);
        let f = radial_bump();
        let source = RadialSource::sample(grid, |r| f.eval_radial(r));
        let log_z = log_generating_functional(&source, &spec).unwrap();
        let oracle = -0.5
            * 2.0
            * std::f64::consts::PI.powi(2)
            * adaptive_simpson(
                |r| r.powi(3) * f.eval_radial(r).powi(4) / (r * r + 1.0),
                0.0,
                2.0,
                1e-13,
            );
        assert_abs_diff_eq!(log_z, oracle, epsilon = 1e-8);
        // euclidean branch: Z in (0, 1] for real sources
        let z = generating_functional(&source, &spec).unwrap();
        assert!(z.re > 0.0 && z.re <= 1.0);
    }

    #[test]
    fn under_resolved_source_grid_rejected() {
        let spec = euclid_spec();
        let grid = Grid1::new(0.0, 3.0, 11);
        let source = RadialSource::sample(grid, |_| 1.0);
        assert!(matches!(
            generating_functional(&source, &spec),
            Err(LabError::Resolution { .. })
        ));
    }

    #[test]
    fn two_point_is_the_propagator() {
        let spec = euclid_spec();
        let p = [0.5, 0.2, 0.0, 0.1];
        let minus_p = [-0.5, -0.2, 0.0, -0.1];
        let val = npoint_function(&[p, minus_p], &spec).unwrap();
        let prop = dressed_propagator(&p, &spec).unwrap();
        assert_abs_diff_eq!(val.re, prop.re, epsilon = 1e-15);
    }

    #[test]
    fn odd_npoint_vanishes() {
        let spec = euclid_spec();
        let p = [0.5, 0.0, 0.0, 0.0];
        let val = npoint_function(&[p, p, p], &spec).unwrap();
        assert_eq!(val, Complex64::default());
    }

    #[test]
    fn four_point_pairing_sum_matches_moment_oracle() {
        // two conjugate mode pairs: the four-point function must equal the
        // fourth moment of the underlying Gaussian mode amplitudes, computed
        // here by Gauss-Hermite quadrature over the real mode components
        let spec = euclid_spec();
        let p = [0.5, 0.1, 0.0, 0.0];
        let q = [0.0, 0.7, 0.2, 0.0];
        let mp = [-0.5, -0.1, 0.0, 0.0];
        let mq = [0.0, -0.7, -0.2, 0.0];
        let wick = npoint_function(&[p, mp, q, mq], &spec).unwrap();

        let dp = dressed_propagator(&p, &spec).unwrap().re;
        let dq = dressed_propagator(&q, &spec).unwrap().re;
        // phi(p) = (a + i b)/sqrt(2), phi(-p) = conj, a,b ~ N(0, D(p)):
        // E[phi(p) phi(-p) phi(q) phi(-q)] = E[(a^2+b^2)/2] * E[(c^2+d^2)/2]
        let rule = QuadRule::gauss_hermite(24);
        let norm = std::f64::consts::PI.sqrt();
        let second = |var: f64| -> f64 {
            // E[u^2] with u ~ N(0, var) via GH: u = sqrt(2 var) t
            rule.weighted_sum(|t| 2.0 * var * t * t) / norm
        };
        let oracle = second(dp) * second(dq);
        assert_abs_diff_eq!(wick.re, oracle, epsilon = 1e-12);

        // repeated pair: 2 D(p)^2 from two surviving pairings
        let rep = npoint_function(&[p, mp, p, mp], &spec).unwrap();
        let e4 = {
            // E[((a^2+b^2)/2)^2] with a,b ~ N(0,D): 2 D^2
            let e_a4 = rule.weighted_sum(|t| (2.0 * dp * t * t).powi(2)) / norm;
            let e_a2 = second(dp);
            0.25 * (2.0 * e_a4 + 2.0 * e_a2 * e_a2)
        };
        assert_abs_diff_eq!(rep.re, e4, epsilon = 1e-12);
    }

    #[test]
    fn npoint_symmetric_under_permutations() {
        let spec = euclid_spec();
        let p = [0.5, 0.1, 0.0, 0.0];
        let q = [0.0, 0.7, 0.2, 0.0];
        let mp = [-0.5, -0.1, 0.0, 0.0];
        let mq = [0.0, -0.7, -0.2, 0.0];
        let base = npoint_function(&[p, mp, q, mq], &spec).unwrap();
        let perms: [[usize; 4]; 6] = [
            [0, 1, 2, 3],
            [1, 0, 2, 3],
            [2, 3, 0, 1],
            [3, 1, 2, 0],
            [0, 2, 1, 3],
            [3, 2, 1, 0],
        ];
        let all = [p, mp, q, mq];
        for perm in perms {
            let arranged: Vec<[f64; 4]> = perm.iter().map(|&i| all[i]).collect();
            let v = npoint_function(&arranged, &spec).unwrap();
            assert_abs_diff_eq!(v.re, base.re, epsilon = 1e-14);
        }
    }

    #[test]
    fn kg_residual_single_mode_matches_dispersion_oracle() {
        let spec = euclid_spec();
        let modes = [ShellMode::on_shell(0.7, 1.0, 1.0, 0.3)];
        let out = klein_gordon_residual(&modes, &spec, 0.02, 1.0).unwrap();
        assert!(
            (out.measured - out.oracle).abs() <= 1e-8 + 1e-6 * out.oracle,
            "measured {} vs oracle {}",
            out.measured,
            out.oracle
        );
    }

    #[test]
    fn kg_residual_second_order_convergence() {
        let spec = euclid_spec();
        let modes = [
            ShellMode::on_shell(0.7, 1.0, 1.0, 0.3),
            ShellMode::on_shell(-0.4, 1.0, 0.5, 1.1),
        ];
        let coarse = klein_gordon_residual(&modes, &spec, 0.02, 1.0).unwrap();
        let fine = klein_gordon_residual(&modes, &spec, 0.01, 1.0).unwrap();
        let ratio = coarse.measured / fine.measured;
        assert!((ratio - 4.0).abs() < 0.5, "refinement ratio {ratio}");
    }

    #[test]
    fn kg_residual_massless_plane_wave_degenerate() {
        let spec = PropagatorSpec::new(0.0, 0.0, radial_bump(), Signature::Euclidean).unwrap();
        let modes = [ShellMode::on_shell(0.5, 0.0, 1.0, 0.0)];
        let out = klein_gordon_residual(&modes, &spec, 0.02, 1.0).unwrap();
        // omega = |k| with equal spacings: the discrete symbols cancel exactly
        assert!(out.measured < 1e-10, "residual {}", out.measured);
    }

    #[test]
    fn kg_rejects_off_shell_modes() {
        let spec = euclid_spec();
        let modes = [ShellMode {
            omega: 1.0,
            k: 1.0,
            amplitude: 1.0,
            phase: 0.0,
        }];
        assert!(matches!(
            klein_gordon_residual(&modes, &spec, 0.02, 1.0),
            Err(LabError::OffShell { .. })
        ));
    }

    #[test]
    fn dressed_tadpole_stable_beyond_support() {
        let spec = euclid_spec();
        let scan = oneloop_tadpole(&spec, &[4.0, 8.0, 16.0], true).unwrap();
        assert_eq!(scan.verdict, TadpoleVerdict::Finite);
        let stability = scan.stability.unwrap();
        assert!(stability < 1e-10, "relative variation {stability}");
    }

    #[test]
    fn undressed_tadpole_grows_quadratically() {
        let spec = euclid_spec();
        let scan = oneloop_tadpole(&spec, &[8.0, 16.0], false).unwrap();
        assert_eq!(scan.verdict, TadpoleVerdict::Divergent);
        let ratio = scan.values[1].1 / scan.values[0].1;
        assert!((ratio - 4.0).abs() < 0.25, "ratio {ratio}");
        let g = scan.growth_exponent.unwrap();
        assert!((g - 2.0).abs() < 0.1, "growth exponent {g}");
        // quadrature against the closed form
        for (c, v) in &scan.values {
            assert_abs_diff_eq!(*v, undressed_tadpole_closed_form(1.0, *c), epsilon = 1e-8);
        }
    }

    #[test]
    fn massless_dressed_tadpole_is_finite() {
        let spec = PropagatorSpec::new(0.0, 0.0, radial_bump(), Signature::Euclidean).unwrap();
        let scan = oneloop_tadpole(&spec, &[4.0, 8.0], true).unwrap();
        // integrand r^3/r^2 = r is integrable at the origin
        assert!(scan.values[0].1.is_finite());
        assert_eq!(scan.verdict, TadpoleVerdict::Finite);
        assert!(scan.stability.unwrap() < 1e-10);
    }
}
