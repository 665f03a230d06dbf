//! Gauge-theoretic linear algebra and geometry: compact Lie algebras with
//! their structure constants, transverse and orbit projectors, background
//! gauge conditions and the gauge-response operator at constant background,
//! unit-sphere frame fields and the fibration maps, and a toy model of the
//! orbit-space connection.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convolve::{DistributionTag, SampledField};
use crate::error::{LabError, Result};
use crate::fourier::fft_frequencies;
use crate::grid::Grid1;
use crate::testfn::TestFunction;

type CMatrix = DMatrix<Complex64>;

/// Max entry magnitude of a complex matrix.
fn cmax(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraName {
    U1,
    Su2,
    Su3,
}

/// Anti-hermitian generators normalized by Tr(T_a T_b) = -1/2 delta_ab,
/// with the structure constants extracted from the commutators.
#[derive(Debug, Clone)]
pub struct LieAlgebraData {
    pub name: AlgebraName,
    pub dim: usize,
    pub generators: Vec<CMatrix>,
    /// f[a][b][c] with [T_a, T_b] = f^c_ab T_c
    pub f: Vec<Vec<Vec<f64>>>,
}

fn cm(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli() -> Vec<CMatrix> {
    vec![
        CMatrix::from_row_slice(2, 2, &[cm(0., 0.), cm(1., 0.), cm(1., 0.), cm(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[cm(0., 0.), cm(0., -1.), cm(0., 1.), cm(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[cm(1., 0.), cm(0., 0.), cm(0., 0.), cm(-1., 0.)]),
    ]
}

fn gell_mann() -> Vec<CMatrix> {
    let z = cm(0., 0.);
    let o = cm(1., 0.);
    let i = cm(0., 1.);
    let s = 1.0 / 3.0f64.sqrt();
    vec![
        CMatrix::from_row_slice(3, 3, &[z, o, z, o, z, z, z, z, z]),
        CMatrix::from_row_slice(3, 3, &[z, -i, z, i, z, z, z, z, z]),
        CMatrix::from_row_slice(3, 3, &[o, z, z, z, -o, z, z, z, z]),
        CMatrix::from_row_slice(3, 3, &[z, z, o, z, z, z, o, z, z]),
        CMatrix::from_row_slice(3, 3, &[z, z, -i, z, z, z, i, z, z]),
        CMatrix::from_row_slice(3, 3, &[z, z, z, z, z, o, z, o, z]),
        CMatrix::from_row_slice(3, 3, &[z, z, z, z, z, -i, z, i, z]),
        CMatrix::from_row_slice(
            3,
            3,
            &[cm(s, 0.), z, z, z, cm(s, 0.), z, z, z, cm(-2.0 * s, 0.)],
        ),
    ]
}

/// Build the named algebra: generators T_a = -(i/2) (sigma_a | lambda_a) and
/// structure constants from f_abc = -2 Tr([T_a, T_b] T_c).
pub fn structure_constants(name: AlgebraName) -> Result<LieAlgebraData> {
    let half_i = cm(0.0, -0.5);
    let generators: Vec<CMatrix> = match name {
        AlgebraName::U1 => {
            // single 1x1 anti-hermitian generator with Tr(T^2) = -1/2
            vec![CMatrix::from_row_slice(1, 1, &[cm(0.0, -1.0 / 2.0f64.sqrt())])]
        }
        AlgebraName::Su2 => pauli().into_iter().map(|s| s * half_i).collect(),
        AlgebraName::Su3 => gell_mann().into_iter().map(|s| s * half_i).collect(),
    };
    let dim = generators.len();

    // normalization audit
    for (a, ta) in generators.iter().enumerate() {
        for (b, tb) in generators.iter().enumerate() {
            let tr = (ta * tb).trace();
            let expect = if a == b { -0.5 } else { 0.0 };
            if (tr.re - expect).abs() > 1e-12 || tr.im.abs() > 1e-12 {
                return Err(LabError::InvalidParameter(format!(
                    "generator normalization broken at ({a},{b}): {tr}"
                )));
            }
        }
    }

    // f_abc from the trace formula
    let mut f = vec![vec![vec![0.0; dim]; dim]; dim];
    for a in 0..dim {
        for b in 0..dim {
            let comm = &generators[a] * &generators[b] - &generators[b] * &generators[a];
            for c in 0..dim {
                let tr = (&comm * &generators[c]).trace();
                // [T_a,T_b] = f^c_ab T_c and Tr(T_c T_d) = -delta_cd / 2
                let val = -2.0 * tr.re;
                if tr.im.abs() > 1e-12 {
                    return Err(LabError::InvalidParameter(
                        "structure constants must be real for compact algebras".into(),
                    ));
                }
                f[a][b][c] = val;
            }
        }
    }

    let data = LieAlgebraData {
        name,
        dim,
        generators,
        f,
    };
    data.verify()?;
    Ok(data)
}

impl LieAlgebraData {
    /// Total antisymmetry, commutator reconstruction and the Jacobi identity.
    pub fn verify(&self) -> Result<()> {
        let d = self.dim;
        let f = &self.f;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    worst = worst
                        .max((f[a][b][c] + f[b][a][c]).abs())
                        .max((f[a][b][c] + f[a][c][b]).abs());
                }
            }
        }
        if worst > 1e-12 {
            return Err(LabError::NumericalInconsistency {
                max_dev: worst,
                tol: 1e-12,
            });
        }
        // commutator reconstruction
        let mut comm_dev = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut rhs = CMatrix::zeros(self.generators[0].nrows(), self.generators[0].ncols());
                for c in 0..d {
                    rhs += &self.generators[c] * cm(f[a][b][c], 0.0);
                }
                let lhs = &self.generators[a] * &self.generators[b]
                    - &self.generators[b] * &self.generators[a];
                comm_dev = comm_dev.max(cmax(&(lhs - rhs)));
            }
        }
        if comm_dev > 1e-12 {
            return Err(LabError::NumericalInconsistency {
                max_dev: comm_dev,
                tol: 1e-12,
            });
        }
        // Jacobi identity on the constants
        let mut jac = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut s = 0.0;
                        for x in 0..d {
                            s += f[b][c][x] * f[a][x][e]
                                + f[c][a][x] * f[b][x][e]
                                + f[a][b][x] * f[c][x][e];
                        }
                        jac = jac.max(s.abs());
                    }
                }
            }
        }
        if jac > 1e-12 {
            return Err(LabError::NumericalInconsistency {
                max_dev: jac,
                tol: 1e-12,
            });
        }
        Ok(())
    }

    /// su(2) adjoint cross action: (ad_x y)^a = f^a_bc x^b y^c.
    pub fn adjoint_bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    // f[b][c][a] = f^a_bc
                    out[a] += self.f[b][c][a] * x[b] * y[c];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSignature {
    Euclidean,
    Minkowski,
}

/// Transverse projector P(p) = delta - p p / p^2 (euclidean) or with mixed
/// indices in the real signature; annihilates the momentum direction.
pub fn u1_transverse_projector(p: &[f64; 4], signature: MetricSignature) -> Result<DMatrix<f64>> {
    let p_sq: f64 = match signature {
        MetricSignature::Euclidean => p.iter().map(|x| x * x).sum(),
        MetricSignature::Minkowski => p[0] * p[0] - p[1] * p[1] - p[2] * p[2] - p[3] * p[3],
    };
    if p_sq == 0.0 {
        return Err(LabError::InvalidParameter(
            "transverse projector is singular at p = 0 (and on the light cone)".into(),
        ));
    }
    let metric = match signature {
        MetricSignature::Euclidean => [1.0, 1.0, 1.0, 1.0],
        MetricSignature::Minkowski => [1.0, -1.0, -1.0, -1.0],
    };
    // mixed-index form P^mu_nu = delta - p^mu p_nu / p^2 (idempotent)
    Ok(DMatrix::from_fn(4, 4, |mu, nu| {
        let delta = if mu == nu { 1.0 } else { 0.0 };
        let p_upper = metric[mu] * p[mu];
        delta - p_upper * p[nu] * metric[nu] * metric[nu] / p_sq
    }))
}

/// Orbit/physical splitting of R^N under constant generators K and metric g:
/// the orbit projector K gamma~^{-1} K^T g and its complement.
#[derive(Debug, Clone)]
pub struct SplitProjectors {
    pub horizontal: DMatrix<f64>,
    pub vertical: DMatrix<f64>,
    pub max_identity_deviation: f64,
    pub vertical_trace: f64,
}

pub fn horizontal_vertical_split(
    k: &DMatrix<f64>,
    metric: &DMatrix<f64>,
) -> Result<SplitProjectors> {
    let n = k.nrows();
    let gamma = k.transpose() * metric * k;
    let gamma_inv = gamma
        .try_inverse()
        .ok_or_else(|| LabError::DegenerateOrbit("vertical metric block is singular".into()))?;
    let vertical = k * gamma_inv * k.transpose() * metric;
    let horizontal = DMatrix::identity(n, n) - &vertical;
    let dev = ((&vertical * &vertical) - &vertical)
        .amax()
        .max(((&horizontal * &horizontal) - &horizontal).amax())
        .max((&horizontal * &vertical).amax())
        .max((&horizontal * k).amax());
    Ok(SplitProjectors {
        vertical_trace: vertical.trace(),
        horizontal,
        vertical,
        max_identity_deviation: dev,
    })
}

/// Dual one-forms omega = F^{-1} K^T g with F = K^T g K: checks
/// omega . K = identity and the idempotence of 1 - K omega.
#[derive(Debug, Clone)]
pub struct OneFormReport {
    pub omega: DMatrix<f64>,
    pub duality_deviation: f64,
    pub projector_deviation: f64,
}

pub fn one_form_duality_check(k: &DMatrix<f64>, metric: &DMatrix<f64>) -> Result<OneFormReport> {
    let g_dim = k.ncols();
    let f = k.transpose() * metric * k;
    let f_inv = f
        .try_inverse()
        .ok_or_else(|| LabError::DegenerateOrbit("orbit form is singular".into()))?;
    let omega = f_inv * k.transpose() * metric;
    let duality_deviation = ((&omega * k) - DMatrix::identity(g_dim, g_dim)).amax();
    let pi = DMatrix::identity(k.nrows(), k.nrows()) - k * &omega;
    let projector_deviation = ((&pi * &pi) - &pi).amax();
    Ok(OneFormReport {
        omega,
        duality_deviation,
        projector_deviation,
    })
}

// ---------------------------------------------------------------------------
// gauge transformation of smoothed fields (one-dimensional flat chart)
// ---------------------------------------------------------------------------

/// Band-limited su(2)-valued field on a periodic chart: component functions
/// A^a(x) = sum_j c_j cos(k_j x + phi_j).
#[derive(Debug, Clone)]
pub struct BandField {
    pub modes: [Vec<(f64, f64, f64)>; 3],
}

impl BandField {
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, modes) in self.modes.iter().enumerate() {
            out[a] = modes.iter().map(|(c, k, ph)| c * (k * x + ph).cos()).sum();
        }
        out
    }

    pub fn eval_derivative(&self, x: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, modes) in self.modes.iter().enumerate() {
            out[a] = modes
                .iter()
                .map(|(c, k, ph)| -c * k * (k * x + ph).sin())
                .sum();
        }
        out
    }

    pub fn max_momentum(&self) -> f64 {
        self.modes
            .iter()
            .flat_map(|m| m.iter().map(|(_, k, _)| k.abs()))
            .fold(0.0, f64::max)
    }
}

/// su(2) group element U = exp(v^a T_a), T_a = -(i/2) sigma_a, in closed
/// form: U = cos(t/2) - i sin(t/2) n.sigma with t = |v|, n = v/t.
fn su2_exp(v: [f64; 3]) -> [[Complex64; 2]; 2] {
    let t = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if t < 1e-300 {
        return [[cm(1., 0.), cm(0., 0.)], [cm(0., 0.), cm(1., 0.)]];
    }
    let (c, s) = ((0.5 * t).cos(), (0.5 * t).sin());
    let n = [v[0] / t, v[1] / t, v[2] / t];
    // -i s (n . sigma) + c I
    [
        [cm(c, -s * n[2]), cm(-s * n[1], -s * n[0])],
        [cm(s * n[1], -s * n[0]), cm(c, s * n[2])],
    ]
}

fn mat_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[cm(0., 0.); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

/// Components of a traceless anti-hermitian matrix in the T_a basis:
/// M = M^a T_a with M^a = -2 Tr(M T_a).
fn su2_components(m: &[[Complex64; 2]; 2]) -> [f64; 3] {
    // T_a = -(i/2) sigma_a; M^a = i Tr(M sigma_a)
    let tr_m_s1 = m[0][1] + m[1][0];
    let tr_m_s2 = (m[0][1] - m[1][0]) * Complex64::i();
    let tr_m_s3 = m[0][0] - m[1][1];
    [
        (Complex64::i() * tr_m_s1).re,
        (Complex64::i() * tr_m_s2).re,
        (Complex64::i() * tr_m_s3).re,
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeTransformCheck {
    /// max-norm difference between transform-then-smooth and the smoothed
    /// first-order transform
    pub deviation: f64,
    pub amplitude: f64,
}

/// Compare the exact gauge transform of the bare field followed by momentum
/// smoothing against the first-order transform of the smoothed field,
/// A - (dv + [A, v]), with all fields band-limited inside the dressing
/// plateau. The residual is O(|v|^2) plus the spectral tail.
pub fn gauge_transform_convoluted(
    a_field: &BandField,
    v_field: &BandField,
    amplitude: f64,
    f: &TestFunction,
    n_grid: usize,
    box_length: f64,
) -> Result<GaugeTransformCheck> {
    let algebra = structure_constants(AlgebraName::Su2)?;
    let grid = Grid1::periodic(0.0, box_length, n_grid);
    let t_a: Vec<[[Complex64; 2]; 2]> = (0..3)
        .map(|a| {
            let g = &algebra.generators[a];
            [[g[(0, 0)], g[(0, 1)]], [g[(1, 0)], g[(1, 1)]]]
        })
        .collect();

    // exact transform of the bare field, sampled on the grid:
    // A' = U A U^dag + U dU^dag with U = exp(v)
    let mut transformed: Vec<[f64; 3]> = Vec::with_capacity(n_grid);
    let fd = 1e-6 * box_length / n_grid as f64;
    for x in grid.points() {
        let a_val = a_field.eval(x);
        let v_val = {
            let raw = v_field.eval(x);
            [raw[0] * amplitude, raw[1] * amplitude, raw[2] * amplitude]
        };
        let u = su2_exp(v_val);
        let udag = dagger(&u);
        let mut a_mat = [[cm(0., 0.); 2]; 2];
        for a in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    a_mat[i][j] += t_a[a][i][j] * a_val[a];
                }
            }
        }
        let conjugated = mat_mul(&mat_mul(&u, &a_mat), &udag);
        // U dU^dag by a high-order central difference of the exact U(x)
        let u_plus = {
            let raw = v_field.eval(x + fd);
            su2_exp([raw[0] * amplitude, raw[1] * amplitude, raw[2] * amplitude])
        };
        let u_minus = {
            let raw = v_field.eval(x - fd);
            su2_exp([raw[0] * amplitude, raw[1] * amplitude, raw[2] * amplitude])
        };
        let mut du_dag = [[cm(0., 0.); 2]; 2];
        let dpl = dagger(&u_plus);
        let dmi = dagger(&u_minus);
        for i in 0..2 {
            for j in 0..2 {
                du_dag[i][j] = (dpl[i][j] - dmi[i][j]) / cm(2.0 * fd, 0.0);
            }
        }
        let maurer = mat_mul(&u, &du_dag);
        let mut total = [[cm(0., 0.); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                total[i][j] = conjugated[i][j] + maurer[i][j];
            }
        }
        transformed.push(su2_components(&total));
    }

    // smooth the transformed components in momentum space
    let freqs = fft_frequencies(n_grid, box_length);
    let mut smoothedysis: Vec<[f64; 3]> = vec![[0.0; 3]; n_grid];
    for a in 0..3 {
        let mut hat: Vec<Complex64> = transformed
            .iter()
            .map(|c| Complex64::new(c[a], 0.0))
            .collect();
        crate::fourier::dft_forward(&mut hat);
        for (h, &k) in hat.iter_mut().zip(&freqs) {
            *h *= f.eval_radial(k.abs());
        }
        crate::fourier::dft_inverse(&mut hat);
        for (i, v) in hat.iter().enumerate() {
            smoothedysis[i][a] = v.re;
        }
    }

    // first-order transform of the smoothed field: the band-limited modes
    // sit inside the dressing plateau, so smoothing acts as the identity
    let mut deviation = 0.0f64;
    for (i, x) in grid.points().enumerate() {
        let a_val = a_field.eval(x);
        let v_val = v_field.eval(x);
        let dv = v_field.eval_derivative(x);
        let bracket = algebra.adjoint_bracket(&a_val, &v_val);
        for a in 0..3 {
            let first_order = a_val[a] - amplitude * (dv[a] + bracket[a]);
            deviation = deviation.max((smoothedysis[i][a] - first_order).abs());
        }
    }
    Ok(GaugeTransformCheck {
        deviation,
        amplitude,
    })
}

/// Exact abelian checks: a constant gauge shift leaves the smoothed field
/// unchanged; a linear parameter shifts it by the constant gradient.
pub fn abelian_gauge_shift(field: &SampledField, f: &TestFunction, slope: f64) -> Result<f64> {
    // v(x) = slope * x: the first-order transform subtracts d v = slope
    // exactly for any symmetric normalized kernel; report the worst
    // deviation of (A - dv) * rho from (A * rho) - slope * mass.
    // The mass is the lattice sum so the comparison is quadrature-exact.
    let out = crate::convolve::convolve_flat(field, f, 1e-6)?;
    let mass: f64 =
        field.grid.points().map(|y| f.eval1(y)).sum::<f64>() * field.grid.step;
    let shifted_values: Vec<Complex64> = field
        .values
        .iter()
        .map(|v| v - cm(slope, 0.0))
        .collect();
    let shifted = SampledField {
        grid: field.grid.clone(),
        values: shifted_values,
        tag: DistributionTag::Regular,
    };
    let out_shifted = crate::convolve::convolve_flat(&shifted, f, 1e-6)?;
    let margin = (f.support_radius() / field.grid.step).ceil() as usize + 2;
    let mut dev = 0.0f64;
    for i in margin..field.grid.n - margin {
        let expect = out.direct[i] - cm(slope * mass, 0.0);
        dev = dev.max((out_shifted.direct[i] - expect).norm());
    }
    Ok(dev)
}

// ---------------------------------------------------------------------------
// background gauge condition and the gauge-response operator
// ---------------------------------------------------------------------------

/// chi^a = sum_mu d_mu A^a_mu + f^a_bc A_bg^b_mu A^c_mu on a periodic 2-d
/// grid with central differences, for su(2) fields.
pub struct QuantumField2d {
    pub n: usize,
    pub box_length: f64,
    /// values[mu][a][site], site = ix + n*iy
    pub values: Vec<Vec<Vec<f64>>>,
}

/// Build a random transverse quantum field: fill lattice modes with seeded
/// coefficients and project each mode onto the kernel of the gauge-condition
/// symbol at constant background (continuum derivative symbol i k).
pub fn projected_quantum_field(
    n: usize,
    box_length: f64,
    a_bg: &[[f64; 2]; 3],
    seed: u64,
) -> QuantumField2d {
    use rand::Rng as _;
    use rand::SeedableRng as _;
    let freqs = fft_frequencies(n, box_length);
    let dim = 6; // (a, mu)
    let mut hat: Vec<Vec<Vec<Complex64>>> =
        vec![vec![vec![Complex64::default(); n * n]; 3]; 2];
    for iy in 0..n {
        for ix in 0..n {
            // fill half-space; conjugate partners enforce a real field
            let conj_site = ((n - ix) % n) + n * ((n - iy) % n);
            let site = ix + n * iy;
            if site > conj_site {
                continue;
            }
            let k = [freqs[ix], freqs[iy]];
            if k[0].abs() > 6.0 || k[1].abs() > 6.0 {
                continue; // band limit
            }
            // coefficients keyed by the integer mode so refining the lattice
            // samples the same continuum field
            let mx = if ix <= n / 2 { ix as i64 } else { ix as i64 - n as i64 };
            let my = if iy <= n / 2 { iy as i64 } else { iy as i64 - n as i64 };
            let mode_key = seed
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(((mx + 128) as u64) << 16)
                .wrapping_add((my + 128) as u64);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mode_key);
            // gauge-condition symbol M: 3 x 6, M^a_(c mu) = i k_mu delta +
            // f^a_bc A_bg^b_mu
            let mut m = CMatrix::zeros(3, dim);
            for a in 0..3 {
                for c in 0..3 {
                    for mu in 0..2 {
                        let col = c * 2 + mu;
                        let mut val = Complex64::default();
                        if a == c {
                            val += Complex64::new(0.0, k[mu]);
                        } else {
                            // su(2): f^a_bc = epsilon_abc
                            let b = 3 - a - c; // the remaining index
                            let sign = epsilon(a, b, c);
                            val += Complex64::new(sign * a_bg[b][mu], 0.0);
                        }
                        m[(a, col)] = val;
                    }
                }
            }
            // kernel projector Pi = 1 - M^dag (M M^dag)^+ M
            let mmt = &m * m.adjoint();
            let pinv = pseudo_inverse3(&mmt);
            let pi = DMatrix::<Complex64>::identity(dim, dim) - m.adjoint() * pinv * &m;
            let raw = DVector::<Complex64>::from_fn(dim, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let proj = pi * raw;
            for c in 0..3 {
                for mu in 0..2 {
                    hat[mu][c][site] = proj[c * 2 + mu];
                    hat[mu][c][conj_site] = proj[c * 2 + mu].conj();
                }
            }
            if site == conj_site {
                // self-conjugate mode must be real
                for c in 0..3 {
                    for mu in 0..2 {
                        hat[mu][c][site] = Complex64::new(hat[mu][c][site].re, 0.0);
                    }
                }
            }
        }
    }
    // inverse transform to position space (2-d FFT by rows and columns)
    let mut values = vec![vec![vec![0.0; n * n]; 3]; 2];
    for mu in 0..2 {
        for a in 0..3 {
            let mut data = hat[mu][a].clone();
            ifft2(&mut data, n);
            for (s, v) in data.iter().enumerate() {
                values[mu][a][s] = v.re;
            }
        }
    }
    QuantumField2d {
        n,
        box_length,
        values,
    }
}

fn epsilon(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn pseudo_inverse3(m: &CMatrix) -> CMatrix {
    // 3x3 hermitian pseudo-inverse via eigendecomposition of the hermitian
    // matrix, with a relative threshold on small eigenvalues
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut inv_s = CMatrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-10 * smax.max(1e-30) {
            inv_s[(i, i)] = Complex64::new(1.0 / s, 0.0);
        }
    }
    vt.adjoint() * inv_s * u.adjoint()
}

fn ifft2(data: &mut [Complex64], n: usize) {
    use rustfft::FftPlanner;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    // rows
    for row in 0..n {
        fft.process(&mut data[row * n..(row + 1) * n]);
    }
    // columns
    let mut col = vec![Complex64::default(); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
    let scale = 1.0 / (n * n) as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Max-norm of the background gauge condition on the lattice, evaluated with
/// central differences. For a field projected with the continuum symbol the
/// residual is pure discretization, O(h^2).
pub fn landau_dewitt_residual(field: &QuantumField2d, a_bg: &[[f64; 2]; 3]) -> f64 {
    let n = field.n;
    let h = field.box_length / n as f64;
    let mut worst = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            for a in 0..3 {
                let mut chi = 0.0;
                // divergence by central differences
                let xp = (ix + 1) % n + n * iy;
                let xm = (ix + n - 1) % n + n * iy;
                chi += (field.values[0][a][xp] - field.values[0][a][xm]) / (2.0 * h);
                let yp = ix + n * ((iy + 1) % n);
                let ym = ix + n * ((iy + n - 1) % n);
                chi += (field.values[1][a][yp] - field.values[1][a][ym]) / (2.0 * h);
                // f^a_bc A_bg^b . A^c
                let site = ix + n * iy;
                for b in 0..3 {
                    for c in 0..3 {
                        let e = epsilon(a, b, c);
                        if e != 0.0 {
                            for mu in 0..2 {
                                chi += e * a_bg[b][mu] * field.values[mu][c][site];
                            }
                        }
                    }
                }
                worst = worst.max(chi.abs());
            }
        }
    }
    worst
}

/// The antisymmetry identity: the gauge variation of chi^a chi_a vanishes
/// because delta chi = -f xi chi contracts two equal vectors.
pub fn gauge_variation_of_condition_norm(chi: &[f64; 3], xi: &[f64; 3]) -> f64 {
    let mut total = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                total += -2.0 * epsilon(a, b, c) * chi[a] * xi[b] * chi[c];
            }
        }
    }
    total
}

// ---------------------------------------------------------------------------
// gauge-response blocks at constant background
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSymbol {
    /// i k (diagonalizes the continuum operator)
    Continuum,
    /// i sin(k h)/h (diagonalizes the central-difference stencil)
    CentralDifference { spacing: f64 },
}

impl DerivativeSymbol {
    fn eval(&self, k: f64) -> Complex64 {
        match self {
            DerivativeSymbol::Continuum => Complex64::new(0.0, k),
            DerivativeSymbol::CentralDifference { spacing } => {
                Complex64::new(0.0, (k * spacing).sin() / spacing)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FpBlocks {
    /// momenta and 3x3 blocks per lattice mode
    pub momenta: Vec<[f64; 4]>,
    pub blocks: Vec<CMatrix>,
    /// sum of log |det| over modes with nonvanishing dressing, zero mode
    /// excluded and reported separately
    pub log_det: f64,
    pub zero_mode_excluded: bool,
    /// modes where the dressing is nonzero but the block is singular
    pub degenerate_modes: Vec<[f64; 4]>,
}

/// Per-mode gauge-response blocks at constant su(2) background:
/// B(k) = -(D_mu + F_mu)(D^mu + F^mu) f(|k|), with D_mu the chosen
/// derivative symbol and (F_mu)_ac = f_abc A_bg^b_mu the background cross
/// action. The log-determinant accumulates over the momentum grid in fixed
/// mode order.
pub fn faddeev_popov_blocks(
    a_bg: &[[f64; 4]; 3],
    n: usize,
    box_length: f64,
    f: &TestFunction,
    symbol: DerivativeSymbol,
) -> Result<FpBlocks> {
    let freqs = fft_frequencies(n, box_length);
    let mut momenta = Vec::with_capacity(n * n * n * n);
    let mut blocks = Vec::with_capacity(n * n * n * n);
    let mut log_det = 0.0f64;
    let mut degenerate = Vec::new();
    for i3 in 0..n {
        for i2 in 0..n {
            for i1 in 0..n {
                for i0 in 0..n {
                    let k = [freqs[i0], freqs[i1], freqs[i2], freqs[i3]];
                    let k_norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let dressing = f.eval_radial(k_norm);
                    let mut block = CMatrix::zeros(3, 3);
                    if dressing != 0.0 {
                        // M_mu = D(k_mu) I + F_mu; B = -sum_mu M_mu M_mu * f
                        for mu in 0..4 {
                            let d = symbol.eval(k[mu]);
                            let mut m_mu = CMatrix::zeros(3, 3);
                            for a in 0..3 {
                                m_mu[(a, a)] = d;
                                for c in 0..3 {
                                    if a != c {
                                        let b = 3 - a - c;
                                        m_mu[(a, c)] +=
                                            Complex64::new(epsilon(a, b, c) * a_bg[b][mu], 0.0);
                                    }
                                }
                            }
                            block -= &m_mu * &m_mu;
                        }
                        block *= Complex64::new(dressing, 0.0);
                    }
                    let is_zero_mode = k.iter().all(|&x| x == 0.0)
                        && a_bg.iter().flatten().all(|&x| x == 0.0);
                    if dressing != 0.0 && !is_zero_mode {
                        let det = det3(&block);
                        if det.norm() < 1e-14 {
                            degenerate.push(k);
                        } else {
                            log_det += det.norm().ln();
                        }
                    }
                    momenta.push(k);
                    blocks.push(block);
                }
            }
        }
    }
    Ok(FpBlocks {
        momenta,
        blocks,
        log_det,
        zero_mode_excluded: true,
        degenerate_modes: degenerate,
    })
}

fn det3(m: &CMatrix) -> Complex64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Independent lattice oracle: apply the real-space central-difference
/// operator to a plane wave basis at one site and read off the 3x3 block.
/// The operator is built from shift stencils and the background cross
/// action, never from the momentum-space formula.
pub fn lattice_fp_block_oracle(
    a_bg: &[[f64; 4]; 3],
    k: &[f64; 4],
    spacing: f64,
    f: &TestFunction,
) -> CMatrix {
    let k_norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dressing = f.eval_radial(k_norm);
    // nabla phi at x = 0 for phi(x) = e^{i k.x} v: central difference along
    // each axis plus the background bracket
    let plane = |x: &[f64; 4]| -> Complex64 {
        Complex64::new(0.0, k.iter().zip(x).map(|(a, b)| a * b).sum()).exp()
    };
    let mut block = CMatrix::zeros(3, 3);
    for c_in in 0..3 {
        // v = e_{c_in}; compute (nabla* nabla phi)^a at the origin
        // first nabla phi: (d_mu + F_mu) phi, a lattice field per (c, mu)
        // evaluated where the second application needs it
        let nabla = |x: &[f64; 4], c_out: usize, mu: usize| -> Complex64 {
            // derivative part
            let mut xp = *x;
            xp[mu] += spacing;
            let mut xm = *x;
            xm[mu] -= spacing;
            let mut val = Complex64::default();
            if c_out == c_in {
                val += (plane(&xp) - plane(&xm)) / Complex64::new(2.0 * spacing, 0.0);
            }
            // background bracket: (F_mu)_{c_out, c_in} phi(x)
            if c_out != c_in {
                let b = 3 - c_out - c_in;
                val += Complex64::new(epsilon(c_out, b, c_in) * a_bg[b][mu], 0.0) * plane(x);
            }
            val
        };
        for a_out in 0..3 {
            // second application at the origin, contracted over mu
            let origin = [0.0; 4];
            let mut total = Complex64::default();
            for mu in 0..4 {
                // derivative of nabla-field along mu
                let mut xp = origin;
                xp[mu] += spacing;
                let mut xm = origin;
                xm[mu] -= spacing;
                total +=
                    (nabla(&xp, a_out, mu) - nabla(&xm, a_out, mu)) / Complex64::new(2.0 * spacing, 0.0);
                for c_mid in 0..3 {
                    if a_out != c_mid {
                        let b = 3 - a_out - c_mid;
                        total += Complex64::new(epsilon(a_out, b, c_mid) * a_bg[b][mu], 0.0)
                            * nabla(&origin, c_mid, mu);
                    }
                }
            }
            block[(a_out, c_in)] = -total * dressing;
        }
    }
    block
}

// ---------------------------------------------------------------------------
// unit-sphere frames and fibration maps
// ---------------------------------------------------------------------------

/// Orthonormal tangent frame of the unit 3-sphere at x.
pub fn s3_frame(x: &[f64; 4]) -> Result<[[f64; 4]; 4]> {
    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(LabError::NotUnit { norm });
    }
    Ok([
        *x,
        [-x[1], x[0], -x[3], x[2]],
        [-x[2], x[3], x[0], -x[1]],
        [-x[3], -x[2], x[1], x[0]],
    ])
}

/// Gram-matrix deviation of the frame from the identity.
pub fn frame_orthonormality(frame: &[[f64; 4]; 4]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let dot: f64 = frame[i].iter().zip(&frame[j]).map(|(a, b)| a * b).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - expect).abs());
        }
    }
    worst
}

/// The fibration S^3 -> S^2: zeta1 = 2(x1 x3 + x2 x4),
/// zeta2 = 2(x2 x3 - x1 x4), zeta3 = x1^2 + x2^2 - x3^2 - x4^2.
pub fn hopf_map(x: &[f64; 4]) -> Result<[f64; 3]> {
    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(LabError::NotUnit { norm });
    }
    Ok([
        2.0 * (x[0] * x[2] + x[1] * x[3]),
        2.0 * (x[1] * x[2] - x[0] * x[3]),
        x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3],
    ])
}

/// Right phase action on the pair (x1 + i x2, x3 + i x4).
pub fn fibre_phase_action(x: &[f64; 4], alpha: f64) -> [f64; 4] {
    let (c, s) = (alpha.cos(), alpha.sin());
    [
        x[0] * c - x[1] * s,
        x[0] * s + x[1] * c,
        x[2] * c - x[3] * s,
        x[2] * s + x[3] * c,
    ]
}

/// Discrete winding number of a closed loop in the punctured plane by phase
/// accumulation.
pub fn circle_winding(samples: &[(f64, f64)]) -> i64 {
    let mut total = 0.0;
    for w in samples.windows(2) {
        let a0 = w[0].1.atan2(w[0].0);
        let a1 = w[1].1.atan2(w[1].0);
        let mut d = a1 - a0;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        total += d;
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

// ---------------------------------------------------------------------------
// orbit-space connection toy model
// ---------------------------------------------------------------------------

/// Planar rotation model: field space R^2, orbits are circles about the
/// origin, the single generator is K(A) = J A, horizontal = radial.
#[derive(Debug, Clone, Copy)]
pub struct PlanarModel;

impl PlanarModel {
    pub fn generator(&self, a: &[f64; 2]) -> [f64; 2] {
        [-a[1], a[0]]
    }

    fn omega(&self, a: &[f64; 2]) -> Result<[f64; 2]> {
        let k = self.generator(a);
        let f = k[0] * k[0] + k[1] * k[1];
        // the model's domain excludes a neighborhood of the origin, where
        // the orbit form degenerates and the connection blows up
        if f < 1e-4 {
            return Err(LabError::DegenerateOrbit(
                "orbit form degenerates near the origin".into(),
            ));
        }
        Ok([k[0] / f, k[1] / f])
    }

    /// Connection coefficients Gamma^i_jk at a point, assembled from the
    /// orbit-space formula with central finite differences for the
    /// derivatives of K and the composite K-omega terms.
    pub fn connection(&self, a: &[f64; 2], fd: f64) -> Result<[[[f64; 2]; 2]; 2]> {
        let omega = self.omega(a)?;
        // dK^i/dA^j by central differences
        let mut dk = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut ap = *a;
            ap[j] += fd;
            let mut am = *a;
            am[j] -= fd;
            let kp = self.generator(&ap);
            let km = self.generator(&am);
            for i in 0..2 {
                dk[i][j] = (kp[i] - km[i]) / (2.0 * fd);
            }
        }
        // K^i_{,l} K^l
        let k = self.generator(a);
        let mut dk_k = [0.0; 2];
        for i in 0..2 {
            for l in 0..2 {
                dk_k[i] += dk[i][l] * k[l];
            }
        }
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    gamma[i][j][l] = -dk[i][j] * omega[l] - dk[i][l] * omega[j]
                        + 0.5 * omega[j] * dk_k[i] * omega[l]
                        + 0.5 * omega[l] * dk_k[i] * omega[j];
                }
            }
        }
        Ok(gamma)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicReport {
    /// max |omega(velocity)| scaled by |K|: vertical leakage of the tangent
    pub max_vertical_component: f64,
    /// max |radial component of velocity|: horizontal leakage
    pub max_horizontal_component: f64,
    /// max deviation of |A| from its initial value (fibre containment)
    pub max_fibre_drift: f64,
    pub steps: usize,
    pub step: f64,
}

/// Integrate the connection geodesic with an explicit second-order midpoint
/// scheme and report the drift diagnostics. Horizontal starts must stay
/// horizontal (radial) and vertical starts must stay in the orbit circle, up
/// to O(step^2) integrator error.
pub fn vilkovisky_toy(
    model: &PlanarModel,
    start: [f64; 2],
    velocity: [f64; 2],
    steps: usize,
    step: f64,
) -> Result<GeodesicReport> {
    let fd = 1e-5;
    let accel = |a: &[f64; 2], v: &[f64; 2]| -> Result<[f64; 2]> {
        let gamma = model.connection(a, fd)?;
        let mut out = [0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    out[i] -= gamma[i][j][l] * v[j] * v[l];
                }
            }
        }
        Ok(out)
    };
    let mut a = start;
    let mut v = velocity;
    let r0 = (start[0] * start[0] + start[1] * start[1]).sqrt();
    let mut rep = GeodesicReport {
        max_vertical_component: 0.0,
        max_horizontal_component: 0.0,
        max_fibre_drift: 0.0,
        steps,
        step,
    };
    for _ in 0..steps {
        // explicit midpoint (second order)
        let acc1 = accel(&a, &v)?;
        let a_mid = [a[0] + 0.5 * step * v[0], a[1] + 0.5 * step * v[1]];
        let v_mid = [v[0] + 0.5 * step * acc1[0], v[1] + 0.5 * step * acc1[1]];
        let acc2 = accel(&a_mid, &v_mid)?;
        a = [a[0] + step * v_mid[0], a[1] + step * v_mid[1]];
        v = [v[0] + step * acc2[0], v[1] + step * acc2[1]];

        let r = (a[0] * a[0] + a[1] * a[1]).sqrt();
        let k = model.generator(&a);
        let k_norm = (k[0] * k[0] + k[1] * k[1]).sqrt();
        let v_norm = (v[0] * v[0] + v[1] * v[1]).sqrt().max(1e-300);
        let vertical = (v[0] * k[0] + v[1] * k[1]).abs() / (k_norm * v_norm);
        let radial = (v[0] * a[0] / r + v[1] * a[1] / r).abs() / v_norm;
        rep.max_vertical_component = rep.max_vertical_component.max(vertical);
        rep.max_horizontal_component = rep.max_horizontal_component.max(radial);
        rep.max_fibre_drift = rep.max_fibre_drift.max((r - r0).abs());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::{make_bump, Profile};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn su2_structure_constants_are_epsilon() {
        let su2 = structure_constants(AlgebraName::Su2).unwrap();
        assert_abs_diff_eq!(su2.f[0][1][2], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(su2.f[1][2][0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(su2.f[1][0][2], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(su2.f[0][0][0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn su3_f458_is_sqrt3_over_2() {
        let su3 = structure_constants(AlgebraName::Su3).unwrap();
        assert_abs_diff_eq!(su3.f[3][4][7], 3.0f64.sqrt() / 2.0, epsilon = 1e-14);
        // a few more standard values
        assert_abs_diff_eq!(su3.f[0][1][2], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(su3.f[0][3][6], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn u1_is_abelian() {
        let u1 = structure_constants(AlgebraName::U1).unwrap();
        assert_eq!(u1.dim, 1);
        assert_eq!(u1.f[0][0][0], 0.0);
    }

    #[test]
    fn transverse_projector_euclidean_axis() {
        let p = [1.0, 0.0, 0.0, 0.0];
        let pi = u1_transverse_projector(&p, MetricSignature::Euclidean).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0, 1.0]));
        assert!((pi - expect).amax() < 1e-15);
    }

    #[test]
    fn transverse_projector_annihilates_momentum_and_has_rank3() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0f64),
            ];
            if p.iter().map(|x| x * x).sum::<f64>() < 1e-3 {
                continue;
            }
            let pi = u1_transverse_projector(&p, MetricSignature::Euclidean).unwrap();
            // p^mu Pi_mu_nu = 0
            for nu in 0..4 {
                let contraction: f64 = (0..4).map(|mu| p[mu] * pi[(mu, nu)]).sum();
                assert!(contraction.abs() < 1e-12);
            }
            assert_abs_diff_eq!(pi.trace(), 3.0, epsilon = 1e-12);
            assert!(((&pi * &pi) - &pi).amax() < 1e-12);
        }
    }

    #[test]
    fn transverse_projector_rejects_zero_momentum() {
        assert!(u1_transverse_projector(&[0.0; 4], MetricSignature::Euclidean).is_err());
    }

    #[test]
    fn split_projector_traces_count_gauge_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let k = DMatrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
        let split = horizontal_vertical_split(&k, &DMatrix::identity(5, 5)).unwrap();
        assert_abs_diff_eq!(split.vertical_trace, 2.0, epsilon = 1e-12);
        assert!(split.max_identity_deviation < 1e-12);
    }

    #[test]
    fn split_projector_with_random_spd_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let n = 6;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let metric = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
            let k = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
            let split = horizontal_vertical_split(&k, &metric).unwrap();
            assert!(
                split.max_identity_deviation < 1e-11,
                "deviation {}",
                split.max_identity_deviation
            );
            assert_abs_diff_eq!(split.vertical_trace, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn one_form_duality_abelian_two_dim() {
        let k = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let rep = one_form_duality_check(&k, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(rep.duality_deviation, 0.0);
        assert_eq!(rep.projector_deviation, 0.0);
        // by hand: omega = (0, 1)
        assert_eq!(rep.omega[(0, 0)], 0.0);
        assert_eq!(rep.omega[(0, 1)], 1.0);
    }

    #[test]
    fn one_form_duality_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let n = 5;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let metric = &a * a.transpose() + DMatrix::identity(n, n);
            let k = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
            let rep = one_form_duality_check(&k, &metric).unwrap();
            assert!(rep.duality_deviation < 1e-12, "{}", rep.duality_deviation);
            assert!(rep.projector_deviation < 1e-12, "{}", rep.projector_deviation);
        }
    }

    #[test]
    fn abelian_constant_shift_leaves_field_unchanged() {
        let grid = Grid1::periodic(-10.0, 10.0, 1 << 11);
        let field = SampledField::from_fn(grid, |x| (0.5 * x).sin());
        let f = make_bump(vec![0.0], 0.5, 1.5, Profile::StdBump).unwrap();
        // slope 0: v constant, gradient vanishes, nothing changes
        let dev = abelian_gauge_shift(&field, &f, 0.0).unwrap();
        assert!(dev < 1e-12, "deviation {dev}");
    }

    #[test]
    fn abelian_linear_parameter_shifts_by_constant() {
        let grid = Grid1::periodic(-10.0, 10.0, 1 << 11);
        let field = SampledField::from_fn(grid, |x| (0.5 * x).sin());
        let f = make_bump(vec![0.0], 0.5, 1.5, Profile::StdBump).unwrap();
        let dev = abelian_gauge_shift(&field, &f, 0.7).unwrap();
        assert!(dev < 1e-10, "deviation {dev}");
    }

    #[test]
    fn su2_transform_agreement_is_second_order_in_amplitude() {
        let box_length = 2.0 * std::f64::consts::PI;
        let base_k = 1.0; // fundamental lattice momentum
        let a_field = BandField {
            modes: [
                vec![(0.8, base_k, 0.3), (0.3, 2.0 * base_k, 1.0)],
                vec![(0.5, base_k, 2.1)],
                vec![(0.6, 2.0 * base_k, 0.7)],
            ],
        };
        let v_field = BandField {
            modes: [
                vec![(1.0, base_k, 0.0)],
                vec![(0.7, base_k, 1.3)],
                vec![(0.4, 2.0 * base_k, 0.5)],
            ],
        };
        // dressing plateau out to k = 12 covers all low harmonics
        let f = make_bump(vec![0.0], 12.0, 16.0, Profile::StdBump).unwrap();
        let mut devs = Vec::new();
        for amp in [0.2, 0.1, 0.05, 0.025] {
            let out = gauge_transform_convoluted(&a_field, &v_field, amp, &f, 256, box_length)
                .unwrap();
            devs.push(out.deviation);
        }
        // Richardson slope close to 2
        for w in devs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(
                (slope - 2.0).abs() < 0.35,
                "slope {slope} from devs {devs:?}"
            );
        }
    }

    #[test]
    fn gauge_variation_of_condition_norm_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let chi = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let xi = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            assert!(gauge_variation_of_condition_norm(&chi, &xi).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_field_satisfies_condition_at_order_h2() {
        let a_bg = [[0.3, 0.1], [0.0, 0.2], [0.5, 0.0]];
        let coarse = projected_quantum_field(32, 2.0 * std::f64::consts::PI, &a_bg, 99);
        let fine = projected_quantum_field(64, 2.0 * std::f64::consts::PI, &a_bg, 99);
        let rc = landau_dewitt_residual(&coarse, &a_bg);
        let rf = landau_dewitt_residual(&fine, &a_bg);
        let ratio = rc / rf;
        assert!(
            ratio > 2.5 && ratio < 6.0,
            "expected near-quartic drop, got {rc} -> {rf} (ratio {ratio})"
        );
    }

    #[test]
    fn zero_background_transverse_field_satisfies_condition() {
        let a_bg = [[0.0, 0.0]; 3];
        let field = projected_quantum_field(64, 2.0 * std::f64::consts::PI, &a_bg, 7);
        let r = landau_dewitt_residual(&field, &a_bg);
        let h = 2.0 * std::f64::consts::PI / 64.0;
        assert!(r < 10.0 * h * h, "residual {r} vs h^2 {}", h * h);
    }

    #[test]
    fn fp_blocks_abelian_reduction() {
        // zero background: B(k) = k^2 f(|k|) identity (continuum symbol)
        let a_bg = [[0.0; 4]; 3];
        let f = make_bump(vec![0.0], 2.0, 4.0, Profile::StdBump).unwrap();
        let out =
            faddeev_popov_blocks(&a_bg, 4, 2.0 * std::f64::consts::PI, &f, DerivativeSymbol::Continuum)
                .unwrap();
        for (k, block) in out.momenta.iter().zip(&out.blocks) {
            let k_sq: f64 = k.iter().map(|x| x * x).sum();
            let dress = f.eval_radial(k_sq.sqrt());
            for a in 0..3 {
                for b in 0..3 {
                    let expect = if a == b { k_sq * dress } else { 0.0 };
                    assert_abs_diff_eq!(block[(a, b)].re, expect, epsilon = 1e-12);
                    assert_abs_diff_eq!(block[(a, b)].im, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn fp_block_eigenvalues_split_with_background_along_t3() {
        // constant background along the third color direction shifts two of
        // the three eigenvalues by +-2 A.k + A^2
        let amp = 0.4;
        let a_bg = [[0.0; 4], [0.0; 4], [amp, 0.0, 0.0, 0.0]];
        let f = make_bump(vec![0.0], 5.0, 8.0, Profile::StdBump).unwrap();
        let out = faddeev_popov_blocks(
            &a_bg,
            4,
            2.0 * std::f64::consts::PI,
            &f,
            DerivativeSymbol::Continuum,
        )
        .unwrap();
        for (k, block) in out.momenta.iter().zip(&out.blocks) {
            let k_sq: f64 = k.iter().map(|x| x * x).sum();
            let dress = f.eval_radial(k_sq.sqrt());
            if dress == 0.0 {
                continue;
            }
            // eigenvalues: k^2 and k^2 +- 2 i? no: (k -+ i A)^2 pattern:
            // k^2 + A^2 +- 2 A k_0 on the charged pair, k^2 on the neutral
            let ev = block.clone().eigenvalues().unwrap();
            let mut got: Vec<f64> = ev.iter().map(|e| e.re / dress).collect();
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut expect = vec![
                k_sq,
                k_sq + amp * amp + 2.0 * amp * k[0],
                k_sq + amp * amp - 2.0 * amp * k[0],
            ];
            expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (g, e) in got.iter().zip(&expect) {
                assert_abs_diff_eq!(*g, *e, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fp_blocks_match_lattice_oracle_with_shared_symbol() {
        let a_bg = [[0.2, 0.0, 0.1, 0.0], [0.0; 4], [0.4, 0.0, 0.0, 0.3]];
        let f = make_bump(vec![0.0], 3.0, 5.0, Profile::StdBump).unwrap();
        let n = 4;
        let box_length = 2.0 * std::f64::consts::PI;
        let spacing = box_length / n as f64;
        let out = faddeev_popov_blocks(
            &a_bg,
            n,
            box_length,
            &f,
            DerivativeSymbol::CentralDifference { spacing },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (k, block) in out.momenta.iter().zip(&out.blocks) {
            let oracle = lattice_fp_block_oracle(&a_bg, k, spacing, &f);
            let scale = cmax(block).max(1e-12);
            worst = worst.max(cmax(&(block - oracle)) / scale);
        }
        assert!(worst < 1e-6, "relative deviation {worst}");
    }

    #[test]
    fn fp_dressing_kills_modes_outside_support() {
        let a_bg = [[0.1, 0.0, 0.0, 0.0], [0.0; 4], [0.0; 4]];
        // support only out to |k| = 1.5: most lattice modes vanish
        let f = make_bump(vec![0.0], 0.8, 1.5, Profile::StdBump).unwrap();
        let out = faddeev_popov_blocks(
            &a_bg,
            4,
            2.0 * std::f64::consts::PI,
            &f,
            DerivativeSymbol::Continuum,
        )
        .unwrap();
        for (k, block) in out.momenta.iter().zip(&out.blocks) {
            let k_norm: f64 = k.iter().map(|x| x * x).sum::<f64>().sqrt();
            if k_norm >= 1.5 {
                assert_eq!(cmax(block), 0.0);
            }
        }
    }

    #[test]
    fn s3_frame_standard_point() {
        let frame = s3_frame(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(frame[1], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(frame[2], [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(frame[3], [0.0, 0.0, 0.0, 1.0]);
        assert!(frame_orthonormality(&frame) < 1e-15);
    }

    #[test]
    fn s3_frame_orthonormal_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let mut x = [0.0; 4];
            let mut norm = 0.0f64;
            for v in &mut x {
                *v = rng.gen_range(-1.0..1.0);
                norm += *v * *v;
            }
            let norm = norm.sqrt();
            for v in &mut x {
                *v /= norm;
            }
            let frame = s3_frame(&x).unwrap();
            assert!(frame_orthonormality(&frame) < 1e-12);
        }
    }

    #[test]
    fn s3_frame_rejects_non_unit() {
        assert!(s3_frame(&[1.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn hopf_standard_point_maps_to_north_pole() {
        let z = hopf_map(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(z, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn hopf_image_is_unit_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..1000 {
            let mut x = [0.0; 4];
            let mut norm = 0.0f64;
            for v in &mut x {
                *v = rng.gen_range(-1.0..1.0);
                norm += *v * *v;
            }
            let norm = norm.sqrt();
            for v in &mut x {
                *v /= norm;
            }
            let z = hopf_map(&x).unwrap();
            let z_norm: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(z_norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hopf_fibre_invariance_and_equator_winding() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let mut x = [0.31f64, -0.42, 0.55, 0.65];
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut x {
            *v /= norm;
        }
        let base = hopf_map(&x).unwrap();
        for j in 0..12 {
            let alpha = rng.gen_range(0.0..(2.0 * std::f64::consts::PI)) + j as f64;
            let moved = fibre_phase_action(&x, alpha);
            let z = hopf_map(&moved).unwrap();
            for (a, b) in z.iter().zip(&base) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
        // equator loop: (cos t, sin t, 1, 0)/sqrt(2) traces the transition
        // circle zeta1 + i zeta2 = e^{i t} once
        let samples: Vec<(f64, f64)> = (0..=240)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 240.0;
                let s = 1.0 / 2.0f64.sqrt();
                let z = hopf_map(&[s * t.cos(), s * t.sin(), s, 0.0]).unwrap();
                (z[0], z[1])
            })
            .collect();
        assert_eq!(circle_winding(&samples), 1);
    }

    #[test]
    fn planar_geodesic_radial_start_stays_radial() {
        let model = PlanarModel;
        let start = [1.0, 0.0];
        let velocity = [1.0, 0.0]; // radial = horizontal
        let rep = vilkovisky_toy(&model, start, velocity, 1000, 1e-3).unwrap();
        assert!(
            rep.max_vertical_component < 1e-8,
            "vertical drift {}",
            rep.max_vertical_component
        );
    }

    #[test]
    fn planar_geodesic_vertical_start_stays_in_fibre() {
        let model = PlanarModel;
        let start = [1.0, 0.0];
        let velocity = [0.0, 1.0]; // tangent to the orbit circle
        let rep = vilkovisky_toy(&model, start, velocity, 2000, 1e-3).unwrap();
        assert!(rep.max_fibre_drift < 1e-4, "fibre drift {}", rep.max_fibre_drift);
    }

    #[test]
    fn planar_geodesic_drift_is_second_order_in_step() {
        // on the fibre geodesic the tangent must stay vertical; the
        // integrator leaks a horizontal (radial) component of size O(step^2).
        // (The radius itself superconverges for the midpoint scheme, so the
        // tangent leakage is the step-order diagnostic.)
        let model = PlanarModel;
        let start = [1.0, 0.0];
        let velocity = [0.0, 1.0];
        let total_time = 1.0;
        let mut drifts = Vec::new();
        for &step in &[4e-3, 2e-3, 1e-3] {
            let steps = (total_time / step) as usize;
            let rep = vilkovisky_toy(&model, start, velocity, steps, step).unwrap();
            drifts.push(rep.max_horizontal_component);
        }
        for w in drifts.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (order - 2.0).abs() < 0.3,
                "order {order} from drifts {drifts:?}"
            );
        }
    }

    #[test]
    fn planar_geodesic_rejects_origin() {
        let model = PlanarModel;
        let rep = vilkovisky_toy(&model, [1e-3, 0.0], [-1.0, 0.0], 100, 1e-2);
        assert!(matches!(rep, Err(LabError::DegenerateOrbit(_))));
    }
}
