//! Smoothed spectral measures of self-adjoint and unitary Perron–Frobenius
//! operators through rational convolution kernels, and normality checks.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};

use crate::gram::{self, CompressedBasis, GramTriple};
use crate::linalg::{self, HessenbergForm};
use crate::{Error, Result};

/// Defect below which `Khat^T` is treated as exactly normal.
pub const NORMALITY_TOL: f64 = 1e-10;

/// `|lambda_i - s|` below this at a sample point is a pole collision.
pub const COLLISION_TOL: f64 = 1e-14;

const POLE_SEPARATION: f64 = 1e-12;

/// `K(x) = (1/2 pi i) sum_j alpha_j/(x - a_j) - (1/2 pi i) sum_j conj(alpha_j)/(x - conj(a_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalSmoothingKernel {
    /// Upper half-plane.
    pub poles: Vec<c64>,
    pub residues: Vec<c64>,
}

impl RationalSmoothingKernel {
    /// Order `m` with poles `a_j = 2j/(m+1) - 1 + i`.
    pub fn with_order(m: usize) -> Result<Self> {
        rational_kernel(&default_poles(m)?)
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    /// Kernel value on the real line.
    pub fn eval(&self, x: f64) -> f64 {
        let s: c64 = self.poles.iter().zip(&self.residues).map(|(&a, &al)| al / (c64::new(x, 0.0) - a)).sum();
        // s - conj(s) over 2 pi i
        s.im / std::f64::consts::PI
    }
}

pub fn default_poles(m: usize) -> Result<Vec<c64>> {
    if m == 0 {
        return Err(Error::InvalidParameter("kernel order must be >= 1".into()));
    }
    Ok((1..=m).map(|j| c64::new(2.0 * j as f64 / (m as f64 + 1.0) - 1.0, 1.0)).collect())
}

/// Residues from the Vandermonde system `sum_j alpha_j a_j^k = [k = 0]`,
/// `k = 0..m-1`.
pub fn rational_kernel(poles: &[c64]) -> Result<RationalSmoothingKernel> {
    let m = poles.len();
    if m == 0 {
        return Err(Error::InvalidParameter("at least one pole is required".into()));
    }
    for (i, a) in poles.iter().enumerate() {
        if !(a.im > 0.0) || !a.re.is_finite() || !a.im.is_finite() {
            return Err(Error::InvalidParameter(format!("pole {a} must lie in the open upper half-plane")));
        }
        if let Some(j) = (0..i).find(|&j| (poles[j] - a).norm() <= POLE_SEPARATION) {
            return Err(Error::InvalidParameter(format!("poles {j} and {i} coincide")));
        }
    }
    let v = Mat::from_fn(m, m, |k, j| poles[j].powi(k as i32));
    let mut rhs = Mat::<c64>::zeros(m, 1);
    rhs[(0, 0)] = c64::new(1.0, 0.0);
    let alpha = v.partial_piv_lu().solve(&rhs);
    let residues: Vec<c64> = (0..m).map(|j| alpha[(j, 0)]).collect();
    if residues.iter().any(|r| !(r.re.is_finite() && r.im.is_finite())) {
        return Err(Error::NonFinite("Vandermonde residues".into()));
    }
    Ok(RationalSmoothingKernel { poles: poles.to_vec(), residues })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityReport {
    /// `|Khat^T - (Khat^T)*|_2`.
    pub selfadjoint_defect: f64,
    /// `|(Khat^T)* Khat^T - I|_2`.
    pub unitary_defect: f64,
    /// `max |R - G|` over entries.
    pub max_r_minus_g: f64,
    /// `max |A - A*|` over entries.
    pub max_a_minus_adjoint: f64,
}

impl NormalityReport {
    pub fn is_selfadjoint(&self) -> bool {
        self.selfadjoint_defect <= NORMALITY_TOL
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary_defect <= NORMALITY_TOL
    }
}

fn max_abs_entry(m: MatRef<'_, c64>) -> f64 {
    m.norm_max()
}

/// Spectral norm, falling back to the Frobenius bound if the SVD fails.
fn norm2(m: MatRef<'_, c64>) -> f64 {
    linalg::spectral_norm(m).unwrap_or_else(|_| m.norm_l2())
}

pub fn check_normality(gram: &GramTriple, basis: &CompressedBasis) -> NormalityReport {
    let k = &basis.khat_t;
    let r = k.nrows();
    let sa = k - k.adjoint();
    let un = k.adjoint() * k - Mat::<c64>::identity(r, r);
    NormalityReport {
        selfadjoint_defect: norm2(sa.as_ref()),
        unitary_defect: norm2(un.as_ref()),
        max_r_minus_g: max_abs_entry((&gram.r - &gram.g).as_ref()),
        max_a_minus_adjoint: max_abs_entry((&gram.a - gram.a.adjoint()).as_ref()),
    }
}

/// `u`-basis coordinates of `g = sum_i c_i K_{x_i}`; with `orthogonal_to_constant`
/// the mean of `c` is removed first (`sum_i c_i = 0`).
pub fn observable_from_kernel_coeffs(
    c: &[c64],
    basis: &CompressedBasis,
    gram: &GramTriple,
    orthogonal_to_constant: bool,
) -> Result<Vec<c64>> {
    let mut c = c.to_vec();
    if orthogonal_to_constant && !c.is_empty() {
        let mean = c.iter().sum::<c64>() / c.len() as f64;
        c.iter_mut().for_each(|v| *v -= mean);
    }
    gram::to_u_basis(&c, basis, gram)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSamples {
    /// `x_k`, or `theta_k` for the unitary measure.
    pub points: Vec<f64>,
    /// `NaN` at failed points; see `failures`.
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub observable: Vec<c64>,
    pub failures: Vec<(usize, String)>,
    /// Largest imaginary part of the assembled kernel sums before discarding.
    pub max_imag: f64,
    /// Condition number of the eigenvector matrix (1 on the Hermitian path).
    pub cond_v: f64,
    pub hermitian_path: bool,
}

/// Factorisation of `Khat^T` paired with an observable, reusable across
/// sample points, `epsilon` and kernels. Self-adjoint input uses the
/// eigendecomposition; otherwise resolvents go through a unitary Hessenberg
/// reduction, since the eigenvector matrix may be numerically singular.
#[derive(Debug, Clone)]
pub struct MeasureDecomposition {
    lambda: Vec<c64>,
    /// `|h_i|^2` on the Hermitian path.
    weights: Vec<c64>,
    /// `(Q H Q*, Q* g)` on the general path.
    hessenberg: Option<(HessenbergForm, Vec<c64>)>,
    observable: Vec<c64>,
    cond_v: f64,
    hermitian: bool,
}

impl MeasureDecomposition {
    /// Hermitian path when `|Khat^T - (Khat^T)*|_2 <= NORMALITY_TOL`, general
    /// eigendecomposition otherwise.
    pub fn new(khat_t: MatRef<'_, c64>, g: &[c64]) -> Result<Self> {
        let r = khat_t.nrows();
        if khat_t.ncols() != r {
            return Err(Error::DimensionMismatch { expected: r, found: khat_t.ncols() });
        }
        if g.len() != r {
            return Err(Error::DimensionMismatch { expected: r, found: g.len() });
        }
        let skew = khat_t - khat_t.adjoint();
        let hermitian = skew.norm_l2() <= NORMALITY_TOL || norm2(skew.as_ref()) <= NORMALITY_TOL;
        if hermitian {
            let (vals, v) = linalg::hermitian_eigen(linalg::hermitian_part(khat_t).as_ref())?;
            let h = linalg::mat_vec(v.adjoint().to_owned().as_ref(), g);
            return Ok(Self {
                lambda: vals.iter().map(|&x| c64::new(x, 0.0)).collect(),
                weights: h.iter().map(|v| c64::new(v.norm_sqr(), 0.0)).collect(),
                hessenberg: None,
                observable: g.to_vec(),
                cond_v: 1.0,
                hermitian: true,
            });
        }
        log::warn!("Khat^T is not self-adjoint to {NORMALITY_TOL:e}; using the Hessenberg resolvent path");
        let e = khat_t.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let lambda: Vec<c64> = e.S().column_vector().iter().copied().collect();
        let sv = e.U().singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let cond_v = sv[0] / sv[r - 1];
        let form = HessenbergForm::new(khat_t)?;
        let gt = form.to_reduced(g);
        Ok(Self {
            lambda,
            weights: Vec::new(),
            hessenberg: Some((form, gt)),
            observable: g.to_vec(),
            cond_v,
            hermitian: false,
        })
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.lambda
    }

    pub fn cond_v(&self) -> f64 {
        self.cond_v
    }

    /// `g* (Khat^T - s)^{-1} g`, failing on a pole collision.
    fn resolvent(&self, s: c64) -> Result<c64> {
        if let Some((form, gt)) = &self.hessenberg {
            let x = form.solve_shifted(s, gt)?;
            return Ok(gt.iter().zip(&x).map(|(a, b)| a.conj() * b).sum());
        }
        let mut acc = c64::new(0.0, 0.0);
        for (&l, &w) in self.lambda.iter().zip(&self.weights) {
            let d = l - s;
            if d.norm() < COLLISION_TOL {
                return Err(Error::Degenerate(format!("pole {s} collides with eigenvalue {l}")));
            }
            acc += w / d;
        }
        Ok(acc)
    }

    fn sample(
        &self,
        points: &[f64],
        epsilon: f64,
        kernel: &RationalSmoothingKernel,
        value: impl Fn(f64, &mut f64) -> Result<f64>,
    ) -> Result<MeasureSamples> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        if kernel.poles.len() != kernel.residues.len() || kernel.poles.is_empty() {
            return Err(Error::InvalidParameter("malformed smoothing kernel".into()));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("sample point {p}")));
        }
        let mut values = Vec::with_capacity(points.len());
        let mut failures = Vec::new();
        let mut max_imag = 0.0f64;
        for (k, &x) in points.iter().enumerate() {
            let mut im = 0.0;
            match value(x, &mut im) {
                Ok(v) => {
                    max_imag = max_imag.max(im);
                    values.push(v);
                }
                Err(e) => {
                    values.push(f64::NAN);
                    failures.push((k, e.to_string()));
                }
            }
        }
        Ok(MeasureSamples {
            points: points.to_vec(),
            values,
            epsilon,
            observable: self.observable.clone(),
            failures,
            max_imag,
            cond_v: self.cond_v,
            hermitian_path: self.hermitian,
        })
    }

    /// `-(1/pi) Im sum_j alpha_j h'* (Lambda - (x - eps a_j))^{-1} h`.
    pub fn selfadjoint(&self, points: &[f64], epsilon: f64, kernel: &RationalSmoothingKernel) -> Result<MeasureSamples> {
        use std::f64::consts::PI;
        self.sample(points, epsilon, kernel, |x, im| {
            let mut s = c64::new(0.0, 0.0);
            let mut s2 = c64::new(0.0, 0.0);
            for (&a, &al) in kernel.poles.iter().zip(&kernel.residues) {
                s += al * self.resolvent(c64::new(x, 0.0) - a * epsilon)?;
                s2 += al.conj() * self.resolvent(c64::new(x, 0.0) - a.conj() * epsilon)?;
            }
            // -(S - S2) / (2 pi i) is real for self-adjoint input
            let full = -(s - s2) / c64::new(0.0, 2.0 * PI);
            *im = full.im.abs();
            Ok(-s.im / PI)
        })
    }

    /// `-(1/2pi) Re sum_j alpha_j h'* (Lambda - z_j)^{-1} (Lambda + z_j) h`,
    /// `z_j = exp(i theta - i eps a_j)`.
    pub fn unitary(&self, thetas: &[f64], epsilon: f64, kernel: &RationalSmoothingKernel) -> Result<MeasureSamples> {
        use std::f64::consts::PI;
        // (K + z)(K - z)^{-1} = I + 2z (K - z)^{-1}
        let gg: f64 = self.observable.iter().map(|v| v.norm_sqr()).sum();
        self.sample(thetas, epsilon, kernel, |theta, im| {
            let mut s = c64::new(0.0, 0.0);
            let mut s2 = c64::new(0.0, 0.0);
            for (&a, &al) in kernel.poles.iter().zip(&kernel.residues) {
                let z = (c64::new(0.0, theta) - c64::new(0.0, epsilon) * a).exp();
                // reflection 1/conj(z) across the unit circle
                let zr = (c64::new(0.0, theta) - c64::new(0.0, epsilon) * a.conj()).exp();
                s += al * (gg + z * 2.0 * self.resolvent(z)?);
                s2 += al.conj() * (gg + zr * 2.0 * self.resolvent(zr)?);
            }
            // -(S - S2) / (4 pi) is real for unitary input
            let full = -(s - s2) / (4.0 * PI);
            *im = full.im.abs();
            Ok(-s.re / (2.0 * PI))
        })
    }
}

pub fn spectral_measure_selfadjoint(
    khat_t: MatRef<'_, c64>,
    g: &[c64],
    points: &[f64],
    epsilon: f64,
    kernel: &RationalSmoothingKernel,
) -> Result<MeasureSamples> {
    MeasureDecomposition::new(khat_t, g)?.selfadjoint(points, epsilon, kernel)
}

pub fn spectral_measure_unitary(
    khat_t: MatRef<'_, c64>,
    g: &[c64],
    thetas: &[f64],
    epsilon: f64,
    kernel: &RationalSmoothingKernel,
) -> Result<MeasureSamples> {
    MeasureDecomposition::new(khat_t, g)?.unitary(thetas, epsilon, kernel)
}
