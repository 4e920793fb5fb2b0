//! Residual-verified eigenpairs and approximate point pseudospectra.
//!
//! For `g = sum_i g_i K_{x_i}` the residual of the Perron–Frobenius operator is
//! `res(lambda, g)^2 = g*(R - lambda A* - conj(lambda) A + |lambda|^2 G) g / g*Gg`,
//! computed from Gram data only.

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;

use crate::gram::{CompressedBasis, GramTriple};
use crate::linalg::{self, CholeskyPencil, PsdFactor, DEFAULT_THRESHOLD};
use crate::{Error, Result};

/// Negative residual numerators above `-NEGATIVE_GATE * g*Gg` are round-off.
pub const NEGATIVE_GATE: f64 = 1e-12;

/// `g*Gg` at or below `DENOMINATOR_FLOOR * max_i G_ii * |g|^2` is degenerate.
pub const DENOMINATOR_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedEigenpair {
    pub lambda: c64,
    pub coeffs: Vec<c64>,
    pub residual: f64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudospectrumResult {
    pub grid: Vec<c64>,
    /// `NaN` where the point failed; see `failures`.
    pub tau: Vec<f64>,
    pub epsilon: f64,
    /// Grid indices, ascending.
    pub flagged: Vec<usize>,
    /// One coefficient vector per entry of `flagged`, when requested.
    pub witnesses: Option<Vec<Vec<c64>>>,
    pub failures: Vec<(usize, String)>,
}

impl PseudospectrumResult {
    pub fn flagged_points(&self) -> Vec<c64> {
        self.flagged.iter().map(|&i| self.grid[i]).collect()
    }

    pub fn is_flagged(&self, i: usize) -> bool {
        self.flagged.binary_search(&i).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudospectrumOptions {
    /// Keep witnesses of flagged points.
    pub store_witnesses: bool,
    /// Relative eigenvalue cutoff for `G`.
    pub threshold: f64,
}

impl Default for PseudospectrumOptions {
    fn default() -> Self {
        Self { store_witnesses: true, threshold: DEFAULT_THRESHOLD }
    }
}

fn check_len(g: &[c64], n: usize) -> Result<()> {
    if g.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g.len() });
    }
    Ok(())
}

fn max_diag(m: MatRef<'_, c64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re.abs()).fold(0.0, f64::max)
}

fn dot(u: &[c64], v: &[c64]) -> c64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// `sqrt(num / den)` with the round-off gate on `num`.
fn gated_sqrt(num: f64, den: f64) -> Result<f64> {
    if !num.is_finite() || !den.is_finite() {
        return Err(Error::NonFinite("residual quadratic form".into()));
    }
    if num >= 0.0 {
        Ok((num / den).sqrt())
    } else if num >= -NEGATIVE_GATE * den {
        Ok(0.0)
    } else {
        Err(Error::Indefinite { eigenvalue: num / den })
    }
}

/// Numerator `g*(R - lambda A* - conj(lambda) A + |lambda|^2 G) g` and `g*Gg`,
/// with compensated sums so cancellation costs `O(eps^2)` rather than `O(eps)`
/// relative to the individual terms.
fn residual_parts(lambda: c64, g: &[c64], gram: &GramTriple) -> (f64, f64) {
    let (gg, _) = linalg::quad_form_dd(g, gram.g.as_ref(), g);
    let (ga_re, ga_im) = linalg::quad_form_dd(g, gram.a.as_ref(), g);
    let (gr, _) = linalg::quad_form_dd(g, gram.r.as_ref(), g);
    let mut num = gr;
    num.add_scaled(-2.0 * lambda.re, ga_re);
    num.add_scaled(-2.0 * lambda.im, ga_im);
    // |lambda|^2 gg = re (re gg) + im (im gg)
    for t in [lambda.re, lambda.im] {
        let mut tg = linalg::CompensatedSum::default();
        tg.add_scaled(t, gg);
        num.add_scaled(t, tg);
    }
    (num.value(), gg.value())
}

/// `res(lambda, g)`; the denominator must clear the degeneracy floor.
pub fn residual(lambda: c64, g: &[c64], gram: &GramTriple) -> Result<f64> {
    check_len(g, gram.n())?;
    let (num, den) = residual_parts(lambda, g, gram);
    let norm2: f64 = g.iter().map(|v| v.norm_sqr()).sum();
    if !(den > DENOMINATOR_FLOOR * max_diag(gram.g.as_ref()) * norm2) {
        return Err(Error::Degenerate(format!("g*Gg = {den:e} is below the floor")));
    }
    gated_sqrt(num, den)
}

/// Residual of `U_r Sigma_r^{-1} g_tilde`. The denominator equals
/// `g_tilde* g_tilde` in exact arithmetic; it is evaluated as `g*Gg` so the
/// value stays a true residual when `G` is ill-conditioned.
pub fn residual_compressed(lambda: c64, g_tilde: &[c64], basis: &CompressedBasis, gram: &GramTriple) -> Result<f64> {
    check_len(g_tilde, basis.rank())?;
    if basis.u_r.nrows() != gram.n() {
        return Err(Error::DimensionMismatch { expected: gram.n(), found: basis.u_r.nrows() });
    }
    if g_tilde.iter().all(|v| *v == c64::new(0.0, 0.0)) {
        return Err(Error::Degenerate("zero coefficient vector".into()));
    }
    residual(lambda, &basis.to_kernel_coeffs(g_tilde)?, gram)
}

/// kEDMD eigenpairs of `A g = lambda G g` with residuals, sorted by residual.
pub fn verify_eigenpairs(gram: &GramTriple, epsilon: f64) -> Result<Vec<VerifiedEigenpair>> {
    verify_eigenpairs_with(gram, epsilon, DEFAULT_THRESHOLD)
}

pub fn verify_eigenpairs_with(gram: &GramTriple, epsilon: f64, threshold: f64) -> Result<Vec<VerifiedEigenpair>> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let eig = linalg::general_geig(gram.a.as_ref(), gram.g.as_ref(), threshold)?;
    let lambdas = eig.complex_eigenvalues();
    let v = &eig.eigenvectors;
    let mut out = (0..lambdas.len())
        .into_par_iter()
        .map(|k| {
            let lambda = lambdas[k];
            let coeffs: Vec<c64> = (0..gram.n()).map(|i| v[(i, k)]).collect();
            let (num, den) = residual_parts(lambda, &coeffs, gram);
            let res = gated_sqrt(num, den)?;
            Ok(VerifiedEigenpair { lambda, coeffs, residual: res, verified: res <= epsilon })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    Ok(out)
}

/// `(1/N)(Z + iZ)` intersected with the closed disk of radius `N`.
pub fn default_grid(n: usize) -> Result<Vec<c64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("grid parameter must be >= 1".into()));
    }
    let m = (n * n) as i64;
    let h = 1.0 / n as f64;
    let mut out = Vec::new();
    for b in -m..=m {
        for a in -m..=m {
            if a * a + b * b <= m * m {
                out.push(c64::new(a as f64 * h, b as f64 * h));
            }
        }
    }
    Ok(out)
}

fn check_grid(grid: &[c64], epsilon: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
    }
    if let Some(z) = grid.iter().find(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite(format!("grid point {z}")));
    }
    Ok(())
}

/// Smallest eigenpair of a Hermitian matrix.
fn smallest_hermitian(m: MatRef<'_, c64>) -> Result<(f64, Vec<c64>)> {
    let (vals, u) = linalg::hermitian_eigen(m)?;
    Ok((vals[0], (0..u.nrows()).map(|i| u[(i, 0)]).collect()))
}

fn collect(
    grid: &[c64],
    epsilon: f64,
    store_witnesses: bool,
    points: Vec<Result<(f64, Vec<c64>)>>,
    flag: impl Fn(f64) -> bool,
) -> PseudospectrumResult {
    let mut tau = Vec::with_capacity(grid.len());
    let mut flagged = Vec::new();
    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    for (i, p) in points.into_iter().enumerate() {
        match p {
            Ok((t, w)) => {
                tau.push(t);
                if flag(t) {
                    flagged.push(i);
                    if store_witnesses {
                        witnesses.push(w);
                    }
                }
            }
            Err(e) => {
                tau.push(f64::NAN);
                failures.push((i, e.to_string()));
            }
        }
    }
    PseudospectrumResult {
        grid: grid.to_vec(),
        tau,
        epsilon,
        flagged,
        witnesses: store_witnesses.then_some(witnesses),
        failures,
    }
}

/// Minimises the residual over `span{W e_j}` where `W* G W = I`. Stored `tau`
/// is the residual of the returned witness `W y`.
fn pseudospectrum_in_basis(
    w: &Mat<c64>,
    gram: &GramTriple,
    grid: &[c64],
    epsilon: f64,
    store_witnesses: bool,
) -> PseudospectrumResult {
    let r_t = linalg::hermitian_part((w.adjoint() * &gram.r * w).as_ref());
    let a_t = w.adjoint() * &gram.a * w;
    let k = w.ncols();
    let points: Vec<Result<(f64, Vec<c64>)>> = grid
        .par_iter()
        .map(|&z| {
            let zz = z.norm_sqr();
            let m = Mat::from_fn(k, k, |i, j| {
                let d = if i == j { zz } else { 0.0 };
                r_t[(i, j)] - z * a_t[(j, i)].conj() - z.conj() * a_t[(i, j)] + d
            });
            let (_, y) = smallest_hermitian(m.as_ref())?;
            let g = linalg::mat_vec(w.as_ref(), &y);
            let t = residual(z, &g, gram)?;
            Ok((t, g))
        })
        .collect();
    collect(grid, epsilon, store_witnesses, points, |t| t < epsilon)
}

/// Approximate point pseudospectrum of the Perron–Frobenius operator:
/// `tau(z) = min_g res(z, g)` over the span of the snapshot kernel sections,
/// flagged where `tau(z) < epsilon`.
pub fn pseudospectrum_pf(gram: &GramTriple, grid: &[c64], epsilon: f64) -> Result<PseudospectrumResult> {
    pseudospectrum_pf_with(gram, grid, epsilon, &PseudospectrumOptions::default())
}

pub fn pseudospectrum_pf_with(
    gram: &GramTriple,
    grid: &[c64],
    epsilon: f64,
    opts: &PseudospectrumOptions,
) -> Result<PseudospectrumResult> {
    check_grid(grid, epsilon)?;
    let w = PsdFactor::new(gram.g.as_ref(), opts.threshold, usize::MAX)?.scaled_vectors(0.5);
    Ok(pseudospectrum_in_basis(&w, gram, grid, epsilon, opts.store_witnesses))
}

/// As [`pseudospectrum_pf`], restricted to the compressed basis. Witnesses
/// are kernel-section coefficients.
pub fn pseudospectrum_compressed(
    basis: &CompressedBasis,
    gram: &GramTriple,
    grid: &[c64],
    epsilon: f64,
) -> Result<PseudospectrumResult> {
    check_grid(grid, epsilon)?;
    if basis.u_r.nrows() != gram.n() {
        return Err(Error::DimensionMismatch { expected: gram.n(), found: basis.u_r.nrows() });
    }
    Ok(pseudospectrum_in_basis(&basis.w(), gram, grid, epsilon, true))
}

/// Koopman pseudospectrum from the rectangular truncation: the leading
/// `n2 x n2` block of `A G^+ A* - z A - conj(z) A* + |z|^2 G` against the
/// leading block of `G`. Flags `tau(z) + 1/n2 <= epsilon`. Witnesses have
/// length `n2`.
pub fn pseudospectrum_koop(gram: &GramTriple, n1: usize, n2: usize, grid: &[c64], epsilon: f64) -> Result<PseudospectrumResult> {
    pseudospectrum_koop_with(gram, n1, n2, grid, epsilon, &PseudospectrumOptions::default())
}

pub fn pseudospectrum_koop_with(
    gram: &GramTriple,
    n1: usize,
    n2: usize,
    grid: &[c64],
    epsilon: f64,
    opts: &PseudospectrumOptions,
) -> Result<PseudospectrumResult> {
    check_grid(grid, epsilon)?;
    if n1 != gram.n() {
        return Err(Error::DimensionMismatch { expected: n1, found: gram.n() });
    }
    if n2 == 0 || n2 > n1 {
        return Err(Error::InvalidParameter(format!("N2 = {n2} must lie in 1..={n1}")));
    }
    let w = PsdFactor::new(gram.g.as_ref(), opts.threshold, usize::MAX)?.scaled_vectors(0.5);
    let aw = gram.a.as_ref().submatrix(0, 0, n2, n1) * &w;
    let h = linalg::hermitian_part((&aw * aw.adjoint()).as_ref());
    let a2 = gram.a.as_ref().submatrix(0, 0, n2, n2);
    let g2 = gram.g.as_ref().submatrix(0, 0, n2, n2);
    let pencil = CholeskyPencil::new(g2, opts.threshold)?;
    let floor = 1.0 / n2 as f64;
    let points: Vec<Result<(f64, Vec<c64>)>> = grid
        .par_iter()
        .map(|&z| {
            let zz = z.norm_sqr();
            let l = Mat::from_fn(n2, n2, |i, j| {
                h[(i, j)] - z * a2[(i, j)] - z.conj() * a2[(j, i)].conj() + g2[(i, j)] * zz
            });
            let sol = pencil.solve(l.as_ref())?;
            let linalg::Eigenvalues::Real(vals) = &sol.eigenvalues else { unreachable!() };
            let top = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let mu = vals[0];
            if mu < -NEGATIVE_GATE * top {
                return Err(Error::Indefinite { eigenvalue: mu });
            }
            let v = (0..n2).map(|i| sol.eigenvectors[(i, 0)]).collect();
            Ok((mu.max(0.0).sqrt(), v))
        })
        .collect();
    Ok(collect(grid, epsilon, opts.store_witnesses, points, |t| t + floor <= epsilon))
}

/// `sqrt(v* L v / v* G v)` for the truncated Koopman pencil at `z`, the
/// quantity a Koopman witness certifies.
pub fn koopman_residual(z: c64, v: &[c64], gram: &GramTriple, n2: usize, threshold: f64) -> Result<f64> {
    check_len(v, n2)?;
    if n2 == 0 || n2 > gram.n() {
        return Err(Error::InvalidParameter(format!("N2 = {n2} must lie in 1..={}", gram.n())));
    }
    let w = PsdFactor::new(gram.g.as_ref(), threshold, usize::MAX)?.scaled_vectors(0.5);
    let a_rows = gram.a.as_ref().submatrix(0, 0, n2, gram.n());
    let g2 = gram.g.as_ref().submatrix(0, 0, n2, n2);
    let a2 = gram.a.as_ref().submatrix(0, 0, n2, n2);
    let proj = linalg::mat_vec((w.adjoint() * a_rows.adjoint()).as_ref(), v);
    let vgv = linalg::quad_form(v, g2, v).re;
    let vav = linalg::quad_form(v, a2, v);
    let num = dot(&proj, &proj).re - 2.0 * (z * vav).re + z.norm_sqr() * vgv;
    if !(vgv > 0.0) {
        return Err(Error::Degenerate("v*Gv is not positive".into()));
    }
    gated_sqrt(num, vgv)
}
