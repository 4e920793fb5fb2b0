//! Observable forecasts with certified error bounds from verified
//! Perron–Frobenius mode decompositions.
//!
//! With `|(K* - lambda_i) psi_i| <= eps` and `|K_{x0} - sum_i c_i psi_i| <= delta`,
//! `|g(F^n x0) - sum_i conj(c_i lambda_i^n) <g, psi_i>|` is at most
//! `|g| (delta |K*|^n + eps sum_i |c_i| sum_{j=1}^n |lambda_i|^{n-j} |K*|^{j-1})`.

use std::sync::Arc;

use faer::{c64, Mat};

use crate::dynamics::SnapshotSet;
use crate::gram::GramTriple;
use crate::kernels::KernelSpec;
use crate::linalg::{self, CompensatedSum, PsdFactor, DEFAULT_THRESHOLD};
use crate::spectra::VerifiedEigenpair;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    /// Coefficients normalised so that `|psi_i| = 1`.
    pub eigenpairs: Arc<Vec<VerifiedEigenpair>>,
    pub c: Vec<c64>,
    pub delta: f64,
    /// `max_i residual_i`.
    pub eps_ver: f64,
    pub norm_kstar: f64,
    /// False when `norm_kstar` was defaulted rather than supplied.
    pub norm_kstar_supplied: bool,
    pub x0: Vec<c64>,
}

impl ForecastModel {
    /// `sum_i c_i psi_i` in kernel-section coefficients.
    pub fn representer(&self) -> Vec<c64> {
        let n = self.eigenpairs[0].coeffs.len();
        let mut v = vec![c64::new(0.0, 0.0); n];
        for (p, &ci) in self.eigenpairs.iter().zip(&self.c) {
            for (vl, &pl) in v.iter_mut().zip(&p.coeffs) {
                *vl += ci * pl;
            }
        }
        v
    }

    /// Whether `error_bound` rests on a supplied operator norm.
    pub fn is_certified(&self) -> bool {
        self.norm_kstar_supplied
    }
}

/// `|K_{x0} - sum_j v_j K_{x_j}|^2 = K(x0,x0) - 2 Re(v* b) + v* G v`, with
/// compensated sums, clamped at 0.
fn fit_error_sq(k00: f64, v: &[c64], b: &[c64], gram: &GramTriple) -> f64 {
    let (vgv, _) = linalg::quad_form_dd(v, gram.g.as_ref(), v);
    let mut s = vgv;
    s.add(k00);
    for (vl, bl) in v.iter().zip(b) {
        // Re(conj(v) b) = v.re b.re + v.im b.im
        s.add_prod(-2.0 * vl.re, bl.re);
        s.add_prod(-2.0 * vl.im, bl.im);
    }
    s.value().max(0.0)
}

fn resolve_norm(norm_kstar: Option<f64>) -> Result<(f64, bool)> {
    match norm_kstar {
        Some(k) if k.is_finite() && k >= 0.0 => Ok((k, true)),
        Some(k) => Err(Error::InvalidParameter(format!("norm of K* must be finite and >= 0, got {k}"))),
        None => {
            log::warn!("norm of K* not supplied; assuming 1, which holds for radial kernels only");
            Ok((1.0, false))
        }
    }
}

/// Precomputed least-squares operator for fitting many starting points
/// against one set of eigenpairs.
#[derive(Debug, Clone)]
pub struct ModeFitter {
    pairs: Arc<Vec<VerifiedEigenpair>>,
    /// `c = P b` with `b_l = K(x0, x_l)`.
    p: Mat<c64>,
    eps_ver: f64,
}

impl ModeFitter {
    pub fn new(verified: &[VerifiedEigenpair], gram: &GramTriple) -> Result<Self> {
        if verified.is_empty() {
            return Err(Error::InvalidParameter("no verified eigenpairs to fit".into()));
        }
        let n = gram.n();
        let mut pairs = Vec::with_capacity(verified.len());
        for p in verified {
            if p.coeffs.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.coeffs.len() });
            }
            let nrm = linalg::quad_form(&p.coeffs, gram.g.as_ref(), &p.coeffs).re.max(0.0).sqrt();
            if !(nrm > 0.0) {
                return Err(Error::Degenerate("eigenfunction with zero norm".into()));
            }
            pairs.push(VerifiedEigenpair { coeffs: p.coeffs.iter().map(|v| v / nrm).collect(), ..p.clone() });
        }
        let eps_ver = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
        let k = pairs.len();
        let psi = Mat::from_fn(n, k, |i, j| pairs[j].coeffs[i]);
        // With G = V S V*, |K_{x0} - sum_i c_i psi_i|^2 equals
        // |S^{1/2} V* Psi c - S^{-1/2} V* b|^2 up to a constant; solving this
        // avoids squaring the conditioning of Psi.
        let f = PsdFactor::new(gram.g.as_ref(), DEFAULT_THRESHOLD, usize::MAX)?;
        let lhs = f.scaled_vectors(-0.5).adjoint() * &psi;
        let svd = lhs.thin_svd().map_err(|e| Error::Eigen(format!("svd failed: {e:?}")))?;
        let (u, sv, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let top = (0..sv.nrows()).map(|j| sv[j].re).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..sv.nrows()).filter(|&j| sv[j].re > DEFAULT_THRESHOLD * top).collect();
        // P = V_k S_k^{-1} U_k* S^{-1/2} V*
        let vk = Mat::from_fn(k, keep.len(), |i, j| v[(i, keep[j])] / sv[keep[j]].re);
        let uk = Mat::from_fn(u.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
        let p = vk * (uk.adjoint() * f.scaled_vectors(0.5).adjoint());
        Ok(Self { pairs: Arc::new(pairs), p, eps_ver })
    }

    pub fn eigenpairs(&self) -> &[VerifiedEigenpair] {
        &self.pairs
    }

    pub fn fit(
        &self,
        gram: &GramTriple,
        kernel: &KernelSpec,
        snapshots: &SnapshotSet,
        x0: &[c64],
        norm_kstar: Option<f64>,
    ) -> Result<ForecastModel> {
        let n = gram.n();
        if snapshots.len() != n || self.p.ncols() != n {
            return Err(Error::DimensionMismatch { expected: self.p.ncols(), found: snapshots.len() });
        }
        if x0.len() != snapshots.dim() {
            return Err(Error::DimensionMismatch { expected: snapshots.dim(), found: x0.len() });
        }
        kernel.check_point(x0)?;
        let (norm_kstar, supplied) = resolve_norm(norm_kstar)?;
        let b: Vec<c64> = (0..n).map(|l| kernel.eval(x0, snapshots.x(l))).collect::<Result<_>>()?;
        let c = linalg::mat_vec(self.p.as_ref(), &b);
        let k00 = kernel.eval(x0, x0)?.re;
        let mut model = ForecastModel {
            eigenpairs: Arc::clone(&self.pairs),
            c,
            delta: 0.0,
            eps_ver: self.eps_ver,
            norm_kstar,
            norm_kstar_supplied: supplied,
            x0: x0.to_vec(),
        };
        model.delta = fit_error_sq(k00, &model.representer(), &b, gram).sqrt();
        Ok(model)
    }
}

/// Least-squares fit of `K_{x0}` by the normalised eigenfunctions. `norm_kstar`
/// defaults to 1, which holds for radial kernels. Use [`ModeFitter`] for many
/// starting points.
pub fn fit_model(
    verified: &[VerifiedEigenpair],
    gram: &GramTriple,
    kernel: &KernelSpec,
    snapshots: &SnapshotSet,
    x0: &[c64],
    norm_kstar: Option<f64>,
) -> Result<ForecastModel> {
    if snapshots.len() != gram.n() {
        return Err(Error::DimensionMismatch { expected: gram.n(), found: snapshots.len() });
    }
    ModeFitter::new(verified, gram)?.fit(gram, kernel, snapshots, x0, norm_kstar)
}

/// `sum_i conj(c_i) conj(lambda_i)^n <g, psi_i>`, `<g, psi_i> = sum_j conj(psi_ij) g(x_j)`.
pub fn predict(model: &ForecastModel, g_values: &[c64], n: u32) -> Result<c64> {
    Ok(predict_series(model, g_values, n)?[n as usize])
}

/// Predictions for steps `0..=steps`, sharing the inner products.
pub fn predict_series(model: &ForecastModel, g_values: &[c64], steps: u32) -> Result<Vec<c64>> {
    let len = model.eigenpairs[0].coeffs.len();
    if g_values.len() != len {
        return Err(Error::DimensionMismatch { expected: len, found: g_values.len() });
    }
    let mut terms: Vec<(c64, c64)> = model
        .eigenpairs
        .iter()
        .zip(&model.c)
        .map(|(p, ci)| {
            let inner: c64 = p.coeffs.iter().zip(g_values).map(|(a, g)| a.conj() * g).sum();
            (ci.conj() * inner, p.lambda.conj())
        })
        .collect();
    let mut out = Vec::with_capacity(steps as usize + 1);
    for _ in 0..=steps {
        out.push(terms.iter().map(|t| t.0).sum());
        terms.iter_mut().for_each(|t| t.0 *= t.1);
    }
    Ok(out)
}

/// Direct kEDMD forecast without mode verification: `K_{F^n(x0)}` is
/// approximated by coefficients `d_n = (G^{-1} A)^n G^{-1} b`, and each
/// observable by `sum_l conj(d_l) g(x_l)`. Returns one series per observable
/// over steps `0..=steps`.
pub fn kedmd_forecast(
    gram: &GramTriple,
    kernel: &KernelSpec,
    snapshots: &SnapshotSet,
    x0: &[c64],
    g_values: &[Vec<c64>],
    steps: u32,
) -> Result<Vec<Vec<c64>>> {
    use faer::linalg::solvers::Solve;
    let n = gram.n();
    if snapshots.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: snapshots.len() });
    }
    if let Some(g) = g_values.iter().find(|g| g.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: g.len() });
    }
    kernel.check_point(x0)?;
    let lu = gram.g.partial_piv_lu();
    let b = Mat::from_fn(n, 1, |l, _| kernel.eval_unchecked(x0, snapshots.x(l)));
    let step = lu.solve(&gram.a);
    let mut d = lu.solve(&b);
    if d.col(0).iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("singular Gram matrix".into()));
    }
    let mut out = vec![Vec::with_capacity(steps as usize + 1); g_values.len()];
    for k in 0..=steps {
        if k > 0 {
            d = &step * &d;
        }
        for (o, g) in out.iter_mut().zip(g_values) {
            o.push((0..n).map(|l| d[(l, 0)].conj() * g[l]).sum());
        }
    }
    Ok(out)
}

/// `sum_{j=1}^n a^{n-j} k^{j-1}` in closed form.
fn geometric(a: f64, k: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let d = a - k;
    if d.abs() <= 1e-12 * a.max(k).max(f64::MIN_POSITIVE) {
        n as f64 * a.max(k).powi(n as i32 - 1)
    } else {
        (a.powi(n as i32) - k.powi(n as i32)) / d
    }
}

pub fn error_bound(model: &ForecastModel, norm_g: f64, n: u32) -> f64 {
    let k = model.norm_kstar;
    let modes: f64 = model
        .eigenpairs
        .iter()
        .zip(&model.c)
        .map(|(p, ci)| ci.norm() * geometric(p.lambda.norm(), k, n))
        .sum();
    norm_g * (model.delta * k.powi(n as i32) + model.eps_ver * modes)
}

/// `C = G^+ X^T`: column `k` holds kernel-section coefficients of the
/// projected `k`-th state coordinate.
pub fn project_state_observables(gram: &GramTriple, snapshots: &SnapshotSet) -> Result<Mat<c64>> {
    let n = gram.n();
    if snapshots.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: snapshots.len() });
    }
    let x = Mat::from_fn(n, snapshots.dim(), |i, k| snapshots.x(i)[k]);
    Ok(PsdFactor::new(gram.g.as_ref(), DEFAULT_THRESHOLD, usize::MAX)?.pinv_apply(x.as_ref()))
}

/// RKHS norm `sqrt(c* G c)` of `sum_i c_i K_{x_i}`.
pub fn rkhs_norm(c: &[c64], gram: &GramTriple) -> Result<f64> {
    if c.len() != gram.n() {
        return Err(Error::DimensionMismatch { expected: gram.n(), found: c.len() });
    }
    let (q, _) = linalg::quad_form_dd(c, gram.g.as_ref(), c);
    Ok(q.value().max(0.0).sqrt())
}

/// `g(x_j) = sum_i c_i K(x_j, x_i)` for `g = sum_i c_i K_{x_i}`.
pub fn values_at_snapshots(c: &[c64], gram: &GramTriple) -> Result<Vec<c64>> {
    if c.len() != gram.n() {
        return Err(Error::DimensionMismatch { expected: gram.n(), found: c.len() });
    }
    // G[j,i] = K(x_i, x_j) = conj(K(x_j, x_i))
    Ok((0..gram.n())
        .map(|j| {
            let mut s = CompensatedSum::default();
            let mut t = CompensatedSum::default();
            for (i, ci) in c.iter().enumerate() {
                let k = gram.g[(j, i)].conj();
                s.add_prod(k.re, ci.re);
                s.add_prod(-k.im, ci.im);
                t.add_prod(k.re, ci.im);
                t.add_prod(k.im, ci.re);
            }
            c64::new(s.value(), t.value())
        })
        .collect())
}
