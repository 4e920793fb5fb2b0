//! Dense Hermitian and generalized eigensolvers, truncated pseudo-inverses
//! and perturbation certificates.

use faer::{c64, Mat, MatRef, Par, Side};

use crate::{Error, Result};

/// Relative eigenvalue cutoff applied wherever `G^{-1}` appears.
pub const DEFAULT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Eigenvalues {
    /// Hermitian-definite pencil, ascending.
    Real(Vec<f64>),
    Complex(Vec<c64>),
}

#[derive(Debug, Clone)]
pub struct GeneralizedEigResult {
    pub eigenvalues: Eigenvalues,
    /// Column `i` pairs with eigenvalue `i`.
    pub eigenvectors: Mat<c64>,
    /// Smallest eigenvalue of the (retained) right-hand matrix.
    pub conditioning: f64,
}

impl GeneralizedEigResult {
    pub fn complex_eigenvalues(&self) -> Vec<c64> {
        match &self.eigenvalues {
            Eigenvalues::Real(v) => v.iter().map(|&x| c64::new(x, 0.0)).collect(),
            Eigenvalues::Complex(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn eig_err(e: impl std::fmt::Debug) -> Error {
    Error::Eigen(format!("{e:?}"))
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.
/// Only the lower triangle is read.
pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let e = m.self_adjoint_eigen(Side::Lower).map_err(eig_err)?;
    let vals = e.S().column_vector().iter().map(|v| v.re).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower).map_err(eig_err)
}

/// Largest singular value.
pub fn spectral_norm(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let s = m.singular_values().map_err(eig_err)?;
    Ok(s[0])
}

/// Dominant eigenpairs of a Hermitian PSD matrix above a relative cutoff.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    /// Retained eigenvalues, descending.
    pub values: Vec<f64>,
    /// Matching orthonormal eigenvectors, `n x r`.
    pub vectors: Mat<c64>,
}

impl PsdFactor {
    /// Keeps at most `max_rank` eigenpairs with eigenvalue `> threshold * max`.
    pub fn new(m: MatRef<'_, c64>, threshold: f64, max_rank: usize) -> Result<Self> {
        let (vals, vecs) = hermitian_eigen(m)?;
        let n = vals.len();
        let top = vals.last().copied().unwrap_or(0.0);
        if !(top > 0.0) {
            return Err(Error::RankZero);
        }
        let keep: Vec<usize> = (0..n)
            .rev()
            .filter(|&i| vals[i] > threshold * top)
            .take(max_rank)
            .collect();
        if keep.is_empty() {
            return Err(Error::RankZero);
        }
        let values = keep.iter().map(|&i| vals[i]).collect();
        let vectors = Mat::from_fn(n, keep.len(), |i, j| vecs[(i, keep[j])]);
        Ok(Self { values, vectors })
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// `U diag(lambda^{-p})`; `p = 1/2` whitens the matrix.
    pub fn scaled_vectors(&self, p: f64) -> Mat<c64> {
        let u = &self.vectors;
        Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * self.values[j].powf(-p))
    }

    /// Truncated pseudo-inverse applied to `rhs`.
    pub fn pinv_apply(&self, rhs: MatRef<'_, c64>) -> Mat<c64> {
        let w = self.scaled_vectors(0.5);
        let t = w.adjoint() * rhs;
        &w * &t
    }
}

/// Cholesky reduction of a Hermitian-definite pencil `(., C)`, reusable for
/// many left-hand matrices.
#[derive(Debug, Clone)]
pub struct CholeskyPencil {
    l: Mat<c64>,
    sigma_inf: f64,
}

impl CholeskyPencil {
    pub fn new(c: MatRef<'_, c64>, threshold: f64) -> Result<Self> {
        if c.nrows() != c.ncols() {
            return Err(Error::DimensionMismatch { expected: c.nrows(), found: c.ncols() });
        }
        let c = hermitian_part(c);
        let ev = hermitian_eigenvalues(c.as_ref())?;
        let (lo, hi) = (ev[0], *ev.last().unwrap_or(&0.0));
        if !(lo > threshold * hi) || !(hi > 0.0) {
            return Err(Error::Indefinite { eigenvalue: lo });
        }
        let llt = c.llt(Side::Lower).map_err(|_| Error::Indefinite { eigenvalue: lo })?;
        Ok(Self { l: llt.L().to_owned(), sigma_inf: lo })
    }

    pub fn sigma_inf(&self) -> f64 {
        self.sigma_inf
    }

    /// `L^{-1} B L^{-*}`, symmetrized.
    fn reduce(&self, b: MatRef<'_, c64>) -> Mat<c64> {
        let mut x = b.to_owned();
        self.l.solve_lower_triangular_in_place(x.as_mut());
        let mut m = x.adjoint().to_owned();
        self.l.solve_lower_triangular_in_place(m.as_mut());
        hermitian_part(m.as_ref())
    }

    fn back_transform(&self, mut y: Mat<c64>) -> Mat<c64> {
        self.l.adjoint().solve_upper_triangular_in_place(y.as_mut());
        y
    }

    pub fn solve(&self, b: MatRef<'_, c64>) -> Result<GeneralizedEigResult> {
        if b.nrows() != self.l.nrows() || b.ncols() != self.l.nrows() {
            return Err(Error::DimensionMismatch { expected: self.l.nrows(), found: b.nrows() });
        }
        let (vals, y) = hermitian_eigen(self.reduce(b).as_ref())?;
        Ok(GeneralizedEigResult {
            eigenvalues: Eigenvalues::Real(vals),
            eigenvectors: self.back_transform(y),
            conditioning: self.sigma_inf,
        })
    }

    pub fn smallest(&self, b: MatRef<'_, c64>) -> Result<(f64, Vec<c64>)> {
        let r = self.solve(b)?;
        let Eigenvalues::Real(vals) = r.eigenvalues else { unreachable!() };
        let v = (0..r.eigenvectors.nrows()).map(|i| r.eigenvectors[(i, 0)]).collect();
        Ok((vals[0], v))
    }
}

/// Solves `B v = mu C v` for Hermitian `B` and Hermitian positive definite
/// `C` by Cholesky reduction. Eigenvalues ascending, eigenvectors
/// `C`-orthonormal.
pub fn hermitian_definite_geig(
    b: MatRef<'_, c64>,
    c: MatRef<'_, c64>,
    threshold: f64,
) -> Result<GeneralizedEigResult> {
    CholeskyPencil::new(c, threshold)?.solve(b)
}

/// Smallest eigenpair of the Hermitian-definite pencil `(B, C)`.
pub fn smallest_geig_pair(b: MatRef<'_, c64>, c: MatRef<'_, c64>, threshold: f64) -> Result<(f64, Vec<c64>)> {
    CholeskyPencil::new(c, threshold)?.smallest(b)
}

/// Eigenpairs of `G^+ A` on the retained range of `G`.
///
/// With `W = U_r Lambda_r^{-1/2}`, `G^+ A W = W (W* A W)`, so eigenvectors
/// `y` of the `r x r` matrix `W* A W` map to pencil eigenvectors `W y`.
pub fn general_geig(a: MatRef<'_, c64>, g: MatRef<'_, c64>, threshold: f64) -> Result<GeneralizedEigResult> {
    if a.nrows() != g.nrows() || a.ncols() != g.ncols() || g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch { expected: g.nrows(), found: a.nrows() });
    }
    let f = PsdFactor::new(hermitian_part(g).as_ref(), threshold, usize::MAX)?;
    let w = f.scaled_vectors(0.5);
    let m = w.adjoint() * a * &w;
    let e = m.eigen().map_err(eig_err)?;
    let vals = e.S().column_vector().iter().copied().collect();
    let vecs = &w * e.U();
    Ok(GeneralizedEigResult {
        eigenvalues: Eigenvalues::Complex(vals),
        eigenvectors: vecs,
        conditioning: *f.values.last().expect("rank >= 1"),
    })
}

/// Eigenvalue perturbation certificate for `H g = mu G g` when `H`, `G` are
/// known up to errors `dh`, `dg` in operator norm:
/// `dh/s + (norm_h + dh) dg / (s (s - dg))` with `s = sigma_inf(G)`.
pub fn perturbed_geig_bound(norm_h: f64, dh: f64, dg: f64, sigma_inf: f64) -> Result<f64> {
    if !(dg < sigma_inf) {
        return Err(Error::CertificateUnavailable { dg, sigma: sigma_inf });
    }
    Ok(dh / sigma_inf + (norm_h + dh) / (sigma_inf * (sigma_inf - dg)) * dg)
}

/// Minimizer of `c* M c - 2 Re(c* beta)` over the retained eigenspace of a
/// Hermitian PSD `M`.
pub fn solve_least_squares(m: MatRef<'_, c64>, beta: &[c64], threshold: f64) -> Result<Vec<c64>> {
    if m.nrows() != beta.len() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: beta.len() });
    }
    let (vals, u) = hermitian_eigen(hermitian_part(m).as_ref())?;
    let n = beta.len();
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let mut c = vec![c64::new(0.0, 0.0); n];
    if top <= 0.0 {
        return Ok(c);
    }
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= threshold * top {
            continue;
        }
        let proj: c64 = (0..n).map(|i| u[(i, k)].conj() * beta[i]).sum::<c64>() / lam;
        for (i, ci) in c.iter_mut().enumerate() {
            *ci += u[(i, k)] * proj;
        }
    }
    Ok(c)
}

/// Minimum-norm solution of `min |B c - rhs|` by thin SVD, dropping singular
/// values `<= threshold * max`.
pub fn solve_least_squares_rect(b: MatRef<'_, c64>, rhs: &[c64], threshold: f64) -> Result<Vec<c64>> {
    if b.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch { expected: b.nrows(), found: rhs.len() });
    }
    let mut c = vec![c64::new(0.0, 0.0); b.ncols()];
    if b.nrows() == 0 || b.ncols() == 0 {
        return Ok(c);
    }
    let svd = b.thin_svd().map_err(|e| Error::Eigen(format!("svd failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let top = (0..s.nrows()).map(|k| s[k].re).fold(0.0, f64::max);
    for k in 0..s.nrows() {
        let sk = s[k].re;
        if !(sk > threshold * top) {
            continue;
        }
        let proj: c64 = (0..rhs.len()).map(|i| u[(i, k)].conj() * rhs[i]).sum::<c64>() / sk;
        for (i, ci) in c.iter_mut().enumerate() {
            *ci += v[(i, k)] * proj;
        }
    }
    Ok(c)
}

/// Unitary Hessenberg reduction `M = Q H Q*`; shifted solves with `H` cost
/// `O(n^2)` and stay backward stable for non-normal `M`.
#[derive(Debug, Clone)]
pub struct HessenbergForm {
    h: Mat<c64>,
    q: Mat<c64>,
}

impl HessenbergForm {
    pub fn new(m: MatRef<'_, c64>) -> Result<Self> {
        use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
        use faer::linalg::{evd::hessenberg, householder, qr};
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
        }
        let mut h = m.to_owned();
        let mut q = Mat::<c64>::identity(n, n);
        if n > 1 {
            let bs = qr::no_pivoting::factor::recommended_block_size::<c64>(n, n);
            let mut hh = Mat::<c64>::zeros(bs, n - 1);
            let req = StackReq::any_of(&[
                hessenberg::hessenberg_in_place_scratch::<c64>(n, bs, Par::Seq, Default::default()),
                householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<c64>(n - 1, bs, n),
            ]);
            let mut buf = MemBuffer::new(req);
            let stack = MemStack::new(&mut buf);
            hessenberg::hessenberg_in_place(h.as_mut(), hh.as_mut(), Par::Seq, stack, Default::default());
            householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
                h.as_ref().submatrix(1, 0, n - 1, n - 1),
                hh.as_ref(),
                faer::Conj::No,
                q.as_mut().submatrix_mut(1, 1, n - 1, n - 1),
                Par::Seq,
                stack,
            );
            for j in 0..n {
                for i in j + 2..n {
                    h[(i, j)] = c64::new(0.0, 0.0);
                }
            }
        }
        Ok(Self { h, q })
    }

    pub fn h(&self) -> MatRef<'_, c64> {
        self.h.as_ref()
    }

    pub fn q(&self) -> MatRef<'_, c64> {
        self.q.as_ref()
    }

    /// `Q* v`.
    pub fn to_reduced(&self, v: &[c64]) -> Vec<c64> {
        mat_vec(self.q.adjoint().to_owned().as_ref(), v)
    }

    /// Solves `(H - z I) x = b` by Gaussian elimination with adjacent-row
    /// pivoting; errors when a pivot vanishes.
    pub fn solve_shifted(&self, z: c64, b: &[c64]) -> Result<Vec<c64>> {
        let n = self.h.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let mut u = Mat::from_fn(n, n, |i, j| self.h[(i, j)] - if i == j { z } else { c64::new(0.0, 0.0) });
        let mut x = b.to_vec();
        let scale = u.norm_max().max(f64::MIN_POSITIVE);
        for k in 0..n.saturating_sub(1) {
            if u[(k + 1, k)].norm() > u[(k, k)].norm() {
                for j in k..n {
                    let t = u[(k, j)];
                    u[(k, j)] = u[(k + 1, j)];
                    u[(k + 1, j)] = t;
                }
                x.swap(k, k + 1);
            }
            let piv = u[(k, k)];
            if piv.norm() <= f64::EPSILON * scale * 1e-3 {
                return Err(Error::Degenerate(format!("shift {z} is an eigenvalue to working precision")));
            }
            let l = u[(k + 1, k)] / piv;
            if l != c64::new(0.0, 0.0) {
                for j in k..n {
                    let t = u[(k, j)];
                    u[(k + 1, j)] -= l * t;
                }
                let t = x[k];
                x[k + 1] -= l * t;
            }
        }
        for k in (0..n).rev() {
            let piv = u[(k, k)];
            if piv.norm() <= f64::EPSILON * scale * 1e-3 {
                return Err(Error::Degenerate(format!("shift {z} is an eigenvalue to working precision")));
            }
            let mut s = x[k];
            for j in k + 1..n {
                s -= u[(k, j)] * x[j];
            }
            x[k] = s / piv;
        }
        Ok(x)
    }
}

/// `M v` for a slice `v`.
pub fn mat_vec(m: MatRef<'_, c64>, v: &[c64]) -> Vec<c64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// `u* M v`.
pub fn quad_form(u: &[c64], m: MatRef<'_, c64>, v: &[c64]) -> c64 {
    let mv = mat_vec(m, v);
    u.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
}

/// Compensated accumulator: sums of products are as accurate as if computed
/// in twice the working precision (Dekker products, Knuth sums). Avoids
/// `mul_add`, which is a slow software routine without hardware FMA.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    s: f64,
    c: f64,
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline(always)]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let ((ah, al), (bh, bl)) = (split(a), split(b));
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl CompensatedSum {
    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.s, x);
        self.s = s;
        self.c += e;
    }

    #[inline(always)]
    pub fn add_prod(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(p);
        self.c += e;
    }

    /// Adds `a * x` for a compensated `x`.
    pub fn add_scaled(&mut self, a: f64, x: CompensatedSum) {
        self.add_prod(a, x.s);
        self.c += a * x.c;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// `u* M v` with compensated accumulation, as `(re, im)`.
pub fn quad_form_dd(u: &[c64], m: MatRef<'_, c64>, v: &[c64]) -> (CompensatedSum, CompensatedSum) {
    let n = m.nrows();
    let mut wr = vec![CompensatedSum::default(); n];
    let mut wi = vec![CompensatedSum::default(); n];
    for (j, b) in v.iter().enumerate() {
        let col = m.col(j);
        for i in 0..n {
            let a = col[i];
            wr[i].add_prod(a.re, b.re);
            wr[i].add_prod(-a.im, b.im);
            wi[i].add_prod(a.re, b.im);
            wi[i].add_prod(a.im, b.re);
        }
    }
    let (mut sr, mut si) = (CompensatedSum::default(), CompensatedSum::default());
    for (i, c) in u.iter().enumerate() {
        sr.add_scaled(c.re, wr[i]);
        sr.add_scaled(c.im, wi[i]);
        si.add_scaled(c.re, wi[i]);
        si.add_scaled(-c.im, wr[i]);
    }
    (sr, si)
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> Mat<c64> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { c64::new(v[i], 0.0) } else { c64::new(0.0, 0.0) })
    }

    fn real_vals(r: &GeneralizedEigResult) -> Vec<f64> {
        match &r.eigenvalues {
            Eigenvalues::Real(v) => v.clone(),
            _ => panic!("expected real eigenvalues"),
        }
    }

    /// Eigenvalues of `C^{-1} B` from nalgebra's LU and general complex Schur.
    fn oracle_eigs(b: MatRef<'_, c64>, c: MatRef<'_, c64>) -> Vec<f64> {
        let cb = to_na(c).lu().solve(&to_na(b)).unwrap();
        let mut v: Vec<f64> = cb.eigenvalues().expect("schur converged").iter().map(|z| z.re).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn pencil_basic_examples() {
        let c = diag(&[1.0, 2.0, 3.0]);
        assert!(real_vals(&hermitian_definite_geig(c.as_ref(), c.as_ref(), DEFAULT_THRESHOLD).unwrap())
            .iter()
            .all(|&m| (m - 1.0).abs() < 1e-14));
        let r = hermitian_definite_geig(diag(&[1.0, 2.0]).as_ref(), diag(&[1.0, 1.0]).as_ref(), DEFAULT_THRESHOLD)
            .unwrap();
        assert_eq!(real_vals(&r), vec![1.0, 2.0]);
        let (mu, v) = smallest_geig_pair(diag(&[3.0, 1.0, 2.0]).as_ref(), diag(&[1.0; 3]).as_ref(), 1e-12).unwrap();
        assert!((mu - 1.0).abs() < 1e-15);
        assert!((v[1].norm() - 1.0).abs() < 1e-14 && v[0].norm() < 1e-14 && v[2].norm() < 1e-14);
    }

    #[test]
    fn indefinite_c_names_eigenvalue() {
        let err = hermitian_definite_geig(diag(&[1.0, 1.0]).as_ref(), diag(&[1.0, -0.5]).as_ref(), 1e-12)
            .unwrap_err();
        match err {
            Error::Indefinite { eigenvalue } => assert_eq!(eigenvalue, -0.5),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn pencil_matches_dense_oracle_and_residual_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(2..9);
            let b = random_hermitian(&mut rng, n);
            let c = random_spd(&mut rng, n);
            let r = hermitian_definite_geig(b.as_ref(), c.as_ref(), DEFAULT_THRESHOLD).unwrap();
            let got = real_vals(&r);
            let want = oracle_eigs(b.as_ref(), c.as_ref());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-9, "{g} vs {w}");
            }
            assert!(got.windows(2).all(|w| w[0] <= w[1]));
            let nb = spectral_norm(b.as_ref()).unwrap();
            let nc = spectral_norm(c.as_ref()).unwrap();
            for (k, &mu) in got.iter().enumerate() {
                let v: Vec<c64> = (0..n).map(|i| r.eigenvectors[(i, k)]).collect();
                let bv = mat_vec(b.as_ref(), &v);
                let cv = mat_vec(c.as_ref(), &v);
                let res: f64 = bv.iter().zip(&cv).map(|(x, y)| (x - y * mu).norm_sqr()).sum::<f64>().sqrt();
                let vn: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                assert!(res <= 1e-8 * (nb + mu.abs() * nc) * vn);
            }
        }
    }

    #[test]
    fn smallest_pair_matches_full_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = rng.random_range(2..10);
            let b = random_hermitian(&mut rng, n);
            let c = random_spd(&mut rng, n);
            let (mu, _) = smallest_geig_pair(b.as_ref(), c.as_ref(), DEFAULT_THRESHOLD).unwrap();
            let full = oracle_eigs(b.as_ref(), c.as_ref());
            assert!((mu - full[0]).abs() <= 1e-10);
        }
    }

    #[test]
    fn smallest_pair_beats_random_rayleigh_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let b = random_hermitian(&mut rng, n);
        let c = random_spd(&mut rng, n);
        let (mu, _) = smallest_geig_pair(b.as_ref(), c.as_ref(), DEFAULT_THRESHOLD).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..10_000 {
            let v = random_complex(&mut rng, n, 1);
            let v: Vec<c64> = (0..n).map(|i| v[(i, 0)]).collect();
            let q = quad_form(&v, b.as_ref(), &v).re / quad_form(&v, c.as_ref(), &v).re;
            best = best.min(q);
        }
        assert!(mu <= best + 1e-12, "{mu} > sampled {best}");
    }

    #[test]
    fn general_geig_examples() {
        let g = diag(&[1.0, 2.0, 0.5]);
        let r = general_geig(g.as_ref(), g.as_ref(), DEFAULT_THRESHOLD).unwrap();
        assert!(r.complex_eigenvalues().iter().all(|l| (l - 1.0).norm() < 1e-13));
        let zero = Mat::<c64>::zeros(3, 3);
        let r = general_geig(zero.as_ref(), g.as_ref(), DEFAULT_THRESHOLD).unwrap();
        assert!(r.complex_eigenvalues().iter().all(|l| l.norm() < 1e-15));
        let mut nil = Mat::<c64>::zeros(2, 2);
        nil[(0, 1)] = c64::new(1.0, 0.0);
        let r = general_geig(nil.as_ref(), diag(&[1.0, 1.0]).as_ref(), DEFAULT_THRESHOLD).unwrap();
        assert!(r.complex_eigenvalues().iter().all(|l| l.norm() < 1e-7));
        assert!(matches!(
            general_geig(zero.as_ref(), zero.as_ref(), DEFAULT_THRESHOLD),
            Err(Error::RankZero)
        ));
    }

    #[test]
    fn general_geig_pairs_satisfy_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 7;
        let a = random_complex(&mut rng, n, n);
        let g = random_spd(&mut rng, n);
        let r = general_geig(a.as_ref(), g.as_ref(), DEFAULT_THRESHOLD).unwrap();
        for (k, lam) in r.complex_eigenvalues().into_iter().enumerate() {
            let v: Vec<c64> = (0..n).map(|i| r.eigenvectors[(i, k)]).collect();
            let av = mat_vec(a.as_ref(), &v);
            let gv = mat_vec(g.as_ref(), &v);
            let res: f64 = av.iter().zip(&gv).map(|(x, y)| (x - y * lam).norm_sqr()).sum::<f64>().sqrt();
            assert!(res < 1e-10, "{res}");
        }
    }

    #[test]
    fn perturbation_bound_examples() {
        assert_eq!(perturbed_geig_bound(1.0, 0.0, 0.0, 2.0).unwrap(), 0.0);
        assert!((perturbed_geig_bound(1.0, 0.1, 0.0, 2.0).unwrap() - 0.05).abs() < 1e-15);
        assert!((perturbed_geig_bound(1.0, 0.1, 0.5, 2.0).unwrap() - (0.05 + 1.1 / 3.0 * 0.5)).abs() < 1e-15);
        assert!(matches!(perturbed_geig_bound(1.0, 0.1, 2.0, 2.0), Err(Error::CertificateUnavailable { .. })));
    }

    #[test]
    fn least_squares_examples() {
        let b = [c64::new(1.0, 2.0), c64::new(-3.0, 0.5)];
        let c = solve_least_squares(diag(&[1.0, 1.0]).as_ref(), &b, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(c, b.to_vec());
        let c = solve_least_squares(diag(&[2.0, 0.0]).as_ref(), &[c64::new(2.0, 0.0), c64::new(5.0, 0.0)], 1e-12)
            .unwrap();
        assert!((c[0] - 1.0).norm() < 1e-15 && c[1].norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_spd(&mut rng, 6);
        let beta: Vec<c64> = (0..6).map(|_| c64::new(rng.random(), rng.random())).collect();
        let c = solve_least_squares(m.as_ref(), &beta, DEFAULT_THRESHOLD).unwrap();
        let mc = mat_vec(m.as_ref(), &c);
        let err: f64 = mc.iter().zip(&beta).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = beta.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * nb);
    }

    #[test]
    fn hessenberg_form_reconstructs_and_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [1, 2, 7, 40] {
            let m = random_complex(&mut rng, n, n);
            let f = HessenbergForm::new(m.as_ref()).unwrap();
            let back = f.q() * f.h() * f.q().adjoint();
            assert!((&back - &m).norm_max() < 1e-12);
            assert!((f.q().adjoint() * f.q() - Mat::<c64>::identity(n, n)).norm_max() < 1e-13);
            for j in 0..n {
                for i in j + 2..n {
                    assert_eq!(f.h()[(i, j)], c64::new(0.0, 0.0));
                }
            }
            let z = c64::new(0.3, -0.2);
            let b: Vec<c64> = (0..n).map(|_| c64::new(rng.random(), rng.random())).collect();
            let x = f.solve_shifted(z, &b).unwrap();
            let shifted = to_na(f.h()) - nalgebra::DMatrix::identity(n, n) * nalgebra::Complex::new(z.re, z.im);
            let want = shifted.lu().solve(&nalgebra::DVector::from_iterator(n, b.iter().map(|v| nalgebra::Complex::new(v.re, v.im)))).unwrap();
            for (g, w) in x.iter().zip(want.iter()) {
                assert!((g - c64::new(w.re, w.im)).norm() < 1e-10 * (1.0 + w.norm()));
            }
        }
        let f = HessenbergForm::new(diag(&[1.0, 2.0]).as_ref()).unwrap();
        assert!(f.solve_shifted(c64::new(2.0, 0.0), &[c64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn rectangular_least_squares_matches_pseudo_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (r, c) in [(7, 3), (3, 7), (5, 5)] {
            let b = random_complex(&mut rng, r, c);
            let rhs: Vec<c64> = (0..r).map(|_| c64::new(rng.random(), rng.random())).collect();
            let got = solve_least_squares_rect(b.as_ref(), &rhs, DEFAULT_THRESHOLD).unwrap();
            let pinv = to_na(b.as_ref()).pseudo_inverse(1e-14).unwrap();
            let want = pinv * nalgebra::DVector::from_iterator(r, rhs.iter().map(|z| nalgebra::Complex::new(z.re, z.im)));
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - c64::new(w.re, w.im)).norm() < 1e-10, "{g} vs {w}");
            }
        }
        let z = solve_least_squares_rect(Mat::<c64>::zeros(3, 2).as_ref(), &[c64::new(1.0, 0.0); 3], 1e-12).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn congruence_invariance(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let b = random_hermitian(&mut rng, n);
            let c = random_spd(&mut rng, n);
            let mut s = random_complex(&mut rng, n, n);
            for i in 0..n { s[(i, i)] += c64::new(3.0, 0.0); }
            let b2 = s.adjoint() * &b * &s;
            let c2 = s.adjoint() * &c * &s;
            let e1 = real_vals(&hermitian_definite_geig(b.as_ref(), c.as_ref(), 1e-14).unwrap());
            let e2 = real_vals(&hermitian_definite_geig(b2.as_ref(), c2.as_ref(), 1e-14).unwrap());
            for (x, y) in e1.iter().zip(&e2) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn weyl_shift(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..10);
            let b = random_hermitian(&mut rng, n);
            let e = random_hermitian(&mut rng, n);
            let eta = spectral_norm(e.as_ref()).unwrap();
            let id = diag(&vec![1.0; n]);
            let bp = &b + &e;
            let e1 = real_vals(&hermitian_definite_geig(b.as_ref(), id.as_ref(), 1e-12).unwrap());
            let e2 = real_vals(&hermitian_definite_geig(bp.as_ref(), id.as_ref(), 1e-12).unwrap());
            for (x, y) in e1.iter().zip(&e2) {
                prop_assert!((x - y).abs() <= eta + 1e-10);
            }
        }
    }
}
