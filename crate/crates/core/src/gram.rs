//! Gram matrices `G`, `A`, `R` and the compressed kEDMD basis.
//!
//! Index convention: `G[j,k] = K(x_k, x_j)`, `A[j,k] = K(y_k, x_j)`,
//! `R[j,k] = K(y_k, y_j)`, so for `g = sum_i c_i K_{x_i}` the norm is
//! `c* G c` and `<K* g, g> = c* A c`.

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Point, SnapshotSet, System};
use crate::kernels::KernelSpec;
use crate::linalg::{self, PsdFactor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kernel: String,
    pub snapshot_hash: String,
    pub samples: usize,
    /// Built from exact transition rows instead of samples.
    pub exact_transitions: bool,
}

#[derive(Debug, Clone)]
pub struct GramTriple {
    pub g: Mat<c64>,
    pub a: Mat<c64>,
    pub r: Mat<c64>,
    pub provenance: Provenance,
}

impl GramTriple {
    pub fn new(g: Mat<c64>, a: Mat<c64>, r: Mat<c64>, provenance: Provenance) -> Result<Self> {
        let n = g.nrows();
        for m in [&g, &a, &r] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
            }
        }
        if n == 0 {
            return Err(Error::InvalidParameter("empty Gram triple".into()));
        }
        let g = linalg::hermitian_part(g.as_ref());
        let r = linalg::hermitian_part(r.as_ref());
        Ok(Self { g, a, r, provenance })
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        [&self.g, &self.a, &self.r]
            .iter()
            .all(|m| (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0)))
    }

    /// The triple for the first `n` snapshots.
    pub fn leading(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n() {
            return Err(Error::InvalidParameter(format!("leading block {n} out of range 1..={}", self.n())));
        }
        let cut = |m: &Mat<c64>| m.as_ref().submatrix(0, 0, n, n).to_owned();
        Ok(Self { g: cut(&self.g), a: cut(&self.a), r: cut(&self.r), provenance: self.provenance.clone() })
    }
}

/// Successor distribution of one snapshot: points with weights summing to 1.
type Successors = Vec<(Point, f64)>;

/// Groups identical samples so repeated discrete states cost one kernel
/// evaluation.
fn empirical(samples: impl Iterator<Item = Point>, count: usize) -> Successors {
    let mut pts: Vec<Point> = samples.collect();
    let key = |p: &Point| p.iter().flat_map(|v| [v.re.to_bits(), v.im.to_bits()]).collect::<Vec<u64>>();
    pts.sort_by_key(key);
    let w = 1.0 / count as f64;
    let mut out: Successors = Vec::new();
    for p in pts {
        match out.last_mut() {
            Some((q, acc)) if *q == p => *acc += w,
            _ => out.push((p, w)),
        }
    }
    out
}

/// Assembles `G`, `A`, `R` from sampled snapshots. With `S > 1` successors,
/// `A` and `R` are the exact Gram entries of the empirical mean embeddings
/// `(1/S) sum_s K_{y_s}`, which averages over all `S^2` sample pairs.
pub fn build_gram(snapshots: &SnapshotSet, kernel: &KernelSpec) -> Result<GramTriple> {
    let n = snapshots.len();
    let s = snapshots.samples();
    let xs: Vec<Point> = (0..n).map(|i| snapshots.x(i).to_vec()).collect();
    let succ: Vec<Successors> = (0..n)
        .map(|i| {
            if s == 1 {
                vec![(snapshots.y(i, 0).to_vec(), 1.0)]
            } else {
                empirical((0..s).map(|k| snapshots.y(i, k).to_vec()), s)
            }
        })
        .collect();
    let prov = Provenance {
        kernel: kernel.to_string(),
        snapshot_hash: snapshots.hash(),
        samples: s,
        exact_transitions: false,
    };
    assemble(&xs, &succ, kernel, prov)
}

/// Gram triple of a Markov chain on the integer states `states` using the
/// exact transition rows, `A[j,k] = sum_y p(x_k, y) K(y, x_j)`.
pub fn build_gram_markov_exact(chain: &System, states: &[i64], kernel: &KernelSpec) -> Result<GramTriple> {
    let xs: Vec<Point> = states.iter().map(|&n| vec![c64::new(n as f64, 0.0)]).collect();
    let succ: Vec<Successors> = xs
        .iter()
        .map(|x| {
            Ok(chain
                .transition_support(x)?
                .into_iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(y, p)| (vec![c64::new(y as f64, 0.0)], p))
                .collect())
        })
        .collect::<Result<_>>()?;
    let set = SnapshotSet::new(1, 1, xs.concat(), xs.concat())?;
    let prov = Provenance {
        kernel: kernel.to_string(),
        snapshot_hash: set.hash(),
        samples: 1,
        exact_transitions: true,
    };
    assemble(&xs, &succ, kernel, prov)
}

fn assemble(xs: &[Point], succ: &[Successors], kernel: &KernelSpec, provenance: Provenance) -> Result<GramTriple> {
    for x in xs {
        kernel.check_point(x)?;
    }
    for row in succ {
        for (y, _) in row {
            kernel.check_point(y)?;
        }
    }
    let n = xs.len();
    let k = |a: &[c64], b: &[c64]| kernel.eval_unchecked(a, b);
    let embed = |row: &Successors, x: &[c64]| -> c64 { row.iter().map(|(y, w)| k(y, x) * *w).sum() };
    let cross = |rk: &Successors, rj: &Successors| -> c64 {
        rk.iter().map(|(yk, wk)| rj.iter().map(|(yj, wj)| k(yk, yj) * (wk * wj)).sum::<c64>()).sum()
    };

    // column k: G and R only for j >= k, A in full
    let cols: Vec<(Vec<c64>, Vec<c64>, Vec<c64>)> = (0..n)
        .into_par_iter()
        .map(|kk| {
            let g = (kk..n).map(|j| k(&xs[kk], &xs[j])).collect();
            let a = (0..n).map(|j| embed(&succ[kk], &xs[j])).collect();
            let r = (kk..n).map(|j| cross(&succ[kk], &succ[j])).collect();
            (g, a, r)
        })
        .collect();

    let lower = |pick: fn(&(Vec<c64>, Vec<c64>, Vec<c64>)) -> &Vec<c64>| {
        Mat::from_fn(n, n, |j, kk| {
            if j == kk {
                c64::new(pick(&cols[kk])[0].re, 0.0)
            } else if j > kk {
                pick(&cols[kk])[j - kk]
            } else {
                pick(&cols[j])[kk - j].conj()
            }
        })
    };
    let g = lower(|c| &c.0);
    let r = lower(|c| &c.2);
    let a = Mat::from_fn(n, n, |j, kk| cols[kk].1[j]);
    for m in [&g, &a, &r] {
        for j in 0..n {
            for i in 0..n {
                let v = m[(i, j)];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFinite(format!("Gram entry ({i}, {j})")));
                }
            }
        }
    }
    GramTriple::new(g, a, r, provenance)
}

/// Rank-`r` orthonormal basis `u_j = sum_i K_{x_i} W[i,j]`, `W = U_r Sigma_r^{-1}`,
/// and the matrix of the compressed Perron–Frobenius operator in it.
#[derive(Debug, Clone)]
pub struct CompressedBasis {
    pub u_r: Mat<c64>,
    /// Square roots of the retained eigenvalues of `G`, descending.
    pub sigma_r: Vec<f64>,
    /// `W* A W`: column `j` holds the `u`-coordinates of `P K* u_j`.
    pub khat_t: Mat<c64>,
}

impl CompressedBasis {
    pub fn rank(&self) -> usize {
        self.sigma_r.len()
    }

    /// `W = U_r Sigma_r^{-1}`, mapping `u`-coordinates to kernel-section coefficients.
    pub fn w(&self) -> Mat<c64> {
        Mat::from_fn(self.u_r.nrows(), self.rank(), |i, j| self.u_r[(i, j)] / self.sigma_r[j])
    }

    pub fn to_kernel_coeffs(&self, g_tilde: &[c64]) -> Result<Vec<c64>> {
        if g_tilde.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), found: g_tilde.len() });
        }
        Ok(linalg::mat_vec(self.w().as_ref(), g_tilde))
    }

    /// Transpose of `khat_t`, the compressed Koopman-side matrix.
    pub fn khat(&self) -> Mat<c64> {
        self.khat_t.transpose().to_owned()
    }
}

/// Keeps `min(r, #{lambda > threshold * lambda_max})` dominant eigenpairs of `G`.
pub fn compress(gram: &GramTriple, r: usize, threshold: f64) -> Result<CompressedBasis> {
    if r == 0 || r > gram.n() {
        return Err(Error::InvalidParameter(format!("rank {r} out of range 1..={}", gram.n())));
    }
    let f = PsdFactor::new(gram.g.as_ref(), threshold, r)?;
    let sigma_r: Vec<f64> = f.values.iter().map(|v| v.sqrt()).collect();
    let basis = CompressedBasis { u_r: f.vectors, sigma_r, khat_t: Mat::zeros(0, 0) };
    let w = basis.w();
    let khat_t = w.adjoint() * &gram.a * &w;
    Ok(CompressedBasis { khat_t, ..basis })
}

/// `(g_u)_j = <g, u_j>` for `g = sum_i c_i K_{x_i}`, i.e. `W* G c`.
pub fn to_u_basis(c: &[c64], basis: &CompressedBasis, gram: &GramTriple) -> Result<Vec<c64>> {
    if c.len() != gram.n() || basis.u_r.nrows() != gram.n() {
        return Err(Error::DimensionMismatch { expected: gram.n(), found: c.len() });
    }
    let gc = linalg::mat_vec(gram.g.as_ref(), c);
    let w = basis.w();
    Ok(linalg::mat_vec(w.adjoint().to_owned().as_ref(), &gc))
}

/// Smallest eigenvalue divided by the largest, for PSD diagnostics.
pub fn min_relative_eigenvalue(m: MatRef<'_, c64>) -> Result<f64> {
    let ev = linalg::hermitian_eigenvalues(m)?;
    let top = ev.iter().cloned().fold(0.0, f64::max);
    Ok(if top > 0.0 { ev[0] / top } else { ev[0] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{generate_snapshots, Sampling};
    use crate::linalg::test_util::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(v: f64) -> Point {
        vec![c64::new(v, 0.0)]
    }

    fn prov() -> Provenance {
        Provenance { kernel: "test".into(), snapshot_hash: String::new(), samples: 1, exact_transitions: false }
    }

    #[test]
    fn identity_dynamics_gives_equal_matrices() {
        let set = generate_snapshots(
            &System::Identity { dim: 2 },
            &Sampling::RandomBox { lo: vec![-1.0; 2], hi: vec![1.0; 2], count: 15, seed: 1 },
            1,
            0,
        )
        .unwrap();
        let gram = build_gram(&set, &KernelSpec::gaussian(1.0).unwrap()).unwrap();
        assert_eq!(gram.a, gram.g);
        assert_eq!(gram.r, gram.g);
    }

    #[test]
    fn gauss_map_hand_instance() {
        let sys = System::gauss_map();
        let k = KernelSpec::h1(-1.0, 0.0).unwrap();
        let xs = [-0.75, -0.25];
        let f = |x: f64| (-2.0 * x * x).exp() - 1.0 - (-2f64).exp();
        let set = generate_snapshots(&sys, &Sampling::Grid(vec![r(xs[0]), r(xs[1])]), 1, 0).unwrap();
        let gram = build_gram(&set, &k).unwrap();
        let kk = |a: f64, b: f64| {
            let (lo, hi) = (a.min(b), a.max(b));
            (lo + 1.0).cosh() * (-hi).cosh() / 1f64.sinh()
        };
        for j in 0..2 {
            for c in 0..2 {
                assert!((gram.g[(j, c)].re - kk(xs[c], xs[j])).abs() < 1e-15);
                assert!((gram.a[(j, c)].re - kk(f(xs[c]), xs[j])).abs() < 1e-15);
                assert!((gram.r[(j, c)].re - kk(f(xs[c]), f(xs[j]))).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_walk_delta_is_tridiagonal_third() {
        let states: Vec<i64> = (-5..=5).collect();
        let gram = build_gram_markov_exact(&System::RandomWalk, &states, &KernelSpec::discrete_delta()).unwrap();
        let n = states.len();
        for j in 0..n {
            for k in 0..n {
                let want = if (j as i64 - k as i64).abs() <= 1 { 1.0 / 3.0 } else { 0.0 };
                assert!((gram.a[(j, k)].re - want).abs() < 1e-15);
                assert_eq!(gram.g[(j, k)].re, if j == k { 1.0 } else { 0.0 });
            }
        }
        // R[j,j] = sum_y p(x,y)^2 = 1/3
        assert!((gram.r[(3, 3)].re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gram_matrices_hermitian_psd() {
        let set = generate_snapshots(
            &System::duffing_default(),
            &Sampling::RandomTrajectories { lo: vec![-1.0; 2], hi: vec![1.0; 2], count: 5, len: 8, seed: 4 },
            1,
            0,
        )
        .unwrap();
        let gram = build_gram(&set, &KernelSpec::matern(2, 3, 6.0).unwrap()).unwrap();
        for m in [&gram.g, &gram.r] {
            for i in 0..gram.n() {
                for j in 0..gram.n() {
                    assert_eq!(m[(i, j)], m[(j, i)].conj());
                }
            }
            assert!(min_relative_eigenvalue(m.as_ref()).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn monte_carlo_converges_to_exact_at_root_s_rate() {
        let states: Vec<i64> = (-20..=20).collect();
        let kernel = KernelSpec::discrete_delta();
        let exact = build_gram_markov_exact(&System::RandomWalk, &states, &kernel).unwrap();
        let grid = Sampling::IntegerWindow { w: 20 };
        let mut logs = Vec::new();
        for s in [100usize, 1000, 10_000] {
            let mut err = 0.0;
            let reps = 4;
            for rep in 0..reps {
                let set = generate_snapshots(&System::RandomWalk, &grid, s, 1000 + rep).unwrap();
                let mc = build_gram(&set, &kernel).unwrap();
                err += (&mc.a - &exact.a).norm_l2() / reps as f64;
            }
            logs.push(((s as f64).ln(), err.ln()));
        }
        let slope = (logs[2].1 - logs[0].1) / (logs[2].0 - logs[0].0);
        assert!((slope + 0.5).abs() <= 0.15, "slope {slope}");
    }

    #[test]
    fn compress_identity_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 5;
        let id = Mat::<c64>::identity(n, n);
        let a = random_complex(&mut rng, n, n);
        let gram = GramTriple::new(id.clone(), a.clone(), id.clone(), prov()).unwrap();
        let b = compress(&gram, n, 1e-12).unwrap();
        assert!(b.sigma_r.iter().all(|s| (s - 1.0).abs() < 1e-14));
        // U unitary, so Khat_T = U* A U is similar to A
        let direct = b.u_r.adjoint() * &a * &b.u_r;
        assert!((&direct - &b.khat_t).norm_max() < 1e-14);
    }

    #[test]
    fn compress_full_rank_matches_pencil_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let g = random_spd(&mut rng, n);
        let a = random_complex(&mut rng, n, n);
        let gram = GramTriple::new(g.clone(), a.clone(), g.clone(), prov()).unwrap();
        let b = compress(&gram, n, 1e-12).unwrap();
        let w = b.w();
        assert!((w.adjoint() * &g * &w - Mat::<c64>::identity(n, n)).norm_max() < 1e-10);
        let mut ours: Vec<nalgebra::Complex<f64>> =
            to_na(b.khat_t.as_ref()).eigenvalues().unwrap().iter().cloned().collect();
        let mut oracle: Vec<nalgebra::Complex<f64>> =
            to_na(g.as_ref()).lu().solve(&to_na(a.as_ref())).unwrap().eigenvalues().unwrap().iter().cloned().collect();
        let key = |z: &nalgebra::Complex<f64>| (z.re * 1e6).round() as i64 * 1_000_000_000 + (z.im * 1e6).round() as i64;
        ours.sort_by_key(key);
        oracle.sort_by_key(key);
        for (x, y) in ours.iter().zip(&oracle) {
            assert!((x - y).norm() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn compress_rank_one() {
        let v = Mat::<c64>::from_fn(4, 1, |i, _| c64::new(i as f64 + 1.0, 0.0));
        let g = &v * v.adjoint();
        let gram = GramTriple::new(g.clone(), g.clone(), g, prov()).unwrap();
        assert_eq!(compress(&gram, 4, 1e-12).unwrap().rank(), 1);
        let zero = Mat::<c64>::zeros(3, 3);
        let gram = GramTriple::new(zero.clone(), zero.clone(), zero, prov()).unwrap();
        assert!(compress(&gram, 3, 1e-12).is_err());
    }

    #[test]
    fn u_basis_examples() {
        let g = Mat::from_fn(1, 1, |_, _| c64::new(4.0, 0.0));
        let gram = GramTriple::new(g.clone(), g.clone(), g, prov()).unwrap();
        let b = compress(&gram, 1, 1e-12).unwrap();
        let gu = to_u_basis(&[c64::new(1.0, 0.0)], &b, &gram).unwrap();
        assert!((gu[0].norm() - 2.0).abs() < 1e-15);
        assert_eq!(to_u_basis(&[c64::new(0.0, 0.0)], &b, &gram).unwrap()[0], c64::new(0.0, 0.0));
        assert!(to_u_basis(&[c64::new(0.0, 0.0); 2], &b, &gram).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let g = random_spd(&mut rng, n);
        let gram = GramTriple::new(g.clone(), g.clone(), g.clone(), prov()).unwrap();
        let b = compress(&gram, n, 1e-12).unwrap();
        let c = random_complex(&mut rng, n, 1);
        let c: Vec<c64> = (0..n).map(|i| c[(i, 0)]).collect();
        let gu = to_u_basis(&c, &b, &gram).unwrap();
        let lhs: f64 = gu.iter().map(|z| z.norm_sqr()).sum();
        let rhs = linalg::quad_form(&c, g.as_ref(), &c).re;
        assert!((lhs - rhs).abs() <= 1e-10 * rhs);
    }
}
