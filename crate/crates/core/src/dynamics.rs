//! Built-in dynamical systems and snapshot generation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use faer::c64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::kernels::Params;
use crate::{Error, Result};

pub type Point = Vec<c64>;

/// RK4 substeps per snapshot interval.
pub const RK4_SUBSTEPS: usize = 20;

/// Indices `-4..=4` of the perturbed random walk.
pub const PERTURBED_SITES: usize = 9;

pub type MapFn = Arc<dyn Fn(&[c64]) -> Result<Point> + Send + Sync>;

#[derive(Clone)]
pub enum System {
    /// `x -> exp(-alpha x^2) + beta` on `[-1, 0]`.
    GaussMap { alpha: f64, beta: f64 },
    /// `u'' = -delta u' - alpha u - beta u^3`, state `(u, u')`, sampled every `dt`.
    Duffing { alpha: f64, beta: f64, delta: f64, dt: f64 },
    Lorenz { sigma: f64, rho: f64, beta: f64, dt: f64 },
    /// `z -> (a z + b) / (conj(b) z + conj(a))` on the unit disk.
    Mobius { a: c64, b: c64 },
    /// Lazy walk on the integers, `1/3` to each of `n-1, n, n+1`.
    RandomWalk,
    /// Random walk with perturbed rows at sites `-4..=4`;
    /// `perturbations[i + 4] = (a_{i1}, a_{i2})`.
    RandomWalkPerturbed { perturbations: [(f64, f64); PERTURBED_SITES], seed: Option<u64> },
    Identity { dim: usize },
    CustomMap { dim: usize, name: String, map: MapFn },
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "System({self})")
    }
}

impl System {
    pub fn gauss_map() -> Self {
        Self::GaussMap { alpha: 2.0, beta: -1.0 - (-2f64).exp() }
    }

    /// Custom parameters are accepted only if `F([-1+d, -d])` stays inside
    /// `(-1, 0)` on a 1000-point check grid.
    pub fn gauss_map_with(alpha: f64, beta: f64) -> Result<Self> {
        let delta = 1e-3;
        for i in 0..1000 {
            let x = -1.0 + delta + (1.0 - 2.0 * delta) * i as f64 / 999.0;
            let y = (-alpha * x * x).exp() + beta;
            if !(y > -1.0 && y < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "gauss map with alpha={alpha}, beta={beta} leaves (-1,0) at x={x}"
                )));
            }
        }
        Ok(Self::GaussMap { alpha, beta })
    }

    pub fn duffing(alpha: f64, beta: f64, delta: f64, dt: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && delta > 0.0 && dt > 0.0) {
            return Err(Error::InvalidParameter("duffing requires alpha, beta, delta, dt > 0".into()));
        }
        if !(dt < 1.0 / (4.0 * delta)) {
            return Err(Error::InvalidParameter(format!("duffing requires dt < 1/(4 delta), got dt={dt}")));
        }
        Ok(Self::Duffing { alpha, beta, delta, dt })
    }

    pub fn duffing_default() -> Self {
        Self::Duffing { alpha: 1.0, beta: 1.0, delta: 0.2, dt: 0.01 }
    }

    pub fn lorenz(dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("lorenz requires dt > 0".into()));
        }
        Ok(Self::Lorenz { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0, dt })
    }

    pub fn mobius(a: c64, b: c64) -> Result<Self> {
        if ((a.norm_sqr() - b.norm_sqr()) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mobius requires |a|^2 - |b|^2 = 1, got a={a}, b={b}")));
        }
        Ok(Self::Mobius { a, b })
    }

    /// Rotation of the disk by `pi/3`.
    pub fn mobius_rotation() -> Self {
        Self::Mobius { a: c64::from_polar(1.0, std::f64::consts::PI / 6.0), b: c64::new(0.0, 0.0) }
    }

    /// `a = sqrt(2) e^{i pi sqrt 3}`, `b = e^{i 9 pi / 7}`.
    pub fn mobius_t2() -> Self {
        use std::f64::consts::PI;
        Self::Mobius {
            a: c64::from_polar(2f64.sqrt(), PI * 3f64.sqrt()),
            b: c64::from_polar(1.0, PI * 9.0 / 7.0),
        }
    }

    /// Draws `a_{ij}` uniformly on `(-1/8, 1/8)`.
    pub fn random_walk_perturbed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = [(0.0, 0.0); PERTURBED_SITES];
        for site in p.iter_mut() {
            *site = (rng.random_range(-0.125..0.125), rng.random_range(-0.125..0.125));
        }
        Self::RandomWalkPerturbed { perturbations: p, seed: Some(seed) }
    }

    pub fn random_walk_perturbed_with(perturbations: [(f64, f64); PERTURBED_SITES]) -> Result<Self> {
        for &(a1, a2) in &perturbations {
            if !(a1.abs() < 0.125 && a2.abs() < 0.125) {
                return Err(Error::InvalidParameter(format!("perturbations must lie in (-1/8, 1/8), got ({a1}, {a2})")));
            }
        }
        Ok(Self::RandomWalkPerturbed { perturbations, seed: None })
    }

    pub fn custom(dim: usize, name: &str, map: impl Fn(&[c64]) -> Result<Point> + Send + Sync + 'static) -> Self {
        Self::CustomMap { dim, name: name.to_string(), map: Arc::new(map) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussMap { .. } | Self::Mobius { .. } | Self::RandomWalk | Self::RandomWalkPerturbed { .. } => 1,
            Self::Duffing { .. } => 2,
            Self::Lorenz { .. } => 3,
            Self::Identity { dim } | Self::CustomMap { dim, .. } => *dim,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Self::RandomWalk | Self::RandomWalkPerturbed { .. })
    }

    pub fn check_state(&self, x: &[c64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("state {x:?}")));
        }
        let real = || x.iter().all(|v| v.im == 0.0);
        match self {
            Self::GaussMap { .. } => {
                if !real() || !(-1.0..=0.0).contains(&x[0].re) {
                    return Err(Error::Domain(format!("gauss map state {} outside [-1, 0]", x[0])));
                }
            }
            Self::Duffing { .. } | Self::Lorenz { .. } => {
                if !real() {
                    return Err(Error::Domain("ODE states must be real".into()));
                }
            }
            Self::Mobius { .. } => {
                if x[0].norm() >= 1.0 {
                    return Err(Error::Domain(format!("mobius state {} outside the unit disk", x[0])));
                }
            }
            Self::RandomWalk | Self::RandomWalkPerturbed { .. } => {
                integer_state(x)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// One application of the dynamics. Stochastic systems draw from `rng`.
    pub fn step(&self, x: &[c64], rng: Option<&mut dyn RngCore>) -> Result<Point> {
        self.check_state(x)?;
        match self {
            Self::GaussMap { alpha, beta } => {
                let v = x[0].re;
                Ok(vec![c64::new((-alpha * v * v).exp() + beta, 0.0)])
            }
            Self::Duffing { alpha, beta, delta, dt } => {
                let (a, b, d) = (*alpha, *beta, *delta);
                let f = move |s: [f64; 2]| [s[1], -d * s[1] - a * s[0] - b * s[0].powi(3)];
                let out = rk4([x[0].re, x[1].re], *dt, f);
                Ok(out.iter().map(|&v| c64::new(v, 0.0)).collect())
            }
            Self::Lorenz { sigma, rho, beta, dt } => {
                let (s, r, b) = (*sigma, *rho, *beta);
                let f = move |u: [f64; 3]| [s * (u[1] - u[0]), u[0] * (r - u[2]) - u[1], u[0] * u[1] - b * u[2]];
                let out = rk4([x[0].re, x[1].re, x[2].re], *dt, f);
                Ok(out.iter().map(|&v| c64::new(v, 0.0)).collect())
            }
            Self::Mobius { a, b } => Ok(vec![(a * x[0] + b) / (b.conj() * x[0] + a.conj())]),
            Self::RandomWalk | Self::RandomWalkPerturbed { .. } => {
                let rng = rng.ok_or_else(|| {
                    Error::InvalidParameter("stochastic system requires a random number generator".into())
                })?;
                let u: f64 = rng.random();
                let support = self.transition_support(x)?;
                let mut acc = 0.0;
                for &(state, p) in &support {
                    acc += p;
                    if u < acc {
                        return Ok(vec![c64::new(state as f64, 0.0)]);
                    }
                }
                Ok(vec![c64::new(support.last().expect("non-empty").0 as f64, 0.0)])
            }
            Self::Identity { .. } => Ok(x.to_vec()),
            Self::CustomMap { map, dim, .. } => {
                let y = map(x)?;
                if y.len() != *dim {
                    return Err(Error::DimensionMismatch { expected: *dim, found: y.len() });
                }
                Ok(y)
            }
        }
    }

    /// Non-zero transition probabilities `p(x, .)` in ascending state order.
    pub fn transition_support(&self, x: &[c64]) -> Result<Vec<(i64, f64)>> {
        let n = match self {
            Self::RandomWalk | Self::RandomWalkPerturbed { .. } => integer_state(x)?,
            _ => return Err(Error::InvalidParameter(format!("{self} is not a Markov chain"))),
        };
        let third = 1.0 / 3.0;
        let (left, stay, right) = match self {
            Self::RandomWalkPerturbed { perturbations, .. } if (-4..=4).contains(&n) => {
                let (a1, a2) = perturbations[(n + 4) as usize];
                (0.25 + a1, 0.5 - a1 - a2, 0.25 + a2)
            }
            _ => (third, third, third),
        };
        Ok(vec![(n - 1, left), (n, stay), (n + 1, right)])
    }

    /// Exact transition probabilities from `x` to each entry of `states`.
    pub fn transition_row_exact(&self, x: &[c64], states: &[i64]) -> Result<Vec<f64>> {
        let support = self.transition_support(x)?;
        Ok(states
            .iter()
            .map(|s| support.iter().filter(|(t, _)| t == s).map(|(_, p)| p).sum())
            .collect())
    }
}

/// Energy `u'^2/2 + alpha u^2/2 + beta u^4/4` of a Duffing state.
pub fn duffing_energy(alpha: f64, beta: f64, x: &[c64]) -> f64 {
    let (u, v) = (x[0].re, x[1].re);
    0.5 * v * v + 0.5 * alpha * u * u + 0.25 * beta * u.powi(4)
}

fn integer_state(x: &[c64]) -> Result<i64> {
    let v = x[0];
    if x.len() != 1 || v.im != 0.0 || v.re.fract() != 0.0 || v.re.abs() > 2f64.powi(52) {
        return Err(Error::Domain(format!("{x:?} is not an integer state")));
    }
    Ok(v.re as i64)
}

fn rk4<const D: usize>(mut s: [f64; D], dt: f64, f: impl Fn([f64; D]) -> [f64; D]) -> [f64; D] {
    let h = dt / RK4_SUBSTEPS as f64;
    let axpy = |s: &[f64; D], k: &[f64; D], c: f64| {
        let mut out = *s;
        for i in 0..D {
            out[i] += c * k[i];
        }
        out
    };
    for _ in 0..RK4_SUBSTEPS {
        let k1 = f(s);
        let k2 = f(axpy(&s, &k1, 0.5 * h));
        let k3 = f(axpy(&s, &k2, 0.5 * h));
        let k4 = f(axpy(&s, &k3, h));
        for i in 0..D {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GaussMap { alpha, beta } => write!(f, "gauss-map:alpha={alpha},beta={beta}"),
            Self::Duffing { alpha, beta, delta, dt } => {
                write!(f, "duffing:alpha={alpha},beta={beta},delta={delta},dt={dt}")
            }
            Self::Lorenz { sigma, rho, beta, dt } => write!(f, "lorenz:sigma={sigma},rho={rho},beta={beta},dt={dt}"),
            Self::Mobius { a, b } => write!(f, "mobius:a={},b={}", crate::io::format_complex(*a), crate::io::format_complex(*b)),
            Self::RandomWalk => write!(f, "random-walk"),
            Self::RandomWalkPerturbed { seed: Some(s), .. } => write!(f, "random-walk-perturbed:seed={s}"),
            Self::RandomWalkPerturbed { perturbations, seed: None } => {
                write!(f, "random-walk-perturbed:a=")?;
                for (i, (a1, a2)) in perturbations.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{a1}/{a2}")?;
                }
                Ok(())
            }
            Self::Identity { dim } => write!(f, "identity:d={dim}"),
            Self::CustomMap { dim, name, .. } => write!(f, "custom-map:name={name},d={dim}"),
        }
    }
}

impl FromStr for System {
    type Err = Error;

    /// `kind[:key=value,...]`, case-insensitive. `custom-map` cannot be
    /// parsed since it carries code.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        match name.trim().to_ascii_lowercase().as_str() {
            "gauss-map" | "gauss" => {
                let p = Params::new(body, "gauss-map", &["alpha", "beta"])?;
                let d = Self::gauss_map();
                let Self::GaussMap { alpha, beta } = d else { unreachable!() };
                let (a, b) = (p.get("alpha")?.unwrap_or(alpha), p.get("beta")?.unwrap_or(beta));
                if a == alpha && b == beta {
                    Ok(d)
                } else {
                    Self::gauss_map_with(a, b)
                }
            }
            "duffing" => {
                let p = Params::new(body, "duffing", &["alpha", "beta", "delta", "dt"])?;
                Self::duffing(
                    p.get("alpha")?.unwrap_or(1.0),
                    p.get("beta")?.unwrap_or(1.0),
                    p.get("delta")?.unwrap_or(0.2),
                    p.get("dt")?.unwrap_or(0.01),
                )
            }
            "lorenz" => {
                let p = Params::new(body, "lorenz", &["sigma", "rho", "beta", "dt"])?;
                let dt = p.get("dt")?.unwrap_or(0.01);
                if !(dt > 0.0) {
                    return Err(Error::InvalidParameter("lorenz requires dt > 0".into()));
                }
                Ok(Self::Lorenz {
                    sigma: p.get("sigma")?.unwrap_or(10.0),
                    rho: p.get("rho")?.unwrap_or(28.0),
                    beta: p.get("beta")?.unwrap_or(8.0 / 3.0),
                    dt,
                })
            }
            "mobius" => {
                let p = Params::new(body, "mobius", &["preset", "a", "b"])?;
                match p.raw("preset").map(|v| v.to_ascii_lowercase()) {
                    Some(v) if v == "t1" || v == "rotation" => Ok(Self::mobius_rotation()),
                    Some(v) if v == "t2" => Ok(Self::mobius_t2()),
                    Some(v) => Err(Error::Parse(format!("unknown mobius preset '{v}'"))),
                    None => {
                        if p.raw("a").is_none() && p.raw("b").is_none() {
                            return Ok(Self::mobius_t2());
                        }
                        let a = crate::io::parse_complex(p.raw("a").unwrap_or("1"))?;
                        let b = crate::io::parse_complex(p.raw("b").unwrap_or("0"))?;
                        Self::mobius(a, b)
                    }
                }
            }
            "random-walk" | "randomwalk" => {
                Params::new(body, "random-walk", &[])?;
                Ok(Self::RandomWalk)
            }
            "random-walk-perturbed" => {
                let p = Params::new(body, "random-walk-perturbed", &["seed"])?;
                Ok(Self::random_walk_perturbed(p.get("seed")?.unwrap_or(0)))
            }
            "identity" => {
                let p = Params::new(body, "identity", &["d"])?;
                let dim: usize = p.get("d")?.unwrap_or(1);
                if dim == 0 {
                    return Err(Error::InvalidParameter("identity requires d >= 1".into()));
                }
                Ok(Self::Identity { dim })
            }
            other => Err(Error::Parse(format!("unknown system '{other}'"))),
        }
    }
}

/// How pre-states are chosen.
#[derive(Debug, Clone)]
pub enum Sampling {
    /// `X_i = F^{i-1}(x0)`, `i = 1..=len`.
    Trajectory { x0: Point, len: usize },
    /// Concatenated trajectories of `len` states from uniform random initial
    /// conditions in the box.
    RandomTrajectories { lo: Vec<f64>, hi: Vec<f64>, count: usize, len: usize, seed: u64 },
    /// Independent uniform points in the box.
    RandomBox { lo: Vec<f64>, hi: Vec<f64>, count: usize, seed: u64 },
    /// Explicit points.
    Grid(Vec<Point>),
    /// Chebyshev–Lobatto nodes `cos(j pi / intervals)` mapped to `[lo, hi]`,
    /// ordered coarse-to-fine so halving `intervals` gives a prefix.
    Chebyshev { lo: f64, hi: f64, intervals: usize },
    /// `R^alpha e^{2 pi i Theta}` with `R, Theta` uniform on `(0, 1)`.
    Disk { count: usize, alpha: f64, seed: u64 },
    /// Integer states `-w..=w`.
    IntegerWindow { w: i64 },
}

impl Sampling {
    /// Pre-states for trajectory-free schemes; trajectories are produced by
    /// [`generate_snapshots`].
    fn points(&self, dim: usize) -> Result<Vec<Point>> {
        let real = |v: &[f64]| v.iter().map(|&r| c64::new(r, 0.0)).collect::<Point>();
        match self {
            Self::RandomBox { lo, hi, count, seed } => {
                check_box(lo, hi, dim)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..*count)
                    .map(|_| real(&lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect::<Vec<_>>()))
                    .collect())
            }
            Self::Grid(points) => Ok(points.clone()),
            Self::Chebyshev { lo, hi, intervals } => {
                if dim != 1 || *intervals == 0 || !(lo < hi) {
                    return Err(Error::InvalidParameter("chebyshev sampling needs d=1, intervals>=1, lo<hi".into()));
                }
                Ok(chebyshev_nested(*lo, *hi, *intervals).into_iter().map(|x| vec![c64::new(x, 0.0)]).collect())
            }
            Self::Disk { count, alpha, seed } => {
                if dim != 1 || !(*alpha > 0.0) {
                    return Err(Error::InvalidParameter("disk sampling needs d=1 and alpha>0".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..*count)
                    .map(|_| {
                        let r: f64 = rng.random::<f64>().powf(*alpha);
                        let t: f64 = rng.random();
                        vec![c64::from_polar(r, std::f64::consts::TAU * t)]
                    })
                    .collect())
            }
            Self::IntegerWindow { w } => {
                if dim != 1 || *w < 0 {
                    return Err(Error::InvalidParameter("integer window needs d=1 and w>=0".into()));
                }
                Ok((-*w..=*w).map(|n| vec![c64::new(n as f64, 0.0)]).collect())
            }
            Self::Trajectory { .. } | Self::RandomTrajectories { .. } => unreachable!("handled by caller"),
        }
    }
}

fn check_box(lo: &[f64], hi: &[f64], dim: usize) -> Result<()> {
    if lo.len() != dim || hi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: lo.len().min(hi.len()) });
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidParameter("box requires lo < hi in every coordinate".into()));
    }
    Ok(())
}

/// Chebyshev–Lobatto nodes on `[lo, hi]`, ordered by decreasing 2-adic
/// valuation of the node index, so the nodes for `intervals / 2^k` form a
/// prefix whenever `2^k` divides `intervals`.
pub fn chebyshev_nested(lo: f64, hi: f64, intervals: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..=intervals).collect();
    idx.sort_by_key(|&j| (std::cmp::Reverse(if j == 0 { u32::MAX } else { j.trailing_zeros() }), j));
    idx.into_iter()
        .map(|j| {
            let c = (std::f64::consts::PI * j as f64 / intervals as f64).cos();
            lo + (hi - lo) * 0.5 * (1.0 + c)
        })
        .collect()
}

/// Paired pre-states and successor samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    dim: usize,
    samples: usize,
    x: Vec<c64>,
    y: Vec<c64>,
}

impl SnapshotSet {
    /// `x` holds `N*d` values, `y` holds `N*S*d` values with sample `s` of
    /// state `i` at offset `(i*S + s)*d`.
    pub fn new(dim: usize, samples: usize, x: Vec<c64>, y: Vec<c64>) -> Result<Self> {
        if dim == 0 || samples == 0 {
            return Err(Error::InvalidParameter("snapshot sets need d >= 1 and S >= 1".into()));
        }
        if x.is_empty() || x.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!("pre-state buffer length {} is not a positive multiple of d={dim}", x.len())));
        }
        let n = x.len() / dim;
        if y.len() != n * samples * dim {
            return Err(Error::DimensionMismatch { expected: n * samples * dim, found: y.len() });
        }
        if let Some(v) = x.iter().chain(&y).find(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("snapshot entry {v}")));
        }
        let set = Self { dim, samples, x, y };
        set.check_distinct()?;
        Ok(set)
    }

    pub fn from_pairs(x: &[Point], y: &[Point]) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        let dim = x[0].len();
        if x.iter().chain(y).any(|p| p.len() != dim) {
            return Err(Error::InvalidParameter("inconsistent point dimensions".into()));
        }
        Self::new(dim, 1, x.concat(), y.concat())
    }

    fn check_distinct(&self) -> Result<()> {
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let key = |i: usize| self.x(i)[0].re;
        idx.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
        for a in 0..n {
            for b in a + 1..n {
                let (i, j) = (idx[a], idx[b]);
                if key(j) - key(i) > 1e-14 {
                    break;
                }
                if crate::kernels::dist(self.x(i), self.x(j)) <= 1e-14 {
                    return Err(Error::DuplicateState(i.min(j), i.max(j)));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self, i: usize) -> &[c64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize, s: usize) -> &[c64] {
        let o = (i * self.samples + s) * self.dim;
        &self.y[o..o + self.dim]
    }

    pub fn x_raw(&self) -> &[c64] {
        &self.x
    }

    pub fn y_raw(&self) -> &[c64] {
        &self.y
    }

    /// The first `n` snapshots.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidParameter(format!("prefix {n} out of range 1..={}", self.len())));
        }
        Ok(Self {
            dim: self.dim,
            samples: self.samples,
            x: self.x[..n * self.dim].to_vec(),
            y: self.y[..n * self.samples * self.dim].to_vec(),
        })
    }

    /// Hex SHA-256 of the little-endian contents.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.samples as u64).to_le_bytes());
        for v in self.x.iter().chain(&self.y) {
            h.update(v.re.to_le_bytes());
            h.update(v.im.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Samples pre-states and applies the dynamics. Stochastic systems draw `S`
/// successors per state from a stream keyed by `(seed, state index)`, so the
/// result does not depend on thread scheduling.
pub fn generate_snapshots(system: &System, sampling: &Sampling, samples: usize, seed: u64) -> Result<SnapshotSet> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples per state must be >= 1".into()));
    }
    if !system.is_stochastic() && samples != 1 {
        return Err(Error::InvalidParameter("deterministic systems take exactly one sample per state".into()));
    }
    let dim = system.dim();
    let (xs, ys): (Vec<Point>, Vec<Vec<Point>>) = match sampling {
        Sampling::Trajectory { x0, len } => {
            let traj = trajectory(system, x0, *len, samples, seed)?;
            traj.into_iter().unzip()
        }
        Sampling::RandomTrajectories { lo, hi, count, len, seed: ic_seed } => {
            check_box(lo, hi, dim)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*ic_seed);
            let starts: Vec<Point> = (0..*count)
                .map(|_| lo.iter().zip(hi).map(|(a, b)| c64::new(rng.random_range(*a..*b), 0.0)).collect())
                .collect();
            let parts: Vec<Vec<(Point, Vec<Point>)>> = starts
                .par_iter()
                .enumerate()
                .map(|(k, x0)| trajectory(system, x0, *len, samples, seed.wrapping_add(k as u64)))
                .collect::<Result<_>>()?;
            parts.into_iter().flatten().unzip()
        }
        other => {
            let xs = other.points(dim)?;
            let ys = xs
                .par_iter()
                .enumerate()
                .map(|(i, x)| successors(system, x, samples, seed, i as u64))
                .collect::<Result<Vec<_>>>()?;
            (xs, ys)
        }
    };
    if xs.is_empty() {
        return Err(Error::InvalidParameter("sampling produced no states".into()));
    }
    let x = xs.concat();
    let y = ys.into_iter().flatten().flatten().collect();
    SnapshotSet::new(dim, samples, x, y)
}

fn successors(system: &System, x: &[c64], samples: usize, seed: u64, stream: u64) -> Result<Vec<Point>> {
    if system.is_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..samples).map(|_| system.step(x, Some(&mut rng))).collect()
    } else {
        Ok(vec![system.step(x, None)?])
    }
}

/// States `x0, F(x0), ...` with their successors; stochastic trajectories
/// follow the first sample.
fn trajectory(system: &System, x0: &[c64], len: usize, samples: usize, seed: u64) -> Result<Vec<(Point, Vec<Point>)>> {
    let mut out = Vec::with_capacity(len);
    let mut x = x0.to_vec();
    for i in 0..len {
        let ys = successors(system, &x, samples, seed, i as u64)?;
        let next = ys[0].clone();
        out.push((x, ys));
        x = next;
    }
    Ok(out)
}
