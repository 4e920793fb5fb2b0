//! Positive-definite kernel families and derived constants.
//!
//! Points are slices of complex numbers; real data carries zero imaginary
//! parts. Radial families use `r = sqrt(sum |x_i - y_i|^2)` and scale the
//! radius by `sigma` before applying the profile. Kernels are linear in the
//! first argument: `K(x, y) = <K_x, K_y>`.

mod bessel;
mod wendland;

use std::fmt;
use std::str::FromStr;

use faer::c64;
use serde::{Deserialize, Serialize};

pub use bessel::bessel_k;
pub use wendland::WendlandPolynomial;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Normalized Matérn with `nu = n - d/2`.
    Matern { d: usize, n: usize, sigma: f64 },
    /// `phi_{d,k}(sigma r)`.
    Wendland { d: usize, k: usize, sigma: f64 },
    /// `exp(-(sigma r)^2)`.
    GaussianRbf { sigma: f64, d: Option<usize> },
    /// Reproducing kernel of `H^1(a, b)`.
    SobolevH1Interval { a: f64, b: f64 },
    /// `exp(-sigma d(x,y)^2)` with the Poincaré-disk distance.
    HyperbolicGaussian { sigma: f64 },
    /// `(sum x_i conj(y_i) + c)^degree`.
    Polynomial { c: f64, degree: u32, d: Option<usize> },
    /// `delta_{xy}`; states compared exactly.
    DiscreteDelta,
    /// `delta_{lm} l^{-2r}` on positive integers (the space `h^r`).
    WeightedSequence { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueField {
    Real,
    Complex,
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: Family,
    wendland: Option<WendlandPolynomial>,
    matern_scale: f64,
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.family.serialize(s)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let family = Family::deserialize(d)?;
        KernelSpec::new(family).map_err(serde::de::Error::custom)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

impl KernelSpec {
    pub fn new(family: Family) -> Result<Self> {
        let mut wendland = None;
        let mut matern_scale = 1.0;
        match &family {
            Family::Matern { d, n, sigma } => {
                check_sigma(*sigma)?;
                if *d == 0 || 2 * n <= *d {
                    return Err(Error::InvalidParameter(format!(
                        "matern requires n > d/2, got n={n}, d={d}"
                    )));
                }
                let nu = matern_nu(*n, *d);
                matern_scale = 2f64.powf(1.0 - nu) / gamma_half_integer(nu);
            }
            Family::Wendland { d, k, sigma } => {
                check_sigma(*sigma)?;
                wendland = Some(WendlandPolynomial::new(*d, *k)?);
            }
            Family::GaussianRbf { sigma, d } => {
                check_sigma(*sigma)?;
                if *d == Some(0) {
                    return Err(Error::InvalidParameter("d must be positive".into()));
                }
            }
            Family::SobolevH1Interval { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidParameter(format!("h1 requires a < b, got a={a}, b={b}")));
                }
            }
            Family::HyperbolicGaussian { sigma } => check_sigma(*sigma)?,
            Family::Polynomial { c, degree, d } => {
                if !(*c >= 0.0) || *degree == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial requires c >= 0 and degree >= 1, got c={c}, degree={degree}"
                    )));
                }
                if *d == Some(0) {
                    return Err(Error::InvalidParameter("d must be positive".into()));
                }
            }
            Family::DiscreteDelta => {}
            Family::WeightedSequence { r } => {
                if !r.is_finite() {
                    return Err(Error::InvalidParameter(format!("weight exponent must be finite, got {r}")));
                }
            }
        }
        Ok(Self { family, wendland, matern_scale })
    }

    pub fn matern(d: usize, n: usize, sigma: f64) -> Result<Self> {
        Self::new(Family::Matern { d, n, sigma })
    }

    pub fn wendland(d: usize, k: usize, sigma: f64) -> Result<Self> {
        Self::new(Family::Wendland { d, k, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::GaussianRbf { sigma, d: None })
    }

    pub fn h1(a: f64, b: f64) -> Result<Self> {
        Self::new(Family::SobolevH1Interval { a, b })
    }

    pub fn hyperbolic_gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::HyperbolicGaussian { sigma })
    }

    pub fn discrete_delta() -> Self {
        Self::new(Family::DiscreteDelta).expect("parameter-free")
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn wendland_polynomial(&self) -> Option<&WendlandPolynomial> {
        self.wendland.as_ref()
    }

    pub fn value_field(&self) -> ValueField {
        match self.family {
            Family::HyperbolicGaussian { .. } => ValueField::Real,
            Family::Polynomial { .. } => ValueField::Complex,
            _ => ValueField::Real,
        }
    }

    /// Required point dimension, if the family fixes one.
    pub fn dim(&self) -> Option<usize> {
        match &self.family {
            Family::Matern { d, .. } | Family::Wendland { d, .. } => Some(*d),
            Family::GaussianRbf { d, .. } | Family::Polynomial { d, .. } => *d,
            Family::SobolevH1Interval { .. }
            | Family::HyperbolicGaussian { .. }
            | Family::WeightedSequence { .. } => Some(1),
            Family::DiscreteDelta => None,
        }
    }

    /// Validates that `x` lies in the kernel's domain.
    pub fn check_point(&self, x: &[c64]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::DimensionMismatch { expected: self.dim().unwrap_or(1), found: 0 });
        }
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: x.len() });
            }
        }
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("point {x:?}")));
        }
        match &self.family {
            Family::SobolevH1Interval { a, b } => {
                let v = x[0];
                if v.im != 0.0 || v.re < *a || v.re > *b {
                    return Err(Error::Domain(format!("{} not in [{a}, {b}]", v.re)));
                }
            }
            Family::HyperbolicGaussian { .. } => {
                if x[0].norm() >= 1.0 {
                    return Err(Error::Domain(format!("|{}| >= 1 outside the unit disk", x[0])));
                }
            }
            Family::WeightedSequence { .. } => {
                let v = x[0];
                if v.im != 0.0 || v.re < 1.0 || v.re.fract() != 0.0 {
                    return Err(Error::Domain(format!("{v} is not a positive integer state")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `K(x, y)` with domain and dimension checks.
    pub fn eval(&self, x: &[c64], y: &[c64]) -> Result<c64> {
        self.check_point(x)?;
        self.check_point(y)?;
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        let v = self.eval_unchecked(x, y);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite(format!("kernel value at {x:?}, {y:?}")));
        }
        Ok(v)
    }

    /// `K(x, y)` for points already validated with [`check_point`](Self::check_point).
    pub fn eval_unchecked(&self, x: &[c64], y: &[c64]) -> c64 {
        let real = |v: f64| c64::new(v, 0.0);
        match &self.family {
            Family::Matern { n, d, sigma } => real(self.matern_profile(matern_nu(*n, *d), sigma * dist(x, y))),
            Family::Wendland { sigma, .. } => {
                real(self.wendland.as_ref().expect("built in new").eval(sigma * dist(x, y)))
            }
            Family::GaussianRbf { sigma, .. } => {
                let u = sigma * dist(x, y);
                real((-u * u).exp())
            }
            Family::SobolevH1Interval { a, b } => {
                let (lo, hi) = if x[0].re <= y[0].re { (x[0].re, y[0].re) } else { (y[0].re, x[0].re) };
                real((lo - a).cosh() * (b - hi).cosh() / (b - a).sinh())
            }
            Family::HyperbolicGaussian { sigma } => {
                let dh = poincare_distance(x[0], y[0]);
                real((-sigma * dh * dh).exp())
            }
            Family::Polynomial { c, degree, .. } => {
                let ip: c64 = x.iter().zip(y).map(|(a, b)| a * b.conj()).sum();
                (ip + c).powi(*degree as i32)
            }
            Family::DiscreteDelta => real(if x == y { 1.0 } else { 0.0 }),
            Family::WeightedSequence { r } => {
                if x == y {
                    real(x[0].re.powf(-2.0 * r))
                } else {
                    real(0.0)
                }
            }
        }
    }

    fn matern_profile(&self, nu: f64, u: f64) -> f64 {
        if u == 0.0 {
            return 1.0;
        }
        if is_half_integer(nu) {
            let p = nu.floor() as usize;
            // closed form: e^{-u} p!/(2p)! sum_i (p+i)!/(i!(p-i)!) (2u)^{p-i}
            let mut fact_ratio = 1.0;
            for j in (p + 1)..=(2 * p) {
                fact_ratio /= j as f64;
            }
            let poly = (2.0 * u).powi(p as i32) * bessel::half_integer_poly(p, 1.0 / (2.0 * u));
            return (-u).exp() * fact_ratio * poly;
        }
        self.matern_scale * u.powf(nu) * bessel_k(nu, u)
    }

    /// A constant `C` with `|K(x,y) - K(x',y')| <= C (|x-x'| + |y-y'|)`,
    /// or `None` when no bound is implemented for the family.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match &self.family {
            Family::Wendland { sigma, .. } => Some(sigma * self.wendland.as_ref()?.lipschitz_sum()),
            Family::GaussianRbf { sigma, .. } => Some(sigma * (2.0 / std::f64::consts::E).sqrt()),
            Family::Matern { n, d, sigma } => {
                let nu = matern_nu(*n, *d);
                if nu < 1.0 {
                    return None;
                }
                Some(sigma * self.matern_scale * matern_slope_sup(nu))
            }
            _ => None,
        }
    }
}

fn matern_nu(n: usize, d: usize) -> f64 {
    n as f64 - d as f64 / 2.0
}

fn is_half_integer(nu: f64) -> bool {
    (nu - nu.floor() - 0.5).abs() < 1e-12
}

/// `Gamma(nu)` for positive integer or half-integer `nu`.
fn gamma_half_integer(nu: f64) -> f64 {
    let mut g = if is_half_integer(nu) { std::f64::consts::PI.sqrt() } else { 1.0 };
    let mut t = if is_half_integer(nu) { 0.5 } else { 1.0 };
    while t < nu - 1e-9 {
        g *= t;
        t += 1.0;
    }
    g
}

/// `sup_u u^nu K_{nu-1}(u)`, which is `|d/du (u^nu K_nu(u))|` maximised.
fn matern_slope_sup(nu: f64) -> f64 {
    let f = |u: f64| u.powf(nu) * bessel_k(nu - 1.0, u);
    let hi = 10.0 + 4.0 * nu;
    let steps = 4000;
    let h = hi / steps as f64;
    let (mut best_i, mut best) = (1, f(h));
    for i in 2..=steps {
        let v = f(i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // the profile is unimodal; refine by golden-section search
    let (mut a, mut b) = (((best_i - 1) as f64 * h).max(1e-12), (best_i + 1) as f64 * h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b)).max(best) * (1.0 + 1e-12)
}

/// Euclidean distance on `C^d`.
pub fn dist(x: &[c64], y: &[c64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

/// Poincaré-disk distance `2 atanh |(y-x)/(1 - conj(x) y)|`.
pub fn poincare_distance(x: c64, y: c64) -> f64 {
    let den = c64::new(1.0, 0.0) - x.conj() * y;
    let s = (y - x).norm() / den.norm();
    // 1 - s^2 = (1-|x|^2)(1-|y|^2)/|1 - conj(x) y|^2, free of cancellation
    let one_minus_s2 = (1.0 - x.norm_sqr()) * (1.0 - y.norm_sqr()) / den.norm_sqr();
    2.0 * s.ln_1p() - one_minus_s2.ln()
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Matern { d, n, sigma } => write!(f, "matern:d={d},n={n},sigma={sigma}"),
            Family::Wendland { d, k, sigma } => write!(f, "wendland:d={d},k={k},sigma={sigma}"),
            Family::GaussianRbf { sigma, d } => match d {
                Some(d) => write!(f, "gaussian-rbf:d={d},sigma={sigma}"),
                None => write!(f, "gaussian-rbf:sigma={sigma}"),
            },
            Family::SobolevH1Interval { a, b } => write!(f, "h1:a={a},b={b}"),
            Family::HyperbolicGaussian { sigma } => write!(f, "hyperbolic-gaussian:sigma={sigma}"),
            Family::Polynomial { c, degree, d } => match d {
                Some(d) => write!(f, "polynomial:c={c},d={d},degree={degree}"),
                None => write!(f, "polynomial:c={c},degree={degree}"),
            },
            Family::DiscreteDelta => write!(f, "discrete-delta"),
            Family::WeightedSequence { r } => write!(f, "weighted-sequence:r={r}"),
        }
    }
}

/// Parses `key=value,key=value` into a lowercase-keyed list, rejecting
/// duplicates.
pub(crate) fn parse_params(body: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got '{part}'")))?;
        let k = k.trim().to_ascii_lowercase();
        if out.iter().any(|(e, _)| *e == k) {
            return Err(Error::Parse(format!("duplicate key '{k}'")));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) struct Params {
    items: Vec<(String, String)>,
    context: String,
}

impl Params {
    pub(crate) fn new(body: &str, context: &str, allowed: &[&str]) -> Result<Self> {
        let items = parse_params(body)?;
        for (k, _) in &items {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Parse(format!(
                    "unknown key '{k}' for {context} (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(Self { items, context: context.to_string() })
    }

    pub(crate) fn raw(&self, key: &str) -> Option<&str> {
        self.items.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub(crate) fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Parse(format!("invalid value '{v}' for {}.{key}", self.context))),
        }
    }

    pub(crate) fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Parse(format!("{} requires key '{key}'", self.context)))
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let name = name.trim().to_ascii_lowercase();
        let family = match name.as_str() {
            "matern" => {
                let p = Params::new(body, "matern", &["d", "n", "sigma"])?;
                Family::Matern { d: p.require("d")?, n: p.require("n")?, sigma: p.get("sigma")?.unwrap_or(1.0) }
            }
            "wendland" => {
                let p = Params::new(body, "wendland", &["d", "k", "sigma"])?;
                Family::Wendland { d: p.require("d")?, k: p.require("k")?, sigma: p.get("sigma")?.unwrap_or(1.0) }
            }
            "gaussian-rbf" | "gaussian" | "rbf" => {
                let p = Params::new(body, "gaussian-rbf", &["d", "sigma"])?;
                Family::GaussianRbf { sigma: p.get("sigma")?.unwrap_or(1.0), d: p.get("d")? }
            }
            "h1" | "sobolev-h1-interval" | "sobolev-h1" => {
                let p = Params::new(body, "h1", &["a", "b"])?;
                Family::SobolevH1Interval { a: p.require("a")?, b: p.require("b")? }
            }
            "hyperbolic-gaussian" | "hyperbolic" => {
                let p = Params::new(body, "hyperbolic-gaussian", &["sigma"])?;
                Family::HyperbolicGaussian { sigma: p.get("sigma")?.unwrap_or(1.0) }
            }
            "polynomial" | "poly" => {
                let p = Params::new(body, "polynomial", &["c", "degree", "d"])?;
                Family::Polynomial { c: p.get("c")?.unwrap_or(1.0), degree: p.require("degree")?, d: p.get("d")? }
            }
            "discrete-delta" | "delta" => {
                Params::new(body, "discrete-delta", &[])?;
                Family::DiscreteDelta
            }
            "weighted-sequence" | "sequence" => {
                let p = Params::new(body, "weighted-sequence", &["r"])?;
                Family::WeightedSequence { r: p.require("r")? }
            }
            other => return Err(Error::Parse(format!("unknown kernel family '{other}'"))),
        };
        KernelSpec::new(family)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn p(v: &[f64]) -> Vec<c64> {
        v.iter().map(|&x| c64::new(x, 0.0)).collect()
    }

    #[test]
    fn h1_corner_value() {
        let k = KernelSpec::h1(-1.0, 0.0).unwrap();
        let v = k.eval(&p(&[-1.0]), &p(&[-1.0])).unwrap();
        assert!((v.re - 1f64.cosh() / 1f64.sinh()).abs() < 1e-15);
        assert!((v.re - 1.313_035).abs() < 1e-6);
    }

    #[test]
    fn gaussian_diagonal_is_one() {
        let k = KernelSpec::gaussian(3.0).unwrap();
        assert_eq!(k.eval(&p(&[0.3, -2.0]), &p(&[0.3, -2.0])).unwrap().re, 1.0);
    }

    #[test]
    fn matern_half_integer_closed_forms() {
        // nu = n - d/2 in {1/2, 3/2, 5/2} with d = 1
        let forms: [(usize, fn(f64) -> f64); 3] = [
            (1, |u| (-u).exp()),
            (2, |u| (1.0 + u) * (-u).exp()),
            (3, |u| (1.0 + u + u * u / 3.0) * (-u).exp()),
        ];
        for (n, form) in forms {
            let k = KernelSpec::matern(1, n, 1.7).unwrap();
            for i in 0..200 {
                let r = i as f64 * 0.05;
                let got = k.eval(&p(&[0.0]), &p(&[r])).unwrap().re;
                let want = form(1.7 * r);
                assert!((got - want).abs() <= 1e-10 * want, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn matern_half_integer_matches_bessel_route() {
        // the normalized Bessel expression, evaluated directly, agrees with the closed forms
        for (p_ord, nu) in [(0usize, 0.5), (1, 1.5), (2, 2.5)] {
            for u in [0.1f64, 1.0, 2.0, 3.5, 8.0] {
                let via_bessel = 2f64.powf(1.0 - nu) / gamma_half_integer(nu) * u.powf(nu) * bessel_k(nu, u);
                let k = KernelSpec::matern(1, p_ord + 1, 1.0).unwrap();
                let closed = k.eval(&p(&[0.0]), &p(&[u])).unwrap().re;
                assert!((via_bessel - closed).abs() <= 1e-12 * closed, "nu={nu} u={u}");
            }
        }
    }

    #[test]
    fn matern_example_value() {
        let k = KernelSpec::matern(1, 1, 2.0).unwrap();
        let v = k.eval(&p(&[0.0]), &p(&[1.0])).unwrap().re;
        assert!((v - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn matern_integer_order_continuous_at_zero() {
        // nu = 2 (d=2, n=3) and nu = 1 (d=2, n=2)
        for n in [2, 3, 4] {
            let k = KernelSpec::matern(2, n, 1.0).unwrap();
            let near = k.eval(&p(&[0.0, 0.0]), &p(&[1e-6, 0.0])).unwrap().re;
            assert!((near - 1.0).abs() < 1e-4, "n={n} {near}");
            assert_eq!(k.eval(&p(&[0.0, 0.0]), &p(&[0.0, 0.0])).unwrap().re, 1.0);
        }
    }

    #[test]
    fn matern_rejects_small_n() {
        assert!(KernelSpec::matern(2, 1, 1.0).is_err());
        assert!(KernelSpec::matern(2, 3, 0.0).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let k = KernelSpec::matern(2, 3, 1.0).unwrap();
        assert!(matches!(k.eval(&p(&[0.0]), &p(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn wendland_examples() {
        let k = KernelSpec::wendland(3, 0, 0.1).unwrap();
        let v = k.eval(&p(&[0.0, 0.0, 0.0]), &p(&[3.0, 4.0, 0.0])).unwrap().re;
        assert!((v - 0.25).abs() < 1e-15);
        assert_eq!(k.eval(&p(&[0.0, 0.0, 0.0]), &p(&[10.0, 0.0, 0.0])).unwrap().re, 0.0);
    }

    #[test]
    fn lipschitz_values() {
        let g = KernelSpec::gaussian(1.0).unwrap().lipschitz_constant().unwrap();
        assert!((g - 0.857_763_884_960_706_8).abs() < 1e-12);
        assert_eq!(KernelSpec::wendland(3, 0, 1.0).unwrap().lipschitz_constant(), Some(4.0));
        assert_eq!(KernelSpec::discrete_delta().lipschitz_constant(), None);
        // nu = 3/2: |phi'(u)| = u e^{-u}, maximal 1/e at u = 1
        let m = KernelSpec::matern(1, 2, 1.0).unwrap().lipschitz_constant().unwrap();
        assert!((m - (-1f64).exp()).abs() < 1e-9);
        assert_eq!(KernelSpec::matern(1, 1, 1.0).unwrap().lipschitz_constant(), None);
    }

    #[test]
    fn hyperbolic_guard_and_identity() {
        let k = KernelSpec::hyperbolic_gaussian(5.0).unwrap();
        assert!(k.eval(&[c64::new(1.0, 0.0)], &[c64::new(0.0, 0.0)]).is_err());
        let x = [c64::new(0.3, -0.4)];
        assert_eq!(k.eval(&x, &x).unwrap().re, 1.0);
        let d = poincare_distance(c64::new(0.0, 0.0), c64::new(0.5, 0.0));
        assert!((d - 2.0 * 0.5f64.atanh()).abs() < 1e-15);
    }

    #[test]
    fn weighted_sequence_diagonal() {
        let k: KernelSpec = "weighted-sequence:r=1".parse().unwrap();
        assert_eq!(k.eval(&p(&[2.0]), &p(&[2.0])).unwrap().re, 0.25);
        assert_eq!(k.eval(&p(&[2.0]), &p(&[3.0])).unwrap().re, 0.0);
        assert!(k.eval(&p(&[0.0]), &p(&[1.0])).is_err());
    }

    #[test]
    fn parse_round_trip_and_errors() {
        for s in [
            "matern:d=2,n=3,sigma=6",
            "wendland:d=3,k=0,sigma=0.1",
            "h1:a=-1,b=0",
            "gaussian-rbf:d=2,sigma=1",
            "hyperbolic-gaussian:sigma=5",
            "polynomial:c=1,d=2,degree=3",
            "discrete-delta",
            "weighted-sequence:r=0.5",
        ] {
            let k: KernelSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        let k: KernelSpec = "MATERN:D=2,N=3,Sigma=6".parse().unwrap();
        assert_eq!(k.to_string(), "matern:d=2,n=3,sigma=6");
        assert!("matern:d=2,n=3,bogus=1".parse::<KernelSpec>().is_err());
        assert!("nope:x=1".parse::<KernelSpec>().is_err());
        assert!("h1:a=0,b=-1".parse::<KernelSpec>().is_err());
    }

    fn families() -> Vec<(KernelSpec, usize, bool)> {
        // (kernel, dimension, complex points)
        vec![
            (KernelSpec::matern(2, 2, 1.5).unwrap(), 2, false),
            (KernelSpec::matern(2, 3, 0.7).unwrap(), 2, false),
            (KernelSpec::matern(3, 3, 1.0).unwrap(), 3, false),
            (KernelSpec::wendland(3, 0, 0.8).unwrap(), 3, false),
            (KernelSpec::wendland(1, 1, 1.3).unwrap(), 1, false),
            (KernelSpec::wendland(2, 2, 0.9).unwrap(), 2, false),
            (KernelSpec::gaussian(1.2).unwrap(), 2, false),
            (KernelSpec::h1(-1.0, 0.0).unwrap(), 1, false),
            (KernelSpec::hyperbolic_gaussian(5.0).unwrap(), 1, true),
            ("polynomial:c=1,degree=3".parse().unwrap(), 2, true),
        ]
    }

    fn random_point(rng: &mut impl rand::Rng, k: &KernelSpec, d: usize, complex: bool) -> Vec<c64> {
        match k.family() {
            Family::SobolevH1Interval { a, b } => vec![c64::new(rng.random_range(*a..=*b), 0.0)],
            Family::HyperbolicGaussian { .. } => {
                let r: f64 = rng.random::<f64>().powf(0.25) * 0.999;
                vec![c64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))]
            }
            _ => (0..d)
                .map(|_| {
                    let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
                    c64::new(rng.random_range(-2.0..2.0), im)
                })
                .collect(),
        }
    }

    #[test]
    fn conjugate_symmetry() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (k, d, cplx) in families() {
            for _ in 0..1000 {
                let x = random_point(&mut rng, &k, d, cplx);
                let y = random_point(&mut rng, &k, d, cplx);
                let a = k.eval(&x, &y).unwrap();
                let b = k.eval(&y, &x).unwrap();
                assert!((a - b.conj()).norm() <= 1e-12, "{k}");
            }
        }
    }

    #[test]
    fn lipschitz_bound_holds_on_random_perturbations() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (k, d, cplx) in families() {
            let Some(c) = k.lipschitz_constant() else { continue };
            for _ in 0..10_000 {
                let x = random_point(&mut rng, &k, d, cplx);
                let y = random_point(&mut rng, &k, d, cplx);
                let scale = 10f64.powf(rng.random_range(-4.0..0.0));
                let xt: Vec<c64> = x.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
                let yt: Vec<c64> = y.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
                let lhs = (k.eval(&x, &y).unwrap() - k.eval(&xt, &yt).unwrap()).norm();
                let rhs = c * (dist(&x, &xt) + dist(&y, &yt));
                assert!(lhs <= rhs + 1e-14, "{k}: {lhs} > {rhs}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn gram_matrices_are_psd(seed in any::<u64>(), n in 2usize..30) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for (k, d, cplx) in families() {
                let pts: Vec<Vec<c64>> = (0..n).map(|_| random_point(&mut rng, &k, d, cplx)).collect();
                let g = faer::Mat::<c64>::from_fn(n, n, |i, j| k.eval_unchecked(&pts[j], &pts[i]));
                let ev = g.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
                let max = ev.iter().cloned().fold(0.0, f64::max);
                prop_assert!(ev[0] >= -1e-10 * max, "{}: min eig {} max {}", k, ev[0], max);
            }
        }
    }
}
