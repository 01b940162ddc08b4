//! Probability masses on the velocity lattice `{j·ε : |j| ≤ 2N²}` with `ε = 1/N`.
//!
//! Storage is contiguous: slot `idx ∈ [0, 4N²]` holds the mass at the physical
//! index `j = idx − 2N²`. Everything else in the crate goes through
//! [`LatticeDensity::get`] or [`LatticeMeasure::indexed`] rather than doing
//! that arithmetic by hand.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{param, Error, Result};

/// Entries below `-NEGATIVITY_CLIP` are rejected, entries above it are clipped to zero.
pub const NEGATIVITY_CLIP: f64 = 1e-15;
/// Deviation of the total mass from one that triggers (reported) renormalization.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Largest moment order accepted by [`moment`].
pub const MAX_MOMENT_ORDER: u32 = 12;
/// Upper bound on `4N² + 1`.
pub const MAX_LATTICE_POINTS: usize = 1 << 24;
/// Largest mass allowed to be clipped away by the Gaussian moment projection.
pub const PROJECTION_CLIP_TOLERANCE: f64 = 1e-8;
/// Accuracy of the mean and temperature delivered by the moment projection.
pub const PROJECTION_MOMENT_TOLERANCE: f64 = 1e-10;

/// `2N²`, the largest admissible `|j|`, checked against [`MAX_LATTICE_POINTS`].
pub fn half_width(resolution: usize) -> Result<usize> {
    if resolution == 0 {
        return Err(param("lattice resolution N must be positive"));
    }
    resolution
        .checked_mul(resolution)
        .and_then(|sq| sq.checked_mul(4))
        .and_then(|q| q.checked_add(1))
        .filter(|&len| len <= MAX_LATTICE_POINTS)
        .map(|len| (len - 1) / 2)
        .ok_or_else(|| {
            Error::Resource(format!(
                "N = {resolution} needs more than {MAX_LATTICE_POINTS} lattice points"
            ))
        })
}

/// Anything that stores real coefficients on a uniform lattice `j·ε`.
pub trait LatticeMeasure {
    /// Lattice step `ε`.
    fn step(&self) -> f64;
    /// Physical index of `values()[0]`.
    fn first_index(&self) -> i64;
    fn values(&self) -> &[f64];

    fn indexed(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let lo = self.first_index();
        self.values()
            .iter()
            .enumerate()
            .map(move |(i, &c)| (lo + i as i64, c))
    }

    fn last_index(&self) -> i64 {
        self.first_index() + self.values().len() as i64 - 1
    }
}

/// An element of the space of lattice probability measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityFile", into = "DensityFile")]
pub struct LatticeDensity {
    resolution: usize,
    coeffs: Vec<f64>,
    renormalized_from: Option<f64>,
}

/// On-disk form: `{"N": int, "coeffs": [4N²+1 reals]}`, `coeffs[idx]` is the mass at `j = idx − 2N²`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityFile {
    #[serde(rename = "N")]
    n: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<DensityFile> for LatticeDensity {
    type Error = Error;
    fn try_from(file: DensityFile) -> Result<Self> {
        LatticeDensity::new(file.n, file.coeffs)
    }
}

impl From<LatticeDensity> for DensityFile {
    fn from(d: LatticeDensity) -> Self {
        DensityFile {
            n: d.resolution,
            coeffs: d.coeffs,
        }
    }
}

impl LatticeDensity {
    /// Validates and (if needed) renormalizes a coefficient vector of length `4N² + 1`.
    pub fn new(resolution: usize, mut coeffs: Vec<f64>) -> Result<Self> {
        let hw = half_width(resolution)?;
        let expected = 2 * hw + 1;
        if coeffs.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: coeffs.len(),
            });
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let j = idx as i64 - hw as i64;
            if !c.is_finite() {
                return Err(Error::Degenerate(format!("non-finite mass at j = {j}")));
            }
            if *c < -NEGATIVITY_CLIP {
                return Err(Error::Negativity { j, value: *c });
            }
            if *c < 0.0 {
                *c = 0.0;
            }
        }
        let total: f64 = coeffs.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("total mass is zero".into()));
        }
        let renormalized_from = if (total - 1.0).abs() > MASS_TOLERANCE {
            coeffs.iter_mut().for_each(|c| *c /= total);
            Some(total)
        } else {
            None
        };
        Ok(Self {
            resolution,
            coeffs,
            renormalized_from,
        })
    }

    /// Caller guarantees nonnegativity, length and unit mass up to rounding.
    pub(crate) fn from_parts_unchecked(resolution: usize, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), 4 * resolution * resolution + 1);
        Self {
            resolution,
            coeffs,
            renormalized_from: None,
        }
    }

    /// Rescales so the coefficients sum to one; used after operations that are
    /// mass-preserving only up to rounding or truncation.
    pub(crate) fn renormalized(resolution: usize, mut coeffs: Vec<f64>) -> Self {
        let total: f64 = coeffs.iter().sum();
        coeffs.iter_mut().for_each(|c| *c /= total);
        Self::from_parts_unchecked(resolution, coeffs)
    }

    /// Unit mass at physical index `j`.
    pub fn point_mass(resolution: usize, j: i64) -> Result<Self> {
        let hw = half_width(resolution)? as i64;
        if j.abs() > hw {
            return Err(param(format!("point mass at j = {j} outside |j| <= {hw}")));
        }
        let mut coeffs = vec![0.0; 2 * hw as usize + 1];
        coeffs[(j + hw) as usize] = 1.0;
        Ok(Self::from_parts_unchecked(resolution, coeffs))
    }

    /// Builds a density from `(j, mass)` pairs; unlisted sites get zero.
    pub fn from_sites(resolution: usize, sites: &[(i64, f64)]) -> Result<Self> {
        let hw = half_width(resolution)? as i64;
        let mut coeffs = vec![0.0; 2 * hw as usize + 1];
        for &(j, m) in sites {
            if j.abs() > hw {
                return Err(param(format!("site j = {j} outside |j| <= {hw}")));
            }
            coeffs[(j + hw) as usize] += m;
        }
        Self::new(resolution, coeffs)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    /// `2N²`.
    pub fn half_width(&self) -> i64 {
        (self.coeffs.len() / 2) as i64
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Mass at physical index `j`, zero outside the lattice.
    pub fn get(&self, j: i64) -> f64 {
        let idx = j + self.half_width();
        if idx < 0 {
            return 0.0;
        }
        self.coeffs.get(idx as usize).copied().unwrap_or(0.0)
    }

    /// Original total mass when the constructor had to renormalize.
    pub fn renormalized_from(&self) -> Option<f64> {
        self.renormalized_from
    }

    pub fn moments(&self) -> MomentSummary {
        let eps = self.eps();
        let (mut mass, mut first, mut second) = (0.0, 0.0, 0.0);
        for (j, c) in self.indexed() {
            let v = j as f64 * eps;
            mass += c;
            first += c * v;
            second += c * v * v;
        }
        let mean = first / mass;
        MomentSummary {
            mass,
            mean,
            temperature: (second / mass - mean * mean).max(0.0),
        }
    }

    pub fn to_signed(&self) -> SignedLatticeFunction {
        SignedLatticeFunction {
            eps: self.eps(),
            first_index: -self.half_width(),
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl LatticeMeasure for LatticeDensity {
    fn step(&self) -> f64 {
        self.eps()
    }
    fn first_index(&self) -> i64 {
        -self.half_width()
    }
    fn values(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Real coefficients on an explicit index range `first_index ..= first_index + len − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedLatticeFunction {
    eps: f64,
    first_index: i64,
    coeffs: Vec<f64>,
}

impl SignedLatticeFunction {
    pub fn new(eps: f64, first_index: i64, coeffs: Vec<f64>) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(param(format!("lattice step must be positive, got {eps}")));
        }
        if coeffs.is_empty() {
            return Err(Error::Degenerate("empty coefficient range".into()));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite coefficient at j = {}",
                first_index + i as i64
            )));
        }
        Ok(Self {
            eps,
            first_index,
            coeffs,
        })
    }

    /// Unit mass at index zero, the convolution identity.
    pub fn delta(eps: f64) -> Result<Self> {
        Self::new(eps, 0, vec![1.0])
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, j: i64) -> f64 {
        let idx = j - self.first_index;
        if idx < 0 {
            return 0.0;
        }
        self.coeffs.get(idx as usize).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Same function on a range widened to cover `lo ..= hi`.
    pub fn padded(&self, lo: i64, hi: i64) -> Self {
        let lo = lo.min(self.first_index);
        let hi = hi.max(self.last_index());
        let mut coeffs = vec![0.0; (hi - lo + 1) as usize];
        let off = (self.first_index - lo) as usize;
        coeffs[off..off + self.coeffs.len()].copy_from_slice(&self.coeffs);
        Self {
            eps: self.eps,
            first_index: lo,
            coeffs,
        }
    }

    pub(crate) fn from_parts_unchecked(eps: f64, first_index: i64, coeffs: Vec<f64>) -> Self {
        Self {
            eps,
            first_index,
            coeffs,
        }
    }
}

impl LatticeMeasure for SignedLatticeFunction {
    fn step(&self) -> f64 {
        self.eps
    }
    fn first_index(&self) -> i64 {
        self.first_index
    }
    fn values(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Mass, mean and temperature (second moment about the mean).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSummary {
    pub mass: f64,
    pub mean: f64,
    pub temperature: f64,
}

/// `Σ_j (jε)^k c_j`.
pub fn moment<M: LatticeMeasure + ?Sized>(g: &M, k: u32) -> Result<f64> {
    if k > MAX_MOMENT_ORDER {
        return Err(Error::MomentOrder {
            k,
            max: MAX_MOMENT_ORDER,
        });
    }
    let eps = g.step();
    Ok(g.indexed()
        .map(|(j, c)| c * (j as f64 * eps).powi(k as i32))
        .sum())
}

/// `Σ_j ψ(g_j)` over the whole lattice.
pub fn psi_functional(g: &LatticeDensity, psi: impl Fn(f64) -> f64) -> f64 {
    g.coeffs.iter().map(|&c| psi(c)).sum()
}

/// Shannon entropy `−Σ g_j log g_j` with `0·log 0 = 0`.
pub fn entropy(g: &LatticeDensity) -> f64 {
    -psi_functional(g, |r| if r > 0.0 { r * r.ln() } else { 0.0 })
}

/// `Σ_j c_j exp(−i ε ξ j)`.
pub fn char_fn<M: LatticeMeasure + ?Sized>(g: &M, xi: f64) -> Complex64 {
    let w = g.step() * xi;
    let (mut re, mut im) = (0.0, 0.0);
    for (j, c) in g.indexed() {
        if c == 0.0 {
            continue;
        }
        let (s, co) = (w * j as f64).sin_cos();
        re += c * co;
        im -= c * s;
    }
    Complex64::new(re, im)
}

fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-14 * a.abs().max(b.abs())
}

/// Discrete convolution `(a*b)_j = Σ_m a_m b_{j−m}`.
pub fn convolve<A, B>(a: &A, b: &B) -> Result<SignedLatticeFunction>
where
    A: LatticeMeasure + ?Sized,
    B: LatticeMeasure + ?Sized,
{
    if !same_step(a.step(), b.step()) {
        return Err(Error::Incompatible(format!(
            "lattice steps differ: {} vs {}",
            a.step(),
            b.step()
        )));
    }
    let (av, bv) = (a.values(), b.values());
    let mut out = vec![0.0; av.len() + bv.len() - 1];
    for (i, &x) in av.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (k, &y) in bv.iter().enumerate() {
            out[i + k] += x * y;
        }
    }
    Ok(SignedLatticeFunction::from_parts_unchecked(
        a.step(),
        a.first_index() + b.first_index(),
        out,
    ))
}

/// Initial data recipes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    /// Unit mass at lattice index `j`.
    Delta { j: i64 },
    /// Weight `w = θ₀/(2k²ε²)` at `±kε`, `1 − 2w` at the origin.
    ThreePoint { k: i64, theta0: f64 },
    /// Cell masses of `N(u₀, θ₀)` over `[jε − ε/2, jε + ε/2)`, moment-projected.
    GaussianCells { u0: f64, theta0: f64 },
}

impl InitialData {
    pub fn build(&self, resolution: usize) -> Result<LatticeDensity> {
        construct_initial(self, resolution)
    }
}

pub fn construct_initial(kind: &InitialData, resolution: usize) -> Result<LatticeDensity> {
    match *kind {
        InitialData::Delta { j } => LatticeDensity::point_mass(resolution, j),
        InitialData::ThreePoint { k, theta0 } => three_point(resolution, k, theta0),
        InitialData::GaussianCells { u0, theta0 } => gaussian_cells(resolution, u0, theta0),
    }
}

fn three_point(resolution: usize, k: i64, theta0: f64) -> Result<LatticeDensity> {
    let hw = half_width(resolution)? as i64;
    if k < 1 || k > hw {
        return Err(param(format!("three-point offset k = {k} outside 1..={hw}")));
    }
    let eps = 1.0 / resolution as f64;
    let reach = k as f64 * eps;
    if !(theta0 >= 0.0 && theta0 <= reach * reach) {
        return Err(param(format!(
            "three-point theta0 = {theta0} must lie in [0, (k eps)^2 = {}]",
            reach * reach
        )));
    }
    let w = theta0 / (2.0 * reach * reach);
    let mut coeffs = vec![0.0; 2 * hw as usize + 1];
    coeffs[(hw - k) as usize] = w;
    coeffs[(hw + k) as usize] = w;
    coeffs[hw as usize] = 1.0 - 2.0 * w;
    Ok(LatticeDensity::from_parts_unchecked(resolution, coeffs))
}

/// Upper Gaussian tail `P(Z > x)`.
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(a ≤ Z < b)` for standard normal `Z`, evaluated on the short tail side.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(b) - upper_tail(-a)
    }
}

fn raw_moments(eps: f64, hw: i64, w: &[f64]) -> [f64; 5] {
    let mut m = [0.0; 5];
    for (idx, &c) in w.iter().enumerate() {
        let v = (idx as i64 - hw) as f64 * eps;
        let mut p = c;
        for slot in m.iter_mut() {
            *slot += p;
            p *= v;
        }
    }
    m
}

fn gaussian_cells(resolution: usize, u0: f64, theta0: f64) -> Result<LatticeDensity> {
    if !(theta0 > 0.0 && theta0.is_finite() && u0.is_finite()) {
        return Err(param(format!(
            "gaussian-cells needs finite u0 and theta0 > 0, got u0 = {u0}, theta0 = {theta0}"
        )));
    }
    let hw = half_width(resolution)? as i64;
    let eps = 1.0 / resolution as f64;
    let sd = theta0.sqrt();
    let mut w: Vec<f64> = (-hw..=hw)
        .map(|j| {
            let v = j as f64 * eps;
            normal_mass((v - 0.5 * eps - u0) / sd, (v + 0.5 * eps - u0) / sd)
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "Gaussian has no mass on the lattice window".into(),
        ));
    }
    w.iter_mut().for_each(|c| *c /= total);

    // Multiplicative correction w_j (1 + a v + b (v² − m₂)) with (a, b) chosen so the
    // renormalized weights carry mean u₀ and raw second moment u₀² + θ₀.
    let target2 = u0 * u0 + theta0;
    let mut clipped_total = 0.0;
    for _ in 0..8 {
        let m = raw_moments(eps, hw, &w);
        let mean = m[1] / m[0];
        let temp = m[2] / m[0] - mean * mean;
        if (mean - u0).abs() <= 0.1 * PROJECTION_MOMENT_TOLERANCE
            && (temp - theta0).abs() <= 0.1 * PROJECTION_MOMENT_TOLERANCE
        {
            break;
        }
        let m = m.map(|x| x / m[0]);
        let (a11, a12, r1) = (m[2] - u0 * m[1], m[3] - m[2] * m[1], u0 - m[1]);
        let (a21, a22, r2) = (m[3] - target2 * m[1], m[4] - m[2] * m[2], target2 - m[2]);
        let det = a11 * a22 - a12 * a21;
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(Error::Degenerate(
                "moment projection system is singular".into(),
            ));
        }
        let a = (r1 * a22 - a12 * r2) / det;
        let b = (a11 * r2 - a21 * r1) / det;
        for (idx, c) in w.iter_mut().enumerate() {
            let v = (idx as i64 - hw) as f64 * eps;
            *c *= 1.0 + a * v + b * (v * v - m[2]);
            if *c < 0.0 {
                clipped_total -= *c;
                *c = 0.0;
            }
        }
        if clipped_total > PROJECTION_CLIP_TOLERANCE {
            return Err(Error::ProjectionFailure {
                clipped: clipped_total,
            });
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|c| *c /= total);
    }
    let density = LatticeDensity::renormalized(resolution, w);
    let got = density.moments();
    if (got.mean - u0).abs() > PROJECTION_MOMENT_TOLERANCE
        || (got.temperature - theta0).abs() > PROJECTION_MOMENT_TOLERANCE
    {
        return Err(Error::Degenerate(format!(
            "moment projection did not converge: mean {} temperature {}",
            got.mean, got.temperature
        )));
    }
    Ok(density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn point_mass_and_uniform() {
        let d = LatticeDensity::new(1, vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.get(0), 1.0);
        assert_eq!(moment(&d, 0).unwrap(), 1.0);
        let u = LatticeDensity::new(1, vec![0.2; 5]).unwrap();
        assert!((moment(&u, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(u.renormalized_from().is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let err = LatticeDensity::new(1, vec![0.5, 0.5, -0.5, 0.0, 0.5]).unwrap_err();
        assert!(matches!(err, Error::Negativity { j: 0, .. }));
        assert!(matches!(
            LatticeDensity::new(1, vec![1.0; 4]).unwrap_err(),
            Error::Dimension {
                expected: 5,
                got: 4
            }
        ));
        assert!(matches!(
            LatticeDensity::new(1, vec![0.0; 5]).unwrap_err(),
            Error::Degenerate(_)
        ));
        assert!(matches!(half_width(0).unwrap_err(), Error::Parameter(_)));
        assert!(matches!(half_width(1 << 12).unwrap_err(), Error::Resource(_)));
    }

    #[test]
    fn tiny_negatives_are_clipped_and_mass_reported() {
        let d = LatticeDensity::new(1, vec![-1e-16, 1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.coeffs()[0], 0.0);
        assert_eq!(d.renormalized_from(), Some(2.0));
        assert_eq!(d.get(-1), 0.5);
    }

    #[test]
    fn moments_of_point_masses() {
        let d0 = LatticeDensity::point_mass(3, 0).unwrap();
        for k in 1..=12 {
            assert_eq!(moment(&d0, k).unwrap(), 0.0);
        }
        let d = LatticeDensity::point_mass(2, 3).unwrap();
        assert_eq!(moment(&d, 1).unwrap(), 1.5);
        assert!(matches!(
            moment(&d, 13).unwrap_err(),
            Error::MomentOrder { k: 13, max: 12 }
        ));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&LatticeDensity::point_mass(2, 0).unwrap()), 0.0);
        let third = 1.0 / 3.0;
        let g = LatticeDensity::from_sites(2, &[(-1, third), (0, third), (1, third)]).unwrap();
        assert!((entropy(&g) - 3f64.ln()).abs() < 1e-15);
        let u = LatticeDensity::new(2, vec![1.0 / 17.0; 17]).unwrap();
        assert!((entropy(&u) - 17f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn char_fn_of_point_mass() {
        let d0 = LatticeDensity::point_mass(4, 0).unwrap();
        let dk = LatticeDensity::point_mass(4, 5).unwrap();
        for &xi in &[0.0, 0.3, 2.0, 17.0] {
            assert_eq!(char_fn(&d0, xi), Complex64::new(1.0, 0.0));
            let expect = Complex64::new(0.0, -0.25 * xi * 5.0).exp();
            assert!((char_fn(&dk, xi) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn convolution_identity_and_two_step_kernel() {
        let p = SignedLatticeFunction::new(0.5, -1, vec![0.5, 0.0, 0.5]).unwrap();
        let delta = SignedLatticeFunction::delta(0.5).unwrap();
        assert_eq!(convolve(&delta, &p).unwrap(), p);
        let pp = convolve(&p, &p).unwrap();
        assert_eq!(pp.first_index(), -2);
        assert_eq!(pp.coeffs(), &[0.25, 0.0, 0.5, 0.0, 0.25]);
        let other = SignedLatticeFunction::delta(0.25).unwrap();
        assert!(matches!(
            convolve(&p, &other).unwrap_err(),
            Error::Incompatible(_)
        ));
    }

    #[test]
    fn three_point_examples() {
        let d = construct_initial(&InitialData::ThreePoint { k: 2, theta0: 1.0 }, 2).unwrap();
        assert_eq!(d.get(-2), 0.5);
        assert_eq!(d.get(2), 0.5);
        assert_eq!(d.get(0), 0.0);
        assert_eq!(moment(&d, 1).unwrap(), 0.0);
        assert_eq!(moment(&d, 2).unwrap(), 1.0);

        let d = construct_initial(&InitialData::ThreePoint { k: 1, theta0: 0.5 }, 1).unwrap();
        assert_eq!(&d.coeffs()[1..4], &[0.25, 0.5, 0.25]);

        assert!(matches!(
            construct_initial(&InitialData::ThreePoint { k: 1, theta0: 2.0 }, 1).unwrap_err(),
            Error::Parameter(_)
        ));
        assert!(construct_initial(&InitialData::ThreePoint { k: 9, theta0: 1.0 }, 2).is_err());
    }

    #[test]
    fn gaussian_cells_match_moments() {
        let d = construct_initial(
            &InitialData::GaussianCells {
                u0: 0.0,
                theta0: 1.0,
            },
            8,
        )
        .unwrap();
        let m = d.moments();
        assert!((m.mass - 1.0).abs() < 1e-12);
        assert!(m.mean.abs() < 1e-12);
        assert!((m.temperature - 1.0).abs() < 1e-10);
        // symmetric construction
        for j in 1..=128 {
            assert!((d.get(j) - d.get(-j)).abs() < 1e-15);
        }

        let shifted = construct_initial(
            &InitialData::GaussianCells {
                u0: 0.4,
                theta0: 0.7,
            },
            4,
        )
        .unwrap()
        .moments();
        assert!((shifted.mean - 0.4).abs() < 1e-10);
        assert!((shifted.temperature - 0.7).abs() < 1e-10);

        assert!(construct_initial(
            &InitialData::GaussianCells {
                u0: 0.0,
                theta0: 0.0
            },
            4
        )
        .is_err());
    }

    #[test]
    fn cell_masses_agree_with_cdf_differences() {
        // Unprojected cell masses of N(0, 1) at N = 8, checked against a midpoint-rule
        // integration of the density over each cell.
        let eps = 0.125;
        for j in [-20i64, -3, 0, 5, 17] {
            let a = j as f64 * eps - eps / 2.0;
            let steps = 2000;
            let h = eps / steps as f64;
            let quad: f64 = (0..steps)
                .map(|i| {
                    let v = a + (i as f64 + 0.5) * h;
                    (-0.5 * v * v).exp() / (2.0 * PI).sqrt() * h
                })
                .sum();
            assert!((normal_mass(a, a + eps) - quad).abs() < 1e-10);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d = construct_initial(&InitialData::ThreePoint { k: 1, theta0: 0.5 }, 1).unwrap();
        let text = d.to_json().unwrap();
        assert!(text.starts_with("{\"N\":1,\"coeffs\":["));
        assert_eq!(LatticeDensity::from_json(&text).unwrap(), d);
        assert!(LatticeDensity::from_json("{\"N\":1,\"coeffs\":[1,0,0]}").is_err());
        assert!(LatticeDensity::from_json("{\"N\":1,\"coeffs\":[0,0,1,0,0],\"x\":1}").is_err());
    }
}
