//! The stationary lattice law: the centered binomial `2^{−4N²} C(4N², 2N² + j)`,
//! equivalently the law of `N⁻¹ Σ_{i ≤ 2N²} X_i` with `X_i ∈ {−1, 0, 1}`
//! distributed as `(¼, ½, ¼)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{convolve, half_width, LatticeDensity, LatticeMeasure, SignedLatticeFunction};
use crate::report::{Cell, ReportTable};
use crate::spectral::{fourier_distance, CharFnEvaluator, XiGrid};

/// Largest `4N²` for which the binomial row is built in exact integer arithmetic.
pub const EXACT_BINOMIAL_MAX: usize = 60;
/// Largest `N` accepted by the convolution oracle.
pub const ORACLE_MAX_RESOLUTION: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    ConvolutionOracle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryLaw {
    pub density: LatticeDensity,
    pub provenance: Provenance,
}

impl StationaryLaw {
    pub fn closed_form(resolution: usize) -> Result<Self> {
        Ok(Self {
            density: stationary_law(resolution)?,
            provenance: Provenance::ClosedForm,
        })
    }

    pub fn convolution_oracle(resolution: usize) -> Result<Self> {
        Ok(Self {
            density: stationary_oracle(resolution)?,
            provenance: Provenance::ConvolutionOracle,
        })
    }
}

/// Closed-form stationary law.
pub fn stationary_law(resolution: usize) -> Result<LatticeDensity> {
    let hw = half_width(resolution)?;
    let trials = 2 * hw;
    let coeffs = if trials <= EXACT_BINOMIAL_MAX {
        exact_binomial_row(trials)
    } else {
        binomial_row_from_center(trials)
    };
    Ok(LatticeDensity::renormalized(resolution, coeffs))
}

/// `C(m, k)/2^m` from exact integers; `C(60, 30) < 2^64`.
fn exact_binomial_row(m: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(m + 1);
    let mut c: u128 = 1;
    let scale = 0.5f64.powi(m as i32);
    for k in 0..=m {
        row.push(c as f64 * scale);
        c = c * (m - k) as u128 / (k + 1) as u128;
    }
    row
}

/// Binomial row by the ratio recurrence `C(m,k±1)/C(m,k)` running outward from the
/// central term, then normalized. Relative error grows like `|k − m/2|` ulps
/// and the far tails underflow to zero.
fn binomial_row_from_center(m: usize) -> Vec<f64> {
    let mid = m / 2;
    let mut row = vec![0.0; m + 1];
    row[mid] = 1.0;
    for k in mid..m {
        row[k + 1] = row[k] * (m - k) as f64 / (k + 1) as f64;
    }
    for k in (1..=mid).rev() {
        row[k - 1] = row[k] * k as f64 / (m - k + 1) as f64;
    }
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|c| *c /= total);
    row
}

/// The `2N²`-fold convolution power of `(¼, ½, ¼)` on `{−ε, 0, ε}`.
pub fn stationary_oracle(resolution: usize) -> Result<LatticeDensity> {
    if resolution == 0 || resolution > ORACLE_MAX_RESOLUTION {
        return Err(Error::Resource(format!(
            "convolution oracle supports 1 <= N <= {ORACLE_MAX_RESOLUTION}, got {resolution}"
        )));
    }
    let eps = 1.0 / resolution as f64;
    let base = SignedLatticeFunction::new(eps, -1, vec![0.25, 0.5, 0.25])?;
    let mut acc = SignedLatticeFunction::delta(eps)?;
    for _ in 0..2 * resolution * resolution {
        acc = convolve(&acc, &base)?;
    }
    debug_assert_eq!(acc.first_index(), -((2 * resolution * resolution) as i64));
    LatticeDensity::new(resolution, acc.coeffs().to_vec())
}

fn standard_normal_density(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * PI).sqrt()
}

/// Rows `j,v,coeff,gaussian_density`, with `gaussian_density = ε·M(jε)` so it
/// compares directly with the lattice mass.
pub fn stationary_table(resolution: usize) -> Result<ReportTable> {
    let law = stationary_law(resolution)?;
    let eps = law.eps();
    let mut t = ReportTable::new(["j", "v", "coeff", "gaussian_density"]);
    t.set_meta("N", resolution.to_string());
    for (j, c) in law.indexed() {
        let v = j as f64 * eps;
        t.push_row(vec![
            Cell::Int(j),
            Cell::Real(v),
            Cell::Real(c),
            Cell::Real(eps * standard_normal_density(v)),
        ])?;
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellianComparisonRow {
    pub resolution: usize,
    /// `sup_j |N f_∞,j − M(jε)|`.
    pub sup_density_error: f64,
    /// Grid `d₂` between the stationary characteristic function and `e^{−ξ²/2}`.
    pub d2_charfn: f64,
    pub d2_moments_agree: bool,
}

/// Distance of the stationary law to the Maxwellian, for each `N`. Both columns
/// are expected to fall as `N` grows.
pub fn maxwellian_comparison(resolutions: &[usize]) -> Result<Vec<MaxwellianComparisonRow>> {
    let grid = XiGrid::continuous_default();
    let maxwellian = CharFnEvaluator::maxwellian();
    resolutions
        .iter()
        .map(|&n| {
            if n < 2 {
                return Err(Error::Parameter(format!(
                    "Maxwellian comparison needs N >= 2, got {n}"
                )));
            }
            let law = stationary_law(n)?;
            let eps = law.eps();
            let sup_density_error = law
                .indexed()
                .map(|(j, c)| (n as f64 * c - standard_normal_density(j as f64 * eps)).abs())
                .fold(0.0, f64::max);
            let d2 = fourier_distance(&CharFnEvaluator::stationary(n), &maxwellian, 2.0, &grid)?;
            Ok(MaxwellianComparisonRow {
                resolution: n,
                sup_density_error,
                d2_charfn: d2.value,
                d2_moments_agree: d2.moments_agree,
            })
        })
        .collect()
}

pub fn maxwellian_comparison_table(resolutions: &[usize]) -> Result<ReportTable> {
    let rows = maxwellian_comparison(resolutions)?;
    let mut t = ReportTable::new(["N", "sup_density_error", "d2_charfn", "decreasing"]);
    let mut prev: Option<&MaxwellianComparisonRow> = None;
    for r in &rows {
        let decreasing = prev
            .map(|p| Cell::Bool(r.sup_density_error < p.sup_density_error && r.d2_charfn < p.d2_charfn))
            .unwrap_or_else(|| Cell::Text("n/a".into()));
        t.push_row(vec![
            Cell::Int(r.resolution as i64),
            Cell::Real(r.sup_density_error),
            Cell::Real(r.d2_charfn),
            decreasing,
        ])?;
        prev = Some(r);
    }
    Ok(t)
}
