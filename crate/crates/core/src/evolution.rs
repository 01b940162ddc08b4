//! The discrete Fokker–Planck generator and its exact solution as a Wild sum.
//!
//! With `ε = 1/N` the generator is `J(g) = (2/ε²)(T(g) − g)` where `T` moves the
//! mass at site `j` to `j − 1` and `j + 1` with weights `½(1 ± jε²/2)`; those
//! weights vanish at `j = ±2N²`, so `T` never leaves the lattice. The solution
//! at time `t` is the Poisson mixture `e^{−λ} Σ λ^i/i! · Tⁱ(φ)` with `λ = 2t/ε²`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::lattice::{entropy, LatticeDensity, SignedLatticeFunction};
use crate::report::{Cell, ReportTable};

/// Beyond this a single Poisson mean underflows `e^{−λ}`; [`evolve`] splits instead.
pub const MAX_SINGLE_STEP_LAMBDA: f64 = 600.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WildConfig {
    /// Largest Poisson mean handled by one Wild step.
    pub lambda_max: f64,
    /// Poisson tail mass that may be dropped per step.
    pub tail_tol: f64,
}

impl Default for WildConfig {
    fn default() -> Self {
        Self {
            lambda_max: 32.0,
            tail_tol: 1e-12,
        }
    }
}

impl WildConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max > 0.0 && self.lambda_max <= MAX_SINGLE_STEP_LAMBDA) {
            return Err(param(format!(
                "lambda_max must lie in (0, {MAX_SINGLE_STEP_LAMBDA}], got {}",
                self.lambda_max
            )));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(param(format!(
                "tail_tol must lie in (0, 1), got {}",
                self.tail_tol
            )));
        }
        Ok(())
    }
}

/// One application of `T` on raw storage. `src` and `dst` have length `4N² + 1`.
fn t_into(resolution: usize, src: &[f64], dst: &mut [f64]) {
    let hw = (src.len() / 2) as i64;
    let two_n2 = (2 * resolution * resolution) as f64;
    dst.iter_mut().for_each(|d| *d = 0.0);
    for (idx, &g) in src.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        // jε²/2 = j / (2N²), exact at the boundary.
        let drift = (idx as i64 - hw) as f64 / two_n2;
        if idx > 0 {
            dst[idx - 1] += 0.5 * (1.0 + drift) * g;
        }
        if idx + 1 < src.len() {
            dst[idx + 1] += 0.5 * (1.0 - drift) * g;
        }
    }
}

/// `T(g)_j = ½(1 + (j+1)ε²/2) g_{j+1} + ½(1 − (j−1)ε²/2) g_{j−1}`.
pub fn apply_t(g: &LatticeDensity) -> LatticeDensity {
    let mut out = vec![0.0; g.coeffs().len()];
    t_into(g.resolution(), g.coeffs(), &mut out);
    LatticeDensity::from_parts_unchecked(g.resolution(), out)
}

/// `J^ε(g) = (2/ε²)(T(g) − g)`.
pub fn generator(g: &LatticeDensity) -> SignedLatticeFunction {
    let t = apply_t(g);
    let scale = 2.0 * (g.resolution() * g.resolution()) as f64;
    let coeffs = t
        .coeffs()
        .iter()
        .zip(g.coeffs())
        .map(|(a, b)| scale * (a - b))
        .collect();
    SignedLatticeFunction::from_parts_unchecked(g.eps(), -g.half_width(), coeffs)
}

/// `e^{−λ} Σ_i λ^i/i! Tⁱ(g)`, truncated once the accumulated Poisson weight
/// reaches `1 − tail_tol`, then renormalized.
pub fn wild_step(g: &LatticeDensity, lambda: f64, tail_tol: f64) -> Result<LatticeDensity> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(param(format!("Poisson mean must be >= 0, got {lambda}")));
    }
    if lambda > MAX_SINGLE_STEP_LAMBDA {
        return Err(param(format!(
            "Poisson mean {lambda} exceeds {MAX_SINGLE_STEP_LAMBDA}; split the step"
        )));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(param(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
    }
    if lambda == 0.0 {
        return Ok(g.clone());
    }
    let n = g.resolution();
    let mut weight = (-lambda).exp();
    let mut cumulative = weight;
    let mut acc: Vec<f64> = g.coeffs().iter().map(|c| weight * c).collect();
    let mut term = g.coeffs().to_vec();
    let mut next = vec![0.0; term.len()];
    let term_cap = lambda + 40.0 * lambda.sqrt() + 200.0;
    let mut i = 0u64;
    while cumulative < 1.0 - tail_tol {
        i += 1;
        weight *= lambda / i as f64;
        t_into(n, &term, &mut next);
        std::mem::swap(&mut term, &mut next);
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += weight * t;
        }
        cumulative += weight;
        // Rounding can stall the cumulative sum just below the threshold.
        if i as f64 > term_cap {
            break;
        }
    }
    Ok(LatticeDensity::renormalized(n, acc))
}

/// Number of equal Wild steps used for total Poisson mean `lambda_total`.
pub fn step_count(lambda_total: f64, cfg: &WildConfig) -> u64 {
    (lambda_total / cfg.lambda_max).ceil().max(1.0) as u64
}

/// The lattice solution at time `t`, obtained by splitting `λ = 2t/ε²` into
/// `⌈λ/lambda_max⌉` equal Wild steps.
pub fn evolve(g: &LatticeDensity, t: f64, cfg: &WildConfig) -> Result<LatticeDensity> {
    cfg.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(param(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(g.clone());
    }
    let n = g.resolution();
    let lambda_total = 2.0 * t * (n * n) as f64;
    let steps = step_count(lambda_total, cfg);
    let lambda = lambda_total / steps as f64;
    let mut f = g.clone();
    for _ in 0..steps {
        f = wild_step(&f, lambda, cfg.tail_tol)?;
    }
    Ok(f)
}

/// Evolves along a nondecreasing time grid, reusing each state as the next starting point.
pub fn trajectory(
    g: &LatticeDensity,
    times: &[f64],
    cfg: &WildConfig,
) -> Result<Vec<LatticeDensity>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(param("trajectory times must be nondecreasing"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut current = g.clone();
    let mut now = 0.0;
    for &t in times {
        if t < 0.0 {
            return Err(param(format!("time must be >= 0, got {t}")));
        }
        current = evolve(&current, t - now, cfg)?;
        now = t;
        out.push(current.clone());
    }
    Ok(out)
}

/// Rows `t,mass,mean,temperature,entropy` for the given times.
pub fn trajectory_report(
    g: &LatticeDensity,
    times: &[f64],
    cfg: &WildConfig,
) -> Result<ReportTable> {
    let states = trajectory(g, times, cfg)?;
    let mut table = ReportTable::new(["t", "mass", "mean", "temperature", "entropy"]);
    for (&t, f) in times.iter().zip(&states) {
        table.push_row(trajectory_row(t, f))?;
    }
    Ok(table)
}

pub(crate) fn trajectory_row(t: f64, f: &LatticeDensity) -> Vec<Cell> {
    let m = f.moments();
    vec![
        Cell::Real(t),
        Cell::Real(m.mass),
        Cell::Real(m.mean),
        Cell::Real(m.temperature),
        Cell::Real(entropy(f)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{moment, InitialData};

    fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn t_on_point_mass_at_origin() {
        let d = LatticeDensity::point_mass(3, 0).unwrap();
        let t = apply_t(&d);
        assert_eq!(t.get(-1), 0.5);
        assert_eq!(t.get(1), 0.5);
        assert_eq!(t.get(0), 0.0);
    }

    #[test]
    fn t_at_boundary_has_no_outflow() {
        let d = LatticeDensity::point_mass(1, 2).unwrap();
        let t = apply_t(&d);
        assert_eq!(t.get(1), 1.0);
        assert_eq!(t.coeffs().iter().sum::<f64>(), 1.0);
        let d = LatticeDensity::point_mass(5, -50).unwrap();
        assert_eq!(apply_t(&d).get(-49), 1.0);
    }

    #[test]
    fn t_hand_evaluation() {
        let third = 1.0 / 3.0;
        let g = LatticeDensity::from_sites(2, &[(-1, third), (0, third), (1, third)]).unwrap();
        let t = apply_t(&g);
        let expect = [7.0 / 48.0, 1.0 / 6.0, 3.0 / 8.0, 1.0 / 6.0, 7.0 / 48.0];
        let got: Vec<f64> = (-2..=2).map(|j| t.get(j)).collect();
        assert!(approx(&got, &expect, 1e-16));
        assert!((t.coeffs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn generator_moment_laws() {
        let d0 = LatticeDensity::point_mass(4, 0).unwrap();
        let j = generator(&d0);
        assert!(j.mass().abs() < 1e-10);
        assert!(moment(&j, 1).unwrap().abs() < 1e-12);
        assert!((moment(&j, 2).unwrap() - 2.0).abs() < 1e-12);

        let k = 7;
        let dk = LatticeDensity::point_mass(4, k).unwrap();
        let j = generator(&dk);
        assert!((moment(&j, 1).unwrap() + k as f64 * 0.25).abs() < 1e-12);
        let raw2 = (k as f64 * 0.25).powi(2);
        assert!((moment(&j, 2).unwrap() - 2.0 * (1.0 - raw2)).abs() < 1e-11);
    }

    #[test]
    fn wild_step_zero_and_small_lambda() {
        let g = InitialData::ThreePoint { k: 2, theta0: 0.4 }.build(3).unwrap();
        assert_eq!(wild_step(&g, 0.0, 1e-12).unwrap(), g);

        let d0 = LatticeDensity::point_mass(4, 0).unwrap();
        let lambda = 1e-6;
        let stepped = wild_step(&d0, lambda, 1e-15).unwrap();
        let t = apply_t(&d0);
        for (idx, s) in stepped.coeffs().iter().enumerate() {
            let first_order = d0.coeffs()[idx] + lambda * (t.coeffs()[idx] - d0.coeffs()[idx]);
            assert!((s - first_order).abs() <= 1e-10);
        }
        assert!(wild_step(&d0, -1.0, 1e-12).is_err());
        assert!(wild_step(&d0, 1e4, 1e-12).is_err());
    }

    #[test]
    fn evolve_rejects_negative_time() {
        let d0 = LatticeDensity::point_mass(2, 0).unwrap();
        assert!(evolve(&d0, -0.1, &WildConfig::default()).is_err());
        assert_eq!(evolve(&d0, 0.0, &WildConfig::default()).unwrap(), d0);
        let bad = WildConfig {
            lambda_max: 0.0,
            ..WildConfig::default()
        };
        assert!(evolve(&d0, 1.0, &bad).is_err());
    }

    #[test]
    fn point_mass_temperature_at_unit_time() {
        for n in [2, 4, 8] {
            let d0 = LatticeDensity::point_mass(n, 0).unwrap();
            let m = evolve(&d0, 1.0, &WildConfig::default()).unwrap().moments();
            assert!(m.mean.abs() < 1e-12);
            assert!((m.temperature - (1.0 - (-2f64).exp())).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_relaxes_exponentially() {
        let n = 4;
        let k = 9;
        let dk = LatticeDensity::point_mass(n, k).unwrap();
        for t in [0.3, 1.0, 2.5] {
            let m = evolve(&dk, t, &WildConfig::default()).unwrap().moments();
            assert!((m.mean - k as f64 * 0.25 * (-t as f64).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn splitting_is_consistent() {
        let g = InitialData::ThreePoint { k: 3, theta0: 0.5 }.build(3).unwrap();
        let coarse = evolve(&g, 1.5, &WildConfig::default()).unwrap();
        let fine = evolve(
            &g,
            1.5,
            &WildConfig {
                lambda_max: 3.0,
                tail_tol: 1e-14,
            },
        )
        .unwrap();
        assert!(approx(coarse.coeffs(), fine.coeffs(), 1e-11));
        let via_traj = trajectory(&g, &[0.5, 1.5], &WildConfig::default()).unwrap();
        assert!(approx(via_traj[1].coeffs(), coarse.coeffs(), 1e-11));
    }

    #[test]
    fn trajectory_report_columns() {
        let d0 = LatticeDensity::point_mass(2, 0).unwrap();
        let table = trajectory_report(&d0, &[0.0, 1.0], &WildConfig::default()).unwrap();
        assert_eq!(
            table.columns(),
            &["t", "mass", "mean", "temperature", "entropy"]
        );
        assert_eq!(table.rows().len(), 2);
        assert!(trajectory(&d0, &[1.0, 0.5], &WildConfig::default()).is_err());
    }
}
