//! Fourier-side tools: closed-form lattice solutions along characteristics,
//! operator symbols, the `d_s` metrics and the decay/stability reports built on them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::evolution::{trajectory, WildConfig};
use crate::lattice::{char_fn, construct_initial, moment, InitialData, LatticeDensity};
use crate::report::{Cell, ReportTable};

/// Points per period `(0, 2π/ε]` for lattice-vs-lattice sups.
pub const LATTICE_GRID_POINTS: usize = 4096;
/// Continuous comparison grid `[XI_MIN, XI_MAX]`.
pub const XI_MIN: f64 = 1e-2;
pub const XI_MAX: f64 = 50.0;
pub const CONTINUOUS_GRID_POINTS: usize = 8192;
/// Tolerance on declared moments when checking `d_s` finiteness.
pub const MOMENT_AGREEMENT_TOL: f64 = 1e-8;
/// Relative slack in the exponential-decay assertion.
pub const DECAY_SLACK: f64 = 1e-6;
/// Accepted band for `d₃(2N)/d₃(N)` in the stability report.
pub const STABILITY_RATIO_BAND: (f64, f64) = (0.35, 0.65);

type EvalFn = dyn Fn(f64) -> Complex64 + Send + Sync;

/// A characteristic function together with whatever raw moments the caller knows.
#[derive(Clone)]
pub struct CharFnEvaluator {
    eval: Arc<EvalFn>,
    known_moments: Vec<f64>,
    label: String,
}

impl fmt::Debug for CharFnEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharFnEvaluator")
            .field("label", &self.label)
            .field("known_moments", &self.known_moments)
            .finish_non_exhaustive()
    }
}

impl CharFnEvaluator {
    pub fn new<F>(label: impl Into<String>, known_moments: Vec<f64>, eval: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            known_moments,
            label: label.into(),
        }
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        (self.eval)(xi)
    }

    pub fn known_moments(&self) -> &[f64] {
        &self.known_moments
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Lattice density, declaring raw moments 0..=4.
    pub fn from_density(g: &LatticeDensity) -> Self {
        let moments = (0..=4).map(|k| moment(g, k).unwrap_or(f64::NAN)).collect();
        let g = g.clone();
        let label = format!("lattice(N={})", g.resolution());
        Self::new(label, moments, move |xi| char_fn(&g, xi))
    }

    /// Normal law with mean `u0` and variance `theta0`.
    pub fn gaussian(u0: f64, theta0: f64) -> Result<Self> {
        if !(theta0 >= 0.0 && theta0.is_finite() && u0.is_finite()) {
            return Err(param(format!(
                "gaussian needs finite u0 and theta0 >= 0, got ({u0}, {theta0})"
            )));
        }
        let moments = vec![
            1.0,
            u0,
            u0 * u0 + theta0,
            u0.powi(3) + 3.0 * u0 * theta0,
            u0.powi(4) + 6.0 * u0 * u0 * theta0 + 3.0 * theta0 * theta0,
        ];
        Ok(Self::new(
            format!("gaussian(u0={u0},theta0={theta0})"),
            moments,
            move |xi| gaussian_charfn(u0, theta0, xi),
        ))
    }

    /// The standard normal law.
    pub fn maxwellian() -> Self {
        Self::gaussian(0.0, 1.0).expect("unit Gaussian is valid")
    }

    /// Closed-form stationary lattice law.
    pub fn stationary(resolution: usize) -> Self {
        let n2 = (resolution * resolution) as f64;
        let moments = vec![1.0, 0.0, 1.0, 0.0, 3.0 - 0.5 / n2];
        Self::new(
            format!("stationary(N={resolution})"),
            moments,
            move |xi| Complex64::new(stationary_charfn(xi, resolution), 0.0),
        )
    }

    /// Continuous Fokker–Planck (Ornstein–Uhlenbeck) evolution of this law to time `t`.
    pub fn ou_evolved(&self, t: f64) -> Result<Self> {
        check_time(t)?;
        let base = self.clone();
        let decay = (-t).exp();
        let spread = -(-2.0 * t).exp_m1();
        Ok(Self::new(
            format!("ou({}, t={t})", self.label),
            evolve_low_moments(&self.known_moments, t),
            move |xi| base.eval(decay * xi) * (-0.5 * xi * xi * spread).exp(),
        ))
    }

    /// Discrete Fokker–Planck evolution at resolution `N` via [`discrete_fp_charfn_exact`].
    pub fn discrete_fp_evolved(&self, t: f64, resolution: usize) -> Result<Self> {
        check_time(t)?;
        crate::lattice::half_width(resolution)?;
        let base = self.clone();
        Ok(Self::new(
            format!("discrete-fp({}, t={t}, N={resolution})", self.label),
            evolve_low_moments(&self.known_moments, t),
            move |xi| characteristic_solution(&base, xi, t, resolution),
        ))
    }
}

/// Mass, mean and raw second moment follow the same laws for the continuous
/// and the lattice equation; higher declared moments are dropped.
fn evolve_low_moments(m: &[f64], t: f64) -> Vec<f64> {
    let decay = (-t).exp();
    let mut out = Vec::new();
    if let Some(&m0) = m.first() {
        out.push(m0);
        if let Some(&m1) = m.get(1) {
            out.push(decay * m1);
            if let Some(&m2) = m.get(2) {
                out.push(decay * decay * m2 - (-2.0 * t).exp_m1() * m0);
            }
        }
    }
    out
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(param(format!("time must be >= 0, got {t}")))
    }
}

/// Back-propagated frequency and amplitude factor of the characteristic solution.
///
/// With `θ = εξ/2 = mπ + φ`, `φ ∈ [−π/2, π/2)`, the characteristic through `ξ`
/// starts from `(2/ε)(mπ + arctan(e^{−t} tan φ))` and the amplitude is
/// `(cos²φ + e^{−2t} sin²φ)^{2N²}`, which stays finite at `φ = −π/2`.
pub fn characteristic_foot(xi: f64, t: f64, resolution: usize) -> (f64, f64) {
    let eps = 1.0 / resolution as f64;
    let theta = 0.5 * eps * xi;
    let m = (theta / PI + 0.5).floor();
    let phi = theta - m * PI;
    let (s, c) = phi.sin_cos();
    let decay = (-t).exp();
    // cos φ ≥ 0 on the branch, so atan2 is arctan(e^{−t} tan φ) including φ = ±π/2.
    let back = (2.0 / eps) * (m * PI + (decay * s).atan2(c.max(0.0)));
    let n2 = (resolution * resolution) as f64;
    let amplitude = (2.0 * n2 * ((-2.0 * t).exp_m1() * s * s).ln_1p()).exp();
    (back, amplitude)
}

fn characteristic_solution(phi: &CharFnEvaluator, xi: f64, t: f64, resolution: usize) -> Complex64 {
    if t == 0.0 {
        return phi.eval(xi);
    }
    let (back, amplitude) = characteristic_foot(xi, t, resolution);
    phi.eval(back) * amplitude
}

/// `f̂_ε(ξ, t)` for initial characteristic function `phi_hat` at lattice resolution `N`.
pub fn discrete_fp_charfn_exact(
    phi_hat: &CharFnEvaluator,
    xi: f64,
    t: f64,
    resolution: usize,
) -> Result<Complex64> {
    check_time(t)?;
    crate::lattice::half_width(resolution)?;
    Ok(characteristic_solution(phi_hat, xi, t, resolution))
}

/// `((1 + cos(ξ/N))/2)^{2N²}`.
pub fn stationary_charfn(xi: f64, resolution: usize) -> f64 {
    let n = resolution as f64;
    let half = (0.5 * xi / n).sin();
    (2.0 * n * n * (-half * half).ln_1p()).exp()
}

fn gaussian_charfn(u0: f64, theta0: f64, xi: f64) -> Complex64 {
    Complex64::new(-0.5 * xi * xi * theta0, -u0 * xi).exp()
}

/// Characteristic function of `e^{−t}X + (1 − e^{−2t})^{1/2}W` for `X ~ N(u₀, θ₀)`.
pub fn ou_gaussian_charfn(u0: f64, theta0: f64, xi: f64, t: f64) -> Result<Complex64> {
    check_time(t)?;
    if !(theta0 >= 0.0 && theta0.is_finite() && u0.is_finite()) {
        return Err(param(format!(
            "need finite u0 and theta0 >= 0, got ({u0}, {theta0})"
        )));
    }
    let decay = (-t).exp();
    let variance = theta0 * decay * decay - (-2.0 * t).exp_m1();
    Ok(gaussian_charfn(u0 * decay, variance, xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    /// `−(2/ε²)(1 − cos εξ)`.
    DiscreteDiffusion,
    /// `−sin(εξ)/ε`, the coefficient of `∂_ξ f̂`.
    DiscreteDrift,
    /// `−ξ²/(1 + ε²ξ²)`.
    RosenauFp,
    /// `−ξ/(1 + ε²ξ²)`, the coefficient of `∂_ξ f̂`.
    RosenauFpDrift,
    /// `−(ξ²/(1 + ε²ξ²))^n`.
    Rosenau2n,
    /// `−(2(1 − cos εξ)/ε²)^n`.
    Discrete2n,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 6] = [
        SymbolKind::DiscreteDiffusion,
        SymbolKind::DiscreteDrift,
        SymbolKind::RosenauFp,
        SymbolKind::RosenauFpDrift,
        SymbolKind::Rosenau2n,
        SymbolKind::Discrete2n,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SymbolKind::DiscreteDiffusion => "discrete-diffusion",
            SymbolKind::DiscreteDrift => "discrete-drift",
            SymbolKind::RosenauFp => "rosenau-fp",
            SymbolKind::RosenauFpDrift => "rosenau-fp-drift",
            SymbolKind::Rosenau2n => "rosenau-2n",
            SymbolKind::Discrete2n => "discrete-2n",
        }
    }

    /// The `ε → 0` limit: `−ξ²`, `−ξ` or `−ξ^{2n}`.
    pub fn continuous_limit(self, xi: f64, n: u32) -> f64 {
        match self {
            SymbolKind::DiscreteDiffusion | SymbolKind::RosenauFp => -xi * xi,
            SymbolKind::DiscreteDrift | SymbolKind::RosenauFpDrift => -xi,
            SymbolKind::Rosenau2n | SymbolKind::Discrete2n => -xi.powi(2 * n as i32),
        }
    }
}

impl FromStr for SymbolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SymbolKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| param(format!("unknown symbol kind '{s}'")))
    }
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `2(1 − cos εξ)/ε²`, evaluated as `(2 sin(εξ/2)/ε)²` to avoid cancellation.
fn discrete_laplacian_multiplier(xi: f64, eps: f64) -> f64 {
    let s = 2.0 * (0.5 * eps * xi).sin() / eps;
    s * s
}

pub fn symbol(kind: SymbolKind, xi: f64, eps: f64, n: u32) -> Result<Complex64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(param(format!("eps must be positive, got {eps}")));
    }
    if n == 0 {
        return Err(param("symbol order n must be positive"));
    }
    let rosenau = xi * xi / (1.0 + eps * eps * xi * xi);
    let value = match kind {
        SymbolKind::DiscreteDiffusion => -discrete_laplacian_multiplier(xi, eps),
        SymbolKind::DiscreteDrift => -(eps * xi).sin() / eps,
        SymbolKind::RosenauFp => -rosenau,
        SymbolKind::RosenauFpDrift => -xi / (1.0 + eps * eps * xi * xi),
        SymbolKind::Rosenau2n => -rosenau.powi(n as i32),
        SymbolKind::Discrete2n => -discrete_laplacian_multiplier(xi, eps).powi(n as i32),
    };
    Ok(Complex64::new(value, 0.0))
}

/// A finite set of nonzero frequencies with a human-readable description.
#[derive(Clone, Debug, PartialEq)]
pub struct XiGrid {
    points: Vec<f64>,
    spec: String,
}

impl XiGrid {
    pub fn new(points: Vec<f64>, spec: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(param("frequency grid is empty"));
        }
        if let Some(x) = points.iter().find(|x| **x == 0.0 || !x.is_finite()) {
            return Err(param(format!("frequency grid contains invalid point {x}")));
        }
        Ok(Self {
            points,
            spec: spec.into(),
        })
    }

    /// `count` equispaced points from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(param(format!(
                "linspace needs count >= 2 and hi > lo, got [{lo}, {hi}] x {count}"
            )));
        }
        let h = (hi - lo) / (count - 1) as f64;
        let points = (0..count).map(|i| lo + h * i as f64).collect();
        Self::new(points, format!("linspace[{lo}, {hi}] x {count}"))
    }

    /// `(2π/ε)·i/count` for `i = 1..=count`, one full lattice period.
    pub fn period(eps: f64, count: usize) -> Result<Self> {
        if count == 0 || !(eps > 0.0) {
            return Err(param("period grid needs eps > 0 and count > 0"));
        }
        let p = 2.0 * PI / eps;
        let points = (1..=count).map(|i| p * i as f64 / count as f64).collect();
        Self::new(points, format!("period(0, 2pi/eps={p}] x {count}"))
    }

    /// Default lattice-vs-lattice grid for resolution `N`.
    pub fn lattice_default(resolution: usize) -> Self {
        Self::period(1.0 / resolution as f64, LATTICE_GRID_POINTS).expect("valid period grid")
    }

    /// Default lattice-vs-continuous grid.
    pub fn continuous_default() -> Self {
        Self::linspace(XI_MIN, XI_MAX, CONTINUOUS_GRID_POINTS).expect("valid linspace")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    /// Sub-grid of points satisfying `keep`.
    pub fn filtered(&self, keep: impl Fn(f64) -> bool, label: &str) -> Result<Self> {
        let points = self.points.iter().copied().filter(|&x| keep(x)).collect();
        Self::new(points, format!("{} where {label}", self.spec))
    }
}

/// Outcome of a grid sup `max |F − G|/|ξ|^s`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricResult {
    pub value: f64,
    pub argmax_xi: f64,
    pub grid_spec: String,
    /// False when the declared moments disagree below order `⌈s⌉`, in which case
    /// the true metric is infinite and `value` only reflects the grid.
    pub moments_agree: bool,
}

/// Grid evaluation of `sup_ξ |F(ξ) − G(ξ)| / |ξ|^s`.
pub fn fourier_distance(
    f: &CharFnEvaluator,
    g: &CharFnEvaluator,
    s: f64,
    grid: &XiGrid,
) -> Result<MetricResult> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(param(format!("metric order s must be positive, got {s}")));
    }
    let needed = s.ceil() as usize;
    let moments_agree = (0..needed).all(|k| {
        match (f.known_moments.get(k), g.known_moments.get(k)) {
            (Some(a), Some(b)) => (a - b).abs() <= MOMENT_AGREEMENT_TOL,
            _ => false,
        }
    });
    let ratios: Vec<f64> = grid
        .points
        .par_iter()
        .map(|&xi| (f.eval(xi) - g.eval(xi)).norm() / xi.abs().powf(s))
        .collect();
    let (value, argmax_xi) = sup_with_arg(&ratios, &grid.points);
    Ok(MetricResult {
        value,
        argmax_xi,
        grid_spec: grid.spec.clone(),
        moments_agree,
    })
}

/// Largest value and its abscissa; the first maximizer wins ties.
fn sup_with_arg(values: &[f64], xs: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (&v, &x) in values.iter().zip(xs) {
        if v > best.0 || v.is_nan() {
            best = (v, x);
            if v.is_nan() {
                break;
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    /// Sup over `|εξ| ≤ π/2` of `|f̂_ε(ξ,t) − f̂_∞(ξ)|/ξ²`.
    pub d: f64,
    /// `4e^{−2t} d₂(φ_ε, f_∞)`.
    pub bound: f64,
    /// `8ε²/π²`.
    pub tail_bound: f64,
    /// Observed sup over `π/2 < |εξ| ≤ 4π`.
    pub tail_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub resolution: usize,
    pub d2_initial: MetricResult,
    pub rows: Vec<DecayRow>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn table(&self) -> ReportTable {
        let mut t = ReportTable::new(["t", "D", "bound", "tail_bound", "tail_value", "pass"]);
        t.set_meta("N", self.resolution.to_string());
        t.set_meta("d2_initial", crate::report::format_real(self.d2_initial.value));
        t.set_meta("d2_grid", self.d2_initial.grid_spec.clone());
        for r in &self.rows {
            t.push_row(vec![
                Cell::Real(r.t),
                Cell::Real(r.d),
                Cell::Real(r.bound),
                Cell::Real(r.tail_bound),
                Cell::Real(r.tail_value),
                Cell::Bool(r.pass),
            ])
            .expect("row width matches header");
        }
        t
    }
}

/// Checks `sup_{|εξ|≤π/2} |f̂_ε(t) − f̂_∞|/ξ² ≤ 4e^{−2t} d₂(φ_ε, f_∞)` along `times`
/// and the tail bound `8ε²/π²` outside that set.
pub fn decay_report(phi: &LatticeDensity, times: &[f64], resolution: usize) -> Result<DecayReport> {
    if phi.resolution() != resolution {
        return Err(param(format!(
            "density has N = {} but the report was asked for N = {resolution}",
            phi.resolution()
        )));
    }
    let mean = moment(phi, 1)?;
    if mean.abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "decay estimate needs zero mean, initial mean is {mean:e}"
        )));
    }
    for &t in times {
        check_time(t)?;
    }
    let eps = phi.eps();
    let phi_hat = CharFnEvaluator::from_density(phi);
    let equilibrium = CharFnEvaluator::stationary(resolution);
    let period = XiGrid::lattice_default(resolution);
    let d2 = fourier_distance(&phi_hat, &equilibrium, 2.0, &period)?;

    let quarter = 0.5 * PI / eps;
    let inner = period.filtered(|x| x <= quarter, "|eps xi| <= pi/2")?;
    let outer_points = (1..=4 * LATTICE_GRID_POINTS)
        .map(|i| 4.0 * PI / eps * i as f64 / (4 * LATTICE_GRID_POINTS) as f64)
        .filter(|&x| x > quarter)
        .collect();
    let outer = XiGrid::new(outer_points, "(pi/2, 4pi] in eps xi")?;
    let tail_bound = 8.0 * eps * eps / (PI * PI);

    let rows = times
        .par_iter()
        .map(|&t| {
            let evolved = phi_hat.discrete_fp_evolved(t, resolution)?;
            let d = fourier_distance(&evolved, &equilibrium, 2.0, &inner)?.value;
            let tail_value = fourier_distance(&evolved, &equilibrium, 2.0, &outer)?.value;
            let bound = 4.0 * (-2.0 * t).exp() * d2.value;
            Ok(DecayRow {
                t,
                d,
                bound,
                tail_bound,
                tail_value,
                pass: d <= bound * (1.0 + DECAY_SLACK) && tail_value <= tail_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayReport {
        resolution,
        d2_initial: d2,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityRow {
    pub resolution: usize,
    pub t: f64,
    pub d3: f64,
    /// `d₃` at this `N` divided by `d₃` at the previous `N` of the list, same `t`.
    pub ratio_prev: Option<f64>,
    /// `ε·C(ε,u₀) = 2ε/3! + ε²|u₀|/3!`.
    pub eps_bound_constant: f64,
}

impl StabilityRow {
    pub fn ratio_in_band(&self) -> Option<bool> {
        self.ratio_prev
            .map(|r| r >= STABILITY_RATIO_BAND.0 && r <= STABILITY_RATIO_BAND.1)
    }
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub u0: f64,
    pub theta0: f64,
    pub grid_spec: String,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.ratio_in_band().unwrap_or(true))
    }

    pub fn table(&self) -> ReportTable {
        let mut t = ReportTable::new([
            "N",
            "t",
            "d3",
            "ratio_prev_N",
            "eps_bound_constant",
            "pass",
        ]);
        t.set_meta("u0", crate::report::format_real(self.u0));
        t.set_meta("theta0", crate::report::format_real(self.theta0));
        t.set_meta("d3_grid", self.grid_spec.clone());
        for r in &self.rows {
            t.push_row(vec![
                Cell::Int(r.resolution as i64),
                Cell::Real(r.t),
                Cell::Real(r.d3),
                r.ratio_prev
                    .map(Cell::Real)
                    .unwrap_or_else(|| Cell::Text(String::new())),
                Cell::Real(r.eps_bound_constant),
                r.ratio_in_band()
                    .map(Cell::Bool)
                    .unwrap_or_else(|| Cell::Text("n/a".into())),
            ])
            .expect("row width matches header");
        }
        t
    }
}

/// `d₃` between the continuous solution from `N(u₀, θ₀)` and the lattice solution
/// from its moment-projected cell discretization, for every `N` and `t`.
pub fn stability_report(
    u0: f64,
    theta0: f64,
    resolutions: &[usize],
    times: &[f64],
    cfg: &WildConfig,
) -> Result<StabilityReport> {
    cfg.validate()?;
    if resolutions.is_empty() || times.is_empty() {
        return Err(param("stability report needs at least one N and one t"));
    }
    let grid = XiGrid::continuous_default();
    let continuous = CharFnEvaluator::gaussian(u0, theta0)?;
    let mut sorted_times = times.to_vec();
    sorted_times.sort_by(f64::total_cmp);

    let per_n: Vec<Vec<f64>> = resolutions
        .par_iter()
        .map(|&n| {
            let phi = construct_initial(&InitialData::GaussianCells { u0, theta0 }, n)?;
            let m = phi.moments();
            if (m.mean - u0).abs() > MOMENT_AGREEMENT_TOL
                || (m.temperature - theta0).abs() > MOMENT_AGREEMENT_TOL
            {
                return Err(Error::Precondition(format!(
                    "lattice data at N = {n} misses the target moments"
                )));
            }
            let states = trajectory(&phi, &sorted_times, cfg)?;
            sorted_times
                .iter()
                .zip(&states)
                .map(|(&t, f)| {
                    let exact = continuous.ou_evolved(t)?;
                    let lattice = CharFnEvaluator::from_density(f);
                    Ok(fourier_distance(&exact, &lattice, 3.0, &grid)?.value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, &n) in resolutions.iter().enumerate() {
        let eps = 1.0 / n as f64;
        for (k, &t) in sorted_times.iter().enumerate() {
            let d3 = per_n[i][k];
            rows.push(StabilityRow {
                resolution: n,
                t,
                d3,
                ratio_prev: (i > 0).then(|| d3 / per_n[i - 1][k]),
                eps_bound_constant: 2.0 * eps / 6.0 + eps * eps * u0.abs() / 6.0,
            });
        }
    }
    Ok(StabilityReport {
        u0,
        theta0,
        grid_spec: grid.spec().to_string(),
        rows,
    })
}
