//! Signed kernels `G_n = Σ_{k=1}^n (−1)^{k+1} C(n,k) P^{*k}` built from the
//! two-point law `P = ½(δ_{−ε} + δ_ε)`, the central-difference stencils they
//! induce, and order-`2n` linear diffusions driven by them.
//!
//! Kernels and stencils are built in exact rational arithmetic. Floating point
//! enters only when a kernel is placed on a lattice with a concrete step.

use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::lattice::{convolve, LatticeMeasure, SignedLatticeFunction};
use crate::report::{Cell, ReportTable};
use crate::spectral::{symbol, CharFnEvaluator, SymbolKind};

pub const MAX_HALF_ORDER: u32 = 12;
/// Per-step `λ` of the exponential series in [`evolve_higher_order`].
pub const HIGHER_ORDER_STEP_LAMBDA: f64 = 1.0;

type Q = Ratio<i128>;

fn check_order(n: u32) -> Result<()> {
    if n == 0 || n > MAX_HALF_ORDER {
        return Err(Error::Parameter(format!(
            "half-order n must satisfy 1 <= n <= {MAX_HALF_ORDER}, got {n}"
        )));
    }
    Ok(())
}

fn binomial(n: u32, k: u32) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

/// Exact convolution of two coefficient rows on unit-step lattices.
fn convolve_exact(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::from_integer(0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `G_n` with exact rational coefficients on `[−n, n]` lattice steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelGn {
    n: u32,
    coeffs: Vec<Q>,
}

impl KernelGn {
    pub fn new(n: u32) -> Result<Self> {
        check_order(n)?;
        let width = 2 * n as usize + 1;
        let half = Q::new(1, 2);
        let zero = Q::from_integer(0);
        let p = vec![half, zero, half];
        let mut acc = vec![Q::from_integer(0); width];
        // power holds P^{*k} on [−k, k]
        let mut power = vec![Q::from_integer(1)];
        for k in 1..=n {
            power = convolve_exact(&power, &p);
            let sign = if k % 2 == 1 { 1 } else { -1 };
            let weight = Q::from_integer(sign * binomial(n, k));
            let off = (n - k) as usize;
            for (i, c) in power.iter().enumerate() {
                acc[off + i] += weight * c;
            }
        }
        Ok(Self { n, coeffs: acc })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Coefficients at lattice offsets `−n ..= n`.
    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn get(&self, k: i64) -> Q {
        let idx = k + self.n as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            return Q::from_integer(0);
        }
        self.coeffs[idx as usize]
    }

    pub fn sum(&self) -> Q {
        self.coeffs.iter().sum()
    }

    pub fn as_lattice(&self, eps: f64) -> Result<SignedLatticeFunction> {
        let values = self
            .coeffs
            .iter()
            .map(|c| *c.numer() as f64 / *c.denom() as f64)
            .collect();
        SignedLatticeFunction::new(eps, -(self.n as i64), values)
    }
}

/// The kernel `G_n(P_ε)` placed on the lattice with step `eps`.
pub fn gn_kernel(n: u32, eps: f64) -> Result<SignedLatticeFunction> {
    KernelGn::new(n)?.as_lattice(eps)
}

/// Integer stencil `c_k`, `k = −n ..= n`, approximating `ε^{2n} h^{(2n)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    n: u32,
    coeffs: Vec<i64>,
}

impl Stencil {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// `(k, c_k)` pairs for `k = −n ..= n`.
    pub fn indexed(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let n = self.n as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - n, c))
    }

    /// `ε^{−2n}`.
    pub fn scale(&self, eps: f64) -> f64 {
        eps.powi(-2 * self.n as i32)
    }

    pub fn table(&self) -> Result<ReportTable> {
        let mut t = ReportTable::new(["k", "coeff"]);
        t.set_meta("order", (2 * self.n).to_string());
        for (k, c) in self.indexed() {
            t.push_row(vec![Cell::Int(k), Cell::Int(c)])?;
        }
        Ok(t)
    }
}

/// Coefficients of `(−1)^{n+1} 2^n (G_n * h − h)`, which approximates
/// `ε^{2n} h^{(2n)}`. They come out as `(−1)^{n+k} C(2n, n−k)`.
pub fn derivative_stencil(n: u32) -> Result<Stencil> {
    let kernel = KernelGn::new(n)?;
    let sign = if n % 2 == 1 { 1 } else { -1 };
    let scale = Q::from_integer(sign * (1i128 << n));
    let coeffs = (-(n as i64)..=n as i64)
        .map(|k| {
            let delta = if k == 0 { Q::from_integer(1) } else { Q::from_integer(0) };
            let c = scale * (kernel.get(k) - delta);
            if !c.is_integer() {
                return Err(Error::Degenerate(format!("non-integer stencil entry {c} at k = {k}")));
            }
            Ok(c.to_integer() as i64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Stencil { n, coeffs })
}

/// `Σ_k c_k k^m` for `m = 0 ..= 2n` in exact integers.
pub fn stencil_moments(stencil: &Stencil) -> Vec<(u32, i128)> {
    (0..=2 * stencil.n)
        .map(|m| {
            let s = stencil
                .indexed()
                .map(|(k, c)| c as i128 * (k as i128).pow(m))
                .sum();
            (m, s)
        })
        .collect()
}

fn factorial(n: u32) -> i128 {
    (1..=n as i128).product()
}

/// Rows `m, sum, expected, pass` with `expected = 0` for `m < 2n` and `(2n)!` at `m = 2n`.
pub fn moment_condition_check(n: u32) -> Result<ReportTable> {
    let stencil = derivative_stencil(n)?;
    let mut t = ReportTable::new(["m", "sum", "expected", "pass"]);
    t.set_meta("order", (2 * n).to_string());
    for (m, s) in stencil_moments(&stencil) {
        let expected = if m == 2 * n { factorial(2 * n) } else { 0 };
        t.push_row(vec![
            Cell::Int(m as i64),
            Cell::from(s),
            Cell::from(expected),
            Cell::Bool(s == expected),
        ])?;
    }
    Ok(t)
}

/// `Σ_k c_k h_{i+k} / ε^{2n}` at interior points; the `n` points at each end are `None`.
pub fn apply_stencil(h: &[f64], n: u32, eps: f64) -> Result<Vec<Option<f64>>> {
    let stencil = derivative_stencil(n)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let width = 2 * n as usize + 1;
    if h.len() < width {
        return Err(Error::Dimension {
            expected: width,
            got: h.len(),
        });
    }
    let scale = stencil.scale(eps);
    let n = n as usize;
    Ok((0..h.len())
        .map(|i| {
            if i < n || i + n >= h.len() {
                return None;
            }
            let acc: f64 = stencil
                .coeffs
                .iter()
                .zip(&h[i - n..=i + n])
                .map(|(&c, &x)| c as f64 * x)
                .sum();
            Some(acc * scale)
        })
        .collect())
}

/// `A_n(g) = 2^n ε^{−2n} (G_n * g − g)` on the step of `g`.
pub fn higher_order_generator(g: &SignedLatticeFunction, n: u32) -> Result<SignedLatticeFunction> {
    let eps = g.eps();
    let kernel = gn_kernel(n, eps)?;
    let smoothed = convolve(g, &kernel)?;
    let scale = 2f64.powi(n as i32) * eps.powi(-2 * n as i32);
    let first = smoothed.first_index();
    let coeffs = smoothed
        .indexed()
        .map(|(j, c)| scale * (c - g.get(j)))
        .collect();
    SignedLatticeFunction::new(eps, first, coeffs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HigherOrderMode {
    /// `−(ξ²/(1 + ε²ξ²))^n`.
    Rosenau,
    /// `−(2(1 − cos εξ)/ε²)^n`, the symbol of `A_n`.
    Discrete,
    /// `−ξ^{2n}`.
    Exact,
}

impl std::str::FromStr for HigherOrderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rosenau" => Ok(Self::Rosenau),
            "discrete" => Ok(Self::Discrete),
            "exact" => Ok(Self::Exact),
            other => Err(Error::Parameter(format!("unknown higher-order mode '{other}'"))),
        }
    }
}

pub fn higher_order_symbol(mode: HigherOrderMode, xi: f64, eps: f64, n: u32) -> Result<f64> {
    check_order(n)?;
    Ok(match mode {
        HigherOrderMode::Rosenau => symbol(SymbolKind::Rosenau2n, xi, eps, n)?.re,
        HigherOrderMode::Discrete => symbol(SymbolKind::Discrete2n, xi, eps, n)?.re,
        HigherOrderMode::Exact => -xi.powi(2 * n as i32),
    })
}

/// `exp(t σ(ξ)) ĝ₀(ξ)`.
pub fn spectral_higher_order_solution(
    g0_hat: &CharFnEvaluator,
    n: u32,
    eps: f64,
    t: f64,
    xi: f64,
    mode: HigherOrderMode,
) -> Result<Complex64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Parameter(format!("time must be nonnegative, got {t}")));
    }
    let sigma = higher_order_symbol(mode, xi, eps, n)?;
    Ok((t * sigma).exp() * g0_hat.eval(xi))
}

/// `e^{t A_n} g` as `e^{−λ} Σ_i λ^i/i! G_n^{*i} g`, `λ = 2^n t/ε^{2n}`, split into
/// steps with `λ ≤ HIGHER_ORDER_STEP_LAMBDA`. The support grows by `n` sites per term.
pub fn evolve_higher_order(
    g: &SignedLatticeFunction,
    n: u32,
    t: f64,
) -> Result<SignedLatticeFunction> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Parameter(format!("time must be nonnegative, got {t}")));
    }
    let eps = g.eps();
    let kernel = gn_kernel(n, eps)?;
    let lambda_total = 2f64.powi(n as i32) * t * eps.powi(-2 * n as i32);
    let steps = (lambda_total / HIGHER_ORDER_STEP_LAMBDA).ceil().max(1.0);
    if steps > 1e6 {
        return Err(Error::Resource(format!(
            "higher-order evolution needs {steps} steps; reduce t or increase eps"
        )));
    }
    let lambda = lambda_total / steps;
    // ‖G_n‖₁ = 2^n − 1 bounds the growth of each term.
    let norm = 2f64.powi(n as i32) - 1.0;
    let mut state = g.clone();
    for _ in 0..steps as u64 {
        state = exponential_series_step(&state, &kernel, lambda, norm)?;
    }
    Ok(state)
}

fn exponential_series_step(
    g: &SignedLatticeFunction,
    kernel: &SignedLatticeFunction,
    lambda: f64,
    norm: f64,
) -> Result<SignedLatticeFunction> {
    let base = (-lambda).exp();
    let g_norm: f64 = g.coeffs().iter().map(|c| c.abs()).sum();
    let mut term = g.clone();
    let mut weight = base;
    let mut bound = base * g_norm;
    let mut acc = scaled(&term, weight);
    let mut i = 0u32;
    loop {
        i += 1;
        weight *= lambda / i as f64;
        bound *= lambda * norm / i as f64;
        if i as f64 > lambda * norm && bound < 1e-18 * g_norm {
            break;
        }
        term = convolve(&term, kernel)?;
        acc = add_scaled(&acc, &term, weight);
    }
    Ok(acc)
}

fn scaled(f: &SignedLatticeFunction, w: f64) -> SignedLatticeFunction {
    SignedLatticeFunction::from_parts_unchecked(
        f.eps(),
        f.first_index(),
        f.coeffs().iter().map(|c| c * w).collect(),
    )
}

fn add_scaled(a: &SignedLatticeFunction, b: &SignedLatticeFunction, w: f64) -> SignedLatticeFunction {
    let lo = a.first_index().min(b.first_index());
    let hi = a.last_index().max(b.last_index());
    let coeffs = (lo..=hi).map(|j| a.get(j) + w * b.get(j)).collect();
    SignedLatticeFunction::from_parts_unchecked(a.eps(), lo, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{char_fn, moment};

    #[test]
    fn first_kernels() {
        let k1 = gn_kernel(1, 0.5).unwrap();
        assert_eq!(k1.coeffs(), &[0.5, 0.0, 0.5]);
        let k2 = KernelGn::new(2).unwrap();
        let expect = [Q::new(-1, 4), Q::from_integer(1), Q::new(-1, 2), Q::from_integer(1), Q::new(-1, 4)];
        assert_eq!(k2.coeffs(), &expect);
        for n in 1..=MAX_HALF_ORDER {
            let k = KernelGn::new(n).unwrap();
            assert_eq!(k.sum(), Q::from_integer(1));
            for j in 0..=n as i64 {
                assert_eq!(k.get(j), k.get(-j));
            }
        }
        assert!(KernelGn::new(0).is_err());
        assert!(KernelGn::new(13).is_err());
    }

    #[test]
    fn kernel_char_fn() {
        let eps = 0.3;
        for n in 1..=8 {
            let k = gn_kernel(n, eps).unwrap();
            for i in 0..300 {
                let xi = 0.07 * i as f64;
                let expect = 1.0 - (1.0 - (eps * xi).cos()).powi(n as i32);
                assert!((char_fn(&k, xi).re - expect).abs() < 1e-12, "n={n} xi={xi}");
            }
        }
    }

    #[test]
    fn stencil_examples() {
        assert_eq!(derivative_stencil(1).unwrap().coeffs(), &[1, -2, 1]);
        assert_eq!(derivative_stencil(2).unwrap().coeffs(), &[1, -4, 6, -4, 1]);
        assert_eq!(
            derivative_stencil(3).unwrap().coeffs(),
            &[1, -6, 15, -20, 15, -6, 1]
        );
    }

    #[test]
    fn stencil_is_signed_binomial_row() {
        for n in 1..=MAX_HALF_ORDER {
            let s = derivative_stencil(n).unwrap();
            for (k, c) in s.indexed() {
                let sign = if (n as i64 + k).rem_euclid(2) == 0 { 1 } else { -1 };
                assert_eq!(c as i128, sign * binomial(2 * n, (n as i64 - k) as u32));
            }
            assert_eq!(s.coeffs().iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn moment_table() {
        let s2 = stencil_moments(&derivative_stencil(2).unwrap());
        assert_eq!(s2[2], (2, 0));
        assert_eq!(s2[4], (4, 24));
        let s3 = stencil_moments(&derivative_stencil(3).unwrap());
        assert_eq!(s3[6], (6, 720));
        for n in 1..=MAX_HALF_ORDER {
            let t = moment_condition_check(n).unwrap();
            assert!(t.rows().iter().all(|r| r[3] == Cell::Bool(true)), "n={n}");
        }
    }

    #[test]
    fn apply_to_polynomials() {
        let out = apply_stencil(&[0.0, 1.0, 4.0, 9.0], 1, 1.0).unwrap();
        assert_eq!(out, vec![None, Some(2.0), Some(2.0), None]);
        let eps = 0.5;
        for n in 1..=4u32 {
            let h: Vec<f64> = (0..20).map(|i| (i as f64 * eps - 3.0).powi(2 * n as i32)).collect();
            let out = apply_stencil(&h, n, eps).unwrap();
            let f = factorial(2 * n) as f64;
            for v in out.iter().flatten() {
                assert!((v - f).abs() <= 1e-9 * f, "n={n} v={v}");
            }
            let low: Vec<f64> = (0..20).map(|i| (i as f64 * eps - 1.0).powi(2 * n as i32 - 1)).collect();
            for v in apply_stencil(&low, n, eps).unwrap().iter().flatten() {
                assert!(v.abs() < 1e-7);
            }
        }
        assert!(matches!(apply_stencil(&[1.0; 4], 2, 1.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn generator_on_delta() {
        let eps = 0.5;
        let d = SignedLatticeFunction::delta(eps).unwrap();
        let a2 = higher_order_generator(&d, 2).unwrap();
        let e4 = eps.powi(4);
        let expect = [-1.0, 4.0, -6.0, 4.0, -1.0].map(|c| c / e4);
        assert_eq!(a2.first_index(), -2);
        for (x, y) in a2.coeffs().iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
        let m4 = moment(&a2, 4).unwrap();
        assert!((m4 + 24.0).abs() < 1e-12);
    }

    #[test]
    fn generator_symbol() {
        let eps = 0.25;
        let d = SignedLatticeFunction::delta(eps).unwrap();
        for n in 1..=4 {
            let a = higher_order_generator(&d, n).unwrap();
            let scale: f64 = a.coeffs().iter().map(|c| c.abs()).sum();
            for i in 0..100 {
                let xi = 0.13 * i as f64;
                let sym = symbol(SymbolKind::Discrete2n, xi, eps, n).unwrap().re;
                let got = char_fn(&a, xi);
                assert!((got.re - sym).abs() < 1e-12 * scale, "n={n}");
                assert!(got.im.abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn a1_is_discrete_diffusion() {
        let eps = 0.5;
        let g = SignedLatticeFunction::new(eps, -1, vec![0.2, 0.5, 0.3]).unwrap();
        let a1 = higher_order_generator(&g, 1).unwrap();
        let p = gn_kernel(1, eps).unwrap();
        let pg = convolve(&g, &p).unwrap();
        for (j, c) in a1.indexed() {
            let expect = 2.0 / (eps * eps) * (pg.get(j) - g.get(j));
            assert!((c - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_evolution_moments() {
        let eps = 0.5;
        let t = 0.01;
        let g = SignedLatticeFunction::new(eps, -2, vec![0.1, 0.2, 0.4, 0.2, 0.1]).unwrap();
        for n in 1..=3u32 {
            let out = evolve_higher_order(&g, n, t).unwrap();
            for m in 0..2 * n {
                let d = moment(&out, m).unwrap() - moment(&g, m).unwrap();
                assert!(d.abs() < 1e-9, "n={n} m={m} d={d}");
            }
            let rate = (moment(&out, 2 * n).unwrap() - moment(&g, 2 * n).unwrap()) / t;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let expect = sign * factorial(2 * n) as f64;
            assert!((rate - expect).abs() < 1e-6 * expect.abs(), "n={n} rate={rate}");
        }
    }

    #[test]
    fn lattice_evolution_matches_spectral() {
        let eps = 0.5;
        let t = 0.02;
        let g = SignedLatticeFunction::new(eps, -1, vec![0.25, 0.5, 0.25]).unwrap();
        let g_hat = {
            let g = g.clone();
            CharFnEvaluator::new("g", vec![], move |xi| char_fn(&g, xi))
        };
        for n in 1..=3 {
            let out = evolve_higher_order(&g, n, t).unwrap();
            for i in 0..50 {
                let xi = 0.2 * i as f64;
                let s = spectral_higher_order_solution(&g_hat, n, eps, t, xi, HigherOrderMode::Discrete).unwrap();
                assert!((char_fn(&out, xi) - s).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_mode_fourth_moment() {
        let u = 0.0;
        let g0 = CharFnEvaluator::gaussian(u, 1.0).unwrap();
        let t = 0.3;
        let f = |xi: f64| {
            spectral_higher_order_solution(&g0, 2, 0.1, t, xi, HigherOrderMode::Exact)
                .unwrap()
                .re
        };
        // Fourth derivative at 0 equals m₄; five-point differences at h and h/2
        // are combined by Richardson extrapolation.
        let d4 = |h: f64| (f(2.0 * h) - 4.0 * f(h) + 6.0 * f(0.0) - 4.0 * f(-h) + f(-2.0 * h)) / h.powi(4);
        let h = 0.02;
        let m4 = (4.0 * d4(h / 2.0) - d4(h)) / 3.0;
        assert!((m4 - (3.0 - 24.0 * t)).abs() < 1e-6, "m4={m4}");
    }

    #[test]
    fn modes_and_errors() {
        assert_eq!("exact".parse::<HigherOrderMode>().unwrap(), HigherOrderMode::Exact);
        assert!("bogus".parse::<HigherOrderMode>().is_err());
        let g0 = CharFnEvaluator::maxwellian();
        let v = spectral_higher_order_solution(&g0, 2, 0.1, 0.0, 1.3, HigherOrderMode::Rosenau).unwrap();
        assert_eq!(v, g0.eval(1.3));
        assert!(spectral_higher_order_solution(&g0, 2, 0.1, -1.0, 1.0, HigherOrderMode::Exact).is_err());
        let xi = 1.0;
        let d = |eps: f64| {
            (higher_order_symbol(HigherOrderMode::Discrete, xi, eps, 2).unwrap()
                - higher_order_symbol(HigherOrderMode::Exact, xi, eps, 2).unwrap())
            .abs()
        };
        let ratio = d(0.05) / d(0.1);
        assert!((ratio - 0.25).abs() < 0.01, "ratio={ratio}");
    }
}
