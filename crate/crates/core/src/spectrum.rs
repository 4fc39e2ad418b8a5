//! Structure factor of the fBm-perturbed lattice.
//!
//! Four routes to `s(t)`:
//! * `Sum` — the lattice series `1 + 2 Σ_{n≥1} e^{−½ n^{2h} t²} cos(nt)`,
//! * `Continuum` — its integral counterpart `2 ∫_0^∞ e^{−½ t² x^{2h}} cos(tx) dx`,
//! * `Asymptotic` — the small-`t` law `α_h |t|^{1−2h}`,
//! * `Empirical` — the scattering intensity of simulated configurations.
//!
//! Fourier convention is `e^{−itx}` without a `2π` factor.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::fgn::HurstIndex;
use crate::pointproc::PointConfiguration;
use crate::quad::{integrate, integrate_cosine_tail, Tolerance};

/// Default cap on lattice-sum terms.
pub const MAX_SUM_TERMS: u64 = 100_000_000;
/// Default absolute tolerance of the numerical routes.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
const SUM_CHUNK: u64 = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Sum,
    Continuum,
    Asymptotic,
    Empirical,
}

impl std::str::FromStr for SpectrumMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "continuum" => Ok(Self::Continuum),
            "asymptotic" => Ok(Self::Asymptotic),
            "empirical" => Ok(Self::Empirical),
            other => Err(Error::InvalidArgument(format!("unknown spectrum method `{other}`"))),
        }
    }
}

impl std::fmt::Display for SpectrumMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Continuum => "continuum",
            Self::Asymptotic => "asymptotic",
            Self::Empirical => "empirical",
        })
    }
}

/// `s(t)` on a grid. `trunc` holds, per `t`: the number of series terms
/// (`Sum`), the quadrature tolerance (`Continuum`), `0` (`Asymptotic`), or
/// the Monte Carlo standard error (`Empirical`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureFactorCurve {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub method: SpectrumMethod,
    pub trunc: Vec<f64>,
    pub params: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSum {
    pub value: f64,
    pub terms: u64,
}

fn validate_t(t: f64) -> Result<f64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite and nonzero, got {t}")));
    }
    Ok(t.abs())
}

/// Upper bound on `2 Σ_{n>N} e^{−a n^{2h}}` via `2 ∫_N^∞ e^{−a x^{2h}} dx`.
pub fn tail_bound(h: HurstIndex, t: f64, terms: u64) -> f64 {
    let a = 0.5 * t * t;
    let s = 1.0 / h.two_h();
    let x = a * (terms as f64).powf(h.two_h());
    let q = gamma_ur(s, x);
    if q <= 0.0 {
        return 0.0;
    }
    2.0 * s * (ln_gamma(s) - s * a.ln() + q.ln()).exp()
}

/// Smallest `N ≤ cap` whose tail bound is below `tol`.
pub fn truncation_terms(h: HurstIndex, t: f64, tol: f64, cap: u64) -> Result<u64> {
    let t = validate_t(t)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if tail_bound(h, t, cap) >= tol {
        return Err(Error::TruncationTooLarge { t, cap });
    }
    let (mut lo, mut hi) = (0u64, cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail_bound(h, t, mid) < tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `1 + 2 Σ_{n=1}^{N} e^{−½ n^{2h} t²} cos(nt)` for a fixed `N`.
///
/// Chunks of fixed size are summed in parallel and combined in index order,
/// so the result is independent of the thread count.
pub fn lattice_sum_fixed(h: HurstIndex, t: f64, terms: u64) -> f64 {
    let a = 0.5 * t * t;
    let p = h.two_h();
    let chunks = terms.div_ceil(SUM_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SUM_CHUNK + 1;
            let hi = ((c + 1) * SUM_CHUNK).min(terms);
            neumaier((lo..=hi).map(|n| {
                let nf = n as f64;
                (-a * nf.powf(p)).exp() * (nf * t).cos()
            }))
        })
        .collect();
    1.0 + 2.0 * neumaier(partial.into_iter())
}

/// Lattice series truncated adaptively so that the neglected tail is `< tol`.
pub fn structure_factor_sum(h: HurstIndex, t: f64, tol: f64) -> Result<LatticeSum> {
    structure_factor_sum_capped(h, t, tol, MAX_SUM_TERMS)
}

pub fn structure_factor_sum_capped(h: HurstIndex, t: f64, tol: f64, cap: u64) -> Result<LatticeSum> {
    let t = validate_t(t)?;
    let terms = truncation_terms(h, t, tol, cap)?;
    Ok(LatticeSum {
        value: lattice_sum_fixed(h, t, terms),
        terms,
    })
}

/// Closed form of the lattice series at `h = 1/2`:
/// `1 + 2 Re(q / (1 − q))` with `q = e^{it − t²/2}`.
pub fn brownian_closed_form(t: f64) -> f64 {
    let q = Complex::new(-0.5 * t * t, t).exp();
    1.0 + 2.0 * (q / (Complex::new(1.0, 0.0) - q)).re
}

/// Continuum structure factor `2 ∫_0^∞ e^{−½ t² x^{2h}} cos(tx) dx`.
///
/// After `u = tx` the integrand is `e^{−c u^{2h}} cos u` with
/// `c = ½ t^{2−2h}`. The contour is rotated to `u = r e^{iφ}` with
/// `φ = min(π/2, π/(4h))`, where `e^{iu}` decays and `e^{−c u^{2h}}` stays
/// bounded; the rotated integrand is non-oscillatory for `h ≤ 1/2` and
/// exponentially damped otherwise.
pub fn continuum_structure_factor(h: HurstIndex, t: f64, tol: f64) -> Result<f64> {
    let t = validate_t(t)?;
    let p = h.two_h();
    let c = 0.5 * t.powf(2.0 - p);
    let abs_tol = 0.5 * tol * t;
    let integral = if h.value() <= 0.5 {
        let (sn, cs) = (PI * h.value()).sin_cos();
        let f = move |r: f64| {
            let w = c * r.powf(p);
            (-r - w * cs).exp() * (w * sn).sin()
        };
        integrate(f, 0.0, 60.0, Tolerance::new(abs_tol, 1e-13))?
    } else {
        let phi = PI / (4.0 * h.value());
        let dir = Complex::from_polar(1.0, phi);
        let rot = Complex::from_polar(c, p * phi);
        let f = move |r: f64| (dir * (Complex::new(0.0, r) * dir - rot * r.powf(p)).exp()).re;
        integrate(f, 0.0, 60.0 / phi.sin(), Tolerance::new(abs_tol, 1e-13))?
    };
    Ok(2.0 / t * integral)
}

/// The same integral on the real line: cut at the zeros of `cos(tx)`, sum
/// half periods, accelerate with Wynn's epsilon. Needs the envelope to decay
/// within a reasonable number of periods, so it is practical only for
/// moderate `t`.
pub fn continuum_structure_factor_oscillatory(h: HurstIndex, t: f64, tol: f64) -> Result<f64> {
    let t = validate_t(t)?;
    let a = 0.5 * t * t;
    let p = h.two_h();
    let v = integrate_cosine_tail(move |x: f64| (-a * x.powf(p)).exp(), t, 0.0, 0.5 * tol, 200_000)?;
    Ok(2.0 * v)
}

/// `α_h = 2h Γ(2h) sin(πh)`.
pub fn asymptotic_constant(h: HurstIndex) -> f64 {
    let p = h.two_h();
    p * gamma(p) * (PI * h.value()).sin()
}

/// `α_h |t|^{1−2h}`.
pub fn asymptotic_structure_factor(h: HurstIndex, t: f64) -> f64 {
    asymptotic_constant(h) * t.abs().powf(1.0 - h.two_h())
}

/// Index `k` if `t = 2πk/L` for an integer `k ≥ 1`.
pub fn dual_grid_index(t: f64, length: f64) -> Option<u64> {
    let k = t * length / (2.0 * PI);
    let r = k.round();
    if r >= 1.0 && (k - r).abs() <= 1e-9 * r.max(1.0) {
        Some(r as u64)
    } else {
        None
    }
}

/// All dual-grid frequencies `2πk/L` in `[tmin, tmax]`.
pub fn dual_grid(length: f64, tmin: f64, tmax: f64) -> Vec<f64> {
    let step = 2.0 * PI / length;
    let k0 = (tmin / step).ceil().max(1.0) as u64;
    let k1 = (tmax / step).floor() as u64;
    (k0..=k1).map(|k| k as f64 * step).collect()
}

/// Estimator options.
#[derive(Clone, Copy, Debug)]
pub struct EmpiricalOptions {
    /// Window length `L`; points in `[−L/2, L/2)` are used.
    pub length: f64,
    /// Accept frequencies off the dual grid (biased by window leakage).
    pub allow_off_grid: bool,
}

fn intensities_direct(points: &[f64], ts: &[f64]) -> Vec<f64> {
    ts.iter()
        .map(|&t| {
            let mut acc = Complex::new(0.0, 0.0);
            for &x in points {
                acc += Complex::from_polar(1.0, -t * x);
            }
            acc.norm_sqr()
        })
        .collect()
}

/// `|Σ_j e^{−2πi k x_j / L}|²` for `k = k0..=k1` via per-point geometric
/// recurrences.
fn intensities_dual(points: &[f64], length: f64, k0: u64, k1: u64) -> Vec<f64> {
    let width = (k1 - k0 + 1) as usize;
    let mut acc = vec![Complex::new(0.0, 0.0); width];
    for &x in points {
        let frac = x / length;
        let step = Complex::from_polar(1.0, -2.0 * PI * frac);
        let start_phase = (k0 as f64 * frac).fract();
        let mut w = Complex::from_polar(1.0, -2.0 * PI * start_phase);
        for slot in acc.iter_mut() {
            *slot += w;
            w *= step;
        }
    }
    acc.iter().map(|c| c.norm_sqr()).collect()
}

/// Scattering intensity `ŝ(t) = mean over configurations of
/// |Σ_j e^{−itx_j}|² / n_points`, with its Monte Carlo standard error in
/// `trunc`. Normalized so that a Poisson process gives `ŝ ≡ 1`.
pub fn empirical_structure_factor(
    configs: &[PointConfiguration],
    ts: &[f64],
    options: EmpiricalOptions,
) -> Result<StructureFactorCurve> {
    let length = options.length;
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("window length must be positive, got {length}")));
    }
    if configs.is_empty() {
        return Err(Error::DegenerateEnsemble(0));
    }
    if ts.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    let ks: Vec<Option<u64>> = ts.iter().map(|&t| dual_grid_index(t, length)).collect();
    if !options.allow_off_grid {
        if let Some(i) = ks.iter().position(|k| k.is_none()) {
            return Err(Error::GridMismatch { t: ts[i], length });
        }
    }
    let all_dual = ks.iter().all(|k| k.is_some());
    let per_config: Vec<Result<Vec<f64>>> = configs
        .par_iter()
        .map(|c| {
            let pts = c.points();
            let lo = pts.partition_point(|&x| x < -0.5 * length);
            let hi = pts.partition_point(|&x| x < 0.5 * length);
            let window = &pts[lo..hi];
            if window.is_empty() {
                return Err(Error::WindowTooSmall("no points inside the estimation window".into()));
            }
            let raw = if all_dual {
                let k0 = ks.iter().flatten().min().copied().unwrap();
                let k1 = ks.iter().flatten().max().copied().unwrap();
                let all = intensities_dual(window, length, k0, k1);
                ks.iter().map(|k| all[(k.unwrap() - k0) as usize]).collect()
            } else {
                intensities_direct(window, ts)
            };
            let n = window.len() as f64;
            Ok(raw.into_iter().map(|v| v / n).collect())
        })
        .collect();
    let per_config: Vec<Vec<f64>> = per_config.into_iter().collect::<Result<_>>()?;

    let m = per_config.len() as f64;
    let mut s = vec![0.0; ts.len()];
    let mut se = vec![f64::NAN; ts.len()];
    for j in 0..ts.len() {
        let mean = per_config.iter().map(|v| v[j]).sum::<f64>() / m;
        s[j] = mean;
        if per_config.len() > 1 {
            let var = per_config.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            se[j] = (var / m).sqrt();
        }
    }
    let mut params = BTreeMap::new();
    params.insert("L".into(), length.to_string());
    params.insert("configurations".into(), configs.len().to_string());
    params.insert("allow_off_grid".into(), options.allow_off_grid.to_string());
    Ok(StructureFactorCurve {
        t: ts.to_vec(),
        s,
        method: SpectrumMethod::Empirical,
        trunc: se,
        params,
    })
}

/// Evaluate one of the three analytic routes on a grid.
pub fn theoretical_curve(h: HurstIndex, ts: &[f64], method: SpectrumMethod, tol: f64) -> Result<StructureFactorCurve> {
    let mut s = Vec::with_capacity(ts.len());
    let mut trunc = Vec::with_capacity(ts.len());
    for &t in ts {
        match method {
            SpectrumMethod::Sum => {
                let r = structure_factor_sum(h, t, tol)?;
                s.push(r.value);
                trunc.push(r.terms as f64);
            }
            SpectrumMethod::Continuum => {
                s.push(continuum_structure_factor(h, t, tol)?);
                trunc.push(tol);
            }
            SpectrumMethod::Asymptotic => {
                validate_t(t)?;
                s.push(asymptotic_structure_factor(h, t));
                trunc.push(0.0);
            }
            SpectrumMethod::Empirical => {
                return Err(Error::InvalidArgument("empirical curves need configurations".into()))
            }
        }
    }
    let mut params = BTreeMap::new();
    params.insert("h".into(), h.value().to_string());
    params.insert("tol".into(), tol.to_string());
    Ok(StructureFactorCurve {
        t: ts.to_vec(),
        s,
        method,
        trunc,
        params,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub t: f64,
    pub sum: f64,
    pub continuum: f64,
    pub gap: f64,
}

/// `s_sum(t) − s_continuum(t)` on a grid.
pub fn approximation_gap(h: HurstIndex, ts: &[f64], tol: f64) -> Result<Vec<GapRow>> {
    ts.iter()
        .map(|&t| {
            let sum = structure_factor_sum(h, t, tol)?.value;
            let continuum = continuum_structure_factor(h, t, tol)?;
            Ok(GapRow {
                t,
                sum,
                continuum,
                gap: sum - continuum,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn asymptotic_constant_values() {
        assert_relative_eq!(asymptotic_constant(h(0.5)), 1.0, epsilon = 1e-14);
        assert_relative_eq!(asymptotic_constant(h(0.25)), 0.626_657_068_657_750_1, epsilon = 1e-12);
        for i in 1..100 {
            assert!(asymptotic_constant(h(i as f64 / 100.0)) > 0.0);
        }
    }

    #[test]
    fn brownian_sum_matches_closed_form() {
        let r = structure_factor_sum(h(0.5), 1.0, 1e-13).unwrap();
        assert!((r.value - brownian_closed_form(1.0)).abs() < 1e-10);
    }

    #[test]
    fn sum_is_even() {
        let a = structure_factor_sum(h(0.3), 0.7, 1e-12).unwrap();
        let b = structure_factor_sum(h(0.3), -0.7, 1e-12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sum_against_brute_force() {
        let hv = h(0.25);
        let t = PI;
        let r = structure_factor_sum(hv, t, 1e-12).unwrap();
        // straightforward loop, ten times the adaptive cutoff
        let n = 10 * r.terms;
        let mut brute = 1.0;
        for k in 1..=n {
            let kf = k as f64;
            brute += 2.0 * (-0.5 * kf.sqrt() * t * t).exp() * (kf * t).cos();
        }
        assert!((r.value - brute).abs() < 1e-8, "{} vs {}", r.value, brute);
    }

    #[test]
    fn truncation_cap_is_enforced() {
        let r = structure_factor_sum_capped(h(0.1), 0.01, 1e-9, 1000);
        assert!(matches!(r, Err(Error::TruncationTooLarge { .. })));
        assert!(structure_factor_sum(h(0.3), 0.0, 1e-9).is_err());
    }

    #[test]
    fn tail_bound_dominates_actual_tail() {
        let hv = h(0.4);
        let t = 0.5;
        let n = 200;
        let a = 0.5 * t * t;
        let actual: f64 = (n + 1..200_000u64).map(|k| 2.0 * (-a * (k as f64).powf(0.8)).exp()).sum();
        let bound = tail_bound(hv, t, n);
        assert!(bound >= actual && bound < 1.2 * actual + 1e-300, "{bound} vs {actual}");
    }

    #[test]
    fn continuum_brownian_closed_form() {
        for &t in &[0.1, 0.5, 1.0, 2.0, 3.0] {
            let v = continuum_structure_factor(h(0.5), t, 1e-12).unwrap();
            assert_relative_eq!(v, 1.0 / (1.0 + t * t / 4.0), epsilon = 1e-10);
        }
    }

    #[test]
    fn continuum_routes_agree() {
        for &hv in &[0.2, 0.25, 0.5, 0.6, 0.75, 0.9] {
            for &t in &[0.5, 1.0, 2.5] {
                let rotated = continuum_structure_factor(h(hv), t, 1e-11).unwrap();
                let oscillatory = continuum_structure_factor_oscillatory(h(hv), t, 1e-11).unwrap();
                assert!(
                    (rotated - oscillatory).abs() < 1e-8,
                    "h={hv} t={t}: {rotated} vs {oscillatory}"
                );
            }
        }
    }

    #[test]
    fn continuum_is_positive() {
        for &hv in &[0.05, 0.2, 0.45, 0.55, 0.8, 0.95] {
            for &t in &[1e-3, 0.01, 0.3, 1.0, 3.0, 6.0] {
                assert!(continuum_structure_factor(h(hv), t, 1e-10).unwrap() > 0.0, "h={hv} t={t}");
            }
        }
    }

    #[test]
    fn dual_grid_membership() {
        let l = 2048.0;
        let g = dual_grid(l, 0.5, 3.0);
        assert!(g.iter().all(|&t| dual_grid_index(t, l).is_some()));
        assert!(g[0] >= 0.5 && *g.last().unwrap() <= 3.0);
        assert_eq!(dual_grid_index(0.5001, l), None);
        assert_eq!(dual_grid_index(2.0 * PI / l * 7.0, l), Some(7));
    }

    #[test]
    fn dual_recurrence_matches_direct() {
        let pts: Vec<f64> = (0..200).map(|i| -100.0 + i as f64 * 0.97 + (i as f64).sin()).collect();
        let l = 200.0;
        let fast = intensities_dual(&pts, l, 5, 400);
        let ts: Vec<f64> = (5..=400).map(|k| 2.0 * PI * k as f64 / l).collect();
        let slow = intensities_direct(&pts, &ts);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b), "{a} vs {b}");
        }
    }

    #[test]
    fn empirical_refuses_off_grid() {
        let c = vec![PointConfiguration::lattice(64)];
        let opts = EmpiricalOptions { length: 64.0, allow_off_grid: false };
        assert!(matches!(
            empirical_structure_factor(&c, &[0.3], opts),
            Err(Error::GridMismatch { .. })
        ));
        let opts = EmpiricalOptions { length: 64.0, allow_off_grid: true };
        assert!(empirical_structure_factor(&c, &[0.3], opts).is_ok());
    }

    #[test]
    fn lattice_has_bragg_peaks_only() {
        let n = 512usize;
        let l = n as f64;
        let c = vec![PointConfiguration::lattice(n)];
        let opts = EmpiricalOptions { length: l, allow_off_grid: false };
        let mut ts = dual_grid(l, 0.1, 6.2);
        ts.push(2.0 * PI);
        let curve = empirical_structure_factor(&c, &ts, opts).unwrap();
        let (peak, rest) = curve.s.split_last().unwrap();
        assert!(rest.iter().all(|&v| v < 1e-18), "{:?}", rest.iter().cloned().fold(0.0, f64::max));
        assert_relative_eq!(*peak, l, max_relative = 1e-9);
    }

    #[test]
    fn gap_brownian_matches_closed_forms() {
        let rows = approximation_gap(h(0.5), &[0.2, 1.0, 2.0], 1e-12).unwrap();
        for r in rows {
            let expected = brownian_closed_form(r.t) - 1.0 / (1.0 + r.t * r.t / 4.0);
            assert!((r.gap - expected).abs() < 1e-8);
        }
    }
}
