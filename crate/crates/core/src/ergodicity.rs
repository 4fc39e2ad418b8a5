//! Variogram, the mixing functional `V_{a,b}` and Lévy-measure scaling of
//! the fBm variogram (scalar case).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fgn::{DenseFbm, FbmMode, HurstIndex, LatticeFbm};
use crate::quad::{integrate, integrate_cosine_tail, Tolerance};
use crate::rng::StreamKey;

/// `v(t) = Var B_t = |t|^{2h}`.
pub fn variogram(h: HurstIndex, t: f64) -> f64 {
    t.abs().powf(h.two_h())
}

/// `v(t + d) − v(t)` for `t > 0`, `t + d > 0`, without cancellation.
fn variogram_step(p: f64, t: f64, d: f64) -> f64 {
    t.powf(p) * (p * (d / t).ln_1p()).exp_m1()
}

/// `V_{a,b}(t) = v(t+a) + v(t+b) − v(t+a+b) − v(t)`.
pub fn mixing_covariance(h: HurstIndex, a: f64, b: f64, t: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = h.two_h();
    let far = t > 0.0 && t + a > 0.0 && t + b > 0.0 && t + a + b > 0.0 && t > 4.0 * (a.abs() + b.abs());
    if far {
        variogram_step(p, t, a) + variogram_step(p, t, b) - variogram_step(p, t, a + b)
    } else {
        variogram(h, t + a) + variogram(h, t + b) - variogram(h, t + a + b) - variogram(h, t)
    }
}

/// `Cov(B_{−a}, B_{t+b} − B_t)` for the fBm with `B_0 = 0`; equals
/// `½ V_{a,b}(t)`.
pub fn cross_increment_covariance(h: HurstIndex, a: f64, b: f64, t: f64) -> f64 {
    0.5 * mixing_covariance(h, a, b, t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingCurve {
    pub h: HurstIndex,
    pub a: f64,
    pub b: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl MixingCurve {
    pub fn new(h: HurstIndex, a: f64, b: f64, t: &[f64]) -> Self {
        Self {
            h,
            a,
            b,
            t: t.to_vec(),
            v: t.iter().map(|&s| mixing_covariance(h, a, b, s)).collect(),
        }
    }

    pub fn params(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("h".into(), self.h.value().to_string());
        m.insert("a".into(), self.a.to_string());
        m.insert("b".into(), self.b.to_string());
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingVerdict {
    pub curve: MixingCurve,
    pub mixing: bool,
}

/// Smallest grid end accepted by [`mixing_decay_check`].
pub const MIN_DECAY_TMAX: f64 = 1e3;

/// Verdict: `|V|` is non-increasing over the upper half of the grid and
/// `|V(t_max)| < 10⁻³ |V(t_min)|`. An identically zero curve passes.
pub fn mixing_decay_check(h: HurstIndex, a: f64, b: f64, t: &[f64]) -> Result<MixingVerdict> {
    if t.len() < 2 || t.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("t grid must be strictly increasing with at least two points".into()));
    }
    let tmax = *t.last().unwrap();
    if tmax < MIN_DECAY_TMAX {
        return Err(Error::InvalidArgument(format!(
            "t grid must reach at least {MIN_DECAY_TMAX}, got {tmax}"
        )));
    }
    let curve = MixingCurve::new(h, a, b, t);
    let abs: Vec<f64> = curve.v.iter().map(|v| v.abs()).collect();
    let mixing = if abs.iter().all(|&v| v == 0.0) {
        true
    } else {
        let upper = &abs[abs.len() / 2..];
        let monotone = upper.windows(2).all(|w| w[1] <= w[0]);
        monotone && abs[abs.len() - 1] < 1e-3 * abs[0]
    };
    Ok(MixingVerdict { curve, mixing })
}

/// Geometric grid `n` points from `tmin` to `tmax`.
pub fn geometric_grid(tmin: f64, tmax: f64, n: usize) -> Vec<f64> {
    crate::stats::log_spaced(tmin, tmax, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

fn sample_covariance(pairs: &[(f64, f64)]) -> McEstimate {
    let m = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let prods: Vec<f64> = pairs.iter().map(|&(x, y)| (x - mx) * (y - my)).collect();
    let estimate = prods.iter().sum::<f64>() / (m - 1.0);
    let mean = prods.iter().sum::<f64>() / m;
    let var = prods.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (m - 1.0);
    McEstimate {
        estimate,
        stderr: (var / m).sqrt(),
    }
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0 && x.abs() < 1e15
}

/// Sample covariance of `(B_{−a}, B_{t+b} − B_t)` over `M` independent
/// two-sided fBm paths. Its target is [`cross_increment_covariance`].
///
/// Integer arguments use the circulant lattice sampler (two paths per FFT);
/// others use the dense sampler on the four points involved.
pub fn mc_mixing_covariance(h: HurstIndex, a: f64, b: f64, t: f64, m: usize, key: StreamKey) -> Result<McEstimate> {
    if m < 2 {
        return Err(Error::DegenerateEnsemble(m));
    }
    if ![a, b, t].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidArgument("a, b, t must be finite".into()));
    }
    let pairs: Vec<(f64, f64)> = if is_integer(a) && is_integer(b) && is_integer(t) {
        let (sa, s0, s1) = (-a as i64, t as i64, (t + b) as i64);
        let reach = sa.abs().max(s0.abs()).max(s1.abs()).max(1) as usize;
        let sampler = LatticeFbm::new(h, reach, FbmMode::TwoSided)?;
        let mut v: Vec<(f64, f64)> = (0..m.div_ceil(2) as u64)
            .into_par_iter()
            .flat_map_iter(|j| {
                let (p, q) = sampler.sample_pair(key.child(j));
                [p, q].map(|path| (path.at(sa), path.at(s1) - path.at(s0)))
            })
            .collect();
        v.truncate(m);
        v
    } else {
        let mut pts = vec![0.0, -a, t, t + b];
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let dense = DenseFbm::new(h, &pts)?;
        let idx = |x: f64| pts.iter().position(|&p| p == x).unwrap();
        let (ia, i0, i1) = (idx(-a), idx(t), idx(t + b));
        (0..m as u64)
            .into_par_iter()
            .map(|j| {
                let v = dense.sample(key.child(j));
                (v[ia], v[i1] - v[i0])
            })
            .collect()
    };
    Ok(sample_covariance(&pairs))
}

/// `I(t) = ∫_ℝ |1 − e^{itx}|² |x|^{−1−2h} dx` by quadrature.
///
/// `[0, 1]` is mapped through `x = y^{1/(2−2h)}`, which makes the integrand
/// bounded at the origin; `[1, ∞)` is `1/h` minus a cosine tail.
pub fn levy_integral(h: HurstIndex, t: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let p = h.two_h();
    let q = 2.0 - p;
    let inner = move |y: f64| {
        let x = y.powf(1.0 / q);
        let s = (0.5 * t * x).sin();
        4.0 * s * s * x.powf(-p) / (q * y)
    };
    let near = integrate(inner, 0.0, 1.0, Tolerance::new(0.1 * tol, 1e-14))?;
    let tail = integrate_cosine_tail(move |x: f64| x.powf(-1.0 - p), t, 1.0, 0.1 * tol, 1_000_000)?;
    Ok(2.0 * (near + 1.0 / h.value() - 2.0 * tail))
}

/// Closed form of [`levy_integral`]: `4 t^{2h} Γ(1−2h) cos(πh) / (2h)`,
/// with the limit `2πt` at `h = 1/2`.
pub fn levy_integral_closed_form(h: HurstIndex, t: f64) -> f64 {
    let p = h.two_h();
    let c = if (h.value() - 0.5).abs() < 1e-12 {
        PI / 2.0
    } else {
        gamma(1.0 - p) * (PI * h.value()).cos()
    };
    4.0 * t.powf(p) * c / p
}

/// `|I(t₁)/t₁^{2h} − I(t₂)/t₂^{2h}| / (I(t₁)/t₁^{2h})`.
pub fn levy_scaling_check(h: HurstIndex, t1: f64, t2: f64, tol: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 > 0.0) || t1 == t2 {
        return Err(Error::InvalidArgument(format!("need distinct positive t1, t2, got {t1}, {t2}")));
    }
    let p = h.two_h();
    let r1 = levy_integral(h, t1, tol)? / t1.powf(p);
    let r2 = levy_integral(h, t2, tol)? / t2.powf(p);
    Ok((r1 - r2).abs() / r1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn variogram_examples() {
        assert_eq!(variogram(h(0.3), 0.0), 0.0);
        assert_relative_eq!(variogram(h(0.5), 4.0), 4.0, epsilon = 1e-14);
        assert_relative_eq!(variogram(h(0.25), 16.0), 4.0, epsilon = 1e-14);
        assert_relative_eq!(variogram(h(0.7), -3.0), variogram(h(0.7), 3.0));
    }

    #[test]
    fn mixing_examples() {
        assert_eq!(mixing_covariance(h(0.3), 0.0, 2.0, 5.0), 0.0);
        assert!(mixing_covariance(h(0.5), 1.0, 1.0, 10.0).abs() < 1e-13);
        // V_{1,1}(t) ≈ −v''(t) = −2h(2h−1) t^{2h−2}
        let v = mixing_covariance(h(0.25), 1.0, 1.0, 100.0);
        assert!((v / 2.5e-4 - 1.0).abs() < 0.05, "{v}");
        assert_relative_eq!(mixing_covariance(h(0.25), 1.0, 1.0, 0.0), 2.0 - 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn stable_form_matches_direct_form() {
        let hv = h(0.35);
        for &t in &[20.0, 50.0, 300.0] {
            let direct = variogram(hv, t + 1.5) + variogram(hv, t + 2.0) - variogram(hv, t + 3.5) - variogram(hv, t);
            assert_relative_eq!(mixing_covariance(hv, 1.5, 2.0, t), direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn far_field_taylor_limit() {
        for &hv in &[0.25, 0.75] {
            let p = 2.0 * hv;
            let scaled = mixing_covariance(h(hv), 1.0, 1.0, 1e4).abs() * 1e4f64.powf(2.0 - p);
            assert!((scaled / (p * (p - 1.0)).abs() - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn decay_verdicts() {
        let grid = geometric_grid(1.0, 1e3, 200);
        assert!(mixing_decay_check(h(0.25), 1.0, 1.0, &grid).unwrap().mixing);
        assert!(mixing_decay_check(h(0.6), 0.0, 1.0, &grid).unwrap().mixing);
        // t^{-1/2} decay needs six decades
        assert!(!mixing_decay_check(h(0.75), 1.0, 1.0, &grid).unwrap().mixing);
        let long = geometric_grid(1.0, 1e7, 300);
        assert!(mixing_decay_check(h(0.75), 1.0, 1.0, &long).unwrap().mixing);
        assert!(mixing_decay_check(h(0.25), 1.0, 1.0, &[1.0, 10.0]).is_err());
    }

    #[test]
    fn mc_brownian_increments_uncorrelated() {
        let r = mc_mixing_covariance(h(0.5), 1.0, 1.0, 10.0, 20_000, StreamKey::root(3)).unwrap();
        assert!(r.estimate.abs() < 5.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn mc_dense_path_matches_formula() {
        let hv = h(0.3);
        let r = mc_mixing_covariance(hv, 0.5, 1.25, 2.5, 20_000, StreamKey::root(4)).unwrap();
        let target = cross_increment_covariance(hv, 0.5, 1.25, 2.5);
        assert!((r.estimate - target).abs() < 5.0 * r.stderr, "{r:?} vs {target}");
    }

    #[test]
    fn levy_brownian_value() {
        let v = levy_integral(h(0.5), 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, 2.0 * PI, max_relative = 1e-8);
    }

    #[test]
    fn levy_against_closed_form() {
        for &hv in &[0.1, 0.25, 0.6, 0.85] {
            for &t in &[0.5, 1.0, 3.0] {
                let v = levy_integral(h(hv), t, 1e-10).unwrap();
                assert_relative_eq!(v, levy_integral_closed_form(h(hv), t), max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn levy_scaling_is_symmetric_and_small() {
        let d = levy_scaling_check(h(0.25), 1.0, 2.0, 1e-10).unwrap();
        assert!(d < 1e-6, "{d}");
        let e = levy_scaling_check(h(0.25), 2.0, 1.0, 1e-10).unwrap();
        assert!((d - e).abs() < 1e-8);
        assert!(levy_scaling_check(h(0.25), 1.0, 1.0, 1e-10).is_err());
    }
}
