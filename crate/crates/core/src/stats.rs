//! Number-variance scans and power-law fits.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::{FbmMode, HurstIndex};
use crate::pointproc::{count_closed, draw_shift, ConfigKind, PalmLatticeSampler, PointConfiguration};
use crate::rng::StreamKey;

const TAG_REALIZATION: u64 = 0x5245_414C;
const TAG_BOOTSTRAP: u64 = 0x424F_4F54;
const TAG_SWEEP: u64 = 0x5357_4545_50;

pub const DEFAULT_RADII: usize = 24;
pub const DEFAULT_BOOTSTRAP: usize = 200;

/// Points of `config` with `|x| ≤ r`. Requires `r ≤ extent/2`.
pub fn count_in_ball(config: &PointConfiguration, r: f64) -> Result<usize> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if r > config.extent() / 2.0 {
        return Err(Error::WindowTooSmall(format!(
            "radius {r} exceeds half the extent {}",
            config.extent()
        )));
    }
    Ok(config.count_closed(-r, r))
}

/// `n` log-spaced radii from `rmin` to `rmax` inclusive.
pub fn log_spaced(rmin: f64, rmax: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![rmin],
        _ => {
            let (a, b) = (rmin.ln(), rmax.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        rmin
                    } else if i == n - 1 {
                        rmax
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialVarianceTable {
    pub radii: Vec<f64>,
    pub mean_count: Vec<f64>,
    pub var_count: Vec<f64>,
    pub var_stderr: Vec<f64>,
    pub realizations: usize,
    /// Run parameters (`h`, `N`, `seed`, `mode`, ...), written as CSV metadata.
    pub params: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// The JSON shape written next to a variance table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl From<&RegressionFit> for RegressionSummary {
    fn from(f: &RegressionFit) -> Self {
        Self {
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
            n_points: f.residuals.len(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScanParams {
    pub hurst: HurstIndex,
    /// Lattice half-window `N`; the configuration has `2N + 1` points.
    pub half_window: usize,
    pub radii: Vec<f64>,
    pub realizations: usize,
    pub mode: ConfigKind,
    /// Uniform shift half-width for stationarized mode; defaults to `N/4`.
    pub shift_halfwidth: Option<f64>,
    pub bootstrap: usize,
    pub fbm_mode: FbmMode,
}

impl ScanParams {
    /// Defaults for everything except `h`, `N`, and `M`.
    pub fn new(hurst: HurstIndex, half_window: usize, realizations: usize) -> Self {
        let sites = 2 * half_window;
        Self {
            hurst,
            half_window,
            radii: log_spaced(16.0, sites as f64 / 16.0, DEFAULT_RADII),
            realizations,
            mode: ConfigKind::Palm,
            shift_halfwidth: None,
            bootstrap: DEFAULT_BOOTSTRAP,
            fbm_mode: FbmMode::TwoSided,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.realizations < 2 {
            return Err(Error::DegenerateEnsemble(self.realizations));
        }
        if self.radii.is_empty() {
            return Err(Error::InvalidArgument("radius grid is empty".into()));
        }
        if self.radii.iter().any(|&r| !(r > 0.0)) || self.radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("radii must be positive and strictly ascending".into()));
        }
        let rmax = *self.radii.last().unwrap();
        if rmax > self.half_window as f64 / 2.0 {
            return Err(Error::WindowTooSmall(format!(
                "largest radius {rmax} exceeds N/2 = {}",
                self.half_window as f64 / 2.0
            )));
        }
        if self.mode == ConfigKind::Stationarized && self.shift() + rmax > 0.9 * self.half_window as f64 {
            return Err(Error::WindowTooSmall(format!(
                "shift {} plus radius {rmax} reaches the lattice edge",
                self.shift()
            )));
        }
        Ok(())
    }

    fn shift(&self) -> f64 {
        self.shift_halfwidth.unwrap_or(self.half_window as f64 / 4.0)
    }

    fn metadata(&self, key: StreamKey) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("h".into(), self.hurst.value().to_string());
        m.insert("N".into(), self.half_window.to_string());
        m.insert("seed".into(), key.master_seed.to_string());
        m.insert("stream".into(), key.stream_index.to_string());
        m.insert("mode".into(), self.mode.to_string());
        m.insert("fbm_mode".into(), self.fbm_mode.to_string());
        m.insert("realizations".into(), self.realizations.to_string());
        m.insert("bootstrap".into(), self.bootstrap.to_string());
        if self.mode == ConfigKind::Stationarized {
            m.insert("shift_halfwidth".into(), self.shift().to_string());
        }
        m
    }
}

/// Per-realization counts for every radius (`counts[i][j]` = realization `i`,
/// radius `j`).
#[derive(Clone, Debug, PartialEq)]
pub struct CountEnsemble {
    pub radii: Vec<f64>,
    pub counts: Vec<Vec<u32>>,
}

fn counts_for(points: &mut [f64], shift: f64, radii: &[f64]) -> Vec<u32> {
    if shift != 0.0 {
        for x in points.iter_mut() {
            *x += shift;
        }
    }
    points.sort_unstable_by(f64::total_cmp);
    radii.iter().map(|&r| count_closed(points, -r, r) as u32).collect()
}

/// Simulates `M` independent configurations and counts points in every ball.
///
/// Realizations are generated in pairs from one FFT each (real and imaginary
/// outputs of the embedding); realization `2j` and `2j+1` share the stream of
/// pair `j`. The result does not depend on the number of worker threads.
pub fn simulate_counts(params: &ScanParams, key: StreamKey) -> Result<CountEnsemble> {
    params.validate()?;
    let sampler = PalmLatticeSampler::new(params.hurst, params.half_window, params.fbm_mode)?;
    let m = params.realizations;
    let pairs = m.div_ceil(2) as u64;
    let shift = params.shift();
    let stationarized = params.mode == ConfigKind::Stationarized;
    let radii = &params.radii;

    let counts: Vec<Vec<u32>> = (0..pairs)
        .into_par_iter()
        .flat_map_iter(|j| {
            let k = key.child(TAG_REALIZATION).child(j);
            let (mut a, mut b) = sampler.positions_pair(k);
            let (ua, ub) = if stationarized {
                (draw_shift(shift, k.child(0)), draw_shift(shift, k.child(1)))
            } else {
                (0.0, 0.0)
            };
            [counts_for(&mut a, ua, radii), counts_for(&mut b, ub, radii)]
        })
        .collect();
    let mut counts = counts;
    counts.truncate(m);
    Ok(CountEnsemble {
        radii: radii.clone(),
        counts,
    })
}

fn column_moments(counts: &[Vec<u32>], idx: impl Iterator<Item = usize> + Clone, j: usize) -> (f64, f64) {
    let mut n = 0.0;
    let mut sum = 0.0;
    for i in idx.clone() {
        sum += counts[i][j] as f64;
        n += 1.0;
    }
    let mean = sum / n;
    let ss: f64 = idx.map(|i| (counts[i][j] as f64 - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

impl CountEnsemble {
    pub fn realizations(&self) -> usize {
        self.counts.len()
    }

    /// Per-radius sample means and unbiased variances.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.counts.len();
        (0..self.radii.len())
            .map(|j| column_moments(&self.counts, 0..m, j))
            .unzip()
    }

    fn resample(&self, rng: &mut impl Rng) -> Vec<usize> {
        let m = self.counts.len();
        (0..m).map(|_| rng.random_range(0..m)).collect()
    }

    /// Nonparametric bootstrap standard error of each radius' variance.
    pub fn bootstrap_variance_stderr(&self, resamples: usize, key: StreamKey) -> Vec<f64> {
        let nr = self.radii.len();
        if resamples < 2 {
            return vec![f64::NAN; nr];
        }
        let mut rng = key.child(TAG_BOOTSTRAP).rng();
        let mut acc = vec![Vec::with_capacity(resamples); nr];
        for _ in 0..resamples {
            let idx = self.resample(&mut rng);
            for (j, col) in acc.iter_mut().enumerate() {
                col.push(column_moments(&self.counts, idx.iter().copied(), j).1);
            }
        }
        acc.iter().map(|v| sample_std(v)).collect()
    }

    /// Bootstrap standard error of the fitted log-log slope.
    pub fn bootstrap_slope_stderr(&self, resamples: usize, key: StreamKey) -> Result<f64> {
        let mut rng = key.child(TAG_BOOTSTRAP).child(1).rng();
        let xs: Vec<f64> = self.radii.iter().map(|r| r.ln()).collect();
        let mut slopes = Vec::with_capacity(resamples);
        for _ in 0..resamples {
            let idx = self.resample(&mut rng);
            let ys: Vec<f64> = (0..self.radii.len())
                .map(|j| column_moments(&self.counts, idx.iter().copied(), j).1.ln())
                .collect();
            if ys.iter().all(|y| y.is_finite()) {
                slopes.push(fit_line(&xs, &ys, None).slope);
            }
        }
        if slopes.len() < 2 {
            return Err(Error::InsufficientData(slopes.len()));
        }
        Ok(sample_std(&slopes))
    }

    pub fn table(&self, params: &ScanParams, key: StreamKey) -> RadialVarianceTable {
        let (mean_count, var_count) = self.moments();
        let var_stderr = self.bootstrap_variance_stderr(params.bootstrap, key);
        RadialVarianceTable {
            radii: self.radii.clone(),
            mean_count,
            var_count,
            var_stderr,
            realizations: self.counts.len(),
            params: params.metadata(key),
        }
    }
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Monte Carlo `Var[count in [−r, r]]` over a radius grid.
pub fn number_variance_scan(params: &ScanParams, key: StreamKey) -> Result<RadialVarianceTable> {
    Ok(simulate_counts(params, key)?.table(params, key))
}

/// Least-squares line through `(x, y)`, optionally weighted.
pub fn fit_line(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> RegressionFit {
    let n = xs.len();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    let mx = (0..n).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (xs[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w(i) * (xs[i] - mx) * (ys[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = (0..n).map(|i| ys[i] - (intercept + slope * xs[i])).collect();
    let ss_res: f64 = (0..n).map(|i| w(i) * residuals[i].powi(2)).sum();
    let ss_tot: f64 = (0..n).map(|i| w(i) * (ys[i] - my).powi(2)).sum();
    let scale = ys.iter().fold(0.0f64, |a, y| a.max(y.abs())).max(1.0);
    let r_squared = if ss_tot <= (1e-14 * scale).powi(2) * n as f64 {
        // flat data: a perfect fit explains everything there is
        if ss_res <= (1e-12 * scale).powi(2) * n as f64 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    RegressionFit {
        slope,
        intercept,
        r_squared,
        residuals,
    }
}

fn loglog_points(table: &RadialVarianceTable) -> Result<(Vec<f64>, Vec<f64>)> {
    if table.radii.len() < 3 {
        return Err(Error::InsufficientData(table.radii.len()));
    }
    if let Some((r, v)) = table
        .radii
        .iter()
        .zip(&table.var_count)
        .find(|(_, &v)| !(v > 0.0))
    {
        return Err(Error::NonpositiveVariance {
            radius: *r,
            variance: *v,
        });
    }
    Ok((
        table.radii.iter().map(|r| r.ln()).collect(),
        table.var_count.iter().map(|v| v.ln()).collect(),
    ))
}

/// Unweighted OLS of `ln Var` on `ln r`; the slope is the variance exponent.
pub fn loglog_regress(table: &RadialVarianceTable) -> Result<RegressionFit> {
    let (xs, ys) = loglog_points(table)?;
    Ok(fit_line(&xs, &ys, None))
}

/// Weighted variant: each point weighted by `(Var / stderr)²`, the inverse
/// delta-method variance of `ln Var`.
pub fn loglog_regress_weighted(table: &RadialVarianceTable) -> Result<RegressionFit> {
    let (xs, ys) = loglog_points(table)?;
    let w: Vec<f64> = table
        .var_count
        .iter()
        .zip(&table.var_stderr)
        .map(|(v, s)| if *s > 0.0 && s.is_finite() { (v / s).powi(2) } else { 1.0 })
        .collect();
    Ok(fit_line(&xs, &ys, Some(&w)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: f64,
    pub slope: f64,
    pub slope_stderr: f64,
}

/// One fitted exponent per Hurst index. `template.hurst` is ignored.
pub fn exponent_sweep(hs: &[HurstIndex], template: &ScanParams, key: StreamKey) -> Result<Vec<SweepPoint>> {
    hs.iter()
        .enumerate()
        .map(|(i, &h)| {
            let params = ScanParams {
                hurst: h,
                ..template.clone()
            };
            let k = key.child(TAG_SWEEP).child(i as u64);
            let ens = simulate_counts(&params, k)?;
            let (_, var) = ens.moments();
            let table = RadialVarianceTable {
                radii: ens.radii.clone(),
                mean_count: vec![0.0; var.len()],
                var_count: var,
                var_stderr: vec![0.0; ens.radii.len()],
                realizations: ens.realizations(),
                params: BTreeMap::new(),
            };
            let fit = loglog_regress(&table)?;
            Ok(SweepPoint {
                h: h.value(),
                slope: fit.slope,
                slope_stderr: ens.bootstrap_slope_stderr(params.bootstrap, k)?,
            })
        })
        .collect()
}
