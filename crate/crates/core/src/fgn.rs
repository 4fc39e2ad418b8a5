//! Exact sampling of fractional Gaussian noise and fractional Brownian motion.
//!
//! Lattice paths use circulant embedding of the fGn covariance (Davies–Harte):
//! one complex FFT of length `2n` per pair of independent paths. Paths on
//! arbitrary finite point sets fall back to a dense Cholesky factorization.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Relative threshold below which negative circulant eigenvalues are clamped.
pub const EIGEN_TOLERANCE: f64 = 1e-10;
/// Diagonal jitter of the dense sampler, relative to the mean variance.
pub const CHOLESKY_JITTER: f64 = 1e-12;
/// Largest point set accepted by [`sample_fbm_points`].
pub const DENSE_LIMIT: usize = 4096;

/// Hurst index `h`, strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidHurst(h))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `2h`, the variogram exponent.
    pub fn two_h(self) -> f64 {
        2.0 * self.0
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;

    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

impl std::fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Autocovariance of unit-lag fGn: `½(|k+1|^{2h} − 2|k|^{2h} + |k−1|^{2h})`.
pub fn fgn_autocovariance(h: HurstIndex, k: i64) -> f64 {
    let k = k.unsigned_abs();
    if k == 0 {
        return 1.0;
    }
    let p = h.two_h();
    let kf = k as f64;
    if k == 1 || h.value() == 0.5 {
        return 0.5 * ((kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p));
    }
    // second difference of x^p at large k cancels badly in the direct form
    let inv = 1.0 / kf;
    0.5 * kf.powf(p) * ((p * inv.ln_1p()).exp_m1() + (p * (-inv).ln_1p()).exp_m1())
}

/// The fGn covariance of lags `0..n` as a table.
#[derive(Clone, Debug)]
pub struct FgnCovariance {
    pub hurst: HurstIndex,
    pub gamma: Vec<f64>,
}

impl FgnCovariance {
    pub fn new(hurst: HurstIndex, max_lag: usize) -> Self {
        let gamma = (0..=max_lag as i64).map(|k| fgn_autocovariance(hurst, k)).collect();
        Self { hurst, gamma }
    }

    pub fn at(&self, k: i64) -> f64 {
        self.gamma[k.unsigned_abs() as usize]
    }
}

fn circulant_row(h: HurstIndex, n: usize) -> Vec<Complex<f64>> {
    let cov = FgnCovariance::new(h, n);
    let m = 2 * n;
    (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(cov.gamma[lag], 0.0)
        })
        .collect()
}

/// Eigenvalues of the circulant embedding of the fGn covariance of size `2n`.
///
/// Values in `[-τ, 0)` with `τ = 1e-10 · max` are clamped to zero; anything
/// more negative is reported as [`Error::NegativeEigenvalue`].
pub fn circulant_eigenvalues(h: HurstIndex, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("embedding needs n >= 2, got {n}")));
    }
    let mut row = circulant_row(h, n);
    let fft = FftPlanner::new().plan_fft_forward(row.len());
    fft.process(&mut row);
    let mut eig: Vec<f64> = row.iter().map(|c| c.re).collect();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let tolerance = EIGEN_TOLERANCE * max.abs();
    if min < -tolerance {
        return Err(Error::NegativeEigenvalue { min, tolerance });
    }
    for e in &mut eig {
        if *e < 0.0 {
            *e = 0.0;
        }
    }
    Ok(eig)
}

/// Reusable circulant-embedding sampler for `n` consecutive fGn increments.
///
/// The spectral square roots and the FFT plan are computed once. Each call
/// draws `4n` standard normals from the key's stream (real and imaginary parts
/// interleaved) and transforms them; the real and imaginary halves of the
/// output are two independent exact fGn samples.
#[derive(Clone)]
pub struct CirculantFgn {
    hurst: HurstIndex,
    n: usize,
    amplitude: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantFgn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantFgn")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .finish()
    }
}

impl CirculantFgn {
    pub fn new(hurst: HurstIndex, n: usize) -> Result<Self> {
        let eig = circulant_eigenvalues(hurst, n)?;
        let m = eig.len() as f64;
        let amplitude = eig.iter().map(|&l| (l / m).sqrt()).collect();
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        Ok(Self {
            hurst,
            n,
            amplitude,
            fft,
        })
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Two independent fGn vectors (real part, imaginary part) from one key.
    pub fn sample_pair(&self, key: StreamKey) -> (Vec<f64>, Vec<f64>) {
        let mut rng = key.rng();
        let mut buf: Vec<Complex<f64>> = self
            .amplitude
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(a * re, a * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.n);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// One fGn vector: the real half of [`sample_pair`](Self::sample_pair).
    pub fn sample(&self, key: StreamKey) -> Vec<f64> {
        self.sample_pair(key).0
    }
}

/// Exact fGn sample of length `n` (covariance `γ(|i−j|)`).
pub fn sample_fgn(h: HurstIndex, n: usize, key: StreamKey) -> Result<Vec<f64>> {
    Ok(CirculantFgn::new(h, n)?.sample(key))
}

/// How a two-sided lattice path is assembled from fGn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FbmMode {
    /// One fGn stream of length `2N`, cumulated and re-based at the centre.
    /// Exact joint law of the fBm on `[−N, N]`.
    #[default]
    TwoSided,
    /// Two independent one-sided branches glued at the origin. Each half-line
    /// has the fBm law; the correlation across the origin is dropped.
    IndependentBranches,
}

impl std::str::FromStr for FbmMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Self::TwoSided),
            "independent" | "independent-branches" => Ok(Self::IndependentBranches),
            other => Err(Error::InvalidArgument(format!("unknown fBm mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for FbmMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TwoSided => "two-sided",
            Self::IndependentBranches => "independent",
        })
    }
}

/// fBm values `B_n` for `n ∈ [−N, N]`, with `B_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FbmPath {
    pub half_window: usize,
    pub values: Vec<f64>,
    pub hurst: HurstIndex,
    pub key: StreamKey,
}

impl FbmPath {
    /// `B_n` at lattice site `n`.
    pub fn at(&self, site: i64) -> f64 {
        self.values[(site + self.half_window as i64) as usize]
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let n = self.half_window as i64;
        self.values.iter().enumerate().map(move |(i, &b)| (i as i64 - n, b))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Cached sampler for lattice fBm paths on `[−N, N]`.
#[derive(Clone, Debug)]
pub struct LatticeFbm {
    half_window: usize,
    mode: FbmMode,
    fgn: CirculantFgn,
}

impl LatticeFbm {
    pub fn new(hurst: HurstIndex, half_window: usize, mode: FbmMode) -> Result<Self> {
        if half_window < 1 {
            return Err(Error::InvalidArgument("half window N must be >= 1".into()));
        }
        let len = match mode {
            FbmMode::TwoSided => 2 * half_window,
            FbmMode::IndependentBranches => half_window.max(2),
        };
        Ok(Self {
            half_window,
            mode,
            fgn: CirculantFgn::new(hurst, len)?,
        })
    }

    pub fn half_window(&self) -> usize {
        self.half_window
    }

    pub fn mode(&self) -> FbmMode {
        self.mode
    }

    pub fn hurst(&self) -> HurstIndex {
        self.fgn.hurst()
    }

    fn path(&self, values: Vec<f64>, key: StreamKey) -> FbmPath {
        FbmPath {
            half_window: self.half_window,
            values,
            hurst: self.hurst(),
            key,
        }
    }

    fn rebase(&self, noise: &[f64]) -> Vec<f64> {
        let n = self.half_window;
        let mut cum = Vec::with_capacity(2 * n + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for &g in &noise[..2 * n] {
            acc += g;
            cum.push(acc);
        }
        let centre = cum[n];
        for v in &mut cum {
            *v -= centre;
        }
        cum[n] = 0.0;
        cum
    }

    fn glue(&self, positive: &[f64], negative: &[f64]) -> Vec<f64> {
        let n = self.half_window;
        let mut values = vec![0.0; 2 * n + 1];
        let mut acc = 0.0;
        for (k, &g) in positive[..n].iter().enumerate() {
            acc += g;
            values[n + k + 1] = acc;
        }
        acc = 0.0;
        for (k, &g) in negative[..n].iter().enumerate() {
            acc += g;
            values[n - k - 1] = acc;
        }
        values
    }

    /// One path.
    pub fn sample(&self, key: StreamKey) -> FbmPath {
        let (re, im) = self.fgn.sample_pair(key);
        let values = match self.mode {
            FbmMode::TwoSided => self.rebase(&re),
            FbmMode::IndependentBranches => self.glue(&re, &im),
        };
        self.path(values, key)
    }

    /// Two independent paths from one FFT. Only available in two-sided mode,
    /// where each path needs a single fGn stream.
    pub fn sample_pair(&self, key: StreamKey) -> (FbmPath, FbmPath) {
        match self.mode {
            FbmMode::TwoSided => {
                let (re, im) = self.fgn.sample_pair(key);
                (self.path(self.rebase(&re), key), self.path(self.rebase(&im), key))
            }
            FbmMode::IndependentBranches => (self.sample(key.child(0)), self.sample(key.child(1))),
        }
    }
}

/// Exact two-sided fBm on `[−N, N]` (re-based construction).
pub fn sample_fbm_lattice(h: HurstIndex, half_window: usize, key: StreamKey) -> Result<FbmPath> {
    sample_fbm_lattice_with(h, half_window, key, FbmMode::TwoSided)
}

pub fn sample_fbm_lattice_with(
    h: HurstIndex,
    half_window: usize,
    key: StreamKey,
    mode: FbmMode,
) -> Result<FbmPath> {
    Ok(LatticeFbm::new(h, half_window, mode)?.sample(key))
}

/// fBm covariance `½(|s|^{2h} + |t|^{2h} − |s−t|^{2h})`.
pub fn fbm_covariance(h: HurstIndex, s: f64, t: f64) -> f64 {
    let p = h.two_h();
    0.5 * (s.abs().powf(p) + t.abs().powf(p) - (s - t).abs().powf(p))
}

/// Dense Cholesky factor of the fBm covariance restricted to nonzero points.
#[derive(Clone, Debug)]
pub struct DenseFbm {
    points: Vec<f64>,
    nonzero: Vec<usize>,
    factor: DMatrix<f64>,
}

impl DenseFbm {
    /// `points` must be sorted, distinct, and contain `0`. Cost is `O(n³)`.
    pub fn new(h: HurstIndex, points: &[f64]) -> Result<Self> {
        if points.len() > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "dense fBm sampler limited to {DENSE_LIMIT} points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("points must be sorted and distinct".into()));
        }
        if !points.contains(&0.0) {
            return Err(Error::InvalidArgument("points must contain the origin".into()));
        }
        let nonzero: Vec<usize> = (0..points.len()).filter(|&i| points[i] != 0.0).collect();
        let m = nonzero.len();
        let mut cov = DMatrix::from_fn(m, m, |i, j| fbm_covariance(h, points[nonzero[i]], points[nonzero[j]]));
        let jitter = if m > 0 { CHOLESKY_JITTER * cov.trace() / m as f64 } else { 0.0 };
        for i in 0..m {
            cov[(i, i)] += jitter;
        }
        let factor = cov
            .cholesky()
            .ok_or(Error::FactorizationFailure { jitter })?
            .unpack();
        Ok(Self {
            points: points.to_vec(),
            nonzero,
            factor,
        })
    }

    pub fn sample(&self, key: StreamKey) -> Vec<f64> {
        let mut rng = key.rng();
        let z = DVector::from_fn(self.nonzero.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = &self.factor * z;
        let mut out = vec![0.0; self.points.len()];
        for (k, &i) in self.nonzero.iter().enumerate() {
            out[i] = b[k];
        }
        out
    }
}

/// Exact fBm values at arbitrary points (dense factorization, desk scale).
pub fn sample_fbm_points(h: HurstIndex, points: &[f64], key: StreamKey) -> Result<Vec<f64>> {
    Ok(DenseFbm::new(h, points)?.sample(key))
}
