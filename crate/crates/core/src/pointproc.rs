//! Perturbed Palm configurations `{x + B_x}`, approximate dePalmization and
//! Campbell-formula checks.

use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::{sample_fbm_points, FbmMode, HurstIndex, LatticeFbm};
use crate::rng::StreamKey;

// child-stream tags
const TAG_SHIFT: u64 = 0x5348_4946_54;
const TAG_LHS: u64 = 0x4C48_53;
const TAG_RHS: u64 = 0x5248_53;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigKind {
    Palm,
    Stationarized,
}

impl std::str::FromStr for ConfigKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "palm" => Ok(Self::Palm),
            "stationarized" | "stationary" => Ok(Self::Stationarized),
            other => Err(Error::InvalidArgument(format!("unknown configuration kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ConfigKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Palm => "palm",
            Self::Stationarized => "stationarized",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigMeta {
    pub hurst: Option<f64>,
    pub half_window: Option<usize>,
    pub source: String,
    pub key: Option<StreamKey>,
    pub shift_halfwidth: Option<f64>,
    pub shift: Option<f64>,
}

/// A finite, sorted point set. Palm configurations contain `0.0` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfiguration {
    points: Vec<f64>,
    kind: ConfigKind,
    pub meta: ConfigMeta,
}

fn sort_points(points: &mut [f64]) {
    points.sort_unstable_by(f64::total_cmp);
}

impl PointConfiguration {
    /// Sorts the points; a Palm configuration must contain the origin.
    pub fn new(mut points: Vec<f64>, kind: ConfigKind, meta: ConfigMeta) -> Result<Self> {
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("points must be finite".into()));
        }
        sort_points(&mut points);
        if kind == ConfigKind::Palm && points.binary_search_by(|x| x.total_cmp(&0.0)).is_err() {
            return Err(Error::InvalidArgument("a Palm configuration must contain 0".into()));
        }
        Ok(Self { points, kind, meta })
    }

    pub fn palm(points: Vec<f64>) -> Result<Self> {
        Self::new(points, ConfigKind::Palm, ConfigMeta::default())
    }

    /// The unperturbed lattice `{−N, …, N}` (the `B ≡ 0` seam).
    pub fn lattice(half_window: usize) -> Self {
        let n = half_window as i64;
        let points = (-n..=n).map(|k| k as f64).collect();
        Self {
            points,
            kind: ConfigKind::Palm,
            meta: ConfigMeta {
                half_window: Some(half_window),
                source: "lattice".into(),
                ..ConfigMeta::default()
            },
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }

    pub fn kind(&self) -> ConfigKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `max − min` of the points.
    pub fn extent(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn contains_origin(&self) -> bool {
        self.points.binary_search_by(|x| x.total_cmp(&0.0)).is_ok()
    }

    /// Number of points in the closed interval `[lo, hi]`.
    pub fn count_closed(&self, lo: f64, hi: f64) -> usize {
        count_closed(&self.points, lo, hi)
    }
}

/// Points of a sorted slice in `[lo, hi]`.
pub fn count_closed(sorted: &[f64], lo: f64, hi: f64) -> usize {
    if hi < lo {
        return 0;
    }
    let start = sorted.partition_point(|&x| x < lo);
    let end = sorted.partition_point(|&x| x <= hi);
    end - start
}

/// Points of a sorted slice in the open interval `(lo, hi)`.
pub fn count_open(sorted: &[f64], lo: f64, hi: f64) -> usize {
    if hi <= lo {
        return 0;
    }
    let start = sorted.partition_point(|&x| x <= lo);
    let end = sorted.partition_point(|&x| x < hi);
    end.saturating_sub(start)
}

/// Cached generator of perturbed Palm lattices on `[−N, N]`.
#[derive(Clone, Debug)]
pub struct PalmLatticeSampler {
    fbm: LatticeFbm,
}

impl PalmLatticeSampler {
    pub fn new(h: HurstIndex, half_window: usize, mode: FbmMode) -> Result<Self> {
        Ok(Self {
            fbm: LatticeFbm::new(h, half_window, mode)?,
        })
    }

    pub fn half_window(&self) -> usize {
        self.fbm.half_window()
    }

    /// Unsorted positions `n + B_n`, origin stored as exactly `0.0`.
    pub fn positions(&self, key: StreamKey) -> Vec<f64> {
        displace(&self.fbm.sample(key))
    }

    /// Two independent unsorted position vectors from one FFT.
    pub fn positions_pair(&self, key: StreamKey) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.fbm.sample_pair(key);
        (displace(&a), displace(&b))
    }

    pub fn sample(&self, key: StreamKey) -> PointConfiguration {
        let mut points = self.positions(key);
        sort_points(&mut points);
        PointConfiguration {
            points,
            kind: ConfigKind::Palm,
            meta: ConfigMeta {
                hurst: Some(self.fbm.hurst().value()),
                half_window: Some(self.half_window()),
                source: format!("lattice+fbm({})", self.fbm.mode()),
                key: Some(key),
                ..ConfigMeta::default()
            },
        }
    }
}

fn displace(path: &crate::fgn::FbmPath) -> Vec<f64> {
    path.sites()
        .map(|(n, b)| if n == 0 { 0.0 } else { n as f64 + b })
        .collect()
}

/// `{n + B_n : −N ≤ n ≤ N}`, sorted, `2N + 1` points, origin included.
pub fn perturb_palm_lattice(h: HurstIndex, half_window: usize, key: StreamKey) -> Result<PointConfiguration> {
    Ok(PalmLatticeSampler::new(h, half_window, FbmMode::TwoSided)?.sample(key))
}

/// `{x + B_x : x ∈ base}` for a Palm base configuration.
///
/// Integer-valued bases go through the lattice sampler; anything else uses the
/// dense sampler and is bounded by [`crate::fgn::DENSE_LIMIT`].
pub fn perturb_point_set(base: &PointConfiguration, h: HurstIndex, key: StreamKey) -> Result<PointConfiguration> {
    if base.kind() != ConfigKind::Palm {
        return Err(Error::InvalidArgument("perturbation needs a Palm base configuration".into()));
    }
    let pts = base.points();
    let integral = pts.iter().all(|x| x.fract() == 0.0 && x.abs() < 1e15);
    let displaced: Vec<f64> = if integral && pts.len() > 1 {
        let reach = pts.iter().map(|x| x.abs() as usize).max().unwrap_or(1).max(1);
        let path = crate::fgn::sample_fbm_lattice(h, reach, key)?;
        pts.iter()
            .map(|&x| if x == 0.0 { 0.0 } else { x + path.at(x as i64) })
            .collect()
    } else {
        let b = sample_fbm_points(h, pts, key)?;
        pts.iter()
            .zip(&b)
            .map(|(&x, &bx)| if x == 0.0 { 0.0 } else { x + bx })
            .collect()
    };
    PointConfiguration::new(
        displaced,
        ConfigKind::Palm,
        ConfigMeta {
            hurst: Some(h.value()),
            half_window: base.meta.half_window,
            source: format!("perturbed({})", if base.meta.source.is_empty() { "points" } else { &base.meta.source }),
            key: Some(key),
            ..ConfigMeta::default()
        },
    )
}

/// Translate a Palm configuration by one draw `U ~ Uniform[−x, x]`.
///
/// Requires `x ≤ extent/4` so that balls around the origin stay covered.
pub fn depalmize(config: &PointConfiguration, halfwidth: f64, key: StreamKey) -> Result<PointConfiguration> {
    check_shift(config, halfwidth)?;
    let u = draw_shift(halfwidth, key);
    let mut out = translate(config, u);
    out.meta.shift_halfwidth = Some(halfwidth);
    out.meta.key = Some(key);
    Ok(out)
}

fn check_shift(config: &PointConfiguration, halfwidth: f64) -> Result<()> {
    if !(halfwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("shift half-width must be positive, got {halfwidth}")));
    }
    if config.kind() != ConfigKind::Palm {
        return Err(Error::InvalidArgument("dePalmization needs a Palm configuration".into()));
    }
    if halfwidth > config.extent() / 4.0 {
        return Err(Error::WindowTooSmall(format!(
            "shift half-width {halfwidth} exceeds a quarter of the extent {}",
            config.extent()
        )));
    }
    Ok(())
}

/// The uniform shift used by [`depalmize`] for this key.
pub fn draw_shift(halfwidth: f64, key: StreamKey) -> f64 {
    key.child(TAG_SHIFT).rng().random_range(-halfwidth..halfwidth)
}

/// Pointwise translation by `u`; the result is marked stationarized.
pub fn translate(config: &PointConfiguration, u: f64) -> PointConfiguration {
    PointConfiguration {
        points: config.points.iter().map(|x| x + u).collect(),
        kind: ConfigKind::Stationarized,
        meta: ConfigMeta {
            shift: Some(u),
            ..config.meta.clone()
        },
    }
}

/// Binomial-free homogeneous Poisson process of intensity 1 on `[−L/2, L/2)`.
pub fn poisson_configuration(length: f64, key: StreamKey) -> Result<PointConfiguration> {
    let mut rng = key.rng();
    let count = rng.sample(Poisson::new(length).map_err(|e| Error::InvalidArgument(e.to_string()))?) as usize;
    let points = (0..count).map(|_| rng.random_range(-0.5 * length..0.5 * length)).collect();
    PointConfiguration::new(
        points,
        ConfigKind::Stationarized,
        ConfigMeta {
            source: format!("poisson(L={length})"),
            key: Some(key),
            ..ConfigMeta::default()
        },
    )
}

/// Test functions available to [`campbell_check`]. Each is evaluated on the
/// configuration seen from a chosen point (`τ_t ξ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestFunction {
    Constant,
    /// Number of points in `[−a, a]`.
    CountInBall { a: f64 },
    /// `1` if no point lies in the open interval `(0, b)`.
    EmptyGap { b: f64 },
}

impl TestFunction {
    /// Value on the sorted configuration translated so that `centre` is the origin.
    pub fn eval_at(&self, sorted: &[f64], centre: f64) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::CountInBall { a } => count_closed(sorted, centre - a, centre + a) as f64,
            Self::EmptyGap { b } => (count_open(sorted, centre, centre + b) == 0) as u8 as f64,
        }
    }

    fn reach(&self) -> f64 {
        match *self {
            Self::Constant => 0.0,
            Self::CountInBall { a } => a,
            Self::EmptyGap { b } => b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampbellResult {
    /// Monte Carlo `E f(ξ̂)` over Palm configurations.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// Ratio estimate of `E ∫_{[0,1)} f(τ_t ξ) ξ(dt) / E ξ([0,1))` over
    /// dePalmized configurations.
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// The same numerator divided by the nominal intensity 1.
    pub rhs_unnormalized: f64,
    pub mean_unit_count: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct CampbellParams {
    pub hurst: HurstIndex,
    pub half_window: usize,
    pub realizations: usize,
    pub function: TestFunction,
    /// Defaults to `N/4`.
    pub shift_halfwidth: Option<f64>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Both sides of the Palm–Campbell identity estimated from independent
/// ensembles, with the z-score of their difference.
pub fn campbell_check(params: CampbellParams, key: StreamKey) -> Result<CampbellResult> {
    use rayon::prelude::*;

    let m = params.realizations;
    if m < 2 {
        return Err(Error::DegenerateEnsemble(m));
    }
    let n = params.half_window;
    let halfwidth = params.shift_halfwidth.unwrap_or(n as f64 / 4.0);
    if params.function.reach() + halfwidth + 1.0 > n as f64 / 2.0 {
        return Err(Error::WindowTooSmall(format!(
            "test function reach {} plus shift {halfwidth} leaves [-N/2, N/2] for N = {n}",
            params.function.reach()
        )));
    }
    let sampler = PalmLatticeSampler::new(params.hurst, n, FbmMode::TwoSided)?;
    let f = params.function;

    let lhs_vals: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let palm = sampler.sample(key.child(TAG_LHS).child(i));
            f.eval_at(palm.points(), 0.0)
        })
        .collect();

    let rhs_vals: Vec<Result<(f64, f64)>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let k = key.child(TAG_RHS).child(i);
            let stat = depalmize(&sampler.sample(k), halfwidth, k)?;
            let pts = stat.points();
            let lo = pts.partition_point(|&x| x < 0.0);
            let hi = pts.partition_point(|&x| x < 1.0);
            let sum: f64 = pts[lo..hi].iter().map(|&t| f.eval_at(pts, t)).sum();
            Ok((sum, (hi - lo) as f64))
        })
        .collect();
    let rhs_vals: Vec<(f64, f64)> = rhs_vals.into_iter().collect::<Result<_>>()?;

    let (lhs, lhs_stderr) = mean_and_se(&lhs_vals);
    let sums: Vec<f64> = rhs_vals.iter().map(|p| p.0).collect();
    let counts: Vec<f64> = rhs_vals.iter().map(|p| p.1).collect();
    let (rhs_unnormalized, _) = mean_and_se(&sums);
    let (mean_unit_count, _) = mean_and_se(&counts);
    let rhs = rhs_unnormalized / mean_unit_count;
    // delta method for a ratio of means
    let resid: Vec<f64> = rhs_vals.iter().map(|&(s, c)| s - rhs * c).collect();
    let (_, resid_se) = mean_and_se(&resid);
    let rhs_stderr = resid_se / mean_unit_count;

    let se = (lhs_stderr.powi(2) + rhs_stderr.powi(2)).sqrt();
    let diff = lhs - rhs;
    let z = if se > 0.0 {
        diff / se
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(CampbellResult {
        lhs,
        lhs_stderr,
        rhs,
        rhs_stderr,
        rhs_unnormalized,
        mean_unit_count,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn palm_lattice_contains_origin() {
        let c = perturb_palm_lattice(h(0.25), 100, StreamKey::new(1, 2)).unwrap();
        assert_eq!(c.len(), 201);
        assert!(c.contains_origin());
        assert!(c.points().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(c.kind(), ConfigKind::Palm);
    }

    #[test]
    fn palm_needs_origin() {
        assert!(PointConfiguration::palm(vec![1.0, 2.0]).is_err());
        let c = PointConfiguration::palm(vec![2.0, 0.0, -1.0]).unwrap();
        assert_eq!(c.points(), &[-1.0, 0.0, 2.0]);
    }

    #[test]
    fn singleton_base_stays_put() {
        let base = PointConfiguration::palm(vec![0.0]).unwrap();
        let out = perturb_point_set(&base, h(0.3), StreamKey::root(4)).unwrap();
        assert_eq!(out.points(), &[0.0]);
    }

    #[test]
    fn depalmize_translates() {
        let c = perturb_palm_lattice(h(0.4), 64, StreamKey::new(3, 0)).unwrap();
        let key = StreamKey::new(3, 1);
        let s = depalmize(&c, 16.0, key).unwrap();
        let u = draw_shift(16.0, key);
        assert_eq!(s.meta.shift, Some(u));
        assert_eq!(s.kind(), ConfigKind::Stationarized);
        for (a, b) in c.points().iter().zip(s.points()) {
            assert_eq!(a + u, *b);
        }
        let gaps_in: Vec<f64> = c.points().windows(2).map(|w| w[1] - w[0]).collect();
        let gaps_out: Vec<f64> = s.points().windows(2).map(|w| w[1] - w[0]).collect();
        for (a, b) in gaps_in.iter().zip(&gaps_out) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(translate(&c, u).points(), s.points());
    }

    #[test]
    fn depalmize_window_check() {
        let c = perturb_palm_lattice(h(0.4), 64, StreamKey::new(3, 0)).unwrap();
        assert!(matches!(depalmize(&c, 40.0, StreamKey::root(0)), Err(Error::WindowTooSmall(_))));
        assert!(depalmize(&c, 0.0, StreamKey::root(0)).is_err());
    }

    #[test]
    fn test_functions() {
        let pts = [-2.0, -0.5, 0.0, 0.3, 1.0, 2.5];
        assert_eq!(TestFunction::Constant.eval_at(&pts, 0.0), 1.0);
        assert_eq!(TestFunction::CountInBall { a: 1.0 }.eval_at(&pts, 0.0), 4.0);
        assert_eq!(TestFunction::EmptyGap { b: 0.5 }.eval_at(&pts, 0.0), 0.0);
        assert_eq!(TestFunction::EmptyGap { b: 0.7 }.eval_at(&pts, 0.3), 1.0);
        assert_eq!(TestFunction::EmptyGap { b: 0.71 }.eval_at(&pts, 0.3), 0.0);
    }

    #[test]
    fn constant_function_balances_exactly() {
        let r = campbell_check(
            CampbellParams {
                hurst: h(0.25),
                half_window: 256,
                realizations: 50,
                function: TestFunction::Constant,
                shift_halfwidth: None,
            },
            StreamKey::root(11),
        )
        .unwrap();
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, 1.0);
        assert_eq!(r.z, 0.0);
    }

    #[test]
    fn campbell_needs_two_realizations() {
        let r = campbell_check(
            CampbellParams {
                hurst: h(0.25),
                half_window: 256,
                realizations: 1,
                function: TestFunction::Constant,
                shift_halfwidth: None,
            },
            StreamKey::root(11),
        );
        assert!(matches!(r, Err(Error::DegenerateEnsemble(1))));
    }

    #[test]
    fn poisson_points_inside_window() {
        let c = poisson_configuration(100.0, StreamKey::root(2)).unwrap();
        assert!(c.points().iter().all(|&x| (-50.0..50.0).contains(&x)));
        assert!(c.len() > 50 && c.len() < 150);
    }
}
