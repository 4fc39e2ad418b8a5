//! Numerical integration: adaptive Gauss–Kronrod and oscillatory Fourier
//! tails via zero partition plus Wynn's epsilon acceleration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 21-point Kronrod abscissae/weights and the embedded 10-point Gauss weights.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_943_417_356,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// One 21-point Kronrod panel: `(estimate, error estimate)`.
pub fn gauss_kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let estimate = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (estimate, err)
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn allows(&self, err: f64, value: f64) -> bool {
        err <= self.abs.max(self.rel * value.abs())
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

pub const MAX_PANELS: usize = 4000;

/// Globally adaptive Gauss–Kronrod on `[a, b]`: always bisects the panel
/// with the largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, err) = gauss_kronrod21(&f, a, b);
    let mut total = value;
    let mut total_err = err;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, err });
    while !tol.allows(total_err, total) {
        if heap.len() >= MAX_PANELS {
            return Err(Error::QuadratureFailure(format!(
                "{MAX_PANELS} panels on [{a}, {b}], error estimate {total_err:e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // panel is below floating resolution; accept what we have
            return Err(Error::QuadratureFailure(format!(
                "panel collapsed at {mid}, error estimate {total_err:e}"
            )));
        }
        let (v1, e1) = gauss_kronrod21(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
    // re-add in a fixed order so the result does not carry the running-sum drift
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    Ok(panels.iter().map(|p| p.value).sum())
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums.
///
/// Returns the last even-column entry of the table, which is the accelerated
/// limit estimate.
pub fn wynn_epsilon(partial_sums: &[f64]) -> f64 {
    let n = partial_sums.len();
    if n < 3 {
        return *partial_sums.last().unwrap_or(&0.0);
    }
    // e_prev = column k-1, e_cur = column k
    let mut e_prev = vec![0.0; n + 1];
    let mut e_cur: Vec<f64> = partial_sums.to_vec();
    let mut best = partial_sums[n - 1];
    let mut k = 0;
    while e_cur.len() > 1 {
        let mut next = Vec::with_capacity(e_cur.len() - 1);
        for j in 0..e_cur.len() - 1 {
            let diff = e_cur[j + 1] - e_cur[j];
            let prev = e_prev[j + 1];
            if diff == 0.0 || !diff.is_finite() {
                // converged (or broke down) at this depth
                return if k % 2 == 0 { e_cur[j + 1] } else { best };
            }
            next.push(prev + 1.0 / diff);
        }
        k += 1;
        e_prev = e_cur;
        e_cur = next;
        if k % 2 == 0 {
            if let Some(&v) = e_cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
    }
    best
}

/// `∫_a^∞ f(x) cos(ω x) dx` for a smooth, eventually decreasing envelope `f`.
///
/// The range is cut at the zeros of `cos(ω x)`; half-period integrals form an
/// alternating series whose partial sums are accelerated with Wynn's epsilon.
/// Terminates when successive accelerated estimates agree to `tol`, or when
/// `f` has fallen below `tol` (plain summation then converges).
pub fn integrate_cosine_tail<F: Fn(f64) -> f64>(
    envelope: F,
    omega: f64,
    a: f64,
    tol: f64,
    max_terms: usize,
) -> Result<f64> {
    if omega <= 0.0 {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {omega}")));
    }
    let half_period = std::f64::consts::PI / omega;
    // first zero of cos(ω x) strictly after a
    let k0 = (a / half_period - 0.5).floor() + 1.0;
    let mut lo = a;
    let mut hi = (k0 + 0.5) * half_period;
    let g = |x: f64| envelope(x) * (omega * x).cos();
    let panel_tol = Tolerance::new(0.01 * tol, 1e-13);

    let mut partial = Vec::with_capacity(64);
    let mut sum = integrate(g, lo, hi, panel_tol)?;
    partial.push(sum);
    let mut last_estimate = f64::NAN;
    let mut agreed = 0;
    for _ in 0..max_terms {
        lo = hi;
        hi = lo + half_period;
        let term = integrate(g, lo, hi, panel_tol)?;
        sum += term;
        partial.push(sum);
        if envelope(lo).abs() * half_period < 0.01 * tol {
            return Ok(sum);
        }
        if partial.len() >= 8 {
            let window = &partial[partial.len().saturating_sub(40)..];
            let estimate = wynn_epsilon(window);
            if (estimate - last_estimate).abs() < tol {
                agreed += 1;
                if agreed >= 3 {
                    return Ok(estimate);
                }
            } else {
                agreed = 0;
            }
            last_estimate = estimate;
        }
    }
    Err(Error::QuadratureFailure(format!(
        "cosine tail did not settle within {max_terms} half periods (last {last_estimate})"
    )))
}
