//! Adaptive Gauss–Kronrod quadrature, with log-space variants for integrands
//! whose magnitude under- or overflows `f64`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae on `[0, 1]`; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule for the adaptive integrators.
#[derive(Clone, Copy, Debug)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { rel_tol: 1e-10, abs_tol: 0.0, max_intervals: 20_000 }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadConfig { rel_tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// One 15-point Kronrod panel: (value, |K − G| error, ∫|f| estimate).
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut k_abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        k += WGK[j] * (f1 + f2);
        k_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs(), k_abs * h.abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// `∫_a^b f` by globally adaptive bisection of the worst panel.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate> {
    integrate_partition(f, &[a, b], cfg)
}

/// As [`integrate`], starting from the panels between consecutive breakpoints.
/// Breakpoints must be sorted ascending.
pub fn integrate_partition<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<Estimate> {
    if breaks.len() < 2 {
        return Ok(Estimate { value: 0.0, error: 0.0, evals: 0 });
    }
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in breaks.windows(2) {
        if !(w[0].is_finite() && w[1].is_finite()) || w[1] < w[0] {
            return Err(Error::domain("integrate", format!("bad panel [{}, {}]", w[0], w[1])));
        }
        if w[1] == w[0] {
            continue;
        }
        let (value, error, abs) = kronrod15(&f, w[0], w[1]);
        evals += 15;
        heap.push(Panel { a: w[0], b: w[1], value, error, abs });
    }
    loop {
        let (total, err, total_abs) = heap
            .iter()
            .fold((0.0, 0.0, 0.0), |(s, e, m), p| (s + p.value, e + p.error, m + p.abs));
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::numeric("integrate", format!("non-finite integrand (sum {total})")));
        }
        // The last term is the roundoff floor for integrals that cancel to ~0.
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs()).max(50.0 * f64::EPSILON * total_abs);
        if err <= target {
            return Ok(Estimate { value: total, error: err, evals });
        }
        if heap.len() >= cfg.max_intervals {
            return Err(Error::numeric(
                "integrate",
                format!(
                    "no convergence after {} panels: value {total:e}, error {err:e}",
                    heap.len()
                ),
            ));
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further; keep it but mark it resolved.
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error, abs) = kronrod15(&f, a, b);
            evals += 15;
            heap.push(Panel { a, b, value, error, abs });
        }
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn maximize_unimodal<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `ln ∫_a^b exp(log_f)`.
///
/// The integrand is sampled on `grid` cells to locate its peak, rescaled by the
/// peak value, and integrated with the cells (plus the refined peak) as initial
/// panels. Returns `-∞` for an identically zero integrand.
pub fn log_integrate<F: Fn(f64) -> f64>(
    log_f: F,
    a: f64,
    b: f64,
    grid: usize,
    cfg: &QuadConfig,
) -> Result<f64> {
    if b <= a {
        return Ok(f64::NEG_INFINITY);
    }
    let grid = grid.max(2);
    let h = (b - a) / grid as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..grid {
        let v = log_f(a + (i as f64 + 0.5) * h);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::numeric("log_integrate", format!("integrand is {v} at cell {i}")));
        }
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = a + (best.0 as f64 - 0.5).max(0.0) * h;
    let hi = (a + (best.0 as f64 + 1.5) * h).min(b);
    let (x_peak, v_peak) = maximize_unimodal(&log_f, lo, hi, 1e-9 * (b - a));
    let m = best.1.max(v_peak);
    if m == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut breaks: Vec<f64> = (0..=grid).map(|i| a + i as f64 * h).collect();
    breaks[grid] = b;
    if x_peak > a && x_peak < b {
        breaks.push(x_peak);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }
    let est = integrate_partition(
        |x| {
            let v = log_f(x);
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                (v - m).exp()
            }
        },
        &breaks,
        cfg,
    )?;
    if est.value <= 0.0 {
        return Err(Error::numeric(
            "log_integrate",
            format!("rescaled integral {} is not positive", est.value),
        ));
    }
    Ok(m + est.value.ln())
}

/// Describes `f` on the half line for [`log_mellin`].
#[derive(Clone, Copy, Debug)]
pub struct HalfLine {
    /// `t^decay · f(t)` stays bounded as `t → ∞`.
    pub decay: f64,
    /// `f` vanishes beyond this point, if finite.
    pub support: Option<f64>,
}

const FLAT: f64 = 0.1;
const TAIL_SLOPE: f64 = 0.01;
const MIDDLE_GRID: usize = 256;

/// `ln ∫₀^∞ t^{p−1} f(t) dt` for `0 < p < decay`, with `log_f(t) = ln f(t)`
/// and `f(0) > 0`.
///
/// Three pieces, each free of endpoint singularities:
/// - `[0, t₀]` where `f` is nearly flat, via `t = t₀ v^{1/p}`:
///   `(t₀^p / p) ∫₀¹ f(t₀ v^{1/p}) dv`;
/// - `[t₀, t₁]` in `y = ln t` with integrand `exp(p y + ln f(e^y))`;
/// - `[t₁, ∞)` where `t^α f` is nearly flat, via `t = t₁ v^{−1/(α−p)}`:
///   `(t₁^{p−α} / (α−p)) ∫₀¹ t^α f(t) dv`.
pub fn log_mellin<F: Fn(f64) -> f64>(
    log_f: F,
    p: f64,
    shape: HalfLine,
    cfg: &QuadConfig,
) -> Result<f64> {
    let alpha = shape.decay;
    if !(p > 0.0) {
        return Err(Error::domain("log_mellin", format!("order p = {p} must be positive")));
    }
    if shape.support.is_none() && !(p < alpha) {
        return Err(Error::domain(
            "log_mellin",
            format!("order p = {p} must be below the decay exponent {alpha}"),
        ));
    }
    let l0 = log_f(0.0);
    if !l0.is_finite() {
        return Err(Error::domain("log_mellin", format!("ln f(0) = {l0} must be finite")));
    }
    let cap = shape.support.unwrap_or(f64::MAX);
    let flat = |t: f64| (log_f(t) - l0).abs() <= FLAT;

    let mut t0 = 1.0f64.min(cap);
    if flat(t0) {
        while 2.0 * t0 < cap && t0 < 1e300 && flat(2.0 * t0) {
            t0 *= 2.0;
        }
    } else {
        let mut halvings = 0;
        while !flat(t0) {
            t0 *= 0.5;
            halvings += 1;
            if halvings > 2000 {
                return Err(Error::numeric("log_mellin", "f never flattens near 0"));
            }
        }
    }

    let mut pieces = Vec::with_capacity(3);
    let left = log_integrate(|v: f64| log_f(t0 * v.powf(1.0 / p)), 0.0, 1.0, 32, cfg)?;
    pieces.push(p * t0.ln() - p.ln() + left);

    let t1 = match shape.support {
        Some(s) => s,
        None => {
            let q = |t: f64| alpha * t.ln() + log_f(t);
            let mut t = t0;
            let mut q_t = q(t);
            loop {
                let q_next = q(2.0 * t);
                if q_next == f64::NEG_INFINITY {
                    t *= 2.0;
                    break;
                }
                let slope = (q_next - q_t) / std::f64::consts::LN_2;
                t *= 2.0;
                q_t = q_next;
                if slope.abs() <= TAIL_SLOPE || t > 1e300 {
                    break;
                }
            }
            t
        }
    };

    if t1 > t0 {
        let mid = log_integrate(
            |y: f64| p * y + log_f(y.exp()),
            t0.ln(),
            t1.ln(),
            MIDDLE_GRID,
            cfg,
        )?;
        pieces.push(mid);
    }

    if shape.support.is_none() {
        let beta = alpha - p;
        let ln_t1 = t1.ln();
        let tail = log_integrate(
            |v: f64| {
                if v <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let ln_t = ln_t1 - v.ln() / beta;
                let t = ln_t.exp();
                if !t.is_finite() {
                    return f64::NEG_INFINITY;
                }
                alpha * ln_t + log_f(t)
            },
            0.0,
            1.0,
            32,
            cfg,
        )?;
        pieces.push((p - alpha) * ln_t1 - beta.ln() + tail);
    }
    Ok(log_sum_exp(&pieces))
}

/// `ln Σ exp(xᵢ)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
