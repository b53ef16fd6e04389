//! Log-concavity transforms of one-dimensional profiles and the reverse
//! Hölder (Khinchine-type) inequality for concave functionals.
//!
//! For `f = φ^{−α}` with `φ` convex, `H(p) = ∫₀^∞ t^{p−1} f / B(p, α−p)`
//! (with `H(0) = f(0)`) is log-concave on `[0, α)`. For a `1/m`-concave,
//! compactly supported `f`, `G(q) = ∫₀^∞ t^{q−1} f / B(q, m+1)` is
//! log-concave on `[0, ∞)`.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::log_half_moment;
use crate::error::{Error, Result};
use crate::measures::{log_mellin_profile, MeasureModel, Profile1d};
use crate::moments::Method;
use crate::quad::QuadConfig;
use crate::sampling::{par_rows, sample_model, RngStream};
use crate::specfun::log_beta;
use crate::stats::mean_var;

/// Default grid step as a fraction of `α`.
pub const GRID_FRACTION: f64 = 0.05;
/// Default tolerance of [`logconcavity_test`].
pub const LOGCONCAVITY_TOL: f64 = 1e-6;
/// Largest accepted `|ln H(0⁺) − ln f(0)|` from the extrapolation at 0.
pub const CONTINUITY_TOL: f64 = 1e-5;

/// A profile given by a closure for `ln f`.
pub struct FnProfile<F> {
    log_f: F,
    decay: f64,
    support: Option<f64>,
}

impl<F: Fn(f64) -> f64 + Send + Sync> FnProfile<F> {
    pub fn new(log_f: F, decay: f64, support: Option<f64>) -> Self {
        FnProfile { log_f, decay, support }
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> Profile1d for FnProfile<F> {
    fn log_value(&self, t: f64) -> f64 {
        (self.log_f)(t)
    }

    fn decay(&self) -> f64 {
        self.decay
    }

    fn support(&self) -> Option<f64> {
        self.support
    }
}

/// Sampled `ln H` (or `ln G`) on a uniform grid.
#[derive(Clone, Debug, Serialize)]
pub struct HProfile {
    /// `α` for `H`, `m + 1` for `G`.
    pub alpha: f64,
    pub p: Vec<f64>,
    pub log_h: Vec<f64>,
    pub rel_tol: f64,
    /// `|ln H(0⁺) − ln f(0)|` by linear extrapolation, when the grid holds 0.
    pub continuity_gap: Option<f64>,
}

impl HProfile {
    pub fn max_violation(&self) -> LogConcavity {
        logconcavity_test(&self.p, &self.log_h)
    }

    /// `(1/p) ln(H(p)/H(0))` for the grid points `p > 0`, which is
    /// nonincreasing when `H` is log-concave.
    pub fn root_means(&self) -> Result<Vec<(f64, f64)>> {
        let h0 = match self.p.iter().position(|&p| p == 0.0) {
            Some(i) => self.log_h[i],
            None => return Err(Error::domain("root_means", "grid must contain p = 0")),
        };
        Ok(self
            .p
            .iter()
            .zip(&self.log_h)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &l)| (p, (l - h0) / p))
            .collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "p,log_H")?;
        for (p, l) in self.p.iter().zip(&self.log_h) {
            writeln!(w, "{p},{l}")?;
        }
        Ok(())
    }
}

/// `0, Δ, 2Δ, … < α` with `Δ = GRID_FRACTION·α`, stopping `margin` short of `α`.
pub fn default_p_grid(alpha: f64, margin: f64) -> Vec<f64> {
    let step = GRID_FRACTION * alpha;
    (0..)
        .map(|k| k as f64 * step)
        .take_while(|&p| p <= alpha - margin && p < alpha)
        .collect()
}

fn log_transform<P: Profile1d + ?Sized>(
    op: &'static str,
    profile: &P,
    p: f64,
    log_norm: impl Fn(f64) -> Result<f64>,
    cfg: &QuadConfig,
) -> Result<f64> {
    if p == 0.0 {
        return Ok(profile.log_value(0.0));
    }
    let lm = log_mellin_profile(profile, p, cfg)
        .map_err(|e| Error::numeric(op, format!("quadrature failed at p = {p}: {e}")))?;
    let v = lm - log_norm(p)?;
    if !v.is_finite() {
        return Err(Error::numeric(op, format!("non-finite value at p = {p}")));
    }
    Ok(v)
}

fn sample_transform<P: Profile1d + ?Sized>(
    op: &'static str,
    profile: &P,
    alpha: f64,
    grid: &[f64],
    log_norm: impl Fn(f64) -> Result<f64> + Sync,
    cfg: &QuadConfig,
) -> Result<HProfile> {
    let f0 = profile.log_value(0.0);
    if !f0.is_finite() {
        return Err(Error::domain(op, "f(0) must be positive and finite"));
    }
    let log_h = grid
        .par_iter()
        .map(|&p| log_transform(op, profile, p, &log_norm, cfg))
        .collect::<Result<Vec<f64>>>()?;
    let mut continuity_gap = None;
    if grid.contains(&0.0) {
        // H(p) ≈ f(0) + p·C where C/f(0) can be astronomically large; the
        // linear extrapolation is only meaningful once p·C ≪ f(0), so the
        // step is moved toward 0 using the estimate of C from the last step.
        let mut best = f64::INFINITY;
        let mut ln_delta = (1e-3 * grid.iter().fold(0.0f64, |m, &p| m.max(p)).min(1.0)).ln();
        for _ in 0..8 {
            let delta = ln_delta.exp();
            let l1 = log_transform(op, profile, delta, &log_norm, cfg)?;
            let l2 = log_transform(op, profile, 2.0 * delta, &log_norm, cfg)?;
            best = best.min((2.0 * l1 - l2 - f0).abs());
            if best <= CONTINUITY_TOL * f0.abs().max(1.0) {
                break;
            }
            let rise = l1 - f0;
            let mut next = ln_delta - 3.0 * std::f64::consts::LN_10;
            if rise > 0.0 {
                let ln_c = f0 + rise.exp_m1().ln() - ln_delta;
                next = next.min(f0 - ln_c - 4.0 * std::f64::consts::LN_10);
            }
            ln_delta = next.max(-650.0);
        }
        if best > CONTINUITY_TOL * f0.abs().max(1.0) {
            return Err(Error::numeric(op, format!("transform is not continuous at 0 (gap {best:e})")));
        }
        continuity_gap = Some(best);
    }
    Ok(HProfile { alpha, p: grid.to_vec(), log_h, rel_tol: cfg.rel_tol, continuity_gap })
}

/// `H(p) = (1/B(p, α−p)) ∫₀^∞ t^{p−1} f(t) dt`, `H(0) = f(0)`, on `p_grid ⊂ [0, α)`.
pub fn h_transform<P: Profile1d + ?Sized>(
    profile: &P,
    alpha: f64,
    p_grid: &[f64],
    cfg: &QuadConfig,
) -> Result<HProfile> {
    if !(alpha > 0.0) {
        return Err(Error::domain("h_transform", "α must be positive"));
    }
    if profile.support().is_none() && profile.decay() < alpha {
        return Err(Error::domain(
            "h_transform",
            format!("profile decays like t^-{} which is slower than t^-{alpha}", profile.decay()),
        ));
    }
    if let Some(&p) = p_grid.iter().find(|&&p| !(0.0..alpha).contains(&p)) {
        return Err(Error::domain("h_transform", format!("p = {p} outside [0, {alpha})")));
    }
    sample_transform("h_transform", profile, alpha, p_grid, |p| log_beta(p, alpha - p), cfg)
}

/// `G(q) = (1/B(q, m+1)) ∫₀^∞ t^{q−1} f(t) dt`, `G(0) = f(0)`, for a compactly
/// supported `1/m`-concave profile.
pub fn g_transform<P: Profile1d + ?Sized>(
    profile: &P,
    m: f64,
    q_grid: &[f64],
    cfg: &QuadConfig,
) -> Result<HProfile> {
    if !(m > 0.0) {
        return Err(Error::domain("g_transform", "m must be positive"));
    }
    if profile.support().is_none() {
        return Err(Error::domain("g_transform", "profile must have compact support"));
    }
    if let Some(&q) = q_grid.iter().find(|&&q| !(q >= 0.0 && q.is_finite())) {
        return Err(Error::domain("g_transform", format!("q = {q} must be finite and nonnegative")));
    }
    sample_transform("g_transform", profile, m + 1.0, q_grid, |q| log_beta(q, m + 1.0), cfg)
}

/// Largest interior second difference of `ln H`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogConcavity {
    /// `≤ 0` for a concave sequence; relative to `max(1, |ln H|)` locally.
    pub max_violation: f64,
    pub at: Option<f64>,
}

impl LogConcavity {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Second differences `ℓ_{i−1} − 2ℓ_i + ℓ_{i+1}` of `ln H` (generalized to
/// unequal spacing), scaled by the local magnitude.
pub fn logconcavity_test(p: &[f64], log_h: &[f64]) -> LogConcavity {
    let mut out = LogConcavity { max_violation: f64::NEG_INFINITY, at: None };
    for i in 1..p.len().saturating_sub(1).min(log_h.len().saturating_sub(1)) {
        let (hl, hr) = (p[i] - p[i - 1], p[i + 1] - p[i]);
        let (a, b, c) = (log_h[i - 1], log_h[i], log_h[i + 1]);
        let d2 = 2.0 * (hl * (c - b) - hr * (b - a)) / (hl + hr);
        let scale = a.abs().max(b.abs()).max(c.abs()).max(1.0);
        let v = if d2.is_nan() { f64::INFINITY } else { d2 / scale };
        if v > out.max_violation {
            out.max_violation = v;
            out.at = Some(p[i]);
        }
    }
    if out.at.is_none() {
        out.max_violation = 0.0;
    }
    out
}

/// A positive convex piecewise-linear function on `[0, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewiseLinearConvex {
    knots: Vec<f64>,
    values: Vec<f64>,
    last_slope: f64,
}

impl PiecewiseLinearConvex {
    /// Knots start at 0; the slope after the last knot is `last_slope > 0`.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, last_slope: f64) -> Result<Self> {
        let op = "PiecewiseLinearConvex::new";
        if knots.is_empty() || knots.len() != values.len() || knots[0] != 0.0 {
            return Err(Error::domain(op, "need matching knots/values with knots[0] = 0"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::domain(op, "knots must increase and values be positive"));
        }
        if !(last_slope > 0.0) {
            return Err(Error::domain(op, "last slope must be positive"));
        }
        let phi = PiecewiseLinearConvex { knots, values, last_slope };
        let slopes = phi.slopes();
        if slopes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain(op, "slopes must be nondecreasing"));
        }
        Ok(phi)
    }

    fn slopes(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect();
        s.push(self.last_slope);
        s
    }

    /// Random instance with up to `max_pieces` pieces and minimum value ≥ 0.2.
    pub fn random(rng: &mut ChaCha8Rng, max_pieces: usize) -> Self {
        let pieces = rng.random_range(1..=max_pieces.max(1));
        let mut slopes: Vec<f64> = (0..pieces).map(|_| rng.random_range(-1.0..3.0)).collect();
        slopes.sort_by(f64::total_cmp);
        let last = slopes.len() - 1;
        slopes[last] = slopes[last].max(0.2);
        let mut knots = vec![0.0];
        let mut values = vec![rng.random_range(0.5..2.0)];
        for s in &slopes[..last] {
            let gap = rng.random_range(0.1..2.0);
            knots.push(knots.last().unwrap() + gap);
            values.push(values.last().unwrap() + s * gap);
        }
        let low = values.iter().copied().fold(f64::INFINITY, f64::min);
        if low < 0.2 {
            values.iter_mut().for_each(|v| *v += 0.2 - low);
        }
        PiecewiseLinearConvex { knots, values, last_slope: slopes[last] }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k <= t).saturating_sub(1);
        let slope = if i + 1 < self.knots.len() {
            (self.values[i + 1] - self.values[i]) / (self.knots[i + 1] - self.knots[i])
        } else {
            self.last_slope
        };
        self.values[i] + slope * (t - self.knots[i])
    }

    /// `∫₀^∞ φ^{−α}` piece by piece from the antiderivative
    /// `−(a + s t)^{1−α} / (s (α−1))`.
    pub fn integral_of_power(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 1.0) {
            return Err(Error::domain("integral_of_power", "α must exceed 1"));
        }
        let slopes = self.slopes();
        let e = 1.0 - alpha;
        let mut pieces = Vec::with_capacity(slopes.len());
        for (i, &s) in slopes.iter().enumerate() {
            let v = self.values[i];
            if i + 1 == slopes.len() {
                pieces.push(v.powf(e) / (s * (alpha - 1.0)));
                continue;
            }
            let len = self.knots[i + 1] - self.knots[i];
            let piece = if s == 0.0 {
                v.powf(-alpha) * len
            } else {
                // v^{1−α} (1 − (1 + s·len/v)^{1−α}) / (s (α−1))
                -v.powf(e) * (e * (s * len / v).ln_1p()).exp_m1() / (s * (alpha - 1.0))
            };
            pieces.push(piece);
        }
        Ok(pieces.iter().sum())
    }

    /// The profile `φ^{−α}`.
    pub fn power_profile(&self, alpha: f64) -> ConvexPower {
        ConvexPower { phi: self.clone(), alpha }
    }
}

/// `f = φ^{−α}` for a piecewise-linear convex `φ`; `(−1/α)`-concave.
#[derive(Clone, Debug)]
pub struct ConvexPower {
    pub phi: PiecewiseLinearConvex,
    pub alpha: f64,
}

impl Profile1d for ConvexPower {
    fn log_value(&self, t: f64) -> f64 {
        -self.alpha * self.phi.value(t).ln()
    }

    fn decay(&self) -> f64 {
        self.alpha
    }
}

/// A functional integrated against the measure.
#[derive(Clone)]
pub enum Functional {
    /// `x ↦ ⟨x, θ⟩₊` for a unit vector `θ`.
    Direction(Vec<f64>),
    /// A user oracle, concave on `{φ > 0}`, tested only by random midpoints
    /// inside the ball of `support_radius`.
    Concave { phi: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, support_radius: f64 },
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Functional::Direction(t) => f.debug_tuple("Direction").field(t).finish(),
            Functional::Concave { support_radius, .. } => {
                f.debug_struct("Concave").field("support_radius", support_radius).finish()
            }
        }
    }
}

impl Functional {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Functional::Direction(theta) => theta.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0),
            Functional::Concave { phi, .. } => phi(x).max(0.0),
        }
    }
}

/// Outcome of [`khinchine_check`].
#[derive(Clone, Debug, Serialize)]
pub struct KhinchineReport {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// `(∫φ^q dμ)^{1/q}`.
    pub lhs: f64,
    /// `(qB(q,r−q))^{1/q} / (pB(p,r−p))^{1/p} · (∫φ^p dμ)^{1/p} · μ(φ>0)^{1/q−1/p}`.
    pub rhs: f64,
    /// The same without the factor `μ(φ>0)^{1/q−1/p}`; valid only when `φ > 0` a.s.
    pub rhs_unnormalized: f64,
    pub unnormalized_holds: bool,
    /// `μ(φ > 0)`.
    pub support_mass: f64,
    pub margin: f64,
    pub std_error: f64,
    pub method: Method,
    pub passes: bool,
    /// Largest second difference of `p ↦ ln(∫φ^p dμ / (pB(p,r−p)))` on a grid
    /// in `[0, r)`; closed-form runs only.
    pub grid_violation: Option<f64>,
    /// Largest midpoint concavity defect of a user oracle.
    pub oracle_defect: Option<f64>,
}

/// `ln (qB(q, r−q))^{1/q}`.
pub fn log_khinchine_factor(q: f64, r: f64) -> Result<f64> {
    Ok((q.ln() + log_beta(q, r - q)?) / q)
}

/// Midpoint test of a user oracle on random pairs where it is positive.
fn oracle_midpoint_defect(phi: &(dyn Fn(&[f64]) -> f64 + Send + Sync), n: usize, radius: f64, stream: RngStream) -> f64 {
    let rows = par_rows(stream, 2000, 1, |rng, row| {
        let mut draw = || -> Vec<f64> {
            let dir = crate::sampling::sample_sphere(rng, n);
            let rho = radius * rng.random::<f64>().powf(1.0 / n as f64);
            dir.iter().map(|d| d * rho).collect()
        };
        let (a, b) = (draw(), draw());
        let (fa, fb) = (phi(&a), phi(&b));
        row[0] = if fa > 0.0 && fb > 0.0 {
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            0.5 * (fa + fb) - phi(&mid)
        } else {
            f64::NEG_INFINITY
        };
    });
    rows.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Checks `(∫φ^q)^{1/q} ≤ (qB(q,r−q))^{1/q}/(pB(p,r−p))^{1/p} (∫φ^p)^{1/p}`
/// for `0 < p ≤ q < r`, with the right side scaled by `μ(φ>0)^{1/q−1/p}`:
/// the transform of `t ↦ μ(φ > t)` starts at `μ(φ > 0)`, which is `1/2`
/// rather than 1 for `φ = ⟨x,θ⟩₊` under a symmetric law. Without that factor
/// the bound fails already for the Gaussian limit at `p = 1, q = 3`. Closed form for directions under radial models and
/// their centered linear images, Monte Carlo with `mc = (stream, samples)`
/// otherwise. Passes when `lhs ≤ rhs + 3·SE`.
pub fn khinchine_check(
    model: &MeasureModel,
    functional: &Functional,
    p: f64,
    q: f64,
    mc: Option<(RngStream, usize)>,
) -> Result<KhinchineReport> {
    let r = model.r();
    if !(q < r) {
        return Err(Error::domain("khinchine_check", format!("q = {q} must be below r = {r} (moment diverges)")));
    }
    if !(p > 0.0 && p <= q) {
        return Err(Error::domain("khinchine_check", format!("need 0 < p <= q, got p = {p}, q = {q}")));
    }
    let factor = log_khinchine_factor(q, r)? - log_khinchine_factor(p, r)?;

    if let Functional::Direction(theta) = functional {
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if theta.len() != model.n() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::domain("khinchine_check", "θ must be a unit vector of the model dimension"));
        }
        if let Some(lq) = log_half_moment(model, theta, q)? {
            let lp = log_half_moment(model, theta, p)?.expect("same model kind");
            let lhs = (lq / q).exp();
            let rhs_unnormalized = (factor + lp / p).exp();
            let rhs = (factor + lp / p - std::f64::consts::LN_2 * (1.0 / q - 1.0 / p)).exp();
            let grid = default_p_grid(r, 0.0);
            let mut values = Vec::with_capacity(grid.len());
            for &s in &grid {
                // the p → 0 value is μ(⟨x,θ⟩ > 0) = 1/2
                let v = if s == 0.0 {
                    -std::f64::consts::LN_2
                } else {
                    log_half_moment(model, theta, s)?.expect("same model kind") - s.ln() - log_beta(s, r - s)?
                };
                values.push(v);
            }
            let grid_violation = Some(logconcavity_test(&grid, &values).max_violation);
            return Ok(KhinchineReport {
                p,
                q,
                r,
                lhs,
                rhs,
                rhs_unnormalized,
                unnormalized_holds: lhs <= rhs_unnormalized * (1.0 + 1e-12),
                support_mass: 0.5,
                margin: rhs - lhs,
                std_error: 0.0,
                method: Method::ClosedForm,
                passes: lhs <= rhs * (1.0 + 1e-12),
                grid_violation,
                oracle_defect: None,
            });
        }
    }

    let (stream, samples) = mc.ok_or_else(|| {
        Error::unsupported("khinchine_check", "no closed form for this model/functional; Monte Carlo settings required")
    })?;
    let batch = sample_model(stream, model, samples)?;
    let values: Vec<f64> = batch.rows().map(|x| functional.eval(x)).collect();
    let moment = |s: f64| -> (f64, f64) {
        let pw: Vec<f64> = values.iter().map(|v| v.powf(s)).collect();
        let (m, var) = mean_var(&pw);
        let root = m.powf(1.0 / s);
        (root, (root / (m * s)).abs() * (var / pw.len() as f64).sqrt())
    };
    let support_mass = values.iter().filter(|&&v| v > 0.0).count() as f64 / values.len() as f64;
    let (mq, se_q) = moment(q);
    let (mp, se_p) = moment(p);
    let lhs = mq;
    let rhs_unnormalized = factor.exp() * mp;
    let scale = support_mass.powf(1.0 / q - 1.0 / p);
    let rhs = rhs_unnormalized * scale;
    let std_error = se_q.hypot(factor.exp() * scale * se_p);
    let oracle_defect = match functional {
        Functional::Concave { phi, support_radius } => {
            Some(oracle_midpoint_defect(phi.as_ref(), model.n(), *support_radius, stream.substream(u64::MAX)))
        }
        Functional::Direction(_) => None,
    };
    Ok(KhinchineReport {
        p,
        q,
        r,
        lhs,
        rhs,
        rhs_unnormalized,
        unnormalized_holds: lhs <= rhs_unnormalized + 3.0 * std_error,
        support_mass,
        margin: rhs - lhs,
        std_error,
        method: Method::MonteCarlo,
        passes: lhs <= rhs + 3.0 * std_error,
        grid_violation: None,
        oracle_defect,
    })
}

/// Sharpness witness: for the half-line density `c(1 + c₂t)^{−(1+r)}` and
/// `φ(t) = t`, returns `rhs/lhs − 1` with both moments by quadrature.
pub fn extremal_witness(r: f64, p: f64, q: f64, c2: f64) -> Result<f64> {
    if !(0.0 < p && p <= q && q < r && c2 > 0.0) {
        return Err(Error::domain("extremal_witness", "need 0 < p <= q < r and c2 > 0"));
    }
    let beta = 1.0 + r;
    let log_c = (c2 * r).ln();
    let density = FnProfile::new(move |t: f64| log_c - beta * (c2 * t).ln_1p(), beta, None);
    let cfg = QuadConfig::default();
    let lq = log_mellin_profile(&density, q + 1.0, &cfg)? / q;
    let lp = log_mellin_profile(&density, p + 1.0, &cfg)? / p;
    let factor = log_khinchine_factor(q, r)? - log_khinchine_factor(p, r)?;
    Ok((factor + lp - lq).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_fnr, MarginalProfile, RadialProfile};
    use crate::sampling::{sample_fnr, sample_sphere};
    use crate::quad::log_sum_exp;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn unit_power_law_has_constant_transform() {
        let alpha = 7.5;
        let f = FnProfile::new(move |t: f64| -alpha * t.ln_1p(), alpha, None);
        let h = h_transform(&f, alpha, &default_p_grid(alpha, 0.0), &cfg()).unwrap();
        for l in &h.log_h {
            assert!(l.abs() < 1e-9, "{l}");
        }
        assert!(h.continuity_gap.unwrap() < 1e-8);
    }

    #[test]
    fn scaled_power_law_is_log_affine() {
        let (alpha, m, big_m) = (12.0, 0.3f64, 2.5f64);
        let f = FnProfile::new(move |t: f64| m.ln() - alpha * (t / big_m).ln_1p(), alpha, None);
        let grid = default_p_grid(alpha, 0.0);
        let h = h_transform(&f, alpha, &grid, &cfg()).unwrap();
        for (p, l) in grid.iter().zip(&h.log_h) {
            assert!((l - (m.ln() + p * big_m.ln())).abs() < 1e-9);
        }
        assert!(h.max_violation().max_violation.abs() < 1e-9);
    }

    #[test]
    fn random_convex_power_matches_exact_integral() {
        let mut rng = RngStream::new(40, 0).rng();
        for _ in 0..10 {
            let phi = PiecewiseLinearConvex::random(&mut rng, 6);
            let alpha = 10.0;
            let prof = phi.power_profile(alpha);
            let h = h_transform(&prof, alpha, &default_p_grid(alpha, 0.0), &cfg()).unwrap();
            assert!(h.max_violation().passes(LOGCONCAVITY_TOL), "{:?}", h.max_violation());
            let h1 = h_transform(&prof, alpha, &[1.0], &cfg()).unwrap().log_h[0].exp();
            let oracle = (alpha - 1.0) * phi.integral_of_power(alpha).unwrap();
            assert_relative_eq!(h1, oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn root_means_decrease_when_normalized() {
        let mut rng = RngStream::new(41, 0).rng();
        let phi = PiecewiseLinearConvex::random(&mut rng, 5);
        let alpha = 20.0;
        let f0 = phi.value(0.0);
        let shift = alpha * f0.ln();
        let prof = FnProfile::new(move |t| shift - alpha * phi.value(t).ln(), alpha, None);
        let h = h_transform(&prof, alpha, &default_p_grid(alpha, 0.0), &cfg()).unwrap();
        assert!(h.log_h[0].abs() < 1e-14);
        let roots = h.root_means().unwrap();
        assert!(roots.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9), "{roots:?}");
    }

    #[test]
    fn fnr_and_marginals_pass() {
        let model = make_fnr(6, 8.0).unwrap();
        let prof = model.radial_profile().unwrap();
        let h = h_transform(prof, model.alpha(), &default_p_grid(model.alpha(), 0.0), &cfg()).unwrap();
        assert!(h.max_violation().passes(LOGCONCAVITY_TOL));
        let marg = MarginalProfile::new(&model, 2).unwrap();
        let a = marg.alpha();
        let h = h_transform(&marg, a, &default_p_grid(a, 0.0), &cfg()).unwrap();
        assert!(h.max_violation().passes(LOGCONCAVITY_TOL), "{:?}", h.max_violation());
    }

    #[test]
    fn bimodal_profile_is_detected() {
        let alpha = 10.0;
        let f = FnProfile::new(
            |t: f64| log_sum_exp(&[-t * t, (1e-3f64).ln() - (t - 20.0).powi(2)]),
            f64::INFINITY,
            Some(40.0),
        );
        let h = h_transform(&f, alpha, &default_p_grid(alpha, 0.0), &cfg()).unwrap();
        assert!(!h.max_violation().passes(LOGCONCAVITY_TOL), "{:?}", h.max_violation());
    }

    #[test]
    fn second_difference_arithmetic() {
        let p: Vec<f64> = (0..21).map(|i| i as f64 * 0.05).collect();
        let affine: Vec<f64> = p.iter().map(|x| 0.3 - 2.0 * x).collect();
        assert!(logconcavity_test(&p, &affine).max_violation.abs() < 1e-15);
        let concave: Vec<f64> = p.iter().map(|x| -x * x).collect();
        assert!(logconcavity_test(&p, &concave).max_violation < 0.0);
        let convex: Vec<f64> = p.iter().map(|x| x * x).collect();
        let v = logconcavity_test(&p, &convex);
        assert_relative_eq!(v.max_violation, 2.0 * 0.05 * 0.05, max_relative = 1e-9);
        assert!(!v.passes(LOGCONCAVITY_TOL));
    }

    #[test]
    fn g_transform_slab_examples() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        // segment [0,1], m = 1: ∫t^{q−1}(1−t) = B(q,2), so G ≡ 1
        let seg = FnProfile::new(|t: f64| (1.0 - t).ln(), f64::INFINITY, Some(1.0));
        let g = g_transform(&seg, 1.0, &grid, &cfg()).unwrap();
        assert!(g.log_h.iter().all(|l| l.abs() < 1e-9));
        // unit square, m = 2: B(q,2)/B(q,3) = (q+2)/2
        let g = g_transform(&seg, 2.0, &grid, &cfg()).unwrap();
        for (q, l) in grid.iter().zip(&g.log_h).skip(1) {
            assert_relative_eq!(l.exp(), (q + 2.0) / 2.0, max_relative = 1e-9);
        }
        assert!(g.max_violation().passes(LOGCONCAVITY_TOL));
        // triangle x,y >= 0, x+y <= 1, m = 2: ∫t^{q−1}(1−t)²/2 = B(q,3)/2, so G ≡ 1/2
        let tri = FnProfile::new(|t: f64| 2.0 * (1.0 - t).ln() - std::f64::consts::LN_2, f64::INFINITY, Some(1.0));
        let g = g_transform(&tri, 2.0, &grid, &cfg()).unwrap();
        for (q, l) in grid.iter().zip(&g.log_h) {
            assert!((l + std::f64::consts::LN_2).abs() < 1e-9, "q={q}: {l}");
        }
    }

    #[test]
    fn transforms_reject_bad_grids() {
        let f = FnProfile::new(|t: f64| -5.0 * t.ln_1p(), 5.0, None);
        assert!(h_transform(&f, 5.0, &[5.0], &cfg()).unwrap_err().is_domain());
        assert!(h_transform(&f, 6.0, &[1.0], &cfg()).unwrap_err().is_domain());
        assert!(g_transform(&f, 2.0, &[1.0], &cfg()).unwrap_err().is_domain());
    }

    #[test]
    fn khinchine_equality_at_equal_orders() {
        let model = make_fnr(5, 9.0).unwrap();
        let theta = sample_sphere(&mut RngStream::new(1, 1).rng(), 5);
        let rep = khinchine_check(&model, &Functional::Direction(theta), 2.5, 2.5, None).unwrap();
        assert_relative_eq!(rep.lhs, rep.rhs, max_relative = 1e-14);
        assert!(rep.passes && rep.margin.abs() < 1e-12);
    }

    #[test]
    fn khinchine_half_moment_against_monte_carlo() {
        let model = make_fnr(10, 20.0).unwrap();
        let mut theta = vec![0.0; 10];
        theta[0] = 1.0;
        let f = Functional::Direction(theta.clone());
        let exact = khinchine_check(&model, &f, 1.0, 3.0, None).unwrap();
        assert!(exact.passes && exact.lhs < exact.rhs);
        // without the μ(φ>0) normalization the bound is violated here
        assert!(!exact.unnormalized_holds);
        assert!(exact.grid_violation.unwrap() <= LOGCONCAVITY_TOL);
        let batch = sample_fnr(RngStream::new(42, 0), &model, 400_000).unwrap();
        let plus: Vec<f64> = batch.project(&theta).into_iter().map(|v| v.max(0.0).powi(3)).collect();
        let (m, var) = mean_var(&plus);
        let se = (var / plus.len() as f64).sqrt() / (3.0 * m.powf(2.0 / 3.0));
        assert!((m.cbrt() - exact.lhs).abs() < 3.0 * se, "{} vs {}", m.cbrt(), exact.lhs);
    }

    #[test]
    fn khinchine_linear_image_and_oracle() {
        let base = make_fnr(3, 12.0).unwrap();
        let map = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.0, 1.0, -0.4, 0.1, 0.0, 0.5]);
        let model = MeasureModel::affine(&base, map, DVector::zeros(3)).unwrap();
        let theta = vec![0.6, 0.0, 0.8];
        let f = Functional::Direction(theta.clone());
        let exact = khinchine_check(&model, &f, 1.5, 6.0, None).unwrap();
        assert!(exact.passes);
        let oracle = Functional::Concave {
            phi: Arc::new(move |x: &[f64]| theta.iter().zip(x).map(|(a, b)| a * b).sum()),
            support_radius: 10.0,
        };
        let mc = khinchine_check(&model, &oracle, 1.5, 4.0, Some((RngStream::new(43, 0), 200_000))).unwrap();
        assert_eq!(mc.method, Method::MonteCarlo);
        assert!(mc.passes, "{mc:?}");
        assert!(mc.oracle_defect.unwrap() <= 1e-12);
        let exact4 = khinchine_check(&model, &f, 1.5, 4.0, None).unwrap();
        assert!((mc.lhs - exact4.lhs).abs() < 4.0 * mc.std_error.max(1e-3 * exact4.lhs));
    }

    #[test]
    fn khinchine_rejects_divergent_order() {
        let model = make_fnr(4, 6.0).unwrap();
        let f = Functional::Direction(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(khinchine_check(&model, &f, 1.0, 6.0, None).unwrap_err().is_domain());
    }

    #[test]
    fn extremal_family_is_tight() {
        for &(r, p, q) in &[(10.0, 1.0, 3.0), (5.0, 0.5, 4.0), (40.0, 2.0, 30.0)] {
            let gap = extremal_witness(r, p, q, 0.7).unwrap();
            assert!(gap.abs() <= 1e-2, "{gap}");
            assert!(gap.abs() < 1e-8);
        }
    }

    #[test]
    fn tabulated_profile_transform() {
        let radii: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.02).collect();
        let vals: Vec<f64> = radii.iter().map(|t| (1.0 + t).powf(-9.0)).collect();
        let table = crate::measures::Table::new(radii, &vals).unwrap();
        let prof = RadialProfile::tabulated(9.0, table).unwrap();
        let h = h_transform(&prof, 9.0, &[0.0, 0.9, 1.8, 2.7], &cfg()).unwrap();
        assert!(h.log_h.iter().all(|l| l.is_finite()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_convex_powers_are_log_concave(seed in 0u64..10_000, alpha in 3.0f64..50.0) {
            let mut rng = RngStream::new(seed, 7).rng();
            let phi = PiecewiseLinearConvex::random(&mut rng, 6);
            let h = h_transform(&phi.power_profile(alpha), alpha, &default_p_grid(alpha, 0.0), &cfg()).unwrap();
            prop_assert!(h.max_violation().passes(LOGCONCAVITY_TOL));
        }
    }
}
