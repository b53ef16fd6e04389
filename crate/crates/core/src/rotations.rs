//! The functional `h_{k,p}` on `SO(n)`.
//!
//! For a rotation `U` let `F = U(E₀)` with `E₀ = span(e₁,…,e_k)` and
//! `θ = U e₁`. Then
//! `h_{k,p}(U) = Vol(S^{k−1}) ∫₀^∞ t^{p+k−1} π_F w(tθ) dt`,
//! where `π_F w` is the marginal density of `X` on `F`.
//!
//! For `X = AY + b` with `Y` radial, `P_F X = VᵀAY + Vᵀb` (`V` the first `k`
//! columns of `U`). With the Gram matrix `G = VᵀAAᵀV = LLᵀ` the projection is
//! `L·Y_k + Vᵀb`, `Y_k` the radial `k`-marginal of `Y`, so `π_F w` is the
//! base marginal composed with `z ↦ L⁻¹(z − Vᵀb)`. Without a shift the ray
//! integral factors as `s^{−(p+k)} M(p+k) / det L`, `s = |L⁻¹e₁|`, and the
//! Mellin integral `M` of the marginal is shared by all rotations. Polar
//! coordinates on the quarter plane reduce it to the base profile:
//! `M(a) = Vol(S^{n−k−1}) · ½B(a/2, (n−k)/2) · ∫₀^∞ R^{a+n−k−1} f(R) dR`.

use std::collections::BTreeMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::concavity::{logconcavity_test, LogConcavity};
use crate::error::{Error, Result};
use crate::measures::{log_mellin_profile, MarginalProfile, MeasureModel, ModelKind, Profile1d, RadialProfile};
use crate::moments::{mc_moment, Method};
use crate::quad::{log_mellin, HalfLine, QuadConfig};
use crate::sampling::{haar_rotation, sample_model, RngStream};
use crate::specfun::{log_beta, log_gamma, sphere_area, LogScalar};
use crate::stats::mean_var;

/// Default geodesic step for slope estimates.
pub const LOGLIP_STEP: f64 = 1e-3;

enum BaseMarginal {
    Full(RadialProfile),
    Proj(RadialProfile, MarginalProfile),
}

impl BaseMarginal {
    fn profile(&self) -> &dyn Profile1d {
        match self {
            BaseMarginal::Full(p) => p,
            BaseMarginal::Proj(_, p) => p,
        }
    }
}

/// A model together with the reference pair `(E₀, θ₀)` and cached reductions.
pub struct HkpContext {
    model: MeasureModel,
    n: usize,
    k: usize,
    marginal: BaseMarginal,
    /// `P·S` from the SVD `A = P S Qᵀ`, so that `AAᵀ = (PS)(PS)ᵀ`.
    half_gram: Option<DMatrix<f64>>,
    shift: Option<DVector<f64>>,
    log_area: f64,
    mellin: Mutex<BTreeMap<u64, f64>>,
}

impl std::fmt::Debug for HkpContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HkpContext").field("n", &self.n).field("k", &self.k).finish()
    }
}

impl HkpContext {
    pub fn new(model: &MeasureModel, k: usize) -> Result<Self> {
        let n = model.n();
        if !(1..=n).contains(&k) {
            return Err(Error::domain("HkpContext::new", format!("need 1 <= k <= n, got k={k}, n={n}")));
        }
        let (base, half_gram, shift) = match model.kind() {
            ModelKind::Radial(p) => (p.clone(), None, None),
            ModelKind::AffineRadial(a) => {
                let svd = a.map.clone().svd(true, false);
                let u = svd.u.ok_or_else(|| Error::numeric("HkpContext::new", "SVD failed"))?;
                let ps = u * DMatrix::from_diagonal(&svd.singular_values);
                let shift = a.shift.iter().any(|&s| s != 0.0).then(|| a.shift.clone());
                (a.base.clone(), Some(ps), shift)
            }
            ModelKind::Explicit(_) => {
                return Err(Error::unsupported("HkpContext::new", "needs a radial or affine-radial model"))
            }
        };
        let marginal = if k == n {
            BaseMarginal::Full(base)
        } else {
            BaseMarginal::Proj(base.clone(), MarginalProfile::from_profile(base, n, k)?)
        };
        Ok(HkpContext {
            model: model.clone(),
            n,
            k,
            marginal,
            half_gram,
            shift,
            log_area: sphere_area(k as u32)?.log_abs,
            mellin: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> f64 {
        self.model.r()
    }

    pub fn model(&self) -> &MeasureModel {
        &self.model
    }

    /// Whether `h_{k,p}` is constant on `SO(n)`.
    pub fn is_invariant(&self) -> bool {
        self.half_gram.is_none()
    }

    fn check_order(&self, op: &'static str, p: f64) -> Result<()> {
        let k = self.k as f64;
        if !(p > -k && p < self.r()) {
            return Err(Error::domain(op, format!("need −k < p < r, got p={p}, k={k}, r={}", self.r())));
        }
        Ok(())
    }

    /// `ln ∫₀^∞ t^{p+k−1} m_k(t) dt` for the base marginal profile.
    fn log_base_mellin(&self, p: f64) -> Result<f64> {
        if let Some(v) = self.mellin.lock().unwrap().get(&p.to_bits()) {
            return Ok(*v);
        }
        let a = p + self.k as f64;
        let cfg = QuadConfig::default();
        let v = match &self.marginal {
            BaseMarginal::Full(base) => log_mellin_profile(base, a, &cfg)?,
            BaseMarginal::Proj(base, _) => {
                let j = (self.n - self.k) as f64;
                sphere_area(self.n as u32 - self.k as u32)?.log_abs - std::f64::consts::LN_2
                    + log_beta(a / 2.0, j / 2.0)?
                    + log_mellin_profile(base, a + j, &cfg)?
            }
        };
        self.mellin.lock().unwrap().insert(p.to_bits(), v);
        Ok(v)
    }
}

/// `ln h_{k,p}` for an orthonormal `n × k` frame (`θ` = first column).
pub fn hkp_eval_frame(ctx: &HkpContext, p: f64, frame: &DMatrix<f64>) -> Result<f64> {
    ctx.check_order("hkp_eval", p)?;
    let k = ctx.k;
    let a = p + k as f64;
    let Some(ps) = &ctx.half_gram else {
        return Ok(ctx.log_area + ctx.log_base_mellin(p)?);
    };
    let w = frame.transpose() * ps;
    let gram = &w * w.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::numeric("hkp_eval", "projected Gram matrix is not positive definite"))?;
    let l = chol.l();
    let log_det_l: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
    let e1 = DVector::from_fn(k, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let inv_e1 = l.solve_lower_triangular(&e1).ok_or_else(|| Error::numeric("hkp_eval", "singular Gram factor"))?;
    match &ctx.shift {
        None => Ok(ctx.log_area + ctx.log_base_mellin(p)? - a * inv_e1.norm().ln() - log_det_l),
        Some(b) => {
            let c = frame.transpose() * b;
            let inv_c = l.solve_lower_triangular(&c).ok_or_else(|| Error::numeric("hkp_eval", "singular Gram factor"))?;
            let prof = ctx.marginal.profile();
            let lm = log_mellin(
                |t: f64| prof.log_value((&inv_e1 * t - &inv_c).norm()),
                a,
                HalfLine { decay: prof.decay(), support: None },
                &QuadConfig::default(),
            )?;
            Ok(ctx.log_area + lm - log_det_l)
        }
    }
}

/// `h_{k,p}(U)` for a rotation `U`.
pub fn hkp_eval(ctx: &HkpContext, p: f64, u: &DMatrix<f64>) -> Result<LogScalar> {
    if u.nrows() != ctx.n || u.ncols() < ctx.k {
        return Err(Error::domain("hkp_eval", "rotation has the wrong shape"));
    }
    Ok(LogScalar::from_ln(hkp_eval_frame(ctx, p, &u.columns(0, ctx.k).into_owned())?))
}

/// `ln [Γ((p+n)/2)Γ(k/2) / (Γ(n/2)Γ((p+k)/2))]`.
pub fn log_polar_factor(n: usize, k: usize, p: f64) -> Result<f64> {
    let (n, k) = (n as f64, k as f64);
    Ok(log_gamma((p + n) / 2.0)? + log_gamma(k / 2.0)? - log_gamma(n / 2.0)? - log_gamma((p + k) / 2.0)?)
}

/// `ln h_{k,p}(Uᵢ)` over `count` Haar rotations, one substream per rotation.
pub fn haar_log_h(ctx: &HkpContext, p: f64, count: usize, stream: RngStream) -> Result<Vec<f64>> {
    ctx.check_order("haar_log_h", p)?;
    if ctx.is_invariant() {
        let v = hkp_eval_frame(ctx, p, &DMatrix::identity(ctx.n, ctx.k))?;
        return Ok(vec![v; count]);
    }
    ctx.log_base_mellin(p)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let u = haar_rotation(&mut stream.substream(i as u64).rng(), ctx.n);
            hkp_eval_frame(ctx, p, &u.columns(0, ctx.k).into_owned())
        })
        .collect()
}

/// Both sides of `E|X|^p = Γ((p+n)/2)Γ(k/2)/(Γ(n/2)Γ((p+k)/2)) · E_U h_{k,p}(U)`
/// on the moment-root scale `(·)^{1/p}` (plain scale at `p = 0`).
#[derive(Clone, Debug, Serialize)]
pub struct PolarMomentReport {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub lhs_method: Method,
    pub rhs: f64,
    pub rhs_std_error: f64,
    pub rotations: usize,
    pub rel_error: f64,
    pub passes: bool,
}

/// Relative tolerance of the exact comparison for rotation-invariant models.
pub const POLAR_EXACT_TOL: f64 = 1e-6;

/// Checks the polar moment identity. Rotation-invariant models use a single
/// evaluation and the closed-form moment; affine images average over
/// `rotations` Haar draws and compare with a Monte Carlo moment of `samples`
/// points, passing within 3 combined standard errors.
pub fn polar_moment_check(
    ctx: &HkpContext,
    p: f64,
    rotations: usize,
    samples: usize,
    stream: RngStream,
) -> Result<PolarMomentReport> {
    ctx.check_order("polar_moment_check", p)?;
    let factor = log_polar_factor(ctx.n, ctx.k, p)?;
    let root = |ln_m: f64| if p == 0.0 { ln_m.exp() } else { (ln_m / p).exp() };
    if ctx.is_invariant() {
        let lhs = if p == 0.0 { 1.0 } else { root(ctx.model.log_abs_moment(p)? - ctx.model.log_abs_moment(0.0)?) };
        let rhs = root(factor + hkp_eval_frame(ctx, p, &DMatrix::identity(ctx.n, ctx.k))?);
        let rel_error = (rhs / lhs - 1.0).abs();
        return Ok(PolarMomentReport {
            n: ctx.n,
            k: ctx.k,
            p,
            lhs,
            lhs_std_error: 0.0,
            lhs_method: Method::ClosedForm,
            rhs,
            rhs_std_error: 0.0,
            rotations: 1,
            rel_error,
            passes: rel_error <= POLAR_EXACT_TOL,
        });
    }
    let hs: Vec<f64> = haar_log_h(ctx, p, rotations, stream.substream(0))?.into_iter().map(f64::exp).collect();
    let (mean_h, var_h) = mean_var(&hs);
    let se_mean = (var_h / hs.len() as f64).sqrt();
    let rhs = root(factor + mean_h.ln());
    // d(m^{1/p}) = m^{1/p} dm / (p m)
    let rhs_std_error = if p == 0.0 { factor.exp() * se_mean } else { (rhs * se_mean / (p * mean_h)).abs() };
    let (lhs, lhs_std_error) = if p == 0.0 {
        (1.0, 0.0)
    } else {
        let rep = mc_moment(&sample_model(stream.substream(1), &ctx.model, samples)?, p)?;
        (rep.value, rep.std_error)
    };
    let se = lhs_std_error.hypot(rhs_std_error);
    Ok(PolarMomentReport {
        n: ctx.n,
        k: ctx.k,
        p,
        lhs,
        lhs_std_error,
        lhs_method: Method::MonteCarlo,
        rhs,
        rhs_std_error,
        rotations,
        rel_error: (rhs / lhs - 1.0).abs(),
        passes: (rhs - lhs).abs() <= 3.0 * se,
    })
}

/// `ln h_{k,p}(U) − ln B(p+k, r−p)` over a grid of `p`.
pub fn hkp_normalized_profile(ctx: &HkpContext, u: &DMatrix<f64>, p_grid: &[f64]) -> Result<Vec<f64>> {
    let k = ctx.k as f64;
    let r = ctx.r();
    if p_grid.iter().any(|&p| p < -k + 1.0 || p >= r) {
        return Err(Error::domain("hkp_logconcavity_check", format!("grid must lie in [{}, {r})", 1.0 - k)));
    }
    let frame = u.columns(0, ctx.k).into_owned();
    p_grid
        .par_iter()
        .map(|&p| Ok(hkp_eval_frame(ctx, p, &frame)? - log_beta(p + k, r - p)?))
        .collect()
}

/// Log-concavity of `p ↦ h_{k,p}(U) / B(p+k, r−p)` on the grid.
pub fn hkp_logconcavity_check(ctx: &HkpContext, u: &DMatrix<f64>, p_grid: &[f64]) -> Result<LogConcavity> {
    let vals = hkp_normalized_profile(ctx, u, p_grid)?;
    Ok(logconcavity_test(p_grid, &vals))
}

/// `n_points` equally spaced orders in `[1 − k, r − margin]`.
pub fn hkp_p_grid(k: usize, r: f64, margin: f64, n_points: usize) -> Vec<f64> {
    let lo = 1.0 - k as f64;
    let hi = r - margin;
    (0..n_points).map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64).collect()
}

/// `Ξ_{ij} = (e_i e_jᵀ − e_j e_iᵀ)/√2`, unit Frobenius norm.
fn plane_generator(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut xi = DMatrix::zeros(n, n);
    xi[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
    xi[(j, i)] = -std::f64::consts::FRAC_1_SQRT_2;
    xi
}

/// First `k` columns of `U·exp(t Ξ_{ij})`: a rotation of columns `i, j` by `t/√2`.
fn plane_step(u: &DMatrix<f64>, k: usize, i: usize, j: usize, t: f64) -> DMatrix<f64> {
    let (s, c) = (t * std::f64::consts::FRAC_1_SQRT_2).sin_cos();
    let mut frame = u.columns(0, k).into_owned();
    let (ui, uj) = (u.column(i), u.column(j));
    frame.set_column(i, &(ui * c - uj * s));
    if j < k {
        frame.set_column(j, &(uj * c + ui * s));
    }
    frame
}

/// Steepest unit direction of `ln h` at `U` from forward differences along
/// the planes that move the first `k` columns; `None` when flat.
fn steepest_direction(ctx: &HkpContext, p: f64, u: &DMatrix<f64>, h0: f64, t: f64) -> Result<Option<DMatrix<f64>>> {
    let (n, k) = (ctx.n, ctx.k);
    let mut grad = DMatrix::zeros(n, n);
    for i in 0..k {
        for j in i + 1..n {
            let d = (hkp_eval_frame(ctx, p, &plane_step(u, k, i, j, t))? - h0) / t;
            grad += plane_generator(n, i, j) * d;
        }
    }
    let norm = grad.norm();
    Ok((norm > 0.0).then(|| grad / norm))
}

/// Empirical log-Lipschitz slope.
#[derive(Clone, Debug, Serialize)]
pub struct LogLipReport {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub pairs: usize,
    pub step: f64,
    /// `max |ln h(U e^{tΞ}) − ln h(U)| / t` over the sampled pairs.
    pub l_hat: f64,
    /// The same maximum at step `t/2`.
    pub l_hat_half: f64,
    /// `max |slope(t) − slope(t/2)|` over pairs; small when `t` resolves the derivative.
    pub richardson_gap: f64,
}

/// Empirical lower bound on the log-Lipschitz constant of `U ↦ h_{k,p}(U)`
/// for the Frobenius metric. Each of `pairs` Haar rotations is paired with
/// its steepest unit skew direction, and the slope is the finite geodesic
/// step `|ln h(U e^{tΞ}) − ln h(U)| / t`.
pub fn loglip_estimate(ctx: &HkpContext, p: f64, pairs: usize, step: f64, stream: RngStream) -> Result<LogLipReport> {
    ctx.check_order("loglip_estimate", p)?;
    if !(step > 0.0) {
        return Err(Error::domain("loglip_estimate", "step must be positive"));
    }
    let mut report = LogLipReport {
        n: ctx.n,
        k: ctx.k,
        p,
        pairs,
        step,
        l_hat: 0.0,
        l_hat_half: 0.0,
        richardson_gap: 0.0,
    };
    if ctx.is_invariant() {
        return Ok(report);
    }
    ctx.log_base_mellin(p)?;
    let k = ctx.k;
    let slopes = (0..pairs)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = stream.substream(i as u64).rng();
            let u = haar_rotation(&mut rng, ctx.n);
            let h0 = hkp_eval_frame(ctx, p, &u.columns(0, k).into_owned())?;
            let Some(xi) = steepest_direction(ctx, p, &u, h0, step)? else {
                return Ok((0.0, 0.0));
            };
            let slope = |t: f64| -> Result<f64> {
                let moved = &u * (&xi * t).exp().columns(0, k);
                Ok((hkp_eval_frame(ctx, p, &moved)? - h0).abs() / t)
            };
            Ok((slope(step)?, slope(step / 2.0)?))
        })
        .collect::<Result<Vec<_>>>()?;
    for (a, b) in slopes {
        report.l_hat = report.l_hat.max(a);
        report.l_hat_half = report.l_hat_half.max(b);
        report.richardson_gap = report.richardson_gap.max((a - b).abs());
    }
    Ok(report)
}

/// `E_U h² / (E_U h)²` against `exp(ĉ L̂² / n)`.
#[derive(Clone, Debug, Serialize)]
pub struct ReverseHolderReport {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub rotations: usize,
    pub mean_h: f64,
    pub mean_h2: f64,
    pub ratio: f64,
    pub l_hat: f64,
    pub c_hat: f64,
    pub bound: f64,
    /// `ln bound − ln ratio`; nonnegative on a pass.
    pub margin: f64,
    pub passes: bool,
}

impl ReverseHolderReport {
    /// Smallest `ĉ` for which this run passes.
    pub fn required_c(&self) -> f64 {
        if self.ratio <= 1.0 {
            0.0
        } else if self.l_hat == 0.0 {
            f64::INFINITY
        } else {
            self.n as f64 * self.ratio.ln() / (self.l_hat * self.l_hat)
        }
    }
}

/// Empirical reverse Hölder inequality for `h_{k,p}` under Haar measure.
pub fn reverse_holder_check(
    ctx: &HkpContext,
    p: f64,
    rotations: usize,
    lip_pairs: usize,
    c_hat: f64,
    stream: RngStream,
) -> Result<ReverseHolderReport> {
    if rotations < 2 {
        return Err(Error::domain("reverse_holder_check", "need at least two rotations"));
    }
    let ln_h = haar_log_h(ctx, p, rotations, stream.substream(0))?;
    // rescale before exponentiating; the ratio is scale-free
    let top = ln_h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hs: Vec<f64> = ln_h.iter().map(|l| (l - top).exp()).collect();
    let (m1, _) = mean_var(&hs);
    let sq: Vec<f64> = hs.iter().map(|h| h * h).collect();
    let (m2, _) = mean_var(&sq);
    let ratio = (m2 / (m1 * m1)).max(1.0);
    let lip = loglip_estimate(ctx, p, lip_pairs, LOGLIP_STEP, stream.substream(1))?;
    let log_bound = c_hat * lip.l_hat * lip.l_hat / ctx.n as f64;
    let margin = log_bound - ratio.ln();
    Ok(ReverseHolderReport {
        n: ctx.n,
        k: ctx.k,
        p,
        rotations,
        mean_h: (m1.ln() + top).exp(),
        mean_h2: (m2.ln() + 2.0 * top).exp(),
        ratio,
        l_hat: lip.l_hat,
        c_hat,
        bound: log_bound.exp(),
        margin,
        passes: margin >= -1e-12,
    })
}

/// `diag(condition, 1, …, 1)`.
pub fn stretch_map(n: usize, condition: f64) -> DMatrix<f64> {
    let mut a = DMatrix::identity(n, n);
    a[(0, 0)] = condition;
    a
}

/// One point of a slope-envelope grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LipGridPoint {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub condition: f64,
}

/// `L̂ / (max(k,p)² · cond)` at a grid point, for `f_{n,r}` stretched by
/// `diag(cond, 1, …, 1)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LipGridValue {
    pub point: LipGridPoint,
    pub l_hat: f64,
    pub envelope_ratio: f64,
}

/// Slope ratios over a grid; `r` is shared by all points.
pub fn loglip_grid(points: &[LipGridPoint], r: f64, pairs: usize, stream: RngStream) -> Result<Vec<LipGridValue>> {
    points
        .iter()
        .enumerate()
        .map(|(i, pt)| {
            let base = crate::measures::make_fnr(pt.n, r)?;
            let model = MeasureModel::affine(&base, stretch_map(pt.n, pt.condition), DVector::zeros(pt.n))?;
            let ctx = HkpContext::new(&model, pt.k)?;
            let rep = loglip_estimate(&ctx, pt.p, pairs, LOGLIP_STEP, stream.substream(i as u64))?;
            let scale = (pt.k as f64).max(pt.p).powi(2) * pt.condition;
            Ok(LipGridValue { point: *pt, l_hat: rep.l_hat, envelope_ratio: rep.l_hat / scale })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_fnr, marginal_density};
    use crate::quad::integrate;
    use approx::assert_relative_eq;

    fn stretched(n: usize, r: f64, cond: f64) -> MeasureModel {
        MeasureModel::affine(&make_fnr(n, r).unwrap(), stretch_map(n, cond), DVector::zeros(n)).unwrap()
    }

    #[test]
    fn radial_h_is_rotation_invariant() {
        let ctx = HkpContext::new(&make_fnr(6, 12.0).unwrap(), 2).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let u1 = haar_rotation(&mut rng, 6);
        let u2 = haar_rotation(&mut rng, 6);
        let a = hkp_eval(&ctx, 1.5, &u1).unwrap().ln().unwrap();
        let b = hkp_eval(&ctx, 1.5, &u2).unwrap().ln().unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
        // h_{k,0} is the mass of the marginal
        assert_relative_eq!(hkp_eval(&ctx, 0.0, &u1).unwrap().to_f64(), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn marginal_scaling_under_stretch() {
        // k = 1: swapping e₁, e₂ moves the line off the stretched axis; ratio cond^p
        let ctx = HkpContext::new(&stretched(5, 9.0, 2.0), 1).unwrap();
        let id = DMatrix::identity(5, 5);
        let mut swap = DMatrix::identity(5, 5);
        swap.swap_columns(0, 1);
        swap.column_mut(2).neg_mut();
        for p in [-0.5, 1.0, 3.0] {
            let a = hkp_eval(&ctx, p, &id).unwrap().ln().unwrap();
            let b = hkp_eval(&ctx, p, &swap).unwrap().ln().unwrap();
            assert_relative_eq!(a - b, p * 2f64.ln(), max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn reduction_matches_direct_marginal_integral() {
        // n = 3, k = 2: integrate w over the normal line of F directly
        let model = MeasureModel::affine(
            &make_fnr(3, 8.0).unwrap(),
            DMatrix::from_row_slice(3, 3, &[1.6, 0.3, 0.0, -0.2, 0.9, 0.4, 0.1, 0.0, 0.7]),
            DVector::from_column_slice(&[0.2, -0.1, 0.05]),
        )
        .unwrap();
        let ctx = HkpContext::new(&model, 2).unwrap();
        let u = haar_rotation(&mut RngStream::new(3, 0).rng(), 3);
        let (v1, v2, nrm) = (u.column(0).into_owned(), u.column(1).into_owned(), u.column(2).into_owned());
        let pi = |t: f64| {
            let base = &v1 * t;
            let f = |s: f64| {
                let x = &base + &nrm * s;
                model.log_density(x.as_slice()).exp()
            };
            let cfg = QuadConfig::with_rel_tol(1e-11);
            // tan substitution over ℝ
            integrate(|z: f64| f(z.tan()) / z.cos().powi(2), -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, &cfg)
                .unwrap()
                .value
        };
        let _ = v2;
        let p = 1.0;
        let direct = integrate(
            |z: f64| {
                let t = z / (1.0 - z);
                t.powf(p + 1.0) * pi(t) / (1.0 - z).powi(2)
            },
            0.0,
            1.0,
            &QuadConfig::with_rel_tol(1e-9),
        )
        .unwrap()
        .value
            * 2.0
            * std::f64::consts::PI;
        let reduced = hkp_eval(&ctx, p, &u).unwrap().to_f64();
        assert_relative_eq!(reduced, direct, max_relative = 1e-6);
    }

    #[test]
    fn radial_marginal_matches_measures_module() {
        let model = make_fnr(5, 10.0).unwrap();
        let ctx = HkpContext::new(&model, 2).unwrap();
        let direct = marginal_density(&model, 2, &[0.3, 0.4]).unwrap().ln().unwrap();
        assert_relative_eq!(ctx.marginal.profile().log_value(0.5), direct, max_relative = 1e-12);
    }

    #[test]
    fn reduced_mellin_matches_nested_quadrature() {
        let ctx = HkpContext::new(&stretched(6, 9.0, 2.0), 2).unwrap();
        for p in [-0.5, 1.0, 4.0] {
            let nested = log_mellin_profile(ctx.marginal.profile(), p + 2.0, &QuadConfig::default()).unwrap();
            assert_relative_eq!(ctx.log_base_mellin(p).unwrap(), nested, max_relative = 1e-9);
        }
    }

    #[test]
    fn polar_identity_radial_grid() {
        let model = make_fnr(10, 20.0).unwrap();
        for k in 1..=3 {
            let ctx = HkpContext::new(&model, k).unwrap();
            for p in [-1.0, 1.0, 2.0, 3.5] {
                if p <= -(k as f64) {
                    continue;
                }
                let rep = polar_moment_check(&ctx, p, 1, 0, RngStream::new(0, 0)).unwrap();
                assert!(rep.passes, "{rep:?}");
            }
        }
        let ctx = HkpContext::new(&model, 3).unwrap();
        let rep = polar_moment_check(&ctx, 2.0, 1, 0, RngStream::new(0, 0)).unwrap();
        // E|X|² = n for f_{n,r}
        assert_relative_eq!(rep.lhs * rep.lhs, 10.0, max_relative = 1e-10);
        assert!(rep.rel_error < 1e-8);
    }

    #[test]
    fn polar_identity_affine_monte_carlo() {
        let ctx = HkpContext::new(&stretched(10, 20.0, 2.0), 2).unwrap();
        let rep = polar_moment_check(&ctx, 3.0, 2000, 200_000, RngStream::new(4, 0)).unwrap();
        assert!(rep.passes, "{rep:?}");
        let rep0 = polar_moment_check(&ctx, 0.0, 2000, 0, RngStream::new(5, 0)).unwrap();
        assert!(rep0.passes, "{rep0:?}");
    }

    #[test]
    fn normalized_profile_is_log_concave() {
        let radial = HkpContext::new(&make_fnr(8, 12.0).unwrap(), 2).unwrap();
        let grid = hkp_p_grid(2, 12.0, 0.5, 40);
        let id = DMatrix::identity(8, 8);
        assert!(hkp_logconcavity_check(&radial, &id, &grid).unwrap().passes(1e-6));

        let affine = HkpContext::new(&stretched(8, 12.0, 3.0), 2).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        for _ in 0..5 {
            let u = haar_rotation(&mut rng, 8);
            let lc = hkp_logconcavity_check(&affine, &u, &grid).unwrap();
            assert!(lc.passes(1e-6), "{lc:?}");
        }

        let mut vals = hkp_normalized_profile(&radial, &id, &grid).unwrap();
        vals[20] -= 0.05;
        assert!(!logconcavity_test(&grid, &vals).passes(1e-6));
        assert!(hkp_logconcavity_check(&radial, &id, &[-1.5, 0.0, 1.0]).unwrap_err().is_domain());
    }

    #[test]
    fn loglip_examples() {
        let radial = HkpContext::new(&make_fnr(10, 20.0).unwrap(), 1).unwrap();
        assert_eq!(loglip_estimate(&radial, 2.0, 10, LOGLIP_STEP, RngStream::new(0, 0)).unwrap().l_hat, 0.0);

        let ctx = HkpContext::new(&stretched(10, 20.0, 2.0), 1).unwrap();
        let rep = loglip_estimate(&ctx, 2.0, 200, LOGLIP_STEP, RngStream::new(7, 0)).unwrap();
        assert!(rep.l_hat > 0.0 && rep.l_hat.is_finite());
        assert!(rep.richardson_gap < 0.05 * rep.l_hat, "{rep:?}");
        // k = 1, p = 0: h ≡ 1, the line marginal always has unit mass
        let flat = loglip_estimate(&ctx, 0.0, 20, LOGLIP_STEP, RngStream::new(7, 0)).unwrap();
        assert!(flat.l_hat < 1e-8, "{flat:?}");
    }

    #[test]
    fn loglip_matches_stretched_line_constant() {
        // k = 1: ln h = const + (p/2) ln(1 + (c²−1)v₁²); along a unit Frobenius
        // geodesic |v′| ≤ 1/√2, so L = p(c² − 1)/(2√2 c)
        let (c, p) = (4.0, 1.5);
        let exact = p * (c * c - 1.0) / (2.0 * std::f64::consts::SQRT_2 * c);
        let ctx = HkpContext::new(&stretched(6, 10.0, c), 1).unwrap();
        let rep = loglip_estimate(&ctx, p, 300, LOGLIP_STEP, RngStream::new(8, 0)).unwrap();
        assert!(rep.l_hat <= exact * (1.0 + 1e-3), "{rep:?} vs {exact}");
        assert!(rep.l_hat >= 0.98 * exact, "{rep:?} vs {exact}");
    }

    #[test]
    fn loglip_is_deterministic() {
        let ctx = HkpContext::new(&stretched(6, 10.0, 3.0), 2).unwrap();
        let a = loglip_estimate(&ctx, 2.0, 30, LOGLIP_STEP, RngStream::new(9, 2)).unwrap();
        let b = loglip_estimate(&ctx, 2.0, 30, LOGLIP_STEP, RngStream::new(9, 2)).unwrap();
        assert_eq!(a.l_hat, b.l_hat);
    }

    #[test]
    fn reverse_holder_examples() {
        let radial = HkpContext::new(&make_fnr(20, 10.0).unwrap(), 2).unwrap();
        let rep = reverse_holder_check(&radial, 3.0, 500, 10, 1.0, RngStream::new(0, 0)).unwrap();
        assert_eq!(rep.ratio, 1.0);
        assert!(rep.passes && rep.margin == 0.0);

        let mut ratios = Vec::new();
        for cond in [1.0, 2.0, 4.0] {
            let ctx = HkpContext::new(&stretched(20, 10.0, cond), 2).unwrap();
            let rep = reverse_holder_check(&ctx, 3.0, 500, 50, 1.0, RngStream::new(1, 0)).unwrap();
            ratios.push(rep.ratio);
        }
        assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2], "{ratios:?}");
    }
}
