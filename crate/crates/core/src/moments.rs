//! Moment functionals of `|X|`: closed-form and Monte Carlo moments, the
//! moment defect `α_p`, its large-`n` limit, the thin-shell bound evaluator,
//! the empirical thin-shell width and the marginal Kolmogorov distance.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{fnr_scale, MeasureModel, ModelSpec};
use crate::sampling::{sample_model, RngStream, SampleBatch};
use crate::specfun::log_gamma_ratio;
use crate::stats::{ks_statistic, mean_var, normal_cdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// `(E|X|^p)^{1/p}` with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub p: f64,
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub samples: usize,
    /// Set when `p` is so close to the integrability edge that `|X|^p` has
    /// infinite variance (`p ≥ r/2` or `p ≤ −n/2`).
    pub heavy_tail: bool,
}

fn check_order(op: &'static str, n: f64, r: f64, p: f64) -> Result<()> {
    if p == 0.0 || !(p > -n && p < r) {
        return Err(Error::domain(op, format!("order p = {p} must lie in (−{n}, {r}) \\ {{0}}")));
    }
    Ok(())
}

/// `ln (E|X|^p)^{1/p} = −ln c₂ + (1/p) ln(B(n+p, r−p)/B(n, r))` for `f_{n,r}`.
pub fn log_moment_fnr(n: usize, r: f64, p: f64) -> Result<f64> {
    let nf = n as f64;
    check_order("exact_moment_fnr", nf, r, p)?;
    if !(r > 2.0) {
        return Err(Error::domain("exact_moment_fnr", format!("r = {r} must exceed 2")));
    }
    let ratio = log_gamma_ratio(nf, p)? + log_gamma_ratio(r, -p)?;
    Ok(ratio / p - fnr_scale(n, r).ln())
}

/// Closed-form `(E|X|^p)^{1/p}` for the isotropic `f_{n,r}`.
pub fn exact_moment_fnr(n: usize, r: f64, p: f64) -> Result<MomentReport> {
    Ok(MomentReport {
        p,
        value: log_moment_fnr(n, r, p)?.exp(),
        std_error: 0.0,
        method: Method::ClosedForm,
        samples: 0,
        heavy_tail: false,
    })
}

/// `ln (E|X|^p)^{1/p}` of a radial model by closed form or quadrature.
pub fn log_moment_radial(model: &MeasureModel, p: f64) -> Result<(f64, Method)> {
    let profile = model
        .radial_profile()
        .ok_or_else(|| Error::unsupported("moment", "closed form needs a radial model"))?;
    check_order("moment", model.n() as f64, model.r(), p)?;
    let method = match profile.kind() {
        crate::measures::ProfileKind::PowerLaw { .. } => Method::ClosedForm,
        crate::measures::ProfileKind::Tabulated(_) => Method::Quadrature,
    };
    if let (Method::ClosedForm, Some(ModelSpec::Fnr { n, r })) = (method, model.spec()) {
        return Ok((log_moment_fnr(*n, *r, p)?, method));
    }
    let lm = model.log_abs_moment(p)? - model.log_abs_moment(0.0)?;
    Ok((lm / p, method))
}

/// Monte Carlo `(mean |xᵢ|^p)^{1/p}` with a delta-method standard error.
/// `range = (n, r)` sets the heavy-tail flag.
pub fn mc_moment_norms(norms: &[f64], p: f64, range: Option<(f64, f64)>) -> Result<MomentReport> {
    if p == 0.0 || norms.is_empty() {
        return Err(Error::domain("mc_moment", "need p != 0 and a nonempty batch"));
    }
    if let Some((n, r)) = range {
        check_order("mc_moment", n, r, p)?;
    }
    let powered: Vec<f64> = norms.iter().map(|t| t.powf(p)).collect();
    let (m, v) = mean_var(&powered);
    let count = norms.len();
    let se_mean = (v / count as f64).sqrt();
    let value = m.powf(1.0 / p);
    // d(m^{1/p})/dm = m^{1/p − 1} / p
    let std_error = (value / (m * p)).abs() * se_mean;
    let heavy_tail = range.is_some_and(|(n, r)| p >= r / 2.0 || p <= -n / 2.0);
    Ok(MomentReport { p, value, std_error, method: Method::MonteCarlo, samples: count, heavy_tail })
}

fn spec_range(spec: Option<&ModelSpec>) -> Option<(f64, f64)> {
    match spec {
        Some(ModelSpec::Fnr { n, r }) | Some(ModelSpec::AffineRadial { n, r, .. }) => Some((*n as f64, *r)),
        None => None,
    }
}

/// [`mc_moment_norms`] on the norms of a batch.
pub fn mc_moment(batch: &SampleBatch, p: f64) -> Result<MomentReport> {
    mc_moment_norms(&batch.norms(), p, spec_range(batch.model.as_ref()))
}

/// How `α_p` obtains its moments.
#[derive(Clone, Copy, Debug)]
pub enum MomentMethod {
    /// Closed form or quadrature; radial models only.
    Exact,
    MonteCarlo { stream: RngStream, samples: usize },
}

/// `α_p(X) = |(E|X|^p)^{1/p} / (E|X|²)^{1/2} − 1|`.
pub fn alpha_p(model: &MeasureModel, p: f64, method: MomentMethod) -> Result<f64> {
    check_order("alpha_p", model.n() as f64, model.r(), p)?;
    let log_ratio = match method {
        MomentMethod::Exact => log_moment_radial(model, p)?.0 - log_moment_radial(model, 2.0)?.0,
        MomentMethod::MonteCarlo { stream, samples } => {
            let norms = sample_model(stream, model, samples)?.norms();
            let mp = mc_moment_norms(&norms, p, None)?.value;
            let m2 = mc_moment_norms(&norms, 2.0, None)?.value;
            (mp / m2).ln()
        }
    };
    Ok(log_ratio.exp_m1().abs())
}

/// `α_p` of `f_{n,r}` in closed form.
pub fn alpha_p_fnr(n: usize, r: f64, p: f64) -> Result<f64> {
    Ok((log_moment_fnr(n, r, p)? - log_moment_fnr(n, r, 2.0)?).exp_m1().abs())
}

/// `lim_{n→∞} α_p(f_{n,r}) = (Γ(r−p)/Γ(r))^{1/p} (Γ(r−2)/Γ(r))^{−1/2} − 1`.
pub fn alpha_limit(r: f64, p: f64) -> Result<f64> {
    if !(p > 2.0 && p < r) {
        return Err(Error::domain("alpha_limit", format!("need 2 < p < r, got p = {p}, r = {r}")));
    }
    Ok((log_gamma_ratio(r, -p)? / p - log_gamma_ratio(r, -2.0)? / 2.0).exp_m1())
}

/// `C|p−2|/r + (C|p−2| cond^{1/3} / n^{1/3})^{3/5}`, defined for
/// `0 < |p| ≤ range_c · min(r, (n/cond)^{1/3})`.
pub fn theorem_bound(n: f64, r: f64, p: f64, big_c: f64, condition: f64, range_c: f64) -> Result<f64> {
    if !(n >= 1.0 && r > 2.0 && big_c >= 0.0 && condition >= 1.0 && range_c > 0.0) {
        return Err(Error::domain(
            "theorem_bound",
            "need n >= 1, r > 2, C >= 0, condition >= 1, range constant > 0",
        ));
    }
    if p == 0.0 {
        return Err(Error::domain("theorem_bound", "constraint 0 < |p| violated"));
    }
    if p.abs() > range_c * r {
        return Err(Error::domain("theorem_bound", format!("constraint |p| <= c·r violated ({p} > {})", range_c * r)));
    }
    let dim_cap = range_c * (n / condition).cbrt();
    if p.abs() > dim_cap {
        return Err(Error::domain(
            "theorem_bound",
            format!("constraint |p| <= c·(n/cond)^(1/3) violated ({p} > {dim_cap})"),
        ));
    }
    let q = big_c * (p - 2.0).abs();
    Ok(q / r + (q * condition.cbrt() / n.cbrt()).powf(0.6))
}

/// Smallest `C` with `α_p(f_{n,r}) ≤ theorem_bound(n, r, p, C)` at one point.
pub fn theorem_c_at(n: usize, r: f64, p: f64) -> Result<f64> {
    let alpha = alpha_p_fnr(n, r, p)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let rhs = |c: f64| {
        let q = c * (p - 2.0).abs();
        q / r + (q / nf.cbrt()).powf(0.6)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while rhs(hi) < alpha {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::numeric("theorem_c_at", "no finite constant found"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rhs(mid) >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Result of fitting the bound constant over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremFit {
    pub big_c: f64,
    /// Grid point attaining `big_c`.
    pub argmax: (usize, f64, f64),
    /// Points satisfying the range constraint.
    pub points_used: usize,
}

/// Smallest single `C` over the admissible part of `ns × rs × ps`.
pub fn fit_theorem_c(ns: &[usize], rs: &[f64], ps: &[f64], range_c: f64) -> Result<TheoremFit> {
    let mut fit = TheoremFit { big_c: 0.0, argmax: (0, 0.0, 0.0), points_used: 0 };
    for &n in ns {
        for &r in rs {
            for &p in ps {
                if p > range_c * r.min((n as f64).cbrt()) {
                    continue;
                }
                fit.points_used += 1;
                let c = theorem_c_at(n, r, p)?;
                if c > fit.big_c {
                    fit.big_c = c;
                    fit.argmax = (n, r, p);
                }
            }
        }
    }
    Ok(fit)
}

/// Empirical thin-shell width.
#[derive(Clone, Debug, Serialize)]
pub struct ThinShellReport {
    pub epsilon: f64,
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
    /// Sorted deviations `||Xᵢ|/√n − 1|`.
    #[serde(skip)]
    pub deviations: Vec<f64>,
}

/// Standard errors used for the binomial bracket.
pub const BRACKET_Z: f64 = 3.0;

/// `inf{ε > 0 : level(ε) ≤ ε}` where `level` is a function of the empirical
/// tail `Ĝ(ε) = #{dᵢ ≥ ε}/N` (left-continuous, nonincreasing).
fn fixed_point(sorted: &[f64], level: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len();
    // On (d_(i−1), d_(i)] the tail is (N−i)/N.
    for i in 0..=n {
        let prev = if i == 0 { 0.0 } else { sorted[i - 1] };
        let next = if i == n { f64::INFINITY } else { sorted[i] };
        let g = level((n - i) as f64 / n as f64);
        let eps = prev.max(g);
        if eps <= next {
            return eps;
        }
    }
    unreachable!("the last cell always contains the fixed point")
}

/// `ε̂` from `|Xᵢ|` of a model with `E|X|² = n`.
pub fn epsilon_from_norms(norms: &[f64], n: usize) -> ThinShellReport {
    let root = (n as f64).sqrt();
    let mut deviations: Vec<f64> = norms.iter().map(|t| (t / root - 1.0).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let count = deviations.len() as f64;
    let se = |g: f64| BRACKET_Z * (g * (1.0 - g) / count).sqrt();
    let epsilon = fixed_point(&deviations, |g| g);
    let lower = fixed_point(&deviations, |g| (g - se(g)).max(0.0));
    let upper = fixed_point(&deviations, |g| (g + se(g)).min(1.0));
    ThinShellReport { epsilon, lower, upper, samples: deviations.len(), deviations }
}

/// [`epsilon_from_norms`] for a batch from an isotropic model.
pub fn epsilon_thin_shell(batch: &SampleBatch) -> ThinShellReport {
    epsilon_from_norms(&batch.norms(), batch.dim)
}

impl ThinShellReport {
    /// `Ĝ(ε) = #{dᵢ ≥ ε} / N`.
    pub fn tail(&self, eps: f64) -> f64 {
        let below = self.deviations.partition_point(|&d| d < eps);
        (self.deviations.len() - below) as f64 / self.deviations.len() as f64
    }

    /// Survival curve as CSV (`epsilon,empirical_tail`), thinned to at most
    /// `max_rows` evenly spaced order statistics.
    pub fn write_survival_csv<W: Write>(&self, mut w: W, max_rows: usize) -> Result<()> {
        writeln!(w, "epsilon,empirical_tail")?;
        let n = self.deviations.len();
        let stride = n.div_ceil(max_rows.max(1)).max(1);
        for i in (0..n).step_by(stride) {
            writeln!(w, "{},{}", self.deviations[i], (n - i) as f64 / n as f64)?;
        }
        Ok(())
    }
}

/// `ε̂` next to the Chebyshev-type bound `(2⁴ α₄)^{1/3}`.
#[derive(Clone, Debug, Serialize)]
pub struct ChebyshevLink {
    pub epsilon_hat: f64,
    pub alpha4: f64,
    pub bound: f64,
    pub method: Method,
}

impl ChebyshevLink {
    /// `ε̂ ≤ bound + slack`.
    pub fn holds(&self, slack: f64) -> bool {
        self.epsilon_hat <= self.bound + slack
    }
}

/// `α₄` in closed form when the batch comes from `f_{n,r}`, else from the batch.
pub fn chebyshev_link(batch: &SampleBatch) -> Result<ChebyshevLink> {
    let norms = batch.norms();
    let alpha4 = match batch.model.as_ref() {
        Some(ModelSpec::Fnr { n, r }) => {
            if !(*r > 4.0) {
                return Err(Error::domain("chebyshev_link", format!("r = {r} must exceed 4")));
            }
            Some(alpha_p_fnr(*n, *r, 4.0)?)
        }
        Some(ModelSpec::AffineRadial { r, .. }) if !(*r > 4.0) => {
            return Err(Error::domain("chebyshev_link", format!("r = {r} must exceed 4")));
        }
        _ => None,
    };
    chebyshev_link_norms(&norms, batch.dim, alpha4)
}

/// As [`chebyshev_link`] from norms, with an optional closed-form `α₄`.
pub fn chebyshev_link_norms(norms: &[f64], n: usize, alpha4: Option<f64>) -> Result<ChebyshevLink> {
    let epsilon_hat = epsilon_from_norms(norms, n).epsilon;
    let (alpha4, method) = match alpha4 {
        Some(a) => (a, Method::ClosedForm),
        None => {
            let m4 = mc_moment_norms(norms, 4.0, None)?.value;
            let m2 = mc_moment_norms(norms, 2.0, None)?.value;
            ((m4 / m2 - 1.0).abs(), Method::MonteCarlo)
        }
    };
    Ok(ChebyshevLink { epsilon_hat, alpha4, bound: (16.0 * alpha4).cbrt(), method })
}

/// The Paley–Zygmund lower bound on `P(|X|/√n ≥ 1 + eps)` exactly as printed:
/// `[((α_p+1)^p − (1+eps)^p) / (α_s+1)^{sp}]^{1/(s−p)}`, clamped to `[0, 1]`.
pub fn paley_zygmund_lower(n: usize, r: f64, p: f64, s: f64, eps: f64) -> Result<f64> {
    if !(2.0 < p && p < s && s < r) {
        return Err(Error::domain("paley_zygmund_lower", format!("need 2 < p < s < r, got p={p}, s={s}, r={r}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::domain("paley_zygmund_lower", "eps must be nonnegative"));
    }
    let ap = alpha_p_fnr(n, r, p)?;
    let a_s = alpha_p_fnr(n, r, s)?;
    let num = (1.0 + ap).powf(p) - (1.0 + eps).powf(p);
    if !(num > 0.0) {
        return Ok(0.0);
    }
    let ln_v = (num.ln() - s * p * (1.0 + a_s).ln()) / (s - p);
    Ok(ln_v.exp().clamp(0.0, 1.0))
}

/// `sup_t |F̂(t) − Φ(t)|` for the values `⟨Xᵢ, θ⟩`.
pub fn kolmogorov_distance_values(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    ks_statistic(&values, normal_cdf)
}

pub fn kolmogorov_distance(batch: &SampleBatch, theta: &[f64]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::domain("kolmogorov_distance", "empty batch"));
    }
    let norm: f64 = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    if theta.len() != batch.dim || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::domain("kolmogorov_distance", "theta must be a unit vector of the batch dimension"));
    }
    Ok(kolmogorov_distance_values(batch.project(theta)))
}
