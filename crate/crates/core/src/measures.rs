//! Convex measures: the isotropic power-law family, its affine images and
//! explicit densities, with radial marginals, isotropization and midpoint
//! concavity checks.
//!
//! A density `w` on `ℝⁿ` is `(−1/r)`-concave when `w = φ^{−α}` with `φ` convex
//! and `α = n + r`. Radial models store `w(x) = f(|x|)` through a
//! [`RadialProfile`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{log_mellin, log_sum_exp, HalfLine, QuadConfig};
use crate::sampling::{par_rows, RngStream};
use crate::specfun::{log_beta, sphere_area, LogScalar};

/// A nonnegative function on `[0, ∞)` given through its logarithm.
pub trait Profile1d: Send + Sync {
    /// `ln f(t)`; `-∞` where `f` vanishes.
    fn log_value(&self, t: f64) -> f64;
    /// `t^decay f(t)` stays bounded as `t → ∞`.
    fn decay(&self) -> f64;
    /// `f` vanishes beyond this radius.
    fn support(&self) -> Option<f64> {
        None
    }

    fn half_line(&self) -> HalfLine {
        HalfLine { decay: self.decay(), support: self.support() }
    }
}

/// `ln ∫₀^∞ t^{s−1} f(t) dt`.
pub fn log_mellin_profile<P: Profile1d + ?Sized>(profile: &P, s: f64, cfg: &QuadConfig) -> Result<f64> {
    log_mellin(|t| profile.log_value(t), s, profile.half_line(), cfg)
}

/// Monotone piecewise-cubic (PCHIP) table of `ln f` against the radius.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    radii: Vec<f64>,
    log_values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Table {
    /// `radii` strictly increasing from 0, `values` strictly positive.
    pub fn new(radii: Vec<f64>, values: &[f64]) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return Err(Error::domain("Table::new", "need at least two (radius, value) pairs"));
        }
        if radii[0] != 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("Table::new", "radii must start at 0 and increase strictly"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain("Table::new", "values must be positive and finite"));
        }
        let log_values: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let slopes = pchip_slopes(&radii, &log_values);
        Ok(Table { radii, log_values, slopes })
    }

    /// Log values at the nodes; the interpolant attains its extrema there.
    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn max_radius(&self) -> f64 {
        *self.radii.last().expect("nonempty table")
    }

    /// Interpolated `ln f(t)`; an error outside the tabulated range.
    pub fn try_log_value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.max_radius()) {
            return Err(Error::domain(
                "Table::try_log_value",
                format!("radius {t} outside the table [0, {}]", self.max_radius()),
            ));
        }
        let i = match self.radii.partition_point(|&x| x <= t) {
            0 => 0,
            k if k >= self.radii.len() => self.radii.len() - 2,
            k => k - 1,
        };
        let h = self.radii[i + 1] - self.radii[i];
        let s = (t - self.radii[i]) / h;
        let (y0, y1) = (self.log_values[i], self.log_values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1)
    }
}

/// Fritsch–Carlson/Butland slopes with shape-preserving one-sided ends.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![del[0], del[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    let edge = |h0: f64, h1: f64, m0: f64, m1: f64| {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    };
    d[0] = edge(h[0], h[1], del[0], del[1]);
    d[n - 1] = edge(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProfileKind {
    /// `c₁ (1 + c₂ t)^{−α}`.
    PowerLaw { c1: LogScalar, c2: f64 },
    /// Interpolated table; it is supported on its own radius range.
    Tabulated(Table),
}

/// Radial part `f` of a density `w(x) = f(|x|)` of the form `φ^{−α}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    alpha: f64,
    kind: ProfileKind,
}

impl RadialProfile {
    pub fn power_law(alpha: f64, c1: LogScalar, c2: f64) -> Result<Self> {
        if !(alpha > 0.0 && c2 > 0.0 && c1.sign > 0) {
            return Err(Error::domain("RadialProfile::power_law", "need alpha, c1, c2 > 0"));
        }
        Ok(RadialProfile { alpha, kind: ProfileKind::PowerLaw { c1, c2 } })
    }

    pub fn tabulated(alpha: f64, table: Table) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::domain("RadialProfile::tabulated", "alpha must be positive"));
        }
        Ok(RadialProfile { alpha, kind: ProfileKind::Tabulated(table) })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn value(&self, t: f64) -> LogScalar {
        LogScalar::from_ln(self.log_value(t))
    }
}

impl Profile1d for RadialProfile {
    /// Outside a table's range this is NaN, which quadrature rejects.
    fn log_value(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::PowerLaw { c1, c2 } => c1.log_abs - self.alpha * (c2 * t).ln_1p(),
            ProfileKind::Tabulated(tab) => tab.try_log_value(t).unwrap_or(f64::NAN),
        }
    }

    fn decay(&self) -> f64 {
        match &self.kind {
            ProfileKind::PowerLaw { .. } => self.alpha,
            ProfileKind::Tabulated(_) => f64::INFINITY,
        }
    }

    fn support(&self) -> Option<f64> {
        match &self.kind {
            ProfileKind::PowerLaw { .. } => None,
            ProfileKind::Tabulated(tab) => Some(tab.max_radius()),
        }
    }
}

/// Density oracle for the explicit model kind.
pub trait DensityOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

/// Exact sampler attached to an explicit density.
pub trait PointSampler: Send + Sync {
    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

/// `x ↦ base(map⁻¹(x − shift)) / |det map|`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineRadial {
    pub base: RadialProfile,
    pub map: DMatrix<f64>,
    pub shift: DVector<f64>,
    inverse: DMatrix<f64>,
    log_abs_det: f64,
}

impl AffineRadial {
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }
}

#[derive(Clone)]
pub struct Explicit {
    pub oracle: Arc<dyn DensityOracle>,
    pub sampler: Option<Arc<dyn PointSampler>>,
}

impl fmt::Debug for Explicit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Explicit")
            .field("dim", &self.oracle.dim())
            .field("has_sampler", &self.sampler.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum ModelKind {
    Radial(RadialProfile),
    AffineRadial(AffineRadial),
    Explicit(Explicit),
}

/// Serializable description of the models that have one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Fnr { n: usize, r: f64 },
    /// Affine image `x ↦ map·x + shift` of `f_{n,r}`; `map` is row-major.
    AffineRadial { n: usize, r: f64, map: Vec<f64>, shift: Vec<f64> },
}

/// An `n`-dimensional `(−1/r)`-concave probability measure.
#[derive(Clone, Debug)]
pub struct MeasureModel {
    n: usize,
    r: f64,
    kind: ModelKind,
    spec: Option<ModelSpec>,
}

/// `c₂ = √((n+1)/((r−1)(r−2)))`, the scale making `f_{n,r}` isotropic.
pub fn fnr_scale(n: usize, r: f64) -> f64 {
    ((n as f64 + 1.0) / ((r - 1.0) * (r - 2.0))).sqrt()
}

/// The isotropic density `f_{n,r}(x) = c₁ (1 + c₂|x|)^{−(n+r)}`.
///
/// Normalization: `∫w = Vol(S^{n−1}) c₁ c₂^{−n} B(n, r)`, so
/// `c₁ = c₂ⁿ / (Vol(S^{n−1}) B(n, r))`; isotropy:
/// `E|X|² = c₂^{−2} B(n+2, r−2)/B(n, r) = n(n+1)/(c₂²(r−1)(r−2)) = n`.
pub fn make_fnr(n: usize, r: f64) -> Result<MeasureModel> {
    if n == 0 {
        return Err(Error::domain("make_fnr", "dimension must be >= 1"));
    }
    if !(r > 2.0) || !r.is_finite() {
        return Err(Error::domain("make_fnr", format!("r = {r} must exceed 2 (finite second moment)")));
    }
    let c2 = fnr_scale(n, r);
    let mut model = power_law_model(n, r, c2)?;
    model.spec = Some(ModelSpec::Fnr { n, r });
    Ok(model)
}

/// Radial `c₁(1 + c₂|x|)^{−(n+r)}` normalized to mass 1 for any `c₂ > 0`.
pub fn power_law_model(n: usize, r: f64, c2: f64) -> Result<MeasureModel> {
    if n == 0 || !(r > 0.0) || !(c2 > 0.0) {
        return Err(Error::domain("power_law_model", "need n >= 1, r > 0, c2 > 0"));
    }
    let nf = n as f64;
    let area = sphere_area(n as u32)?;
    let c1 = LogScalar::from_ln(nf * c2.ln() - area.log_abs - log_beta(nf, r)?);
    Ok(MeasureModel {
        n,
        r,
        kind: ModelKind::Radial(RadialProfile::power_law(nf + r, c1, c2)?),
        spec: None,
    })
}

impl MeasureModel {
    /// Radial model from a profile; `r = α − n`.
    pub fn radial(n: usize, profile: RadialProfile) -> Result<Self> {
        let r = profile.alpha() - n as f64;
        if n == 0 || !(r > 0.0) {
            return Err(Error::domain("MeasureModel::radial", "profile exponent must exceed n"));
        }
        Ok(MeasureModel { n, r, kind: ModelKind::Radial(profile), spec: None })
    }

    /// Affine image `x ↦ map·x + shift` of a radial model.
    pub fn affine(base: &MeasureModel, map: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let n = base.n;
        let profile = match &base.kind {
            ModelKind::Radial(p) => p.clone(),
            _ => return Err(Error::unsupported("MeasureModel::affine", "base must be radial")),
        };
        if map.nrows() != n || map.ncols() != n || shift.len() != n {
            return Err(Error::domain("MeasureModel::affine", "map/shift shape does not match n"));
        }
        let lu = map.clone().lu();
        let det = lu.determinant();
        let inverse = lu
            .try_inverse()
            .filter(|_| det != 0.0 && det.is_finite())
            .ok_or_else(|| Error::domain("MeasureModel::affine", "map is singular"))?;
        let spec = match &base.spec {
            Some(ModelSpec::Fnr { n, r }) => Some(ModelSpec::AffineRadial {
                n: *n,
                r: *r,
                map: map.transpose().as_slice().to_vec(),
                shift: shift.as_slice().to_vec(),
            }),
            _ => None,
        };
        Ok(MeasureModel {
            n,
            r: base.r,
            kind: ModelKind::AffineRadial(AffineRadial {
                base: profile,
                map,
                shift,
                inverse,
                log_abs_det: det.abs().ln(),
            }),
            spec,
        })
    }

    pub fn explicit(
        r: f64,
        oracle: Arc<dyn DensityOracle>,
        sampler: Option<Arc<dyn PointSampler>>,
    ) -> Self {
        MeasureModel { n: oracle.dim(), r, kind: ModelKind::Explicit(Explicit { oracle, sampler }), spec: None }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::Fnr { n, r } => make_fnr(*n, *r),
            ModelSpec::AffineRadial { n, r, map, shift } => {
                if map.len() != n * n || shift.len() != *n {
                    return Err(Error::domain("MeasureModel::from_spec", "map/shift length mismatch"));
                }
                let base = make_fnr(*n, *r)?;
                Self::affine(&base, DMatrix::from_row_slice(*n, *n, map), DVector::from_column_slice(shift))
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `α = n + r`.
    pub fn alpha(&self) -> f64 {
        self.n as f64 + self.r
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn radial_profile(&self) -> Option<&RadialProfile> {
        match &self.kind {
            ModelKind::Radial(p) => Some(p),
            _ => None,
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Radial(p) => p.log_value(norm(x)),
            ModelKind::AffineRadial(a) => {
                let y = &a.inverse * (DVector::from_column_slice(x) - &a.shift);
                a.base.log_value(y.norm()) - a.log_abs_det
            }
            ModelKind::Explicit(e) => e.oracle.log_density(x),
        }
    }

    pub fn density(&self, x: &[f64]) -> LogScalar {
        LogScalar::from_ln(self.log_density(x))
    }

    /// `ln E|X|^p` of the radial law (closed form for power laws).
    pub fn log_abs_moment(&self, p: f64) -> Result<f64> {
        let profile = self
            .radial_profile()
            .ok_or_else(|| Error::unsupported("log_abs_moment", "model is not radial"))?;
        radial_log_abs_moment(self.n, profile, p)
    }
}

impl DensityOracle for MeasureModel {
    fn dim(&self) -> usize {
        self.n
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        MeasureModel::log_density(self, x)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `ln E|X|^p = ln Vol(S^{n−1}) + ln ∫ t^{n+p−1} f(t) dt` for a radial law.
pub fn radial_log_abs_moment(n: usize, profile: &RadialProfile, p: f64) -> Result<f64> {
    let nf = n as f64;
    let s = nf + p;
    if !(s > 0.0) || !(s < profile.decay()) {
        return Err(Error::domain(
            "radial_log_abs_moment",
            format!("order {p} outside (−{nf}, {})", profile.decay() - nf),
        ));
    }
    let area = sphere_area(n as u32)?.log_abs;
    match profile.kind() {
        ProfileKind::PowerLaw { c1, c2 } => {
            Ok(area + c1.log_abs - s * c2.ln() + log_beta(s, profile.alpha() - s)?)
        }
        ProfileKind::Tabulated(_) => {
            Ok(area + log_mellin_profile(profile, s, &QuadConfig::default())?)
        }
    }
}

/// Radial profile `ρ ↦ π_k w(y)` (`|y| = ρ`) of the `k`-marginal of a radial
/// model: `Vol(S^{n−k−1}) ∫₀^∞ s^{n−k−1} f(√(ρ²+s²)) ds`.
#[derive(Clone, Debug)]
pub struct MarginalProfile {
    base: RadialProfile,
    n: usize,
    k: usize,
    log_area: f64,
    cfg: QuadConfig,
}

impl MarginalProfile {
    pub fn new(model: &MeasureModel, k: usize) -> Result<Self> {
        let base = model
            .radial_profile()
            .ok_or_else(|| Error::unsupported("marginal_density", "model is not radial"))?
            .clone();
        Self::from_profile(base, model.n(), k)
    }

    pub fn from_profile(base: RadialProfile, n: usize, k: usize) -> Result<Self> {
        if !(1..n).contains(&k) {
            return Err(Error::domain("marginal_density", format!("need 1 <= k < n, got k={k}, n={n}")));
        }
        let log_area = sphere_area((n - k) as u32)?.log_abs;
        Ok(MarginalProfile { base, n, k, log_area, cfg: QuadConfig::default() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Concavity exponent of the marginal: `α − (n − k) = r + k`.
    pub fn alpha(&self) -> f64 {
        self.base.alpha() - (self.n - self.k) as f64
    }

    pub fn try_log_value(&self, rho: f64) -> Result<f64> {
        let rho2 = rho * rho;
        let support = self.base.support().map(|s| (s * s - rho2).max(0.0).sqrt());
        if support == Some(0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let shape = HalfLine { decay: self.base.decay(), support };
        let base = &self.base;
        let inner = log_mellin(
            |s: f64| base.log_value((rho2 + s * s).sqrt()),
            (self.n - self.k) as f64,
            shape,
            &self.cfg,
        )?;
        Ok(self.log_area + inner)
    }
}

impl Profile1d for MarginalProfile {
    fn log_value(&self, t: f64) -> f64 {
        self.try_log_value(t).unwrap_or(f64::NAN)
    }

    fn decay(&self) -> f64 {
        self.alpha()
    }

    fn support(&self) -> Option<f64> {
        self.base.support()
    }
}

impl DensityOracle for MarginalProfile {
    fn dim(&self) -> usize {
        self.k
    }

    fn log_density(&self, y: &[f64]) -> f64 {
        self.log_value(norm(y))
    }
}

/// `π_k w(y)` for a radial model; depends on `y` only through `|y|`.
pub fn marginal_density(model: &MeasureModel, k: usize, y: &[f64]) -> Result<LogScalar> {
    if y.len() != k {
        return Err(Error::domain("marginal_density", "y must have k coordinates"));
    }
    let prof = MarginalProfile::new(model, k)?;
    Ok(LogScalar::from_ln(prof.try_log_value(norm(y))?))
}

/// Result of a midpoint convexity test of `w^{−1/α}`.
#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    pub alpha: f64,
    pub trials: usize,
    /// Largest `g(mid)/((g(a)+g(b))/2) − 1` with `g = w^{−1/α}`; ≤ 0 means convex.
    pub max_violation: f64,
    pub worst: Option<(Vec<f64>, Vec<f64>)>,
}

impl ConcavityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Relative midpoint defect of `g = exp(−ln w / α)` on the segment `[a, b]`.
pub fn midpoint_defect(log_wa: f64, log_wm: f64, log_wb: f64, alpha: f64) -> f64 {
    let (ga, gm, gb) = (-log_wa / alpha, -log_wm / alpha, -log_wb / alpha);
    let avg = log_sum_exp(&[ga, gb]) - std::f64::consts::LN_2;
    (gm - avg).exp_m1()
}

/// Midpoint test of `w^{−1/α}` on random segments with Gaussian endpoints of
/// standard deviation `scale` per coordinate around `center`.
pub fn check_concavity<F>(
    log_w: F,
    center: &[f64],
    scale: f64,
    alpha: f64,
    trials: usize,
    stream: RngStream,
) -> ConcavityReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = center.len();
    let defects = par_rows(stream, trials, 2 * dim + 1, |rng, row| {
        for (j, x) in row[..2 * dim].iter_mut().enumerate() {
            *x = center[j % dim] + scale * rng.sample::<f64, _>(StandardNormal);
        }
        let (a, b) = row[..2 * dim].split_at(dim);
        let mid: Vec<f64> = a.iter().zip(b).map(|(u, v)| 0.5 * (u + v)).collect();
        row[2 * dim] = midpoint_defect(log_w(a), log_w(&mid), log_w(b), alpha);
    });
    let mut report = ConcavityReport { alpha, trials, max_violation: f64::NEG_INFINITY, worst: None };
    for row in defects.chunks_exact(2 * dim + 1) {
        let d = row[2 * dim];
        if d > report.max_violation || d.is_nan() {
            report.max_violation = if d.is_nan() { f64::INFINITY } else { d };
            report.worst = Some((row[..dim].to_vec(), row[dim..2 * dim].to_vec()));
        }
    }
    report
}

/// Midpoint test of the model density with its own `α = n + r`, or a supplied one.
pub fn check_model_concavity(
    model: &MeasureModel,
    alpha: f64,
    trials: usize,
    stream: RngStream,
) -> ConcavityReport {
    let center = vec![0.0; model.n()];
    check_concavity(|x| model.log_density(x), &center, 1.5, alpha, trials, stream)
}

/// Midpoint test of the `k`-marginal of a radial model.
pub fn check_marginal_concavity(
    model: &MeasureModel,
    k: usize,
    alpha: f64,
    trials: usize,
    stream: RngStream,
) -> Result<ConcavityReport> {
    let prof = MarginalProfile::new(model, k)?;
    let center = vec![0.0; k];
    Ok(check_concavity(|y| prof.log_value(norm(y)), &center, 1.5, alpha, trials, stream))
}

/// Midpoint test of `f^{−1/α}` for a profile on random triples in `[0, t_max]`.
pub fn check_profile_concavity<P: Profile1d + ?Sized>(
    profile: &P,
    alpha: f64,
    t_max: f64,
    trials: usize,
    stream: RngStream,
) -> ConcavityReport {
    let defects = par_rows(stream, trials, 3, |rng, row| {
        let a = t_max * rng.random::<f64>();
        let b = t_max * rng.random::<f64>();
        row[0] = a;
        row[1] = b;
        row[2] = midpoint_defect(
            profile.log_value(a),
            profile.log_value(0.5 * (a + b)),
            profile.log_value(b),
            alpha,
        );
    });
    let mut report = ConcavityReport { alpha, trials, max_violation: f64::NEG_INFINITY, worst: None };
    for row in defects.chunks_exact(3) {
        if row[2] > report.max_violation || row[2].is_nan() {
            report.max_violation = if row[2].is_nan() { f64::INFINITY } else { row[2] };
            report.worst = Some((vec![row[0]], vec![row[1]]));
        }
    }
    report
}

/// Affine map `x ↦ linear·x + shift` making a model isotropic.
#[derive(Clone, Debug, PartialEq)]
pub struct IsotropyMap {
    pub linear: DMatrix<f64>,
    pub shift: DVector<f64>,
    /// `‖linear‖ ‖linear⁻¹‖` in the operator norm.
    pub condition: f64,
}

/// Spectral condition number `σ_max / σ_min`.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    sv.max() / sv.min()
}

impl IsotropyMap {
    fn new(linear: DMatrix<f64>, shift: DVector<f64>) -> Self {
        let condition = condition_number(&linear);
        IsotropyMap { linear, shift, condition }
    }

    pub fn apply(&self, x: &[f64]) -> DVector<f64> {
        &self.linear * DVector::from_column_slice(x) + &self.shift
    }

    /// The pushed-forward model (affine-radial for radial or affine inputs).
    pub fn apply_to(&self, model: &MeasureModel) -> Result<MeasureModel> {
        match model.kind() {
            ModelKind::Radial(_) => Self::wrap(model, self.linear.clone(), self.shift.clone()),
            ModelKind::AffineRadial(a) => {
                let base = MeasureModel::radial(model.n(), a.base.clone())?;
                Self::wrap(&base, &self.linear * &a.map, &self.linear * &a.shift + &self.shift)
            }
            ModelKind::Explicit(_) => Err(Error::unsupported("IsotropyMap::apply_to", "explicit model")),
        }
    }

    fn wrap(base: &MeasureModel, map: DMatrix<f64>, shift: DVector<f64>) -> Result<MeasureModel> {
        MeasureModel::affine(base, map, shift)
    }
}

/// Per-coordinate variance `E|Y|²/n` of a radial law.
fn radial_coordinate_variance(n: usize, profile: &RadialProfile) -> Result<f64> {
    Ok((radial_log_abs_moment(n, profile, 2.0)? - radial_log_abs_moment(n, profile, 0.0)?).exp()
        / n as f64)
}

/// Samples drawn for the Monte Carlo covariance of explicit models.
pub const ISOTROPIZE_SAMPLES: usize = 1_000_000;

/// The affine map taking `model` to an isotropic position.
///
/// Radial: scalar `σ^{−1}`. Affine image `AY + b` of a radial `Y` with
/// per-coordinate variance `σ²`: `x ↦ σ^{−1}A^{−1}(x − b)`. Explicit: the
/// symmetric `Σ^{−1/2}(x − m)` from [`ISOTROPIZE_SAMPLES`] exact samples.
pub fn isotropize(model: &MeasureModel) -> Result<IsotropyMap> {
    if !(model.r() > 2.0) {
        return Err(Error::domain("isotropize", "r must exceed 2 for a finite covariance"));
    }
    let n = model.n();
    match model.kind() {
        ModelKind::Radial(p) => {
            let s = radial_coordinate_variance(n, p)?.sqrt().recip();
            Ok(IsotropyMap::new(DMatrix::identity(n, n) * s, DVector::zeros(n)))
        }
        ModelKind::AffineRadial(a) => {
            let s = radial_coordinate_variance(n, &a.base)?.sqrt().recip();
            let linear = &a.inverse * s;
            let shift = -(&linear * &a.shift);
            Ok(IsotropyMap::new(linear, shift))
        }
        ModelKind::Explicit(e) => {
            let sampler = e.sampler.as_ref().ok_or_else(|| {
                Error::numeric("isotropize", "explicit model has no sampler for covariance estimation")
            })?;
            let pts = par_rows(RngStream::new(0x150_7209, 0), ISOTROPIZE_SAMPLES, n, |rng, row| {
                sampler.sample_into(rng, row)
            });
            isotropize_points(&pts, n)
        }
    }
}

/// Symmetric whitening map from the empirical mean and covariance of rows.
pub fn isotropize_points(points: &[f64], n: usize) -> Result<IsotropyMap> {
    let count = points.len() / n;
    if count <= n {
        return Err(Error::numeric("isotropize", "too few samples for a covariance estimate"));
    }
    let mut mean = DVector::zeros(n);
    for row in points.chunks_exact(n) {
        mean += DVector::from_column_slice(row);
    }
    mean /= count as f64;
    let mut cov = DMatrix::zeros(n, n);
    for row in points.chunks_exact(n) {
        let d = DVector::from_column_slice(row) - &mean;
        cov.syger(1.0, &d, &d, 1.0);
    }
    cov /= (count - 1) as f64;
    let eig = cov.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::numeric("isotropize", "sample covariance is not positive definite"));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt().recip()));
    let linear = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let shift = -(&linear * mean);
    Ok(IsotropyMap::new(linear, shift))
}

/// One-dimensional two-sided power law with barycenter 0 and mode at `mode()`:
/// `w(x) = c (1 + a(x−m))^{−β}` for `x ≥ m`, `c (1 + b(m−x))^{−β}` for `x < m`,
/// with `β = 1 + r`. `w^{−1/β}` is piecewise affine with a convex kink at `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoSidedPowerLaw {
    pub right: f64,
    pub left: f64,
    pub r: f64,
    c: f64,
    mode: f64,
}

impl TwoSidedPowerLaw {
    /// `right`, `left` are the decay rates `a`, `b`; needs `r > 1`.
    pub fn new(right: f64, left: f64, r: f64) -> Result<Self> {
        if !(right > 0.0 && left > 0.0 && r > 1.0) {
            return Err(Error::domain("TwoSidedPowerLaw::new", "need a, b > 0 and r > 1"));
        }
        // mass: c (1/a + 1/b)/r ; first moment about m: c (1/a² − 1/b²)/(r(r−1))
        let c = r / (1.0 / right + 1.0 / left);
        let offset = c * (right.powi(-2) - left.powi(-2)) / (r * (r - 1.0));
        Ok(TwoSidedPowerLaw { right, left, r, c, mode: -offset })
    }

    pub fn beta(&self) -> f64 {
        1.0 + self.r
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    /// `‖w‖∞ = w(mode)`.
    pub fn sup(&self) -> f64 {
        self.c
    }

    pub fn log_density_1d(&self, x: f64) -> f64 {
        let d = x - self.mode;
        let rate = if d >= 0.0 { self.right } else { self.left };
        self.c.ln() - self.beta() * (rate * d.abs()).ln_1p()
    }

    pub fn model(self) -> MeasureModel {
        let shared = Arc::new(self);
        MeasureModel::explicit(self.r, shared.clone(), Some(shared))
    }
}

impl DensityOracle for TwoSidedPowerLaw {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_density_1d(x[0])
    }
}

impl PointSampler for TwoSidedPowerLaw {
    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let p_right = (1.0 / self.right) / (1.0 / self.right + 1.0 / self.left);
        let go_right = rng.random::<f64>() < p_right;
        // P(|x − m| > t | side) = (1 + rate·t)^{−r}
        let u: f64 = 1.0 - rng.random::<f64>();
        let rate = if go_right { self.right } else { self.left };
        let t = (u.powf(-1.0 / self.r) - 1.0) / rate;
        out[0] = if go_right { self.mode + t } else { self.mode - t };
    }
}
