//! Convex-geometry oracles attached to a density `w` on `ℝⁿ`.
//!
//! - `K_a(w) = {x : a ∫₀^∞ t^{a−1} w(tx) dt ≥ w(0)}`. The defining integral is
//!   `a`-homogeneous along rays (substitute `s = λt` at `x = λθ`), so the
//!   radial function is `ρ(θ) = (a ∫₀^∞ s^{a−1} w(sθ) ds / w(0))^{1/a}`.
//! - The one-sided moment body `Z_q⁺` with support function
//!   `(E⟨X,θ⟩₊^q)^{1/q}`, or `(∫_K ⟨x,θ⟩₊^q dx)^{1/q}` for a body `K`.
//! - Distances to the Euclidean ball are `sup/inf` ratios of the direction
//!   function over a direction set.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{radial_log_abs_moment, DensityOracle, MeasureModel, ModelKind, ProfileKind};
use crate::moments::Method;
use crate::quad::{integrate, integrate_partition, log_mellin, maximize_unimodal, HalfLine, QuadConfig};
use crate::sampling::{fill_sphere, par_rows, sample_model, RngStream, SampleBatch};
use crate::specfun::{log_beta, log_sphere_abs_moment, sphere_area};
use crate::stats::mean_var;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn check_unit(op: &'static str, theta: &[f64], dim: usize) -> Result<()> {
    if theta.len() != dim || (norm(theta) - 1.0).abs() > 1e-12 {
        return Err(Error::domain(op, format!("θ must be a unit vector in dimension {dim}")));
    }
    Ok(())
}

/// `ln E⟨X,θ⟩₊^q` in closed form for radial models and centered linear images:
/// `E|X|^q · ½ E|u₁|^q`, with `⟨AY,θ⟩ = |Aᵀθ| ⟨Y,θ′⟩`.
pub fn log_half_moment(model: &MeasureModel, theta: &[f64], q: f64) -> Result<Option<f64>> {
    let n = model.n();
    let (profile, scale) = match model.kind() {
        ModelKind::Radial(p) => (p, 1.0),
        ModelKind::AffineRadial(a) if a.shift.iter().all(|&s| s == 0.0) => {
            let t = a.map.transpose() * DVector::from_column_slice(theta);
            (&a.base, t.norm())
        }
        _ => return Ok(None),
    };
    let ln_abs = radial_log_abs_moment(n, profile, q)? - radial_log_abs_moment(n, profile, 0.0)?;
    Ok(Some(q * scale.ln() + ln_abs + log_sphere_abs_moment(n as u32, q) - LN_2))
}

/// `ρ_{K_a(w)}(θ)` for a density oracle whose rays decay like `s^{−α}`.
pub fn ka_radial_oracle(w: &dyn DensityOracle, alpha: f64, a: f64, theta: &[f64]) -> Result<f64> {
    if !(a > 0.0 && a < alpha) {
        return Err(Error::domain("ka_radial", format!("need 0 < a < α = {alpha}, got a = {a}")));
    }
    let dim = w.dim();
    let origin = vec![0.0; dim];
    let l0 = w.log_density(&origin);
    if !l0.is_finite() {
        return Err(Error::domain("ka_radial", "w(0) must be positive"));
    }
    let lm = log_mellin(
        |s: f64| {
            let x: Vec<f64> = theta.iter().map(|t| s * t).collect();
            w.log_density(&x)
        },
        a,
        HalfLine { decay: alpha, support: None },
        &QuadConfig::default(),
    )?;
    Ok(((a.ln() + lm - l0) / a).exp())
}

/// `ρ_{K_a(w)}(θ)` for a model with `α = n + r`.
pub fn ka_radial(model: &MeasureModel, a: f64, theta: &[f64]) -> Result<f64> {
    check_unit("ka_radial", theta, model.n())?;
    ka_radial_oracle(model, model.alpha(), a, theta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    RadialFn,
    SupportFn,
}

pub type DirectionFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// A body containing 0, known through its radial or support function.
#[derive(Clone)]
pub struct StarBody {
    dim: usize,
    kind: OracleKind,
    eval: DirectionFn,
    cache: Vec<(Vec<f64>, f64)>,
}

impl std::fmt::Debug for StarBody {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StarBody")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("cached", &self.cache.len())
            .finish()
    }
}

impl StarBody {
    pub fn new(dim: usize, kind: OracleKind, eval: DirectionFn) -> Self {
        StarBody { dim, kind, eval, cache: Vec::new() }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        Self::new(dim, OracleKind::RadialFn, Arc::new(move |_| Ok(radius)))
    }

    /// Ellipsoid `Σ xᵢ²/aᵢ² ≤ 1` by its radial function.
    pub fn ellipsoid(axes: Vec<f64>) -> Self {
        let dim = axes.len();
        Self::new(
            dim,
            OracleKind::RadialFn,
            Arc::new(move |t: &[f64]| Ok(1.0 / t.iter().zip(&axes).map(|(x, a)| (x / a).powi(2)).sum::<f64>().sqrt())),
        )
    }

    /// `K_a(w)` by its radial function.
    pub fn ka(w: Arc<dyn DensityOracle>, alpha: f64, a: f64) -> Result<Self> {
        if !(a > 0.0 && a < alpha) {
            return Err(Error::domain("StarBody::ka", format!("need 0 < a < α = {alpha}, got a = {a}")));
        }
        let dim = w.dim();
        Ok(Self::new(dim, OracleKind::RadialFn, Arc::new(move |t: &[f64]| ka_radial_oracle(w.as_ref(), alpha, a, t))))
    }

    /// `Z_q⁺` of a model by its support function.
    pub fn zq(model: MeasureModel, q: f64, mc: Option<(RngStream, usize)>) -> Result<Self> {
        check_order("StarBody::zq", &model, q)?;
        let dim = model.n();
        let batch = match log_half_moment(&model, &unit(dim, 0), q)? {
            Some(_) => None,
            None if model.n() == 1 => None,
            None => {
                let (stream, count) = mc.ok_or_else(|| Error::unsupported("StarBody::zq", "Monte Carlo settings required"))?;
                Some(Arc::new(sample_model(stream, &model, count)?))
            }
        };
        Ok(Self::new(
            dim,
            OracleKind::SupportFn,
            Arc::new(move |t: &[f64]| match &batch {
                Some(b) => Ok(zq_support_batch(b, q, t)?.value),
                None => Ok(zq_support(&model, q, t, None)?.value),
            }),
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        let v = (self.eval)(theta)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::numeric("StarBody::value", format!("direction function is {v}")));
        }
        Ok(v)
    }

    /// Evaluate in parallel and append to the cache.
    pub fn evaluate(&mut self, directions: &[Vec<f64>]) -> Result<Vec<f64>> {
        let values = directions.par_iter().map(|t| self.value(t)).collect::<Result<Vec<f64>>>()?;
        self.cache.extend(directions.iter().cloned().zip(values.iter().copied()));
        Ok(values)
    }

    pub fn cache(&self) -> &[(Vec<f64>, f64)] {
        &self.cache
    }

    /// Cached evaluations as CSV: `x0,…,x{n−1},value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).chain(["value".to_owned()]).collect();
        writeln!(w, "{}", header.join(","))?;
        for (d, v) in &self.cache {
            let row: Vec<String> = d.iter().chain([v]).map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

/// Direction set: `±1` in dimension 1, an equiangular grid in 2, a Fibonacci
/// lattice in 3 and seeded uniform directions above.
pub fn direction_set(n: usize, count: usize, stream: RngStream) -> Vec<Vec<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![rho * t.cos(), rho * t.sin(), z]
                })
                .collect()
        }
        _ => par_rows(stream, count, n, |rng, row| fill_sphere(rng, row))
            .chunks_exact(n)
            .map(<[f64]>::to_vec)
            .collect(),
    }
}

/// `sup/inf` of a direction function.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceReport {
    pub value: f64,
    pub directions: usize,
    pub argmax: Vec<f64>,
    pub argmin: Vec<f64>,
}

fn ratio_of_extremes(directions: &[Vec<f64>], values: &[f64]) -> DistanceReport {
    let (mut imax, mut imin) = (0, 0);
    for (i, v) in values.iter().enumerate() {
        if *v > values[imax] {
            imax = i;
        }
        if *v < values[imin] {
            imin = i;
        }
    }
    DistanceReport {
        value: values[imax] / values[imin],
        directions: directions.len(),
        argmax: directions[imax].clone(),
        argmin: directions[imin].clone(),
    }
}

/// `d(K, B) = max ρ / min ρ` (or of the support function) over [`direction_set`].
pub fn dist_to_ball(body: &mut StarBody, count: usize, stream: RngStream) -> Result<DistanceReport> {
    let dirs = direction_set(body.dim(), count, stream);
    let values = body.evaluate(&dirs)?;
    Ok(ratio_of_extremes(&dirs, &values))
}

/// Worst membership defect of convex combinations of boundary points.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub a: f64,
    pub trials: usize,
    /// `max |z| / ρ(z/|z|) − 1` over combinations `z` of boundary points.
    pub max_violation: f64,
    pub worst: Option<(Vec<f64>, Vec<f64>)>,
}

impl ConvexityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Convexity of `K_a(w)` tested on random convex combinations of boundary
/// points. Requires `0 < a ≤ n + r − 1`.
pub fn ka_convexity_check(model: &MeasureModel, a: f64, trials: usize, stream: RngStream) -> Result<ConvexityReport> {
    let n = model.n();
    let cap = model.alpha() - 1.0;
    if !(a > 0.0 && a <= cap) {
        return Err(Error::domain("ka_convexity_check", format!("need 0 < a <= n + r − 1 = {cap}, got {a}")));
    }
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(f64, Vec<f64>, Vec<f64>)> {
            let mut rng = stream.substream(i as u64).rng();
            let mut t1 = vec![0.0; n];
            let mut t2 = vec![0.0; n];
            fill_sphere(&mut rng, &mut t1);
            fill_sphere(&mut rng, &mut t2);
            let lambda: f64 = rng.random();
            let r1 = ka_radial_oracle(model, model.alpha(), a, &t1)?;
            let r2 = ka_radial_oracle(model, model.alpha(), a, &t2)?;
            let x: Vec<f64> = t1.iter().map(|t| r1 * t).collect();
            let y: Vec<f64> = t2.iter().map(|t| r2 * t).collect();
            let z: Vec<f64> = x.iter().zip(&y).map(|(u, v)| (1.0 - lambda) * u + lambda * v).collect();
            let len = norm(&z);
            if len < 1e-12 * r1.min(r2) {
                return Ok((f64::NEG_INFINITY, x, y));
            }
            let dir: Vec<f64> = z.iter().map(|v| v / len).collect();
            let rz = ka_radial_oracle(model, model.alpha(), a, &dir)?;
            Ok((len / rz - 1.0, x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ConvexityReport { a, trials, max_violation: f64::NEG_INFINITY, worst: None };
    for (v, x, y) in rows {
        if v > report.max_violation {
            report.max_violation = v;
            report.worst = Some((x, y));
        }
    }
    Ok(report)
}

/// `ln ‖w‖∞`: exact for power-law profiles, node maximum for monotone tables,
/// grid plus golden-section refinement for one-dimensional explicit densities.
pub fn log_sup_density(model: &MeasureModel) -> Result<f64> {
    let radial_sup = |p: &crate::measures::RadialProfile| match p.kind() {
        ProfileKind::PowerLaw { .. } => crate::measures::Profile1d::log_value(p, 0.0),
        ProfileKind::Tabulated(t) => t.log_values().iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    match model.kind() {
        ModelKind::Radial(p) => Ok(radial_sup(p)),
        ModelKind::AffineRadial(a) => Ok(radial_sup(&a.base) - a.log_abs_det()),
        ModelKind::Explicit(e) if e.oracle.dim() == 1 => {
            let f = |x: f64| e.oracle.log_density(&[x]);
            Ok(sup_1d(f, 50.0))
        }
        ModelKind::Explicit(_) => Err(Error::unsupported("log_sup_density", "explicit densities above dimension 1")),
    }
}

/// Max of a unimodal-near-the-peak `f` on `[−half_width, half_width]`.
fn sup_1d(f: impl Fn(f64) -> f64, half_width: f64) -> f64 {
    let cells = 4000;
    let h = 2.0 * half_width / cells as f64;
    let (mut best_x, mut best) = (0.0, f(0.0));
    for i in 0..=cells {
        let x = -half_width + i as f64 * h;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let (_, refined) = maximize_unimodal(&f, best_x - h, best_x + h, 1e-14 * (1.0 + best_x.abs()));
    refined.max(best)
}

/// Outcome of the `K_a ⊂ K_b` sandwich check.
#[derive(Clone, Debug, Serialize)]
pub struct InclusionReport {
    pub a: f64,
    pub b: f64,
    /// `(w(0)/‖w‖∞)^{1/a − 1/b}`.
    pub left_factor: f64,
    /// `(bB(b,α−b))^{1/b} / (aB(a,α−a))^{1/a}`.
    pub right_factor: f64,
    pub directions: usize,
    /// `max left_factor·ρ_a/ρ_b − 1`.
    pub worst_left: f64,
    /// `max ρ_b / (right_factor·ρ_a) − 1`.
    pub worst_right: f64,
}

impl InclusionReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_left <= tol && self.worst_right <= tol
    }
}

/// `(w(0)/‖w‖∞)^{1/a−1/b} K_a ⊂ K_b ⊂ (bB(b,α−b))^{1/b}/(aB(a,α−a))^{1/a} K_a`,
/// checked on radial functions for `0 < a ≤ b < α`.
pub fn ka_inclusion_check(model: &MeasureModel, a: f64, b: f64, directions: &[Vec<f64>]) -> Result<InclusionReport> {
    let alpha = model.alpha();
    if !(0.0 < a && a <= b && b < alpha) {
        return Err(Error::domain("ka_inclusion_check", format!("need 0 < a <= b < {alpha}")));
    }
    let l0 = model.log_density(&vec![0.0; model.n()]);
    let ls = log_sup_density(model)?.max(l0);
    let left_factor = ((l0 - ls) * (1.0 / a - 1.0 / b)).exp();
    let right_factor =
        (((b.ln() + log_beta(b, alpha - b)?) / b) - ((a.ln() + log_beta(a, alpha - a)?) / a)).exp();
    let pairs = directions
        .par_iter()
        .map(|t| Ok((ka_radial(model, a, t)?, ka_radial(model, b, t)?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let worst_left = pairs.iter().map(|(ra, rb)| left_factor * ra / rb - 1.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_right = pairs.iter().map(|(ra, rb)| rb / (right_factor * ra) - 1.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(InclusionReport { a, b, left_factor, right_factor, directions: directions.len(), worst_left, worst_right })
}

/// A support-function value with its provenance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SupportValue {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
}

fn check_order(op: &'static str, model: &MeasureModel, q: f64) -> Result<()> {
    if !(q > 0.0 && q < model.r()) {
        return Err(Error::domain(op, format!("need 0 < q < r = {}, got q = {q}", model.r())));
    }
    Ok(())
}

/// `(mean ⟨xᵢ,θ⟩₊^q)^{1/q}` with a delta-method standard error.
pub fn zq_support_batch(batch: &SampleBatch, q: f64, theta: &[f64]) -> Result<SupportValue> {
    check_unit("zq_support", theta, batch.dim)?;
    let pw: Vec<f64> = batch.rows().map(|x| dot(x, theta).max(0.0).powf(q)).collect();
    let (m, var) = mean_var(&pw);
    let value = m.powf(1.0 / q);
    let std_error = (value / (q * m)) * (var / pw.len() as f64).sqrt();
    Ok(SupportValue { value, std_error, method: Method::MonteCarlo })
}

/// `h_{Z_q⁺}(θ) = (E⟨X,θ⟩₊^q)^{1/q}` for `0 < q < r`: closed form for radial
/// models and centered linear images, quadrature for one-dimensional explicit
/// densities, Monte Carlo otherwise.
pub fn zq_support(model: &MeasureModel, q: f64, theta: &[f64], mc: Option<(RngStream, usize)>) -> Result<SupportValue> {
    check_order("zq_support", model, q)?;
    check_unit("zq_support", theta, model.n())?;
    if let Some(l) = log_half_moment(model, theta, q)? {
        return Ok(SupportValue { value: (l / q).exp(), std_error: 0.0, method: Method::ClosedForm });
    }
    if model.n() == 1 {
        let s = theta[0];
        let l = log_mellin(
            |x: f64| model.log_density(&[s * x]),
            q + 1.0,
            HalfLine { decay: model.alpha(), support: None },
            &QuadConfig::default(),
        )?;
        return Ok(SupportValue { value: (l / q).exp(), std_error: 0.0, method: Method::Quadrature });
    }
    let (stream, count) = mc.ok_or_else(|| Error::unsupported("zq_support", "no closed form; Monte Carlo settings required"))?;
    zq_support_batch(&sample_model(stream, model, count)?, q, theta)
}

/// `ρ_q = sup_θ h_{Z_q⁺}(θ) / inf_θ h_{Z_q⁺}(θ)` over a direction set; a lower
/// bound on the true ratio.
pub fn rho_q(
    model: &MeasureModel,
    q: f64,
    count: usize,
    stream: RngStream,
    mc: Option<(RngStream, usize)>,
) -> Result<DistanceReport> {
    let mut body = StarBody::zq(model.clone(), q, mc)?;
    dist_to_ball(&mut body, count, stream)
}

/// Both sides of `Z_q⁺(g) = g(0)^{1/q} Z_q⁺(K_{m+q}(g))` in one direction.
#[derive(Clone, Debug, Serialize)]
pub struct PolarIdentityReport {
    pub q: f64,
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub method: Method,
    /// Monte Carlo standard error of `rhs`; 0 for quadrature.
    pub std_error: f64,
}

/// Compares a supplied `h_{Z_q⁺(g)}(θ)` with `g(0)^{1/q} h_{Z_q⁺(K_{m+q}(g))}(θ)`,
/// where `h_{Z_q⁺(K)}(θ)^q = ∫_K ⟨x,θ⟩₊^q dx = ∫_{S^{m−1}} ⟨φ,θ⟩₊^q ρ(φ)^{m+q} dφ / (m+q)`.
/// The sphere integral is a two-point sum for `m = 1`, adaptive quadrature in
/// the angle for `m = 2` and Monte Carlo over uniform directions for `m = 3`
/// (the radial draw of body-uniform sampling integrated out exactly).
pub fn polar_identity_check(
    g: &dyn DensityOracle,
    alpha: f64,
    q: f64,
    theta: &[f64],
    lhs: f64,
    mc: Option<(RngStream, usize)>,
) -> Result<PolarIdentityReport> {
    let m = g.dim();
    let mf = m as f64;
    if !(q > 0.0 && q < alpha - mf) {
        return Err(Error::domain("polar_identity_check", format!("need 0 < q < {}", alpha - mf)));
    }
    check_unit("polar_identity_check", theta, m)?;
    let a = mf + q;
    let rho = |phi: &[f64]| ka_radial_oracle(g, alpha, a, phi);
    let l0 = g.log_density(&vec![0.0; m]);
    let (integral, method, std_error) = match m {
        1 => {
            let mut s = 0.0;
            for phi in [1.0, -1.0] {
                let c = phi * theta[0];
                if c > 0.0 {
                    s += c.powf(q) * rho(&[phi])?.powf(a) / a;
                }
            }
            (s, Method::Quadrature, 0.0)
        }
        2 => {
            let psi = theta[1].atan2(theta[0]);
            let failure = std::sync::Mutex::new(None);
            let est = integrate(
                |t: f64| {
                    let c = (t - psi).cos().max(0.0);
                    match rho(&[t.cos(), t.sin()]) {
                        Ok(r) => c.powf(q) * r.powf(a),
                        Err(e) => {
                            *failure.lock().unwrap() = Some(e);
                            f64::NAN
                        }
                    }
                },
                psi - PI / 2.0,
                psi + PI / 2.0,
                &QuadConfig::with_rel_tol(1e-10),
            );
            if let Some(e) = failure.into_inner().unwrap() {
                return Err(e);
            }
            (est?.value / a, Method::Quadrature, 0.0)
        }
        3 => {
            let (stream, count) =
                mc.ok_or_else(|| Error::unsupported("polar_identity_check", "m = 3 needs Monte Carlo settings"))?;
            let draws = (0..count.div_ceil(crate::sampling::CHUNK))
                .into_par_iter()
                .map(|c| -> Result<Vec<f64>> {
                    let mut rng = stream.substream(c as u64).rng();
                    let len = crate::sampling::CHUNK.min(count - c * crate::sampling::CHUNK);
                    let mut out = Vec::with_capacity(len);
                    let mut phi = [0.0; 3];
                    for _ in 0..len {
                        fill_sphere(&mut rng, &mut phi);
                        let cth = dot(&phi, theta);
                        out.push(if cth > 0.0 { cth.powf(q) * rho(&phi)?.powf(a) } else { 0.0 });
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?
                .concat();
            let (mean, var) = mean_var(&draws);
            let area = sphere_area(3)?.to_f64();
            (area * mean / a, Method::MonteCarlo, area / a * (var / draws.len() as f64).sqrt())
        }
        _ => return Err(Error::unsupported("polar_identity_check", "only m <= 3")),
    };
    let rhs = ((l0 + integral.ln()) / q).exp();
    // d(I^{1/q}) = I^{1/q} dI / (q I)
    let se = rhs * std_error / (q * integral);
    Ok(PolarIdentityReport { q, m, lhs, rhs, rel_error: (rhs / lhs - 1.0).abs(), method, std_error: se })
}

/// A convex body in dimension 1 or 2 with exact slab volumes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ConvexBody {
    Interval { lo: f64, hi: f64 },
    /// Vertices in counterclockwise order.
    Polygon(Vec<[f64; 2]>),
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>()
}

impl ConvexBody {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::domain("ConvexBody::interval", "degenerate interval"));
        }
        Ok(ConvexBody::Interval { lo, hi })
    }

    /// Vertices of a strictly convex polygon in either orientation.
    pub fn polygon(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::domain("ConvexBody::polygon", "need at least 3 vertices"));
        }
        let area = shoelace(&vertices);
        if !(area.abs() > 0.0) {
            return Err(Error::domain("ConvexBody::polygon", "degenerate polygon"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        if (0..n).any(|i| cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]) <= 0.0) {
            return Err(Error::domain("ConvexBody::polygon", "polygon is not strictly convex"));
        }
        Ok(ConvexBody::Polygon(vertices))
    }

    /// The square `[−s/2, s/2]²`.
    pub fn centered_square(side: f64) -> Self {
        let h = 0.5 * side;
        ConvexBody::Polygon(vec![[-h, -h], [h, -h], [h, h], [-h, h]])
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Interval { .. } => 1,
            ConvexBody::Polygon(_) => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            ConvexBody::Interval { lo, hi } => hi - lo,
            ConvexBody::Polygon(v) => shoelace(v),
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        match self {
            ConvexBody::Interval { lo, hi } => vec![0.5 * (lo + hi)],
            ConvexBody::Polygon(v) => {
                let n = v.len();
                let (mut cx, mut cy) = (0.0, 0.0);
                for i in 0..n {
                    let (p, q) = (v[i], v[(i + 1) % n]);
                    let c = p[0] * q[1] - q[0] * p[1];
                    cx += (p[0] + q[0]) * c;
                    cy += (p[1] + q[1]) * c;
                }
                let a6 = 6.0 * shoelace(v);
                vec![cx / a6, cy / a6]
            }
        }
    }

    pub fn translate(&self, by: &[f64]) -> Self {
        match self {
            ConvexBody::Interval { lo, hi } => ConvexBody::Interval { lo: lo + by[0], hi: hi + by[0] },
            ConvexBody::Polygon(v) => ConvexBody::Polygon(v.iter().map(|p| [p[0] + by[0], p[1] + by[1]]).collect()),
        }
    }

    pub fn contains_origin_in_interior(&self) -> bool {
        match self {
            ConvexBody::Interval { lo, hi } => *lo < 0.0 && 0.0 < *hi,
            ConvexBody::Polygon(v) => {
                let n = v.len();
                (0..n).all(|i| cross(v[i], v[(i + 1) % n], [0.0, 0.0]) > 0.0)
            }
        }
    }

    /// `h_K(θ) = max_{x∈K} ⟨x,θ⟩`.
    pub fn support(&self, theta: &[f64]) -> f64 {
        match self {
            ConvexBody::Interval { lo, hi } => (lo * theta[0]).max(hi * theta[0]),
            ConvexBody::Polygon(v) => v.iter().map(|p| dot(p, theta)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `Vol(K ∩ {⟨x,θ⟩ ≥ t})`.
    pub fn slab_volume(&self, theta: &[f64], t: f64) -> f64 {
        match self {
            ConvexBody::Interval { .. } => (self.support(theta) - t).max(0.0).min(self.volume()),
            ConvexBody::Polygon(v) => {
                // clip by the half-plane ⟨x,θ⟩ ≥ t
                let n = v.len();
                let mut out = Vec::with_capacity(n + 1);
                for i in 0..n {
                    let (p, q) = (v[i], v[(i + 1) % n]);
                    let (dp, dq) = (dot(&p, theta) - t, dot(&q, theta) - t);
                    if dp >= 0.0 {
                        out.push(p);
                    }
                    if (dp >= 0.0) != (dq >= 0.0) {
                        let s = dp / (dp - dq);
                        out.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
                    }
                }
                if out.len() < 3 {
                    0.0
                } else {
                    shoelace(&out).abs()
                }
            }
        }
    }

    fn slab_breaks(&self, theta: &[f64]) -> Vec<f64> {
        let h = self.support(theta);
        let mut b = vec![0.0, h];
        if let ConvexBody::Polygon(v) = self {
            b.extend(v.iter().map(|p| dot(p, theta)).filter(|&s| s > 0.0 && s < h));
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// The three terms of `h_K ≥ h_{Z_q⁺(K)} / Vol(K ∩ {⟨x,θ⟩≥0})^{1/q} ≥ (qB(q,m+1))^{1/q} h_K`.
#[derive(Clone, Debug, Serialize)]
pub struct SlabSandwichReport {
    pub q: f64,
    pub m: usize,
    pub h_k: f64,
    pub middle: f64,
    pub lower: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

impl SlabSandwichReport {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds
    }

    pub fn middle_over_h(&self) -> f64 {
        self.middle / self.h_k
    }
}

/// Evaluates the slab-moment sandwich with `h_{Z_q⁺(K)}^q = q ∫₀^{h_K} t^{q−1} f(t) dt`,
/// `f(t) = Vol(K ∩ {⟨x,θ⟩ ≥ t})`, for 0 interior to `K`.
pub fn slab_sandwich_check(body: &ConvexBody, q: f64, theta: &[f64]) -> Result<SlabSandwichReport> {
    let m = body.dim();
    check_unit("slab_sandwich_check", theta, m)?;
    if !body.contains_origin_in_interior() {
        return Err(Error::domain("slab_sandwich_check", "0 must be interior to the body"));
    }
    if !(q > 0.0) {
        return Err(Error::domain("slab_sandwich_check", "q must be positive"));
    }
    let h_k = body.support(theta);
    let f0 = body.slab_volume(theta, 0.0);
    // ∫₀^h t^{q−1} f(t) dt; with t = h·u the integrand is h^q u^{q−1} f(hu)
    let est = integrate_partition(
        |u: f64| u.powf(q - 1.0) * body.slab_volume(theta, h_k * u),
        &body.slab_breaks(theta).iter().map(|b| b / h_k).collect::<Vec<_>>(),
        &QuadConfig::with_rel_tol(1e-12),
    )?;
    let ln_moment = q.ln() + q * h_k.ln() + est.value.ln();
    let middle = ((ln_moment - f0.ln()) / q).exp();
    let lower = ((q.ln() + log_beta(q, m as f64 + 1.0)?) / q).exp() * h_k;
    let tol = 1e-10;
    Ok(SlabSandwichReport {
        q,
        m,
        h_k,
        middle,
        lower,
        upper_holds: middle <= h_k * (1.0 + tol),
        lower_holds: middle >= lower * (1.0 - tol),
    })
}

/// `d(K_{m+p}(g), B)` against `d(Z⁺_{max(m,p)}(g), B)`.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceComparison {
    pub m: usize,
    pub p: f64,
    pub body_distance: f64,
    pub moment_distance: f64,
    pub ratio: f64,
    pub directions: usize,
}

impl DistanceComparison {
    pub fn passes(&self, c: f64) -> bool {
        self.ratio <= c
    }
}

/// Compares the distances to the ball of `K_{m+p}(g)` and `Z⁺_{max(m,p)}(g)`
/// for a centered density in dimension `m ∈ {1, 2}` with `r ≥ m + 1` and
/// `−m/2 ≤ p ≤ r − 1`.
pub fn ka_distance_comparison(
    g: &MeasureModel,
    p: f64,
    count: usize,
    stream: RngStream,
    mc: Option<(RngStream, usize)>,
) -> Result<DistanceComparison> {
    let m = g.n();
    let mf = m as f64;
    let r = g.r();
    if !(m == 1 || m == 2) {
        return Err(Error::unsupported("ka_distance_comparison", "only m in {1, 2}"));
    }
    if !(r >= mf + 1.0 && p >= -mf / 2.0 && p <= r - 1.0) {
        return Err(Error::domain("ka_distance_comparison", format!("need r >= m+1 and −m/2 <= p <= r−1, got r={r}, p={p}")));
    }
    let mut ka = StarBody::ka(Arc::new(g.clone()), g.alpha(), mf + p)?;
    let body = dist_to_ball(&mut ka, count, stream)?;
    let moment = rho_q(g, mf.max(p), count, stream, mc)?;
    Ok(DistanceComparison {
        m,
        p,
        body_distance: body.value,
        moment_distance: moment.value,
        ratio: body.value / moment.value,
        directions: body.directions,
    })
}

/// `g(0)/‖g‖∞ ≥ ((r−1)/(r+m−1))^{r+m} ≥ e^{−2m}`.
#[derive(Clone, Debug, Serialize)]
pub struct RatioBoundReport {
    pub m: usize,
    pub r: f64,
    pub ratio: f64,
    pub lower: f64,
    pub exp_bound: f64,
    pub left_holds: bool,
    pub right_holds: bool,
}

/// `((r−1)/(r+m−1))^{r+m}` and `e^{−2m}`.
pub fn ratio_bounds(m: f64, r: f64) -> (f64, f64) {
    (((r - 1.0) / (r + m - 1.0)).powf(r + m), (-2.0 * m).exp())
}

/// Checks both inequalities for a model with barycenter 0 (the caller's
/// responsibility) and `m ≤ r − 1`.
pub fn ratio_bound_check(g: &MeasureModel) -> Result<RatioBoundReport> {
    let m = g.n();
    let r = g.r();
    let l0 = g.log_density(&vec![0.0; m]);
    let ls = log_sup_density(g)?.max(l0);
    let ratio = (l0 - ls).exp();
    let (lower, exp_bound) = ratio_bounds(m as f64, r);
    Ok(RatioBoundReport {
        m,
        r,
        ratio,
        lower,
        exp_bound,
        left_holds: ratio >= lower * (1.0 - 1e-12),
        right_holds: lower >= exp_bound,
    })
}

/// `(r, m)` points of a grid where `((r−1)/(r+m−1))^{r+m} < e^{−2m}`.
pub fn ratio_bound_violations(rs: &[f64], ms: &[usize]) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for &m in ms {
        for &r in rs {
            if m as f64 <= r - 1.0 {
                let (lower, e) = ratio_bounds(m as f64, r);
                if lower < e {
                    out.push((r, m));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_fnr, MarginalProfile, TwoSidedPowerLaw};
    use crate::sampling::{sample_fnr, sample_sphere};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn random_dirs(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(seed, 0).rng();
        (0..count).map(|_| sample_sphere(&mut rng, n)).collect()
    }

    #[test]
    fn ka_of_radial_model_is_a_ball() {
        let model = make_fnr(4, 7.0).unwrap();
        let vals: Vec<f64> = random_dirs(4, 10, 1).iter().map(|t| ka_radial(&model, 3.0, t).unwrap()).collect();
        for v in &vals {
            assert_relative_eq!(*v, vals[0], max_relative = 1e-10);
        }
        let mut body = StarBody::ka(Arc::new(model), 11.0, 3.0).unwrap();
        assert!((dist_to_ball(&mut body, 50, RngStream::new(2, 0)).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ka_one_dimensional_half_mass() {
        let model = make_fnr(1, 5.0).unwrap();
        let c2 = crate::measures::fnr_scale(1, 5.0);
        // c₁ = c₂ / (2 B(1,5)) = 5c₂/2
        let oracle = 0.5 / (2.5 * c2);
        assert_relative_eq!(ka_radial(&model, 1.0, &[1.0]).unwrap(), oracle, max_relative = 1e-10);
        assert!((oracle - 0.48990).abs() < 1e-5);
    }

    #[test]
    fn ka_detects_asymmetry_and_bad_orders() {
        let w = TwoSidedPowerLaw::new(2.0, 0.5, 6.0).unwrap().model();
        let plus = ka_radial(&w, 1.0, &[1.0]).unwrap();
        let minus = ka_radial(&w, 1.0, &[-1.0]).unwrap();
        assert!((plus / minus - 1.0).abs() > 0.1);
        // a = 2 integrates s·w(s) on each half-line, equal for a centered density
        let plus = ka_radial(&w, 2.0, &[1.0]).unwrap();
        let minus = ka_radial(&w, 2.0, &[-1.0]).unwrap();
        assert_relative_eq!(plus, minus, max_relative = 1e-9);
        assert!(ka_radial(&w, 7.0, &[1.0]).unwrap_err().is_domain());
    }

    #[test]
    fn ka_scales_inversely() {
        let base = make_fnr(3, 9.0).unwrap();
        let lambda = 2.7;
        let scaled = MeasureModel::affine(&base, DMatrix::identity(3, 3) / lambda, DVector::zeros(3)).unwrap();
        for t in random_dirs(3, 3, 4) {
            for a in [1.0, 4.0, 10.0] {
                let r0 = ka_radial(&base, a, &t).unwrap();
                let r1 = ka_radial(&scaled, a, &t).unwrap();
                assert_relative_eq!(r1, r0 / lambda, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn ka_convexity_of_affine_image() {
        let base = make_fnr(3, 6.0).unwrap();
        let map = DMatrix::from_row_slice(3, 3, &[1.5, 0.4, 0.0, -0.2, 0.8, 0.3, 0.0, 0.5, 2.0]);
        let shifted = MeasureModel::affine(&base, map, DVector::from_column_slice(&[0.3, -0.2, 0.1])).unwrap();
        let rep = ka_convexity_check(&shifted, 4.0, 2000, RngStream::new(5, 0)).unwrap();
        assert!(rep.passes(1e-8), "{rep:?}");
        assert!(ka_convexity_check(&shifted, 8.5, 10, RngStream::new(5, 0)).unwrap_err().is_domain());
        let radial = ka_convexity_check(&base, 3.0, 200, RngStream::new(6, 0)).unwrap();
        assert!(radial.max_violation <= 1e-10);
    }

    #[test]
    fn inclusions_hold() {
        let model = make_fnr(2, 8.0).unwrap();
        let rep = ka_inclusion_check(&model, 2.0, 5.0, &direction_set(2, 50, RngStream::new(0, 0))).unwrap();
        assert_eq!(rep.left_factor, 1.0);
        assert!(rep.passes(1e-8), "{rep:?}");
        let w = TwoSidedPowerLaw::new(3.0, 0.7, 5.0).unwrap();
        let sup = w.sup();
        let model = w.model();
        assert_relative_eq!(log_sup_density(&model).unwrap(), sup.ln(), max_relative = 1e-12);
        let rep = ka_inclusion_check(&model, 1.0, 3.5, &direction_set(1, 0, RngStream::new(0, 0))).unwrap();
        assert!(rep.left_factor < 1.0);
        assert!(rep.passes(1e-8), "{rep:?}");
        assert!(ka_inclusion_check(&model, 3.0, 2.0, &[]).unwrap_err().is_domain());
    }

    #[test]
    fn zq_examples() {
        let model = make_fnr(6, 9.0).unwrap();
        let t = random_dirs(6, 1, 7).remove(0);
        assert_relative_eq!(zq_support(&model, 2.0, &t, None).unwrap().value, 0.5f64.sqrt(), max_relative = 1e-12);

        let model = make_fnr(10, 20.0).unwrap();
        let e1 = unit(10, 0);
        let exact = zq_support(&model, 3.0, &e1, None).unwrap().value;
        let batch = sample_fnr(RngStream::new(8, 0), &model, 300_000).unwrap();
        let mc = zq_support_batch(&batch, 3.0, &e1).unwrap();
        assert!((mc.value - exact).abs() < 3.0 * mc.std_error, "{mc:?} vs {exact}");

        let mut diag = DMatrix::identity(4, 4);
        diag[(0, 0)] = 2.0;
        let base = make_fnr(4, 9.0).unwrap();
        let stretched = MeasureModel::affine(&base, diag, DVector::zeros(4)).unwrap();
        let e1 = unit(4, 0);
        assert_relative_eq!(
            zq_support(&stretched, 3.0, &e1, None).unwrap().value,
            2.0 * zq_support(&base, 3.0, &e1, None).unwrap().value,
            max_relative = 1e-12
        );
        assert!(zq_support(&base, 9.0, &e1, None).unwrap_err().is_domain());
    }

    #[test]
    fn zq_one_dimensional_quadrature_matches_monte_carlo() {
        let model = TwoSidedPowerLaw::new(1.5, 0.6, 7.0).unwrap().model();
        for s in [1.0, -1.0] {
            let quad = zq_support(&model, 2.5, &[s], None).unwrap();
            let batch = sample_model(RngStream::new(9, 0), &model, 400_000).unwrap();
            let mc = zq_support_batch(&batch, 2.5, &[s]).unwrap();
            assert_eq!(quad.method, Method::Quadrature);
            assert!((mc.value - quad.value).abs() < 3.0 * mc.std_error, "{mc:?} vs {quad:?}");
        }
    }

    #[test]
    fn rho_q_examples() {
        let model = make_fnr(5, 12.0).unwrap();
        let rep = rho_q(&model, 3.0, 200, RngStream::new(10, 0), None).unwrap();
        assert!((rep.value - 1.0).abs() < 1e-10);
        let base = make_fnr(3, 12.0).unwrap();
        let map = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.3, 0.0, 0.4]);
        let cond = crate::measures::condition_number(&map);
        let image = MeasureModel::affine(&base, map, DVector::zeros(3)).unwrap();
        let r_image = rho_q(&image, 3.0, 2000, RngStream::new(10, 0), None).unwrap();
        // X = base is the isotropic preimage: ρ_q(X) ≤ ρ_q(AX)·‖A‖‖A⁻¹‖ and vice versa
        assert!(r_image.value <= 1.0 * cond * (1.0 + 1e-12));
        assert!(1.0 <= r_image.value * cond);
        assert!(r_image.value > 1.5);
    }

    #[test]
    fn ellipsoid_distance() {
        let mut ball = StarBody::ball(2, 3.0);
        assert_eq!(dist_to_ball(&mut ball, 100, RngStream::new(0, 0)).unwrap().value, 1.0);
        let mut e = StarBody::ellipsoid(vec![2.0, 1.0]);
        let d = dist_to_ball(&mut e, 10_000, RngStream::new(0, 0)).unwrap();
        assert!((d.value - 2.0).abs() < 0.02);
        let mut csv = Vec::new();
        e.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("x0,x1,value\n"));
    }

    #[test]
    fn polar_identity_one_dimensional_marginal() {
        let parent = make_fnr(3, 8.0).unwrap();
        let marginal = MarginalProfile::new(&parent, 1).unwrap();
        let alpha = marginal.alpha() + 0.0;
        for q in [1.0, 2.5, 5.0] {
            let lhs = zq_support(&parent, q, &[1.0, 0.0, 0.0], None).unwrap().value;
            let rep = polar_identity_check(&marginal, alpha, q, &[1.0], lhs, None).unwrap();
            assert!(rep.rel_error <= 1e-6, "{rep:?}");
        }
    }

    #[test]
    fn polar_identity_two_dimensional() {
        let radial = make_fnr(2, 9.0).unwrap();
        let t = [0.6, 0.8];
        let lhs = zq_support(&radial, 3.0, &t, None).unwrap().value;
        let rep = polar_identity_check(&radial, radial.alpha(), 3.0, &t, lhs, None).unwrap();
        assert!(rep.rel_error <= 1e-6, "{rep:?}");

        let base = make_fnr(2, 7.0).unwrap();
        let map = DMatrix::from_row_slice(2, 2, &[1.7, 0.4, -0.3, 0.6]);
        let image = MeasureModel::affine(&base, map, DVector::zeros(2)).unwrap();
        let lhs = zq_support(&image, 2.0, &t, None).unwrap().value;
        let rep = polar_identity_check(&image, image.alpha(), 2.0, &t, lhs, None).unwrap();
        assert!(rep.rel_error <= 1e-6, "{rep:?}");

        // g ↦ λ^m g(λ·) rescales both sides by 1/λ
        let lambda = 1.9;
        let scaled = MeasureModel::affine(&base, DMatrix::identity(2, 2) / lambda, DVector::zeros(2)).unwrap();
        let lhs_s = zq_support(&scaled, 2.0, &t, None).unwrap().value;
        let rep_s = polar_identity_check(&scaled, scaled.alpha(), 2.0, &t, lhs_s, None).unwrap();
        let rep_b = polar_identity_check(&base, base.alpha(), 2.0, &t, zq_support(&base, 2.0, &t, None).unwrap().value, None).unwrap();
        assert_relative_eq!(rep_s.rhs * lambda, rep_b.rhs, max_relative = 1e-8);
        assert_relative_eq!(rep_s.lhs * lambda, rep_b.lhs, max_relative = 1e-12);
    }

    #[test]
    fn polar_identity_three_dimensional_monte_carlo() {
        let base = make_fnr(3, 8.0).unwrap();
        let map = DMatrix::from_row_slice(3, 3, &[1.4, 0.2, 0.0, 0.0, 0.9, 0.3, 0.1, 0.0, 0.7]);
        let image = MeasureModel::affine(&base, map, DVector::zeros(3)).unwrap();
        let t = [0.0, 0.6, 0.8];
        let lhs = zq_support(&image, 2.0, &t, None).unwrap().value;
        let rep = polar_identity_check(&image, image.alpha(), 2.0, &t, lhs, Some((RngStream::new(11, 0), 40_000))).unwrap();
        assert!(rep.rel_error <= 1e-2, "{rep:?}");
        assert!((rep.rhs - rep.lhs).abs() < 4.0 * rep.std_error);
    }

    #[test]
    fn slab_sandwich_examples() {
        let seg = ConvexBody::interval(-1.0, 1.0).unwrap();
        let rep = slab_sandwich_check(&seg, 1.0, &[1.0]).unwrap();
        assert_relative_eq!(rep.middle, 0.5, max_relative = 1e-12);
        assert_relative_eq!(rep.lower, 0.5, max_relative = 1e-12);
        assert!(rep.holds());

        let square = ConvexBody::centered_square(1.0);
        for q in 1..=8 {
            let q = q as f64;
            let rep = slab_sandwich_check(&square, q, &[1.0, 0.0]).unwrap();
            assert!(rep.holds(), "{rep:?}");
            // f(t) = 1/2 − t: middle = (1/2)(q+1)^{−1/q}
            assert_relative_eq!(rep.middle, 0.5 * (q + 1.0).powf(-1.0 / q), max_relative = 1e-10);
        }
        let tri = ConvexBody::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let c = tri.centroid();
        assert_relative_eq!(c[0], 1.0 / 3.0, max_relative = 1e-14);
        let tri = tri.translate(&[-c[0], -c[1]]);
        for q in 1..=8 {
            for t in direction_set(2, 12, RngStream::new(0, 0)) {
                assert!(slab_sandwich_check(&tri, q as f64, &t).unwrap().holds());
            }
        }
        let off = ConvexBody::polygon(vec![[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!(slab_sandwich_check(&off, 2.0, &[1.0, 0.0]).unwrap_err().is_domain());
    }

    #[test]
    fn triangle_slab_volume_is_quadratic() {
        let tri = ConvexBody::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        for t in [0.0, 0.2, 0.5, 0.9] {
            assert_relative_eq!(tri.slab_volume(&[1.0, 0.0], t), (1.0 - t).powi(2) / 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn distance_comparison_examples() {
        let radial = make_fnr(2, 9.0).unwrap();
        let rep = ka_distance_comparison(&radial, 2.0, 64, RngStream::new(0, 0), None).unwrap();
        assert!((rep.ratio - 1.0).abs() < 1e-9 && (rep.body_distance - 1.0).abs() < 1e-9);
        let base = make_fnr(2, 9.0).unwrap();
        let map = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.0, 0.7]);
        let image = MeasureModel::affine(&base, map, DVector::zeros(2)).unwrap();
        for p in [-1.0, 2.0, 8.0] {
            let rep = ka_distance_comparison(&image, p, 128, RngStream::new(0, 0), None).unwrap();
            assert!(rep.ratio.is_finite() && rep.ratio > 0.0, "{rep:?}");
        }
        assert!(ka_distance_comparison(&image, -1.5, 16, RngStream::new(0, 0), None).unwrap_err().is_domain());
        let skew = TwoSidedPowerLaw::new(2.5, 0.8, 6.0).unwrap().model();
        let rep = ka_distance_comparison(&skew, -0.5, 0, RngStream::new(0, 0), None).unwrap();
        assert!(rep.ratio.is_finite() && rep.body_distance > 1.0);
    }

    #[test]
    fn pinned_image_distance() {
        let base = make_fnr(2, 9.0).unwrap();
        let map = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.0, 0.7]);
        let cond = crate::measures::condition_number(&map);
        let image = MeasureModel::affine(&base, map, DVector::zeros(2)).unwrap();
        let rep = ka_distance_comparison(&image, 2.0, 128, RngStream::new(0, 0), None).unwrap();
        assert_relative_eq!(rep.body_distance, 4.407777148597868, max_relative = 1e-9);
        assert_relative_eq!(rep.ratio, 1.0, max_relative = 1e-9);
        assert!(rep.body_distance <= cond && rep.body_distance > 0.99 * cond);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ka_and_zq_are_one_homogeneous(lambda in 0.2f64..5.0, a in 0.5f64..6.0, q in 0.5f64..5.0, seed in 0u64..1000) {
            let base = make_fnr(3, 7.0).unwrap();
            let scaled = MeasureModel::affine(&base, DMatrix::identity(3, 3) * lambda, DVector::zeros(3)).unwrap();
            let t = random_dirs(3, 1, seed).remove(0);
            prop_assert!((ka_radial(&scaled, a, &t).unwrap() / ka_radial(&base, a, &t).unwrap() / lambda - 1.0).abs() < 1e-8);
            let zs = zq_support(&scaled, q, &t, None).unwrap().value;
            let zb = zq_support(&base, q, &t, None).unwrap().value;
            prop_assert!((zs / zb / lambda - 1.0).abs() < 1e-12);
        }

        #[test]
        fn slab_sandwich_holds_for_random_triangles(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
            q in 0.5f64..12.0,
            angle in 0.0f64..6.283,
        ) {
            let v: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            prop_assume!(shoelace(&v).abs() > 0.05);
            let tri = ConvexBody::polygon(v).unwrap();
            let c = tri.centroid();
            let tri = tri.translate(&[-c[0], -c[1]]);
            let rep = slab_sandwich_check(&tri, q, &[angle.cos(), angle.sin()]).unwrap();
            prop_assert!(rep.holds(), "{:?}", rep);
        }
    }

    #[test]
    fn ratio_bound_examples() {
        let radial = make_fnr(2, 6.0).unwrap();
        let rep = ratio_bound_check(&radial).unwrap();
        assert_eq!(rep.ratio, 1.0);
        assert!(rep.left_holds && rep.right_holds);
        let skew = TwoSidedPowerLaw::new(4.0, 0.5, 5.0).unwrap();
        let rep = ratio_bound_check(&skew.model()).unwrap();
        assert!(rep.ratio < 1.0 && rep.left_holds && rep.right_holds, "{rep:?}");
        let rs: Vec<f64> = (0..200).map(|i| 2.0 + 0.05 * i as f64).collect();
        let bad = ratio_bound_violations(&rs, &[1, 2, 3]);
        assert!(bad.iter().all(|&(r, m)| m == 1 && r < 2.11), "{bad:?}");
        assert!(!bad.is_empty());
    }
}
