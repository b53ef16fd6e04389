//! Seedable, reproducible random generation.
//!
//! Every random quantity is drawn from a [`RngStream`], a `(seed, stream)`
//! pair mapped onto ChaCha8's 64-bit stream counter. Batch samplers split the
//! work into fixed chunks of [`CHUNK`] rows and give chunk `i` the substream
//! `i`, so the output does not depend on how rayon schedules the chunks.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{MeasureModel, ModelKind, ModelSpec, ProfileKind};

/// Rows generated per substream in batch samplers.
pub const CHUNK: usize = 4096;

/// A reproducible random stream identified by `(seed, stream)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Child stream `index`, distinct from this stream and its other children.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream { seed: self.seed, stream: splitmix64(self.stream ^ splitmix64(index)) }
    }
}

/// Uniform point on `S^{n−1}` (normalized Gaussian).
pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_sphere(rng, &mut v);
    v
}

/// Overwrite `out` with a uniform point on the unit sphere.
pub fn fill_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
            s += *x * *x;
        }
        if s > 0.0 {
            let inv = 1.0 / s.sqrt();
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    Gamma::new(shape, 1.0).expect("positive gamma shape").sample(rng)
}

/// `Beta(a, b)` as `Ga(a) / (Ga(a) + Ga(b))`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain("sample_beta", format!("shapes must be positive, got ({a}, {b})")));
    }
    loop {
        let x = gamma(rng, a);
        let y = gamma(rng, b);
        let u = x / (x + y);
        if u > 0.0 && u < 1.0 {
            return Ok(u);
        }
    }
}

/// Radius with density `∝ t^{n−1} (1 + c₂t)^{−(n+m)}`.
///
/// With `u ~ Beta(n, m)` the radius is `u / (c₂(1−u))`; writing
/// `u = G₁/(G₁+G₂)` gives `G₁/(c₂ G₂)`, which avoids cancellation near `u = 1`.
pub fn sample_power_law_radius<R: Rng + ?Sized>(rng: &mut R, n: f64, m: f64, c2: f64) -> f64 {
    gamma(rng, n) / (c2 * gamma(rng, m))
}

/// Haar-distributed rotation in `SO(n)`.
///
/// QR of a Gaussian matrix, columns of `Q` multiplied by `sign(R_ii)`; if the
/// result has determinant −1 the last column is negated.
pub fn haar_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(n - 1).neg_mut();
    }
    q
}

/// Where a batch came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
    pub count: usize,
}

/// `N × n` points stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub dim: usize,
    pub points: Vec<f64>,
    pub model: Option<ModelSpec>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    count: usize,
    seed: u64,
    stream: u64,
    model: Option<ModelSpec>,
    layout: String,
}

const LAYOUT: &str = "f64-le-row-major";

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.provenance.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim.max(1))
    }

    pub fn norms(&self) -> Vec<f64> {
        self.rows().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// `⟨Xᵢ, θ⟩` for every row.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.rows().map(|x| x.iter().zip(theta).map(|(a, b)| a * b).sum()).collect()
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Write the matrix to `path` and its descriptor to `path.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for x in &self.points {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        let side = Sidecar {
            dim: self.dim,
            count: self.provenance.count,
            seed: self.provenance.seed,
            stream: self.provenance.stream,
            model: self.model.clone(),
            layout: LAYOUT.to_owned(),
        };
        fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(Self::sidecar_path(path))?)?;
        if side.layout != LAYOUT {
            return Err(Error::unsupported("SampleBatch::load", format!("layout {}", side.layout)));
        }
        let mut bytes = Vec::new();
        BufReader::new(fs::File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() != 8 * side.dim * side.count {
            return Err(Error::numeric(
                "SampleBatch::load",
                format!("expected {} bytes, found {}", 8 * side.dim * side.count, bytes.len()),
            ));
        }
        let points = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        Ok(SampleBatch {
            dim: side.dim,
            points,
            model: side.model,
            provenance: Provenance { seed: side.seed, stream: side.stream, count: side.count },
        })
    }
}

/// Fill `count` rows of width `dim` in parallel, one substream per chunk.
pub fn par_rows<F>(stream: RngStream, count: usize, dim: usize, fill: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let mut out = vec![0.0; count * dim];
    if dim == 0 {
        return out;
    }
    out.par_chunks_mut(CHUNK * dim).enumerate().for_each(|(c, chunk)| {
        let mut rng = stream.substream(c as u64).rng();
        for row in chunk.chunks_exact_mut(dim) {
            fill(&mut rng, row);
        }
    });
    out
}

fn power_law_parts(model: &MeasureModel, op: &'static str) -> Result<(f64, f64)> {
    let profile = match model.kind() {
        ModelKind::Radial(p) => p,
        ModelKind::AffineRadial(a) => &a.base,
        ModelKind::Explicit(_) => {
            return Err(Error::unsupported(op, "explicit densities have no exact sampler"))
        }
    };
    match profile.kind() {
        ProfileKind::PowerLaw { c2, .. } => Ok((profile.alpha() - model.n() as f64, *c2)),
        ProfileKind::Tabulated(_) => Err(Error::unsupported(op, "tabulated profiles have no exact sampler")),
    }
}

/// Exact samples of a radial power-law model: uniform direction times an
/// independent radius from [`sample_power_law_radius`].
pub fn sample_fnr(stream: RngStream, model: &MeasureModel, count: usize) -> Result<SampleBatch> {
    if !matches!(model.kind(), ModelKind::Radial(_)) {
        return Err(Error::unsupported("sample_fnr", "model is not radial"));
    }
    let (m, c2) = power_law_parts(model, "sample_fnr")?;
    let n = model.n();
    let points = par_rows(stream, count, n, |rng, row| {
        fill_sphere(rng, row);
        let t = sample_power_law_radius(rng, n as f64, m, c2);
        row.iter_mut().for_each(|x| *x *= t);
    });
    Ok(SampleBatch {
        dim: n,
        points,
        model: model.spec().cloned(),
        provenance: Provenance { seed: stream.seed, stream: stream.stream, count },
    })
}

/// `|X|` only, for a radial power-law model. Same radius law as
/// [`sample_fnr`] without generating directions, so `n` can be large.
pub fn sample_norms(stream: RngStream, model: &MeasureModel, count: usize) -> Result<Vec<f64>> {
    if !matches!(model.kind(), ModelKind::Radial(_)) {
        return Err(Error::unsupported("sample_norms", "model is not radial"));
    }
    let (m, c2) = power_law_parts(model, "sample_norms")?;
    let n = model.n() as f64;
    Ok(par_rows(stream, count, 1, |rng, row| row[0] = sample_power_law_radius(rng, n, m, c2)))
}

/// Exact samples of a radial or affine-radial power-law model.
pub fn sample_model(stream: RngStream, model: &MeasureModel, count: usize) -> Result<SampleBatch> {
    match model.kind() {
        ModelKind::Radial(_) => sample_fnr(stream, model, count),
        ModelKind::AffineRadial(aff) => {
            let (m, c2) = power_law_parts(model, "sample_model")?;
            let n = model.n();
            let map = &aff.map;
            let shift = &aff.shift;
            let points = par_rows(stream, count, n, |rng, row| {
                let mut y = DVector::zeros(n);
                fill_sphere(rng, y.as_mut_slice());
                y *= sample_power_law_radius(rng, n as f64, m, c2);
                let x = map * y + shift;
                row.copy_from_slice(x.as_slice());
            });
            Ok(SampleBatch {
                dim: n,
                points,
                model: model.spec().cloned(),
                provenance: Provenance { seed: stream.seed, stream: stream.stream, count },
            })
        }
        ModelKind::Explicit(e) => {
            let sampler = e.sampler.as_ref().ok_or_else(|| {
                Error::unsupported("sample_model", "explicit density was given without a sampler")
            })?;
            let n = model.n();
            Ok(SampleBatch {
                dim: n,
                points: par_rows(stream, count, n, |rng, row| sampler.sample_into(rng, row)),
                model: None,
                provenance: Provenance { seed: stream.seed, stream: stream.stream, count },
            })
        }
    }
}
