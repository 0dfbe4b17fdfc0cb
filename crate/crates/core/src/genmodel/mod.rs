//! Seeded generators for the stochastic ball model.
//!
//! All randomness flows from explicit `u64` seeds through ChaCha20, so a given
//! seed produces the same cloud on every platform. Independent tasks derive
//! their seeds with [`derive_seed`].

mod bottleneck;

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::{euclidean, fmt_f64, read_rows_csv, PointCloud};
use crate::error::{Error, Result};

pub use bottleneck::{bottleneck_winf, BOTTLENECK_MAX_POINTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallComponent {
    pub center: Vec<f64>,
    pub radius: f64,
    pub mass: f64,
}

impl BallComponent {
    pub fn new(center: Vec<f64>, radius: f64, mass: f64) -> Self {
        Self { center, radius, mass }
    }
}

/// A mixture of uniform distributions on pairwise disjoint closed balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallModel {
    pub dim: usize,
    pub components: Vec<BallComponent>,
}

impl BallModel {
    pub fn new(dim: usize, components: Vec<BallComponent>) -> Result<Self> {
        let model = Self { dim, components };
        model.validate()?;
        Ok(model)
    }

    /// Two balls of radius `radius` and equal mass whose surfaces are `gap`
    /// apart along the first axis, centered about the origin.
    pub fn two_balls(dim: usize, radius: f64, gap: f64) -> Result<Self> {
        let half = radius + gap / 2.0;
        let mut left = vec![0.0; dim];
        let mut right = vec![0.0; dim];
        left[0] = -half;
        right[0] = half;
        Self::new(
            dim,
            vec![
                BallComponent::new(left, radius, 0.5),
                BallComponent::new(right, radius, 0.5),
            ],
        )
    }

    pub fn single_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, vec![BallComponent::new(vec![0.0; dim], radius, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if self.components.is_empty() {
            return Err(Error::InvalidModel("model needs at least one component".into()));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.center.len() != self.dim {
                return Err(Error::InvalidModel(format!(
                    "component {i} center has {} coordinates, expected {}",
                    c.center.len(),
                    self.dim
                )));
            }
            if c.center.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("component {i} center is not finite")));
            }
            if !(c.radius > 0.0 && c.radius.is_finite()) {
                return Err(Error::InvalidModel(format!("component {i} radius must be positive")));
            }
            if !(c.mass > 0.0) {
                return Err(Error::InvalidModel(format!("component {i} mass must be positive")));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.mass).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("masses sum to {total}, not 1")));
        }
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate().skip(i + 1) {
                if euclidean(&a.center, &b.center) <= a.radius + b.radius {
                    return Err(Error::InvalidModel(format!("closed balls {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.center.clone()).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Sampled points with the component each was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub labels: Vec<usize>,
}

impl LabeledCloud {
    /// Labels restricted to open balls: a point on a sphere (or outside it by
    /// rounding) gets `None`.
    pub fn interior_labels(&self, model: &BallModel) -> Vec<Option<usize>> {
        self.cloud
            .points()
            .zip(&self.labels)
            .map(|(p, &l)| {
                let c = &model.components[l];
                (euclidean(p, &c.center) < c.radius).then_some(l)
            })
            .collect()
    }

    /// Points of each component, indexed by component.
    pub fn members(&self, components: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); components];
        for (n, &l) in self.labels.iter().enumerate() {
            out[l].push(n);
        }
        out
    }

    /// CSV rows of `d` coordinates followed by the label, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for (p, l) in self.cloud.points().zip(&self.labels) {
            let mut row: Vec<String> = p.iter().map(|&c| fmt_f64(c)).collect();
            row.push(l.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut raw = Vec::new();
        let (dim, coords) = read_rows_csv(reader, origin, Some(&mut raw))?;
        let labels = raw
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    path: origin.to_path_buf(),
                    line: i as u64 + 1,
                    message: format!("cannot parse label `{s}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cloud: PointCloud::new(dim, coords)?,
            labels,
        })
    }
}

/// Seed for task `index` of a run seeded with `seed`: SplitMix64 applied to
/// `seed ⊕ (index · 0x9E3779B97F4A7C15)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A uniform draw from the ball of radius `radius` about the origin: Gaussian
/// direction, radius `radius · V^{1/d}`.
fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64, out: &mut [f64]) {
    loop {
        let mut sq = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            sq += *v * *v;
        }
        if sq > 0.0 {
            let v: f64 = rng.random();
            let scale = radius * v.powf(1.0 / dim as f64) / sq.sqrt();
            out.iter_mut().for_each(|c| *c *= scale);
            return;
        }
    }
}

/// Draws `n` i.i.d. points: a component by mass, then uniformly within its ball.
pub fn sample(model: &BallModel, n: usize, seed: u64) -> Result<LabeledCloud> {
    model.validate()?;
    if n == 0 {
        return Err(Error::InvalidCloud("sample size must be at least 1".into()));
    }
    let d = model.dim;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(model.components.len());
    let mut acc = 0.0;
    for c in &model.components {
        acc += c.mass;
        cumulative.push(acc);
    }
    let mut coords = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    for row in coords.chunks_exact_mut(d) {
        let t: f64 = rng.random::<f64>() * acc;
        let l = cumulative
            .iter()
            .position(|&c| t < c)
            .unwrap_or(model.components.len() - 1);
        let comp = &model.components[l];
        uniform_in_ball(&mut rng, d, comp.radius, row);
        for (v, c) in row.iter_mut().zip(&comp.center) {
            *v += c;
        }
        labels.push(l);
    }
    Ok(LabeledCloud {
        cloud: PointCloud::new(d, coords)?,
        labels,
    })
}

/// Moves every point by an independent uniform vector in the closed `delta`-ball,
/// so the identity coupling witnesses `W∞ ≤ delta`. `delta = 0` returns the input.
pub fn perturb(cloud: &PointCloud, delta: f64, seed: u64) -> Result<PointCloud> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(crate::error::invalid_param("delta", format!("{delta} is not a finite nonnegative number")));
    }
    if delta == 0.0 {
        return Ok(cloud.clone());
    }
    let d = cloud.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut coords = cloud.as_flat().to_vec();
    let mut step = vec![0.0; d];
    for row in coords.chunks_exact_mut(d) {
        uniform_in_ball(&mut rng, d, delta, &mut step);
        for (v, s) in row.iter_mut().zip(&step) {
            *v += s;
        }
    }
    PointCloud::new(d, coords)
}
