use std::f64::consts::TAU;

use rand_distr::{Distribution, StandardNormal};

use super::{split_72_8_20, DatasetSplit, Domain, Sample};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, stream};

/// Radius of the circle carrying the class means.
pub const CLASS_RADIUS: f64 = 3.0;

/// Gaussian class clusters with a rotation + translation shift on the
/// target domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSpec {
    pub num_classes: usize,
    pub dim: usize,
    /// Samples per class per domain, before splitting.
    pub per_class: usize,
    /// Rotation of the target domain in the first two coordinates, radians.
    pub rotation: f64,
    /// Added to target samples after rotation; missing trailing entries are 0.
    pub translation: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec {
            num_classes: 5,
            dim: 2,
            per_class: 55,
            rotation: std::f64::consts::FRAC_PI_4,
            translation: vec![0.0, 0.0],
            noise: 0.3,
            seed: 0,
        }
    }
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("num_classes must be at least 2"));
        }
        if self.dim < 2 {
            return Err(Error::config("dim must be at least 2"));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise must be positive"));
        }
        if self.translation.len() > self.dim {
            return Err(Error::config(format!(
                "translation has {} entries but dim is {}",
                self.translation.len(),
                self.dim
            )));
        }
        if !self.rotation.is_finite() || self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("rotation and translation must be finite"));
        }
        Ok(())
    }

    /// Mean of class `c`, in the source domain.
    pub fn class_mean(&self, c: usize) -> Vec<f64> {
        let angle = TAU * c as f64 / self.num_classes as f64;
        let mut m = vec![0.0; self.dim];
        m[0] = CLASS_RADIUS * angle.cos();
        m[1] = CLASS_RADIUS * angle.sin();
        m
    }

    /// Applies the target-domain shift to a source-space point.
    pub fn shift(&self, x: &mut [f64]) {
        let (s, c) = self.rotation.sin_cos();
        let (a, b) = (x[0], x[1]);
        x[0] = c * a - s * b;
        x[1] = s * a + c * b;
        for (v, t) in x.iter_mut().zip(&self.translation) {
            *v += t;
        }
    }
}

/// Draws both domains and splits each 72/8/20. Source ids come first.
pub fn gen_shifted_gaussians(spec: &ShiftSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let mut next_id = 0;
    let mut draw = |domain: Domain, stream_id: u64| {
        let mut rng = seeded(derive_seed(spec.seed, stream_id));
        let mut out = Vec::with_capacity(spec.num_classes * spec.per_class);
        for c in 0..spec.num_classes {
            let mean = spec.class_mean(c);
            for _ in 0..spec.per_class {
                let mut x: Vec<f64> = mean
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + spec.noise * z
                    })
                    .collect();
                if domain == Domain::Target {
                    spec.shift(&mut x);
                }
                out.push(Sample {
                    id: next_id,
                    x,
                    y: c,
                    domain,
                });
                next_id += 1;
            }
        }
        out
    };
    let source = draw(Domain::Source, stream::SOURCE_DRAW);
    let target = draw(Domain::Target, stream::TARGET_DRAW);
    Ok(DatasetSplit {
        source: split_72_8_20(&source, derive_seed(spec.seed, stream::SOURCE_SPLIT))?,
        target: split_72_8_20(&target, derive_seed(spec.seed, stream::TARGET_SPLIT))?,
        num_classes: spec.num_classes,
        dim: spec.dim,
        class_names: (0..spec.num_classes).map(|c| format!("class{c}")).collect(),
    })
}
