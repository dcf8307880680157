//! Deterministic synthetic classification datasets.
//!
//! Used by the bundled benchmark files, the examples, and the tests.
//! Classes are separated along a handful of informative features (each
//! class follows its own sign pattern around 0.5); all remaining
//! features are uniform noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub name: String,
    pub instances: usize,
    pub features: usize,
    pub informative: usize,
    pub classes: usize,
    /// Center-to-center distance per informative feature.
    pub separation: f64,
    /// Gaussian spread around each class center.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(name: impl Into<String>) -> Self {
        SynthSpec {
            name: name.into(),
            instances: 100,
            features: 10,
            informative: 3,
            classes: 2,
            separation: 0.6,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

/// Sign patterns over the informative features, one per class. Two
/// classes get complementary patterns; more classes draw random
/// patterns re-sampled until pairwise distinct.
fn class_patterns(classes: usize, informative: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    if classes == 2 {
        let first: Vec<f64> = (0..informative)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let second: Vec<f64> = first.iter().map(|s| -s).collect();
        return vec![first, second];
    }
    let mut patterns: Vec<Vec<f64>> = Vec::with_capacity(classes);
    while patterns.len() < classes {
        let candidate: Vec<f64> = (0..informative)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let distinct = patterns.iter().all(|p| {
            let differing = p
                .iter()
                .zip(candidate.iter())
                .filter(|(a, b)| a != b)
                .count();
            differing * 3 >= informative
        });
        if distinct {
            patterns.push(candidate);
        }
    }
    patterns
}

pub fn make_classification(spec: &SynthSpec) -> Result<Dataset> {
    if spec.informative == 0 || spec.informative > spec.features {
        return Err(Error::InvalidArgument(format!(
            "informative features must be in 1..={}, got {}",
            spec.features, spec.informative
        )));
    }
    if spec.classes < 2 {
        return Err(Error::InvalidArgument(
            "at least two classes are required".into(),
        ));
    }
    let mut rng = substream(spec.seed, 0, 0, Purpose::Synth);
    let patterns = class_patterns(spec.classes, spec.informative, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;

    let mut features = Vec::with_capacity(spec.instances * spec.features);
    let mut labels = Vec::with_capacity(spec.instances);
    for i in 0..spec.instances {
        let class = i % spec.classes;
        labels.push(class as u32);
        for j in 0..spec.features {
            let v = if j < spec.informative {
                let center = 0.5 + patterns[class][j] * spec.separation / 2.0;
                (center + noise.sample(&mut rng)).clamp(0.0, 1.0)
            } else {
                rng.gen_range(0.0..1.0)
            };
            features.push(v);
        }
    }
    let class_names = (0..spec.classes).map(|c| format!("c{c}")).collect();
    Dataset::from_parts(
        spec.name.clone(),
        features,
        labels,
        spec.features,
        class_names,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec {
            instances: 40,
            features: 8,
            informative: 2,
            seed: 7,
            ..SynthSpec::new("det")
        };
        let a = make_classification(&spec).unwrap();
        let b = make_classification(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_and_labels_are_as_requested() {
        let spec = SynthSpec {
            instances: 30,
            features: 12,
            informative: 4,
            classes: 3,
            seed: 1,
            ..SynthSpec::new("shape")
        };
        let ds = make_classification(&spec).unwrap();
        assert_eq!(ds.instance_count(), 30);
        assert_eq!(ds.feature_count(), 12);
        assert_eq!(ds.class_count(), 3);
        for i in 0..30 {
            assert_eq!(ds.label(i), (i % 3) as u32);
        }
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let spec = SynthSpec {
            instances: 50,
            features: 6,
            informative: 6,
            separation: 0.9,
            noise_sigma: 0.5,
            seed: 3,
            ..SynthSpec::new("clamped")
        };
        let ds = make_classification(&spec).unwrap();
        for i in 0..50 {
            for &v in ds.row(i) {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
