//! Real-coded differential evolution machinery: population
//! initialization, threshold binarization, the eight candidate donor
//! formulas, binomial crossover, and greedy selection.

use rand::Rng;

use crate::classifier::BinaryMask;
use crate::error::{Error, Result};

/// One of the eight candidate mutation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CmsId(u8);

impl CmsId {
    pub const ALL: [CmsId; 8] = [
        CmsId(1),
        CmsId(2),
        CmsId(3),
        CmsId(4),
        CmsId(5),
        CmsId(6),
        CmsId(7),
        CmsId(8),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=8).contains(&id) {
            Ok(CmsId(id))
        } else {
            Err(Error::InvalidArgument(format!(
                "mutation scenario id must be 1..=8, got {id}"
            )))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Zero-based index for table lookups.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            1 => "DE/current-to-best/1",
            2 => "DE/current-to-rand/1",
            3 => "DE/rand/3",
            4 => "DE/best/1",
            5 => "DE/rand-to-best/1",
            6 => "DE/rand/2",
            7 => "DE/best/2",
            _ => "DE/best/3",
        }
    }

    /// How many distinct random partners the donor formula consumes.
    pub fn partners(self) -> usize {
        match self.0 {
            1 => 2, // r1, r2
            2 => 3, // r1..r3
            3 => 7, // r1..r7
            4 => 2, // r1, r2
            5 => 3, // r1..r3
            6 => 5, // r1..r5
            7 => 4, // r1..r4
            _ => 6, // r2..r7
        }
    }
}

impl std::fmt::Display for CmsId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CMS{} ({})", self.0, self.name())
    }
}

/// Per-scenario scale factor and crossover rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    f: [f64; 8],
    cr: [f64; 8],
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            f: [0.5, 1.0, 0.6, 0.9, 0.5, 0.9, 0.6, 1.0],
            cr: [0.1, 0.2, 0.9, 0.8, 0.9, 0.1, 0.8, 0.2],
        }
    }
}

impl ControlParams {
    pub fn new(f: [f64; 8], cr: [f64; 8]) -> Result<Self> {
        for (i, &v) in f.iter().enumerate() {
            if !(v > 0.0 && v <= 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "F for CMS{} must be in (0,2], got {v}",
                    i + 1
                )));
            }
        }
        for (i, &v) in cr.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "CR for CMS{} must be in [0,1], got {v}",
                    i + 1
                )));
            }
        }
        Ok(ControlParams { f, cr })
    }

    pub fn scale_factor(&self, cms: CmsId) -> f64 {
        self.f[cms.index()]
    }

    pub fn crossover_rate(&self, cms: CmsId) -> f64 {
        self.cr[cms.index()]
    }
}

/// A candidate solution: a real position in [0,1]^D, its binary mask at
/// the current threshold, and the cached cross-validation accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub position: Vec<f64>,
    pub mask: BinaryMask,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(position: Vec<f64>, theta: f64) -> Result<Self> {
        let mask = binarize(&position, theta)?;
        Ok(Individual {
            position,
            mask,
            fitness: None,
        })
    }

    pub fn fitness(&self) -> Result<f64> {
        self.fitness.ok_or(Error::UnsetFitness)
    }

    pub fn subset_size(&self) -> usize {
        self.mask.ones_count()
    }
}

/// Draws every component uniformly on [0,1]; fitness is left unset.
pub fn init_population(
    n: usize,
    d: usize,
    theta: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Individual>> {
    if n == 0 {
        return Err(Error::InvalidArgument("population size must be positive".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    (0..n)
        .map(|_| {
            let position: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            Individual::new(position, theta)
        })
        .collect()
}

/// Thresholds a position into a feature mask: bit j is set iff
/// `position[j] >= theta` (the boundary value selects the feature).
pub fn binarize(position: &[f64], theta: f64) -> Result<BinaryMask> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in (0,1), got {theta}"
        )));
    }
    Ok(BinaryMask::from_bits(
        position.iter().map(|&p| p >= theta).collect(),
    ))
}

/// Samples `count` distinct indices from `0..len`, all different from
/// `exclude`, by rejection. Order of draws is preserved.
pub fn sample_distinct(
    rng: &mut impl Rng,
    len: usize,
    exclude: usize,
    count: usize,
) -> Result<Vec<usize>> {
    if count + 1 > len {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {count} distinct partners from a group of {len}"
        )));
    }
    let mut taken = vec![false; len];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = rng.gen_range(0..len);
        if i == exclude || taken[i] {
            continue;
        }
        taken[i] = true;
        out.push(i);
    }
    Ok(out)
}

/// The raw donor vector of one scenario, before bound repair.
///
/// `partners` holds the sampled positions in draw order (`r1, r2, ...`;
/// for DE/best/3 the first drawn partner plays `r2`). `rand_scalar` is
/// the fresh uniform draw consumed by DE/current-to-rand/1 and ignored
/// by every other scenario.
pub fn donor_formula(
    cms: CmsId,
    target: &[f64],
    best: &[f64],
    partners: &[&[f64]],
    f: f64,
    rand_scalar: f64,
) -> Vec<f64> {
    debug_assert_eq!(partners.len(), cms.partners());
    let d = target.len();
    let r = partners;
    (0..d)
        .map(|j| match cms.id() {
            1 => target[j] + f * (best[j] - target[j]) + f * (r[0][j] - r[1][j]),
            2 => target[j] + rand_scalar * (r[0][j] - target[j]) + f * (r[1][j] - r[2][j]),
            3 => r[0][j] + f * (r[1][j] - r[2][j] + r[3][j] - r[4][j] + r[5][j] - r[6][j]),
            4 => best[j] + f * (r[0][j] - r[1][j]),
            5 => r[0][j] + f * (best[j] - target[j]) + f * (r[1][j] - r[2][j]),
            6 => r[0][j] + f * (r[1][j] - r[2][j]) + f * (r[3][j] - r[4][j]),
            7 => best[j] + f * (r[0][j] - r[1][j]) + f * (r[2][j] - r[3][j]),
            _ => best[j] + f * (r[0][j] - r[1][j] + r[2][j] - r[3][j] + r[4][j] - r[5][j]),
        })
        .collect()
}

/// Clamps every component into [0,1].
pub fn repair(mut donor: Vec<f64>) -> Vec<f64> {
    for v in &mut donor {
        *v = v.clamp(0.0, 1.0);
    }
    donor
}

/// Generates a repaired donor for `group[target_index]`: samples the
/// scenario's partner indices from the group (mutually exclusive, never
/// the target), applies the donor formula, and clamps into [0,1].
/// `best` is the best individual of the whole population.
pub fn mutate(
    cms: CmsId,
    group: &[Vec<f64>],
    target_index: usize,
    best: &[f64],
    f: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let need = cms.partners();
    if need + 1 > group.len() {
        return Err(Error::SubPopulationTooSmall {
            cms: cms.to_string(),
            need: need + 1,
            have: group.len(),
        });
    }
    let indices = sample_distinct(rng, group.len(), target_index, need)?;
    let partners: Vec<&[f64]> = indices.iter().map(|&i| group[i].as_slice()).collect();
    let rand_scalar = if cms.id() == 2 {
        rng.gen_range(0.0..1.0)
    } else {
        0.0
    };
    let donor = donor_formula(cms, &group[target_index], best, &partners, f, rand_scalar);
    Ok(repair(donor))
}

/// Binomial crossover with one forced donor dimension, so every trial
/// differs from its target even at CR = 0.
pub fn crossover(
    target: &[f64],
    donor: &[f64],
    cr: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if target.len() != donor.len() {
        return Err(Error::InvalidArgument(format!(
            "crossover length mismatch: target {} vs donor {}",
            target.len(),
            donor.len()
        )));
    }
    let d = target.len();
    let j_rand = rng.gen_range(0..d);
    Ok((0..d)
        .map(|j| {
            let u: f64 = rng.gen_range(0.0..1.0);
            if j == j_rand || u <= cr {
                donor[j]
            } else {
                target[j]
            }
        })
        .collect())
}

/// Outcome of greedy selection between a target and its trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    /// True when the trial replaces the target.
    pub trial_wins: bool,
    /// True when the population actually changed (strict gain, or an
    /// equal-fitness trial with a smaller subset).
    pub improved: bool,
    /// Accuracy gained, floored at zero.
    pub gain: f64,
}

/// Keeps the fitter individual; exact fitness ties go to the smaller
/// feature subset, otherwise the target survives.
pub fn select(target: &Individual, trial: &Individual) -> Result<Selection> {
    let target_fit = target.fitness()?;
    let trial_fit = trial.fitness()?;
    let trial_wins = trial_fit > target_fit
        || (trial_fit == target_fit && trial.mask.ones_count() < target.mask.ones_count());
    Ok(Selection {
        trial_wins,
        improved: trial_wins,
        gain: (trial_fit - target_fit).max(0.0),
    })
}
