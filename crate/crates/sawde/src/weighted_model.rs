//! Feature-importance bookkeeping and the prefix-subset search.
//!
//! Two tallies run side by side: `weight1` counts features newly turned
//! on by accepted trials, `weight2` counts every selected feature of the
//! top fifth of each evaluated sub-population. Every twenty generations
//! the features are ranked by each tally and the resulting prefix
//! subsets are evaluated; a winner good enough to beat the worst
//! individual replaces it.

use crate::classifier::{BinaryMask, FitnessEvaluator};
use crate::de_core::Individual;
use crate::error::{Error, Result};

/// The two per-feature importance tallies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMatrices {
    weight1: Vec<u64>,
    weight2: Vec<u64>,
}

impl WeightMatrices {
    pub fn new(d: usize) -> Self {
        WeightMatrices {
            weight1: vec![0; d],
            weight2: vec![0; d],
        }
    }

    pub fn feature_count(&self) -> usize {
        self.weight1.len()
    }

    pub fn update_tally(&self) -> &[u64] {
        &self.weight1
    }

    pub fn elite_tally(&self) -> &[u64] {
        &self.weight2
    }

    /// Credits features switched on by an accepted trial (0 -> 1
    /// transitions against the replaced target mask).
    pub fn record_update(&mut self, updated_features: &[usize]) -> Result<()> {
        let d = self.weight1.len();
        for &j in updated_features {
            if j >= d {
                return Err(Error::InvalidArgument(format!(
                    "feature index {j} out of range 0..{d}"
                )));
            }
        }
        for &j in updated_features {
            self.weight1[j] += 1;
        }
        Ok(())
    }

    /// Credits every selected feature of the top 20% (rounded up) of the
    /// sub-population, ranked by fitness descending.
    pub fn record_elite(&mut self, subpop: &[&Individual]) -> Result<()> {
        let mut order: Vec<usize> = (0..subpop.len()).collect();
        for ind in subpop {
            ind.fitness()?;
        }
        order.sort_by(|&a, &b| {
            subpop[b]
                .fitness
                .partial_cmp(&subpop[a].fitness)
                .unwrap()
                .then(a.cmp(&b))
        });
        let elite_count = subpop.len().div_ceil(5);
        for &i in order.iter().take(elite_count) {
            for j in subpop[i].mask.selected_indices() {
                self.weight2[j] += 1;
            }
        }
        Ok(())
    }
}

/// Feature indices ordered by descending tally, ties toward the lower
/// index.
pub fn ranking(tally: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tally.len()).collect();
    order.sort_by(|&a, &b| tally[b].cmp(&tally[a]).then(a.cmp(&b)));
    order
}

fn prefix_mask(order: &[usize], take: usize, d: usize) -> BinaryMask {
    let mut bits = vec![false; d];
    for &j in &order[..take] {
        bits[j] = true;
    }
    BinaryMask::from_bits(bits)
}

/// The prefix candidates in evaluation order: growing prefixes of the
/// update ranking for the first half, then of the elite ranking.
pub fn candidate_masks(w: &WeightMatrices) -> Vec<BinaryMask> {
    let d = w.feature_count();
    let r1 = ranking(&w.weight1);
    let r2 = ranking(&w.weight2);
    let half = d / 2;
    let mut out = Vec::with_capacity(d);
    for i in 1..=half {
        out.push(prefix_mask(&r1, i, d));
    }
    for i in 1..=(d - half) {
        out.push(prefix_mask(&r2, i, d));
    }
    out
}

/// The best candidate found by the prefix search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub mask: BinaryMask,
    pub fitness: f64,
}

/// Evaluates the prefix candidates against the shared budget. At most
/// `max_fes - fes` candidates are issued, so the search never overshoots
/// the budget; every evaluation counts toward it. Ties go to the smaller
/// subset, then to the earlier candidate. Returns `None` when no
/// candidate could be evaluated.
pub fn search_solutions(
    w: &WeightMatrices,
    eval: &FitnessEvaluator,
    max_fes: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Option<SearchOutcome> {
    let mut candidates = candidate_masks(w);
    let allowed = max_fes.saturating_sub(eval.fes()).min(candidates.len() as u64) as usize;
    candidates.truncate(allowed);
    if candidates.is_empty() {
        return None;
    }
    let fitnesses = eval.cv_accuracy_batch(&candidates, pool);
    let mut best = 0usize;
    for i in 1..candidates.len() {
        let better = fitnesses[i] > fitnesses[best]
            || (fitnesses[i] == fitnesses[best]
                && candidates[i].ones_count() < candidates[best].ones_count());
        if better {
            best = i;
        }
    }
    Some(SearchOutcome {
        mask: candidates.swap_remove(best),
        fitness: fitnesses[best],
    })
}

/// What an injection replaced, for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub replaced_index: usize,
    pub replaced_fitness: f64,
}

/// Encodes a mask back into a position: selected features sit at
/// `(1 + theta) / 2`, unselected at `theta / 2`, so re-binarizing
/// reproduces the mask exactly.
pub fn encode_mask(mask: &BinaryMask, theta: f64) -> Vec<f64> {
    mask.bits()
        .iter()
        .map(|&b| if b { (1.0 + theta) / 2.0 } else { theta / 2.0 })
        .collect()
}

/// Replaces the worst individual when the found solution strictly beats
/// the population minimum; an exact tie leaves the population unchanged.
pub fn inject(
    pop: &mut [Individual],
    found: &SearchOutcome,
    theta: f64,
) -> Result<Option<Injection>> {
    let mut worst = 0usize;
    let mut worst_fit = pop[0].fitness()?;
    for (i, ind) in pop.iter().enumerate().skip(1) {
        let fit = ind.fitness()?;
        if fit < worst_fit {
            worst = i;
            worst_fit = fit;
        }
    }
    if found.fitness > worst_fit {
        let mut replacement = Individual::new(encode_mask(&found.mask, theta), theta)?;
        debug_assert_eq!(replacement.mask, found.mask);
        replacement.fitness = Some(found.fitness);
        pop[worst] = replacement;
        Ok(Some(Injection {
            replaced_index: worst,
            replaced_fitness: worst_fit,
        }))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, DatasetView};
    use crate::de_core::binarize;

    fn individual(position: Vec<f64>, fitness: f64) -> Individual {
        let mut ind = Individual::new(position, 0.6).unwrap();
        ind.fitness = Some(fitness);
        ind
    }

    fn toy_evaluator(informative: usize, d: usize) -> FitnessEvaluator {
        // Two clusters separated along the informative features only.
        let n = 18;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = (i % 2) as u32;
            for j in 0..d {
                let v = if j < informative {
                    if class == 0 { 0.1 } else { 0.9 }
                } else {
                    ((i * 31 + j * 17) % 100) as f64 / 100.0
                };
                features.push(v + (i as f64) * 1e-4);
            }
            labels.push(class);
        }
        let ds = Dataset::from_parts("toy", features, labels, d, vec!["a".into(), "b".into()])
            .unwrap()
            .into_shared();
        let view = DatasetView::full(ds).assign_folds(3, 7).unwrap();
        FitnessEvaluator::new(view, 3, false).unwrap()
    }

    #[test]
    fn updates_credit_new_features_only() {
        let mut w = WeightMatrices::new(3);
        let target = BinaryMask::from_bits(vec![true, false, false]);
        let accepted = BinaryMask::from_bits(vec![true, true, false]);
        w.record_update(&accepted.newly_selected(&target)).unwrap();
        assert_eq!(w.update_tally(), &[0, 1, 0]);
    }

    #[test]
    fn out_of_range_update_is_rejected_atomically() {
        let mut w = WeightMatrices::new(3);
        assert!(w.record_update(&[1, 5]).is_err());
        assert_eq!(w.update_tally(), &[0, 0, 0]);
    }

    #[test]
    fn update_tally_matches_event_replay() {
        // Replay a sequence of (target, trial, accepted) events and
        // fold over it independently.
        let events: Vec<(Vec<bool>, Vec<bool>, bool)> = vec![
            (vec![true, false, false, false], vec![true, true, false, true], true),
            (vec![false, false, true, false], vec![true, false, false, false], true),
            (vec![true, true, false, false], vec![false, false, true, true], false),
            (vec![false, true, false, false], vec![true, true, true, false], true),
        ];
        let mut w = WeightMatrices::new(4);
        for (target, trial, accepted) in &events {
            if *accepted {
                let old = BinaryMask::from_bits(target.clone());
                let new = BinaryMask::from_bits(trial.clone());
                w.record_update(&new.newly_selected(&old)).unwrap();
            }
        }
        let mut expected = [0u64; 4];
        for (target, trial, accepted) in &events {
            if *accepted {
                for j in 0..4 {
                    if trial[j] && !target[j] {
                        expected[j] += 1;
                    }
                }
            }
        }
        assert_eq!(w.update_tally(), &expected);
    }

    #[test]
    fn twenty_individuals_yield_four_elites() {
        let mut w = WeightMatrices::new(2);
        let pop: Vec<Individual> = (0..20)
            .map(|i| individual(vec![0.9, 0.1], i as f64 / 20.0))
            .collect();
        let refs: Vec<&Individual> = pop.iter().collect();
        w.record_elite(&refs).unwrap();
        // every individual selects only feature 0; four elites counted
        assert_eq!(w.elite_tally(), &[4, 0]);
    }

    #[test]
    fn elite_tally_matches_a_hand_count() {
        // five individuals: top ceil(1) = 1 elite -> the 0.9 one
        let pop = vec![
            individual(vec![0.9, 0.9, 0.1], 0.5),
            individual(vec![0.9, 0.1, 0.1], 0.9),
            individual(vec![0.1, 0.9, 0.9], 0.7),
            individual(vec![0.9, 0.9, 0.9], 0.2),
            individual(vec![0.1, 0.1, 0.9], 0.6),
        ];
        let refs: Vec<&Individual> = pop.iter().collect();
        let mut w = WeightMatrices::new(3);
        w.record_elite(&refs).unwrap();
        assert_eq!(w.elite_tally(), &[1, 0, 0]);

        // six individuals: ceil(1.2) = 2 elites -> 0.9 and 0.7 ones
        let mut six = pop.clone();
        six.push(individual(vec![0.1, 0.9, 0.1], 0.3));
        let refs: Vec<&Individual> = six.iter().collect();
        let mut w = WeightMatrices::new(3);
        w.record_elite(&refs).unwrap();
        assert_eq!(w.elite_tally(), &[1, 1, 1]);
    }

    #[test]
    fn empty_mask_elite_contributes_nothing() {
        let pop = vec![
            individual(vec![0.1, 0.1], 0.9),
            individual(vec![0.9, 0.1], 0.1),
        ];
        let refs: Vec<&Individual> = pop.iter().collect();
        let mut w = WeightMatrices::new(2);
        w.record_elite(&refs).unwrap();
        assert_eq!(w.elite_tally(), &[0, 0]);
    }

    #[test]
    fn candidates_are_prefixes_of_both_rankings() {
        let mut w = WeightMatrices::new(4);
        w.weight1 = vec![5, 1, 0, 0];
        w.weight2 = vec![0, 0, 7, 2];
        let masks = candidate_masks(&w);
        let as_bits: Vec<Vec<bool>> = masks.iter().map(|m| m.bits().to_vec()).collect();
        assert_eq!(
            as_bits,
            vec![
                vec![true, false, false, false],  // {f0}
                vec![true, true, false, false],   // {f0,f1}
                vec![false, false, true, false],  // {f2}
                vec![false, false, true, true],   // {f2,f3}
            ]
        );
    }

    #[test]
    fn zero_weights_fall_back_to_index_order() {
        let w = WeightMatrices::new(5);
        let masks = candidate_masks(&w);
        assert_eq!(masks.len(), 5);
        assert_eq!(masks[0].selected_indices(), vec![0]);
        assert_eq!(masks[1].selected_indices(), vec![0, 1]);
        // second family restarts from the elite ranking's first index
        assert_eq!(masks[2].selected_indices(), vec![0]);
        assert_eq!(masks[4].selected_indices(), vec![0, 1, 2]);
    }

    #[test]
    fn odd_dimension_splits_candidates_floor_then_rest() {
        let w = WeightMatrices::new(7);
        let masks = candidate_masks(&w);
        assert_eq!(masks.len(), 7);
        // 3 prefixes from the update ranking, 4 from the elite ranking
        assert_eq!(masks[2].ones_count(), 3);
        assert_eq!(masks[3].ones_count(), 1);
        assert_eq!(masks[6].ones_count(), 4);
    }

    #[test]
    fn search_matches_exhaustive_candidate_oracle() {
        let eval = toy_evaluator(2, 8);
        let mut w = WeightMatrices::new(8);
        w.weight1 = vec![3, 9, 0, 1, 0, 0, 2, 0];
        w.weight2 = vec![0, 2, 5, 0, 1, 0, 0, 4];
        let outcome = search_solutions(&w, &eval, u64::MAX, None).unwrap();

        let oracle_eval = toy_evaluator(2, 8);
        let candidates = candidate_masks(&w);
        assert_eq!(candidates.len(), 8);
        let mut best: Option<(BinaryMask, f64)> = None;
        for mask in candidates {
            let fit = oracle_eval.cv_accuracy(&mask);
            let better = match &best {
                None => true,
                Some((bm, bf)) => {
                    fit > *bf || (fit == *bf && mask.ones_count() < bm.ones_count())
                }
            };
            if better {
                best = Some((mask, fit));
            }
        }
        let (bm, bf) = best.unwrap();
        assert_eq!(outcome.fitness, bf);
        assert_eq!(outcome.mask, bm);
        assert_eq!(eval.fes(), 8);
    }

    #[test]
    fn search_respects_a_nearly_spent_budget() {
        let eval = toy_evaluator(2, 8);
        let _ = eval.cv_accuracy(&BinaryMask::from_bits(vec![true; 8]));
        // budget allows three more evaluations: only three candidates run
        let w = WeightMatrices::new(8);
        let outcome = search_solutions(&w, &eval, 4, None).unwrap();
        assert_eq!(eval.fes(), 4);
        assert!(outcome.fitness >= 0.0);
        // a spent budget yields no outcome at all
        assert!(search_solutions(&w, &eval, 4, None).is_none());
        assert_eq!(eval.fes(), 4);
    }

    #[test]
    fn injection_replaces_the_worst_and_reencodes_exactly() {
        let mut pop = vec![
            individual(vec![0.9, 0.9, 0.9], 0.9),
            individual(vec![0.1, 0.9, 0.1], 0.7),
            individual(vec![0.9, 0.1, 0.1], 0.8),
        ];
        let found = SearchOutcome {
            mask: BinaryMask::from_bits(vec![true, false, true]),
            fitness: 0.95,
        };
        let injection = inject(&mut pop, &found, 0.6).unwrap().unwrap();
        assert_eq!(injection.replaced_index, 1);
        assert_eq!(injection.replaced_fitness, 0.7);
        assert_eq!(pop[1].fitness, Some(0.95));
        assert_eq!(binarize(&pop[1].position, 0.6).unwrap(), found.mask);
    }

    #[test]
    fn exact_tie_does_not_inject() {
        let mut pop = vec![
            individual(vec![0.9, 0.9], 0.9),
            individual(vec![0.1, 0.9], 0.7),
        ];
        let before = pop.clone();
        let found = SearchOutcome {
            mask: BinaryMask::from_bits(vec![true, true]),
            fitness: 0.7,
        };
        assert!(inject(&mut pop, &found, 0.6).unwrap().is_none());
        assert_eq!(pop, before);
    }

    #[test]
    fn injection_never_lowers_the_population_minimum() {
        let mut pop = vec![
            individual(vec![0.9, 0.9], 0.4),
            individual(vec![0.1, 0.9], 0.6),
            individual(vec![0.9, 0.1], 0.5),
        ];
        let min_before = 0.4;
        let found = SearchOutcome {
            mask: BinaryMask::from_bits(vec![false, true]),
            fitness: 0.55,
        };
        inject(&mut pop, &found, 0.6).unwrap().unwrap();
        let min_after = pop
            .iter()
            .map(|i| i.fitness.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(min_after >= min_before);
        assert_eq!(min_after, 0.5);
    }
}
