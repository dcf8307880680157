//! The generation loop: random re-partition into equal sub-populations,
//! per-sub-population strategy selection and application, importance
//! bookkeeping, the periodic prefix search, budget accounting, and the
//! early stop.
//!
//! Determinism: all draws come from streams derived per (generation,
//! sub-population, purpose); trial vectors are generated serially, only
//! their evaluations run on the worker pool, and selections commit in
//! index order. Results are identical for any worker count.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifier::{test_accuracy, FitnessEvaluator};
use crate::dataset::DatasetView;
use crate::de_core::{
    binarize, crossover, init_population, mutate, select, ControlParams, Individual,
};
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::runlog::{write_record, LogRecord};
use crate::strategy::{
    apply_reward, default_pool, select_ens, EnsembleStrategy, StrategyStats,
};
use crate::weighted_model::{search_solutions, inject, WeightMatrices};

/// Engine parameters. `population_size` must be divisible by
/// `sub_populations`, and each block must be large enough for the most
/// demanding donor formula (eight individuals).
#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Algorithm tag written to logs and reports.
    pub label: String,
    pub population_size: usize,
    pub sub_populations: usize,
    pub max_fes: u64,
    pub theta: f64,
    pub k_neighbors: usize,
    pub folds: usize,
    pub seed: u64,
    pub early_stop: bool,
    /// Worker threads for fitness evaluation; 1 evaluates in place.
    pub workers: usize,
    /// Memoize accuracy per mask. Cache hits still count as evaluations,
    /// so budget semantics match the uncached run exactly.
    pub use_cache: bool,
    pub control: ControlParams,
    pub pool: Vec<EnsembleStrategy>,
}

impl EngineConfig {
    pub fn new(seed: u64) -> Self {
        EngineConfig {
            label: "sawde".into(),
            population_size: 100,
            sub_populations: 5,
            max_fes: 1_000_000,
            theta: 0.6,
            k_neighbors: 3,
            folds: 3,
            seed,
            early_stop: true,
            workers: 1,
            use_cache: true,
            control: ControlParams::default(),
            pool: default_pool(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.max_fes == 0 {
            return fail("max_fes must be positive".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return fail(format!("theta must be in (0,1), got {}", self.theta));
        }
        if ![2, 4, 5, 10].contains(&self.sub_populations) {
            return fail(format!(
                "sub-population count must be one of 2, 4, 5, 10, got {}",
                self.sub_populations
            ));
        }
        if self.population_size % self.sub_populations != 0 {
            return fail(format!(
                "population size {} is not divisible into {} sub-populations",
                self.population_size, self.sub_populations
            ));
        }
        if self.population_size / self.sub_populations < 8 {
            return fail(format!(
                "sub-populations of {} cannot supply the seven distinct partners \
                 some donor formulas draw",
                self.population_size / self.sub_populations
            ));
        }
        if self.k_neighbors == 0 {
            return fail("k_neighbors must be at least 1".into());
        }
        if self.folds < 2 {
            return fail("fold count must be at least 2".into());
        }
        if self.workers == 0 {
            return fail("worker count must be at least 1".into());
        }
        if self.pool.is_empty() {
            return fail("strategy pool cannot be empty".into());
        }
        for ens in &self.pool {
            if ens.members.is_empty() || ens.members.len() > 3 {
                return fail(format!(
                    "strategy EnS{} must hold 1..=3 scenarios",
                    ens.id
                ));
            }
        }
        Ok(())
    }
}

/// One convergence-trace entry, captured after each generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub generation: u64,
    pub fes: u64,
    pub best_train_accuracy: f64,
    pub best_subset_size: usize,
}

/// The final state of a run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Individual,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub subset_size: usize,
    pub reduction_rate: f64,
    pub fes_used: u64,
    pub generations: u64,
    pub trace: Vec<TraceRow>,
    pub strategy_stats: StrategyStats,
    pub weights: WeightMatrices,
    /// Independent tally of 0 -> 1 transitions over accepted trials;
    /// always equals the sum of the update tally.
    pub new_feature_updates: u64,
    pub early_stopped: bool,
}

/// Splits `0..n` into `m` equal random blocks: a fresh uniform
/// permutation cut into consecutive chunks.
pub fn partition_indices(n: usize, m: usize, rng: &mut impl Rng) -> Result<Vec<Vec<usize>>> {
    if m == 0 || n % m != 0 {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} individuals into {m} equal sub-populations"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let block = n / m;
    Ok(order.chunks(block).map(|c| c.to_vec()).collect())
}

/// True when training accuracy is perfect and fewer than half the
/// features are selected.
pub fn check_early_stop(best: &Individual, d: usize) -> bool {
    best.fitness == Some(1.0) && best.mask.ones_count() * 2 < d
}

fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for i in 1..pop.len() {
        if pop[i].fitness > pop[best].fitness {
            best = i;
        }
    }
    best
}

/// Runs the optimizer without logging.
pub fn run(config: &EngineConfig, train: &DatasetView, test: &DatasetView) -> Result<RunResult> {
    run_logged(config, train, test, &mut std::io::sink())
}

/// Runs the optimizer, streaming structured records into `log`.
pub fn run_logged(
    config: &EngineConfig,
    train: &DatasetView,
    test: &DatasetView,
    log: &mut dyn Write,
) -> Result<RunResult> {
    config.validate()?;
    match train.fold_count() {
        Some(folds) if folds == config.folds => {}
        Some(folds) => {
            return Err(Error::InvalidConfig(format!(
                "train view carries {folds} folds but the engine expects {}",
                config.folds
            )))
        }
        None => {
            return Err(Error::InvalidConfig(
                "train view must have folds assigned".into(),
            ))
        }
    }
    let d = train.feature_count();
    let n = config.population_size;
    let m = config.sub_populations;
    let evaluator = FitnessEvaluator::new(train.clone(), config.k_neighbors, config.use_cache)?;
    let pool = match config.workers {
        1 => None,
        w => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?,
        ),
    };
    let io_err = |e: std::io::Error| Error::Io {
        path: "<run log>".into(),
        source: e,
    };

    write_record(
        log,
        &LogRecord::RunStart {
            dataset: train.dataset().name().to_string(),
            algorithm: config.label.clone(),
            feature_count: d,
            train_rows: train.len(),
            test_rows: test.len(),
            population_size: n,
            sub_populations: m,
            max_fes: config.max_fes,
            theta: config.theta,
            k_neighbors: config.k_neighbors,
            folds: config.folds,
            seed: config.seed,
            early_stop: config.early_stop,
            pool: config
                .pool
                .iter()
                .map(|ens| ens.members.iter().map(|c| c.id()).collect())
                .collect(),
        },
    )
    .map_err(io_err)?;

    // Initial population and its evaluation.
    let mut init_rng = substream(config.seed, 0, 0, Purpose::Init);
    let mut pop = init_population(n, d, config.theta, &mut init_rng)?;
    let masks: Vec<_> = pop.iter().map(|ind| ind.mask.clone()).collect();
    let fits = evaluator.cv_accuracy_batch(&masks, pool.as_ref());
    for (ind, fit) in pop.iter_mut().zip(fits) {
        ind.fitness = Some(fit);
    }

    let mut stats = StrategyStats::new(config.pool.len());
    let mut weights = WeightMatrices::new(d);
    let mut new_feature_updates = 0u64;
    let mut trace = Vec::new();
    let mut generation = 0u64;
    let mut early_stopped = false;

    let mut snapshot = |generation: u64,
                        pop: &[Individual],
                        stats: &StrategyStats,
                        fes: u64,
                        trace: &mut Vec<TraceRow>,
                        log: &mut dyn Write|
     -> Result<()> {
        let best = &pop[best_index(pop)];
        let row = TraceRow {
            generation,
            fes,
            best_train_accuracy: best.fitness.unwrap_or(0.0),
            best_subset_size: best.mask.ones_count(),
        };
        trace.push(row);
        write_record(
            log,
            &LogRecord::Generation {
                generation,
                fes,
                best_train_accuracy: row.best_train_accuracy,
                best_subset_size: row.best_subset_size,
                ens_num: stats.selections().to_vec(),
                change: stats.gains().to_vec(),
                c_fes: stats.consumed_fes().to_vec(),
                reward: stats.rewards().to_vec(),
            },
        )
        .map_err(io_err)
    };

    snapshot(0, &pop, &stats, evaluator.fes(), &mut trace, log)?;

    'evolution: while evaluator.fes() < config.max_fes {
        generation += 1;
        let mut partition_rng = substream(config.seed, generation, 0, Purpose::Partition);
        let blocks = partition_indices(n, m, &mut partition_rng)?;

        for (sub, block) in blocks.iter().enumerate() {
            let at = |e: Error| e.in_engine(generation, sub);

            // Strategy choice: forced argmax at reward generations,
            // self-adaptive selection otherwise.
            let forced = apply_reward(&mut stats, generation);
            let ens_index = match forced {
                Some(idx) => idx,
                None => {
                    let mut rng =
                        substream(config.seed, generation, sub as u64 + 1, Purpose::EnsSelect);
                    select_ens(&stats, evaluator.fes(), config.max_fes, &mut rng)
                }
            };
            let ens = &config.pool[ens_index];
            write_record(
                log,
                &LogRecord::EnsSelection {
                    generation,
                    sub_population: sub,
                    ens: ens.id,
                    forced: forced.is_some(),
                },
            )
            .map_err(io_err)?;
            if forced.is_some() {
                write_record(
                    log,
                    &LogRecord::Reward {
                        generation,
                        sub_population: sub,
                        ens: ens.id,
                    },
                )
                .map_err(io_err)?;
            }
            stats.record_selection(ens_index);

            let evals_before = evaluator.fes();
            let mut gain_sum = 0.0f64;
            let mut variation_rng =
                substream(config.seed, generation, sub as u64 + 1, Purpose::Variation);

            for &cms in &ens.members {
                // Frozen view of the block (and the population best) for
                // this pass; selections commit afterwards in index order.
                let group: Vec<Vec<f64>> =
                    block.iter().map(|&g| pop[g].position.clone()).collect();
                let best_pos = pop[best_index(&pop)].position.clone();
                let f = config.control.scale_factor(cms);
                let cr = config.control.crossover_rate(cms);

                let mut trials = Vec::with_capacity(block.len());
                for target in 0..block.len() {
                    let donor = mutate(cms, &group, target, &best_pos, f, &mut variation_rng)
                        .map_err(at)?;
                    let position =
                        crossover(&group[target], &donor, cr, &mut variation_rng).map_err(at)?;
                    let mask = binarize(&position, config.theta).map_err(at)?;
                    trials.push((position, mask));
                }
                let masks: Vec<_> = trials.iter().map(|(_, mask)| mask.clone()).collect();
                let fits = evaluator.cv_accuracy_batch(&masks, pool.as_ref());

                for (slot, ((position, mask), fit)) in trials.into_iter().zip(fits).enumerate() {
                    let global = block[slot];
                    let trial = Individual {
                        position,
                        mask,
                        fitness: Some(fit),
                    };
                    let outcome = select(&pop[global], &trial).map_err(at)?;
                    gain_sum += outcome.gain;
                    if outcome.trial_wins {
                        let added = trial.mask.newly_selected(&pop[global].mask);
                        weights.record_update(&added).map_err(at)?;
                        new_feature_updates += added.len() as u64;
                        pop[global] = trial;
                    }
                }
                if evaluator.fes() >= config.max_fes {
                    break;
                }
            }

            stats
                .record_outcome(ens_index, gain_sum, evaluator.fes() - evals_before)
                .map_err(at)?;
            let members: Vec<&Individual> = block.iter().map(|&g| &pop[g]).collect();
            weights.record_elite(&members).map_err(at)?;

            if evaluator.fes() >= config.max_fes {
                snapshot(generation, &pop, &stats, evaluator.fes(), &mut trace, log)?;
                break 'evolution;
            }
        }

        // Periodic prefix search over the importance rankings.
        if generation % 20 == 0 && evaluator.fes() < config.max_fes {
            if let Some(found) = search_solutions(&weights, &evaluator, config.max_fes, pool.as_ref())
            {
                if let Some(done) = inject(&mut pop, &found, config.theta)? {
                    write_record(
                        log,
                        &LogRecord::Injection {
                            generation,
                            fes: evaluator.fes(),
                            fitness: found.fitness,
                            subset_size: found.mask.ones_count(),
                            replaced_fitness: done.replaced_fitness,
                        },
                    )
                    .map_err(io_err)?;
                }
            }
        }

        snapshot(generation, &pop, &stats, evaluator.fes(), &mut trace, log)?;

        if config.early_stop && check_early_stop(&pop[best_index(&pop)], d) {
            early_stopped = true;
            break;
        }
    }

    let best = pop[best_index(&pop)].clone();
    let train_accuracy = best.fitness.unwrap_or(0.0);
    let test_acc = test_accuracy(train, test, &best.mask, config.k_neighbors)?;
    let subset_size = best.mask.ones_count();
    let fes_used = evaluator.fes();
    debug_assert!(fes_used <= config.max_fes + 3 * n as u64 + d as u64);

    write_record(
        log,
        &LogRecord::RunEnd {
            train_accuracy,
            test_accuracy: test_acc,
            subset_size,
            reduction_rate: 1.0 - subset_size as f64 / d as f64,
            fes_used,
            generations: generation,
        },
    )
    .map_err(io_err)?;

    Ok(RunResult {
        train_accuracy,
        test_accuracy: test_acc,
        subset_size,
        reduction_rate: 1.0 - subset_size as f64 / d as f64,
        fes_used,
        generations: generation,
        trace,
        strategy_stats: stats,
        weights,
        new_feature_updates,
        early_stopped,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partition_covers_everything_in_equal_disjoint_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let blocks = partition_indices(100, 5, &mut rng).unwrap();
        assert_eq!(blocks.len(), 5);
        let mut seen = vec![false; 100];
        for block in &blocks {
            assert_eq!(block.len(), 20);
            for &i in block {
                assert!(!seen[i], "index {i} appears twice");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn partition_is_deterministic_per_stream() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            partition_indices(40, 4, &mut a).unwrap(),
            partition_indices(40, 4, &mut b).unwrap()
        );
    }

    #[test]
    fn partition_rejects_indivisible_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(partition_indices(10, 4, &mut rng).is_err());
    }

    #[test]
    fn pair_cooccurrence_is_near_uniform() {
        // With blocks of size s out of n, a fixed pair shares a block
        // with probability (s-1)/(n-1).
        let n = 20;
        let m = 5;
        let rounds = 10_000;
        let mut together = vec![vec![0u32; n]; n];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..rounds {
            for block in partition_indices(n, m, &mut rng).unwrap() {
                for i in 0..block.len() {
                    for j in (i + 1)..block.len() {
                        let (a, b) = (block[i].min(block[j]), block[i].max(block[j]));
                        together[a][b] += 1;
                    }
                }
            }
        }
        let expected = rounds as f64 * (n / m - 1) as f64 / (n - 1) as f64;
        for a in 0..n {
            for b in (a + 1)..n {
                let observed = together[a][b] as f64;
                assert!(
                    (observed - expected).abs() < expected * 0.15,
                    "pair ({a},{b}) co-occurred {observed} times, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn early_stop_rule() {
        let mut perfect_small = Individual::new(vec![0.9; 10], 0.6).unwrap();
        perfect_small.fitness = Some(1.0);
        assert!(!check_early_stop(&perfect_small, 10)); // 10 of 10

        let mut bits = vec![0.1; 30];
        for b in bits.iter_mut().take(10) {
            *b = 0.9;
        }
        let mut ten_of_thirty = Individual::new(bits, 0.6).unwrap();
        ten_of_thirty.fitness = Some(1.0);
        assert!(check_early_stop(&ten_of_thirty, 30));

        let mut bits = vec![0.1; 30];
        for b in bits.iter_mut().take(16) {
            *b = 0.9;
        }
        let mut sixteen = Individual::new(bits, 0.6).unwrap();
        sixteen.fitness = Some(1.0);
        assert!(!check_early_stop(&sixteen, 30)); // boundary: 16 * 2 > 30

        let mut nearly = Individual::new(vec![0.9, 0.1, 0.1], 0.6).unwrap();
        nearly.fitness = Some(0.999);
        assert!(!check_early_stop(&nearly, 3));
    }

    #[test]
    fn config_validation_catches_bad_shapes() {
        let mut config = EngineConfig::new(0);
        config.population_size = 30;
        config.sub_populations = 4;
        assert!(config.validate().is_err()); // not divisible

        config.sub_populations = 5;
        config.population_size = 30;
        assert!(config.validate().is_err()); // blocks of 6 too small

        config.population_size = 40;
        assert!(config.validate().is_ok());

        config.sub_populations = 3;
        config.population_size = 30;
        assert!(config.validate().is_err()); // 3 not in {2,4,5,10}
    }
}
