//! The ensemble-strategy pool and its self-adaptive selection mechanism.
//!
//! An ensemble strategy (EnS) is an ordered set of candidate mutation
//! scenarios applied in sequence to one sub-population. Selection is
//! uniform over the whole pool while the first half of the evaluation
//! budget lasts; afterwards it narrows to the half of the pool with the
//! best reward-per-selection ratio. Every twenty generations the
//! strategy with the best accuracy-gain-per-evaluation ratio is forced
//! and earns a reward.

use rand::Rng;

use crate::de_core::CmsId;
use crate::error::{Error, Result};

/// An ordered combination of distinct mutation scenarios. The shipped
/// pool uses triples; single-scenario baselines use singletons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleStrategy {
    /// One-based id, unique within its pool.
    pub id: u8,
    pub members: Vec<CmsId>,
}

impl std::fmt::Display for EnsembleStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let members: Vec<String> = self.members.iter().map(|m| format!("CMS{}", m.id())).collect();
        write!(f, "EnS{} {{{}}}", self.id, members.join(", "))
    }
}

/// All ten 3-element combinations of a 5-scenario base set, ordered
/// lexicographically by member ids.
pub fn build_strategy_pool(base: &[CmsId]) -> Result<Vec<EnsembleStrategy>> {
    if base.len() != 5 {
        return Err(Error::InvalidArgument(format!(
            "strategy pool needs exactly 5 base scenarios, got {}",
            base.len()
        )));
    }
    let mut sorted = base.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != 5 {
        return Err(Error::InvalidArgument(
            "strategy pool base scenarios must be distinct".into(),
        ));
    }
    let mut pool = Vec::with_capacity(10);
    for i in 0..5 {
        for j in (i + 1)..5 {
            for k in (j + 1)..5 {
                pool.push(EnsembleStrategy {
                    id: pool.len() as u8 + 1,
                    members: vec![sorted[i], sorted[j], sorted[k]],
                });
            }
        }
    }
    Ok(pool)
}

/// The retained base set used by default: {CMS1, CMS2, CMS4, CMS5, CMS6}.
pub fn default_base() -> [CmsId; 5] {
    [
        CmsId::new(1).unwrap(),
        CmsId::new(2).unwrap(),
        CmsId::new(4).unwrap(),
        CmsId::new(5).unwrap(),
        CmsId::new(6).unwrap(),
    ]
}

/// The default ten-strategy pool over [`default_base`].
pub fn default_pool() -> Vec<EnsembleStrategy> {
    build_strategy_pool(&default_base()).unwrap()
}

/// A degenerate single-scenario pool for baseline runs; the selector
/// trivially returns the lone strategy.
pub fn single_cms_pool(cms: CmsId) -> Vec<EnsembleStrategy> {
    vec![EnsembleStrategy {
        id: 1,
        members: vec![cms],
    }]
}

/// Per-strategy counters: selections, cumulative accuracy gain,
/// evaluations consumed, rewards earned. All monotone non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyStats {
    ens_num: Vec<u64>,
    change: Vec<f64>,
    c_fes: Vec<u64>,
    reward: Vec<u64>,
}

impl StrategyStats {
    pub fn new(pool_len: usize) -> Self {
        StrategyStats {
            ens_num: vec![0; pool_len],
            change: vec![0.0; pool_len],
            c_fes: vec![0; pool_len],
            reward: vec![0; pool_len],
        }
    }

    pub fn len(&self) -> usize {
        self.ens_num.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ens_num.is_empty()
    }

    pub fn selections(&self) -> &[u64] {
        &self.ens_num
    }

    pub fn gains(&self) -> &[f64] {
        &self.change
    }

    pub fn consumed_fes(&self) -> &[u64] {
        &self.c_fes
    }

    pub fn rewards(&self) -> &[u64] {
        &self.reward
    }

    /// Counts one selection of the strategy; called once per application.
    pub fn record_selection(&mut self, index: usize) {
        self.ens_num[index] += 1;
    }

    /// Accumulates the accuracy gained by improved individuals and the
    /// evaluations the application consumed.
    pub fn record_outcome(&mut self, index: usize, gain: f64, evals_used: u64) -> Result<()> {
        if gain < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "accuracy gain cannot be negative, got {gain}"
            )));
        }
        self.change[index] += gain;
        self.c_fes[index] += evals_used;
        Ok(())
    }

    /// Reward-per-selection ratios, zero for never-selected strategies.
    pub fn reward_ratios(&self) -> Vec<f64> {
        self.ens_num
            .iter()
            .zip(self.reward.iter())
            .map(|(&n, &r)| if n == 0 { 0.0 } else { r as f64 / n as f64 })
            .collect()
    }

    /// Gain-per-evaluation ratios, zero where nothing was consumed.
    pub fn gain_rates(&self) -> Vec<f64> {
        self.c_fes
            .iter()
            .zip(self.change.iter())
            .map(|(&fes, &gain)| if fes == 0 { 0.0 } else { gain / fes as f64 })
            .collect()
    }

    /// Rewards the strategy with the best gain-per-evaluation ratio
    /// (ties toward the lower id) and returns its index.
    pub fn grant_reward(&mut self) -> usize {
        let psi = self.gain_rates();
        let mut best = 0;
        for (i, &v) in psi.iter().enumerate().skip(1) {
            if v > psi[best] {
                best = i;
            }
        }
        self.reward[best] += 1;
        best
    }
}

/// Pool indices ordered by descending reward ratio (ties toward the
/// lower id), truncated to the sub-pool size: half the pool, at least 1.
pub fn top_half_by_reward_ratio(stats: &StrategyStats) -> Vec<usize> {
    let sr = stats.reward_ratios();
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| sr[b].partial_cmp(&sr[a]).unwrap().then(a.cmp(&b)));
    let keep = (stats.len() / 2).max(1);
    order.truncate(keep);
    order
}

/// Picks a strategy index: uniformly over the whole pool while
/// `fes <= max_fes / 2`, uniformly over the top-ratio sub-pool after.
pub fn select_ens(
    stats: &StrategyStats,
    fes: u64,
    max_fes: u64,
    rng: &mut impl Rng,
) -> usize {
    if fes.saturating_mul(2) <= max_fes {
        rng.gen_range(0..stats.len())
    } else {
        let pool = top_half_by_reward_ratio(stats);
        pool[rng.gen_range(0..pool.len())]
    }
}

/// At reward generations (every twentieth), grants the reward and
/// returns the forced strategy index; otherwise `None`.
pub fn apply_reward(stats: &mut StrategyStats, generation: u64) -> Option<usize> {
    debug_assert!(generation >= 1);
    if generation >= 1 && generation % 20 == 0 {
        Some(stats.grant_reward())
    } else {
        None
    }
}

/// Outcome of the scenario-elimination procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmsRanking {
    /// How many datasets counted each scenario among the worst.
    pub worst_counts: [u32; 8],
    /// The five least-penalized scenarios, ascending by id.
    pub selected: [CmsId; 5],
}

/// Ranks the eight scenarios from a per-dataset accuracy table and keeps
/// the five least often found among the worst.
///
/// For each dataset the three lowest-accuracy scenarios are counted as
/// worst; ties at the third-lowest value widen the counted group, and
/// datasets where every scenario ties are skipped entirely. Count ties
/// at the selection boundary are settled head-to-head: the scenario that
/// is worse on fewer datasets survives.
pub fn rank_cms(table: &[[f64; 8]]) -> Result<CmsRanking> {
    if table.is_empty() {
        return Err(Error::InvalidArgument(
            "scenario ranking needs at least one dataset row".into(),
        ));
    }
    let mut worst_counts = [0u32; 8];
    for row in table {
        let all_equal = row.iter().all(|&v| v == row[0]);
        if all_equal {
            continue;
        }
        let mut sorted = *row;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let third_worst = sorted[2];
        for (i, &acc) in row.iter().enumerate() {
            if acc <= third_worst {
                worst_counts[i] += 1;
            }
        }
    }
    let mut pairwise_losses = [[0u32; 8]; 8];
    for row in table {
        for a in 0..8 {
            for b in 0..8 {
                if row[a] < row[b] {
                    pairwise_losses[a][b] += 1;
                }
            }
        }
    }
    Ok(CmsRanking {
        worst_counts,
        selected: select_base(&worst_counts, &pairwise_losses),
    })
}

/// Turns worst-counts plus a head-to-head loss matrix into the retained
/// base set: the five scenarios with the fewest counts, boundary ties
/// broken by fewest losses against the tied group, then by lower id.
pub fn select_base(worst_counts: &[u32; 8], pairwise_losses: &[[u32; 8]; 8]) -> [CmsId; 5] {
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by_key(|&i| worst_counts[i]);

    let cutoff = worst_counts[order[4]];
    let mut keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| worst_counts[i] < cutoff)
        .collect();
    let mut tied: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| worst_counts[i] == cutoff)
        .collect();
    let slots = 5 - keep.len();
    if tied.len() > slots {
        // Worse on fewer datasets (against the tied group) survives.
        let loss_total = |i: usize, group: &[usize]| -> u32 {
            group
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| pairwise_losses[i][j])
                .sum()
        };
        let group = tied.clone();
        tied.sort_by_key(|&i| (loss_total(i, &group), i));
    }
    keep.extend(tied.into_iter().take(slots));
    keep.sort_unstable();

    let mut selected = [CmsId::new(1).unwrap(); 5];
    for (slot, &i) in keep.iter().enumerate() {
        selected[slot] = CmsId::new(i as u8 + 1).unwrap();
    }
    selected
}
