//! Weight functions over the operator index set and the control regimes that
//! produce one per iteration.
//!
//! Indices in schedule encodings are 1-based; weight vectors are indexed from 0.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

const SUM_TOLERANCE: f64 = 1e-12;

/// Nonnegative weights in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSchedule("empty weight vector".into()));
        }
        if values.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidSchedule(format!(
                "weights must lie in [0, 1]: {values:?}"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidSchedule(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(WeightVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// `(i, w(i))` for every index with positive weight, ascending.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, w)| w > 0.0)
    }
}

/// How weights are spread inside a selected block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntraBlock {
    Uniform,
    /// One weight list per block, aligned with the block's index list.
    Explicit(Vec<Vec<f64>>),
}

/// A control regime. The JSON tag is `regime`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// Weight one on index `(k mod m) + 1`.
    SequentialCyclic,
    /// Every index is visited at least once in every `period_bound`
    /// consecutive iterations; the order is a seeded shuffle.
    SequentialAlmostCyclic { period_bound: usize, order_seed: u64 },
    /// Weight one on `control[k mod len]`; `control` must mention every index.
    SequentialRepetitive { control: Vec<usize> },
    SimultaneousUniform,
    /// `1/(mk+m)` on every index except `i_k = selector[k mod len]`, which
    /// takes `(mk+1)/(mk+m)`.
    SimultaneousDrifting { selector: Vec<usize> },
    /// Cycles through a partition of the index set.
    #[serde(rename = "block_classical")]
    BlockClassicalCyclic {
        partition: Vec<Vec<usize>>,
        intra: IntraBlock,
    },
    /// Selects block `blocks[k mod len]`; blocks may overlap or omit indices.
    BlockGeneralized {
        blocks: Vec<Vec<usize>>,
        intra: IntraBlock,
    },
    /// Index `index` gets `2^-(k+1)` (a summable series); the other indices
    /// share the rest uniformly.
    SummableIndex { index: usize },
}

impl Regime {
    /// The JSON tag of the regime.
    pub fn name(&self) -> &'static str {
        match self {
            Regime::SequentialCyclic => "sequential_cyclic",
            Regime::SequentialAlmostCyclic { .. } => "sequential_almost_cyclic",
            Regime::SequentialRepetitive { .. } => "sequential_repetitive",
            Regime::SimultaneousUniform => "simultaneous_uniform",
            Regime::SimultaneousDrifting { .. } => "simultaneous_drifting",
            Regime::BlockClassicalCyclic { .. } => "block_classical",
            Regime::BlockGeneralized { .. } => "block_generalized",
            Regime::SummableIndex { .. } => "summable_index",
        }
    }
}

/// A validated regime bound to an index set of size `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    regime: Regime,
    m: usize,
}

impl WeightSchedule {
    pub fn new(regime: Regime, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSchedule("index set is empty".into()));
        }
        let in_range = |i: usize| i >= 1 && i <= m;
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        match &regime {
            Regime::SequentialCyclic | Regime::SimultaneousUniform => {}
            Regime::SequentialAlmostCyclic { period_bound, .. } => {
                if *period_bound < 2 * m - 1 {
                    return bad(format!(
                        "period_bound {period_bound} is below 2m-1 = {}",
                        2 * m - 1
                    ));
                }
            }
            Regime::SequentialRepetitive { control } => {
                if let Some(&i) = control.iter().find(|&&i| !in_range(i)) {
                    return bad(format!("control index {i} outside 1..={m}"));
                }
                if let Some(missing) = (1..=m).find(|i| !control.contains(i)) {
                    return bad(format!("control never selects index {missing}"));
                }
            }
            Regime::SimultaneousDrifting { selector } => {
                if selector.is_empty() {
                    return bad("drifting selector is empty".into());
                }
                if let Some(&i) = selector.iter().find(|&&i| !in_range(i)) {
                    return bad(format!("selector index {i} outside 1..={m}"));
                }
            }
            Regime::BlockClassicalCyclic { partition, intra } => {
                check_blocks(partition, intra, m)?;
                let mut seen = vec![false; m];
                for &i in partition.iter().flatten() {
                    if seen[i - 1] {
                        return bad(format!("index {i} appears in more than one block"));
                    }
                    seen[i - 1] = true;
                }
                if let Some(j) = seen.iter().position(|s| !s) {
                    return bad(format!("partition does not cover index {}", j + 1));
                }
            }
            Regime::BlockGeneralized { blocks, intra } => {
                check_blocks(blocks, intra, m)?;
            }
            Regime::SummableIndex { index } => {
                if !in_range(*index) {
                    return bad(format!("index {index} outside 1..={m}"));
                }
                if m < 2 {
                    return bad("summable_index needs at least two indices".into());
                }
            }
        }
        Ok(WeightSchedule { regime, m })
    }

    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The weight function `w_k`.
    pub fn weights_at(&self, k: usize) -> WeightVector {
        let m = self.m;
        let mut w = vec![0.0; m];
        match &self.regime {
            Regime::SequentialCyclic => w[k % m] = 1.0,
            Regime::SequentialAlmostCyclic {
                period_bound,
                order_seed,
            } => w[almost_cyclic_index(m, *period_bound, *order_seed, k)] = 1.0,
            Regime::SequentialRepetitive { control } => w[control[k % control.len()] - 1] = 1.0,
            Regime::SimultaneousUniform => w.fill(1.0 / m as f64),
            Regime::SimultaneousDrifting { selector } => {
                let denom = (m * k + m) as f64;
                w.fill(1.0 / denom);
                w[selector[k % selector.len()] - 1] = (m * k + 1) as f64 / denom;
            }
            Regime::BlockClassicalCyclic { partition, intra } => {
                let b = k % partition.len();
                fill_block(&mut w, &partition[b], intra, b);
            }
            Regime::BlockGeneralized { blocks, intra } => {
                let b = k % blocks.len();
                fill_block(&mut w, &blocks[b], intra, b);
            }
            Regime::SummableIndex { index } => {
                let small = 0.5f64.powi(k.min(i32::MAX as usize - 1) as i32 + 1);
                let rest = (1.0 - small) / (m - 1) as f64;
                w.fill(rest);
                w[index - 1] = small;
            }
        }
        WeightVector(w)
    }
}

fn check_blocks(blocks: &[Vec<usize>], intra: &IntraBlock, m: usize) -> Result<()> {
    if blocks.is_empty() {
        return Err(Error::InvalidSchedule("no blocks given".into()));
    }
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::InvalidSchedule(format!("block {b} is empty")));
        }
        if let Some(&i) = block.iter().find(|&&i| i == 0 || i > m) {
            return Err(Error::InvalidSchedule(format!(
                "block {b} index {i} outside 1..={m}"
            )));
        }
        let mut sorted = block.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != block.len() {
            return Err(Error::InvalidSchedule(format!("block {b} repeats an index")));
        }
    }
    if let IntraBlock::Explicit(weights) = intra {
        if weights.len() != blocks.len() {
            return Err(Error::InvalidSchedule(
                "explicit intra-block weights must list one vector per block".into(),
            ));
        }
        for (b, (block, ws)) in blocks.iter().zip(weights).enumerate() {
            if ws.len() != block.len() {
                return Err(Error::InvalidSchedule(format!(
                    "block {b} has {} indices but {} weights",
                    block.len(),
                    ws.len()
                )));
            }
            WeightVector::new(ws.clone())
                .map_err(|e| Error::InvalidSchedule(format!("block {b}: {e}")))?;
        }
    }
    Ok(())
}

fn fill_block(w: &mut [f64], block: &[usize], intra: &IntraBlock, b: usize) {
    match intra {
        IntraBlock::Uniform => {
            let share = 1.0 / block.len() as f64;
            for &i in block {
                w[i - 1] = share;
            }
        }
        IntraBlock::Explicit(weights) => {
            for (&i, &wi) in block.iter().zip(&weights[b]) {
                w[i - 1] = wi;
            }
        }
    }
}

/// Index visited at iteration `k` under the almost-cyclic regime.
///
/// Iterations are grouped in blocks of length `L = (period_bound + 1) / 2 >= m`.
/// Each block is a seeded shuffle of one full permutation of the indices plus
/// `L - m` random extras, so two visits of an index are at most `2L - 1 <=
/// period_bound` iterations apart.
fn almost_cyclic_index(m: usize, period_bound: usize, seed: u64, k: usize) -> usize {
    let len = period_bound.div_ceil(2).max(m);
    let (block, pos) = (k / len, k % len);
    let mut rng = keyed_rng(seed, block as u64, 0);
    let mut order: Vec<usize> = (0..m).collect();
    order.extend((m..len).map(|_| rng.random_range(0..m)));
    order.shuffle(&mut rng);
    order[pos]
}

/// Partial sums `sum_{k < horizon} w_k(i)` for every index.
pub fn divergence_profile(schedule: &WeightSchedule, horizon: usize) -> Vec<f64> {
    let mut sums = vec![0.0; schedule.m()];
    for k in 0..horizon {
        for (s, w) in sums.iter_mut().zip(schedule.weights_at(k).as_slice()) {
            *s += w;
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(regime: Regime, m: usize) -> WeightSchedule {
        WeightSchedule::new(regime, m).unwrap()
    }

    #[test]
    fn cyclic_uses_one_based_modular_control() {
        let s = schedule(Regime::SequentialCyclic, 3);
        assert_eq!(s.weights_at(4).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(s.weights_at(0).as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_weights() {
        let s = schedule(Regime::SimultaneousUniform, 4);
        assert_eq!(s.weights_at(17).as_slice(), &[0.25; 4]);
    }

    #[test]
    fn block_classical_cycles_between_blocks() {
        let s = schedule(
            Regime::BlockClassicalCyclic {
                partition: vec![vec![1, 2], vec![3]],
                intra: IntraBlock::Uniform,
            },
            3,
        );
        assert_eq!(s.weights_at(0).as_slice(), &[0.5, 0.5, 0.0]);
        assert_eq!(s.weights_at(1).as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(s.weights_at(2).as_slice(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn block_classical_explicit_weights() {
        let s = schedule(
            Regime::BlockClassicalCyclic {
                partition: vec![vec![3, 1], vec![2]],
                intra: IntraBlock::Explicit(vec![vec![0.25, 0.75], vec![1.0]]),
            },
            3,
        );
        assert_eq!(s.weights_at(0).as_slice(), &[0.75, 0.0, 0.25]);
    }

    #[test]
    fn block_classical_rejects_bad_partitions() {
        let overlapping = Regime::BlockClassicalCyclic {
            partition: vec![vec![1, 2], vec![2, 3]],
            intra: IntraBlock::Uniform,
        };
        assert!(WeightSchedule::new(overlapping, 3).is_err());
        let uncovered = Regime::BlockClassicalCyclic {
            partition: vec![vec![1], vec![3]],
            intra: IntraBlock::Uniform,
        };
        assert!(WeightSchedule::new(uncovered, 3).is_err());
        let empty_block = Regime::BlockClassicalCyclic {
            partition: vec![vec![1, 2, 3], vec![]],
            intra: IntraBlock::Uniform,
        };
        assert!(WeightSchedule::new(empty_block, 3).is_err());
    }

    #[test]
    fn generalized_blocks_zero_outside_selection() {
        let s = schedule(
            Regime::BlockGeneralized {
                blocks: vec![vec![1, 2], vec![2, 3], vec![4]],
                intra: IntraBlock::Uniform,
            },
            4,
        );
        assert_eq!(s.weights_at(1).as_slice(), &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(s.weights_at(5).as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert!(WeightSchedule::new(
            Regime::BlockGeneralized {
                blocks: vec![vec![]],
                intra: IntraBlock::Uniform
            },
            2
        )
        .is_err());
    }

    #[test]
    fn drifting_weights_normalize() {
        let s = schedule(Regime::SimultaneousDrifting { selector: vec![2] }, 3);
        let w0 = s.weights_at(0);
        assert_eq!(w0.as_slice(), &[1.0 / 3.0; 3]);
        let w5 = s.weights_at(5);
        // m k + m = 18: others 1/18, selected (15 + 1)/18
        assert!((w5.get(0) - 1.0 / 18.0).abs() < 1e-16);
        assert!((w5.get(1) - 16.0 / 18.0).abs() < 1e-16);
        assert!((w5.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repetitive_control_must_cover_every_index() {
        assert!(WeightSchedule::new(Regime::SequentialRepetitive { control: vec![1, 1, 2] }, 3).is_err());
        let s = schedule(Regime::SequentialRepetitive { control: vec![3, 1, 2, 1] }, 3);
        assert_eq!(s.weights_at(0).as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(s.weights_at(3).as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn almost_cyclic_visits_every_index_within_the_period() {
        let (m, p) = (5, 12);
        let s = schedule(
            Regime::SequentialAlmostCyclic {
                period_bound: p,
                order_seed: 9,
            },
            m,
        );
        let visits: Vec<usize> = (0..2000)
            .map(|k| s.weights_at(k).support().next().unwrap().0)
            .collect();
        for window in visits.windows(p) {
            for i in 0..m {
                assert!(window.contains(&i), "index {i} missing from a window");
            }
        }
        assert!(WeightSchedule::new(
            Regime::SequentialAlmostCyclic {
                period_bound: 8,
                order_seed: 0
            },
            5
        )
        .is_err());
    }

    #[test]
    fn summable_index_weights() {
        let s = schedule(Regime::SummableIndex { index: 3 }, 3);
        assert_eq!(s.weights_at(0).as_slice(), &[0.25, 0.25, 0.5]);
        assert_eq!(s.weights_at(1).as_slice(), &[0.375, 0.375, 0.25]);
        let far = s.weights_at(5000);
        assert_eq!(far.get(2), 0.0);
        assert_eq!(far.get(0), 0.5);
    }

    #[test]
    fn divergence_profiles() {
        let uniform = schedule(Regime::SimultaneousUniform, 2);
        assert_eq!(divergence_profile(&uniform, 100), vec![50.0, 50.0]);
        let cyclic = schedule(Regime::SequentialCyclic, 2);
        assert_eq!(divergence_profile(&cyclic, 100), vec![50.0, 50.0]);

        let drifting = schedule(Regime::SimultaneousDrifting { selector: vec![1] }, 2);
        let profile = divergence_profile(&drifting, 1000);
        // independent harmonic partial sum, summed from the small end
        let harmonic: f64 = (0..1000).rev().map(|k| 1.0 / (2.0 * k as f64 + 2.0)).sum();
        assert!((profile[1] - harmonic).abs() < 1e-10);
        assert!((profile[0] + profile[1] - 1000.0).abs() < 1e-9);

        let summable = schedule(Regime::SummableIndex { index: 3 }, 3);
        assert!(divergence_profile(&summable, 10_000)[2] <= 1.0);
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn json_encodings() {
        let r: Regime = serde_json::from_str(r#"{"regime":"sequential_cyclic"}"#).unwrap();
        assert_eq!(r, Regime::SequentialCyclic);
        let r: Regime = serde_json::from_str(
            r#"{"regime":"block_classical","partition":[[1,2],[3]],"intra":"uniform"}"#,
        )
        .unwrap();
        assert!(matches!(r, Regime::BlockClassicalCyclic { .. }));
        let r: Regime = serde_json::from_str(
            r#"{"regime":"block_generalized","blocks":[[1],[2,3]],"intra":{"explicit":[[1.0],[0.5,0.5]]}}"#,
        )
        .unwrap();
        assert!(WeightSchedule::new(r, 3).is_ok());
    }
}
