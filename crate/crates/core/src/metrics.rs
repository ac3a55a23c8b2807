//! Load-balance statistics of a blocked matrix and a makespan model of its
//! task graph.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::grid::{BlockGrid, DependencyTree, Task};
use crate::{Error, Result};

/// Distribution of stored entries over the nonempty blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NnzStats {
    pub blocks: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// Coefficient of variation, population standard deviation over mean.
    pub cv: f64,
}

/// Work in one wave of the dependency tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LevelWork {
    pub level: usize,
    pub total_weight: u64,
    pub max_weight: u64,
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub levels: Vec<LevelWork>,
    pub total_weight: u64,
    /// Share of the total weight carried by the final elimination step.
    pub last_level_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub per_block_nnz: NnzStats,
    pub per_level_work: Vec<LevelWork>,
    pub last_level_share: f64,
    /// Blocks per dimension.
    pub block_count: usize,
}

pub fn block_nnz_stats(grid: &BlockGrid) -> NnzStats {
    nnz_stats(grid.iter().map(|(_, b)| b.nnz()).filter(|&c| c > 0))
}

fn nnz_stats(counts: impl Iterator<Item = usize>) -> NnzStats {
    let counts: Vec<usize> = counts.collect();
    if counts.is_empty() {
        return NnzStats {
            blocks: 0,
            min: 0,
            max: 0,
            mean: 0.0,
            cv: 0.0,
        };
    }
    let k = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / k;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / k;
    NnzStats {
        blocks: counts.len(),
        min: *counts.iter().min().unwrap(),
        max: *counts.iter().max().unwrap(),
        mean,
        cv: var.sqrt() / mean,
    }
}

pub fn level_work_stats(tree: &DependencyTree) -> LevelReport {
    let tasks = tree.tasks();
    let levels: Vec<LevelWork> = tree
        .levels()
        .iter()
        .enumerate()
        .map(|(level, ids)| LevelWork {
            level,
            total_weight: ids.iter().map(|&t| tasks[t].weight).sum(),
            max_weight: ids.iter().map(|&t| tasks[t].weight).max().unwrap_or(0),
            tasks: ids.len(),
        })
        .collect();
    let total_weight = tree.total_weight();
    let last_step = tree.num_steps().saturating_sub(1);
    let last: u64 = tasks.iter().filter(|t| t.step == last_step).map(|t| t.weight).sum();
    LevelReport {
        levels,
        total_weight,
        last_level_share: if total_weight == 0 {
            0.0
        } else {
            last as f64 / total_weight as f64
        },
    }
}

pub fn balance_report(grid: &BlockGrid, tree: &DependencyTree) -> BalanceReport {
    let levels = level_work_stats(tree);
    BalanceReport {
        per_block_nnz: block_nnz_stats(grid),
        per_level_work: levels.levels,
        last_level_share: levels.last_level_share,
        block_count: grid.p(),
    }
}

/// Per-task cost used by [`makespan_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostModel {
    /// Nonzero weight of the task (see [`Task::weight`]).
    #[default]
    Nnz,
    /// Floating-point operations implied by the filled pattern.
    Flops,
    /// Every task costs one unit.
    Unit,
}

impl CostModel {
    pub fn cost(self, task: &Task) -> u64 {
        match self {
            CostModel::Nnz => task.weight,
            CostModel::Flops => task.flops,
            CostModel::Unit => 1,
        }
    }
}

/// Finish time of greedy list scheduling on `workers` identical units.
/// Whenever a unit is free it takes the most expensive ready task, ties
/// going to the lower task id.
pub fn makespan_model<F>(tree: &DependencyTree, workers: usize, cost: F) -> Result<u64>
where
    F: Fn(&Task) -> u64,
{
    if workers == 0 {
        return Err(Error::BadParams("workers must be at least 1".into()));
    }
    let tasks = tree.tasks();
    let costs: Vec<u64> = tasks.iter().map(&cost).collect();
    let succ = tree.successors();
    let mut pending: Vec<usize> = (0..tasks.len()).map(|t| tree.deps(t).len()).collect();
    let mut ready: BinaryHeap<(u64, Reverse<usize>)> = (0..tasks.len())
        .filter(|&t| pending[t] == 0)
        .map(|t| (costs[t], Reverse(t)))
        .collect();
    let mut running: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut now = 0u64;
    loop {
        while running.len() < workers {
            let Some((c, Reverse(t))) = ready.pop() else { break };
            running.push(Reverse((now + c, t)));
        }
        let Some(Reverse((finish, t))) = running.pop() else { break };
        now = finish;
        let mut done = vec![t];
        while let Some(&Reverse((f, u))) = running.peek() {
            if f != now {
                break;
            }
            running.pop();
            done.push(u);
        }
        for t in done {
            for &s in &succ[t] {
                pending[s] -= 1;
                if pending[s] == 0 {
                    ready.push((costs[s], Reverse(s)));
                }
            }
        }
    }
    Ok(now)
}

/// Longest dependency chain under `cost`.
pub fn critical_path<F>(tree: &DependencyTree, cost: F) -> u64
where
    F: Fn(&Task) -> u64,
{
    let tasks = tree.tasks();
    let mut finish = vec![0u64; tasks.len()];
    for t in 0..tasks.len() {
        let start = tree.deps(t).iter().map(|&d| finish[d]).max().unwrap_or(0);
        finish[t] = start + cost(&tasks[t]);
    }
    finish.into_iter().max().unwrap_or(0)
}
