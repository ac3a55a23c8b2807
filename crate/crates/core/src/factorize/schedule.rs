//! Execution graph and worker pool.
//!
//! The graph is coarser than the analysis DAG in one place: all Schur
//! updates fed by one U panel `(i, j)` run as a single job, walking the L
//! panels of column `i` in block-row order. Writes to any block column are
//! chained through `last_update`, which fixes the order in which every
//! block receives its updates.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

use super::kernels::Workspace;
use crate::grid::GridShape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Job {
    Getrf(usize),
    Gessm(usize),
    Tstrf(usize),
    /// Barrier: every L panel of this step is solved.
    Join(usize),
    /// Applies `U(i, j)` against the L panels in slots `first..last`, which
    /// are the blocks below the diagonal of column `i` in row order.
    Update { u_slot: usize, first: usize, last: usize },
}

pub(crate) struct ExecGraph {
    pub(crate) jobs: Vec<Job>,
    succ_ptr: Vec<usize>,
    succ: Vec<usize>,
    ndeps: Vec<usize>,
}

impl ExecGraph {
    /// Job ids are a topological order: every dependency has a smaller id.
    pub(crate) fn build(shape: &GridShape) -> Self {
        let p = shape.plan.num_blocks();
        let mut jobs = Vec::new();
        let mut deps: Vec<Vec<usize>> = Vec::new();
        let mut last_update: Vec<Option<usize>> = vec![None; p];
        let mut push = |job: Job, d: Vec<usize>, jobs: &mut Vec<Job>| {
            jobs.push(job);
            deps.push(d);
            jobs.len() - 1
        };
        for i in 0..p {
            let getrf = push(Job::Getrf(i), last_update[i].into_iter().collect(), &mut jobs);
            let upper: Vec<usize> = shape.row_slots[shape.row_ptr[i]..shape.row_ptr[i + 1]]
                .iter()
                .copied()
                .filter(|&s| shape.block_cols[s] > i)
                .collect();
            let mut gessm = Vec::with_capacity(upper.len());
            for &s in &upper {
                let j = shape.block_cols[s];
                let mut d = vec![getrf];
                d.extend(last_update[j]);
                gessm.push(push(Job::Gessm(s), d, &mut jobs));
            }
            let (first, last) = (shape.diag_slot(i) + 1, shape.col_ptr[i + 1]);
            if first == last {
                continue;
            }
            let tstrf = (first..last)
                .map(|s| push(Job::Tstrf(s), vec![getrf], &mut jobs))
                .collect();
            let join = push(Job::Join(i), tstrf, &mut jobs);
            for (&s, &g) in upper.iter().zip(&gessm) {
                let j = shape.block_cols[s];
                let job = Job::Update { u_slot: s, first, last };
                last_update[j] = Some(push(job, vec![g, join], &mut jobs));
            }
        }
        let n = jobs.len();
        let ndeps: Vec<usize> = deps.iter().map(Vec::len).collect();
        let mut succ_ptr = vec![0usize; n + 1];
        for d in &deps {
            for &x in d {
                succ_ptr[x + 1] += 1;
            }
        }
        for t in 0..n {
            succ_ptr[t + 1] += succ_ptr[t];
        }
        let mut fill = succ_ptr.clone();
        let mut succ = vec![0usize; succ_ptr[n]];
        for (t, d) in deps.iter().enumerate() {
            for &x in d {
                succ[fill[x]] = t;
                fill[x] += 1;
            }
        }
        ExecGraph {
            jobs,
            succ_ptr,
            succ,
            ndeps,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.jobs.len()
    }

    fn successors(&self, t: usize) -> &[usize] {
        &self.succ[self.succ_ptr[t]..self.succ_ptr[t + 1]]
    }
}

struct Queue {
    ready: BinaryHeap<Reverse<usize>>,
    in_flight: usize,
    failure: Option<(usize, Error)>,
}

/// Runs every job once its dependencies are done. With one worker the jobs
/// run in id order on the calling thread.
///
/// After a failure, jobs with a larger id than the earliest failed job are
/// dropped and the rest drain, so the reported error is the one a
/// sequential run would have produced.
pub(crate) fn execute<F>(graph: &ExecGraph, workers: usize, run: F) -> Result<()>
where
    F: Fn(Job, &mut Workspace) -> Result<()> + Sync,
{
    if workers <= 1 {
        let mut ws = Workspace::new();
        for &job in &graph.jobs {
            run(job, &mut ws)?;
        }
        return Ok(());
    }
    let pending: Vec<AtomicUsize> = graph.ndeps.iter().map(|&d| AtomicUsize::new(d)).collect();
    let queue = Mutex::new(Queue {
        ready: (0..graph.len())
            .filter(|&t| graph.ndeps[t] == 0)
            .map(Reverse)
            .collect(),
        in_flight: 0,
        failure: None,
    });
    let wake = Condvar::new();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(graph.len().max(1)) {
            scope.spawn(|| {
                let mut ws = Workspace::new();
                loop {
                    let job = {
                        let mut q = queue.lock().expect("queue lock");
                        loop {
                            let limit = q.failure.as_ref().map_or(usize::MAX, |f| f.0);
                            match q.ready.pop() {
                                Some(Reverse(t)) if t < limit => {
                                    q.in_flight += 1;
                                    break Some(t);
                                }
                                Some(_) => continue,
                                None if q.in_flight == 0 => break None,
                                None => q = wake.wait(q).expect("queue lock"),
                            }
                        }
                    };
                    let Some(t) = job else {
                        wake.notify_all();
                        return;
                    };
                    let outcome = run(graph.jobs[t], &mut ws);
                    let mut released = Vec::new();
                    if outcome.is_ok() {
                        for &s in graph.successors(t) {
                            if pending[s].fetch_sub(1, Ordering::AcqRel) == 1 {
                                released.push(s);
                            }
                        }
                    }
                    let mut q = queue.lock().expect("queue lock");
                    q.in_flight -= 1;
                    if let Err(e) = outcome {
                        if q.failure.as_ref().is_none_or(|f| t < f.0) {
                            q.failure = Some((t, e));
                        }
                    }
                    q.ready.extend(released.into_iter().map(Reverse));
                    drop(q);
                    wake.notify_all();
                }
            });
        }
    });
    match queue.into_inner().expect("queue lock").failure {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}
