//! Worker-pool driver for [`sse_decay::ensemble`].
//!
//! Leaves are computed in parallel a batch at a time and pushed to the tree
//! reducer in index order, so the result is the same for any pool size.

use rayon::prelude::*;
use sse_decay::ensemble::{Engine, EnsembleTable, ExperimentPlan, Leaf, PreparedPlan, TreeReducer};
use sse_decay::{Error, Result};

/// Runs `plan` on a pool of `workers` threads (`0` means one per core).
pub fn run_ensemble_parallel(plan: ExperimentPlan, engine: Engine, workers: usize) -> Result<EnsembleTable> {
    let prepared = PreparedPlan::new(plan, engine)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::NumericFailure(format!("cannot start worker pool: {e}")))?;
    let n = prepared.n_leaves();
    // bound memory: only a few batches of leaves are alive at once
    let batch = (pool.current_num_threads() as u64 * 4).max(1);
    let mut reducer = TreeReducer::new();
    let mut start = 0;
    while start < n {
        let end = (start + batch).min(n);
        let leaves: Vec<Result<Leaf>> =
            pool.install(|| (start..end).into_par_iter().map(|i| prepared.run_leaf(i)).collect());
        for leaf in leaves {
            reducer.push(leaf?)?;
        }
        start = end;
    }
    let reduced = reducer
        .finish()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    prepared.finish(reduced)
}
