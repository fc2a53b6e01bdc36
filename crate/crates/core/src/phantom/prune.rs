use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::CenterlineTree;

/// Removes `round(fraction · terminals)` terminal branches, always picking
/// among the deepest remaining terminals. A branch runs from the terminal up
/// to (not including) the nearest ancestor that keeps another child.
/// Returns the pruned tree and, for each of its nodes, the original index.
pub fn prune_terminals(tree: &CenterlineTree, fraction: f64, seed: u64) -> Result<(CenterlineTree, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Spec(format!("prune fraction {fraction} outside [0, 1)")));
    }
    let n = tree.len();
    let parents = tree.parents();
    let depth: Vec<usize> = (0..n).map(|i| tree.depth(i)).collect();
    let mut alive = vec![true; n];
    let mut live_children: Vec<usize> = (0..n).map(|i| tree.children(i).len()).collect();
    let removals = libm::round(fraction * tree.terminals().len() as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..removals {
        let leaves: Vec<usize> = (0..n).filter(|&i| alive[i] && live_children[i] == 0 && i != tree.root()).collect();
        let Some(deepest) = leaves.iter().map(|&i| depth[i]).max() else {
            return Err(Error::Spec("pruning would remove the root".into()));
        };
        let pool: Vec<usize> = leaves.into_iter().filter(|&i| depth[i] == deepest).collect();
        let mut node = pool[rng.gen_range(0..pool.len())];
        loop {
            alive[node] = false;
            let Some(p) = parents[node] else { break };
            live_children[p] -= 1;
            if live_children[p] > 0 {
                break;
            }
            if p == tree.root() {
                return Err(Error::Spec("pruning would remove the root".into()));
            }
            node = p;
        }
    }
    tree.retain(&alive)
}
