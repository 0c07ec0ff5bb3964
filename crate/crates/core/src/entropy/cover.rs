//! Greedy set-cover routines behind every count in the entropy module.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Keyed {
    key: f64,
    id: usize,
}

impl Eq for Keyed {}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of a greedy cover.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyCover {
    /// Chosen set ids, in the order picked.
    pub chosen: Vec<usize>,
    /// Weight of the covered elements.
    pub covered: f64,
    /// Sum of the chosen sets' costs (their count for unit costs).
    pub cost: f64,
}

/// Picks sets of largest uncovered weight until `target` weight is covered
/// or nothing more can be gained. Lazy evaluation: stale gains are upper
/// bounds, so a popped set whose refreshed gain still tops the heap is the
/// true greedy choice.
pub fn greedy_max_coverage(sets: &[Vec<u32>], weights: &[f64], target: f64) -> GreedyCover {
    let gain = |set: &Vec<u32>, covered: &[bool]| -> f64 {
        set.iter().filter(|&&e| !covered[e as usize]).map(|&e| weights[e as usize]).sum()
    };
    let mut covered = vec![false; weights.len()];
    let mut heap: BinaryHeap<Keyed> = sets
        .iter()
        .enumerate()
        .map(|(id, s)| Keyed { key: gain(s, &covered), id })
        .filter(|k| k.key > 0.0)
        .collect();
    let mut out = GreedyCover { chosen: Vec::new(), covered: 0.0, cost: 0.0 };
    // Guards against rounding when the target is the full mass.
    let slack = 1e-12 * target.abs().max(1.0);
    while out.covered < target - slack {
        let Some(top) = heap.pop() else { break };
        let fresh = gain(&sets[top.id], &covered);
        if fresh <= 0.0 {
            continue;
        }
        if heap.peek().is_some_and(|next| fresh < next.key) {
            heap.push(Keyed { key: fresh, id: top.id });
            continue;
        }
        for &e in &sets[top.id] {
            covered[e as usize] = true;
        }
        out.covered += fresh;
        out.cost += 1.0;
        out.chosen.push(top.id);
    }
    out
}

/// Covers every coverable element while greedily minimising
/// `cost / newly covered`, the classical weighted set-cover heuristic.
pub fn greedy_weighted_cover(sets: &[Vec<u32>], costs: &[f64], n_elements: usize) -> GreedyCover {
    let mut covered = vec![false; n_elements];
    let fresh = |set: &Vec<u32>, covered: &[bool]| set.iter().filter(|&&e| !covered[e as usize]).count();
    // Max-heap on negated price.
    let mut heap: BinaryHeap<Keyed> = sets
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(id, s)| Keyed { key: -costs[id] / s.len() as f64, id })
        .collect();
    let mut out = GreedyCover { chosen: Vec::new(), covered: 0.0, cost: 0.0 };
    while let Some(top) = heap.pop() {
        let gain = fresh(&sets[top.id], &covered);
        if gain == 0 {
            continue;
        }
        let price = -costs[top.id] / gain as f64;
        if heap.peek().is_some_and(|next| price < next.key) {
            heap.push(Keyed { key: price, id: top.id });
            continue;
        }
        for &e in &sets[top.id] {
            covered[e as usize] = true;
        }
        out.covered += gain as f64;
        out.cost += costs[top.id];
        out.chosen.push(top.id);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_coverage_prefers_heavy_sets() {
        let sets = vec![vec![0, 1], vec![2], vec![1, 2, 3]];
        let w = vec![0.25; 4];
        let c = greedy_max_coverage(&sets, &w, 0.74);
        assert_eq!(c.chosen, vec![2]);
        let c = greedy_max_coverage(&sets, &w, 1.0);
        assert_eq!(c.chosen, vec![2, 0]);
        assert!((c.covered - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_cover_uses_cheap_sets() {
        let sets = vec![vec![0, 1, 2, 3], vec![0, 1], vec![2, 3]];
        let c = greedy_weighted_cover(&sets, &[3.0, 1.0, 1.0], 4);
        assert_eq!(c.cost, 2.0);
        let c = greedy_weighted_cover(&sets, &[1.5, 1.0, 1.0], 4);
        assert_eq!(c.chosen, vec![0]);
    }

    #[test]
    fn uncoverable_elements_are_left_out() {
        let sets = vec![vec![0], vec![]];
        let c = greedy_weighted_cover(&sets, &[1.0, 1.0], 2);
        assert_eq!(c.covered, 1.0);
        let c = greedy_max_coverage(&sets, &[0.5, 0.5], 1.0);
        assert_eq!(c.covered, 0.5);
    }
}
