//! Explicit-state reachability check, independent of the SAT encoding.

use std::collections::HashSet;

use crate::dynamics::SimState;
use crate::model::ProblemInstance;

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Live,
    Dead,
    BudgetExceeded,
}

/// Depth-first search over released states. Live iff a state where every
/// train is finished is reachable by single actions.
pub fn oracle_decide(inst: &ProblemInstance, node_budget: usize) -> OracleVerdict {
    let start = SimState::initial(inst);
    if start.all_finished() {
        return OracleVerdict::Live;
    }
    let mut visited: HashSet<SimState> = HashSet::new();
    let mut stack = vec![start.clone()];
    visited.insert(start);
    while let Some(s) = stack.pop() {
        for (t, e) in s.legal_actions(inst) {
            let next = s
                .apply_action(inst, t, e)
                .expect("legal action applies");
            if next.all_finished() {
                return OracleVerdict::Live;
            }
            if visited.contains(&next) {
                continue;
            }
            if visited.len() >= node_budget {
                return OracleVerdict::BudgetExceeded;
            }
            visited.insert(next.clone());
            stack.push(next);
        }
    }
    OracleVerdict::Dead
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator;

    #[test]
    fn example_one_is_dead() {
        assert_eq!(
            oracle_decide(&generator::example1_corridor(), DEFAULT_NODE_BUDGET),
            OracleVerdict::Dead
        );
    }

    #[test]
    fn single_train_corridor_is_live() {
        let inst = generator::corridor(2, Some(0.5), None).unwrap();
        assert_eq!(oracle_decide(&inst, 10), OracleVerdict::Live);
    }

    #[test]
    fn parallel_tracks_are_live() {
        let inst = generator::parallel_tracks(2);
        assert_eq!(oracle_decide(&inst, 1000), OracleVerdict::Live);
    }

    #[test]
    fn tiny_budget_is_reported() {
        let inst = generator::example2_corridor();
        assert_eq!(oracle_decide(&inst, 1), OracleVerdict::BudgetExceeded);
    }
}
