//! Executable semantics of route allocation and release.
//!
//! A [`SimState`] is always kept in released form: every route that the
//! freeable rule allows to be released has been released. One transition is
//! an allocation round followed by one release pass, which is already a fixed
//! point because a freeable route stays freeable while only routes behind it
//! disappear.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ElemIdx, ProblemInstance, RouteIdx, TrainIdx};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("illegal action: train '{train}' cannot allocate '{route}': {reason}")]
    IllegalAction {
        train: String,
        route: String,
        reason: String,
    },
    #[error("plan leaves train(s) unfinished: {0:?}")]
    Unfinished(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimState {
    occ: Vec<Option<TrainIdx>>,
    finished: Vec<bool>,
    present: Vec<bool>,
}

/// The freeable predicate, evaluated on an occupancy vector.
///
/// `freeable(a, l)` holds when `a` is a boundary route, when `l <= 0`, or when
/// some successor `b` of `a` is held by `t` and `freeable(b, l - len(a))`.
pub fn freeable(
    inst: &ProblemInstance,
    occ: &[Option<TrainIdx>],
    t: TrainIdx,
    a: RouteIdx,
    l: f64,
) -> bool {
    let infra = &inst.infrastructure;
    let route = infra.route(a);
    if route.exit.is_none() || l <= 0.0 {
        return true;
    }
    infra
        .next_routes(a)
        .iter()
        .any(|b| occ[b.index()] == Some(t) && freeable(inst, occ, t, *b, l - route.length))
}

impl SimState {
    /// Initial positions after the first release pass.
    pub fn initial(inst: &ProblemInstance) -> SimState {
        let n_routes = inst.infrastructure.routes().len();
        let mut occ = vec![None; n_routes];
        for (i, t) in inst.trains.iter().enumerate() {
            for r in &t.initial {
                occ[r.index()] = Some(TrainIdx::from(i));
            }
        }
        let finished = inst.trains.iter().map(|t| t.starts_finished()).collect();
        let mut s = SimState {
            occ,
            finished,
            present: vec![true; inst.trains.len()],
        };
        s.release(inst);
        s
    }

    pub fn occupant(&self, r: RouteIdx) -> Option<TrainIdx> {
        self.occ[r.index()]
    }

    pub fn occupancy(&self) -> &[Option<TrainIdx>] {
        &self.occ
    }

    pub fn is_finished(&self, t: TrainIdx) -> bool {
        self.finished[t.index()]
    }

    pub fn is_present(&self, t: TrainIdx) -> bool {
        self.present[t.index()]
    }

    pub fn all_finished(&self) -> bool {
        self.finished.iter().all(|f| *f)
    }

    /// Routes held by `t`, tail first.
    pub fn chain(&self, inst: &ProblemInstance, t: TrainIdx) -> Vec<RouteIdx> {
        inst.infrastructure
            .topological_order()
            .iter()
            .copied()
            .filter(|r| self.occ[r.index()] == Some(t))
            .collect()
    }

    fn release(&mut self, inst: &ProblemInstance) {
        let snapshot = self.occ.clone();
        for (i, slot) in self.occ.iter_mut().enumerate() {
            if let Some(t) = snapshot[i] {
                let len = inst.train(t).length;
                if freeable(inst, &snapshot, t, RouteIdx::from(i), len) {
                    *slot = None;
                }
            }
        }
        for p in self.present.iter_mut() {
            *p = false;
        }
        for t in self.occ.iter().flatten() {
            self.present[t.index()] = true;
        }
    }

    fn mark_finished(&mut self, inst: &ProblemInstance) {
        for (i, t) in self.occ.iter().enumerate() {
            if let Some(t) = t {
                if inst.train(*t).final_routes.contains(&RouteIdx::from(i)) {
                    self.finished[t.index()] = true;
                }
            }
        }
    }

    /// Parts of `e` that `t` would newly allocate, or why it cannot.
    pub fn check_action(
        &self,
        inst: &ProblemInstance,
        t: TrainIdx,
        e: ElemIdx,
    ) -> Result<Vec<RouteIdx>, DynamicsError> {
        let infra = &inst.infrastructure;
        let parts = &infra.elementary(e).parts;
        let illegal = |reason: &str| DynamicsError::IllegalAction {
            train: inst.train(t).name.clone(),
            route: infra.elementary(e).name.clone(),
            reason: reason.to_string(),
        };
        if !self.present[t.index()] {
            return Err(illegal("train has left the model"));
        }
        let chain = self.chain(inst, t);
        let head = *chain.last().ok_or_else(|| illegal("train holds no route"))?;
        let held = parts
            .iter()
            .take_while(|p| self.occ[p.index()] == Some(t))
            .count();
        let new_parts = &parts[held..];
        if new_parts.is_empty() {
            return Err(illegal("route already held"));
        }
        if held > 0 && parts[held - 1] != head {
            return Err(illegal("route does not continue from the train's head"));
        }
        let head_exit = infra.route(head).exit;
        if head_exit.is_none() || infra.route(new_parts[0]).entry != head_exit {
            return Err(illegal("route does not continue from the train's head"));
        }
        for p in new_parts {
            if self.occ[p.index()].is_some() {
                return Err(illegal("route is occupied"));
            }
            let blocked = infra.conflicts_of(*p).iter().any(|c| {
                self.occ[c.index()].is_some() || new_parts.contains(c)
            });
            if blocked {
                return Err(illegal("conflicting route is occupied"));
            }
        }
        Ok(new_parts.to_vec())
    }

    /// All legal (train, elementary route) actions, ordered by train then route.
    pub fn legal_actions(&self, inst: &ProblemInstance) -> Vec<(TrainIdx, ElemIdx)> {
        let infra = &inst.infrastructure;
        let mut out = Vec::new();
        for t in inst.train_indices() {
            if !self.present[t.index()] {
                continue;
            }
            let chain = self.chain(inst, t);
            let Some(&head) = chain.last() else { continue };
            let head_elem = infra.route(head).elementary;
            let mut candidates: Vec<ElemIdx> = Vec::new();
            if infra.elementary(head_elem).parts.last() != Some(&head) {
                candidates.push(head_elem);
            } else {
                for r in infra.next_routes(head) {
                    let e = infra.route(*r).elementary;
                    if infra.elementary(e).parts[0] == *r && !candidates.contains(&e) {
                        candidates.push(e);
                    }
                }
            }
            candidates.sort_unstable();
            for e in candidates {
                if self.check_action(inst, t, e).is_ok() {
                    out.push((t, e));
                }
            }
        }
        out
    }

    /// One action followed by a release pass.
    pub fn apply_action(
        &self,
        inst: &ProblemInstance,
        t: TrainIdx,
        e: ElemIdx,
    ) -> Result<SimState, DynamicsError> {
        let new_parts = self.check_action(inst, t, e)?;
        let mut next = self.clone();
        for p in new_parts {
            next.occ[p.index()] = Some(t);
        }
        next.mark_finished(inst);
        next.release(inst);
        Ok(next)
    }

    /// One parallel transition: all actions are allocated against the same
    /// released state, then one release pass runs. Returns the occupancy
    /// snapshot between allocation and release together with the new state.
    pub fn apply_step(
        &self,
        inst: &ProblemInstance,
        actions: &[(TrainIdx, ElemIdx)],
    ) -> Result<(Vec<Option<TrainIdx>>, SimState), DynamicsError> {
        let mut next = self.clone();
        for (t, e) in actions {
            let new_parts = next.check_action(inst, *t, *e)?;
            for p in new_parts {
                next.occ[p.index()] = Some(*t);
            }
        }
        next.mark_finished(inst);
        let snapshot = next.occ.clone();
        next.release(inst);
        Ok((snapshot, next))
    }

    /// Builds a state from explicit parts; used by tests and the sandbox.
    pub fn from_parts(
        occ: Vec<Option<TrainIdx>>,
        finished: Vec<bool>,
        present: Vec<bool>,
    ) -> SimState {
        SimState {
            occ,
            finished,
            present,
        }
    }

    pub fn to_doc(&self, inst: &ProblemInstance) -> StateDoc {
        let infra = &inst.infrastructure;
        let names = |flags: &[bool]| -> Vec<String> {
            let mut v: Vec<String> = flags
                .iter()
                .enumerate()
                .filter(|(_, f)| **f)
                .map(|(i, _)| inst.trains[i].name.clone())
                .collect();
            v.sort();
            v
        };
        StateDoc {
            occ: self
                .occ
                .iter()
                .enumerate()
                .filter_map(|(i, t)| {
                    t.map(|t| {
                        (
                            infra.routes()[i].name.clone(),
                            inst.train(t).name.clone(),
                        )
                    })
                })
                .collect(),
            finished: names(&self.finished),
            present: names(&self.present),
        }
    }
}

/// Serialized state: `{"occ":{"r1":"t1"},"finished":[..],"present":[..]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDoc {
    pub occ: BTreeMap<String, String>,
    pub finished: Vec<String>,
    pub present: Vec<String>,
}

/// Executes a sequential plan from the initial state and checks that every
/// train ends up finished.
pub fn replay(
    inst: &ProblemInstance,
    actions: &[(TrainIdx, ElemIdx)],
) -> Result<SimState, DynamicsError> {
    let mut s = SimState::initial(inst);
    for (t, e) in actions {
        s = s.apply_action(inst, *t, *e)?;
    }
    if !s.all_finished() {
        let left = inst
            .train_indices()
            .filter(|t| !s.is_finished(*t))
            .map(|t| inst.train(t).name.clone())
            .collect();
        return Err(DynamicsError::Unfinished(left));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator;

    fn elem(inst: &ProblemInstance, name: &str) -> ElemIdx {
        inst.infrastructure.elementary_by_name(name).unwrap()
    }

    #[test]
    fn corridor_initial_actions() {
        let inst = generator::example1_corridor();
        let s = SimState::initial(&inst);
        let acts = s.legal_actions(&inst);
        assert_eq!(acts.len(), 2);
        let (t, e) = acts[0];
        let s2 = s.apply_action(&inst, t, e).unwrap();
        assert!(s2.legal_actions(&inst).is_empty());
    }

    #[test]
    fn short_train_drops_tail_after_move() {
        let inst = generator::example2_corridor();
        let s = SimState::initial(&inst);
        let t = inst.train_by_name("t1").unwrap();
        assert_eq!(s.chain(&inst, t).len(), 1);
        let e = elem(&inst, "E1");
        let s2 = s.apply_action(&inst, t, e).unwrap();
        let chain = s2.chain(&inst, t);
        assert_eq!(chain.len(), 1);
        assert_eq!(inst.infrastructure.route(chain[0]).name, "E1");
        // Parallel semantics keep the tail in the snapshot.
        let (snap, s3) = s.apply_step(&inst, &[(t, e)]).unwrap();
        assert_eq!(snap.iter().filter(|o| **o == Some(t)).count(), 2);
        assert_eq!(s3, s2);
    }

    #[test]
    fn conflicting_allocation_is_illegal() {
        let inst = generator::example1_corridor();
        let s = SimState::initial(&inst);
        let t1 = inst.train_by_name("t1").unwrap();
        let t2 = inst.train_by_name("t2").unwrap();
        let s = s.apply_action(&inst, t1, elem(&inst, "E4")).unwrap();
        assert!(matches!(
            s.apply_action(&inst, t2, elem(&inst, "W4")),
            Err(DynamicsError::IllegalAction { .. })
        ));
    }

    #[test]
    fn boundary_route_is_released_and_train_exits() {
        let inst = generator::corridor(2, Some(0.5), None).unwrap();
        let s = SimState::initial(&inst);
        let t = TrainIdx(0);
        let acts = s.legal_actions(&inst);
        assert_eq!(acts.len(), 1);
        let s2 = s.apply_action(&inst, acts[0].0, acts[0].1).unwrap();
        assert!(s2.is_finished(t));
        assert!(!s2.is_present(t));
        assert!(s2.occupancy().iter().all(|o| o.is_none()));
    }

    #[test]
    fn state_doc_lists_sorted_names() {
        let inst = generator::example1_corridor();
        let doc = SimState::initial(&inst).to_doc(&inst);
        assert_eq!(doc.present, ["t1", "t2"]);
        assert!(doc.finished.is_empty());
        assert_eq!(doc.occ.len(), 6);
    }
}
