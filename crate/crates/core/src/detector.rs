//! Deadlock detection by incremental bounded model checking.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{replay, SimState};
use crate::encoder::{EncoderConfig, EncodingSession};
use crate::model::{ElemIdx, ProblemInstance, RouteIdx, TrainIdx};
use crate::sat::{BackendKind, Model, SatBackend, SolveResult};

/// The three detection strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Algorithm {
    /// Unroll up to a precomputed bound on the plan length.
    UpperBound = 1,
    /// Every transition must allocate something.
    Progress = 2,
    /// Additionally, allocations must happen as early as possible.
    MaximalProgress = 3,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::UpperBound,
        Algorithm::Progress,
        Algorithm::MaximalProgress,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    fn config(self) -> EncoderConfig {
        EncoderConfig {
            progress: self != Algorithm::UpperBound,
            maximal_progress: self == Algorithm::MaximalProgress,
        }
    }
}

impl From<Algorithm> for u8 {
    fn from(a: Algorithm) -> u8 {
        a.number()
    }
}

impl TryFrom<u8> for Algorithm {
    type Error = String;
    fn try_from(n: u8) -> Result<Self, String> {
        match n {
            1 => Ok(Algorithm::UpperBound),
            2 => Ok(Algorithm::Progress),
            3 => Ok(Algorithm::MaximalProgress),
            _ => Err(format!("unknown algorithm {n}, expected 1, 2 or 3")),
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| format!("unknown algorithm '{s}', expected 1, 2 or 3"))?;
        Algorithm::try_from(n)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Live,
    Dead,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Live => "LIVE",
            Status::Dead => "DEAD",
            Status::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedAction {
    /// Transition index, starting at 1.
    pub step: usize,
    pub train: TrainIdx,
    pub elementary: ElemIdx,
}

/// A witness plan: the actions of every transition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<Vec<PlannedAction>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanActionDoc {
    pub train: String,
    pub route: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub steps: Vec<Vec<PlanActionDoc>>,
}

/// Node of the plan's partial order. `step == 0` marks a train's initial
/// position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderNode {
    pub train: String,
    pub route: String,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialOrder {
    pub nodes: Vec<OrderNode>,
    /// Edges `(before, after)` as node indices, transitively reduced.
    pub edges: Vec<(usize, usize)>,
}

impl Plan {
    /// Actions in execution order.
    pub fn sequential(&self) -> Vec<(TrainIdx, ElemIdx)> {
        self.steps
            .iter()
            .flatten()
            .map(|a| (a.train, a.elementary))
            .collect()
    }

    pub fn num_actions(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    pub fn to_doc(&self, inst: &ProblemInstance) -> PlanDoc {
        PlanDoc {
            steps: self
                .steps
                .iter()
                .map(|step| {
                    step.iter()
                        .map(|a| PlanActionDoc {
                            train: inst.train(a.train).name.clone(),
                            route: inst.infrastructure.elementary(a.elementary).name.clone(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Dependencies between actions: a train's own actions are ordered, and
    /// an action that uses a resource conflicting with an earlier action of
    /// another train (or that train's initial position) comes after it.
    pub fn partial_order(&self, inst: &ProblemInstance) -> PartialOrder {
        let infra = &inst.infrastructure;
        struct Node {
            train: TrainIdx,
            step: usize,
            routes: Vec<RouteIdx>,
            label: String,
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut last_of_train: HashMap<TrainIdx, usize> = HashMap::new();
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for t in inst.train_indices() {
            let spec = inst.train(t);
            let head_elem = infra.route(spec.head()).elementary;
            last_of_train.insert(t, nodes.len());
            nodes.push(Node {
                train: t,
                step: 0,
                routes: spec.initial.clone(),
                label: infra.elementary(head_elem).name.clone(),
            });
        }
        for a in self.steps.iter().flatten() {
            let idx = nodes.len();
            nodes.push(Node {
                train: a.train,
                step: a.step,
                routes: infra.elementary(a.elementary).parts.clone(),
                label: infra.elementary(a.elementary).name.clone(),
            });
            if let Some(prev) = last_of_train.insert(a.train, idx) {
                edges.insert((prev, idx));
            }
        }
        let clash = |x: &Node, y: &Node| {
            x.routes.iter().any(|r| {
                y.routes
                    .iter()
                    .any(|s| r == s || infra.conflicts(*r, *s))
            })
        };
        for (i, x) in nodes.iter().enumerate() {
            for (j, y) in nodes.iter().enumerate() {
                if x.train != y.train && x.step < y.step && clash(x, y) {
                    edges.insert((i, j));
                }
            }
        }
        let reduced = transitive_reduction(nodes.len(), &edges);
        PartialOrder {
            nodes: nodes
                .iter()
                .map(|n| OrderNode {
                    train: inst.train(n.train).name.clone(),
                    route: n.label.clone(),
                    step: n.step,
                })
                .collect(),
            edges: reduced,
        }
    }
}

/// `(train, route)` label of a partial-order node.
pub type NodeLabel = (String, String);

impl PartialOrder {
    /// Node labels and edges by label, independent of step numbers and node
    /// order. Two plans induce the same order iff these are equal.
    pub fn relation(&self) -> (BTreeSet<NodeLabel>, BTreeSet<(NodeLabel, NodeLabel)>) {
        let label = |i: usize| (self.nodes[i].train.clone(), self.nodes[i].route.clone());
        let nodes = (0..self.nodes.len()).map(label).collect();
        let edges = self.edges.iter().map(|(a, b)| (label(*a), label(*b))).collect();
        (nodes, edges)
    }

    pub fn cross_edges(&self) -> usize {
        self.edges
            .iter()
            .filter(|(a, b)| self.nodes[*a].train != self.nodes[*b].train)
            .count()
    }
}

impl Plan {
    /// Builds a plan from `(train, elementary route)` names per step.
    pub fn from_names(inst: &ProblemInstance, steps: &[&[(&str, &str)]]) -> Option<Plan> {
        let infra = &inst.infrastructure;
        let mut plan = Plan::default();
        for (k, actions) in steps.iter().enumerate() {
            let mut out = Vec::new();
            for (t, e) in actions.iter() {
                out.push(PlannedAction {
                    step: k + 1,
                    train: inst.train_by_name(t)?,
                    elementary: infra.elementary_by_name(e)?,
                });
            }
            plan.steps.push(out);
        }
        Some(plan)
    }
}

/// Keeps an edge only if its target is not reachable through another path.
fn transitive_reduction(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut succ = vec![Vec::new(); n];
    for (a, b) in edges {
        succ[*a].push(*b);
    }
    let reach_without = |from: usize, to: usize| -> bool {
        let mut stack: Vec<usize> = succ[from].iter().copied().filter(|s| *s != to).collect();
        let mut seen = vec![false; n];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if seen[v] {
                continue;
            }
            seen[v] = true;
            stack.extend(succ[v].iter().copied());
        }
        false
    };
    edges
        .iter()
        .copied()
        .filter(|(a, b)| !reach_without(*a, *b))
        .collect()
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub status: Status,
    /// Transitions in the formula when the verdict was reached.
    pub steps_used: usize,
    pub plan: Option<Plan>,
    pub elapsed: Duration,
    pub algorithm: Algorithm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictDoc {
    pub status: Status,
    pub steps: usize,
    pub time_s: f64,
    pub algorithm: Algorithm,
}

impl Verdict {
    pub fn to_doc(&self) -> VerdictDoc {
        VerdictDoc {
            status: self.status,
            steps: self.steps_used,
            time_s: self.elapsed.as_secs_f64(),
            algorithm: self.algorithm,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DetectOptions {
    pub algorithm: Algorithm,
    /// Wall-clock budget for the whole call.
    pub timeout: Option<Duration>,
    /// Give up with UNKNOWN instead of adding more transitions than this.
    pub step_cap: Option<usize>,
    pub backend: BackendKind,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            algorithm: Algorithm::MaximalProgress,
            timeout: None,
            step_cap: None,
            backend: BackendKind::from_env(),
        }
    }
}

impl DetectOptions {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        DetectOptions {
            algorithm,
            ..Default::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

/// Upper bound on the number of single actions any successful plan needs:
/// the sum over trains of the longest route path, counted in elementary
/// routes, from the train's head to one of its final routes.
pub fn upper_bound(inst: &ProblemInstance) -> usize {
    inst.train_indices()
        .map(|t| train_bound(inst, t).unwrap_or(0))
        .sum()
}

/// Longest path for one train; `None` if no final route is reachable.
pub fn train_bound(inst: &ProblemInstance, t: TrainIdx) -> Option<usize> {
    let infra = &inst.infrastructure;
    let spec = inst.train(t);
    if spec.starts_finished() {
        return Some(0);
    }
    let finals: BTreeSet<RouteIdx> = spec.final_routes.iter().copied().collect();
    // Longest number of elementary-route changes from r to a final route.
    let mut memo: HashMap<RouteIdx, Option<usize>> = HashMap::new();
    for r in infra.topological_order().iter().rev() {
        let mut best = finals.contains(r).then_some(0);
        for b in infra.next_routes(*r) {
            if let Some(d) = memo[b] {
                let w = usize::from(infra.route(*b).elementary != infra.route(*r).elementary);
                best = Some(best.map_or(d + w, |x: usize| x.max(d + w)));
            }
        }
        memo.insert(*r, best);
    }
    let head = spec.head();
    let head_elem = infra.elementary(infra.route(head).elementary);
    let partial = head_elem.parts.last() != Some(&head);
    memo[&head].map(|d| d + usize::from(partial))
}

struct Run<'a> {
    inst: &'a ProblemInstance,
    session: EncodingSession<'a>,
    solver: Box<dyn SatBackend>,
    deadline: Option<Instant>,
}

impl<'a> Run<'a> {
    fn new(inst: &'a ProblemInstance, config: EncoderConfig, opts: &DetectOptions, start: Instant) -> Self {
        Run {
            inst,
            session: EncodingSession::new(inst, config),
            solver: opts.backend.create(),
            deadline: opts.timeout.map(|d| start + d),
        }
    }

    fn extend(&mut self) -> usize {
        let i = self.session.extend_step();
        for c in self.session.take_new_clauses() {
            self.solver.add_clause(c);
        }
        i
    }

    fn solve(&mut self, goal_at: Option<usize>) -> SolveResult {
        if self.session.is_trivially_unsat() {
            return SolveResult::Unsat;
        }
        let assumptions = goal_at
            .map(|i| self.session.goal_assumptions(i))
            .unwrap_or_default();
        self.solver.solve_under(&assumptions, self.deadline)
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Decodes and validates the plan in `model` for steps `1..=i`.
    fn plan(&self, model: &Model, i: usize) -> Result<Plan, DetectError> {
        let inst = self.inst;
        let infra = &inst.infrastructure;
        let order: HashMap<RouteIdx, usize> = infra
            .topological_order()
            .iter()
            .enumerate()
            .map(|(k, r)| (*r, k))
            .collect();
        let mut trains: Vec<TrainIdx> = inst.train_indices().collect();
        trains.sort_by(|a, b| inst.train(*a).name.cmp(&inst.train(*b).name));

        let mut plan = Plan::default();
        let mut state = SimState::initial(inst);
        let mut prev = self.session.decode_occupancy(model, 0);
        for step in 1..=i {
            let cur = self.session.decode_occupancy(model, step);
            let mut actions = Vec::new();
            for t in &trains {
                let mut new_routes: Vec<RouteIdx> = infra
                    .route_indices()
                    .filter(|r| cur[r.index()] == Some(*t) && prev[r.index()] != Some(*t))
                    .collect();
                new_routes.sort_by_key(|r| order[r]);
                let mut elems: Vec<ElemIdx> = Vec::new();
                for r in new_routes {
                    let e = infra.route(r).elementary;
                    if !elems.contains(&e) {
                        elems.push(e);
                    }
                }
                actions.extend(elems.into_iter().map(|e| PlannedAction {
                    step,
                    train: *t,
                    elementary: e,
                }));
            }
            let pairs: Vec<(TrainIdx, ElemIdx)> =
                actions.iter().map(|a| (a.train, a.elementary)).collect();
            let (snapshot, next) = state.apply_step(inst, &pairs).map_err(|e| {
                DetectError::InternalInconsistency(format!("step {step} does not execute: {e}"))
            })?;
            if snapshot != cur {
                return Err(DetectError::InternalInconsistency(format!(
                    "occupancy after step {step} differs from the simulated one"
                )));
            }
            state = next;
            prev = cur;
            plan.steps.push(actions);
        }
        replay(inst, &plan.sequential()).map_err(|e| {
            DetectError::InternalInconsistency(format!("plan does not replay: {e}"))
        })?;
        Ok(plan)
    }
}

/// CNF of `steps` transitions for `algorithm` in DIMACS format, without the
/// goal. The goal literals of the last step are listed in a `c goal` line.
pub fn dimacs_for_steps(inst: &ProblemInstance, algorithm: Algorithm, steps: usize) -> String {
    let mut session = EncodingSession::new(inst, algorithm.config());
    for _ in 0..steps {
        session.extend_step();
    }
    let goal: Vec<String> = session
        .goal_assumptions(session.num_steps())
        .iter()
        .map(|l| l.to_dimacs().to_string())
        .collect();
    format!("c goal {}\n{}", goal.join(" "), session.to_dimacs())
}

/// Decides whether every train can reach one of its final routes.
pub fn detect(inst: &ProblemInstance, opts: &DetectOptions) -> Result<Verdict, DetectError> {
    let start = Instant::now();
    let algorithm = opts.algorithm;
    let verdict = |status, steps_used, plan| Verdict {
        status,
        steps_used,
        plan,
        elapsed: start.elapsed(),
        algorithm,
    };

    if inst.trains.iter().all(|t| t.starts_finished()) {
        let mut run = Run::new(inst, Algorithm::UpperBound.config(), opts, start);
        run.extend();
        return match run.solve(Some(1)) {
            SolveResult::Sat(model) => Ok(verdict(Status::Live, 1, Some(run.plan(&model, 1)?))),
            SolveResult::TimedOut => Ok(verdict(Status::Unknown, 1, None)),
            SolveResult::Unsat => Err(DetectError::InternalInconsistency(
                "trains that start finished cannot stay finished".into(),
            )),
        };
    }

    let bound = upper_bound(inst);
    let mut run = Run::new(inst, algorithm.config(), opts, start);
    match algorithm {
        Algorithm::UpperBound => {
            let limit = opts.step_cap.map_or(bound, |c| c.min(bound));
            for i in 1..=limit {
                if run.expired() {
                    return Ok(verdict(Status::Unknown, i - 1, None));
                }
                run.extend();
                match run.solve(Some(i)) {
                    SolveResult::Sat(model) => {
                        return Ok(verdict(Status::Live, i, Some(run.plan(&model, i)?)))
                    }
                    SolveResult::TimedOut => return Ok(verdict(Status::Unknown, i, None)),
                    SolveResult::Unsat => log::debug!("step {i}: goal unreachable"),
                }
            }
            if limit < bound {
                Ok(verdict(Status::Unknown, limit, None))
            } else {
                Ok(verdict(Status::Dead, bound, None))
            }
        }
        Algorithm::Progress | Algorithm::MaximalProgress => {
            let mut i = 0;
            loop {
                if opts.step_cap.is_some_and(|c| i >= c) {
                    return Ok(verdict(Status::Unknown, i, None));
                }
                if i > bound {
                    return Err(DetectError::InternalInconsistency(format!(
                        "progress still possible after {i} steps, above the bound {bound}"
                    )));
                }
                if run.expired() {
                    return Ok(verdict(Status::Unknown, i, None));
                }
                i = run.extend();
                match run.solve(Some(i)) {
                    SolveResult::Sat(model) => {
                        return Ok(verdict(Status::Live, i, Some(run.plan(&model, i)?)))
                    }
                    SolveResult::TimedOut => return Ok(verdict(Status::Unknown, i, None)),
                    SolveResult::Unsat => {}
                }
                match run.solve(None) {
                    SolveResult::Unsat => return Ok(verdict(Status::Dead, i, None)),
                    SolveResult::TimedOut => return Ok(verdict(Status::Unknown, i, None)),
                    SolveResult::Sat(_) => log::debug!("step {i}: progress still possible"),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator;

    fn run(inst: &ProblemInstance, algorithm: Algorithm) -> Verdict {
        let opts = DetectOptions {
            backend: BackendKind::Cdcl,
            ..DetectOptions::with_algorithm(algorithm)
        };
        detect(inst, &opts).unwrap()
    }

    #[test]
    fn algorithm_parsing() {
        assert_eq!("2".parse::<Algorithm>().unwrap(), Algorithm::Progress);
        assert!("4".parse::<Algorithm>().is_err());
        assert_eq!(serde_json::to_string(&Algorithm::MaximalProgress).unwrap(), "3");
    }

    #[test]
    fn corridor_bounds() {
        assert_eq!(upper_bound(&generator::example1_corridor()), 10);
        assert_eq!(upper_bound(&generator::example2_corridor()), 16);
        assert_eq!(upper_bound(&generator::parked_train()), 0);
    }

    #[test]
    fn example_one_dead_with_every_algorithm() {
        let inst = generator::example1_corridor();
        for a in Algorithm::ALL {
            let v = run(&inst, a);
            assert_eq!(v.status, Status::Dead, "algorithm {a}");
        }
        assert_eq!(run(&inst, Algorithm::UpperBound).steps_used, 10);
        assert_eq!(run(&inst, Algorithm::Progress).steps_used, 2);
    }

    #[test]
    fn parked_and_empty_are_live_at_first_step() {
        for inst in [generator::parked_train(), generator::empty_instance()] {
            for a in Algorithm::ALL {
                let v = run(&inst, a);
                assert_eq!((v.status, v.steps_used), (Status::Live, 1));
            }
        }
    }

    #[test]
    fn live_plan_replays() {
        let inst = generator::junction();
        let v = run(&inst, Algorithm::MaximalProgress);
        assert_eq!(v.status, Status::Live);
        let plan = v.plan.unwrap();
        assert!(replay(&inst, &plan.sequential()).is_ok());
    }

    #[test]
    fn step_cap_gives_unknown() {
        let inst = generator::example2_corridor();
        let opts = DetectOptions {
            step_cap: Some(3),
            backend: BackendKind::Cdcl,
            ..DetectOptions::with_algorithm(Algorithm::Progress)
        };
        let v = detect(&inst, &opts).unwrap();
        assert_eq!((v.status, v.steps_used), (Status::Unknown, 3));
    }

    #[test]
    fn zero_timeout_gives_unknown() {
        let inst = generator::example2_corridor();
        let opts = DetectOptions {
            timeout: Some(Duration::ZERO),
            backend: BackendKind::Cdcl,
            ..DetectOptions::with_algorithm(Algorithm::Progress)
        };
        assert_eq!(detect(&inst, &opts).unwrap().status, Status::Unknown);
    }

    #[test]
    fn reduction_drops_implied_edges() {
        let edges: BTreeSet<_> = [(0, 1), (1, 2), (0, 2)].into_iter().collect();
        assert_eq!(transitive_reduction(3, &edges), vec![(0, 1), (1, 2)]);
    }
}
