//! Problem data model: infrastructure, trains and the instance file format.
//!
//! Instances are parsed from a JSON document, validated once, and then kept
//! immutable. Every id in the document is resolved to a dense index so the
//! encoder, the simulator and the oracle can use plain vectors.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! index_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                $name(i as u32)
            }
        }
    };
}

index_type!(
    /// Index of a partial route.
    RouteIdx
);
index_type!(
    /// Index of a route delimiter (signal or detector).
    DelimIdx
);
index_type!(
    /// Index of an elementary route.
    ElemIdx
);
index_type!(
    /// Index of a train.
    TrainIdx
);

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("malformed instance: {0}")]
    MalformedSyntax(String),
    #[error("unknown {kind} '{id}'")]
    UnknownReference { kind: &'static str, id: String },
    #[error("route graph is cyclic (cycle through partial route '{0}')")]
    CyclicRouteGraph(String),
    #[error("initial routes of train '{0}' do not form one contiguous path")]
    NoncontiguousInitialPosition(String),
    #[error("initial positions of trains '{0}' and '{1}' overlap or conflict")]
    ConflictingInitialPositions(String, String),
    #[error("duplicate {kind} id '{id}'")]
    DuplicateId { kind: &'static str, id: String },
    #[error("invalid data: {0}")]
    InvalidData(String),
}

/// Non-fatal findings from validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    /// A final alternative that cannot be reached from the train's position.
    UnreachableFinal { train: String, route: String },
    /// The train can leave the model through a boundary route that is not
    /// one of its final routes. Leaving there means it can never finish.
    ExitWithoutFinal { train: String, route: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::UnreachableFinal { train, route } => {
                write!(f, "train '{train}': final route '{route}' is unreachable")
            }
            Warning::ExitWithoutFinal { train, route } => write!(
                f,
                "train '{train}': can exit through '{route}' which is not a final route"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delimiter {
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialRoute {
    pub name: String,
    pub length: f64,
    pub entry: Option<DelimIdx>,
    pub exit: Option<DelimIdx>,
    pub elementary: ElemIdx,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementaryRoute {
    pub name: String,
    /// Parts in travel order.
    pub parts: Vec<RouteIdx>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Infrastructure {
    delimiters: Vec<Delimiter>,
    routes: Vec<PartialRoute>,
    elementary: Vec<ElementaryRoute>,
    /// Sorted, symmetric adjacency lists.
    conflicts: Vec<Vec<RouteIdx>>,
    /// Routes whose entry is the given delimiter.
    outgoing: Vec<Vec<RouteIdx>>,
    /// Routes whose exit is the given delimiter.
    incoming: Vec<Vec<RouteIdx>>,
    topo_order: Vec<RouteIdx>,
    route_by_name: HashMap<String, RouteIdx>,
    delim_by_name: HashMap<String, DelimIdx>,
    elem_by_name: HashMap<String, ElemIdx>,
}

impl Infrastructure {
    pub fn delimiters(&self) -> &[Delimiter] {
        &self.delimiters
    }

    pub fn routes(&self) -> &[PartialRoute] {
        &self.routes
    }

    pub fn route(&self, r: RouteIdx) -> &PartialRoute {
        &self.routes[r.index()]
    }

    pub fn elementary_routes(&self) -> &[ElementaryRoute] {
        &self.elementary
    }

    pub fn elementary(&self, e: ElemIdx) -> &ElementaryRoute {
        &self.elementary[e.index()]
    }

    pub fn route_indices(&self) -> impl Iterator<Item = RouteIdx> {
        (0..self.routes.len()).map(RouteIdx::from)
    }

    pub fn conflicts_of(&self, r: RouteIdx) -> &[RouteIdx] {
        &self.conflicts[r.index()]
    }

    pub fn conflicts(&self, a: RouteIdx, b: RouteIdx) -> bool {
        self.conflicts[a.index()].binary_search(&b).is_ok()
    }

    /// Each conflicting pair once, lower index first.
    pub fn conflict_pairs(&self) -> impl Iterator<Item = (RouteIdx, RouteIdx)> + '_ {
        self.conflicts.iter().enumerate().flat_map(|(a, list)| {
            let a = RouteIdx::from(a);
            list.iter().filter(move |b| a < **b).map(move |b| (a, *b))
        })
    }

    /// Partial routes entered from delimiter `d`.
    pub fn successors(&self, d: DelimIdx) -> &[RouteIdx] {
        &self.outgoing[d.index()]
    }

    /// Partial routes that continue from the exit of `r`.
    pub fn next_routes(&self, r: RouteIdx) -> &[RouteIdx] {
        match self.routes[r.index()].exit {
            Some(d) => &self.outgoing[d.index()],
            None => &[],
        }
    }

    /// Partial routes that lead into the entry of `r`.
    pub fn previous_routes(&self, r: RouteIdx) -> &[RouteIdx] {
        match self.routes[r.index()].entry {
            Some(d) => &self.incoming[d.index()],
            None => &[],
        }
    }

    /// Routes in a topological order of the route graph.
    pub fn topological_order(&self) -> &[RouteIdx] {
        &self.topo_order
    }

    pub fn route_by_name(&self, name: &str) -> Option<RouteIdx> {
        self.route_by_name.get(name).copied()
    }

    pub fn delimiter_by_name(&self, name: &str) -> Option<DelimIdx> {
        self.delim_by_name.get(name).copied()
    }

    pub fn elementary_by_name(&self, name: &str) -> Option<ElemIdx> {
        self.elem_by_name.get(name).copied()
    }

    /// Position of `r` within its elementary route.
    pub fn part_index(&self, r: RouteIdx) -> usize {
        let e = self.routes[r.index()].elementary;
        self.elementary[e.index()]
            .parts
            .iter()
            .position(|p| *p == r)
            .expect("route belongs to its elementary route")
    }

    /// All routes reachable from the exit of `from` (not including `from`).
    pub fn reachable_from(&self, from: RouteIdx) -> BTreeSet<RouteIdx> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<RouteIdx> = self.next_routes(from).iter().copied().collect();
        while let Some(r) = queue.pop_front() {
            if seen.insert(r) {
                queue.extend(self.next_routes(r).iter().copied());
            }
        }
        seen
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSpec {
    pub name: String,
    pub length: f64,
    /// Initial routes as a chain, tail first.
    pub initial: Vec<RouteIdx>,
    pub final_routes: Vec<RouteIdx>,
}

impl TrainSpec {
    pub fn head(&self) -> RouteIdx {
        *self.initial.last().expect("validated: initial is nonempty")
    }

    pub fn starts_finished(&self) -> bool {
        self.initial.iter().any(|r| self.final_routes.contains(r))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub infrastructure: Infrastructure,
    pub trains: Vec<TrainSpec>,
}

impl ProblemInstance {
    pub fn train(&self, t: TrainIdx) -> &TrainSpec {
        &self.trains[t.index()]
    }

    pub fn train_indices(&self) -> impl Iterator<Item = TrainIdx> {
        (0..self.trains.len()).map(TrainIdx::from)
    }

    pub fn train_by_name(&self, name: &str) -> Option<TrainIdx> {
        self.trains
            .iter()
            .position(|t| t.name == name)
            .map(TrainIdx::from)
    }

    /// Routes with entry at delimiter `d`, looked up by delimiter id.
    pub fn successors(&self, delimiter: &str) -> Result<Vec<RouteIdx>, ModelError> {
        let d = self
            .infrastructure
            .delimiter_by_name(delimiter)
            .ok_or_else(|| ModelError::UnknownReference {
                kind: "delimiter",
                id: delimiter.to_string(),
            })?;
        Ok(self.infrastructure.successors(d).to_vec())
    }

    pub fn warnings(&self) -> Vec<Warning> {
        let infra = &self.infrastructure;
        let mut out = Vec::new();
        for t in &self.trains {
            let mut reach = infra.reachable_from(t.head());
            reach.extend(t.initial.iter().copied());
            for f in &t.final_routes {
                if !reach.contains(f) {
                    out.push(Warning::UnreachableFinal {
                        train: t.name.clone(),
                        route: infra.route(*f).name.clone(),
                    });
                }
            }
            for r in &reach {
                if infra.route(*r).exit.is_none() && !t.final_routes.contains(r) {
                    out.push(Warning::ExitWithoutFinal {
                        train: t.name.clone(),
                        route: infra.route(*r).name.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn from_doc(doc: &InstanceDoc) -> Result<Self, ModelError> {
        build(doc)
    }

    pub fn to_doc(&self) -> InstanceDoc {
        let infra = &self.infrastructure;
        let dname = |d: Option<DelimIdx>| d.map(|d| infra.delimiters[d.index()].name.clone());
        let rname = |r: &RouteIdx| infra.route(*r).name.clone();
        InstanceDoc {
            infrastructure: InfrastructureDoc {
                delimiters: infra.delimiters.iter().map(|d| d.name.clone()).collect(),
                partial_routes: infra
                    .routes
                    .iter()
                    .map(|r| PartialRouteDoc {
                        id: r.name.clone(),
                        length: r.length,
                        entry: dname(r.entry),
                        exit: dname(r.exit),
                    })
                    .collect(),
                elementary_routes: infra
                    .elementary
                    .iter()
                    .map(|e| ElementaryRouteDoc {
                        id: e.name.clone(),
                        parts: e.parts.iter().map(rname).collect(),
                    })
                    .collect(),
                conflicts: infra
                    .conflict_pairs()
                    .map(|(a, b)| [rname(&a), rname(&b)])
                    .collect(),
            },
            trains: self
                .trains
                .iter()
                .map(|t| TrainDoc {
                    id: t.name.clone(),
                    length: t.length,
                    initial: t.initial.iter().map(rname).collect(),
                    final_routes: t.final_routes.iter().map(rname).collect(),
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub infrastructure: InfrastructureDoc,
    pub trains: Vec<TrainDoc>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfrastructureDoc {
    pub delimiters: Vec<String>,
    pub partial_routes: Vec<PartialRouteDoc>,
    pub elementary_routes: Vec<ElementaryRouteDoc>,
    #[serde(default)]
    pub conflicts: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialRouteDoc {
    pub id: String,
    pub length: f64,
    pub entry: Option<String>,
    pub exit: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementaryRouteDoc {
    pub id: String,
    pub parts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDoc {
    pub id: String,
    pub length: f64,
    pub initial: Vec<String>,
    #[serde(rename = "final")]
    pub final_routes: Vec<String>,
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance, ModelError> {
    let doc: InstanceDoc =
        serde_json::from_str(text).map_err(|e| ModelError::MalformedSyntax(e.to_string()))?;
    build(&doc)
}

pub fn serialize_instance(inst: &ProblemInstance) -> String {
    serde_json::to_string_pretty(&inst.to_doc()).expect("instance document serializes")
}

fn build(doc: &InstanceDoc) -> Result<ProblemInstance, ModelError> {
    let idoc = &doc.infrastructure;

    let mut delim_by_name = HashMap::new();
    let mut delimiters = Vec::with_capacity(idoc.delimiters.len());
    for name in &idoc.delimiters {
        if delim_by_name
            .insert(name.clone(), DelimIdx::from(delimiters.len()))
            .is_some()
        {
            return Err(ModelError::DuplicateId {
                kind: "delimiter",
                id: name.clone(),
            });
        }
        delimiters.push(Delimiter { name: name.clone() });
    }

    let lookup_delim = |name: &Option<String>| -> Result<Option<DelimIdx>, ModelError> {
        match name {
            None => Ok(None),
            Some(n) => delim_by_name
                .get(n)
                .copied()
                .map(Some)
                .ok_or_else(|| ModelError::UnknownReference {
                    kind: "delimiter",
                    id: n.clone(),
                }),
        }
    };

    let mut route_by_name = HashMap::new();
    let mut routes = Vec::with_capacity(idoc.partial_routes.len());
    for r in &idoc.partial_routes {
        if route_by_name
            .insert(r.id.clone(), RouteIdx::from(routes.len()))
            .is_some()
        {
            return Err(ModelError::DuplicateId {
                kind: "partial route",
                id: r.id.clone(),
            });
        }
        if !(r.length >= 0.0) || !r.length.is_finite() {
            return Err(ModelError::InvalidData(format!(
                "partial route '{}' has invalid length {}",
                r.id, r.length
            )));
        }
        let entry = lookup_delim(&r.entry)?;
        let exit = lookup_delim(&r.exit)?;
        if entry.is_none() && exit.is_none() {
            return Err(ModelError::InvalidData(format!(
                "partial route '{}' has neither entry nor exit",
                r.id
            )));
        }
        if entry.is_some() && entry == exit {
            return Err(ModelError::CyclicRouteGraph(r.id.clone()));
        }
        routes.push(PartialRoute {
            name: r.id.clone(),
            length: r.length,
            entry,
            exit,
            elementary: ElemIdx(u32::MAX),
        });
    }

    let lookup_route = |name: &String| -> Result<RouteIdx, ModelError> {
        route_by_name
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownReference {
                kind: "partial route",
                id: name.clone(),
            })
    };

    let mut elem_by_name = HashMap::new();
    let mut elementary = Vec::with_capacity(idoc.elementary_routes.len());
    for e in &idoc.elementary_routes {
        let idx = ElemIdx::from(elementary.len());
        if elem_by_name.insert(e.id.clone(), idx).is_some() {
            return Err(ModelError::DuplicateId {
                kind: "elementary route",
                id: e.id.clone(),
            });
        }
        if e.parts.is_empty() {
            return Err(ModelError::InvalidData(format!(
                "elementary route '{}' has no parts",
                e.id
            )));
        }
        let parts = e.parts.iter().map(lookup_route).collect::<Result<Vec<_>, _>>()?;
        for w in parts.windows(2) {
            let (a, b) = (&routes[w[0].index()], &routes[w[1].index()]);
            if a.exit.is_none() || a.exit != b.entry {
                return Err(ModelError::InvalidData(format!(
                    "elementary route '{}': parts '{}' and '{}' are not connected",
                    e.id, a.name, b.name
                )));
            }
        }
        for p in &parts {
            let r = &mut routes[p.index()];
            if r.elementary.0 != u32::MAX {
                return Err(ModelError::InvalidData(format!(
                    "partial route '{}' belongs to more than one elementary route",
                    r.name
                )));
            }
            r.elementary = idx;
        }
        elementary.push(ElementaryRoute {
            name: e.id.clone(),
            parts,
        });
    }
    if let Some(r) = routes.iter().find(|r| r.elementary.0 == u32::MAX) {
        return Err(ModelError::InvalidData(format!(
            "partial route '{}' belongs to no elementary route",
            r.name
        )));
    }

    let mut conflicts = vec![Vec::new(); routes.len()];
    for [a, b] in &idoc.conflicts {
        let (a, b) = (lookup_route(a)?, lookup_route(b)?);
        if a == b {
            return Err(ModelError::InvalidData(format!(
                "reflexive conflict on '{}'",
                routes[a.index()].name
            )));
        }
        conflicts[a.index()].push(b);
        conflicts[b.index()].push(a);
    }
    for list in &mut conflicts {
        list.sort_unstable();
        list.dedup();
    }

    let mut outgoing = vec![Vec::new(); delimiters.len()];
    let mut incoming = vec![Vec::new(); delimiters.len()];
    for (i, r) in routes.iter().enumerate() {
        if let Some(d) = r.entry {
            outgoing[d.index()].push(RouteIdx::from(i));
        }
        if let Some(d) = r.exit {
            incoming[d.index()].push(RouteIdx::from(i));
        }
    }

    let topo_order = topological_sort(&routes, &outgoing)?;

    let infrastructure = Infrastructure {
        delimiters,
        routes,
        elementary,
        conflicts,
        outgoing,
        incoming,
        topo_order,
        route_by_name: route_by_name.clone(),
        delim_by_name,
        elem_by_name,
    };

    let mut trains: Vec<TrainSpec> = Vec::with_capacity(doc.trains.len());
    for t in &doc.trains {
        if trains.iter().any(|o| o.name == t.id) {
            return Err(ModelError::DuplicateId {
                kind: "train",
                id: t.id.clone(),
            });
        }
        if !(t.length > 0.0) || !t.length.is_finite() {
            return Err(ModelError::InvalidData(format!(
                "train '{}' has invalid length {}",
                t.id, t.length
            )));
        }
        if t.initial.is_empty() {
            return Err(ModelError::NoncontiguousInitialPosition(t.id.clone()));
        }
        if t.final_routes.is_empty() {
            return Err(ModelError::InvalidData(format!(
                "train '{}' has no final routes",
                t.id
            )));
        }
        let initial = t.initial.iter().map(lookup_route).collect::<Result<Vec<_>, _>>()?;
        let initial = order_chain(&infrastructure, &initial)
            .ok_or_else(|| ModelError::NoncontiguousInitialPosition(t.id.clone()))?;
        let mut final_routes = Vec::new();
        for f in &t.final_routes {
            let f = lookup_route(f)?;
            if !final_routes.contains(&f) {
                final_routes.push(f);
            }
        }
        trains.push(TrainSpec {
            name: t.id.clone(),
            length: t.length,
            initial,
            final_routes,
        });
    }

    for (i, a) in trains.iter().enumerate() {
        for b in &trains[i..] {
            let same = std::ptr::eq(a, b);
            for (k, ra) in a.initial.iter().enumerate() {
                for (l, rb) in b.initial.iter().enumerate() {
                    if same && k >= l {
                        continue;
                    }
                    if ra == rb || infrastructure.conflicts(*ra, *rb) {
                        return Err(ModelError::ConflictingInitialPositions(
                            a.name.clone(),
                            b.name.clone(),
                        ));
                    }
                }
            }
        }
    }

    Ok(ProblemInstance {
        infrastructure,
        trains,
    })
}

fn topological_sort(
    routes: &[PartialRoute],
    outgoing: &[Vec<RouteIdx>],
) -> Result<Vec<RouteIdx>, ModelError> {
    let succ = |r: &PartialRoute| -> &[RouteIdx] {
        match r.exit {
            Some(d) => &outgoing[d.index()],
            None => &[],
        }
    };
    let mut indegree = vec![0usize; routes.len()];
    for r in routes {
        for s in succ(r) {
            indegree[s.index()] += 1;
        }
    }
    let mut queue: VecDeque<RouteIdx> = (0..routes.len())
        .filter(|i| indegree[*i] == 0)
        .map(RouteIdx::from)
        .collect();
    let mut order = Vec::with_capacity(routes.len());
    while let Some(r) = queue.pop_front() {
        order.push(r);
        for s in succ(&routes[r.index()]) {
            indegree[s.index()] -= 1;
            if indegree[s.index()] == 0 {
                queue.push_back(*s);
            }
        }
    }
    if order.len() < routes.len() {
        let stuck = (0..routes.len())
            .find(|i| indegree[*i] > 0)
            .expect("some route remains on a cycle");
        return Err(ModelError::CyclicRouteGraph(routes[stuck].name.clone()));
    }
    Ok(order)
}

/// Orders a set of routes into a single chain, tail first.
fn order_chain(infra: &Infrastructure, set: &[RouteIdx]) -> Option<Vec<RouteIdx>> {
    let mut routes: Vec<RouteIdx> = set.to_vec();
    routes.sort_unstable();
    routes.dedup();
    let follows = |a: RouteIdx, b: RouteIdx| {
        let (ra, rb) = (infra.route(a), infra.route(b));
        ra.exit.is_some() && ra.exit == rb.entry
    };
    let starts: Vec<RouteIdx> = routes
        .iter()
        .copied()
        .filter(|b| !routes.iter().any(|a| follows(*a, *b)))
        .collect();
    if starts.len() != 1 {
        return None;
    }
    let mut chain = vec![starts[0]];
    while chain.len() < routes.len() {
        let cur = *chain.last().unwrap();
        let mut next = routes.iter().copied().filter(|b| follows(cur, *b));
        let n = next.next()?;
        if next.next().is_some() || chain.contains(&n) {
            return None;
        }
        chain.push(n);
    }
    Some(chain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor_doc() -> String {
        r#"{
          "infrastructure": {
            "delimiters": ["d1", "d2", "d3"],
            "partial_routes": [
              {"id": "r1", "length": 1.0, "entry": null, "exit": "d1"},
              {"id": "r2", "length": 1.0, "entry": "d1", "exit": "d2"},
              {"id": "r3", "length": 1.0, "entry": "d2", "exit": "d3"},
              {"id": "r4", "length": 1.0, "entry": "d3", "exit": null}
            ],
            "elementary_routes": [
              {"id": "e1", "parts": ["r1"]},
              {"id": "e2", "parts": ["r2", "r3"]},
              {"id": "e4", "parts": ["r4"]}
            ],
            "conflicts": [["r1", "r4"]]
          },
          "trains": [{"id": "t1", "length": 0.5, "initial": ["r1"], "final": ["r4"]}]
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_symmetrizes_conflicts() {
        let inst = parse_instance(&corridor_doc()).unwrap();
        let infra = &inst.infrastructure;
        let r1 = infra.route_by_name("r1").unwrap();
        let r4 = infra.route_by_name("r4").unwrap();
        assert!(infra.conflicts(r1, r4));
        assert!(infra.conflicts(r4, r1));
        assert_eq!(infra.conflict_pairs().count(), 1);
        assert_eq!(infra.part_index(infra.route_by_name("r3").unwrap()), 1);
    }

    #[test]
    fn unknown_delimiter_is_rejected() {
        let text = corridor_doc().replace(r#""entry": "d1", "exit": "d2""#, r#""entry": "dX", "exit": "d2""#);
        assert_eq!(
            parse_instance(&text).unwrap_err(),
            ModelError::UnknownReference {
                kind: "delimiter",
                id: "dX".into()
            }
        );
    }

    #[test]
    fn two_cycle_is_rejected() {
        let text = r#"{
          "infrastructure": {
            "delimiters": ["a", "b"],
            "partial_routes": [
              {"id": "r1", "length": 1.0, "entry": "a", "exit": "b"},
              {"id": "r2", "length": 1.0, "entry": "b", "exit": "a"}
            ],
            "elementary_routes": [{"id": "e1", "parts": ["r1"]}, {"id": "e2", "parts": ["r2"]}],
            "conflicts": []
          },
          "trains": []
        }"#;
        assert!(matches!(
            parse_instance(text),
            Err(ModelError::CyclicRouteGraph(_))
        ));
    }

    #[test]
    fn malformed_text() {
        assert!(matches!(
            parse_instance("{ not json"),
            Err(ModelError::MalformedSyntax(_))
        ));
    }

    #[test]
    fn reflexive_conflict_and_double_null() {
        let text = corridor_doc().replace(r#"[["r1", "r4"]]"#, r#"[["r2", "r2"]]"#);
        assert!(matches!(parse_instance(&text), Err(ModelError::InvalidData(_))));
        let text = corridor_doc().replace(
            r#"{"id": "r4", "length": 1.0, "entry": "d3", "exit": null}"#,
            r#"{"id": "r4", "length": 1.0, "entry": null, "exit": null}"#,
        );
        assert!(matches!(parse_instance(&text), Err(ModelError::InvalidData(_))));
    }

    #[test]
    fn initial_chain_is_ordered_and_checked() {
        let text = corridor_doc().replace(r#""initial": ["r1"]"#, r#""initial": ["r3", "r2"]"#);
        let inst = parse_instance(&text).unwrap();
        let names: Vec<_> = inst.trains[0]
            .initial
            .iter()
            .map(|r| inst.infrastructure.route(*r).name.as_str())
            .collect();
        assert_eq!(names, ["r2", "r3"]);

        let text = corridor_doc().replace(r#""initial": ["r1"]"#, r#""initial": ["r1", "r3"]"#);
        assert_eq!(
            parse_instance(&text).unwrap_err(),
            ModelError::NoncontiguousInitialPosition("t1".into())
        );
    }

    #[test]
    fn overlapping_trains_are_rejected() {
        let text = corridor_doc().replace(
            r#""trains": [{"id": "t1", "length": 0.5, "initial": ["r1"], "final": ["r4"]}]"#,
            r#""trains": [{"id": "t1", "length": 0.5, "initial": ["r1"], "final": ["r4"]},
                         {"id": "t2", "length": 0.5, "initial": ["r4"], "final": ["r4"]}]"#,
        );
        assert_eq!(
            parse_instance(&text).unwrap_err(),
            ModelError::ConflictingInitialPositions("t1".into(), "t2".into())
        );
    }

    #[test]
    fn successors_lookup() {
        let inst = parse_instance(&corridor_doc()).unwrap();
        let names = |v: Vec<RouteIdx>| -> Vec<String> {
            v.iter()
                .map(|r| inst.infrastructure.route(*r).name.clone())
                .collect()
        };
        assert_eq!(names(inst.successors("d1").unwrap()), ["r2"]);
        assert!(matches!(
            inst.successors("nope"),
            Err(ModelError::UnknownReference { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let inst = parse_instance(&corridor_doc()).unwrap();
        let again = parse_instance(&serialize_instance(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn warns_on_unreachable_final() {
        let text = corridor_doc().replace(r#""final": ["r4"]"#, r#""final": ["r1"]"#);
        let inst = parse_instance(&text).unwrap();
        // r1 is the initial route, so it counts as reachable; r4 is an exit
        // boundary outside the final set.
        assert_eq!(
            inst.warnings(),
            vec![Warning::ExitWithoutFinal {
                train: "t1".into(),
                route: "r4".into()
            }]
        );
    }
}
