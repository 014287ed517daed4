//! Instance families: corridors, station ladders, a junction with a siding,
//! a four-station scenario and seeded random lines.
//!
//! Bidirectional track is modeled as two directed copies of each partial
//! route (suffixes `.e` and `.w`) that conflict with each other. The
//! corridor uses `E<k>`/`W<k>` instead, matching its left/right trains.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    ElementaryRouteDoc, InstanceDoc, ModelError, PartialRouteDoc,
    ProblemInstance, TrainDoc,
};

pub const LADDER_TRAIN_LEN: f64 = 1.8;
pub const LADDER_TRACK_LEN: f64 = 1.0;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Incremental document builder. Delimiters are declared on first use.
#[derive(Default)]
struct Builder {
    doc: InstanceDoc,
}

impl Builder {
    fn delim(&mut self, d: &Option<String>) {
        if let Some(d) = d {
            if !self.doc.infrastructure.delimiters.contains(d) {
                self.doc.infrastructure.delimiters.push(d.clone());
            }
        }
    }

    fn route(&mut self, id: &str, length: f64, entry: Option<String>, exit: Option<String>) {
        self.delim(&entry);
        self.delim(&exit);
        self.doc.infrastructure.partial_routes.push(PartialRouteDoc {
            id: id.to_string(),
            length,
            entry,
            exit,
        });
    }

    fn elementary(&mut self, id: &str, parts: &[String]) {
        self.doc
            .infrastructure
            .elementary_routes
            .push(ElementaryRouteDoc {
                id: id.to_string(),
                parts: parts.to_vec(),
            });
    }

    fn conflict(&mut self, a: &str, b: &str) {
        self.doc
            .infrastructure
            .conflicts
            .push([a.to_string(), b.to_string()]);
    }

    fn conflict_group(&mut self, group: &[String]) {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                self.conflict(a, b);
            }
        }
    }

    fn train(&mut self, id: &str, length: f64, initial: &[String], fin: &[String]) {
        self.doc.trains.push(TrainDoc {
            id: id.to_string(),
            length,
            initial: initial.to_vec(),
            final_routes: fin.to_vec(),
        });
    }

    fn build(self) -> Result<ProblemInstance, GeneratorError> {
        Ok(ProblemInstance::from_doc(&self.doc)?)
    }
}

fn s(x: impl Into<String>) -> String {
    x.into()
}

// ---------------------------------------------------------------------------
// Corridor

/// A line of `n_routes` unit routes with one train entering from each end.
///
/// A train spans `ceil(len)` routes. A train that fits in one route starts on
/// the boundary route; a longer train starts one route in from it.
pub fn corridor(
    n_routes: usize,
    left_train_len: Option<f64>,
    right_train_len: Option<f64>,
) -> Result<ProblemInstance, GeneratorError> {
    if n_routes < 2 {
        return Err(GeneratorError::InvalidParameter(
            "corridor needs at least 2 routes".into(),
        ));
    }
    let mut b = Builder::default();
    for k in 0..n_routes {
        let left = (k > 0).then(|| format!("e{}", k - 1));
        let right = (k + 1 < n_routes).then(|| format!("e{k}"));
        b.route(&format!("E{k}"), 1.0, left.clone(), right.clone());
        let wl = (k > 0).then(|| format!("w{}", k - 1));
        let wr = (k + 1 < n_routes).then(|| format!("w{k}"));
        b.route(&format!("W{k}"), 1.0, wr, wl);
    }
    for k in 0..n_routes {
        b.elementary(&format!("E{k}"), &[format!("E{k}")]);
        b.elementary(&format!("W{k}"), &[format!("W{k}")]);
        b.conflict(&format!("E{k}"), &format!("W{k}"));
    }
    let placement = |len: f64| -> Result<(usize, usize), GeneratorError> {
        if !(len > 0.0) || !len.is_finite() {
            return Err(GeneratorError::InvalidParameter(format!(
                "train length {len} must be positive"
            )));
        }
        let span = (len - 1e-9).ceil().max(1.0) as usize;
        let offset = if len <= 1.0 { 0 } else { 1 };
        if offset + span > n_routes {
            return Err(GeneratorError::InvalidParameter(format!(
                "train of length {len} does not fit in {n_routes} routes"
            )));
        }
        Ok((offset, span))
    };
    let mut left_end = 0;
    if let Some(len) = left_train_len {
        let (offset, span) = placement(len)?;
        let initial: Vec<String> = (offset..offset + span).map(|k| format!("E{k}")).collect();
        left_end = offset + span;
        b.train("t1", len, &initial, &[format!("E{}", n_routes - 1)]);
    }
    if let Some(len) = right_train_len {
        let (offset, span) = placement(len)?;
        let first = n_routes - offset - span;
        if first < left_end {
            return Err(GeneratorError::InvalidParameter(
                "trains overlap in a corridor this short".into(),
            ));
        }
        let initial: Vec<String> = (first..first + span).map(|k| format!("W{k}")).collect();
        let id = if left_train_len.is_some() { "t2" } else { "t1" };
        b.train(id, len, &initial, &[s("W0")]);
    }
    b.build()
}

/// Two long trains facing each other with one free route between them.
pub fn example1_corridor() -> ProblemInstance {
    corridor(9, Some(2.25), Some(2.25)).expect("valid corridor")
}

/// Two short trains at the extreme ends of the same corridor.
pub fn example2_corridor() -> ProblemInstance {
    corridor(9, Some(0.8), Some(0.8)).expect("valid corridor")
}

// ---------------------------------------------------------------------------
// Bidirectional lines built from single-track pieces and two-track stations

#[derive(Clone, Debug)]
enum Piece {
    /// One elementary route per direction; parts listed west to east.
    Single { parts: Vec<(String, f64)> },
    /// Two-track station. Entering a track runs from the entry signal over
    /// the switch and the track body to a zero-length stop piece in front of
    /// the exit signal; leaving runs over the exit switch.
    Station {
        name: String,
        track_a: f64,
        track_b: f64,
        throat: f64,
    },
}

/// Names of the elementary routes of a line, per direction in travel order.
struct Line {
    /// Eastbound elementary routes; each entry lists alternatives.
    east: Vec<Vec<String>>,
    west: Vec<Vec<String>>,
}

const TRACKS: [&str; 2] = ["A", "B"];

fn build_line(b: &mut Builder, pieces: &[Piece]) -> Line {
    let n = pieces.len();
    let mut east = Vec::new();
    let mut west = Vec::new();

    // Delimiter between piece k and k+1, per direction.
    let joint = |dir: &str, k: usize| -> Option<String> {
        (k + 1 < n).then(|| format!("{dir}:j{k}"))
    };

    // Eastbound, west to east.
    for (k, piece) in pieces.iter().enumerate() {
        let entry = if k == 0 { None } else { joint("e", k - 1) };
        let exit = joint("e", k);
        match piece {
            Piece::Single { parts } => {
                let mut names = Vec::new();
                for (p, (name, len)) in parts.iter().enumerate() {
                    let en = if p == 0 { entry.clone() } else { Some(format!("e:{name}:in")) };
                    let ex = if p + 1 == parts.len() {
                        exit.clone()
                    } else {
                        Some(format!("e:{}:in", parts[p + 1].0))
                    };
                    let id = format!("{name}.e");
                    b.route(&id, *len, en, ex);
                    names.push(id);
                }
                let er = names[0].clone();
                b.elementary(&er, &names);
                east.push(vec![er]);
            }
            Piece::Station {
                name,
                track_a,
                track_b,
                throat,
            } => {
                let mut ins = Vec::new();
                let mut outs = Vec::new();
                for (x, track) in TRACKS.iter().zip([track_a, track_b]) {
                    let body = format!("{name}.w{x}.e");
                    let stop = format!("{name}.{x}.e");
                    let out = format!("{name}.e{x}.e");
                    let stop_d = Some(format!("e:{name}.{x}:stop"));
                    let sig_d = Some(format!("e:{name}.{x}:sig"));
                    b.route(&body, *track, entry.clone(), stop_d.clone());
                    b.route(&stop, 0.0, stop_d, sig_d.clone());
                    b.route(&out, *throat, sig_d, exit.clone());
                    b.elementary(&body, &[body.clone(), stop]);
                    b.elementary(&out, &[out.clone()]);
                    ins.push(body);
                    outs.push(out);
                }
                east.push(ins);
                east.push(outs);
            }
        }
    }

    // Westbound, east to west.
    for (k, piece) in pieces.iter().enumerate().rev() {
        let entry = joint("w", k);
        let exit = if k == 0 { None } else { joint("w", k - 1) };
        match piece {
            Piece::Single { parts } => {
                let mut names = Vec::new();
                for (p, (name, len)) in parts.iter().enumerate().rev() {
                    let en = if p + 1 == parts.len() {
                        entry.clone()
                    } else {
                        Some(format!("w:{name}:in"))
                    };
                    let ex = if p == 0 { exit.clone() } else { Some(format!("w:{}:in", parts[p - 1].0)) };
                    let id = format!("{name}.w");
                    b.route(&id, *len, en, ex);
                    names.push(id);
                }
                let er = names[0].clone();
                b.elementary(&er, &names);
                west.push(vec![er]);
            }
            Piece::Station {
                name,
                track_a,
                track_b,
                throat,
            } => {
                let mut ins = Vec::new();
                let mut outs = Vec::new();
                for (x, track) in TRACKS.iter().zip([track_a, track_b]) {
                    let body = format!("{name}.e{x}.w");
                    let stop = format!("{name}.{x}.w");
                    let out = format!("{name}.w{x}.w");
                    let stop_d = Some(format!("w:{name}.{x}:stop"));
                    let sig_d = Some(format!("w:{name}.{x}:sig"));
                    b.route(&body, *track, entry.clone(), stop_d.clone());
                    b.route(&stop, 0.0, stop_d, sig_d.clone());
                    b.route(&out, *throat, sig_d, exit.clone());
                    b.elementary(&body, &[body.clone(), stop]);
                    b.elementary(&out, &[out.clone()]);
                    ins.push(body);
                    outs.push(out);
                }
                west.push(ins);
                west.push(outs);
            }
        }
    }

    // Conflicts: directed copies of the same resource, switch areas and
    // track bodies.
    for piece in pieces {
        match piece {
            Piece::Single { parts } => {
                for (name, _) in parts {
                    b.conflict(&format!("{name}.e"), &format!("{name}.w"));
                }
            }
            Piece::Station { name, .. } => {
                let west_switch: Vec<String> = TRACKS
                    .iter()
                    .flat_map(|x| [format!("{name}.w{x}.e"), format!("{name}.w{x}.w")])
                    .collect();
                let east_switch: Vec<String> = TRACKS
                    .iter()
                    .flat_map(|x| [format!("{name}.e{x}.e"), format!("{name}.e{x}.w")])
                    .collect();
                b.conflict_group(&west_switch);
                b.conflict_group(&east_switch);
                for x in TRACKS {
                    for east in [format!("{name}.w{x}.e"), format!("{name}.{x}.e")] {
                        for west in [format!("{name}.e{x}.w"), format!("{name}.{x}.w")] {
                            b.conflict(&east, &west);
                        }
                    }
                }
            }
        }
    }

    Line { east, west }
}

/// `n` two-track stations joined by single track, one train entering from
/// each end.
///
/// Each station has eight resources: the single-track sections on either
/// side, the two switch areas per end, and the two tracks. With
/// `track_len < train_len` no station can hold a train clear of its
/// switches, so the trains cannot pass each other.
pub fn ladder(n: usize, train_len: f64, track_len: f64) -> Result<ProblemInstance, GeneratorError> {
    if n == 0 {
        return Err(GeneratorError::InvalidParameter(
            "ladder needs at least one station".into(),
        ));
    }
    if !(train_len > 0.0) || !(track_len > 0.0) {
        return Err(GeneratorError::InvalidParameter(
            "lengths must be positive".into(),
        ));
    }
    let mut b = Builder::default();
    let line = build_line(&mut b, &ladder_pieces(n, track_len));
    // Finals are the exit routes of the far station.
    let east_final = &line.east[line.east.len() - 2];
    let west_final = &line.west[line.west.len() - 2];
    b.train("t1", train_len, &line.east[0], east_final);
    b.train("t2", train_len, &line.west[0], west_final);
    b.build()
}

fn ladder_pieces(n: usize, track_len: f64) -> Vec<Piece> {
    let mut pieces = vec![Piece::Single {
        parts: vec![(s("s1.0"), 1.0)],
    }];
    for k in 1..=n {
        pieces.push(Piece::Station {
            name: format!("s{k}"),
            track_a: track_len,
            track_b: track_len,
            throat: 0.5,
        });
        let mut parts = vec![(format!("s{k}.6"), 1.0)];
        if k < n {
            parts.push((format!("s{}.0", k + 1), 1.0));
        }
        pieces.push(Piece::Single { parts });
    }
    pieces
}

/// Number of distinct physical resources: directed copies share a stem.
pub fn physical_route_count(inst: &ProblemInstance) -> usize {
    let mut stems: Vec<&str> = inst
        .infrastructure
        .routes()
        .iter()
        .map(|r| {
            r.name
                .strip_suffix(".e")
                .or_else(|| r.name.strip_suffix(".w"))
                .unwrap_or(&r.name)
        })
        .collect();
    stems.sort_unstable();
    stems.dedup();
    stems.len()
}

/// Four stations, two long trains at the ends and two short trains between
/// them. The long trains cannot pass each other anywhere.
pub fn four_station() -> ProblemInstance {
    let mut b = Builder::default();
    let line = build_line(&mut b, &ladder_pieces(4, LADDER_TRACK_LEN));
    let east_final = line.east[line.east.len() - 2].clone();
    let west_final = line.west[line.west.len() - 2].clone();
    b.train("long_east", LADDER_TRAIN_LEN, &line.east[0], &east_final);
    b.train("long_west", LADDER_TRAIN_LEN, &line.west[0], &west_final);
    // Short trains waiting in station 2 (eastbound, track A) and station 3
    // (westbound, track B).
    b.train(
        "short_east",
        0.8,
        &[s("s2.wA.e"), s("s2.A.e")],
        &east_final,
    );
    b.train(
        "short_west",
        0.8,
        &[s("s3.eB.w"), s("s3.B.w")],
        &west_final,
    );
    b.build().expect("valid four-station instance")
}

// ---------------------------------------------------------------------------
// Junction

/// Main line r1..r5 with a siding r6, r7 that leaves the main line through
/// the switch route r3. One train enters eastbound at r1, the other
/// westbound from the siding at r7.
pub fn junction() -> ProblemInstance {
    let mut b = Builder::default();
    // (name, length, east entry, east exit)
    let routes: [(&str, f64, Option<&str>, Option<&str>); 8] = [
        ("r1", 1.0, None, Some("a0")),
        ("r2", 1.0, Some("a0"), Some("a1")),
        ("r3", 2.0, Some("a1"), Some("a3")),
        ("r3d", 2.0, Some("a1"), Some("b3")),
        ("r4", 1.0, Some("a3"), Some("a4")),
        ("r5", 1.0, Some("a4"), None),
        ("r6", 1.0, Some("b3"), Some("b4")),
        ("r7", 1.0, Some("b4"), None),
    ];
    for (name, len, en, ex) in routes {
        b.route(
            &format!("{name}.e"),
            len,
            en.map(|d| format!("e:{d}")),
            ex.map(|d| format!("e:{d}")),
        );
        b.route(
            &format!("{name}.w"),
            len,
            ex.map(|d| format!("w:{d}")),
            en.map(|d| format!("w:{d}")),
        );
    }
    for (name, ..) in routes {
        for dir in ["e", "w"] {
            let id = format!("{name}.{dir}");
            b.elementary(&id, &[id.clone()]);
        }
        b.conflict(&format!("{name}.e"), &format!("{name}.w"));
    }
    b.conflict_group(&[s("r3.e"), s("r3d.e"), s("r3.w"), s("r3d.w")]);
    b.train("t1", 0.8, &[s("r1.e")], &[s("r5.e")]);
    b.train("t2", 0.8, &[s("r7.w")], &[s("r1.w")]);
    b.build().expect("valid junction")
}

// ---------------------------------------------------------------------------
// Small fixtures

/// Two trains on separate parallel tracks, each one route from its exit.
pub fn parallel_tracks(n_trains: usize) -> ProblemInstance {
    let mut b = Builder::default();
    for k in 0..n_trains {
        let a = format!("p{k}a");
        let z = format!("p{k}b");
        b.route(&a, 1.0, None, Some(format!("d{k}")));
        b.route(&z, 1.0, Some(format!("d{k}")), None);
        b.elementary(&a, &[a.clone()]);
        b.elementary(&z, &[z.clone()]);
        b.train(&format!("t{}", k + 1), 0.5, &[a], &[z]);
    }
    b.build().expect("valid parallel tracks")
}

/// One train already standing on its (non-boundary) final route.
pub fn parked_train() -> ProblemInstance {
    let mut b = Builder::default();
    b.route("a", 1.0, None, Some(s("d1")));
    b.route("b", 1.0, Some(s("d1")), Some(s("d2")));
    b.route("c", 1.0, Some(s("d2")), None);
    for r in ["a", "b", "c"] {
        b.elementary(r, &[s(r)]);
    }
    b.train("t1", 0.5, &[s("b")], &[s("b")]);
    b.build().expect("valid parked train")
}

/// Infrastructure without trains.
pub fn empty_instance() -> ProblemInstance {
    let mut b = Builder::default();
    b.route("a", 1.0, None, Some(s("d1")));
    b.route("b", 1.0, Some(s("d1")), None);
    b.elementary("a", &[s("a")]);
    b.elementary("b", &[s("b")]);
    b.build().expect("valid empty instance")
}

// ---------------------------------------------------------------------------
// Random lines

#[derive(Clone, Copy, Debug)]
pub struct RandomParams {
    pub max_trains: usize,
    pub max_routes: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            max_trains: 4,
            max_routes: 40,
        }
    }
}

/// A random line of single-track pieces and stations with up to
/// `max_trains` trains in random directions. Deterministic for a seed.
pub fn random_instance(seed: u64, params: RandomParams) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(inst) = try_random(&mut rng, params) {
            return inst;
        }
    }
}

fn try_random(rng: &mut ChaCha8Rng, params: RandomParams) -> Option<ProblemInstance> {
    const LENGTHS: [f64; 5] = [0.0, 0.3, 0.5, 1.0, 1.5];
    const TRACKS_LEN: [f64; 4] = [0.5, 1.0, 2.0, 3.0];
    const TRAIN_LEN: [f64; 6] = [0.4, 0.8, 1.0, 1.5, 2.0, 2.6];

    let mut pieces = Vec::new();
    let mut budget = params.max_routes;
    let n_pieces = rng.gen_range(2..=6);
    let mut singles = 0;
    for _ in 0..n_pieces {
        let station = rng.gen_bool(0.4);
        if station && budget >= 12 {
            budget -= 12;
            pieces.push(Piece::Station {
                name: format!("st{}", pieces.len()),
                track_a: *TRACKS_LEN.choose(rng).unwrap(),
                track_b: *TRACKS_LEN.choose(rng).unwrap(),
                throat: if rng.gen_bool(0.5) { 0.0 } else { 0.5 },
            });
        } else if budget >= 2 {
            let n_parts = rng.gen_range(1..=3).min(budget / 2);
            budget -= 2 * n_parts;
            let parts = (0..n_parts)
                .map(|p| {
                    let len = *LENGTHS.choose(rng).unwrap();
                    (format!("x{singles}_{p}"), if len == 0.0 && p == 0 { 1.0 } else { len })
                })
                .collect();
            singles += 1;
            pieces.push(Piece::Single { parts });
        }
    }
    if pieces.is_empty() {
        return None;
    }

    let mut b = Builder::default();
    let line = build_line(&mut b, &pieces);
    let n_trains = rng.gen_range(1..=params.max_trains);
    let mut taken: Vec<String> = Vec::new();
    for t in 0..n_trains {
        let eastbound = rng.gen_bool(0.5);
        let ers = if eastbound { &line.east } else { &line.west };
        if ers.len() < 2 {
            return None;
        }
        // Start anywhere but on the last elementary route.
        let pos = rng.gen_range(0..ers.len() - 1);
        let er_name = ers[pos].choose(rng).unwrap().clone();
        let er = b
            .doc
            .infrastructure
            .elementary_routes
            .iter()
            .find(|e| e.id == er_name)
            .unwrap()
            .parts
            .clone();
        // Sometimes hold only a prefix of a multi-part elementary route.
        let initial: Vec<String> = if er.len() > 1 && rng.gen_bool(0.3) {
            er[..rng.gen_range(1..er.len())].to_vec()
        } else {
            er
        };
        if initial.iter().any(|r| blocked(&b, &taken, r)) {
            continue;
        }
        taken.extend(initial.iter().cloned());
        let fin = ers.last().unwrap().clone();
        let fin: Vec<String> = fin
            .iter()
            .map(|er| {
                b.doc
                    .infrastructure
                    .elementary_routes
                    .iter()
                    .find(|e| &e.id == er)
                    .unwrap()
                    .parts
                    .last()
                    .unwrap()
                    .clone()
            })
            .collect();
        let len = *TRAIN_LEN.choose(rng).unwrap();
        b.train(&format!("t{}", t + 1), len, &initial, &fin);
    }
    if b.doc.trains.is_empty() {
        return None;
    }
    b.build().ok()
}

fn blocked(b: &Builder, taken: &[String], r: &str) -> bool {
    taken.iter().any(|t| {
        t == r
            || b.doc.infrastructure.conflicts.iter().any(|[x, y]| {
                (x == t && y == r) || (x == r && y == t)
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corridor_layouts() {
        let ex1 = example1_corridor();
        let names = |t: usize| -> Vec<String> {
            ex1.trains[t]
                .initial
                .iter()
                .map(|r| ex1.infrastructure.route(*r).name.clone())
                .collect()
        };
        assert_eq!(names(0), ["E1", "E2", "E3"]);
        assert_eq!(names(1), ["W7", "W6", "W5"]);
        let ex2 = example2_corridor();
        assert_eq!(ex2.infrastructure.route(ex2.trains[0].initial[0]).name, "E0");
        assert_eq!(ex2.infrastructure.route(ex2.trains[1].initial[0]).name, "W8");
        assert!(corridor(1, Some(1.0), None).is_err());
    }

    #[test]
    fn ladder_sizes() {
        for n in [1, 2, 4, 10] {
            let inst = ladder(n, LADDER_TRAIN_LEN, LADDER_TRACK_LEN).unwrap();
            assert_eq!(physical_route_count(&inst), 8 * n);
            assert_eq!(inst.infrastructure.routes().len(), 16 * n);
        }
        assert!(ladder(0, 1.8, 1.0).is_err());
    }

    #[test]
    fn junction_branch_successors() {
        let inst = junction();
        let succ = inst.successors("e:a1").unwrap();
        let mut names: Vec<_> = succ
            .iter()
            .map(|r| inst.infrastructure.route(*r).name.as_str())
            .collect();
        names.sort();
        assert_eq!(names, ["r3.e", "r3d.e"]);
        assert!(inst.successors("w:a0").unwrap().len() == 1);
    }

    #[test]
    fn random_is_deterministic_and_bounded() {
        for seed in 0..50 {
            let a = random_instance(seed, RandomParams::default());
            let b = random_instance(seed, RandomParams::default());
            assert_eq!(a, b);
            assert!(a.infrastructure.routes().len() <= 40);
            assert!(a.trains.len() <= 4 && !a.trains.is_empty());
        }
    }
}
