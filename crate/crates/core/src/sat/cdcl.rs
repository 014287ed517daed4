//! Small conflict-driven clause learning solver.
//!
//! Two watched literals, first-UIP learning, VSIDS-style activities with
//! phase saving, Luby restarts, and assumptions decided first in order.
//! Meant for hermetic test runs and small instances.

use std::time::Instant;

use super::{Lit, Model, SatBackend, SolveResult};

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

/// Literal code: `2 * var + (negative as u32)`.
type Code = u32;

fn code(l: Lit) -> Code {
    2 * l.var() + (!l.is_positive()) as u32
}

fn var_of(c: Code) -> usize {
    (c >> 1) as usize
}

struct Clause {
    lits: Vec<Code>,
}

pub struct CdclBackend {
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Code>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    unsat: bool,
    num_vars: usize,
}

impl Default for CdclBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl CdclBackend {
    pub fn new() -> Self {
        CdclBackend {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2],
            assigns: vec![UNDEF],
            level: vec![0],
            reason: vec![None],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0],
            var_inc: 1.0,
            heap: VarHeap::default(),
            phase: vec![false],
            seen: vec![false],
            unsat: false,
            num_vars: 0,
        }
    }

    fn ensure_var(&mut self, v: usize) {
        while self.num_vars < v {
            self.num_vars += 1;
            self.assigns.push(UNDEF);
            self.level.push(0);
            self.reason.push(None);
            self.activity.push(0.0);
            self.phase.push(false);
            self.seen.push(false);
            self.watches.push(Vec::new());
            self.watches.push(Vec::new());
            self.heap.insert(self.num_vars, &self.activity);
        }
    }

    fn value(&self, c: Code) -> i8 {
        let a = self.assigns[var_of(c)];
        if c & 1 == 1 {
            -a
        } else {
            a
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, c: Code, reason: Option<usize>) {
        let v = var_of(c);
        self.assigns[v] = if c & 1 == 1 { FALSE } else { TRUE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(c);
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for i in (lim..self.trail.len()).rev() {
            let c = self.trail[i];
            let v = var_of(c);
            self.phase[v] = c & 1 == 0;
            self.assigns[v] = UNDEF;
            self.reason[v] = None;
            if !self.heap.contains(v) {
                self.heap.insert(v, &self.activity);
            }
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = self.trail.len();
    }

    fn attach(&mut self, cid: usize) {
        let (a, b) = {
            let l = &self.clauses[cid].lits;
            (l[0], l[1])
        };
        self.watches[a as usize].push(cid);
        self.watches[b as usize].push(cid);
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p ^ 1;
            let ws = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut kept = Vec::with_capacity(ws.len());
            let mut conflict = None;
            let mut idx = 0;
            while idx < ws.len() {
                let cid = ws[idx];
                idx += 1;
                let lits = &mut self.clauses[cid].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if value_of(&self.assigns, first) == TRUE {
                    kept.push(cid);
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    if value_of(&self.assigns, lits[k]) != FALSE {
                        lits.swap(1, k);
                        let w = lits[1];
                        self.watches[w as usize].push(cid);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                kept.push(cid);
                if value_of(&self.assigns, first) == FALSE {
                    conflict = Some(cid);
                    kept.extend_from_slice(&ws[idx..]);
                    break;
                }
                self.enqueue(first, Some(cid));
            }
            let slot = &mut self.watches[false_lit as usize];
            kept.append(slot);
            *slot = kept;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increase(v, &self.activity);
    }

    fn analyze(&mut self, mut confl: usize) -> (Vec<Code>, u32) {
        let mut learnt: Vec<Code> = vec![0];
        let mut path = 0usize;
        let mut p: Option<Code> = None;
        let mut index = self.trail.len();
        loop {
            let lits = self.clauses[confl].lits.clone();
            for q in lits {
                if Some(q) == p {
                    continue;
                }
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= self.decision_level() {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[var_of(self.trail[index])] {
                    break;
                }
            }
            let pl = self.trail[index];
            self.seen[var_of(pl)] = false;
            path -= 1;
            p = Some(pl);
            if path == 0 {
                break;
            }
            confl = self.reason[var_of(pl)].expect("implied literal has a reason");
        }
        learnt[0] = p.unwrap() ^ 1;
        for q in &learnt[1..] {
            self.seen[var_of(*q)] = false;
        }
        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[var_of(learnt[i])] > self.level[var_of(learnt[max_i])] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            bt = self.level[var_of(learnt[1])];
        }
        self.var_inc /= 0.95;
        (learnt, bt)
    }

    fn pick_branch(&mut self) -> Option<Code> {
        while let Some(v) = self.heap.pop_max(&self.activity) {
            if self.assigns[v] == UNDEF {
                let c = 2 * v as u32 + (!self.phase[v]) as u32;
                return Some(c);
            }
        }
        None
    }

    fn search(&mut self, assumptions: &[Code], deadline: Option<Instant>) -> SolveResult {
        let mut conflicts: u64 = 0;
        let mut restart_idx = 1u64;
        let mut restart_budget = 100 * luby(restart_idx);
        loop {
            if let Some(confl) = self.propagate() {
                conflicts += 1;
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return SolveResult::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let cid = self.clauses.len();
                    let first = learnt[0];
                    self.clauses.push(Clause { lits: learnt });
                    self.attach(cid);
                    self.enqueue(first, Some(cid));
                }
                if conflicts % 256 == 0 && matches!(deadline, Some(t) if Instant::now() >= t) {
                    return SolveResult::TimedOut;
                }
                if conflicts >= restart_budget {
                    restart_idx += 1;
                    restart_budget = conflicts + 100 * luby(restart_idx);
                    self.cancel_until(0);
                }
                continue;
            }

            let mut next = None;
            while (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.value(a) {
                    TRUE => self.trail_lim.push(self.trail.len()),
                    FALSE => return SolveResult::Unsat,
                    _ => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let decision = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(c) => c,
                    None => {
                        let mut values = vec![false; self.num_vars + 1];
                        for (v, slot) in values.iter_mut().enumerate().skip(1) {
                            *slot = self.assigns[v] == TRUE;
                        }
                        return SolveResult::Sat(Model::from_values(values));
                    }
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(decision, None);
        }
    }
}

fn value_of(assigns: &[i8], c: Code) -> i8 {
    let a = assigns[var_of(c)];
    if c & 1 == 1 {
        -a
    } else {
        a
    }
}

fn luby(mut i: u64) -> u64 {
    // i is 1-based: 1 1 2 1 1 2 4 ...
    loop {
        let mut k = 1u32;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return 1u64 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

impl SatBackend for CdclBackend {
    fn add_clause(&mut self, lits: &[Lit]) {
        if self.unsat {
            return;
        }
        let max = lits.iter().map(|l| l.var() as usize).max().unwrap_or(0);
        self.ensure_var(max);
        let mut cl: Vec<Code> = lits.iter().map(|l| code(*l)).collect();
        cl.sort_unstable();
        cl.dedup();
        if cl.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return;
        }
        if cl.iter().any(|c| self.value(*c) == TRUE) {
            return;
        }
        cl.retain(|c| self.value(*c) != FALSE);
        match cl.len() {
            0 => self.unsat = true,
            1 => {
                self.enqueue(cl[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
            }
            _ => {
                let cid = self.clauses.len();
                self.clauses.push(Clause { lits: cl });
                self.attach(cid);
            }
        }
    }

    fn solve_under(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> SolveResult {
        if matches!(deadline, Some(t) if Instant::now() >= t) {
            return SolveResult::TimedOut;
        }
        if self.unsat {
            return SolveResult::Unsat;
        }
        let max = assumptions.iter().map(|l| l.var() as usize).max().unwrap_or(0);
        self.ensure_var(max);
        let codes: Vec<Code> = assumptions.iter().map(|l| code(*l)).collect();
        let result = self.search(&codes, deadline);
        self.cancel_until(0);
        result
    }

    fn name(&self) -> &'static str {
        "cdcl"
    }
}

/// Max-heap of variables keyed by activity.
#[derive(Default)]
struct VarHeap {
    heap: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn contains(&self, v: usize) -> bool {
        self.pos.get(v).copied().flatten().is_some()
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.pos.len() <= v {
            self.pos.resize(v + 1, None);
        }
        if self.pos[v].is_some() {
            return;
        }
        self.pos[v] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn increase(&mut self, v: usize, act: &[f64]) {
        if let Some(Some(i)) = self.pos.get(v) {
            self.sift_up(*i, act);
        }
    }

    fn pop_max(&mut self, act: &[f64]) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.pos[top] = None;
        if !self.heap.is_empty() {
            self.pos[self.heap[0]] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.heap[i]] <= act[self.heap[parent]] {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < self.heap.len() && act[self.heap[l]] > act[self.heap[best]] {
                best = l;
            }
            if r < self.heap.len() && act[self.heap[r]] > act[self.heap[best]] {
                best = r;
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a]] = Some(a);
        self.pos[self.heap[b]] = Some(b);
    }
}
