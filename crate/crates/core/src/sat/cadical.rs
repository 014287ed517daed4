use std::time::Instant;

use super::{Lit, Model, SatBackend, SolveResult};

/// Termination callback polled by CaDiCaL during search.
#[derive(Default)]
struct Deadline {
    at: Option<Instant>,
}

impl cadical::Callbacks for Deadline {
    fn terminate(&mut self) -> bool {
        matches!(self.at, Some(t) if Instant::now() >= t)
    }
}

pub struct CadicalBackend {
    solver: cadical::Solver<Deadline>,
    max_var: u32,
}

impl CadicalBackend {
    pub fn new() -> Self {
        let mut solver = cadical::Solver::new();
        solver.set_callbacks(Some(Deadline::default()));
        CadicalBackend { solver, max_var: 0 }
    }
}

impl Default for CadicalBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl SatBackend for CadicalBackend {
    fn add_clause(&mut self, lits: &[Lit]) {
        for l in lits {
            self.max_var = self.max_var.max(l.var());
        }
        self.solver.add_clause(lits.iter().map(|l| l.to_dimacs()));
    }

    fn solve_under(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> SolveResult {
        if matches!(deadline, Some(t) if Instant::now() >= t) {
            return SolveResult::TimedOut;
        }
        for l in assumptions {
            self.max_var = self.max_var.max(l.var());
        }
        if let Some(cb) = self.solver.get_callbacks() {
            cb.at = deadline;
        }
        let result = self
            .solver
            .solve_with(assumptions.iter().map(|l| l.to_dimacs()));
        match result {
            Some(true) => {
                let mut values = vec![false; self.max_var as usize + 1];
                for v in 1..=self.max_var {
                    values[v as usize] = self.solver.value(v as i32).unwrap_or(false);
                }
                SolveResult::Sat(Model::from_values(values))
            }
            Some(false) => SolveResult::Unsat,
            None => SolveResult::TimedOut,
        }
    }

    fn name(&self) -> &'static str {
        "cadical"
    }
}
