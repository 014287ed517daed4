//! Incremental SAT backend contract.
//!
//! Clauses persist for the lifetime of a backend; assumptions only hold for
//! one solve call. Two implementations exist: an adapter to CaDiCaL and a
//! small built-in CDCL solver used when no native solver is wanted.

mod cadical;
mod cdcl;

use std::fmt;
use std::ops::Not;
use std::str::FromStr;
use std::time::Instant;

pub use self::cadical::CadicalBackend;
pub use self::cdcl::CdclBackend;

/// A propositional literal. Variables are numbered from 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        assert!(var >= 1 && var <= i32::MAX as u32, "variable index out of range");
        if positive {
            Lit(var as i32)
        } else {
            Lit(-(var as i32))
        }
    }

    pub fn from_dimacs(x: i32) -> Lit {
        assert!(x != 0, "0 is not a literal");
        Lit(x)
    }

    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Total assignment returned with a satisfiable answer.
#[derive(Clone, Debug, Default)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn from_values(values: Vec<bool>) -> Model {
        Model { values }
    }

    /// Truth value of `lit`. Variables that never occurred are false.
    pub fn value(&self, lit: Lit) -> bool {
        let v = self.values.get(lit.var() as usize).copied().unwrap_or(false);
        v == lit.is_positive()
    }

    pub fn num_vars(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
    TimedOut,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }
}

pub trait SatBackend: Send {
    fn add_clause(&mut self, lits: &[Lit]);

    /// Solves clauses plus `assumptions`. Returns `TimedOut` only when a
    /// deadline was given and passed.
    fn solve_under(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> SolveResult;

    fn name(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Cadical,
    Cdcl,
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cadical" => Ok(BackendKind::Cadical),
            "cdcl" | "builtin" | "dpll" => Ok(BackendKind::Cdcl),
            other => Err(format!("unknown SAT backend '{other}'")),
        }
    }
}

impl BackendKind {
    /// Reads `RAILOCK_SAT_BACKEND`; defaults to CaDiCaL.
    pub fn from_env() -> BackendKind {
        match std::env::var("RAILOCK_SAT_BACKEND") {
            Ok(v) if !v.is_empty() => v.parse().unwrap_or_else(|e| {
                log::warn!("{e}; using cadical");
                BackendKind::Cadical
            }),
            _ => BackendKind::Cadical,
        }
    }

    pub fn create(self) -> Box<dyn SatBackend> {
        match self {
            BackendKind::Cadical => Box::new(CadicalBackend::new()),
            BackendKind::Cdcl => Box::new(CdclBackend::new()),
        }
    }
}
