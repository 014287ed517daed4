//! Compares the SAT detector with explicit state search on random lines.
//!
//! `cargo run --example oracle_crosscheck -- 500`

use railock::detector::{detect, Algorithm, DetectOptions, Status};
use railock::generator::{random_instance, RandomParams};
use railock::oracle::{oracle_decide, OracleVerdict, DEFAULT_NODE_BUDGET};

fn main() {
    let count: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let (mut live, mut dead, mut mismatches) = (0, 0, 0);
    for seed in 0..count {
        let inst = random_instance(seed, RandomParams::default());
        let expected = match oracle_decide(&inst, DEFAULT_NODE_BUDGET) {
            OracleVerdict::Live => Status::Live,
            OracleVerdict::Dead => Status::Dead,
            OracleVerdict::BudgetExceeded => continue,
        };
        if expected == Status::Live {
            live += 1;
        } else {
            dead += 1;
        }
        for alg in Algorithm::ALL {
            let v = detect(&inst, &DetectOptions::with_algorithm(alg)).unwrap();
            if v.status != expected {
                mismatches += 1;
                println!("seed {seed}, algorithm {alg}: {} but search says {expected}", v.status);
            }
        }
    }
    println!("{count} instances: {live} live, {dead} dead, {mismatches} mismatches");
}
