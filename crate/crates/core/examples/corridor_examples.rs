//! The two corridor situations: long trains that block each other at once,
//! and short trains that only meet after a few moves.

use railock::detector::{detect, upper_bound, Algorithm, DetectOptions};
use railock::generator::{corridor, example1_corridor, example2_corridor};

fn main() {
    for (name, inst) in [
        ("long trains", example1_corridor()),
        ("short trains", example2_corridor()),
        ("single train", corridor(2, Some(0.8), None).unwrap()),
    ] {
        println!("{name}: U={}", upper_bound(&inst));
        for alg in Algorithm::ALL {
            let v = detect(&inst, &DetectOptions::with_algorithm(alg)).unwrap();
            println!("  algorithm {alg}: {} at {}", v.status, v.steps_used);
        }
    }
}
