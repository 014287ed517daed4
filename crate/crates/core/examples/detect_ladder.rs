//! Runs the three algorithms on a ladder of two-track stations.
//!
//! `cargo run --example detect_ladder -- 4`

use std::time::Duration;

use railock::detector::{detect, upper_bound, Algorithm, DetectOptions};
use railock::generator::{ladder, LADDER_TRACK_LEN, LADDER_TRAIN_LEN};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2);
    let inst = ladder(n, LADDER_TRAIN_LEN, LADDER_TRACK_LEN).expect("n >= 1");
    println!("ladder n={n}: {} partial routes, bound U={}", inst.infrastructure.routes().len(), upper_bound(&inst));
    for alg in Algorithm::ALL {
        let opts = DetectOptions {
            timeout: Some(Duration::from_secs(30)),
            ..DetectOptions::with_algorithm(alg)
        };
        let v = detect(&inst, &opts).expect("consistent");
        println!(
            "algorithm {alg}: {} after {} transitions ({:.3}s)",
            v.status,
            v.steps_used,
            v.elapsed.as_secs_f64()
        );
    }
}
