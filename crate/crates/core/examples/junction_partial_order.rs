//! Finds a plan for the junction and prints its partial order.

use railock::detector::{detect, Algorithm, DetectOptions};
use railock::generator::junction;

fn main() {
    let inst = junction();
    let v = detect(&inst, &DetectOptions::with_algorithm(Algorithm::MaximalProgress)).unwrap();
    println!("{} in {} steps", v.status, v.steps_used);
    let plan = v.plan.expect("junction is live");
    for (k, step) in plan.to_doc(&inst).steps.iter().enumerate() {
        let moves: Vec<String> = step.iter().map(|a| format!("{}->{}", a.train, a.route)).collect();
        println!("step {}: {}", k + 1, moves.join(", "));
    }
    let order = plan.partial_order(&inst);
    for (a, b) in &order.edges {
        let (x, y) = (&order.nodes[*a], &order.nodes[*b]);
        let cross = if x.train != y.train { "  (between trains)" } else { "" };
        println!("{}:{} < {}:{}{cross}", x.train, x.route, y.train, y.route);
    }
}
