//! Prints the CNF of the first two junction transitions.

use railock::detector::{dimacs_for_steps, Algorithm};
use railock::generator::junction;

fn main() {
    print!("{}", dimacs_for_steps(&junction(), Algorithm::MaximalProgress, 2));
}
