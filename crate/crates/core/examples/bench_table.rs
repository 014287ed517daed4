//! Writes a small benchmark directory and runs `bench` on it.

use railock::generator::{example1_corridor, example2_corridor, four_station, junction, ladder};
use railock::serialize_instance;

fn main() {
    let dir = std::env::temp_dir().join("railock-bench");
    std::fs::create_dir_all(&dir).unwrap();
    let mut instances = vec![
        ("example1".to_string(), example1_corridor()),
        ("example2".to_string(), example2_corridor()),
        ("junction".to_string(), junction()),
        ("four_station".to_string(), four_station()),
    ];
    for n in [2, 4, 20] {
        instances.push((format!("ladder{n:03}"), ladder(n, 1.8, 1.0).unwrap()));
    }
    for (name, inst) in &instances {
        std::fs::write(dir.join(format!("{name}.json")), serialize_instance(inst)).unwrap();
    }
    let args = ["railock", "bench", dir.to_str().unwrap(), "--timeout-s", "10"];
    let code = railock::cli::run(args, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
