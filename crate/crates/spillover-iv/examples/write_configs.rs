//! Build the three canonical populations programmatically and write them
//! as JSON configs for the command-line interface.
//!
//! ```text
//! cargo run --example write_configs -- fixtures/
//! ```

use std::path::Path;

use spillover_iv::fixtures;
use spillover_iv::model::validate_spec;

pub fn run(dir: &Path) -> spillover_iv::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, spec) in [
        ("p0", fixtures::p0()),
        ("p1", fixtures::p1()),
        ("p2", fixtures::p2()),
    ] {
        let report = validate_spec(&spec);
        assert!(report.passed(), "{name}: {:?}", report.violations);
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, spec.to_json()? + "\n")?;
        println!(
            "{}: m={}, {} profiles, digest {}",
            path.display(),
            spec.m,
            spec.profiles.len(),
            &spec.digest()[..12]
        );
    }
    Ok(())
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    run(Path::new(&dir)).unwrap();
}
