//! The examples double as smoke tests: include the pure ones and run
//! them with small budgets.

#[allow(dead_code)]
mod compliance_tables_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/compliance_tables.rs"));
}

#[allow(dead_code)]
mod width_profile_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/width_profile.rs"));
}

#[allow(dead_code)]
mod falsification_search_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/falsification_search.rs"));
}

#[test]
fn compliance_tables_runs() {
    compliance_tables_example::run().expect("compliance tables example");
}

#[test]
fn width_profile_is_monotone() {
    let rows = width_profile_example::run().expect("width profile example");
    assert_eq!(rows.len(), 6);
    for pair in rows.windows(2) {
        assert!(pair[1].2 >= pair[0].2, "treated-peers width should widen");
        assert!(pair[0].1.abs() < 1e-10, "untreated-peers width should stay 0");
    }
}

#[test]
fn falsification_search_runs_clean() {
    falsification_search_example::run(25).expect("search example");
}
