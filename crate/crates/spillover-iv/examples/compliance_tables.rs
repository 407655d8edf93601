use spillover_iv::assumptions::check_pair_exclusion_table;
use spillover_iv::model::{potential_treatment, ALL_TYPES};

/// Print the one-peer potential-treatment table and the pair exclusion
/// table implied by the irrelevance assumption.
///
/// ```text
/// cargo run --example compliance_tables
/// ```
pub fn run() -> spillover_iv::Result<()> {
    println!("Potential treatment with one peer, D(z_own, z_peer):");
    println!("{:>16}  (1,1) (1,0) (0,1) (0,0)", "type");
    for ty in ALL_TYPES {
        let cells = [(true, true), (true, false), (false, true), (false, false)];
        let mut row = String::new();
        for (zo, zp) in cells {
            let d = potential_treatment(ty, zo, &[zp])?;
            row.push_str(&format!("{:>6}", d as u8));
        }
        println!("{:>16} {row}", format!("{ty:?}"));
    }

    println!();
    println!("Pairs excluded by irrelevance (peer type in columns, X = excluded):");
    let table = check_pair_exclusion_table();
    print!("   ");
    for peer in ALL_TYPES {
        print!("  {}", peer.letter());
    }
    println!();
    for (i, own) in ALL_TYPES.iter().enumerate() {
        print!("  {}", own.letter());
        for j in 0..6 {
            print!("  {}", if table[i][j] { "X" } else { "." });
        }
        println!();
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
