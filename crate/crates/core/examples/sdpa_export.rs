//! Writes the relaxation in SDPA sparse format and reads it back.

use cplift::cp_lift::assemble_qcqp;
use cplift::io::{export_sdpa, generate_instance, parse_sdpa, GeneratorKind, GeneratorSpec};
use cplift::relax::build_relaxation;

fn main() -> cplift::Result<()> {
    let inst = generate_instance(
        &GeneratorSpec::new(GeneratorKind::ExactFit, vec![1, 1], 3),
        0,
    )?;
    let prob = build_relaxation(&assemble_qcqp(&inst), &inst)?;
    let path = std::env::temp_dir().join("cplift_relaxation.dat-s");
    export_sdpa(&prob, &path)?;

    let text = std::fs::read_to_string(&path)?;
    for line in text.lines().take(8) {
        println!("{line}");
    }
    let data = parse_sdpa(&text)?;
    println!(
        "... {} entries, {} constraints, written to {}",
        data.entries.len(),
        data.num_constraints(),
        path.display()
    );
    Ok(())
}
