//! Seeded instance generation and the versioned JSON file format.

use cplift::io::{generate_file, parse_instance_file, GeneratorKind, GeneratorSpec};

fn main() -> cplift::Result<()> {
    for kind in GeneratorKind::ALL {
        let file = generate_file(&GeneratorSpec::new(kind, vec![2, 1, 1], 3), 42)?;
        let inst = file.to_instance()?;
        println!("{:<20} d = {}, r = {}", kind.name(), inst.d(), inst.r());
        assert_eq!(parse_instance_file(&file.to_json())?, file);
    }
    let file = generate_file(
        &GeneratorSpec::new(GeneratorKind::ExactFit, vec![1, 1], 2),
        1,
    )?;
    println!("{}", file.to_json());
    Ok(())
}
