//! Full verification chain with a sectioned report and exit status.

use cplift::io::{generate_instance, GeneratorKind, GeneratorSpec, RunConfig};
use cplift::verify::run_verify;

fn main() -> cplift::Result<()> {
    let inst = generate_instance(
        &GeneratorSpec::new(GeneratorKind::RandomGaussian, vec![2, 2, 1, 2], 5),
        4,
    )?;
    let cfg = RunConfig {
        hypothesis_samples: 20,
        ..RunConfig::default()
    };
    let report = run_verify(&inst, &cfg, true)?;
    print!("{}", report.to_text());
    println!("exit code {}", report.exit_code());
    Ok(())
}
