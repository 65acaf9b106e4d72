use vsbbm_core::acceptance::{run_suite, SUITES};

use crate::args::AcceptanceArgs;
use crate::error::{CliError, Result};
use crate::output::write_json;

pub fn run(args: &AcceptanceArgs) -> Result<()> {
    if !SUITES.contains(&args.suite.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown suite `{}`; expected one of: {}",
            args.suite,
            SUITES.join(", ")
        )));
    }
    let report = run_suite(&args.suite, args.seed, args.threads)?;
    println!("{report}");
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    match report.failures().count() {
        0 => Ok(()),
        n => Err(CliError::Failed(n)),
    }
}
