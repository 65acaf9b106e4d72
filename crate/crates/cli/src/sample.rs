use std::io::Write;

use serde::Serialize;
use vsbbm_core::config::ExperimentConfig;
use vsbbm_core::record::{write_header, write_jsonl, RunHeader, RECORD_VERSION};
use vsbbm_core::runner::{summarize, RunSummary, Runner};

use crate::args::SampleArgs;
use crate::error::{CliError, Result};
use crate::output::{create, ensure_dir, write_json};

/// Replicates simulated and written per batch; bounds memory, not output.
const BATCH: u64 = 256;

#[derive(Debug, Serialize)]
struct SampleSummary {
    header: RunHeader,
    summary: RunSummary,
}

pub fn run(args: &SampleArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.engine.seed = seed;
    }
    if let Some(n) = args.replicates {
        cfg.engine.replicates = n;
    }
    let (seed, count) = (cfg.engine.seed, cfg.engine.replicates);
    let header = RunHeader {
        version: RECORD_VERSION,
        seed,
        replicates: count,
        config: cfg.to_toml_string()?,
    };
    let runner = Runner::new(cfg)?;
    let out = &args.common.out;
    ensure_dir(out)?;
    let path = out.join("records.jsonl");
    let mut file = create(&path)?;
    write_header(&mut file, &header)?;
    let mut all = Vec::new();
    let mut start = 0;
    while start < count {
        let end = (start + BATCH).min(count);
        let batch = runner.run_range(seed, start..end, args.common.threads)?;
        write_jsonl(&mut file, &batch)?;
        all.extend(batch);
        start = end;
    }
    file.flush().map_err(CliError::io(&path))?;
    let summary = summarize(&all);
    write_json(
        &out.join("summary.json"),
        &SampleSummary {
            header,
            summary,
        },
    )?;
    println!("{count} replicates -> {}", path.display());
    Ok(())
}
