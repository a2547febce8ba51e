//! CSV and manifest writers. Every float is written with 17 significant
//! digits in scientific notation so files round-trip bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::Config;
use crate::error::Result;
use crate::harness::{RunLog, StepSummary, SweepRow};

pub const SAMPLES_HEADER: [&str; 16] = [
    "t", "ref_alpha", "ref_beta", "ref_x", "ref_y", "i_alpha", "i_beta", "i_x", "i_y", "u", "sc", "cost",
    "omega_ref", "omega", "lambda_xy", "lambda_sc",
];

pub const BLOCKS_HEADER: [&str; 12] = [
    "sample", "t", "gamma1", "gamma2", "gamma3", "switch_rate", "lambda_xy", "lambda_sc", "omega", "omega_e",
    "gamma2_ref", "gamma3_ref",
];

pub const SWEEP_HEADER: [&str; 6] = ["lambda_xy", "lambda_sc", "gamma1", "gamma2", "gamma3", "switch_rate"];

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_samples<W: Write>(w: W, log: &RunLog) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SAMPLES_HEADER)?;
    for s in &log.samples {
        let mut rec: Vec<String> = vec![fmt(s.t)];
        rec.extend(s.reference.iter().map(|v| fmt(*v)));
        rec.extend(s.current.iter().map(|v| fmt(*v)));
        rec.push(s.u.index().to_string());
        rec.push(s.sc.to_string());
        rec.extend([s.cost, s.omega_ref, s.omega, s.lambda.lambda_xy, s.lambda.lambda_sc].map(fmt));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_blocks<W: Write>(w: W, log: &RunLog) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BLOCKS_HEADER)?;
    for b in &log.blocks {
        let m = &b.metrics;
        let mut rec = vec![m.sample_end.to_string()];
        rec.extend(
            [
                m.t_end,
                m.gamma1,
                m.gamma2,
                m.gamma3,
                m.switch_rate,
                m.lambda.lambda_xy,
                m.lambda.lambda_sc,
                m.omega,
                m.omega_e,
                b.gamma2_ref,
                b.gamma3_ref,
            ]
            .map(fmt),
        );
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record(
            [r.lambda.lambda_xy, r.lambda.lambda_sc, r.gamma1, r.gamma2, r.gamma3, r.switch_rate].map(fmt),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_step_summary<W: Write>(w: W, s: &StepSummary) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "pre_mean", "pre_std", "post_mean", "post_std", "direction"])?;
    for (i, name) in ["gamma1", "gamma2", "gamma3"].iter().enumerate() {
        out.write_record([
            name.to_string(),
            fmt(s.pre.mean[i]),
            fmt(s.pre.std[i]),
            fmt(s.post.mean[i]),
            fmt(s.post.std[i]),
            s.direction[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `samples.csv` (when samples were logged) and `blocks.csv` into
/// `dir`.
pub fn write_run(dir: &Path, log: &RunLog) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !log.samples.is_empty() || log.blocks.is_empty() {
        write_samples(fs::File::create(dir.join("samples.csv"))?, log)?;
    }
    write_blocks(fs::File::create(dir.join("blocks.csv"))?, log)?;
    Ok(())
}

/// The fully resolved configuration; loading it back reproduces the run.
pub fn write_manifest(dir: &Path, cfg: &Config) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("manifest.toml"), cfg.to_toml())?;
    Ok(())
}
