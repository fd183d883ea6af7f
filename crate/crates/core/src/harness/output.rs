use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{ExperimentResult, SummaryRow, SweepResult, METRICS};
use crate::error::Result;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// `episode_index,agent,seed,<metrics>`; one row per episode, runs in result order.
pub fn write_episodes_csv<W: Write>(out: W, result: &ExperimentResult) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["episode_index", "agent", "seed"].iter().copied().chain(METRICS))?;
    for run in &result.runs {
        for e in &run.episodes {
            let mut rec = vec![e.episode_index.to_string(), run.agent.to_string(), run.seed.to_string()];
            rec.extend(e.values().iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `agent,metric,mean,std_error,seeds,episodes`.
pub fn write_summary_csv<W: Write>(out: W, summary: &[SummaryRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["agent", "metric", "mean", "std_error", "seeds", "episodes"])?;
    for row in summary {
        for (k, name) in METRICS.iter().enumerate() {
            w.write_record([
                row.agent.to_string(),
                name.to_string(),
                row.mean[k].to_string(),
                row.std_error[k].to_string(),
                row.seeds.to_string(),
                row.episodes.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width `mean ± se` table, one line per agent.
pub fn summary_table(summary: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<10}", "agent");
    for name in METRICS {
        let _ = write!(s, " {name:>24}");
    }
    s.push('\n');
    for row in summary {
        let _ = write!(s, "{:<10}", row.agent.name());
        for k in 0..METRICS.len() {
            let cell = format!("{:.4} ± {:.4}", row.mean[k], row.std_error[k]);
            let _ = write!(s, " {cell:>24}");
        }
        s.push('\n');
    }
    s
}

/// Long format: `axis,axis_value,agent,seed,metric,value`, where `value` is the
/// seed's mean over collected episodes.
pub fn write_sweep_csv<W: Write>(
    out: W,
    sweep: &SweepResult,
    episode_length: u64,
    collection_slot: u64,
) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["axis", "axis_value", "agent", "seed", "metric", "value"])?;
    for p in &sweep.points {
        for run in &p.result.runs {
            let Some(means) = run.collected_means(episode_length, collection_slot) else {
                continue;
            };
            for (name, v) in METRICS.iter().zip(means) {
                w.write_record([
                    sweep.axis.to_string(),
                    p.value.to_string(),
                    run.agent.to_string(),
                    run.seed.to_string(),
                    name.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `axis,axis_value,agent,metric,mean,std_error,seeds`.
pub fn write_sweep_summary_csv<W: Write>(out: W, sweep: &SweepResult) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["axis", "axis_value", "agent", "metric", "mean", "std_error", "seeds"])?;
    for p in &sweep.points {
        for row in &p.result.summary {
            for (k, name) in METRICS.iter().enumerate() {
                w.write_record([
                    sweep.axis.to_string(),
                    p.value.to_string(),
                    row.agent.to_string(),
                    name.to_string(),
                    row.mean[k].to_string(),
                    row.std_error[k].to_string(),
                    row.seeds.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    Ok((path.clone(), BufWriter::new(File::create(path)?)))
}

/// Writes `episodes.csv`, `summary.csv` and `summary.txt` into `dir`.
pub fn write_run_outputs(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let (p1, f) = create(dir, "episodes.csv")?;
    write_episodes_csv(f, result)?;
    let (p2, f) = create(dir, "summary.csv")?;
    write_summary_csv(f, &result.summary)?;
    let (p3, mut f) = create(dir, "summary.txt")?;
    f.write_all(summary_table(&result.summary).as_bytes())?;
    f.flush()?;
    Ok(vec![p1, p2, p3])
}

/// Writes `sweep.csv`, `sweep_summary.csv` and `sweep_summary.txt` into `dir`.
pub fn write_sweep_outputs(
    dir: &Path,
    sweep: &SweepResult,
    episode_length: u64,
    collection_slot: u64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let (p1, f) = create(dir, "sweep.csv")?;
    write_sweep_csv(f, sweep, episode_length, collection_slot)?;
    let (p2, f) = create(dir, "sweep_summary.csv")?;
    write_sweep_summary_csv(f, sweep)?;
    let (p3, mut f) = create(dir, "sweep_summary.txt")?;
    for p in &sweep.points {
        writeln!(f, "{} = {}", sweep.axis, p.value)?;
        f.write_all(summary_table(&p.result.summary).as_bytes())?;
        writeln!(f)?;
    }
    f.flush()?;
    Ok(vec![p1, p2, p3])
}
