//! Run-directory layout and report files. Every run writes into one
//! directory: `config.echo` and `manifest.toml` at the top, checkpoints
//! under `checkpoints/`, and CSV/architecture exports under `exports/`.
//! Floats are written in shortest round-trip form, so equal runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{AblateRecord, BenchRecord, InheritRecord, ParetoRecord, RankPair};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::space::{SearchSpace, SubnetPolicy};
use crate::trainer::{MetricsRow, ProbPoint};

/// Bumped whenever any CSV column set changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: &str = "iteration,epoch,kind,bin,task_loss,rc_loss,resource";
pub const PROBS_HEADER: &str = "t,bin_center,probability";
pub const PARETO_HEADER: &str = "target,resource,val_accuracy,val_loss,mode";
pub const BENCH_HEADER: &str =
    "bin,center,uniform_pmf,ag_median_ns,rejection_median_ns,rejection_median_tries,timeouts";
pub const KENDALL_HEADER: &str = "id,sufficiency,finetune_drop";
pub const DIST_CHECK_HEADER: &str = "depth,samples,tv_distance,ks_distance,runtime_ms";
pub const ABLATE_HEADER: &str = "tag,target,resource,val_accuracy,val_loss,mode";
pub const INHERIT_HEADER: &str = "target,resource,inherited_acc,finetuned_acc";

/// Paths inside one run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    /// Create the fixed layout under `root`. Call only after the config has
    /// validated; a bad config must not leave directories behind.
    pub fn create(root: &Path) -> Result<RunDir> {
        fs::create_dir_all(root.join("checkpoints"))?;
        fs::create_dir_all(root.join("exports"))?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    /// Open an existing run directory.
    pub fn open(root: &Path) -> Result<RunDir> {
        if !root.join("checkpoints").is_dir() || !root.join("exports").is_dir() {
            return Err(Error::config(format!(
                "{} is not a run directory (expected checkpoints/ and exports/)",
                root.display()
            )));
        }
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn config_echo(&self) -> PathBuf {
        self.root.join("config.echo")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.toml")
    }

    pub fn metrics_csv(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn probs_csv(&self) -> PathBuf {
        self.root.join("probs.csv")
    }

    pub fn latest_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoints").join("latest.ckpt")
    }

    pub fn export(&self, name: &str) -> PathBuf {
        self.root.join("exports").join(name)
    }

    pub fn write_config_echo(&self, config: &RunConfig) -> Result<()> {
        fs::write(self.config_echo(), config.to_toml_string()?)?;
        Ok(())
    }

    /// One small file recording what produced this directory.
    pub fn write_manifest(&self, command: &str, config: &RunConfig) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "command = {:?}", command);
        let _ = writeln!(s, "seed = {}", config.train.seed);
        let _ = writeln!(s, "crate_version = {:?}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "csv_schema = {}", CSV_SCHEMA_VERSION);
        let _ = writeln!(s, "checkpoint_format = {}", crate::checkpoint::VERSION);
        let _ = writeln!(s, "config_echo = \"config.echo\"");
        fs::write(self.manifest(), s)?;
        Ok(())
    }
}

/// Append rows to a CSV, writing the header first when the file is new.
fn append_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::new();
    if !path.exists() {
        text.push_str(header);
        text.push('\n');
    }
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    use std::io::Write as _;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(rows.len() * 40 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Shortest representation that parses back to the same f64.
fn num(x: f64) -> String {
    format!("{:?}", x)
}

pub fn append_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.iteration,
                r.epoch,
                r.kind.as_str(),
                r.bin,
                num(r.task_loss),
                num(r.rc_loss),
                num(r.resource)
            )
        })
        .collect();
    append_csv(path, METRICS_HEADER, &lines)
}

pub fn append_probs(path: &Path, points: &[ProbPoint]) -> Result<()> {
    let lines: Vec<String> = points
        .iter()
        .map(|p| format!("{},{},{}", p.t, num(p.bin_center), num(p.probability)))
        .collect();
    append_csv(path, PROBS_HEADER, &lines)
}

pub fn write_pareto(path: &Path, records: &[ParetoRecord]) -> Result<()> {
    let lines: Vec<String> = records.iter().map(pareto_line).collect();
    write_csv(path, PARETO_HEADER, &lines)
}

fn pareto_line(r: &ParetoRecord) -> String {
    format!(
        "{},{},{},{},{}",
        num(r.target_c),
        num(r.resource),
        num(r.val_accuracy),
        num(r.val_loss),
        r.mode
    )
}

pub fn write_bench(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let lines: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.bin,
                num(r.center),
                num(r.uniform_pmf),
                r.ag_median_ns,
                r.rejection_median_ns,
                r.rejection_median_tries,
                r.timeouts
            )
        })
        .collect();
    write_csv(path, BENCH_HEADER, &lines)
}

pub fn write_kendall(path: &Path, pairs: &[RankPair]) -> Result<()> {
    let lines: Vec<String> = pairs
        .iter()
        .map(|p| format!("{},{},{}", p.id, num(p.inherited), num(p.finetuned)))
        .collect();
    write_csv(path, KENDALL_HEADER, &lines)
}

/// One dist-check row per tested depth.
pub struct DistCheckRow {
    pub depth: usize,
    pub samples: u64,
    pub tv_distance: f64,
    pub ks_distance: f64,
    pub runtime_ms: u128,
}

pub fn write_dist_check(path: &Path, rows: &[DistCheckRow]) -> Result<()> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.depth,
                r.samples,
                num(r.tv_distance),
                num(r.ks_distance),
                r.runtime_ms
            )
        })
        .collect();
    write_csv(path, DIST_CHECK_HEADER, &lines)
}

pub fn write_ablate(path: &Path, records: &[AblateRecord]) -> Result<()> {
    let mut lines = Vec::new();
    for rec in records {
        for r in &rec.records {
            lines.push(format!("{},{}", rec.tag, pareto_line(r)));
        }
    }
    write_csv(path, ABLATE_HEADER, &lines)
}

pub fn write_inherit(path: &Path, records: &[InheritRecord]) -> Result<()> {
    let lines: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{}",
                num(r.target_c),
                num(r.resource),
                num(r.inherited_acc),
                num(r.finetuned_acc)
            )
        })
        .collect();
    write_csv(path, INHERIT_HEADER, &lines)
}

/// Architecture export: a small TOML document naming the choices, widths,
/// and resource total of one extracted subnet.
pub fn write_architecture(
    path: &Path,
    space: &SearchSpace,
    policy: &SubnetPolicy,
    target: f64,
) -> Result<()> {
    let choices = policy.choices();
    let widths: Vec<usize> = choices
        .iter()
        .enumerate()
        .map(|(d, &c)| space.op(d).candidates[c])
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, "schema = 1");
    let _ = writeln!(s, "units = {:?}", space.resource_name);
    let _ = writeln!(s, "target = {:?}", target);
    let _ = writeln!(s, "resource = {:?}", policy.resource_units());
    let _ = writeln!(s, "choices = {:?}", choices);
    let _ = writeln!(s, "widths = {:?}", widths);
    fs::write(path, s)?;
    Ok(())
}
