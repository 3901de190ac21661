//! Design corpora and baseline-vs-policy benchmarking.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::baseline_policy;
use crate::error::{Error, Result};
use crate::grid::{generate_synthetic_design, load_design, save_design, Design, SynthConfig};
use crate::infer::{BundlePolicy, PolicyBundle};
use crate::router::{run_flow, Trajectory, WeightPolicy};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "WWROUTER_THREADS";

/// Congested designs must keep the baseline busy for at least this many
/// iterations.
pub const MIN_CONGESTED_BASELINE_ITERATIONS: usize = 5;
const MAX_CANDIDATES_PER_DESIGN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Easy,
    Congested,
}

impl Profile {
    pub fn synth_config(self) -> SynthConfig {
        match self {
            Profile::Easy => SynthConfig::easy(),
            Profile::Congested => SynthConfig::congested(),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Profile::Easy),
            "congested" => Ok(Profile::Congested),
            other => Err(Error::InvalidArgument(format!(
                "unknown profile {other:?} (expected easy or congested)"
            ))),
        }
    }
}

/// Generates `count` designs named `d000`, `d001`, ... as a pure function of
/// `(count, seed, profile)`.
///
/// Congested candidates are kept only if the baseline schedule converges
/// within `max_iterations` and needs at least
/// [`MIN_CONGESTED_BASELINE_ITERATIONS`] iterations; rejected candidates are
/// replaced by the next candidate seed.
pub fn generate_corpus(count: usize, seed: u64, profile: Profile, max_iterations: usize) -> Result<Vec<Design>> {
    let cfg = profile.synth_config();
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut designs = Vec::with_capacity(count);
    let mut candidates = 0;
    while designs.len() < count {
        if candidates >= MAX_CANDIDATES_PER_DESIGN * count {
            return Err(Error::InfeasibleConfig(format!(
                "only {} of {count} designs passed screening after {candidates} candidates",
                designs.len()
            )));
        }
        candidates += 1;
        let name = format!("d{:03}", designs.len());
        let design = generate_synthetic_design(&name, seeds.random(), &cfg)?;
        if profile == Profile::Congested {
            let t = run_flow(&design, &mut baseline_policy, max_iterations)?;
            if !t.converged || t.iterations() < MIN_CONGESTED_BASELINE_ITERATIONS {
                log::debug!("rejected candidate {candidates}: {} iterations", t.iterations());
                continue;
            }
        }
        designs.push(design);
    }
    Ok(designs)
}

/// Writes each design as `<name>.json` into `dir`, creating it if needed.
pub fn save_corpus(designs: &[Design], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    designs
        .iter()
        .map(|d| {
            let path = dir.join(format!("{}.json", d.name));
            save_design(d, &path)?;
            Ok(path)
        })
        .collect()
}

/// Loads every `*.json` design in `dir`, sorted by file name.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<Design>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(load_design).collect()
}

/// Builds the global rayon pool, honoring [`THREADS_ENV`] when set.
pub fn init_thread_pool() -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    // a pool built earlier in the process wins; that is fine
    let _ = builder.build_global();
    Ok(())
}

/// Which weights a run uses.
#[derive(Debug, Clone, Copy)]
pub enum PolicyChoice<'a> {
    Baseline,
    Learned(&'a PolicyBundle),
}

/// Runs one flow and measures its wall-clock time, inference included.
pub fn timed_run(design: &Design, policy: PolicyChoice<'_>, max_iterations: usize) -> Result<(Trajectory, f64)> {
    let start = Instant::now();
    let mut learned;
    let p: &mut dyn WeightPolicy = match policy {
        PolicyChoice::Baseline => &mut baseline_policy,
        PolicyChoice::Learned(b) => {
            learned = BundlePolicy(b);
            &mut learned
        }
    };
    let t = run_flow(design, p, max_iterations)?;
    Ok((t, start.elapsed().as_secs_f64()))
}

/// One table row. A totals row uses the name `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub design: String,
    pub iterations_base: usize,
    pub iterations_ours: usize,
    pub runtime_base_s: f64,
    pub runtime_ours_s: f64,
    pub drvs_base: u32,
    pub drvs_ours: u32,
    pub wirelength_base: f64,
    pub wirelength_ours: f64,
}

const RUNTIME_DECIMALS: usize = 6;
const WIRELENGTH_DECIMALS: usize = 3;

fn round_to(x: f64, decimals: usize) -> f64 {
    let s = 10f64.powi(decimals as i32);
    (x * s).round() / s
}

/// `(base - ours) / base * 100`, zero when `base` is zero.
pub fn diff_pct(base: f64, ours: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        (base - ours) / base * 100.0
    }
}

impl BenchRow {
    /// Runtime diff computed from the printed (rounded) runtimes.
    pub fn runtime_diff_pct(&self) -> f64 {
        diff_pct(
            round_to(self.runtime_base_s, RUNTIME_DECIMALS),
            round_to(self.runtime_ours_s, RUNTIME_DECIMALS),
        )
    }

    pub fn wirelength_diff_pct(&self) -> f64 {
        diff_pct(
            round_to(self.wirelength_base, WIRELENGTH_DECIMALS),
            round_to(self.wirelength_ours, WIRELENGTH_DECIMALS),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrvCurves {
    pub design: String,
    pub base: Vec<u32>,
    pub ours: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub curves: Vec<DrvCurves>,
}

pub const REPORT_HEADER: &str = "design\titerations_base\titerations_ours\truntime_base_s\truntime_ours_s\truntime_diff_pct\tdrvs_base\tdrvs_ours\twirelength_base\twirelength_ours\twirelength_diff_pct";

/// Zero-based column positions (the design name is column 0) of the
/// wall-clock fields.
pub const RUNTIME_COLUMNS: [usize; 3] = [3, 4, 5];

impl BenchReport {
    pub fn totals(&self) -> BenchRow {
        let mut t = BenchRow {
            design: "total".into(),
            iterations_base: 0,
            iterations_ours: 0,
            runtime_base_s: 0.0,
            runtime_ours_s: 0.0,
            drvs_base: 0,
            drvs_ours: 0,
            wirelength_base: 0.0,
            wirelength_ours: 0.0,
        };
        for r in &self.rows {
            t.iterations_base += r.iterations_base;
            t.iterations_ours += r.iterations_ours;
            t.runtime_base_s += round_to(r.runtime_base_s, RUNTIME_DECIMALS);
            t.runtime_ours_s += round_to(r.runtime_ours_s, RUNTIME_DECIMALS);
            t.drvs_base += r.drvs_base;
            t.drvs_ours += r.drvs_ours;
            t.wirelength_base += round_to(r.wirelength_base, WIRELENGTH_DECIMALS);
            t.wirelength_ours += round_to(r.wirelength_ours, WIRELENGTH_DECIMALS);
        }
        t
    }

    /// Tab-separated table: header, one row per design, then the totals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in self.rows.iter().chain(std::iter::once(&self.totals())) {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.rd$}\t{:.rd$}\t{:.2}\t{}\t{}\t{:.wd$}\t{:.wd$}\t{:.2}",
                r.design,
                r.iterations_base,
                r.iterations_ours,
                r.runtime_base_s,
                r.runtime_ours_s,
                r.runtime_diff_pct(),
                r.drvs_base,
                r.drvs_ours,
                r.wirelength_base,
                r.wirelength_ours,
                r.wirelength_diff_pct(),
                rd = RUNTIME_DECIMALS,
                wd = WIRELENGTH_DECIMALS,
            )
            .unwrap();
        }
        out
    }

    /// The report with wall-clock columns removed, for comparing runs.
    pub fn to_tsv_without_runtimes(&self) -> String {
        strip_columns(&self.to_tsv(), &RUNTIME_COLUMNS)
    }

    /// Writes the table to `path` and one `<design>.tsv` DRV curve per
    /// design into the directory `<path>.curves`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))?;
        let dir = curves_dir(path);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for c in &self.curves {
            let p = dir.join(format!("{}.tsv", c.design));
            std::fs::write(&p, curve_tsv(c)).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

pub fn curves_dir(report: &Path) -> PathBuf {
    let mut name = report.as_os_str().to_owned();
    name.push(".curves");
    PathBuf::from(name)
}

/// `iteration, drvs_base, drvs_ours`; a cell is empty once that run ended.
pub fn curve_tsv(c: &DrvCurves) -> String {
    let mut out = String::from("iteration\tdrvs_base\tdrvs_ours\n");
    let cell = |v: &[u32], i: usize| v.get(i).map(|x| x.to_string()).unwrap_or_default();
    for i in 0..c.base.len().max(c.ours.len()) {
        writeln!(out, "{i}\t{}\t{}", cell(&c.base, i), cell(&c.ours, i)).unwrap();
    }
    out
}

pub fn strip_columns(tsv: &str, columns: &[usize]) -> String {
    tsv.lines()
        .map(|l| {
            l.split('\t')
                .enumerate()
                .filter(|(i, _)| !columns.contains(i))
                .map(|(_, c)| c)
                .collect::<Vec<_>>()
                .join("\t")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

/// Runs baseline and learned flows `repeat` times per design and reports
/// mean runtimes. The router is deterministic, so every repeat must yield
/// the same trajectory; a mismatch is reported as an error.
pub fn run_bench(
    designs: &[Design],
    bundle: &PolicyBundle,
    repeat: usize,
    max_iterations: usize,
) -> Result<BenchReport> {
    if designs.is_empty() {
        return Err(Error::Empty("no designs to benchmark"));
    }
    if repeat == 0 {
        return Err(Error::InvalidArgument("repeat must be at least 1".into()));
    }
    let jobs: Vec<(usize, bool, usize)> = (0..designs.len())
        .flat_map(|d| [false, true].into_iter().flat_map(move |ours| (0..repeat).map(move |r| (d, ours, r))))
        .collect();
    let results: Vec<Result<(Trajectory, f64)>> = jobs
        .par_iter()
        .map(|&(d, ours, _)| {
            let p = if ours {
                PolicyChoice::Learned(bundle)
            } else {
                PolicyChoice::Baseline
            };
            timed_run(&designs[d], p, max_iterations)
        })
        .collect();

    let mut rows = Vec::with_capacity(designs.len());
    let mut curves = Vec::with_capacity(designs.len());
    let mut it = results.into_iter();
    for design in designs {
        let mut summarize = || -> Result<(Trajectory, f64)> {
            let mut first: Option<Trajectory> = None;
            let mut total = 0.0;
            for _ in 0..repeat {
                let (t, secs) = it.next().expect("one result per job")?;
                total += secs;
                match &first {
                    Some(f) if f.states != t.states => {
                        return Err(Error::InvalidArgument(format!(
                            "nondeterministic trajectory on design {}",
                            design.name
                        )))
                    }
                    Some(_) => {}
                    None => first = Some(t),
                }
            }
            Ok((first.expect("repeat >= 1"), total / repeat as f64))
        };
        let (base, base_s) = summarize()?;
        let (ours, ours_s) = summarize()?;
        let wl = |t: &Trajectory| t.states.last().map(|s| s.total_wirelength_um).unwrap_or(0.0);
        rows.push(BenchRow {
            design: design.name.clone(),
            iterations_base: base.iterations(),
            iterations_ours: ours.iterations(),
            runtime_base_s: base_s,
            runtime_ours_s: ours_s,
            drvs_base: base.final_drvs(),
            drvs_ours: ours.final_drvs(),
            wirelength_base: wl(&base),
            wirelength_ours: wl(&ours),
        });
        curves.push(DrvCurves {
            design: design.name.clone(),
            base: base.drv_curve(),
            ours: ours.drv_curve(),
        });
    }
    Ok(BenchReport { rows, curves })
}

/// A parsed report table row: the design name and numeric cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub design: String,
    pub cells: Vec<f64>,
}

/// Parses a table written by [`BenchReport::to_tsv`].
pub fn parse_report(tsv: &str) -> Result<Vec<ParsedRow>> {
    let mut lines = tsv.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(Error::Parse {
            what: "bench report".into(),
            message: "unexpected header".into(),
        });
    }
    lines
        .map(|l| {
            let mut fields = l.split('\t');
            let design = fields.next().unwrap_or_default().to_string();
            let cells = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        what: "bench report".into(),
                        message: format!("{f:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ParsedRow { design, cells })
        })
        .collect()
}
