//! The `dlmetric` command line.
//!
//! Series are written as CSV and structured results as JSON, both tagged
//! with a schema version. Diagnostics and timings go to stderr so that
//! stdout is identical for any `--jobs`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{DlError, Result};
use crate::geometry::Projection;
use crate::group::{ElemJson, Group, GroupElem};
use crate::metric::{explain, wordlength, FormulaBreakdown};
use crate::oracle::{self, BallTable, BYTES_PER_STATE, DEFAULT_STATE_BUDGET};
use crate::ring::{Residue, RingParams};
use crate::witness;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dlmetric",
    version,
    about = "Word metric toolkit for the Diestel-Leader groups"
)]
pub struct Cli {
    /// Number of trees.
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Size of the residue ring Z/qZ.
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    /// Residues l_1,...,l_{d-1}; defaults to 0,1,...,d-2.
    #[arg(long, value_delimiter = ',')]
    pub residues: Option<Vec<Residue>>,
    /// Approximate memory budget for searches, in bytes.
    #[arg(long)]
    pub mem_budget: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a BFS ball and print its growth series.
    Ball(BallArgs),
    /// Compare the formula with BFS distances on a ball.
    Verify(BallArgs),
    /// Word length of an element, with the formula terms and a geodesic.
    Len(ElemArgs),
    /// Distance between two elements.
    Dist {
        /// First element (JSON or word).
        #[arg(long)]
        g: String,
        /// Second element (JSON or word).
        #[arg(long)]
        h: String,
    },
    /// List the dead ends of a ball.
    DeadEnds {
        #[command(flatten)]
        ball: BallArgs,
        /// Steps searched when measuring depth.
        #[arg(long, default_value_t = 4)]
        horizon: u32,
    },
    /// Build and check a witness certificate.
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Sweep every projection of H_n.
    Hn {
        #[arg(long)]
        n: u32,
    },
    /// Count distinct truncated cone types by radius.
    ConeCensus {
        #[command(flatten)]
        ball: BallArgs,
        /// Cone depth.
        #[arg(long, default_value_t = 2)]
        k: u32,
    },
    /// Quasi-geodesic word of an element, with its length bounds.
    Qgeo(ElemArgs),
}

#[derive(Debug, Subcommand)]
pub enum WitnessCommand {
    /// Dead end with projection ((n,n),...,(n,n)).
    DeadEnd {
        #[arg(long)]
        n: u32,
        /// Steps searched when measuring depth (default 2n+1).
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Cone-type witness g_n and its steps g_{n,i}.
    Cone {
        #[arg(long)]
        n: u32,
    },
}

#[derive(Debug, Args)]
pub struct BallArgs {
    #[arg(long)]
    pub radius: u32,
    /// Ball cache file; read when present and compatible, written otherwise.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ElemArgs {
    /// Element as JSON `{"k":[..],"num":[..],"den":[..]}`.
    #[arg(long)]
    pub elem: Option<String>,
    /// Element as a word such as `u1:1 m1,2:0`.
    #[arg(long)]
    pub word: Option<String>,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &DlError) -> i32 {
    match e {
        DlError::Resource { .. } => EXIT_RESOURCE,
        DlError::Internal(_) => EXIT_FAILED,
        _ => EXIT_USAGE,
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let params = RingParams::new(cli.d, cli.q, cli.residues.clone())?;
    if params.prime_warning() {
        writeln!(
            stderr,
            "warning: q={} has a prime factor at most d-1; the formula is not known to hold here",
            cli.q
        )?;
    }
    let group = Group::new(params);
    let budget = cli
        .mem_budget
        .map(|b| (b as usize / BYTES_PER_STATE).max(1))
        .unwrap_or(DEFAULT_STATE_BUDGET);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(DlError::InvalidParams("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| DlError::Internal(format!("thread pool: {e}")))?;

    let mut buf = Vec::new();
    let mut diag = Vec::new();
    let ctx = Ctx {
        group: &group,
        budget,
        stderr: &mut diag,
    };
    let code = pool.install(|| dispatch(&cli.command, ctx, &mut buf));
    stderr.write_all(&diag)?;
    let code = code?;
    match &cli.out {
        Some(path) => std::fs::write(path, &buf)?,
        None => stdout.write_all(&buf)?,
    }
    Ok(code)
}

struct Ctx<'a> {
    group: &'a Group,
    budget: usize,
    stderr: &'a mut Vec<u8>,
}

fn dispatch(cmd: &Command, ctx: Ctx<'_>, out: &mut Vec<u8>) -> Result<i32> {
    let Ctx {
        group,
        budget,
        stderr,
    } = ctx;
    match cmd {
        Command::Ball(args) => {
            let ball = obtain_ball(group, args, budget, out)?;
            writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
            writeln!(out, "radius,sphere,ball")?;
            for (r, s, b) in ball.growth() {
                writeln!(out, "{r},{s},{b}")?;
            }
            Ok(EXIT_OK)
        }
        Command::Verify(args) => {
            let ball = obtain_ball(group, args, budget, out)?;
            let report = oracle::verify_formula(group, &ball);
            writeln!(
                stderr,
                "verified {} elements in {:?}",
                report.checked, report.elapsed
            )?;
            writeln!(out, "checked {} elements", report.checked)?;
            for m in &report.mismatches {
                writeln!(
                    out,
                    "mismatch {} bfs={} formula={}",
                    group.format_elem(&m.elem),
                    m.bfs,
                    m.formula
                )?;
            }
            writeln!(out, "{} mismatches", report.mismatches.len())?;
            Ok(if report.mismatches.is_empty() {
                EXIT_OK
            } else {
                EXIT_FAILED
            })
        }
        Command::Len(args) => {
            let g = read_elem(group, args)?;
            let proj = group.project(&g);
            let ex = explain(&proj);
            let geodesic = group.geodesic_word(&g)?;
            let report = LenReport {
                schema_version: SCHEMA_VERSION,
                element: ElemJson::from(&g),
                projection: proj,
                f: ex.f,
                breakdown: ex.chosen,
                geodesic: geodesic.to_string(),
                geodesic_length: geodesic.len(),
            };
            let ok = group.eval_word(&geodesic) == g && geodesic.len() as u64 == report.f;
            write_json(out, &report)?;
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Dist { g, h } => {
            let a = read_any(group, g)?;
            let b = read_any(group, h)?;
            let relative = group.project_relative(&a, &b);
            let distance = wordlength(&relative);
            let translated = wordlength(&group.project(&group.multiply(&group.invert(&a), &b)));
            let report = DistReport {
                schema_version: SCHEMA_VERSION,
                g: ElemJson::from(&a),
                h: ElemJson::from(&b),
                relative_projection: relative,
                distance,
                translated_check: translated,
                consistent: distance == translated,
            };
            write_json(out, &report)?;
            Ok(if report.consistent {
                EXIT_OK
            } else {
                EXIT_FAILED
            })
        }
        Command::DeadEnds { ball, horizon } => {
            let table = obtain_ball(group, ball, budget, out)?;
            let found = oracle::dead_end_scan(group, &table, *horizon)?;
            let certified = found.iter().all(|r| {
                oracle::is_dead_end(group, &r.element) && group.length(&r.element) == r.length
            });
            let report = DeadEndList {
                schema_version: SCHEMA_VERSION,
                radius: table.radius(),
                max_certified_length: table.radius().saturating_sub(1),
                depth_horizon: *horizon,
                count: found.len(),
                certified,
                dead_ends: found,
            };
            write_json(out, &report)?;
            Ok(if certified { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Witness(WitnessCommand::DeadEnd { n, horizon }) => {
            let horizon = horizon.unwrap_or(2 * n + 1);
            let (_, cert) = witness::deadend_witness(group, *n, horizon)?;
            write_json(out, &cert)?;
            Ok(if cert.holds() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Witness(WitnessCommand::Cone { n }) => {
            let (_, _, cert) = witness::cone_witness(group, *n)?;
            write_json(out, &cert)?;
            Ok(if cert.holds() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Hn { n } => {
            let report = witness::hn_sweep(group.d(), *n);
            write_json(out, &report)?;
            Ok(if report.holds() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::ConeCensus { ball, k } => {
            if *k == 0 {
                return Err(DlError::InvalidParams("--k must be at least 1".into()));
            }
            let table = obtain_ball(group, ball, budget, out)?;
            writeln!(out, "# schema_version={SCHEMA_VERSION} k={k}")?;
            writeln!(out, "radius,distinct_keys")?;
            for row in oracle::cone_census(group, &table, *k) {
                writeln!(out, "{},{}", row.radius, row.distinct)?;
            }
            Ok(EXIT_OK)
        }
        Command::Qgeo(args) => {
            let g = read_elem(group, args)?;
            let proj = group.project(&g);
            let word = group.quasi_geodesic(&g)?;
            let f = wordlength(&proj);
            let d = proj.d();
            let expected: u64 = (0..d - 1)
                .map(|i| (proj.m(i) + proj.l(i)) as u64)
                .sum::<u64>()
                + 2 * proj.l(d - 1) as u64;
            let tree_distance = proj.tree_distance();
            let len = word.len() as u64;
            let report = QgeoReport {
                schema_version: SCHEMA_VERSION,
                element: ElemJson::from(&g),
                projection: proj,
                word: word.to_string(),
                length: len,
                expected_length: expected,
                f,
                tree_distance,
                evaluates_to_element: group.eval_word(&word) == g,
                bounds_hold: f <= len && len <= 2 * tree_distance,
            };
            let ok = report.evaluates_to_element && report.bounds_hold && len == expected;
            write_json(out, &report)?;
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
    }
}

/// Loads the ball from the cache when it is compatible and large enough,
/// and otherwise computes it (and refreshes the cache when one was named).
fn obtain_ball(
    group: &Group,
    args: &BallArgs,
    budget: usize,
    out: &mut Vec<u8>,
) -> Result<BallTable> {
    if let Some(path) = &args.cache {
        if path.exists() {
            let cached = oracle::load_ball(group, path)?;
            if cached.radius() >= args.radius {
                writeln!(out, "# cache-hit {}", display_path(path))?;
                return Ok(cached.restricted(args.radius));
            }
        }
    }
    let ball = oracle::bfs_ball(group, args.radius, budget)?;
    if let Some(path) = &args.cache {
        oracle::save_ball(&ball, path)?;
    }
    Ok(ball)
}

fn display_path(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_elem(group: &Group, args: &ElemArgs) -> Result<GroupElem> {
    match (&args.elem, &args.word) {
        (Some(text), None) => group.parse_elem(text),
        (None, Some(text)) => Ok(group.eval_word(&group.parse_word(text)?)),
        _ => Err(DlError::InvalidParams(
            "give exactly one of --elem or --word".into(),
        )),
    }
}

/// Elements are JSON objects; anything else is read as a word.
fn read_any(group: &Group, text: &str) -> Result<GroupElem> {
    if text.trim_start().starts_with('{') {
        group.parse_elem(text)
    } else {
        Ok(group.eval_word(&group.parse_word(text)?))
    }
}

fn write_json<T: Serialize>(out: &mut Vec<u8>, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| DlError::Internal(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct LenReport {
    schema_version: u32,
    element: ElemJson,
    projection: Projection,
    f: u64,
    breakdown: FormulaBreakdown,
    geodesic: String,
    geodesic_length: usize,
}

#[derive(Serialize)]
struct DistReport {
    schema_version: u32,
    g: ElemJson,
    h: ElemJson,
    relative_projection: Projection,
    distance: u64,
    translated_check: u64,
    consistent: bool,
}

#[derive(Serialize)]
struct DeadEndList {
    schema_version: u32,
    radius: u32,
    max_certified_length: u32,
    depth_horizon: u32,
    count: usize,
    certified: bool,
    dead_ends: Vec<oracle::DeadEndReport>,
}

#[derive(Serialize)]
struct QgeoReport {
    schema_version: u32,
    element: ElemJson,
    projection: Projection,
    word: String,
    length: u64,
    expected_length: u64,
    f: u64,
    tree_distance: u64,
    evaluates_to_element: bool,
    bounds_hold: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("dlmetric").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--d", "9", "hn", "--n", "1"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["len"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["len", "--word", "x9"]).0, EXIT_USAGE);
    }

    #[test]
    fn resource_errors_exit_3() {
        let (code, _, err) = run_str(&["--mem-budget", "2560", "ball", "--radius", "4"]);
        assert_eq!(code, EXIT_RESOURCE);
        assert!(err.contains("frontier"));
    }

    #[test]
    fn len_word_example() {
        let (code, out, _) = run_str(&["--d", "2", "--q", "2", "len", "--word", "u1:1 u1:1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["f"], 2);
        assert_eq!(v["geodesic_length"], 2);
    }

    #[test]
    fn ball_csv() {
        let (code, out, _) = run_str(&["--d", "3", "--q", "2", "ball", "--radius", "1"]);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "# schema_version=1\nradius,sphere,ball\n0,1,1\n1,12,13\n"
        );
    }
}
