//! The `dsp` command line: solve, verify, bench, gen and render.
//!
//! Exit codes: 0 success, 1 validation failure (or an input outside an
//! algorithm's preconditions), 2 usage or parse error, 3 internal defect.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baseline::two_approx;
use crate::bounds::lower_bound;
use crate::containers::{five_thirds_with, ContainerMode, FiveThirdsOptions};
use crate::error::DspError;
use crate::exact::{exact_dsp, exact_gsp, OracleBudget};
use crate::fixtures::{hardness_instance, named_instance, random_instance, GeneratorParams, NAMES};
use crate::geom::GeomPlacement;
use crate::model::{validate_schedule, Instance, Schedule, SolveReport};
use crate::profile::DemandProfile;
use crate::ptas::{ptas_short_with, PtasOptions};
use crate::ratio::{self, parse_rational, Rational};
use crate::square::{square_dsp_with, SquareOptions};

#[derive(Debug, Parser)]
#[command(name = "dsp", about = "Demand strip packing solvers and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    TwoApprox,
    FiveThirds,
    PtasShort,
    Square,
    ExactDsp,
    ExactGsp,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::TwoApprox => "two-approx",
            Algo::FiveThirds => "five-thirds",
            Algo::PtasShort => "ptas-short",
            Algo::Square => "square",
            Algo::ExactDsp => "exact-dsp",
            Algo::ExactGsp => "exact-gsp",
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "two-approx")]
    algo: Algo,
    /// Accuracy parameter, e.g. `1/10` or `0.1`.
    #[arg(long)]
    eps: Option<String>,
    /// Aspect ratio bound for `square`.
    #[arg(long, default_value = "1")]
    beta: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Container mode for `five-thirds`: guided or enumerate.
    #[arg(long, default_value = "guided")]
    mode: String,
    /// Exact oracle budget, `nodes=N,ms=N,w=N,n=N`.
    #[arg(long)]
    budget: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance; prints the schedule and report as JSON.
    Solve {
        /// Instance JSON file, or a bundled name (fig1a, fig1b).
        instance: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a schedule; exit 0 iff it is complete, valid and within `--max-peak`.
    Verify {
        instance: String,
        schedule: PathBuf,
        #[arg(long)]
        max_peak: Option<i64>,
    },
    /// Run algorithms over instances and print CSV.
    Bench {
        /// Instance files or bundled names.
        instances: Vec<String>,
        /// Comma-separated algorithms.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "two-approx,five-thirds")]
        algo: Vec<Algo>,
        /// Also run this many generated instances, seeds `seed..seed+N`.
        #[arg(long, default_value_t = 0)]
        random: u64,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, default_value = "1")]
        beta: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "guided")]
        mode: String,
        #[arg(long)]
        budget: Option<String>,
        /// Skip the exact column.
        #[arg(long)]
        no_exact: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an instance.
    Gen {
        /// Task count, `k` or `lo..hi`.
        #[arg(long, default_value = "1..9")]
        n: String,
        #[arg(long, default_value = "1..12")]
        width: String,
        #[arg(long, default_value = "1..12")]
        task_width: String,
        #[arg(long, default_value = "0..6")]
        task_height: String,
        /// Aspect ratio bound `h <= w <= beta h`; `1` gives squares.
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Build the balanced-partition reduction for these values instead.
        #[arg(long, value_delimiter = ',')]
        hardness: Vec<i64>,
        #[arg(long, default_value_t = 4)]
        inv_eps: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the demand profile (and tasks) as SVG.
    Render {
        instance: String,
        schedule: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
struct Exit(i32, String);

impl Exit {
    fn usage(m: impl Into<String>) -> Self {
        Exit(2, m.into())
    }
    fn invalid(m: impl Into<String>) -> Self {
        Exit(1, m.into())
    }
}

impl From<DspError> for Exit {
    fn from(e: DspError) -> Self {
        Exit(if e.is_defect() { 3 } else { 1 }, e.to_string())
    }
}

/// Runs the CLI with process stdout and stderr.
pub fn run_cli(argv: &[String]) -> i32 {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_cli_with(argv, &mut out, &mut err)
}

/// Runs the CLI; `argv[0]` is the program name.
pub fn run_cli_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(Exit(0, _)) => 0,
        Err(Exit(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), Exit> {
    match cmd {
        Command::Solve { instance, solver, out: path } => {
            let inst = load_instance(&instance)?;
            let solved = solve(&inst, &solver)?;
            let text = serde_json::to_string_pretty(&solved).expect("serialisable");
            emit(out, path.as_deref(), &text)
        }
        Command::Verify { instance, schedule, max_peak } => {
            let inst = load_instance(&instance)?;
            let sched = load_schedule(&schedule)?.0;
            let peak = validate_schedule(&inst, &sched, true).map_err(|e| Exit::invalid(e.to_string()))?;
            if let Some(m) = max_peak {
                if peak > m {
                    return Err(Exit::invalid(format!("peak {peak} exceeds --max-peak {m}")));
                }
            }
            writeln!(out, "valid: peak {peak}").map_err(io)
        }
        Command::Bench { instances, algo, random, eps, beta, seed, mode, budget, no_exact, jobs, out: path } => {
            let mut named: Vec<(String, Instance)> =
                instances.iter().map(|s| Ok((label(s), load_instance(s)?))).collect::<Result<_, Exit>>()?;
            for k in 0..random {
                let p = GeneratorParams { seed: seed + k, ..GeneratorParams::default() };
                named.push((format!("random-{}", seed + k), random_instance(&p)?));
            }
            let solver =
                |a: Algo| SolverArgs { algo: a, eps: eps.clone(), beta: beta.clone(), seed, mode: mode.clone(), budget: budget.clone() };
            let budget = parse_budget(&budget)?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Exit(3, e.to_string()))?;
            let rows: Vec<Result<BenchRow, Exit>> = pool.install(|| {
                named
                    .par_iter()
                    .flat_map(|(name, inst)| {
                        let exact = if no_exact || !budget.admits(inst) {
                            None
                        } else {
                            let r = exact_dsp(inst, &budget);
                            r.proven_optimal.then_some(r.peak)
                        };
                        algo.par_iter()
                            .map(|a| match solve(inst, &solver(*a)) {
                                Ok(solved) => Ok(BenchRow::new(name, &solved.report, exact, seed)),
                                Err(Exit(1, msg)) => Ok(BenchRow::skipped(name, *a, inst, exact, seed, &msg)),
                                Err(e) => Err(e),
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect()
            });
            let mut rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
            rows.sort_by(|a, b| (&a.instance, &a.algo).cmp(&(&b.instance, &b.algo)));
            let mut text = String::from(BenchRow::HEADER);
            text.push('\n');
            for r in &rows {
                text.push_str(&r.csv());
                text.push('\n');
            }
            emit(out, path.as_deref(), text.trim_end())
        }
        Command::Gen { n, width, task_width, task_height, beta, seed, hardness, inv_eps, out: path } => {
            let inst = if hardness.is_empty() {
                let aspect = match beta {
                    Some(b) => {
                        let r = parse_rational(&b).map_err(|e| Exit::usage(e.to_string()))?;
                        Some((*r.numer() as i64, *r.denom() as i64))
                    }
                    None => None,
                };
                let params = GeneratorParams {
                    n: parse_range(&n)?.map_both(|v| v as usize),
                    width: parse_range(&width)?.0,
                    task_width: parse_range(&task_width)?.0,
                    task_height: parse_range(&task_height)?.0,
                    aspect,
                    seed,
                };
                random_instance(&params)?
            } else {
                hardness_instance(&hardness, inv_eps)?.instance
            };
            emit(out, path.as_deref(), &inst.to_json())
        }
        Command::Render { instance, schedule, out: path } => {
            let inst = load_instance(&instance)?;
            let (sched, placement) = match schedule {
                Some(p) => load_schedule(&p)?,
                None => (Schedule::new(), None),
            };
            validate_schedule(&inst, &sched, false).map_err(|e| Exit::invalid(e.to_string()))?;
            let svg = render_svg(&inst, &sched, placement.as_ref());
            std::fs::write(&path, svg).map_err(io)?;
            writeln!(out, "wrote {}", path.display()).map_err(io)
        }
    }
}

fn io(e: std::io::Error) -> Exit {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        return Exit(0, String::new());
    }
    Exit(3, format!("i/o: {e}"))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), Exit> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(io),
        None => writeln!(out, "{text}").map_err(io),
    }
}

fn label(s: &str) -> String {
    Path::new(s).file_stem().map_or_else(|| s.to_string(), |f| f.to_string_lossy().into_owned())
}

fn load_instance(spec: &str) -> Result<Instance, Exit> {
    let path = Path::new(spec);
    if !path.exists() && NAMES.contains(&spec) {
        return Ok(named_instance(spec)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("cannot read {spec}: {e}")))?;
    // Syntax errors are usage errors; well-formed JSON describing an
    // invalid instance is a validation failure.
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Exit::usage(format!("{spec}: malformed JSON: {e}")))?;
    let raw: crate::model::RawInstance = serde_json::from_value(value).map_err(|e| Exit::usage(format!("{spec}: not an instance: {e}")))?;
    crate::model::validate_instance(raw).map_err(|e| Exit::invalid(format!("{spec}: {e}")))
}

/// Accepts plain schedules, `solve` output, and `exact-gsp` output with a
/// placement.
fn load_schedule(path: &Path) -> Result<(Schedule, Option<GeomPlacement>), Exit> {
    let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Exit::usage(format!("{}: malformed JSON: {e}", path.display())))?;
    if value.get("schedule").is_some() {
        let solved: Solved = serde_json::from_value(value).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
        return Ok((solved.schedule, solved.placement));
    }
    let s = serde_json::from_value(value).map_err(|e| Exit::usage(format!("{}: not a schedule: {e}", path.display())))?;
    Ok((s, None))
}

fn parse_budget(b: &Option<String>) -> Result<OracleBudget, Exit> {
    match b {
        Some(s) => OracleBudget::parse(s).map_err(Exit::usage),
        None => Ok(OracleBudget::default()),
    }
}

struct Range(pub (i64, i64));

impl Range {
    fn map_both<T>(self, f: impl Fn(i64) -> T) -> (T, T) {
        (f(self.0 .0), f(self.0 .1))
    }
}

fn parse_range(s: &str) -> Result<Range, Exit> {
    let bad = || Exit::usage(format!("`{s}` is not `k` or `lo..hi`"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    Ok(Range((lo, hi)))
}

/// A solve result as written by `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solved {
    pub schedule: Schedule,
    pub report: SolveReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<GeomPlacement>,
}

fn parse_eps(eps: &Option<String>, default: Rational) -> Result<Rational, Exit> {
    match eps {
        Some(s) => parse_rational(s).map_err(|e| Exit::usage(e.to_string())),
        None => Ok(default),
    }
}

fn solve(inst: &Instance, args: &SolverArgs) -> Result<Solved, Exit> {
    let clock = Instant::now();
    let (schedule, report, placement) = match args.algo {
        Algo::TwoApprox => {
            let (s, r) = two_approx(inst)?;
            (s, r, None)
        }
        Algo::FiveThirds => {
            let mut o = FiveThirdsOptions::new(parse_eps(&args.eps, ratio::rat(1, 10))?);
            o.mode = args.mode.parse::<ContainerMode>().map_err(Exit::usage)?;
            if args.budget.is_some() {
                o.budget = parse_budget(&args.budget)?;
            }
            let (s, r) = five_thirds_with(inst, &o)?;
            (s, r, None)
        }
        Algo::PtasShort => {
            let mut o = PtasOptions::new(parse_eps(&args.eps, ratio::rat(1, 5))?);
            o.seed = args.seed;
            let (s, r) = ptas_short_with(inst, &o)?;
            (s, r, None)
        }
        Algo::Square => {
            let mut o = SquareOptions::new(parse_rational(&args.beta).map_err(|e| Exit::usage(e.to_string()))?);
            o.eps = args.eps.as_ref().map(|_| parse_eps(&args.eps, ratio::rat(1, 10))).transpose()?;
            if args.budget.is_some() {
                o.budget = parse_budget(&args.budget)?;
            }
            let (s, r) = square_dsp_with(inst, &o)?;
            (s, r, None)
        }
        Algo::ExactDsp => {
            let r = exact_dsp(inst, &parse_budget(&args.budget)?);
            let report = SolveReport::new("exact-dsp", r.peak, lower_bound(inst).value, clock.elapsed())
                .with_param("proven_optimal", r.proven_optimal)
                .with_param("nodes", r.nodes)
                .with_param("proven_lower_bound", r.lower_bound)
                .with_certified(if r.proven_optimal { "optimal" } else { "feasible; optimum at least proven_lower_bound" });
            (r.solution, report, None)
        }
        Algo::ExactGsp => {
            let r = exact_gsp(inst, &parse_budget(&args.budget)?);
            let schedule: Schedule = r.solution.positions.iter().map(|(&id, &(x, _))| (id, x)).collect();
            let height = r.peak;
            let report = SolveReport::new("exact-gsp", height, lower_bound(inst).value, clock.elapsed())
                .with_param("proven_optimal", r.proven_optimal)
                .with_param("nodes", r.nodes)
                .with_param("packing_height", height)
                .with_param("proven_lower_bound", r.lower_bound)
                .with_certified(if r.proven_optimal { "optimal packing height" } else { "feasible packing" });
            (schedule, report, Some(r.solution))
        }
    };
    // Every emitted schedule re-validates with the peak its report states,
    // except GSP, whose report carries the packing height.
    let peak = validate_schedule(inst, &schedule, true).map_err(|e| Exit(3, format!("solver output invalid: {e}")))?;
    if args.algo != Algo::ExactGsp && peak != report.peak {
        return Err(Exit(3, format!("report peak {} differs from schedule peak {peak}", report.peak)));
    }
    Ok(Solved { schedule, report, placement })
}

/// One CSV row of `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub algo: String,
    /// `None` when the instance is outside the algorithm's preconditions.
    pub peak: Option<i64>,
    pub lb: i64,
    pub exact: Option<i64>,
    /// `peak / exact` when the optimum is known, else `peak / lb`.
    pub ratio: Option<f64>,
    pub ms: f64,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
}

impl BenchRow {
    pub const HEADER: &'static str = "instance,algo,peak,lb,exact,ratio,ms,seed,params";

    fn new(instance: &str, report: &SolveReport, exact: Option<i64>, seed: u64) -> Self {
        let base = exact.unwrap_or(report.lower_bound);
        let ratio = if base > 0 { report.peak as f64 / base as f64 } else { 1.0 };
        BenchRow {
            instance: instance.to_string(),
            algo: report.algorithm.clone(),
            peak: Some(report.peak),
            lb: report.lower_bound,
            exact,
            ratio: Some(ratio),
            ms: report.wall_ms,
            seed,
            params: report.params.clone(),
        }
    }

    fn skipped(instance: &str, algo: Algo, inst: &Instance, exact: Option<i64>, seed: u64, why: &str) -> Self {
        BenchRow {
            instance: instance.to_string(),
            algo: algo.name().to_string(),
            peak: None,
            lb: lower_bound(inst).value,
            exact,
            ratio: None,
            ms: 0.0,
            seed,
            params: BTreeMap::from([("skipped".to_string(), why.to_string())]),
        }
    }

    pub fn csv(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{},{},{},{},{},{},{:.3},{},{}",
            self.instance,
            self.algo,
            self.peak.map_or(String::new(), |p| p.to_string()),
            self.lb,
            self.exact.map_or(String::new(), |e| e.to_string()),
            self.ratio.map_or(String::new(), |r| format!("{r:.4}")),
            self.ms,
            self.seed,
            params.join(";").replace(',', " ")
        )
    }
}

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7"];

/// SVG with one unit per edge and per demand unit. Tasks are stacked per
/// edge in id order for display; the demand profile is drawn as a step
/// line on top. With a placement the rectangles are drawn at their packed
/// positions instead.
pub fn render_svg(instance: &Instance, schedule: &Schedule, placement: Option<&GeomPlacement>) -> String {
    const U: i64 = 24;
    let w = instance.width();
    let profile = DemandProfile::build(instance, schedule);
    let top = placement.map_or(0, |p| p.box_h).max(profile.peak()).max(1);
    let (pw, ph) = (w * U + 2 * U, top * U + 2 * U);
    let y = |v: i64| ph - U - v * U;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{pw}" height="{ph}" viewBox="0 0 {pw} {ph}">"#);
    let _ = writeln!(s, r#"<rect width="{pw}" height="{ph}" fill="white"/>"#);
    let color = |id: u64| PALETTE[(id % PALETTE.len() as u64) as usize];
    match placement {
        Some(p) => {
            for t in instance.tasks() {
                if let Some(&(px, py)) = p.positions.get(&t.id) {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="black"><title>task {}</title></rect>"#,
                        U + px * U,
                        y(py + t.height),
                        t.width * U,
                        t.height * U,
                        color(t.id),
                        t.id
                    );
                }
            }
        }
        None => {
            // Per edge, stack covering tasks by id; merge equal offsets
            // across consecutive edges into one rectangle.
            let mut level = vec![0i64; w as usize];
            for t in instance.tasks() {
                let Some(start) = schedule.start(t.id) else { continue };
                let mut e = start;
                while e < start + t.width {
                    let base = level[e as usize];
                    let mut f = e;
                    while f < start + t.width && level[f as usize] == base {
                        level[f as usize] += t.height;
                        f += 1;
                    }
                    let _ = writeln!(
                        s,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="black"><title>task {}</title></rect>"#,
                        U + e * U,
                        y(base + t.height),
                        (f - e) * U,
                        t.height * U,
                        color(t.id),
                        t.id
                    );
                    e = f;
                }
            }
        }
    }
    let mut points = Vec::new();
    for (k, &(start, d)) in profile.runs().iter().enumerate() {
        let end = profile.runs().get(k + 1).map_or(w, |r| r.0);
        points.push(format!("{},{}", U + start * U, y(d)));
        points.push(format!("{},{}", U + end * U, y(d)));
    }
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="3"/>"#, points.join(" "));
    let _ = writeln!(s, r#"<line x1="{U}" y1="{0}" x2="{1}" y2="{0}" stroke="gray"/>"#, y(0), U + w * U);
    let _ = writeln!(s, r#"<text x="{U}" y="{}" font-size="14">peak {}</text>"#, U - 6, profile.peak());
    s.push_str("</svg>\n");
    s
}

/// `json!` helper kept for callers that want a compact summary line.
pub fn summary(report: &SolveReport) -> serde_json::Value {
    json!({ "algorithm": report.algorithm, "peak": report.peak, "lb": report.lower_bound, "ratio": report.ratio })
}
