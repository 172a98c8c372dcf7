use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linf_ramsey::baton::{anchor_set_one_alpha, extract_general_baton, extract_unit_baton, GridSubset};
use linf_ramsey::certificate::{
    anchors_certificate, coloring_certificate, copy_certificate, cover_certificate, periodic_certificate,
    validate_certificate,
};
use linf_ramsey::chroma::{grid_coloring, DEFAULT_BUDGET};
use linf_ramsey::colorings::{
    avoidance_coloring, cube_tiling_coloring, pigeonhole_lower_bound, upper_bound_value, AvoidanceMode,
    UpperBoundVariant,
};
use linf_ramsey::dirichlet::{build_anchor_sequence, verify_anchor_sequence, Construction};
use linf_ramsey::metric::{find_copies_with, frechet_embed, Baton, CopySearch, FiniteMetricSpace, PointSet};
use linf_ramsey::rational::{parse_rational, parse_rational_list, Rational};
use linf_ramsey::torus::{cn_table, exact_cover, greedy_cover, randomized_cover, CoverInstance};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "linf-ramsey", version, about = "Exact tools for finite metric spaces in the maximum norm")]
struct Cli {
    /// Write the result to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a metric space isometrically via its distance-matrix rows.
    Embed {
        #[arg(long)]
        metric: PathBuf,
    },
    /// List the copies of a metric space inside a point set.
    Copies {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        /// Report one copy per distinct support.
        #[arg(long)]
        supports: bool,
    },
    /// Extract a baton from a dense subset of a grid.
    Extract {
        /// Unit baton length; the subset must lie in [k]_0^n.
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        subset: PathBuf,
        /// Baton steps, e.g. `1,3/2`; the subset must lie in A^n for its anchor set A.
        #[arg(long)]
        baton: Option<String>,
        #[arg(long, value_enum, requires = "baton")]
        anchor_set: Option<AnchorSetKind>,
    },
    /// Build and verify the anchor sequence of a baton.
    Anchors {
        #[arg(long)]
        steps: String,
        /// Run the full construction even for integer steps.
        #[arg(long)]
        faithful: bool,
    },
    /// A periodic coloring of R^n avoiding a metric space.
    Color {
        #[arg(long, required_unless_present = "cube")]
        metric: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "u2")]
        variant: Variant,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// The 2^n-class cube tiling, which avoids distance 1.
        #[arg(long, conflicts_with = "metric")]
        cube: bool,
        /// Multiplier making diameter and threshold integral (u2).
        #[arg(long)]
        scale: Option<String>,
        /// Box side (u1); defaults just below the diameter.
        #[arg(long)]
        side: Option<String>,
        /// Gap between boxes (u1); defaults just above the threshold.
        #[arg(long)]
        gap: Option<String>,
    },
    /// Lower and upper bounds on the colors avoiding the unit baton B_k, as CSV.
    Bounds {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact chromatic number of a grid avoiding a metric space.
    Chi {
        /// Grid `k,n` for [k]_0^n.
        #[arg(long)]
        grid: String,
        /// Defaults to the unit baton B_k.
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long, env = "MAXNORM_BUDGET", default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Append a row to this fixtures CSV.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Metric identifier for the fixtures row; defaults to `B<k>` or the metric file stem.
        #[arg(long)]
        metric_id: Option<String>,
    },
    /// Cover the torus Z_m^n by translates of the cube {0..d-1}^n.
    Cover(CoverArgs),
    /// Recheck a certificate produced by any command.
    Validate { path: PathBuf },
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct CoverArgs {
    #[command(subcommand)]
    table: Option<CoverCommand>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, group = "method")]
    exact: bool,
    #[arg(long, group = "method")]
    greedy: bool,
    #[arg(long, group = "method")]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "MAXNORM_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

#[derive(Subcommand)]
enum CoverCommand {
    /// Bounds on covers of Z_3^n by {0,1}^n for n = 1..max, as CSV.
    Table {
        #[arg(long)]
        max: u32,
        #[arg(long, env = "MAXNORM_BUDGET", default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorSetKind {
    /// The explicit set for B(1, alpha), alpha > 1.
    OneAlpha,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    /// Boxes slightly smaller than the diameter, gaps slightly above the threshold.
    U1,
    /// Integer boxes and gaps with a random cover of the discrete torus.
    U2,
}

enum Failure {
    /// Unreadable or malformed input, exit 1.
    Input(String),
    /// A precondition of the requested operation, exit 2.
    Precondition(String),
}

impl From<linf_ramsey::Error> for Failure {
    fn from(e: linf_ramsey::Error) -> Self {
        Failure::Precondition(e.to_string())
    }
}

/// Exit status after the output is written.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Done,
    /// The certificate failed validation, exit 1.
    Invalid,
    /// The search stopped early; the result carries `optimal = false`, exit 3.
    BudgetExhausted,
}

struct Output {
    text: String,
    status: Status,
}

impl Output {
    fn json(v: &Value) -> Self {
        let mut text = serde_json::to_string_pretty(v).expect("JSON serializes");
        text.push('\n');
        Output {
            text,
            status: Status::Done,
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Run<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_metric(path: &Path) -> Run<FiniteMetricSpace> {
    FiniteMetricSpace::from_json_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_points(path: &Path) -> Run<PointSet> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_json(path: &Path) -> Run<Value> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_baton(flag: &str, steps: &str) -> Run<Baton> {
    let steps = parse_rational_list(steps).map_err(|e| Failure::Input(format!("--{flag}: {e}")))?;
    Ok(Baton::new(steps)?)
}

fn parse_opt_rational(flag: &str, v: &Option<String>) -> Run<Option<Rational>> {
    v.as_deref()
        .map(|s| parse_rational(s).map_err(|e| Failure::Input(format!("--{flag}: {e}"))))
        .transpose()
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8")
}

fn embed(metric: &Path) -> Run<Output> {
    let space = read_metric(metric)?;
    let (points, emb) = frechet_embed(&space);
    Ok(Output::json(&copy_certificate(&space, &points, &emb)))
}

fn copies(metric: &Path, points: &Path, limit: Option<usize>, supports: bool) -> Run<Output> {
    let space = read_metric(metric)?;
    let pts = read_points(points)?;
    let found = find_copies_with(
        &space,
        &pts,
        &CopySearch {
            limit,
            dedup_supports: supports,
        },
    );
    let list: Vec<Value> = found
        .iter()
        .map(|c| {
            let image: Vec<Vec<String>> = c
                .image(&pts)
                .iter()
                .map(|p| p.iter().map(linf_ramsey::rational::format_rational).collect())
                .collect();
            json!({ "indices": c.indices, "points": image })
        })
        .collect();
    Ok(Output::json(&json!({ "count": list.len(), "copies": list })))
}

fn extract(
    k: Option<u32>,
    n: Option<usize>,
    subset: &Path,
    baton: Option<&str>,
    anchor_set: Option<AnchorSetKind>,
) -> Run<Output> {
    let pts = read_points(subset)?;
    if let Some(n) = n.filter(|&n| n != pts.dim()) {
        return Err(Failure::Precondition(format!("--n {n} but the subset has dimension {}", pts.dim())));
    }
    match baton {
        None => {
            let k = k.ok_or_else(|| Failure::Precondition("--k is required without --baton".into()))?;
            let grid = GridSubset::from_point_set(&pts, k)?;
            let emb = extract_unit_baton(&grid)?;
            let space = FiniteMetricSpace::unit_baton(k as usize);
            Ok(Output::json(&copy_certificate(&space, &grid.to_point_set(), &emb)))
        }
        Some(steps) => {
            let baton = parse_baton("baton", steps)?;
            if let Some(k) = k.filter(|&k| k as usize != baton.k()) {
                return Err(Failure::Precondition(format!("--k {k} but the baton has {} steps", baton.k())));
            }
            let anchors = match anchor_set {
                Some(AnchorSetKind::OneAlpha) => {
                    let s = baton.steps();
                    if s.len() != 2 || s[0] != Rational::from_integer(1.into()) {
                        return Err(Failure::Precondition("one-alpha needs a baton 1,alpha".into()));
                    }
                    anchor_set_one_alpha(&s[1])?
                }
                None => build_anchor_sequence(&baton, Construction::Auto).anchor_set()?,
            };
            let emb = extract_general_baton(&pts, &baton, &anchors)?;
            Ok(Output::json(&copy_certificate(&baton.metric(), &pts, &emb)))
        }
    }
}

fn anchors(steps: &str, faithful: bool) -> Run<Output> {
    let baton = parse_baton("steps", steps)?;
    let mode = if faithful { Construction::Faithful } else { Construction::Auto };
    let seq = build_anchor_sequence(&baton, mode);
    let report = verify_anchor_sequence(&seq, &baton);
    Ok(Output::json(&anchors_certificate(&baton, &seq, &report)))
}

struct ColorOpts<'a> {
    metric: Option<&'a Path>,
    n: usize,
    variant: Variant,
    seed: u64,
    cube: bool,
    scale: Option<Rational>,
    side: Option<Rational>,
    gap: Option<Rational>,
}

fn color(o: ColorOpts) -> Run<Output> {
    if o.cube {
        let space = FiniteMetricSpace::unit_baton(1);
        let col = cube_tiling_coloring(o.n)?;
        return Ok(Output::json(&periodic_certificate(&space, &col, None)));
    }
    let space = read_metric(o.metric.expect("clap requires --metric without --cube"))?;
    let mode = match o.variant {
        Variant::U1 => {
            if o.scale.is_some() {
                warn("--scale is ignored by the u1 variant");
            }
            AvoidanceMode::Asymptotic {
                side: o.side,
                gap: o.gap,
            }
        }
        Variant::U2 => {
            if o.side.is_some() || o.gap.is_some() {
                warn("--side and --gap are ignored by the u2 variant");
            }
            AvoidanceMode::Randomized {
                scale: o.scale.unwrap_or_else(|| Rational::from_integer(1.into())),
            }
        }
    };
    let res = avoidance_coloring(&space, o.n, &mode, o.seed)?;
    for w in &res.certificate.warnings {
        warn(w);
    }
    if !res.certificate.holds() {
        warn("the structural certificate does not hold for these box and gap sizes");
    }
    if res.certificate.cover.random.as_ref().is_some_and(|r| !r.within_bound) {
        warn("no seed within the retry cap met the expected cover size");
    }
    Ok(Output::json(&periodic_certificate(&space, &res.coloring, Some(&res.certificate.cover))))
}

fn bounds(k: u32, n: u32, seed: u64) -> Run<Output> {
    let lower = pigeonhole_lower_bound(k, n)?;
    let trivial = linf_ramsey::rational::int(2).pow(n as i32).to_integer();
    let upper = if k >= 2 {
        match upper_bound_value(&FiniteMetricSpace::unit_baton(k as usize), n, UpperBoundVariant::U2, seed) {
            Ok(r) => r.value.map_or(trivial.clone(), |v| trivial.clone().min(v.into())),
            Err(e) => {
                warn(&format!("cover bound unavailable ({e}); using 2^n"));
                trivial
            }
        }
    } else {
        trivial
    };
    Ok(Output {
        text: csv_text(&["n", "lower", "upper"], &[vec![n.to_string(), lower.to_string(), upper.to_string()]]),
        status: Status::Done,
    })
}

fn parse_grid(s: &str) -> Run<(u32, usize)> {
    let bad = || Failure::Input(format!("--grid expects `k,n`, got `{s}`"));
    let (k, n) = s.split_once(',').ok_or_else(bad)?;
    Ok((k.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?))
}

fn append_fixture(path: &Path, row: &[String]) -> Run<()> {
    let fresh = !path.exists() || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Failure::Input(format!("{}: {e}", path.display()));
    if fresh {
        w.write_record(["k", "n", "metric_id", "chi", "lower", "upper"]).map_err(io)?;
    }
    w.write_record(row).map_err(io)?;
    w.flush().map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn chi(grid: &str, metric: Option<&Path>, budget: u64, fixtures: Option<&Path>, metric_id: Option<String>) -> Run<Output> {
    let (k, n) = parse_grid(grid)?;
    let space = match metric {
        Some(p) => read_metric(p)?,
        None => FiniteMetricSpace::unit_baton(k as usize),
    };
    let res = grid_coloring(k, n, &space, budget)?;
    let cert = &res.certificate;
    if !cert.optimal {
        warn(&format!(
            "search budget of {budget} nodes exhausted; chi lies in [{}, {}]",
            cert.lower_bound, cert.color_count
        ));
    }
    if let Some(path) = fixtures {
        let id = metric_id.unwrap_or_else(|| match metric {
            Some(p) => p.file_stem().map_or("metric".into(), |s| s.to_string_lossy().into_owned()),
            None => format!("B{k}"),
        });
        let chi = if cert.optimal { cert.color_count.to_string() } else { String::new() };
        append_fixture(
            path,
            &[
                k.to_string(),
                n.to_string(),
                id,
                chi,
                cert.lower_bound.to_string(),
                cert.color_count.to_string(),
            ],
        )?;
    }
    let mut out = Output::json(&coloring_certificate(&space, &PointSet::grid(k, n), cert));
    if !cert.optimal {
        out.status = Status::BudgetExhausted;
    }
    Ok(out)
}

fn cover(a: CoverArgs) -> Run<Output> {
    if let Some(CoverCommand::Table { max, budget }) = a.table {
        let rows: Vec<Vec<String>> = cn_table(max, budget)?
            .iter()
            .map(|r| vec![r.n.to_string(), r.lower.to_string(), r.upper.to_string(), r.exact.to_string()])
            .collect();
        let exhausted = rows.iter().any(|r| r[3] == "false");
        return Ok(Output {
            text: csv_text(&["n", "lower", "upper", "exact"], &rows),
            status: if exhausted { Status::BudgetExhausted } else { Status::Done },
        });
    }
    let (Some(m), Some(d), Some(n)) = (a.m, a.d, a.n) else {
        return Err(Failure::Precondition("cover needs --m, --d and --n".into()));
    };
    let inst = CoverInstance::new(m, d, n)?;
    let sol = if a.greedy {
        greedy_cover(&inst)?
    } else if a.random {
        randomized_cover(&inst, a.seed)?
    } else {
        exact_cover(&inst, a.budget)?
    };
    if sol.random.as_ref().is_some_and(|r| !r.within_bound) {
        warn("no seed within the retry cap met the expected cover size");
    }
    let exhausted = !a.greedy && !a.random && !sol.optimal;
    if exhausted {
        warn(&format!("search budget of {} nodes exhausted; best cover has {} translates", a.budget, sol.size));
    }
    let mut out = Output::json(&cover_certificate(&sol));
    if exhausted {
        out.status = Status::BudgetExhausted;
    }
    Ok(out)
}

fn validate(path: &Path) -> Run<Output> {
    let report = validate_certificate(&read_json(path)?);
    let mut out = Output::json(&serde_json::to_value(&report).expect("report serializes"));
    for f in report.failures() {
        eprintln!("failed {}: {}", f.name, f.detail);
    }
    for u in &report.unchecked {
        warn(&format!("not rechecked: {u}"));
    }
    if !report.passed() {
        out.status = Status::Invalid;
    }
    Ok(out)
}

fn run(cli: Cli) -> Run<Output> {
    match cli.command {
        Command::Embed { metric } => embed(&metric),
        Command::Copies {
            metric,
            points,
            limit,
            supports,
        } => copies(&metric, &points, limit, supports),
        Command::Extract {
            k,
            n,
            subset,
            baton,
            anchor_set,
        } => extract(k, n, &subset, baton.as_deref(), anchor_set),
        Command::Anchors { steps, faithful } => anchors(&steps, faithful),
        Command::Color {
            metric,
            n,
            variant,
            seed,
            cube,
            scale,
            side,
            gap,
        } => color(ColorOpts {
            metric: metric.as_deref(),
            n,
            variant,
            seed,
            cube,
            scale: parse_opt_rational("scale", &scale)?,
            side: parse_opt_rational("side", &side)?,
            gap: parse_opt_rational("gap", &gap)?,
        }),
        Command::Bounds { k, n, seed } => bounds(k, n, seed),
        Command::Chi {
            grid,
            metric,
            budget,
            fixtures,
            metric_id,
        } => chi(&grid, metric.as_deref(), budget, fixtures.as_deref(), metric_id),
        Command::Cover(a) => cover(a),
        Command::Validate { path } => validate(&path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_path = cli.out.clone();
    match run(cli) {
        Ok(out) => {
            let written = match &out_path {
                Some(p) => fs::write(p, &out.text).map_err(|e| format!("{}: {e}", p.display())),
                None => std::io::stdout().write_all(out.text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(match out.status {
                Status::Done => 0,
                Status::Invalid => 1,
                Status::BudgetExhausted => 3,
            })
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Precondition(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
