//! Machine-checkable certificates and their validator.
//!
//! Every certificate is a JSON object with a `kind` field: `copy`,
//! `coloring`, `periodic_coloring`, `cover` or `anchors`. The validator
//! recomputes each claim from the raw JSON with its own brute-force checks and
//! calls none of the searches or constructions that produce certificates.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chroma::ColoringCertificate;
use crate::colorings::PeriodicColoring;
use crate::dirichlet::{AnchorSequence, VerificationReport};
use crate::metric::{Baton, CopyEmbedding, FiniteMetricSpace, PointSet};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::torus::CoverSolution;

fn rational_row(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(|r| Value::String(format_rational(r))).collect())
}

fn rational_matrix(m: &[Vec<Rational>]) -> Value {
    Value::Array(m.iter().map(|r| rational_row(r)).collect())
}

/// The image of a copy of `space` in `points`.
pub fn copy_certificate(space: &FiniteMetricSpace, points: &PointSet, copy: &CopyEmbedding) -> Value {
    json!({
        "kind": "copy",
        "metric": rational_matrix(space.matrix()),
        "points": rational_matrix(&copy.image(points)),
        "distances_checked": copy.verify(points).is_ok(),
    })
}

pub fn coloring_certificate(space: &FiniteMetricSpace, points: &PointSet, cert: &ColoringCertificate) -> Value {
    json!({
        "kind": "coloring",
        "metric": rational_matrix(space.matrix()),
        "points": rational_matrix(points.points()),
        "colors": cert.colors,
        "color_count": cert.color_count,
        "optimal": cert.optimal,
        "lower_bound": cert.lower_bound,
        "lower_bound_witness": cert.lower_bound_witness,
    })
}

/// A periodic coloring avoiding `space`; `cover` is the torus cover behind
/// the classes, when there is one.
pub fn periodic_certificate(space: &FiniteMetricSpace, coloring: &PeriodicColoring, cover: Option<&CoverSolution>) -> Value {
    let mut v = serde_json::to_value(coloring).expect("coloring serializes");
    v["kind"] = json!("periodic_coloring");
    v["metric"] = rational_matrix(space.matrix());
    v["class_count"] = json!(coloring.class_count());
    if let Some(c) = cover {
        v["cover"] = cover_certificate(c);
    }
    v
}

pub fn cover_certificate(sol: &CoverSolution) -> Value {
    let mut v = serde_json::to_value(sol).expect("cover serializes");
    v["kind"] = json!("cover");
    v
}

pub fn anchors_certificate(baton: &Baton, seq: &AnchorSequence, report: &VerificationReport) -> Value {
    let mut v = seq.to_json();
    v["kind"] = json!("anchors");
    v["steps"] = rational_row(baton.steps());
    v["verification"] = serde_json::to_value(report).expect("report serializes");
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub kind: String,
    pub checks: Vec<Check>,
    /// Claims too large to recheck here; they do not fail the report.
    pub unchecked: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.ok).collect()
    }
}

type Fail = String;
type Res<T> = std::result::Result<T, Fail>;

struct Validator {
    report: ValidationReport,
}

impl Validator {
    fn check(&mut self, name: &str, result: Res<()>) {
        let (ok, detail) = match result {
            Ok(()) => (true, String::new()),
            Err(e) => (false, e),
        };
        self.report.checks.push(Check {
            name: name.to_string(),
            ok,
            detail,
        });
    }

    fn unchecked(&mut self, what: impl Into<String>) {
        self.report.unchecked.push(what.into());
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Res<&'a Value> {
    v.get(key).ok_or_else(|| format!("missing field `{key}`"))
}

fn as_u64(v: &Value, key: &str) -> Res<u64> {
    field(v, key)?.as_u64().ok_or_else(|| format!("`{key}` must be a nonnegative integer"))
}

fn as_bool(v: &Value, key: &str) -> Res<bool> {
    field(v, key)?.as_bool().ok_or_else(|| format!("`{key}` must be a boolean"))
}

fn as_str<'a>(v: &'a Value, key: &str) -> Res<&'a str> {
    field(v, key)?.as_str().ok_or_else(|| format!("`{key}` must be a string"))
}

fn rat(v: &Value, what: &str) -> Res<Rational> {
    let s = v.as_str().ok_or_else(|| format!("{what} must be a rational string"))?;
    parse_rational(s).map_err(|e| format!("{what}: {e}"))
}

fn rat_field(v: &Value, key: &str) -> Res<Rational> {
    rat(field(v, key)?, &format!("`{key}`"))
}

fn rat_vec(v: &Value, what: &str) -> Res<Vec<Rational>> {
    v.as_array()
        .ok_or_else(|| format!("{what} must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, x)| rat(x, &format!("{what}[{i}]")))
        .collect()
}

fn rat_matrix(v: &Value, what: &str) -> Res<Vec<Vec<Rational>>> {
    v.as_array()
        .ok_or_else(|| format!("{what} must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, row)| rat_vec(row, &format!("{what}[{i}]")))
        .collect()
}

fn u64_vec(v: &Value, what: &str) -> Res<Vec<u64>> {
    v.as_array()
        .ok_or_else(|| format!("{what} must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, x)| x.as_u64().ok_or_else(|| format!("{what}[{i}] must be a nonnegative integer")))
        .collect()
}

fn linf(x: &[Rational], y: &[Rational]) -> Rational {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

/// A valid finite metric: square, zero diagonal, symmetric, positive off
/// the diagonal, triangle inequality.
fn check_metric(d: &[Vec<Rational>]) -> Res<()> {
    let n = d.len();
    if n == 0 {
        return Err("metric has no points".into());
    }
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(format!("metric row {i} has {} entries, expected {n}", row.len()));
        }
    }
    for i in 0..n {
        if !d[i][i].is_zero() {
            return Err(format!("metric diagonal entry ({i}, {i}) is {}", d[i][i]));
        }
        for j in 0..n {
            if d[i][j] != d[j][i] {
                return Err(format!("metric is not symmetric at ({i}, {j})"));
            }
            if i != j && !d[i][j].is_positive() {
                return Err(format!("metric entry ({i}, {j}) is not positive"));
            }
            for k in 0..n {
                if d[i][k] > &d[i][j] + &d[j][k] {
                    return Err(format!("triangle inequality fails for ({i}, {j}, {k})"));
                }
            }
        }
    }
    Ok(())
}

fn check_points(points: &[Vec<Rational>], what: &str) -> Res<usize> {
    let dim = points.first().map_or(0, |p| p.len());
    if points.iter().any(|p| p.len() != dim) {
        return Err(format!("{what} have mixed dimensions"));
    }
    let distinct: BTreeSet<&Vec<Rational>> = points.iter().collect();
    if distinct.len() != points.len() {
        return Err(format!("{what} contain a repeated point"));
    }
    Ok(dim)
}

/// All ordered copies of the metric among `points`, by plain enumeration.
fn all_copies(metric: &[Vec<Rational>], points: &[Vec<Rational>]) -> Vec<Vec<usize>> {
    fn extend(metric: &[Vec<Rational>], points: &[Vec<Rational>], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == metric.len() {
            out.push(cur.clone());
            return;
        }
        let i = cur.len();
        for p in 0..points.len() {
            if cur.contains(&p) {
                continue;
            }
            if cur.iter().enumerate().all(|(j, &q)| linf(&points[p], &points[q]) == metric[i][j]) {
                cur.push(p);
                extend(metric, points, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(metric, points, &mut Vec::new(), &mut out);
    out
}

/// Validates any certificate, dispatching on `kind`.
pub fn validate_certificate(v: &Value) -> ValidationReport {
    let kind = v.get("kind").and_then(Value::as_str).unwrap_or("").to_string();
    let mut val = Validator {
        report: ValidationReport {
            kind: kind.clone(),
            checks: Vec::new(),
            unchecked: Vec::new(),
        },
    };
    match kind.as_str() {
        "copy" => validate_copy(&mut val, v),
        "coloring" => validate_coloring(&mut val, v),
        "periodic_coloring" => validate_periodic(&mut val, v),
        "cover" => validate_cover(&mut val, v),
        "anchors" => validate_anchors(&mut val, v),
        other => val.check("kind", Err(format!("unknown certificate kind `{other}`"))),
    }
    val.report
}

fn known_fields(v: &Value, allowed: &[&str]) -> Res<()> {
    let obj = v.as_object().ok_or("certificate must be a JSON object")?;
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(format!("unexpected field `{k}`")),
        None => Ok(()),
    }
}

fn validate_copy(val: &mut Validator, v: &Value) {
    val.check(
        "fields",
        known_fields(v, &["kind", "metric", "points", "distances_checked"]),
    );
    let parsed = (|| -> Res<(Vec<Vec<Rational>>, Vec<Vec<Rational>>)> {
        Ok((
            rat_matrix(field(v, "metric")?, "metric")?,
            rat_matrix(field(v, "points")?, "points")?,
        ))
    })();
    let (metric, points) = match parsed {
        Ok(x) => x,
        Err(e) => return val.check("structure", Err(e)),
    };
    val.check("metric", check_metric(&metric));
    val.check("points", check_points(&points, "points").map(|_| ()));
    val.check(
        "size",
        if metric.len() == points.len() {
            Ok(())
        } else {
            Err(format!("{} points for a {}-point metric", points.len(), metric.len()))
        },
    );
    val.check(
        "distances",
        (|| {
            for i in 0..points.len().min(metric.len()) {
                for j in (i + 1)..points.len().min(metric.len()) {
                    let got = linf(&points[i], &points[j]);
                    if got != metric[i][j] {
                        return Err(format!("pair ({i}, {j}): distance {got}, metric says {}", metric[i][j]));
                    }
                }
            }
            Ok(())
        })(),
    );
    val.check(
        "distances_checked",
        match as_bool(v, "distances_checked") {
            Ok(true) => Ok(()),
            Ok(false) => Err("certificate does not claim checked distances".into()),
            Err(e) => Err(e),
        },
    );
}

fn validate_coloring(val: &mut Validator, v: &Value) {
    val.check(
        "fields",
        known_fields(
            v,
            &[
                "kind",
                "metric",
                "points",
                "colors",
                "color_count",
                "optimal",
                "lower_bound",
                "lower_bound_witness",
            ],
        ),
    );
    let parsed = (|| -> Res<_> {
        Ok((
            rat_matrix(field(v, "metric")?, "metric")?,
            rat_matrix(field(v, "points")?, "points")?,
            u64_vec(field(v, "colors")?, "colors")?,
            as_u64(v, "color_count")?,
            as_bool(v, "optimal")?,
            as_u64(v, "lower_bound")?,
            field(v, "lower_bound_witness")?.clone(),
        ))
    })();
    let (metric, points, colors, count, optimal, lower, witness) = match parsed {
        Ok(x) => x,
        Err(e) => return val.check("structure", Err(e)),
    };
    val.check("metric", check_metric(&metric));
    val.check("points", check_points(&points, "points").map(|_| ()));
    val.check(
        "colors",
        (|| {
            if colors.len() != points.len() {
                return Err(format!("{} colors for {} points", colors.len(), points.len()));
            }
            let used: BTreeSet<u64> = colors.iter().copied().collect();
            if used.len() as u64 != count || used.iter().any(|&c| c >= count) {
                return Err(format!("colors used are {used:?}, but color_count is {count}"));
            }
            Ok(())
        })(),
    );
    let copies = if metric.len() >= 2 { all_copies(&metric, &points) } else { Vec::new() };
    val.check(
        "proper",
        match copies
            .iter()
            .find(|c| colors.len() == points.len() && c.iter().all(|&p| colors[p] == colors[c[0]]))
        {
            Some(c) => Err(format!("copy on points {c:?} is monochromatic")),
            None => Ok(()),
        },
    );
    val.check(
        "bounds",
        if lower > count {
            Err(format!("lower bound {lower} exceeds color_count {count}"))
        } else if optimal != (lower == count) {
            Err(format!("optimal = {optimal} but lower bound {lower} and color_count {count}"))
        } else {
            Ok(())
        },
    );
    let supports: BTreeSet<Vec<usize>> = copies
        .iter()
        .map(|c| {
            let mut s = c.clone();
            s.sort_unstable();
            s
        })
        .collect();
    let witness_check = (|| -> Res<()> {
        if witness.is_null() {
            return if lower <= 1 || (points.is_empty() && lower == 0) {
                Ok(())
            } else {
                Err(format!("lower bound {lower} has no witness"))
            };
        }
        let kind = as_str(&witness, "kind")?;
        match kind {
            "clique" => {
                known_fields(&witness, &["kind", "vertices"])?;
                let vs = u64_vec(field(&witness, "vertices")?, "clique vertices")?;
                if vs.len() as u64 != lower {
                    return Err(format!("clique of {} vertices for lower bound {lower}", vs.len()));
                }
                for (a, &x) in vs.iter().enumerate() {
                    for &y in &vs[a + 1..] {
                        let pair = vec![x.min(y) as usize, x.max(y) as usize];
                        if !supports.contains(&pair) {
                            return Err(format!("clique pair ({x}, {y}) is not a copy"));
                        }
                    }
                }
                Ok(())
            }
            "edge" => {
                known_fields(&witness, &["kind", "vertices"])?;
                let mut vs: Vec<usize> = u64_vec(field(&witness, "vertices")?, "edge vertices")?
                    .into_iter()
                    .map(|x| x as usize)
                    .collect();
                vs.sort_unstable();
                if lower != 2 || !supports.contains(&vs) {
                    return Err("edge witness must be a copy and justify exactly two colors".into());
                }
                Ok(())
            }
            "counting" => {
                known_fields(&witness, &["kind", "points", "max_class"])?;
                let np = as_u64(&witness, "points")?;
                let max_class = as_u64(&witness, "max_class")?;
                // only the unit baton on the full grid [k]_0^n has this bound
                let k = metric.len() as u64 - 1;
                let unit: Vec<Vec<Rational>> = (0..=k)
                    .map(|i| (0..=k).map(|j| Rational::from_integer(BigInt::from(i.abs_diff(j)))).collect())
                    .collect();
                if metric != unit {
                    return Err("counting witness needs the unit baton as the metric".into());
                }
                let dim = points.first().map_or(0, |p| p.len());
                let on_grid = points.iter().all(|p| {
                    p.iter()
                        .all(|c| c.is_integer() && !c.is_negative() && c <= &Rational::from_integer(BigInt::from(k)))
                });
                let grid_size = (k + 1).checked_pow(dim as u32);
                if !on_grid || grid_size != Some(points.len() as u64) || np != points.len() as u64 {
                    return Err("counting witness needs the full grid [k]_0^n".into());
                }
                if Some(max_class) != k.checked_pow(dim as u32) || lower != np.div_ceil(max_class) {
                    return Err(format!("counting bound {np}/{max_class} does not give {lower}"));
                }
                Ok(())
            }
            "exhaustive" => {
                known_fields(&witness, &["kind", "colors_ruled_out"])?;
                let ruled = as_u64(&witness, "colors_ruled_out")?;
                if ruled + 1 != lower {
                    return Err(format!("{ruled} colors ruled out does not give lower bound {lower}"));
                }
                let work = (ruled as f64).powi(points.len() as i32);
                if work > 2e7 {
                    return Err(format!("skip: {} colorings to enumerate", work));
                }
                if colorable(points.len(), &supports, ruled as usize) {
                    return Err(format!("a proper {ruled}-coloring exists"));
                }
                Ok(())
            }
            other => Err(format!("unknown witness kind `{other}`")),
        }
    })();
    match witness_check {
        Err(e) if e.starts_with("skip: ") => val.unchecked(format!("exhaustive witness ({})", &e[6..])),
        r => val.check("witness", r),
    }
}

/// Whether some assignment of `c` colors leaves every support non-monochromatic.
fn colorable(n: usize, supports: &BTreeSet<Vec<usize>>, c: usize) -> bool {
    if n == 0 {
        return true;
    }
    if c == 0 {
        return false;
    }
    let mut colors = vec![0usize; n];
    loop {
        if supports.iter().all(|s| s.iter().any(|&p| colors[p] != colors[s[0]])) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == n {
                return false;
            }
            colors[i] += 1;
            if colors[i] < c {
                break;
            }
            colors[i] = 0;
            i += 1;
        }
    }
}

/// Largest and bottleneck distances: the diameter, and the least `l` for
/// which steps of length at most `l` connect every pair.
fn diameter_and_threshold(d: &[Vec<Rational>]) -> (Rational, Rational) {
    let n = d.len();
    let diameter = d.iter().flatten().max().cloned().unwrap_or_else(Rational::zero);
    let mut b: Vec<Vec<Rational>> = d.to_vec();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = (&b[i][k]).max(&b[k][j]).clone();
                if via < b[i][j] {
                    b[i][j] = via;
                }
            }
        }
    }
    let threshold = b.iter().flatten().max().cloned().unwrap_or_else(Rational::zero);
    (diameter, threshold)
}

fn rmod(x: &Rational, p: &Rational) -> Rational {
    let q = (x / p).floor();
    x - p * q
}

fn validate_periodic(val: &mut Validator, v: &Value) {
    val.check(
        "fields",
        known_fields(
            v,
            &["kind", "metric", "dim", "period", "box_size", "classes", "class_count", "cover"],
        ),
    );
    let parsed = (|| -> Res<_> {
        let classes = field(v, "classes")?
            .as_array()
            .ok_or("`classes` must be an array")?
            .iter()
            .enumerate()
            .map(|(i, c)| {
                known_fields(c, &["offsets"])?;
                rat_matrix(field(c, "offsets")?, &format!("classes[{i}].offsets"))
            })
            .collect::<Res<Vec<_>>>()?;
        Ok((
            rat_matrix(field(v, "metric")?, "metric")?,
            as_u64(v, "dim")? as usize,
            rat_field(v, "period")?,
            rat_field(v, "box_size")?,
            classes,
            as_u64(v, "class_count")?,
        ))
    })();
    let (metric, dim, period, side, classes, count) = match parsed {
        Ok(x) => x,
        Err(e) => return val.check("structure", Err(e)),
    };
    let metric_ok = check_metric(&metric).and_then(|_| {
        if metric.len() < 2 {
            Err("metric needs at least two points".into())
        } else {
            Ok(())
        }
    });
    let metric_valid = metric_ok.is_ok();
    val.check("metric", metric_ok);
    val.check(
        "class_count",
        if classes.len() as u64 == count {
            Ok(())
        } else {
            Err(format!("{} classes listed, class_count is {count}", classes.len()))
        },
    );
    let shape = (|| {
        if dim == 0 {
            return Err("dimension must be positive".to_string());
        }
        if !side.is_positive() || side > period {
            return Err(format!("box size {side} must lie in (0, period {period}]"));
        }
        for (i, c) in classes.iter().enumerate() {
            if c.is_empty() {
                return Err(format!("class {i} has no boxes"));
            }
            for o in c {
                if o.len() != dim {
                    return Err(format!("class {i} has an offset of dimension {}", o.len()));
                }
                if o.iter().any(|x| x.is_negative() || x >= &period) {
                    return Err(format!("class {i} has an offset outside [0, {period})"));
                }
            }
        }
        Ok(())
    })();
    let shape_ok = shape.is_ok();
    val.check("shape", shape);
    if metric_valid {
        let (diameter, threshold) = diameter_and_threshold(&metric);
        val.check(
            "inside_box",
            if side <= diameter {
                Ok(())
            } else {
                Err(format!("box size {side} exceeds the diameter {diameter}"))
            },
        );
        let gap = &period - &side;
        val.check(
            "between_boxes",
            if gap >= threshold {
                Ok(())
            } else {
                Err(format!("gap {gap} is below the connectivity threshold {threshold}"))
            },
        );
    }
    if shape_ok {
        // membership is constant on cells cut by box faces
        let axes: Vec<Vec<Rational>> = (0..dim)
            .map(|i| {
                let mut cuts = BTreeSet::from([Rational::zero()]);
                for o in classes.iter().flatten() {
                    cuts.insert(rmod(&o[i], &period));
                    cuts.insert(rmod(&(&o[i] + &side), &period));
                }
                cuts.into_iter().collect()
            })
            .collect();
        let cells: usize = axes.iter().map(Vec::len).product();
        let boxes = classes.iter().map(Vec::len).sum::<usize>();
        if cells.saturating_mul(boxes) > 50_000_000 {
            val.unchecked(format!("coverage audit over {cells} cells"));
        } else {
            let mut idx = vec![0usize; dim];
            let mut gap_cell = None;
            'cells: loop {
                let x: Vec<Rational> = idx.iter().zip(&axes).map(|(&i, a)| a[i].clone()).collect();
                let covered = classes
                    .iter()
                    .flatten()
                    .any(|o| o.iter().zip(&x).all(|(a, b)| rmod(&(b - a), &period) < side));
                if !covered {
                    gap_cell = Some(x);
                    break;
                }
                let mut axis = dim;
                loop {
                    if axis == 0 {
                        break 'cells;
                    }
                    axis -= 1;
                    idx[axis] += 1;
                    if idx[axis] < axes[axis].len() {
                        break;
                    }
                    idx[axis] = 0;
                }
            }
            val.check(
                "coverage",
                match gap_cell {
                    None => Ok(()),
                    Some(x) => Err(format!(
                        "point ({}) has no color",
                        x.iter().map(format_rational).collect::<Vec<_>>().join(", ")
                    )),
                },
            );
        }
    }
    if let Some(cover) = v.get("cover") {
        let sub = validate_certificate(cover);
        for c in sub.checks {
            val.check(&format!("cover.{}", c.name), if c.ok { Ok(()) } else { Err(c.detail) });
        }
        val.report.unchecked.extend(sub.unchecked);
        val.check(
            "cover_matches_classes",
            (|| {
                let m = as_u64(cover, "m")?;
                let d = as_u64(cover, "d")?;
                let n = as_u64(cover, "n")?;
                let translates = field(cover, "translates")?
                    .as_array()
                    .ok_or("`cover.translates` must be an array")?
                    .iter()
                    .map(|t| u64_vec(t, "translate"))
                    .collect::<Res<Vec<_>>>()?;
                if n as usize != dim || m == 0 {
                    return Err("cover dimension or modulus does not match".into());
                }
                let unit = &period / Rational::from_integer(BigInt::from(m));
                if side != &unit * Rational::from_integer(BigInt::from(d)) {
                    return Err(format!("box size {side} is not d = {d} cells of {unit}"));
                }
                if translates.len() != classes.len() {
                    return Err(format!("{} translates for {} classes", translates.len(), classes.len()));
                }
                for (i, (t, c)) in translates.iter().zip(&classes).enumerate() {
                    let want: Vec<Rational> = t.iter().map(|&x| Rational::from_integer(BigInt::from(x)) * &unit).collect();
                    if c.len() != 1 || c[0] != want {
                        return Err(format!("class {i} does not sit at translate {t:?}"));
                    }
                }
                Ok(())
            })(),
        );
    }
}

/// `floor(n ln d (m/d)^n)` in floating point, with `None` when the value is
/// too close to an integer to decide.
fn random_count(m: u64, d: u64, n: u64) -> Option<u64> {
    if d == 1 {
        return Some(0);
    }
    let x = n as f64 * (d as f64).ln() * (m as f64 / d as f64).powi(n as i32);
    let f = x.floor();
    if x - f < 1e-9 * x.max(1.0) || f + 1.0 - x < 1e-9 * x.max(1.0) {
        None
    } else {
        Some(f as u64)
    }
}

fn validate_cover(val: &mut Validator, v: &Value) {
    val.check(
        "fields",
        known_fields(
            v,
            &["kind", "m", "d", "n", "method", "translates", "size", "optimal", "lower_bound", "random"],
        ),
    );
    let parsed = (|| -> Res<_> {
        let m = as_u64(v, "m")?;
        let d = as_u64(v, "d")?;
        let n = as_u64(v, "n")?;
        if d < 1 || d > m || n < 1 {
            return Err(format!("need 1 <= d <= m and n >= 1, got m = {m}, d = {d}, n = {n}"));
        }
        let total = m.checked_pow(n as u32).filter(|&t| t <= 20_000_000).ok_or("torus too large to audit")?;
        let translates = field(v, "translates")?
            .as_array()
            .ok_or("`translates` must be an array")?
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let t = u64_vec(t, &format!("translates[{i}]"))?;
                if t.len() as u64 != n || t.iter().any(|&c| c >= m) {
                    return Err(format!("translates[{i}] is not a point of Z_{m}^{n}"));
                }
                Ok(t)
            })
            .collect::<Res<Vec<_>>>()?;
        Ok((
            m,
            d,
            n,
            total,
            as_str(v, "method")?.to_string(),
            translates,
            as_u64(v, "size")?,
            as_bool(v, "optimal")?,
            as_u64(v, "lower_bound")?,
        ))
    })();
    let (m, d, n, total, method, translates, size, optimal, lower) = match parsed {
        Ok(x) => x,
        Err(e) => return val.check("structure", Err(e)),
    };
    let encode = |c: &[u64]| c.iter().fold(0u64, |acc, &x| acc * m + x) as usize;
    let decode = |mut x: u64| {
        let mut c = vec![0u64; n as usize];
        for slot in c.iter_mut().rev() {
            *slot = x % m;
            x /= m;
        }
        c
    };
    let cube: Vec<Vec<u64>> = (0..d.pow(n as u32))
        .map(|mut x| {
            let mut c = vec![0u64; n as usize];
            for slot in c.iter_mut().rev() {
                *slot = x % d;
                x /= d;
            }
            c
        })
        .collect();
    let cover_points = |t: &[u64], hit: &mut Vec<bool>| {
        for o in &cube {
            let p: Vec<u64> = t.iter().zip(o).map(|(a, b)| (a + b) % m).collect();
            hit[encode(&p)] = true;
        }
    };

    let mut hit = vec![false; total as usize];
    for t in &translates {
        cover_points(t, &mut hit);
    }
    val.check(
        "coverage",
        match hit.iter().position(|h| !h) {
            None => Ok(()),
            Some(p) => Err(format!("point {:?} is uncovered", decode(p as u64))),
        },
    );
    val.check(
        "size",
        if size == translates.len() as u64 {
            Ok(())
        } else {
            Err(format!("size {size} but {} translates", translates.len()))
        },
    );
    let counting = total.div_ceil(d.pow(n as u32));
    val.check(
        "bounds",
        if lower < counting {
            Err(format!("lower bound {lower} is below the counting bound {counting}"))
        } else if lower > size {
            Err(format!("lower bound {lower} exceeds the size {size}"))
        } else if optimal != (lower == size) {
            Err(format!("optimal = {optimal} but lower bound {lower} and size {size}"))
        } else {
            Ok(())
        },
    );
    if total <= 30 {
        // every subset of translates, smallest first
        let masks: Vec<u64> = (0..total)
            .map(|t| {
                let mut h = vec![false; total as usize];
                cover_points(&decode(t), &mut h);
                h.iter().enumerate().filter(|(_, &b)| b).fold(0u64, |a, (i, _)| a | 1 << i)
            })
            .collect();
        let full = (1u64 << total) - 1;
        fn reach(masks: &[u64], full: u64, start: usize, left: usize, acc: u64) -> bool {
            acc == full || (left > 0 && (start..masks.len()).any(|t| reach(masks, full, t + 1, left - 1, acc | masks[t])))
        }
        let min = (1..=total as usize).find(|&s| reach(&masks, full, 0, s, 0)).unwrap_or(0) as u64;
        val.check(
            "minimum",
            if lower > min {
                Err(format!("lower bound {lower} exceeds the true minimum {min}"))
            } else {
                Ok(())
            },
        );
    } else if lower > counting {
        val.unchecked(format!("lower bound {lower} above the counting bound {counting}"));
    }

    let random = v.get("random");
    match method.as_str() {
        "exact" | "greedy" => {
            val.check(
                "canonical",
                if random.is_some() {
                    Err(format!("{method} covers carry no random draw"))
                } else if translates.windows(2).all(|w| w[0] < w[1]) {
                    Ok(())
                } else {
                    Err("translates must be sorted without repeats".into())
                },
            );
        }
        "randomized" => {
            let r = (|| -> Res<()> {
                let r = random.ok_or("randomized cover lacks `random`")?;
                known_fields(r, &["s", "leftovers", "seed", "within_bound"])?;
                let s = as_u64(r, "s")?;
                let leftovers = as_u64(r, "leftovers")?;
                let seed = as_u64(r, "seed")?;
                let within = as_bool(r, "within_bound")?;
                if d >= m {
                    return Err("random covering needs d < m".into());
                }
                match random_count(m, d, n) {
                    Some(want) if want != s => return Err(format!("s = {s}, expected {want}")),
                    Some(_) => {}
                    None => {}
                }
                if s + leftovers != translates.len() as u64 {
                    return Err(format!("s + leftovers = {} but {} translates", s + leftovers, translates.len()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut hit = vec![false; total as usize];
                for (i, t) in translates.iter().take(s as usize).enumerate() {
                    let draw: Vec<u64> = (0..n).map(|_| rng.gen_range(0..m as u32) as u64).collect();
                    if &draw != t {
                        return Err(format!("translate {i} is not draw {i} of seed {seed}"));
                    }
                    cover_points(t, &mut hit);
                }
                let missed: Vec<Vec<u64>> = (0..total).filter(|&p| !hit[p as usize]).map(decode).collect();
                if translates[s as usize..] != missed[..] {
                    return Err("leftover translates are not the points the draws miss".into());
                }
                let bound = s + (m.pow(n as u32)).div_ceil(d.pow(n as u32));
                if within != (translates.len() as u64 <= bound) {
                    return Err(format!("within_bound = {within} disagrees with bound {bound}"));
                }
                Ok(())
            })();
            val.check("random", r);
        }
        other => val.check("method", Err(format!("unknown method `{other}`"))),
    }
}

fn round_half_up(r: &Rational) -> BigInt {
    (r + Rational::new(BigInt::one(), BigInt::from(2))).floor().to_integer()
}

fn validate_anchors(val: &mut Validator, v: &Value) {
    val.check(
        "fields",
        known_fields(
            v,
            &["kind", "steps", "p", "m", "a", "q", "q0", "delta", "theta", "verification"],
        ),
    );
    let parsed = (|| -> Res<_> {
        let steps = rat_vec(field(v, "steps")?, "steps")?;
        if steps.is_empty() || steps.iter().any(|s| !s.is_positive()) {
            return Err("steps must be nonempty and positive".into());
        }
        let opt_u64 = |key: &str| -> Res<Option<u64>> {
            match field(v, key)? {
                Value::Null => Ok(None),
                x => x.as_u64().map(Some).ok_or_else(|| format!("`{key}` must be an integer or null")),
            }
        };
        Ok((
            steps,
            u64_vec(field(v, "p")?, "p")?,
            as_u64(v, "m")?,
            rat_vec(field(v, "a")?, "a")?,
            opt_u64("q")?,
            opt_u64("q0")?,
            rat_field(v, "delta")?,
            rat_field(v, "theta")?,
        ))
    })();
    let (steps, p, m, a, q, q0, delta, theta) = match parsed {
        Ok(x) => x,
        Err(e) => return val.check("structure", Err(e)),
    };
    let k = steps.len();
    let total: Rational = steps.iter().sum();

    // combinations sum d_i alpha_i <= total, and the least one above it
    let mut combos: Vec<(Vec<u64>, Rational)> = Vec::new();
    let mut above: Option<Rational> = None;
    let bounds: Vec<u64> = steps.iter().map(|s| (&total / s).floor().to_integer().to_u64().unwrap_or(0) + 1).collect();
    let mut dvec = vec![0u64; k];
    loop {
        let g: Rational = dvec.iter().zip(&steps).map(|(&c, s)| s * Rational::from_integer(BigInt::from(c))).sum();
        if g <= total {
            combos.push((dvec.clone(), g));
        } else if above.as_ref().is_none_or(|x| &g < x) {
            above = Some(g);
        }
        let mut i = k;
        let mut done = true;
        while i > 0 {
            i -= 1;
            if dvec[i] < bounds[i] {
                dvec[i] += 1;
                done = false;
                break;
            }
            dvec[i] = 0;
        }
        if done {
            break;
        }
    }
    let gammas: BTreeSet<Rational> = combos.iter().map(|(_, g)| g.clone()).collect();
    let mut chain: Vec<Rational> = gammas.iter().cloned().collect();
    chain.push(above.expect("some combination exceeds the total"));
    let want_delta = chain.windows(2).map(|w| &w[1] - &w[0]).min().expect("two values");
    let gvec: Vec<&Rational> = gammas.iter().collect();
    let want_theta = gvec[gvec.len() - 1] / gvec[1];
    val.check(
        "delta_theta",
        if delta != want_delta {
            Err(format!("delta = {delta}, expected {want_delta}"))
        } else if theta != want_theta {
            Err(format!("theta = {theta}, expected {want_theta}"))
        } else {
            Ok(())
        },
    );

    let index = |d: &[u64]| -> u64 { d.iter().zip(&p).map(|(x, y)| x * y).sum() };
    let shape = (|| {
        if p.len() != k || p.contains(&0) {
            return Err(format!("need {k} positive integers p_i"));
        }
        if p.iter().sum::<u64>() != m {
            return Err(format!("m = {m} is not the sum of p"));
        }
        if a.len() as u64 != m + 1 {
            return Err(format!("{} values for m = {m}", a.len()));
        }
        if !a[0].is_zero() {
            return Err("a_0 must be 0".into());
        }
        Ok(())
    })();
    let shape_ok = shape.is_ok();
    val.check("shape", shape);
    if shape_ok {
        val.check(
            "monotone",
            match (1..a.len()).find(|&l| a[l] <= a[l - 1]) {
                None => Ok(()),
                Some(l) => Err(format!("a_{l} = {} is not above a_{} = {}", a[l], l - 1, a[l - 1])),
            },
        );
        if m <= 20_000 {
            // common denominator, then integer comparisons
            let den = a.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            let ai: Vec<BigInt> = a.iter().map(|x| (x * Rational::from_integer(den.clone())).to_integer()).collect();
            let mut bad = None;
            'outer: for l in 1..m as usize {
                for r in 1..=(m as usize - l) {
                    if ai[l + r] > &ai[l] + &ai[r] {
                        bad = Some((l, r));
                        break 'outer;
                    }
                }
            }
            val.check(
                "subadditive",
                match bad {
                    None => Ok(()),
                    Some((l, r)) => Err(format!("a_{} > a_{l} + a_{r}", l + r)),
                },
            );
        } else {
            val.unchecked(format!("subadditivity over m = {m}"));
        }
        val.check(
            "anchoring",
            match combos
                .iter()
                .find(|(d, g)| index(d) > m || &a[index(d) as usize] != g)
            {
                None => Ok(()),
                Some((d, g)) => Err(format!("combination {d:?} = {g} is not at index {}", index(d))),
            },
        );
    }

    let rounding = (|| {
        let Some(q) = q else {
            return if q0.is_some() {
                Err("q0 given without q".to_string())
            } else {
                Ok(())
            };
        };
        if q == 0 {
            return Err("q must be positive".into());
        }
        let qr = Rational::from_integer(BigInt::from(q));
        for (i, s) in steps.iter().enumerate() {
            if round_half_up(&(s * &qr)) != BigInt::from(p.get(i).copied().unwrap_or(0)) {
                return Err(format!("p_{} is not round(q alpha_{})", i + 1, i + 1));
            }
        }
        let c = |g: &Rational| round_half_up(&(g * &qr));
        if gvec.windows(2).any(|w| c(w[1]) <= c(w[0])) {
            return Err("c is not strictly increasing".into());
        }
        if let Some((d, _)) = combos.iter().find(|(d, g)| c(g) != BigInt::from(index(d))) {
            return Err(format!("c is not additive at {d:?}"));
        }
        let good = |qq: u64| {
            let qq_r = Rational::from_integer(BigInt::from(qq));
            let scale = num_traits::pow(qq_r.clone(), k + 1);
            steps.iter().all(|s| {
                let err = (s - Rational::new(round_half_up(&(s * &qq_r)), BigInt::from(qq))).abs();
                num_traits::pow(err, k) * &scale < Rational::one()
            })
        };
        match q0 {
            None => {
                if q != 1 || steps.iter().any(|s| !s.is_integer()) {
                    return Err("without q0 the steps must be integers and q = 1".into());
                }
            }
            Some(q0) => {
                let admissible = |x: u64| {
                    let xr = Rational::from_integer(BigInt::from(x));
                    x > 0
                        && &delta * &xr > Rational::one()
                        && num_traits::pow(&theta * Rational::from_integer(BigInt::from(2)), k) < xr
                };
                if !admissible(q0) || admissible(q0 - 1) {
                    return Err(format!("q0 = {q0} is not the least admissible threshold"));
                }
                if q <= q0 || !good(q) {
                    return Err(format!("q = {q} fails the approximation bound"));
                }
                if let Some(earlier) = (q0 + 1..q).find(|&x| good(x)) {
                    return Err(format!("q = {earlier} already satisfies the approximation bound"));
                }
            }
        }
        Ok(())
    })();
    val.check("rounding", rounding);

    if let Some(rep) = v.get("verification") {
        val.check(
            "verification",
            (|| {
                known_fields(rep, &["clauses"])?;
                let clauses = field(rep, "clauses")?.as_array().ok_or("`clauses` must be an array")?;
                let expected = [
                    "shape",
                    "monotone",
                    "subadditive",
                    "anchoring",
                    "rounding_increasing",
                    "rounding_linear",
                ];
                if clauses.len() != expected.len() {
                    return Err("wrong number of clauses".into());
                }
                for (c, name) in clauses.iter().zip(expected) {
                    known_fields(c, &["clause", "status", "detail"])?;
                    if as_str(c, "clause")? != name {
                        return Err(format!("expected clause `{name}`"));
                    }
                    let status = as_str(c, "status")?;
                    let may_skip = q.is_none() && name.starts_with("rounding");
                    match status {
                        "pass" if c.get("detail").is_none() => {}
                        "skipped" if may_skip => {
                            if as_str(c, "detail").is_err() {
                                return Err(format!("clause `{name}` skipped without a reason"));
                            }
                        }
                        _ => return Err(format!("clause `{name}` is not a pass")),
                    }
                }
                Ok(())
            })(),
        );
    }
}

/// Every certificate obtained by changing one leaf of `v`: numbers and
/// rational strings gain one, booleans flip, other strings gain a suffix, and
/// nulls become zero.
pub fn single_field_mutations(v: &Value) -> Vec<(String, Value)> {
    fn walk(v: &Value, path: &str, root: &Value, out: &mut Vec<(String, Value)>) {
        let mutated = |new: Value| {
            let mut copy = root.clone();
            *copy.pointer_mut(path).expect("path exists") = new;
            copy
        };
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    walk(x, &format!("{path}/{k}"), root, out);
                }
            }
            Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(x, &format!("{path}/{i}"), root, out);
                }
            }
            Value::Number(n) => {
                let new = match n.as_u64() {
                    Some(u) => json!(u + 1),
                    None => json!(n.as_f64().unwrap_or(0.0) + 1.0),
                };
                out.push((path.to_string(), mutated(new)));
            }
            Value::String(s) => {
                let new = match parse_rational(s) {
                    Ok(r) if !s.is_empty() => format_rational(&(r + Rational::one())),
                    _ => format!("{s}x"),
                };
                out.push((path.to_string(), mutated(json!(new))));
            }
            Value::Bool(b) => out.push((path.to_string(), mutated(json!(!b)))),
            Value::Null => out.push((path.to_string(), mutated(json!(0)))),
        }
    }
    let mut out = Vec::new();
    walk(v, "", v, &mut out);
    out
}
