//! Finite metric spaces, point sets under the maximum norm, and exhaustive
//! isometric-copy search.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// `max_i |x_i - y_i|`, exactly.
pub fn chebyshev_distance(x: &[Rational], y: &[Rational]) -> Result<Rational> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .max()
        .unwrap_or_else(Rational::zero))
}

/// A finite metric space given by its distance matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteMetricSpace {
    dist: Vec<Vec<Rational>>,
}

impl FiniteMetricSpace {
    /// Validates the metric axioms: zero diagonal, symmetry, positivity off
    /// the diagonal and the triangle inequality.
    pub fn new(dist: Vec<Vec<Rational>>) -> Result<Self> {
        let d = dist.len();
        if d == 0 {
            return Err(Error::InvalidMetric("empty distance matrix".into()));
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
        }
        for i in 0..d {
            if !dist[i][i].is_zero() {
                return Err(Error::InvalidMetric(format!("dist[{i}][{i}] = {} != 0", dist[i][i])));
            }
            for j in 0..d {
                if dist[i][j] != dist[j][i] {
                    return Err(Error::InvalidMetric(format!(
                        "dist[{i}][{j}] = {} but dist[{j}][{i}] = {}",
                        dist[i][j], dist[j][i]
                    )));
                }
                if i != j && !dist[i][j].is_positive() {
                    return Err(Error::InvalidMetric(format!(
                        "dist[{i}][{j}] = {} is not positive",
                        dist[i][j]
                    )));
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    if dist[i][k] > &dist[i][j] + &dist[j][k] {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails: dist[{i}][{k}] > dist[{i}][{j}] + dist[{j}][{k}]"
                        )));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { dist })
    }

    /// The metric induced on a point set by the maximum norm.
    pub fn from_points(points: &PointSet) -> Result<Self> {
        let pts = points.points();
        let dist = pts
            .iter()
            .map(|x| pts.iter().map(|y| chebyshev_distance(x, y)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        FiniteMetricSpace::new(dist)
    }

    pub fn from_baton(baton: &Baton) -> Self {
        let sums = baton.partial_sums();
        let dist = sums
            .iter()
            .map(|a| sums.iter().map(|b| (a - b).abs()).collect())
            .collect();
        FiniteMetricSpace { dist }
    }

    /// `B_k`: `k + 1` collinear points at unit spacing.
    pub fn unit_baton(k: usize) -> Self {
        FiniteMetricSpace::from_baton(&Baton::unit(k))
    }

    pub fn two_point(distance: Rational) -> Result<Self> {
        FiniteMetricSpace::new(vec![
            vec![Rational::zero(), distance.clone()],
            vec![distance, Rational::zero()],
        ])
    }

    pub fn size(&self) -> usize {
        self.dist.len()
    }

    pub fn dist(&self, i: usize, j: usize) -> &Rational {
        &self.dist[i][j]
    }

    pub fn matrix(&self) -> &[Vec<Rational>] {
        &self.dist
    }

    pub fn diameter(&self) -> Result<Rational> {
        diameter(self)
    }

    pub fn connectivity_threshold(&self) -> Result<Rational> {
        connectivity_threshold(self)
    }

    /// Reads the JSON metric-space format. When both `distance_matrix` and
    /// `points` are present the matrix is used.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: MetricFile = serde_json::from_str(s).map_err(|e| {
            Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        file.into_metric()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(MetricFile {
            distance_matrix: Some(self.dist.clone()),
            points: None,
        })
        .expect("metric serializes")
    }
}

/// On-disk metric space: either a distance matrix or a list of points.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricFile {
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "opt_matrix"
    )]
    pub distance_matrix: Option<Vec<Vec<Rational>>>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "opt_matrix"
    )]
    pub points: Option<Vec<Vec<Rational>>>,
}

impl MetricFile {
    pub fn into_metric(self) -> Result<FiniteMetricSpace> {
        match (self.distance_matrix, self.points) {
            (Some(m), _) => FiniteMetricSpace::new(m),
            (None, Some(p)) => FiniteMetricSpace::from_points(&PointSet::new(p)?),
            (None, None) => Err(Error::parse(
                "metric file",
                "expected a \"distance_matrix\" or \"points\" field",
            )),
        }
    }
}

mod opt_matrix {
    use super::Rational;
    use crate::rational::serde_rational_matrix;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Vec<Vec<Rational>>>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => serde_rational_matrix::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<Rational>>>, D::Error> {
        serde_rational_matrix::deserialize(d).map(Some)
    }
}

/// Distinct points of a common dimension, carrying the maximum metric.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PointSetFile", into = "PointSetFile")]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<Rational>>,
}

#[derive(Serialize, Deserialize)]
struct PointSetFile {
    #[serde(with = "crate::rational::serde_rational_matrix")]
    points: Vec<Vec<Rational>>,
}

impl TryFrom<PointSetFile> for PointSet {
    type Error = Error;
    fn try_from(f: PointSetFile) -> Result<Self> {
        PointSet::new(f.points)
    }
}

impl From<PointSet> for PointSetFile {
    fn from(p: PointSet) -> Self {
        PointSetFile { points: p.points }
    }
}

impl PointSet {
    /// The dimension is taken from the first point; the list must be nonempty.
    pub fn new(points: Vec<Vec<Rational>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidPointSet("no points".into()))?;
        PointSet::with_dim(dim, points)
    }

    pub fn with_dim(dim: usize, points: Vec<Vec<Rational>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPointSet("dimension must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: p.len(),
                });
            }
            if !seen.insert(p) {
                return Err(Error::InvalidPointSet(format!("point {i} is a duplicate")));
            }
        }
        Ok(PointSet { dim, points })
    }

    pub fn from_integer_points<I, P>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: IntoIterator<Item = i64>,
    {
        PointSet::new(
            points
                .into_iter()
                .map(|p| p.into_iter().map(rational::int).collect())
                .collect(),
        )
    }

    /// The grid `{0, ..., k}^n` in lexicographic order.
    pub fn grid(k: u32, n: usize) -> Self {
        let mut points = Vec::new();
        let mut cur = vec![0u32; n];
        loop {
            points.push(cur.iter().map(|&c| rational::int(c as i64)).collect());
            let mut i = n;
            loop {
                if i == 0 {
                    return PointSet { dim: n, points };
                }
                i -= 1;
                if cur[i] < k {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 0;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<Rational>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[Rational] {
        &self.points[i]
    }

    pub fn index_of(&self, p: &[Rational]) -> Option<usize> {
        self.points.iter().position(|q| q.as_slice() == p)
    }

    pub fn distance(&self, i: usize, j: usize) -> Rational {
        chebyshev_distance(&self.points[i], &self.points[j]).expect("points share a dimension")
    }
}

/// `B(alpha_1, ..., alpha_k)`: the points `0, alpha_1, alpha_1 + alpha_2, ...`
/// on the line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BatonFile", into = "BatonFile")]
pub struct Baton {
    steps: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
struct BatonFile {
    #[serde(with = "crate::rational::serde_rational_vec")]
    steps: Vec<Rational>,
}

impl TryFrom<BatonFile> for Baton {
    type Error = Error;
    fn try_from(f: BatonFile) -> Result<Self> {
        Baton::new(f.steps)
    }
}

impl From<Baton> for BatonFile {
    fn from(b: Baton) -> Self {
        BatonFile { steps: b.steps }
    }
}

impl Baton {
    pub fn new(steps: Vec<Rational>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidBaton("a baton needs at least one step".into()));
        }
        if let Some((i, s)) = steps.iter().enumerate().find(|(_, s)| !s.is_positive()) {
            return Err(Error::InvalidBaton(format!("step {i} = {s} is not positive")));
        }
        Ok(Baton { steps })
    }

    pub fn unit(k: usize) -> Self {
        assert!(k >= 1, "B_k needs k >= 1");
        Baton {
            steps: vec![rational::int(1); k],
        }
    }

    pub fn steps(&self) -> &[Rational] {
        &self.steps
    }

    /// Number of steps; the baton has `k + 1` points.
    pub fn k(&self) -> usize {
        self.steps.len()
    }

    pub fn total(&self) -> Rational {
        self.steps.iter().sum()
    }

    /// `0, alpha_1, alpha_1 + alpha_2, ..., sum alpha_i`.
    pub fn partial_sums(&self) -> Vec<Rational> {
        let mut acc = Rational::zero();
        let mut out = vec![acc.clone()];
        for s in &self.steps {
            acc += s;
            out.push(acc.clone());
        }
        out
    }

    pub fn is_integral(&self) -> bool {
        self.steps.iter().all(rational::is_integer)
    }

    pub fn metric(&self) -> FiniteMetricSpace {
        FiniteMetricSpace::from_baton(self)
    }
}

/// An ordered isometric embedding of `source` into a point set: source point
/// `i` maps to point `indices[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CopyEmbedding {
    pub source: FiniteMetricSpace,
    pub indices: Vec<usize>,
}

impl CopyEmbedding {
    /// Checks the embedding against `points` in exact arithmetic, naming the
    /// first offending pair.
    pub fn verify(&self, points: &PointSet) -> std::result::Result<(), String> {
        if self.indices.len() != self.source.size() {
            return Err(format!(
                "embedding has {} indices for a {}-point space",
                self.indices.len(),
                self.source.size()
            ));
        }
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= points.len()) {
            return Err(format!("index {bad} out of range"));
        }
        for i in 0..self.indices.len() {
            for j in (i + 1)..self.indices.len() {
                let got = points.distance(self.indices[i], self.indices[j]);
                if &got != self.source.dist(i, j) {
                    return Err(format!(
                        "pair ({i}, {j}): distance {got} but expected {}",
                        self.source.dist(i, j)
                    ));
                }
            }
        }
        Ok(())
    }

    /// The mapped points, in source order.
    pub fn image(&self, points: &PointSet) -> Vec<Vec<Rational>> {
        self.indices.iter().map(|&i| points.point(i).to_vec()).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s
    }
}

/// The rows of the distance matrix, as points of `Q^d`, with the identity
/// embedding as certificate.
pub fn frechet_embed(space: &FiniteMetricSpace) -> (PointSet, CopyEmbedding) {
    let points = PointSet {
        dim: space.size(),
        points: space.matrix().to_vec(),
    };
    let embedding = CopyEmbedding {
        source: space.clone(),
        indices: (0..space.size()).collect(),
    };
    (points, embedding)
}

#[derive(Clone, Debug, Default)]
pub struct CopySearch {
    pub limit: Option<usize>,
    /// Report only the first embedding (in canonical order) of each support.
    pub dedup_supports: bool,
}

/// All ordered copies of `space` in `points`, lexicographic by index tuple.
pub fn find_copies(space: &FiniteMetricSpace, points: &PointSet, limit: Option<usize>) -> Vec<CopyEmbedding> {
    find_copies_with(
        space,
        points,
        &CopySearch {
            limit,
            dedup_supports: false,
        },
    )
}

pub fn find_copies_with(space: &FiniteMetricSpace, points: &PointSet, opts: &CopySearch) -> Vec<CopyEmbedding> {
    let d = space.size();
    let np = points.len();
    if d > np || opts.limit == Some(0) {
        return Vec::new();
    }

    // Compare interned distance ids instead of rationals in the inner loop.
    let mut ids: BTreeMap<Rational, u32> = BTreeMap::new();
    let mut pdist = vec![0u32; np * np];
    for i in 0..np {
        for j in (i + 1)..np {
            let next = ids.len() as u32;
            let id = *ids.entry(points.distance(i, j)).or_insert(next);
            pdist[i * np + j] = id;
            pdist[j * np + i] = id;
        }
    }
    let mut mdist = vec![0u32; d * d];
    for i in 0..d {
        for j in (i + 1)..d {
            match ids.get(space.dist(i, j)) {
                Some(&id) => {
                    mdist[i * d + j] = id;
                    mdist[j * d + i] = id;
                }
                None => return Vec::new(),
            }
        }
    }

    let mut search = Search {
        d,
        np,
        pdist: &pdist,
        mdist: &mdist,
        assignment: Vec::with_capacity(d),
        used: vec![false; np],
        out: Vec::new(),
        seen_supports: BTreeSet::new(),
        opts,
    };
    search.extend();
    search
        .out
        .into_iter()
        .map(|indices| CopyEmbedding {
            source: space.clone(),
            indices,
        })
        .collect()
}

struct Search<'a> {
    d: usize,
    np: usize,
    pdist: &'a [u32],
    mdist: &'a [u32],
    assignment: Vec<usize>,
    used: Vec<bool>,
    out: Vec<Vec<usize>>,
    seen_supports: BTreeSet<Vec<usize>>,
    opts: &'a CopySearch,
}

impl Search<'_> {
    /// Returns false once the limit is reached.
    fn extend(&mut self) -> bool {
        let pos = self.assignment.len();
        if pos == self.d {
            if self.opts.dedup_supports {
                let mut s = self.assignment.clone();
                s.sort_unstable();
                if !self.seen_supports.insert(s) {
                    return true;
                }
            }
            self.out.push(self.assignment.clone());
            return self.opts.limit.is_none_or(|l| self.out.len() < l);
        }
        for cand in 0..self.np {
            if self.used[cand] {
                continue;
            }
            let consistent = self.assignment.iter().enumerate().all(|(prev, &pi)| {
                self.pdist[pi * self.np + cand] == self.mdist[prev * self.d + pos]
            });
            if !consistent {
                continue;
            }
            self.used[cand] = true;
            self.assignment.push(cand);
            let go_on = self.extend();
            self.assignment.pop();
            self.used[cand] = false;
            if !go_on {
                return false;
            }
        }
        true
    }
}

/// Full enumeration of injective index tuples without pruning. Exponential;
/// kept as the reference the pruned search is tested against.
pub fn find_copies_naive(space: &FiniteMetricSpace, points: &PointSet) -> Vec<CopyEmbedding> {
    let d = space.size();
    let np = points.len();
    let mut out = Vec::new();
    if d > np {
        return out;
    }
    let mut tuple = vec![0usize; d];
    loop {
        let injective = (0..d).all(|i| (0..i).all(|j| tuple[i] != tuple[j]));
        if injective {
            let isometric = (0..d).all(|i| {
                (0..d).all(|j| i == j || &points.distance(tuple[i], tuple[j]) == space.dist(i, j))
            });
            if isometric {
                out.push(CopyEmbedding {
                    source: space.clone(),
                    indices: tuple.clone(),
                });
            }
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            tuple[i] += 1;
            if tuple[i] < np {
                break;
            }
            tuple[i] = 0;
        }
    }
}

/// The largest pairwise distance.
pub fn diameter(space: &FiniteMetricSpace) -> Result<Rational> {
    if space.size() < 2 {
        return Err(Error::TooFewPoints("the diameter"));
    }
    Ok(space
        .matrix()
        .iter()
        .flatten()
        .max()
        .cloned()
        .expect("nonempty matrix"))
}

/// The least `l` for which the graph `{rho <= l}` is connected: the heaviest
/// edge of a minimum spanning tree (Prim).
pub fn connectivity_threshold(space: &FiniteMetricSpace) -> Result<Rational> {
    let d = space.size();
    if d < 2 {
        return Err(Error::TooFewPoints("the connectivity threshold"));
    }
    let mut in_tree = vec![false; d];
    let mut best: Vec<Option<Rational>> = vec![None; d];
    in_tree[0] = true;
    for j in 1..d {
        best[j] = Some(space.dist(0, j).clone());
    }
    let mut heaviest = Rational::zero();
    for _ in 1..d {
        let (v, w) = (0..d)
            .filter(|&j| !in_tree[j])
            .map(|j| (j, best[j].clone().expect("frontier distance")))
            .min_by(|a, b| a.1.cmp(&b.1))
            .expect("a vertex outside the tree");
        in_tree[v] = true;
        heaviest = heaviest.max(w);
        for j in 0..d {
            if !in_tree[j] && best[j].as_ref().is_none_or(|b| space.dist(v, j) < b) {
                best[j] = Some(space.dist(v, j).clone());
            }
        }
    }
    Ok(heaviest)
}

/// The projection of a point set onto one axis, described as a start value
/// plus the consecutive gaps between sorted distinct values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridAxis {
    pub start: Rational,
    /// `None` when every point has the same coordinate on this axis.
    pub baton: Option<Baton>,
}

impl GridAxis {
    pub fn values(&self) -> Vec<Rational> {
        match &self.baton {
            None => vec![self.start.clone()],
            Some(b) => b.partial_sums().into_iter().map(|s| s + &self.start).collect(),
        }
    }
}

/// Writes `S` as a subset of a product of batons, one per coordinate.
pub fn grid_decompose(set: &PointSet) -> Result<Vec<GridAxis>> {
    if set.is_empty() {
        return Err(Error::InvalidPointSet("cannot decompose an empty set".into()));
    }
    (0..set.dim())
        .map(|axis| {
            let values: BTreeSet<&Rational> = set.points().iter().map(|p| &p[axis]).collect();
            let values: Vec<&Rational> = values.into_iter().collect();
            let steps: Vec<Rational> = values.windows(2).map(|w| w[1] - w[0]).collect();
            Ok(GridAxis {
                start: values[0].clone(),
                baton: if steps.is_empty() { None } else { Some(Baton::new(steps)?) },
            })
        })
        .collect()
}
