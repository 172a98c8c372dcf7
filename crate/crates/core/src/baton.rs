//! Extraction of batons from dense subsets of grids.
//!
//! A subset of `{0..k}^n` with more than `k^n` elements always contains a copy
//! of `B_k`. The extraction is an induction on `n`: either some fiber along the
//! last axis is full, or the shifting map (which bumps the last coordinate
//! into a free slot above it) pushes the set into `k` head classes, one of
//! which is dense enough to recurse on. Pulling the recursive copy back
//! through the shift changes heads by at most one, which keeps distances.
//!
//! Arbitrary batons reduce to the unit case through an anchor set
//! `A = {a_0 < ... < a_M}`: subsets of `A^n` are read as subsets of `{0..M}^n`,
//! a `B_M` is extracted, and the points at the marked indices are mapped back.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::metric::{Baton, CopyEmbedding, FiniteMetricSpace, PointSet};
use crate::rational::{self, Rational};

/// A subset of the grid `{0, ..., k}^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSubset {
    n: usize,
    k: u32,
    elems: BTreeSet<Vec<u32>>,
}

impl GridSubset {
    pub fn new<I>(n: usize, k: u32, elems: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<u32>>,
    {
        if n == 0 || k == 0 {
            return Err(Error::Precondition("grid needs n >= 1 and k >= 1".into()));
        }
        let mut set = BTreeSet::new();
        for e in elems {
            if e.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: e.len(),
                });
            }
            if let Some(c) = e.iter().find(|&&c| c > k) {
                return Err(Error::Domain(format!("coordinate {c} of {e:?} exceeds k = {k}")));
            }
            if !set.insert(e.clone()) {
                return Err(Error::InvalidPointSet(format!("{e:?} listed twice")));
            }
        }
        Ok(GridSubset { n, k, elems: set })
    }

    /// Reads a point set whose coordinates are integers in `0..=k`.
    pub fn from_point_set(points: &PointSet, k: u32) -> Result<Self> {
        let elems = points
            .points()
            .iter()
            .map(|p| {
                p.iter()
                    .map(|c| {
                        if !rational::is_integer(c) || c < &Rational::zero() || c > &rational::int(k as i64) {
                            Err(Error::Domain(format!("coordinate {c} is not in {{0..{k}}}")))
                        } else {
                            Ok(c.to_integer().try_into().expect("fits in u32"))
                        }
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        GridSubset::new(points.dim(), k, elems)
    }

    pub fn full(n: usize, k: u32) -> Self {
        let pts = PointSet::grid(k, n);
        GridSubset::from_point_set(&pts, k).expect("grid is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn contains(&self, x: &[u32]) -> bool {
        self.elems.contains(x)
    }

    /// Elements in lexicographic order.
    pub fn elems(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.elems.iter()
    }

    /// The same elements as a rational point set, lexicographic order.
    pub fn to_point_set(&self) -> PointSet {
        PointSet::with_dim(
            self.n,
            self.elems
                .iter()
                .map(|e| e.iter().map(|&c| rational::int(c as i64)).collect())
                .collect(),
        )
        .expect("grid subset points are distinct")
    }

    /// `k^n`, the largest size of a subset avoiding `B_k`.
    pub fn threshold(&self) -> u128 {
        (self.k as u128).pow(self.n as u32)
    }
}

/// For each tail, the largest value of `{0..k}` missing from its fiber.
fn largest_gaps(elems: &BTreeSet<Vec<u32>>, k: u32) -> BTreeMap<&[u32], Option<u32>> {
    let mut fibers: BTreeMap<&[u32], BTreeSet<u32>> = BTreeMap::new();
    for e in elems {
        let (head, tail) = e.split_last().expect("n >= 1");
        fibers.entry(tail).or_default().insert(*head);
    }
    fibers
        .into_iter()
        .map(|(tail, heads)| (tail, (0..=k).rev().find(|j| !heads.contains(j))))
        .collect()
}

fn shift_with(gaps: &BTreeMap<&[u32], Option<u32>>, x: &[u32]) -> Vec<u32> {
    let (head, tail) = x.split_last().expect("n >= 1");
    let mut out = x.to_vec();
    if matches!(gaps[tail], Some(gap) if gap > *head) {
        *out.last_mut().expect("n >= 1") += 1;
    }
    out
}

/// Raises the last coordinate of `x` by one if its fiber has a free slot
/// anywhere above `x`; otherwise leaves `x` in place.
pub fn shift_map(set: &GridSubset, x: &[u32]) -> Result<Vec<u32>> {
    if !set.contains(x) {
        return Err(Error::Domain(format!("{x:?} is not in the subset")));
    }
    Ok(shift_with(&largest_gaps(&set.elems, set.k), x))
}

/// Finds `x^0, ..., x^k` in the subset with `||x^s - x^t|| = |s - t|`.
///
/// Fails with a precondition error when `|X| <= k^n`; the search is not
/// attempted in that case.
pub fn extract_unit_baton_points(set: &GridSubset) -> Result<Vec<Vec<u32>>> {
    if (set.len() as u128) <= set.threshold() {
        return Err(Error::Precondition(format!(
            "|X| = {} does not exceed k^n = {}",
            set.len(),
            set.threshold()
        )));
    }
    let chain = extract_rec(&set.elems, set.n, set.k);
    debug_assert!(is_unit_chain(&chain, set.k));
    Ok(chain)
}

/// As [`extract_unit_baton_points`], returned as an embedding of `B_k` into
/// [`GridSubset::to_point_set`].
pub fn extract_unit_baton(set: &GridSubset) -> Result<CopyEmbedding> {
    let chain = extract_unit_baton_points(set)?;
    let order: Vec<&Vec<u32>> = set.elems.iter().collect();
    let indices = chain
        .iter()
        .map(|p| order.binary_search(&p).expect("extracted point is in X"))
        .collect();
    Ok(CopyEmbedding {
        source: FiniteMetricSpace::unit_baton(set.k as usize),
        indices,
    })
}

fn extract_rec(elems: &BTreeSet<Vec<u32>>, n: usize, k: u32) -> Vec<Vec<u32>> {
    if n == 1 {
        assert_eq!(elems.len(), k as usize + 1, "a dense subset of {{0..k}} is everything");
        return (0..=k).map(|i| vec![i]).collect();
    }

    let gaps = largest_gaps(elems, k);
    if let Some((tail, _)) = gaps.iter().find(|(_, gap)| gap.is_none()) {
        return (0..=k)
            .map(|i| {
                let mut p = tail.to_vec();
                p.push(i);
                p
            })
            .collect();
    }

    let mut preimage: HashMap<Vec<u32>, &Vec<u32>> = HashMap::with_capacity(elems.len());
    for x in elems {
        let fx = shift_with(&gaps, x);
        let clash = preimage.insert(fx, x);
        assert!(clash.is_none(), "shift map is not injective");
    }

    let mut classes: Vec<BTreeSet<Vec<u32>>> = vec![BTreeSet::new(); k as usize + 1];
    for fx in preimage.keys() {
        let (head, tail) = fx.split_last().expect("n >= 2");
        classes[*head as usize].insert(tail.to_vec());
    }
    assert!(classes[0].is_empty(), "head class 0 must be empty when no fiber is full");

    // largest class, smallest head on ties
    let (head, class) = classes
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
        .expect("k >= 1");
    let bound = (k as u128).pow(n as u32 - 1);
    assert!(class.len() as u128 > bound, "pigeonhole must leave a dense class");

    extract_rec(class, n - 1, k)
        .into_iter()
        .map(|mut y| {
            y.push(head as u32);
            preimage[&y].clone()
        })
        .collect()
}

fn linf(a: &[u32], b: &[u32]) -> u32 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}

fn is_unit_chain(chain: &[Vec<u32>], k: u32) -> bool {
    chain.len() == k as usize + 1
        && (0..chain.len()).all(|s| (0..chain.len()).all(|t| linf(&chain[s], &chain[t]) as usize == s.abs_diff(t)))
}

/// A strictly increasing set `a_0 = 0 < a_1 < ... < a_M` with the indices
/// `0 = marks_0 < ... < marks_k = M` whose values realise a baton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorSet {
    values: Vec<Rational>,
    marks: Vec<usize>,
}

impl AnchorSet {
    pub fn new(values: Vec<Rational>, marks: Vec<usize>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Precondition("an anchor set needs at least two values".into()));
        }
        if !values[0].is_zero() {
            return Err(Error::Precondition(format!("a_0 = {} != 0", values[0])));
        }
        if let Some(l) = (1..values.len()).find(|&l| values[l] <= values[l - 1]) {
            return Err(Error::Precondition(format!("anchor values not increasing at index {l}")));
        }
        let top = values.len() - 1;
        if marks.first() != Some(&0) || marks.last() != Some(&top) || marks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition(format!(
                "marks {marks:?} must increase from 0 to {top}"
            )));
        }
        Ok(AnchorSet { values, marks })
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    /// The largest index `M`; the set has `M + 1` elements.
    pub fn top(&self) -> usize {
        self.values.len() - 1
    }

    fn index_of(&self, v: &Rational) -> Option<usize> {
        self.values.binary_search(v).ok()
    }
}

/// The anchor set for `B(1, alpha)`, `alpha > 1`: with `m = ceil(alpha)`,
/// `a_0 = 0`, `a_l = 1 + (l-1)(alpha-1)/(m-1)` for `1 <= l <= m` and
/// `a_{m+1} = alpha + 1`. Marks are `0, 1, m+1`.
pub fn anchor_set_one_alpha(alpha: &Rational) -> Result<AnchorSet> {
    if alpha <= &Rational::one() {
        return Err(Error::Precondition(format!(
            "alpha = {alpha} must exceed 1; use the general anchor sequence instead"
        )));
    }
    let m: usize = alpha.ceil().to_integer().try_into().expect("alpha fits in usize");
    let mut values = vec![Rational::zero()];
    let spread = alpha - Rational::one();
    for l in 1..=m {
        values.push(Rational::one() + rational::frac(l as i64 - 1, m as i64 - 1) * &spread);
    }
    values.push(alpha + Rational::one());
    AnchorSet::new(values, vec![0, 1, m + 1])
}

/// Finds a copy of `baton` in a subset `points` of `A^n`.
///
/// The points are read as a subset of `{0..M}^n` through `x -> (a_{x_1}, ...)`,
/// a `B_M` is extracted, oriented so that it ascends along its witness axis,
/// and the points at the marked indices are mapped back. The returned
/// embedding indexes into `points` and is checked exactly before returning.
pub fn extract_general_baton(points: &PointSet, baton: &Baton, anchors: &AnchorSet) -> Result<CopyEmbedding> {
    if anchors.marks.len() != baton.k() + 1 {
        return Err(Error::Precondition(format!(
            "anchor set marks {} points but the baton has {}",
            anchors.marks.len(),
            baton.k() + 1
        )));
    }
    let top = anchors.top();
    let n = points.dim();
    let pulled: Vec<Vec<u32>> = points
        .points()
        .iter()
        .map(|p| {
            p.iter()
                .map(|c| {
                    anchors
                        .index_of(c)
                        .map(|i| i as u32)
                        .ok_or_else(|| Error::Domain(format!("coordinate {c} is not an anchor value")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let grid = GridSubset::new(n, top as u32, pulled)?;
    let mut chain = extract_unit_baton_points(&grid).map_err(|e| match e {
        Error::Precondition(_) => Error::Precondition(format!(
            "|B| = {} does not exceed M^n = {}^{n}",
            points.len(),
            top
        )),
        other => other,
    })?;

    let first = &chain[0];
    let last = &chain[top];
    let axis = (0..n)
        .find(|&j| first[j].abs_diff(last[j]) as usize == top)
        .expect("the endpoints of B_M differ by M on some axis");
    if first[axis] as usize == top {
        chain.reverse();
    }

    let indices: Vec<usize> = anchors
        .marks
        .iter()
        .map(|&mark| {
            let image: Vec<Rational> = chain[mark].iter().map(|&i| anchors.values[i as usize].clone()).collect();
            points.index_of(&image).expect("image lies in B")
        })
        .collect();
    let embedding = CopyEmbedding {
        source: baton.metric(),
        indices,
    };
    embedding.verify(points).map_err(|why| {
        Error::Precondition(format!(
            "anchor set does not carry the baton ({why}); it violates the anchoring conditions"
        ))
    })?;
    Ok(embedding)
}
