//! Covers of the discrete torus `Z_m^n` by translates of the cube `[d-1]_0^n`.
//!
//! Points are mixed-radix integers, most significant coordinate first, so
//! index order is lexicographic order of coordinate vectors. A translate is
//! named by its corner, which is itself a torus point.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Largest torus handled, in points.
pub const MAX_POINTS: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverInstance {
    pub m: u32,
    pub d: u32,
    pub n: u32,
}

impl CoverInstance {
    pub fn new(m: u32, d: u32, n: u32) -> Result<Self> {
        if d < 1 || d > m {
            return Err(Error::Precondition(format!("cube side d = {d} must satisfy 1 <= d <= m = {m}")));
        }
        if n < 1 {
            return Err(Error::Precondition("dimension n must be at least 1".into()));
        }
        match (m as u64).checked_pow(n) {
            Some(size) if size <= MAX_POINTS => Ok(CoverInstance { m, d, n }),
            _ => Err(Error::Precondition(format!("torus Z_{m}^{n} exceeds {MAX_POINTS} points"))),
        }
    }

    pub fn points(&self) -> usize {
        (self.m as usize).pow(self.n)
    }

    pub fn cube_volume(&self) -> usize {
        (self.d as usize).pow(self.n)
    }

    pub fn decode(&self, mut x: usize) -> Vec<u32> {
        let mut out = vec![0u32; self.n as usize];
        for c in out.iter_mut().rev() {
            *c = (x % self.m as usize) as u32;
            x /= self.m as usize;
        }
        out
    }

    pub fn encode(&self, coords: &[u32]) -> usize {
        coords.iter().fold(0usize, |acc, &c| acc * self.m as usize + c as usize)
    }

    /// Offsets of the cube, as index increments per coordinate.
    fn cube_offsets(&self) -> Vec<Vec<u32>> {
        let inner = CoverInstance {
            m: self.d,
            d: self.d,
            n: self.n,
        };
        (0..self.cube_volume()).map(|i| inner.decode(i)).collect()
    }

    /// Points covered by the translate with corner `t`.
    pub fn covered_by(&self, t: usize) -> Vec<usize> {
        self.shifted(t, 1)
    }

    /// Corners of the translates covering point `p`.
    pub fn covering(&self, p: usize) -> Vec<usize> {
        self.shifted(p, -1)
    }

    fn shifted(&self, base: usize, sign: i64) -> Vec<usize> {
        let b = self.decode(base);
        let m = self.m as i64;
        self.cube_offsets()
            .iter()
            .map(|o| {
                let c: Vec<u32> = b
                    .iter()
                    .zip(o)
                    .map(|(&x, &y)| (x as i64 + sign * y as i64).rem_euclid(m) as u32)
                    .collect();
                self.encode(&c)
            })
            .collect()
    }

    /// Both incidence tables: `cover[t]` lists points of translate `t`,
    /// `covering[p]` lists translates containing `p`.
    fn incidence(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let offsets = self.cube_offsets();
        let total = self.points();
        let m = self.m as usize;
        let mut cover = Vec::with_capacity(total);
        let mut covering = vec![Vec::with_capacity(offsets.len()); total];
        for t in 0..total {
            let tc = self.decode(t);
            let pts: Vec<usize> = offsets
                .iter()
                .map(|o| {
                    tc.iter()
                        .zip(o)
                        .fold(0usize, |acc, (&x, &y)| acc * m + (x as usize + y as usize) % m)
                })
                .collect();
            for &p in &pts {
                covering[p].push(t);
            }
            cover.push(pts);
        }
        (cover, covering)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    Exact,
    Greedy,
    Randomized,
}

/// Bookkeeping of the random construction: `s` uniform translates, then one
/// translate at each point they miss.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizedStats {
    pub s: u64,
    pub leftovers: u64,
    /// The seed of the accepted trial.
    pub seed: u64,
    /// `s + leftovers <= s + ceil((m/d)^n)`.
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSolution {
    #[serde(flatten)]
    pub instance: CoverInstance,
    pub method: CoverMethod,
    /// Translate corners. Sorted for exact and greedy covers; for randomized
    /// covers the `s` random draws come first, then the leftovers in order.
    pub translates: Vec<Vec<u32>>,
    pub size: usize,
    pub optimal: bool,
    pub lower_bound: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomizedStats>,
}

impl CoverSolution {
    fn new(instance: CoverInstance, method: CoverMethod, mut corners: Vec<usize>, proven: bool) -> Self {
        if method != CoverMethod::Randomized {
            corners.sort_unstable();
            corners.dedup();
        }
        let counting = counting_lower_bound(&instance);
        let optimal = proven || corners.len() as u64 == counting;
        CoverSolution {
            instance,
            method,
            size: corners.len(),
            translates: corners.iter().map(|&c| instance.decode(c)).collect(),
            optimal,
            lower_bound: if optimal { corners.len() as u64 } else { counting },
            random: None,
        }
    }

    /// Points left uncovered, in index order.
    pub fn uncovered(&self) -> Vec<usize> {
        let inst = &self.instance;
        let mut hit = vec![false; inst.points()];
        for t in &self.translates {
            for p in inst.covered_by(inst.encode(t)) {
                hit[p] = true;
            }
        }
        (0..hit.len()).filter(|&p| !hit[p]).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.uncovered().is_empty()
    }
}

/// `ceil(m^n / d^n)`: every translate covers exactly `d^n` points.
pub fn counting_lower_bound(inst: &CoverInstance) -> u64 {
    let total = inst.points() as u64;
    let vol = inst.cube_volume() as u64;
    total.div_ceil(vol)
}

/// Largest `m^n * d^n` for which greedy and exact covers build their
/// incidence tables.
pub const MAX_INCIDENCE: u64 = 20_000_000;

/// The incidence tables, or `None` when `d = m` and the origin alone covers.
fn checked_incidence(inst: &CoverInstance) -> Result<Option<(Vec<Vec<usize>>, Vec<Vec<usize>>)>> {
    if inst.d == inst.m {
        return Ok(None);
    }
    let entries = inst.points() as u64 * inst.cube_volume() as u64;
    if entries > MAX_INCIDENCE {
        return Err(Error::Precondition(format!(
            "Z_{}^{} with cubes of side {} needs {entries} incidence entries, above {MAX_INCIDENCE}",
            inst.m, inst.n, inst.d
        )));
    }
    Ok(Some(inst.incidence()))
}

/// Repeatedly takes the translate covering the most uncovered points, the
/// smallest corner on ties.
pub fn greedy_cover(inst: &CoverInstance) -> Result<CoverSolution> {
    let corners = match checked_incidence(inst)? {
        None => vec![0],
        Some((cover, covering)) => greedy_corners(&cover, &covering),
    };
    Ok(CoverSolution::new(*inst, CoverMethod::Greedy, corners, false))
}

fn greedy_corners(cover: &[Vec<usize>], covering: &[Vec<usize>]) -> Vec<usize> {
    let mut covered = vec![false; covering.len()];
    let mut gain: Vec<usize> = cover
        .iter()
        .map(|pts| pts.iter().filter(|&&p| !covered[p]).count())
        .collect();
    let mut remaining = covered.iter().filter(|&&c| !c).count();
    let mut chosen = Vec::new();
    while remaining > 0 {
        let best = (0..gain.len()).fold(0, |b, t| if gain[t] > gain[b] { t } else { b });
        chosen.push(best);
        for &p in &cover[best] {
            if !covered[p] {
                covered[p] = true;
                remaining -= 1;
                for &t in &covering[p] {
                    gain[t] -= 1;
                }
            }
        }
    }
    chosen
}

/// `floor(n log d (m/d)^n)`, natural log, certified by interval refinement.
pub fn random_translate_count(inst: &CoverInstance) -> u64 {
    if inst.d == 1 {
        return 0;
    }
    let ratio = num_traits::pow(
        Rational::new(BigInt::from(inst.m), BigInt::from(inst.d)),
        inst.n as usize,
    );
    let scale = &ratio * rational::int(inst.n as i64);
    rational::certified_floor(|terms| {
        let (lo, hi) = rational::ln_bounds(inst.d as u64, terms);
        (lo * &scale, hi * &scale)
    })
    .to_u64()
    .expect("translate count fits in u64")
}

/// Retry cap for the random construction.
pub const MAX_ATTEMPTS: u32 = 1000;

/// One trial: `s` uniform translates, plus a translate at each missed point.
fn random_trial(inst: &CoverInstance, s: u64, seed: u64) -> (Vec<usize>, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut covered = vec![false; inst.points()];
    let mut corners = Vec::with_capacity(s as usize);
    for _ in 0..s {
        let c: Vec<u32> = (0..inst.n).map(|_| rng.gen_range(0..inst.m)).collect();
        let t = inst.encode(&c);
        for p in inst.covered_by(t) {
            covered[p] = true;
        }
        corners.push(t);
    }
    let before = corners.len();
    corners.extend((0..covered.len()).filter(|&p| !covered[p]));
    let leftovers = (corners.len() - before) as u64;
    (corners, leftovers)
}

/// The random construction, retried with seeds `seed, seed + 1, ...` until
/// the total is at most `s + ceil((m/d)^n)`. After [`MAX_ATTEMPTS`] trials the
/// smallest cover found is returned with `within_bound = false`.
pub fn random_cover_with_retries(inst: &CoverInstance, seed: u64) -> Result<CoverSolution> {
    if inst.d >= inst.m {
        return Err(Error::Precondition(format!(
            "random covering needs d < m, got d = {}, m = {}",
            inst.d, inst.m
        )));
    }
    let s = random_translate_count(inst);
    let bound = s + counting_lower_bound(inst);
    let mut best: Option<(Vec<usize>, u64, u64)> = None;
    for attempt in 1..=MAX_ATTEMPTS {
        let trial_seed = seed.wrapping_add(attempt as u64 - 1);
        let (corners, leftovers) = random_trial(inst, s, trial_seed);
        let total = corners.len() as u64;
        if best.as_ref().is_none_or(|b| total < b.0.len() as u64) {
            best = Some((corners, leftovers, trial_seed));
        }
        if total <= bound {
            break;
        }
    }
    let (corners, leftovers, used_seed) = best.expect("at least one trial");
    let within_bound = corners.len() as u64 <= bound;
    let mut sol = CoverSolution::new(*inst, CoverMethod::Randomized, corners, false);
    sol.random = Some(RandomizedStats {
        s,
        leftovers,
        seed: used_seed,
        within_bound,
    });
    Ok(sol)
}

/// The random construction for `d >= 2`; for `d = 1`, where `log d = 0`, the
/// greedy cover instead.
pub fn randomized_cover(inst: &CoverInstance, seed: u64) -> Result<CoverSolution> {
    if inst.d == 1 {
        return greedy_cover(inst);
    }
    random_cover_with_retries(inst, seed)
}

/// Minimum cover by branch and bound.
///
/// The first translate is fixed at the origin, which the torus symmetry
/// allows when only the size matters. Each node branches on the uncovered
/// point with the fewest usable translates; later branches exclude the
/// translates tried before them. Nodes are pruned by the counting bound and by
/// a greedy packing of uncovered points with disjoint translate sets.
///
/// With the budget exhausted the best cover found is returned with
/// `optimal = false`.
pub fn exact_cover(inst: &CoverInstance, budget: u64) -> Result<CoverSolution> {
    let Some((cover, covering)) = checked_incidence(inst)? else {
        return Ok(CoverSolution::new(*inst, CoverMethod::Exact, vec![0], true));
    };
    let greedy = greedy_corners(&cover, &covering);
    let mut search = CoverSearch {
        cover: &cover,
        covering: &covering,
        vol: inst.cube_volume(),
        count: vec![0; inst.points()],
        uncovered: inst.points(),
        excluded: vec![false; inst.points()],
        chosen: Vec::new(),
        best: greedy,
        nodes: 0,
        budget,
        exhausted: false,
        mark: vec![0; inst.points()],
        stamp: 0,
    };
    search.add(0);
    search.run();
    let proven = !search.exhausted;
    Ok(CoverSolution::new(*inst, CoverMethod::Exact, search.best, proven))
}

struct CoverSearch<'a> {
    cover: &'a [Vec<usize>],
    covering: &'a [Vec<usize>],
    vol: usize,
    count: Vec<u32>,
    uncovered: usize,
    excluded: Vec<bool>,
    chosen: Vec<usize>,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
    mark: Vec<u64>,
    stamp: u64,
}

impl CoverSearch<'_> {
    fn add(&mut self, t: usize) {
        self.chosen.push(t);
        for &p in &self.cover[t] {
            if self.count[p] == 0 {
                self.uncovered -= 1;
            }
            self.count[p] += 1;
        }
    }

    fn remove(&mut self) {
        let t = self.chosen.pop().expect("nonempty");
        for &p in &self.cover[t] {
            self.count[p] -= 1;
            if self.count[p] == 0 {
                self.uncovered += 1;
            }
        }
    }

    /// Uncovered points whose usable translates are pairwise disjoint each
    /// need their own translate.
    fn packing_bound(&mut self) -> usize {
        self.stamp += 1;
        let mut packed = 0;
        for p in 0..self.count.len() {
            if self.count[p] != 0 {
                continue;
            }
            let free = self.covering[p]
                .iter()
                .all(|&t| self.excluded[t] || self.mark[t] != self.stamp);
            if free {
                packed += 1;
                for &t in &self.covering[p] {
                    self.mark[t] = self.stamp;
                }
            }
        }
        packed
    }

    fn run(&mut self) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if self.uncovered == 0 {
            if self.chosen.len() < self.best.len() {
                self.best = self.chosen.clone();
            }
            return;
        }
        let need = self.uncovered.div_ceil(self.vol);
        if self.chosen.len() + need >= self.best.len() {
            return;
        }
        if self.chosen.len() + self.packing_bound() >= self.best.len() {
            return;
        }

        // fail first: the uncovered point with the fewest usable translates
        let mut pick = None;
        let mut fewest = usize::MAX;
        for p in 0..self.count.len() {
            if self.count[p] == 0 {
                let options = self.covering[p].iter().filter(|&&t| !self.excluded[t]).count();
                if options < fewest {
                    fewest = options;
                    pick = Some(p);
                    if options <= 1 {
                        break;
                    }
                }
            }
        }
        let p = pick.expect("an uncovered point exists");
        if fewest == 0 {
            return;
        }
        let options: Vec<usize> = self.covering[p]
            .iter()
            .copied()
            .filter(|&t| !self.excluded[t])
            .collect();
        let mut newly_excluded = Vec::new();
        for t in options {
            self.add(t);
            self.run();
            self.remove();
            if self.exhausted {
                break;
            }
            self.excluded[t] = true;
            newly_excluded.push(t);
        }
        for t in newly_excluded {
            self.excluded[t] = false;
        }
    }
}

/// Smallest cover by trying every set of translates, in increasing size from
/// the counting bound. Exponential; a reference for tiny tori only.
pub fn naive_min_cover(inst: &CoverInstance) -> usize {
    let total = inst.points();
    assert!(total <= 64, "naive enumeration needs at most 64 torus points");
    let full: u64 = if total == 64 { u64::MAX } else { (1u64 << total) - 1 };
    let masks: Vec<u64> = (0..total)
        .map(|t| inst.covered_by(t).iter().fold(0u64, |acc, &p| acc | 1 << p))
        .collect();

    fn search(masks: &[u64], full: u64, start: usize, left: usize, acc: u64) -> bool {
        if acc == full {
            return true;
        }
        if left == 0 {
            return false;
        }
        (start..masks.len()).any(|t| search(masks, full, t + 1, left - 1, acc | masks[t]))
    }

    let mut size = counting_lower_bound(inst) as usize;
    while !search(&masks, full, 0, size, 0) {
        size += 1;
    }
    size
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CnRow {
    pub n: u32,
    pub lower: u64,
    pub upper: u64,
    pub exact: bool,
}

/// Bounds on the least number of translates of `{0,1}^n` covering `Z_3^n`.
pub fn cn_table(n_max: u32, budget: u64) -> Result<Vec<CnRow>> {
    if n_max < 1 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let inst = CoverInstance::new(3, 2, n)?;
        let exact = exact_cover(&inst, budget)?;
        let random = randomized_cover(&inst, 0)?;
        let upper = exact.size.min(random.size) as u64;
        let lower = exact.lower_bound;
        rows.push(CnRow {
            n,
            lower,
            upper,
            exact: exact.optimal,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(m: u32, d: u32, n: u32) -> CoverInstance {
        CoverInstance::new(m, d, n).unwrap()
    }

    #[test]
    fn instance_validation() {
        assert!(CoverInstance::new(3, 0, 1).is_err());
        assert!(CoverInstance::new(3, 4, 1).is_err());
        assert!(CoverInstance::new(3, 2, 0).is_err());
        assert!(CoverInstance::new(10, 2, 9).is_err());
        let i = inst(3, 2, 2);
        assert_eq!(i.decode(5), vec![1, 2]);
        assert_eq!(i.encode(&[1, 2]), 5);
        assert_eq!(i.covered_by(i.encode(&[2, 2])), vec![8, 6, 2, 0]);
    }

    #[test]
    fn counting_bound_examples() {
        assert_eq!(counting_lower_bound(&inst(3, 2, 1)), 2);
        assert_eq!(counting_lower_bound(&inst(3, 2, 2)), 3);
        assert_eq!(counting_lower_bound(&inst(3, 2, 4)), 6);
    }

    #[test]
    fn exact_examples() {
        let s = exact_cover(&inst(3, 2, 1), 1_000_000).unwrap();
        assert_eq!((s.size, s.optimal, s.lower_bound), (2, true, 2));
        assert!(s.is_complete());
        let s = exact_cover(&inst(3, 2, 2), 1_000_000).unwrap();
        assert_eq!((s.size, s.optimal), (3, true));
        let s = exact_cover(&inst(2, 2, 3), 1_000_000).unwrap();
        assert_eq!((s.size, s.optimal), (1, true));
        assert_eq!(s.translates, vec![vec![0, 0, 0]]);
    }

    #[test]
    fn exact_matches_naive_on_small_tori() {
        for (m, n) in [(2, 1), (2, 2), (2, 3), (2, 4), (3, 1), (3, 2), (3, 3), (4, 1), (4, 2), (5, 2), (6, 1)] {
            for d in 1..=m {
                let i = inst(m, d, n);
                let e = exact_cover(&i, 10_000_000).unwrap();
                assert!(e.optimal && e.is_complete());
                assert_eq!(e.size, naive_min_cover(&i), "m={m} d={d} n={n}");
            }
        }
    }

    #[test]
    fn greedy_examples() {
        let g = greedy_cover(&inst(3, 2, 1)).unwrap();
        assert_eq!(g.size, 2);
        assert!(g.is_complete());
        let g = greedy_cover(&inst(3, 2, 2)).unwrap();
        assert!(g.size <= 4 && g.is_complete());
        let g = greedy_cover(&inst(2, 2, 2)).unwrap();
        assert_eq!((g.size, g.optimal), (1, true));
    }

    #[test]
    fn random_translate_counts() {
        assert_eq!(random_translate_count(&inst(3, 2, 1)), 1);
        let s: Vec<u64> = (1..=4).map(|n| random_translate_count(&inst(3, 2, n))).collect();
        assert_eq!(s, vec![1, 3, 7, 14]);
        assert_eq!(random_translate_count(&inst(2, 1, 1)), 0);
    }

    #[test]
    fn randomized_covers() {
        let r = random_cover_with_retries(&inst(2, 1, 1), 0).unwrap();
        assert_eq!(r.size, 2);
        assert_eq!(r.random.as_ref().unwrap().s, 0);
        for n in 1..=4 {
            let r = randomized_cover(&inst(3, 2, n), 7).unwrap();
            assert!(r.is_complete());
            let stats = r.random.clone().unwrap();
            assert!(stats.within_bound);
            assert_eq!(r.size as u64, stats.s + stats.leftovers);
        }
        let g = randomized_cover(&inst(3, 1, 2), 0).unwrap();
        assert_eq!((g.method, g.size), (CoverMethod::Greedy, 9));
        assert!(randomized_cover(&inst(2, 2, 1), 0).is_err());
    }

    #[test]
    fn randomized_is_deterministic_per_seed() {
        let a = randomized_cover(&inst(3, 2, 3), 11).unwrap();
        let b = randomized_cover(&inst(3, 2, 3), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn table_rows() {
        let rows = cn_table(3, 1_000_000).unwrap();
        assert_eq!((rows[0].lower, rows[0].upper, rows[0].exact), (2, 2, true));
        assert_eq!((rows[1].lower, rows[1].upper, rows[1].exact), (3, 3, true));
        for r in &rows {
            assert!(r.lower <= r.upper);
            let bound = 4.0 * r.n as f64 * 1.5f64.powi(r.n as i32);
            assert!((r.upper as f64) <= bound);
        }
    }
}
