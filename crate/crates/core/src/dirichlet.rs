//! Anchor sequences for arbitrary batons.
//!
//! Given steps `alpha_1..alpha_k`, the goal is integers `p_1..p_k` and a
//! strictly increasing sequence `a_0 = 0 < a_1 < ... < a_m`, `m = sum p_i`,
//! that is subadditive (`a_{l+r} <= a_l + a_r`) and hits every nonnegative
//! integer combination `gamma = sum d_i alpha_i <= sum alpha_i` at index
//! `sum d_i p_i`.
//!
//! The construction scales by a common denominator `q` from a simultaneous
//! Diophantine approximation `|alpha_i - p_i / q| < q^{-(1+1/k)}`. For `q`
//! large enough the rounding `c(gamma) = round(q gamma)` is strictly increasing
//! and additive on the combinations, and `a` is defined blockwise: on
//! `c(gamma_{i-1}) < l <= c(gamma_i)` it climbs to `gamma_i` with slope
//! `delta / (2m)`, where `delta` is the smallest gap between consecutive
//! combinations.
//!
//! All values are exact. The sequence is stored as integer numerators over one
//! common denominator, which keeps sequences with millions of entries cheap.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use crate::baton::AnchorSet;
use crate::error::{Error, Result};
use crate::metric::Baton;
use crate::rational::{self, Rational};

/// All combinations `sum d_i alpha_i <= sum alpha_i`, sorted and deduplicated,
/// plus the least combination above the total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaSet {
    pub steps: Vec<Rational>,
    /// `(gamma, witness coefficients)`, strictly increasing in `gamma`.
    pub gammas: Vec<(Rational, Vec<u64>)>,
    pub gamma_next: Rational,
}

impl GammaSet {
    pub fn values(&self) -> impl Iterator<Item = &Rational> {
        self.gammas.iter().map(|(g, _)| g)
    }

    /// `t`, the index of the largest element `gamma_t = sum alpha_i`.
    pub fn t(&self) -> usize {
        self.gammas.len() - 1
    }

    /// Smallest gap between consecutive elements of `gamma_0 .. gamma_{t+1}`.
    pub fn delta(&self) -> Rational {
        let mut vals: Vec<&Rational> = self.values().collect();
        vals.push(&self.gamma_next);
        vals.windows(2).map(|w| w[1] - w[0]).min().expect("at least two values")
    }

    /// `gamma_t / gamma_1`.
    pub fn theta(&self) -> Rational {
        &self.gammas[self.t()].0 / &self.gammas[1].0
    }
}

/// Every coefficient vector `d` with `d_i <= bound_i`, in lexicographic order.
fn for_each_coefficients(bounds: &[u64], mut f: impl FnMut(&[u64])) {
    let mut d = vec![0u64; bounds.len()];
    loop {
        f(&d);
        let mut i = d.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if d[i] < bounds[i] {
                d[i] += 1;
                break;
            }
            d[i] = 0;
        }
    }
}

fn combination(d: &[u64], steps: &[Rational]) -> Rational {
    d.iter()
        .zip(steps)
        .map(|(&c, a)| a * rational::int(c as i64))
        .sum()
}

fn coefficient_bounds(steps: &[Rational], extra: u64) -> Vec<u64> {
    let total: Rational = steps.iter().sum();
    steps
        .iter()
        .map(|a| {
            rational::floor_to_bigint(&(&total / a))
                .to_u64()
                .expect("coefficient bound fits in u64")
                + extra
        })
        .collect()
}

/// Every coefficient vector whose combination does not exceed the total,
/// with its value. Several vectors may share a value.
pub fn gamma_combinations(baton: &Baton) -> Vec<(Vec<u64>, Rational)> {
    let steps = baton.steps();
    let total = baton.total();
    let mut out = Vec::new();
    for_each_coefficients(&coefficient_bounds(steps, 0), |d| {
        let v = combination(d, steps);
        if v <= total {
            out.push((d.to_vec(), v));
        }
    });
    out
}

pub fn gamma_set(baton: &Baton) -> GammaSet {
    let steps = baton.steps();
    let total = baton.total();
    let mut below: BTreeMap<Rational, Vec<u64>> = BTreeMap::new();
    let mut next: Option<Rational> = None;
    // One extra unit per coordinate reaches the least combination above the
    // total: dropping any used step from it lands at or below the total.
    for_each_coefficients(&coefficient_bounds(steps, 1), |d| {
        let v = combination(d, steps);
        if v <= total {
            below.entry(v).or_insert_with(|| d.to_vec());
        } else if next.as_ref().is_none_or(|n| &v < n) {
            next = Some(v);
        }
    });
    GammaSet {
        steps: steps.to_vec(),
        gammas: below.into_iter().collect(),
        gamma_next: next.expect("some combination exceeds the total"),
    }
}

/// `q` with numerators `p_i = round(q alpha_i)` and the exact errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirichletWitness {
    pub q: u64,
    pub numerators: Vec<u64>,
    pub errors: Vec<Rational>,
}

impl DirichletWitness {
    /// `error_i^k * q^(k+1) < 1` for every `i`, i.e. `error_i < q^{-(1+1/k)}`.
    pub fn satisfies_bound(&self) -> bool {
        let k = self.errors.len();
        let q = rational::int(self.q as i64);
        let scale = num_traits::pow(q, k + 1);
        self.errors
            .iter()
            .all(|e| num_traits::pow(e.clone(), k) * &scale < Rational::one())
    }
}

/// The least `q > q0` for which rounding `q alpha_i` approximates every step
/// within `q^{-(1+1/k)}`. A linear scan; Dirichlet's theorem guarantees it
/// stops, and for rational steps any common denominator works.
pub fn dirichlet_approx(steps: &[Rational], q0: u64) -> Result<DirichletWitness> {
    if q0 == 0 {
        return Err(Error::Precondition("q0 must be at least 1".into()));
    }
    if steps.is_empty() || steps.iter().any(|s| !s.is_positive()) {
        return Err(Error::Precondition("steps must be nonempty and positive".into()));
    }
    let mut q = q0 + 1;
    loop {
        let qr = rational::int(q as i64);
        let numerators: Vec<BigInt> = steps.iter().map(|a| rational::round_half_up(&(a * &qr))).collect();
        let errors: Vec<Rational> = steps
            .iter()
            .zip(&numerators)
            .map(|(a, p)| (a - Rational::new(p.clone(), qr.to_integer())).abs())
            .collect();
        let witness = DirichletWitness {
            q,
            numerators: numerators.iter().map(|p| p.to_u64().expect("p_i fits in u64")).collect(),
            errors,
        };
        if witness.satisfies_bound() {
            return Ok(witness);
        }
        q += 1;
    }
}

/// Exact sequence `a_l = numer[l] / denom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorValues {
    numer: Vec<i128>,
    denom: i128,
}

impl AnchorValues {
    pub fn from_rationals(values: &[Rational]) -> Result<Self> {
        let denom = rational::lcm_of_denominators(values);
        let overflow = || Error::Precondition("anchor values too large for the common-denominator form".into());
        let numer = values
            .iter()
            .map(|v| (v * Rational::from_integer(denom.clone())).to_integer().to_i128().ok_or_else(overflow))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnchorValues {
            numer,
            denom: denom.to_i128().ok_or_else(overflow)?,
        })
    }

    /// The integer sequence `0, 1, ..., m`.
    pub fn identity(m: usize) -> Self {
        AnchorValues {
            numer: (0..=m as i128).collect(),
            denom: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.numer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numer.is_empty()
    }

    pub fn get(&self, l: usize) -> Rational {
        Rational::new(BigInt::from(self.numer[l]), BigInt::from(self.denom))
    }

    pub fn to_rationals(&self) -> Vec<Rational> {
        (0..self.len()).map(|l| self.get(l)).collect()
    }

    pub fn numerators(&self) -> &[i128] {
        &self.numer
    }

    pub fn denominator(&self) -> i128 {
        self.denom
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorSequence {
    pub p: Vec<u64>,
    pub m: usize,
    pub values: AnchorValues,
    /// The common denominator behind `c(gamma) = round(q gamma)`; `None` for
    /// sequences supplied without one.
    pub q: Option<u64>,
    pub delta: Rational,
    pub theta: Rational,
    /// The threshold the approximation scan started from, when it ran.
    pub q0: Option<u64>,
}

#[derive(Serialize)]
struct AnchorSequenceJson {
    p: Vec<u64>,
    m: usize,
    a: Vec<String>,
    q: Option<u64>,
    q0: Option<u64>,
    delta: String,
    theta: String,
}

impl AnchorSequence {
    /// A caller-supplied sequence, with `delta` and `theta` taken from the
    /// baton's combination set.
    pub fn from_parts(baton: &Baton, p: Vec<u64>, a: &[Rational], q: Option<u64>) -> Result<Self> {
        let gammas = gamma_set(baton);
        Ok(AnchorSequence {
            m: p.iter().sum::<u64>() as usize,
            p,
            values: AnchorValues::from_rationals(a)?,
            q,
            delta: gammas.delta(),
            theta: gammas.theta(),
            q0: None,
        })
    }

    pub fn a(&self, l: usize) -> Rational {
        self.values.get(l)
    }

    /// Index marks `0, p_1, p_1 + p_2, ..., m`.
    pub fn marks(&self) -> Vec<usize> {
        let mut acc = 0usize;
        let mut out = vec![0];
        for &p in &self.p {
            acc += p as usize;
            out.push(acc);
        }
        out
    }

    pub fn anchor_set(&self) -> Result<AnchorSet> {
        AnchorSet::new(self.values.to_rationals(), self.marks())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(AnchorSequenceJson {
            p: self.p.clone(),
            m: self.m,
            a: self.values.to_rationals().iter().map(rational::format_rational).collect(),
            q: self.q,
            q0: self.q0,
            delta: rational::format_rational(&self.delta),
            theta: rational::format_rational(&self.theta),
        })
        .expect("anchor sequence serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Construction {
    /// Integer steps use `a_l = l`; everything else uses the full construction.
    #[default]
    Auto,
    Faithful,
}

/// Least `q0` with `1/q0 < delta` and `theta / q0^(1+1/k) < 1/(2 q0)`; the
/// latter is `(2 theta)^k < q0` after clearing the root.
pub fn threshold_q0(delta: &Rational, theta: &Rational, k: usize) -> u64 {
    let admissible = |q0: &BigInt| {
        let q = Rational::from_integer(q0.clone());
        Rational::one() < delta * &q && num_traits::pow(theta * rational::int(2), k) < q
    };
    let first = rational::floor_to_bigint(&delta.recip()).max(rational::floor_to_bigint(&num_traits::pow(
        theta * rational::int(2),
        k,
    ))) + 1;
    debug_assert!(admissible(&first));
    debug_assert!(first <= BigInt::one() || !admissible(&(&first - 1)));
    first.to_u64().expect("q0 fits in u64")
}

/// Builds the anchor sequence for `baton` and checks it before returning.
///
/// # Panics
///
/// If no admissible `q` among the first few yields a sequence that passes
/// [`verify_anchor_sequence`]; the construction guarantees the first does.
pub fn build_anchor_sequence(baton: &Baton, mode: Construction) -> AnchorSequence {
    let gammas = gamma_set(baton);
    let delta = gammas.delta();
    let theta = gammas.theta();

    if mode == Construction::Auto && baton.is_integral() {
        let p: Vec<u64> = baton
            .steps()
            .iter()
            .map(|s| s.to_integer().to_u64().expect("integer step fits in u64"))
            .collect();
        let m = p.iter().sum::<u64>() as usize;
        return AnchorSequence {
            p,
            m,
            values: AnchorValues::identity(m),
            q: Some(1),
            delta,
            theta,
            q0: None,
        };
    }

    let k = baton.k();
    let q0 = threshold_q0(&delta, &theta, k);
    let mut start = q0;
    for _ in 0..64 {
        let witness = dirichlet_approx(baton.steps(), start).expect("valid steps");
        if let Some(seq) = blockwise_sequence(&gammas, &witness, &delta, &theta, q0) {
            if verify_anchor_sequence(&seq, baton).passed() {
                return seq;
            }
        }
        start = witness.q;
    }
    panic!("anchor construction failed for steps {:?}", baton.steps());
}

/// `a_l = gamma_i - (c(gamma_i) - l) delta / (2m)` on each block
/// `c(gamma_{i-1}) < l <= c(gamma_i)`. `None` if `c` is not strictly increasing
/// or does not end at `m`.
fn blockwise_sequence(
    gammas: &GammaSet,
    witness: &DirichletWitness,
    delta: &Rational,
    theta: &Rational,
    q0: u64,
) -> Option<AnchorSequence> {
    let m = witness.numerators.iter().sum::<u64>() as usize;
    let q = rational::int(witness.q as i64);
    let c: Vec<i128> = gammas
        .values()
        .map(|g| rational::round_half_up(&(g * &q)).to_i128().expect("c fits"))
        .collect();
    if c[0] != 0 || *c.last()? != m as i128 || c.windows(2).any(|w| w[1] <= w[0]) {
        return None;
    }

    // a_l * L with L = 2m D, D the common denominator of the steps
    let d = rational::lcm_of_denominators(&gammas.steps);
    let scale = BigInt::from(2 * m as u64) * &d;
    let to_i128 = |r: Rational| r.to_integer().to_i128().expect("scaled value fits in i128");
    let delta_d = to_i128(delta * Rational::from_integer(d.clone()));
    let mut numer = Vec::with_capacity(m + 1);
    numer.push(0i128);
    for (i, (gamma, _)) in gammas.gammas.iter().enumerate().skip(1) {
        let top = to_i128(gamma * Rational::from_integer(scale.clone()));
        for l in (c[i - 1] + 1)..=c[i] {
            numer.push(top - (c[i] - l) * delta_d);
        }
    }
    Some(AnchorSequence {
        p: witness.numerators.clone(),
        m,
        values: AnchorValues {
            numer,
            denom: scale.to_i128().expect("denominator fits in i128"),
        },
        q: Some(witness.q),
        delta: delta.clone(),
        theta: theta.clone(),
        q0: Some(q0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `m = sum p_i`, `m + 1` values, `a_0 = 0`.
    Shape,
    Monotone,
    Subadditive,
    Anchoring,
    /// `c` strictly increasing on the combination set.
    RoundingIncreasing,
    /// `c(sum d_i alpha_i) = sum d_i p_i`.
    RoundingLinear,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum ClauseStatus {
    Pass,
    Fail(String),
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClauseResult {
    pub clause: Clause,
    #[serde(flatten)]
    pub status: ClauseStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub clauses: Vec<ClauseResult>,
}

impl VerificationReport {
    /// No clause failed; skipped clauses do not count against the report.
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| !matches!(c.status, ClauseStatus::Fail(_)))
    }

    pub fn status(&self, clause: Clause) -> &ClauseStatus {
        &self
            .clauses
            .iter()
            .find(|c| c.clause == clause)
            .expect("every clause is reported")
            .status
    }
}

/// Checks every defining property of an anchor sequence for `baton`,
/// reporting the first counterexample of each failed clause.
pub fn verify_anchor_sequence(seq: &AnchorSequence, baton: &Baton) -> VerificationReport {
    let mut clauses = Vec::new();
    let mut push = |clause, status| clauses.push(ClauseResult { clause, status });

    let shape = check_shape(seq, baton);
    let shape_ok = shape == ClauseStatus::Pass;
    push(Clause::Shape, shape);
    if !shape_ok {
        let why = ClauseStatus::Skipped("sequence shape is invalid".into());
        for c in [
            Clause::Monotone,
            Clause::Subadditive,
            Clause::Anchoring,
            Clause::RoundingIncreasing,
            Clause::RoundingLinear,
        ] {
            push(c, why.clone());
        }
        return VerificationReport { clauses };
    }

    let a = seq.values.numerators();
    push(
        Clause::Monotone,
        match (1..a.len()).find(|&l| a[l] <= a[l - 1]) {
            None => ClauseStatus::Pass,
            Some(l) => ClauseStatus::Fail(format!("a_{l} = {} <= a_{} = {}", seq.a(l), l - 1, seq.a(l - 1))),
        },
    );
    push(
        Clause::Subadditive,
        match first_subadditivity_violation(a) {
            None => ClauseStatus::Pass,
            Some((l, r)) => ClauseStatus::Fail(format!(
                "a_{} = {} > a_{l} + a_{r} = {}",
                l + r,
                seq.a(l + r),
                seq.a(l) + seq.a(r)
            )),
        },
    );

    let combos = gamma_combinations(baton);
    push(Clause::Anchoring, check_anchoring(seq, &combos));

    match seq.q {
        None => {
            let why = ClauseStatus::Skipped("no rounding denominator q supplied".into());
            push(Clause::RoundingIncreasing, why.clone());
            push(Clause::RoundingLinear, why);
        }
        Some(q) => {
            let qr = rational::int(q as i64);
            let c = |g: &Rational| rational::round_half_up(&(g * &qr));
            let gammas = gamma_set(baton);
            let vals: Vec<&Rational> = gammas.values().collect();
            push(
                Clause::RoundingIncreasing,
                match (1..vals.len()).find(|&i| c(vals[i]) <= c(vals[i - 1])) {
                    None => ClauseStatus::Pass,
                    Some(i) => ClauseStatus::Fail(format!(
                        "c({}) = {} <= c({}) = {}",
                        vals[i],
                        c(vals[i]),
                        vals[i - 1],
                        c(vals[i - 1])
                    )),
                },
            );
            push(
                Clause::RoundingLinear,
                match combos.iter().find(|(d, g)| c(g) != BigInt::from(index_of(d, &seq.p))) {
                    None => ClauseStatus::Pass,
                    Some((d, g)) => ClauseStatus::Fail(format!(
                        "c({g}) = {} but sum d_i p_i = {} for d = {d:?}",
                        c(g),
                        index_of(d, &seq.p)
                    )),
                },
            );
        }
    }
    VerificationReport { clauses }
}

fn index_of(d: &[u64], p: &[u64]) -> u128 {
    d.iter().zip(p).map(|(&x, &y)| x as u128 * y as u128).sum()
}

fn check_shape(seq: &AnchorSequence, baton: &Baton) -> ClauseStatus {
    if seq.p.len() != baton.k() {
        return ClauseStatus::Fail(format!("{} integers p_i for {} steps", seq.p.len(), baton.k()));
    }
    if seq.p.contains(&0) {
        return ClauseStatus::Fail("some p_i is zero".into());
    }
    let sum: u64 = seq.p.iter().sum();
    if sum as usize != seq.m {
        return ClauseStatus::Fail(format!("m = {} but sum p_i = {sum}", seq.m));
    }
    if seq.values.len() != seq.m + 1 {
        return ClauseStatus::Fail(format!("{} values for m = {}", seq.values.len(), seq.m));
    }
    if seq.values.numerators()[0] != 0 {
        return ClauseStatus::Fail(format!("a_0 = {} != 0", seq.a(0)));
    }
    ClauseStatus::Pass
}

fn check_anchoring(seq: &AnchorSequence, combos: &[(Vec<u64>, Rational)]) -> ClauseStatus {
    for (d, gamma) in combos {
        let idx = index_of(d, &seq.p);
        if idx > seq.m as u128 {
            return ClauseStatus::Fail(format!("d = {d:?}: sum d_i p_i = {idx} exceeds m = {}", seq.m));
        }
        let a = seq.a(idx as usize);
        if &a != gamma {
            return ClauseStatus::Fail(format!("d = {d:?}: a_{idx} = {a} but the combination is {gamma}"));
        }
    }
    ClauseStatus::Pass
}

/// Maximal index ranges on which the sequence is affine.
#[derive(Clone, Copy, Debug)]
struct Run {
    start: usize,
    end: usize,
    base: i128,
    slope: i128,
}

impl Run {
    fn at(&self, x: usize) -> i128 {
        self.base + self.slope * (x - self.start) as i128
    }
}

fn affine_runs(a: &[i128]) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut start = 0;
    while start < a.len() {
        if start + 1 == a.len() {
            runs.push(Run {
                start,
                end: start,
                base: a[start],
                slope: 0,
            });
            break;
        }
        let slope = a[start + 1] - a[start];
        let mut end = start + 1;
        while end + 1 < a.len() && a[end + 1] - a[end] == slope {
            end += 1;
        }
        runs.push(Run {
            start,
            end,
            base: a[start],
            slope,
        });
        start = end + 1;
    }
    runs
}

fn run_containing(runs: &[Run], x: usize) -> usize {
    runs.partition_point(|r| r.end < x)
}

/// Lexicographically first `(l, r)` with `l, r >= 1`, `l + r <= m` and
/// `a_{l+r} > a_l + a_r`.
///
/// The sequence is split into affine runs. Over a triple of runs for `l`,
/// `r` and `l + r` the slack `a_l + a_r - a_{l+r}` is affine on a polygon
/// whose vertices are integer points on the run boundaries, so checking
/// those vertices decides the whole triple. Only when some triple fails is
/// the first counterexample located, one `l` at a time.
fn first_subadditivity_violation(a: &[i128]) -> Option<(usize, usize)> {
    let m = a.len().checked_sub(1)?;
    if m < 2 {
        return None;
    }
    let runs = affine_runs(a);
    let slack = |l: usize, r: usize| a[l] + a[r] - a[l + r];

    let mut violated = false;
    'outer: for (i1, r1) in runs.iter().enumerate() {
        let (l_lo, l_hi) = (r1.start.max(1), r1.end.min(m - 1));
        if l_lo > l_hi {
            continue;
        }
        for r2 in &runs[i1..] {
            let (r_lo, r_hi) = (r2.start.max(1), r2.end.min(m - 1));
            if r_lo > r_hi || l_lo + r_lo > m {
                continue;
            }
            let s_hi_all = (l_hi + r_hi).min(m);
            let first = run_containing(&runs, l_lo + r_lo);
            for r3 in runs[first..].iter().take_while(|r| r.start <= s_hi_all) {
                let (s_lo, s_hi) = (r3.start.max(l_lo + r_lo), r3.end.min(s_hi_all));
                if s_lo > s_hi {
                    continue;
                }
                let feasible = |l: i64, r: i64| {
                    l >= l_lo as i64
                        && l <= l_hi as i64
                        && r >= r_lo as i64
                        && r <= r_hi as i64
                        && l + r >= s_lo as i64
                        && l + r <= s_hi as i64
                };
                let mut candidates = Vec::with_capacity(12);
                for l in [l_lo, l_hi] {
                    for r in [r_lo, r_hi] {
                        candidates.push((l as i64, r as i64));
                    }
                    for s in [s_lo, s_hi] {
                        candidates.push((l as i64, s as i64 - l as i64));
                    }
                }
                for r in [r_lo, r_hi] {
                    for s in [s_lo, s_hi] {
                        candidates.push((s as i64 - r as i64, r as i64));
                    }
                }
                if candidates
                    .into_iter()
                    .filter(|&(l, r)| feasible(l, r))
                    .any(|(l, r)| slack(l as usize, r as usize) < 0)
                {
                    violated = true;
                    break 'outer;
                }
            }
        }
    }
    if !violated {
        return None;
    }

    for l in 1..m {
        if let Some(r) = first_violation_for(a, &runs, l) {
            return Some((l, r));
        }
    }
    unreachable!("a violating vertex was found")
}

/// Least `r` with `a_{l+r} > a_l + a_r`, walking pieces on which `r` and
/// `l + r` each stay in one run.
fn first_violation_for(a: &[i128], runs: &[Run], l: usize) -> Option<usize> {
    let m = a.len() - 1;
    let mut r = 1;
    while r + l <= m {
        let run_r = &runs[run_containing(runs, r)];
        let run_s = &runs[run_containing(runs, l + r)];
        let hi = run_r.end.min(run_s.end - l).min(m - l);
        // slack(r') = a_l + run_r(r') - run_s(l + r'), affine on [r, hi]
        let at = |x: usize| a[l] + run_r.at(x) - run_s.at(l + x);
        let start = at(r);
        if start < 0 {
            return Some(r);
        }
        let slope = run_r.slope - run_s.slope;
        if slope < 0 {
            let steps = start / (-slope) + 1;
            let cand = r as i128 + steps;
            if cand <= hi as i128 {
                return Some(cand as usize);
            }
        }
        r = hi + 1;
    }
    None
}

/// Every pair, directly. Quadratic; the reference for the run-based check.
pub fn first_subadditivity_violation_naive(a: &[i128]) -> Option<(usize, usize)> {
    let m = a.len().checked_sub(1)?;
    (1..m).find_map(|l| (1..=(m - l)).find(|&r| a[l + r] > a[l] + a[r]).map(|r| (l, r)))
}

/// Public entry to the run-based check, for comparison against the naive one.
pub fn first_subadditivity_violation_fast(a: &[i128]) -> Option<(usize, usize)> {
    first_subadditivity_violation(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use num_traits::Zero;

    fn baton(steps: &[Rational]) -> Baton {
        Baton::new(steps.to_vec()).unwrap()
    }

    #[test]
    fn gamma_set_examples() {
        let g = gamma_set(&baton(&[int(1)]));
        assert_eq!(g.values().cloned().collect::<Vec<_>>(), vec![int(0), int(1)]);
        assert_eq!(g.gamma_next, int(2));

        let g = gamma_set(&baton(&[int(1), int(2)]));
        assert_eq!(g.values().cloned().collect::<Vec<_>>(), (0..=3).map(int).collect::<Vec<_>>());
        assert_eq!(g.gamma_next, int(4));

        let g = gamma_set(&baton(&[int(1), frac(3, 2)]));
        assert_eq!(
            g.values().cloned().collect::<Vec<_>>(),
            vec![int(0), int(1), frac(3, 2), int(2), frac(5, 2)]
        );
        assert_eq!(g.gamma_next, int(3));
        for (gamma, d) in &g.gammas {
            assert_eq!(&combination(d, &g.steps), gamma);
        }
        assert_eq!(g.delta(), frac(1, 2));
        assert_eq!(g.theta(), frac(5, 2));
    }

    #[test]
    fn dirichlet_examples() {
        let w = dirichlet_approx(&[frac(1, 2)], 3).unwrap();
        assert_eq!((w.q, w.numerators.clone()), (4, vec![2]));
        assert!(w.errors.iter().all(|e| e.is_zero()));

        let w = dirichlet_approx(&[int(1), int(2)], 5).unwrap();
        assert_eq!((w.q, w.numerators.clone()), (6, vec![6, 12]));

        let w = dirichlet_approx(&[int(1), frac(3, 2)], 7).unwrap();
        assert_eq!((w.q, w.numerators.clone()), (8, vec![8, 12]));

        // q = 27 misses 3/2 by 1/54 > 27^(-3/2); q = 28 is exact
        let w = dirichlet_approx(&[int(1), frac(3, 2)], 26).unwrap();
        assert_eq!((w.q, w.numerators.clone()), (28, vec![28, 42]));

        assert!(dirichlet_approx(&[int(1)], 0).is_err());
    }

    #[test]
    fn dirichlet_accepts_inexact_approximations() {
        // 2/7 with q0 = 2: q = 3 gives p = 1, error 1/21 < 3^(-2) = 1/9
        let w = dirichlet_approx(&[frac(2, 7)], 2).unwrap();
        assert_eq!((w.q, w.numerators.clone()), (3, vec![1]));
        assert_eq!(w.errors, vec![frac(1, 21)]);
        assert!(w.satisfies_bound());
    }

    #[test]
    fn threshold_q0_examples() {
        // delta = 1/2, theta = 5/2, k = 2: need q0 > 2 and q0 > 25
        assert_eq!(threshold_q0(&frac(1, 2), &frac(5, 2), 2), 26);
        // delta = 1, theta = 1, k = 1: need q0 > 1 and q0 > 2
        assert_eq!(threshold_q0(&int(1), &int(1), 1), 3);
    }

    #[test]
    fn integer_fast_path() {
        let b = baton(&[int(1), int(2)]);
        let seq = build_anchor_sequence(&b, Construction::Auto);
        assert_eq!(seq.p, vec![1, 2]);
        assert_eq!(seq.m, 3);
        assert_eq!(seq.values.to_rationals(), (0..=3).map(int).collect::<Vec<_>>());
        assert!(verify_anchor_sequence(&seq, &b).passed());
    }

    #[test]
    fn faithful_single_unit_step() {
        let b = baton(&[int(1)]);
        let seq = build_anchor_sequence(&b, Construction::Faithful);
        assert_eq!(seq.q0, Some(3));
        assert_eq!(seq.q, Some(4));
        assert_eq!(seq.m, 4);
        assert_eq!(seq.p, vec![4]);
        assert_eq!(seq.a(0), int(0));
        assert_eq!(seq.a(4), int(1));
        assert_eq!(
            seq.values.to_rationals(),
            vec![int(0), frac(5, 8), frac(3, 4), frac(7, 8), int(1)]
        );
        assert!(verify_anchor_sequence(&seq, &b).passed());
    }

    #[test]
    fn faithful_one_and_three_halves() {
        let b = baton(&[int(1), frac(3, 2)]);
        let seq = build_anchor_sequence(&b, Construction::Auto);
        assert_eq!(seq.q0, Some(26));
        assert_eq!(seq.q, Some(28));
        assert_eq!(seq.p, vec![28, 42]);
        assert_eq!(seq.m, 70);
        for (idx, want) in [(0, int(0)), (28, int(1)), (42, frac(3, 2)), (56, int(2)), (70, frac(5, 2))] {
            assert_eq!(seq.a(idx), want);
        }
        assert_eq!(seq.a(1), frac(253, 280));
        assert!(verify_anchor_sequence(&seq, &b).passed());
    }

    #[test]
    fn verifier_reports_anchoring_violation() {
        let b = baton(&[int(1), int(2)]);
        let seq = AnchorSequence::from_parts(&b, vec![1, 1], &[int(0), int(2), int(3)], None).unwrap();
        let report = verify_anchor_sequence(&seq, &b);
        assert!(!report.passed());
        assert_eq!(report.status(Clause::Monotone), &ClauseStatus::Pass);
        assert_eq!(report.status(Clause::Subadditive), &ClauseStatus::Pass);
        match report.status(Clause::Anchoring) {
            ClauseStatus::Fail(msg) => assert!(msg.contains("a_1 = 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(report.status(Clause::RoundingLinear), ClauseStatus::Skipped(_)));
    }

    #[test]
    fn verifier_reports_lexicographically_first_subadditivity_failure() {
        let b = baton(&[int(4)]);
        // a_3 = 9 > a_1 + a_2 = 3 + 5 is the first failure; (2, 2) fails too
        let a: Vec<Rational> = [0, 3, 5, 9, 12].iter().map(|&x| int(x)).collect();
        let seq = AnchorSequence::from_parts(&b, vec![4], &a, None).unwrap();
        match verify_anchor_sequence(&seq, &b).status(Clause::Subadditive) {
            ClauseStatus::Fail(msg) => assert!(msg.starts_with("a_3 = 9 > a_1 + a_2 = 8"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn verifier_flags_bad_shape() {
        let b = baton(&[int(1), int(2)]);
        let seq = AnchorSequence::from_parts(&b, vec![1, 2], &[int(0), int(1)], None).unwrap();
        let report = verify_anchor_sequence(&seq, &b);
        assert!(matches!(report.status(Clause::Shape), ClauseStatus::Fail(_)));
        assert!(matches!(report.status(Clause::Monotone), ClauseStatus::Skipped(_)));
    }

    #[test]
    fn gap_estimates_hold_exactly() {
        for steps in [vec![int(1), frac(3, 2)], vec![frac(2, 3), frac(1, 2)], vec![frac(5, 4)]] {
            let b = baton(&steps);
            let seq = build_anchor_sequence(&b, Construction::Faithful);
            let g = gamma_set(&b);
            let q = rational::int(seq.q.unwrap() as i64);
            let c: Vec<usize> = g
                .values()
                .map(|x| rational::round_half_up(&(x * &q)).to_usize().unwrap())
                .collect();
            let fine = &seq.delta / rational::int(2 * seq.m as i64);
            for l in 1..=seq.m {
                let gap = seq.a(l) - seq.a(l - 1);
                if c.contains(&(l - 1)) {
                    assert!(gap > &seq.delta / rational::int(2), "block boundary at {l}");
                } else {
                    assert_eq!(gap, fine, "inside a block at {l}");
                }
            }
            // every combination sits at its rounded index
            for (i, x) in g.values().enumerate() {
                assert_eq!(&seq.a(c[i]), x);
            }
        }
    }

    #[test]
    fn subadditivity_cases_match_the_block_argument() {
        let b = baton(&[frac(2, 3), frac(1, 2)]);
        let seq = build_anchor_sequence(&b, Construction::Faithful);
        let g = gamma_set(&b);
        let vals: Vec<Rational> = g.values().cloned().collect();
        let q = rational::int(seq.q.unwrap() as i64);
        let c: Vec<usize> = vals
            .iter()
            .map(|x| rational::round_half_up(&(x * &q)).to_usize().unwrap())
            .collect();
        let block = |x: usize| (1..c.len()).find(|&i| c[i - 1] < x && x <= c[i]).unwrap();
        let (mut equal, mut strict) = (0, 0);
        for l in 1..seq.m {
            for r in 1..=(seq.m - l) {
                let gamma = &vals[block(l)] + &vals[block(r)];
                let gj = &vals[block(l + r)];
                let slack = seq.a(l) + seq.a(r) - seq.a(l + r);
                assert!(&gamma >= gj, "case gamma < gamma_j is impossible");
                if &gamma == gj {
                    assert!(slack.is_zero());
                    equal += 1;
                } else {
                    assert!(slack.is_positive());
                    strict += 1;
                }
            }
        }
        assert!(equal > 0 && strict > 0);
    }

    #[test]
    fn run_check_agrees_with_naive_on_mutations() {
        let b = baton(&[frac(2, 3), frac(1, 2)]);
        let seq = build_anchor_sequence(&b, Construction::Faithful);
        let base = seq.values.numerators().to_vec();
        assert_eq!(first_subadditivity_violation_naive(&base), None);
        assert_eq!(first_subadditivity_violation(&base), None);
        for idx in 1..base.len() {
            for delta in [-7i128, -1, 1, 13] {
                let mut a = base.clone();
                a[idx] += delta * 5;
                assert_eq!(
                    first_subadditivity_violation(&a),
                    first_subadditivity_violation_naive(&a),
                    "index {idx}, delta {delta}"
                );
            }
        }
    }

    #[test]
    fn anchor_set_marks_follow_partial_sums() {
        let b = baton(&[int(1), int(2)]);
        let seq = build_anchor_sequence(&b, Construction::Auto);
        let set = seq.anchor_set().unwrap();
        assert_eq!(set.marks(), &[0, 1, 3]);
    }
}
