//! Periodic colorings of `R^n` with the maximum norm, and the bounds around
//! them.
//!
//! A coloring is a list of classes. Each class is a union of half-open boxes
//! `[o, o + side)^n` repeated with a common period in every coordinate. A
//! point gets the first class containing it, so classes built from a cover
//! rather than a partition still color every point once.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::dirichlet::{build_anchor_sequence, Construction};
use crate::error::{Error, Result};
use crate::metric::{Baton, FiniteMetricSpace};
use crate::rational::{self, Rational};
use crate::torus::{random_cover_with_retries, CoverInstance, CoverSolution};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ColorClass {
    #[serde(with = "crate::rational::serde_rational_matrix")]
    pub offsets: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodicColoring {
    pub dim: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub period: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub box_size: Rational,
    pub classes: Vec<ColorClass>,
}

/// `x mod p` in `[0, p)`.
fn rmod(x: &Rational, p: &Rational) -> Rational {
    x - p * Rational::from_integer(rational::floor_to_bigint(&(x / p)))
}

/// Result of auditing one fundamental domain on the grid of box corners.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DomainAudit {
    pub cells: usize,
    pub uncovered: usize,
    /// Cells lying in more than one box.
    pub overlapping: usize,
}

impl DomainAudit {
    pub fn is_cover(&self) -> bool {
        self.uncovered == 0
    }

    pub fn is_partition(&self) -> bool {
        self.uncovered == 0 && self.overlapping == 0
    }
}

impl PeriodicColoring {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    fn in_box(&self, offset: &[Rational], x: &[Rational]) -> bool {
        offset
            .iter()
            .zip(x)
            .all(|(o, c)| rmod(&(c - o), &self.period) < self.box_size)
    }

    /// Number of boxes, over all classes, containing `x`.
    fn multiplicity(&self, x: &[Rational]) -> usize {
        self.classes
            .iter()
            .flat_map(|c| &c.offsets)
            .filter(|o| self.in_box(o, x))
            .count()
    }

    pub fn color_of(&self, x: &[Rational]) -> Result<Option<usize>> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self
            .classes
            .iter()
            .position(|c| c.offsets.iter().any(|o| self.in_box(o, x))))
    }

    /// Box membership is constant on the cells cut out by the box faces, so
    /// testing one corner per cell decides coverage of the whole domain.
    pub fn audit(&self) -> DomainAudit {
        let axes: Vec<Vec<Rational>> = (0..self.dim)
            .map(|i| {
                let mut cuts = BTreeSet::new();
                cuts.insert(Rational::zero());
                for o in self.classes.iter().flat_map(|c| &c.offsets) {
                    cuts.insert(rmod(&o[i], &self.period));
                    cuts.insert(rmod(&(&o[i] + &self.box_size), &self.period));
                }
                cuts.into_iter().collect()
            })
            .collect();
        let mut audit = DomainAudit {
            cells: 0,
            uncovered: 0,
            overlapping: 0,
        };
        let mut idx = vec![0usize; self.dim];
        loop {
            let corner: Vec<Rational> = idx.iter().zip(&axes).map(|(&i, a)| a[i].clone()).collect();
            audit.cells += 1;
            match self.multiplicity(&corner) {
                0 => audit.uncovered += 1,
                1 => {}
                _ => audit.overlapping += 1,
            }
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return audit;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < axes[axis].len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("coloring serializes")
    }
}

fn cube_vertices(n: usize) -> Vec<Vec<u32>> {
    (0..1usize << n)
        .map(|mask| (0..n).map(|i| ((mask >> (n - 1 - i)) & 1) as u32).collect())
        .collect()
}

/// `2^n` classes: the unit cubes `[0,1)^n + 2Z^n` shifted by each vertex of
/// `{0,1}^n`, in lexicographic order. No class contains two points at
/// distance exactly 1.
pub fn cube_tiling_coloring(n: usize) -> Result<PeriodicColoring> {
    if n < 1 {
        return Err(Error::Precondition("dimension n must be at least 1".into()));
    }
    if n > 20 {
        return Err(Error::Precondition(format!("2^{n} classes is too many to list")));
    }
    Ok(PeriodicColoring {
        dim: n,
        period: rational::int(2),
        box_size: Rational::one(),
        classes: cube_vertices(n)
            .into_iter()
            .map(|v| ColorClass {
                offsets: vec![v.into_iter().map(|c| rational::int(c as i64)).collect()],
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AvoidanceMode {
    /// Boxes of side `d'` with gaps `l'`; defaults `d' = d(1 - 1/64)` and
    /// `l' = l(1 + 1/64)`.
    Asymptotic {
        side: Option<Rational>,
        gap: Option<Rational>,
    },
    /// Boxes `[0, d)^n` with period `d + l`; `d` and `l` must be integers after
    /// multiplying every distance by `scale`.
    Randomized { scale: Rational },
}

impl AvoidanceMode {
    pub fn asymptotic() -> Self {
        AvoidanceMode::Asymptotic { side: None, gap: None }
    }

    pub fn randomized() -> Self {
        AvoidanceMode::Randomized { scale: Rational::one() }
    }
}

/// Why no class holds a copy: within one box every distance is below the
/// diameter, and across boxes of a class every distance exceeds the
/// connectivity threshold, so a copy would have to fit inside one box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructuralCertificate {
    #[serde(with = "crate::rational::serde_rational")]
    pub diameter: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub threshold: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub box_size: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub gap: Rational,
    /// Half-open boxes: distances inside a box stay below its side.
    pub side_ok: bool,
    /// Distances across boxes of one class exceed the gap.
    pub gap_ok: bool,
    /// The grid unit on which the torus cover was computed.
    #[serde(with = "crate::rational::serde_rational")]
    pub unit: Rational,
    pub cover: CoverSolution,
    pub warnings: Vec<String>,
}

impl StructuralCertificate {
    pub fn holds(&self) -> bool {
        self.side_ok && self.gap_ok && self.cover.is_complete()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AvoidanceColoring {
    pub coloring: PeriodicColoring,
    pub certificate: StructuralCertificate,
}

/// Largest torus the asymptotic mode discretizes onto.
const MAX_DISCRETE_POINTS: u64 = 4_000_000;

/// A coloring of `R^n` whose classes contain no copy of `space`.
///
/// Each class is one translate of the lattice union of boxes. The translates
/// come from a cover of the discrete torus by integer cubes, drawn on a grid
/// fine enough that box side and gap are whole numbers of cells. Integer
/// translates covering the discrete torus also cover the continuous one:
/// a real point lies in the box whose corner covers its integer part.
pub fn avoidance_coloring(
    space: &FiniteMetricSpace,
    n: usize,
    mode: &AvoidanceMode,
    seed: u64,
) -> Result<AvoidanceColoring> {
    if space.size() < 2 {
        return Err(Error::TooFewPoints("avoidance coloring needs at least two points"));
    }
    if n < 1 {
        return Err(Error::Precondition("dimension n must be at least 1".into()));
    }
    let diameter = space.diameter()?;
    let threshold = space.connectivity_threshold()?;
    let mut warnings = Vec::new();
    if diameter == threshold {
        warnings.push(format!(
            "l(M) = d(M) = {diameter}: the color count is worse than the trivial bound 2^{n}"
        ));
    }

    let (side, gap, unit) = match mode {
        AvoidanceMode::Asymptotic { side, gap } => {
            let side = side.clone().unwrap_or_else(|| &diameter * rational::frac(63, 64));
            let gap = gap.clone().unwrap_or_else(|| &threshold * rational::frac(65, 64));
            if !side.is_positive() || !gap.is_positive() {
                return Err(Error::Precondition("box side and gap must be positive".into()));
            }
            // the largest grid unit dividing both
            let unit = Rational::new(side.numer().gcd(gap.numer()), side.denom().lcm(gap.denom()));
            (side, gap, unit)
        }
        AvoidanceMode::Randomized { scale } => {
            if !scale.is_positive() {
                return Err(Error::Precondition("scale must be positive".into()));
            }
            let (d, l) = (&diameter * scale, &threshold * scale);
            if !rational::is_integer(&d) || !rational::is_integer(&l) {
                return Err(Error::Precondition(format!(
                    "d(M) = {d} and l(M) = {l} must be integers after scaling"
                )));
            }
            (diameter.clone(), threshold.clone(), scale.recip())
        }
    };

    let cells = |x: &Rational| -> Result<u32> {
        (x / &unit)
            .to_integer()
            .to_u32()
            .ok_or_else(|| Error::Precondition(format!("{x} spans too many grid cells")))
    };
    let (d_cells, l_cells) = (cells(&side)?, cells(&gap)?);
    let m_cells = d_cells + l_cells;
    let too_big = (m_cells as u64)
        .checked_pow(n as u32)
        .is_none_or(|p| p > MAX_DISCRETE_POINTS);
    if too_big {
        return Err(Error::Precondition(format!(
            "the discrete torus Z_{m_cells}^{n} is too large; choose a box side and gap with a coarser common unit"
        )));
    }
    let inst = CoverInstance::new(m_cells, d_cells, n as u32)?;
    let cover = random_cover_with_retries(&inst, seed)?;

    let period = &side + &gap;
    // a repeated translate gives an empty class under first-wins
    let classes = cover
        .translates
        .iter()
        .map(|t| ColorClass {
            offsets: vec![t.iter().map(|&c| rational::int(c as i64) * &unit).collect()],
        })
        .collect();
    let coloring = PeriodicColoring {
        dim: n,
        period,
        box_size: side.clone(),
        classes,
    };
    let certificate = StructuralCertificate {
        side_ok: side <= diameter,
        gap_ok: gap >= threshold,
        diameter,
        threshold,
        box_size: side,
        gap,
        unit,
        cover,
        warnings,
    };
    Ok(AvoidanceColoring { coloring, certificate })
}

/// `ceil((k+1)^n / k^n)`: a class without a copy of the unit baton holds at
/// most `k^n` points of the grid `[k]_0^n`.
pub fn pigeonhole_lower_bound(k: u32, n: u32) -> Result<BigInt> {
    if k < 1 || n < 1 {
        return Err(Error::Precondition("k and n must be at least 1".into()));
    }
    let num = num_traits::pow(BigInt::from(k + 1), n as usize);
    let den = num_traits::pow(BigInt::from(k), n as usize);
    Ok(num.div_ceil(&den))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UpperBoundVariant {
    /// `n log n (1 + l/d)^n`; asymptotic only.
    U1,
    /// The size of a constructed cover of `Z_{d+l}^n` by `d`-cubes.
    U2,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpperBoundReport {
    pub variant: UpperBoundVariant,
    pub n: u32,
    /// A certified number of colors, when the variant yields one.
    pub value: Option<u64>,
    /// The formula value, labeled asymptotic: it carries an unquantified `1 + o(1)`.
    pub formula: f64,
    pub asymptotic_only: bool,
    /// `2^n` beats the formula.
    pub trivial_better: bool,
    pub note: String,
}

pub fn upper_bound_value(
    space: &FiniteMetricSpace,
    n: u32,
    variant: UpperBoundVariant,
    seed: u64,
) -> Result<UpperBoundReport> {
    if space.size() < 2 {
        return Err(Error::TooFewPoints("upper bounds need at least two points"));
    }
    let d = space.diameter()?;
    let l = space.connectivity_threshold()?;
    let growth = (1.0 + rational::to_f64(&l) / rational::to_f64(&d)).powi(n as i32);
    let trivial = 2f64.powi(n as i32);
    match variant {
        UpperBoundVariant::U1 => {
            let formula = n as f64 * (n as f64).ln() * growth;
            let trivial_better = formula >= trivial;
            Ok(UpperBoundReport {
                variant,
                n,
                value: None,
                formula,
                asymptotic_only: true,
                trivial_better,
                note: if l == d {
                    "l(M) = d(M): the trivial bound 2^n is better".into()
                } else {
                    "asymptotic formula, not a bound at this n".into()
                },
            })
        }
        UpperBoundVariant::U2 => {
            if !rational::is_integer(&d) || !rational::is_integer(&l) || l >= d {
                return Err(Error::Precondition(format!(
                    "this variant needs integers l(M) < d(M), got l = {l}, d = {d}"
                )));
            }
            let (di, li) = (d.to_integer().to_u32(), l.to_integer().to_u32());
            let (di, li) = di
                .zip(li)
                .ok_or_else(|| Error::Precondition("d(M) and l(M) too large".into()))?;
            let inst = CoverInstance::new(di + li, di, n)?;
            let cover = random_cover_with_retries(&inst, seed)?;
            let formula = n as f64 * (di as f64).ln() * growth;
            Ok(UpperBoundReport {
                variant,
                n,
                value: Some(cover.size as u64),
                formula,
                asymptotic_only: false,
                trivial_better: cover.size as f64 >= trivial,
                note: "size of a constructed cover of the discrete torus".into(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuperRamseyParams {
    pub m: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub f: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub chi: Rational,
}

impl SuperRamseyParams {
    pub fn new(f: Rational, chi: Rational, m: usize) -> Result<Self> {
        if !(chi > Rational::one() && f >= chi) {
            return Err(Error::Precondition(format!("need F >= chi > 1, got F = {f}, chi = {chi}")));
        }
        Ok(SuperRamseyParams { m, f, chi })
    }
}

/// `F = m + 1`, `chi = (m + 1)/m` from the anchor sequence of `baton`.
pub fn super_ramsey_params(baton: &Baton) -> Result<SuperRamseyParams> {
    let m = build_anchor_sequence(baton, Construction::Auto).m;
    let m_r = rational::int(m as i64);
    SuperRamseyParams::new(&m_r + Rational::one(), (&m_r + Rational::one()) / m_r, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{find_copies, PointSet};
    use crate::rational::{frac, int};

    fn half_grid(n: usize) -> Vec<Vec<Rational>> {
        let vals: Vec<Rational> = (0..4).map(|i| frac(i, 2)).collect();
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p: Vec<Rational>| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(v.clone());
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn cube_tiling_shapes() {
        let c = cube_tiling_coloring(1).unwrap();
        assert_eq!(c.class_count(), 2);
        assert_eq!(c.classes[1].offsets, vec![vec![int(1)]]);
        let c = cube_tiling_coloring(2).unwrap();
        assert_eq!(c.class_count(), 4);
        let c = cube_tiling_coloring(3).unwrap();
        assert_eq!(c.class_count(), 8);
        assert!(c.audit().is_partition());
        assert!(cube_tiling_coloring(0).is_err());
    }

    #[test]
    fn cube_tiling_avoids_unit_distance_on_half_grid() {
        let c = cube_tiling_coloring(2).unwrap();
        let steps: Vec<Rational> = (-2..=2).map(|i| frac(i, 2)).collect();
        for x in half_grid(2) {
            let cx = c.color_of(&x).unwrap().unwrap();
            for a in &steps {
                for b in &steps {
                    let y = vec![&x[0] + a, &x[1] + b];
                    let dist = crate::metric::chebyshev_distance(&x, &y).unwrap();
                    if dist == int(1) {
                        assert_ne!(c.color_of(&y).unwrap().unwrap(), cx);
                    }
                }
            }
        }
    }

    #[test]
    fn color_of_wraps_periodically() {
        let c = cube_tiling_coloring(2).unwrap();
        assert_eq!(c.color_of(&[frac(5, 2), int(-1)]).unwrap(), Some(1));
        assert_eq!(c.color_of(&[frac(7, 2), int(3)]).unwrap(), Some(3));
        assert!(c.color_of(&[int(0)]).is_err());
    }

    #[test]
    fn audit_detects_gaps_and_overlaps() {
        let mut c = cube_tiling_coloring(2).unwrap();
        c.classes.pop();
        let a = c.audit();
        assert!(a.uncovered > 0 && !a.is_cover());
        let mut c = cube_tiling_coloring(1).unwrap();
        c.classes[1].offsets[0][0] = frac(1, 2);
        let a = c.audit();
        assert!(a.overlapping > 0 && a.uncovered > 0);
    }

    #[test]
    fn randomized_avoidance_for_b2() {
        let b2 = FiniteMetricSpace::unit_baton(2);
        let out = avoidance_coloring(&b2, 2, &AvoidanceMode::randomized(), 0).unwrap();
        assert!(out.certificate.holds());
        assert_eq!(out.coloring.period, int(3));
        assert_eq!(out.coloring.box_size, int(2));
        assert!(out.coloring.audit().is_cover());
        assert_eq!(out.coloring.class_count(), out.certificate.cover.size);

        // lattice points of each class, over two periods, hold no copy
        let window: Vec<Vec<i64>> = (0..6).flat_map(|a| (0..6).map(move |b| vec![a, b])).collect();
        for class in 0..out.coloring.class_count() {
            let pts: Vec<Vec<i64>> = window
                .iter()
                .filter(|p| {
                    let q: Vec<Rational> = p.iter().map(|&c| int(c)).collect();
                    out.coloring.color_of(&q).unwrap() == Some(class)
                })
                .cloned()
                .collect();
            if pts.len() < 3 {
                continue;
            }
            let set = PointSet::from_integer_points(pts).unwrap();
            assert!(find_copies(&b2, &set, Some(1)).is_empty(), "class {class}");
        }
    }

    #[test]
    fn unit_baton_degenerates_to_the_cube_tiling() {
        let b1 = FiniteMetricSpace::unit_baton(1);
        let mode = AvoidanceMode::Asymptotic {
            side: Some(int(1)),
            gap: Some(int(1)),
        };
        let out = avoidance_coloring(&b1, 3, &mode, 0).unwrap();
        assert_eq!(out.coloring.class_count(), 8);
        assert_eq!(out.coloring.period, int(2));
        assert!(out.coloring.audit().is_partition());
        assert!(out.certificate.holds());
        assert_eq!(out.certificate.warnings.len(), 1);
    }

    #[test]
    fn asymptotic_defaults() {
        let b1 = FiniteMetricSpace::unit_baton(1);
        let out = avoidance_coloring(&b1, 2, &AvoidanceMode::asymptotic(), 3).unwrap();
        let cert = &out.certificate;
        assert_eq!(cert.box_size, frac(63, 64));
        assert_eq!(cert.gap, frac(65, 64));
        assert_eq!(cert.unit, frac(1, 64));
        assert!(cert.holds());
        assert!(out.coloring.audit().is_cover());
    }

    #[test]
    fn randomized_needs_integers() {
        let m = FiniteMetricSpace::two_point(frac(3, 2)).unwrap();
        assert!(matches!(
            avoidance_coloring(&m, 2, &AvoidanceMode::randomized(), 0),
            Err(Error::Precondition(_))
        ));
        let mode = AvoidanceMode::Randomized { scale: int(2) };
        // d = l = 3 after scaling; allowed with a warning
        let out = avoidance_coloring(&m, 1, &mode, 0).unwrap();
        assert!(!out.certificate.warnings.is_empty());
        assert!(out.certificate.holds());
    }

    #[test]
    fn pigeonhole_examples() {
        assert_eq!(pigeonhole_lower_bound(1, 3).unwrap(), BigInt::from(8));
        assert_eq!(pigeonhole_lower_bound(2, 2).unwrap(), BigInt::from(3));
        assert_eq!(pigeonhole_lower_bound(3, 4).unwrap(), BigInt::from(4));
        assert_eq!(pigeonhole_lower_bound(2, 3).unwrap(), BigInt::from(4));
        assert!(pigeonhole_lower_bound(0, 1).is_err());
    }

    #[test]
    fn upper_bounds() {
        let b2 = FiniteMetricSpace::unit_baton(2);
        let r = upper_bound_value(&b2, 2, UpperBoundVariant::U2, 0).unwrap();
        let inst = CoverInstance::new(3, 2, 2).unwrap();
        let cover = random_cover_with_retries(&inst, 0).unwrap();
        assert_eq!(r.value, Some(cover.size as u64));
        assert!(!r.asymptotic_only);

        let b1 = FiniteMetricSpace::unit_baton(1);
        assert!(upper_bound_value(&b1, 5, UpperBoundVariant::U2, 0).is_err());
        let r = upper_bound_value(&b1, 5, UpperBoundVariant::U1, 0).unwrap();
        assert!(r.asymptotic_only && r.trivial_better && r.value.is_none());
    }

    #[test]
    fn super_ramsey_examples() {
        let p = super_ramsey_params(&Baton::unit(3)).unwrap();
        assert_eq!((p.m, p.f.clone(), p.chi.clone()), (3, int(4), frac(4, 3)));
        let p = super_ramsey_params(&Baton::new(vec![int(1), int(2)]).unwrap()).unwrap();
        assert_eq!((p.m, p.f.clone(), p.chi.clone()), (3, int(4), frac(4, 3)));
        let p = super_ramsey_params(&Baton::new(vec![int(1), frac(3, 2)]).unwrap()).unwrap();
        assert_eq!(p.m, 70);
        assert_eq!(p.chi, frac(71, 70));
        assert!(SuperRamseyParams::new(int(1), int(1), 1).is_err());
    }
}
