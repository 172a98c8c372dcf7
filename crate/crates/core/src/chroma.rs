//! Exact chromatic numbers of point sets with a forbidden metric space.
//!
//! Every copy of the forbidden space becomes a hyperedge on its support; a
//! coloring avoids monochromatic copies exactly when no hyperedge is
//! monochromatic.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::colorings::pigeonhole_lower_bound;
use crate::error::{Error, Result};
use crate::metric::{find_copies_with, CopySearch, FiniteMetricSpace, PointSet};

/// Default node budget of the exact search.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CopyHypergraph {
    pub vertices: usize,
    /// Sorted vertex sets, sorted and without repeats.
    pub edges: Vec<Vec<usize>>,
}

impl CopyHypergraph {
    pub fn new(vertices: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(edges.len());
        for mut e in edges {
            e.sort_unstable();
            e.dedup();
            if e.len() < 2 {
                return Err(Error::Precondition(format!("edge {e:?} has fewer than two vertices")));
            }
            if let Some(&v) = e.iter().find(|&&v| v >= vertices) {
                return Err(Error::Precondition(format!("edge vertex {v} out of range")));
            }
            clean.push(e);
        }
        clean.sort();
        clean.dedup();
        Ok(CopyHypergraph { vertices, edges: clean })
    }

    /// No edge is monochromatic and every vertex has a color.
    pub fn is_proper(&self, colors: &[usize]) -> bool {
        colors.len() == self.vertices && self.edges.iter().all(|e| e.iter().any(|&v| colors[v] != colors[e[0]]))
    }
}

/// One edge per support of a copy of `space` in `points`.
pub fn copy_hypergraph(points: &PointSet, space: &FiniteMetricSpace) -> Result<CopyHypergraph> {
    if space.size() < 2 {
        return Err(Error::TooFewPoints("a forbidden space needs at least two points"));
    }
    let opts = CopySearch {
        limit: None,
        dedup_supports: true,
    };
    let edges = find_copies_with(space, points, &opts).iter().map(|c| c.support()).collect();
    CopyHypergraph::new(points.len(), edges)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LowerBoundWitness {
    /// Pairwise joined by 2-edges, so all colors differ.
    Clique { vertices: Vec<usize> },
    /// Any edge needs two colors.
    Edge { vertices: Vec<usize> },
    /// A class holds at most `max_class` points.
    Counting { points: usize, max_class: usize },
    /// No proper coloring with fewer colors exists; shown by exhausting the
    /// search.
    Exhaustive { colors_ruled_out: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ColoringCertificate {
    pub colors: Vec<usize>,
    pub color_count: usize,
    pub optimal: bool,
    pub lower_bound: usize,
    pub lower_bound_witness: Option<LowerBoundWitness>,
    pub nodes: u64,
}

/// Largest clique of 2-edges found greedily, highest degree first.
fn greedy_clique(h: &CopyHypergraph) -> Vec<usize> {
    let n = h.vertices;
    let mut adj = vec![vec![false; n]; n];
    let mut deg = vec![0usize; n];
    for e in h.edges.iter().filter(|e| e.len() == 2) {
        adj[e[0]][e[1]] = true;
        adj[e[1]][e[0]] = true;
        deg[e[0]] += 1;
        deg[e[1]] += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(deg[v]), v));
    let mut best = Vec::new();
    for &start in &order {
        let mut clique = vec![start];
        for &v in &order {
            if v != start && clique.iter().all(|&u| adj[u][v]) {
                clique.push(v);
            }
        }
        if clique.len() > best.len() {
            best = clique;
        }
    }
    best.sort_unstable();
    best
}

const MIXED: usize = usize::MAX;

enum Trail {
    Edge { e: usize, count: usize, color: Option<usize> },
    Block { slot: usize },
}

/// Backtracking search for a proper `k`-coloring. Each edge tracks how many of
/// its vertices are colored and whether they share one color; once all but one
/// share color `c`, the last vertex is barred from `c`.
struct ColorSearch<'a> {
    h: &'a CopyHypergraph,
    incident: Vec<Vec<usize>>,
    colors: Vec<Option<usize>>,
    k: usize,
    edge_count: Vec<usize>,
    edge_color: Vec<Option<usize>>,
    /// `block[v * k + c]`: edges that `c` at `v` would make monochromatic.
    block: Vec<u32>,
    trail: Vec<Trail>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl<'a> ColorSearch<'a> {
    fn new(h: &'a CopyHypergraph, k: usize, budget: u64) -> Self {
        ColorSearch {
            h,
            incident: incidence(h),
            colors: vec![None; h.vertices],
            k,
            edge_count: vec![0; h.edges.len()],
            edge_color: vec![None; h.edges.len()],
            block: vec![0; h.vertices * k],
            trail: Vec::new(),
            nodes: 0,
            budget,
            exhausted: false,
        }
    }

    fn assign(&mut self, v: usize, c: usize) {
        self.colors[v] = Some(c);
        for &e in &self.incident[v] {
            let (count, color) = (self.edge_count[e], self.edge_color[e]);
            self.trail.push(Trail::Edge { e, count, color });
            let color = match color {
                None => c,
                Some(x) if x == c => c,
                _ => MIXED,
            };
            self.edge_count[e] = count + 1;
            self.edge_color[e] = Some(color);
            if color != MIXED && count + 2 == self.h.edges[e].len() {
                let u = *self.h.edges[e]
                    .iter()
                    .find(|&&u| self.colors[u].is_none())
                    .expect("one vertex left");
                let slot = u * self.k + c;
                self.block[slot] += 1;
                self.trail.push(Trail::Block { slot });
            }
        }
    }

    fn undo(&mut self, v: usize, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().expect("above mark") {
                Trail::Edge { e, count, color } => {
                    self.edge_count[e] = count;
                    self.edge_color[e] = color;
                }
                Trail::Block { slot } => self.block[slot] -= 1,
            }
        }
        self.colors[v] = None;
    }

    fn solve(&mut self, used: usize) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return false;
        }
        // most constrained uncolored vertex, then highest degree
        let limit = (used + 1).min(self.k);
        let mut pick: Option<(usize, usize)> = None;
        for v in 0..self.h.vertices {
            if self.colors[v].is_some() {
                continue;
            }
            let free = (0..limit).filter(|&c| self.block[v * self.k + c] == 0).count();
            if free == 0 {
                return false;
            }
            let better = match pick {
                None => true,
                Some((u, f)) => free < f || (free == f && self.incident[v].len() > self.incident[u].len()),
            };
            if better {
                pick = Some((v, free));
            }
        }
        let Some((v, _)) = pick else {
            return true;
        };
        for c in 0..limit {
            if self.block[v * self.k + c] != 0 {
                continue;
            }
            let mark = self.trail.len();
            self.assign(v, c);
            if self.solve(used.max(c + 1)) {
                return true;
            }
            self.undo(v, mark);
            if self.exhausted {
                break;
            }
        }
        false
    }
}

fn incidence(h: &CopyHypergraph) -> Vec<Vec<usize>> {
    let mut inc = vec![Vec::new(); h.vertices];
    for (i, e) in h.edges.iter().enumerate() {
        for &v in e {
            inc[v].push(i);
        }
    }
    inc
}

/// Greedy coloring in degree order; always proper.
fn greedy_coloring(h: &CopyHypergraph) -> Vec<usize> {
    let inc = incidence(h);
    let mut order: Vec<usize> = (0..h.vertices).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(inc[v].len()), v));
    let mut colors: Vec<Option<usize>> = vec![None; h.vertices];
    for v in order {
        let c = (0..)
            .find(|&c| {
                !inc[v]
                    .iter()
                    .any(|&e| h.edges[e].iter().all(|&u| u == v || colors[u] == Some(c)))
            })
            .expect("some color is free");
        colors[v] = Some(c);
    }
    colors.into_iter().map(|c| c.expect("colored")).collect()
}

/// Relabels colors by first appearance, so they read `0, 1, ...` in vertex order.
fn canonical(colors: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    colors
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Minimum number of colors with no monochromatic edge.
///
/// Tries color counts upward from the clique bound. Each count is a
/// branch-and-bound search over the most constrained vertex, with colors
/// introduced in increasing order. With the budget exhausted the best coloring
/// found is returned with `optimal = false`.
pub fn exact_chromatic(h: &CopyHypergraph, budget: u64) -> ColoringCertificate {
    if h.vertices == 0 {
        return ColoringCertificate {
            colors: vec![],
            color_count: 0,
            optimal: true,
            lower_bound: 0,
            lower_bound_witness: None,
            nodes: 0,
        };
    }
    let clique = greedy_clique(h);
    let mut lower = clique.len().max(if h.edges.is_empty() { 1 } else { 2 });
    let mut best = canonical(&greedy_coloring(h));
    let mut upper = best.iter().max().map_or(0, |&c| c + 1);
    let mut nodes = 0u64;
    let mut exhausted = false;
    let mut proven_by_search = false;

    while lower < upper {
        let mut search = ColorSearch::new(h, lower, budget.saturating_sub(nodes));
        let found = search.solve(0);
        nodes += search.nodes.min(search.budget);
        if found {
            best = canonical(&search.colors.iter().map(|c| c.expect("colored")).collect::<Vec<_>>());
            upper = lower;
        } else if search.exhausted {
            exhausted = true;
            break;
        } else {
            lower += 1;
            proven_by_search = true;
        }
    }

    // the witness justifies `lower`, whether or not the search finished
    let witness = if lower == clique.len() && lower >= 2 {
        Some(LowerBoundWitness::Clique { vertices: clique })
    } else if lower == 2 && !h.edges.is_empty() {
        Some(LowerBoundWitness::Edge {
            vertices: h.edges[0].clone(),
        })
    } else if proven_by_search {
        Some(LowerBoundWitness::Exhaustive {
            colors_ruled_out: lower - 1,
        })
    } else {
        None
    };
    let optimal = !exhausted;
    ColoringCertificate {
        color_count: upper,
        colors: best,
        optimal,
        lower_bound: lower,
        lower_bound_witness: witness,
        nodes,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GridChromatic {
    pub k: u32,
    pub n: u32,
    pub hypergraph_edges: usize,
    pub certificate: ColoringCertificate,
    /// `ceil((k+1)^n / k^n)`, reported when the forbidden space is the unit baton.
    pub counting_lower: Option<u64>,
}

/// The point set `[k]_0^n` and its copy hypergraph for `space`.
pub fn grid_hypergraph(k: u32, n: usize, space: &FiniteMetricSpace) -> Result<(PointSet, CopyHypergraph)> {
    if k < 1 || n < 1 {
        return Err(Error::Precondition("k and n must be at least 1".into()));
    }
    let grid = PointSet::grid(k, n);
    let h = copy_hypergraph(&grid, space)?;
    Ok((grid, h))
}

/// Colors the grid `[k]_0^n` avoiding `space`, returning the best coloring
/// when the budget runs out. For the unit baton the counting bound can raise
/// the lower bound.
pub fn grid_coloring(k: u32, n: usize, space: &FiniteMetricSpace, budget: u64) -> Result<GridChromatic> {
    let (_, h) = grid_hypergraph(k, n, space)?;
    let mut cert = exact_chromatic(&h, budget);
    let counting_lower = if *space == FiniteMetricSpace::unit_baton(k as usize) {
        let b: BigInt = pigeonhole_lower_bound(k, n as u32)?;
        b.to_u64()
    } else {
        None
    };
    if let Some(c) = counting_lower {
        assert!(cert.color_count as u64 >= c, "coloring below the counting bound");
        let clique = matches!(cert.lower_bound_witness, Some(LowerBoundWitness::Clique { .. }));
        let raises = c > cert.lower_bound as u64;
        if raises || (c == cert.lower_bound as u64 && cert.optimal && !clique) {
            cert.lower_bound = c as usize;
            cert.lower_bound_witness = Some(LowerBoundWitness::Counting {
                points: h.vertices,
                max_class: (k as usize).pow(n as u32),
            });
            cert.optimal |= cert.lower_bound == cert.color_count;
        }
    }
    Ok(GridChromatic {
        k,
        n: n as u32,
        hypergraph_edges: h.edges.len(),
        certificate: cert,
        counting_lower,
    })
}

/// Exact chromatic number of the grid `[k]_0^n` avoiding `space`; running out
/// of budget is an error carrying the bounds reached.
pub fn grid_chromatic(k: u32, n: usize, space: &FiniteMetricSpace, budget: u64) -> Result<GridChromatic> {
    let res = grid_coloring(k, n, space, budget)?;
    if !res.certificate.optimal {
        return Err(Error::BudgetExhausted {
            budget,
            lower: res.certificate.lower_bound,
            upper: res.certificate.color_count,
        });
    }
    Ok(res)
}

/// Smallest `c` admitting a proper coloring, by trying every assignment of
/// at most `c` colors. A reference for tiny hypergraphs.
pub fn naive_chromatic(h: &CopyHypergraph) -> usize {
    if h.vertices == 0 {
        return 0;
    }
    for c in 1..=h.vertices {
        let mut colors = vec![0usize; h.vertices];
        loop {
            if h.is_proper(&colors) {
                return c;
            }
            let mut i = 0;
            while i < colors.len() {
                colors[i] += 1;
                if colors[i] < c {
                    break;
                }
                colors[i] = 0;
                i += 1;
            }
            if i == colors.len() {
                break;
            }
        }
    }
    unreachable!("one color per vertex is always proper")
}
