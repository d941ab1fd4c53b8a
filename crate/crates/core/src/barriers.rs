//! Path energies and the critical depth on discretized landscapes.
//!
//! A path is a walk on a graph whose nodes carry potential values; its
//! height is the largest node value it visits. Then
//!
//! ```text
//! level(a, b) = min over paths a → b of the path height
//! E(a, b)     = level(a, b) − U(a) − U(b)
//! c*          = max over all pairs of E(a, b)
//! ```
//!
//! `level` is a widest-path search; `c*` comes from a single sublevel-set
//! sweep with union-find. Whenever two components merge at level `ℓ`, the
//! largest energy between them is `ℓ − min A − min B`, attained by their
//! minimizers, so the sweep yields the exact maximum over pairs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::torus::TorusSpec;
use crate::union_find::UnionFind;

/// Relative tolerance identifying global minimizers.
pub const GLOBAL_MIN_TOL: f64 = 1e-9;

pub trait Topology {
    fn node_count(&self) -> usize;

    /// Appends the neighbors of `i` to `out` (which is cleared first).
    fn neighbors(&self, i: usize, out: &mut Vec<usize>);
}

/// Explicit undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        Self { adj }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }
}

impl Topology for Graph {
    fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend_from_slice(&self.adj[i]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adjacency {
    Axis,
    FullDiagonal,
}

impl Adjacency {
    /// Axis+diagonal for `d ≤ 2`, axis-only above.
    pub fn default_for(dim: usize) -> Self {
        if dim <= 2 {
            Adjacency::FullDiagonal
        } else {
            Adjacency::Axis
        }
    }
}

/// Tensor grid on a box (or a periodic box).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
    pub adjacency: Adjacency,
    /// Periodic grids exclude `hi` (nodes `lo + i·(hi−lo)/n`).
    pub periodic: bool,
}

impl GridSpec {
    pub fn new(
        lo: Vec<f64>,
        hi: Vec<f64>,
        nodes: Vec<usize>,
        adjacency: Adjacency,
        periodic: bool,
    ) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d || nodes.len() != d {
            return Err(Error::EmptyGrid);
        }
        if d > 3 {
            return Err(Error::Domain("barrier grids support d <= 3".into()));
        }
        for i in 0..d {
            if nodes[i] < 2 {
                return Err(Error::param("resolution", "need at least 2 nodes per axis"));
            }
            if !(hi[i] > lo[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::param("bounds", "need finite lo < hi on every axis"));
            }
        }
        Ok(Self {
            lo,
            hi,
            nodes,
            adjacency,
            periodic,
        })
    }

    /// Box grid with the default adjacency and `resolution` nodes per axis.
    pub fn cube(lo: f64, hi: f64, dim: usize, resolution: usize) -> Result<Self> {
        Self::new(
            vec![lo; dim],
            vec![hi; dim],
            vec![resolution; dim],
            Adjacency::default_for(dim),
            false,
        )
    }

    /// Box grid with spacing `h` (rounded to fit the box exactly).
    pub fn with_spacing(lo: f64, hi: f64, dim: usize, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::param("h", "must be > 0"));
        }
        let n = ((hi - lo) / h).round() as usize + 1;
        Self::cube(lo, hi, dim, n)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let span = self.hi[axis] - self.lo[axis];
        if self.periodic {
            span / self.nodes[axis] as f64
        } else {
            span / (self.nodes[axis] - 1) as f64
        }
    }

    pub fn coords(&self, mut idx: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let k = idx % self.nodes[i];
                idx /= self.nodes[i];
                self.lo[i] + self.spacing(i) * k as f64
            })
            .collect()
    }

    /// Potential values at every node, in node order.
    pub fn sample(&self, p: &dyn Potential) -> Result<Vec<f64>> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        (0..self.node_count())
            .map(|i| {
                let x = self.coords(i);
                let v = p.value(&x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { x })
                }
            })
            .collect()
    }
}

impl Topology for GridSpec {
    fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let d = self.dim();
        let mut idx = [0isize; 3];
        let mut r = i;
        for a in 0..d {
            idx[a] = (r % self.nodes[a]) as isize;
            r /= self.nodes[a];
        }
        let offsets: i32 = 3i32.pow(d as u32);
        for code in 0..offsets {
            let mut off = [0isize; 3];
            let mut c = code;
            let mut nonzero = 0;
            for o in off.iter_mut().take(d) {
                *o = (c % 3) as isize - 1;
                c /= 3;
                if *o != 0 {
                    nonzero += 1;
                }
            }
            if nonzero == 0 || (self.adjacency == Adjacency::Axis && nonzero > 1) {
                continue;
            }
            let mut flat = 0usize;
            let mut stride = 1usize;
            let mut valid = true;
            for a in 0..d {
                let n = self.nodes[a] as isize;
                let mut k = idx[a] + off[a];
                if self.periodic {
                    k = k.rem_euclid(n);
                } else if k < 0 || k >= n {
                    valid = false;
                    break;
                }
                flat += k as usize * stride;
                stride *= self.nodes[a];
            }
            if valid && flat != i && !out.contains(&flat) {
                out.push(flat);
            }
        }
    }
}

fn check_values<T: Topology + ?Sized>(topo: &T, values: &[f64]) -> Result<()> {
    if topo.node_count() == 0 {
        return Err(Error::EmptyGrid);
    }
    if values.len() != topo.node_count() {
        return Err(Error::DimensionMismatch {
            expected: topo.node_count(),
            got: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::param("values", format!("non-finite value at node {i}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Level(f64);

impl Eq for Level {}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// `min over paths a → b of max node value` by a widest-path search.
pub fn minimax_level<T: Topology + ?Sized>(topo: &T, values: &[f64], a: usize, b: usize) -> Result<f64> {
    check_values(topo, values)?;
    let n = topo.node_count();
    if a >= n || b >= n {
        return Err(Error::param("node", format!("index out of range (n = {n})")));
    }
    let mut best = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[a] = values[a];
    heap.push(Reverse((Level(values[a]), a)));
    let mut nb = Vec::new();
    while let Some(Reverse((Level(lev), v))) = heap.pop() {
        if done[v] {
            continue;
        }
        if v == b {
            return Ok(lev);
        }
        done[v] = true;
        topo.neighbors(v, &mut nb);
        for &w in &nb {
            let cand = lev.max(values[w]);
            if !done[w] && cand < best[w] {
                best[w] = cand;
                heap.push(Reverse((Level(cand), w)));
            }
        }
    }
    Err(Error::Disconnected { a, b })
}

/// `E(a, b) = level(a, b) − U(a) − U(b)`.
pub fn energy<T: Topology + ?Sized>(topo: &T, values: &[f64], a: usize, b: usize) -> Result<f64> {
    Ok(minimax_level(topo, values, a, b)? - values[a] - values[b])
}

/// A merge of two basins during the sweep where the result holds a global
/// minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub level: f64,
    /// Minimum of the absorbed component (the side with the larger minimum).
    pub absorbed_min: f64,
    pub absorbed_argmin: usize,
    /// Minimum of the surviving component.
    pub survivor_min: f64,
    pub survivor_argmin: usize,
    /// `ℓ − min A − min B`.
    pub barrier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierResult {
    pub c_star: f64,
    /// `(local-min node, global-min node)` attaining `c_star`.
    pub argmax: (usize, usize),
    pub saddle_level: f64,
    pub global_min_value: f64,
    pub global_minimizers: Vec<usize>,
    pub merge_events: Vec<MergeEvent>,
}

impl BarrierResult {
    /// CSV of merge events: `level,absorbed_min,survivor_min,barrier,absorbed_node,survivor_node`.
    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "level,absorbed_min,survivor_min,barrier,absorbed_node,survivor_node")?;
        for e in &self.merge_events {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.level, e.absorbed_min, e.survivor_min, e.barrier, e.absorbed_argmin, e.survivor_argmin
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Component {
    min: f64,
    argmin: usize,
    global: bool,
}

/// Critical depth by a sublevel-set sweep. Equals `max_{a,b} E(a, b)`
/// exactly on the given graph; nodes within [`GLOBAL_MIN_TOL`] of the grid
/// minimum count as global minimizers.
pub fn c_star<T: Topology + ?Sized>(topo: &T, values: &[f64]) -> Result<BarrierResult> {
    check_values(topo, values)?;
    let n = topo.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let gmin = values[order[0]];
    let tol = GLOBAL_MIN_TOL * gmin.abs().max(1.0);
    let is_global = |v: f64| v <= gmin + tol;

    let mut uf = UnionFind::new(n);
    let mut comp: Vec<Component> = (0..n)
        .map(|i| Component {
            min: values[i],
            argmin: i,
            global: is_global(values[i]),
        })
        .collect();
    let mut active = vec![false; n];
    let mut events = Vec::new();
    let mut best = -gmin;
    let mut best_event: Option<usize> = None;
    let mut nb = Vec::new();

    for &v in &order {
        active[v] = true;
        let level = values[v];
        topo.neighbors(v, &mut nb);
        for &w in &nb {
            if !active[w] {
                continue;
            }
            let rv = uf.find(v);
            let rw = uf.find(w);
            if rv == rw {
                continue;
            }
            let (a, b) = (comp[rv], comp[rw]);
            let merged_global = a.global || b.global;
            if merged_global && a.min < level && b.min < level {
                let a_first = match (a.global, b.global) {
                    (false, true) => true,
                    (true, false) => false,
                    _ => (a.min, a.argmin) > (b.min, b.argmin),
                };
                let (absorbed, survivor) = if a_first { (a, b) } else { (b, a) };
                let barrier = ((level - a.min) - b.min).max((level - b.min) - a.min);
                events.push(MergeEvent {
                    level,
                    absorbed_min: absorbed.min,
                    absorbed_argmin: absorbed.argmin,
                    survivor_min: survivor.min,
                    survivor_argmin: survivor.argmin,
                    barrier,
                });
                if barrier > best {
                    best = barrier;
                    best_event = Some(events.len() - 1);
                }
            }
            let root = uf.link(rv, rw);
            let keep = if (a.min, a.argmin) <= (b.min, b.argmin) { a } else { b };
            comp[root] = Component {
                min: keep.min,
                argmin: keep.argmin,
                global: merged_global,
            };
        }
    }

    let root = uf.find(order[0]);
    for i in 0..n {
        if uf.find(i) != root {
            return Err(Error::Disconnected { a: order[0], b: i });
        }
    }
    let global_minimizers: Vec<usize> = (0..n).filter(|&i| is_global(values[i])).collect();
    let (argmax, saddle_level) = match best_event {
        Some(k) => {
            let e = &events[k];
            ((e.absorbed_argmin, e.survivor_argmin), e.level)
        }
        None => ((order[0], order[0]), gmin),
    };
    Ok(BarrierResult {
        c_star: best,
        argmax,
        saddle_level,
        global_min_value: gmin,
        global_minimizers,
        merge_events: events,
    })
}

/// Critical depth of `U_K` on a periodic grid over `[−L_K, L_K)^d`.
pub fn c_star_torus(ts: &TorusSpec, resolution: usize) -> Result<(GridSpec, BarrierResult)> {
    if resolution < 16 {
        return Err(Error::param("resolution", "need at least 16 nodes per axis"));
    }
    let d = ts.dim();
    let l = ts.half_width();
    let grid = GridSpec::new(
        vec![-l; d],
        vec![l; d],
        vec![resolution; d],
        Adjacency::default_for(d),
        true,
    )?;
    let values = grid.sample(ts)?;
    let res = c_star(&grid, &values)?;
    Ok((grid, res))
}
