//! Pull-style PageRank with Jacobi updates.
//!
//! One approximable `pagerank_calculate` call per iteration computes the
//! outgoing contributions and then, for every vertex, sums the contributions
//! of its in-neighbours. Rank mass of dangling vertices is spread uniformly,
//! so the scores keep summing to one.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Kernel, KernelError};
use crate::trace::{Real, TraceError, Tracer};

pub(super) const STATIC_FNS: &[&str] = &["pagerank_calculate"];
pub(super) const DEFAULT_VERTICES: usize = 64;
pub(super) const DEFAULT_ITERATIONS: usize = 10;
pub const DAMPING: f64 = 0.85;

/// Directed graph stored as in-neighbour lists plus out-degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    in_neighbors: Vec<Vec<u32>>,
    out_degree: Vec<u32>,
}

impl Graph {
    pub fn from_edges(num_vertices: usize, edges: &[(u32, u32)]) -> Result<Self, KernelError> {
        if num_vertices == 0 {
            return Err(KernelError::Invalid("graph has no vertices".into()));
        }
        let mut in_neighbors = vec![Vec::new(); num_vertices];
        let mut out_degree = vec![0u32; num_vertices];
        for &(src, dst) in edges {
            if src as usize >= num_vertices || dst as usize >= num_vertices {
                return Err(KernelError::Invalid(format!(
                    "edge {src} -> {dst} exceeds {num_vertices} vertices"
                )));
            }
            in_neighbors[dst as usize].push(src);
            out_degree[src as usize] += 1;
        }
        Ok(Self {
            in_neighbors,
            out_degree,
        })
    }

    pub fn cycle(n: usize) -> Result<Self, KernelError> {
        let edges: Vec<_> = (0..n as u32).map(|v| (v, (v + 1) % n as u32)).collect();
        Self::from_edges(n, &edges)
    }

    /// A ring plus up to four random extra out-edges per vertex.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = BTreeSet::new();
        for v in 0..n as u32 {
            edges.insert((v, (v + 1) % n as u32));
            for _ in 0..rng.random_range(0..=4) {
                let dst = rng.random_range(0..n as u32);
                if dst != v {
                    edges.insert((v, dst));
                }
            }
        }
        let edges: Vec<_> = edges.into_iter().collect();
        Self::from_edges(n, &edges).expect("generated edges are in range")
    }

    /// Parses `src dst` pairs (0-based ids); `#` starts a comment.
    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Self, KernelError> {
        let mut edges = Vec::new();
        let mut max_id = None::<u32>;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| KernelError::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let mut fields = line.split_whitespace();
            let mut id = |what: &str| -> Result<u32, KernelError> {
                let tok = fields
                    .next()
                    .ok_or_else(|| err(format!("missing {what} vertex")))?;
                tok.parse::<u32>()
                    .map_err(|_| err(format!("bad {what} vertex `{tok}`")))
            };
            let src = id("source")?;
            let dst = id("destination")?;
            if fields.next().is_some() {
                return Err(err("expected exactly two fields".into()));
            }
            max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
            edges.push((src, dst));
        }
        let n = max_id.map_or(0, |m| m as usize + 1);
        if n == 0 {
            return Err(KernelError::Parse {
                path: origin.to_path_buf(),
                line: 0,
                message: "edge list is empty".into(),
            });
        }
        Self::from_edges(n, &edges)
    }

    pub fn from_edge_list_file(path: &Path) -> Result<Self, KernelError> {
        let text = std::fs::read_to_string(path).map_err(|source| KernelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_edge_list(&text, path)
    }

    pub fn num_vertices(&self) -> usize {
        self.out_degree.len()
    }

    pub fn num_edges(&self) -> usize {
        self.out_degree.iter().map(|&d| d as usize).sum()
    }
}

#[derive(Debug, Clone)]
pub struct PageRank {
    graph: Graph,
    iterations: usize,
}

impl PageRank {
    pub fn new(graph: Graph, iterations: usize) -> Self {
        Self { graph, iterations }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }
}

impl Kernel for PageRank {
    fn name(&self) -> &str {
        "pagerank"
    }

    fn execute<F: Real>(&self, t: &mut Tracer<F>) -> Result<Vec<F>, TraceError> {
        let g = &self.graph;
        let n = g.num_vertices();
        let nf = F::lit(n as f64);
        let damping = F::lit(DAMPING);
        let base = F::lit((1.0 - DAMPING) / n as f64);
        let dangling: Vec<usize> = (0..n).filter(|&v| g.out_degree[v] == 0).collect();

        let mut scores = t.alloc(vec![F::lit(1.0 / n as f64); n]);
        let mut contrib = t.alloc_zeroed(n);

        for _ in 0..self.iterations {
            t.track_overhead(4);
            t.begin_call(STATIC_FNS[0])?;
            for v in 0..n {
                t.track_overhead(3);
                if g.out_degree[v] == 0 {
                    continue;
                }
                let s = t.load(&scores, v);
                let c = t.op(s / F::lit(f64::from(g.out_degree[v])));
                t.store(&mut contrib, v, c);
            }
            let mut spread = F::zero();
            if !dangling.is_empty() {
                let mut mass = F::zero();
                for &v in &dangling {
                    t.track_overhead(1);
                    let s = t.load(&scores, v);
                    mass = t.op(mass + s);
                }
                let m = t.op(mass * damping);
                spread = t.op(m / nf);
            }
            for u in 0..n {
                t.track_overhead(3);
                let mut incoming = F::zero();
                for &v in &g.in_neighbors[u] {
                    t.track_overhead(2);
                    let c = t.load(&contrib, v as usize);
                    incoming = t.op(incoming + c);
                }
                let pulled = t.op(damping * incoming);
                let mut next = t.op(base + pulled);
                if !dangling.is_empty() {
                    next = t.op(next + spread);
                }
                t.store(&mut scores, u, next);
            }
            t.end_call()?;
        }
        Ok(scores.into_vec())
    }
}
