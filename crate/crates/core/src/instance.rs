//! Problem instances: graph, edge coefficient blocks, optional planted solution.
//!
//! Vertices are 0-based. Only blocks `C_uv` with `u < v` are stored; `C_vu = C_uvᵀ`.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::orthlin::{haar_element, is_orthogonal, Group};
use crate::rng::{self, RNG_ALGORITHM};

/// Simple undirected graph with sorted edges `(u, v)`, `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub m: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(m: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u >= v || v >= m {
                return invalid(format!("edge ({u}, {v}) must satisfy u < v < m = {m}"));
            }
            if !seen.insert((u, v)) {
                return invalid(format!("duplicate edge ({u}, {v})"));
            }
        }
        Ok(Self { m, edges })
    }

    pub fn complete(m: usize) -> Self {
        let edges = (0..m).flat_map(|u| (u + 1..m).map(move |v| (u, v))).collect();
        Self { m, edges }
    }

    pub fn path(m: usize) -> Self {
        Self {
            m,
            edges: (1..m).map(|v| (v - 1, v)).collect(),
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }
}

/// Random `degree`-regular graph from the pairing (configuration) model, retrying
/// until the pairing is simple.
pub fn random_regular_graph<R: Rng + ?Sized>(m: usize, degree: usize, rng: &mut R) -> Result<Graph> {
    if (m * degree) % 2 == 1 {
        return invalid(format!("no {degree}-regular graph on {m} vertices (odd degree sum)"));
    }
    if degree >= m {
        return invalid(format!("degree {degree} must be below vertex count {m}"));
    }
    const MAX_RETRIES: usize = 10_000;
    let mut points: Vec<usize> = (0..m * degree).map(|p| p / degree).collect();
    'attempt: for _ in 0..MAX_RETRIES {
        points.shuffle(rng);
        let mut edges = BTreeSet::new();
        for pair in points.chunks(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !edges.insert((a, b)) {
                continue 'attempt;
            }
        }
        return Graph::new(m, edges.into_iter().collect());
    }
    Err(Error::NonConvergence {
        what: "random regular graph pairing",
        iterations: MAX_RETRIES,
        residual: f64::NAN,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub graph: Graph,
    pub n: usize,
    pub group: Group,
    /// Degree used by the generator, when the graph is regular.
    pub degree: Option<usize>,
    /// One block per edge, aligned with `graph.edges`.
    pub blocks: Vec<DMatrix<f64>>,
    pub planted: Option<Vec<DMatrix<f64>>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn new(graph: Graph, n: usize, group: Group, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let inst = Self {
            graph,
            n,
            group,
            degree: None,
            blocks,
            planted: None,
            noise_sigma: 0.0,
            seed: 0,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be positive");
        }
        if self.blocks.len() != self.graph.edges.len() {
            return invalid(format!(
                "{} blocks for {} edges",
                self.blocks.len(),
                self.graph.edges.len()
            ));
        }
        for b in &self.blocks {
            if b.nrows() != self.n || b.ncols() != self.n || b.iter().any(|v| !v.is_finite()) {
                return invalid("blocks must be finite n×n matrices");
            }
        }
        if let Some(p) = &self.planted {
            if p.len() != self.graph.m {
                return invalid("planted solution has wrong length");
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.graph.m
    }

    /// `C_uv` for any ordered pair on an edge.
    pub fn block(&self, u: usize, v: usize) -> Option<DMatrix<f64>> {
        let (a, b) = (u.min(v), u.max(v));
        let k = self.graph.edges.iter().position(|&e| e == (a, b))?;
        Some(if u < v {
            self.blocks[k].clone()
        } else {
            self.blocks[k].transpose()
        })
    }

    /// Symmetric `mn × mn` coefficient matrix with zero diagonal blocks.
    pub fn full_c(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut c = DMatrix::zeros(self.m() * n, self.m() * n);
        for (&(u, v), b) in self.graph.edges.iter().zip(&self.blocks) {
            c.view_mut((u * n, v * n), (n, n)).copy_from(b);
            c.view_mut((v * n, u * n), (n, n)).copy_from(&b.transpose());
        }
        c
    }

    /// `Σ_E tr C_uv`, the objective at `R_v = I`.
    pub fn identity_objective(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }
}

/// `C_uv = g_u g_vᵀ + σ W_uv` on a random regular graph, with Haar `g_v` and
/// standard normal `W_uv`. Draw order: graph, planted elements, noise.
pub fn gen_group_sync(
    m: usize,
    degree: usize,
    n: usize,
    sigma: f64,
    group: Group,
    seed: u64,
) -> Result<ProblemInstance> {
    if n == 0 || !(sigma >= 0.0) {
        return invalid("need n > 0 and sigma >= 0");
    }
    let mut rng = rng::from_seed(seed);
    let graph = random_regular_graph(m, degree, &mut rng)?;
    let planted: Vec<DMatrix<f64>> = (0..m).map(|_| haar_element(n, group, &mut rng)).collect();
    let blocks = graph
        .edges
        .iter()
        .map(|&(u, v)| {
            let w = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            &planted[u] * planted[v].transpose() + w * sigma
        })
        .collect();
    Ok(ProblemInstance {
        graph,
        n,
        group,
        degree: Some(degree),
        blocks,
        planted: Some(planted),
        noise_sigma: sigma,
        seed,
    })
}

/// Orthogonal Procrustes: `K` Gaussian point clouds per vertex, complete graph,
/// `C_uv = Σ_k x_{u,k} x_{v,k}ᵀ`.
pub fn gen_procrustes(m: usize, k: usize, n: usize, seed: u64) -> Result<ProblemInstance> {
    if k == 0 || n == 0 {
        return invalid("need K >= 1 and n >= 1");
    }
    let mut rng = rng::from_seed(seed);
    let clouds: Vec<DMatrix<f64>> = (0..m)
        .map(|_| DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let graph = Graph::complete(m);
    let blocks = graph
        .edges
        .iter()
        .map(|&(u, v)| &clouds[u] * clouds[v].transpose())
        .collect();
    Ok(ProblemInstance {
        graph,
        n,
        group: Group::O,
        degree: None,
        blocks,
        planted: None,
        noise_sigma: 0.0,
        seed,
    })
}

/// Checks that `rs` is a valid assignment of group elements.
pub fn check_assignment(inst: &ProblemInstance, rs: &[DMatrix<f64>]) -> Result<()> {
    if rs.len() != inst.m() {
        return invalid(format!("expected {} matrices, got {}", inst.m(), rs.len()));
    }
    for (v, r) in rs.iter().enumerate() {
        if r.nrows() != inst.n || !is_orthogonal(r, 1e-8) {
            return invalid(format!("matrix for vertex {v} is not orthogonal"));
        }
        if inst.group == Group::SO && (r.determinant() - 1.0).abs() > 1e-8 {
            return invalid(format!("matrix for vertex {v} is not a rotation"));
        }
    }
    Ok(())
}

/// `Σ_E ⟨C_uv, R_u R_vᵀ⟩`.
pub fn objective(inst: &ProblemInstance, rs: &[DMatrix<f64>]) -> Result<f64> {
    check_assignment(inst, rs)?;
    Ok(objective_unchecked(inst, rs))
}

pub(crate) fn objective_unchecked(inst: &ProblemInstance, rs: &[DMatrix<f64>]) -> f64 {
    inst.graph
        .edges
        .iter()
        .zip(&inst.blocks)
        .map(|(&(u, v), c)| c.dot(&(&rs[u] * rs[v].transpose())))
        .sum()
}

const FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    m: usize,
    n: usize,
    group: Group,
    degree: Option<usize>,
    edges: Vec<[usize; 2]>,
    blocks: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    planted: Option<Vec<Vec<f64>>>,
    noise_sigma: f64,
    seed: u64,
    rng_algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub(crate) fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries for a {rows}x{cols} matrix, found {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

/// JSON form, optionally carrying a metadata object.
pub fn instance_to_json(inst: &ProblemInstance, meta: Option<serde_json::Value>) -> Result<String> {
    let file = InstanceFile {
        version: FILE_VERSION,
        m: inst.m(),
        n: inst.n,
        group: inst.group,
        degree: inst.degree,
        edges: inst.graph.edges.iter().map(|&(u, v)| [u, v]).collect(),
        blocks: inst.blocks.iter().map(row_major).collect(),
        planted: inst.planted.as_ref().map(|p| p.iter().map(row_major).collect()),
        noise_sigma: inst.noise_sigma,
        seed: inst.seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        meta,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    let f: InstanceFile = serde_json::from_str(text)?;
    if f.version != FILE_VERSION {
        return Err(Error::Parse(format!(
            "instance file version {} unsupported (expected {FILE_VERSION})",
            f.version
        )));
    }
    let graph = Graph::new(f.m, f.edges.iter().map(|e| (e[0], e[1])).collect())
        .map_err(|e| Error::Parse(e.to_string()))?;
    let blocks = f
        .blocks
        .iter()
        .map(|b| from_row_major(f.n, f.n, b))
        .collect::<Result<Vec<_>>>()?;
    let planted = f
        .planted
        .map(|p| p.iter().map(|b| from_row_major(f.n, f.n, b)).collect::<Result<Vec<_>>>())
        .transpose()?;
    let inst = ProblemInstance {
        graph,
        n: f.n,
        group: f.group,
        degree: f.degree,
        blocks,
        planted,
        noise_sigma: f.noise_sigma,
        seed: f.seed,
    };
    inst.validate().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(inst)
}

pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<()> {
    std::fs::write(path, instance_to_json(inst, None)?)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    instance_from_json(&std::fs::read_to_string(path)?)
}

/// A random assignment drawn from the instance's group.
pub fn random_assignment<R: Rng + ?Sized>(inst: &ProblemInstance, rng: &mut R) -> Vec<DMatrix<f64>> {
    (0..inst.m()).map(|_| haar_element(inst.n, inst.group, rng)).collect()
}

/// Applies a fixed right factor to every element; the objective is unchanged.
pub fn gauge(rs: &[DMatrix<f64>], g: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    rs.iter().map(|r| r * g).collect()
}
