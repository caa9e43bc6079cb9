//! Classical semidefinite relaxations solved by ADMM.
//!
//! Maximize `Σ_E ⟨C_uv, M_uv⟩` over `mn × mn` matrices with `M ⪰ 0` and identity
//! diagonal blocks. The augmented variant also keeps every off-diagonal block inside
//! `conv SO(n)`. The splitting alternates a projection onto the block constraints with
//! an eigenvalue-clipping projection onto the PSD cone.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::{row_major, ProblemInstance};
use crate::orthlin::{project_conv_so, Group};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial ADMM penalty.
    pub penalty: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            penalty: 1.0,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            max_iter: 20_000,
        }
    }
}

pub const RANK_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub m_mat: DMatrix<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub numerical_rank: usize,
    /// `numerical_rank == n`.
    pub exact_certificate: bool,
    pub conv_so: bool,
}

pub fn solve_basic(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SdpSolution> {
    solve(inst, cfg, false)
}

pub fn solve_conv_so(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SdpSolution> {
    if inst.group != Group::SO {
        return invalid("the conv SO(n) relaxation needs an SO instance");
    }
    solve(inst, cfg, true)
}

/// `Σ_E ⟨C_uv, M_uv⟩`.
pub fn edge_objective(inst: &ProblemInstance, m: &DMatrix<f64>) -> f64 {
    let n = inst.n;
    inst.graph
        .edges
        .iter()
        .zip(&inst.blocks)
        .map(|(&(u, v), c)| c.dot(&m.view((u * n, v * n), (n, n)).into_owned()))
        .sum()
}

fn project_psd(x: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = x.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    &v * v.transpose()
}

/// Identity diagonal blocks; off-diagonal blocks kept or projected onto `conv SO(n)`.
/// The blocks are disjoint, so the blockwise projection is the exact projection onto
/// the product set.
fn project_blocks(x: &DMatrix<f64>, m: usize, n: usize, conv: bool) -> Result<DMatrix<f64>> {
    let mut out = (x + x.transpose()) * 0.5;
    for u in 0..m {
        out.view_mut((u * n, u * n), (n, n)).fill_with_identity();
        if conv {
            for v in u + 1..m {
                let b = project_conv_so(&out.view((u * n, v * n), (n, n)).into_owned())?;
                out.view_mut((u * n, v * n), (n, n)).copy_from(&b);
                out.view_mut((v * n, u * n), (n, n)).copy_from(&b.transpose());
            }
        }
    }
    Ok(out)
}

fn solve(inst: &ProblemInstance, cfg: &SolverConfig, conv: bool) -> Result<SdpSolution> {
    if !(cfg.penalty > 0.0) || !(cfg.tol_primal > 0.0) || !(cfg.tol_dual > 0.0) {
        return invalid("solver penalty and tolerances must be positive");
    }
    let (m, n) = (inst.m(), inst.n);
    let dim = m * n;
    let lin = inst.full_c() * 0.5;
    let mut rho = cfg.penalty;
    let mut z = DMatrix::<f64>::identity(dim, dim);
    let mut u = DMatrix::<f64>::zeros(dim, dim);
    let (mut r, mut s) = (f64::INFINITY, f64::INFINITY);
    for it in 1..=cfg.max_iter {
        let x = project_blocks(&(&z - &u + &lin / rho), m, n, conv)?;
        let z_old = std::mem::replace(&mut z, project_psd(&(&x + &u)));
        u += &x - &z;
        r = (&x - &z).norm();
        s = rho * (&z - &z_old).norm();
        if r < cfg.tol_primal && s < cfg.tol_dual {
            return Ok(finish(inst, z, r, s, it, conv));
        }
        if it % 10 == 0 {
            if r > 10.0 * s {
                rho *= 2.0;
                u /= 2.0;
            } else if s > 10.0 * r {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    Err(Error::NonConvergence {
        what: "SDP splitting",
        iterations: cfg.max_iter,
        residual: r.max(s),
    })
}

fn finish(inst: &ProblemInstance, m_mat: DMatrix<f64>, r: f64, s: f64, iterations: usize, conv_so: bool) -> SdpSolution {
    let numerical_rank = rank_certificate(&m_mat, RANK_TOL);
    SdpSolution {
        objective: edge_objective(inst, &m_mat),
        primal_residual: r,
        dual_residual: s,
        iterations,
        numerical_rank,
        exact_certificate: numerical_rank == inst.n,
        conv_so,
        m_mat,
    }
}

/// Number of eigenvalues above `tol · λ_max`.
pub fn rank_certificate(m: &DMatrix<f64>, tol: f64) -> usize {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let top = eig.max();
    if top <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&l| l > tol * top).count()
}

/// `M ≈ X Xᵀ`, returned as per-vertex row blocks `X_v` (`n × mn`) rescaled so that
/// `X_v X_vᵀ = I`.
pub fn factorize(m: &DMatrix<f64>, n: usize) -> Result<Vec<DMatrix<f64>>> {
    let dim = m.nrows();
    if dim % n != 0 || !m.is_square() {
        return invalid("matrix size is not a multiple of n");
    }
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.min() < -1e-7 {
        return Err(Error::Consistency(format!(
            "matrix is indefinite (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    let mut x = eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        x.column_mut(k).scale_mut(lam.max(0.0).sqrt());
    }
    let err = (m - &x * x.transpose()).norm();
    if err > 1e-5 * m.norm() {
        return Err(Error::Consistency(format!("factorization error {err:.3e}")));
    }
    (0..dim / n)
        .map(|v| {
            let xv = x.rows(v * n, n).into_owned();
            let g = (&xv * xv.transpose()).symmetric_eigen();
            if g.eigenvalues.min() <= 1e-12 {
                return Err(Error::Consistency(format!("factor block {v} is rank deficient")));
            }
            let inv_sqrt = &g.eigenvectors
                * DMatrix::from_diagonal(&g.eigenvalues.map(|l| 1.0 / l.sqrt()))
                * g.eigenvectors.transpose();
            Ok(inv_sqrt * xv)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    version: u32,
    relaxation: String,
    m: usize,
    n: usize,
    matrix: Vec<f64>,
    objective: f64,
    primal_residual: f64,
    dual_residual: f64,
    iterations: usize,
    numerical_rank: usize,
    exact_certificate: bool,
    config: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

pub fn solution_to_json(
    sol: &SdpSolution,
    n: usize,
    cfg: &SolverConfig,
    meta: Option<serde_json::Value>,
) -> Result<String> {
    let file = SolutionFile {
        version: 1,
        relaxation: if sol.conv_so { "conv_so" } else { "basic" }.into(),
        m: sol.m_mat.nrows() / n,
        n,
        matrix: row_major(&sol.m_mat),
        objective: sol.objective,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
        numerical_rank: sol.numerical_rank,
        exact_certificate: sol.exact_certificate,
        config: *cfg,
        meta,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn solution_from_json(text: &str) -> Result<(SdpSolution, usize)> {
    let f: SolutionFile = serde_json::from_str(text)?;
    if f.version != 1 {
        return Err(Error::Parse(format!("unsupported SDP solution version {}", f.version)));
    }
    let dim = f.m * f.n;
    let m_mat = crate::instance::from_row_major(dim, dim, &f.matrix)?;
    Ok((
        SdpSolution {
            m_mat,
            objective: f.objective,
            primal_residual: f.primal_residual,
            dual_residual: f.dual_residual,
            iterations: f.iterations,
            numerical_rank: f.numerical_rank,
            exact_certificate: f.exact_certificate,
            conv_so: f.relaxation == "conv_so",
        },
        f.n,
    ))
}
