//! Rounding relaxed solutions to group elements: edge-marginal rounding of the
//! Gram matrix (CR), vertex-marginal rounding (VR), and Gaussian randomized
//! rounding of SDP factors (GW).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::ExpectationReport;
use crate::error::{invalid, Error, Result};
use crate::instance::{from_row_major, objective_unchecked, row_major, ProblemInstance};
use crate::orthlin::{is_orthogonal, project_to_group, Group};
use crate::rng;

/// Blocks with Frobenius norm at or below this round to the identity.
pub const ZERO_BLOCK_TOL: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundingMethod {
    CR,
    VR,
    GW,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundedSolution {
    pub matrices: Vec<DMatrix<f64>>,
    pub objective_value: f64,
    pub method: RoundingMethod,
    pub trials_used: usize,
}

/// Group projection with the zero block sent to the identity.
pub fn round_block(x: &DMatrix<f64>, group: Group) -> Result<DMatrix<f64>> {
    if x.norm() <= ZERO_BLOCK_TOL {
        return Ok(DMatrix::identity(x.nrows(), x.ncols()));
    }
    project_to_group(x, group)
}

fn finish(inst: &ProblemInstance, matrices: Vec<DMatrix<f64>>, method: RoundingMethod, trials: usize) -> RoundedSolution {
    let objective_value = objective_unchecked(inst, &matrices);
    RoundedSolution {
        matrices,
        objective_value,
        method,
        trials_used: trials,
    }
}

fn check_report(report: &ExpectationReport, inst: &ProblemInstance) -> Result<()> {
    if report.m() != inst.m() || report.n != inst.n || report.gram.nrows() != inst.m() * inst.n {
        return invalid("report does not match the instance dimensions");
    }
    Ok(())
}

/// Fixes `R_0 = I` and rounds `R_v` from the Gram block `𝓜_{v0}`, so that
/// `R_u R_vᵀ` tracks `n 𝓜_uv`.
pub fn round_cr(report: &ExpectationReport, inst: &ProblemInstance) -> Result<RoundedSolution> {
    check_report(report, inst)?;
    round_gram(&report.gram, inst)
}

/// CR rounding of any `mn × mn` Gram-like matrix, such as an SDP solution.
pub fn round_gram(gram: &DMatrix<f64>, inst: &ProblemInstance) -> Result<RoundedSolution> {
    let n = inst.n;
    if gram.nrows() != inst.m() * n || gram.ncols() != inst.m() * n {
        return invalid("Gram matrix does not match the instance dimensions");
    }
    let mut rs = vec![DMatrix::identity(n, n)];
    for v in 1..inst.m() {
        let block = gram.view((v * n, 0), (n, n)).into_owned();
        rs.push(round_block(&block, inst.group)?);
    }
    Ok(finish(inst, rs, RoundingMethod::CR, 1))
}

/// Rounds each vertex moment matrix independently.
pub fn round_vr(report: &ExpectationReport, inst: &ProblemInstance) -> Result<RoundedSolution> {
    check_report(report, inst)?;
    let rs = report
        .vertex_moments
        .iter()
        .map(|q| round_block(q, inst.group))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(inst, rs, RoundingMethod::VR, 1))
}

/// Best of `trials` Gaussian roundings `O_v = proj(X_v Z)` with `Z` an `mn × n`
/// matrix of `N(0, 1/n)` entries. Trial `t` draws from stream `t` of `seed`.
pub fn round_gw(
    factors: &[DMatrix<f64>],
    inst: &ProblemInstance,
    trials: usize,
    seed: u64,
) -> Result<RoundedSolution> {
    let n = inst.n;
    if factors.len() != inst.m() || trials == 0 {
        return invalid("need one factor per vertex and at least one trial");
    }
    let cols = factors[0].ncols();
    for (v, x) in factors.iter().enumerate() {
        if x.nrows() != n || x.ncols() != cols {
            return invalid(format!("factor {v} has the wrong shape"));
        }
        let e = x * x.transpose() - DMatrix::<f64>::identity(n, n);
        if e.amax() > 1e-6 {
            return invalid(format!("factor {v} rows are not orthonormal"));
        }
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut best: Option<(f64, Vec<DMatrix<f64>>)> = None;
    for t in 0..trials {
        let mut r = rng::stream(seed, t as u64);
        let z = DMatrix::from_fn(cols, n, |_, _| r.sample::<f64, _>(StandardNormal) * scale);
        let rs = factors
            .iter()
            .map(|x| round_block(&(x * &z), inst.group))
            .collect::<Result<Vec<_>>>()?;
        let f = objective_unchecked(inst, &rs);
        if best.as_ref().map_or(true, |(b, _)| f > *b) {
            best = Some((f, rs));
        }
    }
    let (_, rs) = best.expect("at least one trial");
    Ok(finish(inst, rs, RoundingMethod::GW, trials))
}

/// Block coordinate ascent: each vertex in turn is set to the maximizer of the
/// objective with its neighbors held fixed. Never decreases the objective.
pub fn local_ascent(inst: &ProblemInstance, rs: &[DMatrix<f64>], max_sweeps: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = inst.n;
    let mut rs = rs.to_vec();
    let mut f = objective_unchecked(inst, &rs);
    for _ in 0..max_sweeps {
        for v in 0..inst.m() {
            let mut s = DMatrix::zeros(n, n);
            for (&(a, b), c) in inst.graph.edges.iter().zip(&inst.blocks) {
                if a == v {
                    s += c * &rs[b];
                } else if b == v {
                    s += c.transpose() * &rs[a];
                }
            }
            if s.norm() > ZERO_BLOCK_TOL {
                let cand = project_to_group(&s, inst.group)?;
                if s.dot(&cand) > s.dot(&rs[v]) {
                    rs[v] = cand;
                }
            }
        }
        let g = objective_unchecked(inst, &rs);
        let done = g - f <= 1e-15 * f.abs().max(1.0);
        f = g;
        if done {
            break;
        }
    }
    Ok(rs)
}

#[derive(Serialize, Deserialize)]
struct RoundedFile {
    version: u32,
    method: RoundingMethod,
    n: usize,
    objective_value: f64,
    trials_used: usize,
    matrices: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

pub fn solution_to_json(sol: &RoundedSolution, meta: Option<serde_json::Value>) -> Result<String> {
    let file = RoundedFile {
        version: 1,
        method: sol.method,
        n: sol.matrices.first().map_or(0, |m| m.nrows()),
        objective_value: sol.objective_value,
        trials_used: sol.trials_used,
        matrices: sol.matrices.iter().map(row_major).collect(),
        meta,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn solution_from_json(text: &str) -> Result<RoundedSolution> {
    let f: RoundedFile = serde_json::from_str(text)?;
    if f.version != 1 {
        return Err(Error::Parse(format!("unsupported rounded-solution version {}", f.version)));
    }
    let matrices = f
        .matrices
        .iter()
        .map(|m| from_row_major(f.n, f.n, m))
        .collect::<Result<Vec<_>>>()?;
    if matrices.iter().any(|m| !is_orthogonal(m, 1e-8)) {
        return Err(Error::Parse("stored matrices are not orthogonal".into()));
    }
    Ok(RoundedSolution {
        matrices,
        objective_value: f.objective_value,
        method: f.method,
        trials_used: f.trials_used,
    })
}
