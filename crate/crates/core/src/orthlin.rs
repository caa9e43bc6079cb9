//! Small dense linear algebra on n×n matrices: (special) SVD, projections onto
//! O(n) and SO(n), convex-hull tests and Haar sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Orthogonal group or its rotation subgroup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    O,
    SO,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::O => "O",
            Group::SO => "SO",
        })
    }
}

impl std::str::FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" | "o" => Ok(Group::O),
            "SO" | "so" => Ok(Group::SO),
            _ => invalid(format!("unknown group '{s}' (expected O or SO)")),
        }
    }
}

/// `X = U diag(sigma) Vᵀ` with `sigma` sorted descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// SVD with the sign of `det(UVᵀ)` moved into the last singular value, so that
/// `U Ṽᵀ` is a rotation.
#[derive(Clone, Debug)]
pub struct SpecialSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub sigma_tilde: DVector<f64>,
    pub v_tilde: DMatrix<f64>,
}

fn check_square_finite(x: &DMatrix<f64>) -> Result<()> {
    if !x.is_square() {
        return invalid(format!("expected square matrix, got {}x{}", x.nrows(), x.ncols()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    Ok(())
}

pub fn svd(x: &DMatrix<f64>) -> Result<Svd> {
    check_square_finite(x)?;
    let n = x.nrows();
    let dec = x.clone().svd(true, true);
    let u0 = dec.u.expect("u requested");
    let vt0 = dec.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let sigma = DVector::from_iterator(n, order.iter().map(|&k| dec.singular_values[k]));
    let u = DMatrix::from_fn(n, n, |r, c| u0[(r, order[c])]);
    let v = DMatrix::from_fn(n, n, |r, c| vt0[(order[c], r)]);
    Ok(Svd { u, sigma, v })
}

pub fn special_svd(x: &DMatrix<f64>) -> Result<SpecialSvd> {
    let Svd { u, sigma, v } = svd(x)?;
    let n = x.nrows();
    let d = (&u * v.transpose()).determinant().signum();
    let mut sigma_tilde = sigma.clone();
    let mut v_tilde = v;
    if d < 0.0 {
        sigma_tilde[n - 1] = -sigma_tilde[n - 1];
        v_tilde.column_mut(n - 1).neg_mut();
    }
    Ok(SpecialSvd {
        u,
        sigma,
        sigma_tilde,
        v_tilde,
    })
}

/// The maximizer of `⟨X, R⟩` over `O(n)`: `U Vᵀ`.
pub fn nearest_orthogonal(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = svd(x)?;
    Ok(&s.u * s.v.transpose())
}

/// The maximizer of `⟨X, R⟩` over `SO(n)`: `U Ṽᵀ`.
///
/// When `σ_n` is degenerate and `det(UVᵀ) = -1` the maximizer is not unique; the one
/// returned is whichever the SVD routine produces.
pub fn nearest_rotation(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = special_svd(x)?;
    Ok(&s.u * s.v_tilde.transpose())
}

pub fn project_to_group(x: &DMatrix<f64>, group: Group) -> Result<DMatrix<f64>> {
    match group {
        Group::O => nearest_orthogonal(x),
        Group::SO => nearest_rotation(x),
    }
}

/// Operator-norm test `σ₁(X) ≤ 1 + tol`.
pub fn in_conv_o(x: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let s = svd(x)?;
    Ok(s.sigma[0] <= 1.0 + tol)
}

/// Half-spaces `a·σ̃ ≤ b` cutting out the polytope of special singular values of
/// `conv SO(n)`: one per odd subset `I` (`a = -1` on `I`, `+1` elsewhere,
/// `b = n - 2`), plus the box `|σ̃_i| ≤ 1`, which the subset inequalities only
/// imply for odd `n`.
fn conv_so_halfspaces(n: usize) -> Vec<(Vec<f64>, f64)> {
    let mut hs: Vec<(Vec<f64>, f64)> = (0u32..1 << n)
        .filter(|mask| mask.count_ones() % 2 == 1)
        .map(|mask| {
            let a = (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
            (a, n as f64 - 2.0)
        })
        .collect();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut a = vec![0.0; n];
            a[i] = sign;
            hs.push((a, 1.0));
        }
    }
    hs
}

fn max_violation(s: &[f64], halfspaces: &[(Vec<f64>, f64)]) -> f64 {
    halfspaces
        .iter()
        .map(|(a, b)| a.iter().zip(s).map(|(ai, si)| ai * si).sum::<f64>() - b)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Tests the special-singular-value inequalities of `conv SO(n)`.
pub fn in_conv_so(x: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let n = x.nrows();
    let s = special_svd(x)?;
    Ok(max_violation(s.sigma_tilde.as_slice(), &conv_so_halfspaces(n)) <= tol)
}

const DYKSTRA_MAX_SWEEPS: usize = 10_000;
const DYKSTRA_STEP_TOL: f64 = 1e-10;

/// Frobenius projection onto `conv SO(n)`.
///
/// The special singular values are projected onto their polytope by Dykstra's
/// alternating projection over the half-spaces; singular vectors are kept.
pub fn project_conv_so(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let s = special_svd(x)?;
    let hs = conv_so_halfspaces(n);
    if max_violation(s.sigma_tilde.as_slice(), &hs) <= 0.0 {
        return Ok(x.clone());
    }
    let mut p = s.sigma_tilde.as_slice().to_vec();
    let mut incr = vec![vec![0.0; n]; hs.len()];
    let mut y = vec![0.0; n];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < DYKSTRA_MAX_SWEEPS {
        sweeps += 1;
        let start = p.clone();
        for ((a, b), q) in hs.iter().zip(incr.iter_mut()) {
            for k in 0..n {
                y[k] = p[k] + q[k];
            }
            let viol = a.iter().zip(&y).map(|(ai, yi)| ai * yi).sum::<f64>() - b;
            let shrink = if viol > 0.0 { viol / a.iter().map(|v| v * v).sum::<f64>() } else { 0.0 };
            for k in 0..n {
                p[k] = y[k] - shrink * a[k];
                q[k] = y[k] - p[k];
            }
        }
        let moved = start.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if moved < DYKSTRA_STEP_TOL {
            converged = true;
            break;
        }
    }
    let viol = max_violation(&p, &hs);
    if !converged || viol > 1e-9 {
        return Err(Error::NonConvergence {
            what: "conv SO projection",
            iterations: sweeps,
            residual: viol.max(0.0),
        });
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(p));
    Ok(&s.u * d * s.v_tilde.transpose())
}

/// Haar-distributed element of `O(n)`: QR of a Gaussian matrix with the signs of
/// `diag(R)` folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Haar-distributed element of `SO(n)`: as [`haar_orthogonal`], then flip the last
/// column if the determinant is negative.
pub fn haar_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut q = haar_orthogonal(n, rng);
    if q.determinant() < 0.0 {
        q.column_mut(n - 1).neg_mut();
    }
    q
}

pub fn haar_element<R: Rng + ?Sized>(n: usize, group: Group, rng: &mut R) -> DMatrix<f64> {
    match group {
        Group::O => haar_orthogonal(n, rng),
        Group::SO => haar_rotation(n, rng),
    }
}

/// `‖RᵀR − I‖_max ≤ tol`.
pub fn is_orthogonal(r: &DMatrix<f64>, tol: f64) -> bool {
    if !r.is_square() {
        return false;
    }
    let n = r.nrows();
    let e = r.transpose() * r - DMatrix::<f64>::identity(n, n);
    e.amax() <= tol
}

/// Frobenius inner product `tr(AᵀB)`.
pub fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}
