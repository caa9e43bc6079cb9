//! State-vector engine: extremal eigenvectors, annealing by RK4 integration, and
//! extraction of vertex moments, edge moments and the quantum Gram matrix.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{product_state, vertex_field, Layout};
use crate::instance::{check_assignment, ProblemInstance};
use crate::rng;
use crate::sparse::SparseSymmetricOperator;

pub const LANCZOS_TOL: f64 = 1e-10;
pub const LANCZOS_MAX_ITER: usize = 20_000;
const LANCZOS_SEED: u64 = 0x1a2c_205e;
const DENSE_CUTOFF: usize = 64;
const MAX_NORM_DRIFT: f64 = 1e-6;

/// Pure state with complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn normalized(mut self) -> Self {
        let nrm = self.norm();
        for a in &mut self.amplitudes {
            *a /= nrm;
        }
        self
    }

    /// `|⟨self|other⟩|`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
    }

    /// `‖self - other‖₂`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn energy(&self, op: &SparseSymmetricOperator) -> f64 {
        op.expectation(&self.amplitudes)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Largest eigenvalue and a corresponding eigenvector.
///
/// Lanczos with full reorthogonalization, restarted from the current Ritz vector when
/// the Krylov basis is full. The start vector is random (fixed seed). Converged when
/// `‖Hψ − λψ‖ ≤ tol · ‖H‖_∞`. Degenerate top eigenspaces are not resolved: any unit
/// vector in them is returned.
pub fn max_eigenpair(
    op: &SparseSymmetricOperator,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, StateVector)> {
    max_eigenpair_stats(op, tol, max_iter).map(|e| (e.value, e.state))
}

/// Result of [`max_eigenpair_stats`].
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub state: StateVector,
    /// Operator applications performed (0 for the dense path).
    pub iterations: usize,
    /// `‖Hψ − λψ‖ / ‖H‖_∞`.
    pub residual: f64,
}

/// [`max_eigenpair`] with iteration count and final residual.
pub fn max_eigenpair_stats(op: &SparseSymmetricOperator, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    let dim = op.dim();
    if dim == 0 {
        return invalid("empty operator");
    }
    if dim <= DENSE_CUTOFF {
        let eig = op.to_dense().symmetric_eigen();
        let k = eig.eigenvalues.imax();
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        return Ok(Eigenpair {
            value: eig.eigenvalues[k],
            state: StateVector::from_real(&sign_fixed(v)),
            iterations: 0,
            residual: 0.0,
        });
    }
    let scale = op.norm_inf().max(f64::MIN_POSITIVE);
    let kmax = dim.min(200).min((1usize << 27) / dim).max(20);

    let mut r = rng::from_seed(LANCZOS_SEED);
    let mut start: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let s = dot(&start, &start).sqrt();
    start.iter_mut().for_each(|x| *x /= s);

    let mut iterations = 0;
    let mut best_res = f64::INFINITY;
    let mut w = vec![0.0; dim];
    while iterations < max_iter {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let k = basis.len() - 1;
            op.apply(&basis[k], &mut w);
            iterations += 1;
            let a = dot(&basis[k], &w);
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            let bnorm = dot(&w, &w).sqrt();
            let exhausted = bnorm <= 1e-13 * scale;
            let full = basis.len() >= kmax || iterations >= max_iter;
            if exhausted || full || basis.len() % 5 == 0 {
                let y = top_ritz(&alpha, &beta);
                let est = bnorm * y[y.len() - 1].abs();
                if exhausted || est <= 0.5 * tol * scale || full {
                    let mut x = vec![0.0; dim];
                    for (b, c) in basis.iter().zip(y.iter()) {
                        axpy(*c, b, &mut x);
                    }
                    let xn = dot(&x, &x).sqrt();
                    x.iter_mut().for_each(|v| *v /= xn);
                    op.apply(&x, &mut w);
                    let lambda = dot(&x, &w);
                    axpy(-lambda, &x, &mut w);
                    let res = dot(&w, &w).sqrt();
                    best_res = best_res.min(res / scale);
                    if res <= tol * scale {
                        return Ok(Eigenpair {
                            value: lambda,
                            state: StateVector::from_real(&sign_fixed(x)),
                            iterations,
                            residual: res / scale,
                        });
                    }
                    start = x;
                    break;
                }
            }
            beta.push(bnorm);
            basis.push(w.iter().map(|v| v / bnorm).collect());
        }
    }
    Err(Error::NonConvergence {
        what: "Lanczos",
        iterations,
        residual: best_res,
    })
}

/// Eigenvector of the largest eigenvalue of the tridiagonal Lanczos matrix.
fn top_ritz(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let i = eig.eigenvalues.imax();
    eig.eigenvectors.column(i).iter().copied().collect()
}

/// Flips the global sign so the largest-magnitude amplitude is positive.
fn sign_fixed(mut v: Vec<f64>) -> Vec<f64> {
    let lead = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1.abs() { (i, *x) } else { acc })
        .0;
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Linear interpolation `H(t) = (1 − t/T) H_i + (t/T) H_f` over `steps` RK4 steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealSchedule {
    pub total_time: f64,
    pub steps: usize,
}

impl AnnealSchedule {
    /// `steps = max(200, ⌈40 · T · max(‖H_i‖_∞, ‖H_f‖_∞)⌉)`.
    pub fn auto(total_time: f64, h_i: &SparseSymmetricOperator, h_f: &SparseSymmetricOperator) -> Self {
        let scale = h_i.norm_inf().max(h_f.norm_inf());
        let steps = ((40.0 * total_time * scale).ceil() as usize).max(200);
        Self { total_time, steps }
    }
}

/// Integrates `i dψ/dt = H(t) ψ` from `psi0` with fixed-step RK4, renormalizing
/// after each step. A step whose pre-renormalization norm drifts by more than 1e-6
/// is rejected.
pub fn evolve(
    h_i: &SparseSymmetricOperator,
    h_f: &SparseSymmetricOperator,
    schedule: &AnnealSchedule,
    psi0: &StateVector,
) -> Result<StateVector> {
    let dim = psi0.dim();
    if h_i.dim() != dim || h_f.dim() != dim {
        return invalid(format!(
            "dimension mismatch: state {dim}, H_i {}, H_f {}",
            h_i.dim(),
            h_f.dim()
        ));
    }
    if !(schedule.total_time > 0.0) || schedule.steps == 0 {
        return invalid("schedule needs positive time and steps");
    }
    if (psi0.norm() - 1.0).abs() > 1e-9 {
        return invalid("initial state is not normalized");
    }
    let t_total = schedule.total_time;
    let h = t_total / schedule.steps as f64;
    let zero = Complex64::new(0.0, 0.0);
    let mut psi = psi0.amplitudes.clone();
    let mut tmp_i = vec![zero; dim];
    let mut tmp_f = vec![zero; dim];
    let mut stage = vec![zero; dim];
    let mut ks: [Vec<Complex64>; 4] = std::array::from_fn(|_| vec![zero; dim]);
    let minus_i = Complex64::new(0.0, -1.0);

    // k = -i H(t) x
    let mut deriv = |t: f64, x: &[Complex64], out: &mut [Complex64]| {
        let s = t / t_total;
        h_i.apply_complex(x, &mut tmp_i);
        h_f.apply_complex(x, &mut tmp_f);
        for ((o, a), b) in out.iter_mut().zip(&tmp_i).zip(&tmp_f) {
            *o = minus_i * (a * (1.0 - s) + b * s);
        }
    };

    for step in 0..schedule.steps {
        let t = step as f64 * h;
        let (k1, rest) = ks.split_at_mut(1);
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, k4) = rest.split_at_mut(1);
        let (k1, k2, k3, k4) = (&mut k1[0], &mut k2[0], &mut k3[0], &mut k4[0]);
        deriv(t, &psi, k1);
        for ((s, p), k) in stage.iter_mut().zip(&psi).zip(k1.iter()) {
            *s = p + k * (0.5 * h);
        }
        deriv(t + 0.5 * h, &stage, k2);
        for ((s, p), k) in stage.iter_mut().zip(&psi).zip(k2.iter()) {
            *s = p + k * (0.5 * h);
        }
        deriv(t + 0.5 * h, &stage, k3);
        for ((s, p), k) in stage.iter_mut().zip(&psi).zip(k3.iter()) {
            *s = p + k * h;
        }
        deriv(t + h, &stage, k4);
        for (idx, p) in psi.iter_mut().enumerate() {
            *p += (k1[idx] + (k2[idx] + k3[idx]) * 2.0 + k4[idx]) * (h / 6.0);
        }
        let nrm = norm(&psi);
        if (nrm - 1.0).abs() > MAX_NORM_DRIFT {
            return Err(Error::StepRejected(format!(
                "norm drift {:.3e} at step {step}; use more steps",
                (nrm - 1.0).abs()
            )));
        }
        psi.iter_mut().for_each(|p| *p /= nrm);
    }
    Ok(StateVector::new(psi))
}

/// Product of Gaussian states of `rs` and its parent Hamiltonian `Σ_v F(R_v)`
/// (projected to even parity for SO).
pub fn initial_product_state(
    inst: &ProblemInstance,
    rs: &[DMatrix<f64>],
) -> Result<(StateVector, SparseSymmetricOperator)> {
    check_assignment(inst, rs)?;
    let layout = Layout::for_instance(inst)?;
    let psi = product_state(&layout, rs)?;
    let h_i = vertex_field(&layout, rs)?;
    Ok((StateVector::from_real(&psi), h_i))
}

fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > 1e-8 {
        return Err(Error::Consistency(format!(
            "expectation has imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `[Q_v]_ij = ⟨ψ|P_ij^(v)|ψ⟩`.
pub fn vertex_moments(psi: &StateVector, layout: &Layout, v: usize) -> Result<DMatrix<f64>> {
    if v >= layout.m || psi.dim() != layout.total_dim() {
        return invalid("vertex index or state dimension does not match the layout");
    }
    let n = layout.n;
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] = real_part(layout.vertex_mask(v, i, j).expectation(&psi.amplitudes))?;
        }
    }
    Ok(q)
}

/// `[T_uv]_ij = (1/n) ⟨ψ|Γ_ij^(u,v)|ψ⟩`.
pub fn edge_moments(psi: &StateVector, layout: &Layout, u: usize, v: usize) -> Result<DMatrix<f64>> {
    if u == v || u >= layout.m || v >= layout.m || psi.dim() != layout.total_dim() {
        return invalid("edge indices or state dimension do not match the layout");
    }
    let n = layout.n;
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += layout.pair_mask(u, i, v, j, k).expectation(&psi.amplitudes);
            }
            t[(i, j)] = real_part(acc)? / n as f64;
        }
    }
    Ok(t)
}

/// Moments of a relaxed solution.
#[derive(Clone, Debug)]
pub struct ExpectationReport {
    pub n: usize,
    pub vertex_moments: Vec<DMatrix<f64>>,
    /// `T_uv` for every pair `u < v`.
    pub edge_moments: BTreeMap<(usize, usize), DMatrix<f64>>,
    /// `mn × mn`, identity diagonal blocks, `T_uv` off the diagonal.
    pub gram: DMatrix<f64>,
    /// `⟨ψ|H|ψ⟩` for the unregularized Hamiltonian.
    pub energy: f64,
}

impl ExpectationReport {
    pub fn m(&self) -> usize {
        self.vertex_moments.len()
    }

    /// Gram block `(u, v)`.
    pub fn gram_block(&self, u: usize, v: usize) -> DMatrix<f64> {
        let n = self.n;
        self.gram.view((u * n, v * n), (n, n)).into_owned()
    }
}

pub fn gram_matrix(psi: &StateVector, inst: &ProblemInstance) -> Result<ExpectationReport> {
    let layout = Layout::for_instance(inst)?;
    let (m, n) = (inst.m(), inst.n);
    let vertex = (0..m)
        .map(|v| vertex_moments(psi, &layout, v))
        .collect::<Result<Vec<_>>>()?;
    let mut edges = BTreeMap::new();
    let mut gram = DMatrix::identity(m * n, m * n);
    for u in 0..m {
        for v in u + 1..m {
            let t = edge_moments(psi, &layout, u, v)?;
            gram.view_mut((u * n, v * n), (n, n)).copy_from(&t);
            gram.view_mut((v * n, u * n), (n, n)).copy_from(&t.transpose());
            edges.insert((u, v), t);
        }
    }
    let energy = inst
        .graph
        .edges
        .iter()
        .zip(&inst.blocks)
        .map(|(e, c)| n as f64 * c.dot(&edges[e]))
        .sum();
    Ok(ExpectationReport {
        n,
        vertex_moments: vertex,
        edge_moments: edges,
        gram,
        energy,
    })
}

const STATE_HEADER: &str = "# lncg state v1";

/// Text dump: a version line, optional `#` metadata lines, `dim N`, then one
/// `re im` pair per line with 17 significant digits.
pub fn write_state<W: Write>(psi: &StateVector, meta: &[String], mut w: W) -> Result<()> {
    writeln!(w, "{STATE_HEADER}")?;
    for line in meta {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "dim {}", psi.dim())?;
    for a in &psi.amplitudes {
        writeln!(w, "{:.16e} {:.16e}", a.re, a.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_state(text: &str) -> Result<StateVector> {
    let mut lines = text.lines();
    if lines.next() != Some(STATE_HEADER) {
        return Err(Error::Parse(format!("missing '{STATE_HEADER}' header")));
    }
    let mut lines = lines.skip_while(|l| l.starts_with('#'));
    let dim: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("dim "))
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse("missing 'dim' line".into()))?;
    let amps = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut f = l.split_whitespace().map(|x| x.parse::<f64>());
            match (f.next(), f.next(), f.next()) {
                (Some(Ok(re)), Some(Ok(im)), None) => Ok(Complex64::new(re, im)),
                _ => Err(Error::Parse(format!("bad amplitude line '{l}'"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if amps.len() != dim {
        return Err(Error::Parse(format!("expected {dim} amplitudes, found {}", amps.len())));
    }
    Ok(StateVector::new(amps))
}

pub fn save_state(psi: &StateVector, meta: &[String], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_state(psi, meta, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<StateVector> {
    read_state(&std::fs::read_to_string(path)?)
}

/// Random unit vector with i.i.d. complex Gaussian amplitudes.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let amps = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::new(amps).normalized()
}

/// Dense real vector view, for callers that know the state is real.
pub fn real_vector(psi: &StateVector) -> DVector<f64> {
    DVector::from_iterator(psi.dim(), psi.amplitudes.iter().map(|a| a.re))
}
