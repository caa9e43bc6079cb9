//! The free-fermion operator `F(C) = Σ_ij C_ij P_ij`, its spectrum and its top
//! eigenvectors (Gaussian states) for orthogonal `C`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::orthlin::{is_orthogonal, svd};
use crate::pauli::{p_ij, PauliSum};
use crate::sparse::SparseSymmetricOperator;

/// Top eigenvector of `F(R)` for orthogonal `R`.
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub n: usize,
    pub amplitudes: DVector<f64>,
    /// Expectation of `Z^{⊗n}`, equal to `det R`.
    pub parity: i8,
}

/// One eigenvalue of `F(C)`, labeled by occupation bits `b_1..b_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeLevel {
    pub bits: Vec<bool>,
    pub energy: f64,
}

pub fn build_f(c: &DMatrix<f64>) -> Result<SparseSymmetricOperator> {
    if !c.is_square() || c.nrows() == 0 {
        return invalid("coefficient matrix must be square and nonempty");
    }
    let n = c.nrows();
    let mut sum = PauliSum::new(n);
    for i in 0..n {
        for j in 0..n {
            sum.push(&p_ij(i + 1, j + 1, n)?, c[(i, j)])?;
        }
    }
    Ok(sum.to_sparse())
}

/// `E_b = Σ_k (-1)^{b_k} σ_k(C)` for every bit string, `b_1` first.
pub fn spectrum_free(c: &DMatrix<f64>) -> Result<Vec<FreeLevel>> {
    let sigma = svd(c)?.sigma;
    let n = sigma.len();
    Ok((0..1usize << n)
        .map(|code| {
            let bits: Vec<bool> = (0..n).map(|k| code >> (n - 1 - k) & 1 == 1).collect();
            let energy = bits
                .iter()
                .zip(sigma.iter())
                .map(|(&b, s)| if b { -s } else { *s })
                .sum();
            FreeLevel { bits, energy }
        })
        .collect())
}

fn parity_expectation(amps: &DVector<f64>) -> f64 {
    amps.iter()
        .enumerate()
        .map(|(b, a)| if b.count_ones() % 2 == 0 { a * a } else { -a * a })
        .sum()
}

pub fn gaussian_state(r: &DMatrix<f64>) -> Result<GaussianState> {
    if !is_orthogonal(r, 1e-8) {
        return invalid("gaussian_state requires an orthogonal matrix");
    }
    let n = r.nrows();
    let f = build_f(r)?.to_dense();
    let eig = f.symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let mut v: DVector<f64> = eig.eigenvectors.column(top).into_owned();
    let lead = v.iamax();
    if v[lead] < 0.0 {
        v.neg_mut();
    }
    v /= v.norm();
    let par = parity_expectation(&v);
    let parity = if (par - 1.0).abs() <= 1e-6 {
        1
    } else if (par + 1.0).abs() <= 1e-6 {
        -1
    } else {
        return Err(Error::Consistency(format!(
            "top eigenvector has parity expectation {par}"
        )));
    };
    Ok(GaussianState {
        n,
        amplitudes: v,
        parity,
    })
}

/// Index on `n` qubits of the even-parity state whose last `n-1` bits are `r`.
pub fn even_lift(r: usize, n: usize) -> usize {
    ((r.count_ones() as usize % 2) << (n - 1)) | r
}

/// Applies `Π₀` to an even-parity Gaussian state.
pub fn project_state_even(state: &GaussianState) -> Result<DVector<f64>> {
    if state.parity != 1 {
        return invalid("cannot project an odd-parity state onto the even subspace");
    }
    if state.n < 2 {
        return invalid("projection needs at least 2 modes");
    }
    let half = 1usize << (state.n - 1);
    let mut out = DVector::from_fn(half, |r, _| state.amplitudes[even_lift(r, state.n)]);
    out /= out.norm();
    Ok(out)
}
