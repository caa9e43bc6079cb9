//! Assembly of the relaxed Hamiltonian
//! `H = Σ_E Σ_ij [C_uv]_ij Σ_k P_ik^(u) ⊗ P_jk^(v)`
//! together with the one-body regularizer `H₁ = Σ_v Σ_i P_ii^(v)`.
//!
//! Group O uses `P_ij` on `n` qubits per vertex; group SO uses the even-parity
//! projections `P̃_ij` on `n-1` qubits. Vertex 0 owns the most significant qubits.
//! Matrix indices `i, j` are 0-based here.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::free_fermion::{gaussian_state, project_state_even};
use crate::instance::{check_assignment, ProblemInstance};
use crate::orthlin::Group;
use crate::pauli::{p_ij, p_tilde_ij, PauliMask, PauliSum, PauliWord};
use crate::sparse::SparseSymmetricOperator;

pub const DEFAULT_QUBIT_BUDGET: usize = 22;
pub const DEFAULT_ZETA: f64 = 1e-6;

/// Per-vertex operator words and their placement in the global register.
#[derive(Clone, Debug)]
pub struct Layout {
    pub m: usize,
    pub n: usize,
    pub group: Group,
    /// Qubits per vertex: `n` for O, `n-1` for SO.
    pub local_qubits: usize,
    words: Vec<PauliWord>,
    masks: Vec<PauliMask>,
}

impl Layout {
    pub fn new(m: usize, n: usize, group: Group) -> Result<Self> {
        if m == 0 || n == 0 {
            return invalid("need m >= 1 and n >= 1");
        }
        if group == Group::SO && n < 2 {
            return invalid("SO(n) embedding needs n >= 2");
        }
        let mut words = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                words.push(match group {
                    Group::O => p_ij(i, j, n)?,
                    Group::SO => p_tilde_ij(i, j, n)?,
                });
            }
        }
        let local_qubits = match group {
            Group::O => n,
            Group::SO => n - 1,
        };
        if m * local_qubits > 63 {
            return invalid("register too large");
        }
        let masks = words.iter().map(|w| w.masks()).collect();
        Ok(Self {
            m,
            n,
            group,
            local_qubits,
            words,
            masks,
        })
    }

    pub fn for_instance(inst: &ProblemInstance) -> Result<Self> {
        Self::new(inst.m(), inst.n, inst.group)
    }

    pub fn local_dim(&self) -> usize {
        1 << self.local_qubits
    }

    pub fn total_qubits(&self) -> usize {
        self.m * self.local_qubits
    }

    pub fn total_dim(&self) -> usize {
        1 << self.total_qubits()
    }

    /// `P_ij` (or `P̃_ij`) on a single vertex factor.
    pub fn local_word(&self, i: usize, j: usize) -> &PauliWord {
        &self.words[i * self.n + j]
    }

    /// Bit offset of vertex `v` inside the global index.
    pub fn shift(&self, v: usize) -> u32 {
        (self.local_qubits * (self.m - 1 - v)) as u32
    }

    /// `P_ij^(v)` embedded in the global register.
    pub fn vertex_mask(&self, v: usize, i: usize, j: usize) -> PauliMask {
        self.masks[i * self.n + j].shifted(self.shift(v))
    }

    /// `P_ik^(u) ⊗ P_jk^(v)`.
    pub fn pair_mask(&self, u: usize, i: usize, v: usize, j: usize, k: usize) -> PauliMask {
        self.vertex_mask(u, i, k).disjoint_product(&self.vertex_mask(v, j, k))
    }

    pub fn check_budget(&self, budget: usize) -> Result<()> {
        if self.total_qubits() > budget {
            return Err(Error::Budget {
                needed: self.total_qubits(),
                budget,
            });
        }
        Ok(())
    }
}

/// Relaxed Hamiltonian on `m` vertex factors.
#[derive(Clone, Debug)]
pub struct LncgHamiltonian {
    pub m: usize,
    pub n: usize,
    pub group: Group,
    pub local_dim: usize,
    pub total_dim: usize,
    pub operator: SparseSymmetricOperator,
    pub zeta: f64,
}

/// `Γ_ij^(u,v) = Σ_k P_ik^(u) ⊗ P_jk^(v)` on the full `m`-vertex register.
pub fn edge_operator(
    i: usize,
    j: usize,
    u: usize,
    v: usize,
    m: usize,
    n: usize,
    group: Group,
) -> Result<SparseSymmetricOperator> {
    if u == v || u >= m || v >= m || i >= n || j >= n {
        return invalid(format!("bad edge operator indices i={i} j={j} u={u} v={v}"));
    }
    let layout = Layout::new(m, n, group)?;
    let mut sum = PauliSum::new(layout.total_qubits());
    for k in 0..n {
        sum.push_mask(layout.pair_mask(u, i, v, j, k), 1.0);
    }
    Ok(sum.to_sparse())
}

pub fn build_h(inst: &ProblemInstance) -> Result<LncgHamiltonian> {
    build_h_with_budget(inst, DEFAULT_QUBIT_BUDGET)
}

pub fn build_h_with_budget(inst: &ProblemInstance, budget: usize) -> Result<LncgHamiltonian> {
    let layout = Layout::for_instance(inst)?;
    layout.check_budget(budget)?;
    let n = inst.n;
    let mut sum = PauliSum::new(layout.total_qubits());
    for (&(u, v), c) in inst.graph.edges.iter().zip(&inst.blocks) {
        for i in 0..n {
            for j in 0..n {
                let cij = c[(i, j)];
                if cij == 0.0 {
                    continue;
                }
                for k in 0..n {
                    sum.push_mask(layout.pair_mask(u, i, v, j, k), cij);
                }
            }
        }
    }
    Ok(LncgHamiltonian {
        m: inst.m(),
        n,
        group: inst.group,
        local_dim: layout.local_dim(),
        total_dim: layout.total_dim(),
        operator: sum.to_sparse(),
        zeta: 0.0,
    })
}

/// `Σ_v Σ_i P_ii^(v)`.
pub fn build_h1(m: usize, n: usize, group: Group) -> Result<SparseSymmetricOperator> {
    let layout = Layout::new(m, n, group)?;
    let mut sum = PauliSum::new(layout.total_qubits());
    for v in 0..m {
        for i in 0..n {
            sum.push_mask(layout.vertex_mask(v, i, i), 1.0);
        }
    }
    Ok(sum.to_sparse())
}

/// `H + ζ H₁`.
pub fn regularize(h: &LncgHamiltonian, zeta: f64) -> Result<LncgHamiltonian> {
    if !(zeta >= 0.0) {
        return invalid(format!("regularizer must be nonnegative, got {zeta}"));
    }
    let operator = if zeta == 0.0 {
        h.operator.clone()
    } else {
        h.operator.add_scaled(&build_h1(h.m, h.n, h.group)?, zeta)?
    };
    Ok(LncgHamiltonian {
        operator,
        zeta: h.zeta + zeta,
        ..h.clone()
    })
}

/// `Σ_v Σ_ij [R_v]_ij P_ij^(v)`, the sum of per-vertex free-fermion operators whose
/// top eigenvector is the product of Gaussian states of `rs`.
pub fn vertex_field(layout: &Layout, rs: &[DMatrix<f64>]) -> Result<SparseSymmetricOperator> {
    if rs.len() != layout.m {
        return invalid("one matrix per vertex required");
    }
    let mut sum = PauliSum::new(layout.total_qubits());
    for (v, r) in rs.iter().enumerate() {
        for i in 0..layout.n {
            for j in 0..layout.n {
                sum.push_mask(layout.vertex_mask(v, i, j), r[(i, j)]);
            }
        }
    }
    Ok(sum.to_sparse())
}

/// Gaussian state of `r` on one vertex factor, projected to even parity for SO.
pub fn local_state(r: &DMatrix<f64>, group: Group) -> Result<Vec<f64>> {
    let g = gaussian_state(r)?;
    Ok(match group {
        Group::O => g.amplitudes.as_slice().to_vec(),
        Group::SO => project_state_even(&g)?.as_slice().to_vec(),
    })
}

/// `⊗_v |φ(R_v)⟩` with vertex 0 most significant.
pub fn product_state(layout: &Layout, rs: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    let mut psi = vec![1.0];
    for r in rs {
        let local = local_state(r, layout.group)?;
        let mut next = Vec::with_capacity(psi.len() * local.len());
        for a in &psi {
            next.extend(local.iter().map(|b| a * b));
        }
        psi = next;
    }
    Ok(psi)
}

/// Energy of the product state of `rs`; equals the objective.
pub fn feasible_energy(inst: &ProblemInstance, rs: &[DMatrix<f64>]) -> Result<f64> {
    check_assignment(inst, rs)?;
    let h = build_h(inst)?;
    let layout = Layout::for_instance(inst)?;
    let psi = product_state(&layout, rs)?;
    let mut hpsi = vec![0.0; psi.len()];
    h.operator.apply(&psi, &mut hpsi);
    Ok(psi.iter().zip(&hpsi).map(|(a, b)| a * b).sum())
}
