//! Pauli words, Jordan–Wigner Majorana operators and the parity projection.
//!
//! Site 1 is the leftmost tensor factor and the most significant bit of a basis index.
//! Indices passed to the constructors are 1-based, matching the usual physics notation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::sparse::{SparseSymmetricOperator, DROP_TOL};

/// Single-site Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Matrix product `self * Z` as `(i-power, letter)`.
    fn times_z(self) -> (u8, Pauli) {
        match self {
            Pauli::I => (0, Pauli::Z),
            Pauli::X => (3, Pauli::Y),
            Pauli::Y => (1, Pauli::X),
            Pauli::Z => (0, Pauli::I),
        }
    }

    fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MajoranaKind {
    /// `Z..Z X I..I`
    Gamma,
    /// `Z..Z Y I..I`
    GammaTilde,
}

/// `i^phase_power` times a tensor product of single-site letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    letters: Vec<Pauli>,
    phase_power: u8,
}

impl PauliWord {
    pub fn new(letters: Vec<Pauli>, phase_power: u8) -> Self {
        Self {
            letters,
            phase_power: phase_power % 4,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n], 0)
    }

    pub fn site_count(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn phase_power(&self) -> u8 {
        self.phase_power
    }

    fn count(&self, p: Pauli) -> usize {
        self.letters.iter().filter(|&&l| l == p).count()
    }

    /// Every letter is Hermitian, so the word is Hermitian iff the prefactor is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase_power % 2 == 0
    }

    /// True when the matrix realization has only real entries.
    pub fn is_real(&self) -> bool {
        (self.phase_power as usize + self.count(Pauli::Y)) % 2 == 0
    }

    /// True when the word commutes with `Z^{⊗n}`.
    pub fn commutes_with_parity(&self) -> bool {
        (self.count(Pauli::X) + self.count(Pauli::Y)) % 2 == 0
    }

    /// Bit-mask form of the word.
    pub fn masks(&self) -> PauliMask {
        let n = self.letters.len();
        assert!(n <= 64, "at most 64 sites supported");
        let mut x = 0u64;
        let mut z = 0u64;
        for (k, l) in self.letters.iter().enumerate() {
            let bit = 1u64 << (n - 1 - k);
            match l {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                }
                Pauli::Z => z |= bit,
            }
        }
        PauliMask {
            x,
            z,
            phase: ((self.phase_power as usize + self.count(Pauli::Y)) % 4) as u8,
        }
    }

    /// Dense complex matrix, used mainly as a test oracle.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.letters.len();
        let mk = self.masks();
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim as u64 {
            let (row, c) = mk.act(b);
            m[(row as usize, b as usize)] = c;
        }
        m
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &PauliWord) -> PauliWord {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        PauliWord::new(letters, self.phase_power + other.phase_power)
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase_power as usize];
        write!(f, "{prefix}")?;
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = Error;

    /// Parses strings such as `"-XZX"`, `"iY"`, `"ZZ"`.
    fn from_str(s: &str) -> Result<Self> {
        let (phase, rest) = if let Some(r) = s.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2, r)
        } else if let Some(r) = s.strip_prefix('i') {
            (1, r)
        } else {
            (0, s.strip_prefix('+').unwrap_or(s))
        };
        let letters = rest
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(Error::Parse(format!("bad Pauli letter '{c}' in '{s}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliWord::new(letters, phase))
    }
}

/// Signed-permutation form of a Pauli word:
/// `W|b⟩ = i^phase · (-1)^{popcount(b & z)} |b ⊕ x⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliMask {
    pub x: u64,
    pub z: u64,
    pub phase: u8,
}

impl PauliMask {
    /// Image of basis state `b`: `(row, coefficient)`.
    pub fn act(&self, b: u64) -> (u64, Complex64) {
        let mut p = self.phase as u32;
        if (b & self.z).count_ones() % 2 == 1 {
            p += 2;
        }
        (b ^ self.x, I_POWERS[(p % 4) as usize])
    }

    /// Real sign of the image of `b`; only valid for words with real entries.
    #[inline]
    pub fn real_sign(&self, b: u64) -> f64 {
        let p = self.phase as u32 + 2 * ((b & self.z).count_ones() % 2);
        debug_assert!(p % 2 == 0);
        if p % 4 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Places `self` at bit offset `shift` of a wider register.
    pub fn shifted(&self, shift: u32) -> PauliMask {
        PauliMask {
            x: self.x << shift,
            z: self.z << shift,
            phase: self.phase,
        }
    }

    /// Product of two words acting on disjoint bits.
    pub fn disjoint_product(&self, other: &PauliMask) -> PauliMask {
        debug_assert_eq!((self.x | self.z) & (other.x | other.z), 0);
        PauliMask {
            x: self.x | other.x,
            z: self.z | other.z,
            phase: (self.phase + other.phase) % 4,
        }
    }

    /// `⟨ψ|W|ψ⟩`.
    pub fn expectation(&self, psi: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut neg = Complex64::new(0.0, 0.0);
        for (b, a) in psi.iter().enumerate() {
            let b = b as u64;
            let t = psi[(b ^ self.x) as usize].conj() * a;
            if (b & self.z).count_ones() % 2 == 1 {
                neg += t;
            } else {
                acc += t;
            }
        }
        I_POWERS[self.phase as usize] * (acc - neg)
    }
}

const I_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

fn check_index(i: usize, n: usize) -> Result<()> {
    if i == 0 || i > n {
        return invalid(format!("index {i} outside 1..={n}"));
    }
    Ok(())
}

/// Jordan–Wigner Majorana operator on `n` sites.
pub fn majorana(kind: MajoranaKind, index: usize, n: usize) -> Result<PauliWord> {
    check_index(index, n)?;
    let mut letters = vec![Pauli::I; n];
    for l in letters.iter_mut().take(index - 1) {
        *l = Pauli::Z;
    }
    letters[index - 1] = match kind {
        MajoranaKind::Gamma => Pauli::X,
        MajoranaKind::GammaTilde => Pauli::Y,
    };
    Ok(PauliWord::new(letters, 0))
}

/// The bilinear `P_ij = i γ̃_i γ_j`, written out as a real Pauli string.
pub fn p_ij(i: usize, j: usize, n: usize) -> Result<PauliWord> {
    check_index(i, n)?;
    check_index(j, n)?;
    let mut letters = vec![Pauli::I; n];
    if i == j {
        letters[i - 1] = Pauli::Z;
        return Ok(PauliWord::new(letters, 0));
    }
    let (lo, hi, end) = if i < j {
        (i, j, Pauli::X)
    } else {
        (j, i, Pauli::Y)
    };
    letters[lo - 1] = end;
    for l in letters.iter_mut().take(hi - 1).skip(lo) {
        *l = Pauli::Z;
    }
    letters[hi - 1] = end;
    Ok(PauliWord::new(letters, 2))
}

/// `Z^{⊗n}`.
pub fn parity_word(n: usize) -> PauliWord {
    PauliWord::new(vec![Pauli::Z; n], 0)
}

/// Outcome of projecting a word onto the even-parity subspace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Projected {
    Zero,
    Word(PauliWord),
}

/// `Π₀ W Π₀ᵀ` where `Π₀` maps the even-parity half of `n` qubits onto `n-1` qubits
/// by dropping site 1.
pub fn project_even(word: &PauliWord) -> Result<Projected> {
    let n = word.site_count();
    if n < 2 {
        return invalid("project_even needs at least 2 sites");
    }
    if !word.commutes_with_parity() {
        return Ok(Projected::Zero);
    }
    let rest = &word.letters[1..];
    let (mut phase, multiply) = match word.letters[0] {
        Pauli::I | Pauli::X => (word.phase_power, false),
        Pauli::Y => (word.phase_power + 1, true),
        Pauli::Z => (word.phase_power, true),
    };
    let letters = if multiply {
        rest.iter()
            .map(|l| {
                let (p, out) = l.times_z();
                phase += p;
                out
            })
            .collect()
    } else {
        rest.to_vec()
    };
    Ok(Projected::Word(PauliWord::new(letters, phase)))
}

/// `P̃_ij = Π₀ P_ij Π₀ᵀ` on `n-1` sites.
pub fn p_tilde_ij(i: usize, j: usize, n: usize) -> Result<PauliWord> {
    match project_even(&p_ij(i, j, n)?)? {
        Projected::Word(w) => Ok(w),
        Projected::Zero => Err(Error::Consistency(format!(
            "P_{i}{j} anticommutes with parity"
        ))),
    }
}

/// Sparse realization of a word with real symmetric matrix.
pub fn to_sparse(word: &PauliWord) -> Result<SparseSymmetricOperator> {
    let mut sum = PauliSum::new(word.site_count());
    sum.push(word, 1.0)?;
    Ok(sum.to_sparse())
}

/// Real linear combination of real Hermitian Pauli words on a fixed register.
#[derive(Clone, Debug)]
pub struct PauliSum {
    qubits: usize,
    terms: Vec<(PauliMask, f64)>,
}

impl PauliSum {
    pub fn new(qubits: usize) -> Self {
        Self {
            qubits,
            terms: Vec::new(),
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn push(&mut self, word: &PauliWord, coef: f64) -> Result<()> {
        if word.site_count() != self.qubits {
            return invalid(format!(
                "word on {} sites added to {}-qubit sum",
                word.site_count(),
                self.qubits
            ));
        }
        if !word.is_hermitian() || !word.is_real() {
            return invalid(format!("word {word} is not real symmetric"));
        }
        self.terms.push((word.masks(), coef));
        Ok(())
    }

    /// Adds a term in mask form. The mask must describe a real Hermitian word.
    pub fn push_mask(&mut self, mask: PauliMask, coef: f64) {
        debug_assert!(mask.phase % 2 == 0);
        debug_assert_eq!(((mask.x & mask.z).count_ones() as u8 + mask.phase) % 2, 0);
        self.terms.push((mask, coef));
    }

    /// Assembles the sparse matrix. Terms sharing an x-mask land on the same entries
    /// and are summed.
    pub fn to_sparse(&self) -> SparseSymmetricOperator {
        let dim = 1usize << self.qubits;
        let mut groups: BTreeMap<u64, Vec<(PauliMask, f64)>> = BTreeMap::new();
        for &(mk, c) in &self.terms {
            if c != 0.0 {
                groups.entry(mk.x).or_default().push((mk, c));
            }
        }
        let rows = (0..dim as u64)
            .map(|r| {
                let mut row = Vec::with_capacity(groups.len());
                for (&x, terms) in &groups {
                    let col = r ^ x;
                    let v: f64 = terms.iter().map(|(mk, c)| c * mk.real_sign(col)).sum();
                    if v.abs() >= DROP_TOL {
                        row.push((col as usize, v));
                    }
                }
                row
            })
            .collect();
        SparseSymmetricOperator::from_rows(dim, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> PauliWord {
        s.parse().unwrap()
    }

    fn cmat(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        m.clone()
    }

    /// Dense `Π₀ A Π₀ᵀ`: keep rows/columns whose first bit completes even parity.
    fn dense_project(a: &DMatrix<Complex64>, n: usize) -> DMatrix<Complex64> {
        let half = 1usize << (n - 1);
        let lift = |r: usize| {
            let par = r.count_ones() as usize % 2;
            (par << (n - 1)) | r
        };
        DMatrix::from_fn(half, half, |r, s| a[(lift(r), lift(s))])
    }

    #[test]
    fn majorana_examples() {
        assert_eq!(majorana(MajoranaKind::Gamma, 1, 1).unwrap(), w("X"));
        assert_eq!(majorana(MajoranaKind::GammaTilde, 2, 3).unwrap(), w("ZYI"));
        assert!(majorana(MajoranaKind::Gamma, 0, 3).is_err());
        assert!(majorana(MajoranaKind::Gamma, 4, 3).is_err());
    }

    #[test]
    fn anticommutator_gamma_gamma_tilde_vanishes() {
        let g = majorana(MajoranaKind::Gamma, 1, 2).unwrap().to_dense();
        let gt = majorana(MajoranaKind::GammaTilde, 1, 2).unwrap().to_dense();
        let ac = &g * &gt + &gt * &g;
        assert!(ac.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn p_ij_examples() {
        assert_eq!(p_ij(1, 1, 1).unwrap(), w("Z"));
        assert_eq!(p_ij(1, 3, 3).unwrap(), w("-XZX"));
        assert_eq!(p_ij(3, 1, 3).unwrap(), w("-YZY"));
        assert!(p_ij(1, 4, 3).is_err());
    }

    #[test]
    fn p_ij_is_i_gamma_tilde_gamma() {
        let i = Complex64::new(0.0, 1.0);
        for n in 1..=5 {
            for a in 1..=n {
                for b in 1..=n {
                    let gt = majorana(MajoranaKind::GammaTilde, a, n).unwrap().to_dense();
                    let g = majorana(MajoranaKind::Gamma, b, n).unwrap().to_dense();
                    let expect = (gt * g) * i;
                    let p = p_ij(a, b, n).unwrap();
                    assert_eq!(cmat(&p.to_dense()), expect, "n={n} i={a} j={b}");
                    let sp = to_sparse(&p).unwrap().to_dense();
                    assert_eq!(sp.map(|v| Complex64::new(v, 0.0)), expect);
                }
            }
        }
    }

    #[test]
    fn p_ij_square_to_identity_and_commute_with_parity() {
        for n in 1..=5 {
            let par = to_sparse(&parity_word(n)).unwrap().to_dense();
            for a in 1..=n {
                for b in 1..=n {
                    let p = to_sparse(&p_ij(a, b, n).unwrap()).unwrap().to_dense();
                    assert_eq!(&p * &p, DMatrix::identity(1 << n, 1 << n));
                    assert_eq!(p.transpose(), p);
                    assert_eq!(&p * &par, &par * &p);
                }
            }
        }
    }

    #[test]
    fn clifford_relations() {
        for n in 1..=4 {
            let dim = 1 << n;
            let id = DMatrix::<Complex64>::identity(dim, dim);
            for a in 1..=n {
                for b in 1..=n {
                    let ga = majorana(MajoranaKind::Gamma, a, n).unwrap().to_dense();
                    let gb = majorana(MajoranaKind::Gamma, b, n).unwrap().to_dense();
                    let gtb = majorana(MajoranaKind::GammaTilde, b, n).unwrap().to_dense();
                    let expect = if a == b { &id * Complex64::new(2.0, 0.0) } else { &id * Complex64::new(0.0, 0.0) };
                    assert_eq!(&ga * &gb + &gb * &ga, expect);
                    assert!((&ga * &gtb + &gtb * &ga).iter().all(|c| c.norm() == 0.0));
                }
            }
        }
    }

    #[test]
    fn project_even_examples() {
        assert_eq!(project_even(&w("XI")).unwrap(), Projected::Zero);
        assert_eq!(project_even(&w("ZZ")).unwrap(), Projected::Word(w("I")));
        assert!(project_even(&w("Z")).is_err());
    }

    #[test]
    fn project_even_matches_dense_block_extraction() {
        let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        for n in 2..=4 {
            for code in 0..4usize.pow(n as u32) {
                let mut c = code;
                let ls: Vec<Pauli> = (0..n)
                    .map(|_| {
                        let l = letters[c % 4];
                        c /= 4;
                        l
                    })
                    .collect();
                let word = PauliWord::new(ls, 0);
                let oracle = dense_project(&word.to_dense(), n);
                match project_even(&word).unwrap() {
                    Projected::Zero => assert!(oracle.iter().all(|z| z.norm() == 0.0), "{word}"),
                    Projected::Word(p) => assert_eq!(p.to_dense(), oracle, "{word}"),
                }
            }
        }
    }

    #[test]
    fn projected_table_n3() {
        let table = [
            ["ZZ", "-XI", "-ZX"],
            ["XZ", "ZI", "-XX"],
            ["IX", "-YY", "IZ"],
        ];
        for i in 1..=3 {
            for j in 1..=3 {
                assert_eq!(p_tilde_ij(i, j, 3).unwrap(), w(table[i - 1][j - 1]), "({i},{j})");
            }
        }
        assert_eq!(p_tilde_ij(1, 1, 2).unwrap(), w("Z"));
        assert_eq!(p_tilde_ij(1, 2, 2).unwrap(), w("-X"));
        assert_eq!(p_tilde_ij(2, 1, 2).unwrap(), w("X"));
    }

    #[test]
    fn to_sparse_examples() {
        assert_eq!(to_sparse(&w("Z")).unwrap().to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        let xx = to_sparse(&w("XX")).unwrap().to_dense();
        assert_eq!(xx, DMatrix::from_fn(4, 4, |r, c| if r + c == 3 { 1.0 } else { 0.0 }));
        let yy = w("-YY");
        let sp = to_sparse(&yy).unwrap();
        assert_eq!(sp.to_dense().map(|v| Complex64::new(v, 0.0)), yy.to_dense());
        assert_eq!(sp.to_dense(), sp.to_dense().transpose());
        assert!(to_sparse(&w("Y")).is_err());
        assert!(to_sparse(&w("iZ")).is_err());
        for r in 0..4 {
            assert_eq!(sp.iter().filter(|e| e.0 == r).count(), 1);
        }
    }

    #[test]
    fn parity_word_examples() {
        assert_eq!(parity_word(1), w("Z"));
        assert_eq!(parity_word(2), w("ZZ"));
    }

    #[test]
    fn mask_expectation_matches_dense() {
        let psi: Vec<Complex64> = (0..8)
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let v = nalgebra::DVector::from_vec(psi.clone());
        for s in ["XYZ", "-YZY", "iZXI", "IIZ"] {
            let word = w(s);
            let dense = (v.adjoint() * word.to_dense() * &v)[(0, 0)];
            let fast = word.masks().expectation(&psi);
            assert!((dense - fast).norm() < 1e-12, "{s}");
        }
    }
}
