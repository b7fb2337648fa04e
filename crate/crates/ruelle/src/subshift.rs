//! One-sided subshifts of finite type: transition structure, admissible
//! words, and the ultrametric `D_theta`.

use crate::error::{Error, Result};

/// A finite word over the alphabet `{0, .., k0-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The left shift: drops the first symbol.
    pub fn shifted(&self) -> Word {
        Word(self.0[1..].to_vec())
    }

    /// Prepends `symbol` in front of the word.
    pub fn prepended(&self, symbol: u8) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(symbol);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// A cylinder set, identified by its defining prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cylinder {
    pub word: Word,
}

impl Cylinder {
    pub fn new(word: Word) -> Self {
        Cylinder { word }
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }

    /// `D_theta`-diameter of the cylinder.
    pub fn diam_theta(&self, theta: f64) -> f64 {
        theta.powi(self.depth() as i32)
    }
}

/// A one-sided subshift of finite type together with the metric parameter
/// `theta` of `D_theta`.
#[derive(Debug, Clone)]
pub struct SubshiftModel {
    k0: usize,
    /// Row-major 0/1 transition matrix: `a[i*k0+j] = 1` iff the transition
    /// `i -> j` is allowed.
    transitions: Vec<u8>,
    theta: f64,
}

impl SubshiftModel {
    pub fn new(k0: usize, rows: &[Vec<u8>], theta: f64) -> Result<Self> {
        if k0 < 2 {
            return Err(Error::model(format!("alphabet size must be >= 2, got {k0}")));
        }
        if rows.len() != k0 {
            return Err(Error::model(format!(
                "transition matrix not square: {} rows for alphabet {k0}",
                rows.len()
            )));
        }
        let mut transitions = Vec::with_capacity(k0 * k0);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k0 {
                return Err(Error::model(format!(
                    "transition matrix not square: row {i} has {} entries",
                    row.len()
                )));
            }
            for &e in row {
                if e > 1 {
                    return Err(Error::model(format!("matrix entry {e} is not 0/1")));
                }
                transitions.push(e);
            }
        }
        for i in 0..k0 {
            if (0..k0).all(|j| transitions[i * k0 + j] == 0) {
                return Err(Error::model(format!("row {i} of the transition matrix is zero")));
            }
            if (0..k0).all(|j| transitions[j * k0 + i] == 0) {
                return Err(Error::model(format!("column {i} of the transition matrix is zero")));
            }
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::model(format!("theta must lie in (0,1), got {theta}")));
        }
        Ok(SubshiftModel { k0, transitions, theta })
    }

    /// The full shift on `k0` symbols.
    pub fn full_shift(k0: usize, theta: f64) -> Result<Self> {
        let rows = vec![vec![1u8; k0]; k0];
        SubshiftModel::new(k0, &rows, theta)
    }

    /// The golden-mean shift: `11` forbidden.
    pub fn golden_mean(theta: f64) -> Result<Self> {
        SubshiftModel::new(2, &[vec![1, 1], vec![1, 0]], theta)
    }

    pub fn alphabet_size(&self) -> usize {
        self.k0
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn allowed(&self, from: u8, to: u8) -> bool {
        self.transitions[from as usize * self.k0 + to as usize] == 1
    }

    pub fn transition_row(&self, from: u8) -> impl Iterator<Item = u8> + '_ {
        let k0 = self.k0;
        let base = from as usize * k0;
        (0..k0).filter_map(move |j| (self.transitions[base + j] == 1).then_some(j as u8))
    }

    /// Symbols `j` that may be prepended in front of `first` (i.e. `A[j, first] = 1`).
    pub fn prepend_symbols(&self, first: u8) -> impl Iterator<Item = u8> + '_ {
        let k0 = self.k0;
        (0..k0).filter_map(move |j| (self.transitions[j * k0 + first as usize] == 1).then_some(j as u8))
    }

    /// True iff all consecutive transitions of `w` are allowed by the matrix.
    pub fn is_admissible(&self, w: &Word) -> Result<bool> {
        for &s in w.symbols() {
            if s as usize >= self.k0 {
                return Err(Error::input(format!(
                    "symbol {s} out of range for alphabet of size {}",
                    self.k0
                )));
            }
        }
        Ok(w
            .symbols()
            .windows(2)
            .all(|p| self.allowed(p[0], p[1])))
    }

    /// All admissible words of length `n`, in lexicographic order.
    pub fn enumerate_words(&self, n: usize) -> Result<Vec<Word>> {
        if n == 0 {
            return Err(Error::input("word length must be >= 1".to_string()));
        }
        let mut out = Vec::new();
        let mut stack = vec![0u8; n];
        self.enumerate_rec(&mut stack, 0, n, &mut out);
        Ok(out)
    }

    fn enumerate_rec(&self, buf: &mut Vec<u8>, pos: usize, n: usize, out: &mut Vec<Word>) {
        if pos == n {
            out.push(Word(buf[..n].to_vec()));
            return;
        }
        for s in 0..self.k0 as u8 {
            if pos > 0 && !self.allowed(buf[pos - 1], s) {
                continue;
            }
            buf[pos] = s;
            self.enumerate_rec(buf, pos + 1, n, out);
        }
    }

    /// Number of admissible words of length `n`, by integer matrix powers.
    pub fn word_count(&self, n: usize) -> Result<u128> {
        if n == 0 {
            return Err(Error::input("word length must be >= 1".to_string()));
        }
        let p = self.matrix_power(n - 1);
        Ok(p.iter().sum())
    }

    /// Integer power `A^n` of the transition matrix (row-major).
    pub fn matrix_power(&self, n: usize) -> Vec<u128> {
        let k = self.k0;
        let mut acc: Vec<u128> = (0..k * k).map(|i| u128::from(i / k == i % k)).collect();
        let base: Vec<u128> = self.transitions.iter().map(|&e| e as u128).collect();
        for _ in 0..n {
            acc = mat_mul(&acc, &base, k);
        }
        acc
    }

    /// Trace of `A^n`, the number of `n`-periodic points.
    pub fn periodic_point_count(&self, n: usize) -> u128 {
        let p = self.matrix_power(n);
        (0..self.k0).map(|i| p[i * self.k0 + i]).sum()
    }

    /// The smallest `M0 <= k0^2` with `A^{M0} > 0`, or an error when the
    /// matrix is not primitive (the mixing assumptions fail).
    pub fn check_aperiodic(&self) -> Result<usize> {
        let k = self.k0;
        let mut p: Vec<u128> = self.transitions.iter().map(|&e| e as u128).collect();
        let base = p.clone();
        for m in 1..=k * k {
            if p.iter().all(|&e| e > 0) {
                return Ok(m);
            }
            p = mat_mul(&p, &base, k);
            // Saturate to keep the entries small; positivity is all we need.
            for e in p.iter_mut() {
                *e = (*e).min(1);
            }
        }
        Err(Error::model(format!(
            "transition matrix is not primitive: no positive power up to {}",
            k * k
        )))
    }

    /// The metric `D_theta` on words, truncated to the common depth:
    /// 0 when equal, 1 when the first symbols differ, otherwise
    /// `theta^N` for the longest common prefix length `N`.
    pub fn d_theta(&self, u: &Word, v: &Word) -> f64 {
        let n = u.len().min(v.len());
        if u.symbols()[..n] == v.symbols()[..n] {
            return 0.0;
        }
        let cpl = common_prefix_len(u, v);
        self.theta.powi(cpl as i32)
    }
}

/// Length of the longest shared prefix of `u` and `v`.
pub fn common_prefix_len(u: &Word, v: &Word) -> usize {
    u.symbols()
        .iter()
        .zip(v.symbols())
        .take_while(|(a, b)| a == b)
        .count()
}

fn mat_mul(a: &[u128], b: &[u128], k: usize) -> Vec<u128> {
    let mut out = vec![0u128; k * k];
    for i in 0..k {
        for l in 0..k {
            let ail = a[i * k + l];
            if ail == 0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += ail * b[l * k + j];
            }
        }
    }
    out
}
