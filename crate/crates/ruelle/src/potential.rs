//! Locally constant potentials and roof functions: evaluation, Birkhoff
//! sums, depth truncation and exact `theta`-seminorms.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::basis::CylinderBasis;
use crate::error::{Error, Result};
use crate::subshift::{SubshiftModel, Word};

/// A function depending on the first `depth` coordinates, stored as one
/// value per admissible depth-`depth` word in lexicographic order.
#[derive(Debug, Clone)]
pub struct CylinderFunction<T> {
    pub depth: usize,
    pub values: Vec<T>,
}

impl<T: Copy> CylinderFunction<T> {
    pub fn new(depth: usize, values: Vec<T>) -> Self {
        CylinderFunction { depth, values }
    }

    pub fn constant(basis: &CylinderBasis, value: T) -> Self {
        CylinderFunction {
            depth: basis.depth(),
            values: vec![value; basis.len()],
        }
    }
}

pub type RealCylinderFunction = CylinderFunction<f64>;
pub type ComplexCylinderFunction = CylinderFunction<Complex64>;

/// Specification of a potential or roof function: an explicit table over
/// depth-`t` words, or the genuinely-Hölder series
/// `f(x) = base + sum_k weights[x_k] * ratio^k`.
#[derive(Debug, Clone)]
pub enum PotentialSpec {
    Table {
        depth: usize,
        values: Vec<f64>,
        index: HashMap<Vec<u8>, usize>,
    },
    Series {
        base: f64,
        weights: Vec<f64>,
        ratio: f64,
    },
}

impl PotentialSpec {
    /// Builds a table potential; `values` must list one value per admissible
    /// depth-`depth` word in lexicographic order.
    pub fn table(model: &SubshiftModel, depth: usize, values: Vec<f64>) -> Result<Self> {
        let words = model.enumerate_words(depth)?;
        if words.len() != values.len() {
            return Err(Error::input(format!(
                "table has {} values but there are {} admissible depth-{} words",
                values.len(),
                words.len(),
                depth
            )));
        }
        let index = words
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w.0, i))
            .collect();
        Ok(PotentialSpec::Table { depth, values, index })
    }

    pub fn series(model: &SubshiftModel, base: f64, weights: Vec<f64>, ratio: f64) -> Result<Self> {
        if weights.len() != model.alphabet_size() {
            return Err(Error::input(format!(
                "series needs one weight per symbol ({}), got {}",
                model.alphabet_size(),
                weights.len()
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::input(format!("series ratio must lie in (0,1), got {ratio}")));
        }
        Ok(PotentialSpec::Series { base, weights, ratio })
    }

    pub fn zero(model: &SubshiftModel) -> Self {
        PotentialSpec::table(model, 1, vec![0.0; model.alphabet_size()])
            .expect("depth-1 zero table is always valid")
    }

    /// Depth of the stored data (1 for a series, which is evaluated by
    /// partial sums over whatever symbols are available).
    pub fn table_depth(&self) -> usize {
        match self {
            PotentialSpec::Table { depth, .. } => *depth,
            PotentialSpec::Series { .. } => 1,
        }
    }

    /// Value on a word. Tables need at least `depth` symbols; the series is
    /// the partial sum over the available symbols.
    pub fn evaluate(&self, w: &Word) -> Result<f64> {
        match self {
            PotentialSpec::Table { depth, values, index } => {
                if w.len() < *depth {
                    return Err(Error::input(format!(
                        "word of length {} is shorter than table depth {depth}",
                        w.len()
                    )));
                }
                index
                    .get(&w.symbols()[..*depth])
                    .map(|&i| values[i])
                    .ok_or_else(|| Error::input("word is not admissible for this table".to_string()))
            }
            PotentialSpec::Series { base, weights, ratio } => {
                let mut acc = *base;
                let mut r = 1.0;
                for &s in w.symbols() {
                    let ws = *weights
                        .get(s as usize)
                        .ok_or_else(|| Error::input(format!("symbol {s} out of range")))?;
                    acc += ws * r;
                    r *= ratio;
                }
                Ok(acc)
            }
        }
    }

    /// Birkhoff sum `sum_{j<m} f(sigma^j w)`.
    pub fn birkhoff_sum(&self, w: &Word, m: usize) -> Result<f64> {
        if m > 0 && w.len() < (m - 1) + self.table_depth() {
            return Err(Error::input(format!(
                "word of length {} too short for {m} shifted evaluations at depth {}",
                w.len(),
                self.table_depth()
            )));
        }
        let mut acc = 0.0;
        for j in 0..m {
            acc += self.evaluate(&Word(w.symbols()[j..].to_vec()))?;
        }
        Ok(acc)
    }

    /// Exact value on the periodic extension of `cycle` (used for orbit
    /// periods): the Birkhoff sum of the potential around the cycle.
    ///
    /// For a series the geometric tail over the repeating word is summed in
    /// closed form, so no truncation error is introduced.
    pub fn cyclic_birkhoff_sum(&self, cycle: &[u8]) -> Result<f64> {
        let n = cycle.len();
        match self {
            PotentialSpec::Table { depth, .. } => {
                let mut ext = Vec::with_capacity(n + depth - 1);
                for j in 0..n + depth - 1 {
                    ext.push(cycle[j % n]);
                }
                let w = Word(ext);
                self.birkhoff_sum(&w, n)
            }
            PotentialSpec::Series { base, weights, ratio } => {
                // sum_{j<n} [base + sum_{k>=0} weights[x_{j+k mod n}] ratio^k]
                // = n*base + (sum over one period of weighted prefix) / (1 - ratio^n)
                let mut acc = n as f64 * *base;
                let denom = 1.0 - ratio.powi(n as i32);
                for j in 0..n {
                    let mut per = 0.0;
                    let mut r = 1.0;
                    for k in 0..n {
                        per += weights[cycle[(j + k) % n] as usize] * r;
                        r *= ratio;
                    }
                    acc += per / denom;
                }
                Ok(acc)
            }
        }
    }

    /// Depth-`t` truncation. Tables are re-indexed; for a series the tail
    /// beyond position `t-1` is replaced by the midpoint of its attainable
    /// values, so the sup-error is at most half the tail amplitude.
    pub fn truncate_to_depth(&self, model: &SubshiftModel, t: usize) -> Result<RealCylinderFunction> {
        let words = model.enumerate_words(t)?;
        match self {
            PotentialSpec::Table { depth, .. } => {
                if t < *depth {
                    return Err(Error::input(format!(
                        "cannot truncate a depth-{depth} table to depth {t}"
                    )));
                }
                let values = words
                    .iter()
                    .map(|w| self.evaluate(w))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CylinderFunction::new(t, values))
            }
            PotentialSpec::Series { weights, ratio, .. } => {
                let wmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
                let wmax = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tail_mid = 0.5 * (wmin + wmax) * ratio.powi(t as i32) / (1.0 - ratio);
                let values = words
                    .iter()
                    .map(|w| self.evaluate(w).map(|v| v + tail_mid))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CylinderFunction::new(t, values))
            }
        }
    }

    /// Smallest value over the admissible depth-`t` words (after truncation
    /// for a series). Used for roof validation.
    pub fn min_on_depth(&self, model: &SubshiftModel, t: usize) -> Result<f64> {
        let t = t.max(self.table_depth());
        let cf = self.truncate_to_depth(model, t)?;
        Ok(cf.values.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Checks that `tau` is a valid roof at working depth `t` and returns its
/// minimum `tau0 > 0`.
pub fn validate_roof(model: &SubshiftModel, tau: &PotentialSpec, t: usize) -> Result<f64> {
    let tau0 = tau.min_on_depth(model, t)?;
    if tau0 <= 0.0 {
        return Err(Error::input(format!(
            "roof must be strictly positive, found minimum {tau0}"
        )));
    }
    Ok(tau0)
}

/// Exact `theta`-seminorm of a depth-`t` function: the maximum over all
/// admissible word pairs of `|h(u)-h(v)| / D_theta(u,v)`.
///
/// Exhaustive over pairs; quadratic in the basis size, so intended for the
/// desk-scale depths (<= 12 on two symbols) the library targets.
pub fn theta_seminorm(basis: &CylinderBasis, values: &[f64], theta: f64) -> f64 {
    seminorm_impl(basis, theta, |i, j| (values[i] - values[j]).abs())
}

/// Exact `theta`-seminorm of a complex-valued depth-`t` function.
pub fn theta_seminorm_complex(basis: &CylinderBasis, values: &[Complex64], theta: f64) -> f64 {
    seminorm_impl(basis, theta, |i, j| (values[i] - values[j]).norm())
}

fn seminorm_impl(basis: &CylinderBasis, theta: f64, diff: impl Fn(usize, usize) -> f64) -> f64 {
    let n = basis.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = diff(i, j);
            if d == 0.0 {
                continue;
            }
            let cpl = basis.common_prefix(i, j);
            best = best.max(d / theta.powi(cpl as i32));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn full2() -> SubshiftModel {
        SubshiftModel::full_shift(2, 0.5).unwrap()
    }

    #[test]
    fn evaluate_cases() {
        let m = full2();
        let zero = PotentialSpec::zero(&m);
        assert_eq!(zero.evaluate(&Word::new(vec![0, 1, 1])).unwrap(), 0.0);
        let roof = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(roof.evaluate(&Word::new(vec![1, 0])).unwrap(), 2.0);
        let s = PotentialSpec::series(&m, 1.0, vec![0.0, 0.5], 0.5).unwrap();
        assert_eq!(s.evaluate(&Word::new(vec![1, 1, 0])).unwrap(), 1.75);
        let tab = PotentialSpec::table(&m, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(tab.evaluate(&Word::new(vec![0])).is_err());
    }

    #[test]
    fn birkhoff_cases() {
        let m = full2();
        let zero = PotentialSpec::zero(&m);
        assert_eq!(zero.birkhoff_sum(&Word::new(vec![0; 5]), 5).unwrap(), 0.0);
        let roof = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(roof.birkhoff_sum(&Word::new(vec![0, 1, 0]), 3).unwrap(), 4.0);
        // series against the naive per-term double loop
        let s = PotentialSpec::series(&m, 0.3, vec![0.1, 0.9], 0.6).unwrap();
        let w = Word::new(vec![0, 1, 1, 0, 1, 0, 0]);
        let mut oracle = 0.0;
        for j in 0..4 {
            let mut acc = 0.3;
            let mut r = 1.0;
            for k in j..7 {
                acc += [0.1, 0.9][w.symbols()[k] as usize] * r;
                r *= 0.6;
            }
            oracle += acc;
        }
        assert!((s.birkhoff_sum(&w, 4).unwrap() - oracle).abs() < 1e-14);
        assert!(roof.birkhoff_sum(&Word::new(vec![0, 1]), 3).is_err());
    }

    #[test]
    fn birkhoff_additivity() {
        let m = full2();
        let s = PotentialSpec::series(&m, 0.2, vec![0.4, -0.3], 0.45).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let len = 12;
            let w = Word::new((0..len).map(|_| rng.gen_range(0..2) as u8).collect());
            let (a, b) = (rng.gen_range(0..4), rng.gen_range(0..4));
            let lhs = s.birkhoff_sum(&w, a + b).unwrap();
            let rhs = s.birkhoff_sum(&w, a).unwrap()
                + s.birkhoff_sum(&Word::new(w.symbols()[a..].to_vec()), b).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn truncate_cases() {
        let m = full2();
        let roof = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        let cf = roof.truncate_to_depth(&m, 3).unwrap();
        assert_eq!(cf.depth, 3);
        assert_eq!(cf.values.len(), 8);
        // value depends only on the first symbol
        assert!(cf.values[..4].iter().all(|&v| v == 1.0));
        assert!(cf.values[4..].iter().all(|&v| v == 2.0));

        let s = PotentialSpec::series(&m, 1.0, vec![0.0, 1.0], 0.5).unwrap();
        let cf = s.truncate_to_depth(&m, 2).unwrap();
        // word (1,1): 1 + 1 + 0.5 + midpoint (0+1)/2 * 0.25/0.5 = 2.75
        assert!((cf.values[3] - 2.75).abs() < 1e-15);

        let flat = PotentialSpec::series(&m, 0.7, vec![0.0, 0.0], 0.5).unwrap();
        for t in 1..6 {
            let cf = flat.truncate_to_depth(&m, t).unwrap();
            assert!(cf.values.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        }
    }

    #[test]
    fn truncation_error_shrinks_geometrically() {
        let m = full2();
        let s = PotentialSpec::series(&m, 1.0, vec![0.0, 1.0], 0.5).unwrap();
        let mut prev = f64::INFINITY;
        for t in 2..=10 {
            // sup over deep words of |f - f^(t)|: bounded by half tail amplitude
            let cf = s.truncate_to_depth(&m, t).unwrap();
            let shallow = m.enumerate_words(t).unwrap();
            let words = m.enumerate_words(t + 4).unwrap();
            let mut err = 0.0f64;
            for w in words.iter().step_by(3) {
                let exact = s.evaluate(w).unwrap();
                let idx = shallow
                    .binary_search_by(|u| u.symbols().cmp(&w.symbols()[..t]))
                    .unwrap();
                err = err.max((exact - cf.values[idx]).abs());
            }
            assert!(err <= 0.5f64.powi(t as i32) / 0.5 + 1e-12);
            assert!(err <= prev + 1e-15);
            prev = err;
        }
    }

    #[test]
    fn seminorm_cases() {
        let m = full2();
        let basis = CylinderBasis::new(&m, 4).unwrap();
        let c = vec![3.0; basis.len()];
        assert_eq!(theta_seminorm(&basis, &c, 0.5), 0.0);

        // indicator of the length-2 cylinder [0,1]
        let chi: Vec<f64> = basis
            .words()
            .iter()
            .map(|w| f64::from(&w.symbols()[..2] == &[0, 1]))
            .collect();
        // exact maximum theta^{-(m-1)} attained by a pair sharing an (m-1)-prefix
        let sn = theta_seminorm(&basis, &chi, 0.5);
        assert!((sn - 2.0).abs() < 1e-14);
        assert!(sn <= 4.0 + 1e-14); // Lipschitz bound 1/diam

        let depth1 = CylinderBasis::new(&m, 1).unwrap();
        assert_eq!(theta_seminorm(&depth1, &[0.0, 1.0], 0.5), 1.0);
    }

    #[test]
    fn seminorm_triangle_and_homogeneity() {
        let m = full2();
        let basis = CylinderBasis::new(&m, 5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let h1: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h2: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a + b).collect();
            let c = rng.gen_range(-3.0..3.0);
            let scaled: Vec<f64> = h1.iter().map(|a| c * a).collect();
            let (s1, s2) = (theta_seminorm(&basis, &h1, 0.5), theta_seminorm(&basis, &h2, 0.5));
            assert!(theta_seminorm(&basis, &sum, 0.5) <= s1 + s2 + 1e-12);
            assert!((theta_seminorm(&basis, &scaled, 0.5) - c.abs() * s1).abs() < 1e-12);
        }
    }

    #[test]
    fn roof_positivity() {
        let m = full2();
        let roof = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        assert!(validate_roof(&m, &roof, 4).unwrap() >= 1.0);
        let bad = PotentialSpec::table(&m, 1, vec![0.0, 2.0]).unwrap();
        assert!(validate_roof(&m, &bad, 4).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn seminorm_is_a_seminorm(
                h1 in prop::collection::vec(-2.0f64..2.0, 16),
                h2 in prop::collection::vec(-2.0f64..2.0, 16),
                c in -4.0f64..4.0,
            ) {
                let m = full2();
                let basis = CylinderBasis::new(&m, 4).unwrap();
                let sum: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a + b).collect();
                let scaled: Vec<f64> = h1.iter().map(|a| c * a).collect();
                let (s1, s2) = (theta_seminorm(&basis, &h1, 0.5), theta_seminorm(&basis, &h2, 0.5));
                prop_assert!(theta_seminorm(&basis, &sum, 0.5) <= s1 + s2 + 1e-10);
                prop_assert!((theta_seminorm(&basis, &scaled, 0.5) - c.abs() * s1).abs() < 1e-10);
            }

            #[test]
            fn birkhoff_sums_are_additive(
                bits in prop::collection::vec(0u8..2, 14),
                a in 0usize..5,
                b in 0usize..5,
            ) {
                let m = full2();
                let s = PotentialSpec::series(&m, 0.2, vec![0.4, -0.3], 0.45).unwrap();
                let w = Word::new(bits);
                let lhs = s.birkhoff_sum(&w, a + b).unwrap();
                let rhs = s.birkhoff_sum(&w, a).unwrap()
                    + s.birkhoff_sum(&Word::new(w.symbols()[a..].to_vec()), b).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
