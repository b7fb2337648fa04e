//! Exact transfer-operator matrices on depth-`t` cylinder spaces,
//! Ruelle-Perron-Frobenius eigendata, pressure, the zero-pressure shift
//! `P_f`, Gibbs measures and potential normalization.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::CylinderBasis;
use crate::error::{Error, Result};
use crate::potential::{validate_roof, PotentialSpec, RealCylinderFunction};
use crate::subshift::{Cylinder, SubshiftModel, Word};

/// Matrix realization of `L_g` on depth-`t` cylinder functions, stored by
/// target index: `(L h)(x) = sum over preimage branches (source, weight)`.
///
/// Each branch corresponds to an admissible prepend symbol `j`; the weight is
/// `e^{g(j.x)}` evaluated on the `(t+1)`-symbol extension, which is exact
/// whenever `g` depends on at most `t+1` coordinates.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    basis: Arc<CylinderBasis>,
    branches: Vec<Vec<Branch>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Branch {
    /// Basis index of `(j.x)` truncated to depth `t`.
    pub source: usize,
    /// Prepended symbol `j`.
    pub symbol: u8,
    pub weight: f64,
}

impl TransferOperator {
    pub fn basis(&self) -> &Arc<CylinderBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn branches(&self, target: usize) -> &[Branch] {
        &self.branches[target]
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.branches
            .iter()
            .map(|bs| bs.iter().map(|b| b.weight * h[b.source]).sum())
            .collect()
    }

    /// Adjoint action on measures (row vectors).
    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (target, bs) in self.branches.iter().enumerate() {
            for b in bs {
                out[b.source] += b.weight * u[target];
            }
        }
        out
    }

    pub fn apply_power(&self, h: &[f64], n: usize) -> Vec<f64> {
        let mut v = h.to_vec();
        for _ in 0..n {
            v = self.apply(&v);
        }
        v
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (target, bs) in self.branches.iter().enumerate() {
            for b in bs {
                m[(target, b.source)] += b.weight;
            }
        }
        m
    }
}

/// Builds `L_g` on the depth-`t` basis from per-branch weights given by a
/// closure on the `(t+1)`-symbol extensions.
pub(crate) fn build_operator_with(
    basis: &Arc<CylinderBasis>,
    mut weight: impl FnMut(&Word) -> Result<f64>,
) -> Result<TransferOperator> {
    let model = basis.model();
    let mut branches = Vec::with_capacity(basis.len());
    for x in basis.words() {
        let first = x.symbols()[0];
        let mut bs = Vec::new();
        for j in model.prepend_symbols(first) {
            let ext = x.prepended(j);
            let source = basis.index_of(ext.symbols())?;
            bs.push(Branch {
                source,
                symbol: j,
                weight: weight(&ext)?,
            });
        }
        branches.push(bs);
    }
    Ok(TransferOperator {
        basis: Arc::clone(basis),
        branches,
    })
}

/// The exact action of the Ruelle operator `L_g` on depth-`t` functions.
///
/// `g` may depend on up to `t+1` coordinates (a normalized potential built at
/// depth `t` has depth `t+1`); anything deeper is an input error.
pub fn build_transfer_operator(
    model: &SubshiftModel,
    g: &PotentialSpec,
    t: usize,
) -> Result<TransferOperator> {
    if g.table_depth() > t + 1 {
        return Err(Error::input(format!(
            "potential depth {} exceeds cylinder depth {t}+1",
            g.table_depth()
        )));
    }
    let basis = CylinderBasis::new(model, t)?;
    build_operator_with(&basis, |ext| g.evaluate(ext).map(f64::exp))
}

/// RPF eigendata of a transfer operator with primitive transition structure.
#[derive(Debug, Clone)]
pub struct RpfData {
    pub lambda: f64,
    /// Positive right eigenfunction, normalized so that `sum h nu_hat = 1`.
    pub h: RealCylinderFunction,
    /// Probability left eigenvector (the eigenmeasure on depth-`t` cylinders).
    pub nu_hat: Vec<f64>,
    /// Gibbs measure of depth-`t` cylinders: `nu = h * nu_hat`, a probability.
    pub nu: Vec<f64>,
    /// `log lambda`.
    pub pressure: f64,
    pub iterations: usize,
    pub basis: Arc<CylinderBasis>,
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOpts {
    pub tol: f64,
    /// Number of consecutive iterations the relative change must stay below
    /// `tol` before the iteration counts as converged.
    pub consecutive: usize,
    pub max_iterations: usize,
    /// Dimension cap for the dense eigensolver fallback.
    pub dense_fallback_dim: usize,
}

impl Default for PowerOpts {
    fn default() -> Self {
        PowerOpts {
            tol: 1e-13,
            consecutive: 10,
            max_iterations: 200_000,
            dense_fallback_dim: 4096,
        }
    }
}

fn power_iterate(
    dim: usize,
    mut step: impl FnMut(&[f64]) -> Vec<f64>,
    opts: &PowerOpts,
) -> std::result::Result<(Vec<f64>, f64, usize), (usize, f64)> {
    let mut v = vec![1.0 / dim as f64; dim];
    let mut lambda = 1.0;
    let mut streak = 0;
    for it in 1..=opts.max_iterations {
        let w = step(&v);
        let norm = w.iter().cloned().fold(0.0f64, f64::max);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err((it, f64::NAN));
        }
        let scaled: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let change = scaled
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let rel = (norm - lambda).abs() / norm.max(1e-300);
        v = scaled;
        lambda = norm;
        if change < opts.tol && rel < opts.tol {
            streak += 1;
            if streak >= opts.consecutive {
                return Ok((v, lambda, it));
            }
        } else {
            streak = 0;
        }
    }
    Err((opts.max_iterations, lambda))
}

/// Leading eigendata `(lambda, h, nu_hat)` by two-sided power iteration, with
/// a dense eigensolver fallback for moderate dimensions.
pub fn leading_triple(op: &TransferOperator) -> Result<RpfData> {
    leading_triple_with(op, &PowerOpts::default())
}

pub fn leading_triple_with(op: &TransferOperator, opts: &PowerOpts) -> Result<RpfData> {
    let dim = op.dim();
    let right = power_iterate(dim, |v| op.apply(v), opts);
    let left = power_iterate(dim, |v| op.apply_transpose(v), opts);
    let (mut h, mut u, iterations) = match (right, left) {
        (Ok((h, _, it1)), Ok((u, _, it2))) => (h, u, it1.max(it2)),
        (r, l) => {
            if dim <= opts.dense_fallback_dim {
                let (h, u) = dense_leading_pair(op)?;
                (h, u, opts.max_iterations)
            } else {
                let (it, res) = r.err().or(l.err()).unwrap_or((opts.max_iterations, f64::NAN));
                return Err(Error::Numerical {
                    reason: "power iteration did not converge and the dimension exceeds the dense fallback cap"
                        .to_string(),
                    iterations: it,
                    residual: res,
                });
            }
        }
    };

    // Rayleigh quotient with both eigenvectors: second-order accurate.
    let mh = op.apply(&h);
    let num: f64 = u.iter().zip(&mh).map(|(a, b)| a * b).sum();
    let den: f64 = u.iter().zip(&h).map(|(a, b)| a * b).sum();
    let lambda = num / den;
    if !(lambda > 0.0) {
        return Err(Error::Numerical {
            reason: "leading eigenvalue is not positive".to_string(),
            iterations,
            residual: lambda,
        });
    }

    // Normalize: nu_hat a probability, then h so that sum h nu_hat = 1.
    let su: f64 = u.iter().sum();
    for x in u.iter_mut() {
        *x /= su;
    }
    let sh: f64 = h.iter().zip(&u).map(|(a, b)| a * b).sum();
    for x in h.iter_mut() {
        *x /= sh;
    }
    if h.iter().any(|&x| !(x > 0.0)) || u.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Numerical {
            reason: "eigenvector positivity lost".to_string(),
            iterations,
            residual: 0.0,
        });
    }

    let nu: Vec<f64> = h.iter().zip(&u).map(|(a, b)| a * b).collect();
    Ok(RpfData {
        lambda,
        h: RealCylinderFunction::new(op.basis().depth(), h),
        nu_hat: u,
        nu,
        pressure: lambda.ln(),
        iterations,
        basis: Arc::clone(op.basis()),
    })
}

fn dense_leading_pair(op: &TransferOperator) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = op.to_dense();
    let eigs = m.complex_eigenvalues();
    let lambda = eigs
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    // Inverse iteration around a slightly shifted leading eigenvalue.
    let n = m.nrows();
    let shift = lambda * (1.0 + 1e-8) + 1e-12;
    let shifted = {
        let mut s = m.clone();
        for i in 0..n {
            s[(i, i)] -= shift;
        }
        s
    };
    let lu = shifted.lu();
    let mut v = DMatrix::from_element(n, 1, 1.0);
    for _ in 0..8 {
        if let Some(sol) = lu.solve(&v) {
            let norm = sol.amax();
            v = sol / norm;
        }
    }
    let st = {
        let mut s = m.transpose();
        for i in 0..n {
            s[(i, i)] -= shift;
        }
        s
    };
    let lut = st.lu();
    let mut u = DMatrix::from_element(n, 1, 1.0);
    for _ in 0..8 {
        if let Some(sol) = lut.solve(&u) {
            let norm = sol.amax();
            u = sol / norm;
        }
    }
    let hv: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let uv: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    Ok((hv, uv))
}

/// Topological pressure of `g`: log of the leading eigenvalue on the
/// depth-`t` cylinder space. Independent of `t >= depth(g)`.
pub fn pressure(model: &SubshiftModel, g: &PotentialSpec, t: usize) -> Result<f64> {
    let op = build_transfer_operator(model, g, t)?;
    Ok(leading_triple(&op)?.pressure)
}

/// The unique `s` with `Pr(f - s tau) = 0`, by bracketed bisection.
///
/// The map `s -> Pr(f - s tau)` is strictly decreasing with slope at most
/// `-tau0 < 0`, so the root is unique and bisection cannot stall.
pub fn solve_p_f(
    model: &SubshiftModel,
    f: &PotentialSpec,
    tau: &PotentialSpec,
    t: usize,
) -> Result<f64> {
    if f.table_depth() > t + 1 || tau.table_depth() > t + 1 {
        return Err(Error::input(format!(
            "potential depths ({}, {}) exceed cylinder depth {t}+1",
            f.table_depth(),
            tau.table_depth()
        )));
    }
    validate_roof(model, tau, t)?;
    let basis = CylinderBasis::new(model, t)?;
    // Precompute per-branch (f, tau) so each pressure evaluation is cheap.
    let mut fvals = Vec::new();
    let mut tvals = Vec::new();
    let probe = build_operator_with(&basis, |ext| {
        fvals.push(f.evaluate(ext)?);
        tvals.push(tau.evaluate(ext)?);
        Ok(1.0)
    })?;
    let press_at = |s: f64| -> Result<f64> {
        let mut k = 0usize;
        let mut op = probe.clone();
        for bs in op.branches.iter_mut() {
            for b in bs.iter_mut() {
                b.weight = (fvals[k] - s * tvals[k]).exp();
                k += 1;
            }
        }
        Ok(leading_triple(&op)?.pressure)
    };

    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let p0 = press_at(0.0)?;
    if p0 == 0.0 {
        return Ok(0.0);
    }
    let mut step = 1.0;
    let mut expanded = false;
    for _ in 0..200 {
        if p0 > 0.0 {
            hi = lo + step;
            if press_at(hi)? <= 0.0 {
                lo = hi - step;
                expanded = true;
                break;
            }
            lo = hi;
        } else {
            lo = hi - step;
            if press_at(lo)? >= 0.0 {
                hi = lo + step;
                expanded = true;
                break;
            }
            hi = lo;
        }
        step *= 2.0;
    }
    if !expanded {
        return Err(Error::Numerical {
            reason: "bracket expansion for P_f failed after 200 doublings".to_string(),
            iterations: 200,
            residual: p0,
        });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let p = press_at(mid)?;
        if p.abs() < 1e-12 {
            return Ok(mid);
        }
        if p > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical {
        reason: "bisection for P_f did not reach |pressure| < 1e-12".to_string(),
        iterations: 200,
        residual: press_at(mid)?,
    })
}

/// `nu(C)` for a cylinder no deeper than the eigendata depth.
pub fn gibbs_cylinder_measure(rpf: &RpfData, cyl: &Cylinder) -> Result<f64> {
    if cyl.depth() > rpf.basis.depth() {
        return Err(Error::input(format!(
            "cylinder depth {} exceeds matrix depth {}; rebuild the eigendata at depth >= {}",
            cyl.depth(),
            rpf.basis.depth(),
            cyl.depth()
        )));
    }
    if !rpf.basis.model().is_admissible(&cyl.word)? {
        return Ok(0.0);
    }
    let range = rpf.basis.cylinder_range(cyl.word.symbols());
    Ok(range.map(|i| rpf.nu[i]).sum())
}

/// Potential normalization data: `f^(a)` together with the eigendata it was
/// built from.
#[derive(Debug, Clone)]
pub struct Normalization {
    pub a: f64,
    pub p_f: f64,
    pub lambda_a: f64,
    pub h_a: RealCylinderFunction,
    /// Depth-`(t+1)` table of `f^(a)`.
    pub f_a: RealCylinderFunction,
    /// Eigendata of `L_{f - (P_f + a) tau}` at depth `t`.
    pub rpf: RpfData,
}

/// Builds `f^(a) = f - (P_f + a) tau + ln h_a - ln h_a o sigma - ln lambda_a`
/// as a depth-`(t+1)` table (the sigma-composition raises depth by one).
pub fn normalize_potential(
    model: &SubshiftModel,
    f: &PotentialSpec,
    tau: &PotentialSpec,
    a: f64,
    t: usize,
) -> Result<Normalization> {
    let p_f = solve_p_f(model, f, tau, t)?;
    let basis = CylinderBasis::new(model, t)?;
    let op = build_operator_with(&basis, |ext| {
        Ok((f.evaluate(ext)? - (p_f + a) * tau.evaluate(ext)?).exp())
    })?;
    let rpf = leading_triple(&op)?;
    if rpf.h.values.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Numerical {
            reason: "eigenfunction h_a is not strictly positive".to_string(),
            iterations: rpf.iterations,
            residual: 0.0,
        });
    }
    let deep = model.enumerate_words(t + 1)?;
    let mut values = Vec::with_capacity(deep.len());
    for u in &deep {
        let hu = rpf.h.values[basis.index_of(u.symbols())?];
        let hsu = rpf.h.values[basis.index_of(&u.symbols()[1..])?];
        let v = f.evaluate(u)? - (p_f + a) * tau.evaluate(u)? + hu.ln() - hsu.ln()
            - rpf.lambda.ln();
        values.push(v);
    }
    Ok(Normalization {
        a,
        p_f,
        lambda_a: rpf.lambda,
        h_a: rpf.h.clone(),
        f_a: RealCylinderFunction::new(t + 1, values),
        rpf,
    })
}

/// The normalized operator `M_a = L_{f^(a)}` on the depth-`t` basis
/// (`t` may exceed the depth the normalization was built at).
pub fn normalized_operator(
    model: &SubshiftModel,
    norm: &Normalization,
    t: usize,
) -> Result<TransferOperator> {
    if norm.f_a.depth > t + 1 {
        return Err(Error::input(format!(
            "normalized potential depth {} exceeds cylinder depth {t}+1",
            norm.f_a.depth
        )));
    }
    let fa_basis = CylinderBasis::new(model, norm.f_a.depth)?;
    let basis = CylinderBasis::new(model, t)?;
    build_operator_with(&basis, |ext| {
        let idx = fa_basis.index_of(ext.symbols())?;
        Ok(norm.f_a.values[idx].exp())
    })
}

/// Modulus of the subleading eigenvalue of a (normalized) operator: the
/// geometric rate of RPF convergence.
pub fn mixing_rate(op: &TransferOperator) -> Result<f64> {
    let dim = op.dim();
    if dim > 4096 {
        return Err(Error::input(format!(
            "dense eigensolve capped at dimension 4096, got {dim}"
        )));
    }
    let eigs = op.to_dense().complex_eigenvalues();
    let mut mods: Vec<f64> = eigs.iter().map(|e| e.norm()).collect();
    mods.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(if mods.len() > 1 { mods[1] } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    const PHI: f64 = 1.618033988749894848;

    fn full2() -> SubshiftModel {
        SubshiftModel::full_shift(2, 0.5).unwrap()
    }

    fn golden() -> SubshiftModel {
        SubshiftModel::golden_mean(0.5).unwrap()
    }

    #[test]
    fn transfer_matrix_examples() {
        let m = full2();
        let g = PotentialSpec::table(&m, 1, vec![-(2.0f64).ln(); 2]).unwrap();
        let op = build_transfer_operator(&m, &g, 1).unwrap();
        let d = op.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[(i, j)] - 0.5).abs() < 1e-15);
            }
        }

        let gm = golden();
        let zero = PotentialSpec::zero(&gm);
        let d = build_transfer_operator(&gm, &zero, 1).unwrap().to_dense();
        // transpose of A
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 0)], 1.0);
        assert_eq!(d[(1, 1)], 0.0);

        let s = 0.7;
        let g = PotentialSpec::table(&m, 1, vec![-s, -2.0 * s]).unwrap();
        let d = build_transfer_operator(&m, &g, 1).unwrap().to_dense();
        for row in 0..2 {
            assert!((d[(row, 0)] - (-s).exp()).abs() < 1e-15);
            assert!((d[(row, 1)] - (-2.0 * s).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn leading_triple_examples() {
        let m = full2();
        let g = PotentialSpec::table(&m, 1, vec![-(2.0f64).ln(); 2]).unwrap();
        let rpf = leading_triple(&build_transfer_operator(&m, &g, 1).unwrap()).unwrap();
        assert!((rpf.lambda - 1.0).abs() < 1e-13);
        assert!((rpf.h.values[0] - rpf.h.values[1]).abs() < 1e-12);
        assert!((rpf.nu_hat[0] - 0.5).abs() < 1e-12);

        let gm = golden();
        let rpf = leading_triple(&build_transfer_operator(&gm, &PotentialSpec::zero(&gm), 1).unwrap())
            .unwrap();
        assert!((rpf.lambda - PHI).abs() < 1e-12);

        // u^2 + u = 1 at s = ln phi makes the weighted operator stochastic-like
        let s = PHI.ln();
        let g = PotentialSpec::table(&m, 1, vec![-s, -2.0 * s]).unwrap();
        let rpf = leading_triple(&build_transfer_operator(&m, &g, 1).unwrap()).unwrap();
        assert!((rpf.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_residuals_are_tiny() {
        let gm = golden();
        let op = build_transfer_operator(&gm, &PotentialSpec::zero(&gm), 3).unwrap();
        let rpf = leading_triple(&op).unwrap();
        let mh = op.apply(&rpf.h.values);
        for (a, b) in mh.iter().zip(&rpf.h.values) {
            assert!((a - rpf.lambda * b).abs() < 1e-12);
        }
        let um = op.apply_transpose(&rpf.nu_hat);
        for (a, b) in um.iter().zip(&rpf.nu_hat) {
            assert!((a - rpf.lambda * b).abs() < 1e-12);
        }
        let integral: f64 = rpf.h.values.iter().zip(&rpf.nu_hat).map(|(a, b)| a * b).sum();
        assert!((integral - 1.0).abs() < 1e-13);
    }

    #[test]
    fn pressure_examples() {
        let m = full2();
        assert!((pressure(&m, &PotentialSpec::zero(&m), 1).unwrap() - (2.0f64).ln()).abs() < 1e-12);
        let s = 0.31;
        let g = PotentialSpec::table(&m, 1, vec![-s, -2.0 * s]).unwrap();
        let expect = ((-s).exp() + (-2.0 * s).exp()).ln();
        assert!((pressure(&m, &g, 1).unwrap() - expect).abs() < 1e-12);
        let gm = golden();
        assert!((pressure(&gm, &PotentialSpec::zero(&gm), 1).unwrap() - PHI.ln()).abs() < 1e-12);
    }

    #[test]
    fn pressure_depth_stability() {
        let gm = golden();
        let p1 = pressure(&gm, &PotentialSpec::zero(&gm), 1).unwrap();
        for t in 2..=6 {
            let pt = pressure(&gm, &PotentialSpec::zero(&gm), t).unwrap();
            assert!((pt - p1).abs() < 1e-12);
        }
        // nu(C) is also independent of the build depth
        let cyl = Cylinder::new(Word::new(vec![0]));
        let nu1 = gibbs_cylinder_measure(
            &leading_triple(&build_transfer_operator(&gm, &PotentialSpec::zero(&gm), 1).unwrap())
                .unwrap(),
            &cyl,
        )
        .unwrap();
        for t in 2..=6 {
            let nut = gibbs_cylinder_measure(
                &leading_triple(&build_transfer_operator(&gm, &PotentialSpec::zero(&gm), t).unwrap())
                    .unwrap(),
                &cyl,
            )
            .unwrap();
            assert!((nut - nu1).abs() < 1e-12);
        }
    }

    #[test]
    fn p_f_examples() {
        let m = full2();
        let zero = PotentialSpec::zero(&m);
        let unit = PotentialSpec::table(&m, 1, vec![1.0, 1.0]).unwrap();
        assert!((solve_p_f(&m, &zero, &unit, 1).unwrap() - (2.0f64).ln()).abs() < 1e-10);

        let tau12 = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        assert!((solve_p_f(&m, &zero, &tau12, 1).unwrap() - PHI.ln()).abs() < 1e-10);

        // Frozen by the independent bisection oracle on e^{-s} + e^{-s*phi} = 1.
        let taug = PotentialSpec::table(&m, 1, vec![1.0, PHI]).unwrap();
        let oracle = {
            let f = |s: f64| (-s).exp() + (-s * PHI).exp() - 1.0;
            let (mut lo, mut hi) = (0.1, 2.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        assert!((oracle - 0.540109).abs() < 1e-6);
        assert!((solve_p_f(&m, &zero, &taug, 1).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn pressure_is_strictly_decreasing_in_s() {
        let m = full2();
        let tau = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let s = -0.5 + 0.1 * k as f64;
            let g = PotentialSpec::table(&m, 1, vec![-s, -2.0 * s]).unwrap();
            let p = pressure(&m, &g, 1).unwrap();
            assert!(p < prev);
            prev = p;
        }
        let _ = tau;
    }

    #[test]
    fn gibbs_measures() {
        let m = full2();
        let g = PotentialSpec::table(&m, 1, vec![-(2.0f64).ln(); 2]).unwrap();
        let rpf = leading_triple(&build_transfer_operator(&m, &g, 6).unwrap()).unwrap();
        for depth in 1..=6 {
            let w = Word::new(vec![0, 1, 0, 1, 0, 1][..depth].to_vec());
            let nu = gibbs_cylinder_measure(&rpf, &Cylinder::new(w)).unwrap();
            assert!((nu - 0.5f64.powi(depth as i32)).abs() < 1e-13);
        }

        let gm = golden();
        let rpf = leading_triple(&build_transfer_operator(&gm, &PotentialSpec::zero(&gm), 4).unwrap())
            .unwrap();
        let parry0 = PHI * PHI / (1.0 + PHI * PHI);
        let nu0 = gibbs_cylinder_measure(&rpf, &Cylinder::new(Word::new(vec![0]))).unwrap();
        let nu1 = gibbs_cylinder_measure(&rpf, &Cylinder::new(Word::new(vec![1]))).unwrap();
        assert!((nu0 - parry0).abs() < 1e-10);
        assert!((nu1 - (1.0 - parry0)).abs() < 1e-10);

        // partition: cylinders of a fixed length sum to 1
        for depth in 1..=4 {
            let total: f64 = gm
                .enumerate_words(depth)
                .unwrap()
                .into_iter()
                .map(|w| gibbs_cylinder_measure(&rpf, &Cylinder::new(w)).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_invariance_and_duality() {
        let gm = golden();
        let op = build_transfer_operator(&gm, &PotentialSpec::zero(&gm), 5).unwrap();
        let rpf = leading_triple(&op).unwrap();
        // nu(sigma^{-1} C) = nu(C) for cylinders of depth <= t-1
        for depth in 1..5 {
            for w in gm.enumerate_words(depth).unwrap() {
                let direct = gibbs_cylinder_measure(&rpf, &Cylinder::new(w.clone())).unwrap();
                let mut pre = 0.0;
                for j in gm.prepend_symbols(w.symbols()[0]) {
                    pre += gibbs_cylinder_measure(&rpf, &Cylinder::new(w.prepended(j))).unwrap();
                }
                assert!((direct - pre).abs() < 1e-12);
            }
        }
        // duality: int L w d(nu_hat) = lambda int w d(nu_hat)
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..100 {
            let w: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lw = op.apply(&w);
            let lhs: f64 = lw.iter().zip(&rpf.nu_hat).map(|(a, b)| a * b).sum();
            let rhs: f64 = w.iter().zip(&rpf.nu_hat).map(|(a, b)| a * b).sum();
            assert!((lhs - rpf.lambda * rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn gibbs_bound_ratio_window() {
        // nu(C)/e^{g_m(y)} for the zero-pressure normalized potential stays in
        // a fixed window with spread < 10 for m = 1..12.
        for (model, f, tau) in [
            (
                full2(),
                PotentialSpec::zero(&full2()),
                PotentialSpec::table(&full2(), 1, vec![1.0, 1.0]).unwrap(),
            ),
            (
                golden(),
                PotentialSpec::zero(&golden()),
                PotentialSpec::table(&golden(), 1, vec![1.0, 1.0]).unwrap(),
            ),
            (
                full2(),
                PotentialSpec::zero(&full2()),
                PotentialSpec::table(&full2(), 1, vec![1.0, 2.0]).unwrap(),
            ),
        ] {
            let p_f = solve_p_f(&model, &f, &tau, 1).unwrap();
            let deep = 12;
            let op = build_transfer_operator(&model, &f, deep).unwrap();
            let _ = op;
            let rpf = leading_triple(&build_transfer_operator(&model, &f, 1).unwrap()).unwrap();
            let _ = rpf;
            // measure at depth 12 once
            let g12 = build_operator_with(&CylinderBasis::new(&model, deep).unwrap(), |ext| {
                Ok((f.evaluate(ext).unwrap() - p_f * tau.evaluate(ext).unwrap()).exp())
            })
            .unwrap();
            let data = leading_triple(&g12).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for m in 1..=deep {
                for w in model.enumerate_words(m).unwrap() {
                    let nu = gibbs_cylinder_measure(&data, &Cylinder::new(w.clone())).unwrap();
                    // y = periodic extension of the cylinder word
                    let mut ext = Vec::new();
                    while ext.len() < m + 1 {
                        ext.extend_from_slice(w.symbols());
                    }
                    let y = Word::new(ext[..m + 1].to_vec());
                    if !model.is_admissible(&y).unwrap() {
                        continue;
                    }
                    let gm_sum =
                        f.birkhoff_sum(&y, m).unwrap() - p_f * tau.birkhoff_sum(&y, m).unwrap();
                    let ratio = nu / gm_sum.exp();
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
            }
            assert!(hi / lo < 10.0, "Gibbs ratio spread {} too large", hi / lo);
        }
    }

    #[test]
    fn normalization_examples() {
        let m = full2();
        let zero = PotentialSpec::zero(&m);
        let unit = PotentialSpec::table(&m, 1, vec![1.0, 1.0]).unwrap();
        let norm = normalize_potential(&m, &zero, &unit, 0.0, 1).unwrap();
        assert!((norm.lambda_a - 1.0).abs() < 1e-12);
        for v in &norm.f_a.values {
            assert!((v + (2.0f64).ln()).abs() < 1e-11);
        }

        // M_a 1 = 1 also at a != 0
        let tau12 = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        for a in [-0.05, 0.0, 0.05] {
            let norm = normalize_potential(&m, &zero, &tau12, a, 2).unwrap();
            let op = normalized_operator(&m, &norm, 2).unwrap();
            let one = vec![1.0; op.dim()];
            for v in op.apply(&one) {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }

        // a = 0 has lambda_0 = 1 because Pr(f - P_f tau) = 0
        let gm = golden();
        let unit_gm = PotentialSpec::table(&gm, 1, vec![1.0, 1.0]).unwrap();
        let n0 = normalize_potential(&gm, &PotentialSpec::zero(&gm), &unit_gm, 0.0, 1).unwrap();
        assert!((n0.lambda_a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_rate_examples() {
        let m = full2();
        let g = PotentialSpec::table(&m, 1, vec![-(2.0f64).ln(); 2]).unwrap();
        let op = build_transfer_operator(&m, &g, 1).unwrap();
        assert!(mixing_rate(&op).unwrap() < 1e-14);

        let gm = golden();
        let unit = PotentialSpec::table(&gm, 1, vec![1.0, 1.0]).unwrap();
        let norm = normalize_potential(&gm, &PotentialSpec::zero(&gm), &unit, 0.0, 1).unwrap();
        let op = normalized_operator(&gm, &norm, 1).unwrap();
        let rate = mixing_rate(&op).unwrap();
        assert!((rate - (PHI - 1.0) / PHI).abs() < 1e-10);

        // depth stability of the subleading modulus
        let op3 = normalized_operator(&gm, &norm, 3).unwrap();
        let rate3 = mixing_rate(&op3).unwrap();
        assert!((rate - rate3).abs() < 1e-10);
    }
}
