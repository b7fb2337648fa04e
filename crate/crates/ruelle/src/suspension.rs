//! The suspension semiflow over a subshift with a positive roof: its
//! invariant probability measure, correlation functions of
//! base-times-height observables, and exponential decay-rate fitting.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::basis::CylinderBasis;
use crate::error::{Error, Result};
use crate::potential::{validate_roof, PotentialSpec, RealCylinderFunction};
use crate::rpf::{leading_triple, normalize_potential, normalized_operator, Normalization};
use crate::subshift::SubshiftModel;

/// A piecewise-polynomial function on `[0, inf)`; each piece holds ascending
/// power coefficients and extends up to the next breakpoint (the last piece
/// extends forever). Exactly integrable per piece.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    pub breaks: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn poly_antideriv(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(c.iter().enumerate().map(|(k, &ck)| ck / (k + 1) as f64));
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Coefficients of `p(x + d)`.
fn poly_shift(c: &[f64], d: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    let mut binom = vec![1.0f64];
    for (k, &ck) in c.iter().enumerate() {
        // binomial row for (x + d)^k
        binom.resize(k + 1, 0.0);
        if k > 0 {
            for j in (1..=k).rev() {
                binom[j] = if j == k { 1.0 } else { binom[j] + binom[j - 1] };
            }
        }
        let mut dp = 1.0;
        for j in (0..=k).rev() {
            out[j] += ck * binom[j] * dp;
            dp *= d;
        }
    }
    let _ = n;
    out
}

impl PiecewisePoly {
    pub fn constant(v: f64) -> Self {
        PiecewisePoly {
            breaks: vec![0.0],
            coeffs: vec![vec![v]],
        }
    }

    /// A single polynomial on `[0, sup)`, zero afterwards.
    pub fn poly_on(coeffs: Vec<f64>, sup: f64) -> Self {
        PiecewisePoly {
            breaks: vec![0.0, sup],
            coeffs: vec![coeffs, vec![0.0]],
        }
    }

    /// The smooth bump `16 s^2 (1-s)^2` on `[0,1)`, zero afterwards; it
    /// vanishes at every ceiling of a roof with minimum >= 1, so the lifted
    /// observable is continuous on the suspension.
    pub fn smooth_bump() -> Self {
        PiecewisePoly::poly_on(vec![0.0, 0.0, 16.0, -32.0, 16.0], 1.0)
    }

    fn piece_at(&self, s: f64) -> usize {
        match self.breaks.partition_point(|&b| b <= s) {
            0 => 0,
            k => k - 1,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        poly_eval(&self.coeffs[self.piece_at(s.max(0.0))], s.max(0.0))
    }

    /// Exact integral over `[lo, hi]`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut cuts: Vec<f64> = vec![lo];
        for &b in &self.breaks {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
        cuts.push(hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in cuts.windows(2) {
            let anti = poly_antideriv(&self.coeffs[self.piece_at(w[0])]);
            acc += poly_eval(&anti, w[1]) - poly_eval(&anti, w[0]);
        }
        acc
    }

    /// Exact integral of `self(s) * other(s + shift)` over `[lo, hi]`.
    pub fn product_integral(&self, other: &PiecewisePoly, shift: f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut cuts: Vec<f64> = vec![lo, hi];
        for &b in &self.breaks {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
        for &b in &other.breaks {
            let c = b - shift;
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let pa = &self.coeffs[self.piece_at(mid)];
            let pb = poly_shift(&other.coeffs[other.piece_at(mid + shift)], shift);
            let anti = poly_antideriv(&poly_mul(pa, &pb));
            acc += poly_eval(&anti, w[1]) - poly_eval(&anti, w[0]);
        }
        acc
    }
}

/// An observable `A(x, s) = base(x) * height(s)` with a cylinder-function
/// base part and a piecewise-polynomial height profile.
#[derive(Debug, Clone)]
pub struct Observable {
    pub base: Option<RealCylinderFunction>,
    pub height: PiecewisePoly,
}

impl Observable {
    pub fn constant() -> Self {
        Observable {
            base: None,
            height: PiecewisePoly::constant(1.0),
        }
    }

    pub fn base_only(base: RealCylinderFunction) -> Self {
        Observable {
            base: Some(base),
            height: PiecewisePoly::constant(1.0),
        }
    }

    fn base_values(&self, model: &SubshiftModel, basis: &CylinderBasis) -> Result<Vec<f64>> {
        match &self.base {
            None => Ok(vec![1.0; basis.len()]),
            Some(cf) => {
                if cf.depth > basis.depth() {
                    return Err(Error::input(format!(
                        "observable base depth {} exceeds working depth {}",
                        cf.depth,
                        basis.depth()
                    )));
                }
                let own = CylinderBasis::new(model, cf.depth)?;
                basis
                    .words()
                    .iter()
                    .map(|w| own.index_of(w.symbols()).map(|i| cf.values[i]))
                    .collect()
            }
        }
    }
}

/// Estimators for correlation integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Exact transfer-path summation; available for two-symbol models with a
    /// depth-1 roof (the Birkhoff sums are then determined by symbol counts).
    Exact,
    /// Deterministic cylinder-by-height quadrature with symbolic flow advance.
    Quadrature,
    /// Seeded Gibbs-Markov sampling.
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct CorrelationOptions {
    pub estimator: Option<Estimator>,
    pub mc_samples: usize,
    pub seed: u64,
    /// Depth ceiling before quadrature gives way to sampling.
    pub quadrature_ceiling: usize,
    /// Midpoint nodes per cylinder for the height quadrature.
    pub height_nodes: usize,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions {
            estimator: None,
            mc_samples: 200_000,
            seed: 42,
            quadrature_ceiling: 16,
            height_nodes: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationPoint {
    pub t: f64,
    pub value: f64,
    pub estimator: Estimator,
    pub samples: usize,
    pub std_err: Option<f64>,
    /// Set when the requested quadrature was infeasible and sampling was used.
    pub switched_to_sampling: bool,
}

/// The suspension semiflow over `model` with roof `tau`, carrying the Gibbs
/// base measure of `f - P_f tau` at the working depth.
pub struct SuspensionModel {
    pub model: SubshiftModel,
    pub f: PotentialSpec,
    pub roof: PotentialSpec,
    pub depth: usize,
    pub basis: Arc<CylinderBasis>,
    pub norm0: Normalization,
    /// Roof values on the working basis.
    pub tau: Vec<f64>,
    pub tau0: f64,
    pub tau_max: f64,
    /// Gibbs measure of working-depth cylinders.
    pub nu: Vec<f64>,
    pub mean_roof: f64,
    /// Markov-chain successors `(next state, probability)` realizing `nu`.
    chain: Vec<Vec<(usize, f64)>>,
    chain_cdf: Vec<Vec<f64>>,
    nu_cdf: Vec<f64>,
}

impl SuspensionModel {
    pub fn build(
        model: &SubshiftModel,
        f: &PotentialSpec,
        roof: &PotentialSpec,
        depth: usize,
    ) -> Result<Self> {
        let tau0 = validate_roof(model, roof, depth)?;
        let depth = depth.max(roof.table_depth()).max(f.table_depth());
        let norm0 = normalize_potential(model, f, roof, 0.0, depth)?;
        let m0 = normalized_operator(model, &norm0, depth)?;
        let basis = Arc::clone(m0.basis());
        let rpf = leading_triple(&m0)?;
        let nu = rpf.nu;
        let tau_tab = roof.truncate_to_depth(model, depth)?;
        let tau = tau_tab.values;
        let tau_max = tau.iter().cloned().fold(0.0, f64::max);
        let mean_roof: f64 = tau.iter().zip(&nu).map(|(a, b)| a * b).sum();

        // sigma-chain on depth-t words: P(x -> sigma(x j)) = e^{f^(0)(x j)} nu(sigma(x j)) / nu(x)
        let fa_basis = CylinderBasis::new(model, norm0.f_a.depth)?;
        let mut chain = Vec::with_capacity(basis.len());
        let mut chain_cdf = Vec::with_capacity(basis.len());
        for (x, w) in basis.words().iter().enumerate() {
            let last = *w.symbols().last().unwrap();
            let mut row = Vec::new();
            for j in model.transition_row(last) {
                let mut ext = w.symbols().to_vec();
                ext.push(j);
                let y = basis.index_of(&ext[1..])?;
                let fa = norm0.f_a.values[fa_basis.index_of(&ext)?];
                row.push((y, fa.exp() * nu[y] / nu[x]));
            }
            let total: f64 = row.iter().map(|r| r.1).sum();
            for r in row.iter_mut() {
                r.1 /= total;
            }
            let mut cdf = Vec::with_capacity(row.len());
            let mut acc = 0.0;
            for r in &row {
                acc += r.1;
                cdf.push(acc);
            }
            chain.push(row);
            chain_cdf.push(cdf);
        }
        let mut nu_cdf = Vec::with_capacity(nu.len());
        let mut acc = 0.0;
        for &p in &nu {
            acc += p;
            nu_cdf.push(acc);
        }
        Ok(SuspensionModel {
            model: model.clone(),
            f: f.clone(),
            roof: roof.clone(),
            depth,
            basis,
            norm0,
            tau,
            tau0,
            tau_max,
            nu,
            mean_roof,
            chain,
            chain_cdf,
            nu_cdf,
        })
    }

    /// `int H dm` for the normalized suspension measure: the base-fiber
    /// integral divided by the mean roof.
    pub fn invariant_integral(&self, obs: &Observable) -> Result<f64> {
        let base = obs.base_values(&self.model, &self.basis)?;
        let mut acc = 0.0;
        for i in 0..self.basis.len() {
            acc += self.nu[i] * base[i] * obs.height.integral(0.0, self.tau[i]);
        }
        Ok(acc / self.mean_roof)
    }

    /// `int A (B o phi_t) dm`, by the first applicable estimator.
    pub fn product_integral(
        &self,
        a: &Observable,
        b: &Observable,
        t: f64,
        opts: &CorrelationOptions,
    ) -> Result<CorrelationPoint> {
        if t < 0.0 {
            return Err(Error::input("flow time must be >= 0".to_string()));
        }
        match opts.estimator {
            Some(Estimator::Exact) => self.product_exact(a, b, t),
            Some(Estimator::Quadrature) => self.product_quadrature(a, b, t, opts),
            Some(Estimator::MonteCarlo) => self.product_monte_carlo(a, b, t, opts),
            None => {
                if self.exact_applicable() {
                    self.product_exact(a, b, t)
                } else {
                    match self.product_quadrature(a, b, t, opts) {
                        Ok(p) => Ok(p),
                        Err(Error::Config(_)) | Err(Error::Input(_)) => {
                            let mut p = self.product_monte_carlo(a, b, t, opts)?;
                            p.switched_to_sampling = true;
                            Ok(p)
                        }
                        Err(e) => Err(e),
                    }
                }
            }
        }
    }

    /// Correlation `int A (B o phi_t) dm - int A dm int B dm`.
    pub fn correlation(
        &self,
        a: &Observable,
        b: &Observable,
        t: f64,
        opts: &CorrelationOptions,
    ) -> Result<CorrelationPoint> {
        let mut p = self.product_integral(a, b, t, opts)?;
        let ia = self.invariant_integral(a)?;
        let ib = self.invariant_integral(b)?;
        p.value -= ia * ib;
        Ok(p)
    }

    fn exact_applicable(&self) -> bool {
        self.model.alphabet_size() == 2 && self.roof.table_depth() == 1
            && matches!(self.roof, PotentialSpec::Table { .. })
    }

    /// Exact estimator for two-symbol models with a depth-1 roof: the
    /// Birkhoff sums `tau_n` are determined by symbol counts, so the path sum
    /// collapses to a count-resolved Markov recursion and every height
    /// integral is a closed-form piecewise-polynomial integral.
    fn product_exact(&self, a: &Observable, b: &Observable, t: f64) -> Result<CorrelationPoint> {
        if !self.exact_applicable() {
            return Err(Error::input(
                "exact estimator needs a two-symbol model with a depth-1 table roof".to_string(),
            ));
        }
        let basis = &self.basis;
        let dim = basis.len();
        let av = a.base_values(&self.model, basis)?;
        let bv = b.base_values(&self.model, basis)?;
        let tau_sym = [
            self.roof.evaluate(&crate::subshift::Word::new(vec![0]))?,
            self.roof.evaluate(&crate::subshift::Word::new(vec![1]))?,
        ];
        let n_max = ((t + self.tau_max) / self.tau0).ceil() as usize + 1;
        let mut total = 0.0;

        // n = 0: no shift.
        for i in 0..dim {
            let hi = (self.tau[i]).min(self.tau[i] - t);
            if hi > 0.0 {
                total += self.nu[i] * av[i] * bv[i] * a.height.product_integral(&b.height, t, 0.0, hi);
            }
        }

        // Group the start states by leading symbol (it fixes tau(i0) for the
        // s-window) and absorb A-base into the initial weights.
        for lead in 0..2u8 {
            let tau_i0 = tau_sym[lead as usize];
            // w[k][s]: measure of paths with k zeros consumed, currently at s.
            let mut w = vec![vec![0.0; dim]; 1];
            for i in 0..dim {
                if basis.word(i).symbols()[0] == lead {
                    w[0][i] = self.nu[i] * av[i];
                }
            }
            for n in 1..=n_max {
                // consume one leading symbol from each state
                let mut next = vec![vec![0.0; dim]; n + 1];
                for (k, row) in w.iter().enumerate() {
                    for (s, &mass) in row.iter().enumerate() {
                        if mass == 0.0 {
                            continue;
                        }
                        let zero = usize::from(basis.word(s).symbols()[0] == 0);
                        for &(succ, q) in &self.chain[s] {
                            next[k + zero][succ] += mass * q;
                        }
                    }
                }
                w = next;
                for (k, row) in w.iter().enumerate() {
                    let tau_n = k as f64 * tau_sym[0] + (n - k) as f64 * tau_sym[1];
                    let lo = (tau_n - t).max(0.0);
                    for (s, &mass) in row.iter().enumerate() {
                        if mass == 0.0 {
                            continue;
                        }
                        let hi = tau_i0.min(tau_n + self.tau[s] - t);
                        if hi > lo {
                            total += mass
                                * bv[s]
                                * a.height.product_integral(&b.height, t - tau_n, lo, hi);
                        }
                    }
                }
            }
        }
        Ok(CorrelationPoint {
            t,
            value: total / self.mean_roof,
            estimator: Estimator::Exact,
            samples: 0,
            std_err: None,
            switched_to_sampling: false,
        })
    }

    fn product_quadrature(
        &self,
        a: &Observable,
        b: &Observable,
        t: f64,
        opts: &CorrelationOptions,
    ) -> Result<CorrelationPoint> {
        let lookahead = self
            .roof
            .table_depth()
            .max(b.base.as_ref().map_or(1, |c| c.depth));
        let worst_shifts = ((t + self.tau_max) / self.tau0).ceil() as usize + 1;
        let needed = worst_shifts + lookahead;
        if needed > opts.quadrature_ceiling {
            return Err(Error::config(format!(
                "quadrature needs depth {needed} > ceiling {}; use sampling",
                opts.quadrature_ceiling
            )));
        }
        let t_q = needed.max(self.depth);
        let (basis_q, nu_q, tau_q) = if t_q == self.depth {
            (Arc::clone(&self.basis), self.nu.clone(), self.tau.clone())
        } else {
            let mq = normalized_operator(&self.model, &self.norm0, t_q)?;
            let rpf = leading_triple(&mq)?;
            let tau_tab = self.roof.truncate_to_depth(&self.model, t_q)?;
            (Arc::clone(mq.basis()), rpf.nu, tau_tab.values)
        };
        let av = a.base_values(&self.model, &basis_q)?;
        let bv = b.base_values(&self.model, &basis_q)?;
        let nodes = opts.height_nodes.max(1);
        let mut total = 0.0;
        for (i, word) in basis_q.words().iter().enumerate() {
            if nu_q[i] == 0.0 {
                continue;
            }
            let tau_i = tau_q[i];
            let dt = tau_i / nodes as f64;
            let mut cyl_acc = 0.0;
            let b_own = match &b.base {
                Some(cf) => Some(CylinderBasis::new(&self.model, cf.depth)?),
                None => None,
            };
            for k in 0..nodes {
                let s = (k as f64 + 0.5) * dt;
                let mut rem = s + t;
                let mut n = 0usize;
                loop {
                    if n + lookahead > basis_q.depth() {
                        return Err(Error::config(
                            "flow advance exhausted the quadrature depth".to_string(),
                        ));
                    }
                    let tail = &word.symbols()[n..];
                    let tv = self
                        .roof
                        .evaluate(&crate::subshift::Word::new(tail.to_vec()))?;
                    if rem < tv {
                        break;
                    }
                    rem -= tv;
                    n += 1;
                }
                // b's base at depth <= t_q - n: read the deep word directly
                let b_base = match (&b.base, &b_own) {
                    (Some(cf), Some(own)) => cf.values[own.index_of(&word.symbols()[n..])?],
                    _ => 1.0,
                };
                cyl_acc += av[i] * a.height.eval(s) * b_base * b.height.eval(rem) * dt;
            }
            total += nu_q[i] * cyl_acc;
        }
        let _ = bv;
        Ok(CorrelationPoint {
            t,
            value: total / self.mean_roof,
            estimator: Estimator::Quadrature,
            samples: basis_q.len() * nodes,
            std_err: None,
            switched_to_sampling: false,
        })
    }

    fn product_monte_carlo(
        &self,
        a: &Observable,
        b: &Observable,
        t: f64,
        opts: &CorrelationOptions,
    ) -> Result<CorrelationPoint> {
        let av = a.base_values(&self.model, &self.basis)?;
        let bv = b.base_values(&self.model, &self.basis)?;
        let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
        let n = opts.mc_samples.max(1);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let u: f64 = rng.gen();
            let mut x = self.nu_cdf.partition_point(|&c| c < u);
            if x >= self.basis.len() {
                x = self.basis.len() - 1;
            }
            let s = rng.gen::<f64>() * self.tau[x];
            let weight = self.tau[x] / self.mean_roof;
            let a_val = av[x] * a.height.eval(s);
            let val = if a_val == 0.0 {
                0.0
            } else {
                let mut rem = s + t;
                let mut cur = x;
                while rem >= self.tau[cur] {
                    rem -= self.tau[cur];
                    let u2: f64 = rng.gen();
                    let cdf = &self.chain_cdf[cur];
                    let mut k = cdf.partition_point(|&c| c < u2);
                    if k >= cdf.len() {
                        k = cdf.len() - 1;
                    }
                    cur = self.chain[cur][k].0;
                }
                weight * a_val * bv[cur] * b.height.eval(rem)
            };
            sum += val;
            sum2 += val * val;
        }
        let mean = sum / n as f64;
        let var = (sum2 / n as f64 - mean * mean).max(0.0);
        Ok(CorrelationPoint {
            t,
            value: mean,
            estimator: Estimator::MonteCarlo,
            samples: n,
            std_err: Some((var / n as f64).sqrt()),
            switched_to_sampling: false,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Fitted decay rate of `|C(t)| ~ e^{-c t}`; `+inf` when every sample sits
    /// below the floor (already at the noise floor).
    pub c: f64,
    /// Coefficient of determination of the log-linear fit.
    pub quality: f64,
    /// Number of samples above the floor that entered the fit.
    pub used: usize,
}

/// Least-squares slope of `log |C(t)|` against `t` over the samples above
/// `floor`.
pub fn decay_fit(series: &[(f64, f64)], floor: f64) -> Result<DecayFit> {
    if series.len() < 8 {
        return Err(Error::input(format!(
            "decay fit needs >= 8 samples, got {}",
            series.len()
        )));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, c)| c.abs() > floor)
        .map(|&(t, c)| (t, c.abs().ln()))
        .collect();
    if pts.is_empty() {
        return Ok(DecayFit {
            c: f64::INFINITY,
            quality: 1.0,
            used: 0,
        });
    }
    if pts.len() < 2 {
        return Ok(DecayFit {
            c: f64::INFINITY,
            quality: 1.0,
            used: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Ok(DecayFit {
            c: f64::INFINITY,
            quality: 1.0,
            used: pts.len(),
        });
    }
    let slope = sxy / sxx;
    let quality = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit {
        c: -slope,
        quality,
        used: pts.len(),
    })
}
