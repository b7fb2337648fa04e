//! The complex normalized operators `L_ab = L_{f^(a) - i b tau}`, the norm
//! `||h||_{theta,b} = ||h||_0 + |h|_theta / |b|`, contraction profiles in the
//! iterate count, and the Lasota-Yorke inequality as an executable check.

use std::sync::Arc;

use num_complex::Complex64;

use crate::basis::CylinderBasis;
use crate::error::{Error, Result};
use crate::potential::{theta_seminorm, theta_seminorm_complex, PotentialSpec};
use crate::rpf::{normalize_potential, normalized_operator, Normalization, TransferOperator};
use crate::subshift::SubshiftModel;

/// Matrix realization of `L_ab` on depth-`t` complex cylinder functions.
///
/// Every complex entry has modulus equal to the corresponding `M_a` entry
/// (the phase `e^{-i b tau}` drops out in modulus), so the pointwise
/// domination `|L_ab^m h| <= M_a^m |h|` holds by construction.
#[derive(Debug, Clone)]
pub struct ComplexTransferOperator {
    pub a: f64,
    pub b: f64,
    m_a: TransferOperator,
    /// Phase `tau(j.x)` aligned with the branches of `m_a`.
    tau_ext: Vec<Vec<f64>>,
}

impl ComplexTransferOperator {
    /// Builds `L_ab` (and its real part `M_a`) at depth `t` from a
    /// normalization of `f` against the roof `tau`.
    pub fn build(
        model: &SubshiftModel,
        norm: &Normalization,
        tau: &PotentialSpec,
        b: f64,
        t: usize,
    ) -> Result<Self> {
        if tau.table_depth() > t + 1 {
            return Err(Error::input(format!(
                "roof depth {} exceeds cylinder depth {t}+1",
                tau.table_depth()
            )));
        }
        let m_a = normalized_operator(model, norm, t)?;
        let basis = Arc::clone(m_a.basis());
        let mut tau_ext = Vec::with_capacity(basis.len());
        for (x, word) in basis.words().iter().enumerate() {
            let mut row = Vec::new();
            for br in m_a.branches(x) {
                let ext = word.prepended(br.symbol);
                row.push(tau.evaluate(&ext)?);
            }
            tau_ext.push(row);
        }
        Ok(ComplexTransferOperator {
            a: norm.a,
            b,
            m_a,
            tau_ext,
        })
    }

    pub fn basis(&self) -> &Arc<CylinderBasis> {
        self.m_a.basis()
    }

    pub fn dim(&self) -> usize {
        self.m_a.dim()
    }

    /// The real part `M_a` of the operator.
    pub fn real_part(&self) -> &TransferOperator {
        &self.m_a
    }

    /// Exact matrix-vector product `L_ab h`.
    pub fn apply(&self, h: &[Complex64]) -> Result<Vec<Complex64>> {
        if h.len() != self.dim() {
            return Err(Error::input(format!(
                "function has {} values but the operator acts on dimension {}",
                h.len(),
                self.dim()
            )));
        }
        let mut out = Vec::with_capacity(self.dim());
        for x in 0..self.dim() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (br, &tv) in self.m_a.branches(x).iter().zip(&self.tau_ext[x]) {
                let phase = Complex64::from_polar(1.0, -self.b * tv);
                acc += br.weight * phase * h[br.source];
            }
            out.push(acc);
        }
        Ok(out)
    }

    pub fn apply_power(&self, h: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
        let mut v = h.to_vec();
        for _ in 0..m {
            v = self.apply(&v)?;
        }
        Ok(v)
    }
}

/// The norm parameters of `||.||_{theta,b}`; requires `|b| >= 1`.
#[derive(Debug, Clone, Copy)]
pub struct NormThetaB {
    pub theta: f64,
    pub b: f64,
}

impl NormThetaB {
    pub fn new(theta: f64, b: f64) -> Result<Self> {
        if b.abs() < 1.0 {
            return Err(Error::input(format!("|b| must be >= 1 for ||.||_(theta,b), got {b}")));
        }
        Ok(NormThetaB { theta, b })
    }
}

pub fn sup_norm(h: &[Complex64]) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `||h||_{theta,b} = ||h||_0 + |h|_theta / |b|`.
pub fn norm_theta_b(basis: &CylinderBasis, h: &[Complex64], n: NormThetaB) -> f64 {
    sup_norm(h) + theta_seminorm_complex(basis, h, n.theta) / n.b.abs()
}

pub fn norm_theta_b_real(basis: &CylinderBasis, h: &[f64], n: NormThetaB) -> f64 {
    let sup = h.iter().map(|x| x.abs()).fold(0.0, f64::max);
    sup + theta_seminorm(basis, h, n.theta) / n.b.abs()
}

#[derive(Debug, Clone)]
pub struct ContractionProfile {
    /// Per-iterate rows `(m, ||L_ab^m h0||_{theta,b}, running minimum)`.
    pub rows: Vec<(usize, f64, f64)>,
    /// Geometric-mean contraction estimate over the last half of the profile.
    pub rho_hat: f64,
    /// log2 scale factors applied on overflow guard (normally all zero).
    pub rescales: usize,
    pub depth: usize,
}

/// Iterates `L_ab` on `h0` and records the `||.||_{theta,b}` norms.
///
/// The working depth is `max(depth(f^(a)), depth(tau)) - 1 <= t`; applying
/// `L_ab` never needs depth growth because depth-`t` spaces are invariant.
pub fn contraction_profile(
    model: &SubshiftModel,
    f: &PotentialSpec,
    tau: &PotentialSpec,
    a: f64,
    b: f64,
    t: usize,
    m_max: usize,
    h0: Option<&[Complex64]>,
) -> Result<ContractionProfile> {
    if m_max < 1 {
        return Err(Error::input("m_max must be >= 1".to_string()));
    }
    let norm = normalize_potential(model, f, tau, a, t)?;
    let op = ComplexTransferOperator::build(model, &norm, tau, b, t)?;
    profile_for(&op, m_max, h0)
}

pub fn profile_for(
    op: &ComplexTransferOperator,
    m_max: usize,
    h0: Option<&[Complex64]>,
) -> Result<ContractionProfile> {
    let basis = op.basis();
    let nb = NormThetaB::new(basis.model().theta(), if op.b.abs() >= 1.0 { op.b } else { 1.0 })?;
    let mut h: Vec<Complex64> = match h0 {
        Some(v) => v.to_vec(),
        None => vec![Complex64::new(1.0, 0.0); op.dim()],
    };
    let mut rows = Vec::with_capacity(m_max + 1);
    let mut rescales = 0usize;
    let mut scale = 1.0f64;
    let n0 = norm_theta_b(basis, &h, nb);
    let mut envelope = n0;
    rows.push((0, n0, envelope));
    for m in 1..=m_max {
        h = op.apply(&h)?;
        let raw = norm_theta_b(basis, &h, nb) * scale;
        if raw > 1e100 {
            for z in h.iter_mut() {
                *z *= 0.5;
            }
            scale *= 2.0;
            rescales += 1;
        }
        envelope = envelope.min(raw);
        rows.push((m, raw, envelope));
    }
    let half = m_max / 2;
    let (m_half, n_half, _) = rows[half];
    let (m_last, n_last, _) = rows[m_max];
    let rho_hat = if n_half > 0.0 && n_last > 0.0 && m_last > m_half {
        (n_last / n_half).powf(1.0 / (m_last - m_half) as f64)
    } else {
        f64::NAN
    };
    Ok(ContractionProfile {
        rows,
        rho_hat,
        rescales,
        depth: basis.depth(),
    })
}

/// Executable check of the Lasota-Yorke inequality: for every
/// same-first-symbol pair `(u, u')` at the working depth,
/// `|L_ab^m h(u) - L_ab^m h(u')| <= A0 [B theta^m (M_a^m H)(u') + |b| (M_a^m |h|)(u')] D_theta(u,u')`
/// with the explicit constant `A0 = e^{theta T/(1-theta)} max(1, 2 theta T/(1-theta))`.
#[derive(Debug, Clone)]
pub struct LasotaYorkeReport {
    pub a0: f64,
    /// The constant `T`: max of `||f^(a)||_0`, `|f^(a)|_theta`, `|tau|_theta`.
    pub t_const: f64,
    pub pairs_checked: usize,
    /// Pairs where the premise `|h(v)-h(v')| <= B H(v') D_theta` failed and
    /// the check was skipped.
    pub skipped: Vec<(usize, usize)>,
    /// Pairs `(u, u', lhs, rhs)` violating the conclusion.
    pub violations: Vec<(usize, usize, f64, f64)>,
    pub ok: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn lasota_yorke_check(
    model: &SubshiftModel,
    f: &PotentialSpec,
    tau: &PotentialSpec,
    a: f64,
    b: f64,
    t: usize,
    m: usize,
    h: &[Complex64],
    h_dom: &[f64],
    b_const: f64,
) -> Result<LasotaYorkeReport> {
    if b.abs() < 1.0 {
        return Err(Error::input(format!("|b| must be >= 1, got {b}")));
    }
    if h_dom.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::input("H must be strictly positive".to_string()));
    }
    let norm = normalize_potential(model, f, tau, a, t)?;
    let op = ComplexTransferOperator::build(model, &norm, tau, b, t)?;
    let basis = op.basis();
    let theta = model.theta();

    // T >= max(||f^(a)||_0, |f^(a)|_theta, |tau|_theta) computed exactly at
    // the working depth.
    let fa_basis = CylinderBasis::new(model, norm.f_a.depth)?;
    let sup_fa = norm.f_a.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let semi_fa = theta_seminorm(&fa_basis, &norm.f_a.values, theta);
    let tau_tab = tau.truncate_to_depth(model, t)?;
    let semi_tau = theta_seminorm(basis, &tau_tab.values, theta);
    let t_const = sup_fa.max(semi_fa).max(semi_tau);
    let gamma = theta * t_const / (1.0 - theta);
    let a0 = gamma.exp() * 1.0f64.max(2.0 * gamma);

    let lh = op.apply_power(h, m)?;
    let habs: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    let mh = op.real_part().apply_power(h_dom, m);
    let mabs = op.real_part().apply_power(&habs, m);

    let n = basis.len();
    let mut skipped = Vec::new();
    let mut violations = Vec::new();
    let mut pairs = 0usize;
    // Premise check on same-first-symbol pairs.
    let mut premise_ok = vec![true; n];
    for v in 0..n {
        for vp in 0..n {
            if v == vp || basis.word(v).symbols()[0] != basis.word(vp).symbols()[0] {
                continue;
            }
            let d = basis.d_theta(v, vp);
            if (h[v] - h[vp]).norm() > b_const * h_dom[vp] * d * (1.0 + 1e-12) {
                premise_ok[v] = false;
                skipped.push((v, vp));
            }
        }
    }
    for u in 0..n {
        for up in 0..n {
            if u == up || basis.word(u).symbols()[0] != basis.word(up).symbols()[0] {
                continue;
            }
            if !premise_ok[u] || !premise_ok[up] {
                continue;
            }
            pairs += 1;
            let d = basis.d_theta(u, up);
            let lhs = (lh[u] - lh[up]).norm();
            let rhs = a0 * (b_const * theta.powi(m as i32) * mh[up] + b.abs() * mabs[up]) * d;
            if lhs > rhs * (1.0 + 1e-12) {
                violations.push((u, up, lhs, rhs));
            }
        }
    }
    let ok = violations.is_empty();
    Ok(LasotaYorkeReport {
        a0,
        t_const,
        pairs_checked: pairs,
        skipped,
        violations,
        ok,
    })
}
