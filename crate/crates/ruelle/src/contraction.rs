//! Contraction-operator machinery: cylinder families tied to the frequency
//! `b`, inverse-branch pairs and temporal functions, damping functions
//! `omega_J`, the operators `N_J h = M_a^N(omega_J h)`, the auxiliary metric
//! `D` and cone `K_E`, representative-set selection, dominated iteration and
//! the `L^2` contraction inequality.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;

use crate::basis::CylinderBasis;
use crate::complex_transfer::{norm_theta_b, ComplexTransferOperator, NormThetaB};
use crate::error::{Error, Result};
use crate::potential::{theta_seminorm, PotentialSpec};
use crate::rpf::{leading_triple, normalize_potential, normalized_operator, Normalization, TransferOperator};
use crate::subshift::{SubshiftModel, Word};

/// Tunables of the contraction machinery. The defaults are desk-scale
/// choices; the damping depth `mu0` in particular is far larger than the
/// asymptotic value the proofs use, so that contraction is observable at
/// feasible iterate counts.
#[derive(Debug, Clone, Copy)]
pub struct DolgopyatParams {
    /// Branch depth `N`.
    pub n_branch: usize,
    /// Number of branch-pair labels per family cylinder.
    pub ell0: usize,
    /// Damping depth `mu0 in (0, 1/2]`.
    pub mu0: f64,
    /// Cone constant `E > 1`.
    pub cone_e: f64,
    /// Scale parameter of the cylinder-length window.
    pub epsilon1: f64,
    /// Minimal sampled phase gap accepted for a phase-cancellation triple.
    pub eps3: f64,
    /// Co-length of the sub-cylinders carrying the damping.
    pub sub_colength: usize,
    /// Frequency threshold below which no family is built.
    pub b0: f64,
}

impl Default for DolgopyatParams {
    fn default() -> Self {
        DolgopyatParams {
            n_branch: 4,
            ell0: 2,
            mu0: 0.05,
            cone_e: 10.0,
            epsilon1: 1.0,
            eps3: 0.01,
            sub_colength: 1,
            b0: 1.0,
        }
    }
}

/// The uniform-length family of cylinders whose `theta`-diameter sits in
/// `[epsilon1/(2|b|), epsilon1/|b|]`.
#[derive(Debug, Clone)]
pub struct CylinderFamily {
    pub b: f64,
    pub epsilon1: f64,
    pub ell_b: usize,
    /// Derived constant with `(1/B) log|b| <= ell_b <= B log|b|`.
    pub b_const: f64,
    pub members: Vec<FamilyMember>,
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub word: Word,
    /// Contiguous range of working-depth basis indices inside the cylinder.
    pub range: Range<usize>,
}

pub fn build_cylinder_family(
    basis: &CylinderBasis,
    b: f64,
    epsilon1: f64,
    b0: f64,
) -> Result<CylinderFamily> {
    if b.abs() < b0 {
        return Err(Error::config(format!("|b| = {} is below the threshold b0 = {b0}", b.abs())));
    }
    let theta = basis.model().theta();
    let raw = (b.abs() / epsilon1).ln() / (1.0 / theta).ln();
    let mut ell_b = if (raw - raw.round()).abs() < 1e-9 {
        raw.round() as i64
    } else {
        raw.ceil() as i64
    };
    ell_b = ell_b.max(1);
    let ell = ell_b as usize;
    let diam = theta.powi(ell as i32);
    if diam > epsilon1 / b.abs() * (1.0 + 1e-12) || diam < epsilon1 / (2.0 * b.abs()) * (1.0 - 1e-12) {
        return Err(Error::config(format!(
            "no cylinder length with theta^l in [{:.3e}, {:.3e}] (theta = {theta})",
            epsilon1 / (2.0 * b.abs()),
            epsilon1 / b.abs()
        )));
    }
    if ell > basis.depth() {
        return Err(Error::config(format!(
            "family length {ell} exceeds working depth {}",
            basis.depth()
        )));
    }
    let words = basis.model().enumerate_words(ell)?;
    let members = words
        .into_iter()
        .map(|w| {
            let range = basis.cylinder_range(w.symbols());
            FamilyMember { word: w, range }
        })
        .collect();
    let logb = b.abs().ln().max(f64::MIN_POSITIVE);
    let b_const = (ell as f64 / logb).max(logb / ell as f64).max(1.0);
    Ok(CylinderFamily {
        b,
        epsilon1,
        ell_b: ell,
        b_const,
        members,
    })
}

impl CylinderFamily {
    /// Sub-cylinders of co-length `q` of a member, as contiguous basis ranges
    /// together with their defining words.
    pub fn children(
        &self,
        basis: &CylinderBasis,
        member: usize,
        q: usize,
    ) -> Result<Vec<(Word, Range<usize>)>> {
        let depth = self.ell_b + q;
        if depth > basis.depth() {
            return Err(Error::config(format!(
                "sub-cylinder depth {depth} exceeds working depth {}",
                basis.depth()
            )));
        }
        let parent = &self.members[member].word;
        let model = basis.model();
        let mut out = Vec::new();
        let mut stack = vec![(parent.clone(), 0usize)];
        while let Some((w, added)) = stack.pop() {
            if added == q {
                let range = basis.cylinder_range(w.symbols());
                out.push((w, range));
                continue;
            }
            for s in (0..model.alphabet_size() as u8).rev() {
                if model.allowed(*w.symbols().last().unwrap(), s) {
                    let mut v = w.symbols().to_vec();
                    v.push(s);
                    stack.push((Word::new(v), added + 1));
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

/// The metric `D` of the family: 0 on equal words, `D_theta / diam_theta(C_m)`
/// when a shifted image of the joint cylinder fits in a family member
/// (maximal shift taken over family members), and 1 otherwise. Always <= 1.
pub fn d_metric(family: &CylinderFamily, basis: &CylinderBasis, u: usize, v: usize) -> f64 {
    if u == v {
        return 0.0;
    }
    let cpl = basis.common_prefix(u, v);
    if cpl < family.ell_b {
        return 1.0;
    }
    let theta = basis.model().theta();
    theta.powi((cpl - family.ell_b) as i32)
}

/// Inverse-branch pairs of `sigma^N` over each family cylinder.
#[derive(Debug, Clone)]
pub struct BranchPairSet {
    pub n: usize,
    pub per_member: Vec<MemberBranches>,
}

#[derive(Debug, Clone)]
pub struct MemberBranches {
    /// Up to `ell0` prepend-word pairs (distinct words within a pair).
    pub pairs: Vec<(Word, Word)>,
    /// Best achieved separation of the temporal function over the sample grid.
    pub delta_hat: f64,
}

/// Temporal function `phi_ell(x) = tau_N(v1(x)) - tau_N(v2(x))` for a branch
/// pair over the cylinder of `member_word`; `x` must lie in that cylinder.
pub fn temporal_function(
    tau: &PotentialSpec,
    pair: &(Word, Word),
    n: usize,
    member_word: &Word,
    x: &Word,
) -> Result<f64> {
    if x.len() < member_word.len() || &x.symbols()[..member_word.len()] != member_word.symbols() {
        return Err(Error::input(format!(
            "point {x} does not lie in the cylinder of {member_word}"
        )));
    }
    let mut w1 = pair.0.symbols().to_vec();
    w1.extend_from_slice(x.symbols());
    let mut w2 = pair.1.symbols().to_vec();
    w2.extend_from_slice(x.symbols());
    Ok(tau.birkhoff_sum(&Word::new(w1), n)? - tau.birkhoff_sum(&Word::new(w2), n)?)
}

/// Selects, for each family cylinder, the `ell0` branch pairs maximizing the
/// minimal sampled separation `|phi(x) - phi(z)|` over points `x, z` in
/// different sub-cylinders (deterministic grid of at most 32 basis words per
/// cylinder; lexicographic tie-break, so lattice roofs with all-zero
/// separations get a deterministic choice).
pub fn select_branch_pairs(
    basis: &CylinderBasis,
    tau: &PotentialSpec,
    family: &CylinderFamily,
    n: usize,
    ell0: usize,
    sub_colength: usize,
) -> Result<BranchPairSet> {
    let model = basis.model();
    if n < 1 {
        return Err(Error::input("branch depth N must be >= 1".to_string()));
    }
    let all_n = model.enumerate_words(n)?;
    let mut per_member = Vec::with_capacity(family.members.len());
    for (mi, member) in family.members.iter().enumerate() {
        let first = member.word.symbols()[0];
        let candidates: Vec<&Word> = all_n
            .iter()
            .filter(|w| model.allowed(*w.symbols().last().unwrap(), first))
            .collect();
        if candidates.len() < 2 {
            return Err(Error::model(format!(
                "fewer than two admissible depth-{n} inverse branches over family cylinder {}",
                member.word
            )));
        }
        // Deterministic sample grid of basis words in the cylinder.
        let len = member.range.len();
        let take = len.min(32);
        let samples: Vec<usize> = (0..take)
            .map(|k| member.range.start + k * len / take)
            .collect();
        let child_of = |idx: usize| -> &[u8] {
            &basis.word(idx).symbols()[family.ell_b..(family.ell_b + sub_colength).min(basis.depth())]
        };
        let mut scored: Vec<(f64, usize, usize)> = Vec::new();
        for (ci, w1) in candidates.iter().enumerate() {
            for (cj, w2) in candidates.iter().enumerate().skip(ci + 1) {
                let phis: Vec<f64> = samples
                    .iter()
                    .map(|&x| {
                        temporal_function(tau, &((*w1).clone(), (*w2).clone()), n, &member.word, basis.word(x))
                    })
                    .collect::<Result<_>>()?;
                let mut min_sep = f64::INFINITY;
                let mut seen_cross = false;
                for (p, &x) in samples.iter().enumerate() {
                    for (r, &z) in samples.iter().enumerate().skip(p + 1) {
                        if child_of(x) == child_of(z) {
                            continue;
                        }
                        seen_cross = true;
                        min_sep = min_sep.min((phis[p] - phis[r]).abs());
                    }
                }
                if !seen_cross {
                    min_sep = 0.0;
                }
                scored.push((min_sep, ci, cj));
            }
        }
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let chosen: Vec<(Word, Word)> = scored
            .iter()
            .take(ell0)
            .map(|&(_, i, j)| (candidates[i].clone(), candidates[j].clone()))
            .collect();
        let delta_hat = scored.first().map(|s| s.0).unwrap_or(0.0);
        per_member.push(MemberBranches { pairs: chosen, delta_hat });
        let _ = mi;
    }
    Ok(BranchPairSet { n, per_member })
}

/// A damping function `omega_J = 1 - mu0 * sum of branch-image indicators`
/// for a representative set `J` of triples.
#[derive(Debug, Clone)]
pub struct DampingFunction {
    pub mu0: f64,
    pub triples: Vec<JTriple>,
    /// Values on the working-depth basis; always in `[1 - mu0, 1]`.
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct JTriple {
    pub member: usize,
    /// Index of the damped sub-cylinder among the member's children.
    pub child: usize,
    /// Branch-pair label.
    pub ell: usize,
    /// Which branch of the pair is damped (0 or 1).
    pub branch: usize,
    pub case: SelectionCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionCase {
    /// One branch image satisfies the 3/4 domination `|h| <= (3/4) H`.
    DominatedBranch,
    /// The two branch contributions keep a phase gap and cancel.
    PhaseCancellation,
}

/// `N_J h = M_a^N (omega . h)` for real data.
pub fn apply_contraction(m_op: &TransferOperator, omega: &[f64], n: usize, h: &[f64]) -> Vec<f64> {
    let damped: Vec<f64> = omega.iter().zip(h).map(|(w, x)| w * x).collect();
    m_op.apply_power(&damped, n)
}

#[derive(Debug, Clone)]
pub struct ConeCheck {
    pub member: bool,
    /// A violating ordered pair `(u, u')` when not a member.
    pub witness: Option<(usize, usize)>,
}

/// Membership of `H` in the cone `K_E`: strictly positive with
/// `|H(u) - H(u')| <= E H(u') D(u,u')` over all eligible pairs.
pub fn cone_membership(
    basis: &CylinderBasis,
    family: &CylinderFamily,
    h: &[f64],
    e: f64,
) -> ConeCheck {
    if let Some(i) = h.iter().position(|&x| !(x > 0.0)) {
        return ConeCheck {
            member: false,
            witness: Some((i, i)),
        };
    }
    for member in &family.members {
        for u in member.range.clone() {
            for v in member.range.clone() {
                if u == v {
                    continue;
                }
                let d = d_metric(family, basis, u, v);
                if (h[u] - h[v]).abs() > e * h[v] * d * (1.0 + 1e-12) {
                    return ConeCheck {
                        member: false,
                        witness: Some((u, v)),
                    };
                }
            }
        }
    }
    ConeCheck {
        member: true,
        witness: None,
    }
}

/// Everything the per-`b` machinery needs, precomputed once: operators at the
/// working depth, the cylinder family, branch pairs, per-branch amplitude and
/// phase tables, and the Gibbs measure.
pub struct DolgopyatContext {
    pub params: DolgopyatParams,
    pub b: f64,
    pub basis: Arc<CylinderBasis>,
    pub norm: Normalization,
    pub norm0: Normalization,
    pub m_op: TransferOperator,
    pub m0_op: TransferOperator,
    pub l_op: ComplexTransferOperator,
    pub family: CylinderFamily,
    pub branches: BranchPairSet,
    /// `children[m]` = the member's sub-cylinders of co-length `sub_colength`.
    pub children: Vec<Vec<(Word, Range<usize>)>>,
    /// `branch_eval[m][ell][i]`: target index, amplitude `e^{f^(a)_N}` and
    /// phase sum `tau_N` along branch `i`, aligned with the member's range.
    pub branch_eval: Vec<Vec<[BranchEval; 2]>>,
    /// Gibbs measure of working-depth cylinders (stationary for `M_0`).
    pub nu: Vec<f64>,
    /// The computed constant `T` of the norm bounds.
    pub t_const: f64,
}

#[derive(Debug, Clone)]
pub struct BranchEval {
    pub target: Vec<usize>,
    pub amp: Vec<f64>,
    pub tau_n: Vec<f64>,
}

impl DolgopyatContext {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        model: &SubshiftModel,
        f: &PotentialSpec,
        tau: &PotentialSpec,
        a: f64,
        b: f64,
        depth: usize,
        params: DolgopyatParams,
    ) -> Result<Self> {
        let norm = normalize_potential(model, f, tau, a, depth)?;
        let norm0 = if a == 0.0 {
            norm.clone()
        } else {
            normalize_potential(model, f, tau, 0.0, depth)?
        };
        let m_op = normalized_operator(model, &norm, depth)?;
        let m0_op = normalized_operator(model, &norm0, depth)?;
        let l_op = ComplexTransferOperator::build(model, &norm, tau, b, depth)?;
        let basis = Arc::clone(m_op.basis());
        let family = build_cylinder_family(&basis, b, params.epsilon1, params.b0)?;
        if family.ell_b + params.sub_colength + params.n_branch > depth {
            return Err(Error::config(format!(
                "working depth {depth} too small: need >= ell_b + q + N = {}",
                family.ell_b + params.sub_colength + params.n_branch
            )));
        }
        let branches = select_branch_pairs(&basis, tau, &family, params.n_branch, params.ell0, params.sub_colength)?;
        let mut children = Vec::with_capacity(family.members.len());
        for m in 0..family.members.len() {
            children.push(family.children(&basis, m, params.sub_colength)?);
        }

        // Per-branch amplitude and phase tables.
        let fa_basis = CylinderBasis::new(model, norm.f_a.depth)?;
        let n = params.n_branch;
        let mut branch_eval = Vec::with_capacity(family.members.len());
        for (mi, member) in family.members.iter().enumerate() {
            let mut per_ell = Vec::new();
            for pair in &branches.per_member[mi].pairs {
                let mut evals: Vec<BranchEval> = Vec::with_capacity(2);
                for w in [&pair.0, &pair.1] {
                    let mut target = Vec::with_capacity(member.range.len());
                    let mut amp = Vec::with_capacity(member.range.len());
                    let mut tau_n = Vec::with_capacity(member.range.len());
                    for x in member.range.clone() {
                        let mut ext = w.symbols().to_vec();
                        ext.extend_from_slice(basis.word(x).symbols());
                        let full = Word::new(ext);
                        target.push(basis.index_of(full.symbols())?);
                        let mut fa_sum = 0.0;
                        for j in 0..n {
                            fa_sum += norm.f_a.values[fa_basis.index_of(&full.symbols()[j..])?];
                        }
                        amp.push(fa_sum.exp());
                        tau_n.push(tau.birkhoff_sum(&full, n)?);
                    }
                    evals.push(BranchEval { target, amp, tau_n });
                }
                let e1 = evals.pop().unwrap();
                let e0 = evals.pop().unwrap();
                per_ell.push([e0, e1]);
            }
            branch_eval.push(per_ell);
        }

        let nu = leading_triple(&m0_op)?.nu;

        let theta = model.theta();
        let sup_fa = norm.f_a.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let semi_fa = theta_seminorm(&fa_basis, &norm.f_a.values, theta);
        let tau_tab = tau.truncate_to_depth(model, depth)?;
        let semi_tau = theta_seminorm(&basis, &tau_tab.values, theta);
        let t_const = sup_fa.max(semi_fa).max(semi_tau);

        Ok(DolgopyatContext {
            params,
            b,
            basis,
            norm,
            norm0,
            m_op,
            m0_op,
            l_op,
            family,
            branches,
            children,
            branch_eval,
            nu,
            t_const,
        })
    }

    fn member_offset(&self, member: usize, idx: usize) -> usize {
        idx - self.family.members[member].range.start
    }
}

/// Result of a representative-set selection.
#[derive(Debug, Clone)]
pub struct DampingSelection {
    pub damping: DampingFunction,
    /// Family cylinders for which no triple achieved the bound.
    pub failed_members: Vec<usize>,
    /// Basis indices violating `|L_ab^N h| <= N_J H` in the re-check.
    pub bound_violations: Vec<usize>,
}

impl DampingSelection {
    pub fn ok(&self) -> bool {
        self.failed_members.is_empty() && self.bound_violations.is_empty()
    }
}

/// Builds a representative set `J` so that `|L_ab^N h| <= N_J H` pointwise at
/// the working depth, following the two cases of the selection lemma:
/// a branch with `|h| <= (3/4) H` on its sub-cylinder enters directly, and
/// otherwise a sub-cylinder with a phase gap between the two branch
/// contributions is damped. The final bound is re-checked on every basis
/// word; failures are reported, not fatal (lattice roofs must fail).
pub fn select_j(ctx: &DolgopyatContext, h: &[Complex64], h_dom: &[f64]) -> Result<DampingSelection> {
    let mu0 = ctx.params.mu0;
    let dim = ctx.basis.len();
    if h.len() != dim || h_dom.len() != dim {
        return Err(Error::input("h and H must live on the working basis".to_string()));
    }
    for (z, &dom) in h.iter().zip(h_dom) {
        if z.norm() > dom * (1.0 + 1e-9) {
            return Err(Error::input("|h| <= H must hold pointwise".to_string()));
        }
    }
    let mut omega = vec![1.0; dim];
    // Which triple claimed a basis index: several points of one sub-cylinder
    // may truncate to the same working-depth image, which is fine, but two
    // different triples damping the same image would break the omega bounds.
    let mut claimed = vec![usize::MAX; dim];
    let mut triples = Vec::new();
    let mut failed_members = Vec::new();

    for mi in 0..ctx.family.members.len() {
        let kids = &ctx.children[mi];
        let mut chosen: Option<JTriple> = None;
        // Case 1: a branch dominated by (3/4) H on a whole sub-cylinder.
        'case1: for (ci, (_, kid)) in kids.iter().enumerate() {
            for (ell, evals) in ctx.branch_eval[mi].iter().enumerate() {
                for (i, ev) in evals.iter().enumerate() {
                    let dominated = kid.clone().all(|x| {
                        let off = ctx.member_offset(mi, x);
                        h[ev.target[off]].norm() <= 0.75 * h_dom[ev.target[off]] + 1e-300
                    });
                    if dominated {
                        chosen = Some(JTriple {
                            member: mi,
                            child: ci,
                            ell,
                            branch: i,
                            case: SelectionCase::DominatedBranch,
                        });
                        break 'case1;
                    }
                }
            }
        }
        // Case 2: phase cancellation, verified directly.
        if chosen.is_none() {
            let mut best: Option<(f64, usize, usize, usize)> = None;
            for (ci, (_, kid)) in kids.iter().enumerate() {
                for (ell, evals) in ctx.branch_eval[mi].iter().enumerate() {
                    let [e0, e1] = evals;
                    let mut gap = f64::INFINITY;
                    let mut ok = [true, true];
                    for x in kid.clone() {
                        let off = ctx.member_offset(mi, x);
                        let z0 = e0.amp[off]
                            * Complex64::from_polar(1.0, -ctx.b * e0.tau_n[off])
                            * h[e0.target[off]];
                        let z1 = e1.amp[off]
                            * Complex64::from_polar(1.0, -ctx.b * e1.tau_n[off])
                            * h[e1.target[off]];
                        let psi = (z0 + z1).norm();
                        let g0 = (1.0 - mu0) * e0.amp[off] * h_dom[e0.target[off]]
                            + e1.amp[off] * h_dom[e1.target[off]];
                        let g1 = e0.amp[off] * h_dom[e0.target[off]]
                            + (1.0 - mu0) * e1.amp[off] * h_dom[e1.target[off]];
                        if psi > g0 * (1.0 + 1e-12) {
                            ok[0] = false;
                        }
                        if psi > g1 * (1.0 + 1e-12) {
                            ok[1] = false;
                        }
                        let (n0, n1) = (z0.norm(), z1.norm());
                        let g = if n0 > 0.0 && n1 > 0.0 {
                            let mut d = (z0.arg() - z1.arg()).abs() % (2.0 * std::f64::consts::PI);
                            if d > std::f64::consts::PI {
                                d = 2.0 * std::f64::consts::PI - d;
                            }
                            d
                        } else {
                            std::f64::consts::PI
                        };
                        gap = gap.min(g);
                    }
                    if gap < ctx.params.eps3 {
                        continue;
                    }
                    for (i, &oki) in ok.iter().enumerate() {
                        if oki && best.map_or(true, |(bg, ..)| gap > bg) {
                            best = Some((gap, ci, ell, i));
                        }
                    }
                }
            }
            if let Some((_, ci, ell, i)) = best {
                chosen = Some(JTriple {
                    member: mi,
                    child: ci,
                    ell,
                    branch: i,
                    case: SelectionCase::PhaseCancellation,
                });
            }
        }
        match chosen {
            Some(t) => {
                let ev = &ctx.branch_eval[mi][t.ell][t.branch];
                let kid = ctx.children[mi][t.child].1.clone();
                let id = triples.len();
                for x in kid {
                    let off = ctx.member_offset(mi, x);
                    let tgt = ev.target[off];
                    debug_assert!(
                        claimed[tgt] == usize::MAX || claimed[tgt] == id,
                        "branch images of different triples must not overlap"
                    );
                    claimed[tgt] = id;
                    omega[tgt] = 1.0 - mu0;
                }
                triples.push(t);
            }
            None => failed_members.push(mi),
        }
    }

    // Re-check the advertised bound on every basis word.
    let lh = ctx.l_op.apply_power(h, ctx.params.n_branch)?;
    let damped: Vec<f64> = omega.iter().zip(h_dom).map(|(w, x)| w * x).collect();
    let nh = ctx.m_op.apply_power(&damped, ctx.params.n_branch);
    let bound_violations: Vec<usize> = (0..dim)
        .filter(|&u| lh[u].norm() > nh[u] * (1.0 + 1e-10) + 1e-300)
        .collect();

    Ok(DampingSelection {
        damping: DampingFunction { mu0, triples, omega },
        failed_members,
        bound_violations,
    })
}

/// One row of a dominated iteration: step index, `int (H^(m))^2 dnu`, and
/// `||h^(m)||_0`.
pub type DominatedRow = (usize, f64, f64);

#[derive(Debug, Clone)]
pub struct DominationFailure {
    pub step: usize,
    pub failed_members: Vec<usize>,
    pub witness: Option<usize>,
}

#[derive(Debug)]
pub struct DominatedIteration {
    pub rows: Vec<DominatedRow>,
    pub failure: Option<DominationFailure>,
    /// Case labels of the first step's selection (diagnostic).
    pub first_step_cases: Vec<SelectionCase>,
}

/// Runs `h^(m) = L_ab^{Nm} h0`, `H^(0) = 1`, `H^(m) = N_{J_m} H^(m-1)` with a
/// fresh representative set each step, asserting `|h^(m)| <= H^(m)` pointwise.
pub fn dominated_iteration(
    ctx: &DolgopyatContext,
    steps: usize,
    h0: Option<&[Complex64]>,
) -> Result<DominatedIteration> {
    let dim = ctx.basis.len();
    let mut h: Vec<Complex64> = match h0 {
        Some(v) => v.to_vec(),
        None => vec![Complex64::new(1.0, 0.0); dim],
    };
    // Normalize the input in ||.||_{theta,b}.
    let nb = NormThetaB::new(ctx.basis.model().theta(), ctx.b.abs().max(1.0))?;
    let n0 = norm_theta_b(&ctx.basis, &h, nb);
    if n0 > 0.0 {
        for z in h.iter_mut() {
            *z /= n0;
        }
    }
    let mut h_dom = vec![1.0; dim];
    let integral = |hh: &[f64]| -> f64 { hh.iter().zip(&ctx.nu).map(|(x, w)| x * x * w).sum() };
    let supn = |hh: &[Complex64]| -> f64 { hh.iter().map(|z| z.norm()).fold(0.0, f64::max) };
    let mut rows = vec![(0usize, integral(&h_dom), supn(&h))];
    let mut first_cases = Vec::new();
    for step in 1..=steps {
        let sel = select_j(ctx, &h, &h_dom)?;
        if step == 1 {
            first_cases = sel.damping.triples.iter().map(|t| t.case).collect();
        }
        if !sel.failed_members.is_empty() {
            return Ok(DominatedIteration {
                rows,
                failure: Some(DominationFailure {
                    step,
                    failed_members: sel.failed_members,
                    witness: None,
                }),
                first_step_cases: first_cases,
            });
        }
        h = ctx.l_op.apply_power(&h, ctx.params.n_branch)?;
        h_dom = apply_contraction(&ctx.m_op, &sel.damping.omega, ctx.params.n_branch, &h_dom);
        if let Some(u) = (0..dim).find(|&u| h[u].norm() > h_dom[u] * (1.0 + 1e-10) + 1e-300) {
            return Ok(DominatedIteration {
                rows,
                failure: Some(DominationFailure {
                    step,
                    failed_members: vec![],
                    witness: Some(u),
                }),
                first_step_cases: first_cases,
            });
        }
        rows.push((step, integral(&h_dom), supn(&h)));
    }
    Ok(DominatedIteration {
        rows,
        failure: None,
        first_step_cases: first_cases,
    })
}

#[derive(Debug, Clone)]
pub struct L2Report {
    pub lhs: f64,
    pub rhs: f64,
    pub rho3: f64,
    pub c5: f64,
    pub ok: bool,
}

/// The `L^2(nu)` contraction inequality
/// `int (N_J H)^2 dnu <= rho3 int L_{f^(0)}^N (H^2) dnu` with
/// `rho3 = e^{a0 N T} / (1 + mu0 e^{-N T} / C5)` and `C5 = 4 E^2 / (1 - omega0)`
/// computed from the measure of the damped sub-cylinders.
pub fn l2_contraction_check(
    ctx: &DolgopyatContext,
    damping: &DampingFunction,
    h_dom: &[f64],
    a0: f64,
) -> Result<L2Report> {
    let n = ctx.params.n_branch;
    let t = ctx.t_const;
    // 1 - omega0: worst measure ratio of a damped sub-cylinder in its member.
    let mut min_ratio = f64::INFINITY;
    for tr in &damping.triples {
        let member = &ctx.family.members[tr.member];
        let kid = &ctx.children[tr.member][tr.child].1;
        let num: f64 = kid.clone().map(|i| ctx.nu[i]).sum();
        let den: f64 = member.range.clone().map(|i| ctx.nu[i]).sum();
        if den > 0.0 {
            min_ratio = min_ratio.min(num / den);
        }
    }
    if !min_ratio.is_finite() {
        return Err(Error::input("damping function carries no triples".to_string()));
    }
    let c5 = 4.0 * ctx.params.cone_e * ctx.params.cone_e / min_ratio;
    let rho3 = (a0 * n as f64 * t).exp() / (1.0 + damping.mu0 * (-(n as f64) * t).exp() / c5);

    let nh = apply_contraction(&ctx.m_op, &damping.omega, n, h_dom);
    let lhs: f64 = nh.iter().zip(&ctx.nu).map(|(x, w)| x * x * w).sum();
    let h2: Vec<f64> = h_dom.iter().map(|x| x * x).collect();
    let l0h2 = ctx.m0_op.apply_power(&h2, n);
    let rhs: f64 = l0h2.iter().zip(&ctx.nu).map(|(x, w)| x * w).sum();
    Ok(L2Report {
        lhs,
        rhs,
        rho3,
        c5,
        ok: lhs <= rho3 * rhs * (1.0 + 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn full2() -> SubshiftModel {
        SubshiftModel::full_shift(2, 0.5).unwrap()
    }

    fn series8(m: &SubshiftModel) -> PotentialSpec {
        let s = PotentialSpec::series(m, 1.0, vec![0.0, 1.0], 0.5).unwrap();
        let cf = s.truncate_to_depth(m, 8).unwrap();
        PotentialSpec::table(m, 8, cf.values).unwrap()
    }

    fn unit_roof(m: &SubshiftModel) -> PotentialSpec {
        PotentialSpec::table(m, 1, vec![1.0; m.alphabet_size()]).unwrap()
    }

    fn ctx_nonlattice(b: f64) -> DolgopyatContext {
        let m = full2();
        let zero = PotentialSpec::zero(&m);
        let tau = series8(&m);
        DolgopyatContext::build(&m, &zero, &tau, 0.0, b, 10, DolgopyatParams::default()).unwrap()
    }

    #[test]
    fn family_examples() {
        let m = full2();
        let basis = CylinderBasis::new(&m, 10).unwrap();
        let fam = build_cylinder_family(&basis, 16.0, 1.0, 1.0).unwrap();
        assert_eq!(fam.ell_b, 4);
        assert_eq!(fam.members.len(), 16);
        let fam = build_cylinder_family(&basis, 1024.0, 1.0, 1.0).unwrap();
        assert_eq!(fam.ell_b, 10);

        let gm = SubshiftModel::golden_mean(0.5).unwrap();
        let gb = CylinderBasis::new(&gm, 8).unwrap();
        let fam = build_cylinder_family(&gb, 16.0, 1.0, 1.0).unwrap();
        assert_eq!(fam.ell_b, 4);
        assert_eq!(fam.members.len(), 8);
        // derived-constant window
        assert!(fam.ell_b as f64 <= fam.b_const * 16.0f64.ln() + 1e-12);
        assert!(fam.ell_b as f64 >= 16.0f64.ln() / fam.b_const - 1e-12);
        // below threshold
        assert!(build_cylinder_family(&gb, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn d_metric_cases() {
        let m = full2();
        let basis = CylinderBasis::new(&m, 8).unwrap();
        let fam = build_cylinder_family(&basis, 16.0, 1.0, 1.0).unwrap();
        assert_eq!(d_metric(&fam, &basis, 3, 3), 0.0);
        // same family cylinder, common prefix ell_b + 2 -> theta^2
        let u = basis.index_of(&[0, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let v = basis.index_of(&[0, 0, 0, 0, 0, 0, 1, 0]).unwrap();
        assert_eq!(basis.common_prefix(u, v), 6);
        assert!((d_metric(&fam, &basis, u, v) - 0.25).abs() < 1e-15);
        // different family cylinders -> 1
        let w = basis.index_of(&[1, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(d_metric(&fam, &basis, u, w), 1.0);
        // always <= 1
        for i in (0..basis.len()).step_by(7) {
            for j in (0..basis.len()).step_by(11) {
                assert!(d_metric(&fam, &basis, i, j) <= 1.0);
            }
        }
    }

    #[test]
    fn metric_contracts_under_branches() {
        // D(v,v') = theta^N D(u,u') for eligible pairs pushed through a branch.
        let ctx = ctx_nonlattice(16.0);
        let basis = &ctx.basis;
        let fam = &ctx.family;
        let n = ctx.params.n_branch;
        let mut checked = 0;
        for member in fam.members.iter().take(4) {
            for u in member.range.clone() {
                for v in member.range.clone() {
                    // the truncated images only stay distinct when the pair
                    // splits early enough for the working depth
                    if u == v || basis.common_prefix(u, v) + n >= basis.depth() {
                        continue;
                    }
                    let d_uv = d_metric(fam, basis, u, v);
                    // push through the same admissible N-prepend
                    let w = &ctx.branches.per_member[0].pairs[0].0;
                    let mut wu = w.symbols().to_vec();
                    wu.extend_from_slice(basis.word(u).symbols());
                    let mut wv = w.symbols().to_vec();
                    wv.extend_from_slice(basis.word(v).symbols());
                    let iu = basis.index_of(&wu).unwrap();
                    let iv = basis.index_of(&wv).unwrap();
                    let d_branch = d_metric(fam, basis, iu, iv);
                    assert!((d_branch - 0.5f64.powi(n as i32) * d_uv).abs() < 1e-15);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn temporal_function_cases() {
        let m = full2();
        let basis = CylinderBasis::new(&m, 10).unwrap();
        let fam = build_cylinder_family(&basis, 16.0, 1.0, 1.0).unwrap();

        // depth-1 roof: phi is constant in x (telescoping), separations 0
        let unit = PotentialSpec::table(&m, 1, vec![1.0, 2.0]).unwrap();
        let pairs = select_branch_pairs(&basis, &unit, &fam, 2, 2, 1).unwrap();
        for mb in &pairs.per_member {
            assert_eq!(mb.delta_hat, 0.0);
        }
        let member = &fam.members[0];
        let pair = &pairs.per_member[0].pairs[0];
        let x1 = basis.word(member.range.start).clone();
        let x2 = basis.word(member.range.start + 1).clone();
        let p1 = temporal_function(&unit, pair, 2, &member.word, &x1).unwrap();
        let p2 = temporal_function(&unit, pair, 2, &member.word, &x2).unwrap();
        assert_eq!(p1, p2);

        // depth-2 roof: phi depends only on the first coordinate of x
        let tab2 = PotentialSpec::table(&m, 2, vec![0.9, 1.7, 1.3, 2.9]).unwrap();
        let pair2 = (Word::new(vec![0, 0]), Word::new(vec![1, 0]));
        let member0 = &fam.members[0];
        let mut seen = std::collections::HashMap::new();
        for x in member0.range.clone() {
            let w = basis.word(x);
            let val = temporal_function(&tab2, &pair2, 2, &member0.word, w).unwrap();
            // oracle: direct Birkhoff sums
            let mut w1 = pair2.0.symbols().to_vec();
            w1.extend_from_slice(w.symbols());
            let mut w2 = pair2.1.symbols().to_vec();
            w2.extend_from_slice(w.symbols());
            let oracle = tab2.birkhoff_sum(&Word::new(w1), 2).unwrap()
                - tab2.birkhoff_sum(&Word::new(w2), 2).unwrap();
            assert!((val - oracle).abs() < 1e-14);
            let key = w.symbols()[0];
            if let Some(prev) = seen.insert(key, val) {
                assert_eq!(prev, val);
            }
        }
        // x outside the cylinder is an input error
        assert!(temporal_function(&unit, pair, 2, &fam.members[0].word, basis.word(fam.members[1].range.start)).is_err());
    }

    #[test]
    fn series_roofs_have_constant_temporal_function() {
        // The truncated series roof is linear in the symbol indicators, so the
        // temporal function is constant in x and all separations vanish; the
        // operators still cancel because the constant gap is nonzero.
        let ctx = ctx_nonlattice(16.0);
        for mb in &ctx.branches.per_member {
            assert_eq!(mb.delta_hat, 0.0);
        }
    }

    #[test]
    fn branch_pair_counts() {
        let m = full2();
        let basis = CylinderBasis::new(&m, 10).unwrap();
        let fam = build_cylinder_family(&basis, 16.0, 1.0, 1.0).unwrap();
        let tau = unit_roof(&m);
        // full 2-shift, N = 2: 4 candidate words, 6 pairs scanned
        let all = m.enumerate_words(2).unwrap();
        assert_eq!(all.len(), 4);
        let pairs = select_branch_pairs(&basis, &tau, &fam, 2, 2, 1).unwrap();
        assert_eq!(pairs.per_member[0].pairs.len(), 2);
        // lattice tie-break is lexicographic: first pair is (00, 01)
        assert_eq!(pairs.per_member[0].pairs[0].0.symbols(), &[0, 0]);
        assert_eq!(pairs.per_member[0].pairs[0].1.symbols(), &[0, 1]);
    }

    #[test]
    fn apply_contraction_cases() {
        let ctx = ctx_nonlattice(16.0);
        let dim = ctx.basis.len();
        let one = vec![1.0; dim];
        // mu0 = 0 (omega = 1) equals M_a^N h
        let plain = apply_contraction(&ctx.m_op, &one, ctx.params.n_branch, &one);
        for v in &plain {
            assert!((v - 1.0).abs() < 1e-11);
        }
        // h = 1 with a genuine damping: values in [1 - mu0, 1]
        let h = vec![Complex64::new(0.4, 0.0); dim];
        let hd = vec![1.0; dim];
        let sel = select_j(&ctx, &h, &hd).unwrap();
        let out = apply_contraction(&ctx.m_op, &sel.damping.omega, ctx.params.n_branch, &one);
        for v in &out {
            assert!(*v >= 1.0 - ctx.params.mu0 - 1e-11 && *v <= 1.0 + 1e-11);
        }
        for w in &sel.damping.omega {
            assert!(*w >= 1.0 - ctx.params.mu0 - 1e-15 && *w <= 1.0);
        }
        // random positive h against the two-step oracle
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let hr: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..2.0)).collect();
        let oracle = {
            let damped: Vec<f64> = sel.damping.omega.iter().zip(&hr).map(|(w, x)| w * x).collect();
            let mut v = damped;
            for _ in 0..ctx.params.n_branch {
                v = ctx.m_op.apply(&v);
            }
            v
        };
        let fast = apply_contraction(&ctx.m_op, &sel.damping.omega, ctx.params.n_branch, &hr);
        for (a, b) in oracle.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cone_membership_cases() {
        let ctx = ctx_nonlattice(16.0);
        let dim = ctx.basis.len();
        let e = ctx.params.cone_e;
        let one = vec![1.0; dim];
        assert!(cone_membership(&ctx.basis, &ctx.family, &one, e).member);
        let mut zeroed = one.clone();
        zeroed[3] = 0.0;
        let check = cone_membership(&ctx.basis, &ctx.family, &zeroed, e);
        assert!(!check.member);

        // bump of height E*minD/2 inside one family cylinder: member;
        // height 2E*minD: not a member
        let min_d = 0.5f64.powi((ctx.basis.depth() - 1 - ctx.family.ell_b) as i32);
        let mut bump = one.clone();
        bump[ctx.family.members[0].range.start] = 1.0 + e * min_d / 2.0;
        assert!(cone_membership(&ctx.basis, &ctx.family, &bump, e).member);
        let mut big = one.clone();
        big[ctx.family.members[0].range.start] = 1.0 + 2.0 * e * min_d;
        let check = cone_membership(&ctx.basis, &ctx.family, &big, e);
        assert!(!check.member);
        assert!(check.witness.is_some());
    }

    #[test]
    fn select_j_cases() {
        let ctx = ctx_nonlattice(20.0);
        let dim = ctx.basis.len();
        // h = 0: any representative set works, case 1 everywhere
        let zero = vec![Complex64::new(0.0, 0.0); dim];
        let hd = vec![1.0; dim];
        let sel = select_j(&ctx, &zero, &hd).unwrap();
        assert!(sel.ok());
        assert_eq!(sel.damping.triples.len(), ctx.family.members.len());
        assert!(sel
            .damping
            .triples
            .iter()
            .all(|t| t.case == SelectionCase::DominatedBranch));

        // h = H = 1 on the non-lattice roof at large b: phase cancellation
        let one = vec![Complex64::new(1.0, 0.0); dim];
        let sel = select_j(&ctx, &one, &hd).unwrap();
        assert!(sel.ok(), "failed members: {:?}", sel.failed_members);
        assert!(sel
            .damping
            .triples
            .iter()
            .all(|t| t.case == SelectionCase::PhaseCancellation));

        // lattice roof: selection must fail at h = H = 1
        let m = full2();
        let zero_pot = PotentialSpec::zero(&m);
        let unit = unit_roof(&m);
        let lattice =
            DolgopyatContext::build(&m, &zero_pot, &unit, 0.0, 20.0, 10, DolgopyatParams::default())
                .unwrap();
        let sel = select_j(&lattice, &one, &hd).unwrap();
        assert!(!sel.failed_members.is_empty());
    }

    #[test]
    fn dominated_iteration_contracts_on_non_lattice() {
        let ctx = ctx_nonlattice(20.0);
        let run = dominated_iteration(&ctx, 8, None).unwrap();
        assert!(run.failure.is_none());
        assert_eq!(run.rows.len(), 9);
        assert!((run.rows[0].1 - 1.0).abs() < 1e-9);
        for w in run.rows.windows(2) {
            assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12));
        }
        assert!(run.rows.last().unwrap().1 < run.rows[0].1);
    }

    #[test]
    fn dominated_iteration_fails_on_lattice() {
        let m = full2();
        let ctx = DolgopyatContext::build(
            &m,
            &PotentialSpec::zero(&m),
            &unit_roof(&m),
            0.0,
            20.0,
            10,
            DolgopyatParams::default(),
        )
        .unwrap();
        let run = dominated_iteration(&ctx, 8, None).unwrap();
        assert!(run.failure.is_some());
    }

    #[test]
    fn cone_preservation_and_l2() {
        let ctx = ctx_nonlattice(20.0);
        let dim = ctx.basis.len();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut cone_viol = 0;
        let mut l2_viol = 0;
        for _ in 0..100 {
            let h_dom: Vec<f64> = (0..dim)
                .map(|_| (0.2 * (2.0 * rng.gen::<f64>() - 1.0)).exp())
                .collect();
            assert!(cone_membership(&ctx.basis, &ctx.family, &h_dom, ctx.params.cone_e).member);
            let h: Vec<Complex64> = h_dom
                .iter()
                .map(|&d| {
                    Complex64::from_polar(d * rng.gen::<f64>(), 2.0 * std::f64::consts::PI * rng.gen::<f64>())
                })
                .collect();
            let sel = select_j(&ctx, &h, &h_dom).unwrap();
            assert!(sel.failed_members.is_empty());
            let nh = apply_contraction(&ctx.m_op, &sel.damping.omega, ctx.params.n_branch, &h_dom);
            if !cone_membership(&ctx.basis, &ctx.family, &nh, ctx.params.cone_e).member {
                cone_viol += 1;
            }
            let rep = l2_contraction_check(&ctx, &sel.damping, &h_dom, 0.0).unwrap();
            assert!(rep.rho3 < 1.0);
            if !rep.ok {
                l2_viol += 1;
            }
        }
        assert_eq!(cone_viol, 0);
        assert_eq!(l2_viol, 0);
    }

    #[test]
    fn l2_reduces_to_cauchy_schwarz_at_mu0_zero() {
        let ctx = ctx_nonlattice(16.0);
        let dim = ctx.basis.len();
        let h = vec![Complex64::new(0.3, 0.0); dim];
        let hd = vec![1.0; dim];
        let sel = select_j(&ctx, &h, &hd).unwrap();
        let mut damping = sel.damping.clone();
        damping.mu0 = 0.0;
        for w in damping.omega.iter_mut() {
            *w = 1.0;
        }
        let rep = l2_contraction_check(&ctx, &damping, &hd, 0.0).unwrap();
        assert!(rep.ok);
        assert!(rep.lhs <= rep.rhs * (1.0 + 1e-12));
    }
}
