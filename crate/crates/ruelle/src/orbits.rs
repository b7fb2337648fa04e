//! Primitive periodic orbits, flow periods, the dynamical zeta function,
//! prime-orbit counting against `li(e^{h_T lambda})`, and weighted counting.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::rpf::solve_p_f;
use crate::subshift::{SubshiftModel, Word};

/// Default ceiling on the symbolic enumeration length.
pub const ENUMERATION_CEILING: usize = 26;

/// A primitive periodic orbit, identified by its Lyndon representative.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub word: Word,
    pub length: usize,
    /// Flow period: Birkhoff sum of the roof around the cycle.
    pub period: f64,
}

#[derive(Debug, Clone)]
pub struct OrbitTable {
    /// Primitive orbits up to the symbolic length cap, sorted by period.
    pub orbits: Vec<PeriodicOrbit>,
    /// Primitive orbit counts per symbolic length (index 0 = length 1).
    pub primitive_counts: Vec<u64>,
    /// Periodic point counts `N_n = trace(A^n)` per length.
    pub point_counts: Vec<u128>,
    pub n_max: usize,
    pub tau0: f64,
}

/// Lyndon words over `k` symbols up to length `n_max`, via Duval's successor
/// iteration, filtered by path and cyclic admissibility.
fn lyndon_cycles(model: &SubshiftModel, n_max: usize) -> Vec<Word> {
    let k = model.alphabet_size() as u8;
    let mut out = Vec::new();
    let mut w: Vec<u8> = vec![0];
    loop {
        let admissible = w.windows(2).all(|p| model.allowed(p[0], p[1]))
            && model.allowed(*w.last().unwrap(), w[0]);
        if admissible {
            out.push(Word::new(w.clone()));
        }
        // Duval successor
        let m = w.len();
        while w.len() < n_max {
            w.push(w[w.len() - m]);
        }
        while let Some(&last) = w.last() {
            if last == k - 1 {
                w.pop();
            } else {
                break;
            }
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => return out,
        }
    }
}

/// Birkhoff sum of `tau` around the cycle, on the periodic extension.
pub fn orbit_period(orbit_word: &Word, tau: &PotentialSpec) -> Result<f64> {
    tau.cyclic_birkhoff_sum(orbit_word.symbols())
}

/// Enumerates all primitive cyclically-admissible orbits of symbolic length
/// `1..=n_max`, sorted by flow period.
pub fn enumerate_primitive_orbits(
    model: &SubshiftModel,
    tau: &PotentialSpec,
    n_max: usize,
    ceiling: usize,
) -> Result<OrbitTable> {
    if n_max < 1 {
        return Err(Error::input("n_max must be >= 1".to_string()));
    }
    if n_max > ceiling {
        let cost = (model.alphabet_size() as f64).powi(n_max as i32);
        return Err(Error::input(format!(
            "enumeration to length {n_max} exceeds the ceiling {ceiling} \
             (about {cost:.1e} raw words); raise the ceiling explicitly if intended"
        )));
    }
    let tau0 = crate::potential::validate_roof(model, tau, tau.table_depth())?;
    let mut orbits = Vec::new();
    let mut primitive_counts = vec![0u64; n_max];
    for w in lyndon_cycles(model, n_max) {
        let period = orbit_period(&w, tau)?;
        primitive_counts[w.len() - 1] += 1;
        orbits.push(PeriodicOrbit {
            length: w.len(),
            period,
            word: w,
        });
    }
    orbits.sort_by(|a, b| a.period.partial_cmp(&b.period).unwrap().then(a.word.cmp(&b.word)));
    let point_counts = (1..=n_max).map(|n| model.periodic_point_count(n)).collect();
    Ok(OrbitTable {
        orbits,
        primitive_counts,
        point_counts,
        n_max,
        tau0,
    })
}

/// Topological entropy of the suspension flow: the root of `Pr(-s tau) = 0`.
pub fn entropy_h_t(model: &SubshiftModel, tau: &PotentialSpec, t: usize) -> Result<f64> {
    let zero = PotentialSpec::zero(model);
    solve_p_f(model, &zero, tau, t)
}

/// The offset logarithmic integral `li(x) = int_2^x du / log u`, by adaptive
/// Simpson quadrature to absolute tolerance 1e-10; negative for `x < 2`.
pub fn li(x: f64) -> Result<f64> {
    if x <= 1.0 {
        return Err(Error::domain(format!("li(x) needs x > 1, got {x}")));
    }
    if (x - 2.0).abs() < f64::EPSILON {
        return Ok(0.0);
    }
    let integrand = |u: f64| 1.0 / u.ln();
    let (a, b, sign) = if x >= 2.0 { (2.0, x, 1.0) } else { (x, 2.0, -1.0) };
    Ok(sign * adaptive_simpson(&integrand, a, b, 1e-10, 60))
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: usize) -> f64 {
    let whole = simpson(f, a, b);
    rec_simpson(f, a, b, eps, whole, depth)
}

fn rec_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64, whole: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        return left + right + (left + right - whole) / 15.0;
    }
    rec_simpson(f, a, m, 0.5 * eps, left, depth - 1)
        + rec_simpson(f, m, b, 0.5 * eps, right, depth - 1)
}

/// `pi(lambda)`: primitive orbits with period at most `lambda` (ties counted).
pub fn count_pi(table: &OrbitTable, lambda: f64) -> Result<usize> {
    if (table.n_max as f64) * table.tau0 < lambda {
        return Err(Error::input(format!(
            "orbit table complete only up to period {}; enumerate to larger n_max for lambda = {lambda}",
            table.n_max as f64 * table.tau0
        )));
    }
    Ok(table.orbits.partition_point(|o| o.period <= lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZetaMode {
    OrbitProduct,
    TraceLog,
}

impl std::fmt::Display for ZetaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ZetaMode::OrbitProduct => write!(f, "orbit-product"),
            ZetaMode::TraceLog => write!(f, "trace-log"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZetaValue {
    pub value: Complex64,
    /// Estimated bound on the remaining truncation error of `value`.
    pub tail_bound: f64,
    pub mode: ZetaMode,
    /// Set when `Re(s) <= h_T` so the truncation tails do not converge; the
    /// value is then only a partial aggregate.
    pub diverged: bool,
}

/// Weighted transition matrix whose `n`-th power traces give the period-`n`
/// sums `Z_n(s) = sum over sigma^n-fixed points of e^{-s tau_n}`.
struct LiftedMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl LiftedMatrix {
    fn build(model: &SubshiftModel, tau: &PotentialSpec, s: Complex64) -> Result<Self> {
        let d = tau.table_depth().max(1);
        let states = model.enumerate_words(d.max(1))?;
        let dim = states.len();
        if dim > 64 {
            return Err(Error::input(format!(
                "trace-log lift has dimension {dim} > 64; truncate the roof or use orbit-product"
            )));
        }
        let index: std::collections::HashMap<&[u8], usize> = states
            .iter()
            .enumerate()
            .map(|(i, w)| (w.symbols(), i))
            .collect();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, u) in states.iter().enumerate() {
            let last = *u.symbols().last().unwrap();
            for c in model.transition_row(last) {
                let mut wsym = u.symbols().to_vec();
                wsym.push(c);
                let tval = tau.evaluate(&Word::new(wsym.clone()))?;
                let j = index[&wsym[1..]];
                data[i * dim + j] += (-s * tval).exp();
            }
        }
        Ok(LiftedMatrix { dim, data })
    }

    fn mul(&self, other: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for l in 0..n {
                let a = other[i * n + l];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * self.data[l * n + j];
                }
            }
        }
        out
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|j| self.data[i * n + j] * v[j]).sum())
            .collect()
    }

    /// Dominant eigenvalue by complex power iteration with Rayleigh quotients.
    fn leading_eigenvalue(&self) -> Option<Complex64> {
        let n = self.dim;
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0, 0.3 * (i as f64 + 1.0)))
            .collect();
        let mut lambda = Complex64::new(0.0, 0.0);
        let mut streak = 0;
        for _ in 0..20_000 {
            let w = self.apply(&v);
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return None;
            }
            let num: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            let den: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let next = num / den;
            let rel = (next - lambda).norm() / next.norm().max(1e-300);
            v = w.iter().map(|z| z / norm).collect();
            lambda = next;
            if rel < 1e-14 {
                streak += 1;
                if streak > 5 {
                    return Some(lambda);
                }
            } else {
                streak = 0;
            }
        }
        None
    }

    /// Modulus of the subleading eigenvalue, estimated by deflated power
    /// iteration; used only for reported tail bounds.
    fn subleading_modulus(&self, lambda: Complex64) -> f64 {
        let n = self.dim;
        if n == 1 {
            return 0.0;
        }
        // right/left eigenvectors by power iteration
        let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, 0.1 * i as f64)).collect();
        for _ in 0..500 {
            let w = self.apply(&v);
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|z| z / norm).collect();
        }
        let mut u: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, -0.1 * i as f64)).collect();
        for _ in 0..500 {
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                for j in 0..n {
                    w[j] += self.data[i * n + j] * u[i];
                }
            }
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            u = w.iter().map(|z| z / norm).collect();
        }
        let uv: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        if uv.norm() < 1e-12 {
            return lambda.norm();
        }
        // deflated iterate: x -> Bx - lambda v (u* x)/(u* v)
        let mut x: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.3, 1.0 - 0.2 * i as f64)).collect();
        let mut rate = 0.0;
        for _ in 0..500 {
            let bx = self.apply(&x);
            let ux: Complex64 = u.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
            let coef = lambda * ux / uv;
            let y: Vec<Complex64> = bx.iter().zip(&v).map(|(b, vv)| b - coef * vv).collect();
            let norm: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            rate = norm / x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            x = y.iter().map(|z| z / norm).collect();
        }
        rate.min(lambda.norm())
    }
}

/// Truncated Ruelle zeta function.
///
/// Orbit-product mode multiplies `(1 - e^{-s l(gamma)})^{-1}` over the
/// enumerated primitive orbits. Trace-log mode sums `Z_n / n` for
/// `n <= n_max` with `Z_n` computed exactly by powers of the weighted
/// transition matrix, then completes the tail with the dominant-eigenvalue
/// geometric series; the reported bound covers what remains.
pub fn zeta_truncated(
    model: &SubshiftModel,
    tau: &PotentialSpec,
    s: Complex64,
    n_max: usize,
    mode: ZetaMode,
    ceiling: usize,
) -> Result<ZetaValue> {
    let real_lift = LiftedMatrix::build(model, tau, Complex64::new(s.re, 0.0))?;
    let lambda_r = real_lift
        .leading_eigenvalue()
        .map(|z| z.re)
        .unwrap_or(f64::INFINITY);
    let diverged = lambda_r >= 1.0;
    match mode {
        ZetaMode::TraceLog => {
            let lift = LiftedMatrix::build(model, tau, s)?;
            let mut log_sum = Complex64::new(0.0, 0.0);
            let mut power = lift.data.clone();
            for n in 1..=n_max {
                let trace: Complex64 = (0..lift.dim).map(|i| power[i * lift.dim + i]).sum();
                log_sum += trace / n as f64;
                if n < n_max {
                    power = lift.mul(&power);
                }
            }
            if diverged {
                return Ok(ZetaValue {
                    value: log_sum.exp(),
                    tail_bound: f64::INFINITY,
                    mode,
                    diverged,
                });
            }
            let (tail, bound) = match lift.leading_eigenvalue() {
                Some(l1) if l1.norm() < 1.0 => {
                    let mut partial = Complex64::new(0.0, 0.0);
                    let mut p = Complex64::new(1.0, 0.0);
                    for n in 1..=n_max {
                        p *= l1;
                        partial += p / n as f64;
                    }
                    let tail = -(Complex64::new(1.0, 0.0) - l1).ln() - partial;
                    let l2 = lift.subleading_modulus(l1).min(lambda_r);
                    let rem = if l2 < 1.0 && l2 > 0.0 {
                        (lift.dim - 1) as f64 * l2.powi(n_max as i32 + 1)
                            / ((n_max + 1) as f64 * (1.0 - l2))
                    } else if l2 == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    (tail, rem)
                }
                _ => {
                    // no reliable completion: bound the whole tail instead
                    let rem = lambda_r.powi(n_max as i32 + 1) / ((n_max + 1) as f64 * (1.0 - lambda_r));
                    (Complex64::new(0.0, 0.0), rem)
                }
            };
            let value = (log_sum + tail).exp();
            Ok(ZetaValue {
                value,
                tail_bound: value.norm() * (bound.exp_m1().abs() + 1e-13),
                mode,
                diverged,
            })
        }
        ZetaMode::OrbitProduct => {
            let table = enumerate_primitive_orbits(model, tau, n_max, ceiling)?;
            zeta_orbit_product(model, tau, &table, s, n_max)
        }
    }
}

/// `ln(1 + w)` with full relative accuracy for small `|w|`.
fn ln_1p_complex(w: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let u = one + w;
    if u == one {
        w
    } else {
        u.ln() * w / (u - one)
    }
}

/// Orbit-product zeta from a prebuilt table (reusable across `s` values).
///
/// The product is evaluated as a Kahan-compensated sum of `-ln(1 - e^{-s l})`
/// so that round-off stays near machine precision even over millions of
/// factors; the reported bound covers the truncation tail plus a small
/// rounding allowance.
pub fn zeta_orbit_product(
    model: &SubshiftModel,
    tau: &PotentialSpec,
    table: &OrbitTable,
    s: Complex64,
    n_max: usize,
) -> Result<ZetaValue> {
    let mode = ZetaMode::OrbitProduct;
    let real_lift = LiftedMatrix::build(model, tau, Complex64::new(s.re, 0.0))?;
    let lambda_r = real_lift
        .leading_eigenvalue()
        .map(|z| z.re)
        .unwrap_or(f64::INFINITY);
    let diverged = lambda_r >= 1.0;

    let mut log_sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for orbit in &table.orbits {
        if orbit.length > n_max {
            continue;
        }
        let term = -ln_1p_complex(-(-s * orbit.period).exp());
        // Kahan compensation, componentwise.
        let y = term - comp;
        let t = log_sum + y;
        comp = (t - log_sum) - y;
        log_sum = t;
    }
    let value = log_sum.exp();
    if diverged {
        return Ok(ZetaValue {
            value,
            tail_bound: f64::INFINITY,
            mode,
            diverged,
        });
    }
    // Truncation tail over the orbits beyond n_max: bounded by the remaining
    // trace sums (which also absorb all higher powers).
    let mut partial = 0.0;
    let mut powr: Vec<Complex64> = real_lift.data.clone();
    for n in 1..=n_max {
        let trace: f64 = (0..real_lift.dim)
            .map(|i| powr[i * real_lift.dim + i].re)
            .sum();
        partial += trace / n as f64;
        if n < n_max {
            powr = real_lift.mul(&powr);
        }
    }
    let log_tail = (-(1.0 - lambda_r).ln() - partial).max(0.0);
    Ok(ZetaValue {
        value,
        tail_bound: value.norm() * (log_tail.exp_m1() + 1e-13),
        mode,
        diverged,
    })
}

#[derive(Debug, Clone)]
pub struct WeightedCount {
    pub value: f64,
    /// The asymptotic companion `li(e^{Pr(F) T})`, when `e^{Pr(F) T} > 1`.
    pub li_companion: Option<f64>,
    pub pr_f: f64,
}

/// `pi_F(T) = sum over l(gamma) <= T of e^{F-sum around gamma}`, with the
/// companion `li(e^{Pr(F) T})` computed from the suspension pressure.
pub fn weighted_pi_f(
    model: &SubshiftModel,
    table: &OrbitTable,
    f: &PotentialSpec,
    tau: &PotentialSpec,
    t_depth: usize,
    cap: f64,
) -> Result<WeightedCount> {
    if (table.n_max as f64) * table.tau0 < cap {
        return Err(Error::input(format!(
            "orbit table complete only up to period {}; enumerate further for T = {cap}",
            table.n_max as f64 * table.tau0
        )));
    }
    let mut value = 0.0;
    for orbit in &table.orbits {
        if orbit.period > cap {
            break;
        }
        value += f.cyclic_birkhoff_sum(orbit.word.symbols())?.exp();
    }
    let pr_f = solve_p_f(model, f, tau, t_depth)?;
    let x = (pr_f * cap).exp();
    let li_companion = if x > 1.0 { Some(li(x)?) } else { None };
    Ok(WeightedCount {
        value,
        li_companion,
        pr_f,
    })
}
