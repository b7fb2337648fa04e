//! Command implementations: each maps a config onto library operations and
//! emits CSV artifacts plus a key-value summary record.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rayon::prelude::*;

use ruelle::complex_transfer::{contraction_profile, ComplexTransferOperator, profile_for};
use ruelle::contraction::{
    dominated_iteration, select_j, DolgopyatContext, DolgopyatParams, SelectionCase,
};
use ruelle::orbits::{
    count_pi, entropy_h_t, enumerate_primitive_orbits, li, zeta_orbit_product, zeta_truncated,
    ZetaMode,
};
use ruelle::rpf::{
    build_transfer_operator, gibbs_cylinder_measure, leading_triple, normalize_potential,
    normalized_operator, solve_p_f,
};
use ruelle::subshift::Cylinder;
use ruelle::suspension::{decay_fit, CorrelationOptions, SuspensionModel};

use crate::config::RunConfig;
use crate::output::{write_csv, write_summary};
use crate::CliError;

/// Run metadata: the summary record every command produces.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub command: String,
    pub config_hash: String,
    pub timestamp: u64,
    pub metrics: Vec<(String, String)>,
    pub artifacts: Vec<PathBuf>,
}

impl ResultRecord {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        ResultRecord {
            command: command.to_string(),
            config_hash: cfg.hash.clone(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            metrics: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.metrics.push((key.to_string(), value.to_string()));
    }
}

fn dolgopyat_params(cfg: &RunConfig) -> DolgopyatParams {
    let p = &cfg.raw.params;
    DolgopyatParams {
        n_branch: p.n_branch,
        ell0: p.ell0,
        mu0: p.mu0,
        cone_e: p.cone_e,
        epsilon1: p.epsilon1,
        eps3: p.eps3,
        sub_colength: p.sub_colength,
        b0: p.b0,
    }
}

/// Dispatches a named command. Exit-code mapping is the caller's concern.
pub fn run_command(cfg: &RunConfig, command: &str) -> Result<ResultRecord, CliError> {
    std::fs::create_dir_all(&cfg.outdir)
        .map_err(|e| CliError::Config(format!("cannot create output dir: {e}")))?;
    match command {
        "pressure" => cmd_pressure(cfg),
        "gibbs" => cmd_gibbs(cfg),
        "normalize" => cmd_normalize(cfg),
        "scan-b" => cmd_scan_b(cfg),
        "contraction" => cmd_contraction(cfg),
        "dolgopyat-check" => cmd_dolgopyat_check(cfg),
        "iterate" => cmd_iterate(cfg),
        "correlate" => cmd_correlate(cfg),
        "decay" => cmd_decay(cfg),
        "orbits" => cmd_orbits(cfg),
        "zeta" => cmd_zeta(cfg),
        "poc" => cmd_poc(cfg),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}

fn cmd_pressure(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("pressure", cfg);
    let t = cfg
        .raw
        .params
        .depth
        .max(cfg.potential.table_depth())
        .max(cfg.roof.as_ref().map_or(1, |r| r.table_depth()));
    let op = build_transfer_operator(&cfg.model, &cfg.potential, t)?;
    let rpf = leading_triple(&op)?;
    rec.push("pressure", format!("{:.15e}", rpf.pressure));
    rec.push("lambda", format!("{:.15e}", rpf.lambda));
    rec.push("depth", t);
    let mut rows = vec![
        vec!["pressure".to_string(), format!("{:.15e}", rpf.pressure)],
        vec!["lambda".to_string(), format!("{:.15e}", rpf.lambda)],
    ];
    if let Ok(roof) = cfg.roof() {
        let p_f = solve_p_f(&cfg.model, &cfg.potential, roof, t)?;
        rec.push("p_f", format!("{:.15e}", p_f));
        rows.push(vec!["p_f".to_string(), format!("{:.15e}", p_f)]);
    }
    let csv = cfg.outdir.join("pressure.csv");
    write_csv(&csv, &["quantity", "value"], rows.into_iter())?;
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_gibbs(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("gibbs", cfg);
    let depth = cfg.raw.params.gibbs_depth;
    let t = depth
        .max(cfg.potential.table_depth())
        .max(cfg.roof.as_ref().map_or(1, |r| r.table_depth()));
    // zero-pressure normalization when a roof is present, plain potential otherwise
    let (g_label, rpf) = match cfg.roof.as_ref() {
        Some(roof) => {
            let norm = normalize_potential(&cfg.model, &cfg.potential, roof, 0.0, t)?;
            ("f - P_f tau", norm.rpf)
        }
        None => {
            let op = build_transfer_operator(&cfg.model, &cfg.potential, t)?;
            ("f", leading_triple(&op)?)
        }
    };
    let mut rows = Vec::new();
    for w in cfg.model.enumerate_words(depth)? {
        let nu = gibbs_cylinder_measure(&rpf, &Cylinder::new(w.clone()))?;
        rows.push(vec![w.to_string(), format!("{:.15e}", nu)]);
    }
    let csv = cfg.outdir.join("gibbs.csv");
    write_csv(&csv, &["word", "nu"], rows.into_iter())?;
    rec.push("depth", depth);
    rec.push("potential", g_label);
    rec.push("pressure", format!("{:.15e}", rpf.pressure));
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_normalize(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("normalize", cfg);
    let roof = cfg.roof()?;
    let t = cfg.raw.params.depth;
    let a = cfg.raw.params.a;
    let norm = normalize_potential(&cfg.model, &cfg.potential, roof, a, t)?;
    let op = normalized_operator(&cfg.model, &norm, t)?;
    let one = vec![1.0; op.dim()];
    let dev = op
        .apply(&one)
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0f64, f64::max);
    let words = cfg.model.enumerate_words(t + 1)?;
    let rows = words
        .iter()
        .zip(&norm.f_a.values)
        .map(|(w, v)| vec![w.to_string(), format!("{:.15e}", v)]);
    let csv = cfg.outdir.join("normalize.csv");
    write_csv(&csv, &["word", "f_a"], rows)?;
    rec.push("a", a);
    rec.push("p_f", format!("{:.15e}", norm.p_f));
    rec.push("lambda_a", format!("{:.15e}", norm.lambda_a));
    rec.push("stochasticity_deviation", format!("{:.3e}", dev));
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_scan_b(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("scan-b", cfg);
    let roof = cfg.roof()?;
    let g = &cfg.raw.grids;
    let t = cfg.raw.params.depth;
    let a = cfg.raw.params.a;
    let m_max = g.m_max;
    let norm = normalize_potential(&cfg.model, &cfg.potential, roof, a, t)?;
    let bs: Vec<f64> = (0..g.b_steps)
        .map(|i| {
            if g.b_steps == 1 {
                g.b_min
            } else {
                g.b_min + (g.b_max - g.b_min) * i as f64 / (g.b_steps - 1) as f64
            }
        })
        .collect();
    let results: Vec<Result<Vec<String>, CliError>> = bs
        .par_iter()
        .map(|&b| {
            let op = ComplexTransferOperator::build(&cfg.model, &norm, roof, b, t)?;
            let prof = profile_for(&op, m_max, None)?;
            let last = prof.rows.last().unwrap();
            Ok(vec![
                format!("{b}"),
                format!("{:.15e}", prof.rho_hat),
                format!("{:.15e}", last.1),
                format!("{m_max}"),
                format!("{t}"),
            ])
        })
        .collect();
    let rows: Vec<Vec<String>> = results.into_iter().collect::<Result<_, _>>()?;
    let csv = cfg.outdir.join("scan_b.csv");
    write_csv(&csv, &["b", "rho_hat", "final_norm", "m_max", "depth"], rows.into_iter())?;
    rec.push("rows", g.b_steps);
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_contraction(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("contraction", cfg);
    let roof = cfg.roof()?;
    let p = &cfg.raw.params;
    let prof = contraction_profile(
        &cfg.model,
        &cfg.potential,
        roof,
        p.a,
        p.b,
        p.depth,
        cfg.raw.grids.m_max,
        None,
    )?;
    let rows = prof
        .rows
        .iter()
        .map(|(m, n, env)| vec![format!("{m}"), format!("{:.15e}", n), format!("{:.15e}", env)]);
    let csv = cfg.outdir.join("contraction.csv");
    write_csv(&csv, &["m", "norm", "envelope"], rows)?;
    rec.push("b", p.b);
    rec.push("rho_hat", format!("{:.15e}", prof.rho_hat));
    rec.push("depth", prof.depth);
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_dolgopyat_check(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("dolgopyat-check", cfg);
    let roof = cfg.roof()?;
    let p = &cfg.raw.params;
    let ctx = DolgopyatContext::build(
        &cfg.model,
        &cfg.potential,
        roof,
        p.a,
        p.b,
        p.depth,
        dolgopyat_params(cfg),
    )?;
    // canonical diagnostic state: h = H = 1
    let dim = ctx.basis.len();
    let h = vec![Complex64::new(1.0, 0.0); dim];
    let h_dom = vec![1.0; dim];
    let sel = select_j(&ctx, &h, &h_dom)?;
    let mut rows = Vec::new();
    for (mi, member) in ctx.family.members.iter().enumerate() {
        let triple = sel.damping.triples.iter().find(|t| t.member == mi);
        let (case, words) = match triple {
            Some(t) => {
                let pair = &ctx.branches.per_member[mi].pairs[t.ell];
                let w = if t.branch == 0 { &pair.0 } else { &pair.1 };
                let other = if t.branch == 0 { &pair.1 } else { &pair.0 };
                (
                    match t.case {
                        SelectionCase::DominatedBranch => "1",
                        SelectionCase::PhaseCancellation => "2",
                    },
                    format!("{w}|{other}"),
                )
            }
            None => ("fail", String::new()),
        };
        rows.push(vec![
            format!("{mi}"),
            format!("{}", ctx.family.ell_b),
            format!("{:.15e}", ctx.branches.per_member[mi].delta_hat),
            words,
            case.to_string(),
        ]);
        let _ = member;
    }
    let csv = cfg.outdir.join("dolgopyat_check.csv");
    write_csv(
        &csv,
        &["m_index", "ell_b", "delta_hat", "branch_words", "case"],
        rows.into_iter(),
    )?;
    rec.push("b", p.b);
    rec.push("members", ctx.family.members.len());
    rec.push("failed_members", sel.failed_members.len());
    rec.push("bound_violations", sel.bound_violations.len());
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_iterate(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("iterate", cfg);
    let roof = cfg.roof()?;
    let p = &cfg.raw.params;
    let ctx = DolgopyatContext::build(
        &cfg.model,
        &cfg.potential,
        roof,
        p.a,
        p.b,
        p.depth,
        dolgopyat_params(cfg),
    )?;
    let run = dominated_iteration(&ctx, cfg.raw.grids.iterate_steps, None)?;
    let rows = run
        .rows
        .iter()
        .map(|(m, h2, sup)| vec![format!("{m}"), format!("{:.15e}", h2), format!("{:.15e}", sup)]);
    let csv = cfg.outdir.join("iterate.csv");
    write_csv(&csv, &["m", "h2_integral", "sup_h"], rows)?;
    rec.push("b", p.b);
    rec.push("steps_completed", run.rows.len() - 1);
    match &run.failure {
        Some(f) => {
            rec.push("failure_step", f.step);
            rec.push(
                "failure_kind",
                if f.witness.is_some() { "domination" } else { "j-selection" },
            );
            rec.push("note", "failure is the expected outcome for lattice roofs");
        }
        None => rec.push("failure_step", "none"),
    }
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn build_suspension(cfg: &RunConfig) -> Result<SuspensionModel, CliError> {
    let roof = cfg.roof()?;
    Ok(SuspensionModel::build(
        &cfg.model,
        &cfg.potential,
        roof,
        cfg.raw.params.depth,
    )?)
}

fn correlate_series(cfg: &RunConfig) -> Result<Vec<(f64, f64, String, usize)>, CliError> {
    let susp = build_suspension(cfg)?;
    let obs_a = cfg.observable(&cfg.raw.observables.a_base, &cfg.raw.observables.a_height)?;
    let obs_b = cfg.observable(&cfg.raw.observables.b_base, &cfg.raw.observables.b_height)?;
    let g = &cfg.raw.grids;
    let opts = CorrelationOptions {
        estimator: None,
        mc_samples: cfg.raw.params.mc_samples,
        seed: cfg.raw.params.seed,
        ..Default::default()
    };
    let ts: Vec<f64> = (0..g.t_steps)
        .map(|i| {
            if g.t_steps == 1 {
                0.0
            } else {
                g.t_max * i as f64 / (g.t_steps - 1) as f64
            }
        })
        .collect();
    let pts: Vec<Result<(f64, f64, String, usize), CliError>> = ts
        .par_iter()
        .map(|&t| {
            let c = susp.correlation(&obs_a, &obs_b, t, &opts)?;
            Ok((t, c.value, format!("{:?}", c.estimator), c.samples))
        })
        .collect();
    pts.into_iter().collect()
}

fn cmd_correlate(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("correlate", cfg);
    let series = correlate_series(cfg)?;
    let rows = series.iter().map(|(t, c, est, n)| {
        vec![format!("{t}"), format!("{:.15e}", c), est.clone(), format!("{n}")]
    });
    let csv = cfg.outdir.join("correlate.csv");
    write_csv(&csv, &["t", "C(t)", "estimator", "samples"], rows)?;
    rec.push("points", series.len());
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_decay(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("decay", cfg);
    let series = correlate_series(cfg)?;
    let pairs: Vec<(f64, f64)> = series.iter().map(|(t, c, _, _)| (*t, *c)).collect();
    let fit = decay_fit(&pairs, cfg.raw.grids.floor)?;
    let rows = series.iter().map(|(t, c, est, n)| {
        vec![format!("{t}"), format!("{:.15e}", c), est.clone(), format!("{n}")]
    });
    let csv = cfg.outdir.join("correlate.csv");
    write_csv(&csv, &["t", "C(t)", "estimator", "samples"], rows)?;
    rec.push("c", format!("{:.8e}", fit.c));
    rec.push("quality", format!("{:.6}", fit.quality));
    rec.push("floor", format!("{:e}", cfg.raw.grids.floor));
    rec.push("points_used", fit.used);
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_orbits(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("orbits", cfg);
    let roof = cfg.roof()?;
    let p = &cfg.raw.params;
    let table = enumerate_primitive_orbits(&cfg.model, roof, p.n_max, p.ceiling)?;
    let rows = table.orbits.iter().map(|o| {
        vec![format!("{}", o.length), format!("{:.15e}", o.period), o.word.to_string()]
    });
    let csv = cfg.outdir.join("orbits.csv");
    write_csv(&csv, &["length", "period", "word"], rows)?;
    rec.push("orbits", table.orbits.len());
    rec.push("n_max", p.n_max);
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_zeta(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("zeta", cfg);
    let roof = cfg.roof()?;
    let p = &cfg.raw.params;
    let g = &cfg.raw.grids;
    let s = Complex64::new(g.s_re, g.s_im);
    let mut rows = Vec::new();
    for mode in [ZetaMode::TraceLog, ZetaMode::OrbitProduct] {
        let z = match mode {
            ZetaMode::TraceLog => zeta_truncated(&cfg.model, roof, s, p.n_max, mode, p.ceiling)?,
            ZetaMode::OrbitProduct => {
                let table = enumerate_primitive_orbits(&cfg.model, roof, p.n_max, p.ceiling)?;
                zeta_orbit_product(&cfg.model, roof, &table, s, p.n_max)?
            }
        };
        if z.diverged {
            rec.push("warning", format!("{mode}: Re(s) <= h_T, value is partial"));
        }
        rows.push(vec![
            format!("{}", s.re),
            format!("{}", s.im),
            format!("{:.15e}", z.value.re),
            format!("{:.15e}", z.value.im),
            format!("{:.6e}", z.tail_bound),
            mode.to_string(),
        ]);
    }
    let csv = cfg.outdir.join("zeta.csv");
    write_csv(
        &csv,
        &["s_re", "s_im", "value_re", "value_im", "tail_bound", "mode"],
        rows.into_iter(),
    )?;
    rec.push("n_max", p.n_max);
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}

fn cmd_poc(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new("poc", cfg);
    let roof = cfg.roof()?;
    let p = &cfg.raw.params;
    let g = &cfg.raw.grids;
    let h_t = entropy_h_t(&cfg.model, roof, cfg.potential.table_depth().max(roof.table_depth()))?;
    let tau0 = roof.min_on_depth(&cfg.model, roof.table_depth())?;
    let n_needed = (g.lambda_max / tau0).ceil() as usize;
    let table = enumerate_primitive_orbits(&cfg.model, roof, n_needed.max(1), p.ceiling)?;
    let mut rows = Vec::new();
    for i in 1..=g.lambda_steps {
        let lam = g.lambda_max * i as f64 / g.lambda_steps as f64;
        let pi = count_pi(&table, lam)?;
        let x = (h_t * lam).exp();
        let (li_v, ratio) = if x > 1.0 {
            let v = li(x)?;
            (v, if v != 0.0 { pi as f64 / v } else { f64::NAN })
        } else {
            (f64::NAN, f64::NAN)
        };
        rows.push(vec![
            format!("{lam}"),
            format!("{pi}"),
            format!("{:.15e}", li_v),
            format!("{:.15e}", ratio),
        ]);
    }
    let csv = cfg.outdir.join("poc.csv");
    write_csv(&csv, &["lambda", "pi", "li", "ratio"], rows.into_iter())?;
    rec.push("h_T", format!("{:.15e}", h_t));
    rec.push("orbits", table.orbits.len());
    rec.artifacts.push(csv);
    write_summary(cfg, &rec)?;
    Ok(rec)
}
