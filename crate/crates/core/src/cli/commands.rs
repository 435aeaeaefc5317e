//! One function per subcommand, each returning a table and summary lines.
//!
//! Every number comes from a library call; nothing here re-derives physics.

use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{
    c_coefficient, d_sum, load_or_build, prob_false_positive, prob_succ_ideal, prob_succ_series, resonance_free,
    shells_for_tail, success::EXACT_TAIL, success::SINGLE_PHOTON_ZETA, DetectorModel, ProbabilityGrid, RooftopModel,
    SuccessMethod, SuccessModel,
};
use crate::dynamics::{jc_evolve, DotParams};
use crate::entanglement::{appendix_b_check, concurrence, fidelity_to_bell, heralded_state, reduce_density, Sector};
use crate::error::Result;
use crate::fock::{truncation_for_tail, DotLevel};
use crate::gaussian::{epr_state, EprParams};
use crate::optics::{bs_element, kravchuk_sum};

use super::config::{MethodName, RunConfig};
use super::rate::{rate_estimate, RateInputs};

/// A CSV table plus human-readable notes for stderr.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Output {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
    /// Set by `verify` when a check fails.
    pub failed: bool,
}

impl Output {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Shortest round-trip text of a float; exponent form for very small or large values.
pub fn fmt(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn source_nmax(cfg: &RunConfig, tail: f64) -> Result<usize> {
    match cfg.n_max {
        Some(n) => Ok(n),
        None => truncation_for_tail(cfg.lambda, tail),
    }
}

/// Amplitudes of the truncated EPR source.
pub fn epr(cfg: &RunConfig) -> Result<Output> {
    let n_max = source_nmax(cfg, 1e-12)?;
    let state = epr_state(EprParams::from_lambda(cfg.lambda)?, n_max);
    let mut out = Output::new(&["m", "amplitude", "probability"]);
    for (k, a) in state.iter() {
        out.push(vec![k.m_minus().to_string(), fmt(a.re), fmt(a.norm_sqr())]);
    }
    out.notes.push(format!(
        "lambda = {}, mean photons = {}, kept weight = {}",
        cfg.lambda,
        cfg.m_bar,
        state.norm_sqr()
    ));
    Ok(out)
}

/// Norm and level populations of one dot against time.
pub fn evolve(cfg: &RunConfig) -> Result<Output> {
    let n_max = source_nmax(cfg, 1e-10)?;
    let p = DotParams::new(cfg.g, cfg.lambda)?;
    let rows: Vec<Vec<String>> = cfg
        .time_grid()
        .par_iter()
        .map(|&t| {
            let s = jc_evolve(&p, t, n_max)?;
            let mut pops = [0.0; 4];
            for (k, a) in s.iter() {
                pops[DotLevel::ALL.iter().position(|l| *l == k.dot).expect("level")] += a.norm_sqr();
            }
            let mut row = vec![fmt(t), fmt(s.norm_sqr())];
            row.extend(pops.iter().map(|v| fmt(*v)));
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut out = Output::new(&["t", "norm", "z_minus", "z_plus", "t_minus", "t_plus"]);
    out.rows = rows;
    Ok(out)
}

/// Time-averaged outcome probabilities against mean photon number.
pub fn prob_grid(cfg: &RunConfig) -> Result<Output> {
    let t_max = cfg.pairs.iter().map(|(a, b)| (a + b) as usize).max().unwrap_or(0);
    let grid = ProbabilityGrid::build(t_max);
    let mut header = vec!["m_bar".to_string()];
    header.extend(cfg.pairs.iter().map(|(a, b)| format!("p_{a}_{b}")));
    let mut out = Output {
        header,
        ..Output::default()
    };
    for m in cfg.m_bar_grid() {
        let mut row = vec![fmt(m)];
        for &(a, b) in &cfg.pairs {
            row.push(fmt(grid
                .probability(a as usize, b as usize, m)
                .expect("pair within grid")));
        }
        out.push(row);
    }
    Ok(out)
}

fn success_model(cfg: &RunConfig) -> Result<SuccessModel> {
    let table = load_or_build(cfg.cache.as_deref(), cfg.n3_max, cfg.build)?;
    Ok(SuccessModel::new(Arc::new(table), cfg.rooftop))
}

fn etas_or(cfg: &RunConfig, default: &[f64]) -> Vec<f64> {
    if cfg.etas.is_empty() {
        default.to_vec()
    } else {
        cfg.etas.clone()
    }
}

/// Lossy success probability for each efficiency, with `m̄` also scaled by `m̄_{1/2}(η)`.
pub fn success(cfg: &RunConfig) -> Result<Output> {
    let model = success_model(cfg)?;
    let method = cfg.success_method();
    let dets = etas_or(cfg, &[1.0, 0.1, 0.01])
        .into_iter()
        .map(DetectorModel::new)
        .collect::<Result<Vec<_>>>()?;
    if cfg.method == MethodName::Exact {
        model.prepare(&dets, shells_for_tail(cfg.m_bar_max, EXACT_TAIL));
    }
    let mut out = Output::new(&["eta", "m_bar", "m_scaled", "prob_succ", "tail_bound"]);
    for d in &dets {
        let half = model.m_half(d)?;
        let rows: Vec<Vec<String>> = cfg
            .m_bar_grid()
            .par_iter()
            .map(|&m| {
                let v = model.prob_succ(m, d, method)?;
                Ok(vec![
                    fmt(d.eta()),
                    fmt(m),
                    fmt(m / half),
                    fmt(v.value),
                    fmt(v.tail_bound),
                ])
            })
            .collect::<Result<_>>()?;
        out.rows.extend(rows);
        out.notes.push(format!("eta = {}: m_half = {half}", d.eta()));
    }
    Ok(out)
}

/// `m̄_{1/2}` against efficiency.
pub fn mhalf(cfg: &RunConfig) -> Result<Output> {
    let model = success_model(cfg)?;
    let default: Vec<f64> = (0..=30).map(|i| 10f64.powf(-3.0 + i as f64 / 10.0)).collect();
    let rows: Vec<Vec<String>> = etas_or(cfg, &default)
        .par_iter()
        .map(|&eta| {
            let m = model.m_half(&DetectorModel::new(eta)?)?;
            Ok(vec![fmt(eta), fmt(m), fmt(eta * m)])
        })
        .collect::<Result<_>>()?;
    let mut out = Output::new(&["eta", "m_half", "eta_times_m_half"]);
    out.rows = rows;
    Ok(out)
}

/// First-order loss coefficient against mean photon number.
pub fn zeta(cfg: &RunConfig) -> Result<Output> {
    let model = success_model(cfg)?;
    let mut out = Output::new(&["m_bar", "zeta", "tail_bound"]);
    for m in cfg.m_bar_grid() {
        let z = model.zeta(m)?;
        out.push(vec![fmt(m), fmt(z.value), fmt(z.tail_bound)]);
    }
    let (arg, max) = model.zeta_maximum()?;
    out.notes.push(format!("maximum zeta = {max} at m_bar = {arg}"));
    out.notes
        .push(format!("single-photon schemes: zeta = {SINGLE_PHOTON_ZETA}"));
    Ok(out)
}

/// Normalized coefficients `C/D` against `n1/n3` for selected shells, and the spread fit.
pub fn coeffs(cfg: &RunConfig) -> Result<Output> {
    let table = load_or_build(cfg.cache.as_deref(), cfg.n3_max, cfg.build)?;
    let mut out = Output::new(&["n3", "n1", "n1_over_n3", "c", "c_over_d"]);
    for &n3 in cfg.shells.iter().filter(|&&n| n >= 1 && n <= table.n3_max()) {
        let d = d_sum(n3);
        for (i, c) in table.row(n3).expect("within table").iter().enumerate() {
            let n1 = 2 * i + 1;
            out.push(vec![
                n3.to_string(),
                n1.to_string(),
                fmt(n1 as f64 / n3 as f64),
                fmt(*c),
                fmt(c / d),
            ]);
        }
    }
    if table.n3_max() > 100 {
        let fit = RooftopModel::fit(&table, 100, table.n3_max().min(300))?;
        out.notes.push(format!(
            "spread fit on [100, {}]: alpha = {}, beta = {}, max relative residual = {}",
            table.n3_max().min(300),
            fit.model.alpha,
            fit.model.beta,
            fit.max_relative_residual
        ));
    }
    if let Some(p) = &cfg.cache {
        out.notes.push(format!("coefficient cache: {}", p.display()));
    }
    Ok(out)
}

/// True and false positive coincidence probabilities.
pub fn false_positive(cfg: &RunConfig) -> Result<Output> {
    let model = success_model(cfg)?;
    let grid = ProbabilityGrid::build(cfg.grid_t_max);
    let mut out = Output::new(&[
        "eta",
        "m_bar",
        "true_positive",
        "false_positive",
        "ratio",
        "fp_tail_bound",
    ]);
    for eta in etas_or(cfg, &[1.0, 0.1, 0.01]) {
        let d = DetectorModel::new(eta)?;
        let rows: Vec<Vec<String>> = cfg
            .m_bar_grid()
            .par_iter()
            .map(|&m| {
                let tp = model.prob_succ(m, &d, cfg.success_method())?.value;
                let fp = prob_false_positive(m, &d, &grid)?;
                let ratio = if tp > 0.0 { fp.value / tp } else { 0.0 };
                Ok(vec![
                    fmt(eta),
                    fmt(m),
                    fmt(tp),
                    fmt(fp.value),
                    fmt(ratio),
                    fmt(fp.tail_bound),
                ])
            })
            .collect::<Result<_>>()?;
        out.rows.extend(rows);
    }
    Ok(out)
}

/// Heralded pairs per minute.
pub fn rate(cfg: &RunConfig) -> Result<Output> {
    let ri = RateInputs::new(cfg.collection, cfg.prob, cfg.rep_rate)?;
    let mut out = Output::new(&["collection", "probability", "repetition_rate", "rate_per_minute"]);
    out.push(vec![
        fmt(cfg.collection),
        fmt(cfg.prob),
        fmt(cfg.rep_rate),
        fmt(rate_estimate(&ri)),
    ]);
    Ok(out)
}

/// Fast invariant suite; any failure sets `failed`.
pub fn verify(_cfg: &RunConfig) -> Result<Output> {
    let mut out = Output::new(&["check", "status", "detail"]);
    let mut record = |name: &str, ok: bool, detail: String| {
        out.rows.push(vec![
            name.to_string(),
            if ok { "PASS" } else { "FAIL" }.to_string(),
            detail,
        ]);
    };

    let worst = (1..=50)
        .map(|n3| (crate::analysis::c_row(n3).iter().sum::<f64>() - d_sum(n3)).abs())
        .fold(0.0, f64::max);
    record("sum_rule_n3_le_50", worst < 1e-10, format!("max deviation {worst:e}"));

    let c11 = c_coefficient(1, 1)?;
    record("c_1_1", (c11 - 3.0 / 32.0).abs() < 1e-14, fmt(c11));

    let mut dev: f64 = 0.0;
    for m in [0.5, 1.0, 2.0, 5.0, 20.0] {
        let s = prob_succ_series(m, 1e-12)?.value;
        dev = dev.max((s / prob_succ_ideal(m)? - 1.0).abs());
    }
    record(
        "series_vs_closed_form",
        dev < 1e-8,
        format!("max relative deviation {dev:e}"),
    );

    let n = 30;
    let mut orth: f64 = 0.0;
    for k in 0..=n {
        for k2 in 0..=n {
            let dot: f64 = (0..=n)
                .map(|l| bs_element(n, k, l).unwrap() * bs_element(n, k2, l).unwrap())
                .sum();
            orth = orth.max((dot - if k == k2 { 1.0 } else { 0.0 }).abs());
        }
    }
    record(
        "splitter_unitarity_n30",
        orth < 1e-12,
        format!("max deviation {orth:e}"),
    );
    let exact = kravchuk_sum(60, 7, 13);
    record(
        "kravchuk_exact",
        exact != num_bigint::BigInt::from(0),
        format!("K = {exact}"),
    );

    record("no_accidental_resonance", (0..=40).all(resonance_free), "s ≤ 40".into());

    let p = DotParams::with_mean(1.0, 1.7)?;
    let (mut fid, mut conc, mut hole): (f64, f64, f64) = (1.0, 1.0, 0.0);
    for (n1, n2) in [(1, 1), (1, 3), (3, 3), (5, 3)] {
        let s = heralded_state(&p, &p, 3.3, n1, n2)?;
        fid = fid.min(fidelity_to_bell(&s)?);
        conc = conc.min(concurrence(&reduce_density(&s, Sector::Trion)?.density)?);
        hole = hole.max(s.sector_weight(DotLevel::Tminus, DotLevel::Tminus) / s.norm_sqr());
    }
    record("odd_odd_fidelity", (1.0 - fid).abs() < 1e-10, format!("min {fid}"));
    record("odd_odd_concurrence", (1.0 - conc).abs() < 1e-10, format!("min {conc}"));
    record("same_polarization_holes", hole < 1e-12, format!("max weight {hole:e}"));

    let b = appendix_b_check(2, 2, 1.0, 1.0)?;
    record(
        "even_even_inequality",
        b.inequality_holds,
        format!("q_updown = {}, q_plus = {}", b.q_updown, b.q_plus),
    );

    let model = SuccessModel::new(
        Arc::new(crate::analysis::CCoefficientTable::build(40)),
        RooftopModel::default(),
    );
    let ideal = model
        .prob_succ(1.0, &DetectorModel::ideal(), SuccessMethod::Hybrid(40))?
        .value;
    record(
        "unit_efficiency_reduction",
        (ideal - 7.0 / 384.0).abs() < 1e-10,
        fmt(ideal),
    );

    let r = rate_estimate(&RateInputs::new(0.05, 1.0 / 32.0, 1.0 / 1.3e-6)?);
    record(
        "rate_arithmetic",
        (r / 3.6e3 - 1.0).abs() < 0.03,
        format!("{r} per minute"),
    );

    out.failed = out.rows.iter().any(|r| r[1] == "FAIL");
    Ok(out)
}
