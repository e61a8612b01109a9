//! One runner per experiment kind. Every runner is generic over the scalar
//! and returns the report plus its CSV tables; nothing touches the disk.

use std::collections::BTreeMap;
use std::str::FromStr;

use critlab::circle_maps::{CircleMap, CircleMapModel};
use critlab::contfrac::{expand, RotationNumber};
use critlab::invariant_measure::{atom_measure, empirical_measure_check, integrate_log_df};
use critlab::lyapunov::{
    ce_diagnostic, distortion_check, full_measure_set_probe, lemma_in_check, multicritical_bounds_check,
    subsequence_exponents,
};
use critlab::partitions::{precision_ceiling, real_bounds, s_increments, PartitionLadder};
use critlab::rotation::{detect_closest_returns, estimate_rho, tune_parameter, Tuned};
use critlab::unimodal::{
    adding_machine_check, build_tower, cylinder_fraction, distortion_scan, entrance_times, feigenbaum_search,
    sullivan_space_check, theorem_b_verify, UnimodalMap,
};
use critlab::{Dd, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, Precision};
use crate::error::{CliError, Result};
use crate::report::{num, opt, Artifacts, Baseline, Report, Table, TOOL};

/// Tiling mass tolerance applied to every partition.
pub const TILING_TOL: f64 = 1e-9;
/// Default cap on the precision-ceiling search.
pub const DEFAULT_LEVEL_CAP: usize = 24;

pub trait Scalar: Real + FromStr {}
impl<T: Real + FromStr> Scalar for T {}

/// Runs one experiment and, when a baseline is configured, gates its
/// regression constants.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = match cfg.kind {
        ExperimentKind::Acceptance => crate::acceptance::run_suite(&crate::acceptance::SuiteOptions::default())?.artifacts(),
        _ => match cfg.precision {
            Precision::F64 => run_at::<f64>(cfg)?,
            Precision::Dd => run_at::<Dd>(cfg)?,
        },
    };
    if let Some(path) = &cfg.baseline {
        let b = Baseline::load(path)?;
        art.report.baseline = Some(b.compare(&art.report.regressions, &art.report.precision));
    }
    Ok(art)
}

fn run_at<T: Scalar>(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut out = Outcome::default();
    match cfg.kind {
        ExperimentKind::Rotation => rotation::<T>(cfg, &mut out)?,
        ExperimentKind::Partition => partition::<T>(cfg, &mut out)?,
        ExperimentKind::Realbounds => realbounds::<T>(cfg, &mut out)?,
        ExperimentKind::Measure => measure::<T>(cfg, &mut out)?,
        ExperimentKind::Lyapunov => lyapunov::<T>(cfg, &mut out)?,
        ExperimentKind::Unimodal => unimodal::<T>(cfg, &mut out)?,
        ExperimentKind::Acceptance => unreachable!("dispatched in run"),
    }
    let report = Report {
        tool: TOOL.to_string(),
        kind: cfg.kind.as_str().to_string(),
        precision: T::NAME.to_string(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg).expect("config serializes"),
        results: Value::Object(out.results),
        regressions: out.regressions,
        hard_failures: out.hard_failures,
        soft_failures: Vec::new(),
        baseline: None,
    };
    Ok(Artifacts {
        report,
        tables: out.tables,
    })
}

#[derive(Default)]
struct Outcome {
    results: serde_json::Map<String, Value>,
    regressions: BTreeMap<String, f64>,
    hard_failures: Vec<String>,
    tables: Vec<Table>,
}

impl Outcome {
    fn put(&mut self, key: &str, v: Value) {
        self.results.insert(key.to_string(), v);
    }

    fn hard(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.hard_failures.push(what());
        }
    }
}

fn to_json<S: serde::Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("serializable")
}

struct Setup<T> {
    map: CircleMapModel<T>,
    theta: Option<RotationNumber<T>>,
    tuned: Option<Tuned<T>>,
    /// First critical point (0 for the rigid rotation).
    c: T,
}

fn setup<T: Scalar>(cfg: &ExperimentConfig) -> Result<Setup<T>> {
    let mc = cfg.map.as_ref().ok_or_else(|| CliError::Config("missing [map]".into()))?;
    let fam = mc.family()?;
    let theta = cfg.theta.as_ref().map(|t| t.build::<T>()).transpose()?;
    let (map, tuned) = match (mc.omega, &theta) {
        (Some(w), _) => (fam.build(T::of(w))?, None),
        (None, Some(th)) => {
            let t = tune_parameter(|w| fam.build(w), th, mc.tune_tol, None)?;
            (fam.build(t.omega)?, Some(t))
        }
        (None, None) => return Err(CliError::Config("map needs omega or theta".into())),
    };
    let c = map.critical_points().first().map(|c| c.c).unwrap_or_else(T::zero);
    Ok(Setup { map, theta, tuned, c })
}

fn map_json<T: Scalar>(s: &Setup<T>) -> Value {
    json!({
        "family": s.map.family().tag(),
        "family_spec": to_json(&s.map.family()),
        "omega": s.map.omega().as_f64(),
        "critical_points": s.map.critical_points().iter().map(|c| json!({"c": c.c.as_f64(), "d": c.d})).collect::<Vec<_>>(),
        "tuned": s.tuned.as_ref().map(to_json),
    })
}

fn theta_json<T: Scalar>(theta: &RotationNumber<T>) -> Value {
    json!({
        "value": theta.value().as_f64(),
        "max_level": theta.max_level(),
        "quotients": theta.continued_fraction().quotients(),
    })
}

fn theta_of<T>(s: &Setup<T>) -> Result<&RotationNumber<T>> {
    s.theta.as_ref().ok_or_else(|| CliError::Config("missing [theta]".into()))
}

fn rotation<T: Scalar>(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let s = setup::<T>(cfg)?;
    let iterates = cfg.orbit_length.unwrap_or(1_000_000);
    let x0 = T::of(cfg.base_point.unwrap_or(0.0));
    let est = estimate_rho(&s.map, x0, iterates, true);
    out.hard(est.lower <= est.value && est.value <= est.upper, || {
        format!("estimate {} outside its bracket [{}, {}]", est.value, est.lower, est.upper)
    });
    let returns = detect_closest_returns(&s.map, s.c, iterates.min(10_000_000));
    let mut t = Table::new("returns", &["k", "time", "side", "distance"]);
    for (k, ((&time, &side), &d)) in returns.times.iter().zip(&returns.signs).zip(&returns.distances).enumerate() {
        t.push(vec![k.to_string(), time.to_string(), side.to_string(), num(d)]);
    }
    out.tables.push(t);
    out.put("map", map_json(&s));
    out.put("estimate", to_json(&est));
    out.put("bracket_width", json!(est.upper - est.lower));
    out.put("closest_returns", to_json(&returns));
    out.put("quotients_from_returns", json!(returns.quotients()));
    if est.rational.is_none() && est.value > 0.0 && est.value < 1.0 {
        let cf = expand(est.value, 12)?;
        out.put("quotients_of_estimate", json!(cf.quotients()));
    }
    if let Some(th) = &s.theta {
        out.put("theta", theta_json(th));
        out.put("contains_theta", json!(est.contains(th.value().as_f64())));
    }
    Ok(())
}

fn check_ladder<T: Scalar>(ladder: &PartitionLadder<T>, theta: &RotationNumber<T>, out: &mut Outcome) -> Vec<Value> {
    let mut rows = Vec::new();
    for (i, p) in ladder.levels.iter().enumerate() {
        let n = p.level;
        let want = theta.q(n) + theta.q(n + 1);
        let mass = (p.total_length().as_f64() - 1.0).abs();
        let nested = ladder.levels.get(i + 1).map(|f| p.is_refined_by(f));
        out.hard(p.len() as u64 == want, || format!("level {n}: {} atoms, expected {want}", p.len()));
        out.hard(mass <= TILING_TOL, || format!("level {n}: tiling mass defect {mass:e}"));
        out.hard(nested != Some(false), || format!("level {n}: not refined by level {}", n + 1));
        rows.push(json!({
            "level": n,
            "atoms": p.len(),
            "expected_atoms": want,
            "mass_defect": mass,
            "refined_by_next": nested,
        }));
    }
    rows
}

fn partition<T: Scalar>(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let s = setup::<T>(cfg)?;
    let theta = theta_of(&s)?;
    let (lo, hi) = cfg.level_range([1, 12])?;
    let ladder = PartitionLadder::build(&s.map, s.c, theta, lo, hi)?;
    let rows = check_ladder(&ladder, theta, out);
    let mut t = Table::new("atoms", &["level", "index", "generation", "left", "right", "length"]);
    for p in &ladder.levels {
        for (k, a) in p.atoms.iter().enumerate() {
            t.push(vec![
                p.level.to_string(),
                k.to_string(),
                a.generation.as_str().to_string(),
                num(a.left.as_f64()),
                num(a.right.as_f64()),
                num(a.length.as_f64()),
            ]);
        }
    }
    out.tables.push(t);
    out.put("map", map_json(&s));
    out.put("theta", theta_json(theta));
    out.put("certified_level", json!(ladder.certified));
    out.put("levels", json!(rows));
    Ok(())
}

fn realbounds<T: Scalar>(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let s = setup::<T>(cfg)?;
    let theta = theta_of(&s)?;
    let (lo, hi) = cfg.level_range([5, 12])?;
    let ladder = PartitionLadder::build(&s.map, s.c, theta, 1, hi)?;
    check_ladder(&ladder, theta, out);
    let rb = real_bounds(&ladder, lo, hi);
    let incs = s_increments(&ladder, theta);
    let in_range = || ladder.levels.iter().filter(|p| p.level >= lo.max(1) && p.level <= hi);
    let sup_s = in_range().map(|p| p.s_sum().as_f64() / p.level as f64).fold(0.0, f64::max);
    let mut t = Table::new("levels", &["level", "k", "worst_atom", "min_atom", "s_sum", "s_over_n"]);
    for b in &rb.levels {
        let sn = ladder.level(b.level).map(|p| p.s_sum().as_f64()).unwrap_or(f64::NAN);
        t.push(vec![
            b.level.to_string(),
            num(b.k),
            b.worst_atom.to_string(),
            num(b.min_atom),
            num(sn),
            num(sn / b.level as f64),
        ]);
    }
    out.tables.push(t);
    out.regressions.insert("K".into(), rb.global_max);
    out.regressions.insert("sup_S_over_n".into(), sup_s);
    out.put("map", map_json(&s));
    out.put("theta", theta_json(theta));
    out.put("real_bounds", to_json(&rb));
    out.put("s_increments", to_json(&incs));
    out.put(
        "s_increments_within_bound",
        json!(incs.iter().all(|i| i.increment >= 0.0 && i.increment <= i.bound)),
    );
    Ok(())
}

fn measure<T: Scalar>(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let s = setup::<T>(cfg)?;
    let theta = theta_of(&s)?;
    let level = match cfg.level {
        Some(l) => l,
        None => precision_ceiling(&s.map, s.c, theta, DEFAULT_LEVEL_CAP),
    };
    let order = cfg.quadrature_order.unwrap_or(8);
    // mass identity of the exact weights at every level up to the truncation
    let tol = 64.0 * T::epsilon().as_f64();
    for n in 0..=level.min(theta.max_level() - 2) {
        let d = atom_measure(theta, n).mass_defect().abs().as_f64();
        out.hard(d <= tol, || format!("level {n}: measure mass defect {d:e}"));
    }
    let est = integrate_log_df(&s.map, theta, level, order)?;
    let history: Vec<Value> = est
        .history
        .iter()
        .map(|h| {
            let mut v = to_json(h);
            v["within_bound"] = json!(h.within_bound());
            v
        })
        .collect();
    out.put(
        "integral",
        json!({
            "level": est.level,
            "value": est.value,
            "tail_bound": est.tail_bound,
            "quadrature_bound": est.quadrature_bound,
            "per_level_history": history,
            "power_law_level": est.power_law_level,
            "quadrature_order": est.quadrature_order,
            "tails": to_json(&est.tails),
            "within_bound": est.value.abs() <= est.total_bound(),
            "monotone": est.monotone(),
        }),
    );
    let mut atoms = Table::new(
        "atoms",
        &["index", "generation", "left", "right", "weight", "contribution", "abs_contribution", "quadrature_bound", "first_included"],
    );
    for a in &est.atoms {
        atoms.push(vec![
            a.index.to_string(),
            a.generation.as_str().to_string(),
            num(a.left),
            num(a.right),
            num(a.weight),
            num(a.contribution),
            num(a.abs_contribution),
            num(a.quadrature_bound),
            a.first_included.map(|n| n.to_string()).unwrap_or_default(),
        ]);
    }
    let mut hist = Table::new("history", &["level", "value", "abs_value", "tail_bound", "quadrature_bound"]);
    for h in &est.history {
        hist.push(vec![
            h.level.to_string(),
            num(h.value),
            num(h.abs_value),
            num(h.tail_bound),
            num(h.quadrature_bound),
        ]);
    }
    out.tables.push(atoms);
    out.tables.push(hist);

    let flevel = cfg.frequency_level.unwrap_or(6);
    let x0 = cfg
        .base_point
        .unwrap_or_else(|| ChaCha8Rng::seed_from_u64(cfg.seed).gen_range(0.0..1.0));
    let freq = empirical_measure_check(&s.map, s.c, theta, flevel, T::of(x0), cfg.orbit_length.unwrap_or(1_000_000))?;
    let mut ft = Table::new("frequencies", &["index", "weight", "frequency"]);
    for (k, (w, f)) in freq.weights.iter().zip(&freq.frequencies).enumerate() {
        ft.push(vec![k.to_string(), num(*w), num(*f)]);
    }
    out.tables.push(ft);
    out.put("frequencies", to_json(&freq));
    out.put("frequencies_base_point", json!(x0));
    out.put("frequencies_within_koksma", json!(freq.within_koksma()));
    out.put("map", map_json(&s));
    out.put("theta", theta_json(theta));
    Ok(())
}

fn lyapunov<T: Scalar>(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let s = setup::<T>(cfg)?;
    let theta = theta_of(&s)?;
    let ceiling = precision_ceiling(&s.map, s.c, theta, DEFAULT_LEVEL_CAP);
    let (lo, hi) = cfg.level_range([3, ceiling.max(3)])?;
    let x = match cfg.base_point {
        Some(x) => T::of(x),
        None => s.map.apply(s.c),
    };
    let levels: Vec<usize> = (lo..=hi).collect();
    let tr = subsequence_exponents(&s.map, theta, x, &levels)?;
    let mut t = Table::new("trace", &["n", "q_n", "sum", "normalized"]);
    for e in &tr.entries {
        t.push(vec![e.level.to_string(), e.q.to_string(), opt(e.sum), opt(e.normalized)]);
    }
    out.tables.push(t);
    if let Some(e) = tr.last_finite().and_then(|e| e.normalized) {
        out.regressions.insert("epsilon".into(), e.abs());
    }
    let samples = cfg.samples.unwrap_or(200);
    let crit = s.map.critical_points().len();
    if crit <= 1 {
        let mut c = 0f64;
        for n in 4..=10.min(hi.saturating_sub(2)) {
            c = c.max(lemma_in_check(&s.map, theta, n, samples)?.c_n);
        }
        let mut k1 = 0f64;
        let mut rows = Vec::new();
        for n in 3..=20.min(hi.saturating_sub(1)) {
            let r = distortion_check(&s.map, theta, n, samples)?;
            k1 = k1.max(r.k1);
            rows.push(r);
        }
        if c > 0.0 {
            out.regressions.insert("C".into(), c);
        }
        if k1 > 0.0 {
            out.regressions.insert("K1".into(), k1);
        }
        out.put("distortion", to_json(&rows));
    } else {
        let mut rows = Vec::new();
        for n in 4..=8.min(hi) {
            rows.push(multicritical_bounds_check(&s.map, theta, n, samples)?);
        }
        let up = rows.iter().map(|r| r.c_upper).fold(0.0, f64::max);
        let low = rows.iter().map(|r| r.c_lower).fold(0.0, f64::max);
        out.regressions.insert("C_upper".into(), up);
        out.regressions.insert("C_lower".into(), low);
        out.put("multicritical", to_json(&rows));
    }
    let horizon = cfg.orbit_length.unwrap_or_else(|| theta.q(hi));
    let ce = ce_diagnostic(&s.map, theta, horizon)?;
    let mut ct = Table::new("ce", &["critical_point", "m", "normalized"]);
    for v in &ce.values {
        for &(m, a) in &v.trace {
            ct.push(vec![num(v.critical_point), m.to_string(), num(a)]);
        }
    }
    out.tables.push(ct);
    let top = 20.min(theta.max_level().saturating_sub(2) / 2);
    let occupancy = full_measure_set_probe(theta, 1..=top, crit.max(1));
    out.put("map", map_json(&s));
    out.put("theta", theta_json(theta));
    out.put("ceiling", json!(ceiling));
    out.put("exponents", to_json(&tr));
    out.put("ce", to_json(&ce));
    out.put("occupancy", to_json(&occupancy));
    Ok(())
}

fn unimodal<T: Scalar>(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let depth = cfg.depth.unwrap_or(12);
    let search = feigenbaum_search::<T>(depth + 2)?;
    let f = UnimodalMap::family(T::of(search.t_inf));
    let tower = build_tower(&f, depth)?;
    let depth = tower.depth();
    let b = theorem_b_verify(&tower, cfg.samples.unwrap_or(4096))?;
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.01).collect();
    let sullivan = sullivan_space_check(&tower, &grid);

    let v = entrance_times(&tower, f.eval(T::zero()), depth)?;
    let law = v.iter().enumerate().all(|(n, &vn)| vn == tower.q(n) - 1);
    out.hard(law, || format!("entrance times of f(0) {v:?} differ from q_n - 1"));
    let mut fractions = Vec::new();
    for n in 0..depth {
        let c = cylinder_fraction(&tower, n)?;
        let ok = c.coding_mismatches == 0 && c.equals_one_minus_inverse(tower.a(n));
        out.hard(ok, || format!("level {n}: cylinder fraction {}/{} != 1 - 1/{}", c.increased, c.total, tower.a(n)));
        fractions.push(c);
    }
    let mut scans = Vec::new();
    let mut k1 = 1f64;
    for n in [4, 6, 8].into_iter().filter(|&n| n <= depth) {
        let sc = distortion_scan(&tower, n, 9)?;
        k1 = k1.max(sc.k1);
        scans.push(sc);
    }
    let visits = adding_machine_check(&tower, cfg.frequency_level.unwrap_or(6).min(depth), cfg.orbit_length.unwrap_or(1_000_000))?;

    let mut tt = Table::new("tower", &["level", "j", "left", "right"]);
    for l in &tower.levels {
        for (j, &(a, bb)) in l.intervals.iter().enumerate() {
            tt.push(vec![l.n.to_string(), j.to_string(), num(a.as_f64()), num(bb.as_f64())]);
        }
    }
    let mut tr = Table::new(
        "trace",
        &["n", "q_n", "critical_value_normalized", "max_log_return", "min_log_entrance", "direct_integral", "lower_series", "upper_series"],
    );
    for l in &b.levels {
        tr.push(vec![
            l.n.to_string(),
            l.q.to_string(),
            num(l.critical_value_normalized),
            num(l.max_log_return),
            num(l.min_log_entrance),
            num(l.direct_integral),
            num(l.lower_series),
            num(l.upper_series),
        ]);
    }
    out.tables.push(tt);
    out.tables.push(tr);

    out.regressions.insert("C0".into(), b.c0);
    out.regressions.insert("entrance_lower".into(), b.entrance_lower);
    out.regressions.insert("K1".into(), k1);
    if let Some(tau) = sullivan.inf {
        out.regressions.insert("tau".into(), tau);
    }
    let ratios = tower.scaling_ratios();
    out.put("search", to_json(&search));
    out.put("depth", json!(depth));
    out.put("truncated", json!(tower.truncated));
    out.put("scaling_ratios", json!(ratios));
    out.put("theorem_b", to_json(&b));
    out.put("sullivan", to_json(&sullivan));
    out.put("entrance_times_critical_value", json!(v));
    out.put("cylinder_fractions", to_json(&fractions));
    out.put("distortion", to_json(&scans));
    out.put("visits", to_json(&visits));
    out.put("visits_within_bound", json!(visits.max_deviation <= visits.bound));
    Ok(())
}
