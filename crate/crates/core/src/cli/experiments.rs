//! Named experiment recipes. Each fixes its parameters, runs, and checks
//! the measured values against their acceptance windows.

use std::f64::consts::{LN_2, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::record::{csv_table, Artifact, Metric, Outcome, ResultRecord};
use super::CliError;
use crate::entropy::{
    bowen_set_entropy, edp_certify, katok_entropy, max_separated, min_spanning, BowenSetConfig, EdpConfig,
    KatokConfig, SampleKind,
};
use crate::gluing::{
    build_schedule, build_segment_library, construct_historic_point, ensemble_and_alpha, Component,
    ConstructParams, Ensemble, LibraryConfig, Observable, ScheduleConfig, ScheduleMode, Target,
};
use crate::hyperbolicity::{block_monotonicity_check, lyapunov_exponents, pesin_block_membership, PesinBlockParams};
use crate::measures::{
    metric_d, rational_approximation, sampling, AtomicMeasure, ConvexCombination, Measure, TestBasis,
};
use crate::systems::{FullShift, KatokMap, KatokParams, LinearToralMap, SymbolicWord, TorusPoint};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunContext {
    pub seed: u64,
    pub mode: ScheduleMode,
}

impl Default for RunContext {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, mode: ScheduleMode::Desk }
    }
}

type Recipe = fn(&RunContext) -> Result<Outcome, CliError>;

pub const EXPERIMENTS: [(&str, &str, Recipe); 9] = [
    ("shift-oracle", "exact separated/spanning counts and Katok entropy on the full 2-shift", shift_oracle),
    ("cat-entropy", "Katok and Bowen entropy of the cat map against log of its eigenvalue", cat_entropy),
    ("lyapunov", "Lyapunov exponents of the cat map and the Katok map", lyapunov),
    ("pesin-blocks", "Pesin block membership, nesting and forward inclusion", pesin_blocks),
    ("shift-historic", "glued historic point on the shift between two fixed points", shift_historic),
    ("cat-historic", "glued historic point on the cat map with exact shadowing", cat_historic),
    ("shift-variational", "Bowen entropy of a glued ensemble between Bernoulli measures", shift_variational),
    ("edp-certifier", "entropy distribution check on the glued ensemble", edp_certifier),
    ("measure-metric", "axioms, truncation and rational approximation for the metric D", measure_metric),
];

pub fn experiment_names() -> Vec<&'static str> {
    EXPERIMENTS.iter().map(|e| e.0).collect()
}

pub fn run_experiment(name: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let (_, _, recipe) = EXPERIMENTS
        .iter()
        .find(|e| e.0 == name)
        .ok_or_else(|| CliError::UnknownExperiment(name.into(), experiment_names().join(", ")))?;
    let t = Instant::now();
    let mut out = recipe(ctx)?;
    out.record.runtime_secs = t.elapsed().as_secs_f64();
    Ok(out)
}

fn cat_log_lambda() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

/// Words of length `n`, in lexicographic order, followed by `0^inf`.
pub fn cylinder_representatives(n: usize) -> Vec<SymbolicWord> {
    (0..1u64 << n)
        .map(|c| {
            let w: Vec<u8> = (0..n).rev().map(|i| ((c >> i) & 1) as u8).collect();
            SymbolicWord::with_constant_tail(w, 0).expect("binary words are valid")
        })
        .collect()
}

fn shift_oracle(ctx: &RunContext) -> Result<Outcome, CliError> {
    let eps = 0.5;
    let katok_cfg = KatokConfig { eps, delta: 0.1, n_list: (4..=9).collect(), atoms_per_ball: 8, centers_per_ball: 16 };
    let config = json!({"eps": eps, "n_max": 12, "katok": katok_cfg, "katok_depth": 10});
    let mut rec = ResultRecord::new("shift-oracle", &config, ctx.seed);
    let sh = FullShift::<f64>::new();
    let mut rows = Vec::new();
    let mut all_exact = true;
    for n in 1..=12 {
        let reps = cylinder_representatives(n);
        let sep = max_separated(&sh, &reps, n, eps).map_err(CliError::stage("entropy"))?.len();
        let span = min_spanning(&sh, &reps, &reps, n, eps).map_err(CliError::stage("entropy"))?.len();
        // Distinct n-words first differ at some i < n, where d_n reaches 1.
        let brute = pairwise_separated(&reps, n);
        all_exact &= sep == 1 << n && span == 1 << n && brute;
        rows.push((n, 1usize << n, sep, span, brute));
    }
    rec.push(Metric::flag("counts_equal_2^n", all_exact));
    let reps = cylinder_representatives(10);
    let nu = AtomicMeasure::uniform(reps.clone(), "bernoulli(1/2)").map_err(CliError::stage("measures"))?;
    let est = katok_entropy(&sh, &nu, SampleKind::Exact, &reps, &katok_cfg).map_err(CliError::stage("entropy"))?;
    rec.push(Metric::within("katok_over_log2", est.value / LN_2, Some(0.99), Some(1.01)));
    let table = csv_table(&["n", "expected", "separated", "spanning", "brute_force_separated"], rows)?;
    Ok(Outcome { record: rec, artifacts: vec![Artifact::new("counts.csv", table), Artifact::json("katok.json", &est)] })
}

/// Every pair of the words is at `d_n >= 1/2`, by direct symbol comparison.
fn pairwise_separated(words: &[SymbolicWord], n: usize) -> bool {
    let prefixes: Vec<Vec<u8>> = words.iter().map(|w| w.take(n)).collect();
    prefixes.iter().enumerate().all(|(i, a)| prefixes[i + 1..].iter().all(|b| a != b))
}

fn cat_entropy(ctx: &RunContext) -> Result<Outcome, CliError> {
    let (corner, width, sample, grid) = ([0.3, 0.6], 0.005, 100_000usize, 512usize);
    let katok_cfg = KatokConfig::default();
    let bowen_cfg = BowenSetConfig { eps: 0.05, n_min: 8, n_compare: 10, extra_lengths: 2, bisection_steps: 30 };
    let (rows, per_row, unstable_len, row_step) = (4usize, 4000usize, 0.002, 0.001);
    let config = json!({
        "patch": {"corner": corner, "width": width}, "sample": sample, "grid": grid,
        "katok": katok_cfg, "bowen": bowen_cfg,
        "bowen_set": {"base": corner, "rows": rows, "per_row": per_row, "unstable_length": unstable_len, "row_step": row_step},
    });
    let mut rec = ResultRecord::new("cat-entropy", &config, ctx.seed);
    let cat = LinearToralMap::<f64>::cat_map();
    let h = cat_log_lambda();
    rec.push(Metric::info("log_lambda", h));

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let pts: Vec<TorusPoint<f64>> = (0..sample).map(|_| sampling::lebesgue_in_box(&mut rng, corner, width)).collect();
    let nu = AtomicMeasure::uniform(pts, "lebesgue on patch").map_err(CliError::stage("measures"))?;
    let centers = lattice(corner, width, grid);
    let katok = katok_entropy(&cat, &nu, SampleKind::Iid, &centers, &katok_cfg).map_err(CliError::stage("entropy"))?;
    rec.push(Metric::within("katok", katok.value, Some(0.9 * h), Some(1.1 * h)));

    let base = TorusPoint::new(corner[0], corner[1]);
    let z: Vec<TorusPoint<f64>> = (0..rows)
        .flat_map(|r| {
            let cat = &cat;
            (0..per_row).map(move |i| {
                let v = cat.unstable().scale(unstable_len * i as f64 / per_row as f64) + cat.stable().scale(row_step * r as f64);
                base.translate(v)
            })
        })
        .collect();
    let bowen = bowen_set_entropy(&cat, &z, &[], &bowen_cfg).map_err(CliError::stage("entropy"))?;
    rec.push(Metric::within("bowen", bowen.estimate.value, Some(0.9 * h), Some(1.1 * h)));
    rec.note("samples are restricted to a small patch; the entropy of the cat map is the same on every open set");
    let counts = csv_table(
        &["n", "separated", "spanning", "katok"],
        katok.counts.iter().map(|c| (c.n, c.separated, c.spanning, c.katok)),
    )?;
    Ok(Outcome {
        record: rec,
        artifacts: vec![Artifact::new("katok_counts.csv", counts), Artifact::json("bowen.json", &bowen.estimate)],
    })
}

/// Cell centres of a `g x g` lattice on `[corner, corner + width]^2`.
pub fn lattice(corner: [f64; 2], width: f64, g: usize) -> Vec<TorusPoint<f64>> {
    (0..g * g)
        .map(|i| {
            let x = corner[0] + width * ((i % g) as f64 + 0.5) / g as f64;
            let y = corner[1] + width * ((i / g) as f64 + 0.5) / g as f64;
            TorusPoint::new(x.rem_euclid(1.0), y.rem_euclid(1.0))
        })
        .collect()
}

fn lyapunov(ctx: &RunContext) -> Result<Outcome, CliError> {
    let (n_cat, n_katok) = (100usize, 10_000usize);
    let config = json!({"n_cat": n_cat, "n_katok": n_katok, "katok": KatokParams::default()});
    let mut rec = ResultRecord::new("lyapunov", &config, ctx.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let x = TorusPoint::new(rng.random(), rng.random());
    let cat = LinearToralMap::<f64>::cat_map();
    let h = cat_log_lambda();
    let r = lyapunov_exponents(&cat, &x, n_cat).map_err(CliError::stage("hyperbolicity"))?;
    rec.push(Metric::within("cat_lambda1_error", (r.exponents[0] - h).abs(), None, Some(1e-8)));
    rec.push(Metric::within("cat_lambda2_error", (r.exponents[1] + h).abs(), None, Some(1e-8)));

    let km = KatokMap::<f64>::new(KatokParams::default()).map_err(CliError::stage("systems"))?;
    let y = TorusPoint::new(rng.random(), rng.random());
    let k = lyapunov_exponents(&km, &y, n_katok).map_err(CliError::stage("hyperbolicity"))?;
    rec.push(Metric::within("katok_lambda1", k.exponents[0], Some(f64::MIN_POSITIVE), None));
    rec.push(Metric::within("katok_lambda2", k.exponents[1], None, Some(-f64::MIN_POSITIVE)));
    rec.push(Metric::within("katok_sum", (k.exponents[0] + k.exponents[1]).abs(), None, Some(1e-4)));
    let o = lyapunov_exponents(&km, &TorusPoint::origin(), n_katok).map_err(CliError::stage("hyperbolicity"))?;
    rec.push(Metric::within("katok_origin_lambda1", o.exponents[0].abs(), None, Some(1e-6)));
    let conv = csv_table(&["n", "lambda1", "lambda2"], k.convergence.iter().copied())?;
    Ok(Outcome { record: rec, artifacts: vec![Artifact::new("katok_convergence.csv", conv)] })
}

fn pesin_blocks(ctx: &RunContext) -> Result<Outcome, CliError> {
    let params = PesinBlockParams { beta1: 0.9, beta2: 0.9, eps: 0.05, horizon: 20, ..PesinBlockParams::default() };
    let (sample_size, k_nest, k_origin) = (1000usize, 1..=3u32, 10u32);
    let config = json!({"params": params, "sample": sample_size, "nesting_k": [1, 3], "katok_origin_k_max": k_origin});
    let mut rec = ResultRecord::new("pesin-blocks", &config, ctx.seed);
    let cat = LinearToralMap::<f64>::cat_map();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let sample: Vec<TorusPoint<f64>> = (0..sample_size).map(|_| TorusPoint::new(rng.random(), rng.random())).collect();
    let mut rows = Vec::new();
    for (i, x) in sample.iter().enumerate() {
        let w = pesin_block_membership(&cat, x, &params).map_err(CliError::stage("hyperbolicity"))?;
        rows.push((i, x.x(), x.y(), w.member, w.margins.stable, w.margins.unstable, w.margins.angle));
    }
    let members = rows.iter().filter(|r| r.3).count();
    rec.push(Metric::within("cat_fraction_in_block_1", members as f64 / sample_size as f64, Some(1.0), None));
    let mono = block_monotonicity_check(&cat, &sample, &params, k_nest).map_err(CliError::stage("hyperbolicity"))?;
    rec.push(Metric::within("nesting_violations", mono.nesting_violations.len() as f64, None, Some(0.0)));
    rec.push(Metric::within("forward_violations", mono.image_violations.len() as f64, None, Some(0.0)));
    let km = KatokMap::<f64>::new(KatokParams::default()).map_err(CliError::stage("systems"))?;
    let mut origin_members = 0;
    for k in 1..=k_origin {
        let p = PesinBlockParams { k, ..params };
        if pesin_block_membership(&km, &TorusPoint::origin(), &p).map_err(CliError::stage("hyperbolicity"))?.member {
            origin_members += 1;
        }
    }
    rec.push(Metric::within("katok_origin_memberships", origin_members as f64, None, Some(0.0)));
    let table = csv_table(&["i", "x", "y", "member", "stable_margin", "unstable_margin", "angle_margin"], rows)?;
    Ok(Outcome { record: rec, artifacts: vec![Artifact::new("cat_membership.csv", table)] })
}

/// Parameters of the shift construction between `0^inf` and `1^inf`.
pub fn shift_historic_params(mode: ScheduleMode) -> ConstructParams {
    ConstructParams {
        library: LibraryConfig { k_max: 8, base_length: 2, length_step: 2, cell: 0.75, ..LibraryConfig::default() },
        schedule: ScheduleConfig { mode, growth: 2.5, max_length: 1 << 32, ..ScheduleConfig::default() },
        horizon: Some(1_000_000),
        burn_in: Some(100),
        ..ConstructParams::default()
    }
}

fn fixed_word_target(c: u8) -> Target<SymbolicWord, f64> {
    let w = SymbolicWord::constant(c);
    Target::ergodic(format!("delta({c}^inf)"), Component::fixed(Measure::Atomic(AtomicMeasure::dirac(w.clone())), vec![w]))
}

fn shift_historic(ctx: &RunContext) -> Result<Outcome, CliError> {
    let params = shift_historic_params(ctx.mode);
    let (truncation, tolerance, from_q) = (16usize, 0.05, 4usize);
    let config = json!({"params": params, "basis_truncation": truncation, "tolerance": tolerance, "checked_from_q": from_q});
    let mut rec = ResultRecord::new("shift-historic", &config, ctx.seed);
    let sh = FullShift::<f64>::new();
    let targets = [fixed_word_target(0), fixed_word_target(1)];
    let basis = TestBasis::cylinders(truncation);
    let phi = Observable::new("x0 = 1", 1.0, |w: &SymbolicWord| w.symbol(0) as f64);
    let out = construct_historic_point(&sh, [&targets[0], &targets[1]], &basis, &phi, &params)
        .map_err(CliError::stage("gluing"))?;
    for c in &out.checkpoints {
        let name = format!("D(E_M{}, mu{})", c.q, c.target);
        rec.push(if c.q >= from_q { Metric::within(name, c.distance, None, Some(tolerance)) } else { Metric::info(name, c.distance) });
    }
    let horizon = params.horizon.unwrap_or(out.pseudo_len) as usize;
    let burn_in = out.report.burn_in;
    let (low, high) = indicator_excursions(&out.z, horizon, burn_in, 0.1, 0.9);
    rec.push(Metric::within("tail_min", out.report.tail_min, None, Some(0.1)));
    rec.push(Metric::within("tail_max", out.report.tail_max, Some(0.9), None));
    rec.push(Metric::within("low_excursions", low as f64, Some(2.0), None));
    rec.push(Metric::within("high_excursions", high as f64, Some(2.0), None));
    rec.push(Metric::info("horizon", horizon as f64));
    rec.push(Metric::info("burn_in", burn_in as f64));
    Ok(Outcome {
        record: rec,
        artifacts: vec![
            Artifact::json("point.json", &out.z),
            Artifact::new("trace.csv", out.report.trace_csv().map_err(CliError::csv)?),
            Artifact::json("checkpoints.json", &out.checkpoints),
            Artifact::json("schedule.json", &out.schedule),
        ],
    })
}

/// Number of separate visits of the running average of `x_i` (`i < horizon`,
/// counted from `burn_in`) to `[0, low]` and to `[high, 1]`.
pub fn indicator_excursions(z: &SymbolicWord, horizon: usize, burn_in: usize, low: f64, high: f64) -> (usize, usize) {
    let mut ones = 0usize;
    let (mut lows, mut highs, mut state) = (0, 0, 0i8);
    for i in 0..horizon {
        ones += z.symbol(i) as usize;
        let n = i + 1;
        if n < burn_in.max(1) {
            continue;
        }
        let avg = ones as f64 / n as f64;
        if avg <= low && state != -1 {
            lows += 1;
            state = -1;
        } else if avg >= high && state != 1 {
            highs += 1;
            state = 1;
        }
    }
    (lows, highs)
}

/// Parameters of the cat map construction between the fixed point and a
/// period-3 orbit.
pub fn cat_historic_params(mode: ScheduleMode) -> ConstructParams {
    ConstructParams {
        library: LibraryConfig {
            k_max: 5,
            base_length: 6,
            length_step: 6,
            cell: 0.004,
            eps_sep: 0.1,
            gamma: 0.5,
            ..LibraryConfig::default()
        },
        schedule: ScheduleConfig { mode, growth: 2.5, max_length: 1 << 32, ..ScheduleConfig::default() },
        burn_in: Some(100),
        shadow_limit: Some(0.1 / 4.0),
        ..ConstructParams::default()
    }
}

pub fn period_three_orbit() -> Vec<TorusPoint<f64>> {
    vec![TorusPoint::new(0.75, 0.5), TorusPoint::new(0.0, 0.25), TorusPoint::new(0.25, 0.25)]
}

fn cat_historic(ctx: &RunContext) -> Result<Outcome, CliError> {
    let params = cat_historic_params(ctx.mode);
    let truncation = 16usize;
    let config = json!({"params": params, "basis_truncation": truncation});
    let mut rec = ResultRecord::new("cat-historic", &config, ctx.seed);
    let cat = LinearToralMap::<f64>::cat_map();
    let o = TorusPoint::origin();
    let orbit = period_three_orbit();
    let mu1 = AtomicMeasure::dirac(o);
    let mu2 = AtomicMeasure::uniform(orbit.clone(), "period 3").map_err(CliError::stage("measures"))?;
    let cos = |p: &TorusPoint<f64>| (TAU * p.x()).cos();
    let separation = (mu1.integrate(cos) - mu2.integrate(cos)).abs();
    let t1 = Target::ergodic("fixed point", Component::fixed(Measure::Atomic(mu1), vec![o]));
    let t2 = Target::ergodic("period 3", Component::fixed(Measure::Atomic(mu2), orbit));
    let basis = TestBasis::trig(truncation);
    let phi = Observable::new("cos(2 pi x)", 1.0, cos);
    let out = construct_historic_point(&cat, [&t1, &t2], &basis, &phi, &params).map_err(CliError::stage("gluing"))?;
    let limit = params.library.eps_sep / 4.0;
    rec.push(Metric::within("gap", out.report.gap, Some(0.8 * separation), None));
    rec.push(Metric::within("certified_shadow_distance", out.shadow.certified_local, None, Some(limit)));
    rec.push(Metric::within("max_shadow_distance", out.shadow.max_distance, None, Some(limit)));
    rec.push(Metric::info("integral_separation", separation));
    for c in &out.checkpoints {
        rec.push(Metric::info(format!("D(E_M{}, mu{})", c.q, c.target), c.distance));
    }
    Ok(Outcome {
        record: rec,
        artifacts: vec![
            Artifact::new("trace.csv", out.report.trace_csv().map_err(CliError::csv)?),
            Artifact::json("checkpoints.json", &out.checkpoints),
            Artifact::json("schedule.json", &out.schedule),
        ],
    })
}

/// Shift entropy `-p log p - (1 - p) log (1 - p)` in nats.
pub fn bernoulli_entropy(p: f64) -> f64 {
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

/// Bernoulli component whose candidates are all periodic words of length
/// `n` when `n <= 16`, and otherwise `2^16` random periodic words drawn
/// with symbol probability `p` from a stream keyed by `n`.
pub fn bernoulli_component(p: f64, seed: u64) -> Component<SymbolicWord, f64> {
    Component::new(Measure::Bernoulli { p }, move |n: usize| {
        if n <= 16 {
            (0u64..1 << n)
                .map(|c| {
                    let w: Vec<u8> = (0..n).map(|i| ((c >> (n - 1 - i)) & 1) as u8).collect();
                    SymbolicWord::periodic(w).expect("nonempty block")
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            (0..1 << 16)
                .map(|_| {
                    let w: Vec<u8> = (0..n).map(|_| rng.random_bool(p) as u8).collect();
                    SymbolicWord::periodic(w).expect("nonempty block")
                })
                .collect()
        }
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BernoulliEnsembleParams {
    pub p: [f64; 2],
    pub truncation: usize,
    pub library: LibraryConfig,
    pub schedule: ScheduleConfig,
    pub k: usize,
    pub enumeration_limit: u64,
    pub samples: usize,
}

pub fn bernoulli_ensemble_params(mode: ScheduleMode) -> BernoulliEnsembleParams {
    BernoulliEnsembleParams {
        p: [0.5, 0.35],
        truncation: 16,
        library: LibraryConfig { k_max: 2, base_length: 12, length_step: 4, cell: 0.75, eps_sep: 0.5, ..LibraryConfig::default() },
        schedule: ScheduleConfig { mode, ..ScheduleConfig::default() },
        k: 2,
        enumeration_limit: 1_000_000,
        samples: 1 << 18,
    }
}

/// The level-`k` ensemble of shadowing points between two Bernoulli targets
/// and its uniform measure `alpha_k`.
pub fn bernoulli_ensemble(
    params: &BernoulliEnsembleParams,
    seed: u64,
) -> Result<Ensemble<SymbolicWord, f64>, CliError> {
    let sh = FullShift::<f64>::new();
    let t1 = Target::ergodic(format!("bernoulli({})", params.p[0]), bernoulli_component(params.p[0], seed));
    let t2 = Target::ergodic(format!("bernoulli({})", params.p[1]), bernoulli_component(params.p[1], seed ^ 1));
    let basis = TestBasis::cylinders(params.truncation);
    let lib = build_segment_library(&sh, [&t1, &t2], &basis, &params.library).map_err(CliError::stage("gluing"))?;
    let sched = build_schedule(&lib, params.k, &params.schedule).map_err(CliError::stage("gluing"))?;
    ensemble_and_alpha(&sh, &lib, &sched, params.k, params.enumeration_limit, params.samples, seed)
        .map_err(CliError::stage("gluing"))
}

fn shift_variational(ctx: &RunContext) -> Result<Outcome, CliError> {
    let ens_params = bernoulli_ensemble_params(ctx.mode);
    let bowen_points = 1usize << 16;
    let bowen_cfg = BowenSetConfig { eps: 0.5, n_min: 8, n_compare: 10, extra_lengths: 2, bisection_steps: 30 };
    let katok_cfg = KatokConfig { eps: 0.5, delta: 0.1, n_list: (4..=9).collect(), atoms_per_ball: 8, centers_per_ball: 16 };
    let config = json!({"ensemble": ens_params, "bowen_points": bowen_points, "bowen": bowen_cfg, "katok": katok_cfg, "katok_depth": 10});
    let mut rec = ResultRecord::new("shift-variational", &config, ctx.seed);
    for p in ens_params.p {
        rec.push(Metric::within(format!("entropy_bernoulli({p})_over_log2"), bernoulli_entropy(p) / LN_2, Some(0.9), None));
    }
    let ens = bernoulli_ensemble(&ens_params, ctx.seed)?;
    rec.push(Metric::info("ensemble_points", ens.points.len() as f64));
    let sh = FullShift::<f64>::new();
    let z = &ens.points[..bowen_points.min(ens.points.len())];
    let bowen = bowen_set_entropy(&sh, z, &[], &bowen_cfg).map_err(CliError::stage("entropy"))?;
    let h = bowen.estimate.value;
    rec.push(Metric::within("bowen_over_log2", h / LN_2, Some(0.7), Some(1.05)));
    let reps = cylinder_representatives(10);
    let nu = AtomicMeasure::uniform(reps.clone(), "bernoulli(1/2)").map_err(CliError::stage("measures"))?;
    let katok = katok_entropy(&sh, &nu, SampleKind::Exact, &reps, &katok_cfg).map_err(CliError::stage("entropy"))?;
    rec.push(Metric::within("bowen_over_katok_max", h / katok.value, None, Some(1.05)));
    Ok(Outcome {
        record: rec,
        artifacts: vec![
            Artifact::json("bowen.json", &bowen.estimate),
            Artifact::jsonl("ensemble.jsonl", ens.points.iter().map(|w| w.to_string())),
        ],
    })
}

fn edp_certifier(ctx: &RunContext) -> Result<Outcome, CliError> {
    let ens_params = bernoulli_ensemble_params(ctx.mode);
    let cfg = EdpConfig { eps: 0.5, s: 0.7 * LN_2, k_const: 1.0, n_min: 10, n_max: 20 };
    let config = json!({"ensemble": ens_params, "edp": cfg});
    let mut rec = ResultRecord::new("edp-certifier", &config, ctx.seed);
    let ens = bernoulli_ensemble(&ens_params, ctx.seed)?;
    let sh = FullShift::<f64>::new();
    let alpha = edp_certify(&sh, &[ens.alpha.clone()], &ens.points, &cfg).map_err(CliError::stage("entropy"))?;
    rec.push(Metric::flag("alpha_certified", alpha.certified));
    rec.push(Metric::info("alpha_worst_ratio", alpha.worst_ratio));
    rec.push(Metric::info("balls_tested", alpha.balls_tested as f64));
    let dirac = AtomicMeasure::dirac(ens.points[0].clone());
    let point = edp_certify(&sh, &[dirac], &ens.points, &cfg).map_err(CliError::stage("entropy"))?;
    rec.push(Metric::flag("dirac_rejected", !point.certified));
    rec.push(Metric::info("dirac_worst_ratio", point.worst_ratio));
    Ok(Outcome { record: rec, artifacts: vec![Artifact::json("edp.json", &json!({"alpha": alpha, "dirac": point}))] })
}

fn random_torus_measure(rng: &mut ChaCha8Rng) -> AtomicMeasure<TorusPoint<f64>, f64> {
    let n = rng.random_range(1..6);
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = raw.iter().sum();
    let atoms = raw.iter().map(|w| (TorusPoint::new(rng.random(), rng.random()), w / total)).collect();
    AtomicMeasure::new(atoms, "random").expect("weights sum to one")
}

fn measure_metric(ctx: &RunContext) -> Result<Outcome, CliError> {
    let (triples, truncation, doublings, mixtures) = (1000usize, 16usize, [4usize, 8, 16], 50usize);
    let config = json!({"triples": triples, "truncation": truncation, "doublings": doublings, "k_max": mixtures});
    let mut rec = ResultRecord::new("measure-metric", &config, ctx.seed);
    let stage = CliError::stage("measures");
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let basis = TestBasis::<TorusPoint<f64>>::trig(truncation);
    let (mut asym, mut excess, mut max_d, mut min_d) = (0.0f64, f64::NEG_INFINITY, 0.0f64, f64::INFINITY);
    for _ in 0..triples {
        let m: Vec<_> = (0..3).map(|_| random_torus_measure(&mut rng)).collect();
        let d = |a: usize, b: usize| metric_d(&m[a], &m[b], &basis).map(|r| r.value);
        let (ab, ba, bc, ac) = (d(0, 1).map_err(stage)?, d(1, 0).map_err(stage)?, d(1, 2).map_err(stage)?, d(0, 2).map_err(stage)?);
        asym = asym.max((ab - ba).abs());
        excess = excess.max(ac - ab - bc);
        max_d = max_d.max(ab).max(bc).max(ac);
        min_d = min_d.min(ab).min(bc).min(ac);
    }
    rec.push(Metric::within("max_asymmetry", asym, None, Some(0.0)));
    rec.push(Metric::within("max_triangle_excess", excess, None, Some(1e-12)));
    rec.push(Metric::within("max_distance", max_d, None, Some(1.0)));
    rec.push(Metric::within("min_distance", min_d, Some(0.0), None));
    let mut worst_tail = 0.0f64;
    for &i in &doublings {
        let (small, large) = (TestBasis::<TorusPoint<f64>>::trig(i), TestBasis::<TorusPoint<f64>>::trig(2 * i));
        for _ in 0..200 {
            let (a, b) = (random_torus_measure(&mut rng), random_torus_measure(&mut rng));
            let ds = metric_d(&a, &b, &small).map_err(stage)?.value;
            let dl = metric_d(&a, &b, &large).map_err(stage)?.value;
            worst_tail = worst_tail.max((dl - ds).abs() * 2f64.powi(i as i32));
        }
    }
    rec.push(Metric::within("truncation_error_over_2^-I", worst_tail, None, Some(1.0)));
    let cyl = TestBasis::<SymbolicWord>::cylinders(truncation);
    let mut worst_k = 0.0f64;
    for k in 1..=mixtures {
        let (w, p): (f64, f64) = (rng.random(), rng.random());
        let nu = ConvexCombination::new(vec![
            (Measure::Bernoulli { p }, w),
            (Measure::Atomic(AtomicMeasure::dirac(SymbolicWord::constant(1))), 1.0 - w),
        ])
        .map_err(stage)?;
        let r = rational_approximation(&nu, k, &cyl).map_err(stage)?;
        worst_k = worst_k.max(r.distance * k as f64);
    }
    rec.push(Metric::within("rational_distance_times_k", worst_k, None, Some(1.0)));
    Ok(Outcome { record: rec, artifacts: Vec::new() })
}
