//! Subcommands driven by an [`ExperimentConfig`].

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, ObservableSpec, StartSpec, SystemSpec, TargetSpec};
use super::experiments::{bernoulli_component, lattice};
use super::record::{csv_table, Artifact, Metric, Outcome, ResultRecord};
use super::CliError;
use crate::entropy::{bowen_set_entropy, edp_certify, katok_entropy, BowenSetConfig, EdpConfig, KatokConfig, SampleKind};
use crate::gluing::{construct_historic_point, Component, Gluable, Observable, Target};
use crate::hyperbolicity::{block_monotonicity_check, lyapunov_exponents, pesin_block_membership, PesinBlockParams};
use crate::measures::{sampling, AtomicMeasure, BasisPoint, Measure, TestBasis};
use crate::systems::{
    DynamicalSystem, FullShift, Invertible, KatokMap, LinearToralMap, OrbitIter, SmoothSystem, SymbolicWord, TorusPoint,
};

/// Shift orbits longer than this would need words too long to enumerate.
const MAX_SHIFT_DEPTH: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyKind {
    Katok,
    Bowen,
    Edp,
}

enum System {
    Linear(LinearToralMap<f64>),
    Katok(KatokMap<f64>),
    Shift(FullShift<f64>),
}

fn build_system(spec: &SystemSpec) -> Result<System, CliError> {
    let stage = CliError::stage("systems");
    Ok(match spec {
        SystemSpec::Cat => System::Linear(LinearToralMap::cat_map()),
        SystemSpec::Linear { matrix } => System::Linear(LinearToralMap::new("linear", *matrix).map_err(stage)?),
        SystemSpec::Katok { params } => System::Katok(KatokMap::new(*params).map_err(stage)?),
        SystemSpec::Shift => System::Shift(FullShift::new()),
    })
}

fn seed_of(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.expect("validated configs carry a seed")
}

fn record(command: &str, cfg: &ExperimentConfig) -> ResultRecord {
    let mut v = serde_json::to_value(cfg).expect("configs serialize");
    // Output paths do not change results.
    v.as_object_mut().expect("configs are objects").remove("out");
    ResultRecord::new(command, &serde_json::json!({"command": command, "config": v}), seed_of(cfg))
}

fn needs_torus(command: &str) -> CliError {
    CliError::Validation(vec![format!("system = shift: {command} needs a smooth torus map")])
}

fn torus_start(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> TorusPoint<f64> {
    match &cfg.start {
        Some(StartSpec::Torus([x, y])) => TorusPoint::new(x.rem_euclid(1.0), y.rem_euclid(1.0)),
        _ => TorusPoint::new(rng.random(), rng.random()),
    }
}

fn word_start(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, len: usize) -> Result<SymbolicWord, CliError> {
    match &cfg.start {
        Some(StartSpec::Word(w)) => w.parse().map_err(CliError::stage("systems")),
        _ => Ok(sampling::bernoulli_word(rng, 0.5, len)),
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(cfg));
    let n = cfg.steps;
    let (rows, header): (Vec<Vec<String>>, &[&str]) = match build_system(&cfg.system)? {
        System::Linear(s) => (torus_rows(&s, torus_start(cfg, &mut rng), n)?, &["n", "x", "y"]),
        System::Katok(s) => (torus_rows(&s, torus_start(cfg, &mut rng), n)?, &["n", "x", "y"]),
        System::Shift(s) => {
            let x = word_start(cfg, &mut rng, n)?;
            let mut it = OrbitIter::new(&s, x);
            let rows = it.by_ref().take(n).enumerate().map(|(i, w)| vec![i.to_string(), w.to_string()]).collect();
            it.finish().map_err(CliError::stage("systems"))?;
            (rows, &["n", "word"])
        }
    };
    let mut rec = record("simulate", cfg);
    rec.push(Metric::info("steps", rows.len() as f64));
    Ok(Outcome { record: rec, artifacts: vec![Artifact::new("orbit.csv", csv_table(header, rows)?)] })
}

fn torus_rows<S>(system: &S, x: TorusPoint<f64>, n: usize) -> Result<Vec<Vec<String>>, CliError>
where
    S: DynamicalSystem<Point = TorusPoint<f64>>,
{
    let mut it = OrbitIter::new(system, x);
    let rows = it.by_ref().take(n).enumerate().map(|(i, p)| vec![i.to_string(), p.x().to_string(), p.y().to_string()]).collect();
    it.finish().map_err(CliError::stage("systems"))?;
    Ok(rows)
}

pub fn lyapunov(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(cfg));
    let x = torus_start(cfg, &mut rng);
    match build_system(&cfg.system)? {
        System::Linear(s) => lyapunov_on(&s, x, cfg),
        System::Katok(s) => lyapunov_on(&s, x, cfg),
        System::Shift(_) => Err(needs_torus("lyapunov")),
    }
}

fn lyapunov_on<S: SmoothSystem<Scalar = f64>>(system: &S, x: TorusPoint<f64>, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let r = lyapunov_exponents(system, &x, cfg.steps).map_err(CliError::stage("hyperbolicity"))?;
    let mut rec = record("lyapunov", cfg);
    rec.push(Metric::info("lambda1", r.exponents[0]));
    rec.push(Metric::info("lambda2", r.exponents[1]));
    rec.push(Metric::info("sum", r.exponents[0] + r.exponents[1]));
    let table = csv_table(&["n", "lambda1", "lambda2"], r.convergence.iter().copied())?;
    Ok(Outcome { record: rec, artifacts: vec![Artifact::new("convergence.csv", table), Artifact::json("exponents.json", &r)] })
}

pub fn pesin_blocks(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match build_system(&cfg.system)? {
        System::Linear(s) => pesin_on(&s, cfg),
        System::Katok(s) => pesin_on(&s, cfg),
        System::Shift(_) => Err(needs_torus("pesin-blocks")),
    }
}

fn pesin_on<S: SmoothSystem<Scalar = f64> + Invertible>(system: &S, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let stage = CliError::stage("hyperbolicity");
    let p = &cfg.pesin;
    let params = PesinBlockParams {
        beta1: p.beta1,
        beta2: p.beta2,
        eps: p.eps,
        k: p.k_min,
        eps0: p.eps0,
        horizon: p.horizon,
        invariance_tolerance: p.invariance_tolerance,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(cfg));
    let sample: Vec<TorusPoint<f64>> = (0..p.sample).map(|_| TorusPoint::new(rng.random(), rng.random())).collect();
    let mut rec = record("pesin-blocks", cfg);
    let mut rows = Vec::new();
    for k in p.k_min..=p.k_max {
        let mut members = 0usize;
        for (i, x) in sample.iter().enumerate() {
            let w = pesin_block_membership(system, x, &PesinBlockParams { k, ..params }).map_err(stage)?;
            members += w.member as usize;
            rows.push((i, k, x.x(), x.y(), w.member, w.margins.stable, w.margins.unstable, w.margins.angle));
        }
        rec.push(Metric::info(format!("fraction_in_block_{k}"), members as f64 / sample.len() as f64));
    }
    if p.k_min < p.k_max {
        let mono = block_monotonicity_check(system, &sample, &params, p.k_min..=p.k_max - 1).map_err(stage)?;
        rec.push(Metric::within("nesting_violations", mono.nesting_violations.len() as f64, None, Some(0.0)));
        rec.push(Metric::within("forward_violations", mono.image_violations.len() as f64, None, Some(0.0)));
    }
    let table = csv_table(&["i", "k", "x", "y", "member", "stable_margin", "unstable_margin", "angle_margin"], rows)?;
    Ok(Outcome { record: rec, artifacts: vec![Artifact::new("membership.csv", table)] })
}

pub fn entropy(kind: EntropyKind, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let e = &cfg.entropy;
    if kind == EntropyKind::Edp && e.s.is_none() {
        return Err(CliError::Validation(vec!["entropy.s = missing: required by entropy edp".into()]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(cfg));
    match build_system(&cfg.system)? {
        System::Linear(s) => torus_entropy(&s, kind, cfg, &mut rng),
        System::Katok(s) => torus_entropy(&s, kind, cfg, &mut rng),
        System::Shift(s) => {
            let depth = e.n_max + e.extra_lengths + 1;
            if depth > MAX_SHIFT_DEPTH {
                return Err(CliError::Validation(vec![format!(
                    "entropy.n_max = {}: words of length {depth} exceed the shift limit {MAX_SHIFT_DEPTH}",
                    e.n_max
                )]));
            }
            let (nu, z) = match kind {
                EntropyKind::Katok => {
                    let words = super::experiments::cylinder_representatives(e.n_max + 1);
                    let p = e.bernoulli_p;
                    let atoms = words
                        .iter()
                        .map(|w| {
                            let ones = w.take(e.n_max + 1).iter().filter(|&&s| s == 1).count() as i32;
                            (w.clone(), p.powi(ones) * (1.0 - p).powi(e.n_max as i32 + 1 - ones))
                        })
                        .collect();
                    (AtomicMeasure::new(atoms, format!("bernoulli({p})")).map_err(CliError::stage("measures"))?, words)
                }
                _ => {
                    let z: Vec<SymbolicWord> = (0..e.sample).map(|_| sampling::bernoulli_word(&mut rng, e.bernoulli_p, depth)).collect();
                    (AtomicMeasure::uniform(z.clone(), "uniform on Z").map_err(CliError::stage("measures"))?, z)
                }
            };
            entropy_on(&s, kind, cfg, nu, SampleKind::Exact, &z)
        }
    }
}

fn torus_entropy<S>(system: &S, kind: EntropyKind, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome, CliError>
where
    S: DynamicalSystem<Point = TorusPoint<f64>, Scalar = f64>,
{
    let e = &cfg.entropy;
    let (corner, width) = e.patch.map_or(([0.0, 0.0], 1.0), |p| (p.corner, p.width));
    let grid = lattice(corner, width, e.grid);
    let stage = CliError::stage("measures");
    match kind {
        EntropyKind::Katok => {
            let pts: Vec<TorusPoint<f64>> = (0..e.sample).map(|_| sampling::lebesgue_in_box(rng, corner, width)).collect();
            let nu = AtomicMeasure::uniform(pts, "lebesgue sample").map_err(stage)?;
            entropy_on(system, kind, cfg, nu, SampleKind::Iid, &grid)
        }
        _ => {
            let nu = AtomicMeasure::uniform(grid.clone(), "uniform on Z").map_err(stage)?;
            entropy_on(system, kind, cfg, nu, SampleKind::Exact, &grid)
        }
    }
}

fn entropy_on<S: DynamicalSystem<Scalar = f64>>(
    system: &S,
    kind: EntropyKind,
    cfg: &ExperimentConfig,
    nu: AtomicMeasure<S::Point, f64>,
    sample_kind: SampleKind,
    points: &[S::Point],
) -> Result<Outcome, CliError> {
    let e = &cfg.entropy;
    let stage = CliError::stage("entropy");
    match kind {
        EntropyKind::Katok => {
            let kc = KatokConfig {
                eps: e.eps,
                delta: e.delta,
                n_list: (e.n_min..=e.n_max).collect(),
                atoms_per_ball: e.atoms_per_ball,
                centers_per_ball: e.centers_per_ball,
            };
            let est = katok_entropy(system, &nu, sample_kind, points, &kc).map_err(stage)?;
            let mut rec = record("entropy-katok", cfg);
            rec.push(Metric::info("value", est.value));
            let counts = csv_table(
                &["n", "separated", "spanning", "katok"],
                est.counts.iter().map(|c| (c.n, c.separated, c.spanning, c.katok)),
            )?;
            Ok(Outcome { record: rec, artifacts: vec![Artifact::new("counts.csv", counts), Artifact::json("estimate.json", &est)] })
        }
        EntropyKind::Bowen => {
            let bc = BowenSetConfig {
                eps: e.eps,
                n_min: e.n_min,
                n_compare: e.n_max,
                extra_lengths: e.extra_lengths,
                bisection_steps: e.bisection_steps,
            };
            let r = bowen_set_entropy(system, points, &[], &bc).map_err(stage)?;
            let mut rec = record("entropy-bowen", cfg);
            rec.push(Metric::info("value", r.estimate.value));
            rec.push(Metric::info("cover_size", r.certificate.cover.len() as f64));
            Ok(Outcome { record: rec, artifacts: vec![Artifact::json("estimate.json", &r.estimate)] })
        }
        EntropyKind::Edp => {
            let ec = EdpConfig {
                eps: e.eps,
                s: e.s.expect("checked by the caller"),
                k_const: e.k_const,
                n_min: e.n_min,
                n_max: e.n_max,
            };
            let r = edp_certify(system, &[nu], points, &ec).map_err(stage)?;
            let mut rec = record("entropy-edp", cfg);
            rec.push(Metric::flag("certified", r.certified));
            rec.push(Metric::info("worst_ratio", r.worst_ratio));
            rec.push(Metric::info("balls_tested", r.balls_tested as f64));
            Ok(Outcome { record: rec, artifacts: vec![Artifact::json("edp.json", &r)] })
        }
    }
}

pub fn construct_historic(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    if cfg.targets.len() != 2 {
        return Err(CliError::Validation(vec![format!(
            "targets = {} given: construct-historic needs exactly two",
            cfg.targets.len()
        )]));
    }
    let seed = seed_of(cfg);
    match build_system(&cfg.system)? {
        System::Shift(s) => {
            let targets = cfg
                .targets
                .iter()
                .enumerate()
                .map(|(i, t)| shift_target(t, seed.wrapping_add(i as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            let phi = Observable::new("x0", 1.0, |w: &SymbolicWord| w.symbol(0) as f64);
            construct_on(&s, &targets, TestBasis::cylinders(cfg.basis_truncation), phi, cfg, |z| z.to_string())
        }
        System::Linear(s) => {
            let targets = cfg.targets.iter().map(torus_target).collect::<Result<Vec<_>, _>>()?;
            let phi = match cfg.observable {
                Some(ObservableSpec::CosX) | None => Observable::new("cos(2 pi x)", 1.0, |p: &TorusPoint<f64>| (TAU * p.x()).cos()),
                Some(ObservableSpec::FirstSymbol) => unreachable!("rejected by validation"),
            };
            construct_on(&s, &targets, TestBasis::trig(cfg.basis_truncation), phi, cfg, |z| format!("{} {}", z.x(), z.y()))
        }
        System::Katok(s) => Err(CliError::Stage { stage: "gluing".into(), message: format!("{} has no shadowing backend", s.name()) }),
    }
}

fn shift_target(t: &TargetSpec, seed: u64) -> Result<Target<SymbolicWord, f64>, CliError> {
    Ok(match t {
        TargetSpec::Word { word } => {
            let w: SymbolicWord = word.parse().map_err(CliError::stage("systems"))?;
            Target::ergodic(word.clone(), Component::fixed(Measure::Atomic(AtomicMeasure::dirac(w.clone())), vec![w]))
        }
        TargetSpec::Bernoulli { p } => Target::ergodic(format!("bernoulli({p})"), bernoulli_component(*p, seed)),
        TargetSpec::Orbit { .. } => unreachable!("rejected by validation"),
    })
}

fn torus_target(t: &TargetSpec) -> Result<Target<TorusPoint<f64>, f64>, CliError> {
    match t {
        TargetSpec::Orbit { points } => {
            let pts: Vec<TorusPoint<f64>> = points.iter().map(|p| TorusPoint::new(p[0], p[1])).collect();
            let mu = AtomicMeasure::uniform(pts.clone(), "orbit").map_err(CliError::stage("measures"))?;
            Ok(Target::ergodic(format!("orbit of {} points", pts.len()), Component::fixed(Measure::Atomic(mu), pts)))
        }
        _ => unreachable!("rejected by validation"),
    }
}

fn construct_on<S>(
    system: &S,
    targets: &[Target<S::Point, f64>],
    basis: TestBasis<S::Point>,
    phi: Observable<S::Point>,
    cfg: &ExperimentConfig,
    show: impl Fn(&S::Point) -> String,
) -> Result<Outcome, CliError>
where
    S: Gluable<Scalar = f64>,
    S::Point: BasisPoint<f64> + serde::Serialize,
{
    let out = construct_historic_point(system, [&targets[0], &targets[1]], &basis, &phi, &cfg.construct)
        .map_err(CliError::stage("gluing"))?;
    let mut rec = record("construct-historic", cfg);
    rec.push(Metric::info("gap", out.report.gap));
    rec.push(Metric::flag("historic", out.report.historic));
    rec.push(Metric::info("pseudo_orbit_length", out.pseudo_len as f64));
    rec.push(Metric::info("certified_shadow_distance", out.shadow.certified_local));
    for c in &out.checkpoints {
        rec.push(Metric::info(format!("D(E_M{}, mu{})", c.q, c.target), c.distance));
    }
    rec.note(format!("point: {}", show(&out.z)));
    Ok(Outcome {
        record: rec,
        artifacts: vec![
            Artifact::new("trace.csv", out.report.trace_csv().map_err(CliError::csv)?),
            Artifact::json("checkpoints.json", &out.checkpoints),
            Artifact::json("point.json", &out.z),
        ],
    })
}
