//! The JSON experiment configuration and its validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::gluing::ConstructParams;
use crate::systems::{KatokMap, KatokParams, SymbolicWord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSpec {
    Cat,
    Linear { matrix: [[i64; 2]; 2] },
    Katok {
        #[serde(default)]
        params: KatokParams,
    },
    Shift,
}

impl SystemSpec {
    pub fn is_shift(&self) -> bool {
        matches!(self, SystemSpec::Shift)
    }
}

/// Initial point: `[x, y]` on the torus or a word such as `"01(0)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Torus([f64; 2]),
    Word(String),
}

/// Axis-aligned box `[corner, corner + width]^2` on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub corner: [f64; 2],
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropySection {
    pub eps: f64,
    pub delta: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Centers (Katok) or the set `Z` (Bowen, EDP) on a `grid x grid` lattice.
    pub grid: usize,
    /// Size of the i.i.d. sample.
    pub sample: usize,
    /// Restrict samples and lattices to a box; the whole torus otherwise.
    pub patch: Option<Patch>,
    pub atoms_per_ball: usize,
    pub centers_per_ball: usize,
    /// Exponent certified by the entropy distribution check.
    pub s: Option<f64>,
    pub k_const: f64,
    pub extra_lengths: usize,
    pub bisection_steps: usize,
    /// Symbol probability of random words on the shift.
    pub bernoulli_p: f64,
}

impl Default for EntropySection {
    fn default() -> Self {
        Self {
            eps: 0.05,
            delta: 0.1,
            n_min: 6,
            n_max: 14,
            grid: 512,
            sample: 100_000,
            patch: None,
            atoms_per_ball: 8,
            centers_per_ball: 16,
            s: None,
            k_const: 1.0,
            extra_lengths: 2,
            bisection_steps: 30,
            bernoulli_p: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PesinSection {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub eps0: f64,
    pub horizon: usize,
    pub invariance_tolerance: f64,
    pub sample: usize,
    pub k_min: u32,
    pub k_max: u32,
}

impl Default for PesinSection {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.9,
            eps: 0.05,
            eps0: 1.0,
            horizon: 20,
            invariance_tolerance: 1e-6,
            sample: 1000,
            k_min: 1,
            k_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    /// Dirac mass at a shift-invariant word, e.g. `"(0)"`.
    Word { word: String },
    /// Uniform measure on a periodic torus orbit.
    Orbit { points: Vec<[f64; 2]> },
    /// Bernoulli measure on the shift.
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableSpec {
    /// `x_0` on the shift.
    FirstSymbol,
    /// `cos(2 pi x)` on the torus.
    CosX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub system: SystemSpec,
    pub start: Option<StartSpec>,
    pub steps: usize,
    pub basis_truncation: usize,
    pub entropy: EntropySection,
    pub pesin: PesinSection,
    pub targets: Vec<TargetSpec>,
    pub observable: Option<ObservableSpec>,
    pub construct: ConstructParams,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            system: SystemSpec::Cat,
            start: None,
            steps: 1000,
            basis_truncation: 16,
            entropy: EntropySection::default(),
            pesin: PesinSection::default(),
            targets: Vec::new(),
            observable: None,
            construct: ConstructParams::default(),
            out: None,
        }
    }
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Every violated constraint, as `field = value: rule`.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &str, value: String, rule: &str| {
            if !ok {
                v.push(format!("{field} = {value}: {rule}"));
            }
        };
        check(self.seed.is_some(), "seed", "missing".into(), "a seed is required (config or --seed)");
        check(self.steps >= 1, "steps", self.steps.to_string(), "must be at least 1");
        check(
            (1..=64).contains(&self.basis_truncation),
            "basis_truncation",
            self.basis_truncation.to_string(),
            "must lie in 1..=64",
        );
        if let SystemSpec::Katok { params } = &self.system {
            if let Err(e) = KatokMap::<f64>::new(*params) {
                check(false, "system.params", format!("{params:?}"), &e.to_string());
            }
        }
        if let SystemSpec::Linear { matrix: m } = &self.system {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            check(det.abs() == 1, "system.matrix", format!("{m:?}"), "determinant must be +-1");
        }
        match &self.start {
            Some(StartSpec::Word(w)) => {
                check(self.system.is_shift(), "start", format!("{w:?}"), "words need the shift system");
                if let Err(e) = w.parse::<SymbolicWord>() {
                    check(false, "start", format!("{w:?}"), &e.to_string());
                }
            }
            Some(StartSpec::Torus(p)) => {
                check(!self.system.is_shift(), "start", format!("{p:?}"), "the shift needs a word");
                check(p.iter().all(|c| c.is_finite()), "start", format!("{p:?}"), "coordinates must be finite");
            }
            None => {}
        }

        let e = &self.entropy;
        check(e.eps > 0.0 && e.eps <= 1.0, "entropy.eps", e.eps.to_string(), "must lie in (0,1]");
        check(open_unit(e.delta), "entropy.delta", e.delta.to_string(), "must lie in (0,1)");
        check(e.n_min >= 1, "entropy.n_min", e.n_min.to_string(), "must be at least 1");
        check(e.n_min <= e.n_max, "entropy.n_max", e.n_max.to_string(), "must be at least entropy.n_min");
        check(e.grid >= 1, "entropy.grid", e.grid.to_string(), "must be at least 1");
        check(e.sample >= 1, "entropy.sample", e.sample.to_string(), "must be at least 1");
        check(e.atoms_per_ball >= 1, "entropy.atoms_per_ball", e.atoms_per_ball.to_string(), "must be at least 1");
        check(e.centers_per_ball >= 1, "entropy.centers_per_ball", e.centers_per_ball.to_string(), "must be at least 1");
        if let Some(s) = e.s {
            check(s > 0.0, "entropy.s", s.to_string(), "must be positive");
        }
        check(e.k_const > 0.0, "entropy.k_const", e.k_const.to_string(), "must be positive");
        check(open_unit(e.bernoulli_p), "entropy.bernoulli_p", e.bernoulli_p.to_string(), "must lie in (0,1)");
        if let Some(p) = e.patch {
            check(p.width > 0.0 && p.width <= 1.0, "entropy.patch.width", p.width.to_string(), "must lie in (0,1]");
        }

        let p = &self.pesin;
        check(p.eps > 0.0, "pesin.eps", p.eps.to_string(), "must be positive");
        check(p.beta1 > p.eps, "pesin.beta1", p.beta1.to_string(), "must exceed pesin.eps");
        check(p.beta2 > p.eps, "pesin.beta2", p.beta2.to_string(), "must exceed pesin.eps");
        check(p.eps0 > 0.0, "pesin.eps0", p.eps0.to_string(), "must be positive");
        check(p.horizon >= 1, "pesin.horizon", p.horizon.to_string(), "must be at least 1");
        check(p.sample >= 1, "pesin.sample", p.sample.to_string(), "must be at least 1");
        check(p.k_min >= 1, "pesin.k_min", p.k_min.to_string(), "must be at least 1");
        check(p.k_min <= p.k_max, "pesin.k_max", p.k_max.to_string(), "must be at least pesin.k_min");

        for (i, t) in self.targets.iter().enumerate() {
            let field = format!("targets[{i}]");
            match t {
                TargetSpec::Word { word } => {
                    check(self.system.is_shift(), &field, format!("{word:?}"), "words need the shift system");
                    match word.parse::<SymbolicWord>() {
                        Ok(w) => check(w.shifted(1) == w, &field, format!("{word:?}"), "must be a fixed point of the shift"),
                        Err(e) => check(false, &field, format!("{word:?}"), &e.to_string()),
                    }
                }
                TargetSpec::Orbit { points } => {
                    check(!self.system.is_shift(), &field, format!("{points:?}"), "orbits need a torus system");
                    check(!points.is_empty(), &field, "[]".into(), "needs at least one point");
                }
                TargetSpec::Bernoulli { p } => {
                    check(self.system.is_shift(), &field, p.to_string(), "Bernoulli targets need the shift system");
                    check(open_unit(*p), &format!("{field}.p"), p.to_string(), "must lie in (0,1)");
                }
            }
        }
        if !self.targets.is_empty() {
            check(self.targets.len() == 2, "targets", self.targets.len().to_string(), "exactly two targets are glued");
        }
        match self.observable {
            Some(ObservableSpec::FirstSymbol) => {
                check(self.system.is_shift(), "observable", "first-symbol".into(), "needs the shift system")
            }
            Some(ObservableSpec::CosX) => {
                check(!self.system.is_shift(), "observable", "cos-x".into(), "needs a torus system")
            }
            None => {}
        }

        let c = &self.construct;
        let l = &c.library;
        check(l.k_max >= 1, "construct.library.k_max", l.k_max.to_string(), "must be at least 1");
        check(l.eps_sep > 0.0, "construct.library.eps_sep", l.eps_sep.to_string(), "must be positive");
        check(open_unit(l.gamma), "construct.library.gamma", l.gamma.to_string(), "must lie in (0,1)");
        check(open_unit(l.delta), "construct.library.delta", l.delta.to_string(), "must lie in (0,1)");
        check(l.base_length >= 1, "construct.library.base_length", l.base_length.to_string(), "must be at least 1");
        check(l.cell > 0.0, "construct.library.cell", l.cell.to_string(), "must be positive");
        check(c.schedule.growth > 0.0, "construct.schedule.growth", c.schedule.growth.to_string(), "must be positive");
        check(c.threshold > 0.0, "construct.threshold", c.threshold.to_string(), "must be positive");
        v
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_takes_defaults_but_needs_a_seed() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c.entropy, EntropySection::default());
        assert_eq!(c.violations(), vec!["seed = missing: a seed is required (config or --seed)".to_string()]);
    }

    #[test]
    fn delta_out_of_range_names_the_interval() {
        let c = ExperimentConfig::from_json(r#"{"seed": 1, "entropy": {"delta": 1.5}}"#).unwrap();
        let v = c.violations();
        assert_eq!(v, vec!["entropy.delta = 1.5: must lie in (0,1)".to_string()]);
    }

    #[test]
    fn every_violation_is_listed() {
        let c = ExperimentConfig::from_json(
            r#"{"entropy": {"delta": 0, "eps": -1, "n_min": 9, "n_max": 3},
                "pesin": {"beta1": 0.01},
                "system": {"kind": "shift"},
                "targets": [{"kind": "bernoulli", "p": 2}]}"#,
        )
        .unwrap();
        let fields: Vec<String> = c.violations().iter().map(|s| s.split(" = ").next().unwrap().to_string()).collect();
        assert_eq!(
            fields,
            ["seed", "entropy.eps", "entropy.delta", "entropy.n_max", "pesin.beta1", "targets[0].p", "targets"]
        );
    }

    #[test]
    fn systems_and_targets_parse() {
        let c = ExperimentConfig::from_json(
            r#"{"seed": 3, "system": {"kind": "katok", "params": {"alpha": 0.4}},
                "start": [0.1, 0.2],
                "targets": [{"kind": "orbit", "points": [[0, 0]]}, {"kind": "orbit", "points": [[0.5, 0.5]]}],
                "observable": "cos-x"}"#,
        )
        .unwrap();
        assert!(matches!(c.system, SystemSpec::Katok { params } if params.alpha == 0.4 && params.r1 == 0.1));
        assert_eq!(c.start, Some(StartSpec::Torus([0.1, 0.2])));
        assert!(c.violations().is_empty(), "{:?}", c.violations());
        let bad = ExperimentConfig::from_json(r#"{"seed": 3, "targets": [{"kind": "word", "word": "01(0)"}]}"#).unwrap();
        assert_eq!(bad.violations().len(), 3);
    }

    #[test]
    fn unknown_json_is_a_config_error() {
        assert!(matches!(ExperimentConfig::from_json("{"), Err(CliError::Config(_))));
    }
}
