//! Experiment specifications: a single JSON document describing the system,
//! the inputs, the adversary and the schedule. Command-line flags only
//! override fields of the spec, so a committed spec file plus a seed fully
//! reproduces a run.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ccsim_core::geometry::Point;
use ccsim_core::presets;
use ccsim_core::protocol::{Config, Mode};
use ccsim_core::rat::Rat;
use ccsim_core::sim::{FaultPlan, SchedulerPolicy};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputsSpec {
    /// One point per process, dimension d each.
    Explicit { points: Vec<Vec<Rat>> },
    /// Uniform rational points in the box, derived from the seed.
    Random,
    /// A named scenario layout.
    Preset { name: PresetName },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    /// Simplex-corner inputs at the smallest legal n, with the off-corner
    /// tail starved by a slow-set scheduler; the lower-bound polytope
    /// degenerates to a single point.
    Corners,
    /// All processes share one input.
    Identical,
    /// 2f+1 processes share one input, the rest are random.
    Cluster,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlanSpec {
    /// No faults at all.
    #[default]
    None,
    /// Crash-heavy random plan derived from the seed.
    Random,
    /// Fully pinned plan.
    Explicit {
        #[serde(flatten)]
        plan: FaultPlan,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub f: usize,
    pub d: usize,
    pub epsilon: Rat,
    #[serde(default = "Rat::zero")]
    pub mu: Rat,
    #[serde(default = "Rat::one")]
    pub u: Rat,
    pub mode: Mode,
    pub inputs: InputsSpec,
    #[serde(default)]
    pub fault_plan: PlanSpec,
    pub scheduler: SchedulerPolicy,
}

/// Everything a run needs, resolved deterministically from spec + seed.
pub struct ResolvedRun {
    pub config: Config,
    pub inputs: Vec<Point>,
    pub plan: FaultPlan,
    pub policy: SchedulerPolicy,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("cannot parse experiment spec")
    }

    pub fn config(&self) -> Config {
        Config {
            n: self.n,
            f: self.f,
            d: self.d,
            epsilon: self.epsilon.clone(),
            mu: self.mu.clone(),
            u: self.u.clone(),
            mode: self.mode,
        }
    }

    fn with_seed(&self, seed: Option<u64>) -> SchedulerPolicy {
        let mut policy = self.scheduler.clone();
        if let Some(seed) = seed {
            match &mut policy {
                SchedulerPolicy::SeededRandom { seed: s }
                | SchedulerPolicy::SlowSet { seed: s, .. }
                | SchedulerPolicy::RoundRobin { seed: s } => *s = seed,
            }
        }
        policy
    }

    /// Resolves the spec into concrete run arguments. `seed` overrides the
    /// scheduler seed and drives every random derivation.
    pub fn resolve(&self, seed: Option<u64>) -> Result<ResolvedRun> {
        let config = self.config();
        config.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        let policy = self.with_seed(seed);
        let seed = policy.seed();

        if let InputsSpec::Preset {
            name: PresetName::Corners,
        } = &self.inputs
        {
            let (corner_cfg, inputs, plan, corner_policy) =
                presets::degenerate_corner_scenario(self.f, self.d, self.epsilon.clone(), seed);
            if config.n != corner_cfg.n {
                bail!(
                    "the corners preset needs n = (d+2)f+1 = {}, spec has n = {}",
                    corner_cfg.n,
                    config.n
                );
            }
            if config.mode != Mode::IncorrectInputs
                || config.mu != corner_cfg.mu
                || config.u != corner_cfg.u
            {
                bail!("the corners preset needs incorrect-inputs mode with mu = 0, U = 1");
            }
            if !matches!(self.fault_plan, PlanSpec::None) {
                bail!("the corners preset fixes its own (empty) fault plan");
            }
            // the preset's starved tail wins unless the spec pinned a
            // slow set itself
            let policy = match &self.scheduler {
                SchedulerPolicy::SlowSet { .. } => policy,
                _ => corner_policy,
            };
            return Ok(ResolvedRun {
                config,
                inputs,
                plan,
                policy,
            });
        }

        let inputs = match &self.inputs {
            InputsSpec::Explicit { points } => {
                points.iter().cloned().map(Point::new).collect::<Vec<_>>()
            }
            InputsSpec::Random => presets::random_inputs(&config, seed),
            InputsSpec::Preset { name } => match name {
                PresetName::Identical => presets::identical_inputs(&config, seed),
                PresetName::Cluster => presets::identical_cluster_inputs(&config, seed).0,
                PresetName::Corners => unreachable!("handled above"),
            },
        };
        let plan = match &self.fault_plan {
            PlanSpec::None => FaultPlan::none(),
            PlanSpec::Random => presets::random_fault_plan(&config, seed),
            PlanSpec::Explicit { plan } => plan.clone(),
        };
        Ok(ResolvedRun {
            config,
            inputs,
            plan,
            policy,
        })
    }
}

/// Seed lists: `"0..100"` (half-open), `"42"` or `"1,5,9"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let lo: u64 = a.trim().parse().context("bad range start")?;
        let hi: u64 = b.trim().parse().context("bad range end")?;
        if hi < lo {
            bail!("empty-or-backwards seed range {text:?}");
        }
        return Ok((lo..hi).collect());
    }
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<u64>().context("bad seed"))
        .collect()
}
