//! Seeded synthetic corpora with controllable class separation and noise.

use std::collections::HashSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AppLabel, Dataset, Execution, NodeSeries};

pub const DEFAULT_METRIC: &str = "nr_mapped_vmstat";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub size: String,
    /// Base mean per node index.
    pub node_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSpec {
    pub name: String,
    pub inputs: Vec<InputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    pub scale: f64,
}

/// Samples of node `n`, metric `m` are `mean(n) * scale(m)` plus Gaussian
/// noise with standard deviation `noise_std * scale(m)`, one per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub applications: Vec<AppSpec>,
    pub metrics: Vec<MetricSpec>,
    pub repetitions: usize,
    pub node_count: usize,
    pub noise_std: f64,
    pub duration_s: u64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.applications.is_empty() {
            return Err(Error::spec("applications", "must not be empty"));
        }
        if self.metrics.is_empty() {
            return Err(Error::spec("metrics", "must not be empty"));
        }
        if self.repetitions == 0 {
            return Err(Error::spec("repetitions", "must be at least 1"));
        }
        if self.node_count == 0 {
            return Err(Error::spec("node_count", "must be at least 1"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::spec(
                "noise_std",
                format!("must be finite and >= 0, got {}", self.noise_std),
            ));
        }
        if self.duration_s < 120 {
            return Err(Error::spec(
                "duration_s",
                format!("must be at least 120, got {}", self.duration_s),
            ));
        }
        let mut names = HashSet::new();
        for (i, m) in self.metrics.iter().enumerate() {
            if m.name.is_empty() || m.name.contains(|c: char| c == ',' || c == '|' || c.is_whitespace()) {
                return Err(Error::spec(
                    format!("metrics[{i}].name"),
                    format!("invalid metric name {:?}", m.name),
                ));
            }
            if !names.insert(m.name.as_str()) {
                return Err(Error::spec(
                    format!("metrics[{i}].name"),
                    format!("duplicate metric {:?}", m.name),
                ));
            }
            if !(m.scale.is_finite() && m.scale > 0.0) {
                return Err(Error::spec(
                    format!("metrics[{i}].scale"),
                    format!("must be finite and > 0, got {}", m.scale),
                ));
            }
        }
        let mut labels = HashSet::new();
        for (a, app) in self.applications.iter().enumerate() {
            if app.inputs.is_empty() {
                return Err(Error::spec(format!("applications[{a}].inputs"), "must not be empty"));
            }
            for (k, input) in app.inputs.iter().enumerate() {
                let field = format!("applications[{a}].inputs[{k}]");
                let label = AppLabel::new(&app.name, &input.size).map_err(|e| Error::spec(&field, e.to_string()))?;
                if !labels.insert(label.to_string()) {
                    return Err(Error::spec(&field, format!("duplicate class {label}")));
                }
                if input.node_means.len() != self.node_count {
                    return Err(Error::spec(
                        format!("{field}.node_means"),
                        format!("expected {} values, got {}", self.node_count, input.node_means.len()),
                    ));
                }
                if let Some(bad) = input.node_means.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
                    return Err(Error::spec(
                        format!("{field}.node_means"),
                        format!("means must be finite and > 0, got {bad}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Total executions `generate` will produce.
    pub fn execution_count(&self) -> usize {
        self.applications.iter().map(|a| a.inputs.len()).sum::<usize>() * self.repetitions
    }

    /// Built-in specs by name: `seven-apps`, `eleven-apps`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "seven-apps" => Some(seven_app_corpus()),
            "eleven-apps" => Some(eleven_app_corpus(0.0)),
            _ => None,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the `index`-th execution, independent of generation order.
fn execution_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

/// One execution per application x input x repetition, in spec order.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.execution_count());
    for app in &spec.applications {
        for input in &app.inputs {
            for rep in 0..spec.repetitions {
                jobs.push((app, input, rep));
            }
        }
    }
    let executions: Vec<Execution> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (app, input, rep))| {
            let label = AppLabel::new(&app.name, &input.size)?;
            let id = format!("{label}_r{rep:03}");
            let mut rng = ChaCha8Rng::seed_from_u64(execution_seed(spec.seed, i));
            let mut exec = Execution::new(id, Some(label), spec.node_count)?;
            for (node, &base) in input.node_means.iter().enumerate() {
                for metric in &spec.metrics {
                    let mean = base * metric.scale;
                    let std = spec.noise_std * metric.scale;
                    let normal = Normal::new(mean, std).map_err(|e| Error::spec("noise_std", e.to_string()))?;
                    let samples = (0..spec.duration_s)
                        .map(|t| {
                            let v = if std > 0.0 { normal.sample(&mut rng) } else { mean };
                            (t as f64, v)
                        })
                        .collect();
                    exec.add_series(NodeSeries::new(&metric.name, node, samples)?)?;
                }
            }
            Ok(exec)
        })
        .collect::<Result<_>>()?;
    Dataset::new(executions)
}

fn app(name: &str, inputs: &[(&str, [f64; 4])]) -> AppSpec {
    AppSpec {
        name: name.to_string(),
        inputs: inputs
            .iter()
            .map(|(size, means)| InputSpec {
                size: size.to_string(),
                node_means: means.to_vec(),
            })
            .collect(),
    }
}

fn same_for_xyz(name: &str, means: [f64; 4]) -> AppSpec {
    app(name, &[("X", means), ("Y", means), ("Z", means)])
}

/// Seven applications on four nodes with `nr_mapped_vmstat` means chosen so
/// that a depth-2 dictionary has the 34 reference rows: sp and bt share
/// every depth-2 key but differ at depth 3, and miniAMR_Z nodes 1 and 2
/// straddle the 10500 rounding boundary so that repetitions split between
/// 10000.0 and 11000.0.
pub fn seven_app_corpus() -> SyntheticSpec {
    SyntheticSpec {
        applications: vec![
            same_for_xyz("ft", [6021.0, 6012.0, 5988.0, 6030.0]),
            same_for_xyz("mg", [6110.0, 6095.0, 6102.0, 6088.0]),
            same_for_xyz("sp", [7560.0, 7510.0, 7480.0, 7120.0]),
            same_for_xyz("bt", [7640.0, 7540.0, 7460.0, 7080.0]),
            same_for_xyz("lu", [8410.0, 8320.0, 8290.0, 8305.0]),
            same_for_xyz("miniGhost", [7905.0, 7890.0, 7920.0, 7880.0]),
            app(
                "miniAMR",
                &[
                    ("X", [7810.0, 7790.0, 7820.0, 7800.0]),
                    ("Y", [8010.0, 7990.0, 8020.0, 7980.0]),
                    ("Z", [11020.0, 10500.0, 10500.0, 10980.0]),
                ],
            ),
        ],
        metrics: vec![MetricSpec {
            name: DEFAULT_METRIC.to_string(),
            scale: 1.0,
        }],
        repetitions: 10,
        node_count: 4,
        noise_std: 5.0,
        duration_s: 180,
        seed: 42,
    }
}

pub const ELEVEN_APPLICATIONS: [&str; 11] = [
    "ft",
    "mg",
    "sp",
    "lu",
    "bt",
    "cg",
    "CoMD",
    "miniGhost",
    "miniAMR",
    "miniMD",
    "kripke",
];

/// Eleven applications x inputs X/Y/Z x 30 repetitions x 4 nodes.
///
/// Application `i` on node `n` has mean `2000 + 500 i + 100 n` for every
/// input size, so classes are input-independent and distinct classes sit at
/// least five depth-2 buckets apart on every node.
pub fn eleven_app_corpus(noise_std: f64) -> SyntheticSpec {
    SyntheticSpec {
        applications: ELEVEN_APPLICATIONS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let means = std::array::from_fn(|n| 2000.0 + 500.0 * i as f64 + 100.0 * n as f64);
                same_for_xyz(name, means)
            })
            .collect(),
        metrics: vec![MetricSpec {
            name: DEFAULT_METRIC.to_string(),
            scale: 1.0,
        }],
        repetitions: 30,
        node_count: 4,
        noise_std,
        duration_s: 150,
        seed: 42,
    }
}
