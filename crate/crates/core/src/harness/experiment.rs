//! Seeded experiments: a network source, evidence law, and a matrix of
//! methods, selections and deletion counts, producing one report row per
//! `(instance, method, selection, k)`.
//!
//! ```toml
//! name = "grid4"
//! seed = 7
//! instances = 50
//! evidence = "leaves-from-joint"
//! k = [0, 2, 4]
//! methods = ["ed-kl", "ed-bp"]
//! selections = ["guided", "rand"]
//! map = true
//! map_vars = "top-left"
//!
//! [network]
//! kind = "grid"
//! rows = 4
//! cols = 4
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{run_pipeline, sample_evidence_on, DeletionRequest, PipelineConfig, Rankings, Selection};
use crate::error::{Error, Result};
use crate::map::default_map_vars;
use crate::model::{Evidence, Network, VarId};
use crate::netio::{self, line_col, ParseError, ReportRow};
use crate::par::{self, Exec};
use crate::param::{IterationConfig, Method, Schedule};
use crate::synth::{self, SyntheticCptLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceMode {
    #[default]
    LeavesFromJoint,
    Random,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkSource {
    Chain {
        n: usize,
        #[serde(default = "two")]
        card: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
        #[serde(default = "two")]
        card: usize,
    },
    /// Canonical document, or Hugin when the extension is `.net`.
    File { path: PathBuf },
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MapVarsSpec {
    /// `"roots"` (unobserved roots) or `"top-left"` (top row and left
    /// column of a grid).
    Preset(String),
    Names(Vec<String>),
}

impl Default for MapVarsSpec {
    fn default() -> Self {
        MapVarsSpec::Preset("roots".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationSpec {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub damping: f64,
    pub simultaneous: bool,
}

impl Default for IterationSpec {
    fn default() -> Self {
        IterationSpec {
            max_iterations: 200,
            tolerance: 1e-8,
            damping: 0.0,
            simultaneous: false,
        }
    }
}

impl IterationSpec {
    pub fn config(&self, method: Method) -> IterationConfig {
        let mut cfg = IterationConfig::new(method);
        cfg.max_iterations = self.max_iterations;
        cfg.tolerance = self.tolerance;
        cfg.damping = self.damping;
        if self.simultaneous {
            cfg.schedule = Schedule::Simultaneous;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub network: NetworkSource,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub evidence: EvidenceMode,
    pub k: Vec<usize>,
    pub methods: Vec<String>,
    pub selections: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub iteration: IterationSpec,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default = "yes")]
    pub exact_kl: bool,
    #[serde(default)]
    pub map: bool,
    #[serde(default)]
    pub map_vars: MapVarsSpec,
    /// Record wall time; off by default so reports are reproducible byte for
    /// byte.
    #[serde(default)]
    pub timing: bool,
}

fn default_instances() -> usize {
    50
}

fn yes() -> bool {
    true
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            Error::Parse(ParseError::syntax(line, col, e.message().to_string()))
        })?;
        spec.methods()?;
        spec.selections()?;
        spec.iteration.config(Method::EdBp).validate()?;
        Ok(spec)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.methods
            .iter()
            .map(|m| Method::from_tag(m).ok_or_else(|| Error::Config(format!("unknown method `{m}`"))))
            .collect()
    }

    pub fn selections(&self) -> Result<Vec<Selection>> {
        self.selections
            .iter()
            .map(|s| Selection::from_tag(s).ok_or_else(|| Error::Config(format!("unknown selection `{s}`"))))
            .collect()
    }
}

/// Reads a network file: Hugin for `.net`, canonical otherwise.
pub fn load_network(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    let net = if path.extension().is_some_and(|e| e == "net") {
        netio::parse_hugin_subset(&text)?
    } else {
        netio::parse_network(&text)?
    };
    Ok(net)
}

struct Instance {
    net: Network,
    ev: Evidence,
    map_vars: Vec<VarId>,
    selection_seed: u64,
}

fn instance(spec: &ExperimentSpec, file_net: Option<&Network>, i: usize) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(i as u64);
    let law = SyntheticCptLaw::UniformSimplex;
    let (net, observed, top_left) = match &spec.network {
        NetworkSource::Chain { n, card } => {
            let net = synth::chain(&mut rng, *n, *card, law);
            let leaves = net.leaves();
            (net, leaves, None)
        }
        NetworkSource::Grid { rows, cols, card } => (
            synth::grid(&mut rng, *rows, *cols, *card, law),
            synth::grid_frontier(*rows, *cols),
            Some(synth::grid_top_left(*rows, *cols)),
        ),
        NetworkSource::File { .. } => {
            let net = file_net.expect("file networks are loaded up front").clone();
            let leaves = net.leaves();
            (net, leaves, None)
        }
    };
    let ev = sample_evidence_on(&net, &observed, spec.evidence, &mut rng);
    let map_vars = match &spec.map_vars {
        MapVarsSpec::Preset(p) if p == "roots" => default_map_vars(&net, &ev),
        MapVarsSpec::Preset(p) if p == "top-left" => top_left
            .ok_or_else(|| Error::Config("map_vars = \"top-left\" needs a grid network".into()))?
            .into_iter()
            .filter(|v| !ev.contains(*v))
            .collect(),
        MapVarsSpec::Preset(p) => return Err(Error::Config(format!("unknown map_vars preset `{p}`"))),
        MapVarsSpec::Names(names) => names.iter().map(|n| net.var(n)).collect::<Result<_>>()?,
    };
    Ok(Instance {
        net,
        ev,
        map_vars,
        selection_seed: rng.gen(),
    })
}

fn failed_row(spec: &ExperimentSpec, i: usize, method: Method, selection: Selection, k: usize, err: &Error) -> ReportRow {
    log::warn!("{} instance {i} {} {} k={k}: {err}", spec.name, method.tag(), selection.tag());
    ReportRow {
        network: spec.name.clone(),
        instance: i,
        method,
        selection,
        edges_deleted: 0,
        iterations: 0,
        converged: false,
        kl_bound: None,
        exact_kl: None,
        map_ratio: None,
        constrained_treewidth: 0,
        wall_time_ms: 0,
    }
}

fn instance_rows(spec: &ExperimentSpec, file_net: Option<&Network>, i: usize) -> Result<Vec<ReportRow>> {
    let methods = spec.methods()?;
    let selections = spec.selections()?;
    let matrix = || {
        methods
            .iter()
            .flat_map(|&m| selections.iter().flat_map(move |&s| spec.k.iter().map(move |&k| (m, s, k))))
    };
    let inst = match instance(spec, file_net, i) {
        Ok(inst) => inst,
        Err(e) => return Ok(matrix().map(|(m, s, k)| failed_row(spec, i, m, s, k, &e)).collect()),
    };
    let rankings = match Rankings::compute(&inst.net, &inst.ev, &selections, Exec::Sequential) {
        Ok(r) => r,
        Err(e) => return Ok(matrix().map(|(m, s, k)| failed_row(spec, i, m, s, k, &e)).collect()),
    };
    let mut rows = Vec::new();
    for (method, selection, k) in matrix() {
        let mut cfg = PipelineConfig::new(spec.iteration.config(method), selection);
        cfg.warm_start = spec.warm_start;
        cfg.exact_kl = spec.exact_kl;
        cfg.map = spec.map;
        cfg.map_vars = inst.map_vars.clone();
        // Same random edges for every method at a given k.
        let mut rng = ChaCha8Rng::seed_from_u64(inst.selection_seed);
        rng.set_stream(k as u64);
        let start = Instant::now();
        let result = run_pipeline(&inst.net, &inst.ev, &DeletionRequest::Count(k), &cfg, &rankings, &mut rng);
        let elapsed = if spec.timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        rows.push(match result {
            Ok(r) => ReportRow {
                network: spec.name.clone(),
                instance: i,
                method,
                selection,
                edges_deleted: r.edges.len(),
                iterations: r.outcome.report.iterations,
                converged: r.outcome.report.converged,
                kl_bound: Some(r.kl.total.max(0.0)),
                exact_kl: r.exact_kl.map(|x| x.max(0.0)),
                map_ratio: r.map.and_then(|m| m.ratio),
                constrained_treewidth: r.constrained_width,
                wall_time_ms: elapsed,
            },
            Err(e) => failed_row(spec, i, method, selection, k, &e),
        });
    }
    Ok(rows)
}

/// Runs every instance (concurrently under [`Exec::Parallel`]) and returns
/// rows ordered by instance, method, selection, and k.
pub fn run_experiment_with(spec: &ExperimentSpec, base_dir: &Path, exec: Exec) -> Result<Vec<ReportRow>> {
    let file_net = match &spec.network {
        NetworkSource::File { path } => Some(load_network(&base_dir.join(path))?),
        _ => None,
    };
    let per_instance = par::map_range(exec, spec.instances, |i| instance_rows(spec, file_net.as_ref(), i));
    let mut rows = Vec::new();
    for r in per_instance {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn run_experiment(spec: &ExperimentSpec, base_dir: &Path) -> Result<Vec<ReportRow>> {
    run_experiment_with(spec, base_dir, Exec::default())
}
