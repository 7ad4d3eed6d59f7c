//! Scenario configuration files: strict parsing, builtin overlays and
//! resolution into ready-to-run objects.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::activation::Activation;
use crate::data::{DomainSpec, NoiseSpec};
use crate::group::GroupAction;
use crate::measure::{Atom, DiscreteMeasure};

use super::scenarios;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub id: String,
    pub atoms: Vec<Atom>,
    /// Replace the atoms by their orbit under the scenario group.
    #[serde(default)]
    pub symmetrize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaSection {
    pub n_probes: usize,
}

impl Default for DeltaSection {
    fn default() -> Self {
        Self { n_probes: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub n_mc: usize,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self { m_grid: vec![16, 32, 64, 128, 256, 512, 1024], trials: 30, n_mc: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RademacherSection {
    pub sample_sizes: Vec<usize>,
    pub q: f64,
    pub n_sign_draws: usize,
    pub restarts: usize,
    pub ascent_steps: usize,
}

impl Default for RademacherSection {
    fn default() -> Self {
        Self { sample_sizes: vec![32, 128], q: 1.0, n_sign_draws: 256, restarts: 16, ascent_steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralizeSection {
    pub m: usize,
    pub sample_sizes: Vec<usize>,
    pub seeds: usize,
    pub kappa: f64,
    pub noise_tau: f64,
    pub n_test: usize,
    pub step_size: f64,
    pub iterations: usize,
    pub init_scale: f64,
    pub confidence: f64,
}

impl Default for GeneralizeSection {
    fn default() -> Self {
        Self {
            m: 32,
            sample_sizes: vec![64, 256, 1024],
            seeds: 10,
            kappa: 100.0,
            noise_tau: 0.0,
            n_test: 5000,
            step_size: 0.3,
            iterations: 1000,
            init_scale: 1.0,
            confidence: 0.05,
        }
    }
}

impl GeneralizeSection {
    pub fn noise(&self) -> NoiseSpec {
        if self.noise_tau > 0.0 {
            NoiseSpec::Uniform { tau: self.noise_tau }
        } else {
            NoiseSpec::None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gamma0Section {
    pub half_width: f64,
    pub n_points: usize,
}

impl Default for Gamma0Section {
    fn default() -> Self {
        Self { half_width: crate::activation::GAMMA0_HALF_WIDTH, n_points: crate::activation::GAMMA0_POINTS }
    }
}

/// The on-disk schema. Every key is optional so that a file can overlay a
/// builtin scenario named by `builtin`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measures: Option<Vec<MeasureSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_scaling: Option<ScalingSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rademacher: Option<RademacherSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generalize: Option<GeneralizeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<Gamma0Section>,
}

/// A configuration that failed to parse or validate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SchemaError {}

fn schema(msg: impl Into<String>) -> SchemaError {
    SchemaError(msg.into())
}

/// Objects merge key by key; any other value in `top` replaces `base`.
fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ConfigFile {
    /// Strict parse; errors carry the line and column reported by the JSON parser.
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        serde_json::from_str(text).map_err(|e| schema(format!("config: {e}")))
    }

    /// Applies this file on top of its builtin, if any. Sections present in
    /// both are merged key by key.
    pub fn with_builtin(self, text: &str) -> Result<Self, SchemaError> {
        let Some(name) = self.builtin.clone() else {
            return Ok(self);
        };
        let base_text = scenarios::builtin(&name).ok_or_else(|| {
            schema(format!("config: unknown builtin `{name}` (known: {})", scenarios::names().join(", ")))
        })?;
        let mut base: Value = serde_json::from_str(base_text).map_err(|e| schema(format!("builtin `{name}`: {e}")))?;
        let top: Value = serde_json::from_str(text).map_err(|e| schema(format!("config: {e}")))?;
        overlay(&mut base, top);
        serde_json::from_value(base).map_err(|e| schema(format!("config: {e}")))
    }

    pub fn resolve(self) -> Result<Scenario, SchemaError> {
        let need = |v: Option<String>, key: &str| v.ok_or_else(|| schema(format!("config: missing field `{key}`")));
        let id = need(self.scenario.clone().or_else(|| self.builtin.clone()), "scenario")?;
        let group_spec = need(self.group.clone(), "group")?;
        let group = GroupAction::parse(&group_spec).map_err(|e| schema(format!("config: field `group`: {e}")))?;
        let activation_spec = need(self.activation.clone(), "activation")?;
        let activation =
            Activation::parse(&activation_spec).map_err(|e| schema(format!("config: field `activation`: {e}")))?;
        let domain_spec = need(self.domain.clone(), "domain")?;
        let domain = DomainSpec::parse(&domain_spec).map_err(|e| schema(format!("config: field `domain`: {e}")))?;
        if domain.dim() != group.dim() {
            return Err(schema(format!(
                "config: domain `{domain}` has dimension {} but group `{group_spec}` acts on dimension {}",
                domain.dim(),
                group.dim()
            )));
        }
        let specs = self.measures.clone().ok_or_else(|| schema("config: missing field `measures`"))?;
        if specs.is_empty() {
            return Err(schema("config: `measures` must list at least one measure"));
        }
        let mut measures = Vec::with_capacity(specs.len());
        for spec in &specs {
            if measures.iter().any(|m: &NamedMeasure| m.id == spec.id) {
                return Err(schema(format!("config: duplicate measure id `{}`", spec.id)));
            }
            let raw = DiscreteMeasure::new(group.dim(), spec.atoms.clone())
                .map_err(|e| schema(format!("config: measure `{}`: {e}", spec.id)))?;
            let measure = if spec.symmetrize {
                raw.symmetrize(&group).map_err(|e| schema(format!("config: measure `{}`: {e}", spec.id)))?
            } else {
                raw
            };
            measures.push(NamedMeasure { id: spec.id.clone(), measure });
        }
        let target = match &self.target {
            Some(t) => measures
                .iter()
                .position(|m| &m.id == t)
                .ok_or_else(|| schema(format!("config: target `{t}` is not a measure id")))?,
            None => 0,
        };
        let seed = self.seed.ok_or_else(|| schema("config: missing field `seed`"))?;
        Ok(Scenario {
            id,
            group_spec,
            group,
            activation_spec,
            activation,
            domain,
            measures,
            target,
            seed,
            delta: self.delta.clone().unwrap_or_default(),
            approx_scaling: self.approx_scaling.clone().unwrap_or_default(),
            rademacher: self.rademacher.clone().unwrap_or_default(),
            generalize: self.generalize.clone().unwrap_or_default(),
            gamma0: self.gamma0.clone().unwrap_or_default(),
            file: self,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NamedMeasure {
    pub id: String,
    pub measure: DiscreteMeasure,
}

/// A validated scenario with every spec string parsed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub group_spec: String,
    pub group: GroupAction,
    pub activation_spec: String,
    pub activation: Activation,
    pub domain: DomainSpec,
    pub measures: Vec<NamedMeasure>,
    pub target: usize,
    pub seed: u64,
    pub delta: DeltaSection,
    pub approx_scaling: ScalingSection,
    pub rademacher: RademacherSection,
    pub generalize: GeneralizeSection,
    pub gamma0: Gamma0Section,
    /// The merged file this scenario was resolved from.
    pub file: ConfigFile,
}

impl Scenario {
    /// Parses, overlays and resolves a config text.
    pub fn from_text(text: &str) -> Result<Self, SchemaError> {
        ConfigFile::parse(text)?.with_builtin(text)?.resolve()
    }

    pub fn builtin(name: &str) -> Result<Self, SchemaError> {
        Self::from_text(&format!("{{\"builtin\": {}}}", Value::String(name.to_string())))
    }

    pub fn target_measure(&self) -> &DiscreteMeasure {
        &self.measures[self.target].measure
    }

    /// Canonical JSON of the resolved configuration (with any seed override applied).
    pub fn canonical_json(&self) -> String {
        let mut file = self.file.clone();
        file.seed = Some(self.seed);
        file.delta = Some(self.delta.clone());
        file.approx_scaling = Some(self.approx_scaling.clone());
        file.rademacher = Some(self.rademacher.clone());
        file.generalize = Some(self.generalize.clone());
        file.gamma0 = Some(self.gamma0.clone());
        serde_json::to_string(&file).expect("config serializes")
    }
}
