//! Scenario files: TOML with one section per stage of a run.

use std::path::Path;

use nlcb_core::basis::InterfaceReduction;
use nlcb_core::fe::NodalDof;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub geometry: Geometry,
    pub material: MaterialSection,
    pub partition: PartitionSection,
    pub reduction: ReductionSection,
    pub load: LoadSection,
    pub integration: IntegrationSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub elements: usize,
    /// Midspan rise of a circular-arc beam; zero for a flat beam.
    #[serde(default)]
    pub rise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub youngs_modulus: f64,
    pub density: f64,
    #[serde(default)]
    pub poisson: f64,
    #[serde(default)]
    pub rayleigh_alpha: f64,
    #[serde(default)]
    pub rayleigh_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    /// Cut positions as fractions of the span; each becomes a one-node
    /// interface at the nearest node.
    pub cuts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsKind {
    Exact,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSection {
    pub modes_per_substructure: usize,
    #[serde(default = "default_interface")]
    pub interface: InterfaceReduction,
    #[serde(default = "default_rhs")]
    pub rhs: RhsKind,
}

fn default_interface() -> InterfaceReduction {
    InterfaceReduction::VirtualNode
}

fn default_rhs() -> RhsKind {
    RhsKind::Exact
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadKind {
    /// Uniform pressure on the top face [Pa].
    Pressure,
    /// Point force or moment at the node nearest `position`.
    Nodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFunction {
    Sine,
    Cosine,
    Constant,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub kind: LoadKind,
    pub amplitude: f64,
    /// Fraction of the span, for nodal loads.
    pub position: Option<f64>,
    #[serde(default = "default_load_dof")]
    pub dof: DofName,
    pub time_function: TimeFunction,
    /// Forcing frequency in Hz; alternatively `frequency_mode`.
    pub frequency_hz: Option<f64>,
    /// Force at the full model's natural frequency of this mode (1-based).
    pub frequency_mode: Option<usize>,
    /// `(t, factor)` samples, linearly interpolated and held constant
    /// outside the table.
    #[serde(default)]
    pub table: Vec<[f64; 2]>,
}

fn default_load_dof() -> DofName {
    DofName::W
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DofName {
    U,
    W,
    Theta,
}

impl DofName {
    pub fn nodal(self) -> NodalDof {
        match self {
            DofName::U => NodalDof::U,
            DofName::W => NodalDof::W,
            DofName::Theta => NodalDof::Theta,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DofName::U => "u",
            DofName::W => "w",
            DofName::Theta => "theta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "u" => Some(DofName::U),
            "w" => Some(DofName::W),
            "theta" => Some(DofName::Theta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub dt: f64,
    /// Duration in forcing periods; alternatively `t_end`.
    pub cycles: Option<f64>,
    pub t_end: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_gamma() -> f64 {
    0.5
}
fn default_beta() -> f64 {
    0.25
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    20
}

/// A probed DoF, given by span fraction or node index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub position: Option<f64>,
    pub node: Option<usize>,
    pub dof: DofName,
}

impl ProbeSpec {
    /// Parses `node:dof`, e.g. `100:w`.
    pub fn parse(s: &str) -> Result<Self> {
        let (node, dof) = s
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("probe '{s}' must have the form node:dof")))?;
        let node = node
            .parse()
            .map_err(|_| CliError::Config(format!("probe '{s}': '{node}' is not a node index")))?;
        let dof = DofName::parse(dof)
            .ok_or_else(|| CliError::Config(format!("probe '{s}': dof must be one of u, w, theta")))?;
        Ok(Self {
            position: None,
            node: Some(node),
            dof,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Full nonlinear finite-element model.
    Full,
    /// Linearized full model.
    Linear,
    /// Nonlinear reduced model on the quadratic manifold.
    Nlcb,
    /// Linear Craig-Bampton reduced model.
    Cb,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::Linear, Variant::Nlcb, Variant::Cb];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Linear => "linear",
            Variant::Nlcb => "nlcb",
            Variant::Cb => "cb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    /// Rows of the frequency comparison table.
    #[serde(default = "default_modal_rows")]
    pub modal_rows: usize,
    /// Full-model modes whose amplitude histories and spectra are written.
    #[serde(default)]
    pub spectrum_modes: Vec<usize>,
    /// Start of the spectrum window [s]; the window runs to the end.
    #[serde(default)]
    pub spectrum_start: f64,
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_modal_rows() -> usize {
    2
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            probes: Vec::new(),
            variants: default_variants(),
            modal_rows: default_modal_rows(),
            spectrum_modes: Vec::new(),
            spectrum_start: 0.0,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let frac = |x: f64| x > 0.0 && x < 1.0;
        if self.partition.cuts.iter().any(|&c| !frac(c)) {
            return bad("partition.cuts must lie strictly inside (0, 1)".into());
        }
        if self.reduction.modes_per_substructure == 0 {
            return bad("reduction.modes_per_substructure must be at least 1".into());
        }
        let load = &self.load;
        match (load.frequency_hz, load.frequency_mode) {
            (Some(_), Some(_)) => return bad("load: give frequency_hz or frequency_mode, not both".into()),
            (None, None) if matches!(load.time_function, TimeFunction::Sine | TimeFunction::Cosine) => {
                return bad("load: harmonic loads need frequency_hz or frequency_mode".into())
            }
            (_, Some(0)) => return bad("load.frequency_mode is 1-based".into()),
            _ => {}
        }
        if load.kind == LoadKind::Nodal && !load.position.is_some_and(frac) {
            return bad("load.position in (0, 1) is required for nodal loads".into());
        }
        if load.time_function == TimeFunction::Tabulated {
            if load.table.is_empty() {
                return bad("load.table is required for tabulated loads".into());
            }
            if load.table.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return bad("load.table times must increase strictly".into());
            }
        }
        let int = &self.integration;
        match (int.cycles, int.t_end) {
            (Some(_), Some(_)) => return bad("integration: give cycles or t_end, not both".into()),
            (None, None) => return bad("integration: cycles or t_end is required".into()),
            (Some(_), None) if load.frequency_hz.is_none() && load.frequency_mode.is_none() => {
                return bad("integration.cycles needs a load frequency".into())
            }
            _ => {}
        }
        for p in &self.outputs.probes {
            match (p.position, p.node) {
                (Some(x), None) if frac(x) => {}
                (None, Some(_)) => {}
                _ => return bad("each probe needs exactly one of position in (0, 1) or node".into()),
            }
        }
        if self.outputs.spectrum_modes.contains(&0) {
            return bad("outputs.spectrum_modes are 1-based".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[geometry]
length = 0.1
width = 5e-3
thickness = 5e-4
elements = 20
[material]
youngs_modulus = 210e9
density = 7800
[partition]
cuts = [0.6]
[reduction]
modes_per_substructure = 1
[load]
kind = "pressure"
amplitude = 1.0
time_function = "sine"
frequency_mode = 1
[integration]
dt = 1e-4
cycles = 1
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.outputs.variants, Variant::ALL.to_vec());
        assert_eq!(s.reduction.interface, InterfaceReduction::VirtualNode);
        assert_eq!(s.integration.max_iter, 20);
    }

    #[test]
    fn unknown_field_is_reported_with_location() {
        let text = MINIMAL.replace("elements = 20", "elements = 20\nelemnts = 3");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("elemnts"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn inconsistent_settings_are_rejected() {
        let both = MINIMAL.replace("frequency_mode = 1", "frequency_mode = 1\nfrequency_hz = 3.0");
        assert!(Scenario::from_toml(&both).is_err());
        let nodal = MINIMAL.replace("\"pressure\"", "\"nodal\"");
        assert!(Scenario::from_toml(&nodal).is_err());
        let cut = MINIMAL.replace("[0.6]", "[1.2]");
        assert!(Scenario::from_toml(&cut).is_err());
    }

    #[test]
    fn probe_flag_syntax() {
        let p = ProbeSpec::parse("12:theta").unwrap();
        assert_eq!((p.node, p.dof), (Some(12), DofName::Theta));
        assert!(ProbeSpec::parse("12").is_err());
        assert!(ProbeSpec::parse("x:w").is_err());
        assert!(ProbeSpec::parse("3:v").is_err());
    }
}
