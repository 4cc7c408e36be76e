//! Problem files: TOML sections layered over the defaults of the chosen
//! regulator kind, then command-line overrides.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use thermoreg::material::{BaseMaterial, ErsatzScaling};
use thermoreg::mesh::TagRule;
use thermoreg::mma::MmaSettings;
use thermoreg::nlsolve::{ContinuationPath, NewtonSettings};
use thermoreg::oracle1d::RodStudyConfig;
use thermoreg::problems::{LoadCase, OptimizerSettings, Region, RegulatorGeometry, RegulatorKind, RegulatorProblem, SweepSettings};
use thermoreg::regularize::ProjectionParams;

/// Invalid configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub width: f64,
    pub height: f64,
    pub symmetry: bool,
    pub initial: f64,
    pub terminals: Vec<TagRule>,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: RegulatorKind,
    pub weights: [f64; 2],
    /// `V*/|Ω|`.
    pub volume_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iterations: usize,
    pub min_change: f64,
    /// Write a VTK snapshot every this many iterations (0 disables).
    pub snapshot_every: usize,
    /// Helmholtz filter radius in m; omitted means `l_e/√3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_radius: Option<f64>,
    pub case_retries: u32,
    pub projection: ProjectionParams,
    pub mma: MmaSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradCheckSection {
    pub probes: usize,
    pub step: f64,
    /// Factor applied to every case temperature; small values keep the
    /// check before contact.
    pub load_scale: f64,
    pub beta: f64,
    pub seed: u64,
    /// Free volume fractions are drawn uniformly from this range.
    pub z_range: [f64; 2],
}

impl Default for GradCheckSection {
    fn default() -> Self {
        Self {
            probes: 10,
            step: 1e-4,
            load_scale: 0.25,
            beta: 2.0,
            seed: 0,
            z_range: [0.2, 0.8],
        }
    }
}

/// Fully resolved problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub objective: ObjectiveSection,
    pub mesh: MeshSection,
    pub geometry: GeometrySection,
    pub material: BaseMaterial,
    pub ersatz: ErsatzScaling,
    /// Terminal temperature rises (K above `θ_o`) per target point.
    pub cases: Vec<BTreeMap<String, f64>>,
    pub optimizer: OptimizerSection,
    pub newton: NewtonSettings,
    pub continuation: ContinuationPath,
    pub sweep: SweepSettings,
    pub grad_check: GradCheckSection,
    pub rod: RodStudyConfig,
}

impl ProblemFile {
    pub fn defaults(kind: RegulatorKind) -> Self {
        Self::from_problem(&RegulatorProblem::defaults(kind))
    }

    fn from_problem(p: &RegulatorProblem) -> Self {
        let opt = OptimizerSettings::default();
        Self {
            objective: ObjectiveSection {
                kind: p.kind,
                weights: p.weights,
                volume_fraction: p.volume_fraction,
            },
            mesh: MeshSection {
                nx: p.geometry.nx,
                ny: p.geometry.ny,
            },
            geometry: GeometrySection {
                width: p.geometry.width,
                height: p.geometry.height,
                symmetry: p.geometry.symmetry,
                initial: p.geometry.initial,
                terminals: p.geometry.terminals.clone(),
                regions: p.geometry.regions.clone(),
            },
            material: p.material,
            ersatz: p.ersatz,
            cases: p.cases.iter().map(|c| c.rises.clone()).collect(),
            optimizer: OptimizerSection {
                max_iterations: opt.max_iterations,
                min_change: opt.min_change,
                snapshot_every: 25,
                filter_radius: p.filter_radius,
                case_retries: p.case_retries,
                projection: p.projection,
                mma: opt.mma,
            },
            newton: p.newton,
            continuation: p.continuation.clone(),
            sweep: SweepSettings::default(),
            grad_check: GradCheckSection::default(),
            rod: RodStudyConfig::default(),
        }
    }

    pub fn problem(&self) -> RegulatorProblem {
        RegulatorProblem {
            kind: self.objective.kind,
            geometry: RegulatorGeometry {
                width: self.geometry.width,
                height: self.geometry.height,
                nx: self.mesh.nx,
                ny: self.mesh.ny,
                symmetry: self.geometry.symmetry,
                terminals: self.geometry.terminals.clone(),
                regions: self.geometry.regions.clone(),
                initial: self.geometry.initial,
            },
            material: self.material,
            ersatz: self.ersatz,
            cases: self.cases.iter().map(|r| LoadCase { rises: r.clone() }).collect(),
            weights: self.objective.weights,
            volume_fraction: self.objective.volume_fraction,
            projection: self.optimizer.projection,
            filter_radius: self.optimizer.filter_radius,
            newton: self.newton,
            continuation: self.continuation.clone(),
            case_retries: self.optimizer.case_retries,
        }
    }

    pub fn optimizer_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            max_iterations: self.optimizer.max_iterations,
            min_change: self.optimizer.min_change,
            mma: self.optimizer.mma,
        }
    }
}

/// Where an explicitly set value came from; everything else is a default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    File,
    Override,
}

#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub file: ProblemFile,
    /// Canonical TOML of `file`.
    pub text: String,
    /// Top-level `section.key` paths set by the file or an override.
    pub sources: BTreeMap<String, Source>,
}

impl ResolvedConfig {
    pub fn hash(&self) -> String {
        Sha256::digest(self.text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn keys_from(&self, source: Source) -> Vec<&str> {
        self.sources
            .iter()
            .filter(|(_, s)| **s == source)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Parses `KEY=VALUE`; the value is read as a TOML value and falls back
/// to a plain string.
pub fn parse_override(s: &str) -> anyhow::Result<(Vec<String>, Value)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| config_err(format!("override '{s}' is not of the form KEY=VALUE")))?;
    let path: Vec<String> = key.trim().split('.').map(|p| p.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override '{s}' has an empty key segment")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((path, parsed))
}

fn set_path(table: &mut Table, path: &[String], value: Value) -> anyhow::Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut t = table;
    for p in parents {
        let entry = t.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override path '{}' crosses the non-table key '{p}'", path.join("."))))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

/// Recursively merges `top` into `base`; arrays and scalars are replaced.
fn merge(base: &mut Table, top: &Table) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// `section.key` paths of all keys set in `t` (one level below sections).
fn leaf_keys(t: &Table) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in t {
        match v {
            Value::Table(sub) if !sub.is_empty() => out.extend(sub.keys().map(|s| format!("{k}.{s}"))),
            _ => out.push(k.clone()),
        }
    }
    out
}

/// Resolves a problem file (`None` means empty) with overrides applied in
/// order. `delta_kappa` sets both the regulator contrast and the rod list.
pub fn resolve(text: Option<&str>, overrides: &[String], delta_kappa: Option<f64>, seed: Option<u64>) -> anyhow::Result<ResolvedConfig> {
    let user: Table = match text {
        Some(t) => toml::from_str(t).map_err(|e| config_err(format!("problem file: {e}")))?,
        None => Table::new(),
    };
    let mut layered = user.clone();
    let mut sources: BTreeMap<String, Source> = leaf_keys(&user).into_iter().map(|k| (k, Source::File)).collect();
    let mut flag_overrides: Vec<(Vec<String>, Value)> = Vec::new();
    for o in overrides {
        flag_overrides.push(parse_override(o)?);
    }
    if let Some(dk) = delta_kappa {
        flag_overrides.push((vec!["ersatz".into(), "delta_kappa".into()], Value::Float(dk)));
        flag_overrides.push((vec!["rod".into(), "delta_kappas".into()], Value::Array(vec![Value::Float(dk)])));
    }
    if let Some(s) = seed {
        let s = i64::try_from(s).map_err(|_| config_err("seed does not fit a TOML integer"))?;
        flag_overrides.push((vec!["grad_check".into(), "seed".into()], Value::Integer(s)));
    }
    for (path, value) in flag_overrides {
        set_path(&mut layered, &path, value)?;
        let key = path.iter().take(2).cloned().collect::<Vec<_>>().join(".");
        sources.insert(key, Source::Override);
    }

    let kind = match layered.get("objective").and_then(|o| o.get("kind")) {
        None => RegulatorKind::Switch,
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e| config_err(format!("objective.kind: {e}")))?,
    };
    let defaults = Value::try_from(ProblemFile::defaults(kind)).expect("defaults serialize");
    let mut merged = match defaults {
        Value::Table(t) => t,
        _ => unreachable!("a struct serializes to a table"),
    };
    merge(&mut merged, &layered);
    // Re-parse the text so type errors point at a line and key.
    let merged_text = toml::to_string(&merged).expect("table serializes");
    let file: ProblemFile =
        toml::from_str(&merged_text).map_err(|e| config_err(format!("in the resolved configuration: {e}")))?;
    file.problem()
        .validate()
        .map_err(|e| config_err(e.to_string()))?;
    file.rod.validate().map_err(|e| config_err(format!("rod: {e}")))?;
    let text = toml::to_string(&file).expect("config serializes");
    Ok(ResolvedConfig { file, text, sources })
}

/// Sections whose defaults come from a parameter table of the model, by kind.
pub fn default_provenance(kind: RegulatorKind) -> Vec<(&'static str, String)> {
    let name = kind.name();
    vec![
        ("material", "material parameter table".to_string()),
        ("mesh", "optimization and mesh parameter table".to_string()),
        ("optimizer", "optimization and mesh parameter table".to_string()),
        ("objective", format!("{name} parameter table (weights), optimization table (volume)")),
        ("cases", format!("{name} parameter table (target temperatures)")),
        ("rod", "rod benchmark setup (h = 1 kW/m²K, θ̄ = 200 °C, α = 0)".to_string()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_kind_defaults() {
        let r = resolve(None, &[], None, None).unwrap();
        assert_eq!(r.file, ProblemFile::defaults(RegulatorKind::Switch));
        assert_eq!(r.file.objective.weights, [2e3, 1e3]);
        let r = resolve(Some("[objective]\nkind = \"triode\"\n"), &[], None, None).unwrap();
        assert_eq!(r.file.problem(), RegulatorProblem::triode(true));
        assert_eq!(r.sources.get("objective.kind"), Some(&Source::File));
    }

    #[test]
    fn problem_round_trips() {
        for kind in [RegulatorKind::Switch, RegulatorKind::Diode, RegulatorKind::Triode] {
            let p = ProblemFile::defaults(kind);
            assert_eq!(p.problem(), RegulatorProblem::defaults(kind));
        }
    }

    #[test]
    fn precedence_file_then_overrides_then_flags() {
        let text = "[ersatz]\ndelta_kappa = 1e-2\n[mesh]\nnx = 40\n";
        let r = resolve(Some(text), &["mesh.nx=20".into()], Some(1e-4), None).unwrap();
        assert_eq!(r.file.ersatz.delta_kappa, 1e-4);
        assert_eq!(r.file.rod.delta_kappas, vec![1e-4]);
        assert_eq!(r.file.mesh.nx, 20);
        assert_eq!(r.sources["mesh.nx"], Source::Override);
        let r = resolve(Some(text), &[], None, Some(7)).unwrap();
        assert_eq!(r.file.ersatz.delta_kappa, 1e-2);
        assert_eq!(r.file.grad_check.seed, 7);
    }

    #[test]
    fn bad_input_names_the_problem() {
        let e = resolve(Some("[mesh]\nnx = 4O\n"), &[], None, None).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = resolve(Some("[mesh]\nnz = 4\n"), &[], None, None).unwrap_err().to_string();
        assert!(e.contains("nz"), "{e}");
        let e = resolve(None, &["mesh.nx=abc".into()], None, None).unwrap_err().to_string();
        assert!(e.contains("nx") && e.contains("abc"), "{e}");
        let e = resolve(None, &["objective.weights=[-1.0, 0.0]".into()], None, None).unwrap_err().to_string();
        assert!(e.contains("weights"), "{e}");
        assert!(resolve(None, &["no_equals".into()], None, None).is_err());
        assert!(resolve(None, &["objective.kind=\"amplifier\"".into()], None, None).is_err());
    }

    #[test]
    fn hash_depends_only_on_resolved_values() {
        let a = resolve(None, &["mesh.nx=40".into()], None, None).unwrap();
        let b = resolve(Some("[mesh]\nnx = 40\n"), &[], None, None).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = resolve(None, &["mesh.nx=41".into()], None, None).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
