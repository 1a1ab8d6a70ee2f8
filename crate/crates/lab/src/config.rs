//! Experiment configuration: a TOML document with an optional `[run]`
//! table and one `[<kind>.<name>]` table per experiment.
//!
//! ```toml
//! [run]
//! seed = 7
//!
//! [dichotomy.weak]
//! alpha = 0.5
//! ns = [4, 5, 6, 7, 8, 9]
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use kpi_core::control::ProfileKind;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    /// Binary containers for fields, trajectories and Gramians; tables stay CSV.
    Bin,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Bin => "bin",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlAxis {
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equation {
    /// `∂ₜu − ∂ₓ|Dₓ|^α u − ∂ₓ⁻¹∂ᵧ²u = 0` on `T²`.
    #[serde(rename = "2d")]
    Full2D,
    /// The single-slice equation with transverse parameter `lambda`.
    #[serde(rename = "reduced")]
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Steer to rest.
    Zero,
    /// The free evolution of the initial datum; the control vanishes.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GramianKind {
    Observability,
    Hum,
}

fn two() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}
fn default_region() -> [f64; 2] {
    [PI / 4.0, 3.0 * PI / 4.0]
}
fn default_profile() -> ProfileKind {
    ProfileKind::SmoothExp
}
fn default_times() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}
fn sixteen() -> i64 {
    16
}
fn four() -> i64 {
    4
}
fn vertical() -> ControlAxis {
    ControlAxis::Vertical
}
fn full() -> Equation {
    Equation::Full2D
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    #[serde(default = "two")]
    pub alpha: f64,
    #[serde(default = "full")]
    pub equation: Equation,
    /// Required for the reduced equation.
    pub lambda: Option<f64>,
    /// Initial field container; random unit data on the window otherwise.
    pub input: Option<PathBuf>,
    #[serde(default = "sixteen")]
    pub kmax: i64,
    #[serde(default = "four")]
    pub lmax: i64,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveSpec {
    #[serde(default = "two")]
    pub alpha: f64,
    #[serde(default = "vertical")]
    pub control: ControlAxis,
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    #[serde(default = "default_profile")]
    pub profile: ProfileKind,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "sixteen")]
    pub kmax: i64,
    #[serde(default = "four")]
    pub lmax: i64,
    /// Recompute the smallest eigenvalue through time quadrature at two
    /// node counts (vertical control only).
    #[serde(default)]
    pub quadrature_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramianSpec {
    #[serde(default = "two")]
    pub alpha: f64,
    #[serde(default = "vertical")]
    pub control: ControlAxis,
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    #[serde(default = "default_profile")]
    pub profile: ProfileKind,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "sixteen")]
    pub kmax: i64,
    #[serde(default = "four")]
    pub lmax: i64,
    #[serde(default = "observability")]
    pub direction: GramianKind,
}

fn observability() -> GramianKind {
    GramianKind::Observability
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    500
}
fn default_nodes() -> usize {
    kpi_core::hum::DEFAULT_EXPORT_NODES
}
fn default_verify() -> usize {
    10_000
}
fn zero_target() -> Target {
    Target::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default = "two")]
    pub alpha: f64,
    #[serde(default = "vertical")]
    pub control: ControlAxis,
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    #[serde(default = "default_profile")]
    pub profile: ProfileKind,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "sixteen")]
    pub kmax: i64,
    #[serde(default = "four")]
    pub lmax: i64,
    /// Initial field container; random unit data on the window otherwise.
    pub initial: Option<PathBuf>,
    /// Target field container; overrides `target`.
    pub target_file: Option<PathBuf>,
    #[serde(default = "zero_target")]
    pub target: Target,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_nodes")]
    pub export_nodes: usize,
    /// Steps of the independent forcing check; 0 skips it.
    #[serde(default = "default_verify")]
    pub verify_steps: usize,
    pub seed: Option<u64>,
}

fn default_ns() -> Vec<u32> {
    (4..=9).collect()
}
fn half() -> f64 {
    0.5
}
fn quarter_pi() -> f64 {
    PI / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomySpec {
    pub alpha: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_ns")]
    pub ns: Vec<u32>,
    #[serde(default = "one")]
    pub big_b: f64,
    #[serde(default = "half")]
    pub small_b: f64,
    #[serde(default = "quarter_pi")]
    pub beta: f64,
}

fn default_m_max() -> usize {
    32
}
// The default region covers a quarter of the circle; degree 32 needs 65
// nodes inside it.
fn default_profile_nx() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConstantSpec {
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    #[serde(default = "default_profile")]
    pub profile: ProfileKind,
    #[serde(default = "default_profile_nx")]
    pub nx: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
}

fn default_xi_range() -> [f64; 2] {
    [0.05, 3.0]
}
fn default_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    #[serde(default = "two")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "default_xi_range")]
    pub xi: [f64; 2],
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_h() -> f64 {
    1.0 / 64.0
}
fn default_trials() -> usize {
    8
}
fn default_n_range() -> [i32; 2] {
    [-2, 4]
}
fn default_near() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyScanSpec {
    #[serde(default = "two")]
    pub alpha: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    /// Inclusive block range.
    #[serde(default = "default_n_range")]
    pub n: [i32; 2],
    #[serde(default = "one")]
    pub eps0: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Blocks within this distance of the critical block count as near-critical.
    #[serde(default = "default_near")]
    pub near: i32,
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    #[serde(default = "default_profile")]
    pub profile: ProfileKind,
    pub seed: Option<u64>,
}

fn default_hs() -> Vec<f64> {
    vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
}
fn default_weak_trials() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakObservabilitySpec {
    #[serde(default = "two")]
    pub alpha: f64,
    #[serde(default = "default_hs")]
    pub hs: Vec<f64>,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_weak_trials")]
    pub trials: usize,
    /// Frequency window as a multiple of `1/h`.
    #[serde(default = "two")]
    pub reach: f64,
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    #[serde(default = "default_profile")]
    pub profile: ProfileKind,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Spec {
    Evolve(EvolveSpec),
    Observe(ObserveSpec),
    Gramian(GramianSpec),
    Control(ControlSpec),
    Dichotomy(DichotomySpec),
    SpectralConstant(SpectralConstantSpec),
    Dispersion(DispersionSpec),
    FrequencyScan(FrequencyScanSpec),
    WeakObservability(WeakObservabilitySpec),
}

/// Section names, in execution order.
pub const KINDS: [&str; 9] = [
    "dispersion",
    "evolve",
    "observe",
    "gramian",
    "spectral-constant",
    "control",
    "dichotomy",
    "frequency-scan",
    "weak-observability",
];

impl Spec {
    pub fn kind(&self) -> &'static str {
        match self {
            Spec::Dispersion(_) => "dispersion",
            Spec::Evolve(_) => "evolve",
            Spec::Observe(_) => "observe",
            Spec::Gramian(_) => "gramian",
            Spec::SpectralConstant(_) => "spectral-constant",
            Spec::Control(_) => "control",
            Spec::Dichotomy(_) => "dichotomy",
            Spec::FrequencyScan(_) => "frequency-scan",
            Spec::WeakObservability(_) => "weak-observability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub name: String,
    pub spec: Spec,
}

impl Experiment {
    /// `kind.name`, also the output directory name.
    pub fn id(&self) -> String {
        format!("{}.{}", self.spec.kind(), self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub run: RunSection,
    pub experiments: Vec<Experiment>,
    /// Directory that relative input paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    dispersion: BTreeMap<String, DispersionSpec>,
    #[serde(default)]
    evolve: BTreeMap<String, EvolveSpec>,
    #[serde(default)]
    observe: BTreeMap<String, ObserveSpec>,
    #[serde(default)]
    gramian: BTreeMap<String, GramianSpec>,
    #[serde(default, rename = "spectral-constant")]
    spectral_constant: BTreeMap<String, SpectralConstantSpec>,
    #[serde(default)]
    control: BTreeMap<String, ControlSpec>,
    #[serde(default)]
    dichotomy: BTreeMap<String, DichotomySpec>,
    #[serde(default, rename = "frequency-scan")]
    frequency_scan: BTreeMap<String, FrequencyScanSpec>,
    #[serde(default, rename = "weak-observability")]
    weak_observability: BTreeMap<String, WeakObservabilitySpec>,
}

/// 1-based line of the `[kind.name]` header, if present.
fn section_line(src: &str, id: &str) -> Option<usize> {
    let quoted = {
        let (kind, name) = id.split_once('.').unwrap_or((id, ""));
        format!("[{kind}.\"{name}\"]")
    };
    src.lines()
        .position(|l| {
            let t: String = l.chars().filter(|c| !c.is_whitespace()).collect();
            t == format!("[{id}]") || t == quoted
        })
        .map(|i| i + 1)
}

fn check_name(name: &str) -> std::result::Result<(), String> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(format!("experiment name {name:?} must be non-empty ASCII letters, digits, '-' or '_'"));
    }
    Ok(())
}

fn positive(what: &str, v: f64) -> std::result::Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{what} must be positive and finite, got {v}"))
    }
}

fn region(r: [f64; 2]) -> std::result::Result<(), String> {
    if r[0] < r[1] && r[1] - r[0] < 2.0 * PI && r[0] >= -PI && r[1] <= PI {
        Ok(())
    } else {
        Err(format!("region [{}, {}] must satisfy -pi <= a < b <= pi", r[0], r[1]))
    }
}

fn window(kmax: i64, lmax: i64) -> std::result::Result<(), String> {
    if kmax >= 1 && lmax >= 0 && kmax <= 4096 && lmax <= 1024 {
        Ok(())
    } else {
        Err(format!("window needs 1 <= kmax <= 4096 and 0 <= lmax <= 1024, got kmax = {kmax}, lmax = {lmax}"))
    }
}

impl Spec {
    /// Checks that need no numerics; the engines report the rest.
    fn validate(&self) -> std::result::Result<(), String> {
        match self {
            Spec::Evolve(s) => {
                positive("alpha", s.alpha)?;
                window(s.kmax, s.lmax)?;
                if s.times.is_empty() || s.times.iter().any(|t| !t.is_finite()) {
                    return Err("times must be a non-empty list of finite numbers".into());
                }
                match (s.equation, s.lambda) {
                    (Equation::Reduced, None) => return Err("the reduced equation needs lambda".into()),
                    (Equation::Full2D, Some(_)) => return Err("lambda only applies to the reduced equation".into()),
                    _ => {}
                }
            }
            Spec::Observe(s) => {
                positive("alpha", s.alpha)?;
                positive("horizon", s.horizon)?;
                region(s.region)?;
                window(s.kmax, s.lmax)?;
                if s.quadrature_check && s.control == ControlAxis::Horizontal {
                    return Err("quadrature_check is only available for vertical control".into());
                }
            }
            Spec::Gramian(s) => {
                positive("alpha", s.alpha)?;
                positive("horizon", s.horizon)?;
                region(s.region)?;
                window(s.kmax, s.lmax)?;
            }
            Spec::Control(s) => {
                positive("alpha", s.alpha)?;
                positive("horizon", s.horizon)?;
                positive("tol", s.tol)?;
                region(s.region)?;
                window(s.kmax, s.lmax)?;
                if s.export_nodes < 2 {
                    return Err("export_nodes must be at least 2".into());
                }
                if s.verify_steps != 0 && s.verify_steps < 100 {
                    return Err("verify_steps must be 0 (skip) or at least 100".into());
                }
            }
            Spec::Dichotomy(s) => {
                positive("horizon", s.horizon)?;
                if s.ns.len() < 2 {
                    return Err("ns needs at least two scales".into());
                }
                if s.ns.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("ns must be strictly increasing".into());
                }
            }
            Spec::SpectralConstant(s) => {
                region(s.region)?;
                if s.m_max as i64 >= (s.nx / 2) as i64 {
                    return Err(format!("m_max = {} needs nx > {}", s.m_max, 2 * s.m_max + 1));
                }
            }
            Spec::Dispersion(s) => {
                positive("alpha", s.alpha)?;
                if !(s.lambda >= 0.0) {
                    return Err(format!("lambda must be >= 0, got {}", s.lambda));
                }
                if !(s.xi[0] > 0.0 && s.xi[1] > s.xi[0]) {
                    return Err("xi range must satisfy 0 < xi_min < xi_max".into());
                }
                if s.points < 2 {
                    return Err("points must be at least 2".into());
                }
            }
            Spec::FrequencyScan(s) => {
                positive("alpha", s.alpha)?;
                positive("h", s.h)?;
                positive("eps0", s.eps0)?;
                positive("horizon", s.horizon)?;
                region(s.region)?;
                if s.n[0] > s.n[1] {
                    return Err("block range n must be [low, high] with low <= high".into());
                }
                if s.trials == 0 {
                    return Err("trials must be at least 1".into());
                }
            }
            Spec::WeakObservability(s) => {
                positive("alpha", s.alpha)?;
                positive("horizon", s.horizon)?;
                positive("reach", s.reach)?;
                region(s.region)?;
                if s.hs.is_empty() || s.hs.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
                    return Err("hs must be a non-empty list of values in (0, 1)".into());
                }
                if s.trials == 0 {
                    return Err("trials must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

pub fn parse(src: &str, origin: &str) -> Result<Config> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| LabError::config(format!("{origin}: {e}")))?;
    let mut experiments = Vec::new();
    macro_rules! collect {
        ($field:ident, $variant:ident) => {
            for (name, spec) in raw.$field {
                experiments.push(Experiment { name, spec: Spec::$variant(spec) });
            }
        };
    }
    collect!(dispersion, Dispersion);
    collect!(evolve, Evolve);
    collect!(observe, Observe);
    collect!(gramian, Gramian);
    collect!(spectral_constant, SpectralConstant);
    collect!(control, Control);
    collect!(dichotomy, Dichotomy);
    collect!(frequency_scan, FrequencyScan);
    collect!(weak_observability, WeakObservability);
    for e in &experiments {
        if let Err(msg) = check_name(&e.name).and_then(|_| e.spec.validate()) {
            let id = e.id();
            let at = section_line(src, &id).map(|l| format!(", line {l}")).unwrap_or_default();
            return Err(LabError::config(format!("{origin}{at}: [{id}]: {msg}")));
        }
    }
    if let Some(0) = raw.run.threads {
        return Err(LabError::config(format!("{origin}: [run]: threads must be at least 1")));
    }
    Ok(Config { run: raw.run, experiments, base_dir: PathBuf::new() })
}

pub fn load(path: &std::path::Path) -> Result<Config> {
    let src = std::fs::read_to_string(path).map_err(|e| LabError::io(format!("reading {}", path.display()), e))?;
    let mut cfg = parse(&src, &path.display().to_string())?;
    cfg.base_dir = path.parent().map(PathBuf::from).unwrap_or_default();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_has_no_experiments() {
        let cfg = parse("", "t").unwrap();
        assert!(cfg.experiments.is_empty());
        assert_eq!(cfg.run, RunSection::default());
    }

    #[test]
    fn sections_become_experiments_in_kind_order() {
        let cfg = parse(
            "[dichotomy.b]\nalpha = 2.0\n[dispersion.z]\n[dichotomy.a]\nalpha = 0.5\nns = [4, 5]\n",
            "t",
        )
        .unwrap();
        let ids: Vec<String> = cfg.experiments.iter().map(|e| e.id()).collect();
        assert_eq!(ids, ["dispersion.z", "dichotomy.a", "dichotomy.b"]);
        match &cfg.experiments[1].spec {
            Spec::Dichotomy(d) => {
                assert_eq!(d.ns, vec![4, 5]);
                assert_eq!(d.beta, PI / 4.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_reported_with_their_line() {
        let err = parse("[run]\nseed = 1\n\n[observe.x]\nkmax = 8\nkmaxx = 9\n", "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 6"), "{msg}");
        assert!(msg.contains("kmaxx"), "{msg}");
        assert_eq!(err.exit_code(), 2);
        let err = parse("[bogus.x]\n", "cfg.toml").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn semantic_errors_name_the_section_line() {
        let err = parse("[run]\n\n[evolve.r]\nequation = \"reduced\"\n", "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("needs lambda"), "{msg}");
        assert!(parse("[dichotomy.a]\nalpha = 0.5\nns = [5, 4]\n", "t").is_err());
        assert!(parse("[run]\nthreads = 0\n", "t").is_err());
        assert!(parse("[dispersion.\"bad name\"]\n", "t").is_err());
    }
}
