use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinlab::cumulants::Lattice;
use spinlab::dynamics::{EvolverConfig, Method, Window};
use spinlab::open_chain::{Jump, LindbladModel};
use spinlab::{Complex64 as C, LocalOperator, Pauli};

use crate::CliError;

/// Where the model comes from: a JSON model file, an inline table, or a seeded random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Keyword(String),
    Inline(LindbladModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSpec {
    pub sites: usize,
    pub periodic: bool,
    pub start: i64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { sites: 12, periodic: false, start: 0 }
    }
}

impl WindowSpec {
    pub fn window(&self) -> Window {
        if self.periodic {
            Window::ring(self.sites)
        } else {
            Window::open(self.start, self.sites)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolverSpec {
    pub method: Method,
    pub dt: f64,
}

impl Default for EvolverSpec {
    fn default() -> Self {
        Self { method: Method::Auto, dt: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrSpec {
    pub a: String,
    pub b: String,
    /// Defaults to every site of the window, relative to its start.
    pub displacements: Option<Vec<i64>>,
    pub times: Vec<f64>,
    pub threshold: f64,
}

impl Default for LrSpec {
    fn default() -> Self {
        Self {
            a: "Z0".into(),
            b: "Z0".into(),
            displacements: None,
            times: vec![0.125, 0.25, 0.375, 0.5],
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaySpec {
    pub a: String,
    pub b: String,
    pub v: f64,
    pub direction: i8,
    pub t_max: f64,
    pub dt: f64,
    pub k: f64,
    pub f: f64,
}

impl Default for RaySpec {
    fn default() -> Self {
        Self { a: "Z0".into(), b: "Z0".into(), v: 0.3, direction: 1, t_max: 8.0, dt: 0.05, k: 0.0, f: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CumulantSpec {
    pub ops: Vec<String>,
    pub times: Vec<f64>,
    /// Displacement tuples; defaults to (0, z, 2z, …) for z = 1..5.
    pub schedule: Option<Vec<Vec<i64>>>,
    pub kind: Lattice,
}

impl Default for CumulantSpec {
    fn default() -> Self {
        Self { ops: vec!["Z0".into(), "X0".into(), "Z0".into()], times: vec![0.5; 3], schedule: None, kind: Lattice::All }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelatorSpec {
    pub a: String,
    pub b: String,
    pub t_max: f64,
    pub dt: f64,
    pub radius: usize,
    pub f: f64,
    pub k: f64,
    pub kappa: f64,
    /// Charge densities for `euler`; `energy` names the model's energy density.
    /// Discovered at `charge_radius` when absent.
    pub basis: Option<Vec<String>>,
    pub charge_radius: usize,
}

impl Default for CorrelatorSpec {
    fn default() -> Self {
        Self {
            a: "X0".into(),
            b: "X0".into(),
            t_max: 8.0,
            dt: 0.05,
            radius: 3,
            f: 0.0,
            k: 0.0,
            kappa: 1.0,
            basis: None,
            charge_radius: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnsagerSpec {
    pub ring: usize,
    pub horizons: Vec<f64>,
    pub nodes: usize,
    pub chaotic: bool,
}

impl Default for OnsagerSpec {
    fn default() -> Self {
        Self { ring: 8, horizons: vec![0.25, 0.5, 1.0], nodes: 16, chaotic: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSpec {
    /// Chemical potentials for `bound` and `stationarity`; defaults to `[mu]`.
    pub mus: Option<Vec<f64>>,
    pub ring: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self { mus: None, ring: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Path to a model JSON file, `"random"`, or an inline model; the XX chain when absent.
    pub model: Option<ModelSource>,
    pub mu: f64,
    pub seed: u64,
    /// Output directory; excluded from the config hash.
    pub out: Option<PathBuf>,
    pub window: WindowSpec,
    pub evolver: EvolverSpec,
    pub lr: LrSpec,
    pub ray: RaySpec,
    pub cumulants: CumulantSpec,
    pub correlator: CorrelatorSpec,
    pub onsager: OnsagerSpec,
    pub scan: ScanSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: None,
            mu: 0.0,
            seed: 0,
            out: None,
            window: WindowSpec::default(),
            evolver: EvolverSpec::default(),
            lr: LrSpec::default(),
            ray: RaySpec::default(),
            cumulants: CumulantSpec::default(),
            correlator: CorrelatorSpec::default(),
            onsager: OnsagerSpec::default(),
            scan: ScanSpec::default(),
        }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::ConfigInvalid(format!("{key}: {msg}"))
}

impl ExperimentConfig {
    /// TOML unless the extension is `.json`; model paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?
        };
        if let Some(ModelSource::Keyword(k)) = &cfg.model {
            if k != "random" && Path::new(k).is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.model = Some(ModelSource::Keyword(base.join(k).to_string_lossy().into_owned()));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {v}")))
            }
        };
        if !self.mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if self.window.sites == 0 {
            return Err(invalid("window.sites", "must be at least 1"));
        }
        positive("evolver.dt", self.evolver.dt)?;
        positive("lr.threshold", self.lr.threshold)?;
        if self.lr.times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(invalid("lr.times", "must be nonnegative"));
        }
        positive("ray.t_max", self.ray.t_max)?;
        positive("ray.dt", self.ray.dt)?;
        if self.ray.direction.abs() != 1 {
            return Err(invalid("ray.direction", "must be 1 or -1"));
        }
        positive("correlator.t_max", self.correlator.t_max)?;
        positive("correlator.dt", self.correlator.dt)?;
        if self.cumulants.ops.len() != self.cumulants.times.len() {
            return Err(invalid("cumulants.times", "needs one time per operator"));
        }
        if self.onsager.horizons.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(invalid("onsager.horizons", "must be positive"));
        }
        if self.onsager.nodes < 2 {
            return Err(invalid("onsager.nodes", "must be at least 2"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&Self { out: None, ..self.clone() }).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model(&self) -> Result<LindbladModel, CliError> {
        match &self.model {
            None => Ok(LindbladModel::new(C::new(1.0, 0.0), 0.0, 0.0, vec![])),
            Some(ModelSource::Inline(m)) => Ok(m.clone()),
            Some(ModelSource::Keyword(k)) if k == "random" => Ok(random_model(self.seed)),
            Some(ModelSource::Keyword(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| invalid("model", format!("{path}: {e}")))?;
                serde_json::from_str(&text).map_err(|e| invalid("model", e))
            }
        }
    }

    pub fn evolver_config(&self, window: Window) -> EvolverConfig {
        EvolverConfig::new(window).with_method(self.evolver.method).with_dt(self.evolver.dt)
    }

    pub fn mus(&self) -> Vec<f64> {
        self.scan.mus.clone().unwrap_or_else(|| vec![self.mu])
    }
}

/// A detailed-balance model drawn from `seed`: one or two jumps, parameters uniform in [−1, 1].
pub fn random_model(seed: u64) -> LindbladModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut z = || C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let jumps = (0..2).map(|_| Jump::new(z(), z(), z(), z(), z())).collect();
        let alpha = z();
        let (beta, gamma) = (z().re, z().re);
        let mut m = LindbladModel::new(alpha, beta, gamma, jumps);
        if m.enforce_detailed_balance().is_ok() {
            return m;
        }
    }
}

/// Parses operators like `Z0`, `X0 X1`, `0.5 Z0 Z1 - 2 X3 + 0.5i Y2`: terms separated by
/// standalone `+`/`-`, each an optional real or imaginary (`…i`) coefficient followed by Pauli
/// factors `<X|Y|Z><site>`. `energy` names the model's energy density h(0).
pub fn parse_operator(key: &str, text: &str, model: &LindbladModel) -> Result<LocalOperator, CliError> {
    if text.trim() == "energy" {
        return Ok(model.hamiltonian_density());
    }
    let mut total = LocalOperator::zero();
    let mut sign = 1.0;
    let mut coeff = C::new(1.0, 0.0);
    let mut term: Option<LocalOperator> = None;
    let mut flush = |term: &mut Option<LocalOperator>, coeff: &mut C, sign: f64| -> Result<(), CliError> {
        match term.take() {
            Some(t) => total += &t.scale(*coeff * sign),
            None if *coeff != C::new(1.0, 0.0) => total += &LocalOperator::scalar(*coeff * sign),
            None => return Err(invalid(key, format!("empty term in {text:?}"))),
        }
        *coeff = C::new(1.0, 0.0);
        Ok(())
    };
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(invalid(key, "empty operator"));
    }
    for (i, tok) in tokens.iter().enumerate() {
        match *tok {
            "+" | "-" => {
                if i > 0 {
                    flush(&mut term, &mut coeff, sign)?;
                }
                sign = if *tok == "-" { -1.0 } else { 1.0 };
            }
            _ => {
                let first = tok.chars().next().expect("non-empty token");
                let letter = match first {
                    'X' => Some(Pauli::X),
                    'Y' => Some(Pauli::Y),
                    'Z' => Some(Pauli::Z),
                    _ => None,
                };
                if let Some(p) = letter {
                    let site: i64 = tok[1..].parse().map_err(|_| invalid(key, format!("bad site in {tok:?}")))?;
                    let f = LocalOperator::pauli(site, p);
                    term = Some(match term.take() {
                        Some(t) => &t * &f,
                        None => f,
                    });
                } else if let Some(im) = tok.strip_suffix('i') {
                    let v: f64 = im.parse().map_err(|_| invalid(key, format!("bad coefficient {tok:?}")))?;
                    coeff *= C::new(0.0, v);
                } else {
                    let v: f64 = tok.parse().map_err(|_| invalid(key, format!("bad token {tok:?}")))?;
                    coeff *= v;
                }
            }
        }
    }
    flush(&mut term, &mut coeff, sign)?;
    Ok(total.prune(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xx() -> LindbladModel {
        LindbladModel::new(C::new(1.0, 0.0), 0.0, 0.0, vec![])
    }

    #[test]
    fn operator_grammar() {
        let m = xx();
        assert_eq!(parse_operator("a", "Z0", &m).unwrap(), LocalOperator::sz(0));
        let got = parse_operator("a", "0.5 X0 + 0.5i Y0", &m).unwrap();
        assert!(got.max_abs_diff(&LocalOperator::sigma_plus(0)) < 1e-15);
        let got = parse_operator("a", "X0 X1 - 2 Z-1", &m).unwrap();
        let want = &(&LocalOperator::sx(0) * &LocalOperator::sx(1)) - &LocalOperator::sz(-1).scale_re(2.0);
        assert!(got.max_abs_diff(&want) < 1e-15);
        assert_eq!(parse_operator("a", "energy", &m).unwrap(), m.hamiltonian_density());
        assert!(matches!(parse_operator("lr.a", "Q3", &m), Err(CliError::ConfigInvalid(msg)) if msg.starts_with("lr.a")));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { out: Some("/elsewhere".into()), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn toml_and_json_agree() {
        let t: ExperimentConfig = toml::from_str("mu = 0.5\n[window]\nsites = 6\nperiodic = true\n").unwrap();
        let j: ExperimentConfig = serde_json::from_str(r#"{"mu": 0.5, "window": {"sites": 6, "periodic": true}}"#).unwrap();
        assert_eq!(t, j);
        assert!(toml::from_str::<ExperimentConfig>("[window]\nsize = 3\n").unwrap_err().to_string().contains("size"));
    }

    #[test]
    fn random_models_are_seeded_and_balanced() {
        assert_eq!(random_model(7), random_model(7));
        assert!(random_model(7).check().is_ok());
    }
}
