use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use adirk::mtx::ProblemBundle;
use adirk::shifts::{DEFAULT_H2_MAX_SWEEPS, DEFAULT_H2_TOL};
use adirk::verify::DEFAULT_ORACLE_CAP;
use adirk::{synth_stable_system, LtiSystem, SynthKind};
use serde::Deserialize;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Galerkin projection onto the extended Krylov space (shifts 0 and infinity).
    Extended,
    /// Galerkin projection at pseudo-H2 shifts; equal to ADI at those shifts.
    PseudoH2,
    /// Low-rank ADI at Penzl's heuristic shifts.
    PenzlAdi,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Extended, Method::PseudoH2, Method::PenzlAdi];

    /// Column slot in the CSV (`err_method1` is slot 0).
    pub fn slot(self) -> usize {
        match self {
            Method::Extended => 0,
            Method::PseudoH2 => 1,
            Method::PenzlAdi => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Extended => "extended",
            Method::PseudoH2 => "pseudo-h2",
            Method::PenzlAdi => "penzl-adi",
        })
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim() {
            "extended" => Ok(Method::Extended),
            "pseudo-h2" => Ok(Method::PseudoH2),
            "penzl-adi" => Ok(Method::PenzlAdi),
            other => Err(BenchError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Where the system comes from: `synth:<kind>:<n>` or a bundle directory.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Synth { kind: SynthKind, n: usize },
    Bundle(PathBuf),
}

impl FromStr for ProblemSource {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let Some(rest) = s.strip_prefix("synth:") else {
            return Ok(ProblemSource::Bundle(PathBuf::from(s)));
        };
        let (kind, n) = rest
            .rsplit_once(':')
            .ok_or_else(|| BenchError::Config(format!("expected synth:<kind>:<n>, got `{s}`")))?;
        let kind = kind.parse::<SynthKind>().map_err(|e| BenchError::Config(e.to_string()))?;
        let n = n
            .parse::<usize>()
            .map_err(|_| BenchError::Config(format!("cannot parse dimension `{n}` in `{s}`")))?;
        if n == 0 {
            return Err(BenchError::Config("synthetic dimension must be positive".into()));
        }
        Ok(ProblemSource::Synth { kind, n })
    }
}

impl fmt::Display for ProblemSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSource::Synth { kind, n } => write!(f, "synth:{kind}:{n}"),
            ProblemSource::Bundle(p) => write!(f, "{}", p.display()),
        }
    }
}

impl<'de> Deserialize<'de> for ProblemSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PseudoH2Config {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Real starting shifts; rank `r` uses the first `r`. Absent means the
    /// log-spaced Ritz default.
    pub sigma0: Option<Vec<f64>>,
}

impl Default for PseudoH2Config {
    fn default() -> Self {
        PseudoH2Config { tol: DEFAULT_H2_TOL, max_sweeps: DEFAULT_H2_MAX_SWEEPS, sigma0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenzlConfig {
    pub k_plus: usize,
    pub k_minus: usize,
}

impl Default for PenzlConfig {
    fn default() -> Self {
        PenzlConfig { k_plus: 20, k_minus: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub problem: ProblemSource,
    #[serde(default)]
    pub seed: u64,
    pub ranks: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub pseudo_h2: PseudoH2Config,
    #[serde(default)]
    pub penzl: PenzlConfig,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_oracle_cap() -> usize {
    DEFAULT_ORACLE_CAP
}

/// Command-line values that replace their config-file counterparts.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub problem: Option<String>,
    pub ranks: Option<Vec<usize>>,
    pub methods: Option<Vec<String>>,
    pub h2_tol: Option<f64>,
    pub h2_max_sweeps: Option<usize>,
    pub penzl_kp: Option<usize>,
    pub penzl_km: Option<usize>,
    pub oracle_cap: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl BenchConfig {
    pub fn new(problem: ProblemSource, ranks: Vec<usize>) -> Self {
        BenchConfig {
            problem,
            seed: 0,
            ranks,
            methods: default_methods(),
            pseudo_h2: PseudoH2Config::default(),
            penzl: PenzlConfig::default(),
            oracle_cap: DEFAULT_ORACLE_CAP,
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Reads the file if given, applies overrides, then validates what can be
    /// checked without loading the problem.
    pub fn resolve(path: Option<&Path>, o: Overrides) -> Result<Self, BenchError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => {
                let problem = o
                    .problem
                    .as_deref()
                    .ok_or_else(|| BenchError::Config("no config file and no --problem".into()))?
                    .parse()?;
                let ranks = o.ranks.clone().ok_or_else(|| BenchError::Config("no config file and no --ranks".into()))?;
                Self::new(problem, ranks)
            }
        };
        if let Some(p) = &o.problem {
            cfg.problem = p.parse()?;
        }
        if let Some(r) = o.ranks {
            cfg.ranks = r;
        }
        if let Some(m) = o.methods {
            cfg.methods = m.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
        }
        if let Some(t) = o.h2_tol {
            cfg.pseudo_h2.tol = t;
        }
        if let Some(s) = o.h2_max_sweeps {
            cfg.pseudo_h2.max_sweeps = s;
        }
        if let Some(k) = o.penzl_kp {
            cfg.penzl.k_plus = k;
        }
        if let Some(k) = o.penzl_km {
            cfg.penzl.k_minus = k;
        }
        if let Some(c) = o.oracle_cap {
            cfg.oracle_cap = c;
        }
        if let Some(out) = o.out {
            cfg.out = Some(out);
        }
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.methods.is_empty() {
            return Err(BenchError::Config("method list is empty".into()));
        }
        if self.ranks.is_empty() {
            return Err(BenchError::Config("rank list is empty".into()));
        }
        if self.ranks[0] == 0 || self.ranks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BenchError::Config(format!("ranks must be positive and strictly increasing: {:?}", self.ranks)));
        }
        if !(self.pseudo_h2.tol > 0.0) {
            return Err(BenchError::Config("pseudo-H2 tolerance must be positive".into()));
        }
        if let Some(s0) = &self.pseudo_h2.sigma0 {
            let need = *self.ranks.last().unwrap();
            if s0.len() < need {
                return Err(BenchError::Config(format!("sigma0 has {} entries but the largest rank is {need}", s0.len())));
            }
            if s0.iter().any(|s| !(*s > 0.0)) {
                return Err(BenchError::Config("sigma0 entries must be positive".into()));
            }
        }
        if self.penzl.k_plus + self.penzl.k_minus == 0 {
            return Err(BenchError::Config("Penzl needs k_plus + k_minus > 0".into()));
        }
        Ok(())
    }

    /// Loads or synthesizes the system and checks the ranks against its size.
    pub fn load_system(&self) -> Result<LtiSystem, BenchError> {
        let sys = match &self.problem {
            ProblemSource::Synth { kind, n } => synth_stable_system(*n, *kind, self.seed)?,
            ProblemSource::Bundle(dir) => {
                let bundle = ProblemBundle::load(dir)
                    .map_err(|e| BenchError::Config(format!("cannot load bundle {}: {e}", dir.display())))?;
                if bundle.input_columns > 1 {
                    log::info!("bundle has {} input columns; using the first", bundle.input_columns);
                }
                bundle.lti().map_err(|e| BenchError::Config(e.to_string()))?
            }
        };
        let n = sys.n();
        if let Some(&r) = self.ranks.iter().find(|&&r| r > n) {
            return Err(BenchError::Config(format!("rank {r} exceeds the system dimension {n}")));
        }
        Ok(sys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let cfg = BenchConfig::from_toml(
            r#"
            problem = "synth:tridiagonal:40"
            seed = 3
            ranks = [2, 4]
            methods = ["pseudo-h2", "penzl-adi"]
            oracle_cap = 10000
            [pseudo_h2]
            tol = 1e-10
            max_sweeps = 50
            [penzl]
            k_plus = 8
            k_minus = 4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemSource::Synth { kind: SynthKind::Tridiagonal, n: 40 });
        assert_eq!(cfg.methods, vec![Method::PseudoH2, Method::PenzlAdi]);
        assert_eq!(cfg.pseudo_h2.max_sweeps, 50);
        assert_eq!(cfg.penzl.k_minus, 4);
        cfg.validate().unwrap();
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = BenchConfig::from_toml("problem = \"data/cd\"\nranks = [1]\n").unwrap();
        assert_eq!(cfg.problem, ProblemSource::Bundle("data/cd".into()));
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.pseudo_h2.tol, DEFAULT_H2_TOL);
        assert_eq!(cfg.oracle_cap, DEFAULT_ORACLE_CAP);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(BenchConfig::from_toml("problem = \"synth:cubic:4\"\nranks = [1]").is_err());
        assert!(BenchConfig::from_toml("problem = \"synth:diagonal:4\"\nranks = [1]\ncolour = 1").is_err());
        let mut cfg = BenchConfig::new("synth:diagonal:4".parse().unwrap(), vec![2, 2]);
        assert!(cfg.validate().is_err());
        cfg.ranks = vec![1, 2];
        cfg.methods.clear();
        assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            problem: Some("synth:diagonal:6".into()),
            ranks: Some(vec![1, 3]),
            methods: Some(vec!["penzl-adi".into()]),
            h2_tol: Some(1e-6),
            seed: Some(9),
            ..Overrides::default()
        };
        let cfg = BenchConfig::resolve(None, o).unwrap();
        assert_eq!(cfg.ranks, vec![1, 3]);
        assert_eq!(cfg.methods, vec![Method::PenzlAdi]);
        assert_eq!(cfg.pseudo_h2.tol, 1e-6);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn rank_above_dimension_is_config_error() {
        let cfg = BenchConfig::new("synth:diagonal:3".parse().unwrap(), vec![1, 4]);
        assert!(matches!(cfg.load_system(), Err(BenchError::Config(_))));
    }
}
