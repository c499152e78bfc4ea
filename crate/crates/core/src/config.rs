//! Run configuration shared by every CLI verb.
//!
//! A config is a JSON object. Each verb reads the blocks it needs and
//! validates them before doing any work; unknown keys anywhere are errors.
//! Command-line flags are applied as overrides on the JSON tree before it is
//! deserialized, so a flag and the matching key behave identically.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{M1Choice, SqueezeConstants, Target, Variant};
use crate::covering::{NetOptions, NormSpec};
use crate::error::{Error, Result};
use crate::sim::{RdeParams, RfdeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Which model to use when both blocks are present.
    #[serde(default)]
    pub system: Option<SystemKind>,
    #[serde(default)]
    pub rde: Option<RdeParams>,
    #[serde(default)]
    pub rfde: Option<RfdeParams>,
    #[serde(default)]
    pub spectrum: SpectrumPlan,
    #[serde(default)]
    pub decomposition: DecompositionPlan,
    /// Raw squeeze constants, for bounding without a model.
    #[serde(default)]
    pub constants: Option<SqueezeConstants>,
    #[serde(default)]
    pub bounds: BoundsPlan,
    #[serde(default)]
    pub optimize: OptimizePlan,
    #[serde(default)]
    pub simulate: SimulatePlan,
    #[serde(default)]
    pub squeeze_check: SqueezePlan,
    #[serde(default)]
    pub absorbing_check: AbsorbingPlan,
    #[serde(default)]
    pub boxdim: BoxdimPlan,
    #[serde(default)]
    pub cover: Option<CoverPlan>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Rde,
    Rfde,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumPlan {
    /// Fourier modes to scan; defaults to `rde.num_modes`.
    pub max_mode: Option<usize>,
    /// Real-part floor; defaults to the coverage floor of `max_mode`.
    pub floor: Option<f64>,
    /// Use the literal sign convention `n^2 - (lambda + a + b e^{-lambda r})`.
    pub paper_sign: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecompositionPlan {
    /// Spectral cut.
    pub m: usize,
    /// History nodes on `[-r, 0]`.
    pub nodes: usize,
    pub dt: f64,
    /// Random trials for fitting K.
    pub trials: usize,
    /// Held-out trials for validating K.
    pub validation_trials: usize,
    /// Fit horizon; defaults to `10 r`.
    pub horizon: Option<f64>,
}

impl Default for DecompositionPlan {
    fn default() -> Self {
        Self { m: 1, nodes: 51, dt: 0.01, trials: 200, validation_trials: 100, horizon: None }
    }
}

/// Where the squeeze constants come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsSource {
    Raw,
    Rde,
    Rfde,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsPlan {
    pub alpha: f64,
    /// Squeezing time; ignored for raw constants, which carry their own.
    pub t0: f64,
    /// Defaults to nonautonomous for a time-dependent RFDE kernel.
    pub variant: Option<Variant>,
    pub m1: M1Choice,
    /// Defaults to `raw` when `constants` is given, else the model.
    pub source: Option<ConstantsSource>,
}

impl Default for BoundsPlan {
    fn default() -> Self {
        Self { alpha: 1.0, t0: 1.0, variant: None, m1: M1Choice::Derived, source: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizePlan {
    /// Defaults to `(0, 2]` for the Hausdorff bound and `(0, M1)` for the
    /// fractal bound, trimmed away from zero.
    pub alpha_range: Option<(f64, f64)>,
    pub t0_range: (f64, f64),
    pub target: Target,
}

impl Default for OptimizePlan {
    fn default() -> Self {
        Self { alpha_range: None, t0_range: (0.1, 10.0), target: Target::Hausdorff }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulatePlan {
    pub horizon: f64,
    pub dt: f64,
    /// Sup norm of the random initial history.
    pub amplitude: f64,
    /// Write every n-th step to the trajectory CSV.
    pub csv_every: usize,
    /// Leading Galerkin coefficients written per row.
    pub max_coeffs: usize,
}

impl Default for SimulatePlan {
    fn default() -> Self {
        Self { horizon: 20.0, dt: 0.01, amplitude: 1.0, csv_every: 10, max_coeffs: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqueezePlan {
    pub pairs: usize,
    pub horizon: f64,
    /// Sup norm of the first history of each pair.
    pub amplitude: f64,
    /// Sup norm of the difference between the two histories.
    pub separation: f64,
    pub every: usize,
}

impl Default for SqueezePlan {
    fn default() -> Self {
        Self { pairs: 10, horizon: 5.0, amplitude: 1.0, separation: 0.1, every: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbsorbingPlan {
    pub trials: usize,
    pub horizon: f64,
    /// Sup norm of the initial histories.
    pub amplitude: f64,
    pub every: usize,
    /// Exponent of the RDE norm envelope; defaults to `a + 1 / (2 r)`.
    pub delta: Option<f64>,
}

impl Default for AbsorbingPlan {
    fn default() -> Self {
        Self { trials: 10, horizon: 20.0, amplitude: 5.0, every: 10, delta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxdimPlan {
    pub initial_conditions: usize,
    pub amplitude: f64,
    pub transient: f64,
    pub horizon: f64,
    pub stride: f64,
    pub nodes: usize,
    /// Explicit decreasing radii; otherwise `eps_count` geometric radii from
    /// half the diameter down by `eps_span`.
    pub eps: Option<Vec<f64>>,
    pub eps_count: usize,
    pub eps_span: f64,
    /// Inclusive index range of the fit; defaults to the suggested window.
    pub window: Option<(usize, usize)>,
}

impl Default for BoxdimPlan {
    fn default() -> Self {
        Self {
            initial_conditions: 4,
            amplitude: 1.0,
            transient: 40.0,
            horizon: 100.0,
            stride: 0.1,
            nodes: 11,
            eps: None,
            eps_count: 10,
            eps_span: 100.0,
            window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverPlan {
    pub norm: NormSpec,
    pub r1: f64,
    pub r2: f64,
    #[serde(default = "default_probes")]
    pub random_probes: usize,
    #[serde(default = "default_lattice_probes")]
    pub max_lattice_probes: usize,
    /// User centers to verify instead of building a net.
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
}

fn default_probes() -> usize {
    NetOptions::default().random_probes
}

fn default_lattice_probes() -> usize {
    NetOptions::default().max_lattice_probes
}

/// The model selected by a config.
pub enum Model<'a> {
    Rde(&'a RdeParams),
    Rfde(&'a RfdeParams),
}

impl RunConfig {
    /// Deserializes a JSON tree, reporting the path of the offending field.
    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        Ok(cfg)
    }

    /// Parses JSON text; syntax errors carry a line and column.
    pub fn parse_json(text: &str) -> Result<Value> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON at line {}, column {}: {e}", e.line(), e.column())))
    }

    /// Reads a config file into a JSON tree.
    pub fn read_value(path: &Path) -> Result<Value> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> Result<Model<'_>> {
        let want = match (self.system, &self.rde, &self.rfde) {
            (Some(s), _, _) => Some(s),
            (None, Some(_), None) => Some(SystemKind::Rde),
            (None, None, Some(_)) => Some(SystemKind::Rfde),
            (None, Some(_), Some(_)) => {
                return Err(Error::Config("both `rde` and `rfde` given; set `system` to choose".into()));
            }
            (None, None, None) => None,
        };
        match want {
            Some(SystemKind::Rde) => {
                let p = self.rde.as_ref().ok_or_else(|| Error::Config("`system` is rde but there is no `rde` block".into()))?;
                p.validate()?;
                Ok(Model::Rde(p))
            }
            Some(SystemKind::Rfde) => {
                let p = self.rfde.as_ref().ok_or_else(|| Error::Config("`system` is rfde but there is no `rfde` block".into()))?;
                p.validate()?;
                Ok(Model::Rfde(p))
            }
            None => Err(Error::Config("config needs an `rde` or `rfde` block".into())),
        }
    }

    pub fn rde(&self) -> Result<&RdeParams> {
        match self.model()? {
            Model::Rde(p) => Ok(p),
            Model::Rfde(_) => Err(Error::Config("this command needs the `rde` system".into())),
        }
    }

    pub fn constants_source(&self) -> Result<ConstantsSource> {
        if let Some(s) = self.bounds.source {
            return Ok(s);
        }
        if self.constants.is_some() {
            return Ok(ConstantsSource::Raw);
        }
        Ok(match self.model()? {
            Model::Rde(_) => ConstantsSource::Rde,
            Model::Rfde(_) => ConstantsSource::Rfde,
        })
    }

    pub fn validate_decomposition(&self) -> Result<()> {
        let d = &self.decomposition;
        let bad = |m: String| Err(Error::Config(m));
        if d.m == 0 {
            return bad("decomposition.m must be at least 1".into());
        }
        if d.nodes < 2 {
            return bad("decomposition.nodes must be at least 2".into());
        }
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return bad(format!("decomposition.dt must be positive, got {}", d.dt));
        }
        if d.trials == 0 {
            return bad("decomposition.trials must be at least 1".into());
        }
        if let Some(h) = d.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("decomposition.horizon must be positive, got {h}"));
            }
        }
        Ok(())
    }
}

/// Sets `value` at a `/`-separated path, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.trim_start_matches('/').split('/').collect();
    for (i, key) in keys.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("cannot set `{path}`: `{}` is not an object", keys[..i].join("/"))))?;
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*key).to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Positive finite check used by the command runners.
pub(crate) fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}
