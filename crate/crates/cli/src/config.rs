//! Strict JSON experiment configuration.
//!
//! The document is a flat set of sections — `grid`, `data`, `physics`,
//! `determinant`, `norms`, `sweep`, `output` — plus a top-level `seed`.
//! Every section is optional at the document level (each subcommand names
//! the ones it needs), but within a section the schema is strict: unknown
//! keys are parse errors, so a typo'd field fails loudly with a line/column
//! diagnostic instead of silently falling back to a default.
//!
//! Box lengths are given in units of π (`"box_pi": 16` means `L = 16π`),
//! matching how every experiment here states its domain. Lebesgue exponents
//! accept either a JSON number or the string `"inf"`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use biharmonic_core::dynamics::{Coefficients, InitialData};
use biharmonic_core::estimates::AdmissibleFamily;

use crate::Failure;

/// Top-level configuration document.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    /// RNG seed for the ensemble subcommands; `--seed` overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub physics: Option<PhysicsSection>,
    #[serde(default)]
    pub determinant: Option<DeterminantSection>,
    #[serde(default)]
    pub norms: Option<NormsSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

/// A parsed config together with the hash of the exact bytes it came from.
pub struct LoadedConfig {
    pub doc: ConfigDoc,
    /// SHA-256 of the raw config file, stamped into every artifact.
    pub sha256: String,
}

/// Reads and parses a config file. Parse failures carry serde's line/column
/// diagnostic so a broken config can be fixed without guesswork.
pub fn load(path: &Path) -> Result<LoadedConfig, Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut sha256 = String::with_capacity(64);
    for byte in digest {
        write!(sha256, "{byte:02x}").expect("writing to a String cannot fail");
    }
    let doc = serde_json::from_slice::<ConfigDoc>(&bytes).map_err(|e| {
        Failure::Config(format!("malformed config {}: {e}", path.display()))
    })?;
    Ok(LoadedConfig { doc, sha256 })
}

/// Unwraps a required section with a diagnostic naming it.
pub fn require<T>(section: Option<T>, name: &str) -> Result<T, Failure> {
    section.ok_or_else(|| {
        Failure::Config(format!("config is missing the required `{name}` section"))
    })
}

/// Unwraps a required field inside the sweep section.
pub fn require_field<T>(field: Option<T>, name: &str) -> Result<T, Failure> {
    field.ok_or_else(|| {
        Failure::Config(format!("sweep section is missing the required `{name}` field"))
    })
}

/// Periodic spatial lattice.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Box length in units of π.
    pub box_pi: f64,
    /// Number of collocation points (= retained Fourier modes).
    pub points: usize,
}

impl GridSection {
    pub fn box_length(&self) -> f64 {
        self.box_pi * std::f64::consts::PI
    }
}

/// Initial datum for the flow and single-field subcommands.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSection {
    /// `amplitude · exp(−((x − center)/width)²)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `amplitude · e^{ikx}` with `k = mode` on the frequency lattice.
    PlaneWave { amplitude: f64, mode: i64 },
    /// The zero field.
    Zero,
}

impl DataSection {
    pub fn to_initial(self) -> InitialData {
        match self {
            DataSection::Gaussian {
                amplitude,
                width,
                center,
            } => InitialData::Gaussian {
                amplitude,
                width,
                center,
            },
            DataSection::PlaneWave { amplitude, mode } => {
                InitialData::PlaneWave { amplitude, mode }
            }
            DataSection::Zero => InitialData::Zero,
        }
    }
}

/// Time-stepping parameters for the flow subcommands.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub dt: f64,
    pub horizon: f64,
    /// Record every k-th step (1 = every step).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Zero-padded products in the nonlinearity.
    #[serde(default = "default_true")]
    pub dealias: bool,
    /// Equation couplings; omitted = the integrable point.
    #[serde(default)]
    pub coefficients: Option<CoefficientsSection>,
}

/// Couplings of the linear symbol and the six-term nonlinearity. All eight
/// are required when the section is present: overriding the flow means
/// stating the whole equation.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub laplacian: f64,
    pub biharmonic: f64,
    pub cubic: f64,
    pub curvature_density: f64,
    pub curvature_phase: f64,
    pub slope_square: f64,
    pub slope_density: f64,
    pub quintic: f64,
}

impl From<CoefficientsSection> for Coefficients {
    fn from(c: CoefficientsSection) -> Self {
        Coefficients {
            laplacian: c.laplacian,
            biharmonic: c.biharmonic,
            cubic: c.cubic,
            curvature_density: c.curvature_density,
            curvature_phase: c.curvature_phase,
            slope_square: c.slope_square,
            slope_density: c.slope_density,
            quintic: c.quintic,
        }
    }
}

/// κ-lattice controls for `alpha` and for conservation tracking in
/// `simulate` / `conservation-report`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterminantSection {
    /// Base spectral parameter; omitted = automatic doubling search.
    #[serde(default)]
    pub kappa0: Option<f64>,
    /// Lattice half-width: κ_n = κ0 + i·n/2 for n ∈ [−range, range].
    #[serde(default = "default_range")]
    pub range: i64,
    /// Smallness margin for the automatic search; omitted = 1/(8q).
    #[serde(default)]
    pub delta: Option<f64>,
    /// Series truncation order for the dual-evaluation column.
    #[serde(default = "default_series_terms")]
    pub series_terms: usize,
    /// Sobolev exponent for the residual weights.
    #[serde(default = "default_s")]
    pub s: f64,
    /// Modulation exponent for the residual weights.
    #[serde(default = "default_q")]
    pub q: f64,
}

/// Norm parameters for the `norms` subcommand.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSection {
    pub s: f64,
    pub q: f64,
    pub kappa0: f64,
}

/// A Lebesgue exponent: a JSON number, or the string `"inf"`.
#[derive(Debug, Clone, Copy)]
pub struct Exponent(pub f64);

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = Exponent;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Exponent, E> {
                Ok(Exponent(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Exponent, E> {
                match v {
                    "inf" | "Inf" | "infinity" | "Infinity" => Ok(Exponent(f64::INFINITY)),
                    _ => Err(E::custom(format!(
                        "unrecognized exponent {v:?} (use a number or \"inf\")"
                    ))),
                }
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// Ensemble-sweep controls shared by the three sweep subcommands. Each
/// subcommand requires its own subset of fields and ignores none: an unused
/// field is legal to leave in place while switching subcommands on the same
/// config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `"biharmonic"` or `"strichartz"` (sweep-strichartz only).
    #[serde(default)]
    pub family: Option<FamilyName>,
    #[serde(default)]
    pub p: Option<Exponent>,
    #[serde(default)]
    pub q: Option<Exponent>,
    /// Requested time horizon for the space-time norms.
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Dyadic levels: frequency bands for sweep-strichartz, high bands for
    /// separated sweep-bilinear.
    #[serde(default)]
    pub levels: Option<Vec<u32>>,
    #[serde(default)]
    pub ensemble_size: Option<usize>,
    /// `"separated"` or `"comparable"` (sweep-bilinear only).
    #[serde(default)]
    pub mode: Option<ModeName>,
    /// Dyadic shell holding both comparable bands.
    #[serde(default)]
    pub shell_level: Option<u32>,
    /// Bandwidth of each comparable band.
    #[serde(default)]
    pub width: Option<f64>,
    /// Separations λ swept in comparable mode.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// Frequency intervals (sweep-l4 only).
    #[serde(default)]
    pub intervals: Option<Vec<IntervalSection>>,
    /// ℓ^q window exponent of the reference functional (sweep-l4 only).
    #[serde(default)]
    pub window_exponent: Option<Exponent>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Biharmonic,
    Strichartz,
}

impl From<FamilyName> for AdmissibleFamily {
    fn from(name: FamilyName) -> Self {
        match name {
            FamilyName::Biharmonic => AdmissibleFamily::Biharmonic,
            FamilyName::Strichartz => AdmissibleFamily::Strichartz,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Separated,
    Comparable,
}

/// One frequency interval `[offset, offset + length)`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSection {
    pub offset: f64,
    pub length: f64,
}

/// Artifact naming.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// File-name prefix inside the output directory.
    #[serde(default)]
    pub prefix: Option<String>,
}

fn default_record_every() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_range() -> i64 {
    8
}

fn default_series_terms() -> usize {
    12
}

fn default_s() -> f64 {
    0.5
}

fn default_q() -> f64 {
    4.0
}
