//! Request and response bodies.

use serde::{Deserialize, Serialize};

use gainpdf::density::KernelKind;
use gainpdf::marginal::LandscapeGrid;
use gainpdf::measures::RiskSpec;
use gainpdf::synth::AssetProfile;
use gainpdf::workflow::{BoostConfig, GainKind, IsoLine, MatchOutcome, MatchReport, PdfConfig, PortfolioComparison, ProblemConfig};
use gainpdf::{ConstraintSet, ErrorClass, GainPdf, ScenarioSet, SolverOptions, TargetSpec};

use crate::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub class: String,
}

impl ErrorBody {
    pub fn from_error(e: &gainpdf::Error) -> Self {
        let class = match e.class() {
            ErrorClass::Io => "io",
            ErrorClass::Validation => "validation",
            ErrorClass::Infeasible => "infeasible",
            ErrorClass::Numerical => "numerical",
        };
        ErrorBody {
            error: e.to_string(),
            class: class.into(),
        }
    }
}

/// Either explicit data (`scenarios` or `scenarios_csv`, plus
/// `constraints`) or a `synth` request.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub scenarios: Option<ScenarioSet<f64>>,
    pub scenarios_csv: Option<String>,
    pub constraints: Option<ConstraintSet<f64>>,
    pub synth: Option<SynthRequest>,
    /// Overrides `config.budget`.
    pub budget: Option<f64>,
    pub config: Option<ProblemConfig>,
    pub pdf: Option<PdfConfig>,
    /// Solver options of the matching stage.
    pub solver: Option<SolverOptions>,
    /// Drop every cap at load time.
    pub uncap: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthRequest {
    pub assets: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub profiles: Option<Vec<AssetProfile>>,
}

impl Default for SynthRequest {
    fn default() -> Self {
        SynthRequest {
            assets: gainpdf::synth::DEFAULT_ASSETS,
            scenarios: gainpdf::synth::DEFAULT_SCENARIOS,
            seed: gainpdf::synth::DEFAULT_SEED,
            profiles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub assets: Vec<String>,
    pub n_scenarios: usize,
    pub config: ProblemConfig,
    pub pdf: PdfConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierRequest {
    pub a_values: Vec<f64>,
    #[serde(default)]
    pub risk: Option<RiskSpec>,
    #[serde(default)]
    pub gain: Option<GainKind>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdfQuery {
    pub a: Option<f64>,
    pub kernel: Option<KernelKind>,
    pub bandwidth: Option<f64>,
}

/// A target density, or the boost of the start density when `target` is
/// absent.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchRequest {
    pub target: Option<TargetSpec<f64>>,
    pub boost: Option<BoostConfig>,
    /// Risk aversion of the conventional start and of the reported `F_a`.
    pub init_a: f64,
    /// Explicit start weights instead of the conventional optimum.
    pub init_portfolio: Option<Vec<f64>>,
    pub pdf: Option<PdfConfig>,
    pub kernel: Option<KernelKind>,
    pub bandwidth: Option<f64>,
    pub solver: Option<SolverOptions>,
    /// Match without caps; the start is still the capped optimum.
    pub uncap: bool,
}

impl Default for MatchRequest {
    fn default() -> Self {
        MatchRequest {
            target: None,
            boost: None,
            init_a: gainpdf::workflow::DEFAULT_A,
            init_portfolio: None,
            pdf: None,
            kernel: None,
            bandwidth: None,
            solver: None,
            uncap: false,
        }
    }
}

impl MatchRequest {
    pub fn check(&self) -> Result<(), ApiError> {
        if self.target.is_some() && self.boost.is_some() {
            return Err(ApiError::bad_request("give either target or boost, not both"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPayload {
    pub portfolio: PortfolioComparison,
    pub report: MatchReport,
    pub target: TargetSpec<f64>,
    pub original_pdf: GainPdf<f64>,
    pub matched_pdf: GainPdf<f64>,
    /// Same text as the command line `pdfs.csv`.
    pub pdfs_csv: String,
}

impl MatchPayload {
    pub fn from_outcome(out: &MatchOutcome) -> gainpdf::Result<Self> {
        Ok(MatchPayload {
            portfolio: out.portfolio_artifact(),
            report: out.report_artifact(),
            target: out.target.clone(),
            original_pdf: out.result.initial_pdf.clone(),
            matched_pdf: out.result.pdf.clone(),
            pdfs_csv: out.pdfs_csv()?,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeRequest {
    pub b_values: Vec<f64>,
    pub a_values: Vec<f64>,
    /// Iso-line level; defaults to the baseline objective at `(B, iso_a)`.
    #[serde(default)]
    pub iso_level: Option<f64>,
    #[serde(default = "default_iso_a")]
    pub iso_a: f64,
}

fn default_iso_a() -> f64 {
    gainpdf::workflow::DEFAULT_A
}

impl LandscapeRequest {
    pub fn check(&self) -> Result<(), ApiError> {
        if self.b_values.is_empty() || self.a_values.is_empty() {
            return Err(ApiError::bad_request("landscape needs b_values and a_values"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapePayload {
    pub grid: LandscapeGrid<f64>,
    pub iso: IsoLine,
    /// Same text as the command line `landscape.csv`.
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: String,
}
