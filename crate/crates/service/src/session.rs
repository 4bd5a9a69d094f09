use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use gainpdf::conventional::ConventionalSolution;
use gainpdf::io::parse_scenarios_csv;
use gainpdf::marginal::MarginalCostResult;
use gainpdf::synth::{default_profiles, generate};
use gainpdf::workflow::{
    landscape_iso, portfolio_pdf, run_frontier, run_landscape, run_marginal, run_match, solve_point, BoostConfig,
    Dataset, MarginalRequest, MatchOutcome, MatchTarget, PdfConfig, ProblemConfig,
};
use gainpdf::{Frontier, GainPdf, Portfolio, SolverOptions};

use crate::api::{CreateSession, FrontierRequest, LandscapePayload, LandscapeRequest, MatchRequest, PdfQuery, SessionInfo};
use crate::ApiError;

/// Loaded data and configuration; immutable apart from the solve cache.
pub struct Session {
    pub id: String,
    pub data: Dataset,
    pub config: ProblemConfig,
    pub pdf: PdfConfig,
    pub solver: SolverOptions,
    /// Conventional optima keyed by `(a, seed)`.
    optima: Mutex<HashMap<(u64, u64), Arc<ConventionalSolution<f64>>>>,
}

impl Session {
    pub fn from_request(req: CreateSession) -> Result<Self, ApiError> {
        let (scenarios, constraints) = match (req.synth, req.scenarios, req.scenarios_csv) {
            (Some(s), None, None) => {
                if req.constraints.is_some() {
                    return Err(ApiError::bad_request("synth sessions generate their own constraints"));
                }
                let profiles = s.profiles.unwrap_or_else(|| default_profiles(s.assets));
                generate::<f64>(&profiles, s.scenarios, s.seed)?
            }
            (None, y, csv) => {
                let y = match (y, csv) {
                    (Some(y), None) => y,
                    (None, Some(text)) => parse_scenarios_csv(&text)?,
                    _ => return Err(ApiError::bad_request("give exactly one of scenarios and scenarios_csv")),
                };
                let cs = req
                    .constraints
                    .ok_or_else(|| ApiError::bad_request("constraints are required with explicit scenarios"))?;
                (y, cs)
            }
            _ => return Err(ApiError::bad_request("give either synth or explicit scenarios")),
        };
        let mut data = Dataset::new(scenarios, constraints)?;
        if req.uncap {
            data = data.uncapped();
        }
        let mut config = req.config.unwrap_or_default();
        if let Some(b) = req.budget {
            config.budget = b;
        }
        config.budget()?;
        config.objective(data.scenarios.schema(), gainpdf::workflow::DEFAULT_A)?;
        let solver = req.solver.unwrap_or_default();
        solver.validate()?;
        Ok(Session {
            id: String::new(),
            data,
            config,
            pdf: req.pdf.unwrap_or_default(),
            solver,
            optima: Mutex::new(HashMap::new()),
        })
    }

    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            session_id: self.id.clone(),
            assets: self.data.scenarios.assets().to_vec(),
            n_scenarios: self.data.scenarios.n_scenarios(),
            config: self.config.clone(),
            pdf: self.pdf,
        }
    }

    /// Conventional optimum at `a`, solved on first use.
    pub fn optimum(&self, a: f64) -> gainpdf::Result<Arc<ConventionalSolution<f64>>> {
        let key = (a.to_bits(), self.config.conventional.seed);
        if let Some(s) = self.optima.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let sol = Arc::new(solve_point(&self.config, &self.data, a)?);
        self.optima.lock().expect("cache lock").insert(key, sol.clone());
        Ok(sol)
    }

    pub fn frontier(&self, req: &FrontierRequest) -> gainpdf::Result<Frontier<f64>> {
        let mut cfg = self.config.clone();
        if let Some(r) = req.risk {
            cfg.risk = r;
        }
        if let Some(g) = req.gain {
            cfg.gain = g;
        }
        run_frontier(&cfg, &self.data, &req.a_values)
    }

    pub fn pdf(&self, q: &PdfQuery) -> gainpdf::Result<GainPdf<f64>> {
        let a = q.a.unwrap_or(gainpdf::workflow::DEFAULT_A);
        let mut pdf = self.pdf;
        if let Some(k) = q.kernel {
            pdf.kernel = k;
        }
        if q.bandwidth.is_some() {
            pdf.bandwidth = q.bandwidth;
        }
        let sol = self.optimum(a)?;
        portfolio_pdf(&self.config, &pdf, &self.data, &sol.portfolio)
    }

    pub fn run_match(&self, req: &MatchRequest) -> gainpdf::Result<MatchOutcome> {
        let mut pdf = req.pdf.unwrap_or(self.pdf);
        if let Some(k) = req.kernel {
            pdf.kernel = k;
        }
        if req.bandwidth.is_some() {
            pdf.bandwidth = req.bandwidth;
        }
        let initial = match &req.init_portfolio {
            Some(w) => Portfolio::new(w.clone())?,
            None => self.optimum(req.init_a)?.portfolio.clone(),
        };
        let uncapped;
        let data = if req.uncap {
            uncapped = self.data.uncapped();
            &uncapped
        } else {
            &self.data
        };
        let solver = req.solver.unwrap_or(self.solver);
        let default_boost = BoostConfig::default();
        let target = match (&req.target, &req.boost) {
            (Some(t), _) => MatchTarget::Spec(t),
            (None, Some(b)) => MatchTarget::Boost(b),
            (None, None) => MatchTarget::Boost(&default_boost),
        };
        run_match(&self.config, &pdf, &solver, data, req.init_a, &initial, target)
    }

    pub fn marginal(&self, req: &MarginalRequest) -> gainpdf::Result<MarginalCostResult<f64>> {
        run_marginal(&self.config, &self.data, req)
    }

    pub fn landscape(&self, req: &LandscapeRequest) -> gainpdf::Result<LandscapePayload> {
        let grid = run_landscape(&self.config, &self.data, &req.b_values, &req.a_values)?;
        let iso = landscape_iso(&self.config, &self.data, &grid, req.iso_level, req.iso_a)?;
        Ok(LandscapePayload {
            csv: grid.to_csv(),
            grid,
            iso,
        })
    }
}

#[derive(Default)]
pub(crate) struct Sessions {
    next: AtomicU64,
    table: RwLock<HashMap<String, Arc<Session>>>,
}

impl Sessions {
    pub fn insert(&self, mut s: Session) -> SessionInfo {
        let n = self.next.fetch_add(1, Ordering::Relaxed) + 1;
        s.id = format!("s{n}");
        let info = s.info();
        self.table
            .write()
            .expect("session lock")
            .insert(s.id.clone(), Arc::new(s));
        info
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.table
            .read()
            .expect("session lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }
}
