//! Sweep driver over screened group-synchronization instances: relaxations,
//! roundings, approximation ratios and a tidy CSV report.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::{
    evolve, gram_matrix, initial_product_state, max_eigenpair_stats, AnnealSchedule, ExpectationReport,
    LANCZOS_MAX_ITER, LANCZOS_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{build_h_with_budget, regularize, LncgHamiltonian, DEFAULT_QUBIT_BUDGET, DEFAULT_ZETA};
use crate::instance::{gen_group_sync, objective, ProblemInstance};
use crate::orthlin::Group;
use crate::rng::{self, RNG_ALGORITHM};
use crate::rounding::{local_ascent, round_cr, round_gram, round_gw, round_vr, RoundedSolution, DEFAULT_TRIALS};
use crate::sdp::{factorize, solve_basic, solve_conv_so, SdpSolution, SolverConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How the CR rounding orients Gram blocks; echoed into every report.
pub const CR_ORIENTATION: &str = "R_0 = I, R_v = proj(M[v,0])";

pub const CSV_COLUMNS: &str = "m,n,group,sigma,seed,method,ratio,relaxed_energy_norm,optimum,iterations,wall_ms";

/// Sweeps of local ascent used to polish the optimum denominator.
const POLISH_SWEEPS: usize = 200;

/// Solver and rounder pairing evaluated on each instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// CR rounding of the top eigenvector of the relaxed Hamiltonian.
    CrEig,
    /// VR rounding of the top eigenvector of the regularized Hamiltonian.
    VrEig,
    /// Best-of-trials Gaussian rounding of the basic SDP.
    GwSdp,
    /// CR rounding after annealing from the GW product state.
    CrAnneal,
    /// VR rounding after annealing into the regularized Hamiltonian.
    VrAnneal,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::CrEig, Method::VrEig, Method::GwSdp, Method::CrAnneal, Method::VrAnneal];

    pub fn name(self) -> &'static str {
        match self {
            Method::CrEig => "cr-eig",
            Method::VrEig => "vr-eig",
            Method::GwSdp => "gw-sdp",
            Method::CrAnneal => "cr-anneal",
            Method::VrAnneal => "vr-anneal",
        }
    }

    fn anneals(self) -> bool {
        matches!(self, Method::CrAnneal | Method::VrAnneal)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m_list: Vec<usize>,
    pub n: usize,
    pub degree: usize,
    pub group: Group,
    /// Noise levels as log10 values.
    pub log10_sigma: Vec<f64>,
    /// Explicit noise levels; replaces `log10_sigma` when set (allows 0).
    pub sigma: Option<Vec<f64>>,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub anneal_times: Vec<f64>,
    pub zeta: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_screen_retries: usize,
    pub solver: SolverConfig,
    pub qubit_budget: usize,
    /// Fill the `wall_ms` column. Off by default so reports are reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m_list: vec![4, 6],
            n: 3,
            degree: 3,
            group: Group::SO,
            log10_sigma: vec![-1.5, -1.0, -0.5],
            sigma: None,
            repetitions: 50,
            methods: vec![Method::CrEig, Method::VrEig, Method::GwSdp],
            anneal_times: vec![1.0],
            zeta: DEFAULT_ZETA,
            trials: DEFAULT_TRIALS,
            seed: 0,
            max_screen_retries: 20,
            solver: SolverConfig::default(),
            qubit_budget: DEFAULT_QUBIT_BUDGET,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn sigmas(&self) -> Vec<f64> {
        match &self.sigma {
            Some(s) => s.clone(),
            None => self.log10_sigma.iter().map(|e| 10f64.powf(*e)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_list.is_empty() || self.methods.is_empty() || self.sigmas().is_empty() {
            return invalid("m_list, methods and the sigma grid must be nonempty");
        }
        if self.n == 0 || self.degree == 0 || self.repetitions == 0 || self.trials == 0 {
            return invalid("n, degree, repetitions and trials must be positive");
        }
        if let Some(&m) = self.m_list.iter().find(|&&m| m <= self.degree || m * self.degree % 2 == 1) {
            return invalid(format!("no {}-regular graph on {m} vertices", self.degree));
        }
        if self.sigmas().iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return invalid("sigma values must be finite and nonnegative");
        }
        if !(self.zeta > 0.0) {
            return invalid("zeta must be positive");
        }
        if self.methods.iter().any(|m| m.anneals())
            && (self.anneal_times.is_empty() || self.anneal_times.iter().any(|t| !(*t > 0.0 && t.is_finite())))
        {
            return invalid("anneal times must be positive");
        }
        if !(self.solver.penalty > 0.0 && self.solver.tol_primal > 0.0 && self.solver.tol_dual > 0.0)
            || self.solver.max_iter == 0
        {
            return invalid("solver parameters must be positive");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub m: usize,
    pub n: usize,
    pub group: Group,
    pub sigma: f64,
    pub seed: u64,
    pub method: String,
    pub ratio: f64,
    pub relaxed_energy_norm: f64,
    pub optimum: f64,
    pub iterations: usize,
    pub wall_ms: Option<f64>,
}

impl Row {
    pub fn csv_line(&self) -> String {
        let wall = self.wall_ms.map(|w| format!("{w:.3}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{:.12},{:.12},{:.12},{},{}",
            self.m,
            self.n,
            self.group,
            self.sigma,
            self.seed,
            self.method,
            self.ratio,
            self.relaxed_energy_norm,
            self.optimum,
            self.iterations,
            wall
        )
    }
}

/// Outcome of screening one `(m, sigma, repetition)` slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenRecord {
    pub m: usize,
    pub sigma: f64,
    pub repetition: usize,
    /// Seed of the accepted instance; `None` when screening gave up.
    pub seed: Option<u64>,
    pub rejections: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub rows: Vec<Row>,
    pub screens: Vec<ScreenRecord>,
}

impl ExperimentReport {
    pub fn skipped(&self) -> usize {
        self.screens.iter().filter(|s| s.seed.is_none()).count()
    }
}

/// Seed of attempt `attempt` for a sweep slot.
pub fn instance_seed(master: u64, m: usize, sigma_index: usize, repetition: usize, attempt: usize) -> u64 {
    let key = ((m as u64 & 0xffff) << 48)
        | ((sigma_index as u64 & 0xffff) << 32)
        | ((repetition as u64 & 0xffff) << 16)
        | (attempt as u64 & 0xffff);
    rng::derive_seed(master, key)
}

/// The relaxation used for screening and for the optimum denominator.
fn screening_sdp(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SdpSolution> {
    match inst.group {
        Group::SO => solve_conv_so(inst, cfg),
        Group::O => solve_basic(inst, cfg),
    }
}

/// Draws instances until the screening relaxation certifies exactness (rank `n`).
/// Non-convergent attempts count as rejections.
pub fn screen_instance(
    cfg: &ExperimentConfig,
    m: usize,
    sigma_index: usize,
    repetition: usize,
) -> Result<(Option<(ProblemInstance, SdpSolution)>, usize)> {
    let sigma = cfg.sigmas()[sigma_index];
    let mut rejections = 0;
    for attempt in 0..=cfg.max_screen_retries {
        let seed = instance_seed(cfg.seed, m, sigma_index, repetition, attempt);
        let inst = gen_group_sync(m, cfg.degree, cfg.n, sigma, cfg.group, seed)?;
        match screening_sdp(&inst, &cfg.solver) {
            Ok(sol) if sol.exact_certificate => return Ok((Some((inst, sol)), rejections)),
            Ok(_) | Err(Error::NonConvergence { .. }) => rejections += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((None, rejections))
}

/// Optimum denominator: CR rounding of the certified relaxation, polished by
/// block coordinate ascent.
pub fn optimum_from_sdp(inst: &ProblemInstance, sol: &SdpSolution) -> Result<(Vec<DMatrix<f64>>, f64)> {
    let rounded = round_gram(&sol.m_mat, inst)?;
    let rs = local_ascent(inst, &rounded.matrices, POLISH_SWEEPS)?;
    let f = objective(inst, &rs)?;
    if !(f > 0.0) {
        return Err(Error::Consistency(format!("nonpositive optimum {f}")));
    }
    Ok((rs, f))
}

struct Outcome {
    label: String,
    rounded: f64,
    relaxed: f64,
    iterations: usize,
}

/// Runs every configured method on one certified instance.
pub fn run_instance(cfg: &ExperimentConfig, inst: &ProblemInstance, certified: &SdpSolution) -> Result<Vec<Row>> {
    let (_, opt) = optimum_from_sdp(inst, certified)?;
    let needs_h = cfg.methods.iter().any(|m| *m != Method::GwSdp);
    let needs_gw = cfg.methods.iter().any(|m| *m == Method::GwSdp || m.anneals());
    let h = if needs_h {
        Some(build_h_with_budget(inst, cfg.qubit_budget)?)
    } else {
        None
    };
    let mut h_reg: Option<LncgHamiltonian> = None;
    let mut gw: Option<(SdpSolution, RoundedSolution)> = None;
    if needs_gw {
        let basic = solve_basic(inst, &cfg.solver)?;
        let factors = factorize(&basic.m_mat, inst.n)?;
        let rounded = round_gw(&factors, inst, cfg.trials, rng::derive_seed(inst.seed, 1))?;
        gw = Some((basic, rounded));
    }

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let times: Vec<Option<f64>> = if method.anneals() {
            cfg.anneal_times.iter().map(|t| Some(*t)).collect()
        } else {
            vec![None]
        };
        for t in times {
            let start = Instant::now();
            let regularized = matches!(method, Method::VrEig | Method::VrAnneal);
            if regularized && h_reg.is_none() {
                h_reg = Some(regularize(h.as_ref().expect("built"), cfg.zeta)?);
            }
            let target = if regularized { h_reg.as_ref() } else { h.as_ref() };
            let out = match method {
                Method::GwSdp => {
                    let (basic, rounded) = gw.as_ref().expect("solved");
                    Outcome {
                        label: method.name().to_string(),
                        rounded: rounded.objective_value,
                        relaxed: basic.objective,
                        iterations: basic.iterations,
                    }
                }
                Method::CrEig | Method::VrEig => {
                    let eig = max_eigenpair_stats(&target.expect("built").operator, LANCZOS_TOL, LANCZOS_MAX_ITER)?;
                    let report = gram_matrix(&eig.state, inst)?;
                    outcome_from_report(method.name().to_string(), method, &report, inst, eig.iterations)?
                }
                Method::CrAnneal | Method::VrAnneal => {
                    let total = t.expect("anneal time");
                    let (_, rounded) = gw.as_ref().expect("solved");
                    let (psi0, h_i) = initial_product_state(inst, &rounded.matrices)?;
                    let h_f = &target.expect("built").operator;
                    let schedule = AnnealSchedule::auto(total, &h_i, h_f);
                    let psi = evolve(&h_i, h_f, &schedule, &psi0)?;
                    let report = gram_matrix(&psi, inst)?;
                    outcome_from_report(format!("{}@T={total}", method.name()), method, &report, inst, schedule.steps)?
                }
            };
            let wall_ms = cfg.record_wall_time.then(|| start.elapsed().as_secs_f64() * 1e3);
            rows.push(Row {
                m: inst.m(),
                n: inst.n,
                group: inst.group,
                sigma: inst.noise_sigma,
                seed: inst.seed,
                method: out.label,
                ratio: out.rounded / opt,
                relaxed_energy_norm: out.relaxed / opt,
                optimum: opt,
                iterations: out.iterations,
                wall_ms,
            });
        }
    }
    Ok(rows)
}

fn outcome_from_report(
    label: String,
    method: Method,
    report: &ExpectationReport,
    inst: &ProblemInstance,
    iterations: usize,
) -> Result<Outcome> {
    let rounded = match method {
        Method::CrEig | Method::CrAnneal => round_cr(report, inst)?,
        _ => round_vr(report, inst)?,
    };
    Ok(Outcome {
        label,
        rounded: rounded.objective_value,
        relaxed: report.energy,
        iterations,
    })
}

/// Full sweep in `(m, sigma, repetition)` order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sigmas = cfg.sigmas();
    for &m in &cfg.m_list {
        let layout = crate::hamiltonian::Layout::new(m, cfg.n, cfg.group)?;
        if cfg.methods.iter().any(|x| *x != Method::GwSdp) {
            layout.check_budget(cfg.qubit_budget)?;
        }
    }
    let mut report = ExperimentReport::default();
    for &m in &cfg.m_list {
        for (si, &sigma) in sigmas.iter().enumerate() {
            for rep in 0..cfg.repetitions {
                let (found, rejections) = screen_instance(cfg, m, si, rep)?;
                report.screens.push(ScreenRecord {
                    m,
                    sigma,
                    repetition: rep,
                    seed: found.as_ref().map(|(inst, _)| inst.seed),
                    rejections,
                });
                if let Some((inst, sol)) = found {
                    report.rows.extend(run_instance(cfg, &inst, &sol)?);
                }
            }
        }
    }
    Ok(report)
}

/// Writes the report: `#` metadata lines (one of them the timestamp), the column
/// header, then one line per row.
pub fn write_csv<W: Write>(report: &ExperimentReport, cfg: &ExperimentConfig, timestamp: u64, mut w: W) -> Result<()> {
    writeln!(w, "# lncg experiment {VERSION}")?;
    writeln!(w, "# timestamp: {timestamp}")?;
    writeln!(w, "# rng: {RNG_ALGORITHM}")?;
    writeln!(w, "# cr_orientation: {CR_ORIENTATION}")?;
    writeln!(w, "# config: {}", cfg.to_json()?)?;
    for s in &report.screens {
        let seed = s.seed.map_or_else(|| "skipped".to_string(), |x| x.to_string());
        writeln!(
            w,
            "# screen: m={} sigma={} repetition={} seed={} rejections={}",
            s.m, s.sigma, s.repetition, seed, s.rejections
        )?;
    }
    writeln!(w, "{CSV_COLUMNS}")?;
    for row in &report.rows {
        writeln!(w, "{}", row.csv_line())?;
    }
    Ok(())
}

/// The report with its timestamp line removed.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# timestamp:"))
        .flat_map(|l| [l, "\n"])
        .collect()
}
