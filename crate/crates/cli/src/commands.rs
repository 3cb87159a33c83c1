//! Subcommand implementations.

use std::path::{Path, PathBuf};

use imsynth::exo::{validate_exosystem, DegreePolicy, Frequency, HarmonicSet};
use imsynth::plant::{verify_internal_model_structure, Provenance, STRUCTURE_TOL};
use imsynth::scalar::Cplx;
use imsynth::simkit::{
    asymptotic_relative_error, baseline_method, figure1_csv, fit_envelope, logistic_exosystem, run_figure1, run_method, run_rate_sweep,
    sweep_csv, theta_grid, trace_csv, triple_momentum_rate, Baseline, Figure1Config, SweepConfig, TimeVaryingObjective,
};
use imsynth::synth::{bisect_optimal_rate, certify_rate, RateQuery};
use imsynth::{Algorithm, Error};
use nalgebra::DVector;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{matrix, MethodChoice, ObjectiveChoice, RunConfig};
use crate::exit::{CliError, INFEASIBLE};
use crate::Command;

const DEFAULT_SIM_STEPS: usize = 400;
const DEFAULT_SWEEP_POINTS: usize = 25;
const ENVELOPE_FIT_WINDOW: usize = 20;
const ENVELOPE_FLOOR: f64 = 1e-12;

type CliResult<T> = Result<T, CliError>;

/// What every output carries so a file can be traced back to its inputs.
struct Header {
    command: &'static str,
    config_sha256: String,
    harmonic_set: String,
}

#[derive(Serialize)]
struct Canonical<'a> {
    command: &'a str,
    config: &'a RunConfig,
}

impl Header {
    fn new(command: Command, cfg: &RunConfig, harmonic_set: impl Into<String>) -> Self {
        // the output location does not change the results
        let mut c = cfg.clone();
        c.out = None;
        let json = serde_json::to_string(&Canonical { command: command.name(), config: &c }).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self { command: command.name(), config_sha256, harmonic_set: harmonic_set.into() }
    }

    fn lines(&self) -> String {
        format!(
            "# tool: imsynth {}\n# command: {}\n# config_sha256: {}\n# harmonic_set: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_sha256,
            self.harmonic_set
        )
    }

    fn provenance(&self, source: &str) -> Provenance {
        let mut p = Provenance::new(source);
        p.tool_version = env!("CARGO_PKG_VERSION").to_string();
        p.config_hash = Some(self.config_sha256.clone());
        p.harmonic_set = self.harmonic_set.clone();
        p.extra.insert("command".into(), self.command.into());
        p
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write_output(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn fail_if(violations: Vec<String>) -> CliResult<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(violations))
    }
}

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> CliResult<()> {
    match cmd {
        Command::Synth => synth(cfg),
        Command::Analyze => analyze(cfg),
        Command::Simulate => simulate(cfg),
        Command::Sweep => sweep(cfg),
        Command::Verify => verify(cfg),
        Command::Figure1 => figure1(cfg),
    }
}

fn sector(cfg: &RunConfig, violations: &mut Vec<String>) -> (f64, f64) {
    if cfg.mu.is_none() {
        violations.push("missing --mu".into());
    }
    if cfg.l.is_none() {
        violations.push("missing --L".into());
    }
    (cfg.mu.unwrap_or(f64::NAN), cfg.l.unwrap_or(f64::NAN))
}

fn synth(cfg: &RunConfig) -> CliResult<()> {
    let mut v = Vec::new();
    let (mu, l) = sector(cfg, &mut v);
    if cfg.mu.is_some() && cfg.l.is_some() {
        v.extend(cfg.common_violations(mu, l));
    } else {
        v.extend(cfg.common_violations(1.0, 2.0));
    }
    let h = match cfg.harmonic_set(DegreePolicy::closure()) {
        Ok(Some(h)) => Some(h),
        Ok(None) => {
            v.push("no harmonic set: give --freq or --S".into());
            None
        }
        Err(e) => {
            v.push(e);
            None
        }
    };
    fail_if(v)?;
    let h = h.expect("checked above");
    let ell = cfg.ell.unwrap_or(1);
    let bracket = (cfg.rho_lo.unwrap_or(0.05), cfg.rho_hi.unwrap_or(0.9999));
    let tol = cfg.tol.unwrap_or(1e-3);
    let q = RateQuery::new(mu, l, h.clone(), ell).with_bracket(bracket.0, bracket.1).with_tol(tol);
    fail_if(q.violations())?;

    let header = Header::new(Command::Synth, cfg, h.describe());
    let mut result = bisect_optimal_rate(&q)?;
    match certify_rate(&result.g, mu, l, ell, bracket, tol, Some(&h.values())) {
        Ok(c) => result.diagnostics.recertified_rate = Some(c.rho),
        Err(e) => result.diagnostics.reconstruction.push(format!("re-certification of the exported algorithm failed: {e}")),
    }
    let alg = result.g.clone().with_provenance(header.provenance("synth"));
    let dir = out_dir(cfg);
    let json = alg.to_json()? + "\n";
    let alg_path = write_output(&dir, "algorithm.json", &json)?;
    let mut report = header.lines();
    report.push_str(&result.to_string());
    report.push('\n');
    if let Some(r) = result.diagnostics.recertified_rate {
        report.push_str(&format!("recertified rate = {r:.6}\n"));
    }
    report.push_str(&format!("triple momentum rate = {:.6}\n", triple_momentum_rate(mu, l)));
    let report_path = write_output(&dir, "report.txt", &report)?;
    log::info!("synthesis timings:\n{result:#}");
    println!("rho_star = {:.6}", result.rho_star);
    println!("algorithm order = {}", alg.order());
    println!("wrote {} and {}", alg_path.display(), report_path.display());
    Ok(())
}

fn load_algorithm(cfg: &RunConfig) -> CliResult<Algorithm> {
    let path = cfg.algorithm.as_ref().ok_or_else(|| CliError::validation(vec!["missing --algorithm".into()]))?;
    if !path.exists() {
        return Err(CliError::io(format!("{}: no such file", path.display())));
    }
    Ok(Algorithm::load(path)?)
}

/// Harmonics from the flags, else the ones stored with the algorithm.
fn target_harmonics(cfg: &RunConfig, alg: &Algorithm) -> CliResult<Option<(Vec<Cplx<f64>>, String)>> {
    match cfg.harmonic_set(DegreePolicy::closure()).map_err(|e| CliError::validation(vec![e]))? {
        Some(h) => Ok(Some((h.values(), h.describe()))),
        None if !alg.harmonics.is_empty() => {
            let desc = alg.harmonics.iter().map(|w| format!("{:.6}", w.arg())).collect::<Vec<_>>().join(", ");
            Ok(Some((alg.harmonics.clone(), format!("angles {{{desc}}} (from file)"))))
        }
        None => Ok(None),
    }
}

fn analyze(cfg: &RunConfig) -> CliResult<()> {
    let alg = load_algorithm(cfg)?;
    let mu = cfg.mu.unwrap_or(alg.mu);
    let l = cfg.l.unwrap_or(alg.l);
    fail_if(cfg.common_violations(mu, l))?;
    let harmonics = target_harmonics(cfg, &alg)?;
    let ell = cfg.ell.unwrap_or(1);
    let bracket = (cfg.rho_lo.unwrap_or(0.05), cfg.rho_hi.unwrap_or(0.9999));
    let tol = cfg.tol.unwrap_or(1e-3);
    let header = Header::new(Command::Analyze, cfg, harmonics.as_ref().map_or("none".into(), |h| h.1.clone()));
    let cert = certify_rate(&alg, mu, l, ell, bracket, tol, harmonics.as_ref().map(|h| h.0.as_slice()))?;
    print!("{}", header.lines());
    println!("certified rate = {:.6}", cert.rho);
    println!("margin = {:.3e}", cert.margin);
    println!("triple momentum rate = {:.6}", triple_momentum_rate(mu, l));
    Ok(())
}

fn verify(cfg: &RunConfig) -> CliResult<()> {
    let alg = load_algorithm(cfg)?;
    let (h, desc) = target_harmonics(cfg, &alg)?.ok_or_else(|| {
        CliError::validation(vec!["no harmonic set: give --freq or --S, or use an algorithm file that lists its harmonics".into()])
    })?;
    let header = Header::new(Command::Verify, cfg, desc);
    let report = verify_internal_model_structure(&alg.a, &alg.b, &alg.c, &h, STRUCTURE_TOL)?;
    print!("{}", header.lines());
    println!("{report}");
    if report.passed() {
        println!("structure: PASS");
        Ok(())
    } else {
        Err(CliError { code: INFEASIBLE, message: format!("structure check failed for {} harmonic(s)", report.failures().len()) })
    }
}

fn objective(cfg: &RunConfig, v: &mut Vec<String>) -> Option<TimeVaryingObjective<f64>> {
    let exo = match &cfg.s {
        Some(s) => matrix(s).map_err(|e| e.to_string()).and_then(|m| validate_exosystem(m).map_err(|e| e.to_string())),
        None if cfg.objective == Some(ObjectiveChoice::Quadratic) => Err("the quadratic objective needs --S".into()),
        None => validate_exosystem(logistic_exosystem()).map_err(|e| e.to_string()),
    };
    let exo = match exo {
        Ok(e) => e,
        Err(e) => {
            v.push(e);
            return None;
        }
    };
    let theta0 = match &cfg.theta0 {
        Some(t) => DVector::from_vec(t.clone()),
        None if cfg.s.is_none() => DVector::from_vec(vec![1.0, 1.0, 0.0]),
        None => DVector::from_element(exo.dim(), 1.0),
    };
    let built = match cfg.objective.unwrap_or(ObjectiveChoice::Logistic) {
        ObjectiveChoice::Logistic => TimeVaryingObjective::logistic(cfg.a.unwrap_or(1.0), cfg.b.unwrap_or(6.0), exo, theta0),
        ObjectiveChoice::Quadratic => match &cfg.q {
            None => Err(Error::Domain("the quadratic objective needs --Q".into())),
            Some(q) => matrix(q).map_err(Error::Parse).and_then(|q| TimeVaryingObjective::quadratic(q, exo, theta0)),
        },
    };
    built.map_err(|e| v.push(e.to_string())).ok()
}

fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let mut v = Vec::new();
    if cfg.algorithm.is_some() && cfg.method.is_some() {
        v.push("give either --algorithm or --method, not both".into());
    }
    if cfg.algorithm.is_none() && cfg.method.is_none() {
        v.push("missing --algorithm or --method".into());
    }
    if cfg.steps == Some(0) {
        v.push("steps must be positive".into());
    }
    let obj = objective(cfg, &mut v);
    fail_if(v)?;
    let obj = obj.expect("checked above");
    let (alg, source) = match cfg.method {
        Some(m) => {
            let b = match m {
                MethodChoice::GradientDescent => Baseline::GradientDescent,
                MethodChoice::TripleMomentum => Baseline::TripleMomentum,
            };
            let alg = baseline_method(b, obj.mu, obj.l)?;
            let rate = match b {
                Baseline::GradientDescent => (obj.l - obj.mu) / (obj.l + obj.mu),
                Baseline::TripleMomentum => triple_momentum_rate(obj.mu, obj.l),
            };
            (alg.with_rho(rate), b.name().to_string())
        }
        None => (load_algorithm(cfg)?, "algorithm".to_string()),
    };
    if obj.mu < alg.mu || obj.l > alg.l {
        log::warn!("objective sector [{}, {}] is outside the algorithm's design sector [{}, {}]", obj.mu, obj.l, alg.mu, alg.l);
    }
    let steps = cfg.steps.unwrap_or(DEFAULT_SIM_STEPS);
    let trace = run_method(&alg, &obj, steps, None)?;
    let rho = cfg.rho.or(alg.rho);
    let env = rho.map(|r| fit_envelope(&trace, r, ENVELOPE_FIT_WINDOW.min(steps), ENVELOPE_FLOOR));
    let harmonics = obj.exo.harmonics(DegreePolicy::closure()).map(|h| h.describe()).unwrap_or_else(|_| "not closed".into());
    let header = Header::new(Command::Simulate, cfg, harmonics);
    let mut csv = header.lines();
    csv.push_str(&format!("# method: {source}\n"));
    csv.push_str(&trace_csv(&trace, env.as_ref().map(|e| (e.c, e.rho)))?);
    let path = write_output(&out_dir(cfg), "trace.csv", &csv)?;
    let window = cfg.window.unwrap_or(100).min(steps);
    let last = trace.records.last().map_or(f64::NAN, |r| r.grad_norm);
    println!("final gradient norm = {last:.3e}");
    println!("asymptotic relative error = {:.3e}", asymptotic_relative_error(&trace, window)?);
    if let Some(e) = &env {
        println!("envelope rho = {:.6}, violations = {}", e.rho, e.violations.len());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(cfg: &RunConfig) -> CliResult<()> {
    let d = SweepConfig::default();
    let (mu, l) = (cfg.mu.unwrap_or(d.mu), cfg.l.unwrap_or(d.l));
    let mut v = cfg.common_violations(mu, l);
    let policy = cfg.policy(d.policy).map_err(|e| v.push(e)).unwrap_or(d.policy);
    let thetas: Vec<Frequency> = if cfg.freq.is_empty() {
        let n = cfg.points.unwrap_or(DEFAULT_SWEEP_POINTS);
        if n == 0 {
            v.push("points must be positive".into());
        }
        theta_grid(n)
    } else {
        cfg.frequencies().map_err(|e| v.push(e)).unwrap_or_default()
    };
    fail_if(v)?;
    let sc = SweepConfig {
        mu,
        l,
        ell: cfg.ell.unwrap_or(d.ell),
        policy,
        rho_lo: cfg.rho_lo.unwrap_or(d.rho_lo),
        rho_hi: cfg.rho_hi.unwrap_or(d.rho_hi),
        tol: cfg.tol.unwrap_or(d.tol),
        full: cfg.full.unwrap_or(false),
    };
    let points = run_rate_sweep(&sc, &thetas)?;
    let header = Header::new(Command::Sweep, cfg, format!("{{0, ±theta}} per row, policy {}", policy_name(policy)));
    let path = write_output(&out_dir(cfg), "sweep.csv", &(header.lines() + &sweep_csv(&points)?))?;
    let ok = points.iter().filter(|p| p.rho_star.is_some()).count();
    println!("{ok}/{} points solved", points.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn policy_name(p: DegreePolicy) -> String {
    match p {
        DegreePolicy::Closure { .. } => "closure".into(),
        DegreePolicy::MaxDegree(d) => format!("degree:{d}"),
    }
}

fn figure1(cfg: &RunConfig) -> CliResult<()> {
    let d = Figure1Config::default();
    let fc = Figure1Config {
        orders: cfg.orders.clone().unwrap_or(d.orders),
        seeds: cfg.seeds.unwrap_or(d.seeds),
        base_seed: cfg.seed.unwrap_or(d.base_seed),
        steps: cfg.steps.unwrap_or(d.steps),
        window: cfg.window.unwrap_or(d.window),
        ..d
    };
    let mut v = Vec::new();
    if fc.orders.is_empty() || fc.orders.contains(&0) {
        v.push("orders must be positive".into());
    }
    if fc.seeds == 0 {
        v.push("seeds must be positive".into());
    }
    if fc.window == 0 || fc.window > fc.steps {
        v.push(format!("need 0 < window <= steps, got window = {}, steps = {}", fc.window, fc.steps));
    }
    fail_if(v)?;
    let rows = run_figure1(&fc)?;
    let sets: Vec<String> = fc
        .orders
        .iter()
        .map(|&p| {
            let h: Option<HarmonicSet<f64>> =
                validate_exosystem(imsynth::simkit::figure1_exosystem(p)).ok().and_then(|e| e.harmonics(DegreePolicy::closure()).ok());
            format!("p={p}: {}", h.map_or("?".into(), |h| h.describe()))
        })
        .collect();
    let header = Header::new(Command::Figure1, cfg, sets.join("; "));
    let path = write_output(&out_dir(cfg), "figure1.csv", &(header.lines() + &figure1_csv(&rows)?))?;
    for r in &rows {
        println!("p = {}  {:<18} mean = {:.3e}  std = {:.3e}", r.p, r.method.name(), r.mean_rel_error, r.std);
    }
    println!("wrote {}", path.display());
    Ok(())
}
