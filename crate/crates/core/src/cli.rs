//! Batch front-end: one TOML experiment file in, one directory of CSV/JSON
//! artifacts out, indexed by `summary.json`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gaussian::gaussian_barycenter;
use crate::linma::{build_g, mixture_covariance, sigma_from};
use crate::measures::{AtomSpec, Domain, DomainSpec, Population};
use crate::solver::{
    fixed_point_residual, gradient_residual, gradient_residual_bound, solve_barycenter, BarycenterResult,
    SolverConfig, GRADIENT_RESIDUAL_C,
};
use crate::stats::{
    clt_experiment, counterexample, diagnostics, lln_experiment, reference_barycenter, MeasureSampler,
    SamplerFamily,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

pub const THREADS_ENV: &str = "ENTROBAR_THREADS";

/// Stream used to freeze a continuous sampler into a finite law.
pub const FREEZE_STREAM: u64 = u64::MAX - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GaussianBary,
    GridBary,
    Lln,
    Clt,
    Diagnostics,
    Counterexample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GaussianBary => "gaussian-bary",
            Command::GridBary => "grid-bary",
            Command::Lln => "lln",
            Command::Clt => "clt",
            Command::Diagnostics => "diagnostics",
            Command::Counterexample => "counterexample",
        }
    }
}

/// An inline atom with an optional weight; omitted weights mean uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(flatten)]
    pub spec: AtomSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnConfig {
    pub n_schedule: Vec<usize>,
    pub replicates: usize,
    /// Size of the finite law frozen from a continuous sampler.
    pub law_atoms: Option<usize>,
}

impl Default for LlnConfig {
    fn default() -> Self {
        LlnConfig {
            n_schedule: vec![4, 16, 64, 256],
            replicates: 50,
            law_atoms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltConfig {
    pub n: usize,
    pub replicates: usize,
    pub k_basis: usize,
    pub law_atoms: Option<usize>,
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig {
            n: 256,
            replicates: 400,
            k_basis: 5,
            law_atoms: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Log-concavity constant `A` of the atoms; derived from Gaussian atoms when absent.
    pub log_concavity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub lambdas: Vec<f64>,
    pub points: usize,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            lambdas: vec![0.01, 0.1, 1.0, 5.0, 10.0, 100.0],
            points: 1601,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<WeightedAtom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Also write the linearized operators `G` and `Σ` for a grid barycenter.
    #[serde(default)]
    pub export_operators: bool,
    #[serde(default)]
    pub lln: LlnConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub counterexample: CounterexampleConfig,
    /// Directory that relative atom paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn resolve(spec: &AtomSpec, base: &Path) -> AtomSpec {
    match spec {
        AtomSpec::File { path } if path.is_relative() => AtomSpec::File { path: base.join(path) },
        other => other.clone(),
    }
}

fn check_file(spec: &AtomSpec, field: &str) -> Result<()> {
    match spec {
        AtomSpec::File { path } if !path.is_file() => Err(Error::invalid(
            field,
            format!("file {} does not exist", path.display()),
        )),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a config file; relative atom paths are taken relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn command(&self) -> Result<Command> {
        self.command.ok_or_else(|| Error::invalid("command", "missing"))
    }

    pub fn lambda(&self) -> Result<f64> {
        match self.lambda {
            Some(l) if l > 0.0 && l.is_finite() => Ok(l),
            Some(l) => Err(Error::invalid("lambda", format!("must be > 0, got {l}"))),
            None => Err(Error::invalid("lambda", "missing")),
        }
    }

    pub fn domain(&self) -> Result<Arc<Domain>> {
        let spec = self.domain.clone().ok_or_else(|| Error::invalid("domain", "missing"))?;
        Ok(Arc::new(Domain::from_spec(spec)?))
    }

    fn atom_specs(&self) -> Vec<AtomSpec> {
        self.atoms.iter().map(|a| resolve(&a.spec, &self.base_dir)).collect()
    }

    fn weights(&self) -> Result<Vec<f64>> {
        let given = self.atoms.iter().filter(|a| a.weight.is_some()).count();
        if given == 0 {
            let n = self.atoms.len() as f64;
            return Ok(vec![1.0 / n; self.atoms.len()]);
        }
        if given != self.atoms.len() {
            return Err(Error::invalid("atoms.weight", "give a weight for every atom or for none"));
        }
        Ok(self.atoms.iter().map(|a| a.weight.unwrap_or(0.0)).collect())
    }

    /// Inline atoms as a population; `gaussian` keeps them in closed form.
    pub fn population(&self, gaussian: bool) -> Result<Population> {
        if self.atoms.is_empty() {
            return Err(Error::invalid("atoms", "this command needs inline atoms"));
        }
        let lambda = self.lambda()?;
        let domain = self.domain()?;
        let weights = self.weights()?;
        let atoms = self
            .atom_specs()
            .iter()
            .enumerate()
            .zip(weights)
            .map(|((i, spec), w)| {
                check_file(spec, &format!("atoms[{i}].path"))?;
                Ok((w, spec.to_atom(&domain, gaussian)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Population::new(lambda, domain, atoms)
    }

    /// The configured sampler with relative paths resolved and the run seed.
    pub fn sampler(&self) -> Result<MeasureSampler> {
        let family = match self.sampler.clone().ok_or_else(|| Error::invalid("sampler", "missing"))? {
            SamplerFamily::FiniteAtoms { atoms } => SamplerFamily::FiniteAtoms {
                atoms: atoms.iter().map(|a| resolve(a, &self.base_dir)).collect(),
            },
            SamplerFamily::RandomTranslatedTemplate { template, shift } => {
                SamplerFamily::RandomTranslatedTemplate {
                    template: resolve(&template, &self.base_dir),
                    shift,
                }
            }
            other => other,
        };
        if let SamplerFamily::FiniteAtoms { atoms } = &family {
            for (i, a) in atoms.iter().enumerate() {
                check_file(a, &format!("sampler.atoms[{i}].path"))?;
            }
        }
        MeasureSampler::new(family, self.seed)
    }

    /// A finite law: the sampler itself, or `law_atoms` draws frozen from it.
    fn finite_law(&self, law_atoms: Option<usize>, field: &str) -> Result<MeasureSampler> {
        let s = self.sampler()?;
        match (&s.family, law_atoms) {
            (SamplerFamily::FiniteAtoms { .. }, None) => Ok(s),
            (SamplerFamily::FiniteAtoms { .. }, Some(_)) => Err(Error::invalid(
                field,
                "a finite sampler is already a law; drop law_atoms",
            )),
            (_, Some(m)) => s.freeze(m, FREEZE_STREAM),
            (_, None) => Err(Error::invalid(field, "a continuous sampler needs law_atoms")),
        }
    }

    fn threads(&self) -> Result<Option<usize>> {
        let n = match self.threads {
            Some(n) => Some(n),
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::invalid(THREADS_ENV, format!("not a thread count: {v:?}")))?,
                ),
                Err(_) => None,
            },
        };
        if n == Some(0) {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        Ok(n)
    }

    /// Checks everything that can be checked before any work is done.
    pub fn validate(&self) -> Result<()> {
        let cmd = self.command()?;
        self.solver.validate()?;
        self.threads()?;
        if self.output.is_none() {
            return Err(Error::invalid("output", "missing; set it in the file or pass --output"));
        }
        match cmd {
            Command::Counterexample => {
                let c = &self.counterexample;
                if c.lambdas.is_empty() || c.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return Err(Error::invalid("counterexample.lambdas", "need positive values"));
                }
                if c.points < 3 {
                    return Err(Error::invalid("counterexample.points", "need at least 3"));
                }
            }
            Command::GaussianBary | Command::GridBary | Command::Diagnostics => {
                self.lambda()?;
                self.domain()?;
                if self.atoms.is_empty() {
                    return Err(Error::invalid("atoms", "this command needs inline atoms"));
                }
                for (i, a) in self.atom_specs().iter().enumerate() {
                    a.validate()?;
                    check_file(a, &format!("atoms[{i}].path"))?;
                }
                self.weights()?;
                if let Some(a) = self.diagnostics.log_concavity {
                    if !(a > 0.0) {
                        return Err(Error::invalid("diagnostics.log_concavity", "must be > 0"));
                    }
                }
            }
            Command::Lln => {
                self.lambda()?;
                self.domain()?;
                self.finite_law(self.lln.law_atoms, "lln.law_atoms")?;
                let l = &self.lln;
                if l.n_schedule.is_empty() || l.n_schedule.contains(&0) {
                    return Err(Error::invalid("lln.n_schedule", "need positive sample sizes"));
                }
                if l.replicates == 0 {
                    return Err(Error::invalid("lln.replicates", "must be at least 1"));
                }
            }
            Command::Clt => {
                self.lambda()?;
                self.domain()?;
                let c = &self.clt;
                if c.replicates < crate::stats::MIN_CLT_REPLICATES {
                    return Err(Error::invalid(
                        "clt.replicates",
                        format!("need at least {}, got {}", crate::stats::MIN_CLT_REPLICATES, c.replicates),
                    ));
                }
                if c.n == 0 || c.k_basis == 0 {
                    return Err(Error::invalid("clt", "n and k_basis must be positive"));
                }
                self.finite_law(c.law_atoms, "clt.law_atoms")?;
            }
        }
        Ok(())
    }
}

/// How a run ended. Artifacts are written in every case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotConverged,
    Failed,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub summary_path: PathBuf,
    pub files: Vec<String>,
    pub error: Option<Error>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match (&self.error, self.status) {
            (Some(e), _) => exit_code(e),
            (None, Status::NotConverged) => EXIT_NOT_CONVERGED,
            (None, _) => EXIT_OK,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput { .. } | Error::Parse(_) | Error::Unsupported(_) => EXIT_VALIDATION,
        Error::NotConverged { .. } | Error::Divergence(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_RUNTIME,
    }
}

/// Output directory with a record of every file written into it.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn record(&mut self, paths: &[PathBuf]) {
        for p in paths {
            if let Some(name) = p.file_name() {
                self.files.push(name.to_string_lossy().into_owned());
            }
        }
    }
}

fn moments(res: &BarycenterResult) -> Value {
    json!({
        "mass": res.density.mass(),
        "mean": res.density.mean(),
        "second_moment": res.density.second_moment(),
        "max_density": res.density.max_value(),
        "entropy": res.density.entropy(),
    })
}

/// Density, one potential per atom, and the residual contracts.
fn write_barycenter(out: &mut Artifacts, res: &BarycenterResult, pop: &Population, tol_l1: f64) -> Result<Value> {
    let mut w = out.create("density.csv")?;
    res.density.write_csv(&mut w)?;
    for (i, p) in res.potentials.iter().enumerate() {
        let mut w = out.create(&format!("potential_{i}.csv"))?;
        p.write_csv(&mut w)?;
    }
    let lambda = pop.lambda();
    Ok(json!({
        "converged": res.converged,
        "iterations": res.iterations,
        "final_residual": res.final_residual,
        "fixed_point_residual": fixed_point_residual(res, pop)?,
        "gradient_residual": gradient_residual(res, pop),
        "gradient_residual_bound": gradient_residual_bound(pop.domain(), lambda, tol_l1),
        "gradient_residual_c": GRADIENT_RESIDUAL_C,
        "objective": res.objective_value,
        "moments": moments(res),
    }))
}

fn solve_settled(pop: &Population, cfg: &SolverConfig) -> Result<BarycenterResult> {
    match solve_barycenter(pop, cfg) {
        Err(Error::NotConverged { result }) => Ok(*result),
        other => other,
    }
}

fn status_of(converged: bool) -> Status {
    if converged {
        Status::Ok
    } else {
        Status::NotConverged
    }
}

fn run_command(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<(Status, Value)> {
    match cfg.command()? {
        Command::GaussianBary => {
            let pop = cfg.population(true)?;
            let bary = gaussian_barycenter(&pop)?;
            out.json("barycenter.json", &bary.measure)?;
            let cov: Vec<Vec<f64>> = bary
                .measure
                .covariance()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect();
            Ok((
                Status::Ok,
                json!({
                    "iterations": bary.iterations,
                    "relative_residual": bary.relative_residual,
                    "restart_gap": bary.restart_gap,
                    "alpha": bary.alpha,
                    "mean": bary.measure.mean().as_slice(),
                    "covariance": cov,
                }),
            ))
        }
        Command::GridBary => {
            let pop = cfg.population(false)?;
            let res = solve_settled(&pop, &cfg.solver)?;
            let mut results = write_barycenter(out, &res, &pop, cfg.solver.tol_l1)?;
            if cfg.export_operators {
                let g = build_g(&res.density, &res.potentials, &pop)?;
                let sigma = sigma_from(&g, &mixture_covariance(&res.potentials, &pop.weights())?)?;
                let g_files = g.save(&out.dir, "operator_g")?;
                out.record(&g_files);
                let s_files = sigma.save(&out.dir, "operator_sigma")?;
                out.record(&s_files);
                results["g_condition_number"] = json!(g.condition_number());
            }
            Ok((status_of(res.converged), results))
        }
        Command::Diagnostics => {
            let pop = cfg.population(false)?;
            let res = solve_settled(&pop, &cfg.solver)?;
            let mut results = write_barycenter(out, &res, &pop, cfg.solver.tol_l1)?;
            let a = cfg.diagnostics.log_concavity.or_else(|| {
                cfg.atom_specs()
                    .iter()
                    .map(AtomSpec::log_concavity)
                    .try_fold(f64::INFINITY, |acc, a| a.map(|a| acc.min(a)))
            });
            let rep = diagnostics(&res, &pop, a);
            out.json("diagnostics.json", &rep)?;
            results["all_bounds_passed"] = json!(rep.all_passed);
            results["log_concavity"] = json!(a);
            Ok((status_of(res.converged), results))
        }
        Command::Lln => {
            let lambda = cfg.lambda()?;
            let domain = cfg.domain()?;
            let law = cfg.finite_law(cfg.lln.law_atoms, "lln.law_atoms")?;
            let reference = reference_barycenter(&law, lambda, &domain, &cfg.solver)?;
            let mut w = out.create("reference_density.csv")?;
            reference.density.write_csv(&mut w)?;
            let table = lln_experiment(
                &law,
                lambda,
                &domain,
                &cfg.solver,
                &reference.density,
                &cfg.lln.n_schedule,
                cfg.lln.replicates,
            )?;
            let header = vec![
                format!("command = lln, seed = {}, lambda = {lambda:.16e}", cfg.seed),
                format!("n_schedule = {:?}, replicates = {}", cfg.lln.n_schedule, cfg.lln.replicates),
                format!("law = {}", serde_json::to_string(&law.family)?),
            ];
            let mut w = out.create("lln.csv")?;
            table.write_csv(&header, &mut w)?;
            w.flush()?;
            let non_converged = table.rows.iter().filter(|r| !r.converged).count();
            Ok((
                Status::Ok,
                json!({
                    "reference_iterations": reference.iterations,
                    "reference_residual": reference.final_residual,
                    "medians": table.medians,
                    "sign_tests": table.sign_tests,
                    "trend_holds": table.trend_holds(),
                    "non_converged_replicates": non_converged,
                }),
            ))
        }
        Command::Clt => {
            let lambda = cfg.lambda()?;
            let domain = cfg.domain()?;
            let law = cfg.finite_law(cfg.clt.law_atoms, "clt.law_atoms")?;
            let c = &cfg.clt;
            let rep = clt_experiment(&law, lambda, &domain, &cfg.solver, c.n, c.replicates, c.k_basis)?;
            out.json("clt_report.json", &json!({ "seed": cfg.seed, "law": law.family, "report": rep }))?;
            Ok((
                Status::Ok,
                json!({
                    "relative_frobenius": rep.relative_frobenius,
                    "within_band": rep.bootstrap.within_band,
                    "band_radius": rep.bootstrap.radius,
                    "distance": rep.bootstrap.distance,
                    "leading_share": rep.leading_share,
                    "non_converged_replicates": rep.non_converged,
                }),
            ))
        }
        Command::Counterexample => {
            let c = &cfg.counterexample;
            let rep = counterexample(&c.lambdas, c.points, &cfg.solver)?;
            out.json("counterexample.json", &rep)?;
            let all = rep.rows.iter().all(|r| r.converged);
            Ok((
                status_of(all),
                json!({ "bound": rep.bound, "crossing": rep.crossing }),
            ))
        }
    }
}

/// Runs one experiment and writes `summary.json` whatever the outcome. Errors
/// before the output directory exists are returned directly.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    let dir = cfg.output.clone().expect("validated");
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::invalid("output", format!("cannot create {}: {e}", dir.display())))?;
    let threads = cfg.threads()?;
    let mut out = Artifacts { dir, files: Vec::new() };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::invalid("threads", e.to_string()))?;
    let outcome = pool.install(|| run_command(cfg, &mut out));

    let (status, results, error) = match outcome {
        Ok((s, r)) => (s, r, None),
        Err(e) => {
            let status = if exit_code(&e) == EXIT_NOT_CONVERGED {
                Status::NotConverged
            } else {
                Status::Failed
            };
            (status, json!({ "error": e.to_string() }), Some(e))
        }
    };
    let summary = json!({
        "command": cfg.command()?.name(),
        "status": status,
        "config": cfg,
        "versions": {
            "entrobar": env!("CARGO_PKG_VERSION"),
            "summary_format": 1,
        },
        "seed": cfg.seed,
        "threads": threads,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "results": results,
        "files": out.files,
    });
    let summary_path = out.dir.join("summary.json");
    let mut w = BufWriter::new(File::create(&summary_path)?);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(RunOutcome {
        status,
        summary_path,
        files: out.files,
        error,
    })
}

#[derive(Debug, Parser)]
#[command(name = "entrobar", version, about = "Entropic-Wasserstein barycenter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML experiment file.
    config: PathBuf,
    /// Output directory, overriding `output` in the file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed, overriding `seed` in the file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Closed-form Gaussian barycenter.
    GaussianBary(RunArgs),
    /// Grid barycenter by fixed-point iteration.
    GridBary(RunArgs),
    /// Law-of-large-numbers trend of empirical barycenters.
    Lln(RunArgs),
    /// Central-limit covariance check against the plug-in operator.
    Clt(RunArgs),
    /// A-priori bounds on a grid barycenter.
    Diagnostics(RunArgs),
    /// λ sweep on the non-convex three-interval domain.
    Counterexample(RunArgs),
    /// Whatever `command` the file names.
    Run(RunArgs),
}

fn prepare(sub: Sub) -> Result<ExperimentConfig> {
    let (cmd, args) = match sub {
        Sub::GaussianBary(a) => (Some(Command::GaussianBary), a),
        Sub::GridBary(a) => (Some(Command::GridBary), a),
        Sub::Lln(a) => (Some(Command::Lln), a),
        Sub::Clt(a) => (Some(Command::Clt), a),
        Sub::Diagnostics(a) => (Some(Command::Diagnostics), a),
        Sub::Counterexample(a) => (Some(Command::Counterexample), a),
        Sub::Run(a) => (None, a),
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    match (cmd, cfg.command) {
        (Some(c), Some(f)) if c != f => {
            return Err(Error::invalid(
                "command",
                format!("file says {} but {} was requested", f.name(), c.name()),
            ))
        }
        (Some(c), _) => cfg.command = Some(c),
        (None, None) => return Err(Error::invalid("command", "missing; name it in the file or as a subcommand")),
        (None, Some(_)) => {}
    }
    if let Some(o) = args.output {
        cfg.output = Some(o);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Entry point for the binary: parses arguments, runs, reports on stderr and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let outcome = prepare(cli.command).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            if let Some(e) = &o.error {
                eprintln!("entrobar: {e}");
            } else if o.status == Status::NotConverged {
                eprintln!("entrobar: solver did not converge; see {}", o.summary_path.display());
            }
            o.exit_code()
        }
        Err(e) => {
            eprintln!("entrobar: {e}");
            exit_code(&e)
        }
    }
}
