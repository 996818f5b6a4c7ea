use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::deviations::{random_endomorphism, Features};
use crate::efp::{efp_eah, efp_error, efp_iterative};
use crate::error::{Error, Result};
use crate::games::{compute_phi_equilibrium, zero_sum_value, MultilinearGame, NormalFormGame};
use crate::geometry::{ConvexBody, RegretMinimizer, SparseDistribution};
use crate::learning::{
    phi_regret_minimizer, play, Adversary, BestResponseAdversary, ConstantAdversary, DeviationSpace, LearnerSettings,
    RandomAdversary, SinusoidalAdversary,
};
use crate::numerics::DenseMatrix;

/// Command-line flags of the `phieq` binary.
#[derive(Clone, Debug, Parser)]
#[command(
    name = "phieq",
    version,
    about = "Run expected-fixed-point, equilibrium and regret experiments"
)]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for the report and CSV.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured precision.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Suppresses the summary line on standard output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Efp,
    Equilibrium,
    Regret,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Efp => "efp",
            Command::Equilibrium => "equilibrium",
            Command::Regret => "regret",
            Command::Verify => "verify",
        }
    }
}

/// A number or the string `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Auto {
    Value(f64),
    Keyword(AutoKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

impl Auto {
    fn value(self) -> Option<f64> {
        match self {
            Auto::Value(v) => Some(v),
            Auto::Keyword(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Cube { dim: usize, half_width: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { n: usize },
    Polytope { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl BodySpec {
    pub fn build(&self) -> Result<ConvexBody> {
        match self {
            BodySpec::Box { lo, hi } => ConvexBody::box_body(lo.clone(), hi.clone()),
            BodySpec::Cube { dim, half_width } => {
                let h = *half_width;
                ConvexBody::box_body(vec![-h; *dim], vec![h; *dim])
            }
            BodySpec::Ball { center, radius } => ConvexBody::ball(center.clone(), *radius),
            BodySpec::Simplex { n } => ConvexBody::simplex(*n),
            BodySpec::Polytope { a, b } => ConvexBody::hpolytope(DenseMatrix::from_rows(a)?, b.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSpec {
    Linear,
    Legendre { degree: usize },
}

impl From<FeatureSpec> for Features {
    fn from(f: FeatureSpec) -> Self {
        match f {
            FeatureSpec::Linear => Features::Linear,
            FeatureSpec::Legendre { degree } => Features::Legendre { degree },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// Mixture of the identity and a random point of the inner parameter
    /// ball, drawn with the run seed.
    RandomEndomorphism { mix: f64 },
    /// `x -> M x + s` in ambient coordinates.
    Affine { matrix: Vec<Vec<f64>>, shift: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfpMethod {
    Eah,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientKind {
    Bilinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    MatchingPennies,
    RockPaperScissors,
    /// One nested payoff tensor per player, indexed by the players' actions
    /// in order; entries must lie in `[-1, 1]`.
    NormalForm {
        payoffs: Vec<Value>,
    },
    /// Two players with `u_1 = x_1^T A x_2` and `u_2 = x_1^T B x_2`.
    Multilinear {
        bodies: Vec<BodySpec>,
        gradient: GradientKind,
        matrices: Vec<Vec<Vec<f64>>>,
    },
}

fn flatten_tensor(v: &Value, shape: &mut Vec<usize>, depth: usize, out: &mut Vec<f64>) -> Result<()> {
    match v {
        Value::Array(items) => {
            if depth == shape.len() {
                shape.push(items.len());
            } else if shape[depth] != items.len() {
                return Err(Error::ConfigInvalid("payoff tensor is ragged".into()));
            }
            items
                .iter()
                .try_for_each(|item| flatten_tensor(item, shape, depth + 1, out))
        }
        Value::Number(n) if depth == shape.len() => {
            out.push(n.as_f64().expect("finite JSON number"));
            Ok(())
        }
        _ => Err(Error::ConfigInvalid("payoff tensor must hold numbers".into())),
    }
}

impl GameSpec {
    pub fn build(&self) -> Result<(MultilinearGame, Option<NormalFormGame>)> {
        let nf = match self {
            GameSpec::MatchingPennies => NormalFormGame::matching_pennies(),
            GameSpec::RockPaperScissors => NormalFormGame::rock_paper_scissors(),
            GameSpec::NormalForm { payoffs } => {
                let mut actions: Option<Vec<usize>> = None;
                let mut flat = Vec::with_capacity(payoffs.len());
                for tensor in payoffs {
                    let (mut shape, mut out) = (Vec::new(), Vec::new());
                    flatten_tensor(tensor, &mut shape, 0, &mut out)?;
                    match &actions {
                        Some(a) if *a != shape => {
                            return Err(Error::ConfigInvalid("payoff tensors differ in shape".into()));
                        }
                        _ => actions = Some(shape),
                    }
                    flat.push(out);
                }
                let actions = actions.ok_or_else(|| Error::ConfigInvalid("no payoff tensors".into()))?;
                if actions.len() != payoffs.len() {
                    return Err(Error::ConfigInvalid(format!(
                        "{} players need tensors of order {}",
                        payoffs.len(),
                        payoffs.len()
                    )));
                }
                NormalFormGame::new(actions, flat)?
            }
            GameSpec::Multilinear {
                bodies,
                gradient: GradientKind::Bilinear,
                matrices,
            } => {
                if bodies.len() != 2 || matrices.len() != 2 {
                    return Err(Error::ConfigInvalid(
                        "bilinear games need two bodies and two matrices".into(),
                    ));
                }
                let game = MultilinearGame::bilinear(
                    bodies[0].build()?,
                    bodies[1].build()?,
                    DenseMatrix::from_rows(&matrices[0])?,
                    DenseMatrix::from_rows(&matrices[1])?,
                )?;
                return Ok((game, None));
            }
        };
        Ok((MultilinearGame::normal_form(nf.clone())?, Some(nf)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    Linear,
    Legendre,
}

/// `"linear"`, `"legendre"` with a top-level `degree`, one feature object,
/// or one object per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureList {
    Name(FeatureName),
    One(FeatureSpec),
    PerPlayer(Vec<FeatureSpec>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    Constant {
        u: Vec<f64>,
    },
    Sinusoidal {
        period: f64,
    },
    /// Uniform draws seeded by the run seed.
    Random,
    BestResponse {
        a: Vec<Vec<f64>>,
        opponent: BodySpec,
    },
}

/// Experiment description; fields not used by the command are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Auto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<BodySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<EfpMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSpec>,
    #[serde(default, alias = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Auto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator_resolution: Option<usize>,
    /// Prior report to replay, for `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that the command's required fields are present and that no
    /// foreign field is set.
    pub fn validate(&self) -> Result<()> {
        let present = [
            ("epsilon", self.epsilon.is_some()),
            ("body", self.body.is_some()),
            ("features", self.features.is_some()),
            ("degree", self.degree.is_some()),
            ("map", self.map.is_some()),
            ("method", self.method.is_some()),
            ("game", self.game.is_some()),
            ("horizon", self.horizon.is_some()),
            ("eta", self.eta.is_some()),
            ("adversary", self.adversary.is_some()),
            ("comparator_resolution", self.comparator_resolution.is_some()),
            ("report", self.report.is_some()),
        ];
        let (required, optional): (&[&str], &[&str]) = match self.command {
            Command::Efp => (&["body", "map"], &["epsilon", "features", "degree", "method"]),
            Command::Equilibrium => (&["game"], &["epsilon", "features", "degree"]),
            Command::Regret => (
                &["body", "horizon", "adversary"],
                &["epsilon", "features", "degree", "eta", "comparator_resolution"],
            ),
            Command::Verify => (&["report"], &[]),
        };
        for (name, set) in present {
            if set && !required.contains(&name) && !optional.contains(&name) {
                return Err(Error::ConfigInvalid(format!(
                    "field `{name}` is not used by `{}`",
                    self.command.name()
                )));
            }
            if !set && required.contains(&name) {
                return Err(Error::ConfigInvalid(format!(
                    "`{}` needs field `{name}`",
                    self.command.name()
                )));
            }
        }
        if let Some(Auto::Value(e)) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::ConfigInvalid("epsilon must be positive".into()));
            }
        }
        if let Some(Auto::Value(e)) = self.eta {
            if !(e > 0.0) {
                return Err(Error::ConfigInvalid("eta must be positive".into()));
            }
        }
        if self.horizon == Some(0) {
            return Err(Error::ConfigInvalid("horizon must be positive".into()));
        }
        match (&self.features, self.degree) {
            (Some(FeatureList::Name(FeatureName::Legendre)), None) => {
                return Err(Error::ConfigInvalid("`legendre` features need a `degree`".into()));
            }
            (Some(FeatureList::Name(FeatureName::Legendre)), Some(_)) | (_, None) => {}
            (_, Some(_)) => {
                return Err(Error::ConfigInvalid(
                    "`degree` goes with `\"features\": \"legendre\"`".into(),
                ));
            }
        }
        if self.command != Command::Equilibrium {
            if let Some(FeatureList::PerPlayer(_)) = self.features {
                return Err(Error::ConfigInvalid(
                    "a feature list is only meaningful for games".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical JSON with sorted keys.
    pub fn canonical(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    fn named_features(&self, name: FeatureName) -> Features {
        match name {
            FeatureName::Linear => Features::Linear,
            FeatureName::Legendre => Features::Legendre {
                degree: self.degree.expect("validated"),
            },
        }
    }

    fn single_features(&self, default: Features) -> Features {
        match &self.features {
            Some(FeatureList::Name(n)) => self.named_features(*n),
            Some(FeatureList::One(f)) => (*f).into(),
            _ => default,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Result payload and CSV text of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub result: Value,
    pub csv: String,
}

/// Everything a run writes: report JSON and optional CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub report: Value,
    pub csv: Option<String>,
    pub summary: String,
    pub ok: bool,
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn atoms_csv(mu: &SparseDistribution, names: &[String]) -> Result<String> {
    let mut header = vec!["atom".to_string(), "weight".to_string()];
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = mu
        .atoms()
        .enumerate()
        .map(|(i, (x, w))| {
            let mut r = vec![i.to_string(), num(w)];
            r.extend(x.iter().map(|v| num(*v)));
            r
        })
        .collect();
    csv_text(&header, &rows)
}

fn run_efp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let body = cfg.body.as_ref().expect("validated").build()?;
    let eps = cfg.epsilon.and_then(Auto::value).unwrap_or(1e-6);
    let features = cfg.single_features(Features::Legendre { degree: 2 });
    let space = DeviationSpace::new(&body, features)?;
    let phi: Box<dyn Fn(&[f64]) -> Result<Vec<f64>>> = match cfg.map.as_ref().expect("validated") {
        MapSpec::RandomEndomorphism { mix } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let y = random_endomorphism(space.feature_map(), space.radii(), *mix, &mut rng)?.to_flat();
            let space = space.clone();
            Box::new(move |x: &[f64]| space.apply_ambient(&y, x))
        }
        MapSpec::Affine { matrix, shift } => {
            let m = DenseMatrix::from_rows(matrix)?;
            let shift = shift.clone();
            Box::new(move |x: &[f64]| {
                let mut y = crate::numerics::matvec(&m, x)?;
                for (a, b) in y.iter_mut().zip(&shift) {
                    *a += b;
                }
                Ok(y)
            })
        }
    };
    let method = cfg.method.unwrap_or(EfpMethod::Eah);
    let (mu, cuts) = match method {
        EfpMethod::Eah => {
            let sol = efp_eah(&body, &phi, eps)?;
            (sol.distribution, Some(sol.cuts))
        }
        EfpMethod::Iterative => {
            let x0 = space.frame().to_ambient(&vec![0.0; space.frame().local_dim()])?;
            (efp_iterative(&body, &phi, eps, &x0)?, None)
        }
    };
    let error = efp_error(&mu, &phi)?;
    let names: Vec<String> = (1..=body.dim()).map(|j| format!("x{j}")).collect();
    Ok(Outcome {
        result: json!({
            "method": method,
            "error": error,
            "epsilon": eps,
            "cuts": cuts,
            "support": mu.len(),
            "mean": mu.mean(),
        }),
        csv: atoms_csv(&mu, &names)?,
    })
}

fn run_equilibrium(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (game, nf) = cfg.game.as_ref().expect("validated").build()?;
    let eps = cfg.epsilon.and_then(Auto::value).unwrap_or(1e-4);
    let features: Vec<Features> = match &cfg.features {
        None => vec![Features::Linear; game.players()],
        Some(FeatureList::Name(n)) => vec![cfg.named_features(*n); game.players()],
        Some(FeatureList::One(f)) => vec![(*f).into(); game.players()],
        Some(FeatureList::PerPlayer(list)) => list.iter().map(|f| (*f).into()).collect(),
    };
    let run = compute_phi_equilibrium(&game, &features, eps)?;
    let game_value = match &nf {
        Some(g) if g.players() == 2 && g.payoffs(0).iter().zip(g.payoffs(1)).all(|(a, b)| a + b == 0.0) => {
            Some(zero_sum_value(&g.matrix(0)?)?)
        }
        _ => None,
    };
    let r = &run.report;
    let mut names = Vec::new();
    for (i, d) in run.joint.dims().iter().enumerate() {
        names.extend((1..=*d).map(|j| format!("p{}_x{j}", i + 1)));
    }
    Ok(Outcome {
        result: json!({
            "epsilon": eps,
            "gaps": r.gaps,
            "gap_method": format!("{:?}", r.method),
            "values": r.values,
            "game_value": game_value,
            "cuts": r.cuts,
            "ger_cuts": r.ger_cuts,
            "sep_cuts": r.sep_cuts,
            "certificate_value": r.certificate_value,
            "pruned_mass": r.pruned_mass,
            "support": r.support,
            "atoms": run.joint.distribution().atoms().map(|(x, _)| x.to_vec()).collect::<Vec<_>>(),
            "weights": run.joint.distribution().atoms().map(|(_, w)| w).collect::<Vec<_>>(),
        }),
        csv: atoms_csv(run.joint.distribution(), &names)?,
    })
}

fn run_regret(cfg: &ExperimentConfig) -> Result<Outcome> {
    let body = cfg.body.as_ref().expect("validated").build()?;
    let horizon = cfg.horizon.expect("validated");
    let features = cfg.single_features(Features::Legendre { degree: 2 });
    let mut settings = LearnerSettings::new(horizon);
    settings.eta = cfg.eta.and_then(Auto::value);
    settings.eps = cfg.epsilon.and_then(Auto::value);
    let mut learner = phi_regret_minimizer(&body, features, settings)?;
    let d = body.dim();
    let mut adversary: Box<dyn Adversary> = match cfg.adversary.as_ref().expect("validated") {
        AdversarySpec::Constant { u } => Box::new(ConstantAdversary(u.clone())),
        AdversarySpec::Sinusoidal { period } => Box::new(SinusoidalAdversary { d, period: *period }),
        AdversarySpec::Random => Box::new(RandomAdversary::new(d, cfg.seed)),
        AdversarySpec::BestResponse { a, opponent } => Box::new(BestResponseAdversary::new(
            DenseMatrix::from_rows(a)?,
            opponent.build()?,
        )?),
    };
    play(&mut learner, adversary.as_mut(), horizon)?;
    let comparators = learner.space().relaxation(cfg.comparator_resolution.unwrap_or(9))?;
    let ledger = learner.ledger();
    let rows = ledger.trajectory(&comparators, 1)?;
    let last = rows.last().expect("horizon is positive");
    let slack = learner.eps() * horizon as f64;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.round.to_string(),
                num(r.utility),
                num(r.phi_regret),
                num(r.external_regret),
                r.cuts.to_string(),
            ]
        })
        .collect();
    let header: Vec<String> = ["round", "utility", "phi_regret", "external_regret", "cuts"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    Ok(Outcome {
        result: json!({
            "horizon": horizon,
            "parameter_dim": learner.space().dim(),
            "eta": learner.eta(),
            "epsilon": learner.eps(),
            "phi_regret": last.phi_regret,
            "external_regret": last.external_regret,
            "average_phi_regret": last.phi_regret / horizon as f64,
            "accounting_slack": slack,
            "accounting_holds": last.phi_regret <= last.external_regret + slack,
            "gd_bound": learner.gd_bound(),
            "shell_cuts": learner.shell().cuts().len(),
            "ellipsoid_calls": learner.ellipsoid_calls(),
            "max_efp_error": ledger.max_efp_error(),
            "final_strategy_mean": learner.next_strategy()?.mean(),
        }),
        csv: csv_text(&header, &csv_rows)?,
    })
}

fn run_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let path = cfg.report.as_ref().expect("validated");
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let prior: Value = serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let inner: ExperimentConfig = serde_json::from_value(prior["config"].clone())
        .map_err(|e| Error::ConfigInvalid(format!("report config: {e}")))?;
    inner.validate()?;
    if inner.command == Command::Verify {
        return Err(Error::ConfigInvalid("cannot verify a verification report".into()));
    }
    let expected = prior["outputs"]["csv_sha256"]
        .as_str()
        .ok_or_else(|| Error::ConfigInvalid("report has no CSV hash".into()))?
        .to_string();
    let replay = execute(&inner)?;
    let got = sha256_hex(replay.csv.as_bytes());
    if got != expected {
        return Err(Error::ReplayMismatch(format!("CSV hash {got} differs from {expected}")));
    }
    Ok(Outcome {
        result: json!({
            "replayed_command": inner.command.name(),
            "config_sha256": inner.hash(),
            "csv_sha256": got,
            "matches": true,
        }),
        csv: String::new(),
    })
}

/// Runs one experiment without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Efp => run_efp(cfg),
        Command::Equilibrium => run_equilibrium(cfg),
        Command::Regret => run_regret(cfg),
        Command::Verify => run_verify(cfg),
    }
}

/// Runs an experiment and assembles its report; solver errors are captured
/// in the report.
pub fn run(cfg: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let outcome = execute(cfg);
    let secs = start.elapsed().as_secs_f64();
    let name = cfg.command.name();
    let base = json!({
        "command": name,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "config_sha256": cfg.hash(),
        "version": env!("CARGO_PKG_VERSION"),
        "timings": { "total_secs": secs },
    });
    let mut report = base;
    match outcome {
        Ok(o) => {
            let has_csv = cfg.command != Command::Verify;
            report["status"] = json!("ok");
            report["error"] = Value::Null;
            report["outputs"] = json!({
                "report": format!("{name}_report.json"),
                "csv": has_csv.then(|| format!("{name}.csv")),
                "csv_sha256": has_csv.then(|| sha256_hex(o.csv.as_bytes())),
            });
            let summary = format!("{name} ok: {}", summarize(&o.result));
            report["result"] = o.result;
            RunReport {
                report,
                csv: has_csv.then_some(o.csv),
                summary,
                ok: true,
            }
        }
        Err(e) => {
            report["status"] = json!("error");
            report["error"] = json!({ "kind": e.kind(), "message": e.to_string() });
            report["result"] = Value::Null;
            report["outputs"] = json!({ "report": format!("{name}_report.json"), "csv": null, "csv_sha256": null });
            RunReport {
                report,
                csv: None,
                summary: format!("{name} failed: {e}"),
                ok: false,
            }
        }
    }
}

fn summarize(result: &Value) -> String {
    let keys = ["error", "gaps", "average_phi_regret", "matches", "cuts"];
    keys.iter()
        .filter_map(|k| result.get(*k).filter(|v| !v.is_null()).map(|v| format!("{k}={v}")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes the report (pretty JSON, sorted keys) and CSV into `out`.
pub fn write_outputs(run: &RunReport, command: Command, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let name = command.name();
    let text = serde_json::to_string_pretty(&run.report).map_err(|e| Error::Io(e.to_string()))?;
    let report_path = out.join(format!("{name}_report.json"));
    fs::write(&report_path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", report_path.display())))?;
    if let Some(csv) = &run.csv {
        let csv_path = out.join(format!("{name}.csv"));
        fs::write(&csv_path, csv).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("PHIEQ_LOG", "error")).try_init();
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return config_failure(&cli, e),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(e) = cli.epsilon {
        cfg.epsilon = Some(Auto::Value(e));
        if let Err(e) = cfg.validate() {
            return config_failure(&cli, e);
        }
    }
    info!("running {} with config hash {}", cfg.command.name(), cfg.hash());
    let run = run(&cfg);
    if let Err(e) = write_outputs(&run, cfg.command, &cli.out) {
        eprintln!("phieq: {e}");
        return 3;
    }
    if !cli.quiet {
        println!("{}", run.summary);
    }
    if run.ok {
        0
    } else {
        1
    }
}

fn config_failure(cli: &Cli, e: Error) -> i32 {
    let report = json!({
        "command": null,
        "config_path": cli.config.display().to_string(),
        "status": "error",
        "error": { "kind": e.kind(), "message": e.to_string() },
        "version": env!("CARGO_PKG_VERSION"),
    });
    let written = fs::create_dir_all(&cli.out).and_then(|_| {
        fs::write(
            cli.out.join("error_report.json"),
            serde_json::to_string_pretty(&report).expect("value serializes") + "\n",
        )
    });
    if let Err(w) = written {
        eprintln!("phieq: {w}");
    }
    if !cli.quiet {
        println!("config rejected: {e}");
    }
    2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let e = ExperimentConfig::from_json(r#"{"command": "verify", "report": "x", "colour": 1}"#).unwrap_err();
        assert_eq!(e.kind(), "ConfigInvalid");
    }

    #[test]
    fn foreign_fields_are_rejected() {
        let e = ExperimentConfig::from_json(r#"{"command": "verify", "report": "x", "horizon": 3}"#).unwrap_err();
        assert!(e.to_string().contains("horizon"));
    }

    #[test]
    fn auto_keyword_parses() {
        let cfg = ExperimentConfig::from_json(
            r#"{"command": "regret", "body": {"kind": "cube", "dim": 1, "half_width": 1.0},
                "horizon": 3, "eta": "auto", "epsilon": 0.01, "adversary": {"kind": "random"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.eta, Some(Auto::Keyword(AutoKeyword::Auto)));
        assert_eq!(cfg.epsilon, Some(Auto::Value(0.01)));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = ExperimentConfig::from_json(r#"{"command": "verify", "report": "r.json", "seed": 4}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"seed": 4, "report": "r.json", "command": "verify"}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn named_features_take_a_degree() {
        let base = r#"{"command": "regret", "body": {"kind": "cube", "dim": 1, "half_width": 1.0},
            "T": 3, "adversary": {"kind": "random"}, "features": "legendre""#;
        let cfg = ExperimentConfig::from_json(&format!("{base}, \"degree\": 3}}")).unwrap();
        assert_eq!(cfg.single_features(Features::Linear), Features::Legendre { degree: 3 });
        assert_eq!(cfg.horizon, Some(3));
        assert!(ExperimentConfig::from_json(&format!("{base}}}")).is_err());
    }

    #[test]
    fn payoff_tensors_are_flattened_row_major() {
        let spec: GameSpec = serde_json::from_str(
            r#"{"type": "normal_form", "payoffs": [[[1, -1, 0], [0, 1, -1]], [[-1, 1, 0], [0, -1, 1]]]}"#,
        )
        .unwrap();
        let (_, nf) = spec.build().unwrap();
        let nf = nf.unwrap();
        assert_eq!(nf.actions(), &[2, 3]);
        assert_eq!(nf.payoffs(0), &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn ragged_tensors_are_rejected() {
        let spec: GameSpec =
            serde_json::from_str(r#"{"type": "normal_form", "payoffs": [[[1, 0], [0]], [[0, 1], [1, 0]]]}"#).unwrap();
        assert_eq!(spec.build().unwrap_err().kind(), "ConfigInvalid");
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
