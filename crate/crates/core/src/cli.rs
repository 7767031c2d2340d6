//! Command-line front end. [`run`] is the whole program minus process I/O:
//! it returns the exit code and the report text.
//!
//! Every report is one JSON document with sorted keys:
//!
//! ```text
//! { "format": 1, "command": ..., "status": "ok"|"invalid"|"error",
//!   "payload": ..., "witnesses": [...] }
//! ```
//!
//! Exit codes: 0 ok, 1 a validation failure with witnesses, 2 a usage or
//! input error. `gen` is the exception: it prints a space file so that its
//! output can be fed straight back into `check`.

use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dist::Dist;
use crate::fixpoint::{
    banach_fixpoint, ultra_fixpoint, CertificateBall, DescentCertificate, FixError, FixResult, MapMode, PolyMap,
    SelfMapTable,
};
use crate::io::{
    bits, read_json, ChainFile, DendrogramFile, IoError, MapFile, OrderFile, PolyFile, SpaceFile, WeightedFile,
};
use crate::order::{
    brute_maximal_set, bb_maximal_with, validate_quasiorder, validate_strict_order, zorn_maximal, OrderError,
    SuccessorRule,
};
use crate::spaces::{
    dendrogram_to_space, discrete_space, padic_space, random_space, DendrogramError, ModelError, PAdicModel,
    DEFAULT_CARRIER_BOUND,
};
use crate::ultra::{
    ball_compare, intersect_ball_chain, recenter_invariance, strict_inclusion_implies_smaller_radius, BallError,
    BallRelation, ClosedBall, DistMatrix, FiniteUltraSpace, SpaceError,
};
use crate::variational::{brondsted_leq, evp_point, evp_verify, VariationalError, WeightedSpace};

pub const REPORT_FORMAT: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "ultrafix", version, about = "Exact ultrametric spaces, maximal elements and certified fixed points")]
struct Cli {
    /// Re-validate certificates with the independent checkers before printing.
    #[arg(long, global = true)]
    recheck: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a space file (or a dendrogram file) against the ultrametric axioms.
    Check { space: PathBuf },
    /// Ball queries.
    #[command(subcommand)]
    Balls(BallsCommand),
    /// Intersect a descending chain of balls.
    Chain { space: PathBuf, chain: PathBuf },
    /// Maximal element above a start element of an ordered set.
    Maximal {
        order: PathBuf,
        #[arg(long)]
        start: usize,
        #[arg(long, value_enum, default_value_t = Rule::MinimalWeight)]
        rule: Rule,
    },
    /// Ekeland point for a start point of a weighted space.
    Evp {
        weighted: PathBuf,
        #[arg(long)]
        start: String,
        /// Accept any metric instead of requiring an ultrametric.
        #[arg(long)]
        metric: bool,
    },
    /// Check the two Ekeland conditions for a pair of points.
    EvpVerify {
        weighted: PathBuf,
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
        #[arg(long)]
        metric: bool,
    },
    /// Fixed point of a strictly nonexpansive map by ball descent.
    Fixpoint {
        space: PathBuf,
        map: PathBuf,
        #[arg(long)]
        start: Option<String>,
    },
    /// Fixed point of a contraction with a geometric rate check.
    Banach {
        space: PathBuf,
        map: PathBuf,
        #[arg(long)]
        alpha: Dist,
        #[arg(long)]
        start: Option<String>,
        /// Stop once the displacement is at most this radius.
        #[arg(long, default_value = "0")]
        tol: Dist,
    },
    /// Lift a simple root mod p to a root mod p^N.
    Hensel(HenselArgs),
    /// Generate a space file.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Debug, Subcommand)]
enum BallsCommand {
    /// Relation between X[c1, r1] and X[c2, r2].
    Compare { space: PathBuf, c1: String, r1: Dist, c2: String, r2: Dist },
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// Cophenetic space of a seeded random dendrogram.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
    /// The residues mod p^N with the p-adic distance.
    Padic {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        precision: u32,
    },
    /// n points at mutual distance 1.
    Discrete {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug, clap::Args)]
struct HenselArgs {
    /// Polynomial spec file; flags override its fields.
    spec: Option<PathBuf>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    precision: Option<u32>,
    /// Coefficients, constant term first, e.g. "-2,0,1".
    #[arg(long, allow_hyphen_values = true)]
    poly: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<i64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Rule {
    MinimalWeight,
    FirstAdmissible,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Newton,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Ok,
    Invalid,
    Error,
}

impl Status {
    fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Invalid => 1,
            Status::Error => 2,
        }
    }
}

/// Why a command did not produce an ok report.
#[derive(Debug)]
enum Fail {
    Invalid { message: String, witnesses: Vec<Value> },
    Error(String),
}

impl Fail {
    fn invalid(message: impl ToString, witnesses: Vec<Value>) -> Self {
        Fail::Invalid { message: message.to_string(), witnesses }
    }
}

impl From<IoError> for Fail {
    fn from(e: IoError) -> Self {
        Fail::Error(e.to_string())
    }
}

impl From<SpaceError> for Fail {
    fn from(e: SpaceError) -> Self {
        match &e {
            SpaceError::Invalid(report) => Fail::invalid(&e, to_values(&report.violations)),
            _ => Fail::Error(e.to_string()),
        }
    }
}

impl From<DendrogramError> for Fail {
    fn from(e: DendrogramError) -> Self {
        match e {
            DendrogramError::Space(s) => s.into(),
            DendrogramError::NonMonotone { merge, .. } => Fail::invalid(&e, vec![json!({ "merge": merge })]),
            other => Fail::Error(other.to_string()),
        }
    }
}

impl From<ModelError> for Fail {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Space(s) => s.into(),
            other => Fail::Error(other.to_string()),
        }
    }
}

impl From<BallError> for Fail {
    fn from(e: BallError) -> Self {
        match &e {
            BallError::Space(s) => s.clone().into(),
            BallError::NotDescending { index } => Fail::invalid(&e, vec![json!({ "index": index })]),
            _ => Fail::Error(e.to_string()),
        }
    }
}

impl From<OrderError> for Fail {
    fn from(e: OrderError) -> Self {
        match &e {
            OrderError::Invalid(r) | OrderError::Inadmissible(r) => Fail::invalid(&e, to_values(std::slice::from_ref(r))),
            _ => Fail::Error(e.to_string()),
        }
    }
}

impl From<VariationalError> for Fail {
    fn from(e: VariationalError) -> Self {
        match e {
            VariationalError::Space(s) => s.into(),
            VariationalError::Order(o) => o.into(),
            other => Fail::Error(other.to_string()),
        }
    }
}

impl From<FixError> for Fail {
    fn from(e: FixError) -> Self {
        match &e {
            FixError::NotStrictlyNonexpansive(w) | FixError::NotContractive(w) => {
                Fail::invalid(&e, to_values(std::slice::from_ref(w)))
            }
            FixError::AlphaNotBelowOne(_)
            | FixError::NotARootModP
            | FixError::SingularSeed
            | FixError::AffineNotContracting(_) => Fail::invalid(&e, vec![]),
            FixError::Space(s) => s.clone().into(),
            FixError::Model(m) => m.clone().into(),
            _ => Fail::Error(e.to_string()),
        }
    }
}

fn to_values<T: Serialize>(items: &[T]) -> Vec<Value> {
    items.iter().map(|x| serde_json::to_value(x).expect("serializable")).collect()
}

fn report(command: &str, status: Status, payload: Value, witnesses: Vec<Value>) -> String {
    let mut doc = json!({
        "format": REPORT_FORMAT,
        "command": command,
        "status": status,
        "payload": payload,
    });
    if !witnesses.is_empty() {
        doc["witnesses"] = Value::Array(witnesses);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    text
}

/// Parses `argv` (including the program name) and executes the command.
pub fn run<I, T>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return (0, e.to_string());
            }
            let payload = json!({
                "message": e.render().to_string(),
                "usage": Cli::command().render_usage().to_string(),
            });
            return (2, report("usage", Status::Error, payload, vec![]));
        }
    };
    let name = command_name(&cli.command);
    if let Command::Gen(gen) = &cli.command {
        return match run_gen(gen) {
            Ok(text) => (0, text),
            Err(e) => (2, report(name, Status::Error, json!({ "message": e.to_string() }), vec![])),
        };
    }
    match dispatch(&cli.command, cli.recheck) {
        Ok(payload) => (0, report(name, Status::Ok, payload, vec![])),
        Err(Fail::Invalid { message, witnesses }) => {
            (Status::Invalid.code(), report(name, Status::Invalid, json!({ "message": message }), witnesses))
        }
        Err(Fail::Error(message)) => {
            (Status::Error.code(), report(name, Status::Error, json!({ "message": message }), vec![]))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Check { .. } => "check",
        Command::Balls(BallsCommand::Compare { .. }) => "balls compare",
        Command::Chain { .. } => "chain",
        Command::Maximal { .. } => "maximal",
        Command::Evp { .. } => "evp",
        Command::EvpVerify { .. } => "evp-verify",
        Command::Fixpoint { .. } => "fixpoint",
        Command::Banach { .. } => "banach",
        Command::Hensel(_) => "hensel",
        Command::Gen(_) => "gen",
    }
}

fn dispatch(c: &Command, recheck: bool) -> Result<Value, Fail> {
    match c {
        Command::Check { space } => cmd_check(space),
        Command::Balls(BallsCommand::Compare { space, c1, r1, c2, r2 }) => {
            cmd_compare(space, (c1, r1), (c2, r2), recheck)
        }
        Command::Chain { space, chain } => cmd_chain(space, chain, recheck),
        Command::Maximal { order, start, rule } => cmd_maximal(order, *start, *rule, recheck),
        Command::Evp { weighted, start, metric } => cmd_evp(weighted, start, *metric, recheck),
        Command::EvpVerify { weighted, u, v, metric } => cmd_evp_verify(weighted, u, v, *metric),
        Command::Fixpoint { space, map, start } => cmd_fixpoint(space, map, start.as_deref(), recheck),
        Command::Banach { space, map, alpha, start, tol } => {
            cmd_banach(space, map, alpha, start.as_deref(), tol, recheck)
        }
        Command::Hensel(args) => cmd_hensel(args, recheck),
        Command::Gen(_) => unreachable!("handled by run"),
    }
}

fn recheck_failed(what: &str) -> Fail {
    Fail::Error(format!("recheck failed: {what}"))
}

/// Loads a space file, or a dendrogram file when the document has `merges`.
fn load_space(path: &Path) -> Result<FiniteUltraSpace, Fail> {
    let raw: Value = read_json(path)?;
    let parse_err = |e: serde_json::Error| Fail::Error(format!("cannot parse {}: {e}", path.display()));
    if raw.get("merges").is_some() {
        let file: DendrogramFile = serde_json::from_value(raw).map_err(parse_err)?;
        return Ok(dendrogram_to_space(&file.into())?);
    }
    let file: SpaceFile = serde_json::from_value(raw).map_err(parse_err)?;
    Ok(FiniteUltraSpace::from_matrix(file.into_matrix()?)?)
}

fn load_weighted(path: &Path, metric: bool) -> Result<WeightedSpace, Fail> {
    let file: WeightedFile = read_json(path)?;
    let matrix = DistMatrix::new(file.labels, file.dist)?;
    let w = if metric {
        WeightedSpace::from_metric(matrix, file.phi)?
    } else {
        WeightedSpace::new(&FiniteUltraSpace::from_matrix(matrix)?, file.phi)?
    };
    Ok(w)
}

fn ball_json(b: &ClosedBall<'_>) -> Value {
    json!({
        "center": b.space().label(b.center()),
        "radius": b.radius(),
        "members": b.member_labels(),
    })
}

fn cmd_check(path: &Path) -> Result<Value, Fail> {
    let space = load_space(path)?;
    Ok(json!({
        "points": space.len(),
        "labels": space.labels(),
        "distance_values": space.distance_values(),
    }))
}

fn cmd_compare(path: &Path, first: (&String, &Dist), second: (&String, &Dist), recheck: bool) -> Result<Value, Fail> {
    let space = load_space(path)?;
    let b1 = space.ball_named(first.0, first.1.clone())?;
    let b2 = space.ball_named(second.0, second.1.clone())?;
    let relation = ball_compare(&b1, &b2)?;
    if recheck {
        let mirrored = match relation {
            BallRelation::FirstInsideSecond => BallRelation::SecondInsideFirst,
            BallRelation::SecondInsideFirst => BallRelation::FirstInsideSecond,
            r => r,
        };
        if ball_compare(&b2, &b1)? != mirrored {
            return Err(recheck_failed("comparison is not symmetric"));
        }
        let strict = match relation {
            BallRelation::FirstInsideSecond => Some((&b1, &b2)),
            BallRelation::SecondInsideFirst => Some((&b2, &b1)),
            _ => None,
        };
        if let Some((inner, outer)) = strict {
            if !strict_inclusion_implies_smaller_radius(inner, outer)? {
                return Err(recheck_failed("strict inclusion without smaller radius"));
            }
        }
        for b in [&b1, &b2] {
            for y in b.members().ones() {
                if !recenter_invariance(b, y)? {
                    return Err(recheck_failed("ball changes under recentering"));
                }
            }
        }
    }
    Ok(json!({ "first": ball_json(&b1), "second": ball_json(&b2), "relation": relation }))
}

fn cmd_chain(space_path: &Path, chain_path: &Path, recheck: bool) -> Result<Value, Fail> {
    let space = load_space(space_path)?;
    let file: ChainFile = read_json(chain_path)?;
    let balls = file
        .chain
        .into_iter()
        .map(|(c, r)| space.ball_named(&c, r))
        .collect::<Result<Vec<_>, _>>()?;
    let result = intersect_ball_chain(&balls)?;
    let members: Vec<&str> = result.members.ones().map(|i| space.label(i)).collect();
    if recheck {
        let ok = result.witness.is_some_and(|w| balls.iter().all(|b| b.contains(w)));
        if !ok {
            return Err(recheck_failed("witness is not in every ball"));
        }
    }
    Ok(json!({
        "balls": balls.iter().map(ball_json).collect::<Vec<_>>(),
        "distinct_balls": result.distinct_balls,
        "intersection": members,
        "witness": result.witness.map(|w| space.label(w)),
    }))
}

fn cmd_maximal(path: &Path, start: usize, rule: Rule, recheck: bool) -> Result<Value, Fail> {
    let file: OrderFile = read_json(path)?;
    match (file.leq, file.lt) {
        (Some(leq), None) => {
            let phi = file.phi.ok_or_else(|| Fail::Error("order file with \"leq\" needs \"phi\"".into()))?;
            let q = validate_quasiorder(file.n, bits(leq), phi)?;
            let rule = match rule {
                Rule::MinimalWeight => SuccessorRule::MinimalWeight,
                Rule::FirstAdmissible => SuccessorRule::FirstAdmissible,
            };
            let r = bb_maximal_with(&q, start, rule)?;
            if recheck {
                r.verify(&q).map_err(|e| recheck_failed(&e))?;
                if !brute_maximal_set(&q).contains(&r.element) {
                    return Err(recheck_failed("element is not maximal by definition"));
                }
            }
            Ok(json!({
                "order": "quasi",
                "rule": rule,
                "start": start,
                "element": r.element,
                "chain": r.chain,
                "steps": r.steps,
                "weight": q.phi()[r.element],
            }))
        }
        (None, Some(lt)) => {
            let s = validate_strict_order(file.n, bits(lt), file.phi)?;
            let element = zorn_maximal(&s, start)?;
            if recheck && !s.strict_section_empty(element) {
                return Err(recheck_failed("element has a strict successor"));
            }
            Ok(json!({
                "order": "strict",
                "start": start,
                "element": element,
                "weight": s.phi()[element],
            }))
        }
        _ => Err(Fail::Error("order file needs exactly one of \"leq\" and \"lt\"".into())),
    }
}

fn cmd_evp(path: &Path, start: &str, metric: bool, recheck: bool) -> Result<Value, Fail> {
    let w = load_weighted(path, metric)?;
    let m = w.matrix();
    let u = m.index_of(start)?;
    let r = evp_point(&w, u)?;
    if !r.holds() || (recheck && !evp_verify(&w, u, r.point)) {
        return Err(recheck_failed("Ekeland conditions do not hold"));
    }
    let separation: Vec<Value> =
        r.separation.iter().map(|c| json!({ "x": m.label(c.x), "holds": c.holds })).collect();
    Ok(json!({
        "start": m.label(u),
        "point": m.label(r.point),
        "phi_start": w.phi()[u],
        "phi_point": w.phi()[r.point],
        "descent": r.descent,
        "separation": separation,
        "chain": r.chain.iter().map(|&i| m.label(i)).collect::<Vec<_>>(),
    }))
}

fn cmd_evp_verify(path: &Path, u: &str, v: &str, metric: bool) -> Result<Value, Fail> {
    let w = load_weighted(path, metric)?;
    let m = w.matrix();
    let (u, v) = (m.index_of(u)?, m.index_of(v)?);
    if evp_verify(&w, u, v) {
        return Ok(json!({ "u": m.label(u), "v": m.label(v), "holds": true }));
    }
    let mut witnesses = Vec::new();
    if !brondsted_leq(&w, u, v) {
        witnesses.push(json!({ "condition": "descent", "u": m.label(u), "v": m.label(v) }));
    }
    if let Some(x) = (0..w.len()).find(|&x| x != v && brondsted_leq(&w, v, x)) {
        witnesses.push(json!({ "condition": "separation", "v": m.label(v), "x": m.label(x) }));
    }
    Err(Fail::invalid(format!("({}, {}) is not an Ekeland pair", m.label(u), m.label(v)), witnesses))
}

fn load_map(space: &Path, map: &Path) -> Result<SelfMapTable, Fail> {
    let space = load_space(space)?;
    let file: MapFile = read_json(map)?;
    Ok(SelfMapTable::new(space, file.image)?)
}

fn start_point(map: &SelfMapTable, start: Option<&str>) -> Result<usize, Fail> {
    Ok(match start {
        Some(label) => map.space().index_of(label)?,
        None => 0,
    })
}

fn labelled_result(map: &SelfMapTable, r: &FixResult<usize>) -> Value {
    let s = map.space();
    let chain: Vec<Value> = r
        .certificate
        .chain
        .iter()
        .map(|b| json!({ "center": s.label(b.center), "radius": b.radius }))
        .collect();
    json!({
        "point": s.label(r.point),
        "iterations": r.iterations,
        "uniqueness": r.uniqueness,
        "unique": r.uniqueness.unique(),
        "certificate": { "chain": chain, "final_point": s.label(r.certificate.final_point) },
    })
}

fn cmd_fixpoint(space: &Path, map: &Path, start: Option<&str>, recheck: bool) -> Result<Value, Fail> {
    let map = load_map(space, map)?;
    let start = start_point(&map, start)?;
    let r = ultra_fixpoint(&map, start)?;
    if recheck {
        r.certificate.verify_on(&map).map_err(|e| recheck_failed(&e.to_string()))?;
    }
    Ok(labelled_result(&map, &r))
}

fn cmd_banach(
    space: &Path,
    map: &Path,
    alpha: &Dist,
    start: Option<&str>,
    tol: &Dist,
    recheck: bool,
) -> Result<Value, Fail> {
    let map = load_map(space, map)?;
    let start = start_point(&map, start)?;
    let r = banach_fixpoint(&map, alpha, start, tol)?;
    if recheck {
        if !r.rate_holds() {
            return Err(recheck_failed("geometric rate violated"));
        }
        if r.exact {
            r.fix.certificate.verify_on(&map).map_err(|e| recheck_failed(&e.to_string()))?;
        }
    }
    let mut payload = labelled_result(&map, &r.fix);
    payload["alpha"] = json!(alpha);
    payload["exact"] = json!(r.exact);
    payload["rate"] = serde_json::to_value(&r.rate).expect("serializable");
    Ok(payload)
}

fn parse_poly(text: &str) -> Result<Vec<i64>, Fail> {
    text.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| Fail::Error(format!("bad coefficient `{}`: {e}", t.trim()))))
        .collect()
}

fn cmd_hensel(args: &HenselArgs, recheck: bool) -> Result<Value, Fail> {
    let base: Option<PolyFile> = args.spec.as_deref().map(read_json).transpose()?;
    let missing = |what: &str| Fail::Error(format!("missing --{what} (or a spec file)"));
    let p = args.p.or(base.as_ref().map(|b| b.p)).ok_or_else(|| missing("p"))?;
    let precision = args.precision.or(base.as_ref().map(|b| b.precision)).ok_or_else(|| missing("precision"))?;
    let poly = match &args.poly {
        Some(text) => parse_poly(text)?,
        None => base.as_ref().map(|b| b.poly.clone()).ok_or_else(|| missing("poly"))?,
    };
    let x0 = args.x0.or(base.as_ref().map(|b| b.x0)).ok_or_else(|| missing("x0"))?;
    let mode = match args.mode {
        Some(Mode::Newton) => MapMode::Newton,
        Some(Mode::Affine) => MapMode::Affine,
        None => base.as_ref().map_or(MapMode::Newton, |b| b.mode),
    };
    let model = PAdicModel::new(p, precision)?;
    let map = PolyMap { model, coefficients: poly.clone(), mode };
    let r = map.solve(x0)?;
    if recheck {
        let step = |x: u64| map.apply(x).unwrap_or(x.wrapping_add(1));
        r.certificate.verify_padic(&model, step).map_err(|e| recheck_failed(&e.to_string()))?;
        if mode == MapMode::Newton && map.eval(r.point) != 0 {
            return Err(recheck_failed("value is not a root"));
        }
    }
    let DescentCertificate { chain, final_point } = &r.certificate;
    let chain: Vec<Value> = chain
        .iter()
        .map(|CertificateBall { center, radius }| json!({ "center": center, "radius": radius }))
        .collect();
    Ok(json!({
        "p": p,
        "precision": precision,
        "modulus": model.modulus(),
        "poly": poly,
        "x0": x0,
        "mode": mode,
        "root": r.point,
        "iterations": r.iterations,
        "uniqueness": r.uniqueness,
        "certificate": { "chain": chain, "final_point": final_point },
    }))
}

fn run_gen(gen: &GenCommand) -> Result<String, String> {
    let space = match gen {
        GenCommand::Random { n, seed } => random_space(*n, *seed).map_err(|e| e.to_string())?,
        GenCommand::Padic { p, precision } => {
            let model = PAdicModel::new(*p, *precision).map_err(|e| e.to_string())?;
            padic_space(&model, DEFAULT_CARRIER_BOUND).map_err(|e| e.to_string())?
        }
        GenCommand::Discrete { n } => discrete_space(*n).map_err(|e| e.to_string())?,
    };
    let mut text = serde_json::to_string_pretty(&SpaceFile::from_space(&space)).expect("serializable");
    text.push('\n');
    Ok(text)
}
