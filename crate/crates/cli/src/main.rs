//! `qnets`: generate nets, run transforms and verification suites, export
//! geometry.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage or input error.

mod export;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use qnets::cyclide;
use qnets::inscribed::{self, ConstrainedSeed, ExtensionReport, InscribedNetJson};
use qnets::lie::{self, OrientedPlane};
use qnets::moebius::{self, CircularNet, CircularNetJson, ConstraintPair, MoebiusSpace};
use qnets::projlin::{self, Quadric};
use qnets::qnet::{self, Direction, QNet, QNetJson};
use qnets::sample;
use qnets::suite::{self, Suite, SuiteConfig};
use qnets::GeomError;

#[derive(Parser)]
#[command(name = "qnets", version, about = "Conjugate nets in quadrics: constructions, Laplace transforms, verification suites")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Seed of the random generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative singular value below which rank decisions count as zero.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Trials per randomized check group (overrides the suite defaults).
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    rows: Option<usize>,
    #[arg(long, global = true)]
    cols: Option<usize>,
    /// Dimension of the ambient space.
    #[arg(long, global = true)]
    ambient: Option<usize>,
    /// Input file.
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Obj,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random generic net: qnet, inscribed, circular:<pair> or pce.
    Gen {
        kind: String,
        /// Circular net to extend to contact elements (pce).
        #[arg(long)]
        from: Option<PathBuf>,
        /// Seed plane "v_1,...,v_n,d" of {x : <v, x> = d} (pce); moved along
        /// its normal to P(0,0) when it misses it.
        #[arg(long, allow_hyphen_values = true)]
        plane: Option<String>,
    },
    /// Laplace transform of a net.
    Laplace {
        #[arg(long, value_enum, default_value_t = Dir::A)]
        dir: Dir,
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// Verification suite: laplace, thm11, extend, envelope, lie, cyclide or all.
    Verify { suite: String },
    /// Extension of a random inscribed net with d-dimensional parameter lines.
    Extend {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        steps: usize,
    },
    /// Generations of the Darboux cyclide of a pencil through the Möbius quadric.
    Cyclide,
    /// OBJ polylines of the parameter lines and fitted-object JSON.
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dir {
    A,
    B,
}

/// Settings shared by every subcommand.
struct RunConfig {
    seed: u64,
    tol: Option<f64>,
    trials: Option<usize>,
    out: Option<PathBuf>,
    format: Format,
}

enum Failure {
    Usage(String),
    Verification,
}

impl From<GeomError> for Failure {
    fn from(e: GeomError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = RunConfig {
        seed: cli.run.seed,
        tol: cli.run.tol,
        trials: cli.run.trials,
        out: cli.run.out.clone(),
        format: cli.run.format,
    };
    if let Some(t) = cfg.tol {
        if !(t > 0.0 && t < 1.0) {
            eprintln!("error: --tol must lie in (0, 1)");
            return ExitCode::from(2);
        }
        projlin::set_rank_tol(t);
    }
    let a = &cli.run;
    let res = match &cli.cmd {
        Cmd::Gen { kind, from, plane } => gen(&cfg, a, kind, from.as_deref(), plane.as_deref()),
        Cmd::Laplace { dir, steps } => laplace(&cfg, a, *dir, *steps),
        Cmd::Verify { suite } => verify(&cfg, a, suite),
        Cmd::Extend { dim, steps } => extend(&cfg, a, *dim, *steps),
        Cmd::Cyclide => cyclide_cmd(&cfg, a),
        Cmd::Export => export_cmd(&cfg, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

// ---------------------------------------------------------------------------
// io

fn emit_text(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Failure::Usage(e.to_string()))
}

fn emit_json<T: Serialize>(cfg: &RunConfig, v: &T) -> Outcome {
    emit_text(cfg.out.as_deref(), &to_json(v)?)
}

fn read_json(path: Option<&Path>) -> Result<Value, Failure> {
    let path = path.ok_or_else(|| Failure::Usage("missing --in".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("malformed JSON in {}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| Failure::Usage(format!("malformed {what}: {e}")))
}

/// A net read from disk: Euclidean vertices (`points`) or projective ones
/// (`vertices`).
enum AnyNet {
    Circular(CircularNet),
    Projective(QNet),
}

fn read_net(path: Option<&Path>) -> Result<AnyNet, Failure> {
    let v = read_json(path)?;
    if v.get("points").is_some() {
        let j: CircularNetJson = parse(v, "circular net")?;
        Ok(AnyNet::Circular(CircularNet::from_json(&j)?))
    } else if v.get("vertices").is_some() {
        let j: QNetJson = parse(v, "net")?;
        Ok(AnyNet::Projective(QNet::from_json(&j)?))
    } else {
        Err(Failure::Usage("input is neither a net with `points` nor one with `vertices`".into()))
    }
}

fn require_json(cfg: &RunConfig, cmd: &str) -> Outcome {
    if cfg.format != Format::Json {
        return Err(Failure::Usage(format!("{cmd} writes JSON only")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gen

fn gen(cfg: &RunConfig, a: &RunArgs, kind: &str, from: Option<&Path>, plane: Option<&str>) -> Outcome {
    let mut rng = sample::rng(cfg.seed);
    let rows = a.rows.unwrap_or(4);
    let cols = a.cols.unwrap_or(4);
    match kind {
        "qnet" => {
            let net = qnet::random_qnet(rows, cols, a.ambient.unwrap_or(3), &mut rng)?;
            eprintln!("qnet {}x{} in RP^{}: planarity residual {:e}", rows, cols, net.ambient(), qnet::planarity_residual(&net));
            write_net(cfg, &AnyNet::Projective(net))
        }
        "inscribed" => {
            let n = a.ambient.unwrap_or(3);
            let q = sample::random_indefinite_quadric(n, &mut rng);
            let net = inscribed::random_inscribed_net(rows, cols, &q, &mut rng)?;
            eprintln!(
                "inscribed {}x{} in RP^{}: planarity residual {:e}, incidence residual {:e}",
                rows,
                cols,
                n,
                qnet::planarity_residual(&net.net),
                net.incidence_residual
            );
            if cfg.format == Format::Obj {
                return write_net(cfg, &AnyNet::Projective(net.net));
            }
            emit_json(cfg, &net.to_json())
        }
        "pce" => {
            let v = read_json(from)?;
            let j: CircularNetJson = parse(v, "circular net")?;
            let net = CircularNet::from_json(&j)?;
            let (pce, rep) = match plane {
                Some(s) => {
                    let plane = parse_plane(s, net.n())?;
                    let p0 = net.point(0, 0);
                    let v = nalgebra::DVector::from_column_slice(&plane.v);
                    let miss = (v.dot(p0) - plane.d).abs();
                    let plane = if miss > 1e-12 * (1.0 + p0.norm()) {
                        eprintln!("note: seed plane moved by {miss:e} along its normal to pass through P(0,0)");
                        OrientedPlane::through(p0, &v)?
                    } else {
                        plane
                    };
                    lie::extend_to_pce(&net, &plane)?
                }
                None => lie::random_pce(&net, &mut rng)?,
            };
            eprintln!(
                "pce {}x{}: path residual {:e}, isotropy {:e}, contact residual {:e}",
                net.rows(),
                net.cols(),
                rep.path_residual,
                rep.isotropy,
                rep.contact_residual
            );
            require_json(cfg, "gen pce")?;
            emit_json(cfg, &pce.to_json()?)
        }
        _ => {
            let name = kind
                .strip_prefix("circular:")
                .ok_or_else(|| Failure::Usage(format!("unknown kind '{kind}' (qnet, inscribed, circular:<pair>, pce)")))?;
            let entry = moebius::pair_table().into_iter().find(|s| s.name == name);
            let pair = match entry {
                Some(s) => s.pair,
                None => ConstraintPair::parse(name)?,
            };
            let n = a.ambient.or(entry.map(|s| s.ambients[0])).unwrap_or(2);
            let space = MoebiusSpace::new(n)?;
            let (net, report) = moebius::construct(&space, pair, a.rows.unwrap_or(6), a.cols.unwrap_or(6), &mut rng)?;
            eprintln!(
                "circular {} {}x{} in R^{}: circularity residual {:e}, worst corner certificate {:e}",
                pair.name(),
                net.rows(),
                net.cols(),
                n,
                net.circularity_residual(),
                report.worst_corner()
            );
            write_net(cfg, &AnyNet::Circular(net))
        }
    }
}

fn parse_plane(s: &str, n: usize) -> Result<OrientedPlane, Failure> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad number '{t}' in --plane"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != n + 1 {
        return Err(Failure::Usage(format!("--plane needs {} values (normal and offset), got {}", n + 1, vals.len())));
    }
    Ok(OrientedPlane::new(&nalgebra::DVector::from_column_slice(&vals[..n]), vals[n])?)
}

fn write_net(cfg: &RunConfig, net: &AnyNet) -> Outcome {
    match cfg.format {
        Format::Obj => emit_text(cfg.out.as_deref(), &export::obj(net)),
        Format::Json => match net {
            AnyNet::Circular(c) => emit_json(cfg, &c.to_json()),
            AnyNet::Projective(q) => emit_json(cfg, &q.to_json()),
        },
    }
}

// ---------------------------------------------------------------------------
// laplace

fn laplace(cfg: &RunConfig, a: &RunArgs, dir: Dir, steps: usize) -> Outcome {
    let net = match read_net(a.input.as_deref())? {
        AnyNet::Projective(q) => q,
        AnyNet::Circular(c) => c.lift().clone(),
    };
    let d = match dir {
        Dir::A => Direction::A,
        Dir::B => Direction::B,
    };
    let out = qnet::laplace_power(&net, d, steps)?;
    eprintln!(
        "L_{:?}^{} of a {}x{} net: {}x{}, planarity residual {:e}",
        d,
        steps,
        net.rows(),
        net.cols(),
        out.rows(),
        out.cols(),
        qnet::planarity_residual(&out)
    );
    write_net(cfg, &AnyNet::Projective(out))
}

// ---------------------------------------------------------------------------
// verify

fn verify(cfg: &RunConfig, a: &RunArgs, name: &str) -> Outcome {
    require_json(cfg, "verify")?;
    let which = Suite::parse(name)
        .ok_or_else(|| Failure::Usage(format!("unknown suite '{name}' (laplace, thm11, extend, envelope, lie, cyclide, all)")))?;
    if let Some(path) = a.input.as_deref() {
        if which != Suite::Envelope {
            return Err(Failure::Usage("--in is supported by `verify envelope` only".into()));
        }
        return verify_envelope_file(cfg, path);
    }
    let report = suite::run_suite(which, &SuiteConfig { seed: cfg.seed, trials: cfg.trials });
    for c in &report.criteria {
        eprintln!("criterion {} {}: {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.name);
        for k in c.checks.iter().filter(|k| !k.pass) {
            eprintln!(
                "    {}: worst {} ({} {:e}), {} of {} samples violate",
                k.name,
                k.worst.map_or("none".to_string(), |w| format!("{w:e}")),
                k.bound,
                k.threshold,
                k.violations,
                k.samples
            );
        }
        for m in &c.error_messages {
            eprintln!("    error: {m}");
        }
    }
    emit_json(cfg, &report)?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn verify_envelope_file(cfg: &RunConfig, path: &Path) -> Outcome {
    let net = match read_net(Some(path))? {
        AnyNet::Circular(c) => c,
        AnyNet::Projective(_) => return Err(Failure::Usage("verify envelope needs a circular net".into())),
    };
    let pair = net.constraints().ok_or_else(|| Failure::Usage("the net carries no `constraints`".into()))?;
    let report = match moebius::verify_envelope(&net, pair) {
        Ok(r) => r,
        Err(e @ GeomError::Hypothesis(_)) => {
            eprintln!("hypotheses fail: {e}");
            return Err(Failure::Verification);
        }
        Err(e) => return Err(e.into()),
    };
    let width = report.claims.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.claims {
        eprintln!("{:<width$}  {:>12.3e}  < {:.0e}  {}", c.name, c.residual, c.threshold, if c.pass { "pass" } else { "FAIL" });
    }
    emit_json(cfg, &report)?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

// ---------------------------------------------------------------------------
// extend

#[derive(Serialize)]
struct ExtendOutput {
    d: usize,
    net: InscribedNetJson,
    steps: Vec<ExtensionReport>,
}

fn extend(cfg: &RunConfig, a: &RunArgs, d: usize, steps: usize) -> Outcome {
    require_json(cfg, "extend")?;
    let n = match (a.ambient, d) {
        (Some(n), _) => n,
        (None, 1) => 5,
        (None, 2) => 4,
        (None, d) => 2 * d,
    };
    let mut rng = sample::rng(cfg.seed);
    let seed = ConstrainedSeed::random(d, n, steps, &mut rng)?;
    let (net, reports) = inscribed::extend_all(&seed)?;
    let mut ok = true;
    for (k, r) in reports.iter().enumerate() {
        let pass = r.new_incidence < 1e-8 && r.x_drift.max(r.y_drift) < 1e-7 && r.dims_exact();
        ok &= pass;
        eprintln!(
            "step {}: incidence {:e}, X/Y drift {:e}, excess dimension {:e} {}",
            k + 1,
            r.new_incidence,
            r.x_drift.max(r.y_drift),
            r.excess_dim,
            if pass { "pass" } else { "FAIL" }
        );
    }
    emit_json(cfg, &ExtendOutput { d, net: net.to_json(), steps: reports })?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

// ---------------------------------------------------------------------------
// cyclide

fn read_quadric(path: &Path) -> Result<Quadric, Failure> {
    let v = read_json(Some(path))?;
    let rows = match &v {
        Value::Array(_) => v.clone(),
        Value::Object(o) => o
            .get("quadric")
            .or_else(|| o.get("form"))
            .cloned()
            .ok_or_else(|| Failure::Usage("expected a matrix or an object with `quadric` or `form`".into()))?,
        _ => return Err(Failure::Usage("expected a symmetric matrix".into())),
    };
    let rows: Vec<Vec<f64>> = parse(rows, "matrix")?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Failure::Usage("the form must be a non-empty square matrix".into()));
    }
    Ok(Quadric::new(nalgebra::DMatrix::from_fn(d, d, |r, c| rows[r][c]))?)
}

fn cyclide_cmd(cfg: &RunConfig, a: &RunArgs) -> Outcome {
    let mut rng = sample::rng(cfg.seed);
    let q = match a.input.as_deref() {
        Some(p) => read_quadric(p)?,
        None => sample::random_quadric(a.ambient.unwrap_or(3) + 1, 1, &mut rng),
    };
    let n = q.ambient().checked_sub(1).filter(|&n| n >= 1).ok_or_else(|| Failure::Usage("the form is too small".into()))?;
    let space = MoebiusSpace::new(n)?;
    let c = cyclide::analyze_cyclide(&q, &space)?;
    let pass = c.conjugacy < cyclide::CONJUGACY_TOL && c.confocality < cyclide::CONFOCAL_TOL && c.real_count <= n + 2;
    eprintln!(
        "cyclide in R^{n}: {} real and {} complex generations, apex conjugacy {:e}, confocality {:e} {}",
        c.real_count,
        c.complex_count,
        c.conjugacy,
        c.confocality,
        if pass { "pass" } else { "FAIL" }
    );
    match cfg.format {
        Format::Json => emit_json(cfg, &c)?,
        Format::Obj => emit_text(cfg.out.as_deref(), &export::cyclide_obj(&space, &c, &mut rng)?)?,
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

// ---------------------------------------------------------------------------
// export

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn export_cmd(cfg: &RunConfig, a: &RunArgs) -> Outcome {
    let net = read_net(a.input.as_deref())?;
    let objects = export::fitted_objects(&net);
    match (&cfg.out, cfg.format) {
        (Some(p), Format::Obj) => {
            emit_text(Some(p), &export::obj(&net))?;
            let side = p.with_extension("fitted.json");
            if a.input.as_deref().is_some_and(|i| same_file(i, &side)) {
                return Err(Failure::Usage(format!("{} would overwrite the input", side.display())));
            }
            emit_text(Some(&side), &to_json(&objects)?)?;
            eprintln!("wrote {} and {}", p.display(), side.display());
            Ok(())
        }
        (_, Format::Obj) => emit_text(cfg.out.as_deref(), &export::obj(&net)),
        (_, Format::Json) => emit_json(cfg, &objects),
    }
}
