use std::fmt::{Display, Write as _};
use std::io::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use surromip::formulator::{embed_predictor, EmbedOptions, ReluFormulation};
use surromip::io::{read_model_file, write_model_file};
use surromip::mip::{MipModel, ObjSense, DEFAULT_FEASTOL};
use surromip::predictor::{load_predictor, Head};
use surromip::solve::{bb_solve, SolveLimits, SolveStatus};
use surromip::surrogatelib::{fabricate_predictor, generate_instance, FabricateSpec, Family, InstanceRecipe, PredictorKind};
use surromip::verify::check_exactness_with_tol;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_LIMIT: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "surromip", version, about = "Embed predictors into MIPs, generate instances, solve and verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the standalone embedding of a predictor as an LP or MPS file.
    Formulate(FormulateArgs),
    /// Generate one instance and its manifest.
    Generate(GenerateArgs),
    /// Solve a model file with the built-in branch and bound.
    Solve(SolveArgs),
    /// Run the exactness harness on a predictor.
    Verify(VerifyArgs),
    /// Write a seeded synthetic predictor as interchange JSON.
    Fabricate(FabricateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Formulation {
    Bigm,
    Sos1,
}

impl From<Formulation> for ReluFormulation {
    fn from(f: Formulation) -> Self {
        match f {
            Formulation::Bigm => ReluFormulation::Bigm,
            Formulation::Sos1 => ReluFormulation::Sos1,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Goal {
    None,
    Min,
    Max,
}

#[derive(clap::Args, Debug)]
struct FormulateArgs {
    #[arg(long)]
    predictor: PathBuf,
    /// JSON array of `[lb, ub]` pairs, one per input.
    #[arg(long)]
    input_bounds: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bigm")]
    formulation: Formulation,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Output file; `.mps` selects MPS, anything else LP.
    #[arg(long)]
    out: PathBuf,
    /// Optimise one output of the predictor.
    #[arg(long, value_enum, default_value = "none")]
    objective: Goal,
    #[arg(long, default_value_t = 0)]
    objective_output: usize,
    #[arg(long, default_value = "p")]
    prefix: String,
}

#[derive(clap::Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    family: String,
    /// Problem parameters joined by `-` or `,`; family defaults when omitted.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    predictor_kind: String,
    #[arg(long)]
    predictor_params: Option<String>,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    max_nodes: usize,
    #[arg(long, default_value_t = 3600.0)]
    max_seconds: f64,
    /// Omit the timing line (or field) so output is byte-stable.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    predictor: PathBuf,
    /// Sampling box; `[-1, 1]` per input when omitted.
    #[arg(long)]
    input_bounds: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bigm")]
    formulation: Formulation,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args, Debug)]
struct FabricateArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 2)]
    inputs: usize,
    #[arg(long, default_value_t = 1)]
    outputs: usize,
    /// Apply an argmax head to the scores.
    #[arg(long)]
    argmax: bool,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lb: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    ub: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

fn invalid(e: impl Display) -> Failure {
    Failure { code: EXIT_VALIDATION, message: e.to_string() }
}

type Outcome = Result<u8, Failure>;

/// Write to stdout, treating a closed pipe as success.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn feastol() -> Result<f64, Failure> {
    match std::env::var("SURROMIP_FEASTOL") {
        Err(_) => Ok(DEFAULT_FEASTOL),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
            _ => Err(invalid(format!("SURROMIP_FEASTOL must be a non-negative number, got `{s}`"))),
        },
    }
}

fn parse_list(s: Option<&str>) -> Result<Option<Vec<usize>>, Failure> {
    let Some(s) = s else { return Ok(None) };
    let s = s.trim();
    if s.is_empty() || s == "-" {
        return Ok(Some(Vec::new()));
    }
    s.split(['-', ','])
        .map(|t| t.trim().parse::<usize>().map_err(|_| invalid(format!("bad parameter `{t}` in `{s}`"))))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn read_bounds(path: &Path, dim: usize) -> Result<Vec<(f64, f64)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let pairs: Vec<(f64, f64)> =
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: expected [[lb, ub], ...]: {e}", path.display())))?;
    if pairs.len() != dim {
        return Err(invalid(format!("{}: {} bounds for {dim} inputs", path.display(), pairs.len())));
    }
    if let Some((i, b)) = pairs.iter().enumerate().find(|(_, b)| !(b.0 <= b.1)) {
        return Err(invalid(format!("{}: input {i} has bounds [{}, {}]", path.display(), b.0, b.1)));
    }
    Ok(pairs)
}

fn check_epsilon(eps: f64) -> Result<(), Failure> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("--epsilon must be finite and >= 0, got {eps}")))
    }
}

fn formulate(a: FormulateArgs) -> Outcome {
    check_epsilon(a.epsilon)?;
    let p = load_predictor(&a.predictor).map_err(|e| invalid(format!("{}: {e}", a.predictor.display())))?;
    if a.objective != Goal::None && a.objective_output >= p.output_dim() {
        return Err(invalid(format!("--objective-output {} but the predictor has {} outputs", a.objective_output, p.output_dim())));
    }
    let n = p.input_dim();
    let bounds = match &a.input_bounds {
        Some(path) => read_bounds(path, n)?,
        None => vec![(f64::NEG_INFINITY, f64::INFINITY); n],
    };
    let mut model = MipModel::new();
    let inputs = bounds
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| model.add_continuous(lo, hi, format!("x{i}")))
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    let opts = EmbedOptions::default()
        .with_formulation(a.formulation.into())
        .with_epsilon(a.epsilon)
        .with_prefix(a.prefix);
    let e = embed_predictor(&mut model, &p, &inputs, None, &opts).map_err(invalid)?;
    match a.objective {
        Goal::None => {}
        Goal::Min | Goal::Max => {
            let sense = if a.objective == Goal::Min { ObjSense::Minimize } else { ObjSense::Maximize };
            model.set_objective(sense, &[(e.output_vars[a.objective_output], 1.0)], 0.0).map_err(invalid)?;
        }
    }
    write_model_file(&model, &a.out).map_err(|e| invalid(format!("{}: {e}", a.out.display())))?;
    let st = model.stats();
    println!("wrote {} ({} vars, {} constraints)", a.out.display(), st.vars(), st.constraints());
    Ok(0)
}

fn generate(a: GenerateArgs) -> Outcome {
    let family: Family = a.family.parse().map_err(invalid)?;
    let kind: PredictorKind = a.predictor_kind.parse().map_err(invalid)?;
    let mut recipe = InstanceRecipe::new(family, kind, a.data_seed, a.train_seed);
    if let Some(p) = parse_list(a.params.as_deref())? {
        recipe = recipe.with_params(p);
    }
    if let Some(p) = parse_list(a.predictor_params.as_deref())? {
        recipe = recipe.with_predictor_params(p);
    }
    let inst = generate_instance(&recipe).map_err(invalid)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| invalid(format!("{}: {e}", a.out_dir.display())))?;
    let model_path = a.out_dir.join(&inst.name);
    let manifest_path = model_path.with_extension("json");
    write_model_file(&inst.model, &model_path).map_err(|e| invalid(format!("{}: {e}", model_path.display())))?;
    fs::write(&manifest_path, inst.manifest.to_json() + "\n")
        .map_err(|e| invalid(format!("{}: {e}", manifest_path.display())))?;
    println!("{}", model_path.display());
    println!("{}", manifest_path.display());
    Ok(0)
}

fn solve(a: SolveArgs) -> Outcome {
    if !(a.max_seconds > 0.0) {
        return Err(invalid(format!("--max-seconds must be positive, got {}", a.max_seconds)));
    }
    let limits = SolveLimits { max_nodes: a.max_nodes, max_seconds: a.max_seconds, feastol: feastol()?, ..SolveLimits::default() };
    let model = read_model_file(&a.model).map_err(|e| invalid(format!("{}: {e}", a.model.display())))?;
    let start = Instant::now();
    let r = bb_solve(&model, &limits);
    let secs = start.elapsed().as_secs_f64();
    let has_point = !r.assignment.is_empty();
    let mut text = String::new();
    if a.json {
        let mut assignment = Map::new();
        if has_point {
            for (v, x) in model.vars().iter().zip(&r.assignment) {
                assignment.insert(v.name.clone(), json!(x));
            }
        }
        let mut out = json!({
            "status": r.status.as_str(),
            "objective": if has_point { json!(r.objective) } else { Value::Null },
            "best_bound": if r.best_bound.is_finite() { json!(r.best_bound) } else { Value::Null },
            "nodes": r.node_count,
            "iterations": r.iterations,
            "assignment": assignment,
        });
        if !a.no_timing {
            out["seconds"] = json!(secs);
        }
        text = serde_json::to_string_pretty(&out).expect("json renders") + "\n";
    } else {
        if has_point {
            let _ = writeln!(text, "{} {:?}", r.status, r.objective);
        } else {
            let _ = writeln!(text, "{}", r.status);
        }
        let _ = writeln!(text, "nodes {}", r.node_count);
        if has_point {
            for (v, x) in model.vars().iter().zip(&r.assignment) {
                let _ = writeln!(text, "{} = {:?}", v.name, x);
            }
        }
        if !a.no_timing {
            let _ = writeln!(text, "time {secs:.3}s");
        }
    }
    emit(&text);
    Ok(match r.status {
        SolveStatus::NodeLimit | SolveStatus::TimeLimit | SolveStatus::NumericalFailure => EXIT_LIMIT,
        _ => 0,
    })
}

fn verify(a: VerifyArgs) -> Outcome {
    check_epsilon(a.epsilon)?;
    let tol = feastol()?;
    let p = load_predictor(&a.predictor).map_err(|e| invalid(format!("{}: {e}", a.predictor.display())))?;
    let mut opts = EmbedOptions::default().with_formulation(a.formulation.into()).with_epsilon(a.epsilon);
    if let Some(path) = &a.input_bounds {
        opts = opts.with_box(read_bounds(path, p.input_dim())?);
    }
    let report = check_exactness_with_tol(&p, &opts, a.samples, a.seed, tol).map_err(invalid)?;
    if a.json {
        emit(&(report.to_json() + "\n"));
    } else {
        emit(&report.to_string());
    }
    Ok(if report.passed() { 0 } else { EXIT_VERIFY })
}

fn fabricate(a: FabricateArgs) -> Outcome {
    let kind: PredictorKind = a.kind.parse().map_err(invalid)?;
    let params = parse_list(a.params.as_deref())?.unwrap_or_else(|| kind.default_params());
    if !(a.lb <= a.ub) || !a.lb.is_finite() || !a.ub.is_finite() {
        return Err(invalid(format!("bad input box [{}, {}]", a.lb, a.ub)));
    }
    let mut spec = FabricateSpec::regression(vec![(a.lb, a.ub); a.inputs], (-1.0, 1.0));
    spec.outputs = a.outputs;
    if a.argmax {
        spec.head = Head::Argmax;
    }
    let p = fabricate_predictor(kind, &params, &spec, a.seed).map_err(invalid)?;
    fs::write(&a.out, p.to_json() + "\n").map_err(|e| invalid(format!("{}: {e}", a.out.display())))?;
    println!("wrote {} ({p})", a.out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Formulate(a) => formulate(a),
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Fabricate(a) => fabricate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
