use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value as Json};

use mekler::classify::{self, DEFAULT_ENUM_CAP};
use mekler::encode::{self, Encoding, RelStructure};
use mekler::fp_linalg;
use mekler::graph::{self, Graph};
use mekler::interpret::{self, DEFAULT_ISO_CAP};
use mekler::shatter::{
    self, check_tp2, evaluate_term, parse_formula, parse_term, tp2_pattern, Assignment, ParsedFormula,
    ShatterInstance, Structure, Tp2Budget, Tp2Instance, Value, DEFAULT_MAX_CELLS, DEFAULT_SHATTER_BUDGET,
};
use mekler::transversal::{self, Landscape};
use mekler::{Error, MeklerGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Text,
}

#[derive(Parser, Debug)]
#[command(name = "mekler", version, about = "Mekler groups, interpretation and shattering testers")]
struct Cli {
    /// Output format; JSON is the source of truth.
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Cap on enumerated elements for censuses and centralizers.
    #[arg(long, env = "MEKLER_ENUM_CAP", default_value_t = DEFAULT_ENUM_CAP, global = true)]
    enum_cap: u64,
    /// Formula evaluations available to shattering searches.
    #[arg(long, env = "MEKLER_SEARCH_BUDGET", default_value_t = DEFAULT_SHATTER_BUDGET, global = true)]
    search_budget: u64,
    /// Vertex cap for graph isomorphism.
    #[arg(long, env = "MEKLER_ISO_CAP", default_value_t = DEFAULT_ISO_CAP, global = true)]
    iso_cap: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test a graph for niceness.
    Nice { graph: PathBuf },
    /// Summarize G(C).
    Build {
        graph: PathBuf,
        #[arg(short, default_value_t = 3)]
        p: u32,
    },
    /// Census of element classes.
    Classify {
        graph: PathBuf,
        #[arg(short, default_value_t = 3)]
        p: u32,
    },
    /// Build a transversal and check it.
    Transversal {
        graph: PathBuf,
        #[arg(short, default_value_t = 3)]
        p: u32,
    },
    /// The interpreted graph Γ(G(C)).
    Gamma {
        graph: PathBuf,
        #[arg(short, default_value_t = 3)]
        p: u32,
    },
    /// Compare Γ(G(C)) with C.
    Roundtrip {
        graph: PathBuf,
        #[arg(short, default_value_t = 3)]
        p: u32,
    },
    /// Encode a relational structure as a nice graph.
    Encode {
        structure: PathBuf,
        /// Graph output (defaults to `<structure>.g`).
        #[arg(long)]
        graph_out: Option<PathBuf>,
        /// Gadget log output (defaults to `<structure>.gadgets.json`).
        #[arg(long)]
        log_out: Option<PathBuf>,
    },
    /// Decode an encoding from its graph and gadget log.
    Decode {
        graph: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Write the decoded structure here.
        #[arg(long)]
        structure_out: Option<PathBuf>,
    },
    /// Search for, or verify, a shattered parameter grid.
    Shatter {
        /// A structure file, `builtin:bilinear:P:M`, `builtin:shattering:K:N`,
        /// `builtin:tp2:R:C`, `builtin:hypergraph:K:N:PROB` or `group:<graph>:P`.
        #[arg(long)]
        structure: String,
        #[arg(long)]
        formula: PathBuf,
        /// Number of parameter blocks.
        #[arg(short)]
        k: usize,
        /// Grid sizes, one per block, or a single size for all.
        #[arg(short, value_delimiter = ',')]
        n: Vec<usize>,
        /// Verify this instance instead of searching.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Check the two TP2 clauses on an array.
    Tp2 {
        #[arg(long)]
        structure: String,
        #[arg(long)]
        formula: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(short)]
        k: usize,
        /// JSON array of rows of parameter tuples; defaults to elements
        /// `i * cols + j` of a relational structure.
        #[arg(long)]
        array: Option<PathBuf>,
    },
    /// Evaluate a group word to its normal form.
    Eval {
        #[arg(long)]
        group: PathBuf,
        #[arg(short, default_value_t = 3)]
        p: u32,
        #[arg(long)]
        expr: String,
    },
}

/// Validated run parameters, echoed into every report.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    command: &'static str,
    p: Option<u32>,
    enum_cap: u64,
    search_budget: u64,
    iso_cap: usize,
    seed: u64,
    format: Format,
    inputs: Vec<String>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Budget { .. } => 3,
            Error::NotNice(_) => 1,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_graph(path: &Path) -> CliResult<Graph> {
    Ok(graph::load_graph(&read(path)?)?)
}

fn load_formula(path: &Path) -> CliResult<ParsedFormula> {
    Ok(parse_formula(read(path)?.trim())?)
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| usage(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let io = |e: std::io::Error| usage(format!("cannot write {}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<T> {
    s.parse().map_err(|_| usage(format!("bad {what} `{s}`")))
}

/// A structure plus, for builtins, its canonical shattering instance.
fn load_structure(source: &str, seed: u64) -> CliResult<(Structure, Option<ShatterInstance>)> {
    let parts: Vec<&str> = source.split(':').collect();
    match parts[..] {
        ["builtin", "bilinear", p, m] => {
            let b = shatter::bilinear_structure(parse_num(p, "prime")?, parse_num(m, "dimension")?)?;
            let canon = shatter::bilinear_ip_instance(&b, b.m.min(16))?;
            Ok((Structure::Bilinear(b), Some(canon)))
        }
        ["builtin", "shattering", k, n] => {
            let h = shatter::build_shattering_hypergraph(parse_num(k, "arity")?, parse_num(n, "grid size")?)?;
            Ok((Structure::Relational(h.structure), Some(h.instance)))
        }
        ["builtin", "tp2", r, c] => {
            let (s, _) = tp2_pattern(parse_num(r, "rows")?, parse_num(c, "columns")?)?;
            Ok((Structure::Relational(s), None))
        }
        ["builtin", "hypergraph", k, n, prob] => {
            let s = encode::random_hypergraph(parse_num(k, "arity")?, parse_num(n, "size")?, parse_num(prob, "probability")?, seed)?;
            Ok((Structure::Relational(s), None))
        }
        ["builtin", ..] => Err(usage(format!("unknown builtin structure `{source}`"))),
        ["group", path, p] => {
            let g = load_graph(Path::new(path))?;
            Ok((Structure::Group(MeklerGroup::new(g, parse_num(p, "prime")?)?), None))
        }
        _ => Ok((Structure::Relational(RelStructure::parse(&read(Path::new(source))?)?), None)),
    }
}

fn to_json<T: Serialize>(v: &T) -> Json {
    serde_json::to_value(v).expect("report serializes")
}

/// Runs the command; returns the report and whether the checked property
/// held.
fn run(cli: &Cli) -> CliResult<(Json, bool)> {
    match &cli.command {
        Command::Nice { graph } => {
            let g = load_graph(graph)?;
            let r = graph::check_nice(&g);
            Ok((to_json(&r), r.is_nice))
        }
        Command::Build { graph, p } => {
            let g = MeklerGroup::new(load_graph(graph)?, *p)?;
            let z = g.center();
            let d = g.derived();
            Ok((
                json!({
                    "n": g.n(),
                    "m": g.m(),
                    "order": g.order().to_string(),
                    "log_order": g.n() + g.m(),
                    "center_gen_dim": z.gen_space.dim(),
                    "center_log_order": z.log_order(),
                    "derived_log_order": d.log_order(),
                    "center_equals_derived": z == d,
                }),
                true,
            ))
        }
        Command::Classify { graph, p } => {
            let g = MeklerGroup::new(load_graph(graph)?, *p)?;
            let c = classify::census(&g, cli.enum_cap)?;
            Ok((to_json(&c), true))
        }
        Command::Transversal { graph, p } => {
            let g = MeklerGroup::new(load_graph(graph)?, *p)?;
            let land = Landscape::new(&g, cli.enum_cap)?;
            let x = transversal::build_transversal(&land, cli.seed)?;
            let phi = transversal::check_phi(&land, &x.x_nu, &x.x_p, &x.x_iota, None)?;
            let all = x.all();
            let invariant = transversal::verify_derived_invariance(&g, &all)?;
            let dec = transversal::decomposition_check(&g, &all)?;
            let ok = phi.satisfied && invariant;
            Ok((
                json!({
                    "transversal": x.to_json(&g),
                    "phi": to_json(&phi),
                    "derived_invariance": invariant,
                    "decomposition": to_json(&dec),
                }),
                ok,
            ))
        }
        Command::Gamma { graph, p } => {
            let g = MeklerGroup::new(load_graph(graph)?, *p)?;
            let land = Landscape::new(&g, cli.enum_cap)?;
            Ok((interpret::gamma(&land)?.to_json(), true))
        }
        Command::Roundtrip { graph, p } => {
            let c = load_graph(graph)?;
            let nice = graph::check_nice(&c);
            if !nice.is_nice {
                return Ok((json!({ "nice": to_json(&nice), "isomorphic": false }), false));
            }
            let r = interpret::roundtrip_with_iso_cap(&c, *p, cli.enum_cap, cli.iso_cap)?;
            let ok = r.isomorphic;
            Ok((to_json(&r), ok))
        }
        Command::Encode {
            structure,
            graph_out,
            log_out,
        } => {
            let s = RelStructure::parse(&read(structure)?)?;
            let e = encode::encode(&s)?;
            let nice = graph::check_nice(&e.graph);
            let back = encode::decode(&e)?;
            let graph_path = graph_out.clone().unwrap_or_else(|| structure.with_extension("g"));
            let log_path = log_out.clone().unwrap_or_else(|| structure.with_extension("gadgets.json"));
            write_atomic(&graph_path, &graph::save_graph(&e.graph))?;
            write_atomic(&log_path, &e.gadget_log_json())?;
            let ok = nice.is_nice && back == s;
            Ok((
                json!({
                    "vertices": e.graph.n(),
                    "edges": e.graph.edge_count(),
                    "tuple_gadgets": e.gadget_log.tuples.len(),
                    "repair_gadgets": e.gadget_log.repairs.len(),
                    "nice": nice.is_nice,
                    "round_trip": back == s,
                    "graph_file": graph_path.display().to_string(),
                    "log_file": log_path.display().to_string(),
                }),
                ok,
            ))
        }
        Command::Decode {
            graph,
            log,
            structure_out,
        } => {
            let e = Encoding::from_parts(load_graph(graph)?, &read(log)?)?;
            let s = encode::decode(&e)?;
            let text = s.to_text();
            if let Some(path) = structure_out {
                write_atomic(path, &text)?;
            }
            let re = encode::encode(&s)?;
            let same = re.graph.edges() == e.graph.edges() && re.graph.n() == e.graph.n();
            Ok((
                json!({
                    "universe_size": s.universe_size,
                    "tuples": s.tuple_count(),
                    "structure": text,
                    "reencodes_identically": same,
                }),
                same,
            ))
        }
        Command::Shatter {
            structure,
            formula,
            k,
            n,
            instance,
        } => {
            let (s, canon) = load_structure(structure, cli.seed)?;
            let f = load_formula(formula)?;
            if f.k() != *k {
                return Err(usage(format!("formula has {} parameter blocks, -k is {k}", f.k())));
            }
            let sizes: Vec<usize> = match n.len() {
                1 => vec![n[0]; *k],
                l if l == *k => n.clone(),
                _ => return Err(usage(format!("-n needs 1 or {k} sizes"))),
            };
            if let Some(path) = instance {
                let inst: ShatterInstance =
                    serde_json::from_str(&read(path)?).map_err(|e| usage(format!("bad instance: {e}")))?;
                let r = shatter::verify_shatter(&s, &inst, DEFAULT_MAX_CELLS)?;
                return Ok((json!({ "mode": "verify", "report": to_json(&r) }), r.pass));
            }
            let canonical = canon
                .filter(|c| c.formula.body == f.body && c.formula.y_arities == f.y_arities)
                .filter(|c| c.grid_sizes().iter().zip(&sizes).all(|(a, b)| b <= a))
                .map(|c| shatter::restrict_instance(&c, &sizes))
                .transpose()?;
            if let Some(inst) = canonical {
                let r = shatter::verify_shatter(&s, &inst, DEFAULT_MAX_CELLS)?;
                return Ok((
                    json!({ "mode": "canonical", "report": to_json(&r), "instance": inst.to_json() }),
                    r.pass,
                ));
            }
            let seed = (cli.seed != 0).then_some(cli.seed);
            let out = shatter::search_shatter(&s, &f, &sizes, cli.search_budget, seed)?;
            let report = match &out.found {
                Some(inst) => Some(to_json(&shatter::verify_shatter(&s, inst, DEFAULT_MAX_CELLS)?)),
                None => None,
            };
            let found = out.found.is_some();
            Ok((
                json!({
                    "mode": "search",
                    "verdict": out.verdict(),
                    "search": to_json(&out),
                    "report": report,
                }),
                found,
            ))
        }
        Command::Tp2 {
            structure,
            formula,
            rows,
            cols,
            k,
            array,
        } => {
            let (s, _) = load_structure(structure, cli.seed)?;
            let f = load_formula(formula)?;
            let array: Vec<Vec<Vec<Value>>> = match array {
                Some(path) => serde_json::from_str(&read(path)?).map_err(|e| usage(format!("bad array: {e}")))?,
                None => {
                    if !matches!(s, Structure::Relational(_)) {
                        return Err(usage("--array is required for non-relational structures"));
                    }
                    (0..*rows)
                        .map(|i| (0..*cols).map(|j| vec![Value::Elem(i * cols + j)]).collect())
                        .collect()
                }
            };
            if array.len() != *rows || array.iter().any(|r| r.len() != *cols) {
                return Err(usage(format!("array is not {rows}x{cols}")));
            }
            let inst = Tp2Instance { formula: f, array, k: *k };
            let budget = Tp2Budget {
                seed: cli.seed,
                max_paths: cli.search_budget.min(1 << 20),
                ..Tp2Budget::default()
            };
            let r = check_tp2(&s, &inst, &budget)?;
            let ok = r.pass();
            Ok((to_json(&r), ok))
        }
        Command::Eval { group, p, expr } => {
            let g = MeklerGroup::new(load_graph(group)?, *p)?;
            let t = parse_term(expr)?;
            let s = Structure::Group(g.clone());
            let v = evaluate_term(&t, &s, &Assignment::default())?;
            let Value::Group(x) = v else {
                return Err(usage("expression is not a group element"));
            };
            Ok((json!({ "expr": expr, "normal_form": g.format_element(&x) }), true))
        }
    }
}

fn config(cli: &Cli) -> CliResult<RunConfig> {
    let (command, p, inputs): (&'static str, Option<u32>, Vec<String>) = match &cli.command {
        Command::Nice { graph } => ("nice", None, vec![graph.display().to_string()]),
        Command::Build { graph, p } => ("build", Some(*p), vec![graph.display().to_string()]),
        Command::Classify { graph, p } => ("classify", Some(*p), vec![graph.display().to_string()]),
        Command::Transversal { graph, p } => ("transversal", Some(*p), vec![graph.display().to_string()]),
        Command::Gamma { graph, p } => ("gamma", Some(*p), vec![graph.display().to_string()]),
        Command::Roundtrip { graph, p } => ("roundtrip", Some(*p), vec![graph.display().to_string()]),
        Command::Encode { structure, .. } => ("encode", None, vec![structure.display().to_string()]),
        Command::Decode { graph, log, .. } => (
            "decode",
            None,
            vec![graph.display().to_string(), log.display().to_string()],
        ),
        Command::Shatter {
            structure,
            formula,
            instance,
            ..
        } => {
            let mut v = vec![structure.clone(), formula.display().to_string()];
            v.extend(instance.iter().map(|i| i.display().to_string()));
            ("shatter", None, v)
        }
        Command::Tp2 {
            structure,
            formula,
            array,
            ..
        } => {
            let mut v = vec![structure.clone(), formula.display().to_string()];
            v.extend(array.iter().map(|i| i.display().to_string()));
            ("tp2", None, v)
        }
        Command::Eval { group, p, .. } => ("eval", Some(*p), vec![group.display().to_string()]),
    };
    if let Some(p) = p {
        fp_linalg::validate_prime(p)?;
    }
    if cli.enum_cap == 0 || cli.search_budget == 0 || cli.iso_cap == 0 {
        return Err(usage("budgets must be positive"));
    }
    Ok(RunConfig {
        command,
        p,
        enum_cap: cli.enum_cap,
        search_budget: cli.search_budget,
        iso_cap: cli.iso_cap,
        seed: cli.seed,
        format: cli.format,
        inputs,
    })
}

fn render_text(prefix: &str, v: &Json, out: &mut String) {
    match v {
        Json::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                render_text(&key, x, out);
            }
        }
        Json::Array(xs) if xs.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in xs.iter().enumerate() {
                render_text(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Json::String(s) if s.contains('\n') => {
            out.push_str(prefix);
            out.push_str(":\n");
            for line in s.lines() {
                out.push_str("  ");
                out.push_str(line);
                out.push('\n');
            }
        }
        Json::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}

fn emit(cli: &Cli, doc: &Json) -> CliResult<()> {
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(doc).expect("report serializes") + "\n",
        Format::Text => {
            let mut s = String::new();
            render_text("", doc, &mut s);
            s
        }
    };
    match &cli.out {
        Some(path) => write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config(&cli) {
        Ok(c) => c,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            return ExitCode::from(f.code);
        }
    };
    let (doc, code) = match run(&cli) {
        Ok((report, ok)) => (
            json!({
                "config": to_json(&cfg),
                "verdict": if ok { "pass" } else { "fail" },
                "report": report,
            }),
            if ok { 0 } else { 1 },
        ),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            (
                json!({
                    "config": to_json(&cfg),
                    "verdict": "error",
                    "exit_code": f.code,
                    "error": f.msg,
                }),
                f.code,
            )
        }
    };
    if let Err(f) = emit(&cli, &doc) {
        eprintln!("error: {}", f.msg);
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
