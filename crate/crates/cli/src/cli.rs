//! Argument parsing and command execution.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use mcf_core::engine::{Combination, Step};
use mcf_core::revision;
use mcf_core::{
    export_csv, export_provenance_csv, Action, BeliefValue, BlankPolicy, Document, Error, LookupMode, LookupResult,
    Region, Trace,
};

use crate::parse_evidence_map;

#[derive(Debug, Parser)]
#[command(name = "mcf", version, about = "Workbench for modifiable combining functions")]
pub struct Cli {
    /// Knowledge-base document.
    #[arg(long, global = true, default_value = "knowledge.mcf.json")]
    pub doc: PathBuf,
    /// Name recorded in journal entries.
    #[arg(long, global = true, default_value = "cli")]
    pub author: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a new document.
    Init {
        /// Seed with a fixture: `angina` or `full`.
        #[arg(long)]
        example: Option<String>,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Fill unspecified cells by interpolation.
    Derive {
        table: String,
        #[arg(long = "interp")]
        interpolator: String,
        #[arg(long)]
        categorical: Option<String>,
    },
    /// Read a table at a point of premise beliefs.
    Lookup {
        table: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
        #[arg(long, default_value = "exact")]
        mode: LookupMode,
    },
    /// Record an expert-specified cell.
    Set {
        table: String,
        #[arg(long, value_delimiter = ',')]
        index: Vec<usize>,
        #[arg(long, allow_hyphen_values = true)]
        value: f64,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// Override one cell or a block of cells.
    Override(OverrideArgs),
    /// Rule files.
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
    /// Cell differences of one table between two documents.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        table: String,
    },
    /// Propagate evidence through the inference network.
    Evaluate(EvidenceArgs),
    /// Show how a belief was computed.
    Explain {
        proposition: String,
        #[command(flatten)]
        evidence: EvidenceArgs,
    },
    /// Write a table as CSV, plus a provenance grid beside it.
    Export {
        table: String,
        #[arg(long)]
        csv: PathBuf,
    },
    /// List journal entries.
    Journal,
    /// Undo a journal entry.
    Revert { entry: u64 },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["index", "region"]))]
pub struct OverrideArgs {
    pub table: String,
    #[arg(long, value_delimiter = ',')]
    pub index: Option<Vec<usize>>,
    /// Per-axis predicates separated by ';', e.g. ".625,.5;>=.625".
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub value: f64,
    #[arg(long, default_value = "")]
    pub note: String,
}

#[derive(Debug, Subcommand)]
pub enum RulesCommand {
    /// Apply a rule file to a table.
    Apply { table: String, file: PathBuf },
}

#[derive(Debug, Args)]
pub struct EvidenceArgs {
    /// Base beliefs as `id=value` pairs, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub evidence: Vec<String>,
    /// Stop at blank cells instead of reading them as ignorance.
    #[arg(long)]
    pub halt_on_blank: bool,
}

fn evidence_map(pairs: &[String]) -> Result<BTreeMap<String, f64>, Error> {
    pairs
        .iter()
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| Error::Schema {
                path: "evidence".into(),
                reason: format!("expected id=value, got '{p}'"),
            })?;
            let v = v.trim().parse::<f64>().map_err(|e| Error::Schema {
                path: format!("evidence.{k}"),
                reason: e.to_string(),
            })?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn evaluate(doc: &Document, args: &EvidenceArgs) -> Result<mcf_core::Evaluation, Error> {
    let base = parse_evidence_map(doc, &evidence_map(&args.evidence)?)?;
    let policy = if args.halt_on_blank {
        BlankPolicy::Halt
    } else {
        BlankPolicy::TreatAsIgnorance
    };
    doc.evaluate(&base, policy)
}

fn describe(step: &Step) -> String {
    let combination = |c: &Combination| match c {
        Combination::Cell { table, index, provenance, .. } => {
            format!("cell {index:?} of {table} ({})", provenance.code())
        }
        Combination::Blend { table, terms } => format!("blend of {} cells of {table}", terms.len()),
        Combination::Interpolation {
            categorical,
            interpolator,
            ..
        } => format!("{interpolator} over {categorical}"),
        Combination::Ignorance { table, index, .. } => format!("blank cell {index:?} of {table} read as ignorance"),
        Combination::Max => "max".into(),
        Combination::Min => "min".into(),
        Combination::ProbabilisticSum => "probabilistic sum".into(),
    };
    match step {
        Step::Evidence => "evidence".into(),
        Step::Rule { rule, combination: c, .. } => format!("rule {rule}: {}", combination(c)),
        Step::Corroboration { combination: c, .. } => format!("corroboration: {}", combination(c)),
    }
}

pub fn render_trace(trace: &Trace) -> String {
    fn walk(t: &Trace, depth: usize, out: &mut String) {
        let _ = writeln!(out, "{}{} = {}  [{}]", "  ".repeat(depth), t.proposition, t.belief, describe(&t.step));
        for child in t.inputs() {
            walk(child, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(trace, 0, &mut out);
    out
}

fn applied_line(applied: &mcf_core::Applied) -> String {
    let e = &applied.entry;
    let mut line = format!(
        "entry {}: {} on {} changed {} cell(s)",
        e.id,
        e.action.name(),
        e.table,
        e.changes.len()
    );
    if let Some(w) = &applied.warning {
        let _ = write!(line, "\nwarning: {}", w.message);
    }
    line
}

fn save(doc: &Document, path: &Path) -> Result<(), Error> {
    doc.save(path).map(|_| ())
}

/// Runs a command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String, Error> {
    let path = cli.doc.as_path();
    let author = cli.author.as_str();
    let mut out = String::new();
    match cli.command {
        Command::Init { example, force } => {
            if path.exists() && !force {
                return Err(Error::Io(format!("{} exists; pass --force to overwrite", path.display())));
            }
            let doc = match example.as_deref() {
                None => Document::default(),
                Some("angina") => Document::angina_example(),
                Some("full") => Document::full_example(),
                Some(other) => {
                    return Err(Error::NotFound {
                        kind: "example",
                        id: other.to_string(),
                    })
                }
            };
            let bytes = doc.save(path)?;
            let _ = writeln!(out, "wrote {} ({bytes} bytes)", path.display());
        }
        Command::Derive {
            table,
            interpolator,
            categorical,
        } => {
            let mut doc = Document::load(path)?;
            let applied = doc.execute(&table, Action::Derive { interpolator, categorical }, author)?;
            save(&doc, path)?;
            let _ = writeln!(out, "{}", applied_line(&applied));
        }
        Command::Lookup { table, point, mode } => {
            let doc = Document::load(path)?;
            let t = doc.table(&table)?;
            let point = t
                .axes()
                .iter()
                .zip(&point)
                .map(|(a, &v)| BeliefValue::new(v, a.scale()))
                .collect::<Result<Vec<_>, _>>()?;
            if point.len() != t.arity() {
                return Err(Error::ArityMismatch {
                    expected: t.arity(),
                    found: point.len(),
                });
            }
            match t.lookup(&point, mode)? {
                LookupResult::Value { value, source } => {
                    let _ = writeln!(out, "{value}");
                    let _ = writeln!(out, "{}", serde_json::to_string(&source).expect("serializes"));
                }
                LookupResult::Blank { index, reason } => {
                    let _ = writeln!(out, "blank at {index:?} ({reason:?})");
                }
            }
        }
        Command::Set {
            table,
            index,
            value,
            note,
        } => {
            let mut doc = Document::load(path)?;
            let applied = doc.execute(&table, Action::SetSpecified { index, value, note }, author)?;
            save(&doc, path)?;
            let _ = writeln!(out, "{}", applied_line(&applied));
        }
        Command::Override(args) => {
            let mut doc = Document::load(path)?;
            let action = match (args.index, args.region) {
                (Some(index), _) => Action::OverrideCell {
                    index,
                    value: args.value,
                    note: args.note,
                },
                (None, Some(spec)) => Action::OverrideBlock {
                    region: Region::parse_spec(doc.table(&args.table)?.axes(), &spec)?,
                    value: args.value,
                    note: args.note,
                },
                (None, None) => unreachable!("clap requires one target"),
            };
            let applied = doc.execute(&args.table, action, author)?;
            save(&doc, path)?;
            let _ = writeln!(out, "{}", applied_line(&applied));
        }
        Command::Rules {
            command: RulesCommand::Apply { table, file },
        } => {
            let mut doc = Document::load(path)?;
            let text = std::fs::read_to_string(&file)?;
            let applied = doc.execute(&table, Action::ApplyRules { text }, author)?;
            save(&doc, path)?;
            let _ = writeln!(out, "{}", applied_line(&applied));
            for d in applied.entry.changes.iter().filter(|d| d.before.is_expert()) {
                let _ = writeln!(out, "displaced {:?}: {:?}", d.index, d.before);
            }
        }
        Command::Diff { a, b, table } => {
            let (a, b) = (Document::load(a)?, Document::load(b)?);
            let changes = revision::diff(a.table(&table)?, b.table(&table)?)?;
            for d in &changes {
                let _ = writeln!(out, "{}", serde_json::to_string(d).expect("serializes"));
            }
            let _ = writeln!(out, "{} cell(s) differ", changes.len());
        }
        Command::Evaluate(args) => {
            let doc = Document::load(path)?;
            let ev = evaluate(&doc, &args)?;
            for (id, b) in &ev.env {
                let origin = match ev.traces[id].step {
                    Step::Evidence => "evidence",
                    _ => "derived",
                };
                let _ = writeln!(out, "{id} = {}  ({origin})", b.value());
            }
        }
        Command::Explain { proposition, evidence } => {
            let doc = Document::load(path)?;
            let ev = evaluate(&doc, &evidence)?;
            out.push_str(&render_trace(ev.explain(&proposition)?));
        }
        Command::Export { table, csv } => {
            let doc = Document::load(path)?;
            let t = doc.table(&table)?;
            std::fs::write(&csv, export_csv(t))?;
            let prov = provenance_path(&csv);
            std::fs::write(&prov, export_provenance_csv(t))?;
            let _ = writeln!(out, "wrote {} and {}", csv.display(), prov.display());
        }
        Command::Journal => {
            let doc = Document::load(path)?;
            for e in &doc.journal {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{} cell(s)",
                    e.id,
                    e.timestamp,
                    e.author,
                    e.table,
                    e.action.name(),
                    e.changes.len()
                );
            }
        }
        Command::Revert { entry } => {
            let mut doc = Document::load(path)?;
            let applied = doc.revert(entry, author)?;
            save(&doc, path)?;
            let _ = writeln!(out, "{}", applied_line(&applied));
        }
        Command::Serve { bind } => {
            let doc = Document::load(path)?;
            let store = crate::server::Store {
                doc,
                path: Some(path.to_path_buf()),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::server::serve(store, &bind))?;
        }
    }
    Ok(out)
}

/// `out.csv` -> `out.provenance.csv`.
pub fn provenance_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.provenance.csv"))
}
