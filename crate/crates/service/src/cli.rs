use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use idiom_graph_core::annotation::{agreement_report, ingest_corpus, Labeling};
use idiom_graph_core::engine::AlignRequest;
use idiom_graph_core::fixtures::bundled_concepts;
use idiom_graph_core::graph::{AdjudicationOutcome, EdgeType, NewConcept};
use idiom_graph_core::ids::{EdgeId, NodeId};
use idiom_graph_core::metrics::{hitl_efficiency, SimulationConfig};
use idiom_graph_core::workflow::{Modification, Role, Verdict};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{Overrides, ServiceConfig};
use crate::error::{parse_json, Result, ServiceError};
use crate::http::{self, AppState};
use crate::ops::{
    self, AdjudicationRequest, DecisionRequest, ProposeMode, ProposeParams, ProposeRequest, SimulationSource,
};
use crate::store::Store;

/// Parses a snake_case enum through its serde representation.
fn serde_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "idiomgraph", version, about = "Cross-lingual idiom-of-distress graph with expert review")]
pub struct Cli {
    /// State directory (event log and snapshot).
    #[arg(long, global = true, env = "IDIOMGRAPH_STATE", default_value = "idiomgraph-state")]
    pub state: PathBuf,
    /// JSON service configuration.
    #[arg(long, global = true, env = "IDIOMGRAPH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Embedding provider id used for similarity work.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Similarity threshold for proposals (defaults to the workflow tau).
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Threshold at which a new text aligns to an existing node.
    #[arg(long = "tau-align", global = true)]
    pub tau_align: Option<f64>,
    /// Neighbors per node for similarity proposals.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add concepts: the bundled inventory, or a JSON array of concepts.
    Concepts { file: Option<PathBuf> },
    /// Ingest annotated corpus records (JSON Lines; `-` reads stdin).
    Ingest { file: PathBuf },
    /// Store embeddings: computed by the provider, or imported from JSON Lines.
    Embed {
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Place a new surface text in the graph.
    Align {
        text: String,
        #[arg(long)]
        language: String,
        #[arg(long)]
        gloss: Option<String>,
    },
    /// Propose candidate edges and queue them for review.
    Propose {
        #[arg(long, value_parser = serde_enum::<ProposeMode>)]
        mode: ProposeMode,
        #[arg(long)]
        language: Option<String>,
        #[arg(long)]
        target_language: Option<String>,
        #[arg(long)]
        node: Option<String>,
        #[arg(long)]
        dry_run: bool,
    },
    /// Show the next review batch for a role.
    Queue {
        #[arg(long, value_parser = serde_enum::<Role>)]
        role: Role,
        #[arg(long, default_value_t = 10)]
        batch_size: usize,
    },
    /// Record a validator decision.
    Decide {
        edge: String,
        #[arg(long, value_parser = serde_enum::<Role>)]
        role: Role,
        #[arg(long)]
        validator: String,
        #[arg(long, value_parser = serde_enum::<Verdict>)]
        verdict: Verdict,
        #[arg(long)]
        new_dst: Option<String>,
        #[arg(long, value_parser = serde_enum::<EdgeType>)]
        new_edge_type: Option<EdgeType>,
        #[arg(long, default_value = "")]
        comment: String,
    },
    /// Close an adjudication round.
    Adjudicate {
        edge: String,
        #[arg(long, value_parser = serde_enum::<AdjudicationOutcome>)]
        outcome: AdjudicationOutcome,
        /// Competing edge kept alongside (repeatable).
        #[arg(long = "parallel")]
        parallel: Vec<String>,
        /// One per retained edge, adjudicated edge first (repeatable).
        #[arg(long = "reason")]
        reasons: Vec<String>,
        #[arg(long)]
        note: Option<String>,
    },
    /// Explanation bundle or report for an edge.
    Explain {
        edge: String,
        #[arg(long)]
        html: bool,
    },
    /// Structural graph metrics.
    Metrics,
    /// Mean within-concept similarity over accepted mappings.
    Coherence,
    /// Review effort recorded in the event log.
    Efficiency {
        /// JSON array of true candidate ids.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Cohen's kappa over annotator labelings (JSON array).
    Agreement { file: PathBuf },
    /// Feed recent review outcomes back into the proposal threshold.
    Thresholds {
        #[arg(long, default_value_t = 50)]
        window: usize,
    },
    /// Run the review simulator (state is not modified).
    Simulate {
        /// Simulation config (JSON).
        #[arg(value_name = "SIM_CONFIG")]
        file: PathBuf,
        #[arg(long, value_parser = serde_enum::<SimulationSource>, default_value = "fixture")]
        source: SimulationSource,
    },
    /// Write the graph document.
    Export {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Load a graph document into an empty state.
    Import { file: PathBuf },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| ServiceError::io("stdin", e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))
}

struct Ctx {
    cli: Cli,
    config: ServiceConfig,
}

impl Ctx {
    fn open(&self) -> Result<Store> {
        let overrides = Overrides { provider: self.cli.provider.clone(), k: self.cli.k, tau_align: self.cli.tau_align };
        let services = self.config.services(&overrides)?;
        let mut store = Store::open(&self.cli.state, services, self.config.snapshot_every)?;
        if let Some(w) = &self.config.workflow {
            store.configure(w)?;
        }
        Ok(store)
    }

    fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce(&T) -> String) {
        if self.cli.json {
            println!("{}", serde_json::to_string(value).expect("outputs serialize"));
        } else {
            println!("{}", human(value));
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("outputs serialize")
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    let ctx = Ctx { cli, config };
    let tau = ctx.cli.tau;
    match &ctx.cli.command {
        Command::Concepts { file } => {
            let items: Vec<NewConcept> = match file {
                Some(p) => parse_json(&read_input(p)?, "concepts")?,
                None => bundled_concepts(),
            };
            let ids = ctx.open()?.mutate(|e| {
                e.transaction(|e| {
                    items.into_iter().map(|c| e.add_concept(c)).collect::<idiom_graph_core::Result<Vec<_>>>()
                })
            })?;
            ctx.emit(&ids, |v| format!("{} concepts present", v.len()));
        }
        Command::Ingest { file } => {
            let text = read_input(file)?;
            let report = ctx.open()?.mutate(|e| ingest_corpus(e, text.as_bytes()))?;
            ctx.emit(&report, |r| {
                let mut out =
                    format!("{} accepted, {} rejected, {} new nodes", r.accepted, r.rejected, r.created.len());
                for i in &r.issues {
                    out.push_str(&format!("\nline {}: {}: {}", i.line, i.path, i.message));
                }
                out
            });
        }
        Command::Embed { import } => {
            let mut store = ctx.open()?;
            let n = match import {
                Some(path) => {
                    let text = read_input(path)?;
                    store.mutate(|e| ops::import_embeddings(e, &text))?
                }
                None => store.mutate(|e| {
                    let provider = e.services().default_provider.clone();
                    e.embed_expressions(&provider)
                })?,
            };
            ctx.emit(&serde_json::json!({ "registered": n }), |_| format!("{n} embeddings registered"));
        }
        Command::Align { text, language, gloss } => {
            let req = AlignRequest {
                surface_text: text.clone(),
                language: language.clone(),
                provider_id: None,
                gloss: gloss.clone(),
                annotation: None,
                provenance: None,
            };
            let r = ctx.open()?.mutate(|e| e.align_new_expression(req))?;
            ctx.emit(&r, pretty);
        }
        Command::Propose { mode, language, target_language, node, dry_run } => {
            let req = ProposeRequest {
                mode: *mode,
                params: ProposeParams {
                    language: language.clone(),
                    target_language: target_language.clone(),
                    node_id: node.as_deref().map(NodeId::from),
                    provider_id: None,
                    k: ctx.cli.k,
                    tau,
                },
                dry_run: *dry_run,
            };
            let mut store = ctx.open()?;
            let r = if req.dry_run {
                ops::propose(&mut (*store.engine()).clone(), &req)?
            } else {
                store.mutate(|e| ops::propose(e, &req))?
            };
            ctx.emit(&r, |r| {
                let mut out = format!("{} candidates, {} queued", r.candidates.len(), r.enqueued.len());
                for c in &r.candidates {
                    out.push_str(&format!("\n{:.3}  {} -> {}  {}", c.score, c.src, c.dst, c.rationale));
                }
                for e in &r.errors {
                    out.push_str(&format!("\nerror: {e}"));
                }
                out
            });
        }
        Command::Queue { role, batch_size } => {
            let entries = ops::queue(&ctx.open()?.engine(), *role, *batch_size)?;
            ctx.emit(&entries, |v| {
                if v.is_empty() {
                    return "queue is empty".into();
                }
                v.iter()
                    .map(|q| {
                        format!(
                            "{}  priority {:.3}  {} -> {}  [{}]",
                            q.item.edge_id, q.item.priority, q.edge.src, q.edge.dst, q.item.batch_key
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        Command::Decide { edge, role, validator, verdict, new_dst, new_edge_type, comment } => {
            let modification = (new_dst.is_some() || new_edge_type.is_some())
                .then(|| Modification { new_dst: new_dst.as_deref().map(NodeId::from), new_edge_type: *new_edge_type });
            let req = DecisionRequest {
                edge_id: EdgeId::from(edge.as_str()),
                validator_id: validator.clone(),
                role: *role,
                verdict: *verdict,
                modification,
                comment: comment.clone(),
                decided_at: None,
            };
            let outcome = ctx.open()?.mutate(|e| ops::decide(e, req))?;
            ctx.emit(&outcome, |o| {
                let mut out = format!("{} is {:?}", o.edge.id, o.edge.status);
                if let Some(r) = &o.revised {
                    out.push_str(&format!("; revision {} proposed", r.id));
                }
                out
            });
        }
        Command::Adjudicate { edge, outcome, parallel, reasons, note } => {
            let req = AdjudicationRequest {
                outcome: *outcome,
                parallel_edges: parallel.iter().map(|p| EdgeId::from(p.as_str())).collect(),
                reasons: reasons.clone(),
                note: note.clone(),
            };
            let resolution = req.resolution(EdgeId::from(edge.as_str()));
            let edges = ctx.open()?.mutate(|e| e.resolve_adjudication(resolution))?;
            ctx.emit(&edges, |v| {
                v.iter().map(|e| format!("{} is {:?}", e.id, e.status)).collect::<Vec<_>>().join("\n")
            });
        }
        Command::Explain { edge, html } => {
            let engine = ctx.open()?.engine();
            let id = EdgeId::from(edge.as_str());
            if ctx.cli.json {
                ctx.emit(&engine.explanation(&id)?, pretty);
            } else {
                let r = engine.report(&id)?;
                print!("{}", if *html { r.html } else { r.text });
            }
        }
        Command::Metrics => {
            let m = ctx.open()?.engine().connectivity();
            ctx.emit(&m, pretty);
        }
        Command::Coherence => {
            let engine = ctx.open()?.engine();
            let c = engine.semantic_coherence(&engine.services().default_provider)?;
            ctx.emit(&serde_json::json!({ "semantic_coherence": c }), |_| match c {
                Some(v) => format!("{v:.4}"),
                None => "undefined (fewer than two concepts with accepted mappings)".into(),
            });
        }
        Command::Efficiency { truth } => {
            let truth = truth.as_deref().map(read_input).transpose()?.map(|t| ops::parse_truth(&t)).transpose()?;
            let report = hitl_efficiency(&ctx.open()?.history(), truth.as_ref())?;
            ctx.emit(&report, pretty);
        }
        Command::Agreement { file } => {
            let labelings: Vec<Labeling<String>> = parse_json(&read_input(file)?, "labelings")?;
            let report = agreement_report(&labelings)?;
            ctx.emit(&report, |r| {
                format!(
                    "kappa {:.4} over {} items ({})",
                    r.kappa,
                    r.item_count,
                    if r.target_met { "target met" } else { "below target" }
                )
            });
        }
        Command::Thresholds { window } => {
            let u = ctx.open()?.mutate(|e| e.update_thresholds(*window))?;
            ctx.emit(&u, |u| {
                format!("tau {:.4} -> {:.4} ({} accepted, {} rejected)", u.previous, u.tau, u.accepted, u.rejected)
            });
        }
        Command::Simulate { file, source } => {
            let sim: SimulationConfig = parse_json(&read_input(file)?, "simulation config")?;
            let report = ops::simulate(&ctx.open()?.engine(), &sim, *source)?;
            ctx.emit(&report, pretty);
        }
        Command::Export { out } => {
            let doc = ctx.open()?.engine().export_json();
            match out {
                Some(p) => std::fs::write(p, doc).map_err(|e| ServiceError::io(p, e))?,
                None => print!("{doc}"),
            }
        }
        Command::Import { file } => {
            let text = read_input(file)?;
            let engine = {
                let mut store = ctx.open()?;
                store.mutate(|e| e.import_json(&text))?;
                store.engine()
            };
            let counts =
                serde_json::json!({ "nodes": engine.graph().node_count(), "edges": engine.graph().edge_count() });
            ctx.emit(&counts, |c| format!("imported {} nodes and {} edges", c["nodes"], c["edges"]));
        }
        Command::Serve { bind } => serve(&ctx, bind.clone().unwrap_or_else(|| ctx.config.bind.clone()))?,
    }
    Ok(())
}

fn serve(ctx: &Ctx, bind: String) -> Result<()> {
    let store = ctx.open()?;
    let state = AppState::new(store, ctx.config.tokens.clone());
    let rt = tokio::runtime::Runtime::new().map_err(|e| ServiceError::io("tokio runtime", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&bind).await.map_err(|e| ServiceError::io(&bind, e))?;
        let addr = listener.local_addr().map_err(|e| ServiceError::io(&bind, e))?;
        eprintln!("listening on http://{addr}");
        http::serve(state, listener).await.map_err(|e| ServiceError::io(&bind, e))
    })
}

/// Exit codes: 0 success, 1 usage or validation failure, 2 I/O failure.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                println!("{}", e.to_json());
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
