//! The `dlctx` pipeline: parse, find cycles, compute interfering tasks,
//! generate contexts and explore them, reporting as text or JSON.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::absdom::{resolve_references, AbstractTask, Facts};
use crate::contexts::{generate_contexts, InitialContext};
use crate::depgraph::{build_dependency_graph, enumerate_cycles, DeadlockCycle, DepGraph};
use crate::error::{Error, Result};
use crate::explorer::{explore, ExplorationReport, ExploreOptions, Limits, Verdict};
use crate::interfering::{initial_tasks_traced, TaskCardinality, WorklistTrace};
use crate::syntax::{parse, Program};

/// Exit status when exploration found a deadlock.
pub const EXIT_DEADLOCK: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "dlctx", version, about = "Deadlock cycles, interfering tasks and initial contexts for actor programs")]
pub struct Args {
    /// Program to analyze.
    pub file: PathBuf,
    /// Print abstract deadlock cycles.
    #[arg(long)]
    pub cycles: bool,
    /// Print the interfering tasks of each cycle.
    #[arg(long)]
    pub initial_tasks: bool,
    /// Print the initial contexts generated from the interfering tasks.
    #[arg(long)]
    pub contexts: bool,
    /// Explore every generated context.
    #[arg(long)]
    pub explore: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Cardinality override, `Class.method=min:max`. Repeatable.
    #[arg(long = "card", value_name = "C.m=a:b")]
    pub cards: Vec<String>,
    #[arg(long, default_value_t = Limits::default().max_states)]
    pub max_states: usize,
    #[arg(long, default_value_t = Limits::default().max_depth)]
    pub max_depth: usize,
    /// Enumerate every reference wiring instead of the first.
    #[arg(long)]
    pub expand_wiring: bool,
    /// Also report deadlocked cycles while other tasks still run.
    #[arg(long)]
    pub partial: bool,
    /// Dump per-instruction facts as TSV.
    #[arg(long)]
    pub dump_facts: bool,
    /// Show each step of the interfering-tasks worklist.
    #[arg(long)]
    pub trace_worklist: bool,
    /// Leave out timing information.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stages {
    pub cycles: bool,
    pub initial_tasks: bool,
    pub contexts: bool,
    pub explore: bool,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub input: PathBuf,
    pub stages: Stages,
    pub format: Format,
    pub cards: Vec<TaskCardinality>,
    pub limits: Limits,
    pub expand_wiring: bool,
    pub partial: bool,
    pub dump_facts: bool,
    pub trace_worklist: bool,
    pub timing: bool,
}

/// Parse `Class.method=min:max`.
pub fn parse_card(s: &str) -> Result<TaskCardinality> {
    let bad = || Error::Usage(format!("bad --card `{s}`, expected Class.method=min:max"));
    let (task, range) = s.split_once('=').ok_or_else(bad)?;
    let (min, max) = range.split_once(':').ok_or_else(bad)?;
    let task = AbstractTask::parse(task).ok_or_else(bad)?;
    let min = min.parse().map_err(|_| bad())?;
    let max = max.parse().map_err(|_| bad())?;
    TaskCardinality::new(task, min, max)
}

impl Config {
    pub fn from_args(a: Args) -> Result<Config> {
        let stages = Stages {
            cycles: a.cycles,
            initial_tasks: a.initial_tasks || a.trace_worklist,
            contexts: a.contexts,
            explore: a.explore,
        };
        if stages == Stages::default() && !a.dump_facts {
            return Err(Error::Usage(
                "select at least one of --cycles, --initial-tasks, --contexts, --explore, --dump-facts".into(),
            ));
        }
        if a.max_states == 0 || a.max_depth == 0 {
            return Err(Error::Usage("--max-states and --max-depth must be positive".into()));
        }
        Ok(Config {
            input: a.file,
            stages,
            format: a.format,
            cards: a.cards.iter().map(|c| parse_card(c)).collect::<Result<_>>()?,
            limits: Limits {
                max_states: a.max_states,
                max_depth: a.max_depth,
            },
            expand_wiring: a.expand_wiring,
            partial: a.partial,
            dump_facts: a.dump_facts,
            trace_worklist: a.trace_worklist,
            timing: !a.no_timing,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContextExploration {
    /// 1-based position in the union of contexts.
    pub context: usize,
    pub text: String,
    #[serde(flatten)]
    pub report: ExplorationReport,
}

/// Everything the selected stages produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub graph: Option<DepGraph>,
    pub cycles: Vec<DeadlockCycle>,
    pub facts: Vec<(AbstractTask, FactRows)>,
    pub tasks_per_cycle: Vec<Vec<TaskCardinality>>,
    pub tasks_union: Vec<TaskCardinality>,
    pub worklists: Vec<WorklistTrace>,
    pub contexts_per_cycle: Vec<Vec<InitialContext>>,
    pub contexts_union: Vec<InitialContext>,
    pub explorations: Vec<ContextExploration>,
    pub timing: Vec<(&'static str, f64)>,
}

impl Report {
    pub fn deadlock_found(&self) -> bool {
        self.explorations.iter().any(|e| e.report.verdict == Verdict::DeadlockFound)
    }

    pub fn exit_code(&self) -> i32 {
        if self.deadlock_found() {
            EXIT_DEADLOCK
        } else {
            0
        }
    }
}

fn timed<T>(timing: &mut Vec<(&'static str, f64)>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    timing.push((stage, start.elapsed().as_secs_f64() * 1000.0));
    Ok(out)
}

/// Run the selected stages on `cfg.input`.
pub fn run(cfg: &Config) -> Result<Report> {
    let src = std::fs::read_to_string(&cfg.input)?;
    run_source(cfg, &src)
}

pub fn run_source(cfg: &Config, src: &str) -> Result<Report> {
    let mut r = Report::default();
    let p = timed(&mut r.timing, "parse", || Ok(parse(src)?))?;
    for tc in &cfg.cards {
        if p.method(&tc.task.class_name, &tc.task.method_name).is_none() {
            return Err(Error::UnknownTask(tc.task.to_string()));
        }
    }
    if cfg.dump_facts {
        r.facts = dump_facts(&p);
    }
    let s = cfg.stages;
    let need_cycles = s.cycles || s.initial_tasks || s.contexts || s.explore;
    if !need_cycles {
        return Ok(r);
    }
    let (graph, cycles) = timed(&mut r.timing, "cycles", || {
        let pts = resolve_references(&p)?;
        let g = build_dependency_graph(&p, &pts)?;
        let cycles = enumerate_cycles(&g);
        Ok((g, cycles))
    })?;
    r.cycles = cycles;
    r.graph = Some(graph);
    if !(s.initial_tasks || s.contexts || s.explore) {
        return Ok(r);
    }

    timed(&mut r.timing, "initial-tasks", || {
        let mut union = BTreeSet::new();
        for c in &r.cycles {
            let (tasks, trace) = initial_tasks_traced(&p, c)?;
            let tasks = apply_cards(tasks, &cfg.cards);
            union.extend(tasks.iter().map(|t| t.task.clone()));
            r.tasks_per_cycle.push(tasks);
            r.worklists.push(trace);
        }
        let mut union: Vec<TaskCardinality> = union.into_iter().map(TaskCardinality::one).collect();
        union.sort_by_key(|t| t.task.order_key(&p));
        r.tasks_union = apply_cards(union, &cfg.cards);
        Ok(())
    })?;
    if !(s.contexts || s.explore) {
        return Ok(r);
    }

    timed(&mut r.timing, "contexts", || {
        let mut union = Vec::new();
        for tasks in &r.tasks_per_cycle {
            let cs = generate_contexts(&p, tasks, cfg.expand_wiring)?;
            for c in &cs {
                if !union.contains(c) {
                    union.push(c.clone());
                }
            }
            r.contexts_per_cycle.push(cs);
        }
        union.sort_by(|a: &InitialContext, b| (a.locations.len(), a).cmp(&(b.locations.len(), b)));
        r.contexts_union = union;
        Ok(())
    })?;
    if !s.explore {
        return Ok(r);
    }

    let opts = ExploreOptions {
        limits: cfg.limits,
        partial: cfg.partial,
        ..Default::default()
    };
    timed(&mut r.timing, "explore", || {
        for (i, c) in r.contexts_union.iter().enumerate() {
            r.explorations.push(ContextExploration {
                context: i + 1,
                text: c.to_string(),
                report: explore(&p, c, &opts)?,
            });
        }
        Ok(())
    })?;
    Ok(r)
}

fn apply_cards(tasks: Vec<TaskCardinality>, cards: &[TaskCardinality]) -> Vec<TaskCardinality> {
    tasks
        .into_iter()
        .map(|t| cards.iter().rev().find(|c| c.task == t.task).cloned().unwrap_or(t))
        .collect()
}

/// `(pp, accessed fields, await before)` per instruction.
pub type FactRows = Vec<(String, Vec<String>, bool)>;

fn dump_facts(p: &Program) -> Vec<(AbstractTask, FactRows)> {
    let facts = Facts::new(p);
    let mut out: Vec<(AbstractTask, FactRows)> = facts
        .tasks()
        .map(|(task, tf)| {
            let rows = tf
                .cfg
                .nodes
                .iter()
                .map(|pp| {
                    let fields = facts.accessed_fields(task, pp).expect("own point");
                    let aw = facts.has_await_before(task, pp).expect("own point");
                    (pp.to_string(), fields.into_iter().collect(), aw)
                })
                .collect();
            (task.clone(), rows)
        })
        .collect();
    out.sort_by_key(|(t, _)| t.order_key(p));
    out
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

impl Report {
    /// Human-readable report. Section headers appear only when more than
    /// one section is printed.
    pub fn to_text(&self, cfg: &Config) -> String {
        let mut sections: Vec<(&str, String)> = Vec::new();
        let s = cfg.stages;
        if cfg.dump_facts {
            let mut out = String::new();
            for (task, rows) in &self.facts {
                let _ = writeln!(out, "# {task}");
                let _ = writeln!(out, "pp\tfields\tawait_before");
                for (pp, fields, aw) in rows {
                    let _ = writeln!(out, "{pp}\t{}\t{aw}", fields.join(","));
                }
            }
            sections.push(("facts", out));
        }
        if s.cycles {
            let mut out = format!("{}\n", plural(self.cycles.len(), "cycle"));
            for c in &self.cycles {
                let _ = writeln!(out, "{c}");
            }
            sections.push(("cycles", out));
        }
        let multi = self.cycles.len() > 1;
        if s.initial_tasks {
            let mut out = String::new();
            let list = |out: &mut String, ts: &[TaskCardinality]| {
                for t in ts {
                    let _ = writeln!(out, "{t}");
                }
            };
            if multi {
                for (i, ts) in self.tasks_per_cycle.iter().enumerate() {
                    let _ = writeln!(out, "cycle {}:", i + 1);
                    list(&mut out, ts);
                }
                let _ = writeln!(out, "union:");
            }
            list(&mut out, &self.tasks_union);
            sections.push(("initial tasks", out));
        }
        if cfg.trace_worklist {
            let mut out = String::new();
            for (i, w) in self.worklists.iter().enumerate() {
                if multi {
                    let _ = writeln!(out, "cycle {}:", i + 1);
                }
                let _ = write!(out, "{w}");
            }
            sections.push(("worklist", out));
        }
        let show_ctx = |out: &mut String, c: &InitialContext| {
            let _ = writeln!(out, "{c}");
            if cfg.expand_wiring {
                let _ = writeln!(out, "  wiring: {}", c.wiring());
            }
        };
        if s.contexts {
            let mut out = String::new();
            if multi {
                for (i, cs) in self.contexts_per_cycle.iter().enumerate() {
                    let _ = writeln!(out, "cycle {}:", i + 1);
                    cs.iter().for_each(|c| show_ctx(&mut out, c));
                }
                let _ = writeln!(out, "union:");
            }
            self.contexts_union.iter().for_each(|c| show_ctx(&mut out, c));
            sections.push(("contexts", out));
        }
        if s.explore {
            let mut out = String::new();
            if self.explorations.is_empty() {
                let _ = writeln!(out, "no contexts to explore");
            }
            for e in &self.explorations {
                let _ = writeln!(
                    out,
                    "context {} {}: {} ({})",
                    e.context,
                    e.text,
                    e.report.verdict,
                    plural(e.report.states_explored, "state")
                );
                for (i, t) in e.report.traces.iter().enumerate() {
                    let kind = if t.partial { "partial deadlock" } else { "deadlock" };
                    let _ = writeln!(out, "  {kind} trace {}:", i + 1);
                    let _ = write!(out, "{t}");
                }
            }
            sections.push(("explore", out));
        }
        if sections.len() == 1 {
            return sections.pop().map(|(_, s)| s).unwrap_or_default();
        }
        let mut out = String::new();
        for (name, body) in sections {
            let _ = writeln!(out, "== {name} ==");
            out.push_str(&body);
        }
        out
    }

    /// Stage timings, one `stage: ms` per line.
    pub fn timing_text(&self) -> String {
        self.timing.iter().map(|(s, ms)| format!("{s}: {ms:.3} ms\n")).collect()
    }

    pub fn to_json(&self, cfg: &Config) -> Json {
        let s = cfg.stages;
        let mut out = serde_json::Map::new();
        out.insert("file".into(), json!(cfg.input.display().to_string()));
        if cfg.dump_facts {
            let facts: Vec<Json> = self
                .facts
                .iter()
                .map(|(task, rows)| {
                    let rows: Vec<Json> = rows
                        .iter()
                        .map(|(pp, f, aw)| json!({"pp": pp, "fields": f, "await_before": aw}))
                        .collect();
                    json!({"task": task, "rows": rows})
                })
                .collect();
            out.insert("facts".into(), json!(facts));
        }
        if s.cycles {
            let g = self.graph.clone().unwrap_or_default();
            out.insert(
                "cycles".into(),
                json!({
                    "nodes": g.nodes(),
                    "edges": g.edges(),
                    "cycles": self.cycles.iter().map(|c| &c.edge_ids).collect::<Vec<_>>(),
                    "text": self.cycles.iter().map(ToString::to_string).collect::<Vec<_>>(),
                }),
            );
        }
        if s.initial_tasks {
            out.insert("initial_tasks".into(), json!(self.tasks_union));
            out.insert("initial_tasks_per_cycle".into(), json!(self.tasks_per_cycle));
        }
        if cfg.trace_worklist {
            out.insert("worklist".into(), json!(self.worklists));
        }
        if s.contexts {
            let text = |cs: &[InitialContext]| cs.iter().map(ToString::to_string).collect::<Vec<_>>();
            out.insert("contexts".into(), json!(self.contexts_union));
            out.insert("contexts_text".into(), json!(text(&self.contexts_union)));
            out.insert("contexts_per_cycle".into(), json!(self.contexts_per_cycle));
        }
        if s.explore {
            let ex: Vec<Json> = self
                .explorations
                .iter()
                .map(|e| {
                    json!({
                        "context": e.context,
                        "text": e.text,
                        "verdict": e.report.verdict,
                        "states": e.report.states_explored,
                        "traces": e.report.traces.iter().map(|t| {
                            json!({
                                "partial": t.partial,
                                "stuck": t.stuck,
                                "steps": t.steps.iter().map(|st| json!({
                                    "location": st.location,
                                    "task": st.transition.task,
                                    "pp": st.pp,
                                    "action": st.action,
                                    "kind": st.transition.kind,
                                })).collect::<Vec<_>>(),
                            })
                        }).collect::<Vec<_>>(),
                    })
                })
                .collect();
            out.insert("explore".into(), json!(ex));
        }
        if cfg.timing {
            let t: serde_json::Map<String, Json> = self.timing.iter().map(|(s, ms)| (s.to_string(), json!(ms))).collect();
            out.insert("timing_ms".into(), Json::Object(t));
        }
        Json::Object(out)
    }
}

/// Parse arguments, run, print; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match Config::from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dlctx: {e}");
            return 1;
        }
    };
    match run(&cfg) {
        Ok(r) => {
            // a closed pipe is not our problem
            let mut stdout = std::io::stdout().lock();
            match cfg.format {
                Format::Text => {
                    let _ = write!(stdout, "{}", r.to_text(&cfg));
                    if cfg.timing {
                        eprint!("{}", r.timing_text());
                    }
                }
                Format::Json => {
                    let json = serde_json::to_string_pretty(&r.to_json(&cfg)).expect("serializable report");
                    let _ = writeln!(stdout, "{json}");
                }
            }
            r.exit_code()
        }
        Err(e) => {
            eprintln!("dlctx: {}: {e}", cfg.input.display());
            1
        }
    }
}
