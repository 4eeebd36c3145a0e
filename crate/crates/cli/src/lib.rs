//! Command implementations behind the `fastslow` binary.
//!
//! Every command writes its normal output to `out`, diagnostics to `err`, and
//! returns the process exit code.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use fastslow::classification::{
    classify, classify_permuted, shortcut_check, ClassificationReport, ShortcutError,
};
use fastslow::equivalence::{
    check_fast_slow_relation, check_slow_relation, congruence_probe, largest, parse_relation,
    parse_vector_pairs, render_relation, CheckOutcome, EquivError, Mode, Verdict, Witness,
    WITNESS_STEPS,
};
use fastslow::export::{to_dot, to_json};
use fastslow::model::{extend_species, CompositionTree, EquivConfig, SystemDef};
use fastslow::parser::{parse_config, parse_model, render_model};
use fastslow::semantics::{build_lts, SemanticsError, DEFAULT_MAX_STATES};
use fastslow::Lts;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_EQUIVALENT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_STATE_CAP: i32 = 3;
pub const EXIT_NOT_BISIMULATION: i32 = 4;
pub const EXIT_SHORTCUT: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "fastslow",
    version,
    about = "Fast-slow bisimulation for Bio-PEPA models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Dot,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CheckMode {
    FastSlow,
    Slow,
    Shortcut,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Print the run report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Leave timing out of the report.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    pub max_states: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the transition system of a model.
    Lts {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Show filtered label entries on DOT edges.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Decide fast-slow or slow bisimilarity of two models.
    Check {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Relation to verify instead of computing the largest one.
        #[arg(long)]
        relation: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fast-slow")]
        mode: CheckMode,
        /// Write the computed largest relation here.
        #[arg(long)]
        write_relation: Option<PathBuf>,
        /// Print the whole witness trace.
        #[arg(long, short)]
        verbose: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Classify variables into conserved, slow and fast ones.
    Classify {
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Visit species in this order (comma-separated names).
        #[arg(long, value_delimiter = ',')]
        species_order: Option<Vec<String>>,
        /// Visit reactions in this order (comma-separated names).
        #[arg(long, value_delimiter = ',')]
        reaction_order: Option<Vec<String>>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare p1 with p2 and p1 <*> q with p2 <*> q.
    Congruence {
        p1: PathBuf,
        p2: PathBuf,
        q: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Extend a species with the prefixes of another and print the model.
    Extend {
        first: PathBuf,
        second: PathBuf,
        /// Species of the first model (default: first declared).
        #[arg(long)]
        species: Option<String>,
        /// Species of the second model (default: first declared).
        #[arg(long)]
        with: Option<String>,
    },
}

#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
    pub states: Vec<usize>,
    pub transitions: Vec<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

/// A failure that ends the command with the given exit code.
struct Fail(i32, String);

type CmdResult = Result<i32, Fail>;

fn input_error(msg: impl Into<String>) -> Fail {
    Fail(EXIT_INPUT, msg.into())
}

impl From<SemanticsError> for Fail {
    fn from(e: SemanticsError) -> Self {
        match e {
            SemanticsError::StateSpaceLimitExceeded(_) => Fail(EXIT_STATE_CAP, e.to_string()),
            SemanticsError::UnpartitionedAction(_) => input_error(e.to_string()),
        }
    }
}

impl From<EquivError> for Fail {
    fn from(e: EquivError) -> Self {
        match e {
            EquivError::Semantics(s) => s.into(),
            other => input_error(other.to_string()),
        }
    }
}

struct Ctx<'a> {
    report: RunReport,
    started: Instant,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn read(&mut self, path: &Path) -> Result<String, Fail> {
        let bytes = fs::read(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        self.report.inputs.insert(
            path.display().to_string(),
            hex::encode(Sha256::digest(&bytes)),
        );
        String::from_utf8(bytes)
            .map_err(|_| input_error(format!("{}: not valid UTF-8", path.display())))
    }

    fn model(&mut self, path: &Path) -> Result<SystemDef, Fail> {
        let text = self.read(path)?;
        parse_model(&text).map_err(|e| {
            let lines: Vec<String> = e
                .diagnostics
                .iter()
                .map(|d| format!("{}:{d}", path.display()))
                .collect();
            input_error(lines.join("\n"))
        })
    }

    fn config(&mut self, path: &Path) -> Result<EquivConfig, Fail> {
        let text = self.read(path)?;
        parse_config(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
    }

    fn lts(&mut self, sys: &SystemDef, max_states: usize) -> Result<Lts, Fail> {
        let lts = build_lts(sys, max_states)?;
        self.report.states.push(lts.num_states());
        self.report.transitions.push(lts.transitions().len());
        Ok(lts)
    }

    fn line(&mut self, s: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", s.as_ref());
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Equivalent => "equivalent",
        Verdict::NotEquivalent => "not-equivalent",
        Verdict::RelationNotABisimulation => "relation-not-a-bisimulation",
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let command = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut ctx = Ctx {
        report: RunReport {
            command,
            ..RunReport::default()
        },
        started: Instant::now(),
        out,
    };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "{msg}");
            code
        }
    }
}

fn dispatch(cmd: Command, ctx: &mut Ctx<'_>) -> CmdResult {
    match cmd {
        Command::Lts {
            model,
            format,
            out,
            config,
            common,
        } => cmd_lts(
            ctx,
            &model,
            format,
            out.as_deref(),
            config.as_deref(),
            &common,
        ),
        Command::Check {
            first,
            second,
            config,
            relation,
            mode,
            write_relation,
            verbose,
            common,
        } => cmd_check(
            ctx,
            &first,
            &second,
            &config,
            relation.as_deref(),
            mode,
            write_relation.as_deref(),
            verbose,
            &common,
        ),
        Command::Classify {
            model,
            config,
            species_order,
            reaction_order,
            common,
        } => cmd_classify(ctx, &model, &config, species_order, reaction_order, &common),
        Command::Congruence {
            p1,
            p2,
            q,
            config,
            common,
        } => cmd_congruence(ctx, &p1, &p2, &q, &config, &common),
        Command::Extend {
            first,
            second,
            species,
            with,
        } => cmd_extend(ctx, &first, &second, species.as_deref(), with.as_deref()),
    }
}

fn finish(ctx: &mut Ctx<'_>, common: &Common, code: i32) -> CmdResult {
    if common.json {
        if !common.deterministic {
            ctx.report.elapsed_ms = Some(ctx.started.elapsed().as_secs_f64() * 1000.0);
        }
        let text = serde_json::to_string_pretty(&ctx.report).expect("report serialises");
        ctx.line(text);
    }
    Ok(code)
}

fn write_file(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn cmd_lts(
    ctx: &mut Ctx<'_>,
    model: &Path,
    format: Format,
    out: Option<&Path>,
    config: Option<&Path>,
    common: &Common,
) -> CmdResult {
    let sys = ctx.model(model)?;
    let cfg = config.map(|c| ctx.config(c)).transpose()?;
    let lts = ctx.lts(&sys, common.max_states)?;
    let text = match format {
        Format::Dot => to_dot(&lts, cfg.as_ref()),
        Format::Json => to_json(&lts),
    };
    let summary = format!(
        "{} states, {} transitions",
        lts.num_states(),
        lts.transitions().len()
    );
    match out {
        Some(path) => {
            write_file(path, &text)?;
            if !common.json {
                ctx.line(summary);
            }
        }
        None if !common.json => {
            let _ = write!(ctx.out, "{text}");
            ctx.line(format!("// {summary}"));
        }
        None => {}
    }
    finish(ctx, common, EXIT_OK)
}

fn describe_witness(w: &Witness, a: &Lts, b: &Lts, verbose: bool) -> Vec<String> {
    let mut lines = w.describe(a, b);
    if !verbose && lines.len() > WITNESS_STEPS {
        lines.truncate(WITNESS_STEPS);
        lines.push("...".to_string());
    }
    lines
}

fn report_outcome(
    ctx: &mut Ctx<'_>,
    outcome: &CheckOutcome,
    a: &Lts,
    b: &Lts,
    verbose: bool,
    common: &Common,
) {
    let name = verdict_name(outcome.verdict);
    ctx.report.verdict = Some(name.to_string());
    let lines = outcome
        .witness
        .as_ref()
        .map(|w| describe_witness(w, a, b, verbose));
    if !common.json {
        ctx.line(format!("verdict: {name}"));
        for l in lines.iter().flatten() {
            ctx.line(format!("  {l}"));
        }
    }
    ctx.report.witness = lines;
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    ctx: &mut Ctx<'_>,
    first: &Path,
    second: &Path,
    config: &Path,
    relation: Option<&Path>,
    mode: CheckMode,
    write_relation: Option<&Path>,
    verbose: bool,
    common: &Common,
) -> CmdResult {
    let sa = ctx.model(first)?;
    let sb = ctx.model(second)?;
    let cfg = ctx.config(config)?;
    cfg.check_delta(&sa.species_order(), &sb.species_order())
        .map_err(|e| input_error(format!("{}: {e}", config.display())))?;

    if let CheckMode::Shortcut = mode {
        let Some(rel_path) = relation else {
            return Err(input_error(
                "shortcut mode needs --relation in transformed coordinates",
            ));
        };
        let text = ctx.read(rel_path)?;
        let pairs =
            parse_vector_pairs::<i64, i64>(&text).map_err(|e| input_error(e.to_string()))?;
        return cmd_shortcut(ctx, &sa, &sb, &cfg, &pairs, verbose, common);
    }

    let la = ctx.lts(&sa, common.max_states)?;
    let lb = ctx.lts(&sb, common.max_states)?;
    let m = match mode {
        CheckMode::Slow => Mode::Slow,
        _ => Mode::FastSlow,
    };
    let outcome = match relation {
        Some(path) => {
            let text = ctx.read(path)?;
            let r = parse_relation(&text, &la, &lb)
                .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            match m {
                Mode::FastSlow => check_fast_slow_relation(&r, &la, &lb, &cfg)?,
                Mode::Slow => check_slow_relation(&r, &la, &lb, &cfg)?,
            }
        }
        None => {
            let steps = if verbose { usize::MAX } else { WITNESS_STEPS };
            let (rel, outcome) = largest(&la, &lb, &cfg, m, steps)?;
            ctx.report
                .details
                .insert("relationSize".into(), serde_json::json!(rel.len()));
            if let Some(path) = write_relation {
                write_file(path, &render_relation(&rel, &la, &lb))?;
            }
            outcome
        }
    };
    report_outcome(ctx, &outcome, &la, &lb, verbose, common);
    let code = match outcome.verdict {
        Verdict::Equivalent => EXIT_OK,
        Verdict::NotEquivalent => EXIT_NOT_EQUIVALENT,
        Verdict::RelationNotABisimulation => EXIT_NOT_BISIMULATION,
    };
    finish(ctx, common, code)
}

fn cmd_shortcut(
    ctx: &mut Ctx<'_>,
    sa: &SystemDef,
    sb: &SystemDef,
    cfg: &EquivConfig,
    pairs: &[(Vec<i64>, Vec<i64>)],
    verbose: bool,
    common: &Common,
) -> CmdResult {
    let outcome = match shortcut_check(sa, sb, cfg, pairs, common.max_states) {
        Ok(o) => o,
        Err(e @ (ShortcutError::Inapplicable(_) | ShortcutError::UnequalSlowCoordinates(_))) => {
            return Err(Fail(EXIT_SHORTCUT, e.to_string()))
        }
        Err(ShortcutError::Semantics(e)) => return Err(e.into()),
        Err(ShortcutError::Equivalence(e)) => return Err(e.into()),
        Err(e) => return Err(input_error(e.to_string())),
    };
    let la = ctx.lts(sa, common.max_states)?;
    let lb = ctx.lts(sb, common.max_states)?;
    let shown = match &outcome.cross_validation {
        Some(c) if !c.verdict.is_positive() => c.clone(),
        _ => outcome.slow.clone(),
    };
    let slow_names = outcome
        .first
        .slow
        .iter()
        .map(|v| outcome.first.vector_name(v))
        .collect::<Vec<_>>();
    ctx.report
        .details
        .insert("slowVariables".into(), serde_json::json!(slow_names));
    ctx.report.details.insert(
        "liftedPairs".into(),
        serde_json::json!(outcome.lifted.len()),
    );
    ctx.report.details.insert(
        "crossValidated".into(),
        serde_json::json!(outcome
            .cross_validation
            .as_ref()
            .map(|c| c.verdict.is_positive())),
    );
    if !common.json {
        ctx.line(format!("slow variables: {}", slow_names.join(", ")));
        ctx.line(format!("lifted pairs: {}", outcome.lifted.len()));
    }
    if outcome.certified() {
        report_outcome(ctx, &shown, &la, &lb, verbose, common);
        if !common.json {
            ctx.line("cross-validation: lifted relation is a fast-slow bisimulation");
        }
        finish(ctx, common, EXIT_OK)
    } else {
        // witnesses from the slow check refer to transformed states, which
        // share indices with the original ones
        report_outcome(ctx, &shown, &la, &lb, verbose, common);
        finish(ctx, common, EXIT_NOT_BISIMULATION)
    }
}

fn order_indices(
    names: &[String],
    wanted: Option<Vec<String>>,
    what: &str,
) -> Result<Vec<usize>, Fail> {
    match wanted {
        None => Ok((0..names.len()).collect()),
        Some(w) => {
            let idx: Vec<usize> = w
                .iter()
                .map(|n| {
                    names
                        .iter()
                        .position(|x| x == n)
                        .ok_or_else(|| input_error(format!("unknown {what} {n}")))
                })
                .collect::<Result<_, _>>()?;
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != names.len() || idx.len() != names.len() {
                return Err(input_error(format!(
                    "{what} order must list each {what} exactly once"
                )));
            }
            Ok(idx)
        }
    }
}

fn cmd_classify(
    ctx: &mut Ctx<'_>,
    model: &Path,
    config: &Path,
    species_order: Option<Vec<String>>,
    reaction_order: Option<Vec<String>>,
    common: &Common,
) -> CmdResult {
    let sys = ctx.model(model)?;
    let cfg = ctx.config(config)?;
    let cls = if species_order.is_none() && reaction_order.is_none() {
        classify(&sys, &cfg)
    } else {
        let m = fastslow::classification::stoich_matrix(&sys);
        let sp = order_indices(&m.species, species_order, "species")?;
        let rx = order_indices(&m.reactions, reaction_order, "reaction")?;
        classify_permuted(&sys, &cfg, &sp, &rx)
    }
    .map_err(|e| input_error(e.to_string()))?;
    let report = ClassificationReport::from(&cls);
    if common.json {
        ctx.line(serde_json::to_string_pretty(&report).expect("report serialises"));
    } else {
        ctx.line(cls.to_string());
        for w in &report.warnings {
            ctx.line(format!("warning: {w}"));
        }
    }
    Ok(if cls.slow.is_empty() {
        EXIT_SHORTCUT
    } else {
        EXIT_OK
    })
}

fn cmd_congruence(
    ctx: &mut Ctx<'_>,
    p1: &Path,
    p2: &Path,
    q: &Path,
    config: &Path,
    common: &Common,
) -> CmdResult {
    let s1 = ctx.model(p1)?;
    let s2 = ctx.model(p2)?;
    let sq = ctx.model(q)?;
    let cfg = ctx.config(config)?;
    let report = congruence_probe(&s1, &s2, &sq, &cfg, common.max_states)?;
    let set = |s: &std::collections::BTreeSet<String>| {
        format!("{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(", "))
    };
    let holds = report.side_condition_holds();
    let components = verdict_name(report.components.verdict);
    let composed = verdict_name(report.composed.verdict);
    ctx.report.verdict = Some(composed.to_string());
    ctx.report.details.insert(
        "sharedFastActions".into(),
        serde_json::json!([report.shared_with_first, report.shared_with_second]),
    );
    ctx.report
        .details
        .insert("sideConditionHolds".into(), serde_json::json!(holds));
    ctx.report
        .details
        .insert("components".into(), serde_json::json!(components));
    ctx.report
        .details
        .insert("composed".into(), serde_json::json!(composed));
    let (ca, cb) = &report.composed_systems;
    let witness = report
        .composed
        .witness
        .as_ref()
        .map(|w| describe_witness(w, ca, cb, false));
    if !common.json {
        ctx.line(format!(
            "shared fast actions (p1, q): {}",
            set(&report.shared_with_first)
        ));
        ctx.line(format!(
            "shared fast actions (p2, q): {}",
            set(&report.shared_with_second)
        ));
        ctx.line(format!(
            "side condition: {}",
            if holds { "holds" } else { "violated" }
        ));
        ctx.line(format!("p1 vs p2: {components}"));
        ctx.line(format!("p1 <*> q vs p2 <*> q: {composed}"));
        for l in witness.iter().flatten() {
            ctx.line(format!("  {l}"));
        }
    }
    ctx.report.witness = witness;
    let code = if holds && report.composed.verdict.is_positive() {
        EXIT_OK
    } else {
        EXIT_NOT_EQUIVALENT
    };
    finish(ctx, common, code)
}

fn pick<'a>(
    sys: &'a SystemDef,
    name: Option<&str>,
    path: &Path,
) -> Result<&'a fastslow::SpeciesDef, Fail> {
    match name {
        Some(n) => sys
            .species_def(n)
            .ok_or_else(|| input_error(format!("{}: no species {n}", path.display()))),
        None => sys
            .species
            .first()
            .ok_or_else(|| input_error(format!("{}: no species", path.display()))),
    }
}

fn cmd_extend(
    ctx: &mut Ctx<'_>,
    first: &Path,
    second: &Path,
    species: Option<&str>,
    with: Option<&str>,
) -> CmdResult {
    let sa = ctx.model(first)?;
    let sb = ctx.model(second)?;
    let a = pick(&sa, species, first)?;
    let b = pick(&sb, with, second)?;
    let ext = extend_species(a, b).map_err(|e| input_error(e.to_string()))?;
    let level = sa
        .tree
        .leaves()
        .into_iter()
        .find(|(s, _)| *s == a.name)
        .map_or(0, |(_, l)| l);
    let sys = SystemDef {
        tree: CompositionTree::leaf(ext.name.clone(), level),
        species: vec![ext],
        step_size: sa.step_size,
        params: sa.params.clone(),
        rates: sa.rates.clone(),
    };
    let text = render_model(&sys);
    let _ = write!(ctx.out, "{text}");
    Ok(EXIT_OK)
}
