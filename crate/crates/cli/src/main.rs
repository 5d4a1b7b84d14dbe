use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use story2pddl::events::PhrasalLexicon;
use story2pddl::harness::{
    argument_pair_predictions, check_conditionals, conditional_predictions, parameter_predictions, read_jsonl,
    run_pipeline, score_argument_pairs, score_conditionals, score_parameters, structure_file, write_outputs,
    HarnessError, PipelineConfig, ProviderMode, ScoreReport,
};
use story2pddl::knowledge::{normalize_key, MissPolicy, Relation};
use story2pddl::pddl::validate_syntax;
use story2pddl::structuring::SignalSet;
use story2pddl::synthesis::select_parameters;

/// Compile narrative annotations into a PDDL planning domain.
#[derive(Parser)]
#[command(name = "story2pddl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline and write a domain file plus its JSON trace.
    Compile(CompileArgs),
    /// Check a PDDL domain file.
    Validate { file: PathBuf },
    /// Print structured events and the provider keys they will query.
    Events {
        #[arg(required = true)]
        documents: Vec<PathBuf>,
    },
    /// Score condition detection against gold JSON Lines.
    ScoreCond(ScoreArgs),
    /// Score argument-event decisions against gold JSON Lines.
    ScoreArg(ScoreArgs),
    /// Score subject/object selection against gold JSON Lines.
    ScoreParam(ScoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProvidersArg {
    Fixture,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum NegationArg {
    Local,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissArg {
    Error,
    Neutral,
}

#[derive(Args)]
struct CompileArgs {
    /// TOML config; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Annotation files or directories (appended to the config's list).
    documents: Vec<PathBuf>,
    #[arg(long, value_enum)]
    providers: Option<ProvidersArg>,
    #[arg(long, value_enum)]
    negation: Option<NegationArg>,
    /// Output .pddl path; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Trace JSON path; defaults to next to the output file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    domain_name: Option<String>,
    /// Commonsense predictions fixture (JSON Lines).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Similarity fixture (JSON Lines).
    #[arg(long)]
    similarity: Option<PathBuf>,
    /// NLI fixture (JSON Lines).
    #[arg(long)]
    nli: Option<PathBuf>,
    /// What similarity/NLI fixtures answer for pairs they lack.
    #[arg(long, value_enum)]
    on_miss: Option<MissArg>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Gold JSON Lines file.
    #[arg(long)]
    gold: PathBuf,
    /// Prediction JSON Lines file.
    #[arg(long, conflicts_with = "documents")]
    predictions: Option<PathBuf>,
    /// Annotation files to derive predictions from; only ids present in
    /// the gold file are kept.
    #[arg(long, num_args = 1..)]
    documents: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn compile(args: CompileArgs) -> Result<(), HarnessError> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    config.documents.extend(args.documents);
    if let Some(p) = args.providers {
        config.providers.mode = match p {
            ProvidersArg::Fixture => ProviderMode::Fixture,
            ProvidersArg::Http => ProviderMode::Http,
        };
    }
    if let Some(n) = args.negation {
        config.negation = match n {
            NegationArg::Local => "local",
            NegationArg::Global => "global",
        }
        .into();
    }
    if let Some(m) = args.on_miss {
        config.providers.on_miss = match m {
            MissArg::Error => MissPolicy::Error,
            MissArg::Neutral => MissPolicy::Neutral,
        };
    }
    let overrides = [
        (args.output, &mut config.output),
        (args.trace, &mut config.trace),
        (args.predictions, &mut config.providers.predictions),
        (args.similarity, &mut config.providers.similarity),
        (args.nli, &mut config.providers.nli),
    ];
    for (flag, slot) in overrides {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if let Some(name) = args.domain_name {
        config.domain_name = name;
    }

    let output = run_pipeline(&config)?;
    write_outputs(&config, &output)?;
    if config.output.is_none() {
        print!("{}", output.pddl);
    }
    let problems: Vec<String> = validate_syntax(&output.pddl).iter().map(|d| d.to_string()).collect();
    if !problems.is_empty() {
        return Err(HarnessError::Input(format!("emitted PDDL failed validation: {}", problems.join("; "))));
    }
    eprintln!("{} action(s) in domain {}", output.domain.actions.len(), output.domain.name);
    Ok(())
}

fn validate(file: &Path) -> Result<bool, HarnessError> {
    let text = read(file)?;
    let diagnostics = validate_syntax(&text);
    for d in &diagnostics {
        println!("{}:{d}", file.display());
    }
    Ok(diagnostics.is_empty())
}

fn events(documents: &[PathBuf]) -> Result<(), HarnessError> {
    let lexicon = PhrasalLexicon::builtin();
    let signals = SignalSet::default();
    for path in documents {
        let (doc, _, structured) = structure_file(path, &lexicon, &signals)?;
        for e in &structured.events {
            let text = e.event_text(&doc.sentences[e.base.sentence_index]);
            let (x, o) = select_parameters(e);
            let relations: Vec<&str> = Relation::ALL
                .iter()
                .filter(|r| x.is_some() && (o.is_some() || !r.is_object_side()))
                .map(|r| r.as_str())
                .collect();
            let line = json!({
                "doc_id": structured.doc_id,
                "event": e.id(),
                "sentence": e.base.sentence_index,
                "verb": e.base.verb_text,
                "statement": e.base.is_statement,
                "text": text,
                "key": normalize_key(&text),
                "subject": x.map(|a| &a.resolved_text),
                "object": o.map(|a| &a.resolved_text),
                "condition_of": e.condition_of,
                "relations": relations,
            });
            println!("{line}");
        }
    }
    Ok(())
}

enum Task {
    Cond,
    Arg,
    Param,
}

fn score(task: Task, args: &ScoreArgs) -> Result<ScoreReport, HarnessError> {
    let gold_text = read(&args.gold)?;
    let derive = args.predictions.is_none();
    if derive && args.documents.is_empty() {
        return Err(HarnessError::Input("give --predictions or --documents".into()));
    }
    let lexicon = PhrasalLexicon::builtin();
    let signals = SignalSet::default();
    let mut structured = Vec::new();
    for path in &args.documents {
        structured.push(structure_file(path, &lexicon, &signals)?);
    }
    match task {
        Task::Cond => {
            let gold = read_jsonl(&gold_text)?;
            check_conditionals(&gold)?;
            let mut preds = match &args.predictions {
                Some(p) => read_jsonl(&read(p)?)?,
                None => structured.iter().flat_map(|(d, _, s)| conditional_predictions(d, s)).collect(),
            };
            if derive {
                preds.retain(|p| gold.iter().any(|g| g.sentence_id == p.sentence_id));
            }
            score_conditionals(&preds, &gold)
        }
        Task::Arg => {
            let gold: Vec<story2pddl::harness::GoldContainmentPair> = read_jsonl(&gold_text)?;
            let mut preds = match &args.predictions {
                Some(p) => read_jsonl(&read(p)?)?,
                None => structured
                    .iter()
                    .flat_map(|(d, ev, s)| argument_pair_predictions(&d.doc_id, ev, s))
                    .collect(),
            };
            if derive {
                preds.retain(|p| gold.iter().any(|g| g.sentence_id == p.sentence_id));
            }
            score_argument_pairs(&preds, &gold)
        }
        Task::Param => {
            let gold: Vec<story2pddl::harness::GoldParameters> = read_jsonl(&gold_text)?;
            let mut preds = match &args.predictions {
                Some(p) => read_jsonl(&read(p)?)?,
                None => structured.iter().flat_map(|(_, _, s)| parameter_predictions(s)).collect(),
            };
            if derive {
                preds.retain(|p| gold.iter().any(|g| g.event_id == p.event_id));
            }
            score_parameters(&preds, &gold)
        }
    }
}

fn report(result: Result<ScoreReport, HarnessError>) -> Result<(), HarnessError> {
    let r = result?;
    eprintln!("{}", r.summary());
    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Compile(args) => compile(args),
        Command::Validate { file } => match validate(&file) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Command::Events { documents } => events(&documents),
        Command::ScoreCond(args) => report(score(Task::Cond, &args)),
        Command::ScoreArg(args) => report(score(Task::Arg, &args)),
        Command::ScoreParam(args) => report(score(Task::Param, &args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
