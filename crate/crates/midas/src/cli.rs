//! The `midas` command line.
//!
//! Failures print one line, `error[<category>]: <detail>`, and exit with
//! 2 (usage), 3 (data) or 4 (model).

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use midas_core::classifier::{
    self, DecodingConfig, EncoderSpec, Example, ModelBundle, TrainingConfig, TrainingMode,
};
use midas_core::context::{build_context, ContextMode};
use midas_core::corpus::{attach_annotations, AnnotationRecord, Speaker};
use midas_core::metrics::{cohen_kappa, corpus_prf, KappaMode, SampleScore};
use midas_core::segmenter::{reformat, train_segmenter, FeatureConfig, SegmentError, SegmenterConfig, SegmenterModel};
use midas_core::swda::{build_transfer_set, MapTarget, MappingTable, UnresolvedPolicy};
use midas_core::taxonomy::{PriorityOrder, TaxonomyError};
use midas_core::{LabelSet, Taxonomy};
use serde_json::json;

use crate::formats::{self, content_lines, examples::ExampleLine, examples::PredictionLine, render_jsonl, FileError};
use crate::ingest;
use crate::service::{self, ServiceConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Model(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Model(_) => "model",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Model(_) => 4,
        }
    }

    fn detail(&self) -> &str {
        match self {
            CliError::Usage(s) | CliError::Data(s) | CliError::Model(s) => s,
        }
    }
}

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

fn model_err(e: impl Display) -> CliError {
    CliError::Model(e.to_string())
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        data(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "midas", version, about = "Dialog-act segmentation, classification and annotation")]
struct Cli {
    /// Seed for every random choice (weight initialization, shuffling)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Scheme file to use instead of the built-in 23-tag scheme
    #[arg(long, global = true, value_name = "FILE")]
    scheme: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the tag scheme and check label sets
    #[command(subcommand)]
    Scheme(SchemeCmd),
    /// Ingest and check corpus files
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Train and apply the utterance segmenter
    #[command(subcommand)]
    Segment(SegmentCmd),
    /// Render classifier inputs from a corpus
    #[command(subcommand)]
    Context(ContextCmd),
    /// Train, apply and evaluate the dialog-act classifier
    #[command(subcommand)]
    Da(DaCmd),
    /// Score predictions and annotator agreement
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Map Switchboard dialog acts and build transfer data
    #[command(subcommand)]
    Swda(SwdaCmd),
    /// Run the annotation service
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeFormat {
    /// Declarative scheme file
    File,
    /// Markdown table of tags
    Doc,
}

#[derive(Subcommand)]
enum SchemeCmd {
    /// Print the scheme
    Show {
        #[arg(long, value_enum, default_value = "file")]
        format: SchemeFormat,
        /// Write here instead of standard output
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a proposed label set; exits 3 when it breaks a rule
    Validate {
        #[arg(required = true)]
        tags: Vec<String>,
    },
    /// Reduce candidate tags to a legal label set by group priority
    Prioritize {
        #[arg(required = true)]
        tags: Vec<String>,
        /// Preferred group order, comma separated; unnamed groups follow in tree order
        #[arg(long, value_delimiter = ',')]
        order: Vec<String>,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Normalize and segment raw conversations into a corpus file
    Ingest {
        /// Raw conversations, JSON lines of {"id", "turns": [{"speaker", "text"}]}
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Segmenter model used to split human turns
        #[arg(long)]
        segmenter: Option<PathBuf>,
    },
    /// Validate a corpus file and print counts
    Check {
        #[arg(long)]
        input: PathBuf,
        /// Annotation log to validate against the corpus
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Join an annotation log onto a corpus (latest record per annotator wins)
    Attach {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum SegmentCmd {
    /// Train a boundary model on punctuated text, one utterance per line
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.5)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1e-5)]
        l2: f64,
        /// Boundary probability at or above which a split is made
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Tokens on each side of a gap used as features
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        orders: Vec<usize>,
    },
    /// Segment utterances, one per line; units are joined by " [SEG] "
    Apply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Boundary precision/recall/F1 against punctuated gold text
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Print a JSON report
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Text,
    Da,
    DaPlusText,
}

impl From<ModeArg> for ContextMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Text => ContextMode::Text,
            ModeArg::Da => ContextMode::Da,
            ModeArg::DaPlusText => ContextMode::DaPlusText,
        }
    }
}

#[derive(Subcommand)]
enum ContextCmd {
    /// Write one classifier example per human segment
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        mode: ModeArg,
        /// Annotation log supplying labels (required for the da modes)
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Whose labels to use when the log has several annotators
        #[arg(long)]
        annotator: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainModeArg {
    SingleLabel,
    MultiLabel,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    /// Hidden layer widths, comma separated; pass an empty value for a linear head
    #[arg(long, value_delimiter = ',', default_value = "64", num_args = 0..)]
    hidden: Vec<usize>,
    /// N-gram orders of the built-in encoder
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    orders: Vec<usize>,
    /// Score at or above which the second-best tag is kept
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// How the inputs were rendered (recorded in the model)
    #[arg(long, value_enum, default_value = "text")]
    context_mode: ModeArg,
}

impl TrainArgs {
    fn config(&self, seed: u64, mode: TrainingMode) -> Result<(TrainingConfig, DecodingConfig)> {
        let t = TrainingConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            mode,
            hidden: self.hidden.clone(),
            ngram_orders: self.orders.clone(),
            context_mode: self.context_mode.into(),
        };
        t.check().map_err(usage)?;
        let d = DecodingConfig::new(self.threshold).map_err(usage)?;
        Ok((t, d))
    }
}

#[derive(Subcommand)]
enum DaCmd {
    /// Train a classifier on labeled examples
    Train {
        /// Examples, JSON lines of {"id", "input", "labels"}
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "multi-label")]
        mode: TrainModeArg,
        /// Precomputed input vectors, JSON lines of {"input", "vector"}, used instead of n-grams
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict label sets for examples
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the model's second-label threshold
        #[arg(long)]
        threshold: Option<f64>,
        /// Include per-tag scores
        #[arg(long)]
        scores: bool,
    },
    /// Evaluate predictions or a model
    #[command(subcommand)]
    Eval(DaEvalCmd),
    /// Single-label pretraining on mapped Switchboard data, then multi-label fine-tuning
    Transfer {
        /// Transfer examples from `swda build`
        #[arg(long)]
        swda: PathBuf,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Write per-stage metrics here as JSON
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
}

#[derive(Args)]
struct PrfArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum DaEvalCmd {
    /// Sample-averaged precision/recall/F1 of a prediction file
    Prf(PrfArgs),
    /// Predict labeled examples with a model and score the result
    Model {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KappaArg {
    ExactSet,
    PerTagMean,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Sample-averaged precision/recall/F1 of a prediction file
    Prf(PrfArgs),
    /// Cohen's kappa between two annotators in an annotation log
    Kappa {
        #[arg(long)]
        annotations: PathBuf,
        /// First annotator; may be omitted when the log has exactly two
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        #[arg(long, value_enum, default_value = "exact-set")]
        mode: KappaArg,
        /// Score only segments both annotators labeled
        #[arg(long)]
        shared_only: bool,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum SwdaCmd {
    /// Look up act codes in the mapping table
    Map {
        #[arg(required = true)]
        codes: Vec<String>,
        /// Mapping table file instead of the built-in table
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Print the mapping table in its file format
    Table {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build single-label transfer examples from transcripts
    Build {
        /// Transcripts, tab separated: transcript, speaker, act tag, text
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        /// `drop`, or a tag that unresolved acts are mapped to
        #[arg(long, default_value = "drop")]
        unresolved: String,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Service configuration file
    #[arg(long, env = "MIDAS_CONFIG")]
    config: PathBuf,
    /// Override the configured port
    #[arg(long)]
    port: Option<u16>,
    /// Override the configured bind address
    #[arg(long)]
    host: Option<String>,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(err, "error[usage]: {first}");
            return 2;
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let detail = e.detail().replace('\n', " ");
            let _ = writeln!(err, "error[{}]: {detail}", e.category());
            e.exit_code()
        }
    }
}

fn taxonomy(scheme: &Option<PathBuf>) -> Result<Taxonomy> {
    match scheme {
        Some(p) => Ok(formats::scheme::read_scheme(p)?),
        None => Ok(Taxonomy::builtin()),
    }
}

fn emit(out: &mut dyn Write, output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => Ok(formats::write_text(p, text)?),
        None => out.write_all(text.as_bytes()).map_err(data),
    }
}

fn load_bundle(path: &Path, tax: &Taxonomy) -> Result<ModelBundle> {
    let b: ModelBundle = formats::read_json(path).map_err(model_err)?;
    b.check(tax).map_err(|e| model_err(format!("{}: {e}", path.display())))?;
    Ok(b)
}

fn load_segmenter(path: &Path) -> Result<SegmenterModel> {
    let m: SegmenterModel = formats::read_json(path).map_err(model_err)?;
    if m.format_version != midas_core::segmenter::SEGMENTER_FORMAT_VERSION {
        return Err(model_err(format!("{}: unsupported format version {}", path.display(), m.format_version)));
    }
    Ok(m)
}

fn print_prf(out: &mut dyn Write, s: &SampleScore, n: usize, json: bool) -> Result<()> {
    let line = if json {
        json!({ "precision": s.precision, "recall": s.recall, "f1": s.f1, "samples": n }).to_string()
    } else {
        format!("precision={:.4} recall={:.4} f1={:.4} samples={n}", s.precision, s.recall, s.f1)
    };
    writeln!(out, "{line}").map_err(data)
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let seed = cli.seed;
    let scheme = cli.scheme;
    match cli.command {
        Command::Scheme(c) => scheme_cmd(c, &taxonomy(&scheme)?, out),
        Command::Corpus(c) => corpus_cmd(c, &taxonomy(&scheme)?, out),
        Command::Segment(c) => segment_cmd(c, seed, out),
        Command::Context(c) => context_cmd(c, &taxonomy(&scheme)?, err),
        Command::Da(c) => da_cmd(c, seed, &taxonomy(&scheme)?, out, err),
        Command::Eval(c) => eval_cmd(c, &taxonomy(&scheme)?, out),
        Command::Swda(c) => swda_cmd(c, &taxonomy(&scheme)?, out, err),
        Command::Serve(a) => serve_cmd(a, scheme),
    }
}

fn label_error(e: TaxonomyError) -> CliError {
    data(e)
}

fn scheme_cmd(c: SchemeCmd, tax: &Taxonomy, out: &mut dyn Write) -> Result<()> {
    match c {
        SchemeCmd::Show { format, output } => {
            let text = match format {
                SchemeFormat::File => formats::scheme::render_scheme(tax.spec()),
                SchemeFormat::Doc => formats::scheme::render_doc_table(tax),
            };
            emit(out, &output, &text)
        }
        SchemeCmd::Validate { tags } => {
            let v = tax.validate(&tags).map_err(label_error)?;
            writeln!(out, "{}", json!({ "ok": v.is_ok(), "violations": v.violations })).map_err(data)?;
            if v.is_ok() {
                Ok(())
            } else {
                let msgs: Vec<String> = v.violations.iter().map(|x| x.to_string()).collect();
                Err(data(msgs.join("; ")))
            }
        }
        SchemeCmd::Prioritize { tags, order } => {
            let order = if order.is_empty() {
                PriorityOrder::standard(tax)
            } else {
                PriorityOrder::new(tax, &order).map_err(usage)?
            };
            let set = tax.prioritize(&tags, &order).map_err(label_error)?;
            writeln!(out, "{}", set.joined()).map_err(data)
        }
    }
}

fn corpus_cmd(c: CorpusCmd, tax: &Taxonomy, out: &mut dyn Write) -> Result<()> {
    match c {
        CorpusCmd::Ingest { input, output, segmenter } => {
            let raw = ingest::read_raw(&input)?;
            let model = segmenter.as_deref().map(load_segmenter).transpose()?;
            let convs = ingest::ingest(&raw, model.as_ref()).map_err(data)?;
            formats::corpus::write_corpus(&output, &convs)?;
            let units: usize = convs.iter().map(|c| c.units().count()).sum();
            writeln!(out, "conversations={} units={units}", convs.len()).map_err(data)
        }
        CorpusCmd::Check { input, annotations } => {
            let convs = formats::corpus::read_corpus(&input)?;
            let units: Vec<_> = convs.iter().flat_map(|c| c.units()).collect();
            let human = units.iter().filter(|u| u.speaker == Speaker::Human).count();
            let mut line = format!("conversations={} units={} human_units={human}", convs.len(), units.len());
            if let Some(p) = annotations {
                let recs = formats::corpus::read_log(&p, tax)?;
                let n = recs.len();
                let ac = attach_annotations(convs, recs, tax).map_err(data)?;
                line.push_str(&format!(" records={n} annotated_segments={}", ac.annotations.len()));
            }
            writeln!(out, "{line}").map_err(data)
        }
        CorpusCmd::Attach { corpus, annotations, output } => {
            let convs = formats::corpus::read_corpus(&corpus)?;
            let recs = formats::corpus::read_log(&annotations, tax)?;
            let ac = attach_annotations(convs, recs, tax).map_err(data)?;
            formats::corpus::write_annotated(&output, &ac)?;
            Ok(())
        }
    }
}

fn boundary_examples(path: &Path) -> Result<Vec<midas_core::segmenter::BoundaryExample>> {
    let origin = path.display().to_string();
    let text = formats::read_text(path)?;
    content_lines(&text)
        .map(|(n, l)| reformat(l).map_err(|e| data(FileError::parse(&origin, n, e))))
        .collect()
}

fn segment_error(e: SegmentError) -> CliError {
    match e {
        SegmentError::Config(_) => usage(e),
        _ => data(e),
    }
}

fn segment_cmd(c: SegmentCmd, seed: u64, out: &mut dyn Write) -> Result<()> {
    match c {
        SegmentCmd::Train { input, output, epochs, learning_rate, l2, threshold, radius, orders } => {
            let config = SegmenterConfig {
                features: FeatureConfig { radius, orders },
                learning_rate,
                epochs,
                l2,
                threshold,
                seed,
            };
            let examples = boundary_examples(&input)?;
            let m = train_segmenter(&examples, &config).map_err(segment_error)?;
            formats::write_json(&output, &m)?;
            let s = &m.training_score;
            writeln!(out, "training precision={:.4} recall={:.4} f1={:.4}", s.precision, s.recall, s.f1).map_err(data)
        }
        SegmentCmd::Apply { model, input, output } => {
            let m = load_segmenter(&model)?;
            let text = formats::read_text(&input)?;
            let mut result = String::new();
            for line in text.lines() {
                result.push_str(&m.segment(line).join(" [SEG] "));
                result.push('\n');
            }
            emit(out, &output, &result)
        }
        SegmentCmd::Eval { model, input, json } => {
            let m = load_segmenter(&model)?;
            let gold = boundary_examples(&input)?;
            let s = m.evaluate(&gold).map_err(segment_error)?;
            let line = if json {
                serde_json::to_string(&s).expect("serializable")
            } else {
                format!("precision={:.4} recall={:.4} f1={:.4} utterances={}", s.precision, s.recall, s.f1, gold.len())
            };
            writeln!(out, "{line}").map_err(data)
        }
    }
}

/// Latest label set per segment from one annotator of a log.
fn annotator_labels(records: &[AnnotationRecord], annotator: Option<&str>) -> Result<BTreeMap<String, LabelSet>> {
    let who: BTreeSet<&str> = records.iter().map(|r| r.annotator_id.as_str()).collect();
    let chosen = match annotator {
        Some(a) => {
            if !who.contains(a) {
                return Err(data(format!("annotator `{a}` has no records")));
            }
            a
        }
        None if who.len() <= 1 => who.iter().next().copied().unwrap_or(""),
        None => return Err(usage(format!("log has {} annotators; choose one with --annotator", who.len()))),
    };
    Ok(records
        .iter()
        .filter(|r| r.annotator_id == chosen)
        .map(|r| (r.segment_id.clone(), r.labels.clone()))
        .collect())
}

fn context_cmd(c: ContextCmd, tax: &Taxonomy, err: &mut dyn Write) -> Result<()> {
    let ContextCmd::Build { corpus, output, mode, annotations, annotator } = c;
    let convs = formats::corpus::read_corpus(&corpus)?;
    let labels = match &annotations {
        Some(p) => {
            let recs = formats::corpus::read_log(p, tax)?;
            let ac = attach_annotations(convs.clone(), recs.clone(), tax).map_err(data)?;
            drop(ac);
            annotator_labels(&recs, annotator.as_deref())?
        }
        None => BTreeMap::new(),
    };
    let mode: ContextMode = mode.into();
    if mode != ContextMode::Text && annotations.is_none() {
        return Err(usage("the da modes need --annotations"));
    }
    let mut lines = Vec::new();
    for conv in &convs {
        for u in conv.units().filter(|u| u.speaker == Speaker::Human) {
            let input = build_context(conv, &u.id, mode, Some(&labels)).map_err(data)?;
            let labels = labels.get(&u.id).map(|l| l.tags().to_vec());
            lines.push(ExampleLine { id: u.id.clone(), input, labels });
        }
    }
    let labeled = lines.iter().filter(|l| l.labels.is_some()).count();
    formats::write_text(&output, &render_jsonl(&lines))?;
    writeln!(err, "examples={} labeled={labeled}", lines.len()).map_err(data)
}

fn classifier_error(e: classifier::ClassifierError) -> CliError {
    match e {
        classifier::ClassifierError::Config(_) => usage(e),
        _ => data(e),
    }
}

fn write_bundle(path: &Path, mut bundle: ModelBundle, decoding: DecodingConfig) -> Result<ModelBundle> {
    bundle.decoding = decoding;
    formats::write_json(path, &bundle)?;
    Ok(bundle)
}

fn da_cmd(c: DaCmd, seed: u64, tax: &Taxonomy, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match c {
        DaCmd::Train { examples, output, mode, vectors, train } => {
            let mode = match mode {
                TrainModeArg::SingleLabel => TrainingMode::SingleLabel,
                TrainModeArg::MultiLabel => TrainingMode::MultiLabel,
            };
            let (config, decoding) = train.config(seed, mode)?;
            let ex: Vec<Example> = formats::examples::read_examples(&examples, tax)?.into_iter().map(|(_, e)| e).collect();
            let bundle = match vectors {
                Some(p) => {
                    let enc = formats::examples::read_vectors(&p)?;
                    let missing = ex.iter().filter(|e| !enc.contains(&e.input)).count();
                    if missing > 0 {
                        writeln!(err, "warning: {missing} training inputs have no vector and encode as zeros").map_err(data)?;
                    }
                    classifier::train_with_encoder(&ex, EncoderSpec::Precomputed(enc), &config, tax)
                }
                None => classifier::train(&ex, &config, tax),
            }
            .map_err(classifier_error)?;
            let bundle = write_bundle(&output, bundle, decoding)?;
            let score = bundle.evaluate(&ex, tax).expect("non-empty");
            let loss = bundle.epoch_losses.last().copied().unwrap_or(f64::NAN);
            writeln!(out, "examples={} final_loss={loss:.6} train_f1={:.4}", ex.len(), score.f1).map_err(data)
        }
        DaCmd::Predict { model, input, output, threshold, scores } => {
            let mut bundle = load_bundle(&model, tax)?;
            if let Some(t) = threshold {
                bundle.decoding = DecodingConfig::new(t).map_err(usage)?;
            }
            let lines = formats::examples::read_example_lines(&input)?;
            let preds: Vec<PredictionLine> = lines
                .iter()
                .map(|l| {
                    let s = bundle.predict_scores(&l.input);
                    let labels = classifier::decode(&s, &bundle.decoding, tax);
                    PredictionLine {
                        id: l.id.clone(),
                        labels: labels.tags().to_vec(),
                        scores: scores.then(|| bundle.tags.iter().cloned().zip(s).collect()),
                    }
                })
                .collect();
            emit(out, &output, &render_jsonl(&preds))
        }
        DaCmd::Eval(DaEvalCmd::Prf(a)) => prf_cmd(&a, tax, out),
        DaCmd::Eval(DaEvalCmd::Model { model, examples, json }) => {
            let bundle = load_bundle(&model, tax)?;
            let ex: Vec<Example> = formats::examples::read_examples(&examples, tax)?.into_iter().map(|(_, e)| e).collect();
            let s = bundle.evaluate(&ex, tax).ok_or_else(|| data("no examples"))?;
            print_prf(out, &s, ex.len(), json)
        }
        DaCmd::Transfer { swda, examples, output, report, train } => {
            let (config, decoding) = train.config(seed, TrainingMode::MultiLabel)?;
            let source: Vec<Example> =
                formats::examples::read_transfer_examples(&swda)?.into_iter().map(Example::from).collect();
            let target: Vec<Example> =
                formats::examples::read_examples(&examples, tax)?.into_iter().map(|(_, e)| e).collect();
            let outcome = classifier::transfer_pipeline(&source, &target, &config, tax).map_err(classifier_error)?;
            write_bundle(&output, outcome.bundle, decoding)?;
            let text = serde_json::to_string(&json!({ "stages": outcome.stages })).expect("serializable");
            match report {
                Some(p) => formats::write_text(&p, &format!("{text}\n"))?,
                None => writeln!(out, "{text}").map_err(data)?,
            }
            Ok(())
        }
    }
}

fn prf_cmd(a: &PrfArgs, tax: &Taxonomy, out: &mut dyn Write) -> Result<()> {
    let gold = formats::examples::read_labels(&a.gold, tax)?;
    let pred = formats::examples::read_labels(&a.pred, tax)?;
    let missing: Vec<&String> = gold.keys().filter(|k| !pred.contains_key(*k)).collect();
    let extra: Vec<&String> = pred.keys().filter(|k| !gold.contains_key(*k)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(data(format!(
            "gold and predictions cover different ids ({} without prediction, {} without gold)",
            missing.len(),
            extra.len()
        )));
    }
    let s = corpus_prf(gold.iter().map(|(k, g)| (g, &pred[k]))).map_err(data)?;
    print_prf(out, &s, gold.len(), a.json)
}

fn eval_cmd(c: EvalCmd, tax: &Taxonomy, out: &mut dyn Write) -> Result<()> {
    match c {
        EvalCmd::Prf(a) => prf_cmd(&a, tax, out),
        EvalCmd::Kappa { annotations, a, b, mode, shared_only, json } => {
            let recs = formats::corpus::read_log(&annotations, tax)?;
            let who: Vec<String> = recs.iter().map(|r| r.annotator_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
            let (a, b) = match (a, b) {
                (Some(a), Some(b)) => (a, b),
                (None, None) if who.len() == 2 => (who[0].clone(), who[1].clone()),
                _ => return Err(usage(format!("name both annotators with --a and --b (log has {})", who.len()))),
            };
            let mut la = annotator_labels(&recs, Some(&a))?;
            let mut lb = annotator_labels(&recs, Some(&b))?;
            if shared_only {
                la.retain(|k, _| lb.contains_key(k));
                lb.retain(|k, _| la.contains_key(k));
            }
            let mode = match mode {
                KappaArg::ExactSet => KappaMode::ExactSet,
                KappaArg::PerTagMean => KappaMode::PerTagMean,
            };
            let k = cohen_kappa(&la, &lb, mode).map_err(data)?;
            let line = if json {
                json!({ "a": a, "b": b, "mode": mode, "segments": la.len(), "kappa": k }).to_string()
            } else {
                format!("kappa={k:.4} segments={}", la.len())
            };
            writeln!(out, "{line}").map_err(data)
        }
    }
}

fn mapping(table: &Option<PathBuf>, tax: &Taxonomy) -> Result<MappingTable> {
    match table {
        Some(p) => Ok(formats::mapping::read_mapping(p, tax)?),
        None => Ok(MappingTable::builtin(tax)),
    }
}

fn swda_cmd(c: SwdaCmd, tax: &Taxonomy, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match c {
        SwdaCmd::Map { codes, table } => {
            let t = mapping(&table, tax)?;
            for code in codes {
                let target = t.map_tag(&code).map_err(data)?;
                writeln!(out, "{code}\t{}", target.as_str()).map_err(data)?;
            }
            Ok(())
        }
        SwdaCmd::Table { table, output } => {
            let t = mapping(&table, tax)?;
            emit(out, &output, &formats::mapping::render_mapping(&t))
        }
        SwdaCmd::Build { input, output, table, unresolved } => {
            let t = mapping(&table, tax)?;
            let policy = if unresolved == "drop" {
                UnresolvedPolicy::Drop
            } else {
                let id = tax.resolve(&unresolved).ok_or_else(|| usage(format!("unknown tag `{unresolved}`")))?;
                UnresolvedPolicy::MapTo(id.to_owned())
            };
            let transcripts = formats::swda::read_transcripts(&input)?;
            let ex = build_transfer_set(&transcripts, &t, &policy, tax).map_err(data)?;
            formats::write_text(&output, &render_jsonl(&ex))?;
            let total: usize = transcripts.iter().map(|t| t.utterances.len()).sum();
            let unresolved_rules = t.rules().iter().filter(|r| r.target == MapTarget::Unresolved).count();
            writeln!(err, "utterances={total} examples={} unresolved_rules={unresolved_rules}", ex.len()).map_err(data)
        }
    }
}

fn serve_cmd(a: ServeArgs, scheme: Option<PathBuf>) -> Result<()> {
    let mut config = ServiceConfig::load(&a.config)?;
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(h) = a.host {
        config.host = h;
    }
    if scheme.is_some() {
        config.scheme = scheme;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(data)?;
    rt.block_on(service::serve(config)).map_err(data)
}
