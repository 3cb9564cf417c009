use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::models::{
    DecisionTreeClassifier, GaussianNb, KMeans, LinearRegression, LogisticRegression, Model, Dataset,
};
use crate::node::Node;
use crate::streaming::{self, Compression, RemoteCall, StreamClient, StreamConfig, StreamKey, KEY_ENV_VAR};
use crate::tensor::{decode_scalar, decode_tensor, is_scalar_node, is_tensor_node, Tensor, TensorData, KEY_STRUCTURE};
use crate::transport::{
    export_model, fingerprint, generate_signing_key, import_model, load_document, save_document,
    sign_document, signing_key_from_hex, validate_node, verify_document, verifying_key_from_hex,
    ModelDocument, SignedEnvelope,
};

use super::csv_table::CsvTable;
use super::qc::run_qc_pipeline;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "milo", version, about = "Train, inspect, validate, sign and serve transparent model files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model on a CSV file and export it
    Train(TrainArgs),
    /// Predict with an exported model; writes one `prediction` column
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Column to drop from the input before predicting
        #[arg(long)]
        target: Option<String>,
        /// Output CSV; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a model file
    Inspect { file: PathBuf },
    /// Check that a model file is pure data and restorable; exit 1 if not
    Validate { file: PathBuf },
    /// Create an ed25519 key pair as hex files
    Keygen {
        #[arg(long)]
        secret: PathBuf,
        #[arg(long)]
        public: PathBuf,
    },
    /// Sign a model file with a secret key file
    Sign {
        file: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Defaults to FILE with a `.signed.json` suffix
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a signed model file against a public key file; exit 1 if invalid
    Verify {
        file: PathBuf,
        #[arg(long)]
        key: PathBuf,
    },
    /// Host a model over HTTP until interrupted
    Serve(ServeArgs),
    /// Forward `predict` or `fit` to a running server
    Call(CallArgs),
    /// Run the export/import round-trip check on synthetic data
    Qc {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// LinearRegression, LogisticRegression, DecisionTreeClassifier, KMeans or GaussianNB
    /// (case and `-`/`_` are ignored)
    #[arg(long)]
    model: String,
    #[arg(long)]
    data: PathBuf,
    /// Target column; required except for KMeans
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    n_clusters: Option<usize>,
    #[arg(long)]
    random_state: Option<u64>,
    #[arg(long)]
    var_smoothing: Option<f64>,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// 32-byte pre-shared key as hex
    #[arg(long, env = KEY_ENV_VAR, hide_env_values = true)]
    key_hex: Option<String>,
    #[arg(long)]
    no_encrypt: bool,
    #[arg(long)]
    no_compress: bool,
    #[arg(long)]
    max_payload_bytes: Option<usize>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 8000)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[command(flatten)]
    channel: ChannelArgs,
}

#[derive(Debug, Args)]
struct CallArgs {
    /// `predict` or `fit`
    attribute: String,
    #[arg(long)]
    url: String,
    #[arg(long)]
    data: PathBuf,
    /// Target column: the labels for `fit`, dropped for `predict`
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    channel: ChannelArgs,
}

/// Failures that are the caller's fault rather than the operation's.
enum Failure {
    Usage(String),
    Op(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Op(e)
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 success, 1 operational failure, 2 usage error.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Op(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Train(args) => train(args),
        Command::Predict {
            model,
            data,
            target,
            out,
        } => {
            let model = import_model(&load_document(&model)?)?;
            let table = CsvTable::read(&data)?;
            let y = model.predict(&table.features(target.as_deref())?)?;
            write_output(out.as_deref(), |w| write_predictions(&y, w))?;
            Ok(EXIT_OK)
        }
        Command::Inspect { file } => {
            let doc = load_document(&file)?;
            print!("{}", summarize(&doc));
            Ok(EXIT_OK)
        }
        Command::Validate { file } => {
            let text = read_text(&file)?;
            let node = Node::parse(&text)?;
            let report = validate_node(&node);
            for f in &report.findings {
                println!("{f}");
            }
            let errors = report.errors().count();
            if report.ok {
                println!("valid ({} warnings)", report.findings.len());
                Ok(EXIT_OK)
            } else {
                println!("invalid ({errors} errors)");
                Ok(EXIT_FAILURE)
            }
        }
        Command::Keygen { secret, public } => {
            let key = generate_signing_key();
            write_text(&secret, &format!("{}\n", hex::encode(key.to_bytes())))?;
            write_text(&public, &format!("{}\n", hex::encode(key.verifying_key().to_bytes())))?;
            println!("fingerprint {}", fingerprint(&key.verifying_key()));
            Ok(EXIT_OK)
        }
        Command::Sign { file, key, out } => {
            let key = signing_key_from_hex(&read_text(&key)?)?;
            let signed = sign_document(&load_document(&file)?, &key);
            let out = out.unwrap_or_else(|| file.with_extension("signed.json"));
            write_text(&out, &(signed.to_pretty_string()? + "\n"))?;
            println!("signed {} ({})", out.display(), signed.public_key_fingerprint);
            Ok(EXIT_OK)
        }
        Command::Verify { file, key } => {
            let key = verifying_key_from_hex(&read_text(&key)?)?;
            let env = SignedEnvelope::parse(&read_text(&file)?)?;
            if verify_document(&env, &key)? {
                println!("signature valid ({})", env.public_key_fingerprint);
                Ok(EXIT_OK)
            } else {
                println!("signature INVALID");
                Ok(EXIT_FAILURE)
            }
        }
        Command::Serve(args) => {
            let mut cfg = channel_config(&args.channel)?;
            cfg.bind = args.bind;
            cfg.port = args.port;
            cfg.model_path = args.model;
            let handle = streaming::serve(cfg)?;
            println!("listening on {}", handle.url());
            let _ = io::stdout().flush();
            handle.join();
            Ok(EXIT_OK)
        }
        Command::Call(args) => call(args),
        Command::Qc { seed } => {
            let report = run_qc_pipeline(seed);
            println!("{report}");
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

fn canonical_model_name(name: &str) -> Option<&'static str> {
    let norm: String = name
        .chars()
        .filter(|c| *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect();
    Some(match norm.as_str() {
        "linearregression" | "linear" => crate::models::LINEAR_REGRESSION,
        "logisticregression" | "logistic" => crate::models::LOGISTIC_REGRESSION,
        "decisiontreeclassifier" | "decisiontree" | "tree" => crate::models::DECISION_TREE,
        "kmeans" => crate::models::KMEANS,
        "gaussiannb" | "naivebayes" | "gnb" => crate::models::GAUSSIAN_NB,
        _ => return None,
    })
}

fn train(a: TrainArgs) -> CliResult {
    let name = canonical_model_name(&a.model)
        .ok_or_else(|| Failure::Usage(format!("unknown model `{}`", a.model)))?;
    let mut model = Model::unfitted(name)?;
    match &mut model {
        Model::LinearRegression(m) => {
            *m = LinearRegression::new(!a.no_intercept);
        }
        Model::LogisticRegression(m) => {
            let d = LogisticRegression::default();
            *m = LogisticRegression::new(
                a.max_iter.unwrap_or(d.max_iter),
                a.tol.unwrap_or(d.tol),
                a.lr.unwrap_or(d.lr),
            );
        }
        Model::DecisionTreeClassifier(m) => {
            *m = DecisionTreeClassifier::new(a.max_depth.unwrap_or(m.max_depth));
        }
        Model::KMeans(m) => {
            *m = KMeans::new(
                a.n_clusters.unwrap_or(m.n_clusters),
                a.random_state.unwrap_or(m.random_state),
                a.max_iter.unwrap_or(m.max_iter),
            );
        }
        Model::GaussianNb(m) => {
            *m = GaussianNb::new(a.var_smoothing.unwrap_or(m.var_smoothing));
        }
    }
    let table = CsvTable::read(&a.data)?;
    let ds = match (&a.target, name) {
        (Some(t), _) => {
            let (x, y) = table.split_target(t)?;
            Dataset::new(x, Some(y))?
        }
        (None, crate::models::KMEANS) => Dataset::new(table.features(None)?, None)?,
        (None, _) => return Err(Failure::Usage(format!("--target is required for {name}"))),
    };
    model.fit(&ds)?;
    save_document(&export_model(&model)?, &a.out)?;
    println!("trained {name} on {} samples -> {}", ds.n_samples(), a.out.display());
    Ok(EXIT_OK)
}

fn channel_config(c: &ChannelArgs) -> std::result::Result<StreamConfig, Failure> {
    let key = match (&c.key_hex, c.no_encrypt) {
        (_, true) => None,
        (Some(hex), false) => Some(StreamKey::from_hex(hex)?),
        (None, false) => {
            return Err(Failure::Usage(format!(
                "a stream key is required (--key-hex or {KEY_ENV_VAR}) unless --no-encrypt is given"
            )))
        }
    };
    let mut cfg = StreamConfig::new(key);
    if c.no_compress {
        cfg.compression = Compression::None;
    }
    if let Some(limit) = c.max_payload_bytes {
        cfg.max_payload_bytes = limit;
    }
    Ok(cfg)
}

fn call(a: CallArgs) -> CliResult {
    let client = StreamClient::new(&a.url, channel_config(&a.channel)?)?;
    let table = CsvTable::read(&a.data)?;
    let mut args = crate::node::NodeMap::new();
    match a.attribute.as_str() {
        "fit" => match &a.target {
            Some(t) => {
                let (x, y) = table.split_target(t)?;
                args.insert("X".into(), crate::tensor::encode_tensor(&x));
                args.insert("y".into(), crate::tensor::encode_tensor(&y));
            }
            None => {
                args.insert("X".into(), crate::tensor::encode_tensor(&table.features(None)?));
            }
        },
        _ => {
            args.insert(
                "X".into(),
                crate::tensor::encode_tensor(&table.features(a.target.as_deref())?),
            );
        }
    }
    let reply = client.call(&RemoteCall::new(a.attribute.clone(), args))?;
    match reply.get("y") {
        Some(y) => {
            let y = decode_tensor(y)?;
            write_output(a.out.as_deref(), |w| write_predictions(&y, w))?;
        }
        None => {
            let text = reply.to_pretty_string() + "\n";
            write_output(a.out.as_deref(), |w| {
                w.write_all(text.as_bytes()).map_err(|e| Error::Csv(e.to_string()))
            })?;
        }
    }
    Ok(EXIT_OK)
}

fn write_predictions(y: &Tensor, w: &mut dyn Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Csv(e.to_string());
    out.write_record(["prediction"]).map_err(err)?;
    match y.data() {
        TensorData::Int64(v) => {
            for x in v {
                out.write_record([x.to_string()]).map_err(err)?;
            }
        }
        _ => {
            for x in y.to_f64_vec() {
                out.write_record([format!("{x:?}")]).map_err(err)?;
            }
        }
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))
}

fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        None => f(&mut io::stdout().lock()),
        Some(p) => {
            let mut file = fs::File::create(p).map_err(|source| Error::IoFailure {
                path: p.to_owned(),
                source,
            })?;
            f(&mut file)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::IoFailure {
        path: path.to_owned(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::IoFailure {
        path: path.to_owned(),
        source,
    })
}

fn describe(node: &Node) -> String {
    if is_tensor_node(node) {
        return match decode_tensor(node) {
            Ok(t) => format!("ndarray {} {:?}", t.dtype().as_str(), t.shape()),
            Err(e) => format!("ndarray (undecodable: {e})"),
        };
    }
    if is_scalar_node(node) {
        return match decode_scalar(node) {
            Ok(s) => format!("scalar {}", s.type_tag()),
            Err(e) => format!("scalar (undecodable: {e})"),
        };
    }
    match node {
        Node::Map(m) => match m.get(KEY_STRUCTURE).and_then(Node::as_str) {
            Some(tag) => tag.to_owned(),
            None => format!("map ({} keys)", m.len()),
        },
        Node::List(items) => format!("list ({} items)", items.len()),
        Node::String(s) => format!("string {s:?}"),
        other => format!("{} {}", other.kind_name(), other.to_compact_string()),
    }
}

fn summarize(doc: &ModelDocument) -> String {
    let mut s = format!(
        "model_type: {}\nsklearn_version: {}\npymilo_version: {}\nfields:\n",
        doc.model_type, doc.sklearn_version, doc.pymilo_version
    );
    if let Some(data) = doc.data.as_map() {
        let width = data.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in data {
            s.push_str(&format!("  {k:<width$}  {}\n", describe(v)));
        }
    }
    s
}
