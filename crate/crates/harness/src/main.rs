use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use raf_core::attack::{complexity_bound, raf_attack, AttackConfig, AttackStatus, Composition, Goal};
use raf_core::landmarks::{LandmarkSet, ReferenceSpace};
use raf_core::oracle::{Gallery, LocalOracle, Oracle, OracleError, RemoteOracle};
use raf_core::warp::{warp_face, Image, WarpFunction, WarpSpec};
use raf_harness::campaign::{run_campaign, write_report, ReportFormat};
use raf_harness::corpus::ingest_corpus;
use raf_harness::server::serve_oracle;
use raf_harness::HarnessError;

#[derive(Parser)]
#[command(name = "raf", version, about = "Landmark-driven face warping attacks on identification oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply one warping function to a face image.
    Warp {
        image: PathBuf,
        lms: PathBuf,
        #[arg(long)]
        function: WarpFunction,
        #[arg(long)]
        scale: f64,
        /// Output PNG; the warped landmarks go next to it as `.lms`.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Attack a single face.
    Attack {
        image: PathBuf,
        lms: PathBuf,
        /// True identity of the face.
        #[arg(long)]
        label: String,
        #[command(flatten)]
        attack: AttackArgs,
        /// Output directory for adversarial.png, adversarial.lms and trace.json.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Attack every face in a corpus directory.
    Campaign {
        root: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        attack: AttackArgs,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Serve a gallery over HTTP.
    ServeOracle {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Queries allowed per client token.
        #[arg(long)]
        budget: Option<u32>,
    },
    /// Evaluate the recursive query-complexity bound.
    Bound {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        xi: f64,
        #[arg(long, default_value_t = 1.0)]
        base: f64,
    },
}

#[derive(Args)]
struct AttackArgs {
    /// `local:<manifest>` or `remote:<url>`. Campaigns default to the corpus manifest.
    #[arg(long)]
    oracle: Option<String>,
    /// Client token sent to remote oracles.
    #[arg(long)]
    token: Option<String>,
    #[arg(long, default_value_t = 7)]
    budget: u32,
    #[arg(long, default_value = "either")]
    goal: Goal,
    #[arg(long, value_delimiter = ',', default_value = "sn,smile,re")]
    order: Vec<WarpFunction>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    scales: Vec<f64>,
    #[arg(long, default_value = "cumulative")]
    composition: Composition,
}

impl AttackArgs {
    fn config(&self) -> Result<AttackConfig, HarnessError> {
        let config = AttackConfig {
            order: self.order.clone(),
            scales: self.scales.clone(),
            budget: self.budget,
            goal: self.goal,
            composition: self.composition,
            ..AttackConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

enum OracleSpec {
    Local(Arc<Gallery>),
    Remote(String),
}

impl OracleSpec {
    fn parse(spec: &str) -> Result<Self, HarnessError> {
        if let Some(path) = spec.strip_prefix("local:") {
            Ok(OracleSpec::Local(Arc::new(Gallery::from_manifest(path)?)))
        } else if let Some(url) = spec.strip_prefix("remote:") {
            Ok(OracleSpec::Remote(url.to_string()))
        } else {
            Err(HarnessError::Config(format!(
                "oracle must be local:<manifest> or remote:<url>, got {spec:?}"
            )))
        }
    }

    fn build(&self, token: Option<&str>) -> Result<Box<dyn Oracle + Send>, OracleError> {
        Ok(match self {
            OracleSpec::Local(g) => Box::new(LocalOracle::new(Arc::clone(g))),
            OracleSpec::Remote(url) => Box::new(RemoteOracle::new(url, token.map(str::to_string))?),
        })
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Warp {
            image,
            lms,
            function,
            scale,
            out,
        } => {
            let img = Image::read_png(&image)?;
            let landmarks = LandmarkSet::read_sidecar(&lms)?;
            let spec = WarpSpec::new(function, scale)?;
            let (warped, warped_lms) = warp_face(&img, &landmarks, spec, &ReferenceSpace::canonical())?;
            warped.write_png(&out)?;
            warped_lms.write_sidecar(out.with_extension("lms"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack {
            image,
            lms,
            label,
            attack,
            out,
        } => {
            let config = attack.config()?;
            let spec = attack
                .oracle
                .as_deref()
                .ok_or_else(|| HarnessError::Config("--oracle is required".into()))?;
            let img = Image::read_png(&image)?;
            let landmarks = LandmarkSet::read_sidecar(&lms)?;
            let mut oracle = OracleSpec::parse(spec)?.build(attack.token.as_deref())?;
            let outcome = raf_attack(&img, &landmarks, &label, &mut oracle, &config)?;

            std::fs::create_dir_all(&out).map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;
            outcome.final_image.write_png(out.join("adversarial.png"))?;
            outcome.final_landmarks.write_sidecar(out.join("adversarial.lms"))?;
            let trace = serde_json::json!({
                "label": label,
                "status": outcome.status,
                "queries_used": outcome.queries_used,
                "final_delta": outcome.final_delta,
                "config": config,
                "trace": outcome.trace,
            });
            let mut text = serde_json::to_string_pretty(&trace).expect("trace serializes");
            text.push('\n');
            write_text(&out.join("trace.json"), &text)?;
            println!("{} after {} queries", outcome.status, outcome.queries_used);
            Ok(if outcome.status == AttackStatus::Failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Campaign {
            root,
            manifest,
            attack,
            report,
            format,
            parallelism,
        } => {
            let config = attack.config()?;
            let corpus = ingest_corpus(&root, &manifest)?;
            let spec = match attack.oracle.as_deref() {
                Some(s) => OracleSpec::parse(s)?,
                None => OracleSpec::Local(Arc::new(Gallery::from_manifest(&manifest)?)),
            };
            let token = attack.token.clone();
            let factory = move || spec.build(token.as_deref());
            let result = run_campaign(&corpus, &factory, &config, parallelism)?;
            write_report(&result, format, &report)?;
            println!(
                "{} items: {} dodge, {} impersonation, {} failed, {} error; {} queries",
                result.rows.len(),
                result.count(raf_harness::campaign::RowStatus::Dodge),
                result.count(raf_harness::campaign::RowStatus::Impersonation),
                result.count(raf_harness::campaign::RowStatus::Failed),
                result.count(raf_harness::campaign::RowStatus::Error),
                result.total_queries
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ServeOracle {
            manifest,
            bind,
            budget,
        } => {
            let gallery = Arc::new(Gallery::from_manifest(&manifest)?);
            let server = serve_oracle(gallery, &bind, budget)?;
            println!("listening on {}", server.url());
            server.join()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound { n, d, k, xi, base } => {
            println!("{}", complexity_bound(n, d, k, xi, base)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
