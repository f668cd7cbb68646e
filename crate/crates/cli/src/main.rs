use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csf_cli::commands::{
    cmd_ablate, cmd_nystrom_bench, cmd_spectral, cmd_sweep, cmd_synth, SpectralRequest, SweepKind,
};
use csf_cli::config::{output_dir, ExperimentConfig, NystromSetting, SplitPolicy};
use csf_cli::experiment::run_experiment;
use csf_cli::worker_pool;
use csf_core::filters::FilterSpec;
use csf_core::nystrom::NystromMode;
use csf_core::trainer::Variant;
use csf_core::{Error, Result};

#[derive(Parser)]
#[command(name = "csf", version, about = "Cross-space filtered graph network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (depth, seed) cell and write per-run reports plus an aggregate.
    Run(ExperimentArgs),
    /// Repeat the experiment over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// knn_topk, a2, a3, lr or gamma.
        #[arg(long)]
        kind: SweepKind,
        /// Comma-separated values; defaults depend on the kind.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Filter profiles and kernel frequency responses.
    Spectral {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Filters as name[:key=value,...], e.g. attr:a2=1,a3=1.
        #[arg(long, value_delimiter = ';', default_value = "gcn;lp;krr;attr")]
        filters: Vec<FilterSpec>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Attribute columns whose spectra are written.
        #[arg(long, value_delimiter = ',')]
        signals: Vec<usize>,
    },
    /// Exact against Nyström attribute kernels.
    NystromBench {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        m_grid: Vec<usize>,
        /// Also train and report mean test accuracy for every row.
        #[arg(long)]
        accuracy: bool,
    },
    /// Run the experiment once per ablation variant.
    Ablate {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
    },
    /// Write a generated dataset directory.
    Synth {
        /// texas, cornell, wisconsin, disassortative or smoothing_probe.
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON configuration; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory, or synthetic:<name>[:seed].
    #[arg(long)]
    dataset: Option<String>,
    /// Output root.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    a3: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    gamma_grid: Option<Vec<f64>>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lr_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Use splits.json from the dataset directory.
    #[arg(long, conflicts_with_all = ["train_frac", "val_frac"])]
    split_from_file: bool,
    #[arg(long, requires = "val_frac")]
    train_frac: Option<f64>,
    #[arg(long, requires = "train_frac")]
    val_frac: Option<f64>,
    #[arg(long)]
    nystrom_m: Option<usize>,
    #[arg(long, requires = "nystrom_m")]
    nystrom_rank: Option<usize>,
    /// inverse or kernel.
    #[arg(long, value_parser = parse_mode)]
    nystrom_mode: Option<NystromMode>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Disable concatenating the attributes to every hidden layer.
    #[arg(long)]
    no_concat_x: bool,
}

fn parse_mode(s: &str) -> std::result::Result<NystromMode, String> {
    match s {
        "inverse" => Ok(NystromMode::Inverse),
        "kernel" => Ok(NystromMode::Kernel),
        _ => Err(format!("unknown Nyström mode `{s}` (inverse, kernel)")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ExperimentArgs {
    fn resolve(self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::default();
        set(&mut cfg.dataset, self.dataset);
        cfg.id = self.id;
        set(&mut cfg.variant, self.variant);
        set(&mut cfg.a2, self.a2);
        set(&mut cfg.a3, self.a3);
        cfg.gamma = self.gamma;
        set(&mut cfg.gamma_grid, self.gamma_grid);
        set(&mut cfg.top_k, self.top_k);
        set(&mut cfg.depths, self.depths);
        set(&mut cfg.lr, self.lr);
        set(&mut cfg.lr_grid, self.lr_grid);
        set(&mut cfg.seeds, self.seed_list);
        if self.split_from_file {
            cfg.split = Some(SplitPolicy::FromFile);
        }
        if let (Some(train_frac), Some(val_frac)) = (self.train_frac, self.val_frac) {
            cfg.split = Some(SplitPolicy::Random { train_frac, val_frac });
        }
        if let Some(m) = self.nystrom_m {
            cfg.nystrom = Some(NystromSetting {
                m,
                rank_k: self.nystrom_rank,
                mode: self.nystrom_mode.unwrap_or_default(),
            });
        }
        set(&mut cfg.hidden_dim, self.hidden_dim);
        set(&mut cfg.dropout, self.dropout);
        set(&mut cfg.epochs, self.epochs);
        set(&mut cfg.weight_decay, self.weight_decay);
        if self.no_concat_x {
            cfg.concat_x = false;
        }
        if let Some(path) = &self.config {
            cfg = overlay_file(&cfg, path)?;
        }
        cfg.validate()?;
        Ok((cfg, self.out))
    }
}

/// Keys present in the file replace the corresponding flag values.
fn overlay_file(cfg: &ExperimentConfig, path: &Path) -> Result<ExperimentConfig> {
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    let serde_json::Value::Object(file) = file else {
        return Err(Error::Parameter(format!("{} must hold a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(cfg).map_err(json_err)?;
    let target = merged.as_object_mut().expect("config serializes to an object");
    target.extend(file);
    serde_json::from_value(merged).map_err(json_err)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(exp) => {
            let (cfg, root) = exp.resolve()?;
            let dir = output_dir(&root, &cfg);
            let res = run_experiment(&cfg, Some(&dir))?;
            for row in &res.aggregate {
                println!(
                    "depth {:>3}  test acc {:.4} ± {:.4}  (n = {})",
                    row.depth, row.mean_test_acc, row.std_test_acc, row.n
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Sweep { exp, kind, grid } => {
            let (cfg, root) = exp.resolve()?;
            let grid = grid.unwrap_or_else(|| kind.default_grid(&cfg));
            let dir = root.join(format!("{}-sweep-{kind}", cfg.experiment_id()));
            let rows = cmd_sweep(&cfg, kind, &grid, Some(&dir))?;
            for r in &rows {
                println!(
                    "{kind} = {}  depth {}  test acc {:.4}",
                    r.value, r.row.depth, r.row.mean_test_acc
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Spectral {
            exp,
            filters,
            lambdas,
            signals,
        } => {
            let (cfg, root) = exp.resolve()?;
            let dir = root.join(format!("{}-spectral", cfg.dataset_stem()));
            let req = SpectralRequest {
                filters,
                lambdas,
                signals,
            };
            cmd_spectral(&cfg, &req, Some(&dir))?;
            println!("wrote {}", dir.display());
        }
        Command::NystromBench { exp, m_grid, accuracy } => {
            let (cfg, root) = exp.resolve()?;
            let mode = cfg.nystrom.map(|s| s.mode).unwrap_or_default();
            let dir = root.join(format!("{}-nystrom", cfg.dataset_stem()));
            let rows = cmd_nystrom_bench(&cfg, &m_grid, mode, accuracy, Some(&dir))?;
            for r in &rows {
                match r.m {
                    Some(m) => println!("m {m:>6}  error {:.3e}  {:.1} ms", r.attr_error, r.wall_ms),
                    None => println!("exact     {:.1} ms", r.wall_ms),
                }
            }
            println!("wrote {}", dir.display());
        }
        Command::Ablate { exp, variants } => {
            let (cfg, root) = exp.resolve()?;
            let variants = variants.unwrap_or_else(|| Variant::ALL.to_vec());
            let dir = root.join(format!("{}-ablation", cfg.dataset_stem()));
            for r in cmd_ablate(&cfg, &variants, Some(&dir))? {
                println!(
                    "{:<24} depth {:>3}  test acc {:.4}",
                    r.variant, r.row.depth, r.row.mean_test_acc
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Synth { name, seed, out } => {
            let d = cmd_synth(&name, seed, &out)?;
            println!(
                "wrote {} ({} nodes, {} edges)",
                out.display(),
                d.graph.n_nodes(),
                d.graph.edges().len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = worker_pool().and_then(|pool| pool.install(|| execute(cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
