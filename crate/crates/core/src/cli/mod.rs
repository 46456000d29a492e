//! Subcommand implementations behind the `hdlss` binary.

mod config;

pub use config::{Cell, DesignDefaults, Grid, RunConfig};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::{load_csv, normalize_log_median};
use crate::error::{Error, Result};
use crate::evaluate::{compare, write_plot_csv, write_report_csv, BenchmarkReport, Method, Source};
use crate::synth::{design_name, DesignSampler};

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub methods: Option<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.eval.master_seed = s;
        }
        if let Some(r) = self.replications {
            cfg.eval.replications = r;
        }
        if let Some(m) = &self.methods {
            cfg.eval.methods = Method::parse_list(m)?;
        }
        cfg.validate()
    }
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes one dataset CSV and one manifest per grid cell; returns the
/// paths written.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for cell in cfg.cells() {
        let design = cfg.design_for(&cell, cfg.eval.master_seed);
        let (data, flags) = DesignSampler::new(&design)?.generate_seeded(design.seed);
        let name = design_name(&design);

        let csv_path = out.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_writer(create(&csv_path)?);
        let mut header: Vec<String> = (1..=design.p).map(|j| format!("x{j}")).collect();
        header.push("class".into());
        w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
        for i in 0..data.n_rows() {
            let mut rec: Vec<String> = data.row(i).iter().map(|v| format!("{v:.17e}")).collect();
            rec.push(data.labels()[i].to_string());
            w.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(io_err(&csv_path))?;

        let manifest_path = out.join(format!("{name}.manifest"));
        let contaminated: Vec<String> =
            flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| (i + 1).to_string()).collect();
        let mut m = create(&manifest_path)?;
        writeln!(
            m,
            "# dataset {name}.csv\n# rows = {}\n# contaminated_rows = {}\n# cell: epsilon = {}, kappa = {}, rho = {}, p = {}, G = {}\n# seed = {}\n",
            data.n_rows(),
            contaminated.join(" "),
            cell.epsilon,
            cell.kappa,
            cell.rho,
            cell.p,
            cell.g,
            design.seed
        )
        .and_then(|_| m.write_all(cfg.to_ini().as_bytes()))
        .and_then(|_| m.flush())
        .map_err(io_err(&manifest_path))?;
        eprintln!("simulated {name}");
        written.push(csv_path);
        written.push(manifest_path);
    }
    Ok(written)
}

/// Paths produced by a benchmark run.
#[derive(Debug, Clone)]
pub struct BenchOutputs {
    pub report: PathBuf,
    pub plot_data: PathBuf,
    pub config: PathBuf,
}

fn write_outputs(cfg: &RunConfig, rows: &[BenchmarkReport], out: &Path) -> Result<BenchOutputs> {
    ensure_dir(out)?;
    let outputs = BenchOutputs {
        report: out.join("report.csv"),
        plot_data: out.join("plot_data.csv"),
        config: out.join("resolved_config.ini"),
    };
    write_report_csv(rows, create(&outputs.report)?)?;
    write_plot_csv(rows, create(&outputs.plot_data)?)?;
    let mut c = create(&outputs.config)?;
    c.write_all(cfg.to_ini().as_bytes()).and_then(|_| c.flush()).map_err(io_err(&outputs.config))?;
    Ok(outputs)
}

/// Runs every configured method on every grid cell.
pub fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<(Vec<BenchmarkReport>, BenchOutputs)> {
    ensure_dir(out)?;
    let cells = cfg.cells();
    let per_cell: Vec<Vec<BenchmarkReport>> = cells
        .par_iter()
        .map(|cell| {
            let source = Source::Design(cfg.design_for(cell, cfg.eval.master_seed));
            let rows = compare(std::slice::from_ref(&source), &cfg.eval)?;
            eprintln!("finished {}", source.name());
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<BenchmarkReport> = per_cell.into_iter().flatten().collect();
    let outputs = write_outputs(cfg, &rows, out)?;
    Ok((rows, outputs))
}

/// Re-split evaluation of a user-supplied dataset.
pub fn cmd_eval_real(
    data_path: &Path,
    label_column: &str,
    log_median: bool,
    cfg: &RunConfig,
    out: &Path,
) -> Result<(Vec<BenchmarkReport>, BenchOutputs)> {
    let mut data = load_csv(data_path, label_column)?;
    if log_median {
        data = normalize_log_median(&data)?;
    }
    let eval = crate::evaluate::EvalConfig { fixed_dataset: true, ..cfg.eval.clone() };
    let rows = compare(&[Source::Dataset(data)], &eval)?;
    eprintln!("finished {}", data_path.display());
    let outputs = write_outputs(cfg, &rows, out)?;
    Ok((rows, outputs))
}
