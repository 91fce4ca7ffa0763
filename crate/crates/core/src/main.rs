use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use soh_adapt::harness::{
    alpha_sweep, enr_only_rmse, fit_offline, leave_one_out, prepare_fold, run_session, CellData,
    Dataset, RunConfig,
};
use soh_adapt::io::{ingest, read_truth, telemetry_file_name, write_telemetry, write_truth, TruthRow};
use soh_adapt::report::{emit_report, truth_at_log, CellReport};
use soh_adapt::synth::generate;
use soh_adapt::{fusion, Error, Result};

#[derive(Parser)]
#[command(name = "soh-adapt", version, about = "Adaptive SOH estimation for second-life cells")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Overrides the synthetic fleet seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Input {
    /// Telemetry CSV file or directory; a synthetic fleet is generated when
    /// neither this nor `telemetry_dir` is set.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic fleet as telemetry and ground-truth CSVs.
    Synth,
    /// Validate telemetry and summarize each cell.
    Ingest(Input),
    /// Fit the regression on all cells, or all but one.
    FitOffline {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        exclude: Option<String>,
    },
    /// Replay one cell against a model trained on the others.
    RunOnline {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        cell: String,
    },
    /// Per-cell RMSPE of the fused and regression-only estimators.
    LeaveOneOut(Input),
    /// Fused-estimate RMSE for each learning rate.
    AlphaSweep {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        cell: String,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
    },
    /// Leave-one-out with trajectory, error and classification files.
    Report(Input),
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.fleet.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn load_dataset(input: &Input, cfg: &RunConfig) -> Result<Dataset> {
    let path = input.input.as_ref().or(cfg.telemetry_dir.as_ref());
    let Some(path) = path else {
        let fleet = generate(&cfg.fleet)?;
        return Dataset::from_fleet(&fleet, &cfg.segmentation, &cfg.schema);
    };
    let streams = ingest(path)?;
    let mut data = Dataset::from_streams(&streams, &cfg.segmentation, &cfg.schema)?;
    let truth = path.join("ground_truth.csv");
    if path.is_dir() && truth.exists() {
        let rows = read_truth(&truth.display().to_string(), File::open(&truth)?)?;
        for cell in &mut data.cells {
            cell.group = rows
                .iter()
                .find(|r| r.cell_id == cell.cell_id)
                .and_then(|r| r.group_label.checked_sub(1));
        }
    }
    Ok(data)
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(BufWriter::new(File::create(cfg.output_dir.join(name))?))
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let fleet = generate(&cfg.fleet)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut truth = Vec::new();
    for c in &fleet.cells {
        write_telemetry(&c.cell_id, &c.samples, out_file(cfg, &telemetry_file_name(&c.cell_id))?)?;
        truth.extend(c.capacity.iter().map(|(ah, q)| TruthRow {
            cell_id: c.cell_id.clone(),
            ah,
            q_true: q,
            group_label: c.group + 1,
        }));
    }
    write_truth(&truth, out_file(cfg, "ground_truth.csv")?)?;
    println!("wrote {} cells to {}", fleet.cells.len(), cfg.output_dir.display());
    Ok(())
}

fn ingest_cmd(data: &Dataset, cfg: &RunConfig) -> Result<()> {
    let mut w = csv::Writer::from_writer(out_file(cfg, "ingest_summary.csv")?);
    w.write_record(["cell_id", "aging_cycles", "capacity_tests", "q0", "ah_last"])?;
    for c in &data.cells {
        let row = [
            c.cell_id.clone(),
            c.aging.len().to_string(),
            c.capacity.len().to_string(),
            c.q0.to_string(),
            c.capacity.span().map_or(0.0, |s| s.1).to_string(),
        ];
        println!("{}", row.join(","));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fit_cmd(data: &Dataset, cfg: &RunConfig, exclude: Option<&str>) -> Result<()> {
    if let Some(id) = exclude {
        data.index_of(id)?;
    }
    let cells: Vec<&CellData> = data
        .cells
        .iter()
        .filter(|c| Some(c.cell_id.as_str()) != exclude)
        .collect();
    let model = fit_offline(&cells, &data.schema, cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("model.txt"), model.to_text())?;
    println!(
        "fitted on {} cells: lambda_reg {} mix {}",
        cells.len(),
        model.lambda_reg,
        model.mix
    );
    Ok(())
}

fn online_cmd(data: &Dataset, cfg: &RunConfig, cell: &str) -> Result<()> {
    let z = data.index_of(cell)?;
    let fold = prepare_fold(data, z, cfg)?;
    let session = run_session(&fold, &data.cells[z], &data.schema, fold.fusion_config(cfg)?)?;
    fusion::write_log_csv(
        session.log(),
        fold.training.len(),
        out_file(cfg, &format!("{cell}_estimates.csv"))?,
    )?;
    fs::write(
        cfg.output_dir.join(format!("{cell}_state.txt")),
        session.state().to_text(),
    )?;
    fs::write(cfg.output_dir.join(format!("{cell}_model.txt")), fold.model.to_text())?;
    if let Some(last) = session.log().last() {
        println!("{cell}: {} estimates, final q_hat {:.4} Ah at {:.1} Ah", session.log().len(), last.q_hat, last.ah);
    }
    Ok(())
}

fn loo_cmd(data: &Dataset, cfg: &RunConfig, with_report: bool) -> Result<()> {
    let table = leave_one_out(data, cfg)?;
    let mut w = csv::Writer::from_writer(out_file(cfg, "leave_one_out.csv")?);
    w.write_record(["cell_id", "rmspe_adaptive", "rmspe_enr", "mape_adaptive", "mape_enr", "steps"])?;
    println!("{:<8} {:>14} {:>10}", "cell", "adaptive[%]", "enr[%]");
    for r in &table.rows {
        println!("{:<8} {:>14.4} {:>10.4}", r.cell_id, r.adaptive.rmspe, r.enr.rmspe);
        w.write_record([
            r.cell_id.clone(),
            r.adaptive.rmspe.to_string(),
            r.enr.rmspe.to_string(),
            r.adaptive.mape.to_string(),
            r.enr.mape.to_string(),
            r.steps.to_string(),
        ])?;
    }
    w.write_record([
        "mean".to_string(),
        table.mean_adaptive.to_string(),
        table.mean_enr.to_string(),
        String::new(),
        String::new(),
        String::new(),
    ])?;
    w.flush()?;
    println!("{:<8} {:>14.4} {:>10.4}", "mean", table.mean_adaptive, table.mean_enr);

    if with_report {
        let reports: Vec<CellReport> = table
            .rows
            .iter()
            .zip(&table.logs)
            .zip(&table.folds)
            .map(|((r, log), fold)| CellReport {
                cell_id: &r.cell_id,
                log,
                truth: truth_at_log(log, &data.cells[fold.test_index].capacity),
                training_ids: fold.training.cells().iter().map(|c| c.cell_id.clone()).collect(),
            })
            .collect();
        let files = emit_report(&cfg.output_dir.join("report"), &reports)?;
        println!("wrote {} report files", files.len());
    }
    Ok(())
}

fn sweep_cmd(data: &Dataset, cfg: &RunConfig, cell: &str, alphas: &[f64]) -> Result<()> {
    if alphas.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::InvalidConfig("alphas must be >= 0".into()));
    }
    let points = alpha_sweep(data, cell, alphas, cfg)?;
    let enr = enr_only_rmse(data, cell, cfg)?;
    let mut w = csv::Writer::from_writer(out_file(cfg, &format!("{cell}_alpha_sweep.csv"))?);
    w.write_record(["alpha", "rmse"])?;
    for (a, rmse) in &points {
        println!("alpha {a:e}: RMSE {rmse:.6} Ah");
        w.write_record([a.to_string(), rmse.to_string()])?;
    }
    w.flush()?;
    println!("regression only: RMSE {enr:.6} Ah");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let data = |i: &Input| load_dataset(i, &cfg);
    match &cli.cmd {
        Cmd::Synth => synth(&cfg),
        Cmd::Ingest(i) => ingest_cmd(&data(i)?, &cfg),
        Cmd::FitOffline { input, exclude } => fit_cmd(&data(input)?, &cfg, exclude.as_deref()),
        Cmd::RunOnline { input, cell } => online_cmd(&data(input)?, &cfg, cell),
        Cmd::LeaveOneOut(i) => loo_cmd(&data(i)?, &cfg, false),
        Cmd::AlphaSweep { input, cell, alphas } => sweep_cmd(&data(input)?, &cfg, cell, alphas),
        Cmd::Report(i) => loo_cmd(&data(i)?, &cfg, true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
