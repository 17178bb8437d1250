//! `radcut`: headless replay, evaluation, phantom generation, conversion and serving.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant violation.

use clap::{Args, Parser, Subcommand};
use radcut_core::contour_set::read_contour_set;
use radcut_core::graph_cut::GraphParams;
use radcut_core::metrics::{format_table, summarize, OverlapReport, Summary};
use radcut_core::nrrd::{read_mask_nrrd, read_nrrd, write_mask_nrrd, write_nrrd};
use radcut_core::phantom::PhantomSpec;
use radcut_core::raster::voxelize_contours;
use radcut_core::session::{EventKind, ReplayLog, Session};
use radcut_core::Error;
use serde::Serialize;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(name = "radcut", version, about = "Template-driven radial graph-cut segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replay a recorded session on a volume and write the mask and contours.
    Segment {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        replay: PathBuf,
        #[arg(long)]
        out_mask: PathBuf,
        #[arg(long)]
        out_contours: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Compare mask pairs: DSC, Hausdorff distance and volumes.
    Evaluate {
        /// First mask of each pair (repeatable).
        #[arg(long = "a", required = true)]
        a: Vec<PathBuf>,
        /// Second mask of each pair, in the same order as --a.
        #[arg(long = "b", required = true)]
        b: Vec<PathBuf>,
        /// Row labels, in the same order as --a (default: 1, 2, ...).
        #[arg(long = "label")]
        label: Vec<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic tube volume with its ground-truth mask.
    Phantom {
        /// Phantom spec JSON (default: the 128x128x24 cone phantom).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Noise sigma for the default phantom.
        #[arg(long, conflicts_with = "spec")]
        noise: Option<f64>,
        #[arg(long)]
        out_volume: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
        /// Also write a scripted replay session for the phantom.
        #[arg(long)]
        out_replay: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        skip: usize,
        /// Scripted first-slice outline radius relative to the true radius.
        #[arg(long, default_value_t = 1.3)]
        outline_scale: f64,
    },
    /// Serve the HTTP API over the .nrrd files in a directory.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        data_dir: PathBuf,
    },
    /// Voxelize a contour JSON file onto the grid of a reference volume.
    Convert {
        #[arg(long)]
        contours: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out_mask: PathBuf,
    },
}

/// Overrides for the graph parameters recorded in a replay.
#[derive(Args, Debug, Default)]
struct ParamArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    t_weight: Option<f64>,
    #[arg(long)]
    sf: Option<f64>,
}

impl ParamArgs {
    fn apply(&self, base: GraphParams) -> Option<GraphParams> {
        if self.k.is_none() && self.n.is_none() && self.delta.is_none() && self.t_weight.is_none() && self.sf.is_none()
        {
            return None;
        }
        Some(GraphParams {
            k: self.k.unwrap_or(base.k),
            n: self.n.unwrap_or(base.n),
            delta: self.delta.unwrap_or(base.delta),
            t_weight: self.t_weight.unwrap_or(base.t_weight),
            sf: self.sf.unwrap_or(base.sf),
        })
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Data(format!("{} ({})", e, e.reason()))
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn segment(volume: &Path, replay: &Path, out_mask: &Path, out_contours: Option<&Path>, params: &ParamArgs) -> Outcome {
    let vol = read_nrrd(&read(volume)?)?;
    let log = ReplayLog::from_json(&read(replay)?)?;
    let base = match log.events.first().map(|e| &e.kind) {
        Some(EventKind::Start { params, .. }) => *params,
        _ => GraphParams::default(),
    };
    let session = Session::replay(Arc::new(vol), &log, params.apply(base))?;
    let (contours, mask) = session.export()?;
    write(out_mask, &mask)?;
    if let Some(path) = out_contours {
        write(path, &contours)?;
    }
    let cs = session.contour_set();
    eprintln!(
        "segmented {} slices ({} events, {} ms recorded)",
        cs.slices.len(),
        log.events.len(),
        log.elapsed_ms()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport {
    datasets: Vec<OverlapReport>,
    dsc: Option<Summary>,
    hausdorff: Option<Summary>,
}

fn evaluate(a: &[PathBuf], b: &[PathBuf], labels: &[String], report: Option<&Path>) -> Outcome {
    if a.len() != b.len() {
        return Err(Failure::Usage(format!(
            "{} --a masks but {} --b masks",
            a.len(),
            b.len()
        )));
    }
    if !labels.is_empty() && labels.len() != a.len() {
        return Err(Failure::Usage(format!(
            "{} labels for {} mask pairs",
            labels.len(),
            a.len()
        )));
    }
    let mut rows = Vec::with_capacity(a.len());
    for (i, (pa, pb)) in a.iter().zip(b).enumerate() {
        let label = labels.get(i).cloned().unwrap_or_else(|| (i + 1).to_string());
        let (ma, mb) = (read_mask_nrrd(&read(pa)?)?, read_mask_nrrd(&read(pb)?)?);
        let row = OverlapReport::compare(label, &ma, &mb)
            .map_err(|e| Failure::Data(format!("{} vs {}: {e}", pa.display(), pb.display())))?;
        rows.push(row);
    }
    print!("{}", format_table(&rows));
    if let Some(path) = report {
        let dscs: Vec<f64> = rows.iter().map(|r| r.dsc).collect();
        let hds: Vec<f64> = rows.iter().map(|r| r.hausdorff).collect();
        let out = EvaluationReport {
            dsc: summarize(&dscs).ok(),
            hausdorff: summarize(&hds).ok(),
            datasets: rows,
        };
        let json = serde_json::to_vec_pretty(&out).map_err(|e| Failure::Internal(e.to_string()))?;
        write(path, &json)?;
    }
    Ok(())
}

struct PhantomOutputs<'a> {
    volume: &'a Path,
    truth: &'a Path,
    replay: Option<&'a Path>,
}

fn phantom(spec: Option<&Path>, noise: Option<f64>, out: PhantomOutputs, skip: usize, outline_scale: f64) -> Outcome {
    let spec = match spec {
        Some(path) => {
            let bytes = read(path)?;
            serde_json::from_slice::<PhantomSpec>(&bytes)
                .map_err(|e| Failure::Data(format!("phantom spec {}: {e}", path.display())))?
        }
        None => PhantomSpec::acceptance(noise.unwrap_or(0.0)),
    };
    let (volume, truth) = spec.generate()?;
    write(out.volume, &write_nrrd(&volume))?;
    write(out.truth, &write_mask_nrrd(&truth))?;
    if let Some(path) = out.replay {
        if skip == 0 || !(outline_scale.is_finite() && outline_scale > 0.0) {
            return Err(Failure::Usage("--skip must be >= 1 and --outline-scale > 0".into()));
        }
        write(
            path,
            &spec
                .scripted_replay(skip, outline_scale, GraphParams::default())
                .to_json(),
        )?;
    }
    Ok(())
}

fn convert(contours: &Path, reference: &Path, out_mask: &Path) -> Outcome {
    let cs = read_contour_set(&read(contours)?)?;
    let vol = read_nrrd(&read(reference)?)?;
    write(out_mask, &write_mask_nrrd(&voxelize_contours(&cs, *vol.grid())?))
}

fn serve(host: IpAddr, port: u16, data_dir: PathBuf) -> Outcome {
    if !data_dir.is_dir() {
        return Err(Failure::Data(format!("{} is not a directory", data_dir.display())));
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(format!("runtime: {e}")))?;
    rt.block_on(radcut_server::serve(SocketAddr::new(host, port), data_dir))
        .map_err(|e| Failure::Data(format!("server: {e}")))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Segment {
            volume,
            replay,
            out_mask,
            out_contours,
            params,
        } => segment(&volume, &replay, &out_mask, out_contours.as_deref(), &params),
        Command::Evaluate { a, b, label, report } => evaluate(&a, &b, &label, report.as_deref()),
        Command::Phantom {
            spec,
            noise,
            out_volume,
            out_truth,
            out_replay,
            skip,
            outline_scale,
        } => phantom(
            spec.as_deref(),
            noise,
            PhantomOutputs {
                volume: &out_volume,
                truth: &out_truth,
                replay: out_replay.as_deref(),
            },
            skip,
            outline_scale,
        ),
        Command::Serve { port, host, data_dir } => serve(host, port, data_dir),
        Command::Convert {
            contours,
            reference,
            out_mask,
        } => convert(&contours, &reference, &out_mask),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}
