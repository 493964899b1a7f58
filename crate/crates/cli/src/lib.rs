//! Command-line front end for `stemrisk`.
//!
//! Exit codes: 0 on success, 1 for usage, validation and domain errors, 2 for
//! I/O errors.

pub mod error;
pub mod plot;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use stemrisk::fmt::{sci17, to_json_string};
use stemrisk::multistage::{
    simulate_cohort, write_curve_csv, MultistageParams, RiskModel, SimConfig, SimMode,
};
use stemrisk::pipelines::{
    analyze_figure1, analyze_radiation, full_report, predict_tr2_with, write_prediction_csv,
    ReportOptions, DEFAULT_DRIVER_MUTATION_RATE,
};
use stemrisk::scores::{score_table, write_scores_csv};
use stemrisk::{
    collapse_subgroups, parse_cohort, parse_radiation, CohortDataset, GroupingSpec, GENERATOR_NAME,
};

use error::{in_file, CliError, CliResult};
use plot::{load_plot_data, render_svg, Axis, Overlay, PlotSpec, DEFAULT_LEVELS};

#[derive(Debug, Parser)]
#[command(
    name = "stemrisk",
    version,
    about = "Stem-cell divisions versus lifetime cancer risk"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full JSON report: correlations, fits, scores, and optionally the
    /// radiation and prediction analyses.
    Analyze(AnalyzeArgs),
    /// ERS and RBERS per record, as CSV.
    Scores(CohortArgs),
    /// Two-cluster D/R labels from k-means and Ward linkage, as CSV.
    Cluster(CohortArgs),
    /// Spearman correlations of radiation excess risk, as JSON.
    Radiation(RadiationArgs),
    /// Replicative-only lifetime risk against observed risk, as CSV.
    Predict(PredictArgs),
    /// Monte Carlo lineage simulation, as a CSV curve.
    Simulate(SimulateArgs),
    /// SVG scatter plot of two columns of a CSV file.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct CohortArgs {
    /// Cohort CSV: name,lifetime_risk,lscd[,s,d,subgroup_of]
    #[arg(long, value_name = "FILE")]
    pub cohort: PathBuf,
    /// JSON grouping spec with subgroup removals and merges
    #[arg(long, value_name = "FILE")]
    pub collapse: Option<PathBuf>,
    /// Output file (default: standard output)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModelArg {
    ArmitageDoll,
    Binomial,
}

impl From<ModelArg> for RiskModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::ArmitageDoll => RiskModel::ArmitageDoll,
            ModelArg::Binomial => RiskModel::Binomial,
        }
    }
}

#[derive(Debug, Args)]
pub struct PredictionInputs {
    /// CSV of per-tissue cell turnovers: name,turnovers
    #[arg(long, value_name = "FILE")]
    pub turnovers: Option<PathBuf>,
    /// Driver mutation probability per division [default: 5e-7]
    #[arg(long, value_name = "VALUE")]
    pub u: Option<f64>,
    /// CSV overriding required driver counts: name,drivers
    #[arg(long, value_name = "FILE")]
    pub drivers: Option<PathBuf>,
    /// Closed form for the predicted risk
    #[arg(long, value_enum, default_value = "armitage_doll")]
    pub model: ModelArg,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// Radiation CSV: name,ear,err,lscd,s,sd_product
    #[arg(long, value_name = "FILE")]
    pub radiation: Option<PathBuf>,
    #[command(flatten)]
    pub prediction: PredictionInputs,
    /// Seed recorded in the report metadata
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RadiationArgs {
    /// Radiation CSV: name,ear,err,lscd,s,sd_product
    #[arg(long, value_name = "FILE")]
    pub radiation: PathBuf,
    /// Output file (default: standard output)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[command(flatten)]
    pub prediction: PredictionInputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    /// Lineages need n drivers
    Exposed,
    /// Lineages need n + 1 drivers
    Control,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Stem-cell count, recorded in the metadata
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Comma-separated per-driver mutation probabilities; one value is reused
    /// for every driver
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub u: Vec<f64>,
    /// Required drivers
    #[arg(long)]
    pub n: usize,
    /// Number of simulated lineages
    #[arg(long)]
    pub lineages: u64,
    /// Horizon in divisions
    #[arg(long)]
    pub divisions: u64,
    /// Random seed
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated division counts to report [default: about 100 evenly
    /// spaced points from 0 to the horizon]
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<u64>>,
    /// Which driver count lineages must reach
    #[arg(long, value_enum, default_value = "exposed")]
    pub mode: ModeArg,
    /// Output file (default: standard output)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV file with the columns named by the axes
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Quantity on the horizontal axis
    #[arg(long, value_enum)]
    pub x: Axis,
    /// Quantity on the vertical axis
    #[arg(long, value_enum)]
    pub y: Axis,
    /// Optional overlay drawn under the points
    #[arg(long, value_enum)]
    pub overlay: Option<Overlay>,
    /// Comma-separated ERS levels for ers_contours [default: -10,-20,-30,-40,-50]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub levels: Option<Vec<f64>>,
    /// Width in pixels
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    /// Height in pixels
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    /// Label each point with its name
    #[arg(long)]
    pub labels: bool,
    /// Output file (default: standard output)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Scores(a) => {
            let ds = load_cohort(a)?;
            let fig = analyze_figure1(&ds)?;
            emit(
                a.out.as_deref(),
                &write_scores_csv(&score_table(&ds, &fig.fit)?),
            )
        }
        Command::Cluster(a) => {
            let ds = load_cohort(a)?;
            let fig = analyze_figure1(&ds)?;
            let mut out = String::from("name,ers,cluster_kmeans,cluster_ward\n");
            for s in score_table(&ds, &fig.fit)? {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    csv_field(&s.name),
                    sci17(s.ers),
                    s.cluster_kmeans,
                    s.cluster_ward
                ));
            }
            emit(a.out.as_deref(), &out)
        }
        Command::Radiation(a) => {
            let recs = parse_radiation(&read(&a.radiation)?).map_err(in_file(&a.radiation))?;
            emit(
                a.out.as_deref(),
                &to_json_string(&analyze_radiation(&recs)?),
            )
        }
        Command::Predict(a) => {
            let ds = load_cohort(&a.cohort)?;
            let p = &a.prediction;
            let path = p
                .turnovers
                .as_deref()
                .ok_or_else(|| CliError::invalid("predict needs --turnovers"))?;
            let turnovers = read_map(path, "turnovers", |c| c.parse::<f64>().ok())?;
            let n_map = drivers_map(p.drivers.as_deref())?;
            let u = p.u.unwrap_or(DEFAULT_DRIVER_MUTATION_RATE);
            let report = predict_tr2_with(p.model.into(), &ds, &turnovers, u, &n_map)?;
            emit(a.cohort.out.as_deref(), &write_prediction_csv(&report))
        }
        Command::Simulate(a) => cmd_simulate(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn cmd_analyze(a: &AnalyzeArgs) -> CliResult<()> {
    let ds = load_cohort(&a.cohort)?;
    let radiation = match &a.radiation {
        Some(p) => Some(parse_radiation(&read(p)?).map_err(in_file(p))?),
        None => None,
    };
    let p = &a.prediction;
    if p.turnovers.is_none() && (p.u.is_some() || p.drivers.is_some()) {
        return Err(CliError::invalid("--u and --drivers need --turnovers"));
    }
    let opts = ReportOptions {
        turnovers: p
            .turnovers
            .as_deref()
            .map(|path| read_map(path, "turnovers", |c| c.parse::<f64>().ok()))
            .transpose()?,
        u: p.u,
        n_map: drivers_map(p.drivers.as_deref())?,
        risk_model: p.model.into(),
        seed: a.seed,
    };
    let report = full_report(&ds, radiation.as_deref(), &opts)?;
    emit(a.cohort.out.as_deref(), &report.to_json())
}

/// About 100 evenly spaced grid points from 0 to the horizon.
fn default_grid(divisions: u64) -> Vec<u64> {
    let step = divisions.div_ceil(100).max(1);
    let mut grid: Vec<u64> = (0..=divisions).step_by(step as usize).collect();
    if grid.last() != Some(&divisions) {
        grid.push(divisions);
    }
    grid
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let required = match a.mode {
        ModeArg::Exposed => a.n,
        ModeArg::Control => a.n + 1,
    };
    if a.n == 0 {
        return Err(CliError::invalid("--n must be at least 1"));
    }
    let u = if a.u.len() == 1 {
        vec![a.u[0]; required]
    } else {
        a.u.clone()
    };
    let params = MultistageParams::new(a.s, u.clone(), a.n)?;
    let cfg = SimConfig {
        lineages: a.lineages,
        divisions: a.divisions,
        seed: a.seed,
        record_grid: a.grid.clone().unwrap_or_else(|| default_grid(a.divisions)),
        mode: match a.mode {
            ModeArg::Exposed => SimMode::Exposed,
            ModeArg::Control => SimMode::Control,
        },
    };
    let curve = simulate_cohort(&params, &cfg)?;
    let u_text: Vec<String> = u.iter().map(|v| v.to_string()).collect();
    let meta = [
        ("tool", format!("stemrisk {}", env!("CARGO_PKG_VERSION"))),
        ("s", a.s.to_string()),
        ("u", u_text.join(",")),
        ("n", a.n.to_string()),
        ("mode", format!("{:?}", a.mode).to_lowercase()),
        ("drivers_required", curve.drivers_required.to_string()),
        ("lineages", a.lineages.to_string()),
        ("divisions", a.divisions.to_string()),
        ("seed", a.seed.to_string()),
        ("generator", GENERATOR_NAME.to_string()),
    ]
    .map(|(k, v)| (k.to_string(), v));
    emit(a.out.as_deref(), &write_curve_csv(&curve, &meta))
}

fn cmd_plot(a: &PlotArgs) -> CliResult<()> {
    let spec = PlotSpec {
        x_axis: a.x,
        y_axis: a.y,
        overlay: a.overlay,
        levels: a.levels.clone().unwrap_or_else(|| DEFAULT_LEVELS.to_vec()),
        width: a.width,
        height: a.height,
        point_labels: a.labels,
    };
    spec.validate()?;
    let data = load_plot_data(&read(&a.data)?, &spec).map_err(|e| match e {
        CliError::Invalid(m) => CliError::Invalid(format!("{}: {m}", a.data.display())),
        other => other,
    })?;
    if !data.skipped.is_empty() {
        eprintln!(
            "note: {} row(s) without plottable values skipped: {}",
            data.skipped.len(),
            data.skipped.join(", ")
        );
    }
    emit(a.out.as_deref(), &render_svg(&data, &spec)?)
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn load_cohort(a: &CohortArgs) -> CliResult<CohortDataset> {
    let ds = parse_cohort(&read(&a.cohort)?).map_err(in_file(&a.cohort))?;
    match &a.collapse {
        Some(p) => {
            let spec = GroupingSpec::from_json(&read(p)?).map_err(in_file(p))?;
            Ok(collapse_subgroups(&ds, &spec).map_err(in_file(p))?)
        }
        None => Ok(ds),
    }
}

fn drivers_map(path: Option<&Path>) -> CliResult<BTreeMap<String, usize>> {
    match path {
        Some(p) => read_map(p, "drivers", |c| {
            c.parse::<usize>().ok().filter(|n| *n >= 1)
        }),
        None => Ok(BTreeMap::new()),
    }
}

/// Two-column CSV `name,<value_column>` into a map.
fn read_map<V>(
    path: &Path,
    value_column: &str,
    parse: impl Fn(&str) -> Option<V>,
) -> CliResult<BTreeMap<String, V>> {
    let text = read(path)?;
    let bad = |m: String| CliError::invalid(format!("{}: {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "name" || &headers[1] != value_column {
        return Err(bad(format!("expected header 'name,{value_column}'")));
    }
    let mut map = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = parse(&rec[1])
            .ok_or_else(|| bad(format!("line {line}: invalid {value_column} '{}'", &rec[1])))?;
        if map.insert(rec[0].to_string(), v).is_some() {
            return Err(bad(format!("line {line}: duplicate name '{}'", &rec[0])));
        }
    }
    Ok(map)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
