use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use evpca_core::spectrum::{read_indexed_csv, write_indexed_csv};
use evpca_core::theory::{applicable_gap_condition, gap_condition, phi_c};
use evpca_core::{
    eigenvalues_descending, empirical_angular_covariance, estimate_p, frechet_margin_transform,
    read_csv, run_experiment, run_experiment_with_threads, scree, select_extremes, select_regime,
    AspectRatio, CriterionKind, CsvOptions, DataMatrix, Error, ExperimentResult, MarchenkoPastur,
    ModelSpec, Regime, ScreeTable, Spectrum, SpikeForecast,
};
use serde::Serialize;

use crate::args::{
    CriterionArg, EstimateArgs, Format, GapArgs, InputArgs, MpArgs, ScreeArgs, SimulateArgs,
};
use crate::config::{hash_comment, sha256_hex, RunConfig};
use crate::error::{CliError, CliResult};

// ---------------------------------------------------------------------------
// Shared plumbing

/// Input matrix after the optional margin transform, plus the digest of the
/// raw file.
pub struct LoadedInput {
    pub data: DataMatrix,
    pub sha256: String,
}

pub fn load_input(args: &InputArgs) -> CliResult<LoadedInput> {
    let bytes = fs::read(&args.input)
        .map_err(|e| CliError::io(format!("cannot read {}", args.input.display()), e))?;
    let sha256 = sha256_hex(&bytes);
    let mut data = read_csv(
        bytes.as_slice(),
        CsvOptions {
            delimiter: args.delimiter,
        },
    )?;
    if args.frechet_margins {
        let t = frechet_margin_transform(&data)?;
        if !t.constant_columns.is_empty() {
            eprintln!(
                "warning: constant columns {:?} carry no information after the margin transform",
                t.constant_columns
            );
        }
        data = t.data;
    }
    Ok(LoadedInput { data, sha256 })
}

fn spectrum_of(data: &DataMatrix, k: usize) -> CliResult<Spectrum> {
    let sample = select_extremes(data, k)?;
    let cov = empirical_angular_covariance(&sample)?;
    Ok(eigenvalues_descending(&cov)?)
}

fn create_file(path: &Path) -> CliResult<io::BufWriter<fs::File>> {
    let f = fs::File::create(path)
        .map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))?;
    Ok(io::BufWriter::new(f))
}

/// Runs `f` against the file at `out`, or stdout.
fn with_output(
    out: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> CliResult<()>,
) -> CliResult<()> {
    let context = out.map_or("stdout".to_string(), |p| p.display().to_string());
    match out {
        Some(path) => {
            let mut w = create_file(path)?;
            f(&mut w)?;
            w.flush().map_err(|e| CliError::io(context, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush().map_err(|e| CliError::io(context, e))
        }
    }
}

fn io_err(e: io::Error) -> CliError {
    CliError::io("write failed", e)
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(Error::from)?;
    writeln!(w).map_err(io_err)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Clone, Serialize)]
pub struct FamilyEstimate {
    pub criterion: CriterionKind,
    pub label: String,
    pub q: usize,
    pub p_hat: usize,
    /// Criterion values at `p = 1..=q`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub k: usize,
    /// `d/k` rounded to four decimals.
    pub c: f64,
    pub regime: Regime,
    pub aic: FamilyEstimate,
    pub bic: FamilyEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub config_hash: String,
    pub n: usize,
    pub d: usize,
    pub frechet_margins: bool,
    pub rows: Vec<EstimateRow>,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Estimates both families at a single `k`.
pub fn estimate_row(
    data: &DataMatrix,
    k: usize,
    criterion: CriterionArg,
    q: Option<usize>,
) -> CliResult<EstimateRow> {
    let d = data.cols();
    let spectrum = spectrum_of(data, k)?;
    let auto = select_regime(d, k)?;
    let (aic, bic) = match criterion.pair() {
        None => auto,
        Some(pair) if pair.0.regime() == auto.0.regime() => pair,
        Some(pair) => {
            return Err(Error::RegimeMismatch(format!(
                "{} needs the {} regime but d = {d}, k = {k} is {}",
                pair.0.label(),
                pair.0.regime(),
                auto.0.regime()
            ))
            .into())
        }
    };
    let family = |kind: CriterionKind| -> CliResult<FamilyEstimate> {
        let bound = q.unwrap_or_else(|| kind.default_q(d, k));
        let curve = estimate_p(&spectrum, kind, bound)?;
        Ok(FamilyEstimate {
            criterion: kind,
            label: kind.label().to_string(),
            q: bound,
            p_hat: curve.p_hat,
            values: curve.values,
        })
    };
    Ok(EstimateRow {
        k,
        c: round4(d as f64 / k as f64),
        regime: aic.regime(),
        aic: family(aic)?,
        bic: family(bic)?,
    })
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<EstimateReport> {
    let input = load_input(&args.input)?;
    let config_hash = RunConfig {
        command: "estimate",
        input_sha256: Some(&input.sha256),
        params: args,
    }
    .hash();
    let data = &input.data;
    let grid = match (&args.k, &args.k_grid) {
        (_, Some(grid)) => grid.0.clone(),
        (Some(k), None) => vec![*k],
        (None, None) => return Err(CliError::Usage("one of --k or --k-grid is required".into())),
    };
    let rows = grid
        .iter()
        .map(|spec| estimate_row(data, spec.resolve(data.rows())?, args.criterion, args.q))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(EstimateReport {
        config_hash,
        n: data.rows(),
        d: data.cols(),
        frechet_margins: args.input.frechet_margins,
        rows,
    })
}

/// One line per `k`: the layout of a table of `p̂` against the number of
/// extremes.
pub fn write_estimate_csv(report: &EstimateReport, w: &mut dyn Write) -> CliResult<()> {
    writeln!(w, "{}", hash_comment(&report.config_hash)).map_err(io_err)?;
    writeln!(w, "# n = {}, d = {}", report.n, report.d).map_err(io_err)?;
    writeln!(
        w,
        "k,c,regime,q,aic_criterion,aic_p_hat,bic_criterion,bic_p_hat"
    )
    .map_err(io_err)?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{:.4},{},{},{},{},{},{}",
            r.k, r.c, r.regime, r.aic.q, r.aic.label, r.aic.p_hat, r.bic.label, r.bic.p_hat
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Long format `k,criterion,p,value` of every curve in the report.
pub fn write_curves_csv(report: &EstimateReport, w: &mut dyn Write) -> CliResult<()> {
    writeln!(w, "{}", hash_comment(&report.config_hash)).map_err(io_err)?;
    writeln!(w, "k,criterion,p,value").map_err(io_err)?;
    for r in &report.rows {
        for fam in [&r.aic, &r.bic] {
            for (i, v) in fam.values.iter().enumerate() {
                writeln!(w, "{},{},{},{}", r.k, fam.criterion.cli_name(), i + 1, v)
                    .map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// `report.csv` → `report_curves.csv`.
pub fn curves_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or("estimate".into(), |s| s.to_string_lossy());
    out.with_file_name(format!("{stem}_curves.csv"))
}

fn print_estimate(args: &EstimateArgs, report: &EstimateReport) -> CliResult<()> {
    match args.format {
        Format::Json => with_output(args.out.as_deref(), |w| write_json(w, report)),
        Format::Csv => {
            with_output(args.out.as_deref(), |w| write_estimate_csv(report, w))?;
            if let Some(out) = &args.out {
                with_output(Some(&curves_path(out)), |w| write_curves_csv(report, w))?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub config_hash: String,
    pub result: ExperimentResult,
}

/// Reads a model spec from a file, or parses it directly when it looks like
/// a JSON object.
pub fn parse_model_spec(raw: &str) -> CliResult<ModelSpec> {
    let text = if raw.trim_start().starts_with('{') {
        raw.to_string()
    } else {
        fs::read_to_string(raw).map_err(|e| CliError::io(format!("cannot read {raw}"), e))?
    };
    Ok(serde_json::from_str(&text)?)
}

/// Every criterion valid for `(d, k)`.
pub fn regime_kinds(d: usize, k: usize) -> CliResult<Vec<CriterionKind>> {
    let (aic, _) = select_regime(d, k)?;
    Ok(CriterionKind::ALL
        .into_iter()
        .filter(|kind| kind.regime() == aic.regime())
        .collect())
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulateReport> {
    let mut spec = parse_model_spec(&args.model_spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let config_hash = RunConfig {
        command: "simulate",
        input_sha256: None,
        params: &(args, &spec),
    }
    .hash();
    let k = spec.resolved_k()?;
    let kinds = match args.criterion.pair() {
        Some((a, b)) => vec![a, b],
        None => regime_kinds(spec.d, k)?,
    };
    let result = match args.threads {
        Some(t) => run_experiment_with_threads(&spec, args.reps, &kinds, args.q, t)?,
        None => run_experiment(&spec, args.reps, &kinds, args.q)?,
    };
    Ok(SimulateReport {
        config_hash,
        result,
    })
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    summary: evpca_core::simulate::ExperimentSummary,
}

pub fn write_replications_csv(report: &SimulateReport, w: &mut dyn Write) -> CliResult<()> {
    writeln!(w, "{}", hash_comment(&report.config_hash)).map_err(io_err)?;
    report.result.write_long_csv(w)?;
    Ok(())
}

fn save_simulation(args: &SimulateArgs, report: &SimulateReport) -> CliResult<()> {
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("cannot create {}", args.out.display()), e))?;
    with_output(Some(&args.out.join("replications.csv")), |w| {
        write_replications_csv(report, w)
    })?;
    let summary = report.result.summary();
    with_output(Some(&args.out.join("summary.json")), |w| {
        write_json(
            w,
            &SummaryFile {
                config_hash: &report.config_hash,
                summary: summary.clone(),
            },
        )
    })?;
    let p_star = report.result.spec.p_star;
    println!("criterion  q  mean  median  hit@{p_star}");
    for s in &summary.criteria {
        println!(
            "{:<9} {:>3} {:>6.2} {:>6.1} {:>6.3}",
            s.label,
            s.q,
            s.mean,
            s.median,
            report.result.hit_rate(s.kind, p_star)
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// scree

#[derive(Debug, Clone)]
pub struct ScreeReport {
    pub config_hash: String,
    pub spectrum: Spectrum,
    pub table: ScreeTable,
}

pub fn cmd_scree(args: &ScreeArgs) -> CliResult<ScreeReport> {
    let input = load_input(&args.input)?;
    let config_hash = RunConfig {
        command: "scree",
        input_sha256: Some(&input.sha256),
        params: args,
    }
    .hash();
    let data = &input.data;
    let k = args.k.resolve(data.rows())?;
    let spectrum = spectrum_of(data, k)?;
    let limit = k.min(data.cols()).saturating_sub(1);
    if limit == 0 {
        return Err(Error::InvalidInput(format!("k = {k} leaves no eigenvalues to plot")).into());
    }
    let table = scree(&spectrum, limit)?;
    Ok(ScreeReport {
        config_hash,
        spectrum,
        table,
    })
}

pub fn write_spectrum_csv(hash: &str, spectrum: &Spectrum, w: &mut dyn Write) -> CliResult<()> {
    writeln!(w, "{}", hash_comment(hash)).map_err(io_err)?;
    writeln!(w, "# k: {}", spectrum.k()).map_err(io_err)?;
    write_indexed_csv(spectrum.eigenvalues(), "eigenvalue", w)?;
    Ok(())
}

/// Reads back a `spectrum.csv` written by `scree`.
pub fn read_spectrum_csv(path: &Path) -> CliResult<Spectrum> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
    let k = text
        .lines()
        .find_map(|l| l.strip_prefix("# k:"))
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::InvalidInput(format!("{}: missing `# k:` line", path.display())))?;
    let values = read_indexed_csv(text.as_bytes())?;
    Ok(Spectrum::new(values, k)?)
}

fn save_scree(args: &ScreeArgs, report: &ScreeReport) -> CliResult<()> {
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("cannot create {}", args.out.display()), e))?;
    let hash = &report.config_hash;
    for (name, header, values) in [
        ("scaled.csv", "scaled", &report.table.scaled),
        ("increments.csv", "increment", &report.table.increments),
    ] {
        with_output(Some(&args.out.join(name)), |w| {
            writeln!(w, "{}", hash_comment(hash)).map_err(io_err)?;
            write_indexed_csv(values, header, w)?;
            Ok(())
        })?;
    }
    with_output(Some(&args.out.join("spectrum.csv")), |w| {
        write_spectrum_csv(hash, &report.spectrum, w)
    })
}

// ---------------------------------------------------------------------------
// mp

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRow {
    pub quantity: &'static str,
    pub argument: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MpReport {
    pub config_hash: String,
    pub c: f64,
    pub rows: Vec<TheoryRow>,
}

pub fn cmd_mp(args: &MpArgs) -> CliResult<MpReport> {
    let config_hash = RunConfig {
        command: "mp",
        input_sha256: None,
        params: args,
    }
    .hash();
    let c = AspectRatio::new(args.c)?;
    let mp = MarchenkoPastur::from(c);
    let (a, b) = mp.support();
    let xs: Vec<f64> = if args.x.is_empty() {
        if args.grid < 2 {
            return Err(CliError::Usage("--grid needs at least 2 points".into()));
        }
        (0..args.grid)
            .map(|i| a + (b - a) * i as f64 / (args.grid - 1) as f64)
            .collect()
    } else {
        args.x.clone()
    };
    let row = |quantity, argument, value| TheoryRow {
        quantity,
        argument,
        value,
    };
    let mut rows = vec![
        row("support_lower", None, a),
        row("support_upper", None, b),
        row("point_mass", None, mp.point_mass()),
    ];
    rows.extend(xs.iter().map(|&x| row("density", Some(x), mp.density(x))));
    rows.extend(xs.iter().map(|&x| row("cdf", Some(x), mp.cdf(x))));
    for &alpha in &args.alpha {
        rows.push(row("quantile", Some(alpha), mp.quantile(alpha)?));
    }
    for &xi in &args.xi {
        rows.push(row("phi", Some(xi), phi_c(xi, c)?));
        rows.push(row(
            "forecast",
            Some(xi),
            SpikeForecast::new(xi, c)?.predicted_empirical,
        ));
    }
    Ok(MpReport {
        config_hash,
        c: args.c,
        rows,
    })
}

pub fn write_mp_csv(report: &MpReport, w: &mut dyn Write) -> CliResult<()> {
    writeln!(w, "{}", hash_comment(&report.config_hash)).map_err(io_err)?;
    writeln!(w, "quantity,argument,value").map_err(io_err)?;
    for r in &report.rows {
        writeln!(w, "{},{},{}", r.quantity, fmt_opt(r.argument), r.value).map_err(io_err)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gap

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub c: f64,
    pub xi: f64,
    pub phi: f64,
    pub gap_margin: f64,
    /// Only defined for `c > 1`.
    pub modified_margin: Option<f64>,
    /// `gap` for `c < 1`, `modified` for `c > 1`.
    pub applicable: &'static str,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub config_hash: String,
    pub rows: Vec<GapRow>,
}

pub fn gap_row(xi: f64, c: f64) -> CliResult<GapRow> {
    let ratio = AspectRatio::new(c)?;
    let plain = gap_condition(xi, ratio)?;
    let applicable = applicable_gap_condition(xi, ratio)?;
    Ok(GapRow {
        c,
        xi,
        phi: phi_c(xi, ratio)?,
        gap_margin: plain.margin,
        modified_margin: (c > 1.0).then_some(applicable.margin),
        applicable: if c > 1.0 { "modified" } else { "gap" },
        satisfied: applicable.satisfied,
    })
}

pub fn cmd_gap(args: &GapArgs) -> CliResult<GapReport> {
    let config_hash = RunConfig {
        command: "gap",
        input_sha256: None,
        params: args,
    }
    .hash();
    let mut rows = Vec::new();
    for &xi in &args.xi {
        for &c in &args.c {
            rows.push(gap_row(xi, c)?);
        }
    }
    Ok(GapReport { config_hash, rows })
}

pub fn write_gap_csv(report: &GapReport, w: &mut dyn Write) -> CliResult<()> {
    writeln!(w, "{}", hash_comment(&report.config_hash)).map_err(io_err)?;
    writeln!(
        w,
        "xi,c,phi,gap_margin,modified_margin,applicable,satisfied"
    )
    .map_err(io_err)?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.xi,
            r.c,
            r.phi,
            r.gap_margin,
            fmt_opt(r.modified_margin),
            r.applicable,
            r.satisfied
        )
        .map_err(io_err)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

/// Executes a parsed command line, writing its outputs.
pub fn run(cli: crate::args::Cli) -> CliResult<()> {
    use crate::args::Command;
    match cli.command {
        Command::Estimate(args) => {
            let report = cmd_estimate(&args)?;
            eprintln!("{}", report_hash_line(&report.config_hash));
            print_estimate(&args, &report)
        }
        Command::Simulate(args) => {
            let report = cmd_simulate(&args)?;
            eprintln!("{}", report_hash_line(&report.config_hash));
            save_simulation(&args, &report)
        }
        Command::Scree(args) => {
            let report = cmd_scree(&args)?;
            eprintln!("{}", report_hash_line(&report.config_hash));
            save_scree(&args, &report)
        }
        Command::Mp(args) => {
            let report = cmd_mp(&args)?;
            eprintln!("{}", report_hash_line(&report.config_hash));
            with_output(args.out.as_deref(), |w| match args.format {
                Format::Csv => write_mp_csv(&report, w),
                Format::Json => write_json(w, &report),
            })
        }
        Command::Gap(args) => {
            let report = cmd_gap(&args)?;
            eprintln!("{}", report_hash_line(&report.config_hash));
            with_output(args.out.as_deref(), |w| match args.format {
                Format::Csv => write_gap_csv(&report, w),
                Format::Json => write_json(w, &report),
            })
        }
    }
}

fn report_hash_line(hash: &str) -> String {
    format!("config-hash: {hash}")
}
