//! Subcommand implementations.

use clap::{Args, Subcommand};
use std::path::PathBuf;

use grf::covariance::CovarianceModel;
use grf::field::FieldRealisation;
use grf::periodisation::{minimal_embedding, PeriodisationParams, Scaling, SpectrumTable};
use grf::rng::RngStream;
use grf::sampler::{CeSampler, DnaSampler, PeriodicSampler};
use grf::spde::{DnaFemSampler, NeumannOversampledSampler, StructuredMesh};
use grf::stats::{
    empirical_max_cov_error, marginal_variance_profile, periodisation_error_bound,
    truncation_error_bound, ProbeSet,
};
use grf::GrfError;

use crate::config::default_out_dir;
use crate::output::{fmt_f64, write_csv, write_manifest, write_pgm};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible(String),
    Runtime(String),
}

impl From<GrfError> for CliError {
    fn from(e: GrfError) -> Self {
        match e {
            GrfError::NegativeSpectrum { .. } => CliError::Infeasible(format!(
                "{e}; run `grf min-embed` to search for a feasible padding factor"
            )),
            GrfError::Domain(_) | GrfError::Unsupported(_) | GrfError::Size(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate field realisations and write them as flat binary files.
    Sample(SampleArgs),
    /// Monte-Carlo maximal covariance error sweep (Table-style CSV).
    CovError(CovErrorArgs),
    /// Minimal circulant-embedding padding factors over a parameter sweep.
    MinEmbed(MinEmbedArgs),
    /// Averaged vs Neumann-oversampled FE sampling comparison.
    SpdeCompare(SpdeCompareArgs),
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// periodic | ce | dna | spde-dna | spde-neumann
    #[arg(long)]
    method: String,
    /// matern | gaussian | cauchy
    #[arg(long, default_value = "matern")]
    model: String,
    /// Matérn smoothness
    #[arg(long)]
    nu: Option<f64>,
    /// correlation length
    #[arg(long)]
    ell: f64,
    /// domain scaling parameter
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// grid truncation per axis
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// spatial dimension
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// number of realisations
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// worker threads (0 = all cores); results are thread-count independent
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// max padding factor (ce) / domain extension (spde-neumann)
    #[arg(long, default_value_t = 256)]
    extension: usize,
    /// mesh subdivisions per unit length (spde methods)
    #[arg(long, default_value_t = 32)]
    mesh: usize,
}

#[derive(Args, Debug)]
pub struct CovErrorArgs {
    /// covariance columns, e.g. "matern:0.5,matern:2,matern:8,gaussian,cauchy"
    #[arg(long, default_value = "matern:0.5,matern:2,matern:8,gaussian,cauchy")]
    columns: String,
    /// comma list of correlation lengths (table rows)
    #[arg(long, default_value = "0.025,0.05,0.1,0.2")]
    ell: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1500)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Monte-Carlo sample count
    #[arg(long)]
    count: u64,
    #[arg(long, default_value_t = 40)]
    batches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// append analytic bound columns for Matérn entries
    #[arg(long, default_value_t = false)]
    bounds: bool,
}

#[derive(Args, Debug)]
pub struct MinEmbedArgs {
    #[arg(long, default_value = "matern")]
    model: String,
    #[arg(long, default_value = "0.5,1,2,4,8")]
    nu: String,
    #[arg(long, default_value = "0.025,0.05,0.1,0.2")]
    ell: String,
    #[arg(long, default_value_t = 1500)]
    n: usize,
    #[arg(long = "max-factor", default_value_t = 256)]
    max_factor: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpdeCompareArgs {
    /// comma list of integer domain extensions
    #[arg(long, default_value = "1,2")]
    alpha: String,
    /// comma list of mesh subdivisions per unit length
    #[arg(long, default_value = "16,32")]
    mesh: String,
    #[arg(long, default_value_t = 0.25)]
    ell: f64,
    /// smoothness; the FE solver covers beta = 1, i.e. nu = 1 in d = 2
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long)]
    count: u64,
    #[arg(long, default_value_t = 40)]
    batches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Sample(args) => with_pool(args.threads, || cmd_sample(&args)),
        Command::CovError(args) => with_pool(args.threads, || cmd_cov_error(&args)),
        Command::MinEmbed(args) => with_pool(0, || cmd_min_embed(&args)),
        Command::SpdeCompare(args) => with_pool(args.threads, || cmd_spde_compare(&args)),
    }
}

fn with_pool<T>(threads: usize, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(f)
}

fn build_model(family: &str, nu: Option<f64>, ell: f64) -> CliResult<CovarianceModel> {
    Ok(match family {
        "matern" => {
            let nu = nu.ok_or_else(|| CliError::Usage("matern needs --nu".into()))?;
            CovarianceModel::matern(nu, ell)?
        }
        "gaussian" => CovarianceModel::gaussian(ell)?,
        "cauchy" => CovarianceModel::cauchy(ell)?,
        other => return Err(CliError::Usage(format!("unknown model `{other}`"))),
    })
}

fn parse_f64_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry `{s}`")))
        })
        .collect()
}

fn parse_usize_list(text: &str, what: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry `{s}`")))
        })
        .collect()
}

fn out_dir(path: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = path.clone().unwrap_or_else(default_out_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn check_counts(count: u64, batches: usize) -> CliResult<()> {
    if count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    if batches == 0 || count % batches as u64 != 0 {
        return Err(CliError::Usage(format!(
            "--count {count} must be a multiple of --batches {batches}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- sample

fn cmd_sample(args: &SampleArgs) -> CliResult<()> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let dir = out_dir(&args.out)?;
    let model = build_model(&args.model, args.nu, args.ell)?;

    enum Generator {
        Dna(DnaSampler),
        Periodic(PeriodicSampler),
        Ce(Box<CeSampler>, usize),
        SpdeDna(DnaFemSampler),
        SpdeNeumann(NeumannOversampledSampler),
    }

    let generator = match args.method.as_str() {
        "dna" => {
            let table = SpectrumTable::build(
                model,
                Scaling::TwoAlpha,
                PeriodisationParams::new(args.alpha, args.n, args.d)?,
            )?;
            Generator::Dna(DnaSampler::new(table)?)
        }
        "periodic" => {
            let table = SpectrumTable::build(
                model,
                Scaling::Alpha,
                PeriodisationParams::new(args.alpha, args.n, args.d)?,
            )?;
            Generator::Periodic(PeriodicSampler::with_default_grid(table)?)
        }
        "ce" => {
            if args.d != 1 {
                return Err(CliError::Usage("circulant embedding sampling is wired for d = 1".into()));
            }
            let max_factor = args.extension.next_power_of_two();
            let found = minimal_embedding(&model, args.n, max_factor)?;
            let Some(tau) = found else {
                return Err(CliError::Infeasible(format!(
                    "no positive-definite embedding up to padding factor {max_factor}; \
                     minimal_embedding found none — raise --extension or use --method dna"
                )));
            };
            let tau = tau.max(2); // exact covariance needs a two-period window
            let spacing = 1.0 / args.n as f64;
            Generator::Ce(Box::new(CeSampler::new(model, args.n, spacing, tau, 1)?), tau)
        }
        "spde-dna" => {
            validate_spde(args.model.as_str(), args.nu, args.d)?;
            let alpha_int = args.alpha as usize;
            if args.alpha.fract() != 0.0 || alpha_int == 0 {
                return Err(CliError::Usage("spde methods need an integer --alpha >= 1".into()));
            }
            let mesh = StructuredMesh::new(args.mesh * alpha_int, alpha_int as f64)?;
            Generator::SpdeDna(DnaFemSampler::new(&mesh, args.ell)?)
        }
        "spde-neumann" => {
            validate_spde(args.model.as_str(), args.nu, args.d)?;
            Generator::SpdeNeumann(NeumannOversampledSampler::new(args.ell, args.mesh, args.extension)?)
        }
        other => return Err(CliError::Usage(format!("unknown method `{other}`"))),
    };

    use rayon::prelude::*;
    let results: Vec<Result<(), String>> = (0..args.count)
        .into_par_iter()
        .map(|r| {
            let field: FieldRealisation = match &generator {
                Generator::Dna(s) => s.sample_dna(RngStream::new(args.seed, r)),
                Generator::Periodic(s) => {
                    let pair = s.sample(RngStream::new(args.seed, r / 2));
                    if r % 2 == 0 {
                        pair.0
                    } else {
                        pair.1
                    }
                }
                Generator::Ce(s, _) => {
                    let pair = s.sample(RngStream::new(args.seed, r / 2));
                    if r % 2 == 0 {
                        pair.0
                    } else {
                        pair.1
                    }
                }
                Generator::SpdeDna(s) => s.solve_dna(RngStream::new(args.seed, r)),
                Generator::SpdeNeumann(s) => s.sample(RngStream::new(args.seed, r)),
            };
            let path = dir.join(format!("real_{r:05}.bin"));
            field.write_binary(&path).map_err(|e| e.to_string())
        })
        .collect();
    for res in results {
        res.map_err(CliError::Runtime)?;
    }

    let mut entries = vec![
        ("command", "sample".to_string()),
        ("method", args.method.clone()),
        ("model", args.model.clone()),
        ("nu", args.nu.map(|v| v.to_string()).unwrap_or_else(|| "".into())),
        ("ell", args.ell.to_string()),
        ("alpha", args.alpha.to_string()),
        ("n", args.n.to_string()),
        ("d", args.d.to_string()),
        ("count", args.count.to_string()),
        ("seed", args.seed.to_string()),
        ("threads", args.threads.to_string()),
        ("mesh", args.mesh.to_string()),
        ("extension", args.extension.to_string()),
    ];
    if let Generator::Ce(_, tau) = &generator {
        entries.push(("embedding_factor", tau.to_string()));
    }
    write_manifest(&dir.join("manifest.txt"), &entries)?;
    Ok(())
}

fn validate_spde(model: &str, nu: Option<f64>, d: usize) -> CliResult<()> {
    if model != "matern" {
        return Err(CliError::Usage("spde methods sample Matérn fields".into()));
    }
    if let Some(nu) = nu {
        if nu != 1.0 {
            return Err(CliError::Usage(format!(
                "the FE solver covers beta = 1 only, which fixes nu = 1 in d = 2 (got nu = {nu})"
            )));
        }
    }
    if d != 1 && d != 2 {
        return Err(CliError::Usage("spde methods run on the unit square (d = 2)".into()));
    }
    Ok(())
}

// ------------------------------------------------------------- cov-error

struct ColumnSpec {
    label: String,
    family: String,
    nu: Option<f64>,
}

fn parse_columns(text: &str) -> CliResult<Vec<ColumnSpec>> {
    text.split(',')
        .map(|raw| {
            let raw = raw.trim();
            let (family, nu) = match raw.split_once(':') {
                Some((fam, nu)) => {
                    let nu: f64 = nu
                        .parse()
                        .map_err(|_| CliError::Usage(format!("bad column `{raw}`")))?;
                    (fam.to_string(), Some(nu))
                }
                None => (raw.to_string(), None),
            };
            let label = match nu {
                Some(nu) => format!("{family}_nu{nu}"),
                None => family.clone(),
            };
            Ok(ColumnSpec { label, family, nu })
        })
        .collect()
}

fn cmd_cov_error(args: &CovErrorArgs) -> CliResult<()> {
    check_counts(args.count, args.batches)?;
    if args.d != 1 {
        return Err(CliError::Usage("the covariance-error sweep probes d = 1 grids".into()));
    }
    let dir = out_dir(&args.out)?;
    let columns = parse_columns(&args.columns)?;
    let ells = parse_f64_list(&args.ell, "ell")?;

    let mut header: Vec<String> = vec!["ell".into()];
    for col in &columns {
        header.push(col.label.clone());
        header.push(format!("{}_sd", col.label));
    }
    if args.bounds {
        for col in &columns {
            header.push(format!("{}_bound_period", col.label));
            header.push(format!("{}_bound_trunc", col.label));
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (ei, &ell) in ells.iter().enumerate() {
        let mut row = vec![ell.to_string()];
        let mut bound_cells: Vec<String> = Vec::new();
        for (ci, col) in columns.iter().enumerate() {
            let model = build_model(&col.family, col.nu, ell)?;
            let table = SpectrumTable::build(
                model,
                Scaling::TwoAlpha,
                PeriodisationParams::new(args.alpha, args.n, 1)?,
            )?;
            let sampler = DnaSampler::new(table)?;
            let n = args.n;
            let len = n + 1;
            let h = args.alpha / n as f64;
            let target_row: Vec<f64> = (0..len)
                .map(|j| model.stationary(&[j as f64 * h]).unwrap())
                .collect();
            let probes = ProbeSet {
                refs: vec![0],
                target_rows: vec![target_row],
                target_diag: vec![1.0; len],
            };
            // disjoint stream space per table cell
            let cell = (ei * columns.len() + ci) as u64;
            let base = cell * args.count;
            let gen = |r: u64| {
                sampler
                    .sample_dna(RngStream::new(args.seed, base + r))
                    .values
                    .into_raw_vec()
            };
            let report = empirical_max_cov_error(gen, len, &probes, args.count, args.batches)?;
            row.push(fmt_f64(report.max_error));
            row.push(fmt_f64(report.std_error));
            if args.bounds {
                if col.family == "matern" {
                    let nu = col.nu.expect("matern column has nu");
                    let per = periodisation_error_bound(nu, ell, args.alpha, 1)
                        .map(fmt_f64)
                        .unwrap_or_else(|_| "NA".into());
                    let trunc = truncation_error_bound(nu, ell, args.alpha, args.n, 1)
                        .map(fmt_f64)
                        .unwrap_or_else(|_| "NA".into());
                    bound_cells.push(per);
                    bound_cells.push(trunc);
                } else {
                    bound_cells.push("NA".into());
                    bound_cells.push("NA".into());
                }
            }
        }
        row.extend(bound_cells);
        rows.push(row);
    }
    write_csv(&dir.join("cov_error.csv"), &header, &rows)?;
    write_manifest(
        &dir.join("manifest.txt"),
        &[
            ("command", "cov-error".to_string()),
            ("columns", args.columns.clone()),
            ("ell", args.ell.clone()),
            ("alpha", args.alpha.to_string()),
            ("n", args.n.to_string()),
            ("d", args.d.to_string()),
            ("count", args.count.to_string()),
            ("batches", args.batches.to_string()),
            ("seed", args.seed.to_string()),
            ("threads", args.threads.to_string()),
            ("bounds", args.bounds.to_string()),
        ],
    )?;
    Ok(())
}

// ------------------------------------------------------------- min-embed

fn cmd_min_embed(args: &MinEmbedArgs) -> CliResult<()> {
    if !args.max_factor.is_power_of_two() {
        return Err(CliError::Usage("--max-factor must be a power of two".into()));
    }
    let dir = out_dir(&args.out)?;
    let ells = parse_f64_list(&args.ell, "ell")?;
    let nus: Vec<Option<f64>> = if args.model == "matern" {
        parse_f64_list(&args.nu, "nu")?.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let header: Vec<String> =
        ["model", "nu", "ell", "tau"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for nu in &nus {
        for &ell in &ells {
            let model = build_model(&args.model, *nu, ell)?;
            let tau = minimal_embedding(&model, args.n, args.max_factor)?;
            rows.push(vec![
                args.model.clone(),
                nu.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
                ell.to_string(),
                tau.map(|t| t.to_string()).unwrap_or_else(|| "NA".into()),
            ]);
        }
    }
    write_csv(&dir.join("min_embed.csv"), &header, &rows)?;
    write_manifest(
        &dir.join("manifest.txt"),
        &[
            ("command", "min-embed".to_string()),
            ("model", args.model.clone()),
            ("nu", args.nu.clone()),
            ("ell", args.ell.clone()),
            ("n", args.n.to_string()),
            ("max-factor", args.max_factor.to_string()),
        ],
    )?;
    Ok(())
}

// ---------------------------------------------------------- spde-compare

fn cmd_spde_compare(args: &SpdeCompareArgs) -> CliResult<()> {
    check_counts(args.count, args.batches)?;
    if args.nu != 1.0 {
        return Err(CliError::Usage(format!(
            "the FE comparison covers beta = 1 only, which fixes nu = 1 in d = 2 (got nu = {})",
            args.nu
        )));
    }
    let dir = out_dir(&args.out)?;
    let alphas = parse_usize_list(&args.alpha, "alpha")?;
    let meshes = parse_usize_list(&args.mesh, "mesh")?;
    let model = CovarianceModel::matern(1.0, args.ell)?;

    let header: Vec<String> = ["method", "alpha", "mesh", "h", "max_error", "std_error", "count"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    let mut run_idx = 0u64;

    for &m in &meshes {
        let len = m + 1;
        let h = 1.0 / m as f64;
        let target_row: Vec<f64> = (0..len)
            .map(|j| model.stationary(&[j as f64 * h, j as f64 * h]).unwrap())
            .collect();
        let probes = ProbeSet {
            refs: vec![0],
            target_rows: vec![target_row.clone()],
            target_diag: vec![1.0; len],
        };
        for &alpha in &alphas {
            if alpha == 0 {
                return Err(CliError::Usage("--alpha entries must be >= 1".into()));
            }
            // averaged sampler on (0, alpha)^2, window = lower-left unit square
            let mesh = StructuredMesh::new(m * alpha, alpha as f64)?;
            let dna = DnaFemSampler::new(&mesh, args.ell)?;
            let ext_side = mesh.m + 1;
            let seed = args.seed.wrapping_add(run_idx << 32);
            run_idx += 1;
            let gen_dna = |r: u64| {
                let field = dna.solve_dna(RngStream::new(seed, r));
                let flat = field.values.as_slice().expect("contiguous");
                (0..len).map(|i| flat[i * ext_side + i]).collect::<Vec<f64>>()
            };
            let report = empirical_max_cov_error(gen_dna, len, &probes, args.count, args.batches)?;
            rows.push(vec![
                "dna-fem".into(),
                alpha.to_string(),
                m.to_string(),
                h.to_string(),
                fmt_f64(report.max_error),
                fmt_f64(report.std_error),
                args.count.to_string(),
            ]);

            let neumann = NeumannOversampledSampler::new(args.ell, m, alpha)?;
            let seed = args.seed.wrapping_add(run_idx << 32);
            run_idx += 1;
            let gen_neu = |r: u64| {
                let field = neumann.sample(RngStream::new(seed, r));
                let flat = field.values.as_slice().expect("contiguous");
                (0..len).map(|i| flat[i * len + i]).collect::<Vec<f64>>()
            };
            let report = empirical_max_cov_error(gen_neu, len, &probes, args.count, args.batches)?;
            rows.push(vec![
                "neumann".into(),
                alpha.to_string(),
                m.to_string(),
                h.to_string(),
                fmt_f64(report.max_error),
                fmt_f64(report.std_error),
                args.count.to_string(),
            ]);
        }
    }
    write_csv(&dir.join("spde_compare.csv"), &header, &rows)?;

    // Fig-5-style marginal-variance heatmaps for the first mesh at alpha = 1:
    // the four boundary masks and their average.
    let m = meshes[0];
    let mesh = StructuredMesh::new(m, 1.0)?;
    let side = m + 1;
    let dna = DnaFemSampler::new(&mesh, args.ell)?;
    for (k, solver) in dna.solvers.iter().enumerate() {
        let label = solver.bvp.config.mask.label();
        let seed = args.seed.wrapping_add(0xbeef + k as u64);
        let gen = |r: u64| solver.solve_single_bc(RngStream::new(seed, r));
        let var = marginal_variance_profile(gen, side * side, args.count, args.batches)?;
        let img = ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&[side, side]), var)
            .expect("node grid");
        write_pgm(&dir.join(format!("var_{label}.pgm")), &img)?;
    }
    let seed = args.seed.wrapping_add(0xfeed);
    let gen = |r: u64| {
        dna.solve_dna(RngStream::new(seed, r)).values.into_raw_vec()
    };
    let var = marginal_variance_profile(gen, side * side, args.count, args.batches)?;
    let img =
        ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&[side, side]), var).expect("node grid");
    write_pgm(&dir.join("var_dna.pgm"), &img)?;

    write_manifest(
        &dir.join("manifest.txt"),
        &[
            ("command", "spde-compare".to_string()),
            ("alpha", args.alpha.clone()),
            ("mesh", args.mesh.clone()),
            ("ell", args.ell.to_string()),
            ("nu", args.nu.to_string()),
            ("count", args.count.to_string()),
            ("batches", args.batches.to_string()),
            ("seed", args.seed.to_string()),
            ("threads", args.threads.to_string()),
        ],
    )?;
    Ok(())
}
