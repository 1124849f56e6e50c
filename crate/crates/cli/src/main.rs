//! `symsdp` — block diagonalization of group-invariant semidefinite
//! programs from the command line.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 resource cap
//! exceeded, 4 degenerate random sampling, 5 non-invariant data,
//! 6 verification failure, 1 anything else.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use symsdp_core::decomposer::{coefficients, decompose, DecomposeConfig};
use symsdp_core::permgroup::DEFAULT_GROUP_CAP;
use symsdp_core::sdpreduce::{
    check_invariance, export_sdpa, lift_solution, realify, reduce, symmetrize,
};
use symsdp_core::terwilliger::{cross_validate, TerwilligerTables};
use symsdp_core::{Complex, Error, GroupAction, InvariantSdp, PairOrbits};

#[derive(Parser)]
#[command(
    name = "symsdp",
    version,
    about = "Block diagonalization of semidefinite programs invariant under a permutation group"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for all randomized steps; identical seeds give byte-identical
    /// outputs.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Verification tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    /// Write the main output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format where applicable.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Print the pair-orbit structure of a group action.
    Orbits { group: PathBuf },
    /// Decompose the commutant of a group action into matrix units and
    /// orbit coefficients, with verification residuals.
    Decompose {
        group: PathBuf,
        /// Include the matrix units in the output (large).
        #[arg(long)]
        emit_basis: bool,
        /// Skip verification (for timing runs).
        #[arg(long)]
        no_verify: bool,
    },
    /// Reduce an invariant program to block form and export SDPA input.
    Reduce {
        group: PathBuf,
        sdp: PathBuf,
        /// Replace the data by its group average before reducing.
        #[arg(long)]
        symmetrize: bool,
        /// Write a JSON reduction report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Lift orbit coefficients to a full matrix and report feasibility.
    Lift {
        group: PathBuf,
        sdp: PathBuf,
        y: PathBuf,
    },
    /// Exact tables for the commutant of coordinate permutations on
    /// binary words.
    Terwilliger {
        #[arg(long)]
        n: u64,
        /// Run the exact identity suite and the numeric cross-validation.
        #[arg(long)]
        verify: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("symsdp: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MalformedInput(_) | Error::Json(_) | Error::Domain(_) => 2,
        Error::ResourceLimit(_) => 3,
        Error::DegenerateSample { .. } => 4,
        Error::NotInvariant { .. } => 5,
        Error::Verification { .. } => 6,
        _ => 1,
    }
}

fn read_input(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::MalformedInput(format!("cannot read {}: {e}", path.display())))
}

fn group_cap() -> usize {
    std::env::var("SYMSDP_CAP_GROUP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_GROUP_CAP)
}

fn load_action(path: &Path) -> Result<GroupAction, Error> {
    let action = GroupAction::from_json(&read_input(path)?)?;
    let generators = action.generators().to_vec();
    GroupAction::with_cap(generators, action.domain_size(), group_cap())
}

fn emit(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Orbits { group } => cmd_orbits(cli, group),
        Command::Decompose {
            group,
            emit_basis,
            no_verify,
        } => cmd_decompose(cli, group, *emit_basis, *no_verify),
        Command::Reduce {
            group,
            sdp,
            symmetrize,
            report,
        } => cmd_reduce(cli, group, sdp, *symmetrize, report.as_deref()),
        Command::Lift { group, sdp, y } => cmd_lift(cli, group, sdp, y),
        Command::Terwilliger { n, verify } => cmd_terwilliger(cli, *n, *verify),
    }
}

#[derive(Serialize)]
struct OrbitReport {
    domain_size: usize,
    num_orbits: usize,
    orbits: Vec<OrbitRow>,
}

#[derive(Serialize)]
struct OrbitRow {
    index: usize,
    representative: [usize; 2],
    size: usize,
    transpose_of: usize,
}

fn cmd_orbits(cli: &Cli, group: &Path) -> Result<(), Error> {
    let action = load_action(group)?;
    let orbits = PairOrbits::compute(&action)?;
    let report = OrbitReport {
        domain_size: action.domain_size(),
        num_orbits: orbits.count(),
        orbits: (0..orbits.count())
            .map(|r| {
                let (x, y) = orbits.representative(r);
                OrbitRow {
                    index: r,
                    representative: [x, y],
                    size: orbits.size(r),
                    transpose_of: orbits.transpose_of(r),
                }
            })
            .collect(),
    };
    emit(cli, &to_json(&report)?)
}

#[derive(Serialize)]
struct DecomposeReport {
    domain_size: usize,
    seed: u64,
    tolerance: f64,
    num_orbits: usize,
    blocks: Vec<BlockRow>,
    residuals: ResidualRow,
    coefficients: Vec<OrbitCoefficients>,
    #[serde(skip_serializing_if = "Option::is_none")]
    units: Option<Vec<Vec<ComplexMatrix>>>,
}

#[derive(Serialize)]
struct BlockRow {
    index: usize,
    dimension: usize,
    multiplicity: usize,
    real: bool,
}

#[derive(Serialize)]
struct ResidualRow {
    multiplication: f64,
    unit_adjoint: f64,
    space_invariance: f64,
    commutant: f64,
    orthogonality: f64,
    reconstruction: f64,
}

#[derive(Serialize)]
struct OrbitCoefficients {
    orbit: usize,
    representative: [usize; 2],
    size: usize,
    blocks: Vec<ComplexMatrix>,
}

type ComplexMatrix = Vec<Vec<[f64; 2]>>;

fn matrix_rows(m: &symsdp_core::CMatrix) -> ComplexMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn cmd_decompose(cli: &Cli, group: &Path, emit_basis: bool, no_verify: bool) -> Result<(), Error> {
    let action = load_action(group)?;
    let orbits = PairOrbits::compute(&action)?;
    let config = DecomposeConfig {
        seed: cli.seed,
        verify_tol: if no_verify { f64::INFINITY } else { cli.tol },
        ..Default::default()
    };
    let decomposition = decompose(&action, &orbits, &config)?;
    let image = coefficients(&decomposition, &orbits)?;
    let residuals = ResidualRow {
        multiplication: decomposition.residuals().multiplication,
        unit_adjoint: decomposition.residuals().unit_adjoint,
        space_invariance: decomposition.residuals().space_invariance,
        commutant: decomposition.residuals().commutant,
        orthogonality: if no_verify {
            f64::NAN
        } else {
            decomposition.orthogonality_residual(&orbits)
        },
        reconstruction: image.reconstruction_residual(),
    };
    let report = DecomposeReport {
        domain_size: action.domain_size(),
        seed: cli.seed,
        tolerance: cli.tol,
        num_orbits: orbits.count(),
        blocks: decomposition
            .blocks()
            .iter()
            .enumerate()
            .map(|(k, b)| BlockRow {
                index: k,
                dimension: b.dimension(),
                multiplicity: b.multiplicity(),
                real: decomposition.block_imag_magnitude(k) < cli.tol,
            })
            .collect(),
        residuals: ResidualRow { ..residuals },
        coefficients: (0..orbits.count())
            .map(|r| {
                let (x, y) = orbits.representative(r);
                OrbitCoefficients {
                    orbit: r,
                    representative: [x, y],
                    size: orbits.size(r),
                    blocks: (0..decomposition.blocks().len())
                        .map(|k| matrix_rows(image.block(r, k)))
                        .collect(),
                }
            })
            .collect(),
        units: emit_basis.then(|| {
            decomposition
                .blocks()
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let m = b.multiplicity();
                    (0..m * m)
                        .map(|ij| matrix_rows(decomposition.unit(k, ij / m, ij % m)))
                        .collect()
                })
                .collect()
        }),
    };
    emit(cli, &to_json(&report)?)?;
    if !no_verify {
        let worst = residuals
            .multiplication
            .max(residuals.unit_adjoint)
            .max(residuals.space_invariance)
            .max(residuals.commutant)
            .max(residuals.orthogonality)
            .max(residuals.reconstruction);
        if worst > cli.tol {
            return Err(Error::Verification {
                check: "decomposition residual gate".into(),
                residual: worst,
                tolerance: cli.tol,
            });
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ReduceReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    domain_size: usize,
    num_orbits: usize,
    num_constraints: usize,
    original_size: usize,
    reduced_block_sizes: Vec<usize>,
    reduced_size_total: usize,
    doubled_blocks: Vec<usize>,
    invariance_distance: f64,
    symmetrized: bool,
    output: Option<String>,
}

fn cmd_reduce(
    cli: &Cli,
    group: &Path,
    sdp_path: &Path,
    apply_average: bool,
    report_path: Option<&Path>,
) -> Result<(), Error> {
    let action = load_action(group)?;
    let orbits = PairOrbits::compute(&action)?;
    let sdp = InvariantSdp::from_json(&read_input(sdp_path)?)?;
    let invariance = check_invariance(&sdp, &orbits, cli.tol)?;
    let sdp = if apply_average {
        symmetrize(&sdp, &orbits)?
    } else {
        sdp
    };
    let config = DecomposeConfig {
        seed: cli.seed,
        ..Default::default()
    };
    let decomposition = decompose(&action, &orbits, &config)?;
    let image = coefficients(&decomposition, &orbits)?;
    let reduced = reduce(&sdp, &orbits, &image, cli.tol)?;
    let real = realify(&reduced)?;

    let out_path = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("problem.dat-s"));
    std::fs::write(&out_path, export_sdpa(&real).render())?;

    let report = ReduceReport {
        name: sdp.name().map(|s| s.to_string()),
        domain_size: sdp.domain_size(),
        num_orbits: reduced.num_orbits(),
        num_constraints: reduced.rhs().len(),
        original_size: reduced.reduction_ratio().0,
        reduced_block_sizes: real.block_sizes(),
        reduced_size_total: real.block_sizes().iter().sum(),
        doubled_blocks: real
            .blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.doubled)
            .map(|(k, _)| k)
            .collect(),
        invariance_distance: invariance.max_distance(),
        symmetrized: apply_average,
        output: Some(out_path.display().to_string()),
    };
    let text = to_json(&report)?;
    match report_path {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct YFile {
    y: Vec<YEntry>,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum YEntry {
    Real(f64),
    Pair([f64; 2]),
}

#[derive(Serialize)]
struct LiftOutput {
    objective_full: f64,
    objective_reduced: f64,
    min_eigenvalue_full: f64,
    block_min_eigenvalues: Vec<f64>,
    psd: bool,
}

fn cmd_lift(cli: &Cli, group: &Path, sdp_path: &Path, y_path: &Path) -> Result<(), Error> {
    let action = load_action(group)?;
    let orbits = PairOrbits::compute(&action)?;
    let sdp = InvariantSdp::from_json(&read_input(sdp_path)?)?;
    let y_file: YFile = serde_json::from_str(&read_input(y_path)?)
        .map_err(|e| Error::MalformedInput(format!("y file: {e}")))?;
    let y: Vec<Complex> = y_file
        .y
        .iter()
        .map(|entry| match entry {
            YEntry::Real(v) => Complex::new(*v, 0.0),
            YEntry::Pair([re, im]) => Complex::new(*re, *im),
        })
        .collect();
    let config = DecomposeConfig {
        seed: cli.seed,
        ..Default::default()
    };
    let decomposition = decompose(&action, &orbits, &config)?;
    let image = coefficients(&decomposition, &orbits)?;
    let reduced = reduce(&sdp, &orbits, &image, cli.tol)?;
    let (_, report) = lift_solution(&y, &orbits, &sdp, &reduced)?;
    let output = LiftOutput {
        objective_full: report.objective_full,
        objective_reduced: report.objective_reduced,
        min_eigenvalue_full: report.min_eigenvalue_full,
        block_min_eigenvalues: report.block_min_eigenvalues.clone(),
        psd: report.psd,
    };
    emit(cli, &to_json(&output)?)
}

#[derive(Serialize)]
struct TerwilligerReport {
    n: u64,
    blocks: Vec<TerwilligerBlock>,
    triples: Vec<TripleRow>,
    coefficients: Vec<CoefficientRow>,
    sign_flips: Vec<[u64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<VerificationRow>,
}

#[derive(Serialize)]
struct TerwilligerBlock {
    k: u64,
    dimension: u64,
    multiplicity: u64,
}

#[derive(Serialize)]
struct TripleRow {
    r: u64,
    s: u64,
    d: u64,
    size: u64,
}

#[derive(Serialize)]
struct CoefficientRow {
    r: u64,
    s: u64,
    d: u64,
    k: u64,
    i: u64,
    j: u64,
    exact: String,
    value: f64,
}

#[derive(Serialize)]
struct VerificationRow {
    multiplication_exact: bool,
    orthogonality_exact: bool,
    reconstruction_exact: bool,
    traces_exact: bool,
    hahn_orthogonality: bool,
    cross_validated: Option<bool>,
    structure_constant_gap: Option<f64>,
    spectrum_gap: Option<f64>,
}

fn terwilliger_rows(tables: &TerwilligerTables) -> Result<Vec<CoefficientRow>, Error> {
    let mut rows = Vec::new();
    for triple in tables.triples() {
        for block in tables.dims() {
            let k = block.k;
            let n = tables.n();
            if triple.r < k || triple.s < k || triple.r > n - k || triple.s > n - k {
                continue;
            }
            let p = tables.p(triple.r, triple.s, triple.d, k, triple.r, triple.s)?;
            rows.push(CoefficientRow {
                r: triple.r,
                s: triple.s,
                d: triple.d,
                k,
                i: triple.r,
                j: triple.s,
                exact: p.to_string(),
                value: p.to_f64(),
            });
        }
    }
    Ok(rows)
}

fn cmd_terwilliger(cli: &Cli, n: u64, verify: bool) -> Result<(), Error> {
    let tables = TerwilligerTables::build(n)?;
    let coefficients = terwilliger_rows(&tables)?;

    let verification = if verify {
        let multiplication = tables.verify_multiplication_exact().is_ok();
        let orthogonality = tables.verify_orthogonality_exact().is_ok();
        let reconstruction = tables.verify_reconstruction_exact().is_ok();
        let traces = tables.verify_traces_exact().is_ok();
        let mut hahn = true;
        for m in 0..=6u64.min(n) {
            for a in m..=10 {
                for b in m..=10 {
                    if symsdp_core::terwilliger::hahn_orthogonality_check(a, b, m)?.is_some() {
                        hahn = false;
                    }
                }
            }
        }
        let (cross, gap_c, gap_s) = if n <= 6 {
            let report = cross_validate(n, cli.seed)?;
            (
                Some(true),
                Some(report.structure_constant_gap),
                Some(report.spectrum_gap),
            )
        } else {
            (None, None, None)
        };
        let row = VerificationRow {
            multiplication_exact: multiplication,
            orthogonality_exact: orthogonality,
            reconstruction_exact: reconstruction,
            traces_exact: traces,
            hahn_orthogonality: hahn,
            cross_validated: cross,
            structure_constant_gap: gap_c,
            spectrum_gap: gap_s,
        };
        if !(multiplication && orthogonality && reconstruction && traces && hahn) {
            emit(cli, &to_json(&row)?)?;
            return Err(Error::Verification {
                check: "exact identity suite".into(),
                residual: f64::NAN,
                tolerance: 0.0,
            });
        }
        Some(row)
    } else {
        None
    };

    match cli.format {
        Format::Json => {
            let report = TerwilligerReport {
                n,
                blocks: tables
                    .dims()
                    .iter()
                    .map(|b| TerwilligerBlock {
                        k: b.k,
                        dimension: b.h,
                        multiplicity: b.m,
                    })
                    .collect(),
                triples: tables
                    .triples()
                    .iter()
                    .map(|t| TripleRow {
                        r: t.r,
                        s: t.s,
                        d: t.d,
                        size: t.size,
                    })
                    .collect(),
                coefficients,
                sign_flips: tables.sign_flips().iter().map(|&(k, i, j)| [k, i, j]).collect(),
                verification,
            };
            emit(cli, &to_json(&report)?)
        }
        Format::Csv => {
            let mut text = String::from("r,s,d,k,i,j,exact,value\n");
            for row in &coefficients {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    row.r,
                    row.s,
                    row.d,
                    row.k,
                    row.i,
                    row.j,
                    row.exact,
                    symsdp_core::sdpa::format_g17(row.value)
                ));
            }
            emit(cli, &text)
        }
    }
}
