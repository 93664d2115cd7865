//! `fit-compare`: fit Bayesian logistic regressions described by a config
//! file, estimate their out-of-sample predictive density, and write
//! comparison tables plus calibration diagnostics.
//!
//! Exit codes: 0 on success, 1 for configuration/input problems, 2 for
//! numerical failures (a failed fit, degenerate weights, ...). Partial
//! results are still written when a late stage fails.

use std::path::PathBuf;

use clap::Parser;

use elpd::{emit_reports, run_pipeline, ReportBundle, RunConfig};

#[derive(Parser)]
#[command(
    name = "fit-compare",
    version,
    about = "Fit and compare Bayesian logistic regression models by estimated \
             out-of-sample predictive density"
)]
struct Args {
    /// Path to the run configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Override the seed from the config file (beats FIT_COMPARE_SEED).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (beats the config file's 'out'; default '.').
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_CONFIG: i32 = 1;
const EXIT_NUMERICAL: i32 = 2;

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let args = Args::parse();

    match std::env::var("FIT_COMPARE_THREADS") {
        Ok(raw) => match raw.parse::<usize>() {
            Ok(threads) if threads > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                {
                    eprintln!("error: cannot set thread count: {e}");
                    return EXIT_CONFIG;
                }
            }
            _ => {
                eprintln!("error: FIT_COMPARE_THREADS must be a positive integer, got '{raw}'");
                return EXIT_CONFIG;
            }
        },
        Err(_) => {}
    }

    let mut config = match RunConfig::from_file(&args.config) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    // Seed precedence: --seed, then FIT_COMPARE_SEED, then the config file.
    match args.seed {
        Some(seed) => config.seed = seed,
        None => {
            if let Ok(raw) = std::env::var("FIT_COMPARE_SEED") {
                match raw.parse::<u64>() {
                    Ok(seed) => config.seed = seed,
                    Err(_) => {
                        eprintln!(
                            "error: FIT_COMPARE_SEED must be an unsigned integer, got '{raw}'"
                        );
                        return EXIT_CONFIG;
                    }
                }
            }
        }
    }

    let out_dir = args
        .out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));

    eprintln!(
        "fit-compare: {} model(s), {} estimator(s), seed {}",
        config.models.len(),
        config.estimators.len(),
        config.seed
    );

    match run_pipeline(&config) {
        Ok(bundle) => {
            print_summary(&bundle);
            match emit_reports(&bundle, &out_dir) {
                Ok(written) => {
                    for path in &written {
                        eprintln!("wrote {}", path.display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            }
        }
        Err(failure) => {
            eprintln!("error: {}", failure.error);
            // Persist whatever completed before the failure.
            match emit_reports(&failure.partial, &out_dir) {
                Ok(written) if !written.is_empty() => {
                    eprintln!("partial results written to {}", out_dir.display());
                }
                _ => {}
            }
            if failure.error.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn print_summary(bundle: &ReportBundle) {
    println!("n = {} observation(s), {} dropped", bundle.n, bundle.dropped_rows);
    for model in &bundle.models {
        for report in &model.reports {
            let subsample = report
                .subsampling_se
                .map(|se| format!(", subsampling se {se:.2}"))
                .unwrap_or_default();
            println!(
                "model {}: {} elpd {:.2} (se {:.2}{subsample})",
                model.name,
                report.estimator.label(),
                report.elpd_sum,
                report.se_loo
            );
        }
        if let Some(pit) = &model.loo_pit {
            println!(
                "model {}: calibration KS p = {:.3} ({:?})",
                model.name, pit.ks_pvalue, pit.ks_band
            );
        }
    }
    for table in &bundle.comparisons {
        for row in &table.rows {
            // Mirrored rows carry no extra information in a console summary.
            if row.model_a < row.model_b {
                let subsample = row
                    .subsampling_se
                    .map(|se| format!(", subsampling se {se:.2}"))
                    .unwrap_or_default();
                println!(
                    "compare [{}] {} - {}: diff {:.2} (se {:.2}{subsample})",
                    table.estimator.label(),
                    row.model_a,
                    row.model_b,
                    row.elpd_diff,
                    row.se_diff
                );
            }
        }
    }
    for warning in &bundle.warnings {
        eprintln!("warning: {warning}");
    }
}
