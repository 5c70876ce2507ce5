use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nlcb_cli::{run, ProbeSpec, RunOptions, Scenario, Variant};
use nlcb_core::manifold::QuadraticBlocks;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    Linear,
    Nlcb,
    Cb,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => Variant::Full,
            VariantArg::Linear => Variant::Linear,
            VariantArg::Nlcb => Variant::Nlcb,
            VariantArg::Cb => Variant::Cb,
        }
    }
}

/// Simulate a clamped beam with the full model and with reduced models.
#[derive(Debug, Parser)]
#[command(name = "nlcb", version)]
struct Args {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Variants to run; repeat to select several. Defaults to the scenario's list.
    #[arg(long = "variant", value_enum)]
    variants: Vec<VariantArg>,
    /// Drop every quadratic manifold term from the nonlinear ROM.
    #[arg(long)]
    zero_quadratic: bool,
    /// Drop the quadratic terms in interface coordinates only.
    #[arg(long)]
    zero_quadratic_chi: bool,
    /// Drop the quadratic cross terms between modal and interface coordinates.
    #[arg(long)]
    zero_quadratic_cross: bool,
    /// Extra probe as node:dof, dof one of u, w, theta.
    #[arg(long = "probe")]
    probes: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Recorded in the manifest; runs are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads used to integrate variants concurrently.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match execute(&args) {
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

fn execute(args: &Args) -> nlcb_cli::Result<()> {
    let scenario = Scenario::load(&args.scenario)?;
    let keep = if args.zero_quadratic {
        QuadraticBlocks::NONE
    } else {
        QuadraticBlocks {
            modal: true,
            interface: !args.zero_quadratic_chi,
            cross: !args.zero_quadratic_cross,
        }
    };
    let options = RunOptions {
        variants: (!args.variants.is_empty()).then(|| args.variants.iter().map(|&v| v.into()).collect()),
        keep,
        extra_probes: args
            .probes
            .iter()
            .map(|p| ProbeSpec::parse(p))
            .collect::<nlcb_cli::Result<_>>()?,
        seed: args.seed,
        threads: args.threads,
    };
    let summary = run(&scenario, &options, &args.out)?;
    for row in &summary.modal {
        println!(
            "mode {}: full {:.2} Hz, rom {:.2} Hz, error {:.3} %",
            row.mode, row.full_hz, row.rom_hz, row.error_pct
        );
    }
    for m in &summary.metrics {
        if m.variant != Variant::Full.label() {
            println!(
                "{} at {}: rms error {:.3} %, peak error {:.3} %, {:.2} s",
                m.variant,
                m.probe,
                100.0 * m.rms_rel_err,
                100.0 * m.peak_rel_err,
                m.wall_clock_s
            );
        }
    }
    println!("wrote {} files to {}", summary.files.len(), args.out.display());
    Ok(())
}
