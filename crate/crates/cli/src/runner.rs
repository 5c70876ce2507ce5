//! End-to-end scenario runs: model, reduction, time integration of every
//! requested variant and the written artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use nalgebra::{DMatrix, DVector};
use nlcb_core::basis::{modes, EigenOptions};
use nlcb_core::fe::{BeamGeometry, Material, Model, Rayleigh};
use nlcb_core::linalg::spmm;
use nlcb_core::manifold::{ManifoldOptions, QuadraticBlocks, RhsMethod};
use nlcb_core::rom::{assemble_rom, project_substructure_galerkin, reduce, BuildOptions, ReducedModel, Reduction};
use nlcb_core::tint::{integrate, FullSystem, InitialState, IntegratorConfig, RomSystem, TimeHistory};
use serde::Serialize;

use crate::report::{modal_report, peak_relative_error, rms_relative_error, write_modal_csv, Metric, ModalRow};
use crate::scenario::{DofName, LoadKind, ProbeSpec, RhsKind, Scenario, TimeFunction, Variant};
use crate::spectrum::spectrum;
use crate::{CliError, Result};

/// Command-line adjustments applied on top of a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct RunOptions {
    /// Overrides the scenario's variant list when set.
    pub variants: Option<Vec<Variant>>,
    /// Quadratic manifold blocks kept in the nonlinear ROM.
    pub keep: QuadraticBlocks,
    pub extra_probes: Vec<ProbeSpec>,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            variants: None,
            keep: QuadraticBlocks::ALL,
            extra_probes: Vec::new(),
            seed: 0,
            threads: 1,
        }
    }
}

/// Name of the nonlinear ROM variant for a set of kept blocks.
pub fn nlcb_label(keep: QuadraticBlocks) -> String {
    if keep == QuadraticBlocks::ALL {
        return "nlcb".into();
    }
    if !keep.modal && !keep.cross && !keep.interface {
        return "nlcb-zero-quadratic".into();
    }
    let mut label = String::from("nlcb");
    if !keep.modal {
        label.push_str("-zero-quadratic-eta");
    }
    if !keep.interface {
        label.push_str("-zero-quadratic-chi");
    }
    if !keep.cross {
        label.push_str("-zero-quadratic-cross");
    }
    label
}

#[derive(Debug, Clone, Serialize)]
pub struct Probe {
    pub label: String,
    pub node: usize,
    pub x: f64,
    pub dof: DofName,
    /// Index among the free DoFs.
    #[serde(skip)]
    pub index: usize,
}

/// Everything shared by the variants of one scenario.
pub struct Prepared {
    pub scenario: Scenario,
    pub options: RunOptions,
    pub model: Model,
    pub full_hz: Vec<f64>,
    /// Mass-normalized vibration modes of the full model.
    pub full_modes: DMatrix<f64>,
    pub reduction: Reduction,
    /// Nonlinear ROM with the requested blocks kept.
    pub nlcb: ReducedModel,
    pub forcing_hz: Option<f64>,
    pub load: DVector<f64>,
    pub config: IntegratorConfig,
    pub probes: Vec<Probe>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub model_s: f64,
    pub full_modes_s: f64,
    pub rom_construction_s: f64,
    pub integration_s: Vec<(String, f64)>,
}

pub fn build_model(s: &Scenario) -> Result<Model> {
    let g = &s.geometry;
    let m = &s.material;
    Ok(Model::clamped_beam(
        &BeamGeometry {
            length: g.length,
            width: g.width,
            thickness: g.thickness,
            elements: g.elements,
            rise: g.rise,
        },
        Material::new(m.youngs_modulus, m.density, m.poisson)?,
        Rayleigh {
            alpha: m.rayleigh_alpha,
            beta: m.rayleigh_beta,
        },
    )?)
}

fn resolve_probes(model: &Model, length: f64, specs: &[ProbeSpec]) -> Result<Vec<Probe>> {
    specs
        .iter()
        .map(|p| {
            let node = match (p.position, p.node) {
                (Some(x), _) => model.node_near(x * length),
                (None, Some(n)) if n < model.n_nodes() => n,
                (None, Some(n)) => return Err(CliError::Config(format!("probe node {n} does not exist"))),
                (None, None) => return Err(CliError::Config("probe needs a position or a node".into())),
            };
            let index = model
                .dof(node, p.dof.nodal())
                .ok_or_else(|| CliError::Config(format!("probe {}:{} is a fixed DoF", node, p.dof.label())))?;
            Ok(Probe {
                label: format!("{}_n{}", p.dof.label(), node),
                node,
                x: model.nodes()[node].0,
                dof: p.dof,
                index,
            })
        })
        .collect()
}

/// Builds the model, the full-model modes and the reduced models.
pub fn prepare(scenario: &Scenario, options: &RunOptions) -> Result<Prepared> {
    scenario.validate()?;
    if options.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let mut timings = Timings::default();
    let t0 = Instant::now();
    let model = build_model(scenario)?;
    timings.model_s = t0.elapsed().as_secs_f64();

    let out = &scenario.outputs;
    let needed = [
        out.modal_rows,
        out.spectrum_modes.iter().copied().max().unwrap_or(0),
        scenario.load.frequency_mode.unwrap_or(0),
    ]
    .into_iter()
    .max()
    .unwrap_or(1)
    .max(1);
    let t0 = Instant::now();
    let domain = model.full_domain();
    let (full_modes, omega) = modes(&domain.stiffness(&model), &domain.mass(&model), needed, &EigenOptions::default())?;
    let full_hz: Vec<f64> = omega.iter().map(|w| w / (2.0 * std::f64::consts::PI)).collect();
    timings.full_modes_s = t0.elapsed().as_secs_f64();
    info!("full model: {} DoFs, f = {:?} Hz", model.n_free(), full_hz);

    let t0 = Instant::now();
    let length = scenario.geometry.length;
    let cuts: Vec<Vec<usize>> = scenario
        .partition
        .cuts
        .iter()
        .map(|c| vec![model.node_near(c * length)])
        .collect();
    let rhs = match scenario.reduction.rhs {
        RhsKind::Exact => RhsMethod::Exact,
        RhsKind::FiniteDifference => RhsMethod::finite_difference(scenario.geometry.thickness),
    };
    let build = BuildOptions {
        modes_per_substructure: scenario.reduction.modes_per_substructure,
        interface: scenario.reduction.interface,
        eigen: EigenOptions::default(),
        manifold: ManifoldOptions {
            rhs,
            ..Default::default()
        },
        keep: QuadraticBlocks::ALL,
    };
    let reduction = reduce(&model, &cuts, &build)?;
    let nlcb = if options.keep == QuadraticBlocks::ALL {
        reduction.nlcb.clone()
    } else {
        rom_with_blocks(&model, &reduction, options.keep)?
    };
    timings.rom_construction_s = t0.elapsed().as_secs_f64();
    info!(
        "reduced model: {} DoFs in {:.3} s",
        reduction.nlcb.m(),
        timings.rom_construction_s
    );

    let forcing_hz = match (scenario.load.frequency_hz, scenario.load.frequency_mode) {
        (Some(f), _) => Some(f),
        (None, Some(k)) => Some(full_hz[k - 1]),
        (None, None) => None,
    };
    let load = match scenario.load.kind {
        LoadKind::Pressure => model.pressure_load(scenario.load.amplitude),
        LoadKind::Nodal => {
            let x = scenario.load.position.expect("validated") * length;
            model.nodal_load(model.node_near(x), scenario.load.dof.nodal(), scenario.load.amplitude)?
        }
    };
    let int = &scenario.integration;
    let t_end = match (int.cycles, int.t_end) {
        (Some(c), _) => c / forcing_hz.expect("validated"),
        (None, Some(t)) => t,
        (None, None) => unreachable!("validated"),
    };
    let config = IntegratorConfig {
        dt: int.dt,
        gamma: int.gamma,
        beta: int.beta,
        newton_tol: int.newton_tol,
        max_iter: int.max_iter,
        t_end,
    };
    config.validate()?;

    let mut specs = scenario.outputs.probes.clone();
    specs.extend(options.extra_probes.iter().cloned());
    let probes = resolve_probes(&model, length, &specs)?;

    Ok(Prepared {
        scenario: scenario.clone(),
        options: options.clone(),
        model,
        full_hz,
        full_modes,
        reduction,
        nlcb,
        forcing_hz,
        load,
        config,
        probes,
        timings,
    })
}

/// Nonlinear ROM re-projected with only some quadratic blocks kept.
pub fn rom_with_blocks(model: &Model, reduction: &Reduction, keep: QuadraticBlocks) -> Result<ReducedModel> {
    let subs = reduction
        .partition
        .substructures
        .iter()
        .zip(&reduction.manifolds)
        .map(|(sub, manifold)| project_substructure_galerkin(model, sub, &manifold.with_blocks(keep)))
        .collect::<nlcb_core::Result<Vec<_>>>()?;
    let dims: Vec<usize> = reduction.interface_bases.iter().map(|b| b.ncols()).collect();
    Ok(assemble_rom(&reduction.partition, &subs, &dims)?)
}

/// Time history of one variant expressed in full-model quantities.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub label: String,
    pub history: TimeHistory,
    /// One series per probe.
    pub probes: Vec<Vec<f64>>,
    /// Mass-weighted projections on the full-model modes, one series per mode.
    pub modal: Vec<Vec<f64>>,
    pub wall_clock_s: f64,
}

impl Prepared {
    pub fn time_function(&self) -> impl Fn(f64) -> f64 + '_ {
        let load = &self.scenario.load;
        let w = 2.0 * std::f64::consts::PI * self.forcing_hz.unwrap_or(0.0);
        move |t: f64| match load.time_function {
            TimeFunction::Sine => (w * t).sin(),
            TimeFunction::Cosine => (w * t).cos(),
            TimeFunction::Constant => 1.0,
            TimeFunction::Tabulated => interpolate(&load.table, t),
        }
    }

    /// Integrates one variant from rest. `rom` overrides the reduced model
    /// used for reduced variants.
    pub fn simulate(&self, variant: Variant, rom: Option<(&str, &ReducedModel)>) -> Result<VariantRun> {
        let g = self.time_function();
        let init = |n| InitialState::rest(n);
        let t0 = Instant::now();
        let mass = self.model.full_domain().mass(&self.model);
        // rows are Φᵀ M, so modal amplitudes are q = Φᵀ M d
        let projector = spmm(&mass, &self.full_modes).transpose();
        let (label, history, displacements): (String, TimeHistory, Vec<DVector<f64>>) = match variant {
            Variant::Full | Variant::Linear => {
                let linear = self.model.linearized();
                let model = if variant == Variant::Full { &self.model } else { &linear };
                let mut system = FullSystem::new(model);
                let f = &self.load;
                let h = integrate(&mut system, &self.config, &init(f.len()), &|t| f * g(t))
                    .map_err(|e| CliError::solver(variant.label(), e))?;
                let d = h.x.clone();
                (variant.label().to_string(), h, d)
            }
            Variant::Nlcb | Variant::Cb => {
                let (label, rom) = match (variant, rom) {
                    (_, Some((label, rom))) => (label.to_string(), rom),
                    (Variant::Nlcb, None) => (nlcb_label(self.options.keep), &self.nlcb),
                    _ => ("cb".to_string(), &self.reduction.cb),
                };
                let fr = rom.reduce_load(&self.load);
                let mut system = RomSystem { rom };
                let h = integrate(&mut system, &self.config, &init(rom.m()), &|t| &fr * g(t))
                    .map_err(|e| CliError::solver(variant.label(), e))?;
                let d = h.x.iter().map(|xi| rom.reconstruct(xi)).collect();
                (label, h, d)
            }
        };
        let wall_clock_s = t0.elapsed().as_secs_f64();
        let probes = self
            .probes
            .iter()
            .map(|p| displacements.iter().map(|d| d[p.index]).collect())
            .collect();
        let modal = self
            .scenario
            .outputs
            .spectrum_modes
            .iter()
            .map(|&k| {
                let row = projector.row(k - 1);
                displacements.iter().map(|d| (row * d)[0]).collect()
            })
            .collect();
        Ok(VariantRun {
            variant,
            label,
            history,
            probes,
            modal,
            wall_clock_s,
        })
    }

    pub fn variants(&self) -> Vec<Variant> {
        self.options
            .variants
            .clone()
            .unwrap_or_else(|| self.scenario.outputs.variants.clone())
    }

    pub fn modal_table(&self) -> Result<Vec<ModalRow>> {
        let rom_hz = self.nlcb.frequencies_hz()?;
        Ok(modal_report(&self.full_hz, &rom_hz, self.scenario.outputs.modal_rows))
    }
}

fn interpolate(table: &[[f64; 2]], t: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if t <= first[0] {
        return first[1];
    }
    if t >= last[0] {
        return last[1];
    }
    let k = table.partition_point(|p| p[0] <= t);
    let (a, b) = (table[k - 1], table[k]);
    a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
}

/// Errors of every variant at every probe against the full model.
pub fn metrics(prepared: &Prepared, runs: &[VariantRun]) -> Vec<Metric> {
    let Some(full) = runs.iter().find(|r| r.variant == Variant::Full) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for run in runs {
        for (k, probe) in prepared.probes.iter().enumerate() {
            out.push(Metric {
                variant: run.label.clone(),
                probe: probe.label.clone(),
                rms_rel_err: rms_relative_error(&run.probes[k], &full.probes[k]),
                peak_rel_err: peak_relative_error(&run.probes[k], &full.probes[k]),
                wall_clock_s: run.wall_clock_s,
            });
        }
    }
    out
}

/// Integrates every requested variant, spreading them over `threads`
/// workers. Each variant is computed independently, so results do not
/// depend on the thread count.
pub fn simulate_all(prepared: &Prepared) -> Result<Vec<VariantRun>> {
    let variants = prepared.variants();
    let threads = prepared.options.threads.max(1);
    let mut results: Vec<Option<Result<VariantRun>>> = (0..variants.len()).map(|_| None).collect();
    for (chunk_idx, chunk) in variants.chunks(threads).enumerate() {
        let outs: Vec<Result<VariantRun>> = if threads == 1 {
            chunk.iter().map(|&v| prepared.simulate(v, None)).collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&v| s.spawn(move || prepared.simulate(v, None)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("variant worker panicked"))
                    .collect()
            })
        };
        for (k, r) in outs.into_iter().enumerate() {
            results[chunk_idx * threads + k] = Some(r);
        }
    }
    results.into_iter().map(|r| r.expect("every variant ran")).collect()
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    scenario: &'a Scenario,
    options: &'a RunOptions,
    full_dofs: usize,
    rom_dofs: usize,
    forcing_hz: Option<f64>,
    t_end: f64,
    steps: usize,
    full_hz: &'a [f64],
    rom_hz: Vec<f64>,
    probes: &'a [Probe],
    timings: Timings,
    files: Vec<String>,
}

/// Runs a scenario end to end and writes all artifacts to `out`.
pub fn run(scenario: &Scenario, options: &RunOptions, out: &Path) -> Result<RunSummary> {
    let prepared = prepare(scenario, options)?;
    let runs = simulate_all(&prepared)?;
    let summary = write_outputs(&prepared, &runs, out)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub modal: Vec<ModalRow>,
    pub metrics: Vec<Metric>,
    pub files: Vec<PathBuf>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(BufWriter::new(f))
}

pub fn write_outputs(prepared: &Prepared, runs: &[VariantRun], out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    let mut files = Vec::new();

    let modal = prepared.modal_table()?;
    write_modal_csv(&modal, create(out, "modal.csv", &mut files)?)?;

    for run in runs {
        let named: Vec<(String, Vec<f64>)> = prepared
            .probes
            .iter()
            .zip(&run.probes)
            .map(|(p, s)| (p.label.clone(), s.clone()))
            .collect();
        let w = create(out, &format!("history_{}.csv", run.label), &mut files)?;
        run.history.write_csv(w, &named)?;
        write_energy_csv(&run.history, create(out, &format!("energy_{}.csv", run.label), &mut files)?)?;
        if !run.modal.is_empty() {
            write_modal_series(prepared, run, create(out, &format!("modal_amplitudes_{}.csv", run.label), &mut files)?)?;
            write_spectra(prepared, run, create(out, &format!("spectrum_{}.csv", run.label), &mut files)?)?;
        }
    }

    let metrics = metrics(prepared, runs);
    let mut w = create(out, "metrics.json", &mut files)?;
    serde_json::to_writer_pretty(&mut w, &metrics)?;

    let mut timings = prepared.timings.clone();
    timings.integration_s = runs.iter().map(|r| (r.label.clone(), r.wall_clock_s)).collect();
    let mut names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    names.push("manifest.json".into());
    let manifest = Manifest {
        name: &prepared.scenario.name,
        version: env!("CARGO_PKG_VERSION"),
        scenario: &prepared.scenario,
        options: &prepared.options,
        full_dofs: prepared.model.n_free(),
        rom_dofs: prepared.nlcb.m(),
        forcing_hz: prepared.forcing_hz,
        t_end: prepared.config.t_end,
        steps: prepared.config.steps(),
        full_hz: &prepared.full_hz,
        rom_hz: prepared.nlcb.frequencies_hz()?,
        probes: &prepared.probes,
        timings,
        files: names,
    };
    let mut w = create(out, "manifest.json", &mut files)?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    Ok(RunSummary { modal, metrics, files })
}

fn write_energy_csv(h: &TimeHistory, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "t,kinetic,potential,external_work,dissipated,elastic_work,balance_residual")?;
    for (t, e) in h.times.iter().zip(&h.audit) {
        writeln!(
            w,
            "{t:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            e.kinetic, e.potential, e.external_work, e.dissipated, e.elastic_work, e.balance_residual
        )?;
    }
    Ok(())
}

fn write_modal_series(prepared: &Prepared, run: &VariantRun, mut w: impl std::io::Write) -> Result<()> {
    write!(w, "t")?;
    for k in &prepared.scenario.outputs.spectrum_modes {
        write!(w, ",q{k}")?;
    }
    writeln!(w)?;
    for (i, t) in run.history.times.iter().enumerate() {
        write!(w, "{t:.9e}")?;
        for s in &run.modal {
            write!(w, ",{:.9e}", s[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Amplitude spectra of the modal amplitudes over the configured window.
pub fn modal_spectra(prepared: &Prepared, run: &VariantRun) -> Vec<Vec<(f64, f64)>> {
    let start = run
        .history
        .times
        .partition_point(|&t| t < prepared.scenario.outputs.spectrum_start);
    run.modal
        .iter()
        .map(|s| spectrum(&s[start..], prepared.config.dt))
        .collect()
}

fn write_spectra(prepared: &Prepared, run: &VariantRun, mut w: impl std::io::Write) -> Result<()> {
    let spectra = modal_spectra(prepared, run);
    write!(w, "frequency_hz")?;
    for k in &prepared.scenario.outputs.spectrum_modes {
        write!(w, ",q{k}")?;
    }
    writeln!(w)?;
    for i in 0..spectra[0].len() {
        write!(w, "{:.6e}", spectra[0][i].0)?;
        for s in &spectra {
            write!(w, ",{:.9e}", s[i].1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
