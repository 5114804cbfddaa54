use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use selforg::analytics::{effective_lattice_constant, weak_lattice};
use selforg::continuation::{sweep_with, SeedConfig, SweepRecord};
use selforg::dynamics::relax_to_steady_state;
use selforg::io::{self, Provenance};
use selforg::optics::{band_gap_edges, chain_spectrum_spinmodel, chain_spectrum_transfer, reflectance_map, BandGap};
use selforg::phonons::{analyze, asymmetry};
use selforg::SystemParams;

use crate::config::{LoadedConfig, ProbeMethod, SweepConfig};

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input file (exit 1).
    Config(String),
    /// Failure during the computation.
    Run(selforg::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(e) if e.is_convergence() => 2,
            CliError::Run(e) if e.is_numerical() => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<selforg::Error> for CliError {
    fn from(e: selforg::Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Output files kept in memory until the command has succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> selforg::Result<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_owned(), buf));
        Ok(())
    }

    fn add_json(&mut self, name: &str, value: &Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(selforg::Error::from)?;
        text.push('\n');
        self.files.push((name.to_owned(), text.into_bytes()));
        Ok(())
    }

    pub fn write_to(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes).map_err(selforg::Error::from)?;
        }
        Ok(())
    }
}

pub struct Context {
    pub loaded: LoadedConfig,
    pub seed: u64,
}

impl Context {
    fn provenance(&self) -> Provenance {
        Provenance::new(Some(self.loaded.sha256.clone()))
    }

    fn params(&self) -> SystemParams {
        self.loaded.config.params
    }

    fn header(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.loaded.sha256,
            "seed": self.seed,
        })
    }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

/// Runs `body`; on a convergence failure the log alone is still written.
fn with_failure_log(
    ctx: &Context,
    out: &Path,
    log_name: &str,
    body: impl FnOnce(&mut Outputs) -> CliResult<()>,
) -> CliResult<()> {
    let mut outputs = Outputs::default();
    match body(&mut outputs) {
        Ok(()) => outputs.write_to(out),
        Err(CliError::Run(e)) if e.is_convergence() => {
            let mut log = Outputs::default();
            log.add_json(log_name, &merge(ctx.header(), json!({ "converged": false, "error": e.to_string() })))?;
            log.write_to(out)?;
            Err(CliError::Run(e))
        }
        Err(e) => Err(e),
    }
}

pub fn relax(ctx: &Context, out: &Path) -> CliResult<()> {
    let params = ctx.params();
    let state = ctx.loaded.initial_state(ctx.seed).map_err(CliError::Config)?;
    let options = ctx.loaded.config.relax.options();
    with_failure_log(ctx, out, "relax_log.json", |outputs| {
        let report = relax_to_steady_state(&params, &state, &options)?;
        let prov = ctx.provenance();
        outputs.add("state.csv", |buf| io::write_state(buf, &prov, &report.state))?;
        let log = json!({
            "converged": true,
            "no_op": report.no_op,
            "time": report.time,
            "steps": report.steps,
            "dt": report.dt,
            "max_momentum": report.max_momentum,
            "max_force": report.max_force,
            "total_force": report.total_force,
            "ext_damping": params.ext_damping,
        });
        outputs.add_json("relax_log.json", &merge(ctx.header(), log))
    })
}

fn run_sweep(params: &SystemParams, cfg: &SweepConfig, seed: SeedConfig, ctx: &Context) -> CliResult<Vec<SweepRecord>> {
    let options = cfg.options(ctx.loaded.config.relax.options());
    let result = sweep_with(params, &cfg.grid(), seed, &options, |r| {
        log::info!(
            "δ = {:+.3}: d_mean = {:.5}, {} segment(s), relaxed in {} steps",
            r.detuning,
            r.d_mean,
            r.phase_slip.n_segments(),
            r.relax_steps
        );
    })?;
    Ok(result.records)
}

fn sweep_log(records: &[SweepRecord]) -> Value {
    json!({
        "converged": true,
        "records": records.len(),
        "steps": records.iter().map(|r| r.relax_steps).collect::<Vec<_>>(),
        "ext_damping": records.iter().map(|r| r.ext_damping).collect::<Vec<_>>(),
    })
}

pub fn sweep(ctx: &Context, out: &Path) -> CliResult<()> {
    let cfg = ctx
        .loaded
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("the sweep command needs a `sweep` block".into()))?;
    let seed = ctx.loaded.sweep_seed(ctx.seed).map_err(CliError::Config)?;
    let params = ctx.params();
    with_failure_log(ctx, out, "sweep_log.json", |outputs| {
        let records = run_sweep(&params, &cfg, seed, ctx)?;
        let prov = ctx.provenance();
        outputs.add("sweep_positions.csv", |buf| io::write_sweep_positions(buf, &prov, &records))?;
        outputs.add("sweep_summary.csv", |buf| io::write_sweep_summary(buf, &prov, &records))?;
        outputs.add_json("sweep_log.json", &merge(ctx.header(), sweep_log(&records)))
    })
}

pub fn phonons(ctx: &Context, out: &Path) -> CliResult<()> {
    let params = ctx.params();
    let state = ctx.loaded.initial_state(ctx.seed).map_err(CliError::Config)?;
    let analysis = analyze(&params, &state.z)?;
    let prov = ctx.provenance();
    let mut outputs = Outputs::default();
    outputs.add("modes.csv", |buf| io::write_modes(buf, &prov, &analysis.modes))?;
    let log = json!({
        "residual_force": analysis.residual_force,
        "stiffness_asymmetry": asymmetry(&analysis.stiffness),
        "max_growth": analysis.modes.max_growth(),
        "zero_modes": analysis.modes.zero_modes(),
        "scale": analysis.modes.scale,
    });
    outputs.add_json("phonons_log.json", &merge(ctx.header(), log))?;
    outputs.write_to(out)
}

pub fn spectrum(ctx: &Context, out: &Path) -> CliResult<()> {
    let params = ctx.params();
    let state = ctx.loaded.initial_state(ctx.seed).map_err(CliError::Config)?;
    let probe = &ctx.loaded.config.probe;
    let grid = probe.grid();
    let spectrum = match probe.method {
        ProbeMethod::Transfer => chain_spectrum_transfer(&params, &state.z, &grid)?,
        ProbeMethod::SpinModel => chain_spectrum_spinmodel(&params, &state.z, &grid)?,
    };
    let prov = ctx.provenance();
    let mut outputs = Outputs::default();
    outputs.add("spectrum.csv", |buf| io::write_spectrum(buf, &prov, &spectrum))?;
    let log = json!({
        "points": spectrum.len(),
        "flagged": spectrum.flagged,
        "peak": spectrum.peak().map(|(d, r)| json!({ "delta_p": d, "R": r })),
        "fwhm": spectrum.fwhm(),
    });
    outputs.add_json("spectrum_log.json", &merge(ctx.header(), log))?;
    outputs.write_to(out)
}

/// Names of the files written by [`figdata`].
pub const FIGDATA_FILES: [&str; 7] = [
    "fig1c_weak_lattice.csv",
    "sweep_positions.csv",
    "sweep_summary.csv",
    "effective_index.csv",
    "phonons_vs_detuning.csv",
    "reflectance_map.csv",
    "band_edges_peak.csv",
];

pub fn figdata(ctx: &Context, out: &Path) -> CliResult<()> {
    let params = ctx.params();
    let fig = &ctx.loaded.config.figdata;
    let prov = ctx.provenance();
    let mut outputs = Outputs::default();

    let ws = weak_lattice(fig.weak_atoms)?;
    outputs.add(FIGDATA_FILES[0], |buf| {
        let rows = ws.fractions.0.iter().enumerate().map(|(j, f)| [(j + 1) as f64, *f]);
        io::write_table(buf, &prov, &["j", "f_j"], rows)
    })?;

    let negative = run_sweep(&params, &fig.negative, SeedConfig::WeakLattice, ctx)?;
    let positive = run_sweep(&params, &fig.positive, SeedConfig::WeakLattice, ctx)?;
    let mut records: Vec<&SweepRecord> = negative.iter().chain(&positive).collect();
    records.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
    let sorted: Vec<SweepRecord> = records.into_iter().cloned().collect();

    outputs.add(FIGDATA_FILES[1], |buf| io::write_sweep_positions(buf, &prov, &sorted))?;
    outputs.add(FIGDATA_FILES[2], |buf| io::write_sweep_summary(buf, &prov, &sorted))?;

    outputs.add(FIGDATA_FILES[3], |buf| {
        let rows = sorted.iter().filter(|r| r.detuning < 0.0).map(|r| {
            [
                r.detuning,
                r.d_central,
                r.d_mean,
                effective_lattice_constant(&params, r.detuning).d_eff,
            ]
        });
        io::write_table(buf, &prov, &["delta", "d_central", "d_mean", "d_eff"], rows)
    })?;

    let analysed: Vec<&SweepRecord> = sorted.iter().step_by(fig.phonon_stride).collect();
    let modes = analysed
        .par_iter()
        .map(|r| analyze(&r.params(&params), &r.state.z).map(|a| (r.detuning, a.modes)))
        .collect::<selforg::Result<Vec<_>>>()?;
    outputs.add(FIGDATA_FILES[4], |buf| {
        let rows = modes.iter().flat_map(|(delta, m)| {
            m.frequencies.iter().enumerate().map(move |(j, w)| {
                [*delta, j as f64, w.re, w.im, w.re / m.scale, w.im / m.scale]
            })
        });
        io::write_table(
            buf,
            &prov,
            &["delta", "j", "re_omega", "im_omega", "re_omega_norm", "im_omega_norm"],
            rows,
        )
    })?;

    let grid = ctx.loaded.config.probe.grid();
    let configurations: Vec<(f64, Vec<f64>)> = sorted.iter().map(|r| (r.detuning, r.state.z.clone())).collect();
    let map = reflectance_map(&params, &configurations, &grid)?;
    outputs.add(FIGDATA_FILES[5], |buf| io::write_map(buf, &prov, &map))?;

    let edges = sorted
        .iter()
        .map(|r| {
            let spectrum = chain_spectrum_transfer(&params, &r.state.z, &grid)?;
            let (peak_delta_p, peak_r) = spectrum.peak().unwrap_or((f64::NAN, f64::NAN));
            let (lo, hi) = match band_gap_edges(&params, r.d_mean) {
                BandGap::Gap { lo, hi, .. } if r.phase_slip.n_segments() == 1 => (lo, hi),
                _ => (f64::NAN, f64::NAN),
            };
            Ok([
                r.detuning,
                r.d_mean,
                r.phase_slip.n_segments() as f64,
                lo,
                hi,
                peak_delta_p,
                peak_r,
            ])
        })
        .collect::<selforg::Result<Vec<_>>>()?;
    outputs.add(FIGDATA_FILES[6], |buf| {
        io::write_table(
            buf,
            &prov,
            &["delta", "d_mean", "n_segments", "delta_lo", "delta_hi", "peak_delta_p", "peak_R"],
            edges,
        )
    })?;

    let log = json!({
        "files": FIGDATA_FILES,
        "negative_records": negative.len(),
        "positive_records": positive.len(),
    });
    outputs.add_json("figdata_log.json", &merge(ctx.header(), log))?;
    outputs.write_to(out)
}
