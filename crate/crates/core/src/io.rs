//! CSV output and input.
//!
//! Every file starts with one `#` line identifying the tool version and the
//! configuration hash, followed by a header row. Numbers use the shortest
//! representation that round-trips.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::continuation::SweepRecord;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{fractional_positions, ChainState};
use crate::optics::{MapPoint, OpticalSpectrum};
use crate::phonons::PhononModes;

/// First line of every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the run configuration, hex encoded.
    pub config_sha256: Option<String>,
}

impl Provenance {
    pub fn new(config_sha256: Option<String>) -> Self {
        Provenance {
            tool: "selforg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256,
        }
    }

    pub fn line(&self) -> String {
        match &self.config_sha256 {
            Some(hash) => format!("# {} {} config_sha256={}", self.tool, self.version, hash),
            None => format!("# {} {}", self.tool, self.version),
        }
    }
}

/// Writes the provenance line, a header and one row per item.
pub fn write_table<W, I, R>(mut out: W, provenance: &Provenance, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    writeln!(out, "{}", provenance.line())?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer
            .write_record(row.into_iter().map(format_number))
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    } else {
        Error::Parse(e.to_string())
    }
}

/// Header and numeric rows of a table written by [`write_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub provenance: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_table<R: Read>(mut input: R) -> Result<Table> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let provenance = text.lines().next().filter(|l| l.starts_with('#')).map(str::to_owned);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table {
        provenance,
        header,
        rows,
    })
}

pub const STATE_HEADER: [&str; 6] = ["j", "z", "p", "re_sigma", "im_sigma", "f"];

/// One row per atom, `j` counted from one.
pub fn write_state<W: Write>(out: W, provenance: &Provenance, state: &ChainState) -> Result<()> {
    let f = fractional_positions(&state.z)?;
    let rows = (0..state.len()).map(|j| {
        [
            (j + 1) as f64,
            state.z[j],
            state.p[j],
            state.sigma[j].re,
            state.sigma[j].im,
            f.0[j],
        ]
    });
    write_table(out, provenance, &STATE_HEADER, rows)
}

/// Reads a file written by [`write_state`]. Only the `z` column is required;
/// missing `p` and coherence columns default to zero.
pub fn read_state<R: Read>(input: R) -> Result<ChainState> {
    let table = read_table(input)?;
    let z = table
        .column("z")
        .ok_or_else(|| Error::Parse("state file has no `z` column".into()))?;
    let n = z.len();
    let p = table.column("p").unwrap_or_else(|| vec![0.0; n]);
    let re = table.column("re_sigma").unwrap_or_else(|| vec![0.0; n]);
    let im = table.column("im_sigma").unwrap_or_else(|| vec![0.0; n]);
    let sigma = re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect();
    ChainState::new(z, p, sigma)
}

pub fn write_trajectory<W: Write>(out: W, provenance: &Provenance, trajectory: &Trajectory) -> Result<()> {
    let n = trajectory.states.first().map_or(0, ChainState::len);
    let mut header = vec!["t".to_string()];
    for prefix in ["z", "p", "re_sigma", "im_sigma"] {
        header.extend((1..=n).map(|j| format!("{prefix}_{j}")));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = trajectory.times.iter().zip(&trajectory.states).map(|(t, s)| {
        std::iter::once(*t)
            .chain(s.z.iter().copied())
            .chain(s.p.iter().copied())
            .chain(s.sigma.iter().map(|x| x.re))
            .chain(s.sigma.iter().map(|x| x.im))
            .collect::<Vec<f64>>()
    });
    write_table(out, provenance, &header_refs, rows)
}

/// `delta, j, f_j` for every record and atom.
pub fn write_sweep_positions<W: Write>(out: W, provenance: &Provenance, records: &[SweepRecord]) -> Result<()> {
    let rows = records.iter().flat_map(|r| {
        r.fractions
            .0
            .iter()
            .enumerate()
            .map(move |(j, f)| [r.detuning, (j + 1) as f64, *f])
    });
    write_table(out, provenance, &["delta", "j", "f_j"], rows)
}

pub const SUMMARY_HEADER: [&str; 6] = ["delta", "d_central", "d_mean", "pop_norm", "n_segments", "delta_f"];

/// One row per detuning; `delta_f` is the first phase slip, or `0` for a single segment.
pub fn write_sweep_summary<W: Write>(out: W, provenance: &Provenance, records: &[SweepRecord]) -> Result<()> {
    let rows = records.iter().map(|r| {
        [
            r.detuning,
            r.d_central,
            r.d_mean,
            r.population,
            r.phase_slip.n_segments() as f64,
            r.phase_slip.delta_f.first().copied().unwrap_or(0.0),
        ]
    });
    write_table(out, provenance, &SUMMARY_HEADER, rows)
}

pub fn write_modes<W: Write>(out: W, provenance: &Provenance, modes: &PhononModes) -> Result<()> {
    let rows = modes.frequencies.iter().enumerate().map(|(j, w)| {
        [
            j as f64,
            w.re,
            w.im,
            w.re / modes.scale,
            w.im / modes.scale,
        ]
    });
    write_table(
        out,
        provenance,
        &["j", "re_omega", "im_omega", "re_omega_norm", "im_omega_norm"],
        rows,
    )
}

pub fn write_spectrum<W: Write>(out: W, provenance: &Provenance, spectrum: &OpticalSpectrum) -> Result<()> {
    let rows = (0..spectrum.len()).map(|j| {
        let (r, t) = (spectrum.r[j], spectrum.t[j]);
        [
            spectrum.probe_detuning[j],
            r.re,
            r.im,
            t.re,
            t.im,
            r.norm_sqr(),
            t.norm_sqr(),
        ]
    });
    write_table(out, provenance, &["delta_p", "re_r", "im_r", "re_t", "im_t", "R", "T"], rows)
}

pub fn write_map<W: Write>(out: W, provenance: &Provenance, points: &[MapPoint]) -> Result<()> {
    let rows = points.iter().map(|p| [p.detuning, p.probe_detuning, p.reflectance]);
    write_table(out, provenance, &["delta", "delta_p", "R"], rows)
}
