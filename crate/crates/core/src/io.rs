//! CSV schemas shared by the command-line tools.
//!
//! * spectra: `freq_mhz,intensity`
//! * polarization data for the k-ratio fit: `b_gauss,p,sigma`
//!
//! Numbers are written in shortest round-trip form with a decimal point,
//! independent of locale.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::kratio::PolarizationPoint;
use crate::spectra::{SpectraError, Spectrum};

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumRow {
    freq_mhz: f64,
    intensity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    b_gauss: f64,
    p: f64,
    sigma: f64,
}

pub fn write_spectrum_csv<W: Write>(spectrum: &Spectrum, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (&freq_mhz, &intensity) in spectrum.frequencies.iter().zip(&spectrum.intensities) {
        w.serialize(SpectrumRow { freq_mhz, intensity })?;
    }
    if spectrum.is_empty() {
        w.write_record(["freq_mhz", "intensity"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Spectrum(#[from] SpectraError),
}

pub fn read_spectrum_csv<R: Read>(input: R) -> Result<Spectrum, ReadError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let (mut f, mut i) = (Vec::new(), Vec::new());
    for row in r.deserialize() {
        let row: SpectrumRow = row?;
        f.push(row.freq_mhz);
        i.push(row.intensity);
    }
    Ok(Spectrum::from_data(f, i)?)
}

pub fn write_points_csv<W: Write>(points: &[PolarizationPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(PointRow { b_gauss: p.b_gauss, p: p.p, sigma: p.sigma })?;
    }
    if points.is_empty() {
        w.write_record(["b_gauss", "p", "sigma"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R) -> csv::Result<Vec<PolarizationPoint>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    r.deserialize::<PointRow>()
        .map(|row| row.map(|row| PolarizationPoint { b_gauss: row.b_gauss, p: row.p, sigma: row.sigma }))
        .collect()
}
