//! Delimited result tables.
//!
//! Two fixed layouts, comma separated with a mandatory header:
//!
//! * tradeoff: `snr,rho,J,avg_rate,avg_mse`
//! * beampattern: `theta,gain,rho,J`
//!
//! Real values are printed in plain decimal with 6 significant digits; an
//! absent metric is written as `NA`. Table values are quantized to what the
//! text can represent, so parsing an emitted table gives back the same table.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{JcasError, Result};
use crate::evaluation::SweepOutput;

pub const TRADEOFF_HEADER: [&str; 5] = ["snr", "rho", "J", "avg_rate", "avg_mse"];
pub const BEAMPATTERN_HEADER: [&str; 4] = ["theta", "gain", "rho", "J"];
const SIGNIFICANT: i32 = 6;
const MISSING: &str = "NA";

/// Plain decimal with 6 significant digits.
pub fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let mut exp = v.abs().log10().floor() as i32;
    loop {
        let decimals = SIGNIFICANT - 1 - exp;
        let s = if decimals >= 0 {
            format!("{:.*}", decimals as usize, v)
        } else {
            let unit = 10f64.powi(-decimals);
            format!("{:.0}", (v / unit).round() * unit)
        };
        // Rounding can carry into a new leading digit (9.999996 -> 10.00000).
        let rounded: f64 = s.parse().unwrap_or(v);
        if rounded != 0.0 && rounded.abs() >= 10f64.powi(exp + 1) {
            exp += 1;
            continue;
        }
        return s;
    }
}

/// The value a table stores for `v`: exactly what its text parses back to.
pub fn quantize(v: f64) -> f64 {
    format_sig6(v).parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub snr: f64,
    pub rho: f64,
    pub n_jcas: usize,
    pub avg_rate: f64,
    pub avg_mse: Option<f64>,
}

impl TradeoffRow {
    pub fn new(snr: f64, rho: f64, n_jcas: usize, avg_rate: f64, avg_mse: Option<f64>) -> Self {
        TradeoffRow {
            snr: quantize(snr),
            rho: quantize(rho),
            n_jcas,
            avg_rate: quantize(avg_rate),
            avg_mse: avg_mse.map(quantize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeampatternRow {
    pub theta: f64,
    pub gain: f64,
    pub rho: f64,
    pub n_jcas: usize,
}

impl BeampatternRow {
    pub fn new(theta: f64, gain: f64, rho: f64, n_jcas: usize) -> Self {
        BeampatternRow {
            theta: quantize(theta),
            gain: quantize(gain),
            rho: quantize(rho),
            n_jcas,
        }
    }
}

/// One tradeoff row per `(snr, rho, J)`, ordered by snr, then rho, then J.
pub fn tradeoff_rows(out: &SweepOutput) -> Vec<TradeoffRow> {
    let n_snr = out.results.first().map(|r| r.snr_db.len()).unwrap_or(0);
    let mut rows = Vec::new();
    for s in 0..n_snr {
        for r in &out.results {
            rows.push(TradeoffRow::new(r.snr_db[s], r.rho, r.n_jcas, r.avg_rate[s], r.avg_mse[s]));
        }
    }
    rows
}

/// Beampattern rows at SNR index `snr_index`, JCAS-set averaged
/// (`median_k = false`) or for the median-index subcarrier.
pub fn beampattern_rows(out: &SweepOutput, snr_index: usize, median_k: bool) -> Vec<BeampatternRow> {
    let mut rows = Vec::new();
    for r in &out.results {
        if r.n_jcas == 0 {
            continue;
        }
        let pattern = if median_k {
            &r.beampattern_median_k[snr_index]
        } else {
            &r.beampattern[snr_index]
        };
        for (theta, gain) in out.angles.iter().zip(pattern) {
            rows.push(BeampatternRow::new(*theta, *gain, r.rho, r.n_jcas));
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig6).unwrap_or_else(|| MISSING.into())
}

pub fn write_tradeoff<W: Write>(out: W, rows: &[TradeoffRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRADEOFF_HEADER)?;
    for r in rows {
        w.write_record([
            format_sig6(r.snr),
            format_sig6(r.rho),
            r.n_jcas.to_string(),
            format_sig6(r.avg_rate),
            opt(r.avg_mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_beampattern<W: Write>(out: W, rows: &[BeampatternRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BEAMPATTERN_HEADER)?;
    for r in rows {
        w.write_record([
            format_sig6(r.theta),
            format_sig6(r.gain),
            format_sig6(r.rho),
            r.n_jcas.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(what: &str, value: &str) -> JcasError {
    JcasError::Input(format!("table: bad {what} `{value}`"))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    if h.iter().collect::<Vec<_>>() != expected {
        return Err(JcasError::Input(format!("table header {h:?}, expected {expected:?}")));
    }
    Ok(())
}

fn real(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| parse_err(what, s))
}

pub fn read_tradeoff<R: Read>(input: R) -> Result<Vec<TradeoffRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &TRADEOFF_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TradeoffRow {
                snr: real(&rec[0], "snr")?,
                rho: real(&rec[1], "rho")?,
                n_jcas: rec[2].parse().map_err(|_| parse_err("J", &rec[2]))?,
                avg_rate: real(&rec[3], "avg_rate")?,
                avg_mse: match &rec[4] {
                    MISSING => None,
                    s => Some(real(s, "avg_mse")?),
                },
            })
        })
        .collect()
}

pub fn read_beampattern<R: Read>(input: R) -> Result<Vec<BeampatternRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &BEAMPATTERN_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(BeampatternRow {
                theta: real(&rec[0], "theta")?,
                gain: real(&rec[1], "gain")?,
                rho: real(&rec[2], "rho")?,
                n_jcas: rec[3].parse().map_err(|_| parse_err("J", &rec[3]))?,
            })
        })
        .collect()
}
