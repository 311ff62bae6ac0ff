use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Expected CSV header, in order.
pub const SURVEY_HEADER: [&str; 6] = [
    "state",
    "share_out",
    "share_limiting",
    "share_open",
    "stations_1972",
    "gallons_1972",
];

/// One state's station survey with its census magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSurveyRow {
    pub state: String,
    pub share_out: f64,
    pub share_limiting: f64,
    pub share_open: f64,
    pub stations_1972: f64,
    /// Missing in the source when `None`; see `impute_gallons`.
    pub gallons_1972: Option<f64>,
    #[serde(default)]
    pub gallons_imputed: bool,
}

impl StationSurveyRow {
    /// Share of stations rationing: out of fuel or limiting purchases.
    pub fn rationing_share(&self) -> f64 {
        self.share_out + self.share_limiting
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let shares = [self.share_out, self.share_limiting, self.share_open];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err("shares must lie in [0, 1]".into());
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(format!("shares sum to {sum}, expected 1"));
        }
        if !(self.stations_1972.is_finite() && self.stations_1972 >= 0.0) {
            return Err("station count must be >= 0".into());
        }
        if self.gallons_1972.is_some_and(|g| !(g.is_finite() && g >= 0.0)) {
            return Err("gallons must be >= 0".into());
        }
        if self.state.trim().is_empty() {
            return Err("state code is empty".into());
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawRow {
    state: String,
    share_out: f64,
    share_limiting: f64,
    share_open: f64,
    stations_1972: f64,
    gallons_1972: Option<f64>,
}

pub fn load_station_survey(path: impl AsRef<Path>) -> Result<Vec<StationSurveyRow>> {
    let file =
        std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_station_survey(file)
}

pub fn parse_station_survey(reader: impl Read) -> Result<Vec<StationSurveyRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| invalid(format!("survey header: {e}")))?
        .clone();
    if header.iter().ne(SURVEY_HEADER.iter().copied()) {
        return Err(invalid(format!(
            "survey header must be `{}`, found `{}`",
            SURVEY_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in rdr.deserialize::<RawRow>() {
        let record = record.map_err(|e| Error::Row {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        // Header is line 1.
        let line = rows.len() + 2;
        let row = StationSurveyRow {
            state: record.state,
            share_out: record.share_out,
            share_limiting: record.share_limiting,
            share_open: record.share_open,
            stations_1972: record.stations_1972,
            gallons_1972: record.gallons_1972,
            gallons_imputed: false,
        };
        row.validate().map_err(|message| Error::Row { line, message })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid("survey has no rows"));
    }
    Ok(rows)
}

/// Fills missing gallons with `stations * (observed gallons / observed stations)`.
pub fn impute_gallons(rows: &[StationSurveyRow]) -> Result<Vec<StationSurveyRow>> {
    let (gallons, stations) = rows
        .iter()
        .filter_map(|r| r.gallons_1972.map(|g| (g, r.stations_1972)))
        .fold((0.0, 0.0), |(a, b), (g, s)| (a + g, b + s));
    if stations <= 0.0 {
        return Err(invalid("no state reports both gallons and stations"));
    }
    let per_station = gallons / stations;
    Ok(rows
        .iter()
        .map(|r| match r.gallons_1972 {
            Some(_) => r.clone(),
            None => StationSurveyRow {
                gallons_1972: Some(r.stations_1972 * per_station),
                gallons_imputed: true,
                ..r.clone()
            },
        })
        .collect())
}

/// Rows with observed gallons only.
pub fn observed_gallons_only(rows: &[StationSurveyRow]) -> Vec<StationSurveyRow> {
    rows.iter()
        .filter(|r| r.gallons_1972.is_some() && !r.gallons_imputed)
        .cloned()
        .collect()
}

/// Station-weighted national shares `(out, limiting, open)`.
pub fn national_shares(rows: &[StationSurveyRow]) -> (f64, f64, f64) {
    let total: f64 = rows.iter().map(|r| r.stations_1972).sum();
    let w = |f: fn(&StationSurveyRow) -> f64| rows.iter().map(|r| r.stations_1972 * f(r)).sum::<f64>() / total;
    (w(|r| r.share_out), w(|r| r.share_limiting), w(|r| r.share_open))
}
