//! Survey ingestion and the calibrated pooled and state-level bounds problems.

mod markets;
mod survey;

pub use markets::{
    assumption_decomposition, pooled_two_market, shadow_prices_from, state_by_status, state_shadow_prices,
    weighted_open_share, Calibrated, CalibrationParams, Cell, DecompositionRow, StateShadowPrice, Status,
};
pub use survey::{
    impute_gallons, load_station_survey, national_shares, observed_gallons_only, parse_station_survey,
    StationSurveyRow, SURVEY_HEADER,
};

/// The synthetic state survey shipped with the crate.
pub const SYNTHETIC_STATES: &str = include_str!("../../data/synthetic_states.csv");
