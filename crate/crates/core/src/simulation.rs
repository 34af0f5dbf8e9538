//! Growth and water scenarios for a single field.
//!
//! Crop development follows cumulative growing degree-days; soil water is a
//! single bucket bounded by the wilting point and field capacity, drained by
//! a constant per-crop demand. Days are numbered from 1, day 1 being the
//! scenario start date.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recommender::CropClass;
use crate::twin::{FieldId, FieldSnapshot};

const DEFAULT_PARAMS_CSV: &str = include_str!("../data/crop_params.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("tmin {tmin} exceeds tmax {tmax}")]
    InvertedRange { tmin: f64, tmax: f64 },
    #[error("{name} must be non-negative, got {value}")]
    NegativeInput { name: &'static str, value: f64 },
    #[error("no growth parameters for {0}")]
    MissingParams(CropClass),
    #[error("invalid scenario: {0}")]
    SpecInvalid(String),
    #[error("invalid crop parameters: {0}")]
    BadParams(String),
    #[error("irrigation cannot prevent stress on day {day}")]
    Infeasible { day: u32 },
    #[error("weather outlook is empty")]
    EmptyOutlook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropGrowthParams {
    pub crop: CropClass,
    /// °C
    pub tbase: f64,
    /// °C·day
    pub gdd_required: f64,
    /// mm/day
    pub water_demand: f64,
    /// Available-water fraction below which a day counts as stressed.
    pub stress_threshold: f64,
    /// Relative humidity (%) at or above which pests are a risk.
    pub humidity_threshold: f64,
    pub temp_band_lo: f64,
    pub temp_band_hi: f64,
}

impl CropGrowthParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadParams(format!("{}: {m}", self.crop)));
        if !(self.gdd_required > 0.0) {
            return bad("gdd_required must be positive");
        }
        if !(self.water_demand >= 0.0) {
            return bad("water_demand must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.stress_threshold) {
            return bad("stress_threshold must lie in [0, 1]");
        }
        if !(0.0..=100.0).contains(&self.humidity_threshold) {
            return bad("humidity_threshold must lie in [0, 100]");
        }
        if !(self.temp_band_lo <= self.temp_band_hi) || !self.tbase.is_finite() {
            return bad("temperature band is inverted");
        }
        Ok(())
    }
}

/// Growth parameters keyed by crop.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CropParamsTable {
    params: BTreeMap<CropClass, CropGrowthParams>,
}

impl CropParamsTable {
    /// Reads `crop,tbase,gdd_required,water_demand,stress_threshold,
    /// humidity_threshold,temp_band_lo,temp_band_hi`; `#` starts a comment.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, SimError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
        let mut params = BTreeMap::new();
        for row in csv.deserialize::<CropGrowthParams>() {
            let row = row.map_err(|e| SimError::BadParams(e.to_string()))?;
            row.validate()?;
            params.insert(row.crop, row);
        }
        Ok(Self { params })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|e| SimError::BadParams(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    /// The table shipped with the crate (placeholder values).
    pub fn builtin() -> Self {
        Self::from_csv_reader(DEFAULT_PARAMS_CSV.as_bytes()).expect("bundled table parses")
    }

    pub fn from_params(params: impl IntoIterator<Item = CropGrowthParams>) -> Self {
        Self { params: params.into_iter().map(|p| (p.crop, p)).collect() }
    }

    pub fn get(&self, crop: CropClass) -> Result<&CropGrowthParams, SimError> {
        self.params.get(&crop).ok_or(SimError::MissingParams(crop))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Bucket state, all in mm of water.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoilWaterState {
    pub moisture: f64,
    pub capacity: f64,
    pub wilting: f64,
}

impl SoilWaterState {
    pub fn new(moisture: f64, capacity: f64, wilting: f64) -> Result<Self, SimError> {
        let s = Self { moisture, capacity, wilting };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.wilting >= 0.0 && self.wilting < self.capacity && self.capacity.is_finite()) {
            return Err(SimError::SpecInvalid(format!(
                "need 0 <= wilting < capacity, got wilting {} capacity {}",
                self.wilting, self.capacity
            )));
        }
        if !(self.wilting..=self.capacity).contains(&self.moisture) {
            return Err(SimError::SpecInvalid(format!(
                "moisture {} outside [{}, {}]",
                self.moisture, self.wilting, self.capacity
            )));
        }
        Ok(())
    }

    /// Share of plant-available water currently held, in [0, 1].
    pub fn available_fraction(&self) -> f64 {
        (self.moisture - self.wilting) / (self.capacity - self.wilting)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    pub tmin: f64,
    pub tmax: f64,
    pub humidity: f64,
    pub rainfall: f64,
}

impl DailyWeather {
    pub fn mean_temperature(&self) -> f64 {
        (self.tmin + self.tmax) / 2.0
    }

    fn validate(&self, day: usize) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::SpecInvalid(format!("weather day {}: {m}", day + 1)));
        if !(self.tmin <= self.tmax) {
            return bad(format!("tmin {} > tmax {}", self.tmin, self.tmax));
        }
        if !(0.0..=100.0).contains(&self.humidity) {
            return bad(format!("humidity {} outside [0, 100]", self.humidity));
        }
        if !(self.rainfall >= 0.0) || !self.rainfall.is_finite() {
            return bad(format!("rainfall {} is negative", self.rainfall));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrigationPlan {
    /// Day number → mm applied that day.
    pub applications: BTreeMap<u32, f64>,
    /// Largest single-day application, mm.
    pub cap: f64,
}

impl IrrigationPlan {
    pub fn empty(cap: f64) -> Self {
        Self { applications: BTreeMap::new(), cap }
    }

    pub fn amount(&self, day: u32) -> f64 {
        self.applications.get(&day).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.applications.values().sum()
    }

    fn validate(&self, horizon: u32) -> Result<(), SimError> {
        if !(self.cap >= 0.0) {
            return Err(SimError::SpecInvalid(format!("irrigation cap {} is negative", self.cap)));
        }
        for (&day, &mm) in &self.applications {
            if day == 0 || day > horizon {
                return Err(SimError::SpecInvalid(format!("irrigation day {day} outside 1..={horizon}")));
            }
            if !(0.0..=self.cap).contains(&mm) {
                return Err(SimError::SpecInvalid(format!(
                    "irrigation of {mm} mm on day {day} outside [0, {}]",
                    self.cap
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PesticidePolicy {
    /// Minimum number of days between two applications.
    pub reentry_interval_days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub field: FieldId,
    pub crop: CropClass,
    pub start_date: NaiveDate,
    pub horizon: u32,
    pub weather: Vec<DailyWeather>,
    pub initial_water: SoilWaterState,
    #[serde(default)]
    pub irrigation: Option<IrrigationPlan>,
    #[serde(default)]
    pub pesticide: Option<PesticidePolicy>,
    /// Degree-days already accumulated before the start date.
    #[serde(default)]
    pub initial_gdd: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::SpecInvalid("horizon must be at least 1 day".into()));
        }
        if self.weather.len() != self.horizon as usize {
            return Err(SimError::SpecInvalid(format!(
                "weather series has {} days, horizon is {}",
                self.weather.len(),
                self.horizon
            )));
        }
        if self.start_date.checked_add_days(Days::new(self.horizon as u64)).is_none() {
            return Err(SimError::SpecInvalid("horizon runs past the calendar".into()));
        }
        for (i, w) in self.weather.iter().enumerate() {
            w.validate(i)?;
        }
        self.initial_water.validate()?;
        if let Some(plan) = &self.irrigation {
            plan.validate(self.horizon)?;
        }
        if let Some(p) = &self.pesticide {
            if p.reentry_interval_days == 0 {
                return Err(SimError::SpecInvalid("re-entry interval must be at least 1".into()));
            }
        }
        if !(self.initial_gdd >= 0.0) || !self.initial_gdd.is_finite() {
            return Err(SimError::SpecInvalid("initial_gdd must be non-negative".into()));
        }
        Ok(())
    }

    pub fn date_of(&self, day: u32) -> NaiveDate {
        self.start_date + Days::new(day as u64 - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub day: u32,
    pub date: NaiveDate,
    pub gdd: f64,
    pub cumulative_gdd: f64,
    pub rainfall: f64,
    pub irrigation: f64,
    pub runoff: f64,
    pub deficit: f64,
    /// End-of-day soil moisture, mm.
    pub moisture: f64,
    pub stressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTimeline {
    pub days: Vec<DailyRecord>,
    pub maturity_day: Option<u32>,
    pub maturity_date: Option<NaiveDate>,
    pub yield_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub stressed_days: u32,
    pub total_rainfall: f64,
    pub total_runoff: f64,
    pub total_deficit: f64,
    pub final_cumulative_gdd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub timeline: GrowthTimeline,
    pub total_irrigation: f64,
    pub pesticide_days: Vec<u32>,
    pub diagnostics: Diagnostics,
}

/// Growing degree-days for one day: `max(0, (tmin + tmax) / 2 - tbase)`.
pub fn daily_gdd(tmin: f64, tmax: f64, tbase: f64) -> Result<f64, SimError> {
    if !(tmin <= tmax) {
        return Err(SimError::InvertedRange { tmin, tmax });
    }
    Ok(((tmin + tmax) / 2.0 - tbase).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterStep {
    pub state: SoilWaterState,
    /// Water lost above field capacity.
    pub runoff: f64,
    /// Part of the day's demand that could not be met.
    pub deficit: f64,
}

/// One day of the bucket. Rain and irrigation are added first, then demand
/// is drawn down to no lower than the wilting point, and whatever remains
/// above capacity runs off. For every step
/// `Δmoisture = rain + irrigation - (demand - deficit) - runoff`.
pub fn step_water(
    state: &SoilWaterState,
    rain: f64,
    irrigation: f64,
    et_demand: f64,
) -> Result<WaterStep, SimError> {
    for (name, value) in [("rain", rain), ("irrigation", irrigation), ("et_demand", et_demand)] {
        if !(value >= 0.0) {
            return Err(SimError::NegativeInput { name, value });
        }
    }
    let wet = state.moisture + rain + irrigation;
    let extractable = (wet - state.wilting).max(0.0);
    let uptake = et_demand.min(extractable);
    let deficit = et_demand - uptake;
    let after = wet - uptake;
    let runoff = (after - state.capacity).max(0.0);
    let moisture = after - runoff;
    Ok(WaterStep { state: SoilWaterState { moisture, ..*state }, runoff, deficit })
}

/// Day numbers on which pests are treated: a day is at risk when humidity
/// reaches the crop threshold and the mean temperature falls inside the pest
/// band; the earliest at-risk day is treated and later ones are skipped until
/// `interval` days have passed.
pub fn pesticide_schedule(
    weather: &[DailyWeather],
    params: &CropGrowthParams,
    interval: u32,
) -> Result<Vec<u32>, SimError> {
    if interval == 0 {
        return Err(SimError::SpecInvalid("re-entry interval must be at least 1".into()));
    }
    let mut days = Vec::new();
    let mut last: Option<u32> = None;
    for (i, w) in weather.iter().enumerate() {
        let day = i as u32 + 1;
        let t = w.mean_temperature();
        let risky = w.humidity >= params.humidity_threshold
            && (params.temp_band_lo..=params.temp_band_hi).contains(&t);
        if risky && last.is_none_or(|l| day - l >= interval) {
            days.push(day);
            last = Some(day);
        }
    }
    Ok(days)
}

/// Default re-entry interval when a scenario carries no pesticide policy.
pub const DEFAULT_REENTRY_DAYS: u32 = 7;

pub fn pesticide_days(spec: &ScenarioSpec, params: &CropGrowthParams) -> Result<Vec<u32>, SimError> {
    let interval = spec.pesticide.map_or(DEFAULT_REENTRY_DAYS, |p| p.reentry_interval_days);
    pesticide_schedule(&spec.weather, params, interval)
}

fn check_params(spec: &ScenarioSpec, params: &CropGrowthParams) -> Result<(), SimError> {
    if params.crop != spec.crop {
        return Err(SimError::MissingParams(spec.crop));
    }
    params.validate()
}

fn run_days(
    spec: &ScenarioSpec,
    params: &CropGrowthParams,
    irrigation: &dyn Fn(u32) -> f64,
) -> Result<Vec<DailyRecord>, SimError> {
    let mut water = spec.initial_water;
    let mut cumulative = spec.initial_gdd;
    let mut days = Vec::with_capacity(spec.horizon as usize);
    for (i, w) in spec.weather.iter().enumerate() {
        let day = i as u32 + 1;
        let gdd = daily_gdd(w.tmin, w.tmax, params.tbase)?;
        cumulative += gdd;
        let applied = irrigation(day);
        let step = step_water(&water, w.rainfall, applied, params.water_demand)?;
        water = step.state;
        days.push(DailyRecord {
            day,
            date: spec.date_of(day),
            gdd,
            cumulative_gdd: cumulative,
            rainfall: w.rainfall,
            irrigation: applied,
            runoff: step.runoff,
            deficit: step.deficit,
            moisture: water.moisture,
            stressed: water.available_fraction() < params.stress_threshold,
        });
    }
    Ok(days)
}

pub fn simulate(spec: &ScenarioSpec, params: &CropGrowthParams) -> Result<ScenarioResult, SimError> {
    spec.validate()?;
    check_params(spec, params)?;
    let plan = spec.irrigation.as_ref();
    let days = run_days(spec, params, &|d| plan.map_or(0.0, |p| p.amount(d)))?;

    let stressed = days.iter().filter(|d| d.stressed).count() as u32;
    let maturity_day = days.iter().find(|d| d.cumulative_gdd >= params.gdd_required).map(|d| d.day);
    let diagnostics = Diagnostics {
        stressed_days: stressed,
        total_rainfall: days.iter().map(|d| d.rainfall).sum(),
        total_runoff: days.iter().map(|d| d.runoff).sum(),
        total_deficit: days.iter().map(|d| d.deficit).sum(),
        final_cumulative_gdd: days.last().map_or(spec.initial_gdd, |d| d.cumulative_gdd),
    };
    Ok(ScenarioResult {
        total_irrigation: days.iter().map(|d| d.irrigation).sum(),
        pesticide_days: pesticide_days(spec, params)?,
        timeline: GrowthTimeline {
            maturity_date: maturity_day.map(|d| spec.date_of(d)),
            maturity_day,
            yield_index: (1.0 - stressed as f64 / spec.horizon as f64).max(0.0),
            days,
        },
        diagnostics,
    })
}

/// Convenience wrapper looking the crop up in a parameter table.
pub fn simulate_with(spec: &ScenarioSpec, table: &CropParamsTable) -> Result<ScenarioResult, SimError> {
    spec.validate()?;
    simulate(spec, table.get(spec.crop)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrrigationOptions {
    /// Largest application on any one day, mm. Must be positive.
    pub cap: f64,
    /// Applications are whole multiples of this amount, mm.
    #[serde(default = "default_quantum")]
    pub quantum: f64,
}

fn default_quantum() -> f64 {
    1.0
}

impl IrrigationOptions {
    pub fn new(cap: f64) -> Self {
        Self { cap, quantum: default_quantum() }
    }
}

/// Smallest total irrigation (in whole quanta) that keeps every day free of
/// water stress.
///
/// Works forward through the season: at the first stressed day `d`, one
/// quantum is added on the latest day `j <= d` that still has room under the
/// cap and whose extra water reaches `d`, i.e. raises `moisture - deficit`
/// there. No day before `d` is stressed, so none has a deficit; the only
/// losses between `j` and `d` are runoff, and a later `j` passes through
/// fewer days that can spill. Any existing plan in `spec` is ignored.
pub fn optimize_irrigation(
    spec: &ScenarioSpec,
    params: &CropGrowthParams,
    options: IrrigationOptions,
) -> Result<IrrigationPlan, SimError> {
    spec.validate()?;
    check_params(spec, params)?;
    if !(options.cap > 0.0) || !options.cap.is_finite() {
        return Err(SimError::SpecInvalid(format!("irrigation cap must be positive, got {}", options.cap)));
    }
    if !(options.quantum > 0.0) || !options.quantum.is_finite() {
        return Err(SimError::SpecInvalid(format!("quantum must be positive, got {}", options.quantum)));
    }
    let h = spec.horizon as usize;
    let max_units = (options.cap / options.quantum + 1e-9).floor() as u64;
    let mut units = vec![0u64; h + 1];
    let q = options.quantum;

    loop {
        let days = run_days(spec, params, &|d| units[d as usize] as f64 * q)?;
        let Some(first) = days.iter().find(|d| d.stressed) else {
            break;
        };
        let day = first.day;
        let baseline = first.moisture - first.deficit;
        let mut placed = false;
        for j in (1..=day).rev() {
            if units[j as usize] >= max_units {
                continue;
            }
            units[j as usize] += 1;
            let trial = run_days(spec, params, &|d| units[d as usize] as f64 * q)?;
            let at = &trial[day as usize - 1];
            if at.moisture - at.deficit > baseline {
                placed = true;
                break;
            }
            units[j as usize] -= 1;
        }
        if !placed {
            return Err(SimError::Infeasible { day });
        }
    }

    let applications = units
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(d, &n)| (d as u32, n as f64 * options.quantum))
        .collect();
    Ok(IrrigationPlan { applications, cap: options.cap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "date", rename_all = "snake_case")]
pub enum HarvestPrediction {
    Date(NaiveDate),
    BeyondHorizon,
}

/// Estimated maturity date for `crop` when grown from `snapshot.date` under
/// `outlook` (one entry per day starting on the snapshot date), given the
/// degree-days already accumulated.
pub fn predict_harvest(
    snapshot: &FieldSnapshot,
    crop: CropClass,
    outlook: &[DailyWeather],
    table: &CropParamsTable,
    accumulated_gdd: f64,
) -> Result<HarvestPrediction, SimError> {
    if outlook.is_empty() {
        return Err(SimError::EmptyOutlook);
    }
    let params = table.get(crop)?;
    let spec = ScenarioSpec {
        field: snapshot.field.clone(),
        crop,
        start_date: snapshot.date,
        horizon: outlook.len() as u32,
        weather: outlook.to_vec(),
        // water does not affect maturity; any valid bucket will do
        initial_water: SoilWaterState { moisture: 100.0, capacity: 100.0, wilting: 0.0 },
        irrigation: None,
        pesticide: None,
        initial_gdd: accumulated_gdd,
    };
    let result = simulate(&spec, params)?;
    Ok(match result.timeline.maturity_date {
        Some(d) => HarvestPrediction::Date(d),
        None => HarvestPrediction::BeyondHorizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{SoilSample, WeatherObservation};
    use proptest::prelude::*;

    fn params(tbase: f64, required: f64, demand: f64, threshold: f64) -> CropGrowthParams {
        CropGrowthParams {
            crop: CropClass::Rice,
            tbase,
            gdd_required: required,
            water_demand: demand,
            stress_threshold: threshold,
            humidity_threshold: 80.0,
            temp_band_lo: 20.0,
            temp_band_hi: 30.0,
        }
    }

    fn day(tmin: f64, tmax: f64, rain: f64) -> DailyWeather {
        DailyWeather { tmin, tmax, humidity: 60.0, rainfall: rain }
    }

    fn spec(weather: Vec<DailyWeather>, water: SoilWaterState) -> ScenarioSpec {
        ScenarioSpec {
            field: FieldId::new("f").unwrap(),
            crop: CropClass::Rice,
            start_date: NaiveDate::from_ymd_opt(2024, 6, 1).unwrap(),
            horizon: weather.len() as u32,
            weather,
            initial_water: water,
            irrigation: None,
            pesticide: None,
            initial_gdd: 0.0,
        }
    }

    fn full() -> SoilWaterState {
        SoilWaterState::new(100.0, 100.0, 10.0).unwrap()
    }

    #[test]
    fn gdd_examples() {
        assert_eq!(daily_gdd(20.0, 30.0, 10.0), Ok(15.0));
        assert_eq!(daily_gdd(0.0, 8.0, 10.0), Ok(0.0));
        assert_eq!(daily_gdd(10.0, 10.0, 10.0), Ok(0.0));
        assert_eq!(daily_gdd(12.0, 8.0, 10.0), Err(SimError::InvertedRange { tmin: 12.0, tmax: 8.0 }));
    }

    #[test]
    fn water_examples() {
        let s = SoilWaterState::new(50.0, 100.0, 10.0).unwrap();
        let r = step_water(&s, 10.0, 0.0, 5.0).unwrap();
        assert_eq!((r.state.moisture, r.runoff, r.deficit), (55.0, 0.0, 0.0));

        let s = SoilWaterState::new(95.0, 100.0, 10.0).unwrap();
        let r = step_water(&s, 20.0, 0.0, 0.0).unwrap();
        assert_eq!((r.state.moisture, r.runoff), (100.0, 15.0));

        let s = SoilWaterState::new(12.0, 100.0, 10.0).unwrap();
        let r = step_water(&s, 0.0, 0.0, 5.0).unwrap();
        assert_eq!((r.state.moisture, r.deficit), (10.0, 3.0));

        assert!(matches!(step_water(&s, -1.0, 0.0, 0.0), Err(SimError::NegativeInput { name: "rain", .. })));
    }

    #[test]
    fn maturity_on_day_ten() {
        let s = spec(vec![day(20.0, 30.0, 10.0); 20], full());
        let r = simulate(&s, &params(10.0, 150.0, 5.0, 0.3)).unwrap();
        assert_eq!(r.timeline.maturity_day, Some(10));
        assert_eq!(r.timeline.maturity_date, NaiveDate::from_ymd_opt(2024, 6, 10));
        assert_eq!(r.timeline.days[9].cumulative_gdd, 150.0);
    }

    #[test]
    fn cold_season_never_matures() {
        let s = spec(vec![day(0.0, 8.0, 10.0); 30], full());
        let r = simulate(&s, &params(10.0, 150.0, 5.0, 0.3)).unwrap();
        assert_eq!(r.timeline.maturity_day, None);
        assert_eq!(r.diagnostics.final_cumulative_gdd, 0.0);
    }

    #[test]
    fn ample_rain_means_no_stress() {
        let s = spec(vec![day(20.0, 30.0, 20.0); 30], full());
        let r = simulate(&s, &params(10.0, 150.0, 5.0, 0.5)).unwrap();
        assert_eq!(r.diagnostics.stressed_days, 0);
        assert_eq!(r.timeline.yield_index, 1.0);
    }

    #[test]
    fn yield_index_counts_stress() {
        // no rain: the bucket drains 10 mm/day from 50 mm above wilting
        let s = spec(vec![day(20.0, 30.0, 0.0); 10], SoilWaterState::new(60.0, 110.0, 10.0).unwrap());
        let r = simulate(&s, &params(10.0, 150.0, 10.0, 0.5)).unwrap();
        // end-of-day fractions 0.4, 0.3, ... are all below 0.5
        assert_eq!(r.diagnostics.stressed_days, 10);
        assert_eq!(r.timeline.yield_index, 0.0);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(vec![], full());
        assert!(matches!(simulate(&s, &params(10.0, 150.0, 5.0, 0.5)), Err(SimError::SpecInvalid(_))));
        s.weather = vec![day(20.0, 30.0, 0.0)];
        s.horizon = 2;
        assert!(matches!(simulate(&s, &params(10.0, 150.0, 5.0, 0.5)), Err(SimError::SpecInvalid(_))));
        s.horizon = 1;
        s.irrigation = Some(IrrigationPlan { applications: BTreeMap::from([(1, 9.0)]), cap: 5.0 });
        assert!(matches!(simulate(&s, &params(10.0, 150.0, 5.0, 0.5)), Err(SimError::SpecInvalid(_))));
        let table = CropParamsTable::from_params([CropGrowthParams {
            crop: CropClass::Maize,
            ..params(10.0, 1.0, 1.0, 0.1)
        }]);
        s.irrigation = None;
        assert_eq!(simulate_with(&s, &table), Err(SimError::MissingParams(CropClass::Rice)));
    }

    #[test]
    fn builtin_table_covers_all_crops() {
        let t = CropParamsTable::builtin();
        assert_eq!(t.len(), 22);
        for c in CropClass::ALL {
            assert!(t.get(c).is_ok(), "{c}");
        }
    }

    #[test]
    fn pesticide_examples() {
        let p = params(10.0, 100.0, 5.0, 0.5);
        let calm = vec![DailyWeather { tmin: 20.0, tmax: 30.0, humidity: 50.0, rainfall: 0.0 }; 10];
        assert_eq!(pesticide_schedule(&calm, &p, 3), Ok(vec![]));

        let risky_on = |days: &[u32]| -> Vec<DailyWeather> {
            (1..=10)
                .map(|d| DailyWeather {
                    tmin: 20.0,
                    tmax: 30.0,
                    humidity: if days.contains(&d) { 90.0 } else { 50.0 },
                    rainfall: 0.0,
                })
                .collect()
        };
        assert_eq!(pesticide_schedule(&risky_on(&[3, 4, 5]), &p, 3), Ok(vec![3]));
        assert_eq!(pesticide_schedule(&risky_on(&[2, 7]), &p, 3), Ok(vec![2, 7]));
        assert_eq!(pesticide_schedule(&risky_on(&[3, 4, 5, 6]), &p, 3), Ok(vec![3, 6]));
        assert!(pesticide_schedule(&calm, &p, 0).is_err());
    }

    #[test]
    fn irrigation_examples() {
        let p = params(10.0, 150.0, 5.0, 0.5);
        let s = spec(vec![day(20.0, 30.0, 5.0); 5], SoilWaterState::new(55.0, 100.0, 10.0).unwrap());
        assert_eq!(optimize_irrigation(&s, &p, IrrigationOptions::new(10.0)).unwrap().total(), 0.0);

        // one dry day: end moisture would be 50 (fraction 4/9 < 0.5); 5 mm
        // restores the 55 mm threshold
        let mut weather = vec![day(20.0, 30.0, 5.0); 5];
        weather[2].rainfall = 0.0;
        let s = spec(weather, SoilWaterState::new(55.0, 100.0, 10.0).unwrap());
        let plan = optimize_irrigation(&s, &p, IrrigationOptions::new(10.0)).unwrap();
        assert_eq!(plan.applications, BTreeMap::from([(3, 5.0)]));

        let s = spec(vec![day(20.0, 30.0, 0.0); 10], full());
        let p = params(10.0, 150.0, 10.0, 0.5);
        assert!(matches!(
            optimize_irrigation(&s, &p, IrrigationOptions::new(5.0)),
            Err(SimError::Infeasible { .. })
        ));
        assert!(optimize_irrigation(&s, &p, IrrigationOptions::new(0.0)).is_err());
    }

    #[test]
    fn irrigation_covers_deficit_at_wilting_point() {
        // day 3 would end at the wilting point with a 3 mm deficit; the first
        // quanta only pay down that deficit before moisture rises
        let p = CropGrowthParams { crop: CropClass::Rice, ..params(10.0, 150.0, 8.0, 0.25) };
        let s = spec(vec![day(18.0, 28.0, 0.0); 3], SoilWaterState::new(28.0, 32.0, 5.0).unwrap());
        let plan = optimize_irrigation(&s, &p, IrrigationOptions::new(3.0)).unwrap();
        assert_eq!(plan.applications, BTreeMap::from([(1, 2.0), (2, 3.0), (3, 3.0)]));
    }

    #[test]
    fn optimized_plan_removes_stress() {
        let p = params(10.0, 150.0, 6.0, 0.6);
        let weather: Vec<_> = (0..40).map(|i| day(18.0, 31.0, if i % 9 == 0 { 25.0 } else { 0.0 })).collect();
        let mut s = spec(weather, SoilWaterState::new(70.0, 120.0, 20.0).unwrap());
        let plan = optimize_irrigation(&s, &p, IrrigationOptions::new(8.0)).unwrap();
        s.irrigation = Some(plan.clone());
        let r = simulate(&s, &p).unwrap();
        assert_eq!(r.diagnostics.stressed_days, 0);
        assert_eq!(r.total_irrigation, plan.total());
    }

    #[test]
    fn harvest_prediction() {
        let table = CropParamsTable::from_params([params(10.0, 150.0, 5.0, 0.3)]);
        let date = NaiveDate::from_ymd_opt(2024, 6, 1).unwrap();
        let snap = FieldSnapshot {
            field: FieldId::new("f").unwrap(),
            date,
            soil: SoilSample::new(90.0, 40.0, 40.0, 6.5).unwrap(),
            weather: WeatherObservation::new(date, 25.0, 82.0, 200.0).unwrap(),
            location: None,
        };
        let outlook = vec![day(20.0, 30.0, 10.0); 20];
        assert_eq!(
            predict_harvest(&snap, CropClass::Rice, &outlook, &table, 0.0),
            Ok(HarvestPrediction::Date(NaiveDate::from_ymd_opt(2024, 6, 10).unwrap()))
        );
        assert_eq!(
            predict_harvest(&snap, CropClass::Rice, &outlook, &table, 150.0),
            Ok(HarvestPrediction::Date(date))
        );
        assert_eq!(
            predict_harvest(&snap, CropClass::Rice, &outlook[..5], &table, 0.0),
            Ok(HarvestPrediction::BeyondHorizon)
        );
        assert_eq!(predict_harvest(&snap, CropClass::Rice, &[], &table, 0.0), Err(SimError::EmptyOutlook));
        assert_eq!(
            predict_harvest(&snap, CropClass::Maize, &outlook, &table, 0.0),
            Err(SimError::MissingParams(CropClass::Maize))
        );
    }

    #[test]
    fn spec_json_round_trip() {
        let mut s = spec(vec![day(20.0, 30.0, 1.5); 3], full());
        s.irrigation = Some(IrrigationPlan { applications: BTreeMap::from([(2, 4.0)]), cap: 5.0 });
        s.pesticide = Some(PesticidePolicy { reentry_interval_days: 3 });
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&json).unwrap(), s);
    }

    proptest! {
        #[test]
        fn cumulative_gdd_monotone(
            temps in prop::collection::vec((-10f64..40.0, 0f64..15.0, 0f64..30.0), 1..60)
        ) {
            let weather: Vec<_> = temps.iter().map(|&(t, spread, rain)| day(t, t + spread, rain)).collect();
            let r = simulate(&spec(weather, full()), &params(10.0, 300.0, 5.0, 0.5)).unwrap();
            for w in r.timeline.days.windows(2) {
                prop_assert!(w[1].cumulative_gdd >= w[0].cumulative_gdd);
            }
            let matured = r.timeline.days.iter().any(|d| d.cumulative_gdd >= 300.0);
            prop_assert_eq!(r.timeline.maturity_day.is_some(), matured);
        }

        #[test]
        fn more_irrigation_never_hurts(
            rain in prop::collection::vec(0f64..15.0, 1..30),
            extra in prop::collection::vec(0f64..10.0, 1..30),
            bump_day in 0usize..30,
            bump in 0f64..10.0,
        ) {
            let h = rain.len();
            let p = params(10.0, 300.0, 6.0, 0.5);
            let mut s = spec(rain.iter().map(|&r| day(15.0, 25.0, r)).collect(), SoilWaterState::new(50.0, 100.0, 10.0).unwrap());
            let base: BTreeMap<u32, f64> = (0..h).map(|i| (i as u32 + 1, extra[i % extra.len()])).collect();
            s.irrigation = Some(IrrigationPlan { applications: base.clone(), cap: 20.0 });
            let before = simulate(&s, &p).unwrap().timeline.yield_index;
            let mut more = base;
            *more.get_mut(&(bump_day % h + 1).try_into().unwrap()).unwrap() += bump;
            s.irrigation = Some(IrrigationPlan { applications: more, cap: 20.0 });
            let after = simulate(&s, &p).unwrap().timeline.yield_index;
            prop_assert!(after >= before);
        }

        #[test]
        fn simulate_is_pure(rain in prop::collection::vec(0f64..15.0, 1..20)) {
            let s = spec(rain.iter().map(|&r| day(15.0, 25.0, r)).collect(), full());
            let p = params(10.0, 100.0, 6.0, 0.5);
            prop_assert_eq!(simulate(&s, &p).unwrap(), simulate(&s, &p).unwrap());
        }
    }
}
