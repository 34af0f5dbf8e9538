#![allow(dead_code)]

use std::sync::OnceLock;

use chrono::NaiveDate;

use agritwin_core::recommender::{synthetic_dataset, train, Hyperparams, RecommendationModel};
use agritwin_core::simulation::{DailyWeather, ScenarioSpec, SoilWaterState};
use agritwin_core::twin::FieldId;

pub const SAMPLE: [f64; 7] = [90.0, 40.0, 40.0, 25.0, 82.0, 6.5, 200.0];

/// Model trained once per test binary on the synthetic set's training split.
pub fn model() -> &'static RecommendationModel {
    static MODEL: OnceLock<RecommendationModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let (train_set, _) = synthetic_dataset(42, 100).stratified_split(0.2, 42);
        let hyper = Hyperparams { epochs: 800, ..Hyperparams::default() };
        train(&train_set, &hyper).unwrap()
    })
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Twenty warm days for rice (tbase 10): 15 GDD each.
pub fn rice_scenario() -> ScenarioSpec {
    ScenarioSpec {
        field: FieldId::new("plot-1").unwrap(),
        crop: agritwin_core::recommender::CropClass::Rice,
        start_date: date(2024, 6, 1),
        horizon: 20,
        weather: vec![DailyWeather { tmin: 20.0, tmax: 30.0, humidity: 70.0, rainfall: 6.0 }; 20],
        initial_water: SoilWaterState::new(80.0, 100.0, 10.0).unwrap(),
        irrigation: None,
        pesticide: None,
        initial_gdd: 0.0,
    }
}
