//! Transport-independent `/v1` request handling.
//!
//! Every response body is an envelope: `{"ok":true,"data":…}` on success,
//! `{"ok":false,"error":{"code":…,"message":…}}` otherwise. Payloads under
//! `data` are the serialized library values, unchanged.

use std::path::PathBuf;
use std::sync::Arc;

use arc_swap::{ArcSwap, ArcSwapOption};
use chrono::{DateTime, NaiveDate, Utc};
use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use agritwin_core::ingestion::{
    parse_gps_sentence, GeoCoordinate, IngestError, ReplayProvider, SoilSample, WeatherObservation,
    WeatherProvider,
};
use agritwin_core::recommender::{recommend_top_k, CropClass, RecommendError, RecommendationModel};
use agritwin_core::simulation::{
    optimize_irrigation, simulate, CropParamsTable, IrrigationOptions, ScenarioSpec, SimError,
};
use agritwin_core::twin::{
    feature_vector, FeatureVector, FieldId, Payload, Reading, SnapshotPolicy, TwinError, TwinStore,
};

use crate::config::{report_path_for, AppConfig};
use crate::ServiceError;

/// Longest season the irrigation optimizer accepts over the API.
pub const MAX_OPTIMIZE_HORIZON: u32 = 180;
/// Largest `cap / quantum` ratio the optimizer accepts over the API.
pub const MAX_QUANTA_PER_DAY: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    pub fn ok(status: u16, data: impl Serialize) -> Self {
        match serde_json::to_value(data) {
            Ok(data) => Self { status, body: json!({ "ok": true, "data": data }) },
            Err(e) => Self::error(500, "SERIALIZATION", e.to_string()),
        }
    }

    pub fn error(status: u16, code: &str, message: impl Into<String>) -> Self {
        let message = message.into();
        let message = if message.is_empty() { code.to_lowercase() } else { message };
        Self { status, body: json!({ "ok": false, "error": { "code": code, "message": message } }) }
    }

    /// The `data` member of a success envelope.
    pub fn data(&self) -> Option<&Value> {
        self.body.get("data")
    }

    /// The `error.code` member of an error envelope.
    pub fn code(&self) -> Option<&str> {
        self.body.get("error")?.get("code")?.as_str()
    }
}

type Handled = Result<Response, Response>;

fn bad_request(code: &str, message: impl Into<String>) -> Response {
    Response::error(400, code, message)
}

fn ingest_error(e: &IngestError) -> Response {
    let code = match e {
        IngestError::OutOfRange { .. } => "OUT_OF_RANGE",
        IngestError::BadChecksum { .. } => "BAD_CHECKSUM",
        IngestError::MalformedSentence(_) | IngestError::NoFix => "BAD_SENTENCE",
        _ => "INVALID_READING",
    };
    bad_request(code, e.to_string())
}

fn twin_error(e: &TwinError) -> Response {
    match e {
        TwinError::Ingest(inner) => ingest_error(inner),
        TwinError::Validation(m) => bad_request("INVALID_READING", m.clone()),
        TwinError::Storage(m) => Response::error(500, "STORAGE", m.clone()),
        TwinError::NoData { .. } => Response::error(404, "NO_DATA", e.to_string()),
        TwinError::PartialData { .. } => Response::error(422, "INCOMPLETE_SNAPSHOT", e.to_string()),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8], schema_code: &str) -> Result<T, Response> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| bad_request("MALFORMED_JSON", e.to_string()))?;
    serde_json::from_value(value).map_err(|e| bad_request(schema_code, e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadingBody {
    #[serde(default)]
    field: Option<String>,
    ts: DateTime<Utc>,
    kind: String,
    payload: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SoilBody {
    n: f64,
    p: f64,
    k: f64,
    ph: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeatherBody {
    #[serde(default)]
    date: Option<NaiveDate>,
    temperature: f64,
    humidity: f64,
    rainfall: f64,
}

/// Either a coordinate pair or a raw NMEA GGA sentence.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GpsBody {
    #[serde(default)]
    latitude: Option<f64>,
    #[serde(default)]
    longitude: Option<f64>,
    #[serde(default)]
    sentence: Option<String>,
}

fn payload_from(kind: &str, raw: Value, ts: DateTime<Utc>) -> Result<Payload, Response> {
    let schema = |e: serde_json::Error| bad_request("INVALID_READING", e.to_string());
    Ok(match kind {
        "soil" => {
            let b: SoilBody = serde_json::from_value(raw).map_err(schema)?;
            Payload::Soil(SoilSample::new(b.n, b.p, b.k, b.ph).map_err(|e| ingest_error(&e))?)
        }
        "weather" => {
            let b: WeatherBody = serde_json::from_value(raw).map_err(schema)?;
            let date = b.date.unwrap_or_else(|| ts.date_naive());
            Payload::Weather(
                WeatherObservation::new(date, b.temperature, b.humidity, b.rainfall)
                    .map_err(|e| ingest_error(&e))?,
            )
        }
        "gps" => {
            let b: GpsBody = serde_json::from_value(raw).map_err(schema)?;
            let coord = match (b.latitude, b.longitude, b.sentence) {
                (Some(lat), Some(lon), None) => GeoCoordinate::new(lat, lon),
                (None, None, Some(sentence)) => parse_gps_sentence(&sentence),
                _ => {
                    return Err(bad_request(
                        "INVALID_READING",
                        "gps payload needs `latitude` and `longitude`, or `sentence`",
                    ))
                }
            };
            Payload::Gps(coord.map_err(|e| ingest_error(&e))?)
        }
        other => return Err(bad_request("INVALID_READING", format!("unknown kind `{other}`"))),
    })
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RecommendBody {
    #[serde(default)]
    field: Option<String>,
    #[serde(default)]
    date: Option<NaiveDate>,
    #[serde(default)]
    features: Option<Vec<f64>>,
    #[serde(default)]
    k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeBody {
    spec: ScenarioSpec,
    cap: f64,
    #[serde(default)]
    quantum: Option<f64>,
}

/// Range-checks a raw feature vector through the same constructors used for
/// sensor readings.
fn checked_features(values: &[f64]) -> Result<FeatureVector, Response> {
    let v = FeatureVector::try_from(values).map_err(|e| bad_request("SHAPE_MISMATCH", e.to_string()))?;
    let [n, p, k, temperature, humidity, ph, rainfall] = v.0;
    SoilSample::new(n, p, k, ph).map_err(|e| ingest_error(&e))?;
    WeatherObservation::new(NaiveDate::MIN, temperature, humidity, rainfall).map_err(|e| ingest_error(&e))?;
    Ok(v)
}

fn sim_error(e: &SimError) -> Response {
    match e {
        SimError::MissingParams(_) => Response::error(422, "MISSING_PARAMS", e.to_string()),
        SimError::Infeasible { .. } => Response::error(422, "INFEASIBLE", e.to_string()),
        _ => bad_request("INVALID_SPEC", e.to_string()),
    }
}

/// Shared state behind every endpoint. Reads never take a lock on the model
/// or parameter table; swaps replace them wholesale.
pub struct Api {
    store: TwinStore,
    model: ArcSwapOption<RecommendationModel>,
    report: ArcSwapOption<Value>,
    params: ArcSwap<CropParamsTable>,
    weather: Option<Arc<dyn WeatherProvider>>,
    model_path: Option<PathBuf>,
    default_top_k: usize,
    policy: SnapshotPolicy,
}

impl Api {
    pub fn new(store: TwinStore, params: CropParamsTable) -> Self {
        Self {
            store,
            model: ArcSwapOption::empty(),
            report: ArcSwapOption::empty(),
            params: ArcSwap::from_pointee(params),
            weather: None,
            model_path: None,
            default_top_k: 3,
            policy: SnapshotPolicy::default(),
        }
    }

    pub fn with_model(self, model: RecommendationModel) -> Self {
        self.model.store(Some(Arc::new(model)));
        self
    }

    pub fn with_weather(mut self, provider: Arc<dyn WeatherProvider>) -> Self {
        self.weather = Some(provider);
        self
    }

    /// File consulted by `POST /v1/model/reload`.
    pub fn with_model_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.model_path = Some(path.into());
        self
    }

    pub fn with_default_top_k(mut self, k: usize) -> Self {
        self.default_top_k = k;
        self
    }

    pub fn with_policy(mut self, policy: SnapshotPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Opens the store and loads everything the config names. A missing
    /// model file is not an error: recommendation requests answer 409 until
    /// one is loaded.
    pub fn from_config(config: &AppConfig) -> Result<Self, ServiceError> {
        let store = TwinStore::open(&config.store_path)?;
        let params = match &config.crop_params_path {
            Some(p) => CropParamsTable::from_path(p)?,
            None => CropParamsTable::builtin(),
        };
        let mut api = Api::new(store, params)
            .with_model_path(&config.model_path)
            .with_default_top_k(config.default_top_k)
            .with_policy(SnapshotPolicy { carry_forward: config.carry_forward });
        if let Some(p) = &config.weather_fixture_path {
            api = api.with_weather(Arc::new(ReplayProvider::from_path(p)?));
        }
        if config.model_path.exists() {
            api.reload_model()?;
        }
        Ok(api)
    }

    pub fn store(&self) -> &TwinStore {
        &self.store
    }

    pub fn model(&self) -> Option<Arc<RecommendationModel>> {
        self.model.load_full()
    }

    pub fn params(&self) -> Arc<CropParamsTable> {
        self.params.load_full()
    }

    pub fn set_model(&self, model: RecommendationModel, report: Option<Value>) {
        self.model.store(Some(Arc::new(model)));
        self.report.store(report.map(Arc::new));
    }

    pub fn set_params(&self, params: CropParamsTable) {
        self.params.store(Arc::new(params));
    }

    /// Re-reads the model file (and its report, if present) and swaps both in.
    /// On failure the current model stays in place.
    pub fn reload_model(&self) -> Result<(), ServiceError> {
        let path = self.model_path.as_ref().ok_or(ServiceError::NoModelPath)?;
        let model = RecommendationModel::load(path)?;
        let report = std::fs::read_to_string(report_path_for(path))
            .ok()
            .and_then(|t| serde_json::from_str::<Value>(&t).ok());
        self.set_model(model, report);
        Ok(())
    }

    /// Routes one request. `target` is the request path with optional query.
    pub fn handle(&self, method: &str, target: &str, body: &[u8]) -> Response {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
        let result = match (method, segments.as_slice()) {
            ("GET", ["v1", "healthz"]) => Ok(self.healthz()),
            ("POST", ["v1", "fields", id, "readings"]) => self.ingest(id, body),
            ("GET", ["v1", "fields", id, "snapshot"]) => self.snapshot(id, query),
            ("POST", ["v1", "recommendations"]) => self.recommend(body),
            ("POST", ["v1", "scenarios"]) => self.scenario(body),
            ("POST", ["v1", "irrigation", "optimize"]) => self.optimize(body),
            ("GET", ["v1", "metrics", "report"]) => self.metrics_report(),
            ("POST", ["v1", "model", "reload"]) => self.reload(),
            (_, ["v1", "healthz"])
            | (_, ["v1", "fields", _, "readings" | "snapshot"])
            | (_, ["v1", "recommendations" | "scenarios"])
            | (_, ["v1", "irrigation", "optimize"])
            | (_, ["v1", "metrics", "report"])
            | (_, ["v1", "model", "reload"]) => {
                Err(Response::error(405, "METHOD_NOT_ALLOWED", format!("{method} not allowed on {path}")))
            }
            _ => Err(Response::error(404, "NOT_FOUND", format!("no route for {path}"))),
        };
        result.unwrap_or_else(|e| e)
    }

    fn field_id(raw: &str) -> Result<FieldId, Response> {
        let decoded = percent_decode_str(raw)
            .decode_utf8()
            .map_err(|_| bad_request("BAD_FIELD", "field id is not valid UTF-8"))?;
        FieldId::new(decoded.into_owned()).map_err(|e| bad_request("BAD_FIELD", e.to_string()))
    }

    fn healthz(&self) -> Response {
        let model = self.model.load();
        Response::ok(
            200,
            json!({
                "status": "ok",
                "model_loaded": model.is_some(),
                "training_rows": model.as_ref().map(|m| m.metadata.training_rows),
                "fields": self.store.fields().len(),
                "crop_params": self.params.load().len(),
            }),
        )
    }

    fn ingest(&self, id: &str, body: &[u8]) -> Handled {
        let field = Self::field_id(id)?;
        let b: ReadingBody = parse_json(body, "INVALID_READING")?;
        if let Some(f) = &b.field {
            if f != field.as_str() {
                return Err(bad_request("FIELD_MISMATCH", format!("body names `{f}`, path names `{field}`")));
            }
        }
        let payload = payload_from(&b.kind, b.payload, b.ts)?;
        let reading = Reading::new(field, b.ts, payload).map_err(|e| twin_error(&e))?;
        let ack = self.store.ingest(reading).map_err(|e| twin_error(&e))?;
        Ok(Response::ok(202, ack))
    }

    fn snapshot(&self, id: &str, query: &str) -> Handled {
        let field = Self::field_id(id)?;
        let date = form_urlencoded::parse(query.as_bytes())
            .find(|(k, _)| k == "date")
            .map(|(_, v)| v.into_owned())
            .ok_or_else(|| bad_request("MISSING_DATE", "query parameter `date` is required"))?;
        let date: NaiveDate =
            date.parse().map_err(|_| bad_request("BAD_DATE", format!("`{date}` is not YYYY-MM-DD")))?;
        if !self.store.has_field(&field) {
            return Err(Response::error(404, "UNKNOWN_FIELD", format!("no readings for field `{field}`")));
        }
        let snap = self
            .store
            .snapshot_with_fallback(&field, date, self.policy, self.weather.as_deref())
            .map_err(|e| twin_error(&e))?;
        Ok(Response::ok(200, snap))
    }

    fn recommend(&self, body: &[u8]) -> Handled {
        let value: Value =
            serde_json::from_slice(body).map_err(|e| bad_request("MALFORMED_JSON", e.to_string()))?;
        let schema = |e: serde_json::Error| bad_request("INVALID_REQUEST", e.to_string());
        // a bare array is shorthand for `{"features": [...]}`
        let b: RecommendBody = if value.is_array() {
            RecommendBody {
                features: Some(serde_json::from_value(value).map_err(schema)?),
                ..Default::default()
            }
        } else {
            serde_json::from_value(value).map_err(schema)?
        };
        let RecommendBody { field, date, features, k } = b;
        let k = k.unwrap_or(self.default_top_k);
        if k == 0 || k > CropClass::COUNT {
            return Err(bad_request("BAD_K", format!("k must lie in 1..={}, got {k}", CropClass::COUNT)));
        }
        let vector = match (field, features) {
            (Some(_), Some(_)) => {
                return Err(bad_request("INVALID_REQUEST", "give either `field` or `features`, not both"))
            }
            (None, None) => return Err(bad_request("INVALID_REQUEST", "`field` or `features` is required")),
            (None, Some(values)) => checked_features(&values)?,
            (Some(id), None) => {
                let field = FieldId::new(id).map_err(|e| bad_request("BAD_FIELD", e.to_string()))?;
                let date =
                    date.ok_or_else(|| bad_request("MISSING_DATE", "`date` is required with `field`"))?;
                if !self.store.has_field(&field) {
                    return Err(Response::error(
                        404,
                        "UNKNOWN_FIELD",
                        format!("no readings for field `{field}`"),
                    ));
                }
                let snap = self
                    .store
                    .snapshot_with_fallback(&field, date, self.policy, self.weather.as_deref())
                    .map_err(|e| match e {
                        TwinError::NoData { .. } | TwinError::PartialData { .. } => {
                            Response::error(422, "INCOMPLETE_SNAPSHOT", e.to_string())
                        }
                        other => twin_error(&other),
                    })?;
                feature_vector(&snap)
            }
        };
        let model = self
            .model
            .load_full()
            .ok_or_else(|| Response::error(409, "NO_MODEL", "no recommendation model is loaded"))?;
        let rec = recommend_top_k(&model, &vector, k).map_err(|e| match e {
            RecommendError::BadK(k) => bad_request("BAD_K", format!("bad k {k}")),
            other => Response::error(500, "RECOMMEND", other.to_string()),
        })?;
        Ok(Response::ok(200, rec))
    }

    fn scenario(&self, body: &[u8]) -> Handled {
        let spec: ScenarioSpec = parse_json(body, "INVALID_SPEC")?;
        spec.validate().map_err(|e| sim_error(&e))?;
        let params = self.params.load();
        let crop = params.get(spec.crop).map_err(|e| sim_error(&e))?;
        let result = simulate(&spec, crop).map_err(|e| sim_error(&e))?;
        Ok(Response::ok(200, json!({ "spec": spec, "result": result })))
    }

    fn optimize(&self, body: &[u8]) -> Handled {
        let OptimizeBody { mut spec, cap, quantum } = parse_json(body, "INVALID_SPEC")?;
        let options =
            IrrigationOptions { cap, quantum: quantum.unwrap_or(IrrigationOptions::new(cap).quantum) };
        spec.validate().map_err(|e| sim_error(&e))?;
        if spec.horizon > MAX_OPTIMIZE_HORIZON {
            return Err(bad_request(
                "INVALID_SPEC",
                format!("optimization horizon is limited to {MAX_OPTIMIZE_HORIZON} days"),
            ));
        }
        if !(options.cap / options.quantum <= MAX_QUANTA_PER_DAY) {
            return Err(bad_request(
                "INVALID_SPEC",
                format!("cap / quantum is limited to {MAX_QUANTA_PER_DAY}"),
            ));
        }
        let params = self.params.load();
        let crop = params.get(spec.crop).map_err(|e| sim_error(&e))?;
        let plan = optimize_irrigation(&spec, crop, options).map_err(|e| sim_error(&e))?;
        spec.irrigation = Some(plan.clone());
        let result = simulate(&spec, crop).map_err(|e| sim_error(&e))?;
        Ok(Response::ok(200, json!({ "plan": plan, "result": result })))
    }

    fn metrics_report(&self) -> Handled {
        match self.report.load_full() {
            Some(report) => Ok(Response::ok(200, &*report)),
            None => Err(Response::error(404, "NO_REPORT", "no evaluation report is loaded")),
        }
    }

    fn reload(&self) -> Handled {
        match self.reload_model() {
            Ok(()) => Ok(self.healthz()),
            Err(ServiceError::NoModelPath) => {
                Err(Response::error(409, "NO_MODEL_PATH", "no model path is configured"))
            }
            Err(e) => Err(Response::error(500, "MODEL_LOAD", e.to_string())),
        }
    }
}
