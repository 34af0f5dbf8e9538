//! Per-field digital twin state.
//!
//! Readings are appended to one newline-delimited JSON log per field and
//! replayed into an in-memory index when the store is opened. A snapshot fuses
//! all readings of one UTC calendar day into a [`FieldSnapshot`]: each channel
//! is the arithmetic mean of that day's readings after outlier rejection.
//!
//! Writers are serialized by the store; readers work on a consistent prefix
//! of each field's log.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingestion::{GeoCoordinate, IngestError, SoilSample, WeatherObservation, WeatherProvider};

/// Minimum number of same-day readings before outlier rejection applies.
pub const OUTLIER_MIN_READINGS: usize = 4;
/// Rejection radius, in sample standard deviations.
pub const OUTLIER_SIGMAS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum TwinError {
    #[error("invalid reading: {0}")]
    Validation(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("no readings for field `{field}` on {date}")]
    NoData { field: FieldId, date: NaiveDate },
    #[error("field `{field}` has no {missing} reading on {date}")]
    PartialData { field: FieldId, date: NaiveDate, missing: &'static str },
}

impl From<std::io::Error> for TwinError {
    fn from(e: std::io::Error) -> Self {
        TwinError::Storage(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FieldId(String);

impl FieldId {
    pub fn new(id: impl Into<String>) -> Result<Self, TwinError> {
        let id = id.into();
        if id.is_empty() {
            return Err(TwinError::Validation("field id must be non-empty".into()));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// File-system safe encoding of the id.
    fn file_stem(&self) -> String {
        let mut out = String::with_capacity(self.0.len());
        for b in self.0.bytes() {
            if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
                out.push(b as char);
            } else {
                out.push_str(&format!("%{b:02X}"));
            }
        }
        out
    }
}

impl TryFrom<String> for FieldId {
    type Error = TwinError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        FieldId::new(s)
    }
}

impl From<FieldId> for String {
    fn from(id: FieldId) -> Self {
        id.0
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum Payload {
    Soil(SoilSample),
    Weather(WeatherObservation),
    Gps(GeoCoordinate),
}

/// One time-stamped observation for a field. Serializes to the record-log
/// line format `{"field":…,"ts":…,"kind":…,"payload":{…}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub field: FieldId,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Reading {
    pub fn new(field: FieldId, ts: DateTime<Utc>, payload: Payload) -> Result<Self, TwinError> {
        let reading = Self { field, ts, payload };
        reading.validate()?;
        Ok(reading)
    }

    /// Aggregation day of the reading.
    pub fn day(&self) -> NaiveDate {
        self.ts.date_naive()
    }

    fn validate(&self) -> Result<(), TwinError> {
        match &self.payload {
            Payload::Soil(s) => {
                SoilSample::new(s.n, s.p, s.k, s.ph)?;
            }
            Payload::Weather(w) => {
                WeatherObservation::new(w.date, w.temperature, w.humidity, w.rainfall)?;
                if w.date != self.day() {
                    return Err(TwinError::Validation(format!(
                        "weather observation dated {} recorded on {}",
                        w.date,
                        self.day()
                    )));
                }
            }
            Payload::Gps(g) => {
                GeoCoordinate::new(g.latitude, g.longitude)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub field: FieldId,
    /// 1-based position of the reading in the field's log.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub field: FieldId,
    pub date: NaiveDate,
    pub soil: SoilSample,
    pub weather: WeatherObservation,
    pub location: Option<GeoCoordinate>,
}

pub const FEATURE_NAMES: [&str; 7] = ["n", "p", "k", "temperature", "humidity", "ph", "rainfall"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("expected {expected} features, got {got}")]
pub struct ShapeMismatch {
    pub expected: usize,
    pub got: usize,
}

/// Model input in fixed order: n, p, k, temperature, humidity, ph, rainfall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(pub [f64; 7]);

impl FeatureVector {
    pub const LEN: usize = 7;

    pub fn index_of(name: &str) -> Option<usize> {
        FEATURE_NAMES.iter().position(|f| f.eq_ignore_ascii_case(name))
    }

    pub fn as_array(&self) -> &[f64; 7] {
        &self.0
    }
}

impl TryFrom<&[f64]> for FeatureVector {
    type Error = ShapeMismatch;
    fn try_from(values: &[f64]) -> Result<Self, Self::Error> {
        let arr: [f64; 7] =
            values.try_into().map_err(|_| ShapeMismatch { expected: Self::LEN, got: values.len() })?;
        Ok(Self(arr))
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = ShapeMismatch;
    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::try_from(values.as_slice())
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0.to_vec()
    }
}

pub fn feature_vector(snap: &FieldSnapshot) -> FeatureVector {
    let s = &snap.soil;
    let w = &snap.weather;
    FeatureVector([s.n, s.p, s.k, w.temperature, w.humidity, s.ph, w.rainfall])
}

/// What to do when a day has soil but no weather readings (or vice versa).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotPolicy {
    /// Fill a missing source from the most recent earlier day that has it.
    pub carry_forward: bool,
}

/// Mean of `values` after leave-one-out outlier rejection: with at least
/// [`OUTLIER_MIN_READINGS`] values, a value is dropped when it lies more than
/// [`OUTLIER_SIGMAS`] sample standard deviations from the mean of the others.
pub fn fuse_channel(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    if values.len() < OUTLIER_MIN_READINGS {
        return mean(values);
    }
    let kept: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|&(i, &v)| {
            let others: Vec<f64> =
                values.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
            let m = mean(&others);
            let sd = sample_std(&others, m);
            (v - m).abs() <= OUTLIER_SIGMAS * sd
        })
        .map(|(_, &v)| v)
        .collect();
    if kept.is_empty() {
        mean(values)
    } else {
        mean(&kept)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64], m: f64) -> f64 {
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Default)]
struct FieldLog {
    readings: Vec<Reading>,
}

impl FieldLog {
    fn day<'a>(&'a self, date: NaiveDate) -> impl Iterator<Item = &'a Reading> + 'a {
        self.readings.iter().filter(move |r| r.day() == date)
    }

    fn fused_soil(&self, date: NaiveDate) -> Option<SoilSample> {
        let soil: Vec<&SoilSample> = self
            .day(date)
            .filter_map(|r| match &r.payload {
                Payload::Soil(s) => Some(s),
                _ => None,
            })
            .collect();
        if soil.is_empty() {
            return None;
        }
        let ch = |f: fn(&SoilSample) -> f64| fuse_channel(&soil.iter().map(|s| f(s)).collect::<Vec<_>>());
        Some(SoilSample { n: ch(|s| s.n), p: ch(|s| s.p), k: ch(|s| s.k), ph: ch(|s| s.ph) })
    }

    fn fused_weather(&self, date: NaiveDate) -> Option<WeatherObservation> {
        let obs: Vec<&WeatherObservation> = self
            .day(date)
            .filter_map(|r| match &r.payload {
                Payload::Weather(w) => Some(w),
                _ => None,
            })
            .collect();
        if obs.is_empty() {
            return None;
        }
        let ch =
            |f: fn(&WeatherObservation) -> f64| fuse_channel(&obs.iter().map(|w| f(w)).collect::<Vec<_>>());
        Some(WeatherObservation {
            date,
            temperature: ch(|w| w.temperature),
            humidity: ch(|w| w.humidity),
            rainfall: ch(|w| w.rainfall),
        })
    }

    fn latest_prior<T>(&self, date: NaiveDate, fuse: impl Fn(&Self, NaiveDate) -> Option<T>) -> Option<T> {
        let mut days: Vec<NaiveDate> = self.readings.iter().map(Reading::day).filter(|d| *d < date).collect();
        days.sort_unstable();
        days.dedup();
        days.into_iter().rev().find_map(|d| fuse(self, d))
    }

    fn location(&self, date: NaiveDate) -> Option<GeoCoordinate> {
        self.readings
            .iter()
            .filter(|r| r.day() <= date)
            .filter_map(|r| match &r.payload {
                Payload::Gps(g) => Some((r.ts, *g)),
                _ => None,
            })
            // latest timestamp wins; ties go to the later log entry
            .fold(None, |best: Option<(DateTime<Utc>, GeoCoordinate)>, cur| match best {
                Some(b) if b.0 > cur.0 => Some(b),
                _ => Some(cur),
            })
            .map(|(_, g)| g)
    }
}

/// Append-only reading store. `dir == None` keeps everything in memory.
#[derive(Debug)]
pub struct TwinStore {
    dir: Option<PathBuf>,
    index: RwLock<HashMap<FieldId, FieldLog>>,
    writer: Mutex<()>,
}

impl TwinStore {
    pub fn in_memory() -> Self {
        Self { dir: None, index: RwLock::default(), writer: Mutex::new(()) }
    }

    /// Opens (creating if needed) a store rooted at `dir` and replays its logs.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, TwinError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut logs: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        let mut index = HashMap::new();
        for path in logs {
            let mut log = FieldLog::default();
            let file = BufReader::new(File::open(&path)?);
            for (lineno, line) in file.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let reading: Reading = serde_json::from_str(&line)
                    .map_err(|e| TwinError::Storage(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
                log.readings.push(reading);
            }
            if let Some(first) = log.readings.first() {
                index.insert(first.field.clone(), log);
            }
        }
        Ok(Self { dir: Some(dir), index: RwLock::new(index), writer: Mutex::new(()) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn ingest(&self, reading: Reading) -> Result<Ack, TwinError> {
        reading.validate()?;
        let _guard = self.writer.lock().map_err(|_| TwinError::Storage("writer poisoned".into()))?;
        if let Some(dir) = &self.dir {
            let mut line = serde_json::to_string(&reading).map_err(|e| TwinError::Storage(e.to_string()))?;
            line.push('\n');
            let path = dir.join(format!("{}.jsonl", reading.field.file_stem()));
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        let mut index = self.index.write().map_err(|_| TwinError::Storage("index poisoned".into()))?;
        let log = index.entry(reading.field.clone()).or_default();
        let field = reading.field.clone();
        log.readings.push(reading);
        Ok(Ack { field, seq: log.readings.len() as u64 })
    }

    pub fn has_field(&self, field: &FieldId) -> bool {
        self.index.read().map(|i| i.contains_key(field)).unwrap_or(false)
    }

    pub fn reading_count(&self, field: &FieldId) -> usize {
        self.index.read().ok().and_then(|i| i.get(field).map(|l| l.readings.len())).unwrap_or(0)
    }

    pub fn readings(&self, field: &FieldId) -> Vec<Reading> {
        self.index.read().ok().and_then(|i| i.get(field).map(|l| l.readings.clone())).unwrap_or_default()
    }

    pub fn snapshot(
        &self,
        field: &FieldId,
        date: NaiveDate,
        policy: SnapshotPolicy,
    ) -> Result<FieldSnapshot, TwinError> {
        self.snapshot_with_fallback(field, date, policy, None)
    }

    /// Like [`TwinStore::snapshot`], but a day without weather readings is
    /// filled from `fallback` (queried at the field's latest fix) before the
    /// policy is consulted.
    pub fn snapshot_with_fallback(
        &self,
        field: &FieldId,
        date: NaiveDate,
        policy: SnapshotPolicy,
        fallback: Option<&dyn WeatherProvider>,
    ) -> Result<FieldSnapshot, TwinError> {
        let index = self.index.read().map_err(|_| TwinError::Storage("index poisoned".into()))?;
        let no_data = || TwinError::NoData { field: field.clone(), date };
        let log = index.get(field).ok_or_else(no_data)?;
        if log.day(date).next().is_none() {
            return Err(no_data());
        }
        let location = log.location(date);

        let mut soil = log.fused_soil(date);
        let mut weather = log.fused_weather(date);
        if weather.is_none() {
            if let Some(provider) = fallback {
                let at = location.unwrap_or(GeoCoordinate { latitude: 0.0, longitude: 0.0 });
                weather = provider.observe(&at, date).ok();
            }
        }
        if policy.carry_forward {
            if soil.is_none() {
                soil = log.latest_prior(date, FieldLog::fused_soil);
            }
            if weather.is_none() {
                weather =
                    log.latest_prior(date, FieldLog::fused_weather).map(|w| WeatherObservation { date, ..w });
            }
        }
        let partial = |missing| TwinError::PartialData { field: field.clone(), date, missing };
        Ok(FieldSnapshot {
            field: field.clone(),
            date,
            soil: soil.ok_or_else(|| partial("soil"))?,
            weather: weather.ok_or_else(|| partial("weather"))?,
            location,
        })
    }

    /// Loads `date,n,p,k,temperature,humidity,ph,rainfall` rows as one soil
    /// and one weather reading per row, stamped at midnight UTC.
    pub fn ingest_csv<R: Read>(&self, field: &FieldId, reader: R) -> Result<usize, TwinError> {
        #[derive(Deserialize)]
        struct Row {
            date: NaiveDate,
            n: f64,
            p: f64,
            k: f64,
            temperature: f64,
            humidity: f64,
            ph: f64,
            rainfall: f64,
        }
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for row in csv.deserialize::<Row>() {
            let row = row.map_err(|e| TwinError::Validation(e.to_string()))?;
            let ts = row.date.and_time(NaiveTime::MIN).and_utc();
            let soil = SoilSample::new(row.n, row.p, row.k, row.ph)?;
            let weather = WeatherObservation::new(row.date, row.temperature, row.humidity, row.rainfall)?;
            rows.push(Reading::new(field.clone(), ts, Payload::Soil(soil))?);
            rows.push(Reading::new(field.clone(), ts, Payload::Weather(weather))?);
        }
        // validate everything before the first append
        let count = rows.len();
        for r in rows {
            self.ingest(r)?;
        }
        Ok(count)
    }

    pub fn fields(&self) -> Vec<FieldId> {
        let mut ids: Vec<FieldId> =
            self.index.read().map(|i| i.keys().cloned().collect()).unwrap_or_default();
        ids.sort();
        ids
    }

    /// Days on which the field has any reading, ascending.
    pub fn days(&self, field: &FieldId) -> Vec<NaiveDate> {
        let days: BTreeMap<NaiveDate, ()> = self.readings(field).iter().map(|r| (r.day(), ())).collect();
        days.into_keys().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn fid(s: &str) -> FieldId {
        FieldId::new(s).unwrap()
    }

    fn ts(day: u32, hour: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, day, hour, 0, 0).unwrap()
    }

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, day).unwrap()
    }

    fn soil(n: f64) -> Payload {
        Payload::Soil(SoilSample::new(n, 40.0, 40.0, 6.5).unwrap())
    }

    fn weather(day: u32) -> Payload {
        Payload::Weather(WeatherObservation::new(d(day), 25.0, 82.0, 200.0).unwrap())
    }

    fn put(store: &TwinStore, field: &str, day: u32, hour: u32, p: Payload) -> Ack {
        store.ingest(Reading::new(fid(field), ts(day, hour), p).unwrap()).unwrap()
    }

    #[test]
    fn single_reading_identity() {
        let store = TwinStore::in_memory();
        put(&store, "f1", 1, 6, soil(90.0));
        put(&store, "f1", 1, 6, weather(1));
        let snap = store.snapshot(&fid("f1"), d(1), SnapshotPolicy::default()).unwrap();
        assert_eq!(snap.soil, SoilSample { n: 90.0, p: 40.0, k: 40.0, ph: 6.5 });
        assert_eq!(feature_vector(&snap).0, [90.0, 40.0, 40.0, 25.0, 82.0, 6.5, 200.0]);
    }

    #[test]
    fn empty_field_id_rejected() {
        assert!(matches!(FieldId::new(""), Err(TwinError::Validation(_))));
        let r: Result<Reading, _> = serde_json::from_str(
            r#"{"field":"","ts":"2024-01-01T00:00:00Z","kind":"gps","payload":{"latitude":1,"longitude":2}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn duplicate_payloads_both_kept() {
        let store = TwinStore::in_memory();
        put(&store, "f1", 1, 6, soil(90.0));
        let ack = put(&store, "f1", 1, 7, soil(90.0));
        assert_eq!(ack.seq, 2);
        assert_eq!(store.reading_count(&fid("f1")), 2);
    }

    #[test]
    fn mean_of_two() {
        let store = TwinStore::in_memory();
        put(&store, "f", 1, 1, soil(80.0));
        put(&store, "f", 1, 2, soil(100.0));
        put(&store, "f", 1, 2, weather(1));
        let snap = store.snapshot(&fid("f"), d(1), SnapshotPolicy::default()).unwrap();
        assert_eq!(snap.soil.n, 90.0);
    }

    #[test]
    fn outlier_rejected() {
        let store = TwinStore::in_memory();
        for (h, n) in [90.0, 90.0, 90.0, 90.0, 900.0].into_iter().enumerate() {
            put(&store, "f", 1, h as u32, soil(n));
        }
        put(&store, "f", 1, 9, weather(1));
        let snap = store.snapshot(&fid("f"), d(1), SnapshotPolicy::default()).unwrap();
        assert_eq!(snap.soil.n, 90.0);
    }

    #[test]
    fn fusion_rule_by_hand() {
        // fewer than four readings: no rejection even for wild values
        assert_eq!(fuse_channel(&[1.0, 2.0, 1000.0]), 1003.0 / 3.0);
        // moderate spread survives
        assert_eq!(fuse_channel(&[10.0, 12.0, 11.0, 13.0]), 11.5);
    }

    #[test]
    fn missing_data_errors() {
        let store = TwinStore::in_memory();
        assert!(matches!(
            store.snapshot(&fid("nope"), d(1), SnapshotPolicy::default()),
            Err(TwinError::NoData { .. })
        ));
        put(&store, "f", 1, 1, soil(80.0));
        assert!(matches!(
            store.snapshot(&fid("f"), d(1), SnapshotPolicy::default()),
            Err(TwinError::PartialData { missing: "weather", .. })
        ));
        assert!(matches!(
            store.snapshot(&fid("f"), d(2), SnapshotPolicy::default()),
            Err(TwinError::NoData { .. })
        ));
    }

    #[test]
    fn carry_forward_fills_missing_source() {
        let store = TwinStore::in_memory();
        put(&store, "f", 1, 1, soil(80.0));
        put(&store, "f", 1, 1, weather(1));
        put(&store, "f", 3, 1, soil(60.0));
        let policy = SnapshotPolicy { carry_forward: true };
        let snap = store.snapshot(&fid("f"), d(3), policy).unwrap();
        assert_eq!(snap.soil.n, 60.0);
        assert_eq!(snap.weather.date, d(3));
        assert_eq!(snap.weather.rainfall, 200.0);
    }

    #[test]
    fn location_is_latest_fix_on_or_before() {
        let store = TwinStore::in_memory();
        let g = |lat| Payload::Gps(GeoCoordinate::new(lat, 85.0).unwrap());
        put(&store, "f", 1, 1, g(10.0));
        put(&store, "f", 2, 1, g(11.0));
        put(&store, "f", 4, 1, g(12.0));
        put(&store, "f", 3, 1, soil(1.0));
        put(&store, "f", 3, 1, weather(3));
        let snap = store.snapshot(&fid("f"), d(3), SnapshotPolicy::default()).unwrap();
        assert_eq!(snap.location.unwrap().latitude, 11.0);
    }

    #[test]
    fn weather_date_must_match_reading_day() {
        let r = Reading::new(fid("f"), ts(2, 0), weather(1));
        assert!(matches!(r, Err(TwinError::Validation(_))));
    }

    #[test]
    fn record_line_format() {
        let r = Reading::new(fid("f1"), ts(1, 0), soil(90.0)).unwrap();
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(
            line,
            r#"{"field":"f1","ts":"2024-01-01T00:00:00Z","kind":"soil","payload":{"n":90.0,"p":40.0,"k":40.0,"ph":6.5}}"#
        );
        assert_eq!(serde_json::from_str::<Reading>(&line).unwrap(), r);
    }

    #[test]
    fn feature_vector_examples() {
        let snap = FieldSnapshot {
            field: fid("f"),
            date: d(1),
            soil: SoilSample::new(0.0, 0.0, 0.0, 7.0).unwrap(),
            weather: WeatherObservation::new(d(1), 0.0, 0.0, 0.0).unwrap(),
            location: None,
        };
        assert_eq!(feature_vector(&snap).0, [0.0, 0.0, 0.0, 0.0, 0.0, 7.0, 0.0]);
        assert_eq!(FeatureVector::try_from(&[1.0, 2.0][..]), Err(ShapeMismatch { expected: 7, got: 2 }));
    }

    #[test]
    fn bulk_csv() {
        let store = TwinStore::in_memory();
        let csv = "date,n,p,k,temperature,humidity,ph,rainfall\n2024-01-01,90,40,40,25,82,6.5,200\n";
        assert_eq!(store.ingest_csv(&fid("f"), csv.as_bytes()).unwrap(), 2);
        let snap = store.snapshot(&fid("f"), d(1), SnapshotPolicy::default()).unwrap();
        assert_eq!(feature_vector(&snap).0, [90.0, 40.0, 40.0, 25.0, 82.0, 6.5, 200.0]);
        let bad = "date,n,p,k,temperature,humidity,ph,rainfall\n2024-01-01,90,40,40,25,82,16,200\n";
        assert!(store.ingest_csv(&fid("g"), bad.as_bytes()).is_err());
        assert!(!store.has_field(&fid("g")));
    }

    #[test]
    fn odd_field_ids_get_safe_file_names() {
        let dir = tempfile::tempdir().unwrap();
        let store = TwinStore::open(dir.path()).unwrap();
        put(&store, "north/plot 7", 1, 0, soil(5.0));
        drop(store);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("north%2Fplot%207.jsonl")]);
        let store = TwinStore::open(dir.path()).unwrap();
        assert_eq!(store.fields(), vec![fid("north/plot 7")]);
    }

    proptest! {
        #[test]
        fn fused_value_within_range(values in prop::collection::vec(0f64..1000.0, 1..12)) {
            let fused = fuse_channel(&values);
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(fused >= lo - 1e-9 && fused <= hi + 1e-9);
        }
    }
}
