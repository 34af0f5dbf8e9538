//! Raw input acquisition: NPK/pH sensor frames, NMEA GGA position fixes and
//! weather observations from pluggable providers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative sensor accuracy, as a fraction of full scale.
pub const FULL_SCALE_PRECISION: f64 = 0.02;

/// Channels a soil frame must carry.
pub const SOIL_CHANNELS: [&str; 4] = ["n", "p", "k", "ph"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    #[error("channel `{channel}` has no full-scale entry")]
    MissingFullScale { channel: String },
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("full scale must be positive, got {0}")]
    NonPositiveFullScale(f64),
    #[error("bad checksum: expected {expected:02X}, found {found:02X}")]
    BadChecksum { expected: u8, found: u8 },
    #[error("malformed sentence: {0}")]
    MalformedSentence(String),
    #[error("GGA sentence reports no fix")]
    NoFix,
    #[error("no observation available for {0}")]
    NotAvailable(NaiveDate),
    #[error("weather provider failure: {0}")]
    ProviderFailure(String),
}

fn check_finite(field: &'static str, value: f64) -> Result<f64, IngestError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(IngestError::OutOfRange { field, value })
    }
}

/// Soil nutrient indices (dataset integer scale) and acidity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSoil")]
pub struct SoilSample {
    pub n: f64,
    pub p: f64,
    pub k: f64,
    pub ph: f64,
}

#[derive(Deserialize)]
struct RawSoil {
    n: f64,
    p: f64,
    k: f64,
    ph: f64,
}

impl TryFrom<RawSoil> for SoilSample {
    type Error = IngestError;
    fn try_from(raw: RawSoil) -> Result<Self, Self::Error> {
        SoilSample::new(raw.n, raw.p, raw.k, raw.ph)
    }
}

impl SoilSample {
    pub fn new(n: f64, p: f64, k: f64, ph: f64) -> Result<Self, IngestError> {
        for (field, value) in [("n", n), ("p", p), ("k", k)] {
            if check_finite(field, value)? < 0.0 {
                return Err(IngestError::OutOfRange { field, value });
            }
        }
        if !(0.0..=14.0).contains(&check_finite("ph", ph)?) {
            return Err(IngestError::OutOfRange { field: "ph", value: ph });
        }
        Ok(Self { n, p, k, ph })
    }
}

/// One day of weather at a site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeather")]
pub struct WeatherObservation {
    pub date: NaiveDate,
    /// Degrees Celsius.
    pub temperature: f64,
    /// Relative humidity, percent.
    pub humidity: f64,
    /// Millimetres.
    pub rainfall: f64,
}

#[derive(Deserialize)]
struct RawWeather {
    date: NaiveDate,
    temperature: f64,
    humidity: f64,
    rainfall: f64,
}

impl TryFrom<RawWeather> for WeatherObservation {
    type Error = IngestError;
    fn try_from(raw: RawWeather) -> Result<Self, Self::Error> {
        WeatherObservation::new(raw.date, raw.temperature, raw.humidity, raw.rainfall)
    }
}

impl WeatherObservation {
    pub fn new(date: NaiveDate, temperature: f64, humidity: f64, rainfall: f64) -> Result<Self, IngestError> {
        check_finite("temperature", temperature)?;
        if !(0.0..=100.0).contains(&check_finite("humidity", humidity)?) {
            return Err(IngestError::OutOfRange { field: "humidity", value: humidity });
        }
        if check_finite("rainfall", rainfall)? < 0.0 {
            return Err(IngestError::OutOfRange { field: "rainfall", value: rainfall });
        }
        Ok(Self { date, temperature, humidity, rainfall })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoordinate")]
pub struct GeoCoordinate {
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Deserialize)]
struct RawCoordinate {
    latitude: f64,
    longitude: f64,
}

impl TryFrom<RawCoordinate> for GeoCoordinate {
    type Error = IngestError;
    fn try_from(raw: RawCoordinate) -> Result<Self, Self::Error> {
        GeoCoordinate::new(raw.latitude, raw.longitude)
    }
}

impl GeoCoordinate {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, IngestError> {
        if !(-90.0..=90.0).contains(&check_finite("latitude", latitude)?) {
            return Err(IngestError::OutOfRange { field: "latitude", value: latitude });
        }
        if !(-180.0..=180.0).contains(&check_finite("longitude", longitude)?) {
            return Err(IngestError::OutOfRange { field: "longitude", value: longitude });
        }
        Ok(Self { latitude, longitude })
    }
}

/// A raw multi-channel reading as delivered by a sensor, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub sensor_id: String,
    pub timestamp: DateTime<Utc>,
    pub values: BTreeMap<String, f64>,
    pub full_scale: BTreeMap<String, f64>,
}

impl SensorFrame {
    pub fn new(
        sensor_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        values: BTreeMap<String, f64>,
        full_scale: BTreeMap<String, f64>,
    ) -> Result<Self, IngestError> {
        for channel in values.keys() {
            match full_scale.get(channel) {
                None => return Err(IngestError::MissingFullScale { channel: channel.clone() }),
                Some(&fs) if !(fs > 0.0) || !fs.is_finite() => {
                    return Err(IngestError::NonPositiveFullScale(fs))
                }
                Some(_) => {}
            }
        }
        Ok(Self { sensor_id: sensor_id.into(), timestamp, values, full_scale })
    }

    fn channel(&self, name: &str) -> Result<f64, IngestError> {
        self.values.get(name).copied().ok_or_else(|| IngestError::MissingChannel(name.to_string()))
    }

    /// Accuracy bounds of one channel.
    pub fn interval(&self, name: &str) -> Result<PrecisionInterval, IngestError> {
        let value = self.channel(name)?;
        let fs = self
            .full_scale
            .get(name)
            .copied()
            .ok_or_else(|| IngestError::MissingFullScale { channel: name.to_string() })?;
        precision_interval(value, fs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionInterval {
    pub low: f64,
    pub high: f64,
}

impl PrecisionInterval {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.low..=self.high).contains(&value)
    }
}

/// Bounds of the true value given a reading and the channel's full scale.
pub fn precision_interval(value: f64, full_scale: f64) -> Result<PrecisionInterval, IngestError> {
    if !(full_scale > 0.0) || !full_scale.is_finite() {
        return Err(IngestError::NonPositiveFullScale(full_scale));
    }
    let half = FULL_SCALE_PRECISION * full_scale;
    Ok(PrecisionInterval { low: value - half, high: value + half })
}

pub fn decode_npk_frame(frame: &SensorFrame) -> Result<SoilSample, IngestError> {
    SoilSample::new(frame.channel("n")?, frame.channel("p")?, frame.channel("k")?, frame.channel("ph")?)
}

/// Replaces every channel value with a uniform draw from its precision
/// interval. Used to give simulated sensors realistic error.
pub fn inject_noise<R: Rng + ?Sized>(frame: &SensorFrame, rng: &mut R) -> Result<SensorFrame, IngestError> {
    let mut noisy = frame.clone();
    for (channel, value) in noisy.values.iter_mut() {
        let interval = frame.interval(channel)?;
        *value = rng.gen_range(interval.low..=interval.high);
    }
    Ok(noisy)
}

// ---------------------------------------------------------------------------
// NMEA-0183 GGA
// ---------------------------------------------------------------------------

/// XOR of every byte between `$` and `*`.
pub fn nmea_checksum(body: &str) -> u8 {
    body.bytes().fold(0, |acc, b| acc ^ b)
}

fn parse_ddmm(field: &str, degree_digits: usize) -> Result<f64, IngestError> {
    let malformed = || IngestError::MalformedSentence(format!("bad coordinate `{field}`"));
    if field.len() < degree_digits + 2 || !field.is_ascii() {
        return Err(malformed());
    }
    let (deg, min) = field.split_at(degree_digits);
    if !deg.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    let deg: f64 = deg.parse().map_err(|_| malformed())?;
    let min: f64 = min.parse().map_err(|_| malformed())?;
    if !(0.0..60.0).contains(&min) {
        return Err(malformed());
    }
    Ok(deg + min / 60.0)
}

/// Decodes position from a `$xxGGA` sentence, verifying its checksum.
pub fn parse_gps_sentence(sentence: &str) -> Result<GeoCoordinate, IngestError> {
    let line = sentence.trim_end_matches(['\r', '\n']);
    if line.contains(['\r', '\n']) {
        return Err(IngestError::MalformedSentence("more than one line".into()));
    }
    let rest = line.strip_prefix('$').ok_or_else(|| IngestError::MalformedSentence("missing `$`".into()))?;
    let (body, checksum) =
        rest.split_once('*').ok_or_else(|| IngestError::MalformedSentence("missing checksum".into()))?;
    if checksum.len() != 2 {
        return Err(IngestError::MalformedSentence("checksum must be two hex digits".into()));
    }
    let found = u8::from_str_radix(checksum, 16)
        .map_err(|_| IngestError::MalformedSentence("checksum is not hex".into()))?;
    let expected = nmea_checksum(body);
    if expected != found {
        return Err(IngestError::BadChecksum { expected, found });
    }

    let fields: Vec<&str> = body.split(',').collect();
    if fields[0].len() != 5 || !fields[0].ends_with("GGA") {
        return Err(IngestError::MalformedSentence(format!("not a GGA sentence: `{}`", fields[0])));
    }
    if fields.len() < 7 {
        return Err(IngestError::MalformedSentence("too few fields".into()));
    }
    match fields[6] {
        "0" => return Err(IngestError::NoFix),
        q if q.parse::<u8>().is_err() => {
            return Err(IngestError::MalformedSentence(format!("bad fix quality `{q}`")))
        }
        _ => {}
    }
    let lat = parse_ddmm(fields[2], 2)?;
    let lon = parse_ddmm(fields[4], 3)?;
    let lat = match fields[3] {
        "N" => lat,
        "S" => -lat,
        h => return Err(IngestError::MalformedSentence(format!("bad hemisphere `{h}`"))),
    };
    let lon = match fields[5] {
        "E" => lon,
        "W" => -lon,
        h => return Err(IngestError::MalformedSentence(format!("bad hemisphere `{h}`"))),
    };
    GeoCoordinate::new(lat, lon)
}

/// Renders a minimal GPS fix sentence for `coord` (fix quality 1).
pub fn format_gps_sentence(coord: &GeoCoordinate) -> String {
    fn ddmm(value: f64, width: usize) -> String {
        let abs = value.abs();
        let mut deg = abs.trunc();
        let mut min = (abs - deg) * 60.0;
        // rounding to 4 decimals can carry into the degree digits
        if (min * 10_000.0).round() >= 600_000.0 {
            deg += 1.0;
            min = 0.0;
        }
        format!("{:0width$}{:07.4}", deg as u32, min, width = width)
    }
    let body = format!(
        "GPGGA,000000.00,{},{},{},{},1,08,0.9,0.0,M,0.0,M,,",
        ddmm(coord.latitude, 2),
        if coord.latitude < 0.0 { 'S' } else { 'N' },
        ddmm(coord.longitude, 3),
        if coord.longitude < 0.0 { 'W' } else { 'E' },
    );
    format!("${}*{:02X}", body, nmea_checksum(&body))
}

// ---------------------------------------------------------------------------
// Weather providers
// ---------------------------------------------------------------------------

pub trait WeatherProvider: Send + Sync {
    fn observe(&self, location: &GeoCoordinate, date: NaiveDate) -> Result<WeatherObservation, IngestError>;
}

pub fn fetch_weather(
    provider: &dyn WeatherProvider,
    location: &GeoCoordinate,
    date: NaiveDate,
) -> Result<WeatherObservation, IngestError> {
    provider.observe(location, date)
}

/// Serves observations from a recorded CSV fixture
/// (`date,temperature,humidity,rainfall`). The fixture describes a single
/// site, so the requested location is ignored.
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    days: BTreeMap<NaiveDate, WeatherObservation>,
}

#[derive(Deserialize)]
struct FixtureRow {
    date: NaiveDate,
    temperature: f64,
    humidity: f64,
    rainfall: f64,
}

impl ReplayProvider {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut days = BTreeMap::new();
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for row in csv.deserialize::<FixtureRow>() {
            let row = row.map_err(|e| IngestError::ProviderFailure(e.to_string()))?;
            let obs = WeatherObservation::new(row.date, row.temperature, row.humidity, row.rainfall)?;
            days.insert(obs.date, obs);
        }
        Ok(Self { days })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let file = File::open(path.as_ref())
            .map_err(|e| IngestError::ProviderFailure(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_reader(file)
    }

    pub fn from_observations(obs: impl IntoIterator<Item = WeatherObservation>) -> Self {
        Self { days: obs.into_iter().map(|o| (o.date, o)).collect() }
    }

    pub fn range(&self) -> Option<(NaiveDate, NaiveDate)> {
        Some((*self.days.keys().next()?, *self.days.keys().next_back()?))
    }
}

impl WeatherProvider for ReplayProvider {
    fn observe(&self, _location: &GeoCoordinate, date: NaiveDate) -> Result<WeatherObservation, IngestError> {
        self.days.get(&date).copied().ok_or(IngestError::NotAvailable(date))
    }
}

/// Placeholder for a live HTTP weather API. No transport is wired in, so
/// every call reports a provider failure.
#[derive(Debug, Clone)]
pub struct LiveProvider {
    pub endpoint: String,
}

impl WeatherProvider for LiveProvider {
    fn observe(
        &self,
        _location: &GeoCoordinate,
        _date: NaiveDate,
    ) -> Result<WeatherObservation, IngestError> {
        Err(IngestError::ProviderFailure(format!(
            "live provider `{}` is not configured in this build",
            self.endpoint
        )))
    }
}
