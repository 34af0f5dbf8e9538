use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use super::{CropClass, RecommendError};
use crate::twin::FeatureVector;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub rows: Vec<(FeatureVector, CropClass)>,
}

#[derive(Deserialize)]
struct CsvRow {
    #[serde(alias = "n")]
    #[serde(rename = "N")]
    n: f64,
    #[serde(alias = "p")]
    #[serde(rename = "P")]
    p: f64,
    #[serde(alias = "k")]
    #[serde(rename = "K")]
    k: f64,
    temperature: f64,
    humidity: f64,
    ph: f64,
    rainfall: f64,
    label: String,
}

impl LabeledDataset {
    pub fn new(rows: Vec<(FeatureVector, CropClass)>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reads `N,P,K,temperature,humidity,ph,rainfall,label`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, RecommendError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (i, row) in csv.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| RecommendError::Data(format!("row {}: {e}", i + 1)))?;
            let v = FeatureVector([row.n, row.p, row.k, row.temperature, row.humidity, row.ph, row.rainfall]);
            if v.0.iter().any(|x| !x.is_finite()) {
                return Err(RecommendError::Data(format!("row {}: non-finite value", i + 1)));
            }
            rows.push((v, row.label.parse()?));
        }
        Ok(Self { rows })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, RecommendError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| RecommendError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.rows.iter().map(|(v, _)| v.0[feature]).collect()
    }

    pub fn labels(&self) -> Vec<CropClass> {
        self.rows.iter().map(|(_, c)| *c).collect()
    }

    pub fn class_counts(&self) -> [usize; CropClass::COUNT] {
        let mut counts = [0; CropClass::COUNT];
        for (_, c) in &self.rows {
            counts[c.index()] += 1;
        }
        counts
    }

    /// Per-class shuffled split. Each class contributes
    /// `round(count * test_fraction)` rows to the test side; both sides keep
    /// the original row order.
    pub fn stratified_split(&self, test_fraction: f64, seed: u64) -> (Self, Self) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut is_test = vec![false; self.rows.len()];
        for class in CropClass::ALL {
            let mut idx: Vec<usize> = (0..self.rows.len()).filter(|&i| self.rows[i].1 == class).collect();
            idx.shuffle(&mut rng);
            let n_test = (idx.len() as f64 * test_fraction).round() as usize;
            for &i in &idx[..n_test.min(idx.len())] {
                is_test[i] = true;
            }
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (row, t) in self.rows.iter().zip(is_test) {
            if t {
                test.push(*row);
            } else {
                train.push(*row);
            }
        }
        (Self { rows: train }, Self { rows: test })
    }
}

/// Per-crop value ranges `[lo, hi]` for n, p, k, temperature, humidity, ph,
/// rainfall, as observed in the public crop-recommendation corpus.
pub const CROP_RANGES: [(CropClass, [(f64, f64); 7]); CropClass::COUNT] = [
    (
        CropClass::Apple,
        [(0., 40.), (120., 145.), (195., 205.), (21., 24.), (90., 95.), (5.5, 6.5), (100., 125.)],
    ),
    (
        CropClass::Banana,
        [(80., 120.), (70., 95.), (45., 55.), (25., 30.), (75., 85.), (5.5, 6.5), (90., 120.)],
    ),
    (
        CropClass::Blackgram,
        [(20., 60.), (55., 80.), (15., 25.), (25., 35.), (60., 70.), (6.5, 7.8), (60., 75.)],
    ),
    (
        CropClass::Chickpea,
        [(20., 60.), (55., 80.), (75., 85.), (17., 21.), (14., 20.), (6., 8.9), (65., 95.)],
    ),
    (
        CropClass::Coconut,
        [(0., 40.), (5., 30.), (25., 35.), (25., 30.), (90., 100.), (5.5, 6.5), (131., 226.)],
    ),
    (
        CropClass::Coffee,
        [(80., 120.), (15., 40.), (25., 35.), (23., 28.), (50., 70.), (6., 7.5), (115., 199.)],
    ),
    (
        CropClass::Cotton,
        [(100., 140.), (35., 60.), (15., 25.), (22., 26.), (75., 85.), (5.8, 8.), (60., 100.)],
    ),
    (
        CropClass::Grapes,
        [(0., 40.), (120., 145.), (195., 205.), (8.8, 42.), (80., 84.), (5.5, 6.5), (65., 75.)],
    ),
    (CropClass::Jute, [(60., 100.), (35., 60.), (35., 45.), (23., 27.), (70., 90.), (6., 7.5), (150., 200.)]),
    (
        CropClass::KidneyBeans,
        [(0., 40.), (55., 80.), (15., 25.), (15., 25.), (18., 25.), (5.5, 6.), (60., 150.)],
    ),
    (CropClass::Lentil, [(0., 40.), (55., 80.), (15., 25.), (18., 30.), (60., 70.), (5.9, 7.8), (35., 55.)]),
    (
        CropClass::Maize,
        [(60., 100.), (35., 60.), (15., 25.), (18., 26.5), (55., 75.), (5.5, 7.), (60., 110.)],
    ),
    (CropClass::Mango, [(0., 40.), (15., 40.), (25., 35.), (27., 36.), (45., 55.), (4.5, 7.), (89., 101.)]),
    (
        CropClass::MothBeans,
        [(0., 40.), (35., 60.), (15., 25.), (24., 32.), (40., 65.), (3.5, 9.9), (30., 75.)],
    ),
    (
        CropClass::MungBean,
        [(0., 40.), (35., 60.), (15., 25.), (27., 30.), (80., 90.), (6.2, 7.2), (36., 60.)],
    ),
    (
        CropClass::Muskmelon,
        [(80., 120.), (5., 30.), (45., 55.), (27., 30.), (90., 95.), (6., 6.8), (20., 30.)],
    ),
    (CropClass::Orange, [(0., 40.), (5., 30.), (5., 15.), (10., 35.), (90., 95.), (6., 8.), (100., 120.)]),
    (CropClass::Papaya, [(31., 70.), (46., 70.), (45., 55.), (23., 44.), (90., 95.), (6.5, 7.), (40., 249.)]),
    (
        CropClass::PigeonPeas,
        [(0., 40.), (55., 80.), (15., 25.), (18., 37.), (30., 70.), (4.5, 7.4), (90., 199.)],
    ),
    (
        CropClass::Pomegranate,
        [(0., 40.), (5., 30.), (35., 45.), (18., 25.), (85., 95.), (5.6, 7.2), (102., 113.)],
    ),
    (CropClass::Rice, [(60., 99.), (35., 60.), (35., 45.), (20., 27.), (80., 85.), (5., 7.9), (182., 299.)]),
    (
        CropClass::Watermelon,
        [(80., 120.), (5., 30.), (45., 55.), (24., 27.), (80., 90.), (6., 7.), (40., 60.)],
    ),
];

/// Published per-crop feature means (n, p, k, temperature, humidity, ph,
/// rainfall) of the public corpus.
pub const CROP_MEANS: [[f64; 7]; CropClass::COUNT] = [
    [20.80, 134.22, 199.89, 22.63, 92.33, 5.93, 112.65],
    [100.23, 82.01, 50.05, 27.38, 80.36, 5.98, 104.63],
    [40.02, 67.47, 19.24, 29.97, 65.12, 7.13, 67.88],
    [40.09, 67.79, 79.92, 18.87, 16.86, 7.34, 80.06],
    [21.98, 16.93, 30.59, 27.41, 94.84, 5.98, 175.69],
    [101.20, 28.74, 29.94, 25.54, 58.87, 6.79, 158.07],
    [117.77, 46.24, 19.56, 23.99, 79.84, 6.91, 80.40],
    [23.18, 132.53, 200.11, 23.85, 81.88, 6.03, 69.61],
    [78.40, 46.86, 39.99, 24.96, 79.64, 6.73, 174.79],
    [20.75, 67.54, 20.05, 20.12, 21.61, 5.75, 105.92],
    [18.77, 68.36, 19.41, 24.51, 64.80, 6.93, 45.68],
    [77.76, 48.44, 19.79, 22.39, 65.09, 6.25, 84.77],
    [20.07, 27.18, 29.92, 31.21, 50.16, 5.77, 94.70],
    [21.44, 48.01, 20.23, 28.19, 53.16, 6.83, 51.20],
    [20.99, 47.28, 19.87, 28.53, 85.50, 6.72, 48.40],
    [100.32, 17.72, 50.08, 28.66, 92.34, 6.36, 24.69],
    [19.58, 16.55, 10.01, 22.77, 92.17, 7.02, 110.47],
    [49.88, 59.05, 50.04, 33.72, 92.40, 6.74, 142.63],
    [20.73, 67.73, 20.29, 27.74, 48.06, 5.79, 149.46],
    [18.87, 18.75, 40.21, 21.84, 90.13, 6.43, 107.53],
    [79.89, 47.58, 39.87, 23.69, 82.27, 6.43, 236.18],
    [99.42, 17.00, 50.22, 25.59, 85.16, 6.50, 50.79],
];

/// Standard deviations per range width used by the synthetic generator.
pub const SYNTHETIC_WIDTH_TO_SD: f64 = 4.0;

/// Seeded stand-in for the public corpus: for every crop, `per_class` rows
/// whose features are drawn independently from a Gaussian centred on the
/// crop's published mean with standard deviation `width / 4`, truncated (by
/// rejection) to the crop's published range.
pub fn synthetic_dataset(seed: u64, per_class: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(per_class * CropClass::COUNT);
    for (ci, (crop, ranges)) in CROP_RANGES.into_iter().enumerate() {
        let dists: Vec<Normal<f64>> = ranges
            .iter()
            .zip(CROP_MEANS[ci])
            .map(|(&(lo, hi), mean)| {
                Normal::new(mean, (hi - lo) / SYNTHETIC_WIDTH_TO_SD).expect("positive width")
            })
            .collect();
        for _ in 0..per_class {
            let mut v = [0.0; 7];
            for ((x, d), &(lo, hi)) in v.iter_mut().zip(&dists).zip(&ranges) {
                *x = loop {
                    let s = d.sample(&mut rng);
                    if (lo..=hi).contains(&s) {
                        break s;
                    }
                };
            }
            for x in &mut v[..3] {
                *x = x.round();
            }
            rows.push((FeatureVector(v), crop));
        }
    }
    LabeledDataset { rows }
}
