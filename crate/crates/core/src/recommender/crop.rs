use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RecommendError;

/// The 22 crops the recommender can suggest. Declaration order is
/// alphabetical and doubles as the class index and the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum CropClass {
    Apple,
    Banana,
    Blackgram,
    Chickpea,
    Coconut,
    Coffee,
    Cotton,
    Grapes,
    Jute,
    KidneyBeans,
    Lentil,
    Maize,
    Mango,
    MothBeans,
    MungBean,
    Muskmelon,
    Orange,
    Papaya,
    PigeonPeas,
    Pomegranate,
    Rice,
    Watermelon,
}

impl CropClass {
    pub const COUNT: usize = 22;

    pub const ALL: [CropClass; Self::COUNT] = [
        CropClass::Apple,
        CropClass::Banana,
        CropClass::Blackgram,
        CropClass::Chickpea,
        CropClass::Coconut,
        CropClass::Coffee,
        CropClass::Cotton,
        CropClass::Grapes,
        CropClass::Jute,
        CropClass::KidneyBeans,
        CropClass::Lentil,
        CropClass::Maize,
        CropClass::Mango,
        CropClass::MothBeans,
        CropClass::MungBean,
        CropClass::Muskmelon,
        CropClass::Orange,
        CropClass::Papaya,
        CropClass::PigeonPeas,
        CropClass::Pomegranate,
        CropClass::Rice,
        CropClass::Watermelon,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            CropClass::Apple => "apple",
            CropClass::Banana => "banana",
            CropClass::Blackgram => "blackgram",
            CropClass::Chickpea => "chickpea",
            CropClass::Coconut => "coconut",
            CropClass::Coffee => "coffee",
            CropClass::Cotton => "cotton",
            CropClass::Grapes => "grapes",
            CropClass::Jute => "jute",
            CropClass::KidneyBeans => "kidney beans",
            CropClass::Lentil => "lentil",
            CropClass::Maize => "maize",
            CropClass::Mango => "mango",
            CropClass::MothBeans => "moth beans",
            CropClass::MungBean => "mung bean",
            CropClass::Muskmelon => "muskmelon",
            CropClass::Orange => "orange",
            CropClass::Papaya => "papaya",
            CropClass::PigeonPeas => "pigeon peas",
            CropClass::Pomegranate => "pomegranate",
            CropClass::Rice => "rice",
            CropClass::Watermelon => "watermelon",
        }
    }
}

impl fmt::Display for CropClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Accepts the display labels as well as the compact spellings used by the
/// public dataset (`kidneybeans`, `mothbeans`, `mungbean`, `pigeonpeas`).
impl FromStr for CropClass {
    type Err = RecommendError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        CropClass::ALL
            .into_iter()
            .find(|c| c.label().replace(' ', "") == key)
            .ok_or_else(|| RecommendError::UnknownCrop(s.to_string()))
    }
}

impl From<CropClass> for &'static str {
    fn from(c: CropClass) -> Self {
        c.label()
    }
}

impl TryFrom<String> for CropClass {
    type Error = RecommendError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
