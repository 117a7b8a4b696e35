//! Published reference model and the world records it was fitted against.

use crate::forecast::RecordRef;
use crate::model::GlobalModel;

/// Raw JSON of the reference model. Thresholds are the levels giving an
/// expected 200 exceedances over 2001–2019, rounded to 0.01 s.
pub const PAPER_MODEL_JSON: &str = include_str!("../data/paper-model.json");

/// Discipline identifiers with display names.
pub const DISCIPLINES: [(&str, &str); 6] = [
    ("marM", "Marathon-men"),
    ("marW", "Marathon-women"),
    ("hmM", "Half marathon-men"),
    ("hmW", "Half marathon-women"),
    ("10kM", "10km-men"),
    ("10kW", "10km-women"),
];

pub fn paper_model() -> GlobalModel {
    serde_json::from_str(PAPER_MODEL_JSON).expect("bundled reference model is valid JSON")
}

/// World records standing at the end of 2019, in seconds.
pub fn world_records_2019() -> Vec<RecordRef> {
    [
        ("marM", 2 * 3600 + 60 + 39, 2018),
        ("marW", 2 * 3600 + 14 * 60 + 4, 2019),
        ("hmM", 58 * 60 + 1, 2019),
        ("hmW", 3600 + 4 * 60 + 51, 2017),
        ("10kM", 26 * 60 + 38, 2019),
        ("10kW", 29 * 60 + 43, 2017),
    ]
    .into_iter()
    .map(|(d, s, year)| RecordRef {
        discipline: d.to_string(),
        seconds: f64::from(s),
        year_set: year,
    })
    .collect()
}

pub fn world_record_2019(d: &str) -> Option<RecordRef> {
    world_records_2019().into_iter().find(|r| r.discipline == d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::YearRange;

    #[test]
    fn reference_model_is_feasible_over_horizon() {
        let m = paper_model();
        assert_eq!(m.disciplines.len(), 6);
        assert_eq!(m.thresholds.len(), 6);
        m.check_feasible(YearRange::new(2001, 2030).unwrap()).unwrap();
    }
}
