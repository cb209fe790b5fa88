use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Meeting};
use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.5, 0.25, 0.25);

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CitySplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Meeting ids per city, in chronological order within each part.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitPlan {
    pub cities: BTreeMap<String, CitySplit>,
    /// Set for leave-one-city-out plans.
    pub held_out: Option<String>,
}

impl SplitPlan {
    fn collect(&self, f: impl Fn(&CitySplit) -> &Vec<String>) -> Vec<String> {
        self.cities.values().flat_map(|c| f(c).iter().cloned()).collect()
    }
    pub fn train_ids(&self) -> Vec<String> {
        self.collect(|c| &c.train)
    }
    pub fn validation_ids(&self) -> Vec<String> {
        self.collect(|c| &c.validation)
    }
    pub fn test_ids(&self) -> Vec<String> {
        self.collect(|c| &c.test)
    }
}

fn by_city(corpus: &Corpus) -> BTreeMap<&str, Vec<&Meeting>> {
    let mut out: BTreeMap<&str, Vec<&Meeting>> = BTreeMap::new();
    for m in &corpus.meetings {
        out.entry(m.city.as_str()).or_default().push(m);
    }
    for ms in out.values_mut() {
        ms.sort_by(|a, b| a.held_at.cmp(&b.held_at).then_with(|| a.meeting_id.cmp(&b.meeting_id)));
    }
    out
}

/// Boundaries `floor(cumulative ratio · n)`, nudged so that each part holds
/// at least one meeting.
fn boundaries(n: usize, (train, val, _): (f64, f64, f64)) -> (usize, usize) {
    let cut = |r: f64| (r * n as f64 + 1e-9).floor() as usize;
    let mut b1 = cut(train).max(1);
    let mut b2 = cut(train + val).max(b1 + 1).min(n - 1);
    if b1 >= b2 {
        b1 = b2 - 1;
        b2 = b1 + 1;
    }
    (b1, b2)
}

/// Per city: the first `train` share of meetings by date, then `validation`,
/// then `test`.
pub fn chronological_split(corpus: &Corpus, ratios: (f64, f64, f64)) -> Result<SplitPlan> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be positive and sum to 1")));
    }
    let mut cities = BTreeMap::new();
    for (city, ms) in by_city(corpus) {
        let n = ms.len();
        if n < 3 {
            return Err(Error::Config(format!("city {city} has {n} meetings; three are needed to split")));
        }
        let (b1, b2) = boundaries(n, ratios);
        let ids = |r: std::ops::Range<usize>| ms[r].iter().map(|m| m.meeting_id.clone()).collect();
        cities.insert(
            city.to_string(),
            CitySplit {
                train: ids(0..b1),
                validation: ids(b1..b2),
                test: ids(b2..n),
            },
        );
    }
    Ok(SplitPlan { cities, held_out: None })
}

/// Leave one city out. The held-out city keeps only its chronological test
/// part; every other city contributes its train and validation parts.
pub fn loco_split(corpus: &Corpus, held_out: &str, ratios: (f64, f64, f64)) -> Result<SplitPlan> {
    let cities: BTreeSet<&str> = corpus.meetings.iter().map(|m| m.city.as_str()).collect();
    if cities.len() < 2 {
        return Err(Error::Config(format!(
            "leave-one-city-out needs at least two cities, corpus has {}",
            cities.len()
        )));
    }
    if !cities.contains(held_out) {
        return Err(Error::Config(format!("held-out city {held_out:?} is not in the corpus")));
    }
    let mut plan = chronological_split(corpus, ratios)?;
    for (city, split) in plan.cities.iter_mut() {
        if city == held_out {
            split.train.clear();
            split.validation.clear();
        } else {
            split.test.clear();
        }
    }
    plan.held_out = Some(held_out.to_string());
    Ok(plan)
}
