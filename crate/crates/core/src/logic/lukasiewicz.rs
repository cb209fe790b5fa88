//! Łukasiewicz connectives on soft truth values in `[0, 1]`.

/// Conjunction: `max(0, Σv − (n − 1))`. The empty conjunction is true.
pub fn luk_and(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let n = values.len() as f64;
    (values.iter().sum::<f64>() - (n - 1.0)).max(0.0)
}

pub fn luk_not(value: f64) -> f64 {
    1.0 - value
}

/// Disjunction: `min(1, Σv)`.
pub fn luk_or(values: &[f64]) -> f64 {
    values.iter().sum::<f64>().min(1.0)
}

pub fn luk_implies(body: f64, head: f64) -> f64 {
    if body <= head {
        1.0
    } else {
        1.0 - body + head
    }
}

/// How far `body → head` is from being satisfied: `max(0, body − head)`.
pub fn distance_to_satisfaction(body: f64, head: f64) -> f64 {
    (body - head).max(0.0)
}
