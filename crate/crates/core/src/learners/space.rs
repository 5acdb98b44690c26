use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A single hyperparameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            ParamValue::Real(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Some(*v as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum Domain {
    IntRange { lo: i64, hi: i64 },
    RealRange { lo: f64, hi: f64, log: bool },
    Choice { options: Vec<ParamValue> },
}

impl Domain {
    pub fn contains(&self, value: &ParamValue) -> bool {
        match self {
            Domain::IntRange { lo, hi } => value.as_i64().is_some_and(|v| (*lo..=*hi).contains(&v)),
            Domain::RealRange { lo, hi, .. } => value
                .as_f64()
                .is_some_and(|v| v.is_finite() && *lo <= v && v <= *hi),
            Domain::Choice { options } => options.iter().any(|o| match (o.as_f64(), value.as_f64()) {
                (Some(a), Some(b)) => a == b,
                _ => o == value,
            }),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match self {
            Domain::IntRange { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            Domain::RealRange { lo, hi, log } => {
                let u: f64 = rng.random();
                let v = if *log {
                    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + u * (hi - lo)
                };
                ParamValue::Real(v.clamp(*lo, *hi))
            }
            Domain::Choice { options } => options[rng.random_range(0..options.len())].clone(),
        }
    }

    fn is_point(&self) -> bool {
        match self {
            Domain::IntRange { lo, hi } => lo == hi,
            Domain::RealRange { lo, hi, .. } => lo == hi,
            Domain::Choice { options } => options.len() == 1,
        }
    }
}

/// Ordered list of named parameter domains for one learner class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    pub params: Vec<(String, Domain)>,
}

impl HyperparamSpace {
    pub fn new(params: Vec<(&str, Domain)>) -> Self {
        HyperparamSpace {
            params: params.into_iter().map(|(n, d)| (n.to_string(), d)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Domain> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<String, ParamValue> {
        self.params
            .iter()
            .map(|(n, d)| (n.clone(), d.sample(rng)))
            .collect()
    }

    /// Every declared parameter is present and inside its domain.
    pub fn contains(&self, params: &BTreeMap<String, ParamValue>) -> bool {
        self.params
            .iter()
            .all(|(n, d)| params.get(n).is_some_and(|v| d.contains(v)))
    }

    pub fn is_single_point(&self) -> bool {
        self.params.iter().all(|(_, d)| d.is_point())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn sampled_values_stay_in_domain() {
        let space = HyperparamSpace::new(vec![
            ("a", Domain::IntRange { lo: 1, hi: 4 }),
            ("b", Domain::RealRange { lo: 1e-3, hi: 10.0, log: true }),
            ("c", Domain::Choice { options: vec![0.01.into(), 0.1.into()] }),
        ]);
        let mut rng = seed::rng(3);
        for _ in 0..1000 {
            assert!(space.contains(&space.sample(&mut rng)));
        }
        assert!(!space.is_single_point());
    }

    #[test]
    fn untagged_values_round_trip() {
        let v = vec![ParamValue::Int(3), ParamValue::Real(0.5), ParamValue::Text("sqrt".into())];
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"[3,0.5,"sqrt"]"#);
        let back: Vec<ParamValue> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert!(Domain::IntRange { lo: 1, hi: 4 }.contains(&ParamValue::Real(4.0)));
        assert!(!Domain::IntRange { lo: 1, hi: 4 }.contains(&ParamValue::Real(3.5)));
    }
}
