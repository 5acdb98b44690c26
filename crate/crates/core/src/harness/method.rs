//! Method names as written in configs and on the command line, e.g.
//! `hyperimpute`, `ice_fixed(random_forest)`, `knn(k=5)` or
//! `softimpute(lambda=0.1,max_iters=200,tol=1e-5)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::baselines::BaselineKind;
use crate::engine::AblationSetting;
use crate::learners::LearnerClass;

#[derive(Debug, Error, PartialEq)]
#[error("invalid method '{text}': {reason}")]
pub struct MethodParseError {
    pub text: String,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// The full loop under the experiment's engine config.
    HyperImpute,
    Ablation(AblationSetting),
    Baseline(BaselineKind),
}

pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_SOFTIMPUTE: BaselineKind = BaselineKind::SoftImpute {
    lambda: 0.1,
    max_iters: 100,
    tol: 1e-5,
};

impl Method {
    /// The source-of-gains suite: every single-class chained-equations
    /// variant, the four ablations and the full loop.
    pub fn ablation_suite(wo_flexibility_class: LearnerClass) -> Vec<Method> {
        let mut out = vec![Method::Ablation(AblationSetting::Full)];
        out.extend(
            crate::learners::CATALOGUE
                .iter()
                .map(|&c| Method::Ablation(AblationSetting::IceFixed(c))),
        );
        out.extend([
            Method::Ablation(AblationSetting::GlobalSearch),
            Method::Ablation(AblationSetting::ColumnNaive),
            Method::Ablation(AblationSetting::WoFlexibility(wo_flexibility_class)),
            Method::Ablation(AblationSetting::WoAdaptivity),
        ]);
        out
    }

    /// Whether runs of this method produce a selection log and trace.
    pub fn is_engine(&self) -> bool {
        !matches!(self, Method::Baseline(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::HyperImpute => f.write_str("hyperimpute"),
            Method::Ablation(s) => f.write_str(&s.name()),
            Method::Baseline(b) => f.write_str(&b.name()),
        }
    }
}

fn split_call(text: &str) -> Result<(&str, Vec<&str>), String> {
    let text = text.trim();
    match text.find('(') {
        None => Ok((text, Vec::new())),
        Some(open) => {
            let inner = text[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| "unbalanced parentheses".to_string())?;
            if inner.contains(['(', ')']) {
                return Err("nested parentheses".into());
            }
            let args = inner.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
            Ok((text[..open].trim(), args))
        }
    }
}

fn class_arg(args: &[&str]) -> Result<LearnerClass, String> {
    match args {
        [one] => {
            let v = one.strip_prefix("class=").unwrap_or(one).trim();
            LearnerClass::parse(v).ok_or_else(|| format!("unknown learner class '{v}'"))
        }
        _ => Err("expects exactly one learner class".into()),
    }
}

fn key_values<'a>(args: &[&'a str], keys: &[&'a str]) -> Result<Vec<(&'a str, &'a str)>, String> {
    args.iter()
        .enumerate()
        .map(|(i, a)| match a.split_once('=') {
            Some((k, v)) if keys.contains(&k.trim()) => Ok((k.trim(), v.trim())),
            Some((k, _)) => Err(format!("unknown parameter '{}'", k.trim())),
            None if i < keys.len() => Ok((keys[i], a.trim())),
            None => Err(format!("too many arguments: '{a}'")),
        })
        .collect()
}

fn number<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("'{key}' has invalid value '{v}'"))
}

fn parse_method(text: &str) -> Result<Method, String> {
    let (name, args) = split_call(text)?;
    let name = name.to_ascii_lowercase().replace('-', "_");
    let no_args = |m: Method| if args.is_empty() { Ok(m) } else { Err(format!("'{name}' takes no arguments")) };
    match name.as_str() {
        "hyperimpute" => no_args(Method::HyperImpute),
        "full" => no_args(Method::Ablation(AblationSetting::Full)),
        "global_search" => no_args(Method::Ablation(AblationSetting::GlobalSearch)),
        "column_naive" => no_args(Method::Ablation(AblationSetting::ColumnNaive)),
        "wo_adaptivity" => no_args(Method::Ablation(AblationSetting::WoAdaptivity)),
        "ice_fixed" => Ok(Method::Ablation(AblationSetting::IceFixed(class_arg(&args)?))),
        "wo_flexibility" => Ok(Method::Ablation(AblationSetting::WoFlexibility(class_arg(&args)?))),
        "mean" => no_args(Method::Baseline(BaselineKind::Mean)),
        "ice_linear" | "ice" => no_args(Method::Baseline(BaselineKind::IceLinear)),
        "iterative_forest" | "missforest" => no_args(Method::Baseline(BaselineKind::IterativeForest)),
        "knn" => {
            let mut k = DEFAULT_KNN_K;
            for (key, v) in key_values(&args, &["k"])? {
                k = number(key, v)?;
            }
            let b = BaselineKind::Knn { k };
            b.validate().map_err(|e| e.to_string())?;
            Ok(Method::Baseline(b))
        }
        "softimpute" => {
            let BaselineKind::SoftImpute {
                mut lambda,
                mut max_iters,
                mut tol,
            } = DEFAULT_SOFTIMPUTE
            else {
                unreachable!()
            };
            for (key, v) in key_values(&args, &["lambda", "max_iters", "tol"])? {
                match key {
                    "lambda" => lambda = number(key, v)?,
                    "max_iters" => max_iters = number(key, v)?,
                    _ => tol = number(key, v)?,
                }
            }
            let b = BaselineKind::SoftImpute { lambda, max_iters, tol };
            b.validate().map_err(|e| e.to_string())?;
            if !lambda.is_finite() || max_iters == 0 {
                return Err("softimpute needs a finite lambda and max_iters >= 1".into());
            }
            Ok(Method::Baseline(b))
        }
        "" => Err("empty method name".into()),
        other => Err(format!("unknown method '{other}'")),
    }
}

impl FromStr for Method {
    type Err = MethodParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse_method(text).map_err(|reason| MethodParseError {
            text: text.to_string(),
            reason,
        })
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated method list, respecting parentheses.
pub fn parse_method_list(text: &str) -> Result<Vec<Method>, MethodParseError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(text[start..i].parse()?);
                start = i + 1;
            }
            _ => {}
        }
    }
    if !text[start..].trim().is_empty() || !out.is_empty() {
        out.push(text[start..].parse()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_known_forms() {
        assert_eq!("hyperimpute".parse::<Method>().unwrap(), Method::HyperImpute);
        assert_eq!(
            "ice_fixed(random_forest)".parse::<Method>().unwrap(),
            Method::Ablation(AblationSetting::IceFixed(LearnerClass::RandomForest))
        );
        assert_eq!(
            "knn(k=3)".parse::<Method>().unwrap(),
            Method::Baseline(BaselineKind::Knn { k: 3 })
        );
        assert_eq!(
            "softimpute(lambda=0.5)".parse::<Method>().unwrap(),
            Method::Baseline(BaselineKind::SoftImpute {
                lambda: 0.5,
                max_iters: 100,
                tol: 1e-5
            })
        );
        for bad in ["", "ice_fixed", "ice_fixed(nope)", "knn(k=0)", "knn(j=2)", "mean(1)", "full(", "softimpute(tol=-1)"] {
            assert!(bad.parse::<Method>().is_err(), "{bad}");
        }
        let list = parse_method_list("mean, ice_fixed(knn), softimpute(lambda=1,tol=0.01)").unwrap();
        assert_eq!(list.len(), 3);
    }

    fn arb_class() -> impl Strategy<Value = LearnerClass> {
        prop::sample::select(crate::learners::CATALOGUE.to_vec())
    }

    fn arb_method() -> impl Strategy<Value = Method> {
        prop_oneof![
            Just(Method::HyperImpute),
            arb_class().prop_map(|c| Method::Ablation(AblationSetting::IceFixed(c))),
            arb_class().prop_map(|c| Method::Ablation(AblationSetting::WoFlexibility(c))),
            Just(Method::Ablation(AblationSetting::GlobalSearch)),
            Just(Method::Baseline(BaselineKind::Mean)),
            (1usize..50).prop_map(|k| Method::Baseline(BaselineKind::Knn { k })),
            (0.0f64..10.0, 1usize..500, 1e-9f64..1.0).prop_map(|(lambda, max_iters, tol)| Method::Baseline(
                BaselineKind::SoftImpute { lambda, max_iters, tol }
            )),
        ]
    }

    proptest! {
        #[test]
        fn display_round_trips(m in arb_method()) {
            prop_assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }

        #[test]
        fn parser_never_panics(s in ".{0,40}") {
            let _ = s.parse::<Method>();
            let _ = parse_method_list(&s);
        }
    }
}
