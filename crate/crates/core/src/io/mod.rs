//! File formats: `.blp` instances, `.labels.json`, `.gnn` models and
//! `.report.json` solve reports.

mod lp;
mod model_file;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use lp::{parse_lp, read_lp, write_lp};
pub use model_file::{load_model, save_model, MODEL_VERSION};

use crate::bnb::SolveReport;
use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::model::BlpInstance;

/// Serde adapter for `f64` fields that may hold infinities or NaN, which
/// JSON numbers cannot express. Non-finite values are written as the
/// strings `"Infinity"`, `"-Infinity"` and `"NaN"`.
pub mod json_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("Infinity")
        } else {
            s.serialize_str("-Infinity")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
        Null(()),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Null(()) => Ok(f64::NAN),
            Repr::Str(s) => match s.as_str() {
                "Infinity" | "inf" => Ok(f64::INFINITY),
                "-Infinity" | "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("invalid number `{s}`"))),
            },
        }
    }
}

/// Name-keyed values kept in variable order. Serialized as a JSON object.
mod ordered_map {
    use std::fmt;

    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(String, f64)], s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(v.len()))?;
        for (k, x) in v {
            map.serialize_entry(k, x)?;
        }
        map.end()
    }

    struct V;

    impl<'de> Visitor<'de> for V {
        type Value = Vec<(String, f64)>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an object of numbers")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some((k, v)) = m.next_entry::<String, f64>()? {
                out.push((k, v));
            }
            Ok(out)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, f64)>, D::Error> {
        d.deserialize_map(V)
    }
}

/// Stored bias labels of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFile {
    pub instance_id: String,
    pub epsilon: f64,
    pub pool_size: usize,
    /// Threshold applied when the biases are binarized, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(with = "ordered_map")]
    pub biases: Vec<(String, f64)>,
}

impl LabelFile {
    pub fn new(
        instance_id: &str,
        inst: &BlpInstance,
        biases: &[f64],
        epsilon: f64,
        pool_size: usize,
    ) -> Result<Self> {
        if biases.len() != inst.num_vars() {
            return Err(Error::PredictionShape {
                expected: inst.num_vars(),
                got: biases.len(),
            });
        }
        let file = Self {
            instance_id: instance_id.to_string(),
            epsilon,
            pool_size,
            tau: None,
            biases: inst
                .var_names()
                .iter()
                .cloned()
                .zip(biases.iter().copied())
                .collect(),
        };
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((name, b)) = self.biases.iter().find(|(_, b)| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidArgument(format!(
                "bias of `{name}` is {b}, outside [0,1]"
            )));
        }
        Ok(())
    }

    /// Biases in the variable order of `inst`; the name sets must agree.
    pub fn biases_for(&self, inst: &BlpInstance) -> Result<Vec<f64>> {
        self.validate()?;
        if self.biases.len() != inst.num_vars() {
            return Err(Error::InvalidArgument(format!(
                "label file has {} variables, instance has {}",
                self.biases.len(),
                inst.num_vars()
            )));
        }
        let by_name: std::collections::HashMap<&str, f64> =
            self.biases.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        inst.var_names()
            .iter()
            .map(|n| {
                by_name
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("no bias for variable `{n}`")))
            })
            .collect()
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)? + "\n")?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&fs::read_to_string(path)?)
}

pub fn read_instance_file(path: &Path) -> Result<BlpInstance> {
    read_lp(&fs::read_to_string(path)?)
}

pub fn write_instance_file(path: &Path, inst: &BlpInstance) -> Result<()> {
    fs::write(path, write_lp(inst))?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<GnnModel> {
    load_model(&fs::read(path)?)
}

pub fn write_model_file(path: &Path, model: &GnnModel) -> Result<()> {
    fs::write(path, save_model(model)?)?;
    Ok(())
}

pub fn write_report(report: &SolveReport) -> Result<String> {
    to_json(report)
}

pub fn read_report(text: &str) -> Result<SolveReport> {
    from_json(text)
}
