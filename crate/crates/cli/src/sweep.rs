//! `--sweep param=values` parsing and ordered sweep records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "mu")]
    Mu,
    #[serde(rename = "D")]
    D,
    #[serde(rename = "r")]
    R,
    #[serde(rename = "T")]
    T,
    #[serde(rename = "v")]
    V,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Mu => "mu",
            SweepParam::D => "D",
            SweepParam::R => "r",
            SweepParam::T => "T",
            SweepParam::V => "v",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = String;

    /// `param=v1,v2,...` or `param=start:stop:count` (count evenly spaced points).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| format!("expected param=values, got `{s}`"))?;
        let param = match name.trim() {
            "lambda" => SweepParam::Lambda,
            "mu" => SweepParam::Mu,
            "D" => SweepParam::D,
            "r" => SweepParam::R,
            "T" => SweepParam::T,
            "v" => SweepParam::V,
            other => return Err(format!("unknown sweep parameter `{other}`")),
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        let values = match list.split(':').collect::<Vec<_>>()[..] {
            [start, stop, count] => {
                let (start, stop) = (num(start)?, num(stop)?);
                let count: usize = count
                    .trim()
                    .parse()
                    .map_err(|e| format!("`{count}`: {e}"))?;
                match count {
                    0 => Vec::new(),
                    1 => vec![start],
                    _ => (0..count)
                        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                        .collect(),
                }
            }
            [_] => list.split(',').map(num).collect::<Result<_, _>>()?,
            _ => return Err(format!("cannot read sweep values `{list}`")),
        };
        if values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        Ok(SweepSpec { param, values })
    }
}

pub fn as_u32(x: f64) -> Result<u32, CliError> {
    if x >= 0.0 && x.fract() == 0.0 && x <= f64::from(u32::MAX) {
        Ok(x as u32)
    } else {
        Err(CliError::Usage(format!(
            "sweep value {x} must be a non-negative integer here"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord<T> {
    pub parameter: SweepParam,
    pub value: f64,
    pub result: T,
}

pub fn records<T>(spec: &SweepSpec, results: Vec<T>) -> Vec<SweepRecord<T>> {
    spec.values
        .iter()
        .zip(results)
        .map(|(&value, result)| SweepRecord {
            parameter: spec.param,
            value,
            result,
        })
        .collect()
}
