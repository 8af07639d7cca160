//! Channel and distribution files.
//!
//! A channel is a JSON object `{"input_labels": [...], "output_labels": [...],
//! "rows": [[...], ...]}` (labels optional) or a CSV file with one row per
//! input symbol and an optional header of output labels. A distribution is a
//! JSON array, a JSON object with a `probs` field, or a single CSV line.
//! Wherever a path is expected a built-in name may be given instead:
//! `bsc:<p>`, `bec:<p>`, `identity:<k>`, `useless:<k>x<m>` for channels and
//! `uniform:<k>`, `point:<k>:<i>` for distributions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, Distribution};
use crate::error::{Error, Result};
use crate::idcode::IDCode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_labels: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl ChannelFile {
    pub fn into_channel(self) -> Result<Channel> {
        Channel::new(self.rows)?.with_labels(self.input_labels, self.output_labels)
    }

    pub fn from_channel(w: &Channel) -> Self {
        ChannelFile {
            input_labels: w.input_labels().map(<[String]>::to_vec),
            output_labels: w.output_labels().map(<[String]>::to_vec),
            rows: w.to_rows(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistributionFile {
    Bare(Vec<f64>),
    Object { probs: Vec<f64> },
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: cannot read '{}' as a number", s.trim())))
}

/// Parses the part after `name:` of a built-in.
fn builtin_arg<T: std::str::FromStr>(spec: &str, arg: &str) -> Result<T> {
    arg.parse()
        .map_err(|_| Error::Parse(format!("built-in '{spec}': cannot read '{arg}'")))
}

pub fn builtin_channel(spec: &str) -> Option<Result<Channel>> {
    let (name, arg) = spec.split_once(':')?;
    Some(match name {
        "bsc" => builtin_arg(spec, arg).and_then(Channel::bsc),
        "bec" => builtin_arg(spec, arg).and_then(Channel::bec),
        "identity" => builtin_arg(spec, arg).and_then(Channel::identity),
        "useless" => match arg.split_once('x') {
            Some((k, m)) => builtin_arg(spec, k).and_then(|k| Channel::useless(k, builtin_arg(spec, m)?)),
            None => Err(Error::Parse(format!("built-in '{spec}': expected useless:<k>x<m>"))),
        },
        _ => return None,
    })
}

pub fn builtin_distribution(spec: &str) -> Option<Result<Distribution>> {
    let (name, arg) = spec.split_once(':')?;
    Some(match name {
        "uniform" => builtin_arg::<usize>(spec, arg).and_then(|k| {
            if k == 0 {
                Err(Error::domain("uniform:<k> needs k >= 1"))
            } else {
                Ok(Distribution::uniform(k))
            }
        }),
        "point" => match arg.split_once(':') {
            Some((k, i)) => builtin_arg::<usize>(spec, k).and_then(|k| {
                let i: usize = builtin_arg(spec, i)?;
                if i >= k {
                    Err(Error::domain(format!(
                        "point mass at {i} outside an alphabet of size {k}"
                    )))
                } else {
                    Ok(Distribution::point_mass(k, i))
                }
            }),
            None => Err(Error::Parse(format!("built-in '{spec}': expected point:<k>:<i>"))),
        },
        _ => return None,
    })
}

fn looks_like_json(text: &str) -> bool {
    matches!(text.trim_start().chars().next(), Some('{') | Some('['))
}

pub fn parse_channel_json(text: &str) -> Result<Channel> {
    let file: ChannelFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("channel JSON: {e}")))?;
    file.into_channel()
}

pub fn parse_channel_csv(text: &str) -> Result<Channel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut labels = None;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("channel CSV: {e}")))?;
        if i == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            labels = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row = record
            .iter()
            .map(|f| parse_number(f, &format!("channel CSV row {}", rows.len())))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Channel::new(rows)?.with_labels(None, labels)
}

pub fn parse_channel(text: &str) -> Result<Channel> {
    if looks_like_json(text) {
        parse_channel_json(text)
    } else {
        parse_channel_csv(text)
    }
}

pub fn parse_distribution(text: &str) -> Result<Distribution> {
    let probs = if looks_like_json(text) {
        match serde_json::from_str::<DistributionFile>(text)
            .map_err(|e| Error::Parse(format!("distribution JSON: {e}")))?
        {
            DistributionFile::Bare(v) | DistributionFile::Object { probs: v } => v,
        }
    } else {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| parse_number(s, "distribution CSV"))
            .collect::<Result<Vec<f64>>>()?
    };
    Distribution::new(probs)
}

pub fn parse_code(text: &str) -> Result<IDCode> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("code JSON: {e}")))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// A built-in name or a file path.
pub fn load_channel(spec: &str) -> Result<Channel> {
    match builtin_channel(spec) {
        Some(r) => r,
        None => parse_channel(&read(Path::new(spec))?),
    }
}

pub fn load_distribution(spec: &str) -> Result<Distribution> {
    match builtin_distribution(spec) {
        Some(r) => r,
        None => parse_distribution(&read(Path::new(spec))?),
    }
}

pub fn load_code(path: &str) -> Result<IDCode> {
    parse_code(&read(Path::new(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv_agree() {
        let a = parse_channel(r#"{"rows": [[0.9, 0.1], [0.1, 0.9]], "output_labels": ["a", "b"]}"#).unwrap();
        let b = parse_channel("a, b\n0.9, 0.1\n0.1, 0.9\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a,
            Channel::bsc(0.1)
                .unwrap()
                .with_labels(None, Some(vec!["a".into(), "b".into()]))
                .unwrap()
        );
    }

    #[test]
    fn bad_row_is_named() {
        let err = parse_channel("[0.9, 0.1]").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let err = parse_channel(r#"{"rows": [[0.9, 0.1], [0.7, 0.1]]}"#).unwrap_err();
        assert!(err.to_string().contains("row 1 not stochastic"), "{err}");
    }

    #[test]
    fn builtins() {
        assert_eq!(load_channel("bsc:0.1").unwrap(), Channel::bsc(0.1).unwrap());
        assert_eq!(load_channel("useless:3x2").unwrap(), Channel::useless(3, 2).unwrap());
        assert_eq!(load_distribution("uniform:4").unwrap(), Distribution::uniform(4));
        assert_eq!(load_distribution("point:3:2").unwrap(), Distribution::point_mass(3, 2));
        assert!(load_channel("bsc:x").is_err());
        assert!(load_distribution("point:2:2").is_err());
        assert!(matches!(load_channel("/no/such/file.json"), Err(Error::Io(_))));
    }

    #[test]
    fn distribution_forms() {
        let d = Distribution::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(parse_distribution("[0.25, 0.75]").unwrap(), d);
        assert_eq!(parse_distribution(r#"{"probs": [0.25, 0.75]}"#).unwrap(), d);
        assert_eq!(parse_distribution("0.25,0.75\n").unwrap(), d);
    }

    #[test]
    fn channel_file_round_trip() {
        let w = Channel::bec(0.3).unwrap();
        let text = serde_json::to_string(&ChannelFile::from_channel(&w)).unwrap();
        assert_eq!(parse_channel(&text).unwrap(), w);
    }
}
