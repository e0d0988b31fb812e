//! CSV files and the run configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Price column with optional sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub t: Option<Vec<f64>>,
    pub price: Vec<f64>,
}

impl PriceSeries {
    /// Sampling step from the time column, which must be uniform.
    pub fn step(&self) -> Result<Option<f64>> {
        let Some(t) = &self.t else { return Ok(None) };
        if t.len() < 2 {
            return Err(LabError::Input(
                "need at least two samples to infer the step".into(),
            ));
        }
        let h = t[1] - t[0];
        if !(h > 0.0) {
            return Err(LabError::Input("time column is not increasing".into()));
        }
        for (i, w) in t.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > 1e-6 * h {
                return Err(LabError::Parse {
                    line: i as u64 + 3,
                    message: format!("time step {} differs from {h}", w[1] - w[0]),
                });
            }
        }
        Ok(Some(h))
    }
}

fn parse_field(field: &str, line: u64, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| LabError::Parse {
            line,
            message: format!("{column} value {field:?} is not a finite number"),
        })
}

/// Reads a price CSV with header `t,price` or `price`.
pub fn read_prices(reader: impl std::io::Read) -> Result<PriceSeries> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = csv
        .headers()
        .map_err(|e| LabError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let with_time = match headers
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["t", "price"] => true,
        ["price"] => false,
        other => {
            return Err(LabError::Parse {
                line: 1,
                message: format!(
                    "expected header `t,price` or `price`, found {:?}",
                    other.join(",")
                ),
            })
        }
    };
    let mut t = Vec::new();
    let mut price = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            LabError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if with_time {
            t.push(parse_field(&record[0], line, "t")?);
            price.push(parse_field(&record[1], line, "price")?);
        } else {
            price.push(parse_field(&record[0], line, "price")?);
        }
    }
    if price.is_empty() {
        return Err(LabError::Parse {
            line: 2,
            message: "no price rows".into(),
        });
    }
    Ok(PriceSeries {
        t: with_time.then_some(t),
        price,
    })
}

pub fn read_prices_file(path: &Path) -> Result<PriceSeries> {
    let file = fs::File::open(path).map_err(|e| LabError::io(path, e))?;
    read_prices(std::io::BufReader::new(file))
}

/// Shortest round-trip decimal form; never locale dependent.
pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

/// Writes a header row and numeric rows.
pub fn write_table<W: Write>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format_number(*x)))?;
    }
    w.flush().map_err(|e| LabError::Csv(e.into()))?;
    Ok(())
}

/// Writes a two-column `key,value` table.
pub fn write_pairs<W: Write>(out: W, pairs: &[(String, String)]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["key", "value"])?;
    for (k, v) in pairs {
        w.write_record([k, v])?;
    }
    w.flush().map_err(|e| LabError::Csv(e.into()))?;
    Ok(())
}

/// Creates `path` (and its directory) and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    f(&mut out)?;
    out.flush().map_err(|e| LabError::io(path, e))
}

/// Flat key = value run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
}

fn default_time_unit() -> String {
    "yr".into()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_tolerance() -> f64 {
    1e-10
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            time_unit: default_time_unit(),
            seed: None,
            out_dir: default_out_dir(),
            tolerance: default_tolerance(),
            tau: None,
            theta: None,
            variance: None,
            mu: None,
            m0: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        if !(config.tolerance > 0.0 && config.tolerance.is_finite()) {
            return Err(LabError::Config(format!(
                "tolerance {} must be positive",
                config.tolerance
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_both_layouts() {
        let p = read_prices("t,price\n0,100\n0.5,101\n1.0,99.5\n".as_bytes()).unwrap();
        assert_eq!(p.price, vec![100.0, 101.0, 99.5]);
        assert_eq!(p.step().unwrap(), Some(0.5));
        let p = read_prices("price\n1\n2\n".as_bytes()).unwrap();
        assert_eq!(p.t, None);
        assert_eq!(p.step().unwrap(), None);
    }

    #[test]
    fn parse_errors_carry_lines() {
        match read_prices("t,price\n0,1\n1,abc\n".as_bytes()) {
            Err(LabError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read_prices("time,value\n0,1\n".as_bytes()) {
            Err(LabError::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read_prices("t,price\n0,1\n1\n".as_bytes()) {
            Err(LabError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read_prices("t,price\n0,1\n1,2\n3,3\n".as_bytes())
            .unwrap()
            .step()
        {
            Err(LabError::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_format() {
        let mut out = Vec::new();
        write_table(
            &mut out,
            &["a", "b"],
            vec![vec![0.0, 1.0], vec![0.1, -2.5e-20]],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "a,b\n0.0,1.0\n0.1,-2.5e-20\n"
        );
    }

    #[test]
    fn config_round_trip() {
        let c = RunConfig {
            seed: Some(7),
            tau: Some(0.5),
            theta: Some(1.5),
            ..RunConfig::default()
        };
        let text = c.to_text().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        assert_eq!(RunConfig::parse(&text).unwrap().to_text().unwrap(), text);
        let d = RunConfig::parse("time_unit = \"day\"\nseed = 3\n").unwrap();
        assert_eq!(
            (d.time_unit.as_str(), d.seed, d.tolerance),
            ("day", Some(3), 1e-10)
        );
        assert!(RunConfig::parse("colour = 1\n").is_err());
        assert!(RunConfig::parse("tolerance = -1.0\n").is_err());
    }
}
