//! Simulation designs, the chip-lifetime surrogate, and CSV ingestion.

use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdamiError};
use crate::util::rng_from_seed;

/// Lower/upper bound of every simulated covariate.
pub const SIM_RANGE: (f64, f64) = (-2.5, 2.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    /// Zero-based columns with a genuine main effect.
    pub main_set: BTreeSet<usize>,
    /// Zero-based column sets entering interaction components.
    pub interaction_groups: Vec<BTreeSet<usize>>,
    pub sigma: f64,
    pub case_id: Option<u32>,
}

impl TruthSpec {
    /// Union of main and interaction variables.
    pub fn active_variables(&self) -> BTreeSet<usize> {
        let mut s = self.main_set.clone();
        for g in &self.interaction_groups {
            s.extend(g.iter().copied());
        }
        s
    }

    /// Variables that enter only through interactions.
    pub fn footprint_variables(&self) -> BTreeSet<usize> {
        self.active_variables()
            .difference(&self.main_set)
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub feature_names: Option<Vec<String>>,
    pub truth: Option<TruthSpec>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Dataset> {
        let d = Dataset {
            x,
            y,
            feature_names: None,
            truth: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = self.x.dim();
        if n < 2 || k < 1 {
            return Err(SdamiError::InvalidArgument(format!(
                "dataset needs n >= 2 and k >= 1 (got n = {n}, k = {k})"
            )));
        }
        if self.y.len() != n {
            return Err(SdamiError::DimensionMismatch(format!(
                "{} responses for {n} rows",
                self.y.len()
            )));
        }
        if let Some(((i, j), _)) = self.x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SdamiError::MissingValue {
                row: i + 1,
                column: self.column_name(j),
            });
        }
        if let Some((i, _)) = self.y.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SdamiError::MissingValue {
                row: i + 1,
                column: "response".into(),
            });
        }
        if let Some(names) = &self.feature_names {
            if names.len() != k {
                return Err(SdamiError::DimensionMismatch(format!(
                    "{} feature names for {k} columns",
                    names.len()
                )));
            }
        }
        if let Some(t) = &self.truth {
            if let Some(&j) = t.active_variables().iter().find(|&&j| j >= k) {
                return Err(SdamiError::InvalidArgument(format!(
                    "truth references column {} beyond k = {k}",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn column_name(&self, j: usize) -> String {
        self.feature_names
            .as_ref()
            .and_then(|n| n.get(j).cloned())
            .unwrap_or_else(|| format!("x{}", j + 1))
    }

    /// Rows selected by index, truth and names carried over.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select(ndarray::Axis(0), rows);
        let y = self.y.select(ndarray::Axis(0), rows);
        Dataset {
            x,
            y,
            feature_names: self.feature_names.clone(),
            truth: self.truth.clone(),
        }
    }

    /// Write features then the response as the last column (`y`).
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}").map_err(|e| SdamiError::io("<csv>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.k()).map(|j| self.column_name(j)).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| format_float(*v)).collect();
            rec.push(format_float(self.y[i]));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| SdamiError::io("<csv>", e))?;
        Ok(())
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn f1(x: f64) -> f64 {
    -2.0 * (2.0 * x).sin()
}

pub fn f2(x: f64) -> f64 {
    x * x / 2.0 + 1.0
}

pub fn f3(x: f64) -> f64 {
    x - 0.5
}

pub fn f4(x: f64) -> f64 {
    (-x).exp() + (-1.0_f64).exp() - 1.0
}

pub fn f5(x1: f64, x2: f64) -> f64 {
    (x1.sin() + x2.cos() - 1.0).exp()
}

/// Noiseless regression function of a simulation case at one row.
pub fn case_regression(case_id: u32, row: ArrayView1<f64>) -> Result<f64> {
    if row.len() < 5 {
        return Err(SdamiError::DimensionMismatch(format!(
            "simulation cases need at least 5 columns, row has {}",
            row.len()
        )));
    }
    let x = |j: usize| row[j - 1];
    let mains = f1(x(1)) + f2(x(2)) + f3(x(3));
    Ok(match case_id {
        1 => mains + f4(x(4)),
        2 => mains + 0.01 * f4(x(4)),
        3 => mains + f5(x(4), x(5)),
        4 => mains + f5(x(3), x(4)),
        5 => mains + f5(x(2), x(3)),
        6 => f5(x(1), x(2)) + f5(x(3), x(4)),
        other => return Err(SdamiError::InvalidCase(other)),
    })
}

/// Generating structure of a case (zero-based column indices).
pub fn case_truth(case_id: u32, sigma: f64) -> Result<TruthSpec> {
    let set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<usize>>();
    let (main, inter): (BTreeSet<usize>, Vec<BTreeSet<usize>>) = match case_id {
        1 | 2 => (set(&[0, 1, 2, 3]), vec![]),
        3 => (set(&[0, 1, 2]), vec![set(&[3, 4])]),
        4 => (set(&[0, 1, 2]), vec![set(&[2, 3])]),
        5 => (set(&[0, 1, 2]), vec![set(&[1, 2])]),
        6 => (BTreeSet::new(), vec![set(&[0, 1]), set(&[2, 3])]),
        other => return Err(SdamiError::InvalidCase(other)),
    };
    Ok(TruthSpec {
        main_set: main,
        interaction_groups: inter,
        sigma,
        case_id: Some(case_id),
    })
}

/// Uniform(−2.5, 2.5) covariates, case regression function plus N(0, σ²) noise.
pub fn simulate_case(case_id: u32, n: usize, k: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    let truth = case_truth(case_id, sigma)?;
    if n < 10 {
        return Err(SdamiError::InvalidArgument(format!(
            "n must be >= 10 (got {n})"
        )));
    }
    if k < 5 {
        return Err(SdamiError::InvalidArgument(format!(
            "k must be >= 5 (got {k})"
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(SdamiError::InvalidArgument(format!(
            "sigma must be >= 0 (got {sigma})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let x = Array2::from_shape_fn((n, k), |_| rng.random_range(SIM_RANGE.0..SIM_RANGE.1));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = case_regression(case_id, x.row(i))? + sigma * eps;
    }
    Ok(Dataset {
        x,
        y,
        feature_names: None,
        truth: Some(truth),
    })
}

/// Physical inputs of the chip-lifetime surrogate, with sampling ranges.
pub const CHIP_INPUTS: [(&str, f64, f64); 9] = [
    ("a", -81.9, -74.1),
    ("b", 7.69e-2, 8.51e-2),
    ("c", 8.37e3, 9.25e3),
    ("d", -8.14e5, -7.33e5),
    ("beta", 1.476, 1.804),
    ("V", 1.2, 1.3),
    ("T", 120.0, 180.0),
    ("WL", 4e-4, 6e-4),
    ("A_FEOL", 4.75e-7, 5.25e-7),
];

/// Stress probability, held at 1.
pub const CHIP_STRESS: f64 = 1.0;

/// log of the 63% failure quantile for one set of physical inputs
/// (`[a, b, c, d, beta, V, T, WL, A_FEOL]`).
pub fn chip_log_eta(p: &[f64]) -> f64 {
    let [a, b, c, d, beta, v, t, wl, area] = [p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]];
    area.ln() - wl.ln() / beta - 1.0 / beta + (a + b * t) * v.ln() + (c * t + d) / (t * t)
        - CHIP_STRESS.ln()
}

/// Chip surrogate: 9 physical inputs uniform on their ranges, `y = log η`,
/// plus `noise_features` irrelevant Uniform[0, 1) columns.
pub fn simulate_chip(n: usize, noise_features: usize, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(SdamiError::InvalidArgument(format!(
            "n must be >= 10 (got {n})"
        )));
    }
    let k = CHIP_INPUTS.len() + noise_features;
    let mut rng = rng_from_seed(seed);
    let mut x = Array2::zeros((n, k));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        for (j, &(_, lo, hi)) in CHIP_INPUTS.iter().enumerate() {
            x[[i, j]] = rng.random_range(lo..hi);
        }
        for j in CHIP_INPUTS.len()..k {
            x[[i, j]] = rng.random_range(0.0..1.0);
        }
        y[i] = chip_log_eta(x.row(i).as_slice().expect("row-major"));
    }
    let mut names: Vec<String> = CHIP_INPUTS.iter().map(|c| c.0.to_string()).collect();
    names.extend((1..=noise_features).map(|j| format!("noise{j}")));
    let set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<usize>>();
    // a·lnV, b·T·lnV, c/T, d/T², WL^(-1/β)
    let truth = TruthSpec {
        main_set: (0..CHIP_INPUTS.len()).collect(),
        interaction_groups: vec![
            set(&[0, 5]),
            set(&[1, 5, 6]),
            set(&[2, 6]),
            set(&[3, 6]),
            set(&[4, 7]),
        ],
        sigma: 0.0,
        case_id: None,
    };
    Ok(Dataset {
        x,
        y,
        feature_names: Some(names),
        truth: Some(truth),
    })
}

/// Which column of a CSV file holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    /// Zero-based position.
    Index(usize),
    Last,
}

impl std::str::FromStr for ResponseColumn {
    type Err = SdamiError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "last" {
            return Ok(ResponseColumn::Last);
        }
        match s.parse::<usize>() {
            Ok(i) => Ok(ResponseColumn::Index(i)),
            Err(_) => Ok(ResponseColumn::Name(s.to_string())),
        }
    }
}

pub fn load_csv(
    path: impl AsRef<Path>,
    response: &ResponseColumn,
    header: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| SdamiError::io(path, e))?;
    parse_csv(&text, response, header)
}

/// Parse comma-separated numeric data. Lines starting with `#` are comments.
pub fn parse_csv(text: &str, response: &ResponseColumn, header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let names: Option<Vec<String>> = if header {
        let h: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut seen = HashSet::new();
        for name in &h {
            if !seen.insert(name.as_str()) {
                return Err(SdamiError::DuplicateHeader(name.clone()));
            }
        }
        Some(h)
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = names.as_ref().map(Vec::len);
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = r + 1;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(SdamiError::DimensionMismatch(format!(
                "row {row_no} has {} fields, expected {w}",
                rec.len()
            )));
        }
        let col_name = |c: usize| {
            names
                .as_ref()
                .map(|n| n[c].clone())
                .unwrap_or_else(|| format!("{}", c + 1))
        };
        let mut vals = Vec::with_capacity(w);
        for (c, field) in rec.iter().enumerate() {
            if field.is_empty()
                || field.eq_ignore_ascii_case("na")
                || field.eq_ignore_ascii_case("nan")
            {
                return Err(SdamiError::MissingValue {
                    row: row_no,
                    column: col_name(c),
                });
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => vals.push(v),
                _ => {
                    return Err(SdamiError::NonNumeric {
                        row: row_no,
                        column: col_name(c),
                        value: field.to_string(),
                    })
                }
            }
        }
        rows.push(vals);
    }
    let width = width.unwrap_or(0);
    if width < 2 {
        return Err(SdamiError::InvalidArgument(
            "csv needs at least one feature column and a response column".into(),
        ));
    }
    let resp = match response {
        ResponseColumn::Last => width - 1,
        ResponseColumn::Index(i) if *i < width => *i,
        ResponseColumn::Index(i) => return Err(SdamiError::MissingColumn(format!("{i}"))),
        ResponseColumn::Name(name) => names
            .as_ref()
            .and_then(|n| n.iter().position(|h| h == name))
            .ok_or_else(|| SdamiError::MissingColumn(name.clone()))?,
    };
    let n = rows.len();
    let k = width - 1;
    let mut x = Array2::zeros((n, k));
    let mut y = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let mut c_out = 0;
        for (c, &v) in row.iter().enumerate() {
            if c == resp {
                y[i] = v;
            } else {
                x[[i, c_out]] = v;
                c_out += 1;
            }
        }
    }
    let feature_names = names.map(|n| {
        n.into_iter()
            .enumerate()
            .filter(|(c, _)| *c != resp)
            .map(|(_, s)| s)
            .collect()
    });
    let d = Dataset {
        x,
        y,
        feature_names,
        truth: None,
    };
    d.validate()?;
    Ok(d)
}
