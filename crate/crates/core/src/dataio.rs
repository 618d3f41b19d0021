//! Annual data ingestion, gap filling, plausibility checks and synthetic
//! regional presets.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moea::EAConfig;
use crate::scenario::FeedbackCoefficients;
use crate::sd::{ExogenousSeries, ModelCoefficients, PolicyBounds, PolicyVector, SERIES_NAMES};

/// Maps series names to CSV headers. Unlisted series use their own name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default = "default_year_column")]
    pub year: String,
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
}

fn default_year_column() -> String {
    "year".into()
}

impl ColumnMap {
    pub fn identity() -> Self {
        Self {
            year: default_year_column(),
            columns: BTreeMap::new(),
        }
    }

    pub fn header_for<'a>(&'a self, series: &'a str) -> &'a str {
        self.columns.get(series).map(String::as_str).unwrap_or(series)
    }

    pub fn validate(&self) -> Result<()> {
        for k in self.columns.keys() {
            if !SERIES_NAMES.contains(&k.as_str()) {
                return Err(Error::Config(format!("column map names unknown series '{k}'")));
            }
        }
        Ok(())
    }
}

/// Year-keyed table whose cells may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAnnualTable {
    pub years: Vec<i32>,
    /// One entry per name in [`SERIES_NAMES`], aligned with `years`.
    pub columns: BTreeMap<String, Vec<Option<f64>>>,
}

impl RawAnnualTable {
    pub fn column(&self, name: &str) -> Option<&Vec<Option<f64>>> {
        self.columns.get(name)
    }

    /// Fills a column that has no known values with a constant.
    /// Returns whether anything was filled.
    pub fn fill_if_empty(&mut self, name: &str, value: f64) -> bool {
        let n = self.years.len();
        let col = self.columns.entry(name.to_string()).or_insert_with(|| vec![None; n]);
        if col.iter().all(Option::is_none) {
            col.iter_mut().for_each(|c| *c = Some(value));
            true
        } else {
            false
        }
    }

    pub fn from_series(series: &ExogenousSeries) -> Self {
        let columns = SERIES_NAMES
            .iter()
            .zip(series.columns())
            .map(|(n, c)| (n.to_string(), c.iter().map(|v| Some(*v)).collect()))
            .collect();
        Self {
            years: series.years.clone(),
            columns,
        }
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a CSV table. Lines starting with `#` are skipped; blank or
/// unparseable cells become missing; series absent from the file are
/// entirely missing.
pub fn read_table<R: Read>(reader: R, map: &ColumnMap) -> Result<RawAnnualTable> {
    map.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |h: &str| headers.iter().position(|x| x == h);
    let year_idx = find(&map.year)
        .ok_or_else(|| Error::Format(format!("missing year column '{}'", map.year)))?;
    let idx: Vec<Option<usize>> = SERIES_NAMES.iter().map(|n| find(map.header_for(n))).collect();

    let mut rows: Vec<(i32, Vec<Option<f64>>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ytxt = rec.get(year_idx).unwrap_or("").trim();
        let year: i32 = ytxt
            .parse::<i32>()
            .or_else(|_| match ytxt.parse::<f64>() {
                Ok(f) if f.fract() == 0.0 && f.abs() < 1e6 => Ok(f as i32),
                _ => Err(()),
            })
            .map_err(|_| Error::Format(format!("record {}: bad year '{ytxt}'", line + 1)))?;
        let vals = idx
            .iter()
            .map(|i| i.and_then(|i| rec.get(i)).and_then(parse_cell))
            .collect();
        rows.push((year, vals));
    }
    rows.sort_by_key(|r| r.0);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Format(format!("duplicate year {}", w[0].0)));
        }
        if w[1].0 != w[0].0 + 1 {
            return Err(Error::Format(format!(
                "years must be consecutive, found {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    let years = rows.iter().map(|r| r.0).collect();
    let columns = SERIES_NAMES
        .iter()
        .enumerate()
        .map(|(k, n)| (n.to_string(), rows.iter().map(|r| r.1[k]).collect()))
        .collect();
    Ok(RawAnnualTable { years, columns })
}

pub fn load_table(path: &Path, map: &ColumnMap) -> Result<RawAnnualTable> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_table(f, map)
}

/// Linear interpolation across interior gaps, nearest-value fill at the ends.
pub fn interpolate_column(name: &str, col: &[Option<f64>]) -> Result<Vec<f64>> {
    let known: Vec<(usize, f64)> = col
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let (first, last) = match (known.first(), known.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::Data(format!("column {name} has no values"))),
    };
    let mut out = vec![0.0; col.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = if i <= first.0 {
            first.1
        } else if i >= last.0 {
            last.1
        } else {
            match col[i] {
                Some(v) => v,
                None => {
                    let right = known.partition_point(|(j, _)| *j < i);
                    let (i0, v0) = known[right - 1];
                    let (i1, v1) = known[right];
                    v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64
                }
            }
        };
    }
    Ok(out)
}

pub fn interpolate_missing(table: &RawAnnualTable) -> Result<ExogenousSeries> {
    if table.years.is_empty() {
        return Err(Error::Data("table has no rows".into()));
    }
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(SERIES_NAMES.len());
    for name in SERIES_NAMES {
        let col = table
            .columns
            .get(name)
            .ok_or_else(|| Error::Data(format!("column {name} has no values")))?;
        dense.push(interpolate_column(name, col)?);
    }
    let mut it = dense.into_iter();
    let mut next = || it.next().expect("one column per series");
    let series = ExogenousSeries {
        years: table.years.clone(),
        visitors_base: next(),
        gov_revenue_base: next(),
        gov_expenditure_base: next(),
        glacier_retreat: next(),
        co2_emission: next(),
        population: next(),
        unemployment: next(),
        satisfaction_base: next(),
    };
    Ok(series)
}

/// Writes the series with a `year` column followed by every series column.
/// Values use the shortest round-trip representation.
pub fn write_series<W: Write>(series: &ExogenousSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["year".to_string()];
    header.extend(SERIES_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    let cols = series.columns();
    for (t, y) in series.years.iter().enumerate() {
        let mut rec = vec![y.to_string()];
        rec.extend(cols.iter().map(|c| format!("{}", c[t])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Inclusive plausibility range per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub ranges: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeWarning {
    pub series: String,
    pub year: i32,
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl std::fmt::Display for RangeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} in {} = {} outside [{}, {}]",
            self.series, self.year, self.value, self.low, self.high
        )
    }
}

pub fn validate_ranges(series: &ExogenousSeries, envelope: &Envelope) -> Vec<RangeWarning> {
    let mut out = Vec::new();
    for (name, col) in SERIES_NAMES.iter().zip(series.columns()) {
        let Some(&(low, high)) = envelope.ranges.get(*name) else {
            continue;
        };
        for (y, v) in series.years.iter().zip(col) {
            if !(*v >= low && *v <= high) {
                out.push(RangeWarning {
                    series: name.to_string(),
                    year: *y,
                    value: *v,
                    low,
                    high,
                });
            }
        }
    }
    out
}

/// How the initial environment index is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialEnvironment {
    Fixed { value: f64 },
    /// Uniform draw from `center ± half_width`.
    Uniform { center: f64, half_width: f64 },
}

impl InitialEnvironment {
    pub fn draw(&self, seed: u64) -> f64 {
        match *self {
            InitialEnvironment::Fixed { value } => value,
            InitialEnvironment::Uniform { center, half_width } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE0E0_E0E0);
                (center + half_width * (2.0 * rng.gen::<f64>() - 1.0)).clamp(0.0, 1.0)
            }
        }
    }
}

/// Start and end of one synthetic series' linear trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub start: f64,
    pub end: f64,
    /// Relative noise amplitude; 0 keeps the series exactly on trend.
    pub noise: f64,
}

impl Trend {
    const fn new(start: f64, end: f64, noise: f64) -> Self {
        Self { start, end, noise }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPreset {
    pub name: String,
    pub first_year: i32,
    pub last_year: i32,
    pub bounds: PolicyBounds,
    /// Mid-range policy used when a run names none.
    pub policy: PolicyVector,
    pub coefficients: ModelCoefficients,
    pub feedback: FeedbackCoefficients,
    pub initial_environment: InitialEnvironment,
    pub envelope: Envelope,
    /// Trend per series, in [`SERIES_NAMES`] order.
    pub trends: Vec<Trend>,
    pub ea: EAConfig,
    /// Series held at preset constants rather than observed data.
    pub assumed_series: Vec<String>,
}

fn envelope(pairs: [(f64, f64); 8]) -> Envelope {
    Envelope {
        ranges: SERIES_NAMES
            .iter()
            .zip(pairs)
            .map(|(n, r)| (n.to_string(), r))
            .collect(),
    }
}

impl RegionPreset {
    pub fn juneau() -> Self {
        Self {
            name: "juneau".into(),
            first_year: 2008,
            last_year: 2024,
            bounds: PolicyBounds::juneau(),
            policy: PolicyVector {
                tax_rate: 0.1,
                env_ratio: 0.3,
                dev_incentive: 0.5,
                capacity_limit: 3.0e6,
                ship_limit: 700.0,
                carbon_fee: 50.0,
                glacier_ratio: 0.5,
            },
            coefficients: ModelCoefficients::default(),
            feedback: FeedbackCoefficients::default(),
            initial_environment: InitialEnvironment::Fixed { value: 0.7 },
            envelope: envelope([
                (9.0e5, 3.1e6),
                (6.5e6, 1.03e7),
                (6.0e6, 1.0e7),
                (220.0, 350.0),
                (77_000.0, 104_800.0),
                (2.5e4, 4.0e4),
                (0.02, 0.10),
                (0.29, 0.48),
            ]),
            trends: vec![
                Trend::new(1.0e6, 3.1e6, 0.02),
                Trend::new(7.0e6, 1.03e7, 0.02),
                Trend::new(6.5e6, 9.8e6, 0.02),
                Trend::new(220.0, 350.0, 0.02),
                Trend::new(77_000.0, 104_800.0, 0.02),
                Trend::new(32_000.0, 32_000.0, 0.0),
                Trend::new(0.045, 0.045, 0.0),
                Trend::new(0.48, 0.29, 0.0),
            ],
            ea: EAConfig::default(),
            assumed_series: vec!["population".into(), "unemployment".into()],
        }
    }

    pub fn iceland() -> Self {
        let mut coefficients = ModelCoefficients::default();
        coefficients.glacier_sensitivity = 0.25;
        coefficients.gov_base_share = 0.35;
        Self {
            name: "iceland".into(),
            first_year: 2008,
            last_year: 2024,
            bounds: PolicyBounds::iceland(),
            policy: PolicyVector {
                tax_rate: 0.1,
                env_ratio: 0.3,
                dev_incentive: 0.5,
                capacity_limit: 3.5e6,
                ship_limit: 700.0,
                carbon_fee: 60.0,
                glacier_ratio: 0.5,
            },
            coefficients,
            feedback: FeedbackCoefficients::default(),
            initial_environment: InitialEnvironment::Uniform {
                center: 0.65,
                half_width: 0.05,
            },
            envelope: envelope([
                (4.0e5, 3.2e6),
                (1.5e7, 4.0e7),
                (1.4e7, 3.8e7),
                (200.0, 300.0),
                (2.0e5, 4.0e5),
                (3.0e5, 4.0e5),
                (0.02, 0.10),
                (0.35, 0.60),
            ]),
            trends: vec![
                Trend::new(5.0e5, 3.2e6, 0.02),
                Trend::new(1.8e7, 3.6e7, 0.02),
                Trend::new(1.7e7, 3.4e7, 0.02),
                Trend::new(200.0, 300.0, 0.02),
                Trend::new(2.2e5, 3.6e5, 0.02),
                Trend::new(3.2e5, 3.8e5, 0.0),
                Trend::new(0.04, 0.04, 0.0),
                Trend::new(0.60, 0.40, 0.0),
            ],
            ea: EAConfig {
                population_size: 120,
                generations: 80,
                ..EAConfig::default()
            },
            assumed_series: vec!["population".into(), "unemployment".into()],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "juneau" => Ok(Self::juneau()),
            "iceland" => Ok(Self::iceland()),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !self.bounds.contains(&self.policy) {
            return Err(Error::Config("preset policy lies outside its bounds".into()));
        }
        self.coefficients.validate()?;
        self.feedback.validate()?;
        self.ea.validate()?;
        if self.last_year <= self.first_year {
            return Err(Error::Config("preset needs at least two years".into()));
        }
        if self.trends.len() != SERIES_NAMES.len() {
            return Err(Error::Config("preset needs one trend per series".into()));
        }
        for (n, t) in SERIES_NAMES.iter().zip(&self.trends) {
            if !(0.0..=0.02).contains(&t.noise) {
                return Err(Error::Config(format!("{n}: noise must lie in [0, 0.02]")));
            }
            if let Some(&(lo, hi)) = self.envelope.ranges.get(*n) {
                let inside = |v: f64| v >= lo && v <= hi;
                if !(inside(t.start) && inside(t.end)) {
                    return Err(Error::Config(format!("{n}: trend endpoints leave the envelope")));
                }
            }
        }
        Ok(())
    }
}

/// Linear trends with seeded multiplicative noise, clamped into the envelope.
/// First and last values sit exactly on their trend endpoints.
pub fn synth_dataset(preset: &RegionPreset, seed: u64) -> Result<ExogenousSeries> {
    preset.validate()?;
    let years: Vec<i32> = (preset.first_year..=preset.last_year).collect();
    let n = years.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(SERIES_NAMES.len());
    for (name, tr) in SERIES_NAMES.iter().zip(&preset.trends) {
        let (lo, hi) = preset
            .envelope
            .ranges
            .get(*name)
            .copied()
            .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let col = (0..n)
            .map(|t| {
                let s = t as f64 / (n - 1) as f64;
                let trend = tr.start + (tr.end - tr.start) * s;
                // Draw every year so the stream does not depend on endpoints.
                let eps: f64 = rng.gen_range(-1.0..=1.0);
                let v = if t == 0 || t == n - 1 {
                    trend
                } else {
                    trend * (1.0 + tr.noise * eps)
                };
                v.clamp(lo, hi)
            })
            .collect();
        cols.push(col);
    }
    let mut it = cols.into_iter();
    let mut next = || it.next().expect("one column per series");
    Ok(ExogenousSeries {
        years,
        visitors_base: next(),
        gov_revenue_base: next(),
        gov_expenditure_base: next(),
        glacier_retreat: next(),
        co2_emission: next(),
        population: next(),
        unemployment: next(),
        satisfaction_base: next(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "year,visitors_base,gov_revenue_base,gov_expenditure_base,glacier_retreat,co2_emission,population,unemployment,satisfaction_base\n";

    #[test]
    fn blank_cell_is_missing() {
        let csv = format!("{HEADER}2008,100,1,1,250,8e4,3e4,0.04,0.4\n2009,,1,1,250,8e4,3e4,0.04,0.4\n2010,200,1,1,250,8e4,3e4,0.04,0.4\n");
        let t = read_table(csv.as_bytes(), &ColumnMap::identity()).unwrap();
        assert_eq!(t.column("visitors_base").unwrap()[1], None);
        let s = interpolate_missing(&t).unwrap();
        assert_eq!(s.visitors_base, vec![100.0, 150.0, 200.0]);
    }

    #[test]
    fn duplicate_year_rejected() {
        let csv = format!("{HEADER}2010,1,1,1,1,1,1,0,0\n2010,1,1,1,1,1,1,0,0\n");
        assert!(matches!(read_table(csv.as_bytes(), &ColumnMap::identity()), Err(Error::Format(_))));
    }

    #[test]
    fn missing_year_column_rejected() {
        let csv = "visitors_base\n1\n";
        assert!(matches!(read_table(csv.as_bytes(), &ColumnMap::identity()), Err(Error::Format(_))));
    }

    #[test]
    fn column_map_renames() {
        let csv = "Year,Arrivals\n2008,5\n2009,7\n";
        let mut map = ColumnMap::identity();
        map.year = "Year".into();
        map.columns.insert("visitors_base".into(), "Arrivals".into());
        let t = read_table(csv.as_bytes(), &map).unwrap();
        assert_eq!(t.column("visitors_base").unwrap(), &vec![Some(5.0), Some(7.0)]);
        assert!(t.column("population").unwrap().iter().all(Option::is_none));

        map.columns.insert("nonsense".into(), "x".into());
        assert!(read_table(csv.as_bytes(), &map).is_err());
    }

    #[test]
    fn edge_fill_and_all_missing() {
        assert_eq!(
            interpolate_column("x", &[None, Some(5.0), None, Some(9.0), None]).unwrap(),
            vec![5.0, 5.0, 7.0, 9.0, 9.0]
        );
        assert!(matches!(interpolate_column("x", &[None, None]), Err(Error::Data(_))));
    }

    #[test]
    fn fill_if_empty_only_touches_empty_columns() {
        let csv = "year,visitors_base\n2008,5\n2009,7\n";
        let mut t = read_table(csv.as_bytes(), &ColumnMap::identity()).unwrap();
        assert!(t.fill_if_empty("population", 3.2e4));
        assert!(!t.fill_if_empty("visitors_base", 0.0));
        assert_eq!(t.column("population").unwrap(), &vec![Some(3.2e4); 2]);
    }

    #[test]
    fn envelope_examples() {
        let mut s = synth_dataset(&RegionPreset::juneau(), 1).unwrap();
        let env = RegionPreset::juneau().envelope;
        s.glacier_retreat[3] = 300.0;
        s.co2_emission[3] = 90_000.0;
        assert!(validate_ranges(&s, &env).is_empty());
        s.glacier_retreat[3] = 1000.0;
        let w = validate_ranges(&s, &env);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].series, "glacier_retreat");
    }

    #[test]
    fn juneau_synth_endpoints() {
        for seed in 0..20 {
            let s = synth_dataset(&RegionPreset::juneau(), seed).unwrap();
            assert_eq!(s.years.first(), Some(&2008));
            assert_eq!(s.years.last(), Some(&2024));
            assert!(*s.visitors_base.last().unwrap() <= 3.1e6);
            assert_eq!(s.satisfaction_base[0], 0.48);
            assert_eq!(*s.satisfaction_base.last().unwrap(), 0.29);
        }
    }

    #[test]
    fn iceland_initial_environment_in_band() {
        let p = RegionPreset::iceland();
        for seed in 0..50 {
            let e = p.initial_environment.draw(seed);
            assert!((0.6..=0.7).contains(&e));
        }
        assert_eq!(RegionPreset::juneau().initial_environment.draw(9), 0.7);
    }

    #[test]
    fn presets_validate() {
        RegionPreset::juneau().validate().unwrap();
        RegionPreset::iceland().validate().unwrap();
        assert!(RegionPreset::by_name("atlantis").is_err());
    }
}
