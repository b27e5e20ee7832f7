//! Longitudinal household observations with role-tagged columns.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Name of the auxiliary column recording how many waves back each lag looked.
pub const LAG_DISTANCE: &str = "lag_distance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Outcome,
    Treatment,
    Modifier,
    Confounder,
    Cluster,
    UnitId,
    Wave,
    Auxiliary,
}

impl ColumnRole {
    fn is_unique(self) -> bool {
        matches!(
            self,
            ColumnRole::Outcome
                | ColumnRole::Treatment
                | ColumnRole::Cluster
                | ColumnRole::UnitId
                | ColumnRole::Wave
        )
    }
}

impl std::fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(role_name(*self))
    }
}

/// Column name to role. Columns absent from the map are auxiliary.
pub type RoleMap = BTreeMap<String, ColumnRole>;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            ColumnData::Numeric(v) if v[row].is_nan() => String::new(),
            ColumnData::Numeric(v) => v[row].to_string(),
            ColumnData::Categorical(v) => v[row].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, role: ColumnRole, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            role,
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, role: ColumnRole, values: Vec<String>) -> Self {
        Column {
            name: name.into(),
            role,
            data: ColumnData::Categorical(values),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl ColumnStats {
    fn of(values: &[f64]) -> Option<Self> {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return None;
        }
        let (min, max) = stats::min_max(&finite);
        Some(ColumnStats {
            mean: stats::mean(&finite),
            sd: if finite.len() > 1 {
                stats::sample_sd(&finite)
            } else {
                0.0
            },
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub role: ColumnRole,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_rows: usize,
    pub n_units: usize,
    pub columns: Vec<ColumnSummary>,
}

/// Validated, immutable household-by-wave table.
///
/// Every mutation returns a new dataset with summary statistics recomputed.
/// When no column carries the `cluster` role, the unit-id column doubles as
/// the cluster identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    columns: Vec<Column>,
    stats: Vec<Option<ColumnStats>>,
    n_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA" || t == "NaN" || t == "nan"
}

fn parse_numeric(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

impl PanelDataset {
    /// Builds a dataset from columns, enforcing the role and key invariants.
    pub fn from_columns(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map(|c| c.data.len()).unwrap_or(0);
        if n_rows == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        let mut seen_names = HashSet::new();
        let mut role_counts: HashMap<ColumnRole, usize> = HashMap::new();
        for c in &columns {
            if c.data.len() != n_rows {
                return Err(Error::Data(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    c.name,
                    c.data.len()
                )));
            }
            if !seen_names.insert(c.name.as_str()) {
                return Err(Error::Data(format!("duplicate column `{}`", c.name)));
            }
            *role_counts.entry(c.role).or_default() += 1;
        }
        for role in [
            ColumnRole::Outcome,
            ColumnRole::Treatment,
            ColumnRole::UnitId,
            ColumnRole::Wave,
        ] {
            match role_counts.get(&role).copied().unwrap_or(0) {
                0 => return Err(Error::MissingRole(role_name(role).into())),
                1 => {}
                _ => {
                    return Err(Error::Config(format!(
                        "more than one column has role `{}`",
                        role_name(role)
                    )))
                }
            }
        }
        if role_counts.get(&ColumnRole::Cluster).copied().unwrap_or(0) > 1 {
            return Err(Error::Config(
                "more than one column has role `cluster`".into(),
            ));
        }
        for c in &columns {
            check_column_kind(c)?;
        }

        let stats = columns
            .iter()
            .map(|c| match &c.data {
                ColumnData::Numeric(v) => ColumnStats::of(v),
                ColumnData::Categorical(_) => None,
            })
            .collect();
        let ds = PanelDataset {
            columns,
            stats,
            n_rows,
        };

        let units = ds.units();
        let waves = ds.waves();
        let mut keys = HashSet::with_capacity(n_rows);
        for (u, &w) in units.iter().zip(&waves) {
            if !keys.insert((u.as_str(), w)) {
                return Err(Error::DuplicateKey {
                    unit: u.clone(),
                    wave: w,
                });
            }
        }
        Ok(ds)
    }

    /// Reads a comma-separated table with a header row.
    pub fn load(path: impl AsRef<Path>, roles: &RoleMap) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, roles)
    }

    pub fn from_reader(reader: impl std::io::Read, roles: &RoleMap) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::Headers)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        for name in roles.keys() {
            if !headers.contains(name) {
                return Err(Error::Config(format!(
                    "role map names column `{name}` which is not in the file"
                )));
            }
        }
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record?;
            for (j, cell) in record.iter().enumerate().take(headers.len()) {
                raw[j].push(cell.to_owned());
            }
        }

        let mut columns = Vec::with_capacity(headers.len());
        for (name, cells) in headers.into_iter().zip(raw) {
            let role = roles.get(&name).copied().unwrap_or(ColumnRole::Auxiliary);
            columns.push(parse_column(name, role, cells)?);
        }
        Self::from_columns(columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_units(&self) -> usize {
        self.units().iter().collect::<HashSet<_>>().len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Data(format!("no column named `{name}`")))
    }

    pub fn stats(&self, name: &str) -> Option<ColumnStats> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .and_then(|i| self.stats[i])
    }

    pub fn column_with_role(&self, role: ColumnRole) -> Option<&Column> {
        self.columns.iter().find(|c| c.role == role)
    }

    pub fn names_with_role(&self, role: ColumnRole) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match &self.columns[self.column_index(name)?].data {
            ColumnData::Numeric(v) => Ok(v),
            ColumnData::Categorical(_) => {
                Err(Error::Data(format!("column `{name}` is not numeric")))
            }
        }
    }

    /// Cell values as strings, whatever the column type.
    pub fn labels(&self, name: &str) -> Result<Vec<String>> {
        let col = &self.columns[self.column_index(name)?];
        Ok((0..self.n_rows).map(|r| col.data.cell(r)).collect())
    }

    fn role_column(&self, role: ColumnRole) -> &Column {
        self.column_with_role(role)
            .expect("role presence is checked at construction")
    }

    pub fn outcome_name(&self) -> &str {
        &self.role_column(ColumnRole::Outcome).name
    }

    pub fn treatment_name(&self) -> &str {
        &self.role_column(ColumnRole::Treatment).name
    }

    pub fn unit_name(&self) -> &str {
        &self.role_column(ColumnRole::UnitId).name
    }

    pub fn wave_name(&self) -> &str {
        &self.role_column(ColumnRole::Wave).name
    }

    pub fn outcome(&self) -> &[f64] {
        self.numeric(self.outcome_name()).expect("outcome is numeric")
    }

    pub fn treatment(&self) -> &[f64] {
        self.numeric(self.treatment_name()).expect("treatment is numeric")
    }

    pub fn units(&self) -> Vec<String> {
        self.labels(self.unit_name()).expect("unit column exists")
    }

    pub fn waves(&self) -> Vec<i64> {
        self.numeric(self.wave_name())
            .expect("wave is numeric")
            .iter()
            .map(|&w| w as i64)
            .collect()
    }

    /// Cluster labels: the cluster column if present, else the unit ids.
    pub fn cluster_labels(&self) -> Vec<String> {
        let name = self
            .column_with_role(ColumnRole::Cluster)
            .map(|c| c.name.as_str())
            .unwrap_or_else(|| self.unit_name());
        self.labels(name).expect("cluster column exists")
    }

    /// Dense cluster codes `0..n_clusters`, numbered by first appearance.
    pub fn cluster_codes(&self) -> Vec<usize> {
        dense_codes(&self.cluster_labels())
    }

    /// Feature matrix (row-major) for the named numeric columns.
    pub fn matrix(&self, names: &[String]) -> Result<Vec<f64>> {
        let cols: Vec<&[f64]> = names
            .iter()
            .map(|n| self.numeric(n))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(self.n_rows * cols.len());
        for r in 0..self.n_rows {
            out.extend(cols.iter().map(|c| c[r]));
        }
        Ok(out)
    }

    /// Adds a column or replaces the one with the same name.
    pub fn with_column(&self, column: Column) -> Result<Self> {
        let mut columns = self.columns.clone();
        match columns.iter().position(|c| c.name == column.name) {
            Some(i) => columns[i] = column,
            None => columns.push(column),
        }
        Self::from_columns(columns)
    }

    pub fn with_role(&self, name: &str, role: ColumnRole) -> Result<Self> {
        let i = self.column_index(name)?;
        let mut columns = self.columns.clone();
        if role.is_unique() {
            for c in columns.iter_mut() {
                if c.role == role && c.name != name {
                    c.role = ColumnRole::Auxiliary;
                }
            }
        }
        columns[i].role = role;
        Self::from_columns(columns)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                role: c.role,
                data: c.data.select(rows),
            })
            .collect();
        Self::from_columns(columns)
    }

    /// Sample mean and standard deviation (denominator `n - 1`).
    pub fn standardize_stats(&self, name: &str) -> Result<(f64, f64)> {
        let values = self.numeric(name)?;
        let sd = stats::sample_sd(values);
        if !(sd > 0.0) {
            return Err(Error::Data(format!(
                "column `{name}` is constant; standard deviation is zero"
            )));
        }
        Ok((stats::mean(values), sd))
    }

    /// Appends `<col>_lag` columns holding each unit's most recent earlier
    /// wave value. Rows without an earlier wave leave the analysis set.
    pub fn lag_columns(&self, cols: &[&str]) -> Result<Self> {
        let unit_name = self.unit_name().to_owned();
        let wave_name = self.wave_name().to_owned();
        let mut sources = Vec::with_capacity(cols.len());
        for &col in cols {
            if col == unit_name || col == wave_name {
                return Err(Error::Data(format!(
                    "cannot lag the `{col}` column (unit id or wave)"
                )));
            }
            sources.push((col, self.numeric(col)?));
        }

        let units = self.units();
        let waves = self.waves();
        let mut by_unit: HashMap<&str, Vec<(i64, usize)>> = HashMap::new();
        for (r, (u, &w)) in units.iter().zip(&waves).enumerate() {
            by_unit.entry(u.as_str()).or_default().push((w, r));
        }
        for history in by_unit.values_mut() {
            history.sort_unstable();
        }

        let mut keep = Vec::new();
        let mut prev_rows = Vec::new();
        let mut distance = Vec::new();
        for (r, (u, &w)) in units.iter().zip(&waves).enumerate() {
            let history = &by_unit[u.as_str()];
            let pos = history.partition_point(|&(hw, _)| hw < w);
            if pos == 0 {
                continue;
            }
            let (pw, pr) = history[pos - 1];
            keep.push(r);
            prev_rows.push(pr);
            distance.push((w - pw) as f64);
        }
        if keep.is_empty() {
            return Err(Error::Data(
                "no observation has an earlier wave; the analysis set is empty".into(),
            ));
        }

        let mut out = self.select_rows(&keep)?;
        for (col, values) in sources {
            let lagged = prev_rows.iter().map(|&p| values[p]).collect();
            out = out.with_column(Column::numeric(
                format!("{col}_lag"),
                ColumnRole::Auxiliary,
                lagged,
            ))?;
        }
        out.with_column(Column::numeric(LAG_DISTANCE, ColumnRole::Auxiliary, distance))
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            n_rows: self.n_rows,
            n_units: self.n_units(),
            columns: self
                .columns
                .iter()
                .zip(&self.stats)
                .map(|(c, s)| ColumnSummary {
                    name: c.name.clone(),
                    role: c.role,
                    mean: s.map(|s| s.mean),
                    sd: s.map(|s| s.sd),
                    min: s.map(|s| s.min),
                    max: s.map(|s| s.max),
                })
                .collect(),
        }
    }

    pub fn role_map(&self) -> RoleMap {
        self.columns
            .iter()
            .filter(|c| c.role != ColumnRole::Auxiliary)
            .map(|c| (c.name.clone(), c.role))
            .collect()
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for r in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.data.cell(r)))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn fingerprint(&self) -> String {
        stats::sha256_hex(self.to_csv_string().as_bytes())
    }
}

fn role_name(role: ColumnRole) -> &'static str {
    match role {
        ColumnRole::Outcome => "outcome",
        ColumnRole::Treatment => "treatment",
        ColumnRole::Modifier => "modifier",
        ColumnRole::Confounder => "confounder",
        ColumnRole::Cluster => "cluster",
        ColumnRole::UnitId => "unit-id",
        ColumnRole::Wave => "wave",
        ColumnRole::Auxiliary => "auxiliary",
    }
}

pub(crate) fn dense_codes(labels: &[String]) -> Vec<usize> {
    let mut codes: HashMap<&str, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = codes.len();
            *codes.entry(l.as_str()).or_insert(next)
        })
        .collect()
}

fn check_column_kind(c: &Column) -> Result<()> {
    match (&c.data, c.role) {
        (ColumnData::Categorical(_), ColumnRole::Outcome | ColumnRole::Treatment | ColumnRole::Modifier | ColumnRole::Wave) => {
            Err(Error::Data(format!(
                "column `{}` with role `{}` must be numeric",
                c.name,
                role_name(c.role)
            )))
        }
        (ColumnData::Numeric(v), role) if role != ColumnRole::Auxiliary => {
            if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::MissingValue {
                    column: c.name.clone(),
                    row,
                });
            }
            if role == ColumnRole::Wave {
                if let Some(row) = v.iter().position(|x| x.fract() != 0.0) {
                    return Err(Error::Unparseable {
                        column: c.name.clone(),
                        row,
                        value: v[row].to_string(),
                    });
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn parse_column(name: String, role: ColumnRole, cells: Vec<String>) -> Result<Column> {
    if role != ColumnRole::Auxiliary {
        if let Some(row) = cells.iter().position(|c| is_missing(c)) {
            return Err(Error::MissingValue { column: name, row });
        }
    }
    let numeric_required = matches!(
        role,
        ColumnRole::Outcome | ColumnRole::Treatment | ColumnRole::Modifier | ColumnRole::Wave
    );
    let categorical_required = matches!(role, ColumnRole::UnitId | ColumnRole::Cluster);

    if categorical_required {
        let values = cells.into_iter().map(|c| c.trim().to_owned()).collect();
        return Ok(Column::categorical(name, role, values));
    }

    let mut values = Vec::with_capacity(cells.len());
    for (row, cell) in cells.iter().enumerate() {
        if is_missing(cell) {
            values.push(f64::NAN);
            continue;
        }
        match parse_numeric(cell) {
            Some(v) => values.push(v),
            None if numeric_required => {
                return Err(Error::Unparseable {
                    column: name,
                    row,
                    value: cell.clone(),
                })
            }
            None => {
                let values = cells.into_iter().map(|c| c.trim().to_owned()).collect();
                return Ok(Column::categorical(name, role, values));
            }
        }
    }
    Ok(Column::numeric(name, role, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> RoleMap {
        [
            ("hh", ColumnRole::UnitId),
            ("wave", ColumnRole::Wave),
            ("migrant", ColumnRole::Outcome),
            ("spei", ColumnRole::Treatment),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
    }

    fn load(text: &str) -> Result<PanelDataset> {
        PanelDataset::from_reader(text.as_bytes(), &roles())
    }

    #[test]
    fn loads_small_file() {
        let ds = load("hh,wave,migrant,spei,asset\n1,2,0,0.5,10\n1,3,1,-0.2,20\n2,2,0,0.1,5\n").unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_units(), 2);
        let s = ds.stats("asset").unwrap();
        assert!((s.mean - 35.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.min, 5.0);
        assert_eq!(s.max, 20.0);
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = load("hh,wave,migrant,spei\n7,2,0,0.5\n7,2,1,0.1\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { ref unit, wave: 2 } if unit == "7"));
    }

    #[test]
    fn missing_and_unparseable_cells() {
        let err = load("hh,wave,migrant,spei\n7,2,,0.5\n").unwrap_err();
        assert!(matches!(err, Error::MissingValue { .. }));
        let err = load("hh,wave,migrant,spei\n7,2,yes,0.5\n").unwrap_err();
        assert!(matches!(err, Error::Unparseable { .. }));
    }

    #[test]
    fn missing_role_is_config_error() {
        let mut r = roles();
        r.remove("spei");
        let err = PanelDataset::from_reader("hh,wave,migrant,spei\n1,2,0,0.5\n".as_bytes(), &r)
            .unwrap_err();
        assert!(matches!(err, Error::MissingRole(ref role) if role == "treatment"));
        assert_eq!(err.kind(), crate::ErrorKind::Config);
    }

    #[test]
    fn lag_uses_previous_wave_and_drops_first() {
        let ds = load("hh,wave,migrant,spei,asset\n1,2,0,0.5,10\n1,3,1,-0.2,20\n2,2,0,0.1,5\n").unwrap();
        let lagged = ds.lag_columns(&["asset", "spei"]).unwrap();
        assert_eq!(lagged.n_rows(), 1);
        assert_eq!(lagged.numeric("asset_lag").unwrap(), &[10.0]);
        assert_eq!(lagged.numeric("spei_lag").unwrap(), &[0.5]);
        assert_eq!(lagged.numeric(LAG_DISTANCE).unwrap(), &[1.0]);
    }

    #[test]
    fn lag_over_gap_records_distance() {
        let ds = load("hh,wave,migrant,spei,asset\n1,4,0,0.5,30\n1,2,1,-0.2,10\n").unwrap();
        let lagged = ds.lag_columns(&["asset"]).unwrap();
        assert_eq!(lagged.numeric("asset_lag").unwrap(), &[10.0]);
        assert_eq!(lagged.numeric(LAG_DISTANCE).unwrap(), &[2.0]);
    }

    #[test]
    fn lagging_twice_shifts_one_more_wave() {
        let ds = load("hh,wave,migrant,spei,asset\n1,1,0,0,1\n1,2,0,0,2\n1,3,0,0,3\n").unwrap();
        let once = ds.lag_columns(&["asset"]).unwrap();
        let twice = once.lag_columns(&["asset_lag"]).unwrap();
        assert_eq!(twice.n_rows(), 1);
        assert_eq!(twice.numeric("asset_lag_lag").unwrap(), &[1.0]);
    }

    #[test]
    fn cannot_lag_keys() {
        let ds = load("hh,wave,migrant,spei\n1,2,0,0.5\n1,3,0,0.5\n").unwrap();
        assert!(ds.lag_columns(&["wave"]).is_err());
        assert!(ds.lag_columns(&["hh"]).is_err());
    }

    #[test]
    fn standardize_stats_examples() {
        let ds = load("hh,wave,migrant,spei,a,b\n1,1,0,0,1,5\n1,2,0,0,2,5\n1,3,0,0,3,5\n").unwrap();
        assert_eq!(ds.standardize_stats("a").unwrap(), (2.0, 1.0));
        assert!(ds.standardize_stats("b").is_err());
    }

    #[test]
    fn cluster_defaults_to_unit() {
        let ds = load("hh,wave,migrant,spei\na,1,0,0\nb,1,0,0\na,2,0,0\n").unwrap();
        assert_eq!(ds.cluster_codes(), vec![0, 1, 0]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = load("hh,wave,migrant,spei,region\n1,2,0,0.1,\"North, East\"\n2,2,1,0.30000000000000004,South\n").unwrap();
        let again = load(&ds.to_csv_string()).unwrap();
        assert_eq!(ds, again);
    }
}
