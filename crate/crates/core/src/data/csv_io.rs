use std::path::Path;

use super::{Column, ColumnKind, DataTable};
use crate::{Error, Result};

/// Column-kind declarations plus the target name.
///
/// The sidecar text format is one `key = value` pair per line:
///
/// ```text
/// # comments and blank lines are ignored
/// season = categorical
/// sales = numeric
/// target = sales
/// ```
///
/// Columns present in the CSV but not declared are dropped. A target that is
/// not declared explicitly is read as numeric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<(String, ColumnKind)>,
    pub target: String,
}

impl Schema {
    pub fn new(columns: Vec<(String, ColumnKind)>, target: impl Into<String>) -> Self {
        Schema {
            columns,
            target: target.into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut columns: Vec<(String, ColumnKind)> = Vec::new();
        let mut target = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Schema(format!("line {}: expected `name = kind`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Schema(format!(
                    "line {}: empty key or value",
                    lineno + 1
                )));
            }
            if key == "target" {
                target = Some(value.to_owned());
                continue;
            }
            if columns.iter().any(|(n, _)| n == key) {
                return Err(Error::Schema(format!("column `{key}` declared twice")));
            }
            columns.push((key.to_owned(), value.parse()?));
        }
        let target = target.ok_or_else(|| Error::Schema("no `target = <name>` line".into()))?;
        Ok(Schema { columns, target })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (name, kind) in &self.columns {
            out.push_str(&format!("{name} = {}\n", kind.as_str()));
        }
        out.push_str(&format!("target = {}\n", self.target));
        out
    }

    fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| *k)
    }
}

/// Tokens read as the missing marker in any column.
const MISSING_TOKENS: &[&str] = &["", "na", "n.a", "n.a.", "n/a", "nan", "null", "none", "?"];

fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim().to_ascii_lowercase();
    MISSING_TOKENS.contains(&t.as_str())
}

/// Read a headered, comma-separated UTF-8 file into a table.
///
/// Unparsable numeric cells become missing; a numeric column where most
/// non-missing cells fail to parse is a schema error.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<DataTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Raw cells of the named columns, missing tokens as `None`, without any
/// schema or type conversion.
pub fn load_raw_columns<S: AsRef<str>>(
    path: impl AsRef<Path>,
    names: &[S],
) -> Result<Vec<Vec<Option<String>>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw_columns(file, names)
}

pub(crate) fn read_raw_columns<R: std::io::Read, S: AsRef<str>>(
    reader: R,
    names: &[S],
) -> Result<Vec<Vec<Option<String>>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == n.as_ref())
                .ok_or_else(|| Error::MissingColumn(n.as_ref().to_owned()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record?;
        for (slot, &i) in idx.iter().enumerate() {
            let cell = record.get(i).unwrap_or("");
            out[slot].push((!is_missing_token(cell)).then(|| cell.trim().to_owned()));
        }
    }
    Ok(out)
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if !headers.contains(&schema.target) {
        return Err(Error::MissingColumn(schema.target.clone()));
    }
    for (name, _) in &schema.columns {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    if schema.kind_of(&schema.target) == Some(ColumnKind::Categorical) {
        return Err(Error::Schema(format!(
            "target `{}` must be numeric (binary targets as 0/1)",
            schema.target
        )));
    }

    // (header index, name, kind) for every column we keep, in file order.
    let kept: Vec<(usize, String, ColumnKind)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            if *h == schema.target {
                Some((i, h.clone(), ColumnKind::Numeric))
            } else {
                schema.kind_of(h).map(|k| (i, h.clone(), k))
            }
        })
        .collect();

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); kept.len()];
    for record in rdr.records() {
        let record = record?;
        for (slot, (idx, _, _)) in kept.iter().enumerate() {
            raw[slot].push(record.get(*idx).unwrap_or("").to_owned());
        }
    }

    let mut columns = Vec::with_capacity(kept.len());
    for ((_, name, kind), cells) in kept.into_iter().zip(raw) {
        let column = match kind {
            ColumnKind::Categorical => Column::Categorical(
                cells
                    .into_iter()
                    .map(|c| {
                        if is_missing_token(&c) {
                            None
                        } else {
                            Some(c.trim().to_owned())
                        }
                    })
                    .collect(),
            ),
            ColumnKind::Numeric => {
                let mut bad = 0usize;
                let mut present = 0usize;
                let values: Vec<Option<f64>> = cells
                    .iter()
                    .map(|c| {
                        if is_missing_token(c) {
                            return None;
                        }
                        present += 1;
                        match c.trim().parse::<f64>() {
                            Ok(v) if v.is_finite() => Some(v),
                            _ => {
                                bad += 1;
                                None
                            }
                        }
                    })
                    .collect();
                if present > 0 && 2 * bad > present {
                    return Err(Error::Schema(format!(
                        "numeric column `{name}`: {bad} of {present} cells are not numbers"
                    )));
                }
                Column::Numeric(values)
            }
        };
        columns.push((name, column));
    }
    DataTable::new(columns, &schema.target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::parse("season = categorical\nsales = numeric\ntarget = sales\n").unwrap()
    }

    #[test]
    fn raw_columns() {
        let csv = "a,b,c\nx,1,?\ny,2,z\n";
        let cols = read_raw_columns(csv.as_bytes(), &["c", "a"]).unwrap();
        assert_eq!(cols[0], vec![None, Some("z".to_string())]);
        assert_eq!(cols[1].len(), 2);
        assert!(read_raw_columns(csv.as_bytes(), &["d"]).is_err());
    }

    #[test]
    fn parses_small_file() {
        let csv = "season,sales\nspring,1\nsummer,2\nautumn,3\n";
        let t = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.target_name(), "sales");
        assert_eq!(
            t.schema(),
            vec![
                ("season", ColumnKind::Categorical),
                ("sales", ColumnKind::Numeric)
            ]
        );
    }

    #[test]
    fn special_values_become_missing() {
        let s = Schema::parse("x = numeric\nc = categorical\ny = numeric\ntarget = y").unwrap();
        let csv = "x,c,y\nN.A,a,1\n2,N.A,2\n3,,3\n";
        let t = read_csv(csv.as_bytes(), &s).unwrap();
        assert_eq!(
            t.column("x").unwrap(),
            &Column::Numeric(vec![None, Some(2.0), Some(3.0)])
        );
        assert_eq!(
            t.column("c").unwrap(),
            &Column::Categorical(vec![Some("a".into()), None, None])
        );
    }

    #[test]
    fn header_only_file_has_zero_rows() {
        let t = read_csv("season,sales\n".as_bytes(), &schema()).unwrap();
        assert_eq!(t.row_count(), 0);
    }

    #[test]
    fn missing_target_is_an_error() {
        let csv = "season,revenue\nspring,1\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema()),
            Err(Error::MissingColumn(c)) if c == "sales"
        ));
    }

    #[test]
    fn mostly_text_numeric_column_is_a_schema_error() {
        let csv = "season,sales\nspring,a\nsummer,b\nautumn,3\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema()),
            Err(Error::Schema(_))
        ));
        // a single stray token is tolerated
        let csv = "season,sales\nspring,a\nsummer,2\nautumn,3\n";
        let t = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(t.column("sales").unwrap().missing_count(), 1);
    }

    #[test]
    fn undeclared_columns_are_dropped() {
        let csv = "id,season,sales\n1,spring,1\n2,summer,2\n";
        let t = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert!(t.column("id").is_err());
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_csv("/nonexistent/file.csv", &schema()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn schema_round_trips_through_text() {
        let s = schema();
        assert_eq!(Schema::parse(&s.to_config_string()).unwrap(), s);
        assert!(Schema::parse("a = numeric\n").is_err());
        assert!(Schema::parse("a = text\ntarget = a").is_err());
    }
}
