//! Dataset text format, manifest files and the schema-driven CSV loader.
//!
//! Dataset lines are `timestamp,label,cell_1,...,cell_n`; a cell holds the
//! attribute's ids joined by `;` and may be empty. No header line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DataError, FeatureId, Instance, Label};

const MANIFEST_FORMAT: &str = "catstream-manifest";
const MANIFEST_VERSION: u32 = 1;

/// Summary stored next to a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub recipe: String,
    pub seed: Option<u64>,
    /// Number of distinct feature ids (vocabulary size).
    pub dimension: usize,
    pub attribute_count: usize,
    pub normal_count: usize,
    pub anomalous_count: usize,
    pub unknown_count: usize,
    pub train_count: Option<usize>,
    pub test_count: Option<usize>,
    /// Generator settings, echoed as `param.<key>=<value>`.
    pub params: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn from_instances(
        recipe: &str,
        seed: Option<u64>,
        dimension: usize,
        attribute_count: usize,
        instances: &[Instance],
    ) -> Self {
        let count = |l: Label| instances.iter().filter(|i| i.label == l).count();
        DatasetManifest {
            recipe: recipe.to_string(),
            seed,
            dimension,
            attribute_count,
            normal_count: count(Label::Normal),
            anomalous_count: count(Label::Anomalous),
            unknown_count: count(Label::Unknown),
            train_count: None,
            test_count: None,
            params: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> usize {
        self.normal_count + self.anomalous_count + self.unknown_count
    }

    /// Checks attribute counts and id range of `instances`.
    pub fn validate(&self, instances: &[Instance]) -> Result<(), DataError> {
        for (n, inst) in instances.iter().enumerate() {
            if inst.attributes.len() != self.attribute_count {
                return Err(DataError::Parse {
                    line: n + 1,
                    message: format!(
                        "expected {} attributes, found {}",
                        self.attribute_count,
                        inst.attributes.len()
                    ),
                });
            }
            if let Some(id) = inst.max_feature().filter(|&id| id >= self.dimension) {
                return Err(DataError::IdOutOfRange {
                    line: n + 1,
                    id,
                    dimension: self.dimension,
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format={MANIFEST_FORMAT}");
        let _ = writeln!(out, "version={MANIFEST_VERSION}");
        let _ = writeln!(out, "recipe={}", self.recipe);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed={seed}");
        }
        let _ = writeln!(out, "dimension={}", self.dimension);
        let _ = writeln!(out, "attribute_count={}", self.attribute_count);
        let _ = writeln!(out, "normal_count={}", self.normal_count);
        let _ = writeln!(out, "anomalous_count={}", self.anomalous_count);
        let _ = writeln!(out, "unknown_count={}", self.unknown_count);
        if let Some(n) = self.train_count {
            let _ = writeln!(out, "train_count={n}");
        }
        if let Some(n) = self.test_count {
            let _ = writeln!(out, "test_count={n}");
        }
        for (k, v) in &self.params {
            let _ = writeln!(out, "param.{k}={v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DataError> {
        let mut kv = BTreeMap::new();
        let mut params = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| DataError::Parse {
                line: n + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            match k.strip_prefix("param.") {
                Some(p) => {
                    params.insert(p.to_string(), v.to_string());
                }
                None => {
                    kv.insert(k.to_string(), (n + 1, v.to_string()));
                }
            }
        }
        let take = |key: &str| -> Result<Option<(usize, String)>, DataError> {
            Ok(kv.get(key).cloned())
        };
        let num = |key: &str| -> Result<Option<u64>, DataError> {
            match take(key)? {
                None => Ok(None),
                Some((line, v)) => v.parse().map(Some).map_err(|_| DataError::Parse {
                    line,
                    message: format!("{key}: not an integer: {v:?}"),
                }),
            }
        };
        let required = |key: &str| -> Result<usize, DataError> {
            num(key)?
                .map(|v| v as usize)
                .ok_or_else(|| DataError::Config(format!("manifest is missing {key}")))
        };
        match take("format")? {
            Some((_, f)) if f == MANIFEST_FORMAT => {}
            _ => return Err(DataError::Config("not a dataset manifest".into())),
        }
        let version = required("version")?;
        if version != MANIFEST_VERSION as usize {
            return Err(DataError::Config(format!(
                "unsupported manifest version {version}"
            )));
        }
        Ok(DatasetManifest {
            recipe: take("recipe")?.map(|(_, v)| v).unwrap_or_default(),
            seed: num("seed")?,
            dimension: required("dimension")?,
            attribute_count: required("attribute_count")?,
            normal_count: required("normal_count")?,
            anomalous_count: required("anomalous_count")?,
            unknown_count: required("unknown_count")?,
            train_count: num("train_count")?.map(|v| v as usize),
            test_count: num("test_count")?.map(|v| v as usize),
            params,
        })
    }
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, manifest.to_text()).map_err(|e| DataError::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    DatasetManifest::from_text(&text)
}

fn format_cell(out: &mut String, ids: &[FeatureId]) {
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        let _ = write!(out, "{id}");
    }
}

pub fn format_dataset(instances: &[Instance]) -> String {
    let mut out = String::with_capacity(instances.len() * 24);
    for inst in instances {
        let _ = write!(out, "{},{}", inst.timestamp, inst.label);
        for attr in &inst.attributes {
            out.push(',');
            format_cell(&mut out, attr);
        }
        out.push('\n');
    }
    out
}

fn parse_ids(cell: &str, delimiter: char, line: usize) -> Result<Vec<FeatureId>, DataError> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(delimiter)
        .map(|tok| {
            tok.trim().parse::<FeatureId>().map_err(|_| DataError::Parse {
                line,
                message: format!("not a feature id: {tok:?}"),
            })
        })
        .collect()
}

/// Parses the dataset format. Every line must carry the same attribute count.
pub fn parse_dataset(text: &str) -> Result<Vec<Instance>, DataError> {
    let mut out = Vec::new();
    let mut width = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(DataError::Parse {
                line: line_no,
                message: "expected timestamp, label and at least one attribute".into(),
            });
        }
        let attrs = fields.len() - 2;
        if *width.get_or_insert(attrs) != attrs {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected {} attributes, found {attrs}", width.unwrap_or(0)),
            });
        }
        let timestamp = fields[0].parse().map_err(|_| DataError::Parse {
            line: line_no,
            message: format!("bad timestamp {:?}", fields[0]),
        })?;
        let label = fields[1].parse().map_err(|message| DataError::Parse {
            line: line_no,
            message,
        })?;
        let attributes = fields[2..]
            .iter()
            .map(|c| parse_ids(c, ';', line_no))
            .collect::<Result<_, _>>()?;
        out.push(Instance::new(attributes, label, timestamp));
    }
    Ok(out)
}

pub fn write_dataset(path: impl AsRef<Path>, instances: &[Instance]) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, format_dataset(instances)).map_err(|e| DataError::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Instance>, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_dataset(&text)
}

/// Which column carries ground truth, and which values mean what. Values in
/// neither list become [`Label::Unknown`].
#[derive(Clone, Debug, PartialEq)]
pub struct LabelColumn {
    pub column: usize,
    pub normal: Vec<String>,
    pub anomalous: Vec<String>,
}

/// Column layout for [`load_categorical_csv`].
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSchema {
    /// Source column of each attribute, in attribute order.
    pub attribute_columns: Vec<usize>,
    pub field_delimiter: u8,
    /// Separator between ids inside one cell.
    pub list_delimiter: char,
    pub has_header: bool,
    pub label: Option<LabelColumn>,
    /// Declared vocabulary size; defaults to `1 + max id`.
    pub dimension: Option<usize>,
}

impl CsvSchema {
    pub fn new(attribute_columns: Vec<usize>) -> Self {
        CsvSchema {
            attribute_columns,
            field_delimiter: b',',
            list_delimiter: ';',
            has_header: false,
            label: None,
            dimension: None,
        }
    }
}

/// Loads numeric categorical records from a delimited file. Instances keep
/// file order and are timestamped by record position.
pub fn load_categorical_csv(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
) -> Result<(Vec<Instance>, DatasetManifest), DataError> {
    let path = path.as_ref();
    if schema.attribute_columns.is_empty() {
        return Err(DataError::Config("schema declares no attributes".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.field_delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => DataError::io(path, io),
            other => DataError::Config(format!("{other:?}")),
        })?;

    let mut instances = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(n + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(n + 1, |p| p.line() as usize);
        let cell = |col: usize| {
            record.get(col).ok_or_else(|| DataError::Parse {
                line,
                message: format!("missing column {col}"),
            })
        };
        let attributes = schema
            .attribute_columns
            .iter()
            .map(|&col| parse_ids(cell(col)?, schema.list_delimiter, line))
            .collect::<Result<Vec<_>, _>>()?;
        let label = match &schema.label {
            None => Label::Unknown,
            Some(lc) => {
                let v = cell(lc.column)?.trim();
                if lc.normal.iter().any(|x| x == v) {
                    Label::Normal
                } else if lc.anomalous.iter().any(|x| x == v) {
                    Label::Anomalous
                } else {
                    Label::Unknown
                }
            }
        };
        let inst = Instance::new(attributes, label, instances.len() as u64);
        if let (Some(dim), Some(id)) = (schema.dimension, inst.max_feature()) {
            if id >= dim {
                return Err(DataError::IdOutOfRange {
                    line,
                    id,
                    dimension: dim,
                });
            }
        }
        instances.push(inst);
    }
    let observed = instances.iter().filter_map(Instance::max_feature).max();
    let dimension = schema
        .dimension
        .unwrap_or_else(|| observed.map_or(1, |m| m + 1));
    let mut manifest = DatasetManifest::from_instances(
        "csv",
        None,
        dimension,
        schema.attribute_columns.len(),
        &instances,
    );
    manifest
        .params
        .insert("source".into(), path.display().to_string());
    Ok((instances, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticParams};

    fn temp_file(contents: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), contents).unwrap();
        f
    }

    #[test]
    fn loads_single_id_attributes() {
        let f = temp_file("0;10;20\n1;11;21\n");
        let mut schema = CsvSchema::new(vec![0, 1, 2]);
        schema.field_delimiter = b';';
        schema.list_delimiter = ' ';
        let (inst, manifest) = load_categorical_csv(f.path(), &schema).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[1].attributes, vec![vec![1], vec![11], vec![21]]);
        assert_eq!(manifest.dimension, 22);
        assert_eq!(manifest.attribute_count, 3);
    }

    #[test]
    fn empty_cell_is_empty_attribute() {
        let f = temp_file("3,,5;6\n");
        let (inst, _) = load_categorical_csv(f.path(), &CsvSchema::new(vec![0, 1, 2])).unwrap();
        assert_eq!(inst[0].attributes, vec![vec![3], vec![], vec![5, 6]]);
    }

    #[test]
    fn unparseable_cell_reports_line() {
        let f = temp_file("1,2\n3,x\n");
        let err = load_categorical_csv(f.path(), &CsvSchema::new(vec![0, 1])).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn id_beyond_declared_dimension_rejected() {
        let f = temp_file("1,2\n3,9\n");
        let mut schema = CsvSchema::new(vec![0, 1]);
        schema.dimension = Some(5);
        let err = load_categorical_csv(f.path(), &schema).unwrap_err();
        assert!(matches!(err, DataError::IdOutOfRange { line: 2, id: 9, dimension: 5 }));
    }

    #[test]
    fn label_column_mapping() {
        let f = temp_file("a,b,outcome\n1,2,win\n3,4,loss\n5,6,draw\n");
        let mut schema = CsvSchema::new(vec![0, 1]);
        schema.has_header = true;
        schema.label = Some(LabelColumn {
            column: 2,
            normal: vec!["win".into()],
            anomalous: vec!["loss".into()],
        });
        let (inst, manifest) = load_categorical_csv(f.path(), &schema).unwrap();
        let labels: Vec<Label> = inst.iter().map(|i| i.label).collect();
        assert_eq!(labels, [Label::Normal, Label::Anomalous, Label::Unknown]);
        assert_eq!((manifest.normal_count, manifest.anomalous_count), (1, 1));
    }

    #[test]
    fn synthetic_round_trips_through_both_readers() {
        let data = generate_synthetic(&SyntheticParams::default(), 12);
        let f = temp_file(&format_dataset(&data));
        assert_eq!(read_dataset(f.path()).unwrap(), data);

        let mut schema = CsvSchema::new(vec![2, 3, 4]);
        schema.label = Some(LabelColumn {
            column: 1,
            normal: vec!["normal".into()],
            anomalous: vec!["anomalous".into()],
        });
        let (loaded, manifest) = load_categorical_csv(f.path(), &schema).unwrap();
        assert_eq!(loaded, data);
        assert_eq!(manifest.dimension, 30);
    }

    #[test]
    fn dataset_format_is_exact() {
        let inst = vec![
            Instance::new(vec![vec![0], vec![], vec![4, 7]], Label::Anomalous, 3),
            Instance::new(vec![vec![1], vec![2], vec![3]], Label::Normal, 4),
        ];
        let text = format_dataset(&inst);
        assert_eq!(text, "3,anomalous,0,,4;7\n4,normal,1,2,3\n");
        assert_eq!(parse_dataset(&text).unwrap(), inst);
    }

    #[test]
    fn ragged_dataset_rejected() {
        let err = parse_dataset("0,normal,1,2\n1,normal,1\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn manifest_round_trip() {
        let data = generate_synthetic(&SyntheticParams::default(), 2);
        let mut m = DatasetManifest::from_instances("synthetic", Some(2), 30, 3, &data);
        m.train_count = Some(9000);
        m.test_count = Some(2000);
        m.params.insert("periods".into(), "220".into());
        let back = DatasetManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(back.validate(&data).is_ok());
        assert_eq!(back.total(), 11_000);
    }

    #[test]
    fn manifest_rejects_wrong_version() {
        let text = "format=catstream-manifest\nversion=9\n";
        assert!(DatasetManifest::from_text(text).is_err());
    }
}
