//! Tabular data model: schemas, dictionary-encoded instances and CSV I/O.
//!
//! Every attribute keeps the sorted set of values it takes; instances store
//! indices ("codes") into that set. Because the set is sorted, threshold tests
//! on numeric attributes reduce to comparisons between codes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{format_number, parse_number, Fraction, Number};

/// Class value. Label columns are always read as text.
pub type Label = String;

/// Code stored for a missing cell.
pub const MISSING: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Num(Number),
    Nom(String),
}

impl Value {
    pub fn as_number(&self) -> Option<&Number> {
        match self {
            Value::Num(n) => Some(n),
            Value::Nom(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => f.write_str(&format_number(n)),
            Value::Nom(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Num(Number::from_integer(v))
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Nom(v.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttributeKind {
    Nominal,
    Numeric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    /// Sorted, duplicate-free.
    pub values: Vec<Value>,
}

impl AttributeSchema {
    pub fn code_of(&self, value: &Value) -> Option<u32> {
        self.values.binary_search(value).ok().map(|c| c as u32)
    }

    pub fn value(&self, code: u32) -> &Value {
        &self.values[code as usize]
    }

    /// Number of values `<= v`.
    pub fn count_leq(&self, v: &Value) -> usize {
        self.values.partition_point(|x| x <= v)
    }

    /// Number of values `< v`.
    pub fn count_lt(&self, v: &Value) -> usize {
        self.values.partition_point(|x| x < v)
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == AttributeKind::Numeric
    }
}

#[derive(Clone, Debug)]
pub struct Schema {
    pub attributes: Vec<AttributeSchema>,
    pub label_name: String,
    pub labels: Vec<Label>,
    index: HashMap<String, usize>,
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.attributes == other.attributes && self.label_name == other.label_name && self.labels == other.labels
    }
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSchema>, label_name: impl Into<String>, labels: Vec<Label>) -> Result<Self> {
        let label_name = label_name.into();
        let mut index = HashMap::with_capacity(attributes.len());
        for (i, a) in attributes.iter().enumerate() {
            if a.name == label_name || index.insert(a.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate column {:?}", a.name)));
            }
        }
        Ok(Schema { attributes, label_name, labels, index })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown attribute {name:?}")))
    }

    pub fn attribute(&self, name: &str) -> Result<&AttributeSchema> {
        Ok(&self.attributes[self.attribute_index(name)?])
    }

    pub fn label_code(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|p| p as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub id: u64,
    /// One code per schema attribute, [`MISSING`] for missing cells.
    pub codes: Vec<u32>,
    /// Index into `Schema::labels`.
    pub label: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
    Unsplit,
}

/// Immutable table of instances sharing one schema.
#[derive(Clone, Debug)]
pub struct Dataset {
    schema: Arc<Schema>,
    instances: Arc<Vec<Instance>>,
    split_tag: SplitTag,
}

/// Decoded column-major table, the interchange form for building datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub names: Vec<String>,
    pub kinds: Vec<AttributeKind>,
    pub columns: Vec<Vec<Option<Value>>>,
    pub label_name: String,
    pub labels: Vec<Option<Label>>,
    pub ids: Vec<u64>,
}

impl RawTable {
    pub fn rows(&self) -> usize {
        self.ids.len()
    }
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, instances: Vec<Instance>, split_tag: SplitTag) -> Result<Self> {
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            if inst.codes.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "instance {} has {} values, schema has {}",
                    inst.id,
                    inst.codes.len(),
                    schema.len()
                )));
            }
            if !seen.insert(inst.id) {
                return Err(Error::Schema(format!("duplicate instance id {}", inst.id)));
            }
        }
        Ok(Dataset { schema, instances: Arc::new(instances), split_tag })
    }

    /// Builds a dataset from decoded columns, recomputing every value set.
    pub fn from_table(table: &RawTable, split_tag: SplitTag) -> Result<Self> {
        Ok(Dataset::from_tables(&[(table, split_tag)])?.remove(0))
    }

    /// Builds several datasets over one shared schema whose value and label
    /// sets are the union over all tables. Tables must agree on columns.
    pub fn from_tables(tables: &[(&RawTable, SplitTag)]) -> Result<Vec<Self>> {
        let (first, _) = tables.first().ok_or_else(|| Error::Schema("no tables".into()))?;
        let width = first.names.len();
        for (table, _) in tables {
            if table.names != first.names || table.kinds != first.kinds || table.label_name != first.label_name {
                return Err(Error::Schema("tables disagree on columns".into()));
            }
            if table.columns.len() != width || table.kinds.len() != width {
                return Err(Error::Schema("column count mismatch".into()));
            }
            let rows = table.rows();
            if table.labels.len() != rows {
                return Err(Error::Schema(format!("label column has {} rows, expected {rows}", table.labels.len())));
            }
            if let Some((name, col)) = table.names.iter().zip(&table.columns).find(|(_, c)| c.len() != rows) {
                return Err(Error::Schema(format!("column {name:?} has {} rows, expected {rows}", col.len())));
            }
        }
        let mut attributes = Vec::with_capacity(width);
        for a in 0..width {
            let mut values: Vec<Value> = tables.iter().flat_map(|(t, _)| t.columns[a].iter().flatten().cloned()).collect();
            values.sort();
            values.dedup();
            attributes.push(AttributeSchema { name: first.names[a].clone(), kind: first.kinds[a], values });
        }
        let mut labels: Vec<Label> = tables.iter().flat_map(|(t, _)| t.labels.iter().flatten().cloned()).collect();
        sort_labels(&mut labels);
        let schema = Arc::new(Schema::new(attributes, first.label_name.clone(), labels)?);
        tables
            .iter()
            .map(|(table, tag)| {
                let instances = (0..table.rows())
                    .map(|r| Instance {
                        id: table.ids[r],
                        codes: schema
                            .attributes
                            .iter()
                            .zip(&table.columns)
                            .map(|(attr, col)| col[r].as_ref().and_then(|v| attr.code_of(v)).unwrap_or(MISSING))
                            .collect(),
                        label: table.labels[r].as_ref().and_then(|l| schema.label_code(l)),
                    })
                    .collect();
                Dataset::new(Arc::clone(&schema), instances, *tag)
            })
            .collect()
    }

    pub fn to_table(&self) -> RawTable {
        let schema = &self.schema;
        RawTable {
            names: schema.attributes.iter().map(|a| a.name.clone()).collect(),
            kinds: schema.attributes.iter().map(|a| a.kind).collect(),
            columns: (0..schema.len())
                .map(|a| self.instances.iter().map(|inst| self.decode(inst, a).cloned()).collect())
                .collect(),
            label_name: schema.label_name.clone(),
            labels: self.instances.iter().map(|inst| self.label_of(inst).cloned()).collect(),
            ids: self.instances.iter().map(|inst| inst.id).collect(),
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn with_tag(&self, split_tag: SplitTag) -> Dataset {
        Dataset { split_tag, ..self.clone() }
    }

    pub fn decode<'a>(&'a self, inst: &Instance, attr: usize) -> Option<&'a Value> {
        match inst.codes[attr] {
            MISSING => None,
            c => Some(self.schema.attributes[attr].value(c)),
        }
    }

    pub fn label_of<'a>(&'a self, inst: &Instance) -> Option<&'a Label> {
        inst.label.map(|l| &self.schema.labels[l as usize])
    }

    /// Instances at the given positions, sharing this dataset's schema.
    pub fn subset(&self, positions: &[usize], split_tag: SplitTag) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            instances: Arc::new(positions.iter().map(|&p| self.instances[p].clone()).collect()),
            split_tag,
        }
    }

    /// Positions of instances labelled `label` and of all other labelled instances.
    pub fn one_vs_rest(&self, label: u32) -> (Vec<usize>, Vec<usize>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, inst) in self.instances.iter().enumerate() {
            match inst.label {
                Some(l) if l == label => pos.push(i),
                Some(_) => neg.push(i),
                None => {}
            }
        }
        (pos, neg)
    }

    pub fn true_labels(&self) -> Vec<Option<Label>> {
        self.instances.iter().map(|i| self.label_of(i).cloned()).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.schema.label_name);
        w.write_record(&header).map_err(csv_error)?;
        for inst in self.instances.iter() {
            let mut row: Vec<String> = (0..self.schema.len())
                .map(|a| self.decode(inst, a).map_or_else(|| "?".to_string(), |v| v.to_string()))
                .collect();
            row.push(self.label_of(inst).cloned().unwrap_or_else(|| "?".into()));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Numeric order when every label parses as a number, lexicographic otherwise.
pub fn sort_labels(labels: &mut Vec<Label>) {
    labels.sort();
    labels.dedup();
    let numeric: Option<Vec<Number>> = labels.iter().map(|l| parse_number(l)).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(Number, Label)> = nums.into_iter().zip(labels.drain(..)).collect();
        paired.sort();
        labels.extend(paired.into_iter().map(|(_, l)| l));
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Loads a CSV file (optionally gzip-compressed, by `.gz` extension).
pub fn load_csv(path: impl AsRef<Path>, label_name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        read_csv(GzDecoder::new(file), label_name)
    } else {
        read_csv(file, label_name)
    }
}

pub fn read_csv<R: Read>(reader: R, label_name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let label_col = header
        .iter()
        .position(|h| h == label_name)
        .ok_or_else(|| Error::Schema(format!("label column {label_name:?} not in header")))?;
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        for (col, cell) in cells.iter_mut().zip(record.iter()) {
            col.push(cell.to_string());
        }
    }
    let rows = cells.first().map_or(0, Vec::len);
    let mut table = RawTable {
        names: Vec::new(),
        kinds: Vec::new(),
        columns: Vec::new(),
        label_name: label_name.to_string(),
        labels: Vec::new(),
        ids: (0..rows as u64).collect(),
    };
    for (col, (name, raw)) in header.into_iter().zip(cells).enumerate() {
        if col == label_col {
            table.labels = raw.into_iter().map(|c| (!is_missing(&c)).then_some(c)).collect();
            continue;
        }
        let parsed: Vec<Option<Number>> = raw.iter().map(|c| parse_number(c)).collect();
        let numeric = raw.iter().zip(&parsed).all(|(c, p)| is_missing(c) || p.is_some());
        let column = if numeric {
            parsed.into_iter().map(|p| p.map(Value::Num)).collect()
        } else {
            raw.into_iter().map(|c| (!is_missing(&c)).then_some(Value::Nom(c))).collect()
        };
        table.kinds.push(if numeric { AttributeKind::Numeric } else { AttributeKind::Nominal });
        table.names.push(name);
        table.columns.push(column);
    }
    Dataset::from_table(&table, SplitTag::Unsplit)
}

/// Seeded uniform train/test partition; the test part has `floor(n * fraction)` instances.
pub fn split(dataset: &Dataset, test_fraction: Fraction, seed: u64) -> Result<(Dataset, Dataset)> {
    if test_fraction <= Fraction::from_integer(0) || test_fraction >= Fraction::from_integer(1) {
        return Err(Error::Argument(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    let n = dataset.len();
    let n_test = ((n as i64 * test_fraction.numer()) / test_fraction.denom()) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((dataset.subset(&train, SplitTag::Train), dataset.subset(&test, SplitTag::Test)))
}
