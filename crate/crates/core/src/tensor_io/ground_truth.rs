use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::{GroundTruthError, Strategy};

pub const GROUND_TRUTH_HEADER: [&str; 4] = ["model_id", "target", "strategy", "accuracy"];

/// Fine-tuned accuracy per `(model_id, target, strategy)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthTable {
    entries: BTreeMap<(String, String, Strategy), f64>,
}

impl GroundTruthTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        model_id: &str,
        target: &str,
        strategy: Strategy,
        accuracy: f64,
    ) -> Result<(), GroundTruthError> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(GroundTruthError::Range { line: 0, value: accuracy });
        }
        self.entries.insert((model_id.to_string(), target.to_string(), strategy), accuracy);
        Ok(())
    }

    pub fn get(&self, model_id: &str, target: &str, strategy: Strategy) -> Option<f64> {
        self.entries.get(&(model_id.to_string(), target.to_string(), strategy)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, Strategy, f64)> {
        self.entries.iter().map(|((m, t, s), &a)| (m.as_str(), t.as_str(), *s, a))
    }

    pub fn to_csv(&self) -> String {
        let mut out = GROUND_TRUTH_HEADER.join(",");
        out.push('\n');
        for (m, t, s, a) in self.iter() {
            out.push_str(&format!("{m},{t},{s},{a}\n"));
        }
        out
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, GroundTruthError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| GroundTruthError::Parse(e.to_string()))?;
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if names != GROUND_TRUTH_HEADER {
            return Err(GroundTruthError::Parse(format!(
                "expected header {:?}, found {names:?}",
                GROUND_TRUTH_HEADER.join(",")
            )));
        }
        let mut table = Self::new();
        for record in rdr.records() {
            let record = record.map_err(|e| GroundTruthError::Parse(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            let (model_id, target) = (field(0), field(1));
            if model_id.is_empty() || target.is_empty() {
                return Err(GroundTruthError::Parse(format!("line {line}: empty model_id or target")));
            }
            let strategy: Strategy = field(2)
                .parse()
                .map_err(|_| GroundTruthError::UnknownStrategy { line, value: field(2).to_string() })?;
            let accuracy: f64 = field(3).parse().map_err(|_| {
                GroundTruthError::Parse(format!("line {line}: accuracy {:?} is not a number", field(3)))
            })?;
            if !(0.0..=1.0).contains(&accuracy) {
                return Err(GroundTruthError::Range { line, value: accuracy });
            }
            let key = (model_id.to_string(), target.to_string(), strategy);
            if table.entries.insert(key, accuracy).is_some() {
                return Err(GroundTruthError::Parse(format!(
                    "line {line}: duplicate entry for ({model_id}, {target}, {strategy})"
                )));
            }
        }
        Ok(table)
    }
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruthTable, GroundTruthError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| GroundTruthError::Parse(format!("{}: {e}", path.display())))?;
    GroundTruthTable::from_reader(file)
}
