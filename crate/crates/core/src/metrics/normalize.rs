use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ScoreMatrix;
use crate::error::{Error, Result};

/// Published per-task minimum and maximum returns for the Brax, Jumanji and
/// MinAtar suites.
pub const REFERENCE_TABLE: [(&str, f64, f64); 14] = [
    ("Ant", -2958.14, 13466.48),
    ("Halfcheetah", -587.37, 7859.28),
    ("Hopper", 21.03, 3697.39),
    ("Humanoid", 207.63, 11851.71),
    ("Humanoidstandup", 6686.00, 71897.67),
    ("Walker2d", -32.44, 2558.61),
    ("2048", 989.50, 29084.63),
    ("Snake", 0.00, 92.55),
    ("Rubiks Cube", 0.00, 0.66),
    ("Maze", 0.03, 0.84),
    ("Asterix", 0.30, 64.46),
    ("Breakout", 0.00, 92.86),
    ("Freeway", 0.00, 66.13),
    ("Space Invaders", 0.00, 191.80),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    task: String,
    min: f64,
    max: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizationTable {
    pub entries: BTreeMap<String, (f64, f64)>,
}

impl NormalizationTable {
    pub fn insert(&mut self, task: impl Into<String>, min: f64, max: f64) -> Result<()> {
        let task = task.into();
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::Config(format!("normalization bounds for `{task}` need max > min, got {min}, {max}")));
        }
        self.entries.insert(task, (min, max));
        Ok(())
    }

    pub fn reference() -> Self {
        let mut t = NormalizationTable::default();
        for (task, lo, hi) in REFERENCE_TABLE {
            t.insert(task, lo, hi).expect("reference bounds are ordered");
        }
        t
    }

    /// Min and max over every score of every method, per task.
    pub fn from_scores<'a>(matrices: impl IntoIterator<Item = &'a ScoreMatrix>) -> Result<Self> {
        let mut bounds: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for m in matrices {
            for (task, s) in &m.scores {
                let e = bounds.entry(task.clone()).or_insert((f64::INFINITY, f64::NEG_INFINITY));
                for &x in s {
                    e.0 = e.0.min(x);
                    e.1 = e.1.max(x);
                }
            }
        }
        let mut t = NormalizationTable::default();
        for (task, (lo, hi)) in bounds {
            t.insert(task, lo, hi)?;
        }
        Ok(t)
    }

    pub fn get(&self, task: &str) -> Result<(f64, f64)> {
        self.entries
            .get(task)
            .copied()
            .ok_or_else(|| Error::Config(format!("no normalization bounds for task `{task}`")))
    }

    pub fn normalize_value(&self, task: &str, score: f64) -> Result<f64> {
        let (lo, hi) = self.get(task)?;
        Ok((score - lo) / (hi - lo))
    }

    /// Reads `task,min,max` CSV with a header row.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut t = NormalizationTable::default();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: Row = row?;
            t.insert(row.task, row.min, row.max)?;
        }
        Ok(t)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (task, (min, max)) in &self.entries {
            wr.serialize(Row {
                task: task.clone(),
                min: *min,
                max: *max,
            })?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `(s - min) / (max - min)` per task. Not clipped to [0, 1].
pub fn normalize(scores: &ScoreMatrix, table: &NormalizationTable) -> Result<ScoreMatrix> {
    let mut out = ScoreMatrix::new(scores.method.clone());
    for (task, s) in &scores.scores {
        let (lo, hi) = table.get(task)?;
        out.scores.insert(task.clone(), s.iter().map(|x| (x - lo) / (hi - lo)).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopper_endpoints() {
        let t = NormalizationTable::reference();
        assert_eq!(t.normalize_value("Hopper", 21.03).unwrap(), 0.0);
        assert_eq!(t.normalize_value("Hopper", 3697.39).unwrap(), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let t = NormalizationTable::reference();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("task,min,max\n"));
        assert_eq!(NormalizationTable::read_csv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(NormalizationTable::read_csv("task,min,max\nx,2,1\n".as_bytes()).is_err());
    }

    #[test]
    fn not_clipped() {
        let mut t = NormalizationTable::default();
        t.insert("a", 0.0, 10.0).unwrap();
        let m = ScoreMatrix::new("m").with_task("a", vec![-5.0, 20.0]);
        assert_eq!(normalize(&m, &t).unwrap().scores["a"], vec![-0.5, 2.0]);
    }
}
