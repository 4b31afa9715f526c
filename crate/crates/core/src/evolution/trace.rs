use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    /// 1-based generation (DE) or iteration (ES) index.
    pub generation: usize,
    /// Best fitness seen so far in the run.
    pub best_fitness: f64,
    /// Mean fitness of this generation's population (DE) or offset batch (ES).
    pub mean_fitness: f64,
    pub best_so_far: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<GenerationRecord>,
}

impl OptimizationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_fitness(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.best_fitness)
    }

    /// Writes `generation,best_fitness,mean_fitness` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["generation", "best_fitness", "mean_fitness"])?;
        for r in &self.records {
            w.write_record([
                r.generation.to_string(),
                r.best_fitness.to_string(),
                r.mean_fitness.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_export() {
        let trace = OptimizationTrace {
            records: vec![
                GenerationRecord {
                    generation: 1,
                    best_fitness: 0.5,
                    mean_fitness: 0.25,
                    best_so_far: vec![0.0],
                },
                GenerationRecord {
                    generation: 2,
                    best_fitness: 0.75,
                    mean_fitness: 0.5,
                    best_so_far: vec![1.0],
                },
            ],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "generation,best_fitness,mean_fitness\n1,0.5,0.25\n2,0.75,0.5\n"
        );
    }
}
