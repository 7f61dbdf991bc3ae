//! CSV tables and run metadata. Every table starts with a header row that
//! names the columns together with their units; energies are in units of the
//! local coupling J, times in 1/J.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Result};

/// Column layout of one table kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub columns: &'static [&'static str],
}

pub const SPECTRUM: Schema = Schema { name: "spectrum", columns: &["s", "n", "E_n [J]", "S_A [nats]", "is_scar"] };
pub const R_HISTOGRAM: Schema = Schema { name: "r_histogram", columns: &["r_lo", "r_hi", "density"] };
pub const FIDELITY: Schema = Schema { name: "fidelity", columns: &["t [1/J]", "s", "F", "S_diag [nats]"] };
pub const POPULATIONS: Schema = Schema { name: "populations", columns: &["s", "n", "E_n [J]", "rho_nn"] };
pub const AGP: Schema = Schema { name: "agp", columns: &["s", "n", "E_n [J]", "|A_n0| [1/J]"] };
pub const SUSCEPTIBILITY: Schema =
    Schema { name: "susceptibility", columns: &["N", "epsilon [J]", "chi_scar", "chi_thermal", "gauge_norm"] };
pub const APT: Schema = Schema { name: "apt", columns: &["v [J]", "predicted_F"] };
pub const KPM: Schema = Schema { name: "kpm", columns: &["n", "omega [J]", "G [1/J]"] };
pub const QSL: Schema = Schema { name: "qsl", columns: &["N", "s", "log_C", "C_N", "dE0 [J]", "v_qsl [J]"] };
pub const VELOCITY: Schema = Schema { name: "velocity", columns: &["N", "variant", "threshold", "v_F [J]"] };
pub const TOWER: Schema = Schema { name: "tower", columns: &["N", "ell", "s", "log_C", "C_N_ell", "E_ell [J]"] };

pub const ALL: [Schema; 11] = [SPECTRUM, R_HISTOGRAM, FIDELITY, POPULATIONS, AGP, SUSCEPTIBILITY, APT, KPM, QSL, VELOCITY, TOWER];

/// Formats a float with the shortest representation that round-trips.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:?}")
    }
}

/// Row writer that flushes after every record, so partial results survive an abort.
pub struct Table<W: Write> {
    schema: Schema,
    inner: csv::Writer<W>,
    rows: usize,
}

impl Table<BufWriter<File>> {
    pub fn create(path: &Path, schema: Schema) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), schema)
    }
}

impl<W: Write> Table<W> {
    pub fn new(out: W, schema: Schema) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        inner.write_record(schema.columns)?;
        inner.flush()?;
        Ok(Self { schema, inner, rows: 0 })
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn push(&mut self, fields: &[&dyn Display]) -> Result<()> {
        if fields.len() != self.schema.columns.len() {
            return Err(invalid(format!(
                "{} table expects {} columns, got {}",
                self.schema.name,
                self.schema.columns.len(),
                fields.len()
            )));
        }
        self.inner.write_record(fields.iter().map(|f| f.to_string()))?;
        self.inner.flush()?;
        self.rows += 1;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Float column helper: `Num(x)` displays like [`num`].
#[derive(Clone, Copy, Debug)]
pub struct Num(pub f64);

impl Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&num(self.0))
    }
}

/// Sidecar written next to the tables of a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata<C: Serialize> {
    pub task: String,
    pub version: &'static str,
    pub config: C,
    pub tables: Vec<String>,
    /// Numbers worth checking at a glance (fits, truncation orders, …).
    pub summary: serde_json::Map<String, serde_json::Value>,
    /// Excluded from determinism checks.
    pub wall_time_seconds: f64,
}

impl<C: Serialize> RunMetadata<C> {
    pub fn new(task: &str, config: C) -> Self {
        Self {
            task: task.into(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            tables: Vec::new(),
            summary: Default::default(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|e| invalid(e.to_string()))?;
        self.summary.insert(key.into(), v);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut t = Table::new(Vec::new(), APT).unwrap();
        t.push(&[&Num(1e-3), &Num(0.99)]).unwrap();
        assert!(t.push(&[&Num(1.0)]).is_err());
        let text = String::from_utf8(t.into_inner().unwrap()).unwrap();
        assert_eq!(text, "v [J],predicted_F\r\n0.001,0.99\r\n");
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let mut t = Table::new(Vec::new(), VELOCITY).unwrap();
        t.push(&[&12, &"a,b", &Num(0.99), &Num(f64::NAN)]).unwrap();
        let text = String::from_utf8(t.into_inner().unwrap()).unwrap();
        assert!(text.ends_with("12,\"a,b\",0.99,NaN\r\n"));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.56e-3, -1e-300, 12.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn every_schema_has_unique_columns() {
        for s in ALL {
            let mut c = s.columns.to_vec();
            c.sort();
            c.dedup();
            assert_eq!(c.len(), s.columns.len(), "{}", s.name);
        }
    }
}
