use std::io::Read;

use thiserror::Error;

#[derive(Debug, Error)]
#[error("sheet CSV: {0}")]
pub struct SheetError(#[from] csv::Error);

/// A spreadsheet exported as CSV: a ragged grid of cells. Cells outside the
/// stored grid read as blank.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sheet {
    rows: Vec<Vec<String>>,
}

impl Sheet {
    pub fn from_rows<R, C>(rows: R) -> Self
    where
        R: IntoIterator<Item = C>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        Sheet {
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(Into::into).collect())
                .collect(),
        }
    }

    /// Read an RFC 4180 CSV export. The first line is data, not a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, SheetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(Sheet { rows })
    }

    pub fn parse_csv(text: &str) -> Result<Self, SheetError> {
        Self::from_csv(text.as_bytes())
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Raw cell content.
    pub fn cell(&self, row: usize, col: usize) -> &str {
        self.rows
            .get(row)
            .and_then(|r| r.get(col))
            .map(String::as_str)
            .unwrap_or("")
    }

    /// Trimmed cell content, `None` when blank.
    pub fn value(&self, row: usize, col: usize) -> Option<&str> {
        let v = self.cell(row, col).trim();
        (!v.is_empty()).then_some(v)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}
