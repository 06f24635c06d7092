//! Long-format CSV with header `subject,group,time,count`; counts are cumulative.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use pct_core::{ObservationPath, PanelDataset};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 4] = ["subject", "group", "time", "count"];

/// Parses a dataset. Rows may come in any order; each subject's rows are
/// sorted by time and subjects keep the order of their first row.
pub fn read_dataset_from<R: Read>(reader: R, name: &str) -> Result<PanelDataset> {
    let csv_err = |source| CliError::Csv { path: name.to_string(), source };
    let format = |message: String| CliError::Format { path: name.to_string(), message };

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut column = [0usize; 4];
    for (slot, want) in column.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(want))
            .ok_or_else(|| format(format!("missing header column '{want}'")))?;
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, (usize, Vec<(f64, u64)>)> = HashMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let field = |i: usize| record.get(column[i]).unwrap_or("");
        let row = line + 2;
        let subject = field(0).to_string();
        if subject.is_empty() {
            return Err(format(format!("row {row}: empty subject")));
        }
        let group: usize = field(1)
            .parse()
            .map_err(|_| format(format!("row {row}: bad group '{}'", field(1))))?;
        let time: f64 = field(2)
            .parse()
            .map_err(|_| format(format!("row {row}: bad time '{}'", field(2))))?;
        let count: u64 = field(3)
            .parse()
            .map_err(|_| format(format!("row {row}: bad count '{}'", field(3))))?;
        match rows.get_mut(&subject) {
            Some((g, obs)) => {
                if *g != group {
                    return Err(CliError::Invalid(pct_core::ValidationReport {
                        errors: vec![format!("subject {subject}: group changes from {g} to {group}")],
                        warnings: Vec::new(),
                    }));
                }
                obs.push((time, count));
            }
            None => {
                order.push(subject.clone());
                rows.insert(subject, (group, vec![(time, count)]));
            }
        }
    }

    let paths = order
        .into_iter()
        .map(|id| {
            let (group, mut obs) = rows.remove(&id).expect("subject recorded");
            obs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (times, counts) = obs.into_iter().unzip();
            ObservationPath::new(id, group, times, counts)
        })
        .collect();
    Ok(PanelDataset::from_paths(paths))
}

pub fn read_dataset(path: &Path) -> Result<PanelDataset> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| CliError::Io { path: name.clone(), source })?;
    read_dataset_from(file, &name)
}

pub fn write_dataset_to<W: Write>(d: &PanelDataset, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for p in d.paths() {
        let group = p.group().to_string();
        for (t, c) in p.times().iter().zip(p.counts()) {
            w.write_record([p.subject_id(), &group, &t.to_string(), &c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
