//! CSV files for run records and sweep summaries, plus a gnuplot script.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{RunRecord, SweepSummary};
use crate::error::{Error, Result};

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err)
}

/// Columns: `name,kind,n,k,seed,estimate,ground_truth,abs_error,wall_time_s,error_msg`.
/// Floats are written in shortest round-trip form.
pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    write_csv(records, path)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    read_csv(path)
}

pub fn write_summaries_csv(summaries: &[SweepSummary], path: &Path) -> Result<()> {
    write_csv(summaries, path)
}

pub fn read_summaries_csv(path: &Path) -> Result<Vec<SweepSummary>> {
    read_csv(path)
}

/// Gnuplot script plotting mean absolute error against `x_column`
/// (`"n"` or `"k"`) on log-log axes from the summary CSV `data_file`.
pub fn plot_script(data_file: &str, x_column: &str, title: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set xlabel '{x_column}'\n\
         set ylabel 'mean absolute error'\n\
         set title '{title}'\n\
         set key top right\n\
         plot '{data_file}' using '{x_column}':'mean_abs_error' with linespoints title 'estimate error'\n"
    )
}

/// Writes the summary CSV and a `.gp` script next to it; returns the script path.
pub fn write_summary_with_plot(summaries: &[SweepSummary], path: &Path, x_column: &str) -> Result<PathBuf> {
    write_summaries_csv(summaries, path)?;
    let script_path = path.with_extension("gp");
    let data_file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let title = summaries.first().map(|s| format!("{} ({})", s.name, s.kind)).unwrap_or_default();
    let io_err = |source| Error::Io { path: script_path.clone(), source };
    let mut f = File::create(&script_path).map_err(io_err)?;
    f.write_all(plot_script(&data_file, x_column, &title).as_bytes()).map_err(io_err)?;
    Ok(script_path)
}
