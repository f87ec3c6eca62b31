use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four evaluation views of a label-noised training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Clean training samples, scored against their (unchanged) labels.
    CleanTrain,
    /// Noisy training samples, scored against the assigned labels.
    NoisyTrainNoisy,
    /// The same noisy samples, scored against their original labels.
    NoisyTrainClean,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [
        Split::CleanTrain,
        Split::NoisyTrainNoisy,
        Split::NoisyTrainClean,
        Split::Test,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::CleanTrain => "clean_train",
            Split::NoisyTrainNoisy => "noisy_train_noisy",
            Split::NoisyTrainClean => "noisy_train_clean",
            Split::Test => "test",
        }
    }
}

/// Loss and accuracy of one split at one epoch. Both are `None` when the
/// split is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: u64,
    pub split: Split,
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub n: usize,
}

/// CSV with header `epoch,split,loss,accuracy,n`. Reals are written in
/// shortest round-trip form, so [`read_metrics`] restores them bit-exactly.
pub fn write_metrics<W: Write>(records: &[MetricRecord], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let io = |e: csv::Error| Error::InvalidArgument(format!("writing metrics: {e}"));
    wtr.write_record(["epoch", "split", "loss", "accuracy", "n"]).map_err(io)?;
    for r in records {
        wtr.serialize(r).map_err(io)?;
    }
    wtr.flush()
        .map_err(|e| Error::InvalidArgument(format!("writing metrics: {e}")))
}

pub fn metrics_to_string(records: &[MetricRecord]) -> String {
    let mut buf = Vec::new();
    write_metrics(records, &mut buf).expect("writing to a Vec");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers != vec!["epoch", "split", "loss", "accuracy", "n"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {headers:?}"),
        });
    }
    rdr.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}
