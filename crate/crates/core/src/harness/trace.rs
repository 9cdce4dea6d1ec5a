use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepsize::Method;

/// CSV column order of every trace file.
pub const CSV_COLUMNS: [&str; 5] = ["k", "f", "grad_metric", "floats_cum", "aux"];

/// One row per iterate x^k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    /// f(x^k).
    pub f: f64,
    /// ‖∇f(x^k)‖² in the norm of D/det(D)^{1/d}.
    pub grad_metric: f64,
    /// Floats sent by all clients so far, initialization included.
    pub floats_cum: f64,
    /// Coin c_{k−1} (0/1) for coin methods, momentum for DASHA-type methods.
    pub aux: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub label: String,
    pub method: Method,
    pub seed: u64,
    /// Hash of the experiment config that produced the run.
    pub config_hash: String,
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_rows<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Config(format!("unexpected trace columns {header:?}")));
    }
    rd.deserialize().map(|r| r.map_err(csv_err)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub seeds: usize,
    pub k: Vec<usize>,
    pub f: SeriesStats,
    pub grad_metric: SeriesStats,
    pub floats_cum: SeriesStats,
    pub aux: Option<SeriesStats>,
    /// Seed mean of min_k grad_metric.
    pub min_over_k: f64,
    /// Seed mean of the grad metric at a uniformly random k in 0..K−1.
    pub uniform_average: f64,
}

impl Summary {
    fn rows(&self, pick: impl Fn(&SeriesStats) -> &Vec<f64>) -> Vec<TraceRow> {
        (0..self.k.len())
            .map(|t| TraceRow {
                k: self.k[t],
                f: pick(&self.f)[t],
                grad_metric: pick(&self.grad_metric)[t],
                floats_cum: pick(&self.floats_cum)[t],
                aux: self.aux.as_ref().map(|a| pick(a)[t]).filter(|v| !v.is_nan()),
            })
            .collect()
    }

    /// Per-iteration seed means in trace form.
    pub fn mean_rows(&self) -> Vec<TraceRow> {
        self.rows(|s| &s.mean)
    }

    pub fn std_rows(&self) -> Vec<TraceRow> {
        self.rows(|s| &s.std)
    }
}

fn stats(columns: &[Vec<f64>]) -> SeriesStats {
    let n = columns.len() as f64;
    let len = columns[0].len();
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for t in 0..len {
        let m = columns.iter().map(|c| c[t]).sum::<f64>() / n;
        mean[t] = m;
        if columns.len() > 1 {
            let ss: f64 = columns.iter().map(|c| (c[t] - m) * (c[t] - m)).sum();
            std[t] = (ss / (n - 1.0)).sqrt();
        }
    }
    SeriesStats { mean, std }
}

/// Per-iteration mean and std across seeds.
pub fn aggregate(traces: &[RunTrace]) -> Result<Summary> {
    let first = traces.first().ok_or_else(|| Error::AggregateError("no traces".into()))?;
    let len = first.rows.len();
    if len == 0 {
        return Err(Error::AggregateError("trace has no rows".into()));
    }
    for t in traces {
        if t.rows.len() != len || t.label != first.label {
            return Err(Error::AggregateError(format!(
                "traces differ: `{}` ({} rows) vs `{}` ({} rows)",
                first.label,
                len,
                t.label,
                t.rows.len()
            )));
        }
    }
    let column = |f: &dyn Fn(&TraceRow) -> f64| -> Vec<Vec<f64>> {
        traces.iter().map(|t| t.rows.iter().map(f).collect()).collect()
    };
    let has_aux = traces.iter().any(|t| t.rows.iter().any(|r| r.aux.is_some()));
    let metric = column(&|r| r.grad_metric);
    let seeds = traces.len() as f64;
    let min_over_k = metric.iter().map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min)).sum::<f64>() / seeds;
    // x̃ is drawn from x^0..x^{K−1}; with a single row that is x^0.
    let window = (len - 1).max(1);
    let uniform_average =
        metric.iter().map(|c| c[..window].iter().sum::<f64>() / window as f64).sum::<f64>() / seeds;
    Ok(Summary {
        seeds: traces.len(),
        k: first.rows.iter().map(|r| r.k).collect(),
        f: stats(&column(&|r| r.f)),
        grad_metric: stats(&metric),
        floats_cum: stats(&column(&|r| r.floats_cum)),
        aux: has_aux.then(|| stats(&column(&|r| r.aux.unwrap_or(f64::NAN)))),
        min_over_k,
        uniform_average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(values: &[f64], seed: u64) -> RunTrace {
        RunTrace {
            label: "m".into(),
            method: Method::DetMarina,
            seed,
            config_hash: String::new(),
            rows: values
                .iter()
                .enumerate()
                .map(|(k, &v)| TraceRow { k, f: v, grad_metric: v, floats_cum: 10.0 * k as f64, aux: None })
                .collect(),
        }
    }

    #[test]
    fn single_trace_summary_equals_trace() {
        let t = trace(&[3.0, 2.0, 1.5], 0);
        let s = aggregate(std::slice::from_ref(&t)).unwrap();
        assert_eq!(s.mean_rows(), t.rows);
        assert!(s.grad_metric.std.iter().all(|&v| v == 0.0));
        assert_eq!(s.min_over_k, 1.5);
        assert_eq!(s.uniform_average, 2.5);
    }

    #[test]
    fn identical_traces_have_zero_std() {
        let t = trace(&[3.0, 2.0, 1.0], 0);
        let s = aggregate(&[t.clone(), t]).unwrap();
        assert!(s.f.std.iter().chain(&s.grad_metric.std).all(|&v| v == 0.0));
    }

    #[test]
    fn mean_of_one_and_three_is_two() {
        let s = aggregate(&[trace(&[1.0, 1.0], 0), trace(&[3.0, 3.0], 1)]).unwrap();
        assert_eq!(s.grad_metric.mean, vec![2.0, 2.0]);
        assert_eq!(s.grad_metric.std, vec![2f64.sqrt(), 2f64.sqrt()]);
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(aggregate(&[]), Err(Error::AggregateError(_))));
        assert!(aggregate(&[trace(&[1.0], 0), trace(&[1.0, 2.0], 1)]).is_err());
    }

    #[test]
    fn csv_round_trip_and_schema() {
        let mut t = trace(&[0.5, 0.25], 0);
        t.rows[1].aux = Some(1.0);
        let text = t.to_csv_string().unwrap();
        assert!(text.starts_with("k,f,grad_metric,floats_cum,aux\n"));
        assert_eq!(read_rows(text.as_bytes()).unwrap(), t.rows);
        assert!(read_rows("k,f\n1,2\n".as_bytes()).is_err());
    }
}
