//! CSV traces. Reals are written as `{:.16e}` (17 significant digits, exact
//! round trip); absent values are empty fields.

use std::io::Write;

use crate::optimizers::{RunTrace, StepRecord};

pub const TRACE_HEADER: [&str; 11] =
    ["t", "i_t", "f_full", "f_i", "grad_sq", "alpha", "eta", "mem_sq", "dist_sq", "backtracks", "evals"];
pub const DIST_HEADER: [&str; 4] = ["bytes_up", "bytes_down", "worker_alpha_min", "worker_alpha_max"];
/// Leading columns of the aggregate file; the remaining ones are the trace
/// columns after `i_t`.
pub const AGGREGATE_PREFIX: [&str; 3] = ["t", "epoch", "n_seeds"];

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn is_distributed(trace: &RunTrace) -> bool {
    trace.header.workers > 1 || trace.records.iter().any(|r| r.dist.is_some())
}

pub fn trace_header(distributed: bool) -> Vec<&'static str> {
    let mut h = TRACE_HEADER.to_vec();
    if distributed {
        h.extend(DIST_HEADER);
    }
    h
}

fn record_fields(r: &StepRecord, distributed: bool) -> Vec<String> {
    let mut row = vec![
        r.t.to_string(),
        r.i_t.map(|i| i.to_string()).unwrap_or_default(),
        real(r.f_full),
        real(r.f_i),
        real(r.grad_sq),
        real(r.alpha),
        real(r.eta),
        real(r.mem_sq),
        opt_real(r.dist_sq),
        r.backtracks.to_string(),
        r.evals.to_string(),
    ];
    if distributed {
        match &r.dist {
            Some(d) => row.extend([
                d.bytes_up.to_string(),
                d.bytes_down.to_string(),
                real(d.worker_alpha_min),
                real(d.worker_alpha_max),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), DIST_HEADER.len())),
        }
    }
    row
}

pub fn write_trace<W: Write>(out: W, trace: &RunTrace) -> Result<(), csv::Error> {
    let distributed = is_distributed(trace);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(distributed))?;
    for r in &trace.records {
        w.write_record(record_fields(r, distributed))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration means over the seeds whose trace reaches that iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub t: usize,
    pub epoch: f64,
    pub n_seeds: usize,
    /// Means of `f_full .. evals` (and the distributed columns), in header order;
    /// `None` where no seed has a value.
    pub means: Vec<Option<f64>>,
}

fn numeric_columns(r: &StepRecord) -> Vec<Option<f64>> {
    let mut v = vec![
        Some(r.f_full),
        Some(r.f_i),
        Some(r.grad_sq),
        Some(r.alpha),
        Some(r.eta),
        Some(r.mem_sq),
        r.dist_sq,
        Some(f64::from(r.backtracks)),
        Some(r.evals as f64),
    ];
    if let Some(d) = &r.dist {
        v.extend([Some(d.bytes_up as f64), Some(d.bytes_down as f64), Some(d.worker_alpha_min), Some(d.worker_alpha_max)]);
    }
    v
}

/// `epoch = t / iterations_per_epoch`.
pub fn aggregate(traces: &[&RunTrace], iterations_per_epoch: f64) -> Vec<AggregateRow> {
    let len = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(len);
    for t in 0..len {
        let present: Vec<Vec<Option<f64>>> =
            traces.iter().filter_map(|tr| tr.records.get(t)).map(numeric_columns).collect();
        let width = present.iter().map(Vec::len).max().unwrap_or(0);
        let means = (0..width)
            .map(|c| {
                let vals: Vec<f64> = present.iter().filter_map(|p| p.get(c).copied().flatten()).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        rows.push(AggregateRow { t, epoch: t as f64 / iterations_per_epoch, n_seeds: present.len(), means });
    }
    rows
}

pub fn aggregate_header(distributed: bool) -> Vec<&'static str> {
    let mut h = AGGREGATE_PREFIX.to_vec();
    h.extend(&TRACE_HEADER[2..]);
    if distributed {
        h.extend(DIST_HEADER);
    }
    h
}

pub fn write_aggregate<W: Write>(out: W, traces: &[&RunTrace], iterations_per_epoch: f64) -> Result<(), csv::Error> {
    let distributed = traces.iter().any(|t| is_distributed(t));
    let header = aggregate_header(distributed);
    let width = header.len() - AGGREGATE_PREFIX.len();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in aggregate(traces, iterations_per_epoch) {
        let mut fields = vec![row.t.to_string(), real(row.epoch), row.n_seeds.to_string()];
        fields.extend((0..width).map(|c| opt_real(row.means.get(c).copied().flatten())));
        w.write_record(fields)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::CompressionSpec;
    use crate::linesearch::ArmijoConfig;
    use crate::objectives::make_diag_quadratic;
    use crate::optimizers::{run_csgd_asss, run_scaled_gd};

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, f64::MIN_POSITIVE, 1e300, -2.5e-7] {
            let s = real(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(real(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn trace_csv_shape() {
        let obj = make_diag_quadratic(&[1.0, 0.5, 0.25]).unwrap();
        let trace = run_scaled_gd(&obj, &ArmijoConfig::default(), 7).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,i_t,f_full,f_i,grad_sq,alpha,eta,mem_sq,dist_sq,backtracks,evals");
        assert_eq!(lines.len(), 8);
        // Full-batch rows have no sampled index.
        assert!(lines[1].starts_with("0,,"));
    }

    #[test]
    fn aggregate_means_and_ragged_lengths() {
        let obj = make_diag_quadratic(&[1.0, 0.5, 0.25]).unwrap();
        let cfg = ArmijoConfig::default();
        let comp = CompressionSpec::new(1, 3).unwrap();
        let a = run_csgd_asss(&obj, &cfg, &comp, 10, 1).unwrap();
        let mut b = run_csgd_asss(&obj, &cfg, &comp, 10, 2).unwrap();
        b.records.truncate(6);
        let rows = aggregate(&[&a, &b], 3.0);
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[5].n_seeds, 2);
        assert_eq!(rows[6].n_seeds, 1);
        let want = (a.records[4].f_full + b.records[4].f_full) / 2.0;
        assert!((rows[4].means[0].unwrap() - want).abs() <= 1e-12 * want.abs());
        assert_eq!(rows[7].means[0], Some(a.records[7].f_full));
        assert_eq!(rows[3].epoch, 1.0);
        let mut buf = Vec::new();
        write_aggregate(&mut buf, &[&a, &b], 3.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,epoch,n_seeds,f_full,f_i,"));
        assert_eq!(text.lines().count(), 11);
    }
}
