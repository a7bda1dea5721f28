//! Cross-seed summaries of trace CSVs on a common log-spaced budget grid.

use std::io::{self, Write};

pub const DEFAULT_BUCKETS: usize = 100;

/// `(grad_count, F)` pairs read back from a trace CSV.
pub type Curve = Vec<(u64, Option<f64>)>;

/// Reads the `grad_count` and `F` columns of a trace CSV.
pub fn read_trace_csv(text: &str) -> Result<Curve, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty trace")?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| format!("trace has no `{name}` column"))
    };
    let (gi, fi) = (find("grad_count")?, find("F")?);
    let mut curve = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || format!("trace line {}: malformed", k + 2);
        let g: u64 = fields.get(gi).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let f = match *fields.get(fi).ok_or_else(bad)? {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad())?),
        };
        curve.push((g, f));
    }
    Ok(curve)
}

/// Lowest recorded `F` among points with `grad_count ≤ budget`.
pub fn best_so_far(curve: &[(u64, Option<f64>)], budget: u64) -> Option<f64> {
    curve
        .iter()
        .take_while(|(g, _)| *g <= budget)
        .filter_map(|(_, f)| *f)
        .reduce(f64::min)
}

/// `count` budgets spaced evenly in log scale from `lo` to `hi`.
pub fn budget_buckets(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    let lo = lo.max(1);
    if hi <= lo || count == 1 {
        return vec![hi.max(1)];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    (0..count)
        .map(|k| {
            if k == count - 1 {
                hi
            } else if k == 0 {
                lo
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as u64
            }
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data (the common "type 7").
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub bucket: usize,
    pub budget: u64,
    pub seeds: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Budget grid shared by every curve: from the smallest first positive count
/// to the smallest final count.
pub fn common_grid(curves: &[(String, Curve)], count: usize) -> Vec<u64> {
    let lo = curves
        .iter()
        .filter_map(|(_, c)| c.iter().map(|p| p.0).find(|g| *g > 0))
        .min()
        .unwrap_or(1);
    let hi = curves
        .iter()
        .filter_map(|(_, c)| c.last().map(|p| p.0))
        .min()
        .unwrap_or(1);
    budget_buckets(lo, hi, count)
}

/// Per method and budget bucket: median and quartiles across seeds of the
/// best-so-far `F`. Methods appear in first-seen order.
pub fn summarize(curves: &[(String, Curve)], count: usize) -> Vec<SummaryRow> {
    let grid = common_grid(curves, count);
    let mut methods: Vec<&str> = Vec::new();
    for (m, _) in curves {
        if !methods.contains(&m.as_str()) {
            methods.push(m);
        }
    }
    let mut rows = Vec::new();
    for m in methods {
        for (bucket, &budget) in grid.iter().enumerate() {
            let mut values: Vec<f64> = curves
                .iter()
                .filter(|(name, _)| name == m)
                .filter_map(|(_, c)| best_so_far(c, budget))
                .collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            rows.push(SummaryRow {
                method: m.to_string(),
                bucket,
                budget,
                seeds: values.len(),
                median: quantile(&values, 0.5),
                q1: quantile(&values, 0.25),
                q3: quantile(&values, 0.75),
            });
        }
    }
    rows
}

pub const SUMMARY_HEADER: &str = "method,bucket,budget,seeds,median,q1,q3";

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method, r.bucket, r.budget, r.seeds, r.median, r.q1, r.q3
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[5.0], 0.25), 5.0);
    }

    #[test]
    fn bucket_endpoints() {
        let g = budget_buckets(10, 10_000, 4);
        assert_eq!(g, vec![10, 100, 1000, 10_000]);
        assert_eq!(budget_buckets(50, 20, 100), vec![20]);
    }

    #[test]
    fn best_so_far_skips_missing() {
        let c = vec![(0, Some(3.0)), (5, None), (9, Some(1.0)), (12, Some(2.0))];
        assert_eq!(best_so_far(&c, 4), Some(3.0));
        assert_eq!(best_so_far(&c, 9), Some(1.0));
        assert_eq!(best_so_far(&c, 100), Some(1.0));
    }

    #[test]
    fn csv_round_trip() {
        let text = "t,grad_count,grad_evals,F,d,gap,step_norm,branch,residual\n0,0,0,0.25,,,0,refresh,0\n1,10,10,0.125,,,0.5,refresh,0\n";
        let c = read_trace_csv(text).unwrap();
        assert_eq!(c, vec![(0, Some(0.25)), (10, Some(0.125))]);
        assert!(read_trace_csv("t,F\n").is_err());
    }
}
