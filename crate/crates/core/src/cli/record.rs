//! Per-run CSV rows and bench summaries.

use std::fmt::Write as _;

use crate::metrics::{sig6, NetworkMetrics};
use crate::sitemap::Coord;

pub const RUN_HEADER: &str = "scheme,n_bs,map_id,placements,coverage,capacity,pathgain_w,elapsed_s,evaluations";

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: String,
    pub n_bs: usize,
    pub map_id: u64,
    pub placements: Vec<Coord>,
    pub metrics: NetworkMetrics,
    /// Decision time only, from a monotonic clock.
    pub elapsed_s: f64,
    pub evaluations: usize,
}

pub fn encode_placements(p: &[Coord]) -> String {
    p.iter().map(Coord::to_string).collect::<Vec<_>>().join(";")
}

pub fn decode_placements(s: &str) -> Result<Vec<Coord>, String> {
    s.split(';').filter(|t| !t.is_empty()).map(str::parse).collect()
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:016x},{},{},{},{}",
            self.scheme,
            self.n_bs,
            self.map_id,
            encode_placements(&self.placements),
            self.metrics.csv_fragment(),
            sig6(self.elapsed_s),
            self.evaluations
        )
    }

    /// Parses the scheme, sizes, map id, placements and metric columns of a
    /// row written by [`RunRecord::csv_row`].
    pub fn parse_row(line: &str) -> Result<RunRecord, String> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 9 {
            return Err(format!("expected 9 fields, got {}", f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        let metrics =
            NetworkMetrics { coverage: num(f[4])?, capacity: num(f[5])?, pathgain_w: num(f[6])?, ..Default::default() };
        Ok(RunRecord {
            scheme: f[0].to_string(),
            n_bs: f[1].parse().map_err(|e| format!("n_bs: {e}"))?,
            map_id: u64::from_str_radix(f[2], 16).map_err(|e| format!("map_id: {e}"))?,
            placements: decode_placements(f[3])?,
            metrics,
            elapsed_s: num(f[7])?,
            evaluations: f[8].parse().map_err(|e| format!("evaluations: {e}"))?,
        })
    }
}

pub fn csv(records: &[RunRecord]) -> String {
    let mut out = format!("{RUN_HEADER}\n");
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median and mean per (scheme, n_bs) in first-seen order, then the ratio
/// of median exhaustive time to median AutoBS time for each `n_bs`.
pub fn summary(records: &[RunRecord]) -> String {
    let mut groups: Vec<(String, usize)> = Vec::new();
    for r in records {
        let key = (r.scheme.clone(), r.n_bs);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut out = String::from("scheme      n_bs  maps  cov_median  cov_mean  cap_median  cap_mean  time_median_s\n");
    let col = |scheme: &str, n: usize, f: fn(&RunRecord) -> f64| -> Vec<f64> {
        records.iter().filter(|r| r.scheme == scheme && r.n_bs == n).map(f).collect()
    };
    for (scheme, n) in &groups {
        let mut cov = col(scheme, *n, |r| r.metrics.coverage);
        let mut cap = col(scheme, *n, |r| r.metrics.capacity);
        let mut t = col(scheme, *n, |r| r.elapsed_s);
        let _ = writeln!(
            out,
            "{:<12}{:>4}{:>6}{:>12.4}{:>10.4}{:>12.4}{:>10.4}{:>15.6}",
            scheme,
            n,
            cov.len(),
            median(&mut cov),
            mean(&cov),
            median(&mut cap),
            mean(&cap),
            median(&mut t)
        );
    }
    let ns: Vec<usize> = groups.iter().map(|g| g.1).fold(Vec::new(), |mut v, n| {
        if !v.contains(&n) {
            v.push(n);
        }
        v
    });
    for n in ns {
        let mut auto = col("autobs", n, |r| r.elapsed_s);
        for ex in ["exhaustive_v", "exhaustive_c"] {
            let mut e = col(ex, n, |r| r.elapsed_s);
            if !auto.is_empty() && !e.is_empty() {
                let _ = writeln!(out, "time ratio {ex}/autobs (n_bs={n}): {:.1}", median(&mut e) / median(&mut auto));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_round_trip() {
        let r = RunRecord {
            scheme: "greedy".into(),
            n_bs: 2,
            map_id: 0xabc,
            placements: vec![Coord::new(1, 2), Coord::new(30, 4)],
            metrics: NetworkMetrics { coverage: 0.5, capacity: 2.25, pathgain_w: 1.5e-9, ..Default::default() },
            elapsed_s: 0.125,
            evaluations: 17,
        };
        let row = r.csv_row();
        assert_eq!(row, "greedy,2,0000000000000abc,1:2;30:4,5.00000e-1,2.25000e0,1.50000e-9,1.25000e-1,17");
        let back = RunRecord::parse_row(&row).unwrap();
        assert_eq!(back.placements, r.placements);
        assert_eq!(back.metrics.coverage, 0.5);
        assert_eq!(back.map_id, 0xabc);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }
}
