//! CSV output rows for simulation results.
//!
//! One row per (work unit, metric) pair. The leading columns echo the
//! resolved run parameters so a results file stands on its own; the
//! trailing columns carry the estimate. Fields follow RFC 4180 quoting
//! with Unix line endings.

use std::io::{self, Write};

pub const HEADER: &[&str] = &[
    "n",
    "traffic",
    "family",
    "a_max",
    "epsilon",
    "load",
    "scheduler",
    "d",
    "m",
    "delta",
    "horizon",
    "warmup_fraction",
    "thinning",
    "replications",
    "master_seed",
    "metric",
    "mean",
    "ci_half_width",
    "samples",
];

/// One result row; optional parameter columns render as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub n: usize,
    pub traffic: String,
    pub family: String,
    pub a_max: i64,
    pub epsilon: f64,
    pub load: f64,
    pub scheduler: String,
    pub d: Option<u32>,
    pub m: Option<u32>,
    pub delta: Option<f64>,
    pub horizon: u64,
    pub warmup_fraction: f64,
    pub thinning: u64,
    pub replications: u32,
    pub master_seed: u64,
    pub metric: String,
    pub mean: f64,
    pub ci_half_width: f64,
    pub samples: u64,
}

impl Row {
    pub fn fields(&self) -> Vec<String> {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        vec![
            self.n.to_string(),
            self.traffic.clone(),
            self.family.clone(),
            self.a_max.to_string(),
            self.epsilon.to_string(),
            self.load.to_string(),
            self.scheduler.clone(),
            opt(&self.d),
            opt(&self.m),
            opt(&self.delta),
            self.horizon.to_string(),
            self.warmup_fraction.to_string(),
            self.thinning.to_string(),
            self.replications.to_string(),
            self.master_seed.to_string(),
            self.metric.clone(),
            self.mean.to_string(),
            self.ci_half_width.to_string(),
            self.samples.to_string(),
        ]
    }
}

/// Quotes a field when it contains a comma, quote, or line break.
pub fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes the header line and all rows.
pub fn write_csv<W: Write>(out: &mut W, rows: &[Row]) -> io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for row in rows {
        let fields = row.fields();
        debug_assert_eq!(fields.len(), HEADER.len());
        let line: Vec<String> = fields.iter().map(|f| escape(f)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> Row {
        Row {
            n: 4,
            traffic: "uniform".into(),
            family: "bernoulli".into(),
            a_max: 1,
            epsilon: 0.1,
            load: 0.9,
            scheduler: "power_of_d".into(),
            d: Some(2),
            m: None,
            delta: None,
            horizon: 1000,
            warmup_fraction: 0.2,
            thinning: 10,
            replications: 3,
            master_seed: 7,
            metric: "scaled_q".into(),
            mean: 2.625,
            ci_half_width: 0.05,
            samples: 240,
        }
    }

    #[test]
    fn field_count_matches_header() {
        assert_eq!(sample_row().fields().len(), HEADER.len());
    }

    #[test]
    fn writes_exact_lines() {
        let mut out = Vec::new();
        write_csv(&mut out, &[sample_row()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,traffic,family,a_max,epsilon,load,scheduler,d,m,delta,horizon,warmup_fraction,thinning,replications,master_seed,metric,mean,ci_half_width,samples"
        );
        assert_eq!(
            lines.next().unwrap(),
            "4,uniform,bernoulli,1,0.1,0.9,power_of_d,2,,,1000,0.2,10,3,7,scaled_q,2.625,0.05,240"
        );
        assert!(lines.next().is_none());
        assert!(!text.contains('\r'));
    }

    #[test]
    fn escaping_follows_rfc_4180() {
        assert_eq!(escape("plain"), "plain");
        assert_eq!(escape("a,b"), "\"a,b\"");
        assert_eq!(escape("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(escape("two\nlines"), "\"two\nlines\"");
    }
}
