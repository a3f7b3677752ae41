//! Serialized reports: a versioned JSON envelope and flat CSV tables.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::treesim::{MomentSeries, ProfileRow};
use crate::verify::{
    DiagonalReport, EnvelopeReport, IdentityReport, LimitReport, Mu3ScanReport, ProbeReport, ScanReport,
};

pub const SCHEMA: &str = "hypermu-report/1";

#[derive(Clone, Debug, Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub schema: &'static str,
    pub kind: &'a str,
    pub passed: bool,
    pub config: &'a C,
    pub result: &'a R,
}

impl<'a, C: Serialize, R: Serialize> Report<'a, C, R> {
    pub fn new(kind: &'a str, passed: bool, config: &'a C, result: &'a R) -> Self {
        Report { schema: SCHEMA, kind, passed, config, result }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize report: {e}")))
    }
}

/// A flat table: header row plus records.
pub trait CsvTable {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self, verbose: bool) -> Vec<Vec<String>>;

    fn to_csv(&self, verbose: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("cannot write CSV: {e}"));
        w.write_record(self.header()).map_err(io)?;
        for r in self.rows(verbose) {
            w.write_record(&r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("cannot write CSV: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }
}

fn f(v: f64) -> String {
    format!("{v:e}")
}

fn pt(z: &crate::halfplane::ExtendedPoint) -> String {
    z.to_string()
}

impl CsvTable for IdentityReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["identity", "max_residual", "worst_sample", "evaluated", "skipped", "passed"]
    }

    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                vec![
                    e.name.clone(),
                    f(e.max_residual),
                    e.worst_sample.map(|v| v.to_string()).unwrap_or_default(),
                    e.evaluated.to_string(),
                    e.skipped.to_string(),
                    e.passed.to_string(),
                ]
            })
            .collect()
    }
}

impl CsvTable for ScanReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["row", "value", "z1", "z2", "lambda", "samples", "skipped", "counterexamples", "passed"]
    }

    /// The supremum row; with `verbose`, one row per kept counterexample.
    fn rows(&self, verbose: bool) -> Vec<Vec<String>> {
        let a = &self.argmax;
        let mut out = vec![vec![
            "sup".into(),
            f(self.sup),
            pt(&a.z1),
            pt(&a.z2),
            a.lambda.lambda().to_string(),
            self.samples.to_string(),
            self.skipped.to_string(),
            self.counterexample_count.to_string(),
            self.passed.to_string(),
        ]];
        if verbose {
            let g = &self.grid_argmax;
            out.push(vec![
                "grid_sup".into(),
                f(self.grid_sup),
                pt(&g.z1),
                pt(&g.z2),
                g.lambda.lambda().to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
            for c in &self.counterexamples {
                out.push(vec![
                    "counterexample".into(),
                    f(c.value),
                    pt(&c.z[0]),
                    pt(&c.z[1]),
                    c.lambda.lambda().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
        out
    }
}

impl CsvTable for DiagonalReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["im_lambda", "max_mu2", "max_slope"]
    }

    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        self.levels.iter().map(|l| vec![f(l.im_lambda), f(l.max_mu2), f(l.max_slope)]).collect()
    }
}

impl CsvTable for Mu3ScanReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["im_floor", "sup", "margin", "top_spread_mean", "evaluated", "skipped", "counterexamples"]
    }

    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        self.levels
            .iter()
            .map(|l| {
                vec![
                    f(l.im_floor),
                    f(l.sup),
                    f(l.margin),
                    f(l.top_spread_mean),
                    l.evaluated.to_string(),
                    l.skipped.to_string(),
                    l.counterexample_count.to_string(),
                ]
            })
            .collect()
    }
}

impl CsvTable for LimitReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["t", "value"]
    }

    /// The tail; the extrapolated limit is the row with `t = 0`.
    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self.tail.iter().map(|(t, v)| vec![f(*t), f(*v)]).collect();
        out.push(vec![f(0.0), f(self.limit)]);
        out
    }
}

impl CsvTable for EnvelopeReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "c_est", "max_ratio_n", "max_ratio_2n", "relative_change", "q_zero_max_ratio", "per_term_violations"]
    }

    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        vec![vec![
            self.n.to_string(),
            f(self.c_est),
            f(self.max_ratio_n),
            f(self.max_ratio_2n),
            f(self.relative_change),
            f(self.q_zero_max_ratio),
            self.per_term_violations.to_string(),
        ]]
    }
}

impl CsvTable for ProbeReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["isometry_max", "convexity_min_gap", "strict_min_gap", "cosh_max", "cd_max", "passed"]
    }

    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        vec![vec![
            f(self.isometry_max),
            f(self.convexity_min_gap),
            f(self.strict_min_gap),
            f(self.cosh_max),
            f(self.cd_max),
            self.passed.to_string(),
        ]]
    }
}

impl CsvTable for MomentSeries {
    fn header(&self) -> Vec<&'static str> {
        vec!["generation", "mean_cdp", "max_cd", "mean_dist", "max_dist"]
    }

    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        self.stats
            .iter()
            .map(|s| vec![s.generation.to_string(), f(s.mean_cdp), f(s.max_cd), f(s.mean_dist), f(s.max_dist)])
            .collect()
    }
}

impl CsvTable for Vec<ProfileRow> {
    fn header(&self) -> Vec<&'static str> {
        vec!["energy", "eta", "re_z_lambda", "im_z_lambda", "band_limit"]
    }

    fn rows(&self, _verbose: bool) -> Vec<Vec<String>> {
        self.iter().map(|r| vec![f(r.energy), f(r.eta), f(r.re_z_lambda), f(r.im_z_lambda), f(r.band_limit)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{convexity_isometry_probe, Jobs};

    #[test]
    fn envelope_carries_the_schema() {
        let r = convexity_isometry_probe(10, 1, Jobs(1));
        let cfg = serde_json::json!({"n": 10});
        let json = Report::new("probe", r.passed, &cfg, &r).to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["kind"], "probe");
        assert_eq!(v["result"]["n"], 10);
    }

    #[test]
    fn csv_has_a_header_row() {
        let r = convexity_isometry_probe(10, 1, Jobs(1));
        let csv = r.to_csv(false).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("isometry_max,"));
        assert_eq!(lines.count(), 1);
    }
}
