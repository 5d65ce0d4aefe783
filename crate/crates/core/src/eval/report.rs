//! Report tables and their CSV forms.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub rate_hz: f64,
    pub estimator: String,
    /// `None` when the estimator cannot produce that rate.
    pub rms_rel_error: Option<f64>,
}

impl ReportRow {
    pub fn accuracy(&self) -> Option<f64> {
        self.rms_rel_error.map(|e| 1.0 - e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl ErrorReport {
    /// Error of `estimator` at `rate_hz`; `None` if absent or unsupported.
    pub fn error(&self, rate_hz: f64, estimator: &str) -> Option<f64> {
        self.row(rate_hz, estimator).and_then(|r| r.rms_rel_error)
    }

    pub fn row(&self, rate_hz: f64, estimator: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && (r.rate_hz - rate_hz).abs() <= 1e-12 * rate_hz)
    }

    pub fn estimators(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.estimator.as_str()) {
                out.push(&r.estimator);
            }
        }
        out
    }

    pub fn rates(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.rate_hz) {
                out.push(r.rate_hz);
            }
        }
        out
    }

    /// Writes `rate_hz,estimator,rms_rel_error,accuracy`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rate_hz,estimator,rms_rel_error,accuracy")?;
        for r in &self.rows {
            match r.rms_rel_error {
                Some(e) => writeln!(out, "{},{},{},{}", r.rate_hz, r.estimator, e, 1.0 - e)?,
                None => writeln!(out, "{},{},unsupported,unsupported", r.rate_hz, r.estimator)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationRow {
    /// End of the monitoring window.
    pub t_s: f64,
    pub window_error: f64,
    pub rebuild: bool,
}

/// Writes `t_s,window_error,rebuild_flag`.
pub fn write_adaptation_csv<W: Write>(rows: &[AdaptationRow], mut out: W) -> Result<()> {
    writeln!(out, "t_s,window_error,rebuild_flag")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.t_s, r.window_error, r.rebuild as u8)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_marks_unsupported() {
        let rep = ErrorReport {
            scenario: "s".into(),
            seed: 0,
            rows: vec![
                ReportRow {
                    rate_hz: 0.5,
                    estimator: "interface".into(),
                    rms_rel_error: Some(0.25),
                },
                ReportRow {
                    rate_hz: 4.0,
                    estimator: "interface".into(),
                    rms_rel_error: None,
                },
            ],
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rate_hz,estimator,rms_rel_error,accuracy\n0.5,interface,0.25,0.75\n4,interface,unsupported,unsupported\n"
        );
        assert_eq!(rep.error(0.5, "interface"), Some(0.25));
        assert_eq!(rep.error(4.0, "interface"), None);
        assert_eq!(rep.rates(), vec![0.5, 4.0]);
    }

    #[test]
    fn adaptation_csv() {
        let mut buf = Vec::new();
        write_adaptation_csv(
            &[AdaptationRow {
                t_s: 100.0,
                window_error: 0.05,
                rebuild: true,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t_s,window_error,rebuild_flag\n100,0.05,1\n"
        );
    }
}
