//! CSV and JSON emission.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use gkp_core::{Field, SweepReport};
use serde::Serialize;

pub const SWEEP_HEADER: &str = "eps,c_eps,qx,qy,V_at_eps_q,residual,iters";

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            float(r.eps),
            float(r.c_eps),
            float(r.qx),
            float(r.qy),
            float(r.v_at_eps_q),
            float(r.residual),
            r.iterations
        );
    }
    out
}

/// One `x,y,u` line per node, y outer.
pub fn field_csv(field: &Field) -> String {
    let g = field.grid();
    let mut out = String::from("x,y,u\n");
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let _ = writeln!(out, "{},{},{}", float(g.x(i)), float(g.y(j)), float(field.at(i, j)));
        }
    }
    out
}

pub fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gkp_core::SweepRow;

    #[test]
    fn floats_roundtrip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn sweep_layout() {
        let report = SweepReport {
            rows: vec![SweepRow {
                eps: 0.5,
                c_eps: 6.25,
                qx: 0.0,
                qy: -0.25,
                v_at_eps_q: 2.0,
                residual: 1e-11,
                nehari_residual: 0.0,
                iterations: 42,
                below_c_inf: true,
                interior: true,
                peak: None,
            }],
            ..SweepReport::default()
        };
        let csv = sweep_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[1].parse::<f64>().unwrap(), 6.25);
        assert_eq!(fields[6], "42");
        assert_eq!(lines.next(), None);
    }
}
