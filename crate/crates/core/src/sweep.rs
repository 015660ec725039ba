//! Distance sweeps and their CSV form.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{QkdPerformance, Scenario};

pub const CSV_HEADER: &str = "length_km,total_loss_db,eta,y0,q_mu,qber,raw_bps,sifted_bps,ec_corrected_bps,secret_bps";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub start_km: f64,
    pub stop_km: f64,
    pub step_km: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { start_km: 0.0, stop_km: 15.0, step_km: 0.5 }
    }
}

impl SweepSpec {
    pub fn new(start_km: f64, stop_km: f64, step_km: f64) -> Result<Self> {
        let spec = Self { start_km, stop_km, step_km };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_km >= 0.0) {
            return Err(Error::Domain { what: "sweep start (km)", value: self.start_km });
        }
        if !(self.stop_km >= self.start_km) {
            return Err(Error::Domain { what: "sweep stop (km)", value: self.stop_km });
        }
        if !(self.step_km > 0.0) {
            return Err(Error::Domain { what: "sweep step (km)", value: self.step_km });
        }
        Ok(())
    }

    /// Sample lengths, computed as `start + k * step` so they do not drift.
    pub fn lengths(&self) -> Vec<f64> {
        let n = ((self.stop_km - self.start_km) / self.step_km + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start_km + k as f64 * self.step_km).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub length_km: f64,
    pub total_loss_db: f64,
    pub eta: f64,
    pub y0: f64,
    pub q_mu: f64,
    pub qber: f64,
    pub raw_bps: f64,
    pub sifted_bps: f64,
    pub ec_corrected_bps: f64,
    pub secret_bps: f64,
}

impl From<&QkdPerformance> for SweepRecord {
    fn from(p: &QkdPerformance) -> Self {
        Self {
            length_km: p.length_km,
            total_loss_db: p.loss_db,
            eta: p.eta,
            y0: p.noise.total_y0,
            q_mu: p.yield_gain.q_mu,
            qber: p.yield_gain.e_mu,
            raw_bps: p.rates.raw_bps,
            sifted_bps: p.rates.sifted_bps,
            ec_corrected_bps: p.rates.ec_corrected_bps,
            secret_bps: p.rates.secret_bps,
        }
    }
}

/// Evaluates every length of the sweep, in ascending order. Unless `strict`,
/// a point whose decoy bound collapses is kept with zero secret rate.
pub fn run_sweep(scenario: &Scenario, spec: &SweepSpec, strict: bool) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    spec.lengths()
        .par_iter()
        .map(|&km| {
            let perf = if strict { scenario.evaluate_link(km) } else { scenario.evaluate_link_lenient(km) };
            perf.map(|p| SweepRecord::from(&p))
        })
        .collect()
}

/// Writes records as CSV; floats use the shortest representation that
/// parses back to the same value.
pub fn write_csv<W: Write>(records: &[SweepRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("unexpected sweep header `{header}`") });
    }
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

/// Bits encrypted under each key when `total_bps` of traffic is rekeyed from
/// a `key_rate_bps` key stream in keys of `key_len_bits`.
pub fn aes_rekey(total_bps: f64, key_rate_bps: f64, key_len_bits: f64) -> Result<f64> {
    for (what, v) in [("total rate (bps)", total_bps), ("key rate (bps)", key_rate_bps), ("key length (bits)", key_len_bits)] {
        if !(v > 0.0) {
            return Err(Error::Domain { what, value: v });
        }
    }
    Ok(total_bps / (key_rate_bps / key_len_bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ScenarioKind, ScenarioSettings};
    use proptest::prelude::*;

    #[test]
    fn lengths_inclusive() {
        assert_eq!(SweepSpec::new(0.0, 10.0, 0.5).unwrap().lengths().len(), 21);
        assert_eq!(SweepSpec::new(3.0, 3.0, 0.5).unwrap().lengths(), vec![3.0]);
        assert_eq!(SweepSpec::new(0.0, 1.0, 0.3).unwrap().lengths().len(), 4);
        assert!(SweepSpec::new(2.0, 1.0, 0.5).is_err());
        assert!(SweepSpec::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn sweep_is_ordered() {
        let s = ScenarioSettings::defaults(ScenarioKind::Backbone).build().unwrap();
        let recs = run_sweep(&s, &SweepSpec::new(0.0, 5.0, 0.25).unwrap(), false).unwrap();
        assert_eq!(recs.len(), 21);
        assert!(recs.windows(2).all(|w| w[0].length_km < w[1].length_km));
    }

    #[test]
    fn csv_header_exact() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
        let s = ScenarioSettings::defaults(ScenarioKind::Gpon).build().unwrap();
        let recs = run_sweep(&s, &SweepSpec::new(0.0, 1.0, 0.5).unwrap(), false).unwrap();
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn rekey_values() {
        assert_eq!(aes_rekey(160.0 * 2.4e9, 1000.0, 256.0).unwrap(), 9.8304e10);
        assert_eq!(aes_rekey(7.0, 7.0, 1.0).unwrap(), 1.0);
        assert!((aes_rekey(2.4e9, 100.0, 256.0).unwrap() - 6.144e9).abs() < 1.0);
        assert!(aes_rekey(0.0, 1.0, 1.0).is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e12..1e12f64, -1e-12..1e-12f64, Just(0.0)]
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::array::uniform10(finite()), 0..8)) {
            let recs: Vec<SweepRecord> = rows.iter().map(|v| SweepRecord {
                length_km: v[0], total_loss_db: v[1], eta: v[2], y0: v[3], q_mu: v[4], qber: v[5],
                raw_bps: v[6], sifted_bps: v[7], ec_corrected_bps: v[8], secret_bps: v[9],
            }).collect();
            let mut buf = Vec::new();
            write_csv(&recs, &mut buf).unwrap();
            prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), recs);
        }

        #[test]
        fn rekey_homogeneous(total in 1.0..1e12f64, rate in 1.0..1e6f64, scale in 1e-3..1e3f64) {
            let a = aes_rekey(total, rate, 256.0).unwrap();
            let b = aes_rekey(total * scale, rate * scale, 256.0).unwrap();
            prop_assert!(((a - b) / a).abs() < 1e-14);
        }
    }
}
