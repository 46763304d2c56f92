use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{Protocol, TargetMode};
use crate::geom::Rmse;

/// Published result for a physical sensor, printed for orientation only.
pub const HARDWARE_REFERENCE_BEFORE: Rmse = Rmse {
    x: 5.7,
    y: 3.7,
    z: 16.0,
};
pub const HARDWARE_REFERENCE_AFTER: Rmse = Rmse {
    x: 0.7,
    y: 0.5,
    z: 2.2,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureScore {
    pub position: f64,
    pub temperature: f64,
    pub pixels: u64,
    pub before: Rmse,
    pub after: Rmse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareReference {
    pub note: String,
    pub before: Rmse,
    pub after: Rmse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub target_mode: TargetMode,
    pub t_min: f64,
    pub n_train: usize,
    pub eval_temperatures: Vec<f64>,
    pub pixels: u64,
    /// Pooled over every scored capture.
    pub before: Rmse,
    pub after: Rmse,
    pub captures: Vec<CaptureScore>,
    pub hardware_reference: HardwareReference,
}

impl EvalReport {
    pub fn hardware_reference() -> HardwareReference {
        HardwareReference {
            note: "published physical-sensor result; not produced by this run".into(),
            before: HARDWARE_REFERENCE_BEFORE,
            after: HARDWARE_REFERENCE_AFTER,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let protocol = match self.protocol {
            Protocol::Holdout => "held-out temperatures",
            Protocol::Paper => "all temperatures (in-sample)",
        };
        let _ = writeln!(s, "protocol: {protocol}");
        let _ = writeln!(
            s,
            "target:   {:?}, reference {} C",
            self.target_mode, self.t_min
        );
        let _ = writeln!(
            s,
            "scored:   {} captures, {} pixels, model N = {}",
            self.captures.len(),
            self.pixels,
            self.n_train
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "RMSE (mm)            x        y        z");
        let row = |s: &mut String, label: &str, r: &Rmse| {
            let _ = writeln!(s, "{label:<16}{:>9.3}{:>9.3}{:>9.3}", r.x, r.y, r.z);
        };
        row(&mut s, "before", &self.before);
        row(&mut s, "after", &self.after);
        let _ = writeln!(s);
        let _ = writeln!(s, "per capture (z, mm):");
        for c in &self.captures {
            let _ = writeln!(
                s,
                "  p = {:.3} m  t = {:>5.1} C  {:>8.3} -> {:>7.3}",
                c.position, c.temperature, c.before.z, c.after.z
            );
        }
        let _ = writeln!(s);
        let h = &self.hardware_reference;
        let _ = writeln!(s, "hardware reference ({}):", h.note);
        row(&mut s, "  before", &h.before);
        row(&mut s, "  after", &h.after);
        s
    }
}
