//! Trajectory output: sampled observable rows, energy tracking, and the
//! CSV / JSON serializations shared by the continuous-time and
//! discrete-component runners.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Which spin definition a campaign scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutMode {
    /// sgn of the mean amplitude (model-internal observable).
    Mean,
    /// sgn of the latest inferred measurement value.
    Measured,
    /// Homodyne readout of the fully extracted pulse, with the skew-dependent
    /// sampling formula (discrete-component models only).
    Direct,
    /// Same extraction readout but sampled from a plain Gaussian.
    DirectGaussian,
}

/// When trajectory energies are evaluated against the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyCheck {
    FinalOnly,
    EveryStep,
}

/// What a trajectory run should retain.
#[derive(Clone, Copy, Debug)]
pub struct RecordSpec {
    /// Keep full observable rows every `stride` steps (None: keep none).
    pub stride: Option<usize>,
    /// Ground-state energy to score against, when known.
    pub e0: Option<f64>,
    pub energy_check: EnergyCheck,
    pub readout: ReadoutMode,
}

impl RecordSpec {
    pub fn success_only(e0: f64, energy_check: EnergyCheck, readout: ReadoutMode) -> Self {
        Self {
            stride: None,
            e0: Some(e0),
            energy_check,
            readout,
        }
    }

    pub fn full(stride: usize, readout: ReadoutMode) -> Self {
        Self {
            stride: Some(stride),
            e0: None,
            energy_check: EnergyCheck::EveryStep,
            readout,
        }
    }
}

/// One sampled step of per-site observables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub t: f64,
    pub mu: Vec<f64>,
    pub var_x: Vec<f64>,
    pub var_p: Vec<f64>,
    pub skew_self: Vec<f64>,
    pub skew_cross: Vec<f64>,
    pub e: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub energy: f64,
}

/// Everything a single trajectory reports back.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<SnapshotRow>,
    /// Readout energy per checked step (empty in final-only mode).
    pub energies: Vec<f64>,
    pub energy_ts: Vec<f64>,
    pub final_energy: f64,
    pub final_spins_mean: Vec<i8>,
    pub final_spins_measured: Vec<i8>,
    /// Spins from the full-extraction readout, when the model provides one.
    pub final_spins_direct: Option<Vec<i8>>,
    pub final_spins_direct_gaussian: Option<Vec<i8>>,
    pub min_energy: f64,
    pub min_energy_t: f64,
    /// First time the readout energy reached `e0`, when scoring was requested.
    pub first_hit_t: Option<f64>,
    /// First step index (1-based round trip count) of the hit.
    pub first_hit_step: Option<u64>,
    pub success: Option<bool>,
    /// Mean photon number per site at the final step.
    pub photon_final: f64,
    /// Mean photon number per site averaged over all steps.
    pub photon_time_avg: f64,
    /// Times the measurement square-root argument was clamped at zero.
    pub clamp_events: u64,
    /// Sign-adjusted skew diagnostics at the final step, averaged over sites:
    /// (3 S + C weighted sum, S alone).
    pub skew_weight_final: Option<(f64, f64)>,
    pub steps: u64,
}

impl TrajectoryRecord {
    /// CSV dump: one row per sampled step with per-site columns.
    pub fn to_csv(&self) -> String {
        let n = self.rows.first().map_or(0, |r| r.mu.len());
        let mut out = String::new();
        out.push('t');
        for name in ["mu", "vX", "vP", "skS", "skC", "e", "mu_tilde"] {
            for i in 0..n {
                let _ = write!(out, ",{name}_{i}");
            }
        }
        out.push_str(",energy\n");
        for row in &self.rows {
            let _ = write!(out, "{:.12e}", row.t);
            for group in [
                &row.mu,
                &row.var_x,
                &row.var_p,
                &row.skew_self,
                &row.skew_cross,
                &row.e,
                &row.mu_tilde,
            ] {
                for v in group.iter() {
                    let _ = write!(out, ",{v:.12e}");
                }
            }
            let _ = writeln!(out, ",{:.12e}", row.energy);
        }
        out
    }

    /// Compact JSON summary (final spins, success flags, minimum-energy time).
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "final_energy": self.final_energy,
            "final_spins_mean": self.final_spins_mean,
            "final_spins_measured": self.final_spins_measured,
            "final_spins_direct": self.final_spins_direct,
            "success": self.success,
            "min_energy": self.min_energy,
            "min_energy_t": self.min_energy_t,
            "first_hit_t": self.first_hit_t,
            "photon_final": self.photon_final,
            "clamp_events": self.clamp_events,
        })
    }
}

/// Incremental energy bookkeeping shared by the trajectory runners.
#[derive(Debug)]
pub struct EnergyTracker {
    pub min_energy: f64,
    pub min_energy_t: f64,
    pub first_hit_t: Option<f64>,
    pub first_hit_step: Option<u64>,
    pub energies: Vec<f64>,
    pub energy_ts: Vec<f64>,
    keep_series: bool,
    e0: Option<f64>,
}

impl EnergyTracker {
    pub fn new(e0: Option<f64>, keep_series: bool) -> Self {
        Self {
            min_energy: f64::INFINITY,
            min_energy_t: 0.0,
            first_hit_t: None,
            first_hit_step: None,
            energies: Vec::new(),
            energy_ts: Vec::new(),
            keep_series,
            e0,
        }
    }

    pub fn observe(&mut self, step: u64, t: f64, energy: f64) {
        if self.keep_series {
            self.energies.push(energy);
            self.energy_ts.push(t);
        }
        if energy < self.min_energy {
            self.min_energy = energy;
            self.min_energy_t = t;
        }
        if self.first_hit_t.is_none() {
            if let Some(e0) = self.e0 {
                if energy <= e0 + 1e-9 {
                    self.first_hit_t = Some(t);
                    self.first_hit_step = Some(step);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracker_finds_first_hit() {
        let mut tr = EnergyTracker::new(Some(-2.0), true);
        tr.observe(1, 0.1, -1.0);
        tr.observe(2, 0.2, -2.0);
        tr.observe(3, 0.3, -1.5);
        assert_eq!(tr.first_hit_t, Some(0.2));
        assert_eq!(tr.first_hit_step, Some(2));
        assert_eq!(tr.min_energy, -2.0);
        assert_eq!(tr.min_energy_t, 0.2);
        assert_eq!(tr.energies.len(), 3);
    }

    #[test]
    fn csv_shape() {
        let rec = TrajectoryRecord {
            rows: vec![SnapshotRow {
                t: 0.0,
                mu: vec![0.0, 1.0],
                var_x: vec![0.5, 0.5],
                var_p: vec![0.5, 0.5],
                skew_self: vec![0.0, 0.0],
                skew_cross: vec![0.0, 0.0],
                e: vec![0.4, 0.4],
                mu_tilde: vec![0.0, 0.0],
                energy: -1.0,
            }],
            ..TrajectoryRecord::default()
        };
        let csv = rec.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 1 + 7 * 2 + 1);
        assert_eq!(lines.next().unwrap().split(',').count(), 16);
    }
}
