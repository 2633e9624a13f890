//! Sampled coherence-vector trajectories and their text file format.
//!
//! A file holds `key=value` header lines, one column header line
//! `step,v_1,…,v_{d²}`, then one CSV row per snapshot with every value
//! written to 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::many_body::{ModelVariant, SpinChainModel};
use crate::spin_algebra::{CoherenceVector, CONVENTION_ID};
use crate::{Error, RVector, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    SpinChain(SpinChainModel),
    /// Produced by a parametrized generator; the label names its source.
    Generator { label: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    provenance: Provenance,
    d: usize,
    dt: f64,
    seed: u64,
    snapshots: Vec<CoherenceVector>,
}

impl Trajectory {
    pub fn new(provenance: Provenance, d: usize, dt: f64, snapshots: Vec<CoherenceVector>, seed: u64) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::invalid("trajectory has no snapshots"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        for s in &snapshots {
            if s.len() != d * d {
                return Err(Error::ShapeMismatch { expected: format!("{} components", d * d), got: s.len().to_string() });
            }
        }
        Ok(Trajectory { provenance, d, dt, seed, snapshots })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn snapshots(&self) -> &[CoherenceVector] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn vector(&self, k: usize) -> &RVector {
        self.snapshots[k].as_vector()
    }

    /// Component `i` over time.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.as_slice()[i]).collect()
    }

    /// First `len` snapshots.
    pub fn truncated(&self, len: usize) -> Result<Trajectory> {
        if len == 0 || len > self.len() {
            return Err(Error::invalid(format!("cannot keep {len} of {} snapshots", self.len())));
        }
        Trajectory::new(self.provenance.clone(), self.d, self.dt, self.snapshots[..len].to_vec(), self.seed)
    }

    /// Sub-trajectory keeping every `stride`-th snapshot.
    pub fn decimate(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        let snaps = self.snapshots.iter().step_by(stride).cloned().collect();
        Trajectory::new(self.provenance.clone(), self.d, self.dt * stride as f64, snaps, self.seed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        match &self.provenance {
            Provenance::SpinChain(m) => {
                kv("variant", m.variant.name().to_string());
                kv("N", m.n.to_string());
                kv("Omega", fmt_f(m.omega));
                kv("V", fmt_f(m.v));
                kv("V_prime", fmt_f(m.v_prime));
                kv("alpha", fmt_f(m.alpha));
                kv("beta", fmt_f(m.beta));
                kv("subsystem_sites", format!("{},{}", m.subsystem_sites.0, m.subsystem_sites.1));
            }
            Provenance::Generator { label } => {
                kv("variant", "generator".to_string());
                kv("generator", label.clone());
            }
        }
        kv("d", self.d.to_string());
        kv("dt", fmt_f(self.dt));
        kv("n_steps", self.n_steps().to_string());
        kv("seed", self.seed.to_string());
        kv("convention_id", CONVENTION_ID.to_string());
        s.push_str("step");
        for i in 1..=self.d * self.d {
            let _ = write!(s, ",v_{i}");
        }
        s.push('\n');
        for (k, v) in self.snapshots.iter().enumerate() {
            let _ = write!(s, "{k}");
            for x in v.as_slice() {
                let _ = write!(s, ",{}", fmt_f(*x));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Trajectory> {
        let ctx = "trajectory";
        let mut header = std::collections::HashMap::new();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with("step") {
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(ctx, format!("bad header line `{line}`")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| header.get(k).ok_or_else(|| Error::parse(ctx, format!("missing header `{k}`")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse::<f64>().map_err(|e| Error::parse(ctx, format!("{k}: {e}"))) };
        let int = |k: &str| -> Result<usize> { get(k)?.parse::<usize>().map_err(|e| Error::parse(ctx, format!("{k}: {e}"))) };

        let conv = get("convention_id")?;
        if conv != CONVENTION_ID {
            return Err(Error::parse(ctx, format!("basis convention `{conv}` differs from `{CONVENTION_ID}`")));
        }
        let d = int("d")?;
        let dt = num("dt")?;
        let n_steps = int("n_steps")?;
        let seed = get("seed")?.parse::<u64>().map_err(|e| Error::parse(ctx, format!("seed: {e}")))?;
        let variant = get("variant")?;
        let provenance = if variant == "generator" {
            Provenance::Generator { label: get("generator").cloned().unwrap_or_default() }
        } else {
            let variant: ModelVariant = variant.parse()?;
            let sites = get("subsystem_sites")?;
            let (a, b) = sites.split_once(',').ok_or_else(|| Error::parse(ctx, "subsystem_sites"))?;
            let p = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::parse(ctx, format!("subsystem_sites: {e}")));
            Provenance::SpinChain(SpinChainModel {
                variant,
                n: int("N")?,
                omega: num("Omega")?,
                v: num("V")?,
                v_prime: num("V_prime")?,
                alpha: num("alpha")?,
                beta: num("beta")?,
                subsystem_sites: (p(a)?, p(b)?),
            })
        };

        let mut snaps = Vec::with_capacity(n_steps + 1);
        for (row, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let step: usize = fields
                .next()
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| Error::parse(ctx, format!("row {row}: bad step")))?;
            if step != snaps.len() {
                return Err(Error::parse(ctx, format!("row {row}: step {step} out of order")));
            }
            let vals: Vec<f64> = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(ctx, format!("row {row}: {e}")))?;
            snaps.push(CoherenceVector::from_full(RVector::from_vec(vals), d)?);
        }
        if snaps.len() != n_steps + 1 {
            return Err(Error::parse(ctx, format!("expected {} rows, found {}", n_steps + 1, snaps.len())));
        }
        Trajectory::new(provenance, d, dt, snaps, seed)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Trajectory> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Trajectory::from_text(&text)
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_algebra::build_pauli_basis;

    fn sample() -> Trajectory {
        let basis = build_pauli_basis(2).unwrap();
        let snaps = (0..5)
            .map(|k| {
                let c: Vec<f64> = (0..15).map(|i| ((k * 15 + i) as f64 * 0.37).sin() / 3.0).collect();
                CoherenceVector::from_traceless(&c, &basis).unwrap()
            })
            .collect();
        let m = SpinChainModel::model_i(7, 1.0, 1.0, 0.25, 0.0).unwrap();
        Trajectory::new(Provenance::SpinChain(m), 4, 0.1, snaps, 17).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = sample();
        let back = Trajectory::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        let g = Trajectory::new(Provenance::Generator { label: "m.json".into() }, 4, 0.1, t.snapshots().to_vec(), 3).unwrap();
        assert_eq!(Trajectory::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn rejects_foreign_convention_and_short_files() {
        let t = sample().to_text();
        let bad = t.replace(CONVENTION_ID, "other");
        assert!(Trajectory::from_text(&bad).is_err());
        let truncated: String = t.lines().take(t.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(Trajectory::from_text(&truncated).is_err());
    }

    #[test]
    fn decimation_scales_dt() {
        let t = sample();
        let d = t.decimate(2).unwrap();
        assert_eq!(d.len(), 3);
        assert!((d.dt() - 0.2).abs() < 1e-15);
        assert_eq!(d.vector(1), t.vector(2));
    }
}
