//! JSON persistence of learned generators.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{assemble_generator, precompute_dissipator_tensors, GeneratorParams};
use crate::spin_algebra::{build_pauli_basis, BasisSet, CONVENTION_ID};
use crate::{Error, RMatrix, RVector, Result};

/// On-disk model. `c_real`, `c_imag` and `eigenvalues` are regenerated on
/// save and ignored on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub convention_id: String,
    pub d: usize,
    pub dt: f64,
    pub omega: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    #[serde(default)]
    pub c_real: Vec<Vec<f64>>,
    #[serde(default)]
    pub c_imag: Vec<Vec<f64>>,
    /// `[re, im]` pairs.
    #[serde(default)]
    pub eigenvalues: Vec<[f64; 2]>,
}

fn rows(m: &RMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<RMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::parse("model file", format!("{what} must be {n}x{n}")));
    }
    Ok(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl LearnedModel {
    pub fn from_params(params: &GeneratorParams, d: usize, dt: f64) -> Result<Self> {
        let mut m = LearnedModel {
            convention_id: CONVENTION_ID.to_string(),
            d,
            dt,
            omega: params.omega.iter().copied().collect(),
            x: rows(&params.x),
            y: rows(&params.y),
            c_real: Vec::new(),
            c_imag: Vec::new(),
            eigenvalues: Vec::new(),
        };
        m.refresh_derived()?;
        Ok(m)
    }

    pub fn basis(&self) -> Result<BasisSet> {
        if !self.d.is_power_of_two() || self.d < 2 {
            return Err(Error::parse("model file", format!("d = {} is not a qubit dimension", self.d)));
        }
        build_pauli_basis(self.d.trailing_zeros() as usize)
    }

    pub fn params(&self) -> Result<GeneratorParams> {
        if self.convention_id != CONVENTION_ID {
            return Err(Error::parse("model file", format!("basis convention `{}` differs from `{CONVENTION_ID}`", self.convention_id)));
        }
        let n = self.d * self.d - 1;
        if self.omega.len() != n {
            return Err(Error::parse("model file", format!("omega must have {n} entries")));
        }
        let p = GeneratorParams {
            omega: RVector::from_column_slice(&self.omega),
            x: from_rows(&self.x, n, "x")?,
            y: from_rows(&self.y, n, "y")?,
        };
        p.validate()?;
        Ok(p)
    }

    fn refresh_derived(&mut self) -> Result<()> {
        let p = self.params()?;
        let basis = self.basis()?;
        let c = p.kossakowski();
        self.c_real = rows(&c.real());
        self.c_imag = rows(&c.imag());
        let g = assemble_generator(&p, &basis, &precompute_dissipator_tensors(&basis))?;
        let mut ev: Vec<[f64; 2]> = g.l.complex_eigenvalues().iter().map(|z| [z.re, z.im]).collect();
        ev.sort_by(|a, b| b[0].total_cmp(&a[0]).then(a[1].total_cmp(&b[1])));
        self.eigenvalues = ev;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: LearnedModel = serde_json::from_str(text)?;
        m.params()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut m = self.clone();
        m.refresh_derived()?;
        std::fs::write(path, m.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
