use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All numerical tolerances in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub geom: f64,
    pub conv: f64,
    pub psd: f64,
    pub ineq: f64,
    pub meas: f64,
    pub cmp: f64,
    pub bc: f64,
    pub solve: f64,
    pub lin: f64,
    pub abs: f64,
    pub fp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            geom: 1e-12,
            conv: 1e-10,
            psd: 1e-12,
            ineq: 1e-9,
            meas: 1e-6,
            cmp: 1e-8,
            bc: 1e-10,
            solve: 1e-6,
            lin: 1e-10,
            abs: 1e-14,
            fp: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {name}={value}")));
        }
        let slot = match name {
            "geom" => &mut self.geom,
            "conv" => &mut self.conv,
            "psd" => &mut self.psd,
            "ineq" => &mut self.ineq,
            "meas" => &mut self.meas,
            "cmp" => &mut self.cmp,
            "bc" => &mut self.bc,
            "solve" => &mut self.solve,
            "lin" => &mut self.lin,
            "abs" => &mut self.abs,
            "fp" => &mut self.fp,
            _ => return Err(Error::InvalidArgument(format!("unknown tolerance {name}"))),
        };
        *slot = value;
        Ok(())
    }
}
