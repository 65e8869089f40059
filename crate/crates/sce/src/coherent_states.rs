//! Canonical and spin coherent-state labels.
//!
//! Canonical labels are `z = (q/b + i p/c)/sqrt(2)`, spin labels the
//! stereographic projection `s = cot(theta/2) (cos phi - i sin phi)` taken
//! from the north pole, so `s = 0` is the lowest-weight state.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::{cpowi, two_j, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalLabel {
    pub z: C64,
    pub b: f64,
    pub c: f64,
}

impl CanonicalLabel {
    /// Builds a label with scales fixed by `b c = hbar`.
    pub fn new(z: C64, b: f64, hbar: f64) -> Result<Self> {
        if !(b > 0.0) || !(hbar > 0.0) {
            return Err(Error::InvalidParameter("scales must be positive".into()));
        }
        Ok(CanonicalLabel { z, b, c: hbar / b })
    }

    pub fn from_phase_space(q: f64, p: f64, b: f64, c: f64) -> Result<Self> {
        Ok(CanonicalLabel { z: label_from_phase_space(q, p, b, c)?, b, c })
    }

    pub fn expectations(&self) -> (f64, f64, f64, f64) {
        expectations(self.z, self.b, self.c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinLabel {
    pub s: C64,
    pub j: f64,
}

impl SpinLabel {
    pub fn new(s: C64, j: f64) -> Result<Self> {
        two_j(j)?;
        Ok(SpinLabel { s, j })
    }

    pub fn from_angles(theta: f64, phi: f64, j: f64) -> Result<Self> {
        SpinLabel::new(label_from_angles(theta, phi)?, j)
    }

    /// Inverse projection back to `(theta, phi)` with `phi` in `[0, 2 pi)`.
    pub fn angles(&self) -> (f64, f64) {
        let r = self.s.norm();
        let theta = 2.0 * (1.0 / r).atan();
        let phi = (-self.s.arg()).rem_euclid(2.0 * std::f64::consts::PI);
        (theta, phi)
    }
}

pub fn canonical_overlap(zb: C64, zk: C64) -> C64 {
    (-0.5 * zb.norm_sqr() - 0.5 * zk.norm_sqr() + zb.conj() * zk).exp()
}

/// Spin overlap with an exact integer power, so no logarithm branch enters.
pub fn spin_overlap(sb: C64, sk: C64, j: f64) -> Result<C64> {
    let n = two_j(j)?;
    let norm = ((1.0 + sb.norm_sqr()) * (1.0 + sk.norm_sqr())).powf(-j);
    Ok(cpowi(1.0 + sb.conj() * sk, n) * norm)
}

pub fn label_from_phase_space(q: f64, p: f64, b: f64, c: f64) -> Result<C64> {
    if !(b > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter("scales must be positive".into()));
    }
    Ok(C64::new(q / b, p / c) / SQRT_2)
}

pub fn label_from_angles(theta: f64, phi: f64) -> Result<C64> {
    if theta == 0.0 {
        return Err(Error::Pole("theta = 0 projects to infinity".into()));
    }
    if !(theta > 0.0 && theta <= std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside (0, pi]")));
    }
    let cot = (0.5 * theta).cos() / (0.5 * theta).sin();
    Ok(C64::new(phi.cos(), -phi.sin()) * cot)
}

/// Returns `(q, p, var q, var p)`.
pub fn expectations(z: C64, b: f64, c: f64) -> (f64, f64, f64, f64) {
    (SQRT_2 * b * z.re, SQRT_2 * c * z.im, 0.5 * b * b, 0.5 * c * c)
}

/// Unit vector `n` of a spin label.
pub fn bloch_vector(s: C64) -> [f64; 3] {
    let r2 = s.norm_sqr();
    let d = 1.0 + r2;
    // phi runs clockwise in the s plane
    [2.0 * s.re / d, -2.0 * s.im / d, (r2 - 1.0) / d]
}

/// Returns `(Jx, Jy, Jz, var Jx, var Jy, var Jz)`.
pub fn spin_expectations(s: C64, j: f64) -> Result<[f64; 6]> {
    two_j(j)?;
    let n = bloch_vector(s);
    Ok([
        j * n[0],
        j * n[1],
        j * n[2],
        0.5 * j * (1.0 - n[0] * n[0]),
        0.5 * j * (1.0 - n[1] * n[1]),
        0.5 * j * (1.0 - n[2] * n[2]),
    ])
}
