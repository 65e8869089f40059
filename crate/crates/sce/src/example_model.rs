//! The integrable example `H = (hbar/j) lambda a^dagger a J_z`, with its
//! closed-form trajectories and tangent matrix.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::classical_dynamics::{HamiltonianModel, PhaseState};
use crate::linalg::M4;
use crate::{two_j, Error, Result, C64, I};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    pub lambda: f64,
    pub j: f64,
    pub z0: C64,
    pub s0: C64,
    pub hbar: f64,
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams {
            lambda: 1.0,
            j: 5.0,
            z0: C64::new(1.0, 0.0),
            s0: C64::new(1.0, 0.0),
            hbar: 1.0,
        }
    }
}

impl ExampleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        if !(self.hbar > 0.0) {
            return Err(Error::InvalidParameter("hbar must be positive".into()));
        }
        if !self.z0.is_finite() || !self.s0.is_finite() {
            return Err(Error::InvalidParameter("labels must be finite".into()));
        }
        two_j(self.j)?;
        Ok(())
    }

    pub fn two_j(&self) -> u32 {
        two_j(self.j).expect("validated j")
    }

    /// `T_p = 2 pi j / lambda`.
    pub fn period(&self) -> f64 {
        2.0 * PI * self.j / self.lambda
    }

    pub fn time(&self, tau: f64) -> f64 {
        tau * self.period()
    }

    /// `|z0|^2`.
    pub fn a(&self) -> f64 {
        self.z0.norm_sqr()
    }

    /// `|s0|^2`.
    pub fn sigma(&self) -> f64 {
        self.s0.norm_sqr()
    }

    pub fn model(&self) -> ExampleModel {
        ExampleModel { p: *self }
    }
}

/// [`HamiltonianModel`] view of the example.
#[derive(Clone, Copy, Debug)]
pub struct ExampleModel {
    pub p: ExampleParams,
}

pub fn h_classical(x: &PhaseState, p: &ExampleParams) -> Result<C64> {
    x.check_chart()?;
    let pb = x.ub * x.vb;
    Ok(-p.hbar * p.lambda * x.va * x.ua * (1.0 - pb) / (1.0 + pb))
}

impl HamiltonianModel for ExampleModel {
    fn j(&self) -> f64 {
        self.p.j
    }

    fn hbar(&self) -> f64 {
        self.p.hbar
    }

    fn value(&self, x: &PhaseState) -> C64 {
        let pb = x.ub * x.vb;
        -self.p.hbar * self.p.lambda * x.va * x.ua * (1.0 - pb) / (1.0 + pb)
    }

    fn grad(&self, x: &PhaseState) -> [C64; 4] {
        let hl = self.p.hbar * self.p.lambda;
        let pa = x.ua * x.va;
        let pb = x.ub * x.vb;
        let q = (1.0 - pb) / (1.0 + pb);
        let d2 = (1.0 + pb) * (1.0 + pb);
        [
            -hl * x.va * q,
            2.0 * hl * pa * x.vb / d2,
            -hl * x.ua * q,
            2.0 * hl * pa * x.ub / d2,
        ]
    }

    fn hessian(&self, x: &PhaseState) -> [[C64; 4]; 4] {
        let hl = self.p.hbar * self.p.lambda;
        let pa = x.ua * x.va;
        let pb = x.ub * x.vb;
        let d = 1.0 + pb;
        let d2 = d * d;
        let d3 = d2 * d;
        let z = C64::new(0.0, 0.0);
        let aa = -hl * (1.0 - pb) / d;
        let ua_ub = 2.0 * hl * x.va * x.vb / d2;
        let ua_vb = 2.0 * hl * x.va * x.ub / d2;
        let va_ub = 2.0 * hl * x.ua * x.vb / d2;
        let va_vb = 2.0 * hl * x.ua * x.ub / d2;
        let ub_ub = -4.0 * hl * pa * x.vb * x.vb / d3;
        let vb_vb = -4.0 * hl * pa * x.ub * x.ub / d3;
        let ub_vb = 2.0 * hl * pa * (1.0 - pb) / d3;
        [
            [z, ua_ub, aa, ua_vb],
            [ua_ub, ub_ub, va_ub, ub_vb],
            [aa, va_ub, z, va_vb],
            [ua_vb, ub_vb, va_vb, vb_vb],
        ]
    }
}

/// `(omegaA, omegaB)` from the initial point.
pub fn frequencies(x: &PhaseState, p: &ExampleParams) -> Result<(C64, C64)> {
    x.check_chart()?;
    let pb = x.ub * x.vb;
    Ok((p.lambda / p.j * x.ua * x.va, p.lambda * (1.0 - pb) / (1.0 + pb)))
}

pub fn analytic_trajectory(x: &PhaseState, t: f64, p: &ExampleParams) -> Result<PhaseState> {
    let (wa, wb) = frequencies(x, p)?;
    let eb = (I * wb * t).exp();
    let ea = (I * wa * t).exp();
    Ok(PhaseState {
        ua: x.ua * eb,
        ub: x.ub / ea,
        va: x.va / eb,
        vb: x.vb * ea,
    })
}

/// The 16 entries of the closed-form tangent matrix.
pub fn analytic_tangent(x: &PhaseState, t: f64, p: &ExampleParams) -> Result<M4> {
    let f = analytic_trajectory(x, t, p)?;
    let zero = C64::new(0.0, 0.0);
    if [x.ua, x.ub, x.va, x.vb].iter().any(|c| *c == zero) {
        return Err(Error::ZeroCoordinate);
    }
    let lt = p.lambda * t;
    let d = x.chart() * x.chart();
    let j = p.j;
    Ok(M4::new(
        f.ua / x.ua, -2.0 * I * lt * f.ua * x.vb / d, zero, -2.0 * I * lt * f.ua * x.ub / d,
        -I * lt * f.ub * x.va / j, f.ub / x.ub, -I * lt * f.ub * x.ua / j, zero,
        zero, 2.0 * I * lt * f.va * x.vb / d, f.va / x.va, 2.0 * I * lt * f.va * x.ub / d,
        I * lt * f.vb * x.va / j, zero, I * lt * f.vb * x.ua / j, f.vb / x.vb,
    ))
}
