use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::system::{BoxDomain, SystemDef};
use crate::driving::DrivingPoint;
use crate::signals::ControlSignal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    pub method: Method,
    /// Integration aborts once `max_k |x_k|` exceeds this.
    pub blowup_bound: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("solution left |x| <= {bound} at t = {time}")]
    Escape { time: f64, bound: f64 },
    #[error("integration stopped by observer at t = {time}")]
    Aborted { time: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid integrator configuration: {0}")]
    Config(String),
}

impl IntegratorConfig {
    /// RK4 with step `h` and the default bound of ten domain diameters.
    pub fn for_domain(domain: &BoxDomain, step: f64) -> Self {
        IntegratorConfig { step, method: Method::Rk4, blowup_bound: 10.0 * domain.diameter() }
    }

    pub fn validate(&self, domain: &BoxDomain) -> Result<(), IntegrationError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(IntegrationError::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.blowup_bound > domain.diameter()) {
            return Err(IntegrationError::Config(format!(
                "blow-up bound {} must exceed the domain diameter {}",
                self.blowup_bound,
                domain.diameter()
            )));
        }
        Ok(())
    }
}

/// `(ω, x) ∈ Ω × ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub omega: DrivingPoint,
    pub x: Vec<f64>,
}

/// Fixed-step RK4 for one system.
#[derive(Clone, Debug)]
pub struct Solver<'a> {
    sys: &'a SystemDef,
    cfg: IntegratorConfig,
}

impl<'a> Solver<'a> {
    pub fn new(sys: &'a SystemDef, cfg: IntegratorConfig) -> Self {
        Solver { sys, cfg }
    }

    pub fn system(&self) -> &'a SystemDef {
        self.sys
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    fn check_dims(&self, omega: &[f64], x: &[f64], u: &ControlSignal) -> Result<(), IntegrationError> {
        let checks = [
            (self.sys.driving_dim(), omega.len()),
            (self.sys.state_dim(), x.len()),
            (self.sys.control_dim(), u.channels()),
        ];
        for (expected, got) in checks {
            if expected != got {
                return Err(IntegrationError::Dimension { expected, got });
            }
        }
        Ok(())
    }

    /// Integrates from time 0 through every entry of `times` (all of one
    /// sign, increasing in magnitude) and returns the state at each.
    ///
    /// Steps never straddle a control switch or a requested time. `observe`
    /// sees `(s, x(s))` after every step; returning `false` aborts.
    pub fn run<O>(
        &self,
        omega: &[f64],
        x: &[f64],
        u: &ControlSignal,
        times: &[f64],
        observe: O,
    ) -> Result<Vec<Vec<f64>>, IntegrationError>
    where
        O: FnMut(f64, &[f64]) -> bool,
    {
        let mut out = Vec::with_capacity(times.len());
        self.integrate(omega, x, u, times, observe, &mut out)?;
        Ok(out)
    }

    /// Like [`Solver::run`] but keeps the states reached before a failure.
    pub fn run_partial<O>(
        &self,
        omega: &[f64],
        x: &[f64],
        u: &ControlSignal,
        times: &[f64],
        observe: O,
    ) -> (Vec<Vec<f64>>, Option<IntegrationError>)
    where
        O: FnMut(f64, &[f64]) -> bool,
    {
        let mut out = Vec::with_capacity(times.len());
        let err = self.integrate(omega, x, u, times, observe, &mut out).err();
        (out, err)
    }

    fn integrate<O>(
        &self,
        omega: &[f64],
        x: &[f64],
        u: &ControlSignal,
        times: &[f64],
        mut observe: O,
        out: &mut Vec<Vec<f64>>,
    ) -> Result<(), IntegrationError>
    where
        O: FnMut(f64, &[f64]) -> bool,
    {
        self.check_dims(omega, x, u)?;
        let t_end = times.iter().copied().fold(0.0, |m: f64, t| if t.abs() > m.abs() { t } else { m });
        let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
        debug_assert!(times.iter().all(|&t| t * dir >= 0.0));
        debug_assert!(times.windows(2).all(|w| w[0].abs() <= w[1].abs()));

        // Stops in integration order, excluding 0.
        let mut stops: Vec<f64> = times.iter().copied().filter(|&t| t != 0.0).collect();
        stops.extend(u.switches().iter().copied().filter(|&s| s * dir > 0.0 && s * dir < t_end * dir));
        stops.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
        stops.dedup();

        let d = x.len();
        let p = omega.len();
        let h = self.cfg.step;
        let bound = self.cfg.blowup_bound;
        let mut state = x.to_vec();
        let mut next_time = 0;
        while next_time < times.len() && times[next_time] == 0.0 {
            out.push(state.clone());
            next_time += 1;
        }

        let mut k1 = vec![0.0; d];
        let mut k2 = vec![0.0; d];
        let mut k3 = vec![0.0; d];
        let mut k4 = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        let mut w = vec![0.0; p];
        let driving = self.sys.driving();
        let mut a = 0.0;
        for &b in &stops {
            let value = u.value_at(0.5 * (a + b));
            let n = (((b - a).abs() / h) - 1e-9).ceil().max(1.0) as usize;
            let hh = (b - a) / n as f64;
            for i in 0..n {
                let s = a + i as f64 * hh;
                let s_next = if i + 1 == n { b } else { a + (i + 1) as f64 * hh };
                let dt = s_next - s;
                driving.advance_into(omega, s, &mut w);
                self.sys.rhs(&w, &state, value, &mut k1);
                driving.advance_into(omega, s + 0.5 * dt, &mut w);
                for j in 0..d {
                    tmp[j] = state[j] + 0.5 * dt * k1[j];
                }
                self.sys.rhs(&w, &tmp, value, &mut k2);
                for j in 0..d {
                    tmp[j] = state[j] + 0.5 * dt * k2[j];
                }
                self.sys.rhs(&w, &tmp, value, &mut k3);
                driving.advance_into(omega, s_next, &mut w);
                for j in 0..d {
                    tmp[j] = state[j] + dt * k3[j];
                }
                self.sys.rhs(&w, &tmp, value, &mut k4);
                for j in 0..d {
                    state[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
                if state.iter().any(|v| !(v.abs() <= bound)) {
                    return Err(IntegrationError::Escape { time: s_next, bound });
                }
                if !observe(s_next, &state) {
                    return Err(IntegrationError::Aborted { time: s_next });
                }
            }
            while next_time < times.len() && times[next_time] == b {
                out.push(state.clone());
                next_time += 1;
            }
            a = b;
        }
        Ok(())
    }

    /// `φ(t, ω, x, u)`.
    pub fn phi(&self, t: f64, omega: &[f64], x: &[f64], u: &ControlSignal) -> Result<Vec<f64>, IntegrationError> {
        if t == 0.0 {
            self.check_dims(omega, x, u)?;
            return Ok(x.to_vec());
        }
        Ok(self.run(omega, x, u, &[t], |_, _| true)?.pop().expect("one output"))
    }

    /// `φ(t_k, ω, x, u)` for several times of one sign in a single pass.
    pub fn phi_many(
        &self,
        times: &[f64],
        omega: &[f64],
        x: &[f64],
        u: &ControlSignal,
    ) -> Result<Vec<Vec<f64>>, IntegrationError> {
        self.run(omega, x, u, times, |_, _| true)
    }

    /// `ψ(t, ω, x, u) = (ω·t, φ(t, ω, x, u))`.
    pub fn psi(&self, t: f64, omega: &DrivingPoint, x: &[f64], u: &ControlSignal) -> Result<ExtendedState, IntegrationError> {
        let x = self.phi(t, omega.coords(), x, u)?;
        Ok(ExtendedState { omega: self.sys.driving().advance(omega, t), x })
    }

    /// `Φ(t, u, ω, x) = (θ_t u, ψ(t, ω, x, u))`.
    pub fn flow_step(
        &self,
        t: f64,
        u: &ControlSignal,
        omega: &DrivingPoint,
        x: &[f64],
    ) -> Result<(ControlSignal, ExtendedState), IntegrationError> {
        let state = self.psi(t, omega, x, u)?;
        Ok((u.shift(t), state))
    }

    /// `|φ(t+s, ω, x, u) - φ(s, ω·t, φ(t, ω, x, u), θ_t u)|` in the max norm.
    pub fn cocycle_residual(
        &self,
        t: f64,
        s: f64,
        omega: &DrivingPoint,
        x: &[f64],
        u: &ControlSignal,
    ) -> Result<f64, IntegrationError> {
        let lhs = self.phi(t + s, omega.coords(), x, u)?;
        let mid = self.psi(t, omega, x, u)?;
        let rhs = self.phi(s, mid.omega.coords(), &mid.x, &u.shift(t))?;
        Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Every integration step of `φ(·, ω, x, u)` on `[0, t]`, including `(0, x)`.
    pub fn trajectory(
        &self,
        t: f64,
        omega: &[f64],
        x: &[f64],
        u: &ControlSignal,
    ) -> Result<Vec<(f64, Vec<f64>)>, IntegrationError> {
        let mut points = vec![(0.0, x.to_vec())];
        if t != 0.0 {
            self.run(omega, x, u, &[t], |s, y| {
                points.push((s, y.to_vec()));
                true
            })?;
        }
        Ok(points)
    }

    /// CSV with columns `t, w1..wp, x1..xd, u1..um`.
    pub fn write_trajectory_csv<W: Write>(
        &self,
        mut out: W,
        omega: &[f64],
        u: &ControlSignal,
        points: &[(f64, Vec<f64>)],
    ) -> io::Result<()> {
        let p = self.sys.driving_dim();
        let d = self.sys.state_dim();
        let m = self.sys.control_dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=p).map(|i| format!("w{i}")));
        header.extend((1..=d).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        writeln!(out, "{}", header.join(","))?;
        let mut w = vec![0.0; p];
        for (t, x) in points {
            self.sys.driving().advance_into(omega, *t, &mut w);
            let mut row = vec![t.to_string()];
            row.extend(w.iter().map(f64::to_string));
            row.extend(x.iter().map(f64::to_string));
            row.extend(u.value_at(*t).iter().map(f64::to_string));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn solve_phi(
    t: f64,
    omega: &DrivingPoint,
    x: &[f64],
    u: &ControlSignal,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, IntegrationError> {
    Solver::new(sys, cfg.clone()).phi(t, omega.coords(), x, u)
}

pub fn solve_psi(
    t: f64,
    omega: &DrivingPoint,
    x: &[f64],
    u: &ControlSignal,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
) -> Result<ExtendedState, IntegrationError> {
    Solver::new(sys, cfg.clone()).psi(t, omega, x, u)
}

pub fn flow_step(
    t: f64,
    u: &ControlSignal,
    omega: &DrivingPoint,
    x: &[f64],
    sys: &SystemDef,
    cfg: &IntegratorConfig,
) -> Result<(ControlSignal, ExtendedState), IntegrationError> {
    Solver::new(sys, cfg.clone()).flow_step(t, u, omega, x)
}

pub fn cocycle_residual(
    t: f64,
    s: f64,
    omega: &DrivingPoint,
    x: &[f64],
    u: &ControlSignal,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
) -> Result<f64, IntegrationError> {
    Solver::new(sys, cfg.clone()).cocycle_residual(t, s, omega, x, u)
}
