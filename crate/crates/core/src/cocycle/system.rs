use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driving::DrivingFlowSpec;
use crate::expr::{self, CompiledExpr, EvalError, Expr, ParseError};
use crate::signals::ControlRange;

/// Largest `p + d` supported by the evaluator's stack buffer.
pub const MAX_SLOTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("domain: interval {index} is [{lo}, {hi}], need lo < hi")]
    DegenerateInterval { index: usize, lo: f64, hi: f64 },
    #[error("need a drift and at least one control field, got {0} fields")]
    NoControlField(usize),
    #[error("field f{field} has {got} components, state dimension is {expected}")]
    FieldArity { field: usize, expected: usize, got: usize },
    #[error("control range has {got} channels but the system has {expected} control fields")]
    ControlChannels { expected: usize, got: usize },
    #[error("field f{field}, component {component}: {source}")]
    Parse { field: usize, component: usize, source: ParseError },
    #[error("field f{field}, component {component}: variable `{name}` is not one of w1..w{p}, x1..x{d}")]
    Variable { field: usize, component: usize, name: String, p: usize, d: usize },
    #[error("field f{field}, component {component} is not finite at w={w:?}, x={x:?}")]
    NonFinite { field: usize, component: usize, w: Vec<f64>, x: Vec<f64> },
    #[error("p + d = {0} exceeds the supported maximum")]
    TooManyVariables(usize),
}

/// Rectangular domain `Q = Π [lo_k, hi_k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SystemError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(SystemError::FieldArity { field: 0, expected: lo.len(), got: hi.len() });
        }
        for (index, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(SystemError::DegenerateInterval { index, lo: l, hi: h });
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self, SystemError> {
        Self::new(intervals.iter().map(|i| i.0).collect(), intervals.iter().map(|i| i.1).collect())
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Max-norm diameter.
    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Grows every side by `fraction` of its length (half on each end).
    pub fn inflate(&self, fraction: f64) -> BoxDomain {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            let pad = 0.5 * fraction * (*h - *l);
            *l -= pad;
            *h += pad;
        }
        BoxDomain { lo, hi }
    }

    /// `Q̃`, the domain inflated by 10%.
    pub fn inflated(&self) -> BoxDomain {
        self.inflate(0.1)
    }
}

/// `ẋ = f₀(w, x) + Σ uᵢ fᵢ(w, x)` with `w` the driving angle and `x ∈ ℝ^d`.
#[derive(Clone, Debug)]
pub struct SystemDef {
    driving: DrivingFlowSpec,
    range: ControlRange,
    domain: BoxDomain,
    fields: Vec<Vec<Expr>>,
    compiled: Vec<Vec<CompiledExpr>>,
    /// `true` where the compiled field component is the literal 0.
    zero: Vec<Vec<bool>>,
    depends_on_driving: bool,
}

impl SystemDef {
    /// `fields[0]` is the drift, `fields[i]` the field multiplying control
    /// channel `i`. Variables are `w1..wp` and `x1..xd`.
    pub fn new(
        driving: DrivingFlowSpec,
        range: ControlRange,
        domain: BoxDomain,
        fields: Vec<Vec<Expr>>,
    ) -> Result<Self, SystemError> {
        let p = driving.dim();
        let d = domain.dim();
        if p + d > MAX_SLOTS {
            return Err(SystemError::TooManyVariables(p + d));
        }
        if fields.len() < 2 {
            return Err(SystemError::NoControlField(fields.len()));
        }
        if range.channels() != fields.len() - 1 {
            return Err(SystemError::ControlChannels { expected: fields.len() - 1, got: range.channels() });
        }
        let names = slot_names(p, d);
        let slots: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut compiled = Vec::with_capacity(fields.len());
        let mut zero = Vec::with_capacity(fields.len());
        let mut depends_on_driving = false;
        for (fi, field) in fields.iter().enumerate() {
            if field.len() != d {
                return Err(SystemError::FieldArity { field: fi, expected: d, got: field.len() });
            }
            let mut row = Vec::with_capacity(d);
            let mut zrow = Vec::with_capacity(d);
            for (ci, e) in field.iter().enumerate() {
                if e.variables().iter().any(|v| v.starts_with('w')) {
                    depends_on_driving = true;
                }
                let c = e.compile(&slots).map_err(|err| match err {
                    EvalError::UnboundVariable(name) => {
                        SystemError::Variable { field: fi, component: ci, name, p, d }
                    }
                })?;
                zrow.push(c.as_constant() == Some(0.0));
                row.push(c);
            }
            compiled.push(row);
            zero.push(zrow);
        }
        let sys = SystemDef { driving, range, domain, fields, compiled, zero, depends_on_driving };
        sys.check_finite()?;
        Ok(sys)
    }

    /// Like [`SystemDef::new`] with fields given as source text.
    pub fn parse(
        driving: DrivingFlowSpec,
        range: ControlRange,
        domain: BoxDomain,
        fields: &[Vec<String>],
    ) -> Result<Self, SystemError> {
        let mut parsed = Vec::with_capacity(fields.len());
        for (fi, field) in fields.iter().enumerate() {
            let mut row = Vec::with_capacity(field.len());
            for (ci, text) in field.iter().enumerate() {
                row.push(expr::parse(text).map_err(|source| SystemError::Parse {
                    field: fi,
                    component: ci,
                    source,
                })?);
            }
            parsed.push(row);
        }
        Self::new(driving, range, domain, parsed)
    }

    fn check_finite(&self) -> Result<(), SystemError> {
        let p = self.driving.dim();
        let d = self.domain.dim();
        let qt = self.domain.inflated();
        let per_w = if p <= 2 { 9 } else { 5 };
        let per_x = if d <= 2 { 9 } else { 5 };
        let w_pts = grid_points(&vec![(0.0, 1.0 - 1.0 / per_w as f64); p], per_w);
        let bounds: Vec<(f64, f64)> = qt.lo.iter().copied().zip(qt.hi.iter().copied()).collect();
        let x_pts = grid_points(&bounds, per_x);
        let mut slots = [0.0; MAX_SLOTS];
        for w in &w_pts {
            slots[..p].copy_from_slice(w);
            for x in &x_pts {
                slots[p..p + d].copy_from_slice(x);
                for (fi, row) in self.compiled.iter().enumerate() {
                    for (ci, c) in row.iter().enumerate() {
                        if !c.eval(&slots[..p + d]).is_finite() {
                            return Err(SystemError::NonFinite {
                                field: fi,
                                component: ci,
                                w: w.clone(),
                                x: x.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn driving(&self) -> &DrivingFlowSpec {
        &self.driving
    }

    pub fn control_range(&self) -> &ControlRange {
        &self.range
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn fields(&self) -> &[Vec<Expr>] {
        &self.fields
    }

    pub fn state_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn driving_dim(&self) -> usize {
        self.driving.dim()
    }

    pub fn control_dim(&self) -> usize {
        self.fields.len() - 1
    }

    /// Whether any field references a driving angle.
    pub fn depends_on_driving(&self) -> bool {
        self.depends_on_driving
    }

    /// Same system with a different control range (same channel count).
    pub fn with_control_range(&self, range: ControlRange) -> Result<Self, SystemError> {
        if range.channels() != self.control_dim() {
            return Err(SystemError::ControlChannels { expected: self.control_dim(), got: range.channels() });
        }
        Ok(SystemDef { range, ..self.clone() })
    }

    /// Evaluates the right-hand side at driving angle `w`.
    #[inline]
    pub fn rhs(&self, w: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        let p = w.len();
        let d = x.len();
        let mut slots = [0.0; MAX_SLOTS];
        slots[..p].copy_from_slice(w);
        slots[p..p + d].copy_from_slice(x);
        let slots = &slots[..p + d];
        for (k, o) in out.iter_mut().enumerate() {
            *o = if self.zero[0][k] { 0.0 } else { self.compiled[0][k].eval(slots) };
        }
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            let row = &self.compiled[i + 1];
            for (k, o) in out.iter_mut().enumerate() {
                if !self.zero[i + 1][k] {
                    *o += ui * row[k].eval(slots);
                }
            }
        }
    }
}

pub(crate) fn slot_names(p: usize, d: usize) -> Vec<String> {
    (1..=p).map(|i| format!("w{i}")).chain((1..=d).map(|i| format!("x{i}"))).collect()
}

fn grid_points(bounds: &[(f64, f64)], per: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for &(lo, hi) in bounds {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..per).map(move |j| {
                    let mut p = prefix.clone();
                    p.push(lo + (hi - lo) * j as f64 / (per - 1) as f64);
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(fields: &[&str]) -> Result<SystemDef, SystemError> {
        SystemDef::parse(
            DrivingFlowSpec::trivial(),
            ControlRange::new(vec![(-0.5, 0.5)]).unwrap(),
            BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(),
            &fields.iter().map(|f| vec![f.to_string()]).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn rhs_is_control_affine() {
        let sys = scalar(&["-x1^3", "1"]).unwrap();
        let mut out = [0.0];
        sys.rhs(&[0.3], &[2.0], &[0.5], &mut out);
        assert_eq!(out[0], -7.5);
        assert!(!sys.depends_on_driving());
        assert_eq!(sys.control_dim(), 1);
    }

    #[test]
    fn rejects_bad_systems() {
        assert!(matches!(scalar(&["-x1^3"]), Err(SystemError::NoControlField(1))));
        assert!(matches!(scalar(&["-x2", "1"]), Err(SystemError::Variable { .. })));
        assert!(matches!(scalar(&["x1 +* 2", "1"]), Err(SystemError::Parse { .. })));
        assert!(matches!(scalar(&["1/x1", "1"]), Err(SystemError::NonFinite { .. })));
        assert!(matches!(scalar(&["sqrt(x1)", "1"]), Err(SystemError::NonFinite { .. })));
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn driving_dependence_is_detected() {
        let sys = scalar(&["-x1^3 + cos(2*pi*w1)", "1"]).unwrap();
        assert!(sys.depends_on_driving());
    }

    #[test]
    fn inflation() {
        let q = BoxDomain::new(vec![-2.0, 0.0], vec![2.0, 1.0]).unwrap();
        let qt = q.inflated();
        assert!((qt.lo()[0] + 2.2).abs() < 1e-12 && (qt.hi()[1] - 1.05).abs() < 1e-12);
        assert_eq!(q.diameter(), 4.0);
    }
}
