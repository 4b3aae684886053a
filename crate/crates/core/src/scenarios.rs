//! Built-in systems with their default discretizations.

use serde::{Deserialize, Serialize};

use crate::cocycle::{BoxDomain, IntegratorConfig, SystemDef, SystemError};
use crate::cover_graph::{BoxCover, ChainParams};
use crate::driving::{DrivingFlowSpec, DrivingGrid};
use crate::signals::ControlRange;

pub const NAMES: [&str; 3] = ["cubic-autonomous", "cubic-hull", "kronecker-demo"];

/// Coefficients of `ẋ = -x³ + c x² + ε (b x + a) + u`, as expressions in
/// the driving angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullCoefficients {
    pub a: String,
    pub b: String,
    pub c: String,
    pub eps: f64,
}

impl HullCoefficients {
    pub fn quasi_periodic() -> Self {
        HullCoefficients {
            a: "1 + cos(2*pi*w1)".into(),
            b: "sin(2*pi*w2)".into(),
            c: "cos(2*pi*w1) + cos(2*pi*w2)".into(),
            eps: 0.1,
        }
    }

    pub fn zero() -> Self {
        HullCoefficients { a: "0".into(), b: "0".into(), c: "0".into(), eps: 0.0 }
    }

    pub fn drift(&self) -> String {
        format!("-x1^3 + ({})*x1^2 + {}*(({})*x1 + ({}))", self.c, self.eps, self.b, self.a)
    }

    pub fn system(
        &self,
        driving: DrivingFlowSpec,
        range: ControlRange,
        domain: BoxDomain,
    ) -> Result<SystemDef, SystemError> {
        SystemDef::parse(driving, range, domain, &[vec![self.drift()], vec!["1".into()]])
    }
}

/// A system together with the discretization used to analyse it.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub system: SystemDef,
    pub grid: DrivingGrid,
    pub cover: BoxCover,
    pub control_levels: usize,
    pub chain: ChainParams,
    /// Step used for graph construction.
    pub integrator: IntegratorConfig,
}

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "cubic-autonomous" => Some(cubic_autonomous()),
        "cubic-hull" => Some(cubic_hull()),
        "kronecker-demo" => Some(kronecker_demo()),
        _ => None,
    }
}

/// `ẋ = -x³ + u`, `U = [-1/2, 1/2]`, `Q = [-2, 2]`, 256 boxes, one driving cell.
pub fn cubic_autonomous() -> Scenario {
    let domain = BoxDomain::new(vec![-2.0], vec![2.0]).expect("valid domain");
    let system = HullCoefficients::zero()
        .system(DrivingFlowSpec::trivial(), ControlRange::new(vec![(-0.5, 0.5)]).unwrap(), domain.clone())
        .expect("valid system");
    let cover = BoxCover::new(domain.clone(), vec![256]).expect("valid cover");
    let eps = cover.box_diameter();
    Scenario {
        name: "cubic-autonomous".into(),
        system,
        grid: DrivingGrid::single(1),
        cover,
        control_levels: 5,
        chain: ChainParams::new(1.0, eps),
        integrator: IntegratorConfig::for_domain(&domain, 0.01),
    }
}

/// Quasi-periodic cubic with `γ = (1, √2)` on a `cells × cells` driving grid.
pub fn cubic_hull_with(cells: usize, boxes: usize) -> Scenario {
    let domain = BoxDomain::new(vec![-3.0], vec![3.0]).expect("valid domain");
    let driving = DrivingFlowSpec::new(vec![1.0, 2f64.sqrt()]).expect("valid frequencies");
    let system = HullCoefficients::quasi_periodic()
        .system(driving, ControlRange::new(vec![(-0.5, 0.5)]).unwrap(), domain.clone())
        .expect("valid system");
    let grid = DrivingGrid::new(vec![cells, cells]).expect("valid grid");
    let cover = BoxCover::new(domain.clone(), vec![boxes]).expect("valid cover");
    let eps = cover.box_diameter().max(grid.cell_diameter());
    Scenario {
        name: "cubic-hull".into(),
        system,
        grid,
        cover,
        control_levels: 5,
        chain: ChainParams::new(1.1, eps),
        integrator: IntegratorConfig::for_domain(&domain, 0.05),
    }
}

pub fn cubic_hull() -> Scenario {
    cubic_hull_with(16, 128)
}

/// Damped oscillator forced along a golden-ratio winding, `d = p = 2`.
pub fn kronecker_demo() -> Scenario {
    let domain = BoxDomain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).expect("valid domain");
    let driving = DrivingFlowSpec::new(vec![1.0, 0.5 * (5f64.sqrt() - 1.0)]).expect("valid frequencies");
    let system = SystemDef::parse(
        driving,
        ControlRange::new(vec![(-0.5, 0.5)]).unwrap(),
        domain.clone(),
        &[
            vec!["x2".into(), "-x1 - 0.8*x2 + 0.3*cos(2*pi*w1)*sin(2*pi*w2)".into()],
            vec!["0".into(), "1".into()],
        ],
    )
    .expect("valid system");
    let grid = DrivingGrid::new(vec![4, 4]).expect("valid grid");
    let cover = BoxCover::new(domain.clone(), vec![16, 16]).expect("valid cover");
    let eps = cover.box_diameter().max(grid.cell_diameter());
    Scenario {
        name: "kronecker-demo".into(),
        system,
        grid,
        cover,
        control_levels: 3,
        chain: ChainParams::new(1.3, eps),
        integrator: IntegratorConfig::for_domain(&domain, 0.05),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        for name in NAMES {
            let s = by_name(name).unwrap();
            assert_eq!(s.name, name);
            assert!(s.chain.eps >= s.cover.box_diameter());
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn hull_drift_text() {
        let z = HullCoefficients::zero();
        assert_eq!(z.drift(), "-x1^3 + (0)*x1^2 + 0*((0)*x1 + (0))");
        assert!(!cubic_autonomous().system.depends_on_driving());
        assert!(cubic_hull().system.depends_on_driving());
    }
}
