//! Shared fixtures for the benchmarks.

use skewchain_core::scenarios::{self, Scenario};
use skewchain_core::signals::{sample_controls, ControlSignal};

/// The autonomous cubic with `boxes` boxes and `ε = δ_box`.
pub fn autonomous(boxes: usize) -> Scenario {
    let mut s = scenarios::cubic_autonomous();
    s.cover = skewchain_core::BoxCover::new(s.system.domain().clone(), vec![boxes]).expect("valid cover");
    s.chain.eps = s.cover.box_diameter();
    s
}

pub fn controls(s: &Scenario) -> Vec<ControlSignal> {
    sample_controls(s.system.control_range(), s.control_levels).expect("valid levels")
}
