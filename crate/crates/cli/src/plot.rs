//! Whitespace-separated tables for gnuplot. Every file starts with `#`
//! comment lines naming the columns; an empty result is just the header.

use std::fmt::Write;

use skewchain_core::control_sets::EquilibriumTable;
use skewchain_core::cover_graph::{BoxCover, ChainSetApprox};
use skewchain_core::driving::DrivingGrid;

fn columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let cells: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
    writeln!(out, "{}", cells.join(" ")).unwrap();
}

fn header(out: &mut String, title: &str, cols: &[String]) {
    writeln!(out, "# {title}").unwrap();
    writeln!(out, "# {}", cols.join(" ")).unwrap();
}

/// Fiber sections: driving cell center and box center of every node, one
/// block per set, blocks separated by a blank line.
pub fn chain_sets(title: &str, sets: &[ChainSetApprox], grid: &DrivingGrid, cover: &BoxCover) -> String {
    let mut out = String::new();
    let mut cols = columns("w", grid.dim());
    cols.extend(columns("x", cover.per_dim().len()));
    header(&mut out, title, &cols);
    for (i, set) in sets.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "# set {i}: {} nodes", set.len()).unwrap();
        for &n in set.nodes() {
            let (c, b) = (n / cover.box_count(), n % cover.box_count());
            row(&mut out, grid.center(c).coords().iter().copied().chain(cover.center(b)));
        }
    }
    out
}

/// `α` at the cell centers with the invariance residual.
pub fn equilibrium(table: &EquilibriumTable) -> String {
    let mut out = String::new();
    let mut cols = columns("w", table.grid.dim());
    cols.extend(columns("alpha", table.values.first().map_or(0, Vec::len)));
    cols.push("residual".into());
    header(&mut out, &format!("pullback equilibrium, horizon {}", table.horizon), &cols);
    for (c, (a, r)) in table.values.iter().zip(&table.residuals).enumerate() {
        row(&mut out, table.grid.center(c).coords().iter().copied().chain(a.iter().copied()).chain([*r]));
    }
    out
}

/// Reach intervals `[lo, hi]` against the horizon `T`.
pub fn reach_fan(title: &str, rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title, &["T".into(), "lo".into(), "hi".into()]);
    for &(t, lo, hi) in rows {
        row(&mut out, [t, lo, hi]);
    }
    out
}

/// `(t, ω·t, x(t))`.
pub type Sample = (f64, Vec<f64>, Vec<f64>);

/// One block per trajectory.
pub fn trajectories(title: &str, p: usize, d: usize, blocks: &[Vec<Sample>]) -> String {
    let mut out = String::new();
    let mut cols = vec!["t".to_string()];
    cols.extend(columns("w", p));
    cols.extend(columns("x", d));
    header(&mut out, title, &cols);
    for (i, block) in blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (t, w, x) in block {
            row(&mut out, [*t].into_iter().chain(w.iter().copied()).chain(x.iter().copied()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use skewchain_core::cocycle::BoxDomain;

    #[test]
    fn one_dimensional_sets_have_two_columns() {
        let cover = BoxCover::new(BoxDomain::new(vec![-1.0], vec![1.0]).unwrap(), vec![4]).unwrap();
        let grid = DrivingGrid::single(1);
        let sets = vec![ChainSetApprox::new(vec![1, 2], 4), ChainSetApprox::new(vec![3], 4)];
        let text = chain_sets("sets", &sets, &grid, &cover);
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, ["0.5 -0.25", "0.5 0.25", "", "0.5 0.75"]);
    }

    #[test]
    fn empty_result_is_header_only() {
        let cover = BoxCover::new(BoxDomain::new(vec![-1.0], vec![1.0]).unwrap(), vec![4]).unwrap();
        let text = chain_sets("sets", &[], &DrivingGrid::single(1), &cover);
        assert!(!text.is_empty());
        assert!(text.lines().all(|l| l.starts_with('#')));
        assert!(reach_fan("fan", &[]).lines().all(|l| l.starts_with('#')));
    }
}
