//! Binary edge lists, JSON summaries and CSV node tables.
//!
//! Edge list layout, little endian:
//!
//! ```text
//! magic      4 bytes  "CHGR"
//! version    u32      1
//! nodes      u64
//! edges      u64
//! records    edges × { source u64, target u64, control u16, time u8 }
//! ```

use std::io::{self, Read, Write};

use serde::Serialize;

use super::chain_sets::ChainSetApprox;
use super::graph::{ChainGraph, ChainParams, EdgeLabel};
use super::BoxCover;
use crate::driving::DrivingGrid;

pub const MAGIC: &[u8; 4] = b"CHGR";
pub const VERSION: u32 = 1;

pub fn write_edge_list<W: Write>(graph: &ChainGraph, mut out: W) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(graph.node_count() as u64).to_le_bytes())?;
    out.write_all(&(graph.edge_count() as u64).to_le_bytes())?;
    for (s, t, l) in graph.edge_list() {
        out.write_all(&(s as u64).to_le_bytes())?;
        out.write_all(&(t as u64).to_le_bytes())?;
        out.write_all(&l.control.to_le_bytes())?;
        out.write_all(&[l.time])?;
    }
    Ok(())
}

pub type EdgeRecord = (u64, u64, EdgeLabel);

/// Decoded edge list: node count and `(source, target, label)` records.
pub fn read_edge_list<R: Read>(mut input: R) -> io::Result<(u64, Vec<EdgeRecord>)> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a CHGR file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b2 = [0u8; 2];
    let mut b1 = [0u8; 1];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(bad("unsupported CHGR version"));
    }
    input.read_exact(&mut b8)?;
    let nodes = u64::from_le_bytes(b8);
    input.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8);
    let mut edges = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        input.read_exact(&mut b8)?;
        let s = u64::from_le_bytes(b8);
        input.read_exact(&mut b8)?;
        let t = u64::from_le_bytes(b8);
        input.read_exact(&mut b2)?;
        input.read_exact(&mut b1)?;
        edges.push((s, t, EdgeLabel { control: u16::from_le_bytes(b2), time: b1[0] }));
    }
    Ok((nodes, edges))
}

#[derive(Debug, Serialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub cells: usize,
    pub boxes: usize,
    pub box_diameter: f64,
    pub cell_diameter: f64,
    pub params: ChainParams,
    pub jump_times: Vec<f64>,
    pub controls: usize,
}

pub fn summary(graph: &ChainGraph) -> GraphSummary {
    GraphSummary {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        cells: graph.cell_count(),
        boxes: graph.box_count(),
        box_diameter: graph.cover().box_diameter(),
        cell_diameter: graph.grid().cell_diameter(),
        params: graph.params().clone(),
        jump_times: graph.jump_times().to_vec(),
        controls: graph.controls().len(),
    }
}

/// One row per node: `c1..cp, box, lo1..lod, hi1..hid`. `set` identifies
/// the set when several are written to one file.
pub fn write_set_csv<W: Write>(
    sets: &[ChainSetApprox],
    grid: &DrivingGrid,
    cover: &BoxCover,
    mut out: W,
) -> io::Result<()> {
    let p = grid.dim();
    let d = cover.per_dim().len();
    let mut header = vec!["set".to_string()];
    header.extend((1..=p).map(|i| format!("c{i}")));
    header.push("box".into());
    header.extend((1..=d).map(|i| format!("lo{i}")));
    header.extend((1..=d).map(|i| format!("hi{i}")));
    writeln!(out, "{}", header.join(","))?;
    for (si, set) in sets.iter().enumerate() {
        for &n in set.nodes() {
            let (c, b) = (n / cover.box_count(), n % cover.box_count());
            let (lo, hi) = cover.corners(b);
            let mut row = vec![si.to_string()];
            row.extend(grid.multi_index(c).iter().map(usize::to_string));
            row.push(b.to_string());
            row.extend(lo.iter().chain(&hi).map(f64::to_string));
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}
