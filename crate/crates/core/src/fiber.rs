//! Unit-flux cell layout and the Floquet-Bloch secular matrix.
//!
//! The cell is a row of `q` degree-four vertices joined horizontally. In the
//! Landau gauge `A = B(0, x, 0)` the horizontal half-edges are field free and
//! the vertical half-edges of vertex `v` carry the constant potential `vB`.
//!
//! Every half-edge has length 1/2 and a local coordinate with the vertex at 0
//! and the far end at ±1/2. The wave function on it is
//!
//! ```text
//! horizontal:  c⁺ e^{ikx} + c⁻ e^{−ikx}
//! vertical:    e^{ivBy} (c⁺ e^{iky} + c⁻ e^{−iky})
//! ```
//!
//! so each half-edge contributes two unknowns and the cell has `8q` of them.
//! The rows of the secular matrix are
//!
//! * `4q` vertex rows `(ψ_{j+1} − ψ_j) + i(Dψ_{j+1} + Dψ_j) = 0`, edges taken
//!   counterclockwise (E, N, W, S) and quasi-derivatives pointing outward;
//! * `2q` horizontal rows matching value and derivative at the edge midpoints,
//!   the last pair closing the cell with the phase `e^{iθ1}`;
//! * `2q` vertical rows closing every vertical edge onto itself with `e^{iθ2}`.
//!
//! Derivative rows are divided by `ik`, which rescales the determinant by a
//! quasimomentum-independent factor. The negative spectrum uses the same code
//! with `k = iκ`.

use std::cell::RefCell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_sparse, lu_summary, CMatrix, LogDet, LuSummary, LuWorkspace};
use crate::model::{FluxRatio, Quasimomentum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Positive,
    Negative,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Positive => "positive",
            Regime::Negative => "negative",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Regime::Positive),
            "negative" => Ok(Regime::Negative),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

/// Momentum `k` (energy `k²`) or decay rate `κ` (energy `−κ²`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    regime: Regime,
    value: f64,
}

impl SpectralParameter {
    pub fn new(regime: Regime, value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidSpectralParameter(value));
        }
        Ok(SpectralParameter { regime, value })
    }

    pub fn positive(k: f64) -> Result<Self> {
        Self::new(Regime::Positive, k)
    }

    pub fn negative(kappa: f64) -> Result<Self> {
        Self::new(Regime::Negative, kappa)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn energy(&self) -> f64 {
        energy(self.regime, self.value)
    }

    /// The complex momentum entering the Ansatz: `k` or `iκ`.
    pub fn momentum(&self) -> Complex64 {
        match self.regime {
            Regime::Positive => Complex64::new(self.value, 0.0),
            Regime::Negative => Complex64::new(0.0, self.value),
        }
    }
}

pub fn energy(regime: Regime, value: f64) -> f64 {
    match regime {
        Regime::Positive => value * value,
        Regime::Negative => -value * value,
    }
}

/// Half-edge directions in counterclockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    East = 0,
    North = 1,
    West = 2,
    South = 3,
}

impl Direction {
    pub const CCW: [Direction; 4] = [
        Direction::East,
        Direction::North,
        Direction::West,
        Direction::South,
    ];

    pub fn is_vertical(self) -> bool {
        matches!(self, Direction::North | Direction::South)
    }

    /// Sign converting the coordinate derivative into the outward one.
    fn outward_sign(self) -> f64 {
        match self {
            Direction::East | Direction::North => 1.0,
            Direction::West | Direction::South => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfEdge {
    /// 1-based vertex index.
    pub vertex: u32,
    pub direction: Direction,
    pub length: f64,
    /// The vector potential along the edge is `gauge_multiple · B`.
    pub gauge_multiple: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    /// `East(east_vertex)` meets `West(east_vertex + 1)` inside the cell.
    Smooth { east_vertex: u32 },
    /// `East(q)` meets `West(1)` of the next cell, phase `e^{iθ1}`.
    HorizontalFloquet { east_vertex: u32 },
    /// `North(v)` meets `South(v)` of the cell above, phase `e^{iθ2}`.
    VerticalFloquet { vertex: u32 },
}

impl Link {
    /// Half-edge indices joined by the link.
    pub fn endpoints(&self, q: u32) -> (usize, usize) {
        match *self {
            Link::Smooth { east_vertex } => (
                half_edge_index(east_vertex, Direction::East),
                half_edge_index(east_vertex + 1, Direction::West),
            ),
            Link::HorizontalFloquet { east_vertex } => {
                debug_assert_eq!(east_vertex, q);
                (
                    half_edge_index(east_vertex, Direction::East),
                    half_edge_index(1, Direction::West),
                )
            }
            Link::VerticalFloquet { vertex } => (
                half_edge_index(vertex, Direction::North),
                half_edge_index(vertex, Direction::South),
            ),
        }
    }
}

/// Vertex-major half-edge index, then E, N, W, S.
pub fn half_edge_index(vertex: u32, direction: Direction) -> usize {
    4 * (vertex as usize - 1) + direction as usize
}

/// The `q`-vertex unit-flux cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    pub flux: FluxRatio,
    pub half_edges: Vec<HalfEdge>,
    pub links: Vec<Link>,
}

pub fn build_layout(flux: FluxRatio) -> CellLayout {
    let q = flux.q();
    let mut half_edges = Vec::with_capacity(4 * q as usize);
    for v in 1..=q {
        for d in Direction::CCW {
            half_edges.push(HalfEdge {
                vertex: v,
                direction: d,
                length: 0.5,
                gauge_multiple: if d.is_vertical() { v } else { 0 },
            });
        }
    }
    let mut links = Vec::with_capacity(2 * q as usize);
    for v in 1..q {
        links.push(Link::Smooth { east_vertex: v });
    }
    links.push(Link::HorizontalFloquet { east_vertex: q });
    for v in 1..=q {
        links.push(Link::VerticalFloquet { vertex: v });
    }
    CellLayout {
        flux,
        half_edges,
        links,
    }
}

impl CellLayout {
    pub fn q(&self) -> u32 {
        self.flux.q()
    }

    pub fn unknowns(&self) -> usize {
        2 * self.half_edges.len()
    }
}

/// What a row of the secular matrix expresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    /// Vertex condition between ccw edges `j` and `j+1`.
    Coupling { vertex: u32, j: u8 },
    Horizontal { east_vertex: u32, floquet: bool, derivative: bool },
    Vertical { vertex: u32, derivative: bool },
}

/// The `8q × 8q` secular system at fixed `z` and quasimomentum.
#[derive(Debug, Clone)]
pub struct FiberMatrix {
    pub matrix: CMatrix,
    pub rows: Vec<RowKind>,
}

impl FiberMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn lu(&self) -> Result<LuSummary> {
        lu_summary(self.matrix.clone())
    }
}

fn col(half_edge: usize, minus: bool) -> usize {
    2 * half_edge + minus as usize
}

pub fn assemble(z: SpectralParameter, qm: Quasimomentum, flux: FluxRatio) -> FiberMatrix {
    assemble_with(&build_layout(flux), z, qm)
}

/// Assemble against an existing layout.
pub fn assemble_with(layout: &CellLayout, z: SpectralParameter, qm: Quasimomentum) -> FiberMatrix {
    let (matrix, rows) = assemble_parts(layout, z, qm, true);
    FiberMatrix {
        matrix,
        rows: rows.unwrap_or_default(),
    }
}

fn assemble_parts(
    layout: &CellLayout,
    z: SpectralParameter,
    qm: Quasimomentum,
    with_rows: bool,
) -> (CMatrix, Option<Vec<RowKind>>) {
    let mut m = CMatrix::zeros(0);
    let kinds = fill_matrix(layout, z, qm, &mut m, with_rows, false, false);
    (m, kinds)
}

/// Write the fiber matrix into `m`, reusing its storage.
fn fill_matrix(
    layout: &CellLayout,
    z: SpectralParameter,
    qm: Quasimomentum,
    m: &mut CMatrix,
    with_rows: bool,
    assume_zeroed: bool,
    folded: bool,
) -> Option<Vec<RowKind>> {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let q = layout.q();
    let dim = layout.unknowns();
    let k = z.momentum();
    let half_fwd = (i * k * 0.5).exp();
    let half_bwd = (-i * k * 0.5).exp();
    let phase1 = Complex64::from_polar(1.0, qm.theta1());
    let phase2 = Complex64::from_polar(1.0, qm.theta2());

    if !assume_zeroed || m.dim() != dim {
        m.reset(dim);
    }
    let mut kinds = if with_rows {
        Some(Vec::with_capacity(dim))
    } else {
        None
    };
    let (order, block) = block_order(q, folded);
    let he = |v: u32, d: Direction| 4 * block[v as usize - 1] + d as usize;
    let mut r = 0;

    for &v in &order {
        for j in 0..4u8 {
            let here = Direction::CCW[j as usize];
            let next = Direction::CCW[(j as usize + 1) % 4];
            // value weight w, outward sign σ:  c⁺ → w − σk,  c⁻ → w + σk
            for (d, w) in [(next, 1.0), (here, -1.0)] {
                let e = he(v, d);
                let s = d.outward_sign();
                m[(r, col(e, false))] += w * one - s * k;
                m[(r, col(e, true))] += w * one + s * k;
            }
            if let Some(kinds) = kinds.as_mut() {
                kinds.push(RowKind::Coupling { vertex: v, j });
            }
            r += 1;
        }

        let north = he(v, Direction::North);
        let south = he(v, Direction::South);
        let gauge = layout.flux.half_gauge_phase(v);
        let g_north = Complex64::from_polar(1.0, gauge);
        let g_south = Complex64::from_polar(1.0, -gauge) * phase2;
        for (derivative, sign) in [(false, 1.0), (true, -1.0)] {
            m[(r, col(north, false))] = g_north * half_fwd;
            m[(r, col(north, true))] = sign * g_north * half_bwd;
            m[(r, col(south, false))] = -g_south * half_bwd;
            m[(r, col(south, true))] = -sign * g_south * half_fwd;
            if let Some(kinds) = kinds.as_mut() {
                kinds.push(RowKind::Vertical { vertex: v, derivative });
            }
            r += 1;
        }

        let floquet = v == q;
        let east = he(v, Direction::East);
        let west = he(if floquet { 1 } else { v + 1 }, Direction::West);
        let phi = if floquet { phase1 } else { one };
        for (derivative, sign) in [(false, 1.0), (true, -1.0)] {
            m[(r, col(east, false))] = half_fwd;
            m[(r, col(east, true))] = sign * half_bwd;
            m[(r, col(west, false))] = -phi * half_bwd;
            m[(r, col(west, true))] = -sign * phi * half_fwd;
            if let Some(kinds) = kinds.as_mut() {
                kinds.push(RowKind::Horizontal {
                    east_vertex: v,
                    floquet,
                    derivative,
                });
            }
            r += 1;
        }
    }
    debug_assert_eq!(r, dim);
    kinds
}

#[derive(Default)]
struct Scratch {
    q: Option<u32>,
    matrix: CMatrix,
    pattern: Vec<Vec<usize>>,
    workspace: LuWorkspace,
}

/// Vertex at each block position, and block position of each vertex.
///
/// The natural order is `1..=q`. The folded order `1, q, 2, q−1, …` turns the
/// cyclic horizontal link into a band, which keeps LU fill-in local; applying
/// the same permutation to row and column blocks leaves the determinant
/// unchanged.
fn block_order(q: u32, folded: bool) -> (Vec<u32>, Vec<usize>) {
    let order: Vec<u32> = if folded {
        let (mut lo, mut hi) = (1, q);
        let mut out = Vec::with_capacity(q as usize);
        while lo <= hi {
            out.push(lo);
            if hi != lo {
                out.push(hi);
            }
            lo += 1;
            hi -= 1;
        }
        out
    } else {
        (1..=q).collect()
    };
    let mut block = vec![0; q as usize];
    for (pos, &v) in order.iter().enumerate() {
        block[v as usize - 1] = pos;
    }
    (order, block)
}

/// Columns touched by each row of the folded assembly.
fn sparsity_pattern(layout: &CellLayout) -> Vec<Vec<usize>> {
    let q = layout.q();
    let (order, block) = block_order(q, true);
    let he = |v: u32, d: Direction| 4 * block[v as usize - 1] + d as usize;
    let pair = |e: usize| [col(e, false), col(e, true)];
    let mut rows = Vec::with_capacity(layout.unknowns());
    for &v in &order {
        for j in 0..4 {
            let here = he(v, Direction::CCW[j]);
            let next = he(v, Direction::CCW[(j + 1) % 4]);
            rows.push([pair(here), pair(next)].concat());
        }
        let north = he(v, Direction::North);
        let south = he(v, Direction::South);
        for _ in 0..2 {
            rows.push([pair(north), pair(south)].concat());
        }
        let east = he(v, Direction::East);
        let west = he(if v == q { 1 } else { v + 1 }, Direction::West);
        for _ in 0..2 {
            rows.push([pair(east), pair(west)].concat());
        }
    }
    for r in rows.iter_mut() {
        r.sort_unstable();
    }
    rows
}

/// `ln det` of the fiber matrix.
pub fn fiber_log_det(layout: &CellLayout, z: SpectralParameter, qm: Quasimomentum) -> Result<LogDet> {
    thread_local! {
        static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
    }
    SCRATCH.with(|cell| {
        let mut s = cell.borrow_mut();
        let s = &mut *s;
        if s.q != Some(layout.q()) {
            s.pattern = sparsity_pattern(layout);
            s.q = Some(layout.q());
        }
        // lu_sparse leaves the matrix zeroed, so refills skip the reset
        fill_matrix(layout, z, qm, &mut s.matrix, false, true, true);
        let out = lu_sparse(&mut s.matrix, &s.pattern, &mut s.workspace);
        if out.is_err() {
            s.matrix.reset(0);
        }
        out.map(|r| r.log_det)
    })
}

/// The fiber determinant carries the quasimomentum phase `e^{i(θ1 + qθ2)}`
/// in front of a function of Θ_q alone; this removes it.
pub fn normalized_fiber_log_det(
    layout: &CellLayout,
    z: SpectralParameter,
    qm: Quasimomentum,
) -> Result<LogDet> {
    let q = layout.q() as f64;
    fiber_log_det(layout, z, qm).map(|d| d.rotated(-(qm.theta1() + q * qm.theta2())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_flux;
    use std::collections::HashSet;

    #[test]
    fn layout_counts_q2() {
        let layout = build_layout(make_flux(1, 2).unwrap());
        assert_eq!(layout.half_edges.len(), 8);
        assert_eq!(layout.unknowns(), 16);
    }

    #[test]
    fn layout_gauge_slopes_q3() {
        let layout = build_layout(make_flux(1, 3).unwrap());
        let slopes: Vec<u32> = layout
            .half_edges
            .iter()
            .filter(|h| h.direction == Direction::North)
            .map(|h| h.gauge_multiple)
            .collect();
        assert_eq!(slopes, vec![1, 2, 3]);
        assert!(layout
            .half_edges
            .iter()
            .filter(|h| !h.direction.is_vertical())
            .all(|h| h.gauge_multiple == 0));
    }

    #[test]
    fn every_half_edge_in_exactly_one_link() {
        for q in 2..=12 {
            for flux in crate::model::coprime_fluxes(q).into_iter().filter(|f| f.q() == q) {
                let layout = build_layout(flux);
                let mut seen = HashSet::new();
                for link in &layout.links {
                    let (a, b) = link.endpoints(q);
                    assert!(seen.insert(a), "{flux}: half-edge {a} twice");
                    assert!(seen.insert(b), "{flux}: half-edge {b} twice");
                }
                assert_eq!(seen.len(), 4 * q as usize);
            }
        }
    }

    #[test]
    fn row_count_audit() {
        for flux in crate::model::coprime_fluxes(12) {
            let q = flux.q() as usize;
            let fm = assemble(
                SpectralParameter::positive(2.3).unwrap(),
                Quasimomentum::new(0.1, -0.4).unwrap(),
                flux,
            );
            assert_eq!(fm.dim(), 8 * q);
            let coupling = fm.rows.iter().filter(|r| matches!(r, RowKind::Coupling { .. })).count();
            let horizontal = fm.rows.iter().filter(|r| matches!(r, RowKind::Horizontal { .. })).count();
            let vertical = fm.rows.iter().filter(|r| matches!(r, RowKind::Vertical { .. })).count();
            assert_eq!((coupling, horizontal, vertical), (4 * q, 2 * q, 2 * q));
            assert!(fm.matrix.is_finite());
            for row in 0..fm.dim() {
                assert_eq!(fm.matrix.nonzeros_in_row(row), 4);
            }
        }
    }

    #[test]
    fn pattern_covers_assembly_and_matches_dense_lu() {
        let mut fluxes = crate::model::coprime_fluxes(7);
        fluxes.insert(0, FluxRatio::baseline());
        for flux in fluxes {
            let layout = build_layout(flux);
            let pattern = sparsity_pattern(&layout);
            for (z, qm) in [(2.3, (0.1, -0.4)), (0.7, (-3.0, 1.2))] {
                let z = SpectralParameter::positive(z).unwrap();
                let qm = Quasimomentum::new(qm.0, qm.1).unwrap();
                let fm = assemble_with(&layout, z, qm);
                let mut folded = CMatrix::zeros(0);
                fill_matrix(&layout, z, qm, &mut folded, false, false, true);
                for (r, cols) in pattern.iter().enumerate() {
                    for (c, v) in folded.row(r).iter().enumerate() {
                        if *v != Complex64::new(0.0, 0.0) {
                            assert!(cols.contains(&c), "{flux}: ({r},{c}) outside pattern");
                        }
                    }
                }
                let dense = fm.lu().unwrap().log_det;
                let sparse = fiber_log_det(&layout, z, qm).unwrap();
                assert!((dense.log_magnitude - sparse.log_magnitude).abs() < 1e-12);
                assert!(crate::linalg::wrap_phase(dense.phase - sparse.phase).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_parameter_validation() {
        assert!(SpectralParameter::positive(0.0).is_err());
        assert!(SpectralParameter::negative(-1.0).is_err());
        assert!(SpectralParameter::positive(f64::NAN).is_err());
        let z = SpectralParameter::negative(2.0).unwrap();
        assert_eq!(z.energy(), -4.0);
        assert_eq!(z.momentum(), Complex64::new(0.0, 2.0));
    }
}
