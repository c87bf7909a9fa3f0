//! Elastic overlap energy of a layout and its analytic gradient.
//!
//! Every circle `i` carries `U_i = d_0i^2 + sum_{j != i} d_ij^2`, where `d_0i`
//! is its overlap depth with the container wall and `d_ij` the overlap depth
//! with circle `j`. A subset energy sums `U_i` over the selected circles only,
//! so a pair with both members selected is counted twice and a pair straddling
//! the selection boundary once. The full energy is the subset energy of the
//! full selection.
//!
//! Terms are accumulated circle by circle in ascending index order (container
//! term first, then partners in ascending index), which makes the grid-pruned
//! and the all-pairs evaluation bit-identical.

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::instance::{GroupSelection, Instance, Layout, Point};

/// Overlapping pairs closer than this have no usable gradient direction.
pub const SINGULAR_DISTANCE: f64 = 1e-12;

/// Up to this many circles the neighbor grid is skipped.
const ALL_PAIRS_LIMIT: usize = 64;

const NOT_SELECTED: u32 = u32::MAX;

pub fn circle_overlap_depth(a: Point, b: Point) -> f64 {
    (2.0 - a.distance(b)).max(0.0)
}

pub fn container_overlap_depth(center: Point, radius: f64) -> f64 {
    (center.norm() + 1.0 - radius).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub total_energy: f64,
    pub max_pair_overlap: f64,
    pub max_container_overlap: f64,
    pub gradient_norm: f64,
}

impl EnergyReport {
    pub fn is_overlap_free(&self) -> bool {
        self.max_pair_overlap == 0.0 && self.max_container_overlap == 0.0
    }
}

/// Energy of the selected circles, holding the rest of the layout fixed.
pub fn subset_energy(layout: &Layout, selection: &GroupSelection, instance: &Instance) -> Result<f64> {
    instance.check_layout(layout)?;
    selection.check_against(instance)?;
    let mut eval = GroupEnergy::new(layout.centers(), selection.indices(), instance.radius());
    let x = eval.gather();
    Ok(eval.precise_energy(&x))
}

/// Full energy together with the largest overlap depths and the gradient norm.
///
/// Coincident overlapping pairs contribute nothing to the reported gradient
/// norm (their direction is undefined); the energy itself is unaffected.
pub fn total_energy(layout: &Layout, instance: &Instance) -> Result<EnergyReport> {
    instance.check_layout(layout)?;
    let selection: Vec<usize> = (0..instance.n()).collect();
    let mut eval = GroupEnergy::new(layout.centers(), &selection, instance.radius());
    let x = eval.gather();
    let mut grad = vec![0.0; x.len()];
    let acc = eval
        .accumulate(&x, Some(&mut grad), false)
        .expect("lenient evaluation cannot fail");
    Ok(EnergyReport {
        total_energy: eval.precise_energy(&x),
        max_pair_overlap: acc.max_pair,
        max_container_overlap: acc.max_container,
        gradient_norm: norm(&grad),
    })
}

/// Gradient of [`subset_energy`] with respect to each selected center, in
/// selection order.
pub fn subset_gradient(
    layout: &Layout,
    selection: &GroupSelection,
    instance: &Instance,
) -> Result<Vec<Point>> {
    instance.check_layout(layout)?;
    selection.check_against(instance)?;
    let mut eval = GroupEnergy::new(layout.centers(), selection.indices(), instance.radius());
    let x = eval.gather();
    let mut grad = vec![0.0; x.len()];
    eval.energy_and_gradient(&x, &mut grad)?;
    Ok(grad.chunks_exact(2).map(|g| Point::new(g[0], g[1])).collect())
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Accumulated {
    pub energy: f64,
    pub max_pair: f64,
    pub max_container: f64,
}

#[derive(Clone, Copy)]
struct Partner {
    index: usize,
    depth: f64,
    dx: f64,
    dy: f64,
    distance: f64,
    selected: bool,
}

/// Uniform grid geometry; cells are at least 2 wide so overlapping circles
/// always sit in the same or adjacent cells. Out-of-box points clamp to the
/// border cells, which keeps that property.
#[derive(Clone, Debug)]
struct GridShape {
    min_x: f64,
    min_y: f64,
    inv_cell: f64,
    cols: usize,
    rows: usize,
}

impl GridShape {
    fn covering(points: &[Point], radius: f64) -> GridShape {
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (-radius, -radius, radius, radius);
        for p in points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let (w, h) = (max_x - min_x, max_y - min_y);
        let max_cells = (4 * points.len() + 16) as f64;
        let mut cell: f64 = 2.0;
        if (w / cell + 1.0) * (h / cell + 1.0) > max_cells {
            cell = cell.max((w * h / max_cells).sqrt() * 1.5);
        }
        let cols = ((w / cell).floor() as usize + 1).max(1);
        let rows = ((h / cell).floor() as usize + 1).max(1);
        GridShape {
            min_x,
            min_y,
            inv_cell: 1.0 / cell,
            cols,
            rows,
        }
    }

    fn cell_coords(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x - self.min_x) * self.inv_cell).floor();
        let cy = ((y - self.min_y) * self.inv_cell).floor();
        let clamp = |v: f64, hi: usize| -> usize {
            if v.is_nan() || v <= 0.0 {
                0
            } else if v >= hi as f64 {
                hi - 1
            } else {
                v as usize
            }
        };
        (clamp(cx, self.cols), clamp(cy, self.rows))
    }

    fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    fn neighborhood(&self, x: f64, y: f64) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        let (cx, cy) = self.cell_coords(x, y);
        (
            cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1),
            cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1),
        )
    }
}

/// Items bucketed by cell (counting sort).
#[derive(Clone, Debug, Default)]
struct CellIndex {
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl CellIndex {
    fn rebuild(&mut self, shape: &GridShape, items: impl Iterator<Item = (u32, f64, f64)> + Clone) {
        let cells = shape.cell_count();
        self.starts.clear();
        self.starts.resize(cells + 1, 0);
        let mut count = 0;
        for (_, x, y) in items.clone() {
            let (cx, cy) = shape.cell_coords(x, y);
            self.starts[cy * shape.cols + cx + 1] += 1;
            count += 1;
        }
        for c in 0..cells {
            self.starts[c + 1] += self.starts[c];
        }
        self.items.clear();
        self.items.resize(count, 0);
        let mut cursor = self.starts.clone();
        for (id, x, y) in items {
            let (cx, cy) = shape.cell_coords(x, y);
            let slot = &mut cursor[cy * shape.cols + cx];
            self.items[*slot as usize] = id;
            *slot += 1;
        }
    }

    fn cell(&self, shape: &GridShape, cx: usize, cy: usize) -> &[u32] {
        let c = cy * shape.cols + cx;
        &self.items[self.starts[c] as usize..self.starts[c + 1] as usize]
    }
}

enum Neighbors {
    AllPairs,
    Grid {
        shape: GridShape,
        complement: CellIndex,
        selected: CellIndex,
    },
}

/// Energy of one movable group, evaluated at trial positions.
///
/// Trial positions are a flat vector `[x_0, y_0, x_1, y_1, ...]` over the
/// selection; everything outside the selection is read from the base layout.
pub(crate) struct GroupEnergy<'a> {
    base: &'a [Point],
    selection: &'a [usize],
    slot: Vec<u32>,
    radius: f64,
    neighbors: Neighbors,
    partners: Vec<Partner>,
}

impl<'a> GroupEnergy<'a> {
    pub fn new(base: &'a [Point], selection: &'a [usize], radius: f64) -> Self {
        let n = base.len();
        let mut slot = vec![NOT_SELECTED; n];
        for (k, &i) in selection.iter().enumerate() {
            slot[i] = k as u32;
        }
        let neighbors = if n <= ALL_PAIRS_LIMIT {
            Neighbors::AllPairs
        } else {
            let shape = GridShape::covering(base, radius);
            let mut complement = CellIndex::default();
            complement.rebuild(
                &shape,
                base.iter()
                    .enumerate()
                    .filter(|(j, _)| slot[*j] == NOT_SELECTED)
                    .map(|(j, p)| (j as u32, p.x, p.y)),
            );
            Neighbors::Grid {
                shape,
                complement,
                selected: CellIndex::default(),
            }
        };
        GroupEnergy {
            base,
            selection,
            slot,
            radius,
            neighbors,
            partners: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.selection.len()
    }

    /// Current positions of the selected circles, flattened.
    pub fn gather(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for &i in self.selection {
            x.push(self.base[i].x);
            x.push(self.base[i].y);
        }
        x
    }

    pub fn energy(&mut self, x: &[f64]) -> f64 {
        self.accumulate(x, None, false)
            .expect("energy evaluation cannot fail")
            .energy
    }

    pub fn energy_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.accumulate(x, Some(grad), true).map(|a| a.energy)
    }

    fn index_selected(&mut self, x: &[f64]) {
        if let Neighbors::Grid { shape, selected, .. } = &mut self.neighbors {
            if self.selection.len() > ALL_PAIRS_LIMIT {
                selected.rebuild(
                    shape,
                    x.chunks_exact(2)
                        .enumerate()
                        .map(|(k, p)| (k as u32, p[0], p[1])),
                );
            }
        }
    }

    /// The energy summed in double-double arithmetic and rounded once, so a
    /// genuine decrease can never be reported as an increase.
    pub fn precise_energy(&mut self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.index_selected(x);
        let mut sum = TwoFloat::from(0.0);
        let mut partners = std::mem::take(&mut self.partners);
        for (k, &i) in self.selection.iter().enumerate() {
            let p = Point::new(x[2 * k], x[2 * k + 1]);
            let reach = (TwoFloat::new_mul(p.x, p.x) + TwoFloat::new_mul(p.y, p.y)).sqrt();
            let wall = reach + 1.0 - self.radius;
            if wall.hi() > 0.0 {
                sum += wall * wall;
            }
            partners.clear();
            self.collect_partners(i, p, x, &mut partners);
            for q in &partners {
                let other = self.position(q.index, x);
                let dx = TwoFloat::new_sub(p.x, other.x);
                let dy = TwoFloat::new_sub(p.y, other.y);
                let depth = 2.0 - (dx * dx + dy * dy).sqrt();
                if depth.hi() > 0.0 {
                    sum += depth * depth;
                }
            }
        }
        self.partners = partners;
        f64::from(sum)
    }

    /// One pass over the selection. With `strict`, a coincident overlapping
    /// pair aborts the gradient; otherwise it contributes no gradient.
    pub fn accumulate(&mut self, x: &[f64], mut grad: Option<&mut [f64]>, strict: bool) -> Result<Accumulated> {
        debug_assert_eq!(x.len(), self.dim());
        self.index_selected(x);
        let mut acc = Accumulated::default();
        let mut partners = std::mem::take(&mut self.partners);
        for (k, &i) in self.selection.iter().enumerate() {
            let p = Point::new(x[2 * k], x[2 * k + 1]);
            let wall = container_overlap_depth(p, self.radius);
            acc.energy += wall * wall;
            acc.max_container = acc.max_container.max(wall);

            partners.clear();
            self.collect_partners(i, p, x, &mut partners);
            if partners.len() > 1 {
                partners.sort_unstable_by_key(|q| q.index);
            }
            for q in &partners {
                acc.energy += q.depth * q.depth;
                acc.max_pair = acc.max_pair.max(q.depth);
            }

            if let Some(g) = grad.as_deref_mut() {
                let (mut gx, mut gy) = (0.0, 0.0);
                if wall > 0.0 {
                    let r = p.norm();
                    if r > 0.0 {
                        gx += 2.0 * wall * p.x / r;
                        gy += 2.0 * wall * p.y / r;
                    }
                }
                if strict {
                    if let Some(q) = partners.iter().find(|q| q.distance < SINGULAR_DISTANCE) {
                        let err = Error::Singular {
                            first: i.min(q.index),
                            second: i.max(q.index),
                            distance: q.distance,
                        };
                        self.partners = partners;
                        return Err(err);
                    }
                }
                for q in &partners {
                    if q.distance < SINGULAR_DISTANCE {
                        continue;
                    }
                    let weight = if q.selected { 4.0 } else { 2.0 };
                    let scale = -weight * q.depth / q.distance;
                    gx += scale * q.dx;
                    gy += scale * q.dy;
                }
                g[2 * k] = gx;
                g[2 * k + 1] = gy;
            }
        }
        self.partners = partners;
        Ok(acc)
    }

    fn partner(&self, j: usize, p: Point, q: Point) -> Option<Partner> {
        let (dx, dy) = (p.x - q.x, p.y - q.y);
        let distance = dx.hypot(dy);
        let depth = 2.0 - distance;
        (depth > 0.0).then_some(Partner {
            index: j,
            depth,
            dx,
            dy,
            distance,
            selected: self.slot[j] != NOT_SELECTED,
        })
    }

    fn position(&self, j: usize, x: &[f64]) -> Point {
        match self.slot[j] {
            NOT_SELECTED => self.base[j],
            k => Point::new(x[2 * k as usize], x[2 * k as usize + 1]),
        }
    }

    fn collect_partners(&self, i: usize, p: Point, x: &[f64], out: &mut Vec<Partner>) {
        match &self.neighbors {
            Neighbors::AllPairs => {
                for j in 0..self.base.len() {
                    if j != i {
                        if let Some(q) = self.partner(j, p, self.position(j, x)) {
                            out.push(q);
                        }
                    }
                }
            }
            Neighbors::Grid {
                shape,
                complement,
                selected,
            } => {
                let (cols, rows) = shape.neighborhood(p.x, p.y);
                for cy in rows {
                    for cx in cols.clone() {
                        for &j in complement.cell(shape, cx, cy) {
                            let j = j as usize;
                            if let Some(q) = self.partner(j, p, self.base[j]) {
                                out.push(q);
                            }
                        }
                        if self.selection.len() > ALL_PAIRS_LIMIT {
                            for &t in selected.cell(shape, cx, cy) {
                                let j = self.selection[t as usize];
                                if j != i {
                                    let t = t as usize;
                                    let q = Point::new(x[2 * t], x[2 * t + 1]);
                                    if let Some(q) = self.partner(j, p, q) {
                                        out.push(q);
                                    }
                                }
                            }
                        }
                    }
                }
                if self.selection.len() <= ALL_PAIRS_LIMIT {
                    for (t, &j) in self.selection.iter().enumerate() {
                        if j != i {
                            let q = Point::new(x[2 * t], x[2 * t + 1]);
                            if let Some(q) = self.partner(j, p, q) {
                                out.push(q);
                            }
                        }
                    }
                }
            }
        }
    }
}
