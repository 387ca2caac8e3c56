//! Structured 1D/2D grids, nodal fields and the element quadrature shared by
//! every integral in the crate.
//!
//! Nodes are numbered row-major with x fastest: node `(i, j)` has index
//! `j * (nx + 1) + i`. In 1D the y axis is absent and `j` is always zero.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::Pattern;

/// A named side of the domain. In 1D only `Left` (x = 0) and `Right` (x = L) exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Left,
    Right,
    Bottom,
    Top,
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Face::Left => "left",
            Face::Right => "right",
            Face::Bottom => "bottom",
            Face::Top => "top",
        };
        f.write_str(name)
    }
}

impl FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Face::Left),
            "right" => Ok(Face::Right),
            "bottom" => Ok(Face::Bottom),
            "top" => Ok(Face::Top),
            other => Err(Error::InvalidGrid(format!("unknown face '{other}'"))),
        }
    }
}

/// One Gauss point of the reference element, already mapped to the physical cell.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    /// Quadrature weight times the cell measure.
    pub weight: f64,
    pub shape: [f64; 4],
    pub grad: [[f64; 2]; 4],
}

/// Linear segments (1D) or bilinear quadrilaterals (2D) with a 2-point Gauss rule per axis.
/// All cells of a structured grid are congruent, so one rule serves every element.
#[derive(Debug, Clone)]
pub struct ElementRule {
    pub nodes_per_element: usize,
    pub points: Vec<QuadPoint>,
}

const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9; // (1 - 1/sqrt 3) / 2
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;

impl ElementRule {
    fn new(spacing: &[f64]) -> Self {
        let gauss = [GAUSS_LO, GAUSS_HI];
        match spacing {
            [hx] => {
                let points = gauss
                    .iter()
                    .map(|&s| QuadPoint {
                        weight: 0.5 * hx,
                        shape: [1.0 - s, s, 0.0, 0.0],
                        grad: [[-1.0 / hx, 0.0], [1.0 / hx, 0.0], [0.0; 2], [0.0; 2]],
                    })
                    .collect();
                Self {
                    nodes_per_element: 2,
                    points,
                }
            }
            [hx, hy] => {
                let mut points = Vec::with_capacity(4);
                for &t in &gauss {
                    for &s in &gauss {
                        // local node order: (0,0) (1,0) (1,1) (0,1)
                        let shape = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
                        let grad = [
                            [-(1.0 - t) / hx, -(1.0 - s) / hy],
                            [(1.0 - t) / hx, -s / hy],
                            [t / hx, s / hy],
                            [-t / hx, (1.0 - s) / hy],
                        ];
                        points.push(QuadPoint {
                            weight: 0.25 * hx * hy,
                            shape,
                            grad,
                        });
                    }
                }
                Self {
                    nodes_per_element: 4,
                    points,
                }
            }
            _ => unreachable!("grid dimension is validated before the rule is built"),
        }
    }
}

/// Structured discretization of a segment `[0, Lx]` or rectangle `[0, Lx] x [0, Ly]`.
#[derive(Debug, Clone)]
pub struct Grid {
    extents: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    dirichlet_faces: Vec<Face>,
    dirichlet: Vec<bool>,
    elements: Vec<[usize; 4]>,
    pattern: Arc<Pattern>,
    element_slots: Vec<usize>,
    rule: ElementRule,
}

impl Grid {
    /// Builds a grid with `counts[d]` cells along axis `d`; `dirichlet` lists the
    /// faces whose nodes carry prescribed displacement (and `v = 1`).
    pub fn new(extents: &[f64], counts: &[usize], dirichlet: &[Face]) -> Result<Arc<Self>> {
        let dim = extents.len();
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if counts.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} cell counts given for a {dim}D grid",
                counts.len()
            )));
        }
        for (&l, &n) in extents.iter().zip(counts) {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("extent must be positive, got {l}")));
            }
            if n == 0 {
                return Err(Error::InvalidGrid("cell count must be at least 1".into()));
            }
        }
        for face in dirichlet {
            if dim == 1 && matches!(face, Face::Bottom | Face::Top) {
                return Err(Error::InvalidGrid(format!("face '{face}' does not exist in 1D")));
            }
        }
        let spacing: Vec<f64> = extents.iter().zip(counts).map(|(&l, &n)| l / n as f64).collect();

        let nx = counts[0];
        let ny = if dim == 2 { counts[1] } else { 0 };
        let n_nodes = (nx + 1) * (ny + 1);
        let mut mask = vec![false; n_nodes];
        for j in 0..=ny {
            for i in 0..=nx {
                let on = dirichlet.iter().any(|f| match f {
                    Face::Left => i == 0,
                    Face::Right => i == nx,
                    Face::Bottom => j == 0,
                    Face::Top => j == ny,
                });
                mask[j * (nx + 1) + i] = on;
            }
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidGrid("Dirichlet specification selects no nodes".into()));
        }

        let mut elements = Vec::with_capacity(nx * ny.max(1));
        if dim == 1 {
            for e in 0..nx {
                elements.push([e, e + 1, 0, 0]);
            }
        } else {
            for j in 0..ny {
                for i in 0..nx {
                    let n0 = j * (nx + 1) + i;
                    let n3 = n0 + nx + 1;
                    elements.push([n0, n0 + 1, n3 + 1, n3]);
                }
            }
        }
        let rule = ElementRule::new(&spacing);
        let nl = rule.nodes_per_element;

        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for el in &elements {
            for &a in &el[..nl] {
                rows[a].extend_from_slice(&el[..nl]);
            }
        }
        let pattern = Arc::new(Pattern::from_rows(rows));
        let mut element_slots = Vec::with_capacity(elements.len() * nl * nl);
        for el in &elements {
            for &a in &el[..nl] {
                for &b in &el[..nl] {
                    element_slots.push(pattern.slot(a, b).expect("element entry in pattern"));
                }
            }
        }

        Ok(Arc::new(Self {
            extents: extents.to_vec(),
            counts: counts.to_vec(),
            spacing,
            dirichlet_faces: dirichlet.to_vec(),
            dirichlet: mask,
            elements,
            pattern,
            element_slots,
            rule,
        }))
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dirichlet_faces(&self) -> &[Face] {
        &self.dirichlet_faces
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    /// Nodes per axis.
    pub fn nodes_per_axis(&self) -> [usize; 2] {
        [self.counts[0] + 1, self.counts.get(1).map_or(1, |n| n + 1)]
    }

    pub fn n_nodes(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Measure of the domain (length or area).
    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.counts[0] + 1) + i
    }

    /// Coordinates of a node; the second entry is zero in 1D.
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let nxp = self.counts[0] + 1;
        let i = node % nxp;
        let j = node / nxp;
        [
            i as f64 * self.spacing[0],
            if self.dim() == 2 {
                j as f64 * self.spacing[1]
            } else {
                0.0
            },
        ]
    }

    /// Node indices of each element, `nodes_per_element` of them used.
    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn rule(&self) -> &ElementRule {
        &self.rule
    }

    pub(crate) fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    /// CSR slots of the local element matrix of element `e`, row-major over local nodes.
    pub(crate) fn element_slots(&self, e: usize) -> &[usize] {
        let nl = self.rule.nodes_per_element;
        &self.element_slots[e * nl * nl..(e + 1) * nl * nl]
    }

    /// Whether two grids discretize the same domain with the same nodes.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.counts == other.counts && self.extents == other.extents
    }
}

/// Nodal scalar values on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_layout(&other.grid) && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|k| f(grid.coords(k))).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(&self.grid, values)
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        self.ensure_on(&other.grid)
    }

    pub fn ensure_on(&self, grid: &Grid) -> Result<()> {
        if self.grid.same_layout(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: grid.n_nodes(),
                got: self.values.len(),
            })
        }
    }

    /// Checks `0 <= v <= 1` at every node.
    pub fn validate_phase(&self) -> Result<()> {
        match self.values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            None => Ok(()),
            Some(k) => Err(Error::InvalidField(format!(
                "phase field value {} at node {k} outside [0, 1]",
                self.values[k]
            ))),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    /// Value and gradient at a quadrature point of element `e`.
    #[inline]
    pub(crate) fn eval_at(&self, element: &[usize; 4], q: &QuadPoint, nl: usize) -> (f64, [f64; 2]) {
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for a in 0..nl {
            let z = self.values[element[a]];
            val += q.shape[a] * z;
            grad[0] += q.grad[a][0] * z;
            grad[1] += q.grad[a][1] * z;
        }
        (val, grad)
    }

    /// Writes the plain-text snapshot: header `dim nx [ny] hx [hy]`, then one value per line.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let mut header = vec![g.dim().to_string()];
        header.extend(g.counts().iter().map(|n| n.to_string()));
        header.extend(g.spacing().iter().map(|h| format!("{h:e}")));
        writeln!(w, "{}", header.join(" "))?;
        for v in &self.values {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }

    /// Reads a snapshot written by [`Field::write_snapshot`], checking that its header
    /// matches `grid`.
    pub fn read_snapshot<R: BufRead>(grid: &Arc<Grid>, r: R) -> Result<Field> {
        let malformed = |reason: String| Error::Malformed {
            path: "<snapshot>".into(),
            reason,
        };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| malformed("empty snapshot".into()))??;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let dim: usize = tokens
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(format!("bad header '{header}'")))?;
        if dim != grid.dim() || tokens.len() != 1 + 2 * dim {
            return Err(malformed(format!(
                "header '{header}' does not match a {}D grid",
                grid.dim()
            )));
        }
        for d in 0..dim {
            let n: usize = tokens[1 + d]
                .parse()
                .map_err(|_| malformed(format!("bad cell count '{}'", tokens[1 + d])))?;
            let h: f64 = tokens[1 + dim + d]
                .parse()
                .map_err(|_| malformed(format!("bad spacing '{}'", tokens[1 + dim + d])))?;
            if n != grid.counts()[d] || (h - grid.spacing()[d]).abs() > 1e-12 * h.abs() {
                return Err(malformed(format!("header '{header}' does not match the grid")));
            }
        }
        let mut values = Vec::with_capacity(grid.n_nodes());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(t.parse::<f64>().map_err(|_| malformed(format!("bad value '{t}'")))?);
        }
        Field::new(grid, values)
    }
}
