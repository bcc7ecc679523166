//! Uniform grids with an interior/boundary/exterior mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

impl NodeKind {
    fn to_char(self) -> char {
        match self {
            NodeKind::Interior => 'I',
            NodeKind::Boundary => 'B',
            NodeKind::Exterior => 'E',
        }
    }

    fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(NodeKind::Interior),
            'B' => Ok(NodeKind::Boundary),
            'E' => Ok(NodeKind::Exterior),
            _ => Err(Error::InvalidArgument(format!("mask character {c:?}"))),
        }
    }
}

/// Node values on `origin + h·(i, j)`, `0 ≤ i < nx`, `0 ≤ j < ny`, stored row-major with `j` outer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridFunction {
    pub origin: Point,
    pub h: f64,
    pub dims: [usize; 2],
    pub mask: Vec<NodeKind>,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    origin: Point,
    h: f64,
    dims: [usize; 2],
    mask: String,
    values: Vec<f64>,
}

impl TryFrom<GridRepr> for GridFunction {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        let mask = r.mask.chars().map(NodeKind::from_char).collect::<Result<Vec<_>>>()?;
        GridFunction::new(r.origin, r.h, r.dims, mask, r.values)
    }
}

impl From<GridFunction> for GridRepr {
    fn from(g: GridFunction) -> Self {
        GridRepr {
            origin: g.origin,
            h: g.h,
            dims: g.dims,
            mask: g.mask.iter().map(|k| k.to_char()).collect(),
            values: g.values,
        }
    }
}

pub const NEIGHBORS8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

impl GridFunction {
    pub fn new(origin: Point, h: f64, dims: [usize; 2], mask: Vec<NodeKind>, values: Vec<f64>) -> Result<Self> {
        let n = dims[0] * dims[1];
        if !(h > 0.0) || mask.len() != n || values.len() != n {
            return Err(Error::InvalidArgument("grid size mismatch".into()));
        }
        let g = GridFunction { origin, h, dims, mask, values };
        for k in 0..n {
            if g.mask[k] != NodeKind::Interior {
                continue;
            }
            let (i, j) = g.ij(k);
            for (di, dj) in NEIGHBORS8 {
                match g.index(i as isize + di, j as isize + dj) {
                    Some(m) if g.mask[m] != NodeKind::Exterior => {}
                    _ => return Err(Error::Stencil(k)),
                }
            }
        }
        Ok(g)
    }

    /// `(n+1)²` nodes on `[lo, hi]²`; the outer ring is boundary.
    pub fn square(n: usize, lo: f64, hi: f64, f: impl Fn(Point) -> f64) -> Result<Self> {
        let h = (hi - lo) / n as f64;
        let dims = [n + 1, n + 1];
        let mut mask = Vec::with_capacity(dims[0] * dims[1]);
        let mut values = Vec::with_capacity(dims[0] * dims[1]);
        for j in 0..=n {
            for i in 0..=n {
                let edge = i == 0 || j == 0 || i == n || j == n;
                mask.push(if edge { NodeKind::Boundary } else { NodeKind::Interior });
                values.push(f([lo + i as f64 * h, lo + j as f64 * h]));
            }
        }
        GridFunction::new([lo, lo], h, dims, mask, values)
    }

    /// Nodes with `inside` true are interior; the nodes 8-adjacent to them form the
    /// boundary collar. The grid must leave room for the collar.
    pub fn region(origin: Point, h: f64, dims: [usize; 2], inside: impl Fn(Point) -> bool, f: impl Fn(Point) -> f64) -> Result<Self> {
        let n = dims[0] * dims[1];
        let pos = |k: usize| [origin[0] + (k % dims[0]) as f64 * h, origin[1] + (k / dims[0]) as f64 * h];
        let mut mask = vec![NodeKind::Exterior; n];
        for k in 0..n {
            let (i, j) = (k % dims[0], k / dims[0]);
            if i > 0 && j > 0 && i + 1 < dims[0] && j + 1 < dims[1] && inside(pos(k)) {
                mask[k] = NodeKind::Interior;
            }
        }
        for k in 0..n {
            if mask[k] != NodeKind::Interior {
                continue;
            }
            let (i, j) = ((k % dims[0]) as isize, (k / dims[0]) as isize);
            for (di, dj) in NEIGHBORS8 {
                let m = ((j + dj) as usize) * dims[0] + (i + di) as usize;
                if mask[m] == NodeKind::Exterior {
                    mask[m] = NodeKind::Boundary;
                }
            }
        }
        let values = (0..n).map(|k| f(pos(k))).collect();
        GridFunction::new(origin, h, dims, mask, values)
    }

    /// Same grid and mask, new values.
    pub fn with_values(&self, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..self.len()).map(|k| f(self.point(k))).collect();
        GridFunction { values, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.dims[0], k / self.dims[0])
    }

    pub fn index(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.dims[0] || j as usize >= self.dims[1] {
            None
        } else {
            Some(j as usize * self.dims[0] + i as usize)
        }
    }

    pub fn point(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Value at the node offset by `(di, dj)` from node `k`.
    pub fn at(&self, k: usize, di: isize, dj: isize) -> f64 {
        let (i, j) = self.ij(k);
        self.values[self.index(i as isize + di, j as isize + dj).expect("stencil inside grid")]
    }

    pub fn interior(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.mask[k] == NodeKind::Interior).collect()
    }

    pub fn boundary(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.mask[k] == NodeKind::Boundary).collect()
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.origin == other.origin && self.h == other.h && self.dims == other.dims && self.mask == other.mask
    }

    pub fn max_abs_diff(&self, other: &GridFunction, kinds: &[NodeKind]) -> f64 {
        (0..self.len())
            .filter(|&k| kinds.contains(&self.mask[k]))
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }
}
