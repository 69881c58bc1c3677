//! Simplices, Kuhn triangulation of boxes and longest-edge bisection.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::enclosure::AffineForm;
use crate::error::{Error, Result};

pub use crate::safe_set::{classify_safe, SafeClass};

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dims("box bounds", lo.len(), hi.len()));
        }
        if lo.is_empty() {
            return Err(Error::InvalidParameter("box must have at least one axis".into()));
        }
        for (axis, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::DegenerateBox { axis });
            }
        }
        Ok(StateBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }
}

/// `n + 1` affinely independent points in `ℝⁿ`, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    vertices: Array2<f64>,
    pub depth: u32,
    pub id: u64,
    pub parent_id: Option<u64>,
}

impl Simplex {
    pub fn new(vertices: Array2<f64>, depth: u32, id: u64, parent_id: Option<u64>) -> Result<Self> {
        let (rows, n) = vertices.dim();
        if n == 0 || rows != n + 1 {
            return Err(Error::dims("simplex vertex count", n + 1, rows));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite simplex vertex".into()));
        }
        let s = Simplex {
            vertices,
            depth,
            id,
            parent_id,
        };
        let volume = s.volume();
        if !(volume > 0.0) {
            return Err(Error::DegenerateSimplex { volume });
        }
        Ok(s)
    }

    /// Root simplex from vertex rows, depth 0 and id 0.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut v = Array2::zeros((rows.len(), n));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::dims("simplex vertex", n, r.len()));
            }
            for (j, x) in r.iter().enumerate() {
                v[[i, j]] = *x;
            }
        }
        Simplex::new(v, 0, 0, None)
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub fn dim(&self) -> usize {
        self.vertices.ncols()
    }

    pub fn vertices(&self) -> ArrayView2<'_, f64> {
        self.vertices.view()
    }

    pub fn vertex(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vertices.row(i)
    }

    pub fn vertex_rows(&self) -> Vec<Vec<f64>> {
        self.vertices.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn edge_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |r, c| self.vertices[[c + 1, r]] - self.vertices[[0, r]])
    }

    /// `|det(v₁ − v₀, …, vₙ − v₀)| / n!`.
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        self.edge_matrix().determinant().abs() / fact
    }

    pub fn barycenter(&self) -> Vec<f64> {
        let k = self.vertices.nrows() as f64;
        self.vertices.sum_axis(ndarray::Axis(0)).mapv(|v| v / k).to_vec()
    }

    /// Longest edge length.
    pub fn diameter(&self) -> f64 {
        let (i, j) = self.longest_edge();
        self.edge_len2(i, j).sqrt()
    }

    fn edge_len2(&self, i: usize, j: usize) -> f64 {
        let a = self.vertices.row(i);
        let b = self.vertices.row(j);
        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Longest edge `(i, j)`, `i < j`; ties go to the lexicographically smallest pair.
    pub fn longest_edge(&self) -> (usize, usize) {
        let k = self.vertices.nrows();
        let mut best = (0, 1);
        let mut best_len = f64::NEG_INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                let len = self.edge_len2(i, j);
                if len > best_len {
                    best_len = len;
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Per-axis `(min, max)` of the vertices.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for row in self.vertices.rows() {
            for (k, v) in row.iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        (lo, hi)
    }

    /// Affine barycentric coordinate functions `λ₀ … λₙ`.
    pub fn barycentric_forms(&self) -> Result<Vec<AffineForm>> {
        let n = self.dim();
        let inv = self
            .edge_matrix()
            .try_inverse()
            .ok_or(Error::DegenerateSimplex { volume: self.volume() })?;
        let v0: Vec<f64> = self.vertices.row(0).to_vec();
        let mut forms = Vec::with_capacity(n + 1);
        let mut sum = AffineForm::zeros(n);
        for i in 0..n {
            let coeffs: Vec<f64> = (0..n).map(|c| inv[(i, c)]).collect();
            let offset = -coeffs.iter().zip(&v0).map(|(a, b)| a * b).sum::<f64>();
            let f = AffineForm::new(coeffs, offset);
            sum.add_scaled(1.0, &f);
            forms.push(f);
        }
        let mut l0 = sum.scaled(-1.0);
        l0.offset += 1.0;
        forms.insert(0, l0);
        Ok(forms)
    }

    /// `Σ λᵢ vᵢ`.
    pub fn point_at(&self, lambda: &[f64]) -> Vec<f64> {
        debug_assert_eq!(lambda.len(), self.vertices.nrows());
        let l = ArrayView1::from(lambda);
        l.dot(&self.vertices).to_vec()
    }

    /// Whether `x` lies in the simplex, with barycentric slack `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self.barycentric_forms() {
            Ok(forms) => forms.iter().all(|f| f.eval(x) >= -tol),
            Err(_) => false,
        }
    }
}

/// Kuhn triangulation of `b`, optionally after splitting axis `k` into `grid[k]` cells.
///
/// Ids are assigned `0, 1, …` in cell-major, permutation-lexicographic order.
pub fn triangulate_box(b: &StateBox, grid: Option<&[usize]>) -> Result<Vec<Simplex>> {
    let n = b.dim();
    let cells: Vec<usize> = match grid {
        Some(g) => {
            if g.len() != n {
                return Err(Error::dims("initial grid", n, g.len()));
            }
            if g.contains(&0) {
                return Err(Error::InvalidParameter("initial grid cell count must be positive".into()));
            }
            g.to_vec()
        }
        None => vec![1; n],
    };
    let perms = permutations(n);
    let mut out = Vec::with_capacity(perms.len() * cells.iter().product::<usize>());
    let mut idx = vec![0usize; n];
    let mut id = 0u64;
    loop {
        let origin: Vec<f64> = (0..n)
            .map(|k| cell_edge(b, &cells, k, idx[k]))
            .collect();
        let far: Vec<f64> = (0..n)
            .map(|k| cell_edge(b, &cells, k, idx[k] + 1))
            .collect();
        for p in &perms {
            let mut v = Array2::zeros((n + 1, n));
            let mut cur = Array1::from(origin.clone());
            v.row_mut(0).assign(&cur);
            for (step, &axis) in p.iter().enumerate() {
                cur[axis] = far[axis];
                v.row_mut(step + 1).assign(&cur);
            }
            out.push(Simplex::new(v, 0, id, None)?);
            id += 1;
        }
        // odometer over cells, last axis fastest
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < cells[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

// Grid lines are computed from the endpoints so the outer faces match the box exactly.
fn cell_edge(b: &StateBox, cells: &[usize], axis: usize, i: usize) -> f64 {
    if i == cells[axis] {
        b.hi[axis]
    } else {
        b.lo[axis] + (b.hi[axis] - b.lo[axis]) * i as f64 / cells[axis] as f64
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    // lexicographic successor
    loop {
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
        out.push(p.clone());
    }
}

/// Split `s` at the midpoint of its longest edge `(i, j)`.
///
/// The first child replaces `vⱼ` by the midpoint, the second replaces `vᵢ`. Children
/// carry id 0 and `parent_id = s.id`; the caller assigns fresh ids. Fails with
/// [`Error::VolumeFloor`] when a child would fall below `volume_floor`.
pub fn bisect_longest_edge(s: &Simplex, volume_floor: f64) -> Result<(Simplex, Simplex)> {
    let (i, j) = s.longest_edge();
    let mid: Array1<f64> = (&s.vertices.row(i) + &s.vertices.row(j)) * 0.5;
    let child_volume = 0.5 * s.volume();
    if child_volume < volume_floor {
        return Err(Error::VolumeFloor {
            volume: child_volume,
            floor: volume_floor,
        });
    }
    let mut a = s.vertices.clone();
    a.row_mut(j).assign(&mid);
    let mut b = s.vertices.clone();
    b.row_mut(i).assign(&mid);
    Ok((
        Simplex::new(a, s.depth + 1, 0, Some(s.id))?,
        Simplex::new(b, s.depth + 1, 0, Some(s.id))?,
    ))
}
