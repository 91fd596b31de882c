//! Five-point finite-difference `−Δ` on a cross-shaped domain with
//! homogeneous Dirichlet boundary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, CMat, CscMatrix, Matrix};
use crate::pencil::ProjectionPencil;

/// A `core×core` square of cells with four rectangular arms of width `core`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossGeometry {
    pub core: usize,
    pub up: usize,
    pub down: usize,
    pub left: usize,
    pub right: usize,
    pub h: f64,
}

impl Default for CrossGeometry {
    /// Reference geometry: 205 interior points, lowest two arm modes simple.
    fn default() -> Self {
        CrossGeometry { core: 6, up: 10, down: 9, left: 9, right: 8, h: 0.1 }
    }
}

impl CrossGeometry {
    /// Plain square of `core` cells per side.
    pub fn square(core: usize, h: f64) -> Self {
        CrossGeometry { core, up: 0, down: 0, left: 0, right: 0, h }
    }

    pub fn symmetric(core: usize, arm: usize, h: f64) -> Self {
        CrossGeometry { core, up: arm, down: arm, left: arm, right: arm, h }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid spacing {} must be positive", self.h)));
        }
        if self.core < 1 {
            return Err(Error::InvalidConfig("core must span at least one cell".into()));
        }
        let n = self.interior_count();
        if n < 4 {
            return Err(Error::InvalidConfig(format!("geometry has {n} interior points, need at least 4")));
        }
        Ok(())
    }

    /// Cells are `[x, x+1]×[y, y+1]`, the core occupying `[0, core)²`.
    fn contains_cell(&self, x: i64, y: i64) -> bool {
        let c = self.core as i64;
        let band_x = (0..c).contains(&x);
        let band_y = (0..c).contains(&y);
        (band_x && (-(self.down as i64)..c + self.up as i64).contains(&y))
            || (band_y && (-(self.left as i64)..c + self.right as i64).contains(&x))
    }

    /// A vertex is interior when all four cells around it belong to the cross.
    fn is_interior(&self, i: i64, j: i64) -> bool {
        self.contains_cell(i - 1, j - 1) && self.contains_cell(i, j - 1) && self.contains_cell(i - 1, j) && self.contains_cell(i, j)
    }

    fn vertex_bounds(&self) -> (i64, i64, i64, i64) {
        let c = self.core as i64;
        (-(self.left as i64), c + self.right as i64, -(self.down as i64), c + self.up as i64)
    }

    pub fn interior_count(&self) -> usize {
        let (x0, x1, y0, y1) = self.vertex_bounds();
        (y0..=y1).flat_map(|j| (x0..=x1).map(move |i| (i, j))).filter(|&(i, j)| self.is_interior(i, j)).count()
    }
}

/// Interior vertices in row-major order (`y` outer, `x` inner).
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    points: Vec<(i64, i64)>,
    index: HashMap<(i64, i64), usize>,
}

impl GridLayout {
    pub fn new(geometry: &CrossGeometry) -> Self {
        let (x0, x1, y0, y1) = geometry.vertex_bounds();
        let points: Vec<(i64, i64)> =
            (y0..=y1).flat_map(|j| (x0..=x1).map(move |i| (i, j))).filter(|&(i, j)| geometry.is_interior(i, j)).collect();
        let index = points.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        GridLayout { points, index }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    pub fn point(&self, k: usize) -> (i64, i64) {
        self.points[k]
    }

    pub fn index_of(&self, i: i64, j: i64) -> Option<usize> {
        self.index.get(&(i, j)).copied()
    }
}

/// Scalar field on the interior vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMode {
    pub geometry: CrossGeometry,
    pub values: Vec<f64>,
    pub layout: GridLayout,
}

/// `E = I`, `A = −Δ_h`, so eigenvalues are `ω² > 0`.
pub fn cross_plate(geometry: &CrossGeometry) -> Result<(ProjectionPencil, GridLayout)> {
    geometry.validate()?;
    let layout = GridLayout::new(geometry);
    let m = layout.len();
    let inv_h2 = 1.0 / (geometry.h * geometry.h);
    let mut t = Vec::with_capacity(5 * m);
    for (k, &(i, j)) in layout.points.iter().enumerate() {
        t.push((k, k, C64::new(4.0 * inv_h2, 0.0)));
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            if let Some(l) = layout.index_of(i + di, j + dj) {
                t.push((k, l, C64::new(-inv_h2, 0.0)));
            }
        }
    }
    let a = CscMatrix::from_triplets(m, m, &t)?;
    let pencil = ProjectionPencil::new(Matrix::Sparse(CscMatrix::identity(m)), Matrix::Sparse(a))?;
    Ok((pencil, layout))
}

/// Sign patterns of the initial guesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmPattern {
    UpVsDown,
    RightVsLeft,
}

/// Sine-product bump, positive on the first arm of the pattern and negative
/// on the opposite one, vanishing on the core and the boundary.
pub fn cross_plate_initial_guess(geometry: &CrossGeometry, pattern: ArmPattern) -> Result<CMat> {
    geometry.validate()?;
    let layout = GridLayout::new(geometry);
    let c = geometry.core as i64;
    let pi = std::f64::consts::PI;
    let across = |s: i64| (pi * s as f64 / c as f64).sin();
    let along = |t: i64, len: usize| (pi * t as f64 / (len as f64 + 1.0)).sin();
    let mut v = CMat::zeros(layout.len(), 1);
    for (k, &(i, j)) in layout.points.iter().enumerate() {
        let in_x = (1..c).contains(&i);
        let in_y = (1..c).contains(&j);
        let value = match pattern {
            ArmPattern::UpVsDown if in_x && j >= c => across(i) * along(j - c + 1, geometry.up),
            ArmPattern::UpVsDown if in_x && j <= 0 => -across(i) * along(1 - j, geometry.down),
            ArmPattern::RightVsLeft if in_y && i >= c => across(j) * along(i - c + 1, geometry.right),
            ArmPattern::RightVsLeft if in_y && i <= 0 => -across(j) * along(1 - i, geometry.left),
            _ => 0.0,
        };
        v[(k, 0)] = C64::new(value, 0.0);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::oracle_full_spectrum;

    #[test]
    fn reference_geometry_size() {
        let g = CrossGeometry::default();
        assert_eq!(g.interior_count(), 205);
        assert_eq!(CrossGeometry::square(4, 0.25).interior_count(), 9);
    }

    #[test]
    fn tiny_geometry_rejected() {
        assert!(CrossGeometry::square(2, 0.5).validate().is_err());
        assert!(CrossGeometry::square(4, 0.0).validate().is_err());
    }

    #[test]
    fn square_matches_closed_form() {
        let h = 0.25;
        let (p, _) = cross_plate(&CrossGeometry::square(4, h)).unwrap();
        let spec = oracle_full_spectrum(&p).unwrap();
        let mut got: Vec<f64> = spec.modes.iter().map(|m| m.lambda.re).collect();
        got.sort_by(f64::total_cmp);
        let s = |k: usize| (k as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2);
        let mut expect: Vec<f64> = (1..4).flat_map(|p| (1..4).map(move |q| 4.0 / (h * h) * (s(p) + s(q)))).collect();
        expect.sort_by(f64::total_cmp);
        assert!((got[0] - 128.0 * (std::f64::consts::PI / 8.0).sin().powi(2)).abs() < 1e-12);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12 * e.max(1.0), "{g} vs {e}");
        }
    }

    #[test]
    fn up_down_guess_is_odd_under_vertical_flip() {
        let g = CrossGeometry::symmetric(4, 3, 0.2);
        let layout = GridLayout::new(&g);
        let v = cross_plate_initial_guess(&g, ArmPattern::UpVsDown).unwrap();
        let w = cross_plate_initial_guess(&g, ArmPattern::RightVsLeft).unwrap();
        let c = g.core as i64;
        for (k, &(i, j)) in layout.points().iter().enumerate() {
            let f = layout.index_of(i, c - j).unwrap();
            assert!((v[(k, 0)] + v[(f, 0)]).norm() < 1e-15);
        }
        assert!(v.dotc(&w).norm() < 1e-15);
        assert!(v.norm() > 0.0);
    }
}

#[cfg(test)]
mod reference_tests {
    use super::*;
    use crate::pencil::oracle_full_spectrum;

    fn spectrum(g: &CrossGeometry) -> Vec<f64> {
        let (p, _) = cross_plate(g).unwrap();
        let mut l: Vec<f64> = oracle_full_spectrum(&p).unwrap().modes.iter().map(|m| m.lambda.re).collect();
        l.sort_by(f64::total_cmp);
        l
    }

    #[test]
    fn quarter_turn_leaves_spectrum_unchanged() {
        let g = CrossGeometry { core: 3, up: 4, down: 2, left: 3, right: 1, h: 0.2 };
        let turned = CrossGeometry { core: 3, up: g.right, down: g.left, left: g.up, right: g.down, h: 0.2 };
        let (a, b) = (spectrum(&g), spectrum(&turned));
        assert!(a.iter().all(|x| *x > 0.0));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.abs());
        }
    }

    #[test]
    fn reference_arm_modes_are_simple_and_matched_by_guesses() {
        let g = CrossGeometry::default();
        let (p, _) = cross_plate(&g).unwrap();
        let spec = oracle_full_spectrum(&p).unwrap();
        let modes = spec.sorted();
        let mut found = Vec::new();
        for pattern in [ArmPattern::UpVsDown, ArmPattern::RightVsLeft] {
            let v = cross_plate_initial_guess(&g, pattern).unwrap().column(0).into_owned();
            let v = v.unscale(v.norm());
            let (k, best) =
                modes.iter().enumerate().map(|(k, m)| (k, m.v.dotc(&v).norm() / m.v.norm())).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            assert!(best > 0.7, "{pattern:?} overlap {best}");
            let lambda = modes[k].lambda.re;
            let gap =
                modes.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, m)| (m.lambda.re - lambda).abs()).fold(f64::INFINITY, f64::min);
            assert!(gap > 1e-3 * lambda, "{pattern:?} gap {gap}");
            found.push(k);
        }
        assert_eq!(found, vec![1, 2]);
    }
}
