//! Problem statement types: the instance, a layout of circle centers and the
//! group of circles that is movable in one local descent.

use crate::error::{Error, Result};

/// A circle center in the container's frame (container centered at the origin).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotates about the origin by `angle` radians.
    pub fn rotated(self, angle: f64) -> Point {
        let (sin, cos) = angle.sin_cos();
        Point::new(cos * self.x - sin * self.y, sin * self.x + cos * self.y)
    }
}

/// `n` unit circles to be packed into a container of radius `radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    n: usize,
    radius: f64,
}

impl Instance {
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance("circle count must be at least 1".into()));
        }
        if !radius.is_finite() || radius < 1.0 {
            return Err(Error::InvalidInstance(format!(
                "container radius must be finite and at least 1, got {radius}"
            )));
        }
        Ok(Instance { n, radius })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// The same circles in a container scaled by `gamma`.
    ///
    /// Unlike [`Instance::new`] this accepts containers smaller than a unit
    /// circle: basin hopping squeezes layouts into such containers.
    pub fn shrunk(&self, gamma: f64) -> Instance {
        assert!(gamma > 0.0 && gamma.is_finite(), "shrink factor must be positive");
        Instance {
            n: self.n,
            radius: self.radius * gamma,
        }
    }

    pub fn check_layout(&self, layout: &Layout) -> Result<()> {
        if layout.len() != self.n {
            return Err(Error::InvalidLayout(format!(
                "layout has {} centers, instance has {} circles",
                layout.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Centers of all circles, indexed `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    centers: Vec<Point>,
}

impl Layout {
    pub fn new(centers: Vec<Point>) -> Result<Self> {
        if let Some(i) = centers.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidLayout(format!("center {i} is not finite")));
        }
        Ok(Layout { centers })
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Layout::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub(crate) fn centers_mut(&mut self) -> &mut [Point] {
        &mut self.centers
    }

    pub fn rotated(&self, angle: f64) -> Layout {
        Layout {
            centers: self.centers.iter().map(|c| c.rotated(angle)).collect(),
        }
    }
}

/// Indices (0-based, strictly increasing) of the circles that may move.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSelection {
    indices: Vec<usize>,
}

impl GroupSelection {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSelection("selection is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSelection(
                "indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidSelection(format!(
                    "index {last} out of range for {n} circles"
                )));
            }
        }
        Ok(GroupSelection { indices })
    }

    /// Sorts and deduplicates-checks an arbitrary index set.
    pub fn from_unsorted(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        GroupSelection::new(indices, n)
    }

    pub fn full(n: usize) -> Self {
        GroupSelection {
            indices: (0..n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn check_against(&self, instance: &Instance) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last < instance.n() => Ok(()),
            Some(&last) => Err(Error::InvalidSelection(format!(
                "index {last} out of range for {} circles",
                instance.n()
            ))),
            None => Err(Error::InvalidSelection("selection is empty".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_rejects_small_container() {
        assert!(Instance::new(3, 0.99).is_err());
        assert!(Instance::new(0, 5.0).is_err());
        assert!(Instance::new(1, 1.0).is_ok());
        assert!(Instance::new(1, f64::NAN).is_err());
    }

    #[test]
    fn layout_rejects_non_finite() {
        assert!(Layout::from_coords(&[(0.0, f64::INFINITY)]).is_err());
        assert!(Layout::from_coords(&[(0.0, 1.0), (f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn selection_validation() {
        assert!(GroupSelection::new(vec![], 3).is_err());
        assert!(GroupSelection::new(vec![1, 1], 3).is_err());
        assert!(GroupSelection::new(vec![2, 1], 3).is_err());
        assert!(GroupSelection::new(vec![0, 3], 3).is_err());
        let sel = GroupSelection::from_unsorted(vec![2, 0], 3).unwrap();
        assert_eq!(sel.indices(), &[0, 2]);
        assert!(sel.contains(2) && !sel.contains(1));
    }
}
