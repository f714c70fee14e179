//! Finite pieces of Z²: domains with their outer boundary, oriented bonds,
//! inner regions and annuli, and the periodic torus.
//!
//! Fields on a domain are plain `Vec<f64>` in *extended* layout: entries
//! `0..n_interior()` hold interior values in row-major order (by `j`, then
//! `i`), followed by the boundary values in the same order. A field in this
//! layout is exactly `h ∨ φ`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub i: i32,
    pub j: i32,
}

impl Site {
    pub const fn new(i: i32, j: i32) -> Self {
        Site { i, j }
    }

    pub const fn shift(self, di: i32, dj: i32) -> Self {
        Site::new(self.i + di, self.j + dj)
    }

    pub fn dist(self, other: Site) -> f64 {
        let di = f64::from(self.i - other.i);
        let dj = f64::from(self.j - other.j);
        di.hypot(dj)
    }

    pub fn neighbors(self) -> [Site; 4] {
        DIRECTIONS.map(|(di, dj)| self.shift(di, dj))
    }
}

/// Neighbor order used throughout: +e₁, −e₁, +e₂, −e₂.
pub const DIRECTIONS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A nearest-neighbour bond `tail → head`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub tail: Site,
    pub head: Site,
}

impl Bond {
    pub fn new(tail: Site, head: Site) -> Result<Self> {
        let d = (head.i - tail.i).abs() + (head.j - tail.j).abs();
        if d != 1 {
            return Err(invalid(format!("{tail:?} and {head:?} are not nearest neighbours")));
        }
        Ok(Bond { tail, head })
    }

    pub fn orientation(&self) -> Orientation {
        if self.head.j == self.tail.j {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        }
    }

    pub fn reversed(self) -> Self {
        Bond { tail: self.head, head: self.tail }
    }

    /// True when `head − tail ∈ {e₁, e₂}`.
    pub fn is_canonical(&self) -> bool {
        (self.head.i - self.tail.i, self.head.j - self.tail.j) == (1, 0)
            || (self.head.i - self.tail.i, self.head.j - self.tail.j) == (0, 1)
    }

    pub fn canonical(self) -> Self {
        if self.is_canonical() {
            self
        } else {
            self.reversed()
        }
    }

    /// Unit displacement `head − tail`.
    pub fn displacement(&self) -> (i32, i32) {
        (self.head.i - self.tail.i, self.head.j - self.tail.j)
    }
}

/// Where a site lives in a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Interior(usize),
    Boundary(usize),
}

/// Bond stored as a pair of extended indices, canonical orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BondIndex {
    pub tail: u32,
    pub head: u32,
    pub orientation: Orientation,
}

/// Which bonds a bond sum runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BondSet {
    /// `D*`: both endpoints interior.
    Interior,
    /// `D*` plus the bonds joining `D` to `∂D`.
    #[default]
    InteriorAndCrossing,
}

/// A finite domain `D ⊂ Z²` with boundary `∂D = {x ∉ D : dist(x, D) = 1}`.
///
/// Storage is a dense mask over the bounding box of `D ∪ ∂D` plus index
/// maps, so site lookup is O(1).
#[derive(Clone, Debug)]
pub struct LatticeDomain {
    interior: Vec<Site>,
    boundary: Vec<Site>,
    min_i: i32,
    min_j: i32,
    box_w: usize,
    box_h: usize,
    lookup: Vec<i32>,
    neighbors: Vec<[u32; 4]>,
    interior_bonds: Vec<BondIndex>,
    crossing_bonds: Vec<BondIndex>,
    contained_bonds: Vec<BondIndex>,
    diameter: u32,
}

impl LatticeDomain {
    pub fn empty() -> Self {
        LatticeDomain {
            interior: Vec::new(),
            boundary: Vec::new(),
            min_i: 0,
            min_j: 0,
            box_w: 0,
            box_h: 0,
            lookup: Vec::new(),
            neighbors: Vec::new(),
            interior_bonds: Vec::new(),
            crossing_bonds: Vec::new(),
            contained_bonds: Vec::new(),
            diameter: 0,
        }
    }

    /// Builds a domain from an arbitrary site set. The set must be connected.
    pub fn from_sites(sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut interior: Vec<Site> = sites.into_iter().collect();
        interior.sort_by_key(|s| (s.j, s.i));
        interior.dedup();
        if interior.is_empty() {
            return Ok(Self::empty());
        }

        let (mut lo_i, mut hi_i, mut lo_j, mut hi_j) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for s in &interior {
            lo_i = lo_i.min(s.i);
            hi_i = hi_i.max(s.i);
            lo_j = lo_j.min(s.j);
            hi_j = hi_j.max(s.j);
        }
        let diameter = ((hi_i - lo_i).max(hi_j - lo_j) + 1) as u32;
        let min_i = lo_i - 1;
        let min_j = lo_j - 1;
        let box_w = (hi_i - lo_i + 3) as usize;
        let box_h = (hi_j - lo_j + 3) as usize;

        let cell = |s: Site| ((s.j - min_j) as usize) * box_w + (s.i - min_i) as usize;
        let mut mask = vec![false; box_w * box_h];
        for s in &interior {
            mask[cell(*s)] = true;
        }

        let mut boundary = Vec::new();
        for j in 0..box_h {
            for i in 0..box_w {
                if mask[j * box_w + i] {
                    continue;
                }
                let s = Site::new(i as i32 + min_i, j as i32 + min_j);
                let touches = s.neighbors().iter().any(|n| {
                    n.i >= min_i
                        && n.j >= min_j
                        && ((n.i - min_i) as usize) < box_w
                        && ((n.j - min_j) as usize) < box_h
                        && mask[cell(*n)]
                });
                if touches {
                    boundary.push(s);
                }
            }
        }

        let n_int = interior.len();
        let mut lookup = vec![-1i32; box_w * box_h];
        for (k, s) in interior.iter().enumerate() {
            lookup[cell(*s)] = k as i32;
        }
        for (m, s) in boundary.iter().enumerate() {
            lookup[cell(*s)] = (n_int + m) as i32;
        }

        let mut domain = LatticeDomain {
            interior,
            boundary,
            min_i,
            min_j,
            box_w,
            box_h,
            lookup,
            neighbors: Vec::new(),
            interior_bonds: Vec::new(),
            crossing_bonds: Vec::new(),
            contained_bonds: Vec::new(),
            diameter,
        };
        domain.index_bonds();
        if !domain.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(domain)
    }

    fn index_bonds(&mut self) {
        let n_int = self.interior.len();
        let mut neighbors = Vec::with_capacity(n_int);
        for s in &self.interior {
            let mut row = [0u32; 4];
            for (d, n) in s.neighbors().iter().enumerate() {
                row[d] = self.ext_index(*n).expect("neighbour of an interior site is in D ∪ ∂D") as u32;
            }
            neighbors.push(row);
        }
        self.neighbors = neighbors;

        let all: Vec<Site> = self.interior.iter().chain(self.boundary.iter()).copied().collect();
        for s in all {
            let Some(tail) = self.ext_index(s) else { continue };
            for (di, dj, orientation) in [(1, 0, Orientation::Horizontal), (0, 1, Orientation::Vertical)] {
                let Some(head) = self.ext_index(s.shift(di, dj)) else { continue };
                let bond = BondIndex { tail: tail as u32, head: head as u32, orientation };
                match (tail < n_int, head < n_int) {
                    (true, true) => self.interior_bonds.push(bond),
                    (false, false) => self.contained_bonds.push(bond),
                    _ => self.crossing_bonds.push(bond),
                }
            }
        }
    }

    fn is_connected(&self) -> bool {
        let n = self.interior.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            for &nb in &self.neighbors[k] {
                let nb = nb as usize;
                if nb < n && !seen[nb] {
                    seen[nb] = true;
                    count += 1;
                    queue.push_back(nb);
                }
            }
        }
        count == n
    }

    /// Interior `{0..width−1} × {0..height−1}`.
    pub fn build_rectangle(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("rectangle dimensions must be positive"));
        }
        let sites = (0..height as i32).flat_map(|j| (0..width as i32).map(move |i| Site::new(i, j)));
        Self::from_sites(sites)
    }

    /// Interior `{x ∈ Z² : |x|₂ ≤ radius}`.
    pub fn build_disk(radius: f64) -> Result<Self> {
        if !(radius >= 1.0) || !radius.is_finite() {
            return Err(invalid("disk radius must be at least 1"));
        }
        let r = radius.floor() as i32;
        let r2 = radius * radius;
        let sites = (-r..=r).flat_map(|j| {
            (-r..=r).filter_map(move |i| {
                let d2 = f64::from(i * i + j * j);
                (d2 <= r2).then_some(Site::new(i, j))
            })
        });
        Self::from_sites(sites)
    }

    /// Parses a text grid of `0`/`1` rows; row `r`, column `c` is site `(c, r)`.
    pub fn from_mask_text(text: &str) -> Result<Self> {
        let mut sites = Vec::new();
        for (j, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for (i, ch) in line.chars().filter(|c| !c.is_whitespace()).enumerate() {
                match ch {
                    '1' => sites.push(Site::new(i as i32, j as i32)),
                    '0' => {}
                    other => return Err(invalid(format!("unexpected mask character {other:?}"))),
                }
            }
        }
        if sites.is_empty() {
            return Err(invalid("mask has no interior sites"));
        }
        Self::from_sites(sites)
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Length of a field in extended layout.
    pub fn n_sites(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn interior(&self) -> &[Site] {
        &self.interior
    }

    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }

    /// Site at an extended index.
    pub fn site(&self, ext: usize) -> Site {
        let n = self.interior.len();
        if ext < n {
            self.interior[ext]
        } else {
            self.boundary[ext - n]
        }
    }

    /// Side of the interior's bounding box (the domain scale `R`).
    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    pub fn ext_index(&self, s: Site) -> Option<usize> {
        if s.i < self.min_i || s.j < self.min_j {
            return None;
        }
        let (ci, cj) = ((s.i - self.min_i) as usize, (s.j - self.min_j) as usize);
        if ci >= self.box_w || cj >= self.box_h {
            return None;
        }
        let v = self.lookup[cj * self.box_w + ci];
        (v >= 0).then_some(v as usize)
    }

    pub fn slot(&self, s: Site) -> Option<Slot> {
        let n = self.interior.len();
        self.ext_index(s).map(|k| if k < n { Slot::Interior(k) } else { Slot::Boundary(k - n) })
    }

    pub fn interior_index(&self, s: Site) -> Option<usize> {
        match self.slot(s) {
            Some(Slot::Interior(k)) => Some(k),
            _ => None,
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        self.interior_index(s).is_some()
    }

    /// Extended indices of the four neighbours of interior site `k`, in
    /// [`DIRECTIONS`] order.
    pub fn neighbors(&self, k: usize) -> &[u32; 4] {
        &self.neighbors[k]
    }

    pub fn neighbor_table(&self) -> &[[u32; 4]] {
        &self.neighbors
    }

    pub fn interior_bonds(&self) -> &[BondIndex] {
        &self.interior_bonds
    }

    /// Bonds with one endpoint in `D` and one in `∂D`.
    pub fn crossing_bonds(&self) -> &[BondIndex] {
        &self.crossing_bonds
    }

    /// Bonds with both endpoints in `∂D`.
    pub fn contained_bonds(&self) -> &[BondIndex] {
        &self.contained_bonds
    }

    /// `∂D*`: crossing bonds followed by contained bonds.
    pub fn boundary_bonds(&self) -> impl Iterator<Item = &BondIndex> {
        self.crossing_bonds.iter().chain(self.contained_bonds.iter())
    }

    pub fn bonds(&self, set: BondSet) -> impl Iterator<Item = &BondIndex> {
        let crossing: &[BondIndex] = match set {
            BondSet::Interior => &[],
            BondSet::InteriorAndCrossing => &self.crossing_bonds,
        };
        self.interior_bonds.iter().chain(crossing.iter())
    }

    pub fn bond(&self, b: &BondIndex) -> Bond {
        Bond { tail: self.site(b.tail as usize), head: self.site(b.head as usize) }
    }

    /// Field in extended layout from a site function.
    pub fn field_from_fn(&self, f: impl Fn(Site) -> f64) -> Vec<f64> {
        self.interior.iter().chain(self.boundary.iter()).map(|&s| f(s)).collect()
    }

    /// Boundary values (boundary order) from a site function.
    pub fn boundary_from_fn(&self, f: impl Fn(Site) -> f64) -> Vec<f64> {
        self.boundary.iter().map(|&s| f(s)).collect()
    }

    /// `h ∨ φ` in extended layout.
    pub fn join(&self, interior: &[f64], boundary: &[f64]) -> Result<Vec<f64>> {
        check_len(interior, self.n_interior())?;
        check_len(boundary, self.n_boundary())?;
        Ok(interior.iter().chain(boundary.iter()).copied().collect())
    }

    /// `∇h(b) = h(head) − h(tail)` for a field in extended layout.
    pub fn gradient(&self, field: &[f64], bond: Bond) -> Result<f64> {
        check_len(field, self.n_sites())?;
        let t = self.ext_index(bond.tail).ok_or(Error::MissingValue(bond.tail))?;
        let h = self.ext_index(bond.head).ok_or(Error::MissingValue(bond.head))?;
        Ok(field[h] - field[t])
    }

    /// Euclidean distance from each interior site to the nearest boundary site.
    pub fn boundary_distances(&self) -> Vec<f64> {
        self.interior.iter().map(|&x| self.boundary.iter().map(|&y| x.dist(y)).fold(f64::INFINITY, f64::min)).collect()
    }

    /// `D(r) = {x ∈ D : dist(x, ∂D) ≥ r}` as a domain of its own. An empty
    /// result is returned as [`LatticeDomain::empty`].
    pub fn inner_region(&self, r: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(invalid("inner region radius must be nonnegative"));
        }
        let dist = self.boundary_distances();
        let sites = self.interior.iter().zip(&dist).filter(|(_, &d)| d >= r).map(|(&s, _)| s);
        Self::from_sites(sites)
    }

    /// `D(r₁, r₂) = {x ∈ D : r₁ ≤ dist(x, ∂D) < r₂}`; `r₂` may be infinite.
    pub fn annulus(&self, r1: f64, r2: f64) -> Result<Vec<Site>> {
        if !(r1 >= 0.0) || !(r1 < r2) {
            return Err(invalid("annulus needs 0 ≤ r1 < r2"));
        }
        let dist = self.boundary_distances();
        Ok(self.interior.iter().zip(&dist).filter(|(_, &d)| r1 <= d && d < r2).map(|(&s, _)| s).collect())
    }

    /// Shifted copy of the domain.
    pub fn translate(&self, di: i32, dj: i32) -> Self {
        Self::from_sites(self.interior.iter().map(|s| s.shift(di, dj))).expect("translation preserves connectivity")
    }
}

/// `∇f(b)` for a field given as a site function; `None` marks a missing value.
pub fn gradient_of(f: impl Fn(Site) -> Option<f64>, bond: Bond) -> Result<f64> {
    let head = f(bond.head).ok_or(Error::MissingValue(bond.head))?;
    let tail = f(bond.tail).ok_or(Error::MissingValue(bond.tail))?;
    Ok(head - tail)
}

pub(crate) fn check_len<T>(v: &[T], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::LengthMismatch { expected, got: v.len() });
    }
    Ok(())
}

/// The periodic torus `Z_n²`. Site `(i, j)` has index `j·n + i`.
#[derive(Clone, Debug)]
pub struct TorusDomain {
    side: usize,
    neighbors: Vec<[u32; 4]>,
}

impl TorusDomain {
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(invalid("torus side must be at least 2"));
        }
        let n = side as i32;
        let mut neighbors = Vec::with_capacity(side * side);
        for j in 0..n {
            for i in 0..n {
                let mut row = [0u32; 4];
                for (d, (di, dj)) in DIRECTIONS.iter().enumerate() {
                    let (a, b) = ((i + di).rem_euclid(n), (j + dj).rem_euclid(n));
                    row[d] = (b * n + a) as u32;
                }
                neighbors.push(row);
            }
        }
        Ok(TorusDomain { side, neighbors })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_sites(&self) -> usize {
        self.side * self.side
    }

    pub fn n_bonds(&self) -> usize {
        2 * self.side * self.side
    }

    /// Index of a site, reduced modulo the side.
    pub fn index(&self, s: Site) -> usize {
        let n = self.side as i32;
        (s.j.rem_euclid(n) * n + s.i.rem_euclid(n)) as usize
    }

    pub fn site(&self, k: usize) -> Site {
        Site::new((k % self.side) as i32, (k / self.side) as i32)
    }

    pub fn neighbors(&self, k: usize) -> &[u32; 4] {
        &self.neighbors[k]
    }

    /// All `2n²` bonds: for each site, the bond to `+e₁` then to `+e₂`.
    pub fn bonds(&self) -> impl Iterator<Item = BondIndex> + '_ {
        (0..self.n_sites()).flat_map(move |k| {
            let nb = &self.neighbors[k];
            [
                BondIndex { tail: k as u32, head: nb[0], orientation: Orientation::Horizontal },
                BondIndex { tail: k as u32, head: nb[2], orientation: Orientation::Vertical },
            ]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_boundary(interior: &[Site]) -> Vec<Site> {
        let mut out = Vec::new();
        for s in interior {
            for n in s.neighbors() {
                if !interior.contains(&n) && !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out.sort_by_key(|s| (s.j, s.i));
        out
    }

    #[test]
    fn rectangle_counts() {
        let d = LatticeDomain::build_rectangle(31, 31).unwrap();
        assert_eq!(d.n_interior(), 961);
        assert_eq!(d.n_boundary(), 124);
        assert_eq!(d.diameter(), 31);

        let d = LatticeDomain::build_rectangle(1, 1).unwrap();
        assert_eq!((d.n_interior(), d.n_boundary(), d.interior_bonds().len()), (1, 4, 0));
        assert_eq!(d.crossing_bonds().len(), 4);
        assert_eq!(d.contained_bonds().len(), 0);

        let d = LatticeDomain::build_rectangle(2, 2).unwrap();
        assert_eq!(d.interior_bonds().len(), 4);
        assert_eq!(d.n_boundary(), 8);
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(LatticeDomain::build_rectangle(0, 3).is_err());
        assert!(LatticeDomain::build_disk(0.5).is_err());
        let split = [Site::new(0, 0), Site::new(2, 0)];
        assert_eq!(LatticeDomain::from_sites(split).unwrap_err(), Error::Disconnected);
    }

    #[test]
    fn disk_counts() {
        assert_eq!(LatticeDomain::build_disk(2.0).unwrap().n_interior(), 13);
        assert_eq!(LatticeDomain::build_disk(1.0).unwrap().n_interior(), 5);
        let a = LatticeDomain::build_disk(1.4).unwrap();
        let b = LatticeDomain::build_disk(1.0).unwrap();
        assert_eq!(a.interior(), b.interior());
    }

    #[test]
    fn boundary_matches_brute_force() {
        let d = LatticeDomain::build_disk(4.3).unwrap();
        assert_eq!(d.boundary(), brute_boundary(d.interior()).as_slice());
        for b in d.boundary() {
            assert!(!d.contains(*b));
        }
    }

    // Distances are Euclidean to the nearest boundary site, so every interior
    // site of a rectangle is at distance ≥ 1 and the outer ring is at exactly 1.
    #[test]
    fn inner_regions_of_a_square() {
        let d = LatticeDomain::build_rectangle(31, 31).unwrap();
        assert_eq!(d.inner_region(0.0).unwrap().interior(), d.interior());
        assert_eq!(d.inner_region(1.0).unwrap().n_interior(), 961);
        let d2 = d.inner_region(2.0).unwrap();
        assert_eq!(d2.n_interior(), 29 * 29);
        assert!(d2.interior().iter().all(|s| (1..=29).contains(&s.i) && (1..=29).contains(&s.j)));

        let small = LatticeDomain::build_rectangle(5, 5).unwrap();
        assert_eq!(small.inner_region(3.0).unwrap().interior(), &[Site::new(2, 2)]);
        assert!(small.inner_region(3.5).unwrap().is_empty());
    }

    #[test]
    fn annuli_of_a_square() {
        let d = LatticeDomain::build_rectangle(31, 31).unwrap();
        assert!(d.annulus(0.0, 1.0).unwrap().is_empty());
        assert_eq!(d.annulus(1.0, 2.0).unwrap().len(), 120);
        assert_eq!(d.annulus(2.0, 3.0).unwrap().len(), 112);
        assert_eq!(d.annulus(3.0, 4.0).unwrap().len(), 104);
        assert_eq!(d.annulus(0.0, f64::INFINITY).unwrap(), d.interior());
        assert!(d.annulus(2.0, 2.0).is_err());
    }

    #[test]
    fn gradients() {
        let d = LatticeDomain::build_rectangle(4, 3).unwrap();
        let h = Bond::new(Site::new(0, 0), Site::new(1, 0)).unwrap();
        let v = Bond::new(Site::new(0, 0), Site::new(0, 1)).unwrap();
        let constant = d.field_from_fn(|_| 2.5);
        assert_eq!(d.gradient(&constant, h).unwrap(), 0.0);
        let linear = d.field_from_fn(|s| f64::from(s.i));
        assert_eq!(d.gradient(&linear, h).unwrap(), 1.0);
        assert_eq!(d.gradient(&linear, v).unwrap(), 0.0);
        let tilt = d.field_from_fn(|s| 2.0 * f64::from(s.i) + 3.0 * f64::from(s.j));
        assert_eq!(d.gradient(&tilt, h).unwrap(), 2.0);
        assert_eq!(d.gradient(&tilt, v).unwrap(), 3.0);

        let far = Bond::new(Site::new(9, 9), Site::new(10, 9)).unwrap();
        assert_eq!(d.gradient(&tilt, far).unwrap_err(), Error::MissingValue(Site::new(9, 9)));
        assert!(Bond::new(Site::new(0, 0), Site::new(1, 1)).is_err());
    }

    #[test]
    fn mask_text() {
        let d = LatticeDomain::from_mask_text("0110\n1111\n0110\n").unwrap();
        assert_eq!(d.n_interior(), 8);
        assert!(LatticeDomain::from_mask_text("1001\n").is_err());
        assert!(LatticeDomain::from_mask_text("12\n").is_err());
    }

    #[test]
    fn torus_geometry() {
        let t = TorusDomain::new(5).unwrap();
        assert_eq!(t.bonds().count(), 50);
        for k in 0..t.n_sites() {
            let nb = t.neighbors(k);
            assert_eq!(t.neighbors(nb[0] as usize)[1] as usize, k);
            assert_eq!(t.neighbors(nb[2] as usize)[3] as usize, k);
        }
        assert_eq!(t.index(Site::new(-1, 5)), 4);
    }

    fn arb_domain() -> impl Strategy<Value = LatticeDomain> {
        prop_oneof![
            (1usize..12, 1usize..12).prop_map(|(w, h)| LatticeDomain::build_rectangle(w, h).unwrap()),
            (1.0f64..7.0).prop_map(|r| LatticeDomain::build_disk(r).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn bond_and_degree_bookkeeping(d in arb_domain()) {
            let mut degree_sum = 0;
            for k in 0..d.n_interior() {
                degree_sum += d.neighbors(k).iter().filter(|&&n| (n as usize) < d.n_interior()).count();
            }
            prop_assert_eq!(degree_sum, 2 * d.interior_bonds().len());
            let mut seen = std::collections::HashSet::new();
            for b in d.interior_bonds().iter().chain(d.boundary_bonds()) {
                let bond = d.bond(b);
                prop_assert!(bond.is_canonical());
                prop_assert!(seen.insert(bond));
            }
        }

        #[test]
        fn inner_regions_are_monotone(d in arb_domain(), r in 0.0f64..5.0, dr in 0.0f64..3.0) {
            let outer = d.inner_region(r).unwrap();
            let inner = d.inner_region(r + dr).unwrap();
            for s in inner.interior() {
                prop_assert!(outer.contains(*s));
            }
        }

        #[test]
        fn annuli_split_disjointly(d in arb_domain(), a in 0.0f64..2.0, b in 2.0f64..3.5, c in 3.5f64..6.0) {
            let mut left = d.annulus(a, b).unwrap();
            let right = d.annulus(b, c).unwrap();
            for s in &right {
                prop_assert!(!left.contains(s));
            }
            left.extend(right);
            left.sort_by_key(|s| (s.j, s.i));
            prop_assert_eq!(left, d.annulus(a, c).unwrap());
        }

        #[test]
        fn gradient_is_antisymmetric(d in arb_domain(), seed in any::<u64>()) {
            let field = d.field_from_fn(|s| ((s.i as u64).wrapping_mul(31).wrapping_add((s.j as u64).wrapping_mul(17)) ^ seed) as f64 % 7.0);
            for b in d.interior_bonds() {
                let bond = d.bond(b);
                prop_assert_eq!(d.gradient(&field, bond).unwrap(), -d.gradient(&field, bond.reversed()).unwrap());
            }
        }
    }
}
