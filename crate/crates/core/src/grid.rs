//! Dense row-major voxel grids.
//!
//! Every grid is stored as `[z, y, x]`; planar images use `z = 1`. Whether a
//! grid is treated as a volume or a plane is decided by the caller's
//! [`VolumeMeta`](crate::volume::VolumeMeta), never by the extent of the z axis.

use crate::error::{Error, Result};

/// Integer voxel coordinate in `(z, y, x)` order.
pub type Coord = [usize; 3];

/// Grid extents in `(z, y, x)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape(pub [usize; 3]);

impl Shape {
    pub fn new(nz: usize, ny: usize, nx: usize) -> Self {
        Shape([nz, ny, nx])
    }

    pub fn planar(ny: usize, nx: usize) -> Self {
        Shape([1, ny, nx])
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: Coord) -> usize {
        (c[0] * self.0[1] + c[1]) * self.0[2] + c[2]
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> Coord {
        let x = idx % self.0[2];
        let rest = idx / self.0[2];
        [rest / self.0[1], rest % self.0[1], x]
    }

    #[inline]
    pub fn contains(&self, c: [isize; 3]) -> bool {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.0[a])
    }

    /// Signed coordinate shifted by `off`, if it stays inside the grid.
    #[inline]
    pub fn offset(&self, c: Coord, off: [isize; 3]) -> Option<Coord> {
        let n = [
            c[0] as isize + off[0],
            c[1] as isize + off[1],
            c[2] as isize + off[2],
        ];
        self.contains(n)
            .then(|| [n[0] as usize, n[1] as usize, n[2] as usize])
    }
}

/// Neighbourhood offsets, excluding the origin.
///
/// `full` selects 26-connectivity (8 in the plane); otherwise face
/// connectivity (6, or 4 in the plane).
pub fn neighbor_offsets(is_3d: bool, full: bool) -> Vec<[isize; 3]> {
    let zr: &[isize] = if is_3d { &[-1, 0, 1] } else { &[0] };
    let mut out = Vec::with_capacity(26);
    for &dz in zr {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let nonzero = (dz != 0) as u8 + (dy != 0) as u8 + (dx != 0) as u8;
                if nonzero == 0 || (!full && nonzero > 1) {
                    continue;
                }
                out.push([dz, dy, dx]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(shape: Shape, value: T) -> Self {
        Grid {
            shape,
            data: vec![value; shape.len()],
        }
    }
}

impl<T: Clone + Default> Grid<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, T::default())
    }
}

impl<T> Grid<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape {:?}",
                data.len(),
                shape.0
            )));
        }
        Ok(Grid { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dims(&self) -> [usize; 3] {
        self.shape.0
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: Coord) -> &T {
        &self.data[self.shape.index(c)]
    }

    #[inline]
    pub fn set(&mut self, c: Coord, v: T) {
        let i = self.shape.index(c);
        self.data[i] = v;
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> Grid<U> {
        Grid {
            shape: self.shape,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Iterate `(coord, value)` in raster order.
    pub fn indexed(&self) -> impl Iterator<Item = (Coord, &T)> + '_ {
        let shape = self.shape;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (shape.coord(i), v))
    }
}

impl<T> std::ops::Index<usize> for Grid<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> std::ops::IndexMut<usize> for Grid<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

/// Boolean voxel mask.
pub type Mask = Grid<bool>;

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Raster-order coordinates of set voxels.
    pub fn coords(&self) -> Vec<Coord> {
        self.indexed().filter(|(_, &b)| b).map(|(c, _)| c).collect()
    }
}
