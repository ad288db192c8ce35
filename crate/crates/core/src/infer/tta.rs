//! The 16 test-time transforms: quarter-turns in the axial (y, x) plane,
//! a flip of x, and a flip of z.
//!
//! A transform acts as `R^k ∘ Fx^a ∘ Fz^c`. Flipping y is not a separate
//! generator because `Fy = R² ∘ Fx`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volio::Dims3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TtaTransform {
    /// Quarter-turns in the axial plane, 0..4.
    pub rotation: u8,
    pub flip_x: bool,
    pub flip_z: bool,
}

impl TtaTransform {
    pub const IDENTITY: TtaTransform = TtaTransform {
        rotation: 0,
        flip_x: false,
        flip_z: false,
    };

    /// Canonical form of "flip y, x, z as requested, then rotate `k` times".
    pub fn from_parts(k: u8, flip_y: bool, flip_x: bool, flip_z: bool) -> Self {
        TtaTransform {
            rotation: (k + if flip_y { 2 } else { 0 }) % 4,
            flip_x: flip_x ^ flip_y,
            flip_z,
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(self, other: TtaTransform) -> Self {
        let kb = if self.flip_x {
            (4 - other.rotation) % 4
        } else {
            other.rotation
        };
        TtaTransform {
            rotation: (self.rotation + kb) % 4,
            flip_x: self.flip_x ^ other.flip_x,
            flip_z: self.flip_z ^ other.flip_z,
        }
    }

    pub fn inverse(self) -> Self {
        TtaTransform {
            rotation: if self.flip_x {
                self.rotation
            } else {
                (4 - self.rotation) % 4
            },
            ..self
        }
    }

    /// Whether this transform maps a grid of `dims` onto itself.
    pub fn fits(self, dims: Dims3) -> bool {
        self.rotation % 2 == 0 || dims[1] == dims[2]
    }
}

/// All 16 transforms, identity first, ordered by (rotation, flip_x, flip_z).
pub fn enumerate_tta() -> Vec<TtaTransform> {
    let mut out = Vec::with_capacity(16);
    for rotation in 0..4 {
        for flip_x in [false, true] {
            for flip_z in [false, true] {
                out.push(TtaTransform {
                    rotation,
                    flip_x,
                    flip_z,
                });
            }
        }
    }
    out
}

fn flip<T: Copy>(data: &[T], dims: Dims3, fx: bool, fz: bool) -> Vec<T> {
    let [zn, yn, xn] = dims;
    let mut out = Vec::with_capacity(data.len());
    for z in 0..zn {
        let sz = if fz { zn - 1 - z } else { z };
        for y in 0..yn {
            let row = &data[(sz * yn + y) * xn..(sz * yn + y + 1) * xn];
            if fx {
                out.extend(row.iter().rev());
            } else {
                out.extend_from_slice(row);
            }
        }
    }
    out
}

/// One quarter-turn: `out[z][y][x] = in[z][x][X-1-y]`; output dims are (Z, X, Y).
fn rot90<T: Copy>(data: &[T], dims: Dims3) -> (Vec<T>, Dims3) {
    let [zn, yn, xn] = dims;
    let mut out = Vec::with_capacity(data.len());
    for z in 0..zn {
        let slice = &data[z * yn * xn..(z + 1) * yn * xn];
        for y in 0..xn {
            for x in 0..yn {
                out.push(slice[x * xn + (xn - 1 - y)]);
            }
        }
    }
    (out, [zn, xn, yn])
}

fn check<T>(t: TtaTransform, data: &[T], dims: Dims3) -> Result<()> {
    if data.len() != dims.iter().product::<usize>() {
        return Err(Error::Shape(format!(
            "{} voxels do not fill {dims:?}",
            data.len()
        )));
    }
    if t.rotation >= 4 {
        return Err(Error::InvalidArgument(format!(
            "rotation {} is not in 0..4",
            t.rotation
        )));
    }
    Ok(())
}

/// Dims after applying `t` to a grid of `dims`: odd turns swap y and x.
pub fn transformed_dims(t: TtaTransform, dims: Dims3) -> Dims3 {
    if t.rotation % 2 == 1 {
        [dims[0], dims[2], dims[1]]
    } else {
        dims
    }
}

/// Transform one channel on any grid: flips first, then rotation.
/// Returns the data and its new dims.
pub fn apply_tta_shaped<T: Copy>(
    t: TtaTransform,
    data: &[T],
    dims: Dims3,
) -> Result<(Vec<T>, Dims3)> {
    check(t, data, dims)?;
    let mut v = flip(data, dims, t.flip_x, t.flip_z);
    let mut d = dims;
    for _ in 0..t.rotation {
        (v, d) = rot90(&v, d);
    }
    Ok((v, d))
}

/// Undo [`apply_tta_shaped`]. `dims` are those of the transformed data; the
/// returned dims are the original ones.
pub fn invert_tta_shaped<T: Copy>(
    t: TtaTransform,
    data: &[T],
    dims: Dims3,
) -> Result<(Vec<T>, Dims3)> {
    check(t, data, dims)?;
    let mut v = data.to_vec();
    let mut d = dims;
    for _ in 0..(4 - t.rotation) % 4 {
        (v, d) = rot90(&v, d);
    }
    Ok((flip(&v, d, t.flip_x, t.flip_z), d))
}

fn same_dims(t: TtaTransform, dims: Dims3) -> Result<()> {
    if !t.fits(dims) {
        return Err(Error::Shape(format!(
            "odd axial rotation of a {}x{} slice changes its shape",
            dims[1], dims[2]
        )));
    }
    Ok(())
}

/// Transform one channel in place of the same grid. Odd turns need a
/// square axial slice; use [`apply_tta_shaped`] otherwise.
pub fn apply_tta<T: Copy>(t: TtaTransform, data: &[T], dims: Dims3) -> Result<Vec<T>> {
    same_dims(t, dims)?;
    Ok(apply_tta_shaped(t, data, dims)?.0)
}

/// Undo [`apply_tta`]: inverse rotation, then the same flips.
pub fn invert_tta<T: Copy>(t: TtaTransform, data: &[T], dims: Dims3) -> Result<Vec<T>> {
    same_dims(t, dims)?;
    Ok(invert_tta_shaped(t, data, dims)?.0)
}
