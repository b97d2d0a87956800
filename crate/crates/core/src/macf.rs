//! Binary snapshot format for staggered fields ("MACF").
//!
//! Layout: magic bytes `MACF`, a `u32` little-endian cell count `N`, a `u8`
//! placement code (0 = cell, 1 = x-edge, 2 = y-edge), then the interior
//! values as little-endian `f64` in row-major order with `j` outer. Ghosts
//! are never serialized.

use crate::grid::{CellField, GridSpec, XEdgeField, YEdgeField};
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MACF";

/// Upper bound on a deserialized grid size; rejects corrupt headers before
/// they turn into absurd allocations.
pub const MAX_GRID: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Cell,
    XEdge,
    YEdge,
}

impl Placement {
    pub fn code(self) -> u8 {
        match self {
            Placement::Cell => 0,
            Placement::XEdge => 1,
            Placement::YEdge => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Placement::Cell),
            1 => Some(Placement::XEdge),
            2 => Some(Placement::YEdge),
            _ => None,
        }
    }

    pub fn value_count(self, n: usize) -> usize {
        match self {
            Placement::Cell => n * n,
            Placement::XEdge => (n + 1) * n,
            Placement::YEdge => n * (n + 1),
        }
    }
}

#[derive(Debug, Error)]
pub enum MacfError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}, expected \"MACF\"")]
    BadMagic([u8; 4]),
    #[error("unknown placement code {0}")]
    BadPlacement(u8),
    #[error("stored grid size {got} does not match expected {expected}")]
    GridMismatch { got: usize, expected: usize },
    #[error("stored placement {got:?} does not match expected {expected:?}")]
    PlacementMismatch { got: Placement, expected: Placement },
    #[error("grid size {0} is not representable")]
    BadGridSize(u64),
}

fn write_block(
    w: &mut impl Write,
    n: usize,
    placement: Placement,
    values: &[f64],
) -> Result<(), MacfError> {
    debug_assert_eq!(values.len(), placement.value_count(n));
    w.write_all(&MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&[placement.code()])?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_block(r: &mut impl Read) -> Result<(usize, Placement, Vec<f64>), MacfError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(MacfError::BadMagic(magic));
    }
    let mut nb = [0u8; 4];
    r.read_exact(&mut nb)?;
    let n = u32::from_le_bytes(nb) as usize;
    if !(2..=MAX_GRID).contains(&n) {
        return Err(MacfError::BadGridSize(n as u64));
    }
    let mut pb = [0u8; 1];
    r.read_exact(&mut pb)?;
    let placement = Placement::from_code(pb[0]).ok_or(MacfError::BadPlacement(pb[0]))?;
    let count = placement.value_count(n);
    let mut values = vec![0.0; count];
    let mut fb = [0u8; 8];
    for v in values.iter_mut() {
        r.read_exact(&mut fb)?;
        *v = f64::from_le_bytes(fb);
    }
    Ok((n, placement, values))
}

pub fn write_cell(w: &mut impl Write, f: &CellField) -> Result<(), MacfError> {
    write_block(w, f.grid().n(), Placement::Cell, &f.interior_values())
}

pub fn write_x_edge(w: &mut impl Write, f: &XEdgeField) -> Result<(), MacfError> {
    write_block(w, f.grid().n(), Placement::XEdge, &f.interior_values())
}

pub fn write_y_edge(w: &mut impl Write, f: &YEdgeField) -> Result<(), MacfError> {
    write_block(w, f.grid().n(), Placement::YEdge, &f.interior_values())
}

pub fn read_cell(r: &mut impl Read) -> Result<CellField, MacfError> {
    let (n, placement, values) = read_block(r)?;
    if placement != Placement::Cell {
        return Err(MacfError::PlacementMismatch {
            got: placement,
            expected: Placement::Cell,
        });
    }
    Ok(CellField::from_interior_values(GridSpec::new(n), &values))
}

pub fn read_x_edge(r: &mut impl Read) -> Result<XEdgeField, MacfError> {
    let (n, placement, values) = read_block(r)?;
    if placement != Placement::XEdge {
        return Err(MacfError::PlacementMismatch {
            got: placement,
            expected: Placement::XEdge,
        });
    }
    Ok(XEdgeField::from_interior_values(GridSpec::new(n), &values))
}

pub fn read_y_edge(r: &mut impl Read) -> Result<YEdgeField, MacfError> {
    let (n, placement, values) = read_block(r)?;
    if placement != Placement::YEdge {
        return Err(MacfError::PlacementMismatch {
            got: placement,
            expected: Placement::YEdge,
        });
    }
    Ok(YEdgeField::from_interior_values(GridSpec::new(n), &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_stable() {
        let g = GridSpec::new(2);
        let f = CellField::from_interior_values(g, &[1.0, 2.0, 3.0, 4.0]);
        let mut buf = Vec::new();
        write_cell(&mut buf, &f).unwrap();
        assert_eq!(&buf[0..4], b"MACF");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(buf[8], 0);
        assert_eq!(&buf[9..17], &1.0f64.to_le_bytes());
        assert_eq!(buf.len(), 9 + 4 * 8);
    }

    #[test]
    fn placement_mismatch_is_rejected() {
        let g = GridSpec::new(3);
        let f = CellField::zeros(g);
        let mut buf = Vec::new();
        write_cell(&mut buf, &f).unwrap();
        assert!(matches!(
            read_x_edge(&mut buf.as_slice()),
            Err(MacfError::PlacementMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn cell_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 16)) {
            let g = GridSpec::new(4);
            let f = CellField::from_interior_values(g, &values);
            let mut buf = Vec::new();
            write_cell(&mut buf, &f).unwrap();
            let back = read_cell(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(f.interior_values(), back.interior_values());
        }

        #[test]
        fn x_edge_round_trip(values in proptest::collection::vec(-1e3f64..1e3, 12)) {
            let g = GridSpec::new(3);
            let f = XEdgeField::from_interior_values(g, &values);
            let mut buf = Vec::new();
            write_x_edge(&mut buf, &f).unwrap();
            let back = read_x_edge(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(f.interior_values(), back.interior_values());
        }
    }
}
