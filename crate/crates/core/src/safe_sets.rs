//! Sublevel sets of optimal value tables.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::ValueTable;

/// Grid nodes whose optimal risk is at most `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafeSet {
    pub mask: Vec<bool>,
    shape: Vec<usize>,
}

impl SafeSet {
    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Fraction of nodes on which two masks agree.
    pub fn agreement(&self, other: &SafeSet) -> Result<f64> {
        same_grid(self, other)?;
        let same = self.mask.iter().zip(&other.mask).filter(|(a, b)| a == b).count();
        Ok(same as f64 / self.mask.len() as f64)
    }
}

fn same_grid(a: &SafeSet, b: &SafeSet) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::GridMismatch(format!(
            "masks over grids of shape {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    Ok(())
}

pub fn sublevel_mask(values: &ValueTable, r: f64) -> SafeSet {
    SafeSet {
        mask: values.values().iter().map(|&v| v <= r).collect(),
        shape: values.grid().shape(),
    }
}

/// Whether `inner ⊆ outer`.
pub fn nesting_check(inner: &SafeSet, outer: &SafeSet) -> Result<bool> {
    same_grid(inner, outer)?;
    Ok(inner.mask.iter().zip(&outer.mask).all(|(&a, &b)| !a || b))
}

/// Writes `x1,…,xd,value,member` with one row per node.
pub fn write_csv<W: Write + ?Sized>(out: &mut W, values: &ValueTable, r: f64) -> Result<()> {
    let grid = values.grid();
    let coords: Vec<String> = (1..=grid.dim()).map(|k| format!("x{k}")).collect();
    writeln!(out, "{},value,member", coords.join(","))?;
    for (node, &v) in values.values().iter().enumerate() {
        let x = grid.node(node);
        for c in x.as_slice() {
            write!(out, "{c},")?;
        }
        writeln!(out, "{v},{}", u8::from(v <= r))?;
    }
    Ok(())
}
