//! Shared vocabulary: block layouts, joint decisions, simple sets, the game
//! mapping and constraint families.

pub(crate) mod constraint;
mod mapping;
mod sets;

use std::sync::Arc;

pub use constraint::{ConstraintFamily, ConstraintHandle};
pub use mapping::GameMapping;
pub use sets::SimpleSet;

use crate::error::{Error, Result};

/// `a⁺ = max(a, 0)`.
#[inline]
pub fn positive_part(g: f64) -> f64 {
    if g > 0.0 {
        g
    } else {
        0.0
    }
}

/// Block sizes `(n_1, …, n_J)` of a joint decision vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("sizes", "at least one block is required"));
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid("sizes", format!("block {j} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &s in &sizes {
            offsets.push(total);
            total += s;
        }
        Ok(Self {
            sizes,
            offsets,
            total,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block_size(&self, j: usize) -> usize {
        self.sizes[j]
    }

    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j] + self.sizes[j]
    }
}

/// A joint decision `x = (x_1, …, x_J)` with its block layout.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDecision {
    layout: Arc<BlockLayout>,
    values: Vec<f64>,
}

impl JointDecision {
    pub fn new(layout: Arc<BlockLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total() {
            return Err(Error::DimensionMismatch {
                what: "joint decision values",
                expected: layout.total(),
                got: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let values = vec![0.0; layout.total()];
        Self { layout, values }
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
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

    pub fn block(&self, j: usize) -> &[f64] {
        &self.values[self.layout.range(j)]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.layout.range(j);
        &mut self.values[r]
    }

    pub fn same_layout(&self, other: &JointDecision) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }
}

/// Checks that one simple set per block is given with matching dimensions.
pub fn check_sets(layout: &BlockLayout, sets: &[SimpleSet]) -> Result<()> {
    if sets.len() != layout.num_blocks() {
        return Err(Error::DimensionMismatch {
            what: "number of simple sets",
            expected: layout.num_blocks(),
            got: sets.len(),
        });
    }
    for (j, set) in sets.iter().enumerate() {
        if set.dim() != layout.block_size(j) {
            return Err(Error::DimensionMismatch {
                what: "simple set dimension",
                expected: layout.block_size(j),
                got: set.dim(),
            });
        }
    }
    Ok(())
}

/// Applies `Π_{Y_j}` to every block of `v`.
pub fn block_project(sets: &[SimpleSet], v: &JointDecision) -> Result<JointDecision> {
    check_sets(v.layout(), sets)?;
    let mut out = v.clone();
    for (j, set) in sets.iter().enumerate() {
        set.project_in_place(out.block_mut(j));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(sizes: &[usize]) -> Arc<BlockLayout> {
        Arc::new(BlockLayout::new(sizes.to_vec()).unwrap())
    }

    #[test]
    fn layout_offsets() {
        let l = BlockLayout::new(vec![2, 3, 1]).unwrap();
        assert_eq!(l.total(), 6);
        assert_eq!(l.range(1), 2..5);
        assert_eq!(l.offset(2), 5);
        assert!(BlockLayout::new(vec![]).is_err());
        assert!(BlockLayout::new(vec![2, 0]).is_err());
    }

    #[test]
    fn joint_decision_blocks() {
        let x = JointDecision::new(layout(&[2, 1]), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x.block(0), &[1.0, 2.0]);
        assert_eq!(x.block(1), &[3.0]);
        assert!(JointDecision::new(layout(&[2, 1]), vec![1.0]).is_err());
    }

    #[test]
    fn positive_part_values() {
        assert_eq!(positive_part(3.2), 3.2);
        assert_eq!(positive_part(-1.0), 0.0);
        assert_eq!(positive_part(0.0), 0.0);
    }

    #[test]
    fn block_project_examples() {
        let l = layout(&[2, 2]);
        let sets = vec![
            SimpleSet::uniform_box(2, -1.0, 1.0).unwrap(),
            SimpleSet::full_space(2),
        ];
        let v = JointDecision::new(l.clone(), vec![2.0, 0.5, 7.0, -9.0]).unwrap();
        let p = block_project(&sets, &v).unwrap();
        assert_eq!(p.block(0), &[1.0, 0.5]);
        assert_eq!(p.block(1), &[7.0, -9.0]);

        // The imitation game's first agent lives in [0.1, 10]².
        let sets = vec![
            SimpleSet::uniform_box(2, 0.1, 10.0).unwrap(),
            SimpleSet::full_space(2),
        ];
        let v = JointDecision::new(l, vec![0.0, 5.0, 0.0, 0.0]).unwrap();
        assert_eq!(block_project(&sets, &v).unwrap().block(0), &[0.1, 5.0]);
    }

    #[test]
    fn block_project_rejects_mismatch() {
        let v = JointDecision::zeros(layout(&[2, 2]));
        let sets = vec![SimpleSet::full_space(2)];
        assert!(matches!(
            block_project(&sets, &v),
            Err(Error::DimensionMismatch { .. })
        ));
        let sets = vec![SimpleSet::full_space(2), SimpleSet::full_space(3)];
        assert!(block_project(&sets, &v).is_err());
    }
}
