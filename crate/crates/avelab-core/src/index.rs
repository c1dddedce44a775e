//! Mixed-radix flattening for product state spaces (spins × bonds, X × G,
//! temperature stacks). Coordinate 0 is the most significant digit.

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    dims: Vec<usize>,
    size: usize,
}

impl MixedRadix {
    /// An empty `dims` list is the nullary product: a one-point space whose
    /// only index is 0.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidParameter("mixed-radix dims must be positive".into()));
        }
        let mut size: usize = 1;
        for &d in &dims {
            size = size
                .checked_mul(d)
                .ok_or(Error::TooLarge { what: "product space", size: usize::MAX, max: usize::MAX })?;
        }
        Ok(Self { dims, size })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.dims.len());
        let mut idx = 0;
        for (d, &dim) in digits.iter().zip(&self.dims) {
            debug_assert!(*d < dim);
            idx = idx * dim + d;
        }
        idx
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for (slot, &dim) in digits.iter_mut().zip(&self.dims).rev() {
            *slot = idx % dim;
            idx /= dim;
        }
        digits
    }
}
