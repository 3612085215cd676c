use crate::error::{Error, Result};

/// Dense row-major array of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Array {
    pub fn zeros(shape: &[usize]) -> Array {
        let n: usize = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            values: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Array {
        let n: usize = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            values: vec![value; n],
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Array> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Dimension(format!(
                "shape {:?} requires {} values, got {}",
                shape,
                n,
                values.len()
            )));
        }
        Ok(Array {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn scalar(value: f64) -> Array {
        Array {
            shape: vec![1],
            values: vec![value],
        }
    }

    /// n×n identity matrix.
    pub fn eye(n: usize) -> Array {
        let mut a = Array::zeros(&[n, n]);
        for i in 0..n {
            a.values[i * n + i] = 1.0;
        }
        a
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Array {
        let n: usize = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            values: (0..n).map(|i| f(i)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
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

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Array> {
        let n: usize = shape.iter().product();
        if n != self.values.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Array {
            shape: shape.to_vec(),
            values: self.values.clone(),
        })
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.values[i * self.shape[1] + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_eq!(self.shape.len(), 2);
        self.values[i * self.shape[1] + j] = v;
    }

    pub fn at3(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 3);
        self.values[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    pub fn set3(&mut self, i: usize, j: usize, k: usize, v: f64) {
        debug_assert_eq!(self.shape.len(), 3);
        self.values[(i * self.shape[1] + j) * self.shape[2] + k] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        Array {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Array, f: impl Fn(f64, f64) -> f64) -> Result<Array> {
        if self.shape != other.shape {
            return Err(Error::shape("elementwise op", &self.shape, &other.shape));
        }
        Ok(Array {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Array) -> Result<Array> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Array) -> Result<Array> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Array {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.sum() / self.values.len() as f64
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: context.to_string(),
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Maximum absolute difference between two same-shaped arrays.
    pub fn max_abs_diff(&self, other: &Array) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_product_matches_len() {
        let a = Array::zeros(&[3, 4]);
        assert_eq!(a.len(), 12);
        assert_eq!(a.shape(), &[3, 4]);
    }

    #[test]
    fn from_vec_rejects_bad_len() {
        assert!(Array::from_vec(&[2, 2], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn reshape_preserves_values() {
        let a = Array::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = a.reshape(&[3, 2]).unwrap();
        assert_eq!(b.values(), a.values());
        assert!(a.reshape(&[4, 2]).is_err());
    }

    #[test]
    fn indexing_is_row_major() {
        let a = Array::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(a.at2(0, 2), 3.0);
        assert_eq!(a.at2(1, 0), 4.0);
    }
}
