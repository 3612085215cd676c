use crate::error::{Error, Result};
use crate::numerics::adam::Parameter;
use crate::numerics::array::Array;
use crate::numerics::rng::RngState;

/// Returns row `index` of a [V × D] table.
pub fn embedding_lookup(table: &Array, index: usize, name: &str) -> Result<Array> {
    let (v, d) = (table.shape()[0], table.shape()[1]);
    if index >= v {
        return Err(Error::IndexOutOfRange {
            name: name.to_string(),
            index,
            len: v,
        });
    }
    Array::from_vec(&[d], table.values()[index * d..(index + 1) * d].to_vec())
}

/// Learned embedding table for one categorical variable.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub table: Parameter,
    pub var_name: String,
}

impl EmbeddingTable {
    /// Rows initialized N(0, std^2).
    pub fn new(var_name: &str, categories: usize, dim: usize, std: f64, rng: &mut RngState) -> EmbeddingTable {
        EmbeddingTable {
            table: Parameter::gaussian(
                format!("embed.{var_name}"),
                &[categories, dim],
                std,
                rng,
            ),
            var_name: var_name.to_string(),
        }
    }

    pub fn categories(&self) -> usize {
        self.table.value.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.value.shape()[1]
    }

    pub fn lookup(&self, index: usize) -> Result<Array> {
        embedding_lookup(&self.table.value, index, &self.var_name)
    }

    /// Batched lookup: one row per index, stacked to [B × D].
    pub fn lookup_batch(&self, indices: &[usize]) -> Result<Array> {
        let d = self.dim();
        let mut out = Array::zeros(&[indices.len(), d]);
        for (bi, &idx) in indices.iter().enumerate() {
            if idx >= self.categories() {
                return Err(Error::IndexOutOfRange {
                    name: self.var_name.clone(),
                    index: idx,
                    len: self.categories(),
                });
            }
            let row = &self.table.value.values()[idx * d..(idx + 1) * d];
            out.values_mut()[bi * d..(bi + 1) * d].copy_from_slice(row);
        }
        Ok(out)
    }

    /// Scatters upstream gradients [B × D] back into the looked-up rows.
    /// Repeated indices accumulate.
    pub fn backward_batch(&mut self, indices: &[usize], dy: &Array) -> Result<()> {
        let d = self.dim();
        if dy.shape() != [indices.len(), d] {
            return Err(Error::shape("embedding backward", dy.shape(), &[indices.len(), d]));
        }
        for (bi, &idx) in indices.iter().enumerate() {
            for j in 0..d {
                self.table.grad.values_mut()[idx * d + j] += dy.values()[bi * d + j];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_returns_row() {
        let table = Array::eye(3);
        let row = embedding_lookup(&table, 1, "kind").unwrap();
        assert_eq!(row.values(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn out_of_range_names_variable_and_count() {
        let table = Array::eye(3);
        let err = embedding_lookup(&table, 3, "building_type").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("building_type") && msg.contains('3'), "{msg}");
    }

    #[test]
    fn repeated_index_accumulates_gradient() {
        let mut rng = RngState::new(3);
        let mut emb = EmbeddingTable::new("v", 4, 2, 0.1, &mut rng);
        let dy = Array::from_vec(&[3, 2], vec![1., 1., 2., 2., 4., 4.]).unwrap();
        emb.backward_batch(&[1, 1, 2], &dy).unwrap();
        assert_eq!(emb.table.grad.at2(1, 0), 3.0);
        assert_eq!(emb.table.grad.at2(2, 1), 4.0);
        assert_eq!(emb.table.grad.at2(0, 0), 0.0);
    }
}
