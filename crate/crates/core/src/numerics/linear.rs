use crate::error::{Error, Result};
use crate::numerics::adam::Parameter;
use crate::numerics::array::Array;
use crate::numerics::rng::RngState;

/// C[i][j] = sum_l A[i][l] * B[l][j].
pub fn matmul(a: &Array, b: &Array) -> Result<Array> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut c = Array::zeros(&[m, n]);
    let av = a.values();
    let bv = b.values();
    let cv = c.values_mut();
    for i in 0..m {
        for l in 0..k {
            let ail = av[i * k + l];
            if ail == 0.0 {
                continue;
            }
            let brow = &bv[l * n..(l + 1) * n];
            let crow = &mut cv[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += ail * brow[j];
            }
        }
    }
    Ok(c)
}

/// Gradients of C = A·B w.r.t. A and B given upstream dC.
pub fn matmul_backward(a: &Array, b: &Array, dc: &Array) -> Result<(Array, Array)> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    if dc.shape() != [m, n] {
        return Err(Error::shape("matmul backward", dc.shape(), &[m, n]));
    }
    // dA = dC · B^T
    let mut da = Array::zeros(&[m, k]);
    for i in 0..m {
        for l in 0..k {
            let mut acc = 0.0;
            for j in 0..n {
                acc += dc.at2(i, j) * b.at2(l, j);
            }
            da.set2(i, l, acc);
        }
    }
    // dB = A^T · dC
    let mut db = Array::zeros(&[k, n]);
    for l in 0..k {
        for i in 0..m {
            let ail = a.at2(i, l);
            if ail == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = db.at2(l, j) + ail * dc.at2(i, j);
                db.set2(l, j, v);
            }
        }
    }
    Ok((da, db))
}

/// Fully connected layer y = x·W + b with W: [in × out].
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Parameter,
    pub b: Parameter,
}

impl Linear {
    pub fn new(name: &str, fan_in: usize, fan_out: usize, rng: &mut RngState) -> Linear {
        Linear {
            w: Parameter::kaiming(format!("{name}.w"), &[fan_in, fan_out], fan_in, rng),
            b: Parameter::zeros(format!("{name}.b"), &[fan_out]),
        }
    }

    pub fn zeroed(name: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: Parameter::zeros(format!("{name}.w"), &[fan_in, fan_out]),
            b: Parameter::zeros(format!("{name}.b"), &[fan_out]),
        }
    }

    pub fn forward(&self, x: &Array) -> Result<Array> {
        let mut y = matmul(x, &self.w.value)?;
        let out = self.w.value.shape()[1];
        let bv = self.b.value.values();
        for row in y.values_mut().chunks_mut(out) {
            for (v, bj) in row.iter_mut().zip(bv) {
                *v += bj;
            }
        }
        Ok(y)
    }

    /// Accumulates dW, db and returns dx. `x` must be the forward input.
    pub fn backward(&mut self, x: &Array, dy: &Array) -> Result<Array> {
        let (dx, dw) = matmul_backward(x, &self.w.value, dy)?;
        self.w.accumulate_grad(&dw)?;
        let out = self.w.value.shape()[1];
        let mut db = Array::zeros(&[out]);
        for row in dy.values().chunks(out) {
            for (g, d) in db.values_mut().iter_mut().zip(row) {
                *g += d;
            }
        }
        self.b.accumulate_grad(&db)?;
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.w, &self.b]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w, &mut self.b]
    }
}
