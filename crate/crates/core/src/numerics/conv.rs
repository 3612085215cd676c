use crate::error::{Error, Result};
use crate::numerics::adam::Parameter;
use crate::numerics::array::Array;
use crate::numerics::rng::RngState;

/// Output length of a strided cross-correlation.
pub fn conv_out_len(t: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = t + 2 * pad;
    if padded < kernel {
        return Err(Error::Config(format!(
            "conv1d: input length {t} with pad {pad} is shorter than kernel {kernel}"
        )));
    }
    let out = (padded - kernel) / stride + 1;
    if out < 1 {
        return Err(Error::Config(format!(
            "conv1d: output length would be {out} for input {t}, kernel {kernel}, stride {stride}, pad {pad}"
        )));
    }
    Ok(out)
}

/// Standard cross-correlation. x: [B, C_in, T], w: [C_out, C_in, K] -> [B, C_out, T'].
pub fn conv1d(x: &Array, w: &Array, bias: &Array, stride: usize, pad: usize) -> Result<Array> {
    let (b, c_in, t) = dims3(x, "conv1d input")?;
    let (c_out, wc_in, k) = dims3(w, "conv1d weight")?;
    if wc_in != c_in {
        return Err(Error::shape("conv1d channels", x.shape(), w.shape()));
    }
    let t_out = conv_out_len(t, k, stride, pad)?;
    let mut y = Array::zeros(&[b, c_out, t_out]);
    for bi in 0..b {
        for co in 0..c_out {
            for to in 0..t_out {
                let mut acc = bias.values()[co];
                for ci in 0..c_in {
                    for ki in 0..k {
                        let ti = (to * stride + ki) as isize - pad as isize;
                        if ti >= 0 && (ti as usize) < t {
                            acc += x.at3(bi, ci, ti as usize) * w.at3(co, ci, ki);
                        }
                    }
                }
                y.set3(bi, co, to, acc);
            }
        }
    }
    Ok(y)
}

/// Backward of conv1d w.r.t. input, weight, and bias.
pub fn conv1d_backward(
    x: &Array,
    w: &Array,
    stride: usize,
    pad: usize,
    dy: &Array,
) -> Result<(Array, Array, Array)> {
    let (b, c_in, t) = dims3(x, "conv1d input")?;
    let (c_out, _, k) = dims3(w, "conv1d weight")?;
    let t_out = dy.shape()[2];
    let mut dx = Array::zeros(&[b, c_in, t]);
    let mut dw = Array::zeros(w.shape());
    let mut db = Array::zeros(&[c_out]);
    for bi in 0..b {
        for co in 0..c_out {
            for to in 0..t_out {
                let g = dy.at3(bi, co, to);
                if g == 0.0 {
                    continue;
                }
                db.values_mut()[co] += g;
                for ci in 0..c_in {
                    for ki in 0..k {
                        let ti = (to * stride + ki) as isize - pad as isize;
                        if ti >= 0 && (ti as usize) < t {
                            let ti = ti as usize;
                            let v = dx.at3(bi, ci, ti) + g * w.at3(co, ci, ki);
                            dx.set3(bi, ci, ti, v);
                            let dwv = dw.at3(co, ci, ki) + g * x.at3(bi, ci, ti);
                            dw.set3(co, ci, ki, dwv);
                        }
                    }
                }
            }
        }
    }
    Ok((dx, dw, db))
}

/// Output length of the transposed operation.
pub fn conv_transpose_out_len(t: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let raw = (t - 1) * stride + kernel;
    if raw < 2 * pad + 1 {
        return Err(Error::Config(format!(
            "conv1d_transposed: output length would be non-positive for input {t}, kernel {kernel}, stride {stride}, pad {pad}"
        )));
    }
    Ok(raw - 2 * pad)
}

/// Transposed convolution. x: [B, C_in, T], w: [C_in, C_out, K] -> [B, C_out, T_out].
pub fn conv1d_transposed(x: &Array, w: &Array, bias: &Array, stride: usize, pad: usize) -> Result<Array> {
    let (b, c_in, t) = dims3(x, "conv1d_transposed input")?;
    let (wc_in, c_out, k) = dims3(w, "conv1d_transposed weight")?;
    if wc_in != c_in {
        return Err(Error::shape("conv1d_transposed channels", x.shape(), w.shape()));
    }
    let t_out = conv_transpose_out_len(t, k, stride, pad)?;
    let mut y = Array::zeros(&[b, c_out, t_out]);
    for bi in 0..b {
        for co in 0..c_out {
            for to in 0..t_out {
                y.set3(bi, co, to, bias.values()[co]);
            }
        }
        for ci in 0..c_in {
            for ti in 0..t {
                let xv = x.at3(bi, ci, ti);
                if xv == 0.0 {
                    continue;
                }
                for ki in 0..k {
                    let to = (ti * stride + ki) as isize - pad as isize;
                    if to >= 0 && (to as usize) < t_out {
                        for co in 0..c_out {
                            let v = y.at3(bi, co, to as usize) + xv * w.at3(ci, co, ki);
                            y.set3(bi, co, to as usize, v);
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Backward of conv1d_transposed w.r.t. input, weight, and bias.
pub fn conv1d_transposed_backward(
    x: &Array,
    w: &Array,
    stride: usize,
    pad: usize,
    dy: &Array,
) -> Result<(Array, Array, Array)> {
    let (b, c_in, t) = dims3(x, "conv1d_transposed input")?;
    let (_, c_out, k) = dims3(w, "conv1d_transposed weight")?;
    let t_out = dy.shape()[2];
    let mut dx = Array::zeros(&[b, c_in, t]);
    let mut dw = Array::zeros(w.shape());
    let mut db = Array::zeros(&[c_out]);
    for bi in 0..b {
        for co in 0..c_out {
            for to in 0..t_out {
                db.values_mut()[co] += dy.at3(bi, co, to);
            }
        }
        for ci in 0..c_in {
            for ti in 0..t {
                let xv = x.at3(bi, ci, ti);
                let mut acc = 0.0;
                for ki in 0..k {
                    let to = (ti * stride + ki) as isize - pad as isize;
                    if to >= 0 && (to as usize) < t_out {
                        for co in 0..c_out {
                            let g = dy.at3(bi, co, to as usize);
                            acc += g * w.at3(ci, co, ki);
                            let dwv = dw.at3(ci, co, ki) + g * xv;
                            dw.set3(ci, co, ki, dwv);
                        }
                    }
                }
                dx.set3(bi, ci, ti, acc);
            }
        }
    }
    Ok((dx, dw, db))
}

fn dims3(a: &Array, what: &str) -> Result<(usize, usize, usize)> {
    if a.shape().len() != 3 {
        return Err(Error::Dimension(format!(
            "{what} must be rank 3, got shape {:?}",
            a.shape()
        )));
    }
    Ok((a.shape()[0], a.shape()[1], a.shape()[2]))
}

/// Convolution layer with owned parameters.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: Parameter,
    pub b: Parameter,
    pub stride: usize,
    pub pad: usize,
    pub transposed: bool,
}

impl Conv1d {
    pub fn new(
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut RngState,
    ) -> Conv1d {
        let fan_in = c_in * kernel;
        Conv1d {
            w: Parameter::kaiming(format!("{name}.w"), &[c_out, c_in, kernel], fan_in, rng),
            b: Parameter::zeros(format!("{name}.b"), &[c_out]),
            stride,
            pad,
            transposed: false,
        }
    }

    pub fn new_transposed(
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut RngState,
    ) -> Conv1d {
        let fan_in = c_in * kernel;
        Conv1d {
            w: Parameter::kaiming(format!("{name}.w"), &[c_in, c_out, kernel], fan_in, rng),
            b: Parameter::zeros(format!("{name}.b"), &[c_out]),
            stride,
            pad,
            transposed: true,
        }
    }

    pub fn forward(&self, x: &Array) -> Result<Array> {
        if self.transposed {
            conv1d_transposed(x, &self.w.value, &self.b.value, self.stride, self.pad)
        } else {
            conv1d(x, &self.w.value, &self.b.value, self.stride, self.pad)
        }
    }

    pub fn backward(&mut self, x: &Array, dy: &Array) -> Result<Array> {
        let (dx, dw, db) = if self.transposed {
            conv1d_transposed_backward(x, &self.w.value, self.stride, self.pad, dy)?
        } else {
            conv1d_backward(x, &self.w.value, self.stride, self.pad, dy)?
        };
        self.w.accumulate_grad(&dw)?;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_kernel_is_identity() {
        let x = Array::from_vec(&[1, 1, 5], vec![1., -2., 3., 0.5, 4.]).unwrap();
        let w = Array::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let y = conv1d(&x, &w, &Array::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y.values(), x.values());
        let wt = Array::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let yt = conv1d_transposed(&x, &wt, &Array::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(yt.values(), x.values());
    }

    #[test]
    fn zero_input_zero_output() {
        let x = Array::zeros(&[2, 3, 8]);
        let mut rng = RngState::new(1);
        let w = Array::from_fn(&[4, 3, 4], |_| rng.normal());
        let y = conv1d(&x, &w, &Array::zeros(&[4]), 2, 1).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn halves_and_doubles_length() {
        // kernel 4, stride 2, pad 1: T -> T/2 for conv, T -> 2T for transpose.
        assert_eq!(conv_out_len(8, 4, 2, 1).unwrap(), 4);
        assert_eq!(conv_transpose_out_len(4, 4, 2, 1).unwrap(), 8);
    }

    #[test]
    fn too_short_output_is_config_error() {
        assert!(conv_out_len(1, 4, 2, 0).is_err());
    }
}
