use crate::numerics::array::Array;

/// Complex DFT coefficients of a real sequence, split into real and
/// imaginary parts. X_k = Σ_t x_t · e^{−2πi·kt/T}.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn magnitude(&self, k: usize) -> f64 {
        (self.re[k] * self.re[k] + self.im[k] * self.im[k]).sqrt()
    }

    pub fn phase(&self, k: usize) -> f64 {
        self.im[k].atan2(self.re[k])
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.magnitude(k)).collect()
    }
}

/// Naive O(T²) DFT of a real sequence.
pub fn dft(x: &[f64]) -> Spectrum {
    let t_len = x.len();
    let mut re = vec![0.0; t_len];
    let mut im = vec![0.0; t_len];
    for (k, (rk, ik)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
        let mut acc_re = 0.0;
        let mut acc_im = 0.0;
        for (t, &xt) in x.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / t_len as f64;
            acc_re += xt * angle.cos();
            acc_im += xt * angle.sin();
        }
        *rk = acc_re;
        *ik = acc_im;
    }
    Spectrum { re, im }
}

/// DFT along the last axis of a [.. × T] array, one spectrum per row.
pub fn dft_rows(x: &Array) -> Vec<Spectrum> {
    let t_len = *x.shape().last().expect("non-empty shape");
    x.values().chunks(t_len).map(dft).collect()
}
