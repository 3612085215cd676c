//! Conditional generators: the vanilla GAN baseline, ACGAN, and a diffusion
//! model with interpretable trend and Fourier seasonality layers, plus the
//! conditioned-noise assembly they share.

pub mod diffusion;
pub mod gan;

use crate::error::{Error, Result};
use crate::numerics::Array;

pub use diffusion::{cosine_beta_schedule, forward_diffuse, DiffusionConfig, DiffusionModel};
pub use gan::{GanConfig, GanModel};

/// Noise concatenated with the context embedding along the feature axis.
#[derive(Debug, Clone)]
pub struct ConditionedNoise {
    /// [B × T × (D_z + d_h)]
    pub z_star: Array,
    pub noise_dim: usize,
    pub h_dim: usize,
}

/// Replicates h across the time axis and concatenates it to the noise on the
/// feature axis: z* = [z, h'].
pub fn assemble_conditioned_noise(z: &Array, h: &Array) -> Result<ConditionedNoise> {
    if z.shape().len() != 3 || h.shape().len() != 2 {
        return Err(Error::Dimension(format!(
            "conditioned noise expects z [B×T×D_z] and h [B×d_h], got {:?} and {:?}",
            z.shape(),
            h.shape()
        )));
    }
    let (b, t, d_z) = (z.shape()[0], z.shape()[1], z.shape()[2]);
    let (hb, d_h) = (h.shape()[0], h.shape()[1]);
    if b != hb {
        return Err(Error::shape("conditioned noise batch", z.shape(), h.shape()));
    }
    let width = d_z + d_h;
    let mut z_star = Array::zeros(&[b, t, width]);
    for bi in 0..b {
        for ti in 0..t {
            let dst = (bi * t + ti) * width;
            let src = (bi * t + ti) * d_z;
            z_star.values_mut()[dst..dst + d_z].copy_from_slice(&z.values()[src..src + d_z]);
            let hsrc = bi * d_h;
            z_star.values_mut()[dst + d_z..dst + width]
                .copy_from_slice(&h.values()[hsrc..hsrc + d_h]);
        }
    }
    Ok(ConditionedNoise {
        z_star,
        noise_dim: d_z,
        h_dim: d_h,
    })
}

/// Splits an upstream gradient on z* into the h part, summed over time.
pub fn conditioned_noise_h_grad(dz_star: &Array, noise_dim: usize, h_dim: usize) -> Array {
    let (b, t, width) = (dz_star.shape()[0], dz_star.shape()[1], dz_star.shape()[2]);
    debug_assert_eq!(width, noise_dim + h_dim);
    let mut dh = Array::zeros(&[b, h_dim]);
    for bi in 0..b {
        for ti in 0..t {
            let src = (bi * t + ti) * width + noise_dim;
            for j in 0..h_dim {
                dh.values_mut()[bi * h_dim + j] += dz_star.values()[src + j];
            }
        }
    }
    dh
}
