use serde::{Deserialize, Serialize};

use crate::rng::EnvRng;

/// Photometric augmentation of grayscale images. Each field is a `[lo, hi]`
/// range sampled uniformly per image, except `noise_std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageAugmentation {
    pub enabled: bool,
    /// Additive offset.
    pub brightness: [f64; 2],
    /// Scale about mid-gray (0.5).
    pub contrast: [f64; 2],
    /// Gaussian blur standard deviation, pixels.
    pub blur_sigma: [f64; 2],
    /// Per-pixel Gaussian noise standard deviation.
    pub noise_std: f64,
}

impl Default for ImageAugmentation {
    fn default() -> Self {
        Self { enabled: false, brightness: [-0.3, 0.3], contrast: [0.5, 1.5], blur_sigma: [0.0, 1.5], noise_std: 0.05 }
    }
}

impl ImageAugmentation {
    pub fn identity() -> Self {
        Self { enabled: true, brightness: [0.0, 0.0], contrast: [1.0, 1.0], blur_sigma: [0.0, 0.0], noise_std: 0.0 }
    }
}

/// Normalized 1-D Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Separable blur with edge replication, in place.
fn blur(img: &mut [f64], rows: usize, cols: usize, sigma: f64) {
    let k = gaussian_kernel(sigma);
    if k.len() == 1 {
        return;
    }
    let radius = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; img.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (t, w) in k.iter().enumerate() {
                let cc = (c as i64 + t as i64 - radius).clamp(0, cols as i64 - 1) as usize;
                acc += w * img[r * cols + cc];
            }
            tmp[r * cols + c] = acc;
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (t, w) in k.iter().enumerate() {
                let rr = (r as i64 + t as i64 - radius).clamp(0, rows as i64 - 1) as usize;
                acc += w * tmp[rr * cols + c];
            }
            img[r * cols + c] = acc;
        }
    }
}

/// Brightness offset, contrast about 0.5, Gaussian blur, then per-pixel
/// noise; the result is clamped to `[0, 1]`. A disabled spec returns the
/// image unchanged.
pub fn augment_image(img: &[f64], rows: usize, cols: usize, spec: &ImageAugmentation, rng: &mut EnvRng) -> Vec<f64> {
    assert_eq!(img.len(), rows * cols, "image shape");
    if !spec.enabled {
        return img.to_vec();
    }
    let offset = rng.uniform(spec.brightness[0], spec.brightness[1]);
    let scale = rng.uniform(spec.contrast[0], spec.contrast[1]);
    let sigma = rng.uniform(spec.blur_sigma[0], spec.blur_sigma[1]);
    let mut out: Vec<f64> = img
        .iter()
        .map(|&p| {
            let p = p + offset;
            if scale == 1.0 {
                p
            } else {
                (p - 0.5) * scale + 0.5
            }
        })
        .collect();
    blur(&mut out, rows, cols, sigma);
    if spec.noise_std > 0.0 {
        for p in out.iter_mut() {
            *p += spec.noise_std * rng.normal();
        }
    }
    for p in out.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;

    #[test]
    fn identity_spec_is_identity() {
        let img: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let mut rng = EnvRng::from_seed(0);
        assert_eq!(augment_image(&img, 3, 4, &ImageAugmentation::identity(), &mut rng), img);
        let off = ImageAugmentation { enabled: false, ..Default::default() };
        assert_eq!(augment_image(&img, 3, 4, &off, &mut rng), img);
    }

    #[test]
    fn blur_of_constant_is_constant() {
        let img = vec![0.37; 40 * 60];
        let spec = ImageAugmentation { blur_sigma: [0.5, 2.5], ..ImageAugmentation::identity() };
        let mut rng = EnvRng::from_seed(4);
        for _ in 0..5 {
            for p in augment_image(&img, 40, 60, &spec, &mut rng) {
                assert_close!(p, 0.37, 1e-12);
            }
        }
    }

    #[test]
    fn blur_matches_direct_convolution() {
        let img = [0.1, 0.9, 0.3, 0.0, 1.0, 0.5, 0.7, 0.2, 0.4];
        let sigma = 0.8;
        let spec = ImageAugmentation { blur_sigma: [sigma, sigma], ..ImageAugmentation::identity() };
        let out = augment_image(&img, 3, 3, &spec, &mut EnvRng::from_seed(0));

        // Direct 2-D convolution with the outer-product kernel and replicated
        // borders.
        let radius = (3.0f64 * sigma).ceil() as i64;
        let w = |d: i64| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
        let norm: f64 = (-radius..=radius).map(w).sum::<f64>().powi(2);
        for r in 0..3i64 {
            for c in 0..3i64 {
                let mut acc = 0.0;
                for dr in -radius..=radius {
                    for dc in -radius..=radius {
                        let rr = (r + dr).clamp(0, 2) as usize;
                        let cc = (c + dc).clamp(0, 2) as usize;
                        acc += w(dr) * w(dc) * img[rr * 3 + cc];
                    }
                }
                assert_close!(out[(r * 3 + c) as usize], acc / norm, 1e-6);
            }
        }
    }

    #[test]
    fn output_in_unit_range_and_shape_preserved() {
        let img: Vec<f64> = (0..2400).map(|i| ((i * 7) % 2) as f64).collect();
        let spec = ImageAugmentation { enabled: true, brightness: [-0.6, 0.6], contrast: [0.2, 3.0], blur_sigma: [0.0, 2.0], noise_std: 0.3 };
        let mut rng = EnvRng::from_seed(1);
        for _ in 0..10 {
            let out = augment_image(&img, 40, 60, &spec, &mut rng);
            assert_eq!(out.len(), img.len());
            assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn brightness_then_contrast() {
        let spec = ImageAugmentation { brightness: [0.1, 0.1], contrast: [2.0, 2.0], ..ImageAugmentation::identity() };
        let out = augment_image(&[0.5, 0.3], 1, 2, &spec, &mut EnvRng::from_seed(0));
        assert_close!(out[0], 0.7, 1e-12);
        assert_close!(out[1], 0.3, 1e-12);
    }
}
