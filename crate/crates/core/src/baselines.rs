//! Reference metrics: squared Euclidean distance and single-scale SSIM.

use crate::error::{Error, Result};
use crate::geometry::{self, GrayImage};

/// Squared Euclidean distance between two images.
pub fn euclidean_metric(reference: &GrayImage, degraded: &GrayImage) -> Result<f64> {
    Ok(geometry::difference(reference, degraded)?.euclidean_sq())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window_side: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window_side: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_side < 3 || self.window_side.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "ssim window side must be odd and >= 3, got {}",
                self.window_side
            )));
        }
        for (name, v) in [
            ("window sigma", self.window_sigma),
            ("k1", self.k1),
            ("k2", self.k2),
            ("dynamic range", self.dynamic_range),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("ssim {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn window_taps(&self) -> Vec<f64> {
        let half = (self.window_side / 2) as f64;
        let raw: Vec<f64> = (0..self.window_side)
            .map(|i| {
                let d = i as f64 - half;
                (-d * d / (2.0 * self.window_sigma * self.window_sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    fn constants(&self) -> (f64, f64) {
        ((self.k1 * self.dynamic_range).powi(2), (self.k2 * self.dynamic_range).powi(2))
    }
}

/// Valid-only separable filtering of a `w × h` field.
fn filter_valid(field: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &field[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + n]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM index over all fully interior windows.
pub fn ssim(reference: &GrayImage, degraded: &GrayImage, cfg: &SsimConfig) -> Result<f64> {
    cfg.validate()?;
    if (reference.width(), reference.height()) != (degraded.width(), degraded.height()) {
        return Err(Error::Shape(format!(
            "image shapes differ: {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            degraded.width(),
            degraded.height()
        )));
    }
    let (w, h) = (reference.width(), reference.height());
    if w < cfg.window_side || h < cfg.window_side {
        return Err(Error::Shape(format!(
            "{w}x{h} image is smaller than the {0}x{0} ssim window",
            cfg.window_side
        )));
    }
    let (a, b) = (reference.values(), degraded.values());
    let taps = cfg.window_taps();
    let product = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        let field: Vec<f64> = a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
        filter_valid(&field, w, h, &taps)
    };
    let mu_x = filter_valid(a, w, h, &taps);
    let mu_y = filter_valid(b, w, h, &taps);
    let xx = product(&|x, _| x * x);
    let yy = product(&|_, y| y * y);
    let xy = product(&|x, y| x * y);

    let (c1, c2) = cfg.constants();
    let total: f64 = (0..mu_x.len())
        .map(|i| ssim_index(mu_x[i], mu_y[i], xx[i] - mu_x[i] * mu_x[i], yy[i] - mu_y[i] * mu_y[i], xy[i] - mu_x[i] * mu_y[i], c1, c2))
        .sum();
    Ok(total / mu_x.len() as f64)
}

fn ssim_index(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn textured(w: usize, h: usize, seed: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 37 + y * 91 + seed * 53 + x * y * 7) % 256) as f64).unwrap()
    }

    /// Direct per-window loop with the 2-D outer-product weights.
    fn ssim_loop(a: &GrayImage, b: &GrayImage, cfg: &SsimConfig) -> f64 {
        let taps = cfg.window_taps();
        let n = cfg.window_side;
        let (c1, c2) = cfg.constants();
        let (mut total, mut count) = (0.0, 0usize);
        for y0 in 0..=a.height() - n {
            for x0 in 0..=a.width() - n {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        let wgt = taps[i] * taps[j];
                        let (x, y) = (a.get(x0 + i, y0 + j), b.get(x0 + i, y0 + j));
                        mx += wgt * x;
                        my += wgt * y;
                        sxx += wgt * x * x;
                        syy += wgt * y * y;
                        sxy += wgt * x * y;
                    }
                }
                total += ssim_index(mx, my, sxx - mx * mx, syy - my * my, sxy - mx * my, c1, c2);
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn euclidean_examples() {
        let a = textured(8, 8, 1);
        assert_eq!(euclidean_metric(&a, &a).unwrap(), 0.0);
        let orig = GrayImage::new(3, 1, vec![0.5, 0.5, 0.5]).unwrap();
        let contiguous = GrayImage::new(3, 1, vec![0.5, 0.6, 0.5]).unwrap();
        let d = euclidean_metric(&orig, &contiguous).unwrap();
        assert!((d - 0.01).abs() < 1e-15);
        let b = textured(8, 8, 2);
        let oracle: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (y - x) * (y - x)).sum();
        assert_eq!(euclidean_metric(&a, &b).unwrap(), oracle);
        assert!(euclidean_metric(&a, &textured(8, 7, 0)).is_err());
    }

    #[test]
    fn ssim_identity_and_structure_loss() {
        let cfg = SsimConfig::default();
        let a = textured(16, 16, 3);
        assert_eq!(ssim(&a, &a, &cfg).unwrap(), 1.0);
        let gray = GrayImage::filled(16, 16, 128.0).unwrap();
        assert!(ssim(&a, &gray, &cfg).unwrap() < 1.0);
    }

    #[test]
    fn ssim_matches_window_loop() {
        let cfg = SsimConfig::default();
        let a = textured(16, 16, 4);
        let b = GrayImage::from_fn(16, 16, |x, y| (a.get(x, y) * 0.8 + ((x ^ y) % 9) as f64 * 3.0).min(255.0)).unwrap();
        let fast = ssim(&a, &b, &cfg).unwrap();
        let slow = ssim_loop(&a, &b, &cfg);
        assert!((fast - slow).abs() <= 1e-9, "{fast} vs {slow}");

        let cfg = SsimConfig {
            window_side: 5,
            window_sigma: 0.8,
            ..cfg
        };
        let b = textured(16, 16, 9);
        assert!((ssim(&a, &b, &cfg).unwrap() - ssim_loop(&a, &b, &cfg)).abs() <= 1e-9);
    }

    #[test]
    fn ssim_errors() {
        let cfg = SsimConfig::default();
        let small = textured(10, 16, 0);
        assert!(matches!(ssim(&small, &small, &cfg), Err(Error::Shape(_))));
        let a = textured(16, 16, 0);
        for bad in [
            SsimConfig { window_side: 4, ..cfg },
            SsimConfig { window_side: 1, ..cfg },
            SsimConfig { k1: 0.0, ..cfg },
            SsimConfig { dynamic_range: -1.0, ..cfg },
        ] {
            assert!(matches!(ssim(&a, &a, &bad), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn taps_sum_to_one() {
        let t = SsimConfig::default().window_taps();
        assert_eq!(t.len(), 11);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(t[0], t[10]);
    }

    fn image_strategy(w: usize, h: usize) -> impl Strategy<Value = GrayImage> {
        proptest::collection::vec(0.0f64..255.0, w * h).prop_map(move |v| GrayImage::new(w, h, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ssim_symmetric_and_bounded(a in image_strategy(13, 12), b in image_strategy(13, 12)) {
            let cfg = SsimConfig::default();
            let ab = ssim(&a, &b, &cfg).unwrap();
            let ba = ssim(&b, &a, &cfg).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ab < 1.0);
            prop_assert!(ab >= -1.0);
        }

        #[test]
        fn euclidean_root_triangle(a in image_strategy(4, 3), b in image_strategy(4, 3), c in image_strategy(4, 3)) {
            let d = |x: &GrayImage, y: &GrayImage| euclidean_metric(x, y).unwrap().sqrt();
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }
    }

}
