//! Distance from every pixel to the nearest foreground pixel.

use serde::{Deserialize, Serialize};

use super::{BinaryImage, ImageError, RasterImage};

/// Axial step weight of the 3x3 chamfer mask.
pub const CHAMFER_AXIAL: f64 = 0.955;
/// Diagonal step weight of the 3x3 chamfer mask.
pub const CHAMFER_DIAGONAL: f64 = 1.3693;

/// Value stored everywhere when the input has no foreground at all.
pub const SATURATED_DISTANCE: f64 = f64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// Two-pass 3x3 chamfer with weights 0.955 / 1.3693.
    #[default]
    Chamfer3x3,
    /// Exact Euclidean distance (Meijster et al. separable algorithm).
    ExactEuclidean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
    saturated: bool,
}

impl DistanceMap {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width as usize * height as usize {
            return Err(ImageError::InvalidInput("distance buffer size mismatch".into()));
        }
        if data.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(ImageError::InvalidInput(
                "distances must be non-negative".into(),
            ));
        }
        let saturated = !data.is_empty() && data.iter().all(|&v| v == SATURATED_DISTANCE);
        Ok(Self {
            width,
            height,
            data,
            saturated,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Set when the source mask had no foreground pixel.
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }
}

pub fn distance_transform(bin: &BinaryImage, metric: DistanceMetric) -> DistanceMap {
    let (w, h) = (bin.width(), bin.height());
    if bin.foreground_count() == 0 {
        log::warn!("distance transform of an image without foreground; saturating");
        return DistanceMap {
            width: w,
            height: h,
            data: vec![SATURATED_DISTANCE; w as usize * h as usize],
            saturated: true,
        };
    }
    let data = match metric {
        DistanceMetric::Chamfer3x3 => chamfer(bin, CHAMFER_AXIAL, CHAMFER_DIAGONAL),
        DistanceMetric::ExactEuclidean => squared_euclidean(bin)
            .into_iter()
            .map(|d| (d as f64).sqrt())
            .collect(),
    };
    DistanceMap {
        width: w,
        height: h,
        data,
        saturated: false,
    }
}

fn chamfer(bin: &BinaryImage, a: f64, b: f64) -> Vec<f64> {
    let (w, h) = (bin.width() as usize, bin.height() as usize);
    let mut d: Vec<f64> = bin
        .data()
        .iter()
        .map(|&fg| if fg { 0.0 } else { f64::INFINITY })
        .collect();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut v = d[i];
            if x > 0 {
                v = v.min(d[i - 1] + a);
            }
            if y > 0 {
                let up = i - w;
                v = v.min(d[up] + a);
                if x > 0 {
                    v = v.min(d[up - 1] + b);
                }
                if x + 1 < w {
                    v = v.min(d[up + 1] + b);
                }
            }
            d[i] = v;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut v = d[i];
            if x + 1 < w {
                v = v.min(d[i + 1] + a);
            }
            if y + 1 < h {
                let down = i + w;
                v = v.min(d[down] + a);
                if x + 1 < w {
                    v = v.min(d[down + 1] + b);
                }
                if x > 0 {
                    v = v.min(d[down - 1] + b);
                }
            }
            d[i] = v;
        }
    }
    d
}

/// Squared Euclidean distances in integer arithmetic. Requires at least one
/// foreground pixel.
fn squared_euclidean(bin: &BinaryImage) -> Vec<u64> {
    let (w, h) = (bin.width() as usize, bin.height() as usize);
    let inf = (w + h) as i64;

    // Column pass: vertical distance to the nearest foreground in the same column.
    let mut g = vec![0i64; w * h];
    for x in 0..w {
        g[x] = if bin.data()[x] { 0 } else { inf };
        for y in 1..h {
            let i = y * w + x;
            g[i] = if bin.data()[i] { 0 } else { g[i - w] + 1 };
        }
        for y in (0..h.saturating_sub(1)).rev() {
            let i = y * w + x;
            if g[i + w] < g[i] {
                g[i] = g[i + w] + 1;
            }
        }
    }

    // Row pass: lower envelope of parabolas f(x, i) = (x - i)^2 + g(i)^2.
    let mut out = vec![0u64; w * h];
    let mut s = vec![0usize; w];
    let mut t = vec![0i64; w];
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + row[i].pow(2);
        let sep = |i: usize, u: usize| {
            let (i64_, u64_) = (i as i64, u as i64);
            (u64_ * u64_ - i64_ * i64_ + row[u].pow(2) - row[i].pow(2)).div_euclid(2 * (u64_ - i64_))
        };
        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let boundary = 1 + sep(s[q as usize], u);
                if boundary < w as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = boundary;
                }
            }
        }
        for u in (0..w).rev() {
            out[y * w + u] = f(u as i64, s[q as usize]) as u64;
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    out
}

/// Linear min-max scaling to 0..=255 with half-up rounding. Constant maps
/// (including saturated ones) become all zeros.
pub fn normalize_distance(dm: &DistanceMap) -> RasterImage {
    let (min, max) = dm
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let data = if max > min {
        let span = max - min;
        dm.data
            .iter()
            .map(|&v| ((v - min) / span * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect()
    } else {
        vec![0; dm.data.len()]
    };
    RasterImage::new(dm.width, dm.height, 1, data).expect("dimensions already validated")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: u32, h: u32, fg: &[(u32, u32)]) -> BinaryImage {
        let mut m = BinaryImage::empty(w, h).unwrap();
        for &(x, y) in fg {
            m.set(x, y, true);
        }
        m
    }

    #[test]
    fn chamfer_row_around_center() {
        let dm = distance_transform(&mask(3, 1, &[(1, 0)]), DistanceMetric::Chamfer3x3);
        assert_eq!(dm.data(), &[0.955, 0.0, 0.955]);
    }

    #[test]
    fn chamfer_opposite_corner_is_two_diagonals() {
        let dm = distance_transform(&mask(3, 3, &[(0, 0)]), DistanceMetric::Chamfer3x3);
        assert!((dm.get(2, 2) - 2.7386).abs() < 1e-12);
        let exact = distance_transform(&mask(3, 3, &[(0, 0)]), DistanceMetric::ExactEuclidean);
        assert_eq!(exact.get(2, 2), 8f64.sqrt());
    }

    #[test]
    fn all_foreground_is_zero() {
        let m = BinaryImage::new(4, 3, vec![true; 12]).unwrap();
        for metric in [DistanceMetric::Chamfer3x3, DistanceMetric::ExactEuclidean] {
            assert!(distance_transform(&m, metric).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn empty_mask_saturates() {
        let dm = distance_transform(&BinaryImage::empty(3, 2).unwrap(), DistanceMetric::Chamfer3x3);
        assert!(dm.is_saturated());
        assert!(dm.data().iter().all(|&v| v == SATURATED_DISTANCE));
        assert!(normalize_distance(&dm).data().iter().all(|&v| v == 0));
    }

    #[test]
    fn normalize_midpoint_rounds_up() {
        let dm = DistanceMap::new(3, 1, vec![0.0, 5.0, 10.0]).unwrap();
        assert_eq!(normalize_distance(&dm).data(), &[0, 128, 255]);
    }

    #[test]
    fn normalize_full_range_is_unchanged() {
        let dm = DistanceMap::new(2, 1, vec![0.0, 255.0]).unwrap();
        assert_eq!(normalize_distance(&dm).data(), &[0, 255]);
    }

    #[test]
    fn normalize_zero_map() {
        let dm = DistanceMap::new(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(normalize_distance(&dm).data(), &[0; 4]);
    }

    #[test]
    fn single_column_and_row_images() {
        let col = mask(1, 5, &[(0, 4)]);
        let dm = distance_transform(&col, DistanceMetric::ExactEuclidean);
        assert_eq!(dm.data(), &[4.0, 3.0, 2.0, 1.0, 0.0]);
    }
}
