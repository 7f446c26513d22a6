//! Luma conversion, global OTSU thresholding and ink-foreground binarization.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{BinaryImage, ImageError, RasterImage};

/// Converts to a single luma channel (0.299 R + 0.587 G + 0.114 B, rounded half-up).
/// Single-channel input is returned unchanged.
pub fn to_grayscale(img: &RasterImage) -> Result<RasterImage, ImageError> {
    match img.channels() {
        1 => Ok(img.clone()),
        3 => {
            let data = img
                .data()
                .chunks_exact(3)
                .map(|p| {
                    let weighted = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                    ((weighted + 500) / 1000) as u8
                })
                .collect();
            RasterImage::new(img.width(), img.height(), 1, data)
        }
        c => Err(ImageError::InvalidInput(format!(
            "unsupported channel count {c}"
        ))),
    }
}

pub fn histogram(gray: &RasterImage) -> Result<[u64; 256], ImageError> {
    require_gray(gray)?;
    let mut hist = [0u64; 256];
    for &v in gray.data() {
        hist[v as usize] += 1;
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtsuThreshold {
    /// Pixels `<= value` form the dark class.
    pub value: u8,
    /// Set when the image holds a single intensity, so no split exists.
    pub degenerate: bool,
}

pub fn otsu_threshold(gray: &RasterImage) -> Result<OtsuThreshold, ImageError> {
    Ok(otsu_from_histogram(&histogram(gray)?))
}

/// OTSU over a 256-bin histogram, evaluated in exact integer arithmetic.
///
/// The between-class variance at threshold `t` is proportional to
/// `(s0 * n - s * w0)^2 / (w0 * w1)`, where `w0`/`s0` are the count and
/// intensity sum of bins `0..=t`. Candidates are compared by
/// cross-multiplication in arbitrary precision, so ties resolve to the
/// smallest `t` independently of float rounding and of the pixel count.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> OtsuThreshold {
    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if occupied.len() <= 1 {
        return OtsuThreshold {
            value: occupied.first().copied().unwrap_or(0) as u8,
            degenerate: true,
        };
    }
    let n: u128 = hist.iter().map(|&c| c as u128).sum();
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u128 * c as u128)
        .sum();
    let (n_big, total_big) = (BigUint::from(n), BigUint::from(total_sum));

    let mut best: Option<(usize, BigUint, BigUint)> = None;
    let (mut w0, mut s0) = (0u128, 0u128);
    for (t, &count) in hist.iter().enumerate() {
        w0 += count as u128;
        s0 += t as u128 * count as u128;
        let w1 = n - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let a = BigUint::from(s0) * &n_big;
        let b = &total_big * BigUint::from(w0);
        let d = if a > b { a - b } else { b - a };
        let numer = &d * &d;
        let denom = BigUint::from(w0) * BigUint::from(w1);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &numer * bd > bn * &denom,
        };
        if better {
            best = Some((t, numer, denom));
        }
    }
    OtsuThreshold {
        value: best.map(|(t, _, _)| t as u8).unwrap_or(0),
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binarized {
    pub mask: BinaryImage,
    pub threshold: OtsuThreshold,
}

/// Marks dark ink as foreground: pixels at or below the OTSU threshold.
///
/// A degenerate (constant) image yields an empty mask.
pub fn binarize_inverted(gray: &RasterImage) -> Result<Binarized, ImageError> {
    let threshold = otsu_threshold(gray)?;
    let data = if threshold.degenerate {
        vec![false; gray.pixel_count()]
    } else {
        gray.data().iter().map(|&v| v <= threshold.value).collect()
    };
    Ok(Binarized {
        mask: BinaryImage::new(gray.width(), gray.height(), data)?,
        threshold,
    })
}

fn require_gray(img: &RasterImage) -> Result<(), ImageError> {
    if img.channels() != 1 {
        return Err(ImageError::InvalidInput(format!(
            "expected a grayscale image, got {} channels",
            img.channels()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32, data: Vec<u8>) -> RasterImage {
        RasterImage::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn luma_of_equal_channels_is_identity() {
        let img = RasterImage::new(1, 1, 3, vec![100, 100, 100]).unwrap();
        assert_eq!(to_grayscale(&img).unwrap().data(), &[100]);
    }

    #[test]
    fn luma_of_pure_red() {
        // 0.299 * 255 = 76.245
        let img = RasterImage::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&img).unwrap().data(), &[76]);
    }

    #[test]
    fn luma_rounds_half_up() {
        // 0.114 * 50 = 5.7 -> 6; 0.587 * 5 = 2.935 -> 3
        let blue = RasterImage::new(1, 1, 3, vec![0, 0, 50]).unwrap();
        assert_eq!(to_grayscale(&blue).unwrap().data(), &[6]);
        let green = RasterImage::new(1, 1, 3, vec![0, 5, 0]).unwrap();
        assert_eq!(to_grayscale(&green).unwrap().data(), &[3]);
    }

    #[test]
    fn grayscale_passthrough() {
        let img = gray(2, 2, vec![1, 2, 3, 4]);
        assert_eq!(to_grayscale(&img).unwrap(), img);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(
            RasterImage::new(0, 3, 1, vec![]),
            Err(ImageError::InvalidInput(_))
        ));
    }

    #[test]
    fn otsu_two_level_picks_smallest_tie() {
        let img = gray(4, 2, vec![0, 0, 0, 0, 255, 255, 255, 255]);
        assert_eq!(
            otsu_threshold(&img).unwrap(),
            OtsuThreshold {
                value: 0,
                degenerate: false
            }
        );
    }

    #[test]
    fn otsu_constant_is_degenerate() {
        let img = gray(3, 3, vec![128; 9]);
        let t = otsu_threshold(&img).unwrap();
        assert_eq!(t.value, 128);
        assert!(t.degenerate);
        assert_eq!(binarize_inverted(&img).unwrap().mask.foreground_count(), 0);
    }

    #[test]
    fn otsu_bimodal() {
        let mut data = vec![50u8; 10];
        data.extend(vec![200u8; 10]);
        assert_eq!(otsu_threshold(&gray(20, 1, data)).unwrap().value, 50);
    }

    #[test]
    fn otsu_rejects_rgb() {
        let img = RasterImage::new(1, 1, 3, vec![0, 0, 0]).unwrap();
        assert!(otsu_threshold(&img).is_err());
    }

    #[test]
    fn glyphs_become_foreground() {
        let img = gray(4, 1, vec![255, 0, 255, 0]);
        let b = binarize_inverted(&img).unwrap();
        assert_eq!(b.mask.data(), &[false, true, false, true]);
    }

    #[test]
    fn white_page_has_no_foreground() {
        let img = gray(5, 5, vec![255; 25]);
        assert_eq!(binarize_inverted(&img).unwrap().mask.foreground_count(), 0);
    }

    #[test]
    fn huge_counts_do_not_overflow() {
        let mut hist = [0u64; 256];
        hist[10] = u64::MAX;
        hist[200] = u64::MAX / 3;
        hist[255] = u64::MAX;
        let t = otsu_from_histogram(&hist);
        assert!(!t.degenerate);
        assert!((10..200).contains(&t.value));
    }
}
