//! Nearest-foreground distances by exhaustive search.

use refscan_core::imgproc::SATURATED_DISTANCE;
use refscan_core::BinaryImage;

/// Euclidean distance from each pixel to the closest foreground pixel,
/// found by scanning every foreground pixel. Without foreground every value
/// is [`SATURATED_DISTANCE`].
pub fn brute_force_edt(bin: &BinaryImage) -> Vec<f64> {
    let (w, h) = (bin.width() as i64, bin.height() as i64);
    let fg: Vec<(i64, i64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| bin.get(x as u32, y as u32))
        .collect();
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            fg.iter()
                .map(|&(fx, fy)| (fx - x) * (fx - x) + (fy - y) * (fy - y))
                .min()
                .map_or(SATURATED_DISTANCE, |d2| (d2 as f64).sqrt())
        })
        .collect()
}
