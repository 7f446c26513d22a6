use super::{BinaryImage, ImageError};

/// Horizontal kernel width merging neighbouring glyphs of one text line.
pub const DEFAULT_KERNEL_WIDTH: u32 = 5;
/// Kernel height of 1 keeps separate lines apart.
pub const DEFAULT_KERNEL_HEIGHT: u32 = 1;

/// Binary dilation with a `kernel_w` x `kernel_h` rectangle centered on each pixel.
///
/// The rectangle is separable, so this runs a sliding-window OR per row and
/// then per column, in time independent of the kernel size.
pub fn dilate(bin: &BinaryImage, kernel_w: u32, kernel_h: u32) -> Result<BinaryImage, ImageError> {
    for (name, k) in [("width", kernel_w), ("height", kernel_h)] {
        if k == 0 || k % 2 == 0 {
            return Err(ImageError::InvalidConfig(format!(
                "kernel {name} must be odd and >= 1, got {k}"
            )));
        }
    }
    let (w, h) = (bin.width() as usize, bin.height() as usize);
    let rows = dilate_lines(bin.data(), w, h, 1, w, (kernel_w / 2) as usize);
    let out = dilate_lines(&rows, h, w, w, 1, (kernel_h / 2) as usize);
    BinaryImage::new(bin.width(), bin.height(), out)
}

/// Dilates `count` independent 1-D lines of `len` samples. Sample `j` of
/// line `l` lives at `l * line_stride + j * step`.
fn dilate_lines(
    src: &[bool],
    len: usize,
    count: usize,
    step: usize,
    line_stride: usize,
    radius: usize,
) -> Vec<bool> {
    if radius == 0 {
        return src.to_vec();
    }
    let mut out = vec![false; src.len()];
    for l in 0..count {
        let base = l * line_stride;
        let at = |j: usize| base + j * step;
        // Number of foreground samples inside [j - radius, j + radius].
        let mut active = (0..radius.min(len)).filter(|&j| src[at(j)]).count();
        for j in 0..len {
            if j + radius < len && src[at(j + radius)] {
                active += 1;
            }
            if j > radius && src[at(j - radius - 1)] {
                active -= 1;
            }
            out[at(j)] = active > 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(bits: &str) -> BinaryImage {
        BinaryImage::new(bits.len() as u32, 1, bits.chars().map(|c| c == '#').collect()).unwrap()
    }

    fn render(b: &BinaryImage) -> String {
        b.data().iter().map(|&v| if v { '#' } else { '.' }).collect()
    }

    #[test]
    fn single_pixel_grows_two_each_side() {
        let out = dilate(&row("...#..."), 5, 1).unwrap();
        assert_eq!(render(&out), ".#####.");
    }

    #[test]
    fn nearby_glyphs_merge() {
        let out = dilate(&row("..##...##.."), 5, 1).unwrap();
        assert_eq!(render(&out), "###########");
    }

    #[test]
    fn rows_do_not_merge_vertically() {
        let mut m = BinaryImage::empty(6, 3).unwrap();
        m.set(1, 0, true);
        m.set(4, 2, true);
        let out = dilate(&m, 5, 1).unwrap();
        assert!((0..6).all(|x| !out.get(x, 1)));
    }

    #[test]
    fn even_kernel_is_rejected() {
        assert!(matches!(
            dilate(&row("#"), 4, 1),
            Err(ImageError::InvalidConfig(_))
        ));
        assert!(dilate(&row("#"), 5, 0).is_err());
    }

    #[test]
    fn unit_kernel_is_identity() {
        let m = row("#..#.#");
        assert_eq!(dilate(&m, 1, 1).unwrap(), m);
    }

    #[test]
    fn kernel_larger_than_image() {
        let out = dilate(&row("#.."), 9, 1).unwrap();
        assert_eq!(render(&out), "###");
    }

    #[test]
    fn vertical_kernel() {
        let mut m = BinaryImage::empty(1, 5).unwrap();
        m.set(0, 2, true);
        let out = dilate(&m, 1, 3).unwrap();
        assert_eq!(
            out.data(),
            &[false, true, true, true, false]
        );
    }
}
