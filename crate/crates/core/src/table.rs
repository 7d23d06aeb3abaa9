/// Piecewise-linear interpolation over rows sorted by `x`, clamped to the end
/// values outside the tabulated range.
pub(crate) fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(!xs.is_empty());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (ys[i - 1], ys[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub(crate) fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let xs = [20.0, 30.0, 45.0];
        let ys = [1.0, 2.0, 5.0];
        assert_eq!(interp_clamped(&xs, &ys, 10.0), 1.0);
        assert_eq!(interp_clamped(&xs, &ys, 25.0), 1.5);
        assert_eq!(interp_clamped(&xs, &ys, 30.0), 2.0);
        assert_eq!(interp_clamped(&xs, &ys, 50.0), 5.0);
        assert_eq!(interp_clamped(&[1.0], &[4.0], 3.0), 4.0);
    }
}
