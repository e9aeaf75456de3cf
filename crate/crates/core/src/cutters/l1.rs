//! Euclidean projection onto the l1 ball `{u : ||u||_1 <= radius}`.

use crate::vector::Vector;

/// Projects `x` onto the l1 ball of the given radius centred at the origin.
///
/// Sort-and-threshold: the projection of a point outside the ball is the
/// soft-thresholding `sign(x) * max(|x| - theta, 0)` where `theta` is chosen so
/// the result lies on the boundary. Runs in `O(n log n)`.
pub fn project_l1_ball(x: &Vector, radius: f64) -> Vector {
    debug_assert!(radius > 0.0);
    if x.l1_norm() <= radius {
        return x.clone();
    }
    let theta = l1_threshold(x.as_slice(), radius);
    x.map(|&v| v.signum() * (v.abs() - theta).max(0.0))
}

/// Threshold `theta >= 0` with `sum_j max(|x_j| - theta, 0) = radius`, assuming
/// `||x||_1 > radius`.
fn l1_threshold(x: &[f64], radius: f64) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta.max(0.0)
}
