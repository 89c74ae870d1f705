//! Dynamic time warping over 3D point sequences.

use crate::geometry::Point;

/// DTW distance with Euclidean point cost (sum along the optimal warping path).
///
/// Two empty sequences are at distance zero; an empty and a non-empty one are infinitely apart.
pub fn dtw(a: &[Point], b: &[Point]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for pa in a {
        cur[0] = f64::INFINITY;
        for (j, pb) in b.iter().enumerate() {
            let cost = (pa - pb).norm();
            cur[j + 1] = cost + prev[j].min(prev[j + 1]).min(cur[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Points at arc-length multiples of `spacing` along the polyline, plus its final point.
pub fn resample(points: &[Point], spacing: f64) -> Vec<Point> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let mut out = vec![*first];
    let mut next = spacing;
    let mut walked = 0.0;
    for w in points.windows(2) {
        let seg = (w[1] - w[0]).norm();
        while seg > 0.0 && next <= walked + seg + 1e-12 {
            let f = ((next - walked) / seg).min(1.0);
            out.push(w[0] + (w[1] - w[0]) * f);
            next += spacing;
        }
        walked += seg;
    }
    let last = *points.last().unwrap();
    if (out.last().unwrap() - last).norm() > 1e-9 {
        out.push(last);
    }
    out
}
