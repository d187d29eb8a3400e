//! Convex polygon clipping (Sutherland-Hodgman) and shoelace areas for the
//! BEV rotated-rectangle intersection.

/// Vertex-on-edge classification tolerance (meters).
pub(crate) const VERTEX_EPS: f64 = 1e-9;

/// Intersection slivers below this area (square meters) count as zero.
pub(crate) const SLIVER_AREA_EPS: f64 = 1e-12;

/// Signed area, positive for counter-clockwise vertex order.
pub fn shoelace_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for idx in 0..poly.len() {
        let [x1, y1] = poly[idx];
        let [x2, y2] = poly[(idx + 1) % poly.len()];
        twice += x1 * y2 - x2 * y1;
    }
    twice / 2.0
}

fn ensure_ccw(poly: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if shoelace_area(poly) < 0.0 {
        poly.iter().rev().copied().collect()
    } else {
        poly.to_vec()
    }
}

/// Signed distance proxy: positive when `p` is left of the directed edge
/// `a -> b`.
fn edge_side(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Clip `subject` against the convex polygon `clip` (both any orientation,
/// internally reoriented counter-clockwise). Returns the intersection
/// polygon, possibly empty.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let clip = ensure_ccw(clip);
    let mut output = ensure_ccw(subject);
    for idx in 0..clip.len() {
        if output.is_empty() {
            return Vec::new();
        }
        let a = clip[idx];
        let b = clip[(idx + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for pos in 0..input.len() {
            let current = input[pos];
            let previous = input[(pos + input.len() - 1) % input.len()];
            let side_cur = edge_side(a, b, current);
            let side_prev = edge_side(a, b, previous);
            let cur_inside = side_cur >= -VERTEX_EPS;
            let prev_inside = side_prev >= -VERTEX_EPS;
            if cur_inside {
                if !prev_inside {
                    output.push(intersect(previous, current, side_prev, side_cur));
                }
                output.push(current);
            } else if prev_inside {
                output.push(intersect(previous, current, side_prev, side_cur));
            }
        }
    }
    output
}

fn intersect(p: [f64; 2], q: [f64; 2], side_p: f64, side_q: f64) -> [f64; 2] {
    let t = side_p / (side_p - side_q);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Area of the intersection of two convex polygons; slivers below 1e-12 m^2
/// collapse to zero.
pub fn intersection_area(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let area = shoelace_area(&clip_convex(a, b)).abs();
    if area < SLIVER_AREA_EPS {
        0.0
    } else {
        area
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT_SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn shoelace_signs() {
        assert!((shoelace_area(&UNIT_SQUARE) - 1.0).abs() < 1e-15);
        let cw: Vec<_> = UNIT_SQUARE.iter().rev().copied().collect();
        assert!((shoelace_area(&cw) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn clip_offset_squares() {
        let other = [[0.5, 0.5], [1.5, 0.5], [1.5, 1.5], [0.5, 1.5]];
        assert!((intersection_area(&UNIT_SQUARE, &other) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn clip_disjoint_is_empty() {
        let other = [[5.0, 5.0], [6.0, 5.0], [6.0, 6.0], [5.0, 6.0]];
        assert_eq!(intersection_area(&UNIT_SQUARE, &other), 0.0);
    }

    #[test]
    fn clip_contained_polygon() {
        let inner = [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]];
        assert!((intersection_area(&UNIT_SQUARE, &inner) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rotated_square_overlap() {
        // Unit square vs itself rotated 45 degrees about its center:
        // intersection is a regular octagon with area 2*(sqrt(2)-1).
        let c = 0.5;
        let angle = std::f64::consts::FRAC_PI_4;
        let rot: Vec<[f64; 2]> = UNIT_SQUARE
            .iter()
            .map(|[x, y]| {
                let (dx, dy) = (x - c, y - c);
                [
                    c + dx * angle.cos() - dy * angle.sin(),
                    c + dx * angle.sin() + dy * angle.cos(),
                ]
            })
            .collect();
        let expected = 2.0 * (2.0_f64.sqrt() - 1.0);
        assert!((intersection_area(&UNIT_SQUARE, &rot) - expected).abs() < 1e-12);
    }

    #[test]
    fn clip_orientation_insensitive() {
        let cw: Vec<_> = UNIT_SQUARE.iter().rev().copied().collect();
        let other = [[0.5, -0.5], [1.5, -0.5], [1.5, 0.5], [0.5, 0.5]];
        assert!((intersection_area(&cw, &other) - 0.25).abs() < 1e-12);
        assert!((intersection_area(&UNIT_SQUARE, &other) - 0.25).abs() < 1e-12);
    }
}
