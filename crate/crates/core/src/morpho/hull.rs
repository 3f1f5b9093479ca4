use super::MorphoError;

pub type Point2 = [f64; 2];

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by monotone chain. Returns the hull vertices counter-clockwise,
/// starting from the lowest-x (then lowest-y) point, without collinear
/// boundary points.
pub fn convex_hull_2d(points: &[Point2]) -> Result<Vec<Point2>, MorphoError> {
    if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(MorphoError::DegenerateHull("non-finite point".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(MorphoError::DegenerateHull(format!(
            "{} distinct points",
            pts.len()
        )));
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    // The upper chain must not pop into the lower one.
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    if hull.len() < 3 || polygon_area(&hull) <= 0.0 {
        return Err(MorphoError::DegenerateHull("all points are collinear".into()));
    }
    Ok(hull)
}

/// Signed shoelace area (positive for counter-clockwise).
pub fn polygon_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn ccw(poly: &[Point2]) -> Vec<Point2> {
    let mut p = poly.to_vec();
    if polygon_area(&p) < 0.0 {
        p.reverse();
    }
    p
}

/// Intersection of two convex polygons (Sutherland-Hodgman clipping of
/// `subject` by every edge of `clip`). Points on a clip edge count as inside.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let clip = ccw(clip);
    let mut output = ccw(subject);
    let m = clip.len();
    for e in 0..m {
        if output.is_empty() {
            break;
        }
        let a = clip[e];
        let b = clip[(e + 1) % m];
        let input = std::mem::take(&mut output);
        let side = |p: &Point2| cross(&a, &b, p);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(&prev, &cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(&prev, &cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: &Point2, q: &Point2, sp: f64, sq: f64) -> Point2 {
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Intersection-over-union of two convex polygons.
pub fn polygon_iou(a: &[Point2], b: &[Point2]) -> Result<f64, MorphoError> {
    let area_a = polygon_area(a).abs();
    let area_b = polygon_area(b).abs();
    if a.len() < 3 || b.len() < 3 || area_a <= 0.0 || area_b <= 0.0 {
        return Err(MorphoError::ZeroArea);
    }
    let inter_poly = clip_convex(a, b);
    let inter = if inter_poly.len() >= 3 {
        polygon_area(&inter_poly).abs()
    } else {
        0.0
    };
    let inter = inter.min(area_a).min(area_b);
    let union = area_a + area_b - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}
