//! Planar shapes in local scene meters (x east, y north).

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Simple polygon, even-odd interior.
    Polygon(Vec<(f64, f64)>),
    /// Points within `width / 2` of a polyline.
    Strip { width: f64, points: Vec<(f64, f64)> },
    Disk { cx: f64, cy: f64, r: f64 },
}

impl Shape {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Shape {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        Shape::Polygon(vec![(xa, ya), (xb, ya), (xb, yb), (xa, yb)])
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let fold = |pts: &[(f64, f64)], pad: f64| {
            pts.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), &(x, y)| (a.min(x - pad), b.min(y - pad), c.max(x + pad), d.max(y + pad)),
            )
        };
        match self {
            Shape::Polygon(p) => fold(p, 0.0),
            Shape::Strip { width, points } => fold(points, width / 2.0),
            Shape::Disk { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Polygon(p) => polygon_contains(p, x, y),
            Shape::Strip { width, points } => {
                let h2 = (width / 2.0) * (width / 2.0);
                if points.len() == 1 {
                    return dist2(points[0], (x, y)) <= h2;
                }
                points.windows(2).any(|s| segment_dist2(s[0], s[1], (x, y)) <= h2)
            }
            Shape::Disk { cx, cy, r } => dist2((*cx, *cy), (x, y)) <= r * r,
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Shape {
        let mv = |p: &[(f64, f64)]| p.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
        match self {
            Shape::Polygon(p) => Shape::Polygon(mv(p)),
            Shape::Strip { width, points } => Shape::Strip {
                width: *width,
                points: mv(points),
            },
            Shape::Disk { cx, cy, r } => Shape::Disk {
                cx: cx + dx,
                cy: cy + dy,
                r: *r,
            },
        }
    }

    /// Region swept by the shape moving along `(dx, dy)`. Exact for disks and
    /// convex polygons.
    pub fn swept(&self, dx: f64, dy: f64) -> Shape {
        match self {
            Shape::Polygon(p) => {
                let mut pts = p.clone();
                pts.extend(p.iter().map(|&(x, y)| (x + dx, y + dy)));
                Shape::Polygon(convex_hull(pts))
            }
            Shape::Disk { cx, cy, r } => Shape::Strip {
                width: 2.0 * r,
                points: vec![(*cx, *cy), (cx + dx, cy + dy)],
            },
            Shape::Strip { width, points } => {
                let mut pts = points.clone();
                pts.extend(points.iter().rev().map(|&(x, y)| (x + dx, y + dy)));
                Shape::Strip {
                    width: *width,
                    points: pts,
                }
            }
        }
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn segment_dist2(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist2((a.0 + t * vx, a.1 + t * vy), p)
}

fn polygon_contains(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Andrew's monotone chain, counter-clockwise.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_and_polygon() {
        let r = Shape::rect(0.0, 0.0, 2.0, 1.0);
        assert!(r.contains(1.0, 0.5));
        assert!(!r.contains(2.5, 0.5));
        let tri = Shape::Polygon(vec![(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)]);
        assert!(tri.contains(1.0, 1.0));
        assert!(!tri.contains(3.0, 3.0));
    }

    #[test]
    fn strip_width() {
        let s = Shape::Strip {
            width: 2.4,
            points: vec![(0.0, 10.0), (100.0, 10.0)],
        };
        assert!(s.contains(50.0, 11.15));
        assert!(!s.contains(50.0, 11.25));
        assert_eq!(s.bbox(), (-1.2, 8.8, 101.2, 11.2));
    }

    #[test]
    fn swept_rectangle_is_hull() {
        let r = Shape::rect(0.0, 0.0, 10.0, 10.0).swept(5.0, 5.0);
        assert!(r.contains(14.0, 14.0));
        assert!(r.contains(12.0, 3.0));
        assert!(!r.contains(14.0, 1.0));
        assert!(!r.contains(1.0, 14.0));
    }

    #[test]
    fn swept_disk_is_capsule() {
        let c = Shape::Disk { cx: 0.0, cy: 0.0, r: 1.0 }.swept(0.0, 10.0);
        assert!(c.contains(0.9, 5.0));
        assert!(c.contains(0.0, 10.9));
        assert!(!c.contains(1.1, 5.0));
    }
}
