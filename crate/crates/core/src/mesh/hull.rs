use super::{CrossSection, MeshError};

/// Sum of consecutive vertex distances, including the closing segment.
pub fn loop_perimeter(section: &CrossSection) -> f64 {
    let pts = section.points();
    if pts.len() < 2 {
        return 0.0;
    }
    pts.iter()
        .zip(pts.iter().cycle().skip(1))
        .map(|(a, b)| (b - a).norm())
        .sum()
}

pub fn polygon_perimeter_2d(pts: &[[f64; 2]]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    pts.iter()
        .zip(pts.iter().cycle().skip(1))
        .map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1]))
        .sum()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// collinear points; fewer than three points means the input is collinear.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Perimeter of the 2D convex hull of the section projected into its plane:
/// the length a taut tape would follow around the loop.
pub fn convex_hull_perimeter(section: &CrossSection) -> Result<f64, MeshError> {
    let hull = convex_hull_2d(&section.projected());
    if hull.len() < 3 {
        return Err(MeshError::DegenerateSection("projected points are collinear"));
    }
    Ok(polygon_perimeter_2d(&hull))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::mesh::{Plane, Point3};

    fn section_xz(pts: &[(f64, f64)]) -> CrossSection {
        CrossSection::new(
            pts.iter().map(|&(x, z)| Point3::new(x, 0.0, z)).collect(),
            Plane::horizontal(0.0),
        )
        .unwrap()
    }

    fn ngon(n: usize, r: f64) -> CrossSection {
        section_xz(
            &(0..n)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    (r * a.cos(), r * a.sin())
                })
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn square_loop() {
        let sq = section_xz(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert!((loop_perimeter(&sq) - 4.0).abs() < 1e-12);
        assert!((convex_hull_perimeter(&sq).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_64() {
        let expected = 2.0 * 64.0 * 0.1 * (PI / 64.0).sin();
        let s = ngon(64, 0.1);
        assert!((loop_perimeter(&s) - expected).abs() < 1e-12);
        assert!((convex_hull_perimeter(&s).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.62807).abs() < 5e-6);
    }

    #[test]
    fn collinear_loop_counts_both_ways() {
        let s = section_xz(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]);
        assert!((loop_perimeter(&s) - 6.0).abs() < 1e-12);
        assert!(matches!(
            convex_hull_perimeter(&s),
            Err(MeshError::DegenerateSection(_))
        ));
    }

    #[test]
    fn l_shape_hull() {
        // hull (0,0),(2,0),(2,1),(1,2),(0,2): 2 + 1 + sqrt 2 + 1 + 2
        let l = section_xz(&[
            (0.0, 0.0),
            (2.0, 0.0),
            (2.0, 1.0),
            (1.0, 1.0),
            (1.0, 2.0),
            (0.0, 2.0),
        ]);
        let expected = 6.0 + 2f64.sqrt();
        assert!((convex_hull_perimeter(&l).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 7.41421).abs() < 1e-5);
        assert!((loop_perimeter(&l) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let hull = convex_hull_2d(&[
            [0.0, 0.0],
            [0.5, 0.5],
            [1.0, 0.0],
            [0.5, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
        ]);
        assert_eq!(hull.len(), 4);
    }

    proptest! {
        #[test]
        fn hull_never_longer_than_loop(
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..40)
        ) {
            let s = section_xz(&pts);
            if let Ok(h) = convex_hull_perimeter(&s) {
                prop_assert!(h <= loop_perimeter(&s) + 1e-12);
            }
        }

        #[test]
        fn hull_of_subset_is_not_longer(
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6..40)
        ) {
            let full = section_xz(&pts);
            let half = section_xz(&pts[..pts.len() / 2]);
            if let (Ok(a), Ok(b)) = (convex_hull_perimeter(&full), convex_hull_perimeter(&half)) {
                prop_assert!(b <= a + 1e-12);
            }
        }
    }
}
