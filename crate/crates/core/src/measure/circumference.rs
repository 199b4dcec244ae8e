use crate::bodygen::BodySample;
use crate::mesh::{raycast, slice_mesh, CrossSection, Plane, Point3};
use crate::skeleton::Joint;

use super::{AnnotationConfig, BodyFrame, CircumferenceMode, MeasureError};

/// Loops whose centroid distances differ by less than this are treated as tied.
const TIE_DISTANCE: f64 = 0.001;

fn segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

/// The loop whose centroid is nearest the bone segment `a`–`b`. Loops within
/// 1 mm of the best distance tie; ties go to the smaller centroid Y, then X.
pub fn select_loop<'a>(loops: &'a [CrossSection], a: &Point3, b: &Point3) -> Option<&'a CrossSection> {
    let scored: Vec<(f64, &CrossSection, Point3)> = loops
        .iter()
        .map(|l| {
            let c = l.centroid();
            (segment_distance(&c, a, b), l, c)
        })
        .collect();
    let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    scored
        .into_iter()
        .filter(|s| s.0 <= best + TIE_DISTANCE)
        .min_by(|x, y| x.2.y.total_cmp(&y.2.y).then(x.2.x.total_cmp(&y.2.x)))
        .map(|s| s.1)
}

pub(super) fn circumference(section: &CrossSection, mode: CircumferenceMode) -> Result<f64, MeasureError> {
    Ok(match mode {
        CircumferenceMode::Hull => section.hull_perimeter()?,
        CircumferenceMode::Raw => section.perimeter(),
    })
}

fn section_through(
    body: &BodySample,
    point: &Point3,
    normal: &Point3,
    anchor: (Point3, Point3),
    cfg: &AnnotationConfig,
    what: &'static str,
) -> Result<f64, MeasureError> {
    let plane = Plane::through(point, normal);
    let loops = slice_mesh(&body.mesh, &plane)?;
    let chosen = select_loop(&loops, &anchor.0, &anchor.1).ok_or(MeasureError::NoSection(what))?;
    circumference(chosen, cfg.circumference)
}

/// Top of the head: first surface hit straight down the vertical through the
/// head joint. Falls back to the mesh top if that ray misses.
fn head_top(body: &BodySample, frame: &BodyFrame) -> f64 {
    let head = body.skeleton.get(Joint::Head);
    let (_, hi) = body.mesh.bounds();
    let above = head + frame.up * (hi.y - head.y + 1.0);
    match raycast(&body.mesh, &above, &-frame.up) {
        Some(hit) => hit.point.y,
        None => hi.y,
    }
}

/// Head girth: tilted plane halfway between the head joint and the top of
/// the head. Meters.
pub fn head_circumference(body: &BodySample, frame: &BodyFrame, cfg: &AnnotationConfig) -> Result<f64, MeasureError> {
    let head = body.skeleton.get(Joint::Head);
    let neck = body.skeleton.get(Joint::Neck);
    let center = head + frame.up * (0.5 * (head_top(body, frame) - head.y));
    let axis_end = head + (head - neck) * 2.0;
    section_through(body, &center, &frame.tilted_up(cfg.tilt_deg), (neck, axis_end), cfg, "head")
}

/// Neck girth: tilted plane one third of the way from the neck joint toward
/// the head joint. Meters.
pub fn neck_circumference(body: &BodySample, frame: &BodyFrame, cfg: &AnnotationConfig) -> Result<f64, MeasureError> {
    let head = body.skeleton.get(Joint::Head);
    let neck = body.skeleton.get(Joint::Neck);
    let center = neck + (head - neck) / 3.0;
    section_through(body, &center, &frame.tilted_up(cfg.tilt_deg), (neck, head), cfg, "neck")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limb {
    /// Lateral-normal plane midway between shoulder and elbow.
    Bicep,
    /// Lateral-normal plane at the wrist joint.
    Wrist,
    /// Horizontal plane midway between hip and knee.
    Thigh,
    /// Horizontal plane at the knee joint.
    Knee,
}

/// Limb girth on the configured side. Meters.
pub fn limb_circumference(
    body: &BodySample,
    frame: &BodyFrame,
    limb: Limb,
    cfg: &AnnotationConfig,
) -> Result<f64, MeasureError> {
    let sk = &body.skeleton;
    let side = cfg.side;
    let (point, normal, anchor, what) = match limb {
        Limb::Bicep => {
            let s = sk.get(side.shoulder());
            let e = sk.get(side.elbow());
            ((s + e) * 0.5, frame.lateral, (s, e), "bicep")
        }
        Limb::Wrist => (sk.get(side.wrist()), frame.lateral, (sk.get(side.elbow()), sk.get(side.wrist())), "wrist"),
        Limb::Thigh => {
            let h = sk.get(side.hip());
            let k = sk.get(side.knee());
            let y = 0.5 * (h.y + k.y);
            (Point3::new(h.x, y, h.z), frame.up, (h, k), "thigh")
        }
        Limb::Knee => (sk.get(side.knee()), frame.up, (sk.get(side.hip()), sk.get(side.ankle())), "knee"),
    };
    section_through(body, &point, &normal, anchor, cfg, what)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::bodygen::{ellipse_perimeter, generate_body, BodyParams, Gender};
    use crate::mesh::{cylinder, unit_cube};

    fn loops_of(mesh: &crate::mesh::TriangleMesh, y: f64) -> Vec<CrossSection> {
        slice_mesh(mesh, &Plane::horizontal(y)).unwrap()
    }

    #[test]
    fn thigh_plane_picks_left_leg() {
        let mut mesh = cylinder(0.08, 0.0, 0.9, 32).translated(&Point3::new(0.1, 0.0, 0.0));
        mesh.append(&cylinder(0.08, 0.0, 0.9, 32).translated(&Point3::new(-0.1, 0.0, 0.0)));
        let loops = loops_of(&mesh, 0.6);
        assert_eq!(loops.len(), 2);
        let left = select_loop(&loops, &Point3::new(0.1, 0.9, 0.0), &Point3::new(0.1, 0.5, 0.0)).unwrap();
        assert!(left.centroid().x > 0.0);
    }

    #[test]
    fn tie_breaks_on_lower_centroid() {
        // two cubes equidistant from a vertical segment between them
        let mut mesh = unit_cube().scaled(0.2).translated(&Point3::new(0.5, 0.0, 0.0));
        mesh.append(&unit_cube().scaled(0.2).translated(&Point3::new(-0.5, 0.0, 0.0)));
        let loops = loops_of(&mesh, 0.0);
        let chosen = select_loop(&loops, &Point3::new(0.0, -1.0, 0.0), &Point3::new(0.0, 1.0, 0.0)).unwrap();
        assert!(chosen.centroid().x < 0.0, "smaller X wins at equal Y");
    }

    #[test]
    fn head_loop_selected_over_raised_hand() {
        let body = generate_body(&BodyParams::preset(Gender::Male, 5)).unwrap();
        let head = body.skeleton.get(Joint::Head);
        let mut with_hand = body.clone();
        with_hand.mesh.append(&cylinder(0.04, head.y - 0.1, head.y + 0.3, 32).translated(&Point3::new(0.35, 0.0, 0.0)));
        let frame = BodyFrame::from_skeleton(&body.skeleton);
        let cfg = AnnotationConfig::default();
        let a = head_circumference(&body, &frame, &cfg).unwrap();
        let b = head_circumference(&with_hand, &frame, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn head_matches_ellipse_slice_at_zero_tilt() {
        let body = generate_body(&BodyParams::preset(Gender::Female, 7)).unwrap();
        let refs = body.refs.as_ref().unwrap();
        let frame = BodyFrame::from_skeleton(&body.skeleton);
        let cfg = AnnotationConfig {
            tilt_deg: 0.0,
            ..Default::default()
        };
        let got = head_circumference(&body, &frame, &cfg).unwrap();
        let expected = refs.head_circumference_level();
        assert!((got - expected).abs() / expected < 0.01, "{got} vs {expected}");
        let tilted = head_circumference(&body, &frame, &AnnotationConfig::default()).unwrap();
        assert_ne!(tilted, got);
        assert_eq!(tilted, head_circumference(&body, &frame, &AnnotationConfig::default()).unwrap());
    }

    #[test]
    fn neck_matches_tilted_cylinder_ellipse() {
        let body = generate_body(&BodyParams::preset(Gender::Male, 2)).unwrap();
        let refs = body.refs.as_ref().unwrap();
        let frame = BodyFrame::from_skeleton(&body.skeleton);
        for tilt in [0.0, 15.0, 30.0] {
            let cfg = AnnotationConfig {
                tilt_deg: tilt,
                ..Default::default()
            };
            let got = neck_circumference(&body, &frame, &cfg).unwrap();
            let expected = refs.neck_circumference(tilt);
            let bound = refs.polygonization_bound(refs.neck_radius) / tilt.to_radians().cos();
            assert!(got <= expected + 1e-12);
            assert!(expected - got <= bound + 0.005 * expected, "tilt {tilt}: {got} vs {expected}");
        }
    }

    #[test]
    fn wrist_on_cylinder() {
        // r = 0.03 forearm: 2 pi r = 188.5 mm
        let limbs = generate_body(&BodyParams::preset(Gender::Male, 1)).unwrap();
        let refs = limbs.refs.as_ref().unwrap();
        let frame = BodyFrame::from_skeleton(&limbs.skeleton);
        let got = limb_circumference(&limbs, &frame, Limb::Wrist, &AnnotationConfig::default()).unwrap();
        let r = refs.wrist_radius;
        let n = refs.segments as f64;
        assert!((got - 2.0 * n * r * (PI / n).sin()).abs() < 1e-9);
        assert!((2.0 * PI * 0.03 * 1000.0 - 188.5).abs() < 0.05);
        let _ = ellipse_perimeter;
    }
}
