use std::cell::OnceCell;

use crate::bodygen::BodySample;
use crate::mesh::{HorizontalSlicer, Point3};
use crate::skeleton::Joint;

use super::circumference::{circumference, select_loop};
use super::{AnnotationConfig, CircumferenceMode, MeasureError};

/// Position tolerance for refining extrema and loop-count transitions.
const REFINE_TOLERANCE: f64 = 1e-12;
const MAX_REFINE_ITERATIONS: usize = 200;

/// Fraction of stature searched below the shoulder for the axilla.
const AXILLA_SEARCH: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorsoGirth {
    /// Maximum between the axilla and the upper-spine joint.
    Chest,
    /// Minimum around the mid-spine joint.
    Waist,
    /// Maximum between the pelvis and hip joints.
    Pelvis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

impl Extremum {
    fn score(self, v: Option<f64>) -> f64 {
        match (self, v) {
            (_, None) => f64::NEG_INFINITY,
            (Extremum::Max, Some(v)) => v,
            (Extremum::Min, Some(v)) => -v,
        }
    }
}

/// Girth of the loop nearest `anchor` at height `y`, `None` if there is none.
fn girth_at(
    slicer: &HorizontalSlicer,
    y: f64,
    anchor: &(Point3, Point3),
    mode: CircumferenceMode,
) -> Result<Option<f64>, MeasureError> {
    let loops = slicer.slice(y)?;
    let Some(section) = select_loop(&loops, &anchor.0, &anchor.1) else {
        return Ok(None);
    };
    match circumference(section, mode) {
        Ok(v) => Ok(Some(v)),
        Err(MeasureError::Mesh(crate::mesh::MeshError::DegenerateSection(_))) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scans horizontal sections over `[lo, hi]` at `cfg.step` and returns the
/// `(level, girth)` extremum of the loop nearest `anchor`. With `cfg.refine`
/// the best level is polished by golden-section search within one step.
pub fn scan_girth(
    slicer: &HorizontalSlicer,
    region: (f64, f64),
    anchor: (Point3, Point3),
    extremum: Extremum,
    cfg: &AnnotationConfig,
    what: &'static str,
) -> Result<(f64, f64), MeasureError> {
    let (lo, hi) = (region.0.min(region.1), region.0.max(region.1));
    let eval = |y: f64| girth_at(slicer, y, &anchor, cfg.circumference);
    let mut best: Option<(f64, f64)> = None;
    let consider = |y: f64, v: Option<f64>, best: &mut Option<(f64, f64)>| {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| extremum.score(Some(v)) > extremum.score(Some(b))) {
                *best = Some((y, v));
            }
        }
    };

    let count = ((hi - lo) / cfg.step).floor() as usize;
    for i in 0..=count {
        let y = lo + i as f64 * cfg.step;
        consider(y, eval(y)?, &mut best);
    }
    if lo + count as f64 * cfg.step < hi {
        consider(hi, eval(hi)?, &mut best);
    }
    let (y0, _) = best.ok_or(MeasureError::EmptyRegion(what))?;
    if !cfg.refine {
        return Ok(best.unwrap());
    }

    // golden-section search on [y0 - step, y0 + step] clipped to the region
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = (y0 - cfg.step).max(lo);
    let mut b = (y0 + cfg.step).min(hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    for _ in 0..MAX_REFINE_ITERATIONS {
        if b - a < REFINE_TOLERANCE {
            break;
        }
        if extremum.score(fc) >= extremum.score(fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
            consider(d, fd, &mut best);
        }
    }
    Ok(best.unwrap())
}

/// Bisects between a level that fails `accept` and one that passes it,
/// returning the passing end once the interval is below tolerance.
fn bisect(
    mut fail: f64,
    mut pass: f64,
    mut accept: impl FnMut(f64) -> Result<bool, MeasureError>,
) -> Result<f64, MeasureError> {
    for _ in 0..MAX_REFINE_ITERATIONS {
        if (pass - fail).abs() < REFINE_TOLERANCE {
            break;
        }
        let mid = 0.5 * (fail + pass);
        if accept(mid)? {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(pass)
}

/// Shared slicing state for the scanned measurements of one body.
pub(crate) struct ScanContext<'a> {
    body: &'a BodySample,
    cfg: &'a AnnotationConfig,
    slicer: HorizontalSlicer<'a>,
    stature: f64,
    axilla: OnceCell<Result<f64, String>>,
}

impl<'a> ScanContext<'a> {
    pub(crate) fn new(body: &'a BodySample, cfg: &'a AnnotationConfig) -> Self {
        Self {
            body,
            cfg,
            slicer: HorizontalSlicer::new(&body.mesh),
            stature: body.stature(),
            axilla: OnceCell::new(),
        }
    }

    fn joint(&self, j: Joint) -> Point3 {
        self.body.skeleton.get(j)
    }

    fn loop_count(&self, y: f64) -> Result<usize, MeasureError> {
        Ok(self.slicer.slice(y)?.len())
    }

    pub(crate) fn axilla(&self) -> Result<f64, MeasureError> {
        let cached = self.axilla.get_or_init(|| self.detect_axilla().map_err(|e| e.to_string()));
        match cached {
            Ok(y) => Ok(*y),
            // recompute to hand back a typed error
            Err(_) => self.detect_axilla(),
        }
    }

    fn detect_axilla(&self) -> Result<f64, MeasureError> {
        let top = self.joint(self.cfg.side.shoulder()).y;
        let depth = AXILLA_SEARCH * self.stature;
        let steps = (depth / self.cfg.step).floor() as usize;
        let mut above = None;
        for i in 0..=steps {
            let y = top - i as f64 * self.cfg.step;
            if self.loop_count(y)? == 1 {
                return match above {
                    Some(prev) if self.cfg.refine => bisect(prev, y, |m| Ok(self.loop_count(m)? == 1)),
                    _ => Ok(y),
                };
            }
            above = Some(y);
        }
        Err(MeasureError::AxillaNotFound(depth))
    }

    pub(crate) fn crotch(&self) -> Result<f64, MeasureError> {
        let bottom = self.joint(self.cfg.side.ankle()).y;
        let top = self.joint(Joint::Pelvis).y;
        let steps = ((top - bottom) / self.cfg.step).floor() as usize;
        let mut prev: Option<(f64, usize)> = None;
        for i in 0..=steps {
            let y = bottom + i as f64 * self.cfg.step;
            let n = self.loop_count(y)?;
            if let Some((py, 2)) = prev {
                if n == 1 {
                    if !self.cfg.refine {
                        return Ok(y);
                    }
                    return bisect(py, y, |m| Ok(self.loop_count(m)? == 1));
                }
            }
            // a level exactly on flush caps can cut nothing; skip it
            if n != 0 {
                prev = Some((y, n));
            }
        }
        Err(MeasureError::CrotchNotFound)
    }

    /// Crotch height above the ankle joint, meters.
    pub(crate) fn inner_leg_length(&self) -> Result<f64, MeasureError> {
        Ok(self.crotch()? - self.joint(self.cfg.side.ankle()).y)
    }

    fn region(&self, girth: TorsoGirth) -> Result<(f64, f64), MeasureError> {
        Ok(match girth {
            TorsoGirth::Chest => (self.axilla()?, self.joint(Joint::UpperSpine).y),
            TorsoGirth::Waist => {
                let y = self.joint(Joint::MidSpine).y;
                let h = self.cfg.waist_half_height * self.stature;
                (y - h, y + h)
            }
            TorsoGirth::Pelvis => (self.joint(Joint::Pelvis).y, self.joint(Joint::LeftHip).y),
        })
    }

    /// `(level, girth)` of a torso measurement, meters.
    pub(crate) fn torso_circumference(&self, girth: TorsoGirth) -> Result<(f64, f64), MeasureError> {
        let region = self.region(girth)?;
        let spine = (self.joint(Joint::Pelvis), self.joint(Joint::Neck));
        let (extremum, what) = match girth {
            TorsoGirth::Chest => (Extremum::Max, "chest"),
            TorsoGirth::Waist => (Extremum::Min, "waist"),
            TorsoGirth::Pelvis => (Extremum::Max, "pelvis"),
        };
        scan_girth(&self.slicer, region, spine, extremum, self.cfg, what)
    }
}

/// Torso girth in meters and the level it was found at.
pub fn torso_circumference(
    body: &BodySample,
    cfg: &AnnotationConfig,
    girth: TorsoGirth,
) -> Result<(f64, f64), MeasureError> {
    ScanContext::new(body, cfg).torso_circumference(girth)
}

/// Highest level below the shoulder cut by the torso alone, meters.
pub fn detect_axilla(body: &BodySample, cfg: &AnnotationConfig) -> Result<f64, MeasureError> {
    ScanContext::new(body, cfg).axilla()
}

/// Lowest level above the ankles where the two leg loops have merged, meters.
pub fn detect_crotch(body: &BodySample, cfg: &AnnotationConfig) -> Result<f64, MeasureError> {
    ScanContext::new(body, cfg).crotch()
}

/// Crotch height above the ankle joint, meters.
pub fn inner_leg_length(body: &BodySample, cfg: &AnnotationConfig) -> Result<f64, MeasureError> {
    ScanContext::new(body, cfg).inner_leg_length()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    use super::*;
    use crate::bodygen::{generate_body, BodyParams, Gender};
    use crate::mesh::{box_mesh, cylinder, TriangleMesh};
    use crate::skeleton::Skeleton;

    fn body(seed: u64, gender: Gender) -> BodySample {
        generate_body(&BodyParams::preset(gender, seed)).unwrap()
    }

    fn coarse(step: f64) -> AnnotationConfig {
        AnnotationConfig {
            step,
            refine: false,
            ..Default::default()
        }
    }

    #[test]
    fn cylinder_scan_is_polygon_perimeter() {
        let mesh = cylinder(0.1, 0.0, 1.0, 256);
        let slicer = HorizontalSlicer::new(&mesh);
        let axis = (Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0));
        let (_, v) = scan_girth(&slicer, (0.4, 0.6), axis, Extremum::Min, &AnnotationConfig::default(), "waist").unwrap();
        let polygon = 2.0 * 256.0 * 0.1 * (PI / 256.0).sin();
        assert!((v - polygon).abs() / polygon < 1e-3);
        assert!((v - 2.0 * PI * 0.1).abs() / (2.0 * PI * 0.1) < 5e-3);
    }

    #[test]
    fn empty_region_errors() {
        let mesh = cylinder(0.1, 0.0, 1.0, 32);
        let slicer = HorizontalSlicer::new(&mesh);
        let axis = (Point3::zeros(), Point3::y());
        let err = scan_girth(&slicer, (2.0, 3.0), axis, Extremum::Max, &AnnotationConfig::default(), "chest");
        assert!(matches!(err, Err(MeasureError::EmptyRegion("chest"))));
    }

    #[test]
    fn waist_matches_profile_minimum() {
        let mut checked = 0;
        for seed in 0..6 {
            let b = body(seed, if seed % 2 == 0 { Gender::Male } else { Gender::Female });
            let refs = b.refs.clone().unwrap();
            let Some(expected) = refs.waist_circumference() else { continue };
            let (y, got) = torso_circumference(&b, &AnnotationConfig::default(), TorsoGirth::Waist).unwrap();
            let mid = b.skeleton.get(Joint::MidSpine).y;
            assert!((y - mid).abs() < 1e-6, "waist level {y} vs ring {mid}");
            assert!(got <= expected + 1e-9);
            let bound = refs.polygonization_bound(expected / (2.0 * PI)) + 0.005 * expected;
            assert!(expected - got <= bound, "{got} vs {expected}");
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn monotone_pelvis_region_hits_boundary() {
        // frustum widening downward: maximum at the lower bound
        let mesh = crate::bodygen::circular_tube(
            Point3::zeros(),
            crate::bodygen::TubeAxis::Y,
            &[(0.0, 0.2), (1.0, 0.1)],
            64,
        );
        let slicer = HorizontalSlicer::new(&mesh);
        let axis = (Point3::zeros(), Point3::y());
        let (y, _) = scan_girth(&slicer, (0.3, 0.6), axis, Extremum::Max, &coarse(0.001), "pelvis").unwrap();
        assert_eq!(y, 0.3);
        let (y, _) = scan_girth(&slicer, (0.3, 0.6), axis, Extremum::Min, &coarse(0.0007), "pelvis").unwrap();
        assert_eq!(y, 0.6);
    }

    #[test]
    fn halving_step_stays_within_lipschitz_bound() {
        for seed in 0..3 {
            let b = body(seed, Gender::Female);
            let slope = b.refs.as_ref().unwrap().torso_perimeter_slope;
            for girth in [TorsoGirth::Chest, TorsoGirth::Waist, TorsoGirth::Pelvis] {
                let (_, a) = torso_circumference(&b, &coarse(0.001), girth).unwrap();
                let (_, h) = torso_circumference(&b, &coarse(0.0005), girth).unwrap();
                assert!((a - h).abs() <= slope * 0.001, "{girth:?}: {a} vs {h}");
            }
        }
    }

    #[test]
    fn axilla_at_arm_underside() {
        for seed in 0..4 {
            let b = body(seed, Gender::Male);
            let refs = b.refs.as_ref().unwrap();
            let y = detect_axilla(&b, &AnnotationConfig::default()).unwrap();
            assert!((y - refs.axilla_y).abs() < 1e-9, "{y} vs {}", refs.axilla_y);
            let coarse_y = detect_axilla(&b, &coarse(0.001)).unwrap();
            assert!(coarse_y <= refs.axilla_y && refs.axilla_y - coarse_y < 0.001);
            let half = detect_axilla(&b, &coarse(0.0005)).unwrap();
            assert!((half - coarse_y).abs() < 0.001);
        }
    }

    fn torso_only(b: &BodySample) -> BodySample {
        let (lo, hi) = b.mesh.bounds();
        BodySample {
            mesh: box_mesh(Point3::new(-0.15, lo.y, -0.1), Point3::new(0.15, hi.y, 0.1)),
            skeleton: b.skeleton.clone(),
            params: None,
            refs: None,
        }
    }

    #[test]
    fn armless_body_axilla_is_shoulder() {
        let b = torso_only(&body(1, Gender::Female));
        let y = detect_axilla(&b, &AnnotationConfig::default()).unwrap();
        assert_eq!(y, b.skeleton.get(Joint::LeftShoulder).y);
    }

    #[test]
    fn crotch_at_leg_junction() {
        for seed in 0..4 {
            let b = body(seed, Gender::Female);
            let refs = b.refs.as_ref().unwrap();
            let y = detect_crotch(&b, &AnnotationConfig::default()).unwrap();
            assert!((y - refs.crotch_y).abs() < 1e-9, "{y} vs {}", refs.crotch_y);
            let coarse_y = detect_crotch(&b, &coarse(0.001)).unwrap();
            assert!((coarse_y - refs.crotch_y).abs() <= 0.001);
        }
    }

    fn synthetic(ankle: f64, crotch: f64, gap: bool) -> BodySample {
        let mut mesh = TriangleMesh::default();
        if gap {
            mesh.append(&box_mesh(Point3::new(0.02, 0.0, -0.05), Point3::new(0.12, crotch, 0.05)));
            mesh.append(&box_mesh(Point3::new(-0.12, 0.0, -0.05), Point3::new(-0.02, crotch, 0.05)));
        } else {
            mesh.append(&box_mesh(Point3::new(-0.12, 0.0, -0.05), Point3::new(0.12, crotch, 0.05)));
        }
        mesh.append(&box_mesh(Point3::new(-0.15, crotch, -0.1), Point3::new(0.15, 1.5, 0.1)));
        let mut joints: BTreeMap<Joint, Point3> = Joint::ALL.iter().map(|&j| (j, Point3::new(0.0, 1.2, 0.0))).collect();
        joints.insert(Joint::LeftAnkle, Point3::new(0.07, ankle, 0.0));
        joints.insert(Joint::RightAnkle, Point3::new(-0.07, ankle, 0.0));
        joints.insert(Joint::Pelvis, Point3::new(0.0, 1.0, 0.0));
        BodySample {
            mesh,
            skeleton: Skeleton::new(joints).unwrap(),
            params: None,
            refs: None,
        }
    }

    #[test]
    fn inner_leg_from_construction() {
        let b = synthetic(0.08, 0.80, true);
        let mm = inner_leg_length(&b, &AnnotationConfig::default()).unwrap() * 1000.0;
        assert!((mm - 720.0).abs() < 1e-6, "{mm}");
        let mm = inner_leg_length(&b, &coarse(0.001)).unwrap() * 1000.0;
        assert!((mm - 720.0).abs() <= 1.0 + 1e-6, "{mm}");
    }

    #[test]
    fn touching_legs_have_no_crotch() {
        let b = synthetic(0.08, 0.80, false);
        assert!(matches!(
            detect_crotch(&b, &AnnotationConfig::default()),
            Err(MeasureError::CrotchNotFound)
        ));
    }
}
