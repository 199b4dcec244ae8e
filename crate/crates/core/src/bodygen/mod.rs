//! Procedural T-pose humanoids with known construction parameters, population
//! sampling, and import of externally produced bodies.
//!
//! A generated body is the union of closed parts: a lofted torso with
//! superellipse rings, tapered circular limbs, a neck cylinder and an
//! ellipsoid head. Parts overlap where they join, so the whole surface passes
//! the edge-manifold watertightness check while every slice through a single
//! part is an exactly known polygon. The legs end flush with the flat bottom
//! of the torso, which puts the crotch at a known height.

mod geometry;

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geometry::{circular_tube, ellipsoid, ring_angle, TubeAxis, TubeBuilder};

use crate::mesh::io::{load_mesh, FormatError};
use crate::mesh::{Point3, TriangleMesh};
use crate::skeleton::{Joint, Skeleton, SkeletonError};

pub const DEFAULT_SEGMENTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum BodyGenError {
    #[error("invalid parameter {field}: {value} not in [{min}, {max}]")]
    InvalidParams {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid parameter segments: {0} (need a multiple of 4, at least 8)")]
    InvalidSegments(usize),
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("mesh: {0}")]
    Parse(#[from] FormatError),
    #[error("skeleton: {0}")]
    Skeleton(#[from] SkeletonError),
    #[error("reading skeleton: {0}")]
    Io(#[from] std::io::Error),
}

impl ImportError {
    /// Name of the missing joint, if that is what went wrong.
    pub fn missing_joint(&self) -> Option<&str> {
        match self {
            ImportError::Skeleton(SkeletonError::MissingJoint(name)) => Some(name),
            _ => None,
        }
    }
}

/// Non-fatal findings on import.
#[derive(Debug, Clone, PartialEq)]
pub enum ImportWarning {
    NotWatertight { edge: (u32, u32), valence: usize },
}

/// Shape parameters of a generated body. Girth and length factors scale the
/// preset proportions; stature is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub gender: Gender,
    /// Meters, equal to the generated mesh's Y extent.
    pub stature: f64,
    pub head_girth: f64,
    pub neck_girth: f64,
    pub chest_girth: f64,
    pub waist_girth: f64,
    pub pelvis_girth: f64,
    pub arm_girth: f64,
    pub leg_girth: f64,
    pub arm_length: f64,
    pub leg_length: f64,
    /// Drives the small per-body variation of the torso ring shape.
    pub seed: u64,
    /// Vertices per ring.
    #[serde(default = "default_segments")]
    pub segments: usize,
}

fn default_segments() -> usize {
    DEFAULT_SEGMENTS
}

impl BodyParams {
    pub const STATURE_RANGE: (f64, f64) = (1.2, 2.2);
    pub const FACTOR_RANGE: (f64, f64) = (0.6, 1.6);

    /// Average body of the given preset.
    pub fn preset(gender: Gender, seed: u64) -> Self {
        Self {
            gender,
            stature: match gender {
                Gender::Male => 1.76,
                Gender::Female => 1.63,
            },
            head_girth: 1.0,
            neck_girth: 1.0,
            chest_girth: 1.0,
            waist_girth: 1.0,
            pelvis_girth: 1.0,
            arm_girth: 1.0,
            leg_girth: 1.0,
            arm_length: 1.0,
            leg_length: 1.0,
            seed,
            segments: DEFAULT_SEGMENTS,
        }
    }

    fn factors(&self) -> [(&'static str, f64); 9] {
        [
            ("head_girth", self.head_girth),
            ("neck_girth", self.neck_girth),
            ("chest_girth", self.chest_girth),
            ("waist_girth", self.waist_girth),
            ("pelvis_girth", self.pelvis_girth),
            ("arm_girth", self.arm_girth),
            ("leg_girth", self.leg_girth),
            ("arm_length", self.arm_length),
            ("leg_length", self.leg_length),
        ]
    }

    pub fn validate(&self) -> Result<(), BodyGenError> {
        let (lo, hi) = Self::STATURE_RANGE;
        if !(lo..=hi).contains(&self.stature) {
            return Err(BodyGenError::InvalidParams {
                field: "stature",
                value: self.stature,
                min: lo,
                max: hi,
            });
        }
        let (lo, hi) = Self::FACTOR_RANGE;
        for (field, value) in self.factors() {
            if !(lo..=hi).contains(&value) {
                return Err(BodyGenError::InvalidParams {
                    field,
                    value,
                    min: lo,
                    max: hi,
                });
            }
        }
        if self.segments < 8 || !self.segments.is_multiple_of(4) {
            return Err(BodyGenError::InvalidSegments(self.segments));
        }
        Ok(())
    }
}

/// Exact values known from the construction, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRefs {
    pub segments: usize,
    /// Head ellipsoid semi-axes (X, Y, Z) and center height.
    pub head_semi_axes: [f64; 3],
    pub head_center_y: f64,
    pub neck_radius: f64,
    /// Upper-arm radius midway between shoulder and elbow.
    pub bicep_radius: f64,
    pub wrist_radius: f64,
    /// Thigh radius midway between hip and knee.
    pub thigh_radius: f64,
    pub knee_radius: f64,
    /// Upper-arm radius at the shoulder; the arm's lowest point sits this far
    /// below the shoulder joint.
    pub shoulder_arm_radius: f64,
    /// Lowest level still touching the arms.
    pub axilla_y: f64,
    /// Junction of the legs with the torso bottom.
    pub crotch_y: f64,
    /// Waist ring half-width (X), half-depth (Z) and superellipse exponent,
    /// when the torso profile attains its minimum at the mid-spine joint.
    pub waist_ring: Option<[f64; 3]>,
    /// Largest |dP/dy| of the torso ring perimeter profile between controls.
    pub torso_perimeter_slope: f64,
}

impl AnalyticRefs {
    fn circle(r: f64) -> f64 {
        2.0 * PI * r
    }

    pub fn bicep_circumference(&self) -> f64 {
        Self::circle(self.bicep_radius)
    }

    pub fn wrist_circumference(&self) -> f64 {
        Self::circle(self.wrist_radius)
    }

    pub fn thigh_circumference(&self) -> f64 {
        Self::circle(self.thigh_radius)
    }

    pub fn knee_circumference(&self) -> f64 {
        Self::circle(self.knee_radius)
    }

    /// Continuous 2πr minus the inscribed polygon perimeter.
    pub fn polygonization_bound(&self, radius: f64) -> f64 {
        let n = self.segments as f64;
        2.0 * PI * radius - 2.0 * n * radius * (PI / n).sin()
    }

    /// Perimeter of the ellipse cut from the head ellipsoid by the horizontal
    /// plane halfway between its center and top.
    pub fn head_circumference_level(&self) -> f64 {
        let [a, _, c] = self.head_semi_axes;
        let k = (0.75f64).sqrt();
        ellipse_perimeter(a * k, c * k)
    }

    /// Tilted plane through the neck cylinder: ellipse with semi-axes r and
    /// r / cos(tilt).
    pub fn neck_circumference(&self, tilt_deg: f64) -> f64 {
        let r = self.neck_radius;
        ellipse_perimeter(r, r / tilt_deg.to_radians().cos())
    }

    pub fn waist_circumference(&self) -> Option<f64> {
        self.waist_ring
            .map(|[w, d, p]| superellipse_perimeter(w, d, p, 1 << 16))
    }
}

/// Ellipse perimeter by adaptive Simpson quadrature of the arc-length integral.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let f = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    4.0 * simpson(&f, 0.0, PI / 2.0, 1e-13, 30)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, depth)
}

/// Superellipse perimeter from a dense inscribed polygon.
pub fn superellipse_perimeter(half_x: f64, half_z: f64, exponent: f64, samples: usize) -> f64 {
    let e = 2.0 / exponent;
    let pt = |k: usize| {
        let a = 2.0 * PI * k as f64 / samples as f64;
        let (s, c) = a.sin_cos();
        (
            half_x * s.signum() * s.abs().powf(e),
            half_z * c.signum() * c.abs().powf(e),
        )
    };
    (0..samples)
        .map(|k| {
            let (x0, z0) = pt(k);
            let (x1, z1) = pt(k + 1);
            (x1 - x0).hypot(z1 - z0)
        })
        .sum()
}

/// A body ready for annotation.
#[derive(Debug, Clone)]
pub struct BodySample {
    pub mesh: TriangleMesh,
    pub skeleton: Skeleton,
    /// `None` for imported bodies.
    pub params: Option<BodyParams>,
    /// `None` for imported bodies.
    pub refs: Option<AnalyticRefs>,
}

impl BodySample {
    /// Mesh Y extent.
    pub fn stature(&self) -> f64 {
        let (lo, hi) = self.mesh.bounds();
        hi.y - lo.y
    }

    /// Rigidly or uniformly transforms mesh and skeleton together. Analytic
    /// references are dropped since they describe the original frame.
    pub fn transformed(&self, f: impl Fn(Point3) -> Point3) -> Self {
        let mut mesh = self.mesh.clone();
        for v in &mut mesh.vertices {
            *v = f(*v);
        }
        mesh.normals = None;
        Self {
            mesh,
            skeleton: self.skeleton.map_points(&f),
            params: self.params,
            refs: None,
        }
    }
}

// Cosine interpolation between profile controls: monotone on every segment
// with zero slope at each control, so extrema sit exactly on controls.
fn profile(controls: &[(f64, f64)], y: f64) -> f64 {
    if y <= controls[0].0 {
        return controls[0].1;
    }
    for w in controls.windows(2) {
        let (y0, v0) = w[0];
        let (y1, v1) = w[1];
        if y <= y1 {
            let t = (y - y0) / (y1 - y0);
            let s = 0.5 - 0.5 * (PI * t).cos();
            return v0 + (v1 - v0) * s;
        }
    }
    controls[controls.len() - 1].1
}

/// Builds the mesh, skeleton and analytic references for `params`.
pub fn generate_body(params: &BodyParams) -> Result<BodySample, BodyGenError> {
    params.validate()?;
    let h = params.stature;
    let n = params.segments;
    let female = params.gender == Gender::Female;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // vertical layout
    let head_b = 0.066 * h;
    let head_a = if female { 0.042 } else { 0.044 } * h * params.head_girth;
    let head_c = if female { 0.054 } else { 0.056 } * h * params.head_girth;
    let head_y = h - head_b;
    let neck_y = head_y - 0.125 * h;
    let shoulder_y = neck_y - 0.025 * h;
    let ankle_y = 0.045 * h;
    let crotch_y = (0.46 + 0.092 * (params.leg_length - 1.0)) * h;
    let knee_y = ankle_y + 0.578 * (crotch_y - ankle_y);
    let torso_len = neck_y - crotch_y;
    let hip_y = crotch_y + 0.115 * torso_len;
    let pelvis_y = crotch_y + 0.2 * torso_len;
    let mid_spine_y = crotch_y + 0.46 * torso_len;
    let chest_y = crotch_y + 0.77 * torso_len;
    let bust_y = crotch_y + 0.88 * torso_len;

    // legs
    let lg = params.leg_girth;
    let thigh_top_r = 0.047 * h * lg;
    let knee_r = 0.030 * h * lg;
    let calf_r = 0.032 * h * lg;
    let ankle_r = 0.0195 * h * lg;
    let sole_r = 0.022 * h * lg;
    let hip_dx = (if female { 0.055 } else { 0.052 } * h).max(thigh_top_r + 0.006 * h);
    let calf_y = ankle_y + 0.6 * (knee_y - ankle_y);

    // arms
    let ag = params.arm_girth;
    let al = params.arm_length;
    let shoulder_x = if female { 0.090 } else { 0.098 } * h;
    let arm_r = 0.028 * h * ag;
    let elbow_r = 0.0205 * h * ag;
    let wrist_r = 0.0155 * h * ag;
    let hand_r = 0.018 * h * ag;
    let tip_r = 0.008 * h * ag;
    let elbow_x = shoulder_x + 0.172 * h * al;
    let wrist_x = elbow_x + 0.146 * h * al;
    let hand_len = 0.108 * h * al;
    let tip_x = wrist_x + hand_len;
    let arm_inner_x = 0.45 * shoulder_x;

    let neck_r = if female { 0.030 } else { 0.034 } * h * params.neck_girth;

    // torso controls: (y, half-width, half-depth)
    let (pg, wg, cg) = (params.pelvis_girth, params.waist_girth, params.chest_girth);
    let hip_w = if female { 0.110 } else { 0.100 } * h * pg;
    let hip_d = if female { 0.078 } else { 0.075 } * h * pg;
    let bottom_w = (0.92 * hip_w).max(hip_dx + thigh_top_r + 0.004 * h);
    let bottom_d = (0.85 * hip_d).max(thigh_top_r + 0.004 * h);
    let waist_w = if female { 0.074 } else { 0.082 } * h * wg;
    let waist_d = if female { 0.058 } else { 0.062 } * h * wg;
    let chest_w = if female { 0.090 } else { 0.098 } * h * cg;
    let chest_d = if female { 0.072 } else { 0.070 } * h * cg;
    let bust_w = if female { 0.094 } else { 0.104 } * h * cg;
    let bust_d = if female { 0.070 } else { 0.068 } * h * cg;
    let top_w = if female { 0.080 } else { 0.085 } * h;
    let top_d = 0.050 * h;

    let ys = [crotch_y, hip_y, pelvis_y, mid_spine_y, chest_y, bust_y, neck_y];
    let widths = [bottom_w, hip_w, 0.96 * hip_w, waist_w, chest_w, bust_w, top_w];
    let depths = [bottom_d, hip_d, 0.96 * hip_d, waist_d, chest_d, bust_d, top_d];
    let exponents: Vec<f64> = (0..ys.len()).map(|_| rng.gen_range(2.0..2.4)).collect();
    let w_ctrl: Vec<(f64, f64)> = ys.iter().copied().zip(widths).collect();
    let d_ctrl: Vec<(f64, f64)> = ys.iter().copied().zip(depths).collect();
    let p_ctrl: Vec<(f64, f64)> = ys.iter().copied().zip(exponents.iter().copied()).collect();

    let mut torso = TubeBuilder::new(n);
    let max_gap = 0.006 * h;
    let mut torso_levels = Vec::new();
    for w in ys.windows(2) {
        let pieces = ((w[1] - w[0]) / max_gap).ceil().max(1.0) as usize;
        for k in 0..pieces {
            torso_levels.push(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64);
        }
    }
    torso_levels.push(neck_y);
    for &y in &torso_levels {
        torso.ring_superellipse(
            Point3::new(0.0, y, 0.0),
            profile(&d_ctrl, y),
            profile(&w_ctrl, y),
            profile(&p_ctrl, y),
            TubeAxis::Y,
        );
    }
    let mut mesh = torso.finish();

    let leg_stations = [
        (0.0, sole_r),
        (0.02 * h, sole_r),
        (ankle_y, ankle_r),
        (calf_y, calf_r),
        (knee_y, knee_r),
        (crotch_y, thigh_top_r),
    ];
    for side in [1.0, -1.0] {
        mesh.append(&circular_tube(
            Point3::new(side * hip_dx, 0.0, 0.0),
            TubeAxis::Y,
            &leg_stations,
            n,
        ));
    }

    let arm_stations = [
        (arm_inner_x, arm_r),
        (shoulder_x, arm_r),
        (elbow_x, elbow_r),
        (wrist_x, wrist_r),
        (wrist_x + 0.4 * hand_len, hand_r),
        (tip_x, tip_r),
    ];
    let right_stations: Vec<(f64, f64)> = arm_stations.iter().rev().map(|&(x, r)| (-x, r)).collect();
    let arm_origin = Point3::new(0.0, shoulder_y, 0.0);
    mesh.append(&circular_tube(arm_origin, TubeAxis::X, &arm_stations, n));
    mesh.append(&circular_tube(arm_origin, TubeAxis::X, &right_stations, n));

    mesh.append(&circular_tube(
        Point3::zeros(),
        TubeAxis::Y,
        &[(neck_y - 0.01 * h, neck_r), (head_y, neck_r)],
        n,
    ));
    mesh.append(&ellipsoid(
        Point3::new(0.0, head_y, 0.0),
        [head_a, head_b, head_c],
        n,
        n / 2,
    ));

    let p = |x: f64, y: f64| Point3::new(x, y, 0.0);
    let joints = [
        (Joint::Head, p(0.0, head_y)),
        (Joint::Neck, p(0.0, neck_y)),
        (Joint::LeftShoulder, p(shoulder_x, shoulder_y)),
        (Joint::RightShoulder, p(-shoulder_x, shoulder_y)),
        (Joint::LeftElbow, p(elbow_x, shoulder_y)),
        (Joint::RightElbow, p(-elbow_x, shoulder_y)),
        (Joint::LeftWrist, p(wrist_x, shoulder_y)),
        (Joint::RightWrist, p(-wrist_x, shoulder_y)),
        (Joint::UpperSpine, p(0.0, chest_y)),
        (Joint::MidSpine, p(0.0, mid_spine_y)),
        (Joint::Pelvis, p(0.0, pelvis_y)),
        (Joint::LeftHip, p(hip_dx, hip_y)),
        (Joint::RightHip, p(-hip_dx, hip_y)),
        (Joint::LeftKnee, p(hip_dx, knee_y)),
        (Joint::RightKnee, p(-hip_dx, knee_y)),
        (Joint::LeftAnkle, p(hip_dx, ankle_y)),
        (Joint::RightAnkle, p(-hip_dx, ankle_y)),
    ];
    let skeleton = Skeleton::new(joints.into_iter().collect()).expect("all joints placed");

    let thigh_y = 0.5 * (hip_y + knee_y);
    let thigh_radius = knee_r + (thigh_top_r - knee_r) * (thigh_y - knee_y) / (crotch_y - knee_y);
    let waist_is_min = waist_w < widths[2].min(chest_w) && waist_d < depths[2].min(chest_d);

    // steepest perimeter change of the continuous torso profile, sampled
    // finely, with a margin for the sampling
    let perimeter_at = |y: f64| {
        superellipse_perimeter(profile(&w_ctrl, y), profile(&d_ctrl, y), profile(&p_ctrl, y), 256)
    };
    let slope_step = 0.002;
    let steps = (torso_len / slope_step).ceil() as usize;
    let mut torso_perimeter_slope = 0.0f64;
    let mut prev = perimeter_at(crotch_y);
    for k in 1..=steps {
        let y = crotch_y + torso_len * k as f64 / steps as f64;
        let cur = perimeter_at(y);
        torso_perimeter_slope = torso_perimeter_slope.max((cur - prev).abs() * steps as f64 / torso_len);
        prev = cur;
    }
    torso_perimeter_slope *= 1.25;

    let refs = AnalyticRefs {
        segments: n,
        head_semi_axes: [head_a, head_b, head_c],
        head_center_y: head_y,
        neck_radius: neck_r,
        bicep_radius: 0.5 * (arm_r + elbow_r),
        wrist_radius: wrist_r,
        thigh_radius,
        knee_radius: knee_r,
        shoulder_arm_radius: arm_r,
        axilla_y: shoulder_y - arm_r,
        crotch_y,
        waist_ring: waist_is_min.then_some([waist_w, waist_d, exponents[3]]),
        torso_perimeter_slope,
    };

    Ok(BodySample {
        mesh,
        skeleton,
        params: Some(*params),
        refs: Some(refs),
    })
}

/// Per-sample seed from the master seed and sample index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-preset truncated normal distributions over [`BodyParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    /// Fraction of female bodies; counts are rounded and spread evenly.
    pub female_fraction: f64,
    pub male_stature: (f64, f64),
    pub female_stature: (f64, f64),
    /// Standard deviation of every girth/length factor around 1.
    pub factor_sd: f64,
    /// Truncation at this many standard deviations.
    pub truncate_sd: f64,
    pub segments: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            female_fraction: 0.5,
            male_stature: (1.76, 0.07),
            female_stature: (1.63, 0.065),
            factor_sd: 0.06,
            truncate_sd: 2.5,
            segments: DEFAULT_SEGMENTS,
        }
    }
}

impl PopulationConfig {
    /// Gender of sample `index` out of `count`, with exactly
    /// `round(count * female_fraction)` females spread evenly.
    pub fn gender_of(&self, index: usize, count: usize) -> Gender {
        let females = (count as f64 * self.female_fraction).round() as usize;
        let before = index * females / count;
        let after = (index + 1) * females / count;
        if after > before {
            Gender::Female
        } else {
            Gender::Male
        }
    }

    /// Parameters of sample `index`; independent of every other index.
    pub fn params_for(&self, index: usize, count: usize, master_seed: u64) -> BodyParams {
        let seed = derive_seed(master_seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gender = self.gender_of(index, count);
        let (mean, sd) = match gender {
            Gender::Male => self.male_stature,
            Gender::Female => self.female_stature,
        };
        let (slo, shi) = BodyParams::STATURE_RANGE;
        let stature = truncated_normal(&mut rng, mean, sd, self.truncate_sd, slo, shi);
        let (flo, fhi) = BodyParams::FACTOR_RANGE;
        let mut factor = || truncated_normal(&mut rng, 1.0, self.factor_sd, self.truncate_sd, flo, fhi);
        BodyParams {
            gender,
            stature,
            head_girth: factor(),
            neck_girth: factor(),
            chest_girth: factor(),
            waist_girth: factor(),
            pelvis_girth: factor(),
            arm_girth: factor(),
            leg_girth: factor(),
            arm_length: factor(),
            leg_length: factor(),
            seed,
            segments: self.segments,
        }
    }
}

fn truncated_normal(rng: &mut impl Rng, mean: f64, sd: f64, k: f64, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(mean - k * sd);
    let hi = hi.min(mean + k * sd);
    if sd <= 0.0 {
        return mean.clamp(lo, hi);
    }
    let normal = Normal::new(mean, sd).expect("finite sd");
    loop {
        let v = normal.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
}

/// Deterministic stream of `count` parameter sets.
pub fn sample_population(
    count: usize,
    config: &PopulationConfig,
    seed: u64,
) -> impl Iterator<Item = BodyParams> + '_ {
    (0..count).map(move |i| config.params_for(i, count, seed))
}

/// Loads an external body (OBJ or PLY mesh plus skeleton JSON).
pub fn import_body(mesh_path: &Path, skeleton_path: &Path) -> Result<(BodySample, Vec<ImportWarning>), ImportError> {
    let mesh = load_mesh(mesh_path)?;
    let skeleton = Skeleton::from_json(&std::fs::read_to_string(skeleton_path)?)?;
    let mut warnings = Vec::new();
    if let Some((edge, valence)) = mesh.first_open_edge() {
        log::warn!(
            "{}: mesh is not watertight (edge {:?} has {} faces)",
            mesh_path.display(),
            edge,
            valence
        );
        warnings.push(ImportWarning::NotWatertight { edge, valence });
    }
    Ok((
        BodySample {
            mesh,
            skeleton,
            params: None,
            refs: None,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{axis_extent, io::save_mesh, Axis};

    #[test]
    fn female_preset_is_watertight_with_exact_stature() {
        let body = generate_body(&BodyParams::preset(Gender::Female, 7)).unwrap();
        assert!(body.mesh.is_watertight());
        body.mesh.validate().unwrap();
        let (lo, hi) = axis_extent(&body.mesh, Axis::Y).unwrap();
        assert!((hi - lo - 1.63).abs() < 1e-6);
        body.skeleton.check_against(&body.mesh, 0.05).unwrap();
    }

    #[test]
    fn deterministic_generation() {
        let p = BodyParams::preset(Gender::Male, 3);
        let a = generate_body(&p).unwrap();
        let b = generate_body(&p).unwrap();
        assert_eq!(a.mesh, b.mesh);
        assert_eq!(a.skeleton, b.skeleton);
    }

    #[test]
    fn joint_ordering() {
        let body = generate_body(&BodyParams::preset(Gender::Male, 1)).unwrap();
        let y = |j| body.skeleton.get(j).y;
        let chain = [
            Joint::Head,
            Joint::Neck,
            Joint::UpperSpine,
            Joint::MidSpine,
            Joint::Pelvis,
            Joint::LeftKnee,
            Joint::LeftAnkle,
        ];
        for w in chain.windows(2) {
            assert!(y(w[0]) > y(w[1]), "{} !> {}", w[0], w[1]);
        }
    }

    #[test]
    fn thigh_reference_is_two_pi_r() {
        let body = generate_body(&BodyParams::preset(Gender::Male, 1)).unwrap();
        let refs = body.refs.unwrap();
        assert!((refs.thigh_circumference() - 2.0 * PI * refs.thigh_radius).abs() < 1e-15);
        let bound = refs.polygonization_bound(refs.thigh_radius);
        // 64 segments keep polygonization error below 0.05 %
        assert!(bound / refs.thigh_circumference() < 5e-4);
    }

    #[test]
    fn rejects_out_of_range_params() {
        let mut p = BodyParams::preset(Gender::Male, 0);
        p.stature = 2.5;
        assert!(matches!(
            generate_body(&p),
            Err(BodyGenError::InvalidParams { field: "stature", .. })
        ));
        let mut p = BodyParams::preset(Gender::Male, 0);
        p.leg_girth = 0.5;
        assert!(matches!(
            generate_body(&p),
            Err(BodyGenError::InvalidParams { field: "leg_girth", .. })
        ));
    }

    #[test]
    fn extreme_params_still_watertight() {
        for (lo_or_hi, seed) in [(0.6, 1), (1.6, 2)] {
            let mut p = BodyParams::preset(Gender::Female, seed);
            p.stature = if lo_or_hi < 1.0 { 1.2 } else { 2.2 };
            p.head_girth = lo_or_hi;
            p.neck_girth = lo_or_hi;
            p.chest_girth = lo_or_hi;
            p.waist_girth = lo_or_hi;
            p.pelvis_girth = lo_or_hi;
            p.arm_girth = lo_or_hi;
            p.leg_girth = lo_or_hi;
            p.arm_length = lo_or_hi;
            p.leg_length = lo_or_hi;
            let body = generate_body(&p).unwrap();
            assert!(body.mesh.is_watertight());
            body.mesh.validate().unwrap();
        }
    }

    #[test]
    fn population_is_deterministic_and_in_range() {
        let cfg = PopulationConfig::default();
        let a: Vec<_> = sample_population(100, &cfg, 1).collect();
        let b: Vec<_> = sample_population(100, &cfg, 1).collect();
        assert_eq!(a, b);
        for (i, p) in a.iter().enumerate() {
            p.validate().unwrap();
            for q in &a[i + 1..] {
                assert_ne!(p, q);
            }
        }
        let females = a.iter().filter(|p| p.gender == Gender::Female).count();
        assert_eq!(females, 50);
    }

    #[test]
    fn gender_counts_round() {
        let cfg = PopulationConfig {
            female_fraction: 0.3,
            ..Default::default()
        };
        let f = (0..7).filter(|&i| cfg.gender_of(i, 7) == Gender::Female).count();
        assert_eq!(f, 2);
    }

    #[test]
    fn ellipse_perimeter_matches_circle() {
        assert!((ellipse_perimeter(1.0, 1.0) - 2.0 * PI).abs() < 1e-12);
        // Ramanujan II is accurate to ~1e-10 relative at this eccentricity
        let (a, b) = (3.0f64, 2.0f64);
        let h = ((a - b) / (a + b)).powi(2);
        let ram = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert!((ellipse_perimeter(a, b) - ram).abs() / ram < 1e-9);
        assert!((superellipse_perimeter(a, b, 2.0, 1 << 16) - ram).abs() / ram < 1e-8);
    }

    #[test]
    fn import_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let body = generate_body(&BodyParams::preset(Gender::Male, 2)).unwrap();
        let obj = dir.path().join("body.obj");
        let json = dir.path().join("body.json");
        save_mesh(&body.mesh, &obj).unwrap();
        std::fs::write(&json, body.skeleton.to_json()).unwrap();
        let (imported, warnings) = import_body(&obj, &json).unwrap();
        assert!(warnings.is_empty());
        assert!(imported.refs.is_none());
        assert_eq!(imported.mesh.vertices, body.mesh.vertices);

        let mut value: serde_json::Value = serde_json::from_str(&body.skeleton.to_json()).unwrap();
        value.as_object_mut().unwrap().remove("pelvis");
        std::fs::write(&json, value.to_string()).unwrap();
        let err = import_body(&obj, &json).unwrap_err();
        assert_eq!(err.missing_joint(), Some("pelvis"));

        let mut open = body.mesh.clone();
        open.triangles.pop();
        save_mesh(&open, &obj).unwrap();
        std::fs::write(&json, body.skeleton.to_json()).unwrap();
        let (_, warnings) = import_body(&obj, &json).unwrap();
        assert!(matches!(warnings[0], ImportWarning::NotWatertight { .. }));
    }
}
