//! Skeleton-guided annotation of the 16 anthropometric measurements.
//!
//! Lengths come straight from joint positions. Circumferences come from plane
//! sections of the mesh placed relative to the joints; the torso girths scan
//! the family of horizontal sections (the mesh signature) over a region and
//! keep its extremum.
//!
//! Everything is computed in a body frame derived from the skeleton (Y up,
//! lateral axis from right to left shoulder), so results do not change when
//! the body is translated or turned about the vertical axis.

mod circumference;
mod lengths;
mod signature;

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use circumference::{head_circumference, limb_circumference, neck_circumference, select_loop, Limb};
pub use lengths::{arm_span, joint_distance};
pub use signature::{detect_axilla, detect_crotch, inner_leg_length, scan_girth, torso_circumference, Extremum, TorsoGirth};

use crate::bodygen::BodySample;
use crate::mesh::{MeshError, Point3};
use crate::skeleton::{Joint, Skeleton};

/// The annotated measurements, in output column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    HeadCircumference,
    NeckCircumference,
    ShoulderToShoulder,
    ArmSpan,
    ShoulderToWrist,
    TorsoLength,
    BicepCircumference,
    WristCircumference,
    ChestCircumference,
    WaistCircumference,
    PelvisCircumference,
    LegLength,
    InnerLegLength,
    ThighCircumference,
    KneeCircumference,
    CalfLength,
}

impl Measurement {
    pub const COUNT: usize = 16;

    pub const ALL: [Measurement; 16] = [
        Measurement::HeadCircumference,
        Measurement::NeckCircumference,
        Measurement::ShoulderToShoulder,
        Measurement::ArmSpan,
        Measurement::ShoulderToWrist,
        Measurement::TorsoLength,
        Measurement::BicepCircumference,
        Measurement::WristCircumference,
        Measurement::ChestCircumference,
        Measurement::WaistCircumference,
        Measurement::PelvisCircumference,
        Measurement::LegLength,
        Measurement::InnerLegLength,
        Measurement::ThighCircumference,
        Measurement::KneeCircumference,
        Measurement::CalfLength,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column name used in CSV files.
    pub fn key(self) -> &'static str {
        match self {
            Measurement::HeadCircumference => "head_circumference",
            Measurement::NeckCircumference => "neck_circumference",
            Measurement::ShoulderToShoulder => "shoulder_to_shoulder",
            Measurement::ArmSpan => "arm_span",
            Measurement::ShoulderToWrist => "shoulder_to_wrist",
            Measurement::TorsoLength => "torso_length",
            Measurement::BicepCircumference => "bicep_circumference",
            Measurement::WristCircumference => "wrist_circumference",
            Measurement::ChestCircumference => "chest_circumference",
            Measurement::WaistCircumference => "waist_circumference",
            Measurement::PelvisCircumference => "pelvis_circumference",
            Measurement::LegLength => "leg_length",
            Measurement::InnerLegLength => "inner_leg_length",
            Measurement::ThighCircumference => "thigh_circumference",
            Measurement::KneeCircumference => "knee_circumference",
            Measurement::CalfLength => "calf_length",
        }
    }

    /// Human-readable row label for reports.
    pub fn label(self) -> &'static str {
        match self {
            Measurement::HeadCircumference => "Head circumference",
            Measurement::NeckCircumference => "Neck circumference",
            Measurement::ShoulderToShoulder => "Shoulder-to-shoulder",
            Measurement::ArmSpan => "Arm span",
            Measurement::ShoulderToWrist => "Shoulder-to-wrist",
            Measurement::TorsoLength => "Torso length",
            Measurement::BicepCircumference => "Bicep circumference",
            Measurement::WristCircumference => "Wrist circumference",
            Measurement::ChestCircumference => "Chest circumference",
            Measurement::WaistCircumference => "Waist circumference",
            Measurement::PelvisCircumference => "Pelvis circumference",
            Measurement::LegLength => "Leg length",
            Measurement::InnerLegLength => "Inner leg length",
            Measurement::ThighCircumference => "Thigh circumference",
            Measurement::KneeCircumference => "Knee circumference",
            Measurement::CalfLength => "Calf length",
        }
    }
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Measurement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measurement::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| format!("unknown measurement {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("no cross-section for {0}")]
    NoSection(&'static str),
    #[error("no valid level in the {0} region")]
    EmptyRegion(&'static str),
    #[error("axilla not found within {0:.3} m below the shoulder")]
    AxillaNotFound(f64),
    #[error("crotch not found below the pelvis")]
    CrotchNotFound,
    #[error("invalid annotation config: {0}")]
    InvalidConfig(String),
    #[error("invalid measurement set: {0}")]
    InvalidMeasurements(String),
    #[error("{measurement}: {source}")]
    Failed {
        measurement: Measurement,
        #[source]
        source: Box<MeasureError>,
    },
}

impl MeasureError {
    fn during(self, measurement: Measurement) -> Self {
        MeasureError::Failed {
            measurement,
            source: Box::new(self),
        }
    }
}

/// Which body side bilateral measurements are taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Left,
    Right,
}

impl Side {
    pub fn shoulder(self) -> Joint {
        match self {
            Side::Left => Joint::LeftShoulder,
            Side::Right => Joint::RightShoulder,
        }
    }
    pub fn elbow(self) -> Joint {
        match self {
            Side::Left => Joint::LeftElbow,
            Side::Right => Joint::RightElbow,
        }
    }
    pub fn wrist(self) -> Joint {
        match self {
            Side::Left => Joint::LeftWrist,
            Side::Right => Joint::RightWrist,
        }
    }
    pub fn hip(self) -> Joint {
        match self {
            Side::Left => Joint::LeftHip,
            Side::Right => Joint::RightHip,
        }
    }
    pub fn knee(self) -> Joint {
        match self {
            Side::Left => Joint::LeftKnee,
            Side::Right => Joint::RightKnee,
        }
    }
    pub fn ankle(self) -> Joint {
        match self {
            Side::Left => Joint::LeftAnkle,
            Side::Right => Joint::RightAnkle,
        }
    }
}

/// How a cross-section turns into a circumference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CircumferenceMode {
    /// Convex hull perimeter: a taut tape bridging concavities.
    #[default]
    Hull,
    /// Raw loop length.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationConfig {
    /// Vertical scan step in meters.
    pub step: f64,
    /// Head and neck plane tilt about the lateral axis, degrees; front up.
    pub tilt_deg: f64,
    /// Waist region half-height as a fraction of stature.
    pub waist_half_height: f64,
    pub circumference: CircumferenceMode,
    pub side: Side,
    /// Refine scanned extrema and transitions between scan levels.
    pub refine: bool,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            step: 0.001,
            tilt_deg: 15.0,
            waist_half_height: 0.05,
            circumference: CircumferenceMode::Hull,
            side: Side::Left,
            refine: true,
        }
    }
}

impl AnnotationConfig {
    pub fn validate(&self) -> Result<(), MeasureError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(MeasureError::InvalidConfig(format!("step {} must be > 0", self.step)));
        }
        if !(0.0..=45.0).contains(&self.tilt_deg) {
            return Err(MeasureError::InvalidConfig(format!(
                "tilt {} not in [0, 45] degrees",
                self.tilt_deg
            )));
        }
        if !(self.waist_half_height > 0.0 && self.waist_half_height <= 0.15) {
            return Err(MeasureError::InvalidConfig(format!(
                "waist half-height fraction {} not in (0, 0.15]",
                self.waist_half_height
            )));
        }
        Ok(())
    }
}

/// Orthonormal body frame: `up` is world Y, `lateral` points from the right
/// shoulder to the left, `forward = lateral × up`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyFrame {
    pub up: Point3,
    pub lateral: Point3,
    pub forward: Point3,
}

impl BodyFrame {
    pub fn from_skeleton(skeleton: &Skeleton) -> Self {
        let up = Point3::y();
        let d = skeleton.get(Joint::LeftShoulder) - skeleton.get(Joint::RightShoulder);
        let flat = d - up * d.dot(&up);
        let lateral = if flat.norm() > 1e-12 {
            flat.normalize()
        } else {
            Point3::x()
        };
        Self {
            up,
            lateral,
            forward: lateral.cross(&up),
        }
    }

    /// `up` rotated about `lateral` so the front of the plane rises.
    pub fn tilted_up(&self, tilt_deg: f64) -> Point3 {
        let (s, c) = tilt_deg.to_radians().sin_cos();
        self.up * c - self.forward * s
    }
}

/// The 16 measurements in millimeters, in [`Measurement::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet(pub [f64; Measurement::COUNT]);

impl MeasurementSet {
    pub fn get(&self, m: Measurement) -> f64 {
        self.0[m.index()]
    }

    pub fn set(&mut self, m: Measurement, value_mm: f64) {
        self.0[m.index()] = value_mm;
    }

    pub fn values(&self) -> &[f64; Measurement::COUNT] {
        &self.0
    }

    /// Positivity plus the anatomical sanity relations.
    pub fn validate(&self) -> Result<(), MeasureError> {
        use Measurement::*;
        for m in Measurement::ALL {
            let v = self.get(m);
            if !(v > 0.0 && v.is_finite()) {
                return Err(MeasureError::InvalidMeasurements(format!("{m} = {v}")));
            }
        }
        let pairs = [
            (ArmSpan, ShoulderToShoulder),
            (LegLength, CalfLength),
            (ChestCircumference, WristCircumference),
        ];
        for (big, small) in pairs {
            if self.get(big) < self.get(small) {
                return Err(MeasureError::InvalidMeasurements(format!(
                    "{big} ({:.3}) < {small} ({:.3})",
                    self.get(big),
                    self.get(small)
                )));
            }
        }
        Ok(())
    }

    pub fn csv_header() -> String {
        let mut s = String::from("id");
        for m in Measurement::ALL {
            s.push(',');
            s.push_str(m.key());
        }
        s
    }

    /// `id,v1,...,v16` with three decimals.
    pub fn csv_row(&self, id: &str) -> String {
        let mut s = id.to_string();
        for v in self.0 {
            s.push_str(&format!(",{v:.3}"));
        }
        s
    }
}

/// Writes a measurements table (header plus one row per sample).
pub fn write_csv<'a, W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = (&'a str, &'a MeasurementSet)>,
) -> io::Result<()> {
    writeln!(w, "{}", MeasurementSet::csv_header())?;
    for (id, m) in rows {
        writeln!(w, "{}", m.csv_row(id))?;
    }
    Ok(())
}

/// Computes all 16 measurements on a T-pose body.
pub fn measure_all(body: &BodySample, cfg: &AnnotationConfig) -> Result<MeasurementSet, MeasureError> {
    use Measurement::*;
    cfg.validate()?;
    let sk = &body.skeleton;
    let frame = BodyFrame::from_skeleton(sk);
    let side = cfg.side;
    let ctx = signature::ScanContext::new(body, cfg);
    let mut out = MeasurementSet([0.0; Measurement::COUNT]);

    let mm = |m: f64| m * 1000.0;
    out.set(
        ShoulderToShoulder,
        mm(joint_distance(sk, Joint::LeftShoulder, Joint::RightShoulder)),
    );
    out.set(ShoulderToWrist, mm(joint_distance(sk, side.shoulder(), side.wrist())));
    out.set(TorsoLength, mm(joint_distance(sk, Joint::Neck, Joint::Pelvis)));
    out.set(LegLength, mm(joint_distance(sk, Joint::Pelvis, side.ankle())));
    out.set(CalfLength, mm(joint_distance(sk, side.knee(), side.ankle())));
    out.set(ArmSpan, mm(arm_span(&body.mesh, &frame).map_err(|e| MeasureError::from(e).during(ArmSpan))?));

    let run = |m: Measurement, r: Result<f64, MeasureError>| r.map(mm).map_err(|e| e.during(m));
    out.set(HeadCircumference, run(HeadCircumference, head_circumference(body, &frame, cfg))?);
    out.set(NeckCircumference, run(NeckCircumference, neck_circumference(body, &frame, cfg))?);
    for (m, limb) in [
        (BicepCircumference, Limb::Bicep),
        (WristCircumference, Limb::Wrist),
        (ThighCircumference, Limb::Thigh),
        (KneeCircumference, Limb::Knee),
    ] {
        out.set(m, run(m, limb_circumference(body, &frame, limb, cfg))?);
    }
    for (m, girth) in [
        (ChestCircumference, TorsoGirth::Chest),
        (WaistCircumference, TorsoGirth::Waist),
        (PelvisCircumference, TorsoGirth::Pelvis),
    ] {
        out.set(m, run(m, ctx.torso_circumference(girth).map(|(_, v)| v))?);
    }
    out.set(InnerLegLength, run(InnerLegLength, ctx.inner_leg_length())?);

    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_keys() {
        assert_eq!(Measurement::ALL.len(), 16);
        for (i, m) in Measurement::ALL.iter().enumerate() {
            assert_eq!(m.index(), i);
            assert_eq!(m.key().parse::<Measurement>().unwrap(), *m);
        }
        assert!(MeasurementSet::csv_header().starts_with("id,head_circumference,neck_circumference"));
        assert!(MeasurementSet::csv_header().ends_with("knee_circumference,calf_length"));
    }

    #[test]
    fn csv_row_three_decimals() {
        let mut m = MeasurementSet([1.0; 16]);
        m.set(Measurement::ArmSpan, 1700.12345);
        let row = m.csv_row("000001");
        assert!(row.starts_with("000001,1.000,1.000,1.000,1700.123,"));
    }

    #[test]
    fn validation_flags_zero_and_inconsistent_sets() {
        let mut m = MeasurementSet([100.0; 16]);
        m.validate().unwrap();
        m.set(Measurement::CalfLength, 0.0);
        assert!(m.validate().is_err());
        let mut m = MeasurementSet([100.0; 16]);
        m.set(Measurement::ArmSpan, 50.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn config_ranges() {
        AnnotationConfig::default().validate().unwrap();
        for bad in [
            AnnotationConfig { step: 0.0, ..Default::default() },
            AnnotationConfig { tilt_deg: 50.0, ..Default::default() },
            AnnotationConfig { waist_half_height: 0.2, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn frame_follows_shoulders() {
        use std::collections::BTreeMap;
        let mut j: BTreeMap<Joint, Point3> = Joint::ALL.iter().map(|&j| (j, Point3::zeros())).collect();
        j.insert(Joint::LeftShoulder, Point3::new(0.0, 1.4, -0.2));
        j.insert(Joint::RightShoulder, Point3::new(0.0, 1.4, 0.2));
        let f = BodyFrame::from_skeleton(&Skeleton::new(j).unwrap());
        assert!((f.lateral - (-Point3::z())).norm() < 1e-12);
        assert!((f.forward - Point3::x()).norm() < 1e-12);
        // front rises under positive tilt
        let n = f.tilted_up(15.0);
        assert!(n.dot(&f.forward) < 0.0 && n.y > 0.9);
    }
}
