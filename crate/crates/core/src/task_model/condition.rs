use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TaskError;
use crate::geometry::{Pose, TableBounds, Vec3};
use crate::placement::settle_scene;
use crate::scene_model::Scene;

/// Name usable as a reference that denotes the table top.
pub const TABLE: &str = "table";
const CONTACT_TOLERANCE: f64 = 0.01;
const LIFT_HEIGHT: f64 = 0.05;
const UPRIGHT_TOLERANCE_DEG: f64 = 15.0;
const RELATION_DEADBAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Inside,
    OnTopOf,
    Near,
    Lifted,
    Upright,
    LeftOf,
    RightOf,
    InFrontOf,
    Behind,
    CountIn,
    Grasped,
}

impl PredicateKind {
    pub const ALL: [PredicateKind; 11] = [
        PredicateKind::Inside,
        PredicateKind::OnTopOf,
        PredicateKind::Near,
        PredicateKind::Lifted,
        PredicateKind::Upright,
        PredicateKind::LeftOf,
        PredicateKind::RightOf,
        PredicateKind::InFrontOf,
        PredicateKind::Behind,
        PredicateKind::CountIn,
        PredicateKind::Grasped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredicateKind::Inside => "inside",
            PredicateKind::OnTopOf => "on_top_of",
            PredicateKind::Near => "near",
            PredicateKind::Lifted => "lifted",
            PredicateKind::Upright => "upright",
            PredicateKind::LeftOf => "left_of",
            PredicateKind::RightOf => "right_of",
            PredicateKind::InFrontOf => "in_front_of",
            PredicateKind::Behind => "behind",
            PredicateKind::CountIn => "count_in",
            PredicateKind::Grasped => "grasped",
        }
    }

    fn needs_reference(self) -> bool {
        !matches!(self, PredicateKind::Lifted | PredicateKind::Upright | PredicateKind::Grasped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminationCondition {
    pub predicate: PredicateKind,
    pub subjects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// Distance for `near`, minimum count for `count_in`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl TerminationCondition {
    pub fn new(predicate: PredicateKind, subjects: &[&str], reference: Option<&str>, threshold: Option<f64>) -> Self {
        Self {
            predicate,
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            reference: reference.map(str::to_owned),
            threshold,
        }
    }

    /// Arity and parameter checks.
    pub fn check(&self) -> Result<(), TaskError> {
        let bad = |m: &str| Err(TaskError::InvalidCondition(format!("{}: {m}", self.predicate.name())));
        let p = self.predicate;
        if p == PredicateKind::CountIn {
            if self.subjects.is_empty() {
                return bad("needs at least one subject");
            }
        } else if self.subjects.len() != 1 {
            return bad("needs exactly one subject");
        }
        if p.needs_reference() != self.reference.is_some() {
            return bad(if p.needs_reference() { "needs a reference" } else { "takes no reference" });
        }
        match (p, self.threshold) {
            (PredicateKind::Near, Some(t)) if t > 0.0 && t.is_finite() => Ok(()),
            (PredicateKind::Near, _) => bad("needs a positive distance threshold"),
            (PredicateKind::CountIn, Some(t)) if t >= 1.0 && t.fract() == 0.0 => Ok(()),
            (PredicateKind::CountIn, _) => bad("needs an integer threshold >= 1"),
            (_, Some(_)) => bad("takes no threshold"),
            (_, None) => Ok(()),
        }
    }

    /// Every object name the condition mentions, excluding the table.
    pub fn objects(&self) -> impl Iterator<Item = &str> {
        self.subjects.iter().map(String::as_str).chain(self.reference.as_deref().filter(|r| *r != TABLE))
    }
}

/// Object poses at one instant plus the gripper state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneState {
    pub poses: BTreeMap<String, Pose>,
    /// Normalized opening in [0, 1].
    #[serde(default)]
    pub gripper: f64,
    #[serde(default)]
    pub held: Option<String>,
}

impl SceneState {
    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            poses: scene.placements.iter().map(|p| (p.name.clone(), p.pose)).collect(),
            gripper: 1.0,
            held: None,
        }
    }
}

/// Static per-object data needed to evaluate conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub dims: BTreeMap<String, Vec3>,
    /// Settled center height of each object, the baseline for `lifted`.
    pub rest_z: BTreeMap<String, f64>,
    pub table: TableBounds,
}

impl EvalContext {
    pub fn from_scene(scene: &Scene) -> Self {
        let settled = settle_scene(scene);
        Self {
            dims: scene.placements.iter().map(|p| (p.name.clone(), p.dims)).collect(),
            rest_z: settled.placements.iter().map(|p| (p.name.clone(), p.pose.position.z)).collect(),
            table: scene.bounds,
        }
    }
}

/// A box with full 3D orientation.
struct Solid {
    pose: Pose,
    half: Vec3,
}

impl Solid {
    fn local(&self, p: Vec3) -> Vec3 {
        let q = self.pose.orientation();
        let inv = crate::geometry::Quat::new(q.w, -q.x, -q.y, -q.z);
        inv.rotate(p - self.pose.position)
    }

    /// Half the vertical extent of the rotated box.
    fn vertical_half(&self) -> f64 {
        let q = self.pose.orientation();
        let axes = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let h = [self.half.x, self.half.y, self.half.z];
        axes.iter().zip(h).map(|(a, h)| q.rotate(*a).z.abs() * h).sum()
    }

    fn top(&self) -> f64 {
        self.pose.position.z + self.vertical_half()
    }

    fn bottom(&self) -> f64 {
        self.pose.position.z - self.vertical_half()
    }

    fn center(&self) -> Vec3 {
        self.pose.position
    }

    /// Whether a point's ground projection lies over the box's top face,
    /// measured in the yaw frame.
    fn over_face(&self, p: Vec3) -> bool {
        let yaw = self.pose.orientation().yaw();
        let (s, c) = yaw.sin_cos();
        let d = p - self.pose.position;
        let lx = c * d.x + s * d.y;
        let ly = -s * d.x + c * d.y;
        lx.abs() <= self.half.x && ly.abs() <= self.half.y
    }
}

fn solid(name: &str, state: &SceneState, ctx: &EvalContext) -> Result<Solid, TaskError> {
    let pose = *state.poses.get(name).ok_or_else(|| TaskError::MissingObject(name.to_owned()))?;
    let dims = *ctx.dims.get(name).ok_or_else(|| TaskError::MissingObject(name.to_owned()))?;
    Ok(Solid { pose, half: dims * 0.5 })
}

fn inside(subject: &Solid, reference: &Solid) -> bool {
    let l = reference.local(subject.center());
    let h = reference.half;
    l.x.abs() < h.x && l.y.abs() < h.y && l.z.abs() < h.z && subject.top() <= reference.top()
}

/// Evaluates one condition against a state.
pub fn eval_condition(c: &TerminationCondition, state: &SceneState, ctx: &EvalContext) -> Result<bool, TaskError> {
    c.check()?;
    let subject = || solid(&c.subjects[0], state, ctx);
    let reference = || solid(c.reference.as_deref().unwrap_or_default(), state, ctx);
    let relation = |dx_sign: f64, dy_sign: f64| -> Result<bool, TaskError> {
        let d = subject()?.center() - reference()?.center();
        Ok(if dx_sign != 0.0 {
            d.x * dx_sign > RELATION_DEADBAND && d.x.abs() > d.y.abs()
        } else {
            d.y * dy_sign > RELATION_DEADBAND && d.y.abs() >= d.x.abs()
        })
    };
    match c.predicate {
        PredicateKind::Inside => Ok(inside(&subject()?, &reference()?)),
        PredicateKind::OnTopOf => {
            let s = subject()?;
            if c.reference.as_deref() == Some(TABLE) && !state.poses.contains_key(TABLE) {
                let p = s.center();
                return Ok((s.bottom() - ctx.table.z_top).abs() <= CONTACT_TOLERANCE && ctx.table.contains(p.x, p.y));
            }
            let r = reference()?;
            Ok((s.bottom() - r.top()).abs() <= CONTACT_TOLERANCE && r.over_face(s.center()))
        }
        PredicateKind::Near => {
            let d = subject()?.center().distance(reference()?.center());
            Ok(d <= c.threshold.expect("checked"))
        }
        PredicateKind::Lifted => {
            let name = &c.subjects[0];
            let rest = *ctx.rest_z.get(name).ok_or_else(|| TaskError::MissingObject(name.clone()))?;
            Ok(subject()?.center().z - rest >= LIFT_HEIGHT)
        }
        PredicateKind::Upright => {
            let up = subject()?.pose.orientation().rotate(Vec3::new(0.0, 0.0, 1.0));
            Ok(up.z.clamp(-1.0, 1.0).acos() <= UPRIGHT_TOLERANCE_DEG.to_radians())
        }
        PredicateKind::LeftOf => relation(0.0, 1.0),
        PredicateKind::RightOf => relation(0.0, -1.0),
        PredicateKind::InFrontOf => relation(1.0, 0.0),
        PredicateKind::Behind => relation(-1.0, 0.0),
        PredicateKind::CountIn => {
            let r = reference()?;
            let mut count = 0usize;
            for name in &c.subjects {
                if inside(&solid(name, state, ctx)?, &r) {
                    count += 1;
                }
            }
            Ok(count as f64 >= c.threshold.expect("checked"))
        }
        PredicateKind::Grasped => {
            subject()?;
            Ok(state.held.as_deref() == Some(c.subjects[0].as_str()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quat;
    use proptest::prelude::*;

    fn ctx(objects: &[(&str, [f64; 3])]) -> EvalContext {
        EvalContext {
            dims: objects.iter().map(|(n, d)| (n.to_string(), Vec3::from(*d))).collect(),
            rest_z: objects.iter().map(|(n, d)| (n.to_string(), d[2] / 2.0)).collect(),
            table: TableBounds::default(),
        }
    }

    fn state(poses: &[(&str, [f64; 3], f64)]) -> SceneState {
        SceneState {
            poses: poses.iter().map(|(n, p, yaw)| (n.to_string(), Pose::from_position_yaw(Vec3::from(*p), *yaw))).collect(),
            gripper: 1.0,
            held: None,
        }
    }

    fn cond(p: PredicateKind, s: &[&str], r: Option<&str>, t: Option<f64>) -> TerminationCondition {
        TerminationCondition::new(p, s, r, t)
    }

    #[test]
    fn cube_inside_box() {
        let c = ctx(&[("cube", [0.05; 3]), ("box", [0.3, 0.3, 0.2])]);
        let s = state(&[("cube", [0.5, 0.0, 0.03], 0.2), ("box", [0.5, 0.0, 0.1], 0.0)]);
        assert!(eval_condition(&cond(PredicateKind::Inside, &["cube"], Some("box"), None), &s, &c).unwrap());
        let s = state(&[("cube", [0.9, 0.0, 0.03], 0.2), ("box", [0.5, 0.0, 0.1], 0.0)]);
        assert!(!eval_condition(&cond(PredicateKind::Inside, &["cube"], Some("box"), None), &s, &c).unwrap());
    }

    #[test]
    fn near_threshold() {
        let c = ctx(&[("cube", [0.05; 3]), ("ref", [0.05; 3])]);
        let s = state(&[("cube", [1.5, 0.0, 0.025], 0.0), ("ref", [0.5, 0.0, 0.025], 0.0)]);
        assert!(!eval_condition(&cond(PredicateKind::Near, &["cube"], Some("ref"), Some(0.1)), &s, &c).unwrap());
        let s = state(&[("cube", [0.55, 0.0, 0.025], 0.0), ("ref", [0.5, 0.0, 0.025], 0.0)]);
        assert!(eval_condition(&cond(PredicateKind::Near, &["cube"], Some("ref"), Some(0.1)), &s, &c).unwrap());
    }

    #[test]
    fn two_of_three_bananas() {
        let c = ctx(&[("b1", [0.1, 0.04, 0.04]), ("b2", [0.1, 0.04, 0.04]), ("b3", [0.1, 0.04, 0.04]), ("bin", [0.34, 0.26, 0.14])]);
        let s = state(&[
            ("b1", [0.5, 0.05, 0.02], 0.0),
            ("b2", [0.45, -0.05, 0.02], 0.0),
            ("b3", [0.8, 0.3, 0.02], 0.0),
            ("bin", [0.5, 0.0, 0.07], 0.0),
        ]);
        let c2 = cond(PredicateKind::CountIn, &["b1", "b2", "b3"], Some("bin"), Some(2.0));
        assert!(eval_condition(&c2, &s, &c).unwrap());
        let c3 = cond(PredicateKind::CountIn, &["b1", "b2", "b3"], Some("bin"), Some(3.0));
        assert!(!eval_condition(&c3, &s, &c).unwrap());
    }

    #[test]
    fn on_top_of_object_and_table() {
        let c = ctx(&[("cube", [0.05; 3]), ("book", [0.24, 0.17, 0.04])]);
        let s = state(&[("cube", [0.5, 0.0, 0.04 + 0.025 + 0.005], 0.0), ("book", [0.5, 0.0, 0.02], 0.7)]);
        assert!(eval_condition(&cond(PredicateKind::OnTopOf, &["cube"], Some("book"), None), &s, &c).unwrap());
        assert!(!eval_condition(&cond(PredicateKind::OnTopOf, &["cube"], Some("table"), None), &s, &c).unwrap());
        assert!(eval_condition(&cond(PredicateKind::OnTopOf, &["book"], Some("table"), None), &s, &c).unwrap());
    }

    #[test]
    fn lifted_and_upright_and_grasped() {
        let c = ctx(&[("cup", [0.08, 0.08, 0.1])]);
        let mut s = state(&[("cup", [0.5, 0.0, 0.12], 0.0)]);
        assert!(eval_condition(&cond(PredicateKind::Lifted, &["cup"], None, None), &s, &c).unwrap());
        assert!(eval_condition(&cond(PredicateKind::Upright, &["cup"], None, None), &s, &c).unwrap());
        let tipped = Pose::new(Vec3::new(0.5, 0.0, 0.05), Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), 0.5)).unwrap();
        s.poses.insert("cup".into(), tipped);
        assert!(!eval_condition(&cond(PredicateKind::Upright, &["cup"], None, None), &s, &c).unwrap());
        assert!(!eval_condition(&cond(PredicateKind::Grasped, &["cup"], None, None), &s, &c).unwrap());
        s.held = Some("cup".into());
        assert!(eval_condition(&cond(PredicateKind::Grasped, &["cup"], None, None), &s, &c).unwrap());
    }

    #[test]
    fn missing_object_errors() {
        let c = ctx(&[("cube", [0.05; 3])]);
        let s = state(&[("cube", [0.5, 0.0, 0.025], 0.0)]);
        assert_eq!(
            eval_condition(&cond(PredicateKind::Inside, &["cube"], Some("ghost"), None), &s, &c),
            Err(TaskError::MissingObject("ghost".into()))
        );
    }

    #[test]
    fn arity_is_checked() {
        assert!(cond(PredicateKind::Near, &["a"], Some("b"), None).check().is_err());
        assert!(cond(PredicateKind::CountIn, &["a"], Some("b"), Some(1.5)).check().is_err());
        assert!(cond(PredicateKind::Lifted, &["a"], Some("b"), None).check().is_err());
        assert!(cond(PredicateKind::Inside, &["a", "b"], Some("c"), None).check().is_err());
        assert!(cond(PredicateKind::CountIn, &["a", "b"], Some("c"), Some(2.0)).check().is_ok());
    }

    /// Independent containment oracle: face half-spaces from the reference's
    /// eight world-space corners; top from the highest corner.
    fn inside_oracle(sc: Vec3, s_dims: Vec3, s_q: Quat, rc: Vec3, r_dims: Vec3, r_q: Quat) -> (bool, f64) {
        let corners = |c: Vec3, d: Vec3, q: Quat| -> Vec<Vec3> {
            let mut out = Vec::new();
            for sx in [-0.5, 0.5] {
                for sy in [-0.5, 0.5] {
                    for sz in [-0.5, 0.5] {
                        out.push(c + q.rotate(Vec3::new(sx * d.x, sy * d.y, sz * d.z)));
                    }
                }
            }
            out
        };
        let rc8 = corners(rc, r_dims, r_q);
        let top = |pts: &[Vec3]| pts.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
        // Slab distances along each box edge direction, measured from corner 0.
        let edges = [(rc8[0], rc8[4]), (rc8[0], rc8[2]), (rc8[0], rc8[1])];
        let mut margin = f64::INFINITY;
        let mut within = true;
        for (a, b) in edges {
            let axis = b - a;
            let len = axis.norm();
            let t = (sc - a).dot(axis) / len;
            within &= t > 0.0 && t < len;
            margin = margin.min(t.abs()).min((len - t).abs());
        }
        let s_top = top(&corners(sc, s_dims, s_q));
        let ok = within && s_top <= top(&rc8);
        (ok, margin.min((top(&rc8) - s_top).abs()))
    }

    proptest! {
        #[test]
        fn inside_agrees_with_corner_oracle(
            sx in 0.3..0.7f64, sy in -0.2..0.2f64, sz in 0.0..0.3f64, syaw in -3.0..3.0f64, stilt in -0.5..0.5f64,
            rx in 0.3..0.7f64, ry in -0.2..0.2f64, rz in 0.05..0.2f64, ryaw in -3.0..3.0f64,
            sd in (0.02..0.1f64, 0.02..0.1f64, 0.02..0.1f64), rd in (0.1..0.4f64, 0.1..0.4f64, 0.1..0.3f64),
        ) {
            let s_q = Quat::from_yaw(syaw) * Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), stilt);
            let r_q = Quat::from_yaw(ryaw);
            let s_dims = Vec3::new(sd.0, sd.1, sd.2);
            let r_dims = Vec3::new(rd.0, rd.1, rd.2);
            let c = EvalContext {
                dims: [("s".to_string(), s_dims), ("r".to_string(), r_dims)].into_iter().collect(),
                rest_z: BTreeMap::new(),
                table: TableBounds::default(),
            };
            let mut st = SceneState::default();
            st.poses.insert("s".into(), Pose::new(Vec3::new(sx, sy, sz), s_q).unwrap());
            st.poses.insert("r".into(), Pose::new(Vec3::new(rx, ry, rz), r_q).unwrap());
            let got = eval_condition(&cond(PredicateKind::Inside, &["s"], Some("r"), None), &st, &c).unwrap();
            let (want, band) = inside_oracle(Vec3::new(sx, sy, sz), s_dims, st.poses["s"].orientation(), Vec3::new(rx, ry, rz), r_dims, r_q);
            prop_assert!(got == want || band < 0.002);
        }

        #[test]
        fn spatial_relations_exclusive(dx in -0.5..0.5f64, dy in -0.5..0.5f64) {
            let c = ctx(&[("a", [0.05; 3]), ("b", [0.05; 3])]);
            let s = state(&[("a", [0.5 + dx, dy, 0.025], 0.0), ("b", [0.5, 0.0, 0.025], 0.0)]);
            let held = [PredicateKind::LeftOf, PredicateKind::RightOf, PredicateKind::InFrontOf, PredicateKind::Behind]
                .into_iter()
                .filter(|&p| eval_condition(&cond(p, &["a"], Some("b"), None), &s, &c).unwrap())
                .count();
            prop_assert!(held <= 1);
            if dx.abs().max(dy.abs()) > 0.02 {
                prop_assert_eq!(held, 1);
            }
        }
    }
}
