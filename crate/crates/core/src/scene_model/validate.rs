use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::catalog::Catalog;
use super::plan::{PlanObject, Predicate, ScenePlan};
use crate::geometry::TableBounds;

/// Cluster radius limits (meters).
pub const MAX_CLUSTER_RADIUS: f64 = 0.5;
pub const DEFAULT_CLUSTER_RADIUS: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Object not in the catalog; removed from the plan.
    UnknownObject,
    DuplicateObject,
    /// Referenced by a predicate but not listed; added to the object list.
    UnlistedObject,
    /// Container, support or anchor does not exist; dependent downgraded.
    MissingReference,
    /// A support or container had no `place-on-base`; one was synthesized.
    MissingBase,
    /// Object already positioned by an earlier predicate.
    ConflictingRole,
    RadiusOutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, kind: ViolationKind, message: impl Into<String>) -> Self {
        Self { path: path.into(), kind, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Base,
    Anywhere,
    In,
    On,
    Cluster,
}

struct Validator<'a> {
    catalog: &'a Catalog,
    listed: Vec<String>,
    listed_set: BTreeSet<String>,
    violations: Vec<Violation>,
}

impl Validator<'_> {
    /// Resolves a name against the object list, adding catalog objects the
    /// planner forgot to list.
    fn resolve(&mut self, name: &str, path: &str) -> bool {
        if self.listed_set.contains(name) {
            return true;
        }
        if self.catalog.contains(name) {
            self.listed.push(name.to_owned());
            self.listed_set.insert(name.to_owned());
            self.violations.push(Violation::new(
                path,
                ViolationKind::UnlistedObject,
                format!("'{name}' is used but not listed in objects; added"),
            ));
            return true;
        }
        false
    }

    fn unknown_subject(&mut self, name: &str, path: &str) {
        self.violations.push(Violation::new(
            path,
            ViolationKind::UnknownObject,
            format!("'{name}' is not in the catalog; dropped"),
        ));
    }

    fn conflict(&mut self, name: &str, path: &str) {
        self.violations.push(Violation::new(
            path,
            ViolationKind::ConflictingRole,
            format!("'{name}' is already placed by an earlier predicate; dropped"),
        ));
    }

    fn downgrade(&mut self, subject: &str, reference: &str, path: &str) -> Predicate {
        self.violations.push(Violation::new(
            path,
            ViolationKind::MissingReference,
            format!("'{reference}' does not exist; '{subject}' downgraded to place-anywhere"),
        ));
        Predicate::PlaceAnywhere { object: subject.to_owned() }
    }
}

/// Repairs a plan against the catalog. Violations are reported, never raised:
/// unknown objects are dropped, dependents of missing references are
/// downgraded to `place-anywhere`, and supports or containers lacking a
/// `place-on-base` get one synthesized at the table center.
pub fn validate_plan(plan: &ScenePlan, catalog: &Catalog, bounds: &TableBounds) -> (ScenePlan, Vec<Violation>) {
    let mut v = Validator { catalog, listed: Vec::new(), listed_set: BTreeSet::new(), violations: Vec::new() };

    for (i, obj) in plan.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        if !catalog.contains(&obj.name) {
            v.violations.push(Violation::new(
                path,
                ViolationKind::UnknownObject,
                format!("'{}' is not in the catalog; dropped", obj.name),
            ));
        } else if !v.listed_set.insert(obj.name.clone()) {
            v.violations.push(Violation::new(
                path,
                ViolationKind::DuplicateObject,
                format!("'{}' listed more than once", obj.name),
            ));
        } else {
            v.listed.push(obj.name.clone());
        }
    }

    let mut roles: BTreeMap<String, Role> = BTreeMap::new();
    let mut out: Vec<Predicate> = Vec::new();

    for (i, pred) in plan.predicates.iter().enumerate() {
        let path = format!("predicates[{i}]");
        match pred {
            Predicate::PlaceOnBase { object, .. } | Predicate::PlaceAnywhere { object } => {
                let role = if matches!(pred, Predicate::PlaceOnBase { .. }) { Role::Base } else { Role::Anywhere };
                if !v.resolve(object, &path) {
                    v.unknown_subject(object, &path);
                } else if roles.contains_key(object) {
                    v.conflict(object, &path);
                } else {
                    roles.insert(object.clone(), role);
                    out.push(pred.clone());
                }
            }
            Predicate::PlaceOn { object, support, position } => {
                let support_ok = v.resolve(support, &format!("{path}.support"));
                if !v.resolve(object, &path) {
                    v.unknown_subject(object, &path);
                } else if roles.contains_key(object) || object == support {
                    v.conflict(object, &path);
                } else if !support_ok {
                    roles.insert(object.clone(), Role::Anywhere);
                    out.push(v.downgrade(object, support, &format!("{path}.support")));
                } else {
                    roles.insert(object.clone(), Role::On);
                    out.push(Predicate::PlaceOn {
                        object: object.clone(),
                        support: support.clone(),
                        position: *position,
                    });
                }
            }
            Predicate::PlaceIn { objects, container } => {
                let reference_ok = v.resolve(container, &format!("{path}.container"));
                let kept = collect_subjects(&mut v, &mut roles, objects, container, &path);
                if kept.is_empty() {
                    continue;
                }
                if reference_ok {
                    for o in &kept {
                        roles.insert(o.clone(), Role::In);
                    }
                    out.push(Predicate::PlaceIn { objects: kept, container: container.clone() });
                } else {
                    for o in &kept {
                        roles.insert(o.clone(), Role::Anywhere);
                        out.push(v.downgrade(o, container, &format!("{path}.container")));
                    }
                }
            }
            Predicate::ClusterAround { objects, anchor, radius } => {
                let reference_ok = v.resolve(anchor, &format!("{path}.anchor"));
                let kept = collect_subjects(&mut v, &mut roles, objects, anchor, &path);
                if kept.is_empty() {
                    continue;
                }
                if reference_ok {
                    let mut r = *radius;
                    if !(r > 0.0 && r <= MAX_CLUSTER_RADIUS) {
                        r = if r > MAX_CLUSTER_RADIUS { MAX_CLUSTER_RADIUS } else { DEFAULT_CLUSTER_RADIUS };
                        v.violations.push(Violation::new(
                            format!("{path}.radius"),
                            ViolationKind::RadiusOutOfRange,
                            format!("radius {radius} outside (0, {MAX_CLUSTER_RADIUS}]; using {r}"),
                        ));
                    }
                    for o in &kept {
                        roles.insert(o.clone(), Role::Cluster);
                    }
                    out.push(Predicate::ClusterAround { objects: kept, anchor: anchor.clone(), radius: r });
                } else {
                    for o in &kept {
                        roles.insert(o.clone(), Role::Anywhere);
                        out.push(v.downgrade(o, anchor, &format!("{path}.anchor")));
                    }
                }
            }
        }
    }

    // Supports and containers must sit directly on the table.
    let [cx, cy] = bounds.center();
    let mut synthesized = Vec::new();
    loop {
        let needs_base: Vec<String> = out
            .iter()
            .filter(|p| matches!(p, Predicate::PlaceIn { .. } | Predicate::PlaceOn { .. }))
            .filter_map(|p| p.reference())
            .filter(|r| roles.get(*r) != Some(&Role::Base))
            .map(str::to_owned)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if needs_base.is_empty() {
            break;
        }
        for name in needs_base {
            remove_subject(&mut out, &name);
            roles.insert(name.clone(), Role::Base);
            v.violations.push(Violation::new(
                "predicates",
                ViolationKind::MissingBase,
                format!("'{name}' holds other objects but has no place-on-base; placed at table center"),
            ));
            synthesized.push(Predicate::PlaceOnBase { object: name, x: cx, y: cy, yaw: 0.0 });
        }
    }
    synthesized.extend(out);

    let plan = ScenePlan {
        objects: v.listed.into_iter().map(|name| PlanObject { name }).collect(),
        predicates: synthesized,
    };
    (plan, v.violations)
}

fn collect_subjects(
    v: &mut Validator<'_>,
    roles: &mut BTreeMap<String, Role>,
    objects: &[String],
    reference: &str,
    path: &str,
) -> Vec<String> {
    let mut kept: Vec<String> = Vec::new();
    for (j, o) in objects.iter().enumerate() {
        let sub = format!("{path}.objects[{j}]");
        if !v.resolve(o, &sub) {
            v.unknown_subject(o, &sub);
        } else if roles.contains_key(o) || o == reference || kept.contains(o) {
            v.conflict(o, &sub);
        } else {
            kept.push(o.clone());
        }
    }
    // Roles are claimed immediately so later subjects in the same predicate conflict.
    for o in &kept {
        roles.insert(o.clone(), Role::Anywhere);
    }
    kept
}

/// Drops `name` as a subject from every predicate, removing emptied predicates.
fn remove_subject(preds: &mut Vec<Predicate>, name: &str) {
    preds.retain_mut(|p| match p {
        Predicate::PlaceOnBase { object, .. } | Predicate::PlaceAnywhere { object } | Predicate::PlaceOn { object, .. } => {
            object != name
        }
        Predicate::PlaceIn { objects, .. } | Predicate::ClusterAround { objects, .. } => {
            objects.retain(|o| o != name);
            !objects.is_empty()
        }
    });
}
