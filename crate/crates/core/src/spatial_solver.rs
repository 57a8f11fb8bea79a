//! Table-level layout: turns the base-level predicates of a validated plan
//! into collision-free `(x, y, yaw)` footprints using a margin-relaxation
//! ladder, polar placement around anchors and iterative push-apart with
//! random perturbation when progress stalls.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{obb_overlap, Obb, TableBounds, Vec3};
use crate::scene_model::{Catalog, Predicate, ScenePlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub base_margin: f64,
    pub margin_ladder: Vec<f64>,
    pub k_max: usize,
    pub stall_window: usize,
    pub perturb_sigma: f64,
    pub rng_seed: u64,
    /// Upper bound on passes that pull cluster members back toward anchors.
    pub relative_passes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            base_margin: 0.01,
            margin_ladder: vec![1.0, 1.25, 1.5, 2.0],
            k_max: 200,
            stall_window: 10,
            perturb_sigma: 0.03,
            rng_seed: 0,
            relative_passes: 20,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { rng_seed: seed, ..Self::default() }
    }

    pub fn check(&self) -> Result<(), SpatialError> {
        let ladder_ok = self.margin_ladder.first() == Some(&1.0)
            && self.margin_ladder.windows(2).all(|w| w[0] < w[1]);
        if !ladder_ok {
            return Err(SpatialError::InvalidInput(format!(
                "margin ladder must start at 1.0 and increase strictly, got {:?}",
                self.margin_ladder
            )));
        }
        if !(self.base_margin >= 0.0) || !(self.perturb_sigma >= 0.0) || self.k_max == 0 || self.stall_window == 0 {
            return Err(SpatialError::InvalidInput("invalid solver parameters".into()));
        }
        Ok(())
    }

    pub fn margins(&self) -> Vec<f64> {
        self.margin_ladder.iter().map(|m| m * self.base_margin).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub x: f64,
    pub y: f64,
    /// Radians.
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Layout2D {
    pub entries: Vec<LayoutEntry>,
}

impl Layout2D {
    pub fn get(&self, name: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub rung: usize,
    pub iteration: usize,
    pub collisions: usize,
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub layout: Layout2D,
    /// Margin (meters) at which the layout is collision-free.
    pub margin: f64,
    /// Index into the margin ladder.
    pub rung: usize,
    /// Distance each base object moved from its initial position in the successful rung.
    pub displacements: Vec<(String, f64)>,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveFailure {
    pub margin: f64,
    pub residual: Vec<(String, String)>,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("layout failed at margin {:.3} m with {} residual collisions", .0.margin, .0.residual.len())]
    Failure(SolveFailure),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Footprint of a base object during solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Full footprint size along the body's local x and y.
    pub size: [f64; 2],
}

impl Body {
    pub fn obb(&self) -> Obb {
        let size = Vec3::new(self.size[0], self.size[1], 1.0);
        Obb::from_dims(Vec3::new(self.x, self.y, 0.5), size, self.yaw).expect("positive footprint")
    }

    fn clamp(&mut self, bounds: &TableBounds) {
        let half = self.obb().footprint_aabb_half();
        [self.x, self.y] = bounds.clamp_center(self.x, self.y, half);
    }
}

/// Unordered index pairs whose footprints overlap at `margin`, in `(i, j)` order with `i < j`.
pub fn find_collisions_in(bodies: &[Body], margin: f64) -> Vec<(usize, usize)> {
    let obbs: Vec<Obb> = bodies.iter().map(Body::obb).collect();
    let mut pairs = Vec::new();
    for i in 0..obbs.len() {
        for j in i + 1..obbs.len() {
            if obb_overlap(&obbs[i], &obbs[j], margin) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Named pairs of overlapping footprints. `footprints` maps names to full
/// dims; only x and y are used.
pub fn find_collisions(layout: &Layout2D, footprints: &BTreeMap<String, Vec3>, margin: f64) -> Vec<(String, String)> {
    let bodies: Vec<Body> = layout
        .entries
        .iter()
        .map(|e| {
            let d = footprints[&e.name];
            Body { x: e.x, y: e.y, yaw: e.yaw, size: [d.x, d.y] }
        })
        .collect();
    find_collisions_in(&bodies, margin)
        .into_iter()
        .map(|(i, j)| (layout.entries[i].name.clone(), layout.entries[j].name.clone()))
        .collect()
}

/// Spreads `n` points on a circle of `radius` around `anchor` at angles
/// `2πj/n` plus a uniform jitter of at most `π/(4n)`, clamped to the table.
pub fn polar_place<R: Rng>(n: usize, anchor: [f64; 2], radius: f64, bounds: &TableBounds, rng: &mut R) -> Vec<[f64; 2]> {
    let jitter = PI / (4.0 * n.max(1) as f64);
    (0..n)
        .map(|j| {
            let theta = TAU * j as f64 / n as f64 + rng.gen_range(-jitter..=jitter);
            let x = anchor[0] + radius * theta.cos();
            let y = anchor[1] + radius * theta.sin();
            [x.clamp(bounds.x_min, bounds.x_max), y.clamp(bounds.y_min, bounds.y_max)]
        })
        .collect()
}

/// Pushes an overlapping pair apart along the center-to-center line, each by
/// half the penetration depth plus a quarter margin, then clamps both to the
/// table. Coincident centers separate along a random direction.
pub fn resolve_overlap<R: Rng>(a: &mut Body, b: &mut Body, margin: f64, bounds: &TableBounds, rng: &mut R) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = (dx * dx + dy * dy).sqrt();
    let dir = if len > 1e-12 {
        [dx / len, dy / len]
    } else {
        let t: f64 = rng.gen_range(0.0..TAU);
        [t.cos(), t.sin()]
    };
    let oa = a.obb().inflated(margin / 2.0);
    let ob = b.obb().inflated(margin / 2.0);
    let pen = oa.penetration_along(&ob, dir).max(0.0);
    let step = pen / 2.0 + margin / 4.0;
    a.x -= dir[0] * step;
    a.y -= dir[1] * step;
    b.x += dir[0] * step;
    b.y += dir[1] * step;
    a.clamp(bounds);
    b.clamp(bounds);
}

#[derive(Debug, Clone)]
enum BaseRole {
    Fixed { x: f64, y: f64, yaw: f64 },
    Loose,
}

struct Problem {
    names: Vec<String>,
    sizes: Vec<[f64; 2]>,
    roles: Vec<BaseRole>,
    /// (anchor position source, member indices, radius)
    clusters: Vec<(String, Vec<usize>, f64)>,
    /// dependent -> holder, for anchors that are not themselves on the table.
    holders: BTreeMap<String, String>,
}

impl Problem {
    fn build(plan: &ScenePlan, catalog: &Catalog, bounds: &TableBounds) -> Result<Self, SpatialError> {
        let mut holders = BTreeMap::new();
        for p in &plan.predicates {
            match p {
                Predicate::PlaceIn { objects, container } => {
                    for o in objects {
                        holders.insert(o.clone(), container.clone());
                    }
                }
                Predicate::PlaceOn { object, support, .. } => {
                    holders.insert(object.clone(), support.clone());
                }
                _ => {}
            }
        }
        let mut names = Vec::new();
        let mut sizes = Vec::new();
        for name in plan.object_names() {
            if holders.contains_key(name) {
                continue;
            }
            let entry = catalog
                .get(name)
                .ok_or_else(|| SpatialError::InvalidInput(format!("'{name}' is not in the catalog")))?;
            let (lo, hi) = (entry.dims.x.min(entry.dims.y), entry.dims.x.max(entry.dims.y));
            let (tlo, thi) = (bounds.width().min(bounds.depth()), bounds.width().max(bounds.depth()));
            if lo > tlo || hi > thi {
                return Err(SpatialError::InvalidInput(format!("'{name}' does not fit on the table")));
            }
            names.push(name.to_owned());
            sizes.push([entry.dims.x, entry.dims.y]);
        }
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut roles = vec![BaseRole::Loose; names.len()];
        let mut clusters = Vec::new();
        for p in &plan.predicates {
            match p {
                Predicate::PlaceOnBase { object, x, y, .. } => {
                    if let Some(&i) = index.get(object.as_str()) {
                        roles[i] = BaseRole::Fixed { x: *x, y: *y, yaw: p.yaw_radians().unwrap_or(0.0) };
                    }
                }
                Predicate::ClusterAround { objects, anchor, radius } => {
                    let members: Vec<usize> = objects.iter().filter_map(|o| index.get(o.as_str()).copied()).collect();
                    if !members.is_empty() {
                        clusters.push((anchor.clone(), members, *radius));
                    }
                }
                _ => {}
            }
        }
        Ok(Self { names, sizes, roles, clusters, holders })
    }

    /// Index of the table-level object carrying `name`.
    fn root_index(&self, name: &str) -> Option<usize> {
        let mut cur = name;
        for _ in 0..=self.holders.len() {
            if let Some(i) = self.names.iter().position(|n| n == cur) {
                return Some(i);
            }
            cur = self.holders.get(cur)?;
        }
        None
    }
}

/// Solves the base-level layout of a validated plan.
pub fn solve_spatial(
    plan: &ScenePlan,
    catalog: &Catalog,
    bounds: &TableBounds,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SpatialError> {
    cfg.check()?;
    bounds.check().map_err(|e| SpatialError::InvalidInput(e.to_string()))?;
    let problem = Problem::build(plan, catalog, bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut trace = Vec::new();
    let n = problem.names.len();
    let mut last_residual = Vec::new();
    let margins = cfg.margins();

    for (rung, &margin) in margins.iter().enumerate() {
        // Phase 1: initial positions.
        let mut bodies: Vec<Body> = problem
            .sizes
            .iter()
            .map(|&size| Body {
                x: rng.gen_range(bounds.x_min..=bounds.x_max),
                y: rng.gen_range(bounds.y_min..=bounds.y_max),
                yaw: 0.0,
                size,
            })
            .collect();
        for (i, role) in problem.roles.iter().enumerate() {
            if let BaseRole::Fixed { x, y, yaw } = *role {
                bodies[i].x = x;
                bodies[i].y = y;
                bodies[i].yaw = yaw;
            }
        }
        for (anchor, members, radius) in &problem.clusters {
            let center = match problem.root_index(anchor) {
                Some(a) => [bodies[a].x, bodies[a].y],
                None => bounds.center(),
            };
            let points = polar_place(members.len(), center, *radius, bounds, &mut rng);
            for (&m, p) in members.iter().zip(points) {
                bodies[m].x = p[0];
                bodies[m].y = p[1];
            }
        }
        // Phase 2: keep cluster members within their radius.
        for _ in 0..cfg.relative_passes {
            let mut moved = false;
            for (anchor, members, radius) in &problem.clusters {
                let Some(a) = problem.root_index(anchor) else { continue };
                let (ax, ay) = (bodies[a].x, bodies[a].y);
                for &m in members {
                    if m == a {
                        continue;
                    }
                    let (dx, dy) = (bodies[m].x - ax, bodies[m].y - ay);
                    let d = (dx * dx + dy * dy).sqrt();
                    if d > radius + 1e-9 {
                        bodies[m].x = ax + dx / d * radius;
                        bodies[m].y = ay + dy / d * radius;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        // Orientations: requested yaw for fixed objects, uniform otherwise.
        for (i, role) in problem.roles.iter().enumerate() {
            if matches!(role, BaseRole::Loose) {
                bodies[i].yaw = rng.gen_range(0.0..TAU);
            }
        }
        for b in &mut bodies {
            b.clamp(bounds);
        }
        let initial: Vec<[f64; 2]> = bodies.iter().map(|b| [b.x, b.y]).collect();

        // Phase 3: collision resolution.
        let jitter = Normal::new(0.0, cfg.perturb_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
        let mut best = usize::MAX;
        let mut since_best = 0usize;
        let mut collisions = find_collisions_in(&bodies, margin);
        for k in 1..=cfg.k_max {
            if collisions.is_empty() {
                break;
            }
            let count = collisions.len();
            if count < best {
                best = count;
                since_best = 0;
            } else {
                since_best += 1;
            }
            let perturbed = since_best >= cfg.stall_window;
            trace.push(IterationRecord { rung, iteration: k, collisions: count, perturbed });
            if perturbed {
                for b in &mut bodies {
                    b.x += jitter.sample(&mut rng);
                    b.y += jitter.sample(&mut rng);
                    b.clamp(bounds);
                }
                best = usize::MAX;
                since_best = 0;
            }
            for &(i, j) in &collisions {
                if !obb_overlap(&bodies[i].obb(), &bodies[j].obb(), margin) {
                    continue;
                }
                let (lo, hi) = bodies.split_at_mut(j);
                resolve_overlap(&mut lo[i], &mut hi[0], margin, bounds, &mut rng);
            }
            collisions = find_collisions_in(&bodies, margin);
        }
        if collisions.is_empty() {
            trace.push(IterationRecord { rung, iteration: trace_len_for(&trace, rung) + 1, collisions: 0, perturbed: false });
            let layout = Layout2D {
                entries: (0..n)
                    .map(|i| LayoutEntry { name: problem.names[i].clone(), x: bodies[i].x, y: bodies[i].y, yaw: bodies[i].yaw })
                    .collect(),
            };
            let displacements = (0..n)
                .map(|i| {
                    let d = ((bodies[i].x - initial[i][0]).powi(2) + (bodies[i].y - initial[i][1]).powi(2)).sqrt();
                    (problem.names[i].clone(), d)
                })
                .collect();
            return Ok(SolveOutcome { layout, margin, rung, displacements, trace });
        }
        last_residual = collisions
            .into_iter()
            .map(|(i, j)| (problem.names[i].clone(), problem.names[j].clone()))
            .collect();
    }
    Err(SpatialError::Failure(SolveFailure {
        margin: *margins.last().expect("non-empty ladder"),
        residual: last_residual,
        trace,
    }))
}

fn trace_len_for(trace: &[IterationRecord], rung: usize) -> usize {
    trace.iter().filter(|r| r.rung == rung).count()
}

/// Full dims keyed by name for every object in a layout.
pub fn footprints_for(layout: &Layout2D, catalog: &Catalog) -> BTreeMap<String, Vec3> {
    layout
        .entries
        .iter()
        .filter_map(|e| catalog.get(&e.name).map(|c| (e.name.clone(), c.dims)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_model::{parse_scene_plan, CatalogEntry, Category};

    fn catalog() -> Catalog {
        let mut entries = vec![
            CatalogEntry { name: "bowl".into(), dims: Vec3::new(0.16, 0.16, 0.07), category: Category::Container, description: String::new() },
            CatalogEntry { name: "mug".into(), dims: Vec3::new(0.12, 0.09, 0.1), category: Category::Container, description: String::new() },
            CatalogEntry { name: "box_a".into(), dims: Vec3::new(0.2, 0.2, 0.1), category: Category::Other, description: String::new() },
            CatalogEntry { name: "box_b".into(), dims: Vec3::new(0.2, 0.2, 0.1), category: Category::Other, description: String::new() },
        ];
        for i in 0..40 {
            entries.push(CatalogEntry {
                name: format!("crate_{i}"),
                dims: Vec3::new(0.2, 0.2, 0.2),
                category: Category::Other,
                description: String::new(),
            });
        }
        Catalog::new(entries).unwrap()
    }

    #[test]
    fn single_loose_object() {
        let plan = parse_scene_plan(r#"{"objects": [{"name": "mug"}], "predicates": [{"type": "place-anywhere", "object": "mug"}]}"#).unwrap();
        let bounds = TableBounds::default();
        let out = solve_spatial(&plan, &catalog(), &bounds, &SolverConfig::with_seed(3)).unwrap();
        assert_eq!(out.rung, 0);
        let e = out.layout.get("mug").unwrap();
        assert!(bounds.contains(e.x, e.y));
    }

    #[test]
    fn coincident_requests_are_separated() {
        let plan = parse_scene_plan(
            r#"{"objects": [{"name": "box_a"}, {"name": "box_b"}], "predicates": [
                {"type": "place-on-base", "object": "box_a", "x": 0.5, "y": 0.0, "yaw": 0},
                {"type": "place-on-base", "object": "box_b", "x": 0.5, "y": 0.0, "yaw": 0}]}"#,
        )
        .unwrap();
        let cat = catalog();
        let out = solve_spatial(&plan, &cat, &TableBounds::default(), &SolverConfig::with_seed(1)).unwrap();
        assert!(find_collisions(&out.layout, &footprints_for(&out.layout, &cat), out.margin).is_empty());
        assert!(out.displacements.iter().any(|(_, d)| *d > 0.0));
    }

    #[test]
    fn area_infeasible_plan_fails_with_residuals() {
        let objects: Vec<String> = (0..40).map(|i| format!("{{\"name\": \"crate_{i}\"}}")).collect();
        let text = format!(r#"{{"objects": [{}], "predicates": []}}"#, objects.join(","));
        let plan = parse_scene_plan(&text).unwrap();
        let bounds = TableBounds::new(0.0, 0.5, 0.0, 0.5, 0.0).unwrap();
        let cfg = SolverConfig { k_max: 40, ..SolverConfig::with_seed(5) };
        match solve_spatial(&plan, &catalog(), &bounds, &cfg) {
            Err(SpatialError::Failure(f)) => {
                assert!(!f.residual.is_empty());
                assert_eq!(f.margin, 0.02);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn polar_place_geometry() {
        let bounds = TableBounds::new(-1.0, 1.0, -1.0, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let one = polar_place(1, [0.0, 0.0], 0.12, &bounds, &mut rng);
        assert!(((one[0][0].powi(2) + one[0][1].powi(2)).sqrt() - 0.12).abs() < 1e-12);
        for _ in 0..100 {
            let pts = polar_place(4, [0.0, 0.0], 0.2, &bounds, &mut rng);
            let angles: Vec<f64> = pts.iter().map(|p| p[1].atan2(p[0])).collect();
            for i in 0..4 {
                for j in i + 1..4 {
                    let mut d = (angles[i] - angles[j]).abs() % TAU;
                    if d > PI {
                        d = TAU - d;
                    }
                    assert!(d >= PI / 2.0 - 2.0 * PI / 16.0 - 1e-12, "{d}");
                }
            }
        }
    }

    #[test]
    fn polar_place_near_edge_is_clamped() {
        let bounds = TableBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in polar_place(6, [0.84, 0.39], 0.2, &bounds, &mut rng) {
            assert!(bounds.contains(p[0], p[1]));
        }
    }

    #[test]
    fn resolve_coincident_pair() {
        let bounds = TableBounds::new(-3.0, 3.0, -3.0, 3.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = Body { x: 0.0, y: 0.0, yaw: 0.0, size: [1.0, 1.0] };
        let mut b = a;
        resolve_overlap(&mut a, &mut b, 0.01, &bounds, &mut rng);
        assert!(!obb_overlap(&a.obb(), &b.obb(), 0.01));
    }

    #[test]
    fn resolve_against_wall_reduces_penetration() {
        let bounds = TableBounds::new(0.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = Body { x: 0.1, y: 0.5, yaw: 0.0, size: [0.2, 0.2] };
        let mut b = Body { x: 0.15, y: 0.5, yaw: 0.0, size: [0.2, 0.2] };
        let before = a.obb().penetration_along(&b.obb(), [1.0, 0.0]);
        resolve_overlap(&mut a, &mut b, 0.01, &bounds, &mut rng);
        let after = a.obb().penetration_along(&b.obb(), [1.0, 0.0]);
        assert!(after < before);
        assert!(bounds.contains(a.x, a.y) && bounds.contains(b.x, b.y));
    }

    #[test]
    fn find_collisions_matches_quadratic_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let layout = Layout2D {
                entries: (0..10)
                    .map(|i| LayoutEntry {
                        name: format!("o{i}"),
                        x: rng.gen_range(0.0..0.6),
                        y: rng.gen_range(0.0..0.6),
                        yaw: rng.gen_range(-PI..PI),
                    })
                    .collect(),
            };
            let dims: BTreeMap<String, Vec3> = (0..10)
                .map(|i| (format!("o{i}"), Vec3::new(rng.gen_range(0.02..0.2), rng.gen_range(0.02..0.2), 0.1)))
                .collect();
            let got = find_collisions(&layout, &dims, 0.01);
            let mut expected = Vec::new();
            for (i, a) in layout.entries.iter().enumerate() {
                for b in &layout.entries[i + 1..] {
                    let oa = Obb::from_dims(Vec3::new(a.x, a.y, 0.0), dims[&a.name], a.yaw).unwrap();
                    let ob = Obb::from_dims(Vec3::new(b.x, b.y, 0.0), dims[&b.name], b.yaw).unwrap();
                    if obb_overlap(&oa, &ob, 0.01) {
                        expected.push((a.name.clone(), b.name.clone()));
                    }
                }
            }
            assert_eq!(got, expected);
        }
    }
}
