use rand::Rng;

use super::{PlacementConfig, PlacementFailure, PlacementFailureKind};
use crate::geometry::{obb_overlap, top_surface_region, Obb, Pose, Vec3};
use crate::scene_model::SupportPosition;

fn symmetric<R: Rng>(rng: &mut R, half: f64) -> f64 {
    if half > 0.0 {
        rng.gen_range(-half..=half)
    } else {
        0.0
    }
}

/// Finds a spot for an object on top of `support` by rejection sampling
/// against `peers` already resting there. The object's bottom touches the
/// support's top face.
#[allow(clippy::too_many_arguments)]
pub fn place_on<R: Rng>(
    support_name: &str,
    support: &Obb,
    object_name: &str,
    dims: Vec3,
    yaw: f64,
    peers: &[Obb],
    hint: SupportPosition,
    cfg: &PlacementConfig,
    rng: &mut R,
) -> Result<Pose, PlacementFailure> {
    let face = top_surface_region(support);
    let z = support.top() + dims.z / 2.0;
    let [hx, hy] = face.half_extents;
    let inset = |h: f64| (h - cfg.face_inset.min(h / 2.0)).max(0.0);
    let (ux, uy) = (inset(hx), inset(hy));
    for _ in 0..cfg.attempts {
        let [lx, ly] = match hint {
            SupportPosition::Center => {
                [symmetric(rng, cfg.center_jitter.min(ux)), symmetric(rng, cfg.center_jitter.min(uy))]
            }
            SupportPosition::Random => [symmetric(rng, ux), symmetric(rng, uy)],
            SupportPosition::Edge => {
                let side = rng.gen_range(0..4);
                let (normal_half, normal_max, other_max) = if side < 2 { (hx, ux, uy) } else { (hy, uy, ux) };
                let lo = (normal_half * (1.0 - cfg.edge_band)).min(normal_max);
                let n = if lo < normal_max { rng.gen_range(lo..=normal_max) } else { normal_max };
                let n = if side % 2 == 0 { n } else { -n };
                let o = symmetric(rng, other_max);
                if side < 2 {
                    [n, o]
                } else {
                    [o, n]
                }
            }
        };
        let [x, y] = face.to_world(lx, ly);
        let center = Vec3::new(x, y, z);
        let candidate = Obb::from_dims(center, dims, yaw).map_err(|_| PlacementFailure {
            support: support_name.to_owned(),
            object: object_name.to_owned(),
            kind: PlacementFailureKind::NoFreeSpot { attempts: 0 },
        })?;
        if peers.iter().all(|p| !obb_overlap(&candidate, p, 0.0)) {
            return Ok(Pose::from_position_yaw(center, yaw));
        }
    }
    Err(PlacementFailure {
        support: support_name.to_owned(),
        object: object_name.to_owned(),
        kind: PlacementFailureKind::NoFreeSpot { attempts: cfg.attempts },
    })
}
