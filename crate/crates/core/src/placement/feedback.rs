use super::{Cause, PlacementFailure, PlacementFailureKind, StabilityReport};
use crate::spatial_solver::SolveFailure;

/// Anything that can be turned into planner feedback.
#[derive(Debug, Clone, Copy)]
pub enum FailureReport<'a> {
    Stability(&'a StabilityReport),
    Solve(&'a SolveFailure),
    Placement(&'a PlacementFailure),
}

/// One line per failure, in input order. Returns `None` when the report
/// holds no failure.
pub fn feedback_message(report: FailureReport<'_>) -> Option<String> {
    let lines: Vec<String> = match report {
        FailureReport::Stability(r) => r
            .unstable
            .iter()
            .map(|u| match u.cause {
                Cause::FellOff | Cause::Toppled => format!(
                    "Object '{}' fell off '{}' with displacement {:.2}m",
                    u.object, u.support, u.displacement
                ),
                Cause::Sank => format!(
                    "Object '{}' sank into '{}' with displacement {:.2}m",
                    u.object, u.support, u.displacement
                ),
            })
            .collect(),
        FailureReport::Solve(f) => f
            .residual
            .iter()
            .map(|(a, b)| format!("Objects '{a}' and '{b}' collide at margin {:.3}m", f.margin))
            .collect(),
        FailureReport::Placement(f) => vec![match f.kind {
            PlacementFailureKind::NoFreeSpot { attempts } => {
                format!("No free spot on '{}' after {attempts} attempts", f.support)
            }
            PlacementFailureKind::FloorTooSmall => {
                format!("Container '{}' is too small to hold '{}'", f.support, f.object)
            }
            PlacementFailureKind::MissingReference => {
                format!("Object '{}' references '{}' which was not placed", f.object, f.support)
            }
        }],
    };
    (!lines.is_empty()).then(|| lines.join("\n"))
}
