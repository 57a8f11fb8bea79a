use rand::Rng;
use serde::{Deserialize, Serialize};

use super::client::{strip_code_fence, ChatClient};
use super::prompts::{build_scene_prompt, with_feedback};
use super::GenError;
use crate::geometry::TableBounds;
use crate::placement::{
    assemble_scene, feedback_message, settle_and_check, FailureReport, PlacementConfig, DEFAULT_STABILITY_THRESHOLD,
};
use crate::scene_model::{parse_scene_plan, validate_plan, Catalog, Scene, ScenePlan};
use crate::spatial_solver::{solve_spatial, SolverConfig, SpatialError};

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;

/// What a generate-validate-refine loop did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub attempts: usize,
    pub max_attempts: usize,
    pub success: bool,
    /// Failure feedback per failed attempt, in order.
    pub feedback: Vec<String>,
    /// Automatic repairs and other non-fatal findings.
    #[serde(default)]
    pub notes: Vec<String>,
    /// Final plan or task as JSON.
    #[serde(default)]
    pub output: Option<serde_json::Value>,
}

impl GenReport {
    pub(crate) fn new(max_attempts: usize) -> Self {
        Self { attempts: 0, max_attempts, success: false, feedback: Vec::new(), notes: Vec::new(), output: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGenConfig {
    pub max_attempts: usize,
    pub target_count: usize,
    pub temperature: f64,
    pub solver: SolverConfig,
    pub placement: PlacementConfig,
    pub stability_threshold: f64,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            target_count: 8,
            temperature: 0.7,
            solver: SolverConfig::default(),
            placement: PlacementConfig::default(),
            stability_threshold: DEFAULT_STABILITY_THRESHOLD,
        }
    }
}

/// Turns one planner response into a checked scene, or the feedback to send
/// back.
fn realize<R: Rng>(
    response: &str,
    catalog: &Catalog,
    bounds: &TableBounds,
    cfg: &SceneGenConfig,
    notes: &mut Vec<String>,
    rng: &mut R,
) -> Result<(Scene, ScenePlan), String> {
    let raw = parse_scene_plan(strip_code_fence(response)).map_err(|e| format!("Plan is not valid: {e}"))?;
    let (plan, violations) = validate_plan(&raw, catalog, bounds);
    notes.extend(violations.iter().map(|v| format!("{}: {}", v.path, v.message)));
    if plan.objects.is_empty() {
        return Err("Plan has no objects from the catalog".into());
    }
    let solver = SolverConfig { rng_seed: rng.gen(), ..cfg.solver.clone() };
    let layout = match solve_spatial(&plan, catalog, bounds, &solver) {
        Ok(out) => out.layout,
        Err(SpatialError::Failure(f)) => {
            return Err(feedback_message(FailureReport::Solve(&f))
                .unwrap_or_else(|| format!("Layout failed at margin {:.3}m", f.margin)))
        }
        Err(SpatialError::InvalidInput(m)) => return Err(m),
    };
    let assembly = assemble_scene(&plan, catalog, &layout, bounds, &cfg.placement, rng)
        .map_err(|f| feedback_message(FailureReport::Placement(&f)).unwrap_or_else(|| f.to_string()))?;
    notes.extend(assembly.dropped.iter().map(|d| format!("'{d}' did not fit its container and was left out")));
    let report = settle_and_check(&assembly.scene, cfg.stability_threshold);
    if let Some(msg) = feedback_message(FailureReport::Stability(&report)) {
        return Err(msg);
    }
    Ok((assembly.scene, plan))
}

/// Realizes a plan without a planner in the loop. The error is the feedback
/// text the generation loop would have sent back.
pub fn scene_from_plan<R: Rng>(
    plan_text: &str,
    catalog: &Catalog,
    bounds: &TableBounds,
    cfg: &SceneGenConfig,
    rng: &mut R,
) -> Result<Scene, String> {
    realize(plan_text, catalog, bounds, cfg, &mut Vec::new(), rng).map(|(scene, _)| scene)
}

/// Prompt, parse, validate, solve, place and settle; failures are fed back
/// to the planner until a scene passes or attempts run out.
pub fn generate_scene<R: Rng>(
    theme: &str,
    catalog: &Catalog,
    bounds: &TableBounds,
    client: &ChatClient,
    cfg: &SceneGenConfig,
    rng: &mut R,
) -> Result<(Scene, GenReport), GenError> {
    if cfg.max_attempts == 0 {
        return Err(GenError::InvalidInput("max_attempts must be at least 1".into()));
    }
    let (system, base_user) = build_scene_prompt(theme, catalog, bounds, cfg.target_count, rng)?;
    let mut report = GenReport::new(cfg.max_attempts);
    let mut user = base_user.clone();
    while report.attempts < cfg.max_attempts {
        report.attempts += 1;
        let response = client.complete(&system, &user, cfg.temperature)?;
        match realize(&response, catalog, bounds, cfg, &mut report.notes, rng) {
            Ok((mut scene, plan)) => {
                report.success = true;
                report.output = serde_json::to_value(&plan).ok();
                scene.metadata.insert("theme".into(), theme.to_owned());
                scene.metadata.insert("attempts".into(), report.attempts.to_string());
                return Ok((scene, report));
            }
            Err(feedback) => {
                log::info!("scene attempt {} failed: {feedback}", report.attempts);
                user = with_feedback(&base_user, &feedback);
                report.feedback.push(feedback);
            }
        }
    }
    Err(GenError::Exhausted(Box::new(report)))
}
