//! LLM-facing generation: prompt assembly, a chat client with record and
//! replay, scene and task generation loops with feedback, and the judge.

mod client;
mod judge;
pub mod prompts;
mod scene_gen;
mod task_gen;

use thiserror::Error;

pub use client::{
    strip_code_fence, ChatBackend, ChatClient, ChatMessage, ChatRequest, HttpBackend, LlmError, LlmMode, ScriptedBackend,
    Transcript, DEFAULT_ENDPOINT, DEFAULT_MAX_IN_FLIGHT, DEFAULT_MODEL, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
pub use judge::{
    coverage, judge_task, parse_judge_response, summarize_judgements, Coverage, JudgeScores, JudgeSummary, JudgeWeights,
    Verdict, JUDGE_TEMPERATURE,
};
pub use prompts::{build_judge_prompt, build_scene_prompt, build_task_prompt, PROMPT_VERSION, RETRY_HEADER};
pub use scene_gen::{generate_scene, scene_from_plan, GenReport, SceneGenConfig, DEFAULT_MAX_ATTEMPTS};
pub use task_gen::{
    generate_task, validate_task, validate_task_json, TaskGenConfig, TaskRequest, TaskRules, TaskViolation,
    TaskViolationKind, DEFAULT_CLEARANCE,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("gave up after {} attempts", .0.attempts)]
    Exhausted(Box<GenReport>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("judge failed: {0}")]
    Judge(String),
}
