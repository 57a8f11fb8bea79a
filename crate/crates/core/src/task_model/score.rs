use super::{eval_condition, EvalContext, SceneState, Subtask, TaskError, TaskSpec};

/// Number of leading steps achieved in order over a time-ordered state
/// history: step `k` counts if it holds at some instant no earlier than the
/// instant credited to step `k - 1`.
pub fn subtask_credit(subtask: &Subtask, history: &[SceneState], ctx: &EvalContext) -> Result<usize, TaskError> {
    let mut t = 0;
    let mut credit = 0;
    'steps: for step in &subtask.steps {
        while t < history.len() {
            if eval_condition(step, &history[t], ctx)? {
                credit += 1;
                continue 'steps;
            }
            t += 1;
        }
        break;
    }
    Ok(credit)
}

/// Mean over subtasks of the fraction of ordered steps achieved. `history`
/// is time-ordered with the final state last; a single state evaluates the
/// final state alone.
pub fn graded_score(task: &TaskSpec, history: &[SceneState], ctx: &EvalContext) -> Result<f64, TaskError> {
    task.check()?;
    let mut total = 0.0;
    for s in &task.subtasks {
        total += subtask_credit(s, history, ctx)? as f64 / s.steps.len() as f64;
    }
    Ok(total / task.subtasks.len() as f64)
}

/// Every subtask fully achieved in order, with each subtask's last step
/// still holding in the final state.
pub fn success(task: &TaskSpec, history: &[SceneState], ctx: &EvalContext) -> Result<bool, TaskError> {
    task.check()?;
    let Some(last) = history.last() else { return Ok(false) };
    for s in &task.subtasks {
        if subtask_credit(s, history, ctx)? < s.steps.len() {
            return Ok(false);
        }
        if !eval_condition(s.steps.last().expect("checked non-empty"), last, ctx)? {
            return Ok(false);
        }
    }
    Ok(true)
}
