use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use gainpdf::io::to_json_string;

use crate::api::ErrorBody;
use crate::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Match,
    Landscape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

/// What `GET /jobs/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    /// HTTP status the failure would have had as a synchronous call.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_status: Option<u16>,
}

#[derive(Default)]
pub(crate) struct Jobs {
    next: AtomicU64,
    table: Mutex<HashMap<String, JobView>>,
}

impl Jobs {
    fn update(&self, id: &str, f: impl FnOnce(&mut JobView)) {
        if let Some(j) = self.table.lock().expect("job lock").get_mut(id) {
            f(j);
        }
    }

    /// Queues `work` on the blocking pool and returns the job id at once.
    pub fn spawn<P, E, F>(self: &std::sync::Arc<Self>, kind: JobKind, work: F) -> String
    where
        P: Serialize,
        E: Into<ApiError>,
        F: FnOnce() -> Result<P, E> + Send + 'static,
    {
        let n = self.next.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("job{n}");
        self.table.lock().expect("job lock").insert(
            id.clone(),
            JobView {
                job_id: id.clone(),
                kind,
                status: JobStatus::Queued,
                result: None,
                error: None,
                error_status: None,
            },
        );
        let jobs = self.clone();
        let job_id = id.clone();
        tokio::task::spawn_blocking(move || {
            jobs.update(&job_id, |j| j.status = JobStatus::Running);
            // Round trip through the artifact formatter; parsing is exact.
            let outcome = work()
                .map_err(Into::into)
                .and_then(|p| {
                    to_json_string(&p)
                        .and_then(|s| Ok(serde_json::from_str::<Value>(&s)?))
                        .map_err(ApiError::from)
                });
            jobs.update(&job_id, |j| match outcome {
                Ok(v) => {
                    j.status = JobStatus::Done;
                    j.result = Some(v);
                }
                Err(e) => {
                    j.status = JobStatus::Failed;
                    j.error_status = Some(e.status.as_u16());
                    j.error = Some(e.body);
                }
            });
        });
        id
    }

    pub fn view(&self, id: &str) -> Result<JobView, ApiError> {
        self.table
            .lock()
            .expect("job lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }
}
