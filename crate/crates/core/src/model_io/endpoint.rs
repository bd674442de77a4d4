use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatMessage, EndpointError, ImageRef};
use crate::actions::{Coordinate, Platform};

/// Sampling parameters sent with every planner request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_context: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.0,
            top_p: 1.0,
            max_context: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrounderRequest {
    pub element_description: String,
    pub screenshot: ImageRef,
    pub platform: Platform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrounderResponse {
    pub coord: Coordinate,
}

pub trait PlannerClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, EndpointError>;
}

pub trait GrounderClient: Send + Sync {
    fn ground(&self, req: &GrounderRequest) -> Result<GrounderResponse, EndpointError>;
}

macro_rules! forward_clients {
    ($($ptr:ty),*) => {$(
        impl<T: PlannerClient + ?Sized> PlannerClient for $ptr {
            fn complete(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, EndpointError> {
                (**self).complete(messages, params)
            }
        }
        impl<T: GrounderClient + ?Sized> GrounderClient for $ptr {
            fn ground(&self, req: &GrounderRequest) -> Result<GrounderResponse, EndpointError> {
                (**self).ground(req)
            }
        }
    )*};
}
forward_clients!(&T, Box<T>, Arc<T>);

/// Bounded exponential backoff. Only `EndpointUnavailable` is retried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_attempts: 1,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }

    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T, EndpointError>) -> Result<T, EndpointError> {
        let attempts = self.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match f() {
                Ok(v) => return Ok(v),
                Err(EndpointError::EndpointUnavailable { reason, .. }) => last = reason,
                Err(e) => return Err(e),
            }
            if attempt < attempts {
                std::thread::sleep(self.delay(attempt));
            }
        }
        Err(EndpointError::EndpointUnavailable { attempts, reason: last })
    }
}

pub fn call_planner<P: PlannerClient + ?Sized>(
    planner: &P,
    messages: &[ChatMessage],
    params: &DecodingParams,
    retry: &RetryPolicy,
) -> Result<String, EndpointError> {
    retry.run(|| planner.complete(messages, params))
}

pub fn call_grounder<G: GrounderClient + ?Sized>(
    grounder: &G,
    req: &GrounderRequest,
    retry: &RetryPolicy,
) -> Result<GrounderResponse, EndpointError> {
    retry.run(|| grounder.ground(req))
}

/// Stable hex digest of a planner request, used to key scripted replies.
pub fn request_hash(messages: &[ChatMessage], params: &DecodingParams) -> String {
    let body = serde_json::to_vec(&(messages, params)).expect("chat messages serialize");
    hex::encode(Sha256::digest(body))
}

/// Deterministic planner: replies keyed by request hash first, then a FIFO
/// queue, then an optional fallback.
#[derive(Debug, Default)]
pub struct ScriptedPlanner {
    by_hash: HashMap<String, String>,
    queue: Mutex<VecDeque<String>>,
    fallback: Option<String>,
    calls: AtomicUsize,
}

impl ScriptedPlanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sequence<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedPlanner {
            queue: Mutex::new(replies.into_iter().map(Into::into).collect()),
            ..Self::default()
        }
    }

    pub fn with_reply(mut self, hash: impl Into<String>, text: impl Into<String>) -> Self {
        self.by_hash.insert(hash.into(), text.into());
        self
    }

    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub fn push(&self, text: impl Into<String>) {
        self.queue.lock().unwrap().push_back(text.into());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl PlannerClient for ScriptedPlanner {
    fn complete(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, EndpointError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.by_hash.is_empty() {
            if let Some(t) = self.by_hash.get(&request_hash(messages, params)) {
                return Ok(t.clone());
            }
        }
        if let Some(t) = self.queue.lock().unwrap().pop_front() {
            return Ok(t);
        }
        self.fallback.clone().ok_or_else(|| EndpointError::EndpointUnavailable {
            attempts: 1,
            reason: "scripted planner has no reply for this request".into(),
        })
    }
}

/// Planner backed by a closure; handy for instrumented tests.
pub struct FnPlanner<F>(pub F);

impl<F> PlannerClient for FnPlanner<F>
where
    F: Fn(&[ChatMessage], &DecodingParams) -> Result<String, EndpointError> + Send + Sync,
{
    fn complete(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, EndpointError> {
        (self.0)(messages, params)
    }
}

fn description_key(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Grounder returning fixed coordinates per element description
/// (case and whitespace insensitive).
#[derive(Debug, Default)]
pub struct ScriptedGrounder {
    table: HashMap<String, Coordinate>,
    fallback: Option<Coordinate>,
    calls: AtomicUsize,
}

impl ScriptedGrounder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, description: &str, coord: Coordinate) -> Self {
        self.insert(description, coord);
        self
    }

    pub fn insert(&mut self, description: &str, coord: Coordinate) {
        self.table.insert(description_key(description), coord);
    }

    pub fn with_fallback(mut self, coord: Coordinate) -> Self {
        self.fallback = Some(coord);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GrounderClient for ScriptedGrounder {
    fn ground(&self, req: &GrounderRequest) -> Result<GrounderResponse, EndpointError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.table
            .get(&description_key(&req.element_description))
            .copied()
            .or(self.fallback)
            .map(|coord| GrounderResponse { coord })
            .ok_or_else(|| {
                EndpointError::MalformedResponse(format!("no coordinate scripted for {:?}", req.element_description))
            })
    }
}

pub struct FnGrounder<F>(pub F);

impl<F> GrounderClient for FnGrounder<F>
where
    F: Fn(&GrounderRequest) -> Result<GrounderResponse, EndpointError> + Send + Sync,
{
    fn ground(&self, req: &GrounderRequest) -> Result<GrounderResponse, EndpointError> {
        (self.0)(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::{build_planner_prompt, parse_planner_output, Observation, TemplateId};

    #[test]
    fn default_decoding() {
        let d = DecodingParams::default();
        assert_eq!((d.temperature, d.top_p, d.max_context), (0.0, 1.0, 8192));
    }

    #[test]
    fn hash_keyed_reply() {
        let obs = Observation {
            screenshot: ImageRef::new("s0"),
            url: Some("http://host/gitlab".into()),
            step_index: 0,
        };
        let msgs = build_planner_prompt::<&str>("find the repo", &[], &obs, TemplateId::WebEval).unwrap();
        let params = DecodingParams::default();
        let reply = r#"Thinking. {"Element Description": "Issues tab", "Action": "click", "Value": ""}"#;
        let p = ScriptedPlanner::new().with_reply(request_hash(&msgs, &params), reply);
        let text = call_planner(&p, &msgs, &params, &RetryPolicy::none()).unwrap();
        assert_eq!(
            parse_planner_output(&text).unwrap().action.element_description,
            "Issues tab"
        );
        let other = DecodingParams {
            temperature: 0.7,
            ..params
        };
        assert!(p.complete(&msgs, &other).is_err());
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn grounder_lookup() {
        let c = Coordinate::new(0.12, 0.07).unwrap();
        let g = ScriptedGrounder::new().with("Issues tab", c);
        let req = GrounderRequest {
            element_description: "  issues   TAB ".into(),
            screenshot: ImageRef::new("s0"),
            platform: Platform::Web,
        };
        assert_eq!(call_grounder(&g, &req, &RetryPolicy::none()).unwrap().coord, c);
    }

    #[test]
    fn retry_is_bounded() {
        let n = AtomicUsize::new(0);
        let p = FnPlanner(|_: &[ChatMessage], _: &DecodingParams| {
            n.fetch_add(1, Ordering::SeqCst);
            Err(EndpointError::EndpointUnavailable {
                attempts: 1,
                reason: "refused".into(),
            })
        });
        let policy = RetryPolicy {
            max_attempts: 4,
            base_delay_ms: 1,
            max_delay_ms: 2,
        };
        let err = call_planner(&p, &[], &DecodingParams::default(), &policy).unwrap_err();
        assert_eq!(
            err,
            EndpointError::EndpointUnavailable {
                attempts: 4,
                reason: "refused".into()
            }
        );
        assert_eq!(n.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn malformed_is_not_retried() {
        let n = AtomicUsize::new(0);
        let p = FnPlanner(|_: &[ChatMessage], _: &DecodingParams| {
            n.fetch_add(1, Ordering::SeqCst);
            Err(EndpointError::MalformedResponse("no text".into()))
        });
        assert!(call_planner(&p, &[], &DecodingParams::default(), &RetryPolicy::default()).is_err());
        assert_eq!(n.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay_ms: 100,
            max_delay_ms: 1000,
        };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(3), Duration::from_millis(400));
        assert_eq!(p.delay(9), Duration::from_millis(1000));
        assert_eq!(p.delay(80), Duration::from_millis(1000));
    }
}
