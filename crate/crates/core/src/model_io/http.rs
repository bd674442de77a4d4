//! JSON-over-HTTP planner and grounder clients.
//!
//! Planner wire format: `POST {messages, temperature, top_p, max_tokens}`
//! answered by `{text}`. Grounder: `POST {element_description,
//! image_base64 | image_ref, platform}` answered by `{x, y}`. Images whose
//! `path` is readable are inlined as base64; otherwise only the key is sent.

use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    ChatMessage, ContentPart, DecodingParams, EndpointError, GrounderClient, GrounderRequest, GrounderResponse,
    ImageRef, PlannerClient, RetryPolicy,
};
use crate::actions::Coordinate;

pub const PLANNER_URL_ENV: &str = "GUIAGENT_PLANNER_URL";
pub const GROUNDER_URL_ENV: &str = "GUIAGENT_GROUNDER_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub planner_url: Option<String>,
    pub grounder_url: Option<String>,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    /// Directory that relative image paths are resolved against.
    pub image_root: Option<PathBuf>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            planner_url: None,
            grounder_url: None,
            timeout_ms: 60_000,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            image_root: None,
        }
    }
}

impl EndpointConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    /// Fills unset URLs from the environment.
    pub fn with_env(mut self) -> Self {
        if self.planner_url.is_none() {
            self.planner_url = std::env::var(PLANNER_URL_ENV).ok();
        }
        if self.grounder_url.is_none() {
            self.grounder_url = std::env::var(GROUNDER_URL_ENV).ok();
        }
        self
    }

    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(self.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into()
    }
}

/// Counting semaphore bounding concurrent requests per endpoint.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        InFlight {
            limit: limit.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().unwrap();
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

fn image_json(img: &ImageRef, root: Option<&Path>) -> Value {
    let bytes = img.path.as_ref().and_then(|p| {
        let p = Path::new(p);
        let full = match root {
            Some(r) if p.is_relative() => r.join(p),
            _ => p.to_path_buf(),
        };
        std::fs::read(full).ok()
    });
    match bytes {
        Some(b) => json!({ "image_base64": base64::engine::general_purpose::STANDARD.encode(b) }),
        None => json!({ "image_ref": img.key }),
    }
}

fn transport_error(e: ureq::Error) -> EndpointError {
    EndpointError::EndpointUnavailable {
        attempts: 1,
        reason: e.to_string(),
    }
}

fn post_json(agent: &ureq::Agent, url: &str, body: &Value) -> Result<Value, EndpointError> {
    let mut resp = agent.post(url).send_json(body).map_err(transport_error)?;
    let status = resp.status().as_u16();
    if status >= 500 || status == 429 {
        return Err(EndpointError::EndpointUnavailable {
            attempts: 1,
            reason: format!("http status {status}"),
        });
    }
    if status >= 400 {
        return Err(EndpointError::MalformedResponse(format!("http status {status}")));
    }
    resp.body_mut()
        .read_json::<Value>()
        .map_err(|e| EndpointError::MalformedResponse(e.to_string()))
}

pub struct HttpPlanner {
    url: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    in_flight: InFlight,
    image_root: Option<PathBuf>,
}

impl HttpPlanner {
    pub fn new(url: impl Into<String>, cfg: &EndpointConfig) -> Self {
        HttpPlanner {
            url: url.into(),
            agent: cfg.agent(),
            retry: cfg.retry,
            in_flight: InFlight::new(cfg.max_in_flight),
            image_root: cfg.image_root.clone(),
        }
    }

    pub fn from_config(cfg: &EndpointConfig) -> Option<Self> {
        cfg.planner_url.as_deref().map(|u| Self::new(u, cfg))
    }

    fn body(&self, messages: &[ChatMessage], params: &DecodingParams) -> Value {
        let messages: Vec<Value> = messages
            .iter()
            .map(|m| {
                let parts: Vec<Value> = m
                    .content
                    .iter()
                    .map(|p| match p {
                        ContentPart::Text { text } => json!({ "type": "text", "text": text }),
                        ContentPart::Image { image } => {
                            let mut v = image_json(image, self.image_root.as_deref());
                            v["type"] = json!("image");
                            v
                        }
                    })
                    .collect();
                json!({ "role": m.role, "content": parts })
            })
            .collect();
        json!({
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_context,
        })
    }
}

impl PlannerClient for HttpPlanner {
    /// Retries transport failures per the configured policy.
    fn complete(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, EndpointError> {
        let body = self.body(messages, params);
        self.retry.run(|| {
            let _slot = self.in_flight.acquire();
            let v = post_json(&self.agent, &self.url, &body)?;
            v.get("text")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| EndpointError::MalformedResponse("missing `text`".into()))
        })
    }
}

pub struct HttpGrounder {
    url: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    in_flight: InFlight,
    image_root: Option<PathBuf>,
}

impl HttpGrounder {
    pub fn new(url: impl Into<String>, cfg: &EndpointConfig) -> Self {
        HttpGrounder {
            url: url.into(),
            agent: cfg.agent(),
            retry: cfg.retry,
            in_flight: InFlight::new(cfg.max_in_flight),
            image_root: cfg.image_root.clone(),
        }
    }

    pub fn from_config(cfg: &EndpointConfig) -> Option<Self> {
        cfg.grounder_url.as_deref().map(|u| Self::new(u, cfg))
    }
}

#[derive(Deserialize)]
struct XY {
    x: f64,
    y: f64,
}

impl GrounderClient for HttpGrounder {
    fn ground(&self, req: &GrounderRequest) -> Result<GrounderResponse, EndpointError> {
        let mut body = image_json(&req.screenshot, self.image_root.as_deref());
        body["element_description"] = json!(req.element_description);
        body["platform"] = json!(req.platform);
        self.retry.run(|| {
            let _slot = self.in_flight.acquire();
            let v = post_json(&self.agent, &self.url, &body)?;
            let xy: XY = serde_json::from_value(v).map_err(|e| EndpointError::MalformedResponse(e.to_string()))?;
            let coord = Coordinate::new(xy.x, xy.y).map_err(|e| EndpointError::MalformedResponse(e.to_string()))?;
            Ok(GrounderResponse { coord })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn fast_cfg(attempts: u32) -> EndpointConfig {
        EndpointConfig {
            timeout_ms: 2_000,
            retry: RetryPolicy {
                max_attempts: attempts,
                base_delay_ms: 1,
                max_delay_ms: 5,
            },
            ..EndpointConfig::default()
        }
    }

    /// Serves `responses.len()` requests with canned JSON bodies, returning request bodies.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut s, _) = listener.accept().unwrap();
                let mut r = BufReader::new(s.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    r.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                r.read_exact(&mut buf).unwrap();
                seen.push(String::from_utf8(buf).unwrap());
                write!(
                    s,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (url, h)
    }

    #[test]
    fn planner_round_trip_with_retry() {
        let (url, h) = serve(vec![(503, "{}".into()), (200, r#"{"text":"hello"}"#.into())]);
        let p = HttpPlanner::new(url, &fast_cfg(3));
        let msgs = vec![ChatMessage::user_text("hi")];
        assert_eq!(p.complete(&msgs, &DecodingParams::default()).unwrap(), "hello");
        let seen = h.join().unwrap();
        let body: Value = serde_json::from_str(&seen[1]).unwrap();
        assert_eq!(body["max_tokens"], 8192);
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["content"][0]["text"], "hi");
    }

    #[test]
    fn grounder_round_trip() {
        let (url, h) = serve(vec![(200, r#"{"x":0.12,"y":0.07}"#.into())]);
        let g = HttpGrounder::new(url, &fast_cfg(1));
        let req = GrounderRequest {
            element_description: "Issues tab".into(),
            screenshot: ImageRef::new("home"),
            platform: crate::actions::Platform::Web,
        };
        let c = g.ground(&req).unwrap().coord;
        assert_eq!((c.x(), c.y()), (0.12, 0.07));
        let body: Value = serde_json::from_str(&h.join().unwrap()[0]).unwrap();
        assert_eq!(body["image_ref"], "home");
        assert_eq!(body["platform"], "web");
    }

    #[test]
    fn out_of_range_coordinate_is_malformed() {
        let (url, h) = serve(vec![(200, r#"{"x":1.5,"y":0.07}"#.into())]);
        let g = HttpGrounder::new(url, &fast_cfg(3));
        let req = GrounderRequest {
            element_description: "x".into(),
            screenshot: ImageRef::new("k"),
            platform: crate::actions::Platform::Web,
        };
        assert!(matches!(g.ground(&req), Err(EndpointError::MalformedResponse(_))));
        h.join().unwrap();
    }

    #[test]
    fn unreachable_endpoint() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let p = HttpPlanner::new(format!("http://127.0.0.1:{port}/v1"), &fast_cfg(3));
        let err = p.complete(&[], &DecodingParams::default()).unwrap_err();
        assert!(matches!(err, EndpointError::EndpointUnavailable { attempts: 3, .. }));
    }

    #[test]
    fn config_from_toml() {
        let cfg = EndpointConfig::from_toml_str(
            "planner_url = \"http://p\"\nmax_in_flight = 2\n[retry]\nmax_attempts = 5\nbase_delay_ms = 10\nmax_delay_ms = 100\n",
        )
        .unwrap();
        assert_eq!(cfg.planner_url.as_deref(), Some("http://p"));
        assert_eq!(cfg.retry.max_attempts, 5);
        assert_eq!(cfg.timeout_ms, 60_000);
    }
}
