//! Zero-shot language-model bridge: prompt construction, numeric answer
//! parsing, and a disk-backed response cache.
//!
//! Every experiment can run fully offline against [`MockTransport`]; talking
//! to real providers is opt-in behind the `live-llm` cargo feature. Either
//! way, responses land in an [`LlmCache`] so hybrid training is deterministic
//! and re-runs never repeat a network call.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::FeatureVector;

/// Default prompt body shipped with the crate; also available on disk as an
/// editable asset (`assets/prompt_template.txt`).
const DEFAULT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");

/// Placeholder that the per-meal input block replaces.
pub const INPUT_SLOT: &str = "{{input}}";
/// Optional placeholder replaced by a description of the predicted quantity.
pub const TARGET_SLOT: &str = "{{target}}";

/// Upper bound on a plausible prediction; values beyond it are rejected.
pub const MAX_PLAUSIBLE: f64 = 200_000.0;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("template must contain {INPUT_SLOT} exactly once, found {found}")]
    InputSlotCount { found: usize },
    #[error("no numeric token in the response")]
    NoNumberFound,
    #[error("parsed value {value} is outside [0, {MAX_PLAUSIBLE}]")]
    ImplausibleValue { value: f64 },
    #[error("provider {provider_id} answered but declined to give a number")]
    RefusedPrediction { provider_id: String },
    #[error("provider {provider_id} unreachable after {attempts} attempts")]
    Timeout { provider_id: String, attempts: u32 },
    #[error("provider {provider_id} rejected the credential")]
    AuthFailure { provider_id: String },
    #[error("credential env var {env_var} is not set")]
    MissingCredential { env_var: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache file is not valid JSON: {0}")]
    CacheFormat(#[from] serde_json::Error),
}

/// The quantity a prompt asks the model to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionTarget {
    Auc,
    MaxBgl,
}

impl PredictionTarget {
    /// Phrase substituted for the target placeholder.
    pub fn description(self) -> &'static str {
        match self {
            PredictionTarget::Auc => {
                "area under the postprandial blood glucose curve over the \
                 three hours after lunch, in mg/dL-min"
            }
            PredictionTarget::MaxBgl => {
                "maximum blood glucose level reached in the three hours \
                 after lunch, in mg/dL"
            }
        }
    }
}

/// A prompt body with a single input slot; rendering is pure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    body: String,
}

impl PromptTemplate {
    /// The template shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            body: DEFAULT_TEMPLATE.to_string(),
        }
    }

    /// Wrap a custom body; it must contain the input slot exactly once.
    pub fn new(body: String) -> Result<Self, LlmError> {
        let found = body.matches(INPUT_SLOT).count();
        if found != 1 {
            return Err(LlmError::InputSlotCount { found });
        }
        Ok(Self { body })
    }

    /// Load an edited template from disk.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Self::new(std::fs::read_to_string(path)?)
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Render the full prompt for one feature vector.
///
/// The input slot is filled with `name: value` lines in canonical feature
/// order, values printed with two decimal places. The rendered text contains
/// each canonical feature name exactly once — the fixed body deliberately
/// paraphrases the features instead of naming them.
pub fn build_prompt(
    template: &PromptTemplate,
    features: &FeatureVector,
    target: PredictionTarget,
) -> String {
    let input_block = features
        .names()
        .iter()
        .zip(&features.values)
        .map(|(name, value)| format!("{name}: {value:.2}"))
        .collect::<Vec<_>>()
        .join("\n");
    template
        .body
        .replace(TARGET_SLOT, target.description())
        .replace(INPUT_SLOT, &input_block)
}

/// One numeric answer from one provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmPrediction {
    pub provider_id: String,
    /// Predicted quantity, mg/dL-min for area targets.
    pub value: f64,
    pub raw_response: String,
    /// Whether this came from the cache rather than a fresh call.
    pub cached: bool,
}

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?").expect("valid literal pattern")
    })
}

/// Extract the numeric prediction from free-form model output.
///
/// Looks for the first number (optionally comma-grouped) after the last
/// occurrence of any of the markers `prediction`, `auc`, `answer`
/// (case-insensitive); falls back to the first number anywhere. Values
/// outside `[0, MAX_PLAUSIBLE]` are rejected.
pub fn parse_prediction(raw: &str) -> Result<f64, LlmError> {
    let lower = raw.to_lowercase();
    let after_marker = ["prediction", "auc", "answer"]
        .iter()
        .filter_map(|marker| lower.rfind(marker).map(|pos| pos + marker.len()))
        .max();
    let token = after_marker
        .and_then(|start| number_pattern().find(&lower[start..]))
        .or_else(|| number_pattern().find(&lower))
        .ok_or(LlmError::NoNumberFound)?;
    let value: f64 = token
        .as_str()
        .replace(',', "")
        .parse()
        .expect("pattern only matches valid floats");
    if !(0.0..=MAX_PLAUSIBLE).contains(&value) {
        return Err(LlmError::ImplausibleValue { value });
    }
    Ok(value)
}

/// Declarative description of one provider; adding a provider is pure config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Stable id used in cache keys and feature column names.
    pub id: String,
    pub display_name: String,
    pub endpoint: String,
    pub model: String,
    /// Env var holding the API key, only consulted for live calls.
    pub credential_env: String,
}

/// Conventional credential variable for a provider id.
pub fn credential_env_var(provider_id: &str) -> String {
    format!("GLUCOLENS_LLM_{}_KEY", provider_id.to_uppercase())
}

fn provider(id: &str, display_name: &str, endpoint: &str, model: &str) -> ProviderConfig {
    ProviderConfig {
        id: id.to_string(),
        display_name: display_name.to_string(),
        endpoint: endpoint.to_string(),
        model: model.to_string(),
        credential_env: credential_env_var(id),
    }
}

/// The six providers scored by the pipeline. A seventh (Mistral Large)
/// declined to produce numbers at all, so it ships disabled: refusals
/// surface as errors rather than silently dropping rows.
pub fn default_providers() -> Vec<ProviderConfig> {
    vec![
        provider(
            "gpt35_turbo",
            "GPT-3.5-Turbo",
            "https://api.openai.com/v1/chat/completions",
            "gpt-3.5-turbo",
        ),
        provider(
            "gpt4",
            "GPT-4",
            "https://api.openai.com/v1/chat/completions",
            "gpt-4",
        ),
        provider(
            "claude_opus4",
            "Claude Opus 4",
            "https://api.anthropic.com/v1/messages",
            "claude-opus-4-20250514",
        ),
        provider(
            "deepseek_v3",
            "Deepseek V3",
            "https://api.deepseek.com/chat/completions",
            "deepseek-chat",
        ),
        provider(
            "gemini_flash2",
            "Gemini Flash 2.0",
            "https://generativelanguage.googleapis.com/v1beta/models",
            "gemini-2.0-flash-001",
        ),
        provider(
            "grok3",
            "Grok 3",
            "https://api.x.ai/v1/chat/completions",
            "grok-3",
        ),
    ]
}

/// Transport-level failure; retry policy lives in the client.
#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("credential rejected")]
    AuthFailure,
    #[error("service error: {detail}")]
    Service { detail: String },
}

/// Anything that can deliver a prompt and return the provider's text.
pub trait Transport {
    fn send(&mut self, config: &ProviderConfig, prompt: &str) -> Result<String, TransportError>;
}

/// Scripted stand-in used by every offline experiment and test.
///
/// Replies are consumed in order; the final entry repeats once the script is
/// exhausted, so a one-entry script behaves like a fixed responder.
#[derive(Debug, Clone)]
pub struct MockTransport {
    script: Vec<MockReply>,
    cursor: usize,
    /// Number of send calls observed, for asserting retry behavior.
    pub calls: u32,
}

#[derive(Debug, Clone)]
pub enum MockReply {
    Text(String),
    Timeout,
    AuthFailure,
}

impl MockTransport {
    pub fn script(script: Vec<MockReply>) -> Self {
        assert!(!script.is_empty(), "mock script cannot be empty");
        Self {
            script,
            cursor: 0,
            calls: 0,
        }
    }

    /// Always replies with the same text.
    pub fn always(text: &str) -> Self {
        Self::script(vec![MockReply::Text(text.to_string())])
    }
}

impl Transport for MockTransport {
    fn send(&mut self, _config: &ProviderConfig, _prompt: &str) -> Result<String, TransportError> {
        self.calls += 1;
        let reply = &self.script[self.cursor.min(self.script.len() - 1)];
        self.cursor += 1;
        match reply {
            MockReply::Text(text) => Ok(text.clone()),
            MockReply::Timeout => Err(TransportError::Timeout),
            MockReply::AuthFailure => Err(TransportError::AuthFailure),
        }
    }
}

/// A provider plus its transport, retry, and rate-limit policy.
pub struct LlmClient<T: Transport> {
    config: ProviderConfig,
    transport: T,
    max_retries: u32,
    backoff: Duration,
    min_interval: Duration,
    last_send: Option<Instant>,
}

impl<T: Transport> LlmClient<T> {
    pub fn new(config: ProviderConfig, transport: T) -> Self {
        Self {
            config,
            transport,
            max_retries: 3,
            backoff: Duration::from_millis(250),
            min_interval: Duration::ZERO,
            last_send: None,
        }
    }

    /// Override the retry budget and initial backoff (doubled per retry).
    pub fn with_retry(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    /// Enforce a minimum spacing between live calls to this provider.
    pub fn with_rate_limit(mut self, min_interval: Duration) -> Self {
        self.min_interval = min_interval;
        self
    }

    pub fn provider_id(&self) -> &str {
        &self.config.id
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn send_with_retries(&mut self, prompt: &str) -> Result<String, LlmError> {
        let mut attempts = 0;
        loop {
            if let Some(last) = self.last_send {
                let since = last.elapsed();
                if since < self.min_interval {
                    std::thread::sleep(self.min_interval - since);
                }
            }
            self.last_send = Some(Instant::now());
            attempts += 1;
            match self.transport.send(&self.config, prompt) {
                Ok(text) => return Ok(text),
                Err(TransportError::AuthFailure) => {
                    return Err(LlmError::AuthFailure {
                        provider_id: self.config.id.clone(),
                    });
                }
                Err(TransportError::Timeout | TransportError::Service { .. }) => {
                    if attempts > self.max_retries {
                        return Err(LlmError::Timeout {
                            provider_id: self.config.id.clone(),
                            attempts,
                        });
                    }
                    let wait = self.backoff * 2u32.pow(attempts - 1);
                    if !wait.is_zero() {
                        std::thread::sleep(wait);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    value: f64,
    raw_response: String,
}

/// Disk-backed store of parsed predictions keyed by provider and prompt hash.
///
/// Hits return the byte-identical raw response of the original call. With a
/// path attached, every insert rewrites the file, so a crashed run loses at
/// most nothing.
#[derive(Debug, Default)]
pub struct LlmCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, CacheEntry>,
}

fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

impl LlmCache {
    /// A cache that lives only for this process.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open or create a cache file; a missing file starts empty.
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let entries = if path.exists() {
            serde_json::from_str(&std::fs::read_to_string(path)?)?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    fn key(provider_id: &str, prompt: &str) -> String {
        format!("{provider_id}:{}", prompt_hash(prompt))
    }

    pub fn get(&self, provider_id: &str, prompt: &str) -> Option<LlmPrediction> {
        self.entries
            .get(&Self::key(provider_id, prompt))
            .map(|entry| LlmPrediction {
                provider_id: provider_id.to_string(),
                value: entry.value,
                raw_response: entry.raw_response.clone(),
                cached: true,
            })
    }

    fn insert(&mut self, prompt: &str, prediction: &LlmPrediction) -> Result<(), LlmError> {
        self.entries.insert(
            Self::key(&prediction.provider_id, prompt),
            CacheEntry {
                value: prediction.value,
                raw_response: prediction.raw_response.clone(),
            },
        );
        if let Some(path) = &self.path {
            std::fs::write(path, serde_json::to_string_pretty(&self.entries)?)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ask one provider for a prediction, consulting the cache first.
///
/// On a miss the prompt goes over the client's transport with its retry
/// policy; a reply without any numeric token is reported as a refusal.
pub fn query<T: Transport>(
    client: &mut LlmClient<T>,
    prompt: &str,
    cache: &mut LlmCache,
) -> Result<LlmPrediction, LlmError> {
    if let Some(hit) = cache.get(client.provider_id(), prompt) {
        return Ok(hit);
    }
    let raw_response = client.send_with_retries(prompt)?;
    let value = parse_prediction(&raw_response).map_err(|err| match err {
        LlmError::NoNumberFound => LlmError::RefusedPrediction {
            provider_id: client.provider_id().to_string(),
        },
        other => other,
    })?;
    let prediction = LlmPrediction {
        provider_id: client.provider_id().to_string(),
        value,
        raw_response,
        cached: false,
    };
    cache.insert(prompt, &prediction)?;
    Ok(prediction)
}

/// HTTP transport for real providers; compiled only with the `live-llm`
/// feature so default builds stay offline.
#[cfg(feature = "live-llm")]
pub mod live {
    use super::*;

    pub struct HttpTransport {
        client: reqwest::blocking::Client,
    }

    impl HttpTransport {
        pub fn new(timeout: Duration) -> Result<Self, TransportError> {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|err| TransportError::Service {
                    detail: err.to_string(),
                })?;
            Ok(Self { client })
        }
    }

    impl Transport for HttpTransport {
        fn send(
            &mut self,
            config: &ProviderConfig,
            prompt: &str,
        ) -> Result<String, TransportError> {
            let key = std::env::var(&config.credential_env)
                .map_err(|_| TransportError::AuthFailure)?;
            let body = serde_json::json!({ "model": config.model, "prompt": prompt });
            let response = self
                .client
                .post(&config.endpoint)
                .bearer_auth(key)
                .json(&body)
                .send()
                .map_err(|err| {
                    if err.is_timeout() {
                        TransportError::Timeout
                    } else {
                        TransportError::Service {
                            detail: err.to_string(),
                        }
                    }
                })?;
            match response.status().as_u16() {
                200..=299 => response.text().map_err(|err| TransportError::Service {
                    detail: err.to_string(),
                }),
                401 | 403 => Err(TransportError::AuthFailure),
                status => Err(TransportError::Service {
                    detail: format!("HTTP {status}"),
                }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSetKind;
    use proptest::prelude::*;

    fn sample_features() -> FeatureVector {
        let n = FeatureSetKind::All.n_features();
        let values: Vec<f64> = (0..n).map(|i| 10.0 + i as f64 * 3.5).collect();
        FeatureVector::new(FeatureSetKind::All, values).unwrap()
    }

    fn mock_client(transport: MockTransport) -> LlmClient<MockTransport> {
        let config = default_providers()
            .into_iter()
            .find(|p| p.id == "claude_opus4")
            .unwrap();
        LlmClient::new(config, transport).with_retry(3, Duration::ZERO)
    }

    #[test]
    fn rendering_is_pure() {
        let template = PromptTemplate::builtin();
        let features = sample_features();
        let a = build_prompt(&template, &features, PredictionTarget::Auc);
        let b = build_prompt(&template, &features, PredictionTarget::Auc);
        assert_eq!(a, b);
        assert!(a.contains("fasting_glucose: 10.00"));
    }

    #[test]
    fn only_the_input_block_varies() {
        let template = PromptTemplate::builtin();
        let base = sample_features();
        let mut tweaked = base.clone();
        let gl_idx = base.names().iter().position(|n| *n == "glycemic_load").unwrap();
        tweaked.values[gl_idx] += 1.0;
        let a = build_prompt(&template, &base, PredictionTarget::Auc);
        let b = build_prompt(&template, &tweaked, PredictionTarget::Auc);
        let differing: Vec<(&str, &str)> = a
            .lines()
            .zip(b.lines())
            .filter(|(la, lb)| la != lb)
            .collect();
        assert_eq!(differing.len(), 1);
        assert!(differing[0].0.starts_with("glycemic_load:"));
    }

    #[test]
    fn every_canonical_name_appears_exactly_once() {
        let template = PromptTemplate::builtin();
        let features = sample_features();
        let prompt = build_prompt(&template, &features, PredictionTarget::MaxBgl);
        for name in features.names() {
            let pattern = Regex::new(&format!(r"\b{}\b", regex::escape(name))).unwrap();
            let count = pattern.find_iter(&prompt).count();
            assert_eq!(count, 1, "{name} appears {count} times");
        }
    }

    #[test]
    fn template_requires_one_input_slot() {
        assert!(PromptTemplate::new("no slot here".into()).is_err());
        assert!(PromptTemplate::new("{{input}} and {{input}}".into()).is_err());
        assert!(PromptTemplate::new("Input:\n{{input}}\n".into()).is_ok());
    }

    #[test]
    fn parses_marker_then_number() {
        let v = parse_prediction("Predicted AUC: 18,234.5 mg/dL-min").unwrap();
        assert_eq!(v, 18234.5);
        let v = parse_prediction("the answer is 90").unwrap();
        assert_eq!(v, 90.0);
    }

    #[test]
    fn last_marker_wins() {
        // Numbers before the final marker must be skipped.
        let v = parse_prediction("Given 3 meals, my prediction: 120.5").unwrap();
        assert_eq!(v, 120.5);
    }

    #[test]
    fn falls_back_to_first_number() {
        let v = parse_prediction("roughly 150 by my estimate").unwrap();
        assert_eq!(v, 150.0);
        // A marker with no number after it falls back too.
        let v = parse_prediction("2 factors matter; prediction: unavailable").unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn rejects_refusals_and_implausible_values() {
        assert!(matches!(
            parse_prediction("I cannot provide medical predictions."),
            Err(LlmError::NoNumberFound)
        ));
        assert!(matches!(
            parse_prediction("answer is -5"),
            Err(LlmError::ImplausibleValue { .. })
        ));
        assert!(matches!(
            parse_prediction("prediction: 3,000,000"),
            Err(LlmError::ImplausibleValue { .. })
        ));
    }

    #[test]
    fn query_hits_cache_on_repeat() {
        let mut client = mock_client(MockTransport::always("Prediction: 18250.0"));
        let mut cache = LlmCache::in_memory();
        let first = query(&mut client, "prompt text", &mut cache).unwrap();
        assert_eq!(first.value, 18250.0);
        assert!(!first.cached);
        let second = query(&mut client, "prompt text", &mut cache).unwrap();
        assert!(second.cached);
        assert_eq!(second.raw_response, first.raw_response);
        assert_eq!(client.transport().calls, 1);
    }

    #[test]
    fn refusal_text_is_an_error() {
        let mut client = mock_client(MockTransport::always("I cannot help with that."));
        let mut cache = LlmCache::in_memory();
        assert!(matches!(
            query(&mut client, "prompt", &mut cache),
            Err(LlmError::RefusedPrediction { .. })
        ));
        assert!(cache.is_empty());
    }

    #[test]
    fn retries_then_succeeds() {
        let script = vec![
            MockReply::Timeout,
            MockReply::Timeout,
            MockReply::Text("answer: 90".into()),
        ];
        let mut client = mock_client(MockTransport::script(script));
        let mut cache = LlmCache::in_memory();
        let prediction = query(&mut client, "prompt", &mut cache).unwrap();
        assert_eq!(prediction.value, 90.0);
        assert_eq!(client.transport().calls, 3);
    }

    #[test]
    fn exhausted_retries_time_out() {
        let mut client = mock_client(MockTransport::script(vec![MockReply::Timeout]));
        let mut cache = LlmCache::in_memory();
        match query(&mut client, "prompt", &mut cache) {
            Err(LlmError::Timeout { attempts, .. }) => assert_eq!(attempts, 4),
            other => panic!("expected timeout, got {other:?}"),
        }
        assert_eq!(client.transport().calls, 4);
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let mut client = mock_client(MockTransport::script(vec![MockReply::AuthFailure]));
        let mut cache = LlmCache::in_memory();
        assert!(matches!(
            query(&mut client, "prompt", &mut cache),
            Err(LlmError::AuthFailure { .. })
        ));
        assert_eq!(client.transport().calls, 1);
    }

    #[test]
    fn cache_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("llm_cache.json");
        let raw = "Prediction: 12,345.5 (confidence low)";
        let first = {
            let mut cache = LlmCache::open(&path).unwrap();
            let mut client = mock_client(MockTransport::always(raw));
            query(&mut client, "the prompt", &mut cache).unwrap()
        };
        let mut reloaded = LlmCache::open(&path).unwrap();
        assert_eq!(reloaded.len(), 1);
        // Even a transport that would now fail is never consulted.
        let mut client = mock_client(MockTransport::script(vec![MockReply::Timeout]));
        let hit = query(&mut client, "the prompt", &mut reloaded).unwrap();
        assert_eq!(client.transport().calls, 0);
        assert!(hit.cached);
        assert_eq!(hit.value, first.value);
        assert_eq!(hit.raw_response, raw);
    }

    #[test]
    fn credential_convention() {
        for p in default_providers() {
            assert_eq!(p.credential_env, credential_env_var(&p.id));
            assert!(p.credential_env.starts_with("GLUCOLENS_LLM_"));
            assert!(p.credential_env.ends_with("_KEY"));
        }
        assert_eq!(
            credential_env_var("gpt35_turbo"),
            "GLUCOLENS_LLM_GPT35_TURBO_KEY"
        );
    }

    proptest! {
        #[test]
        fn parse_is_idempotent_on_rendered_values(value in 0.0..=MAX_PLAUSIBLE) {
            let parsed = parse_prediction(&format!("{value}")).unwrap();
            prop_assert_eq!(parsed, value);
            let reparsed = parse_prediction(&format!("{parsed}")).unwrap();
            prop_assert_eq!(reparsed, parsed);
        }
    }
}
