//! Live oracle over an HTTP chat-completion endpoint.
//!
//! Transport failures retry with exponential backoff before surfacing as
//! unavailability. Response parsing is kept in pure helpers so it can be
//! tested without a network.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::{fill, PromptTemplates, GRAMMAR_SUMMARY};
use super::{check_init_coverage, KnowledgeOracle, OracleError, PlausibilityAnswer, LOG_PROB_FLOOR};
use crate::program::TransitionProgram;
use crate::refine::{ProposalRequest, Refinement};
use crate::schema::ObservationSchema;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpOracleConfig {
    /// Chat-completion endpoint URL.
    pub endpoint: String,
    pub model: String,
    /// Bearer token; when absent, `api_key_env` names an environment
    /// variable to read it from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_timeout_secs() -> u64 {
    120
}

pub struct HttpOracle {
    cfg: HttpOracleConfig,
    templates: PromptTemplates,
    client: reqwest::blocking::Client,
}

impl HttpOracle {
    pub fn new(cfg: HttpOracleConfig, templates: PromptTemplates) -> Result<Self, OracleError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| OracleError::Unavailable(e.to_string()))?;
        Ok(Self {
            cfg,
            templates,
            client,
        })
    }

    fn api_key(&self) -> Option<String> {
        self.cfg.api_key.clone().or_else(|| {
            self.cfg
                .api_key_env
                .as_ref()
                .and_then(|name| std::env::var(name).ok())
        })
    }

    /// One chat completion with retries; returns the raw response body.
    fn chat(&self, user: &str, want_logprobs: bool) -> Result<serde_json::Value, OracleError> {
        let mut body = json!({
            "model": self.cfg.model,
            "temperature": 0.0,
            "messages": [
                {"role": "system", "content": self.templates.system},
                {"role": "user", "content": user},
            ],
        });
        if want_logprobs {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(5);
        }
        let mut last_error = String::new();
        for attempt in 0..self.cfg.max_retries.max(1) {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 * (1 << (attempt - 1))));
            }
            let mut request = self.client.post(&self.cfg.endpoint).json(&body);
            if let Some(key) = self.api_key() {
                request = request.bearer_auth(key);
            }
            match request.send().and_then(|r| r.error_for_status()) {
                Ok(response) => match response.json::<serde_json::Value>() {
                    Ok(value) => return Ok(value),
                    Err(e) => last_error = e.to_string(),
                },
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(OracleError::Unavailable(last_error))
    }

    fn ask(&self, user: &str) -> Result<String, OracleError> {
        let response = self.chat(user, false)?;
        extract_content(&response)
    }

    fn variables_listing(schema: &ObservationSchema) -> String {
        schema
            .variables
            .iter()
            .map(|v| format!("- {} ({:?}): {}", v.name, v.stream, v.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Pulls `choices[0].message.content` out of a chat response.
fn extract_content(response: &serde_json::Value) -> Result<String, OracleError> {
    response["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| OracleError::Malformed("response has no message content".to_string()))
}

/// Log-probability of an affirmative first token. Prefers the explicit
/// "yes" alternative among the reported top log-probabilities; falls back to
/// the chosen token when it is itself affirmative; otherwise the floor.
fn extract_yes_logprob(response: &serde_json::Value) -> f64 {
    let first = &response["choices"][0]["logprobs"]["content"][0];
    let is_yes = |token: &str| token.trim().to_lowercase().starts_with("yes");
    if let Some(alternatives) = first["top_logprobs"].as_array() {
        for alt in alternatives {
            if alt["token"].as_str().map(is_yes).unwrap_or(false) {
                if let Some(lp) = alt["logprob"].as_f64() {
                    return lp.clamp(LOG_PROB_FLOOR, 0.0);
                }
            }
        }
    }
    let chosen_yes = first["token"].as_str().map(is_yes).unwrap_or(false);
    match (chosen_yes, first["logprob"].as_f64()) {
        (true, Some(lp)) => lp.clamp(LOG_PROB_FLOOR, 0.0),
        _ => LOG_PROB_FLOOR,
    }
}

/// Strips a Markdown code fence if the reply is wrapped in one.
fn strip_fences(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(inner) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let inner = inner.strip_suffix("```").unwrap_or(inner);
    match inner.split_once('\n') {
        Some((first_line, rest)) if !first_line.trim_start().starts_with(['{', '[']) => {
            rest.trim()
        }
        _ => inner.trim(),
    }
}

/// Parses refinement candidates from a reply, dropping elements that do not
/// deserialize (e.g. bodies with syntax errors). Returns the survivors and
/// how many were dropped.
fn parse_refinements(text: &str) -> Result<(Vec<Refinement>, usize), OracleError> {
    let value: serde_json::Value = serde_json::from_str(strip_fences(text))
        .map_err(|e| OracleError::Malformed(format!("refinement reply is not JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| OracleError::Malformed("refinement reply is not an array".to_string()))?;
    let mut kept = Vec::new();
    let mut dropped = 0usize;
    for item in items {
        match serde_json::from_value::<Refinement>(item.clone()) {
            Ok(r) => kept.push(r),
            Err(_) => dropped += 1,
        }
    }
    Ok((kept, dropped))
}

impl KnowledgeOracle for HttpOracle {
    fn plausibility(
        &self,
        target: &str,
        parents: &[String],
        schema: &ObservationSchema,
    ) -> Result<PlausibilityAnswer, OracleError> {
        let parents_text = if parents.is_empty() {
            "(none: the proposal is that no same-step variable influences it)".to_string()
        } else {
            parents.join(", ")
        };
        let user = fill(
            &self.templates.plausibility,
            &[
                ("environment_doc", schema.environment_doc.as_str()),
                ("variables", &Self::variables_listing(schema)),
                ("target", target),
                ("parents", &parents_text),
            ],
        );
        let response = self.chat(&user, true)?;
        Ok(PlausibilityAnswer {
            log_prob_yes: extract_yes_logprob(&response),
        })
    }

    fn propose_refinements(
        &self,
        request: &ProposalRequest,
    ) -> Result<Vec<Refinement>, OracleError> {
        let functions = serde_json::to_string_pretty(&request.functions)
            .expect("function definitions serialize");
        let diff = serde_json::to_string(&request.error.diff).expect("diff entries serialize");
        let user = fill(
            &self.templates.refine,
            &[
                ("environment_doc", ""),
                ("error_kind", &request.error.kind.to_string()),
                ("detail", &request.error.detail),
                ("diff", &diff),
                ("action", &request.action.to_json_string()),
                ("functions", &functions),
                ("k", &request.k.to_string()),
                ("grammar", GRAMMAR_SUMMARY),
            ],
        );
        let reply = self.ask(&user)?;
        let (kept, dropped) = parse_refinements(&reply)?;
        if dropped > 0 {
            eprintln!("oracle: dropped {dropped} unparseable refinement candidate(s)");
        }
        Ok(kept.into_iter().take(request.k).collect())
    }

    fn topo_next(
        &self,
        ordered: &[String],
        remaining: &[String],
        schema: &ObservationSchema,
    ) -> Result<String, OracleError> {
        let user = fill(
            &self.templates.topo,
            &[
                ("environment_doc", schema.environment_doc.as_str()),
                ("variables", &Self::variables_listing(schema)),
                ("ordered", &ordered.join(", ")),
                ("remaining", &remaining.join(", ")),
            ],
        );
        let reply = self.ask(&user)?;
        Ok(reply.trim().trim_matches(['"', '`', '.']).to_string())
    }

    fn elicit_parents(
        &self,
        node: &str,
        predecessors: &[String],
        schema: &ObservationSchema,
    ) -> Result<Vec<String>, OracleError> {
        let user = fill(
            &self.templates.parents,
            &[
                ("environment_doc", schema.environment_doc.as_str()),
                ("node", node),
                ("predecessors", &predecessors.join(", ")),
            ],
        );
        let reply = self.ask(&user)?;
        let names: Vec<String> = serde_json::from_str(strip_fences(&reply))
            .map_err(|e| OracleError::Malformed(format!("parent reply is not JSON: {e}")))?;
        Ok(names
            .into_iter()
            .filter(|n| predecessors.contains(n))
            .collect())
    }

    fn init_program(&self, schema: &ObservationSchema) -> Result<TransitionProgram, OracleError> {
        let schema_json =
            serde_json::to_string_pretty(schema).expect("observation schema serializes");
        let actions = schema
            .actions
            .iter()
            .map(|a| format!("- {} (fields: {}): {}", a.name, a.fields.join(", "), a.description))
            .collect::<Vec<_>>()
            .join("\n");
        let user = fill(
            &self.templates.init,
            &[
                ("environment_doc", schema.environment_doc.as_str()),
                ("schema_json", &schema_json),
                ("actions", &actions),
                ("grammar", GRAMMAR_SUMMARY),
            ],
        );
        let reply = self.ask(&user)?;
        let program = TransitionProgram::from_bundle_json(strip_fences(&reply))
            .map_err(|e| OracleError::Malformed(e.to_string()))?;
        check_init_coverage(&program, schema)?;
        Ok(program)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction() {
        let response = json!({
            "choices": [{"message": {"role": "assistant", "content": "hello"}}]
        });
        assert_eq!(extract_content(&response).unwrap(), "hello");
        assert!(extract_content(&json!({"choices": []})).is_err());
    }

    #[test]
    fn yes_logprob_prefers_top_alternatives() {
        let response = json!({
            "choices": [{
                "logprobs": {"content": [{
                    "token": "No",
                    "logprob": -0.02,
                    "top_logprobs": [
                        {"token": "No", "logprob": -0.02},
                        {"token": "Yes", "logprob": -3.9}
                    ]
                }]}
            }]
        });
        assert_eq!(extract_yes_logprob(&response), -3.9);
    }

    #[test]
    fn yes_logprob_uses_chosen_token_when_affirmative() {
        let response = json!({
            "choices": [{
                "logprobs": {"content": [{"token": "Yes", "logprob": -0.01}]}
            }]
        });
        assert_eq!(extract_yes_logprob(&response), -0.01);
    }

    #[test]
    fn missing_logprobs_floor() {
        let response = json!({
            "choices": [{"message": {"content": "Yes"}}]
        });
        assert_eq!(extract_yes_logprob(&response), LOG_PROB_FLOOR);
        let no_yes_anywhere = json!({
            "choices": [{
                "logprobs": {"content": [{
                    "token": "No", "logprob": -0.1,
                    "top_logprobs": [{"token": "No", "logprob": -0.1}]
                }]}
            }]
        });
        assert_eq!(extract_yes_logprob(&no_yes_anywhere), LOG_PROB_FLOOR);
    }

    #[test]
    fn fences_are_stripped() {
        assert_eq!(strip_fences("```json\n[1]\n```"), "[1]");
        assert_eq!(strip_fences("```\n[1]\n```"), "[1]");
        assert_eq!(strip_fences("[1]"), "[1]");
        assert_eq!(strip_fences("```[1]```"), "[1]");
    }

    #[test]
    fn unparseable_refinements_are_dropped_not_fatal() {
        let reply = r#"[
            {"op": "remove", "target_id": "tick"},
            {"op": "replace", "target_id": "tick",
             "new_function": {"id": "tick", "kind": "dynamic", "body": "emit replace"}},
            {"op": "unknown"}
        ]"#;
        let (kept, dropped) = parse_refinements(reply).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(dropped, 2);
        assert!(parse_refinements("not json").is_err());
    }
}
