//! Blocking HTTP access to a running service.

use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub struct Client {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(base: &str, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            base: base.trim_end_matches('/').to_owned(),
            token,
            agent,
        }
    }

    fn auth<B>(&self, req: ureq::RequestBuilder<B>) -> ureq::RequestBuilder<B> {
        match &self.token {
            Some(t) => req.header("Authorization", format!("Bearer {t}")),
            None => req,
        }
    }

    fn finish(
        &self,
        path: &str,
        resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<Value> {
        let url = format!("{}{path}", self.base);
        let mut resp = resp.with_context(|| format!("request to {url} failed"))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_string()
            .with_context(|| format!("reading response from {url}"))?;
        let value: Value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        if !status.is_success() {
            let message = value
                .get("error")
                .and_then(Value::as_str)
                .map(str::to_owned)
                .unwrap_or_else(|| value.to_string());
            bail!("{url} answered {status}: {message}");
        }
        Ok(value)
    }

    pub fn get(&self, path: &str, params: &[(String, String)]) -> Result<Value> {
        let req = self
            .agent
            .get(format!("{}{path}", self.base))
            .query_pairs(params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        self.finish(path, self.auth(req).call())
    }

    pub fn post_text(&self, path: &str, body: &str) -> Result<Value> {
        let req = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("Content-Type", "text/plain; charset=utf-8");
        self.finish(path, self.auth(req).send(body))
    }
}
