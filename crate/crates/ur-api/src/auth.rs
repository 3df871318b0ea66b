use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Request, State};
use axum::http::header::AUTHORIZATION;
use axum::middleware::Next;
use axum::response::Response;
use ur_core::model::ActorId;

use crate::ApiError;

/// Environment variable naming the token file.
pub const TOKEN_FILE_ENV: &str = "UR_TOKEN_FILE";

/// Static bearer tokens, each standing for one human.
///
/// The file is a JSON object mapping token to human id:
/// `{"s3cret": "dr-lee"}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tokens(BTreeMap<String, ActorId>);

impl Tokens {
    pub fn new(map: impl IntoIterator<Item = (String, ActorId)>) -> Self {
        Tokens(map.into_iter().collect())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let map: BTreeMap<String, ActorId> =
            serde_json::from_str(text).map_err(|e| format!("token file: {e}"))?;
        if map.keys().any(|t| t.trim().is_empty()) {
            return Err("token file: empty token".into());
        }
        Ok(Tokens(map))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn human(&self, token: &str) -> Option<&ActorId> {
        self.0.get(token)
    }
}

/// The authenticated caller, inserted by [`require_token`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Human(pub ActorId);

fn query_token(req: &Request) -> Option<&str> {
    req.uri()
        .query()?
        .split('&')
        .find_map(|kv| kv.strip_prefix("access_token="))
}

/// Accepts `Authorization: Bearer <token>`, or `access_token=<token>` in the
/// query string for clients that cannot set headers on event streams.
pub async fn require_token(
    State(tokens): State<Arc<Tokens>>,
    mut req: Request,
    next: Next,
) -> Result<Response, ApiError> {
    let header = req
        .headers()
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    let human = header
        .or_else(|| query_token(&req))
        .and_then(|t| tokens.human(t))
        .cloned()
        .ok_or(ApiError::Unauthorized)?;
    req.extensions_mut().insert(Human(human));
    Ok(next.run(req).await)
}
