use std::convert::Infallible;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::{Extension, Json};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use ur_core::escalation::{
    claim, get_task, list_escalations, submit_decision, DecisionRequest, EscalationTask,
    TaskStatus,
};
use ur_core::lifecycle::{transition_table_document, HumanAction, HumanRole};
use ur_core::mechanisms::ActionTemplate;
use ur_core::model::{EventId, RecordId};
use ur_core::registry::{AuditEntry, RecordFilter};

use crate::auth::Human;
use crate::service::{Feed, Service};
use crate::{canonical_response, ApiError};

type Reply = Result<Response, ApiError>;

fn ok<T: Serialize>(value: &T) -> Reply {
    Ok(canonical_response(StatusCode::OK, value))
}

fn parse_id(raw: &str, prefix: char) -> Option<u64> {
    raw.strip_prefix(prefix).unwrap_or(raw).parse().ok()
}

fn record_id(raw: &str) -> Result<RecordId, ApiError> {
    parse_id(raw, 'U')
        .map(RecordId)
        .ok_or_else(|| ApiError::UnknownTarget(raw.to_string()))
}

fn task_id(raw: &str) -> Result<EventId, ApiError> {
    parse_id(raw, '#')
        .map(EventId)
        .ok_or_else(|| ApiError::UnknownTask(raw.to_string()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::BadRequest(e.body_text()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscalationQuery {
    status: Option<TaskStatus>,
    /// Access token; consumed by authentication.
    access_token: Option<String>,
}

pub async fn escalations(
    State(svc): State<Service>,
    q: Result<Query<EscalationQuery>, QueryRejection>,
) -> Reply {
    let q = query(q)?;
    let _ = q.access_token;
    let tasks = svc.call(|sim| list_escalations(sim.registry())).await?;
    let tasks: Vec<EscalationTask> = tasks
        .into_iter()
        .filter(|t| q.status.is_none_or(|s| t.status == s))
        .collect();
    ok(&tasks)
}

pub async fn escalation(State(svc): State<Service>, Path(id): Path<String>) -> Reply {
    let task = task_id(&id)?;
    let t = svc.call(move |sim| get_task(sim.registry(), task)).await??;
    ok(&t)
}

pub async fn records(
    State(svc): State<Service>,
    q: Result<Query<RecordFilter>, QueryRejection>,
) -> Reply {
    let filter = query(q)?;
    let recs = svc
        .call(move |sim| {
            sim.registry()
                .query(&filter)
                .into_iter()
                .cloned()
                .collect::<Vec<_>>()
        })
        .await?;
    ok(&recs)
}

pub async fn record(State(svc): State<Service>, Path(id): Path<String>) -> Reply {
    let rid = record_id(&id)?;
    let rec = svc
        .call(move |sim| sim.registry().record(rid).cloned())
        .await?
        .ok_or_else(|| ApiError::UnknownTarget(rid.to_string()))?;
    ok(&rec)
}

pub async fn history(State(svc): State<Service>, Path(id): Path<String>) -> Reply {
    let rid = record_id(&id)?;
    let entries = svc
        .call(move |sim| {
            sim.registry()
                .history(rid)
                .map(|h| h.into_iter().cloned().collect::<Vec<AuditEntry>>())
        })
        .await??;
    ok(&entries)
}

pub async fn claim_task(
    State(svc): State<Service>,
    Extension(Human(human)): Extension<Human>,
    Path(id): Path<String>,
) -> Reply {
    let task = task_id(&id)?;
    let t = svc
        .call(move |sim| {
            claim(sim.registry_mut(), task, &human)?;
            get_task(sim.registry(), task)
        })
        .await??;
    ok(&t)
}

/// The decision as posted; the deciding human is the token's owner.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionBody {
    pub role: HumanRole,
    pub action: HumanAction,
    pub justification: String,
    #[serde(default)]
    pub authorized_actions: Vec<ActionTemplate>,
}

#[derive(Serialize)]
struct DecisionReply {
    task: EscalationTask,
    entries: Vec<AuditEntry>,
}

pub async fn decide(
    State(svc): State<Service>,
    Extension(Human(human)): Extension<Human>,
    Path(id): Path<String>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> Reply {
    let task = task_id(&id)?;
    let Json(body) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let request = DecisionRequest {
        task,
        human,
        role: body.role,
        action: body.action,
        justification: body.justification,
        authorized_actions: body.authorized_actions,
    };
    let reply = svc
        .call(move |sim| {
            let rules = sim.rules();
            let entries = submit_decision(sim.registry_mut(), &request, &rules)?;
            Ok::<_, ApiError>(DecisionReply {
                task: get_task(sim.registry(), task)?,
                entries,
            })
        })
        .await??;
    ok(&reply)
}

pub async fn snapshot(State(svc): State<Service>) -> Reply {
    let snap = svc.call(|sim| sim.registry().snapshot()).await?;
    ok(&snap)
}

pub async fn step(State(svc): State<Service>) -> Reply {
    let outcome = svc.call(|sim| sim.step()).await??;
    ok(&outcome)
}

pub async fn transition_table() -> Reply {
    ok(&transition_table_document())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsQuery {
    /// Last event id already seen; 0 streams from the start.
    since: u64,
    /// Close the stream after this many entries.
    limit: Option<usize>,
    access_token: Option<String>,
}

struct Cursor {
    feed: Feed,
    next: usize,
    left: Option<usize>,
}

fn entries(cursor: Cursor) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::unfold(cursor, |mut c| async move {
        if c.left == Some(0) {
            return None;
        }
        loop {
            if let Some(entry) = c.feed.get(c.next) {
                c.next += 1;
                c.left = c.left.map(|n| n - 1);
                let ev = Event::default()
                    .event("audit")
                    .id(c.next.to_string())
                    .data(&*entry);
                return Some((Ok(ev), c));
            }
            if !c.feed.wait_beyond(c.next).await {
                return None;
            }
        }
    })
}

/// Server-sent events, one canonical audit entry per message, starting after
/// event `since`.
pub async fn events(
    State(svc): State<Service>,
    q: Result<Query<EventsQuery>, QueryRejection>,
) -> Reply {
    let q = query(q)?;
    let _ = q.access_token;
    let feed = svc.feed();
    let last = feed.len() as u64;
    if q.since > last {
        return Err(ApiError::UnknownCursor {
            since: q.since,
            last,
        });
    }
    let cursor = Cursor {
        feed,
        next: q.since as usize,
        left: q.limit,
    };
    Ok(Sse::new(entries(cursor))
        .keep_alive(KeepAlive::default())
        .into_response())
}
