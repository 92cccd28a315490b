use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use chrono::{DateTime, Utc};
use gatekeeper_core::directory::require_admin;
use gatekeeper_core::{
    AccessLevel, AuditFilter, EventKind, NewUser, Principal, Role, UserFilter, UserStatus,
    UserSummary,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::{parse_body, ApiError, AppState};

async fn admin(state: &AppState, headers: &HeaderMap) -> Result<Principal, ApiError> {
    let (_, principal) = state.authenticated(headers).await?;
    require_admin(&state.gatekeeper.snapshot(), &principal)?;
    Ok(principal)
}

fn parse_param<T: std::str::FromStr<Err = gatekeeper_core::Error>>(
    params: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, ApiError> {
    params
        .get(key)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>())
        .transpose()
        .map_err(ApiError::from)
}

fn parse_instant(
    params: &HashMap<String, String>,
    key: &str,
) -> Result<Option<DateTime<Utc>>, ApiError> {
    params
        .get(key)
        .filter(|v| !v.is_empty())
        .map(|v| {
            DateTime::parse_from_rfc3339(v)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| {
                    ApiError::bad_request(format!("'{key}' is not an RFC 3339 instant: {e}"))
                })
        })
        .transpose()
}

#[derive(Deserialize)]
pub struct CreateUserBody {
    user_id: String,
    password: String,
    role: Role,
    #[serde(default)]
    hint_question: String,
    #[serde(default)]
    hint_answer: String,
}

pub async fn create_user(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let actor = admin(&state, &headers).await?;
    let req: CreateUserBody = parse_body(&body)?;
    let new = NewUser {
        user_id: req.user_id,
        password: req.password,
        role: req.role,
        hint_question: req.hint_question,
        hint_answer: req.hint_answer,
    };
    let record = state
        .run(move |gk, now| gk.create_user(&actor, new, now))
        .await?;
    Ok((StatusCode::CREATED, Json(UserSummary::from(&record))))
}

pub async fn list_users(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let actor = admin(&state, &headers).await?;
    let filter = UserFilter {
        role: parse_param(&params, "role")?,
        status: parse_param(&params, "status")?,
    };
    let users = state.gatekeeper.list_users(&actor, filter)?;
    Ok(Json(json!({ "users": users })))
}

#[derive(Deserialize)]
pub struct UpdateUserBody {
    role: Option<Role>,
    status: Option<UserStatus>,
    #[serde(default)]
    unlock_recovery: bool,
}

pub async fn update_user(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<UserSummary>, ApiError> {
    let actor = admin(&state, &headers).await?;
    let req: UpdateUserBody = parse_body(&body)?;
    if req.role.is_none() && req.status.is_none() && !req.unlock_recovery {
        return Err(ApiError::bad_request(
            "nothing to change: give role, status or unlock_recovery",
        ));
    }
    let record = state
        .run(move |gk, now| {
            let mut record = None;
            if let Some(role) = req.role {
                record = Some(gk.set_role(&actor, &id, role, now)?);
            }
            if let Some(status) = req.status {
                record = Some(gk.set_status(&actor, &id, status, now)?);
            }
            if req.unlock_recovery {
                record = Some(gk.unlock_recovery(&actor, &id, now)?);
            }
            Ok(record.expect("at least one change requested"))
        })
        .await?;
    Ok(Json(UserSummary::from(&record)))
}

#[derive(Deserialize)]
pub struct CreateGrantBody {
    user_id: String,
    resource_id: String,
    level: AccessLevel,
    #[serde(default)]
    expiry: Option<DateTime<Utc>>,
}

pub async fn create_grant(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let actor = admin(&state, &headers).await?;
    let req: CreateGrantBody = parse_body(&body)?;
    let grant = state
        .run(move |gk, now| {
            gk.grant_special(
                &actor,
                &req.user_id,
                &req.resource_id,
                req.level,
                req.expiry,
                now,
            )
        })
        .await?;
    Ok((StatusCode::CREATED, Json(grant)))
}

pub async fn list_grants(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let actor = admin(&state, &headers).await?;
    let grants = state
        .gatekeeper
        .list_grants(&actor, params.get("user").map(String::as_str))?;
    Ok(Json(json!({ "grants": grants })))
}

pub async fn revoke_grant(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let actor = admin(&state, &headers).await?;
    let revoked = id.clone();
    state
        .run(move |gk, now| gk.revoke_grant(&actor, &id, now))
        .await?;
    Ok(Json(json!({ "revoked": revoked })))
}

pub async fn audit(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let actor = admin(&state, &headers).await?;
    let filter = AuditFilter {
        actor: params.get("actor").filter(|a| !a.is_empty()).cloned(),
        kind: parse_param::<EventKind>(&params, "kind")?,
        since: parse_instant(&params, "since")?,
        until: parse_instant(&params, "until")?,
    };
    let limit = params
        .get("limit")
        .map(|l| {
            l.parse::<usize>()
                .map_err(|_| ApiError::bad_request("'limit' must be a number"))
        })
        .transpose()?;
    let mut events = state.gatekeeper.audit_query(&actor, &filter)?;
    if let Some(limit) = limit {
        let skip = events.len().saturating_sub(limit);
        events.drain(..skip);
    }
    Ok(Json(json!({ "events": events })))
}
