use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use gatekeeper_core::{AccessLevel, Error, UserSummary};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::{parse_body, ApiError, AppState};

#[derive(Deserialize)]
pub struct LoginBody {
    user_id: String,
    password: String,
}

pub async fn login(State(state): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: LoginBody = parse_body(&body)?;
    let session = state
        .run(move |gk, now| gk.login(&req.user_id, &req.password, now))
        .await?;
    Ok(Json(json!({
        "token": session.token,
        "user_id": session.user_id,
        "expires_at": session.expires_at,
    })))
}

pub async fn logout(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let token = crate::bearer(&headers)?.ok_or_else(|| ApiError::from(Error::InvalidToken))?;
    state.run(move |gk, now| gk.logout(&token, now)).await?;
    Ok(Json(json!({ "logged_out": true })))
}

pub async fn menu(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let principal = state.principal(&headers).await?;
    let menu = state.gatekeeper.visible_menu(&principal, state.now());
    Ok(Json(json!({
        "user_id": principal.user_id,
        "role": principal.role,
        "groups": menu.groups,
    })))
}

pub async fn check(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let resource = params
        .get("resource")
        .filter(|r| !r.is_empty())
        .ok_or_else(|| ApiError::bad_request("query parameter 'resource' is required"))?;
    let level: AccessLevel = params
        .get("level")
        .ok_or_else(|| ApiError::bad_request("query parameter 'level' is required"))?
        .parse()
        .map_err(ApiError::from)?;
    let principal = state.principal(&headers).await?;
    let decision = state
        .gatekeeper
        .decide(&principal, resource, level, state.now())?;
    Ok(Json(json!({
        "resource": resource,
        "level": level,
        "verdict": decision.verdict,
        "reason": decision.reason,
        "trace": decision.trace,
    })))
}

pub async fn page(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let principal = state.principal(&headers).await?;
    let decision = state
        .gatekeeper
        .decide(&principal, &id, AccessLevel::Read, state.now())?;
    if !decision.is_allowed() {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "access_denied",
            format!("access denied: {}", decision.reason),
        ));
    }
    let resource = state
        .gatekeeper
        .resource(&id)
        .ok_or_else(|| ApiError::from(Error::UnknownResource(id)))?;
    Ok(Json(json!({
        "resource_id": resource.resource_id,
        "display_name": resource.display_name,
        "data_class": resource.data_class,
        "menu_group": resource.menu_group,
        "description": resource.description.unwrap_or_default(),
    })))
}

#[derive(Deserialize)]
pub struct RegisterBody {
    user_id: String,
    password: String,
    #[serde(default)]
    hint_question: String,
    #[serde(default)]
    hint_answer: String,
}

pub async fn register(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: RegisterBody = parse_body(&body)?;
    let record = state
        .run(move |gk, now| {
            gk.self_register(
                &req.user_id,
                &req.password,
                &req.hint_question,
                &req.hint_answer,
                now,
            )
        })
        .await?;
    Ok((StatusCode::CREATED, Json(UserSummary::from(&record))))
}

#[derive(Deserialize)]
pub struct ChangeBody {
    old_password: String,
    new_password: String,
}

pub async fn change_password(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let token = crate::bearer(&headers)?.ok_or_else(|| ApiError::from(Error::InvalidToken))?;
    let req: ChangeBody = parse_body(&body)?;
    state
        .run(move |gk, now| gk.change_password(&token, &req.old_password, &req.new_password, now))
        .await?;
    Ok(Json(json!({ "changed": true })))
}

#[derive(Deserialize)]
pub struct RecoverBegin {
    user_id: String,
}

pub async fn recover_begin(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: RecoverBegin = parse_body(&body)?;
    let question = state
        .run(move |gk, now| gk.recover_begin(&req.user_id, now))
        .await
        .map_err(|_| ApiError::recovery_failed())?;
    Ok(Json(json!({ "hint_question": question })))
}

#[derive(Deserialize)]
pub struct RecoverComplete {
    user_id: String,
    hint_answer: String,
}

pub async fn recover_complete(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: RecoverComplete = parse_body(&body)?;
    let password = state
        .run(move |gk, now| gk.recover_complete(&req.user_id, &req.hint_answer, now))
        .await
        .map_err(|_| ApiError::recovery_failed())?;
    Ok(Json(json!({ "new_password": password })))
}
