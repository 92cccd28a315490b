//! HTTP JSON façade over a [`Gatekeeper`].
//!
//! Authenticated endpoints take `Authorization: Bearer <token>`. Every
//! response body is a JSON object; errors are `{"error", "message"}`.

mod admin;
mod error;
mod public;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::HeaderMap;
use axum::routing::{delete, get, patch, post};
use axum::Router;
use chrono::{DateTime, Utc};
use gatekeeper_core::{Clock, Error, Gatekeeper, Principal};
use serde::de::DeserializeOwned;

pub use error::{status_for, ApiError};

#[derive(Clone)]
pub struct AppState {
    pub gatekeeper: Arc<Gatekeeper>,
    pub clock: Arc<dyn Clock>,
}

impl AppState {
    pub fn new(gatekeeper: Arc<Gatekeeper>, clock: Arc<dyn Clock>) -> Self {
        Self { gatekeeper, clock }
    }

    fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    /// Runs a store call off the async workers; credential hashing is slow.
    async fn run<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Gatekeeper, DateTime<Utc>) -> Result<T, Error> + Send + 'static,
    {
        let gk = Arc::clone(&self.gatekeeper);
        let now = self.now();
        tokio::task::spawn_blocking(move || f(&gk, now))
            .await
            .map_err(|e| {
                ApiError::new(
                    axum::http::StatusCode::INTERNAL_SERVER_ERROR,
                    "internal",
                    e.to_string(),
                )
            })?
            .map_err(ApiError::from)
    }

    /// Principal for the request: anonymous without a bearer header,
    /// otherwise the token must resolve.
    async fn principal(&self, headers: &HeaderMap) -> Result<Principal, ApiError> {
        match bearer(headers)? {
            None => Ok(Principal::anonymous()),
            Some(token) => self.run(move |gk, now| gk.resolve(&token, now)).await,
        }
    }

    async fn authenticated(&self, headers: &HeaderMap) -> Result<(String, Principal), ApiError> {
        let token = bearer(headers)?.ok_or_else(|| ApiError::from(Error::InvalidToken))?;
        let t = token.clone();
        let principal = self.run(move |gk, now| gk.resolve(&t, now)).await?;
        Ok((token, principal))
    }
}

fn bearer(headers: &HeaderMap) -> Result<Option<String>, ApiError> {
    let Some(value) = headers.get(axum::http::header::AUTHORIZATION) else {
        return Ok(None);
    };
    let text = value
        .to_str()
        .map_err(|_| ApiError::from(Error::InvalidToken))?;
    match text.split_once(' ') {
        Some((scheme, token))
            if scheme.eq_ignore_ascii_case("bearer") && !token.trim().is_empty() =>
        {
            Ok(Some(token.trim().to_string()))
        }
        _ => Err(ApiError::from(Error::InvalidToken)),
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/login", post(public::login))
        .route("/api/logout", post(public::logout))
        .route("/api/menu", get(public::menu))
        .route("/api/check", get(public::check))
        .route("/api/pages/{id}", get(public::page))
        .route("/api/register", post(public::register))
        .route("/api/password/change", post(public::change_password))
        .route("/api/password/recover", post(public::recover_begin))
        .route(
            "/api/password/recover/complete",
            post(public::recover_complete),
        )
        .route(
            "/api/admin/users",
            post(admin::create_user).get(admin::list_users),
        )
        .route("/api/admin/users/{id}", patch(admin::update_user))
        .route(
            "/api/admin/grants",
            post(admin::create_grant).get(admin::list_grants),
        )
        .route("/api/admin/grants/{id}", delete(admin::revoke_grant))
        .route("/api/admin/audit", get(admin::audit))
        .fallback(|| async { ApiError::not_found() })
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
