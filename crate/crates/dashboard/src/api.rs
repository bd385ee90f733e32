use std::sync::Arc;

use audible_trace_core::ledger::{LedgerError, LedgerQuery, LedgerRecord, QueryPage};
use audible_trace_core::session::{ContextView, SessionStats};
use audible_trace_core::speech::UtteranceRecord;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use chrono::{DateTime, Utc};
use serde::Deserialize;

use crate::error::ApiError;
use crate::AppState;

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Default, Deserialize)]
pub struct ErrorsParams {
    #[serde(rename = "type")]
    exception_type: Option<String>,
    file: Option<String>,
    since: Option<String>,
    resolved: Option<String>,
    offset: Option<String>,
    limit: Option<String>,
}

fn parse_num(name: &str, v: Option<String>) -> Result<Option<usize>, ApiError> {
    v.map(|s| {
        s.parse::<usize>()
            .map_err(|_| ApiError::bad_request(format!("{name} must be a non-negative integer")))
    })
    .transpose()
}

impl ErrorsParams {
    fn into_query(self) -> Result<LedgerQuery, ApiError> {
        let since = self
            .since
            .map(|s| {
                DateTime::parse_from_rfc3339(&s)
                    .map(|t| t.with_timezone(&Utc))
                    .map_err(|_| ApiError::bad_request("since must be an RFC 3339 timestamp"))
            })
            .transpose()?;
        let resolved = self
            .resolved
            .map(|s| match s.as_str() {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                _ => Err(ApiError::bad_request("resolved must be true or false")),
            })
            .transpose()?;
        Ok(LedgerQuery {
            exception_type: self.exception_type.filter(|s| !s.is_empty()),
            file: self.file.filter(|s| !s.is_empty()),
            since,
            resolved,
            offset: parse_num("offset", self.offset)?.unwrap_or(0),
            limit: parse_num("limit", self.limit)?,
        })
    }
}

fn record_id(path: Result<Path<u64>, PathRejection>) -> Result<u64, ApiError> {
    path.map(|Path(id)| id)
        .map_err(|_| ApiError::bad_request("record id must be a positive integer"))
}

fn missing(id: u64) -> ApiError {
    ApiError::not_found(format!("no record with id {id}"))
}

pub async fn list_errors(
    State(st): State<Arc<AppState>>,
    params: Result<Query<ErrorsParams>, QueryRejection>,
) -> ApiResult<QueryPage> {
    let Query(params) = params.map_err(|e| ApiError::bad_request(e.body_text()))?;
    Ok(Json(st.session.query(&params.into_query()?)))
}

pub async fn get_error(
    State(st): State<Arc<AppState>>,
    path: Result<Path<u64>, PathRejection>,
) -> ApiResult<LedgerRecord> {
    let id = record_id(path)?;
    st.session.get(id).map(Json).ok_or_else(|| missing(id))
}

pub async fn get_context(
    State(st): State<Arc<AppState>>,
    path: Result<Path<u64>, PathRejection>,
) -> ApiResult<ContextView> {
    let id = record_id(path)?;
    st.session.context(id).map(Json).ok_or_else(|| missing(id))
}

#[derive(Debug, Deserialize)]
pub struct ResolutionBody {
    resolution: String,
}

pub async fn post_resolution(
    State(st): State<Arc<AppState>>,
    path: Result<Path<u64>, PathRejection>,
    body: Result<Json<ResolutionBody>, JsonRejection>,
) -> ApiResult<LedgerRecord> {
    let id = record_id(path)?;
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let text = body.resolution.trim();
    if text.is_empty() {
        return Err(ApiError::bad_request("resolution must not be empty"));
    }
    match st.session.set_resolution(id, text) {
        Ok(r) => Ok(Json(r)),
        Err(LedgerError::NotFound(_)) => Err(missing(id)),
        Err(e) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "storage_failure",
            e.to_string(),
        )),
    }
}

pub async fn post_narrate(
    State(st): State<Arc<AppState>>,
    path: Result<Path<u64>, PathRejection>,
) -> Result<(StatusCode, Json<UtteranceRecord>), ApiError> {
    let id = record_id(path)?;
    match st.session.narrate_record(id) {
        Ok(u) => Ok((StatusCode::ACCEPTED, Json(u))),
        Err(LedgerError::NotFound(_)) => Err(missing(id)),
        Err(e) => Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "gateway_closed",
            e.to_string(),
        )),
    }
}

pub async fn get_stats(State(st): State<Arc<AppState>>) -> Json<SessionStats> {
    Json(st.session.stats())
}

pub async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed for this endpoint",
    )
}
