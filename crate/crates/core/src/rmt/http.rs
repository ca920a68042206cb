//! HTTP/1.1 façade over [`SharedStore`] and a blocking client for it.
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | POST | `/items` | `<item>` | 201 + stored `<item>` |
//! | GET | `/items/{id}` | | 200 + `<item>` |
//! | GET | `/items?kind=&config_tag=` | | 200 + `<items>` |
//! | POST | `/relationships` | `<rel>` | 201 |
//! | POST | `/items/{id}/state` | `<state>in_review</state>` | 200 |
//! | POST | `/testcases/{id}/result` | `<result status coverage link/>` | 200 |
//! | POST | `/derive` | configuration file text | 200 + `<subset-report>` |
//! | GET | `/export/ipvs?config_tag=` | | 200 + ipvs document |
//!
//! Errors: 400 validation, 404 unknown id or tag, 409 duplicate id or
//! illegal transition, with an `<error kind="...">message</error>` body.

use std::collections::HashMap;
use std::future::Future;
use std::io::Read;
use std::net::SocketAddr;
use std::thread::JoinHandle;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::sync::oneshot;

use super::persist::{rel_from_xml, rel_to_xml};
use super::{
    item_from_xml, item_to_xml, subset_report_from_xml, subset_report_to_xml, ItemKind,
    Relationship, ReviewState, RmtError, RmtItem, SharedStore, SubsetReport, TestStatus,
};
use crate::configspec::parse_config;
use crate::xml::{self, a, XmlWriter};

fn status_of(err: &RmtError) -> StatusCode {
    match err {
        RmtError::UnknownId(_) | RmtError::UnknownConfigTag(_) | RmtError::DanglingEndpoint(_) => {
            StatusCode::NOT_FOUND
        }
        RmtError::DuplicateId(_) | RmtError::IllegalTransition { .. } => StatusCode::CONFLICT,
        RmtError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

fn error_kind(err: &RmtError) -> &'static str {
    match err {
        RmtError::DuplicateId(_) => "duplicate_id",
        RmtError::UnknownId(_) => "unknown_id",
        RmtError::MalformedPredicate(_) => "malformed_predicate",
        RmtError::FieldMismatch(_) => "field_mismatch",
        RmtError::DanglingEndpoint(_) => "dangling_endpoint",
        RmtError::KindViolation(_) => "kind_violation",
        RmtError::IllegalTransition { .. } => "illegal_transition",
        RmtError::NoApprovedSuperset => "no_approved_superset",
        RmtError::CorruptPredicate { .. } => "corrupt_predicate",
        RmtError::UnknownConfigTag(_) => "unknown_config_tag",
        RmtError::Validation(_) | RmtError::Config(_) | RmtError::Xml(_) => "validation",
        RmtError::Io(_) => "io",
    }
}

fn xml_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/xml")], body).into_response()
}

struct ApiError(RmtError);

impl From<RmtError> for ApiError {
    fn from(e: RmtError) -> Self {
        ApiError(e)
    }
}

impl From<xml::XmlError> for ApiError {
    fn from(e: xml::XmlError) -> Self {
        ApiError(RmtError::Xml(e))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut w = XmlWriter::new();
        w.leaf("error", &[a("kind", error_kind(&self.0))], &self.0.to_string());
        xml_response(status_of(&self.0), w.finish())
    }
}

type ApiResult = Result<Response, ApiError>;

fn item_document(item: &RmtItem) -> String {
    let mut w = XmlWriter::new();
    item_to_xml(&mut w, item);
    w.finish()
}

async fn post_items(State(store): State<SharedStore>, body: String) -> ApiResult {
    let item = item_from_xml(&xml::parse(&body)?)?;
    let stored = store.write(|s| {
        let id = s.post_item(item)?;
        Ok(s.get(&id).cloned().expect("just inserted"))
    })?;
    Ok(xml_response(StatusCode::CREATED, item_document(&stored)))
}

async fn get_item(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult {
    let item = store
        .read(|s| s.get(&id).cloned())
        .ok_or(RmtError::UnknownId(id))?;
    Ok(xml_response(StatusCode::OK, item_document(&item)))
}

async fn list_items(
    State(store): State<SharedStore>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let kind: Option<ItemKind> = match q.get("kind").filter(|k| !k.is_empty()) {
        Some(k) => Some(k.parse()?),
        None => None,
    };
    let tag = q.get("config_tag").map(String::as_str);
    let body = store.read(|s| {
        let mut w = XmlWriter::new();
        w.open("items", &[]);
        for item in s.query(kind, tag) {
            item_to_xml(&mut w, item);
        }
        w.close("items");
        w.finish()
    });
    Ok(xml_response(StatusCode::OK, body))
}

async fn post_relationship(State(store): State<SharedStore>, body: String) -> ApiResult {
    let rel = rel_from_xml(&xml::parse(&body)?)?;
    store.write(|s| s.post_relationship(rel.clone()))?;
    let mut w = XmlWriter::new();
    rel_to_xml(&mut w, &rel);
    Ok(xml_response(StatusCode::CREATED, w.finish()))
}

async fn post_state(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult {
    let el = xml::parse(&body)?;
    el.expect_name("state")?;
    let to: ReviewState = el.text.trim().parse()?;
    let item = store.write(|s| {
        s.set_review_state(&id, to)?;
        Ok(s.get(&id).cloned().expect("exists"))
    })?;
    Ok(xml_response(StatusCode::OK, item_document(&item)))
}

async fn post_result(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult {
    let el = xml::parse(&body)?;
    el.expect_name("result")?;
    let status: TestStatus = el.req_attr("status")?.parse()?;
    let raw = el.req_attr("coverage")?;
    let coverage: f64 = raw
        .parse()
        .map_err(|_| RmtError::Validation(format!("coverage `{raw}`")))?;
    let link = el.attr("link").unwrap_or_default().to_string();
    let item = store.write(|s| {
        s.update_test_status(&id, status, coverage, &link)?;
        Ok(s.get(&id).cloned().expect("exists"))
    })?;
    Ok(xml_response(StatusCode::OK, item_document(&item)))
}

async fn post_derive(State(store): State<SharedStore>, body: String) -> ApiResult {
    let cfg = parse_config(&body).map_err(RmtError::from)?;
    let report = store.write(|s| s.derive_subset(&cfg))?;
    Ok(xml_response(StatusCode::OK, subset_report_to_xml(&report)))
}

async fn export_ipvs(
    State(store): State<SharedStore>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let tag = q
        .get("config_tag")
        .ok_or_else(|| RmtError::Validation("config_tag query parameter required".into()))?;
    let doc = store.read(|s| s.export_ipvs(tag))?;
    Ok(xml_response(StatusCode::OK, doc))
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/items", post(post_items).get(list_items))
        .route("/items/{id}", get(get_item))
        .route("/items/{id}/state", post(post_state))
        .route("/relationships", post(post_relationship))
        .route("/testcases/{id}/result", post(post_result))
        .route("/derive", post(post_derive))
        .route("/export/ipvs", get(export_ipvs))
        .with_state(store)
}

/// Serves until `shutdown` resolves, then flushes the store.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: SharedStore,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    store.flush().map_err(std::io::Error::other)
}

/// Serves on `bind` until ctrl-c, then flushes the store. `ready` receives
/// the bound address.
pub fn serve_until_interrupt(
    store: SharedStore,
    bind: SocketAddr,
    ready: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        ready(listener.local_addr()?);
        serve(listener, store, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}

/// A server running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn start(store: SharedStore, bind: SocketAddr) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(bind))?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(listener, store, async {
                let _ = stopped.await;
            }))
        });
        Ok(ServerHandle {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .map_err(|_| std::io::Error::other("server thread panicked"))?,
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] ureq::Error),
    #[error("read body: {0}")]
    Body(#[from] std::io::Error),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error(transparent)]
    Rmt(#[from] RmtError),
    #[error(transparent)]
    Xml(#[from] xml::XmlError),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

/// Blocking client for the endpoints above.
#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(base_url: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Client {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn finish(resp: ureq::http::Response<ureq::Body>) -> Result<(u16, String), ClientError> {
        let status = resp.status().as_u16();
        let mut body = String::new();
        resp.into_body().into_reader().read_to_string(&mut body)?;
        if status >= 400 {
            return Err(ClientError::Status { status, body });
        }
        Ok((status, body))
    }

    pub fn get(&self, path: &str) -> Result<(u16, String), ClientError> {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call()?)
    }

    pub fn post(&self, path: &str, body: &str) -> Result<(u16, String), ClientError> {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .header("content-type", "application/xml")
                .send(body)?,
        )
    }

    pub fn post_item(&self, item: &RmtItem) -> Result<String, ClientError> {
        let mut w = XmlWriter::new();
        item_to_xml(&mut w, item);
        let (_, body) = self.post("/items", &w.finish())?;
        Ok(item_from_xml(&xml::parse(&body)?)?.id)
    }

    /// `Ok(None)` on 404.
    pub fn get_item(&self, id: &str) -> Result<Option<RmtItem>, ClientError> {
        match self.get(&format!("/items/{id}")) {
            Ok((_, body)) => Ok(Some(item_from_xml(&xml::parse(&body)?)?)),
            Err(e) if e.status() == Some(404) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn post_relationship(&self, rel: &Relationship) -> Result<(), ClientError> {
        let mut w = XmlWriter::new();
        rel_to_xml(&mut w, rel);
        self.post("/relationships", &w.finish()).map(|_| ())
    }

    pub fn set_review_state(&self, id: &str, to: ReviewState) -> Result<(), ClientError> {
        let mut w = XmlWriter::new();
        w.leaf("state", &[], to.as_str());
        self.post(&format!("/items/{id}/state"), &w.finish()).map(|_| ())
    }

    pub fn update_test_status(
        &self,
        id: &str,
        status: TestStatus,
        coverage_pct: f64,
        link: &str,
    ) -> Result<(), ClientError> {
        let mut w = XmlWriter::new();
        w.empty(
            "result",
            &[
                a("status", status.as_str()),
                a("coverage", coverage_pct.to_string()),
                a("link", link),
            ],
        );
        self.post(&format!("/testcases/{id}/result"), &w.finish())
            .map(|_| ())
    }

    pub fn derive(&self, config_text: &str) -> Result<SubsetReport, ClientError> {
        let (_, body) = self.post("/derive", config_text)?;
        Ok(subset_report_from_xml(&body)?)
    }

    pub fn export_ipvs(&self, config_tag: &str) -> Result<String, ClientError> {
        self.get(&format!("/export/ipvs?config_tag={config_tag}"))
            .map(|(_, b)| b)
    }
}
