#![allow(dead_code)]

use std::sync::Arc;

use app_planner_core::catalog::Catalog;
use app_planner_core::clock::{ManualClock, SequentialIds};
use app_planner_core::llm::{ChatProvider, MockProvider, ModelReply, ModelRequest, ProviderError};
use app_planner_core::store::ProjectStore;
use app_planner_server::{router, AppState, Planner, PlannerOptions};
use async_trait::async_trait;
use axum::http::HeaderValue;
use serde_json::Value;
use tempfile::TempDir;

pub struct TestServer {
    pub base: String,
    pub planner: Arc<Planner>,
    pub client: reqwest::Client,
    pub token: Option<String>,
    pub dir: TempDir,
}

pub struct Reply {
    pub status: u16,
    pub body: Value,
    pub headers: reqwest::header::HeaderMap,
}

/// A provider that always fails, as if every retry had timed out.
pub struct DownProvider;

#[async_trait]
impl ChatProvider for DownProvider {
    async fn complete(&self, _request: &ModelRequest) -> Result<ModelReply, ProviderError> {
        Err(ProviderError::Timeout { attempts: 3 })
    }
}

pub fn planner(dir: &std::path::Path, provider: Arc<dyn ChatProvider>) -> Planner {
    Planner::new(
        ProjectStore::open(dir).unwrap(),
        Arc::new(Catalog::default()),
        provider,
        Arc::new(ManualClock::new(1_700_000_000_000, 1000)),
        Arc::new(SequentialIds::new("proj")),
        PlannerOptions::default(),
    )
}

pub async fn start_with(provider: Arc<dyn ChatProvider>, token: Option<&str>, ui_origin: Option<&str>) -> TestServer {
    let dir = tempfile::tempdir().unwrap();
    let planner = Arc::new(planner(dir.path(), provider));
    let state = AppState {
        planner: planner.clone(),
        api_token: token.map(str::to_string),
    };
    let app = router(state, ui_origin.map(|o| HeaderValue::from_str(o).unwrap()));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    TestServer {
        base: format!("http://{addr}"),
        planner,
        client: reqwest::Client::new(),
        token: token.map(str::to_string),
        dir,
    }
}

pub async fn start() -> (TestServer, Arc<MockProvider>) {
    let mock = Arc::new(MockProvider::new(7));
    (start_with(mock.clone(), None, None).await, mock)
}

impl TestServer {
    pub async fn send(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> Reply {
        let mut req = self.client.request(method, format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        if let Some(b) = body {
            req = req
                .header("content-type", "application/json")
                .body(serde_json::to_vec(&b).unwrap());
        }
        self.finish(req).await
    }

    pub async fn finish(&self, req: reqwest::RequestBuilder) -> Reply {
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        let headers = resp.headers().clone();
        let bytes = resp.bytes().await.unwrap();
        let body = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("non-JSON body ({e}): {bytes:?}"))
        };
        Reply { status, body, headers }
    }

    pub async fn get(&self, path: &str) -> Reply {
        self.send(reqwest::Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: Value) -> Reply {
        self.send(reqwest::Method::POST, path, Some(body)).await
    }

    pub async fn patch(&self, path: &str, body: Value) -> Reply {
        self.send(reqwest::Method::PATCH, path, Some(body)).await
    }

    pub async fn create(&self, title: &str) -> String {
        let r = self.post("/projects", serde_json::json!({ "title": title })).await;
        assert_eq!(r.status, 201, "{}", r.body);
        r.body["project"]["id"].as_str().unwrap().to_string()
    }

    pub fn file_bytes(&self, id: &str) -> Vec<u8> {
        std::fs::read(self.planner.store().path_for(id)).unwrap()
    }
}
