#![allow(dead_code)]

use std::time::{Duration, Instant};

use futures::StreamExt;
use gmob_gcs::protocol::{SessionState, StreamFrame};
use gmob_gcs::{router, AppState, ServiceConfig, StreamOptions};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

pub struct Server {
    pub base: String,
    pub ws: String,
    pub http: reqwest::Client,
    pub data_dir: tempfile::TempDir,
}

pub async fn start() -> Server {
    start_with(StreamOptions::default()).await
}

pub async fn start_with(stream: StreamOptions) -> Server {
    let data_dir = tempfile::tempdir().unwrap();
    let state = AppState::new(ServiceConfig {
        data_dir: data_dir.path().to_path_buf(),
        stream,
    });
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    Server {
        base: format!("http://{addr}"),
        ws: format!("ws://{addr}"),
        http: reqwest::Client::new(),
        data_dir,
    }
}

impl Server {
    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self
            .http
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn create(&self, body: Value) -> String {
        let (status, v) = self.post("/v1/sessions", body).await;
        assert_eq!(status, 201, "{v}");
        v["id"].as_str().unwrap().to_string()
    }

    pub async fn accelerated(&self, seed: u64, config: Value) -> String {
        self.create(json!({"v": 1, "seed": seed, "clock": "accelerated", "config": config}))
            .await
    }

    pub async fn gesture(&self, id: &str, class_id: usize, confidence: f64) -> Value {
        let (status, v) = self
            .post(
                &format!("/v1/sessions/{id}/gestures"),
                json!({"v": 1, "class_id": class_id, "confidence": confidence}),
            )
            .await;
        assert_eq!(status, 200, "{v}");
        v
    }

    pub async fn state(&self, id: &str) -> SessionState {
        let r = self
            .http
            .get(format!("{}/v1/sessions/{id}", self.base))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status().as_u16(), 200);
        r.json().await.unwrap()
    }

    pub async fn wait_idle(&self, id: &str) -> SessionState {
        let t0 = Instant::now();
        loop {
            let s = self.state(id).await;
            assert!(s.error.is_none(), "{:?}", s.error);
            if s.idle {
                return s;
            }
            assert!(t0.elapsed() < Duration::from_secs(30), "session {id} never went idle");
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }

    pub async fn log_text(&self, id: &str, query: &str) -> (u16, String) {
        let r = self
            .http
            .get(format!("{}/v1/sessions/{id}/log{query}", self.base))
            .send()
            .await
            .unwrap();
        (r.status().as_u16(), r.text().await.unwrap())
    }

    /// Collect text frames until the server closes or `max` arrive.
    pub async fn read_ws(&self, path: &str, max: usize) -> Vec<StreamFrame> {
        let (mut ws, _) = tokio_tungstenite::connect_async(format!("{}{path}", self.ws))
            .await
            .unwrap();
        let mut out = Vec::new();
        while out.len() < max {
            let msg = tokio::time::timeout(Duration::from_secs(30), ws.next())
                .await
                .expect("stream stalled");
            match msg {
                Some(Ok(Message::Text(t))) => out.push(serde_json::from_str(&t).unwrap()),
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => {}
                Some(Err(e)) => panic!("{e}"),
            }
        }
        out
    }
}

pub fn ticks(frames: &[StreamFrame]) -> Vec<u64> {
    frames
        .iter()
        .filter_map(|f| match f {
            StreamFrame::Tick(t) => Some(t.tick),
            StreamFrame::Gap(_) => None,
        })
        .collect()
}
