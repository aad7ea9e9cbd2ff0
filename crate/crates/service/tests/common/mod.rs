#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use depthmatte::synth::SceneSpec;
use depthmatte::MatteParams;
use depthmatte_service::protocol::parse_frame;
use depthmatte_service::{spawn, ServiceConfig};
use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

pub const WAIT: Duration = Duration::from_secs(10);

/// Subject at 2 m in front of a wall at 4 m, so a 3 m threshold keeps the
/// subject and a 1.5 m threshold removes everything.
pub fn scene() -> SceneSpec {
    SceneSpec {
        subject_depth_m: 2.0,
        background_depth_m: 4.0,
        subject_color: [1.0, 0.9, 0.1],
        color_size: [64, 48],
        depth_size: [64, 48],
        ..SceneSpec::default()
    }
}

pub fn config() -> ServiceConfig {
    let mut c = ServiceConfig::synthetic(scene());
    c.default_background = "black".into();
    c.initial_params = MatteParams {
        depth_m: 3.0,
        ..MatteParams::default()
    };
    c
}

pub async fn start(config: ServiceConfig) -> SocketAddr {
    let (addr, _task) = spawn(config, "127.0.0.1:0".parse().unwrap()).await.unwrap();
    addr
}

pub async fn http_get(addr: SocketAddr, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n");
    s.write_all(req.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    timeout(WAIT, s.read_to_end(&mut raw)).await.unwrap().unwrap();
    let text = String::from_utf8_lossy(&raw).into_owned();
    let status = text[9..12].parse().unwrap();
    let body = text.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[derive(Debug)]
pub enum Event {
    Text(Value),
    Frame { index: u32, hash: u32, payload: Vec<u8> },
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub async fn connect(addr: SocketAddr, query: &str) -> Self {
        let (ws, _) = connect_async(format!("ws://{addr}/ws{query}")).await.unwrap();
        Self { ws }
    }

    pub async fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::Text(text.to_string())).await.unwrap();
    }

    pub async fn send(&mut self, v: Value) {
        self.send_raw(&v.to_string()).await;
    }

    pub async fn next_event(&mut self) -> Event {
        loop {
            let msg = timeout(WAIT, self.ws.next()).await.expect("timed out").unwrap().unwrap();
            match msg {
                Message::Text(t) => return Event::Text(serde_json::from_str(&t).unwrap()),
                Message::Binary(b) => {
                    let (index, hash, payload) = parse_frame(&b).expect("8-byte header");
                    return Event::Frame {
                        index,
                        hash,
                        payload: payload.to_vec(),
                    };
                }
                _ => continue,
            }
        }
    }

    /// Next text message other than per-frame timings.
    pub async fn reply(&mut self) -> Value {
        loop {
            if let Event::Text(v) = self.next_event().await {
                if v["type"] != "timings" {
                    return v;
                }
            }
        }
    }

    pub async fn frame(&mut self) -> (u32, u32, Vec<u8>) {
        loop {
            if let Event::Frame { index, hash, payload } = self.next_event().await {
                return (index, hash, payload);
            }
        }
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}

/// Pixels inside the subject's silhouette that are not black.
pub fn visible_subject_pixels(png: &[u8]) -> usize {
    let img = image::load_from_memory(png).unwrap().to_rgb8();
    let silhouette = scene().silhouette(0);
    img.pixels()
        .zip(silhouette.values())
        .filter(|(p, &s)| s > 0.0 && p.0.iter().any(|&c| c > 0))
        .count()
}

pub fn initial_hash() -> u32 {
    config().initial_params.snapshot_hash()
}
