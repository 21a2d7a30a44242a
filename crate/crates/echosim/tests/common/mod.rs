#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use echosim::protocol::{ClientMessage, ServerMessage, StateUpdate};
use futures::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> Self {
        let (ws, _) = connect_async(format!("ws://{addr}/ws")).await.expect("websocket connect");
        Self { ws }
    }

    pub async fn send(&mut self, msg: &ClientMessage) {
        let text = serde_json::to_string(msg).unwrap();
        self.ws.send(Message::Text(text.into())).await.unwrap();
    }

    pub async fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::Text(text.to_owned().into())).await.unwrap();
    }

    /// Next server message, or None on timeout or close.
    pub async fn recv(&mut self, within: Duration) -> Option<ServerMessage> {
        let deadline = tokio::time::Instant::now() + within;
        loop {
            let frame = tokio::time::timeout_at(deadline, self.ws.next()).await.ok()??.ok()?;
            match frame {
                Message::Text(t) => return Some(serde_json::from_str(t.as_str()).expect("server sends valid JSON")),
                Message::Close(_) => return None,
                _ => {}
            }
        }
    }

    /// Collects messages until `stop` matches one or `within` elapses.
    pub async fn collect_until(
        &mut self,
        within: Duration,
        mut stop: impl FnMut(&ServerMessage) -> bool,
    ) -> Vec<ServerMessage> {
        let deadline = tokio::time::Instant::now() + within;
        let mut out = Vec::new();
        while let Some(m) = self.recv(deadline.saturating_duration_since(tokio::time::Instant::now())).await {
            let done = stop(&m);
            out.push(m);
            if done {
                break;
            }
        }
        out
    }
}

pub fn updates(msgs: &[ServerMessage]) -> Vec<&StateUpdate> {
    msgs.iter()
        .filter_map(|m| match m {
            ServerMessage::StateUpdate(u) => Some(u),
            _ => None,
        })
        .collect()
}

pub fn completed(m: &ServerMessage) -> bool {
    matches!(m, ServerMessage::StateUpdate(u) if u.completed)
}

pub fn probe(yaw: f64, pitch: f64, sensor: Option<usize>) -> ClientMessage {
    let mut contacts = [false; 5];
    if let Some(s) = sensor {
        contacts[s] = true;
    }
    ClientMessage::VirtualProbe { yaw, pitch, roll: 0.0, contacts }
}

pub fn repo_file(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}
