//! Length-prefixed JSON messages between the session server and a display
//! client. A frame is the payload byte length in ASCII decimal, a newline, then
//! the UTF-8 JSON payload. Every payload carries `"v"` and `"type"`.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sim::{Axes, LogHeader, Outcome, ViewFrame};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialCondition {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub correction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Joystick state; held until replaced. Non-increasing `seq` is dropped.
    Input {
        seq: u64,
        axes: Axes,
    },
    ToggleCorrection {},
    /// Without a condition the next scheduled trial (or the base config) runs.
    StartTrial {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        condition: Option<TrialCondition>,
    },
    AbortTrial {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Ticks at `dt` of wall time; frames are decimated to the display rate.
    Realtime,
    /// One tick per accepted input; every frame is sent.
    Lockstep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        clock: ClockMode,
        config: LogHeader,
    },
    StateFrame {
        tick: u64,
        elapsed: f64,
        theta_deg: f64,
        correction: bool,
        status: TrialStatus,
        view: ViewFrame,
    },
    TrialEnd {
        outcome: Outcome,
        completion_time: Option<f64>,
        ticks: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_file: Option<String>,
    },
    Error {
        code: String,
        text: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Running,
    Success,
    Timeout,
    Aborted,
}

impl From<Option<Outcome>> for TrialStatus {
    fn from(o: Option<Outcome>) -> Self {
        match o {
            None => TrialStatus::Running,
            Some(Outcome::Success) => TrialStatus::Success,
            Some(Outcome::Timeout) => TrialStatus::Timeout,
            Some(Outcome::Aborted) => TrialStatus::Aborted,
        }
    }
}

impl ServerMessage {
    pub fn error(code: &str, text: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.into(),
            text: text.into(),
        }
    }
}

/// JSON payload with the protocol version merged in.
pub fn encode<T: Serialize>(msg: &T) -> String {
    let mut value = serde_json::to_value(msg).expect("wire messages serialize");
    if let Value::Object(map) = &mut value {
        map.insert("v".into(), Value::from(PROTOCOL_VERSION));
    }
    value.to_string()
}

pub fn decode<T: for<'de> Deserialize<'de>>(payload: &str) -> Result<T> {
    let mut value: Value =
        serde_json::from_str(payload).map_err(|e| Error::Wire(format!("bad JSON: {e}")))?;
    let map = value
        .as_object_mut()
        .ok_or_else(|| Error::Wire("payload is not an object".into()))?;
    match map.remove("v").and_then(|v| v.as_u64()) {
        Some(v) if v == PROTOCOL_VERSION as u64 => {}
        Some(v) => return Err(Error::Wire(format!("unsupported protocol version {v}"))),
        None => return Err(Error::Wire("missing protocol version".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::Wire(format!("bad message: {e}")))
}

pub fn write_frame(w: &mut impl Write, payload: &str) -> std::io::Result<()> {
    write!(w, "{}\n{payload}", payload.len())?;
    w.flush()
}

/// `Ok(None)` on a clean end of stream between frames.
pub fn read_frame(r: &mut impl BufRead) -> Result<Option<String>> {
    let mut len_line = String::new();
    let n = r
        .read_line(&mut len_line)
        .map_err(|e| Error::Wire(format!("read failed: {e}")))?;
    if n == 0 {
        return Ok(None);
    }
    let len: usize = len_line
        .trim_end_matches(['\n', '\r'])
        .parse()
        .map_err(|_| Error::Wire(format!("bad frame length {len_line:?}")))?;
    if len > MAX_FRAME_BYTES {
        return Err(Error::Wire(format!("frame of {len} bytes exceeds limit")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Wire(format!("truncated frame: {e}")))?;
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| Error::Wire("frame is not UTF-8".into()))
}

/// Blocking client for the session server.
pub struct WireClient {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl WireClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| Error::Wire(format!("connect: {e}")))?;
        stream.set_nodelay(true).ok();
        let reader = stream
            .try_clone()
            .map_err(|e| Error::Wire(format!("clone: {e}")))?;
        Ok(WireClient {
            writer: stream,
            reader: BufReader::new(reader),
        })
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<()> {
        write_frame(&mut self.writer, &encode(msg)).map_err(|e| Error::Wire(format!("send: {e}")))
    }

    pub fn recv(&mut self) -> Result<ServerMessage> {
        match read_frame(&mut self.reader)? {
            Some(p) => decode(&p),
            None => Err(Error::Wire("server closed the connection".into())),
        }
    }

    pub fn stream(&self) -> &TcpStream {
        &self.writer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn messages_round_trip() {
        let msgs = vec![
            ClientMessage::Input {
                seq: 3,
                axes: Axes::new(0.1, -1.0, 1.0 / 3.0),
            },
            ClientMessage::ToggleCorrection {},
            ClientMessage::StartTrial { condition: None },
            ClientMessage::StartTrial {
                condition: Some(TrialCondition {
                    roll_deg: 90.0,
                    pitch_deg: 45.0,
                    yaw_deg: 0.0,
                    correction: true,
                }),
            },
            ClientMessage::AbortTrial {},
        ];
        for m in msgs {
            let payload = encode(&m);
            assert!(payload.contains("\"v\":1"));
            assert_eq!(decode::<ClientMessage>(&payload).unwrap(), m);
        }
        let payload = encode(&ServerMessage::error("busy", "trial running"));
        assert_eq!(
            decode::<ServerMessage>(&payload).unwrap(),
            ServerMessage::error("busy", "trial running")
        );
    }

    #[test]
    fn wire_names() {
        assert_eq!(
            encode(&ClientMessage::ToggleCorrection {}),
            r#"{"type":"toggle_correction","v":1}"#
        );
        let m: ClientMessage =
            decode(r#"{"v":1,"type":"input","seq":1,"axes":[0.5,0,-0.5]}"#).unwrap();
        assert_eq!(
            m,
            ClientMessage::Input {
                seq: 1,
                axes: Axes::new(0.5, 0.0, -0.5)
            }
        );
    }

    #[test]
    fn version_checked() {
        assert!(decode::<ClientMessage>(r#"{"v":2,"type":"abort_trial"}"#).is_err());
        assert!(decode::<ClientMessage>(r#"{"type":"abort_trial"}"#).is_err());
        assert!(decode::<ClientMessage>(r#"{"v":1,"type":"warp"}"#).is_err());
    }

    #[test]
    fn framing() {
        let mut buf = Vec::new();
        write_frame(&mut buf, "{\"a\":1}").unwrap();
        write_frame(&mut buf, "{}").unwrap();
        assert_eq!(buf, b"7\n{\"a\":1}2\n{}");
        let mut r = Cursor::new(buf);
        assert_eq!(read_frame(&mut r).unwrap().as_deref(), Some("{\"a\":1}"));
        assert_eq!(read_frame(&mut r).unwrap().as_deref(), Some("{}"));
        assert_eq!(read_frame(&mut r).unwrap(), None);
        assert!(read_frame(&mut Cursor::new(b"x\n{}".to_vec())).is_err());
        assert!(read_frame(&mut Cursor::new(b"10\n{}".to_vec())).is_err());
    }
}
