//! Adapters reached over HTTP or a child process's stdio.
//!
//! Both carry the line protocol of [`super::wire`]. Over HTTP a batch is one
//! POST whose body holds one request per line; the response body holds one
//! response per line. Over stdio requests go to the child's stdin and
//! responses are read from its stdout, matched by id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::wire::{match_responses, parse_response_line, EncodeRequest, ResponseLine};
use super::{Concurrency, EmbeddingBackend, EmbeddingError, SentenceEncoding};

/// Requests written before reading answers back. Kept small so the child's
/// stdin pipe never fills while its stdout is still unread.
const STDIO_CHUNK: usize = 16;

fn request_body(requests: &[EncodeRequest]) -> Result<String, EmbeddingError> {
    let mut body = String::new();
    for r in requests {
        body.push_str(
            &serde_json::to_string(r).map_err(|e| EmbeddingError::Transport(e.to_string()))?,
        );
        body.push('\n');
    }
    Ok(body)
}

/// `remote:<url>` backend.
#[derive(Debug)]
pub struct RemoteBackend {
    url: String,
    model: String,
    agent: ureq::Agent,
    pipelined: bool,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, pipelined: bool) -> Self {
        let url = url.into();
        Self {
            model: format!("remote:{url}"),
            url,
            agent: ureq::Agent::new_with_defaults(),
            pipelined,
        }
    }

    fn post(&self, requests: &[EncodeRequest]) -> Result<Vec<SentenceEncoding>, EmbeddingError> {
        let body = request_body(requests)?;
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/x-ndjson")
            .send(body)
            .map_err(|e| EmbeddingError::Transport(format!("{}: {e}", self.url)))?;
        let reader = BufReader::new(resp.body_mut().as_reader());
        let mut lines = Vec::with_capacity(requests.len());
        for line in reader.lines() {
            let line = line.map_err(|e| EmbeddingError::Transport(e.to_string()))?;
            if !line.trim().is_empty() {
                lines.push(parse_response_line(&line)?);
            }
        }
        match_responses(requests, lines)
    }
}

impl EmbeddingBackend for RemoteBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn concurrency(&self) -> Concurrency {
        if self.pipelined {
            Concurrency::Unrestricted
        } else {
            Concurrency::Serialized
        }
    }

    fn encode(&self, sentence_id: &str, tokens: &[String]) -> Result<SentenceEncoding, EmbeddingError> {
        let req = EncodeRequest {
            id: sentence_id.to_owned(),
            tokens: tokens.to_vec(),
        };
        Ok(self.post(std::slice::from_ref(&req))?.remove(0))
    }

    fn encode_batch(&self, requests: &[EncodeRequest]) -> Result<Vec<SentenceEncoding>, EmbeddingError> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        self.post(requests)
    }
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// `subprocess:<command>` backend. The command runs under `sh -c`.
pub struct SubprocessBackend {
    command: String,
    model: String,
    io: Mutex<ChildIo>,
}

impl std::fmt::Debug for SubprocessBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessBackend")
            .field("command", &self.command)
            .finish()
    }
}

impl SubprocessBackend {
    pub fn spawn(command: impl Into<String>) -> Result<Self, EmbeddingError> {
        let command = command.into();
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EmbeddingError::Transport(format!("spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            model: format!("subprocess:{command}"),
            command,
            io: Mutex::new(ChildIo { child, stdin, stdout }),
        })
    }

    fn exchange(&self, requests: &[EncodeRequest]) -> Result<Vec<SentenceEncoding>, EmbeddingError> {
        let mut io = self.io.lock().expect("subprocess lock");
        let transport = |e: std::io::Error| EmbeddingError::Transport(format!("adapter stdio: {e}"));
        io.stdin
            .write_all(request_body(requests)?.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(transport)?;
        let mut pending: HashMap<&str, ()> = requests.iter().map(|r| (r.id.as_str(), ())).collect();
        let mut lines: Vec<ResponseLine> = Vec::with_capacity(requests.len());
        let mut buf = String::new();
        while !pending.is_empty() {
            buf.clear();
            let n = io.stdout.read_line(&mut buf).map_err(transport)?;
            if n == 0 {
                return Err(EmbeddingError::Transport(format!(
                    "adapter {:?} closed its output with {} requests unanswered",
                    self.command,
                    pending.len()
                )));
            }
            if buf.trim().is_empty() {
                continue;
            }
            let line = parse_response_line(buf.trim_end())?;
            if pending.remove(line.id()).is_none() {
                return Err(EmbeddingError::Malformed(format!(
                    "response for unknown id {}",
                    line.id()
                )));
            }
            lines.push(line);
        }
        match_responses(requests, lines)
    }
}

impl Drop for SubprocessBackend {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

impl EmbeddingBackend for SubprocessBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Serialized
    }

    fn encode(&self, sentence_id: &str, tokens: &[String]) -> Result<SentenceEncoding, EmbeddingError> {
        let req = EncodeRequest {
            id: sentence_id.to_owned(),
            tokens: tokens.to_vec(),
        };
        Ok(self.exchange(std::slice::from_ref(&req))?.remove(0))
    }

    fn encode_batch(&self, requests: &[EncodeRequest]) -> Result<Vec<SentenceEncoding>, EmbeddingError> {
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(STDIO_CHUNK) {
            out.extend(self.exchange(chunk)?);
        }
        Ok(out)
    }
}
