//! Minimal static file responder for the browser client.

use std::io::Write;
use std::path::{Component, Path, PathBuf};

/// Parsed head of an HTTP request.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestHead {
    pub method: String,
    pub path: String,
    pub websocket: bool,
}

/// Parses a complete request head; `None` while more bytes are needed.
pub fn parse_head(buf: &[u8]) -> Result<Option<RequestHead>, String> {
    let mut headers = [httparse::EMPTY_HEADER; 64];
    let mut req = httparse::Request::new(&mut headers);
    match req.parse(buf) {
        Ok(httparse::Status::Partial) => Ok(None),
        Ok(httparse::Status::Complete(_)) => {
            let websocket = req
                .headers
                .iter()
                .any(|h| h.name.eq_ignore_ascii_case("upgrade") && String::from_utf8_lossy(h.value).eq_ignore_ascii_case("websocket"));
            Ok(Some(RequestHead {
                method: req.method.unwrap_or_default().to_owned(),
                path: req.path.unwrap_or("/").to_owned(),
                websocket,
            }))
        }
        Err(e) => Err(e.to_string()),
    }
}

/// Maps a request path onto a file below `root`, refusing anything that
/// would leave it.
pub fn resolve(root: &Path, request_path: &str) -> Option<PathBuf> {
    let path = request_path.split(['?', '#']).next().unwrap_or("/");
    let rel = path.trim_start_matches('/');
    let rel = if rel.is_empty() || rel.ends_with('/') { format!("{rel}index.html") } else { rel.to_owned() };
    let rel = Path::new(&rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    Some(root.join(rel))
}

pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "wasm" => "application/wasm",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

const FALLBACK_INDEX: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>omps steer</title></head>
<body><h1>omps steer server</h1>
<p>Connect a websocket client to this address. Send <code>{\"type\":\"hello\",\"proto\":1}</code>,
then <code>{\"type\":\"configure\",\"preset\":\"fig3-write-erase\"}</code> and <code>{\"type\":\"start\"}</code>.</p>
</body></html>
";

pub struct Response {
    pub status: u16,
    pub reason: &'static str,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Response {
    fn text(status: u16, reason: &'static str, body: &str) -> Self {
        Response { status, reason, content_type: "text/plain; charset=utf-8", body: body.as_bytes().to_vec() }
    }

    pub fn write_to(&self, mut w: impl Write, include_body: bool) -> std::io::Result<()> {
        write!(
            w,
            "HTTP/1.1 {} {}\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            self.status,
            self.reason,
            self.content_type,
            self.body.len()
        )?;
        if include_body {
            w.write_all(&self.body)?;
        }
        w.flush()
    }
}

/// Response to a plain (non-upgrade) request.
pub fn respond(head: &RequestHead, static_dir: Option<&Path>) -> Response {
    if head.method != "GET" && head.method != "HEAD" {
        return Response::text(405, "Method Not Allowed", "only GET and HEAD are supported\n");
    }
    let Some(root) = static_dir else {
        return match head.path.split('?').next() {
            Some("/") | Some("/index.html") => Response {
                status: 200,
                reason: "OK",
                content_type: "text/html; charset=utf-8",
                body: FALLBACK_INDEX.as_bytes().to_vec(),
            },
            _ => Response::text(404, "Not Found", "not found\n"),
        };
    };
    let Some(file) = resolve(root, &head.path) else {
        return Response::text(400, "Bad Request", "bad path\n");
    };
    match std::fs::read(&file) {
        Ok(body) => Response { status: 200, reason: "OK", content_type: content_type(&file), body },
        Err(_) => Response::text(404, "Not Found", "not found\n"),
    }
}
