//! Blocking HTTP front end: a fixed pool of workers pulling from one
//! listener and handing each request to [`Api::handle`].

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Request, Server};

use crate::api::{Api, Response};
use crate::ServiceError;

/// Requests with larger bodies are refused with 413.
pub const MAX_BODY_BYTES: u64 = 1 << 20;

pub struct HttpServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl HttpServer {
    /// Binds `addr` (port 0 picks a free port) and starts `workers` threads.
    pub fn start(api: Arc<Api>, addr: &str, workers: usize) -> Result<Self, ServiceError> {
        let server = Server::http(addr).map_err(|e| ServiceError::Bind(format!("{addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| ServiceError::Bind(format!("{addr}: not an IP listener")))?;
        let server = Arc::new(server);
        let workers = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let api = Arc::clone(&api);
                std::thread::spawn(move || {
                    // `recv` fails once the server is unblocked for shutdown
                    while let Ok(request) = server.recv() {
                        respond(&api, request);
                    }
                })
            })
            .collect();
        Ok(Self { server, addr, workers })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until every worker exits, which only happens on shutdown.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn shutdown(self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        self.join();
    }
}

fn respond(api: &Api, mut request: Request) {
    let declared = request.body_length().unwrap_or(0) as u64;
    let response = if declared > MAX_BODY_BYTES {
        Response::error(413, "BODY_TOO_LARGE", format!("body exceeds {MAX_BODY_BYTES} bytes"))
    } else {
        let mut body = Vec::new();
        let read = request.as_reader().take(MAX_BODY_BYTES + 1).read_to_end(&mut body);
        match read {
            Err(e) => Response::error(400, "BAD_BODY", e.to_string()),
            Ok(_) if body.len() as u64 > MAX_BODY_BYTES => {
                Response::error(413, "BODY_TOO_LARGE", format!("body exceeds {MAX_BODY_BYTES} bytes"))
            }
            Ok(_) => api.handle(method_name(request.method()), request.url(), &body),
        }
    };
    let text = response.body.to_string();
    let header = Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header");
    let reply = tiny_http::Response::from_string(text).with_status_code(response.status).with_header(header);
    // the client may have gone away; nothing useful to do about it
    let _ = request.respond(reply);
}

fn method_name(m: &Method) -> &str {
    match m {
        Method::Get => "GET",
        Method::Post => "POST",
        Method::Put => "PUT",
        Method::Delete => "DELETE",
        Method::Head => "HEAD",
        Method::Patch => "PATCH",
        Method::Options => "OPTIONS",
        Method::Connect => "CONNECT",
        Method::Trace => "TRACE",
        Method::NonStandard(s) => s.as_str(),
    }
}
