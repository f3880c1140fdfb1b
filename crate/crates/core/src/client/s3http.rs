//! Generic S3-compatible object store over path-style REST.

use std::io::Read;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use serde::Deserialize;
use url::Url;

use super::signer::{encode_path, signer_for, SignableRequest};
use super::{
    Adapter, AdapterKind, Capabilities, ClientError, CredentialStore, FunctionRef, InvocationMode,
    InvocationReceipt, ObjectLocator, ObjectMeta, ProviderRef, PutOptions,
};
use crate::records::RequestId;

/// Responses above this size are rejected rather than buffered.
const MAX_BODY_BYTES: u64 = 256 * 1024 * 1024;

pub struct S3HttpAdapter {
    provider: ProviderRef,
    credentials: Arc<dyn CredentialStore>,
    agent: ureq::Agent,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct ErrorBody {
    #[serde(default)]
    code: String,
    #[serde(default)]
    message: String,
}

#[derive(Debug, Default, PartialEq)]
struct ListPage {
    keys: Vec<String>,
    is_truncated: bool,
    next_continuation_token: Option<String>,
}

/// Parses a ListObjectsV2 page. Text is kept verbatim because keys may
/// begin or end with whitespace, which serde-based XML decoding trims.
fn parse_list_page(xml: &str) -> Result<ListPage, String> {
    use quick_xml::events::Event;
    let mut reader = quick_xml::Reader::from_str(xml);
    reader.config_mut().trim_text(false);
    let mut path: Vec<String> = Vec::new();
    let mut text = String::new();
    let mut page = ListPage::default();
    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Start(e) => {
                path.push(String::from_utf8_lossy(e.local_name().as_ref()).into_owned());
                text.clear();
            }
            Event::Text(t) => text.push_str(&t.unescape().map_err(|e| e.to_string())?),
            Event::CData(t) => text.push_str(&String::from_utf8_lossy(&t)),
            Event::End(_) => {
                let joined = path.join("/");
                match joined.as_str() {
                    "ListBucketResult/Contents/Key" => page.keys.push(std::mem::take(&mut text)),
                    "ListBucketResult/IsTruncated" => page.is_truncated = text.trim() == "true",
                    "ListBucketResult/NextContinuationToken" => {
                        page.next_continuation_token = Some(std::mem::take(&mut text))
                    }
                    _ => {}
                }
                path.pop();
                text.clear();
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if path.is_empty() && !xml.contains("ListBucketResult") {
        return Err("not a ListBucketResult document".into());
    }
    Ok(page)
}

struct Response {
    status: u16,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

impl Response {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

impl S3HttpAdapter {
    pub fn new(provider: ProviderRef, credentials: Arc<dyn CredentialStore>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(5))
            .timeout(Duration::from_secs(120))
            .build();
        S3HttpAdapter { provider, credentials, agent }
    }

    fn url(&self, bucket: &str, key: Option<&str>) -> Url {
        let mut url = self.provider.endpoint.clone();
        let base = url.path().trim_end_matches('/').to_string();
        let raw = match key {
            Some(k) => format!("{base}/{bucket}/{k}"),
            None => format!("{base}/{bucket}"),
        };
        url.set_path(&encode_path(&raw));
        url
    }

    fn transport(&self, message: impl ToString) -> ClientError {
        ClientError::Transport {
            provider: self.provider.provider_id.clone(),
            message: message.to_string(),
        }
    }

    fn send(&self, method: &str, url: Url, body: &[u8]) -> Result<Response, ClientError> {
        let creds = self.credentials.lookup(&self.provider.credentials_ref)?;
        let mut signable = SignableRequest::new(method, url, body, Utc::now());
        signer_for(&creds, &self.provider.region)?.sign(&mut signable, &creds)?;

        let mut req = self.agent.request_url(method, &signable.url);
        for (name, value) in &signable.headers {
            if name != "host" {
                req = req.set(name, value);
            }
        }
        let result = if body.is_empty() && method != "PUT" { req.call() } else { req.send_bytes(body) };
        let resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(ureq::Error::Transport(t)) => return Err(self.transport(t)),
        };
        let status = resp.status();
        let headers = resp
            .headers_names()
            .into_iter()
            .filter_map(|n| resp.header(&n).map(|v| (n.clone(), v.to_string())))
            .collect();
        let mut body = Vec::new();
        if method != "HEAD" {
            resp.into_reader()
                .take(MAX_BODY_BYTES + 1)
                .read_to_end(&mut body)
                .map_err(|e| self.transport(e))?;
            if body.len() as u64 > MAX_BODY_BYTES {
                return Err(self.transport(format!("response exceeds {MAX_BODY_BYTES} bytes")));
            }
        }
        Ok(Response { status, headers, body })
    }

    fn error_for(&self, resp: &Response, bucket: &str, key: Option<&str>) -> ClientError {
        let parsed: ErrorBody = std::str::from_utf8(&resp.body)
            .ok()
            .and_then(|s| quick_xml::de::from_str(s).ok())
            .unwrap_or_default();
        let provider = self.provider.provider_id.clone();
        match (resp.status, parsed.code.as_str(), key) {
            (404, "NoSuchBucket", _) => ClientError::NoSuchBucket { provider, bucket: bucket.into() },
            (404, _, Some(k)) => {
                ClientError::NotFound { provider, bucket: bucket.into(), key: k.into() }
            }
            (404, _, None) => ClientError::NoSuchBucket { provider, bucket: bucket.into() },
            (status, code, _) => ClientError::Backend {
                provider,
                status,
                code: if code.is_empty() { "Unknown".into() } else { code.into() },
                message: parsed.message,
            },
        }
    }

    fn meta_from(&self, resp: &Response, fallback_size: u64) -> ObjectMeta {
        ObjectMeta {
            size: resp
                .header("content-length")
                .and_then(|v| v.parse().ok())
                .unwrap_or(fallback_size),
            etag: resp.header("etag").unwrap_or_default().to_string(),
            version: resp.header("x-amz-version-id").map(str::to_string),
        }
    }
}

impl Adapter for S3HttpAdapter {
    fn provider(&self) -> &ProviderRef {
        &self.provider
    }

    fn kind(&self) -> AdapterKind {
        AdapterKind::S3CompatibleHttp
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { object_storage: true, functions: false, storage_triggers: false }
    }

    /// Any HTTP response counts as reachable; only transport failures do not.
    fn probe(&self) -> Result<(), ClientError> {
        let endpoint = self.provider.endpoint.clone();
        match self.agent.request_url("HEAD", &endpoint).call() {
            Ok(_) | Err(ureq::Error::Status(..)) => Ok(()),
            Err(ureq::Error::Transport(t)) => Err(ClientError::Unreachable {
                provider: self.provider.provider_id.clone(),
                message: t.to_string(),
            }),
        }
    }

    fn put_object(
        &self,
        loc: &ObjectLocator,
        body: &[u8],
        _opts: &PutOptions,
    ) -> Result<ObjectMeta, ClientError> {
        let resp = self.send("PUT", self.url(&loc.bucket, Some(&loc.key)), body)?;
        if resp.status / 100 != 2 {
            return Err(self.error_for(&resp, &loc.bucket, None));
        }
        let mut meta = self.meta_from(&resp, body.len() as u64);
        meta.size = body.len() as u64;
        Ok(meta)
    }

    fn get_object(
        &self,
        loc: &ObjectLocator,
        _reader: Option<&ProviderRef>,
    ) -> Result<Vec<u8>, ClientError> {
        let resp = self.send("GET", self.url(&loc.bucket, Some(&loc.key)), &[])?;
        if resp.status != 200 {
            return Err(self.error_for(&resp, &loc.bucket, Some(&loc.key)));
        }
        Ok(resp.body)
    }

    fn head_object(&self, loc: &ObjectLocator) -> Result<ObjectMeta, ClientError> {
        let resp = self.send("HEAD", self.url(&loc.bucket, Some(&loc.key)), &[])?;
        if resp.status != 200 {
            return Err(self.error_for(&resp, &loc.bucket, Some(&loc.key)));
        }
        Ok(self.meta_from(&resp, 0))
    }

    fn delete_object(&self, loc: &ObjectLocator) -> Result<(), ClientError> {
        let resp = self.send("DELETE", self.url(&loc.bucket, Some(&loc.key)), &[])?;
        match resp.status {
            200 | 204 => Ok(()),
            _ => Err(self.error_for(&resp, &loc.bucket, None)),
        }
    }

    fn list_objects(&self, bucket: &str, prefix: &str) -> Result<Vec<String>, ClientError> {
        let mut keys = Vec::new();
        let mut token: Option<String> = None;
        loop {
            let mut url = self.url(bucket, None);
            {
                let mut q = url.query_pairs_mut();
                q.append_pair("list-type", "2");
                if !prefix.is_empty() {
                    q.append_pair("prefix", prefix);
                }
                if let Some(t) = &token {
                    q.append_pair("continuation-token", t);
                }
            }
            let resp = self.send("GET", url, &[])?;
            if resp.status != 200 {
                return Err(self.error_for(&resp, bucket, None));
            }
            let text = String::from_utf8_lossy(&resp.body);
            let page = parse_list_page(&text).map_err(|e| self.transport(format!("list: {e}")))?;
            keys.extend(page.keys);
            match (page.is_truncated, page.next_continuation_token) {
                (true, Some(t)) => token = Some(t),
                _ => break,
            }
        }
        keys.sort();
        keys.dedup();
        Ok(keys)
    }

    fn invoke_function(
        &self,
        _function: &FunctionRef,
        _payload: &[u8],
        _mode: InvocationMode,
        _request_id: RequestId,
    ) -> Result<InvocationReceipt, ClientError> {
        Err(ClientError::Capability {
            provider: self.provider.provider_id.clone(),
            capability: "functions",
            operation: "invoke_function".into(),
        })
    }
}
