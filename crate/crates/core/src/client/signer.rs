//! Request signing for the HTTP adapter.

use chrono::{DateTime, Utc};
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use url::Url;

use super::{ClientError, Credentials};

/// The parts of an HTTP request a signer reads and extends.
#[derive(Debug, Clone)]
pub struct SignableRequest {
    pub method: String,
    pub url: Url,
    /// Lower-case names.
    pub headers: Vec<(String, String)>,
    /// Hex SHA-256 of the body.
    pub payload_sha256: String,
    pub timestamp: DateTime<Utc>,
}

impl SignableRequest {
    pub fn new(method: &str, url: Url, body: &[u8], timestamp: DateTime<Utc>) -> Self {
        SignableRequest {
            method: method.to_string(),
            url,
            headers: Vec::new(),
            payload_sha256: hex::encode(Sha256::digest(body)),
            timestamp,
        }
    }

    pub fn set_header(&mut self, name: &str, value: impl Into<String>) {
        let name = name.to_ascii_lowercase();
        self.headers.retain(|(n, _)| *n != name);
        self.headers.push((name, value.into()));
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }
}

pub trait RequestSigner: Send + Sync {
    fn sign(&self, req: &mut SignableRequest, creds: &Credentials) -> Result<(), ClientError>;
}

/// `Authorization: Bearer <token>` from the `token` credential.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticTokenSigner;

impl RequestSigner for StaticTokenSigner {
    fn sign(&self, req: &mut SignableRequest, creds: &Credentials) -> Result<(), ClientError> {
        let token = creds.require("token")?;
        req.set_header("authorization", format!("Bearer {token}"));
        Ok(())
    }
}

/// AWS Signature Version 4 over `aws_access_key_id` / `aws_secret_access_key`.
#[derive(Debug, Clone)]
pub struct SigV4Signer {
    pub region: String,
    pub service: String,
}

impl SigV4Signer {
    pub fn s3(region: impl Into<String>) -> Self {
        SigV4Signer { region: region.into(), service: "s3".into() }
    }
}

type HmacSha256 = Hmac<Sha256>;

fn hmac(key: &[u8], data: &str) -> Vec<u8> {
    let mut mac = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(data.as_bytes());
    mac.finalize().into_bytes().to_vec()
}

/// RFC 3986 unreserved characters pass through; everything else is %XX.
fn uri_encode(s: &str, keep_slash: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            b'/' if keep_slash => out.push('/'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// Encodes a raw (undecoded) path for use in a URL and in the canonical request.
pub fn encode_path(raw: &str) -> String {
    uri_encode(raw, true)
}

fn canonical_query(url: &Url) -> String {
    let mut pairs: Vec<(String, String)> =
        url.query_pairs().map(|(k, v)| (uri_encode(&k, false), uri_encode(&v, false))).collect();
    pairs.sort();
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("&")
}

fn host_header(url: &Url) -> String {
    let host = url.host_str().unwrap_or_default();
    match url.port() {
        Some(p) => format!("{host}:{p}"),
        None => host.to_string(),
    }
}

impl SigV4Signer {
    /// Returns `(signed_headers, signature)` for a request whose headers
    /// already include `host` and `x-amz-date`.
    pub fn signature(&self, req: &SignableRequest, secret: &str) -> (String, String) {
        let amz_date = req.timestamp.format("%Y%m%dT%H%M%SZ").to_string();
        let date = req.timestamp.format("%Y%m%d").to_string();

        let mut headers: Vec<(String, String)> = req
            .headers
            .iter()
            .filter(|(n, _)| n != "authorization")
            .map(|(n, v)| (n.to_ascii_lowercase(), v.trim().to_string()))
            .collect();
        headers.sort();
        let signed_headers = headers.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(";");
        let canonical_headers: String = headers.iter().map(|(n, v)| format!("{n}:{v}\n")).collect();
        let path = if req.url.path().is_empty() { "/" } else { req.url.path() };
        let canonical_request = format!(
            "{}\n{}\n{}\n{}\n{}\n{}",
            req.method,
            path,
            canonical_query(&req.url),
            canonical_headers,
            signed_headers,
            req.payload_sha256
        );
        let scope = format!("{date}/{}/{}/aws4_request", self.region, self.service);
        let string_to_sign = format!(
            "AWS4-HMAC-SHA256\n{amz_date}\n{scope}\n{}",
            hex::encode(Sha256::digest(canonical_request.as_bytes()))
        );
        let k_date = hmac(format!("AWS4{secret}").as_bytes(), &date);
        let k_region = hmac(&k_date, &self.region);
        let k_service = hmac(&k_region, &self.service);
        let k_signing = hmac(&k_service, "aws4_request");
        (signed_headers, hex::encode(hmac(&k_signing, &string_to_sign)))
    }
}

impl RequestSigner for SigV4Signer {
    fn sign(&self, req: &mut SignableRequest, creds: &Credentials) -> Result<(), ClientError> {
        let key_id = creds.require("aws_access_key_id")?;
        let secret = creds.require("aws_secret_access_key")?;
        req.set_header("host", host_header(&req.url));
        req.set_header("x-amz-date", req.timestamp.format("%Y%m%dT%H%M%SZ").to_string());
        req.set_header("x-amz-content-sha256", req.payload_sha256.clone());
        let (signed_headers, signature) = self.signature(req, secret);
        let scope = format!(
            "{}/{}/{}/aws4_request",
            req.timestamp.format("%Y%m%d"),
            self.region,
            self.service
        );
        req.set_header(
            "authorization",
            format!(
                "AWS4-HMAC-SHA256 Credential={key_id}/{scope}, SignedHeaders={signed_headers}, \
                 Signature={signature}"
            ),
        );
        Ok(())
    }
}

/// Picks a signer from the credential keys: an explicit `signer` entry
/// (`sigv4` or `static-token`) wins, otherwise access keys imply SigV4 and a
/// `token` implies a bearer token.
pub fn signer_for(creds: &Credentials, region: &str) -> Result<Box<dyn RequestSigner>, ClientError> {
    let choice = match creds.get("signer") {
        Some(s) => s.to_string(),
        None if creds.get("aws_access_key_id").is_some() => "sigv4".into(),
        None if creds.get("token").is_some() => "static-token".into(),
        None => {
            return Err(ClientError::Credentials(
                "entry has neither access keys nor a token".into(),
            ))
        }
    };
    match choice.as_str() {
        "sigv4" => Ok(Box::new(SigV4Signer::s3(region))),
        "static-token" => Ok(Box::new(StaticTokenSigner)),
        other => Err(ClientError::Credentials(format!("unknown signer {other:?}"))),
    }
}
