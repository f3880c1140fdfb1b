//! The S3-compatible adapter against an in-process mock store, and the
//! facade's equivalence across adapters.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use multifaas::client::{
    facade, Adapter, ClientError, CredentialStore, Credentials, ObjectLocator, Params, ProviderRef,
    PutOptions, RegistryBuilder, S3HttpAdapter, SimProviderSpec,
};
use proptest::prelude::*;
use serde_json::Value;
use tiny_http::{Header, Response, Server};

const PAGE: usize = 2;

#[derive(Default)]
struct Store {
    buckets: BTreeSet<String>,
    objects: BTreeMap<(String, String), Vec<u8>>,
    auth_headers: Vec<String>,
}

struct MockS3 {
    server: Arc<Server>,
    store: Arc<Mutex<Store>>,
    handle: Option<JoinHandle<()>>,
}

impl Drop for MockS3 {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            h.join().ok();
        }
    }
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(b) = u8::from_str_radix(&s[i + 1..i + 3], 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8(out).unwrap()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn error_xml(status: u16, code: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    let body = format!("<?xml version=\"1.0\"?><Error><Code>{code}</Code><Message>{code}</Message></Error>");
    Response::from_data(body.into_bytes()).with_status_code(status)
}

fn handle(store: &Mutex<Store>, mut req: tiny_http::Request) {
    let mut body = Vec::new();
    req.as_reader().read_to_end(&mut body).unwrap();
    let url = url::Url::parse(&format!("http://mock{}", req.url())).unwrap();
    let path = percent_decode(url.path().trim_start_matches('/'));
    let (bucket, key) = match path.split_once('/') {
        Some((b, k)) => (b.to_string(), Some(k.to_string())),
        None => (path.clone(), None),
    };
    let mut s = store.lock().unwrap();
    if let Some(h) = req.headers().iter().find(|h| h.field.equiv("Authorization")) {
        s.auth_headers.push(h.value.to_string());
    }
    let method = req.method().as_str().to_string();
    if method == "HEAD" && bucket.is_empty() {
        req.respond(Response::empty(200)).ok();
        return;
    }
    if !s.buckets.contains(&bucket) {
        req.respond(error_xml(404, "NoSuchBucket")).ok();
        return;
    }
    let etag = |b: &[u8]| Header::from_bytes("ETag", format!("\"{:x}\"", b.len() * 31 + 7)).unwrap();
    let resp = match (method.as_str(), key) {
        ("PUT", Some(k)) => {
            let h = etag(&body);
            s.objects.insert((bucket, k), body);
            Response::empty(200).with_header(h).boxed()
        }
        ("GET", Some(k)) => match s.objects.get(&(bucket, k)) {
            Some(data) => Response::from_data(data.clone()).with_header(etag(data)).boxed(),
            None => error_xml(404, "NoSuchKey").boxed(),
        },
        ("HEAD", Some(k)) => match s.objects.get(&(bucket, k)) {
            Some(data) => Response::empty(200)
                .with_header(etag(data))
                .with_header(Header::from_bytes("Content-Length", data.len().to_string()).unwrap())
                .boxed(),
            None => Response::empty(404).boxed(),
        },
        ("DELETE", Some(k)) => {
            s.objects.remove(&(bucket, k));
            Response::empty(204).boxed()
        }
        ("GET", None) => {
            let q: BTreeMap<String, String> = url.query_pairs().into_owned().collect();
            let prefix = q.get("prefix").cloned().unwrap_or_default();
            let after = q.get("continuation-token").cloned().unwrap_or_default();
            let keys: Vec<&String> = s
                .objects
                .keys()
                .filter(|(b, k)| *b == bucket && k.starts_with(&prefix) && *k > after)
                .map(|(_, k)| k)
                .collect();
            let page = &keys[..keys.len().min(PAGE)];
            let truncated = keys.len() > PAGE;
            let mut xml = String::from("<?xml version=\"1.0\"?><ListBucketResult>");
            for k in page {
                xml.push_str(&format!("<Contents><Key>{}</Key></Contents>", xml_escape(k)));
            }
            xml.push_str(&format!("<IsTruncated>{truncated}</IsTruncated>"));
            if truncated {
                xml.push_str(&format!(
                    "<NextContinuationToken>{}</NextContinuationToken>",
                    xml_escape(page.last().unwrap())
                ));
            }
            xml.push_str("</ListBucketResult>");
            Response::from_data(xml.into_bytes()).boxed()
        }
        _ => error_xml(400, "BadRequest").boxed(),
    };
    req.respond(resp).ok();
}

fn mock(buckets: &[&str]) -> (MockS3, String) {
    let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
    let addr = format!("http://{}", server.server_addr().to_ip().unwrap());
    let store = Arc::new(Mutex::new(Store {
        buckets: buckets.iter().map(|b| b.to_string()).collect(),
        ..Store::default()
    }));
    let (srv, st) = (server.clone(), store.clone());
    let handle = std::thread::spawn(move || {
        for req in srv.incoming_requests() {
            handle(&st, req);
        }
    });
    (MockS3 { server, store, handle: Some(handle) }, addr)
}

/// Records every lookup so tests can check credentials are read per request.
#[derive(Default)]
struct RecordingStore {
    lookups: Mutex<Vec<String>>,
}

impl CredentialStore for RecordingStore {
    fn lookup(&self, credentials_ref: &str) -> Result<Credentials, ClientError> {
        self.lookups.lock().unwrap().push(credentials_ref.to_string());
        match credentials_ref {
            "keys" => Ok(Credentials::new([
                ("aws_access_key_id", "AKIDEXAMPLE"),
                ("aws_secret_access_key", "wJalrXUtnFEMI/K7MDENG+bPxRfiCYEXAMPLEKEY"),
            ])),
            "token" => Ok(Credentials::new([("token", "t0ken")])),
            other => Err(ClientError::Credentials(format!("no entry {other}"))),
        }
    }
}

fn adapter(addr: &str, creds_ref: &str) -> (S3HttpAdapter, Arc<RecordingStore>) {
    let store = Arc::new(RecordingStore::default());
    let provider = ProviderRef::new("r2", addr, "auto", creds_ref).unwrap();
    (S3HttpAdapter::new(provider, store.clone()), store)
}

fn loc(a: &S3HttpAdapter, bucket: &str, key: &str) -> ObjectLocator {
    ObjectLocator::new(a.provider().clone(), bucket, key).unwrap()
}

#[test]
fn put_get_head_delete() {
    let (m, addr) = mock(&["data"]);
    let (a, creds) = adapter(&addr, "keys");
    let l = loc(&a, "data", "images/cat 1.jpg");
    let meta = a.put_object(&l, b"meow", &PutOptions::default()).unwrap();
    assert_eq!(meta.size, 4);
    assert!(!meta.etag.is_empty());
    assert_eq!(a.get_object(&l, None).unwrap(), b"meow");
    assert_eq!(a.head_object(&l).unwrap().size, 4);
    a.delete_object(&l).unwrap();
    a.delete_object(&l).unwrap();
    assert!(a.get_object(&l, None).unwrap_err().is_not_found());
    assert!(matches!(a.head_object(&l), Err(ClientError::NotFound { .. })));
    assert_eq!(creds.lookups.lock().unwrap().len(), 7);
    let auth = m.store.lock().unwrap().auth_headers.clone();
    assert_eq!(auth.len(), 7);
    assert!(auth.iter().all(|h| h.starts_with("AWS4-HMAC-SHA256 Credential=AKIDEXAMPLE/")));
}

#[test]
fn missing_bucket_and_key_are_distinct() {
    let (_m, addr) = mock(&["data"]);
    let (a, _) = adapter(&addr, "keys");
    assert!(matches!(a.get_object(&loc(&a, "data", "nope"), None), Err(ClientError::NotFound { .. })));
    assert!(matches!(a.get_object(&loc(&a, "other", "k"), None), Err(ClientError::NoSuchBucket { .. })));
    assert!(matches!(a.list_objects("other", ""), Err(ClientError::NoSuchBucket { .. })));
}

#[test]
fn list_follows_continuation_tokens() {
    let (_m, addr) = mock(&["data"]);
    let (a, _) = adapter(&addr, "keys");
    for k in ["a/1", "a/2", "a/3", "a/4", "a/5", "b/1"] {
        a.put_object(&loc(&a, "data", k), k.as_bytes(), &PutOptions::default()).unwrap();
    }
    assert_eq!(a.list_objects("data", "a/").unwrap(), vec!["a/1", "a/2", "a/3", "a/4", "a/5"]);
    assert_eq!(a.list_objects("data", "").unwrap().len(), 6);
}

#[test]
fn static_token_signer_sends_bearer() {
    let (m, addr) = mock(&["data"]);
    let (a, _) = adapter(&addr, "token");
    a.put_object(&loc(&a, "data", "k"), b"v", &PutOptions::default()).unwrap();
    assert_eq!(m.store.lock().unwrap().auth_headers, vec!["Bearer t0ken"]);
}

#[test]
fn missing_credentials_fail_before_sending() {
    let (m, addr) = mock(&["data"]);
    let (a, creds) = adapter(&addr, "absent");
    assert!(matches!(a.get_object(&loc(&a, "data", "k"), None), Err(ClientError::Credentials(_))));
    assert_eq!(creds.lookups.lock().unwrap().as_slice(), ["absent"]);
    assert!(m.store.lock().unwrap().auth_headers.is_empty());
}

#[test]
fn closed_port_is_unreachable() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let (a, _) = adapter(&format!("http://127.0.0.1:{port}"), "keys");
    assert!(matches!(a.probe(), Err(ClientError::Unreachable { .. })));
}

#[test]
fn functions_are_not_offered() {
    let (_m, addr) = mock(&["data"]);
    let (a, _) = adapter(&addr, "keys");
    assert!(!a.capabilities().functions);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip(key in "[a-z0-9]{1,8}(/[a-zA-Z0-9 ._-]{1,12}){0,2}", body in proptest::collection::vec(any::<u8>(), 0..4096)) {
        let (_m, addr) = mock(&["data"]);
        let (a, _) = adapter(&addr, "keys");
        let l = loc(&a, "data", &key);
        a.put_object(&l, &body, &PutOptions::default()).unwrap();
        prop_assert_eq!(a.get_object(&l, None).unwrap(), body.clone());
        prop_assert_eq!(a.head_object(&l).unwrap().size, body.len() as u64);
        prop_assert_eq!(a.list_objects("data", "").unwrap(), vec![key.clone()]);
    }
}

/// Drops fields that legitimately differ between backends.
fn comparable(mut v: Value) -> Value {
    if let Some(o) = v.as_object_mut() {
        o.remove("ETag");
        o.remove("VersionId");
    }
    v
}

#[test]
fn facade_behaves_the_same_on_both_adapters() {
    let (_m, addr) = mock(&["data"]);
    let mut b = RegistryBuilder::new().with_credentials(Arc::new(RecordingStore::default()));
    b.register_simulated(
        ProviderRef::simulated("sim"),
        SimProviderSpec { buckets: vec!["data".into()], ..SimProviderSpec::default() },
    )
    .unwrap();
    b.register_adapter(ProviderRef::new("r2", &addr, "auto", "keys").unwrap(), "s3-compatible-http".parse().unwrap())
        .unwrap();
    let reg = Arc::new(b.build());

    let script: Vec<(&str, Params)> = vec![
        ("PutObject", Params::new().with("Bucket", "data").with("Key", "x/1").with("Body", b"one".to_vec())),
        ("PutObject", Params::new().with("Bucket", "data").with("Key", "x/2").with("Body", "two")),
        ("GetObject", Params::new().with("Bucket", "data").with("Key", "x/1")),
        ("HeadObject", Params::new().with("Bucket", "data").with("Key", "x/2")),
        ("ListObjectsV2", Params::new().with("Bucket", "data").with("Prefix", "x/")),
        ("DeleteObject", Params::new().with("Bucket", "data").with("Key", "x/1")),
        ("GetObject", Params::new().with("Bucket", "data").with("Key", "x/1")),
        ("GetObject", Params::new().with("Bucket", "nope").with("Key", "x/1")),
        ("ListObjectsV2", Params::new().with("Bucket", "data")),
    ];
    let sim = facade("s3", reg.clone(), "sim").unwrap();
    let http = facade("s3", reg.clone(), "r2").unwrap();
    for (verb, params) in script {
        let a = sim.call(verb, params.clone()).unwrap();
        let b = http.call(verb, params).unwrap();
        assert_eq!(comparable(a.fields), comparable(b.fields), "{verb}");
        assert_eq!(a.body, b.body, "{verb}");
    }
    let err = http.call("GetObject", Params::new().with("Bucket", "data").with("Key", "k").with("Range", "0-1"));
    assert!(matches!(err, Err(ClientError::UnmappedParameters { .. })));
}
