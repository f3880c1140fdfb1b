//! S3-style verbs over the common interface.
//!
//! Each verb takes named parameters (`Bucket`, `Key`, `Body`, `Prefix`) and
//! returns an [`Envelope`] whose field names follow the S3 response shapes.
//! Every verb delegates to exactly one common-interface call; the
//! correspondence is [`FACADE_MAPPING`]. Unknown parameters are rejected, never
//! ignored.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use super::{ClientError, ObjectLocator, ProviderRef, Registry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Param {
    Str(String),
    Bytes(Vec<u8>),
}

impl From<&str> for Param {
    fn from(s: &str) -> Self {
        Param::Str(s.to_string())
    }
}

impl From<String> for Param {
    fn from(s: String) -> Self {
        Param::Str(s)
    }
}

impl From<Vec<u8>> for Param {
    fn from(b: Vec<u8>) -> Self {
        Param::Bytes(b)
    }
}

impl From<&[u8]> for Param {
    fn from(b: &[u8]) -> Self {
        Param::Bytes(b.to_vec())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Params(BTreeMap<String, Param>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<Param>) -> Self {
        self.0.insert(name.to_string(), value.into());
        self
    }
}

/// A provider-shaped response: JSON fields plus an optional body stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub fields: Value,
    pub body: Option<Vec<u8>>,
}

impl Envelope {
    pub fn error_code(&self) -> Option<&str> {
        self.fields.pointer("/Error/Code").and_then(Value::as_str)
    }

    pub fn http_status(&self) -> Option<u64> {
        self.fields.pointer("/ResponseMetadata/HTTPStatusCode").and_then(Value::as_u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamMapping {
    pub facade: &'static str,
    pub common: &'static str,
    pub required: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerbMapping {
    pub verb: &'static str,
    pub operation: &'static str,
    pub params: &'static [ParamMapping],
}

const fn p(facade: &'static str, common: &'static str, required: bool) -> ParamMapping {
    ParamMapping { facade, common, required }
}

pub const FACADE_MAPPING: &[VerbMapping] = &[
    VerbMapping {
        verb: "PutObject",
        operation: "put_object",
        params: &[p("Bucket", "loc.bucket", true), p("Key", "loc.key", true), p("Body", "bytes", false)],
    },
    VerbMapping {
        verb: "GetObject",
        operation: "get_object",
        params: &[p("Bucket", "loc.bucket", true), p("Key", "loc.key", true)],
    },
    VerbMapping {
        verb: "HeadObject",
        operation: "head_object",
        params: &[p("Bucket", "loc.bucket", true), p("Key", "loc.key", true)],
    },
    VerbMapping {
        verb: "DeleteObject",
        operation: "delete_object",
        params: &[p("Bucket", "loc.bucket", true), p("Key", "loc.key", true)],
    },
    VerbMapping {
        verb: "ListObjectsV2",
        operation: "list_objects",
        params: &[p("Bucket", "bucket", true), p("Prefix", "prefix", false)],
    },
];

/// The mapping table as a JSON document.
pub fn mapping_table_json() -> Value {
    json!({ "style": "s3", "verbs": FACADE_MAPPING })
}

/// Builds a facade of `style` (only `"s3"` ships) bound to one provider.
pub fn facade(style: &str, registry: Arc<Registry>, provider_id: &str) -> Result<S3Facade, ClientError> {
    if style != "s3" {
        return Err(ClientError::UnknownVerb(format!("facade style {style}")));
    }
    let provider = registry.adapter(provider_id)?.provider().clone();
    Ok(S3Facade { registry, provider })
}

pub struct S3Facade {
    registry: Arc<Registry>,
    provider: ProviderRef,
}

struct Checked {
    strs: BTreeMap<&'static str, String>,
    body: Option<Vec<u8>>,
}

fn ok_meta() -> Value {
    json!({ "HTTPStatusCode": 200 })
}

impl S3Facade {
    fn check(&self, verb: &str, params: Params) -> Result<(&'static VerbMapping, Checked), ClientError> {
        let mapping = FACADE_MAPPING
            .iter()
            .find(|m| m.verb == verb)
            .ok_or_else(|| ClientError::UnknownVerb(verb.to_string()))?;
        let unmapped: Vec<String> = params
            .0
            .keys()
            .filter(|k| !mapping.params.iter().any(|p| p.facade == k.as_str()))
            .cloned()
            .collect();
        if !unmapped.is_empty() {
            return Err(ClientError::UnmappedParameters { verb: verb.into(), params: unmapped });
        }
        let mut params = params.0;
        let mut checked = Checked { strs: BTreeMap::new(), body: None };
        for pm in mapping.params {
            match params.remove(pm.facade) {
                None if pm.required => {
                    return Err(ClientError::MissingParameter {
                        verb: verb.into(),
                        param: pm.facade.into(),
                    })
                }
                None => {}
                Some(Param::Bytes(b)) if pm.facade == "Body" => checked.body = Some(b),
                Some(Param::Str(s)) if pm.facade == "Body" => checked.body = Some(s.into_bytes()),
                Some(Param::Str(s)) => {
                    checked.strs.insert(pm.facade, s);
                }
                Some(Param::Bytes(_)) => {
                    return Err(ClientError::InvalidArgument(format!(
                        "{verb}: {} must be a string",
                        pm.facade
                    )))
                }
            }
        }
        let caps = self.registry.capabilities(&self.provider.provider_id)?;
        if !caps.object_storage {
            return Err(ClientError::Capability {
                provider: self.provider.provider_id.clone(),
                capability: "object_storage",
                operation: verb.to_string(),
            });
        }
        Ok((mapping, checked))
    }

    fn locator(&self, c: &Checked) -> Result<ObjectLocator, ClientError> {
        ObjectLocator::new(self.provider.clone(), c.strs["Bucket"].clone(), c.strs["Key"].clone())
    }

    fn not_found(&self, c: &Checked) -> Envelope {
        Envelope {
            fields: json!({
                "Error": {
                    "Code": "NoSuchKey",
                    "Message": "The specified key does not exist.",
                    "Key": c.strs.get("Key"),
                },
                "ResponseMetadata": { "HTTPStatusCode": 404 },
            }),
            body: None,
        }
    }

    fn no_bucket(&self, c: &Checked) -> Envelope {
        Envelope {
            fields: json!({
                "Error": {
                    "Code": "NoSuchBucket",
                    "Message": "The specified bucket does not exist.",
                    "BucketName": c.strs.get("Bucket"),
                },
                "ResponseMetadata": { "HTTPStatusCode": 404 },
            }),
            body: None,
        }
    }

    /// Dispatches `verb`. Missing keys and buckets come back as error
    /// envelopes; other failures as `Err`.
    pub fn call(&self, verb: &str, params: Params) -> Result<Envelope, ClientError> {
        let (mapping, c) = self.check(verb, params)?;
        let result = match mapping.operation {
            "put_object" => {
                let loc = self.locator(&c)?;
                let body = c.body.clone().unwrap_or_default();
                self.registry.put_object(&loc, &body).map(|meta| Envelope {
                    fields: json!({
                        "ETag": meta.etag,
                        "VersionId": meta.version,
                        "ResponseMetadata": ok_meta(),
                    }),
                    body: None,
                })
            }
            "get_object" => {
                let loc = self.locator(&c)?;
                self.registry.get_object(&loc).map(|data| Envelope {
                    fields: json!({ "ContentLength": data.len(), "ResponseMetadata": ok_meta() }),
                    body: Some(data),
                })
            }
            "head_object" => {
                let loc = self.locator(&c)?;
                self.registry.head_object(&loc).map(|meta| Envelope {
                    fields: json!({
                        "ContentLength": meta.size,
                        "ETag": meta.etag,
                        "VersionId": meta.version,
                        "ResponseMetadata": ok_meta(),
                    }),
                    body: None,
                })
            }
            "delete_object" => {
                let loc = self.locator(&c)?;
                self.registry.delete_object(&loc).map(|()| Envelope {
                    fields: json!({ "ResponseMetadata": { "HTTPStatusCode": 204 } }),
                    body: None,
                })
            }
            "list_objects" => {
                let bucket = &c.strs["Bucket"];
                let prefix = c.strs.get("Prefix").map(String::as_str).unwrap_or("");
                self.registry.list_objects(&self.provider, bucket, prefix).map(|keys| {
                    let contents: Vec<Value> = keys.iter().map(|k| json!({ "Key": k })).collect();
                    Envelope {
                        fields: json!({
                            "Name": bucket,
                            "Prefix": prefix,
                            "KeyCount": keys.len(),
                            "IsTruncated": false,
                            "Contents": contents,
                            "ResponseMetadata": ok_meta(),
                        }),
                        body: None,
                    }
                })
            }
            other => unreachable!("mapping names unknown operation {other}"),
        };
        match result {
            Err(ClientError::NotFound { .. }) => Ok(self.not_found(&c)),
            Err(ClientError::NoSuchBucket { .. }) => Ok(self.no_bucket(&c)),
            other => other,
        }
    }

    pub fn put_object(&self, params: Params) -> Result<Envelope, ClientError> {
        self.call("PutObject", params)
    }

    pub fn get_object(&self, params: Params) -> Result<Envelope, ClientError> {
        self.call("GetObject", params)
    }

    pub fn head_object(&self, params: Params) -> Result<Envelope, ClientError> {
        self.call("HeadObject", params)
    }

    pub fn delete_object(&self, params: Params) -> Result<Envelope, ClientError> {
        self.call("DeleteObject", params)
    }

    pub fn list_objects_v2(&self, params: Params) -> Result<Envelope, ClientError> {
        self.call("ListObjectsV2", params)
    }
}
