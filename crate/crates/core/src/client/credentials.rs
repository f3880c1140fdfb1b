//! Credentials files: one INI section per `credentials_ref`.
//!
//! ```ini
//! [r2]
//! aws_access_key_id = AKIA...
//! aws_secret_access_key = ...
//!
//! [internal-gateway]
//! token = ...
//! ```
//!
//! Values are never printed; `Debug` shows key names only.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use ini::Ini;

use super::ClientError;

#[derive(Clone, Default, PartialEq, Eq)]
pub struct Credentials {
    values: BTreeMap<String, String>,
}

impl Credentials {
    pub fn new<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Credentials { values: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect() }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ClientError> {
        self.get(key).ok_or_else(|| ClientError::Credentials(format!("missing key {key}")))
    }
}

impl fmt::Debug for Credentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.values.keys().map(|k| (k, "<redacted>"))).finish()
    }
}

/// Source of credentials, consulted per request by `credentials_ref`.
pub trait CredentialStore: Send + Sync {
    fn lookup(&self, credentials_ref: &str) -> Result<Credentials, ClientError>;
}

#[derive(Clone, Default)]
pub struct IniCredentialStore {
    sections: HashMap<String, Credentials>,
}

impl IniCredentialStore {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let path = path.as_ref();
        let ini = Ini::load_from_file(path)
            .map_err(|e| ClientError::Credentials(format!("{}: {e}", path.display())))?;
        Ok(Self::from_ini(&ini))
    }

    pub fn parse(text: &str) -> Result<Self, ClientError> {
        let ini = Ini::load_from_str(text).map_err(|e| ClientError::Credentials(e.to_string()))?;
        Ok(Self::from_ini(&ini))
    }

    fn from_ini(ini: &Ini) -> Self {
        let sections = ini
            .iter()
            .filter_map(|(name, props)| {
                let creds = Credentials::new(props.iter());
                name.map(|n| (n.to_string(), creds))
            })
            .collect();
        IniCredentialStore { sections }
    }

    pub fn section_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.sections.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }
}

impl CredentialStore for IniCredentialStore {
    fn lookup(&self, credentials_ref: &str) -> Result<Credentials, ClientError> {
        self.sections.get(credentials_ref).cloned().ok_or_else(|| {
            ClientError::Credentials(format!("no section [{credentials_ref}] in credentials file"))
        })
    }
}

impl fmt::Debug for IniCredentialStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IniCredentialStore").field("sections", &self.section_names()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = "[r2]\naws_access_key_id = AKIDEXAMPLE\naws_secret_access_key = s3cr3t\n\n[gw]\ntoken = abc\n";

    #[test]
    fn sections_become_entries() {
        let store = IniCredentialStore::parse(FILE).unwrap();
        assert_eq!(store.section_names(), vec!["gw", "r2"]);
        let c = store.lookup("r2").unwrap();
        assert_eq!(c.get("aws_access_key_id"), Some("AKIDEXAMPLE"));
        assert!(store.lookup("missing").is_err());
    }

    #[test]
    fn debug_never_shows_values() {
        let store = IniCredentialStore::parse(FILE).unwrap();
        let shown = format!("{:?} {:?}", store, store.lookup("r2").unwrap());
        assert!(!shown.contains("s3cr3t"));
        assert!(!shown.contains("AKIDEXAMPLE"));
        assert!(shown.contains("aws_secret_access_key"));
    }
}
