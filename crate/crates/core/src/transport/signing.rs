//! Publisher signatures over model documents.
//!
//! The signature covers the canonical bytes of the whole document (sorted
//! keys, compact, shortest round-trip floats), so re-indenting a signed file
//! keeps it valid while any change to a value does not. Signing proves who
//! published a file; it says nothing about whether the content is inert,
//! which is what [`validate_document`](super::validate_document) checks.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand_core::{OsRng, RngCore};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};

use super::ModelDocument;

pub const SIGNATURE_SCHEME: &str = "ed25519";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedEnvelope {
    pub document_bytes: Vec<u8>,
    pub signature: Vec<u8>,
    /// Hex SHA-256 of the 32-byte public key.
    pub public_key_fingerprint: String,
    pub scheme: String,
}

pub fn fingerprint(key: &VerifyingKey) -> String {
    hex::encode(Sha256::digest(key.as_bytes()))
}

fn key_bytes(text: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(text.trim()).map_err(|e| Error::InvalidKey(e.to_string()))?;
    bytes
        .try_into()
        .map_err(|b: Vec<u8>| Error::InvalidKey(format!("expected 32 bytes, got {}", b.len())))
}

/// Parses a 32-byte secret seed written as 64 hex characters.
pub fn signing_key_from_hex(text: &str) -> Result<SigningKey> {
    Ok(SigningKey::from_bytes(&key_bytes(text)?))
}

pub fn verifying_key_from_hex(text: &str) -> Result<VerifyingKey> {
    VerifyingKey::from_bytes(&key_bytes(text)?).map_err(|e| Error::InvalidKey(e.to_string()))
}

pub fn generate_signing_key() -> SigningKey {
    let mut seed = [0u8; 32];
    OsRng.fill_bytes(&mut seed);
    SigningKey::from_bytes(&seed)
}

pub fn sign_document(doc: &ModelDocument, key: &SigningKey) -> SignedEnvelope {
    let document_bytes = doc.canonical_bytes();
    let signature = key.sign(&document_bytes).to_bytes().to_vec();
    SignedEnvelope {
        document_bytes,
        signature,
        public_key_fingerprint: fingerprint(&key.verifying_key()),
        scheme: SIGNATURE_SCHEME.to_owned(),
    }
}

/// True iff the signature is valid for exactly `document_bytes` under `key`.
pub fn verify_document(env: &SignedEnvelope, key: &VerifyingKey) -> Result<bool> {
    if env.scheme != SIGNATURE_SCHEME {
        return Err(Error::MalformedEnvelope(format!("unsupported scheme `{}`", env.scheme)));
    }
    let sig: [u8; 64] = env
        .signature
        .as_slice()
        .try_into()
        .map_err(|_| Error::MalformedEnvelope(format!("signature is {} bytes, expected 64", env.signature.len())))?;
    if env.public_key_fingerprint != fingerprint(key) {
        return Ok(false);
    }
    Ok(key
        .verify_strict(&env.document_bytes, &Signature::from_bytes(&sig))
        .is_ok())
}

impl SignedEnvelope {
    /// Parses the signed bytes back into a document. Call after verifying.
    pub fn document(&self) -> Result<ModelDocument> {
        ModelDocument::from_node(&Node::parse_bytes(&self.document_bytes)?)
    }

    /// The signed-file layout: scheme, fingerprint, base64 signature and the
    /// document embedded as a JSON object.
    pub fn to_node(&self) -> Result<Node> {
        let document = Node::parse_bytes(&self.document_bytes)
            .map_err(|e| Error::MalformedEnvelope(format!("document bytes: {e}")))?;
        let mut m = NodeMap::with_capacity(4);
        m.insert("scheme".into(), Node::String(self.scheme.clone()));
        m.insert(
            "public_key_fingerprint".into(),
            Node::String(self.public_key_fingerprint.clone()),
        );
        m.insert("signature".into(), Node::String(BASE64.encode(&self.signature)));
        m.insert("document".into(), document);
        Ok(Node::Map(m))
    }

    pub fn to_pretty_string(&self) -> Result<String> {
        Ok(self.to_node()?.to_pretty_string())
    }

    pub fn from_node(node: &Node) -> Result<SignedEnvelope> {
        let get = |key: &str| {
            node.get(key)
                .ok_or_else(|| Error::MalformedEnvelope(format!("missing `{key}`")))
        };
        let string = |key: &str| -> Result<String> {
            get(key)?
                .as_str()
                .map(str::to_owned)
                .ok_or_else(|| Error::MalformedEnvelope(format!("`{key}` must be a string")))
        };
        let signature = BASE64
            .decode(string("signature")?)
            .map_err(|e| Error::MalformedEnvelope(format!("signature: {e}")))?;
        Ok(SignedEnvelope {
            document_bytes: get("document")?.canonical_bytes(),
            signature,
            public_key_fingerprint: string("public_key_fingerprint")?,
            scheme: string("scheme")?,
        })
    }

    pub fn parse(text: &str) -> Result<SignedEnvelope> {
        let node = Node::parse(text).map_err(|e| Error::MalformedEnvelope(e.to_string()))?;
        SignedEnvelope::from_node(&node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> ModelDocument {
        ModelDocument::parse(
            r#"{"data": {"k": 1.5}, "sklearn_version": "0", "pymilo_version": "1.1", "model_type": "KMeans"}"#,
        )
        .unwrap()
    }

    #[test]
    fn sign_and_verify() {
        let key = signing_key_from_hex(&"11".repeat(32)).unwrap();
        let env = sign_document(&doc(), &key);
        assert!(verify_document(&env, &key.verifying_key()).unwrap());
        let other = signing_key_from_hex(&"22".repeat(32)).unwrap();
        assert!(!verify_document(&env, &other.verifying_key()).unwrap());
    }

    #[test]
    fn bad_keys_and_envelopes() {
        assert!(matches!(signing_key_from_hex("abcd"), Err(Error::InvalidKey(_))));
        assert!(matches!(signing_key_from_hex(&"zz".repeat(32)), Err(Error::InvalidKey(_))));
        let key = signing_key_from_hex(&"11".repeat(32)).unwrap();
        let mut env = sign_document(&doc(), &key);
        env.signature.pop();
        assert!(matches!(
            verify_document(&env, &key.verifying_key()),
            Err(Error::MalformedEnvelope(_))
        ));
        env.scheme = "rsa".into();
        assert!(matches!(
            verify_document(&env, &key.verifying_key()),
            Err(Error::MalformedEnvelope(_))
        ));
    }

    #[test]
    fn signed_file_round_trip() {
        let key = generate_signing_key();
        let env = sign_document(&doc(), &key);
        let text = env.to_pretty_string().unwrap();
        let back = SignedEnvelope::parse(&text).unwrap();
        assert_eq!(back, env);
        assert_eq!(back.document().unwrap(), doc());
    }
}
