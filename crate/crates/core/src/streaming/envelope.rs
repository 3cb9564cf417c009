use std::io::{Read, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use rand_core::{OsRng, RngCore};

use crate::error::{Error, Result};
use crate::node::{Node, NodeMap};

use super::{Compression, Encryption, StreamConfig, PROTOCOL_VERSION};

const NONCE_LEN: usize = 12;

/// Wire frame: `{version, compression, encryption, nonce?, payload}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedEnvelope {
    pub version: u64,
    pub compression: Compression,
    pub encryption: Encryption,
    /// Base64 of 12 random bytes; present iff `encryption` is AEAD.
    pub nonce: Option<String>,
    /// Base64 of the compressed-then-encrypted body.
    pub payload: String,
}

fn associated_data(version: u64, compression: Compression) -> [u8; 2] {
    [version as u8, compression.code()]
}

fn cipher(cfg: &StreamConfig) -> Option<ChaCha20Poly1305> {
    cfg.key
        .as_ref()
        .map(|k| ChaCha20Poly1305::new(Key::from_slice(k.as_bytes())))
}

/// Compresses (if enabled) and then encrypts (if a key is set) `body`.
pub fn seal_payload(body: &[u8], cfg: &StreamConfig) -> Result<SealedEnvelope> {
    if body.len() > cfg.max_payload_bytes {
        return Err(Error::PayloadTooLarge {
            size: body.len(),
            limit: cfg.max_payload_bytes,
        });
    }
    let compressed = match cfg.compression {
        Compression::None => body.to_vec(),
        Compression::Gzip => {
            let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
            enc.write_all(body)
                .and_then(|_| enc.finish())
                .map_err(|e| Error::TransportFailure(format!("gzip: {e}")))?
        }
    };
    let (nonce, bytes) = match cipher(cfg) {
        None => (None, compressed),
        Some(c) => {
            let mut nonce = [0u8; NONCE_LEN];
            OsRng.fill_bytes(&mut nonce);
            let aad = associated_data(PROTOCOL_VERSION, cfg.compression);
            let sealed = c
                .encrypt(
                    Nonce::from_slice(&nonce),
                    Payload {
                        msg: &compressed,
                        aad: &aad,
                    },
                )
                .map_err(|_| Error::TransportFailure("encryption failed".into()))?;
            (Some(BASE64.encode(nonce)), sealed)
        }
    };
    Ok(SealedEnvelope {
        version: PROTOCOL_VERSION,
        compression: cfg.compression,
        encryption: cfg.encryption(),
        nonce,
        payload: BASE64.encode(bytes),
    })
}

/// Authenticates, decrypts, then decompresses. Nothing is decompressed or
/// parsed until authentication has succeeded.
pub fn open_payload(env: &SealedEnvelope, cfg: &StreamConfig) -> Result<Vec<u8>> {
    if env.version != PROTOCOL_VERSION {
        return Err(Error::UnsupportedVersion(env.version));
    }
    // Expansion bound for base64, the AEAD tag and gzip framing.
    let encoded_limit = cfg.max_payload_bytes.saturating_mul(2).saturating_add(1024);
    if env.payload.len() > encoded_limit {
        return Err(Error::PayloadTooLarge {
            size: env.payload.len(),
            limit: encoded_limit,
        });
    }
    let raw = BASE64
        .decode(&env.payload)
        .map_err(|e| Error::MalformedEnvelope(format!("payload: {e}")))?;
    let compressed = match (env.encryption, cipher(cfg)) {
        (Encryption::Aead, Some(c)) => {
            let nonce = env
                .nonce
                .as_deref()
                .ok_or_else(|| Error::MalformedEnvelope("missing nonce".into()))?;
            let nonce = BASE64
                .decode(nonce)
                .map_err(|e| Error::MalformedEnvelope(format!("nonce: {e}")))?;
            if nonce.len() != NONCE_LEN {
                return Err(Error::MalformedEnvelope(format!("nonce must be {NONCE_LEN} bytes")));
            }
            let aad = associated_data(env.version, env.compression);
            c.decrypt(Nonce::from_slice(&nonce), Payload { msg: &raw, aad: &aad })
                .map_err(|_| Error::AuthenticationFailure)?
        }
        (Encryption::None, None) => raw,
        // plaintext offered to a keyed endpoint, or ciphertext without a key
        _ => return Err(Error::AuthenticationFailure),
    };
    match env.compression {
        Compression::None => Ok(compressed),
        Compression::Gzip => {
            let mut out = Vec::new();
            let limit = cfg.max_payload_bytes as u64;
            GzDecoder::new(compressed.as_slice())
                .take(limit + 1)
                .read_to_end(&mut out)
                .map_err(|e| Error::DecompressionFailure(e.to_string()))?;
            if out.len() as u64 > limit {
                return Err(Error::PayloadTooLarge {
                    size: out.len(),
                    limit: cfg.max_payload_bytes,
                });
            }
            Ok(out)
        }
    }
}

impl SealedEnvelope {
    pub fn to_node(&self) -> Node {
        let mut m = NodeMap::with_capacity(5);
        m.insert("version".into(), Node::Int(self.version as i64));
        m.insert("compression".into(), Node::String(self.compression.as_str().into()));
        m.insert("encryption".into(), Node::String(self.encryption.as_str().into()));
        if let Some(n) = &self.nonce {
            m.insert("nonce".into(), Node::String(n.clone()));
        }
        m.insert("payload".into(), Node::String(self.payload.clone()));
        Node::Map(m)
    }

    pub fn to_json(&self) -> String {
        self.to_node().to_compact_string()
    }

    pub fn from_node(node: &Node) -> Result<Self> {
        let string = |key: &str| {
            node.get(key)
                .and_then(Node::as_str)
                .ok_or_else(|| Error::MalformedEnvelope(format!("`{key}` must be a string")))
        };
        let version = node
            .get("version")
            .and_then(Node::as_i64)
            .filter(|v| *v >= 0)
            .ok_or_else(|| Error::MalformedEnvelope("`version` must be a non-negative integer".into()))?
            as u64;
        let encryption: Encryption = string("encryption")?.parse()?;
        let nonce = match node.get("nonce") {
            None | Some(Node::Null) => None,
            Some(Node::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::MalformedEnvelope("`nonce` must be a string".into())),
        };
        if nonce.is_some() != (encryption == Encryption::Aead) {
            return Err(Error::MalformedEnvelope("nonce must be present exactly when encrypted".into()));
        }
        Ok(SealedEnvelope {
            version,
            compression: string("compression")?.parse()?,
            encryption,
            nonce,
            payload: string("payload")?.to_owned(),
        })
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let node = Node::parse_bytes(bytes).map_err(|e| Error::MalformedEnvelope(e.to_string()))?;
        SealedEnvelope::from_node(&node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streaming::StreamKey;

    fn keyed() -> StreamConfig {
        StreamConfig::new(Some(StreamKey::from_bytes([7; 32])))
    }

    #[test]
    fn empty_body_round_trips() {
        let cfg = keyed();
        let env = seal_payload(b"", &cfg).unwrap();
        assert_eq!(open_payload(&env, &cfg).unwrap(), b"");
    }

    #[test]
    fn identity_configuration_is_plain_base64() {
        let cfg = StreamConfig::new(None).with_compression(Compression::None);
        let env = seal_payload(b"hello", &cfg).unwrap();
        assert_eq!(env.payload, BASE64.encode(b"hello"));
        assert_eq!(env.nonce, None);
        assert_eq!(open_payload(&env, &cfg).unwrap(), b"hello");
    }

    #[test]
    fn wrong_key_fails_authentication() {
        let env = seal_payload(b"secret", &keyed()).unwrap();
        let other = StreamConfig::new(Some(StreamKey::from_bytes([8; 32])));
        assert!(matches!(open_payload(&env, &other), Err(Error::AuthenticationFailure)));
    }

    #[test]
    fn header_tampering_fails_authentication() {
        let cfg = keyed().with_compression(Compression::None);
        let mut env = seal_payload(b"abc", &cfg).unwrap();
        env.compression = Compression::Gzip;
        assert!(matches!(open_payload(&env, &cfg), Err(Error::AuthenticationFailure)));
    }

    #[test]
    fn downgrade_to_plaintext_is_refused() {
        let plain = seal_payload(b"x", &StreamConfig::new(None)).unwrap();
        assert!(matches!(open_payload(&plain, &keyed()), Err(Error::AuthenticationFailure)));
    }

    #[test]
    fn oversize_body_is_refused() {
        let mut cfg = keyed();
        cfg.max_payload_bytes = 4;
        assert!(matches!(
            seal_payload(b"12345", &cfg),
            Err(Error::PayloadTooLarge { size: 5, limit: 4 })
        ));
    }

    #[test]
    fn decompression_is_bounded() {
        let big = vec![b'a'; 10_000];
        let env = seal_payload(&big, &keyed()).unwrap();
        let mut small = keyed();
        small.max_payload_bytes = 1000;
        assert!(matches!(open_payload(&env, &small), Err(Error::PayloadTooLarge { .. })));
    }

    #[test]
    fn version_is_checked() {
        let cfg = keyed();
        let mut env = seal_payload(b"x", &cfg).unwrap();
        env.version = 2;
        assert!(matches!(open_payload(&env, &cfg), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn json_frame_round_trip() {
        let env = seal_payload(b"frame", &keyed()).unwrap();
        assert_eq!(SealedEnvelope::parse(env.to_json().as_bytes()).unwrap(), env);
        assert!(SealedEnvelope::parse(br#"{"version": 1}"#).is_err());
    }
}
