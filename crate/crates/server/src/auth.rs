//! Bearer-token admin authentication.

use axum::http::header::AUTHORIZATION;
use axum::http::HeaderMap;
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

/// The configured admin secret. Only its digest is kept, so comparisons run
/// in constant time regardless of the presented token's length.
#[derive(Clone)]
pub struct AdminCredential {
    digest: [u8; 32],
}

impl std::fmt::Debug for AdminCredential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AdminCredential(..)")
    }
}

impl AdminCredential {
    /// `None` for an empty token: an empty secret never enables admin access.
    pub fn new(token: &str) -> Option<Self> {
        (!token.is_empty()).then(|| Self {
            digest: Sha256::digest(token.as_bytes()).into(),
        })
    }

    pub fn verify(&self, presented: &str) -> bool {
        let digest: [u8; 32] = Sha256::digest(presented.as_bytes()).into();
        digest.ct_eq(&self.digest).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthOutcome {
    Authorized,
    Unauthorized,
}

/// Authorized iff the request carries exactly one
/// `Authorization: Bearer <token>` header matching the credential.
pub fn authenticate_admin(headers: &HeaderMap, credential: &AdminCredential) -> AuthOutcome {
    let mut values = headers.get_all(AUTHORIZATION).iter();
    let (Some(value), None) = (values.next(), values.next()) else {
        return AuthOutcome::Unauthorized;
    };
    let Ok(value) = value.to_str() else {
        return AuthOutcome::Unauthorized;
    };
    let Some((scheme, token)) = value.split_once(' ') else {
        return AuthOutcome::Unauthorized;
    };
    if scheme.eq_ignore_ascii_case("bearer") && !token.is_empty() && credential.verify(token) {
        AuthOutcome::Authorized
    } else {
        AuthOutcome::Unauthorized
    }
}
