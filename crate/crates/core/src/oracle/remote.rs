use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{Oracle, OracleError, OracleResponse};
use crate::warp::Image;

pub const IDENTIFY_PATH: &str = "/identify";

/// Header carrying the opaque client token used for server-side budgets.
pub const TOKEN_HEADER: &str = "x-client-token";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifyRequest {
    pub image_b64: String,
}

impl IdentifyRequest {
    pub fn from_image(img: &Image) -> Result<Self, OracleError> {
        let png = img
            .encode_png()
            .map_err(|e| OracleError::Protocol(e.to_string()))?;
        Ok(Self {
            image_b64: STANDARD.encode(png),
        })
    }

    pub fn decode_image(&self) -> Result<Image, OracleError> {
        let bytes = STANDARD
            .decode(self.image_b64.as_bytes())
            .map_err(|e| OracleError::Protocol(format!("bad base64: {e}")))?;
        Image::decode_png(&bytes).map_err(|e| OracleError::Protocol(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub error: String,
}

/// HTTP client for the `/identify` wire protocol.
///
/// One instance per worker; the ledger lives with the caller.
pub struct RemoteOracle {
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteOracle {
    /// `url` is either the service root or the full `/identify` endpoint.
    pub fn new(url: &str, token: Option<String>) -> Result<Self, OracleError> {
        let trimmed = url.trim_end_matches('/');
        let endpoint = if trimmed.ends_with(IDENTIFY_PATH) {
            trimmed.to_string()
        } else {
            format!("{trimmed}{IDENTIFY_PATH}")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint,
            token,
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Oracle for RemoteOracle {
    fn query(&mut self, img: &Image) -> Result<OracleResponse, OracleError> {
        let body = IdentifyRequest::from_image(img)?;
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            req = req.header(TOKEN_HEADER, token);
        }
        let resp = req
            .send()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let status = resp.status();
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            return Err(OracleError::RemoteBudgetExhausted);
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(OracleError::Protocol(format!("HTTP {status}: {text}")));
        }
        let parsed: OracleResponse = resp
            .json()
            .map_err(|e| OracleError::Protocol(format!("bad response body: {e}")))?;
        OracleResponse::new(parsed.identity, parsed.confidence)
    }
}
