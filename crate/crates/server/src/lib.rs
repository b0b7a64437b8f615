//! HTTP/JSON service and operator CLI over the green space registry.

pub mod api;
pub mod auth;
pub mod cli;
pub mod error;
pub mod lock;

pub use api::{router, ApiConfig};
pub use error::ApiError;
