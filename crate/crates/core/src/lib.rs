//! Landmark-driven face warping and query-budgeted black-box attacks on face
//! identification systems.

pub mod attack;
pub mod landmarks;
pub mod oracle;
pub mod synthetic;
pub mod warp;
