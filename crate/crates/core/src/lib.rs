//! Tiered phishing URL detection.
//!
//! A fast path ([`ftw`]) answers from the local blacklist and verdict cache
//! or queues the URL and answers `Pending`; a slow path ([`stw`]) drains the
//! queue, crawls each page and runs brand-intention analysis ([`rbpd`]),
//! writing verdicts back to the cache.

pub mod blacklist;
pub mod cache;
pub mod clock;
pub mod config;
pub mod crawler;
pub mod engine;
pub mod extract;
pub mod ftw;
pub mod model;
pub mod online;
pub mod par;
pub mod psl;
pub mod queue;
pub mod rbpd;
pub mod stw;
pub mod url;
