//! Build entity datasets with controlled popularity distributions from
//! Wikidata and Wikipedia, and measure the factual precision of long-form
//! model generations about those entities.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`ingest`] pulls class members out of Wikidata and enriches them.
//! * [`wikistats`] collects per-language Wikipedia popularity signals.
//! * [`popularity`] splits a class into head/torso/tail tiers and correlates proxies.
//! * [`sampler`] draws the dataset under eligibility filters and tier quotas.
//! * [`evidence`] turns Wikipedia pages into paragraphised evidence bundles.
//! * [`llm`] speaks the chat-completion wire format (live, recorded, or mocked).
//! * [`factuality`] extracts atomic facts, ranks evidence with BM25 and verifies facts.
//! * [`probes`] runs the river-length check and vocabulary-growth analysis.
//! * [`pipeline`] wires the stages together behind run manifests.
//!
//! Network access goes through [`http::HttpClient`], which caches every
//! response on disk and can replay a run without touching the network.

pub mod error;
pub mod evidence;
pub mod factuality;
pub mod http;
pub mod ingest;
pub mod llm;
pub mod mediawiki;
pub mod par;
pub mod pipeline;
pub mod popularity;
pub mod probes;
pub mod qid;
pub mod sampler;
pub mod sim;
pub mod util;
pub mod wikistats;

pub use error::{Error, Result};
pub use qid::Qid;
