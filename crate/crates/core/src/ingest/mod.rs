//! Class ingestion: enumerate the members of a Wikidata class with SPARQL and
//! enrich each one through the entity API.

mod entity;
mod manifest;
mod region;
mod sparql;
mod spec;

pub use entity::{
    count_triples, enrich_batch, enrich_entity, fetch_entities, normalize_quantity, AttributeValue, EntityRecord,
};
pub use manifest::{ingest_class, IngestCounts, IngestEndpoints, IngestManifest, IngestOutput};
pub use region::{resolve_region, Region, RegionTable};
pub use sparql::{build_query, run_sparql, SparqlQuery, SparqlRow, SparqlRows, DEFAULT_PAGE_SIZE};
pub use spec::{ClassSpec, DEFAULT_SPARQL_TEMPLATE};
