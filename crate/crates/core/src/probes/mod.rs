//! Single-attribute (river length) and lexical-diversity probes of model
//! generations.

mod heaps;
mod lengths;

pub use heaps::{
    fit_heaps, lexical_tokens, render_svg, vocab_growth, HeapsCurve, HeapsFit, Series, DEFAULT_STRIDE, MIN_FIT_POINTS,
};
pub use lengths::{
    aggregate_errors, checks_csv, detect_length_km, extract_length_mentions, km_to_miles, miles_to_km,
    read_corrections, select_candidate, summarize_checks, summary_markdown, AttributeCheck, ErrorSummary,
    LengthMention, LengthUnit, DISAGREEMENT_TOLERANCE, KM_PER_MILE,
};
