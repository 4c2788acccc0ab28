//! The `mcf` command-line workbench and its HTTP service.

use std::collections::BTreeMap;

use mcf_core::{BeliefValue, Document, Env, Error, ErrorClass};

pub mod cli;
pub mod server;

/// Process exit status for an error: 2 validation, 3 conflict or halted on
/// a blank, 1 i/o.
pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Validation | ErrorClass::NotFound => 2,
        ErrorClass::Conflict => 3,
        ErrorClass::Io => 1,
    }
}

/// Reads beliefs for named propositions, on each proposition's scale.
pub fn parse_evidence_map(doc: &Document, evidence: &BTreeMap<String, f64>) -> Result<Env, Error> {
    evidence
        .iter()
        .map(|(id, &v)| {
            let prop = doc
                .network
                .proposition(id)
                .ok_or_else(|| Error::UnknownProposition(id.clone()))?;
            Ok((id.clone(), BeliefValue::new(v, prop.scale)?))
        })
        .collect()
}
