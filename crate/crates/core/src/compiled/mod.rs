//! Simulator for the compiled single-prover protocol: questions of all but
//! the last round are encrypted with a toy scheme, the prover answers with
//! quantum instruments and the verifier decrypts.

mod protocol;
mod prover;
mod scheme;

pub use protocol::{
    branch_count, compiled_score, decrypt_answers, decrypted_correlation, eps_ns_audit, run_protocol,
    transcripts_to_jsonl, AuditReport, Transcript, DEFAULT_BRANCH_CAP,
};
pub use prover::ProverProgram;
pub use scheme::{EncryptionScheme, Identity, Scheme, XorPad};
