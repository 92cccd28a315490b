use chrono::{DateTime, Utc};

use crate::audit::AuditDraft;

/// Context for one mutation: the clock reading, the digest cost for any new
/// credentials, and the audit events the mutation produces.
#[derive(Debug)]
pub struct Tx {
    pub now: DateTime<Utc>,
    pub hash_cost: u32,
    pub(crate) events: Vec<AuditDraft>,
    /// Commit the working document even if the operation returns an error.
    /// Used for failure counters.
    pub(crate) keep_on_error: bool,
}

impl Tx {
    pub fn new(now: DateTime<Utc>, hash_cost: u32) -> Self {
        Self {
            now,
            hash_cost,
            events: Vec::new(),
            keep_on_error: false,
        }
    }

    pub fn record(&mut self, draft: AuditDraft) {
        self.events.push(draft);
    }

    pub fn events(&self) -> &[AuditDraft] {
        &self.events
    }
}
