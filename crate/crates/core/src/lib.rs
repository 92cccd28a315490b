//! An embeddable role-based access-control engine for management
//! information systems.
//!
//! Access is decided from four inputs: the user's role, the data class of
//! the resource, the access level requested, and any special grants an
//! administrator has issued. [`engine::decide`] combines them;
//! [`engine::visible_menu`] projects the result onto menus. User lifecycle
//! lives in [`directory`], login and recovery in [`auth`], persistence in
//! [`store`] and [`audit`]. [`Gatekeeper`] ties them together behind a
//! single-writer store.

pub mod audit;
pub mod auth;
pub mod clock;
pub mod credential;
pub mod directory;
pub mod engine;
pub mod error;
mod gatekeeper;
pub mod model;
pub mod store;
mod txn;

pub use audit::{AuditEvent, AuditFilter, EventKind};
pub use auth::Session;
pub use clock::{Clock, ManualClock, SystemClock};
pub use credential::CredentialDigest;
pub use directory::{
    IdCheck, NewUser, SpecialGrant, UserFilter, UserRecord, UserStatus, UserSummary,
};
pub use engine::{
    decide, visible_menu, Decision, MenuTree, Principal, PrincipalKind, Reason, Verdict,
};
pub use error::{Error, Result};
pub use gatekeeper::Gatekeeper;
pub use model::{
    baseline_allows, role_dominates, AccessLevel, DataClass, MenuGroup, PolicyConfig, Resource,
    Role, SelfRegistration,
};
pub use store::StoreDocument;
pub use txn::Tx;
