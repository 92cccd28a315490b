use thiserror::Error;

/// Every failure the engine, directory, session and store layers can report.
#[derive(Debug, Error)]
pub enum Error {
    // directory
    #[error("not authorized: an active administrator is required")]
    NotAuthorized,
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("unknown resource '{0}'")]
    UnknownResource(String),
    #[error("unknown grant '{0}'")]
    UnknownGrant(String),
    #[error("user-id already exists; choose a different user-id")]
    IdAlreadyExists,
    #[error("invalid user-id: {0}")]
    InvalidId(String),
    #[error("an active administrator already exists and multiple administrators are not allowed")]
    AdminCapExceeded,
    #[error("password too weak: at least {min} characters required", min = crate::credential::MIN_PASSWORD_LEN)]
    WeakPassword,
    #[error("self-registration is disabled")]
    SelfRegistrationDisabled,
    #[error("the sole active administrator cannot demote themselves")]
    SelfDemotionForbidden,
    #[error("the sole active administrator cannot disable themselves")]
    SelfDisableForbidden,
    #[error("admin level cannot be granted; it belongs to the administrator role")]
    AdminLevelNotGrantable,
    #[error("guests cannot be granted write access")]
    GuestWriteForbidden,
    #[error("invalid role: {0}")]
    InvalidRole(String),
    #[error("invalid status: {0}")]
    InvalidStatus(String),
    #[error("invalid resource: {0}")]
    InvalidResource(String),
    #[error("resource '{0}' already exists")]
    ResourceExists(String),

    // sessions
    #[error("authentication failed")]
    AuthFailed,
    #[error("invalid or expired session token")]
    InvalidToken,
    #[error("old password does not match")]
    OldPasswordMismatch,
    #[error("password changes are disabled by policy")]
    PolicyForbidden,
    #[error("password recovery is unavailable")]
    RecoveryUnavailable,
    #[error("hint answer does not match")]
    HintMismatch,
    #[error("password recovery is locked; ask an administrator to unlock it")]
    RecoveryLocked,

    // store
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse failure at line {line}, column {column}: {message}")]
    ParseFailure {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failure: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u64),
    #[error("store already exists at {0}")]
    StoreExists(String),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    /// Stable snake_case code used in machine-readable output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotAuthorized => "not_authorized",
            Error::UnknownUser(_) => "unknown_user",
            Error::UnknownResource(_) => "unknown_resource",
            Error::UnknownGrant(_) => "unknown_grant",
            Error::IdAlreadyExists => "id_already_exists",
            Error::InvalidId(_) => "invalid_id",
            Error::AdminCapExceeded => "admin_cap_exceeded",
            Error::WeakPassword => "weak_password",
            Error::SelfRegistrationDisabled => "self_registration_disabled",
            Error::SelfDemotionForbidden => "self_demotion_forbidden",
            Error::SelfDisableForbidden => "self_disable_forbidden",
            Error::AdminLevelNotGrantable => "admin_level_not_grantable",
            Error::GuestWriteForbidden => "guest_write_forbidden",
            Error::InvalidRole(_) => "invalid_role",
            Error::InvalidStatus(_) => "invalid_status",
            Error::InvalidResource(_) => "invalid_resource",
            Error::ResourceExists(_) => "resource_exists",
            Error::AuthFailed => "auth_failed",
            Error::InvalidToken => "invalid_token",
            Error::OldPasswordMismatch => "old_password_mismatch",
            Error::PolicyForbidden => "policy_forbidden",
            Error::RecoveryUnavailable => "recovery_unavailable",
            Error::HintMismatch => "hint_mismatch",
            Error::RecoveryLocked => "recovery_locked",
            Error::Io(_) => "io_failure",
            Error::ParseFailure { .. } => "parse_failure",
            Error::Validation(_) => "validation_failure",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::StoreExists(_) => "store_exists",
            Error::Parse(_) => "bad_request",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
