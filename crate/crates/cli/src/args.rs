use std::net::SocketAddr;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use gatekeeper_core::{
    AccessLevel, DataClass, EventKind, MenuGroup, Role, SelfRegistration, UserStatus,
};

#[derive(Debug, Parser)]
#[command(
    name = "gatekeeper",
    version,
    about = "Administer a role-based access-rights store"
)]
pub struct Cli {
    /// Store file.
    #[arg(long, env = "GATEKEEPER_STORE", global = true)]
    pub store: Option<PathBuf>,

    /// Authenticate as this user before running an administrative command.
    /// The password comes from GATEKEEPER_PASSWORD or a prompt on stdin.
    #[arg(long = "as", value_name = "USER_ID", global = true)]
    pub actor: Option<String>,

    /// Evaluate everything at this instant instead of the system clock.
    #[arg(long, value_name = "RFC3339", value_parser = parse_instant, global = true)]
    pub now: Option<DateTime<Utc>>,

    /// Emit one JSON document on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Key-derivation cost for passwords set by this invocation.
    #[arg(long, env = "GATEKEEPER_HASH_COST", global = true, hide = true)]
    pub hash_cost: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a new store with its first administrator.
    Bootstrap(BootstrapArgs),
    #[command(subcommand)]
    User(UserCommand),
    #[command(subcommand)]
    Grant(GrantCommand),
    #[command(subcommand)]
    Resource(ResourceCommand),
    /// Decide whether a user may access a resource at a level.
    Check {
        /// Omit to evaluate an anonymous visitor.
        #[arg(long)]
        user: Option<String>,
        #[arg(long)]
        resource: String,
        #[arg(long, default_value = "read")]
        level: AccessLevel,
    },
    /// Show the menu a user would see.
    Menu {
        #[arg(long)]
        user: Option<String>,
    },
    /// Open a session and print its bearer token.
    Login { user_id: String },
    #[command(subcommand)]
    Passwd(PasswdCommand),
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long, default_value = "admin")]
    pub admin: String,
    #[arg(long, default_value = "")]
    pub hint_question: String,
    #[arg(long, default_value = "")]
    pub hint_answer: String,
    /// Allow more than one active administrator.
    #[arg(long)]
    pub multi_admin: bool,
    #[arg(long, default_value = "disabled")]
    pub self_registration: SelfRegistration,
    #[arg(long, default_value_t = 1800)]
    pub session_ttl: u64,
    /// Forbid users from changing their own password.
    #[arg(long)]
    pub no_self_password_change: bool,
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Create a user. The new password comes from GATEKEEPER_NEW_PASSWORD or stdin.
    Add {
        user_id: String,
        #[arg(long)]
        role: Role,
        #[arg(long, default_value = "")]
        hint_question: String,
        #[arg(long, default_value = "")]
        hint_answer: String,
    },
    List {
        #[arg(long)]
        role: Option<Role>,
        #[arg(long)]
        status: Option<UserStatus>,
    },
    SetRole {
        user_id: String,
        role: Role,
    },
    Enable {
        user_id: String,
    },
    Disable {
        user_id: String,
    },
    UnlockRecovery {
        user_id: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum GrantCommand {
    Add {
        user_id: String,
        resource_id: String,
        #[arg(long, default_value = "read")]
        level: AccessLevel,
        #[arg(long, value_name = "RFC3339", value_parser = parse_instant)]
        expires: Option<DateTime<Utc>>,
    },
    Revoke {
        grant_id: String,
    },
    List {
        #[arg(long)]
        user: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ResourceCommand {
    Add {
        resource_id: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        class: DataClass,
        #[arg(long)]
        group: MenuGroup,
        #[arg(long, default_value = "read")]
        level: AccessLevel,
        #[arg(long)]
        description: Option<String>,
    },
    List,
}

#[derive(Debug, Subcommand)]
pub enum PasswdCommand {
    /// Change a password. Old from GATEKEEPER_PASSWORD, new from GATEKEEPER_NEW_PASSWORD.
    Change { user_id: String },
    /// Print the hint question for a user.
    RecoverBegin { user_id: String },
    /// Answer the hint question and receive a one-time password.
    RecoverComplete {
        user_id: String,
        #[arg(long)]
        answer: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    /// Print the most recent audit events.
    Tail {
        #[arg(short = 'n', long, default_value_t = 20)]
        limit: usize,
        /// Only events by this actor.
        #[arg(long = "actor")]
        by: Option<String>,
        #[arg(long)]
        kind: Option<EventKind>,
        #[arg(long, value_parser = parse_instant)]
        since: Option<DateTime<Utc>>,
    },
}

fn parse_instant(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("expected an RFC 3339 instant: {e}"))
}
