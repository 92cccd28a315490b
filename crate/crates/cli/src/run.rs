use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use gatekeeper_core::credential::{generate_password, DEFAULT_COST};
use gatekeeper_core::{
    AuditFilter, Clock, Error, Gatekeeper, ManualClock, NewUser, PolicyConfig, Principal, Resource,
    Role, SystemClock, UserFilter, UserStatus, UserSummary,
};
use gatekeeper_service::AppState;
use serde_json::{json, Value};

use crate::args::*;

pub const PASSWORD_ENV: &str = "GATEKEEPER_PASSWORD";
pub const NEW_PASSWORD_ENV: &str = "GATEKEEPER_NEW_PASSWORD";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Domain(Error::Io(e))
    }
}

type Outcome = Result<Report, CliError>;

/// What a command prints: a JSON document in `--json` mode, text otherwise.
pub struct Report {
    json: Value,
    text: String,
}

impl Report {
    fn new(json: Value, text: impl Into<String>) -> Self {
        Self {
            json,
            text: text.into(),
        }
    }
}

/// Passwords come from the environment when set, else one line each from stdin.
struct Secrets {
    stdin: io::StdinLock<'static>,
}

impl Secrets {
    fn new() -> Self {
        Self {
            stdin: io::stdin().lock(),
        }
    }

    fn get(&mut self, env: &str, prompt: &str) -> Result<String, CliError> {
        if let Ok(v) = std::env::var(env) {
            return Ok(v);
        }
        eprint!("{prompt}: ");
        io::stderr().flush().ok();
        let mut line = String::new();
        if self.stdin.read_line(&mut line)? == 0 {
            return Err(CliError::Usage(format!(
                "no password given: set {env} or supply it on stdin"
            )));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    }
}

struct Ctx {
    store: PathBuf,
    actor: Option<String>,
    now: DateTime<Utc>,
    fixed_clock: bool,
    hash_cost: u32,
    secrets: Secrets,
    actor_password: Option<String>,
}

impl Ctx {
    fn open(&self) -> Result<Gatekeeper, CliError> {
        Ok(Gatekeeper::open(&self.store)?.with_hash_cost(self.hash_cost))
    }

    fn actor(&self) -> Result<String, CliError> {
        self.actor
            .clone()
            .ok_or_else(|| CliError::Usage("this command needs --as <user_id>".into()))
    }

    fn actor_password(&mut self) -> Result<String, CliError> {
        if let Some(p) = &self.actor_password {
            return Ok(p.clone());
        }
        let actor = self.actor()?;
        let p = self
            .secrets
            .get(PASSWORD_ENV, &format!("password for {actor}"))?;
        self.actor_password = Some(p.clone());
        Ok(p)
    }

    /// Logs in as `--as`, runs `f`, and closes the session again.
    fn as_actor<T>(
        &mut self,
        gk: &Gatekeeper,
        f: impl FnOnce(&Gatekeeper, &Principal) -> Result<T, Error>,
    ) -> Result<T, CliError> {
        let actor = self.actor()?;
        let password = self.actor_password()?;
        let session = gk.login(&actor, &password, self.now)?;
        let result = gk.resolve(&session.token, self.now).and_then(|p| f(gk, &p));
        gk.logout(&session.token, self.now)?;
        Ok(result?)
    }
}

/// Advisory lock on a sibling `.lock` file, held while the returned handle lives.
fn lock_store(store: &Path) -> Result<File, CliError> {
    let mut name = store.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    let file = File::options()
        .create(true)
        .truncate(false)
        .write(true)
        .open(store.with_file_name(name))?;
    file.lock()?;
    Ok(file)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let store = cli.store.ok_or_else(|| {
        CliError::Usage("no store given: pass --store or set GATEKEEPER_STORE".into())
    })?;
    let mut ctx = Ctx {
        store,
        actor: cli.actor,
        now: cli.now.unwrap_or_else(Utc::now),
        fixed_clock: cli.now.is_some(),
        hash_cost: cli.hash_cost.unwrap_or(DEFAULT_COST).max(1),
        secrets: Secrets::new(),
        actor_password: None,
    };
    let report = dispatch(&mut ctx, cli.command)?;
    let mut out = io::stdout().lock();
    if cli.json {
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&report.json).expect("JSON values serialize")
        )?;
    } else if !report.text.is_empty() {
        write!(out, "{}", report.text)?;
        if !report.text.ends_with('\n') {
            writeln!(out)?;
        }
    }
    Ok(())
}

fn dispatch(ctx: &mut Ctx, command: Command) -> Outcome {
    match command {
        Command::Bootstrap(args) => bootstrap(ctx, args),
        Command::Check {
            user,
            resource,
            level,
        } => {
            let gk = ctx.open()?;
            let principal = principal_for(&gk, user.as_deref())?;
            let d = gk.decide(&principal, &resource, level, ctx.now)?;
            let mut text = format!("{:?} {}\n", d.verdict, d.reason);
            for step in &d.trace {
                let _ = writeln!(text, "  {step}");
            }
            let json = json!({
                "user_id": principal.user_id,
                "resource": resource,
                "level": level,
                "verdict": d.verdict,
                "reason": d.reason,
                "trace": d.trace,
            });
            Ok(Report::new(json, text))
        }
        Command::Menu { user } => {
            let gk = ctx.open()?;
            let principal = principal_for(&gk, user.as_deref())?;
            let menu = gk.visible_menu(&principal, ctx.now);
            let mut text = String::new();
            for section in &menu.groups {
                let _ = writeln!(text, "{}", section.group);
                for item in &section.items {
                    let _ = writeln!(text, "  {:<24} {}", item.resource_id, item.display_name);
                }
            }
            let json = json!({ "user_id": principal.user_id, "role": principal.role, "groups": menu.groups });
            Ok(Report::new(json, text))
        }
        Command::Resource(ResourceCommand::List) => {
            let gk = ctx.open()?;
            let resources = gk.list_resources();
            let mut text = String::new();
            for r in &resources {
                let _ = writeln!(
                    text,
                    "{:<24} {:<10} {:<15} {:<5} {}",
                    r.resource_id,
                    r.data_class.as_str(),
                    r.menu_group.as_str(),
                    r.required_level.as_str(),
                    r.display_name
                );
            }
            Ok(Report::new(json!({ "resources": resources }), text))
        }
        Command::Passwd(PasswdCommand::RecoverBegin { user_id }) => {
            let _lock = lock_store(&ctx.store)?;
            let q = ctx.open()?.recover_begin(&user_id, ctx.now)?;
            Ok(Report::new(
                json!({ "user_id": user_id, "hint_question": q }),
                q,
            ))
        }
        Command::Serve { bind } => serve(ctx, bind),
        other => {
            let _lock = lock_store(&ctx.store)?;
            let gk = ctx.open()?;
            mutate(ctx, &gk, other)
        }
    }
}

fn principal_for(gk: &Gatekeeper, user: Option<&str>) -> Result<Principal, Error> {
    match user {
        Some(id) => gk.principal_for(id),
        None => Ok(Principal::anonymous()),
    }
}

fn bootstrap(ctx: &mut Ctx, args: BootstrapArgs) -> Outcome {
    let _lock = lock_store(&ctx.store)?;
    let (password, generated) = match std::env::var(PASSWORD_ENV) {
        Ok(p) => (p, false),
        Err(_) => (generate_password(), true),
    };
    let config = PolicyConfig {
        multi_admin: args.multi_admin,
        self_registration: args.self_registration,
        allow_self_password_change: !args.no_self_password_change,
        session_ttl_seconds: args.session_ttl,
        ..PolicyConfig::default()
    };
    let admin = NewUser {
        user_id: args.admin.clone(),
        password: password.clone(),
        role: Role::Administrator,
        hint_question: args.hint_question,
        hint_answer: args.hint_answer,
    };
    Gatekeeper::bootstrap(Some(&ctx.store), config, admin, ctx.now, ctx.hash_cost)?;
    let mut text = format!(
        "created {} with administrator {}\n",
        ctx.store.display(),
        args.admin
    );
    let mut json = json!({ "store": ctx.store, "admin": args.admin });
    if generated {
        let _ = writeln!(text, "generated password: {password}");
        json["generated_password"] = json!(password);
    }
    Ok(Report::new(json, text))
}

fn user_line(u: &UserSummary) -> String {
    let locked = if u.recovery_locked {
        " recovery-locked"
    } else {
        ""
    };
    format!(
        "{:<24} {:<13} {}{}",
        u.user_id,
        u.role.as_str(),
        u.status,
        locked
    )
}

fn user_report(u: UserSummary) -> Report {
    let text = user_line(&u);
    Report::new(json!(u), text)
}

fn mutate(ctx: &mut Ctx, gk: &Gatekeeper, command: Command) -> Outcome {
    let now = ctx.now;
    match command {
        Command::User(UserCommand::Add {
            user_id,
            role,
            hint_question,
            hint_answer,
        }) => {
            // Ask for both secrets before touching the store.
            ctx.actor_password()?;
            let new_pw = ctx.secrets.get(
                NEW_PASSWORD_ENV,
                &format!("password for new user {user_id}"),
            )?;
            let new = NewUser {
                user_id,
                password: new_pw,
                role,
                hint_question,
                hint_answer,
            };
            let record = ctx.as_actor(gk, |gk, p| gk.create_user(p, new, now))?;
            let summary = UserSummary::from(&record);
            Ok(Report::new(json!(summary), summary.user_id.clone()))
        }
        Command::User(UserCommand::List { role, status }) => {
            let users = ctx.as_actor(gk, |gk, p| gk.list_users(p, UserFilter { role, status }))?;
            let text: String = users.iter().map(|u| user_line(u) + "\n").collect();
            Ok(Report::new(json!({ "users": users }), text))
        }
        Command::User(UserCommand::SetRole { user_id, role }) => {
            let r = ctx.as_actor(gk, |gk, p| gk.set_role(p, &user_id, role, now))?;
            Ok(user_report(UserSummary::from(&r)))
        }
        Command::User(UserCommand::Enable { user_id }) => {
            let r = ctx.as_actor(gk, |gk, p| {
                gk.set_status(p, &user_id, UserStatus::Active, now)
            })?;
            Ok(user_report(UserSummary::from(&r)))
        }
        Command::User(UserCommand::Disable { user_id }) => {
            let r = ctx.as_actor(gk, |gk, p| {
                gk.set_status(p, &user_id, UserStatus::Disabled, now)
            })?;
            Ok(user_report(UserSummary::from(&r)))
        }
        Command::User(UserCommand::UnlockRecovery { user_id }) => {
            let r = ctx.as_actor(gk, |gk, p| gk.unlock_recovery(p, &user_id, now))?;
            Ok(user_report(UserSummary::from(&r)))
        }
        Command::Grant(GrantCommand::Add {
            user_id,
            resource_id,
            level,
            expires,
        }) => {
            let g = ctx.as_actor(gk, |gk, p| {
                gk.grant_special(p, &user_id, &resource_id, level, expires, now)
            })?;
            Ok(Report::new(json!(g), g.grant_id.clone()))
        }
        Command::Grant(GrantCommand::Revoke { grant_id }) => {
            ctx.as_actor(gk, |gk, p| gk.revoke_grant(p, &grant_id, now))?;
            Ok(Report::new(
                json!({ "revoked": grant_id }),
                format!("revoked {grant_id}"),
            ))
        }
        Command::Grant(GrantCommand::List { user }) => {
            let grants = ctx.as_actor(gk, |gk, p| gk.list_grants(p, user.as_deref()))?;
            let mut text = String::new();
            for g in &grants {
                let expiry = g
                    .expiry
                    .map_or_else(|| "never".to_string(), |e| e.to_rfc3339());
                let _ = writeln!(
                    text,
                    "{}  {:<24} {:<24} {:<5} {}",
                    g.grant_id,
                    g.user_id,
                    g.resource_id,
                    g.level.as_str(),
                    expiry
                );
            }
            Ok(Report::new(json!({ "grants": grants }), text))
        }
        Command::Resource(ResourceCommand::Add {
            resource_id,
            name,
            class,
            group,
            level,
            description,
        }) => {
            let resource = Resource {
                resource_id,
                display_name: name,
                data_class: class,
                menu_group: group,
                required_level: level,
                description,
            };
            let r = ctx.as_actor(gk, |gk, p| gk.add_resource(p, resource, now))?;
            Ok(Report::new(json!(r), r.resource_id.clone()))
        }
        Command::Login { user_id } => {
            let password = ctx
                .secrets
                .get(PASSWORD_ENV, &format!("password for {user_id}"))?;
            let s = gk.login(&user_id, &password, now)?;
            let text = format!("{}\nexpires {}", s.token, s.expires_at.to_rfc3339());
            Ok(Report::new(
                json!({ "token": s.token, "user_id": s.user_id, "expires_at": s.expires_at }),
                text,
            ))
        }
        Command::Passwd(PasswdCommand::Change { user_id }) => {
            let old = ctx
                .secrets
                .get(PASSWORD_ENV, &format!("current password for {user_id}"))?;
            let new = ctx.secrets.get(NEW_PASSWORD_ENV, "new password")?;
            let s = gk.login(&user_id, &old, now)?;
            let result = gk.change_password(&s.token, &old, &new, now);
            gk.logout(&s.token, now)?;
            result?;
            Ok(Report::new(
                json!({ "user_id": user_id, "changed": true }),
                "password changed",
            ))
        }
        Command::Passwd(PasswdCommand::RecoverComplete { user_id, answer }) => {
            let pw = gk.recover_complete(&user_id, &answer, now)?;
            Ok(Report::new(
                json!({ "user_id": user_id, "new_password": pw }),
                pw,
            ))
        }
        Command::Audit(AuditCommand::Tail {
            limit,
            by,
            kind,
            since,
        }) => {
            let filter = AuditFilter {
                actor: by,
                kind,
                since,
                until: None,
            };
            let mut events = ctx.as_actor(gk, |gk, p| gk.audit_query(p, &filter))?;
            let skip = events.len().saturating_sub(limit);
            events.drain(..skip);
            let mut text = String::new();
            for e in &events {
                let _ = write!(
                    text,
                    "{:>6} {} {:<16} {:?}",
                    e.seq,
                    e.at.to_rfc3339(),
                    e.actor,
                    e.kind
                );
                for (k, v) in &e.detail {
                    let _ = write!(text, " {k}={v}");
                }
                text.push('\n');
            }
            Ok(Report::new(json!({ "events": events }), text))
        }
        Command::Bootstrap(_)
        | Command::Check { .. }
        | Command::Menu { .. }
        | Command::Resource(ResourceCommand::List)
        | Command::Passwd(PasswdCommand::RecoverBegin { .. })
        | Command::Serve { .. } => unreachable!("dispatched without the store lock"),
    }
}

fn serve(ctx: &mut Ctx, bind: std::net::SocketAddr) -> Outcome {
    let _lock = lock_store(&ctx.store)?;
    let gk = Arc::new(ctx.open()?);
    let clock: Arc<dyn Clock> = if ctx.fixed_clock {
        Arc::new(ManualClock::new(ctx.now))
    } else {
        Arc::new(SystemClock)
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(gatekeeper_service::serve(bind, AppState::new(gk, clock)))?;
    Ok(Report::new(json!({ "stopped": true }), ""))
}
