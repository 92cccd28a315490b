//! Categorical axes of the access model: who is asking ([`Role`]), how
//! sensitive the data is ([`DataClass`]), and what kind of action is being
//! taken ([`AccessLevel`]). Everything else in the crate is built from the
//! baseline matrix defined here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The five actor categories.
///
/// Outsider, Staff, Manager and Administrator form the employee chain in
/// that order. Guest sits beside the chain: it outranks only Outsider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Outsider,
    Guest,
    Staff,
    Manager,
    Administrator,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Outsider,
        Role::Guest,
        Role::Staff,
        Role::Manager,
        Role::Administrator,
    ];

    /// Position on the employee chain, `None` for Guest.
    fn chain_rank(self) -> Option<u8> {
        match self {
            Role::Outsider => Some(0),
            Role::Guest => None,
            Role::Staff => Some(1),
            Role::Manager => Some(2),
            Role::Administrator => Some(3),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Outsider => "outsider",
            Role::Guest => "guest",
            Role::Staff => "staff",
            Role::Manager => "manager",
            Role::Administrator => "administrator",
        }
    }
}

/// Returns true when `higher` holds at least the standing of `lower`.
pub fn role_dominates(lower: Role, higher: Role) -> bool {
    if lower == higher || higher == Role::Administrator {
        return true;
    }
    match (lower.chain_rank(), higher.chain_rank()) {
        (Some(l), Some(h)) => l <= h,
        // Guest outranks Outsider and nothing else.
        (Some(0), None) => true,
        _ => false,
    }
}

/// Sensitivity tier of a protected resource, ordered from least to most
/// sensitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataClass {
    Public,
    General,
    Managerial,
    Sensitive,
}

impl DataClass {
    pub const ALL: [DataClass; 4] = [
        DataClass::Public,
        DataClass::General,
        DataClass::Managerial,
        DataClass::Sensitive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataClass::Public => "public",
            DataClass::General => "general",
            DataClass::Managerial => "managerial",
            DataClass::Sensitive => "sensitive",
        }
    }
}

/// The kind of action exercised on a resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessLevel {
    Read,
    Write,
    Admin,
}

impl AccessLevel {
    pub const ALL: [AccessLevel; 3] = [AccessLevel::Read, AccessLevel::Write, AccessLevel::Admin];

    /// Whether holding `self` on a resource covers a request for `requested`.
    /// Write covers Read; nothing else is implied.
    pub fn covers(self, requested: AccessLevel) -> bool {
        self == requested || (self == AccessLevel::Write && requested == AccessLevel::Read)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccessLevel::Read => "read",
            AccessLevel::Write => "write",
            AccessLevel::Admin => "admin",
        }
    }
}

/// The menu a resource is listed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MenuGroup {
    PublicPages,
    StaffMenu,
    ManagerReports,
    AdminMenu,
}

impl MenuGroup {
    /// Display order of the menu groups.
    pub const ALL: [MenuGroup; 4] = [
        MenuGroup::PublicPages,
        MenuGroup::StaffMenu,
        MenuGroup::ManagerReports,
        MenuGroup::AdminMenu,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MenuGroup::PublicPages => "public_pages",
            MenuGroup::StaffMenu => "staff_menu",
            MenuGroup::ManagerReports => "manager_reports",
            MenuGroup::AdminMenu => "admin_menu",
        }
    }
}

macro_rules! text_enum {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == wanted)
                    .ok_or_else(|| Error::Parse(format!("unknown {} '{}'", $what, s)))
            }
        }
    };
}

text_enum!(Role, "role");
text_enum!(DataClass, "data class");
text_enum!(AccessLevel, "access level");
text_enum!(MenuGroup, "menu group");

/// A protected report, form or page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub resource_id: String,
    pub display_name: String,
    pub data_class: DataClass,
    pub menu_group: MenuGroup,
    /// Level exercised when the resource is opened from its menu.
    pub required_level: AccessLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Resource {
    /// Checks the placement rule: admin-menu items are opened at Admin level,
    /// public pages are read-only, and nothing outside the admin menu needs
    /// Admin.
    pub fn check_placement(&self) -> Result<(), String> {
        if self.resource_id.trim().is_empty() {
            return Err("resource_id must not be empty".into());
        }
        match (self.menu_group, self.required_level) {
            (MenuGroup::AdminMenu, AccessLevel::Admin) => Ok(()),
            (MenuGroup::AdminMenu, level) => Err(format!(
                "resource '{}' is in the admin menu but requires {level}; admin menu items require admin",
                self.resource_id
            )),
            (group, AccessLevel::Admin) => Err(format!(
                "resource '{}' requires admin but is placed in {group}",
                self.resource_id
            )),
            (MenuGroup::PublicPages, AccessLevel::Write) => Err(format!(
                "resource '{}' is a public page and cannot be a data-entry form",
                self.resource_id
            )),
            _ => Ok(()),
        }
    }
}

/// How outsiders may become users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfRegistration {
    #[default]
    Disabled,
    AutoGuest,
    PendingApproval,
}

impl FromStr for SelfRegistration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "disabled" => Ok(SelfRegistration::Disabled),
            "auto_guest" => Ok(SelfRegistration::AutoGuest),
            "pending_approval" => Ok(SelfRegistration::PendingApproval),
            other => Err(Error::Parse(format!(
                "unknown self-registration mode '{other}'"
            ))),
        }
    }
}

/// Site-wide policy switches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    #[serde(default)]
    pub multi_admin: bool,
    #[serde(default)]
    pub self_registration: SelfRegistration,
    #[serde(default = "default_true")]
    pub allow_self_password_change: bool,
    #[serde(default = "default_session_ttl")]
    pub session_ttl_seconds: u64,
    #[serde(default = "default_true")]
    pub log_denials: bool,
}

fn default_true() -> bool {
    true
}

fn default_session_ttl() -> u64 {
    1800
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            multi_admin: false,
            self_registration: SelfRegistration::Disabled,
            allow_self_password_change: true,
            session_ttl_seconds: default_session_ttl(),
            log_denials: true,
        }
    }
}

/// The role baseline: what a role may do to a data class with no special
/// grants involved.
///
/// | level | allowed                                                   |
/// |-------|-----------------------------------------------------------|
/// | Read  | outsider, guest: public; staff: +general; manager: +managerial; administrator: all |
/// | Write | administrator only                                        |
/// | Admin | administrator only                                        |
pub fn baseline_allows(role: Role, data_class: DataClass, level: AccessLevel) -> bool {
    match level {
        AccessLevel::Write | AccessLevel::Admin => role == Role::Administrator,
        AccessLevel::Read => {
            let ceiling = match role {
                Role::Outsider | Role::Guest => DataClass::Public,
                Role::Staff => DataClass::General,
                Role::Manager => DataClass::Managerial,
                Role::Administrator => DataClass::Sensitive,
            };
            data_class <= ceiling
        }
    }
}
