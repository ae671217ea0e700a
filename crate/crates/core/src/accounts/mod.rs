//! Registration and the two-step login.
//!
//! Step one checks the password (three consecutive failures lock the
//! account) and delivers the current code of every slot. Step two takes one
//! code: the genuine slot authenticates, a decoy slot locks the account and
//! records a breach, and a code matching no slot counts as a strike.
//!
//! The sweet index never enters this module's store. Registration hands it
//! to the honeychecker; login asks the honeychecker about matching slots.

mod password;
mod store;

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::audit::{AuditKind, AuditRecord, AuditSink, TracingAudit};
use crate::clock::Clock;
use crate::honeychecker::{HoneycheckerError, IndexOracle};
use crate::honeytoken::{self, SubmissionOutcome, SweetBundle};
use crate::otp::{OtpCode, OtpError, TotpParams};
use crate::provisioning::{self, ProvisioningBundle};
use crate::sms::{self, SmsGateway, SmsMessage};

pub use password::{hash_password, verify_password, HashParams, PasswordPolicy};
pub use store::{AccountStore, StoreState, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccountError {
    #[error("username {0:?} is already taken")]
    Conflict(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    WeakPassword(String),
    #[error("invalid username or password")]
    InvalidCredentials,
    #[error("account is locked ({0})")]
    Locked(LockReason),
    #[error("login session {0}")]
    Session(&'static str),
    #[error("not authorized")]
    Authorization,
    #[error("no such user {0:?}")]
    UnknownUser(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("store error: {0}")]
    Store(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<OtpError> for AccountError {
    fn from(e: OtpError) -> Self {
        AccountError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockReason {
    PasswordFailures,
    Breach,
    OtpFailures,
}

impl std::fmt::Display for LockReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LockReason::PasswordFailures => "too many wrong passwords",
            LockReason::Breach => "breach attempt detected",
            LockReason::OtpFailures => "too many wrong codes",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum AccountStatus {
    Active,
    Locked { reason: LockReason, at: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub username: String,
    pub password_hash: String,
    pub firstname: String,
    pub lastname: String,
    pub phone: String,
    pub status: AccountStatus,
    pub failed_password_count: u32,
    pub failed_otp_count: u32,
    pub bundle: SweetBundle,
    pub created_at: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingOtp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginSession {
    pub session_id: String,
    pub username: String,
    pub state: SessionState,
    pub issued_at: i64,
    pub expires_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreachEvent {
    pub username: String,
    pub submitted_code: OtpCode,
    pub matched_slot: u32,
    pub at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationForm {
    pub username: String,
    pub password: String,
    pub firstname: String,
    pub lastname: String,
    pub phone: String,
    pub position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginChallenge {
    pub session_id: String,
    pub expires_at: i64,
    pub slots: usize,
    pub sms_delivered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OtpOutcome {
    Authenticated {
        token: String,
    },
    /// Code matched no slot; the session is gone but the account is open.
    Rejected {
        attempts_remaining: u32,
    },
    Locked {
        reason: LockReason,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccountsConfig {
    pub issuer: String,
    pub slots: usize,
    /// Secret byte length per slot; empty means the default schedule.
    pub length_schedule: Vec<usize>,
    pub totp: TotpParams,
    pub max_password_failures: u32,
    pub max_otp_failures: u32,
    pub session_ttl_secs: i64,
    pub password_policy: PasswordPolicy,
    pub hash: HashParams,
    pub admin_token: String,
}

impl Default for AccountsConfig {
    fn default() -> Self {
        Self {
            issuer: "2FHA".into(),
            slots: honeytoken::DEFAULT_SLOTS,
            length_schedule: Vec::new(),
            totp: TotpParams::default(),
            max_password_failures: 3,
            max_otp_failures: 3,
            session_ttl_secs: 90,
            password_policy: PasswordPolicy::default(),
            hash: HashParams::default(),
            admin_token: String::new(),
        }
    }
}

impl AccountsConfig {
    pub fn schedule(&self) -> Vec<usize> {
        if self.length_schedule.is_empty() {
            honeytoken::default_length_schedule(self.slots)
        } else {
            self.length_schedule.clone()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.totp.validate().map_err(|e| e.to_string())?;
        if self.slots < 2 {
            return Err(format!("slots must be at least 2, got {}", self.slots));
        }
        let schedule = self.schedule();
        if schedule.len() != self.slots || schedule.iter().any(|&l| l < crate::otp::MIN_SECRET_LEN)
        {
            return Err(format!(
                "length schedule {schedule:?} does not fit {} slots",
                self.slots
            ));
        }
        if self.issuer.trim().is_empty() {
            return Err("issuer must not be empty".into());
        }
        if self.max_password_failures == 0 || self.max_otp_failures == 0 {
            return Err("failure limits must be positive".into());
        }
        if self.session_ttl_secs <= 0 {
            return Err("session ttl must be positive".into());
        }
        Ok(())
    }
}

/// Entropy source for secrets, salts, session ids and tokens.
pub trait SecureRng: RngCore + CryptoRng + Send {}
impl<T: RngCore + CryptoRng + Send> SecureRng for T {}

fn validate_username(username: &str) -> Result<(), AccountError> {
    if username.is_empty() || username.chars().count() > 64 {
        return Err(AccountError::Validation(
            "username must be 1 to 64 characters".into(),
        ));
    }
    if username
        .chars()
        .any(|c| c.is_whitespace() || c.is_control())
    {
        return Err(AccountError::Validation(
            "username must not contain whitespace or control characters".into(),
        ));
    }
    Ok(())
}

/// `+` followed by 7 to 15 digits, first digit non-zero.
fn validate_phone(phone: &str) -> Result<(), AccountError> {
    let digits = phone.strip_prefix('+').unwrap_or("");
    let ok = (7..=15).contains(&digits.len())
        && digits.bytes().all(|b| b.is_ascii_digit())
        && !digits.starts_with('0');
    if ok {
        Ok(())
    } else {
        Err(AccountError::Validation(
            "phone must be in E.164 form, e.g. +306912345678".into(),
        ))
    }
}

fn validate_name(what: &str, value: &str) -> Result<(), AccountError> {
    if value.trim().is_empty() || value.chars().count() > 100 || value.chars().any(char::is_control)
    {
        return Err(AccountError::Validation(format!(
            "{what} must be 1 to 100 printable characters"
        )));
    }
    Ok(())
}

fn honeychecker_error(e: HoneycheckerError) -> AccountError {
    match e {
        HoneycheckerError::Validation(msg) => AccountError::Validation(msg),
        other => AccountError::Integrity(other.to_string()),
    }
}

pub struct AccountService {
    config: AccountsConfig,
    store: AccountStore,
    honeychecker: Arc<dyn IndexOracle>,
    sms: Arc<dyn SmsGateway>,
    clock: Arc<dyn Clock>,
    audit: Arc<dyn AuditSink>,
    rng: Mutex<Box<dyn SecureRng>>,
    user_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    dummy_hash: String,
}

impl AccountService {
    pub fn new(
        config: AccountsConfig,
        store: AccountStore,
        honeychecker: Arc<dyn IndexOracle>,
        sms: Arc<dyn SmsGateway>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, AccountError> {
        Self::with_rng(config, store, honeychecker, sms, clock, Box::new(OsRng))
    }

    pub fn with_rng(
        config: AccountsConfig,
        store: AccountStore,
        honeychecker: Arc<dyn IndexOracle>,
        sms: Arc<dyn SmsGateway>,
        clock: Arc<dyn Clock>,
        mut rng: Box<dyn SecureRng>,
    ) -> Result<Self, AccountError> {
        config.validate().map_err(AccountError::Validation)?;
        let dummy_hash = hash_password("unused dummy password", &config.hash, rng.as_mut())
            .map_err(AccountError::Internal)?;
        Ok(Self {
            config,
            store,
            honeychecker,
            sms,
            clock,
            audit: Arc::new(TracingAudit),
            rng: Mutex::new(rng),
            user_locks: Mutex::new(HashMap::new()),
            dummy_hash,
        })
    }

    pub fn with_audit(mut self, audit: Arc<dyn AuditSink>) -> Self {
        self.audit = audit;
        self
    }

    pub fn config(&self) -> &AccountsConfig {
        &self.config
    }

    pub fn store(&self) -> &AccountStore {
        &self.store
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn user_lock(&self, username: &str) -> Arc<Mutex<()>> {
        self.user_locks
            .lock()
            .entry(username.to_owned())
            .or_default()
            .clone()
    }

    fn audit(&self, username: &str, event: AuditKind) {
        self.audit.record(&AuditRecord {
            at: self.clock.now(),
            username: username.to_owned(),
            event,
        });
    }

    fn random_token(&self) -> String {
        let mut bytes = [0u8; 32];
        self.rng.lock().fill_bytes(&mut bytes);
        hex::encode(bytes)
    }

    fn put_user(&self, user: UserRecord) -> Result<(), AccountError> {
        self.store
            .write(|s| {
                s.users.insert(user.username.clone(), user);
            })
            .map_err(AccountError::Store)
    }

    /// Creates the account, hands the chosen position to the honeychecker
    /// and returns one provisioning entry per slot.
    pub fn register(&self, form: &RegistrationForm) -> Result<ProvisioningBundle, AccountError> {
        validate_username(&form.username)?;
        validate_name("firstname", &form.firstname)?;
        validate_name("lastname", &form.lastname)?;
        validate_phone(&form.phone)?;
        if form.position < 1 || form.position as usize > self.config.slots {
            return Err(AccountError::Validation(format!(
                "position must be in 1..={}",
                self.config.slots
            )));
        }
        self.config
            .password_policy
            .check(&form.password, &form.username)
            .map_err(AccountError::WeakPassword)?;

        let lock = self.user_lock(&form.username);
        let _guard = lock.lock();
        if self.store.read(|s| s.users.contains_key(&form.username)) {
            return Err(AccountError::Conflict(form.username.clone()));
        }

        let (password_hash, bundle) = {
            let mut rng = self.rng.lock();
            let hash = hash_password(&form.password, &self.config.hash, rng.as_mut())
                .map_err(AccountError::Internal)?;
            let bundle = honeytoken::generate_bundle(
                &form.username,
                self.config.slots,
                &self.config.schedule(),
                rng.as_mut(),
            )
            .map_err(|e| AccountError::Internal(e.to_string()))?;
            (hash, bundle)
        };
        let provisioning =
            provisioning::provision_bundle(&self.config.issuer, &bundle, &self.config.totp)
                .map_err(|e| AccountError::Validation(e.to_string()))?;

        self.honeychecker
            .set_index(&form.username, form.position)
            .map_err(honeychecker_error)?;

        let record = UserRecord {
            username: form.username.clone(),
            password_hash,
            firstname: form.firstname.clone(),
            lastname: form.lastname.clone(),
            phone: form.phone.clone(),
            status: AccountStatus::Active,
            failed_password_count: 0,
            failed_otp_count: 0,
            bundle,
            created_at: self.clock.now(),
        };
        if let Err(e) = self.put_user(record) {
            if let Err(cleanup) = self.honeychecker.delete_index(&form.username) {
                tracing::error!(username = %form.username, error = %cleanup, "failed to roll back sweet index");
            }
            return Err(e);
        }
        self.audit(&form.username, AuditKind::Registered);
        Ok(provisioning)
    }

    /// Password step. On success a session is opened and the current code of
    /// every slot is sent by SMS; a failed SMS does not fail the login since
    /// the same codes are available in the authenticator app.
    pub fn login_password(
        &self,
        username: &str,
        password: &str,
    ) -> Result<LoginChallenge, AccountError> {
        let lock = self.user_lock(username);
        let _guard = lock.lock();
        let Some(mut user) = self.store.user(username) else {
            // Same work as a real check so timing does not reveal the miss.
            let _ = verify_password(password, &self.dummy_hash);
            return Err(AccountError::InvalidCredentials);
        };
        if let AccountStatus::Locked { reason, .. } = user.status {
            return Err(AccountError::Locked(reason));
        }

        let now = self.clock.now();
        if !verify_password(password, &user.password_hash) {
            user.failed_password_count += 1;
            let locked = user.failed_password_count >= self.config.max_password_failures;
            if locked {
                user.status = AccountStatus::Locked {
                    reason: LockReason::PasswordFailures,
                    at: now,
                };
            }
            self.put_user(user)?;
            if locked {
                self.audit(username, AuditKind::PasswordLockout);
                return Err(AccountError::Locked(LockReason::PasswordFailures));
            }
            self.audit(username, AuditKind::PasswordRejected);
            return Err(AccountError::InvalidCredentials);
        }

        user.failed_password_count = 0;
        let session = LoginSession {
            session_id: self.random_token(),
            username: username.to_owned(),
            state: SessionState::AwaitingOtp,
            issued_at: now,
            expires_at: now + self.config.session_ttl_secs,
        };
        let codes = honeytoken::codes_for_delivery(&user.bundle, now, &self.config.totp)
            .map_err(|e| AccountError::Internal(e.to_string()))?;
        let phone = user.phone.clone();
        let slots = user.bundle.len();
        self.store
            .write(|s| {
                s.sessions.retain(|_, existing| existing.expires_at >= now);
                s.sessions
                    .insert(session.session_id.clone(), session.clone());
                s.users.insert(user.username.clone(), user);
            })
            .map_err(AccountError::Store)?;
        self.audit(username, AuditKind::PasswordAccepted);

        let sms_delivered = match sms::send_sms(
            self.sms.as_ref(),
            &SmsMessage::with_codes(&phone, &codes),
        ) {
            Ok(_) => true,
            Err(e) => {
                tracing::warn!(username, error = %e, "sms delivery failed; codes remain available in-app");
                self.audit(username, AuditKind::SmsDeliveryFailed);
                false
            }
        };
        Ok(LoginChallenge {
            session_id: session.session_id,
            expires_at: session.expires_at,
            slots,
            sms_delivered,
        })
    }

    /// Code step. The session is consumed whatever the outcome.
    pub fn login_otp(
        &self,
        session_id: &str,
        candidate: &str,
        unix_time: i64,
    ) -> Result<OtpOutcome, AccountError> {
        let code = OtpCode::parse(candidate)?;
        if code.digits() != self.config.totp.digits {
            return Err(AccountError::Validation(format!(
                "code must have {} digits",
                self.config.totp.digits
            )));
        }
        let session = self
            .store
            .write(|s| s.sessions.remove(session_id))
            .map_err(AccountError::Store)?
            .ok_or(AccountError::Session("unknown or already used"))?;
        if unix_time > session.expires_at {
            return Err(AccountError::Session("expired"));
        }

        let username = session.username;
        let lock = self.user_lock(&username);
        let _guard = lock.lock();
        let mut user = self.store.user(&username).ok_or_else(|| {
            AccountError::Integrity(format!("session for missing user {username:?}"))
        })?;
        if let AccountStatus::Locked { reason, .. } = user.status {
            return Err(AccountError::Locked(reason));
        }

        let outcome =
            honeytoken::classify_with(&user.bundle, &code, unix_time, &self.config.totp, |slot| {
                self.honeychecker
                    .check(&username, slot)
                    .map_err(|e| match e {
                        HoneycheckerError::UnknownUser(_) => AccountError::Integrity(
                            "honeychecker has no index for this account".into(),
                        ),
                        other => honeychecker_error(other),
                    })
            })?;

        match outcome {
            SubmissionOutcome::Genuine => {
                if user.failed_otp_count != 0 {
                    user.failed_otp_count = 0;
                    self.put_user(user)?;
                }
                self.audit(&username, AuditKind::Authenticated);
                Ok(OtpOutcome::Authenticated {
                    token: self.random_token(),
                })
            }
            SubmissionOutcome::Decoy(slot) => {
                user.status = AccountStatus::Locked {
                    reason: LockReason::Breach,
                    at: unix_time,
                };
                let event = BreachEvent {
                    username: username.clone(),
                    submitted_code: code,
                    matched_slot: slot,
                    at: unix_time,
                };
                self.store
                    .write(|s| {
                        s.users.insert(username.clone(), user);
                        s.breach_events.push(event);
                    })
                    .map_err(AccountError::Store)?;
                self.audit(&username, AuditKind::BreachDetected);
                Ok(OtpOutcome::Locked {
                    reason: LockReason::Breach,
                })
            }
            SubmissionOutcome::NoMatch => {
                user.failed_otp_count += 1;
                let remaining = self
                    .config
                    .max_otp_failures
                    .saturating_sub(user.failed_otp_count);
                if remaining == 0 {
                    user.status = AccountStatus::Locked {
                        reason: LockReason::OtpFailures,
                        at: unix_time,
                    };
                }
                self.put_user(user)?;
                if remaining == 0 {
                    self.audit(&username, AuditKind::OtpLockout);
                    Ok(OtpOutcome::Locked {
                        reason: LockReason::OtpFailures,
                    })
                } else {
                    self.audit(&username, AuditKind::OtpRejected);
                    Ok(OtpOutcome::Rejected {
                        attempts_remaining: remaining,
                    })
                }
            }
        }
    }

    /// Reactivates an account and clears its counters. Breach events stay.
    pub fn unlock(&self, admin_credential: &str, username: &str) -> Result<(), AccountError> {
        let expected = self.config.admin_token.as_bytes();
        if expected.is_empty() || !bool::from(expected.ct_eq(admin_credential.as_bytes())) {
            return Err(AccountError::Authorization);
        }
        let lock = self.user_lock(username);
        let _guard = lock.lock();
        let mut user = self
            .store
            .user(username)
            .ok_or_else(|| AccountError::UnknownUser(username.to_owned()))?;
        user.status = AccountStatus::Active;
        user.failed_password_count = 0;
        user.failed_otp_count = 0;
        self.put_user(user)?;
        self.audit(username, AuditKind::Unlocked);
        Ok(())
    }

    pub fn status(&self, username: &str) -> Option<AccountStatus> {
        self.store.user(username).map(|u| u.status)
    }
}
