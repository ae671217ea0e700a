//! Honeytoken two-factor authentication.
//!
//! Each user receives N TOTP secrets ("sweet" slots) at registration, all
//! scannable into an ordinary authenticator app. Only one slot, chosen by
//! the user and stored solely by the [`honeychecker`], is genuine. Logging
//! in with any other slot's code is treated as evidence of compromise: the
//! account locks and a breach event is recorded.

pub mod accounts;
pub mod audit;
pub mod base32;
pub mod clock;
pub mod honeychecker;
pub mod honeytoken;
pub mod otp;
pub mod provisioning;
pub mod sms;

#[cfg(test)]
pub(crate) mod test_oracle;

pub use accounts::{
    AccountError, AccountService, AccountStatus, AccountStore, AccountsConfig, LockReason,
    LoginChallenge, OtpOutcome, RegistrationForm,
};
pub use clock::{Clock, ManualClock, SystemClock};
pub use honeychecker::{AlarmSignal, AlarmSink, Honeychecker, HoneycheckerError, IndexOracle};
pub use honeytoken::{SubmissionOutcome, SweetBundle};
pub use otp::{Algorithm, OtpCode, OtpError, SweetSecret, TotpParams};
pub use provisioning::{OtpAuthUri, ProvisioningBundle, ProvisioningDocument, QrPayload};
pub use sms::{SmsGateway, SmsMessage};
