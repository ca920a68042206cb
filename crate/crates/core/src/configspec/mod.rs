//! IP configuration files and the applicability-predicate language used to
//! tag superset items.

mod config;
mod predicate;

pub use config::{
    parse_config, BugMutation, Burst, ConfigError, EccLevel, IpConfiguration, LpMode, Tech,
};
pub(crate) use config::is_identifier;
pub use predicate::{parse_predicate, Atom, CmpOp, IntKey, Predicate, PredicateError, SetMember};
