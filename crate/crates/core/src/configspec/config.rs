use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: value out of domain for `{key}`: {value}")]
    OutOfDomain {
        line: usize,
        key: String,
        value: String,
    },
    #[error("addr_words = {0} is not a power of two")]
    NotPowerOfTwo(u32),
    #[error("line {line}: malformed line `{text}`")]
    Malformed { line: usize, text: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(()),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum! {
    /// ECC capability level. Declaration order is the total order used by
    /// predicates: `none < sed < secded < dected`.
    EccLevel {
        None => "none",
        Sed => "sed",
        Secded => "secded",
        Dected => "dected",
    }
}

token_enum! {
    Tech {
        SramHd => "sram_hd",
        SramHs => "sram_hs",
        Rram => "rram",
    }
}

token_enum! {
    LpMode {
        Retention => "retention",
        Shutdown => "shutdown",
    }
}

token_enum! {
    Burst {
        Single => "single",
        Incr4 => "incr4",
        Incr8 => "incr8",
    }
}

token_enum! {
    /// Deliberately seeded DUT defects. Debug-only; never enabled by default.
    BugMutation {
        SyndromeSwap => "syndrome_swap",
        RetentionLoss => "retention_loss",
        BurstWrap => "burst_wrap",
    }
}

impl EccLevel {
    /// `(t_correct, t_detect)`.
    pub fn capability(self) -> (u32, u32) {
        match self {
            EccLevel::None => (0, 0),
            EccLevel::Sed => (0, 1),
            EccLevel::Secded => (1, 2),
            EccLevel::Dected => (2, 3),
        }
    }

    pub fn supports_width(self, k: u32) -> bool {
        match self {
            EccLevel::Dected => matches!(k, 8 | 16),
            _ => matches!(k, 8 | 16 | 32),
        }
    }
}

impl Burst {
    pub fn beats(self) -> u32 {
        match self {
            Burst::Single => 1,
            Burst::Incr4 => 4,
            Burst::Incr8 => 8,
        }
    }
}

impl Tech {
    /// `(read, write)` latency in cycles per beat.
    pub fn latency(self) -> (u32, u32) {
        match self {
            Tech::SramHd => (2, 2),
            Tech::SramHs => (1, 1),
            Tech::Rram => (3, 5),
        }
    }
}

pub const DATA_WIDTHS: [u32; 3] = [8, 16, 32];
pub const MIN_ADDR_WORDS: u32 = 16;
pub const MAX_ADDR_WORDS: u32 = 65536;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpConfiguration {
    pub ip_name: String,
    pub data_width: u32,
    pub addr_words: u32,
    pub ecc: EccLevel,
    pub tech: Tech,
    pub lp_modes: BTreeSet<LpMode>,
    pub ahb_bursts: BTreeSet<Burst>,
    pub bug_mutations: BTreeSet<BugMutation>,
}

impl IpConfiguration {
    /// Checks every cross-field invariant. Parsing calls this; code that
    /// builds configurations directly (the sweep) should too.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !is_identifier(&self.ip_name) {
            return Err(ConfigError::Invalid(format!(
                "ip_name `{}` is not an identifier",
                self.ip_name
            )));
        }
        if !DATA_WIDTHS.contains(&self.data_width) {
            return Err(ConfigError::Invalid(format!(
                "data_width {} not in {{8, 16, 32}}",
                self.data_width
            )));
        }
        if !(MIN_ADDR_WORDS..=MAX_ADDR_WORDS).contains(&self.addr_words) {
            return Err(ConfigError::Invalid(format!(
                "addr_words {} outside {MIN_ADDR_WORDS}..={MAX_ADDR_WORDS}",
                self.addr_words
            )));
        }
        if !self.addr_words.is_power_of_two() {
            return Err(ConfigError::NotPowerOfTwo(self.addr_words));
        }
        if !self.ahb_bursts.contains(&Burst::Single) {
            return Err(ConfigError::Invalid("ahb_bursts must contain single".into()));
        }
        if !self.ecc.supports_width(self.data_width) {
            return Err(ConfigError::Invalid(format!(
                "ecc={} is not supported at data_width={}",
                self.ecc, self.data_width
            )));
        }
        for m in &self.bug_mutations {
            let applicable = match m {
                BugMutation::SyndromeSwap => self.ecc >= EccLevel::Secded,
                BugMutation::RetentionLoss => self.lp_modes.contains(&LpMode::Retention),
                BugMutation::BurstWrap => {
                    self.ahb_bursts.contains(&Burst::Incr4) || self.ahb_bursts.contains(&Burst::Incr8)
                }
            };
            if !applicable {
                return Err(ConfigError::Invalid(format!(
                    "bug mutation {m} has no effect under this configuration"
                )));
            }
        }
        Ok(())
    }

    /// Canonical file text. Fixed key order, sets in declaration order, and
    /// the `[debug]` section only when mutations are present.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("ip_name = {}\n", self.ip_name));
        out.push_str(&format!("data_width = {}\n", self.data_width));
        out.push_str(&format!("addr_words = {}\n", self.addr_words));
        out.push_str(&format!("ecc = {}\n", self.ecc));
        out.push_str(&format!("tech = {}\n", self.tech));
        out.push_str(&format!("lp_modes = {}\n", join(&self.lp_modes)));
        out.push_str(&format!("ahb_bursts = {}\n", join(&self.ahb_bursts)));
        if !self.bug_mutations.is_empty() {
            out.push_str("\n[debug]\n");
            out.push_str(&format!("bug_mutations = {}\n", join(&self.bug_mutations)));
        }
        out
    }

    /// 16 hex digit FNV-1a 64 of the canonical text.
    pub fn config_tag(&self) -> String {
        format!("{:016x}", crate::fnv1a64(self.to_canonical_text().as_bytes()))
    }
}

fn join<T: fmt::Display>(set: &BTreeSet<T>) -> String {
    set.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[derive(Default)]
struct Draft {
    ip_name: Option<String>,
    data_width: Option<u32>,
    addr_words: Option<u32>,
    ecc: Option<EccLevel>,
    tech: Option<Tech>,
    lp_modes: Option<BTreeSet<LpMode>>,
    ahb_bursts: Option<BTreeSet<Burst>>,
    bug_mutations: Option<BTreeSet<BugMutation>>,
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<(), ConfigError> {
    if slot.is_some() {
        return Err(ConfigError::DuplicateKey {
            line,
            key: key.to_string(),
        });
    }
    *slot = Some(value);
    Ok(())
}

fn parse_set<T: FromStr + Ord>(
    value: &str,
    line: usize,
    key: &str,
) -> Result<BTreeSet<T>, ConfigError> {
    let mut set = BTreeSet::new();
    for token in value.split(',').map(str::trim) {
        if token.is_empty() {
            continue;
        }
        let v = token.parse().map_err(|_| ConfigError::OutOfDomain {
            line,
            key: key.to_string(),
            value: token.to_string(),
        })?;
        set.insert(v);
    }
    Ok(set)
}

fn parse_scalar<T: FromStr>(value: &str, line: usize, key: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::OutOfDomain {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

/// Parses the line-based `key = value` configuration format.
pub fn parse_config(text: &str) -> Result<IpConfiguration, ConfigError> {
    let mut draft = Draft::default();
    let mut in_debug = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if content == "[debug]" {
                in_debug = true;
                continue;
            }
            return Err(ConfigError::Malformed {
                line,
                text: content.to_string(),
            });
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Malformed {
                line,
                text: content.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());

        if in_debug != (key == "bug_mutations") {
            let known = [
                "ip_name",
                "data_width",
                "addr_words",
                "ecc",
                "tech",
                "lp_modes",
                "ahb_bursts",
                "bug_mutations",
            ];
            if known.contains(&key) {
                return Err(ConfigError::Malformed {
                    line,
                    text: format!("`{key}` is not allowed in this section"),
                });
            }
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }

        match key {
            "ip_name" => {
                if !is_identifier(value) {
                    return Err(ConfigError::OutOfDomain {
                        line,
                        key: key.into(),
                        value: value.into(),
                    });
                }
                set_once(&mut draft.ip_name, value.to_string(), line, key)?
            }
            "data_width" => {
                let w: u32 = parse_scalar(value, line, key)?;
                if !DATA_WIDTHS.contains(&w) {
                    return Err(ConfigError::OutOfDomain {
                        line,
                        key: key.into(),
                        value: value.into(),
                    });
                }
                set_once(&mut draft.data_width, w, line, key)?
            }
            "addr_words" => {
                let n: u32 = parse_scalar(value, line, key)?;
                if !(MIN_ADDR_WORDS..=MAX_ADDR_WORDS).contains(&n) {
                    return Err(ConfigError::OutOfDomain {
                        line,
                        key: key.into(),
                        value: value.into(),
                    });
                }
                if !n.is_power_of_two() {
                    return Err(ConfigError::NotPowerOfTwo(n));
                }
                set_once(&mut draft.addr_words, n, line, key)?
            }
            "ecc" => set_once(&mut draft.ecc, parse_scalar(value, line, key)?, line, key)?,
            "tech" => set_once(&mut draft.tech, parse_scalar(value, line, key)?, line, key)?,
            "lp_modes" => set_once(&mut draft.lp_modes, parse_set(value, line, key)?, line, key)?,
            "ahb_bursts" => {
                set_once(&mut draft.ahb_bursts, parse_set(value, line, key)?, line, key)?
            }
            "bug_mutations" => set_once(
                &mut draft.bug_mutations,
                parse_set(value, line, key)?,
                line,
                key,
            )?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    let mut ahb_bursts = draft.ahb_bursts.unwrap_or_default();
    ahb_bursts.insert(Burst::Single);
    let cfg = IpConfiguration {
        ip_name: draft.ip_name.ok_or(ConfigError::MissingKey("ip_name"))?,
        data_width: draft.data_width.ok_or(ConfigError::MissingKey("data_width"))?,
        addr_words: draft.addr_words.ok_or(ConfigError::MissingKey("addr_words"))?,
        ecc: draft.ecc.ok_or(ConfigError::MissingKey("ecc"))?,
        tech: draft.tech.ok_or(ConfigError::MissingKey("tech"))?,
        lp_modes: draft.lp_modes.unwrap_or_default(),
        ahb_bursts,
        bug_mutations: draft.bug_mutations.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "ip_name=m0\ndata_width=8\naddr_words=16\necc=none\ntech=sram_hd";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.ip_name, "m0");
        assert_eq!(cfg.data_width, 8);
        assert_eq!(cfg.addr_words, 16);
        assert_eq!(cfg.ecc, EccLevel::None);
        assert_eq!(cfg.tech, Tech::SramHd);
        assert!(cfg.lp_modes.is_empty());
        assert_eq!(cfg.ahb_bursts, BTreeSet::from([Burst::Single]));
        assert!(cfg.bug_mutations.is_empty());
    }

    #[test]
    fn full_config_echoes_input() {
        let text = "\
# memory subsystem m1
ip_name = m1
data_width = 32        # bits
addr_words = 1024
ecc = secded
tech = rram
lp_modes = retention, shutdown
ahb_bursts = single,incr4

[debug]
bug_mutations = syndrome_swap
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.ecc, EccLevel::Secded);
        assert_eq!(cfg.tech, Tech::Rram);
        assert_eq!(
            cfg.lp_modes,
            BTreeSet::from([LpMode::Retention, LpMode::Shutdown])
        );
        assert_eq!(cfg.ahb_bursts, BTreeSet::from([Burst::Single, Burst::Incr4]));
        assert_eq!(cfg.bug_mutations, BTreeSet::from([BugMutation::SyndromeSwap]));
    }

    #[test]
    fn width_out_of_domain() {
        let err = parse_config(&MINIMAL.replace("data_width=8", "data_width=24")).unwrap_err();
        assert!(matches!(err, ConfigError::OutOfDomain { ref key, .. } if key == "data_width"));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            parse_config(&format!("{MINIMAL}\ncolor=red")),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            parse_config(&format!("{MINIMAL}\necc=sed")),
            Err(ConfigError::DuplicateKey { .. })
        ));
        assert!(matches!(
            parse_config(&MINIMAL.replace("addr_words=16", "addr_words=48")),
            Err(ConfigError::NotPowerOfTwo(48))
        ));
        assert!(matches!(
            parse_config(&MINIMAL.replace("addr_words=16", "addr_words=8")),
            Err(ConfigError::OutOfDomain { .. })
        ));
        assert!(matches!(
            parse_config("ip_name=m0"),
            Err(ConfigError::MissingKey("data_width"))
        ));
        // bug_mutations only lives under [debug]
        assert!(parse_config(&format!("{MINIMAL}\nbug_mutations=burst_wrap")).is_err());
        // keys are case-sensitive
        assert!(matches!(
            parse_config(&MINIMAL.replace("ecc=", "ECC=")),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn dected_needs_narrow_width() {
        let text = MINIMAL
            .replace("ecc=none", "ecc=dected")
            .replace("data_width=8", "data_width=32");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn mutation_must_apply() {
        let text = format!("{MINIMAL}\n[debug]\nbug_mutations=syndrome_swap");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn canonical_text_reparses_to_same_config() {
        let text = "ip_name=x\ndata_width=16\naddr_words=64\necc=dected\ntech=sram_hs\n\
                    lp_modes=shutdown,retention\nahb_bursts=incr8\n[debug]\nbug_mutations=burst_wrap";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_canonical_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.config_tag(), again.config_tag());
        assert_eq!(cfg.config_tag().len(), 16);
    }

    #[test]
    fn ecc_order_is_declaration_order() {
        assert!(EccLevel::None < EccLevel::Sed);
        assert!(EccLevel::Sed < EccLevel::Secded);
        assert!(EccLevel::Secded < EccLevel::Dected);
    }
}
