//! Program registry: which program ids are which venue, plus the
//! discriminators and log grammar the decoder matches against.
//!
//! The registry is data, loaded from TOML. [`ProgramRegistry::mainnet`]
//! returns the bundled defaults.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Mint, LedgerError};

const MAINNET_TOML: &str = include_str!("../registry/mainnet.toml");

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("reading registry {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("registry is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("bad discriminator {0:?}: expected 16 hex digits")]
    Discriminator(String),
    #[error("bad log pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("log pattern {0:?} must have exactly one capture group")]
    PatternGroups(String),
    #[error("unknown venue tag {0:?}")]
    UnknownVenue(String),
    #[error(transparent)]
    Mint(#[from] LedgerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Venue {
    Jupiter,
    Okx,
    PumpFun,
    PumpFunAmm,
    Raydium,
    Orca,
    Meteora,
    BotRouter,
    Token,
    Token2022,
}

impl Venue {
    pub const ALL: [Venue; 10] = [
        Venue::Jupiter,
        Venue::Okx,
        Venue::PumpFun,
        Venue::PumpFunAmm,
        Venue::Raydium,
        Venue::Orca,
        Venue::Meteora,
        Venue::BotRouter,
        Venue::Token,
        Venue::Token2022,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Venue::Jupiter => "JUPITER",
            Venue::Okx => "OKX",
            Venue::PumpFun => "PUMP_FUN",
            Venue::PumpFunAmm => "PUMP_FUN_AMM",
            Venue::Raydium => "RAYDIUM",
            Venue::Orca => "ORCA",
            Venue::Meteora => "METEORA",
            Venue::BotRouter => "BOT_ROUTER",
            Venue::Token => "TOKEN",
            Venue::Token2022 => "TOKEN_2022",
        }
    }

    pub fn is_token_program(self) -> bool {
        matches!(self, Venue::Token | Venue::Token2022)
    }

    /// Pools whose token transfers count as swap legs.
    pub fn is_amm(self) -> bool {
        matches!(
            self,
            Venue::Raydium | Venue::Orca | Venue::Meteora | Venue::PumpFun | Venue::PumpFunAmm
        )
    }

    /// Any venue whose outer instruction can yield swap evidence.
    pub fn is_swap_venue(self) -> bool {
        !self.is_token_program()
    }
}

impl fmt::Display for Venue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Venue {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Venue::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| RegistryError::UnknownVenue(s.to_string()))
    }
}

pub type Discriminator = [u8; 8];

fn parse_discriminator(hex: &str) -> Result<Discriminator, RegistryError> {
    let bad = || RegistryError::Discriminator(hex.to_string());
    if hex.len() != 16 {
        return Err(bad());
    }
    let mut out = [0u8; 8];
    for (i, byte) in out.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
    }
    Ok(out)
}

/// Matches event payloads: optional event-CPI prefix, then the discriminator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventMatcher {
    pub cpi_prefix: Option<Discriminator>,
    pub discriminator: Discriminator,
}

impl EventMatcher {
    /// Returns the bytes after the matched header.
    pub fn strip<'a>(&self, data: &'a [u8]) -> Option<&'a [u8]> {
        let rest = match &self.cpi_prefix {
            Some(prefix) => data.strip_prefix(prefix.as_slice())?,
            None => data,
        };
        rest.strip_prefix(self.discriminator.as_slice())
    }

    /// Header bytes an emitter would write before the payload.
    pub fn header(&self) -> Vec<u8> {
        let mut v = self.cpi_prefix.map(|p| p.to_vec()).unwrap_or_default();
        v.extend_from_slice(&self.discriminator);
        v
    }
}

#[derive(Clone, Debug)]
pub struct OkxLogGrammar {
    pub source_delta: Regex,
    pub destination_delta: Regex,
    pub source_mint_account: usize,
    pub destination_mint_account: usize,
}

#[derive(Clone, Debug)]
pub struct ProgramRegistry {
    programs: HashMap<String, Venue>,
    pub bot_routers: Vec<String>,
    pub dca_programs: Vec<String>,
    pub route_event: EventMatcher,
    pub okx: OkxLogGrammar,
    pub pump_trade_events: Vec<EventMatcher>,
    pub pump_buy_instructions: Vec<Discriminator>,
    pub pump_sell_instructions: Vec<Discriminator>,
    pub usdc: Mint,
    pub usdt: Mint,
}

#[derive(Deserialize)]
struct RawEvent {
    cpi_prefix: Option<String>,
    discriminator: String,
}

#[derive(Deserialize)]
struct RawJupiter {
    #[serde(default)]
    dca_programs: Vec<String>,
    route_event: RawEvent,
}

#[derive(Deserialize)]
struct RawOkx {
    source_delta_pattern: String,
    destination_delta_pattern: String,
    source_mint_account: usize,
    destination_mint_account: usize,
}

#[derive(Deserialize)]
struct RawPump {
    trade_events: Vec<RawEvent>,
    buy_instructions: Vec<String>,
    sell_instructions: Vec<String>,
}

#[derive(Deserialize)]
struct RawBases {
    usdc: String,
    usdt: String,
}

#[derive(Deserialize)]
struct RawRegistry {
    #[serde(default)]
    bot_routers: Vec<String>,
    programs: BTreeMap<String, String>,
    bases: RawBases,
    jupiter: RawJupiter,
    okx: RawOkx,
    pump_fun: RawPump,
}

fn event(raw: &RawEvent) -> Result<EventMatcher, RegistryError> {
    Ok(EventMatcher {
        cpi_prefix: raw.cpi_prefix.as_deref().map(parse_discriminator).transpose()?,
        discriminator: parse_discriminator(&raw.discriminator)?,
    })
}

fn one_group(pattern: &str) -> Result<Regex, RegistryError> {
    let re = Regex::new(pattern)?;
    if re.captures_len() != 2 {
        return Err(RegistryError::PatternGroups(pattern.to_string()));
    }
    Ok(re)
}

impl ProgramRegistry {
    pub fn mainnet() -> Self {
        Self::from_toml(MAINNET_TOML).expect("bundled registry is valid")
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, RegistryError> {
        let raw: RawRegistry = toml::from_str(text)?;
        let mut programs = HashMap::new();
        for (id, tag) in &raw.programs {
            programs.insert(id.clone(), tag.parse::<Venue>()?);
        }
        for id in &raw.bot_routers {
            programs.insert(id.clone(), Venue::BotRouter);
        }
        let discs = |v: &[String]| v.iter().map(|h| parse_discriminator(h)).collect::<Result<Vec<_>, _>>();
        Ok(Self {
            programs,
            bot_routers: raw.bot_routers,
            dca_programs: raw.jupiter.dca_programs,
            route_event: event(&raw.jupiter.route_event)?,
            okx: OkxLogGrammar {
                source_delta: one_group(&raw.okx.source_delta_pattern)?,
                destination_delta: one_group(&raw.okx.destination_delta_pattern)?,
                source_mint_account: raw.okx.source_mint_account,
                destination_mint_account: raw.okx.destination_mint_account,
            },
            pump_trade_events: raw.pump_fun.trade_events.iter().map(event).collect::<Result<_, _>>()?,
            pump_buy_instructions: discs(&raw.pump_fun.buy_instructions)?,
            pump_sell_instructions: discs(&raw.pump_fun.sell_instructions)?,
            usdc: Mint::new(raw.bases.usdc)?,
            usdt: Mint::new(raw.bases.usdt)?,
        })
    }

    pub fn venue(&self, program_id: &str) -> Option<Venue> {
        self.programs.get(program_id).copied()
    }

    pub fn is_dca_program(&self, program_id: &str) -> bool {
        self.dca_programs.iter().any(|p| p == program_id)
    }

    /// Registers (or re-tags) a program id.
    pub fn insert_program(&mut self, program_id: impl Into<String>, venue: Venue) {
        let id = program_id.into();
        if venue == Venue::BotRouter && !self.bot_routers.contains(&id) {
            self.bot_routers.push(id.clone());
        }
        self.programs.insert(id, venue);
    }

    /// Replaces every program id with the given map, keeping discriminators.
    pub fn with_programs(mut self, programs: impl IntoIterator<Item = (String, Venue)>) -> Self {
        self.programs.clear();
        self.bot_routers.clear();
        for (id, venue) in programs {
            self.insert_program(id, venue);
        }
        self
    }

    pub fn program_ids(&self, venue: Venue) -> impl Iterator<Item = &str> {
        self.programs
            .iter()
            .filter(move |(_, v)| **v == venue)
            .map(|(k, _)| k.as_str())
    }

    pub fn is_pump_buy_or_sell(&self, data: &[u8]) -> bool {
        data.len() >= 8
            && self
                .pump_buy_instructions
                .iter()
                .chain(&self.pump_sell_instructions)
                .any(|d| data[..8] == d[..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn anchor(preimage: &str) -> Discriminator {
        let digest = Sha256::digest(preimage.as_bytes());
        digest[..8].try_into().unwrap()
    }

    #[test]
    fn bundled_discriminators_match_anchor_derivation() {
        let reg = ProgramRegistry::mainnet();
        assert_eq!(reg.route_event.discriminator, anchor("event:SwapEvent"));
        // the event-CPI tag is the digest prefix as a big-endian u64, stored little-endian
        let mut tag = anchor("anchor:event");
        tag.reverse();
        assert_eq!(reg.route_event.cpi_prefix, Some(tag));
        assert_eq!(reg.pump_trade_events[0].discriminator, anchor("event:TradeEvent"));
        assert_eq!(reg.pump_buy_instructions[0], anchor("global:buy"));
        assert_eq!(reg.pump_sell_instructions[0], anchor("global:sell"));
    }

    #[test]
    fn mainnet_ids_are_tagged() {
        let reg = ProgramRegistry::mainnet();
        assert_eq!(reg.venue("JUP6LkbZbjS1jKKwapdHNy74zcZ3tLUZoi5QNyVTaV4"), Some(Venue::Jupiter));
        assert_eq!(reg.venue("TokenkegQfeZyiNwAJbNbGKPFXCWuBvf9Ss623VQ5DA"), Some(Venue::Token));
        assert!(reg.is_dca_program("DCA265Vj8a9CEuX1eb1LWRnDT7uK6q1xMipnNyatn23M"));
        assert!(reg.bot_routers.is_empty());
        assert_eq!(reg.program_ids(Venue::Raydium).count(), 3);
    }

    #[test]
    fn event_matcher_strips_prefix_and_discriminator() {
        let m = EventMatcher {
            cpi_prefix: Some([1; 8]),
            discriminator: [2; 8],
        };
        let mut data = m.header();
        data.extend_from_slice(&[9, 9]);
        assert_eq!(m.strip(&data), Some(&[9u8, 9][..]));
        assert_eq!(m.strip(&data[8..]), None);
        let bare = EventMatcher {
            cpi_prefix: None,
            discriminator: [2; 8],
        };
        assert_eq!(bare.strip(&data[8..]), Some(&[9u8, 9][..]));
    }

    #[test]
    fn rejects_bad_discriminator() {
        let text = MAINNET_TOML.replace("40c6cde8260871e2", "40c6");
        assert!(matches!(ProgramRegistry::from_toml(&text), Err(RegistryError::Discriminator(_))));
    }

    #[test]
    fn rejects_unknown_venue() {
        let text = MAINNET_TOML.replace("= \"ORCA\"", "= \"SERUM\"");
        assert!(matches!(ProgramRegistry::from_toml(&text), Err(RegistryError::UnknownVenue(_))));
    }

    #[test]
    fn okx_patterns_capture_one_integer() {
        let reg = ProgramRegistry::mainnet();
        let line = "Program log: after_source_balance: 0, after_destination_balance: 7, source_token_change: 1000, destination_token_change: 250";
        let src = reg.okx.source_delta.captures(line).unwrap();
        let dst = reg.okx.destination_delta.captures(line).unwrap();
        assert_eq!(&src[1], "1000");
        assert_eq!(&dst[1], "250");
    }
}
