//! Two-byte daisy-chain actuator protocol.
//!
//! ```text
//! byte 0:  a6 a5 a4 a3 a2 a1 a0  s      address (hops remaining), start/stop
//! byte 1:  i3 i2 i1 i0 f2 f1 f0  0      intensity level, frequency index, reserved
//! ```
//!
//! Each unit executes a message whose address is 0 and otherwise forwards it
//! downstream with the address decremented.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feedback::{FeedbackFrame, NUM_ACTUATORS};

pub const MAX_ADDRESS: u8 = 127;
pub const MAX_INTENSITY: u8 = 15;
pub const MAX_FREQUENCY_INDEX: u8 = 7;
pub const MAX_UNITS: usize = 20;

/// Drive frequencies selectable by `frequency_index`.
pub const FREQUENCY_TABLE_HZ: [u16; 8] = [50, 83, 100, 133, 166, 200, 250, 300];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("{field} out of range: {value}")]
    Range { field: &'static str, value: u32 },
    #[error("reserved bit set in parameter byte {0:#04x}")]
    Framing(u8),
}

fn check(field: &'static str, value: u32, max: u32) -> Result<(), ProtocolError> {
    if value > max {
        Err(ProtocolError::Range { field, value })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainMessage {
    pub address: u8,
    pub start: bool,
    pub intensity_level: u8,
    pub frequency_index: u8,
}

impl ChainMessage {
    pub fn start(address: u8, intensity_level: u8, frequency_index: u8) -> Self {
        Self {
            address,
            start: true,
            intensity_level,
            frequency_index,
        }
    }

    pub fn stop(address: u8, frequency_index: u8) -> Self {
        Self {
            address,
            start: false,
            intensity_level: 0,
            frequency_index,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        check("address", self.address.into(), MAX_ADDRESS.into())?;
        check("intensity_level", self.intensity_level.into(), MAX_INTENSITY.into())?;
        check("frequency_index", self.frequency_index.into(), MAX_FREQUENCY_INDEX.into())
    }
}

pub fn encode(msg: &ChainMessage) -> Result<[u8; 2], ProtocolError> {
    msg.validate()?;
    Ok([
        (msg.address << 1) | u8::from(msg.start),
        (msg.intensity_level << 4) | (msg.frequency_index << 1),
    ])
}

pub fn decode(bytes: [u8; 2]) -> Result<ChainMessage, ProtocolError> {
    if bytes[1] & 1 != 0 {
        return Err(ProtocolError::Framing(bytes[1]));
    }
    Ok(ChainMessage {
        address: bytes[0] >> 1,
        start: bytes[0] & 1 == 1,
        intensity_level: bytes[1] >> 4,
        frequency_index: (bytes[1] >> 1) & 0x07,
    })
}

/// What one vibration unit is currently doing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UnitState {
    pub unit_index: usize,
    pub intensity_level: u8,
    pub frequency_index: u8,
    pub running: bool,
}

impl UnitState {
    pub fn idle(unit_index: usize) -> Self {
        Self {
            unit_index,
            ..Self::default()
        }
    }

    /// Level as seen on a feedback frame.
    pub fn effective_level(&self) -> u8 {
        if self.running {
            self.intensity_level
        } else {
            0
        }
    }
}

/// Executes or forwards one message.
pub fn step_unit(state: &UnitState, msg: &ChainMessage) -> (UnitState, Option<ChainMessage>) {
    if msg.address == 0 {
        let next = UnitState {
            unit_index: state.unit_index,
            intensity_level: msg.intensity_level,
            frequency_index: msg.frequency_index,
            running: msg.start,
        };
        (next, None)
    } else {
        let forwarded = ChainMessage {
            address: msg.address - 1,
            ..*msg
        };
        (*state, Some(forwarded))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub units: usize,
    pub hop_latency: Duration,
    pub baud: u32,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            units: MAX_UNITS,
            hop_latency: Duration::from_micros(125),
            baud: 115_200,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.units == 0 || self.units > MAX_UNITS {
            return Err(ProtocolError::Range {
                field: "units",
                value: self.units as u32,
            });
        }
        Ok(())
    }
}

/// Time for a message to reach the `target`-th unit (1-based).
pub fn chain_latency(cfg: &ChainConfig, target: usize) -> Result<Duration, ProtocolError> {
    cfg.validate()?;
    if target == 0 || target > cfg.units {
        return Err(ProtocolError::Range {
            field: "target",
            value: target as u32,
        });
    }
    Ok(cfg.hop_latency * target as u32)
}

/// Result of pushing one message down a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    /// Unit that executed the message, if any.
    pub executed_by: Option<usize>,
    pub forwards: usize,
    /// Units the message passed through (including the executor).
    pub visited: Vec<usize>,
}

/// A simulated chain of units advanced one message at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    units: Vec<UnitState>,
}

impl Chain {
    pub fn new(units: usize) -> Result<Self, ProtocolError> {
        ChainConfig {
            units,
            ..ChainConfig::default()
        }
        .validate()?;
        Ok(Self {
            units: (0..units).map(UnitState::idle).collect(),
        })
    }

    pub fn units(&self) -> &[UnitState] {
        &self.units
    }

    pub fn inject(&mut self, msg: ChainMessage) -> Delivery {
        let mut delivery = Delivery {
            executed_by: None,
            forwards: 0,
            visited: Vec::new(),
        };
        let mut current = Some(msg);
        for unit in self.units.iter_mut() {
            let Some(m) = current else { break };
            delivery.visited.push(unit.unit_index);
            let (next_state, forwarded) = step_unit(unit, &m);
            *unit = next_state;
            if forwarded.is_some() {
                delivery.forwards += 1;
            } else {
                delivery.executed_by = Some(unit.unit_index);
            }
            current = forwarded;
        }
        delivery
    }
}

/// Where a feedback channel lives on the hardware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAddress {
    pub chain: usize,
    pub address: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMap {
    addresses: Vec<ChannelAddress>,
    units_per_chain: usize,
}

impl Default for ChannelMap {
    /// Two chains of 16 units; channel `k` is unit `k % 16` on chain `k / 16`.
    fn default() -> Self {
        Self::split(16).expect("16 units per chain is valid")
    }
}

impl ChannelMap {
    pub fn split(units_per_chain: usize) -> Result<Self, ProtocolError> {
        ChainConfig {
            units: units_per_chain,
            ..ChainConfig::default()
        }
        .validate()?;
        Ok(Self {
            addresses: (0..NUM_ACTUATORS)
                .map(|k| ChannelAddress {
                    chain: k / units_per_chain,
                    address: (k % units_per_chain) as u8,
                })
                .collect(),
            units_per_chain,
        })
    }

    pub fn address(&self, channel: usize) -> ChannelAddress {
        self.addresses[channel]
    }

    pub fn chains(&self) -> usize {
        NUM_ACTUATORS.div_ceil(self.units_per_chain)
    }

    pub fn units_per_chain(&self) -> usize {
        self.units_per_chain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCommand {
    pub chain: usize,
    pub channel: usize,
    pub message: ChainMessage,
}

/// Delta-encodes the transition between two frames.
pub fn frame_to_commands(
    frame: &FeedbackFrame,
    previous: &FeedbackFrame,
    map: &ChannelMap,
) -> Vec<ChainCommand> {
    let mut out = Vec::new();
    for channel in 0..NUM_ACTUATORS {
        let level = frame.levels[channel].min(MAX_INTENSITY);
        let prev_level = previous.levels[channel].min(MAX_INTENSITY);
        let was_on = prev_level > 0;
        let unchanged = level == prev_level
            && (level == 0 || frame.frequency_index == previous.frequency_index);
        if unchanged {
            continue;
        }
        let ChannelAddress { chain, address } = map.address(channel);
        let message = if level > 0 {
            ChainMessage::start(address, level, frame.frequency_index)
        } else {
            debug_assert!(was_on);
            ChainMessage::stop(address, frame.frequency_index)
        };
        out.push(ChainCommand {
            chain,
            channel,
            message,
        });
    }
    out
}

/// A full rig: one [`Chain`] per chain in the map.
#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    chains: Vec<Chain>,
    map: ChannelMap,
}

impl Rig {
    pub fn new(map: ChannelMap) -> Self {
        let chains = (0..map.chains())
            .map(|_| Chain::new(map.units_per_chain()).expect("map validated unit count"))
            .collect();
        Self { chains, map }
    }

    pub fn apply(&mut self, commands: &[ChainCommand]) {
        for c in commands {
            self.chains[c.chain].inject(c.message);
        }
    }

    pub fn levels(&self) -> [u8; NUM_ACTUATORS] {
        let mut levels = [0; NUM_ACTUATORS];
        for (k, level) in levels.iter_mut().enumerate() {
            let ChannelAddress { chain, address } = self.map.address(k);
            *level = self.chains[chain].units()[address as usize].effective_level();
        }
        levels
    }

    pub fn frequency(&self, channel: usize) -> u8 {
        let ChannelAddress { chain, address } = self.map.address(channel);
        self.chains[chain].units()[address as usize].frequency_index
    }
}

/// Parses `"0x07 0xfe"`, `"07fe"` or `"07 FE"` into bytes.
pub fn parse_hex(text: &str) -> Result<Vec<u8>, String> {
    let cleaned: String = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .map(|tok| tok.trim_start_matches("0x").trim_start_matches("0X"))
        .collect();
    #[allow(clippy::manual_is_multiple_of)] // msrv 1.82
    if cleaned.len() % 2 != 0 {
        return Err(format!("odd number of hex digits in {text:?}"));
    }
    (0..cleaned.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&cleaned[i..i + 2], 16)
                .map_err(|e| format!("bad hex {:?}: {e}", &cleaned[i..i + 2]))
        })
        .collect()
}

pub fn format_hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02X}"))
        .collect::<Vec<_>>()
        .join(" ")
}
