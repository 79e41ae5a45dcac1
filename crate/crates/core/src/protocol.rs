//! The N-party ring key-agreement state machine.
//!
//! Every party owns one circulating value, `bases[choice]^secret`, emitted in
//! round 1 to its right neighbor. Each hop the receiver raises the value to
//! its own secret and forwards it; after N-1 hops the value has absorbed all
//! N secrets and the last receiver keeps it as a final key. Party i therefore
//! ends up holding the value that started at party (i+1) mod N; the
//! consequences for who shares a key with whom live in [`crate::outcome`].
//!
//! State transitions are pure: absorbing a message returns a fresh
//! [`PartyState`] and leaves the input untouched, so distinct parties can be
//! driven from distinct threads as long as each one sees its own messages in
//! round order.

use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use rand::Rng;
use thiserror::Error;

use crate::modmath::{mod_pow, Element, GroupParams, ModMathError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("secret must lie in [2, p-2]")]
    SecretOutOfRange,
    #[error("base index {index} out of range for {num_bases} bases")]
    BadBaseIndex { index: usize, num_bases: usize },
    #[error("position {position} out of range for {num_parties} parties")]
    PositionOutOfRange { position: usize, num_parties: usize },
    #[error("ceremony needs at least 2 parties, got {0}")]
    BadPartyCount(usize),
    #[error("party already emitted its initial message")]
    AlreadyStarted,
    #[error("message from position {got}, expected left neighbor {expected}")]
    WrongSender { expected: usize, got: usize },
    #[error("message round {got}, party expects round {expected}")]
    RoundMismatch { expected: usize, got: usize },
    #[error("two parties claim position {0}")]
    DuplicatePosition(usize),
    #[error("{secrets} secrets but {choices} base choices")]
    LengthMismatch { secrets: usize, choices: usize },
    #[error(transparent)]
    Math(#[from] ModMathError),
}

/// Wire unit of the ceremony. The base used to form `value` is deliberately
/// not a field: base picks stay private for the whole run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub session_id: String,
    pub round: usize,
    pub from_position: usize,
    pub value: Element,
}

/// One participant: ring position, secret exponent, private base pick, the
/// value currently held, and a round counter that runs from 0 (idle) to N
/// (completed).
#[derive(Debug, Clone)]
pub struct PartyState {
    position: usize,
    num_parties: usize,
    secret: BigUint,
    base_index: usize,
    held: Option<Element>,
    round: usize,
    params: Arc<GroupParams>,
}

/// What absorbing a message produced: either a message for the right
/// neighbor, or the final key once the value has completed its N-1 hops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbsorbOutcome {
    Forward(Message),
    Final(Element),
}

impl PartyState {
    pub fn new(
        position: usize,
        num_parties: usize,
        secret: BigUint,
        base_index: usize,
        params: Arc<GroupParams>,
    ) -> Result<Self, ProtocolError> {
        if num_parties < 2 {
            return Err(ProtocolError::BadPartyCount(num_parties));
        }
        if position >= num_parties {
            return Err(ProtocolError::PositionOutOfRange { position, num_parties });
        }
        let two = BigUint::from(2u32);
        if params.p < BigUint::from(4u32) || secret < two || secret > &params.p - &two {
            return Err(ProtocolError::SecretOutOfRange);
        }
        if base_index >= params.num_bases() {
            return Err(ProtocolError::BadBaseIndex {
                index: base_index,
                num_bases: params.num_bases(),
            });
        }
        Ok(PartyState {
            position,
            num_parties,
            secret,
            base_index,
            held: None,
            round: 0,
            params,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    pub fn held(&self) -> Option<&Element> {
        self.held.as_ref()
    }

    /// The final key, present once the party has absorbed all N-1 inbound
    /// values.
    pub fn final_key(&self) -> Option<&Element> {
        if self.round == self.num_parties {
            self.held.as_ref()
        } else {
            None
        }
    }

    /// Emits the round-1 message carrying `bases[base_index]^secret` to the
    /// right neighbor, advancing the party to round 1.
    pub fn initial_message(
        &self,
        session_id: &str,
    ) -> Result<(PartyState, Message), ProtocolError> {
        if self.round != 0 {
            return Err(ProtocolError::AlreadyStarted);
        }
        let base = &self.params.bases[self.base_index];
        let value = Element::from_reduced(mod_pow(
            &(base % &self.params.p),
            &self.secret,
            &self.params.p,
        )?);
        let mut next = self.clone();
        next.round = 1;
        next.held = Some(value.clone());
        let msg = Message {
            session_id: session_id.to_string(),
            round: 1,
            from_position: self.position,
            value,
        };
        Ok((next, msg))
    }

    /// Raises the inbound value to the party's secret. The result is
    /// forwarded while the value still has hops to make, and kept as the
    /// final key on hop N-1.
    pub fn absorb_and_forward(
        &self,
        msg: &Message,
    ) -> Result<(PartyState, AbsorbOutcome), ProtocolError> {
        let left = (self.position + self.num_parties - 1) % self.num_parties;
        if msg.from_position != left {
            return Err(ProtocolError::WrongSender {
                expected: left,
                got: msg.from_position,
            });
        }
        if self.round == 0 || self.round >= self.num_parties || msg.round != self.round {
            return Err(ProtocolError::RoundMismatch {
                expected: self.round,
                got: msg.round,
            });
        }
        let value = Element::from_reduced(mod_pow(msg.value.value(), &self.secret, &self.params.p)?);
        let mut next = self.clone();
        next.round = msg.round + 1;
        next.held = Some(value.clone());
        let outcome = if msg.round < self.num_parties - 1 {
            AbsorbOutcome::Forward(Message {
                session_id: msg.session_id.clone(),
                round: msg.round + 1,
                from_position: self.position,
                value,
            })
        } else {
            AbsorbOutcome::Final(value)
        };
        Ok((next, outcome))
    }
}

/// Persisted record of a completed ceremony: every message in delivery order
/// plus per-party final keys. Base picks are recorded strictly for offline
/// audit; they are never part of any message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub session_id: String,
    pub params: GroupParams,
    pub messages: Vec<Message>,
    pub final_keys: Vec<Element>,
    pub base_choices: Vec<usize>,
}

impl Transcript {
    pub fn num_parties(&self) -> usize {
        self.final_keys.len()
    }

    /// Structural invariants: N(N-1) messages, and each circulating value's
    /// rounds strictly increasing from 1 through N-1.
    pub fn check_shape(&self) -> Result<(), String> {
        let n = self.num_parties();
        if n < 2 {
            return Err(format!("{n} parties, need at least 2"));
        }
        if self.base_choices.len() != n {
            return Err(format!(
                "{} base choices for {n} parties",
                self.base_choices.len()
            ));
        }
        let expected = n * (n - 1);
        if self.messages.len() != expected {
            return Err(format!(
                "{} messages, expected {expected} for {n} parties",
                self.messages.len()
            ));
        }
        // Message with round r from position f belongs to the value owned by
        // (f - (r-1)) mod n; each owner's rounds must be exactly 1..=n-1.
        let mut rounds_by_owner: Vec<Vec<usize>> = vec![Vec::new(); n];
        for msg in &self.messages {
            if msg.round == 0 || msg.round > n - 1 {
                return Err(format!("message round {} outside [1, {}]", msg.round, n - 1));
            }
            if msg.from_position >= n {
                return Err(format!("sender position {} outside ring", msg.from_position));
            }
            let owner = (msg.from_position + n - (msg.round - 1) % n) % n;
            rounds_by_owner[owner].push(msg.round);
        }
        for (owner, rounds) in rounds_by_owner.iter().enumerate() {
            let expected: Vec<usize> = (1..n).collect();
            if rounds != &expected {
                return Err(format!(
                    "value owned by position {owner} has rounds {rounds:?}, expected {expected:?}"
                ));
            }
        }
        Ok(())
    }
}

/// Draws n secrets uniformly from [2, p-2]; the caller supplies the RNG so
/// runs are reproducible.
pub fn random_secrets<R: Rng + ?Sized>(
    params: &GroupParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<BigUint>, ProtocolError> {
    let two = BigUint::from(2u32);
    if params.p < BigUint::from(5u32) {
        return Err(ProtocolError::SecretOutOfRange);
    }
    let upper = &params.p - 1u32; // exclusive, so the draw covers [2, p-2]
    Ok((0..n).map(|_| rng.gen_biguint_range(&two, &upper)).collect())
}

/// Runs a ceremony for the given secrets and base choices, delivering
/// messages round-major and position-minor, and returns the full transcript.
pub fn run_ceremony(
    params: &GroupParams,
    session_id: &str,
    secrets: &[BigUint],
    choices: &[usize],
) -> Result<Transcript, ProtocolError> {
    if secrets.len() != choices.len() {
        return Err(ProtocolError::LengthMismatch {
            secrets: secrets.len(),
            choices: choices.len(),
        });
    }
    let shared = Arc::new(params.clone());
    let parties = secrets
        .iter()
        .zip(choices)
        .enumerate()
        .map(|(i, (secret, &choice))| {
            PartyState::new(i, secrets.len(), secret.clone(), choice, Arc::clone(&shared))
        })
        .collect::<Result<Vec<_>, _>>()?;
    run_parties(params, session_id, parties)
}

/// Drives pre-built parties to completion with the same deterministic
/// schedule as [`run_ceremony`].
pub fn run_parties(
    params: &GroupParams,
    session_id: &str,
    parties: Vec<PartyState>,
) -> Result<Transcript, ProtocolError> {
    let n = parties.len();
    if n < 2 {
        return Err(ProtocolError::BadPartyCount(n));
    }
    let mut slots: Vec<Option<PartyState>> = vec![None; n];
    for party in parties {
        if party.num_parties != n {
            return Err(ProtocolError::BadPartyCount(party.num_parties));
        }
        let pos = party.position;
        if pos >= n {
            return Err(ProtocolError::PositionOutOfRange { position: pos, num_parties: n });
        }
        if slots[pos].is_some() {
            return Err(ProtocolError::DuplicatePosition(pos));
        }
        slots[pos] = Some(party);
    }
    let mut parties: Vec<PartyState> = slots.into_iter().map(|s| s.expect("all slots filled")).collect();
    let base_choices: Vec<usize> = parties.iter().map(|p| p.base_index).collect();

    let mut log: Vec<Message> = Vec::with_capacity(n * (n - 1));
    let mut final_keys: Vec<Option<Element>> = vec![None; n];

    let mut current: Vec<Message> = Vec::with_capacity(n);
    for pos in 0..n {
        let (next, msg) = parties[pos].initial_message(session_id)?;
        parties[pos] = next;
        current.push(msg);
    }

    while !current.is_empty() {
        current.sort_by_key(|m| (m.round, m.from_position));
        let mut forwarded = Vec::with_capacity(current.len());
        for msg in current.drain(..) {
            let to = (msg.from_position + 1) % n;
            let (next, outcome) = parties[to].absorb_and_forward(&msg)?;
            parties[to] = next;
            log.push(msg);
            match outcome {
                AbsorbOutcome::Forward(fwd) => forwarded.push(fwd),
                AbsorbOutcome::Final(key) => final_keys[to] = Some(key),
            }
        }
        current = forwarded;
    }

    let final_keys = final_keys
        .into_iter()
        .map(|k| k.expect("every party completes after n-1 rounds"))
        .collect();
    Ok(Transcript {
        session_id: session_id.to_string(),
        params: params.clone(),
        messages: log,
        final_keys,
        base_choices,
    })
}
