//! Toolkit for N-party ring key agreement over a prime field.
//!
//! The pieces fit together like this: [`modmath`] supplies arbitrary-precision
//! arithmetic mod p and parameter validation; [`protocol`] runs the ring
//! ceremony in which every party's value circulates rightward, absorbing one
//! secret exponent per hop; [`outcome`] predicts in closed form which parties
//! end up holding equal keys when parties pick different bases; [`winner`]
//! maps an agreed key to a probability event via hashing; [`recurrence`]
//! checks claimed power-sum windows against the linear recurrence induced by
//! the public bases, so transcripts can be audited without learning any
//! exponent; [`transport`] provides a deterministic in-process bus and a TCP
//! loopback node plus the wire codec and transcript persistence; [`cli`]
//! exposes all of it as subcommands.

pub mod cli;
pub mod modmath;
pub mod outcome;
pub mod protocol;
pub mod recurrence;
pub mod transport;
pub mod winner;

pub use modmath::{Element, GroupParams};
pub use protocol::{Message, PartyState, Transcript};
