//! Reductions to plain simple-valuation networks: regular valuations and nested locks.

mod locks;
mod regval;

pub use locks::{
    apply_action, check_ldpn, guesses, ldpn_to_dpn, validate_actions, validate_nested, Action,
    Guess, LDpn, LockEncoding, LockState, LockVerdict, LockViolation,
};
pub use regval::{
    parse_valuation, regval_encode, Dfa, RegularValuation, RegvalEncoding, RegvalError, ValEntry,
};
