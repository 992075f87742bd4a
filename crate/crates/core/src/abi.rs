//! Registered contract functions and a minimal ABI codec.
//!
//! The eleven functions below are the only contract entry points the engine
//! knows. Each row carries the 4-byte selector, the parameter type list, and
//! an empirical call-frequency weight used by workload synthesis.
//!
//! The codec implements the standard 32-byte-word head/tail layout for the
//! handful of types these signatures need; it is not a general ABI library.

use thiserror::Error;

use crate::types::Address;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamType {
    Address,
    /// uint256 on the wire; values must fit in u128.
    Uint,
    Bytes,
    Bytes32,
    Str,
    AddressArray,
    UintArray,
}

/// One registered contract function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FunctionSpec {
    pub name: &'static str,
    pub selector: [u8; 4],
    pub params: &'static [ParamType],
    /// Empirical call count used as a sampling weight by workload synthesis.
    pub weight: u64,
}

use self::ParamType as P;

static REGISTRY: [FunctionSpec; 11] = [
    FunctionSpec {
        name: "transfer",
        selector: [0xa9, 0x05, 0x9c, 0xbb],
        params: &[P::Address, P::Uint],
        weight: 56_654,
    },
    FunctionSpec {
        name: "approve",
        selector: [0x09, 0x5e, 0xa7, 0xb3],
        params: &[P::Address, P::Uint],
        weight: 11_799,
    },
    FunctionSpec {
        name: "vote",
        selector: [0x01, 0x21, 0xb9, 0x3f],
        params: &[P::Uint],
        weight: 11_509,
    },
    FunctionSpec {
        name: "submitTransaction",
        selector: [0xc6, 0x42, 0x74, 0x74],
        params: &[P::Address, P::Uint, P::Bytes],
        weight: 8_163,
    },
    FunctionSpec {
        name: "issue",
        selector: [0x86, 0x79, 0x04, 0xb4],
        params: &[P::Address, P::Uint],
        weight: 5_723,
    },
    FunctionSpec {
        name: "__callback",
        selector: [0x38, 0xbb, 0xfa, 0x50],
        params: &[P::Bytes32, P::Str, P::Bytes],
        weight: 5_006,
    },
    FunctionSpec {
        name: "playerRollDice",
        selector: [0xdc, 0x6d, 0xd1, 0x52],
        params: &[P::Uint],
        weight: 4_997,
    },
    FunctionSpec {
        name: "multisend",
        selector: [0xad, 0x87, 0x33, 0xca],
        params: &[P::Address, P::AddressArray, P::UintArray],
        weight: 4_822,
    },
    FunctionSpec {
        name: "SmartAirdrop",
        selector: [0xa8, 0xfa, 0xf6, 0xf0],
        params: &[],
        weight: 4_467,
    },
    FunctionSpec {
        name: "PublicMine",
        selector: [0x87, 0xcc, 0xcc, 0xb3],
        params: &[],
        weight: 4_157,
    },
    FunctionSpec {
        name: "setGenesisAddress",
        selector: [0x0d, 0x57, 0x17, 0x42],
        params: &[P::Address, P::Uint, P::Bytes],
        weight: 3_119,
    },
];

pub fn registry() -> &'static [FunctionSpec] {
    &REGISTRY
}

pub fn lookup(selector: [u8; 4]) -> Option<&'static FunctionSpec> {
    REGISTRY.iter().find(|f| f.selector == selector)
}

pub fn by_name(name: &str) -> Option<&'static FunctionSpec> {
    REGISTRY.iter().find(|f| f.name == name)
}

/// A decoded (or to-be-encoded) argument value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Addr(crate::types::Address),
    Uint(u128),
    Bytes(Vec<u8>),
    Bytes32([u8; 32]),
    Str(String),
    AddrArray(Vec<crate::types::Address>),
    UintArray(Vec<u128>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("argument data truncated: needed {needed} bytes at offset {offset}, have {have}")]
    Truncated {
        offset: usize,
        needed: usize,
        have: usize,
    },
    #[error("uint256 value exceeds 128 bits")]
    UintOverflow,
    #[error("address word has nonzero padding")]
    AddressPadding,
    #[error("dynamic offset {0} out of range")]
    BadOffset(usize),
    #[error("declared length {0} out of range")]
    BadLength(usize),
    #[error("string is not valid UTF-8")]
    BadUtf8,
    #[error("unknown selector 0x{0}")]
    UnknownSelector(String),
}

fn word_at(data: &[u8], offset: usize) -> Result<&[u8], DecodeError> {
    data.get(offset..offset + 32).ok_or(DecodeError::Truncated {
        offset,
        needed: 32,
        have: data.len().saturating_sub(offset),
    })
}

fn decode_uint_word(word: &[u8]) -> Result<u128, DecodeError> {
    if word[..16].iter().any(|&b| b != 0) {
        return Err(DecodeError::UintOverflow);
    }
    let mut be = [0u8; 16];
    be.copy_from_slice(&word[16..]);
    Ok(u128::from_be_bytes(be))
}

fn decode_address_word(word: &[u8]) -> Result<crate::types::Address, DecodeError> {
    if word[..12].iter().any(|&b| b != 0) {
        return Err(DecodeError::AddressPadding);
    }
    let mut a = [0u8; 20];
    a.copy_from_slice(&word[12..]);
    Ok(crate::types::Address(a))
}

fn decode_usize_word(word: &[u8]) -> Result<usize, DecodeError> {
    let v = decode_uint_word(word).map_err(|_| DecodeError::BadLength(usize::MAX))?;
    usize::try_from(v).map_err(|_| DecodeError::BadLength(usize::MAX))
}

fn padded_len(n: usize) -> usize {
    n.div_ceil(32) * 32
}

/// Decode `data` (the input bytes after the 4-byte selector) against a
/// parameter type list.
pub fn decode_args(params: &[ParamType], data: &[u8]) -> Result<Vec<Value>, DecodeError> {
    let mut out = Vec::with_capacity(params.len());
    for (i, param) in params.iter().enumerate() {
        let head = word_at(data, i * 32)?;
        let value = match param {
            ParamType::Address => Value::Addr(decode_address_word(head)?),
            ParamType::Uint => Value::Uint(decode_uint_word(head)?),
            ParamType::Bytes32 => {
                let mut b = [0u8; 32];
                b.copy_from_slice(head);
                Value::Bytes32(b)
            }
            ParamType::Bytes | ParamType::Str => {
                let off = decode_usize_word(head).map_err(|_| DecodeError::BadOffset(0))?;
                let len = decode_usize_word(word_at(data, off)?)?;
                if len > data.len() {
                    return Err(DecodeError::BadLength(len));
                }
                let body = data
                    .get(off + 32..off + 32 + len)
                    .ok_or(DecodeError::Truncated {
                        offset: off + 32,
                        needed: len,
                        have: data.len().saturating_sub(off + 32),
                    })?;
                if *param == ParamType::Str {
                    let s = std::str::from_utf8(body).map_err(|_| DecodeError::BadUtf8)?;
                    Value::Str(s.to_string())
                } else {
                    Value::Bytes(body.to_vec())
                }
            }
            ParamType::AddressArray | ParamType::UintArray => {
                let off = decode_usize_word(head).map_err(|_| DecodeError::BadOffset(0))?;
                let len = decode_usize_word(word_at(data, off)?)?;
                if len > data.len() / 32 + 1 {
                    return Err(DecodeError::BadLength(len));
                }
                if *param == ParamType::AddressArray {
                    let mut items = Vec::with_capacity(len);
                    for k in 0..len {
                        items.push(decode_address_word(word_at(data, off + 32 + k * 32)?)?);
                    }
                    Value::AddrArray(items)
                } else {
                    let mut items = Vec::with_capacity(len);
                    for k in 0..len {
                        items.push(decode_uint_word(word_at(data, off + 32 + k * 32)?)?);
                    }
                    Value::UintArray(items)
                }
            }
        };
        out.push(value);
    }
    Ok(out)
}

fn push_uint_word(out: &mut Vec<u8>, v: u128) {
    out.extend_from_slice(&[0u8; 16]);
    out.extend_from_slice(&v.to_be_bytes());
}

fn push_address_word(out: &mut Vec<u8>, a: &Address) {
    out.extend_from_slice(&[0u8; 12]);
    out.extend_from_slice(a.as_bytes());
}

fn push_padded(out: &mut Vec<u8>, body: &[u8]) {
    out.extend_from_slice(body);
    out.resize(out.len() - body.len() + padded_len(body.len()), 0);
}

/// Encode argument values into the standard head/tail layout (no selector).
pub fn encode_args(args: &[Value]) -> Vec<u8> {
    let head_len = args.len() * 32;
    let mut head = Vec::with_capacity(head_len);
    let mut tail = Vec::new();
    for arg in args {
        match arg {
            Value::Addr(a) => push_address_word(&mut head, a),
            Value::Uint(v) => push_uint_word(&mut head, *v),
            Value::Bytes32(b) => head.extend_from_slice(b),
            Value::Bytes(b) => {
                push_uint_word(&mut head, (head_len + tail.len()) as u128);
                push_uint_word(&mut tail, b.len() as u128);
                push_padded(&mut tail, b);
            }
            Value::Str(s) => {
                push_uint_word(&mut head, (head_len + tail.len()) as u128);
                push_uint_word(&mut tail, s.len() as u128);
                push_padded(&mut tail, s.as_bytes());
            }
            Value::AddrArray(items) => {
                push_uint_word(&mut head, (head_len + tail.len()) as u128);
                push_uint_word(&mut tail, items.len() as u128);
                for a in items {
                    push_address_word(&mut tail, a);
                }
            }
            Value::UintArray(items) => {
                push_uint_word(&mut head, (head_len + tail.len()) as u128);
                push_uint_word(&mut tail, items.len() as u128);
                for v in items {
                    push_uint_word(&mut tail, *v);
                }
            }
        }
    }
    head.extend_from_slice(&tail);
    head
}

/// Build full calldata: selector followed by encoded arguments.
pub fn encode_call(spec: &FunctionSpec, args: &[Value]) -> Vec<u8> {
    debug_assert_eq!(spec.params.len(), args.len());
    let mut out = Vec::with_capacity(4 + args.len() * 32);
    out.extend_from_slice(&spec.selector);
    out.extend_from_slice(&encode_args(args));
    out
}

/// Decode full calldata into the function spec and its argument values.
pub fn decode_call(input: &[u8]) -> Result<(&'static FunctionSpec, Vec<Value>), DecodeError> {
    if input.len() < 4 {
        return Err(DecodeError::Truncated {
            offset: 0,
            needed: 4,
            have: input.len(),
        });
    }
    let sel = [input[0], input[1], input[2], input[3]];
    let spec = lookup(sel).ok_or_else(|| DecodeError::UnknownSelector(hex::encode(sel)))?;
    let args = decode_args(spec.params, &input[4..])?;
    Ok((spec, args))
}
