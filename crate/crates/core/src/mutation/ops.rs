//! Single-field lexical edits.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::codec::tplink;
use crate::codec::escape_bytes;
use crate::mutation::dictionary::Dictionaries;
use crate::protocol::{FieldId, FieldName};
use crate::seeds::FieldSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditKind {
    DictionarySubstitute,
    CharInsert,
    CharDelete,
    CharSubstitute,
    CharSwap,
    DigitPerturb,
    CaseFlip,
}

impl EditKind {
    pub const ALL: [EditKind; 7] = [
        EditKind::DictionarySubstitute,
        EditKind::CharInsert,
        EditKind::CharDelete,
        EditKind::CharSubstitute,
        EditKind::CharSwap,
        EditKind::DigitPerturb,
        EditKind::CaseFlip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EditKind::DictionarySubstitute => "dictionary_substitute",
            EditKind::CharInsert => "char_insert",
            EditKind::CharDelete => "char_delete",
            EditKind::CharSubstitute => "char_substitute",
            EditKind::CharSwap => "char_swap",
            EditKind::DigitPerturb => "digit_perturb",
            EditKind::CaseFlip => "case_flip",
        }
    }
}

/// Kind plus its parameters. Positions index the field value (for SmartHome
/// commands, the decoded plaintext).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Edit {
    DictionarySubstitute { index: usize },
    CharInsert { pos: usize, byte: u8 },
    CharDelete { pos: usize },
    CharSubstitute { pos: usize, byte: u8 },
    /// Swaps `pos` and `pos + 1`.
    CharSwap { pos: usize },
    DigitPerturb { pos: usize, digit: u8 },
    CaseFlip { pos: usize },
}

impl Edit {
    pub fn kind(&self) -> EditKind {
        match self {
            Edit::DictionarySubstitute { .. } => EditKind::DictionarySubstitute,
            Edit::CharInsert { .. } => EditKind::CharInsert,
            Edit::CharDelete { .. } => EditKind::CharDelete,
            Edit::CharSubstitute { .. } => EditKind::CharSubstitute,
            Edit::CharSwap { .. } => EditKind::CharSwap,
            Edit::DigitPerturb { .. } => EditKind::DigitPerturb,
            Edit::CaseFlip { .. } => EditKind::CaseFlip,
        }
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |b: u8| escape_bytes(&[b]);
        match self {
            Edit::DictionarySubstitute { index } => write!(f, "dictionary_substitute[{index}]"),
            Edit::CharInsert { pos, byte } => write!(f, "char_insert@{pos}='{}'", show(*byte)),
            Edit::CharDelete { pos } => write!(f, "char_delete@{pos}"),
            Edit::CharSubstitute { pos, byte } => write!(f, "char_substitute@{pos}='{}'", show(*byte)),
            Edit::CharSwap { pos } => write!(f, "char_swap@{pos}"),
            Edit::DigitPerturb { pos, digit } => write!(f, "digit_perturb@{pos}='{}'", show(*digit)),
            Edit::CaseFlip { pos } => write!(f, "case_flip@{pos}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MutationOp {
    pub target: FieldId,
    pub edit: Edit,
}

impl fmt::Display for MutationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.target.name, self.edit)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MutationError {
    #[error("{edit} is not applicable to {field}: {reason}")]
    Inapplicable {
        field: FieldId,
        edit: EditKind,
        reason: &'static str,
    },
    #[error("operation targets {op} but the seed is {seed}")]
    TargetMismatch { op: FieldId, seed: FieldId },
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Byte classes a char edit may introduce into a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alphabet {
    /// `A`..=`Z`.
    Upper,
    /// Visible ASCII, `!`..=`~`.
    Graphic,
    /// Space, tab and visible ASCII.
    Spacing,
    /// `\r` and `\n`.
    LineEnd,
    /// Space and visible ASCII.
    Printable,
    /// Any byte except NUL, CR and LF.
    Binary,
}

impl Alphabet {
    pub fn for_field(name: &FieldName) -> Self {
        match name {
            FieldName::Method => Alphabet::Upper,
            FieldName::SpLeft | FieldName::SpRight => Alphabet::Spacing,
            FieldName::Crlf => Alphabet::LineEnd,
            FieldName::FrameCommand => Alphabet::Printable,
            FieldName::FrameLength => Alphabet::Binary,
            _ => Alphabet::Graphic,
        }
    }

    pub fn contains(self, b: u8) -> bool {
        match self {
            Alphabet::Upper => b.is_ascii_uppercase(),
            Alphabet::Graphic => (0x21..=0x7e).contains(&b),
            Alphabet::Spacing => b == b'\t' || (0x20..=0x7e).contains(&b),
            Alphabet::LineEnd => b == b'\r' || b == b'\n',
            Alphabet::Printable => (0x20..=0x7e).contains(&b),
            Alphabet::Binary => !matches!(b, 0 | b'\r' | b'\n'),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> u8 {
        match self {
            Alphabet::Upper => rng.random_range(b'A'..=b'Z'),
            Alphabet::Graphic => rng.random_range(0x21..=0x7e),
            Alphabet::Spacing => {
                // half blanks, half visible
                match rng.random_range(0..4) {
                    0 => b' ',
                    1 => b'\t',
                    _ => rng.random_range(0x21..=0x7e),
                }
            }
            Alphabet::LineEnd => {
                if rng.random_bool(0.5) {
                    b'\r'
                } else {
                    b'\n'
                }
            }
            Alphabet::Printable => rng.random_range(0x20..=0x7e),
            Alphabet::Binary => loop {
                let b: u8 = rng.random_range(1..=0xff);
                if b != b'\r' && b != b'\n' {
                    break b;
                }
            },
        }
    }
}

/// Everything needed to draw or apply an edit on one field.
#[derive(Debug, Clone)]
pub struct FieldContext {
    pub field: FieldId,
    pub alphabet: Alphabet,
    pub dictionary: Option<Vec<Vec<u8>>>,
}

impl FieldContext {
    /// `extra` overrides the protocol dictionary for this field.
    pub fn new(field: FieldId, dicts: &Dictionaries, extra: Option<&[Vec<u8>]>) -> Self {
        let dictionary = match extra {
            Some(values) if !values.is_empty() => Some(values.to_vec()),
            _ => dicts.values_for(field.protocol, &field.name),
        };
        Self {
            alphabet: Alphabet::for_field(&field.name),
            field,
            dictionary,
        }
    }

    fn is_command(&self) -> bool {
        self.field.name == FieldName::FrameCommand
    }

    fn fixed_width(&self) -> bool {
        self.field.name == FieldName::FrameLength
    }

    /// Shortest length a deletion may leave behind.
    fn min_len(&self) -> usize {
        if self.field.name.is_structure_risk() || self.field.name == FieldName::UriQuery {
            0
        } else {
            1
        }
    }

    fn inapplicable(&self, edit: EditKind, reason: &'static str) -> MutationError {
        MutationError::Inapplicable {
            field: self.field.clone(),
            edit,
            reason,
        }
    }

    /// Applies `edit` to `value`, returning the new field bytes.
    pub fn apply(&self, value: &[u8], edit: &Edit) -> Result<Vec<u8>, MutationError> {
        let kind = edit.kind();
        if let Edit::DictionarySubstitute { index } = *edit {
            let dict = self
                .dictionary
                .as_ref()
                .ok_or_else(|| self.inapplicable(kind, "field has no dictionary"))?;
            let entry = dict
                .get(index)
                .ok_or_else(|| self.inapplicable(kind, "dictionary index out of range"))?;
            if entry.as_slice() == value {
                return Err(self.inapplicable(kind, "entry equals current value"));
            }
            return Ok(entry.clone());
        }

        let mut work = if self.is_command() {
            tplink::decode(value)
        } else {
            value.to_vec()
        };
        let len = work.len();
        let err = |reason| Err(self.inapplicable(kind, reason));
        if self.fixed_width() && !matches!(edit, Edit::CharSubstitute { .. }) {
            return err("fixed-width field only takes substitutions");
        }
        match *edit {
            Edit::DictionarySubstitute { .. } => unreachable!(),
            Edit::CharInsert { pos, byte } => {
                if pos > len {
                    return err("position out of range");
                }
                if !self.alphabet.contains(byte) {
                    return err("byte outside field alphabet");
                }
                work.insert(pos, byte);
            }
            Edit::CharDelete { pos } => {
                if pos >= len {
                    return err("position out of range");
                }
                if len <= self.min_len() {
                    return err("value too short to delete from");
                }
                work.remove(pos);
            }
            Edit::CharSubstitute { pos, byte } => {
                if pos >= len {
                    return err("position out of range");
                }
                if !self.alphabet.contains(byte) || work[pos] == byte {
                    return err("replacement byte not usable");
                }
                work[pos] = byte;
            }
            Edit::CharSwap { pos } => {
                if pos + 1 >= len {
                    return err("position out of range");
                }
                if work[pos] == work[pos + 1] {
                    return err("swap would not change the value");
                }
                work.swap(pos, pos + 1);
            }
            Edit::DigitPerturb { pos, digit } => {
                if pos >= len || !work[pos].is_ascii_digit() {
                    return err("position is not a decimal digit");
                }
                if !digit.is_ascii_digit() || digit == work[pos] {
                    return err("replacement is not a different digit");
                }
                work[pos] = digit;
            }
            Edit::CaseFlip { pos } => {
                if pos >= len || !work[pos].is_ascii_alphabetic() {
                    return err("position is not a letter");
                }
                work[pos] ^= 0x20;
            }
        }
        Ok(if self.is_command() {
            tplink::encode(&work)
        } else {
            work
        })
    }

    /// Draws a random edit applicable to `value`, or `None` when nothing fits.
    pub fn draw<R: Rng + ?Sized>(&self, value: &[u8], rng: &mut R) -> Option<Edit> {
        let plain;
        let view: &[u8] = if self.is_command() {
            plain = tplink::decode(value);
            &plain
        } else {
            value
        };
        let digits: Vec<usize> = positions(view, u8::is_ascii_digit);
        let letters: Vec<usize> = positions(view, u8::is_ascii_alphabetic);

        let mut kinds: Vec<EditKind> = Vec::with_capacity(7);
        if self.fixed_width() {
            kinds.push(EditKind::CharSubstitute);
        } else {
            if self.dictionary.as_ref().is_some_and(|d| d.iter().any(|e| e != value)) {
                kinds.push(EditKind::DictionarySubstitute);
            }
            kinds.push(EditKind::CharInsert);
            if view.len() > self.min_len() {
                kinds.push(EditKind::CharDelete);
            }
            if !view.is_empty() {
                kinds.push(EditKind::CharSubstitute);
            }
            if view.windows(2).any(|w| w[0] != w[1]) {
                kinds.push(EditKind::CharSwap);
            }
            if !digits.is_empty() {
                kinds.push(EditKind::DigitPerturb);
            }
            if !letters.is_empty() {
                kinds.push(EditKind::CaseFlip);
            }
        }
        if view.is_empty() && !kinds.contains(&EditKind::CharInsert) {
            return None;
        }

        for _ in 0..16 {
            let kind = kinds[rng.random_range(0..kinds.len())];
            let edit = match kind {
                EditKind::DictionarySubstitute => {
                    let dict = self.dictionary.as_ref()?;
                    Edit::DictionarySubstitute {
                        index: rng.random_range(0..dict.len()),
                    }
                }
                EditKind::CharInsert => Edit::CharInsert {
                    pos: rng.random_range(0..=view.len()),
                    byte: self.alphabet.sample(rng),
                },
                EditKind::CharDelete => Edit::CharDelete {
                    pos: rng.random_range(0..view.len()),
                },
                EditKind::CharSubstitute => Edit::CharSubstitute {
                    pos: rng.random_range(0..view.len()),
                    byte: self.alphabet.sample(rng),
                },
                EditKind::CharSwap => Edit::CharSwap {
                    pos: rng.random_range(0..view.len() - 1),
                },
                EditKind::DigitPerturb => Edit::DigitPerturb {
                    pos: digits[rng.random_range(0..digits.len())],
                    digit: rng.random_range(b'0'..=b'9'),
                },
                EditKind::CaseFlip => Edit::CaseFlip {
                    pos: letters[rng.random_range(0..letters.len())],
                },
            };
            if self.apply(value, &edit).is_ok() {
                return Some(edit);
            }
        }
        None
    }
}

fn positions(bytes: &[u8], pred: impl Fn(&u8) -> bool) -> Vec<usize> {
    bytes
        .iter()
        .enumerate()
        .filter(|(_, b)| pred(b))
        .map(|(i, _)| i)
        .collect()
}

/// Applies one operation to a seed value.
pub fn mutate_field(
    seed: &FieldSeed,
    op: &MutationOp,
    dicts: &Dictionaries,
) -> Result<Vec<u8>, MutationError> {
    if op.target != seed.field {
        return Err(MutationError::TargetMismatch {
            op: op.target.clone(),
            seed: seed.field.clone(),
        });
    }
    FieldContext::new(seed.field.clone(), dicts, None).apply(&seed.value, &op.edit)
}

/// Applies a list of operations in order; an empty list is the identity.
pub fn mutate_field_all(
    seed: &FieldSeed,
    ops: &[MutationOp],
    dicts: &Dictionaries,
) -> Result<Vec<u8>, MutationError> {
    let mut current = seed.clone();
    for op in ops {
        current.value = mutate_field(&current, op, dicts)?;
    }
    Ok(current.value)
}
